//! Critical points of a fitted potential: dogleg trust-region iterations on
//! `∇u(p) = 0` with the analytic Hessian as Jacobian, followed by
//! classification from the Hessian eigenvalues.

use nalgebra::{Complex, DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{grid_nodes, BoundingBox, Dim, Point};
use crate::model::{CriticalKind, ScalarPotentialModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrustRegionConfig {
    /// Convergence when `‖∇u‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_radius: f64,
    pub expand: f64,
    pub contract: f64,
    /// Steps with `actual / predicted` reduction above this are accepted.
    pub accept_ratio: f64,
    pub max_radius: f64,
    /// Converged points closer than this are merged.
    pub dedup_distance: f64,
    /// `|λ| < degeneracy · max|λ|` marks a degenerate point.
    pub degeneracy: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            tol: 1e-12,
            max_iter: 100,
            initial_radius: 1.0,
            expand: 2.0,
            contract: 0.25,
            accept_ratio: 0.1,
            max_radius: 1e3,
            dedup_distance: 1e-6,
            degeneracy: 1e-8,
        }
    }
}

/// One accepted iterate: iteration number, gradient evaluations so far, the
/// point and `‖∇u‖₂` there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub evaluations: usize,
    pub point: Point,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub location: Point,
    pub gradient_norm: f64,
    pub classification: CriticalKind,
    pub eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// The Hessian could not be evaluated (centre singularity).
    pub singular: bool,
    pub guess: Point,
    pub path: Vec<TraceStep>,
}

pub fn classify_eigenvalues(eigenvalues: &[f64], degeneracy: f64) -> CriticalKind {
    let top = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if top == 0.0 || eigenvalues.iter().any(|l| l.abs() < degeneracy * top) {
        CriticalKind::Degenerate
    } else if eigenvalues.iter().all(|&l| l > 0.0) {
        CriticalKind::Minimum
    } else if eigenvalues.iter().all(|&l| l < 0.0) {
        CriticalKind::Maximum
    } else {
        CriticalKind::Saddle
    }
}

fn block(m: &Matrix3<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| m[(i, j)])
}

fn lift(v: &DVector<f64>) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    out.as_mut_slice()[..v.len()].copy_from_slice(v.as_slice());
    out
}

fn sorted_eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Minimum-norm solution of `H s = −F`.
fn newton_step(h: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let svd = h.clone().svd(true, true);
    let top = svd.singular_values.max();
    let tol = top * 1e-14 * h.nrows() as f64;
    svd.solve(&(-f), tol).unwrap_or_else(|_| DVector::zeros(f.len()))
}

/// Dogleg step inside radius `delta` for the model `‖F + H s‖²`.
fn dogleg(h: &DMatrix<f64>, f: &DVector<f64>, delta: f64) -> DVector<f64> {
    let s_n = newton_step(h, f);
    if s_n.norm() <= delta && s_n.iter().all(|x| x.is_finite()) {
        return s_n;
    }
    let g = h.tr_mul(f);
    let gn = g.norm();
    if gn == 0.0 {
        let scale = delta / s_n.norm().max(f64::MIN_POSITIVE);
        return s_n * scale;
    }
    let hg = h * &g;
    let hgn2 = hg.norm_squared();
    if hgn2 == 0.0 {
        return &g * (-delta / gn);
    }
    let s_c = &g * (-(gn * gn) / hgn2);
    if s_c.norm() >= delta {
        return &g * (-delta / gn);
    }
    // s_c + τ (s_n − s_c) with ‖·‖ = δ.
    let d = &s_n - &s_c;
    let a = d.norm_squared();
    let b = 2.0 * s_c.dot(&d);
    let c = s_c.norm_squared() - delta * delta;
    let tau = if a > 0.0 {
        (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a)
    } else {
        0.0
    };
    s_c + d * tau.clamp(0.0, 1.0)
}

/// Runs the trust-region iteration from one starting point.
pub fn trust_region_run(model: &ScalarPotentialModel, guess: &Point, cfg: &TrustRegionConfig) -> Result<CriticalPoint> {
    let n = model.dim.n();
    let grad = |p: &Point| -> Result<DVector<f64>> {
        let g = model.gradient(p)?;
        Ok(DVector::from_iterator(n, g.iter().take(n).copied()))
    };
    let mut p = *guess;
    let mut f = grad(&p)?;
    let mut evaluations = 1;
    let mut delta = cfg.initial_radius;
    let mut iterations = 0;
    let mut singular = false;
    let mut path = vec![TraceStep {
        iteration: 0,
        evaluations,
        point: p,
        gradient_norm: f.norm(),
    }];
    while f.norm() > cfg.tol && iterations < cfg.max_iter {
        iterations += 1;
        let h = match model.hessian(&p) {
            Ok(h) => block(&h, n),
            Err(e) if e.is_numerical() => {
                singular = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let s = dogleg(&h, &f, delta);
        let snorm = s.norm();
        if !(snorm > 0.0) || !s.iter().all(|x| x.is_finite()) {
            break;
        }
        let f0 = f.norm_squared();
        let pred = f0 - (&f + &h * &s).norm_squared();
        let candidate = p + lift(&s);
        let f_new = match grad(&candidate) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                delta *= cfg.contract;
                continue;
            }
            Err(e) => return Err(e),
        };
        evaluations += 1;
        let actual = f0 - f_new.norm_squared();
        let rho = if pred > 0.0 {
            actual / pred
        } else if actual > 0.0 {
            1.0
        } else {
            -1.0
        };
        if rho < 0.25 {
            delta = cfg.contract * snorm.min(delta);
        } else if rho > 0.75 && snorm >= 0.99 * delta {
            delta = (cfg.expand * delta).min(cfg.max_radius);
        }
        if rho > cfg.accept_ratio && actual > 0.0 {
            p = candidate;
            f = f_new;
            path.push(TraceStep {
                iteration: iterations,
                evaluations,
                point: p,
                gradient_norm: f.norm(),
            });
        }
        if delta < f64::EPSILON * (1.0 + p.norm()) {
            break;
        }
    }
    let gradient_norm = f.norm();
    let converged = gradient_norm <= cfg.tol;
    let (eigenvalues, classification) = match model.hessian(&p) {
        Ok(h) if !singular => {
            let e = sorted_eigenvalues(&block(&h, n));
            let c = classify_eigenvalues(&e, cfg.degeneracy);
            (e, c)
        }
        _ => {
            singular = true;
            (Vec::new(), CriticalKind::Degenerate)
        }
    };
    Ok(CriticalPoint {
        location: p,
        gradient_norm,
        classification,
        eigenvalues,
        iterations,
        evaluations,
        converged,
        singular,
        guess: *guess,
        path,
    })
}

/// One run per guess, in guess order.
pub fn trust_region_runs(
    model: &ScalarPotentialModel,
    guesses: &[Point],
    cfg: &TrustRegionConfig,
) -> Result<Vec<CriticalPoint>> {
    guesses.par_iter().map(|g| trust_region_run(model, g, cfg)).collect()
}

/// Converged points (deduplicated, first occurrence kept) followed by the
/// runs that did not converge.
pub fn find_critical_points(
    model: &ScalarPotentialModel,
    guesses: &[Point],
    cfg: &TrustRegionConfig,
) -> Result<Vec<CriticalPoint>> {
    let runs = trust_region_runs(model, guesses, cfg)?;
    let mut unique: Vec<CriticalPoint> = Vec::new();
    let mut failed = Vec::new();
    for r in runs {
        if !r.converged {
            failed.push(r);
        } else if !unique
            .iter()
            .any(|u| (u.location - r.location).norm() < cfg.dedup_distance)
        {
            unique.push(r);
        }
    }
    unique.extend(failed);
    Ok(unique)
}

/// Cell-centred grid of `per_axis^d` starting points over `bbox`.
pub fn default_guesses(bbox: &BoundingBox, dim: Dim, per_axis: usize) -> Vec<Point> {
    let per_axis = per_axis.max(1);
    let h = bbox.extent() / per_axis as f64;
    let inner = BoundingBox::new(bbox.min + h * 0.5, bbox.max - h * 0.5);
    if per_axis == 1 {
        return vec![(bbox.min + bbox.max) * 0.5];
    }
    let mut pts = grid_nodes(&inner, dim, &[per_axis, per_axis, per_axis]);
    if dim == Dim::Two {
        for p in &mut pts {
            p.z = 0.0;
        }
    }
    pts
}

/// Eigenvalues of a field Jacobian (leading `dim × dim` block). No
/// classification is attached.
pub fn jacobian_eigenvalues(jacobian: &Matrix3<f64>, dim: Dim) -> Vec<Complex<f64>> {
    match dim {
        Dim::Two => jacobian
            .fixed_view::<2, 2>(0, 0)
            .into_owned()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect(),
        Dim::Three => jacobian.complex_eigenvalues().iter().copied().collect(),
    }
}
