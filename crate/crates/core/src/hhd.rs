//! Meshless Helmholtz-Hodge decomposition `v = ∇u + ∇∧w + h`.
//!
//! Three strategies are provided:
//!
//! * `Direct`: least squares on the gradient system `Φα = v` and the rotor
//!   system `Aα = v` at the sample points.
//! * `Weighted`: the same energies integrated over the bounding box with a
//!   midpoint rule, against a componentwise interpolant `ṽ`.
//! * `Laplace`: `Δu = ∇·ṽ` and `Δw = −∇∧ṽ` collocated at the samples.
//!
//! No boundary conditions are imposed; the potentials are the least-squares
//! coefficient vectors and `h` is the pointwise residual.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_componentwise, FitConfig, DEFAULT_EPSILON};
use crate::geometry::{cell_midpoints, Dim, Point};
use crate::kernels::Kernel;
use crate::linalg::{solve_least_squares, solve_least_squares_vec, solve_normal_matrix, SolveStats, SolverKind};
use crate::model::{ComponentwiseField, SampleSet, ScalarPotentialModel, VectorPotentialModel};
use crate::systems::{gradient_matrix, laplacian_matrix, rotor_matrix, split_blocks, stack_vectors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Direct,
    Weighted,
    Laplace,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Direct => "direct",
            Strategy::Weighted => "weighted",
            Strategy::Laplace => "laplace",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Strategy::Direct),
            "weighted" => Ok(Strategy::Weighted),
            "laplace" => Ok(Strategy::Laplace),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected direct, weighted or laplace)"
            ))),
        }
    }
}

/// How the rotor system is fed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Both systems see the input field.
    #[default]
    Independent,
    /// The rotor system sees `v − ∇u`.
    SequentialResidual,
}

impl FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(FitMode::Independent),
            "sequential" | "sequential_residual" | "sequential-residual" => Ok(FitMode::SequentialResidual),
            other => Err(Error::Config(format!(
                "unknown fit mode `{other}` (expected independent or sequential)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HHDConfig {
    #[serde(default)]
    pub strategy: Strategy,
    pub kernel: Kernel,
    /// `None` places a centre at every sample point.
    #[serde(default)]
    pub centres: Option<Vec<Point>>,
    #[serde(default = "default_epsilon")]
    pub regularization_epsilon: f64,
    /// Midpoint cells per axis for `Weighted`.
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
    #[serde(default)]
    pub fit_mode: FitMode,
    #[serde(default)]
    pub solver: SolverKind,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_quadrature() -> usize {
    32
}

impl HHDConfig {
    pub fn new(strategy: Strategy, kernel: Kernel) -> Self {
        HHDConfig {
            strategy,
            kernel,
            centres: None,
            regularization_epsilon: DEFAULT_EPSILON,
            quadrature: default_quadrature(),
            fit_mode: FitMode::Independent,
            solver: SolverKind::Auto,
        }
    }

    pub fn with_centres(mut self, centres: Vec<Point>) -> Self {
        self.centres = Some(centres);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.regularization_epsilon = epsilon;
        self
    }

    pub fn with_fit_mode(mut self, mode: FitMode) -> Self {
        self.fit_mode = mode;
        self
    }

    pub fn with_quadrature(mut self, cells: usize) -> Self {
        self.quadrature = cells;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let flags = self.kernel.existence_flags();
        if !flags.gradient_exists {
            return Err(Error::Config(format!(
                "{} kernel has no gradient at its centres ({}); it cannot be used for decomposition",
                self.kernel.family, flags.condition_note
            )));
        }
        if self.strategy == Strategy::Laplace && !flags.hessian_exists {
            return Err(Error::Config(format!(
                "the laplace strategy needs a C2 kernel; {} has no Hessian at its centres",
                self.kernel.family
            )));
        }
        if !(self.regularization_epsilon >= 0.0 && self.regularization_epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be >= 0, got {}",
                self.regularization_epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HHDDiagnostics {
    pub strategy: Strategy,
    pub fit_mode: FitMode,
    pub centres: usize,
    pub samples: usize,
    pub conservative_solve: SolveStats,
    pub solenoidal_solve: SolveStats,
    /// Laplace strategy: `‖α_ε − α₀‖ / ‖α₀‖` for the conservative system,
    /// when the unregularized system is solvable.
    pub regularization_shift: Option<f64>,
    pub harmonic_max: f64,
    pub harmonic_rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HHDResult {
    pub conservative: ScalarPotentialModel,
    pub solenoidal: VectorPotentialModel,
    /// `h = v − ∇u − ∇∧w` at the input points, in input order.
    pub harmonic_samples: Vec<Vector3<f64>>,
    pub diagnostics: HHDDiagnostics,
}

impl HHDResult {
    pub fn conservative_at(&self, p: &Point) -> Result<Vector3<f64>> {
        self.conservative.gradient(p)
    }

    pub fn solenoidal_at(&self, p: &Point) -> Result<Vector3<f64>> {
        self.solenoidal.curl(p)
    }
}

/// Input points and vectors; every point must carry a vector.
fn vector_input(samples: &SampleSet) -> Result<(Vec<Point>, Vec<Vector3<f64>>)> {
    if samples.vector_values().is_empty() {
        return Err(Error::Input("decomposition needs vector samples".into()));
    }
    if samples.vector_values().len() != samples.len() {
        return Err(Error::Input(format!(
            "decomposition needs a vector at every point ({} of {} carry one)",
            samples.vector_values().len(),
            samples.len()
        )));
    }
    let mut vs = vec![Vector3::zeros(); samples.len()];
    for &(j, v) in samples.vector_values() {
        vs[j] = v;
    }
    Ok((samples.points().to_vec(), vs))
}

fn resolve(config: &HHDConfig, points: &[Point]) -> Result<(Kernel, Vec<Point>)> {
    config.validate()?;
    let centres = config.centres.clone().unwrap_or_else(|| points.to_vec());
    if centres.is_empty() {
        return Err(Error::Input("no centres".into()));
    }
    Ok((config.kernel.with_default_support(&centres), centres))
}

/// Least squares with the regularization added automatically when the
/// unregularized system turns out singular.
fn solve_with_fallback(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    epsilon: f64,
    solver: SolverKind,
) -> Result<(DVector<f64>, SolveStats)> {
    match solve_least_squares_vec(m, b, epsilon, solver) {
        Err(Error::IllConditioned { condition }) if epsilon == 0.0 => {
            log::warn!("system is singular (condition ~ {condition:.3e}); retrying with epsilon = {DEFAULT_EPSILON:e}");
            solve_least_squares_vec(m, b, DEFAULT_EPSILON, solver)
        }
        other => other,
    }
}

fn harmonic(
    points: &[Point],
    vs: &[Vector3<f64>],
    u: &ScalarPotentialModel,
    w: &VectorPotentialModel,
) -> Result<Vec<Vector3<f64>>> {
    points
        .par_iter()
        .zip(vs.par_iter())
        .map(|(p, v)| Ok(v - u.gradient(p)? - w.curl(p)?))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    config: &HHDConfig,
    points: &[Point],
    vs: &[Vector3<f64>],
    conservative: ScalarPotentialModel,
    solenoidal: VectorPotentialModel,
    conservative_solve: SolveStats,
    solenoidal_solve: SolveStats,
    regularization_shift: Option<f64>,
) -> Result<HHDResult> {
    let h = harmonic(points, vs, &conservative, &solenoidal)?;
    let harmonic_max = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let harmonic_rms = (h.iter().map(|v| v.norm_squared()).sum::<f64>() / h.len().max(1) as f64).sqrt();
    Ok(HHDResult {
        diagnostics: HHDDiagnostics {
            strategy: config.strategy,
            fit_mode: config.fit_mode,
            centres: conservative.len(),
            samples: points.len(),
            conservative_solve,
            solenoidal_solve,
            regularization_shift,
            harmonic_max,
            harmonic_rms,
        },
        conservative,
        solenoidal,
        harmonic_samples: h,
    })
}

/// Dispatches on `config.strategy`.
pub fn decompose(samples: &SampleSet, config: &HHDConfig) -> Result<HHDResult> {
    match config.strategy {
        Strategy::Direct => decompose_direct(samples, config),
        Strategy::Weighted => decompose_weighted(samples, config),
        Strategy::Laplace => decompose_laplace(samples, config),
    }
}

pub fn decompose_direct(samples: &SampleSet, config: &HHDConfig) -> Result<HHDResult> {
    let dim = samples.dim();
    let (points, vs) = vector_input(samples)?;
    let (kernel, centres) = resolve(config, &points)?;
    let k = centres.len();
    let eps = config.regularization_epsilon;

    let phi = gradient_matrix(&kernel, &centres, &points, dim)?;
    let b = stack_vectors(&vs, dim);
    let (alpha, cons_stats) = solve_with_fallback(&phi, &b, eps, config.solver)?;
    let conservative = ScalarPotentialModel::new(dim, kernel, centres.clone(), alpha.as_slice().to_vec())?;

    let rhs = match config.fit_mode {
        FitMode::Independent => b,
        FitMode::SequentialResidual => &b - &phi * &alpha,
    };
    drop(phi);
    let a = rotor_matrix(&kernel, &centres, &points, dim)?;
    let (beta, sol_stats) = solve_with_fallback(&a, &rhs, eps, config.solver)?;
    let solenoidal = VectorPotentialModel::new(dim, kernel, centres, split_blocks(&beta, k))?;

    finish(
        config,
        &points,
        &vs,
        conservative,
        solenoidal,
        cons_stats,
        sol_stats,
        None,
    )
}

/// Componentwise interpolant of the samples, used by the weighted and
/// Laplace strategies.
fn surrogate(samples: &SampleSet, config: &HHDConfig) -> Result<ComponentwiseField> {
    let fit = FitConfig::new(config.kernel)
        .with_centres(samples.vector_points().0)
        .with_epsilon(config.regularization_epsilon);
    ComponentwiseField::new(fit_componentwise(samples, &fit)?)
}

/// Accumulates `Σ_blocks Bᵀ B` and `Bᵀ b` over quadrature nodes, scaled by
/// the cell measure.
fn accumulate_normal<F>(
    nodes: &[Point],
    targets: &[Vector3<f64>],
    dim: Dim,
    cols: usize,
    weight: f64,
    block: F,
) -> Result<(DMatrix<f64>, DVector<f64>)>
where
    F: Fn(&[Point]) -> Result<DMatrix<f64>> + Sync,
{
    const CHUNK: usize = 256;
    let parts: Vec<(DMatrix<f64>, DVector<f64>)> = nodes
        .par_chunks(CHUNK)
        .zip(targets.par_chunks(CHUNK))
        .map(|(pts, vs)| {
            let m = block(pts)?;
            let b = stack_vectors(vs, dim);
            Ok((m.tr_mul(&m), m.tr_mul(&b)))
        })
        .collect::<Result<_>>()?;
    let mut a = DMatrix::zeros(cols, cols);
    let mut rhs = DVector::zeros(cols);
    for (pa, pb) in parts {
        a += pa;
        rhs += pb;
    }
    // Exact symmetry regardless of summation order.
    let a = (&a + a.transpose()) * (0.5 * weight);
    Ok((a, rhs * weight))
}

/// Normal matrices of the weighted strategy: `∫⟨∇φᵢ, ∇φⱼ⟩` and the rotor
/// analogue, with their right-hand sides against `ṽ`.
pub struct WeightedSystems {
    pub gradient: (DMatrix<f64>, DVector<f64>),
    pub rotor: (DMatrix<f64>, DVector<f64>),
}

pub fn weighted_systems(
    samples: &SampleSet,
    config: &HHDConfig,
    kernel: &Kernel,
    centres: &[Point],
) -> Result<WeightedSystems> {
    let dim = samples.dim();
    let bbox = samples.bounding_box()?;
    let cells = config.quadrature;
    let (nodes, measure) = cell_midpoints(&bbox, dim, cells);
    if nodes.len() < centres.len() {
        return Err(Error::Config(format!(
            "quadrature grid has {} nodes but there are {} centres; increase the resolution",
            nodes.len(),
            centres.len()
        )));
    }
    let vt = surrogate(samples, config)?;
    let targets: Vec<Vector3<f64>> = nodes.par_iter().map(|p| vt.eval(p)).collect::<Result<_>>()?;
    let k = centres.len();
    let gradient = accumulate_normal(&nodes, &targets, dim, k, measure, |pts| {
        gradient_matrix(kernel, centres, pts, dim)
    })?;
    let nb = VectorPotentialModel::components_for(dim);
    let targets_sol = match config.fit_mode {
        FitMode::Independent => targets,
        FitMode::SequentialResidual => {
            let (a, b) = &gradient;
            let (alpha, _) = solve_normal_matrix(
                a,
                &DMatrix::from_column_slice(k, 1, b.as_slice()),
                config.regularization_epsilon,
            )?;
            let u = ScalarPotentialModel::new(
                dim,
                *kernel,
                centres.to_vec(),
                alpha.column(0).iter().copied().collect(),
            )?;
            nodes
                .par_iter()
                .zip(targets.par_iter())
                .map(|(p, v)| Ok(v - u.gradient(p)?))
                .collect::<Result<_>>()?
        }
    };
    let rotor = accumulate_normal(&nodes, &targets_sol, dim, nb * k, measure, |pts| {
        rotor_matrix(kernel, centres, pts, dim)
    })?;
    Ok(WeightedSystems { gradient, rotor })
}

pub fn decompose_weighted(samples: &SampleSet, config: &HHDConfig) -> Result<HHDResult> {
    let dim = samples.dim();
    let (points, vs) = vector_input(samples)?;
    let (kernel, centres) = resolve(config, &points)?;
    let k = centres.len();
    let eps = config.regularization_epsilon;
    let sys = weighted_systems(samples, config, &kernel, &centres)?;
    let as_col = |b: &DVector<f64>| DMatrix::from_column_slice(b.len(), 1, b.as_slice());

    let (alpha, cons_stats) = solve_normal_matrix(&sys.gradient.0, &as_col(&sys.gradient.1), eps)?;
    let conservative =
        ScalarPotentialModel::new(dim, kernel, centres.clone(), alpha.column(0).iter().copied().collect())?;
    let (beta, sol_stats) = solve_normal_matrix(&sys.rotor.0, &as_col(&sys.rotor.1), eps)?;
    let beta = beta.column(0).into_owned();
    let solenoidal = VectorPotentialModel::new(dim, kernel, centres, split_blocks(&beta, k))?;

    finish(
        config,
        &points,
        &vs,
        conservative,
        solenoidal,
        cons_stats,
        sol_stats,
        None,
    )
}

pub fn decompose_laplace(samples: &SampleSet, config: &HHDConfig) -> Result<HHDResult> {
    let dim = samples.dim();
    let (points, vs) = vector_input(samples)?;
    let (kernel, centres) = resolve(config, &points)?;
    let eps = config.regularization_epsilon;
    let vt = surrogate(samples, config)?;
    let dc: Vec<(f64, Vector3<f64>)> = points
        .par_iter()
        .map(|p| vt.divergence_curl(p))
        .collect::<Result<_>>()?;

    let l = laplacian_matrix(&kernel, &centres, &points, dim)?;
    let div = DVector::from_iterator(points.len(), dc.iter().map(|(d, _)| *d));
    // The regularization is mandatory here: harmonic functions span a large
    // null space of the collocated Laplacian.
    let eps_used = if eps > 0.0 { eps } else { DEFAULT_EPSILON };
    let (alpha, cons_stats) = solve_least_squares_vec(&l, &div, eps_used, config.solver)?;
    let shift = match solve_least_squares_vec(&l, &div, 0.0, SolverKind::Qr) {
        Ok((a0, _)) if a0.norm() > 0.0 => Some((&alpha - &a0).norm() / a0.norm()),
        Ok(_) => Some(if alpha.norm() == 0.0 { 0.0 } else { f64::INFINITY }),
        Err(_) => None,
    };
    match shift {
        Some(s) if s > 1e-3 => log::warn!("regularization shifts the conservative coefficients by {s:.3e} (relative)"),
        None => log::warn!("the unregularized Laplace system is singular; the solution is fixed by epsilon"),
        _ => {}
    }
    let conservative = ScalarPotentialModel::new(dim, kernel, centres.clone(), alpha.as_slice().to_vec())?;

    // Δw = −∇∧ṽ per component (one stream function in 2D).
    let nb = VectorPotentialModel::components_for(dim);
    let rhs = DMatrix::from_fn(points.len(), nb, |j, c| match dim {
        Dim::Three => -dc[j].1[c],
        Dim::Two => -dc[j].1.z,
    });
    let (beta, sol_stats) = solve_least_squares(&l, &rhs, eps_used, config.solver)?;
    let blocks = (0..nb).map(|c| beta.column(c).iter().copied().collect()).collect();
    let solenoidal = VectorPotentialModel::new(dim, kernel, centres, blocks)?;

    finish(
        config,
        &points,
        &vs,
        conservative,
        solenoidal,
        cons_stats,
        sol_stats,
        shift,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualDiagnostics {
    pub points_checked: usize,
    /// `max |∇·(∇∧w)|`.
    pub max_divergence_of_curl: f64,
    /// `max ‖∇∧(∇u)‖`.
    pub max_curl_of_gradient: f64,
    pub harmonic_max: f64,
    pub harmonic_rms: f64,
    /// `Σ‖∇u‖²`, `Σ‖∇∧w‖²`, `Σ‖h‖²` over the samples, each divided by
    /// `Σ‖v‖²`.
    pub energy_fractions: [f64; 3],
}

pub const DIAGNOSTIC_POINTS: usize = 200;
const DIAGNOSTIC_SEED: u64 = 0x5eed_0d1a;

pub fn residual_diagnostics(result: &HHDResult, samples: &SampleSet) -> Result<ResidualDiagnostics> {
    let dim = samples.dim();
    let bbox = samples.bounding_box()?;
    let mut rng = ChaCha8Rng::seed_from_u64(DIAGNOSTIC_SEED);
    let probes: Vec<Point> = (0..DIAGNOSTIC_POINTS)
        .map(|_| {
            let mut p = Point::zeros();
            for a in 0..dim.n() {
                let (lo, hi) = (bbox.min[a], bbox.max[a]);
                p[a] = if hi > lo { rng.random_range(lo..hi) } else { lo };
            }
            p
        })
        .collect();
    let (max_div, max_curl) = probes
        .par_iter()
        .map(|p| {
            Ok((
                result.solenoidal.divergence_of_curl(p)?.abs(),
                result.conservative.curl_of_gradient(p)?.norm(),
            ))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0f64, 0.0f64), |(a, b), (x, y)| (a.max(x), b.max(y)));

    let (points, vs) = vector_input(samples)?;
    let parts: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| {
            Ok((
                result.conservative.gradient(p)?.norm_squared(),
                result.solenoidal.curl(p)?.norm_squared(),
            ))
        })
        .collect::<Result<_>>()?;
    let total: f64 = vs.iter().map(|v| v.norm_squared()).sum();
    let e_u: f64 = parts.iter().map(|x| x.0).sum();
    let e_w: f64 = parts.iter().map(|x| x.1).sum();
    let e_h: f64 = result.harmonic_samples.iter().map(|h| h.norm_squared()).sum();
    let frac = |e: f64| if total > 0.0 { e / total } else { 0.0 };
    let h = &result.harmonic_samples;
    Ok(ResidualDiagnostics {
        points_checked: probes.len(),
        max_divergence_of_curl: max_div,
        max_curl_of_gradient: max_curl,
        harmonic_max: h.iter().map(|v| v.norm()).fold(0.0, f64::max),
        harmonic_rms: (e_h / h.len().max(1) as f64).sqrt(),
        energy_fractions: [frac(e_u), frac(e_w), frac(e_h)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{grid_nodes, BoundingBox};
    use crate::kernels::Family;
    use crate::model::make_analytic_field;

    fn mean_angle_deg(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
        let mut sum = 0.0;
        let mut n = 0;
        for (x, y) in a.iter().zip(b) {
            let d = x.norm() * y.norm();
            if d > 1e-12 {
                sum += (x.dot(y) / d).clamp(-1.0, 1.0).acos().to_degrees();
                n += 1;
            }
        }
        sum / n.max(1) as f64
    }

    fn zero_samples(dim: Dim) -> SampleSet {
        let pts = grid_nodes(&BoundingBox::cube(dim, -1.0, 1.0), dim, &[5, 5, 5]);
        let n = pts.len();
        SampleSet::from_vectors(dim, pts, vec![Vector3::zeros(); n]).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_components() {
        for dim in [Dim::Two, Dim::Three] {
            let s = zero_samples(dim);
            for strategy in [Strategy::Direct, Strategy::Weighted, Strategy::Laplace] {
                let cfg = HHDConfig::new(strategy, Kernel::gaussian(2.0).unwrap()).with_quadrature(8);
                let r = decompose(&s, &cfg).unwrap();
                assert!(r.conservative.coefficients.iter().all(|&a| a == 0.0), "{strategy}");
                assert!(r.solenoidal.coefficients.iter().flatten().all(|&a| a == 0.0));
                assert!(r.harmonic_samples.iter().all(|h| h.norm() == 0.0));
                let d = residual_diagnostics(&r, &s).unwrap();
                assert_eq!(d.max_divergence_of_curl, 0.0);
                assert_eq!(d.max_curl_of_gradient, 0.0);
                assert_eq!(d.energy_fractions, [0.0; 3]);
            }
        }
    }

    #[test]
    fn tps_rejected() {
        let s = zero_samples(Dim::Two);
        let cfg = HHDConfig::new(Strategy::Direct, Kernel::new(Family::ThinPlateSpline, 1.0).unwrap());
        assert!(matches!(decompose(&s, &cfg), Err(Error::Config(_))));
        let cfg = HHDConfig::new(Strategy::Laplace, Kernel::new(Family::LocalPoly2, 0.0).unwrap());
        assert!(matches!(decompose(&s, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_strategy_name() {
        assert!("spectral".parse::<Strategy>().is_err());
        assert_eq!("laplace".parse::<Strategy>().unwrap(), Strategy::Laplace);
    }

    #[test]
    fn conservative_only_direct_angle() {
        let f = make_analytic_field("u1").unwrap();
        let s = f.sample_vectors(f.grid(15)).unwrap();
        let centres = f.grid(8);
        let cfg = HHDConfig::new(Strategy::Direct, Kernel::gaussian(1.0).unwrap()).with_centres(centres);
        let r = decompose_direct(&s, &cfg).unwrap();
        let got: Vec<_> = s.points().iter().map(|p| r.conservative.gradient(p).unwrap()).collect();
        let want: Vec<_> = s.points().iter().map(|p| f.field(p)).collect();
        assert!(mean_angle_deg(&got, &want) <= 3.0);
    }

    #[test]
    fn reconstruction_is_exact_by_construction() {
        let f = make_analytic_field("fig8").unwrap();
        let s = f.sample_vectors(f.grid(6)).unwrap();
        let cfg = HHDConfig::new(Strategy::Direct, Kernel::gaussian(1.0).unwrap()).with_centres(f.grid(4));
        let r = decompose_direct(&s, &cfg).unwrap();
        for (j, p) in s.points().iter().enumerate() {
            let v = s.vector_values()[j].1;
            let sum = r.conservative.gradient(p).unwrap() + r.solenoidal.curl(p).unwrap() + r.harmonic_samples[j];
            assert!((v - sum).norm() <= 4.0 * f64::EPSILON * (1.0 + v.norm()) * 4.0);
        }
    }

    #[test]
    fn exactness_identities_hold() {
        for (name, mode) in [
            ("fig8", FitMode::Independent),
            ("fig8", FitMode::SequentialResidual),
            ("u3", FitMode::Independent),
        ] {
            let f = make_analytic_field(name).unwrap();
            let s = f
                .sample_vectors(f.grid(if f.dim == Dim::Three { 6 } else { 12 }))
                .unwrap();
            let cfg = HHDConfig::new(Strategy::Direct, Kernel::gaussian(1.5).unwrap()).with_fit_mode(mode);
            let r = decompose_direct(&s, &cfg).unwrap();
            let d = residual_diagnostics(&r, &s).unwrap();
            assert!(d.max_divergence_of_curl <= 1e-10, "{}", d.max_divergence_of_curl);
            assert!(d.max_curl_of_gradient <= 1e-10, "{}", d.max_curl_of_gradient);
            assert_eq!(d.points_checked, 200);
        }
    }

    #[test]
    fn direct_is_linear_in_the_field() {
        let f = make_analytic_field("u3").unwrap();
        let pts = f.grid(10);
        let s1 = f.sample_vectors(pts.clone()).unwrap();
        let scaled: Vec<_> = pts.iter().map(|p| f.field(p) * -3.5).collect();
        let s2 = SampleSet::from_vectors(Dim::Two, pts, scaled).unwrap();
        let cfg = HHDConfig::new(Strategy::Direct, Kernel::gaussian(1.0).unwrap())
            .with_centres(f.grid(4))
            .with_epsilon(0.0);
        let r1 = decompose_direct(&s1, &cfg).unwrap();
        let r2 = decompose_direct(&s2, &cfg).unwrap();
        assert_eq!(r1.diagnostics.conservative_solve.epsilon, 0.0);
        assert_eq!(r1.diagnostics.solenoidal_solve.epsilon, 0.0);
        for p in s1.points() {
            let g1 = r1.conservative.gradient(p).unwrap() * -3.5;
            let g2 = r2.conservative.gradient(p).unwrap();
            assert!((g1 - g2).norm() <= 1e-8 * (1.0 + g1.norm()));
            let c1 = r1.solenoidal.curl(p).unwrap() * -3.5;
            let c2 = r2.solenoidal.curl(p).unwrap();
            assert!((c1 - c2).norm() <= 1e-8 * (1.0 + c1.norm()));
        }
    }

    #[test]
    fn weighted_gram_is_symmetric_psd() {
        let f = make_analytic_field("u3").unwrap();
        let s = f.sample_vectors(f.grid(10)).unwrap();
        let cfg = HHDConfig::new(Strategy::Weighted, Kernel::gaussian(2.0).unwrap()).with_quadrature(20);
        let centres = f.grid(6);
        let sys = weighted_systems(&s, &cfg, &cfg.kernel, &centres).unwrap();
        for a in [&sys.gradient.0, &sys.rotor.0] {
            assert!((a - a.transpose()).amax() <= 1e-12 * a.amax());
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..100 {
                let x = DVector::from_fn(a.ncols(), |_, _| rng.random_range(-1.0..1.0));
                assert!(x.dot(&(a * &x)) >= -1e-12 * a.amax() * x.norm_squared());
            }
        }
    }

    #[test]
    fn weighted_agrees_with_direct() {
        let f = make_analytic_field("u1").unwrap();
        let s = f.sample_vectors(f.grid(15)).unwrap();
        let kernel = Kernel::gaussian(1.0).unwrap();
        let centres = f.grid(7);
        let direct = decompose_direct(
            &s,
            &HHDConfig::new(Strategy::Direct, kernel).with_centres(centres.clone()),
        )
        .unwrap();
        let weighted = decompose_weighted(
            &s,
            &HHDConfig::new(Strategy::Weighted, kernel)
                .with_centres(centres)
                .with_quadrature(64),
        )
        .unwrap();
        let a: Vec<_> = s
            .points()
            .iter()
            .map(|p| direct.conservative.gradient(p).unwrap())
            .collect();
        let b: Vec<_> = s
            .points()
            .iter()
            .map(|p| weighted.conservative.gradient(p).unwrap())
            .collect();
        assert!(mean_angle_deg(&a, &b) <= 2.0, "{}", mean_angle_deg(&a, &b));
    }

    #[test]
    fn weighted_rejects_coarse_quadrature() {
        let f = make_analytic_field("u1").unwrap();
        let s = f.sample_vectors(f.grid(10)).unwrap();
        let cfg = HHDConfig::new(Strategy::Weighted, Kernel::gaussian(1.0).unwrap()).with_quadrature(4);
        assert!(matches!(decompose_weighted(&s, &cfg), Err(Error::Config(_))));
    }

    fn laplace_gradient_fraction(name: &str) -> f64 {
        let f = make_analytic_field(name).unwrap();
        let s = f.sample_vectors(f.grid(15)).unwrap();
        let cfg = HHDConfig::new(Strategy::Laplace, Kernel::gaussian(1.0).unwrap()).with_centres(f.grid(8));
        let r = decompose_laplace(&s, &cfg).unwrap();
        let vnorm: f64 = s
            .vector_values()
            .iter()
            .map(|(_, v)| v.norm_squared())
            .sum::<f64>()
            .sqrt();
        let unorm: f64 = s
            .points()
            .iter()
            .map(|p| r.conservative.gradient(p).unwrap().norm_squared())
            .sum::<f64>()
            .sqrt();
        unorm / vnorm
    }

    #[test]
    fn laplace_harmonic_input_goes_to_h() {
        // Leakage is bounded by the divergence error of the interpolated
        // surrogate (about 2e-2 at the samples here).
        let harmonic = laplace_gradient_fraction("u1");
        let sourced = laplace_gradient_fraction("paraboloid");
        assert!(harmonic <= 0.03, "{harmonic}");
        assert!(sourced >= 0.5, "{sourced}");
    }

    #[test]
    fn laplace_recovers_source() {
        let f = make_analytic_field("paraboloid").unwrap();
        let s = f.sample_vectors(f.grid(15)).unwrap();
        let cfg = HHDConfig::new(Strategy::Laplace, Kernel::gaussian(1.0).unwrap()).with_centres(f.grid(8));
        let r = decompose_laplace(&s, &cfg).unwrap();
        for p in s.points().iter().filter(|p| p.x.abs() < 0.75 && p.y.abs() < 0.75) {
            let lap = r.conservative.laplacian(p).unwrap();
            assert!((lap - 4.0).abs() <= 0.2, "{lap} at {p}");
        }
    }
}
