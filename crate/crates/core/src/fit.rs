//! Least-squares fitting of a scalar potential to mixed scalar/vector
//! constraints.
//!
//! The potential `u = Σ αᵢ φᵢ` minimizes
//! `Σ_{i∈𝓘} |u(pᵢ) − fᵢ|² + δ Σ_{j∈𝓙} ‖∇u(pⱼ) − vⱼ‖² + ε‖α‖²`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kernels::Kernel;
use crate::linalg::{solve_least_squares, solve_least_squares_vec, SolveStats, SolverKind};
use crate::model::{SampleSet, ScalarPotentialModel};
use crate::systems::{gradient_matrix, stack_vectors, value_matrix};

pub const DEFAULT_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub kernel: Kernel,
    /// Explicit centres; `None` places one centre at every constrained point.
    #[serde(default)]
    pub centres: Option<Vec<Point>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_epsilon")]
    pub regularization_epsilon: f64,
    #[serde(default)]
    pub solver: SolverKind,
}

fn default_delta() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl FitConfig {
    pub fn new(kernel: Kernel) -> Self {
        FitConfig {
            kernel,
            centres: None,
            delta: 1.0,
            regularization_epsilon: DEFAULT_EPSILON,
            solver: SolverKind::Auto,
        }
    }

    pub fn with_centres(mut self, centres: Vec<Point>) -> Self {
        self.centres = Some(centres);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.regularization_epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(self.regularization_epsilon >= 0.0 && self.regularization_epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be >= 0, got {}",
                self.regularization_epsilon
            )));
        }
        Ok(())
    }

    /// Centres to use, with the local support filled in.
    pub(crate) fn resolve(&self, default: impl FnOnce() -> Vec<Point>) -> (Kernel, Vec<Point>) {
        let centres = match &self.centres {
            Some(c) => c.clone(),
            None => default(),
        };
        (self.kernel.with_default_support(&centres), centres)
    }
}

/// Fits `u` to the scalar and vector constraints of `samples`.
pub fn fit_mixed(samples: &SampleSet, config: &FitConfig) -> Result<ScalarPotentialModel> {
    fit_mixed_with_stats(samples, config).map(|(m, _)| m)
}

pub fn fit_mixed_with_stats(samples: &SampleSet, config: &FitConfig) -> Result<(ScalarPotentialModel, SolveStats)> {
    config.validate()?;
    let dim = samples.dim();
    let scalars = samples.scalar_values();
    let vectors = samples.vector_values();
    if scalars.is_empty() && vectors.is_empty() {
        return Err(Error::Input("no constraints to fit".into()));
    }
    let (kernel, centres) = config.resolve(|| {
        let pts = samples.points();
        samples.constrained_indices().into_iter().map(|i| pts[i]).collect()
    });
    if centres.is_empty() {
        return Err(Error::Input("no centres".into()));
    }
    if !vectors.is_empty() && !kernel.existence_flags().gradient_exists {
        return Err(Error::Config(format!(
            "vector constraints need a kernel with a gradient at the centres; {} has none",
            kernel.family
        )));
    }
    warn_on_scale_mismatch(samples);

    let pts = samples.points();
    let scalar_points: Vec<Point> = scalars.iter().map(|&(i, _)| pts[i]).collect();
    let vector_points: Vec<Point> = vectors.iter().map(|&(i, _)| pts[i]).collect();
    let phi_s = value_matrix(&kernel, &centres, &scalar_points)?;
    let phi_v = gradient_matrix(&kernel, &centres, &vector_points, dim)?;
    let w = config.delta.sqrt();

    let k = centres.len();
    let (r1, r2) = (phi_s.nrows(), phi_v.nrows());
    let mut m = DMatrix::zeros(r1 + r2, k);
    m.rows_mut(0, r1).copy_from(&phi_s);
    m.rows_mut(r1, r2).copy_from(&(phi_v * w));
    let mut b = DVector::zeros(r1 + r2);
    for (row, &(_, f)) in scalars.iter().enumerate() {
        b[row] = f;
    }
    let vs: Vec<Vector3<f64>> = vectors.iter().map(|&(_, v)| v).collect();
    b.rows_mut(r1, r2).copy_from(&(stack_vectors(&vs, dim) * w));

    let (alpha, stats) = solve_least_squares_vec(&m, &b, config.regularization_epsilon, config.solver)?;
    log::debug!(
        "fit: {} rows, {} centres, {} (cond ~ {:.3e})",
        stats.rows,
        k,
        stats.method,
        stats.condition_estimate
    );
    let model = ScalarPotentialModel::new(dim, kernel, centres, alpha.as_slice().to_vec())?;
    Ok((model, stats))
}

fn value_range(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (hi >= lo).then_some(hi - lo)
}

fn warn_on_scale_mismatch(samples: &SampleSet) {
    let n = samples.dim().n();
    let mut ranges: Vec<f64> = Vec::new();
    ranges.extend(value_range(samples.scalar_values().iter().map(|&(_, f)| f)));
    for a in 0..n {
        ranges.extend(value_range(samples.vector_values().iter().map(|(_, v)| v[a])));
    }
    let positive: Vec<f64> = ranges.into_iter().filter(|&r| r > 0.0).collect();
    if positive.len() < 2 {
        return;
    }
    let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().cloned().fold(0.0, f64::max);
    if hi / lo > 1e3 {
        log::warn!(
            "constraint value ranges differ by a factor {:.1e}; consider normalizing the inputs or adjusting delta",
            hi / lo
        );
    }
}

/// Fits each component of the vector constraints independently, giving the
/// surrogate `ṽ = (ṽ₁, …, ṽ_d)` with `ṽ(pⱼ) ≈ vⱼ`.
pub fn fit_componentwise(samples: &SampleSet, config: &FitConfig) -> Result<Vec<ScalarPotentialModel>> {
    config.validate()?;
    let dim = samples.dim();
    let (points, values) = samples.vector_points();
    if points.is_empty() {
        return Err(Error::Input("componentwise fit needs vector constraints".into()));
    }
    let (kernel, centres) = config.resolve(|| points.clone());
    let m = value_matrix(&kernel, &centres, &points)?;
    let n = dim.n();
    let b = DMatrix::from_fn(points.len(), n, |j, a| values[j][a]);
    let (x, stats) = solve_least_squares(&m, &b, config.regularization_epsilon, config.solver)?;
    log::debug!("componentwise fit: {} centres via {}", centres.len(), stats.method);
    (0..n)
        .map(|a| ScalarPotentialModel::new(dim, kernel, centres.clone(), x.column(a).iter().copied().collect()))
        .collect()
}

/// Per-constraint residuals and the least-squares energy
/// `Σ rᵢ² + δ Σ ‖rⱼ‖²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub scalar_residuals: Vec<(usize, f64)>,
    pub vector_residuals: Vec<(usize, Vector3<f64>)>,
    pub delta: f64,
    pub energy: f64,
}

pub fn residual_report(model: &ScalarPotentialModel, samples: &SampleSet, delta: f64) -> Result<ResidualReport> {
    let pts = samples.points();
    let mut scalar_residuals = Vec::with_capacity(samples.scalar_values().len());
    let mut energy = 0.0;
    for &(i, f) in samples.scalar_values() {
        let r = model.eval(&pts[i])? - f;
        energy += r * r;
        scalar_residuals.push((i, r));
    }
    let mut vector_residuals = Vec::with_capacity(samples.vector_values().len());
    for &(j, v) in samples.vector_values() {
        let r = model.gradient(&pts[j])? - v;
        energy += delta * r.norm_squared();
        vector_residuals.push((j, r));
    }
    Ok(ResidualReport {
        scalar_residuals,
        vector_residuals,
        delta,
        energy,
    })
}

impl ResidualReport {
    /// `sqrt(energy / (Σ fᵢ² + δ Σ ‖vⱼ‖²))`.
    pub fn relative(&self, samples: &SampleSet) -> f64 {
        let norm: f64 = samples.scalar_values().iter().map(|(_, f)| f * f).sum::<f64>()
            + self.delta
                * samples
                    .vector_values()
                    .iter()
                    .map(|(_, v)| v.norm_squared())
                    .sum::<f64>();
        if norm == 0.0 {
            if self.energy == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.energy / norm).sqrt()
        }
    }

    /// CSV with columns `index,type,residual` (vector residuals as norms).
    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "index,type,residual")?;
        for (i, r) in &self.scalar_residuals {
            writeln!(w, "{i},scalar,{r:.17e}")?;
        }
        for (j, r) in &self.vector_residuals {
            writeln!(w, "{j},vector,{:.17e}", r.norm())?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(&mut f).map_err(|e| Error::io(path, e))
    }
}
