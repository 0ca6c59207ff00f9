//! Upper bounds on how far noise `e` in the input vectors moves the fitted
//! gradient or rotor at the sample points.
//!
//! With `δα = (MᵀM + εI)⁻¹Mᵀe`, every evaluated derivative changes by at most
//! `Σᵢ |δαᵢ| ‖φ′‖_∞ ≤ √k ‖φ′‖_∞ ‖δα‖₂`, and
//! `‖δα‖₂ ≤ ‖(MᵀM + εI)⁻¹Mᵀ‖₂ ‖e‖₂`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Dim, Point};
use crate::kernels::Kernel;
use crate::linalg::regularized_pseudoinverse_norm;
use crate::model::{ScalarPotentialModel, VectorPotentialModel};
use crate::systems::{gradient_matrix, rotor_matrix};

/// The least-squares system a model was fitted with.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub matrix: DMatrix<f64>,
    pub epsilon: f64,
    pub points: Vec<Point>,
}

impl SystemSpec {
    /// Gradient system `Φ` of `model` at `points`.
    pub fn gradient(model: &ScalarPotentialModel, points: &[Point], epsilon: f64) -> Result<Self> {
        Ok(SystemSpec {
            matrix: gradient_matrix(&model.kernel, &model.centres, points, model.dim)?,
            epsilon,
            points: points.to_vec(),
        })
    }

    /// Rotor system `A` of `model` at `points`.
    pub fn rotor(model: &VectorPotentialModel, points: &[Point], epsilon: f64) -> Result<Self> {
        Ok(SystemSpec {
            matrix: rotor_matrix(&model.kernel, &model.centres, points, model.dim)?,
            epsilon,
            points: points.to_vec(),
        })
    }
}

/// `sup |φ′|` over `[0, diameter]` of the points and centres.
fn derivative_sup(kernel: &Kernel, centres: &[Point], points: &[Point]) -> Result<f64> {
    let all: Vec<Point> = centres.iter().chain(points).copied().collect();
    let diameter = BoundingBox::of_points(&all)?.diameter();
    Ok(kernel.max_abs_d1(diameter))
}

fn check(system: &SystemSpec, unknowns: usize, noise_norm: f64) -> Result<()> {
    if !(noise_norm >= 0.0 && noise_norm.is_finite()) {
        return Err(Error::Input(format!("noise norm must be >= 0, got {noise_norm}")));
    }
    if system.matrix.ncols() != unknowns {
        return Err(Error::Input(format!(
            "system has {} columns, model has {} coefficients",
            system.matrix.ncols(),
            unknowns
        )));
    }
    Ok(())
}

/// `√k ‖φ′‖_∞ ‖(ΦᵀΦ + εI)⁻¹Φᵀ‖₂ ‖e‖₂`.
pub fn gradient_stability_bound(model: &ScalarPotentialModel, system: &SystemSpec, noise_norm: f64) -> Result<f64> {
    check(system, model.len(), noise_norm)?;
    if noise_norm == 0.0 {
        return Ok(0.0);
    }
    let k = model.len() as f64;
    let sup = derivative_sup(&model.kernel, &model.centres, &system.points)?;
    let pinv = regularized_pseudoinverse_norm(&system.matrix, system.epsilon)?;
    Ok(k.sqrt() * sup * pinv * noise_norm)
}

/// `√(6k) ‖φ′‖_∞ ‖(AᵀA + εI)⁻¹Aᵀ‖₂ ‖e‖₂` in 3D; `√(2k)` replaces `√(6k)`
/// in 2D. The pseudoinverse norm is `1/σ_min(A)` when `ε = 0`.
pub fn rotor_stability_bound(model: &VectorPotentialModel, system: &SystemSpec, noise_norm: f64) -> Result<f64> {
    let blocks = VectorPotentialModel::components_for(model.dim);
    check(system, blocks * model.len(), noise_norm)?;
    if noise_norm == 0.0 {
        return Ok(0.0);
    }
    let k = model.len() as f64;
    let factor = match model.dim {
        Dim::Three => (6.0 * k).sqrt(),
        Dim::Two => (2.0 * k).sqrt(),
    };
    let sup = derivative_sup(&model.kernel, &model.centres, &system.points)?;
    let pinv = regularized_pseudoinverse_norm(&system.matrix, system.epsilon)?;
    Ok(factor * sup * pinv * noise_norm)
}
