//! Meshless radial-basis-function potentials and Helmholtz-Hodge
//! decomposition of scattered 2D/3D vector fields.
//!
//! A field `v` sampled at scattered points is split as `v = ∇u + ∇∧w + h`,
//! where `u` and `w` are RBF expansions whose derivatives are evaluated in
//! closed form. No boundary conditions are imposed.

// `!(x < limit)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod centres;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod hhd;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod systems;
pub mod viz;

pub use analysis::{
    add_noise, compute_metrics, find_critical_points, gradient_stability_bound, rotor_stability_bound, CriticalPoint,
    MetricsReport, TrustRegionConfig,
};
pub use centres::{select_centres, selection_quality, CentreSelection, CentreStrategy, ImportanceSource};
pub use error::{Error, Result};
pub use fit::{fit_componentwise, fit_mixed, residual_report, FitConfig, ResidualReport};
pub use geometry::{BoundingBox, Dim, Point};
pub use hhd::{
    decompose, decompose_direct, decompose_laplace, decompose_weighted, residual_diagnostics, FitMode, HHDConfig,
    HHDResult, Strategy,
};
pub use kernels::{DerivativeExistence, Family, Kernel};
pub use linalg::{SolveStats, SolverKind};
pub use model::{
    make_analytic_field, AnalyticField, ComponentwiseField, CriticalKind, ModelFile, SampleSet, ScalarPotentialModel,
    VectorPotentialModel,
};
