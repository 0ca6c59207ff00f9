//! Sample sets, fitted potentials, model files and analytic test fields.

pub mod analytic;
pub mod io;
pub mod potential;
pub mod samples;

pub use analytic::{make_analytic_field, AnalyticField, CriticalKind};
pub use io::{ModelFile, MODEL_FORMAT};
pub use potential::{ComponentwiseField, ScalarPotentialModel, VectorPotentialModel};
pub use samples::{SampleSet, COINCIDENCE_TOL};
