//! Quality metrics, stability bounds, noise injection and critical points.

pub mod critical;
pub mod metrics;
pub mod noise;
pub mod stability;

pub use critical::{
    classify_eigenvalues, find_critical_points, jacobian_eigenvalues, CriticalPoint, TrustRegionConfig,
};
pub use metrics::{compute_metrics, linf_relative, vector_rows, MetricsReport, DEFAULT_THRESHOLDS};
pub use noise::add_noise;
pub use stability::{gradient_stability_bound, rotor_stability_bound, SystemSpec};
