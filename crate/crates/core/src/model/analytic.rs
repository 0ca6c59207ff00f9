//! Closed-form test fields with known potentials.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{grid_nodes, BoundingBox, Dim, Point};

use super::samples::SampleSet;

type ScalarFn = fn(&Point) -> f64;
type VectorFn = fn(&Point) -> Vector3<f64>;

/// Type of a nondegenerate critical point of a potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct AnalyticField {
    pub name: &'static str,
    pub dim: Dim,
    pub domain: BoundingBox,
    pub potential_u: Option<ScalarFn>,
    gradient_u: Option<VectorFn>,
    pub potential_w: Option<VectorFn>,
    curl_w: Option<VectorFn>,
    /// Critical points of `u` inside the domain, where known in closed form.
    pub critical_points: Vec<(Point, CriticalKind)>,
}

pub const REGISTRY: &[&str] = &[
    "u1",
    "u2",
    "u3",
    "paraboloid",
    "fig8",
    "fig8-conservative",
    "sincos",
    "bump",
    "rotation",
    "zero",
];

impl AnalyticField {
    /// Conservative part `∇u` (zero when absent).
    pub fn conservative(&self, p: &Point) -> Vector3<f64> {
        self.gradient_u.map(|g| g(p)).unwrap_or_else(Vector3::zeros)
    }

    /// Solenoidal part `∇∧w` (zero when absent).
    pub fn solenoidal(&self, p: &Point) -> Vector3<f64> {
        self.curl_w.map(|c| c(p)).unwrap_or_else(Vector3::zeros)
    }

    /// `v = ∇u + ∇∧w`.
    pub fn field(&self, p: &Point) -> Vector3<f64> {
        self.conservative(p) + self.solenoidal(p)
    }

    pub fn potential(&self, p: &Point) -> Option<f64> {
        self.potential_u.map(|u| u(p))
    }

    /// Regular grid over the domain with `n` nodes per axis.
    pub fn grid(&self, n: usize) -> Vec<Point> {
        grid_nodes(&self.domain, self.dim, &[n, n, n])
    }

    /// Vector samples of `v` at `points`.
    pub fn sample_vectors(&self, points: Vec<Point>) -> Result<SampleSet> {
        let vs = points.iter().map(|p| self.field(p)).collect();
        SampleSet::from_vectors(self.dim, points, vs)
    }

    /// Scalar samples of `u` at `points`.
    pub fn sample_scalars(&self, points: Vec<Point>) -> Result<SampleSet> {
        let u = self
            .potential_u
            .ok_or_else(|| Error::Input(format!("field `{}` has no scalar potential", self.name)))?;
        let fs = points.iter().map(u).collect();
        SampleSet::from_scalars(self.dim, points, fs)
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Critical set of `sin x cos y` on `[−2π, 2π]²`: extrema at
/// `(π/2 + kπ, mπ)` and saddles at `(kπ, π/2 + mπ)`.
fn sincos_critical_points() -> Vec<(Point, CriticalKind)> {
    let mut out = Vec::new();
    for k in -2i32..=1 {
        let x = FRAC_PI_2 + k as f64 * PI;
        for m in -2i32..=2 {
            let y = m as f64 * PI;
            let value = x.sin() * y.cos();
            let kind = if value > 0.0 {
                CriticalKind::Maximum
            } else {
                CriticalKind::Minimum
            };
            out.push((Point::new(x, y, 0.0), kind));
        }
    }
    for k in -2i32..=2 {
        for m in -2i32..=1 {
            let y = FRAC_PI_2 + m as f64 * PI;
            out.push((Point::new(k as f64 * PI, y, 0.0), CriticalKind::Saddle));
        }
    }
    out
}

pub fn make_analytic_field(name: &str) -> Result<AnalyticField> {
    let unit2 = BoundingBox::cube(Dim::Two, -1.0, 1.0);
    let unit3 = BoundingBox::cube(Dim::Three, -1.0, 1.0);
    let field = match name {
        "u1" => AnalyticField {
            name: "u1",
            dim: Dim::Two,
            domain: unit2,
            potential_u: Some(|p| sq(p.x) - sq(p.y)),
            gradient_u: Some(|p| Vector3::new(2.0 * p.x, -2.0 * p.y, 0.0)),
            potential_w: None,
            curl_w: None,
            critical_points: vec![(Point::zeros(), CriticalKind::Saddle)],
        },
        "u2" => AnalyticField {
            name: "u2",
            dim: Dim::Two,
            domain: unit2,
            potential_u: Some(|p| sq(p.x) - p.y.powi(3)),
            gradient_u: Some(|p| Vector3::new(2.0 * p.x, -3.0 * sq(p.y), 0.0)),
            potential_w: None,
            curl_w: None,
            critical_points: vec![(Point::zeros(), CriticalKind::Degenerate)],
        },
        "u3" => AnalyticField {
            name: "u3",
            dim: Dim::Two,
            domain: unit2,
            potential_u: Some(|p| sq(p.x) + (-p.x * p.y).exp() + p.y.powi(3)),
            gradient_u: Some(|p| {
                let e = (-p.x * p.y).exp();
                Vector3::new(2.0 * p.x - p.y * e, -p.x * e + 3.0 * sq(p.y), 0.0)
            }),
            potential_w: None,
            curl_w: None,
            critical_points: Vec::new(),
        },
        "paraboloid" => AnalyticField {
            name: "paraboloid",
            dim: Dim::Two,
            domain: unit2,
            potential_u: Some(|p| sq(p.x) + sq(p.y)),
            gradient_u: Some(|p| Vector3::new(2.0 * p.x, 2.0 * p.y, 0.0)),
            potential_w: None,
            curl_w: None,
            critical_points: vec![(Point::zeros(), CriticalKind::Minimum)],
        },
        "fig8" | "fig8-conservative" => {
            let with_w = name == "fig8";
            AnalyticField {
                name: if with_w { "fig8" } else { "fig8-conservative" },
                dim: Dim::Three,
                domain: unit3,
                potential_u: Some(|p| sq(p.x) - 2.0 * p.x * p.z + p.y * p.z),
                gradient_u: Some(|p| Vector3::new(2.0 * p.x - 2.0 * p.z, p.z, -2.0 * p.x + p.y)),
                potential_w: with_w.then_some(|p: &Point| {
                    Vector3::new(
                        sq(p.x) * p.y * p.z,
                        p.x * p.y * (-p.z).exp(),
                        sq(p.x) + sq(p.y) - sq(p.z),
                    )
                }),
                curl_w: with_w.then_some(|p: &Point| {
                    let e = (-p.z).exp();
                    Vector3::new(
                        2.0 * p.y + p.x * p.y * e,
                        sq(p.x) * p.y - 2.0 * p.x,
                        p.y * e - sq(p.x) * p.z,
                    )
                }),
                critical_points: Vec::new(),
            }
        }
        "sincos" => AnalyticField {
            name: "sincos",
            dim: Dim::Two,
            domain: BoundingBox::cube(Dim::Two, -2.0 * PI, 2.0 * PI),
            potential_u: Some(|p| p.x.sin() * p.y.cos()),
            gradient_u: Some(|p| Vector3::new(p.x.cos() * p.y.cos(), -p.x.sin() * p.y.sin(), 0.0)),
            potential_w: None,
            curl_w: None,
            critical_points: sincos_critical_points(),
        },
        "bump" => AnalyticField {
            name: "bump",
            dim: Dim::Two,
            domain: BoundingBox::cube(Dim::Two, -2.0, 2.0),
            potential_u: Some(|p| p.x * (-(sq(p.x) + sq(p.y))).exp()),
            gradient_u: Some(|p| {
                let e = (-(sq(p.x) + sq(p.y))).exp();
                Vector3::new((1.0 - 2.0 * sq(p.x)) * e, -2.0 * p.x * p.y * e, 0.0)
            }),
            potential_w: None,
            curl_w: None,
            critical_points: vec![
                (Point::new(FRAC_1_SQRT_2, 0.0, 0.0), CriticalKind::Maximum),
                (Point::new(-FRAC_1_SQRT_2, 0.0, 0.0), CriticalKind::Minimum),
            ],
        },
        // Rigid rotation (−y, x): the rotor of the stream potential −(x² + y²)/2.
        "rotation" => AnalyticField {
            name: "rotation",
            dim: Dim::Two,
            domain: unit2,
            potential_u: None,
            gradient_u: None,
            potential_w: Some(|p| Vector3::new(0.0, 0.0, -0.5 * (sq(p.x) + sq(p.y)))),
            curl_w: Some(|p| Vector3::new(-p.y, p.x, 0.0)),
            critical_points: Vec::new(),
        },
        "zero" => AnalyticField {
            name: "zero",
            dim: Dim::Two,
            domain: unit2,
            potential_u: Some(|_| 0.0),
            gradient_u: Some(|_| Vector3::zeros()),
            potential_w: None,
            curl_w: None,
            critical_points: Vec::new(),
        },
        other => {
            return Err(Error::Input(format!(
                "unknown analytic field `{other}` (known: {})",
                REGISTRY.join(", ")
            )))
        }
    };
    Ok(field)
}
