//! Generating kernels and the differential operators of the radial basis
//! functions they induce.
//!
//! A kernel is a 1D function `φ(r; σ)`; the RBF centred at `c` is
//! `φᵢ(p) = φ(‖p − c‖₂)`. Gradients, Hessians and Laplacians of `φᵢ` reduce to
//! `φ′` and `φ″` through the chain rule, so every family here carries exact
//! first and second derivatives.
//!
//! The compactly supported families (`wendland2`, `wendland4`) are written in
//! the normalized argument `s = r / ρ`, where `ρ` is the support radius.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dim, Point};

/// Kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "cubic")]
    Cubic,
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "tps")]
    ThinPlateSpline,
    #[serde(rename = "imq")]
    InverseMultiquadric,
    #[serde(rename = "mq")]
    Multiquadric,
    /// `(1 − s)²₊`
    #[serde(rename = "wendland2")]
    LocalPoly2,
    /// `(1 − s)⁴₊ (4s + 1)`
    #[serde(rename = "wendland4")]
    LocalPoly4,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Cubic,
        Family::Gaussian,
        Family::ThinPlateSpline,
        Family::InverseMultiquadric,
        Family::Multiquadric,
        Family::LocalPoly2,
        Family::LocalPoly4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Cubic => "cubic",
            Family::Gaussian => "gaussian",
            Family::ThinPlateSpline => "tps",
            Family::InverseMultiquadric => "imq",
            Family::Multiquadric => "mq",
            Family::LocalPoly2 => "wendland2",
            Family::LocalPoly4 => "wendland4",
        }
    }

    pub fn is_local(self) -> bool {
        matches!(self, Family::LocalPoly2 | Family::LocalPoly4)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown kernel family `{s}`")))
    }
}

/// Which derivatives of the induced RBFs are defined everywhere, centres
/// included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivativeExistence {
    pub gradient_exists: bool,
    pub hessian_exists: bool,
    pub condition_note: String,
}

/// A generating kernel with its shape parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: Family,
    pub sigma: f64,
    /// Truncation scale of the local families. Ignored by global families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_radius: Option<f64>,
}

impl Kernel {
    pub fn new(family: Family, sigma: f64) -> Result<Self> {
        let kernel = Kernel {
            family,
            sigma,
            support_radius: None,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(Family::Gaussian, sigma)
    }

    pub fn with_support(mut self, radius: f64) -> Result<Self> {
        self.support_radius = Some(radius);
        self.validate()?;
        Ok(self)
    }

    /// Fills in the support radius of a local kernel when it is unset, using
    /// twice the mean nearest-neighbour spacing of `centres`.
    pub fn with_default_support(self, centres: &[Point]) -> Self {
        if !self.family.is_local() || self.support_radius.is_some() {
            return self;
        }
        let spacing = crate::geometry::mean_nearest_neighbour_distance(centres);
        let radius = if spacing > 0.0 { 2.0 * spacing } else { 1.0 };
        Kernel {
            support_radius: Some(radius),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = self.sigma;
        if !sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be finite, got {sigma}")));
        }
        match self.family {
            Family::Multiquadric if sigma == 0.0 => {
                return Err(Error::Config("multiquadric kernel requires sigma != 0".into()))
            }
            Family::Cubic | Family::Gaussian | Family::ThinPlateSpline | Family::Multiquadric if sigma <= 0.0 => {
                return Err(Error::Config(format!(
                    "{} kernel requires sigma > 0, got {sigma}",
                    self.family
                )))
            }
            _ if sigma < 0.0 => return Err(Error::Config(format!("sigma must be >= 0, got {sigma}"))),
            _ => {}
        }
        if let Some(rho) = self.support_radius {
            if !(rho.is_finite() && rho > 0.0) {
                return Err(Error::Config(format!("support radius must be positive, got {rho}")));
            }
        }
        Ok(())
    }

    /// Support radius used for the local families; `1` (normalized argument)
    /// when unset.
    fn rho(&self) -> f64 {
        self.support_radius.unwrap_or(1.0)
    }

    /// Radius beyond which the kernel and its derivatives vanish, if any.
    pub fn support(&self) -> Option<f64> {
        self.family.is_local().then(|| self.rho())
    }

    pub fn existence_flags(&self) -> DerivativeExistence {
        let (gradient_exists, hessian_exists, note) = match self.family {
            Family::Cubic => (true, true, "phi'(0) = 0 for every sigma"),
            Family::Gaussian => (true, true, "smooth at the centre"),
            Family::ThinPlateSpline => (false, false, "phi' is unbounded as r -> 0"),
            Family::InverseMultiquadric if self.sigma != 0.0 => (true, true, "requires sigma != 0"),
            Family::InverseMultiquadric => (false, false, "singular at r = 0 when sigma = 0"),
            Family::Multiquadric => (true, true, "requires sigma != 0"),
            Family::LocalPoly2 => (false, false, "phi'(0) = -2/rho != 0: cone at the centre"),
            Family::LocalPoly4 => (true, true, "phi'(0) = 0"),
        };
        DerivativeExistence {
            gradient_exists,
            hessian_exists,
            condition_note: note.to_string(),
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        debug_assert!(r >= 0.0);
        let s = self.sigma;
        Ok(match self.family {
            Family::Cubic => s * r * r * r,
            Family::Gaussian => (-s * r * r).exp(),
            Family::ThinPlateSpline => {
                if r == 0.0 {
                    0.0
                } else {
                    r * r * (s * r).ln()
                }
            }
            Family::InverseMultiquadric => {
                let q = r * r + s * s;
                if q == 0.0 {
                    return Err(self.undefined(r, "value"));
                }
                1.0 / q.sqrt()
            }
            Family::Multiquadric => (r * r + s * s).sqrt(),
            Family::LocalPoly2 => {
                let t = self.one_minus_s(r);
                t * t
            }
            Family::LocalPoly4 => {
                let t = self.one_minus_s(r);
                let x = r / self.rho();
                t.powi(4) * (4.0 * x + 1.0)
            }
        })
    }

    /// `φ′(r)`.
    pub fn eval_d1(&self, r: f64) -> Result<f64> {
        debug_assert!(r >= 0.0);
        let s = self.sigma;
        Ok(match self.family {
            Family::Cubic => 3.0 * s * r * r,
            Family::Gaussian => -2.0 * s * r * (-s * r * r).exp(),
            Family::ThinPlateSpline => {
                if r == 0.0 {
                    return Err(self.undefined(r, "first derivative"));
                }
                2.0 * r * (s * r).ln() + r
            }
            Family::InverseMultiquadric => {
                let q = r * r + s * s;
                if q == 0.0 {
                    return Err(self.undefined(r, "first derivative"));
                }
                -r / (q * q.sqrt())
            }
            Family::Multiquadric => r / (r * r + s * s).sqrt(),
            Family::LocalPoly2 => -2.0 * self.one_minus_s(r) / self.rho(),
            Family::LocalPoly4 => {
                let rho = self.rho();
                let t = self.one_minus_s(r);
                -20.0 * (r / rho) * t.powi(3) / rho
            }
        })
    }

    /// `φ″(r)`.
    pub fn eval_d2(&self, r: f64) -> Result<f64> {
        debug_assert!(r >= 0.0);
        let s = self.sigma;
        Ok(match self.family {
            Family::Cubic => 6.0 * s * r,
            Family::Gaussian => -2.0 * s * (1.0 - 2.0 * s * r * r) * (-s * r * r).exp(),
            Family::ThinPlateSpline => {
                if r == 0.0 {
                    return Err(self.undefined(r, "second derivative"));
                }
                // d/dr [2r log(σr) + r] = 2 log(σr) + 3
                2.0 * (s * r).ln() + 3.0
            }
            Family::InverseMultiquadric => {
                let q = r * r + s * s;
                if q == 0.0 {
                    return Err(self.undefined(r, "second derivative"));
                }
                (3.0 * r * r / q - 1.0) / (q * q.sqrt())
            }
            Family::Multiquadric => {
                let q = r * r + s * s;
                s * s / (q * q.sqrt())
            }
            Family::LocalPoly2 => {
                let rho = self.rho();
                if r < rho {
                    2.0 / (rho * rho)
                } else {
                    0.0
                }
            }
            Family::LocalPoly4 => {
                let rho = self.rho();
                let t = self.one_minus_s(r);
                -20.0 * t * t * (1.0 - 4.0 * r / rho) / (rho * rho)
            }
        })
    }

    /// `φ′(r) / r`, continuously extended to `r = 0` where that limit exists
    /// (it then equals `φ″(0)`).
    pub fn d1_over_r(&self, r: f64) -> Result<f64> {
        let s = self.sigma;
        Ok(match self.family {
            Family::Cubic => 3.0 * s * r,
            Family::Gaussian => -2.0 * s * (-s * r * r).exp(),
            Family::Multiquadric => 1.0 / (r * r + s * s).sqrt(),
            Family::InverseMultiquadric => {
                let q = r * r + s * s;
                if q == 0.0 {
                    return Err(self.undefined(r, "first derivative"));
                }
                -1.0 / (q * q.sqrt())
            }
            Family::LocalPoly4 => {
                let rho = self.rho();
                -20.0 * self.one_minus_s(r).powi(3) / (rho * rho)
            }
            Family::ThinPlateSpline | Family::LocalPoly2 => {
                if r == 0.0 {
                    return Err(self.undefined(r, "first derivative"));
                }
                self.eval_d1(r)? / r
            }
        })
    }

    fn one_minus_s(&self, r: f64) -> f64 {
        (1.0 - r / self.rho()).max(0.0)
    }

    fn undefined(&self, r: f64, what: &'static str) -> Error {
        Error::UndefinedDerivative {
            family: self.family,
            sigma: self.sigma,
            r,
            what,
        }
    }

    /// `∇φᵢ(p)` for the RBF centred at `centre`.
    pub fn rbf_gradient(&self, centre: &Point, p: &Point) -> Result<Vector3<f64>> {
        let d = p - centre;
        let r = d.norm();
        if r == 0.0 {
            return if self.existence_flags().gradient_exists {
                Ok(Vector3::zeros())
            } else {
                Err(Error::CentreSingularity {
                    family: self.family,
                    what: "gradient",
                })
            };
        }
        Ok(d * self.d1_over_r(r)?)
    }

    /// Hessian of the RBF centred at `centre`, restricted to the leading
    /// `dim × dim` block (the remaining entries are zero).
    ///
    /// At the centre the Hessian is `φ″(0)·I` when `φ′(0) = 0`, since
    /// `φ′(r)/r → φ″(0)`; otherwise the limit depends on the approach
    /// direction and a centre singularity is reported.
    pub fn rbf_hessian(&self, centre: &Point, p: &Point, dim: Dim) -> Result<Matrix3<f64>> {
        let d = p - centre;
        let r = d.norm();
        let mut h = Matrix3::zeros();
        let n = dim.n();
        if r == 0.0 {
            if !self.existence_flags().hessian_exists {
                return Err(Error::CentreSingularity {
                    family: self.family,
                    what: "Hessian",
                });
            }
            let d2 = self.eval_d2(0.0)?;
            for k in 0..n {
                h[(k, k)] = d2;
            }
            return Ok(h);
        }
        let d1r = self.d1_over_r(r)?;
        let d2 = self.eval_d2(r)?;
        let radial = (d2 - d1r) / (r * r);
        for k in 0..n {
            for j in k..n {
                let mut v = radial * d[k] * d[j];
                if k == j {
                    v += d1r;
                }
                h[(k, j)] = v;
                h[(j, k)] = v;
            }
        }
        Ok(h)
    }

    /// `Δφᵢ(p) = φ″(r) + (d − 1) φ′(r) / r`.
    pub fn rbf_laplacian(&self, centre: &Point, p: &Point, dim: Dim) -> Result<f64> {
        let r = (p - centre).norm();
        let n = dim.n() as f64;
        if r == 0.0 {
            if !self.existence_flags().hessian_exists {
                return Err(Error::CentreSingularity {
                    family: self.family,
                    what: "Laplacian",
                });
            }
            return Ok(n * self.eval_d2(0.0)?);
        }
        Ok(self.eval_d2(r)? + (n - 1.0) * self.d1_over_r(r)?)
    }

    /// `sup |φ′|` over `[0, radius]`, estimated on a dense sample.
    pub fn max_abs_d1(&self, radius: f64) -> f64 {
        const SAMPLES: usize = 8192;
        let mut best = 0.0f64;
        for i in 0..=SAMPLES {
            let r = radius * i as f64 / SAMPLES as f64;
            if let Ok(v) = self.eval_d1(r) {
                best = best.max(v.abs());
            }
        }
        // Gaussian and IMQ peak at a known radius; include it exactly.
        let peak = match self.family {
            Family::Gaussian => Some((2.0 * self.sigma).sqrt().recip()),
            Family::InverseMultiquadric => Some(self.sigma / 2f64.sqrt()),
            _ => None,
        };
        if let Some(rp) = peak.filter(|&rp| rp <= radius) {
            if let Ok(v) = self.eval_d1(rp) {
                best = best.max(v.abs());
            }
        }
        best
    }
}

/// Text record: `<family> <sigma> [support_radius]`.
impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.family, self.sigma)?;
        if let Some(rho) = self.support_radius {
            write!(f, " {rho}")?;
        }
        Ok(())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let family: Family = parts
            .next()
            .ok_or_else(|| Error::Config("empty kernel record".into()))?
            .parse()?;
        let parse_num = |tok: &str| {
            tok.parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid number `{tok}` in kernel record")))
        };
        let sigma = match parts.next() {
            Some(tok) => parse_num(tok)?,
            None => 1.0,
        };
        let mut kernel = Kernel::new(family, sigma)?;
        if let Some(tok) = parts.next() {
            kernel = kernel.with_support(parse_num(tok)?)?;
        }
        if parts.next().is_some() {
            return Err(Error::Config(format!("trailing fields in kernel record `{s}`")));
        }
        Ok(kernel)
    }
}
