use std::fmt;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Dim;

pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.05, 0.10];

/// Comparison of a candidate field against a reference, both sampled at the
/// same points. Scalar fields have one component per point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Normalized cross correlation averaged over components; `NaN` when
    /// every reference component is constant.
    pub nc: f64,
    /// RMS error normalized by the reference range, averaged over
    /// components.
    pub nrmse: f64,
    /// `(k, P_k)`: fraction of points whose range-normalized error is below
    /// `k`, averaged over components.
    pub percentiles: Vec<(f64, f64)>,
    /// Angles between the per-point vectors (vector fields only).
    pub mean_angle_deg: Option<f64>,
    pub max_angle_deg: Option<f64>,
    /// `max ‖ref − cand‖ / max ‖ref‖`.
    pub linf: f64,
    /// Some reference component has zero variance, so NC skips it.
    pub degenerate: bool,
}

/// Rows of the leading `dim` components.
pub fn vector_rows(vs: &[Vector3<f64>], dim: Dim) -> Vec<Vec<f64>> {
    vs.iter().map(|v| v.as_slice()[..dim.n()].to_vec()).collect()
}

/// `‖a − b‖_∞ / ‖a‖_∞` over scalar values.
pub fn linf_relative(reference: &[f64], candidate: &[f64]) -> f64 {
    let num = reference
        .iter()
        .zip(candidate)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let den = reference.iter().map(|a| a.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

pub fn compute_metrics(reference: &[Vec<f64>], candidate: &[Vec<f64>], thresholds: &[f64]) -> Result<MetricsReport> {
    if reference.len() != candidate.len() {
        return Err(Error::Input(format!(
            "reference has {} points, candidate {}",
            reference.len(),
            candidate.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::Input("no points to compare".into()));
    }
    let nc_dim = reference[0].len();
    if nc_dim == 0 || reference.iter().chain(candidate).any(|r| r.len() != nc_dim) {
        return Err(Error::Input("inconsistent component counts".into()));
    }
    let n = reference.len() as f64;
    let mut thresholds: Vec<f64> = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);

    let mut nc_sum = 0.0;
    let mut nc_count = 0;
    let mut nrmse_sum = 0.0;
    let mut pk = vec![0.0; thresholds.len()];
    for c in 0..nc_dim {
        let a: Vec<f64> = reference.iter().map(|r| r[c]).collect();
        let b: Vec<f64> = candidate.iter().map(|r| r[c]).collect();
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(&b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        if saa > 0.0 {
            nc_sum += if sbb > 0.0 { sab / (saa * sbb).sqrt() } else { 0.0 };
            nc_count += 1;
        }
        let lo = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let rmse = (a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt();
        // A constant reference falls back to normalizing by its magnitude.
        let scale = if range > 0.0 { range } else { hi.abs().max(1.0) };
        nrmse_sum += rmse / scale;
        for (t, p) in thresholds.iter().zip(pk.iter_mut()) {
            let below = a.iter().zip(&b).filter(|(x, y)| (*x - *y).abs() / scale < *t).count();
            *p += below as f64 / n;
        }
    }
    let comps = nc_dim as f64;
    let nc = if nc_count > 0 {
        nc_sum / nc_count as f64
    } else {
        f64::NAN
    };

    let (mut angle_sum, mut angle_max, mut angle_n) = (0.0, 0.0f64, 0usize);
    if nc_dim >= 2 {
        for (r, c) in reference.iter().zip(candidate) {
            let (nr, ncn) = (norm(r), norm(c));
            if nr == 0.0 && ncn == 0.0 {
                angle_n += 1;
                continue;
            }
            if nr == 0.0 || ncn == 0.0 {
                continue;
            }
            let dot: f64 = r.iter().zip(c).map(|(x, y)| x * y).sum();
            let ang = (dot / (nr * ncn)).clamp(-1.0, 1.0).acos().to_degrees();
            angle_sum += ang;
            angle_max = angle_max.max(ang);
            angle_n += 1;
        }
    }
    let (mean_angle_deg, max_angle_deg) = if nc_dim >= 2 && angle_n > 0 {
        (Some(angle_sum / angle_n as f64), Some(angle_max))
    } else {
        (None, None)
    };

    let err_max = reference
        .iter()
        .zip(candidate)
        .map(|(r, c)| norm(&r.iter().zip(c).map(|(x, y)| x - y).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let ref_max = reference.iter().map(|r| norm(r)).fold(0.0, f64::max);
    let linf = if ref_max > 0.0 {
        err_max / ref_max
    } else if err_max == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };

    Ok(MetricsReport {
        nc,
        nrmse: nrmse_sum / comps,
        percentiles: thresholds.iter().zip(pk).map(|(&t, p)| (t, p / comps)).collect(),
        mean_angle_deg,
        max_angle_deg,
        linf,
        degenerate: nc_count < nc_dim,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl MetricsReport {
    pub fn header(&self) -> String {
        let mut h = String::from("NC\tNRMSE");
        for (k, _) in &self.percentiles {
            h.push_str(&format!("\tP{k:.2}"));
        }
        h.push_str("\tmean_angle\tmax_angle\tlinf");
        h
    }
}

/// One tab-separated row matching [`MetricsReport::header`].
impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}\t{:.4}", self.nc, self.nrmse)?;
        for (_, p) in &self.percentiles {
            write!(f, "\t{:.2}%", 100.0 * p)?;
        }
        let ang = |a: Option<f64>| a.map_or("-".to_string(), |x| format!("{x:.3}"));
        write!(
            f,
            "\t{}\t{}\t{:.3e}",
            ang(self.mean_angle_deg),
            ang(self.max_angle_deg),
            self.linf
        )
    }
}
