//! Choosing the RBF centres among the sample points.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::metrics::{compute_metrics, vector_rows, MetricsReport, DEFAULT_THRESHOLDS};
use crate::error::{Error, Result};
use crate::fit::{fit_mixed, residual_report, FitConfig};
use crate::geometry::{grid_nodes, mean_nearest_neighbour_distance, Dim, Point};
use crate::kernels::{Family, Kernel};
use crate::model::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentreStrategy {
    #[default]
    KernelImportance,
    Uniform,
    Random,
    AdaptiveResidual,
    KMeans,
}

impl CentreStrategy {
    pub fn name(self) -> &'static str {
        match self {
            CentreStrategy::KernelImportance => "importance",
            CentreStrategy::Uniform => "uniform",
            CentreStrategy::Random => "random",
            CentreStrategy::AdaptiveResidual => "adaptive",
            CentreStrategy::KMeans => "kmeans",
        }
    }
}

impl fmt::Display for CentreStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CentreStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "importance" | "kernel_importance" | "kernel-importance" => CentreStrategy::KernelImportance,
            "uniform" => CentreStrategy::Uniform,
            "random" => CentreStrategy::Random,
            "adaptive" | "adaptive_residual" | "adaptive-residual" => CentreStrategy::AdaptiveResidual,
            "kmeans" | "k-means" => CentreStrategy::KMeans,
            other => {
                return Err(Error::Config(format!(
                    "unknown centre strategy `{other}` (expected importance, uniform, random, adaptive or kmeans)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceSource {
    /// `‖v‖₂` at the vector samples.
    #[default]
    FieldMagnitude,
    /// `|f|` at the scalar samples.
    PotentialValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentreSelection {
    pub strategy: CentreStrategy,
    pub target_count: usize,
    #[serde(default)]
    pub importance_source: ImportanceSource,
    #[serde(default = "default_threshold")]
    pub residual_threshold: f64,
    #[serde(default = "default_max_count")]
    pub max_count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_threshold() -> f64 {
    0.05
}

fn default_max_count() -> usize {
    5000
}

/// Importance weights are floored at this fraction of the maximum, so that
/// flat regions still receive centres.
const IMPORTANCE_FLOOR: f64 = 0.1;
const KMEANS_ITERATIONS: usize = 50;

impl CentreSelection {
    pub fn new(strategy: CentreStrategy, target_count: usize) -> Self {
        CentreSelection {
            strategy,
            target_count,
            importance_source: ImportanceSource::FieldMagnitude,
            residual_threshold: default_threshold(),
            max_count: default_max_count(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_count == 0 {
            return Err(Error::Config("target count must be positive".into()));
        }
        if self.target_count > self.max_count {
            return Err(Error::Config(format!(
                "target count {} exceeds the maximum {}",
                self.target_count, self.max_count
            )));
        }
        if !(self.residual_threshold > 0.0 && self.residual_threshold < 1.0) {
            return Err(Error::Config(format!(
                "residual threshold must lie in (0, 1), got {}",
                self.residual_threshold
            )));
        }
        Ok(())
    }
}

/// Outcome of the adaptive strategy: the frozen centres and the relative
/// residual after each doubling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveTrace {
    pub centres: Vec<Point>,
    pub history: Vec<(usize, f64)>,
    pub reached_threshold: bool,
}

pub fn select_centres(samples: &SampleSet, sel: &CentreSelection) -> Result<Vec<Point>> {
    select_centres_with(samples, sel, None)
}

/// As [`select_centres`]; `fit` sets the kernel used by the adaptive
/// strategy (default: multiquadric with σ twice the mean sample spacing).
pub fn select_centres_with(samples: &SampleSet, sel: &CentreSelection, fit: Option<&FitConfig>) -> Result<Vec<Point>> {
    sel.validate()?;
    let pts = samples.points();
    if sel.strategy != CentreStrategy::AdaptiveResidual && sel.target_count > pts.len() {
        return Err(Error::Input(format!(
            "{} centres requested from {} candidate points",
            sel.target_count,
            pts.len()
        )));
    }
    Ok(match sel.strategy {
        CentreStrategy::KernelImportance => {
            let order = importance_order(samples, sel.importance_source, sel.target_count, sel.seed)?;
            order.into_iter().map(|i| pts[i]).collect()
        }
        CentreStrategy::Uniform => uniform(samples, sel.target_count),
        CentreStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(sel.seed);
            let mut idx = sample(&mut rng, pts.len(), sel.target_count).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| pts[i]).collect()
        }
        CentreStrategy::KMeans => kmeans(pts, sel.target_count, sel.seed),
        CentreStrategy::AdaptiveResidual => adaptive(samples, sel, fit)?.centres,
    })
}

fn importance_values(samples: &SampleSet, source: ImportanceSource) -> Result<Vec<f64>> {
    let mut w = vec![0.0; samples.len()];
    match source {
        ImportanceSource::FieldMagnitude => {
            if samples.vector_values().is_empty() {
                return Err(Error::Input("field-magnitude importance needs vector samples".into()));
            }
            for &(j, v) in samples.vector_values() {
                w[j] = v.norm();
            }
        }
        ImportanceSource::PotentialValue => {
            if samples.scalar_values().is_empty() {
                return Err(Error::Input("potential-value importance needs scalar samples".into()));
            }
            for &(i, f) in samples.scalar_values() {
                w[i] = f.abs();
            }
        }
    }
    let top = w.iter().cloned().fold(0.0, f64::max);
    Ok(w.into_iter()
        .map(|x| {
            let x = if top > 0.0 { x / top } else { 1.0 };
            IMPORTANCE_FLOOR + (1.0 - IMPORTANCE_FLOOR) * x
        })
        .collect())
}

/// Importance-weighted farthest-point order: the first index is drawn with
/// probability proportional to its weight, then each step takes the point
/// maximizing `weight × distance to the nearest chosen point`. Prefixes of
/// the order are the selections for smaller counts.
pub fn importance_order(samples: &SampleSet, source: ImportanceSource, count: usize, seed: u64) -> Result<Vec<usize>> {
    let pts = samples.points();
    let w = importance_values(samples, source)?;
    let count = count.min(pts.len());
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = w.iter().sum();
    let mut t = rng.random_range(0.0..total);
    let mut first = pts.len() - 1;
    for (i, &wi) in w.iter().enumerate() {
        if t < wi {
            first = i;
            break;
        }
        t -= wi;
    }
    let mut order = Vec::with_capacity(count);
    let mut dist = vec![f64::INFINITY; pts.len()];
    let mut next = first;
    for _ in 0..count {
        order.push(next);
        let c = pts[next];
        dist.par_iter_mut().zip(pts.par_iter()).for_each(|(d, p)| {
            *d = d.min((p - c).norm());
        });
        let best = dist
            .par_iter()
            .zip(w.par_iter())
            .enumerate()
            .map(|(i, (d, wi))| (d * wi, i))
            .reduce(
                || (f64::NEG_INFINITY, usize::MAX),
                |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
            );
        next = best.1;
    }
    Ok(order)
}

/// Grid nodes over the bounding box snapped to distinct nearest candidates,
/// thinned evenly to `count`.
fn uniform(samples: &SampleSet, count: usize) -> Vec<Point> {
    let pts = samples.points();
    let dim = samples.dim();
    let Ok(bbox) = samples.bounding_box() else {
        return Vec::new();
    };
    let per_axis = ((count as f64).powf(1.0 / dim.n() as f64).ceil() as usize).max(1);
    let nodes = if per_axis == 1 {
        vec![(bbox.min + bbox.max) * 0.5]
    } else {
        grid_nodes(&bbox, dim, &[per_axis; 3])
    };
    let mut taken = vec![false; pts.len()];
    let mut chosen = Vec::new();
    for node in &nodes {
        let best = pts
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .min_by(|a, b| (a.1 - node).norm().total_cmp(&(b.1 - node).norm()));
        if let Some((i, _)) = best {
            taken[i] = true;
            chosen.push(i);
        }
    }
    let picked: Vec<usize> = if chosen.len() > count {
        (0..count).map(|j| chosen[j * chosen.len() / count]).collect()
    } else {
        chosen
    };
    picked.into_iter().map(|i| pts[i]).collect()
}

/// Lloyd iterations from a seeded random start; each cluster is represented
/// by the candidate nearest its centroid.
fn kmeans(pts: &[Point], k: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Point> = sample(&mut rng, pts.len(), k).into_iter().map(|i| pts[i]).collect();
    let nearest = |p: &Point, cs: &[Point]| -> usize {
        cs.iter()
            .enumerate()
            .min_by(|a, b| (a.1 - p).norm_squared().total_cmp(&(b.1 - p).norm_squared()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    for _ in 0..KMEANS_ITERATIONS {
        let labels: Vec<usize> = pts.par_iter().map(|p| nearest(p, &centroids)).collect();
        let mut sums = vec![Vector3::zeros(); k];
        let mut counts = vec![0usize; k];
        for (p, &l) in pts.iter().zip(&labels) {
            sums[l] += p;
            counts[l] += 1;
        }
        let mut moved = false;
        for c in 0..k {
            if counts[c] > 0 {
                let new = sums[c] / counts[c] as f64;
                moved |= (new - centroids[c]).norm() > 0.0;
                centroids[c] = new;
            }
        }
        if !moved {
            break;
        }
    }
    let mut taken = vec![false; pts.len()];
    let mut out = Vec::with_capacity(k);
    for c in &centroids {
        let best = pts
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .min_by(|a, b| (a.1 - c).norm_squared().total_cmp(&(b.1 - c).norm_squared()));
        if let Some((i, p)) = best {
            taken[i] = true;
            out.push(*p);
        }
    }
    out
}

fn default_adaptive_fit(samples: &SampleSet) -> Result<FitConfig> {
    let spacing = mean_nearest_neighbour_distance(samples.points());
    let sigma = if spacing > 0.0 { 2.0 * spacing } else { 1.0 };
    Ok(FitConfig::new(Kernel::new(Family::Multiquadric, sigma)?))
}

/// Starts from `max(16, k/8)` importance-ordered centres and doubles until
/// the relative residual drops below the threshold or `max_count` (or the
/// candidate count) is reached.
pub fn adaptive(samples: &SampleSet, sel: &CentreSelection, fit: Option<&FitConfig>) -> Result<AdaptiveTrace> {
    sel.validate()?;
    let fit = match fit {
        Some(f) => f.clone(),
        None => default_adaptive_fit(samples)?,
    };
    let source = if samples.vector_values().is_empty() {
        ImportanceSource::PotentialValue
    } else {
        sel.importance_source
    };
    let limit = sel.max_count.min(samples.len());
    let order = importance_order(samples, source, limit, sel.seed)?;
    let pts = samples.points();
    let mut count = (sel.target_count / 8).max(16).min(limit);
    let mut history = Vec::new();
    loop {
        let centres: Vec<Point> = order[..count].iter().map(|&i| pts[i]).collect();
        let cfg = fit.clone().with_centres(centres.clone());
        let model = fit_mixed(samples, &cfg)?;
        let rel = residual_report(&model, samples, cfg.delta)?.relative(samples);
        history.push((count, rel));
        log::debug!("adaptive centres: {count} -> relative residual {rel:.4e}");
        if rel < sel.residual_threshold || count >= limit {
            return Ok(AdaptiveTrace {
                centres,
                history,
                reached_threshold: rel < sel.residual_threshold,
            });
        }
        count = (2 * count).min(limit);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionComparison {
    pub a: MetricsReport,
    pub b: MetricsReport,
}

/// Fits one model per centre set and compares each against the samples
/// (vector values when present, otherwise scalar values).
pub fn selection_quality(
    samples: &SampleSet,
    centres_a: &[Point],
    centres_b: &[Point],
    config: &FitConfig,
) -> Result<SelectionComparison> {
    if centres_a.len() != centres_b.len() {
        return Err(Error::Input(format!(
            "centre sets differ in size ({} vs {})",
            centres_a.len(),
            centres_b.len()
        )));
    }
    let score = |centres: &[Point]| -> Result<MetricsReport> {
        let model = fit_mixed(samples, &config.clone().with_centres(centres.to_vec()))?;
        model_metrics(&model, samples)
    };
    Ok(SelectionComparison {
        a: score(centres_a)?,
        b: score(centres_b)?,
    })
}

/// Metrics of a fitted potential against the constraints it was fitted to.
pub fn model_metrics(model: &crate::model::ScalarPotentialModel, samples: &SampleSet) -> Result<MetricsReport> {
    let pts = samples.points();
    let dim: Dim = samples.dim();
    if !samples.vector_values().is_empty() {
        let (vp, vs) = samples.vector_points();
        let got = model.gradient_many(&vp)?;
        compute_metrics(&vector_rows(&vs, dim), &vector_rows(&got, dim), &DEFAULT_THRESHOLDS)
    } else {
        let reference: Vec<Vec<f64>> = samples.scalar_values().iter().map(|&(_, f)| vec![f]).collect();
        let got: Vec<Vec<f64>> = samples
            .scalar_values()
            .iter()
            .map(|&(i, _)| model.eval(&pts[i]).map(|x| vec![x]))
            .collect::<Result<_>>()?;
        compute_metrics(&reference, &got, &DEFAULT_THRESHOLDS)
    }
}
