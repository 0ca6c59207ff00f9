use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::SampleSet;

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Adds zero-mean Gaussian noise with standard deviation
/// `relative_level × RMS` of each vector component (and of the scalar
/// values, when present).
pub fn add_noise(samples: &SampleSet, relative_level: f64, seed: u64) -> Result<SampleSet> {
    if !(relative_level >= 0.0 && relative_level.is_finite()) {
        return Err(Error::Config(format!("noise level must be >= 0, got {relative_level}")));
    }
    if relative_level == 0.0 {
        return Ok(samples.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.dim().n();
    let mut std = Vector3::zeros();
    for a in 0..n {
        std[a] = relative_level * rms(samples.vector_values().iter().map(|(_, v)| v[a]));
    }
    let scalar_std = relative_level * rms(samples.scalar_values().iter().map(|&(_, f)| f));
    let draw = |rng: &mut ChaCha8Rng, s: f64| -> f64 {
        if s > 0.0 {
            Normal::new(0.0, s).map(|d| d.sample(rng)).unwrap_or(0.0)
        } else {
            0.0
        }
    };
    let vectors = samples
        .vector_values()
        .iter()
        .map(|&(j, v)| {
            let mut e = Vector3::zeros();
            for a in 0..n {
                e[a] = draw(&mut rng, std[a]);
            }
            (j, v + e)
        })
        .collect();
    let scalars = samples
        .scalar_values()
        .iter()
        .map(|&(i, f)| (i, f + draw(&mut rng, scalar_std)))
        .collect();
    SampleSet::new(samples.dim(), samples.points().to_vec(), scalars, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{point2, Dim};

    fn big_set() -> SampleSet {
        let n = 20_000;
        let pts = (0..n).map(|i| point2(i as f64, 0.0)).collect();
        let vs = (0..n).map(|i| Vector3::new(((i % 7) as f64) - 3.0, 2.0, 0.0)).collect();
        SampleSet::from_vectors(Dim::Two, pts, vs).unwrap()
    }

    #[test]
    fn zero_level_is_identity() {
        let s = big_set();
        assert_eq!(add_noise(&s, 0.0, 1).unwrap(), s);
    }

    #[test]
    fn deterministic_under_seed() {
        let s = big_set();
        assert_eq!(add_noise(&s, 0.25, 42).unwrap(), add_noise(&s, 0.25, 42).unwrap());
        assert_ne!(add_noise(&s, 0.25, 42).unwrap(), add_noise(&s, 0.25, 43).unwrap());
    }

    #[test]
    fn injected_standard_deviation() {
        let s = big_set();
        let noisy = add_noise(&s, 0.25, 7).unwrap();
        for a in 0..2 {
            let target = 0.25 * rms(s.vector_values().iter().map(|(_, v)| v[a]));
            let diffs: Vec<f64> = s
                .vector_values()
                .iter()
                .zip(noisy.vector_values())
                .map(|((_, v), (_, w))| w[a] - v[a])
                .collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
            assert!((sd / target - 1.0).abs() < 0.05, "component {a}: {sd} vs {target}");
        }
    }

    #[test]
    fn negative_level_rejected() {
        assert!(add_noise(&big_set(), -0.1, 0).is_err());
    }
}
