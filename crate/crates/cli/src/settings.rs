//! Global options: command-line flags override the JSON config file, which
//! overrides the built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use rbf_hhd::{Error, Family, Kernel};
use serde::Deserialize;

const DEFAULT_SIGMA: f64 = 1.0;
const DEFAULT_EPSILON: f64 = 1e-10;
const DEFAULT_DELTA: f64 = 1.0;

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Kernel family: cubic, gaussian, tps, imq, mq, wendland2, wendland4.
    #[arg(long, global = true)]
    pub kernel: Option<Family>,
    /// Shape parameter sigma.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Support radius of the local kernels (default: twice the mean centre spacing).
    #[arg(long, global = true)]
    pub support: Option<f64>,
    /// Tikhonov regularization epsilon.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Seed for every stochastic choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Weight of the gradient constraints in mixed fits.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Merge coincident input points, keeping the first occurrence.
    #[arg(long, global = true)]
    pub dedup: bool,
    /// JSON file with any of the keys kernel, sigma, support, epsilon, seed, delta, dedup.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    kernel: Option<Family>,
    sigma: Option<f64>,
    support: Option<f64>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    delta: Option<f64>,
    dedup: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub kernel: Kernel,
    pub epsilon: f64,
    pub seed: u64,
    pub delta: f64,
    pub dedup: bool,
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(path) => read_config(path)?,
            None => ConfigFile::default(),
        };
        let family = args.kernel.or(file.kernel).unwrap_or(Family::Gaussian);
        let sigma = args.sigma.or(file.sigma).unwrap_or(DEFAULT_SIGMA);
        let mut kernel = Kernel::new(family, sigma)?;
        if let Some(radius) = args.support.or(file.support) {
            kernel = kernel.with_support(radius)?;
        }
        let epsilon = args.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON);
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")).into());
        }
        let delta = args.delta.or(file.delta).unwrap_or(DEFAULT_DELTA);
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta must be > 0, got {delta}")).into());
        }
        Ok(Settings {
            kernel,
            epsilon,
            seed: args.seed.or(file.seed).unwrap_or(0),
            delta,
            dedup: args.dedup || file.dedup.unwrap_or(false),
        })
    }

    /// Comment line echoed at the top of every report and generated file.
    pub fn header(&self, command: &str) -> String {
        let support = self
            .kernel
            .support_radius
            .map_or(String::new(), |r| format!(" support={r}"));
        format!(
            "# rbf-hhd {command} seed={} kernel={} sigma={}{support} epsilon={:e} delta={}",
            self.seed, self.kernel.family, self.kernel.sigma, self.epsilon, self.delta
        )
    }
}

fn read_config(path: &Path) -> anyhow::Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults() {
        let s = Settings::resolve(&GlobalArgs::default()).unwrap();
        assert_eq!(s.kernel.family, Family::Gaussian);
        assert_eq!(s.kernel.sigma, 1.0);
        assert_eq!(s.epsilon, 1e-10);
        assert_eq!(s.seed, 0);
        assert_eq!(s.delta, 1.0);
        assert!(!s.dedup);
    }

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"kernel": "mq", "sigma": 0.5, "seed": 9, "epsilon": 0.001}}"#).unwrap();
        let args = GlobalArgs {
            sigma: Some(2.0),
            config: Some(f.path().to_path_buf()),
            ..GlobalArgs::default()
        };
        let s = Settings::resolve(&args).unwrap();
        assert_eq!(s.kernel.family, Family::Multiquadric);
        assert_eq!(s.kernel.sigma, 2.0);
        assert_eq!(s.seed, 9);
        assert_eq!(s.epsilon, 1e-3);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"sigmaa": 1}}"#).unwrap();
        let args = GlobalArgs {
            config: Some(f.path().to_path_buf()),
            ..GlobalArgs::default()
        };
        assert!(Settings::resolve(&args).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for args in [
            GlobalArgs {
                sigma: Some(-1.0),
                ..GlobalArgs::default()
            },
            GlobalArgs {
                epsilon: Some(-1.0),
                ..GlobalArgs::default()
            },
            GlobalArgs {
                delta: Some(0.0),
                ..GlobalArgs::default()
            },
        ] {
            assert!(Settings::resolve(&args).is_err());
        }
    }
}
