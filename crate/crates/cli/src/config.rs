//! Run configuration: defaults, JSON file, then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use roaming::integrate::Tolerances;
use roaming::Params;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "ROAM_CACHE_DIR";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterSpec {
    /// Cells per axis.
    pub n: usize,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub seeds: usize,
    pub budget: usize,
    pub epsilon: f64,
    /// Refinement threshold between neighbouring section points.
    pub gap: f64,
    /// Cells per axis of the membership grid.
    pub membership_grid: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifySpec {
    pub samples: usize,
    pub rng_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmSpec {
    /// Use `r − 0.9` in the shell weights.
    pub shift: bool,
    pub n_theta: usize,
    pub n_phi: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: Params,
    pub energies: Vec<f64>,
    pub tolerances: Tolerances,
    pub t_max: f64,
    pub raster: RasterSpec,
    pub manifolds: ManifoldSpec,
    pub classify: ClassifySpec,
    pub cm: CmSpec,
    pub output_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: Params::default(),
            energies: vec![1.0],
            tolerances: Tolerances::sweep(),
            t_max: 2000.0,
            raster: RasterSpec { n: 128, x_range: None, y_range: None },
            manifolds: ManifoldSpec { seeds: 128, budget: 3000, epsilon: 1e-7, gap: 1e-3, membership_grid: 200 },
            classify: ClassifySpec { samples: 1000, rng_seed: 1 },
            cm: CmSpec { shift: false, n_theta: 128, n_phi: 32 },
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            threads: None,
        }
    }
}

/// Recursively overlays `patch` on `base`; objects merge, everything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

impl RunConfig {
    /// Defaults overlaid with the (possibly partial) JSON file and then the `key=value`
    /// overrides, where `key` is a dotted path and `value` is JSON (bare strings allowed).
    pub fn load(file: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut v = serde_json::to_value(Self::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let patch: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            if !patch.is_object() {
                bail!("config {} is not a JSON object", path.display());
            }
            merge(&mut v, patch);
        }
        for s in sets {
            let (key, raw) = s.split_once('=').with_context(|| format!("override `{s}` is not key=value"))?;
            let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut patch = val;
            for part in key.split('.').rev() {
                patch = Value::Object([(part.to_string(), patch)].into_iter().collect());
            }
            merge(&mut v, patch);
        }
        let cfg: Self = serde_json::from_value(v).context("invalid configuration")?;
        cfg.params.validate().context("invalid model parameters")?;
        if cfg.t_max <= 0.0 {
            bail!("t_max must be positive");
        }
        Ok(cfg)
    }

    /// Flag, then environment, then config file, then `.roam-cache` in the output directory.
    pub fn cache_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(d) = flag {
            return d.to_path_buf();
        }
        if let Ok(d) = std::env::var(CACHE_ENV) {
            if !d.is_empty() {
                return PathBuf::from(d);
            }
        }
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join(".roam-cache"))
    }

    /// SHA-256 of the canonical JSON of the configuration and the code version.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(VERSION.as_bytes());
        h.update(serde_json::to_string(self).expect("config serializes").as_bytes());
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("c.json");
        std::fs::write(&f, r#"{"params": {"I": 3.0}, "t_max": 500, "raster": {"n": 16}}"#).unwrap();
        let cfg = RunConfig::load(Some(&f), &["t_max=100".into(), "params.lambda=0.5".into(), "output_dir=x".into()]).unwrap();
        assert_eq!(cfg.params.inertia, 3.0);
        assert_eq!(cfg.params.lambda, 0.5);
        assert_eq!(cfg.params.m, Params::default().m);
        assert_eq!(cfg.t_max, 100.0);
        assert_eq!(cfg.raster.n, 16);
        assert_eq!(cfg.output_dir, PathBuf::from("x"));
        assert!(RunConfig::load(None, &["t_max=-1".into()]).is_err());
        assert!(RunConfig::load(None, &["nonsense".into()]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.t_max += 1.0;
        assert_ne!(a.hash(), b.hash());
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
