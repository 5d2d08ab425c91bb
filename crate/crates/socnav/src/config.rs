//! Run configuration: every training and rollout hyperparameter with its
//! published default, loadable from a flat key-value text file with
//! command-line overrides taking precedence. Unknown keys are rejected so
//! experiment records stay trustworthy.

use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "SOCNAV_OUT";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // Contrastive distillation stage.
    pub sc_batch: usize,
    pub sc_lr: f64,
    pub sc_wd: f64,
    pub sc_epochs: usize,
    // Planner stage.
    pub tpn_batch: usize,
    pub tpn_lr: f64,
    pub tpn_wd: f64,
    pub tpn_epochs: usize,
    pub common_dim: usize,
    pub heads: usize,
    pub candidates: usize,
    // Selection stage.
    pub tsm_batch: usize,
    pub tsm_lr: f64,
    pub tsm_wd: f64,
    pub tsm_epochs: usize,
    // Online updates.
    pub llu_capacity: usize,
    pub llu_mu: f64,
    pub llu_steps: usize,
    pub llu_lr: f64,
    // Dataset sizes (desk scale; one tenth of the published scale).
    pub dsc_n: usize,
    pub dtpn_n: usize,
    pub dtsm_n: usize,
    pub db_size: usize,
    // Rollouts.
    pub max_steps: usize,
    pub replan_every: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sc_batch: 256,
            sc_lr: 1e-4,
            sc_wd: 0.01,
            sc_epochs: 100,
            tpn_batch: 10,
            tpn_lr: 8e-4,
            tpn_wd: 1e-4,
            tpn_epochs: 500,
            common_dim: 128,
            heads: 32,
            candidates: 5,
            tsm_batch: 128,
            tsm_lr: 1e-5,
            tsm_wd: 1e-5,
            tsm_epochs: 500,
            llu_capacity: 50,
            llu_mu: 0.07,
            llu_steps: 10,
            llu_lr: 1e-5,
            dsc_n: 2000,
            dtpn_n: 1000,
            dtsm_n: 2000,
            db_size: 256,
            max_steps: 600,
            replan_every: 10,
            seed: 0,
            workers: crate::nn::default_workers(),
        }
    }
}

impl RunConfig {
    /// Apply `key=value` overrides; unknown keys and non-positive rates
    /// are rejected.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |k: &str, v: &str| Error::BadConfig(format!("bad value for {k}: {v}"));
        macro_rules! set {
            ($field:ident, $ty:ty) => {{
                self.$field = value.parse::<$ty>().map_err(|_| bad(key, value))?;
            }};
        }
        match key {
            "sc_batch" => set!(sc_batch, usize),
            "sc_lr" => set!(sc_lr, f64),
            "sc_wd" => set!(sc_wd, f64),
            "sc_epochs" => set!(sc_epochs, usize),
            "tpn_batch" => set!(tpn_batch, usize),
            "tpn_lr" => set!(tpn_lr, f64),
            "tpn_wd" => set!(tpn_wd, f64),
            "tpn_epochs" => set!(tpn_epochs, usize),
            "common_dim" => set!(common_dim, usize),
            "heads" => set!(heads, usize),
            "candidates" => set!(candidates, usize),
            "tsm_batch" => set!(tsm_batch, usize),
            "tsm_lr" => set!(tsm_lr, f64),
            "tsm_wd" => set!(tsm_wd, f64),
            "tsm_epochs" => set!(tsm_epochs, usize),
            "llu_capacity" => set!(llu_capacity, usize),
            "llu_mu" => set!(llu_mu, f64),
            "llu_steps" => set!(llu_steps, usize),
            "llu_lr" => set!(llu_lr, f64),
            "dsc_n" => set!(dsc_n, usize),
            "dtpn_n" => set!(dtpn_n, usize),
            "dtsm_n" => set!(dtsm_n, usize),
            "db_size" => set!(db_size, usize),
            "max_steps" => set!(max_steps, usize),
            "replan_every" => set!(replan_every, usize),
            "seed" => set!(seed, u64),
            "workers" => set!(workers, usize),
            other => return Err(Error::BadConfig(format!("unknown config key: {other}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sc_lr", self.sc_lr),
            ("tpn_lr", self.tpn_lr),
            ("tsm_lr", self.tsm_lr),
            ("llu_lr", self.llu_lr),
            ("llu_mu", self.llu_mu),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::BadConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.common_dim % self.heads != 0 {
            return Err(Error::BadConfig(format!(
                "common_dim {} not divisible by heads {}",
                self.common_dim, self.heads
            )));
        }
        Ok(())
    }

    /// Parse a flat `key = value` config file (# comments allowed).
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let text = std::fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::BadConfig(format!(
                    "line {}: expected key = value",
                    lineno + 1
                )));
            };
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize in the same flat format.
    pub fn to_text(&self) -> String {
        let entries: BTreeMap<&str, String> = BTreeMap::from([
            ("sc_batch", self.sc_batch.to_string()),
            ("sc_lr", format!("{:e}", self.sc_lr)),
            ("sc_wd", format!("{:e}", self.sc_wd)),
            ("sc_epochs", self.sc_epochs.to_string()),
            ("tpn_batch", self.tpn_batch.to_string()),
            ("tpn_lr", format!("{:e}", self.tpn_lr)),
            ("tpn_wd", format!("{:e}", self.tpn_wd)),
            ("tpn_epochs", self.tpn_epochs.to_string()),
            ("common_dim", self.common_dim.to_string()),
            ("heads", self.heads.to_string()),
            ("candidates", self.candidates.to_string()),
            ("tsm_batch", self.tsm_batch.to_string()),
            ("tsm_lr", format!("{:e}", self.tsm_lr)),
            ("tsm_wd", format!("{:e}", self.tsm_wd)),
            ("tsm_epochs", self.tsm_epochs.to_string()),
            ("llu_capacity", self.llu_capacity.to_string()),
            ("llu_mu", format!("{:e}", self.llu_mu)),
            ("llu_steps", self.llu_steps.to_string()),
            ("llu_lr", format!("{:e}", self.llu_lr)),
            ("dsc_n", self.dsc_n.to_string()),
            ("dtpn_n", self.dtpn_n.to_string()),
            ("dtsm_n", self.dtsm_n.to_string()),
            ("db_size", self.db_size.to_string()),
            ("max_steps", self.max_steps.to_string()),
            ("replan_every", self.replan_every.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
        ]);
        let mut s = String::new();
        for (k, v) in entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// Output root: the environment variable when set, else `./out`.
    pub fn out_root() -> std::path::PathBuf {
        std::env::var_os(OUT_ROOT_ENV)
            .map(std::path::PathBuf::from)
            .unwrap_or_else(|| std::path::PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_schedules() {
        let c = RunConfig::default();
        assert_eq!(c.sc_batch, 256);
        assert_eq!(c.sc_lr, 1e-4);
        assert_eq!(c.sc_wd, 0.01);
        assert_eq!(c.sc_epochs, 100);
        assert_eq!(c.tpn_batch, 10);
        assert_eq!(c.tpn_lr, 8e-4);
        assert_eq!(c.tpn_wd, 1e-4);
        assert_eq!(c.tpn_epochs, 500);
        assert_eq!(c.common_dim, 128);
        assert_eq!(c.heads, 32);
        assert_eq!(c.candidates, 5);
        assert_eq!(c.tsm_batch, 128);
        assert_eq!(c.tsm_lr, 1e-5);
        assert_eq!(c.tsm_wd, 1e-5);
        assert_eq!(c.llu_capacity, 50);
    }

    #[test]
    fn file_roundtrip_and_unknown_keys() {
        let mut cfg = RunConfig::default();
        cfg.apply("seed", "42").unwrap();
        cfg.apply("sc_lr", "0.0005").unwrap();
        let dir = std::env::temp_dir().join("socnav_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, cfg.to_text()).unwrap();
        let back = RunConfig::load(&path).unwrap();
        assert_eq!(back, cfg);

        std::fs::write(&path, "nonsense_key = 3\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
        std::fs::write(&path, "sc_lr = -1\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
        std::fs::remove_file(&path).unwrap();
    }
}
