//! Run configuration: the key-value config file, command-line overrides and
//! the mapping onto search/update parameters.
//!
//! Format: one `key value` per line (`key = value` also accepted), `#`
//! comments. Unknown keys are rejected. Defaults are the reference
//! operating point of the tracker; `to_text` serializes them back in a
//! canonical order, which the golden-file test pins.

use std::path::{Path, PathBuf};

use crate::search::{LocalSearchConfig, SearchConfig};
use crate::update::{UpdateMode, UpdatePolicy};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Global search period T (frames).
    pub period: usize,
    /// Stage-1 candidate locations N.
    pub stage1_locations: usize,
    /// Stage-2 scale count M (grid spans 2^-2 .. 2^2, log-uniform).
    pub stage2_scale_count: usize,
    /// Stage-3 scale count L (grid spans 2^-0.4 .. 2^0.4, log-uniform).
    pub stage3_scale_count: usize,
    /// Absence threshold on the normalized score.
    pub tau_abs: f64,
    pub update_mode: UpdateMode,
    pub sim_threshold: f64,
    pub update_lr: f64,
    pub update_momentum: f64,
    pub update_iterations: usize,
    pub max_negatives: usize,
    /// Path to a trained self-evaluation model.
    pub selfeval_model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            period: 15,
            stage1_locations: 10,
            stage2_scale_count: 9,
            stage3_scale_count: 11,
            tau_abs: 0.3,
            update_mode: UpdateMode::SelfAware,
            sim_threshold: 0.5,
            update_lr: 0.01,
            update_momentum: 0.9,
            update_iterations: 10,
            max_negatives: 64,
            selfeval_model: None,
        }
    }
}

fn log_uniform_grid(count: usize, half_span_log2: f64) -> Vec<f64> {
    if count == 1 {
        return vec![1.0];
    }
    (0..count)
        .map(|k| {
            let e = -half_span_log2 + 2.0 * half_span_log2 * k as f64 / (count - 1) as f64;
            2f64.powf(e)
        })
        .collect()
}

impl RunConfig {
    pub fn to_search_config(&self) -> SearchConfig {
        let mut cfg = SearchConfig::default();
        cfg.period = self.period;
        cfg.tau_abs = self.tau_abs;
        cfg.global.num_locations = self.stage1_locations;
        cfg.global.stage2_scales = log_uniform_grid(self.stage2_scale_count, 2.0);
        cfg.global.stage3_scales = log_uniform_grid(self.stage3_scale_count, 0.4);
        cfg.local = LocalSearchConfig::default();
        cfg
    }

    pub fn to_update_policy(&self) -> UpdatePolicy {
        UpdatePolicy {
            mode: self.update_mode,
            sim_threshold: self.sim_threshold,
            learning_rate: self.update_lr,
            momentum: self.update_momentum,
            iterations: self.update_iterations,
            max_negatives: self.max_negatives,
        }
    }

    /// Applies one `key value` pair; rejects unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad value {value:?} for {key} ({what})"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            "search.T" => {
                self.period = value.parse().map_err(|_| bad("integer"))?;
                if self.period == 0 {
                    return Err(Error::Config("search.T must be at least 1".into()));
                }
            }
            "search.N" => {
                self.stage1_locations = value.parse().map_err(|_| bad("integer"))?;
                if self.stage1_locations == 0 {
                    return Err(Error::Config("search.N must be at least 1".into()));
                }
            }
            "search.M" => {
                self.stage2_scale_count = value.parse().map_err(|_| bad("integer"))?;
                if self.stage2_scale_count == 0 {
                    return Err(Error::Config("search.M must be at least 1".into()));
                }
            }
            "search.L" => {
                self.stage3_scale_count = value.parse().map_err(|_| bad("integer"))?;
                if self.stage3_scale_count == 0 {
                    return Err(Error::Config("search.L must be at least 1".into()));
                }
            }
            "search.tau_abs" => self.tau_abs = value.parse().map_err(|_| bad("number"))?,
            "update.mode" => self.update_mode = value.parse()?,
            "update.sim_threshold" => {
                self.sim_threshold = value.parse().map_err(|_| bad("number"))?
            }
            "update.lr" => self.update_lr = value.parse().map_err(|_| bad("number"))?,
            "update.momentum" => {
                self.update_momentum = value.parse().map_err(|_| bad("number"))?
            }
            "update.iterations" => {
                self.update_iterations = value.parse().map_err(|_| bad("integer"))?
            }
            "update.max_negatives" => {
                self.max_negatives = value.parse().map_err(|_| bad("integer"))?
            }
            "selfeval.model" => self.selfeval_model = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    pub fn parse_text(text: &str, path: &Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text, path)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let normalized = line.replace('=', " ");
            let mut it = normalized.split_whitespace();
            let (key, value) = match (it.next(), it.next(), it.next()) {
                (Some(k), Some(v), None) => (k, v),
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno + 1,
                        msg: format!("expected `key value`, got {line:?}"),
                    })
                }
            };
            self.set(key, value).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse_text(&text, path)
    }

    /// Canonical serialization; `parse_text(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("search.T {}\n", self.period));
        out.push_str(&format!("search.N {}\n", self.stage1_locations));
        out.push_str(&format!("search.M {}\n", self.stage2_scale_count));
        out.push_str(&format!("search.L {}\n", self.stage3_scale_count));
        out.push_str(&format!("search.tau_abs {}\n", self.tau_abs));
        out.push_str(&format!("update.mode {}\n", self.update_mode));
        out.push_str(&format!("update.sim_threshold {}\n", self.sim_threshold));
        out.push_str(&format!("update.lr {}\n", self.update_lr));
        out.push_str(&format!("update.momentum {}\n", self.update_momentum));
        out.push_str(&format!("update.iterations {}\n", self.update_iterations));
        out.push_str(&format!("update.max_negatives {}\n", self.max_negatives));
        if let Some(m) = &self.selfeval_model {
            out.push_str(&format!("selfeval.model {}\n", m.display()));
        }
        out
    }

    /// FNV-1a over the canonical serialization, as a hex string.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.to_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_produce_reference_scale_grids() {
        let cfg = RunConfig::default().to_search_config();
        assert_eq!(cfg.global.stage2_scales.len(), 9);
        assert_eq!(cfg.global.stage3_scales.len(), 11);
        let reference2 = crate::search::stage2_scale_grid();
        for (a, b) in cfg.global.stage2_scales.iter().zip(&reference2) {
            assert!((a - b).abs() < 1e-12);
        }
        let reference3 = crate::search::stage3_scale_grid();
        for (a, b) in cfg.global.stage3_scales.iter().zip(&reference3) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(cfg.period, 15);
        assert_eq!(cfg.global.num_locations, 10);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("search.T", "5").unwrap();
        cfg.set("update.mode", "blind").unwrap();
        cfg.set("seed", "99").unwrap();
        let text = cfg.to_text();
        let back = RunConfig::parse_text(&text, Path::new("cfg")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = RunConfig::parse_text("search.T 15\nsearch.banana 3\n", Path::new("c.cfg"))
            .unwrap_err()
            .to_string();
        assert!(err.contains(":2:"), "{err}");
        assert!(err.contains("banana"), "{err}");
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("search.T", "0").is_err());
        assert!(cfg.set("search.T", "abc").is_err());
        assert!(cfg.set("update.mode", "sometimes").is_err());
    }

    #[test]
    fn hash_changes_with_config() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.set("search.T", "1").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::default().hash());
    }

    #[test]
    fn equals_signs_and_comments_parse() {
        let cfg = RunConfig::parse_text(
            "# comment\nsearch.T = 7\nupdate.mode simthresh # inline\n",
            Path::new("c.cfg"),
        )
        .unwrap();
        assert_eq!(cfg.period, 7);
        assert_eq!(cfg.update_mode, UpdateMode::SimThresh);
    }
}
