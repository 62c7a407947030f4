//! Operating-point configuration, read from a TOML document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{ResponseAction, ResponsePolicy, RetrainConfig};
use crate::selection::SelectionConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub model_dir: PathBuf,
    pub results_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: PathBuf::from("data"),
            model_dir: PathBuf::from("models"),
            results_dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sample_rate_hz: f64,
    pub window_s: f64,
    /// Total training vectors per model, legitimate plus impostor.
    pub data_size: usize,
    pub rho: f64,
    pub alpha: f64,
    pub corr_threshold: f64,
    pub epsilon_cs: f64,
    pub t_windows: usize,
    pub lockout_after: u32,
    pub seed: u64,
    pub paths: Paths,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sample_rate_hz: 50.0,
            window_s: 6.0,
            data_size: 800,
            rho: 1.0,
            alpha: 0.05,
            corr_threshold: 0.85,
            epsilon_cs: 0.2,
            t_windows: 100,
            lockout_after: 1,
            seed: 0,
            paths: Paths::default(),
        }
    }
}

fn check(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::validation(field, reason))
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse {
            location: "config".into(),
            reason: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { reason, .. } => Error::Parse {
                location: path.display().to_string(),
                reason,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0,
            "sample_rate_hz",
            "must be a positive number",
        )?;
        check(
            self.window_s.is_finite() && self.window_s > 0.0 && self.window_s <= 60.0,
            "window_s",
            "must lie in (0, 60]",
        )?;
        check(
            self.window_s * self.sample_rate_hz >= 2.0,
            "window_s",
            "window must hold at least 2 samples",
        )?;
        check(
            self.data_size >= 4 && self.data_size.is_multiple_of(2),
            "data_size",
            "must be an even number of at least 4",
        )?;
        check(self.rho.is_finite() && self.rho > 0.0, "rho", "must be positive")?;
        self.selection().validate()?;
        check(
            self.epsilon_cs.is_finite() && self.epsilon_cs > 0.0,
            "epsilon_cs",
            "must be positive",
        )?;
        check(self.t_windows >= 1, "t_windows", "must be at least 1")?;
        check(self.lockout_after >= 1, "lockout_after", "must be at least 1")?;
        Ok(())
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            alpha: self.alpha,
            corr_threshold: self.corr_threshold,
            ..SelectionConfig::default()
        }
    }

    pub fn retrain(&self) -> RetrainConfig {
        RetrainConfig {
            epsilon_cs: self.epsilon_cs,
            t_windows: self.t_windows,
        }
    }

    pub fn response(&self) -> ResponsePolicy {
        ResponsePolicy {
            lockout_after_rejections: self.lockout_after,
            action: ResponseAction::Lock,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(Config::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn partial_document_overrides() {
        let cfg = Config::from_toml("rho = 0.5\nseed = 9\n[paths]\nresults_dir = \"out\"\n").unwrap();
        assert_eq!((cfg.rho, cfg.seed), (0.5, 9));
        assert_eq!(cfg.paths.results_dir, PathBuf::from("out"));
        assert_eq!(cfg.paths.data_dir, PathBuf::from("data"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Config::from_toml("rhoo = 1.0"), Err(Error::Parse { .. })));
        assert!(Config::from_toml("[paths]\ncache = \"x\"").is_err());
    }

    #[test]
    fn failing_field_is_named() {
        for (doc, field) in [
            ("rho = 0.0", "rho"),
            ("alpha = 1.5", "alpha"),
            ("data_size = 7", "data_size"),
            ("epsilon_cs = -0.1", "epsilon_cs"),
            ("t_windows = 0", "t_windows"),
            ("lockout_after = 0", "lockout_after"),
            ("window_s = 0.01", "window_s"),
            ("corr_threshold = 0.0", "corr_threshold"),
        ] {
            match Config::from_toml(doc) {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field, "{doc}"),
                other => panic!("{doc}: {other:?}"),
            }
        }
    }
}
