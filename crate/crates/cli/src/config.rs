//! Run configuration: an optional TOML file overridden by flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use modelfree::lp::Tolerances;
use modelfree::market::DEFAULT_PATH_CAP;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub feas: Option<f64>,
    pub gap: Option<f64>,
    pub comp: Option<f64>,
    pub max_iterations: Option<usize>,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub instance: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    pub max_paths: Option<u64>,
    pub seed: Option<u64>,
}

/// Effective settings after merging file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub instance: Option<PathBuf>,
    pub format: Format,
    pub tolerances: Tolerances,
    pub max_paths: u64,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 20_130_517;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Applies flag overrides and validates the result.
    pub fn settings(&self, command: &str, flags: &RunConfig) -> Result<Settings, String> {
        if let Some(c) = &self.command {
            if c != command {
                return Err(format!("config file is for command {c:?}, not {command:?}"));
            }
        }
        let mut tol = Tolerances::default();
        let pick = |flag: Option<f64>, file: Option<f64>, default: f64, name: &str| -> Result<f64, String> {
            let v = flag.or(file).unwrap_or(default);
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(format!("tolerance {name} must be positive, got {v}"))
            }
        };
        tol.feas = pick(flags.tolerances.feas, self.tolerances.feas, tol.feas, "feas")?;
        tol.gap = pick(flags.tolerances.gap, self.tolerances.gap, tol.gap, "gap")?;
        tol.comp = pick(flags.tolerances.comp, self.tolerances.comp, tol.comp, "comp")?;
        tol.max_iterations = flags
            .tolerances
            .max_iterations
            .or(self.tolerances.max_iterations)
            .unwrap_or(tol.max_iterations);
        let max_paths = flags.max_paths.or(self.max_paths).unwrap_or(DEFAULT_PATH_CAP);
        if max_paths == 0 {
            return Err("max-paths must be positive".into());
        }
        Ok(Settings {
            instance: flags.instance.clone().or_else(|| self.instance.clone()),
            format: flags.format.or(self.format).unwrap_or_default(),
            tolerances: tol,
            max_paths,
            seed: flags.seed.or(self.seed).unwrap_or(DEFAULT_SEED),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: RunConfig = toml::from_str(
            r#"
            command = "price"
            format = "json"
            seed = 3
            [tolerances]
            feas = 1e-8
            "#,
        )
        .unwrap();
        let flags = RunConfig {
            seed: Some(9),
            ..RunConfig::default()
        };
        let s = file.settings("price", &flags).unwrap();
        assert_eq!(s.format, Format::Json);
        assert_eq!(s.seed, 9);
        assert_eq!(s.tolerances.feas, 1e-8);
        assert_eq!(s.tolerances.gap, Tolerances::default().gap);
        assert!(file.settings("selftest", &flags).is_err());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_tolerances() {
        assert!(toml::from_str::<RunConfig>("colour = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[tolerances]\nfeasibility = 1").is_err());
        let file: RunConfig = toml::from_str("[tolerances]\ngap = -1.0").unwrap();
        assert!(file.settings("price", &RunConfig::default()).is_err());
    }
}
