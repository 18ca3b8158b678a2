//! Run configuration read from JSON, with recipe fallback.

use std::path::Path;

use puretone::lindiv::{Flavor, ProfileSampler, ScanSettings, DEFAULT_RESONANCE_TOL};
use puretone::recipes::{recipe, Problem};
use puretone::tile::ExportFormat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Bundled problem used when `problem` is absent.
    #[serde(default)]
    pub recipe: Option<String>,
    #[serde(default)]
    pub problem: Option<Problem>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub divisors: DivisorsConfig,
    #[serde(default)]
    pub freq: FreqConfig,
    #[serde(default)]
    pub resonance: ResonanceConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub tile: TileConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivisorsConfig {
    pub j_max: usize,
    /// Reference period; defaults to the kernel period of mode `k`.
    pub period: Option<f64>,
}

impl Default for DivisorsConfig {
    fn default() -> Self {
        Self { j_max: 32, period: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreqConfig {
    pub k_max: usize,
}

impl Default for FreqConfig {
    fn default() -> Self {
        Self { k_max: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceConfig {
    pub j_max: usize,
    pub tol: f64,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        Self {
            j_max: 32,
            tol: DEFAULT_RESONANCE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub sampler: ProfileSampler,
    pub n_samples: usize,
    pub k_max: usize,
    pub j_max: usize,
    pub tol: f64,
    pub flavor: Flavor,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let s = ScanSettings::default();
        Self {
            sampler: ProfileSampler::uniform_single_jump(),
            n_samples: s.n_samples,
            k_max: s.k_max,
            j_max: s.j_max,
            tol: s.tol,
            flavor: s.flavor,
        }
    }
}

impl ScanConfig {
    pub fn settings(&self, seed: u64) -> ScanSettings {
        ScanSettings {
            n_samples: self.n_samples,
            k_max: self.k_max,
            j_max: self.j_max,
            tol: self.tol,
            seed,
            flavor: self.flavor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileConfig {
    /// Amplitude to tile; defaults to the first of the problem's amplitudes.
    pub alpha: Option<f64>,
    pub nx: usize,
    pub nt: usize,
    pub format: ExportFormat,
}

impl Default for TileConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            nx: 64,
            nt: 128,
            format: ExportFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub alpha: Option<f64>,
    /// Coarsest grid; each further level doubles both counts.
    pub nx: usize,
    pub nt: usize,
    pub levels: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            nx: 32,
            nt: 64,
            levels: 3,
        }
    }
}

/// Failure to obtain a usable configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Fills `problem` from the recipe when only a recipe is named.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        if self.problem.is_none() {
            if let Some(name) = &self.recipe {
                self.problem = Some(recipe(name).map_err(|e| ConfigError(e.to_string()))?);
            }
        }
        if let Some(p) = &self.problem {
            p.validate().map_err(|e| ConfigError(e.to_string()))?;
        }
        Ok(self)
    }

    pub fn problem(&self) -> Result<&Problem, ConfigError> {
        self.problem
            .as_ref()
            .ok_or_else(|| ConfigError("this command needs a problem or a recipe".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_fills_the_problem() {
        let cfg = RunConfig {
            recipe: Some("square-wave-k1".into()),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(cfg.problem().unwrap().k, 1);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"recipe": "square-wave-k1", "bogus": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\n  \"seed\": 3,\n  oops\n}").unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        assert!(err.0.contains("line 3 column"), "{}", err.0);
    }
}
