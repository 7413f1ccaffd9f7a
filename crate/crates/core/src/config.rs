//! Experiment configuration: a flat TOML file validated into the solver
//! parameter set, truth shapes, loads, and mesh resolutions.

use crate::elasticity::{IsotropicMaterial, LinearTraction};
use crate::geom::ShapeSpec;
use crate::inversion::InversionConfig;
use crate::mesh::Side;
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub mu: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Traction expression, e.g. "(x, y)" or "(-y, -x)".
    pub g: String,
}

/// On-disk experiment description. Solver parameters default to the
/// experiment table; mesh resolutions, material, and loads are explicit.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Inversion mesh cells per side.
    pub coarse_n: usize,
    /// Forward (synthetic data) mesh is `fine_multiplier * coarse_n` cells.
    #[serde(default = "defaults::fine_multiplier")]
    pub fine_multiplier: usize,
    /// Clamped sides of the outer boundary.
    #[serde(default = "defaults::sigma_d")]
    pub sigma_d: Vec<Side>,
    /// Target reported noise level (0 = noiseless data).
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub seed: u64,
    /// Field snapshot period of the inversion driver, in iterations.
    #[serde(default = "defaults::snapshot_stride")]
    pub snapshot_stride: usize,

    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    #[serde(default = "defaults::tau_init")]
    pub tau_init: f64,
    #[serde(default = "defaults::tau_max")]
    pub tau_max: f64,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    #[serde(default = "defaults::tol_ref")]
    pub tol_ref: f64,
    #[serde(default = "defaults::n_ref")]
    pub n_ref: usize,
    #[serde(default = "defaults::d0")]
    pub d0: f64,
    #[serde(default = "defaults::max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "defaults::refine_fraction")]
    pub refine_fraction: f64,

    pub material: MaterialConfig,
    /// True cavity geometry; drives synthetic data and the overlap score.
    #[serde(default, rename = "shape")]
    pub shapes: Vec<ShapeSpec<f64>>,
    #[serde(rename = "measurement")]
    pub measurements: Vec<MeasurementConfig>,
}

mod defaults {
    use crate::mesh::Side;

    pub fn fine_multiplier() -> usize {
        4
    }
    pub fn sigma_d() -> Vec<Side> {
        vec![Side::Bottom]
    }
    pub fn snapshot_stride() -> usize {
        500
    }
    pub fn gamma() -> f64 {
        1e-1
    }
    pub fn epsilon() -> f64 {
        1.0 / (16.0 * std::f64::consts::PI)
    }
    pub fn delta() -> f64 {
        1e-2
    }
    pub fn tau_init() -> f64 {
        1e-3
    }
    pub fn tau_max() -> f64 {
        1e-2
    }
    pub fn tol() -> f64 {
        1e-5
    }
    pub fn tol_ref() -> f64 {
        7e-5
    }
    pub fn n_ref() -> usize {
        2000
    }
    pub fn d0() -> f64 {
        0.1
    }
    pub fn max_iterations() -> usize {
        20_000
    }
    pub fn refine_fraction() -> f64 {
        0.15
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.coarse_n == 0 {
            return Err(ConfigError::Invalid("coarse_n must be positive".into()));
        }
        if self.fine_multiplier < 2 {
            return Err(ConfigError::Invalid(
                "fine_multiplier below 2 would invite an inverse crime".into(),
            ));
        }
        if self.sigma_d.is_empty() {
            return Err(ConfigError::Invalid("sigma_d needs at least one side".into()));
        }
        if self.measurements.is_empty() {
            return Err(ConfigError::Invalid("at least one [[measurement]] required".into()));
        }
        if !(0.0..1.0).contains(&self.noise_level) {
            return Err(ConfigError::Invalid(format!(
                "noise_level {} outside [0, 1)",
                self.noise_level
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(ConfigError::Invalid("snapshot_stride must be positive".into()));
        }
        self.material()?;
        self.loads()?;
        let inv = self.inversion_config()?;
        inv.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn material(&self) -> Result<IsotropicMaterial<f64>, ConfigError> {
        IsotropicMaterial::new(self.material.mu, self.material.lambda)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn loads(&self) -> Result<Vec<LinearTraction<f64>>, ConfigError> {
        self.measurements
            .iter()
            .map(|m| LinearTraction::parse(&m.g).map_err(|e| ConfigError::Invalid(e.to_string())))
            .collect()
    }

    pub fn fine_n(&self) -> usize {
        self.coarse_n * self.fine_multiplier
    }

    pub fn inversion_config(&self) -> Result<InversionConfig<f64>, ConfigError> {
        Ok(InversionConfig {
            gamma: self.gamma,
            epsilon: self.epsilon,
            delta: self.delta,
            tau_init: self.tau_init,
            tau_max: self.tau_max,
            tol: self.tol,
            tol_ref: self.tol_ref,
            n_ref: self.n_ref,
            d0: self.d0,
            max_iterations: self.max_iterations,
            refine_fraction: self.refine_fraction,
            material: self.material()?,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
coarse_n = 48

[material]
mu = 0.5
lambda = 1.0

[[shape]]
kind = "disk"
center = [0.0, 0.0]
r = 0.3

[[measurement]]
g = "(x, y)"

[[measurement]]
g = "(-y, -x)"
"#;

    #[test]
    fn minimal_config_fills_table_defaults() {
        let cfg = RunConfig::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.coarse_n, 48);
        assert_eq!(cfg.fine_n(), 192);
        assert_eq!(cfg.gamma, 1e-1);
        assert_eq!(cfg.delta, 1e-2);
        assert_eq!(cfg.tol, 1e-5);
        assert_eq!(cfg.tol_ref, 7e-5);
        assert_eq!(cfg.n_ref, 2000);
        assert!((cfg.epsilon - 1.0 / (16.0 * std::f64::consts::PI)).abs() < 1e-18);
        assert_eq!(cfg.sigma_d, vec![Side::Bottom]);
        assert_eq!(cfg.loads().unwrap().len(), 2);
        assert!(matches!(cfg.shapes[0], ShapeSpec::Disk { .. }));
    }

    #[test]
    fn missing_key_is_named() {
        let err = RunConfig::from_str("coarse_n = 8\n[[measurement]]\ng = \"(x, y)\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("material"), "error should name the key: {msg}");
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = MINIMAL.replace("coarse_n = 48", "coarse_n = 48\nnoise_level = 1.5");
        assert!(RunConfig::from_str(&bad).is_err());
        let bad = MINIMAL.replace("mu = 0.5", "mu = -1.0");
        assert!(RunConfig::from_str(&bad).is_err());
        let bad = MINIMAL.replace("coarse_n = 48", "coarse_n = 48\ntol = 1.0");
        assert!(RunConfig::from_str(&bad).is_err());
        let bad = MINIMAL.replace("g = \"(x, y)\"", "g = \"(x*y, 0)\"");
        assert!(RunConfig::from_str(&bad).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("bogus_key = 1\n{MINIMAL}");
        assert!(RunConfig::from_str(&bad).is_err());
        let bad = format!("{MINIMAL}\nbogus_key = 1\n"); // lands in the last table
        assert!(RunConfig::from_str(&bad).is_err());
    }
}
