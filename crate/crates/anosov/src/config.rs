//! Run configuration for the command-line tool.
//!
//! Configs are TOML documents with the schema below; every field has a
//! default, so `{}` is a valid config. Command-line flags override the
//! file.
//!
//! ```toml
//! seed = 7

//! [profile]          # profile-verify
//! epsilon = 0.5
//! delta = 0.1
//! k = 3
//! lambda_gap = 1.5
//! kplus = 0.5
//! n_profiles = 100
//!
//! [surface]          # surface-build
//! epsilon = 0.5
//! kplus_target_fraction = 0.9   # of the admissible bound
//! separation_geodesics = 500
//! separation_horizon = 30.0
//! [[surface.bumps]]
//! x = 0.0
//! y = 0.0
//! delta = 0.05
//!
//! [deform]           # deform / certify
//! mesh_h_far = 0.03
//! mesh_near_factor = 0.03125
//! rho_grid = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
//!
//! [certify]
//! n_geodesics = 200
//! horizon_t = 40.0
//! window_len = 10.0
//! growth_samples = 8
//!
//! [tolerances]
//! sign_tol = 1e-8
//! slack = 1e-3
//! convergence_tol = 1e-6
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub profile: ProfileConfig,
    pub surface: SurfaceConfig,
    pub deform: DeformConfig,
    pub certify: CertifyConfig,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub lambda_gap: f64,
    pub kplus: f64,
    pub n_profiles: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { epsilon: 0.5, delta: 0.1, k: 3, lambda_gap: 1.5, kplus: 0.5, n_profiles: 100 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceConfig {
    pub epsilon: f64,
    pub kplus_target_fraction: f64,
    pub separation_geodesics: usize,
    pub separation_horizon: f64,
    pub bumps: Vec<BumpConfig>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            epsilon: 0.5,
            kplus_target_fraction: 0.9,
            separation_geodesics: 500,
            separation_horizon: 30.0,
            bumps: vec![BumpConfig { x: 0.0, y: 0.0, delta: 0.05 }],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub x: f64,
    pub y: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeformConfig {
    pub mesh_h_far: f64,
    pub mesh_near_factor: f64,
    pub rho_grid: Vec<f64>,
}

impl Default for DeformConfig {
    fn default() -> Self {
        DeformConfig {
            mesh_h_far: 0.03,
            mesh_near_factor: 1.0 / 32.0,
            rho_grid: crate::deform::default_rho_grid(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub n_geodesics: usize,
    pub horizon_t: f64,
    pub window_len: f64,
    pub growth_samples: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig { n_geodesics: 200, horizon_t: 40.0, window_len: 10.0, growth_samples: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub sign_tol: f64,
    pub slack: f64,
    pub convergence_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { sign_tol: 1e-8, slack: 1e-3, convergence_tol: 1e-6 }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.tolerances;
        if !(t.sign_tol > 0.0 && t.slack > 0.0 && t.convergence_tol > 0.0) {
            return Err(ConfigError::Invalid("tolerances must be positive".into()));
        }
        if !(self.profile.epsilon > 0.0 && self.profile.epsilon < 1.0) {
            return Err(ConfigError::Invalid("profile.epsilon must lie in (0, 1)".into()));
        }
        if self.profile.delta <= 0.0 {
            return Err(ConfigError::Invalid("profile.delta must be positive".into()));
        }
        if !(self.surface.epsilon > 0.0 && self.surface.epsilon < 1.0) {
            return Err(ConfigError::Invalid("surface.epsilon must lie in (0, 1)".into()));
        }
        for (i, b) in self.surface.bumps.iter().enumerate() {
            if b.delta <= 0.0 {
                return Err(ConfigError::Invalid(format!("surface.bumps[{i}].delta must be positive")));
            }
        }
        let grid = &self.deform.rho_grid;
        if grid.is_empty()
            || grid.windows(2).any(|w| w[1] <= w[0])
            || grid[0] < 0.0
            || *grid.last().unwrap() > 1.0
        {
            return Err(ConfigError::Invalid(
                "deform.rho_grid must be ascending within [0, 1]".into(),
            ));
        }
        if self.deform.mesh_h_far <= 0.0 || self.deform.mesh_near_factor <= 0.0 {
            return Err(ConfigError::Invalid("mesh resolution must be positive".into()));
        }
        Ok(())
    }

    /// Parse a `--rho-grid` flag value like `0,0.5,1`.
    pub fn parse_rho_grid(text: &str) -> Result<Vec<f64>, ConfigError> {
        let grid: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let grid = grid.map_err(|e| ConfigError::Parse(e.to_string()))?;
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::Invalid("rho grid must be strictly ascending".into()));
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.profile.n_profiles, 100);
        assert_eq!(cfg.deform.rho_grid.len(), 11);
    }

    #[test]
    fn invalid_delta_rejected() {
        let err = RunConfig::from_toml("[profile]\ndelta = -0.5\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("banana = 1\n").is_err());
    }

    #[test]
    fn rho_grid_parsing() {
        assert_eq!(RunConfig::parse_rho_grid("0,0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(RunConfig::parse_rho_grid("1,0").is_err());
    }
}
