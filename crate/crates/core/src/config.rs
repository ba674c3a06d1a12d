//! Run configuration: one JSON document, validated on load, hashable for
//! provenance. CLI flags override file values field by field.

use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, CrossSectionGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Environment variable that overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "CHANWAVE_OUT";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CrossConfig {
    /// "interval" or "rectangle".
    pub shape: String,
    pub lengths: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl Default for CrossConfig {
    fn default() -> Self {
        CrossConfig {
            shape: "interval".to_string(),
            lengths: vec![4.0],
            nodes: vec![41],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub axial_nodes: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            x_min: -40.0,
            x_max: 40.0,
            axial_nodes: 801,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    /// Number of sequence members requested from the deflated search.
    pub k_max: usize,
    /// Axial window length of the trial seed families.
    pub window: f64,
    /// Amplitude samples evaluated per family.
    pub samples: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            k_max: 3,
            window: 10.0,
            samples: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// Sup-norm residual for converged critical points and waves.
    pub newton: f64,
    /// Sup-norm residual for the recorded minimization run.
    pub minimize: f64,
    /// Allowed sup deviation from the asymptotic states at the ends.
    pub asymptotic: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            newton: 1e-10,
            minimize: 1e-10,
            asymptotic: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub t_end: f64,
    pub dt: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            t_end: 20.0,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub cross: CrossConfig,
    pub channel: ChannelConfig,
    pub speed: f64,
    /// Speeds for the sweep subcommand; empty outside sweeps.
    pub sweep: Vec<f64>,
    pub seeds: SeedConfig,
    pub tolerances: ToleranceConfig,
    pub evolution: EvolutionConfig,
    pub output_dir: PathBuf,
    pub random_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cross: CrossConfig::default(),
            channel: ChannelConfig::default(),
            speed: 0.6,
            sweep: Vec::new(),
            seeds: SeedConfig::default(),
            tolerances: ToleranceConfig::default(),
            evolution: EvolutionConfig::default(),
            output_dir: PathBuf::from("."),
            random_seed: 42,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("malformed config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = match self.cross.shape.as_str() {
            "interval" => 1,
            "rectangle" => 2,
            other => {
                return Err(Error::config(format!(
                    "cross shape must be interval or rectangle, got {other:?}"
                )))
            }
        };
        if self.cross.lengths.len() != dim || self.cross.nodes.len() != dim {
            return Err(Error::config(format!(
                "{} cross section needs {dim} length(s) and {dim} node count(s)",
                self.cross.shape
            )));
        }
        for &l in &self.cross.lengths {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::config(format!("cross length must be positive, got {l}")));
            }
        }
        for &n in &self.cross.nodes {
            if n < 3 {
                return Err(Error::config(format!("cross nodes must be at least 3, got {n}")));
            }
        }
        let ch = &self.channel;
        if !(ch.x_min.is_finite() && ch.x_max.is_finite() && ch.x_min < ch.x_max) {
            return Err(Error::config(format!(
                "channel needs x_min < x_max, got [{}, {}]",
                ch.x_min, ch.x_max
            )));
        }
        if ch.axial_nodes < 3 {
            return Err(Error::config(format!(
                "axial nodes must be at least 3, got {}",
                ch.axial_nodes
            )));
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(Error::config(format!(
                "speed must be positive and finite, got {}",
                self.speed
            )));
        }
        for &c in &self.sweep {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config(format!(
                    "sweep speeds must be positive and finite, got {c}"
                )));
            }
        }
        if self.seeds.k_max == 0 {
            return Err(Error::config("seeds.k_max must be at least 1"));
        }
        if !(self.seeds.window.is_finite() && self.seeds.window > 0.0) {
            return Err(Error::config(format!(
                "seeds.window must be positive, got {}",
                self.seeds.window
            )));
        }
        if self.seeds.samples == 0 {
            return Err(Error::config("seeds.samples must be at least 1"));
        }
        for (name, tol) in [
            ("newton", self.tolerances.newton),
            ("minimize", self.tolerances.minimize),
            ("asymptotic", self.tolerances.asymptotic),
        ] {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::config(format!(
                    "tolerances.{name} must be positive, got {tol}"
                )));
            }
        }
        if !(self.evolution.t_end.is_finite() && self.evolution.t_end > 0.0) {
            return Err(Error::config(format!(
                "evolution.t_end must be positive, got {}",
                self.evolution.t_end
            )));
        }
        if !(self.evolution.dt.is_finite() && self.evolution.dt > 0.0) {
            return Err(Error::config(format!(
                "evolution.dt must be positive, got {}",
                self.evolution.dt
            )));
        }
        Ok(())
    }

    pub fn cross_grid(&self) -> Result<CrossSectionGrid> {
        match self.cross.shape.as_str() {
            "interval" => CrossSectionGrid::interval(self.cross.lengths[0], self.cross.nodes[0]),
            "rectangle" => CrossSectionGrid::rectangle(
                [self.cross.lengths[0], self.cross.lengths[1]],
                [self.cross.nodes[0], self.cross.nodes[1]],
            ),
            other => Err(Error::config(format!("unknown cross shape {other:?}"))),
        }
    }

    /// Two-sided grid [x_min, x_max] of the full channel.
    pub fn channel_grid(&self) -> Result<ChannelGrid> {
        ChannelGrid::new(
            self.channel.x_min,
            self.channel.x_max,
            self.channel.axial_nodes,
            self.cross_grid()?,
        )
    }

    /// Half-cylinder grid [x_min, 0] at the full grid's axial spacing; the
    /// minimization stage works here before gluing onto the full channel.
    pub fn half_grid(&self) -> Result<ChannelGrid> {
        if self.channel.x_min >= 0.0 {
            return Err(Error::config(format!(
                "half-cylinder stage needs x_min < 0, got {}",
                self.channel.x_min
            )));
        }
        let dx = (self.channel.x_max - self.channel.x_min) / (self.channel.axial_nodes - 1) as f64;
        let nodes = (-self.channel.x_min / dx).round() as usize + 1;
        if nodes < 3 {
            return Err(Error::config(
                "half-cylinder stage needs at least 3 axial nodes left of zero",
            ));
        }
        let x_min = -dx * (nodes - 1) as f64;
        ChannelGrid::new(x_min, 0.0, nodes, self.cross_grid()?)
    }

    /// The configuration as one canonical JSON line; field order is the
    /// struct order, so equal configs serialize identically.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Hex SHA-256 of the canonical form, recorded in reports.
    pub fn hash(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json()?.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }

    /// Output directory after applying the environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates_and_builds_grids() {
        let config = RunConfig::default();
        config.validate().unwrap();
        let full = config.channel_grid().unwrap();
        assert_eq!(full.axial_nodes, 801);
        let half = config.half_grid().unwrap();
        assert_eq!(half.axial_nodes, 401);
        assert_eq!(half.x_max, 0.0);
        assert!((half.dx() - full.dx()).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"speeed": 0.6}"#);
        assert!(err.is_err());
    }

    #[test]
    fn partial_config_takes_defaults() {
        let config: RunConfig = serde_json::from_str(r#"{"speed": 0.9}"#).unwrap();
        assert_eq!(config.speed, 0.9);
        assert_eq!(config.channel.axial_nodes, 801);
        config.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut config = RunConfig::default();
        config.speed = -1.0;
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.channel.x_min = 40.0;
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.cross.shape = "triangle".to_string();
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.cross.lengths = vec![4.0, 4.0];
        assert!(config.validate().is_err());

        let mut config = RunConfig::default();
        config.seeds.k_max = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig::default();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let mut c = RunConfig::default();
        c.speed = 0.7;
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }
}
