//! Experiment configuration: a TOML document merged over the defaults, then
//! patched by `key.path=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use eps_core::{
    ChargedParticleMedium, DriveSpec, EpsError, GaugeTag, GaussianPacket, GridSpec, PhysicalConstants,
    PropagatorConfig,
};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub medium: ChargedParticleMedium,
    pub constants: PhysicalConstants,
    pub drive: DriveSpec,
    pub grid: GridSpec,
    pub propagator: PropagatorConfig,
    pub gauges: Vec<GaugeTag>,
    pub packet: GaussianPacket,
    pub output_dir: PathBuf,
    /// Seeds the randomized checks.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            medium: ChargedParticleMedium::default(),
            constants: PhysicalConstants::default(),
            drive: DriveSpec::default(),
            grid: GridSpec::default(),
            propagator: PropagatorConfig::default(),
            gauges: vec![GaugeTag::AGauge, GaugeTag::PhiGauge],
            packet: GaussianPacket::default(),
            output_dir: PathBuf::from("eps-out"),
            seed: 0,
        }
    }
}

fn field(name: &'static str) -> impl Fn(EpsError) -> CliError {
    move |source| CliError::Field { field: name, source }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.medium.validate().map_err(field("medium"))?;
        self.constants.validate().map_err(field("constants"))?;
        self.drive.validate().map_err(field("drive"))?;
        self.grid.validate().map_err(field("grid"))?;
        self.propagator.validate().map_err(field("propagator"))?;
        self.packet.validate().map_err(field("packet"))?;
        if self.gauges.is_empty() {
            return Err(CliError::Config("gauges: select at least one of a_gauge, phi_gauge".into()));
        }
        if self.gauges.contains(&GaugeTag::Custom) {
            return Err(CliError::Config("gauges: only a_gauge and phi_gauge can be run".into()));
        }
        if self.gauges.iter().any(|g| self.gauges.iter().filter(|h| *h == g).count() > 1) {
            return Err(CliError::Config("gauges: each gauge may appear once".into()));
        }
        for gauge in &self.gauges {
            self.propagator.scheme.resolve(*gauge).map_err(field("propagator.scheme"))?;
        }
        Ok(())
    }

    /// Defaults, overlaid with `text`, then with each `key=value` override.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut tree = defaults_tree()?;
        let user: Table = text.parse().map_err(|e| CliError::Config(format!("invalid TOML: {e}")))?;
        merge(&mut tree, user);
        for item in overrides {
            apply_override(&mut tree, item)?;
        }
        let config: Self = Value::Table(tree)
            .try_into()
            .map_err(|e| CliError::Config(format!("{e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }
}

fn defaults_tree() -> Result<Table> {
    Table::try_from(ExperimentConfig::default()).map_err(|e| CliError::Config(format!("{e}")))
}

/// Tables merge key by key; any other value replaces the base.
fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// `value` is read as a TOML value; anything unparsable is taken as a string.
fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    doc.parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn apply_override(tree: &mut Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config(format!("override `{item}` has an empty key segment")));
    }
    let (last, parents) = path.split_last().expect("split yields one segment");
    let mut node = tree;
    for (depth, segment) in parents.iter().enumerate() {
        node = match node.get_mut(*segment) {
            Some(Value::Table(t)) => t,
            _ => {
                return Err(CliError::Config(format!(
                    "override `{item}`: `{}` is not a section",
                    path[..=depth].join(".")
                )))
            }
        };
    }
    if !node.contains_key(*last) {
        return Err(CliError::Config(format!("override `{item}`: unknown key `{key}`")));
    }
    node.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn serialized_defaults_round_trip() {
        let text = ExperimentConfig::default().to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text, &[]).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn partial_sections_merge() {
        let cfg = ExperimentConfig::from_toml_str("[medium]\nalpha = 2.0\n", &[]).unwrap();
        assert_eq!(cfg.medium.alpha, 2.0);
        assert_eq!(cfg.medium.m, 1.0);
    }

    #[test]
    fn overrides_use_dotted_paths() {
        let overrides = vec![
            "drive.omega=0.5".to_string(),
            "grid.n_q=64".to_string(),
            "gauges=[\"phi_gauge\"]".to_string(),
            "output_dir=/tmp/x".to_string(),
            "drive.e0=[0.5, 0.25]".to_string(),
        ];
        let cfg = ExperimentConfig::from_toml_str("", &overrides).unwrap();
        assert_eq!(cfg.drive.omega, 0.5);
        assert_eq!(cfg.grid.n_q, 64);
        assert_eq!(cfg.gauges, vec![GaugeTag::PhiGauge]);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.drive.e0, eps_core::Complex64::new(0.5, 0.25));
    }

    #[test]
    fn bad_overrides_name_the_key() {
        let err = ExperimentConfig::from_toml_str("", &["medium.mass=2".into()]).unwrap_err();
        assert!(err.to_string().contains("medium.mass"), "{err}");
        assert!(ExperimentConfig::from_toml_str("", &["alpha".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str("", &["seed.x=1".into()]).is_err());
    }

    #[test]
    fn validation_reports_field() {
        let err = ExperimentConfig::from_toml_str("", &["medium.alpha=-1".into()]).unwrap_err();
        assert!(err.to_string().starts_with("medium"), "{err}");
        assert!(ExperimentConfig::from_toml_str("gauges = []", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("gauges = [\"a_gauge\", \"a_gauge\"]", &[]).is_err());
        let err = ExperimentConfig::from_toml_str("[propagator]\nscheme = \"strang\"\n", &[]).unwrap_err();
        assert!(err.to_string().starts_with("propagator.scheme"), "{err}");
    }
}
