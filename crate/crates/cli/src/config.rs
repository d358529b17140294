//! Flat key/value experiment configuration.
//!
//! Every key maps one-to-one onto a system parameter in SI units. Values come
//! from the built-in defaults, then an optional config file, then `--set`
//! overrides, each layer replacing the previous one.

use std::fmt;
use std::path::{Path, PathBuf};

use mnpcomm::analytic::{ChannelGeometry, ChannelSetup, SeriesControl};
use mnpcomm::link::LinkConfig;
use mnpcomm::physics::{FluidEnvironment, MagnetField, ParticleModel, SizeDistribution};
use mnpcomm::sim::SimConfig;
use thiserror::Error;

/// Every accepted configuration key, in echo order.
pub const KEYS: [&str; 22] = [
    "eta",
    "temperature",
    "coating_thickness",
    "mean_radius",
    "sd_radius",
    "saturation_magnetization",
    "field_gradient",
    "distance",
    "height",
    "receiver_width",
    "receiver_height",
    "flow_velocity",
    "symbol_duration",
    "sample_offset",
    "threshold",
    "n_tx",
    "sequence_length",
    "n_terms",
    "tail_tolerance",
    "dt",
    "n_realizations",
    "seed",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("malformed override `{0}`, expected key=value")]
    MalformedOverride(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] mnpcomm::error::Error),
}

impl ConfigError {
    /// Configuration key at fault, if known.
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::UnknownKey(k) => Some(k),
            Self::BadValue { key, .. } => Some(key),
            Self::Model(mnpcomm::error::Error::InvalidParameter { field, .. }) => Some(field),
            _ => None,
        }
    }
}

/// Experiment kinds, which differ in their simulation defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Magnetization,
    Impulse,
    Ser,
    Validate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Magnetization => "magnetization",
            Self::Impulse => "impulse",
            Self::Ser => "ser",
            Self::Validate => "validate",
        }
    }

    fn default_dt(self) -> f64 {
        match self {
            Self::Ser => 20e-3,
            Self::Validate => 5e-3,
            _ => 2e-3,
        }
    }

    fn default_realizations(self) -> usize {
        match self {
            Self::Ser => 100_000,
            _ => 10_000,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// All system, link and simulation parameters. `None` entries fall back to
/// values derived from the rest of the configuration or the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub eta: f64,
    pub temperature: f64,
    pub coating_thickness: f64,
    pub mean_radius: f64,
    pub sd_radius: f64,
    pub saturation_magnetization: f64,
    pub field_gradient: f64,
    pub distance: f64,
    pub height: f64,
    pub receiver_width: f64,
    pub receiver_height: f64,
    pub flow_velocity: f64,
    pub symbol_duration: f64,
    /// Defaults to distance / flow_velocity.
    pub sample_offset: Option<f64>,
    pub threshold: u32,
    pub n_tx: usize,
    pub sequence_length: usize,
    pub n_terms: usize,
    pub tail_tolerance: f64,
    /// Defaults to 2 ms, or 20 ms for SER runs.
    pub dt: Option<f64>,
    /// Defaults to 10⁴, or 10⁵ sequences for SER runs.
    pub n_realizations: Option<usize>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            temperature: 300.0,
            coating_thickness: 1e-9,
            mean_radius: 50e-9,
            sd_radius: 10e-9,
            saturation_magnetization: 5e5,
            field_gradient: 5.0,
            distance: 1e-3,
            height: 10e-6,
            receiver_width: 0.1e-3,
            receiver_height: 1e-6,
            flow_velocity: 0.5e-3,
            symbol_duration: 2.0,
            sample_offset: None,
            threshold: 1,
            n_tx: 1000,
            sequence_length: 10,
            n_terms: 500,
            tail_tolerance: 1e-9,
            dt: None,
            n_realizations: None,
            seed: 1,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_count<T: TryFrom<u64>>(key: &str, value: &str) -> Result<T, ConfigError> {
    // Accept integral floats such as 1e4 as counts.
    let v = value.trim();
    let n = match v.parse::<u64>() {
        Ok(n) => n,
        Err(_) => {
            let f: f64 = parse(key, v)?;
            if f.fract() != 0.0 || f < 0.0 || f > u64::MAX as f64 {
                return Err(ConfigError::BadValue {
                    key: key.to_string(),
                    value: value.to_string(),
                    reason: "expected a non-negative integer".into(),
                });
            }
            f as u64
        }
    };
    T::try_from(n).map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: "out of range".into(),
    })
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "eta" => self.eta = parse(key, value)?,
            "temperature" => self.temperature = parse(key, value)?,
            "coating_thickness" => self.coating_thickness = parse(key, value)?,
            "mean_radius" => self.mean_radius = parse(key, value)?,
            "sd_radius" => self.sd_radius = parse(key, value)?,
            "saturation_magnetization" => self.saturation_magnetization = parse(key, value)?,
            "field_gradient" => self.field_gradient = parse(key, value)?,
            "distance" => self.distance = parse(key, value)?,
            "height" => self.height = parse(key, value)?,
            "receiver_width" => self.receiver_width = parse(key, value)?,
            "receiver_height" => self.receiver_height = parse(key, value)?,
            "flow_velocity" => self.flow_velocity = parse(key, value)?,
            "symbol_duration" => self.symbol_duration = parse(key, value)?,
            "sample_offset" => self.sample_offset = Some(parse(key, value)?),
            "threshold" => self.threshold = parse_count(key, value)?,
            "n_tx" => self.n_tx = parse_count(key, value)?,
            "sequence_length" => self.sequence_length = parse_count(key, value)?,
            "n_terms" => self.n_terms = parse_count(key, value)?,
            "tail_tolerance" => self.tail_tolerance = parse(key, value)?,
            "dt" => self.dt = Some(parse(key, value)?),
            "n_realizations" => self.n_realizations = Some(parse_count(key, value)?),
            "seed" => self.seed = parse_count(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::MalformedOverride(assignment.to_string()))?;
        self.set(key.trim(), value)
    }

    /// Applies every entry of a flat TOML document.
    pub fn apply_str(&mut self, text: &str, origin: &Path) -> Result<(), ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })?;
        for (key, value) in &table {
            let text = match value {
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                other => {
                    return Err(ConfigError::BadValue {
                        key: key.clone(),
                        value: other.to_string(),
                        reason: "expected a number".into(),
                    })
                }
            };
            self.set(key, &text)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_str(&text, path)
    }

    /// Defaults, then `file`, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }

    /// Physical channel, validated.
    pub fn setup(&self) -> Result<ChannelSetup, ConfigError> {
        let setup = ChannelSetup {
            fluid: FluidEnvironment::new(self.eta, self.temperature)?,
            field: MagnetField::with_gradient(self.field_gradient)?,
            particle: ParticleModel::new(self.mean_radius, self.coating_thickness, self.saturation_magnetization)?,
            sizes: SizeDistribution::new(self.mean_radius, self.sd_radius)?,
            geometry: ChannelGeometry::new(self.height, self.distance, self.receiver_width, self.receiver_height)?,
            flow_speed: self.flow_velocity,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn series(&self) -> Result<SeriesControl, ConfigError> {
        Ok(SeriesControl::new(self.n_terms, self.tail_tolerance)?)
    }

    /// Link settings for `setup`; the sampling offset follows its flow unless
    /// fixed explicitly.
    pub fn link(&self, setup: &ChannelSetup, n_tx: usize) -> Result<LinkConfig, ConfigError> {
        let link = LinkConfig {
            symbol_duration: self.symbol_duration,
            sample_offset: self.sample_offset.unwrap_or_else(|| setup.arrival_time()),
            threshold: self.threshold,
            n_tx,
            sequence_length: self.sequence_length,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn sim(&self, experiment: Experiment) -> Result<SimConfig, ConfigError> {
        Ok(SimConfig::new(
            self.dt.unwrap_or(experiment.default_dt()),
            self.n_realizations.unwrap_or(experiment.default_realizations()),
            self.seed,
        )?)
    }

    /// Checks every parameter against the invariants of the type that owns it.
    pub fn validate(&self, experiment: Experiment) -> Result<(), ConfigError> {
        let setup = self.setup()?;
        self.series()?;
        self.sim(experiment)?;
        self.link(&setup, self.n_tx)?;
        Ok(())
    }

    /// Every key with its resolved value, in [`KEYS`] order.
    pub fn entries(&self, experiment: Experiment) -> Vec<(&'static str, String)> {
        let offset = self.sample_offset.unwrap_or(self.distance / self.flow_velocity);
        let values = [
            format!("{:e}", self.eta),
            format!("{:e}", self.temperature),
            format!("{:e}", self.coating_thickness),
            format!("{:e}", self.mean_radius),
            format!("{:e}", self.sd_radius),
            format!("{:e}", self.saturation_magnetization),
            format!("{:e}", self.field_gradient),
            format!("{:e}", self.distance),
            format!("{:e}", self.height),
            format!("{:e}", self.receiver_width),
            format!("{:e}", self.receiver_height),
            format!("{:e}", self.flow_velocity),
            format!("{:e}", self.symbol_duration),
            format!("{offset:e}"),
            self.threshold.to_string(),
            self.n_tx.to_string(),
            self.sequence_length.to_string(),
            self.n_terms.to_string(),
            format!("{:e}", self.tail_tolerance),
            format!("{:e}", self.dt.unwrap_or(experiment.default_dt())),
            self.n_realizations
                .unwrap_or(experiment.default_realizations())
                .to_string(),
            self.seed.to_string(),
        ];
        KEYS.into_iter().zip(values).collect()
    }
}
