//! Simulation configuration: strict JSON with defaults for every key.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::Topology;
use crate::error::{Error, Result};
use crate::fading::{FadingLabel, FadingTrace};
use crate::mac::{LinkAdaptation, McsTable};
use crate::quality::DamageRule;
use crate::strategy::StrategyConfig;
use crate::stream::StreamConfig;

/// Whether D2D interference is visible in the eNodeB's CQI measurement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CqiInterference {
    /// Measured on sounding symbols the D2D link leaves idle, so CQI tracks
    /// the interference-free channel.
    #[default]
    Excluded,
    /// Measured on the composite signal of every subframe, including D2D
    /// interference when the D2D transmitter is active.
    Composite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub earfcn: u32,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub ue_power_dbm: f64,
    /// Downlink power; unused by the uplink-only model.
    pub enb_power_dbm: f64,
    pub d2d_threshold_db: f64,
    pub fading: FadingLabel,
    pub fading_low: Option<PathBuf>,
    pub fading_high: Option<PathBuf>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            earfcn: 18100,
            bandwidth_hz: 10e6,
            noise_figure_db: 5.0,
            ue_power_dbm: 23.0,
            enb_power_dbm: 25.0,
            d2d_threshold_db: 5.0,
            fading: FadingLabel::LowSpeed,
            fading_low: None,
            fading_high: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacConfig {
    pub mcs_table: Option<PathBuf>,
    pub report_delay: u64,
    pub cqi_interference: CqiInterference,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            mcs_table: None,
            report_delay: 4,
            cqi_interference: CqiInterference::Excluded,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityConfig {
    pub damage_rule: DamageRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub stream: StreamConfig,
    pub topology: Topology,
    pub strategy: StrategyConfig,
    pub channel: ChannelConfig,
    pub mac: MacConfig,
    pub quality: QualityConfig,
    pub slot_len_s: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            stream: StreamConfig::default(),
            topology: Topology::default(),
            strategy: StrategyConfig::default(),
            channel: ChannelConfig::default(),
            mac: MacConfig::default(),
            quality: QualityConfig::default(),
            slot_len_s: 1e-3,
            seed: 1,
        }
    }
}

/// Files a configuration refers to, loaded and checked.
#[derive(Debug, Clone)]
pub struct Resources {
    pub fading: Arc<FadingTrace>,
    pub mcs_table: Arc<McsTable>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        self.topology.validate()?;
        self.strategy.validate()?;
        if !(self.slot_len_s > 0.0 && self.slot_len_s.is_finite()) {
            return Err(Error::config("slot_len_s must be positive"));
        }
        if self.channel.bandwidth_hz.is_nan() || self.channel.bandwidth_hz <= 0.0 {
            return Err(Error::config("channel.bandwidth_hz must be positive"));
        }
        if self.mac.report_delay > LinkAdaptation::MAX_REPORT_DELAY {
            return Err(Error::config(format!(
                "mac.report_delay must be within 0..={}",
                LinkAdaptation::MAX_REPORT_DELAY
            )));
        }
        crate::channel::earfcn_to_uplink_freq(self.channel.earfcn)?;
        Ok(())
    }

    pub fn resources(&self) -> Result<Resources> {
        let label = self.channel.fading;
        let file = match label {
            FadingLabel::LowSpeed => self.channel.fading_low.as_deref(),
            FadingLabel::HighSpeed => self.channel.fading_high.as_deref(),
            FadingLabel::Flat => None,
        };
        let fading = match file {
            Some(path) => FadingTrace::read_csv(open(path)?, label)?,
            None => FadingTrace::bundled(label).clone(),
        };
        let mcs_table = match &self.mac.mcs_table {
            Some(path) => McsTable::read_csv(open(path)?)?,
            None => McsTable::bundled().clone(),
        };
        Ok(Resources {
            fading: Arc::new(fading),
            mcs_table: Arc::new(mcs_table),
        })
    }

    pub fn subframes(&self) -> u64 {
        (self.stream.duration_s / self.slot_len_s - 1e-9).ceil() as u64
    }

    /// Hex SHA-256 of the canonical JSON of everything but the seed.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    /// Copy with the value at a dotted key path replaced, re-validated
    /// through strict deserialization.
    pub fn with_value(&self, key: &str, value: serde_json::Value) -> Result<Self> {
        let mut root = serde_json::to_value(self)?;
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| {
                Error::config(format!("config key {key:?}: {part:?} is not a section"))
            })?;
            let child = obj
                .get_mut(*part)
                .ok_or_else(|| Error::config(format!("unknown config key {key:?}")))?;
            if i + 1 == parts.len() {
                *child = value.clone();
                break;
            }
            node = child;
        }
        serde_json::from_value(root).map_err(|e| Error::config(format!("config key {key:?}: {e}")))
    }
}
