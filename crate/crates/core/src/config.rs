//! Experiment configuration files and the shipped presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSetup, DiscreteChannel, REFERENCE_TAPS};
use crate::error::{Error, Result};
use crate::exit::{DEFAULT_GRID_STEP, DEFAULT_SAMPLES};
use crate::noise::{snr_to_params, MixtureNoiseParams, SnrConvention};
use crate::poly::BinaryPolynomial;
use crate::trellis::{BitMapping, TrellisOptions};
use crate::turbo::{MetricKind, OuterCode, SystemConfig, DEFAULT_INFO_LEN, DEFAULT_MAX_ITERATIONS};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig3_channel", include_str!("../presets/fig3_channel.toml")),
    ("fig5_exit", include_str!("../presets/fig5_exit.toml")),
    ("fig6_ber_d", include_str!("../presets/fig6_ber_d.toml")),
    ("fig6_ber_d2", include_str!("../presets/fig6_ber_d2.toml")),
    ("fig6_ber_d3", include_str!("../presets/fig6_ber_d3.toml")),
    ("fig6_ber_dd2", include_str!("../presets/fig6_ber_dd2.toml")),
    ("fig6_ber_gaussian_metric", include_str!("../presets/fig6_ber_gaussian_metric.toml")),
    ("fig6_ber_no_precoder", include_str!("../presets/fig6_ber_no_precoder.toml")),
    ("noiseless", include_str!("../presets/noiseless.toml")),
    ("uncoded_awgn", include_str!("../presets/uncoded_awgn.toml")),
];

/// Named channels: `reference` (the printed 4-tap model),
/// `zimmermann-vvf-4path` (discretized from the physical model) and
/// `identity`.
pub const CHANNEL_PRESETS: &[&str] = &["reference", "zimmermann-vvf-4path", "identity"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Master seed.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub channel: ChannelConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub code: CodeConfig,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub exit: ExitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub epsilon: f64,
    pub k: f64,
    #[serde(default)]
    pub snr_convention: SnrConvention,
    #[serde(default)]
    pub noiseless: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    #[serde(default)]
    pub uncoded: bool,
    #[serde(default = "default_feedforward")]
    pub feedforward: BinaryPolynomial,
    #[serde(default = "default_feedback")]
    pub feedback: BinaryPolynomial,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precoder: Option<BinaryPolynomial>,
    #[serde(default)]
    pub metric: MetricKind,
    #[serde(default)]
    pub mapping: BitMapping,
    #[serde(default)]
    pub allow_precoder_memory_excess: bool,
}

impl Default for CodeConfig {
    fn default() -> Self {
        Self {
            uncoded: false,
            feedforward: default_feedforward(),
            feedback: default_feedback(),
            precoder: None,
            metric: MetricKind::default(),
            mapping: BitMapping::default(),
            allow_precoder_memory_excess: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    #[serde(default = "default_info_len")]
    pub info_len: usize,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "yes")]
    pub early_exit: bool,
    #[serde(default = "default_interleaver_seed")]
    pub interleaver_seed: u64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            info_len: DEFAULT_INFO_LEN,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            early_exit: true,
            interleaver_seed: default_interleaver_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_bits")]
    pub max_bits: u64,
    /// Fraction of numerically degenerate frames tolerated per point.
    #[serde(default = "default_degenerate_fraction")]
    pub max_degenerate_fraction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_db: Vec::new(),
            min_errors: default_min_errors(),
            max_bits: default_max_bits(),
            max_degenerate_fraction: default_degenerate_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitConfig {
    #[serde(default = "default_exit_snr")]
    pub snr_db: f64,
    /// Precoder feedback polynomials; `"none"` is the bare channel.
    #[serde(default)]
    pub precoders: Vec<String>,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for ExitConfig {
    fn default() -> Self {
        Self {
            snr_db: default_exit_snr(),
            precoders: Vec::new(),
            grid_step: default_grid_step(),
            samples: default_samples(),
        }
    }
}

fn yes() -> bool {
    true
}
fn default_seed() -> u64 {
    1
}
fn default_feedforward() -> BinaryPolynomial {
    OuterCode::default().feedforward
}
fn default_feedback() -> BinaryPolynomial {
    OuterCode::default().feedback
}
fn default_info_len() -> usize {
    DEFAULT_INFO_LEN
}
fn default_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}
fn default_interleaver_seed() -> u64 {
    20_240_601
}
fn default_min_errors() -> u64 {
    200
}
fn default_max_bits() -> u64 {
    100_000_000
}
fn default_degenerate_fraction() -> f64 {
    0.01
}
fn default_exit_snr() -> f64 {
    -5.0
}
fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
        Self::from_toml(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.channel.preset, &self.channel.taps) {
            (Some(_), Some(_)) => return Err(Error::Config("channel takes either a preset or taps".into())),
            (None, None) => return Err(Error::Config("channel needs a preset or taps".into())),
            (Some(p), None) if !CHANNEL_PRESETS.contains(&p.as_str()) => {
                return Err(Error::Config(format!("unknown channel preset {p:?}")))
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.noise.epsilon) || !(self.noise.k > 0.0) {
            return Err(Error::Config("noise needs 0 <= epsilon <= 1 and k > 0".into()));
        }
        if self.frame.info_len == 0 || self.frame.max_iterations == 0 {
            return Err(Error::Config("frame length and iteration count must be positive".into()));
        }
        if self.sweep.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR values must be finite".into()));
        }
        if !(self.exit.grid_step > 0.0 && self.exit.grid_step < 1.0) {
            return Err(Error::Config("EXIT grid step must lie in (0, 1)".into()));
        }
        self.exit_precoders()?;
        Ok(())
    }

    pub fn channel(&self) -> Result<DiscreteChannel> {
        let taps = match (&self.channel.preset, &self.channel.taps) {
            (_, Some(t)) => t.clone(),
            (Some(p), None) => return channel_preset(p),
            (None, None) => return Err(Error::Config("channel needs a preset or taps".into())),
        };
        if self.channel.normalize {
            DiscreteChannel::normalized(taps)
        } else {
            DiscreteChannel::new(taps)
        }
    }

    pub fn noise(&self, snr_db: f64) -> Result<MixtureNoiseParams> {
        snr_to_params(snr_db, 1.0, self.noise.epsilon, self.noise.k, self.noise.snr_convention)
    }

    pub fn system(&self, snr_db: f64) -> Result<SystemConfig> {
        let mut cfg = SystemConfig::new(self.channel()?, self.noise(snr_db)?);
        cfg.info_len = self.frame.info_len;
        cfg.outer = (!self.code.uncoded).then_some(OuterCode {
            feedforward: self.code.feedforward,
            feedback: self.code.feedback,
        });
        cfg.precoder = self.code.precoder;
        cfg.noiseless = self.noise.noiseless;
        cfg.metric = self.code.metric;
        cfg.max_iterations = self.frame.max_iterations;
        cfg.early_exit = self.frame.early_exit;
        cfg.interleaver_seed = self.frame.interleaver_seed;
        cfg.mapping = self.code.mapping;
        cfg.trellis = TrellisOptions {
            allow_precoder_memory_excess: self.code.allow_precoder_memory_excess,
            ..TrellisOptions::default()
        };
        Ok(cfg)
    }

    /// EXIT precoder list; `None` entries stand for no precoder.
    pub fn exit_precoders(&self) -> Result<Vec<Option<BinaryPolynomial>>> {
        self.exit
            .precoders
            .iter()
            .map(|p| match p.trim() {
                "none" => Ok(None),
                s => s.parse().map(Some),
            })
            .collect()
    }
}

/// Taps of a named channel.
pub fn channel_preset(name: &str) -> Result<DiscreteChannel> {
    match name {
        "reference" => DiscreteChannel::normalized(REFERENCE_TAPS.to_vec()),
        "zimmermann-vvf-4path" => ChannelSetup::zimmermann_vvf_4path().discrete_channel(),
        "identity" => Ok(DiscreteChannel::identity()),
        other => Err(Error::Config(format!("unknown channel preset {other:?}"))),
    }
}

/// Parses `a:b:step` (inclusive) or a single value.
pub fn parse_snr_range(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse SNR range {text:?}; expected a:b:step"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [a] if a.is_finite() => Ok(vec![*a]),
        [a, b, step] if a.is_finite() && b.is_finite() && *step > 0.0 => {
            let n = ((b - a) / step + 1e-9).floor();
            if n < 0.0 {
                return Err(bad());
            }
            // integer multiples keep the grid free of accumulated rounding
            Ok((0..=n as usize).map(|i| a + i as f64 * step).map(|v| (v * 1e9).round() / 1e9).collect())
        }
        _ => Err(bad()),
    }
}
