//! The end-to-end chain: RSC encoder, interleaver, precoded ISI channel with
//! impulsive noise, and the iterative receiver.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::DiscreteChannel;
use crate::error::{Error, Result};
use crate::exit::mi_blind;
use crate::noise::{derive_seed, MixtureNoiseParams};
use crate::poly::BinaryPolynomial;
use crate::siso::{bcjr_decode, decode_outer, ChannelMetric, LlrFrame};
use crate::trellis::{
    build_isi_trellis, build_precoded_isi_trellis_with, build_precoder, build_rsc_trellis, channel_output,
    encode_rsc, BitMapping, Precoder, Trellis, TrellisOptions,
};

/// Uniform random permutation from a seeded Fisher-Yates shuffle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
    seed: u64,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { perm, seed }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `out[i] = x[perm[i]]`.
    pub fn interleave<T: Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len(), "interleaver length mismatch");
        self.perm.iter().map(|&p| x[p]).collect()
    }

    pub fn deinterleave<T: Copy + Default>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.perm.len(), "interleaver length mismatch");
        let mut out = vec![T::default(); x.len()];
        for (&p, &v) in self.perm.iter().zip(x) {
            out[p] = v;
        }
        out
    }
}

/// Likelihood the equalizer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    /// Matched to the mixture.
    #[default]
    Mixture,
    /// Single Gaussian with the mixture's effective variance.
    Gaussian,
}

/// Rate-1/2 RSC code `[1, feedforward / feedback]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterCode {
    pub feedforward: BinaryPolynomial,
    pub feedback: BinaryPolynomial,
}

impl Default for OuterCode {
    fn default() -> Self {
        Self {
            feedforward: BinaryPolynomial::from_mask(0o17).expect("valid"),
            feedback: BinaryPolynomial::from_mask(0o13).expect("valid"),
        }
    }
}

pub const DEFAULT_INFO_LEN: usize = 4096;
pub const DEFAULT_MAX_ITERATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub info_len: usize,
    /// `None` transmits the info bits uncoded.
    pub outer: Option<OuterCode>,
    pub precoder: Option<BinaryPolynomial>,
    pub channel: DiscreteChannel,
    pub noise: MixtureNoiseParams,
    /// Skip the noise draw entirely.
    pub noiseless: bool,
    pub metric: MetricKind,
    pub max_iterations: usize,
    /// Stop once the hard decisions repeat across two iterations.
    pub early_exit: bool,
    pub interleaver_seed: u64,
    pub mapping: BitMapping,
    pub trellis: TrellisOptions,
}

impl SystemConfig {
    pub fn new(channel: DiscreteChannel, noise: MixtureNoiseParams) -> Self {
        Self {
            info_len: DEFAULT_INFO_LEN,
            outer: Some(OuterCode::default()),
            precoder: None,
            channel,
            noise,
            noiseless: false,
            metric: MetricKind::Mixture,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            early_exit: true,
            interleaver_seed: 0x1D_E5EE_D000,
            mapping: BitMapping::default(),
            trellis: TrellisOptions::default(),
        }
    }
}

/// Per-symbol SNR in dB converted to Eb/N0 in dB for a BPSK system of code
/// rate `rate`, with N0 = 2 sigma^2.
pub fn snr_to_ebn0_db(snr_db: f64, rate: f64) -> f64 {
    snr_db - 10.0 * (2.0 * rate).log10()
}

/// Intermediate sequences of one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub y: Vec<f64>,
    /// Outer codeword `[u0, p0, u1, p1, ...]` (the info bits when uncoded).
    pub coded: Vec<u8>,
    pub interleaved: Vec<u8>,
    /// Bits entering the channel after the precoder.
    pub channel_bits: Vec<u8>,
    /// Noise component index per symbol.
    pub noise_labels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Blind MI estimate of the equalizer extrinsics.
    pub inner_mi: f64,
    /// Blind MI estimate of the decoder extrinsics (coded bits).
    pub outer_mi: f64,
    /// Info-bit errors after this iteration, when the truth is known.
    pub bit_errors: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub decoded: Vec<u8>,
    pub trace: Vec<IterationRecord>,
}

impl Reception {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameResult {
    pub bits: u64,
    pub bit_errors: u64,
    pub frame_error: bool,
    pub iterations: usize,
}

/// A validated configuration with its trellises, metric and interleaver built.
#[derive(Debug, Clone)]
pub struct TurboSystem {
    cfg: SystemConfig,
    outer: Option<Trellis>,
    precoder: Option<Precoder>,
    inner: Trellis,
    interleaver: Interleaver,
    metric: ChannelMetric,
}

impl TurboSystem {
    pub fn new(cfg: SystemConfig) -> Result<Self> {
        if cfg.info_len == 0 {
            return Err(Error::Config("info length must be positive".into()));
        }
        if cfg.max_iterations == 0 {
            return Err(Error::Config("iteration count must be at least 1".into()));
        }
        let outer = cfg
            .outer
            .map(|c| build_rsc_trellis(&c.feedforward, &c.feedback))
            .transpose()?;
        let precoder = cfg.precoder.as_ref().map(build_precoder).transpose()?;
        let inner = match &precoder {
            Some(p) => build_precoded_isi_trellis_with(p, &cfg.channel, cfg.mapping, cfg.trellis)?,
            None => build_isi_trellis(&cfg.channel, cfg.mapping)?,
        };
        let coded_len = match &outer {
            Some(t) => 2 * (cfg.info_len + t.memory()),
            None => cfg.info_len,
        };
        let interleaver = Interleaver::new(if outer.is_some() { coded_len } else { 0 }, cfg.interleaver_seed);
        let metric = match cfg.metric {
            MetricKind::Mixture => ChannelMetric::Mixture(cfg.noise.clone()),
            MetricKind::Gaussian => ChannelMetric::mismatched_gaussian(&cfg.noise),
        };
        Ok(Self {
            cfg,
            outer,
            precoder,
            inner,
            interleaver,
            metric,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn inner_trellis(&self) -> &Trellis {
        &self.inner
    }

    pub fn outer_trellis(&self) -> Option<&Trellis> {
        self.outer.as_ref()
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn metric(&self) -> &ChannelMetric {
        &self.metric
    }

    /// Channel symbols per frame.
    pub fn frame_len(&self) -> usize {
        match &self.outer {
            Some(_) => self.interleaver.len(),
            None => self.cfg.info_len,
        }
    }

    pub fn rate(&self) -> f64 {
        self.cfg.info_len as f64 / self.frame_len() as f64
    }

    pub fn transmit(&self, u: &[u8], seed: u64) -> Result<Transmission> {
        if u.len() != self.cfg.info_len {
            return Err(Error::Contract(format!(
                "{} info bits for a frame of {}",
                u.len(),
                self.cfg.info_len
            )));
        }
        let (coded, interleaved) = match &self.outer {
            Some(t) => {
                let v = encode_rsc(t, u)?;
                let w = self.interleaver.interleave(&v);
                (v, w)
            }
            None => (u.to_vec(), u.to_vec()),
        };
        let channel_bits = match &self.precoder {
            Some(p) => p.precode(&interleaved),
            None => interleaved.clone(),
        };
        let mut y = channel_output(&self.inner, &interleaved);
        let noise_labels = if self.cfg.noiseless {
            vec![0; y.len()]
        } else {
            let (noise, labels) = self.cfg.noise.sample_labeled(seed, y.len());
            y.iter_mut().zip(&noise).for_each(|(a, n)| *a += n);
            labels
        };
        Ok(Transmission {
            y,
            coded,
            interleaved,
            channel_bits,
            noise_labels,
        })
    }

    /// Equalizer pass: extrinsic LLRs of the (interleaved) inner input bits.
    pub fn equalize(&self, y: &[f64], apriori: &LlrFrame) -> Result<LlrFrame> {
        Ok(bcjr_decode(&self.inner, y, &self.metric, apriori)?.0)
    }

    /// Decoder pass on equalizer extrinsics in channel order. Returns the
    /// decoder extrinsics re-interleaved for the equalizer and the info-bit
    /// a-posteriori LLRs.
    pub fn decode(&self, inner_extrinsic: &LlrFrame) -> Result<(LlrFrame, LlrFrame)> {
        let outer = self
            .outer
            .as_ref()
            .ok_or_else(|| Error::Contract("uncoded system has no outer decoder".into()))?;
        let d = self.interleaver.deinterleave(inner_extrinsic.values());
        let sys: Vec<f64> = d.iter().step_by(2).copied().collect();
        let par: Vec<f64> = d.iter().skip(1).step_by(2).copied().collect();
        let (ext, info) = decode_outer(outer, &LlrFrame::new(sys), &LlrFrame::new(par))?;
        Ok((LlrFrame::new(self.interleaver.interleave(ext.values())), info))
    }

    pub fn receive(&self, y: &[f64], truth: Option<&[u8]>) -> Result<Reception> {
        if y.len() != self.frame_len() {
            return Err(Error::Contract(format!(
                "{} observations for a frame of {}",
                y.len(),
                self.frame_len()
            )));
        }
        if let Some(t) = truth {
            if t.len() != self.cfg.info_len {
                return Err(Error::Contract("truth length differs from info length".into()));
            }
        }
        let errors = |d: &[u8]| truth.map(|t| t.iter().zip(d).filter(|(a, b)| a != b).count());
        if self.outer.is_none() {
            let (ext, app) = bcjr_decode(&self.inner, y, &self.metric, &LlrFrame::zeros(y.len()))?;
            let decoded = app.hard_decisions();
            let trace = vec![IterationRecord {
                iteration: 1,
                inner_mi: mi_blind(&ext),
                outer_mi: f64::NAN,
                bit_errors: errors(&decoded),
            }];
            return Ok(Reception { decoded, trace });
        }
        let mut apriori = LlrFrame::zeros(y.len());
        let mut decoded: Vec<u8> = Vec::new();
        let mut trace = Vec::new();
        for iteration in 1..=self.cfg.max_iterations {
            let e1 = self.equalize(y, &apriori)?;
            let (e2, info) = self.decode(&e1)?;
            let next = info.hard_decisions();
            trace.push(IterationRecord {
                iteration,
                inner_mi: mi_blind(&e1),
                outer_mi: mi_blind(&e2),
                bit_errors: errors(&next),
            });
            let stable = next == decoded;
            decoded = next;
            apriori = e2;
            if self.cfg.early_exit && stable {
                break;
            }
        }
        Ok(Reception { decoded, trace })
    }

    /// Random info bits, transmission and reception, all derived from `seed`.
    pub fn run_frame(&self, seed: u64) -> Result<FrameResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
        let u: Vec<u8> = (0..self.cfg.info_len).map(|_| rng.random_range(0..2u8)).collect();
        let tx = self.transmit(&u, derive_seed(seed, &[1]))?;
        let rx = self.receive(&tx.y, None)?;
        let bit_errors = u.iter().zip(&rx.decoded).filter(|(a, b)| a != b).count() as u64;
        Ok(FrameResult {
            bits: u.len() as u64,
            bit_errors,
            frame_error: bit_errors > 0,
            iterations: rx.iterations(),
        })
    }
}
