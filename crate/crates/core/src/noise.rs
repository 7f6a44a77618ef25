//! Impulsive noise as a weighted mixture of zero-mean Gaussians.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One mixture component: selection probability and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub variance: f64,
}

/// Gaussian-mixture noise with D >= 1 components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureNoiseParams {
    components: Vec<Component>,
}

impl MixtureNoiseParams {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("noise mixture needs at least one component".into()));
        }
        for c in &components {
            if !(0.0..=1.0).contains(&c.weight) {
                return Err(Error::Config(format!("component weight {} outside [0, 1]", c.weight)));
            }
            if !(c.variance > 0.0) || !c.variance.is_finite() {
                return Err(Error::Config(format!("component variance {} must be positive", c.variance)));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("component weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    /// Background variance `sigma2` with probability 1 - epsilon, impulses of
    /// variance `k * sigma2` with probability epsilon.
    pub fn impulsive(epsilon: f64, sigma2: f64, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Config(format!("impulse variance ratio must be positive, got {k}")));
        }
        Self::new(vec![
            Component {
                weight: 1.0 - epsilon,
                variance: sigma2,
            },
            Component {
                weight: epsilon,
                variance: k * sigma2,
            },
        ])
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::new(vec![Component { weight: 1.0, variance }])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn max_variance(&self) -> f64 {
        self.components.iter().map(|c| c.variance).fold(0.0, f64::max)
    }

    /// Mixture-weighted variance.
    pub fn effective_variance(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.variance).sum()
    }

    /// Scales every variance by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.components
                .iter()
                .map(|c| Component {
                    weight: c.weight,
                    variance: c.variance * factor,
                })
                .collect(),
        )
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * (-z * z / (2.0 * c.variance)).exp() / (2.0 * PI * c.variance).sqrt())
            .sum()
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        let terms = self.components.iter().filter(|c| c.weight > 0.0).map(|c| {
            c.weight.ln() - 0.5 * (2.0 * PI * c.variance).ln() - z * z / (2.0 * c.variance)
        });
        log_sum_exp(terms)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * 0.5 * statrs::function::erf::erfc(-z / (2.0 * c.variance).sqrt()))
            .sum()
    }

    /// `n` i.i.d. draws; deterministic in `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        self.sample_labeled(seed, n).0
    }

    /// Draws plus the index of the component that produced each draw.
    pub fn sample_labeled(&self, seed: u64, n: usize) -> (Vec<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std: Vec<f64> = self.components.iter().map(|c| c.variance.sqrt()).collect();
        let mut values = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.components.len() - 1;
            for (i, c) in self.components.iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            let g: f64 = rng.sample(StandardNormal);
            values.push(g * std[pick]);
            labels.push(pick as u8);
        }
        (values, labels)
    }
}

/// Which noise variance the SNR is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrConvention {
    /// Mixture-weighted total variance.
    #[default]
    Total,
    /// Background component only.
    Background,
}

/// Impulsive mixture whose variance matches `snr_db` for a given signal power.
pub fn snr_to_params(
    snr_db: f64,
    signal_power: f64,
    epsilon: f64,
    k: f64,
    convention: SnrConvention,
) -> Result<MixtureNoiseParams> {
    if !(signal_power > 0.0) {
        return Err(Error::Config(format!("signal power must be positive, got {signal_power}")));
    }
    let ratio = 10f64.powf(snr_db / 10.0);
    let spread = match convention {
        SnrConvention::Total => 1.0 - epsilon + epsilon * k,
        SnrConvention::Background => 1.0,
    };
    MixtureNoiseParams::impulsive(epsilon, signal_power / (ratio * spread), k)
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Seed for sub-stream `index` of `master`.
///
/// Fixed rule: a SplitMix64 step on `master`, XOR with the SplitMix64 image
/// of each index in turn. Used for per-SNR, per-frame and per-grid-point
/// streams so results never depend on worker count.
pub fn derive_seed(master: u64, index: &[u64]) -> u64 {
    index.iter().fold(splitmix64(master), |acc, &i| splitmix64(acc ^ splitmix64(i.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
