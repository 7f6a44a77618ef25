//! EXIT-chart analysis.
//!
//! LLRs follow the crate convention log P(1)/P(0). A consistent Gaussian
//! LLR of standard deviation sigma has mean +-sigma^2/2 with the sign of the
//! true bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{derive_seed, MixtureNoiseParams};
use crate::siso::{bcjr_decode, decode_outer, softplus, ChannelMetric, LlrFrame, LLR_CLAMP};
use crate::trellis::{channel_output, encode_rsc, Trellis};

pub const HISTOGRAM_BINS: usize = 200;
pub const MIN_SAMPLES: usize = 10_000;
pub const MIN_COMPONENT_SAMPLES: usize = 100;
pub const DEFAULT_GRID_STEP: f64 = 0.05;
pub const DEFAULT_SAMPLES: usize = 200_000;

const LN2: f64 = std::f64::consts::LN_2;

/// 1 - J(sigma): the expected log2(1 + e^-L) of a consistent Gaussian LLR.
pub fn j_complement(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 1.0;
    }
    let mu = 0.5 * sigma * sigma;
    let density = |x: f64| (-0.5 * ((x - mu) / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let f = |x: f64| density(x) * softplus(-x) / LN2;
    // panels of half a standard deviation over +-14 sigma
    let panels = 56;
    let width = 28.0 * sigma / panels as f64;
    let start = mu - 14.0 * sigma;
    (0..panels)
        .map(|i| {
            let a = start + i as f64 * width;
            quadrature::integrate(f, a, a + width, 1e-17).integral
        })
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Mutual information between a bit and its consistent Gaussian LLR.
pub fn j_function(sigma: f64) -> f64 {
    1.0 - j_complement(sigma)
}

/// Inverse of [`j_function`] by bisection.
pub fn j_inverse(mi: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&mi) {
        return Err(Error::Domain(format!("j_inverse needs 0 <= I < 1, got {mi}")));
    }
    j_inverse_complement(1.0 - mi)
}

/// Sigma with `j_complement(sigma) = c`; keeps precision when I is near 1.
pub fn j_inverse_complement(c: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Domain(format!("j complement must lie in (0, 1], got {c}")));
    }
    if c == 1.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while j_complement(hi) > c {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Domain(format!("j complement {c} below numerical range")));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-14 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if j_complement(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Consistent Gaussian a-priori LLRs of mutual information `mi` for `bits`.
/// `mi = 1` yields saturated LLRs of the correct sign.
pub fn generate_apriori(mi: f64, bits: &[u8], seed: u64) -> Result<LlrFrame> {
    let sign = |b: u8| if b & 1 == 1 { 1.0 } else { -1.0 };
    if mi == 1.0 {
        return Ok(LlrFrame::new(bits.iter().map(|&b| sign(b) * LLR_CLAMP).collect()));
    }
    let sigma = j_inverse(mi)?;
    let mu = 0.5 * sigma * sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(LlrFrame::new(
        bits.iter()
            .map(|&b| {
                let g: f64 = rng.sample(StandardNormal);
                sign(b) * mu + sigma * g
            })
            .collect(),
    ))
}

// Folded histogram counts of z = (2b - 1) L. Exact zeros go half to each
// central bin so an uninformative frame stays symmetric.
fn folded_histogram(llrs: &[f64], truth: &[u8]) -> Vec<f64> {
    let mut counts = vec![0.0; HISTOGRAM_BINS];
    let width = 2.0 * LLR_CLAMP / HISTOGRAM_BINS as f64;
    let mid = HISTOGRAM_BINS / 2;
    for (&l, &b) in llrs.iter().zip(truth) {
        let z = if b & 1 == 1 { l } else { -l };
        if z == 0.0 {
            counts[mid - 1] += 0.5;
            counts[mid] += 0.5;
            continue;
        }
        let i = ((z + LLR_CLAMP) / width).floor();
        counts[(i.max(0.0) as usize).min(HISTOGRAM_BINS - 1)] += 1.0;
    }
    counts
}

fn histogram_mi(counts: &[f64]) -> f64 {
    let smoothed: Vec<f64> = counts.iter().map(|c| c + 1.0).collect();
    let total: f64 = smoothed.iter().sum();
    let n = smoothed.len();
    let mi: f64 = (0..n)
        .map(|i| {
            let p = smoothed[i] / total;
            let q = smoothed[n - 1 - i] / total;
            p * (2.0 * p / (p + q)).log2()
        })
        .sum();
    mi.clamp(0.0, 1.0)
}

fn check_lengths(llrs: &LlrFrame, truth: &[u8]) -> Result<()> {
    if llrs.len() != truth.len() {
        return Err(Error::Contract(format!("{} LLRs for {} bits", llrs.len(), truth.len())));
    }
    if llrs.len() < MIN_SAMPLES {
        log::warn!("MI estimate from only {} samples", llrs.len());
    }
    Ok(())
}

/// Histogram estimate of I(bit; LLR) using the symmetry p(L|0) = p(-L|1).
pub fn mi_histogram(llrs: &LlrFrame, truth: &[u8]) -> Result<f64> {
    check_lengths(llrs, truth)?;
    Ok(histogram_mi(&folded_histogram(llrs.values(), truth)))
}

/// MI estimate that needs no truth, valid for consistent LLRs.
pub fn mi_blind(llrs: &LlrFrame) -> f64 {
    if llrs.is_empty() {
        return 0.0;
    }
    let h = llrs
        .values()
        .iter()
        .map(|&l| {
            let a = l.abs();
            // binary entropy of 1 / (1 + e^|L|)
            (softplus(-a) + a / (1.0 + a.exp())) / LN2
        })
        .sum::<f64>();
    (1.0 - h / llrs.len() as f64).clamp(0.0, 1.0)
}

/// Per-component statistics of the folded LLRs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentMi {
    /// Fraction of samples struck by this component.
    pub weight: f64,
    pub samples: usize,
    pub mi: f64,
    pub mean: f64,
    pub variance: f64,
    /// Too few samples: `mi` is the pooled estimate.
    pub pooled_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureMi {
    pub total: f64,
    pub components: Vec<ComponentMi>,
}

/// Weighted sum of per-noise-component MI estimates.
pub fn mi_mixture(llrs: &LlrFrame, truth: &[u8], labels: &[u8], num_components: usize) -> Result<MixtureMi> {
    check_lengths(llrs, truth)?;
    if labels.len() != truth.len() {
        return Err(Error::Contract(format!("{} labels for {} bits", labels.len(), truth.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c as usize >= num_components) {
        return Err(Error::Contract(format!("label {bad} outside {num_components} components")));
    }
    let n = truth.len();
    let mut pooled = None;
    let mut components = Vec::with_capacity(num_components);
    let mut total = 0.0;
    for c in 0..num_components {
        let (l, b): (Vec<f64>, Vec<u8>) = llrs
            .values()
            .iter()
            .zip(truth)
            .zip(labels)
            .filter(|(_, &lab)| lab as usize == c)
            .map(|((&l, &b), _)| (l, b))
            .unzip();
        let samples = l.len();
        let weight = samples as f64 / n.max(1) as f64;
        let z: Vec<f64> = l.iter().zip(&b).map(|(&l, &b)| if b & 1 == 1 { l } else { -l }).collect();
        let mean = z.iter().sum::<f64>() / samples.max(1) as f64;
        let variance = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / samples.max(1) as f64;
        let pooled_fallback = samples < MIN_COMPONENT_SAMPLES;
        let mi = if pooled_fallback {
            if samples > 0 {
                log::warn!("noise component {c} has {samples} samples; using the pooled estimate");
            }
            *pooled.get_or_insert_with(|| histogram_mi(&folded_histogram(llrs.values(), truth)))
        } else {
            histogram_mi(&folded_histogram(&l, &b))
        };
        total += weight * mi;
        components.push(ComponentMi {
            weight,
            samples,
            mi,
            mean,
            variance,
            pooled_fallback,
        });
    }
    Ok(MixtureMi {
        total: total.clamp(0.0, 1.0),
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitCurve {
    pub label: String,
    pub snr_db: Option<f64>,
    /// `(I_A, I_E)` pairs with strictly increasing I_A.
    pub points: Vec<(f64, f64)>,
}

impl ExitCurve {
    pub fn new(label: impl Into<String>, snr_db: Option<f64>, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Contract("EXIT grid must be strictly increasing".into()));
        }
        if points.iter().any(|&(a, e)| !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&e)) {
            return Err(Error::Contract("EXIT values must lie in [0, 1]".into()));
        }
        Ok(Self {
            label: label.into(),
            snr_db,
            points,
        })
    }

    /// I_A needed for this (outer) curve to output `ie`, by linear
    /// interpolation, clamped to the grid ends.
    pub fn inverse(&self, ie: f64) -> f64 {
        let pts = &self.points;
        match pts.iter().position(|&(_, e)| e >= ie) {
            None => pts.last().map_or(1.0, |p| p.0),
            Some(0) => pts[0].0,
            Some(i) => {
                let (a0, e0) = pts[i - 1];
                let (a1, e1) = pts[i];
                if e1 <= e0 {
                    a1
                } else {
                    a0 + (ie - e0) * (a1 - a0) / (e1 - e0)
                }
            }
        }
    }
}

/// Uniform grid `0, step, ...` strictly below 1.
pub fn exit_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).ceil() as usize;
    (0..n).map(|i| i as f64 * step).filter(|&x| x < 1.0 - 1e-12).collect()
}

/// Noise and likelihood setup for the inner stage.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSetup<'a> {
    pub trellis: &'a Trellis,
    pub noise: &'a MixtureNoiseParams,
    pub metric: &'a ChannelMetric,
    pub noiseless: bool,
}

/// Inner EXIT value at one a-priori MI.
pub fn inner_exit_point(setup: &InnerSetup<'_>, ia: f64, samples: usize, seed: u64) -> Result<f64> {
    if samples < MIN_SAMPLES {
        log::warn!("inner EXIT point with only {samples} samples");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let bits: Vec<u8> = (0..samples).map(|_| rng.random_range(0..2u8)).collect();
    let mut y = channel_output(setup.trellis, &bits);
    let labels = if setup.noiseless {
        vec![0; y.len()]
    } else {
        let (noise, labels) = setup.noise.sample_labeled(derive_seed(seed, &[1]), y.len());
        y.iter_mut().zip(&noise).for_each(|(a, n)| *a += n);
        labels
    };
    let la = generate_apriori(ia, &bits, derive_seed(seed, &[2]))?;
    let (ext, _) = bcjr_decode(setup.trellis, &y, setup.metric, &la)?;
    Ok(mi_mixture(&ext, &bits, &labels, setup.noise.len())?.total)
}

/// Outer EXIT value at one a-priori MI, over all code bits.
pub fn outer_exit_point(code: &Trellis, ia: f64, samples: usize, seed: u64) -> Result<f64> {
    if samples < MIN_SAMPLES {
        log::warn!("outer EXIT point with only {samples} samples");
    }
    let m = code.memory();
    let info_len = (samples / 2).saturating_sub(m).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let u: Vec<u8> = (0..info_len).map(|_| rng.random_range(0..2u8)).collect();
    let v = encode_rsc(code, &u)?;
    let la = generate_apriori(ia, &v, derive_seed(seed, &[2]))?;
    let sys: Vec<f64> = la.values().iter().step_by(2).copied().collect();
    let par: Vec<f64> = la.values().iter().skip(1).step_by(2).copied().collect();
    let (ext, _) = decode_outer(code, &sys.into(), &par.into())?;
    mi_histogram(&ext, &v)
}

/// Inner curve over `grid`; grid points run in parallel with per-point
/// seeds, so the result does not depend on the thread count.
pub fn inner_exit_curve(
    setup: &InnerSetup<'_>,
    label: &str,
    snr_db: Option<f64>,
    grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ExitCurve> {
    let ie: Vec<f64> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &ia)| inner_exit_point(setup, ia, samples, derive_seed(seed, &[i as u64])))
        .collect::<Result<_>>()?;
    ExitCurve::new(label, snr_db, grid.iter().copied().zip(ie).collect())
}

pub fn outer_exit_curve(code: &Trellis, label: &str, grid: &[f64], samples: usize, seed: u64) -> Result<ExitCurve> {
    let ie: Vec<f64> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &ia)| outer_exit_point(code, ia, samples, derive_seed(seed, &[i as u64])))
        .collect::<Result<_>>()?;
    ExitCurve::new(label, None, grid.iter().copied().zip(ie).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunnelVerdict {
    pub open: bool,
    /// First inner grid point where the curves touch or cross.
    pub pinch: Option<f64>,
}

/// Open iff the inner curve lies strictly above the inverted outer curve at
/// every inner grid point.
pub fn tunnel_check(inner: &ExitCurve, outer: &ExitCurve) -> TunnelVerdict {
    let pinch = inner
        .points
        .iter()
        .find(|&&(ia, ie)| ie <= outer.inverse(ia))
        .map(|p| p.0);
    TunnelVerdict {
        open: pinch.is_none(),
        pinch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::SnrConvention;

    // independent oracle: composite Simpson on a wide fine grid
    fn j_oracle(sigma: f64) -> f64 {
        let mu = sigma * sigma / 2.0;
        let (a, b) = (mu - 20.0 * sigma, mu + 20.0 * sigma);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let f = |x: f64| {
            let pdf = (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            let l = if x > 0.0 { (-x).exp().ln_1p() } else { -x + x.exp().ln_1p() };
            pdf * l / std::f64::consts::LN_2
        };
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        1.0 - s * h / 3.0
    }

    #[test]
    fn j_matches_independent_integration() {
        for sigma in [0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0] {
            assert!((j_function(sigma) - j_oracle(sigma)).abs() < 1e-9, "{sigma}");
        }
        // frozen from the oracle
        assert!((j_function(2.0) - 0.485_944_154_133).abs() < 1e-9, "{}", j_function(2.0));
    }

    #[test]
    fn j_limits_and_monotonicity() {
        assert_eq!(j_function(0.0), 0.0);
        assert!(j_function(100.0) > 1.0 - 1e-6);
        let mut prev = 0.0;
        for i in 1..=400 {
            let s = i as f64 * 0.1;
            let c = j_complement(s);
            assert!(c < prev || i == 1 || c == 0.0, "{s}");
            prev = c;
        }
        for i in 1..=150 {
            let s = i as f64 * 0.1;
            assert!(j_function(s) > j_function(s - 0.1), "{s}");
        }
    }

    #[test]
    fn j_inverse_round_trip_where_representable() {
        for i in 0..=130 {
            let s = i as f64 * 0.1;
            let back = j_inverse(j_function(s)).unwrap();
            assert!((back - s).abs() < 1e-6, "{s} -> {back}");
        }
        for i in 0..=200 {
            let s = i as f64 * 0.1;
            let back = j_inverse_complement(j_complement(s)).unwrap();
            assert!((back - s).abs() < 1e-6, "{s} -> {back}");
        }
        assert!(matches!(j_inverse(1.0), Err(Error::Domain(_))));
        assert!(matches!(j_inverse(-0.1), Err(Error::Domain(_))));
    }

    fn random_bits(seed: u64, n: usize) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn generated_apriori_has_the_requested_mi() {
        let bits = random_bits(1, 100_000);
        for (i, ia) in exit_grid(0.05).into_iter().enumerate() {
            let l = generate_apriori(ia, &bits, i as u64).unwrap();
            let mi = mi_histogram(&l, &bits).unwrap();
            assert!((mi - ia).abs() < 0.01, "{ia} -> {mi}");
        }
        let zero = generate_apriori(0.0, &bits, 3).unwrap();
        assert!(mi_histogram(&zero, &bits).unwrap() < 0.01);
        let l = generate_apriori(0.3, &bits, 4).unwrap();
        let ones: Vec<f64> = l.values().iter().zip(&bits).filter(|(_, &b)| b == 1).map(|(&v, _)| v).collect();
        assert!(ones.iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn histogram_edge_cases() {
        let bits = random_bits(2, 1_000_000);
        assert_eq!(mi_histogram(&LlrFrame::zeros(bits.len()), &bits).unwrap(), 0.0);
        let perfect = generate_apriori(1.0, &bits, 0).unwrap();
        assert!(mi_histogram(&perfect, &bits).unwrap() >= 0.999);
        let g = generate_apriori(j_function(2.0), &bits, 5).unwrap();
        assert!((mi_histogram(&g, &bits).unwrap() - j_function(2.0)).abs() < 0.01);
        assert!(mi_histogram(&LlrFrame::zeros(3), &bits).is_err());
    }

    #[test]
    fn blind_estimate_tracks_consistent_llrs() {
        let bits = random_bits(3, 200_000);
        for ia in [0.2, 0.5, 0.8] {
            let l = generate_apriori(ia, &bits, 1).unwrap();
            assert!((mi_blind(&l) - ia).abs() < 0.01, "{ia}");
        }
    }

    #[test]
    fn mixture_collapses_to_pooled_for_one_component() {
        let bits = random_bits(4, 100_000);
        let l = generate_apriori(0.4, &bits, 9).unwrap();
        let pooled = mi_histogram(&l, &bits).unwrap();
        let one = mi_mixture(&l, &bits, &vec![0; bits.len()], 1).unwrap();
        assert!((one.total - pooled).abs() < 1e-12);
        // an empty impulse component contributes nothing
        let two = mi_mixture(&l, &bits, &vec![0; bits.len()], 2).unwrap();
        assert!((two.total - pooled).abs() < 1e-12);
        assert!(two.components[1].pooled_fallback);
    }

    #[test]
    fn identical_component_populations_equal_pooled() {
        let bits = random_bits(5, 200_000);
        let l = generate_apriori(0.6, &bits, 2).unwrap();
        let labels: Vec<u8> = (0..bits.len()).map(|i| (i % 2) as u8).collect();
        let m = mi_mixture(&l, &bits, &labels, 2).unwrap();
        assert!((m.total - mi_histogram(&l, &bits).unwrap()).abs() < 0.005);
    }

    fn reference_inner(snr_db: f64, precoder: Option<&str>) -> (Trellis, MixtureNoiseParams) {
        use crate::channel::{DiscreteChannel, REFERENCE_TAPS};
        use crate::trellis::{build_isi_trellis, build_precoded_isi_trellis, build_precoder, BitMapping};
        let ch = DiscreteChannel::normalized(REFERENCE_TAPS.to_vec()).unwrap();
        let t = match precoder {
            Some(p) => build_precoded_isi_trellis(&build_precoder(&p.parse().unwrap()).unwrap(), &ch, BitMapping::default()),
            None => build_isi_trellis(&ch, BitMapping::default()),
        }
        .unwrap();
        let noise = crate::noise::snr_to_params(snr_db, 1.0, 0.1, 100.0, SnrConvention::Total).unwrap();
        (t, noise)
    }

    #[test]
    fn mixture_estimate_is_close_to_pooled_at_the_operating_point() {
        let (t, noise) = reference_inner(-5.0, Some("1+D^3"));
        let metric = ChannelMetric::Mixture(noise.clone());
        let bits = random_bits(6, 100_000);
        let mut y = channel_output(&t, &bits);
        let (n, labels) = noise.sample_labeled(7, y.len());
        y.iter_mut().zip(&n).for_each(|(a, b)| *a += b);
        let la = generate_apriori(0.3, &bits, 8).unwrap();
        let (ext, _) = bcjr_decode(&t, &y, &metric, &la).unwrap();
        let mixed = mi_mixture(&ext, &bits, &labels, 2).unwrap();
        let pooled = mi_histogram(&ext, &bits).unwrap();
        assert!((mixed.total - pooled).abs() < 0.02, "{} vs {pooled}", mixed.total);
    }

    #[test]
    fn noiseless_inner_curve_is_near_one() {
        let (t, noise) = reference_inner(0.0, Some("1+D^3"));
        let metric = ChannelMetric::Gaussian { variance: 1e-4 };
        let setup = InnerSetup {
            trellis: &t,
            noise: &noise,
            metric: &metric,
            noiseless: true,
        };
        let c = inner_exit_curve(&setup, "noiseless", None, &[0.0, 0.5, 0.9], 200_000, 1).unwrap();
        assert!(c.points.iter().all(|p| p.1 >= 0.99), "{:?}", c.points);
    }

    #[test]
    fn outer_curve_reaches_one_with_perfect_priors() {
        let code = crate::trellis::build_rsc_trellis(&"0o17".parse().unwrap(), &"0o13".parse().unwrap()).unwrap();
        assert!(outer_exit_point(&code, 1.0, 200_000, 3).unwrap() >= 0.99);
        let c = outer_exit_curve(&code, "outer", &[0.0, 0.5, 0.9], 20_000, 4).unwrap();
        assert!(c.points[0].1 < c.points[1].1 && c.points[1].1 < c.points[2].1);
    }

    #[test]
    fn tunnel_check_trivial_cases() {
        let grid = exit_grid(0.05);
        let ones = ExitCurve::new("in", None, grid.iter().map(|&x| (x, 1.0)).collect()).unwrap();
        let line = ExitCurve::new("out", None, grid.iter().map(|&x| (x, x)).collect()).unwrap();
        assert!(tunnel_check(&ones, &line).open);
        let v = tunnel_check(&line, &line);
        assert!(!v.open);
        assert_eq!(v.pinch, Some(0.0));
        assert!(ExitCurve::new("bad", None, vec![(0.5, 0.1), (0.4, 0.2)]).is_err());
    }
}
