//! Soft-input soft-output MAP decoding on a [`Trellis`].
//!
//! Everything runs in the log domain with exact log-sum-exp. Forward and
//! backward metrics are shifted by their per-step maximum, which leaves the
//! LLRs unchanged.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::MixtureNoiseParams;
use crate::trellis::Trellis;

/// Saturation bound for every LLR leaving a decoder.
pub const LLR_CLAMP: f64 = 50.0;

#[inline]
pub fn clamp_llr(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-LLR_CLAMP, LLR_CLAMP)
    }
}

/// Per-bit LLRs, log P(b = 1) / P(b = 0).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LlrFrame(Vec<f64>);

impl LlrFrame {
    /// Wraps `values`, clamping them to the saturation bound.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.iter_mut().for_each(|v| *v = clamp_llr(*v));
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// 1 where the LLR is positive.
    pub fn hard_decisions(&self) -> Vec<u8> {
        self.0.iter().map(|&l| (l > 0.0) as u8).collect()
    }
}

impl From<Vec<f64>> for LlrFrame {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

/// Likelihood model the equalizer assumes for y = x + noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChannelMetric {
    Gaussian { variance: f64 },
    Mixture(MixtureNoiseParams),
}

impl ChannelMetric {
    /// Gaussian metric with the mixture's effective variance.
    pub fn mismatched_gaussian(noise: &MixtureNoiseParams) -> Self {
        ChannelMetric::Gaussian {
            variance: noise.effective_variance(),
        }
    }

    /// log p(y | x).
    pub fn log_likelihood(&self, y: f64, x: f64) -> f64 {
        Prepared::new(self).eval(y - x)
    }
}

// (log weight - log sqrt(2 pi var), 1 / (2 var)) per component.
struct Prepared {
    terms: Vec<(f64, f64)>,
}

impl Prepared {
    fn new(metric: &ChannelMetric) -> Self {
        let term = |w: f64, var: f64| (w.ln() - 0.5 * (2.0 * PI * var).ln(), 0.5 / var);
        let terms = match metric {
            ChannelMetric::Gaussian { variance } => vec![term(1.0, *variance)],
            ChannelMetric::Mixture(m) => m
                .components()
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| term(c.weight, c.variance))
                .collect(),
        };
        Self { terms }
    }

    #[inline]
    fn eval(&self, e: f64) -> f64 {
        let e2 = e * e;
        match self.terms.as_slice() {
            [(c, k)] => c - k * e2,
            [(c0, k0), (c1, k1)] => ln_add(c0 - k0 * e2, c1 - k1 * e2),
            terms => terms.iter().fold(f64::NEG_INFINITY, |acc, (c, k)| ln_add(acc, c - k * e2)),
        }
    }
}

/// log(e^a + e^b).
#[inline]
pub fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// log P(b = bit) for a bit with LLR `llr`.
#[inline]
pub fn log_prior(llr: f64, bit: u8) -> f64 {
    if bit & 1 == 1 {
        -softplus(-llr)
    } else {
        -softplus(llr)
    }
}

/// log[P(u) p(y | x)] for one branch.
pub fn branch_metric(metric: &ChannelMetric, y: f64, x: f64, apriori_llr: f64, input_bit: u8) -> f64 {
    log_prior(apriori_llr, input_bit) + metric.log_likelihood(y, x)
}

#[derive(Clone, Copy)]
enum Boundary {
    Zero,
    Uniform,
}

// Forward and backward metrics for `steps` steps given branch metrics
// `gamma[k * B + branch]`.
fn forward_backward(
    trellis: &Trellis,
    gamma: &[f64],
    steps: usize,
    end: Boundary,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let s_count = trellis.num_states();
    let b_count = trellis.num_branches();
    let next = trellis.next_table();
    let mut alpha = vec![f64::NEG_INFINITY; (steps + 1) * s_count];
    alpha[0] = 0.0;
    for k in 0..steps {
        let (cur, rest) = alpha[k * s_count..].split_at_mut(s_count);
        let nxt = &mut rest[..s_count];
        let g = &gamma[k * b_count..(k + 1) * b_count];
        for (br, &ns) in next.iter().enumerate() {
            let v = cur[br >> 1] + g[br];
            let slot = &mut nxt[ns as usize];
            *slot = ln_add(*slot, v);
        }
        normalize(nxt, k)?;
    }
    let mut beta = vec![f64::NEG_INFINITY; (steps + 1) * s_count];
    match end {
        Boundary::Zero => beta[steps * s_count] = 0.0,
        Boundary::Uniform => beta[steps * s_count..].fill(0.0),
    }
    for k in (0..steps).rev() {
        let (cur, rest) = beta[k * s_count..].split_at_mut(s_count);
        let nxt = &rest[..s_count];
        let g = &gamma[k * b_count..(k + 1) * b_count];
        for (s, slot) in cur.iter_mut().enumerate() {
            let b0 = 2 * s;
            *slot = ln_add(g[b0] + nxt[next[b0] as usize], g[b0 + 1] + nxt[next[b0 + 1] as usize]);
        }
        normalize(cur, k)?;
    }
    Ok((alpha, beta))
}

fn normalize(v: &mut [f64], step: usize) -> Result<()> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NumericalDegeneracy { step });
    }
    v.iter_mut().for_each(|x| *x -= max);
    Ok(())
}

/// MAP equalization of `observations` on `trellis` (one input bit per step,
/// `num_outputs` observations per step). The start state is 0 and the end
/// is left open.
///
/// Returns `(extrinsic, aposteriori)` with extrinsic = aposteriori - apriori.
pub fn bcjr_decode(
    trellis: &Trellis,
    observations: &[f64],
    metric: &ChannelMetric,
    apriori: &LlrFrame,
) -> Result<(LlrFrame, LlrFrame)> {
    let steps = apriori.len();
    let outs = trellis.num_outputs();
    if observations.len() != steps * outs {
        return Err(Error::Contract(format!(
            "{} observations for {} steps of {} outputs",
            observations.len(),
            steps,
            outs
        )));
    }
    let prepared = Prepared::new(metric);
    let s_count = trellis.num_states();
    let b_count = trellis.num_branches();
    // channel-only branch metrics
    let mut chan = vec![0.0; steps * b_count];
    for k in 0..steps {
        let y = &observations[k * outs..(k + 1) * outs];
        let row = &mut chan[k * b_count..(k + 1) * b_count];
        for (br, g) in row.iter_mut().enumerate() {
            let label = trellis.label_at(k, br >> 1, (br & 1) as u8);
            *g = y.iter().zip(label).map(|(&yv, &x)| prepared.eval(yv - x)).sum();
        }
    }
    let mut gamma = chan.clone();
    for (k, &la) in apriori.values().iter().enumerate() {
        let (p0, p1) = (log_prior(la, 0), log_prior(la, 1));
        for pair in gamma[k * b_count..(k + 1) * b_count].chunks_exact_mut(2) {
            pair[0] += p0;
            pair[1] += p1;
        }
    }
    let (alpha, beta) = forward_backward(trellis, &gamma, steps, Boundary::Uniform)?;
    let next = trellis.next_table();
    let mut ext = Vec::with_capacity(steps);
    let mut app = Vec::with_capacity(steps);
    for k in 0..steps {
        let a = &alpha[k * s_count..(k + 1) * s_count];
        let b = &beta[(k + 1) * s_count..(k + 2) * s_count];
        let g = &chan[k * b_count..(k + 1) * b_count];
        let mut sums = [f64::NEG_INFINITY; 2];
        for (br, &ns) in next.iter().enumerate() {
            let t = a[br >> 1] + g[br] + b[ns as usize];
            sums[br & 1] = ln_add(sums[br & 1], t);
        }
        let e = sums[1] - sums[0];
        if e.is_nan() {
            return Err(Error::NumericalDegeneracy { step: k });
        }
        // the prior enters every branch of a given input bit equally
        ext.push(e);
        app.push(e + apriori.values()[k]);
    }
    Ok((LlrFrame::new(ext), LlrFrame::new(app)))
}

/// Outer decoder for a terminated rate-1/2 code trellis, driven only by
/// LLRs. Frames cover info plus termination steps.
///
/// Returns the extrinsic LLRs of all code bits in `[s0, p0, s1, p1, ...]`
/// order and the a-posteriori LLRs of the info bits.
pub fn decode_outer(
    trellis: &Trellis,
    apriori_systematic: &LlrFrame,
    apriori_parity: &LlrFrame,
) -> Result<(LlrFrame, LlrFrame)> {
    let steps = apriori_systematic.len();
    let m = trellis.memory();
    if trellis.num_outputs() != 2 || !trellis.is_terminable() {
        return Err(Error::Contract("decode_outer needs a rate-1/2 terminated code trellis".into()));
    }
    if apriori_parity.len() != steps || steps < m {
        return Err(Error::Contract(format!(
            "systematic/parity lengths {} / {} inconsistent with memory {}",
            steps,
            apriori_parity.len(),
            m
        )));
    }
    let s_count = trellis.num_states();
    let b_count = trellis.num_branches();
    let sys = apriori_systematic.values();
    let par = apriori_parity.values();
    // per-branch contributions c_s * L_s and c_p * L_p
    let mut gs = vec![0.0; steps * b_count];
    let mut gp = vec![0.0; steps * b_count];
    for k in 0..steps {
        for br in 0..b_count {
            let label = trellis.label(br >> 1, (br & 1) as u8);
            gs[k * b_count + br] = label[0] * sys[k];
            gp[k * b_count + br] = label[1] * par[k];
        }
    }
    let gamma: Vec<f64> = gs.iter().zip(&gp).map(|(a, b)| a + b).collect();
    let (alpha, beta) = forward_backward(trellis, &gamma, steps, Boundary::Zero)?;
    let next = trellis.next_table();
    let mut ext = Vec::with_capacity(2 * steps);
    let mut info = Vec::with_capacity(steps - m);
    for k in 0..steps {
        let a = &alpha[k * s_count..(k + 1) * s_count];
        let b = &beta[(k + 1) * s_count..(k + 2) * s_count];
        let mut s_sums = [f64::NEG_INFINITY; 2];
        let mut p_sums = [f64::NEG_INFINITY; 2];
        for (br, &ns) in next.iter().enumerate() {
            let label = trellis.label(br >> 1, (br & 1) as u8);
            let base = a[br >> 1] + b[ns as usize];
            let i = k * b_count + br;
            let cs = label[0] as usize;
            let cp = label[1] as usize;
            s_sums[cs] = ln_add(s_sums[cs], base + gp[i]);
            p_sums[cp] = ln_add(p_sums[cp], base + gs[i]);
        }
        let es = s_sums[1] - s_sums[0];
        let ep = p_sums[1] - p_sums[0];
        if es.is_nan() || ep.is_nan() {
            return Err(Error::NumericalDegeneracy { step: k });
        }
        ext.push(es);
        ext.push(ep);
        if k < steps - m {
            info.push(es + sys[k]);
        }
    }
    Ok((LlrFrame::new(ext), LlrFrame::new(info)))
}
