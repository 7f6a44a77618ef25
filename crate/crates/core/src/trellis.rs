//! Binary-input trellises for the outer RSC code, the rate-1 precoder and
//! the (precoded) ISI channel.
//!
//! States of shift-register trellises store the most recent register bit in
//! bit 0. Each state has exactly two outgoing branches, one per input bit.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::channel::DiscreteChannel;
use crate::error::{Error, Result};
use crate::poly::BinaryPolynomial;

/// Default upper bound on trellis state count.
pub const DEFAULT_MAX_STATES: usize = 1 << 16;

/// Antipodal mapping of channel bits to symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitMapping {
    /// 0 -> +1, 1 -> -1.
    #[default]
    ZeroPositive,
    /// 0 -> -1, 1 -> +1.
    ZeroNegative,
}

impl BitMapping {
    #[inline]
    pub fn symbol(self, bit: u8) -> f64 {
        match (self, bit & 1) {
            (BitMapping::ZeroPositive, 0) | (BitMapping::ZeroNegative, 1) => 1.0,
            _ => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            BitMapping::ZeroPositive => BitMapping::ZeroNegative,
            BitMapping::ZeroNegative => BitMapping::ZeroPositive,
        }
    }
}

/// Limits applied when building channel trellises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrellisOptions {
    pub max_states: usize,
    /// Accept a precoder whose memory exceeds the channel memory.
    pub allow_precoder_memory_excess: bool,
}

impl Default for TrellisOptions {
    fn default() -> Self {
        Self {
            max_states: DEFAULT_MAX_STATES,
            allow_precoder_memory_excess: false,
        }
    }
}

/// Finite-state machine with binary input and real-valued branch labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    num_states: usize,
    num_outputs: usize,
    next: Vec<u32>,
    labels: Vec<f64>,
    // Labels for the first `startup_len` steps of a zero-history start,
    // indexed [step][branch]. Only used by single-output channel trellises.
    startup: Vec<f64>,
    startup_len: usize,
    termination: Option<Vec<u8>>,
}

impl Trellis {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn num_branches(&self) -> usize {
        2 * self.num_states
    }

    #[inline]
    pub fn next_state(&self, state: usize, input: u8) -> usize {
        self.next[2 * state + input as usize] as usize
    }

    /// Next-state table indexed by branch `2 * state + input`.
    pub fn next_table(&self) -> &[u32] {
        &self.next
    }

    /// Steady-state output labels of a branch.
    #[inline]
    pub fn label(&self, state: usize, input: u8) -> &[f64] {
        let b = 2 * state + input as usize;
        &self.labels[b * self.num_outputs..(b + 1) * self.num_outputs]
    }

    /// Output labels at trellis step `step`, accounting for the start-up
    /// transient of channel trellises.
    #[inline]
    pub fn label_at(&self, step: usize, state: usize, input: u8) -> &[f64] {
        if step < self.startup_len {
            let b = 2 * state + input as usize;
            let i = step * self.num_branches() + b;
            &self.startup[i..i + 1]
        } else {
            self.label(state, input)
        }
    }

    /// Number of initial steps whose labels differ from the steady state.
    pub fn startup_len(&self) -> usize {
        self.startup_len
    }

    /// Input bit that drives `state` toward the all-zero state, for
    /// terminated code trellises.
    pub fn termination_input(&self, state: usize) -> Option<u8> {
        self.termination.as_ref().map(|t| t[state])
    }

    pub fn is_terminable(&self) -> bool {
        self.termination.is_some()
    }

    /// Number of register bits needed to reach every state.
    pub fn memory(&self) -> usize {
        self.num_states.next_power_of_two().trailing_zeros() as usize
    }

    /// Checks the two-branch, determinism and reachability invariants.
    pub fn check_invariants(&self) -> Result<()> {
        if self.next.len() != self.num_branches() || self.labels.len() != self.num_branches() * self.num_outputs {
            return Err(Error::Contract("branch table size mismatch".into()));
        }
        if let Some(&bad) = self.next.iter().find(|&&n| n as usize >= self.num_states) {
            return Err(Error::Contract(format!("next state {bad} out of range")));
        }
        let mut depth = vec![usize::MAX; self.num_states];
        depth[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            for b in 0..2 {
                let n = self.next_state(s, b);
                if depth[n] == usize::MAX {
                    depth[n] = depth[s] + 1;
                    queue.push_back(n);
                }
            }
        }
        let m = self.memory();
        if let Some(s) = depth.iter().position(|&d| d > m) {
            return Err(Error::Contract(format!("state {s} not reachable from 0 within {m} steps")));
        }
        Ok(())
    }
}

fn check_states(count: usize, cap: usize) -> Result<()> {
    if count > cap {
        return Err(Error::Complexity { states: count, cap });
    }
    Ok(())
}

#[inline]
fn bit(state: usize, k: usize) -> u8 {
    ((state >> k) & 1) as u8
}

/// XOR of register bits `state[k-1]` selected by the non-constant
/// coefficients of `poly`.
#[inline]
fn feedback_sum(poly: &BinaryPolynomial, state: usize) -> u8 {
    (1..=poly.degree()).filter(|&k| poly.coefficient(k)).fold(0, |acc, k| acc ^ bit(state, k - 1))
}

/// Rate-1/2 recursive systematic code with generators
/// `[1, feedforward / feedback]`. Branch labels are (systematic, parity)
/// as 0.0 / 1.0.
pub fn build_rsc_trellis(feedforward: &BinaryPolynomial, feedback: &BinaryPolynomial) -> Result<Trellis> {
    if !feedback.has_unit_constant() {
        return Err(Error::Config(format!("feedback polynomial {feedback} needs a unit constant term")));
    }
    let m = feedforward.degree().max(feedback.degree());
    let states = 1usize << m;
    let mask = states - 1;
    let mut next = Vec::with_capacity(2 * states);
    let mut labels = Vec::with_capacity(4 * states);
    let mut termination = Vec::with_capacity(states);
    for s in 0..states {
        let fb = feedback_sum(feedback, s);
        termination.push(fb);
        for u in 0..2u8 {
            let w = u ^ fb;
            let parity = (1..=m)
                .filter(|&k| feedforward.coefficient(k))
                .fold(if feedforward.coefficient(0) { w } else { 0 }, |acc, k| acc ^ bit(s, k - 1));
            next.push((((s << 1) | w as usize) & mask) as u32);
            labels.push(u as f64);
            labels.push(parity as f64);
        }
    }
    Ok(Trellis {
        num_states: states,
        num_outputs: 2,
        next,
        labels,
        startup: Vec::new(),
        startup_len: 0,
        termination: Some(termination),
    })
}

/// Encodes `bits` and appends termination steps that return the encoder to
/// state 0. Output is interleaved per step: `[u0, p0, u1, p1, ...]`.
pub fn encode_rsc(trellis: &Trellis, bits: &[u8]) -> Result<Vec<u8>> {
    if !trellis.is_terminable() || trellis.num_outputs() != 2 {
        return Err(Error::Contract("encode_rsc needs a rate-1/2 terminable code trellis".into()));
    }
    let m = trellis.memory();
    let mut out = Vec::with_capacity(2 * (bits.len() + m));
    let mut state = 0;
    let tail = (0..m).map(|_| None);
    for input in bits.iter().map(|&b| Some(b & 1)).chain(tail) {
        let u = input.unwrap_or_else(|| trellis.termination_input(state).unwrap_or(0));
        let label = trellis.label(state, u);
        out.push(label[0] as u8);
        out.push(label[1] as u8);
        state = trellis.next_state(state, u);
    }
    debug_assert_eq!(state, 0);
    Ok(out)
}

/// Rate-1 recursive precoder `1 / feedback(D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    feedback: BinaryPolynomial,
    trellis: Trellis,
}

impl Precoder {
    pub fn feedback(&self) -> &BinaryPolynomial {
        &self.feedback
    }

    pub fn memory(&self) -> usize {
        self.feedback.degree()
    }

    pub fn trellis(&self) -> &Trellis {
        &self.trellis
    }

    /// y[n] = x[n] xor sum_k f_k y[n-k], zero initial state.
    pub fn precode(&self, bits: &[u8]) -> Vec<u8> {
        let m = self.memory();
        let mut out: Vec<u8> = Vec::with_capacity(bits.len());
        for (n, &x) in bits.iter().enumerate() {
            let y = (1..=m)
                .filter(|&k| self.feedback.coefficient(k) && n >= k)
                .fold(x & 1, |acc, k| acc ^ out[n - k]);
            out.push(y);
        }
        out
    }

    /// Inverse FIR map x[n] = y[n] xor sum_k f_k y[n-k].
    pub fn deprecode(&self, bits: &[u8]) -> Vec<u8> {
        let m = self.memory();
        (0..bits.len())
            .map(|n| {
                (1..=m)
                    .filter(|&k| self.feedback.coefficient(k) && n >= k)
                    .fold(bits[n] & 1, |acc, k| acc ^ bits[n - k])
            })
            .collect()
    }
}

pub fn build_precoder(feedback: &BinaryPolynomial) -> Result<Precoder> {
    if !feedback.has_unit_constant() {
        return Err(Error::Config(format!("precoder feedback {feedback} needs a unit constant term")));
    }
    let m = feedback.degree();
    let states = 1usize << m;
    let mask = states - 1;
    let mut next = Vec::with_capacity(2 * states);
    let mut labels = Vec::with_capacity(2 * states);
    for s in 0..states {
        let fb = feedback_sum(feedback, s);
        for x in 0..2u8 {
            let y = x ^ fb;
            next.push((((s << 1) | y as usize) & mask) as u32);
            labels.push(y as f64);
        }
    }
    Ok(Precoder {
        feedback: *feedback,
        trellis: Trellis {
            num_states: states,
            num_outputs: 1,
            next,
            labels,
            startup: Vec::new(),
            startup_len: 0,
            termination: None,
        },
    })
}

// Noiseless amplitude for channel bit `x` with history `state` (bit k-1 =
// x[n-k]), using taps 0..=upto.
fn isi_amplitude(taps: &[f64], mapping: BitMapping, state: usize, x: u8, upto: usize) -> f64 {
    taps.iter()
        .enumerate()
        .take(upto + 1)
        .map(|(k, &h)| h * mapping.symbol(if k == 0 { x } else { bit(state, k - 1) }))
        .sum()
}

// Channel trellis over a history of `hist` channel bits; the input is turned
// into a channel bit by `channel_bit(state, input)`.
fn history_trellis(
    taps: &[f64],
    mapping: BitMapping,
    hist: usize,
    channel_bit: impl Fn(usize, u8) -> u8,
) -> Trellis {
    let states = 1usize << hist;
    let mask = states - 1;
    let mut next = Vec::with_capacity(2 * states);
    let mut labels = Vec::with_capacity(2 * states);
    let startup_len = taps.len() - 1;
    let mut startup = vec![0.0; startup_len * 2 * states];
    for s in 0..states {
        for u in 0..2u8 {
            let x = channel_bit(s, u);
            let b = 2 * s + u as usize;
            next.push((((s << 1) | x as usize) & mask) as u32);
            labels.push(isi_amplitude(taps, mapping, s, x, taps.len() - 1));
            for n in 0..startup_len {
                startup[n * 2 * states + b] = isi_amplitude(taps, mapping, s, x, n);
            }
        }
    }
    Trellis {
        num_states: states,
        num_outputs: 1,
        next,
        labels,
        startup,
        startup_len,
        termination: None,
    }
}

/// ISI channel trellis with 2^(L_h - 1) states; labels are noiseless
/// channel amplitudes.
pub fn build_isi_trellis(ch: &DiscreteChannel, mapping: BitMapping) -> Result<Trellis> {
    build_isi_trellis_with(ch, mapping, TrellisOptions::default())
}

pub fn build_isi_trellis_with(ch: &DiscreteChannel, mapping: BitMapping, opts: TrellisOptions) -> Result<Trellis> {
    let hist = ch.memory();
    check_states(1usize.checked_shl(hist as u32).unwrap_or(usize::MAX), opts.max_states)?;
    Ok(history_trellis(ch.taps(), mapping, hist, |_, u| u))
}

/// Precoder followed by the ISI channel as one trellis.
///
/// The precoder register holds its own past outputs, which are also the
/// channel bits the ISI memory tracks, so the combined state is the last
/// max(m, L_h - 1) channel bits.
pub fn build_precoded_isi_trellis(precoder: &Precoder, ch: &DiscreteChannel, mapping: BitMapping) -> Result<Trellis> {
    build_precoded_isi_trellis_with(precoder, ch, mapping, TrellisOptions::default())
}

pub fn build_precoded_isi_trellis_with(
    precoder: &Precoder,
    ch: &DiscreteChannel,
    mapping: BitMapping,
    opts: TrellisOptions,
) -> Result<Trellis> {
    let m = precoder.memory();
    if m > ch.memory() {
        if opts.allow_precoder_memory_excess {
            log::warn!(
                "precoder memory {m} exceeds channel memory {}; equalizer complexity grows",
                ch.memory()
            );
        } else {
            return Err(Error::Config(format!(
                "precoder memory {m} exceeds channel memory {}",
                ch.memory()
            )));
        }
    }
    let hist = m.max(ch.memory());
    check_states(1usize.checked_shl(hist as u32).unwrap_or(usize::MAX), opts.max_states)?;
    let fb = *precoder.feedback();
    Ok(history_trellis(ch.taps(), mapping, hist, move |s, u| u ^ feedback_sum(&fb, s)))
}

/// Serial composition of a rate-1 binary-output trellis `front` with a
/// channel trellis `back`, as a direct product with unreachable states
/// removed. State 0 is the pair of zero states.
pub fn compose(front: &Trellis, back: &Trellis, opts: TrellisOptions) -> Result<Trellis> {
    if front.num_outputs() != 1 || back.num_outputs() != 1 {
        return Err(Error::Contract("compose needs single-output trellises".into()));
    }
    let product = front.num_states().saturating_mul(back.num_states());
    check_states(product, opts.max_states)?;
    let pair = |f: usize, b: usize| f * back.num_states() + b;
    let mut index = vec![u32::MAX; product];
    let mut order = vec![(0usize, 0usize)];
    index[0] = 0;
    let mut i = 0;
    while i < order.len() {
        let (f, b) = order[i];
        for u in 0..2u8 {
            let x = front.label(f, u)[0] as u8;
            let n = (front.next_state(f, u), back.next_state(b, x));
            let p = pair(n.0, n.1);
            if index[p] == u32::MAX {
                index[p] = order.len() as u32;
                order.push(n);
            }
        }
        i += 1;
    }
    let states = order.len();
    let startup_len = back.startup_len();
    let mut next = Vec::with_capacity(2 * states);
    let mut labels = Vec::with_capacity(2 * states);
    let mut startup = vec![0.0; startup_len * 2 * states];
    for (s, &(f, b)) in order.iter().enumerate() {
        for u in 0..2u8 {
            let x = front.label(f, u)[0] as u8;
            next.push(index[pair(front.next_state(f, u), back.next_state(b, x))]);
            labels.push(back.label(b, x)[0]);
            for n in 0..startup_len {
                startup[n * 2 * states + 2 * s + u as usize] = back.label_at(n, b, x)[0];
            }
        }
    }
    Ok(Trellis {
        num_states: states,
        num_outputs: 1,
        next,
        labels,
        startup,
        startup_len,
        termination: None,
    })
}

/// Noiseless output of walking `trellis` from state 0 with `bits` as input.
pub fn channel_output(trellis: &Trellis, bits: &[u8]) -> Vec<f64> {
    let mut out = Vec::with_capacity(bits.len() * trellis.num_outputs());
    let mut state = 0;
    for (n, &b) in bits.iter().enumerate() {
        out.extend_from_slice(trellis.label_at(n, state, b & 1));
        state = trellis.next_state(state, b & 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly(s: &str) -> BinaryPolynomial {
        s.parse().unwrap()
    }

    fn reference_channel() -> DiscreteChannel {
        DiscreteChannel::new(crate::channel::REFERENCE_TAPS.to_vec()).unwrap()
    }

    fn random_bits(seed: u64, n: usize) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    // Zero-start convolution of mapped symbols with the taps.
    fn convolve(taps: &[f64], bits: &[u8], mapping: BitMapping) -> Vec<f64> {
        (0..bits.len())
            .map(|n| (0..taps.len()).filter(|&k| k <= n).map(|k| taps[k] * mapping.symbol(bits[n - k])).sum())
            .collect()
    }

    // Shift-register simulation of the [1, (1+D+D^2+D^3)/(1+D+D^3)] encoder.
    fn register_rsc(bits: &[u8]) -> Vec<u8> {
        let mut r = [0u8; 3];
        let mut out = vec![];
        for &u in bits {
            let w = u ^ r[0] ^ r[2];
            let p = w ^ r[0] ^ r[1] ^ r[2];
            out.push(u);
            out.push(p);
            r = [w, r[0], r[1]];
        }
        for _ in 0..3 {
            let u = r[0] ^ r[2];
            let w = 0;
            let p = w ^ r[0] ^ r[1] ^ r[2];
            out.push(u);
            out.push(p);
            r = [w, r[0], r[1]];
        }
        assert_eq!(r, [0, 0, 0]);
        out
    }

    fn outer() -> Trellis {
        build_rsc_trellis(&poly("1+D+D^2+D^3"), &poly("1+D+D^3")).unwrap()
    }

    #[test]
    fn rsc_zero_input_gives_zero_codeword() {
        let t = outer();
        assert_eq!(t.num_states(), 8);
        t.check_invariants().unwrap();
        assert!(encode_rsc(&t, &[0; 20]).unwrap().iter().all(|&b| b == 0));
    }

    #[test]
    fn rsc_impulse_response_matches_register_simulation() {
        let mut input = vec![0u8; 12];
        input[0] = 1;
        let code = encode_rsc(&outer(), &input).unwrap();
        assert_eq!(code, register_rsc(&input));
        let parity: Vec<u8> = code.iter().skip(1).step_by(2).copied().collect();
        // 1 / (1+D+D^3) times (1+D+D^2+D^3), hand-derived first 12 terms
        assert_eq!(&parity[..12], &[1, 0, 1, 1, 1, 0, 1, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn rsc_matches_register_on_random_input() {
        let bits = random_bits(4, 500);
        assert_eq!(encode_rsc(&outer(), &bits).unwrap(), register_rsc(&bits));
    }

    #[test]
    fn rsc_rejects_nonrecursive_feedback() {
        assert!(build_rsc_trellis(&poly("1+D"), &poly("D+D^2")).is_err());
    }

    proptest! {
        #[test]
        fn rsc_is_linear(seed in 0u64..1000, n in 1usize..200) {
            let t = outer();
            let a = random_bits(seed, n);
            let b = random_bits(seed + 7777, n);
            let x: Vec<u8> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
            let ca = encode_rsc(&t, &a).unwrap();
            let cb = encode_rsc(&t, &b).unwrap();
            let cx = encode_rsc(&t, &x).unwrap();
            let sum: Vec<u8> = ca.iter().zip(&cb).map(|(p, q)| p ^ q).collect();
            prop_assert_eq!(cx, sum);
        }

        #[test]
        fn precoder_inverse_is_identity(seed in 0u64..1000, n in 0usize..400, mask in 1u32..64) {
            let fb = BinaryPolynomial::from_mask(mask | 1).unwrap();
            let p = build_precoder(&fb).unwrap();
            let x = random_bits(seed, n);
            prop_assert_eq!(p.deprecode(&p.precode(&x)), x);
        }
    }

    #[test]
    fn precoder_hand_recursions() {
        let d3 = build_precoder(&poly("1+D^3")).unwrap();
        assert_eq!(d3.precode(&[1, 0, 0, 0, 0, 0, 0]), vec![1, 0, 0, 1, 0, 0, 1]);
        let acc = build_precoder(&poly("1+D")).unwrap();
        assert_eq!(acc.precode(&[1, 1, 1, 1]), vec![1, 0, 1, 0]);
        let x = random_bits(9, 10_000);
        assert_eq!(d3.deprecode(&d3.precode(&x)), x);
        // trellis walk agrees with the direct recursion
        let walked: Vec<u8> = channel_output(d3.trellis(), &x).iter().map(|&v| v as u8).collect();
        assert_eq!(walked, d3.precode(&x));
    }

    #[test]
    fn memoryless_channel_trellis() {
        let t = build_isi_trellis(&DiscreteChannel::identity(), BitMapping::ZeroPositive).unwrap();
        assert_eq!(t.num_states(), 1);
        assert_eq!(channel_output(&t, &[0, 1, 1, 0]), vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn all_zero_bits_settle_to_tap_sum() {
        let ch = reference_channel();
        let t = build_isi_trellis(&ch, BitMapping::ZeroPositive).unwrap();
        assert_eq!(t.num_states(), 8);
        let y = channel_output(&t, &[0; 10]);
        // 0.8709 + 0.4758 - 0.1153 + 0.0435
        for v in &y[3..] {
            assert!((v - 1.2749).abs() < 1e-12);
        }
        assert!((y[0] - 0.8709).abs() < 1e-12);
        assert!((y[1] - (0.8709 + 0.4758)).abs() < 1e-12);
    }

    #[test]
    fn single_flip_deviates_by_twice_the_taps() {
        let ch = reference_channel();
        let t = build_isi_trellis(&ch, BitMapping::ZeroPositive).unwrap();
        let base = channel_output(&t, &[0; 12]);
        let mut bits = [0u8; 12];
        bits[5] = 1;
        let y = channel_output(&t, &bits);
        for n in 0..12 {
            let expected = if (5..9).contains(&n) { -2.0 * ch.taps()[n - 5] } else { 0.0 };
            assert!((y[n] - base[n] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_output_is_convolution() {
        let ch = reference_channel();
        for mapping in [BitMapping::ZeroPositive, BitMapping::ZeroNegative] {
            let t = build_isi_trellis(&ch, mapping).unwrap();
            let bits = random_bits(1, 1000);
            let y = channel_output(&t, &bits);
            let z = convolve(ch.taps(), &bits, mapping);
            for (a, b) in y.iter().zip(&z) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    fn candidates() -> Vec<BinaryPolynomial> {
        ["1+D", "1+D^2", "1+D+D^2", "1+D^3", "1+D^2+D^3", "1+D+D^3"].iter().map(|s| poly(s)).collect()
    }

    fn channels() -> Vec<DiscreteChannel> {
        vec![
            DiscreteChannel::identity(),
            DiscreteChannel::new(vec![0.8, 0.6]).unwrap(),
            reference_channel(),
            DiscreteChannel::new(vec![0.5, 0.5, 0.5, 0.4, 0.3]).unwrap(),
        ]
    }

    #[test]
    fn precoded_trellis_obeys_composition_law() {
        for ch in channels() {
            let isi = build_isi_trellis(&ch, BitMapping::ZeroPositive).unwrap();
            for fb in candidates() {
                let p = build_precoder(&fb).unwrap();
                let opts = TrellisOptions {
                    allow_precoder_memory_excess: true,
                    ..Default::default()
                };
                let shared = build_precoded_isi_trellis_with(&p, &ch, BitMapping::ZeroPositive, opts).unwrap();
                let product = compose(p.trellis(), &isi, opts).unwrap();
                shared.check_invariants().unwrap();
                product.check_invariants().unwrap();
                assert_eq!(shared.num_states(), 1 << p.memory().max(ch.memory()));
                assert_eq!(product.num_states(), shared.num_states());
                let x = random_bits(fb.mask() as u64, 700);
                let direct = channel_output(&isi, &p.precode(&x));
                assert_eq!(channel_output(&shared, &x), direct);
                assert_eq!(channel_output(&product, &x), direct);
            }
        }
    }

    #[test]
    fn invariants_hold_exhaustively_for_small_trellises() {
        for mask in 1u32..(1 << 7) {
            let fb = BinaryPolynomial::from_mask(mask | 1).unwrap();
            build_precoder(&fb).unwrap().trellis().check_invariants().unwrap();
            for ff in 1u32..(1 << 4) {
                let ff = BinaryPolynomial::from_mask(ff).unwrap();
                build_rsc_trellis(&ff, &fb).unwrap().check_invariants().unwrap();
            }
        }
        let big = DiscreteChannel::new(vec![1.0; 13]).unwrap();
        build_isi_trellis(&big, BitMapping::ZeroPositive).unwrap().check_invariants().unwrap();
    }

    #[test]
    fn precoder_memory_limit_and_state_cap() {
        let p = build_precoder(&poly("1+D^3")).unwrap();
        let short = DiscreteChannel::new(vec![0.8, 0.6]).unwrap();
        assert!(matches!(
            build_precoded_isi_trellis(&p, &short, BitMapping::ZeroPositive),
            Err(Error::Config(_))
        ));
        let long = DiscreteChannel::new(vec![1.0; 18]).unwrap();
        assert!(matches!(
            build_isi_trellis(&long, BitMapping::ZeroPositive),
            Err(Error::Complexity { .. })
        ));
    }
}
