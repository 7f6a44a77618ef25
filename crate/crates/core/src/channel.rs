//! Multipath power-line channel synthesis.
//!
//! The physical channel is a weighted sum of propagation paths whose
//! attenuation grows with frequency and distance. Combined with a
//! raised-cosine transmit pulse it yields a continuous equivalent response,
//! which is then sampled at the symbol rate into a short normalized FIR
//! channel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One propagation path: a real weight and a path length in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub weight: f64,
    pub distance: f64,
}

/// Physical description of a multipath power-line channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathParams {
    pub paths: Vec<Path>,
    /// Constant attenuation term, 1/m.
    pub a0: f64,
    /// Frequency-dependent attenuation term, s^kappa/m.
    pub a1: f64,
    /// Attenuation exponent, in (0, 1].
    pub kappa: f64,
    /// Relative dielectric constant of the cable insulation.
    pub epsilon_r: f64,
}

impl MultipathParams {
    /// Four-path network on VVF cable (Zimmermann/Dostert model).
    pub fn zimmermann_vvf_4path() -> Self {
        let paths = [(0.64, 200.0), (0.38, 222.4), (-0.15, 244.8), (0.05, 267.5)]
            .iter()
            .map(|&(weight, distance)| Path { weight, distance })
            .collect();
        Self {
            paths,
            a0: 0.0,
            a1: 7.8e-10,
            kappa: 1.0,
            epsilon_r: 3.17,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::Config("multipath channel needs at least one path".into()));
        }
        if let Some(p) = self
            .paths
            .iter()
            .find(|p| !(p.distance >= 0.0) || !p.weight.is_finite() || !p.distance.is_finite())
        {
            return Err(Error::Config(format!(
                "invalid path (weight {}, distance {})",
                p.weight, p.distance
            )));
        }
        if !(self.epsilon_r >= 1.0) || !self.epsilon_r.is_finite() {
            return Err(Error::Config(format!(
                "epsilon_r must be >= 1, got {}",
                self.epsilon_r
            )));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::Config(format!("kappa must be in (0, 1], got {}", self.kappa)));
        }
        if !(self.a0 >= 0.0) || !(self.a1 >= 0.0) {
            return Err(Error::Config("attenuation constants must be non-negative".into()));
        }
        Ok(())
    }

    /// Propagation velocity c0 / sqrt(epsilon_r), m/s.
    pub fn propagation_velocity(&self) -> f64 {
        SPEED_OF_LIGHT / self.epsilon_r.sqrt()
    }

    /// Delay of each path, seconds.
    pub fn path_delays(&self) -> Vec<f64> {
        let vp = self.propagation_velocity();
        self.paths.iter().map(|p| p.distance / vp).collect()
    }

    pub fn max_delay(&self) -> f64 {
        self.path_delays().into_iter().fold(0.0, f64::max)
    }

    /// Complex response at frequency `f` (Hz, non-negative).
    pub fn frequency_response(&self, f: f64) -> Result<Complex64> {
        self.validate()?;
        if !(f >= 0.0) {
            return Err(Error::Domain(format!("frequency must be non-negative, got {f}")));
        }
        Ok(self.response_unchecked(f))
    }

    /// Response of a single path term at `f`.
    pub fn path_response(&self, path: &Path, f: f64) -> Complex64 {
        let vp = self.propagation_velocity();
        let atten = (-(self.a0 + self.a1 * f.abs().powf(self.kappa)) * path.distance).exp();
        let phase = -2.0 * PI * f * path.distance / vp;
        Complex64::from_polar(path.weight * atten, phase)
    }

    // Valid for negative f too: the attenuation uses |f| and the delay term
    // is odd in f, so H(-f) = conj(H(f)).
    fn response_unchecked(&self, f: f64) -> Complex64 {
        self.paths.iter().map(|p| self.path_response(p, f)).sum()
    }
}

/// Truncated raised-cosine transmit pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    /// Roll-off factor in [0, 1].
    pub beta: f64,
    /// Symbol period T, seconds.
    pub symbol_period: f64,
    /// Number of symbol periods covered by the truncated pulse (even, >= 4).
    pub span: usize,
}

impl PulseShape {
    pub fn new(beta: f64, symbol_period: f64, span: usize) -> Result<Self> {
        let shape = Self {
            beta,
            symbol_period,
            span,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("roll-off must be in [0, 1], got {}", self.beta)));
        }
        if !(self.symbol_period > 0.0) || !self.symbol_period.is_finite() {
            return Err(Error::Config("symbol period must be positive".into()));
        }
        if self.span < 4 || !self.span.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "pulse span must be even and >= 4, got {}",
                self.span
            )));
        }
        Ok(())
    }

    pub fn half_width(&self) -> f64 {
        self.span as f64 * self.symbol_period / 2.0
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Raised-cosine impulse response, 1 at t = 0 and zero outside the span.
pub fn raised_cosine_impulse(shape: &PulseShape, t: f64) -> f64 {
    if t.abs() > shape.half_width() {
        return 0.0;
    }
    let x = t / shape.symbol_period;
    let b = shape.beta;
    let den = 1.0 - (2.0 * b * x).powi(2);
    if b > 0.0 && den.abs() < 1e-10 {
        // limit at |t| = T / (2 beta)
        return PI / 4.0 * sinc(1.0 / (2.0 * b));
    }
    sinc(x) * (PI * b * x).cos() / den
}

/// Uniform sampling grid t_n = start + n * step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn time(&self, n: usize) -> f64 {
        self.start + n as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|n| self.time(n)).collect()
    }

    /// Grid with `oversampling` samples per symbol covering the pulse span
    /// plus the longest path delay.
    pub fn covering(params: &MultipathParams, shape: &PulseShape, oversampling: usize) -> Self {
        let step = shape.symbol_period / oversampling as f64;
        let start = -shape.half_width();
        let stop = params.max_delay() + shape.half_width();
        let len = ((stop - start) / step).ceil() as usize + 1;
        Self { start, step, len }
    }
}

/// How the equivalent response is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseMethod {
    /// Pulse spectrum times sampled H_C(f), inverse FFT.
    Spectral,
    /// Sampled pulse convolved with the band-limited channel impulse.
    Direct,
}

/// Equivalent response ch(t) of pulse and channel on `grid`.
///
/// Both methods use the channel band-limited to half the grid sampling rate,
/// so they differ only by the frequency-sampling (time aliasing) of the
/// spectral route.
pub fn equivalent_impulse_response(
    params: &MultipathParams,
    shape: &PulseShape,
    grid: &TimeGrid,
    method: ResponseMethod,
) -> Result<Vec<f64>> {
    params.validate()?;
    shape.validate()?;
    if grid.len == 0 || !(grid.step > 0.0) {
        return Err(Error::Resolution("empty time grid".into()));
    }
    if grid.step > shape.symbol_period / 8.0 * (1.0 + 1e-12) {
        return Err(Error::Resolution(format!(
            "grid step {} s gives fewer than 8 samples per symbol",
            grid.step
        )));
    }
    // pulse taps g(m dt) for m in -half..=half
    let half = (shape.half_width() / grid.step).floor() as i64;
    let pulse: Vec<f64> = (-half..=half)
        .map(|m| raised_cosine_impulse(shape, m as f64 * grid.step))
        .collect();
    Ok(match method {
        ResponseMethod::Spectral => spectral_response(params, &pulse, half, grid),
        ResponseMethod::Direct => direct_response(params, &pulse, half, grid),
    })
}

fn spectral_response(params: &MultipathParams, pulse: &[f64], half: i64, grid: &TimeGrid) -> Vec<f64> {
    let needed = grid.len + pulse.len();
    let size = (64 * needed).next_power_of_two().max(1 << 20);
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (i, &g) in pulse.iter().enumerate() {
        let m = i as i64 - half;
        buf[m.rem_euclid(size as i64) as usize] = Complex64::new(g, 0.0);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    let df = 1.0 / (size as f64 * grid.step);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = if k <= size / 2 {
            k as f64 * df
        } else {
            (k as f64 - size as f64) * df
        };
        let mut h = params.response_unchecked(f) * Complex64::from_polar(1.0, 2.0 * PI * f * grid.start);
        if k == size / 2 {
            h = Complex64::new(h.re, 0.0);
        }
        *v *= h;
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / size as f64;
    buf[..grid.len].iter().map(|c| c.re * scale).collect()
}

fn direct_response(params: &MultipathParams, pulse: &[f64], half: i64, grid: &TimeGrid) -> Vec<f64> {
    let band = 0.5 / grid.step;
    let delays = params.path_delays();
    // channel impulse at lag j: t = start + j dt, j in [-half, len + half)
    let lags: Vec<f64> = (-half..grid.len as i64 + half)
        .map(|j| {
            let t = grid.start + j as f64 * grid.step;
            params
                .paths
                .iter()
                .zip(&delays)
                .map(|(p, &tau)| {
                    let gain = p.weight * (-params.a0 * p.distance).exp();
                    gain * 2.0 * cosine_transform(params.a1 * p.distance, params.kappa, 2.0 * PI * (t - tau), band)
                })
                .sum::<f64>()
                * grid.step
        })
        .collect();
    (0..grid.len)
        .map(|n| {
            pulse
                .iter()
                .enumerate()
                .map(|(i, &g)| {
                    let m = i as i64 - half;
                    // lag index n - m, offset by half
                    g * lags[(n as i64 - m + half) as usize]
                })
                .sum()
        })
        .collect()
}

/// Integral over [0, band] of exp(-b f^kappa) cos(w f) df.
fn cosine_transform(b: f64, kappa: f64, w: f64, band: f64) -> f64 {
    if kappa == 1.0 {
        let z = Complex64::new(-b, w);
        if z.norm() * band < 1e-8 {
            return band;
        }
        return (((z * band).exp() - 1.0) / z).re;
    }
    // substitute f = u^(1/kappa) so the attenuation is smooth at f = 0,
    // then composite Simpson with at least 64 points per oscillation
    let p = 1.0 / kappa;
    let upper = band.powf(kappa);
    let cycles = (w.abs() * band / (2.0 * PI)).ceil() as usize;
    let n = (4096usize.max(64 * cycles) + 1) & !1;
    let h = upper / n as f64;
    let f = |u: f64| (-b * u).exp() * (w * u.powf(p)).cos() * p * u.powf(p - 1.0);
    let mut acc = f(0.0) + f(upper);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// Sampled, optionally energy-normalized FIR channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteChannel {
    taps: Vec<f64>,
    normalized: bool,
}

impl DiscreteChannel {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Config("channel needs at least one tap".into()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("channel taps must be finite".into()));
        }
        if taps[0] == 0.0 {
            return Err(Error::Config("leading channel tap must be non-zero".into()));
        }
        Ok(Self {
            taps,
            normalized: false,
        })
    }

    /// Scales taps to unit energy.
    pub fn normalized(taps: Vec<f64>) -> Result<Self> {
        let energy: f64 = taps.iter().map(|t| t * t).sum();
        if energy == 0.0 {
            return Err(Error::DegenerateChannel);
        }
        let norm = energy.sqrt();
        let mut ch = Self::new(taps.into_iter().map(|t| t / norm).collect())?;
        ch.normalized = true;
        Ok(ch)
    }

    /// Memoryless unit channel.
    pub fn identity() -> Self {
        Self {
            taps: vec![1.0],
            normalized: true,
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}

/// Symbol timing used when sampling the equivalent response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingPhase {
    /// Lattice through the largest |ch| sample on the grid.
    PeakAligned,
    /// Lattice t = phase + nT, phase in [0, T).
    Fixed(f64),
}

/// Samples `ch` at symbol spacing and normalizes to unit energy.
///
/// The sampling lattice is t = phase + nT; the first tap is the lattice
/// sample with the largest magnitude, followed by `num_taps - 1` later ones.
/// Off-grid instants use four-point Lagrange interpolation.
pub fn discretize(
    ch: &[f64],
    grid: &TimeGrid,
    symbol_period: f64,
    phase: SamplingPhase,
    num_taps: usize,
) -> Result<DiscreteChannel> {
    if num_taps == 0 {
        return Err(Error::Config("need at least one tap".into()));
    }
    if ch.len() != grid.len {
        return Err(Error::Contract(format!(
            "response has {} samples but grid has {}",
            ch.len(),
            grid.len
        )));
    }
    let phase = match phase {
        SamplingPhase::Fixed(p) => {
            if !(0.0..symbol_period).contains(&p) {
                return Err(Error::Domain(format!("phase {p} outside [0, T)")));
            }
            p
        }
        SamplingPhase::PeakAligned => {
            let peak = ch
                .iter()
                .enumerate()
                .fold((0, 0.0), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
            grid.time(peak.0).rem_euclid(symbol_period)
        }
    };
    let t_end = grid.time(grid.len - 1);
    let first = ((grid.start - phase) / symbol_period).ceil() as i64;
    let last = ((t_end - phase) / symbol_period).floor() as i64;
    let sample = |n: i64| interpolate(ch, grid, phase + n as f64 * symbol_period);
    let start = (first..=last)
        .max_by(|&a, &b| sample(a).abs().total_cmp(&sample(b).abs()).then(b.cmp(&a)))
        .ok_or(Error::DegenerateChannel)?;
    let taps: Vec<f64> = (0..num_taps as i64).map(|k| sample(start + k)).collect();
    if taps.iter().all(|&t| t == 0.0) {
        return Err(Error::DegenerateChannel);
    }
    DiscreteChannel::normalized(taps)
}

fn interpolate(ch: &[f64], grid: &TimeGrid, t: f64) -> f64 {
    let x = (t - grid.start) / grid.step;
    if x < 0.0 || x > (grid.len - 1) as f64 {
        return 0.0;
    }
    let i = x.floor() as i64;
    let frac = x - i as f64;
    if frac.abs() < 1e-9 {
        return ch[i as usize];
    }
    let at = |k: i64| {
        if k < 0 || k >= ch.len() as i64 {
            0.0
        } else {
            ch[k as usize]
        }
    };
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let u = frac;
    -u * (u - 1.0) * (u - 2.0) / 6.0 * p0 + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * p1
        - (u + 1.0) * u * (u - 2.0) / 2.0 * p2
        + (u + 1.0) * u * (u - 1.0) / 6.0 * p3
}

/// Published 4-tap channel used by the shipped turbo-equalization experiments.
pub const REFERENCE_TAPS: [f64; 4] = [0.8709, 0.4758, -0.1153, 0.0435];

/// Physical parameters, pulse and sampling settings needed to reproduce a
/// discrete channel from first principles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSetup {
    pub multipath: MultipathParams,
    pub pulse: PulseShape,
    pub oversampling: usize,
    pub phase: SamplingPhase,
    pub num_taps: usize,
}

/// Timing phase (mod T) that best reproduces [`REFERENCE_TAPS`] from the
/// four-path VVF model; found by an offline search over the symbol period.
pub const ZIMMERMANN_VVF_PHASE: f64 = 0.140_25e-6;

impl ChannelSetup {
    pub fn zimmermann_vvf_4path() -> Self {
        Self {
            multipath: MultipathParams::zimmermann_vvf_4path(),
            pulse: PulseShape {
                beta: 0.7,
                symbol_period: 0.15e-6,
                span: 12,
            },
            oversampling: 16,
            phase: SamplingPhase::Fixed(ZIMMERMANN_VVF_PHASE),
            num_taps: 4,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::covering(&self.multipath, &self.pulse, self.oversampling)
    }

    pub fn impulse_response(&self) -> Result<(TimeGrid, Vec<f64>)> {
        let grid = self.grid();
        let ch = equivalent_impulse_response(&self.multipath, &self.pulse, &grid, ResponseMethod::Spectral)?;
        Ok((grid, ch))
    }

    pub fn discrete_channel(&self) -> Result<DiscreteChannel> {
        let (grid, ch) = self.impulse_response()?;
        discretize(&ch, &grid, self.pulse.symbol_period, self.phase, self.num_taps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_path(weight: f64, distance: f64, a0: f64, a1: f64) -> MultipathParams {
        MultipathParams {
            paths: vec![Path { weight, distance }],
            a0,
            a1,
            kappa: 1.0,
            epsilon_r: 3.17,
        }
    }

    #[test]
    fn lossless_zero_length_path_is_flat() {
        let p = single_path(1.0, 0.0, 0.0, 0.0);
        for f in [0.0, 1e5, 1e6, 2e7] {
            let h = p.frequency_response(f).unwrap();
            assert!((h - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn huge_constant_attenuation_kills_response() {
        let p = single_path(1.0, 100.0, 1e3, 0.0);
        assert!(p.frequency_response(1e6).unwrap().norm() < 1e-300);
    }

    #[test]
    fn vvf_response_at_1mhz_matches_direct_evaluation() {
        // direct evaluation of the path sum, written out term by term
        let vp = 299_792_458.0 / 3.17f64.sqrt();
        let f = 1e6;
        let mut re = 0.0;
        let mut im = 0.0;
        for (xi, d) in [(0.64, 200.0), (0.38, 222.4), (-0.15, 244.8), (0.05, 267.5)] {
            let a = xi * (-(7.8e-10 * f) * d as f64).exp();
            let ph = -2.0 * std::f64::consts::PI * f * d / vp;
            re += a * ph.cos();
            im += a * ph.sin();
        }
        let h = MultipathParams::zimmermann_vvf_4path().frequency_response(f).unwrap();
        assert!((h.re - re).abs() < 1e-12 && (h.im - im).abs() < 1e-12, "{h} vs {re}+{im}i");
        // frozen value of the same evaluation
        assert!((h.re - 0.155_415_679_809_661_9).abs() < 1e-12, "{}", h.re);
        assert!((h.im + 0.737_736_712_739_384_6).abs() < 1e-12, "{}", h.im);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = MultipathParams::zimmermann_vvf_4path();
        p.paths.clear();
        assert!(matches!(p.frequency_response(1e6), Err(Error::Config(_))));
        let mut p = MultipathParams::zimmermann_vvf_4path();
        p.epsilon_r = 0.5;
        assert!(matches!(p.frequency_response(1e6), Err(Error::Config(_))));
        let p = MultipathParams::zimmermann_vvf_4path();
        assert!(matches!(p.frequency_response(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn single_path_magnitude_monotone_in_distance_and_frequency() {
        let mut prev = f64::INFINITY;
        for d in [0.0, 10.0, 100.0, 300.0] {
            let m = single_path(1.0, d, 1e-4, 7.8e-10).frequency_response(5e6).unwrap().norm();
            assert!(m <= prev);
            prev = m;
        }
        let p = single_path(1.0, 200.0, 0.0, 7.8e-10);
        let mut prev = f64::INFINITY;
        for f in [0.0, 5e5, 2e6, 1e7, 2e7] {
            let m = p.frequency_response(f).unwrap().norm();
            assert!(m <= prev);
            prev = m;
        }
    }

    #[test]
    fn path_phase_slope_scales_with_distance() {
        let p = MultipathParams::zimmermann_vvf_4path();
        let f = 1e3; // small enough that the phase does not wrap
        for path in &p.paths {
            let scaled = Path {
                weight: path.weight,
                distance: path.distance * 3.0,
            };
            let a = p.path_response(path, f).arg();
            let b = p.path_response(&scaled, f).arg();
            let sign_a = if path.weight < 0.0 { PI } else { 0.0 };
            let slope_a = (a - sign_a).rem_euclid(2.0 * PI) - 2.0 * PI;
            let slope_b = (b - sign_a).rem_euclid(2.0 * PI) - 2.0 * PI;
            assert!((slope_b - 3.0 * slope_a).abs() < 1e-9, "{slope_a} {slope_b}");
        }
    }

    #[test]
    fn raised_cosine_peak_and_zero_crossings() {
        let shape = PulseShape::new(0.7, 1.0, 12).unwrap();
        assert_eq!(raised_cosine_impulse(&shape, 0.0), 1.0);
        for k in 1..6 {
            assert!(raised_cosine_impulse(&shape, k as f64).abs() < 1e-15);
        }
        assert_eq!(raised_cosine_impulse(&shape, 6.5), 0.0);
    }

    #[test]
    fn raised_cosine_half_symbol_value() {
        // sinc(1/2) cos(0.35 pi) / (1 - 0.49)
        let expected = (2.0 / PI) * (0.35 * PI).cos() / 0.51;
        let shape = PulseShape::new(0.7, 1.0, 12).unwrap();
        let v = raised_cosine_impulse(&shape, 0.5);
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 0.566_704_565_884_774_1).abs() < 1e-12, "{v}");
    }

    #[test]
    fn raised_cosine_singular_point_is_continuous() {
        let shape = PulseShape::new(0.5, 1.0, 12).unwrap();
        let at = raised_cosine_impulse(&shape, 1.0);
        let near = raised_cosine_impulse(&shape, 1.0 + 1e-6);
        assert!((at - near).abs() < 1e-5);
    }

    #[test]
    fn invalid_pulse_rejected() {
        assert!(PulseShape::new(1.5, 1.0, 12).is_err());
        assert!(PulseShape::new(0.5, 1.0, 3).is_err());
        assert!(PulseShape::new(0.5, 1.0, 2).is_err());
    }

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn spectral_and_direct_routes_agree() {
        let setup = ChannelSetup::zimmermann_vvf_4path();
        let grid = setup.grid();
        let s = equivalent_impulse_response(&setup.multipath, &setup.pulse, &grid, ResponseMethod::Spectral).unwrap();
        let d = equivalent_impulse_response(&setup.multipath, &setup.pulse, &grid, ResponseMethod::Direct).unwrap();
        assert!(rel_l2(&s, &d) < 1e-6, "{}", rel_l2(&s, &d));
    }

    #[test]
    fn spectral_and_direct_agree_for_sublinear_attenuation() {
        let mut params = MultipathParams::zimmermann_vvf_4path();
        params.kappa = 0.5;
        params.a1 = 2e-6;
        let pulse = PulseShape::new(0.5, 0.15e-6, 8).unwrap();
        let grid = TimeGrid::covering(&params, &pulse, 8);
        let s = equivalent_impulse_response(&params, &pulse, &grid, ResponseMethod::Spectral).unwrap();
        let d = equivalent_impulse_response(&params, &pulse, &grid, ResponseMethod::Direct).unwrap();
        assert!(rel_l2(&s, &d) < 1e-6, "{}", rel_l2(&s, &d));
    }

    #[test]
    fn pure_delay_shifts_the_pulse() {
        let params = single_path(1.0, 100.0, 0.0, 0.0);
        let pulse = PulseShape::new(0.7, 0.15e-6, 12).unwrap();
        let grid = TimeGrid::covering(&params, &pulse, 16);
        let tau = params.path_delays()[0];
        let ch = equivalent_impulse_response(&params, &pulse, &grid, ResponseMethod::Spectral).unwrap();
        let expected: Vec<f64> = grid.times().iter().map(|&t| raised_cosine_impulse(&pulse, t - tau)).collect();
        assert!(rel_l2(&ch, &expected) < 1e-3, "{}", rel_l2(&ch, &expected));
    }

    #[test]
    fn zero_weights_give_zero_response() {
        let mut params = MultipathParams::zimmermann_vvf_4path();
        for p in &mut params.paths {
            p.weight = 0.0;
        }
        let pulse = PulseShape::new(0.7, 0.15e-6, 12).unwrap();
        let grid = TimeGrid::covering(&params, &pulse, 16);
        for method in [ResponseMethod::Spectral, ResponseMethod::Direct] {
            let ch = equivalent_impulse_response(&params, &pulse, &grid, method).unwrap();
            assert!(ch.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let params = MultipathParams::zimmermann_vvf_4path();
        let pulse = PulseShape::new(0.7, 0.15e-6, 12).unwrap();
        let grid = TimeGrid::covering(&params, &pulse, 4);
        assert!(matches!(
            equivalent_impulse_response(&params, &pulse, &grid, ResponseMethod::Direct),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn nyquist_pulse_discretizes_to_unit_impulse() {
        let pulse = PulseShape::new(0.7, 1.0, 12).unwrap();
        let grid = TimeGrid {
            start: -6.0,
            step: 1.0 / 16.0,
            len: 12 * 16 + 1,
        };
        let ch: Vec<f64> = grid.times().iter().map(|&t| raised_cosine_impulse(&pulse, t)).collect();
        let dc = discretize(&ch, &grid, 1.0, SamplingPhase::Fixed(0.0), 4).unwrap();
        assert!((dc.taps()[0] - 1.0).abs() < 1e-12);
        assert!(dc.taps()[1..].iter().all(|t| t.abs() < 1e-12));
        let peak = discretize(&ch, &grid, 1.0, SamplingPhase::PeakAligned, 4).unwrap();
        assert_eq!(peak.taps(), dc.taps());
    }

    #[test]
    fn discretize_removes_gain_and_normalizes() {
        let setup = ChannelSetup::zimmermann_vvf_4path();
        let (grid, ch) = setup.impulse_response().unwrap();
        let a = discretize(&ch, &grid, 0.15e-6, SamplingPhase::PeakAligned, 4).unwrap();
        let scaled: Vec<f64> = ch.iter().map(|v| 7.0 * v).collect();
        let b = discretize(&scaled, &grid, 0.15e-6, SamplingPhase::PeakAligned, 4).unwrap();
        for (x, y) in a.taps().iter().zip(b.taps()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!((a.energy() - 1.0).abs() < 1e-12);
        assert!(a.is_normalized());
    }

    #[test]
    fn all_zero_response_is_degenerate() {
        let grid = TimeGrid {
            start: 0.0,
            step: 0.1,
            len: 50,
        };
        let ch = vec![0.0; 50];
        assert!(matches!(
            discretize(&ch, &grid, 1.0, SamplingPhase::Fixed(0.0), 3),
            Err(Error::DegenerateChannel)
        ));
    }

    #[test]
    fn phase_outside_symbol_rejected() {
        let grid = TimeGrid {
            start: 0.0,
            step: 0.1,
            len: 50,
        };
        let ch = vec![1.0; 50];
        assert!(discretize(&ch, &grid, 1.0, SamplingPhase::Fixed(1.0), 3).is_err());
    }
}
