//! Experiment harness: BER sweeps, EXIT charts and channel dumps, with the
//! result files the command-line tool writes.
//!
//! Every frame and EXIT grid point draws its randomness from a seed derived
//! from the master seed and its own index, and frames are folded into the
//! running totals in index order. Output therefore never depends on the
//! number of worker threads.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSetup;
use crate::config::{channel_preset, ExperimentConfig, PRESETS};
use crate::error::{Error, Result};
use crate::exit::{exit_grid, inner_exit_curve, outer_exit_curve, tunnel_check, ExitCurve, InnerSetup, TunnelVerdict};
use crate::noise::derive_seed;
use crate::poly::BinaryPolynomial;
use crate::trellis::{build_isi_trellis, build_precoded_isi_trellis_with, build_precoder, build_rsc_trellis, TrellisOptions};
use crate::turbo::{snr_to_ebn0_db, FrameResult, MetricKind, TurboSystem};
use crate::siso::ChannelMetric;

/// Stop a BER point once `min_errors` bit errors or `max_bits` bits are in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_errors: 200,
            max_bits: 100_000_000,
        }
    }
}

impl StopRule {
    fn done(&self, errors: u64, bits: u64) -> bool {
        errors >= self.min_errors || bits >= self.max_bits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ebn0_db: f64,
    pub frames_run: u64,
    pub bits_run: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    pub mean_iterations: f64,
    pub degenerate_frames: u64,
    pub master_seed: u64,
    /// Kept out of `ber.csv` so the file is reproducible byte for byte.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl BerPoint {
    /// Binomial standard error of `ber`.
    pub fn standard_error(&self) -> f64 {
        if self.bits_run == 0 {
            return 0.0;
        }
        (self.ber * (1.0 - self.ber) / self.bits_run as f64).sqrt()
    }

    pub fn degenerate_fraction(&self) -> f64 {
        let attempted = self.frames_run + self.degenerate_frames;
        if attempted == 0 {
            0.0
        } else {
            self.degenerate_frames as f64 / attempted as f64
        }
    }
}

/// Seed of frame `frame` at `snr_db`.
pub fn frame_seed(master: u64, snr_db: f64, frame: u64) -> u64 {
    derive_seed(master, &[snr_db.to_bits(), frame])
}

/// One BER point. Frames run in parallel batches on the current rayon pool.
pub fn run_ber_point(cfg: &ExperimentConfig, snr_db: f64, stop: StopRule) -> Result<BerPoint> {
    let start = Instant::now();
    let sys = TurboSystem::new(cfg.system(snr_db)?)?;
    let batch = (2 * rayon::current_num_threads()).max(4) as u64;
    let mut totals = FrameResult::default();
    let (mut frames, mut frame_errors, mut degenerate, mut iterations) = (0u64, 0u64, 0u64, 0u64);
    let mut next = 0u64;
    'outer: loop {
        let results: Vec<Result<FrameResult>> = (next..next + batch)
            .into_par_iter()
            .map(|f| sys.run_frame(frame_seed(cfg.seed, snr_db, f)))
            .collect();
        next += batch;
        for r in results {
            match r {
                Ok(fr) => {
                    frames += 1;
                    totals.bits += fr.bits;
                    totals.bit_errors += fr.bit_errors;
                    frame_errors += fr.frame_error as u64;
                    iterations += fr.iterations as u64;
                }
                Err(Error::NumericalDegeneracy { step }) => {
                    log::warn!("degenerate frame at {snr_db} dB (step {step}); skipped");
                    degenerate += 1;
                }
                Err(e) => return Err(e),
            }
            let attempted_bits = (frames + degenerate) * cfg.frame.info_len as u64;
            if stop.done(totals.bit_errors, totals.bits.max(attempted_bits)) {
                break 'outer;
            }
        }
    }
    let ber = if totals.bits > 0 { totals.bit_errors as f64 / totals.bits as f64 } else { 0.0 };
    let fer = if frames > 0 { frame_errors as f64 / frames as f64 } else { 0.0 };
    Ok(BerPoint {
        snr_db,
        ebn0_db: snr_to_ebn0_db(snr_db, sys.rate()),
        frames_run: frames,
        bits_run: totals.bits,
        bit_errors: totals.bit_errors,
        frame_errors,
        ber,
        fer,
        mean_iterations: if frames > 0 { iterations as f64 / frames as f64 } else { 0.0 },
        degenerate_frames: degenerate,
        master_seed: cfg.seed,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_ber_sweep(cfg: &ExperimentConfig, snrs: &[f64], stop: StopRule) -> Result<Vec<BerPoint>> {
    snrs.iter()
        .map(|&snr| {
            let p = run_ber_point(cfg, snr, stop)?;
            log::info!(
                "{}: {:.2} dB ber {:.3e} ({} errors / {} bits, {:.1} s)",
                cfg.name,
                snr,
                p.ber,
                p.bit_errors,
                p.bits_run,
                p.wall_seconds
            );
            Ok(p)
        })
        .collect()
}

/// SNR where the BER curve crosses `target`, interpolating log10(BER)
/// linearly between the bracketing points. A point with no errors counts
/// as one error so the crossing stays finite.
pub fn snr_at_ber(points: &[BerPoint], target: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.bits_run > 0)
        .map(|p| (p.snr_db, p.ber.max(1.0 / p.bits_run as f64)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2).find(|w| w[0].1 >= target && w[1].1 < target).map(|w| {
        let (s0, b0) = (w[0].0, w[0].1.log10());
        let (s1, b1) = (w[1].0, w[1].1.log10());
        s0 + (target.log10() - b0) * (s1 - s0) / (b1 - b0)
    })
}

pub fn write_ber_csv(path: &Path, points: &[BerPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ber_csv(path: &Path) -> Result<Vec<BerPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub precoder: Option<BinaryPolynomial>,
    pub curve: ExitCurve,
    pub verdict: TunnelVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitOutcome {
    pub snr_db: f64,
    pub outer: ExitCurve,
    pub inner: Vec<InnerResult>,
}

impl ExitOutcome {
    pub fn open_precoders(&self) -> Vec<Option<BinaryPolynomial>> {
        self.inner.iter().filter(|r| r.verdict.open).map(|r| r.precoder).collect()
    }
}

pub fn precoder_label(p: &Option<BinaryPolynomial>) -> String {
    match p {
        Some(p) => format!("inner 1/({p})"),
        None => "inner no precoder".to_string(),
    }
}

/// File-name tag: the octal feedback mask, or `none`.
pub fn precoder_tag(p: &Option<BinaryPolynomial>) -> String {
    match p {
        Some(p) => format!("o{:o}", p.mask()),
        None => "none".to_string(),
    }
}

/// Outer curve plus one inner curve per precoder, with tunnel verdicts.
pub fn run_exit(
    cfg: &ExperimentConfig,
    snr_db: f64,
    precoders: &[Option<BinaryPolynomial>],
) -> Result<ExitOutcome> {
    let grid = exit_grid(cfg.exit.grid_step);
    let samples = cfg.exit.samples;
    let code = build_rsc_trellis(&cfg.code.feedforward, &cfg.code.feedback)?;
    let outer = outer_exit_curve(&code, "outer", &grid, samples, derive_seed(cfg.seed, &[0xE0]))?;
    let ch = cfg.channel()?;
    let noise = cfg.noise(snr_db)?;
    let metric = match cfg.code.metric {
        MetricKind::Mixture => ChannelMetric::Mixture(noise.clone()),
        MetricKind::Gaussian => ChannelMetric::mismatched_gaussian(&noise),
    };
    let opts = TrellisOptions {
        allow_precoder_memory_excess: cfg.code.allow_precoder_memory_excess,
        ..TrellisOptions::default()
    };
    let mut inner = Vec::with_capacity(precoders.len());
    for p in precoders {
        let trellis = match p {
            Some(f) => build_precoded_isi_trellis_with(&build_precoder(f)?, &ch, cfg.code.mapping, opts)?,
            None => build_isi_trellis(&ch, cfg.code.mapping)?,
        };
        let setup = InnerSetup {
            trellis: &trellis,
            noise: &noise,
            metric: &metric,
            noiseless: cfg.noise.noiseless,
        };
        let seed = derive_seed(cfg.seed, &[0xE1, p.map_or(0, |f| f.mask() as u64)]);
        let curve = inner_exit_curve(&setup, &precoder_label(p), Some(snr_db), &grid, samples, seed)?;
        let verdict = tunnel_check(&curve, &outer);
        log::info!("{}: tunnel {}", curve.label, if verdict.open { "open" } else { "closed" });
        inner.push(InnerResult {
            precoder: *p,
            curve,
            verdict,
        });
    }
    Ok(ExitOutcome { snr_db, outer, inner })
}

#[derive(Serialize)]
struct ExitRow<'a> {
    #[serde(rename = "I_A")]
    ia: f64,
    #[serde(rename = "I_E")]
    ie: f64,
    label: &'a str,
    snr_db: Option<f64>,
}

fn write_curve_csv(path: &Path, curve: &ExitCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for &(ia, ie) in &curve.points {
        w.serialize(ExitRow {
            ia,
            ie,
            label: &curve.label,
            snr_db: curve.snr_db,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `exit_outer.csv`, one `exit_inner_<tag>.csv` per precoder, the
/// gnuplot layout `exit_chart.dat` and `tunnel.csv`.
pub fn write_exit_outputs(dir: &Path, outcome: &ExitOutcome) -> Result<()> {
    write_curve_csv(&dir.join("exit_outer.csv"), &outcome.outer)?;
    for r in &outcome.inner {
        write_curve_csv(&dir.join(format!("exit_inner_{}.csv", precoder_tag(&r.precoder))), &r.curve)?;
    }
    // one gnuplot data block per curve; the outer curve is stored with its
    // axes swapped so it plots directly against the inner curves
    let mut dat = BufWriter::new(File::create(dir.join("exit_chart.dat"))?);
    writeln!(dat, "# EXIT chart at {} dB; columns: x y", outcome.snr_db)?;
    for r in &outcome.inner {
        writeln!(dat, "# {}", r.curve.label)?;
        for (ia, ie) in &r.curve.points {
            writeln!(dat, "{ia} {ie}")?;
        }
        writeln!(dat, "\n")?;
    }
    writeln!(dat, "# outer (swapped axes)")?;
    for (ia, ie) in &outcome.outer.points {
        writeln!(dat, "{ie} {ia}")?;
    }
    dat.flush()?;
    let mut w = csv::Writer::from_path(dir.join("tunnel.csv"))?;
    w.write_record(["label", "snr_db", "verdict", "pinch_I_A"])?;
    if outcome.inner.is_empty() {
        w.write_record(["outer only", &outcome.snr_db.to_string(), "n/a", ""])?;
    }
    for r in &outcome.inner {
        w.write_record([
            r.curve.label.as_str(),
            &outcome.snr_db.to_string(),
            if r.verdict.open { "open" } else { "closed" },
            &r.verdict.pinch.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Frequency band of the dumped magnitude response.
pub const DUMP_BAND_HZ: (f64, f64) = (0.5e6, 20e6);
pub const DUMP_STEP_HZ: f64 = 0.05e6;

/// Channel name accepted by `dump_channel`: a channel preset, or an
/// experiment preset whose channel is used.
pub fn resolve_channel_name(name: &str) -> Result<String> {
    if crate::config::CHANNEL_PRESETS.contains(&name) {
        return Ok(name.to_string());
    }
    if PRESETS.iter().any(|(n, _)| *n == name) {
        let cfg = ExperimentConfig::preset(name)?;
        if let Some(p) = cfg.channel.preset {
            return Ok(p);
        }
    }
    Err(Error::Config(format!("unknown channel preset {name:?}")))
}

/// Writes `channel_taps.csv`, and for the physical model also
/// `frequency_response.csv` and `impulse_response.csv`.
pub fn dump_channel(dir: &Path, name: &str) -> Result<Vec<f64>> {
    let name = resolve_channel_name(name)?;
    let ch = channel_preset(&name)?;
    let mut w = csv::Writer::from_path(dir.join("channel_taps.csv"))?;
    w.write_record(["index", "tap"])?;
    for (i, t) in ch.taps().iter().enumerate() {
        w.write_record([i.to_string(), t.to_string()])?;
    }
    w.flush()?;
    if name == "zimmermann-vvf-4path" {
        let setup = ChannelSetup::zimmermann_vvf_4path();
        let mut w = csv::Writer::from_path(dir.join("frequency_response.csv"))?;
        w.write_record(["f_hz", "magnitude", "magnitude_db"])?;
        let (lo, hi) = DUMP_BAND_HZ;
        let n = ((hi - lo) / DUMP_STEP_HZ).round() as usize;
        for i in 0..=n {
            let f = lo + i as f64 * DUMP_STEP_HZ;
            let m = setup.multipath.frequency_response(f)?.norm();
            w.write_record([f.to_string(), m.to_string(), (20.0 * m.log10()).to_string()])?;
        }
        w.flush()?;
        let (grid, resp) = setup.impulse_response()?;
        let mut w = csv::Writer::from_path(dir.join("impulse_response.csv"))?;
        w.write_record(["t_s", "ch"])?;
        for (t, v) in grid.times().iter().zip(&resp) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
    }
    Ok(ch.taps().to_vec())
}

/// Build identifier: `git describe` output when built from a checkout.
pub const VERSION: &str = env!("PLC_TURBO_VERSION");

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub version: &'a str,
    pub command: String,
    pub workers: usize,
    pub master_seed: u64,
    pub snr_db: Vec<f64>,
    /// Wall time per SNR point or per EXIT run.
    pub wall_seconds: Vec<f64>,
    pub config: &'a ExperimentConfig,
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest<'_>) -> Result<()> {
    let text = toml::to_string(manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join("run_manifest.toml"), text)?;
    Ok(())
}
