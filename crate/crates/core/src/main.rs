use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use plc_turbo::config::{parse_snr_range, ExperimentConfig};
use plc_turbo::sim::{self, RunManifest, StopRule};
use plc_turbo::Error;

#[derive(Parser, Debug)]
#[command(name = "plc-turbo", version = sim::VERSION, about = "Precoded turbo equalization experiments for power-line channels")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset (fig3_channel, fig5_exit, fig6_ber_*, uncoded_awgn, noiseless).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// SNR list as a:b:step (inclusive) or a single value, in dB.
    #[arg(long, global = true, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo BER sweep; writes ber.csv.
    Ber {
        #[arg(long)]
        min_errors: Option<u64>,
        #[arg(long)]
        max_bits: Option<u64>,
    },
    /// EXIT curves and tunnel verdicts; writes exit_*.csv.
    Exit {
        /// Comma-separated precoder feedback polynomials; "none" for no precoder.
        #[arg(long, value_delimiter = ',')]
        precoders: Option<Vec<String>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        grid_step: Option<f64>,
    },
    /// Channel taps and response tables of a named channel or preset.
    DumpChannel {
        /// Channel name; defaults to the --preset value.
        name: Option<String>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => return Err(Error::Config("pass --config PATH or --preset NAME".into())),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let common = &cli.common;
    let workers = common.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let out = &common.out;
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    match &cli.command {
        Command::Ber { min_errors, max_bits } => {
            let mut cfg = load(common)?;
            if let Some(s) = &common.snr {
                cfg.sweep.snr_db = parse_snr_range(s)?;
            }
            if let Some(e) = min_errors {
                cfg.sweep.min_errors = *e;
            }
            if let Some(b) = max_bits {
                cfg.sweep.max_bits = *b;
            }
            if cfg.sweep.snr_db.is_empty() {
                return Err(Error::Config("no SNR points; pass --snr or set sweep.snr_db".into()));
            }
            let stop = StopRule {
                min_errors: cfg.sweep.min_errors,
                max_bits: cfg.sweep.max_bits,
            };
            create_dir(out)?;
            let points = pool.install(|| sim::run_ber_sweep(&cfg, &cfg.sweep.snr_db, stop))?;
            sim::write_ber_csv(&out.join("ber.csv"), &points)?;
            sim::write_manifest(
                out,
                &RunManifest {
                    version: sim::VERSION,
                    command: command_line,
                    workers,
                    master_seed: cfg.seed,
                    snr_db: cfg.sweep.snr_db.clone(),
                    wall_seconds: points.iter().map(|p| p.wall_seconds).collect(),
                    config: &cfg,
                },
            )?;
            for p in &points {
                println!("{:>7.2} dB  ber {:.3e}  ({} / {} bits)", p.snr_db, p.ber, p.bit_errors, p.bits_run);
            }
            let worst = points.iter().map(|p| p.degenerate_fraction()).fold(0.0, f64::max);
            if worst > cfg.sweep.max_degenerate_fraction {
                return Err(Error::Contract(format!(
                    "numerically degenerate frame fraction {worst} exceeds {}",
                    cfg.sweep.max_degenerate_fraction
                )));
            }
        }
        Command::Exit {
            precoders,
            samples,
            grid_step,
        } => {
            let mut cfg = load(common)?;
            if let Some(p) = precoders {
                cfg.exit.precoders = p.iter().filter(|s| !s.is_empty()).cloned().collect();
            }
            if let Some(s) = samples {
                cfg.exit.samples = *s;
            }
            if let Some(g) = grid_step {
                cfg.exit.grid_step = *g;
            }
            if let Some(s) = &common.snr {
                cfg.exit.snr_db = parse_snr_range(s)?[0];
            }
            cfg.validate()?;
            let list = cfg.exit_precoders()?;
            create_dir(out)?;
            let start = Instant::now();
            let outcome = pool.install(|| sim::run_exit(&cfg, cfg.exit.snr_db, &list))?;
            sim::write_exit_outputs(out, &outcome)?;
            sim::write_manifest(
                out,
                &RunManifest {
                    version: sim::VERSION,
                    command: command_line,
                    workers,
                    master_seed: cfg.seed,
                    snr_db: vec![cfg.exit.snr_db],
                    wall_seconds: vec![start.elapsed().as_secs_f64()],
                    config: &cfg,
                },
            )?;
            if outcome.inner.is_empty() {
                println!("outer curve only; tunnel verdict n/a");
            }
            for r in &outcome.inner {
                let verdict = if r.verdict.open { "open".to_string() } else { format!("closed at I_A = {:.2}", r.verdict.pinch.unwrap_or(0.0)) };
                println!("{:<28} {verdict}", r.curve.label);
            }
        }
        Command::DumpChannel { name } => {
            let name = name
                .clone()
                .or_else(|| common.preset.clone())
                .ok_or_else(|| Error::Config("dump-channel needs a channel or preset name".into()))?;
            sim::resolve_channel_name(&name)?;
            create_dir(out)?;
            let taps = sim::dump_channel(out, &name)?;
            let shown: Vec<String> = taps.iter().map(|t| format!("{t:.4}")).collect();
            println!("taps: {}", shown.join(" "));
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(Error::from)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Domain(_) | Error::Complexity { .. } => ExitCode::from(2),
                Error::NumericalDegeneracy { .. } | Error::Contract(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
