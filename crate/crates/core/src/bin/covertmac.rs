use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use covertmac::channel::random_channel;
use covertmac::experiments::{self, SchemeOptions, Table, Unit};
use covertmac::process::AlphaSchedule;
use covertmac::region::{DEFAULT_GRID, DEFAULT_SAMPLES};
use covertmac::warden::default_thresholds;
use covertmac::{ChannelPair, Error, Result, RhoVector};

/// Covert throughput regions and random-coding experiments for
/// binary-input multiple-access channels.
#[derive(Parser)]
#[command(name = "covertmac", version)]
struct Cli {
    /// Report information quantities in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ChannelSource {
    /// Channel description (JSON).
    #[arg(long, conflicts_with = "random")]
    channel: Option<PathBuf>,
    /// Draw a random channel instead, given as K,Y,Z.
    #[arg(long, value_name = "K,Y,Z")]
    random: Option<String>,
    /// Seed for --random.
    #[arg(long, default_value_t = 1)]
    channel_seed: u64,
}

impl ChannelSource {
    fn load(&self) -> Result<ChannelPair> {
        match (&self.channel, &self.random) {
            (Some(path), _) => ChannelPair::load(path),
            (None, Some(dims)) => {
                let parts: Vec<usize> = dims
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad --random value {dims:?}"))))
                    .collect::<Result<_>>()?;
                match parts[..] {
                    [k, y, z] => random_channel(k, y, z, self.channel_seed),
                    _ => Err(Error::InvalidParameter("--random takes K,Y,Z".into())),
                }
            }
            (None, None) => Err(Error::InvalidParameter("one of --channel or --random is required".into())),
        }
    }
}

#[derive(Args)]
struct SchemeArgs {
    /// Blocklength.
    #[arg(long)]
    n: usize,
    /// Rate slack in (0,1).
    #[arg(long, default_value_t = covertmac::coding::DEFAULT_MU)]
    mu: f64,
    /// Mixing weights, comma separated; uniform when omitted.
    #[arg(long)]
    rho: Option<RhoVector>,
    /// Schedule coefficient a in alpha_n = a n^-e.
    #[arg(long, default_value_t = 1.0)]
    alpha_coefficient: f64,
    /// Schedule exponent e in (1/2, 1).
    #[arg(long, default_value_t = 2.0 / 3.0)]
    alpha_exponent: f64,
}

impl SchemeArgs {
    fn options(&self, channel: &ChannelPair) -> Result<SchemeOptions> {
        Ok(SchemeOptions {
            n: self.n,
            mu: self.mu,
            rho: self.rho.clone().unwrap_or_else(|| RhoVector::uniform(channel.users())),
            schedule: AlphaSchedule::new(self.alpha_coefficient, self.alpha_exponent)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the channel against the modelling assumptions.
    Validate {
        #[command(flatten)]
        source: ChannelSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the throughput region over mixing weights.
    Region {
        #[command(flatten)]
        source: ChannelSource,
        /// Grid points (two users) or samples (more users).
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical checks of the covert-process identities and bounds.
    Lemmas {
        #[command(flatten)]
        source: ChannelSource,
        /// Random mixing weights for the identity checks.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random-coding error rate and warden metrics at one blocklength.
    Simulate {
        #[command(flatten)]
        source: ChannelSource,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Monte Carlo samples for the warden divergences (0 skips them).
        #[arg(long, default_value_t = 1000)]
        warden_samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Likelihood-ratio detection by the warden.
    Detect {
        #[command(flatten)]
        source: ChannelSource,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = 50_000)]
        trials: usize,
        /// Single likelihood-ratio threshold instead of the default sweep.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized throughput and error rate along a blocklength ladder.
    Scaling {
        #[command(flatten)]
        source: ChannelSource,
        /// Blocklengths, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000, 4000])]
        ns: Vec<usize>,
        #[arg(long, default_value_t = covertmac::coding::DEFAULT_MU)]
        mu: f64,
        #[arg(long)]
        rho: Option<RhoVector>,
        #[arg(long, default_value_t = 1.0)]
        alpha_coefficient: f64,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        alpha_exponent: f64,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 200)]
        warden_samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_table(out: &Option<PathBuf>, table: &Table) -> Result<()> {
    emit(out, &table.to_csv()?)
}

fn emit_json(out: &Option<PathBuf>, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("COVERTMAC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("COVERTMAC_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Exit status 0 on success; a failed validation maps to 2.
fn run(cli: Cli) -> Result<u8> {
    configure_threads()?;
    let unit = if cli.bits { Unit::Bits } else { Unit::Nats };
    match cli.command {
        Command::Validate { source, out } => {
            let report = experiments::validate(&source.load()?);
            emit_json(&out, &report)?;
            Ok(if report.all_pass { 0 } else { 2 })
        }
        Command::Region { source, grid, seed, out } => {
            let channel = source.load()?;
            let points = grid.unwrap_or(if channel.users() == 2 { DEFAULT_GRID } else { DEFAULT_SAMPLES });
            let (sweep, table) = experiments::region_table(&channel, points, seed, unit)?;
            if !sweep.skipped.is_empty() {
                eprintln!("warning: skipped {} degenerate grid points", sweep.skipped.len());
            }
            emit_table(&out, &table)?;
            Ok(0)
        }
        Command::Lemmas { source, samples, seed, out } => {
            let report = experiments::lemma_battery(&source.load()?, samples, seed)?;
            emit_json(&out, &report)?;
            Ok(0)
        }
        Command::Simulate { source, scheme, trials, warden_samples, seed, out } => {
            let channel = source.load()?;
            let outcome = experiments::simulate(&channel, &scheme.options(&channel)?, trials, warden_samples, seed)?;
            if warden_samples > 0 && outcome.warden.is_none() {
                eprintln!("warning: warden metrics skipped, codebook exceeds the enumeration cap");
            }
            emit_table(&out, &experiments::simulate_table(&outcome, unit))?;
            Ok(0)
        }
        Command::Detect { source, scheme, trials, threshold, seed, out } => {
            let channel = source.load()?;
            let thresholds = threshold.map_or_else(default_thresholds, |t| vec![t]);
            let report = experiments::detect(&channel, &scheme.options(&channel)?, trials, seed, &thresholds)?;
            emit_table(&out, &experiments::detect_table(&report))?;
            Ok(0)
        }
        Command::Scaling { source, ns, mu, rho, alpha_coefficient, alpha_exponent, trials, warden_samples, seed, out } => {
            let channel = source.load()?;
            let opts = SchemeOptions {
                n: 0,
                mu,
                rho: rho.unwrap_or_else(|| RhoVector::uniform(channel.users())),
                schedule: AlphaSchedule::new(alpha_coefficient, alpha_exponent)?,
            };
            let rows = experiments::scaling(&channel, &opts, &ns, trials, warden_samples, seed)?;
            emit_table(&out, &experiments::scaling_table(&rows))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
