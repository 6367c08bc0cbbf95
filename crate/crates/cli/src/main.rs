use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fluctana::ingest::{CsvSchema, Period};
use fluctana::surrogate::{self, Marginal, Seed};

use fluctana_cli::config::{
    self, AcfParams, HurstRollParams, LpplParamsConfig, MfccaParams, MfdfaParams, RhoParams,
    RunConfig, SurrogateParams, TailsParams,
};
use fluctana_cli::dates;
use fluctana_cli::output::{fmt_f64, write_csv};
use fluctana_cli::pipeline::{self, PreparedSeries};

/// Batch statistical analysis of high-frequency market price series:
/// return tails, autocorrelation, multifractal (cross-)fluctuation analysis,
/// rolling Hurst exponents, surrogate tests, and log-periodic trend fits.
#[derive(Parser)]
#[command(name = "fluctana", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputOpts {
    /// Exchange CSV export (header row; timestamp and price columns required)
    #[arg(long)]
    input: PathBuf,
    /// Slice start: epoch seconds, YYYY-MM-DD, or YYYY-MM-DDTHH:MM:SS (UTC)
    #[arg(long)]
    from: Option<String>,
    /// Slice end (exclusive), same formats as --from
    #[arg(long)]
    to: Option<String>,
    /// Grid resolution in seconds
    #[arg(long, default_value_t = 60)]
    bin_seconds: u32,
    /// Timestamp column name (default: timestamp, then time)
    #[arg(long)]
    timestamp_col: Option<String>,
    /// Price column name (default: price, then close)
    #[arg(long)]
    price_col: Option<String>,
    /// Base-volume column name (default: volume, volume_base, vol)
    #[arg(long)]
    volume_col: Option<String>,
    /// Quote-volume column name (default: volume_quote, volume_currency)
    #[arg(long)]
    volume_quote_col: Option<String>,
    /// Return lag in bins
    #[arg(long, default_value_t = 1)]
    delta_t: usize,
}

impl InputOpts {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            timestamp: self.timestamp_col.clone(),
            price: self.price_col.clone(),
            volume_base: self.volume_col.clone(),
            volume_quote: self.volume_quote_col.clone(),
        }
    }

    fn period(&self) -> anyhow::Result<Option<Period>> {
        match (&self.from, &self.to) {
            (None, None) => Ok(None),
            _ => {
                let start = self
                    .from
                    .as_deref()
                    .map(dates::parse_time_flag)
                    .transpose()?
                    .unwrap_or(i64::MIN);
                let end = self
                    .to
                    .as_deref()
                    .map(dates::parse_time_flag)
                    .transpose()?
                    .unwrap_or(i64::MAX);
                Ok(Some(Period { start, end }))
            }
        }
    }

    fn prepare(&self) -> anyhow::Result<PreparedSeries> {
        pipeline::prepare_series(
            &self.input,
            &self.schema(),
            self.period()?,
            self.bin_seconds,
            self.delta_t,
        )
    }
}

/// Either a price CSV (--input, paired internally) or two plain value files.
#[derive(Args)]
struct PairOpts {
    /// Exchange CSV; pairs per-period volatility with traded volume
    #[arg(long, conflicts_with_all = ["x", "y"])]
    input: Option<PathBuf>,
    /// First value series (one float per line, optional header)
    #[arg(long, requires = "y")]
    x: Option<PathBuf>,
    /// Second value series
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long, default_value_t = 60)]
    bin_seconds: u32,
    #[arg(long)]
    timestamp_col: Option<String>,
    #[arg(long)]
    price_col: Option<String>,
    #[arg(long)]
    volume_col: Option<String>,
    #[arg(long)]
    volume_quote_col: Option<String>,
    #[arg(long, default_value_t = 1)]
    delta_t: usize,
}

type Pairing = (&'static str, &'static str);

impl PairOpts {
    fn series_pair(&self) -> anyhow::Result<(Vec<f64>, Vec<f64>, Pairing)> {
        if let (Some(x), Some(y)) = (&self.x, &self.y) {
            return Ok((load_values(x)?, load_values(y)?, pipeline::GENERIC_PAIRING));
        }
        let Some(input) = &self.input else {
            bail!("provide either --input or both --x and --y");
        };
        let opts = InputOpts {
            input: input.clone(),
            from: self.from.clone(),
            to: self.to.clone(),
            bin_seconds: self.bin_seconds,
            timestamp_col: self.timestamp_col.clone(),
            price_col: self.price_col.clone(),
            volume_col: self.volume_col.clone(),
            volume_quote_col: self.volume_quote_col.clone(),
            delta_t: self.delta_t,
        };
        let prepared = opts.prepare()?;
        let (x, y) = pipeline::volatility_volume_pair(&prepared);
        Ok((x, y, pipeline::VOLATILITY_VOLUME_PAIRING))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Regularize a CSV export onto the time grid and report gap diagnostics
    Ingest {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Autocorrelation of normalized returns and volatility
    Acf {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Largest lag in bins (0 = min(length/10, 100000))
        #[arg(long, default_value_t = 0)]
        max_lag: usize,
        #[arg(long, default_value_t = 25)]
        lags_per_decade: usize,
    },
    /// Empirical CCDF and Hill tail-exponent fit of |normalized returns|
    Tails {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        tail_fraction: f64,
        /// Pick the tail fraction by Kolmogorov-Smirnov scan
        #[arg(long)]
        ks_scan: bool,
    },
    /// Multifractal detrended fluctuation analysis of normalized returns
    Mfdfa {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = -4.0)]
        q_min: f64,
        #[arg(long, default_value_t = 4.0)]
        q_max: f64,
        #[arg(long, default_value_t = 0.2)]
        q_step: f64,
        #[arg(long, default_value_t = 10)]
        s_min: usize,
        /// 0 = length / 4
        #[arg(long, default_value_t = 0)]
        s_max: usize,
        #[arg(long, default_value_t = 40)]
        n_scales: usize,
        /// Detrending polynomial order
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 100)]
        fit_lo: usize,
        /// 0 = min(10000, length / 10)
        #[arg(long, default_value_t = 0)]
        fit_hi: usize,
    },
    /// Rolling-window Hurst exponent h(2)
    HurstRoll {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 43_200)]
        window_bins: usize,
        #[arg(long, default_value_t = 43_200)]
        step_bins: usize,
        /// Calendar-month windows (UTC) instead of fixed bin counts
        #[arg(long)]
        monthly: bool,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 100)]
        fit_lo: usize,
        #[arg(long, default_value_t = 0)]
        fit_hi: usize,
        /// Flag windows whose zero-return fraction exceeds this cap
        #[arg(long, default_value_t = 0.5)]
        zero_cap: f64,
    },
    /// Cross fluctuation functions F_xy(q,s) and lambda_q exponents
    Mfcca {
        #[command(flatten)]
        pair: PairOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.4)]
        q_min: f64,
        #[arg(long, default_value_t = 4.0)]
        q_max: f64,
        #[arg(long, default_value_t = 0.2)]
        q_step: f64,
        #[arg(long, default_value_t = 10)]
        s_min: usize,
        #[arg(long, default_value_t = 0)]
        s_max: usize,
        #[arg(long, default_value_t = 40)]
        n_scales: usize,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 100)]
        fit_lo: usize,
        #[arg(long, default_value_t = 0)]
        fit_hi: usize,
    },
    /// q-dependent detrended cross-correlation coefficient rho_q(s)
    Rho {
        #[command(flatten)]
        pair: PairOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated q values
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0, 4.0])]
        q: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        s_min: usize,
        #[arg(long, default_value_t = 1000)]
        s_max: usize,
        #[arg(long, default_value_t = 20)]
        n_scales: usize,
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Surrogate series (shuffle / Fourier phase randomization) with a
    /// multifractality comparison against the original
    Surrogate {
        /// Exchange CSV; surrogates are built from its normalized returns
        #[arg(long, conflicts_with = "values")]
        input: Option<PathBuf>,
        /// Plain value series to surrogate instead of a price CSV
        #[arg(long)]
        values: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// shuffle | phase
        #[arg(long, default_value = "phase")]
        method: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        replicas: usize,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 60)]
        bin_seconds: u32,
        #[arg(long, default_value_t = 1)]
        delta_t: usize,
    },
    /// Generate synthetic oracle series
    Synth {
        #[command(subcommand)]
        kind: SynthCommand,
    },
    /// Log-periodic power-law fit of daily log closes around a critical time
    Lppl {
        #[command(flatten)]
        input: InputOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Critical time (epoch seconds or date)
        #[arg(long)]
        tc: String,
        /// bubble | antibubble
        #[arg(long, default_value = "bubble")]
        phase: String,
        /// Preferred scaling factor
        #[arg(long, default_value_t = 2.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.1)]
        m_min: f64,
        #[arg(long, default_value_t = 0.9)]
        m_max: f64,
        #[arg(long, default_value_t = fluctana::lppl::DEFAULT_MULTISTART)]
        multistart: usize,
        /// Scan critical-time candidates from this date (with --scan-to)
        #[arg(long, requires = "scan_to")]
        scan_from: Option<String>,
        /// Scan critical-time candidates up to this date
        #[arg(long, requires = "scan_from")]
        scan_to: Option<String>,
        #[arg(long, default_value_t = 1)]
        scan_step_days: u32,
    },
    /// Run a config-driven pipeline over named period slices
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured input file
        #[arg(long)]
        input: Option<PathBuf>,
        /// Override the configured output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate a pipeline output tree into one summary JSON
    Report {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Multiplicative binomial cascade of 2^levels points, unit mean
    Cascade {
        #[arg(long, default_value_t = 16)]
        levels: u32,
        #[arg(long, default_value_t = 0.6)]
        a: f64,
        /// Shuffle the weight pair per cell (omit for the deterministic measure)
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "cascade.csv")]
        out: PathBuf,
    },
    /// I.i.d. noise with a gaussian or student-t marginal
    Noise {
        #[arg(long, default_value_t = 131_072)]
        n: usize,
        /// gaussian | student-t
        #[arg(long, default_value = "gaussian")]
        marginal: String,
        /// Degrees of freedom for student-t
        #[arg(long)]
        df: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "noise.csv")]
        out: PathBuf,
    },
}

/// One float per line; a single non-numeric header line is tolerated.
fn load_values(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => bail!("{}:{}: not a number: {:?}", path.display(), i + 1, line),
        }
    }
    if out.is_empty() {
        bail!("{} contains no values", path.display());
    }
    Ok(out)
}

fn write_values(path: &Path, values: &[f64]) -> anyhow::Result<()> {
    write_csv(path, &["value"], values.iter().map(|&v| vec![fmt_f64(v)]))
}

fn ensure_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create output directory {}", path.display()))
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { input, out } => {
            let prepared = input.prepare()?;
            ensure_dir(&out)?;
            pipeline::write_ingest_outputs(&out, &prepared.series, &prepared.diagnostics)?;
            println!(
                "{} bins ({} forward-filled) -> {}",
                prepared.series.len(),
                prepared.diagnostics.filled_bins,
                out.display()
            );
        }
        Command::Acf {
            input,
            out,
            max_lag,
            lags_per_decade,
        } => {
            let prepared = input.prepare()?;
            ensure_dir(&out)?;
            pipeline::run_acf(
                &out,
                &prepared,
                &AcfParams {
                    max_lag,
                    lags_per_decade,
                },
            )?;
            println!("acf_returns.csv, acf_volatility.csv -> {}", out.display());
        }
        Command::Tails {
            input,
            out,
            tail_fraction,
            ks_scan,
        } => {
            let prepared = input.prepare()?;
            ensure_dir(&out)?;
            pipeline::run_tails(
                &out,
                &prepared,
                &TailsParams {
                    tail_fraction,
                    ks_scan,
                },
            )?;
            println!("ccdf.csv, tailfit.json -> {}", out.display());
        }
        Command::Mfdfa {
            input,
            out,
            q_min,
            q_max,
            q_step,
            s_min,
            s_max,
            n_scales,
            order,
            fit_lo,
            fit_hi,
        } => {
            let prepared = input.prepare()?;
            ensure_dir(&out)?;
            pipeline::run_mfdfa(
                &out,
                &prepared.returns_norm.values,
                &MfdfaParams {
                    q_min,
                    q_max,
                    q_step,
                    s_min,
                    s_max,
                    n_scales,
                    order,
                    fit_lo,
                    fit_hi,
                },
            )?;
            println!(
                "fqs.csv, hurst.csv, spectrum.csv, mfdfa.json -> {}",
                out.display()
            );
        }
        Command::HurstRoll {
            input,
            out,
            window_bins,
            step_bins,
            monthly,
            order,
            fit_lo,
            fit_hi,
            zero_cap,
        } => {
            let prepared = input.prepare()?;
            ensure_dir(&out)?;
            pipeline::run_hurst_roll(
                &out,
                &prepared,
                &HurstRollParams {
                    window_bins,
                    step_bins,
                    monthly,
                    order,
                    fit_lo,
                    fit_hi,
                    zero_cap,
                },
            )?;
            println!("hurst_roll.csv -> {}", out.display());
        }
        Command::Mfcca {
            pair,
            out,
            q_min,
            q_max,
            q_step,
            s_min,
            s_max,
            n_scales,
            order,
            fit_lo,
            fit_hi,
        } => {
            let (x, y, pairing) = pair.series_pair()?;
            ensure_dir(&out)?;
            pipeline::write_cross_outputs(
                &out,
                &x,
                &y,
                &MfccaParams {
                    q_min,
                    q_max,
                    q_step,
                    s_min,
                    s_max,
                    n_scales,
                    order,
                    fit_lo,
                    fit_hi,
                },
                pairing,
            )?;
            println!("fxy.csv, lambda.csv, mfcca.json -> {}", out.display());
        }
        Command::Rho {
            pair,
            out,
            q,
            s_min,
            s_max,
            n_scales,
            order,
        } => {
            let (x, y, pairing) = pair.series_pair()?;
            ensure_dir(&out)?;
            pipeline::write_rho_outputs(
                &out,
                &x,
                &y,
                &RhoParams {
                    q,
                    s_min,
                    s_max,
                    n_scales,
                    order,
                },
                pairing,
            )?;
            println!("rho.csv, rho.json -> {}", out.display());
        }
        Command::Surrogate {
            input,
            values,
            out,
            method,
            seed,
            replicas,
            from,
            to,
            bin_seconds,
            delta_t,
        } => {
            let series_values = match (input, values) {
                (_, Some(path)) => load_values(&path)?,
                (Some(input), None) => {
                    let opts = InputOpts {
                        input,
                        from,
                        to,
                        bin_seconds,
                        timestamp_col: None,
                        price_col: None,
                        volume_col: None,
                        volume_quote_col: None,
                        delta_t,
                    };
                    opts.prepare()?.returns_norm.values
                }
                (None, None) => bail!("provide --input or --values"),
            };
            ensure_dir(&out)?;
            pipeline::run_surrogate(
                &out,
                &series_values,
                &SurrogateParams {
                    method,
                    replicas,
                    mfdfa: MfdfaParams::default(),
                },
                seed,
            )?;
            println!("surrogate replicas and surrogate.json -> {}", out.display());
        }
        Command::Synth { kind } => match kind {
            SynthCommand::Cascade {
                levels,
                a,
                seed,
                out,
            } => {
                let cells = surrogate::binomial_cascade(levels, a, seed.map(Seed))?;
                write_values(&out, &cells)?;
                println!("{} cascade cells -> {}", cells.len(), out.display());
            }
            SynthCommand::Noise {
                n,
                marginal,
                df,
                seed,
                out,
            } => {
                let marginal = match marginal.as_str() {
                    "gaussian" => Marginal::Gaussian,
                    "student-t" => Marginal::StudentT {
                        df: df.unwrap_or(3.0),
                    },
                    other => bail!("unknown marginal {:?} (use gaussian or student-t)", other),
                };
                let noise = surrogate::white_noise(n, Seed(seed), marginal)?;
                write_values(&out, &noise)?;
                println!("{} samples -> {}", noise.len(), out.display());
            }
        },
        Command::Lppl {
            input,
            out,
            tc,
            phase,
            lambda,
            m_min,
            m_max,
            multistart,
            scan_from,
            scan_to,
            scan_step_days,
        } => {
            let from = input.from.clone();
            let to = input.to.clone();
            let prepared = input.prepare()?;
            ensure_dir(&out)?;
            pipeline::run_lppl(
                &out,
                &prepared.series,
                &LpplParamsConfig {
                    tc,
                    phase,
                    lambda,
                    from,
                    to,
                    m_min,
                    m_max,
                    multistart,
                    scan_from,
                    scan_to,
                    scan_step_days,
                },
            )?;
            println!("lppl.json, lppl_curve.csv -> {}", out.display());
        }
        Command::Run {
            config,
            input,
            out,
            seed,
        } => {
            let mut config: RunConfig = config::load_config(&config)?;
            if let Some(input) = input {
                config.input = input;
            }
            if let Some(out) = out {
                config.out_dir = out;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let dir = pipeline::run_pipeline(&config)?;
            println!("pipeline complete -> {}", dir.display());
        }
        Command::Report { run_dir, out } => {
            let path = pipeline::emit_report(&run_dir, out.as_deref())?;
            println!("summary -> {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::FAILURE
        }
    }
}
