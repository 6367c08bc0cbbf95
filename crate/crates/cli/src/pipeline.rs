//! Analysis runners shared by the individual subcommands and the
//! config-driven `run` pipeline, plus the report aggregator.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use serde::Serialize;

use fluctana::ingest::{self, CsvSchema, IngestDiagnostics, Period, PriceSeries};
use fluctana::lppl::{self, PhaseKind};
use fluctana::mfcca;
use fluctana::mfdfa::{self, QGrid, ScaleGrid};
use fluctana::returns::{self, ReturnSeries};
use fluctana::stats::{self, SeriesKind, TailMode};
use fluctana::surrogate::{self, Seed};

use crate::config::{
    AcfParams, HurstRollParams, LpplParamsConfig, MfccaParams, MfdfaParams, RhoParams, RunConfig,
    SurrogateParams, TailsParams,
};
use crate::dates;
use crate::output::{fmt_f64, sha256_file, sha256_hex, to_json, write_csv, write_json};

/// Everything the per-period analyses consume.
pub struct PreparedSeries {
    pub series: PriceSeries,
    pub diagnostics: IngestDiagnostics,
    pub returns_raw: ReturnSeries,
    pub returns_norm: ReturnSeries,
    pub volatility: ReturnSeries,
}

pub fn prepare_series(
    input: &Path,
    schema: &CsvSchema,
    period: Option<Period>,
    bin_seconds: u32,
    delta_t: usize,
) -> anyhow::Result<PreparedSeries> {
    let (records, mut diagnostics) = ingest::load_csv(input, schema, period)
        .with_context(|| format!("loading {}", input.display()))?;
    let series = ingest::regularize(&records, bin_seconds)?;
    diagnostics.filled_bins = series.filled_count() as u64;
    let returns_raw = returns::log_returns(&series, delta_t)?;
    let returns_norm = returns::normalize(&returns_raw)?;
    let volatility = returns::volatility(&returns_norm)?;
    Ok(PreparedSeries {
        series,
        diagnostics,
        returns_raw,
        returns_norm,
        volatility,
    })
}

/// series.csv, zero_runs.csv and the ingest diagnostics JSON.
pub fn write_ingest_outputs(
    dir: &Path,
    series: &PriceSeries,
    diagnostics: &IngestDiagnostics,
) -> anyhow::Result<()> {
    write_csv(
        &dir.join("series.csv"),
        &[
            "timestamp",
            "price",
            "volume_base",
            "volume_quote",
            "filled",
        ],
        (0..series.len()).map(|i| {
            vec![
                series.timestamp(i).to_string(),
                fmt_f64(series.prices[i]),
                fmt_f64(series.volumes_base[i]),
                fmt_f64(series.volumes_quote[i]),
                series.filled[i].to_string(),
            ]
        }),
    )?;
    let runs = ingest::zero_return_runs(series)?;
    write_csv(
        &dir.join("zero_runs.csv"),
        &["start_index", "start_timestamp", "length"],
        runs.iter().map(|&(start, len)| {
            vec![
                start.to_string(),
                series.timestamp(start).to_string(),
                len.to_string(),
            ]
        }),
    )?;
    write_json(&dir.join("ingest.json"), diagnostics)?;
    Ok(())
}

pub fn run_tails(
    dir: &Path,
    prepared: &PreparedSeries,
    params: &TailsParams,
) -> anyhow::Result<()> {
    let mode = if params.ks_scan {
        TailMode::KsScan
    } else {
        TailMode::FixedFraction
    };
    let fit = stats::fit_tail_exponent(&prepared.returns_norm.values, params.tail_fraction, mode)?;
    write_csv(
        &dir.join("ccdf.csv"),
        &["abs_return", "p_exceed"],
        fit.ccdf.iter().map(|&(x, p)| vec![fmt_f64(x), fmt_f64(p)]),
    )?;
    write_json(&dir.join("tailfit.json"), &fit)?;
    Ok(())
}

/// Log-spaced integer lags (>= 1) used for the reported autocorrelation grid.
fn report_lags(max_lag: usize, per_decade: usize) -> Vec<usize> {
    let mut lags = Vec::new();
    let decades = (max_lag as f64).log10();
    let n = (decades * per_decade as f64).ceil() as usize + 1;
    for i in 0..=n {
        let lag = 10f64.powf(i as f64 / per_decade as f64).round() as usize;
        if lag >= 1 && lag <= max_lag && lags.last() != Some(&lag) {
            lags.push(lag);
        }
    }
    lags
}

pub fn run_acf(dir: &Path, prepared: &PreparedSeries, params: &AcfParams) -> anyhow::Result<()> {
    let n = prepared.returns_norm.values.len();
    let max_lag = if params.max_lag == 0 {
        (n / 10).min(100_000).max(1)
    } else {
        params.max_lag
    };
    let lags = report_lags(max_lag, params.lags_per_decade);
    for (values, kind, file) in [
        (
            &prepared.returns_norm.values,
            SeriesKind::Returns,
            "acf_returns.csv",
        ),
        (
            &prepared.volatility.values,
            SeriesKind::Volatility,
            "acf_volatility.csv",
        ),
    ] {
        let curve = stats::acf(values, max_lag, kind)?;
        write_csv(
            &dir.join(file),
            &["lag", "acf"],
            lags.iter()
                .map(|&lag| vec![lag.to_string(), fmt_f64(curve.values[lag])]),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct MfdfaSummary {
    #[serde(rename = "H")]
    pub h: Option<f64>,
    #[serde(rename = "H_stderr")]
    pub h_stderr: Option<f64>,
    pub delta_alpha: Option<f64>,
    pub asymmetry: Option<f64>,
    pub alpha_0: Option<f64>,
    pub folded: Option<bool>,
    pub fit_range: (usize, usize),
    pub zero_variance_total: usize,
    pub absent_q: Vec<f64>,
}

/// Full MFDFA of one value series: surface, exponents, spectrum, summary.
pub fn mfdfa_analysis(
    values: &[f64],
    params: &MfdfaParams,
) -> anyhow::Result<(
    mfdfa::FluctuationSurface,
    Option<mfdfa::HurstCurve>,
    Option<mfdfa::SingularitySpectrum>,
    MfdfaSummary,
)> {
    let len = values.len();
    let q_grid = QGrid::uniform(params.q_min, params.q_max, params.q_step)?;
    let scale_grid =
        ScaleGrid::geometric(params.s_min, params.effective_s_max(len), params.n_scales)?;
    let surface = mfdfa::fluctuation_function(values, &q_grid, &scale_grid, params.order)?;
    let fit_range = (params.fit_lo, params.effective_fit_hi(len));
    let curve = match mfdfa::fit_generalized_hurst(&surface, fit_range) {
        Ok(c) => Some(c),
        Err(fluctana::Error::NoUsableScaling) => None,
        Err(e) => return Err(e.into()),
    };
    let spectrum = curve
        .as_ref()
        .and_then(|c| mfdfa::singularity_spectrum(c).ok());
    let h2 = curve.as_ref().and_then(|c| c.h_at(2.0));
    let summary = MfdfaSummary {
        h: h2.map(|p| p.h),
        h_stderr: h2.map(|p| p.stderr),
        delta_alpha: spectrum.as_ref().map(|s| s.delta_alpha),
        asymmetry: spectrum.as_ref().map(|s| s.asymmetry),
        alpha_0: spectrum.as_ref().map(|s| s.alpha_0),
        folded: spectrum.as_ref().map(|s| s.folded),
        fit_range,
        zero_variance_total: surface.zero_variance_total(),
        absent_q: curve
            .as_ref()
            .map(|c| c.absent_q.clone())
            .unwrap_or_default(),
    };
    Ok((surface, curve, spectrum, summary))
}

pub fn run_mfdfa(dir: &Path, values: &[f64], params: &MfdfaParams) -> anyhow::Result<()> {
    let (surface, curve, spectrum, summary) = mfdfa_analysis(values, params)?;
    write_csv(
        &dir.join("fqs.csv"),
        &["q", "s", "f"],
        surface
            .q_grid
            .values()
            .iter()
            .enumerate()
            .flat_map(|(qi, &q)| {
                let surface = &surface;
                surface
                    .scale_grid
                    .values()
                    .iter()
                    .enumerate()
                    .map(move |(si, &s)| {
                        vec![fmt_f64(q), s.to_string(), fmt_f64(surface.value(qi, si))]
                    })
            }),
    )?;
    if let Some(curve) = &curve {
        write_csv(
            &dir.join("hurst.csv"),
            &["q", "h", "stderr"],
            curve
                .points
                .iter()
                .map(|p| vec![fmt_f64(p.q), fmt_f64(p.h), fmt_f64(p.stderr)]),
        )?;
    }
    if let Some(spec) = &spectrum {
        write_csv(
            &dir.join("spectrum.csv"),
            &["q", "alpha", "f_alpha"],
            (0..spec.q.len()).map(|i| {
                vec![
                    fmt_f64(spec.q[i]),
                    fmt_f64(spec.alpha[i]),
                    fmt_f64(spec.f_alpha[i]),
                ]
            }),
        )?;
    }
    write_json(&dir.join("mfdfa.json"), &summary)?;
    Ok(())
}

pub fn run_hurst_roll(
    dir: &Path,
    prepared: &PreparedSeries,
    params: &HurstRollParams,
) -> anyhow::Result<()> {
    let returns = &prepared.returns_raw;
    let series = &prepared.series;
    let bin = series.bin_seconds as i64;
    let header = [
        "window_start",
        "start_bin",
        "window_bins",
        "h",
        "stderr",
        "zero_fraction",
        "quality_ok",
    ];
    let mut rows = Vec::new();
    if params.monthly {
        // Calendar-month windows (UTC); return i spans the prices at bins
        // i and i + delta_t, and is assigned to the window containing bin i.
        let first = series.start;
        let last = series.timestamp(series.len() - 1);
        for (m0, m1) in dates::month_windows(first, last + bin) {
            let start_bin = ((m0 - first) / bin).max(0) as usize;
            let end_bin = (((m1 - first) / bin) as usize).min(returns.values.len());
            if end_bin <= start_bin {
                continue;
            }
            let len = end_bin - start_bin;
            if len < mfdfa::MIN_ROLLING_WINDOW {
                continue;
            }
            let window = &returns.values[start_bin..end_bin];
            let zero_fraction = window.iter().filter(|&&v| v == 0.0).count() as f64 / len as f64;
            let fit_hi = if params.fit_hi == 0 {
                (len / 10).min(10_000)
            } else {
                params.fit_hi
            };
            let (h, stderr, ok) =
                match mfdfa::window_hurst(window, (params.fit_lo, fit_hi), params.order) {
                    Ok(p) => (p.h, p.stderr, zero_fraction <= params.zero_cap),
                    Err(_) => (f64::NAN, f64::NAN, false),
                };
            rows.push(vec![
                m0.to_string(),
                start_bin.to_string(),
                len.to_string(),
                fmt_f64(h),
                fmt_f64(stderr),
                fmt_f64(zero_fraction),
                ok.to_string(),
            ]);
        }
    } else {
        let mut cfg = mfdfa::RollingHurstConfig::new(params.window_bins, params.step_bins);
        cfg.order = params.order;
        cfg.zero_fraction_cap = params.zero_cap;
        if params.fit_hi != 0 {
            cfg.fit_range = Some((params.fit_lo, params.fit_hi));
        } else {
            cfg.fit_range = Some((params.fit_lo, (params.window_bins / 10).min(10_000)));
        }
        for p in mfdfa::rolling_hurst(returns, &cfg)? {
            rows.push(vec![
                series.timestamp(p.start_bin).to_string(),
                p.start_bin.to_string(),
                p.window_bins.to_string(),
                fmt_f64(p.h),
                fmt_f64(p.stderr),
                fmt_f64(p.zero_fraction),
                p.quality_ok.to_string(),
            ]);
        }
    }
    write_csv(&dir.join("hurst_roll.csv"), &header, rows)?;
    Ok(())
}

/// Volatility paired with traded volume on the same grid: volatility of the
/// return over bins [i, i + delta_t] against the volume in the bin the return
/// ends on.
pub fn volatility_volume_pair(prepared: &PreparedSeries) -> (Vec<f64>, Vec<f64>) {
    let delta_t = prepared.returns_norm.delta_t_bins;
    let x = prepared.volatility.values.clone();
    let y = prepared.series.volumes_base[delta_t..].to_vec();
    (x, y)
}

/// Conventions recorded next to every paired cross-analysis output.
#[derive(Serialize)]
struct PairingNote {
    x: &'static str,
    y: &'static str,
    fit_range: Option<(usize, usize)>,
    order: usize,
}

/// The volatility-volume pairing used by the config pipeline; generic
/// `--x/--y` runs record their own label.
pub const VOLATILITY_VOLUME_PAIRING: (&str, &str) = (
    "volatility |normalized log-return| over bins [i, i + delta_t]",
    "raw per-bin traded base volume in bin i + delta_t (no normalization)",
);
pub const GENERIC_PAIRING: (&str, &str) = ("user series x", "user series y");

pub fn write_cross_outputs(
    dir: &Path,
    x: &[f64],
    y: &[f64],
    params: &MfccaParams,
    pairing: (&'static str, &'static str),
) -> anyhow::Result<()> {
    let len = x.len();
    let q_grid = QGrid::uniform(params.q_min, params.q_max, params.q_step)?;
    let scale_grid =
        ScaleGrid::geometric(params.s_min, params.effective_s_max(len), params.n_scales)?;
    let surface = mfcca::cross_fluctuation(x, y, &q_grid, &scale_grid, params.order)?;
    write_csv(
        &dir.join("fxy.csv"),
        &["q", "s", "f_xy"],
        surface
            .q_grid
            .values()
            .iter()
            .enumerate()
            .flat_map(|(qi, &q)| {
                let surface = &surface;
                surface
                    .scale_grid
                    .values()
                    .iter()
                    .enumerate()
                    .map(move |(si, &s)| {
                        vec![fmt_f64(q), s.to_string(), fmt_f64(surface.value(qi, si))]
                    })
            }),
    )?;

    let fit_range = (params.fit_lo, params.effective_fit_hi(len));
    let sx = mfdfa::fluctuation_function(x, &q_grid, &scale_grid, params.order)?;
    let sy = mfdfa::fluctuation_function(y, &q_grid, &scale_grid, params.order)?;
    let h_x = mfdfa::fit_generalized_hurst(&sx, fit_range)?;
    let h_y = mfdfa::fit_generalized_hurst(&sy, fit_range)?;
    match mfcca::fit_lambda(&surface, fit_range, &h_x, &h_y) {
        Ok(curve) => write_csv(
            &dir.join("lambda.csv"),
            &["q", "lambda", "stderr", "h_xy", "scaling_ok"],
            curve.points.iter().map(|p| {
                vec![
                    fmt_f64(p.q),
                    fmt_f64(p.lambda),
                    fmt_f64(p.stderr),
                    fmt_f64(p.h_xy),
                    p.scaling_ok.to_string(),
                ]
            }),
        )?,
        Err(fluctana::Error::NoUsableScaling) => write_csv(
            &dir.join("lambda.csv"),
            &["q", "lambda", "stderr", "h_xy", "scaling_ok"],
            std::iter::empty(),
        )?,
        Err(e) => return Err(e.into()),
    }
    write_json(
        &dir.join("mfcca.json"),
        &PairingNote {
            x: pairing.0,
            y: pairing.1,
            fit_range: Some(fit_range),
            order: params.order,
        },
    )?;
    Ok(())
}

pub fn run_mfcca(
    dir: &Path,
    prepared: &PreparedSeries,
    params: &MfccaParams,
) -> anyhow::Result<()> {
    let (x, y) = volatility_volume_pair(prepared);
    write_cross_outputs(dir, &x, &y, params, VOLATILITY_VOLUME_PAIRING)
}

pub fn write_rho_outputs(
    dir: &Path,
    x: &[f64],
    y: &[f64],
    params: &RhoParams,
    pairing: (&'static str, &'static str),
) -> anyhow::Result<()> {
    let scale_grid = ScaleGrid::geometric(params.s_min, params.s_max, params.n_scales)?;
    let profile = mfcca::rho_profile(x, y, &params.q, &scale_grid, params.order)?;
    write_csv(
        &dir.join("rho.csv"),
        &["q", "s", "rho"],
        profile.q.iter().enumerate().flat_map(|(qi, &q)| {
            let profile = &profile;
            profile
                .scale_grid
                .values()
                .iter()
                .enumerate()
                .map(move |(si, &s)| {
                    vec![fmt_f64(q), s.to_string(), fmt_f64(profile.value(qi, si))]
                })
        }),
    )?;
    write_json(
        &dir.join("rho.json"),
        &PairingNote {
            x: pairing.0,
            y: pairing.1,
            fit_range: None,
            order: params.order,
        },
    )?;
    Ok(())
}

pub fn run_rho(dir: &Path, prepared: &PreparedSeries, params: &RhoParams) -> anyhow::Result<()> {
    let (x, y) = volatility_volume_pair(prepared);
    write_rho_outputs(dir, &x, &y, params, VOLATILITY_VOLUME_PAIRING)
}

#[derive(Serialize)]
struct SurrogateReplicaSummary {
    replica: u64,
    seed: u64,
    #[serde(rename = "H")]
    h: Option<f64>,
    delta_alpha: Option<f64>,
    asymmetry: Option<f64>,
    alpha_0: Option<f64>,
}

#[derive(Serialize)]
struct SurrogateReport {
    method: String,
    replicas: usize,
    seed: u64,
    original: MfdfaSummary,
    replica_results: Vec<SurrogateReplicaSummary>,
    pooled_mean_h: Option<f64>,
    pooled_mean_delta_alpha: Option<f64>,
    /// 1 - pooled delta_alpha / original delta_alpha.
    delta_alpha_reduction: Option<f64>,
}

pub fn run_surrogate(
    dir: &Path,
    values: &[f64],
    params: &SurrogateParams,
    seed: u64,
) -> anyhow::Result<()> {
    let (_, _, _, original) = mfdfa_analysis(values, &params.mfdfa)?;
    let mut replica_results = Vec::new();
    for r in 0..params.replicas as u64 {
        let replica_seed = Seed(seed).replica(r);
        let surrogate_values = match params.method.as_str() {
            "shuffle" => surrogate::shuffle(values, replica_seed),
            "phase" => surrogate::phase_randomize(values, replica_seed)?,
            other => bail!(
                "unknown surrogate method {:?} (use shuffle or phase)",
                other
            ),
        };
        write_csv(
            &dir.join(format!("surrogate_{:03}.csv", r)),
            &["value"],
            surrogate_values.iter().map(|&v| vec![fmt_f64(v)]),
        )?;
        let (_, _, _, summary) = mfdfa_analysis(&surrogate_values, &params.mfdfa)?;
        replica_results.push(SurrogateReplicaSummary {
            replica: r,
            seed: replica_seed.0,
            h: summary.h,
            delta_alpha: summary.delta_alpha,
            asymmetry: summary.asymmetry,
            alpha_0: summary.alpha_0,
        });
    }
    let mean_of = |f: &dyn Fn(&SurrogateReplicaSummary) -> Option<f64>| -> Option<f64> {
        let vals: Vec<f64> = replica_results.iter().filter_map(|r| f(r)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let pooled_mean_h = mean_of(&|r| r.h);
    let pooled_mean_delta_alpha = mean_of(&|r| r.delta_alpha);
    let delta_alpha_reduction = match (original.delta_alpha, pooled_mean_delta_alpha) {
        (Some(orig), Some(pooled)) if orig > 0.0 => Some(1.0 - pooled / orig),
        _ => None,
    };
    let report = SurrogateReport {
        method: params.method.clone(),
        replicas: params.replicas,
        seed,
        original,
        replica_results,
        pooled_mean_h,
        pooled_mean_delta_alpha,
        delta_alpha_reduction,
    };
    write_json(&dir.join("surrogate.json"), &report)?;
    Ok(())
}

#[derive(Serialize)]
struct LpplReport {
    a: f64,
    b: f64,
    c: f64,
    m: f64,
    lambda: f64,
    omega: f64,
    phi: f64,
    tc: i64,
    phase: String,
    rss: f64,
    spearman_rho: f64,
    window: (i64, i64),
    n_points: usize,
}

/// Last log-price of each UTC day inside [from, to), optionally restricted
/// to the phase side of a critical time.
fn daily_log_closes(
    series: &PriceSeries,
    from: i64,
    to: i64,
    phase_filter: Option<(i64, PhaseKind)>,
) -> Vec<(i64, f64)> {
    let mut daily: BTreeMap<i64, (i64, f64)> = BTreeMap::new();
    for i in 0..series.len() {
        let t = series.timestamp(i);
        if t < from || t >= to {
            continue;
        }
        if let Some((t_c, phase)) = phase_filter {
            let on_phase_side = match phase {
                PhaseKind::Bubble => t < t_c,
                PhaseKind::Antibubble => t > t_c,
            };
            if !on_phase_side {
                continue;
            }
        }
        daily.insert(dates::day_start(t), (t, series.prices[i].ln()));
    }
    daily.into_values().collect()
}

pub fn run_lppl(dir: &Path, series: &PriceSeries, params: &LpplParamsConfig) -> anyhow::Result<()> {
    let t_c = dates::parse_time_arg(&params.tc)?;
    let phase = match params.phase.as_str() {
        "bubble" => PhaseKind::Bubble,
        "antibubble" => PhaseKind::Antibubble,
        other => bail!("unknown phase {:?} (use bubble or antibubble)", other),
    };
    let from = params
        .from
        .as_deref()
        .map(dates::parse_time_arg)
        .transpose()?
        .unwrap_or(series.start);
    let to = params
        .to
        .as_deref()
        .map(dates::parse_time_arg)
        .transpose()?
        .unwrap_or_else(|| series.timestamp(series.len() - 1) + 1);
    let points = daily_log_closes(series, from, to, Some((t_c, phase)));
    let fit = lppl::lppl_fit(
        &points,
        t_c,
        phase,
        params.lambda,
        (params.m_min, params.m_max),
        params.multistart,
    )?;
    let report = LpplReport {
        a: fit.params.a,
        b: fit.params.b,
        c: fit.params.c,
        m: fit.params.m,
        lambda: fit.params.lambda,
        omega: fit.params.omega(),
        phi: fit.params.phi,
        tc: t_c,
        phase: params.phase.clone(),
        rss: fit.rss,
        spearman_rho: fit.spearman_rho,
        window: fit.window,
        n_points: points.len(),
    };
    write_json(&dir.join("lppl.json"), &report)?;
    write_csv(
        &dir.join("lppl_curve.csv"),
        &["timestamp", "log_price", "fitted"],
        points.iter().map(|&(t, log_p)| {
            vec![
                t.to_string(),
                fmt_f64(log_p),
                fmt_f64(lppl::lppl_eval(&fit.params, t).unwrap_or(f64::NAN)),
            ]
        }),
    )?;

    if let (Some(scan_from), Some(scan_to)) = (&params.scan_from, &params.scan_to) {
        let scan_from = dates::parse_time_arg(scan_from)?;
        let scan_to = dates::parse_time_arg(scan_to)?;
        let step = params.scan_step_days.max(1) as i64 * 86_400;
        let candidates: Vec<i64> = (0..)
            .map(|k| scan_from + k * step)
            .take_while(|&t| t <= scan_to)
            .collect();
        // The scan reuses the full window; each candidate keeps the points on
        // its own phase side.
        let all_points = daily_log_closes(series, from, to, None);
        let scan = lppl::tc_scan(
            &all_points,
            &candidates,
            phase,
            params.lambda,
            (params.m_min, params.m_max),
            params.multistart,
        )?;
        write_csv(
            &dir.join("tc_scan.csv"),
            &["tc", "n_points", "rss", "m", "spearman_rho"],
            scan.iter().map(|p| {
                vec![
                    p.t_c.to_string(),
                    p.n_points.to_string(),
                    fmt_f64(p.rss),
                    fmt_f64(p.m),
                    fmt_f64(p.spearman_rho),
                ]
            }),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest {
    tool_version: String,
    config_hash: String,
    data_hash: String,
    status: String,
    error: Option<String>,
    periods: Vec<String>,
    files: Vec<FileEntry>,
    /// Wall-clock timings; the only run-dependent content in a pipeline
    /// output tree.
    timings_ms: BTreeMap<String, u64>,
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<FileEntry>) -> anyhow::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path
            .file_name()
            .map(|n| n != "manifest.json")
            .unwrap_or(true)
        {
            out.push(FileEntry {
                path: path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/"),
                sha256: sha256_file(&path)?,
                bytes: std::fs::metadata(&path)?.len(),
            });
        }
    }
    Ok(())
}

/// Executes the configured analyses per period into `out_dir/<period>/`,
/// then writes a manifest with content hashes. Fails before creating the
/// output directory when the input is missing; analysis errors are recorded
/// in the manifest with status "incomplete".
pub fn run_pipeline(config: &RunConfig) -> anyhow::Result<PathBuf> {
    if !config.input.is_file() {
        bail!("input file {} does not exist", config.input.display());
    }
    for name in &config.analyses {
        match name.as_str() {
            "ingest" | "tails" | "acf" | "mfdfa" | "hurst-roll" | "mfcca" | "rho" | "surrogate" => {
            }
            "lppl" => {
                if config.lppl.is_none() {
                    bail!("analysis \"lppl\" selected but no [lppl] block configured");
                }
            }
            other => bail!("unknown analysis {:?}", other),
        }
    }
    let config_hash = sha256_hex(to_json(config)?.as_bytes());
    let data_hash = sha256_file(&config.input)?;

    let periods: Vec<(String, Option<Period>)> = if config.periods.is_empty() {
        vec![("all".to_string(), None)]
    } else {
        config
            .periods
            .iter()
            .map(|p| {
                Ok((
                    p.name.clone(),
                    Some(Period {
                        start: dates::parse_time_arg(&p.from)?,
                        end: dates::parse_time_arg(&p.to)?,
                    }),
                ))
            })
            .collect::<anyhow::Result<_>>()?
    };

    std::fs::create_dir_all(&config.out_dir)?;
    let mut timings_ms = BTreeMap::new();
    let mut failure: Option<String> = None;

    'periods: for (name, period) in &periods {
        let dir = config.out_dir.join(name);
        std::fs::create_dir_all(&dir)?;
        let started = Instant::now();
        let prepared = match prepare_series(
            &config.input,
            &config.schema,
            *period,
            config.bin_seconds,
            config.returns.delta_t,
        ) {
            Ok(p) => p,
            Err(e) => {
                failure = Some(format!("{}/prepare: {:#}", name, e));
                break 'periods;
            }
        };
        timings_ms.insert(
            format!("{}/prepare", name),
            started.elapsed().as_millis() as u64,
        );

        for analysis in &config.analyses {
            let started = Instant::now();
            let result = match analysis.as_str() {
                "ingest" => write_ingest_outputs(&dir, &prepared.series, &prepared.diagnostics),
                "tails" => run_tails(&dir, &prepared, &config.tails),
                "acf" => run_acf(&dir, &prepared, &config.acf),
                "mfdfa" => run_mfdfa(&dir, &prepared.returns_norm.values, &config.mfdfa),
                "hurst-roll" => run_hurst_roll(&dir, &prepared, &config.hurst_roll),
                "mfcca" => run_mfcca(&dir, &prepared, &config.mfcca),
                "rho" => run_rho(&dir, &prepared, &config.rho),
                "surrogate" => run_surrogate(
                    &dir,
                    &prepared.returns_norm.values,
                    &config.surrogate,
                    config.seed,
                ),
                "lppl" => run_lppl(&dir, &prepared.series, config.lppl.as_ref().unwrap()),
                _ => unreachable!("validated above"),
            };
            timings_ms.insert(
                format!("{}/{}", name, analysis),
                started.elapsed().as_millis() as u64,
            );
            if let Err(e) = result {
                failure = Some(format!("{}/{}: {:#}", name, analysis, e));
                break 'periods;
            }
        }
    }

    let mut files = Vec::new();
    collect_files(&config.out_dir, &config.out_dir, &mut files)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash,
        data_hash,
        status: if failure.is_none() {
            "complete".to_string()
        } else {
            "incomplete".to_string()
        },
        error: failure.clone(),
        periods: periods.iter().map(|(n, _)| n.clone()).collect(),
        files,
        timings_ms,
    };
    write_json(&config.out_dir.join("manifest.json"), &manifest)?;
    match failure {
        None => Ok(config.out_dir.clone()),
        Some(e) => bail!("pipeline incomplete: {}", e),
    }
}

#[derive(Serialize)]
struct PeriodSummary {
    gamma: Option<f64>,
    gamma_stderr: Option<f64>,
    #[serde(rename = "H")]
    h: Option<f64>,
    #[serde(rename = "H_stderr")]
    h_stderr: Option<f64>,
    delta_alpha: Option<f64>,
    asymmetry: Option<f64>,
    lambda_minus_h_xy_at_q4: Option<f64>,
    rho_q4_at_s1000: Option<f64>,
    lppl_spearman_rho: Option<f64>,
}

fn json_f64(value: &serde_json::Value, key: &str) -> Option<f64> {
    value.get(key).and_then(|v| v.as_f64())
}

fn read_json(path: &Path) -> Option<serde_json::Value> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Rows of a pipeline CSV as parsed floats keyed by header name; the string
/// columns (flags) are kept verbatim.
fn read_csv_rows(path: &Path) -> Option<Vec<BTreeMap<String, String>>> {
    let text = std::fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next()?.split(',').collect();
    Some(
        lines
            .map(|line| {
                header
                    .iter()
                    .zip(line.split(','))
                    .map(|(h, v)| (h.to_string(), v.to_string()))
                    .collect()
            })
            .collect(),
    )
}

fn summarize_period(dir: &Path) -> PeriodSummary {
    let tail = read_json(&dir.join("tailfit.json"));
    let mf = read_json(&dir.join("mfdfa.json"));
    let lppl = read_json(&dir.join("lppl.json"));

    let lambda_gap = read_csv_rows(&dir.join("lambda.csv")).and_then(|rows| {
        rows.iter()
            .find(|r| {
                r.get("q")
                    .and_then(|q| q.parse::<f64>().ok())
                    .map(|q| (q - 4.0).abs() < 1e-9)
                    .unwrap_or(false)
                    && r.get("scaling_ok").map(|s| s == "true").unwrap_or(false)
            })
            .and_then(|r| {
                let lambda = r.get("lambda")?.parse::<f64>().ok()?;
                let h_xy = r.get("h_xy")?.parse::<f64>().ok()?;
                (lambda.is_finite() && h_xy.is_finite()).then_some(lambda - h_xy)
            })
    });

    let rho4 = read_csv_rows(&dir.join("rho.csv")).and_then(|rows| {
        rows.iter()
            .filter_map(|r| {
                let q = r.get("q")?.parse::<f64>().ok()?;
                let s = r.get("s")?.parse::<f64>().ok()?;
                let rho = r.get("rho")?.parse::<f64>().ok()?;
                ((q - 4.0).abs() < 1e-9).then_some((s, rho))
            })
            .min_by(|a, b| {
                (a.0 - 1000.0)
                    .abs()
                    .partial_cmp(&(b.0 - 1000.0).abs())
                    .unwrap()
            })
            .map(|(_, rho)| rho)
    });

    PeriodSummary {
        gamma: tail.as_ref().and_then(|t| json_f64(t, "gamma")),
        gamma_stderr: tail.as_ref().and_then(|t| json_f64(t, "stderr")),
        h: mf.as_ref().and_then(|m| json_f64(m, "H")),
        h_stderr: mf.as_ref().and_then(|m| json_f64(m, "H_stderr")),
        delta_alpha: mf.as_ref().and_then(|m| json_f64(m, "delta_alpha")),
        asymmetry: mf.as_ref().and_then(|m| json_f64(m, "asymmetry")),
        lambda_minus_h_xy_at_q4: lambda_gap,
        rho_q4_at_s1000: rho4,
        lppl_spearman_rho: lppl.as_ref().and_then(|l| json_f64(l, "spearman_rho")),
    }
}

/// Aggregates one pipeline output tree into a single summary JSON keyed by
/// period name.
pub fn emit_report(run_dir: &Path, out: Option<&Path>) -> anyhow::Result<PathBuf> {
    let manifest = read_json(&run_dir.join("manifest.json"))
        .with_context(|| format!("no manifest.json under {}", run_dir.display()))?;
    let period_names: Vec<String> = manifest
        .get("periods")
        .and_then(|p| p.as_array())
        .map(|a| {
            a.iter()
                .filter_map(|v| v.as_str().map(str::to_string))
                .collect()
        })
        .unwrap_or_default();
    if period_names.is_empty() {
        bail!("manifest lists no periods; incomplete bundle");
    }
    let mut periods = BTreeMap::new();
    for name in period_names {
        periods.insert(name.clone(), summarize_period(&run_dir.join(&name)));
    }
    #[derive(Serialize)]
    struct Summary {
        periods: BTreeMap<String, PeriodSummary>,
    }
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run_dir.join("summary.json"));
    write_json(&path, &Summary { periods })?;
    Ok(path)
}
