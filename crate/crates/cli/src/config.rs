//! Run configuration: a single human-editable TOML file, with every
//! parameter defaulted, plus the flag overrides applied by the `run`
//! subcommand (flags win).

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use fluctana::ingest::CsvSchema;

fn default_bin_seconds() -> u32 {
    60
}
fn default_seed() -> u64 {
    42
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_analyses() -> Vec<String> {
    [
        "ingest",
        "tails",
        "acf",
        "mfdfa",
        "mfcca",
        "rho",
        "surrogate",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_bin_seconds")]
    pub bin_seconds: u32,
    #[serde(default)]
    pub schema: CsvSchema,
    /// Named half-open period slices; an empty list means one slice named
    /// "all" spanning the whole file.
    #[serde(default)]
    pub periods: Vec<PeriodConfig>,
    /// Analyses to run, in dependency order. Known names: ingest, tails,
    /// acf, mfdfa, hurst-roll, mfcca, rho, surrogate, lppl.
    #[serde(default = "default_analyses")]
    pub analyses: Vec<String>,
    #[serde(default)]
    pub returns: ReturnsParams,
    #[serde(default)]
    pub tails: TailsParams,
    #[serde(default)]
    pub acf: AcfParams,
    #[serde(default)]
    pub mfdfa: MfdfaParams,
    #[serde(default)]
    pub hurst_roll: HurstRollParams,
    #[serde(default)]
    pub mfcca: MfccaParams,
    #[serde(default)]
    pub rho: RhoParams,
    #[serde(default)]
    pub surrogate: SurrogateParams,
    #[serde(default)]
    pub lppl: Option<LpplParamsConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodConfig {
    pub name: String,
    /// Epoch seconds or date string; see `dates::parse_time_arg`.
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReturnsParams {
    pub delta_t: usize,
}

impl Default for ReturnsParams {
    fn default() -> Self {
        ReturnsParams { delta_t: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TailsParams {
    pub tail_fraction: f64,
    pub ks_scan: bool,
}

impl Default for TailsParams {
    fn default() -> Self {
        TailsParams {
            tail_fraction: 0.01,
            ks_scan: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AcfParams {
    /// Largest lag in bins; 0 means min(length/10, 100_000).
    pub max_lag: usize,
    /// Reported lags are log-spaced with this resolution.
    pub lags_per_decade: usize,
}

impl Default for AcfParams {
    fn default() -> Self {
        AcfParams {
            max_lag: 0,
            lags_per_decade: 25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MfdfaParams {
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub s_min: usize,
    /// 0 means the largest admissible scale, length / 4.
    pub s_max: usize,
    pub n_scales: usize,
    pub order: usize,
    pub fit_lo: usize,
    /// 0 means min(10_000, length / 10).
    pub fit_hi: usize,
}

impl Default for MfdfaParams {
    fn default() -> Self {
        MfdfaParams {
            q_min: -4.0,
            q_max: 4.0,
            q_step: 0.2,
            s_min: 10,
            s_max: 0,
            n_scales: 40,
            order: 2,
            fit_lo: 100,
            fit_hi: 0,
        }
    }
}

impl MfdfaParams {
    pub fn effective_s_max(&self, len: usize) -> usize {
        if self.s_max == 0 {
            len / 4
        } else {
            self.s_max
        }
    }

    pub fn effective_fit_hi(&self, len: usize) -> usize {
        if self.fit_hi == 0 {
            (len / 10).min(10_000)
        } else {
            self.fit_hi
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HurstRollParams {
    pub window_bins: usize,
    pub step_bins: usize,
    /// Calendar-month windows (UTC) instead of fixed bin counts.
    pub monthly: bool,
    pub order: usize,
    pub fit_lo: usize,
    /// 0 means min(10_000, window / 10).
    pub fit_hi: usize,
    pub zero_cap: f64,
}

impl Default for HurstRollParams {
    fn default() -> Self {
        HurstRollParams {
            window_bins: 43_200,
            step_bins: 43_200,
            monthly: false,
            order: 2,
            fit_lo: 100,
            fit_hi: 0,
            zero_cap: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccaParams {
    pub q_min: f64,
    pub q_max: f64,
    pub q_step: f64,
    pub s_min: usize,
    pub s_max: usize,
    pub n_scales: usize,
    pub order: usize,
    pub fit_lo: usize,
    pub fit_hi: usize,
}

impl Default for MfccaParams {
    fn default() -> Self {
        MfccaParams {
            q_min: 0.4,
            q_max: 4.0,
            q_step: 0.2,
            s_min: 10,
            s_max: 0,
            n_scales: 40,
            order: 2,
            fit_lo: 100,
            fit_hi: 0,
        }
    }
}

impl MfccaParams {
    pub fn effective_s_max(&self, len: usize) -> usize {
        if self.s_max == 0 {
            len / 4
        } else {
            self.s_max
        }
    }

    pub fn effective_fit_hi(&self, len: usize) -> usize {
        if self.fit_hi == 0 {
            (len / 10).min(10_000)
        } else {
            self.fit_hi
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RhoParams {
    pub q: Vec<f64>,
    pub s_min: usize,
    pub s_max: usize,
    pub n_scales: usize,
    pub order: usize,
}

impl Default for RhoParams {
    fn default() -> Self {
        RhoParams {
            q: vec![1.0, 2.0, 3.0, 4.0],
            s_min: 100,
            s_max: 1000,
            n_scales: 20,
            order: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateParams {
    /// "shuffle" or "phase".
    pub method: String,
    pub replicas: usize,
    /// MFDFA settings applied to the original and every replica.
    pub mfdfa: MfdfaParams,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            method: "phase".to_string(),
            replicas: 10,
            mfdfa: MfdfaParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpplParamsConfig {
    /// Critical time (epoch seconds or date string).
    pub tc: String,
    /// "bubble" or "antibubble".
    #[serde(default = "default_phase")]
    pub phase: String,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    pub from: Option<String>,
    pub to: Option<String>,
    #[serde(default = "default_m_min")]
    pub m_min: f64,
    #[serde(default = "default_m_max")]
    pub m_max: f64,
    #[serde(default = "default_multistart")]
    pub multistart: usize,
    /// Optional coarse critical-time scan: candidates every `scan_step_days`
    /// from `scan_from` to `scan_to`, reported as rss(t_c).
    pub scan_from: Option<String>,
    pub scan_to: Option<String>,
    #[serde(default = "default_scan_step_days")]
    pub scan_step_days: u32,
}

fn default_scan_step_days() -> u32 {
    1
}

fn default_phase() -> String {
    "bubble".to_string()
}
fn default_lambda() -> f64 {
    2.0
}
fn default_m_min() -> f64 {
    0.1
}
fn default_m_max() -> f64 {
    0.9
}
fn default_multistart() -> usize {
    fluctana::lppl::DEFAULT_MULTISTART
}

pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: RunConfig =
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    Ok(config)
}
