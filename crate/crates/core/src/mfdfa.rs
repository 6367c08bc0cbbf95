//! Multifractal detrended fluctuation analysis of a single series.
//!
//! The pipeline is: integrate the series into a profile, split the profile
//! into `2 M_s` segments of length `s` taken from both ends, remove a
//! polynomial trend of order `m` per segment, average the q-th powers of the
//! per-segment mean squared residuals, and read scaling exponents h(q) off
//! log F(q,s) vs log s. The q-dependence of h and the derived singularity
//! spectrum f(alpha) quantify multifractality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{self, DetrendBasis};
use crate::returns::ReturnSeries;

/// Segments whose residual power falls below this fraction of the segment's
/// profile power are treated as exactly detrended (zero variance). The
/// projection's own rounding floor is near 1e-26 of the profile power, so
/// the rule only fires where the trend removal is exact in exact arithmetic.
pub const ZERO_RESIDUAL_POWER_REL: f64 = 1e-20;

/// Minimum number of scales an exponent may be regressed on.
pub const MIN_FIT_SCALES: usize = 5;

/// Ordered distinct moment orders. Zero is excluded unless the logarithmic
/// averaging variant for q = 0 is explicitly requested.
#[derive(Debug, Clone, PartialEq)]
pub struct QGrid {
    values: Vec<f64>,
}

impl QGrid {
    pub fn new(values: Vec<f64>, allow_zero: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData {
                required: 1,
                actual: 0,
            });
        }
        for w in values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter {
                    name: "q_grid",
                    value: w[1],
                    constraint: "values must be strictly increasing and finite",
                });
            }
        }
        for &q in &values {
            if !q.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "q_grid",
                    value: q,
                    constraint: "values must be finite",
                });
            }
            if q == 0.0 && !allow_zero {
                return Err(Error::InvalidParameter {
                    name: "q_grid",
                    value: 0.0,
                    constraint: "q = 0 requires the logarithmic averaging variant",
                });
            }
        }
        Ok(QGrid { values })
    }

    /// Uniform grid from `q_min` to `q_max` in steps of `step`, q = 0 excluded.
    pub fn uniform(q_min: f64, q_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(q_max > q_min) {
            return Err(Error::InvalidParameter {
                name: "q_step",
                value: step,
                constraint: "requires step > 0 and q_max > q_min",
            });
        }
        let i_min = (q_min / step).round() as i64;
        let i_max = (q_max / step).round() as i64;
        let values: Vec<f64> = (i_min..=i_max)
            .map(|i| i as f64 * step)
            .filter(|&q| q != 0.0)
            .collect();
        QGrid::new(values, false)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for QGrid {
    /// q in [-4, 4], step 0.2, q = 0 excluded.
    fn default() -> Self {
        QGrid::uniform(-4.0, 4.0, 0.2).expect("static grid")
    }
}

/// Strictly increasing integer scales, typically log-spaced.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    values: Vec<usize>,
}

impl ScaleGrid {
    pub fn new(values: Vec<usize>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InsufficientData {
                required: 2,
                actual: values.len(),
            });
        }
        for w in values.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter {
                    name: "scale_grid",
                    value: w[1] as f64,
                    constraint: "scales must be strictly increasing",
                });
            }
        }
        if values[0] < 3 {
            return Err(Error::InvalidParameter {
                name: "s_min",
                value: values[0] as f64,
                constraint: "smallest scale must be at least 3",
            });
        }
        Ok(ScaleGrid { values })
    }

    /// `n_points` log-spaced integer scales between `s_min` and `s_max`
    /// inclusive (after rounding and deduplication).
    pub fn geometric(s_min: usize, s_max: usize, n_points: usize) -> Result<Self> {
        if s_max <= s_min || n_points < 2 {
            return Err(Error::InvalidParameter {
                name: "s_max",
                value: s_max as f64,
                constraint: "requires s_max > s_min and at least 2 points",
            });
        }
        let (lo, hi) = ((s_min as f64).ln(), (s_max as f64).ln());
        let mut values: Vec<usize> = (0..n_points)
            .map(|i| {
                let t = i as f64 / (n_points - 1) as f64;
                (lo + t * (hi - lo)).exp().round() as usize
            })
            .collect();
        values.dedup();
        ScaleGrid::new(values)
    }

    /// Grid ending at the largest admissible scale `len / 4` for a series of
    /// `len` points.
    pub fn for_length(len: usize, s_min: usize, n_points: usize) -> Result<Self> {
        ScaleGrid::geometric(s_min, len / 4, n_points)
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn min(&self) -> usize {
        self.values[0]
    }

    pub fn max(&self) -> usize {
        *self.values.last().unwrap()
    }
}

/// Profile `X(j) = sum_{i<=j} (x_i - <x>)`. The final entry telescopes to
/// zero up to accumulated rounding.
pub fn profile(values: &[f64]) -> Vec<f64> {
    let mean = fit::mean(values);
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v - mean;
            acc
        })
        .collect()
}

/// Start offsets of the `2 M_s` segments: `M_s` leading segments from the
/// profile start, then `M_s` trailing segments walking back from the end.
pub(crate) fn segment_starts(len: usize, s: usize) -> Vec<usize> {
    let m_s = len / s;
    let mut starts = Vec::with_capacity(2 * m_s);
    for v in 0..m_s {
        starts.push(v * s);
    }
    for v in 0..m_s {
        starts.push(len - (v + 1) * s);
    }
    starts
}

pub(crate) fn validate_segment_args(len: usize, s: usize, m: usize) -> Result<()> {
    if m < 1 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
            constraint: "detrending order must be at least 1",
        });
    }
    if s < m + 2 {
        return Err(Error::InvalidParameter {
            name: "s_min",
            value: s as f64,
            constraint: "scale must be at least m + 2 for a determined fit",
        });
    }
    if len < s {
        return Err(Error::InsufficientData {
            required: s,
            actual: len,
        });
    }
    Ok(())
}

/// Per-segment detrended variances F^2(nu, s) of a profile, in segment order.
///
/// A segment whose residual power is below [`ZERO_RESIDUAL_POWER_REL`] of its
/// profile power reports exactly 0.0.
pub fn segment_fluctuations(profile: &[f64], s: usize, m: usize) -> Result<Vec<f64>> {
    validate_segment_args(profile.len(), s, m)?;
    let basis = DetrendBasis::new(s, m);
    let mut residual = vec![0.0; s];
    let out = segment_starts(profile.len(), s)
        .into_iter()
        .map(|start| {
            let window = &profile[start..start + s];
            basis.residual_into(window, &mut residual);
            let msr = residual.iter().map(|r| r * r).sum::<f64>() / s as f64;
            let msb = window.iter().map(|y| y * y).sum::<f64>() / s as f64;
            if msr <= ZERO_RESIDUAL_POWER_REL * msb {
                0.0
            } else {
                msr
            }
        })
        .collect();
    Ok(out)
}

/// F(q, s) over a q-grid and scale grid.
#[derive(Debug, Clone)]
pub struct FluctuationSurface {
    pub q_grid: QGrid,
    pub scale_grid: ScaleGrid,
    /// Row-major over (q, s). Entries can be non-finite for q < 0 when some
    /// segment was detrended exactly; this is deliberate and not masked.
    f: Vec<f64>,
    /// Per-scale count of segments with F^2(nu, s) = 0.
    pub zero_variance_counts: Vec<usize>,
}

impl FluctuationSurface {
    pub fn value(&self, q_index: usize, s_index: usize) -> f64 {
        self.f[q_index * self.scale_grid.values().len() + s_index]
    }

    pub fn zero_variance_total(&self) -> usize {
        self.zero_variance_counts.iter().sum()
    }
}

/// Reduces per-segment variances to F(q, s) for one scale:
/// F(q,s) = [ mean_nu (F^2)^{q/2} ]^{1/q}, with logarithmic averaging at
/// q = 0. A mean that overflows or involves log of zero yields NaN.
fn reduce_moments(fluct2: &[f64], q_values: &[f64], out: &mut Vec<f64>) {
    let inv_n = 1.0 / fluct2.len() as f64;
    for &q in q_values {
        let f = if q == 0.0 {
            let log_mean: f64 = fluct2.iter().map(|&v| v.ln()).sum::<f64>() * inv_n;
            (0.5 * log_mean).exp()
        } else {
            let mean: f64 = fluct2.iter().map(|&v| v.powf(q / 2.0)).sum::<f64>() * inv_n;
            if !mean.is_finite() {
                f64::NAN
            } else if mean == 0.0 {
                0.0
            } else {
                mean.powf(1.0 / q)
            }
        };
        out.push(f);
    }
}

/// Computes the fluctuation surface of `values` with polynomial detrending of
/// order `m` (the customary choice is m = 2).
pub fn fluctuation_function(
    values: &[f64],
    q_grid: &QGrid,
    scale_grid: &ScaleGrid,
    m: usize,
) -> Result<FluctuationSurface> {
    let t = values.len();
    validate_segment_args(t, scale_grid.min(), m)?;
    if t < 4 * scale_grid.min() {
        return Err(Error::InsufficientData {
            required: 4 * scale_grid.min(),
            actual: t,
        });
    }
    if scale_grid.max() * 4 > t {
        return Err(Error::InvalidParameter {
            name: "s_max",
            value: scale_grid.max() as f64,
            constraint: "largest scale must admit at least 4 segments (s <= T/4)",
        });
    }
    let prof = profile(values);
    let n_s = scale_grid.values().len();
    let mut f = vec![0.0; q_grid.len() * n_s];
    let mut zero_variance_counts = vec![0usize; n_s];
    let mut column = Vec::with_capacity(q_grid.len());

    for (si, &s) in scale_grid.values().iter().enumerate() {
        let fluct2 = segment_fluctuations(&prof, s, m)?;
        zero_variance_counts[si] = fluct2.iter().filter(|&&v| v == 0.0).count();
        column.clear();
        reduce_moments(&fluct2, q_grid.values(), &mut column);
        for (qi, &val) in column.iter().enumerate() {
            f[qi * n_s + si] = val;
        }
    }

    Ok(FluctuationSurface {
        q_grid: q_grid.clone(),
        scale_grid: scale_grid.clone(),
        f,
        zero_variance_counts,
    })
}

/// One fitted generalized Hurst exponent.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HurstPoint {
    pub q: f64,
    pub h: f64,
    /// Standard error of the log-log regression slope.
    pub stderr: f64,
}

/// h(q) over the q values that scaled cleanly in the fit range.
#[derive(Debug, Clone)]
pub struct HurstCurve {
    pub points: Vec<HurstPoint>,
    /// q values whose F(q,s) was non-finite or non-positive somewhere inside
    /// the fit range; reported rather than silently interpolated.
    pub absent_q: Vec<f64>,
    /// Inclusive scale range (s_lo, s_hi) used for the regression.
    pub fit_range: (usize, usize),
}

impl HurstCurve {
    pub fn h_at(&self, q: f64) -> Option<HurstPoint> {
        self.points.iter().find(|p| (p.q - q).abs() < 1e-9).copied()
    }
}

/// Least-squares slope of log F(q,s) on log s per q over the inclusive scale
/// range.
pub fn fit_generalized_hurst(
    surface: &FluctuationSurface,
    fit_range: (usize, usize),
) -> Result<HurstCurve> {
    let (s_lo, s_hi) = fit_range;
    let idx: Vec<usize> = surface
        .scale_grid
        .values()
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s >= s_lo && s <= s_hi)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < MIN_FIT_SCALES {
        return Err(Error::InsufficientData {
            required: MIN_FIT_SCALES,
            actual: idx.len(),
        });
    }
    let log_s: Vec<f64> = idx
        .iter()
        .map(|&i| (surface.scale_grid.values()[i] as f64).ln())
        .collect();

    let mut points = Vec::new();
    let mut absent_q = Vec::new();
    for (qi, &q) in surface.q_grid.values().iter().enumerate() {
        let fs: Vec<f64> = idx.iter().map(|&i| surface.value(qi, i)).collect();
        if fs.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            absent_q.push(q);
            continue;
        }
        let log_f: Vec<f64> = fs.iter().map(|v| v.ln()).collect();
        match fit::ols_line(&log_s, &log_f) {
            Some(line) => points.push(HurstPoint {
                q,
                h: line.slope,
                stderr: line.slope_stderr,
            }),
            None => absent_q.push(q),
        }
    }
    if points.is_empty() {
        return Err(Error::NoUsableScaling);
    }
    Ok(HurstCurve {
        points,
        absent_q,
        fit_range,
    })
}

/// Spectra with adjacent alpha increasing by more than this are flagged as
/// folded.
pub const SPECTRUM_FOLD_TOLERANCE: f64 = 0.01;

/// Singularity spectrum from the Legendre-type transform
/// alpha = h(q) + q h'(q), f(alpha) = q (alpha - h(q)) + 1.
#[derive(Debug, Clone, Serialize)]
pub struct SingularitySpectrum {
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
    pub f_alpha: Vec<f64>,
    /// alpha at the spectrum maximum.
    pub alpha_0: f64,
    /// alpha_max - alpha_min.
    pub delta_alpha: f64,
    /// (d_left - d_right) / (d_left + d_right) around alpha_0; positive for
    /// left-sided spectra. Defined as 0 for a collapsed spectrum.
    pub asymmetry: f64,
    /// Set when alpha(q) increases with q beyond tolerance (spectrum folds
    /// back on itself); flagged rather than fatal.
    pub folded: bool,
}

/// Derivative h'(q) by central finite differences on the q grid, one-sided at
/// the ends. Requires at least [`MIN_FIT_SCALES`] consecutive q values; when
/// absent rows split the grid the longest contiguous run is used.
pub fn singularity_spectrum(curve: &HurstCurve) -> Result<SingularitySpectrum> {
    let run = longest_contiguous_run(curve);
    if run.len() < MIN_FIT_SCALES {
        return Err(Error::InsufficientData {
            required: MIN_FIT_SCALES,
            actual: run.len(),
        });
    }
    let q: Vec<f64> = run.iter().map(|p| p.q).collect();
    let h: Vec<f64> = run.iter().map(|p| p.h).collect();
    let n = q.len();
    let mut alpha = Vec::with_capacity(n);
    let mut f_alpha = Vec::with_capacity(n);
    for i in 0..n {
        let dh = if i == 0 {
            (h[1] - h[0]) / (q[1] - q[0])
        } else if i == n - 1 {
            (h[n - 1] - h[n - 2]) / (q[n - 1] - q[n - 2])
        } else {
            (h[i + 1] - h[i - 1]) / (q[i + 1] - q[i - 1])
        };
        let a = h[i] + q[i] * dh;
        alpha.push(a);
        f_alpha.push(q[i] * (a - h[i]) + 1.0);
    }

    let folded = alpha
        .windows(2)
        .any(|w| w[1] - w[0] > SPECTRUM_FOLD_TOLERANCE);

    let (mut max_f, mut arg_max) = (f64::NEG_INFINITY, 0);
    for (i, &f) in f_alpha.iter().enumerate() {
        if f > max_f {
            max_f = f;
            arg_max = i;
        }
    }
    let alpha_0 = alpha[arg_max];
    let alpha_min = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    let alpha_max = alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let delta_alpha = alpha_max - alpha_min;
    let d_left = alpha_0 - alpha_min;
    let d_right = alpha_max - alpha_0;
    let asymmetry = if d_left + d_right < 1e-12 {
        0.0
    } else {
        (d_left - d_right) / (d_left + d_right)
    };

    Ok(SingularitySpectrum {
        q,
        alpha,
        f_alpha,
        alpha_0,
        delta_alpha,
        asymmetry,
        folded,
    })
}

fn longest_contiguous_run(curve: &HurstCurve) -> &[HurstPoint] {
    let pts = &curve.points;
    if pts.is_empty() {
        return pts;
    }
    let has_gap = |a: f64, b: f64| curve.absent_q.iter().any(|&q| q > a && q < b);
    let mut best = (0usize, 1usize);
    let mut start = 0;
    for i in 1..=pts.len() {
        let broken = i == pts.len() || has_gap(pts[i - 1].q, pts[i].q);
        if broken {
            if i - start > best.1 - best.0 {
                best = (start, i);
            }
            start = i;
        }
    }
    &pts[best.0..best.1]
}

/// Configuration for [`rolling_hurst`].
#[derive(Debug, Clone)]
pub struct RollingHurstConfig {
    pub window_bins: usize,
    pub step_bins: usize,
    /// Scale range for the per-window fit; defaults to
    /// (100, min(10_000, window / 10)).
    pub fit_range: Option<(usize, usize)>,
    pub order: usize,
    /// Windows whose fraction of exactly-zero returns exceeds this cap are
    /// flagged as low quality.
    pub zero_fraction_cap: f64,
}

impl RollingHurstConfig {
    pub fn new(window_bins: usize, step_bins: usize) -> Self {
        RollingHurstConfig {
            window_bins,
            step_bins,
            fit_range: None,
            order: 2,
            zero_fraction_cap: 0.5,
        }
    }

    pub fn effective_fit_range(&self) -> (usize, usize) {
        self.fit_range
            .unwrap_or((100, (self.window_bins / 10).min(10_000)))
    }
}

/// One rolling-window Hurst estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RollingHurstPoint {
    /// Index of the first return in the window.
    pub start_bin: usize,
    pub window_bins: usize,
    /// h(2) of the window, NaN when the window is constant.
    pub h: f64,
    pub stderr: f64,
    /// Fraction of exactly-zero returns in the window.
    pub zero_fraction: f64,
    /// False when the zero-return fraction exceeds the configured cap or no
    /// estimate was possible.
    pub quality_ok: bool,
}

/// Paper-scale windows need > 40_000 points to pin h(2) down.
pub const MIN_ROLLING_WINDOW: usize = 40_000;

/// The rolling-window kernel: normalizes one window in isolation and fits
/// h(2) over the given inclusive scale range.
pub fn window_hurst(window: &[f64], fit_range: (usize, usize), order: usize) -> Result<HurstPoint> {
    let mean = fit::mean(window);
    let sd = fit::population_variance(window, mean).sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateInput(
            "constant window has no Hurst exponent".to_string(),
        ));
    }
    let normalized: Vec<f64> = window.iter().map(|v| (v - mean) / sd).collect();
    let q_grid = QGrid::new(vec![2.0], false)?;
    let scale_grid = ScaleGrid::geometric(fit_range.0, fit_range.1, 20)?;
    let surface = fluctuation_function(&normalized, &q_grid, &scale_grid, order)?;
    let curve = fit_generalized_hurst(&surface, fit_range)?;
    Ok(curve.points[0])
}

/// h(2) over sliding windows; each window is normalized in isolation before
/// the fluctuation analysis.
pub fn rolling_hurst(
    returns: &ReturnSeries,
    cfg: &RollingHurstConfig,
) -> Result<Vec<RollingHurstPoint>> {
    if cfg.window_bins < MIN_ROLLING_WINDOW {
        return Err(Error::InvalidParameter {
            name: "window_bins",
            value: cfg.window_bins as f64,
            constraint: "rolling windows require at least 40,000 bins",
        });
    }
    if cfg.step_bins == 0 || cfg.step_bins > cfg.window_bins {
        return Err(Error::InvalidParameter {
            name: "step_bins",
            value: cfg.step_bins as f64,
            constraint: "step must lie in 1..=window_bins",
        });
    }
    if returns.values.len() < cfg.window_bins {
        return Err(Error::InsufficientData {
            required: cfg.window_bins,
            actual: returns.values.len(),
        });
    }
    let fit_range = cfg.effective_fit_range();
    let mut out = Vec::new();
    let mut start = 0;
    while start + cfg.window_bins <= returns.values.len() {
        let window = &returns.values[start..start + cfg.window_bins];
        let zero_fraction =
            window.iter().filter(|&&v| v == 0.0).count() as f64 / window.len() as f64;
        let point = match window_hurst(window, fit_range, cfg.order) {
            Ok(p) => RollingHurstPoint {
                start_bin: start,
                window_bins: cfg.window_bins,
                h: p.h,
                stderr: p.stderr,
                zero_fraction,
                quality_ok: zero_fraction <= cfg.zero_fraction_cap,
            },
            Err(Error::NoUsableScaling) | Err(Error::DegenerateInput(_)) => RollingHurstPoint {
                start_bin: start,
                window_bins: cfg.window_bins,
                h: f64::NAN,
                stderr: f64::NAN,
                zero_fraction,
                quality_ok: false,
            },
            Err(e) => return Err(e),
        };
        out.push(point);
        start += cfg.step_bins;
    }
    Ok(out)
}
