//! Empirical tail distributions with power-law exponent estimation, and
//! autocorrelation of returns and volatility.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit;

/// Empirical complementary CDF over the sorted distinct sample points,
/// with the strict-inequality convention P(X > x) = #{samples > x} / n.
pub fn ccdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InsufficientData {
            required: 1,
            actual: 0,
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        out.push((x, (sorted.len() - j) as f64 / n));
        i = j;
    }
    Ok(out)
}

/// Threshold selection mode for [`fit_tail_exponent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMode {
    /// Use the caller's tail fraction as given.
    FixedFraction,
    /// Scan [`KS_SCAN_FRACTIONS`] and keep the fraction whose fitted power
    /// law is closest to the empirical tail in Kolmogorov-Smirnov distance.
    KsScan,
}

/// Candidate tail fractions tried in [`TailMode::KsScan`] order; candidates
/// selecting fewer than 25 tail points are skipped.
pub const KS_SCAN_FRACTIONS: &[f64] =
    &[0.002, 0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2];

const KS_MIN_TAIL: usize = 25;

/// Hill maximum-likelihood power-law tail fit of the absolute values.
#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    /// Tail exponent gamma in P(X > x) ~ x^{-gamma}.
    pub gamma: f64,
    /// Asymptotic standard error gamma / sqrt(k).
    pub stderr: f64,
    pub tail_fraction: f64,
    /// Smallest absolute value included in the tail.
    pub threshold: f64,
    pub n_tail: usize,
    /// Full-sample CCDF of |values| for plotting; the trailing zero-probability
    /// point is dropped so the last entry carries P = 1/n for a unique maximum.
    #[serde(skip)]
    pub ccdf: Vec<(f64, f64)>,
}

struct HillEstimate {
    gamma: f64,
    threshold: f64,
    k: usize,
}

/// sorted_desc must be absolute values sorted descending.
fn hill(sorted_desc: &[f64], k: usize) -> Result<HillEstimate> {
    let threshold = sorted_desc[k - 1];
    if threshold <= 0.0 {
        return Err(Error::DegenerateInput(
            "tail contains non-positive values".to_string(),
        ));
    }
    let sum_log: f64 = sorted_desc[..k].iter().map(|x| (x / threshold).ln()).sum();
    if sum_log <= 0.0 {
        return Err(Error::DegenerateInput(
            "all tail values equal: zero log-spread".to_string(),
        ));
    }
    Ok(HillEstimate {
        gamma: k as f64 / sum_log,
        threshold,
        k,
    })
}

/// Kolmogorov-Smirnov distance between the empirical conditional tail CCDF
/// and the fitted Pareto tail (x/u)^{-gamma}.
fn ks_distance(sorted_desc: &[f64], est: &HillEstimate) -> f64 {
    let k = est.k;
    let mut d: f64 = 0.0;
    // Tail points ascending: t_i = sorted_desc[k-1-i], empirical S(t_i) = (k-1-i)/k.
    for i in 0..k {
        let t = sorted_desc[k - 1 - i];
        let empirical = (k - 1 - i) as f64 / k as f64;
        let model = (t / est.threshold).powf(-est.gamma);
        d = d.max((empirical - model).abs());
    }
    d
}

/// Hill estimate of the tail exponent over the `ceil(tail_fraction * n)`
/// largest absolute values.
pub fn fit_tail_exponent(values: &[f64], tail_fraction: f64, mode: TailMode) -> Result<TailFit> {
    if values.len() < 500 {
        return Err(Error::InsufficientData {
            required: 500,
            actual: values.len(),
        });
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 0.2) {
        return Err(Error::InvalidParameter {
            name: "tail_fraction",
            value: tail_fraction,
            constraint: "must lie in (0, 0.2]",
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    abs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = abs.len();

    let (est, fraction) = match mode {
        TailMode::FixedFraction => {
            let k = ((tail_fraction * n as f64).ceil() as usize).clamp(2, n);
            (hill(&abs, k)?, tail_fraction)
        }
        TailMode::KsScan => {
            let mut best: Option<(f64, HillEstimate, f64)> = None;
            for &frac in KS_SCAN_FRACTIONS {
                let k = ((frac * n as f64).ceil() as usize).clamp(2, n);
                if k < KS_MIN_TAIL {
                    continue;
                }
                let est = match hill(&abs, k) {
                    Ok(e) => e,
                    Err(_) => continue,
                };
                let d = ks_distance(&abs, &est);
                if best.as_ref().map_or(true, |(bd, _, _)| d < *bd) {
                    best = Some((d, est, frac));
                }
            }
            let (_, est, frac) = best.ok_or(Error::DegenerateInput(
                "no tail fraction candidate produced a valid Hill fit".to_string(),
            ))?;
            (est, frac)
        }
    };

    let mut tail_ccdf = ccdf(&abs)?;
    if tail_ccdf.last().map_or(false, |&(_, p)| p == 0.0) {
        tail_ccdf.pop();
    }

    Ok(TailFit {
        gamma: est.gamma,
        stderr: est.gamma / (est.k as f64).sqrt(),
        tail_fraction: fraction,
        threshold: est.threshold,
        n_tail: est.k,
        ccdf: tail_ccdf,
    })
}

/// What an [`AcfCurve`] was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Returns,
    Volatility,
}

/// Autocorrelation at lags 0..=max_lag; `values[tau]` is the coefficient at
/// lag tau and `values[0]` is exactly 1.
#[derive(Debug, Clone)]
pub struct AcfCurve {
    pub values: Vec<f64>,
    pub series_kind: SeriesKind,
}

impl AcfCurve {
    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }
}

/// Autocorrelation c(tau) = cov(tau) / var with one global mean and variance;
/// the lag-tau covariance averages over the n - tau overlapping terms.
///
/// The raw lag sums come from one FFT pass (Wiener-Khinchin), so all lags of
/// long series are affordable; results are deterministic for a given input.
pub fn acf(values: &[f64], max_lag: usize, kind: SeriesKind) -> Result<AcfCurve> {
    let n = values.len();
    if max_lag < 1 || n <= max_lag {
        return Err(Error::InsufficientData {
            required: max_lag + 1,
            actual: n,
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let m = fit::mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - m).collect();

    // Zero-padded circular autocorrelation gives the linear lag sums.
    let fft_len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);
    let mut buf: Vec<Complex<f64>> = centered
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    forward.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    inverse.process(&mut buf);

    let scale = 1.0 / fft_len as f64;
    let sum0 = buf[0].re * scale;
    if sum0 <= 0.0 {
        return Err(Error::DegenerateInput(
            "zero-variance input has no autocorrelation".to_string(),
        ));
    }
    let variance = sum0 / n as f64;
    let values = (0..=max_lag)
        .map(|tau| {
            let cov = buf[tau].re * scale / (n - tau) as f64;
            cov / variance
        })
        .collect();
    Ok(AcfCurve {
        values,
        series_kind: kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn ccdf_counts_strictly_greater() {
        let c = ccdf(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(c, vec![(1.0, 0.75), (2.0, 0.5), (3.0, 0.25), (4.0, 0.0)]);
    }

    #[test]
    fn ccdf_degenerate_single_point() {
        assert_eq!(ccdf(&[7.0, 7.0, 7.0]).unwrap(), vec![(7.0, 0.0)]);
    }

    #[test]
    fn ccdf_ties_use_strict_inequality() {
        let c = ccdf(&[1.0, 1.0, 2.0]).unwrap();
        assert!((c[0].1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ccdf_empty_rejected() {
        assert!(ccdf(&[]).is_err());
    }

    fn pareto_sample(gamma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                u.powf(-1.0 / gamma)
            })
            .collect()
    }

    #[test]
    fn hill_recovers_pareto_exponent() {
        let sample = pareto_sample(3.0, 200_000, 11);
        let fit = fit_tail_exponent(&sample, 0.01, TailMode::FixedFraction).unwrap();
        assert!(
            (fit.gamma - 3.0).abs() < 0.15,
            "gamma = {} stderr = {}",
            fit.gamma,
            fit.stderr
        );
        assert_eq!(fit.n_tail, 2000);
        // stderr convention: gamma / sqrt(k)
        assert!((fit.stderr - fit.gamma / (fit.n_tail as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ks_scan_picks_a_candidate_fraction() {
        let sample = pareto_sample(2.5, 50_000, 5);
        let fit = fit_tail_exponent(&sample, 0.01, TailMode::KsScan).unwrap();
        assert!(KS_SCAN_FRACTIONS.contains(&fit.tail_fraction));
        assert!((fit.gamma - 2.5).abs() < 0.3, "gamma = {}", fit.gamma);
    }

    #[test]
    fn tailfit_ccdf_last_point_is_one_over_n() {
        let sample = pareto_sample(3.0, 1000, 3);
        let fit = fit_tail_exponent(&sample, 0.05, TailMode::FixedFraction).unwrap();
        let last = fit.ccdf.last().unwrap();
        assert!((last.1 - 1.0 / 1000.0).abs() < 1e-15);
        for w in fit.ccdf.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
    }

    #[test]
    fn hill_and_ccdf_slope_agree_on_pareto() {
        // On pure power-law data the log-log CCDF slope is -gamma; the two
        // estimates must agree within two joint standard errors.
        let sample = pareto_sample(3.0, 100_000, 17);
        let fit = fit_tail_exponent(&sample, 0.02, TailMode::FixedFraction).unwrap();
        let tail: Vec<(f64, f64)> = fit
            .ccdf
            .iter()
            .filter(|&&(x, p)| x >= fit.threshold && p > 0.0)
            .cloned()
            .collect();
        let lx: Vec<f64> = tail.iter().map(|t| t.0.ln()).collect();
        let lp: Vec<f64> = tail.iter().map(|t| t.1.ln()).collect();
        let line = crate::fit::ols_line(&lx, &lp).unwrap();
        let joint = (fit.stderr.powi(2) + line.slope_stderr.powi(2)).sqrt();
        assert!(
            (-line.slope - fit.gamma).abs() < 2.0 * joint.max(0.05),
            "ccdf slope {} vs hill {}",
            -line.slope,
            fit.gamma
        );
    }

    #[test]
    fn too_few_values_rejected() {
        assert!(fit_tail_exponent(&[1.0; 100], 0.1, TailMode::FixedFraction).is_err());
    }

    #[test]
    fn equal_tail_values_rejected() {
        let v = vec![1.0; 600];
        let err = fit_tail_exponent(&v, 0.2, TailMode::FixedFraction);
        assert!(matches!(err, Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn acf_lag_zero_is_exactly_one() {
        let values: Vec<f64> = (0..256).map(|i| ((i * 37) % 101) as f64).collect();
        let curve = acf(&values, 10, SeriesKind::Returns).unwrap();
        assert_eq!(curve.values[0], 1.0);
        assert_eq!(curve.max_lag(), 10);
    }

    #[test]
    fn ar1_autocorrelation_matches_closed_form() {
        let n = 100_000;
        let phi = 0.5;
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let mut x = vec![0.0f64; n];
        for i in 1..n {
            let eps: f64 = rng.sample(StandardNormal);
            x[i] = phi * x[i - 1] + eps;
        }
        let curve = acf(&x, 5, SeriesKind::Returns).unwrap();
        assert!(
            (curve.values[1] - 0.5).abs() < 0.02,
            "c1={}",
            curve.values[1]
        );
        assert!((curve.values[2] - 0.25).abs() < 0.02);
    }

    #[test]
    fn white_noise_stays_in_confidence_band() {
        let n = 100_000;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let curve = acf(&x, 1000, SeriesKind::Returns).unwrap();
        let band = 3.0 / (n as f64).sqrt();
        let inside = curve.values[1..].iter().filter(|c| c.abs() <= band).count();
        assert!(
            inside as f64 >= 0.99 * 1000.0,
            "only {} of 1000 lags inside band",
            inside
        );
    }

    #[test]
    fn constant_series_has_no_acf() {
        assert!(acf(&[2.0; 64], 4, SeriesKind::Returns).is_err());
    }
}
