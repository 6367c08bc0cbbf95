//! Log-periodic power-law trend fits around a critical time.
//!
//! The model for the bubble (accelerating) phase is
//!
//! ```text
//! log P(t) = A + B tau^m + C tau^m cos(omega ln tau - phi),   tau = t_c - t
//! ```
//!
//! with omega = 2 pi / ln(lambda) tied to the preferred scaling factor
//! lambda; the anti-bubble phase flips the time argument to t - t_c. Time is
//! measured in days, so the fitted parameters are comparable across windows.
//!
//! For fixed m the oscillation expands into two linear basis functions
//! (cos and sin), making (A, B, C1, C2) an exact linear least-squares solve;
//! the fitter searches only over m, from a grid of starts, and recombines
//! (C1, C2) into amplitude C >= 0 and phase phi. Residuals are invariant
//! under (C, phi) -> (-C, phi +/- pi), so C >= 0 is the canonical gauge.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    /// Accelerating trend, t < t_c.
    Bubble,
    /// Decelerating trend, t > t_c.
    Antibubble,
}

/// Parameters of the log-periodic model. `omega` is derived from `lambda`
/// and never set independently.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LpplParams {
    /// Log-price offset.
    pub a: f64,
    /// Power-law amplitude.
    pub b: f64,
    /// Oscillation amplitude, canonicalized to C >= 0 by the fitter.
    pub c: f64,
    /// Power-law exponent in (0, 1).
    pub m: f64,
    /// Preferred scaling factor; lambda = 2 throughout the reference fits.
    pub lambda: f64,
    /// Phase in (-pi, pi].
    pub phi: f64,
    /// Critical time, epoch seconds.
    pub t_c: i64,
    pub phase_kind: PhaseKind,
}

impl LpplParams {
    /// Angular log-frequency 2 pi / ln(lambda).
    pub fn omega(&self) -> f64 {
        std::f64::consts::TAU / self.lambda.ln()
    }

    /// Signed distance from the critical time in days; positive on the valid
    /// side of the phase.
    fn tau_days(&self, t: i64) -> f64 {
        let delta = match self.phase_kind {
            PhaseKind::Bubble => self.t_c - t,
            PhaseKind::Antibubble => t - self.t_c,
        };
        delta as f64 / SECONDS_PER_DAY
    }
}

/// Evaluates the model at epoch second `t`, which must lie strictly on the
/// phase side of t_c (the logarithm is singular at t = t_c).
pub fn lppl_eval(params: &LpplParams, t: i64) -> Result<f64> {
    let tau = params.tau_days(t);
    if !(tau > 0.0) {
        return Err(Error::TimeOutsidePhase { t, t_c: params.t_c });
    }
    let omega = params.omega();
    let tau_m = tau.powf(params.m);
    Ok(params.a + params.b * tau_m + params.c * tau_m * (omega * tau.ln() - params.phi).cos())
}

/// A completed fit with its goodness-of-fit measures.
#[derive(Debug, Clone, Serialize)]
pub struct LpplFit {
    pub params: LpplParams,
    pub rss: f64,
    pub spearman_rho: f64,
    /// (first, last) epoch seconds of the fitted window.
    pub window: (i64, i64),
}

/// Number of interior grid starts used when the caller does not override the
/// multistart count.
pub const DEFAULT_MULTISTART: usize = 17;

struct Design {
    tau: Vec<f64>,
    log_tau: Vec<f64>,
    y: Vec<f64>,
    omega: f64,
}

impl Design {
    /// rss and linear coefficients (A, B, C1, C2) at a fixed exponent m.
    fn solve_at(&self, m: f64) -> Option<(Vec<f64>, f64)> {
        let n = self.y.len();
        let mut ones = Vec::with_capacity(n);
        let mut pow = Vec::with_capacity(n);
        let mut cos_col = Vec::with_capacity(n);
        let mut sin_col = Vec::with_capacity(n);
        for i in 0..n {
            let tm = self.tau[i].powf(m);
            let angle = self.omega * self.log_tau[i];
            ones.push(1.0);
            pow.push(tm);
            cos_col.push(tm * angle.cos());
            sin_col.push(tm * angle.sin());
        }
        fit::least_squares(&[ones, pow, cos_col, sin_col], &self.y)
    }

    fn rss_at(&self, m: f64) -> f64 {
        self.solve_at(m).map_or(f64::INFINITY, |(_, rss)| rss)
    }
}

/// Golden-section minimization of rss over m in [lo, hi].
fn golden_section(design: &Design, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = design.rss_at(c);
    let mut fd = design.rss_at(d);
    for _ in 0..80 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = design.rss_at(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = design.rss_at(d);
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let m = 0.5 * (lo + hi);
    (m, design.rss_at(m))
}

/// Fits the model to (epoch second, log price) pairs with fixed t_c and
/// lambda.
///
/// The exponent m is located by derivative-free local searches launched from
/// `multistart` equally spaced interior points of `m_bounds`; each candidate
/// solves the remaining parameters exactly by linear least squares. The best
/// converged candidate wins, ties broken by the lower start index.
pub fn lppl_fit(
    points: &[(i64, f64)],
    t_c: i64,
    phase_kind: PhaseKind,
    lambda: f64,
    m_bounds: (f64, f64),
    multistart: usize,
) -> Result<LpplFit> {
    if points.len() < 100 {
        return Err(Error::InsufficientData {
            required: 100,
            actual: points.len(),
        });
    }
    if !(lambda > 0.0) || lambda == 1.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            constraint: "scaling factor must be positive and different from 1",
        });
    }
    let (m_lo, m_hi) = m_bounds;
    if !(m_lo > 0.0 && m_hi < 1.0 && m_lo < m_hi) {
        return Err(Error::InvalidParameter {
            name: "m_bounds",
            value: m_lo,
            constraint: "bounds must satisfy 0 < lo < hi < 1",
        });
    }
    if multistart == 0 {
        return Err(Error::InvalidParameter {
            name: "multistart",
            value: 0.0,
            constraint: "at least one start is required",
        });
    }

    let omega = std::f64::consts::TAU / lambda.ln();
    let mut tau = Vec::with_capacity(points.len());
    let mut y = Vec::with_capacity(points.len());
    for &(t, log_p) in points {
        let delta = match phase_kind {
            PhaseKind::Bubble => t_c - t,
            PhaseKind::Antibubble => t - t_c,
        };
        if delta <= 0 {
            return Err(Error::TimeOutsidePhase { t, t_c });
        }
        tau.push(delta as f64 / SECONDS_PER_DAY);
        y.push(log_p);
    }
    let y_mean = fit::mean(&y);
    if fit::population_variance(&y, y_mean) == 0.0 {
        return Err(Error::DegenerateInput(
            "constant log-prices give a degenerate design".to_string(),
        ));
    }
    let log_tau: Vec<f64> = tau.iter().map(|t| t.ln()).collect();
    let design = Design {
        tau,
        log_tau,
        y,
        omega,
    };

    // Interior start grid; each start searches its own bracket so distinct
    // local minima of rss(m) survive into the best-of selection.
    let span = (m_hi - m_lo) / (multistart + 1) as f64;
    let mut best: Option<(f64, f64)> = None;
    for j in 0..multistart {
        let start = m_lo + span * (j + 1) as f64;
        let (m, rss) = golden_section(&design, (start - span).max(m_lo), (start + span).min(m_hi));
        if !rss.is_finite() {
            continue;
        }
        if best.map_or(true, |(_, b)| rss < b) {
            best = Some((m, rss));
        }
    }
    let (m, rss) = best.ok_or(Error::NoConvergedStart)?;
    let (beta, rss_check) = design.solve_at(m).ok_or(Error::NoConvergedStart)?;
    debug_assert!((rss_check - rss).abs() <= 1e-9 * rss.max(1e-300));

    let (a, b, c1, c2) = (beta[0], beta[1], beta[2], beta[3]);
    let c = (c1 * c1 + c2 * c2).sqrt();
    let mut phi = c2.atan2(c1);
    if phi == -std::f64::consts::PI {
        phi = std::f64::consts::PI;
    }
    let params = LpplParams {
        a,
        b,
        c,
        m,
        lambda,
        phi,
        t_c,
        phase_kind,
    };

    let fitted: Vec<f64> = points
        .iter()
        .map(|&(t, _)| lppl_eval(&params, t))
        .collect::<Result<_>>()?;
    let observed: Vec<f64> = points.iter().map(|&(_, p)| p).collect();
    let spearman_rho = spearman(&fitted, &observed)?;

    let t_start = points.iter().map(|p| p.0).min().unwrap();
    let t_end = points.iter().map(|p| p.0).max().unwrap();
    Ok(LpplFit {
        params,
        rss,
        spearman_rho,
        window: (t_start, t_end),
    })
}

/// One candidate of a coarse critical-time scan.
#[derive(Debug, Clone, Serialize)]
pub struct TcScanPoint {
    pub t_c: i64,
    pub rss: f64,
    pub spearman_rho: f64,
    pub m: f64,
    /// Points on the phase side of this candidate.
    pub n_points: usize,
}

/// Coarse scan of the critical time: refits the model at every candidate
/// t_c, using the subset of points strictly on the phase side of that
/// candidate. Candidates with fewer than 100 usable points (or where no fit
/// start converges) are skipped.
pub fn tc_scan(
    points: &[(i64, f64)],
    candidates: &[i64],
    phase_kind: PhaseKind,
    lambda: f64,
    m_bounds: (f64, f64),
    multistart: usize,
) -> Result<Vec<TcScanPoint>> {
    let mut out = Vec::new();
    for &t_c in candidates {
        let subset: Vec<(i64, f64)> = points
            .iter()
            .filter(|&&(t, _)| match phase_kind {
                PhaseKind::Bubble => t < t_c,
                PhaseKind::Antibubble => t > t_c,
            })
            .cloned()
            .collect();
        match lppl_fit(&subset, t_c, phase_kind, lambda, m_bounds, multistart) {
            Ok(fit) => out.push(TcScanPoint {
                t_c,
                rss: fit.rss,
                spearman_rho: fit.spearman_rho,
                m: fit.params.m,
                n_points: subset.len(),
            }),
            Err(Error::InsufficientData { .. }) | Err(Error::NoConvergedStart) => continue,
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(Error::NoConvergedStart);
    }
    Ok(out)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Ties share the average of the ranks they span (1-based).
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman rank-order correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            actual: x.len(),
        });
    }
    if let Some(i) = x.iter().chain(y.iter()).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i % x.len() });
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mx = fit::mean(&rx);
    let my = fit::mean(&ry);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..rx.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "rank correlation of a constant sequence is undefined".to_string(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    /// Reference bubble parameters quoted alongside the Dec 16, 2017 reversal.
    fn reference_bubble(t_c: i64) -> LpplParams {
        LpplParams {
            a: 10.2,
            b: -0.32,
            c: 0.05,
            m: 0.4,
            lambda: 2.0,
            phi: 2.12,
            t_c,
            phase_kind: PhaseKind::Bubble,
        }
    }

    #[test]
    fn eval_without_oscillation_at_unit_time() {
        let params = LpplParams {
            c: 0.0,
            ..reference_bubble(86_400)
        };
        // tau = 1 day => A + B.
        let v = lppl_eval(&params, 0).unwrap();
        assert!((v - (10.2 - 0.32)).abs() < 1e-12);
    }

    #[test]
    fn eval_reference_point_one_day_out() {
        let t_c = 1_513_382_400; // 2017-12-16T00:00:00Z
        let params = reference_bubble(t_c);
        let v = lppl_eval(&params, t_c - 86_400).unwrap();
        let expected = 10.2 - 0.32 + 0.05 * (-2.12f64).cos();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 9.854).abs() < 1e-3);
    }

    #[test]
    fn eval_rejects_critical_time_and_wrong_side() {
        let params = reference_bubble(1000 * 86_400);
        assert!(matches!(
            lppl_eval(&params, params.t_c),
            Err(Error::TimeOutsidePhase { .. })
        ));
        assert!(lppl_eval(&params, params.t_c + 86_400).is_err());
        let anti = LpplParams {
            phase_kind: PhaseKind::Antibubble,
            ..params
        };
        assert!(lppl_eval(&anti, params.t_c - 86_400).is_err());
        assert!(lppl_eval(&anti, params.t_c + 86_400).is_ok());
    }

    #[test]
    fn oscillation_repeats_every_factor_lambda() {
        // Discrete scale invariance: the cosine factor is identical at tau
        // and lambda * tau.
        let params = reference_bubble(0);
        let omega = params.omega();
        assert!(((std::f64::consts::TAU / omega).exp() - params.lambda).abs() < 1e-12);
        for &tau in &[1.0f64, 3.7, 40.0] {
            let a = (omega * tau.ln() - params.phi).cos();
            let b = (omega * (tau * params.lambda).ln() - params.phi).cos();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn gauge_transformation_leaves_values_unchanged() {
        let params = reference_bubble(500 * 86_400);
        let flipped = LpplParams {
            c: -params.c,
            phi: params.phi - std::f64::consts::PI,
            ..params
        };
        for day in 1..400 {
            let t = params.t_c - day * 86_400;
            let a = lppl_eval(&params, t).unwrap();
            let b = lppl_eval(&flipped, t).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn synthesize(params: &LpplParams, days: i64, noise_sigma: f64, seed: u64) -> Vec<(i64, f64)> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (1..=days)
            .map(|d| {
                let t = match params.phase_kind {
                    PhaseKind::Bubble => params.t_c - d * 86_400,
                    PhaseKind::Antibubble => params.t_c + d * 86_400,
                };
                let noise: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sigma;
                (t, lppl_eval(params, t).unwrap() + noise)
            })
            .collect()
    }

    #[test]
    fn fit_recovers_bubble_parameters() {
        let t_c = 1_513_382_400;
        let truth = reference_bubble(t_c);
        let data = synthesize(&truth, 250, 0.01, 2024);
        let fit = lppl_fit(&data, t_c, PhaseKind::Bubble, 2.0, (0.1, 0.9), 17).unwrap();
        assert!((fit.params.m - 0.4).abs() < 0.05, "m = {}", fit.params.m);
        assert!(
            (fit.params.phi - 2.12).abs() < 0.3,
            "phi = {}",
            fit.params.phi
        );
        assert!(fit.spearman_rho >= 0.95, "rho = {}", fit.spearman_rho);
        assert!(fit.params.c >= 0.0);
    }

    #[test]
    fn fit_recovers_antibubble_parameters() {
        let t_c = 1_513_382_400;
        let truth = LpplParams {
            phase_kind: PhaseKind::Antibubble,
            ..reference_bubble(t_c)
        };
        let data = synthesize(&truth, 250, 0.01, 2025);
        let fit = lppl_fit(&data, t_c, PhaseKind::Antibubble, 2.0, (0.1, 0.9), 17).unwrap();
        assert!((fit.params.m - 0.4).abs() < 0.05);
        assert!((fit.params.phi - 2.12).abs() < 0.3);
        assert!(fit.spearman_rho >= 0.95);
    }

    #[test]
    fn pure_power_law_recovers_negligible_oscillation() {
        let t_c = 1_000_000 * 86_400 / 86_400 * 86_400;
        let truth = LpplParams {
            c: 0.0,
            ..reference_bubble(t_c)
        };
        let data = synthesize(&truth, 250, 0.001, 7);
        let fit = lppl_fit(&data, t_c, PhaseKind::Bubble, 2.0, (0.1, 0.9), 17).unwrap();
        assert!(fit.params.c.abs() <= 0.01, "c = {}", fit.params.c);
        // Noise floor: rss ~ n * sigma^2.
        assert!(fit.rss < 250.0 * 0.001f64.powi(2) * 3.0);
    }

    #[test]
    fn multistart_never_worsens_the_best_candidate() {
        let t_c = 1_513_382_400;
        let data = synthesize(&reference_bubble(t_c), 200, 0.02, 99);
        let coarse = lppl_fit(&data, t_c, PhaseKind::Bubble, 2.0, (0.1, 0.9), 1).unwrap();
        let fine = lppl_fit(&data, t_c, PhaseKind::Bubble, 2.0, (0.1, 0.9), 17).unwrap();
        assert!(fine.rss <= coarse.rss + 1e-12);
    }

    #[test]
    fn fit_rejects_constant_prices_and_wrong_side() {
        let t_c = 86_400 * 1000;
        let flat: Vec<(i64, f64)> = (1..=150).map(|d| (t_c - d * 86_400, 3.0)).collect();
        assert!(matches!(
            lppl_fit(&flat, t_c, PhaseKind::Bubble, 2.0, (0.1, 0.9), 5),
            Err(Error::DegenerateInput(_))
        ));
        let crossing: Vec<(i64, f64)> = (-5..145).map(|d| (t_c - d * 86_400, 3.0)).collect();
        assert!(matches!(
            lppl_fit(&crossing, t_c, PhaseKind::Bubble, 2.0, (0.1, 0.9), 5),
            Err(Error::TimeOutsidePhase { .. })
        ));
    }

    #[test]
    fn tc_scan_prefers_the_true_critical_time() {
        let t_c = 1_513_382_400;
        let truth = reference_bubble(t_c);
        let data = synthesize(&truth, 300, 0.01, 31);
        // Candidates every 5 days across +/- 30 days around the truth.
        let candidates: Vec<i64> = (-6..=6).map(|k| t_c + k * 5 * 86_400).collect();
        let scan = tc_scan(&data, &candidates, PhaseKind::Bubble, 2.0, (0.1, 0.9), 9).unwrap();
        let best = scan
            .iter()
            .min_by(|a, b| {
                let (na, nb) = (a.rss / a.n_points as f64, b.rss / b.n_points as f64);
                na.partial_cmp(&nb).unwrap()
            })
            .unwrap();
        assert!(
            (best.t_c - t_c).abs() <= 5 * 86_400,
            "scan minimum at {} vs true {}",
            best.t_c,
            t_c
        );
    }

    #[test]
    fn spearman_monotone_map_is_one() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 7.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_reversal_is_minus_one() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &y).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties_with_average_ranks() {
        let x = [1.0, 2.0, 2.0, 3.0];
        let y = [1.0, 2.0, 2.0, 3.0];
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_rejects_degenerate_input() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
