//! Two-series multifractal cross-correlation analysis.
//!
//! The detrended covariance of two profiles keeps its sign, so the q-th
//! order covariance uses the sign-preserving power
//! sign(F^2) |F^2|^{q/2} and the scaling function carries the sign through a
//! signed 1/q root. The q-dependent detrended cross-correlation coefficient
//! rho_q(s) normalizes the q-th order cross covariance by the two
//! single-series moments of the same segments.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{self, DetrendBasis};
use crate::mfdfa::{
    profile, segment_starts, validate_segment_args, HurstCurve, QGrid, ScaleGrid,
    ZERO_RESIDUAL_POWER_REL,
};

/// Per-segment detrended covariances F^2_xy(nu, s) of two profiles, signed,
/// in segment order.
///
/// Covariances whose magnitude is below the exact-detrending floor (the same
/// rule as single-series MFDFA, with the geometric mean of the two segment
/// powers as reference) are reported as exactly 0.0.
pub fn segment_covariances(
    profile_x: &[f64],
    profile_y: &[f64],
    s: usize,
    m: usize,
) -> Result<Vec<f64>> {
    if profile_x.len() != profile_y.len() {
        return Err(Error::LengthMismatch {
            x: profile_x.len(),
            y: profile_y.len(),
        });
    }
    validate_segment_args(profile_x.len(), s, m)?;
    let basis = DetrendBasis::new(s, m);
    let mut rx = vec![0.0; s];
    let mut ry = vec![0.0; s];
    let out = segment_starts(profile_x.len(), s)
        .into_iter()
        .map(|start| {
            let wx = &profile_x[start..start + s];
            let wy = &profile_y[start..start + s];
            basis.residual_into(wx, &mut rx);
            basis.residual_into(wy, &mut ry);
            let cov = rx.iter().zip(&ry).map(|(a, b)| a * b).sum::<f64>() / s as f64;
            let px = wx.iter().map(|v| v * v).sum::<f64>() / s as f64;
            let py = wy.iter().map(|v| v * v).sum::<f64>() / s as f64;
            if cov.abs() <= ZERO_RESIDUAL_POWER_REL * (px * py).sqrt() {
                0.0
            } else {
                cov
            }
        })
        .collect();
    Ok(out)
}

/// Mean over segments of sign(F^2) |F^2|^{q/2}; the building block of both
/// F_xy(q,s) and rho_q(s).
fn signed_moment(cov2: &[f64], q: f64) -> f64 {
    let inv_n = 1.0 / cov2.len() as f64;
    cov2.iter()
        .map(|&c| c.signum() * c.abs().powf(q / 2.0))
        .sum::<f64>()
        * inv_n
}

/// Signed 1/q root, sign(mean) |mean|^{1/q}; keeps negative covariance means
/// visible instead of producing complex values.
fn signed_root(mean: f64, q: f64) -> f64 {
    if !mean.is_finite() {
        f64::NAN
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * mean.abs().powf(1.0 / q)
    }
}

/// Signed F_xy(q, s) surface.
#[derive(Debug, Clone)]
pub struct CrossFluctuationSurface {
    pub q_grid: QGrid,
    pub scale_grid: ScaleGrid,
    f_xy: Vec<f64>,
    /// Per-scale count of segments with negative detrended covariance. The
    /// count is q-independent by construction.
    pub negative_covariance_counts: Vec<usize>,
}

impl CrossFluctuationSurface {
    pub fn value(&self, q_index: usize, s_index: usize) -> f64 {
        self.f_xy[q_index * self.scale_grid.values().len() + s_index]
    }
}

/// Cross fluctuation function of two equally long series. With y = x this
/// reproduces the single-series surface exactly, and negating one input
/// negates every entry.
pub fn cross_fluctuation(
    x: &[f64],
    y: &[f64],
    q_grid: &QGrid,
    scale_grid: &ScaleGrid,
    m: usize,
) -> Result<CrossFluctuationSurface> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let t = x.len();
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
    let px = profile(x);
    let py = profile(y);
    let n_s = scale_grid.values().len();
    let mut f_xy = vec![0.0; q_grid.len() * n_s];
    let mut negative_covariance_counts = vec![0usize; n_s];

    for (si, &s) in scale_grid.values().iter().enumerate() {
        let cov2 = segment_covariances(&px, &py, s, m)?;
        negative_covariance_counts[si] = cov2.iter().filter(|&&c| c < 0.0).count();
        for (qi, &q) in q_grid.values().iter().enumerate() {
            f_xy[qi * n_s + si] = signed_root(signed_moment(&cov2, q), q);
        }
    }

    Ok(CrossFluctuationSurface {
        q_grid: q_grid.clone(),
        scale_grid: scale_grid.clone(),
        f_xy,
        negative_covariance_counts,
    })
}

/// One cross-correlation scaling exponent.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LambdaPoint {
    pub q: f64,
    /// Scaling exponent of F_xy(q,s); NaN when `scaling_ok` is false.
    pub lambda: f64,
    pub stderr: f64,
    /// Average generalized Hurst exponent (h_x(q) + h_y(q)) / 2, NaN when a
    /// single-series exponent is unavailable at this q.
    pub h_xy: f64,
    /// False when F_xy(q,s) is non-positive anywhere inside the fit range; no
    /// lambda is emitted then.
    pub scaling_ok: bool,
}

/// lambda_q next to the average single-series exponents.
#[derive(Debug, Clone)]
pub struct LambdaCurve {
    pub points: Vec<LambdaPoint>,
    pub fit_range: (usize, usize),
}

/// Fits lambda_q = slope of log F_xy(q,s) vs log s wherever the covariance
/// stayed positive across the whole inclusive fit range.
pub fn fit_lambda(
    surface: &CrossFluctuationSurface,
    fit_range: (usize, usize),
    h_x: &HurstCurve,
    h_y: &HurstCurve,
) -> Result<LambdaCurve> {
    let (s_lo, s_hi) = fit_range;
    let idx: Vec<usize> = surface
        .scale_grid
        .values()
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s >= s_lo && s <= s_hi)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < crate::mfdfa::MIN_FIT_SCALES {
        return Err(Error::InsufficientData {
            required: crate::mfdfa::MIN_FIT_SCALES,
            actual: idx.len(),
        });
    }
    let log_s: Vec<f64> = idx
        .iter()
        .map(|&i| (surface.scale_grid.values()[i] as f64).ln())
        .collect();

    let mut points = Vec::new();
    let mut any_ok = false;
    for (qi, &q) in surface.q_grid.values().iter().enumerate() {
        let fs: Vec<f64> = idx.iter().map(|&i| surface.value(qi, i)).collect();
        let h_xy = match (h_x.h_at(q), h_y.h_at(q)) {
            (Some(a), Some(b)) => (a.h + b.h) / 2.0,
            _ => f64::NAN,
        };
        let usable = fs.iter().all(|&v| v.is_finite() && v > 0.0);
        if !usable {
            points.push(LambdaPoint {
                q,
                lambda: f64::NAN,
                stderr: f64::NAN,
                h_xy,
                scaling_ok: false,
            });
            continue;
        }
        let log_f: Vec<f64> = fs.iter().map(|v| v.ln()).collect();
        match fit::ols_line(&log_s, &log_f) {
            Some(line) => {
                any_ok = true;
                points.push(LambdaPoint {
                    q,
                    lambda: line.slope,
                    stderr: line.slope_stderr,
                    h_xy,
                    scaling_ok: true,
                });
            }
            None => points.push(LambdaPoint {
                q,
                lambda: f64::NAN,
                stderr: f64::NAN,
                h_xy,
                scaling_ok: false,
            }),
        }
    }
    if !any_ok {
        return Err(Error::NoUsableScaling);
    }
    Ok(LambdaCurve { points, fit_range })
}

/// rho_q(s) over a set of positive q values and a scale grid.
#[derive(Debug, Clone)]
pub struct RhoProfile {
    pub q: Vec<f64>,
    pub scale_grid: ScaleGrid,
    rho: Vec<f64>,
}

impl RhoProfile {
    pub fn value(&self, q_index: usize, s_index: usize) -> f64 {
        self.rho[q_index * self.scale_grid.values().len() + s_index]
    }
}

/// q-dependent detrended cross-correlation coefficient
/// rho_q(s) = F^q_xy(s) / sqrt(F^q_xx(s) F^q_yy(s)), with numerator and
/// denominators built from the same segmentation and detrending order.
pub fn rho_profile(
    x: &[f64],
    y: &[f64],
    q_values: &[f64],
    scale_grid: &ScaleGrid,
    m: usize,
) -> Result<RhoProfile> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    for &q in q_values {
        if !(q > 0.0) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: q,
                constraint: "rho_q requires q > 0",
            });
        }
    }
    let t = x.len();
    validate_segment_args(t, scale_grid.min(), m)?;
    if scale_grid.max() * 4 > t {
        return Err(Error::InvalidParameter {
            name: "s_max",
            value: scale_grid.max() as f64,
            constraint: "largest scale must admit at least 4 segments (s <= T/4)",
        });
    }
    let px = profile(x);
    let py = profile(y);
    let n_s = scale_grid.values().len();
    let mut rho = vec![0.0; q_values.len() * n_s];

    for (si, &s) in scale_grid.values().iter().enumerate() {
        let cov_xy = segment_covariances(&px, &py, s, m)?;
        let cov_xx = segment_covariances(&px, &px, s, m)?;
        let cov_yy = segment_covariances(&py, &py, s, m)?;
        for (qi, &q) in q_values.iter().enumerate() {
            let num = signed_moment(&cov_xy, q);
            let dxx = signed_moment(&cov_xx, q);
            let dyy = signed_moment(&cov_yy, q);
            let denom = (dxx * dyy).sqrt();
            if !(denom > 0.0) || !denom.is_finite() {
                return Err(Error::DegenerateInput(format!(
                    "zero denominator in rho_q at q={q}, s={s} (constant series?)"
                )));
            }
            rho[qi * n_s + si] = num / denom;
        }
    }
    Ok(RhoProfile {
        q: q_values.to_vec(),
        scale_grid: scale_grid.clone(),
        rho,
    })
}

/// Single-q convenience wrapper around [`rho_profile`].
pub fn rho_q(x: &[f64], y: &[f64], q: f64, scale_grid: &ScaleGrid, m: usize) -> Result<Vec<f64>> {
    let profile = rho_profile(x, y, &[q], scale_grid, m)?;
    Ok((0..scale_grid.values().len())
        .map(|si| profile.value(0, si))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfdfa::{fit_generalized_hurst, fluctuation_function};
    use crate::surrogate::{white_noise, Marginal, Seed};

    fn default_grids(len: usize) -> (QGrid, ScaleGrid) {
        (
            QGrid::uniform(0.4, 4.0, 0.4).unwrap(),
            ScaleGrid::for_length(len, 16, 12).unwrap(),
        )
    }

    #[test]
    fn self_cross_reproduces_single_series_surface() {
        let x = white_noise(8192, Seed(31), Marginal::Gaussian).unwrap();
        let (q_grid, scale_grid) = default_grids(x.len());
        let cross = cross_fluctuation(&x, &x, &q_grid, &scale_grid, 2).unwrap();
        let single = fluctuation_function(&x, &q_grid, &scale_grid, 2).unwrap();
        for qi in 0..q_grid.len() {
            for si in 0..scale_grid.values().len() {
                let (a, b) = (cross.value(qi, si), single.value(qi, si));
                assert!(
                    (a - b).abs() <= 1e-12 * b.abs(),
                    "qi={qi} si={si}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn negated_input_negates_every_entry() {
        let x = white_noise(4096, Seed(37), Marginal::Gaussian).unwrap();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let (q_grid, scale_grid) = default_grids(x.len());
        let plus = cross_fluctuation(&x, &x, &q_grid, &scale_grid, 2).unwrap();
        let minus = cross_fluctuation(&x, &y, &q_grid, &scale_grid, 2).unwrap();
        for qi in 0..q_grid.len() {
            for si in 0..scale_grid.values().len() {
                assert_eq!(minus.value(qi, si), -plus.value(qi, si));
            }
        }
        let m_s = x.len() / scale_grid.values()[0];
        assert_eq!(minus.negative_covariance_counts[0], 2 * m_s);
    }

    #[test]
    fn independent_noise_covariance_fluctuates_in_sign() {
        let x = white_noise(100_000, Seed(41), Marginal::Gaussian).unwrap();
        let y = white_noise(100_000, Seed(141), Marginal::Gaussian).unwrap();
        let q_grid = QGrid::new(vec![0.4], false).unwrap();
        let scale_grid = ScaleGrid::geometric(100, 10_000, 12).unwrap();
        let surface = cross_fluctuation(&x, &y, &q_grid, &scale_grid, 2).unwrap();
        let signs: Vec<f64> = (0..scale_grid.values().len())
            .map(|si| surface.value(0, si).signum())
            .collect();
        assert!(signs.iter().any(|&s| s > 0.0) && signs.iter().any(|&s| s < 0.0));
    }

    #[test]
    fn lambda_matches_hurst_for_identical_series() {
        let x = white_noise(32_768, Seed(43), Marginal::Gaussian).unwrap();
        let (q_grid, scale_grid) = default_grids(x.len());
        let fit_range = (64, 4096);
        let surface = cross_fluctuation(&x, &x, &q_grid, &scale_grid, 2).unwrap();
        let single = fluctuation_function(&x, &q_grid, &scale_grid, 2).unwrap();
        let h = fit_generalized_hurst(&single, fit_range).unwrap();
        let lambda = fit_lambda(&surface, fit_range, &h, &h).unwrap();
        for p in &lambda.points {
            assert!(p.scaling_ok);
            let hp = h.h_at(p.q).unwrap();
            assert!(
                (p.lambda - hp.h).abs() < 3.0 * (p.stderr + hp.stderr).max(1e-6),
                "q={} lambda={} h={}",
                p.q,
                p.lambda,
                hp.h
            );
            assert!((p.h_xy - hp.h).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_pair_yields_no_scaling_at_small_q() {
        let x = white_noise(65_536, Seed(47), Marginal::Gaussian).unwrap();
        let y = white_noise(65_536, Seed(147), Marginal::Gaussian).unwrap();
        let q_grid = QGrid::uniform(0.4, 4.0, 0.4).unwrap();
        let scale_grid = ScaleGrid::geometric(100, 16_384, 14).unwrap();
        let surface = cross_fluctuation(&x, &y, &q_grid, &scale_grid, 2).unwrap();
        let single_x = fluctuation_function(&x, &q_grid, &scale_grid, 2).unwrap();
        let single_y = fluctuation_function(&y, &q_grid, &scale_grid, 2).unwrap();
        let fit_range = (100, 10_000);
        let h_x = fit_generalized_hurst(&single_x, fit_range).unwrap();
        let h_y = fit_generalized_hurst(&single_y, fit_range).unwrap();
        match fit_lambda(&surface, fit_range, &h_x, &h_y) {
            Ok(curve) => {
                let small_q = &curve.points[0];
                assert!(!small_q.scaling_ok, "q=0.4 should not scale");
            }
            Err(Error::NoUsableScaling) => {}
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn rho_is_exactly_one_for_identical_series() {
        let x = white_noise(8192, Seed(53), Marginal::Gaussian).unwrap();
        let scale_grid = ScaleGrid::for_length(x.len(), 16, 10).unwrap();
        for q in [1.0, 2.0, 3.0, 4.0] {
            let rho = rho_q(&x, &x, q, &scale_grid, 2).unwrap();
            assert!(rho.iter().all(|&r| r == 1.0), "q={q} rho={rho:?}");
        }
    }

    #[test]
    fn rho_is_exactly_minus_one_for_negated_series() {
        let x = white_noise(8192, Seed(59), Marginal::Gaussian).unwrap();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let scale_grid = ScaleGrid::for_length(x.len(), 16, 10).unwrap();
        for q in [1.0, 2.0, 3.0, 4.0] {
            let rho = rho_q(&x, &y, q, &scale_grid, 2).unwrap();
            assert!(rho.iter().all(|&r| r == -1.0), "q={q} rho={rho:?}");
        }
    }

    #[test]
    fn rho_of_independent_noise_is_small() {
        let x = white_noise(100_000, Seed(61), Marginal::Gaussian).unwrap();
        let y = white_noise(100_000, Seed(161), Marginal::Gaussian).unwrap();
        let scale_grid = ScaleGrid::geometric(100, 1000, 8).unwrap();
        let profile = rho_profile(&x, &y, &[1.0, 2.0, 3.0, 4.0], &scale_grid, 2).unwrap();
        for qi in 0..4 {
            for si in 0..scale_grid.values().len() {
                assert!(
                    profile.value(qi, si).abs() <= 0.1,
                    "q index {} s index {} rho {}",
                    qi,
                    si,
                    profile.value(qi, si)
                );
            }
        }
    }

    #[test]
    fn rho_bounded_by_one() {
        let x = white_noise(16_384, Seed(67), Marginal::StudentT { df: 3.0 }).unwrap();
        let y: Vec<f64> = x
            .iter()
            .zip(white_noise(16_384, Seed(167), Marginal::Gaussian).unwrap())
            .map(|(a, b)| 0.7 * a + 0.3 * b)
            .collect();
        let scale_grid = ScaleGrid::for_length(x.len(), 32, 10).unwrap();
        let profile = rho_profile(&x, &y, &[0.5, 1.0, 2.0, 4.0], &scale_grid, 2).unwrap();
        for qi in 0..4 {
            for si in 0..scale_grid.values().len() {
                assert!(profile.value(qi, si).abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn rho_invariant_under_positive_affine_rescaling() {
        let x = white_noise(8192, Seed(71), Marginal::Gaussian).unwrap();
        let y = white_noise(8192, Seed(171), Marginal::Gaussian).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| 3.5 * v + 11.0).collect();
        let y2: Vec<f64> = y.iter().map(|v| 0.2 * v - 4.0).collect();
        let scale_grid = ScaleGrid::for_length(x.len(), 32, 8).unwrap();
        let a = rho_profile(&x, &y, &[1.0, 3.0], &scale_grid, 2).unwrap();
        let b = rho_profile(&x2, &y2, &[1.0, 3.0], &scale_grid, 2).unwrap();
        for qi in 0..2 {
            for si in 0..scale_grid.values().len() {
                assert!(
                    (a.value(qi, si) - b.value(qi, si)).abs() < 1e-9,
                    "{} vs {}",
                    a.value(qi, si),
                    b.value(qi, si)
                );
            }
        }
    }

    #[test]
    fn rho_rejects_nonpositive_q() {
        let x = white_noise(4096, Seed(73), Marginal::Gaussian).unwrap();
        let scale_grid = ScaleGrid::for_length(x.len(), 16, 8).unwrap();
        assert!(rho_q(&x, &x, 0.0, &scale_grid, 2).is_err());
        assert!(rho_q(&x, &x, -1.0, &scale_grid, 2).is_err());
    }

    #[test]
    fn rho_rejects_constant_series() {
        let x = white_noise(4096, Seed(79), Marginal::Gaussian).unwrap();
        let y = vec![2.0; 4096];
        let scale_grid = ScaleGrid::for_length(4096, 16, 8).unwrap();
        assert!(matches!(
            rho_q(&x, &y, 2.0, &scale_grid, 2),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn length_mismatch_rejected() {
        let x = vec![1.0; 128];
        let y = vec![1.0; 127];
        let q_grid = QGrid::new(vec![2.0], false).unwrap();
        let scale_grid = ScaleGrid::new(vec![4, 8, 16]).unwrap();
        assert!(matches!(
            cross_fluctuation(&x, &y, &q_grid, &scale_grid, 2),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
