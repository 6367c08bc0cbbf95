//! Small shared numerics: moments, log-log regression, and dense least squares
//! via modified Gram-Schmidt QR.

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divisor n). Every module shares this convention.
pub(crate) fn population_variance(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LineFit {
    pub slope: f64,
    #[allow(dead_code)]
    pub intercept: f64,
    /// Standard error of the slope, SSR/(n-2) based. NaN when n < 3.
    pub slope_stderr: f64,
}

/// Ordinary least squares y = a + b x. Returns None when fewer than two
/// points or the abscissae are all equal.
pub(crate) fn ols_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let xm = mean(x);
    let ym = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - xm;
        sxx += dx * dx;
        sxy += dx * (y[i] - ym);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let slope_stderr = if n > 2 {
        let ssr: f64 = (0..n)
            .map(|i| {
                let r = y[i] - intercept - slope * x[i];
                r * r
            })
            .sum();
        (ssr / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// Orthonormal basis spanning the same column space as `cols`.
///
/// Modified Gram-Schmidt with one re-orthogonalization pass; adequate for the
/// low-order polynomial and LPPL design matrices used here. Returns None when
/// a column is (numerically) linearly dependent on its predecessors.
fn orthonormalize(cols: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = cols.first()?.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for col in cols {
        let mut v = col.clone();
        for _pass in 0..2 {
            for qi in &q {
                let dot: f64 = qi.iter().zip(&v).map(|(a, b)| a * b).sum();
                for k in 0..n {
                    v[k] -= dot * qi[k];
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let col_norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 1e-13 * col_norm.max(1e-300)) {
            return None;
        }
        for x in &mut v {
            *x /= norm;
        }
        q.push(v);
    }
    Some(q)
}

/// Least squares solve min ||y - X b|| for a skinny dense design given as
/// columns. Returns (coefficients, residual sum of squares), or None for a
/// rank-deficient design.
pub(crate) fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = cols.len();
    let n = y.len();
    if p == 0 || n < p {
        return None;
    }
    // QR via MGS, keeping R to recover coefficients in the original basis.
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut r = vec![vec![0.0; p]; p];
    for (j, col) in cols.iter().enumerate() {
        let mut v = col.clone();
        for _pass in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let dot: f64 = qi.iter().zip(&v).map(|(a, b)| a * b).sum();
                r[i][j] += dot;
                for k in 0..n {
                    v[k] -= dot * qi[k];
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let col_norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 1e-13 * col_norm.max(1e-300)) {
            return None;
        }
        r[j][j] = norm;
        for x in &mut v {
            *x /= norm;
        }
        q.push(v);
    }
    // beta = R^{-1} Q^T y by back-substitution.
    let qty: Vec<f64> = q
        .iter()
        .map(|qi| qi.iter().zip(y).map(|(a, b)| a * b).sum())
        .collect();
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut acc = qty[i];
        for j in i + 1..p {
            acc -= r[i][j] * beta[j];
        }
        beta[i] = acc / r[i][i];
    }
    let mut rss = 0.0;
    for k in 0..n {
        let mut fit = 0.0;
        for j in 0..p {
            fit += beta[j] * cols[j][k];
        }
        let e = y[k] - fit;
        rss += e * e;
    }
    Some((beta, rss))
}

/// Orthonormal polynomial basis of order `m` on `len` equally spaced points,
/// built on abscissae rescaled to [-1, 1] so that high orders at large
/// segment lengths stay well conditioned.
pub(crate) struct DetrendBasis {
    q: Vec<Vec<f64>>,
}

impl DetrendBasis {
    pub fn new(len: usize, order: usize) -> Self {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        let scale = if len > 1 { 2.0 / (len - 1) as f64 } else { 0.0 };
        for j in 0..=order {
            let col = (0..len)
                .map(|k| {
                    let t = k as f64 * scale - 1.0;
                    t.powi(j as i32)
                })
                .collect();
            cols.push(col);
        }
        let q = orthonormalize(&cols).expect("polynomial basis is full rank");
        DetrendBasis { q }
    }

    pub fn len(&self) -> usize {
        self.q[0].len()
    }

    /// Writes y minus its least-squares polynomial fit into `out`.
    pub fn residual_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.len());
        let coeff: Vec<f64> = self
            .q
            .iter()
            .map(|qi| qi.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect();
        for k in 0..y.len() {
            let mut fit = 0.0;
            for (j, qi) in self.q.iter().enumerate() {
                fit += coeff[j] * qi[k];
            }
            out[k] = y[k] - fit;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_slope() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.25 * v).collect();
        let fit = ols_line(&x, &y).unwrap();
        assert!((fit.slope + 0.25).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-9);
    }

    #[test]
    fn least_squares_exact_on_noiseless_design() {
        let n = 100;
        let c0: Vec<f64> = vec![1.0; n];
        let c1: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let c2: Vec<f64> = c1.iter().map(|t| t * t).collect();
        let y: Vec<f64> = (0..n).map(|i| 2.0 - c1[i] + 0.5 * c2[i]).collect();
        let (beta, rss) = least_squares(&[c0, c1, c2], &y).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-10);
        assert!((beta[1] + 1.0).abs() < 1e-9);
        assert!((beta[2] - 0.5).abs() < 1e-9);
        assert!(rss < 1e-18);
    }

    #[test]
    fn detrend_basis_annihilates_polynomials() {
        let basis = DetrendBasis::new(10_000, 2);
        let y: Vec<f64> = (0..10_000)
            .map(|k| {
                let k = k as f64;
                5.0e3 + 2.0 * k - 3.0e-4 * k * k
            })
            .collect();
        let mut out = vec![0.0; y.len()];
        basis.residual_into(&y, &mut out);
        let rms = (out.iter().map(|v| v * v).sum::<f64>() / out.len() as f64).sqrt();
        let y_rms = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
        assert!(rms < 1e-10 * y_rms, "rms {} vs signal {}", rms, y_rms);
    }

    #[test]
    fn rank_deficient_design_rejected() {
        let c0 = vec![1.0; 8];
        let c1 = vec![2.0; 8];
        assert!(least_squares(&[c0, c1], &[0.0; 8].to_vec()).is_none());
    }
}
