//! Log-returns, normalization and volatility.
//!
//! All mean/variance statistics here and downstream use the population
//! convention (divisor n).

use crate::error::{Error, Result};
use crate::fit;
use crate::ingest::PriceSeries;

/// Log-returns at a fixed lag in bins, with the statistics used (or usable)
/// for normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub delta_t_bins: usize,
    pub values: Vec<f64>,
    /// Mean of the values this series was derived from (see [`normalize`]).
    pub mu: f64,
    /// Population standard deviation of the same values.
    pub sigma: f64,
    pub normalized: bool,
}

fn stats_of(values: &[f64]) -> (f64, f64) {
    let mu = fit::mean(values);
    let sigma = fit::population_variance(values, mu).sqrt();
    (mu, sigma)
}

/// `values[i] = log(price[i + delta_t]) - log(price[i])`.
pub fn log_returns(series: &PriceSeries, delta_t_bins: usize) -> Result<ReturnSeries> {
    if delta_t_bins < 1 {
        return Err(Error::InvalidParameter {
            name: "delta_t_bins",
            value: delta_t_bins as f64,
            constraint: "must be at least 1",
        });
    }
    if series.len() <= delta_t_bins {
        return Err(Error::InsufficientData {
            required: delta_t_bins + 1,
            actual: series.len(),
        });
    }
    let logs: Vec<f64> = series.prices.iter().map(|p| p.ln()).collect();
    if let Some(i) = logs.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let values: Vec<f64> = (0..series.len() - delta_t_bins)
        .map(|i| logs[i + delta_t_bins] - logs[i])
        .collect();
    let (mu, sigma) = stats_of(&values);
    Ok(ReturnSeries {
        delta_t_bins,
        values,
        mu,
        sigma,
        normalized: false,
    })
}

/// Centers and rescales to zero mean, unit population standard deviation.
pub fn normalize(returns: &ReturnSeries) -> Result<ReturnSeries> {
    let (mu, sigma) = stats_of(&returns.values);
    if sigma == 0.0 {
        return Err(Error::DegenerateInput(
            "cannot normalize a constant return series (sigma = 0)".to_string(),
        ));
    }
    let values = returns.values.iter().map(|v| (v - mu) / sigma).collect();
    Ok(ReturnSeries {
        delta_t_bins: returns.delta_t_bins,
        values,
        mu,
        sigma,
        normalized: true,
    })
}

/// Absolute normalized returns. The result is a plain (non-normalized)
/// series with its own mean and standard deviation.
pub fn volatility(returns: &ReturnSeries) -> Result<ReturnSeries> {
    if !returns.normalized {
        return Err(Error::NotNormalized);
    }
    let values: Vec<f64> = returns.values.iter().map(|v| v.abs()).collect();
    let (mu, sigma) = stats_of(&values);
    Ok(ReturnSeries {
        delta_t_bins: returns.delta_t_bins,
        values,
        mu,
        sigma,
        normalized: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{regularize, PriceRecord};
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn series_of(prices: &[f64]) -> PriceSeries {
        let records: Vec<_> = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| PriceRecord {
                timestamp: i as i64 * 60,
                price: p,
                volume_base: 1.0,
                volume_quote: p,
            })
            .collect();
        regularize(&records, 60).unwrap()
    }

    fn raw_returns(values: Vec<f64>) -> ReturnSeries {
        let mu = values.iter().sum::<f64>() / values.len() as f64;
        let sigma =
            (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64).sqrt();
        ReturnSeries {
            delta_t_bins: 1,
            values,
            mu,
            sigma,
            normalized: false,
        }
    }

    #[test]
    fn exact_logs() {
        let series = series_of(&[1.0, E, E * E]);
        let r = log_returns(&series, 1).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-12);
        assert!((r.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_prices_give_zero_sigma() {
        let series = series_of(&[5.0; 10]);
        let r = log_returns(&series, 1).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        assert_eq!(r.sigma, 0.0);
        assert!(normalize(&r).is_err());
    }

    #[test]
    fn single_return_point() {
        let series = series_of(&[1.0, E]);
        let r = log_returns(&series, 1).unwrap();
        assert_eq!(r.values.len(), 1);
        assert!((r.mu - 1.0).abs() < 1e-12);
        assert_eq!(r.sigma, 0.0);
    }

    #[test]
    fn length_is_len_minus_lag() {
        let series = series_of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let r = log_returns(&series, 2).unwrap();
        assert_eq!(r.values.len(), 3);
    }

    #[test]
    fn series_too_short_rejected() {
        let series = series_of(&[1.0, 2.0]);
        assert!(log_returns(&series, 2).is_err());
    }

    #[test]
    fn normalize_symmetric_pair_is_identity() {
        let r = raw_returns(vec![-1.0, 1.0]);
        let n = normalize(&r).unwrap();
        assert!((n.values[0] + 1.0).abs() < 1e-15);
        assert!((n.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_affine_map() {
        let r = raw_returns(vec![0.0, 2.0]);
        let n = normalize(&r).unwrap();
        assert_eq!(n.values, vec![-1.0, 1.0]);
        assert!(n.normalized);
    }

    #[test]
    fn volatility_takes_absolute_values() {
        let n = normalize(&raw_returns(vec![-3.0, 1.0, 1.0, 1.0])).unwrap();
        let v = volatility(&n).unwrap();
        assert!(v.values.iter().all(|&x| x >= 0.0));
        assert!(!v.normalized);
    }

    #[test]
    fn volatility_requires_normalized_input() {
        let r = raw_returns(vec![-1.0, 2.0]);
        assert!(matches!(volatility(&r), Err(Error::NotNormalized)));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(values in proptest::collection::vec(-1.0e3f64..1.0e3, 8..64)) {
            let r = raw_returns(values);
            prop_assume!(r.sigma > 1e-9);
            let once = normalize(&r).unwrap();
            let twice = normalize(&once).unwrap();
            for (a, b) in once.values.iter().zip(&twice.values) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn log_returns_scale_invariant(
            scale in 1.0e-3f64..1.0e3,
            prices in proptest::collection::vec(0.5f64..2.0, 4..32),
        ) {
            let base = series_of(&prices);
            let scaled = series_of(&prices.iter().map(|p| p * scale).collect::<Vec<_>>());
            let a = log_returns(&base, 1).unwrap();
            let b = log_returns(&scaled, 1).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn normalized_series_has_unit_stats(values in proptest::collection::vec(-10.0f64..10.0, 16..128)) {
            let r = raw_returns(values);
            prop_assume!(r.sigma > 1e-9);
            let n = normalize(&r).unwrap();
            let m = n.values.iter().sum::<f64>() / n.values.len() as f64;
            let sd = (n.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                / n.values.len() as f64)
                .sqrt();
            prop_assert!(m.abs() < 1e-12);
            prop_assert!((sd - 1.0).abs() < 1e-12);
        }
    }
}
