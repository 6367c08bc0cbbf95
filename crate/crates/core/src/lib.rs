//! Statistical fluctuation analysis of high-frequency market time series.
//!
//! The crate covers the full pipeline from raw exchange CSV exports to the
//! stylized-fact indicators used to judge how mature a market is:
//!
//! * [`ingest`] - regularization of trade data onto a fixed time grid with
//!   forward-filled gaps and zero-return diagnostics;
//! * [`returns`] - log-returns, normalization, volatility;
//! * [`stats`] - empirical tail distributions with Hill exponent estimates,
//!   and return/volatility autocorrelation;
//! * [`mfdfa`] - multifractal detrended fluctuation analysis: fluctuation
//!   surfaces F(q,s), generalized Hurst exponents h(q), singularity spectra
//!   f(alpha), and rolling Hurst tracking;
//! * [`mfcca`] - the two-series generalization: signed cross fluctuations,
//!   lambda_q scaling exponents, and the q-dependent detrended
//!   cross-correlation coefficient rho_q(s);
//! * [`surrogate`] - shuffling and Fourier phase randomization null models,
//!   plus synthetic oracle generators (binomial cascades, white noise);
//! * [`lppl`] - log-periodic power-law fits around a critical time.
//!
//! All estimators are deterministic: given the same input, parameters and
//! seeds they reproduce results bit for bit.

pub mod error;
mod fit;
pub mod ingest;
pub mod lppl;
pub mod mfcca;
pub mod mfdfa;
pub mod returns;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
