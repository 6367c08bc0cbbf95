//! Null-model surrogates (shuffling, Fourier phase randomization) and
//! synthetic oracle series (binomial cascades, white noise).
//!
//! Determinism contract: every generator is a pure function of its input and
//! a [`Seed`]. The generator is ChaCha12 (`rand_chacha` 0.3.1, pinned) seeded
//! through `seed_from_u64`; replica r of a run with seed s uses seed s + r
//! (wrapping). The same seed and input therefore reproduce surrogates
//! bit-for-bit across runs and builds.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG seed; equal seeds give bit-identical output for equal input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    /// Derived seed for replica `index` (documented as seed + index).
    pub fn replica(self, index: u64) -> Seed {
        Seed(self.0.wrapping_add(index))
    }

    pub fn rng(self) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.0)
    }
}

/// Uniform random permutation (Fisher-Yates); preserves the multiset of
/// values exactly.
pub fn shuffle(values: &[f64], seed: Seed) -> Vec<f64> {
    let mut out = values.to_vec();
    out.shuffle(&mut seed.rng());
    out
}

/// Fourier surrogate: keeps every spectral amplitude, replaces the phases of
/// the independent components with uniform random phases.
///
/// Conjugate symmetry is enforced so the output is exactly real; the
/// zero-frequency component (and for even lengths the Nyquist component) is
/// left untouched, so the mean is preserved.
pub fn phase_randomize(values: &[f64], seed: Seed) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 4 {
        return Err(Error::InsufficientData {
            required: 4,
            actual: n,
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let mut rng = seed.rng();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    forward.process(&mut buf);

    // Independent components are 1..(n+1)/2; their mirrors are conjugated.
    for k in 1..(n + 1) / 2 {
        let amplitude = buf[k].norm();
        let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let c = Complex::from_polar(amplitude, phase);
        buf[k] = c;
        buf[n - k] = c.conj();
    }

    inverse.process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf.iter().map(|c| c.re * scale).collect())
}

/// Multiplicative binomial cascade of `2^levels` cells with weights
/// (a, 1 - a), normalized to unit mean.
///
/// Unseeded, the heavier weight always goes left (the deterministic binomial
/// measure); with a seed, the weight pair is swapped per cell with
/// probability 1/2.
pub fn binomial_cascade(levels: u32, a: f64, seed: Option<Seed>) -> Result<Vec<f64>> {
    if !(4..=24).contains(&levels) {
        return Err(Error::InvalidParameter {
            name: "levels",
            value: levels as f64,
            constraint: "must lie in 4..=24",
        });
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter {
            name: "a",
            value: a,
            constraint: "must lie strictly inside (0, 1)",
        });
    }
    let n = 1usize << levels;
    let mut rng = seed.map(|s| s.rng());
    let mut cells = vec![0.0f64; n];
    cells[0] = 1.0;
    let mut width = 1usize;
    for _ in 0..levels {
        // Expand each parent into two children, right-to-left so the buffer
        // can be reused in place.
        for parent in (0..width).rev() {
            let value = cells[parent];
            let swap = rng.as_mut().map_or(false, |r| r.gen::<bool>());
            let (left, right) = if swap { (1.0 - a, a) } else { (a, 1.0 - a) };
            cells[2 * parent] = value * left;
            cells[2 * parent + 1] = value * right;
        }
        width *= 2;
    }
    let total: f64 = cells.iter().sum();
    let scale = n as f64 / total;
    for c in &mut cells {
        *c *= scale;
    }
    Ok(cells)
}

/// Marginal distribution for [`white_noise`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Marginal {
    Gaussian,
    StudentT { df: f64 },
}

/// I.i.d. draws, deterministic under the seed.
pub fn white_noise(n: usize, seed: Seed, marginal: Marginal) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: n,
        });
    }
    let mut rng = seed.rng();
    match marginal {
        Marginal::Gaussian => Ok((0..n).map(|_| StandardNormal.sample(&mut rng)).collect()),
        Marginal::StudentT { df } => {
            if !(df > 2.0) {
                return Err(Error::InvalidParameter {
                    name: "df",
                    value: df,
                    constraint: "student-t requires df > 2",
                });
            }
            let dist = StudentT::new(df).expect("validated df");
            Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
        }
    }
}
