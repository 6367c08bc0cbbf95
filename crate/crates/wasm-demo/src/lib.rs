//! Browser demo bindings: three interactive views onto the analysis library.
//!
//! Each export returns a JSON string (parsed on the JS side) so the page can
//! stay a single static file with no generated TypeScript glue beyond the
//! wasm-bindgen loader. Errors come back as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use fluctana::lppl::{self, LpplParams, PhaseKind};
use fluctana::mfdfa::{self, QGrid, ScaleGrid};
use fluctana::surrogate::{self, Seed};

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| format!("{{\"error\":\"{}\"}}", e))
}

fn error_json(message: impl std::fmt::Display) -> String {
    to_json(&serde_json::json!({ "error": message.to_string() }))
}

#[derive(Serialize)]
struct SpectrumView {
    q: Vec<f64>,
    h: Vec<f64>,
    alpha: Vec<f64>,
    f_alpha: Vec<f64>,
    delta_alpha: f64,
    asymmetry: f64,
}

struct Analysis {
    spectrum: SpectrumView,
    scales: Vec<usize>,
    f2: Vec<f64>,
    zero_variance_total: usize,
}

/// Full default-grid MFDFA with a length-adapted fit range.
fn analyze(values: &[f64]) -> Result<Analysis, fluctana::Error> {
    let len = values.len();
    let q_grid = QGrid::default();
    let scale_grid = ScaleGrid::for_length(len, 8, 28)?;
    let surface = mfdfa::fluctuation_function(values, &q_grid, &scale_grid, 2)?;
    let fit = ((len / 1024).max(8), len / 8);
    let curve = mfdfa::fit_generalized_hurst(&surface, fit)?;
    let spectrum = mfdfa::singularity_spectrum(&curve)?;

    let q2_index = q_grid
        .values()
        .iter()
        .position(|&q| (q - 2.0).abs() < 1e-9)
        .expect("default grid contains q = 2");
    let f2 = (0..scale_grid.values().len())
        .map(|si| surface.value(q2_index, si))
        .collect();

    Ok(Analysis {
        spectrum: SpectrumView {
            q: curve.points.iter().map(|p| p.q).collect(),
            h: curve.points.iter().map(|p| p.h).collect(),
            alpha: spectrum.alpha.clone(),
            f_alpha: spectrum.f_alpha.clone(),
            delta_alpha: spectrum.delta_alpha,
            asymmetry: spectrum.asymmetry,
        },
        scales: scale_grid.values().to_vec(),
        f2,
        zero_variance_total: surface.zero_variance_total(),
    })
}

#[derive(Serialize)]
struct CascadeResponse {
    spectrum: SpectrumView,
    h_analytic: Vec<f64>,
    scales: Vec<usize>,
    f2: Vec<f64>,
    zero_variance_total: usize,
}

/// Binomial cascade explorer: generalized Hurst exponents and the
/// singularity spectrum next to the analytic curve. A negative seed selects
/// the deterministic (unshuffled) measure.
#[wasm_bindgen]
pub fn cascade_analysis(levels: u32, a: f64, seed: i64) -> String {
    let seed = (seed >= 0).then(|| Seed(seed as u64));
    let values = match surrogate::binomial_cascade(levels, a, seed) {
        Ok(v) => v,
        Err(e) => return error_json(e),
    };
    let analysis = match analyze(&values) {
        Ok(a) => a,
        Err(e) => return error_json(e),
    };
    let h_analytic = analysis
        .spectrum
        .q
        .iter()
        .map(|&q| 1.0 / q - (a.powf(q) + (1.0 - a).powf(q)).log2() / q)
        .collect();
    to_json(&CascadeResponse {
        h_analytic,
        scales: analysis.scales,
        f2: analysis.f2,
        zero_variance_total: analysis.zero_variance_total,
        spectrum: analysis.spectrum,
    })
}

#[derive(Serialize)]
struct SurrogateResponse {
    original: SpectrumView,
    surrogate: SpectrumView,
    method: String,
    delta_alpha_reduction: f64,
}

/// Multifractality collapse: a cascade next to its shuffled or
/// phase-randomized surrogate.
#[wasm_bindgen]
pub fn surrogate_comparison(levels: u32, a: f64, method: &str, seed: u64) -> String {
    let values = match surrogate::binomial_cascade(levels, a, None) {
        Ok(v) => v,
        Err(e) => return error_json(e),
    };
    let surrogate_values = match method {
        "shuffle" => surrogate::shuffle(&values, Seed(seed)),
        "phase" => match surrogate::phase_randomize(&values, Seed(seed)) {
            Ok(v) => v,
            Err(e) => return error_json(e),
        },
        other => return error_json(format!("unknown method {:?}", other)),
    };
    let original = match analyze(&values) {
        Ok(a) => a.spectrum,
        Err(e) => return error_json(e),
    };
    let surrogate_spectrum = match analyze(&surrogate_values) {
        Ok(a) => a.spectrum,
        Err(e) => return error_json(e),
    };
    let reduction = 1.0 - surrogate_spectrum.delta_alpha / original.delta_alpha;
    to_json(&SurrogateResponse {
        original,
        surrogate: surrogate_spectrum,
        method: method.to_string(),
        delta_alpha_reduction: reduction,
    })
}

#[derive(Serialize)]
struct LpplResponse {
    days: Vec<f64>,
    observed: Vec<f64>,
    clean: Vec<f64>,
    fitted: Vec<f64>,
    m: f64,
    phi: f64,
    c: f64,
    spearman_rho: f64,
    rss: f64,
}

/// Log-periodic fit playground: synthesizes a bubble (or anti-bubble) from
/// the given parameters plus observation noise, refits it, and returns the
/// three curves. `days[i]` is the distance from the critical time.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn lppl_fit_demo(
    b: f64,
    c: f64,
    m: f64,
    phi: f64,
    n_days: u32,
    noise_sigma: f64,
    seed: u64,
    antibubble: bool,
) -> String {
    use rand::{Rng, SeedableRng};
    if n_days < 100 {
        return error_json("need at least 100 days");
    }
    let phase_kind = if antibubble {
        PhaseKind::Antibubble
    } else {
        PhaseKind::Bubble
    };
    let t_c: i64 = 1_513_382_400;
    let truth = LpplParams {
        a: 10.2,
        b,
        c,
        m,
        lambda: 2.0,
        phi,
        t_c,
        phase_kind,
    };
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut days = Vec::new();
    let mut observed = Vec::new();
    let mut clean = Vec::new();
    let mut times = Vec::new();
    for d in 1..=n_days as i64 {
        let t = match phase_kind {
            PhaseKind::Bubble => t_c - d * 86_400,
            PhaseKind::Antibubble => t_c + d * 86_400,
        };
        let value = match lppl::lppl_eval(&truth, t) {
            Ok(v) => v,
            Err(e) => return error_json(e),
        };
        let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * noise_sigma;
        days.push(d as f64);
        times.push(t);
        clean.push(value);
        observed.push(value + noise);
    }
    let points: Vec<(i64, f64)> = times
        .iter()
        .cloned()
        .zip(observed.iter().cloned())
        .collect();
    let fit = match lppl::lppl_fit(&points, t_c, phase_kind, 2.0, (0.05, 0.95), 17) {
        Ok(f) => f,
        Err(e) => return error_json(e),
    };
    let fitted = times
        .iter()
        .map(|&t| lppl::lppl_eval(&fit.params, t).unwrap_or(f64::NAN))
        .collect();
    to_json(&LpplResponse {
        days,
        observed,
        clean,
        fitted,
        m: fit.params.m,
        phi: fit.params.phi,
        c: fit.params.c,
        spearman_rho: fit.spearman_rho,
        rss: fit.rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cascade_payload_is_valid_json() {
        let json = cascade_analysis(12, 0.65, -1);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(value.get("error").is_none(), "{json}");
        assert!(value["spectrum"]["delta_alpha"].as_f64().unwrap() > 0.1);
        assert_eq!(
            value["scales"].as_array().unwrap().len(),
            value["f2"].as_array().unwrap().len()
        );
    }

    #[test]
    fn surrogate_payload_reports_reduction() {
        // Phase randomization collapses the cascade's multifractality even at
        // demo sizes; shuffling keeps the fat-tailed finite-length width, so
        // its reduction is smaller but the payload must still be well formed.
        let json = surrogate_comparison(12, 0.7, "phase", 4);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(value.get("error").is_none(), "{json}");
        assert!(value["delta_alpha_reduction"].as_f64().unwrap() > 0.6);

        let json = surrogate_comparison(12, 0.7, "shuffle", 4);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(value["surrogate"]["delta_alpha"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn lppl_payload_recovers_parameters() {
        let json = lppl_fit_demo(-0.32, 0.05, 0.4, 2.12, 250, 0.01, 7, false);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(value.get("error").is_none(), "{json}");
        assert!((value["m"].as_f64().unwrap() - 0.4).abs() < 0.05);
        assert!(value["spearman_rho"].as_f64().unwrap() > 0.95);
    }

    #[test]
    fn invalid_parameters_produce_error_payloads() {
        let value: serde_json::Value = serde_json::from_str(&cascade_analysis(2, 0.6, -1)).unwrap();
        assert!(value["error"].is_string());
        let value: serde_json::Value =
            serde_json::from_str(&surrogate_comparison(12, 0.7, "flip", 1)).unwrap();
        assert!(value["error"].is_string());
    }
}
