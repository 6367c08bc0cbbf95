//! End-to-end checks of the pipeline contract: file sets, determinism,
//! error behavior, and report aggregation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use fluctana_cli::config::RunConfig;
use fluctana_cli::pipeline;

fn write_random_walk_csv(path: &Path, n: usize) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
    let mut price = 50.0f64;
    let mut out = String::from("timestamp,price,volume\n");
    for i in 0..n {
        price *= (0.002 * (rng.gen::<f64>() - 0.5)).exp();
        out.push_str(&format!(
            "{},{:.8},{:.4}\n",
            1_325_376_000 + 60 * i as i64,
            price,
            rng.gen::<f64>()
        ));
    }
    std::fs::write(path, out).unwrap();
}

fn config_from(toml_text: &str) -> RunConfig {
    toml::from_str(toml_text).unwrap()
}

fn tree_files(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push(
                    path.strip_prefix(root)
                        .unwrap()
                        .to_string_lossy()
                        .into_owned(),
                );
            }
        }
    }
    walk(root, root, &mut out);
    out.sort();
    out
}

/// File contents keyed by relative path, with manifest timings stripped.
fn tree_contents(root: &Path) -> BTreeMap<String, Vec<u8>> {
    tree_files(root)
        .into_iter()
        .map(|rel| {
            let bytes = std::fs::read(root.join(&rel)).unwrap();
            let bytes = if rel.ends_with("manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("timings_ms");
                serde_json::to_vec(&v).unwrap()
            } else {
                bytes
            };
            (rel, bytes)
        })
        .collect()
}

#[test]
fn tails_only_config_produces_exactly_the_contracted_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    write_random_walk_csv(&input, 4000);
    let out = dir.path().join("out");
    let config = config_from(&format!(
        "input = {:?}\nout_dir = {:?}\nanalyses = [\"tails\"]\n",
        input, out
    ));
    pipeline::run_pipeline(&config).unwrap();
    assert_eq!(
        tree_files(&out),
        vec![
            "all/ccdf.csv".to_string(),
            "all/tailfit.json".to_string(),
            "manifest.json".to_string(),
        ]
    );
}

#[test]
fn rerun_with_identical_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    write_random_walk_csv(&input, 6000);
    let out = dir.path().join("out");
    let config = config_from(&format!(
        "input = {:?}\nout_dir = {:?}\nseed = 11\nanalyses = [\"ingest\", \"tails\", \"acf\", \"surrogate\"]\n\
         [surrogate]\nreplicas = 2\n[surrogate.mfdfa]\ns_min = 8\nfit_lo = 16\nfit_hi = 512\nn_scales = 16\n",
        input, out
    ));
    pipeline::run_pipeline(&config).unwrap();
    let first = tree_contents(&out);
    pipeline::run_pipeline(&config).unwrap();
    let second = tree_contents(&out);
    assert_eq!(first.len(), second.len());
    for (rel, bytes) in &first {
        assert_eq!(bytes, &second[rel], "{} differs between reruns", rel);
    }
}

#[test]
fn missing_input_fails_without_creating_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = config_from(&format!(
        "input = {:?}\nout_dir = {:?}\n",
        dir.path().join("nope.csv"),
        out
    ));
    assert!(pipeline::run_pipeline(&config).is_err());
    assert!(!out.exists());
}

#[test]
fn missing_input_gives_nonzero_exit_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("cfg.toml");
    let out = dir.path().join("out");
    std::fs::write(
        &config_path,
        format!(
            "input = {:?}\nout_dir = {:?}\n",
            dir.path().join("nope.csv"),
            out
        ),
    )
    .unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_fluctana"))
        .args(["run", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(!out.exists());
}

#[test]
fn failed_analysis_marks_manifest_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    write_random_walk_csv(&input, 2000);
    let out = dir.path().join("out");
    // lppl on a window with too few daily closes must fail the run
    let config = config_from(&format!(
        "input = {:?}\nout_dir = {:?}\nanalyses = [\"lppl\"]\n[lppl]\ntc = \"2012-01-20\"\n",
        input, out
    ));
    let err = pipeline::run_pipeline(&config).unwrap_err();
    assert!(err.to_string().contains("lppl"), "{err:#}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "incomplete");
    assert!(manifest["error"].as_str().unwrap().contains("lppl"));
}

#[test]
fn report_aggregates_partial_bundle_with_nulls() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    write_random_walk_csv(&input, 4000);
    let out = dir.path().join("out");
    let config = config_from(&format!(
        "input = {:?}\nout_dir = {:?}\nanalyses = [\"tails\"]\n",
        input, out
    ));
    pipeline::run_pipeline(&config).unwrap();
    let summary_path = pipeline::emit_report(&out, None).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(summary_path).unwrap()).unwrap();
    let all = &summary["periods"]["all"];
    assert!(all["gamma"].is_number());
    assert!(all["H"].is_null());
    assert!(all["rho_q4_at_s1000"].is_null());
    assert!(all["lppl_spearman_rho"].is_null());
}

#[test]
fn report_passes_analysis_values_through_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    write_random_walk_csv(&input, 20_000);
    let out = dir.path().join("out");
    let config = config_from(&format!(
        "input = {:?}\nout_dir = {:?}\nanalyses = [\"mfdfa\"]\n[mfdfa]\nn_scales = 24\n",
        input, out
    ));
    pipeline::run_pipeline(&config).unwrap();
    let summary_path = pipeline::emit_report(&out, None).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(summary_path).unwrap()).unwrap();
    let mfdfa: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("all/mfdfa.json")).unwrap())
            .unwrap();
    assert_eq!(summary["periods"]["all"]["H"], mfdfa["H"]);
    assert_eq!(
        summary["periods"]["all"]["delta_alpha"],
        mfdfa["delta_alpha"]
    );
}

#[test]
fn report_is_keyed_by_period_name() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    write_random_walk_csv(&input, 8000);
    let out = dir.path().join("out");
    let config = config_from(&format!(
        "input = {:?}\nout_dir = {:?}\nanalyses = [\"tails\"]\n\
         [[periods]]\nname = \"early\"\nfrom = \"2012-01-01\"\nto = \"2012-01-03\"\n\
         [[periods]]\nname = \"late\"\nfrom = \"2012-01-03\"\nto = \"2012-01-06\"\n",
        input, out
    ));
    pipeline::run_pipeline(&config).unwrap();
    let summary_path = pipeline::emit_report(&out, None).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(summary_path).unwrap()).unwrap();
    let periods = summary["periods"].as_object().unwrap();
    assert_eq!(periods.keys().collect::<Vec<_>>(), vec!["early", "late"]);
}

#[test]
fn report_rejects_incomplete_bundle() {
    let dir = tempfile::tempdir().unwrap();
    assert!(pipeline::emit_report(dir.path(), None).is_err());
}

#[test]
fn synth_and_surrogate_subcommands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let status = Command::new(env!("CARGO_BIN_EXE_fluctana"))
            .args([
                "synth",
                "noise",
                "--n",
                "4096",
                "--marginal",
                "student-t",
                "--df",
                "3",
                "--seed",
                "5",
                "--out",
            ])
            .arg(path)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn generic_value_files_feed_mfcca_and_rho() {
    let dir = tempfile::tempdir().unwrap();
    let x: PathBuf = dir.path().join("x.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_fluctana"))
        .args(["synth", "noise", "--n", "8192", "--seed", "3", "--out"])
        .arg(&x)
        .status()
        .unwrap();
    assert!(status.success());
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_fluctana"))
        .args(["rho", "--q", "1,2"])
        .arg("--x")
        .arg(&x)
        .arg("--y")
        .arg(&x)
        .args([
            "--s-min",
            "32",
            "--s-max",
            "1024",
            "--n-scales",
            "8",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rho = std::fs::read_to_string(out.join("rho.csv")).unwrap();
    for line in rho.lines().skip(1) {
        let rho_value: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(rho_value, 1.0);
    }
}
