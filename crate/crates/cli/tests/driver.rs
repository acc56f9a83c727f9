//! Driver-level tests: strict config parsing, the catalog, replay
//! determinism and the experiment outputs.

use std::path::Path;

use diraclab_cli::catalog;
use diraclab_cli::config::ExperimentConfig;
use diraclab_cli::experiments;
use diraclab_core::error::Error;

fn tmp_dir(name: &str) -> std::path::PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&p);
    std::fs::create_dir_all(&p).unwrap();
    p
}

#[test]
fn unknown_keys_are_rejected_with_context() {
    let err = ExperimentConfig::parse(
        r#"
experiment = "spectrum"
output_dir = "x"
mystery = 1
[geometry]
kind = "circle"
length = 6.28
resolution = 16
[weight]
kind = "identity"
"#,
    )
    .unwrap_err();
    match err {
        Error::Config(msg) => {
            assert!(msg.contains("mystery"), "error should name the offending key: {msg}");
            assert!(msg.contains("line"), "error should carry line context: {msg}");
        }
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn missing_blocks_are_config_errors() {
    // Missing [geometry].
    assert!(matches!(
        ExperimentConfig::parse(
            "experiment = \"spectrum\"\noutput_dir = \"x\"\n[weight]\nkind = \"identity\"\n"
        ),
        Err(Error::Config(_))
    ));
    // Spectrum without [weight].
    assert!(matches!(
        ExperimentConfig::parse(
            "experiment = \"spectrum\"\noutput_dir = \"x\"\n[geometry]\nkind = \"circle\"\nlength = 6.28\nresolution = 16\n"
        ),
        Err(Error::Config(_))
    ));
    // Compare without [weight2].
    assert!(matches!(
        ExperimentConfig::parse(
            "experiment = \"compare\"\noutput_dir = \"x\"\n[geometry]\nkind = \"circle\"\nlength = 6.28\nresolution = 16\n[weight]\nkind = \"identity\"\n"
        ),
        Err(Error::Config(_))
    ));
    // Bad twist value.
    let cfg = ExperimentConfig::parse(
        "experiment = \"spectrum\"\noutput_dir = \"x\"\n[geometry]\nkind = \"circle\"\nlength = 6.28\ntwist = 0.25\nresolution = 16\n[weight]\nkind = \"identity\"\n",
    )
    .unwrap();
    assert!(matches!(cfg.geometry.build(), Err(Error::Config(_))));
}

#[test]
fn catalog_lists_the_builtins_and_is_stable() {
    let text = catalog::render_text();
    for name in ["circle", "interval", "torus"] {
        assert!(text.contains(name));
    }
    for name in [
        "oscillatory-sine",
        "oscillatory-squared",
        "conformal-exp",
        "random-spd-perturbation",
    ] {
        assert!(text.contains(name));
    }
    for name in ["spectrum", "minmax", "continuity", "compare", "wave"] {
        assert!(text.contains(name));
    }
    let c = catalog::catalog();
    assert_eq!(c.geometries.len(), 3);
    assert_eq!(c.families.len(), 4);
    assert_eq!(c.experiments.len(), 5);
    // Byte-identical across calls, in both renderings.
    assert_eq!(text, catalog::render_text());
    assert_eq!(catalog::render_machine(), catalog::render_machine());
    // The machine form carries the same catalog.
    let parsed: serde_json::Value = serde_json::from_str(&catalog::render_machine()).unwrap();
    assert_eq!(parsed["families"].as_array().unwrap().len(), 4);
}

#[test]
fn spectrum_run_writes_expected_first_row() {
    let dir = tmp_dir("driver-spectrum");
    let cfg = dir.join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
experiment = "spectrum"
seed = 1
output_dir = "unused"
[geometry]
kind = "circle"
length = 6.283185307179586
twist = 0.5
resolution = 64
[solver]
k_max = 4
[weight]
kind = "identity"
"#,
    )
    .unwrap();
    let out = dir.join("out");
    let outcome = experiments::run(&cfg, Some(&out), None).unwrap();
    assert_eq!(outcome.verdict_failures, 0);
    let csv = std::fs::read_to_string(out.join("spectra.csv")).unwrap();
    let first_positive = csv
        .lines()
        .skip(1)
        .find(|l| l.starts_with("1,"))
        .expect("row for k = 1");
    let lambda: f64 = first_positive.split(',').nth(1).unwrap().parse().unwrap();
    assert!((lambda - 0.5).abs() < 1e-8, "antiperiodic ground eigenvalue");
    // The eigenvector dump carries the documented magic and key block.
    let dump = std::fs::read(out.join("eigenvectors.evec")).unwrap();
    assert_eq!(&dump[..4], b"DLEV");
}

#[test]
fn continuity_run_reports_zero_lambda_errors_for_integral_invariant_family() {
    let dir = tmp_dir("driver-continuity");
    let cfg = dir.join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
experiment = "continuity"
seed = 2
output_dir = "unused"
[geometry]
kind = "circle"
length = 6.283185307179586
twist = 0.0
resolution = 64
[solver]
k_max = 3
ell_max = 2
[family]
kind = "oscillatory-sine"
amplitude = 0.5
members = [1, 2, 4]
"#,
    )
    .unwrap();
    let out = dir.join("out");
    experiments::run(&cfg, Some(&out), None).unwrap();
    let csv = std::fs::read_to_string(out.join("continuity.csv")).unwrap();
    let mut saw_lambda_row = false;
    for line in csv.lines().filter(|l| l.contains(",lambda_error,")) {
        saw_lambda_row = true;
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(v < 1e-8, "integral-invariant family keeps the eigenvalues: {line}");
    }
    assert!(saw_lambda_row);
    // The structured summary parses and carries one entry per member.
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["members"].as_array().unwrap().len(), 3);
    assert_eq!(summary["family"], "oscillatory-sine");
    assert!(summary["limit_clusters"].as_array().unwrap().len() >= 2);
}

#[test]
fn seed_override_changes_the_hash_but_not_determinism() {
    let dir = tmp_dir("driver-seed");
    let cfg = dir.join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
experiment = "minmax"
seed = 3
output_dir = "unused"
[geometry]
kind = "circle"
length = 6.283185307179586
twist = 0.5
resolution = 32
[solver]
k_max = 5
n_samples = 8
[weight]
kind = "identity"
"#,
    )
    .unwrap();
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    let out_c = dir.join("c");
    experiments::run(&cfg, Some(&out_a), Some(99)).unwrap();
    experiments::run(&cfg, Some(&out_b), Some(99)).unwrap();
    experiments::run(&cfg, Some(&out_c), Some(100)).unwrap();
    let a = std::fs::read(out_a.join("minmax.csv")).unwrap();
    let b = std::fs::read(out_b.join("minmax.csv")).unwrap();
    let c = std::fs::read(out_c.join("minmax.csv")).unwrap();
    assert_eq!(a, b, "same seed replays identically");
    assert_ne!(a, c, "different seeds draw different subspaces");
}

#[test]
fn compare_run_flags_direction_note_and_fails_on_unordered_weights() {
    let dir = tmp_dir("driver-compare");
    let cfg = dir.join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
experiment = "compare"
seed = 4
output_dir = "unused"
[geometry]
kind = "interval"
length = 3.141592653589793
resolution = 48
[weight]
kind = "constant"
value = 2.0
[weight2]
kind = "identity"
"#,
    )
    .unwrap();
    let out = dir.join("out");
    let outcome = experiments::run(&cfg, Some(&out), None).unwrap();
    assert_eq!(outcome.verdict_failures, 0);
    assert!(outcome.warnings.iter().any(|w| w.contains("k<0")), "direction note is surfaced");
    // Reversing the weights breaks the Loewner precondition.
    std::fs::write(
        &cfg,
        r#"
experiment = "compare"
seed = 4
output_dir = "unused"
[geometry]
kind = "interval"
length = 3.141592653589793
resolution = 48
[weight]
kind = "identity"
[weight2]
kind = "constant"
value = 2.0
"#,
    )
    .unwrap();
    assert!(matches!(
        experiments::run(&cfg, Some(&out), None),
        Err(Error::Domain(_))
    ));
}

#[test]
fn operator_dumps_are_written_on_request() {
    let dir = tmp_dir("driver-dumps");
    let cfg = dir.join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
experiment = "spectrum"
seed = 5
output_dir = "unused"
dump_operators = true
[geometry]
kind = "circle"
length = 6.283185307179586
twist = 0.5
resolution = 16
[solver]
k_max = 3
[weight]
kind = "identity"
"#,
    )
    .unwrap();
    let out = dir.join("out");
    experiments::run(&cfg, Some(&out), None).unwrap();
    for f in ["dirac.csv", "dirac.op", "mass.csv", "mass.op"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let op = std::fs::read(out.join("dirac.op")).unwrap();
    assert_eq!(&op[..4], b"DLOP");
    let n = u32::from_le_bytes(op[8..12].try_into().unwrap());
    assert_eq!(n, 16);
}

#[test]
fn binary_exit_codes_and_catalog_stability() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_diraclab");
    // Malformed config: exit code 2, no outputs.
    let dir = tmp_dir("driver-exit");
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "experiment = \"spectrum\"\n").unwrap();
    let status = Command::new(bin)
        .args(["run", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    // Catalog output is byte-identical across runs, in both renderings.
    for flags in [vec!["list-builtins"], vec!["list-builtins", "--machine"]] {
        let a = Command::new(bin).args(&flags).output().unwrap();
        let b = Command::new(bin).args(&flags).output().unwrap();
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "catalog must be byte-stable");
        assert!(!a.stdout.is_empty());
    }
}

#[test]
fn verdict_failures_exit_nonzero() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_diraclab");
    let dir = tmp_dir("driver-verdict");
    let cfg = dir.join("cfg.toml");
    // An unattainably tight tolerance turns rounding into a verdict failure,
    // exercising the exit-status contract.
    std::fs::write(
        &cfg,
        r#"
experiment = "minmax"
seed = 6
output_dir = "unused"
[geometry]
kind = "circle"
length = 6.283185307179586
twist = 0.5
resolution = 32
[solver]
k_max = 5
n_samples = 4
tol = 1e-16
[weight]
kind = "identity"
"#,
    )
    .unwrap();
    let out = dir.join("out");
    let status = Command::new(bin)
        .args(["run", "--config", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1), "verdict failure must exit 1");
    // The report rows are still written for inspection.
    assert!(out.join("minmax.csv").exists());
}
