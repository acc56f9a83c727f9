//! Experiment pipelines: spectrum, minmax, continuity, compare, wave.
//!
//! Outputs are deterministic given (config, seed): CSV bodies are
//! byte-identical across reruns; wall-clock time lives only in the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use diraclab_core::analysis::{run_continuity_experiment, ContinuityOptions, ContinuityReport};
use diraclab_core::assembly::{assemble_dirac, assemble_mass, OperatorMatrix};
use diraclab_core::domain::{build_grid, Geometry, Grid};
use diraclab_core::error::Error;
use diraclab_core::io::{operator_csv, spectrum_csv, write_eigenvector_dump, write_operator_dump, Fnv};
use diraclab_core::spectral::{solve_weighted, WeightedSpectrum};
use diraclab_core::variational::{compare_spectra, verify_minmax_negative, verify_minmax_positive, Direction};
use diraclab_core::wavekernel::Propagator;
use diraclab_core::weights::make_family;

use crate::config::{ExperimentConfig, ExperimentKind, SolverConfig};

/// Outcome of one experiment run.
pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// Number of failed verdicts (nonzero exit when positive).
    pub verdict_failures: usize,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
}

/// Parse a config file, run its experiment, and write the artifact files.
pub fn run(
    config_path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunOutcome, Error> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", config_path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let out_dir = out_override
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    fs::create_dir_all(&out_dir)?;

    let mut hasher = Fnv::new();
    hasher.write(text.as_bytes());
    hasher.write_u64(cfg.seed);
    let config_hash = hasher.finish();

    let start = Instant::now();
    let mut outcome = match cfg.experiment {
        ExperimentKind::Spectrum => run_spectrum(&cfg, &out_dir)?,
        ExperimentKind::Minmax => run_minmax(&cfg, &out_dir)?,
        ExperimentKind::Continuity => run_continuity(&cfg, &out_dir)?,
        ExperimentKind::Compare => run_compare(&cfg, &out_dir)?,
        ExperimentKind::Wave => run_wave(&cfg, &out_dir)?,
    };
    let wall_ms = start.elapsed().as_millis();

    let mut manifest = String::new();
    let _ = writeln!(manifest, "experiment = \"{}\"", cfg.experiment.name());
    let _ = writeln!(manifest, "config_hash = \"{config_hash:016x}\"");
    let _ = writeln!(manifest, "seed = {}", cfg.seed);
    let _ = writeln!(manifest, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "wall_ms = {wall_ms}");
    let _ = writeln!(manifest, "verdict_failures = {}", outcome.verdict_failures);
    let _ = writeln!(
        manifest,
        "outputs = [{}]",
        outcome.outputs.iter().map(|o| format!("\"{o}\"")).collect::<Vec<_>>().join(", ")
    );
    for w in &outcome.warnings {
        let _ = writeln!(manifest, "# warning: {w}");
    }
    fs::write(out_dir.join("manifest.toml"), manifest)?;
    outcome.outputs.push("manifest.toml".into());
    Ok(outcome)
}

struct Problem {
    grid: Grid,
    dirac: Arc<OperatorMatrix>,
}

fn setup_problem(geometry: &Geometry) -> Result<Problem, Error> {
    let grid = build_grid(geometry)?;
    let dirac = Arc::new(assemble_dirac(geometry, &grid)?);
    Ok(Problem { grid, dirac })
}

fn solve_with_weight(
    problem: &Problem,
    weight: &diraclab_core::weights::WeightField,
    solver: &SolverConfig,
    geometry: &Geometry,
) -> Result<(Arc<OperatorMatrix>, WeightedSpectrum), Error> {
    let mass = Arc::new(assemble_mass(weight, &problem.grid, &problem.dirac.basis)?);
    let spec = solve_weighted(&problem.dirac, &mass, solver.k_max, Some(geometry.kernel_dim()))?;
    Ok((mass, spec))
}

fn run_spectrum(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, Error> {
    let geometry = cfg.geometry.build()?;
    let problem = setup_problem(&geometry)?;
    let solver = cfg.solver();
    let weight = cfg.weight.as_ref().unwrap().build(&problem.grid)?;
    let (_, spec) = solve_with_weight(&problem, &weight, &solver, &geometry)?;
    let csv = spectrum_csv(&spec);
    fs::write(out_dir.join("spectra.csv"), csv)?;
    write_eigenvector_dump(&spec, &out_dir.join("eigenvectors.evec"))?;
    let mut outputs = vec!["spectra.csv".into(), "eigenvectors.evec".into()];
    if cfg.dump_operators {
        fs::write(out_dir.join("dirac.csv"), operator_csv(&spec.dirac.matrix))?;
        write_operator_dump(&spec.dirac.matrix, &out_dir.join("dirac.op"))?;
        let mass_weak = spec.mass.weak_matrix();
        fs::write(out_dir.join("mass.csv"), operator_csv(&mass_weak))?;
        write_operator_dump(&mass_weak, &out_dir.join("mass.op"))?;
        outputs.extend([
            "dirac.csv".into(),
            "dirac.op".into(),
            "mass.csv".into(),
            "mass.op".into(),
        ]);
    }
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        verdict_failures: 0,
        warnings: Vec::new(),
        outputs,
    })
}

fn run_minmax(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, Error> {
    let geometry = cfg.geometry.build()?;
    let problem = setup_problem(&geometry)?;
    let solver = cfg.solver();
    let weight = cfg.weight.as_ref().unwrap().build(&problem.grid)?;
    let (_, spec) = solve_with_weight(&problem, &weight, &solver, &geometry)?;
    let k_top = solver.k_max.saturating_sub(3).max(1);
    let mut csv = String::from(
        "k,direction,lambda,value_at_attaining,best_over_random,grassmann_at_attaining,grassmann_best,n_samples,seed,verdict\n",
    );
    let mut failures = 0usize;
    for k in 1..=k_top {
        for dir in [Direction::Positive, Direction::Negative] {
            let report = match dir {
                Direction::Positive => {
                    verify_minmax_positive(&spec, k, solver.n_samples, cfg.seed, solver.tol)?
                }
                Direction::Negative => {
                    verify_minmax_negative(&spec, k, solver.n_samples, cfg.seed, solver.tol)?
                }
            };
            if !report.verdict {
                failures += 1;
            }
            let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                k,
                match dir {
                    Direction::Positive => "positive",
                    Direction::Negative => "negative",
                },
                report.lambda,
                report.value_at_attaining_subspace,
                fmt_opt(report.best_over_random_subspaces),
                report.grassmann_value_at_attaining,
                fmt_opt(report.grassmann_best_over_random),
                report.n_samples,
                report.seed,
                report.verdict,
            );
        }
    }
    fs::write(out_dir.join("minmax.csv"), csv)?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        verdict_failures: failures,
        warnings: Vec::new(),
        outputs: vec!["minmax.csv".into()],
    })
}

fn continuity_csv(report: &ContinuityReport) -> String {
    let mut csv = String::from("family,m,quantity,index,value\n");
    let fam = report.family_kind;
    let mut row = |m: usize, quantity: &str, index: i64, value: f64| {
        let _ = writeln!(csv, "{fam},{m},{quantity},{index},{value}");
    };
    for (k, l) in &report.limit_lambdas {
        row(0, "limit_lambda", *k as i64, *l);
    }
    for (ell, mu, h) in &report.limit_clusters {
        row(0, "limit_mu", *ell as i64, *mu);
        row(0, "limit_multiplicity", *ell as i64, *h as f64);
    }
    for mem in &report.members {
        if mem.skipped.is_some() {
            row(mem.m, "skipped", 0, 1.0);
            continue;
        }
        for (k, v) in &mem.lambda_errors {
            row(mem.m, "lambda_error", *k as i64, *v);
        }
        for (k, v) in &mem.one_sided_margins {
            row(mem.m, "one_sided_margin", *k as i64, *v);
        }
        for (ell, v) in &mem.projector_gaps {
            row(mem.m, "projector_gap", *ell as i64, *v);
        }
        for (k, v) in &mem.h1_distances {
            row(mem.m, "h1_distance", *k as i64, *v);
        }
        for (k, v) in &mem.holder_distances {
            row(mem.m, "holder_distance", *k as i64, *v);
        }
        row(mem.m, "weak_residual", 0, mem.weak_residual);
        row(mem.m, "weak_residual_inverse", 0, mem.weak_residual_inverse);
        for (k, v) in &mem.bk_diagnostic {
            row(mem.m, "bk", *k as i64, *v);
        }
        for d in &mem.norm_diagnostics {
            row(mem.m, "h1_norm", d.k as i64, d.h1_norm);
            row(mem.m, "holder_norm", d.k as i64, d.holder_norm);
            row(mem.m, "w12_bound", d.k as i64, d.w12_bound);
            row(mem.m, "calpha_bound", d.k as i64, d.calpha_bound);
        }
    }
    csv
}

fn continuity_summary_json(report: &ContinuityReport) -> String {
    let mut members = Vec::new();
    for mem in &report.members {
        let table = |v: &[(i32, f64)]| -> Vec<serde_json::Value> {
            v.iter().map(|(k, x)| serde_json::json!({ "index": k, "value": x })).collect()
        };
        members.push(serde_json::json!({
            "m": mem.m,
            "skipped": mem.skipped,
            "lambda_errors": table(&mem.lambda_errors),
            "one_sided_margins": table(&mem.one_sided_margins),
            "projector_gaps": table(&mem.projector_gaps),
            "h1_distances": table(&mem.h1_distances),
            "holder_distances": table(&mem.holder_distances),
            "weak_residual": mem.weak_residual,
            "weak_residual_inverse": mem.weak_residual_inverse,
            "bk": table(&mem.bk_diagnostic),
        }));
    }
    let doc = serde_json::json!({
        "family": report.family_kind,
        "amplitude": report.amplitude,
        "seed": report.seed,
        "alpha": report.alpha,
        "p": report.p,
        "trend_thresholds_note":
            "reduction factors (1/4 eigenvalue, 1/2 projector gap) are artifact choices; no convergence rates are claimed",
        "limit_lambdas": report.limit_lambdas.iter()
            .map(|(k, l)| serde_json::json!({ "k": k, "lambda": l })).collect::<Vec<_>>(),
        "limit_clusters": report.limit_clusters.iter()
            .map(|(ell, mu, h)| serde_json::json!({ "ell": ell, "mu": mu, "h": h })).collect::<Vec<_>>(),
        "members": members,
        "notes": report.notes,
    });
    serde_json::to_string_pretty(&doc).expect("json serialization")
}

fn run_continuity(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, Error> {
    let geometry = cfg.geometry.build()?;
    let solver = cfg.solver();
    let fam_cfg = cfg.family.as_ref().unwrap();
    let family = make_family(fam_cfg.kind()?, fam_cfg.params(cfg.seed), &geometry)?;
    let opts = ContinuityOptions {
        k_max: solver.k_max.min(4).max(1),
        ell_max: solver.ell_max,
        alpha: solver.alpha,
        p: solver.p,
        dictionary_size: solver.dictionary_size,
    };
    let report = run_continuity_experiment(&family, &fam_cfg.members, &opts)?;
    fs::write(out_dir.join("continuity.csv"), continuity_csv(&report))?;
    fs::write(out_dir.join("summary.json"), continuity_summary_json(&report))?;
    let warnings = report.notes.clone();
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        verdict_failures: 0,
        warnings,
        outputs: vec!["continuity.csv".into(), "summary.json".into()],
    })
}

fn run_compare(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, Error> {
    let geometry = cfg.geometry.build()?;
    let problem = setup_problem(&geometry)?;
    let solver = cfg.solver();
    let w1 = cfg.weight.as_ref().unwrap().build(&problem.grid)?;
    let w2 = cfg.weight2.as_ref().unwrap().build(&problem.grid)?;
    let (_, s1) = solve_with_weight(&problem, &w1, &solver, &geometry)?;
    let (_, s2) = solve_with_weight(&problem, &w2, &solver, &geometry)?;
    let report = compare_spectra(&s1, &s2, solver.tol)?;
    let mut csv = String::from("k,lambda_a1,lambda_a2,margin\n");
    for (i, m) in report.margins_pos.iter().enumerate() {
        let k = (i + 1) as i32;
        let _ = writeln!(csv, "{k},{},{},{m}", s1.lambda(k)?, s2.lambda(k)?);
    }
    for (i, m) in report.margins_neg.iter().enumerate() {
        let k = -((i + 1) as i32);
        let _ = writeln!(csv, "{k},{},{},{m}", s1.lambda(k)?, s2.lambda(k)?);
    }
    fs::write(out_dir.join("compare.csv"), csv)?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        verdict_failures: if report.ok { 0 } else { 1 },
        warnings: vec![report.header_note],
        outputs: vec!["compare.csv".into()],
    })
}

fn run_wave(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, Error> {
    let geometry = cfg.geometry.build()?;
    let problem = setup_problem(&geometry)?;
    let solver = cfg.solver();
    let fam_cfg = cfg.family.as_ref().unwrap();
    let wave_cfg = cfg.wave.as_ref().unwrap();
    let family = make_family(fam_cfg.kind()?, fam_cfg.params(cfg.seed), &geometry)?;
    let hint = Some(geometry.kernel_dim());

    let mass_limit =
        Arc::new(assemble_mass(&family.declared_limit(), &problem.grid, &problem.dirac.basis)?);
    let limit = Arc::new(solve_weighted(&problem.dirac, &mass_limit, solver.k_max, hint)?);

    // Solve each family member once; build propagators per (member, t).
    let mut member_specs = Vec::new();
    for &m in &fam_cfg.members {
        let w_m = family.member(m)?;
        let mass_m = Arc::new(assemble_mass(&w_m, &problem.grid, &problem.dirac.basis)?);
        member_specs.push((m, Arc::new(solve_weighted(&problem.dirac, &mass_m, solver.k_max, hint)?)));
    }

    let window = wave_cfg.index_window as i32;
    let indices: Vec<i32> = (1..=window).flat_map(|k| [k, -k]).collect();
    let mut csv = String::from("t,quantity,p,q,re,im\n");
    for &t in &wave_cfg.times {
        let u_limit = Propagator::new(&limit, t, solver.ell_max)?;
        for &p in &indices {
            for &q in &indices {
                let e = u_limit.matrix_element(&limit, p, q)?;
                let _ = writeln!(csv, "{t},element[limit],{p},{q},{},{}", e.re, e.im);
            }
        }
        for (m, spec_m) in &member_specs {
            let u_m = Propagator::new(spec_m, t, solver.ell_max)?;
            for &p in &indices {
                for &q in &indices {
                    let e = u_m.matrix_element(&limit, p, q)?;
                    let _ = writeln!(csv, "{t},element[m={m}],{p},{q},{},{}", e.re, e.im);
                    let target = if p == q {
                        diraclab_core::linalg::cplx(0.0, t * limit.lambda(p)?).exp()
                    } else {
                        diraclab_core::linalg::ZERO
                    };
                    let dev = (e - target).norm();
                    let _ = writeln!(csv, "{t},deviation[m={m}],{p},{q},{dev},0");
                }
            }
        }
    }
    fs::write(out_dir.join("wave.csv"), csv)?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        verdict_failures: 0,
        warnings: Vec::new(),
        outputs: vec!["wave.csv".into()],
    })
}
