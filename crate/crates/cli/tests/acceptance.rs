//! End-to-end acceptance run: one pass/fail line per criterion.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use singext::cube_extension::{cube_measures, extend_bad};
use singext::pipeline::{default_cases, skeleton_constants, skeleton_terms, SkeletonTerms};
use singext::suite::{bump_map, degree_map};
use singext::verify::{gap_term_excess, run_checks, Check};
use singext::{
    gagliardo_energy, gap_potential, run_pipeline, Ambient, Calibration, CubeBox, CubeId, DistributionSpec,
    MeasureWeight, PipelineRun, QuadratureSpec, RunConfig, SphereQuadrature, SurfaceTrace, TailMode,
};

type Outcome = Result<String, String>;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn within_time(start: Instant, limit: f64, detail: String) -> Outcome {
    let secs = start.elapsed().as_secs_f64();
    if secs < limit {
        Ok(format!("{detail}; {secs:.1} s"))
    } else {
        Err(format!("{detail}; took {secs:.1} s, limit {limit} s"))
    }
}

fn failed_checks(checks: &[Check]) -> Vec<String> {
    checks.iter().filter(|c| !c.passed).map(|c| format!("{} = {} > {}", c.test, c.value, c.bound)).collect()
}

/// Homogeneous extension of the unit-speed circle on an edge-2 cube at 512^2 cells.
fn closed_form_vortex() -> Outcome {
    let start = Instant::now();
    let g = CubeBox { dim: 1, lo: [-1.0, 1.0, 0.0], hi: [1.0, 3.0, 0.0] };
    let c = g.center();
    let trace = SurfaceTrace::sample(&g, 512, |x| {
        let v = Ambient::new(x[0] - c[0], x[1] - c[1], 0.0);
        Ok(v / v.norm())
    })
    .map_err(|e| e.to_string())?;
    let cube = extend_bad(CubeId { k: 0, j: [0, 0] }, g, trace);
    let mut spec = DistributionSpec::new(vec![1.0, 2.0, 4.0]).map_err(|e| e.to_string())?;
    spec.max_cells = 512;
    let measures = cube_measures(&cube, &spec, 0.5).map_err(|e| e.to_string())?;
    let scaled: Vec<f64> = spec.t_grid.iter().zip(&measures).map(|(t, m)| t * t * m).collect();
    let detail = format!("t^2 measure at t = 1, 2, 4: {scaled:.5?} vs pi");
    if scaled.iter().any(|s| (s - PI).abs() > 0.01 * PI) {
        return Err(detail);
    }
    within_time(start, 10.0, detail)
}

fn trivial_pipeline(cfg: &RunConfig, cal: &Calibration) -> Outcome {
    let start = Instant::now();
    let u = singext::suite::constant_map(cfg.grid_n).map_err(|e| e.to_string())?;
    let run = run_pipeline(&u, cfg, cal).map_err(|e| e.to_string())?;
    let e = run.energies;
    let zero_measures = run.reports.len() == 3 && run.reports.iter().all(|r| r.measure.iter().all(|m| *m == 0.0));
    let detail = format!(
        "energy {} gap {} truncated {} bad {} singular {} all measures zero {zero_measures}",
        e.energy,
        e.gap,
        e.truncated,
        run.classification.bad.len(),
        run.singular_set().len()
    );
    let ok = e.energy == 0.0
        && e.gap == 0.0
        && e.truncated == 0.0
        && run.classification.bad.is_empty()
        && run.singular_set().is_empty()
        && zero_measures;
    if !ok {
        return Err(detail);
    }
    within_time(start, 5.0, detail)
}

fn topological_necessity(cfg: &RunConfig, cal: &Calibration) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for d in 1..=3 {
        let start = Instant::now();
        let u = degree_map(d, 1024).map_err(|e| e.to_string())?;
        let run = run_pipeline(&u, cfg, cal).map_err(|e| e.to_string())?;
        let windings = run.windings().map_err(|e| e.to_string())?;
        let total: i64 = windings.iter().map(|(_, w)| w).sum();
        let secs = start.elapsed().as_secs_f64();
        ok &= !windings.is_empty() && total == d && secs < 120.0;
        parts.push(format!("degree {d}: {} singular points, winding sum {total}, {secs:.1} s", windings.len()));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn weak_type(runs: &[(String, PipelineRun<'_>)]) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, run) in runs {
        for r in &run.reports {
            let q = r.max_t_pow_measure(run.field.dim());
            ok &= q <= run.bound_rhs;
            if r.weight == MeasureWeight::Euclidean || q > run.bound_rhs {
                parts.push(format!("{name}/{}: {q:.4} <= {:.4}", r.weight, run.bound_rhs));
            }
        }
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exact_inequalities(cfg: &RunConfig, cal: &Calibration) -> Outcome {
    let checks = run_checks(cfg, cal, Some("mean_oscillation")).map_err(|e| e.to_string())?;
    let mut failures = failed_checks(&checks);
    let maps = singext::verify::oscillation_maps(cfg.grid_n).map_err(|e| e.to_string())?;
    let quad = cfg.quadrature().map_err(|e| e.to_string())?.with_resolution(256);
    let mut worst = 0.0f64;
    for (name, u) in &maps {
        for delta in [cal.delta_cal, 0.5, 2.0] {
            let excess = gap_term_excess(u, delta, 2.0, &quad).map_err(|e| e.to_string())?;
            worst = worst.max(excess);
            if excess > 0.0 {
                failures.push(format!("{name}: gap term exceeds energy term by {excess} at delta {delta}"));
            }
        }
    }
    let detail = format!("{} oscillation checks on {} maps, worst gap-term excess {worst}", checks.len(), maps.len());
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn skeleton_functionals(cfg: &RunConfig, cal: &Calibration, runs: &[(String, PipelineRun<'_>)]) -> Outcome {
    let cases = default_cases(cfg.grid_n).map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = runs.iter().map(|(_, r)| r.energies.gap).collect();
    let terms_at = |cfg: &RunConfig| -> Result<Vec<SkeletonTerms>, String> {
        cases.iter().zip(&gaps).map(|(c, g)| skeleton_terms(&c.map, cfg, cal, *g).map_err(|e| e.to_string())).collect()
    };
    let base = terms_at(cfg)?;
    let mut failures = Vec::new();
    for (c, t) in cases.iter().zip(&base) {
        for (label, lhs, rhs) in [
            ("longitudinal", t.longitudinal, cal.c_long * t.longitudinal_rhs),
            ("transversal", t.transversal, cal.c_trans * t.transversal_rhs),
            ("counting", t.count, cal.c_count * t.count_rhs),
        ] {
            if lhs > rhs {
                failures.push(format!("{}/{label}: {lhs} > {rhs}", c.name));
            }
        }
    }
    let refined = skeleton_constants(&terms_at(&cfg.refined())?);
    let frozen = (cal.c_long, cal.c_trans, cal.c_count);
    let mut shifts = Vec::new();
    for (label, f, r) in [("C_long", frozen.0, refined.0), ("C_trans", frozen.1, refined.1), ("C_count", frozen.2, refined.2)] {
        let rel = (r - f).abs() / f;
        shifts.push(format!("{label} {f:.4} -> {r:.4} ({:.1}%)", 100.0 * rel));
        if rel > 0.25 {
            failures.push(format!("{label} moved {:.1}% under refinement", 100.0 * rel));
        }
    }
    let detail = format!("{} draws per map; {}", cfg.mc_draws, shifts.join(", "));
    if cfg.mc_draws < 64 {
        failures.push(format!("only {} Monte-Carlo draws", cfg.mc_draws));
    }
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

fn trace_recovery(cfg: &RunConfig, runs: &[(String, PipelineRun<'_>)]) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, run) in runs {
        let errors: Vec<f64> = run.trace_errors(cfg).map_err(|e| e.to_string())?.into_iter().map(|(_, e)| e).collect();
        let exact = errors.iter().all(|e| *e == 0.0);
        let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
        ok &= (exact || decreasing) && errors.last().is_some_and(|e| *e < 0.05);
        parts.push(format!("{name}: {errors:.4?}"));
    }
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn conformal_invariance(cfg: &RunConfig, cal: &Calibration) -> Outcome {
    let plane = QuadratureSpec::new(2048, 0.0, TailMode::AnalyticConstantTail).map_err(|e| e.to_string())?;
    let sphere = SphereQuadrature::new(1, 8192).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    let maps = [("degree1", degree_map(1, 1024)), ("bump", bump_map(0.5, 1024))];
    for (name, u) in maps {
        let u = u.map_err(|e| e.to_string())?;
        let e_plane = gagliardo_energy(&u, 2.0, &plane).map_err(|e| e.to_string())?;
        let e_sphere = sphere.energy(&u, 2.0).map_err(|e| e.to_string())?;
        let g_plane = gap_potential(&u, cal.delta_cal, &plane).map_err(|e| e.to_string())?;
        let g_sphere = sphere.gap(&u, cal.delta_cal).map_err(|e| e.to_string())?;
        let de = (e_plane - e_sphere).abs() / e_plane;
        let dg = (g_plane - g_sphere).abs() / g_plane;
        ok &= de <= 0.02 && dg <= 0.02;
        parts.push(format!("{name}: energy {e_plane:.4}/{e_sphere:.4}, gap {g_plane:.4}/{g_sphere:.4}"));
    }
    let checks = run_checks(cfg, cal, Some("conformal")).map_err(|e| e.to_string())?;
    let failures = failed_checks(&checks);
    ok &= failures.is_empty();
    let detail = format!("{}; {} map checks {}", parts.join("; "), checks.len(), failures.join("; "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let config = repo().join("singext.conf");
    let map = repo().join("suite").join("degree1.csv");
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let out = tmp.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_singext"))
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .arg("extend")
            .arg(&map)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("extend failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        outputs.push(out);
    }
    let mut names: Vec<String> = fs::read_dir(&outputs[0])
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    names.sort();
    for name in &names {
        let a = fs::read(outputs[0].join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(outputs[1].join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name} differs between reruns"));
        }
    }
    Ok(format!("{} artifacts byte-identical: {}", names.len(), names.join(", ")))
}

fn main() -> ExitCode {
    let cfg = RunConfig::default();
    let cal = match fs::read_to_string(repo().join("calibration.txt")).map_err(|e| e.to_string()).and_then(|t| {
        Calibration::parse(&t).map_err(|e| e.to_string())
    }) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cannot load the shipped calibration: {e}");
            return ExitCode::FAILURE;
        }
    };
    let cases = default_cases(cfg.grid_n).expect("built-in suite");
    let runs: Vec<(String, PipelineRun<'_>)> = cases
        .iter()
        .map(|c| (c.name.clone(), run_pipeline(&c.map, &cfg, &cal).expect("suite map runs")))
        .collect();

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("closed-form vortex distribution", Box::new(closed_form_vortex)),
        ("trivial pipeline", Box::new(|| trivial_pipeline(&cfg, &cal))),
        ("topological necessity", Box::new(|| topological_necessity(&cfg, &cal))),
        ("weak-type bound, three weights", Box::new(|| weak_type(&runs))),
        ("exact oscillation inequalities", Box::new(|| exact_inequalities(&cfg, &cal))),
        ("skeleton functionals and stability", Box::new(|| skeleton_functionals(&cfg, &cal, &runs))),
        ("trace recovery", Box::new(|| trace_recovery(&cfg, &runs))),
        ("conformal invariance", Box::new(|| conformal_invariance(&cfg, &cal))),
        ("determinism of extend", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
