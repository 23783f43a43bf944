//! `singext`: energies, extensions, verification, calibration sweeps and report bundles.

mod output;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use singext::pipeline::{sweep, SuiteCase};
use singext::verify::run_checks;
use singext::{energy_summary, run_pipeline, BoundaryMap, Calibration, CalibrationConstants, RunConfig};

use output::{Table, REQUIRED_RUN_FILES};

#[derive(Parser, Debug)]
#[command(name = "singext", version, about = "Singular extensions of critical fractional Sobolev maps")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Boundary energies of one map.
    Energy { map: PathBuf },
    /// Full construction on one map: distribution reports, singular set and field summary.
    Extend { map: PathBuf },
    /// Invariant suite against the configured calibration.
    Verify {
        /// Run a single module block.
        #[arg(long, value_name = "NAME")]
        only: Option<String>,
    },
    /// Calibrates every constant over a directory of suite maps.
    Sweep { suite_dir: PathBuf },
    /// Merges extend run directories into one `report.csv`.
    Report {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
    },
}

/// Failures that map to the configuration exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct ConfigError(String);

#[derive(Debug, thiserror::Error)]
#[error("{failed} of {total} checks failed")]
struct VerificationFailed {
    failed: usize,
    total: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("lambda was capped at lambda_max; the run is not conforming")]
struct CappedLambda;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<VerificationFailed>() {
            return 5;
        }
        if cause.is::<CappedLambda>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<singext::Error>() {
            return match e {
                singext::Error::SelectionFailure { .. } => 3,
                singext::Error::TubeViolation { .. } => 4,
                singext::Error::Parse { .. }
                | singext::Error::InvalidParameter(_)
                | singext::Error::Resolution(_)
                | singext::Error::ScaleOutOfRange { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

struct RunContext {
    cfg: RunConfig,
    out: PathBuf,
    /// Calibration path with relative entries resolved against the config directory.
    calibration: Option<PathBuf>,
}

fn load_context(cli: &Cli) -> Result<RunContext> {
    let (mut cfg, base) = match &cli.config {
        Some(path) => {
            let cfg = RunConfig::parse(&read_text(path)?).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            (cfg, path.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let calibration = cfg.calibration.as_ref().map(|p| if p.is_absolute() { p.clone() } else { base.join(p) });
    Ok(RunContext { cfg, out, calibration })
}

fn load_calibration(path: Option<&Path>) -> Result<Calibration> {
    let path = path.ok_or_else(|| ConfigError("no calibration configured; set `calibration = PATH`".into()))?;
    Calibration::parse(&read_text(path)?).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

fn load_map(path: &Path, cfg: &RunConfig) -> Result<BoundaryMap> {
    let file = fs::File::open(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    BoundaryMap::read_csv(BufReader::new(file), cfg.interpolation, cfg.tube_radius)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(cli: Cli) -> Result<()> {
    let ctx = load_context(&cli)?;
    match &cli.command {
        Command::Energy { map } => cmd_energy(&ctx, map),
        Command::Extend { map } => cmd_extend(&ctx, map),
        Command::Verify { only } => cmd_verify(&ctx, only.as_deref()),
        Command::Sweep { suite_dir } => cmd_sweep(&ctx, suite_dir),
        Command::Report { run_dirs } => cmd_report(&ctx, run_dirs),
    }
}

/// Threshold of the gap potential: the calibrated one when a calibration is configured.
fn gap_threshold(ctx: &RunContext) -> Result<f64> {
    match &ctx.calibration {
        Some(path) => Ok(load_calibration(Some(path))?.delta_cal),
        None => Ok(CalibrationConstants::default().eta * ctx.cfg.tube_radius / 2.0),
    }
}

fn cmd_energy(ctx: &RunContext, map: &Path) -> Result<()> {
    let delta = gap_threshold(ctx)?;
    let u = load_map(map, &ctx.cfg)?;
    let e = energy_summary(&u, &ctx.cfg, delta)?;
    let table = output::energy_table(&e, delta);
    create_dir(&ctx.out)?;
    table.write(&ctx.out.join("energies.csv"), ctx.cfg.seed)?;
    print!("{}", table.body());
    Ok(())
}

fn cmd_extend(ctx: &RunContext, map: &Path) -> Result<()> {
    let cal = load_calibration(ctx.calibration.as_deref())?;
    let u = load_map(map, &ctx.cfg)?;
    let run = run_pipeline(&u, &ctx.cfg, &cal)?;
    let seed = ctx.cfg.seed;
    create_dir(&ctx.out)?;
    for report in &run.reports {
        let path = ctx.out.join(format!("distribution_{}.csv", report.weight));
        output::distribution_table(report, ctx.cfg.dim, run.bound_rhs).write(&path, seed)?;
    }
    output::singular_table(&run)?.write(&ctx.out.join("singular_set.csv"), seed)?;
    output::summary_table(&run, &ctx.cfg)?.write(&ctx.out.join("summary.csv"), seed)?;
    let field = serde_json::to_string_pretty(&output::field_json(&run, seed))?;
    fs::write(ctx.out.join("field.json"), field + "\n")?;
    println!(
        "lambda={} bad_cubes={} singular_points={} max_weak={} bound={}",
        run.lambda.lambda,
        run.classification.bad.len(),
        run.singular_set().len(),
        run.max_weak_quantity(),
        run.bound_rhs
    );
    if run.lambda.capped {
        return Err(CappedLambda.into());
    }
    Ok(())
}

fn cmd_verify(ctx: &RunContext, only: Option<&str>) -> Result<()> {
    let cal = load_calibration(ctx.calibration.as_deref())?;
    let checks = run_checks(&ctx.cfg, &cal, only)?;
    let mut table = Table::new(&["test", "status", "value", "bound"]);
    for c in &checks {
        table.row(vec![c.test.clone(), c.status().into(), c.value.to_string(), c.bound.to_string()]);
        if !c.passed {
            eprintln!("FAIL {} value={} bound={}", c.test, c.value, c.bound);
        }
    }
    create_dir(&ctx.out)?;
    table.write(&ctx.out.join("verify.csv"), ctx.cfg.seed)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", checks.len(), failed);
    if failed > 0 {
        return Err(VerificationFailed { failed, total: checks.len() }.into());
    }
    Ok(())
}

/// Date recorded in calibration provenance: `SOURCE_DATE_EPOCH` when set.
fn provenance_date() -> Result<String> {
    let stamp = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => {
            let secs: i64 = v.trim().parse().map_err(|_| ConfigError(format!("SOURCE_DATE_EPOCH is not an integer: {v:?}")))?;
            chrono::DateTime::from_timestamp(secs, 0)
                .ok_or_else(|| ConfigError(format!("SOURCE_DATE_EPOCH out of range: {secs}")))?
        }
        Err(_) => chrono::Utc::now(),
    };
    Ok(stamp.format("%Y-%m-%d").to_string())
}

fn cmd_sweep(ctx: &RunContext, suite_dir: &Path) -> Result<()> {
    let entries = fs::read_dir(suite_dir).map_err(|e| ConfigError(format!("{}: {e}", suite_dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut hasher = Sha256::new();
    let mut cases = Vec::new();
    for path in &files {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update(&bytes);
        cases.push(SuiteCase { name, map: load_map(path, &ctx.cfg)? });
    }
    singext::pipeline::check_suite(&cases).map_err(|e| ConfigError(format!("{}: {e}", suite_dir.display())))?;
    let digest: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let provenance = vec![
        "calibration sweep".to_string(),
        format!("suite_sha256 = {digest}"),
        format!("suite = {}", cases.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(",")),
        format!("date = {}", provenance_date()?),
        format!("seed = {}", ctx.cfg.seed),
        format!("resolutions: {}", ctx.cfg.resolution_summary()),
    ];
    let (cal, records) = sweep(&cases, &ctx.cfg, provenance)?;
    create_dir(&ctx.out)?;
    fs::write(ctx.out.join("calibration.txt"), cal.to_text())?;
    output::sweep_table(&records).write(&ctx.out.join("sweep_records.csv"), ctx.cfg.seed)?;
    print!("{}", cal.to_text());
    Ok(())
}

fn cmd_report(ctx: &RunContext, run_dirs: &[PathBuf]) -> Result<()> {
    let missing: Vec<String> = run_dirs
        .iter()
        .flat_map(|d| REQUIRED_RUN_FILES.iter().map(move |f| d.join(f)))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError(format!("missing run inputs:\n  {}", missing.join("\n  "))).into());
    }
    let ids = output::run_ids(run_dirs);
    let mut merged = Table::new(&output::REPORT_COLUMNS);
    for (dir, id) in run_dirs.iter().zip(&ids) {
        output::append_run(&mut merged, dir, id)?;
    }
    create_dir(&ctx.out)?;
    merged.write(&ctx.out.join("report.csv"), ctx.cfg.seed)?;
    println!("{} rows from {} runs", merged.len(), run_dirs.len());
    Ok(())
}
