//! CSV and JSON artifacts of the commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use singext::pipeline::SweepRecord;
use singext::{CubeKind, DistributionReport, EnergySummary, MeasureWeight, PipelineRun, RunConfig};

/// Columns of a merged report.
pub const REPORT_COLUMNS: [&str; 7] = ["run", "weight", "t", "measure", "t_pow_measure", "bound_rhs", "singular_points"];

/// Files `report` reads from every run directory.
pub const REQUIRED_RUN_FILES: [&str; 4] =
    ["distribution_euclidean.csv", "distribution_hyperbolic.csv", "distribution_ball.csv", "singular_set.csv"];

/// A header plus rows of already formatted cells.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Header and rows, LF-terminated.
    pub fn body(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes `# seed=N` followed by the body.
    pub fn write(&self, path: &Path, seed: u64) -> Result<()> {
        fs::write(path, format!("# seed={seed}\n{}", self.body())).with_context(|| format!("writing {}", path.display()))
    }
}

fn quantity_table(rows: Vec<(String, String)>) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    for (q, v) in rows {
        t.row(vec![q, v]);
    }
    t
}

pub fn energy_table(e: &EnergySummary, delta: f64) -> Table {
    let mut rows = vec![
        ("gagliardo_energy".to_string(), e.energy.to_string()),
        ("gap_potential".to_string(), e.gap.to_string()),
        ("truncated_energy".to_string(), e.truncated.to_string()),
        ("delta_cal".to_string(), delta.to_string()),
    ];
    if let Some(w) = e.winding {
        rows.push(("winding_number".to_string(), w.to_string()));
    }
    quantity_table(rows)
}

pub fn distribution_table(report: &DistributionReport, dim: usize, bound_rhs: f64) -> Table {
    let mut t = Table::new(&["weight", "t", "measure", "t_pow_measure", "bound_rhs"]);
    for ((tv, m), tm) in report.t_grid.iter().zip(&report.measure).zip(report.t_pow_measure(dim)) {
        t.row(vec![report.weight.to_string(), tv.to_string(), m.to_string(), tm.to_string(), bound_rhs.to_string()]);
    }
    t
}

pub fn singular_table(run: &PipelineRun<'_>) -> Result<Table> {
    if run.field.dim() == 1 {
        let mut t = Table::new(&["x1", "t", "winding"]);
        for (c, w) in run.windings()? {
            t.row(vec![c[0].to_string(), c[1].to_string(), w.to_string()]);
        }
        Ok(t)
    } else {
        let mut t = Table::new(&["x1", "x2", "t"]);
        for c in run.singular_set() {
            t.row(vec![c[0].to_string(), c[1].to_string(), c[2].to_string()]);
        }
        Ok(t)
    }
}

pub fn summary_table(run: &PipelineRun<'_>, cfg: &RunConfig) -> Result<Table> {
    let e = run.energies;
    let mut rows = energy_table(&e, f64::NAN).rows;
    rows.retain(|r| r[0] != "delta_cal");
    let mut push = |q: &str, v: String| rows.push(vec![q.to_string(), v]);
    push("lambda", run.lambda.lambda.to_string());
    push("lambda_capped", run.lambda.capped.to_string());
    push("tau", run.selection.tau.to_string());
    push("mu", run.classification.mu.to_string());
    push("cubes", run.field.cubes().len().to_string());
    push("bad_cubes", run.classification.bad.len().to_string());
    push("singular_points", run.singular_set().len().to_string());
    push("bound_rhs", run.bound_rhs.to_string());
    for r in &run.reports {
        push(&format!("max_t_pow_measure_{}", r.weight), r.max_t_pow_measure(cfg.dim).to_string());
    }
    for (eps, err) in run.trace_errors(cfg)? {
        push(&format!("trace_error_{eps}"), err.to_string());
    }
    let mut t = Table::new(&["quantity", "value"]);
    t.rows = rows;
    Ok(t)
}

pub fn field_json(run: &PipelineRun<'_>, seed: u64) -> Value {
    let params = run.field.params();
    let (k_min, k_max) = params.k_range();
    let translations: BTreeMap<String, Vec<f64>> =
        run.selection.h_by_scale.iter().map(|(k, h)| (k.to_string(), h[..run.field.dim()].to_vec())).collect();
    let cubes: Vec<Value> = run
        .field
        .cubes()
        .iter()
        .map(|c| {
            json!({
                "k": c.id.k,
                "j": &c.id.j[..c.dim()],
                "kind": match c.kind { CubeKind::Good => "good", CubeKind::Bad => "bad" },
                "edge": c.edge(),
                "center": &c.center[..=c.dim()],
                "skeleton_sup": run.classification.per_cube_sup.get(&c.id).copied(),
            })
        })
        .collect();
    json!({
        "seed": seed,
        "dim": run.field.dim(),
        "lambda": run.lambda.lambda,
        "lambda_capped": run.lambda.capped,
        "tau": run.selection.tau,
        "mu": run.classification.mu,
        "k_range": [k_min, k_max],
        "translations": translations,
        "tube_radius": run.field.tube_radius(),
        "energy": run.energies.energy,
        "gap_potential": run.energies.gap,
        "bound_rhs": run.bound_rhs,
        "cubes": cubes,
    })
}

pub fn sweep_table(records: &[SweepRecord]) -> Table {
    let mut t = Table::new(&[
        "name", "energy", "gap_potential", "truncated_energy", "winding", "lambda", "tau", "bad_cubes", "cubes", "max_weak",
    ]);
    for r in records {
        let e = r.energies;
        t.row(vec![
            r.name.clone(),
            e.energy.to_string(),
            e.gap.to_string(),
            e.truncated.to_string(),
            e.winding.map(|w| w.to_string()).unwrap_or_default(),
            r.lambda.to_string(),
            r.tau.to_string(),
            r.bad.to_string(),
            r.cubes.to_string(),
            r.max_weak.to_string(),
        ]);
    }
    t
}

/// Directory names, suffixed with their position when two runs share a name.
pub fn run_ids(dirs: &[PathBuf]) -> Vec<String> {
    let names: Vec<String> = dirs
        .iter()
        .map(|d| {
            d.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| d.display().to_string())
        })
        .collect();
    names
        .iter()
        .enumerate()
        .map(|(i, n)| if names.iter().filter(|m| *m == n).count() > 1 { format!("{n}#{i}") } else { n.clone() })
        .collect()
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| Ok(r?.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok((header, rows))
}

/// Adds one row per `(weight, t)` of a run directory.
pub fn append_run(table: &mut Table, dir: &Path, id: &str) -> Result<()> {
    let (_, singular) = read_rows(&dir.join("singular_set.csv"))?;
    for weight in MeasureWeight::ALL {
        let path = dir.join(format!("distribution_{weight}.csv"));
        let (header, rows) = read_rows(&path)?;
        if header != ["weight", "t", "measure", "t_pow_measure", "bound_rhs"] {
            bail!("{}: unexpected header {:?}", path.display(), header);
        }
        for r in rows {
            table.row(vec![
                id.to_string(),
                r[0].clone(),
                r[1].clone(),
                r[2].clone(),
                r[3].clone(),
                r[4].clone(),
                singular.len().to_string(),
            ]);
        }
    }
    Ok(())
}
