use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use singext::suite::{bump_map, constant_map, degree_map};
use tempfile::TempDir;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn suite_map(name: &str) -> PathBuf {
    repo().join("suite").join(format!("{name}.csv"))
}

fn shipped_calibration() -> String {
    fs::read_to_string(repo().join("calibration.txt")).unwrap()
}

/// A config file in `dir` pointing at `calibration` (relative to `dir`), plus extra lines.
fn write_config(dir: &Path, calibration: &str, extra: &str) -> PathBuf {
    let base = fs::read_to_string(repo().join("singext.conf")).unwrap();
    let path = dir.join("run.conf");
    fs::write(&path, format!("{base}calibration = {calibration}\n{extra}")).unwrap();
    path
}

fn singext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singext")).args(args).env("SOURCE_DATE_EPOCH", "1792281600").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// `quantity,value` rows of a CSV written by the tool.
fn quantities(path: &Path) -> Vec<(String, String)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# seed="));
    assert_eq!(lines.next().unwrap(), "quantity,value");
    lines.map(|l| {
        let (q, v) = l.split_once(',').unwrap();
        (q.to_string(), v.to_string())
    })
    .collect()
}

fn lookup(rows: &[(String, String)], key: &str) -> f64 {
    rows.iter().find(|(q, _)| q == key).unwrap_or_else(|| panic!("no {key}")).1.parse().unwrap()
}

struct Sandbox {
    dir: TempDir,
    config: PathBuf,
}

impl Sandbox {
    fn new(extra: &str) -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("cal.txt"), shipped_calibration()).unwrap();
        let config = write_config(dir.path(), "cal.txt", extra);
        Self { dir, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, out: &str, args: &[&str]) -> Output {
        let config = self.config.to_str().unwrap().to_string();
        let out = self.path(out).to_str().unwrap().to_string();
        let mut all = vec!["--config", &config, "--out", &out];
        all.extend_from_slice(args);
        singext(&all)
    }
}

#[test]
fn energy_of_the_constant_map_is_zero() {
    let sb = Sandbox::new("");
    let out = sb.run("e", &["energy", suite_map("constant").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = quantities(&sb.path("e/energies.csv"));
    for key in ["gagliardo_energy", "gap_potential", "truncated_energy", "winding_number"] {
        assert_eq!(lookup(&rows, key), 0.0, "{key}");
    }
}

#[test]
fn energy_of_the_degree_one_map() {
    let sb = Sandbox::new("");
    let out = sb.run("e", &["energy", suite_map("degree1").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = quantities(&sb.path("e/energies.csv"));
    assert_eq!(lookup(&rows, "winding_number"), 1.0);
    // Brute-force double sum of the analytic profile on 2048 cells.
    let oracle = 59.37711263449593;
    let e = lookup(&rows, "gagliardo_energy");
    assert!((e - oracle).abs() <= 0.01 * oracle, "{e}");
}

#[test]
fn missing_map_is_named() {
    let sb = Sandbox::new("");
    let missing = sb.path("nowhere.csv");
    let out = sb.run("e", &["energy", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nowhere.csv"), "{}", stderr(&out));
}

#[test]
fn corrupted_calibration_stops_extend_early() {
    let sb = Sandbox::new("");
    fs::write(sb.path("cal.txt"), "C_dist = banana\n").unwrap();
    let out = sb.run("x", &["extend", suite_map("degree1").to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("cal.txt"));
    assert!(!sb.path("x").exists());
}

#[test]
fn extend_on_the_constant_map_is_empty() {
    let sb = Sandbox::new("");
    let out = sb.run("x", &["extend", suite_map("constant").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let singular = fs::read_to_string(sb.path("x/singular_set.csv")).unwrap();
    assert_eq!(singular.lines().count(), 2, "{singular}");
    for weight in ["euclidean", "hyperbolic", "ball"] {
        let text = fs::read_to_string(sb.path(&format!("x/distribution_{weight}.csv"))).unwrap();
        for line in text.lines().skip(2) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[2].parse::<f64>().unwrap(), 0.0, "{line}");
        }
    }
    assert!(sb.path("x/field.json").exists());
}

#[test]
fn verify_can_run_one_block() {
    let sb = Sandbox::new("");
    let out = sb.run("v", &["verify", "--only", "mean_oscillation"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(sb.path("v/verify.csv")).unwrap();
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next().unwrap(), "test,status,value,bound");
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.starts_with("mean_oscillation/") && r.contains(",pass,")), "{rows:?}");
}

#[test]
fn halved_constant_is_caught() {
    let sb = Sandbox::new("");
    let tampered: String = shipped_calibration()
        .lines()
        .map(|l| match l.split_once('=') {
            Some((k, v)) if k.trim() == "C_grad" => format!("C_grad = {}\n", v.trim().parse::<f64>().unwrap() / 2.0),
            _ => format!("{l}\n"),
        })
        .collect();
    fs::write(sb.path("cal.txt"), tampered).unwrap();
    let out = sb.run("v", &["verify", "--only", "convolution_extension"]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    let text = fs::read_to_string(sb.path("v/verify.csv")).unwrap();
    assert!(text.lines().any(|l| l.contains("gradient_bound,fail,")), "{text}");
}

#[test]
fn unknown_block_is_a_config_error() {
    let sb = Sandbox::new("");
    assert_eq!(code(&sb.run("v", &["verify", "--only", "nonsense"])), 2);
}

#[test]
fn empty_threshold_grid_is_a_config_error() {
    let sb = Sandbox::new("t_grid =\n");
    let out = sb.run("x", &["extend", suite_map("constant").to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn report_merges_runs_and_lists_missing_inputs() {
    let sb = Sandbox::new("");
    for run in ["a", "b"] {
        let out = sb.run(run, &["extend", suite_map("constant").to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let (a, b) = (sb.path("a"), sb.path("b"));
    let out = sb.run("r", &["report", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(sb.path("r/report.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2 * 3 * 7);
    assert_eq!(rows.iter().filter(|r| r.starts_with("a,")).count(), 21);
    assert_eq!(rows.iter().filter(|r| r.starts_with("b,")).count(), 21);

    fs::remove_file(b.join("singular_set.csv")).unwrap();
    fs::remove_file(b.join("distribution_ball.csv")).unwrap();
    let out = sb.run("r2", &["report", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("singular_set.csv") && err.contains("distribution_ball.csv"), "{err}");
}

/// Settings small enough for a sweep in a few seconds.
const SMALL: &str = "grid_n = 128\npair_resolution = 64\ndensity = 64\nmc_draws = 4\noscillation_samples = 50\n\
max_cells = 32\next_cells = 8\ntrace_samples = 64\nstencil_resolution = 4\nband_top = 2\n";

fn small_suite(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    for (name, map) in [
        ("constant", constant_map(128).unwrap()),
        ("degree1", degree_map(1, 128).unwrap()),
        ("bump", bump_map(0.5, 128).unwrap()),
    ] {
        map.write_csv(fs::File::create(dir.join(format!("{name}.csv"))).unwrap()).unwrap();
    }
}

#[test]
fn sweep_is_reproducible() {
    let sb = Sandbox::new(SMALL);
    let suite = sb.path("suite");
    small_suite(&suite);
    let first = sb.run("s1", &["sweep", suite.to_str().unwrap()]);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let second = sb.run("s2", &["sweep", suite.to_str().unwrap()]);
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    let a = fs::read_to_string(sb.path("s1/calibration.txt")).unwrap();
    let b = fs::read_to_string(sb.path("s2/calibration.txt")).unwrap();
    assert_eq!(a, b);
    for key in [
        "C_dist", "C_grad", "C_long", "C_trans", "C_count", "C_S", "C_ext", "A_hat", "B_hat", "delta_cal", "eta",
        "C_mu", "B_lambda",
    ] {
        assert!(a.lines().any(|l| l.starts_with(&format!("{key} ="))), "{key}");
    }
    assert!(a.contains("suite_sha256") && a.contains("date = 2026-10-18"));
}

#[test]
fn sweep_needs_the_required_cases() {
    let sb = Sandbox::new(SMALL);
    let suite = sb.path("suite");
    small_suite(&suite);
    fs::remove_file(suite.join("degree1.csv")).unwrap();
    let out = sb.run("s", &["sweep", suite.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("degree1"), "{}", stderr(&out));
}
