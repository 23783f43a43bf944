//! Flat `key = value` run configuration and calibration files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::boundary_map::{Interpolation, QuadratureSpec, TailMode};
use crate::cube_extension::{dyadic_grid, DistributionSpec};
use crate::error::{Error, Result};
use crate::manifold::{TargetKind, TargetManifold};
use crate::skeleton_selection::{CalibrationConstants, SkeletonConfig};

/// Lines of `key = value` with `#` comments, in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse { line: i + 1, message: format!("expected `key = value`, got {line:?}") });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse { line: i + 1, message: "empty key".into() });
        }
        out.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Parse { line, message: format!("{key}: {e}") })
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    if let Some(count) = value.strip_prefix("dyadic:") {
        return Ok(dyadic_grid(parse_value(line, key, count.trim())?));
    }
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Everything a command needs besides the map and the calibration constants.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub target: TargetKind,
    pub dim: usize,
    pub grid_n: usize,
    pub interpolation: Interpolation,
    pub window_margin: f64,
    pub pair_resolution: usize,
    pub tail_mode: TailMode,
    pub k_range: Option<(i32, i32)>,
    /// Skeleton samples per unit length.
    pub density: f64,
    pub stencil_resolution: usize,
    pub min_segments: usize,
    pub max_segments: usize,
    pub band_top: f64,
    pub h_candidates: usize,
    pub tube_radius: f64,
    pub t_grid: Vec<f64>,
    pub cells_per_unit: f64,
    pub min_cells: usize,
    pub max_cells: usize,
    pub check_cells: usize,
    pub trace_heights: Vec<f64>,
    pub trace_samples: usize,
    pub mc_draws: usize,
    /// Random half-space points per map for the pointwise extension constants.
    pub oscillation_samples: usize,
    pub ext_cells: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub calibration: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            target: TargetKind::Circle,
            dim: 1,
            grid_n: 1024,
            interpolation: Interpolation::EmbeddedLinear,
            window_margin: 0.0,
            pair_resolution: 512,
            tail_mode: TailMode::AnalyticConstantTail,
            k_range: None,
            density: 256.0,
            stencil_resolution: 16,
            min_segments: 8,
            max_segments: 256,
            band_top: 8.0,
            h_candidates: 8,
            tube_radius: 0.5,
            t_grid: dyadic_grid(7),
            cells_per_unit: 256.0,
            min_cells: 8,
            max_cells: 256,
            check_cells: 8,
            trace_heights: vec![0.0625, 0.03125, 0.015625],
            trace_samples: 512,
            mc_draws: 64,
            oscillation_samples: 1000,
            ext_cells: 32,
            seed: 0,
            output_dir: PathBuf::from("out"),
            calibration: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut k_min = None;
        let mut k_max = None;
        for (line, key, value) in parse_pairs(text)? {
            let v = value.as_str();
            match key.as_str() {
                "target" => cfg.target = parse_value(line, &key, v)?,
                "m" => cfg.dim = parse_value(line, &key, v)?,
                "grid_n" => cfg.grid_n = parse_value(line, &key, v)?,
                "interpolation" => cfg.interpolation = parse_value(line, &key, v)?,
                "window_margin" => cfg.window_margin = parse_value(line, &key, v)?,
                "pair_resolution" => cfg.pair_resolution = parse_value(line, &key, v)?,
                "tail_mode" => cfg.tail_mode = parse_value(line, &key, v)?,
                "k_min" => k_min = Some(parse_value(line, &key, v)?),
                "k_max" => k_max = Some(parse_value(line, &key, v)?),
                "density" => cfg.density = parse_value(line, &key, v)?,
                "stencil_resolution" => cfg.stencil_resolution = parse_value(line, &key, v)?,
                "min_segments" => cfg.min_segments = parse_value(line, &key, v)?,
                "max_segments" => cfg.max_segments = parse_value(line, &key, v)?,
                "band_top" => cfg.band_top = parse_value(line, &key, v)?,
                "h_candidates" => cfg.h_candidates = parse_value(line, &key, v)?,
                "tube_radius" => cfg.tube_radius = parse_value(line, &key, v)?,
                "t_grid" => cfg.t_grid = parse_list(line, &key, v)?,
                "cells_per_unit" => cfg.cells_per_unit = parse_value(line, &key, v)?,
                "min_cells" => cfg.min_cells = parse_value(line, &key, v)?,
                "max_cells" => cfg.max_cells = parse_value(line, &key, v)?,
                "check_cells" => cfg.check_cells = parse_value(line, &key, v)?,
                "trace_heights" => cfg.trace_heights = parse_list(line, &key, v)?,
                "trace_samples" => cfg.trace_samples = parse_value(line, &key, v)?,
                "mc_draws" => cfg.mc_draws = parse_value(line, &key, v)?,
                "oscillation_samples" => cfg.oscillation_samples = parse_value(line, &key, v)?,
                "ext_cells" => cfg.ext_cells = parse_value(line, &key, v)?,
                "seed" => cfg.seed = parse_value(line, &key, v)?,
                "output_dir" => cfg.output_dir = PathBuf::from(v),
                "calibration" => cfg.calibration = Some(PathBuf::from(v)),
                _ => return Err(Error::Parse { line, message: format!("unknown key {key:?}") }),
            }
        }
        cfg.k_range = match (k_min, k_max) {
            (None, None) => None,
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => return Err(Error::InvalidParameter("k_min and k_max must be given together".into())),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidParameter(format!("m must be 1 or 2, got {}", self.dim)));
        }
        if self.target == TargetKind::Circle && self.dim == 2 && self.interpolation == Interpolation::Geodesic {
            return Err(Error::InvalidParameter("geodesic interpolation needs m = 1".into()));
        }
        if self.grid_n < 2 {
            return Err(Error::InvalidParameter("grid_n must be at least 2".into()));
        }
        self.target_manifold()?;
        self.quadrature()?;
        self.skeleton().validate()?;
        self.distribution()?;
        if self.trace_heights.iter().any(|h| !(*h > 0.0)) || self.trace_samples == 0 {
            return Err(Error::InvalidParameter("trace heights must be positive with at least one sample".into()));
        }
        if self.mc_draws == 0 || self.oscillation_samples == 0 || self.ext_cells == 0 || self.check_cells == 0 {
            return Err(Error::InvalidParameter("sample counts must be positive".into()));
        }
        Ok(())
    }

    pub fn target_manifold(&self) -> Result<TargetManifold> {
        TargetManifold::new(self.target, self.tube_radius)
    }

    /// Quadrature of the energies and the gap potential.
    pub fn quadrature(&self) -> Result<QuadratureSpec> {
        QuadratureSpec::new(self.pair_resolution, self.window_margin, self.tail_mode)
    }

    pub fn skeleton(&self) -> SkeletonConfig {
        let mut cfg = SkeletonConfig::for_grid(self.dim, self.grid_n);
        cfg.stencil = QuadratureSpec::default().with_resolution(self.stencil_resolution);
        cfg.density = self.density;
        cfg.min_segments = self.min_segments;
        cfg.max_segments = self.max_segments;
        cfg.band_top = self.band_top;
        cfg.h_candidates = self.h_candidates;
        cfg.k_range = self.k_range;
        cfg
    }

    pub fn distribution(&self) -> Result<DistributionSpec> {
        let mut spec = DistributionSpec::new(self.t_grid.clone())?;
        spec.cells_per_unit = self.cells_per_unit;
        spec.min_cells = self.min_cells;
        spec.max_cells = self.max_cells;
        spec.validate()?;
        Ok(spec)
    }

    /// Same configuration with the oscillation stencil resolution doubled.
    pub fn refined(&self) -> Self {
        Self { stencil_resolution: 2 * self.stencil_resolution, ..self.clone() }
    }

    /// Resolutions recorded in calibration provenance.
    pub fn resolution_summary(&self) -> String {
        format!(
            "grid_n={} pair_resolution={} stencil_resolution={} density={} mc_draws={} t_grid={}",
            self.grid_n,
            self.pair_resolution,
            self.stencil_resolution,
            self.density,
            self.mc_draws,
            join(&self.t_grid)
        )
    }
}

/// Measured constants frozen by a calibration sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub c_dist: f64,
    pub c_grad: f64,
    pub c_long: f64,
    pub c_trans: f64,
    pub c_count: f64,
    pub c_singular: f64,
    pub c_ext: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub delta_cal: f64,
    pub consts: CalibrationConstants,
    /// Comment lines written above the values.
    pub provenance: Vec<String>,
}

const CALIBRATION_KEYS: [&str; 15] = [
    "C_dist",
    "C_grad",
    "C_long",
    "C_trans",
    "C_count",
    "C_S",
    "C_ext",
    "A_hat",
    "B_hat",
    "delta_cal",
    "B_lambda",
    "C_mu",
    "eta",
    "selection_budget",
    "lambda_max",
];

impl Calibration {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for (line, key, value) in parse_pairs(text)? {
            let Some(known) = CALIBRATION_KEYS.iter().find(|k| **k == key) else {
                return Err(Error::Parse { line, message: format!("unknown calibration key {key:?}") });
            };
            let v: f64 = parse_value(line, &key, &value)?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parse { line, message: format!("{key} must be finite and nonnegative, got {v}") });
            }
            if values.insert(known, (line, v)).is_some() {
                return Err(Error::Parse { line, message: format!("duplicate key {key:?}") });
            }
        }
        let missing: Vec<&str> = CALIBRATION_KEYS.iter().copied().filter(|k| !values.contains_key(k)).collect();
        if !missing.is_empty() {
            return Err(Error::InvalidParameter(format!("calibration is missing {}", missing.join(", "))));
        }
        let get = |k: &str| values[k].1;
        let budget = get("selection_budget");
        if budget.fract() != 0.0 || budget < 1.0 {
            return Err(Error::Parse {
                line: values["selection_budget"].0,
                message: "selection_budget must be a positive integer".into(),
            });
        }
        let provenance = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix('#').map(|c| c.trim().to_string()))
            .collect();
        let cal = Self {
            c_dist: get("C_dist"),
            c_grad: get("C_grad"),
            c_long: get("C_long"),
            c_trans: get("C_trans"),
            c_count: get("C_count"),
            c_singular: get("C_S"),
            c_ext: get("C_ext"),
            a_hat: get("A_hat"),
            b_hat: get("B_hat"),
            delta_cal: get("delta_cal"),
            consts: CalibrationConstants {
                b_lambda: get("B_lambda"),
                eta: get("eta"),
                c_mu: get("C_mu"),
                selection_budget: budget as usize,
                lambda_max: get("lambda_max"),
            },
            provenance,
        };
        cal.consts.validate()?;
        if !(cal.delta_cal > 0.0) {
            return Err(Error::InvalidParameter("delta_cal must be positive".into()));
        }
        Ok(cal)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in &self.provenance {
            let _ = writeln!(out, "# {line}");
        }
        let c = &self.consts;
        let rows: [(&str, f64); 15] = [
            ("C_dist", self.c_dist),
            ("C_grad", self.c_grad),
            ("C_long", self.c_long),
            ("C_trans", self.c_trans),
            ("C_count", self.c_count),
            ("C_S", self.c_singular),
            ("C_ext", self.c_ext),
            ("A_hat", self.a_hat),
            ("B_hat", self.b_hat),
            ("delta_cal", self.delta_cal),
            ("B_lambda", c.b_lambda),
            ("C_mu", c.c_mu),
            ("eta", c.eta),
            ("selection_budget", c.selection_budget as f64),
            ("lambda_max", c.lambda_max),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v:e}");
        }
        out
    }

    /// `A_hat exp(B_hat gap) energy`.
    pub fn weak_bound(&self, gap: f64, energy: f64) -> f64 {
        self.a_hat * (self.b_hat * gap).exp() * energy
    }
}
