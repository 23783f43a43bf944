//! The invariant suite behind the `verify` command: one block of checks per module,
//! each reported as a `test,status,value,bound` row.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::boundary_map::{
    for_each_pair_term, gagliardo_energy, gap_potential, truncated_energy, BoundaryData, BoundaryMap, QuadratureSpec,
};
use crate::conformal::{conformality_defect, psi, psi_inv, ConformalMap, Direction};
use crate::config::{Calibration, RunConfig};
use crate::convolution_extension::ConvolutionExtension;
use crate::cube_extension::{cell_centers, CubeKind};
use crate::error::{Error, Result};
use crate::lambda_cubes::{CubeFamilyParams, FaceKind, Translations};
use crate::manifold::{geodesic, Ambient, TargetKind, TargetManifold};
use crate::mean_oscillation::{pair_average, sharp_average, BallStencil, HalfSpacePoint};
use crate::pipeline::{
    default_cases, extension_constant, pointwise_constants, pointwise_stream, run_pipeline, skeleton_terms,
    PipelineRun, SuiteCase,
};
use crate::skeleton_selection::{
    classify_with_threshold, counting_functional_levels, face_functionals, rng_for, McSpec, TranslationMode,
};
use crate::suite::{bump_map, constant_map, degree_map, DEFAULT_BUMP_AMPLITUDE};

/// Module blocks in run order.
pub const MODULES: [&str; 9] = [
    "manifold",
    "boundary_map",
    "mean_oscillation",
    "convolution_extension",
    "lambda_cubes",
    "skeleton_selection",
    "cube_extension",
    "conformal",
    "cli",
];

/// Arithmetic slack of the exact inequalities.
pub const ARITHMETIC_SLACK: f64 = 1e-12;

const RANDOM_POINTS: usize = 10_000;
const OSCILLATION_POINTS: usize = 1000;
const NESTED_POINTS: usize = 100;
const HESSIAN_POINTS: usize = 100;
const JACOBIAN_POINTS: usize = 100;
const SHARED_DRAWS: usize = 8;
/// Stencil of the smoothness check; the run stencil's quadrature error alone exceeds
/// the symmetry tolerance.
const HESSIAN_STENCIL: usize = 1024;
/// Pair grid of the term-by-term functional checks.
const CHECK_PAIR_RESOLUTION: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub test: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    /// Passes when `value <= bound`; NaN fails.
    pub fn at_most(test: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { test: test.into(), passed: value <= bound, value, bound }
    }

    /// Passes when `value > bound`.
    pub fn above(test: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { test: test.into(), passed: value > bound, value, bound }
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}

/// The five maps of the shared-stencil checks.
pub fn oscillation_maps(n: usize) -> Result<Vec<(String, BoundaryMap)>> {
    Ok(vec![
        ("constant".into(), constant_map(n)?),
        ("degree1".into(), degree_map(1, n)?),
        ("degree2".into(), degree_map(2, n)?),
        ("degree3".into(), degree_map(3, n)?),
        ("bump".into(), bump_map(DEFAULT_BUMP_AMPLITUDE, n)?),
    ])
}

/// Runs the selected blocks (`only` names one module) against a calibration.
pub fn run_checks(cfg: &RunConfig, cal: &Calibration, only: Option<&str>) -> Result<Vec<Check>> {
    cfg.validate()?;
    if let Some(name) = only {
        if !MODULES.contains(&name) {
            return Err(Error::InvalidParameter(format!("unknown module {name:?}; expected one of {}", MODULES.join(", "))));
        }
    }
    if cfg.dim != 1 || cfg.target != TargetKind::Circle {
        return Err(Error::InvalidParameter("the invariant suite runs on circle-valued maps of the line".into()));
    }
    let wanted = |m: &str| only.is_none_or(|o| o == m);
    let cases = default_cases(cfg.grid_n)?;
    let runs = if wanted("skeleton_selection") || wanted("cube_extension") {
        cases.iter().map(|c| run_pipeline(&c.map, cfg, cal)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut out = Vec::new();
    for module in MODULES.iter().copied().filter(|m| wanted(m)) {
        let block = match module {
            "manifold" => manifold_checks(cfg.seed)?,
            "boundary_map" => boundary_map_checks(cfg, cal)?,
            "mean_oscillation" => mean_oscillation_checks(cfg, cal)?,
            "convolution_extension" => convolution_checks(cfg, cal, &cases)?,
            "lambda_cubes" => lambda_cube_checks(cfg.seed)?,
            "skeleton_selection" => skeleton_checks(cfg, cal, &cases, &runs)?,
            "cube_extension" => extension_checks(cfg, cal, &cases, &runs)?,
            "conformal" => conformal_checks(cfg.seed)?,
            _ => determinism_checks(cfg, cal, &cases)?,
        };
        out.extend(block.into_iter().map(|c| Check { test: format!("{module}/{}", c.test), ..c }));
    }
    Ok(out)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Uniform point of the open unit ball in `R^dim`.
fn ball_point(rng: &mut ChaCha8Rng, dim: usize) -> Vector3<f64> {
    loop {
        let mut v = Vector3::zeros();
        for i in 0..dim {
            v[i] = uniform(rng, -1.0, 1.0);
        }
        let n = v.norm();
        if n > 0.0 && n < 1.0 {
            return v;
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Ambient {
    let v = ball_point(rng, dim);
    v / v.norm()
}

/// Half-space point with `x'` around the window and a log-uniform height.
fn random_half_space_point(rng: &mut ChaCha8Rng, u: &BoundaryMap) -> Result<HalfSpacePoint> {
    let (lo, hi) = u.support();
    let x = uniform(rng, lo[0] - 0.5, hi[0] + 0.5);
    HalfSpacePoint::new([x, 0.0], 2f64.powf(uniform(rng, -8.0, 2.0)))
}

fn manifold_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (t, target) in [TargetManifold::circle(), TargetManifold::sphere()].into_iter().enumerate() {
        let dim = target.ambient_dim();
        let mut rng = rng_for(seed, 2000 + t as u64);
        let (mut unit, mut dist) = (0.0f64, 0.0f64);
        for _ in 0..RANDOM_POINTS {
            let x = random_unit(&mut rng, dim) * 2.0 * (1.0 - rng.random::<f64>());
            let r = target.retract(&x)?.point;
            unit = unit.max((r.norm() - 1.0).abs());
            dist = dist.max(((x - r).norm() - (1.0 - x.norm()).abs()).abs());
        }
        let (mut triangle, mut chordal) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for _ in 0..RANDOM_POINTS {
            let (a, b, c) = (random_unit(&mut rng, dim), random_unit(&mut rng, dim), random_unit(&mut rng, dim));
            let d = geodesic(&a, &b);
            triangle = triangle.max(d - geodesic(&a, &c) - geodesic(&c, &b));
            let chord = (a - b).norm();
            chordal = chordal.max((chord - d).max(d - PI / 2.0 * chord));
        }
        let kind = target.kind();
        out.push(Check::at_most(format!("{kind}/retract_unit_norm"), unit, ARITHMETIC_SLACK));
        out.push(Check::at_most(format!("{kind}/retract_distance"), dist, ARITHMETIC_SLACK));
        out.push(Check::at_most(format!("{kind}/triangle_inequality"), triangle, ARITHMETIC_SLACK));
        out.push(Check::at_most(format!("{kind}/chordal_comparison"), chordal, ARITHMETIC_SLACK));
    }
    Ok(out)
}

fn check_quadrature(cfg: &RunConfig) -> Result<QuadratureSpec> {
    Ok(cfg.quadrature()?.with_resolution(cfg.pair_resolution.min(CHECK_PAIR_RESOLUTION)))
}

/// Largest `[d >= delta] w - w d^p / delta^p` over the quadrature terms of `u`.
pub fn gap_term_excess(u: &BoundaryMap, delta: f64, p: f64, quad: &QuadratureSpec) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for_each_pair_term(u, quad, |w, d| {
        let gap = if d >= delta { w } else { 0.0 };
        worst = worst.max(gap - w * d.powf(p) / delta.powf(p));
    })?;
    Ok(worst)
}

fn boundary_map_checks(cfg: &RunConfig, cal: &Calibration) -> Result<Vec<Check>> {
    let quad = check_quadrature(cfg)?;
    let p = cfg.dim as f64 + 1.0;
    let delta = cal.delta_cal;
    let rotation = Rotation3::from_axis_angle(&Vector3::z_axis(), 0.7);
    let mut out = Vec::new();
    for (name, u) in oscillation_maps(cfg.grid_n)? {
        out.push(Check::at_most(format!("{name}/gap_term_by_term"), gap_term_excess(&u, delta, p, &quad)?, 0.0));
        let energy = gagliardo_energy(&u, p, &quad)?;
        let vacuous = truncated_energy(&u, 0.0, p, &quad)?;
        out.push(Check::at_most(format!("{name}/truncated_at_zero"), (vacuous - energy).abs(), 0.0));
        let rotated = u.mapped(|v| rotation * v)?;
        let moved = [
            (energy - gagliardo_energy(&rotated, p, &quad)?).abs(),
            (gap_potential(&u, delta, &quad)? - gap_potential(&rotated, delta, &quad)?).abs(),
            (truncated_energy(&u, delta, p, &quad)? - truncated_energy(&rotated, delta, p, &quad)?).abs(),
        ];
        let isometry = moved.into_iter().fold(0.0, f64::max);
        out.push(Check::at_most(format!("{name}/isometry_invariance"), isometry, ARITHMETIC_SLACK));
        let reflected = (energy - gagliardo_energy(&u.reflected(), p, &quad)?).abs();
        out.push(Check::at_most(format!("{name}/reflection_symmetry"), reflected, ARITHMETIC_SLACK));
    }
    Ok(out)
}

/// Worst excesses of the shared-stencil inequalities at random points:
/// `(truncation, sharp, monotone)`.
pub fn stencil_excesses(u: &BoundaryMap, stencil: &BallStencil, points: usize, stream: u64, seed: u64) -> Result<[f64; 3]> {
    let p = u.dim() as f64 + 1.0;
    let mut rng = rng_for(seed, stream);
    let mut worst = [f64::NEG_INFINITY; 3];
    for _ in 0..points {
        let x = random_half_space_point(&mut rng, u)?;
        let values = stencil.sample(u, x.x_prime, x.height)?;
        let (d0, d1) = (uniform(&mut rng, 0.0, PI), uniform(&mut rng, 0.0, PI));
        let truncation = pair_average(&values, d1, p).powf(1.0 / p)
            - pair_average(&values, d0, p).powf(1.0 / p)
            - (d0 - d1).max(0.0);
        let delta = PI * (1.0 - rng.random::<f64>());
        let sharp = pair_average(&values, delta, p) - 2f64.powf(p) * sharp_average(&values, delta / 2.0, p);
        let (lo, hi) = if d0 < d1 { (d0, d1) } else { (d1, d0) };
        let monotone = pair_average(&values, hi, p) - pair_average(&values, lo, p);
        for (w, v) in worst.iter_mut().zip([truncation, sharp, monotone]) {
            *w = w.max(v);
        }
    }
    Ok(worst)
}

/// `avg_z MO#(z, h) - 2^{2m} MO(x', 2h)` with the centers `z` on the lattice of the
/// outer stencil, so every inner sample is an outer sample.
pub fn nested_excess(u: &BoundaryMap, x: &HalfSpacePoint, resolution: usize, delta: f64) -> Result<f64> {
    if u.dim() != 1 {
        return Err(Error::InvalidParameter("nested stencils are built for m = 1".into()));
    }
    let p = 2.0;
    let h = x.height;
    let outer = BallStencil::new(1, 2 * resolution)?.sample(u, x.x_prime, 2.0 * h)?;
    let inner = BallStencil::new(1, resolution)?;
    let r = resolution as i64;
    let mut total = 0.0;
    let mut count = 0usize;
    for a in -(r - 1)..r {
        let z = [x.x_prime[0] + h * a as f64 / resolution as f64, 0.0];
        total += sharp_average(&inner.sample(u, z, h)?, delta, p);
        count += 1;
    }
    Ok(total / count as f64 - 4.0 * pair_average(&outer, delta, p))
}

fn mean_oscillation_checks(cfg: &RunConfig, cal: &Calibration) -> Result<Vec<Check>> {
    let stencil = BallStencil::new(cfg.dim, cfg.stencil_resolution)?;
    let mut out = Vec::new();
    for (i, (name, u)) in oscillation_maps(cfg.grid_n)?.into_iter().enumerate() {
        let [truncation, sharp, monotone] = stencil_excesses(&u, &stencil, OSCILLATION_POINTS, 2100 + i as u64, cfg.seed)?;
        out.push(Check::at_most(format!("{name}/truncation_comparison"), truncation, ARITHMETIC_SLACK));
        out.push(Check::at_most(format!("{name}/sharp_comparison"), sharp, ARITHMETIC_SLACK));
        out.push(Check::at_most(format!("{name}/monotone_in_delta"), monotone, 0.0));
        let mut rng = rng_for(cfg.seed, 2200 + i as u64);
        let mut nested = f64::NEG_INFINITY;
        for _ in 0..NESTED_POINTS {
            let x = random_half_space_point(&mut rng, &u)?;
            nested = nested.max(nested_excess(&u, &x, cfg.stencil_resolution, cal.delta_cal)?);
        }
        out.push(Check::at_most(format!("{name}/nested_average_comparison"), nested, 1e-6));
    }
    Ok(out)
}

/// Largest `|H_ij - H_ji|` of the finite-difference Hessian of `V`, relative to
/// `max(1, max |H|)`.
pub fn hessian_asymmetry(u: &BoundaryMap, ext: &ConvolutionExtension, points: usize, stream: u64, seed: u64) -> Result<f64> {
    let m = u.dim();
    let mut rng = rng_for(seed, stream);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = random_half_space_point(&mut rng, u)?;
        let c = x.coords(m);
        let step = 1e-4 * x.height;
        // rows: derivative direction i, then gradient row j, then component
        let mut hess = vec![[[0.0; 3]; 3]; m + 1];
        for (i, row) in hess.iter_mut().enumerate() {
            let mut plus = c;
            let mut minus = c;
            plus[i] += step;
            minus[i] -= step;
            let gp = ext.gradient(u, &HalfSpacePoint::from_coords(&plus, m))?.matrix;
            let gm = ext.gradient(u, &HalfSpacePoint::from_coords(&minus, m))?.matrix;
            for j in 0..=m {
                for k in 0..3 {
                    row[j][k] = (gp[(j, k)] - gm[(j, k)]) / (2.0 * step);
                }
            }
        }
        let scale = hess.iter().flatten().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..=m {
            for j in 0..i {
                for k in 0..3 {
                    worst = worst.max((hess[i][j][k] - hess[j][i][k]).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

fn convolution_checks(cfg: &RunConfig, cal: &Calibration, cases: &[SuiteCase]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        let (dist, grad) = pointwise_constants(&c.map, cfg, cal.delta_cal, pointwise_stream(i))?;
        out.push(Check::at_most(format!("{}/distance_bound", c.name), dist, cal.c_dist));
        out.push(Check::at_most(format!("{}/gradient_bound", c.name), grad, cal.c_grad));
    }
    let ext = ConvolutionExtension::new(cfg.dim, &cfg.skeleton().stencil.with_resolution(HESSIAN_STENCIL))?;
    let u = degree_map(1, cfg.grid_n)?;
    out.push(Check::at_most("degree1/hessian_symmetry", hessian_asymmetry(&u, &ext, HESSIAN_POINTS, 2300, cfg.seed)?, 1e-3));
    Ok(out)
}

fn point_key(p: &[f64; 3], scale: f64) -> [i64; 3] {
    p.map(|v| (v / scale).round() as i64)
}

fn lambda_cube_checks(seed: u64) -> Result<Vec<Check>> {
    let families = [
        CubeFamilyParams::new(1, 3.0, 1.7, Translations::Broadcast([0.3, 0.0]), -2, 4)?,
        CubeFamilyParams::new(2, 2.0, 1.3, Translations::Broadcast([0.2, 0.6]), 0, 3)?,
    ];
    let window = ([-2.0, -2.0], [2.0, 2.0]);
    let mut out = Vec::new();
    for (f, params) in families.iter().enumerate() {
        let m = params.dim();
        let lambda = params.lambda();
        let (k_min, k_max) = params.k_range();
        let mut rng = rng_for(seed, 2400 + f as u64);
        let (lo, hi) = (params.band_bottom(k_max).ln(), params.band_top(k_min).ln());
        let mut misses = 0usize;
        for _ in 0..RANDOM_POINTS {
            let mut c = [0.0; 3];
            for a in 0..m {
                c[a] = uniform(&mut rng, -2.0, 2.0);
            }
            c[m] = uniform(&mut rng, lo, hi).exp();
            let point = HalfSpacePoint::from_coords(&c, m);
            let located = params.locate(&point).and_then(|id| params.cube_geometry(id));
            if !matches!(located, Ok(g) if g.contains(&c, ARITHMETIC_SLACK * g.edge())) {
                misses += 1;
            }
        }
        out.push(Check::at_most(format!("m{m}/locate_covering"), misses as f64, 0.0));

        let mut overlap = 0.0f64;
        let mut lift = f64::NEG_INFINITY;
        for k in k_min..=k_max {
            let ids = params.enumerate_scale(k, window);
            let boxes = ids.iter().map(|id| params.cube_geometry(*id)).collect::<Result<Vec<_>>>()?;
            for g in &boxes {
                let edge = g.edge();
                lift = lift.max((edge / (lambda - 1.0) - g.lo[m]) / edge);
            }
            for _ in 0..200 {
                let a = rng.random_range(0..boxes.len());
                let b = rng.random_range(0..boxes.len());
                if a == b {
                    continue;
                }
                let shared: f64 = (0..=m)
                    .map(|i| (boxes[a].hi[i].min(boxes[b].hi[i]) - boxes[a].lo[i].max(boxes[b].lo[i])).max(0.0))
                    .product();
                overlap = overlap.max(shared / boxes[a].edge().powi(m as i32 + 1));
            }
        }
        out.push(Check::at_most(format!("m{m}/same_scale_disjoint"), overlap, ARITHMETIC_SLACK));
        out.push(Check::at_most(format!("m{m}/height_edge_law"), lift, ARITHMETIC_SLACK));

        let mut mismatched = 0usize;
        for k in [k_min, k_max] {
            for id in params.enumerate_scale(k, window).into_iter().take(4) {
                let scale = params.edge(k) * 1e-9;
                let whole: BTreeSet<[i64; 3]> = params
                    .sample_boundary_with(id, 4)
                    .iter()
                    .map(|s| point_key(&s.point.coords(m), scale))
                    .collect();
                let faces = params.face_grids(id, 4);
                let parts: BTreeSet<[i64; 3]> = faces
                    .parallel
                    .iter()
                    .chain(faces.perpendicular.iter().flatten())
                    .chain(faces.top.iter())
                    .map(|x| point_key(&x.coords(m), scale))
                    .collect();
                mismatched += whole.symmetric_difference(&parts).count();
            }
        }
        out.push(Check::at_most(format!("m{m}/face_decomposition"), mismatched as f64, 0.0));
    }
    Ok(out)
}

fn skeleton_checks(cfg: &RunConfig, cal: &Calibration, cases: &[SuiteCase], runs: &[PipelineRun<'_>]) -> Result<Vec<Check>> {
    let skeleton = cfg.skeleton();
    let ext = ConvolutionExtension::new(cfg.dim, &skeleton.stencil)?;
    let p = cfg.dim as f64 + 1.0;
    let mut out = Vec::new();
    for (c, run) in cases.iter().zip(runs) {
        let sel = &run.selection;
        let threshold = run.classification.mu.powf(1.0 / p);
        let mut ratio = 0.0f64;
        for id in &run.classification.good {
            let s = skeleton.segments(&sel.params, id.k);
            for sample in sel.params.sample_boundary_with(*id, s).iter().filter(|s| s.face == FaceKind::Parallel) {
                let g = ext.gradient(&c.map, &sample.point)?;
                ratio = ratio.max(sample.point.height * g.norm / threshold);
            }
        }
        out.push(Check::at_most(format!("{}/good_cube_samples", c.name), ratio, 1.0 + ARITHMETIC_SLACK));

        let mut flips = 0usize;
        let mu = run.classification.mu;
        for f in [0.5, 1.0, 2.0] {
            let small = classify_with_threshold(sel, mu * f);
            let large = classify_with_threshold(sel, mu * 2.0 * f);
            flips += small.good.iter().filter(|id| large.is_bad(id)).count();
        }
        out.push(Check::at_most(format!("{}/classification_monotone", c.name), flips as f64, 0.0));

        let terms = skeleton_terms(&c.map, cfg, cal, run.energies.gap)?;
        out.push(Check::at_most(format!("{}/longitudinal_bound", c.name), terms.longitudinal, cal.c_long * terms.longitudinal_rhs));
        out.push(Check::at_most(format!("{}/transversal_bound", c.name), terms.transversal, cal.c_trans * terms.transversal_rhs));
        out.push(Check::at_most(format!("{}/counting_bound", c.name), terms.count, cal.c_count * terms.count_rhs));
    }

    let u = degree_map(1, cfg.grid_n)?;
    let spec = McSpec { lambda: 4.0, draws: SHARED_DRAWS, seed: cfg.seed, mode: TranslationMode::PerScale };
    let faces = face_functionals(&u, cal.delta_cal, p, &spec, &skeleton)?;
    let sum = faces.longitudinal.estimate + faces.transversal.estimate;
    let additivity = (faces.combined.estimate - sum).abs() / faces.combined.estimate.max(1.0);
    out.push(Check::at_most("degree1/face_additivity", additivity, ARITHMETIC_SLACK));
    let levels = counting_functional_levels(&u, &[0.05, 0.1, 0.2, 0.4], &spec, &skeleton)?;
    let rise = levels.windows(2).map(|w| w[1].estimate - w[0].estimate).fold(f64::NEG_INFINITY, f64::max);
    out.push(Check::at_most("degree1/counting_monotone", rise, 0.0));
    Ok(out)
}

fn extension_checks(cfg: &RunConfig, cal: &Calibration, cases: &[SuiteCase], runs: &[PipelineRun<'_>]) -> Result<Vec<Check>> {
    let m = cfg.dim;
    let mut out = Vec::new();
    for (c, run) in cases.iter().zip(runs) {
        for report in &run.reports {
            let w = report.weight;
            out.push(Check::at_most(format!("{}/weak_type_{w}", c.name), report.max_t_pow_measure(m), run.bound_rhs));
            let rise = report.measure.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max);
            out.push(Check::at_most(format!("{}/measure_monotone_{w}", c.name), rise, 0.0));
        }
        let e = run.energies;
        let budget = cal.c_singular * (cal.b_hat * e.gap).exp() * e.energy;
        out.push(Check::at_most(format!("{}/singular_budget", c.name), run.singular_set().len() as f64, budget));
        out.push(Check::at_most(format!("{}/extension_energy", c.name), extension_constant(&run.field, cfg.ext_cells)?, cal.c_ext));
        let mut off = 0.0f64;
        for cube in run.field.cubes() {
            for x in cell_centers(&cube.geometry, 4) {
                match run.field.value(&x) {
                    Ok(v) => off = off.max((v.norm() - 1.0).abs()),
                    Err(Error::SingularPoint { .. }) if cube.kind == CubeKind::Bad => {}
                    Err(e) => return Err(e),
                }
            }
        }
        out.push(Check::at_most(format!("{}/values_on_target", c.name), off, ARITHMETIC_SLACK));
    }
    Ok(out)
}

fn conformal_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for dim in [1, 2] {
        let mut rng = rng_for(seed, 2500 + dim as u64);
        let map = ConformalMap::new(dim, Direction::BallToHalfSpace)?;
        let (mut identity, mut lowest, mut round_trip, mut defect) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
        for i in 0..RANDOM_POINTS {
            let v = ball_point(&mut rng, dim + 1);
            let x = [v[0], v[1], v[2]];
            let y = psi(&x, dim)?;
            let mut shifted = v;
            shifted[dim] += 1.0;
            identity = identity.max((y[dim] * shifted.norm_squared() + 2.0 * v.norm_squared() - 2.0).abs());
            lowest = lowest.min(y[dim]);
            let back = psi_inv(&y, dim)?;
            round_trip = round_trip.max((0..=dim).map(|a| (back[a] - x[a]).abs()).fold(0.0, f64::max));
            if i < JACOBIAN_POINTS {
                defect = defect.max(conformality_defect(&map.jacobian(&x)?, dim));
            }
        }
        out.push(Check::at_most(format!("m{dim}/pole_identity"), identity, ARITHMETIC_SLACK));
        out.push(Check::above(format!("m{dim}/ball_into_half_space"), lowest, 0.0));
        out.push(Check::at_most(format!("m{dim}/round_trip"), round_trip, 1e-10));
        out.push(Check::at_most(format!("m{dim}/jacobian_conformal"), defect, 1e-6));
    }
    Ok(out)
}

fn report_bits(run: &PipelineRun<'_>) -> Vec<u64> {
    let mut bits: Vec<u64> = run.reports.iter().flat_map(|r| r.measure.iter().map(|v| v.to_bits())).collect();
    bits.extend(run.singular_set().iter().flatten().map(|v| v.to_bits()));
    bits
}

fn determinism_checks(cfg: &RunConfig, cal: &Calibration, cases: &[SuiteCase]) -> Result<Vec<Check>> {
    let Some(case) = cases.iter().find(|c| c.name == "degree1") else {
        return Ok(Vec::new());
    };
    let first = report_bits(&run_pipeline(&case.map, cfg, cal)?);
    let second = report_bits(&run_pipeline(&case.map, cfg, cal)?);
    let differing = first.iter().zip(&second).filter(|(a, b)| a != b).count() + first.len().abs_diff(second.len());
    Ok(vec![Check::at_most("degree1/rerun_identical", differing as f64, 0.0)])
}
