//! End-to-end runs: energies, selection, assembly and distribution reports, plus the
//! calibration sweep that freezes the measured constants.

use rand::Rng;

use crate::boundary_map::{gap_potential, gagliardo_energy, truncated_energy, winding_number, BoundaryData, BoundaryMap};
use crate::config::{Calibration, RunConfig};
use crate::convolution_extension::ConvolutionExtension;
use crate::cube_extension::{assemble, CubeKind, DistributionReport, ExtensionField};
use crate::error::{Error, Result};
use crate::manifold::TargetKind;
use crate::mean_oscillation::{HalfSpacePoint, Oscillation};
use crate::skeleton_selection::{
    choose_lambda, classify_cubes, counting_functional, face_functionals, rng_for, select_tau_h,
    CalibrationConstants, CubeClassification, LambdaChoice, McSpec, SkeletonSelection, TranslationMode,
};

/// The boundary quantities every command reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySummary {
    /// Critical Gagliardo energy with exponent `m + 1`.
    pub energy: f64,
    /// Gap potential at the calibrated threshold.
    pub gap: f64,
    /// Energy truncated at the calibrated threshold.
    pub truncated: f64,
    pub winding: Option<i64>,
}

pub fn energy_summary(u: &BoundaryMap, cfg: &RunConfig, delta_cal: f64) -> Result<EnergySummary> {
    let quad = cfg.quadrature()?;
    let p = u.dim() as f64 + 1.0;
    let winding = if u.dim() == 1 && u.target().kind() == TargetKind::Circle { Some(winding_number(u)?) } else { None };
    Ok(EnergySummary {
        energy: gagliardo_energy(u, p, &quad)?,
        gap: gap_potential(u, delta_cal, &quad)?,
        truncated: truncated_energy(u, delta_cal, p, &quad)?,
        winding,
    })
}

fn check_map(u: &BoundaryMap, cfg: &RunConfig) -> Result<()> {
    if u.dim() != cfg.dim || u.target().kind() != cfg.target {
        return Err(Error::InvalidParameter(format!(
            "map is {}-dimensional into {} but the configuration expects m = {} and target {}",
            u.dim(),
            u.target().kind(),
            cfg.dim,
            cfg.target
        )));
    }
    Ok(())
}

/// One conforming run of the construction on a boundary map.
pub struct PipelineRun<'a> {
    pub energies: EnergySummary,
    pub lambda: LambdaChoice,
    pub selection: SkeletonSelection,
    pub classification: CubeClassification,
    pub field: ExtensionField<'a, BoundaryMap>,
    pub reports: Vec<DistributionReport>,
    /// `A_hat exp(B_hat gap) energy`.
    pub bound_rhs: f64,
}

impl PipelineRun<'_> {
    pub fn singular_set(&self) -> Vec<[f64; 3]> {
        self.field.singular_set()
    }

    /// Winding of `U` around each singular point, empty unless `m = 1`.
    pub fn windings(&self) -> Result<Vec<([f64; 3], i64)>> {
        if self.field.dim() == 1 {
            self.field.singular_windings()
        } else {
            Ok(Vec::new())
        }
    }

    pub fn trace_errors(&self, cfg: &RunConfig) -> Result<Vec<(f64, f64)>> {
        let p = self.field.dim() as f64 + 1.0;
        cfg.trace_heights
            .iter()
            .map(|&eps| Ok((eps, self.field.trace_error(eps, p, cfg.trace_samples)?)))
            .collect()
    }

    /// Largest `t^{m+1} measure(t)` over the grid and the three weights.
    pub fn max_weak_quantity(&self) -> f64 {
        let m = self.field.dim();
        self.reports.iter().map(|r| r.max_t_pow_measure(m)).fold(0.0, f64::max)
    }
}

pub fn run_pipeline<'a>(u: &'a BoundaryMap, cfg: &RunConfig, cal: &Calibration) -> Result<PipelineRun<'a>> {
    cfg.validate()?;
    check_map(u, cfg)?;
    let energies = energy_summary(u, cfg, cal.delta_cal)?;
    run_with_energies(u, cfg, cal, energies)
}

fn run_with_energies<'a>(
    u: &'a BoundaryMap,
    cfg: &RunConfig,
    cal: &Calibration,
    energies: EnergySummary,
) -> Result<PipelineRun<'a>> {
    let skeleton = cfg.skeleton();
    let tube = cfg.tube_radius;
    let lambda = choose_lambda(energies.gap, &cal.consts)?;
    let selection = select_tau_h(u, lambda.lambda, tube, &skeleton, &cal.consts, cfg.seed)?;
    let classification = classify_cubes(&selection, &cal.consts, tube);
    let field = assemble(u, &selection, &classification, &skeleton, tube, cfg.check_cells)?;
    let reports = field.distribution(&cfg.distribution()?)?;
    let bound_rhs = cal.weak_bound(energies.gap, energies.energy);
    Ok(PipelineRun { energies, lambda, selection, classification, field, reports, bound_rhs })
}

/// A named map of the calibration suite.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub name: String,
    pub map: BoundaryMap,
}

pub const REQUIRED_CASES: [&str; 2] = ["constant", "degree1"];

pub fn check_suite(cases: &[SuiteCase]) -> Result<()> {
    let missing: Vec<&str> =
        REQUIRED_CASES.iter().copied().filter(|r| !cases.iter().any(|c| c.name == *r)).collect();
    if cases.len() < 3 || !missing.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "the suite needs at least 3 maps including {}; got [{}]",
            REQUIRED_CASES.join(" and "),
            cases.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(())
}

/// Largest ratio `lhs / rhs`; pairs with both sides zero are skipped, a positive
/// left side over a zero right side is infinite.
fn max_ratio(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    pairs
        .into_iter()
        .filter(|(l, _)| *l > 0.0)
        .map(|(l, r)| if r > 0.0 { l / r } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

/// Monte-Carlo skeleton functionals of one map with their right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonTerms {
    pub lambda: f64,
    pub longitudinal: f64,
    pub longitudinal_rhs: f64,
    pub transversal: f64,
    pub transversal_rhs: f64,
    pub count: f64,
    pub count_rhs: f64,
}

/// The longitudinal and transversal sums use the calibrated truncation `delta_cal`
/// (the transversal right side is truncated at half of it); the counting functional
/// uses the skeleton threshold `delta_N / 2` against `eta` times it.
pub fn skeleton_terms(u: &BoundaryMap, cfg: &RunConfig, cal: &Calibration, gap: f64) -> Result<SkeletonTerms> {
    let skeleton = cfg.skeleton();
    let quad = cfg.quadrature()?;
    let p = u.dim() as f64 + 1.0;
    let lambda = choose_lambda(gap, &cal.consts)?.lambda;
    let spec = McSpec { lambda, draws: cfg.mc_draws, seed: cfg.seed, mode: TranslationMode::Single };
    let faces = face_functionals(u, cal.delta_cal, p, &spec, &skeleton)?;
    let delta_count = cfg.tube_radius / 2.0;
    let count = counting_functional(u, delta_count, &spec, &skeleton)?;
    Ok(SkeletonTerms {
        lambda,
        longitudinal: faces.longitudinal.estimate,
        longitudinal_rhs: truncated_energy(u, cal.delta_cal, p, &quad)?,
        transversal: faces.transversal.estimate,
        transversal_rhs: truncated_energy(u, cal.delta_cal / 2.0, p, &quad)?,
        count: count.estimate,
        count_rhs: truncated_energy(u, cal.consts.eta * delta_count, p, &quad)? / delta_count.powf(p),
    })
}

/// `(C_long, C_trans, C_count)` over a set of per-map terms.
pub fn skeleton_constants(terms: &[SkeletonTerms]) -> (f64, f64, f64) {
    (
        max_ratio(terms.iter().map(|t| (t.longitudinal, t.longitudinal_rhs))),
        max_ratio(terms.iter().map(|t| (t.transversal, t.transversal_rhs))),
        max_ratio(terms.iter().map(|t| (t.count, t.count_rhs))),
    )
}

/// Largest `dist(V, N)^p / (MO + delta^p)` and `(x_{m+1} |DV|)^p / (MO + delta^p)` over
/// random half-space points above the support.
pub fn pointwise_constants(u: &BoundaryMap, cfg: &RunConfig, delta: f64, stream: u64) -> Result<(f64, f64)> {
    let skeleton = cfg.skeleton();
    let dim = u.dim();
    let p = dim as f64 + 1.0;
    let ext = ConvolutionExtension::new(dim, &skeleton.stencil)?;
    let osc = Oscillation::new(dim, &skeleton.stencil)?;
    let (lo, hi) = u.support();
    let mut rng = rng_for(cfg.seed, stream);
    let points: Vec<HalfSpacePoint> = (0..cfg.oscillation_samples)
        .map(|_| {
            let mut x = [0.0; 2];
            for a in 0..dim {
                x[a] = lo[a] - 0.5 + (hi[a] - lo[a] + 1.0) * rng.random::<f64>();
            }
            let height = 2f64.powf(-8.0 + 10.0 * rng.random::<f64>());
            HalfSpacePoint::new(x, height)
        })
        .collect::<Result<_>>()?;
    let mut c_dist = 0.0f64;
    let mut c_grad = 0.0f64;
    for x in &points {
        let (v, g) = ext.value_and_gradient(u, x)?;
        let denom = osc.mo(u, x, delta, p)? + delta.powf(p);
        c_dist = c_dist.max((1.0 - v.norm()).abs().powf(p) / denom);
        c_grad = c_grad.max((x.height * g.norm).powf(p) / denom);
    }
    Ok((c_dist, c_grad))
}

const CONSTANT_TRACE_ENERGY: f64 = 1e-20;
const ROUNDING_ENERGY: f64 = 1e-12;

/// Largest `int_Q |DW|^{m+1} / (rho int_{dQ} |Dw|^{m+1})` over the good cubes of a run.
pub fn extension_constant<B: BoundaryData + ?Sized>(field: &ExtensionField<'_, B>, cells: usize) -> Result<f64> {
    let mut pairs = Vec::new();
    for cube in field.cubes().iter().filter(|c| c.kind == CubeKind::Good) {
        let (interior, boundary) = cube.energy_pair(cells)?;
        // A constant trace leaves only rounding noise inside the cube.
        if boundary <= CONSTANT_TRACE_ENERGY && interior <= ROUNDING_ENERGY {
            continue;
        }
        pairs.push((interior, boundary));
    }
    Ok(max_ratio(pairs))
}

/// `(A_hat, B_hat)`: a least-squares slope of `ln(ratio)` against the gap, clamped at
/// zero, then the smallest prefactor covering every map.
pub fn fit_weak_bound(points: &[(f64, f64)]) -> (f64, f64) {
    let usable: Vec<(f64, f64)> = points.iter().copied().filter(|(_, r)| *r > 0.0).collect();
    if usable.is_empty() {
        return (0.0, 0.0);
    }
    let n = usable.len() as f64;
    let mean_g = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_l = usable.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mean_g).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mean_g) * (p.1.ln() - mean_l)).sum();
    let b = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let a = usable.iter().map(|(g, r)| r * (-b * g).exp()).fold(0.0, f64::max);
    (a, b)
}

/// First `B_lambda` on the grid `ln 2 / max_gap * 2^{j/4}` for which every map selects.
fn search_b_lambda(cases: &[SuiteCase], gaps: &[f64], cfg: &RunConfig, base: &CalibrationConstants) -> Result<f64> {
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    if max_gap == 0.0 {
        return Ok(1.0);
    }
    let skeleton = cfg.skeleton();
    let mut order: Vec<usize> = (0..cases.len()).filter(|&i| gaps[i] > 0.0).collect();
    order.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]));
    let start = 2f64.ln() / max_gap;
    for j in 0..=64 {
        let b_lambda = start * 2f64.powf(j as f64 / 4.0);
        let consts = CalibrationConstants { b_lambda, ..base.clone() };
        let mut ok = true;
        for &i in &order {
            let lambda = choose_lambda(gaps[i], &consts)?;
            if lambda.capped {
                return Err(Error::InvalidParameter(format!("lambda for {} exceeds lambda_max", cases[i].name)));
            }
            match select_tau_h(&cases[i].map, lambda.lambda, cfg.tube_radius, &skeleton, &consts, cfg.seed) {
                Ok(_) => {}
                Err(Error::SelectionFailure { .. }) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if ok {
            return Ok(b_lambda);
        }
    }
    Err(Error::SelectionFailure { budget: base.selection_budget, lambda: base.lambda_max, threshold: cfg.tube_radius / 2.0 })
}

/// Per-map diagnostics gathered by the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub name: String,
    pub energies: EnergySummary,
    pub lambda: f64,
    pub tau: f64,
    pub bad: usize,
    pub cubes: usize,
    pub max_weak: f64,
}

/// The built-in suite in name order.
pub fn default_cases(n: usize) -> Result<Vec<SuiteCase>> {
    let mut cases: Vec<SuiteCase> =
        crate::suite::default_suite(n)?.into_iter().map(|(name, map)| SuiteCase { name, map }).collect();
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cases)
}

/// Random stream of the pointwise constants of the `index`-th map in name order.
pub fn pointwise_stream(index: usize) -> u64 {
    1000 + index as u64
}

/// Calibrates every constant over the suite, taken in name order. `eta` is fixed at its default, the
/// selection constant `B_lambda` is the first grid value for which every map admits a
/// skeleton, and `C_mu` the first power of two (from `2^-8` upwards) for which every
/// map assembles inside the tube.
pub fn sweep(cases: &[SuiteCase], cfg: &RunConfig, provenance: Vec<String>) -> Result<(Calibration, Vec<SweepRecord>)> {
    cfg.validate()?;
    check_suite(cases)?;
    let mut sorted = cases.to_vec();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let cases = &sorted[..];
    for c in cases {
        check_map(&c.map, cfg)?;
    }
    let base = CalibrationConstants::default();
    let delta_cal = base.eta * cfg.tube_radius / 2.0;
    let energies: Vec<EnergySummary> =
        cases.iter().map(|c| energy_summary(&c.map, cfg, delta_cal)).collect::<Result<_>>()?;
    let gaps: Vec<f64> = energies.iter().map(|e| e.gap).collect();
    let b_lambda = search_b_lambda(cases, &gaps, cfg, &base)?;

    let mut cal = Calibration {
        c_dist: 0.0,
        c_grad: 0.0,
        c_long: 0.0,
        c_trans: 0.0,
        c_count: 0.0,
        c_singular: 0.0,
        c_ext: 0.0,
        a_hat: 0.0,
        b_hat: 0.0,
        delta_cal,
        consts: CalibrationConstants { b_lambda, ..base },
        provenance,
    };

    let mut runs = None;
    for i in 0..=16 {
        cal.consts.c_mu = 2f64.powi(i - 8);
        let attempt: Result<Vec<PipelineRun<'_>>> = cases
            .iter()
            .zip(&energies)
            .map(|(c, e)| run_with_energies(&c.map, cfg, &cal, *e))
            .collect();
        match attempt {
            Ok(r) => {
                runs = Some(r);
                break;
            }
            Err(Error::TubeViolation { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let Some(runs) = runs else {
        return Err(Error::InvalidParameter("no C_mu up to 2^8 keeps every map inside the tube".into()));
    };

    let mut points = Vec::new();
    for (c, run) in cases.iter().zip(&runs) {
        let weak = run.max_weak_quantity();
        if run.energies.energy > 0.0 {
            points.push((run.energies.gap, weak / run.energies.energy));
        } else if weak > 0.0 {
            return Err(Error::InvalidParameter(format!("{} has zero energy but a nonzero distribution", c.name)));
        }
    }
    (cal.a_hat, cal.b_hat) = fit_weak_bound(&points);
    cal.c_singular = max_ratio(
        runs.iter().map(|r| (r.singular_set().len() as f64, (cal.b_hat * r.energies.gap).exp() * r.energies.energy)),
    );
    cal.c_ext = runs
        .iter()
        .map(|r| extension_constant(&r.field, cfg.ext_cells))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let terms: Vec<SkeletonTerms> =
        cases.iter().zip(&gaps).map(|(c, g)| skeleton_terms(&c.map, cfg, &cal, *g)).collect::<Result<_>>()?;
    (cal.c_long, cal.c_trans, cal.c_count) = skeleton_constants(&terms);
    for (i, c) in cases.iter().enumerate() {
        let (d, g) = pointwise_constants(&c.map, cfg, delta_cal, pointwise_stream(i))?;
        cal.c_dist = cal.c_dist.max(d);
        cal.c_grad = cal.c_grad.max(g);
    }

    let records = cases
        .iter()
        .zip(&runs)
        .map(|(c, r)| SweepRecord {
            name: c.name.clone(),
            energies: r.energies,
            lambda: r.lambda.lambda,
            tau: r.selection.tau,
            bad: r.classification.bad.len(),
            cubes: r.selection.per_cube.len(),
            max_weak: r.max_weak_quantity(),
        })
        .collect();
    Ok((cal, records))
}
