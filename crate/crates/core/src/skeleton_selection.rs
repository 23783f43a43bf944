//! Skeleton functionals, the choice of lambda, the `(tau, h_k)` selection and the
//! good/bad split of the selected cubes.
//!
//! All Monte-Carlo quantities integrate against `dh dtau / tau` on `[0,1]^m x [1, lambda]`,
//! so an estimate is `ln(lambda)` times the mean over draws.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::boundary_map::{BasePoint, BoundaryData, QuadratureSpec};
use crate::convolution_extension::ConvolutionExtension;
use crate::error::{Error, Result};
use crate::lambda_cubes::{CubeFamilyParams, CubeId, Translations};
use crate::mean_oscillation::Oscillation;
use crate::sum::compensated;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConstants {
    /// Coefficient in `lambda = exp(b_lambda * gap)`.
    pub b_lambda: f64,
    pub eta: f64,
    /// Coefficient in `mu = (delta_N / (2 c_mu (lambda - 1)))^{m+1}`.
    pub c_mu: f64,
    /// Number of `tau` candidates tried by the selection.
    pub selection_budget: usize,
    pub lambda_max: f64,
}

impl Default for CalibrationConstants {
    fn default() -> Self {
        Self { b_lambda: 1.0, eta: 0.5, c_mu: 1.0, selection_budget: 24, lambda_max: 1e6 }
    }
}

impl CalibrationConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("B_lambda", self.b_lambda)?;
        positive("eta", self.eta)?;
        positive("C_mu", self.c_mu)?;
        if self.eta >= 1.0 {
            return Err(Error::InvalidParameter(format!("eta must be below 1, got {}", self.eta)));
        }
        if self.selection_budget == 0 {
            return Err(Error::InvalidParameter("selection budget must be positive".into()));
        }
        if !(self.lambda_max >= 2.0) {
            return Err(Error::InvalidParameter("lambda_max must be at least 2".into()));
        }
        Ok(())
    }

    /// Good-cube threshold on `sup x_{m+1}^{m+1} |DV|^{m+1}`.
    pub fn mu(&self, dim: usize, lambda: f64, tube_radius: f64) -> f64 {
        (tube_radius / (2.0 * self.c_mu * (lambda - 1.0))).powi(dim as i32 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaChoice {
    pub lambda: f64,
    /// Set when `exp(b_lambda * gap)` exceeded `lambda_max`; such runs are non-conforming.
    pub capped: bool,
}

pub fn choose_lambda(gap: f64, consts: &CalibrationConstants) -> Result<LambdaChoice> {
    if !(gap >= 0.0) {
        return Err(Error::InvalidParameter(format!("gap potential must be nonnegative, got {gap}")));
    }
    let raw = (consts.b_lambda * gap).exp();
    if !(raw <= consts.lambda_max) {
        return Ok(LambdaChoice { lambda: consts.lambda_max, capped: true });
    }
    Ok(LambdaChoice { lambda: raw.max(2.0), capped: false })
}

/// Sampling and truncation settings shared by the skeleton computations.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonConfig {
    /// Stencil for the averaging extension and for the ball oscillation.
    pub stencil: QuadratureSpec,
    /// Skeleton samples per unit length.
    pub density: f64,
    pub min_segments: usize,
    pub max_segments: usize,
    /// Smallest admissible horizontal edge.
    pub finest_edge: f64,
    /// The coarsest scale is the finest one whose band reaches this height.
    pub band_top: f64,
    /// Translations tried per scale during the selection; the first is always zero.
    pub h_candidates: usize,
    /// Fixed `(k_min, k_max)` replacing the automatic scale range.
    pub k_range: Option<(i32, i32)>,
}

impl SkeletonConfig {
    /// Defaults for a boundary grid of `n` samples per axis.
    pub fn for_grid(dim: usize, n: usize) -> Self {
        Self {
            stencil: QuadratureSpec::default().with_resolution(16),
            density: 256.0,
            min_segments: 8,
            max_segments: if dim == 1 { 256 } else { 16 },
            finest_edge: 2.0 / (n.max(2) - 1) as f64,
            band_top: 8.0,
            h_candidates: 8,
            k_range: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) || self.min_segments < 2 || self.max_segments < self.min_segments {
            return Err(Error::InvalidParameter("skeleton sampling needs density > 0 and 2 <= min <= max segments".into()));
        }
        if !(self.finest_edge > 0.0 && self.band_top > self.finest_edge) {
            return Err(Error::InvalidParameter("need 0 < finest_edge < band_top".into()));
        }
        if let Some((lo, hi)) = self.k_range {
            if lo > hi {
                return Err(Error::InvalidParameter(format!("empty scale range [{lo}, {hi}]")));
            }
        }
        if self.h_candidates == 0 {
            return Err(Error::InvalidParameter("need at least one translation candidate".into()));
        }
        Ok(())
    }

    /// Segments per cube edge at scale `k`: a power of two, nested under refinement.
    pub fn segments(&self, params: &CubeFamilyParams, k: i32) -> usize {
        params
            .segments(k, self.density, self.max_segments)
            .max(self.min_segments.next_power_of_two())
            .min(self.max_segments.next_power_of_two())
    }
}

/// Scales `[k_min, k_max]` for `(lambda, tau)`: edges stay above `finest_edge` and the
/// coarsest band reaches `band_top`.
pub fn scale_range(lambda: f64, tau: f64, cfg: &SkeletonConfig) -> (i32, i32) {
    if let Some(range) = cfg.k_range {
        return range;
    }
    let ln = lambda.ln();
    let mut k_max = ((tau / cfg.finest_edge).ln() / ln).floor() as i32;
    while tau * lambda.powi(-k_max) < cfg.finest_edge {
        k_max -= 1;
    }
    while tau * lambda.powi(-(k_max + 1)) >= cfg.finest_edge {
        k_max += 1;
    }
    let top = |k: i32| tau * lambda.powi(-(k - 1)) / (lambda - 1.0);
    let mut k_min = k_max;
    while top(k_min) < cfg.band_top {
        k_min -= 1;
    }
    (k_min, k_max)
}

/// Horizontal window of scale `k` outside of which the averaging extension is constant
/// on every cube of that scale.
pub fn scale_window<B: BoundaryData + ?Sized>(u: &B, params: &CubeFamilyParams, k: i32) -> (BasePoint, BasePoint) {
    let (lo, hi) = u.support();
    let r = params.band_top(k);
    ([lo[0] - r, lo[1] - r], [hi[0] + r, hi[1] + r])
}

pub fn scale_cubes<B: BoundaryData + ?Sized>(u: &B, params: &CubeFamilyParams, k: i32) -> Vec<CubeId> {
    params.enumerate_scale(k, scale_window(u, params, k))
}

/// Independent generator stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_h(rng: &mut ChaCha8Rng, dim: usize) -> BasePoint {
    let mut h = [0.0; 2];
    for slot in h.iter_mut().take(dim) {
        *slot = rng.random::<f64>();
    }
    h
}

/// Sampled skeleton statistics of the averaging extension on one cube.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CubeStats {
    /// `sup_{dQ} x_{m+1}^{m+1} |DV|^{m+1}` over the samples.
    pub sup_gradient: f64,
    /// `sup_{dQ} dist(V, N)` over the samples.
    pub max_distance: f64,
}

pub fn cube_stats<B: BoundaryData + ?Sized>(
    u: &B,
    ext: &ConvolutionExtension,
    params: &CubeFamilyParams,
    id: CubeId,
    segments: usize,
) -> Result<CubeStats> {
    let p = params.dim() as i32 + 1;
    let mut stats = CubeStats::default();
    for s in params.sample_boundary_with(id, segments) {
        let (v, g) = ext.value_and_gradient(u, &s.point)?;
        stats.sup_gradient = stats.sup_gradient.max((s.point.height * g.norm).powi(p));
        stats.max_distance = stats.max_distance.max((1.0 - v.norm()).abs());
    }
    Ok(stats)
}

fn scale_stats<B: BoundaryData + ?Sized>(
    u: &B,
    ext: &ConvolutionExtension,
    params: &CubeFamilyParams,
    k: i32,
    cfg: &SkeletonConfig,
) -> Result<Vec<(CubeId, CubeStats)>> {
    let s = cfg.segments(params, k);
    scale_cubes(u, params, k)
        .into_par_iter()
        .map(|id| Ok((id, cube_stats(u, ext, params, id, s)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSelection {
    pub lambda: f64,
    pub tau: f64,
    pub h_by_scale: BTreeMap<i32, BasePoint>,
    /// Cube family with the selected per-scale translations and scale range.
    pub params: CubeFamilyParams,
    /// Achieved `sum_k sum_Q sup_{dQ} x_{m+1}^{m+1} |DV|^{m+1}`.
    pub oscillation_budget: f64,
    pub distance_ok: bool,
    pub per_cube: BTreeMap<CubeId, CubeStats>,
    pub candidates_tried: usize,
}

/// Searches `tau` over a log grid and random draws and, per scale, `h_k` over
/// `cfg.h_candidates` translations. A scale is admissible when every skeleton sample
/// stays within `tube_radius / 2` of the target; among admissible choices the smallest
/// gradient budget wins, ties going to the earlier candidate.
pub fn select_tau_h<B: BoundaryData + ?Sized>(
    u: &B,
    lambda: f64,
    tube_radius: f64,
    cfg: &SkeletonConfig,
    consts: &CalibrationConstants,
    seed: u64,
) -> Result<SkeletonSelection> {
    cfg.validate()?;
    let dim = u.dim();
    let ext = ConvolutionExtension::new(dim, &cfg.stencil)?;
    let budget = consts.selection_budget;
    let on_grid = budget.div_ceil(2);
    let threshold = tube_radius / 2.0;

    struct Best {
        total: f64,
        tau: f64,
        hs: BTreeMap<i32, BasePoint>,
        stats: BTreeMap<CubeId, CubeStats>,
        range: (i32, i32),
    }
    let mut best: Option<Best> = None;

    'candidates: for c in 0..budget {
        let mut rng = rng_for(seed, c as u64);
        let tau = if c < on_grid {
            lambda.powf(c as f64 / on_grid as f64)
        } else {
            lambda.powf(rng.random::<f64>())
        };
        let (k_min, k_max) = scale_range(lambda, tau, cfg);
        let mut parts = Vec::with_capacity((k_max - k_min + 1) as usize);
        let mut hs = BTreeMap::new();
        let mut stats = BTreeMap::new();
        for k in k_min..=k_max {
            let mut best_k: Option<(f64, BasePoint, Vec<(CubeId, CubeStats)>)> = None;
            for cand in 0..cfg.h_candidates {
                let h = if cand == 0 { [0.0, 0.0] } else { random_h(&mut rng, dim) };
                let params = CubeFamilyParams::new(dim, lambda, tau, Translations::Broadcast(h), k, k)?;
                let st = scale_stats(u, &ext, &params, k, cfg)?;
                if st.iter().any(|(_, s)| s.max_distance > threshold) {
                    continue;
                }
                let cost = compensated(st.iter().map(|(_, s)| s.sup_gradient));
                if best_k.as_ref().is_none_or(|b| cost < b.0) {
                    best_k = Some((cost, h, st));
                }
            }
            let Some((cost, h, st)) = best_k else {
                continue 'candidates;
            };
            parts.push(cost);
            hs.insert(k, h);
            stats.extend(st);
            if let Some(b) = &best {
                if compensated(parts.iter().copied()) >= b.total {
                    continue 'candidates;
                }
            }
        }
        let total = compensated(parts);
        if best.as_ref().is_none_or(|b| total < b.total) {
            best = Some(Best { total, tau, hs, stats, range: (k_min, k_max) });
        }
    }

    let Some(best) = best else {
        return Err(Error::SelectionFailure { budget, lambda, threshold });
    };
    let params = CubeFamilyParams::new(
        dim,
        lambda,
        best.tau,
        Translations::PerScale(best.hs.clone()),
        best.range.0,
        best.range.1,
    )?;
    Ok(SkeletonSelection {
        lambda,
        tau: best.tau,
        h_by_scale: best.hs,
        params,
        oscillation_budget: best.total,
        distance_ok: true,
        per_cube: best.stats,
        candidates_tried: budget,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeClassification {
    pub good: Vec<CubeId>,
    pub bad: Vec<CubeId>,
    pub mu: f64,
    pub per_cube_sup: BTreeMap<CubeId, f64>,
}

impl CubeClassification {
    pub fn is_bad(&self, id: &CubeId) -> bool {
        self.bad.binary_search(id).is_ok()
    }
}

pub fn classify_cubes(
    selection: &SkeletonSelection,
    consts: &CalibrationConstants,
    tube_radius: f64,
) -> CubeClassification {
    let mu = consts.mu(selection.params.dim(), selection.lambda, tube_radius);
    classify_with_threshold(selection, mu)
}

/// Good iff the skeleton gradient sup is at most `mu`; `mu = inf` makes every cube good.
pub fn classify_with_threshold(selection: &SkeletonSelection, mu: f64) -> CubeClassification {
    let mut good = Vec::new();
    let mut bad = Vec::new();
    let mut per_cube_sup = BTreeMap::new();
    for (id, s) in &selection.per_cube {
        per_cube_sup.insert(*id, s.sup_gradient);
        if s.sup_gradient <= mu {
            good.push(*id);
        } else {
            bad.push(*id);
        }
    }
    CubeClassification { good, bad, mu, per_cube_sup }
}

/// How the per-scale translations of a Monte-Carlo draw are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslationMode {
    /// One `h` shared by every scale.
    Single,
    /// Independent `h_k` per scale.
    PerScale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl McEstimate {
    fn from_draws(values: &[f64], lambda: f64) -> Self {
        let n = values.len();
        let scale = lambda.ln();
        let mean = compensated(values.iter().copied()) / n as f64;
        let var = if n > 1 {
            compensated(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        Self { estimate: scale * mean, std_error: scale * (var / n as f64).sqrt(), draws: n }
    }
}

/// Monte-Carlo settings for the averaged skeleton functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSpec {
    pub lambda: f64,
    pub draws: usize,
    pub seed: u64,
    pub mode: TranslationMode,
}

struct Draw {
    params: CubeFamilyParams,
}

fn draw_family(spec: &McSpec, dim: usize, cfg: &SkeletonConfig, index: usize) -> Result<Draw> {
    let mut rng = rng_for(spec.seed, index as u64);
    let tau = spec.lambda.powf(rng.random::<f64>());
    let (k_min, k_max) = scale_range(spec.lambda, tau, cfg);
    let translations = match spec.mode {
        TranslationMode::Single => Translations::Broadcast(random_h(&mut rng, dim)),
        TranslationMode::PerScale => {
            Translations::PerScale((k_min..=k_max).map(|k| (k, random_h(&mut rng, dim))).collect())
        }
    };
    Ok(Draw { params: CubeFamilyParams::new(dim, spec.lambda, tau, translations, k_min, k_max)? })
}

fn check_spec(spec: &McSpec) -> Result<()> {
    if !(spec.lambda >= 2.0) {
        return Err(Error::InvalidParameter(format!("lambda must be at least 2, got {}", spec.lambda)));
    }
    if spec.draws == 0 {
        return Err(Error::InvalidParameter("need at least one Monte-Carlo draw".into()));
    }
    Ok(())
}

/// Runs `per_draw` on every draw in parallel and averages in draw order.
fn monte_carlo<F>(spec: &McSpec, dim: usize, cfg: &SkeletonConfig, per_draw: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&CubeFamilyParams) -> Result<Vec<f64>> + Sync,
{
    check_spec(spec)?;
    cfg.validate()?;
    (0..spec.draws)
        .into_par_iter()
        .map(|i| per_draw(&draw_family(spec, dim, cfg, i)?.params))
        .collect()
}

/// Longitudinal, transversal and combined face sums of the truncated oscillation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceEstimates {
    pub longitudinal: McEstimate,
    pub transversal: McEstimate,
    /// Per-draw sum of the other two.
    pub combined: McEstimate,
}

/// `sup` of the oscillation over the bottom face and over the lateral surface of one cube.
pub fn face_sups<B: BoundaryData + ?Sized>(
    u: &B,
    osc: &Oscillation,
    params: &CubeFamilyParams,
    id: CubeId,
    segments: usize,
    delta: f64,
    p: f64,
) -> Result<(f64, f64)> {
    let faces = params.face_grids(id, segments);
    let mut bottom = 0.0f64;
    for x in &faces.parallel {
        bottom = bottom.max(osc.mo(u, x, delta, p)?);
    }
    let mut lateral = 0.0f64;
    for face in &faces.perpendicular {
        for x in face {
            lateral = lateral.max(osc.mo(u, x, delta, p)?);
        }
    }
    Ok((bottom, lateral))
}

/// `sup_{dQ} MO` over the sampled skeleton of one cube.
pub fn skeleton_sup_mo<B: BoundaryData + ?Sized>(
    u: &B,
    params: &CubeFamilyParams,
    id: CubeId,
    delta: f64,
    p: f64,
    segments: usize,
    stencil: &QuadratureSpec,
) -> Result<f64> {
    let osc = Oscillation::new(u.dim(), stencil)?;
    let mut sup = 0.0f64;
    for s in params.sample_boundary_with(id, segments) {
        sup = sup.max(osc.mo(u, &s.point, delta, p)?);
    }
    Ok(sup)
}

pub fn face_functionals<B: BoundaryData + ?Sized>(
    u: &B,
    delta: f64,
    p: f64,
    spec: &McSpec,
    cfg: &SkeletonConfig,
) -> Result<FaceEstimates> {
    let osc = Oscillation::new(u.dim(), &cfg.stencil)?;
    let rows = monte_carlo(spec, u.dim(), cfg, |params| {
        let (k_min, k_max) = params.k_range();
        let mut bottom = Vec::new();
        let mut lateral = Vec::new();
        for k in k_min..=k_max {
            let s = cfg.segments(params, k);
            for id in scale_cubes(u, params, k) {
                let (b, l) = face_sups(u, &osc, params, id, s, delta, p)?;
                bottom.push(b);
                lateral.push(l);
            }
        }
        let b = compensated(bottom);
        let l = compensated(lateral);
        Ok(vec![b, l, b + l])
    })?;
    let column = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<_>>();
    Ok(FaceEstimates {
        longitudinal: McEstimate::from_draws(&column(0), spec.lambda),
        transversal: McEstimate::from_draws(&column(1), spec.lambda),
        combined: McEstimate::from_draws(&column(2), spec.lambda),
    })
}

/// Averaged sum over bottom faces of the maximal truncated oscillation.
pub fn longitudinal_functional<B: BoundaryData + ?Sized>(
    u: &B,
    delta: f64,
    p: f64,
    spec: &McSpec,
    cfg: &SkeletonConfig,
) -> Result<McEstimate> {
    Ok(face_functionals(u, delta, p, spec, cfg)?.longitudinal)
}

/// Averaged sum over lateral surfaces of the maximal truncated oscillation.
pub fn transversal_functional<B: BoundaryData + ?Sized>(
    u: &B,
    delta: f64,
    p: f64,
    spec: &McSpec,
    cfg: &SkeletonConfig,
) -> Result<McEstimate> {
    Ok(face_functionals(u, delta, p, spec, cfg)?.transversal)
}

/// Averaged number of cubes whose sampled skeleton gets `delta`-far from the target.
pub fn counting_functional<B: BoundaryData + ?Sized>(
    u: &B,
    delta: f64,
    spec: &McSpec,
    cfg: &SkeletonConfig,
) -> Result<McEstimate> {
    counting_functional_levels(u, &[delta], spec, cfg).map(|mut v| v.remove(0))
}

/// [`counting_functional`] for several thresholds on shared draws.
pub fn counting_functional_levels<B: BoundaryData + ?Sized>(
    u: &B,
    deltas: &[f64],
    spec: &McSpec,
    cfg: &SkeletonConfig,
) -> Result<Vec<McEstimate>> {
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter("counting thresholds must be positive".into()));
    }
    let ext = ConvolutionExtension::new(u.dim(), &cfg.stencil)?;
    let rows = monte_carlo(spec, u.dim(), cfg, |params| {
        let (k_min, k_max) = params.k_range();
        let mut counts = vec![0.0; deltas.len()];
        for k in k_min..=k_max {
            let s = cfg.segments(params, k);
            for id in scale_cubes(u, params, k) {
                let st = cube_stats(u, &ext, params, id, s)?;
                for (c, d) in counts.iter_mut().zip(deltas) {
                    if st.max_distance >= *d {
                        *c += 1.0;
                    }
                }
            }
        }
        Ok(counts)
    })?;
    Ok((0..deltas.len())
        .map(|i| McEstimate::from_draws(&rows.iter().map(|r| r[i]).collect::<Vec<_>>(), spec.lambda))
        .collect())
}

/// Averaged `sum_Q sup_{dQ} x_{m+1}^{m+1} |DV|^{m+1}`.
pub fn gradient_functional<B: BoundaryData + ?Sized>(
    u: &B,
    spec: &McSpec,
    cfg: &SkeletonConfig,
) -> Result<McEstimate> {
    let ext = ConvolutionExtension::new(u.dim(), &cfg.stencil)?;
    let rows = monte_carlo(spec, u.dim(), cfg, |params| {
        let (k_min, k_max) = params.k_range();
        let mut sups = Vec::new();
        for k in k_min..=k_max {
            let s = cfg.segments(params, k);
            for id in scale_cubes(u, params, k) {
                sups.push(cube_stats(u, &ext, params, id, s)?.sup_gradient);
            }
        }
        Ok(vec![compensated(sups)])
    })?;
    Ok(McEstimate::from_draws(&rows.iter().map(|r| r[0]).collect::<Vec<_>>(), spec.lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_examples() {
        let consts = CalibrationConstants { b_lambda: 10f64.ln(), ..Default::default() };
        assert_eq!(choose_lambda(0.0, &consts).unwrap().lambda, 2.0);
        let l = choose_lambda(1.0, &consts).unwrap();
        assert!((l.lambda - 10.0).abs() < 1e-12 && !l.capped);
        let capped = choose_lambda(1e9, &consts).unwrap();
        assert!(capped.capped);
        assert_eq!(capped.lambda, consts.lambda_max);
    }

    #[test]
    fn scale_range_brackets_the_band() {
        let cfg = SkeletonConfig::for_grid(1, 257);
        for (lambda, tau) in [(2.0, 1.0), (2.0, 1.7), (50.0, 3.3), (7.5, 7.0)] {
            let (k_min, k_max) = scale_range(lambda, tau, &cfg);
            assert!(k_min <= k_max);
            assert!(tau * lambda.powi(-k_max) >= cfg.finest_edge);
            assert!(tau * lambda.powi(-(k_max + 1)) < cfg.finest_edge);
            assert!(tau * lambda.powi(-(k_min - 1)) / (lambda - 1.0) >= cfg.band_top);
        }
    }

    #[test]
    fn infinite_threshold_makes_every_cube_good() {
        let mut per_cube = BTreeMap::new();
        per_cube.insert(CubeId { k: 0, j: [0, 0] }, CubeStats { sup_gradient: 5.0, max_distance: 0.0 });
        let params = CubeFamilyParams::new(1, 2.0, 1.0, Translations::Broadcast([0.0, 0.0]), 0, 0).unwrap();
        let sel = SkeletonSelection {
            lambda: 2.0,
            tau: 1.0,
            h_by_scale: BTreeMap::new(),
            params,
            oscillation_budget: 5.0,
            distance_ok: true,
            per_cube,
            candidates_tried: 1,
        };
        assert!(classify_with_threshold(&sel, f64::INFINITY).bad.is_empty());
        assert_eq!(classify_with_threshold(&sel, 1.0).bad.len(), 1);
    }
}
