use std::f64::consts::PI;

use singext::boundary_map::BasePoint;
use singext::mean_oscillation::pair_average;
use singext::skeleton_selection::{
    classify_with_threshold, counting_functional, face_functionals, skeleton_sup_mo,
};
use singext::suite::{constant_map, degree_map};
use singext::{
    choose_lambda, classify_cubes, gap_potential, select_tau_h, Ambient, BoundaryData, CalibrationConstants,
    CubeFamilyParams, CubeId, Error, FnBoundary, McSpec, Oscillation, QuadratureSpec, RunConfig, TailMode,
    TranslationMode, Translations,
};

/// Selection constants of the shipped calibration.
fn calibrated() -> CalibrationConstants {
    CalibrationConstants { b_lambda: 2.7248053288511386e-2, eta: 0.5, c_mu: 1.5625e-2, selection_budget: 24, lambda_max: 1e6 }
}

fn mc(lambda: f64, draws: usize) -> McSpec {
    McSpec { lambda, draws, seed: 7, mode: TranslationMode::Single }
}

#[test]
fn constant_map_is_accepted_at_once() {
    let u = constant_map(1024).unwrap();
    let cfg = RunConfig::default().skeleton();
    let sel = select_tau_h(&u, 2.0, 0.5, &cfg, &calibrated(), 0).unwrap();
    assert_eq!(sel.tau, 1.0);
    assert_eq!(sel.oscillation_budget, 0.0);
    let classes = classify_cubes(&sel, &calibrated(), 0.5);
    assert!(classes.bad.is_empty());
    let faces = face_functionals(&u, 0.0, 2.0, &mc(2.0, 4), &cfg).unwrap();
    assert_eq!(faces.combined.estimate, 0.0);
    assert_eq!(counting_functional(&u, 0.01, &mc(2.0, 4), &cfg).unwrap().estimate, 0.0);
}

#[test]
fn thresholds_past_the_bounds_count_nothing() {
    let u = degree_map(1, 1024).unwrap();
    let cfg = RunConfig::default().skeleton();
    let faces = face_functionals(&u, PI, 2.0, &mc(4.0, 2), &cfg).unwrap();
    assert_eq!(faces.combined.estimate, 0.0);
    assert_eq!(counting_functional(&u, 2.0 + 1e-9, &mc(4.0, 2), &cfg).unwrap().estimate, 0.0);
}

#[test]
fn skeleton_sup_over_a_jump_is_the_sample_max() {
    let (a, b) = (Ambient::new(1.0, 0.0, 0.0), Ambient::new(0.0, 1.0, 0.0));
    let u = FnBoundary::new(1, a, ([0.0, 0.0], [1.0, 0.0]), move |y: BasePoint| if y[0] < 0.5 { a } else { b });
    let params = CubeFamilyParams::new(1, 2.0, 1.0, Translations::Broadcast([0.0, 0.0]), 3, 3).unwrap();
    let id = CubeId { k: 3, j: [3, 0] };
    let stencil = QuadratureSpec::default().with_resolution(16);
    let sup = skeleton_sup_mo(&u, &params, id, 0.0, 2.0, 8, &stencil).unwrap();
    let osc = Oscillation::new(1, &stencil).unwrap();
    let brute = params
        .sample_boundary_with(id, 8)
        .iter()
        .map(|s| {
            let values: Vec<Ambient> =
                osc.stencil().points(s.point.x_prime, s.point.height).map(|y| u.value(y).unwrap()).collect();
            pair_average(&values, 0.0, 2.0)
        })
        .fold(0.0, f64::max);
    assert!(sup > 0.0);
    assert_eq!(sup, brute);
}

#[test]
fn thin_tube_makes_selection_fail() {
    let u = degree_map(1, 1024).unwrap();
    let cfg = RunConfig::default().skeleton();
    let err = select_tau_h(&u, 2.0, 1e-3, &cfg, &calibrated(), 0).unwrap_err();
    assert!(matches!(err, Error::SelectionFailure { .. }), "{err}");
}

#[test]
fn degree_one_forces_bad_cubes() {
    let u = degree_map(1, 1024).unwrap();
    let quad = QuadratureSpec::new(512, 0.0, TailMode::AnalyticConstantTail).unwrap();
    let gap = gap_potential(&u, 0.125, &quad).unwrap();
    let lambda = choose_lambda(gap, &calibrated()).unwrap();
    assert!(!lambda.capped);
    let cfg = RunConfig::default().skeleton();
    let sel = select_tau_h(&u, lambda.lambda, 0.5, &cfg, &calibrated(), 0).unwrap();
    assert!(sel.distance_ok);
    assert!(!classify_cubes(&sel, &calibrated(), 0.5).bad.is_empty());
    assert!(classify_with_threshold(&sel, f64::INFINITY).bad.is_empty());
}
