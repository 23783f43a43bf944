use std::f64::consts::PI;

use proptest::prelude::*;
use singext::boundary_map::BasePoint;
use singext::mean_oscillation::{mo, mo_sharp};
use singext::suite::{bump_map, constant_map, degree_map};
use singext::{Ambient, BoundaryData, FnBoundary, HalfSpacePoint, Oscillation, QuadratureSpec};

fn circle_point(angle: f64) -> Ambient {
    Ambient::new(angle.cos(), angle.sin(), 0.0)
}

/// `a` left of `1/2`, `b` from `1/2` on, over a support much wider than any stencil.
fn two_valued(a: Ambient, b: Ambient) -> FnBoundary<impl Fn(BasePoint) -> Ambient + Sync> {
    FnBoundary::new(1, a, ([-100.0, 0.0], [100.0, 0.0]), move |y| if y[0] < 0.5 { a } else { b })
}

fn stencil(resolution: usize) -> QuadratureSpec {
    QuadratureSpec::default().with_resolution(resolution)
}

/// Ordered-pair average of `(d - delta)_+^p` computed straight from the stencil points.
fn brute_force_mo<B: BoundaryData>(u: &B, x: &HalfSpacePoint, delta: f64, p: f64, resolution: usize) -> f64 {
    let osc = Oscillation::new(1, &stencil(resolution)).unwrap();
    let values: Vec<Ambient> = osc.stencil().points(x.x_prime, x.height).map(|y| u.value(y).unwrap()).collect();
    let n = values.len() as f64;
    let mut total = 0.0;
    for a in &values {
        for b in &values {
            let d = singext::manifold::geodesic(a, b);
            total += (d - delta).max(0.0).powf(p);
        }
    }
    total / (n * n)
}

#[test]
fn half_and_half_split() {
    let c = 1.3;
    let u = two_valued(circle_point(0.0), circle_point(c));
    let x = HalfSpacePoint::new([0.5, 0.0], 1e-3).unwrap();
    let quad = stencil(16);
    let value = mo(&u, &x, 0.0, 2.0, &quad).unwrap();
    let oracle = brute_force_mo(&u, &x, 0.0, 2.0, 16);
    assert!((value - oracle).abs() <= 1e-12, "{value} vs {oracle}");
    assert!((value - c * c / 2.0).abs() <= 1e-12);
    let sharp = mo_sharp(&u, &x, 0.0, 2.0, &quad).unwrap();
    assert!((sharp - c * c / 2.0).abs() <= 1e-12);
    assert!(value <= 4.0 * sharp + 1e-12);
}

#[test]
fn constant_map_does_not_oscillate() {
    let u = constant_map(64).unwrap();
    let x = HalfSpacePoint::new([0.4, 0.0], 0.2).unwrap();
    let quad = stencil(16);
    assert_eq!(mo(&u, &x, 0.0, 2.0, &quad).unwrap(), 0.0);
    assert_eq!(mo_sharp(&u, &x, 0.0, 2.0, &quad).unwrap(), 0.0);
}

#[test]
fn truncation_past_the_diameter_vanishes() {
    let u = degree_map(1, 256).unwrap();
    let x = HalfSpacePoint::new([0.5, 0.0], 0.6).unwrap();
    let quad = stencil(16);
    assert_eq!(mo(&u, &x, PI, 2.0, &quad).unwrap(), 0.0);
    assert_eq!(mo_sharp(&u, &x, PI, 2.0, &quad).unwrap(), 0.0);
}

#[test]
fn bad_parameters_are_rejected() {
    let u = constant_map(16).unwrap();
    let x = HalfSpacePoint::new([0.5, 0.0], 0.1).unwrap();
    assert!(mo(&u, &x, -1.0, 2.0, &stencil(8)).is_err());
    assert!(mo(&u, &x, 0.0, 0.5, &stencil(8)).is_err());
    assert!(HalfSpacePoint::new([0.5, 0.0], 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn truncated_exponent_splits(y in -0.2f64..1.2, t in 0.01f64..0.8, delta in 0.0f64..2.0) {
        let u = degree_map(2, 256).unwrap();
        let x = HalfSpacePoint::new([y, 0.0], t).unwrap();
        let quad = stencil(16);
        let p = 2.0;
        let lhs = mo(&u, &x, 0.0, p, &quad).unwrap().powf(1.0 / p);
        let rhs = mo(&u, &x, delta, p, &quad).unwrap().powf(1.0 / p) + delta;
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn sharp_form_controls_the_pair_form(y in -0.2f64..1.2, t in 0.01f64..0.8, delta in 0.0f64..2.0) {
        let u = bump_map(0.5, 256).unwrap();
        let x = HalfSpacePoint::new([y, 0.0], t).unwrap();
        let quad = stencil(16);
        let p = 2.0;
        let pair = mo(&u, &x, delta, p, &quad).unwrap();
        let sharp = mo_sharp(&u, &x, delta / 2.0, p, &quad).unwrap();
        prop_assert!(pair <= 2f64.powf(p) * sharp + 1e-12);
    }

    #[test]
    fn monotone_in_the_truncation(y in 0.0f64..1.0, t in 0.01f64..0.8, d1 in 0.0f64..2.0, d2 in 0.0f64..2.0) {
        let u = degree_map(1, 256).unwrap();
        let x = HalfSpacePoint::new([y, 0.0], t).unwrap();
        let quad = stencil(16);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(mo(&u, &x, hi, 2.0, &quad).unwrap() <= mo(&u, &x, lo, 2.0, &quad).unwrap());
    }
}
