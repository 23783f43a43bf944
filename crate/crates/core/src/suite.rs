//! Reference boundary maps used by the calibration suite, the tests and the benchmarks.

use std::f64::consts::PI;

use crate::boundary_map::{BoundaryMap, Interpolation};
use crate::error::Result;
use crate::manifold::{Ambient, TargetManifold};

fn circle_point(angle: f64) -> Ambient {
    Ambient::new(angle.cos(), angle.sin(), 0.0)
}

/// Smooth reparameterization of `[0, 1]` with vanishing derivative at both ends.
pub fn flat_ends(y: f64) -> f64 {
    y - (2.0 * PI * y).sin() / (2.0 * PI)
}

/// `exp(2 pi i d g(y))` on `[0, 1]`: a circle map of degree `d` equal to `(1, 0)` outside.
pub fn degree_map(degree: i64, n: usize) -> Result<BoundaryMap> {
    BoundaryMap::from_fn(TargetManifold::circle(), 1, n, Interpolation::EmbeddedLinear, |y| {
        circle_point(2.0 * PI * degree as f64 * flat_ends(y[0]))
    })
}

/// A circle map that swings out by `amplitude` radians and back, so its degree is zero.
pub fn bump_map(amplitude: f64, n: usize) -> Result<BoundaryMap> {
    BoundaryMap::from_fn(TargetManifold::circle(), 1, n, Interpolation::EmbeddedLinear, move |y| {
        let s = (PI * y[0]).sin();
        circle_point(amplitude * s * s)
    })
}

pub fn constant_map(n: usize) -> Result<BoundaryMap> {
    BoundaryMap::constant(TargetManifold::circle(), 1, n, circle_point(0.0))
}

/// A sphere-valued map on the unit square: a cap of angular radius `amplitude` around
/// the north pole, tilted along a smooth bump.
pub fn sphere_bump(amplitude: f64, n: usize) -> Result<BoundaryMap> {
    BoundaryMap::from_fn(TargetManifold::sphere(), 2, n, Interpolation::EmbeddedLinear, move |y| {
        let b = (PI * y[0]).sin().powi(2) * (PI * y[1]).sin().powi(2);
        let theta = amplitude * b;
        let phi = 2.0 * PI * y[0];
        Ambient::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    })
}

/// Swing of the suite's bump map, in radians.
pub const DEFAULT_BUMP_AMPLITUDE: f64 = 0.5;

/// The named maps of the default one-dimensional calibration suite.
pub fn default_suite(n: usize) -> Result<Vec<(String, BoundaryMap)>> {
    Ok(vec![
        ("constant".to_string(), constant_map(n)?),
        ("degree1".to_string(), degree_map(1, n)?),
        ("bump".to_string(), bump_map(DEFAULT_BUMP_AMPLITUDE, n)?),
    ])
}
