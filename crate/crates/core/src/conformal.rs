//! The Möbius map between the unit ball and the upper half-space, and quadratures of
//! boundary functionals transported to the unit sphere.
//!
//! With `e` the last unit vector, `psi(x) = 4 (x + e) / |x + e|^2 - 2e` sends the open
//! ball onto the open half-space and the unit sphere minus `-e` onto the boundary
//! hyperplane. It is conformal, so the critical Gagliardo energy and the gap potential
//! are unchanged when a boundary map is pulled back to the sphere.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;

use crate::boundary_map::{BasePoint, BoundaryData};
use crate::error::{Error, Result};
use crate::manifold::{geodesic, Ambient};
use crate::sum::{compensated, CompensatedSum};

/// Pole proximity below which the map is not evaluated.
pub const POLE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    BallToHalfSpace,
    HalfSpaceToBall,
}

/// `psi` or its inverse on `R^{m+1}`, points stored in the first `m + 1` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConformalMap {
    dim: usize,
    direction: Direction,
}

impl ConformalMap {
    pub fn new(dim: usize, direction: Direction) -> Result<Self> {
        if dim == 1 || dim == 2 {
            Ok(Self { dim, direction })
        } else {
            Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")))
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn inverse(&self) -> Self {
        let direction = match self.direction {
            Direction::BallToHalfSpace => Direction::HalfSpaceToBall,
            Direction::HalfSpaceToBall => Direction::BallToHalfSpace,
        };
        Self { dim: self.dim, direction }
    }

    /// `(shift of the pole, shift of the image)`: `x -> 4 (x + a e) / |x + a e|^2 - b e`.
    fn shifts(&self) -> (f64, f64) {
        match self.direction {
            Direction::BallToHalfSpace => (1.0, 2.0),
            Direction::HalfSpaceToBall => (2.0, 1.0),
        }
    }

    fn shifted(&self, x: &[f64; 3]) -> Result<([f64; 3], f64)> {
        let (a, _) = self.shifts();
        let mut v = *x;
        v[self.dim] += a;
        let r2: f64 = v[..=self.dim].iter().map(|c| c * c).sum();
        if r2.sqrt() < POLE_TOLERANCE {
            return Err(Error::Pole { point: *x });
        }
        Ok((v, r2))
    }

    pub fn apply(&self, x: &[f64; 3]) -> Result<[f64; 3]> {
        let (_, b) = self.shifts();
        let (v, r2) = self.shifted(x)?;
        let mut out = [0.0; 3];
        for i in 0..=self.dim {
            out[i] = 4.0 * v[i] / r2;
        }
        out[self.dim] -= b;
        Ok(out)
    }

    /// `4 / |v|^2 (I - 2 v v^T / |v|^2)`, a multiple of a reflection.
    pub fn jacobian(&self, x: &[f64; 3]) -> Result<Matrix3<f64>> {
        let (v, r2) = self.shifted(x)?;
        let mut j = Matrix3::zeros();
        for r in 0..=self.dim {
            for c in 0..=self.dim {
                let identity = if r == c { 1.0 } else { 0.0 };
                j[(r, c)] = 4.0 / r2 * (identity - 2.0 * v[r] * v[c] / r2);
            }
        }
        Ok(j)
    }

    /// The conformal factor `4 / |x + a e|^2`.
    pub fn scale_factor(&self, x: &[f64; 3]) -> Result<f64> {
        Ok(4.0 / self.shifted(x)?.1)
    }
}

/// `psi(x) = 4 (x + e) / |x + e|^2 - 2e`.
pub fn psi(x: &[f64; 3], dim: usize) -> Result<[f64; 3]> {
    ConformalMap::new(dim, Direction::BallToHalfSpace)?.apply(x)
}

/// `psi^{-1}(y) = 4 (y + 2e) / |y + 2e|^2 - e`.
pub fn psi_inv(y: &[f64; 3], dim: usize) -> Result<[f64; 3]> {
    ConformalMap::new(dim, Direction::HalfSpaceToBall)?.apply(y)
}

/// Ratio of the largest to the smallest singular value of the Jacobian minus one.
pub fn conformality_defect(jacobian: &Matrix3<f64>, dim: usize) -> f64 {
    let block = DMatrix::from_fn(dim + 1, dim + 1, |r, c| jacobian[(r, c)]);
    let s = block.singular_values();
    let hi = s.iter().copied().fold(0.0, f64::max);
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo - 1.0
}

/// A boundary map on `R^m` read on the unit sphere through `psi`.
pub struct SpherePullback<'a, B: ?Sized> {
    u: &'a B,
    map: ConformalMap,
}

impl<'a, B: BoundaryData + ?Sized> SpherePullback<'a, B> {
    pub fn new(u: &'a B) -> Result<Self> {
        Ok(Self { u, map: ConformalMap::new(u.dim(), Direction::BallToHalfSpace)? })
    }

    /// `u(psi(sigma))` for `sigma` on the unit sphere.
    pub fn value(&self, sigma: &[f64; 3]) -> Result<Ambient> {
        let y = self.map.apply(sigma)?;
        self.u.value(base_point(&y, self.map.dim))
    }
}

/// A sphere-valued evaluator read on the boundary hyperplane through `psi^{-1}`.
pub struct PlanePushforward<F> {
    g: F,
    map: ConformalMap,
}

impl<F: Fn(&[f64; 3]) -> Result<Ambient>> PlanePushforward<F> {
    pub fn new(dim: usize, g: F) -> Result<Self> {
        Ok(Self { g, map: ConformalMap::new(dim, Direction::HalfSpaceToBall)? })
    }

    pub fn value(&self, y: BasePoint) -> Result<Ambient> {
        let mut x = [y[0], y[1], 0.0];
        x[self.map.dim] = 0.0;
        (self.g)(&self.map.apply(&x)?)
    }
}

fn base_point(y: &[f64; 3], dim: usize) -> BasePoint {
    if dim == 1 {
        [y[0], 0.0]
    } else {
        [y[0], y[1]]
    }
}

/// Equal-weight nodes on the unit sphere `S^m`: uniform angles (offset by half a step so
/// no node sits on the pole) or a Fibonacci lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    dim: usize,
    nodes: Vec<[f64; 3]>,
    weight: f64,
}

impl SphereQuadrature {
    pub fn new(dim: usize, count: usize) -> Result<Self> {
        if count < 8 {
            return Err(Error::Resolution(format!("need at least 8 sphere nodes, got {count}")));
        }
        let nodes: Vec<[f64; 3]> = match dim {
            1 => (0..count)
                .map(|i| {
                    let a = 2.0 * PI * (i as f64 + 0.5) / count as f64;
                    [a.cos(), a.sin(), 0.0]
                })
                .collect(),
            2 => {
                let golden = PI * (3.0 - 5f64.sqrt());
                (0..count)
                    .map(|i| {
                        let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                        let r = (1.0 - z * z).sqrt();
                        let a = golden * i as f64;
                        [r * a.cos(), r * a.sin(), z]
                    })
                    .collect()
            }
            _ => return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}"))),
        };
        let area = if dim == 1 { 2.0 * PI } else { 4.0 * PI };
        Ok(Self { dim, weight: area / count as f64, nodes })
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    fn pair_sum<F>(&self, values: &[Ambient], f: F) -> f64
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let w2 = self.weight * self.weight;
        let n = self.nodes.len();
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut row = CompensatedSum::new();
                for b in a + 1..n {
                    let d = geodesic(&values[a], &values[b]);
                    if d > 0.0 {
                        let r2: f64 = (0..=self.dim).map(|i| (self.nodes[a][i] - self.nodes[b][i]).powi(2)).sum();
                        row.add(f(d) / r2.powi(self.dim as i32));
                    }
                }
                2.0 * w2 * row.value()
            })
            .collect();
        compensated(rows)
    }

    fn sample<B: BoundaryData + ?Sized>(&self, u: &B) -> Result<Vec<Ambient>> {
        if u.dim() != self.dim {
            return Err(Error::InvalidParameter("sphere quadrature and map dimensions differ".into()));
        }
        let pull = SpherePullback::new(u)?;
        self.nodes.par_iter().map(|s| pull.value(s)).collect()
    }

    /// `iint_{S^m x S^m} d(u(psi s), u(psi s'))^p / |s - s'|^{2m}`, diagonal omitted.
    pub fn energy<B: BoundaryData + ?Sized>(&self, u: &B, p: f64) -> Result<f64> {
        let values = self.sample(u)?;
        Ok(self.pair_sum(&values, |d| d.powf(p)))
    }

    /// `iint_{d >= delta} |s - s'|^{-2m}` for the pulled-back map.
    pub fn gap<B: BoundaryData + ?Sized>(&self, u: &B, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("gap threshold must be positive, got {delta}")));
        }
        let values = self.sample(u)?;
        Ok(self.pair_sum(&values, |d| if d >= delta { 1.0 } else { 0.0 }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn origin_goes_to_twice_e() {
        assert_eq!(psi(&[0.0; 3], 1).unwrap(), [0.0, 2.0, 0.0]);
        assert_eq!(psi(&[0.0; 3], 2).unwrap(), [0.0, 0.0, 2.0]);
    }

    #[test]
    fn pole_is_rejected() {
        assert!(matches!(psi(&[0.0, -1.0, 0.0], 1), Err(Error::Pole { .. })));
        assert!(matches!(psi_inv(&[0.0, -2.0, 0.0], 1), Err(Error::Pole { .. })));
    }

    #[test]
    fn boundary_sphere_lands_on_hyperplane() {
        for k in 0..16 {
            let a = 0.3 + k as f64 * 0.37;
            let y = psi(&[a.cos(), a.sin(), 0.0], 1).unwrap();
            assert_abs_diff_eq!(y[1], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_is_conformal() {
        let map = ConformalMap::new(2, Direction::BallToHalfSpace).unwrap();
        let j = map.jacobian(&[0.2, -0.4, 0.1]).unwrap();
        assert!(conformality_defect(&j, 2) < 1e-12);
    }
}
