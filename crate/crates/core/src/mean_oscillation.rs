//! Truncated mean oscillation over boundary balls and its sharp variant.

use crate::boundary_map::{BasePoint, BoundaryData, QuadratureSpec};
use crate::error::{Error, Result};
use crate::manifold::{geodesic, Ambient};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpacePoint {
    pub x_prime: BasePoint,
    pub height: f64,
}

impl HalfSpacePoint {
    pub fn new(x_prime: BasePoint, height: f64) -> Result<Self> {
        if !(height > 0.0) {
            return Err(Error::InvalidParameter(format!("height must be positive, got {height}")));
        }
        Ok(Self { x_prime, height })
    }

    /// Full coordinates in `R^{m+1}` with the height in slot `m`.
    pub fn coords(&self, m: usize) -> [f64; 3] {
        let mut c = [0.0; 3];
        c[..m].copy_from_slice(&self.x_prime[..m]);
        c[m] = self.height;
        c
    }

    pub fn from_coords(c: &[f64; 3], m: usize) -> Self {
        let mut x_prime = [0.0; 2];
        x_prime[..m].copy_from_slice(&c[..m]);
        Self { x_prime, height: c[m] }
    }
}

/// Midpoints of the cells of side `1 / resolution` that lie inside the open unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallStencil {
    dim: usize,
    resolution: usize,
    offsets: Vec<BasePoint>,
}

impl BallStencil {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        if resolution < 2 {
            return Err(Error::InvalidParameter(format!("stencil resolution must be at least 2, got {resolution}")));
        }
        let r = resolution as i64;
        let coord = |k: i64| (k as f64 + 0.5) / resolution as f64;
        let mut offsets = Vec::new();
        if dim == 1 {
            offsets.extend((-r..r).map(|k| [coord(k), 0.0]));
        } else {
            for j in -r..r {
                for i in -r..r {
                    let c = [coord(i), coord(j)];
                    if c[0] * c[0] + c[1] * c[1] < 1.0 {
                        offsets.push(c);
                    }
                }
            }
        }
        Ok(Self { dim, resolution, offsets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn offsets(&self) -> &[BasePoint] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Cell volume in unit-ball coordinates.
    pub fn cell_volume(&self) -> f64 {
        (1.0 / self.resolution as f64).powi(self.dim as i32)
    }

    /// Ball points `center + radius * offset`.
    pub fn points(&self, center: BasePoint, radius: f64) -> impl Iterator<Item = BasePoint> + '_ {
        self.offsets
            .iter()
            .map(move |o| [center[0] + radius * o[0], center[1] + radius * o[1]])
    }

    /// Values of `u` on the ball `B(center, radius)`.
    pub fn sample<B: BoundaryData + ?Sized>(&self, u: &B, center: BasePoint, radius: f64) -> Result<Vec<Ambient>> {
        self.points(center, radius).map(|y| u.value(y)).collect()
    }
}

fn check(delta: f64, p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent must be at least 1, got {p}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("truncation must be nonnegative, got {delta}")));
    }
    Ok(())
}

/// Average of `(d(v_a, v_b) - delta)_+^p` over all ordered pairs of sampled values.
pub fn pair_average(values: &[Ambient], delta: f64, p: f64) -> f64 {
    let n = values.len();
    let mut total = CompensatedSum::new();
    for a in 0..n {
        let mut row = CompensatedSum::new();
        for b in a + 1..n {
            let e = geodesic(&values[a], &values[b]) - delta;
            if e > 0.0 {
                row.add(e.powf(p));
            }
        }
        total.add(row.value());
    }
    2.0 * total.value() / (n * n) as f64
}

/// Minimum over anchors `b` of the average of `(d(v_a, v_b) - delta)_+^p` over `a`.
pub fn sharp_average(values: &[Ambient], delta: f64, p: f64) -> f64 {
    let n = values.len();
    let mut best = f64::INFINITY;
    for b in 0..n {
        let mut row = CompensatedSum::new();
        for a in 0..n {
            let e = geodesic(&values[a], &values[b]) - delta;
            if e > 0.0 {
                row.add(e.powf(p));
            }
        }
        best = best.min(row.value() / n as f64);
    }
    best
}

/// Mean-oscillation evaluator with a fixed ball stencil.
#[derive(Debug, Clone)]
pub struct Oscillation {
    stencil: BallStencil,
}

impl Oscillation {
    pub fn new(dim: usize, quad: &QuadratureSpec) -> Result<Self> {
        Ok(Self { stencil: BallStencil::new(dim, quad.pair_resolution)? })
    }

    pub fn stencil(&self) -> &BallStencil {
        &self.stencil
    }

    pub fn mo<B: BoundaryData + ?Sized>(&self, u: &B, x: &HalfSpacePoint, delta: f64, p: f64) -> Result<f64> {
        check(delta, p)?;
        let values = self.stencil.sample(u, x.x_prime, x.height)?;
        Ok(pair_average(&values, delta, p))
    }

    pub fn mo_sharp<B: BoundaryData + ?Sized>(&self, u: &B, x: &HalfSpacePoint, delta: f64, p: f64) -> Result<f64> {
        check(delta, p)?;
        let values = self.stencil.sample(u, x.x_prime, x.height)?;
        Ok(sharp_average(&values, delta, p))
    }
}

/// Truncated mean oscillation on the ball `B(x', x_{m+1})`.
pub fn mo<B: BoundaryData + ?Sized>(
    u: &B,
    x: &HalfSpacePoint,
    delta: f64,
    p: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Oscillation::new(u.dim(), quad)?.mo(u, x, delta, p)
}

/// Sharp truncated mean oscillation; the infimum runs over stencil points.
pub fn mo_sharp<B: BoundaryData + ?Sized>(
    u: &B,
    x: &HalfSpacePoint,
    delta: f64,
    p: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Oscillation::new(u.dim(), quad)?.mo_sharp(u, x, delta, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_is_symmetric_and_inside() {
        for dim in [1, 2] {
            let s = BallStencil::new(dim, 8).unwrap();
            for o in s.offsets() {
                assert!(o[0] * o[0] + o[1] * o[1] < 1.0);
                let mirrored = [-o[0], -o[1]];
                assert!(s.offsets().iter().any(|q| q == &mirrored));
            }
        }
        assert_eq!(BallStencil::new(1, 8).unwrap().len(), 16);
    }

    #[test]
    fn coordinates_round_trip() {
        let x = HalfSpacePoint::new([0.25, 0.0], 0.5).unwrap();
        assert_eq!(x.coords(1), [0.25, 0.5, 0.0]);
        assert_eq!(HalfSpacePoint::from_coords(&x.coords(1), 1), x);
        assert!(HalfSpacePoint::new([0.0, 0.0], 0.0).is_err());
    }
}
