//! Extension by averaging against a compactly supported radial bump.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::boundary_map::{BasePoint, BoundaryData, QuadratureSpec};
use crate::error::{Error, Result};
use crate::manifold::Ambient;
use crate::mean_oscillation::{BallStencil, HalfSpacePoint};
use crate::sum::CompensatedVector;

/// The bump `c_m (1 - |z|^2)^3` on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    dim: usize,
}

impl Mollifier {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 1 || dim == 2 {
            Ok(Self { dim })
        } else {
            Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")))
        }
    }

    /// Normalizing constant: `35/32` on the line, `4/pi` in the plane.
    pub fn constant(&self) -> f64 {
        if self.dim == 1 {
            35.0 / 32.0
        } else {
            4.0 / PI
        }
    }

    pub fn support_radius(&self) -> f64 {
        1.0
    }

    pub fn value(&self, z: BasePoint) -> f64 {
        let s = 1.0 - (z[0] * z[0] + z[1] * z[1]);
        if s <= 0.0 {
            0.0
        } else {
            self.constant() * s * s * s
        }
    }

    pub fn gradient(&self, z: BasePoint) -> BasePoint {
        let s = 1.0 - (z[0] * z[0] + z[1] * z[1]);
        if s <= 0.0 {
            return [0.0, 0.0];
        }
        let g = -6.0 * self.constant() * s * s;
        [g * z[0], g * z[1]]
    }
}

/// Derivatives of the extension as rows: `d/dx'_1, ..., d/dx'_m, d/dx_{m+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub matrix: Matrix3<f64>,
    pub norm: f64,
}

impl Gradient {
    pub fn from_rows(matrix: Matrix3<f64>) -> Self {
        Self { norm: spectral_norm(&matrix), matrix }
    }
}

/// Largest singular value of a 3x3 matrix.
pub fn spectral_norm(a: &Matrix3<f64>) -> f64 {
    let gram = a * a.transpose();
    let top = gram.symmetric_eigenvalues().max().max(0.0);
    top.sqrt()
}

/// Precomputed stencil weights for the extension and its kernel-differentiated gradient.
#[derive(Debug, Clone)]
pub struct ConvolutionExtension {
    dim: usize,
    stencil: BallStencil,
    weights: Vec<f64>,
    lateral: [Vec<f64>; 2],
    vertical: Vec<f64>,
}

fn zero_mean(mut kernel: Vec<f64>, weights: &[f64]) -> Vec<f64> {
    let total: f64 = kernel.iter().sum();
    for (k, w) in kernel.iter_mut().zip(weights) {
        *k -= total * w;
    }
    kernel
}

impl ConvolutionExtension {
    pub fn new(dim: usize, quad: &QuadratureSpec) -> Result<Self> {
        let phi = Mollifier::new(dim)?;
        let stencil = BallStencil::new(dim, quad.pair_resolution)?;
        let vol = stencil.cell_volume();
        let raw: Vec<f64> = stencil.offsets().iter().map(|z| phi.value(*z)).collect();
        let mass: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / mass).collect();
        let grads: Vec<BasePoint> = stencil.offsets().iter().map(|z| phi.gradient(*z)).collect();
        let lateral = [0, 1].map(|i| {
            let k = grads.iter().map(|g| g[i] * vol).collect();
            zero_mean(k, &weights)
        });
        let vertical = stencil
            .offsets()
            .iter()
            .zip(&grads)
            .map(|(z, g)| -(dim as f64 * phi.value(*z) + z[0] * g[0] + z[1] * g[1]) * vol)
            .collect();
        let vertical = zero_mean(vertical, &weights);
        Ok(Self { dim, stencil, weights, lateral, vertical })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn sample<B: BoundaryData + ?Sized>(&self, u: &B, x: &HalfSpacePoint) -> Result<Vec<Ambient>> {
        let t = x.height;
        self.stencil
            .offsets()
            .iter()
            .map(|z| u.value([x.x_prime[0] - t * z[0], x.x_prime[1] - t * z[1]]))
            .collect()
    }

    fn blend(values: &[Ambient], kernel: &[f64]) -> Ambient {
        let anchor = values[0];
        let mut acc = CompensatedVector::default();
        for (v, k) in values.iter().zip(kernel) {
            acc.add_scaled(&(v - anchor), *k);
        }
        acc.value()
    }

    /// `V(x) = int u(x' - x_{m+1} z) phi(z) dz`.
    pub fn value<B: BoundaryData + ?Sized>(&self, u: &B, x: &HalfSpacePoint) -> Result<Ambient> {
        let values = self.sample(u, x)?;
        Ok(values[0] + Self::blend(&values, &self.weights))
    }

    pub fn value_and_gradient<B: BoundaryData + ?Sized>(
        &self,
        u: &B,
        x: &HalfSpacePoint,
    ) -> Result<(Ambient, Gradient)> {
        let values = self.sample(u, x)?;
        let v = values[0] + Self::blend(&values, &self.weights);
        let inv_t = 1.0 / x.height;
        let mut m = Matrix3::zeros();
        for i in 0..self.dim {
            let row = Self::blend(&values, &self.lateral[i]) * inv_t;
            m.set_row(i, &row.transpose());
        }
        let row = Self::blend(&values, &self.vertical) * inv_t;
        m.set_row(self.dim, &row.transpose());
        Ok((v, Gradient::from_rows(m)))
    }

    pub fn gradient<B: BoundaryData + ?Sized>(&self, u: &B, x: &HalfSpacePoint) -> Result<Gradient> {
        Ok(self.value_and_gradient(u, x)?.1)
    }
}

pub fn extend_convolution<B: BoundaryData + ?Sized>(
    u: &B,
    x: &HalfSpacePoint,
    quad: &QuadratureSpec,
) -> Result<Ambient> {
    ConvolutionExtension::new(u.dim(), quad)?.value(u, x)
}

pub fn gradient_convolution<B: BoundaryData + ?Sized>(
    u: &B,
    x: &HalfSpacePoint,
    quad: &QuadratureSpec,
) -> Result<Gradient> {
    ConvolutionExtension::new(u.dim(), quad)?.gradient(u, x)
}
