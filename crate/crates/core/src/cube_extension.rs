//! Per-cube extensions of the skeleton trace, the assembled field `U` and its
//! weighted distribution functions.
//!
//! Cubes are handled in local coordinates `xi = (x - center) / edge` in `[-1/2, 1/2]^{m+1}`.
//! The trace on the cube surface is the averaging extension `V` sampled on the surface
//! lattice and interpolated face by face.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::boundary_map::{BoundaryData, QuadratureSpec};
use crate::convolution_extension::{ConvolutionExtension, Gradient};
use crate::error::{Error, Result};
use crate::lambda_cubes::{lattice_coord, CubeBox, CubeFamilyParams, CubeId};
use crate::manifold::{geodesic, loop_winding, Ambient};
use crate::mean_oscillation::HalfSpacePoint;
use crate::skeleton_selection::{CubeClassification, SkeletonConfig, SkeletonSelection};
use crate::sum::{CompensatedSum, CompensatedVector};

/// Cap radius `c0 (1 - r) / r` of the good-cube extension uses this `c0`.
pub const CAP_CONSTANT: f64 = PI / 4.0;

/// Radius of the analytically integrated ball around a bad-cube center, as a fraction
/// of the half edge.
pub const INNER_BALL_FRACTION: f64 = 0.1;

fn sup_norm(x: &[f64; 3], dim: usize) -> f64 {
    x[..=dim].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn euclid(x: &[f64; 3], dim: usize) -> f64 {
    x[..=dim].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Radial map from the cube `[-1/2, 1/2]^{m+1}` onto the ball of radius `1/2`.
pub fn cube_ball_map(xi: &[f64; 3], dim: usize) -> [f64; 3] {
    let two = euclid(xi, dim);
    if two == 0.0 {
        return [0.0; 3];
    }
    let f = sup_norm(xi, dim) / two;
    [xi[0] * f, xi[1] * f, xi[2] * f]
}

/// Inverse of [`cube_ball_map`].
pub fn ball_cube_map(y: &[f64; 3], dim: usize) -> [f64; 3] {
    let inf = sup_norm(y, dim);
    if inf == 0.0 {
        return [0.0; 3];
    }
    let f = euclid(y, dim) / inf;
    [y[0] * f, y[1] * f, y[2] * f]
}

/// Axes spanning face `a`, in increasing order.
fn face_axes(dim: usize, a: usize) -> [usize; 2] {
    let mut axes = [0usize; 2];
    let mut n = 0;
    for b in 0..=dim {
        if b != a {
            axes[n] = b;
            n += 1;
        }
    }
    axes
}

/// Values on the surface lattice of a cube, one grid per face, edges repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTrace {
    dim: usize,
    segments: usize,
    /// Face `2a + side` holds `xi_a = -1/2` (`side = 0`) or `+1/2`; row-major over its axes.
    faces: Vec<Vec<Ambient>>,
}

impl SurfaceTrace {
    pub fn sample<F>(geometry: &CubeBox, segments: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64; 3]) -> Result<Ambient>,
    {
        if segments < 2 {
            return Err(Error::Resolution(format!("need at least 2 segments per edge, got {segments}")));
        }
        let m = geometry.dim;
        let s = segments;
        let mut faces = Vec::with_capacity(2 * (m + 1));
        for a in 0..=m {
            let axes = face_axes(m, a);
            for side in 0..2 {
                let mut c = [0.0; 3];
                c[a] = if side == 0 { geometry.lo[a] } else { geometry.hi[a] };
                let rows = if m == 1 { 1 } else { s + 1 };
                let mut values = Vec::with_capacity((s + 1) * rows);
                for j in 0..rows {
                    if m == 2 {
                        c[axes[1]] = lattice_coord(geometry.lo[axes[1]], geometry.hi[axes[1]], j, s);
                    }
                    for i in 0..=s {
                        c[axes[0]] = lattice_coord(geometry.lo[axes[0]], geometry.hi[axes[0]], i, s);
                        values.push(f(&c)?);
                    }
                }
                faces.push(values);
            }
        }
        Ok(Self { dim: m, segments, faces })
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    fn node(&self, face: usize, i: usize, j: usize) -> &Ambient {
        &self.faces[face][i + j * (self.segments + 1)]
    }

    /// Interpolated value on a face and its derivatives in the face's `xi` coordinates.
    fn face_value(&self, face: usize, p: [f64; 2]) -> (Ambient, [Ambient; 2]) {
        let s = self.segments;
        let sf = s as f64;
        let cell = |v: f64| {
            let q = ((v + 0.5) * sf).clamp(0.0, sf);
            let i = (q.floor() as usize).min(s - 1);
            (i, q - i as f64)
        };
        let (i, fi) = cell(p[0]);
        if self.dim == 1 {
            let a = self.node(face, i, 0);
            let b = self.node(face, i + 1, 0);
            return (a * (1.0 - fi) + b * fi, [(b - a) * sf, Ambient::zeros()]);
        }
        let (j, fj) = cell(p[1]);
        let v00 = self.node(face, i, j);
        let v10 = self.node(face, i + 1, j);
        let v01 = self.node(face, i, j + 1);
        let v11 = self.node(face, i + 1, j + 1);
        let v = v00 * ((1.0 - fi) * (1.0 - fj)) + v10 * (fi * (1.0 - fj)) + v01 * ((1.0 - fi) * fj) + v11 * (fi * fj);
        let di = ((v10 - v00) * (1.0 - fj) + (v11 - v01) * fj) * sf;
        let dj = ((v01 - v00) * (1.0 - fi) + (v11 - v10) * fi) * sf;
        (v, [di, dj])
    }

    /// Face owning the radial projection of `xi`: the first axis of maximal `|xi_a|`.
    fn owning_face(&self, xi: &[f64; 3]) -> (usize, usize) {
        let mut a = 0;
        for b in 1..=self.dim {
            if xi[b].abs() > xi[a].abs() {
                a = b;
            }
        }
        (a, usize::from(xi[a] > 0.0))
    }

    /// The trace at the surface point hit by the ray from the center through `xi`.
    pub fn radial_value(&self, xi: &[f64; 3]) -> Ambient {
        let (a, side) = self.owning_face(xi);
        let axes = face_axes(self.dim, a);
        let scale = 0.5 / xi[a].abs();
        let p = [xi[axes[0]] * scale, xi[axes[1]] * scale];
        self.face_value(2 * a + side, p).0
    }

    /// Rows `d/dxi_c` of `xi -> trace(xi / (2 |xi|_inf))`, together with its value.
    fn radial_derivative(&self, xi: &[f64; 3]) -> (Ambient, [Ambient; 3]) {
        let (a, side) = self.owning_face(xi);
        let axes = face_axes(self.dim, a);
        let scale = 0.5 / xi[a].abs();
        let p = [xi[axes[0]] * scale, xi[axes[1]] * scale];
        let (v, dg) = self.face_value(2 * a + side, p);
        let mut rows = [Ambient::zeros(); 3];
        let mut along_a = Ambient::zeros();
        for (n, &b) in axes.iter().take(self.dim).enumerate() {
            rows[b] = dg[n] * scale;
            along_a -= dg[n] * (p[n] / xi[a]);
        }
        rows[a] = along_a;
        (v, rows)
    }

    /// Lattice nodes with their cube coordinates, corners and edges listed once per face.
    fn nodes(&self) -> Vec<([f64; 3], Ambient)> {
        let m = self.dim;
        let s = self.segments;
        let coord = |i: usize| -0.5 + i as f64 / s as f64;
        let mut out = Vec::new();
        for a in 0..=m {
            let axes = face_axes(m, a);
            for side in 0..2 {
                let rows = if m == 1 { 1 } else { s + 1 };
                for j in 0..rows {
                    for i in 0..=s {
                        let mut xi = [0.0; 3];
                        xi[a] = if side == 0 { -0.5 } else { 0.5 };
                        xi[axes[0]] = coord(i);
                        if m == 2 {
                            xi[axes[1]] = coord(j);
                        }
                        out.push((xi, *self.node(2 * a + side, i, j)));
                    }
                }
            }
        }
        out
    }

    /// `int_{dQ} |Dw|^{m+1}` in physical units for a cube of the given edge.
    pub fn surface_energy(&self, edge: f64) -> f64 {
        let s = self.segments;
        let h = edge / s as f64;
        let p = self.dim as i32 + 1;
        let mut total = CompensatedSum::new();
        for face in 0..self.faces.len() {
            if self.dim == 1 {
                for i in 0..s {
                    let d = (self.node(face, i + 1, 0) - self.node(face, i, 0)).norm() / h;
                    total.add(d.powi(p) * h);
                }
            } else {
                for j in 0..s {
                    for i in 0..s {
                        let v00 = self.node(face, i, j);
                        let di = ((self.node(face, i + 1, j) - v00) + (self.node(face, i + 1, j + 1) - self.node(face, i, j + 1))) / (2.0 * h);
                        let dj = ((self.node(face, i, j + 1) - v00) + (self.node(face, i + 1, j + 1) - self.node(face, i + 1, j))) / (2.0 * h);
                        let (a, b, c) = (di.dot(&di), dj.dot(&dj), di.dot(&dj));
                        let top = 0.5 * (a + b) + (0.25 * (a - b) * (a - b) + c * c).sqrt();
                        total.add(top.sqrt().powi(p) * h * h);
                    }
                }
            }
        }
        total.value()
    }
}

/// Angular profile of a planar trace, piecewise linear in the polar angle.
#[derive(Debug, Clone, PartialEq)]
struct CircleProfile {
    theta: Vec<f64>,
    values: Vec<Ambient>,
    /// `prefix[j] = int_{theta_0}^{theta_j}`; the last entry closes the loop.
    prefix: Vec<Ambient>,
}

impl CircleProfile {
    fn new(trace: &SurfaceTrace) -> Self {
        let mut nodes: Vec<(f64, Ambient)> =
            trace.nodes().into_iter().map(|(xi, v)| (xi[1].atan2(xi[0]), v)).collect();
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes.dedup_by(|b, a| (b.0 - a.0).abs() < 1e-14);
        let theta: Vec<f64> = nodes.iter().map(|n| n.0).collect();
        let values: Vec<Ambient> = nodes.iter().map(|n| n.1).collect();
        let n = theta.len();
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = CompensatedVector::default();
        prefix.push(Ambient::zeros());
        for j in 0..n {
            let (t1, v1) = if j + 1 < n { (theta[j + 1], values[j + 1]) } else { (theta[0] + 2.0 * PI, values[0]) };
            acc.add_scaled(&(values[j] + v1), 0.5 * (t1 - theta[j]));
            prefix.push(acc.value());
        }
        Self { theta, values, prefix }
    }

    fn total(&self) -> Ambient {
        self.prefix[self.theta.len()]
    }

    fn segment(&self, j: usize) -> (f64, f64, Ambient, Ambient) {
        let n = self.theta.len();
        if j + 1 < n {
            (self.theta[j], self.theta[j + 1], self.values[j], self.values[j + 1])
        } else {
            (self.theta[j], self.theta[0] + 2.0 * PI, self.values[j], self.values[0])
        }
    }

    fn locate(&self, phi: f64) -> (f64, usize) {
        let base = self.theta[0];
        let turns = ((phi - base) / (2.0 * PI)).floor();
        let local = phi - turns * 2.0 * PI;
        let j = self.theta.partition_point(|t| *t <= local).max(1) - 1;
        (turns, j)
    }

    /// Antiderivative of the profile, extended quasi-periodically.
    fn integral(&self, phi: f64) -> Ambient {
        let (turns, j) = self.locate(phi);
        let local = phi - turns * 2.0 * PI;
        let (t0, t1, v0, v1) = self.segment(j);
        let d = local - t0;
        let slope = (v1 - v0) / (t1 - t0);
        self.total() * turns + self.prefix[j] + v0 * d + slope * (0.5 * d * d)
    }

    fn value(&self, phi: f64) -> Ambient {
        let (turns, j) = self.locate(phi);
        let local = phi - turns * 2.0 * PI;
        let (t0, t1, v0, v1) = self.segment(j);
        let f = (local - t0) / (t1 - t0);
        v0 * (1.0 - f) + v1 * f
    }

    fn cap_average(&self, phi: f64, alpha: f64) -> Ambient {
        if alpha >= PI {
            return self.total() / (2.0 * PI);
        }
        if alpha < 1e-9 {
            return self.value(phi);
        }
        (self.integral(phi + alpha) - self.integral(phi - alpha)) / (2.0 * alpha)
    }
}

/// Weighted nodes of a trace on the two-sphere of directions.
#[derive(Debug, Clone, PartialEq)]
struct SphereProfile {
    directions: Vec<Ambient>,
    weights: Vec<f64>,
    values: Vec<Ambient>,
    mean: Ambient,
    /// Caps narrower than this fall back to the trace itself.
    min_angle: f64,
}

impl SphereProfile {
    fn new(trace: &SurfaceTrace) -> Self {
        let s = trace.segments;
        let h = 1.0 / s as f64;
        let mut directions = Vec::new();
        let mut weights = Vec::new();
        let mut values = Vec::new();
        let on_edge = |v: f64| (v.abs() - 0.5).abs() < 1e-14;
        for (xi, v) in trace.nodes() {
            let r = euclid(&xi, 2);
            // Trapezoid weight on the face times the solid-angle factor |xi_a| / r^3.
            let edges = (0..3).filter(|&b| on_edge(xi[b])).count() - 1;
            let w = h * h * 0.5f64.powi(edges as i32) * 0.5 / (r * r * r);
            directions.push(Ambient::new(xi[0], xi[1], xi[2]) / r);
            weights.push(w);
            values.push(v);
        }
        let mut acc = CompensatedVector::default();
        let mut mass = CompensatedSum::new();
        for (v, w) in values.iter().zip(&weights) {
            acc.add_scaled(v, *w);
            mass.add(*w);
        }
        let mean = acc.value() / mass.value();
        Self { directions, weights, values, mean, min_angle: 2.0 * PI / (4.0 * s as f64) }
    }

    fn cap_average(&self, sigma: &Ambient, alpha: f64) -> Option<Ambient> {
        if alpha >= PI {
            return Some(self.mean);
        }
        if alpha < self.min_angle {
            return None;
        }
        let mut acc = CompensatedVector::default();
        let mut mass = 0.0;
        let mut count = 0;
        for ((d, w), v) in self.directions.iter().zip(&self.weights).zip(&self.values) {
            let psi = geodesic(sigma, d);
            if psi < alpha {
                let q = 1.0 - (psi / alpha).powi(2);
                acc.add_scaled(v, w * q * q);
                mass += w * q * q;
                count += 1;
            }
        }
        (count >= 4 && mass > 0.0).then(|| acc.value() / mass)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CapProfile {
    Circle(CircleProfile),
    Sphere(SphereProfile),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CubeKind {
    Good,
    Bad,
}

impl fmt::Display for CubeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Good => "good",
            Self::Bad => "bad",
        })
    }
}

/// The extension of the skeleton trace inside one cube.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeExtension {
    pub id: CubeId,
    pub kind: CubeKind,
    pub geometry: CubeBox,
    pub center: [f64; 3],
    trace: SurfaceTrace,
    profile: Option<CapProfile>,
}

/// `DU = (I - w w^T / |w|^2) DW / |w|` for the rows of `DW`.
pub fn retracted_gradient(w: &Ambient, dw: &Matrix3<f64>, dim: usize) -> Result<Gradient> {
    let norm = w.norm();
    if norm == 0.0 {
        return Err(Error::UndefinedRetraction);
    }
    let unit = w / norm;
    let mut rows = Matrix3::zeros();
    for a in 0..=dim {
        let r = dw.row(a).transpose();
        let tangential = (r - unit * unit.dot(&r)) / norm;
        rows.set_row(a, &tangential.transpose());
    }
    Ok(Gradient::from_rows(rows))
}

/// Cap-averaged extension of a surface trace.
pub fn extend_good(id: CubeId, geometry: CubeBox, trace: SurfaceTrace) -> Result<CubeExtension> {
    if trace.segments < 2 {
        return Err(Error::Resolution(format!("need at least 2 segments per edge, got {}", trace.segments)));
    }
    let profile = Some(if geometry.dim == 1 {
        CapProfile::Circle(CircleProfile::new(&trace))
    } else {
        CapProfile::Sphere(SphereProfile::new(&trace))
    });
    Ok(CubeExtension { id, kind: CubeKind::Good, center: geometry.center(), geometry, trace, profile })
}

/// Homogeneous extension `W(xi) = trace(xi / (2 |xi|_inf))`.
pub fn extend_bad(id: CubeId, geometry: CubeBox, trace: SurfaceTrace) -> CubeExtension {
    CubeExtension { id, kind: CubeKind::Bad, center: geometry.center(), geometry, trace, profile: None }
}

impl CubeExtension {
    pub fn dim(&self) -> usize {
        self.geometry.dim
    }

    pub fn edge(&self) -> f64 {
        self.geometry.edge()
    }

    pub fn trace(&self) -> &SurfaceTrace {
        &self.trace
    }

    pub fn local(&self, x: &[f64; 3]) -> [f64; 3] {
        let e = self.edge();
        let mut xi = [0.0; 3];
        for a in 0..=self.dim() {
            xi[a] = ((x[a] - self.center[a]) / e).clamp(-0.5, 0.5);
        }
        xi
    }

    /// Un-retracted value `W(x)`.
    pub fn w(&self, x: &[f64; 3]) -> Result<Ambient> {
        let xi = self.local(x);
        let dim = self.dim();
        let inf = sup_norm(&xi, dim);
        match (&self.kind, &self.profile) {
            (CubeKind::Bad, _) => {
                if inf == 0.0 {
                    return Err(Error::SingularPoint { center: self.center });
                }
                Ok(self.trace.radial_value(&xi))
            }
            (CubeKind::Good, Some(profile)) => {
                let r = 2.0 * inf;
                let alpha = if r == 0.0 { PI } else { (CAP_CONSTANT * (1.0 - r) / r).min(PI) };
                Ok(match profile {
                    CapProfile::Circle(c) => {
                        let phi = if r == 0.0 { 0.0 } else { xi[1].atan2(xi[0]) };
                        c.cap_average(phi, alpha)
                    }
                    CapProfile::Sphere(s) => {
                        let sigma = if r == 0.0 {
                            Ambient::new(0.0, 0.0, 1.0)
                        } else {
                            Ambient::new(xi[0], xi[1], xi[2]) / euclid(&xi, 2)
                        };
                        match s.cap_average(&sigma, alpha) {
                            Some(v) => v,
                            None => self.trace.radial_value(&xi),
                        }
                    }
                })
            }
            (CubeKind::Good, None) => unreachable!("good cubes carry a profile"),
        }
    }

    /// `U = W / |W|`.
    pub fn value(&self, x: &[f64; 3]) -> Result<Ambient> {
        let w = self.w(x)?;
        let n = w.norm();
        if n == 0.0 {
            Err(Error::UndefinedRetraction)
        } else {
            Ok(w / n)
        }
    }

    /// `DW`: analytic on bad cubes, central differences with the given step on good ones.
    pub fn dw(&self, x: &[f64; 3], step: f64) -> Result<(Ambient, Matrix3<f64>)> {
        let dim = self.dim();
        let mut rows = Matrix3::zeros();
        match self.kind {
            CubeKind::Bad => {
                let xi = self.local(x);
                if sup_norm(&xi, dim) == 0.0 {
                    return Err(Error::SingularPoint { center: self.center });
                }
                let (v, d) = self.trace.radial_derivative(&xi);
                let e = self.edge();
                for a in 0..=dim {
                    rows.set_row(a, &(d[a] / e).transpose());
                }
                Ok((v, rows))
            }
            CubeKind::Good => {
                let w = self.w(x)?;
                for a in 0..=dim {
                    let mut plus = *x;
                    let mut minus = *x;
                    plus[a] = (x[a] + step).min(self.geometry.hi[a]);
                    minus[a] = (x[a] - step).max(self.geometry.lo[a]);
                    let d = (self.w(&plus)? - self.w(&minus)?) / (plus[a] - minus[a]);
                    rows.set_row(a, &d.transpose());
                }
                Ok((w, rows))
            }
        }
    }

    /// `DU` and `W` at `x`.
    pub fn gradient(&self, x: &[f64; 3], step: f64) -> Result<(Ambient, Gradient)> {
        let (w, dw) = self.dw(x, step)?;
        Ok((w, retracted_gradient(&w, &dw, self.dim())?))
    }

    /// Distance from the target of `W` at `x`, as an error when it leaves the tube.
    pub fn check_tube(&self, w: &Ambient, x: &[f64; 3], tube_radius: f64) -> Result<()> {
        let distance = (1.0 - w.norm()).abs();
        if distance > tube_radius {
            return Err(Error::TubeViolation { id: self.id, point: *x, distance, tube_radius });
        }
        Ok(())
    }

    /// Directions of the surface lattice nodes, sorted by polar angle (planar cubes only).
    fn lattice_directions(&self) -> Vec<f64> {
        let mut angles: Vec<f64> = self.trace.nodes().iter().map(|(xi, _)| xi[1].atan2(xi[0])).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|b, a| (*b - *a).abs() < 1e-14);
        angles
    }

    /// Winding of the interpolated trace around the cube boundary (planar cubes only).
    pub fn boundary_winding(&self) -> Result<i64> {
        if self.dim() != 1 {
            return Err(Error::InvalidParameter("windings are defined for planar cubes".into()));
        }
        let values: Vec<Ambient> = self
            .lattice_directions()
            .iter()
            .map(|a| self.trace.radial_value(&[a.cos(), a.sin(), 0.0]))
            .collect();
        loop_winding(&values)
    }

    /// Winding of `U` on the circle of radius `edge / 4` around the center. The loop
    /// visits every lattice direction, subdivided `refine` times.
    pub fn center_winding(&self, refine: usize) -> Result<i64> {
        if self.dim() != 1 {
            return Err(Error::InvalidParameter("windings are defined for planar cubes".into()));
        }
        let angles = self.lattice_directions();
        let radius = 0.25 * self.edge();
        let refine = refine.max(1);
        let mut values = Vec::with_capacity(angles.len() * refine);
        for (i, a0) in angles.iter().enumerate() {
            let a1 = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + 2.0 * PI };
            for r in 0..refine {
                let a = a0 + (a1 - a0) * r as f64 / refine as f64;
                let x = [self.center[0] + radius * a.cos(), self.center[1] + radius * a.sin(), 0.0];
                values.push(self.value(&x)?);
            }
        }
        loop_winding(&values)
    }

    /// `(int_Q |DW|^{m+1}, rho int_{dQ} |Dw|^{m+1})` with `rho` the half edge.
    pub fn energy_pair(&self, cells: usize) -> Result<(f64, f64)> {
        let dim = self.dim();
        let p = dim as i32 + 1;
        let e = self.edge();
        let h = e / cells as f64;
        let mut interior = CompensatedSum::new();
        for x in cell_centers(&self.geometry, cells) {
            if self.kind == CubeKind::Bad && euclid(&sub(&x, &self.center), dim) < 1e-12 {
                continue;
            }
            let (_, dw) = self.dw(&x, 0.5 * h)?;
            interior.add(crate::convolution_extension::spectral_norm(&dw).powi(p) * h.powi(p));
        }
        Ok((interior.value(), 0.5 * e * self.trace.surface_energy(e)))
    }
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Centers of the `cells^{m+1}` congruent cells of a box.
pub fn cell_centers(geometry: &CubeBox, cells: usize) -> Vec<[f64; 3]> {
    let m = geometry.dim;
    let h: Vec<f64> = (0..=m).map(|a| (geometry.hi[a] - geometry.lo[a]) / cells as f64).collect();
    let total = cells.pow(m as u32 + 1);
    (0..total)
        .map(|mut idx| {
            let mut x = [0.0; 3];
            for a in 0..=m {
                let i = idx % cells;
                idx /= cells;
                x[a] = geometry.lo[a] + (i as f64 + 0.5) * h[a];
            }
            x
        })
        .collect()
}

/// Weight of the superlevel-set measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeasureWeight {
    /// Lebesgue measure and `|DU|`.
    Euclidean,
    /// Hyperbolic volume `x_{m+1}^{-(m+1)} dx` and the hyperbolic norm `x_{m+1} |DU|`.
    Hyperbolic,
    /// Ball volume `(4 / |x + 2e|^2)^{m+1} dx` and the norm `|x + 2e|^2 |DU| / 4`.
    Ball,
}

impl MeasureWeight {
    pub const ALL: [Self; 3] = [Self::Euclidean, Self::Hyperbolic, Self::Ball];

    /// `(scaled gradient norm, volume density)` at `x`.
    #[inline]
    pub fn scale(&self, x: &[f64; 3], dim: usize, du: f64) -> (f64, f64) {
        let p = dim as i32 + 1;
        match self {
            Self::Euclidean => (du, 1.0),
            Self::Hyperbolic => {
                let t = x[dim];
                (t * du, t.powi(-p))
            }
            Self::Ball => {
                let mut r2 = (x[dim] + 2.0) * (x[dim] + 2.0);
                for v in &x[..dim] {
                    r2 += v * v;
                }
                let conformal = 4.0 / r2;
                (du / conformal, conformal.powi(p))
            }
        }
    }
}

impl fmt::Display for MeasureWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Euclidean => "euclidean",
            Self::Hyperbolic => "hyperbolic",
            Self::Ball => "ball",
        })
    }
}

impl FromStr for MeasureWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "hyperbolic" => Ok(Self::Hyperbolic),
            "ball" => Ok(Self::Ball),
            other => Err(Error::InvalidParameter(format!("unknown weight {other:?}"))),
        }
    }
}

/// Sampling of the distribution functions.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub t_grid: Vec<f64>,
    /// Cells per unit length along each cube axis, clamped to `[min_cells, max_cells]`.
    pub cells_per_unit: f64,
    pub min_cells: usize,
    pub max_cells: usize,
    /// Directions used for the analytic inner ball of bad cubes.
    pub inner_directions: usize,
    /// Radial nodes used there for the non-Euclidean weights.
    pub inner_radial: usize,
}

impl DistributionSpec {
    pub fn new(t_grid: Vec<f64>) -> Result<Self> {
        let spec = Self {
            t_grid,
            cells_per_unit: 256.0,
            min_cells: 8,
            max_cells: 256,
            inner_directions: 1024,
            inner_radial: 64,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(Error::InvalidParameter("threshold grid is empty".into()));
        }
        if self.t_grid.iter().any(|t| !(*t > 0.0)) || self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("thresholds must be positive and increasing".into()));
        }
        if self.min_cells == 0 || self.max_cells < self.min_cells {
            return Err(Error::InvalidParameter("need 1 <= min_cells <= max_cells".into()));
        }
        Ok(())
    }

    fn cells(&self, edge: f64) -> usize {
        ((edge * self.cells_per_unit).ceil() as usize).clamp(self.min_cells, self.max_cells)
    }
}

/// Powers of two `1, 2, ..., 2^(count-1)`.
pub fn dyadic_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| 2f64.powi(i as i32)).collect()
}

/// Weighted measures of `{scaled |DU| >= t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub weight: MeasureWeight,
    pub t_grid: Vec<f64>,
    pub measure: Vec<f64>,
}

impl DistributionReport {
    pub fn t_pow_measure(&self, dim: usize) -> Vec<f64> {
        self.t_grid.iter().zip(&self.measure).map(|(t, m)| t.powi(dim as i32 + 1) * m).collect()
    }

    pub fn max_t_pow_measure(&self, dim: usize) -> f64 {
        self.t_pow_measure(dim).into_iter().fold(0.0, f64::max)
    }
}

/// Per-weight, per-threshold accumulators.
struct Tally {
    sums: Vec<CompensatedSum>,
    levels: usize,
}

impl Tally {
    fn new(levels: usize) -> Self {
        Self { sums: vec![CompensatedSum::new(); 3 * levels], levels }
    }

    #[inline]
    fn add(&mut self, x: &[f64; 3], dim: usize, du: f64, volume: f64, t_grid: &[f64]) {
        for (w, weight) in MeasureWeight::ALL.iter().enumerate() {
            let (value, density) = weight.scale(x, dim, du);
            for (i, t) in t_grid.iter().enumerate() {
                if value >= *t {
                    self.sums[w * self.levels + i].add(density * volume);
                } else {
                    break;
                }
            }
        }
    }

    fn values(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s.value()).collect()
    }
}

/// Quadrature directions on the unit sphere of `R^{m+1}` with equal weights.
fn sphere_directions(dim: usize, count: usize) -> Vec<[f64; 3]> {
    if dim == 1 {
        return (0..count)
            .map(|i| {
                let a = 2.0 * PI * (i as f64 + 0.5) / count as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect();
    }
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

fn sphere_area(dim: usize) -> f64 {
    if dim == 1 {
        2.0 * PI
    } else {
        4.0 * PI
    }
}

/// Weighted superlevel measures of one cube, flattened as `weight * levels + level`.
pub fn cube_measures(cube: &CubeExtension, spec: &DistributionSpec, tube_radius: f64) -> Result<Vec<f64>> {
    let dim = cube.dim();
    let e = cube.edge();
    let cells = spec.cells(e);
    let h = e / cells as f64;
    let volume = h.powi(dim as i32 + 1);
    let levels = spec.t_grid.len();
    let mut tally = Tally::new(levels);
    let r0 = INNER_BALL_FRACTION * 0.5 * e;
    for x in cell_centers(&cube.geometry, cells) {
        if cube.kind == CubeKind::Bad && euclid(&sub(&x, &cube.center), dim) < r0 {
            continue;
        }
        let (w, g) = cube.gradient(&x, 0.5 * h)?;
        cube.check_tube(&w, &x, tube_radius)?;
        tally.add(&x, dim, g.norm, volume, &spec.t_grid);
    }
    let mut out = tally.values();
    if cube.kind == CubeKind::Bad {
        let inner = inner_ball_measures(cube, spec, r0)?;
        for (o, v) in out.iter_mut().zip(inner) {
            *o += v;
        }
    }
    Ok(out)
}

/// Exact radial integration of the homogeneous gradient on the ball of radius `r0`.
fn inner_ball_measures(cube: &CubeExtension, spec: &DistributionSpec, r0: f64) -> Result<Vec<f64>> {
    let dim = cube.dim();
    let p = dim as i32 + 1;
    let levels = spec.t_grid.len();
    let mut sums = vec![CompensatedSum::new(); 3 * levels];
    let dirs = sphere_directions(dim, spec.inner_directions);
    let omega = sphere_area(dim) / dirs.len() as f64;
    let probe = 0.5 * r0;
    let dr = r0 / spec.inner_radial as f64;
    for sigma in &dirs {
        let at = |r: f64| [cube.center[0] + r * sigma[0], cube.center[1] + r * sigma[1], cube.center[2] + r * sigma[2]];
        let g = probe * cube.gradient(&at(probe), 0.0)?.1.norm;
        for (i, t) in spec.t_grid.iter().enumerate() {
            let reach = r0.min(g / t);
            sums[i].add(omega * reach.powi(p) / p as f64);
        }
        for k in 0..spec.inner_radial {
            let r = (k as f64 + 0.5) * dr;
            let x = at(r);
            let shell = omega * r.powi(dim as i32) * dr;
            for (w, weight) in MeasureWeight::ALL.iter().enumerate().skip(1) {
                let (value, density) = weight.scale(&x, dim, g / r);
                for (i, t) in spec.t_grid.iter().enumerate() {
                    if value >= *t {
                        sums[w * levels + i].add(density * shell);
                    }
                }
            }
        }
    }
    Ok(sums.iter().map(|s| s.value()).collect())
}

/// The assembled extension over the selected cube band.
pub struct ExtensionField<'a, B: ?Sized> {
    u: &'a B,
    averaging: ConvolutionExtension,
    params: CubeFamilyParams,
    cubes: Vec<CubeExtension>,
    index: HashMap<CubeId, usize>,
    tube_radius: f64,
}

impl<'a, B: BoundaryData + ?Sized> ExtensionField<'a, B> {
    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn params(&self) -> &CubeFamilyParams {
        &self.params
    }

    pub fn cubes(&self) -> &[CubeExtension] {
        &self.cubes
    }

    pub fn cube(&self, id: &CubeId) -> Option<&CubeExtension> {
        self.index.get(id).map(|&i| &self.cubes[i])
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    /// Barycenters of the bad cubes, in cube order.
    pub fn singular_set(&self) -> Vec<[f64; 3]> {
        self.cubes.iter().filter(|c| c.kind == CubeKind::Bad).map(|c| c.center).collect()
    }

    fn owner(&self, x: &[f64; 3]) -> Option<&CubeExtension> {
        let m = self.dim();
        let point = HalfSpacePoint::from_coords(x, m);
        let id = self.params.locate(&point).ok()?;
        self.cube(&id)
    }

    /// `U(x)`; outside the cube band `U` is the retracted averaging extension.
    pub fn value(&self, x: &[f64; 3]) -> Result<Ambient> {
        match self.owner(x) {
            Some(cube) => cube.value(x),
            None => {
                let point = HalfSpacePoint::new([x[0], if self.dim() == 2 { x[1] } else { 0.0 }], x[self.dim()])?;
                let v = self.averaging.value(self.u, &point)?;
                crate::manifold::normalize(&v)
            }
        }
    }

    /// Winding of `U` around each singular point (planar fields only).
    pub fn singular_windings(&self) -> Result<Vec<([f64; 3], i64)>> {
        self.cubes
            .par_iter()
            .filter(|c| c.kind == CubeKind::Bad)
            .map(|c| Ok((c.center, c.center_winding(4)?)))
            .collect()
    }

    /// Weighted superlevel measures of `|DU|`, summed over cubes in id order, plus the
    /// layer below the finest band where `U` is the retracted averaging extension.
    pub fn distribution(&self, spec: &DistributionSpec) -> Result<Vec<DistributionReport>> {
        spec.validate()?;
        let levels = spec.t_grid.len();
        let per_cube: Vec<Vec<f64>> =
            self.cubes.par_iter().map(|c| cube_measures(c, spec, self.tube_radius)).collect::<Result<_>>()?;
        let layer = self.boundary_layer_measures(spec)?;
        let mut sums = vec![CompensatedSum::new(); 3 * levels];
        for row in per_cube.iter().chain(std::iter::once(&layer)) {
            for (s, v) in sums.iter_mut().zip(row) {
                s.add(*v);
            }
        }
        Ok(MeasureWeight::ALL
            .iter()
            .enumerate()
            .map(|(w, weight)| DistributionReport {
                weight: *weight,
                t_grid: spec.t_grid.clone(),
                measure: (0..levels).map(|i| sums[w * levels + i].value()).collect(),
            })
            .collect())
    }

    fn boundary_layer_measures(&self, spec: &DistributionSpec) -> Result<Vec<f64>> {
        let m = self.dim();
        let (_, k_max) = self.params.k_range();
        let top = self.params.band_bottom(k_max);
        let (lo, hi) = self.u.support();
        let mut geometry = CubeBox { dim: m, lo: [0.0; 3], hi: [0.0; 3] };
        for a in 0..m {
            geometry.lo[a] = lo[a] - top;
            geometry.hi[a] = hi[a] + top;
        }
        geometry.hi[m] = top;
        let width = geometry.hi[0] - geometry.lo[0];
        let across = ((width * spec.cells_per_unit).ceil() as usize).clamp(spec.min_cells, if m == 1 { 8192 } else { 512 });
        let vertical = 4;
        let mut h = [0.0; 3];
        for a in 0..m {
            h[a] = (geometry.hi[a] - geometry.lo[a]) / across as f64;
        }
        h[m] = top / vertical as f64;
        let volume: f64 = h[..=m].iter().product();
        let count = across.pow(m as u32) * vertical;
        let rows: Vec<Vec<f64>> = (0..count)
            .into_par_iter()
            .map(|mut idx| {
                let mut x = [0.0; 3];
                for a in 0..m {
                    x[a] = geometry.lo[a] + ((idx % across) as f64 + 0.5) * h[a];
                    idx /= across;
                }
                x[m] = (idx as f64 + 0.5) * h[m];
                let point = HalfSpacePoint::from_coords(&x, m);
                let (v, g) = self.averaging.value_and_gradient(self.u, &point)?;
                let du = retracted_gradient(&v, &g.matrix, m)?.norm;
                let mut tally = Tally::new(spec.t_grid.len());
                tally.add(&x, m, du, volume, &spec.t_grid);
                Ok(tally.values())
            })
            .collect::<Result<_>>()?;
        let mut sums = vec![CompensatedSum::new(); 3 * spec.t_grid.len()];
        for row in &rows {
            for (s, v) in sums.iter_mut().zip(row) {
                s.add(*v);
            }
        }
        Ok(sums.iter().map(|s| s.value()).collect())
    }

    /// `(int_window d(U(y, eps), u(y))^p dy)^{1/p}` by the midpoint rule with `samples`
    /// points per axis.
    pub fn trace_error(&self, eps: f64, p: f64, samples: usize) -> Result<f64> {
        let m = self.dim();
        let (_, k_max) = self.params.k_range();
        let floor = self.params.band_bottom(k_max);
        if eps < floor {
            return Err(Error::OutOfBand { height: eps, nearest_k: k_max });
        }
        let (lo, hi) = self.u.support();
        let count = samples.pow(m as u32);
        let cell: f64 = (0..m).map(|a| (hi[a] - lo[a]) / samples as f64).product();
        let terms: Vec<f64> = (0..count)
            .into_par_iter()
            .map(|idx| {
                let mut y = [0.0; 2];
                let mut rest = idx;
                for a in 0..m {
                    y[a] = lo[a] + ((rest % samples) as f64 + 0.5) * (hi[a] - lo[a]) / samples as f64;
                    rest /= samples;
                }
                let mut x = [y[0], y[1], 0.0];
                x[m] = eps;
                let d = geodesic(&self.value(&x)?, &self.u.value(y)?);
                Ok(d.powf(p))
            })
            .collect::<Result<_>>()?;
        Ok((crate::sum::compensated(terms) * cell).powf(1.0 / p))
    }
}

/// Builds the per-cube extensions of a selection.
///
/// Every trace takes the averaging extension `V` on the cube's surface lattice, so
/// neighboring cubes agree at shared lattice nodes. Good cubes are checked against the
/// tube: on planar cubes a trace of nonzero degree cannot be extended inside the tube,
/// and `W` is sampled on a `check_cells^{m+1}` grid.
pub fn assemble<'a, B: BoundaryData + ?Sized>(
    u: &'a B,
    selection: &SkeletonSelection,
    classification: &CubeClassification,
    cfg: &SkeletonConfig,
    tube_radius: f64,
    check_cells: usize,
) -> Result<ExtensionField<'a, B>> {
    let dim = u.dim();
    let averaging = ConvolutionExtension::new(dim, &cfg.stencil)?;
    let params = selection.params.clone();
    let ids: Vec<CubeId> = selection.per_cube.keys().copied().collect();
    let cubes: Vec<CubeExtension> = ids
        .par_iter()
        .map(|id| {
            let geometry = params.cube_geometry(*id)?;
            let segments = cfg.segments(&params, id.k);
            let trace = SurfaceTrace::sample(&geometry, segments, |c| {
                averaging.value(u, &HalfSpacePoint::from_coords(c, dim))
            })?;
            if classification.is_bad(id) {
                return Ok(extend_bad(*id, geometry, trace));
            }
            let cube = extend_good(*id, geometry, trace)?;
            if dim == 1 && cube.boundary_winding()? != 0 {
                return Err(Error::TubeViolation { id: *id, point: cube.center, distance: 1.0, tube_radius });
            }
            for x in cell_centers(&cube.geometry, check_cells.max(1)) {
                cube.check_tube(&cube.w(&x)?, &x, tube_radius)?;
            }
            Ok(cube)
        })
        .collect::<Result<_>>()?;
    let index = cubes.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    Ok(ExtensionField { u, averaging, params, cubes, index, tube_radius })
}

/// A stencil-only quadrature used when a caller has no skeleton configuration at hand.
pub fn default_stencil() -> QuadratureSpec {
    QuadratureSpec::default().with_resolution(16)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cube_ball_examples() {
        assert_eq!(cube_ball_map(&[0.0; 3], 1), [0.0; 3]);
        let c = cube_ball_map(&[0.5, 0.5, 0.0], 1);
        assert_abs_diff_eq!(euclid(&c, 1), 0.5, epsilon = 1e-15);
        assert_eq!(cube_ball_map(&[0.5, 0.0, 0.0], 1), [0.5, 0.0, 0.0]);
        let x = [0.1, -0.3, 0.2];
        let back = ball_cube_map(&cube_ball_map(&x, 2), 2);
        for a in 0..3 {
            assert_abs_diff_eq!(back[a], x[a], epsilon = 1e-15);
        }
    }

    #[test]
    fn face_axes_skip_the_normal() {
        assert_eq!(face_axes(1, 0)[0], 1);
        assert_eq!(face_axes(1, 1)[0], 0);
        assert_eq!(face_axes(2, 1), [0, 2]);
    }

    #[test]
    fn weights_parse() {
        for w in MeasureWeight::ALL {
            assert_eq!(w.to_string().parse::<MeasureWeight>().unwrap(), w);
        }
    }
}
