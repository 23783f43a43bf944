//! Sampled boundary maps and their global double-integral functionals.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{geodesic, Ambient, TargetKind, TargetManifold};
use crate::sum::{compensated, CompensatedSum};

/// A point of the boundary hyperplane; coordinates past the dimension are zero.
pub type BasePoint = [f64; 2];

/// Anything that can be evaluated as a map from the boundary hyperplane to the target.
pub trait BoundaryData: Sync {
    fn dim(&self) -> usize;

    fn value(&self, y: BasePoint) -> Result<Ambient>;

    /// The constant value taken outside [`BoundaryData::support`].
    fn far_value(&self) -> Ambient;

    /// Closed box outside of which the map is constant.
    fn support(&self) -> (BasePoint, BasePoint) {
        ([0.0, 0.0], [1.0, 1.0])
    }
}

impl<T: BoundaryData + ?Sized> BoundaryData for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, y: BasePoint) -> Result<Ambient> {
        (**self).value(y)
    }
    fn far_value(&self) -> Ambient {
        (**self).far_value()
    }
    fn support(&self) -> (BasePoint, BasePoint) {
        (**self).support()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Multilinear blend of the ambient vectors followed by radial projection.
    EmbeddedLinear,
    /// Constant-speed great-circle arcs between neighbouring samples (one-dimensional maps only).
    Geodesic,
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedded-linear" | "linear" => Ok(Self::EmbeddedLinear),
            "geodesic" => Ok(Self::Geodesic),
            other => Err(Error::InvalidParameter(format!("unknown interpolation {other:?}"))),
        }
    }
}

impl fmt::Display for Interpolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EmbeddedLinear => "embedded-linear",
            Self::Geodesic => "geodesic",
        })
    }
}

/// Samples on the uniform grid `i / (n - 1)` of the unit window, constant outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    target: TargetManifold,
    dim: usize,
    n: usize,
    samples: Vec<Ambient>,
    far_value: Ambient,
    interpolation: Interpolation,
}

/// Tolerance for boundary samples to agree with the far value.
pub const BOUNDARY_MATCH_TOLERANCE: f64 = 1e-9;

impl BoundaryMap {
    /// Samples are row-major with the first coordinate varying fastest.
    pub fn new(
        target: TargetManifold,
        dim: usize,
        n: usize,
        samples: Vec<Ambient>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2 samples, got {n}")));
        }
        if samples.len() != n.pow(dim as u32) {
            return Err(Error::InvalidParameter(format!(
                "expected {} samples, got {}",
                n.pow(dim as u32),
                samples.len()
            )));
        }
        if interpolation == Interpolation::Geodesic && dim != 1 {
            return Err(Error::InvalidParameter(
                "geodesic interpolation is only defined for one-dimensional maps".into(),
            ));
        }
        for s in &samples {
            target.check_point(s)?;
        }
        let far_value = samples[0];
        let map = Self { target, dim, n, samples, far_value, interpolation };
        for idx in map.boundary_indices() {
            let d = geodesic(&map.samples[idx], &far_value);
            if d > BOUNDARY_MATCH_TOLERANCE {
                return Err(Error::InvalidParameter(format!(
                    "boundary sample {idx} differs from the far value by {d}"
                )));
            }
        }
        Ok(map)
    }

    /// Samples `f` on the grid; `f` must be constant on the window boundary.
    pub fn from_fn(
        target: TargetManifold,
        dim: usize,
        n: usize,
        interpolation: Interpolation,
        f: impl Fn(BasePoint) -> Ambient,
    ) -> Result<Self> {
        let step = 1.0 / (n as f64 - 1.0);
        let samples = if dim == 1 {
            (0..n).map(|i| f([i as f64 * step, 0.0])).collect()
        } else {
            (0..n * n).map(|idx| f([(idx % n) as f64 * step, (idx / n) as f64 * step])).collect()
        };
        Self::new(target, dim, n, samples, interpolation)
    }

    pub fn constant(target: TargetManifold, dim: usize, n: usize, value: Ambient) -> Result<Self> {
        Self::new(target, dim, n, vec![value; n.pow(dim as u32)], Interpolation::EmbeddedLinear)
    }

    fn boundary_indices(&self) -> Vec<usize> {
        let n = self.n;
        if self.dim == 1 {
            vec![0, n - 1]
        } else {
            (0..n * n)
                .filter(|idx| {
                    let (i, j) = (idx % n, idx / n);
                    i == 0 || j == 0 || i == n - 1 || j == n - 1
                })
                .collect()
        }
    }

    pub fn target(&self) -> &TargetManifold {
        &self.target
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> &[Ambient] {
        &self.samples
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Result<Self> {
        if interpolation == Interpolation::Geodesic && self.dim != 1 {
            return Err(Error::InvalidParameter(
                "geodesic interpolation is only defined for one-dimensional maps".into(),
            ));
        }
        self.interpolation = interpolation;
        Ok(self)
    }

    /// Applies an ambient linear isometry to every sample.
    pub fn mapped(&self, f: impl Fn(&Ambient) -> Ambient) -> Result<Self> {
        let samples = self.samples.iter().map(f).collect();
        Self::new(self.target, self.dim, self.n, samples, self.interpolation)
    }

    /// The map `y -> u(1 - y)` (first coordinate reflected).
    pub fn reflected(&self) -> Self {
        let n = self.n;
        let samples = (0..self.samples.len())
            .map(|idx| {
                let (i, j) = (idx % n, idx / n);
                self.samples[j * n + (n - 1 - i)]
            })
            .collect();
        Self { samples, ..self.clone() }
    }

    pub fn evaluate(&self, y: BasePoint) -> Result<Ambient> {
        let inside = (0..self.dim).all(|a| (0.0..=1.0).contains(&y[a]));
        if !inside {
            return Ok(self.far_value);
        }
        let scale = (self.n - 1) as f64;
        let locate = |t: f64| {
            let s = t * scale;
            let c = (s.floor() as usize).min(self.n - 2);
            (c, s - c as f64)
        };
        let (i, fx) = locate(y[0]);
        if self.dim == 1 {
            let (a, b) = (&self.samples[i], &self.samples[i + 1]);
            if fx == 0.0 {
                return Ok(*a);
            }
            return match self.interpolation {
                Interpolation::EmbeddedLinear => {
                    let w = a * (1.0 - fx) + b * fx;
                    project(&w, [i, 0])
                }
                Interpolation::Geodesic => slerp(a, b, fx, [i, 0]),
            };
        }
        let (j, fy) = locate(y[1]);
        let n = self.n;
        let s00 = &self.samples[j * n + i];
        if fx == 0.0 && fy == 0.0 {
            return Ok(*s00);
        }
        let s10 = &self.samples[j * n + i + 1];
        let s01 = &self.samples[(j + 1) * n + i];
        let s11 = &self.samples[(j + 1) * n + i + 1];
        let w = s00 * ((1.0 - fx) * (1.0 - fy))
            + s10 * (fx * (1.0 - fy))
            + s01 * ((1.0 - fx) * fy)
            + s11 * (fx * fy);
        project(&w, [i, j])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let nu = self.target.ambient_dim();
        let mut header: Vec<String> = if self.dim == 1 { vec!["i".into()] } else { vec!["i".into(), "j".into()] };
        header.extend((0..nu).map(|c| format!("x{c}")));
        writeln!(out, "{}", header.join(","))?;
        for (idx, s) in self.samples.iter().enumerate() {
            let mut row: Vec<String> = if self.dim == 1 {
                vec![idx.to_string()]
            } else {
                vec![(idx % self.n).to_string(), (idx / self.n).to_string()]
            };
            row.extend(s.iter().take(nu).map(|x| x.to_string()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the CSV layout written by [`BoundaryMap::write_csv`].
    ///
    /// The header decides the dimension (`j` column present or not) and the target
    /// (two or three value columns).
    pub fn read_csv<R: BufRead>(input: R, interpolation: Interpolation, tube_radius: f64) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let io_err = |line: usize, e: std::io::Error| Error::Parse { line, message: e.to_string() };
        let (header_line, header) = loop {
            match lines.next() {
                None => return Err(Error::Parse { line: 1, message: "missing header row".into() }),
                Some((no, text)) => {
                    let text = text.map_err(|e| io_err(no + 1, e))?;
                    let t = text.trim();
                    if t.is_empty() || t.starts_with('#') {
                        continue;
                    }
                    break (no + 1, t.to_string());
                }
            }
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let dim = match cols.as_slice() {
            ["i", "j", rest @ ..] if !rest.is_empty() => 2,
            ["i", rest @ ..] if !rest.is_empty() => 1,
            _ => {
                return Err(Error::Parse {
                    line: header_line,
                    message: format!("header must be `i[,j],x0,...`, got {header:?}"),
                })
            }
        };
        let nu = cols.len() - dim;
        let kind = match nu {
            2 => TargetKind::Circle,
            3 => TargetKind::Sphere,
            _ => {
                return Err(Error::Parse {
                    line: header_line,
                    message: format!("expected 2 or 3 value columns, got {nu}"),
                })
            }
        };
        for (c, name) in cols[dim..].iter().enumerate() {
            if *name != format!("x{c}") {
                return Err(Error::Parse { line: header_line, message: format!("unexpected column {name:?}") });
            }
        }
        let mut rows: Vec<([usize; 2], Ambient, usize)> = Vec::new();
        for (no, text) in lines {
            let line = no + 1;
            let text = text.map_err(|e| io_err(line, e))?;
            let t = text.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, got {}", cols.len(), fields.len()),
                });
            }
            let mut index = [0usize; 2];
            for a in 0..dim {
                index[a] = fields[a]
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("bad index {:?}", fields[a]) })?;
            }
            let mut x = Ambient::zeros();
            for c in 0..nu {
                x[c] = fields[dim + c]
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("bad number {:?}", fields[dim + c]) })?;
            }
            rows.push((index, x, line));
        }
        let count = rows.len();
        let n = if dim == 1 { count } else { (count as f64).sqrt().round() as usize };
        if n < 2 || n.pow(dim as u32) != count {
            return Err(Error::Parse {
                line: header_line,
                message: format!("{count} rows do not form a square grid"),
            });
        }
        let mut samples = vec![None; count];
        for (index, x, line) in rows {
            if index[0] >= n || (dim == 2 && index[1] >= n) {
                return Err(Error::Parse { line, message: format!("index {index:?} outside grid of size {n}") });
            }
            let flat = index[1] * n + index[0];
            if samples[flat].is_some() {
                return Err(Error::Parse { line, message: format!("duplicate index {index:?}") });
            }
            samples[flat] = Some(x);
        }
        let samples = samples.into_iter().map(|s| s.expect("every slot filled")).collect();
        let target = TargetManifold::new(kind, tube_radius)?;
        Self::new(target, dim, n, samples, interpolation)
    }
}

impl BoundaryData for BoundaryMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, y: BasePoint) -> Result<Ambient> {
        self.evaluate(y)
    }
    fn far_value(&self) -> Ambient {
        self.far_value
    }
}

fn project(w: &Ambient, cell: [usize; 2]) -> Result<Ambient> {
    let norm = w.norm();
    if norm < 1e-12 {
        Err(Error::InterpolationDegenerate { cell })
    } else {
        Ok(w / norm)
    }
}

fn slerp(a: &Ambient, b: &Ambient, t: f64, cell: [usize; 2]) -> Result<Ambient> {
    let theta = geodesic(a, b);
    if PI - theta < 1e-12 {
        return Err(Error::InterpolationDegenerate { cell });
    }
    if theta < 1e-9 {
        return project(&(a * (1.0 - t) + b * t), cell);
    }
    let s = theta.sin();
    let w = a * (((1.0 - t) * theta).sin() / s) + b * ((t * theta).sin() / s);
    project(&w, cell)
}

/// A closure-backed boundary map, used for synthetic data and adapters.
pub struct FnBoundary<F> {
    dim: usize,
    far_value: Ambient,
    support: (BasePoint, BasePoint),
    f: F,
}

impl<F: Fn(BasePoint) -> Ambient + Sync> FnBoundary<F> {
    pub fn new(dim: usize, far_value: Ambient, support: (BasePoint, BasePoint), f: F) -> Self {
        Self { dim, far_value, support, f }
    }
}

impl<F: Fn(BasePoint) -> Ambient + Sync> BoundaryData for FnBoundary<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, y: BasePoint) -> Result<Ambient> {
        let inside = (0..self.dim).all(|a| y[a] >= self.support.0[a] && y[a] <= self.support.1[a]);
        Ok(if inside { (self.f)(y) } else { self.far_value })
    }
    fn far_value(&self) -> Ambient {
        self.far_value
    }
    fn support(&self) -> (BasePoint, BasePoint) {
        self.support
    }
}

/// The map `y -> u(y / s)`.
pub struct Rescaled<B> {
    pub inner: B,
    pub factor: f64,
}

impl<B: BoundaryData> BoundaryData for Rescaled<B> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, y: BasePoint) -> Result<Ambient> {
        self.inner.value([y[0] / self.factor, y[1] / self.factor])
    }
    fn far_value(&self) -> Ambient {
        self.inner.far_value()
    }
    fn support(&self) -> (BasePoint, BasePoint) {
        let (lo, hi) = self.inner.support();
        ([lo[0] * self.factor, lo[1] * self.factor], [hi[0] * self.factor, hi[1] * self.factor])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMode {
    /// Pairs leaving the integration window are ignored.
    Drop,
    /// Pairs with one point outside the window are integrated in closed form against the far value.
    AnalyticConstantTail,
}

impl FromStr for TailMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(Self::Drop),
            "analytic" | "analytic-constant-tail" => Ok(Self::AnalyticConstantTail),
            other => Err(Error::InvalidParameter(format!("unknown tail mode {other:?}"))),
        }
    }
}

impl fmt::Display for TailMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Drop => "drop",
            Self::AnalyticConstantTail => "analytic-constant-tail",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub pair_resolution: usize,
    pub window_margin: f64,
    pub tail_mode: TailMode,
}

impl QuadratureSpec {
    pub fn new(pair_resolution: usize, window_margin: f64, tail_mode: TailMode) -> Result<Self> {
        if pair_resolution < 2 {
            return Err(Error::InvalidParameter(format!(
                "pair resolution must be at least 2, got {pair_resolution}"
            )));
        }
        if !(window_margin >= 0.0) {
            return Err(Error::InvalidParameter(format!("window margin must be nonnegative, got {window_margin}")));
        }
        Ok(Self { pair_resolution, window_margin, tail_mode })
    }

    pub fn with_resolution(self, pair_resolution: usize) -> Self {
        Self { pair_resolution, ..self }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { pair_resolution: 512, window_margin: 0.0, tail_mode: TailMode::Drop }
    }
}

/// Midpoint cells of the integration window with the map evaluated on them.
struct PairGrid {
    dim: usize,
    per_axis: usize,
    cell: f64,
    lo: BasePoint,
    hi: BasePoint,
    centers: Vec<BasePoint>,
    values: Vec<Ambient>,
    far: Ambient,
}

impl PairGrid {
    fn build<B: BoundaryData + ?Sized>(u: &B, quad: &QuadratureSpec) -> Result<Self> {
        let dim = u.dim();
        let (slo, shi) = u.support();
        let r = quad.window_margin;
        let lo = [slo[0] - r, slo[1] - r];
        let hi = [shi[0] + r, shi[1] + r];
        let extent = hi[0] - lo[0];
        if dim == 2 && ((hi[1] - lo[1]) - extent).abs() > 1e-12 * extent {
            return Err(Error::InvalidParameter("pair quadrature needs a square window".into()));
        }
        let p = quad.pair_resolution;
        let cell = extent / p as f64;
        let mid = |a: usize, k: usize| lo[a] + (k as f64 + 0.5) * cell;
        let centers: Vec<BasePoint> = if dim == 1 {
            (0..p).map(|k| [mid(0, k), 0.0]).collect()
        } else {
            (0..p * p).map(|idx| [mid(0, idx % p), mid(1, idx / p)]).collect()
        };
        let values = centers.iter().map(|c| u.value(*c)).collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, per_axis: p, cell, lo, hi, centers, values, far: u.far_value() })
    }

    fn offset(&self, a: usize, b: usize) -> (i64, i64) {
        let p = self.per_axis;
        if self.dim == 1 {
            (a as i64 - b as i64, 0)
        } else {
            ((a % p) as i64 - (b % p) as i64, (a / p) as i64 - (b / p) as i64)
        }
    }

    /// `h^{2m} / |y - z|^{2m}` for two distinct cells.
    #[inline]
    fn kernel(&self, a: usize, b: usize) -> f64 {
        let (di, dj) = self.offset(a, b);
        let r2 = (di * di + dj * dj) as f64;
        if self.dim == 1 {
            1.0 / r2
        } else {
            1.0 / (r2 * r2)
        }
    }

    /// Cell measure times twice the exterior integral of `|y - z|^{-2m}` over `z` outside the window.
    fn tail_kernel(&self, a: usize) -> f64 {
        let y = self.centers[a];
        let h = self.cell;
        let exterior = if self.dim == 1 {
            1.0 / (y[0] - self.lo[0]) + 1.0 / (self.hi[0] - y[0])
        } else {
            square_exterior_integral(y, self.lo, self.hi)
        };
        2.0 * h.powi(self.dim as i32) * exterior
    }

    fn len(&self) -> usize {
        self.values.len()
    }
}

/// `int_{z outside box} |y - z|^{-4} dz` for `y` inside a planar box.
fn square_exterior_integral(y: BasePoint, lo: BasePoint, hi: BasePoint) -> f64 {
    let antiderivative = |phi: f64| phi / 2.0 + (2.0 * phi).sin() / 4.0;
    let side = |s: f64, a: f64, b: f64| {
        let (p1, p2) = ((a / s).atan(), (b / s).atan());
        (antiderivative(p2) - antiderivative(p1)) / (2.0 * s * s)
    };
    side(hi[0] - y[0], lo[1] - y[1], hi[1] - y[1])
        + side(y[0] - lo[0], lo[1] - y[1], hi[1] - y[1])
        + side(hi[1] - y[1], lo[0] - y[0], hi[0] - y[0])
        + side(y[1] - lo[1], lo[0] - y[0], hi[0] - y[0])
}

fn pair_functional<B, F>(u: &B, quad: &QuadratureSpec, f: F) -> Result<f64>
where
    B: BoundaryData + ?Sized,
    F: Fn(f64) -> f64 + Sync,
{
    let grid = PairGrid::build(u, quad)?;
    let n = grid.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|a| {
            let va = &grid.values[a];
            let mut row = CompensatedSum::new();
            for b in a + 1..n {
                let d = geodesic(va, &grid.values[b]);
                if d > 0.0 {
                    row.add(grid.kernel(a, b) * f(d));
                }
            }
            let mut total = 2.0 * row.value();
            if quad.tail_mode == TailMode::AnalyticConstantTail {
                let d = geodesic(va, &grid.far);
                if d > 0.0 {
                    total += grid.tail_kernel(a) * f(d);
                }
            }
            total
        })
        .collect();
    Ok(compensated(rows))
}

/// Visits every quadrature term as `(kernel weight, distance)`; interior pairs are
/// visited once per ordered pair, tail terms once per cell.
pub fn for_each_pair_term<B, V>(u: &B, quad: &QuadratureSpec, mut visit: V) -> Result<()>
where
    B: BoundaryData + ?Sized,
    V: FnMut(f64, f64),
{
    let grid = PairGrid::build(u, quad)?;
    let n = grid.len();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                visit(grid.kernel(a, b), geodesic(&grid.values[a], &grid.values[b]));
            }
        }
        if quad.tail_mode == TailMode::AnalyticConstantTail {
            visit(grid.tail_kernel(a), geodesic(&grid.values[a], &grid.far));
        }
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("exponent must be at least 1, got {p}")))
    }
}

/// Midpoint-rule `iint d(u(y), u(z))^p / |y - z|^{2m}` with diagonal cells omitted.
pub fn gagliardo_energy<B: BoundaryData + ?Sized>(u: &B, p: f64, quad: &QuadratureSpec) -> Result<f64> {
    truncated_energy(u, 0.0, p, quad)
}

/// Midpoint-rule `iint_{d >= delta} |y - z|^{-2m}`.
pub fn gap_potential<B: BoundaryData + ?Sized>(u: &B, delta: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("gap threshold must be positive, got {delta}")));
    }
    pair_functional(u, quad, |d| if d >= delta { 1.0 } else { 0.0 })
}

/// Midpoint-rule `iint (d - delta)_+^p / |y - z|^{2m}`.
pub fn truncated_energy<B: BoundaryData + ?Sized>(
    u: &B,
    delta: f64,
    p: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_exponent(p)?;
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("truncation must be nonnegative, got {delta}")));
    }
    pair_functional(u, quad, |d| (d - delta).max(0.0).powf(p))
}

/// Degree of a one-dimensional circle-valued map, closed through the far value.
pub fn winding_number(u: &BoundaryMap) -> Result<i64> {
    if u.dim != 1 || u.target.kind() != TargetKind::Circle {
        return Err(Error::InvalidParameter("winding number needs a one-dimensional circle-valued map".into()));
    }
    let mut points = Vec::with_capacity(u.samples.len() + 1);
    points.push(u.far_value);
    points.extend_from_slice(&u.samples);
    crate::manifold::loop_winding(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn circle_point(angle: f64) -> Ambient {
        Ambient::new(angle.cos(), angle.sin(), 0.0)
    }

    #[test]
    fn geodesic_midpoint() {
        let a = circle_point(0.3);
        let b = circle_point(1.1);
        let samples = vec![a, a, b, a, a];
        let map = BoundaryMap::new(TargetManifold::circle(), 1, 5, samples, Interpolation::Geodesic).unwrap();
        let mid = map.evaluate([0.375, 0.0]).unwrap();
        let half = geodesic(&a, &b) / 2.0;
        assert_abs_diff_eq!(geodesic(&mid, &a), half, epsilon = 1e-14);
        assert_abs_diff_eq!(geodesic(&mid, &b), half, epsilon = 1e-14);
    }

    #[test]
    fn antipodal_cell_degenerates() {
        let a = circle_point(0.0);
        let b = circle_point(PI);
        let map = BoundaryMap::new(TargetManifold::circle(), 1, 4, vec![a, a, b, a], Interpolation::EmbeddedLinear)
            .unwrap();
        assert_eq!(
            map.evaluate([0.5, 0.0]).unwrap_err(),
            Error::InterpolationDegenerate { cell: [1, 0] }
        );
    }

    #[test]
    fn exterior_integral_of_square_is_symmetric() {
        let lo = [0.0, 0.0];
        let hi = [1.0, 1.0];
        let a = square_exterior_integral([0.3, 0.6], lo, hi);
        let b = square_exterior_integral([0.7, 0.4], lo, hi);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        // at the center each side contributes (pi/4 + 1/2) / (2 * 0.25)
        let c = square_exterior_integral([0.5, 0.5], lo, hi);
        assert_abs_diff_eq!(c, 4.0 * (PI / 4.0 + 0.5) / 0.5, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::new(1, 0.0, TailMode::Drop).is_err());
        assert!(QuadratureSpec::new(2, -1.0, TailMode::Drop).is_err());
        assert!(QuadratureSpec::new(2, 0.0, TailMode::Drop).is_ok());
    }
}
