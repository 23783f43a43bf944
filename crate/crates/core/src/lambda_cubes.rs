//! Lambda-adic cubes of the half-space, their faces and point location.

use std::collections::BTreeMap;
use std::fmt;

use crate::boundary_map::BasePoint;
use crate::error::{Error, Result};
use crate::mean_oscillation::HalfSpacePoint;

#[derive(Debug, Clone, PartialEq)]
pub enum Translations {
    Broadcast(BasePoint),
    PerScale(BTreeMap<i32, BasePoint>),
}

impl Translations {
    pub fn at(&self, k: i32) -> BasePoint {
        match self {
            Self::Broadcast(h) => *h,
            Self::PerScale(map) => map.get(&k).copied().unwrap_or([0.0, 0.0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeFamilyParams {
    dim: usize,
    lambda: f64,
    tau: f64,
    translations: Translations,
    k_min: i32,
    k_max: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CubeId {
    pub k: i32,
    pub j: [i64; 2],
}

impl fmt::Display for CubeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={}, j={:?})", self.k, self.j)
    }
}

/// Closed axis-aligned box in `R^{m+1}`; the last used slot is the height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeBox {
    pub dim: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl CubeBox {
    pub fn edge(&self) -> f64 {
        self.hi[0] - self.lo[0]
    }

    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for a in 0..=self.dim {
            c[a] = 0.5 * (self.lo[a] + self.hi[a]);
        }
        c
    }

    pub fn contains(&self, p: &[f64; 3], slack: f64) -> bool {
        (0..=self.dim).all(|a| p[a] >= self.lo[a] - slack && p[a] <= self.hi[a] + slack)
    }

    /// Distance from `p` to the boundary of the box, for points inside it.
    pub fn boundary_distance(&self, p: &[f64; 3]) -> f64 {
        (0..=self.dim)
            .map(|a| (p[a] - self.lo[a]).abs().min((self.hi[a] - p[a]).abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaceKind {
    /// Bottom face, parallel to the boundary hyperplane.
    Parallel,
    /// Lateral faces, normal to the boundary hyperplane.
    Perpendicular,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: HalfSpacePoint,
    pub face: FaceKind,
    /// Position on the `(segments + 1)^{m+1}` lattice of the cube.
    pub lattice: [usize; 3],
}

/// Per-face sample grids, each including its own edges and corners.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSet {
    pub parallel: Vec<HalfSpacePoint>,
    pub perpendicular: Vec<Vec<HalfSpacePoint>>,
    pub top: Vec<HalfSpacePoint>,
}

impl CubeFamilyParams {
    pub fn new(dim: usize, lambda: f64, tau: f64, translations: Translations, k_min: i32, k_max: i32) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(lambda >= 2.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be at least 2, got {lambda}")));
        }
        if !(1.0..=lambda).contains(&tau) {
            return Err(Error::InvalidParameter(format!("tau must lie in [1, lambda], got {tau}")));
        }
        if k_min > k_max {
            return Err(Error::InvalidParameter(format!("empty scale range [{k_min}, {k_max}]")));
        }
        let check = |h: &BasePoint| (0..dim).all(|a| (0.0..=1.0).contains(&h[a]));
        let ok = match &translations {
            Translations::Broadcast(h) => check(h),
            Translations::PerScale(map) => map.values().all(check),
        };
        if !ok {
            return Err(Error::InvalidParameter("translations must lie in [0, 1]^m".into()));
        }
        Ok(Self { dim, lambda, tau, translations, k_min, k_max })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn translations(&self) -> &Translations {
        &self.translations
    }
    pub fn k_range(&self) -> (i32, i32) {
        (self.k_min, self.k_max)
    }

    pub fn with_translations(&self, translations: Translations) -> Self {
        Self { translations, ..self.clone() }
    }

    pub fn with_k_range(&self, k_min: i32, k_max: i32) -> Self {
        Self { k_min, k_max, ..self.clone() }
    }

    /// Horizontal edge `tau lambda^{-k}`.
    pub fn edge(&self, k: i32) -> f64 {
        self.tau * self.lambda.powi(-k)
    }

    /// Lowest height of the scale-`k` band.
    pub fn band_bottom(&self, k: i32) -> f64 {
        self.edge(k) / (self.lambda - 1.0)
    }

    /// Highest height of the scale-`k` band.
    pub fn band_top(&self, k: i32) -> f64 {
        self.tau * self.lambda.powi(-(k - 1)) / (self.lambda - 1.0)
    }

    fn check_scale(&self, k: i32) -> Result<()> {
        if (self.k_min..=self.k_max).contains(&k) {
            Ok(())
        } else {
            Err(Error::ScaleOutOfRange { k, k_min: self.k_min, k_max: self.k_max })
        }
    }

    pub fn cube_geometry(&self, id: CubeId) -> Result<CubeBox> {
        self.check_scale(id.k)?;
        Ok(self.geometry_unchecked(id))
    }

    pub(crate) fn geometry_unchecked(&self, id: CubeId) -> CubeBox {
        let e = self.edge(id.k);
        let h = self.translations.at(id.k);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..self.dim {
            lo[a] = e * (id.j[a] as f64 + h[a]);
            hi[a] = e * (id.j[a] as f64 + h[a] + 1.0);
        }
        lo[self.dim] = self.band_bottom(id.k);
        hi[self.dim] = self.band_top(id.k);
        CubeBox { dim: self.dim, lo, hi }
    }

    /// Scale whose half-open band `[bottom, top)` holds `height`, ignoring the range.
    pub fn scale_of_height(&self, height: f64) -> i32 {
        let s = (height * (self.lambda - 1.0) / self.tau).ln() / self.lambda.ln();
        let mut k = (-s).ceil() as i32;
        while height < self.band_bottom(k) {
            k += 1;
        }
        while height >= self.band_top(k) {
            k -= 1;
        }
        k
    }

    /// Index of the half-open cell `[e (j + h), e (j + h + 1))` holding `x` at scale `k`.
    pub fn index_at_scale(&self, k: i32, x: BasePoint) -> [i64; 2] {
        let e = self.edge(k);
        let h = self.translations.at(k);
        let mut j = [0i64; 2];
        for a in 0..self.dim {
            let mut c = (x[a] / e - h[a]).floor() as i64;
            if x[a] < e * (c as f64 + h[a]) {
                c -= 1;
            } else if x[a] >= e * (c as f64 + 1.0 + h[a]) {
                c += 1;
            }
            j[a] = c;
        }
        j
    }

    pub fn locate(&self, x: &HalfSpacePoint) -> Result<CubeId> {
        let k = self.scale_of_height(x.height);
        if k < self.k_min || k > self.k_max {
            let nearest_k = k.clamp(self.k_min, self.k_max);
            return Err(Error::OutOfBand { height: x.height, nearest_k });
        }
        Ok(CubeId { k, j: self.index_at_scale(k, x.x_prime) })
    }

    /// Cubes of scale `k` whose half-open footprint meets the half-open window `[lo, hi)`.
    pub fn enumerate_scale(&self, k: i32, window: (BasePoint, BasePoint)) -> Vec<CubeId> {
        let e = self.edge(k);
        let h = self.translations.at(k);
        let range = |a: usize| {
            let first = ((window.0[a] / e) - h[a]).floor() as i64;
            let last = ((window.1[a] / e) - h[a]).ceil() as i64 - 1;
            let first = if e * (first as f64 + 1.0 + h[a]) <= window.0[a] { first + 1 } else { first };
            let last = if e * (last as f64 + h[a]) >= window.1[a] { last - 1 } else { last };
            first..=last
        };
        let mut ids = Vec::new();
        if self.dim == 1 {
            ids.extend(range(0).map(|i| CubeId { k, j: [i, 0] }));
        } else {
            for j1 in range(1) {
                for j0 in range(0) {
                    ids.push(CubeId { k, j: [j0, j1] });
                }
            }
        }
        ids
    }

    pub fn enumerate_window(&self, window: (BasePoint, BasePoint)) -> Vec<CubeId> {
        (self.k_min..=self.k_max).flat_map(|k| self.enumerate_scale(k, window)).collect()
    }

    /// Number of segments per edge: the smallest power of two reaching `density * edge`.
    pub fn segments(&self, k: i32, density: f64, max_segments: usize) -> usize {
        let wanted = (density * self.edge(k)).ceil().max(1.0) as usize;
        wanted.next_power_of_two().min(max_segments.next_power_of_two()).max(1)
    }

    /// Lattice points of the cube surface, each listed once.
    pub fn sample_boundary(&self, id: CubeId, density: f64) -> Result<Vec<BoundarySample>> {
        self.check_scale(id.k)?;
        let s = self.segments(id.k, density, usize::MAX / 2);
        Ok(surface_lattice(self.dim, s)
            .into_iter()
            .map(|l| self.lattice_sample(id, s, l))
            .collect())
    }

    pub fn sample_boundary_with(&self, id: CubeId, segments: usize) -> Vec<BoundarySample> {
        surface_lattice(self.dim, segments)
            .into_iter()
            .map(|l| self.lattice_sample(id, segments, l))
            .collect()
    }

    fn lattice_sample(&self, id: CubeId, s: usize, l: [usize; 3]) -> BoundarySample {
        let b = self.geometry_unchecked(id);
        let m = self.dim;
        let mut c = [0.0; 3];
        for a in 0..=m {
            c[a] = lattice_coord(b.lo[a], b.hi[a], l[a], s);
        }
        let face = if l[m] == 0 {
            FaceKind::Parallel
        } else if l[m] == s {
            FaceKind::Top
        } else {
            FaceKind::Perpendicular
        };
        BoundarySample { point: HalfSpacePoint::from_coords(&c, m), face, lattice: l }
    }

    /// Full grids of every face, edges included.
    pub fn face_grids(&self, id: CubeId, segments: usize) -> FaceSet {
        let m = self.dim;
        let all = self.sample_boundary_with(id, segments);
        let on = |l: &[usize; 3], axis: usize, at: usize| l[axis] == at;
        let pick = |pred: &dyn Fn(&[usize; 3]) -> bool| -> Vec<HalfSpacePoint> {
            all.iter().filter(|s| pred(&s.lattice)).map(|s| s.point).collect()
        };
        let parallel = pick(&|l| on(l, m, 0));
        let top = pick(&|l| on(l, m, segments));
        let mut perpendicular = Vec::new();
        for a in 0..m {
            perpendicular.push(pick(&|l| on(l, a, 0)));
            perpendicular.push(pick(&|l| on(l, a, segments)));
        }
        FaceSet { parallel, perpendicular, top }
    }
}

/// `lo + (i / s) * (hi - lo)`, exact at both ends so that refined lattices nest.
pub fn lattice_coord(lo: f64, hi: f64, i: usize, s: usize) -> f64 {
    if i == s {
        hi
    } else {
        lo + (i as f64 / s as f64) * (hi - lo)
    }
}

/// Indices of the `(s+1)^{m+1}` lattice lying on the cube surface.
pub fn surface_lattice(dim: usize, s: usize) -> Vec<[usize; 3]> {
    let on_surface = |l: &[usize; 3]| (0..=dim).any(|a| l[a] == 0 || l[a] == s);
    let mut out = Vec::new();
    if dim == 1 {
        for y in 0..=s {
            for x in 0..=s {
                let l = [x, y, 0];
                if on_surface(&l) {
                    out.push(l);
                }
            }
        }
    } else {
        for z in 0..=s {
            for y in 0..=s {
                for x in 0..=s {
                    let l = [x, y, z];
                    if on_surface(&l) {
                        out.push(l);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_family(k_min: i32, k_max: i32) -> CubeFamilyParams {
        CubeFamilyParams::new(1, 2.0, 1.0, Translations::Broadcast([0.0, 0.0]), k_min, k_max).unwrap()
    }

    #[test]
    fn geometry_examples() {
        let p = unit_family(0, 3);
        let b = p.cube_geometry(CubeId { k: 0, j: [0, 0] }).unwrap();
        assert_eq!((b.lo[0], b.hi[0], b.lo[1], b.hi[1]), (0.0, 1.0, 1.0, 2.0));
        let b = p.cube_geometry(CubeId { k: 1, j: [3, 0] }).unwrap();
        assert_eq!((b.lo[0], b.hi[0], b.lo[1], b.hi[1]), (1.5, 2.0, 0.5, 1.0));
        assert!(matches!(
            p.cube_geometry(CubeId { k: 4, j: [0, 0] }),
            Err(Error::ScaleOutOfRange { k: 4, .. })
        ));
    }

    #[test]
    fn locate_examples() {
        let p = unit_family(0, 3);
        let at = |x: f64, t: f64| p.locate(&HalfSpacePoint::new([x, 0.0], t).unwrap()).unwrap();
        assert_eq!(at(0.5, 1.5), CubeId { k: 0, j: [0, 0] });
        assert_eq!(at(1.0, 1.5), CubeId { k: 0, j: [1, 0] });
        assert_eq!(at(3.7, 0.6), CubeId { k: 1, j: [7, 0] });
        assert_eq!(at(0.5, 1.0), CubeId { k: 0, j: [0, 0] });
        let err = p.locate(&HalfSpacePoint::new([0.0, 0.0], 5.0).unwrap()).unwrap_err();
        assert_eq!(err, Error::OutOfBand { height: 5.0, nearest_k: 0 });
    }

    #[test]
    fn enumerate_examples() {
        let window = ([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(unit_family(0, 0).enumerate_window(window), vec![CubeId { k: 0, j: [0, 0] }]);
        let ids = unit_family(0, 1).enumerate_window(window);
        assert_eq!(ids.iter().filter(|c| c.k == 0).count(), 1);
        assert_eq!(ids.iter().filter(|c| c.k == 1).count(), 2);
    }

    #[test]
    fn three_per_edge_gives_eight_points() {
        let p = unit_family(0, 0);
        let pts = p.sample_boundary(CubeId { k: 0, j: [0, 0] }, 2.0).unwrap();
        assert_eq!(pts.len(), 8);
    }
}
