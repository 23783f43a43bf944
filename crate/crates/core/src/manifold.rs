//! Round sphere targets embedded in Euclidean space.
//!
//! Both targets use three-component ambient vectors; circle points keep a zero
//! third component so that one vector type serves every module.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Ambient = Vector3<f64>;

/// Unit-norm tolerance for points claimed to lie on the target.
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Circle,
    Sphere,
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(Self::Circle),
            "s2" => Ok(Self::Sphere),
            other => Err(Error::InvalidParameter(format!("unknown target {other:?}"))),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Circle => "s1",
            Self::Sphere => "s2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetManifold {
    kind: TargetKind,
    tube_radius: f64,
}

/// Output of [`TargetManifold::retract`]; `flagged` marks inputs outside the tube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retraction {
    pub point: Ambient,
    pub flagged: bool,
}

impl TargetManifold {
    pub const DEFAULT_TUBE_RADIUS: f64 = 0.5;

    pub fn new(kind: TargetKind, tube_radius: f64) -> Result<Self> {
        if !(tube_radius > 0.0 && tube_radius < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tube radius must lie in (0, 1), got {tube_radius}"
            )));
        }
        Ok(Self { kind, tube_radius })
    }

    pub fn circle() -> Self {
        Self { kind: TargetKind::Circle, tube_radius: Self::DEFAULT_TUBE_RADIUS }
    }

    pub fn sphere() -> Self {
        Self { kind: TargetKind::Sphere, tube_radius: Self::DEFAULT_TUBE_RADIUS }
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            TargetKind::Circle => 2,
            TargetKind::Sphere => 3,
        }
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    pub fn diameter(&self) -> f64 {
        PI
    }

    pub fn contains(&self, x: &Ambient) -> bool {
        let planar = self.kind == TargetKind::Sphere || x.z == 0.0;
        planar && (x.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn check_point(&self, x: &Ambient) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::InvalidPoint { point: (*x).into(), norm: x.norm() })
        }
    }

    pub fn geodesic_distance(&self, a: &Ambient, b: &Ambient) -> Result<f64> {
        self.check_point(a)?;
        self.check_point(b)?;
        Ok(geodesic(a, b))
    }

    /// Euclidean distance from an ambient point to the target.
    pub fn distance_to(&self, x: &Ambient) -> f64 {
        (x.norm() - 1.0).abs()
    }

    pub fn retract(&self, x: &Ambient) -> Result<Retraction> {
        let norm = x.norm();
        if norm == 0.0 {
            return Err(Error::UndefinedRetraction);
        }
        Ok(Retraction { point: x / norm, flagged: (norm - 1.0).abs() > self.tube_radius })
    }
}

/// Geodesic distance between unit vectors, without validation.
///
/// Evaluated as `atan2(|a x b|, a . b)`, which equals `arccos(a . b)` on unit vectors
/// but keeps full relative accuracy for nearby points.
#[inline]
pub fn geodesic(a: &Ambient, b: &Ambient) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).clamp(0.0, PI)
}

/// Radial projection onto the unit sphere, without tube bookkeeping.
#[inline]
pub fn normalize(x: &Ambient) -> Result<Ambient> {
    let n = x.norm();
    if n == 0.0 {
        Err(Error::UndefinedRetraction)
    } else {
        Ok(x / n)
    }
}

/// Number of turns of a closed planar loop around the origin.
///
/// Increments between consecutive points are taken in `(-pi, pi]`; the loop closes
/// from the last point back to the first.
pub fn loop_winding(points: &[Ambient]) -> Result<i64> {
    let n = points.len();
    if n < 2 {
        return Ok(0);
    }
    let mut total = crate::sum::CompensatedSum::new();
    for i in 0..n {
        let a = &points[i];
        let b = &points[(i + 1) % n];
        let cross = a.x * b.y - a.y * b.x;
        let dot = a.x * b.x + a.y * b.y;
        if cross == 0.0 && dot <= 0.0 {
            return Err(Error::AmbiguousLift { index: i, next: (i + 1) % n });
        }
        let step = cross.atan2(dot);
        if PI - step.abs() < 1e-12 {
            return Err(Error::AmbiguousLift { index: i, next: (i + 1) % n });
        }
        total.add(step);
    }
    let turns = total.value() / (2.0 * PI);
    let rounded = turns.round();
    debug_assert!((turns - rounded).abs() < 1e-9, "non-integer winding {turns}");
    Ok(rounded as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(x: f64, y: f64) -> Ambient {
        Ambient::new(x, y, 0.0)
    }

    #[test]
    fn distance_examples() {
        let s1 = TargetManifold::circle();
        assert_eq!(s1.geodesic_distance(&v(1.0, 0.0), &v(1.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(s1.geodesic_distance(&v(1.0, 0.0), &v(-1.0, 0.0)).unwrap(), PI);
        assert_abs_diff_eq!(
            s1.geodesic_distance(&v(1.0, 0.0), &v(0.0, 1.0)).unwrap(),
            PI / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rejects_off_target_points() {
        let s1 = TargetManifold::circle();
        let err = s1.geodesic_distance(&v(1.1, 0.0), &v(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidPoint { .. }));
        assert!(s1.geodesic_distance(&Ambient::new(0.0, 0.0, 1.0), &v(1.0, 0.0)).is_err());
        let s2 = TargetManifold::sphere();
        assert!(s2.geodesic_distance(&Ambient::new(0.0, 0.0, 1.0), &v(1.0, 0.0)).is_ok());
    }

    #[test]
    fn retraction_examples() {
        let s1 = TargetManifold::circle();
        let r = s1.retract(&v(2.0, 0.0)).unwrap();
        assert_eq!(r.point, v(1.0, 0.0));
        assert!(r.flagged);
        let r = s1.retract(&v(0.6, 0.8)).unwrap();
        assert_abs_diff_eq!(r.point, v(0.6, 0.8), epsilon = 1e-15);
        assert!(!r.flagged);
        assert_eq!(s1.retract(&v(0.0, 0.0)).unwrap_err(), Error::UndefinedRetraction);
    }

    #[test]
    fn tube_radius_bounds() {
        assert!(TargetManifold::new(TargetKind::Circle, 1.0).is_err());
        assert!(TargetManifold::new(TargetKind::Circle, 0.0).is_err());
        assert!(TargetManifold::new(TargetKind::Sphere, 0.25).is_ok());
        assert_eq!(TargetManifold::sphere().diameter(), PI);
    }

    #[test]
    fn winding_of_loops() {
        let circle: Vec<Ambient> = (0..12)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 12.0;
                v(a.cos(), a.sin())
            })
            .collect();
        assert_eq!(loop_winding(&circle).unwrap(), 1);
        let reversed: Vec<_> = circle.iter().rev().copied().collect();
        assert_eq!(loop_winding(&reversed).unwrap(), -1);
        assert!(matches!(
            loop_winding(&[v(1.0, 0.0), v(-1.0, 0.0)]),
            Err(Error::AmbiguousLift { .. })
        ));
    }
}
