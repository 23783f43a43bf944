//! Compensated accumulation (Neumaier's variant of Kahan summation).

use crate::manifold::Ambient;

#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Sums in iteration order with compensation.
pub fn compensated<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedVector {
    parts: [CompensatedSum; 3],
}

impl CompensatedVector {
    #[inline]
    pub fn add(&mut self, v: &Ambient) {
        for (p, x) in self.parts.iter_mut().zip(v.iter()) {
            p.add(*x);
        }
    }

    #[inline]
    pub fn add_scaled(&mut self, v: &Ambient, s: f64) {
        for (p, x) in self.parts.iter_mut().zip(v.iter()) {
            p.add(*x * s);
        }
    }

    pub fn value(&self) -> Ambient {
        Ambient::new(self.parts[0].value(), self.parts[1].value(), self.parts[2].value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_mass() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated(xs), 2.0);
        assert_ne!(xs.iter().sum::<f64>(), 2.0);
    }
}
