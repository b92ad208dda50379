use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ObjectClass, OrientedBox};
use crate::scalar::{to_f64, Real};

/// Closed interval `[min, max]` for one box dimension, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    /// 1 at the interval center, 0 at either bound.
    fn margin(&self, v: f64) -> f64 {
        let half = 0.5 * (self.max - self.min);
        if half <= 0.0 {
            return 1.0;
        }
        ((v - self.min).min(self.max - v) / half).clamp(0.0, 1.0)
    }
}

/// Dimension gate for one class: length, width and height ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassGate {
    pub length: Range,
    pub width: Range,
    pub height: Range,
}

impl ClassGate {
    pub fn matches(&self, dims: [f64; 3]) -> bool {
        self.length.contains(dims[0]) && self.width.contains(dims[1]) && self.height.contains(dims[2])
    }

    fn margin(&self, dims: [f64; 3]) -> f64 {
        (self.length.margin(dims[0]) + self.width.margin(dims[1]) + self.height.margin(dims[2])) / 3.0
    }
}

/// Gates for every class. Fitted boxes of partially observed objects are
/// smaller than the object and point noise inflates the hull, so the ranges
/// are wide on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassGates {
    pub truck: ClassGate,
    pub car: ClassGate,
    pub motorcycle: ClassGate,
    pub bicycle: ClassGate,
    pub pedestrian: ClassGate,
}

impl Default for ClassGates {
    fn default() -> Self {
        let g = |l: (f64, f64), w: (f64, f64), h: (f64, f64)| ClassGate {
            length: Range::new(l.0, l.1),
            width: Range::new(w.0, w.1),
            height: Range::new(h.0, h.1),
        };
        Self {
            truck: g((5.5, 14.0), (1.0, 3.8), (2.4, 4.5)),
            car: g((2.8, 6.8), (0.6, 3.2), (1.0, 2.4)),
            motorcycle: g((1.5, 3.2), (0.1, 1.6), (0.9, 1.55)),
            bicycle: g((1.6, 2.8), (0.05, 1.4), (1.45, 2.3)),
            pedestrian: g((0.05, 1.6), (0.05, 1.3), (1.2, 2.3)),
        }
    }
}

impl ClassGates {
    /// Gates in precedence order: the first match wins.
    pub fn ordered(&self) -> [(ObjectClass, &ClassGate); 5] {
        [
            (ObjectClass::Truck, &self.truck),
            (ObjectClass::Car, &self.car),
            (ObjectClass::Motorcycle, &self.motorcycle),
            (ObjectClass::Bicycle, &self.bicycle),
            (ObjectClass::Pedestrian, &self.pedestrian),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (class, g) in self.ordered() {
            for (name, r) in [("length", g.length), ("width", g.width), ("height", g.height)] {
                if !(r.min.is_finite() && r.max.is_finite() && r.min >= 0.0 && r.min <= r.max) {
                    return Err(Error::validation(format!("{class} gate {name} must satisfy 0 <= min <= max")));
                }
            }
        }
        Ok(())
    }
}

/// Point count at which the evidence half of the score reaches 1 - 1/e.
const POINT_SCALE: f64 = 20.0;

/// Class by dimension gates with fixed precedence, and a score in `[0, 1]`
/// that grows with the gate margin and with the number of supporting points.
pub fn classify<T: Real>(bx: &OrientedBox<T>, n_points: usize, gates: &ClassGates) -> Option<(ObjectClass, f64)> {
    let dims = bx.dims().map(to_f64);
    let (class, gate) = gates.ordered().into_iter().find(|(_, g)| g.matches(dims))?;
    let evidence = 1.0 - (-(n_points as f64) / POINT_SCALE).exp();
    let score = 0.5 * gate.margin(dims) + 0.5 * evidence;
    Some((class, score.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::sim::default_dims;

    fn bx(l: f64, w: f64, h: f64) -> OrientedBox<f64> {
        OrientedBox::new(Vec3::new(0.0, 0.0, h / 2.0), l, w, h, 0.0).unwrap()
    }

    #[test]
    fn textbook_sizes() {
        let g = ClassGates::default();
        assert_eq!(classify(&bx(4.5, 1.8, 1.6), 100, &g).unwrap().0, ObjectClass::Car);
        assert_eq!(classify(&bx(0.5, 0.5, 1.8), 100, &g).unwrap().0, ObjectClass::Pedestrian);
        assert!(classify(&bx(30.0, 30.0, 30.0), 100, &g).is_none());
    }

    #[test]
    fn simulated_dimensions_classify_as_their_class() {
        let g = ClassGates::default();
        for class in ObjectClass::ALL {
            let [l, w, h] = default_dims(class);
            assert_eq!(classify(&bx(l, w, h), 50, &g).unwrap().0, class, "{class}");
        }
    }

    #[test]
    fn score_monotone_in_points() {
        let g = ClassGates::default();
        let b = bx(4.5, 1.8, 1.6);
        let mut last = -1.0;
        for n in [0, 1, 5, 20, 100, 1000] {
            let s = classify(&b, n, &g).unwrap().1;
            assert!((0.0..=1.0).contains(&s) && s > last);
            last = s;
        }
    }

    #[test]
    fn precedence_resolves_overlap() {
        // inside both the motorcycle and the bicycle gate
        let g = ClassGates::default();
        assert!(g.motorcycle.matches([2.0, 0.7, 1.5]) && g.bicycle.matches([2.0, 0.7, 1.5]));
        assert_eq!(classify(&bx(2.0, 0.7, 1.5), 10, &g).unwrap().0, ObjectClass::Motorcycle);
    }
}
