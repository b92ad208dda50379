//! Uniform hash grid for fixed-radius neighbor queries.

use std::collections::HashMap;

use crate::geometry::Point;
use crate::scalar::{to_f64, Real};

pub struct HashGrid {
    cell: f64,
    cells: HashMap<(i32, i32, i32), Vec<u32>>,
}

impl HashGrid {
    pub fn new<T: Real>(points: &[Point<T>], cell: f64) -> Self {
        assert!(cell > 0.0, "grid cell must be positive");
        let mut cells: HashMap<(i32, i32, i32), Vec<u32>> = HashMap::with_capacity(points.len() / 4 + 1);
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key_of(p, cell)).or_default().push(i as u32);
        }
        Self { cell, cells }
    }

    fn key_of<T: Real>(p: &Point<T>, cell: f64) -> (i32, i32, i32) {
        (
            (to_f64(p.x) / cell).floor() as i32,
            (to_f64(p.y) / cell).floor() as i32,
            (to_f64(p.z) / cell).floor() as i32,
        )
    }

    /// Calls `f` with the index of every point within `radius` of `points[i]`
    /// (excluding `i`). `radius` must not exceed the cell size.
    pub fn for_each_neighbor<T: Real>(&self, points: &[Point<T>], i: usize, radius: f64, mut f: impl FnMut(usize)) {
        debug_assert!(radius <= self.cell * (1.0 + 1e-12));
        let p = &points[i];
        let (kx, ky, kz) = Self::key_of(p, self.cell);
        let r2 = radius * radius;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = self.cells.get(&(kx + dx, ky + dy, kz + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        let j = j as usize;
                        if j == i {
                            continue;
                        }
                        let q = &points[j];
                        let d2 = to_f64((q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y) + (q.z - p.z) * (q.z - p.z));
                        if d2 <= r2 {
                            f(j);
                        }
                    }
                }
            }
        }
    }
}
