use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square-cell accumulator over an axis-aligned x-y region. Cells are stored
/// row-major with rows along y (row 0 at the lowest y) and columns along x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub origin: [f64; 2],
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    pub sum: Vec<f64>,
    pub count: Vec<u64>,
    /// Samples whose position fell outside the grid.
    pub ignored: u64,
}

/// Extent and resolution of a heat map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub cell: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_range: [-56.0, 56.0], y_range: [-56.0, 56.0], cell: 4.0 }
    }
}

fn cells(range: [f64; 2], cell: f64) -> Result<usize> {
    let n = (range[1] - range[0]) / cell;
    let rounded = n.round();
    if !(rounded >= 1.0) || (n - rounded).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "heat map range [{}, {}] is not a whole number of {cell} m cells",
            range[0], range[1]
        )));
    }
    Ok(rounded as usize)
}

impl HeatMap {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        if !(grid.cell > 0.0) {
            return Err(Error::validation("heat map cell size must be positive"));
        }
        let nx = cells(grid.x_range, grid.cell)?;
        let ny = cells(grid.y_range, grid.cell)?;
        Ok(Self {
            origin: [grid.x_range[0], grid.y_range[0]],
            cell: grid.cell,
            nx,
            ny,
            sum: vec![0.0; nx * ny],
            count: vec![0; nx * ny],
            ignored: 0,
        })
    }

    /// Cell `(ix, iy)` containing the point; cells are half-open except that
    /// the upper grid border belongs to the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let idx = |v: f64, o: f64, n: usize| {
            let f = (v - o) / self.cell;
            if !(f >= 0.0) || f > n as f64 {
                return None;
            }
            Some((f.floor() as usize).min(n - 1))
        };
        Some((idx(x, self.origin[0], self.nx)?, idx(y, self.origin[1], self.ny)?))
    }

    pub fn add(&mut self, x: f64, y: f64, value: f64) {
        match self.cell_of(x, y) {
            Some((ix, iy)) => {
                let k = iy * self.nx + ix;
                self.sum[k] += value;
                self.count[k] += 1;
            }
            None => self.ignored += 1,
        }
    }

    /// Adds another map of the same geometry.
    pub fn merge(&mut self, other: &HeatMap) -> Result<()> {
        if (self.nx, self.ny) != (other.nx, other.ny) || self.origin != other.origin || self.cell != other.cell {
            return Err(Error::validation("cannot merge heat maps of different geometry"));
        }
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.count[k] += other.count[k];
        }
        self.ignored += other.ignored;
        Ok(())
    }

    /// Mean of a cell; `None` when no sample landed in it.
    pub fn mean(&self, ix: usize, iy: usize) -> Option<f64> {
        let k = iy * self.nx + ix;
        (self.count[k] > 0).then(|| self.sum[k] / self.count[k] as f64)
    }

    /// Per-cell means, zero for empty cells, row-major.
    pub fn means(&self) -> Vec<f64> {
        (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| self.mean(ix, iy).unwrap_or(0.0))
            .collect()
    }

    /// Center of a cell in world coordinates.
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + (ix as f64 + 0.5) * self.cell,
            self.origin[1] + (iy as f64 + 0.5) * self.cell,
        ]
    }

    /// CSV text: one line per row, comma-separated cell means.
    pub fn to_csv(&self) -> String {
        let means = self.means();
        let mut out = String::new();
        for row in means.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_grid_is_28_by_28() {
        let h = HeatMap::new(&GridSpec::default()).unwrap();
        assert_eq!((h.nx, h.ny), (28, 28));
        assert_eq!(h.cell_of(0.0, 0.0), Some((14, 14)));
        assert_eq!(h.cell_of(-56.0, -56.0), Some((0, 0)));
        assert_eq!(h.cell_of(56.0, 56.0), Some((27, 27)));
        assert_eq!(h.cell_of(56.1, 0.0), None);
    }

    #[test]
    fn rejects_fractional_grid() {
        assert!(HeatMap::new(&GridSpec { cell: 5.0, ..Default::default() }).is_err());
    }

    #[test]
    fn empty_map_is_zero() {
        let h = HeatMap::new(&GridSpec::default()).unwrap();
        assert!(h.means().iter().all(|&v| v == 0.0));
        assert_eq!(h.to_csv().lines().count(), 28);
    }

    #[test]
    fn outside_samples_are_counted() {
        let mut h = HeatMap::new(&GridSpec::default()).unwrap();
        h.add(100.0, 0.0, 1.0);
        assert_eq!(h.ignored, 1);
        assert_eq!(h.count.iter().sum::<u64>(), 0);
    }

    proptest! {
        #[test]
        fn merge_is_order_independent(samples in prop::collection::vec((-60.0f64..60.0, -60.0f64..60.0, 0.0f64..100.0), 0..60), split in 0usize..60) {
            let g = GridSpec::default();
            let mut all = HeatMap::new(&g).unwrap();
            for &(x, y, v) in &samples {
                all.add(x, y, v);
            }
            let split = split.min(samples.len());
            let (mut a, mut b) = (HeatMap::new(&g).unwrap(), HeatMap::new(&g).unwrap());
            for &(x, y, v) in &samples[..split] {
                a.add(x, y, v);
            }
            for &(x, y, v) in &samples[split..] {
                b.add(x, y, v);
            }
            b.merge(&a).unwrap();
            prop_assert_eq!(&b.count, &all.count);
            prop_assert_eq!(b.ignored, all.ignored);
            for (p, q) in b.sum.iter().zip(&all.sum) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }
    }
}
