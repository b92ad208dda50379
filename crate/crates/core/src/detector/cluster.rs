use rustc_hash::FxHashMap;

use crate::geometry::{Point, PointCloudFrame};
use crate::scalar::{to_f64, Real};

/// Density-based clustering: points with at least `min_core_neighbors`
/// neighbors within `radius` are core points, core points within `radius` of
/// each other share a cluster, and border points join the cluster of their
/// first core neighbor. Clusters smaller than `min_points` are dropped.
///
/// Returns point indices per cluster, ordered by each cluster's smallest index.
pub fn cluster_points<T: Real>(
    frame: &PointCloudFrame<T>,
    radius: f64,
    min_core_neighbors: usize,
    min_points: usize,
    eligible: impl Fn(usize) -> bool,
) -> Vec<Vec<usize>> {
    let pts = &frame.points;
    let active: Vec<u32> = (0..pts.len()).filter(|&i| eligible(i)).map(|i| i as u32).collect();
    if active.is_empty() {
        return Vec::new();
    }
    let grid = CellGrid::new(pts, &active, radius);
    let r2 = radius * radius;
    let close = |i: usize, j: usize| {
        let (p, q) = (&pts[i], &pts[j]);
        to_f64((q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y) + (q.z - p.z) * (q.z - p.z)) <= r2
    };

    // Core test with early exit, one neighbor-cell lookup per cell.
    let mut core = vec![false; pts.len()];
    let mut around: Vec<&[u32]> = Vec::with_capacity(27);
    for c in 0..grid.len() {
        grid.neighbors(c, &mut around);
        for &i in grid.members(c) {
            let i = i as usize;
            let mut n = 0;
            'count: for bucket in &around {
                for &j in *bucket {
                    let j = j as usize;
                    if j != i && close(i, j) {
                        n += 1;
                        if n >= min_core_neighbors {
                            break 'count;
                        }
                    }
                }
            }
            core[i] = n >= min_core_neighbors;
        }
    }

    // Core points within the radius of each other share a component.
    let mut uf = UnionFind::new(pts.len());
    for c in 0..grid.len() {
        grid.neighbors(c, &mut around);
        for &i in grid.members(c) {
            let i = i as usize;
            if !core[i] {
                continue;
            }
            for bucket in &around {
                for &j in *bucket {
                    let j = j as usize;
                    if j > i && core[j] && uf.find(i) != uf.find(j) && close(i, j) {
                        uf.union(i, j);
                    }
                }
            }
        }
    }

    // Components are numbered by their smallest core index, which is the
    // order a seed-ordered expansion would discover them in.
    const NONE: u32 = u32::MAX;
    let mut first_core = vec![NONE; pts.len()];
    for &i in &active {
        let i = i as usize;
        if core[i] {
            let root = uf.find(i);
            first_core[root] = first_core[root].min(i as u32);
        }
    }
    let mut label = vec![NONE; pts.len()];
    for &i in &active {
        let i = i as usize;
        if core[i] {
            label[i] = first_core[uf.find(i)];
        }
    }
    // Border points join the earliest-discovered cluster among their core neighbors.
    for c in 0..grid.len() {
        grid.neighbors(c, &mut around);
        for &i in grid.members(c) {
            let i = i as usize;
            if core[i] {
                continue;
            }
            let mut best = NONE;
            for bucket in &around {
                for &j in *bucket {
                    let j = j as usize;
                    if core[j] && close(i, j) {
                        best = best.min(first_core[uf.find(j)]);
                    }
                }
            }
            label[i] = best;
        }
    }

    let mut by_label: FxHashMap<u32, Vec<usize>> = FxHashMap::default();
    for &i in &active {
        let l = label[i as usize];
        if l != NONE {
            by_label.entry(l).or_default().push(i as usize);
        }
    }
    let mut clusters: Vec<Vec<usize>> = by_label.into_values().filter(|c| c.len() >= min_points).collect();
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// Occupied cells of side `radius`, each with its member points in index order.
struct CellGrid {
    keys: Vec<(i32, i32, i32)>,
    index: FxHashMap<(i32, i32, i32), usize>,
    members: Vec<Vec<u32>>,
}

impl CellGrid {
    fn new<T: Real>(pts: &[Point<T>], active: &[u32], cell: f64) -> Self {
        let mut index: FxHashMap<(i32, i32, i32), usize> = FxHashMap::default();
        let mut keys = Vec::new();
        let mut members: Vec<Vec<u32>> = Vec::new();
        for &i in active {
            let p = &pts[i as usize];
            let key = (
                (to_f64(p.x) / cell).floor() as i32,
                (to_f64(p.y) / cell).floor() as i32,
                (to_f64(p.z) / cell).floor() as i32,
            );
            let c = *index.entry(key).or_insert_with(|| {
                keys.push(key);
                members.push(Vec::new());
                keys.len() - 1
            });
            members[c].push(i);
        }
        Self { keys, index, members }
    }

    fn len(&self) -> usize {
        self.keys.len()
    }

    fn members(&self, c: usize) -> &[u32] {
        &self.members[c]
    }

    fn neighbors<'a>(&'a self, c: usize, out: &mut Vec<&'a [u32]>) {
        out.clear();
        let (x, y, z) = self.keys[c];
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(&n) = self.index.get(&(x + dx, y + dy, z + dz)) {
                        out.push(&self.members[n]);
                    }
                }
            }
        }
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] as usize != i {
            let p = self.parent[i] as usize;
            self.parent[i] = self.parent[p];
            i = p;
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo as u32;
        }
    }
}
