use std::collections::BTreeMap;

use crate::geometry::PointCloudFrame;
use crate::linalg::Matrix;
use crate::scalar::{to_f64, Real};

/// Ground plane `z = a x + b y + c`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroundPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GroundPlane {
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }
}

/// Only points this close to z = 0 are plane candidates, meters.
const CANDIDATE_BAND: f64 = 0.8;
const MIN_SUPPORT: usize = 30;
const ITERATIONS: usize = 4;

fn least_squares(pts: &[[f64; 3]]) -> Option<GroundPlane> {
    let mut ata = Matrix::<f64>::zeros(3, 3);
    let mut atz = [0.0; 3];
    for p in pts {
        let row = [p[0], p[1], 1.0];
        for r in 0..3 {
            atz[r] += row[r] * p[2];
            for c in 0..3 {
                ata[(r, c)] += row[r] * row[c];
            }
        }
    }
    let inv = ata.inverse()?;
    let s: Vec<f64> = (0..3).map(|r| (0..3).map(|c| inv[(r, c)] * atz[c]).sum()).collect();
    Some(GroundPlane { a: s[0], b: s[1], c: s[2] })
}

/// Robust plane fit: least squares over near-ground points, re-fitted on the
/// inliers of the previous fit with a shrinking residual gate. Falls back to
/// `z = 0` when support is too small.
pub fn fit_ground_plane(pts: &[[f64; 3]]) -> GroundPlane {
    let mut inliers: Vec<[f64; 3]> = pts.iter().copied().filter(|p| p[2].abs() <= CANDIDATE_BAND).collect();
    let mut plane = GroundPlane::default();
    for it in 0..ITERATIONS {
        if inliers.len() < MIN_SUPPORT {
            return plane;
        }
        let Some(next) = least_squares(&inliers) else { return plane };
        plane = next;
        let gate = [0.5, 0.35, 0.25, 0.25][it];
        inliers = pts
            .iter()
            .copied()
            .filter(|p| (p[2] - plane.height_at(p[0], p[1])).abs() <= gate)
            .collect();
    }
    plane
}

/// One plane per point source: the provenance sensor for fused frames, the
/// frame's own sensor otherwise. Miscalibrated extrinsics move each sensor's
/// view of the ground rigidly, so each source sees its own plane.
pub fn fit_ground_planes<T: Real>(frame: &PointCloudFrame<T>) -> BTreeMap<u32, GroundPlane> {
    let mut groups: BTreeMap<u32, Vec<[f64; 3]>> = BTreeMap::new();
    for (i, p) in frame.points.iter().enumerate() {
        let src = frame.provenance.get(i).copied().unwrap_or(frame.sensor_id);
        groups.entry(src).or_default().push([to_f64(p.x), to_f64(p.y), to_f64(p.z)]);
    }
    groups.into_iter().map(|(k, v)| (k, fit_ground_plane(&v))).collect()
}

/// Height of every point above the ground plane of its source.
pub fn heights_above_ground<T: Real>(frame: &PointCloudFrame<T>) -> Vec<f64> {
    let planes = fit_ground_planes(frame);
    frame
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let src = frame.provenance.get(i).copied().unwrap_or(frame.sensor_id);
            let (x, y) = (to_f64(p.x), to_f64(p.y));
            to_f64(p.z) - planes[&src].height_at(x, y)
        })
        .collect()
}
