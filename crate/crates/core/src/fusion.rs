//! Fusion of per-sensor frames into the world frame and pre-processing:
//! ROI crop, ground downsampling, zero-intensity removal and intensity
//! normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{transform_points, PointCloudFrame, Pose, FUSED_SENSOR_ID};
use crate::noise::{keyed_rng, uniform01, StreamKind};
use crate::scalar::{lit, Real};
use crate::spatial::HashGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub z_range: [f64; 2],
    /// Half-height of the ground band around z = 0, meters.
    pub ground_band: f64,
    /// Probability that a ground-band point survives downsampling.
    pub ground_keep_fraction: f64,
}

impl Default for RoiSpec {
    fn default() -> Self {
        Self {
            x_range: [-56.0, 56.0],
            y_range: [-56.0, 56.0],
            z_range: [-0.05, 4.0],
            ground_band: 0.05,
            ground_keep_fraction: 0.10,
        }
    }
}

impl RoiSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("x_range", self.x_range), ("y_range", self.y_range), ("z_range", self.z_range)] {
            if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::validation(format!("roi {name} must be a finite interval with lo < hi")));
            }
        }
        if !(self.ground_band >= 0.0) {
            return Err(Error::validation("roi ground_band must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.ground_keep_fraction) {
            return Err(Error::validation("roi ground_keep_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (self.x_range[0]..=self.x_range[1]).contains(&x) && (self.y_range[0]..=self.y_range[1]).contains(&y)
    }
}

/// Default timestamp tolerance: half the scan period at 20 Hz.
pub const DEFAULT_SYNC_TOLERANCE: f64 = 0.025;

/// Transforms each frame by its pose and concatenates the results. The fused
/// frame has sensor id 0 and records the source sensor of every point.
pub fn fuse<T: Real>(frames: &[(PointCloudFrame<T>, Pose<T>)], tolerance: f64) -> Result<PointCloudFrame<T>> {
    let Some((first, _)) = frames.first() else {
        return Err(Error::validation("fuse needs at least one frame"));
    };
    let total: usize = frames.iter().map(|(f, _)| f.len()).sum();
    let mut out = PointCloudFrame::new(FUSED_SENSOR_ID, first.frame_index, first.timestamp, Vec::with_capacity(total));
    out.provenance.reserve(total);
    for (frame, pose) in frames {
        if (frame.timestamp - first.timestamp).abs() > tolerance {
            return Err(Error::validation(format!(
                "sensor {} frame {} at t={:.4}s is not aligned with t={:.4}s (tolerance {tolerance}s)",
                frame.sensor_id, frame.frame_index, frame.timestamp, first.timestamp
            )));
        }
        let world = transform_points(pose, frame)?;
        if world.provenance.is_empty() {
            out.provenance.extend(std::iter::repeat(frame.sensor_id).take(world.len()));
        } else {
            out.provenance.extend_from_slice(&world.provenance);
        }
        out.points.extend(world.points);
    }
    Ok(out)
}

/// Keeps the points inside the closed axis-aligned region.
pub fn crop_roi<T: Real>(frame: &PointCloudFrame<T>, roi: &RoiSpec) -> PointCloudFrame<T> {
    let b = |r: [f64; 2]| (lit::<T>(r[0]), lit::<T>(r[1]));
    let (x0, x1) = b(roi.x_range);
    let (y0, y1) = b(roi.y_range);
    let (z0, z1) = b(roi.z_range);
    let mut out = frame.clone();
    out.retain_points(|_, p| p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1 && p.z >= z0 && p.z <= z1);
    out
}

/// Keeps each point with `|z| <= ground_band` with probability
/// `ground_keep_fraction`; all other points are untouched.
pub fn downsample_ground<T: Real>(frame: &PointCloudFrame<T>, roi: &RoiSpec, seed: u64) -> PointCloudFrame<T> {
    if roi.ground_keep_fraction >= 1.0 {
        return frame.clone();
    }
    let band = lit::<T>(roi.ground_band);
    let mut rng = keyed_rng(seed, StreamKind::Ground, frame.sensor_id, frame.frame_index);
    let keep = roi.ground_keep_fraction;
    let mut out = frame.clone();
    out.retain_points(|_, p| {
        // one draw per point keeps the decision tied to the point ordinal
        let u = uniform01(&mut rng);
        p.z.abs() > band || u < keep
    });
    out
}

/// Maximum raw intensity over a set of frames (the dataset calibration pass).
pub fn intensity_max<'a, T: Real + 'a>(frames: impl IntoIterator<Item = &'a PointCloudFrame<T>>) -> T {
    frames
        .into_iter()
        .flat_map(|f| f.points.iter())
        .fold(T::zero(), |m, p| m.max(p.intensity))
}

/// Drops zero-intensity points and divides the rest by the dataset maximum.
pub fn filter_and_normalize_intensity<T: Real>(frame: &PointCloudFrame<T>, dataset_max: T) -> Result<PointCloudFrame<T>> {
    if frame.points.iter().any(|p| p.intensity < T::zero()) {
        return Err(Error::validation("negative intensity before normalization"));
    }
    let mut out = frame.clone();
    out.retain_points(|_, p| p.intensity > T::zero());
    if out.is_empty() {
        return Ok(out);
    }
    if !(dataset_max > T::zero()) {
        return Err(Error::validation("dataset intensity maximum must be positive"));
    }
    for p in &mut out.points {
        p.intensity = (p.intensity / dataset_max).min(T::one());
    }
    Ok(out)
}

/// Calibration pass plus normalization over a whole dataset.
pub fn normalize_dataset<T: Real>(frames: &[PointCloudFrame<T>]) -> Result<(Vec<PointCloudFrame<T>>, T)> {
    let max = intensity_max(frames);
    let out = frames
        .iter()
        .map(|f| filter_and_normalize_intensity(f, max))
        .collect::<Result<_>>()?;
    Ok((out, max))
}

/// Removes points with fewer than `min_neighbors` other points within `radius`.
pub fn radius_outlier_filter<T: Real>(frame: &PointCloudFrame<T>, radius: f64, min_neighbors: usize) -> PointCloudFrame<T> {
    let grid = HashGrid::new(&frame.points, radius);
    let keep: Vec<bool> = (0..frame.len())
        .map(|i| {
            let mut n = 0;
            grid.for_each_neighbor(&frame.points, i, radius, |_| n += 1);
            n >= min_neighbors
        })
        .collect();
    let mut out = frame.clone();
    out.retain_points(|i, _| keep[i]);
    out
}

/// Full pre-processing chain applied to a world-frame cloud.
pub fn preprocess<T: Real>(frame: &PointCloudFrame<T>, roi: &RoiSpec, seed: u64, intensity_max: T) -> Result<PointCloudFrame<T>> {
    let cropped = crop_roi(frame, roi);
    let thinned = downsample_ground(&cropped, roi, seed);
    filter_and_normalize_intensity(&thinned, intensity_max)
}
