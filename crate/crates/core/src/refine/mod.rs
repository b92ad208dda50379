//! Trajectory refinement: fixed-interval smoothing of position, velocity and
//! acceleration, one box size per object and triangular-kernel heading
//! smoothing.

mod rts;

pub use rts::{rts_axis, AxisEstimate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ClassGroup, ObjectClass, OrientedBox, Vec3};
use crate::scalar::{count, lit, wrap_angle, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFrame<T> {
    pub frame_index: u64,
    /// Seconds.
    pub t: f64,
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub acceleration: Vec3<T>,
    pub yaw: T,
    /// Length, width, height.
    pub dims: [T; 3],
    pub points_in_box: usize,
}

impl<T: Real> TrajectoryFrame<T> {
    pub fn bbox(&self) -> OrientedBox<T> {
        OrientedBox::new_unchecked(self.position, self.dims[0], self.dims[1], self.dims[2], self.yaw)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub track_id: u64,
    pub class: ObjectClass,
    pub frames: Vec<TrajectoryFrame<T>>,
}

impl<T: Real> Trajectory<T> {
    /// Frames are sorted by index; duplicates are rejected.
    pub fn new(track_id: u64, class: ObjectClass, mut frames: Vec<TrajectoryFrame<T>>) -> Result<Self> {
        frames.sort_by_key(|f| f.frame_index);
        if frames.windows(2).any(|w| w[0].frame_index == w[1].frame_index) {
            return Err(Error::validation(format!("trajectory {track_id} has duplicate frame indices")));
        }
        Ok(Self { track_id, class, frames })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// Arc length of the position polyline, meters.
    pub fn length(&self) -> T {
        self.frames
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .fold(T::zero(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingModel {
    /// White-jerk spectral density for cars and trucks, m²/s⁵.
    pub jerk_psd_vehicle: f64,
    /// White-jerk spectral density for vulnerable road users, m²/s⁵.
    pub jerk_psd_vru: f64,
    /// Variance of the tracked positions, m².
    pub measurement_variance: f64,
}

impl Default for SmoothingModel {
    fn default() -> Self {
        Self { jerk_psd_vehicle: 1.0, jerk_psd_vru: 0.5, measurement_variance: 0.04 }
    }
}

impl SmoothingModel {
    pub fn jerk_psd(&self, class: ObjectClass) -> f64 {
        match class.group() {
            ClassGroup::Vehicle => self.jerk_psd_vehicle,
            ClassGroup::Vru => self.jerk_psd_vru,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineParams {
    pub model: SmoothingModel,
    /// Triangular heading kernel width in frames (odd).
    pub heading_window: usize,
    /// Minimum speed at which velocity decides the heading sign, m/s.
    pub flip_speed: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self { model: SmoothingModel::default(), heading_window: 7, flip_speed: 0.5 }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        if self.heading_window == 0 || self.heading_window % 2 == 0 {
            return Err(Error::validation("refine heading_window must be odd and >= 1"));
        }
        let m = &self.model;
        if !(m.jerk_psd_vehicle > 0.0 && m.jerk_psd_vru > 0.0 && m.measurement_variance > 0.0) {
            return Err(Error::validation("refine smoothing variances must be positive"));
        }
        if !(self.flip_speed >= 0.0) {
            return Err(Error::validation("refine flip_speed must be >= 0"));
        }
        Ok(())
    }
}

/// RTS smoothing of the positions with a constant-acceleration model per
/// axis; fills position, velocity and acceleration. Trajectories with fewer
/// than two frames are returned unchanged.
pub fn smooth<T: Real>(traj: &Trajectory<T>, model: &SmoothingModel) -> Trajectory<T> {
    let mut out = traj.clone();
    if traj.frames.len() < 2 {
        return out;
    }
    let t: Vec<T> = traj.frames.iter().map(|f| lit(f.t)).collect();
    let q = lit::<T>(model.jerk_psd(traj.class));
    let r = lit::<T>(model.measurement_variance);
    for axis in 0..3 {
        let z: Vec<T> = traj.frames.iter().map(|f| f.position.to_array()[axis]).collect();
        let est = rts_axis(&t, &z, q, r);
        for (f, s) in out.frames.iter_mut().zip(&est.smoothed) {
            let mut p = f.position.to_array();
            let mut v = f.velocity.to_array();
            let mut a = f.acceleration.to_array();
            p[axis] = s[0];
            v[axis] = s[1];
            a[axis] = s[2];
            f.position = Vec3::from_array(p);
            f.velocity = Vec3::from_array(v);
            f.acceleration = Vec3::from_array(a);
        }
    }
    out
}

/// Dimensions of the frame with the most points inside the box; ties go to
/// the earlier frame.
pub fn fix_dimensions<T: Real>(traj: &Trajectory<T>) -> Option<[T; 3]> {
    let mut best: Option<&TrajectoryFrame<T>> = None;
    for f in &traj.frames {
        if best.map_or(true, |b| f.points_in_box > b.points_in_box) {
            best = Some(f);
        }
    }
    best.map(|f| f.dims)
}

/// Sets every frame's dimensions to [`fix_dimensions`].
pub fn apply_fixed_dimensions<T: Real>(traj: &Trajectory<T>) -> Trajectory<T> {
    let mut out = traj.clone();
    if let Some(dims) = fix_dimensions(traj) {
        for f in &mut out.frames {
            f.dims = dims;
        }
    }
    out
}

/// Triangular kernel of odd width `window`, truncated to the samples that
/// exist around `center` of `len`, normalized to sum to one. Returns
/// `(first index, weights)`.
pub fn triangular_weights<T: Real>(window: usize, center: usize, len: usize) -> (usize, Vec<T>) {
    let half = window / 2;
    let lo = center.saturating_sub(half);
    let hi = (center + half).min(len.saturating_sub(1));
    let raw: Vec<T> = (lo..=hi).map(|i| count::<T>(half + 1 - i.abs_diff(center))).collect();
    let total = raw.iter().fold(T::zero(), |a, &b| a + b);
    (lo, raw.into_iter().map(|w| w / total).collect())
}

/// Removes 2π jumps between consecutive angles.
pub fn unwrap_angles<T: Real>(angles: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = T::zero();
    for (i, &a) in angles.iter().enumerate() {
        if i > 0 {
            let prev = angles[i - 1];
            offset += wrap_angle(a - prev) - (a - prev);
        }
        out.push(a + offset);
    }
    out
}

/// Heading smoothed by a normalized triangular kernel on unwrapped angles,
/// re-wrapped to `(-pi, pi]`.
pub fn smooth_heading<T: Real>(traj: &Trajectory<T>, window: usize) -> Trajectory<T> {
    let mut out = traj.clone();
    if window <= 1 || traj.frames.len() < 2 {
        return out;
    }
    let yaw: Vec<T> = traj.frames.iter().map(|f| f.yaw).collect();
    let unwrapped = unwrap_angles(&yaw);
    let n = yaw.len();
    for (c, f) in out.frames.iter_mut().enumerate() {
        let (lo, w) = triangular_weights::<T>(window, c, n);
        let s = w.iter().enumerate().fold(T::zero(), |acc, (k, &wk)| acc + wk * unwrapped[lo + k]);
        f.yaw = wrap_angle(s);
    }
    out
}

/// Turns the box heading around where it opposes the direction of travel.
/// Slow frames, whose velocity is unreliable, keep the sign closest to the
/// previous frame's heading.
pub fn resolve_heading<T: Real>(traj: &Trajectory<T>, flip_speed: f64) -> Trajectory<T> {
    let mut out = traj.clone();
    let min_speed = lit::<T>(flip_speed);
    let mut prev: Option<T> = None;
    // find the first confident heading so slow leading frames follow it
    let first_fast = traj.frames.iter().position(|f| f.velocity.norm_xy() > min_speed);
    for i in 0..out.frames.len() {
        let f = &out.frames[i];
        let speed = f.velocity.norm_xy();
        let reference = if speed > min_speed {
            Some(f.velocity.y.atan2(f.velocity.x))
        } else if let Some(p) = prev {
            Some(p)
        } else {
            first_fast.map(|j| {
                let v = traj.frames[j].velocity;
                v.y.atan2(v.x)
            })
        };
        let mut yaw = f.yaw;
        if let Some(r) = reference {
            if wrap_angle(yaw - r).abs() > T::FRAC_PI_2() {
                yaw = wrap_angle(yaw + T::PI());
            }
        }
        out.frames[i].yaw = yaw;
        prev = Some(yaw);
    }
    out
}

/// Full refinement: smoothing, fixed dimensions, heading sign and heading
/// smoothing.
pub fn refine<T: Real>(traj: &Trajectory<T>, params: &RefineParams) -> Trajectory<T> {
    let smoothed = smooth(traj, &params.model);
    let fixed = apply_fixed_dimensions(&smoothed);
    let oriented = resolve_heading(&fixed, params.flip_speed);
    smooth_heading(&oriented, params.heading_window)
}

#[cfg(test)]
mod tests;
