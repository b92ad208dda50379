//! Gaussian point noise and extrinsic (pose) perturbation.
//!
//! All randomness comes from a ChaCha stream selected by `(seed, stream key)`,
//! and every point consumes a fixed number of words, so the noise for a given
//! point depends only on `(seed, sensor, frame, ordinal)`.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloudFrame, Pose, Quaternion, Vec3};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Per-axis point noise standard deviation, meters (variance 0.01 m^2).
    pub point_sigma: f64,
    /// Per-axis sensor position noise, meters.
    pub pos_sigma: f64,
    /// Per-axis sensor orientation noise, radians (variance 2.5e-5 rad^2).
    pub rot_sigma: f64,
    pub seed: u64,
    /// Draw a fresh pose error every frame instead of once per recording.
    pub per_frame_pose: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            point_sigma: 0.1,
            pos_sigma: 0.1,
            rot_sigma: 5e-3,
            seed: 0,
            per_frame_pose: false,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            point_sigma: 0.0,
            pos_sigma: 0.0,
            rot_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("point_sigma", self.point_sigma),
            ("pos_sigma", self.pos_sigma),
            ("rot_sigma", self.rot_sigma),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("noise {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Purpose tags keep the point, pose and downsampling streams apart.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum StreamKind {
    Point = 1,
    Pose = 2,
    Ground = 3,
    Scene = 4,
}

const RECORDING: u64 = u64::MAX;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream keyed by `(seed, kind, sensor, index)`.
pub fn keyed_rng(seed: u64, kind: StreamKind, sensor: u32, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = splitmix(splitmix(kind as u64 ^ ((sensor as u64) << 8)) ^ index);
    rng.set_stream(key);
    rng
}

/// Uniform in (0, 1], 53-bit resolution.
pub fn unit_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box-Muller pair of independent standard normals (fixed 2-word consumption).
pub fn normal_pair(rng: &mut impl RngCore) -> (f64, f64) {
    let r = (-2.0 * unit_open(rng).ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * unit_open(rng)).sin_cos();
    (r * c, r * s)
}

fn normal3(rng: &mut impl RngCore) -> [f64; 3] {
    let (a, b) = normal_pair(rng);
    let (c, _) = normal_pair(rng);
    [a, b, c]
}

/// Adds i.i.d. `N(0, point_sigma^2)` to x, y and z of every point.
pub fn perturb_points<T: Real>(frame: &PointCloudFrame<T>, spec: &NoiseSpec) -> PointCloudFrame<T> {
    if spec.point_sigma == 0.0 {
        return frame.clone();
    }
    let mut rng = keyed_rng(spec.seed, StreamKind::Point, frame.sensor_id, frame.frame_index);
    let sigma = spec.point_sigma;
    let points = frame
        .points
        .iter()
        .map(|p| {
            let n = normal3(&mut rng);
            Point {
                x: p.x + lit(n[0] * sigma),
                y: p.y + lit(n[1] * sigma),
                z: p.z + lit(n[2] * sigma),
                intensity: p.intensity,
            }
        })
        .collect();
    PointCloudFrame {
        points,
        ..frame.clone()
    }
}

/// Perturbs a sensor pose: Gaussian translation offset per axis, and a small
/// rotation with per-axis angles `N(0, rot_sigma^2)` applied in the world frame.
///
/// `frame` is ignored unless `spec.per_frame_pose` is set.
pub fn perturb_pose<T: Real>(pose: &Pose<T>, spec: &NoiseSpec, sensor_id: u32, frame: u64) -> Pose<T> {
    if spec.pos_sigma == 0.0 && spec.rot_sigma == 0.0 {
        return *pose;
    }
    let index = if spec.per_frame_pose { frame } else { RECORDING };
    let mut rng = keyed_rng(spec.seed, StreamKind::Pose, sensor_id, index);
    let dt = normal3(&mut rng).map(|v| v * spec.pos_sigma);
    let dr = normal3(&mut rng).map(|v| v * spec.rot_sigma);
    let delta = Quaternion::from_rotation_vector(Vec3::new(lit(dr[0]), lit(dr[1]), lit(dr[2])));
    let translation = pose.translation() + Vec3::new(lit(dt[0]), lit(dt[1]), lit(dt[2]));
    Pose {
        translation: translation.to_array(),
        rotation: (delta * pose.rotation).normalized().unwrap_or(pose.rotation),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(n: usize) -> PointCloudFrame<f64> {
        PointCloudFrame::new(
            3,
            17,
            0.85,
            (0..n).map(|i| Point::new(i as f64, 0.0, 1.0, 0.3)).collect(),
        )
    }

    #[test]
    fn zero_sigma_is_identity() {
        let f = frame(100);
        assert_eq!(perturb_points(&f, &NoiseSpec::none()), f);
        let p = Pose::new(Vec3::new(1.0, 2.0, 6.0), Quaternion::from_euler(0.0, 0.1, 2.0)).unwrap();
        assert_eq!(perturb_pose(&p, &NoiseSpec::none(), 1, 0), p);
    }

    #[test]
    fn deterministic_per_seed() {
        let f = frame(1000);
        let spec = NoiseSpec { seed: 42, ..NoiseSpec::default() };
        assert_eq!(perturb_points(&f, &spec), perturb_points(&f, &spec));
        let other = NoiseSpec { seed: 43, ..spec };
        assert_ne!(perturb_points(&f, &spec), perturb_points(&f, &other));
    }

    #[test]
    fn noise_depends_on_ordinal_not_frame_length() {
        // a prefix of the frame gets the same noise as in the full frame
        let spec = NoiseSpec { seed: 5, ..NoiseSpec::default() };
        let full = perturb_points(&frame(500), &spec);
        let part = perturb_points(&frame(200), &spec);
        assert_eq!(&full.points[..200], &part.points[..]);
    }

    #[test]
    fn intensity_untouched() {
        let spec = NoiseSpec { seed: 1, ..NoiseSpec::default() };
        assert!(perturb_points(&frame(50), &spec).points.iter().all(|p| p.intensity == 0.3));
    }

    #[test]
    fn pose_noise_static_unless_per_frame() {
        let p = Pose::<f64>::identity();
        let spec = NoiseSpec { seed: 9, ..NoiseSpec::default() };
        assert_eq!(perturb_pose(&p, &spec, 2, 0), perturb_pose(&p, &spec, 2, 100));
        assert_ne!(perturb_pose(&p, &spec, 2, 0), perturb_pose(&p, &spec, 3, 0));
        let per = NoiseSpec { per_frame_pose: true, ..spec };
        assert_ne!(perturb_pose(&p, &per, 2, 0), perturb_pose(&p, &per, 2, 1));
        perturb_pose(&p, &per, 2, 1).validate().unwrap();
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(NoiseSpec { pos_sigma: -1.0, ..NoiseSpec::default() }.validate().is_err());
    }

    #[test]
    fn mean_displacement_is_zero() {
        let n = 100_000;
        let spec = NoiseSpec { seed: 77, ..NoiseSpec::default() };
        let f = PointCloudFrame::new(1, 0, 0.0, vec![Point::new(1.0, 2.0, 3.0, 1.0); n]);
        let g = perturb_points(&f, &spec);
        let bound = 3.0 * 0.1 / (n as f64).sqrt();
        let mean = |sel: fn(&Point<f64>) -> f64| g.points.iter().map(sel).sum::<f64>() / n as f64;
        assert!((mean(|p| p.x) - 1.0).abs() < bound);
        assert!((mean(|p| p.y) - 2.0).abs() < bound);
        assert!((mean(|p| p.z) - 3.0).abs() < bound);
    }

    #[test]
    fn rotation_noise_statistics() {
        // per-axis rotation-vector components have std rot_sigma; the total
        // angle has RMS sqrt(3) * rot_sigma
        let n = 100_000;
        let sigma = 5e-3;
        let base = Pose::<f64>::identity();
        let mut sq = 0.0;
        let mut sq_axis = 0.0;
        for s in 0..n {
            let spec = NoiseSpec { seed: s as u64, pos_sigma: 0.0, ..NoiseSpec::default() };
            let p = perturb_pose(&base, &spec, 1, 0);
            let a = p.rotation.angle();
            sq += a * a;
            // small-angle rotation vector x-component is 2 * q.x
            sq_axis += (2.0 * p.rotation.x).powi(2);
        }
        let rms = (sq / n as f64).sqrt();
        let expected = 3f64.sqrt() * sigma;
        assert!((rms / expected - 1.0).abs() < 0.05, "rms {rms}");
        let axis_std = (sq_axis / n as f64).sqrt();
        assert!((axis_std / sigma - 1.0).abs() < 0.05, "axis std {axis_std}");
    }

    #[test]
    fn translation_noise_statistics() {
        let n = 100_000;
        let base = Pose::<f64>::identity();
        let mut sq = 0.0;
        for s in 0..n {
            let spec = NoiseSpec { seed: s as u64, rot_sigma: 0.0, ..NoiseSpec::default() };
            sq += perturb_pose(&base, &spec, 4, 0).translation[1].powi(2);
        }
        assert!(((sq / n as f64).sqrt() / 0.1 - 1.0).abs() < 0.05);
    }
}
