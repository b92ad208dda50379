use super::{Pose, Vec3};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sensor id reserved for fused clouds.
pub const FUSED_SENSOR_ID: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub intensity: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T, z: T, intensity: T) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn position(&self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn with_position(self, p: Vec3<T>) -> Self {
        Self {
            x: p.x,
            y: p.y,
            z: p.z,
            intensity: self.intensity,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position().is_finite() && self.intensity.is_finite()
    }
}

/// One sensor's (or the fused) point set at one timestamp.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloudFrame<T> {
    pub sensor_id: u32,
    pub frame_index: u64,
    /// Seconds since the start of the recording.
    pub timestamp: f64,
    pub points: Vec<Point<T>>,
    /// Originating sensor per point; empty unless the frame was fused.
    pub provenance: Vec<u32>,
}

impl<T: Real> PointCloudFrame<T> {
    pub fn new(sensor_id: u32, frame_index: u64, timestamp: f64, points: Vec<Point<T>>) -> Self {
        Self {
            sensor_id,
            frame_index,
            timestamp,
            points,
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.points.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(format!(
                "frame {} of sensor {}: point {i} is not finite",
                self.frame_index, self.sensor_id
            )));
        }
        if !self.provenance.is_empty() && self.provenance.len() != self.points.len() {
            return Err(Error::validation("provenance length differs from point count"));
        }
        Ok(())
    }

    /// Keeps the points for which `keep` is true, carrying provenance along.
    pub fn retain_points(&mut self, mut keep: impl FnMut(usize, &Point<T>) -> bool) {
        let mask: Vec<bool> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| keep(i, p))
            .collect();
        let mut it = mask.iter();
        self.points.retain(|_| *it.next().unwrap());
        if !self.provenance.is_empty() {
            let mut it = mask.iter();
            self.provenance.retain(|_| *it.next().unwrap());
        }
    }
}

/// Maps every point of `frame` through `pose`. Intensity, ordering and
/// metadata are preserved.
pub fn transform_points<T: Real>(pose: &Pose<T>, frame: &PointCloudFrame<T>) -> Result<PointCloudFrame<T>> {
    pose.validate()?;
    frame.validate()?;
    let points = frame
        .points
        .iter()
        .map(|p| p.with_position(pose.apply(p.position())))
        .collect();
    Ok(PointCloudFrame {
        points,
        ..frame.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quaternion;
    use proptest::prelude::*;

    fn frame(pts: &[[f64; 3]]) -> PointCloudFrame<f64> {
        PointCloudFrame::new(
            2,
            7,
            0.35,
            pts.iter().map(|p| Point::new(p[0], p[1], p[2], 0.5)).collect(),
        )
    }

    #[test]
    fn identity_pose_keeps_frame() {
        let f = frame(&[[1.0, 2.0, 3.0], [-4.0, 0.5, 0.0]]);
        assert_eq!(transform_points(&Pose::identity(), &f).unwrap(), f);
    }

    #[test]
    fn pure_translation() {
        let f = frame(&[[0.0, 0.0, 0.0]]);
        let pose = Pose::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let out = transform_points(&pose, &f).unwrap();
        assert_eq!(out.points[0].position(), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(out.points[0].intensity, 0.5);
        assert_eq!((out.sensor_id, out.frame_index), (2, 7));
    }

    #[test]
    fn quarter_turn_about_z() {
        let f = frame(&[[1.0, 0.0, 0.0]]);
        let pose = Pose::new(Vec3::zeros(), Quaternion::from_yaw(std::f64::consts::FRAC_PI_2)).unwrap();
        let p = transform_points(&pose, &f).unwrap().points[0].position();
        assert!((p - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn non_finite_point_rejected() {
        let f = frame(&[[0.0, f64::NAN, 0.0]]);
        assert!(matches!(
            transform_points(&Pose::identity(), &f),
            Err(Error::Validation(_))
        ));
    }

    proptest! {
        #[test]
        fn rigid_transform_preserves_distances(
            pts in prop::collection::vec(prop::array::uniform3(-100.0f64..100.0), 2..20),
            t in prop::array::uniform3(-100.0f64..100.0),
            r in prop::array::uniform3(-3.0f64..3.0),
        ) {
            let f = frame(&pts);
            let pose = Pose::new(Vec3::from_array(t), Quaternion::from_rotation_vector(Vec3::from_array(r))).unwrap();
            let g = transform_points(&pose, &f).unwrap();
            for i in 0..f.len() {
                for j in (i + 1)..f.len() {
                    let d0 = (f.points[i].position() - f.points[j].position()).norm();
                    let d1 = (g.points[i].position() - g.points[j].position()).norm();
                    prop_assert!((d0 - d1).abs() < 1e-9);
                }
            }
        }
    }
}
