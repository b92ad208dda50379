use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quaternion<T> {
    pub fn identity() -> Self {
        Self {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    /// Builds a quaternion and normalizes it. Zero or non-finite input is rejected.
    pub fn new(w: T, x: T, y: T, z: T) -> Result<Self> {
        Self { w, x, y, z }.normalized()
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if !n.is_finite() || n <= T::epsilon() {
            return Err(Error::validation("quaternion must have finite non-zero norm"));
        }
        // canonical hemisphere keeps serialized poses stable
        let s = if self.w < T::zero() { -n } else { n };
        Ok(Self {
            w: self.w / s,
            x: self.x / s,
            y: self.y / s,
            z: self.z / s,
        })
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let n = axis.norm();
        if n <= T::epsilon() {
            return Self::identity();
        }
        let half = angle / lit(2.0);
        let s = half.sin() / n;
        Self {
            w: half.cos(),
            x: axis.x * s,
            y: axis.y * s,
            z: axis.z * s,
        }
    }

    /// Rotation vector (axis scaled by angle), exact for any magnitude.
    pub fn from_rotation_vector(v: Vec3<T>) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    pub fn from_yaw(yaw: T) -> Self {
        Self::from_axis_angle(Vec3::new(T::zero(), T::zero(), T::one()), yaw)
    }

    /// Intrinsic z-y-x (yaw, then pitch, then roll) Euler angles.
    pub fn from_euler(roll: T, pitch: T, yaw: T) -> Self {
        let e = |axis: [f64; 3], a: T| {
            Self::from_axis_angle(Vec3::new(lit(axis[0]), lit(axis[1]), lit(axis[2])), a)
        };
        e([0.0, 0.0, 1.0], yaw) * e([0.0, 1.0, 0.0], pitch) * e([1.0, 0.0, 0.0], roll)
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn rotate(&self, v: Vec3<T>) -> Vec3<T> {
        let q = Vec3::new(self.x, self.y, self.z);
        let two = lit::<T>(2.0);
        let t = q.cross(&v) * two;
        v + t * self.w + q.cross(&t)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> T {
        let v = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        lit::<T>(2.0) * v.atan2(self.w.abs())
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(&self) -> [[T; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let one = T::one();
        let two = lit::<T>(2.0);
        [
            [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
            [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
            [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Real> Mul for Quaternion<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }
}

/// Rigid transform mapping sensor coordinates into the parent (world) frame:
/// `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Pose<T> {
    pub translation: [T; 3],
    pub rotation: Quaternion<T>,
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self {
            translation: [T::zero(); 3],
            rotation: Quaternion::identity(),
        }
    }

    pub fn new(translation: Vec3<T>, rotation: Quaternion<T>) -> Result<Self> {
        if !translation.is_finite() {
            return Err(Error::validation("pose translation must be finite"));
        }
        Ok(Self {
            translation: translation.to_array(),
            rotation: rotation.normalized()?,
        })
    }

    pub fn from_translation(t: Vec3<T>) -> Self {
        Self {
            translation: t.to_array(),
            rotation: Quaternion::identity(),
        }
    }

    pub fn translation(&self) -> Vec3<T> {
        Vec3::from_array(self.translation)
    }

    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(p) + self.translation()
    }

    /// Maps a world-frame point into this pose's local frame.
    pub fn apply_inverse(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.conjugate().rotate(p - self.translation())
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.conjugate();
        Self {
            translation: (-r.rotate(self.translation())).to_array(),
            rotation: r,
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let rotation = (self.rotation * other.rotation)
            .normalized()
            .unwrap_or_else(|_| Quaternion::identity());
        Self {
            translation: self.apply(other.translation()).to_array(),
            rotation,
        }
    }

    /// Checks finiteness and unit-norm rotation (within `1e-9`).
    pub fn validate(&self) -> Result<()> {
        if !self.translation().is_finite() || !self.rotation.is_finite() {
            return Err(Error::validation("pose contains non-finite values"));
        }
        if (self.rotation.norm() - T::one()).abs() > lit(1e-9) {
            return Err(Error::validation("pose rotation is not a unit quaternion"));
        }
        Ok(())
    }
}

pub fn compose<T: Real>(a: &Pose<T>, b: &Pose<T>) -> Pose<T> {
    a.compose(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Vec3<f64>, b: Vec3<f64>, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn identity_is_neutral() {
        let b = Pose::new(
            Vec3::new(1.0, -2.0, 0.5),
            Quaternion::from_euler(0.1, -0.2, 0.7),
        )
        .unwrap();
        let c = compose(&Pose::identity(), &b);
        assert!(close(c.translation(), b.translation(), 1e-15));
        assert!((c.rotation.w - b.rotation.w).abs() < 1e-15);
    }

    #[test]
    fn translations_add() {
        let a = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let b = Pose::from_translation(Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(compose(&a, &b).translation(), Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let p = Pose::new(
            Vec3::new(3.0, 4.0, 6.0),
            Quaternion::from_euler(0.3, 0.2, -2.5),
        )
        .unwrap();
        let id = compose(&p, &p.inverse());
        assert!(id.translation().norm() < 1e-12);
        assert!(id.rotation.angle() < 1e-12);
    }

    #[test]
    fn zero_quaternion_rejected() {
        assert!(Quaternion::<f64>::new(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rotation_matrix_is_orthonormal() {
        let q = Quaternion::from_euler(0.4f64, -1.1, 2.0);
        let m = q.to_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| m[i][k] * m[j][k]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-12);
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        assert!((det - 1.0).abs() < 1e-12);
    }

    fn arb_pose() -> impl Strategy<Value = Pose<f64>> {
        (
            prop::array::uniform3(-50.0f64..50.0),
            prop::array::uniform3(-3.0f64..3.0),
        )
            .prop_map(|(t, r)| {
                Pose::new(
                    Vec3::from_array(t),
                    Quaternion::from_rotation_vector(Vec3::from_array(r)),
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose(),
                                  p in prop::array::uniform3(-10.0f64..10.0)) {
            let p = Vec3::from_array(p);
            let left = compose(&compose(&a, &b), &c).apply(p);
            let right = compose(&a, &compose(&b, &c)).apply(p);
            prop_assert!(close(left, right, 1e-9));
            prop_assert!(close(compose(&a, &b).apply(p), a.apply(b.apply(p)), 1e-9));
        }
    }
}
