use super::{Point, PointCloudFrame, Vec3};
use crate::error::{Error, Result};
use crate::scalar::{lit, wrap_angle, Real};

/// Upright cuboid rotated by `yaw` about the vertical axis. `center` is the
/// geometric center; `length` runs along the heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox<T> {
    pub center: Vec3<T>,
    pub length: T,
    pub width: T,
    pub height: T,
    pub yaw: T,
}

impl<T: Real> OrientedBox<T> {
    /// Validates the dimensions and wraps `yaw` into `(-pi, pi]`.
    pub fn new(center: Vec3<T>, length: T, width: T, height: T, yaw: T) -> Result<Self> {
        let b = Self::new_unchecked(center, length, width, height, yaw);
        b.validate()?;
        Ok(b)
    }

    pub(crate) fn new_unchecked(center: Vec3<T>, length: T, width: T, height: T, yaw: T) -> Self {
        Self {
            center,
            length,
            width,
            height,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.length, self.width, self.height];
        if !self.center.is_finite() || !self.yaw.is_finite() || dims.iter().any(|d| !d.is_finite()) {
            return Err(Error::validation("box contains non-finite values"));
        }
        if dims.iter().any(|&d| d <= T::zero()) {
            return Err(Error::Degenerate(format!(
                "box dimensions must be positive, got l={} w={} h={}",
                self.length, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> [T; 3] {
        [self.length, self.width, self.height]
    }

    /// World point expressed in box coordinates (x along length, y along width).
    pub fn to_local(&self, p: Vec3<T>) -> Vec3<T> {
        let d = p - self.center;
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    pub fn to_world(&self, p: Vec3<T>) -> Vec3<T> {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z) + self.center
    }

    /// Closed containment test (boundary counts as inside).
    pub fn contains(&self, p: Vec3<T>) -> bool {
        let q = self.to_local(p);
        let half = lit::<T>(0.5);
        q.x.abs() <= self.length * half && q.y.abs() <= self.width * half && q.z.abs() <= self.height * half
    }

    /// BEV footprint corners in counter-clockwise order.
    pub fn bev_corners(&self) -> [[T; 2]; 4] {
        let hl = self.length * lit(0.5);
        let hw = self.width * lit(0.5);
        let (s, c) = self.yaw.sin_cos();
        let (cx, cy) = (self.center.x, self.center.y);
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(lx, ly)| [cx + c * lx - s * ly, cy + s * lx + c * ly])
    }

    pub fn bev_area(&self) -> T {
        self.length * self.width
    }

    /// Radius of the circle enclosing the BEV footprint.
    pub fn bev_radius(&self) -> T {
        self.length.hypot(self.width) * lit(0.5)
    }

    pub fn z_min(&self) -> T {
        self.center.z - self.height * lit(0.5)
    }

    pub fn z_max(&self) -> T {
        self.center.z + self.height * lit(0.5)
    }
}

/// Points of `frame` inside `bx` (closed box).
pub fn points_in_box<T: Real>(frame: &PointCloudFrame<T>, bx: &OrientedBox<T>) -> Vec<Point<T>> {
    let r2 = {
        let r = bx.bev_radius();
        r * r
    };
    frame
        .points
        .iter()
        .filter(|p| {
            let dx = p.x - bx.center.x;
            let dy = p.y - bx.center.y;
            dx * dx + dy * dy <= r2 * lit(1.000001) && bx.contains(p.position())
        })
        .copied()
        .collect()
}

/// Count-only variant of [`points_in_box`].
pub fn count_in_box<T: Real>(points: &[Point<T>], bx: &OrientedBox<T>) -> usize {
    let r = bx.bev_radius() * lit(1.000001);
    let r2 = r * r;
    points
        .iter()
        .filter(|p| {
            let dx = p.x - bx.center.x;
            let dy = p.y - bx.center.y;
            dx * dx + dy * dy <= r2 && bx.contains(p.position())
        })
        .count()
}

/// Extents `(h_m, w_m, l_m)` of `points` measured in the box frame of `gt`.
/// An empty set gives zeros.
pub fn min_box_dims<T: Real>(points: &[Point<T>], gt: &OrientedBox<T>) -> (T, T, T) {
    let mut it = points.iter().map(|p| gt.to_local(p.position()));
    let Some(first) = it.next() else {
        return (T::zero(), T::zero(), T::zero());
    };
    let (mut lo, mut hi) = (first, first);
    for q in it {
        lo = Vec3::new(lo.x.min(q.x), lo.y.min(q.y), lo.z.min(q.z));
        hi = Vec3::new(hi.x.max(q.x), hi.y.max(q.y), hi.z.max(q.z));
    }
    let e = hi - lo;
    (e.z.min(gt.height), e.y.min(gt.width), e.x.min(gt.length))
}
