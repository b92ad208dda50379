use crate::geometry::{OrientedBox, Point, Vec3};
use crate::scalar::{lit, Real};

/// Smallest extent a fitted box may have along any axis, meters.
pub const MIN_EXTENT: f64 = 0.05;

fn cross<T: Real>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; counter-clockwise hull without collinear points.
pub fn convex_hull<T: Real>(pts: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut p: Vec<[T; 2]> = pts.to_vec();
    p.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<[T; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[T; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= T::zero() {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Canonical yaw in `(-pi/2, pi/2]` (rectangles are symmetric under pi).
fn half_turn<T: Real>(mut yaw: T) -> T {
    let pi = T::PI();
    let half = T::FRAC_PI_2();
    while yaw > half {
        yaw -= pi;
    }
    while yaw <= -half {
        yaw += pi;
    }
    yaw
}

/// Minimum-area rectangle around the BEV projection of `points` (rotating
/// calipers over the convex hull) plus the vertical extent. `l >= w`, with the
/// yaw along the long side.
pub fn fit_box<T: Real>(points: &[Point<T>]) -> Option<OrientedBox<T>> {
    if points.is_empty() {
        return None;
    }
    let min_ext = lit::<T>(MIN_EXTENT);
    let (z_lo, z_hi) = points
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    let xy: Vec<[T; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
    let hull = convex_hull(&xy);

    // (area, yaw, center, along, across)
    let mut best: Option<(T, T, [T; 2], T, T)> = None;
    let n = hull.len();
    let edges = if n >= 3 { n } else { 1 };
    for i in 0..edges {
        let (a, b) = if n >= 2 { (hull[i], hull[(i + 1) % n]) } else { (hull[0], hull[0]) };
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        let (ux, uy) = if len > T::zero() { (dx / len, dy / len) } else { (T::one(), T::zero()) };
        let (mut s0, mut s1, mut t0, mut t1) = (T::infinity(), T::neg_infinity(), T::infinity(), T::neg_infinity());
        for q in &hull {
            let s = q[0] * ux + q[1] * uy;
            let t = -q[0] * uy + q[1] * ux;
            s0 = s0.min(s);
            s1 = s1.max(s);
            t0 = t0.min(t);
            t1 = t1.max(t);
        }
        let area = (s1 - s0) * (t1 - t0);
        if best.as_ref().map_or(true, |b| area < b.0) {
            let (sc, tc) = ((s0 + s1) * lit(0.5), (t0 + t1) * lit(0.5));
            let center = [sc * ux - tc * uy, sc * uy + tc * ux];
            best = Some((area, uy.atan2(ux), center, s1 - s0, t1 - t0));
        }
    }
    let (_, mut yaw, center, along, across) = best?;
    let (mut l, mut w) = (along, across);
    if w > l {
        std::mem::swap(&mut l, &mut w);
        yaw += T::FRAC_PI_2();
    }
    // a hair of slack keeps boundary points inside despite rounding
    let slack = lit::<T>(1e-7);
    Some(OrientedBox::new_unchecked(
        Vec3::new(center[0], center[1], (z_lo + z_hi) * lit(0.5)),
        l.max(min_ext) + slack,
        w.max(min_ext) + slack,
        (z_hi - z_lo).max(min_ext) + slack,
        half_turn(yaw),
    ))
}

/// Like [`fit_box`], but each box face is placed at a quantile of the point
/// projections instead of the extreme point: `trim` of the points (rounded
/// down, per face) may lie outside on each side. Orientation still comes from
/// the minimum-area rectangle. Noise inflates hull extents more the more
/// points a cluster has; trimming keeps the fitted size comparable across
/// point densities. `trim = 0` is [`fit_box`].
pub fn fit_box_trimmed<T: Real>(points: &[Point<T>], trim: f64) -> Option<OrientedBox<T>> {
    let hull_box = fit_box(points)?;
    let k = (trim * points.len() as f64).floor() as usize;
    if k == 0 {
        return Some(hull_box);
    }
    let (s, c) = hull_box.yaw.sin_cos();
    let mut along: Vec<T> = points.iter().map(|p| p.x * c + p.y * s).collect();
    let mut across: Vec<T> = points.iter().map(|p| -p.x * s + p.y * c).collect();
    let mut up: Vec<T> = points.iter().map(|p| p.z).collect();
    let n = points.len();
    let bounds = |v: &mut Vec<T>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (v[k], v[n - 1 - k])
    };
    let ((s0, s1), (t0, t1), (z0, z1)) = (bounds(&mut along), bounds(&mut across), bounds(&mut up));
    let min_ext = lit::<T>(MIN_EXTENT);
    let half = lit::<T>(0.5);
    let (sc, tc) = ((s0 + s1) * half, (t0 + t1) * half);
    Some(OrientedBox::new_unchecked(
        Vec3::new(sc * c - tc * s, sc * s + tc * c, (z0 + z1) * half),
        (s1 - s0).max(min_ext),
        (t1 - t0).max(min_ext),
        (z1 - z0).max(min_ext),
        hull_box.yaw,
    ))
}
