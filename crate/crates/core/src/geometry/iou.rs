use super::OrientedBox;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Signed area of a polygon (positive for counter-clockwise order).
pub fn polygon_area<T: Real>(poly: &[[T; 2]]) -> T {
    let n = poly.len();
    if n < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc * lit(0.5)
}

fn cross<T: Real>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Sutherland-Hodgman clipping of `subject` against the convex,
/// counter-clockwise polygon `clip`.
pub fn clip_convex<T: Real>(subject: &[[T; 2]], clip: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let c_in = cross(a, b, cur) >= T::zero();
            let p_in = cross(a, b, prev) >= T::zero();
            if c_in {
                if !p_in {
                    output.push(intersect(prev, cur, a, b));
                }
                output.push(cur);
            } else if p_in {
                output.push(intersect(prev, cur, a, b));
            }
        }
    }
    output
}

fn intersect<T: Real>(p: [T; 2], q: [T; 2], a: [T; 2], b: [T; 2]) -> [T; 2] {
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let denom = d1 - d2;
    if denom.abs() <= T::min_positive_value() {
        return q;
    }
    let t = d1 / denom;
    [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]
}

/// Bird's-eye-view intersection-over-union of two yaw-rotated boxes.
pub fn bev_iou<T: Real>(a: &OrientedBox<T>, b: &OrientedBox<T>) -> Result<T> {
    let (area_a, area_b) = (a.bev_area(), b.bev_area());
    if !(area_a > T::zero()) || !(area_b > T::zero()) {
        return Err(Error::Degenerate("bev_iou on a zero-area box".into()));
    }
    let dx = a.center.x - b.center.x;
    let dy = a.center.y - b.center.y;
    let reach = a.bev_radius() + b.bev_radius();
    if dx * dx + dy * dy > reach * reach {
        return Ok(T::zero());
    }
    let inter = polygon_area(&clip_convex(&a.bev_corners(), &b.bev_corners())).abs();
    let union = area_a + area_b - inter;
    Ok((inter / union).max(T::zero()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(x: f64, y: f64, l: f64, w: f64, yaw: f64) -> OrientedBox<f64> {
        OrientedBox::new(Vec3::new(x, y, 0.0), l, w, 1.0, yaw).unwrap()
    }

    #[test]
    fn identical_boxes() {
        let a = bx(1.0, 2.0, 4.0, 2.0, 0.3);
        assert!((bev_iou(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_boxes() {
        assert_eq!(bev_iou(&bx(0.0, 0.0, 2.0, 2.0, 0.0), &bx(100.0, 0.0, 2.0, 2.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn offset_squares() {
        // overlap 1x2 = 2, union 4 + 4 - 2 = 6
        let iou = bev_iou(&bx(0.0, 0.0, 2.0, 2.0, 0.0), &bx(1.0, 0.0, 2.0, 2.0, 0.0)).unwrap();
        assert!((iou - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_box_errors() {
        let mut z = bx(0.0, 0.0, 2.0, 2.0, 0.0);
        z.width = 0.0;
        assert!(bev_iou(&z, &bx(0.0, 0.0, 2.0, 2.0, 0.0)).is_err());
    }

    #[test]
    fn f32_agrees_with_f64() {
        let a = OrientedBox::new(Vec3::new(0.0f32, 0.0, 0.0), 4.0, 2.0, 1.0, 0.2).unwrap();
        let b = OrientedBox::new(Vec3::new(1.0f32, 0.5, 0.0), 3.0, 2.0, 1.0, -0.4).unwrap();
        let a64 = bx(0.0, 0.0, 4.0, 2.0, 0.2);
        let b64 = bx(1.0, 0.5, 3.0, 2.0, -0.4);
        let d = bev_iou(&a, &b).unwrap() as f64 - bev_iou(&a64, &b64).unwrap();
        assert!(d.abs() < 1e-5);
    }

    /// Monte-Carlo estimate of the BEV IoU by sampling the bounding square.
    fn monte_carlo_iou(a: &OrientedBox<f64>, b: &OrientedBox<f64>, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 2]> = a.bev_corners().into_iter().chain(b.bev_corners()).collect();
        let (x0, x1) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
        let (y0, y1) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
        let (mut inter, mut union) = (0usize, 0usize);
        for _ in 0..n {
            let p = Vec3::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1), 0.0);
            let (ia, ib) = (a.contains(p), b.contains(p));
            inter += (ia && ib) as usize;
            union += (ia || ib) as usize;
        }
        inter as f64 / union.max(1) as f64
    }

    #[test]
    fn offset_squares_monte_carlo() {
        let (a, b) = (bx(0.0, 0.0, 2.0, 2.0, 0.0), bx(1.0, 0.0, 2.0, 2.0, 0.0));
        assert!((monte_carlo_iou(&a, &b, 200_000, 3) - 2.0 / 6.0).abs() < 0.01);
    }

    fn arb_box() -> impl Strategy<Value = OrientedBox<f64>> {
        (-3.0f64..3.0, -3.0f64..3.0, 0.3f64..6.0, 0.3f64..3.0, -3.2f64..3.2)
            .prop_map(|(x, y, l, w, yaw)| bx(x, y, l, w, yaw))
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = bev_iou(&a, &b).unwrap();
            let ba = bev_iou(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn invariant_under_common_rigid_motion(a in arb_box(), b in arb_box(),
                                               tx in -50.0f64..50.0, ty in -50.0f64..50.0, rot in -3.2f64..3.2) {
            let (s, c) = rot.sin_cos();
            let mv = |o: &OrientedBox<f64>| {
                let p = o.center;
                bx(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty, o.length, o.width, o.yaw + rot)
            };
            let d = bev_iou(&a, &b).unwrap() - bev_iou(&mv(&a), &mv(&b)).unwrap();
            prop_assert!(d.abs() < 1e-9);
        }
    }
}
