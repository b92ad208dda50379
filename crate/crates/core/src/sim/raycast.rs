//! Ray caster: one ray per (layer, azimuth step), nearest hit among the ground
//! plane, buildings and actor boxes. Returned points are in the sensor frame.

use super::motion::frame_at;
use super::scene::{Building, Scene, SensorSpec, Surface};
use crate::geometry::{Point, PointCloudFrame, Vec3};

const T_MIN: f64 = 1e-9;

/// Ray/axis-aligned-box intersection by the slab method. Returns the entry
/// distance, or `None` on a miss or when the origin is inside the box.
fn slab(o: [f64; 3], d: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        if d[k].abs() < 1e-300 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let (mut a, mut b) = ((lo[k] - o[k]) * inv, (hi[k] - o[k]) * inv);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t0 = t0.max(a);
        t1 = t1.min(b);
        if t0 > t1 {
            return None;
        }
    }
    (t0 > T_MIN).then_some(t0)
}

pub(crate) fn ray_building(o: [f64; 3], d: [f64; 3], b: &Building) -> Option<f64> {
    slab(o, d, b.min, b.max)
}

/// Ray against an upright box given by center, dims and yaw.
pub(crate) fn ray_obb(o: [f64; 3], d: [f64; 3], center: [f64; 3], dims: [f64; 3], yaw: f64) -> Option<f64> {
    let (s, c) = yaw.sin_cos();
    let rel = [o[0] - center[0], o[1] - center[1], o[2] - center[2]];
    let lo = [c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1], rel[2]];
    let ld = [c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]];
    let h = [dims[0] / 2.0, dims[1] / 2.0, dims[2] / 2.0];
    slab(lo, ld, [-h[0], -h[1], -h[2]], h)
}

fn ray_ground(o: [f64; 3], d: [f64; 3], center: [f64; 2], extent: f64) -> Option<f64> {
    if d[2] >= 0.0 || o[2] <= 0.0 {
        return None;
    }
    let t = -o[2] / d[2];
    let x = o[0] + t * d[0];
    let y = o[1] + t * d[1];
    ((x - center[0]).abs() <= extent && (y - center[1]).abs() <= extent).then_some(t)
}

/// Per-sensor ray caster with the static part of the scene (ground and
/// buildings) pre-computed once.
pub struct Scanner {
    sensor: SensorSpec,
    origin: [f64; 3],
    elevations: Vec<f64>,
    dirs_sensor: Vec<[f64; 3]>,
    dirs_world: Vec<[f64; 3]>,
    static_hits: Vec<(f64, Surface)>,
}

impl Scanner {
    pub fn new(scene: &Scene, sensor: &SensorSpec) -> Self {
        let layers = sensor.layers as usize;
        let steps = sensor.azimuth_steps as usize;
        let elevations: Vec<f64> = (0..layers)
            .map(|i| {
                if layers == 1 {
                    0.0
                } else {
                    -sensor.vertical_fov / 2.0 + sensor.vertical_fov * i as f64 / (layers - 1) as f64
                }
            })
            .collect();
        let step = sensor.horizontal_step();
        let mut dirs_sensor = Vec::with_capacity(layers * steps);
        for &e in &elevations {
            let (se, ce) = e.sin_cos();
            for j in 0..steps {
                let (sa, ca) = (-std::f64::consts::PI + j as f64 * step).sin_cos();
                dirs_sensor.push([ce * ca, ce * sa, se]);
            }
        }
        let q = sensor.pose.rotation;
        let dirs_world: Vec<[f64; 3]> = dirs_sensor.iter().map(|d| q.rotate(Vec3::from_array(*d)).to_array()).collect();
        let origin = sensor.pose.translation;
        let static_hits = dirs_world
            .iter()
            .map(|&d| {
                let mut best = (f64::INFINITY, Surface::Ground);
                if let Some(t) = ray_ground(origin, d, scene.center, scene.ground_extent) {
                    best = (t, Surface::Ground);
                }
                for b in &scene.buildings {
                    if let Some(t) = ray_building(origin, d, b) {
                        if t < best.0 {
                            best = (t, Surface::Building);
                        }
                    }
                }
                best
            })
            .collect();
        Self {
            sensor: sensor.clone(),
            origin,
            elevations,
            dirs_sensor,
            dirs_world,
            static_hits,
        }
    }

    pub fn sensor(&self) -> &SensorSpec {
        &self.sensor
    }

    /// Layer and azimuth index windows that can see the box. `None` means
    /// the sensor sits inside the box footprint and every ray is a candidate.
    fn ray_window(&self, center: [f64; 3], dims: [f64; 3], yaw: f64) -> Option<((usize, usize), (i64, i64))> {
        let inv = self.sensor.pose.rotation.conjugate();
        let (s, c) = yaw.sin_cos();
        let h = [dims[0] / 2.0, dims[1] / 2.0, dims[2] / 2.0];
        let corner = |sx: f64, sy: f64, sz: f64| {
            let (lx, ly) = (sx * h[0], sy * h[1]);
            Vec3::new(center[0] + c * lx - s * ly, center[1] + s * lx + c * ly, center[2] + sz * h[2])
        };
        let origin = Vec3::from_array(self.origin);
        let to_sensor = |p: Vec3<f64>| inv.rotate(p - origin);
        let mid = to_sensor(Vec3::from_array(center));
        let radius = dims[0].hypot(dims[1]).hypot(dims[2]) / 2.0;
        if mid.norm() <= radius * 1.01 {
            return None;
        }
        let a0 = mid.y.atan2(mid.x);
        let corners: Vec<Vec3<f64>> = [-1.0, 1.0]
            .iter()
            .flat_map(|&x| [-1.0, 1.0].iter().flat_map(move |&y| [-1.0, 1.0].iter().map(move |&z| (x, y, z))))
            .map(|(x, y, z)| corner(x, y, z))
            .collect();
        let (mut da_lo, mut da_hi) = (0.0f64, 0.0f64);
        let (mut e_lo, mut e_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        // segments between corners are sampled because elevation extremes of
        // a great-circle arc can lie between its end points
        for i in 0..8 {
            for j in (i + 1)..8 {
                let (p, q) = (corners[i], corners[j]);
                for k in 0..=8 {
                    let v = to_sensor(p + (q - p) * (k as f64 / 8.0));
                    let da = crate::scalar::wrap_angle(v.y.atan2(v.x) - a0);
                    da_lo = da_lo.min(da);
                    da_hi = da_hi.max(da);
                    let e = v.z.atan2(v.norm_xy());
                    e_lo = e_lo.min(e);
                    e_hi = e_hi.max(e);
                }
            }
        }
        if da_hi - da_lo > 0.9 * std::f64::consts::PI {
            return None;
        }
        let layers = self.elevations.len();
        let spacing = if layers > 1 { self.elevations[1] - self.elevations[0] } else { 1.0 };
        let first = self.elevations.partition_point(|&e| e < e_lo - spacing);
        let last = self.elevations.partition_point(|&e| e <= e_hi + spacing);
        if first >= last.min(layers) {
            return Some(((0, 0), (0, -1)));
        }
        let step = self.sensor.horizontal_step();
        let to_index = |a: f64| ((a + std::f64::consts::PI) / step).floor() as i64;
        let j0 = to_index(a0 + da_lo) - 1;
        let j1 = to_index(a0 + da_hi) + 1;
        Some(((first, last.min(layers)), (j0, j1)))
    }

    /// Nearest hit per ray (ray index = layer * azimuth_steps + step);
    /// `f64::INFINITY` where nothing is hit. Ranges beyond `max_range` are kept.
    pub fn ray_hits(&self, scene: &Scene, t: f64) -> Vec<(f64, Surface)> {
        let layers = self.elevations.len();
        let steps = self.sensor.azimuth_steps as usize;
        let mut hits = self.static_hits.clone();
        for actor in &scene.actors {
            let Some(s) = actor.sample(t) else { continue };
            let [l, w, h] = actor.dims;
            let center = [s.position[0], s.position[1], h / 2.0];
            let dims = [l, w, h];
            let surface = Surface::Actor(actor.class);
            let mut test = |ray: usize| {
                if let Some(t) = ray_obb(self.origin, self.dirs_world[ray], center, dims, s.heading) {
                    if t < hits[ray].0 {
                        hits[ray] = (t, surface);
                    }
                }
            };
            match self.ray_window(center, dims, s.heading) {
                None => (0..layers * steps).for_each(&mut test),
                Some(((l0, l1), (j0, j1))) => {
                    let span = (j1 - j0 + 1).clamp(0, steps as i64);
                    for layer in l0..l1 {
                        for k in 0..span {
                            let j = (j0 + k).rem_euclid(steps as i64) as usize;
                            test(layer * steps + j);
                        }
                    }
                }
            }
        }
        hits
    }

    /// Casts one full scan at time `t`. Points are in the sensor frame and
    /// ordered by ray index.
    pub fn scan(&self, scene: &Scene, t: f64) -> PointCloudFrame<f64> {
        let max_range = self.sensor.max_range;
        let points = self
            .ray_hits(scene, t)
            .iter()
            .zip(&self.dirs_sensor)
            .filter(|((r, _), _)| *r <= max_range)
            .map(|(&(r, surface), d)| Point::new(d[0] * r, d[1] * r, d[2] * r, surface.reflectance()))
            .collect();
        PointCloudFrame::new(self.sensor.id, frame_at(scene.rate, t), t, points)
    }

    /// Unit ray directions in the world frame.
    pub fn world_directions(&self) -> &[[f64; 3]] {
        &self.dirs_world
    }
}

/// One-shot scan. Deterministic: the ray caster itself draws no randomness,
/// noise is applied separately.
pub fn cast_scan(scene: &Scene, sensor: &SensorSpec, t: f64) -> PointCloudFrame<f64> {
    Scanner::new(scene, sensor).scan(scene, t)
}
