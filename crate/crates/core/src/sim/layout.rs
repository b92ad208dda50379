//! Scenario layouts A-E: road geometry, buildings, sensor placement and
//! generated actor routes.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scene::{default_dims, Actor, Building, Scene, SensorModel, SensorSpec};
use crate::error::{Error, Result};
use crate::geometry::{ObjectClass, Pose, Quaternion, Vec3};
use crate::noise::{keyed_rng, NoiseSpec, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Layout {
    /// Symmetric X-intersection, four corner poles with two sensors each.
    #[default]
    A,
    /// As A with one pole moved so two sensors lose sight of each other.
    B,
    /// Straight six-lane road, one-sided buildings, zigzag poles.
    C,
    /// Curved six-lane road, one-sided buildings, zigzag poles.
    D,
    /// Test-track intersection: four horizontal sensors at 2 m, 28 m from center.
    E,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Layout::A),
            "B" => Ok(Layout::B),
            "C" => Ok(Layout::C),
            "D" => Ok(Layout::D),
            "E" => Ok(Layout::E),
            other => Err(Error::validation(format!("unknown layout `{other}` (expected A-E)"))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Explicit sensor placement, overriding the layout's poles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub id: u32,
    pub position: [f64; 3],
    #[serde(default)]
    pub roll: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub layout: Layout,
    /// Recording length, seconds.
    pub duration: f64,
    /// Frame rate, Hz.
    pub rate: f64,
    pub seed: u64,
    /// Number of generated actors (ignored when `actors` is non-empty).
    pub actor_count: usize,
    /// Classes for generated actors; empty means the layout default.
    pub classes: Vec<ObjectClass>,
    pub sensor_model: SensorModel,
    pub sensors: Vec<SensorConfig>,
    pub actors: Vec<Actor>,
    /// Noise for the noisy dataset variants; `None` means the standard values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            layout: Layout::A,
            duration: 60.0,
            rate: 20.0,
            seed: 0,
            actor_count: 16,
            classes: Vec::new(),
            sensor_model: SensorModel::default(),
            sensors: Vec::new(),
            actors: Vec::new(),
            noise: None,
        }
    }
}

impl ScenarioConfig {
    pub fn frame_count(&self) -> u64 {
        (self.duration * self.rate + 1e-9).floor().max(0.0) as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::validation("scenario duration must be finite and >= 0"));
        }
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(Error::validation("scenario rate must be > 0"));
        }
        Ok(())
    }
}

const ARM: f64 = 62.0;
const ROAD_HALF: f64 = 7.0;
const SIDEWALK: f64 = 8.75;
const BIKE_OFFSET: f64 = 6.25;
const LANES_4: [f64; 2] = [1.75, 5.25];
const LANES_6: [f64; 3] = [1.75, 5.25, 8.75];
const CURVE_CENTER: [f64; 2] = [-60.0, -60.0];
const CURVE_ARC: [f64; 2] = [5f64 * std::f64::consts::PI / 180.0, 85f64 * std::f64::consts::PI / 180.0];

fn curve_radius() -> f64 {
    60.0 * 2f64.sqrt()
}

struct Geometry {
    center: [f64; 2],
    buildings: Vec<Building>,
    road_mask: Vec<Vec<[f64; 2]>>,
    /// `(position, tilt)` per sensor, ids assigned in order starting at 1.
    mounts: Vec<([f64; 3], f64)>,
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<[f64; 2]> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

fn rotate(p: [f64; 2], quarter_turns: u32) -> [f64; 2] {
    (0..quarter_turns % 4).fold(p, |q, _| [-q[1], q[0]])
}

/// Poles carry one sensor tilted by 0.1 rad and one by 0.3 rad, at 6 m.
fn paired_mounts(poles: &[[f64; 2]]) -> Vec<([f64; 3], f64)> {
    poles
        .iter()
        .flat_map(|p| [([p[0], p[1], 6.0], 0.1), ([p[0], p[1], 6.0], 0.3)])
        .collect()
}

fn intersection_mask() -> Vec<Vec<[f64; 2]>> {
    let w = SIDEWALK + 1.75;
    vec![rect(-ARM - 10.0, -w, ARM + 10.0, w), rect(-w, -ARM - 10.0, w, ARM + 10.0)]
}

fn corner_buildings() -> Vec<Building> {
    [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .map(|&(sx, sy): &(f64, f64)| {
            let (a, b) = (12.0, 80.0);
            let xs = [sx * a, sx * b];
            let ys = [sy * a, sy * b];
            Building {
                min: [xs[0].min(xs[1]), ys[0].min(ys[1]), 0.0],
                max: [xs[0].max(xs[1]), ys[0].max(ys[1]), 15.0],
            }
        })
        .collect()
}

fn annulus_quads(r0: f64, r1: f64, n: usize) -> Vec<Vec<[f64; 2]>> {
    let c = CURVE_CENTER;
    let (a0, a1) = (CURVE_ARC[0] - 0.15, CURVE_ARC[1] + 0.15);
    (0..n)
        .map(|k| {
            let t0 = a0 + (a1 - a0) * k as f64 / n as f64;
            let t1 = a0 + (a1 - a0) * (k + 1) as f64 / n as f64;
            let at = |r: f64, t: f64| [c[0] + r * t.cos(), c[1] + r * t.sin()];
            vec![at(r0, t0), at(r1, t0), at(r1, t1), at(r0, t1)]
        })
        .collect()
}

fn geometry(layout: Layout) -> Geometry {
    match layout {
        Layout::A | Layout::B => {
            let mut poles = vec![[9.0, 9.0], [-9.0, 9.0], [-9.0, -9.0], [9.0, -9.0]];
            if layout == Layout::B {
                poles[2] = [-24.0, -9.0];
            }
            Geometry {
                center: [0.0, 0.0],
                buildings: corner_buildings(),
                road_mask: intersection_mask(),
                mounts: paired_mounts(&poles),
            }
        }
        Layout::C => {
            let half = 10.5;
            let poles: Vec<[f64; 2]> = [-36.0, -12.0, 12.0, 36.0]
                .iter()
                .enumerate()
                .map(|(i, &x)| [x, if i % 2 == 0 { 12.5 } else { -12.5 }])
                .collect();
            Geometry {
                center: [0.0, 0.0],
                buildings: [(-70.0, -25.0), (-20.0, 20.0), (25.0, 70.0)]
                    .iter()
                    .map(|&(x0, x1)| Building {
                        min: [x0, 14.5, 0.0],
                        max: [x1, 40.0, 12.0],
                    })
                    .collect(),
                road_mask: vec![rect(-ARM - 10.0, -half - 3.5, ARM + 10.0, half + 3.5)],
                mounts: paired_mounts(&poles),
            }
        }
        Layout::D => {
            let r = curve_radius();
            let c = CURVE_CENTER;
            let at = |rad: f64, deg: f64| {
                let t = deg.to_radians();
                [c[0] + rad * t.cos(), c[1] + rad * t.sin()]
            };
            let poles: Vec<[f64; 2]> = [25.0, 38.0, 52.0, 65.0]
                .iter()
                .enumerate()
                .map(|(i, &deg)| at(if i % 2 == 0 { r - 12.5 } else { r + 12.5 }, deg))
                .collect();
            let buildings = [20.0, 35.0, 55.0, 70.0]
                .iter()
                .map(|&deg| {
                    let p = at(r + 24.0, deg);
                    Building {
                        min: [p[0] - 5.0, p[1] - 5.0, 0.0],
                        max: [p[0] + 5.0, p[1] + 5.0, 12.0],
                    }
                })
                .collect();
            Geometry {
                center: [0.0, 0.0],
                buildings,
                road_mask: annulus_quads(r - 14.0, r + 14.0, 48),
                mounts: paired_mounts(&poles),
            }
        }
        Layout::E => {
            let d = 28.0 / 2f64.sqrt();
            Geometry {
                center: [0.0, 0.0],
                buildings: Vec::new(),
                road_mask: intersection_mask(),
                mounts: [[d, d], [-d, d], [-d, -d], [d, -d]]
                    .iter()
                    .map(|p| ([p[0], p[1], 2.0], 0.0))
                    .collect(),
            }
        }
    }
}

fn arc(center: [f64; 2], radius: f64, from: f64, to: f64, n: usize) -> Vec<[f64; 2]> {
    (0..=n)
        .map(|k| {
            let t = from + (to - from) * k as f64 / n as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

/// East-bound intersection routes in lane `o` (y = -o), before rotation.
fn intersection_vehicle_routes(o: f64) -> Vec<Vec<[f64; 2]>> {
    let straight = vec![[-ARM, -o], [ARM, -o]];
    let mut right = vec![[-ARM, -o]];
    right.extend(arc([-ROAD_HALF, -ROAD_HALF], ROAD_HALF - o, FRAC_PI_2, 0.0, 12));
    right.push([-o, -ARM]);
    let mut left = vec![[-ARM, -o]];
    left.extend(arc([-ROAD_HALF, ROAD_HALF], ROAD_HALF + o, -FRAC_PI_2, 0.0, 12));
    left.push([o, ARM]);
    vec![straight, right, left]
}

fn routes_for(layout: Layout, class: ObjectClass) -> Vec<Vec<[f64; 2]>> {
    use ObjectClass::*;
    match layout {
        Layout::A | Layout::B | Layout::E => {
            let base: Vec<Vec<[f64; 2]>> = match class {
                Pedestrian => vec![vec![[-50.0, SIDEWALK], [50.0, SIDEWALK]], vec![[50.0, -SIDEWALK], [-50.0, -SIDEWALK]]],
                Bicycle => vec![vec![[-ARM, -BIKE_OFFSET], [ARM, -BIKE_OFFSET]]],
                Truck => LANES_4.iter().flat_map(|&o| intersection_vehicle_routes(o).into_iter().take(2)).collect(),
                Car | Motorcycle => LANES_4.iter().flat_map(|&o| intersection_vehicle_routes(o)).collect(),
            };
            base.iter()
                .flat_map(|r| (0..4).map(move |q| r.iter().map(|&p| rotate(p, q)).collect()))
                .collect()
        }
        Layout::C => {
            let lanes: Vec<f64> = match class {
                Pedestrian => vec![12.0],
                Bicycle => vec![9.8],
                _ => LANES_6.to_vec(),
            };
            lanes
                .iter()
                .flat_map(|&o| {
                    let ext = if class == Pedestrian { 50.0 } else { ARM };
                    [vec![[-ext, -o], [ext, -o]], vec![[ext, o], [-ext, o]]]
                })
                .collect()
        }
        Layout::D => {
            let r = curve_radius();
            let offsets: Vec<f64> = match class {
                Pedestrian => vec![12.0],
                Bicycle => vec![9.8],
                _ => LANES_6.to_vec(),
            };
            offsets
                .iter()
                .flat_map(|&o| {
                    let inner = arc(CURVE_CENTER, r - o, CURVE_ARC[0], CURVE_ARC[1], 40);
                    let mut outer = arc(CURVE_CENTER, r + o, CURVE_ARC[0], CURVE_ARC[1], 40);
                    outer.reverse();
                    [inner, outer]
                })
                .collect()
        }
    }
}

fn speed_range(class: ObjectClass) -> (f64, f64) {
    match class {
        ObjectClass::Car => (8.0, 12.0),
        ObjectClass::Truck => (6.0, 9.0),
        ObjectClass::Pedestrian => (1.1, 1.6),
        ObjectClass::Bicycle => (4.0, 6.0),
        ObjectClass::Motorcycle => (9.0, 13.0),
    }
}

fn default_classes(layout: Layout) -> Vec<ObjectClass> {
    match layout {
        Layout::E => vec![ObjectClass::Car, ObjectClass::Pedestrian, ObjectClass::Bicycle],
        _ => ObjectClass::ALL.to_vec(),
    }
}

fn class_weight(c: ObjectClass) -> f64 {
    match c {
        ObjectClass::Car => 0.35,
        ObjectClass::Truck => 0.1,
        ObjectClass::Pedestrian => 0.25,
        ObjectClass::Bicycle => 0.15,
        ObjectClass::Motorcycle => 0.15,
    }
}

/// Lateral acceleration bound used to slow vehicles down in curves, m/s^2.
const LATERAL_ACCEL: f64 = 3.0;
/// Braking and acceleration bound on the way into and out of curves, m/s^2.
const LONGITUDINAL_ACCEL: f64 = 2.5;
/// Longest segment of a densified route, meters.
const PROFILE_STEP: f64 = 0.25;

/// Per-segment speeds for a route driven at `cruise`, slowed in curves so the
/// lateral acceleration stays bounded, with bounded braking before and
/// speeding up after each curve. Routes that need no slowdown are returned
/// unchanged; otherwise segments are split so the speed changes in small steps.
pub(crate) fn speed_profile(path: &[[f64; 2]], cruise: f64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let seg = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]).hypot(b[1] - a[1]);
    let limit_at = |pts: &[[f64; 2]], i: usize| -> f64 {
        if i == 0 || i + 1 >= pts.len() {
            return f64::INFINITY;
        }
        let (a, b, c) = (pts[i - 1], pts[i], pts[i + 1]);
        let h0 = (b[1] - a[1]).atan2(b[0] - a[0]);
        let h1 = (c[1] - b[1]).atan2(c[0] - b[0]);
        let turn = crate::scalar::wrap_angle(h1 - h0).abs();
        if turn < 1e-9 {
            return f64::INFINITY;
        }
        let radius = seg(a, b).min(seg(b, c)) / (2.0 * (turn / 2.0).sin());
        (LATERAL_ACCEL * radius).sqrt()
    };
    if (0..path.len()).all(|i| limit_at(path, i) >= cruise) {
        return (path.to_vec(), vec![cruise; path.len().saturating_sub(1)]);
    }
    let mut pts = vec![path[0]];
    let mut limits = vec![f64::INFINITY];
    // original segment of each sub-segment
    let mut origin = Vec::new();
    for i in 1..path.len() {
        let (a, b) = (path[i - 1], path[i]);
        let n = (seg(a, b) / PROFILE_STEP).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            pts.push([a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]);
            limits.push(if k == n { limit_at(path, i) } else { f64::INFINITY });
            origin.push(i - 1);
        }
    }
    let mut v: Vec<f64> = limits.iter().map(|&l| l.min(cruise)).collect();
    for i in 1..v.len() {
        let d = seg(pts[i - 1], pts[i]);
        v[i] = v[i].min((v[i - 1] * v[i - 1] + 2.0 * LONGITUDINAL_ACCEL * d).sqrt());
    }
    for i in (0..v.len() - 1).rev() {
        let d = seg(pts[i], pts[i + 1]);
        v[i] = v[i].min((v[i + 1] * v[i + 1] + 2.0 * LONGITUDINAL_ACCEL * d).sqrt());
    }
    // merge runs of equal speed within one original segment
    let mut out_pts = vec![pts[0]];
    let mut out_speeds: Vec<f64> = Vec::new();
    let mut last_origin = usize::MAX;
    for k in 0..origin.len() {
        let speed = (v[k] + v[k + 1]) / 2.0;
        if origin[k] == last_origin && out_speeds.last() == Some(&speed) {
            *out_pts.last_mut().unwrap() = pts[k + 1];
        } else {
            out_pts.push(pts[k + 1]);
            out_speeds.push(speed);
        }
        last_origin = origin[k];
    }
    (out_pts, out_speeds)
}

/// True if the two actors come closer than their footprints allow while both
/// are active.
fn conflicts(a: &Actor, b: &Actor, horizon: f64) -> bool {
    let ra = a.dims[0].hypot(a.dims[1]) / 2.0;
    let rb = b.dims[0].hypot(b.dims[1]) / 2.0;
    let clearance = ra + rb + 1.5;
    let start = a.spawn_time.max(b.spawn_time).max(0.0);
    let end = (a.spawn_time + a.travel_time()).min(b.spawn_time + b.travel_time()).min(horizon);
    let mut t = start;
    while t <= end {
        if let (Some(p), Some(q)) = (a.sample(t), b.sample(t)) {
            if (p.position[0] - q.position[0]).hypot(p.position[1] - q.position[1]) < clearance {
                return true;
            }
        }
        t += 0.1;
    }
    false
}

fn generate_actors(cfg: &ScenarioConfig) -> Vec<Actor> {
    let mut rng = keyed_rng(cfg.seed, StreamKind::Scene, 0, 0);
    let classes = if cfg.classes.is_empty() { default_classes(cfg.layout) } else { cfg.classes.clone() };
    let total_weight: f64 = classes.iter().map(|&c| class_weight(c)).sum();
    let mut actors: Vec<Actor> = Vec::with_capacity(cfg.actor_count);
    for i in 0..cfg.actor_count {
        let class = if i < classes.len() {
            classes[i]
        } else {
            let mut u = rng.gen::<f64>() * total_weight;
            *classes
                .iter()
                .find(|&&c| {
                    u -= class_weight(c);
                    u < 0.0
                })
                .unwrap_or(&classes[classes.len() - 1])
        };
        let routes = routes_for(cfg.layout, class);
        let (vmin, vmax) = speed_range(class);
        for _attempt in 0..200 {
            let route = &routes[rng.gen_range(0..routes.len())];
            let (path, speeds) = speed_profile(route, rng.gen_range(vmin..vmax));
            let mut candidate = Actor {
                id: i as u32 + 1,
                class,
                dims: default_dims(class),
                speeds,
                path,
                spawn_time: 0.0,
            };
            let travel = candidate.travel_time();
            let lo = -0.6 * travel;
            let hi = (cfg.duration - 0.4 * travel.min(cfg.duration)).max(lo + 1e-6);
            candidate.spawn_time = rng.gen_range(lo..hi);
            if actors.iter().all(|a| !conflicts(a, &candidate, cfg.duration)) {
                actors.push(candidate);
                break;
            }
        }
    }
    actors
}

/// Builds the scene for a scenario configuration.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scene> {
    cfg.validate()?;
    let geo = geometry(cfg.layout);
    let sensors: Vec<SensorSpec> = if cfg.sensors.is_empty() {
        geo.mounts
            .iter()
            .enumerate()
            .map(|(i, &(pos, tilt))| SensorSpec::aimed(i as u32 + 1, pos, geo.center, tilt, &cfg.sensor_model, cfg.rate))
            .collect()
    } else {
        cfg.sensors
            .iter()
            .map(|s| {
                let pose = Pose::new(Vec3::from_array(s.position), Quaternion::from_euler(s.roll, s.pitch, s.yaw))?;
                Ok(SensorSpec::new(s.id, pose, &cfg.sensor_model, cfg.rate))
            })
            .collect::<Result<_>>()?
    };
    let actors = if cfg.actors.is_empty() { generate_actors(cfg) } else { cfg.actors.clone() };
    let scene = Scene {
        layout: cfg.layout.to_string(),
        center: geo.center,
        ground_extent: 150.0,
        buildings: geo.buildings,
        road_mask: geo.road_mask,
        sensors,
        actors,
        rate: cfg.rate,
    };
    scene.validate()?;
    Ok(scene)
}

/// Distance from the scene center to a sensor's mounting point, in the x-y plane.
pub fn mount_distance(scene: &Scene, sensor: &SensorSpec) -> f64 {
    let t = sensor.pose.translation;
    (t[0] - scene.center[0]).hypot(t[1] - scene.center[1])
}
