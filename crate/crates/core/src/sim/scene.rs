use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ObjectClass, Pose, Quaternion, Vec3};

/// Intrinsic scan pattern shared by all sensors of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub layers: u32,
    /// Full vertical field of view, radians, symmetric about the boresight.
    pub vertical_fov: f64,
    /// Azimuth samples per revolution.
    pub azimuth_steps: u32,
    pub max_range: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            layers: 64,
            vertical_fov: 45f64.to_radians(),
            azimuth_steps: 1024,
            max_range: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub id: u32,
    /// Sensor-to-world transform.
    pub pose: Pose<f64>,
    pub layers: u32,
    pub vertical_fov: f64,
    pub azimuth_steps: u32,
    pub max_range: f64,
    /// Scan rate, Hz.
    pub rate: f64,
}

impl SensorSpec {
    pub fn new(id: u32, pose: Pose<f64>, model: &SensorModel, rate: f64) -> Self {
        Self {
            id,
            pose,
            layers: model.layers,
            vertical_fov: model.vertical_fov,
            azimuth_steps: model.azimuth_steps,
            max_range: model.max_range,
            rate,
        }
    }

    /// Mounted at `position`, turned to face `target` in the x-y plane and
    /// pitched down by `tilt` radians.
    pub fn aimed(id: u32, position: [f64; 3], target: [f64; 2], tilt: f64, model: &SensorModel, rate: f64) -> Self {
        let yaw = (target[1] - position[1]).atan2(target[0] - position[0]);
        let rotation = Quaternion::from_euler(0.0, tilt, yaw);
        let pose = Pose::new(Vec3::from_array(position), rotation).expect("finite sensor pose");
        Self::new(id, pose, model, rate)
    }

    /// Angular spacing between azimuth samples, radians.
    pub fn horizontal_step(&self) -> f64 {
        std::f64::consts::TAU / self.azimuth_steps as f64
    }

    pub fn ray_count(&self) -> usize {
        self.layers as usize * self.azimuth_steps as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 || self.azimuth_steps < 1 {
            return Err(Error::validation(format!("sensor {}: layers and azimuth steps must be >= 1", self.id)));
        }
        if !(self.max_range > 0.0) || !(self.rate > 0.0) {
            return Err(Error::validation(format!("sensor {}: max_range and rate must be > 0", self.id)));
        }
        if !(self.vertical_fov >= 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return Err(Error::validation(format!("sensor {}: vertical_fov must lie in [0, pi)", self.id)));
        }
        self.pose.validate()
    }
}

/// Default `(l, w, h)` per class, meters.
pub fn default_dims(class: ObjectClass) -> [f64; 3] {
    match class {
        ObjectClass::Car => [4.5, 1.8, 1.6],
        ObjectClass::Truck => [8.0, 2.5, 3.2],
        ObjectClass::Pedestrian => [0.5, 0.5, 1.8],
        ObjectClass::Bicycle => [1.8, 0.6, 1.7],
        ObjectClass::Motorcycle => [2.2, 0.8, 1.4],
    }
}

/// A road user following a polyline with one speed per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Actor {
    pub id: u32,
    pub class: ObjectClass,
    /// `(l, w, h)`, meters.
    pub dims: [f64; 3],
    pub path: Vec<[f64; 2]>,
    /// Speed per segment, m/s (`path.len() - 1` entries).
    pub speeds: Vec<f64>,
    pub spawn_time: f64,
}

impl Actor {
    pub fn validate(&self) -> Result<()> {
        let ctx = |m: &str| Error::validation(format!("actor {}: {m}", self.id));
        if self.dims.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(ctx("dims must be positive"));
        }
        if self.path.len() < 2 {
            return Err(ctx("path needs at least two waypoints"));
        }
        if self.speeds.len() != self.path.len() - 1 {
            return Err(ctx("one speed per path segment is required"));
        }
        if self.speeds.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(ctx("speeds must be finite and >= 0"));
        }
        if self.path.iter().flatten().any(|v| !v.is_finite()) || !self.spawn_time.is_finite() {
            return Err(ctx("path and spawn time must be finite"));
        }
        if self.path.windows(2).any(|w| w[0] == w[1]) {
            return Err(ctx("zero-length path segment"));
        }
        Ok(())
    }
}

/// Static axis-aligned box (building block).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Surface categories, used for the reflectance-based intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Ground,
    Building,
    Actor(ObjectClass),
}

impl Surface {
    /// Raw (un-normalized) return intensity.
    pub fn reflectance(self) -> f64 {
        match self {
            Surface::Ground => 12.0,
            Surface::Building => 40.0,
            Surface::Actor(c) if c.is_vehicle() => 60.0,
            Surface::Actor(_) => 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub layout: String,
    /// Point all sensors are aimed at.
    pub center: [f64; 2],
    /// Half extent of the square ground plane around `center`.
    pub ground_extent: f64,
    pub buildings: Vec<Building>,
    /// Drivable and walkable areas as convex polygons (counter-clockwise).
    pub road_mask: Vec<Vec<[f64; 2]>>,
    pub sensors: Vec<SensorSpec>,
    pub actors: Vec<Actor>,
    /// Frame rate used to index ground-truth records.
    pub rate: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<u32> = self.sensors.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("sensor ids must be distinct"));
        }
        if ids.first() == Some(&0) {
            return Err(Error::validation("sensor id 0 is reserved for fused clouds"));
        }
        let mut ids: Vec<u32> = self.actors.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(format!("duplicate actor id {}", w[0])));
        }
        for s in &self.sensors {
            s.validate()?;
        }
        for a in &self.actors {
            a.validate()?;
        }
        if !(self.rate > 0.0) {
            return Err(Error::validation("scene rate must be > 0"));
        }
        Ok(())
    }

    pub fn sensor(&self, id: u32) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.id == id)
    }

    /// True if `p` lies in any road-mask polygon.
    pub fn on_road(&self, p: [f64; 2]) -> bool {
        self.road_mask.iter().any(|poly| {
            (0..poly.len()).all(|i| {
                let a = poly[i];
                let b = poly[(i + 1) % poly.len()];
                (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -1e-9
            })
        })
    }
}
