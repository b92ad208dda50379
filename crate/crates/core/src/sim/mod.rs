//! Scenario simulation: layouts, actor motion, LiDAR ray casting and ground
//! truth export.

mod layout;
mod motion;
mod raycast;
mod scene;

pub use layout::{build_scenario, mount_distance, Layout, ScenarioConfig, SensorConfig};
pub use motion::{export_gt, frame_at, step_actors, time_of, GroundTruthRecord, PathSample, FD_STEP};
pub use raycast::{cast_scan, Scanner};
pub use scene::{default_dims, Actor, Building, Scene, SensorModel, SensorSpec, Surface};
