//! Multi-LiDAR infrastructure workbench: scenario simulation, point-cloud
//! fusion, geometric detection, Kalman tracking, trajectory refinement and
//! CLEAR-MOT / AP / trajectory-deviation evaluation.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`). The type aliases
//! below fix the scalar to `f64`, which is what the simulator, the file
//! formats and the pipeline use.

pub mod assignment;
pub mod config;
pub mod detector;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod pipeline;
pub mod refine;
pub mod scalar;
pub mod sim;
pub mod spatial;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{ObjectClass, Vec3};
pub use scalar::Real;

pub type Point = geometry::Point<f64>;
pub type PointCloudFrame = geometry::PointCloudFrame<f64>;
pub type Pose = geometry::Pose<f64>;
pub type OrientedBox = geometry::OrientedBox<f64>;
pub type Detection = detector::Detection<f64>;
