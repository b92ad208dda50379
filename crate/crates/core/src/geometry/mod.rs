//! Points, poses, oriented boxes and BEV overlap.

mod boxes;
mod class;
mod cloud;
mod iou;
mod pose;
mod vector;

pub use boxes::{count_in_box, min_box_dims, points_in_box, OrientedBox};
pub use class::{ClassGroup, ObjectClass};
pub use cloud::{transform_points, Point, PointCloudFrame, FUSED_SENSOR_ID};
pub use iou::{bev_iou, clip_convex, polygon_area};
pub use pose::{compose, Pose, Quaternion};
pub use vector::Vec3;
