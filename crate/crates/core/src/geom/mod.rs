//! Stateless geometry for yaw-only perspective alignment.
//!
//! Every rotation in this module is a yaw about the world-up (+Y) axis through
//! a [`Pivot`]. Angles are radians at every function boundary.

mod angle;
mod calibration;
mod ray;
mod vector;
mod yaw;

pub use angle::{wrap_angle, Angle, RotationOffset};
pub use calibration::{apply_calibration, solve_yaw_calibration, AnchorPair, CalibrationTransform};
pub use ray::{ray_aabb, ray_sphere, segment_box_interval, segment_sphere_interval, Aabb};
pub use vector::{Pose, UnitQuat, Vec3};
pub use yaw::{
    alignment_target, animation_delta, azimuth, canonical_to_world, centroid, remote_pose, rotate_pose_y, rotate_y,
    world_to_canonical, Pivot,
};

/// Horizontal distance below which a point counts as standing on the pivot axis.
pub const ON_AXIS_EPSILON: f64 = 1e-6;

/// Allowed deviation of a quaternion norm from one.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("angle is not finite: {0}")]
    InvalidAngle(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("point lies on the pivot axis (horizontal distance {0:e} m)")]
    OnAxis(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("calibration needs at least 2 anchor pairs, got {0}")]
    TooFewPairs(usize),
    #[error("anchor points have no horizontal spread")]
    DegenerateConfiguration,
    #[error("ray direction is not unit length (|d| = {0})")]
    InvalidDirection(f64),
    #[error("sphere radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("box min exceeds max")]
    InvalidBox,
    #[error("quaternion norm {0} is not within tolerance of 1")]
    NonUnitQuaternion(f64),
}
