//! Yaw-plus-translation calibration between a device's local tracking space
//! and the shared session space.
//!
//! Tracking is gravity aligned, so only the heading and an offset are unknown.
//! For centered horizontal coordinates `l̃`, `s̃` the least-squares heading is
//! `atan2(Σ(l̃z·s̃x − l̃x·s̃z), Σ(l̃x·s̃x + l̃z·s̃z))`, after which the translation
//! maps the rotated local centroid onto the shared centroid.

use serde::{Deserialize, Serialize};

use super::yaw::rotate_y;
use super::{centroid, wrap_angle, GeomError, Pivot, Pose, UnitQuat, Vec3, ON_AXIS_EPSILON};

/// One anchor observed in both spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorPair {
    pub local: Vec3,
    pub shared: Vec3,
}

impl AnchorPair {
    pub fn new(local: Vec3, shared: Vec3) -> Self {
        Self { local, shared }
    }
}

/// `shared = R_y(yaw) · local + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTransform {
    yaw: f64,
    pub translation: Vec3,
}

impl Default for CalibrationTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl CalibrationTransform {
    pub const IDENTITY: CalibrationTransform = CalibrationTransform { yaw: 0.0, translation: Vec3::ZERO };

    pub fn new(yaw: f64, translation: Vec3) -> Result<Self, GeomError> {
        if !translation.is_finite() {
            return Err(GeomError::NonFinite);
        }
        Ok(Self { yaw: wrap_angle(yaw)?.radians(), translation })
    }

    /// Wrapped to `(-π, π]`.
    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        rotate_y(p, Pivot::ORIGIN, self.yaw) + self.translation
    }

    pub fn inverse(&self) -> CalibrationTransform {
        let back = rotate_y(self.translation, Pivot::ORIGIN, -self.yaw);
        CalibrationTransform { yaw: wrap_angle(-self.yaw).expect("finite").radians(), translation: -back }
    }

    /// Root-mean-square distance between mapped local points and their shared partners.
    pub fn residual_rms(&self, pairs: &[AnchorPair]) -> f64 {
        if pairs.is_empty() {
            return 0.0;
        }
        let sq: f64 =
            pairs.iter().map(|p| (self.apply_point(p.local) - p.shared).dot(self.apply_point(p.local) - p.shared)).sum();
        (sq / pairs.len() as f64).sqrt()
    }
}

pub fn solve_yaw_calibration(pairs: &[AnchorPair]) -> Result<CalibrationTransform, GeomError> {
    if pairs.len() < 2 {
        return Err(GeomError::TooFewPairs(pairs.len()));
    }
    if pairs.iter().any(|p| !p.local.is_finite() || !p.shared.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let locals: Vec<Vec3> = pairs.iter().map(|p| p.local).collect();
    let shareds: Vec<Vec3> = pairs.iter().map(|p| p.shared).collect();
    let lc = centroid(&locals)?;
    let sc = centroid(&shareds)?;

    let spread = locals.iter().map(|&l| (l - lc).horizontal_norm()).fold(0.0, f64::max);
    if spread <= ON_AXIS_EPSILON {
        return Err(GeomError::DegenerateConfiguration);
    }

    let (mut num, mut den) = (0.0, 0.0);
    for pair in pairs {
        let l = pair.local - lc;
        let s = pair.shared - sc;
        num += l.z * s.x - l.x * s.z;
        den += l.x * s.x + l.z * s.z;
    }
    let yaw = num.atan2(den);
    let translation = sc - rotate_y(lc, Pivot::ORIGIN, yaw);
    CalibrationTransform::new(yaw, translation)
}

pub fn apply_calibration(xf: &CalibrationTransform, pose: Pose) -> Pose {
    Pose { position: xf.apply_point(pose.position), orientation: UnitQuat::from_yaw(xf.yaw) * pose.orientation }
}
