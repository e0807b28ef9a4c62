use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GeomError;

/// Distance from ±π inside which a wrapped angle snaps to exactly +π.
///
/// Differences of angles that are nominally half a turn apart rarely land on
/// the same double; without the snap the direction of a 180° sweep would
/// depend on rounding.
pub(crate) const HALF_TURN_SNAP: f64 = 1e-12;

/// An angle in radians, wrapped to `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);
    pub const HALF_TURN: Angle = Angle(PI);

    /// Wraps `theta`. Panics on non-finite input; use [`wrap_angle`] for a fallible version.
    pub fn new(theta: f64) -> Self {
        wrap_angle(theta).expect("finite angle")
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::new(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}°", self.degrees())
    }
}

/// Wraps `theta` into `(-π, π]`. Exactly `±π` (and anything within
/// [`HALF_TURN_SNAP`] of it) maps to `+π`.
pub fn wrap_angle(theta: f64) -> Result<Angle, GeomError> {
    if !theta.is_finite() {
        return Err(GeomError::InvalidAngle(theta));
    }
    let mut r = theta.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    if (PI - r.abs()).abs() <= HALF_TURN_SNAP {
        r = PI;
    }
    Ok(Angle(r))
}

/// Yaw of a user's local replica relative to the canonical frame.
///
/// Kept unwrapped so that an animation sweeping across ±π stays continuous.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RotationOffset(pub f64);

impl RotationOffset {
    pub const ZERO: RotationOffset = RotationOffset(0.0);

    pub fn from_degrees(deg: f64) -> Self {
        Self(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn wrapped(self) -> Angle {
        Angle::new(self.0)
    }
}
