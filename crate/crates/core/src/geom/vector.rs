use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{GeomError, UNIT_NORM_TOLERANCE};

/// Position or direction in meters. Right-handed, +Y up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    /// Facing direction of an identity orientation.
    pub const FORWARD: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Length of the projection onto the horizontal (XZ) plane.
    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 1e-12 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn lerp(self, to: Vec3, s: f64) -> Vec3 {
        self + (to - self) * s
    }

    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        (self.x - o.x).abs().max((self.y - o.y).abs()).max((self.z - o.z).abs())
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion, component order `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Accepts components whose norm is within [`UNIT_NORM_TOLERANCE`] of one.
    /// The components are stored as given, not renormalized.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeomError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(GeomError::NonUnitQuaternion(n));
        }
        Ok(Self { w, x, y, z })
    }

    /// Normalizes arbitrary non-zero components.
    pub fn normalize(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeomError> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(GeomError::NonUnitQuaternion(n));
        }
        Ok(Self { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    /// Right-handed rotation by `theta` radians about +Y.
    pub fn from_yaw(theta: f64) -> Self {
        let (s, c) = (theta * 0.5).sin_cos();
        Self { w: c, x: 0.0, y: s, z: 0.0 }
    }

    /// Right-handed rotation by `theta` radians about +X.
    pub fn from_pitch(theta: f64) -> Self {
        let (s, c) = (theta * 0.5).sin_cos();
        Self { w: c, x: s, y: 0.0, z: 0.0 }
    }

    /// Orientation whose forward ([`Vec3::FORWARD`]) axis points along `dir`,
    /// with no roll. Returns `None` for a zero direction.
    pub fn looking_along(dir: Vec3) -> Option<Self> {
        let d = dir.normalized()?;
        let yaw = (-d.x).atan2(-d.z);
        let pitch = d.y.atan2(d.horizontal_norm());
        Some(Self::from_yaw(yaw) * Self::from_pitch(pitch))
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn w(self) -> f64 {
        self.w
    }
    pub fn x(self) -> f64 {
        self.x
    }
    pub fn y(self) -> f64 {
        self.y
    }
    pub fn z(self) -> f64 {
        self.z
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Rotation angle separating two orientations, in `[0, π]`.
    pub fn angle_to(self, o: UnitQuat) -> f64 {
        let d = (self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z).abs().min(1.0);
        2.0 * d.acos()
    }
}

impl Mul for UnitQuat {
    type Output = UnitQuat;
    /// Hamilton product: `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    fn mul(self, o: UnitQuat) -> UnitQuat {
        UnitQuat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }
}

impl TryFrom<[f64; 4]> for UnitQuat {
    type Error = GeomError;
    fn try_from(a: [f64; 4]) -> Result<Self, GeomError> {
        UnitQuat::new(a[0], a[1], a[2], a[3])
    }
}

impl From<UnitQuat> for [f64; 4] {
    fn from(q: UnitQuat) -> Self {
        q.to_array()
    }
}

/// Tracked head or hand pose. Serialized as `{"p": [x,y,z], "q": [w,x,y,z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    #[serde(rename = "p")]
    pub position: Vec3,
    #[serde(rename = "q")]
    pub orientation: UnitQuat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { position: Vec3::ZERO, orientation: UnitQuat::IDENTITY };

    pub fn new(position: Vec3, orientation: UnitQuat) -> Self {
        Self { position, orientation }
    }

    pub fn at(position: Vec3) -> Self {
        Self { position, orientation: UnitQuat::IDENTITY }
    }

    pub fn forward(&self) -> Vec3 {
        self.orientation.rotate(Vec3::FORWARD)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.orientation.to_array().iter().all(|c| c.is_finite())
    }

    /// Largest component-wise deviation between two poses (position and raw
    /// quaternion components).
    pub fn max_abs_diff(&self, o: &Pose) -> f64 {
        let q = self.orientation.to_array();
        let r = o.orientation.to_array();
        q.iter().zip(r.iter()).map(|(a, b)| (a - b).abs()).fold(self.position.max_abs_diff(o.position), f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn yaw_quaternion_matches_right_handed_rotation() {
        let q = UnitQuat::from_yaw(FRAC_PI_2);
        let v = q.rotate(Vec3::new(0.0, 0.0, 1.0));
        assert_abs_diff_eq!(v.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_unit() {
        assert!(matches!(UnitQuat::new(1.0, 0.1, 0.0, 0.0), Err(GeomError::NonUnitQuaternion(_))));
        assert!(UnitQuat::new(1.0 + 5e-7, 0.0, 0.0, 0.0).is_ok());
        assert!(matches!(UnitQuat::new(f64::NAN, 0.0, 0.0, 0.0), Err(GeomError::NonFinite)));
    }

    #[test]
    fn looking_along_points_forward_axis() {
        for dir in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.3, -0.5, 2.0), Vec3::new(0.0, 0.2, -1.0)] {
            let q = UnitQuat::looking_along(dir).unwrap();
            let f = q.rotate(Vec3::FORWARD);
            let d = dir.normalized().unwrap();
            assert!(f.max_abs_diff(d) < 1e-12, "{f:?} vs {d:?}");
        }
        assert!(UnitQuat::looking_along(Vec3::ZERO).is_none());
    }

    #[test]
    fn pose_serde_shape() {
        let p = Pose::new(Vec3::new(1.0, 2.0, 3.0), UnitQuat::IDENTITY);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"p":[1.0,2.0,3.0],"q":[1.0,0.0,0.0,0.0]}"#);
        let back: Pose = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Pose>(r#"{"p":[0,0,0],"q":[2,0,0,0]}"#).is_err());
    }
}
