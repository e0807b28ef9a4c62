use serde::{Deserialize, Serialize};

use super::{wrap_angle, Angle, GeomError, Pose, RotationOffset, UnitQuat, Vec3, ON_AXIS_EPSILON};

/// Point through which the vertical (+Y) rotation axis passes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pivot {
    pub point: Vec3,
}

impl Pivot {
    pub const ORIGIN: Pivot = Pivot { point: Vec3::ZERO };

    pub fn new(point: Vec3) -> Self {
        Self { point }
    }

    /// Horizontal distance of `p` from the axis.
    pub fn axis_distance(&self, p: Vec3) -> f64 {
        (p - self.point).horizontal_norm()
    }
}

/// Yaws `p` by `theta` about the pivot axis. Height and axis distance are preserved.
pub fn rotate_y(p: Vec3, pivot: Pivot, theta: f64) -> Vec3 {
    if theta == 0.0 {
        return p;
    }
    let d = p - pivot.point;
    let (s, c) = theta.sin_cos();
    Vec3::new(pivot.point.x + d.x * c + d.z * s, p.y, pivot.point.z - d.x * s + d.z * c)
}

/// Yaws a pose about the pivot: the position moves and the world-facing
/// direction turns by the same angle.
pub fn rotate_pose_y(pose: Pose, pivot: Pivot, theta: f64) -> Pose {
    Pose { position: rotate_y(pose.position, pivot, theta), orientation: UnitQuat::from_yaw(theta) * pose.orientation }
}

/// Bearing of `p` around the pivot: `atan2(dx, dz)`, zero along +Z.
pub fn azimuth(p: Vec3, pivot: Pivot) -> Result<Angle, GeomError> {
    let d = p - pivot.point;
    if !d.is_finite() {
        return Err(GeomError::NonFinite);
    }
    let h = d.horizontal_norm();
    if h <= ON_AXIS_EPSILON {
        return Err(GeomError::OnAxis(h));
    }
    wrap_angle(d.x.atan2(d.z))
}

pub fn centroid(points: &[Vec3]) -> Result<Vec3, GeomError> {
    if points.is_empty() {
        return Err(GeomError::EmptyInput);
    }
    let sum = points.iter().fold(Vec3::ZERO, |acc, &p| acc + p);
    Ok(sum * (1.0 / points.len() as f64))
}

/// Replica offset that lets a follower at `alpha_follower` see the objects
/// from the same bearing as a leader at `alpha_leader` holding `rho_leader`.
pub fn alignment_target(alpha_follower: Angle, alpha_leader: Angle, rho_leader: RotationOffset) -> RotationOffset {
    let diff = Angle::new(alpha_follower.radians() - alpha_leader.radians());
    RotationOffset(rho_leader.radians() + diff.radians())
}

/// Shortest signed sweep from `current` to `target`; a half turn goes positive.
pub fn animation_delta(current: RotationOffset, target: RotationOffset) -> Angle {
    Angle::new(target.radians() - current.radians())
}

/// Where `viewer` draws a pose owned by `owner`: yawed by the difference of
/// their replica offsets, so it lands on the same canonical spot.
pub fn remote_pose(pose: Pose, rho_viewer: RotationOffset, rho_owner: RotationOffset, pivot: Pivot) -> Pose {
    let theta = rho_viewer.radians() - rho_owner.radians();
    if theta == 0.0 {
        return pose;
    }
    rotate_pose_y(pose, pivot, theta)
}

pub fn world_to_canonical(p: Vec3, rho: RotationOffset, pivot: Pivot) -> Vec3 {
    rotate_y(p, pivot, -rho.radians())
}

pub fn canonical_to_world(p: Vec3, rho: RotationOffset, pivot: Pivot) -> Vec3 {
    rotate_y(p, pivot, rho.radians())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Vec3, b: Vec3, eps: f64) {
        assert!(a.max_abs_diff(b) <= eps, "{a:?} != {b:?}");
    }

    #[test]
    fn rotate_y_quarter_turn() {
        close(rotate_y(Vec3::new(0.0, 0.0, 1.0), Pivot::ORIGIN, FRAC_PI_2), Vec3::new(1.0, 0.0, 0.0), 1e-15);
    }

    #[test]
    fn rotate_y_identity_and_axis_point() {
        let p = Vec3::new(0.3, -2.0, 7.0);
        assert_eq!(rotate_y(p, Pivot::new(Vec3::new(1.0, 0.0, 2.0)), 0.0), p);
        let on_axis = Vec3::new(1.0, 2.0, 0.0);
        close(rotate_y(on_axis, Pivot::new(Vec3::new(1.0, 0.0, 0.0)), PI), on_axis, 0.0);
    }

    #[test]
    fn rotate_pose_quarter_turn_from_identity() {
        let r = rotate_pose_y(Pose::at(Vec3::new(0.0, 0.0, 1.0)), Pivot::ORIGIN, FRAC_PI_2);
        close(r.position, Vec3::new(1.0, 0.0, 0.0), 1e-15);
        assert!(r.orientation.angle_to(UnitQuat::from_yaw(FRAC_PI_2)) < 1e-12);
        assert_eq!(rotate_pose_y(r, Pivot::ORIGIN, 0.0), r);
    }

    #[test]
    fn rotate_pose_inverse() {
        let pose = Pose::new(Vec3::new(0.4, 1.2, -0.7), UnitQuat::normalize(0.9, 0.1, -0.3, 0.2).unwrap());
        let pivot = Pivot::new(Vec3::new(0.1, 0.0, 0.5));
        let back = rotate_pose_y(rotate_pose_y(pose, pivot, 1.234), pivot, -1.234);
        assert!(back.max_abs_diff(&pose) < 1e-9);
    }

    #[test]
    fn azimuth_examples() {
        assert_abs_diff_eq!(azimuth(Vec3::new(0.0, 1.6, -1.5), Pivot::ORIGIN).unwrap().degrees(), 180.0, epsilon = 1e-12);
        assert_eq!(azimuth(Vec3::new(0.0, 0.0, 1.0), Pivot::ORIGIN).unwrap().radians(), 0.0);
        assert_abs_diff_eq!(azimuth(Vec3::new(1.5, 1.6, 0.0), Pivot::ORIGIN).unwrap().degrees(), 90.0, epsilon = 1e-12);
        assert!(matches!(azimuth(Vec3::new(0.0, 3.0, 5e-7), Pivot::ORIGIN), Err(GeomError::OnAxis(_))));
    }

    #[test]
    fn azimuth_tracks_rotation() {
        let pivot = Pivot::new(Vec3::new(0.2, 0.0, -0.4));
        let p = Vec3::new(1.0, 0.5, 0.3);
        let a0 = azimuth(p, pivot).unwrap();
        let a1 = azimuth(rotate_y(p, pivot, 0.7), pivot).unwrap();
        assert_abs_diff_eq!(Angle::new(a1.radians() - a0.radians()).radians(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&[Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0)]).unwrap(), Vec3::new(1.0, 0.0, 0.0));
        let p = Vec3::new(3.0, -1.0, 2.5);
        assert_eq!(centroid(&[p]).unwrap(), p);
        let c = centroid(&[Vec3::new(1.0, 0.0, 1.0), Vec3::new(-1.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -2.0)]).unwrap();
        close(c, Vec3::ZERO, 0.0);
        assert_eq!(centroid(&[]), Err(GeomError::EmptyInput));
    }

    #[test]
    fn alignment_target_examples() {
        let t = alignment_target(Angle::from_degrees(100.0), Angle::ZERO, RotationOffset::ZERO);
        assert_abs_diff_eq!(t.radians(), 100f64.to_radians(), epsilon = 1e-15);

        let a = Angle::from_degrees(37.0);
        assert_eq!(alignment_target(a, a, RotationOffset(0.42)).radians(), 0.42);

        let t = alignment_target(Angle::from_degrees(90.0), Angle::from_degrees(180.0), RotationOffset::ZERO);
        assert_abs_diff_eq!(t.radians(), -FRAC_PI_2, epsilon = 1e-15);
        // both relative bearings equal 180°
        let rel_f = Angle::new(FRAC_PI_2 - t.radians());
        assert_abs_diff_eq!(rel_f.radians(), PI, epsilon = 1e-12);
    }

    #[test]
    fn animation_delta_examples() {
        let d = animation_delta(RotationOffset::ZERO, RotationOffset::from_degrees(350.0));
        assert_abs_diff_eq!(d.degrees(), -10.0, epsilon = 1e-12);
        assert_eq!(animation_delta(RotationOffset(1.7), RotationOffset(1.7)).radians(), 0.0);
        assert_eq!(animation_delta(RotationOffset::ZERO, RotationOffset(PI)).radians(), PI);
    }

    #[test]
    fn remote_pose_examples() {
        let hand = Pose::at(Vec3::new(0.0, 1.0, 1.0));
        let shown = remote_pose(hand, RotationOffset::from_degrees(90.0), RotationOffset::ZERO, Pivot::ORIGIN);
        close(shown.position, Vec3::new(1.0, 1.0, 0.0), 1e-15);
        assert_eq!(remote_pose(hand, RotationOffset(0.3), RotationOffset(0.3), Pivot::ORIGIN), hand);

        // 100° offset: the owner's hand appears 100° further round the pivot
        let shown = remote_pose(hand, RotationOffset::from_degrees(100.0), RotationOffset::ZERO, Pivot::ORIGIN);
        let a = azimuth(shown.position, Pivot::ORIGIN).unwrap();
        assert_abs_diff_eq!(a.degrees(), 100.0, epsilon = 1e-12);
    }

    #[test]
    fn canonical_mapping_examples() {
        let c = world_to_canonical(Vec3::new(1.0, 1.0, 0.0), RotationOffset::from_degrees(90.0), Pivot::ORIGIN);
        close(c, Vec3::new(0.0, 1.0, 1.0), 1e-15);
        let p = Vec3::new(0.5, 0.2, -3.0);
        assert_eq!(world_to_canonical(p, RotationOffset::ZERO, Pivot::ORIGIN), p);
    }
}
