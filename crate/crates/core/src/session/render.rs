use serde::Serialize;

use super::{PinId, Session, SessionError, UserId};
use crate::geom::{canonical_to_world, remote_pose, rotate_pose_y, Angle, Pose, RotationOffset, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderedObject {
    pub id: String,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderedPin {
    pub id: PinId,
    pub position: Vec3,
    pub color: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemoteAvatar {
    pub user: UserId,
    pub color: u32,
    /// Always the true head pose: the cap stands in for the physical person.
    pub cap: Pose,
    pub left_hand: Pose,
    pub right_hand: Pose,
}

/// What one viewer sees, in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderFrame {
    pub viewer: UserId,
    pub rho: f64,
    pub objects: Vec<RenderedObject>,
    pub pins: Vec<RenderedPin>,
    pub remotes: Vec<RemoteAvatar>,
    pub own_left_hand: Pose,
    pub own_right_hand: Pose,
}

impl RenderFrame {
    /// Largest coordinate difference between two frames of identical
    /// structure, or `None` when ids, colors or counts differ. Offsets are
    /// compared modulo a full turn.
    pub fn max_deviation(&self, other: &RenderFrame) -> Option<f64> {
        if self.viewer != other.viewer
            || self.objects.len() != other.objects.len()
            || self.pins.len() != other.pins.len()
            || self.remotes.len() != other.remotes.len()
        {
            return None;
        }
        let mut dev = Angle::new(self.rho - other.rho).radians().abs();
        dev = dev.max(self.own_left_hand.max_abs_diff(&other.own_left_hand));
        dev = dev.max(self.own_right_hand.max_abs_diff(&other.own_right_hand));
        for (a, b) in self.objects.iter().zip(&other.objects) {
            if a.id != b.id {
                return None;
            }
            dev = dev.max(a.pose.max_abs_diff(&b.pose));
        }
        for (a, b) in self.pins.iter().zip(&other.pins) {
            if a.id != b.id || a.color != b.color {
                return None;
            }
            dev = dev.max(a.position.max_abs_diff(b.position));
        }
        for (a, b) in self.remotes.iter().zip(&other.remotes) {
            if a.user != b.user || a.color != b.color {
                return None;
            }
            dev = dev
                .max(a.cap.max_abs_diff(&b.cap))
                .max(a.left_hand.max_abs_diff(&b.left_hand))
                .max(a.right_hand.max_abs_diff(&b.right_hand));
        }
        Some(dev)
    }

    pub fn remote(&self, user: UserId) -> Option<&RemoteAvatar> {
        self.remotes.iter().find(|r| r.user == user)
    }
}

impl Session {
    /// How `viewer` draws a hand pose belonging to `owner`.
    pub fn remote_hand_pose(&self, viewer: UserId, owner: UserId, pose: Pose) -> Result<Pose, SessionError> {
        let v = self.user(viewer).ok_or(SessionError::UnknownUser(viewer))?;
        let o = self.user(owner).ok_or(SessionError::UnknownUser(owner))?;
        Ok(self.hand_for(v.rho, o.rho, pose))
    }

    fn hand_for(&self, rho_viewer: RotationOffset, rho_owner: RotationOffset, pose: Pose) -> Pose {
        if self.config.decoupling_enabled {
            remote_pose(pose, rho_viewer, rho_owner, self.pivot)
        } else {
            pose
        }
    }

    pub fn render_frame(&self, viewer: UserId) -> Result<RenderFrame, SessionError> {
        let me = self.user(viewer).ok_or(SessionError::UnknownUser(viewer))?;
        let rho = me.rho;
        let objects = self
            .scene
            .objects()
            .iter()
            .map(|o| RenderedObject { id: o.id.clone(), pose: rotate_pose_y(o.pose, self.pivot, rho.radians()) })
            .collect();
        let pins = self
            .pins
            .iter()
            .map(|p| RenderedPin {
                id: p.id,
                position: canonical_to_world(p.canonical_position, rho, self.pivot),
                color: p.color,
            })
            .collect();
        let remotes = self
            .users
            .values()
            .filter(|u| u.user_id != viewer)
            .map(|u| RemoteAvatar {
                user: u.user_id,
                color: u.color,
                cap: u.head,
                left_hand: self.hand_for(rho, u.rho, u.left_hand),
                right_hand: self.hand_for(rho, u.rho, u.right_hand),
            })
            .collect();
        Ok(RenderFrame {
            viewer,
            rho: rho.radians(),
            objects,
            pins,
            remotes,
            own_left_hand: me.left_hand,
            own_right_hand: me.right_hand,
        })
    }
}
