//! Authoritative session state.
//!
//! Each user owns a replica offset `rho`: the yaw of their local copy of the
//! scene about the pivot. A follower that points at another user's head
//! starts a constant-speed sweep of its own `rho` until it sees the objects
//! from the leader's bearing. Nothing about the leader changes.

mod render;
mod snapshot;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{
    alignment_target, animation_delta, azimuth, ray_sphere, world_to_canonical, GeomError, Pivot, Pose, RotationOffset, Vec3,
};
use crate::scene::{pivot_of, Scene};

pub use render::{RemoteAvatar, RenderFrame, RenderedObject, RenderedPin};
pub use snapshot::Snapshot;

/// Sweeps shorter than this complete on request without animating.
const ZERO_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PinId(pub u32);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("session is full ({0} users)")]
    SessionFull(usize),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("alignment ray hits no other user")]
    NoTarget,
    #[error("alignment ray only hits the requesting user")]
    SelfTarget,
    #[error("follower stands on the pivot axis")]
    FollowerOnAxis,
    #[error("leader stands on the pivot axis")]
    LeaderOnAxis,
    #[error("clock went backwards: {now} < {clock}")]
    ClockWentBackwards { now: f64, clock: f64 },
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("snapshot does not match this session: {0}")]
    SnapshotMismatch(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

impl SessionError {
    /// Stable snake_case code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::SessionFull(_) => "session_full",
            SessionError::UnknownUser(_) => "unknown_user",
            SessionError::NoTarget => "no_target",
            SessionError::SelfTarget => "self_target",
            SessionError::FollowerOnAxis => "follower_on_axis",
            SessionError::LeaderOnAxis => "leader_on_axis",
            SessionError::ClockWentBackwards { .. } => "clock_went_backwards",
            SessionError::InvalidConfig(_) => "invalid_config",
            SessionError::InvalidPose(_) => "invalid_pose",
            SessionError::SnapshotMismatch(_) => "snapshot_mismatch",
            SessionError::Geom(GeomError::InvalidDirection(_)) => "invalid_direction",
            SessionError::Geom(_) => "invalid_geometry",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Radians per second.
    pub angular_speed: f64,
    pub head_pick_radius: f64,
    /// `false` renders remote hands at their true pose (baseline for comparison).
    pub decoupling_enabled: bool,
    pub pose_fanout_hz: f64,
    pub palette: Vec<String>,
    pub max_users: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            angular_speed: FRAC_PI_2,
            head_pick_radius: 0.15,
            decoupling_enabled: true,
            pose_fanout_hz: 20.0,
            palette: ["orange", "blue", "green", "purple", "yellow", "red"].map(String::from).to_vec(),
            max_users: 8,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: &str| Err(SessionError::InvalidConfig(m.to_owned()));
        if !(self.angular_speed > 0.0 && self.angular_speed.is_finite()) {
            return bad("angular_speed must be positive");
        }
        if !(self.head_pick_radius > 0.0 && self.head_pick_radius.is_finite()) {
            return bad("head_pick_radius must be positive");
        }
        if !(self.pose_fanout_hz > 0.0 && self.pose_fanout_hz.is_finite()) {
            return bad("pose_fanout_hz must be positive");
        }
        if self.palette.is_empty() {
            return bad("palette must not be empty");
        }
        if self.max_users == 0 {
            return bad("max_users must be at least 1");
        }
        Ok(())
    }

    /// Display name of a color index. Indices past the palette wrap with a
    /// numeric suffix: `orange`, ..., `red`, `orange-2`, ...
    pub fn color_label(&self, index: u32) -> String {
        let n = self.palette.len() as u32;
        let base = &self.palette[(index % n) as usize];
        match index / n {
            0 => base.clone(),
            round => format!("{base}-{}", round + 1),
        }
    }
}

/// In-flight sweep of a follower's `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentAnimation {
    pub rho_start: f64,
    /// Wrapped; `|delta| ≤ π`.
    pub delta: f64,
    pub started_at: f64,
    pub duration: f64,
    pub leader: UserId,
}

impl AlignmentAnimation {
    pub fn progress(&self, now: f64) -> f64 {
        if self.duration <= 0.0 {
            return 1.0;
        }
        ((now - self.started_at) / self.duration).clamp(0.0, 1.0)
    }

    pub fn rho_at(&self, now: f64) -> f64 {
        let s = self.progress(now);
        if s >= 1.0 {
            self.rho_end()
        } else {
            self.rho_start + self.delta * s
        }
    }

    pub fn rho_end(&self) -> f64 {
        self.rho_start + self.delta
    }

    pub fn ends_at(&self) -> f64 {
        self.started_at + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserViewState {
    pub user_id: UserId,
    pub display_name: String,
    pub color: u32,
    pub head: Pose,
    pub left_hand: Pose,
    pub right_hand: Pose,
    pub rho: RotationOffset,
    pub animation: Option<AlignmentAnimation>,
    pub last_pose_seq: u64,
    pub calibrated: bool,
    #[serde(skip)]
    pub stale_pose_drops: u64,
}

impl UserViewState {
    fn new(user_id: UserId, display_name: String, color: u32) -> Self {
        Self {
            user_id,
            display_name,
            color,
            head: Pose::IDENTITY,
            left_hand: Pose::IDENTITY,
            right_hand: Pose::IDENTITY,
            rho: RotationOffset::ZERO,
            animation: None,
            last_pose_seq: 0,
            calibrated: false,
            stale_pose_drops: 0,
        }
    }
}

/// A canonical-frame annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pin {
    pub id: PinId,
    pub owner: UserId,
    #[serde(rename = "position")]
    pub canonical_position: Vec3,
    pub color: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignStarted {
    pub follower: UserId,
    pub leader: UserId,
    pub rho_start: f64,
    pub delta: f64,
    pub duration: f64,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignCompleted {
    pub follower: UserId,
    /// Final unwrapped offset.
    pub rho: f64,
    /// Session time at which the completion was observed.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlignOutcome {
    Started(AlignStarted),
    /// Follower already had the leader's bearing.
    Completed {
        leader: UserId,
        completed: AlignCompleted,
    },
}

#[derive(Debug, Clone)]
pub struct Session {
    scene: Scene,
    pivot: Pivot,
    users: BTreeMap<UserId, UserViewState>,
    pins: Vec<Pin>,
    clock: f64,
    config: SessionConfig,
    next_user_id: u32,
    next_pin_id: u32,
}

impl Session {
    pub fn new(scene: Scene, config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let pivot = pivot_of(&scene);
        Ok(Self { scene, pivot, users: BTreeMap::new(), pins: Vec::new(), clock: 0.0, config, next_user_id: 1, next_pin_id: 1 })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn pivot(&self) -> Pivot {
        self.pivot
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn users(&self) -> impl Iterator<Item = &UserViewState> {
        self.users.values()
    }

    pub fn user(&self, id: UserId) -> Option<&UserViewState> {
        self.users.get(&id)
    }

    pub fn user_by_name(&self, name: &str) -> Option<&UserViewState> {
        self.users.values().find(|u| u.display_name == name)
    }

    pub fn pins(&self) -> &[Pin] {
        &self.pins
    }

    fn user_mut(&mut self, id: UserId) -> Result<&mut UserViewState, SessionError> {
        self.users.get_mut(&id).ok_or(SessionError::UnknownUser(id))
    }

    /// Adds a user with `rho = 0` and the lowest unused color index.
    pub fn join(&mut self, name: &str) -> Result<(UserId, u32), SessionError> {
        if self.users.len() >= self.config.max_users {
            return Err(SessionError::SessionFull(self.config.max_users));
        }
        let used: Vec<u32> = self.users.values().map(|u| u.color).collect();
        let color = (0..).find(|c| !used.contains(c)).expect("unbounded range");
        let id = UserId(self.next_user_id);
        self.next_user_id += 1;
        self.users.insert(id, UserViewState::new(id, name.to_owned(), color));
        Ok((id, color))
    }

    /// Removes a user. Pins they placed stay; followers sweeping toward them finish.
    pub fn leave(&mut self, id: UserId) -> Result<UserViewState, SessionError> {
        self.users.remove(&id).ok_or(SessionError::UnknownUser(id))
    }

    pub fn mark_calibrated(&mut self, id: UserId) -> Result<(), SessionError> {
        self.user_mut(id)?.calibrated = true;
        Ok(())
    }

    /// Last-writer-wins per user on `seq`. Returns `false` for stale or
    /// duplicate updates, which leave state untouched.
    pub fn update_pose(&mut self, id: UserId, head: Pose, left: Pose, right: Pose, seq: u64) -> Result<bool, SessionError> {
        if !(head.is_finite() && left.is_finite() && right.is_finite()) {
            return Err(SessionError::InvalidPose("non-finite component".to_owned()));
        }
        let user = self.user_mut(id)?;
        if seq <= user.last_pose_seq {
            user.stale_pose_drops += 1;
            return Ok(false);
        }
        user.head = head;
        user.left_hand = left;
        user.right_hand = right;
        user.last_pose_seq = seq;
        Ok(true)
    }

    /// Picks the nearest other user whose head sphere the ray hits and starts
    /// sweeping the follower's replica toward that leader's bearing. The
    /// leader's current (possibly mid-sweep) offset is captured once.
    pub fn request_alignment(&mut self, follower: UserId, ray_origin: Vec3, ray_dir: Vec3) -> Result<AlignOutcome, SessionError> {
        let me = self.users.get(&follower).ok_or(SessionError::UnknownUser(follower))?;
        let radius = self.config.head_pick_radius;

        let mut nearest: Option<(f64, UserId)> = None;
        let mut hit_self = false;
        for user in self.users.values() {
            let Some(t) = ray_sphere(ray_origin, ray_dir, user.head.position, radius)? else {
                continue;
            };
            if user.user_id == follower {
                hit_self = true;
            } else if nearest.is_none_or(|(best, _)| t < best) {
                nearest = Some((t, user.user_id));
            }
        }
        let leader_id = match (nearest, hit_self) {
            (Some((_, id)), _) => id,
            (None, true) => return Err(SessionError::SelfTarget),
            (None, false) => return Err(SessionError::NoTarget),
        };
        let leader = &self.users[&leader_id];

        let alpha_f = azimuth(me.head.position, self.pivot).map_err(|_| SessionError::FollowerOnAxis)?;
        let alpha_l = azimuth(leader.head.position, self.pivot).map_err(|_| SessionError::LeaderOnAxis)?;
        let target = alignment_target(alpha_f, alpha_l, leader.rho);
        let rho_start = me.rho.radians();
        let delta = animation_delta(me.rho, target).radians();
        let now = self.clock;
        let speed = self.config.angular_speed;

        let me = self.users.get_mut(&follower).expect("checked above");
        if delta.abs() <= ZERO_DELTA {
            me.animation = None;
            me.rho = RotationOffset(rho_start + delta);
            return Ok(AlignOutcome::Completed {
                leader: leader_id,
                completed: AlignCompleted { follower, rho: me.rho.radians(), t: now },
            });
        }
        let anim = AlignmentAnimation { rho_start, delta, started_at: now, duration: delta.abs() / speed, leader: leader_id };
        me.animation = Some(anim);
        Ok(AlignOutcome::Started(AlignStarted {
            follower,
            leader: leader_id,
            rho_start,
            delta,
            duration: anim.duration,
            t0: now,
        }))
    }

    /// Advances the clock and every in-flight sweep. Completions come back
    /// ordered by the time their sweep ended.
    pub fn tick(&mut self, now: f64) -> Result<Vec<AlignCompleted>, SessionError> {
        if !now.is_finite() || now < self.clock {
            return Err(SessionError::ClockWentBackwards { now, clock: self.clock });
        }
        self.clock = now;
        let mut done: Vec<(f64, AlignCompleted)> = Vec::new();
        for user in self.users.values_mut() {
            let Some(anim) = user.animation else { continue };
            user.rho = RotationOffset(anim.rho_at(now));
            if anim.progress(now) >= 1.0 {
                user.animation = None;
                done.push((anim.ends_at(), AlignCompleted { follower: user.user_id, rho: user.rho.radians(), t: now }));
            }
        }
        done.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.follower.cmp(&b.1.follower)));
        Ok(done.into_iter().map(|(_, c)| c).collect())
    }

    /// Stores a pin at the canonical point under `world_point` in the user's
    /// replica, using their instantaneous offset.
    pub fn place_pin(&mut self, id: UserId, world_point: Vec3) -> Result<Pin, SessionError> {
        if !world_point.is_finite() {
            return Err(SessionError::Geom(GeomError::NonFinite));
        }
        let user = self.users.get(&id).ok_or(SessionError::UnknownUser(id))?;
        let pin = Pin {
            id: PinId(self.next_pin_id),
            owner: id,
            canonical_position: world_to_canonical(world_point, user.rho, self.pivot),
            color: user.color,
        };
        self.next_pin_id += 1;
        self.pins.push(pin.clone());
        Ok(pin)
    }
}
