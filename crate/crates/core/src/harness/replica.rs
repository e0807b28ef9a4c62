use std::collections::BTreeMap;

use crate::geom::{canonical_to_world, remote_pose, rotate_pose_y, Angle, Pivot, Pose, RotationOffset, Vec3};
use crate::protocol::Message;
use crate::scene::Scene;
use crate::session::{AlignmentAnimation, Pin, RemoteAvatar, RenderFrame, RenderedObject, RenderedPin, Snapshot, UserId};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaUser {
    pub name: String,
    pub color: u32,
    pub head: Pose,
    pub left_hand: Pose,
    pub right_hand: Pose,
    /// Displayed offset: follows the local sweep until the server confirms.
    pub rho: f64,
    pub seq: u64,
    pub animation: Option<AlignmentAnimation>,
    /// Set between align_started and align_completed; offset echoes are
    /// ignored meanwhile.
    awaiting_completion: bool,
}

impl ReplicaUser {
    fn new(name: String, color: u32) -> Self {
        Self {
            name,
            color,
            head: Pose::IDENTITY,
            left_hand: Pose::IDENTITY,
            right_hand: Pose::IDENTITY,
            rho: 0.0,
            seq: 0,
            animation: None,
            awaiting_completion: false,
        }
    }
}

/// A client's mirror of session state, built from the welcome snapshot and
/// kept current from the server's broadcasts.
#[derive(Debug, Clone)]
pub struct Replica {
    me: UserId,
    pivot: Pivot,
    decoupling: bool,
    /// server clock minus local clock, fixed at welcome.
    clock_offset: f64,
    users: BTreeMap<UserId, ReplicaUser>,
    pins: Vec<Pin>,
}

impl Replica {
    pub fn from_welcome(me: UserId, snapshot: &Snapshot, local_now: f64, decoupling: bool) -> Self {
        let users = snapshot
            .users
            .iter()
            .map(|u| {
                let r = ReplicaUser {
                    name: u.display_name.clone(),
                    color: u.color,
                    head: u.head,
                    left_hand: u.left_hand,
                    right_hand: u.right_hand,
                    rho: u.rho.radians(),
                    seq: u.last_pose_seq,
                    animation: u.animation,
                    awaiting_completion: u.animation.is_some(),
                };
                (u.user_id, r)
            })
            .collect();
        Self {
            me,
            pivot: Pivot::new(snapshot.pivot),
            decoupling,
            clock_offset: snapshot.clock - local_now,
            users,
            pins: snapshot.pins.clone(),
        }
    }

    pub fn me(&self) -> UserId {
        self.me
    }

    pub fn pivot(&self) -> Pivot {
        self.pivot
    }

    pub fn server_time(&self, local_now: f64) -> f64 {
        local_now + self.clock_offset
    }

    pub fn users(&self) -> impl Iterator<Item = (UserId, &ReplicaUser)> {
        self.users.iter().map(|(id, u)| (*id, u))
    }

    pub fn user(&self, id: UserId) -> Option<&ReplicaUser> {
        self.users.get(&id)
    }

    pub fn user_by_name(&self, name: &str) -> Option<(UserId, &ReplicaUser)> {
        self.users().find(|(_, u)| u.name == name)
    }

    pub fn pins(&self) -> &[Pin] {
        &self.pins
    }

    pub fn my_rho(&self) -> f64 {
        self.users.get(&self.me).map_or(0.0, |u| u.rho)
    }

    pub fn is_animating(&self, id: UserId) -> bool {
        self.users.get(&id).is_some_and(|u| u.awaiting_completion)
    }

    /// Where this client draws `owner`'s hand pose.
    pub fn seen_hand(&self, owner: UserId, pose: Pose) -> Option<Pose> {
        let o = self.users.get(&owner)?;
        if !self.decoupling || owner == self.me {
            return Some(pose);
        }
        Some(remote_pose(pose, RotationOffset(self.my_rho()), RotationOffset(o.rho), self.pivot))
    }

    /// Where this client draws a pin.
    pub fn seen_pin(&self, pin: &Pin) -> Vec3 {
        canonical_to_world(pin.canonical_position, RotationOffset(self.my_rho()), self.pivot)
    }

    /// The frame this client would draw, using the same rules as the server.
    pub fn render_frame(&self, scene: &Scene) -> RenderFrame {
        let rho = self.my_rho();
        let me = self.users.get(&self.me);
        let objects = scene
            .objects()
            .iter()
            .map(|o| RenderedObject { id: o.id.clone(), pose: rotate_pose_y(o.pose, self.pivot, rho) })
            .collect();
        let pins = self.pins.iter().map(|p| RenderedPin { id: p.id, position: self.seen_pin(p), color: p.color }).collect();
        let remotes = self
            .users()
            .filter(|(id, _)| *id != self.me)
            .map(|(id, u)| RemoteAvatar {
                user: id,
                color: u.color,
                cap: u.head,
                left_hand: self.seen_hand(id, u.left_hand).expect("listed user"),
                right_hand: self.seen_hand(id, u.right_hand).expect("listed user"),
            })
            .collect();
        RenderFrame {
            viewer: self.me,
            rho,
            objects,
            pins,
            remotes,
            own_left_hand: me.map_or(Pose::IDENTITY, |u| u.left_hand),
            own_right_hand: me.map_or(Pose::IDENTITY, |u| u.right_hand),
        }
    }

    /// Runs local sweeps forward. Completion still waits for the server.
    pub fn advance(&mut self, local_now: f64) {
        let t = self.server_time(local_now);
        for u in self.users.values_mut() {
            if let Some(anim) = u.animation {
                u.rho = anim.rho_at(t);
            }
        }
    }

    pub fn apply(&mut self, msg: &Message, local_now: f64) {
        match msg {
            Message::UserJoined { id, name, color } => {
                self.users.entry(*id).or_insert_with(|| ReplicaUser::new(name.clone(), *color));
            }
            Message::UserLeft { id } => {
                self.users.remove(id);
            }
            Message::PoseUpdate { id, head, lh, rh, rho, seq } => {
                let Some(u) = self.users.get_mut(id) else { return };
                if *seq > u.seq {
                    u.head = *head;
                    u.left_hand = *lh;
                    u.right_hand = *rh;
                    u.seq = *seq;
                }
                if !u.awaiting_completion {
                    u.rho = *rho;
                }
            }
            Message::AlignStarted { follower, leader, rho_start, delta, duration, t0 } => {
                if let Some(u) = self.users.get_mut(follower) {
                    u.animation = Some(AlignmentAnimation {
                        rho_start: *rho_start,
                        delta: *delta,
                        started_at: *t0,
                        duration: *duration,
                        leader: *leader,
                    });
                    u.awaiting_completion = true;
                }
                self.advance(local_now);
            }
            Message::AlignCompleted { follower, rho } => {
                if let Some(u) = self.users.get_mut(follower) {
                    u.animation = None;
                    u.awaiting_completion = false;
                    u.rho = *rho;
                }
            }
            Message::PinAdded { pin } => {
                if !self.pins.iter().any(|p| p.id == pin.id) {
                    self.pins.push(pin.clone());
                }
            }
            _ => {}
        }
    }

    /// Largest wrapped offset difference against authoritative values.
    pub fn rho_discrepancy<'a>(&self, truth: impl IntoIterator<Item = (UserId, f64)> + 'a) -> f64 {
        truth
            .into_iter()
            .map(|(id, rho)| match self.users.get(&id) {
                Some(u) => Angle::new(u.rho - rho).radians().abs(),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}
