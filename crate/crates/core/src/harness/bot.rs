use log::warn;

use super::replica::Replica;
use super::script::{BotSpec, Command, Hand};
use super::HarnessError;
use crate::geom::{canonical_to_world, AnchorPair, Pose, RotationOffset, UnitQuat, Vec3};
use crate::protocol::Message;
use crate::server::Cadence;
use crate::session::UserId;

pub const POSE_RATE_HZ: f64 = 20.0;

const LEFT_HAND_OFFSET: Vec3 = Vec3::new(-0.2, -0.5, 0.0);
const RIGHT_HAND_OFFSET: Vec3 = Vec3::new(0.2, -0.5, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    AwaitWelcome,
    AwaitCalibration,
    Running,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
enum Look {
    Pivot,
    Point(Vec3),
    User(UserId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Block {
    Until(f64),
    Alignment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Motion {
    from: Vec3,
    to: Vec3,
    t0: f64,
    duration: f64,
}

impl Motion {
    fn at(&self, now: f64) -> Vec3 {
        if self.duration <= 0.0 || now >= self.t0 + self.duration {
            return self.to;
        }
        self.from.lerp(self.to, ((now - self.t0) / self.duration).max(0.0))
    }
}

/// A hand placed on a point, and the first pose sequence number carrying it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointedRef {
    pub hand: Hand,
    pub world: Vec3,
    pub seq: u64,
}

/// Scripted client with no I/O of its own: feed it server messages and
/// clock steps, send what it returns.
#[derive(Debug, Clone)]
pub struct Bot {
    spec: BotSpec,
    phase: Phase,
    decoupling: bool,
    phase_offset: f64,
    replica: Option<Replica>,
    poses: Option<Cadence>,
    seq: u64,
    position: Vec3,
    motion: Option<Motion>,
    look: Look,
    offset_deg: f64,
    pointing: [Option<Vec3>; 2],
    unsent_refs: Vec<(Hand, Vec3)>,
    refs: Vec<PointedRef>,
    pc: usize,
    cursor: f64,
    block: Option<Block>,
}

impl Bot {
    /// `phase_offset` shifts the 20 Hz pose stream.
    pub fn new(spec: BotSpec, phase_offset: f64, decoupling: bool) -> Self {
        let position = spec.start;
        Self {
            spec,
            phase: Phase::Idle,
            decoupling,
            phase_offset,
            replica: None,
            poses: None,
            seq: 0,
            position,
            motion: None,
            look: Look::Pivot,
            offset_deg: 0.0,
            pointing: [None, None],
            unsent_refs: Vec::new(),
            refs: Vec::new(),
            pc: 0,
            cursor: 0.0,
            block: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn user_id(&self) -> Option<UserId> {
        self.replica.as_ref().map(|r| r.me())
    }

    pub fn replica(&self) -> Option<&Replica> {
        self.replica.as_ref()
    }

    /// Script ran to the end.
    pub fn is_done(&self) -> bool {
        self.phase == Phase::Running && self.pc >= self.spec.script.len() && self.block.is_none()
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    pub fn mark_closed(&mut self) {
        self.phase = Phase::Closed;
    }

    /// Hands pointed since the last call, with the pose seq that carried them.
    pub fn take_references(&mut self) -> Vec<PointedRef> {
        std::mem::take(&mut self.refs)
    }

    fn fail(&self, index: usize, reason: impl Into<String>) -> HarnessError {
        HarnessError::Scenario { bot: self.spec.name.clone(), index, reason: reason.into() }
    }

    fn head_position(&self, now: f64) -> Vec3 {
        self.motion.map_or(self.position, |m| m.at(now))
    }

    pub fn head_pose(&self, now: f64) -> Pose {
        let p = self.head_position(now);
        let target = match self.look {
            Look::Pivot => self.replica.as_ref().map(|r| r.pivot().point),
            Look::Point(q) => Some(q),
            Look::User(id) => self.replica.as_ref().and_then(|r| r.user(id)).map(|u| u.head.position),
        };
        let q = target.and_then(|t| UnitQuat::looking_along(t - p)).unwrap_or(UnitQuat::IDENTITY);
        Pose::new(p, UnitQuat::from_yaw(self.offset_deg.to_radians()) * q)
    }

    fn hands(&self, head: Pose) -> (Pose, Pose) {
        let place = |hand: Hand, offset: Vec3| {
            let p = self.pointing[hand as usize].unwrap_or(head.position + offset);
            Pose::new(p, head.orientation)
        };
        (place(Hand::Left, LEFT_HAND_OFFSET), place(Hand::Right, RIGHT_HAND_OFFSET))
    }

    fn canonical_to_mine(&self, p: Vec3) -> Vec3 {
        let r = self.replica.as_ref().expect("running bots have a replica");
        canonical_to_world(p, RotationOffset(r.my_rho()), r.pivot())
    }

    fn calibration_pairs(&self) -> Vec<AnchorPair> {
        // The bot's tracking frame is the shared frame.
        [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, -1.0)]
            .into_iter()
            .map(|p| AnchorPair::new(p, p))
            .collect()
    }

    pub fn on_message(&mut self, msg: Message, now: f64) -> Result<Vec<Message>, HarnessError> {
        let mut out = Vec::new();
        match &msg {
            Message::Welcome { user_id, snapshot, .. } if self.phase == Phase::AwaitWelcome => {
                self.replica = Some(Replica::from_welcome(*user_id, snapshot, now, self.decoupling));
                self.poses = Some(Cadence::new(self.phase_offset, POSE_RATE_HZ));
                self.phase = Phase::AwaitCalibration;
                out.push(Message::CalibrateRequest { pairs: self.calibration_pairs() });
                return Ok(out);
            }
            Message::CalibrateResult { .. } if self.phase == Phase::AwaitCalibration => {
                self.phase = Phase::Running;
                self.cursor = now;
                return Ok(out);
            }
            Message::Error { code, detail } => {
                if self.phase == Phase::AwaitWelcome {
                    return Err(HarnessError::Live(format!("server refused {}: {code}", self.spec.name)));
                }
                if self.block == Some(Block::Alignment) {
                    return Err(self.fail(self.pc - 1, format!("alignment refused: {code}")));
                }
                warn!("{} got error {code}: {detail}", self.spec.name);
            }
            _ => {}
        }
        let me = self.user_id();
        if let Some(r) = self.replica.as_mut() {
            r.apply(&msg, now);
        }
        if let Message::AlignCompleted { follower, .. } = msg {
            if Some(follower) == me && self.block == Some(Block::Alignment) {
                self.block = None;
                self.cursor = self.cursor.max(now);
            }
        }
        Ok(out)
    }

    /// Advances the script to `now` and emits a pose when one is due.
    pub fn step(&mut self, now: f64) -> Result<Vec<Message>, HarnessError> {
        let mut out = Vec::new();
        match self.phase {
            Phase::Idle => {
                self.phase = Phase::AwaitWelcome;
                out.push(Message::Hello { name: self.spec.name.clone() });
                return Ok(out);
            }
            Phase::AwaitWelcome | Phase::Closed => return Ok(out),
            Phase::AwaitCalibration | Phase::Running => {}
        }
        if let Some(r) = self.replica.as_mut() {
            r.advance(now);
        }
        if self.phase == Phase::Running {
            self.run_script(now, &mut out)?;
        }
        if self.poses.as_mut().is_some_and(|c| c.poll(now)) {
            self.seq += 1;
            let head = self.head_pose(now);
            let (lh, rh) = self.hands(head);
            for (hand, world) in self.unsent_refs.drain(..) {
                self.refs.push(PointedRef { hand, world, seq: self.seq });
            }
            out.push(Message::Pose { head, lh, rh, seq: self.seq });
        }
        Ok(out)
    }

    fn run_script(&mut self, now: f64, out: &mut Vec<Message>) -> Result<(), HarnessError> {
        loop {
            match self.block {
                Some(Block::Until(t)) if now >= t => {
                    self.cursor = t;
                    self.block = None;
                    if let Some(m) = self.motion.take() {
                        self.position = m.to;
                    }
                }
                Some(_) => return Ok(()),
                None => {}
            }
            let Some(cmd) = self.spec.script.get(self.pc).cloned() else { return Ok(()) };
            let index = self.pc;
            self.pc += 1;
            self.execute(index, cmd, now, out)?;
        }
    }

    fn resolve_user(&self, index: usize, name: &str) -> Result<UserId, HarnessError> {
        let r = self.replica.as_ref().expect("running bots have a replica");
        match r.user_by_name(name) {
            Some((id, _)) if id != r.me() => Ok(id),
            Some(_) => Err(self.fail(index, format!("{name} is this bot"))),
            None => Err(self.fail(index, format!("no user named {name} in the session"))),
        }
    }

    fn execute(&mut self, index: usize, cmd: Command, now: f64, out: &mut Vec<Message>) -> Result<(), HarnessError> {
        match cmd {
            Command::MoveTo { p, duration } => {
                self.motion = Some(Motion { from: self.position, to: p, t0: self.cursor, duration });
                self.block = Some(Block::Until(self.cursor + duration));
            }
            Command::Wait { s } => self.block = Some(Block::Until(self.cursor + s)),
            Command::LookAt { point, user, offset_deg } => {
                self.look = match (point, user) {
                    (Some(p), _) => Look::Point(p),
                    (None, Some(name)) => Look::User(self.resolve_user(index, &name)?),
                    (None, None) => unreachable!("validated"),
                };
                self.offset_deg = offset_deg;
            }
            Command::PointAt { world, canonical, hand } => {
                let p = match (world, canonical) {
                    (Some(w), _) => w,
                    (None, Some(c)) => self.canonical_to_mine(c),
                    (None, None) => unreachable!("validated"),
                };
                self.pointing[hand as usize] = Some(p);
                self.unsent_refs.push((hand, p));
            }
            Command::AlignWith { user } => {
                let id = self.resolve_user(index, &user)?;
                let r = self.replica.as_ref().expect("running bots have a replica");
                let target = r.user(id).expect("resolved").head.position;
                let origin = self.head_position(now);
                let dir = (target - origin)
                    .normalized()
                    .ok_or_else(|| self.fail(index, format!("{user}'s head coincides with ours")))?;
                out.push(Message::AlignRequest { ray_origin: origin, ray_dir: dir });
                self.block = Some(Block::Alignment);
            }
            Command::PlacePin { world, canonical, hand_of } => {
                let p = match (world, canonical, hand_of) {
                    (Some(w), _, _) => w,
                    (None, Some(c), _) => self.canonical_to_mine(c),
                    (None, None, Some(h)) => {
                        let id = self.resolve_user(index, &h.user)?;
                        let r = self.replica.as_ref().expect("running bots have a replica");
                        let u = r.user(id).expect("resolved");
                        let pose = match h.hand {
                            Hand::Left => u.left_hand,
                            Hand::Right => u.right_hand,
                        };
                        r.seen_hand(id, pose).expect("resolved").position
                    }
                    (None, None, None) => unreachable!("validated"),
                };
                out.push(Message::PinPlace { world: p });
            }
        }
        Ok(())
    }
}
