use std::collections::BTreeMap;

use serde::Serialize;

use crate::geom::{solve_yaw_calibration, GeomError, Vec3};
use crate::protocol::{decode, Direction, Message, ProtocolError};
use crate::session::{AlignOutcome, Pin, Session, Snapshot, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ConnId(pub u64);

#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Send(ConnId, Message),
    Close(ConnId),
}

/// Reliable happenings, one JSON line each in the server log.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ServerEventKind {
    Joined { user: UserId, name: String, color: u32 },
    Left { user: UserId, name: String },
    Calibrated { user: UserId, yaw: f64, translation: Vec3, rms: f64 },
    AlignRequested { follower: UserId, leader: Option<UserId>, error: Option<String> },
    AlignStarted { follower: UserId, leader: UserId, rho_start: f64, delta: f64, duration: f64, t0: f64 },
    AlignCompleted { follower: UserId, rho: f64 },
    PinPlaced { pin: Pin },
    ProtocolError { conn: ConnId, code: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: ServerEventKind,
}

impl ServerEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("server events serialize")
    }
}

/// Everything a call into [`ServerCore`] wants the transport to do.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Effects {
    pub outbound: Vec<Outbound>,
    pub events: Vec<ServerEvent>,
    /// Users whose pose update was accepted, in arrival order.
    pub poses_accepted: Vec<UserId>,
}

impl Effects {
    fn extend(&mut self, other: Effects) {
        self.outbound.extend(other.outbound);
        self.events.extend(other.events);
        self.poses_accepted.extend(other.poses_accepted);
    }
}

/// Transport-free server: owns the session and turns inbound frames and
/// timer ticks into outbound messages. All mutation goes through `&mut self`,
/// so whoever drives it is the single writer.
#[derive(Debug)]
pub struct ServerCore {
    session: Session,
    conns: BTreeMap<ConnId, Option<UserId>>,
    shut_down: bool,
}

impl ServerCore {
    pub fn new(session: Session) -> Self {
        Self { session, conns: BTreeMap::new(), shut_down: false }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn is_shut_down(&self) -> bool {
        self.shut_down
    }

    pub fn user_of(&self, conn: ConnId) -> Option<UserId> {
        self.conns.get(&conn).copied().flatten()
    }

    pub fn connect(&mut self, conn: ConnId) {
        if !self.shut_down {
            self.conns.entry(conn).or_insert(None);
        }
    }

    fn joined_conns(&self) -> impl Iterator<Item = ConnId> + '_ {
        self.conns.iter().filter(|(_, u)| u.is_some()).map(|(c, _)| *c)
    }

    fn broadcast(&self, fx: &mut Effects, msg: &Message) {
        for conn in self.joined_conns() {
            fx.outbound.push(Outbound::Send(conn, msg.clone()));
        }
    }

    fn event(fx: &mut Effects, t: f64, kind: ServerEventKind) {
        fx.events.push(ServerEvent { t, kind });
    }

    /// Moves the session clock to `now` (never backwards) and broadcasts any
    /// sweeps that finished.
    fn advance(&mut self, now: f64) -> Effects {
        let mut fx = Effects::default();
        let now = now.max(self.session.clock());
        let done = self.session.tick(now).expect("clock clamped to be monotonic");
        for c in done {
            let msg = Message::AlignCompleted { follower: c.follower, rho: wrap(c.rho) };
            self.broadcast(&mut fx, &msg);
            Self::event(&mut fx, c.t, ServerEventKind::AlignCompleted { follower: c.follower, rho: c.rho });
        }
        fx
    }

    pub fn tick(&mut self, now: f64) -> Effects {
        if self.shut_down {
            return Effects::default();
        }
        self.advance(now)
    }

    /// Sends every user's latest pose with the authoritative offset to all clients.
    pub fn fanout(&mut self, now: f64) -> Effects {
        if self.shut_down {
            return Effects::default();
        }
        let mut fx = self.advance(now);
        let updates: Vec<Message> = self
            .session
            .users()
            .map(|u| Message::PoseUpdate {
                id: u.user_id,
                head: u.head,
                lh: u.left_hand,
                rh: u.right_hand,
                rho: u.rho.wrapped().radians(),
                seq: u.last_pose_seq,
            })
            .collect();
        for msg in &updates {
            self.broadcast(&mut fx, msg);
        }
        fx
    }

    pub fn handle_text(&mut self, conn: ConnId, text: &str, now: f64) -> Effects {
        self.handle_frame(conn, decode(text), now)
    }

    pub fn handle_frame(&mut self, conn: ConnId, frame: Result<Message, ProtocolError>, now: f64) -> Effects {
        if self.shut_down {
            return Effects::default();
        }
        self.connect(conn);
        let mut fx = self.advance(now);
        let now = self.session.clock();
        match self.user_of(conn) {
            None => fx.extend(self.handle_unjoined(conn, frame, now)),
            Some(user) => fx.extend(self.handle_joined(conn, user, frame, now)),
        }
        fx
    }

    fn reject(fx: &mut Effects, conn: ConnId, now: f64, code: &str, detail: String) {
        fx.outbound.push(Outbound::Send(conn, Message::error(code, detail.clone())));
        Self::event(fx, now, ServerEventKind::ProtocolError { conn, code: code.to_owned(), detail });
    }

    fn handle_unjoined(&mut self, conn: ConnId, frame: Result<Message, ProtocolError>, now: f64) -> Effects {
        let mut fx = Effects::default();
        let name = match frame {
            Ok(Message::Hello { name }) => name,
            Ok(other) => {
                Self::reject(
                    &mut fx,
                    conn,
                    now,
                    "hello_required",
                    format!("first message must be hello, got {}", other.type_name()),
                );
                return self.drop_conn(conn, fx);
            }
            Err(e) => {
                Self::reject(&mut fx, conn, now, "hello_required", e.to_string());
                return self.drop_conn(conn, fx);
            }
        };
        let (user, color) = match self.session.join(&name) {
            Ok(joined) => joined,
            Err(e) => {
                Self::reject(&mut fx, conn, now, e.code(), e.to_string());
                return self.drop_conn(conn, fx);
            }
        };
        let joined = Message::UserJoined { id: user, name: name.clone(), color };
        self.broadcast(&mut fx, &joined);
        self.conns.insert(conn, Some(user));
        let snapshot = self.session.snapshot();
        fx.outbound.push(Outbound::Send(conn, Message::Welcome { user_id: user, color, snapshot }));
        Self::event(&mut fx, now, ServerEventKind::Joined { user, name, color });
        fx
    }

    fn handle_joined(&mut self, conn: ConnId, user: UserId, frame: Result<Message, ProtocolError>, now: f64) -> Effects {
        let mut fx = Effects::default();
        let msg = match frame {
            Ok(m) => m,
            Err(e) => {
                Self::reject(&mut fx, conn, now, e.code(), e.to_string());
                return fx;
            }
        };
        if msg.direction() == Direction::ServerToClient {
            Self::reject(&mut fx, conn, now, "unexpected_message", format!("{} is server-to-client only", msg.type_name()));
            return fx;
        }
        match msg {
            Message::Hello { .. } => Self::reject(&mut fx, conn, now, "already_joined", format!("connection is already {user}")),
            Message::CalibrateRequest { pairs } => match solve_yaw_calibration(&pairs) {
                Ok(xf) => {
                    let rms = xf.residual_rms(&pairs);
                    self.session.mark_calibrated(user).expect("joined user exists");
                    fx.outbound
                        .push(Outbound::Send(conn, Message::CalibrateResult { yaw: xf.yaw(), translation: xf.translation, rms }));
                    Self::event(
                        &mut fx,
                        now,
                        ServerEventKind::Calibrated { user, yaw: xf.yaw(), translation: xf.translation, rms },
                    );
                }
                Err(e) => {
                    let code = match e {
                        GeomError::TooFewPairs(_) => "too_few_pairs",
                        GeomError::DegenerateConfiguration => "degenerate_configuration",
                        _ => "calibration_failed",
                    };
                    Self::reject(&mut fx, conn, now, code, e.to_string());
                }
            },
            Message::Pose { head, lh, rh, seq } => match self.session.update_pose(user, head, lh, rh, seq) {
                Ok(true) => fx.poses_accepted.push(user),
                Ok(false) => {}
                Err(e) => Self::reject(&mut fx, conn, now, e.code(), e.to_string()),
            },
            Message::AlignRequest { ray_origin, ray_dir } => match self.session.request_alignment(user, ray_origin, ray_dir) {
                Ok(AlignOutcome::Started(s)) => {
                    Self::event(
                        &mut fx,
                        now,
                        ServerEventKind::AlignRequested { follower: user, leader: Some(s.leader), error: None },
                    );
                    let msg = Message::AlignStarted {
                        follower: s.follower,
                        leader: s.leader,
                        rho_start: wrap(s.rho_start),
                        delta: s.delta,
                        duration: s.duration,
                        t0: s.t0,
                    };
                    self.broadcast(&mut fx, &msg);
                    Self::event(
                        &mut fx,
                        now,
                        ServerEventKind::AlignStarted {
                            follower: s.follower,
                            leader: s.leader,
                            rho_start: s.rho_start,
                            delta: s.delta,
                            duration: s.duration,
                            t0: s.t0,
                        },
                    );
                }
                Ok(AlignOutcome::Completed { leader, completed }) => {
                    Self::event(
                        &mut fx,
                        now,
                        ServerEventKind::AlignRequested { follower: user, leader: Some(leader), error: None },
                    );
                    let msg = Message::AlignCompleted { follower: completed.follower, rho: wrap(completed.rho) };
                    self.broadcast(&mut fx, &msg);
                    Self::event(
                        &mut fx,
                        now,
                        ServerEventKind::AlignCompleted { follower: completed.follower, rho: completed.rho },
                    );
                }
                Err(e) => {
                    Self::event(
                        &mut fx,
                        now,
                        ServerEventKind::AlignRequested { follower: user, leader: None, error: Some(e.code().to_owned()) },
                    );
                    fx.outbound.push(Outbound::Send(conn, Message::error(e.code(), e.to_string())));
                }
            },
            Message::PinPlace { world } => match self.session.place_pin(user, world) {
                Ok(pin) => {
                    self.broadcast(&mut fx, &Message::PinAdded { pin: pin.clone() });
                    Self::event(&mut fx, now, ServerEventKind::PinPlaced { pin });
                }
                Err(e) => Self::reject(&mut fx, conn, now, e.code(), e.to_string()),
            },
            Message::Leave => {
                fx.extend(self.remove_user(conn, now));
                fx.outbound.push(Outbound::Close(conn));
            }
            _ => unreachable!("server-to-client types rejected above"),
        }
        fx
    }

    fn drop_conn(&mut self, conn: ConnId, mut fx: Effects) -> Effects {
        self.conns.remove(&conn);
        fx.outbound.push(Outbound::Close(conn));
        fx
    }

    fn remove_user(&mut self, conn: ConnId, now: f64) -> Effects {
        let mut fx = Effects::default();
        let Some(Some(user)) = self.conns.remove(&conn) else {
            return fx;
        };
        if let Ok(state) = self.session.leave(user) {
            self.broadcast(&mut fx, &Message::UserLeft { id: user });
            Self::event(&mut fx, now, ServerEventKind::Left { user, name: state.display_name });
        }
        fx
    }

    /// Transport lost the connection.
    pub fn disconnect(&mut self, conn: ConnId, now: f64) -> Effects {
        if self.shut_down {
            return Effects::default();
        }
        let mut fx = self.advance(now);
        fx.extend(self.remove_user(conn, now));
        self.conns.remove(&conn);
        fx
    }

    /// Takes the final snapshot (with any in-flight sweeps), tells every
    /// client that every user left, and closes all connections. Only the
    /// first call does anything.
    pub fn shutdown(&mut self, now: f64) -> (Effects, Option<Snapshot>) {
        if self.shut_down {
            return (Effects::default(), None);
        }
        let mut fx = self.advance(now);
        let now = self.session.clock();
        let snapshot = self.session.snapshot();
        let users: Vec<(UserId, String)> = self.session.users().map(|u| (u.user_id, u.display_name.clone())).collect();
        for (user, name) in users {
            self.broadcast(&mut fx, &Message::UserLeft { id: user });
            Self::event(&mut fx, now, ServerEventKind::Left { user, name });
        }
        for conn in self.conns.keys() {
            fx.outbound.push(Outbound::Close(*conn));
        }
        self.conns.clear();
        self.shut_down = true;
        (fx, Some(snapshot))
    }
}

fn wrap(rho: f64) -> f64 {
    crate::geom::Angle::new(rho).radians()
}
