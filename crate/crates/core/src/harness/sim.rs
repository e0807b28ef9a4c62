use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::bot::{Bot, PointedRef};
use super::metrics::{reference_error, to_jsonl, GazeTracker, MetricsEvent, ViewerSample};
use super::net::Link;
use super::script::{load_scenario, Scenario};
use super::HarnessError;
use crate::geom::world_to_canonical;
use crate::protocol::{decode, encode, Message};
use crate::scene::{occluded, Scene};
use crate::server::{Cadence, ConnId, Effects, Outbound, ServerCore, ServerEventKind};
use crate::session::{Session, SessionConfig, Snapshot, UserId};

pub const SIM_TICK_HZ: f64 = 60.0;

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub events: Vec<MetricsEvent>,
    pub snapshot: Snapshot,
    /// Worst wrapped offset disagreement between any bot replica and the
    /// server at the end of the run.
    pub replica_rho_discrepancy: f64,
    pub seed: u64,
}

impl SimOutput {
    pub fn log(&self) -> String {
        to_jsonl(&self.events)
    }
}

/// Loads and runs a scenario file. `seed` overrides the scenario's net seed.
pub fn run_scenario_file(path: impl AsRef<Path>, seed: Option<u64>) -> Result<SimOutput, HarnessError> {
    let (scenario, scene) = load_scenario(path)?;
    run_scenario(&scenario, scene, seed)
}

#[derive(Debug)]
enum Target {
    Server(usize),
    Bot(usize),
    CloseBot(usize),
}

struct Sim<'a> {
    scenario: &'a Scenario,
    core: ServerCore,
    bots: Vec<Bot>,
    up: Vec<Link>,
    down: Vec<Link>,
    queue: BTreeMap<(u64, u64), (Target, String)>,
    sent: u64,
    events: Vec<MetricsEvent>,
    gaze: GazeTracker,
    pending_refs: Vec<(usize, PointedRef)>,
}

/// Deterministic in-process run: server core, bots and lossy links on a
/// 60 Hz virtual clock.
pub fn run_scenario(scenario: &Scenario, scene: Scene, seed: Option<u64>) -> Result<SimOutput, HarnessError> {
    scenario.validate()?;
    let mut net = scenario.net;
    if let Some(s) = seed {
        net.seed = s;
    }
    let config = SessionConfig { decoupling_enabled: scenario.decoupling, ..SessionConfig::default() };
    let scene_name = scene.name.clone();
    let core = ServerCore::new(Session::new(scene, config)?);
    let n = scenario.bots.len() as u64;
    let gaze = GazeTracker::default();
    let mut sim = Sim {
        scenario,
        core,
        bots: scenario.bots.iter().map(|b| Bot::new(b.clone(), 0.0, scenario.decoupling)).collect(),
        up: (0..n).map(|i| Link::new(&net, 2 * i)).collect(),
        down: (0..n).map(|i| Link::new(&net, 2 * i + 1)).collect(),
        queue: BTreeMap::new(),
        sent: 0,
        events: vec![MetricsEvent::SessionInfo {
            t: 0.0,
            scene: scene_name,
            seed: net.seed,
            decoupling: scenario.decoupling,
            gaze_cone_half_angle: gaze.cone_half_angle(),
            gaze_min_duration: gaze.min_duration(),
        }],
        gaze,
        pending_refs: Vec::new(),
    };
    let ticks = (scenario.duration_s * SIM_TICK_HZ).ceil() as u64;
    let mut fanout = Cadence::new(0.0, sim.core.session().config().pose_fanout_hz);
    for k in 0..=ticks {
        let t = k as f64 / SIM_TICK_HZ;
        sim.deliver_until(t)?;
        let fx = sim.core.tick(t);
        sim.apply(fx, t)?;
        if fanout.poll(t) {
            let fx = sim.core.fanout(t);
            sim.apply(fx, t)?;
        }
        sim.gaze.observe_session(t, sim.core.session(), &mut sim.events);
        for i in 0..sim.bots.len() {
            let out = sim.bots[i].step(t)?;
            sim.send_up(i, out, t)?;
        }
    }
    let t_end = ticks as f64 / SIM_TICK_HZ;
    sim.gaze.finish(t_end, &mut sim.events);
    sim.line_of_sight(t_end)?;
    let session = sim.core.session();
    let truth: Vec<(UserId, f64)> = session.users().map(|u| (u.user_id, u.rho.radians())).collect();
    let replica_rho_discrepancy =
        sim.bots.iter().filter_map(|b| b.replica()).map(|r| r.rho_discrepancy(truth.iter().copied())).fold(0.0, f64::max);
    Ok(SimOutput { events: sim.events, snapshot: session.snapshot(), replica_rho_discrepancy, seed: net.seed })
}

impl Sim<'_> {
    fn enqueue(&mut self, at: f64, target: Target, text: String) {
        self.sent += 1;
        self.queue.insert(((at + 0.0).to_bits(), self.sent), (target, text));
    }

    fn send_up(&mut self, bot: usize, msgs: Vec<Message>, now: f64) -> Result<(), HarnessError> {
        for m in msgs {
            let text = encode(&m)?;
            if let Some(at) = self.up[bot].schedule(now, m.reliability()) {
                self.enqueue(at, Target::Server(bot), text);
            }
        }
        let refs = self.bots[bot].take_references();
        self.pending_refs.extend(refs.into_iter().map(|r| (bot, r)));
        Ok(())
    }

    fn deliver_until(&mut self, t: f64) -> Result<(), HarnessError> {
        while let Some(entry) = self.queue.first_entry() {
            let at = f64::from_bits(entry.key().0);
            if at > t {
                break;
            }
            let (target, text) = entry.remove();
            match target {
                Target::Server(i) => {
                    let fx = self.core.handle_text(ConnId(i as u64), &text, at);
                    self.apply(fx, at)?;
                }
                Target::Bot(i) => {
                    if self.bots[i].is_closed() {
                        continue;
                    }
                    let msg = decode(&text)?;
                    let out = self.bots[i].on_message(msg, at)?;
                    self.send_up(i, out, at)?;
                }
                Target::CloseBot(i) => self.bots[i].mark_closed(),
            }
        }
        Ok(())
    }

    fn name_of(&self, id: UserId) -> String {
        self.core.session().user(id).map_or_else(|| id.to_string(), |u| u.display_name.clone())
    }

    fn apply(&mut self, fx: Effects, now: f64) -> Result<(), HarnessError> {
        for out in fx.outbound {
            match out {
                Outbound::Send(conn, msg) => {
                    let bot = conn.0 as usize;
                    let text = encode(&msg)?;
                    if let Some(at) = self.down[bot].schedule(now, msg.reliability()) {
                        self.enqueue(at, Target::Bot(bot), text);
                    }
                }
                Outbound::Close(conn) => {
                    let bot = conn.0 as usize;
                    if let Some(at) = self.down[bot].schedule(now, crate::protocol::ReliabilityClass::Reliable) {
                        self.enqueue(at, Target::CloseBot(bot), String::new());
                    }
                }
            }
        }
        for ev in fx.events {
            let t = ev.t;
            let mapped = match ev.kind {
                ServerEventKind::Joined { name, .. } => Some(MetricsEvent::UserJoined { t, user: name }),
                ServerEventKind::Left { name, .. } => {
                    self.gaze.forget(t, &name, &mut self.events);
                    Some(MetricsEvent::UserLeft { t, user: name })
                }
                ServerEventKind::AlignRequested { follower, leader, error } => Some(MetricsEvent::AlignRequested {
                    t,
                    follower: self.name_of(follower),
                    leader: leader.map(|l| self.name_of(l)),
                    error,
                }),
                ServerEventKind::AlignStarted { follower, leader, rho_start, delta, duration, t0 } => {
                    Some(MetricsEvent::AlignStarted {
                        t,
                        follower: self.name_of(follower),
                        leader: self.name_of(leader),
                        rho_start,
                        delta,
                        duration,
                        t0,
                    })
                }
                ServerEventKind::AlignCompleted { follower, rho } => {
                    Some(MetricsEvent::AlignCompleted { t, follower: self.name_of(follower), rho })
                }
                ServerEventKind::PinPlaced { pin } => Some(MetricsEvent::PinPlaced {
                    t,
                    user: self.name_of(pin.owner),
                    pin: pin.id.0,
                    position: pin.canonical_position,
                }),
                ServerEventKind::Calibrated { .. } | ServerEventKind::ProtocolError { .. } => None,
            };
            self.events.extend(mapped);
        }
        for user in fx.poses_accepted {
            self.gaze.observe_session(now, self.core.session(), &mut self.events);
            self.sample_references(user, now)?;
        }
        Ok(())
    }

    /// Emits a reference sample once the server holds the pose that first
    /// carried a pointed hand.
    fn sample_references(&mut self, user: UserId, now: f64) -> Result<(), HarnessError> {
        let session = self.core.session();
        let Some(owner) = session.user(user) else { return Ok(()) };
        let seq = owner.last_pose_seq;
        let (ready, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending_refs)
            .into_iter()
            .partition(|(bot, r)| self.bots[*bot].user_id() == Some(user) && r.seq <= seq);
        self.pending_refs = rest;
        for (_, r) in ready {
            let viewers: Vec<UserId> = session.users().map(|u| u.user_id).filter(|&v| v != user).collect();
            let samples = reference_error(session, user, r.world, &viewers, self.scenario.decoupling)?;
            self.events.push(MetricsEvent::ReferenceSample {
                t: now,
                owner: owner.display_name.clone(),
                intended: world_to_canonical(r.world, owner.rho, session.pivot()),
                viewers: samples
                    .into_iter()
                    .map(|(v, recovered, error)| ViewerSample { viewer: self.name_of(v), recovered, error })
                    .collect(),
            });
        }
        Ok(())
    }

    fn line_of_sight(&mut self, t: f64) -> Result<(), HarnessError> {
        let session = self.core.session();
        for check in &self.scenario.los_checks {
            let user = session
                .user_by_name(&check.eye_user)
                .ok_or_else(|| HarnessError::Config(format!("los check user {} is not in the session", check.eye_user)))?;
            let target = session
                .scene()
                .object(&check.target_object)
                .ok_or_else(|| HarnessError::Config(format!("los check names unknown object {}", check.target_object)))?;
            let eye = world_to_canonical(user.head.position, user.rho, session.pivot());
            let ignore: BTreeSet<String> = [check.target_object.clone()].into();
            let hit = occluded(eye, target.position(), session.scene(), &ignore)?;
            let occ = hit.is_some();
            self.events.push(MetricsEvent::LosCheck {
                t,
                eye_user: check.eye_user.clone(),
                target_object: check.target_object.clone(),
                occluded: occ,
                blocker: hit.map(|b| b.id),
                expect_occluded: check.expect_occluded,
                pass: occ == check.expect_occluded,
            });
        }
        Ok(())
    }
}
