use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geom::{remote_pose, world_to_canonical, Pivot, Pose, RotationOffset, Vec3};
use crate::session::{Session, SessionError, UserId};

pub const GAZE_CONE_HALF_ANGLE_DEG: f64 = 20.0;
pub const GAZE_MIN_EPISODE_S: f64 = 0.3;
/// Slack on the cone test so a head aimed exactly at the boundary counts.
const CONE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewerSample {
    pub viewer: String,
    pub recovered: Vec3,
    pub error: f64,
}

/// One line of the metrics log. Users are named by display name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricsEvent {
    SessionInfo {
        t: f64,
        scene: String,
        seed: u64,
        decoupling: bool,
        gaze_cone_half_angle: f64,
        gaze_min_duration: f64,
    },
    UserJoined {
        t: f64,
        user: String,
    },
    UserLeft {
        t: f64,
        user: String,
    },
    AlignRequested {
        t: f64,
        follower: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        leader: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    AlignStarted {
        t: f64,
        follower: String,
        leader: String,
        rho_start: f64,
        delta: f64,
        duration: f64,
        t0: f64,
    },
    AlignCompleted {
        t: f64,
        follower: String,
        rho: f64,
    },
    PinPlaced {
        t: f64,
        user: String,
        pin: u32,
        position: Vec3,
    },
    GazeOn {
        t: f64,
        a: String,
        b: String,
        since: f64,
    },
    GazeOff {
        t: f64,
        a: String,
        b: String,
        duration: f64,
    },
    ReferenceSample {
        t: f64,
        owner: String,
        intended: Vec3,
        viewers: Vec<ViewerSample>,
    },
    LosCheck {
        t: f64,
        eye_user: String,
        target_object: String,
        occluded: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blocker: Option<String>,
        expect_occluded: bool,
        pass: bool,
    },
}

impl MetricsEvent {
    pub fn t(&self) -> f64 {
        match self {
            MetricsEvent::SessionInfo { t, .. }
            | MetricsEvent::UserJoined { t, .. }
            | MetricsEvent::UserLeft { t, .. }
            | MetricsEvent::AlignRequested { t, .. }
            | MetricsEvent::AlignStarted { t, .. }
            | MetricsEvent::AlignCompleted { t, .. }
            | MetricsEvent::PinPlaced { t, .. }
            | MetricsEvent::GazeOn { t, .. }
            | MetricsEvent::GazeOff { t, .. }
            | MetricsEvent::ReferenceSample { t, .. }
            | MetricsEvent::LosCheck { t, .. } => *t,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics events serialize")
    }
}

pub fn to_jsonl(events: &[MetricsEvent]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&e.to_json_line());
        s.push('\n');
    }
    s
}

/// Both heads face each other within the cone (inclusive).
pub fn mutual_gaze(a: &Pose, b: &Pose, cone_half_angle: f64) -> Result<bool, HarnessError> {
    let ab = (b.position - a.position).normalized().ok_or(HarnessError::CoincidentHeads)?;
    let within = |head: &Pose, toward: Vec3| {
        let cos = head.forward().dot(toward).clamp(-1.0, 1.0);
        cos.acos() <= cone_half_angle + CONE_TOLERANCE
    };
    Ok(within(a, ab) && within(b, -ab))
}

#[derive(Debug, Clone, Copy, Default)]
struct Episode {
    since: Option<f64>,
    confirmed: bool,
}

/// Debounces per-pair gaze observations into episodes.
#[derive(Debug, Clone)]
pub struct GazeTracker {
    cone_half_angle: f64,
    min_duration: f64,
    pairs: BTreeMap<(String, String), Episode>,
}

impl Default for GazeTracker {
    fn default() -> Self {
        Self::new(GAZE_CONE_HALF_ANGLE_DEG.to_radians(), GAZE_MIN_EPISODE_S)
    }
}

impl GazeTracker {
    pub fn new(cone_half_angle: f64, min_duration: f64) -> Self {
        Self { cone_half_angle, min_duration, pairs: BTreeMap::new() }
    }

    pub fn cone_half_angle(&self) -> f64 {
        self.cone_half_angle
    }

    pub fn min_duration(&self) -> f64 {
        self.min_duration
    }

    /// Feeds one observation for the named pair (a < b) at time t.
    pub fn observe(&mut self, t: f64, a: &str, b: &str, looking: bool, out: &mut Vec<MetricsEvent>) {
        let key = (a.to_owned(), b.to_owned());
        let ep = self.pairs.entry(key).or_default();
        match (looking, ep.since) {
            (true, None) => ep.since = Some(t),
            (true, Some(since)) => {
                if !ep.confirmed && t - since >= self.min_duration {
                    ep.confirmed = true;
                    out.push(MetricsEvent::GazeOn { t, a: a.into(), b: b.into(), since });
                }
            }
            (false, Some(since)) => {
                let long_enough = ep.confirmed || t - since >= self.min_duration;
                if long_enough {
                    if !ep.confirmed {
                        out.push(MetricsEvent::GazeOn { t, a: a.into(), b: b.into(), since });
                    }
                    out.push(MetricsEvent::GazeOff { t, a: a.into(), b: b.into(), duration: t - since });
                }
                *ep = Episode::default();
            }
            (false, None) => {}
        }
    }

    /// Observes every pair of present users from authoritative head poses.
    pub fn observe_session(&mut self, t: f64, session: &Session, out: &mut Vec<MetricsEvent>) {
        let users: Vec<_> = session.users().collect();
        for (i, a) in users.iter().enumerate() {
            for b in &users[i + 1..] {
                let looking = mutual_gaze(&a.head, &b.head, self.cone_half_angle).unwrap_or(false);
                let (x, y) = ordered(&a.display_name, &b.display_name);
                self.observe(t, x, y, looking, out);
            }
        }
    }

    /// Closes episodes still open at the end of a run.
    pub fn finish(&mut self, t: f64, out: &mut Vec<MetricsEvent>) {
        let keys: Vec<_> = self.pairs.keys().cloned().collect();
        for (a, b) in keys {
            self.observe(t, &a, &b, false, out);
        }
    }

    /// A user left: their pairs end now.
    pub fn forget(&mut self, t: f64, name: &str, out: &mut Vec<MetricsEvent>) {
        let keys: Vec<_> = self.pairs.keys().filter(|(a, b)| a == name || b == name).cloned().collect();
        for (a, b) in keys {
            self.observe(t, &a, &b, false, out);
            self.pairs.remove(&(a, b));
        }
    }
}

fn ordered<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Canonical point a viewer recovers from an owner's hand at `hand_world`,
/// and its distance from the point the owner meant.
pub fn reference_error_for(
    rho_owner: RotationOffset,
    rho_viewer: RotationOffset,
    pivot: Pivot,
    hand_world: Vec3,
    decoupling: bool,
) -> (Vec3, f64) {
    let intended = world_to_canonical(hand_world, rho_owner, pivot);
    let seen = if decoupling { remote_pose(Pose::at(hand_world), rho_viewer, rho_owner, pivot).position } else { hand_world };
    let recovered = world_to_canonical(seen, rho_viewer, pivot);
    (recovered, recovered.distance(intended))
}

/// Per-viewer (recovered point, error) for a hand `owner` holds at `hand_world`.
pub fn reference_error(
    session: &Session,
    owner: UserId,
    hand_world: Vec3,
    viewers: &[UserId],
    decoupling: bool,
) -> Result<Vec<(UserId, Vec3, f64)>, SessionError> {
    let o = session.user(owner).ok_or(SessionError::UnknownUser(owner))?;
    viewers
        .iter()
        .map(|&v| {
            let rv = session.user(v).ok_or(SessionError::UnknownUser(v))?;
            let (rec, err) = reference_error_for(o.rho, rv.rho, session.pivot(), hand_world, decoupling);
            Ok((v, rec, err))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::UnitQuat;

    fn facing(from: Vec3, to: Vec3, yaw_err_deg: f64) -> Pose {
        let q = UnitQuat::looking_along(to - from).unwrap();
        Pose::new(from, UnitQuat::from_yaw(yaw_err_deg.to_radians()) * q)
    }

    #[test]
    fn gaze_examples() {
        let a = Vec3::new(0.0, 1.6, 1.5);
        let b = Vec3::new(0.0, 1.6, -1.5);
        let cone = 20f64.to_radians();
        assert!(mutual_gaze(&facing(a, b, 0.0), &facing(b, a, 0.0), cone).unwrap());
        assert!(!mutual_gaze(&facing(a, b, 0.0), &facing(b, a, 180.0), cone).unwrap());
        assert!(mutual_gaze(&facing(a, b, 20.0), &facing(b, a, -20.0), cone).unwrap());
        assert!(!mutual_gaze(&facing(a, b, 20.001), &facing(b, a, 0.0), cone).unwrap());
        assert!(matches!(mutual_gaze(&Pose::at(a), &Pose::at(a), cone), Err(HarnessError::CoincidentHeads)));
    }

    #[test]
    fn episodes_need_min_duration() {
        let mut g = GazeTracker::default();
        let mut out = Vec::new();
        for k in 0..=12 {
            g.observe(k as f64 * 0.05, "A", "B", k < 5, &mut out);
        }
        assert!(out.is_empty(), "0.25 s is too short: {out:?}");
        for k in 0..=12 {
            g.observe(1.0 + k as f64 * 0.05, "A", "B", k < 8, &mut out);
        }
        assert_eq!(out.len(), 2);
        assert!(matches!(&out[0], MetricsEvent::GazeOn { since, .. } if *since == 1.0));
        assert!(matches!(&out[1], MetricsEvent::GazeOff { duration, .. } if (duration - 0.4).abs() < 1e-12));
    }

    #[test]
    fn finish_closes_open_episodes() {
        let mut g = GazeTracker::default();
        let mut out = Vec::new();
        g.observe(0.0, "A", "B", true, &mut out);
        g.observe(1.0, "A", "B", true, &mut out);
        g.finish(2.0, &mut out);
        assert!(matches!(&out[..], [MetricsEvent::GazeOn { .. }, MetricsEvent::GazeOff { duration, .. }] if *duration == 2.0));
    }

    #[test]
    fn reference_error_contrast() {
        let pivot = Pivot::new(Vec3::new(0.0, 0.75, 0.0));
        let x = Vec3::new(1.0, 0.9, 0.0);
        let (ro, rv) = (RotationOffset(0.0), RotationOffset(100f64.to_radians()));
        assert!(reference_error_for(ro, rv, pivot, x, true).1 < 1e-12);
        let off = reference_error_for(ro, rv, pivot, x, false).1;
        assert!((off - 2.0 * 50f64.to_radians().sin()).abs() < 1e-12);
        assert_eq!(reference_error_for(rv, rv, pivot, x, false).1, 0.0);
    }

    #[test]
    fn events_round_trip_as_lines() {
        let e = MetricsEvent::AlignRequested { t: 1.5, follower: "B".into(), leader: Some("A".into()), error: None };
        let line = e.to_json_line();
        assert_eq!(line, r#"{"kind":"align_requested","t":1.5,"follower":"B","leader":"A"}"#);
        assert_eq!(serde_json::from_str::<MetricsEvent>(&line).unwrap(), e);
    }
}
