use serde::{Deserialize, Serialize};

use super::{Pin, Session, SessionConfig, SessionError, UserViewState};
use crate::geom::Vec3;
use crate::scene::Scene;

/// Complete replicated state of a session, used as the late-joiner welcome
/// payload and as the shutdown dump.
///
/// Offsets are stored unwrapped so a restored session renders bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub clock: f64,
    pub scene: String,
    pub pivot: Vec3,
    pub users: Vec<UserViewState>,
    pub pins: Vec<Pin>,
    pub next_user_id: u32,
    pub next_pin_id: u32,
}

impl Snapshot {
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("snapshots contain only finite numbers")
    }

    /// Canonical text: sorted keys, shortest round-trip numbers.
    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl Session {
    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            clock: self.clock,
            scene: self.scene.name.clone(),
            pivot: self.pivot.point,
            users: self.users.values().cloned().collect(),
            pins: self.pins.clone(),
            next_user_id: self.next_user_id,
            next_pin_id: self.next_pin_id,
        }
    }

    /// Rebuilds a session over `scene` from a snapshot taken on the same scene.
    pub fn restore(scene: Scene, config: SessionConfig, snapshot: &Snapshot) -> Result<Self, SessionError> {
        let mut session = Session::new(scene, config)?;
        if session.scene.name != snapshot.scene {
            return Err(SessionError::SnapshotMismatch(format!("scene {:?} != {:?}", snapshot.scene, session.scene.name)));
        }
        if session.pivot.point != snapshot.pivot {
            return Err(SessionError::SnapshotMismatch("pivot differs".to_owned()));
        }
        session.clock = snapshot.clock;
        for user in &snapshot.users {
            session.users.insert(user.user_id, user.clone());
        }
        session.pins = snapshot.pins.clone();
        session.next_user_id = snapshot.next_user_id;
        session.next_pin_id = snapshot.next_pin_id;
        Ok(session)
    }
}
