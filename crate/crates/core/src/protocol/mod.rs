//! Wire protocol between clients and the session server.
//!
//! One JSON document per frame, keys sorted, numbers in shortest round-trip
//! form. Angles are radians, lengths meters, quaternions `[w, x, y, z]`.
//! Offsets (`rho`) are wrapped to `(-π, π]` on the wire; snapshots carry the
//! unwrapped values.

mod codec;

use crate::geom::{AnchorPair, Pose, Vec3};
use crate::session::{Pin, Snapshot, UserId};

pub use codec::{decode, decode_bytes, encode};

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("frame is not a JSON object: {0}")]
    MalformedFrame(String),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("unsupported protocol version {0}")]
    VersionMismatch(String),
    #[error("schema violation at {field}: {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error("cannot encode {field}: {reason}")]
    UnencodableMessage { field: String, reason: String },
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::MalformedFrame(_) => "malformed_frame",
            ProtocolError::UnknownType(_) => "unknown_type",
            ProtocolError::VersionMismatch(_) => "version_mismatch",
            ProtocolError::SchemaViolation { .. } => "schema_violation",
            ProtocolError::UnencodableMessage { .. } => "unencodable_message",
        }
    }

    /// Offending field for schema and encoding errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            ProtocolError::SchemaViolation { field, .. } | ProtocolError::UnencodableMessage { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReliabilityClass {
    /// In order, exactly once.
    Reliable,
    /// May be dropped; superseded by the next update.
    Droppable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    // client -> server
    Hello { name: String },
    CalibrateRequest { pairs: Vec<AnchorPair> },
    Pose { head: Pose, lh: Pose, rh: Pose, seq: u64 },
    AlignRequest { ray_origin: Vec3, ray_dir: Vec3 },
    PinPlace { world: Vec3 },
    Leave,
    // server -> client
    Welcome { user_id: UserId, color: u32, snapshot: Snapshot },
    CalibrateResult { yaw: f64, translation: Vec3, rms: f64 },
    UserJoined { id: UserId, name: String, color: u32 },
    UserLeft { id: UserId },
    PoseUpdate { id: UserId, head: Pose, lh: Pose, rh: Pose, rho: f64, seq: u64 },
    AlignStarted { follower: UserId, leader: UserId, rho_start: f64, delta: f64, duration: f64, t0: f64 },
    AlignCompleted { follower: UserId, rho: f64 },
    PinAdded { pin: Pin },
    Error { code: String, detail: String },
}

/// Every message type, client-to-server first.
pub const CATALOG: [&str; 15] = [
    "hello",
    "calibrate_request",
    "pose",
    "align_request",
    "pin_place",
    "leave",
    "welcome",
    "calibrate_result",
    "user_joined",
    "user_left",
    "pose_update",
    "align_started",
    "align_completed",
    "pin_added",
    "error",
];

impl Message {
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::CalibrateRequest { .. } => "calibrate_request",
            Message::Pose { .. } => "pose",
            Message::AlignRequest { .. } => "align_request",
            Message::PinPlace { .. } => "pin_place",
            Message::Leave => "leave",
            Message::Welcome { .. } => "welcome",
            Message::CalibrateResult { .. } => "calibrate_result",
            Message::UserJoined { .. } => "user_joined",
            Message::UserLeft { .. } => "user_left",
            Message::PoseUpdate { .. } => "pose_update",
            Message::AlignStarted { .. } => "align_started",
            Message::AlignCompleted { .. } => "align_completed",
            Message::PinAdded { .. } => "pin_added",
            Message::Error { .. } => "error",
        }
    }

    pub fn reliability(&self) -> ReliabilityClass {
        match self {
            Message::Pose { .. } | Message::PoseUpdate { .. } => ReliabilityClass::Droppable,
            _ => ReliabilityClass::Reliable,
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Message::Hello { .. }
            | Message::CalibrateRequest { .. }
            | Message::Pose { .. }
            | Message::AlignRequest { .. }
            | Message::PinPlace { .. }
            | Message::Leave => Direction::ClientToServer,
            _ => Direction::ServerToClient,
        }
    }

    pub fn error(code: impl Into<String>, detail: impl Into<String>) -> Self {
        Message::Error { code: code.into(), detail: detail.into() }
    }
}
