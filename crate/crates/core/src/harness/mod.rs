//! In-process simulation: scripted bots over lossy virtual links against the
//! real server core, plus the behavioral metrics pipeline.

mod analyze;
mod bot;
mod live;
mod metrics;
mod net;
mod replica;
mod script;
mod sim;

use std::path::PathBuf;

pub use analyze::{analyze, analyze_events, parse_log, LosResult, Summary, UserSummary};
pub use bot::{Bot, PointedRef, POSE_RATE_HZ};
pub use live::{run_live_bot, LiveReport};
pub use metrics::{
    mutual_gaze, reference_error, reference_error_for, to_jsonl, GazeTracker, MetricsEvent, ViewerSample,
    GAZE_CONE_HALF_ANGLE_DEG, GAZE_MIN_EPISODE_S,
};
pub use net::{Link, SimNetConfig};
pub use replica::{Replica, ReplicaUser};
pub use script::{load_scenario, BotSpec, Command, Hand, HandRef, LosCheck, Scenario};
pub use sim::{run_scenario, run_scenario_file, SimOutput, SIM_TICK_HZ};

use crate::protocol::ProtocolError;
use crate::scene::SceneError;
use crate::session::SessionError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("bot {bot}, command {index}: {reason}")]
    Scenario { bot: String, index: usize, reason: String },
    #[error("heads coincide")]
    CoincidentHeads,
    #[error("line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("{0}")]
    Live(String),
}
