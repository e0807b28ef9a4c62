//! Shared-workspace perspective alignment: users rotate their own replica of
//! the shared objects about a vertical pivot axis to adopt another user's
//! view, while remote hands are re-rotated so pointing stays correct.
//!
//! `geom` holds the pure math, `session` the authoritative state, `protocol`
//! the wire format, `server` the websocket host and `harness` the scripted
//! bots, deterministic simulator and metrics.

pub mod cli;
pub mod geom;
pub mod harness;
pub mod protocol;
pub mod scene;
pub mod server;
pub mod session;
