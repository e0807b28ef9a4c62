//! Authoritative session server: a transport-free core plus a websocket front.

mod core;
mod transport;

pub use self::core::{ConnId, Effects, Outbound, ServerCore, ServerEvent, ServerEventKind};
pub use self::transport::{serve, Server, ServerConfig, ServerError, ServerReport, ShutdownHandle};

/// Fixed-rate schedule anchored at `start`: the n-th firing is due at
/// `start + n / hz`, so rounding never accumulates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cadence {
    start: f64,
    hz: f64,
    next: u64,
}

impl Cadence {
    pub fn new(start: f64, hz: f64) -> Self {
        assert!(hz > 0.0 && hz.is_finite(), "cadence rate must be positive");
        Self { start, hz, next: 0 }
    }

    pub fn next_due(&self) -> f64 {
        self.start + self.next as f64 / self.hz
    }

    /// True at most once per slot; skipped slots are dropped, not replayed.
    pub fn poll(&mut self, now: f64) -> bool {
        if now < self.next_due() {
            return false;
        }
        let elapsed = ((now - self.start) * self.hz).floor() as u64;
        self.next = elapsed.max(self.next) + 1;
        true
    }
}
