use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::protocol::ReliabilityClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimNetConfig {
    #[serde(default)]
    pub one_way_latency: f64,
    #[serde(default)]
    pub jitter: f64,
    /// Applies to droppable messages only.
    #[serde(default)]
    pub drop_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimNetConfig {
    fn default() -> Self {
        Self { one_way_latency: 0.0, jitter: 0.0, drop_prob: 0.0, seed: 0 }
    }
}

impl SimNetConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |why: String| Err(HarnessError::Config(why));
        if !(self.one_way_latency.is_finite() && self.one_way_latency >= 0.0) {
            return bad(format!("latency must be >= 0, got {}", self.one_way_latency));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0 && self.jitter <= self.one_way_latency) {
            return bad(format!("jitter must be in [0, latency], got {}", self.jitter));
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return bad(format!("drop_prob must be in [0, 1], got {}", self.drop_prob));
        }
        Ok(())
    }
}

/// One direction of one connection. Delivery is FIFO: jitter never reorders.
#[derive(Debug, Clone)]
pub struct Link {
    rng: ChaCha8Rng,
    latency: f64,
    jitter: f64,
    drop_prob: f64,
    last_delivery: f64,
}

impl Link {
    /// Each link gets its own stream of the shared seed so adding a bot does
    /// not perturb the other links' schedules.
    pub fn new(config: &SimNetConfig, link_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(link_id);
        Self {
            rng,
            latency: config.one_way_latency,
            jitter: config.jitter,
            drop_prob: config.drop_prob,
            last_delivery: f64::NEG_INFINITY,
        }
    }

    /// Delivery time for a message sent at `now`, or None if it was dropped.
    pub fn schedule(&mut self, now: f64, class: ReliabilityClass) -> Option<f64> {
        let offset = if self.jitter > 0.0 { self.rng.gen_range(-self.jitter..=self.jitter) } else { 0.0 };
        if class == ReliabilityClass::Droppable && self.drop_prob > 0.0 && self.rng.gen_bool(self.drop_prob) {
            return None;
        }
        let at = (now + self.latency + offset).max(self.last_delivery).max(now);
        self.last_delivery = at;
        Some(at)
    }
}
