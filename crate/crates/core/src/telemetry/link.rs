//! Tether impairment shim: fixed latency, whole-chunk drops and per-byte
//! bit corruption, all driven by a seeded RNG. Defaults leave the link clean.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Chunks in flight beyond this are dropped on send.
pub const MAX_IN_FLIGHT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub latency_ms: f64,
    pub drop_prob: f64,
    pub corrupt_prob: f64,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.latency_ms.is_finite() && self.latency_ms >= 0.0) {
            return Err("link.latency_ms must be >= 0".into());
        }
        for (name, p) in [
            ("drop_prob", self.drop_prob),
            ("corrupt_prob", self.corrupt_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("link.{name} must be in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.latency_ms == 0.0 && self.drop_prob == 0.0 && self.corrupt_prob == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkStats {
    pub sent: u64,
    pub dropped: u64,
    pub corrupted_bytes: u64,
}

/// One direction of the tether, clocked by simulation time.
#[derive(Debug, Clone)]
pub struct Link {
    config: LinkConfig,
    rng: ChaCha8Rng,
    in_flight: VecDeque<(f64, Vec<u8>)>,
    stats: LinkStats,
}

impl Link {
    pub fn new(config: LinkConfig, seed: u64) -> Self {
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            in_flight: VecDeque::new(),
            stats: LinkStats::default(),
        }
    }

    pub fn config(&self) -> LinkConfig {
        self.config
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    pub fn send(&mut self, now: f64, mut bytes: Vec<u8>) {
        self.stats.sent += 1;
        if self.config.drop_prob > 0.0 && self.rng.random::<f64>() < self.config.drop_prob {
            self.stats.dropped += 1;
            return;
        }
        if self.in_flight.len() >= MAX_IN_FLIGHT {
            self.stats.dropped += 1;
            return;
        }
        if self.config.corrupt_prob > 0.0 {
            for b in bytes.iter_mut() {
                if self.rng.random::<f64>() < self.config.corrupt_prob {
                    *b ^= 1 << self.rng.random_range(0..8);
                    self.stats.corrupted_bytes += 1;
                }
            }
        }
        self.in_flight
            .push_back((now + self.config.latency_ms / 1000.0, bytes));
    }

    /// Everything due at or before `now`, concatenated in send order.
    pub fn poll(&mut self, now: f64) -> Vec<u8> {
        let mut out = Vec::new();
        // Tolerance keeps sim-time rounding from slipping a delivery by a tick.
        while let Some((due, _)) = self.in_flight.front() {
            if *due > now + 1e-9 {
                break;
            }
            let (_, chunk) = self.in_flight.pop_front().expect("front exists");
            out.extend(chunk);
        }
        out
    }
}
