use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Counters collected over one engine run.
///
/// `messages_sent` counts messages handed to the runtime before combining;
/// `messages_delivered` counts what is actually transmitted after
/// sender-side combining, split into `messages_local` (same worker) and
/// `messages_remote`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub supersteps: u64,
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_local: u64,
    pub messages_remote: u64,
    pub payload_bytes: u64,
    /// Apply/compute calls that changed vertex state.
    pub vertex_updates: u64,
    /// All apply/compute invocations, changed or not.
    pub compute_calls: u64,
    pub active_vertices_per_superstep: Vec<u64>,
    /// The superstep, iteration or update budget ran out before the
    /// computation halted on its own.
    pub step_limit_reached: bool,
    /// Times the run was rolled back to a checkpoint.
    pub recoveries: u32,
    pub wall_time: Duration,
}

impl RunMetrics {
    pub(crate) fn record_delivery(&mut self, local: bool, bytes: usize) {
        self.messages_delivered += 1;
        if local {
            self.messages_local += 1;
        } else {
            self.messages_remote += 1;
        }
        self.payload_bytes += bytes as u64;
    }

    /// Records a message that is never combined: sent and delivered at once.
    pub(crate) fn record_message(&mut self, local: bool, bytes: usize) {
        self.messages_sent += 1;
        self.record_delivery(local, bytes);
    }

    /// Adds the traffic and update counters of a per-worker partial.
    pub(crate) fn absorb(&mut self, other: &RunMetrics) {
        self.messages_sent += other.messages_sent;
        self.messages_delivered += other.messages_delivered;
        self.messages_local += other.messages_local;
        self.messages_remote += other.messages_remote;
        self.payload_bytes += other.payload_bytes;
        self.vertex_updates += other.vertex_updates;
        self.compute_calls += other.compute_calls;
    }
}
