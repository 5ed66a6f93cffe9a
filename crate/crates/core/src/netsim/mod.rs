//! Mesh radio network: disk-graph topology, hop-by-hop forwarding, loss and outages.

mod network;
mod topology;

pub use network::{Delivery, DropReason, MessageRecord, MsgId, NetStats, Network, Payload, TraceEvent, TraceKind};
pub use topology::{Outages, Rect, Topology};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Node 0 is the command centre; robots use their robot ids.
pub type NodeId = u32;
pub const COMMAND_CENTRE: NodeId = 0;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    /// Link exists iff nodes are within this many meters.
    pub radio_range: f64,
    /// Independent loss probability per hop.
    pub p_link_loss: f64,
    /// Ticks per hop.
    pub base_latency: u32,
    /// Position of the command centre (meters).
    pub command_centre_pos: [f64; 2],
    /// Processing steps (hops or waits) before a message is dropped.
    pub default_ttl: u32,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { radio_range: 30.0, p_link_loss: 0.02, base_latency: 1, command_centre_pos: [1.5, 1.5], default_ttl: 100 }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.radio_range > 0.0) {
            return Err("radio_range must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.p_link_loss) {
            return Err("p_link_loss must be in [0,1)".into());
        }
        if self.base_latency == 0 {
            return Err("base_latency must be >= 1".into());
        }
        if self.default_ttl == 0 {
            return Err("default_ttl must be >= 1".into());
        }
        if !self.command_centre_pos.iter().all(|v| v.is_finite()) {
            return Err("command_centre_pos must be finite".into());
        }
        Ok(())
    }
}
