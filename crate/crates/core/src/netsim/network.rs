use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NetConfig, NodeId, Topology};
use crate::engine::{rng_stream, StreamPurpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MsgId(pub u64);

/// What the network needs to know about a message body.
pub trait Payload: Clone {
    fn kind(&self) -> &'static str;
    fn size_bytes(&self) -> usize;
}

impl Payload for &'static str {
    fn kind(&self) -> &'static str {
        "text"
    }

    fn size_bytes(&self) -> usize {
        self.len()
    }
}

impl Payload for u64 {
    fn kind(&self) -> &'static str {
        "u64"
    }

    fn size_bytes(&self) -> usize {
        8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Lost on a hop.
    Lost,
    /// TTL ran out before arrival.
    #[serde(rename = "ttl")]
    Expired,
    /// The node holding the message left the network.
    NodeDown,
    /// A flood copy's link disappeared before it was sent.
    NoLink,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TraceKind {
    Sent,
    Hop { from: NodeId, to: NodeId },
    Parked,
    Delivered,
    Dropped { reason: DropReason },
}

/// One line of the optional message trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub msg: MsgId,
    pub node: NodeId,
    #[serde(flatten)]
    pub kind: TraceKind,
}

/// Final outcome of one message (or of one flood copy's arrival).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub msg: MsgId,
    pub src: NodeId,
    pub dst: Option<NodeId>,
    pub kind: String,
    pub bytes: usize,
    pub sent: u64,
    pub delivered: Option<u64>,
    pub dropped: Option<(u64, DropReason)>,
    pub hops: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Delivery<P> {
    pub id: MsgId,
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: P,
    pub sent_tick: u64,
    pub tick: u64,
    pub hops: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetStats {
    pub sent: u64,
    pub broadcasts: u64,
    pub delivered: u64,
    pub lost: u64,
    pub expired: u64,
    pub node_down: u64,
    pub duplicates_suppressed: u64,
    pub hops: u64,
    pub latency_ticks: u64,
    pub bytes_sent: u64,
}

impl NetStats {
    pub fn dropped(&self) -> u64 {
        self.lost + self.expired + self.node_down
    }
}

#[derive(Clone, Debug)]
struct InFlight<P> {
    id: MsgId,
    src: NodeId,
    dst: NodeId,
    at: NodeId,
    payload: P,
    ttl: u32,
    sent_tick: u64,
    hops: u32,
    /// Flood copies carry the broadcast id and travel exactly one hop.
    flood: Option<MsgId>,
}

/// Store-and-forward message transport over a changing topology.
///
/// Each queued message is processed once per hop latency. It is routed on the
/// current topology every time, so it follows whatever path exists at that
/// tick; with no path it waits a tick at its current node. Every processing
/// step costs one TTL unit.
#[derive(Clone, Debug)]
pub struct Network<P> {
    config: NetConfig,
    topology: Topology,
    queue: BTreeMap<(u64, MsgId), InFlight<P>>,
    next_id: u64,
    rng: ChaCha8Rng,
    loss_override: Option<f64>,
    flood_seen: BTreeMap<MsgId, BTreeSet<NodeId>>,
    stats: NetStats,
    trace: Option<Vec<TraceEvent>>,
    records: Option<Vec<MessageRecord>>,
}

impl<P: Payload> Network<P> {
    pub fn new(config: NetConfig, seed: u64) -> Network<P> {
        Network {
            config,
            topology: Topology::default(),
            queue: BTreeMap::new(),
            next_id: 0,
            rng: rng_stream(seed, 0, StreamPurpose::Net),
            loss_override: None,
            flood_seen: BTreeMap::new(),
            stats: NetStats::default(),
            trace: None,
            records: None,
        }
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Keeps one [`MessageRecord`] per finished message.
    pub fn enable_records(&mut self) {
        self.records.get_or_insert_with(Vec::new);
    }

    pub fn take_records(&mut self) -> Vec<MessageRecord> {
        self.records.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn record(&mut self, m: &InFlight<P>, delivered: Option<u64>, dropped: Option<(u64, DropReason)>) {
        if let Some(r) = self.records.as_mut() {
            r.push(MessageRecord {
                msg: m.flood.unwrap_or(m.id),
                src: m.src,
                dst: if m.flood.is_some() && dropped.is_some() { None } else { Some(m.dst) },
                kind: m.payload.kind().to_string(),
                bytes: m.payload.size_bytes(),
                sent: m.sent_tick,
                delivered,
                dropped,
                hops: m.hops,
            });
        }
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn set_topology(&mut self, topology: Topology) {
        self.topology = topology;
    }

    /// Raises per-hop loss to at least `p` while set (jamming).
    pub fn set_loss_override(&mut self, p: Option<f64>) {
        self.loss_override = p;
    }

    pub fn effective_loss(&self) -> f64 {
        match self.loss_override {
            Some(p) => p.max(self.config.p_link_loss),
            None => self.config.p_link_loss,
        }
    }

    pub fn stats(&self) -> &NetStats {
        &self.stats
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    fn trace(&mut self, tick: u64, msg: MsgId, node: NodeId, kind: TraceKind) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent { tick, msg, node, kind });
        }
    }

    fn fresh_id(&mut self) -> MsgId {
        let id = MsgId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn send(&mut self, src: NodeId, dst: NodeId, payload: P, tick: u64) -> MsgId {
        let ttl = self.config.default_ttl;
        self.send_with_ttl(src, dst, payload, tick, ttl)
    }

    pub fn send_with_ttl(&mut self, src: NodeId, dst: NodeId, payload: P, tick: u64, ttl: u32) -> MsgId {
        let id = self.fresh_id();
        self.stats.sent += 1;
        self.stats.bytes_sent += payload.size_bytes() as u64;
        self.trace(tick, id, src, TraceKind::Sent);
        let due = tick + self.config.base_latency as u64;
        let m = InFlight { id, src, dst, at: src, payload, ttl: ttl.max(1), sent_tick: tick, hops: 0, flood: None };
        self.queue.insert((due, id), m);
        id
    }

    /// Floods `payload` from `src` to every reachable node, each at most once.
    pub fn broadcast(&mut self, src: NodeId, payload: P, tick: u64) -> MsgId {
        let id = self.fresh_id();
        self.stats.broadcasts += 1;
        self.stats.bytes_sent += payload.size_bytes() as u64;
        self.trace(tick, id, src, TraceKind::Sent);
        self.flood_seen.insert(id, BTreeSet::from([src]));
        let neighbors: Vec<_> = self.topology.neighbors(src).collect();
        for n in neighbors {
            self.spawn_flood_copy(id, src, src, n, payload.clone(), tick, 0);
        }
        id
    }

    #[allow(clippy::too_many_arguments)]
    fn spawn_flood_copy(&mut self, flood: MsgId, origin: NodeId, at: NodeId, to: NodeId, payload: P, tick: u64, hops: u32) {
        let id = self.fresh_id();
        let due = tick + self.config.base_latency as u64;
        let m = InFlight { id, src: origin, dst: to, at, payload, ttl: 1, sent_tick: tick, hops, flood: Some(flood) };
        self.queue.insert((due, id), m);
    }

    /// Processes every message due at or before `tick`; returns arrivals in processing order.
    pub fn deliver(&mut self, tick: u64) -> Vec<Delivery<P>> {
        let mut out = Vec::new();
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > tick {
                break;
            }
            let m = entry.remove();
            match m.flood {
                None => self.process_unicast(m, tick, &mut out),
                Some(f) => self.process_flood(f, m, tick, &mut out),
            }
        }
        out
    }

    fn hop_survives(&mut self) -> bool {
        let p = self.effective_loss();
        self.rng.gen::<f64>() >= p
    }

    fn drop_msg(&mut self, m: &InFlight<P>, tick: u64, reason: DropReason) {
        match reason {
            DropReason::Lost | DropReason::NoLink => self.stats.lost += 1,
            DropReason::Expired => self.stats.expired += 1,
            DropReason::NodeDown => self.stats.node_down += 1,
        }
        let id = m.flood.unwrap_or(m.id);
        self.trace(tick, id, m.at, TraceKind::Dropped { reason });
        self.record(m, None, Some((tick, reason)));
    }

    fn arrive(&mut self, m: InFlight<P>, tick: u64, out: &mut Vec<Delivery<P>>) {
        self.stats.delivered += 1;
        self.stats.hops += m.hops as u64;
        self.stats.latency_ticks += tick - m.sent_tick;
        let id = m.flood.unwrap_or(m.id);
        self.trace(tick, id, m.dst, TraceKind::Delivered);
        self.record(&m, Some(tick), None);
        out.push(Delivery { id, src: m.src, dst: m.dst, payload: m.payload, sent_tick: m.sent_tick, tick, hops: m.hops });
    }

    fn process_unicast(&mut self, mut m: InFlight<P>, tick: u64, out: &mut Vec<Delivery<P>>) {
        if !self.topology.contains(m.at) {
            return self.drop_msg(&m, tick, DropReason::NodeDown);
        }
        if m.at == m.dst {
            return self.arrive(m, tick, out);
        }
        let next = self.topology.route(m.at, m.dst).ok().flatten().and_then(|p| p.first().copied());
        m.ttl -= 1;
        let Some(next) = next else {
            if m.ttl == 0 {
                return self.drop_msg(&m, tick, DropReason::Expired);
            }
            self.trace(tick, m.id, m.at, TraceKind::Parked);
            self.queue.insert((tick + 1, m.id), m);
            return;
        };
        if !self.hop_survives() {
            return self.drop_msg(&m, tick, DropReason::Lost);
        }
        self.trace(tick, m.id, m.at, TraceKind::Hop { from: m.at, to: next });
        m.at = next;
        m.hops += 1;
        if m.at == m.dst {
            return self.arrive(m, tick, out);
        }
        if m.ttl == 0 {
            return self.drop_msg(&m, tick, DropReason::Expired);
        }
        let due = tick + self.config.base_latency as u64;
        self.queue.insert((due, m.id), m);
    }

    fn process_flood(&mut self, flood: MsgId, mut m: InFlight<P>, tick: u64, out: &mut Vec<Delivery<P>>) {
        if !self.topology.has_edge(m.at, m.dst) {
            return self.drop_msg(&m, tick, DropReason::NoLink);
        }
        if !self.hop_survives() {
            return self.drop_msg(&m, tick, DropReason::Lost);
        }
        self.trace(tick, flood, m.at, TraceKind::Hop { from: m.at, to: m.dst });
        let node = m.dst;
        let seen = self.flood_seen.entry(flood).or_default();
        if !seen.insert(node) {
            self.stats.duplicates_suppressed += 1;
            return;
        }
        m.hops += 1;
        m.at = node;
        let next: Vec<NodeId> = {
            let seen = &self.flood_seen[&flood];
            self.topology.neighbors(node).filter(|n| !seen.contains(n)).collect()
        };
        for n in next {
            self.spawn_flood_copy(flood, m.src, node, n, m.payload.clone(), tick, m.hops);
        }
        self.arrive(m, tick, out);
    }
}
