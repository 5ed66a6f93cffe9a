//! Operator gateway: JSON frames over WebSocket between a paced, supervised
//! run and any number of consoles. Frame tables live in `docs/protocol.md`.
//!
//! Client threads only move text; every command is applied by the engine
//! loop at a tick boundary, in arrival order.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use crate::cli::{out_dir, write_artifacts, CliError, ServeArgs};
use crate::engine::{r9, LogRecord, RobotEntry, RunOptions, RunResult, Simulation, StateSnapshot, StepOutcome};
use crate::mission::{MetricsReport, MissionPhase, OperatorCommand};
use crate::netsim::{NodeId, COMMAND_CENTRE};
use crate::world::ControllerMode;

pub const PROTOCOL: &str = "aidedex-op";
pub const PROTOCOL_VERSION: u32 = 1;

pub type ClientId = u64;

/// Console → gateway. `req` is echoed in the matching `ack` or `error`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientFrame {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub req: Option<u64>,
    #[serde(flatten)]
    pub body: ClientBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientBody {
    Hello { protocol: String, version: u32 },
    ApprovePhase,
    Retask { robot: String, task: String },
    ConfirmCandidate { id: u32 },
    DismissCandidate { id: u32 },
    Pause,
    Resume,
    Abort,
    SetPace { ticks_per_second: f64 },
    SnapshotRequest,
}

impl ClientBody {
    fn command(&self) -> Option<OperatorCommand> {
        Some(match self {
            ClientBody::ApprovePhase => OperatorCommand::ApprovePhase,
            ClientBody::Retask { robot, task } => OperatorCommand::Retask { robot: robot.clone(), task: task.clone() },
            ClientBody::ConfirmCandidate { id } => OperatorCommand::ConfirmCandidate { id: *id },
            ClientBody::DismissCandidate { id } => OperatorCommand::DismissCandidate { id: *id },
            ClientBody::Pause => OperatorCommand::Pause,
            ClientBody::Resume => OperatorCommand::Resume,
            ClientBody::Abort => OperatorCommand::Abort,
            _ => return None,
        })
    }
}

/// Gateway → console.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Hello {
        protocol: String,
        version: u32,
        mode: ControllerMode,
        width: u32,
        height: u32,
        cell_size: f64,
        robots: Vec<RobotEntry>,
        ticks_per_second: f64,
    },
    StateSnapshot {
        seq: u64,
        map_epoch: u64,
        state: StateSnapshot,
    },
    /// `cells` holds `[cell, log_odds]` pairs; `full` replaces the whole map.
    HeatmapDelta {
        seq: u64,
        map_epoch: u64,
        full: bool,
        cells: Vec<(u32, f64)>,
    },
    Event {
        seq: u64,
        record: LogRecord,
    },
    PhaseProposal {
        seq: u64,
        from: MissionPhase,
        to: MissionPhase,
    },
    Ack {
        req: Option<u64>,
        command: String,
    },
    Error {
        req: Option<u64>,
        code: String,
        message: String,
    },
    End {
        seq: u64,
        outcome: String,
        metrics: Box<MetricsReport>,
    },
}

enum Inbound {
    Joined(ClientId, Sender<String>),
    Text(ClientId, String),
    Left(ClientId),
}

/// A bound listener with its accept thread.
pub struct Gateway {
    addr: SocketAddr,
    inbox: Receiver<Inbound>,
    stop: Arc<AtomicBool>,
    threads: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl Gateway {
    pub fn bind(addr: &str) -> Result<Gateway, CliError> {
        let listener = TcpListener::bind(addr).map_err(|e| match e.kind() {
            ErrorKind::AddrInUse => CliError::PortInUse(addr.to_string()),
            _ => CliError::Io(format!("{addr}: {e}")),
        })?;
        listener.set_nonblocking(true).map_err(|e| CliError::Io(e.to_string()))?;
        let addr = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
        let (tx, inbox) = channel();
        let stop = Arc::new(AtomicBool::new(false));
        let threads = Arc::new(Mutex::new(Vec::new()));
        let (s, t) = (stop.clone(), threads.clone());
        let accept = std::thread::spawn(move || accept_loop(listener, tx, s, t));
        threads.lock().unwrap().push(accept);
        Ok(Gateway { addr, inbox, stop, threads })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        let handles: Vec<_> = std::mem::take(&mut *self.threads.lock().unwrap());
        for h in handles {
            let _ = h.join();
        }
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Inbound>, stop: Arc<AtomicBool>, threads: Arc<Mutex<Vec<JoinHandle<()>>>>) {
    let mut next: ClientId = 1;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let id = next;
                next += 1;
                let (tx, stop) = (tx.clone(), stop.clone());
                let h = std::thread::spawn(move || client_loop(id, stream, tx, stop));
                threads.lock().unwrap().push(h);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
            Err(_) => std::thread::sleep(Duration::from_millis(5)),
        }
    }
}

const WRITE_TIMEOUT: Duration = Duration::from_secs(2);

fn client_loop(id: ClientId, stream: TcpStream, inbox: Sender<Inbound>, stop: Arc<AtomicBool>) {
    if stream.set_nonblocking(false).is_err() {
        return;
    }
    let Ok(mut ws) = tungstenite::accept(stream) else {
        return;
    };
    let _ = ws.get_ref().set_read_timeout(Some(Duration::from_millis(5)));
    // a console that stops reading is dropped rather than stalling shutdown
    let _ = ws.get_ref().set_write_timeout(Some(WRITE_TIMEOUT));
    let (out_tx, out_rx) = channel::<String>();
    if inbox.send(Inbound::Joined(id, out_tx)).is_err() {
        return;
    }
    let alive = pump(id, &mut ws, &inbox, &out_rx, &stop);
    if alive {
        let _ = ws.close(None);
        let _ = ws.flush();
    }
    let _ = inbox.send(Inbound::Left(id));
}

/// Moves frames both ways until either side goes away. Returns whether the
/// socket is still open.
fn pump(id: ClientId, ws: &mut WebSocket<TcpStream>, inbox: &Sender<Inbound>, out: &Receiver<String>, stop: &AtomicBool) -> bool {
    loop {
        while !stop.load(Ordering::SeqCst) {
            match out.try_recv() {
                Ok(text) => {
                    if ws.send(Message::text(text)).is_err() {
                        return false;
                    }
                }
                Err(std::sync::mpsc::TryRecvError::Empty) => break,
                Err(std::sync::mpsc::TryRecvError::Disconnected) => return true,
            }
        }
        if stop.load(Ordering::SeqCst) {
            return true;
        }
        match ws.read() {
            Ok(Message::Text(t)) => {
                if inbox.send(Inbound::Text(id, t.to_string())).is_err() {
                    return true;
                }
            }
            Ok(Message::Close(_)) => return false,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ServeOptions {
    /// Ticks per second; 0 runs as fast as possible.
    pub ticks_per_second: f64,
    /// How long to keep consoles connected after the run ends.
    pub linger: Duration,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions { ticks_per_second: 10.0, linger: Duration::from_secs(5) }
    }
}

struct Session {
    clients: BTreeMap<ClientId, Sender<String>>,
    seq: u64,
    map_epoch: u64,
    map_node: Option<NodeId>,
    sent_map: Vec<i64>,
    sent_records: usize,
    proposal: Option<MissionPhase>,
    pace: f64,
}

impl Session {
    fn send(&self, to: ClientId, f: &ServerFrame) {
        if let Some(tx) = self.clients.get(&to) {
            let _ = tx.send(serde_json::to_string(f).expect("frame serializes"));
        }
    }

    fn broadcast(&self, f: &ServerFrame) {
        let text = serde_json::to_string(f).expect("frame serializes");
        for tx in self.clients.values() {
            let _ = tx.send(text.clone());
        }
    }

    fn next(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn full_map(&self, sim: &Simulation) -> ServerFrame {
        let h = sim.reference().heatmap();
        ServerFrame::HeatmapDelta {
            seq: self.seq,
            map_epoch: self.map_epoch,
            full: true,
            cells: (0..h.len()).map(|c| (c as u32, r9(h.log_odds(c)))).collect(),
        }
    }

    fn hello(&self, sim: &Simulation) -> ServerFrame {
        let s = sim.scenario();
        ServerFrame::Hello {
            protocol: PROTOCOL.into(),
            version: PROTOCOL_VERSION,
            mode: sim.mode(),
            width: s.grid.width(),
            height: s.grid.height(),
            cell_size: s.grid.cell_size(),
            robots: sim.event_log().header.robots,
            ticks_per_second: self.pace,
        }
    }

    /// Everything that changed since the last publish, to every console.
    fn publish(&mut self, sim: &Simulation) {
        let records = sim.records();
        for r in &records[self.sent_records..] {
            let seq = self.next();
            self.broadcast(&ServerFrame::Event { seq, record: r.clone() });
        }
        self.sent_records = records.len();

        let reference = sim.reference_node();
        let h = sim.reference().heatmap();
        if self.map_node != Some(reference) {
            self.map_node = Some(reference);
            self.map_epoch += 1;
            self.next();
            self.broadcast(&self.full_map(sim));
        } else {
            let cells: Vec<(u32, f64)> = h
                .deltas()
                .iter()
                .zip(&self.sent_map)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(c, _)| (c as u32, r9(h.log_odds(c))))
                .collect();
            if !cells.is_empty() {
                let seq = self.next();
                self.broadcast(&ServerFrame::HeatmapDelta { seq, map_epoch: self.map_epoch, full: false, cells });
            }
        }
        self.sent_map = h.deltas().to_vec();

        let centre = sim.coordinator(COMMAND_CENTRE).expect("centre exists");
        let proposal = centre.proposal();
        if let Some(to) = proposal.filter(|_| proposal != self.proposal) {
            let seq = self.next();
            self.broadcast(&ServerFrame::PhaseProposal { seq, from: centre.phase(), to });
        }
        self.proposal = proposal;

        let seq = self.next();
        self.broadcast(&ServerFrame::StateSnapshot { seq, map_epoch: self.map_epoch, state: sim.snapshot() });
    }

    fn handle(&mut self, sim: &mut Simulation, from: ClientId, text: &str) {
        let frame: ClientFrame = match serde_json::from_str(text) {
            Ok(f) => f,
            Err(e) => {
                self.send(from, &ServerFrame::Error { req: None, code: "bad_frame".into(), message: e.to_string() });
                return;
            }
        };
        let req = frame.req;
        match &frame.body {
            ClientBody::Hello { protocol, version } => {
                if protocol != PROTOCOL || *version != PROTOCOL_VERSION {
                    let message = format!("server speaks {PROTOCOL} v{PROTOCOL_VERSION}, client sent {protocol} v{version}");
                    self.send(from, &ServerFrame::Error { req, code: "version_mismatch".into(), message });
                } else {
                    self.send(from, &ServerFrame::Ack { req, command: "hello".into() });
                }
            }
            ClientBody::SetPace { ticks_per_second } => {
                if ticks_per_second.is_finite() && *ticks_per_second >= 0.0 {
                    self.pace = *ticks_per_second;
                    self.send(from, &ServerFrame::Ack { req, command: "set_pace".into() });
                } else {
                    self.send(from, &ServerFrame::Error { req, code: "invalid_command".into(), message: "pace must be a finite number >= 0".into() });
                }
            }
            ClientBody::SnapshotRequest => {
                self.send(from, &ServerFrame::StateSnapshot { seq: self.seq, map_epoch: self.map_epoch, state: sim.snapshot() });
                self.send(from, &self.full_map(sim));
            }
            body => {
                let cmd = body.command().expect("remaining frames are operator commands");
                let name = serde_json::to_value(&cmd).ok().and_then(|v| v["cmd"].as_str().map(String::from)).unwrap_or_default();
                match sim.apply_command(cmd) {
                    Ok(()) => self.send(from, &ServerFrame::Ack { req, command: name }),
                    Err(e) => self.send(from, &ServerFrame::Error { req, code: "invalid_command".into(), message: e.to_string() }),
                }
                self.publish(sim);
            }
        }
    }
}

/// Drives `sim` to the end while serving consoles on `gateway`.
pub fn serve(gateway: Gateway, mut sim: Simulation, opts: ServeOptions) -> RunResult {
    let mut s = Session {
        clients: BTreeMap::new(),
        seq: 0,
        map_epoch: 0,
        map_node: None,
        sent_map: Vec::new(),
        sent_records: 0,
        proposal: None,
        pace: opts.ticks_per_second,
    };
    s.publish(&sim);
    let mut next_tick = Instant::now();
    let mut ended: Option<Instant> = None;
    loop {
        while let Ok(msg) = gateway.inbox.try_recv() {
            match msg {
                Inbound::Joined(id, tx) => {
                    s.clients.insert(id, tx);
                    s.send(id, &s.hello(&sim));
                    s.send(id, &ServerFrame::StateSnapshot { seq: s.seq, map_epoch: s.map_epoch, state: sim.snapshot() });
                    s.send(id, &s.full_map(&sim));
                    if let Some(to) = s.proposal {
                        let from = sim.coordinator(COMMAND_CENTRE).expect("centre exists").phase();
                        s.send(id, &ServerFrame::PhaseProposal { seq: s.seq, from, to });
                    }
                }
                Inbound::Text(id, text) => s.handle(&mut sim, id, &text),
                Inbound::Left(id) => {
                    s.clients.remove(&id);
                }
            }
        }
        if let Some(at) = ended {
            if at.elapsed() >= opts.linger {
                break;
            }
            std::thread::sleep(Duration::from_millis(5));
            continue;
        }
        if sim.is_finished() {
            s.publish(&sim);
            let metrics = sim.metrics();
            let seq = s.next();
            s.broadcast(&ServerFrame::End { seq, outcome: metrics.outcome.clone(), metrics: Box::new(metrics) });
            ended = Some(Instant::now());
            continue;
        }
        let now = Instant::now();
        // a pending proposal holds the clock until the operator answers it
        let waiting = sim.coordinator(COMMAND_CENTRE).is_some_and(|c| c.awaiting_approval());
        if sim.is_paused() || waiting || now < next_tick {
            std::thread::sleep(Duration::from_millis(1).min(next_tick.saturating_duration_since(now)).max(Duration::from_micros(200)));
            continue;
        }
        if sim.step() == StepOutcome::Advanced {
            s.publish(&sim);
        }
        next_tick = if s.pace > 0.0 { next_tick.max(now - Duration::from_millis(100)) + Duration::from_secs_f64(1.0 / s.pace) } else { now };
    }
    // dropping the senders lets client threads close their sockets
    s.clients.clear();
    gateway.shutdown();
    sim.into_result()
}

pub fn cmd_serve(a: &ServeArgs) -> Result<MetricsReport, CliError> {
    let scenario = a.source.scenario(a.seed)?;
    let opts = RunOptions { max_ticks: a.source.max_ticks, supervised: true, faults: a.source.faults()?, models: None };
    let sim = Simulation::new(scenario, opts)?;
    let gateway = Gateway::bind(&format!("{}:{}", a.bind, a.port))?;
    println!("operator gateway on ws://{} (pace {} ticks/s)", gateway.local_addr(), a.pace);
    let serve_opts = ServeOptions { ticks_per_second: a.pace.max(0.0), linger: Duration::from_secs_f64(a.linger.max(0.0)) };
    let r = serve(gateway, sim, serve_opts);
    let dir = out_dir(a.out.as_deref());
    write_artifacts(&dir, &r)?;
    println!("{} at tick {} -> {}", r.metrics.outcome, r.metrics.ticks, dir.display());
    Ok(r.metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_frames_parse() {
        let f: ClientFrame = serde_json::from_str(r#"{"type":"dismiss_candidate","id":4,"req":9}"#).unwrap();
        assert_eq!(f, ClientFrame { req: Some(9), body: ClientBody::DismissCandidate { id: 4 } });
        let f: ClientFrame = serde_json::from_str(r#"{"type":"pause"}"#).unwrap();
        assert_eq!(f.body.command(), Some(OperatorCommand::Pause));
        let f: ClientFrame = serde_json::from_str(r#"{"type":"set_pace","ticks_per_second":2.5}"#).unwrap();
        assert_eq!(f.body.command(), None);
        assert!(serde_json::from_str::<ClientFrame>(r#"{"type":"self_destruct"}"#).is_err());
    }

    #[test]
    fn port_in_use() {
        let a = Gateway::bind("127.0.0.1:0").unwrap();
        let taken = a.local_addr().to_string();
        assert!(matches!(Gateway::bind(&taken), Err(CliError::PortInUse(_))));
        a.shutdown();
    }
}
