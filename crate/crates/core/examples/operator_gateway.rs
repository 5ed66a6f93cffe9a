//! Serves a supervised mission over WebSocket and plays a console that
//! approves every phase proposal.
//!
//! With `--listen` the gateway stays up on 127.0.0.1:8765 for a real console.

use std::time::Duration;

use aidedex::engine::{RunOptions, Simulation};
use aidedex::opserver::{serve, Gateway, ServeOptions, PROTOCOL, PROTOCOL_VERSION};
use aidedex::world::{generate_scenario, ScenarioParams};
use serde_json::{json, Value};
use tungstenite::Message;

fn main() {
    let listen = std::env::args().any(|a| a == "--listen");
    let s = generate_scenario(&ScenarioParams::sized(24, 24, 4), 2).expect("scenario");
    let sim = Simulation::new(s, RunOptions { supervised: true, ..Default::default() }).expect("sim");
    let gw = Gateway::bind(if listen { "127.0.0.1:8765" } else { "127.0.0.1:0" }).expect("bind");
    let addr = gw.local_addr();
    println!("gateway on ws://{addr}");
    let pace = if listen { 10.0 } else { 0.0 };
    let server = std::thread::spawn(move || serve(gw, sim, ServeOptions { ticks_per_second: pace, linger: Duration::from_millis(300) }));
    if listen {
        let r = server.join().unwrap();
        println!("{}", r.metrics.outcome);
        return;
    }

    let (mut ws, _) = tungstenite::connect(format!("ws://{addr}")).expect("connect");
    let send = |ws: &mut tungstenite::WebSocket<_>, v: Value| ws.send(Message::text(v.to_string())).unwrap();
    send(&mut ws, json!({"type": "hello", "protocol": PROTOCOL, "version": PROTOCOL_VERSION, "req": 1}));
    let mut req = 1;
    loop {
        let Ok(Message::Text(t)) = ws.read() else { continue };
        let v: Value = serde_json::from_str(t.as_str()).unwrap();
        match v["type"].as_str().unwrap_or("") {
            "phase_proposal" => {
                println!("proposal {} -> {}, approving", v["from"], v["to"]);
                req += 1;
                send(&mut ws, json!({"type": "approve_phase", "req": req}));
            }
            "event" if v["record"]["kind"] == "phase" || v["record"]["kind"] == "candidate" => {
                println!("tick {:>4}: {}", v["record"]["tick"], v["record"])
            }
            "end" => {
                println!("end: {} after {} ticks", v["outcome"], v["metrics"]["ticks"]);
                break;
            }
            _ => {}
        }
    }
    server.join().unwrap();
}
