//! Drives the radio model by hand: multi-hop delivery, loss, a partition that
//! parks traffic and a reconnect that releases it.

use std::collections::BTreeMap;

use aidedex::netsim::{NetConfig, Network, Outages, Topology};

fn main() {
    let cfg = NetConfig { p_link_loss: 0.05, ..NetConfig::default() };
    let range = 25.0;
    let mut net: Network<&'static str> = Network::new(cfg, 4);
    // a chain of six nodes 20 m apart
    let mut pos: BTreeMap<u32, (f64, f64)> = (0..6).map(|n| (n, (n as f64 * 20.0, 0.0))).collect();
    net.set_topology(Topology::build(&pos, range, &Outages::default()));
    println!("route 0 -> 5: {:?}", net.topology().route(0, 5).unwrap());

    for t in 0..10 {
        net.send(0, 5, "status", t);
    }
    net.broadcast(2, "hello", 0);
    for t in 0..20 {
        for d in net.deliver(t) {
            println!("tick {t:>2}: {} -> {} {:?}", d.src, d.dst, d.payload);
        }
    }

    // node 3 drives away: two partitions, traffic to the far side waits
    pos.insert(3, (60.0, 200.0));
    net.set_topology(Topology::build(&pos, range, &Outages::default()));
    println!("partitions: {:?}", net.topology().partitions());
    net.send(0, 5, "parked", 20);
    for t in 20..30 {
        assert!(net.deliver(t).is_empty());
    }
    println!("pending while cut: {}", net.pending());
    pos.insert(3, (60.0, 0.0));
    net.set_topology(Topology::build(&pos, range, &Outages::default()));
    for t in 30..40 {
        for d in net.deliver(t) {
            println!("tick {t:>2}: {} -> {} {:?} after the reconnect", d.src, d.dst, d.payload);
        }
    }
    let st = net.stats();
    println!("sent {} delivered {} lost {}", st.sent, st.delivered, st.lost);
}
