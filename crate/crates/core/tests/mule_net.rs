//! End-to-end data sharing over the simulated mesh: manifests flood the
//! connected component, pulls are routed hop by hop, and store-and-forward
//! ferrying moves data between agents that never share a link.

use burrow_core::geom::Point2;
use burrow_core::mule::{Body, Mule, MuleConfig, Outgoing, Packet, QoS, SendTo, TopicConfig};
use burrow_core::netsim::{Class, CommsConfig, NetSim};
use burrow_core::types::AgentId;
use burrow_core::wire::topic_hash;
use std::collections::BTreeMap;
use std::sync::Arc;

const DT: f64 = 0.1;

struct Harness {
    net: NetSim,
    mules: BTreeMap<AgentId, Mule>,
    inboxes: BTreeMap<AgentId, Vec<(AgentId, Arc<Packet>)>>,
    tick: u64,
}

impl Harness {
    fn new(agents: &[(u16, Point2)], cfg: CommsConfig) -> Harness {
        let topics = vec![TopicConfig::new("bulk", QoS::Persistent, 1)];
        let mut net = NetSim::new(cfg, vec![]);
        let mut mules = BTreeMap::new();
        let mut inboxes = BTreeMap::new();
        for &(id, pos) in agents {
            let id = AgentId(id);
            net.add_agent(id, pos, true);
            mules.insert(id, Mule::new(id, topics.clone(), MuleConfig::default()));
            inboxes.insert(id, Vec::new());
        }
        Harness { net, mules, inboxes, tick: 0 }
    }

    fn send(net: &mut NetSim, src: AgentId, out: Outgoing) {
        match out.to {
            SendTo::AllPeers => net.send_broadcast(src, out.packet, out.topic),
            SendTo::Peer(dst) => {
                let class = match out.packet.as_ref() {
                    Packet::Data(d) if d.qos == QoS::Volatile => Class::Volatile,
                    _ => Class::PersistentSync,
                };
                net.send_unicast(src, dst, out.packet, class, out.topic);
            }
        }
    }

    /// One network+protocol tick. Asserts pull hygiene: no agent ever
    /// requests an id it already holds.
    fn step(&mut self) {
        self.net.update_links(self.tick as f64 * DT, |_, _| true);
        let ids: Vec<AgentId> = self.mules.keys().copied().collect();
        for id in ids {
            let peers = self.net.reachable_agents(id);
            let inbox = std::mem::take(self.inboxes.get_mut(&id).unwrap());
            let mule = self.mules.get_mut(&id).unwrap();
            let outs = mule.step(self.tick, &peers, inbox);
            for out in outs {
                if let Packet::Request(req) = out.packet.as_ref() {
                    for &rid in &req.ids {
                        assert!(
                            !self.mules[&id].holds(rid),
                            "{id} requested already-held {rid:?}"
                        );
                    }
                }
                Self::send(&mut self.net, id, out);
            }
        }
        for arrival in self.net.deliver(DT) {
            if let burrow_core::netsim::NodeId::Agent(dst) = arrival.node {
                let src = match arrival.origin {
                    burrow_core::netsim::NodeId::Agent(a) => a,
                    burrow_core::netsim::NodeId::Relay(_) => unreachable!("relays do not originate"),
                };
                self.inboxes.get_mut(&dst).unwrap().push((src, arrival.packet));
            }
        }
        self.tick += 1;
    }

    fn run_seconds(&mut self, s: f64) {
        for _ in 0..(s / DT).round() as u64 {
            self.step();
        }
    }
}

#[test]
fn two_agents_converge() {
    let mut h = Harness::new(
        &[(0, Point2::new(0.0, 0.0)), (1, Point2::new(10.0, 0.0))],
        CommsConfig::default(),
    );
    let bulk = topic_hash("bulk");
    let mut published = Vec::new();
    for i in 0..100u32 {
        let (id, _) = h
            .mules
            .get_mut(&AgentId(1))
            .unwrap()
            .publish(bulk, Body::Blob { len: 1000 + i }, 0);
        published.push(id);
    }
    h.run_seconds(30.0);
    let base = &h.mules[&AgentId(0)];
    for id in &published {
        assert!(base.holds(*id), "missing {id:?}");
    }
    // The publisher has seen the base manifest confirming everything.
    assert_eq!(h.mules[&AgentId(1)].unsynced_to_base_bytes(), 0);
}

#[test]
fn ferrying_through_shuttle() {
    // a(1) and b(2) are 200 m apart and never linked; c(3) shuttles.
    let mut h = Harness::new(
        &[
            (1, Point2::new(0.0, 0.0)),
            (2, Point2::new(200.0, 0.0)),
            (3, Point2::new(10.0, 0.0)),
        ],
        CommsConfig::default(),
    );
    let bulk = topic_hash("bulk");
    let mut published = Vec::new();
    for _ in 0..20 {
        let (id, _) = h
            .mules
            .get_mut(&AgentId(1))
            .unwrap()
            .publish(bulk, Body::Blob { len: 10_000 }, 0);
        published.push(id);
    }
    for round in 0..3 {
        // Near a, then near b.
        h.net.set_agent_pos(AgentId(3), Point2::new(10.0, 0.0));
        h.run_seconds(30.0);
        h.net.set_agent_pos(AgentId(3), Point2::new(190.0, 0.0));
        h.run_seconds(30.0);
        let _ = round;
    }
    let b = &h.mules[&AgentId(2)];
    for id in &published {
        assert!(b.holds(*id), "missing {id:?} at b");
    }
}

#[test]
fn sync_through_relay_chain() {
    // Agent 1 and base 60 m apart, bridged by relays every 20 m.
    let mut h = Harness::new(
        &[(0, Point2::new(60.0, 0.0)), (1, Point2::new(0.0, 0.0))],
        CommsConfig::default(),
    );
    h.net.drop_relay(Point2::new(20.0, 0.0));
    h.net.drop_relay(Point2::new(40.0, 0.0));
    let bulk = topic_hash("bulk");
    let mut published = Vec::new();
    for _ in 0..50 {
        let (id, _) = h
            .mules
            .get_mut(&AgentId(1))
            .unwrap()
            .publish(bulk, Body::Blob { len: 5_000 }, 0);
        published.push(id);
    }
    h.run_seconds(30.0);
    let base = &h.mules[&AgentId(0)];
    for id in &published {
        assert!(base.holds(*id), "missing {id:?} at base");
    }
    assert_eq!(h.mules[&AgentId(1)].unsynced_to_base_bytes(), 0);
}
