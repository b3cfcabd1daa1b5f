//! Disruption-tolerant peer-to-peer data sharing.
//!
//! Every agent runs one `Mule` instance. Persistent publishes are stored
//! locally forever and spread opportunistically: each peer periodically
//! advertises what it holds (a manifest per (origin, topic) stream, encoded
//! as a watermark plus sparse extras), receivers diff manifests against
//! their own store and pull what is missing. Volatile publishes are pushed
//! best-effort to currently reachable peers and never stored.
//!
//! The module is transport-agnostic: stepping it consumes received packets
//! and yields outgoing ones, each tagged with a destination or "all peers".

use crate::types::{AgentId, MessageId};
use crate::wire::{Reader, Writer, WireError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// Delivery guarantee class of a topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QoS {
    /// Stored by every holder and synced until everyone has it.
    Persistent,
    /// Pushed once to currently reachable peers, never stored.
    Volatile,
}

/// Per-topic configuration. Lower `priority_class` values sync first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicConfig {
    pub name: String,
    pub hash: u16,
    pub qos: QoS,
    pub priority_class: u8,
}

impl TopicConfig {
    pub fn new(name: &str, qos: QoS, priority_class: u8) -> Self {
        TopicConfig {
            name: name.to_string(),
            hash: crate::wire::topic_hash(name),
            qos,
            priority_class,
        }
    }
}

/// Message body: either real encoded bytes or a size-only stand-in used for
/// bulk traffic in tests (so gigabytes of synthetic payload cost nothing).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Bytes(Arc<Vec<u8>>),
    Blob { len: u32 },
}

impl Body {
    pub fn from_vec(v: Vec<u8>) -> Self {
        Body::Bytes(Arc::new(v))
    }

    pub fn len(&self) -> u32 {
        match self {
            Body::Bytes(b) => b.len() as u32,
            Body::Blob { len } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Body::Bytes(b) => Some(b),
            Body::Blob { .. } => None,
        }
    }
}

/// Summary of one (origin, topic) stream: every seq in `1..=watermark` is
/// held, plus the sparse `extras` beyond the watermark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSummary {
    pub origin: AgentId,
    pub topic: u16,
    pub watermark: u64,
    pub extras: Vec<u64>,
}

/// Advertisement of a peer's full persistent holdings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub streams: Vec<StreamSummary>,
}

impl Manifest {
    /// Whether the manifest covers a message id.
    pub fn holds(&self, id: MessageId) -> bool {
        self.streams.iter().any(|s| {
            s.origin == id.origin
                && s.topic == id.topic
                && (id.seq <= s.watermark || s.extras.binary_search(&id.seq).is_ok())
        })
    }
}

/// Pull request for specific message ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub ids: Vec<MessageId>,
}

/// One stored or in-flight message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataMsg {
    pub id: MessageId,
    pub qos: QoS,
    pub body: Body,
}

/// Everything that crosses the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Manifest(Manifest),
    Request(Request),
    Data(DataMsg),
}

const TAG_MANIFEST: u8 = 1;
const TAG_REQUEST: u8 = 2;
const TAG_DATA: u8 = 3;

fn write_id(w: &mut Writer, id: MessageId) {
    w.u16(id.origin.0);
    w.u16(id.topic);
    w.u64(id.seq);
}

fn read_id(r: &mut Reader) -> Result<MessageId, WireError> {
    Ok(MessageId { origin: AgentId(r.u16()?), topic: r.u16()?, seq: r.u64()? })
}

impl Packet {
    /// Serialized length in bytes, computed without encoding.
    pub fn wire_len(&self) -> usize {
        match self {
            Packet::Manifest(m) => {
                3 + m
                    .streams
                    .iter()
                    .map(|s| 2 + 2 + 8 + 2 + 8 * s.extras.len())
                    .sum::<usize>()
            }
            Packet::Request(r) => 3 + 12 * r.ids.len(),
            Packet::Data(d) => 1 + 12 + 1 + 4 + d.body.len() as usize,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(self.wire_len());
        match self {
            Packet::Manifest(m) => {
                w.u8(TAG_MANIFEST);
                w.u16(m.streams.len() as u16);
                for s in &m.streams {
                    w.u16(s.origin.0);
                    w.u16(s.topic);
                    w.u64(s.watermark);
                    w.u16(s.extras.len() as u16);
                    for &e in &s.extras {
                        w.u64(e);
                    }
                }
            }
            Packet::Request(r) => {
                w.u8(TAG_REQUEST);
                w.u16(r.ids.len() as u16);
                for &id in &r.ids {
                    write_id(&mut w, id);
                }
            }
            Packet::Data(d) => {
                w.u8(TAG_DATA);
                write_id(&mut w, d.id);
                w.u8(match d.qos {
                    QoS::Persistent => 0,
                    QoS::Volatile => 1,
                });
                w.u32(d.body.len());
                match &d.body {
                    Body::Bytes(b) => w.bytes(b),
                    Body::Blob { len } => w.bytes(&vec![0u8; *len as usize]),
                }
            }
        }
        debug_assert_eq!(w.len(), self.wire_len());
        w.finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Packet, WireError> {
        let mut r = Reader::new(buf);
        let tag = r.u8()?;
        let pkt = match tag {
            TAG_MANIFEST => {
                let n = r.u16()?;
                let mut streams = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    let origin = AgentId(r.u16()?);
                    let topic = r.u16()?;
                    let watermark = r.u64()?;
                    let n_extras = r.u16()?;
                    let mut extras = Vec::with_capacity(n_extras as usize);
                    for _ in 0..n_extras {
                        extras.push(r.u64()?);
                    }
                    streams.push(StreamSummary { origin, topic, watermark, extras });
                }
                Packet::Manifest(Manifest { streams })
            }
            TAG_REQUEST => {
                let n = r.u16()?;
                let mut ids = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    ids.push(read_id(&mut r)?);
                }
                Packet::Request(Request { ids })
            }
            TAG_DATA => {
                let id = read_id(&mut r)?;
                let qos = match r.u8()? {
                    0 => QoS::Persistent,
                    1 => QoS::Volatile,
                    v => return Err(WireError::BadDiscriminant { what: "qos", value: v }),
                };
                let len = r.u32()?;
                let body = Body::from_vec(r.bytes(len as usize)?.to_vec());
                Packet::Data(DataMsg { id, qos, body })
            }
            v => return Err(WireError::BadDiscriminant { what: "packet tag", value: v }),
        };
        r.expect_end()?;
        Ok(pkt)
    }
}

/// How a step wants a packet sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendTo {
    Peer(AgentId),
    /// Best-effort spread to every currently reachable peer.
    AllPeers,
}

/// An outgoing packet produced by a step.
#[derive(Debug, Clone)]
pub struct Outgoing {
    pub to: SendTo,
    pub packet: Arc<Packet>,
    pub topic: Option<u16>,
}

/// A message surfaced to the local application layer.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub id: MessageId,
    pub topic: u16,
    pub body: Body,
}

/// Sync progress against one peer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncStatus {
    /// Fraction of locally held persistent messages the peer also holds.
    pub fraction: f64,
    /// Total size of locally held persistent messages the peer lacks.
    pub outstanding_bytes: u64,
}

#[derive(Debug, Clone)]
struct StoredMsg {
    body: Body,
    stored_tick: u64,
}

#[derive(Debug, Clone, Default)]
struct StreamStore {
    /// All seqs in `1..=watermark` are present in `msgs`.
    watermark: u64,
    msgs: BTreeMap<u64, StoredMsg>,
}

impl StreamStore {
    fn advance_watermark(&mut self) {
        while self.msgs.contains_key(&(self.watermark + 1)) {
            self.watermark += 1;
        }
    }

    fn extras(&self) -> Vec<u64> {
        self.msgs
            .range(self.watermark + 1..)
            .map(|(&s, _)| s)
            .collect()
    }

    fn holds(&self, seq: u64) -> bool {
        seq <= self.watermark || self.msgs.contains_key(&seq)
    }
}

/// Configuration knobs for the sync protocol.
#[derive(Debug, Clone)]
pub struct MuleConfig {
    /// Ticks between manifest broadcasts.
    pub manifest_period: u64,
    /// Maximum ids pulled per received manifest.
    pub request_cap: usize,
    /// Ticks before an unanswered request may be reissued.
    pub request_timeout: u64,
}

impl Default for MuleConfig {
    fn default() -> Self {
        // 2 s manifests and a 10 s retry at the 0.1 s base tick.
        MuleConfig { manifest_period: 20, request_cap: 64, request_timeout: 100 }
    }
}

/// One agent's data-sharing endpoint.
#[derive(Debug)]
pub struct Mule {
    me: AgentId,
    cfg: MuleConfig,
    topics: BTreeMap<u16, TopicConfig>,
    store: BTreeMap<(AgentId, u16), StreamStore>,
    pub_seq: BTreeMap<u16, u64>,
    /// Ids requested and not yet received, with request tick.
    inflight: BTreeMap<MessageId, u64>,
    peer_manifests: BTreeMap<AgentId, Manifest>,
    next_manifest_tick: u64,
    deliveries: Vec<Delivery>,
    /// Requests received for ids we already held at request time would be a
    /// protocol bug on the requester's side; counted for test assertions.
    pub served_data: u64,
}

impl Mule {
    pub fn new(me: AgentId, topics: Vec<TopicConfig>, cfg: MuleConfig) -> Self {
        let topics = topics.into_iter().map(|t| (t.hash, t)).collect();
        Mule {
            me,
            cfg,
            topics,
            store: BTreeMap::new(),
            pub_seq: BTreeMap::new(),
            inflight: BTreeMap::new(),
            peer_manifests: BTreeMap::new(),
            next_manifest_tick: 0,
            deliveries: Vec::new(),
            served_data: 0,
        }
    }

    pub fn me(&self) -> AgentId {
        self.me
    }

    pub fn topic(&self, hash: u16) -> Option<&TopicConfig> {
        self.topics.get(&hash)
    }

    /// Publishes a message on a topic. Persistent bodies enter the local
    /// store immediately; volatile ones are pushed to reachable peers by the
    /// next step. Returns the assigned id and, for volatile topics, the
    /// outgoing push.
    pub fn publish(&mut self, topic: u16, body: Body, tick: u64) -> (MessageId, Option<Outgoing>) {
        let cfg = self.topics.get(&topic).expect("unknown topic");
        let seq = self.pub_seq.entry(topic).or_insert(0);
        *seq += 1;
        let id = MessageId { origin: self.me, topic, seq: *seq };
        match cfg.qos {
            QoS::Persistent => {
                let stream = self.store.entry((self.me, topic)).or_default();
                stream.msgs.insert(id.seq, StoredMsg { body, stored_tick: tick });
                stream.advance_watermark();
                (id, None)
            }
            QoS::Volatile => {
                let pkt = Packet::Data(DataMsg { id, qos: QoS::Volatile, body });
                (
                    id,
                    Some(Outgoing {
                        to: SendTo::AllPeers,
                        packet: Arc::new(pkt),
                        topic: Some(topic),
                    }),
                )
            }
        }
    }

    /// Whether a persistent message is held locally.
    pub fn holds(&self, id: MessageId) -> bool {
        self.store
            .get(&(id.origin, id.topic))
            .is_some_and(|s| s.holds(id.seq))
    }

    /// Number of persistent messages held.
    pub fn held_count(&self) -> usize {
        self.store.values().map(|s| s.msgs.len()).sum()
    }

    /// Builds the manifest describing the full local persistent store.
    pub fn build_manifest(&self) -> Manifest {
        let streams = self
            .store
            .iter()
            .filter(|(_, s)| !s.msgs.is_empty())
            .map(|(&(origin, topic), s)| StreamSummary {
                origin,
                topic,
                watermark: s.watermark,
                extras: s.extras(),
            })
            .collect();
        Manifest { streams }
    }

    /// Ids covered by `remote` that are missing locally, in sync-priority
    /// order: topic priority class first, then topic, origin, and seq.
    pub fn diff(&self, remote: &Manifest) -> Vec<MessageId> {
        let mut missing: Vec<(u8, MessageId)> = Vec::new();
        for s in &remote.streams {
            let class = self.topics.get(&s.topic).map_or(u8::MAX, |t| t.priority_class);
            let local = self.store.get(&(s.origin, s.topic));
            let holds = |seq: u64| local.is_some_and(|l| l.holds(seq));
            for seq in 1..=s.watermark {
                if !holds(seq) {
                    missing.push((class, MessageId { origin: s.origin, topic: s.topic, seq }));
                }
            }
            for &seq in &s.extras {
                if !holds(seq) {
                    missing.push((class, MessageId { origin: s.origin, topic: s.topic, seq }));
                }
            }
        }
        missing.sort_by_key(|&(class, id)| (class, id.topic, id.origin, id.seq));
        missing.into_iter().map(|(_, id)| id).collect()
    }

    /// Drains messages delivered to the application layer since last drained.
    pub fn drain_deliveries(&mut self) -> Vec<Delivery> {
        std::mem::take(&mut self.deliveries)
    }

    /// Last manifest received from a peer, if any.
    pub fn peer_manifest(&self, peer: AgentId) -> Option<&Manifest> {
        self.peer_manifests.get(&peer)
    }

    /// Sync progress against a peer based on its last received manifest.
    /// With no manifest seen, nothing is considered synced.
    pub fn sync_status(&self, peer: AgentId) -> SyncStatus {
        let manifest = self.peer_manifests.get(&peer);
        let mut held = 0u64;
        let mut covered = 0u64;
        let mut outstanding = 0u64;
        for (&(origin, topic), stream) in &self.store {
            for (&seq, msg) in &stream.msgs {
                held += 1;
                let id = MessageId { origin, topic, seq };
                if manifest.is_some_and(|m| m.holds(id)) {
                    covered += 1;
                } else {
                    outstanding += msg.body.len() as u64;
                }
            }
        }
        SyncStatus {
            fraction: if held == 0 { 1.0 } else { covered as f64 / held as f64 },
            outstanding_bytes: outstanding,
        }
    }

    /// Size of held persistent data the base station has not confirmed.
    pub fn unsynced_to_base_bytes(&self) -> u64 {
        if self.me.is_base() {
            return 0;
        }
        self.sync_status(AgentId::BASE).outstanding_bytes
    }

    fn store_data(&mut self, d: &DataMsg, tick: u64) {
        let stream = self.store.entry((d.id.origin, d.id.topic)).or_default();
        // Idempotent: duplicates neither grow the store nor re-deliver.
        if stream.holds(d.id.seq) {
            return;
        }
        stream
            .msgs
            .insert(d.id.seq, StoredMsg { body: d.body.clone(), stored_tick: tick });
        stream.advance_watermark();
        self.deliveries.push(Delivery { id: d.id, topic: d.id.topic, body: d.body.clone() });
    }

    /// Advances the protocol one tick: ingests packets, emits manifests at
    /// the configured cadence, answers requests, and issues pulls for
    /// missing data.
    pub fn step(
        &mut self,
        tick: u64,
        peers: &[AgentId],
        inbox: Vec<(AgentId, Arc<Packet>)>,
    ) -> Vec<Outgoing> {
        let mut out = Vec::new();
        for (src, pkt) in inbox {
            match pkt.as_ref() {
                Packet::Manifest(m) => {
                    self.peer_manifests.insert(src, m.clone());
                    let wanted = self.request_from(m, tick);
                    if !wanted.is_empty() {
                        out.push(Outgoing {
                            to: SendTo::Peer(src),
                            packet: Arc::new(Packet::Request(Request { ids: wanted })),
                            topic: None,
                        });
                    }
                }
                Packet::Request(req) => {
                    for &id in &req.ids {
                        let held = self
                            .store
                            .get(&(id.origin, id.topic))
                            .and_then(|s| s.msgs.get(&id.seq));
                        // Ids we do not hold are skipped, not errors.
                        if let Some(msg) = held {
                            self.served_data += 1;
                            out.push(Outgoing {
                                to: SendTo::Peer(src),
                                packet: Arc::new(Packet::Data(DataMsg {
                                    id,
                                    qos: QoS::Persistent,
                                    body: msg.body.clone(),
                                })),
                                topic: Some(id.topic),
                            });
                        }
                    }
                }
                Packet::Data(d) => {
                    self.inflight.remove(&d.id);
                    match d.qos {
                        QoS::Persistent => self.store_data(d, tick),
                        QoS::Volatile => self.deliveries.push(Delivery {
                            id: d.id,
                            topic: d.id.topic,
                            body: d.body.clone(),
                        }),
                    }
                }
            }
        }

        if tick >= self.next_manifest_tick && !peers.is_empty() {
            self.next_manifest_tick = tick + self.cfg.manifest_period;
            let manifest = Arc::new(Packet::Manifest(self.build_manifest()));
            out.push(Outgoing { to: SendTo::AllPeers, packet: manifest, topic: None });
        }
        out
    }

    /// Picks the ids to pull from a freshly received manifest: missing, not
    /// already in flight, bounded so the number of outstanding pulls never
    /// exceeds the round cap (flow control against queue blowup).
    fn request_from(&mut self, manifest: &Manifest, tick: u64) -> Vec<MessageId> {
        let stale = self.cfg.request_timeout;
        self.inflight.retain(|_, &mut t| tick < t + stale);
        let budget = self.cfg.request_cap.saturating_sub(self.inflight.len());
        let mut wanted = Vec::new();
        for id in self.diff(manifest) {
            if wanted.len() >= budget {
                break;
            }
            if self.inflight.contains_key(&id) {
                continue;
            }
            self.inflight.insert(id, tick);
            wanted.push(id);
        }
        wanted
    }

    /// Oldest first-stored tick among held messages, for diagnostics.
    pub fn store_bytes(&self) -> u64 {
        self.store
            .values()
            .flat_map(|s| s.msgs.values())
            .map(|m| m.body.len() as u64)
            .sum()
    }

    #[cfg(test)]
    fn stored_tick(&self, id: MessageId) -> Option<u64> {
        self.store
            .get(&(id.origin, id.topic))
            .and_then(|s| s.msgs.get(&id.seq))
            .map(|m| m.stored_tick)
    }
}

/// Validates a topic set: names must be unique and 16-bit hashes must not
/// collide.
pub fn check_topics(topics: &[TopicConfig]) -> Result<(), String> {
    let mut seen: BTreeMap<u16, &str> = BTreeMap::new();
    let mut names: BTreeSet<&str> = BTreeSet::new();
    for t in topics {
        if !names.insert(&t.name) {
            return Err(format!("duplicate topic name {:?}", t.name));
        }
        if let Some(other) = seen.insert(t.hash, &t.name) {
            return Err(format!(
                "topic hash collision: {:?} and {:?} both hash to {:#06x}",
                other, t.name, t.hash
            ));
        }
    }
    Ok(())
}
