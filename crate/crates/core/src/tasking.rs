//! Market-based task allocation with decentralized consensus.
//!
//! Every agent keeps a [`TaskBoard`]: a replicated table of task rows.
//! Mutations happen only on the mutating agent's own board; rows spread to
//! other boards through merges, where a deterministic total order picks the
//! surviving row per task id. The order makes merging commutative,
//! associative, and idempotent, so tables converge regardless of delivery
//! order or duplication.
//!
//! Agents bid on tasks by building bundles: the bid for a task is the gain
//! in total time-discounted reward from inserting it at the best single
//! position in the current bundle. The highest bid wins; priority tiers act
//! as an infinitely higher reward and are compared before value.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geom::Point2;
use crate::types::{AgentId, FrameId, TaskId};
use crate::wire::{Reader, WireError, Writer};

/// Largest number of tasks an agent plans ahead.
pub const BUNDLE_CAPACITY: usize = 4;

/// Reward discount time constant in seconds.
pub const DISCOUNT_TAU: f64 = 120.0;

/// Navigation failures by one agent before it blacklists the task.
pub const BLACKLIST_FAILS: u32 = 3;

/// How long a blacklisted task stays blocked, seconds.
pub const BLACKLIST_SECS: f64 = 120.0;

/// What a task asks the executing agent to do. The payload (where, for
/// whom) lives in the row's frame-referenced location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Explore,
    DropNode,
    SyncData,
    Manual,
}

impl TaskKind {
    fn to_byte(self) -> u8 {
        match self {
            TaskKind::Explore => 0,
            TaskKind::DropNode => 1,
            TaskKind::SyncData => 2,
            TaskKind::Manual => 3,
        }
    }

    fn from_byte(b: u8) -> Result<TaskKind, WireError> {
        Ok(match b {
            0 => TaskKind::Explore,
            1 => TaskKind::DropNode,
            2 => TaskKind::SyncData,
            3 => TaskKind::Manual,
            _ => {
                return Err(WireError::BadDiscriminant {
                    what: "task kind",
                    value: b,
                })
            }
        })
    }
}

/// Lifecycle of a task row. Complete is terminal; Blacklisted expires by
/// timestamp and is then treated as Available for bidding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Available,
    Claimed,
    Complete,
    Blacklisted,
}

impl TaskState {
    fn to_byte(self) -> u8 {
        match self {
            TaskState::Available => 0,
            TaskState::Claimed => 1,
            TaskState::Complete => 2,
            TaskState::Blacklisted => 3,
        }
    }

    fn from_byte(b: u8) -> Result<TaskState, WireError> {
        Ok(match b {
            0 => TaskState::Available,
            1 => TaskState::Claimed,
            2 => TaskState::Complete,
            3 => TaskState::Blacklisted,
            _ => {
                return Err(WireError::BadDiscriminant {
                    what: "task state",
                    value: b,
                })
            }
        })
    }
}

/// Rounds to the precision that survives the wire, so a row compares equal
/// to its replicated copies.
fn q32(v: f64) -> f64 {
    v as f32 as f64
}

/// One replicated task row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub kind: TaskKind,
    /// Reference frame of `location`.
    pub frame: FrameId,
    /// Task position in `frame` coordinates.
    pub location: Point2,
    pub base_reward: f64,
    /// Priority tier 1..=3, 3 highest.
    pub tier: u8,
    /// Bumped on every state change by the mutating agent. Concurrent
    /// claims from the same observed state share a version and compete by
    /// bid.
    pub version: u32,
    pub state: TaskState,
    pub owner: Option<AgentId>,
    pub bid: f64,
    /// Absolute expiry time while blacklisted, seconds.
    pub blacklist_until: f64,
}

const OWNER_NONE: u16 = u16::MAX;

impl Task {
    /// Encodes one row. Fixed 41 bytes.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(41);
        w.u16(self.id.agent.0);
        w.u32(self.id.seq);
        w.u8(self.kind.to_byte());
        w.u16(self.frame.agent.0);
        w.u32(self.frame.seq);
        w.f32(self.location.x as f32);
        w.f32(self.location.y as f32);
        w.f32(self.base_reward as f32);
        w.u8(self.tier);
        w.u32(self.version);
        w.u8(self.state.to_byte());
        w.u16(self.owner.map_or(OWNER_NONE, |a| a.0));
        w.f32(self.bid as f32);
        w.f32(self.blacklist_until as f32);
        w.finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Task, WireError> {
        let mut r = Reader::new(buf);
        let id = TaskId {
            agent: AgentId(r.u16()?),
            seq: r.u32()?,
        };
        let kind = TaskKind::from_byte(r.u8()?)?;
        let frame = FrameId {
            agent: AgentId(r.u16()?),
            seq: r.u32()?,
        };
        let location = Point2::new(r.f32()? as f64, r.f32()? as f64);
        let base_reward = r.f32()? as f64;
        let tier = r.u8()?;
        let version = r.u32()?;
        let state = TaskState::from_byte(r.u8()?)?;
        let owner = match r.u16()? {
            OWNER_NONE => None,
            a => Some(AgentId(a)),
        };
        let bid = r.f32()? as f64;
        let blacklist_until = r.f32()? as f64;
        r.expect_end()?;
        if !(1..=3).contains(&tier) || (state == TaskState::Claimed) != owner.is_some() {
            return Err(WireError::BadDiscriminant {
                what: "task row fields",
                value: tier,
            });
        }
        Ok(Task {
            id,
            kind,
            frame,
            location,
            base_reward,
            tier,
            version,
            state,
            owner,
            bid,
            blacklist_until,
        })
    }

    /// Sort key realizing the consensus order: Complete beats everything,
    /// then higher version, then higher bid, then lower agent id. The tail
    /// fields only break ties between rows that differ in content nobody
    /// competes on, keeping the order total.
    fn rank(&self) -> (bool, u32, u64, u16, u8, u64) {
        (
            self.state == TaskState::Complete,
            self.version,
            self.bid.to_bits(),
            OWNER_NONE - self.owner.map_or(OWNER_NONE, |a| a.0),
            self.state.to_byte(),
            self.blacklist_until.to_bits(),
        )
    }

    fn beats(&self, other: &Task) -> bool {
        self.rank() > other.rank()
    }
}

/// Operator-placed box that scales reward and overrides priority for
/// matching tasks inside it. A multiplier of zero blocks the area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityRegion {
    pub id: u32,
    pub min: Point2,
    pub max: Point2,
    /// Restricts the region to these task kinds; empty means all.
    #[serde(default)]
    pub kinds: BTreeSet<TaskKind>,
    /// Restricts the region to these agents; empty means all.
    #[serde(default)]
    pub agents: BTreeSet<AgentId>,
    #[serde(default)]
    pub priority_override: Option<u8>,
    pub reward_multiplier: f64,
}

impl PriorityRegion {
    fn applies(&self, kind: TaskKind, agent: AgentId, at: Point2) -> bool {
        at.x >= self.min.x
            && at.x <= self.max.x
            && at.y >= self.min.y
            && at.y <= self.max.y
            && (self.kinds.is_empty() || self.kinds.contains(&kind))
            && (self.agents.is_empty() || self.agents.contains(&agent))
    }
}

/// Frontier boundary length to priority tier mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierThresholds {
    /// Boundary length in meters granting tier 3.
    pub tier3: f64,
    /// Boundary length in meters granting tier 2.
    pub tier2: f64,
}

impl Default for TierThresholds {
    fn default() -> Self {
        TierThresholds {
            tier3: 6.0,
            tier2: 2.0,
        }
    }
}

impl TierThresholds {
    pub fn tier(&self, boundary_len: f64) -> u8 {
        if boundary_len >= self.tier3 {
            3
        } else if boundary_len >= self.tier2 {
            2
        } else {
            1
        }
    }
}

/// Reward and tier of a task for a given agent after priority regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effective {
    pub reward: f64,
    pub tier: u8,
}

/// Resolves a row's frame-referenced location to global coordinates.
/// Returns None when the frame is unknown to the resolving agent.
pub type Locate<'a> = &'a dyn Fn(&Task) -> Option<Point2>;

/// Travel time in seconds between two global points, None if unreachable.
pub type Travel<'a> = &'a dyn Fn(Point2, Point2) -> Option<f64>;

/// Proposed bundle change backing a bid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    pub position: usize,
    pub bid: f64,
}

/// One agent's replicated task table plus its private bidding state.
#[derive(Debug, Clone)]
pub struct TaskBoard {
    pub me: AgentId,
    rows: BTreeMap<TaskId, Task>,
    next_seq: u32,
    /// This agent's navigation failures per task. Local observations; the
    /// releases they cause replicate through version bumps.
    fails: BTreeMap<TaskId, u32>,
    pub regions: Vec<PriorityRegion>,
    pub tau: f64,
    /// Received rows dropped as malformed.
    pub malformed: u64,
}

impl TaskBoard {
    pub fn new(me: AgentId) -> Self {
        TaskBoard {
            me,
            rows: BTreeMap::new(),
            next_seq: 0,
            fails: BTreeMap::new(),
            regions: Vec::new(),
            tau: DISCOUNT_TAU,
            malformed: 0,
        }
    }

    pub fn get(&self, id: TaskId) -> Option<&Task> {
        self.rows.get(&id)
    }

    pub fn rows(&self) -> impl Iterator<Item = &Task> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Creates a new Available task owned by nobody and returns its id.
    pub fn create(
        &mut self,
        kind: TaskKind,
        frame: FrameId,
        location: Point2,
        base_reward: f64,
        tier: u8,
    ) -> TaskId {
        self.next_seq += 1;
        let id = TaskId {
            agent: self.me,
            seq: self.next_seq,
        };
        let task = Task {
            id,
            kind,
            frame,
            location: Point2::new(q32(location.x), q32(location.y)),
            base_reward: q32(base_reward),
            tier: tier.clamp(1, 3),
            version: 1,
            state: TaskState::Available,
            owner: None,
            bid: 0.0,
            blacklist_until: 0.0,
        };
        self.rows.insert(id, task);
        id
    }

    /// Merges one received row; returns true when the local table changed
    /// (the changed row should be rebroadcast).
    pub fn merge_row(&mut self, row: Task) -> bool {
        match self.rows.get(&row.id) {
            None => {
                self.rows.insert(row.id, row);
                true
            }
            Some(cur) if row.beats(cur) => {
                self.rows.insert(row.id, row);
                true
            }
            Some(_) => false,
        }
    }

    /// Decodes and merges a wire row. Malformed rows are dropped and
    /// counted.
    pub fn merge_bytes(&mut self, buf: &[u8]) -> Option<TaskId> {
        match Task::decode(buf) {
            Ok(row) => {
                let id = row.id;
                self.merge_row(row).then_some(id)
            }
            Err(_) => {
                self.malformed += 1;
                None
            }
        }
    }

    /// Merges a whole table; returns ids whose rows changed locally.
    pub fn merge_table<'a>(&mut self, rows: impl IntoIterator<Item = &'a Task>) -> Vec<TaskId> {
        rows.into_iter()
            .filter(|r| self.merge_row((*r).clone()))
            .map(|r| r.id)
            .collect()
    }

    /// Reward and tier for this agent after applying priority regions, all
    /// of which stack: multipliers compose and the highest override wins.
    pub fn effective(&self, task: &Task, at: Point2) -> Effective {
        let mut reward = task.base_reward;
        let mut tier = task.tier;
        for region in &self.regions {
            if region.applies(task.kind, self.me, at) {
                reward *= region.reward_multiplier.max(0.0);
                if let Some(t) = region.priority_override {
                    tier = tier.max(t.clamp(1, 3));
                }
            }
        }
        Effective { reward, tier }
    }

    /// Time-discounted value of reaching the task at `arrival` seconds from
    /// now.
    pub fn discounted(&self, reward: f64, arrival: f64) -> f64 {
        reward * (-arrival / self.tau).exp()
    }

    /// Whether the row may be bid on at all (ownership competition applies
    /// separately).
    pub fn biddable(&self, task: &Task, now: f64) -> bool {
        match task.state {
            TaskState::Available => true,
            TaskState::Claimed => task.owner != Some(self.me),
            TaskState::Complete => false,
            TaskState::Blacklisted => now >= task.blacklist_until,
        }
    }

    /// Whether a bid of `bid` by this agent would take the task from its
    /// current claimant under the consensus rules.
    fn outbids(&self, task: &Task, bid: f64) -> bool {
        match task.state {
            TaskState::Claimed => {
                bid > task.bid || (bid == task.bid && self.me < task.owner.unwrap())
            }
            _ => true,
        }
    }

    /// Claims a task for this agent. Claims from a non-claimed state bump
    /// the version; outbidding a standing claim reuses its version so
    /// concurrent bids compete by value.
    pub fn claim(&mut self, id: TaskId, bid: f64) -> bool {
        let Some(task) = self.rows.get_mut(&id) else { return false };
        if task.state == TaskState::Complete {
            return false;
        }
        if task.state != TaskState::Claimed {
            task.version += 1;
        }
        task.state = TaskState::Claimed;
        task.owner = Some(self.me);
        task.bid = q32(bid);
        true
    }

    /// Releases an owned task back to Available.
    pub fn release(&mut self, id: TaskId) -> bool {
        let me = self.me;
        let Some(task) = self.rows.get_mut(&id) else { return false };
        if task.state != TaskState::Claimed || task.owner != Some(me) {
            return false;
        }
        task.version += 1;
        task.state = TaskState::Available;
        task.owner = None;
        task.bid = 0.0;
        true
    }

    /// Marks an owned task complete. Terminal.
    pub fn complete(&mut self, id: TaskId) -> bool {
        let Some(task) = self.rows.get_mut(&id) else { return false };
        if task.state == TaskState::Complete {
            return false;
        }
        task.version += 1;
        task.state = TaskState::Complete;
        task.owner = None;
        task.bid = 0.0;
        true
    }

    /// Records a navigation failure on an owned task: the task is released
    /// every time, and this agent's third failure blacklists it for
    /// [`BLACKLIST_SECS`].
    pub fn report_failure(&mut self, id: TaskId, now: f64) -> bool {
        let me = self.me;
        let Some(task) = self.rows.get_mut(&id) else { return false };
        if task.state != TaskState::Claimed || task.owner != Some(me) {
            return false;
        }
        let fails = self.fails.entry(id).or_insert(0);
        *fails += 1;
        task.version += 1;
        task.owner = None;
        task.bid = 0.0;
        if *fails >= BLACKLIST_FAILS {
            *fails = 0;
            task.state = TaskState::Blacklisted;
            task.blacklist_until = q32(now + BLACKLIST_SECS);
        } else {
            task.state = TaskState::Available;
        }
        true
    }

    /// Total discounted reward of executing `order` from `start`, or None
    /// when some leg is unreachable.
    pub fn bundle_reward(
        &self,
        start: Point2,
        order: &[TaskId],
        locate: Locate,
        travel: Travel,
    ) -> Option<f64> {
        let mut from = start;
        let mut clock = 0.0;
        let mut total = 0.0;
        for id in order {
            let task = self.rows.get(id)?;
            let at = locate(task)?;
            clock += travel(from, at)?;
            let eff = self.effective(task, at);
            total += self.discounted(eff.reward, clock);
            from = at;
        }
        Some(total)
    }

    /// Best single insertion position for `candidate` into `bundle`,
    /// leaving existing order intact. The bid is the gain in total
    /// discounted reward; None when the bundle is full, a leg is
    /// unreachable, or the gain is not positive.
    pub fn best_insertion(
        &self,
        start: Point2,
        bundle: &[TaskId],
        candidate: TaskId,
        locate: Locate,
        travel: Travel,
    ) -> Option<Insertion> {
        if bundle.len() >= BUNDLE_CAPACITY {
            return None;
        }
        let old = self.bundle_reward(start, bundle, locate, travel)?;
        let mut best: Option<Insertion> = None;
        for position in 0..=bundle.len() {
            let mut order = bundle.to_vec();
            order.insert(position, candidate);
            let Some(new) = self.bundle_reward(start, &order, locate, travel) else { continue };
            let bid = new - old;
            if best.map_or(true, |b| bid > b.bid) {
                best = Some(Insertion { position, bid });
            }
        }
        best.filter(|b| b.bid > 0.0)
    }

    /// Picks the task this agent should bid on: the positive-bid candidate
    /// it can win, ordered by effective tier first (a higher priority acts
    /// as an infinitely higher reward), then bid, then lower task id.
    pub fn choose_bid(
        &self,
        start: Point2,
        bundle: &[TaskId],
        now: f64,
        locate: Locate,
        travel: Travel,
    ) -> Option<(TaskId, Insertion)> {
        let mut best: Option<(u8, f64, TaskId, Insertion)> = None;
        for task in self.rows.values() {
            if !self.biddable(task, now) {
                continue;
            }
            let Some(at) = locate(task) else { continue };
            let Some(ins) = self.best_insertion(start, bundle, task.id, locate, travel) else {
                continue;
            };
            if !self.outbids(task, q32(ins.bid)) {
                continue;
            }
            let tier = self.effective(task, at).tier;
            let better = match best {
                None => true,
                Some((t, b, id, _)) => {
                    (tier, ins.bid) > (t, b) || ((tier, ins.bid) == (t, b) && task.id < id)
                }
            };
            if better {
                best = Some((tier, ins.bid, task.id, ins));
            }
        }
        best.map(|(_, _, id, ins)| (id, ins))
    }

    /// Next owned task to execute: highest effective tier preempts, bundle
    /// order breaks ties within a tier.
    pub fn select_next(&self, bundle: &[TaskId], locate: Locate) -> Option<TaskId> {
        let mut best: Option<(u8, usize, TaskId)> = None;
        for (position, &id) in bundle.iter().enumerate() {
            let Some(task) = self.rows.get(&id) else { continue };
            if task.owner != Some(self.me) || task.state != TaskState::Claimed {
                continue;
            }
            let tier = match locate(task) {
                Some(at) => self.effective(task, at).tier,
                None => task.tier,
            };
            let better = match best {
                None => true,
                Some((t, p, _)) => tier > t || (tier == t && position < p),
            };
            if better {
                best = Some((tier, position, id));
            }
        }
        best.map(|(_, _, id)| id)
    }

    /// Drops bundle entries this agent no longer owns (outbid, completed,
    /// released elsewhere).
    pub fn prune_bundle(&self, bundle: &mut Vec<TaskId>) {
        bundle.retain(|id| {
            self.rows
                .get(id)
                .map_or(false, |t| t.state == TaskState::Claimed && t.owner == Some(self.me))
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> FrameId {
        FrameId {
            agent: AgentId(0),
            seq: 0,
        }
    }

    fn board(me: u16) -> TaskBoard {
        TaskBoard::new(AgentId(me))
    }

    /// Global frame: rows are already in world coordinates.
    fn locate_identity(task: &Task) -> Option<Point2> {
        Some(task.location)
    }

    /// Straight-line travel at 1 m/s.
    fn travel_line(a: Point2, b: Point2) -> Option<f64> {
        Some(a.dist(b))
    }

    #[test]
    fn discount_arithmetic() {
        let b = board(1);
        assert_eq!(b.discounted(10.0, 0.0), 10.0);
        let at_tau = b.discounted(1.0, DISCOUNT_TAU);
        assert!((at_tau - 0.3679).abs() < 1e-3);
    }

    #[test]
    fn zero_multiplier_region_blocks_bids() {
        let mut b = board(1);
        let id = b.create(TaskKind::Manual, frame(), Point2::new(5.0, 0.0), 10.0, 1);
        b.regions.push(PriorityRegion {
            id: 1,
            min: Point2::new(0.0, -1.0),
            max: Point2::new(10.0, 1.0),
            kinds: BTreeSet::new(),
            agents: BTreeSet::new(),
            priority_override: None,
            reward_multiplier: 0.0,
        });
        let task = b.get(id).unwrap().clone();
        let eff = b.effective(&task, task.location);
        assert_eq!(eff.reward, 0.0);
        let pick = b.choose_bid(
            Point2::new(0.0, 0.0),
            &[],
            0.0,
            &locate_identity,
            &travel_line,
        );
        assert!(pick.is_none(), "multiplier 0 blocks the area");
    }

    #[test]
    fn empty_bundle_bid_is_full_value() {
        let mut b = board(1);
        let id = b.create(TaskKind::Manual, frame(), Point2::new(0.0, 0.0), 8.0, 1);
        let ins = b
            .best_insertion(Point2::new(0.0, 0.0), &[], id, &locate_identity, &travel_line)
            .unwrap();
        assert_eq!(ins.position, 0);
        assert!((ins.bid - 8.0).abs() < 1e-9, "arrival 0 keeps full reward");
    }

    #[test]
    fn unreachable_task_gets_no_bid() {
        let mut b = board(1);
        let far = b.create(TaskKind::Manual, frame(), Point2::new(9.0, 0.0), 10.0, 1);
        let travel: Travel = &|_, to| (to.x < 5.0).then_some(1.0);
        assert!(b
            .best_insertion(Point2::new(0.0, 0.0), &[], far, &locate_identity, travel)
            .is_none());
    }

    /// Best-insertion sits between append-at-end and the full-reorder
    /// optimum found by permutation enumeration.
    #[test]
    fn insertion_bounded_by_append_and_permutations() {
        let mut state = 0x3c6ef372u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) * 20.0 - 10.0
        };
        for _ in 0..25 {
            let mut b = board(1);
            let ids: Vec<TaskId> = (0..4)
                .map(|_| {
                    b.create(
                        TaskKind::Manual,
                        frame(),
                        Point2::new(next(), next()),
                        5.0 + next().abs(),
                        1,
                    )
                })
                .collect();
            let bundle = &ids[..3];
            let candidate = ids[3];
            let start = Point2::new(next(), next());
            let old = b
                .bundle_reward(start, bundle, &locate_identity, &travel_line)
                .unwrap();

            let value = |order: &[TaskId]| {
                b.bundle_reward(start, order, &locate_identity, &travel_line)
                    .unwrap()
            };
            let mut appended = bundle.to_vec();
            appended.push(candidate);
            let append_bid = value(&appended) - old;

            let best = b
                .best_insertion(start, bundle, candidate, &locate_identity, &travel_line)
                .map_or(f64::NEG_INFINITY, |i| i.bid);

            // Full reorder: every permutation of the four tasks.
            let mut optimal = f64::NEG_INFINITY;
            let mut order: Vec<TaskId> = appended.clone();
            permute(&mut order, 0, &mut |perm| {
                optimal = optimal.max(value(perm) - old);
            });

            assert!(best >= append_bid - 1e-9, "{best} < append {append_bid}");
            assert!(best <= optimal + 1e-9, "{best} > optimal {optimal}");
        }
    }

    fn permute(items: &mut Vec<TaskId>, k: usize, visit: &mut impl FnMut(&[TaskId])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    #[test]
    fn row_codec_roundtrip_and_malformed_drop() {
        let mut b = board(3);
        let id = b.create(TaskKind::DropNode, frame(), Point2::new(1.25, -2.5), 12.5, 2);
        b.claim(id, 7.125);
        let row = b.get(id).unwrap().clone();
        let bytes = row.encode();
        assert_eq!(bytes.len(), 41);
        assert_eq!(Task::decode(&bytes).unwrap(), row);

        let mut other = board(4);
        assert!(other.merge_bytes(&bytes).is_some());
        assert!(other.merge_bytes(&bytes[..bytes.len() - 1]).is_none());
        let mut forged = bytes.clone();
        forged[6] = 9; // kind byte out of range
        assert!(other.merge_bytes(&forged).is_none());
        assert_eq!(other.malformed, 2);
    }

    #[test]
    fn merge_with_self_changes_nothing() {
        let mut b = board(1);
        for i in 0..4 {
            let id = b.create(TaskKind::Explore, frame(), Point2::new(i as f64, 0.0), 5.0, 1);
            if i % 2 == 0 {
                b.claim(id, 3.0 + i as f64);
            }
        }
        let snapshot: Vec<Task> = b.rows().cloned().collect();
        assert!(b.merge_table(snapshot.iter()).is_empty());
    }

    #[test]
    fn higher_version_release_beats_stale_claim() {
        let mut creator = board(0);
        let id = creator.create(TaskKind::Manual, frame(), Point2::new(1.0, 1.0), 10.0, 1);

        let mut a = board(1);
        a.merge_table(creator.rows());
        let mut bb = board(2);
        bb.merge_table(creator.rows());

        // Agent 1 claims then releases: version 3. Agent 2 claims: version 2.
        a.claim(id, 9.0);
        a.release(id);
        bb.claim(id, 99.0);
        let release = a.get(id).unwrap().clone();
        let claim = bb.get(id).unwrap().clone();
        assert_eq!(release.version, 3);
        assert_eq!(claim.version, 2);

        assert!(bb.merge_row(release.clone()));
        assert_eq!(bb.get(id).unwrap().state, TaskState::Available);
        assert!(!a.merge_row(claim), "stale claim must not take the row back");
    }

    #[test]
    fn partitioned_claims_heal_to_single_owner() {
        let mut creator = board(0);
        let id = creator.create(TaskKind::Explore, frame(), Point2::new(2.0, 0.0), 10.0, 1);
        let mut a = board(1);
        let mut bb = board(2);
        a.merge_table(creator.rows());
        bb.merge_table(creator.rows());

        // Partitioned: both claim from the same observed version.
        a.claim(id, 5.0);
        bb.claim(id, 7.0);

        // Reconnection: exchange both ways.
        let row_a = a.get(id).unwrap().clone();
        let row_b = bb.get(id).unwrap().clone();
        a.merge_row(row_b);
        bb.merge_row(row_a);

        assert_eq!(a.get(id), bb.get(id), "tables must agree after healing");
        assert_eq!(a.get(id).unwrap().owner, Some(AgentId(2)));
    }

    #[test]
    fn equal_bids_break_toward_lower_agent() {
        let mut creator = board(0);
        let id = creator.create(TaskKind::Explore, frame(), Point2::new(2.0, 0.0), 10.0, 1);
        let mut a2 = board(2);
        let mut a5 = board(5);
        a2.merge_table(creator.rows());
        a5.merge_table(creator.rows());
        a2.claim(id, 4.5);
        a5.claim(id, 4.5);
        let r5 = a5.get(id).unwrap().clone();
        let r2 = a2.get(id).unwrap().clone();
        a2.merge_row(r5);
        a5.merge_row(r2);
        assert_eq!(a2.get(id).unwrap().owner, Some(AgentId(2)));
        assert_eq!(a5.get(id).unwrap().owner, Some(AgentId(2)));
    }

    /// Decentralized auction with single-task bundles against a centralized
    /// sequential greedy oracle using the same compare rules.
    #[test]
    fn auction_matches_centralized_greedy() {
        let starts = [
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(0.0, 10.0),
            Point2::new(10.0, 10.0),
        ];
        let spots = [
            (Point2::new(1.0, 1.0), 10.0, 1),
            (Point2::new(9.0, 1.0), 12.0, 1),
            (Point2::new(1.0, 9.0), 8.0, 2),
            (Point2::new(9.0, 9.0), 15.0, 1),
            (Point2::new(5.0, 5.0), 9.0, 3),
            (Point2::new(2.0, 6.0), 7.0, 1),
        ];

        let mut creator = board(9);
        let ids: Vec<TaskId> = spots
            .iter()
            .map(|&(p, r, tier)| creator.create(TaskKind::Manual, frame(), p, r, tier))
            .collect();

        let mut boards: Vec<TaskBoard> = (0..4).map(|i| board(i)).collect();
        for b in &mut boards {
            b.merge_table(creator.rows());
        }
        let mut bundles: Vec<Vec<TaskId>> = vec![Vec::new(); 4];

        loop {
            let mut any = false;
            for i in 0..4 {
                if !bundles[i].is_empty() {
                    continue; // single-task bundles
                }
                if let Some((id, ins)) = boards[i].choose_bid(
                    starts[i],
                    &bundles[i],
                    0.0,
                    &locate_identity,
                    &travel_line,
                ) {
                    boards[i].claim(id, ins.bid);
                    bundles[i].insert(ins.position, id);
                    any = true;
                }
            }
            // Full connectivity: exchange tables to a fixpoint.
            loop {
                let mut changed = false;
                for i in 0..4 {
                    for j in 0..4 {
                        if i == j {
                            continue;
                        }
                        let rows: Vec<Task> = boards[j].rows().cloned().collect();
                        changed |= !boards[i].merge_table(rows.iter()).is_empty();
                    }
                }
                if !changed {
                    break;
                }
            }
            for i in 0..4 {
                boards[i].prune_bundle(&mut bundles[i]);
            }
            if !any {
                break;
            }
        }

        // Oracle: repeatedly take the globally best (tier, bid, low agent,
        // low task) pair among unassigned agents and tasks.
        let reference = &boards[0];
        let mut free_agents: BTreeSet<usize> = (0..4).collect();
        let mut free_tasks: BTreeSet<TaskId> = ids.iter().copied().collect();
        let mut oracle: BTreeMap<TaskId, AgentId> = BTreeMap::new();
        loop {
            let mut best: Option<(u8, f64, usize, TaskId)> = None;
            for &i in &free_agents {
                for &id in &free_tasks {
                    let task = reference.get(id).unwrap();
                    let arrival = starts[i].dist(task.location);
                    let bid = q32(reference.discounted(task.base_reward, arrival));
                    if bid <= 0.0 {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((t, b, a, bid_id)) => {
                            (task.tier, bid) > (t, b)
                                || ((task.tier, bid) == (t, b) && (i, id) < (a, bid_id))
                        }
                    };
                    if better {
                        best = Some((task.tier, bid, i, id));
                    }
                }
            }
            let Some((_, _, i, id)) = best else { break };
            oracle.insert(id, AgentId(i as u16));
            free_agents.remove(&i);
            free_tasks.remove(&id);
        }

        for b in &boards {
            for id in &ids {
                let task = b.get(*id).unwrap();
                assert_eq!(
                    task.owner,
                    oracle.get(id).copied(),
                    "assignment of {id} diverges from the greedy oracle"
                );
            }
            for id in &ids {
                assert_eq!(b.get(*id), boards[0].get(*id), "tables not row-identical");
            }
        }
    }

    /// After the last mutation, synchronized neighbor exchange reaches
    /// global table equality within network-diameter rounds.
    #[test]
    fn convergence_within_network_diameter() {
        let n = 4;
        let mut boards: Vec<TaskBoard> = (0..n).map(|i| board(i as u16)).collect();
        let id = boards[0].create(TaskKind::Explore, frame(), Point2::new(1.0, 0.0), 5.0, 1);
        for i in 1..n {
            let rows: Vec<Task> = boards[0].rows().cloned().collect();
            boards[i].merge_table(rows.iter());
        }
        boards[0].claim(id, 4.0);
        boards[0].complete(id);

        let diameter = n - 1;
        let mut rounds = 0;
        while !(1..n).all(|i| boards[i].get(id) == boards[0].get(id)) {
            rounds += 1;
            assert!(rounds <= diameter, "exceeded diameter rounds on a line");
            // Line topology: each agent swaps with its neighbors at once.
            let snapshot: Vec<Vec<Task>> =
                boards.iter().map(|b| b.rows().cloned().collect()).collect();
            for i in 0..n {
                if i > 0 {
                    boards[i].merge_table(snapshot[i - 1].iter());
                }
                if i + 1 < n {
                    boards[i].merge_table(snapshot[i + 1].iter());
                }
            }
        }
    }

    #[test]
    fn third_failure_blacklists_then_expires() {
        let mut creator = board(0);
        let id = creator.create(TaskKind::Manual, frame(), Point2::new(3.0, 0.0), 10.0, 1);
        let mut a = board(1);
        a.merge_table(creator.rows());
        let mut watcher = board(2);
        watcher.merge_table(creator.rows());

        for round in 0..2 {
            a.claim(id, 5.0);
            a.report_failure(id, 100.0 + round as f64);
            assert_eq!(a.get(id).unwrap().state, TaskState::Available);
            assert!(a.biddable(a.get(id).unwrap(), 100.0), "fail {round}");
        }
        a.claim(id, 5.0);
        a.report_failure(id, 100.0);
        let row = a.get(id).unwrap().clone();
        assert_eq!(row.state, TaskState::Blacklisted);
        assert!((row.blacklist_until - 220.0).abs() < 1e-3);

        watcher.merge_row(row);
        let seen = watcher.get(id).unwrap().clone();
        assert!(!watcher.biddable(&seen, 150.0), "blocked during the window");
        assert!(watcher
            .choose_bid(Point2::new(0.0, 0.0), &[], 150.0, &locate_identity, &travel_line)
            .is_none());
        assert!(watcher.biddable(&seen, 220.0), "expiry reopens bidding");
        assert!(watcher
            .choose_bid(Point2::new(0.0, 0.0), &[], 220.0, &locate_identity, &travel_line)
            .is_some());
    }

    #[test]
    fn owned_tier3_preempts_bundle_order() {
        let mut b = board(1);
        let near = b.create(TaskKind::Manual, frame(), Point2::new(1.0, 0.0), 10.0, 1);
        let far = b.create(TaskKind::Manual, frame(), Point2::new(9.0, 0.0), 10.0, 3);
        b.claim(near, 5.0);
        b.claim(far, 5.0);
        let bundle = vec![near, far];
        assert_eq!(b.select_next(&bundle, &locate_identity), Some(far));

        // Same tier: bundle order is preserved.
        let mut same = board(1);
        let x = same.create(TaskKind::Manual, frame(), Point2::new(1.0, 0.0), 10.0, 2);
        let y = same.create(TaskKind::Manual, frame(), Point2::new(9.0, 0.0), 10.0, 2);
        same.claim(x, 5.0);
        same.claim(y, 5.0);
        assert_eq!(same.select_next(&[y, x], &locate_identity), Some(y));
    }

    /// Raising a task's tier never pushes its execution later.
    #[test]
    fn raising_tier_never_delays_execution() {
        let exec_order = |tiers: [u8; 3]| -> Vec<TaskId> {
            let mut b = board(1);
            let ids: Vec<TaskId> = tiers
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    b.create(TaskKind::Manual, frame(), Point2::new(i as f64, 0.0), 10.0, t)
                })
                .collect();
            for &id in &ids {
                b.claim(id, 1.0);
            }
            let mut bundle = ids.clone();
            let mut order = Vec::new();
            while let Some(next) = b.select_next(&bundle, &locate_identity) {
                order.push(next);
                bundle.retain(|&t| t != next);
            }
            order
        };
        let before = exec_order([1, 2, 1]);
        let after = exec_order([1, 2, 3]);
        let target = before[2]; // third created task
        let pos_before = before.iter().position(|&t| t == target).unwrap();
        let pos_after = after.iter().position(|&t| t == target).unwrap();
        assert!(pos_after <= pos_before);
    }

    #[test]
    fn frontier_size_maps_to_tiers() {
        let t = TierThresholds::default();
        assert_eq!(t.tier(7.0), 3);
        assert_eq!(t.tier(6.0), 3);
        assert_eq!(t.tier(3.5), 2);
        assert_eq!(t.tier(2.0), 2);
        assert_eq!(t.tier(1.0), 1);
    }

    #[test]
    fn region_override_raises_tier_for_matching_agent() {
        let mut b = board(1);
        let id = b.create(TaskKind::Explore, frame(), Point2::new(4.0, 4.0), 10.0, 1);
        b.regions.push(PriorityRegion {
            id: 7,
            min: Point2::new(0.0, 0.0),
            max: Point2::new(5.0, 5.0),
            kinds: [TaskKind::Explore].into_iter().collect(),
            agents: [AgentId(1)].into_iter().collect(),
            priority_override: Some(3),
            reward_multiplier: 2.0,
        });
        let task = b.get(id).unwrap().clone();
        let eff = b.effective(&task, task.location);
        assert_eq!(eff.tier, 3);
        assert_eq!(eff.reward, 20.0);

        // Different agent: untouched.
        let mut other = board(2);
        other.merge_table(b.rows());
        other.regions = b.regions.clone();
        let eff2 = other.effective(&task, task.location);
        assert_eq!(eff2.tier, 1);
        assert_eq!(eff2.reward, 10.0);
    }
}
