//! Scenario files: JSON mission descriptions with an embedded ASCII map.
//!
//! A scenario holds everything a run needs: the world geometry, the agent
//! roster, the radio model, scripted operator events, and the master seed.
//! Map glyphs: `#` wall, `.` free, `r` rough, `B` the base cell, and any
//! other capital letter an artefact site whose class comes from the
//! `artefacts` legend. The first map line is the top of the world.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::executive;
use crate::geom::{Point2, Pose2};
use crate::netsim::{CommsConfig, LinkOverride, NodeId};
use crate::tasking::TaskKind;
use crate::types::{AgentId, AgentKind, ArtefactClass};
use crate::world::{Artefact, CellKind, GridWorld, DEFAULT_CELL_SIZE};

/// Mission length when the scenario does not say, seconds.
pub const DEFAULT_DURATION: f64 = 3600.0;

/// Rough-terrain cost multiplier when the scenario does not say.
pub const DEFAULT_ROUGH_COST: f64 = 3.0;

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE
}

fn default_rough_cost() -> f64 {
    DEFAULT_ROUGH_COST
}

fn default_duration() -> f64 {
    DEFAULT_DURATION
}

fn one() -> f64 {
    1.0
}

/// One mobile platform in the mission.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: AgentId,
    pub kind: AgentKind,
    /// Start position in world meters. Omitted for carried UAVs, which ride
    /// their carrier until launched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 2]>,
    /// Start heading, radians.
    #[serde(default)]
    pub heading: f64,
    /// Overrides the platform default speed, m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    /// Overrides the platform default passage width, meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_width: Option<f64>,
    /// Overrides the default 20 m sensor range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_range: Option<f64>,
    /// The UAV this platform carries, launched by `launch-uav`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carried_uav: Option<AgentId>,
    /// Initial command list; empty means idle.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub commands: String,
}

/// An artefact placed at an explicit position instead of a map letter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacedArtefact {
    pub class: ArtefactClass,
    pub position: [f64; 2],
}

/// A scripted operator input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// What the operator does at an event's time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Replaces an agent's command list.
    Commands { agent: AgentId, commands: String },
    /// Adds a priority region scaling reward and overriding tiers inside a
    /// world-coordinate box.
    PriorityRegion {
        min: [f64; 2],
        max: [f64; 2],
        /// Task kinds the region applies to; empty means all.
        #[serde(default)]
        kinds: Vec<TaskKind>,
        /// Agents the region applies to; empty means all.
        #[serde(default)]
        agents: Vec<AgentId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        priority: Option<u8>,
        #[serde(default = "one")]
        multiplier: f64,
    },
    /// Posts an operator task at a world position.
    ManualTask {
        position: [f64; 2],
        reward: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tier: Option<u8>,
    },
    /// Sends an agent back to the base to deliver everything it holds.
    Recall { agent: AgentId },
}

/// A full mission description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    /// ASCII rows, first line on top.
    pub map: Vec<String>,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    #[serde(default = "default_rough_cost")]
    pub rough_cost: f64,
    /// Legend mapping map letters to artefact classes.
    #[serde(default)]
    pub artefacts: BTreeMap<char, ArtefactClass>,
    /// Artefacts at explicit coordinates, appended after map letters.
    #[serde(default)]
    pub placed_artefacts: Vec<PlacedArtefact>,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub comms: CommsConfig,
    #[serde(default)]
    pub link_overrides: Vec<LinkOverride>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
}

/// One validation failure, with the scenario part it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub context: String,
    pub message: String,
}

impl ValidationError {
    fn new(context: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationError {
            context: context.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.context, self.message)
    }
}

/// Failure to read or parse a scenario file.
#[derive(Debug)]
pub enum LoadError {
    Io(std::io::Error),
    Parse(serde_json::Error),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(e) => write!(f, "cannot read scenario: {e}"),
            LoadError::Parse(e) => write!(f, "cannot parse scenario: {e}"),
        }
    }
}

impl std::error::Error for LoadError {}

/// Everything `validate` extracted from the map while checking it.
#[derive(Debug, Clone)]
pub struct Setup {
    pub world: GridWorld,
    /// Base station pose: the `B` cell center, heading 0.
    pub base: Pose2,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, LoadError> {
        let text = std::fs::read_to_string(path).map_err(LoadError::Io)?;
        Scenario::from_json(&text).map_err(LoadError::Parse)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks every invariant and returns all failures, empty when valid.
    pub fn validate(&self) -> Vec<ValidationError> {
        match self.check() {
            Ok(_) => Vec::new(),
            Err(errs) => errs,
        }
    }

    /// Validates and builds the world. All errors are collected, not just
    /// the first.
    pub fn build(&self) -> Result<Setup, Vec<ValidationError>> {
        self.check()
    }

    fn check(&self) -> Result<Setup, Vec<ValidationError>> {
        let mut errs = Vec::new();

        let grid = self.check_map(&mut errs);
        self.check_agents(&mut errs, grid.as_ref());
        self.check_comms(&mut errs);
        self.check_events(&mut errs, grid.as_ref());

        if self.duration <= 0.0 {
            errs.push(ValidationError::new("duration", "must be positive"));
        }

        match grid {
            Some(grid) if errs.is_empty() => Ok(grid.into_setup()),
            _ => Err(errs),
        }
    }

    fn check_map(&self, errs: &mut Vec<ValidationError>) -> Option<ParsedMap> {
        if self.map.is_empty() {
            errs.push(ValidationError::new("map", "no rows"));
            return None;
        }
        let width = self.map[0].chars().count();
        if width == 0 {
            errs.push(ValidationError::new("map", "empty rows"));
            return None;
        }
        if self.map.iter().any(|row| row.chars().count() != width) {
            errs.push(ValidationError::new("map", "rows differ in length"));
            return None;
        }
        if self.cell_size <= 0.0 {
            errs.push(ValidationError::new("cell_size", "must be positive"));
            return None;
        }
        if self.rough_cost < 1.0 {
            errs.push(ValidationError::new("rough_cost", "must be at least 1"));
        }

        let height = self.map.len();
        let mut cells = vec![CellKind::Free; width * height];
        let mut artefacts = Vec::new();
        let mut base = None;
        let mut ok = true;
        // The first map line is the top of the world: text row i maps to
        // grid row height-1-i so y grows upward.
        for (i, line) in self.map.iter().enumerate() {
            let row = height - 1 - i;
            for (col, glyph) in line.chars().enumerate() {
                let idx = row * width + col;
                match glyph {
                    '#' => cells[idx] = CellKind::Wall,
                    '.' => {}
                    'r' => cells[idx] = CellKind::Rough,
                    'B' => {
                        if base.replace((row, col)).is_some() {
                            errs.push(ValidationError::new("map", "more than one base cell"));
                            ok = false;
                        }
                    }
                    'A'..='Z' => match self.artefacts.get(&glyph) {
                        Some(&class) => artefacts.push((class, row, col)),
                        None => {
                            errs.push(ValidationError::new(
                                "map",
                                format!("artefact letter `{glyph}` missing from the legend"),
                            ));
                            ok = false;
                        }
                    },
                    other => {
                        errs.push(ValidationError::new(
                            "map",
                            format!("unknown glyph `{other}` at line {}, column {}", i + 1, col + 1),
                        ));
                        ok = false;
                    }
                }
            }
        }
        if self.artefacts.contains_key(&'B') {
            errs.push(ValidationError::new(
                "artefacts",
                "`B` marks the base and cannot be an artefact letter",
            ));
            ok = false;
        }
        let Some(base) = base else {
            errs.push(ValidationError::new("map", "no base cell (`B`)"));
            return None;
        };
        if !ok {
            return None;
        }

        let world = GridWorld::new(
            width as u16,
            height as u16,
            self.cell_size,
            cells,
            self.rough_cost.max(1.0),
        );
        let mut placed: Vec<Artefact> = artefacts
            .into_iter()
            .map(|(class, row, col)| Artefact {
                class,
                pos: world.cell_center(row as u16, col as u16),
            })
            .collect();
        for (i, a) in self.placed_artefacts.iter().enumerate() {
            let pos = Point2::new(a.position[0], a.position[1]);
            match world.cell_of(pos) {
                Some((r, c)) if world.kind(r, c) != CellKind::Wall => {
                    placed.push(Artefact { class: a.class, pos })
                }
                Some(_) => errs.push(ValidationError::new(
                    format!("placed_artefacts[{i}]"),
                    "artefact sits on a wall cell",
                )),
                None => errs.push(ValidationError::new(
                    format!("placed_artefacts[{i}]"),
                    "artefact is outside the map",
                )),
            }
        }
        Some(ParsedMap {
            world,
            base,
            artefacts: placed,
        })
    }

    fn check_agents(&self, errs: &mut Vec<ValidationError>, grid: Option<&ParsedMap>) {
        let mut ids = BTreeSet::new();
        let carried: BTreeSet<AgentId> =
            self.agents.iter().filter_map(|a| a.carried_uav).collect();
        for agent in &self.agents {
            let ctx = format!("agents[{}]", agent.id);
            if agent.id == AgentId::BASE {
                errs.push(ValidationError::new(&ctx, "id 0 is the base station"));
            }
            if !ids.insert(agent.id) {
                errs.push(ValidationError::new(&ctx, "duplicate agent id"));
            }
            if agent.kind == AgentKind::Base {
                errs.push(ValidationError::new(&ctx, "the base is implicit, not an agent"));
            }
            if agent.speed.is_some_and(|v| v <= 0.0) {
                errs.push(ValidationError::new(&ctx, "speed must be positive"));
            }
            if agent.passage_width.is_some_and(|v| v <= 0.0) {
                errs.push(ValidationError::new(&ctx, "passage_width must be positive"));
            }
            if agent.sensor_range.is_some_and(|v| v <= 0.0) {
                errs.push(ValidationError::new(&ctx, "sensor_range must be positive"));
            }
            if agent.carried_uav.is_some() && !agent.kind.can_carry_uav() {
                errs.push(ValidationError::new(&ctx, "only a large UGV may carry a UAV"));
            }
            if let Some(uav) = agent.carried_uav {
                match self.agents.iter().find(|a| a.id == uav) {
                    None => errs.push(ValidationError::new(
                        &ctx,
                        format!("carried_uav {uav} is not in the agent list"),
                    )),
                    Some(a) if a.kind != AgentKind::Uav => {
                        errs.push(ValidationError::new(&ctx, "carried_uav must be a UAV"))
                    }
                    Some(_) => {}
                }
            }
            if carried.contains(&agent.id) {
                if agent.start.is_some() {
                    errs.push(ValidationError::new(
                        &ctx,
                        "carried UAVs ride their carrier and take no start",
                    ));
                }
            } else {
                match agent.start {
                    None => errs.push(ValidationError::new(&ctx, "missing start position")),
                    Some([x, y]) => {
                        if let Some(grid) = grid {
                            let width = agent
                                .passage_width
                                .unwrap_or_else(|| agent.kind.default_passage_width());
                            let fits = grid
                                .world
                                .cell_of(Point2::new(x, y))
                                .is_some_and(|(r, c)| {
                                    grid.world.traversable(r, c, agent.kind, width)
                                });
                            if !fits {
                                errs.push(ValidationError::new(
                                    &ctx,
                                    "start is not on a cell the platform can occupy",
                                ));
                            }
                        }
                    }
                }
            }
            if !agent.commands.is_empty() {
                if let Err(e) = executive::parse_commands(&agent.commands) {
                    errs.push(ValidationError::new(format!("{ctx}.commands"), e.to_string()));
                }
            }
        }
        let mut seen_carried = BTreeSet::new();
        for agent in &self.agents {
            if let Some(uav) = agent.carried_uav {
                if !seen_carried.insert(uav) {
                    errs.push(ValidationError::new(
                        format!("agents[{}]", agent.id),
                        format!("{uav} is carried by two agents"),
                    ));
                }
            }
        }
    }

    fn check_comms(&self, errs: &mut Vec<ValidationError>) {
        if self.comms.bandwidth <= 0.0 {
            errs.push(ValidationError::new("comms", "bandwidth must be positive"));
        }
        if self.comms.link_range <= 0.0 {
            errs.push(ValidationError::new("comms", "link_range must be positive"));
        }
        if self.comms.discovery_period <= 0.0 {
            errs.push(ValidationError::new("comms", "discovery_period must be positive"));
        }
        for (i, o) in self.link_overrides.iter().enumerate() {
            let ctx = format!("link_overrides[{i}]");
            if o.t_end < o.t_start {
                errs.push(ValidationError::new(&ctx, "t_end before t_start"));
            }
            for node in [o.a, o.b] {
                if let NodeId::Agent(id) = node {
                    if !self.agent_exists(id) {
                        errs.push(ValidationError::new(
                            &ctx,
                            format!("unknown agent {id}"),
                        ));
                    }
                }
            }
        }
    }

    fn check_events(&self, errs: &mut Vec<ValidationError>, grid: Option<&ParsedMap>) {
        let mut last = f64::NEG_INFINITY;
        for (i, event) in self.events.iter().enumerate() {
            let ctx = format!("events[{i}]");
            if event.time < 0.0 {
                errs.push(ValidationError::new(&ctx, "negative time"));
            }
            if event.time < last {
                errs.push(ValidationError::new(&ctx, "events are not sorted by time"));
            }
            last = event.time;
            match &event.kind {
                EventKind::Commands { agent, commands } => {
                    if !self.agent_exists(*agent) {
                        errs.push(ValidationError::new(&ctx, format!("unknown agent {agent}")));
                    }
                    if let Err(e) = executive::parse_commands(commands) {
                        errs.push(ValidationError::new(&ctx, e.to_string()));
                    }
                }
                EventKind::PriorityRegion {
                    min,
                    max,
                    priority,
                    multiplier,
                    agents,
                    ..
                } => {
                    if min[0] > max[0] || min[1] > max[1] {
                        errs.push(ValidationError::new(&ctx, "region min exceeds max"));
                    }
                    if *multiplier < 0.0 {
                        errs.push(ValidationError::new(&ctx, "negative multiplier"));
                    }
                    if priority.is_some_and(|p| !(1..=3).contains(&p)) {
                        errs.push(ValidationError::new(&ctx, "priority must be 1..=3"));
                    }
                    for a in agents {
                        if !self.agent_exists(*a) {
                            errs.push(ValidationError::new(&ctx, format!("unknown agent {a}")));
                        }
                    }
                }
                EventKind::ManualTask { position, reward, tier } => {
                    if *reward <= 0.0 {
                        errs.push(ValidationError::new(&ctx, "reward must be positive"));
                    }
                    if tier.is_some_and(|t| !(1..=3).contains(&t)) {
                        errs.push(ValidationError::new(&ctx, "tier must be 1..=3"));
                    }
                    if let Some(grid) = grid {
                        let p = Point2::new(position[0], position[1]);
                        let on_map = grid
                            .world
                            .cell_of(p)
                            .is_some_and(|(r, c)| grid.world.kind(r, c) != CellKind::Wall);
                        if !on_map {
                            errs.push(ValidationError::new(
                                &ctx,
                                "task position is not on an open cell",
                            ));
                        }
                    }
                }
                EventKind::Recall { agent } => {
                    if !self.agent_exists(*agent) {
                        errs.push(ValidationError::new(&ctx, format!("unknown agent {agent}")));
                    }
                }
            }
        }
    }

    fn agent_exists(&self, id: AgentId) -> bool {
        id == AgentId::BASE || self.agents.iter().any(|a| a.id == id)
    }
}

struct ParsedMap {
    world: GridWorld,
    base: (usize, usize),
    artefacts: Vec<Artefact>,
}

impl ParsedMap {
    fn into_setup(mut self) -> Setup {
        let (row, col) = self.base;
        let center = self.world.cell_center(row as u16, col as u16);
        self.world.artefacts = self.artefacts;
        Setup {
            world: self.world,
            base: Pose2::new(center.x, center.y, 0.0),
        }
    }
}
