//! Shared identifier and enum types.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifies a participant in the data-sharing network. The base station is
/// always agent 0.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct AgentId(pub u16);

impl AgentId {
    pub const BASE: AgentId = AgentId(0);

    pub fn is_base(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// Platform class. Determines speed, passage width and sensing defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Base,
    LargeUgv,
    SmallUgv,
    Uav,
}

impl AgentKind {
    /// Nominal commanded speed, m/s.
    pub fn default_speed(self) -> f64 {
        match self {
            AgentKind::Base => 0.0,
            AgentKind::LargeUgv => 0.75,
            AgentKind::SmallUgv => 0.5,
            AgentKind::Uav => 2.0,
        }
    }

    /// Minimum free-corridor width the platform fits through, meters.
    pub fn default_passage_width(self) -> f64 {
        match self {
            AgentKind::Base => 0.0,
            AgentKind::LargeUgv => 1.0,
            AgentKind::SmallUgv => 0.75,
            AgentKind::Uav => 2.0,
        }
    }

    /// Aerial platforms are unaffected by rough ground.
    pub fn ignores_rough(self) -> bool {
        matches!(self, AgentKind::Uav)
    }

    /// Only large ground vehicles can carry a marsupial UAV.
    pub fn can_carry_uav(self) -> bool {
        matches!(self, AgentKind::LargeUgv)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AgentKind::Base => "base",
            AgentKind::LargeUgv => "large_ugv",
            AgentKind::SmallUgv => "small_ugv",
            AgentKind::Uav => "uav",
        };
        f.write_str(s)
    }
}

/// Identifies a mapping frame: the agent that created it plus a per-agent
/// sequence number starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FrameId {
    pub agent: AgentId,
    pub seq: u32,
}

impl FrameId {
    pub const fn new(agent: AgentId, seq: u32) -> Self {
        FrameId { agent, seq }
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}:{}", self.agent.0, self.seq)
    }
}

/// Identifies a published message: origin agent, hashed topic, and a
/// per-(origin, topic) sequence number starting at 1 with no gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId {
    pub origin: AgentId,
    pub topic: u16,
    pub seq: u64,
}

/// Identifies a frontier: detecting agent plus per-agent counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FrontierId {
    pub agent: AgentId,
    pub seq: u32,
}

impl fmt::Display for FrontierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fr{}:{}", self.agent.0, self.seq)
    }
}

/// Identifies a supercell: the frame whose submap it belongs to plus its
/// index in that submap's segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SupercellId {
    pub frame: FrameId,
    pub index: u16,
}

impl fmt::Display for SupercellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sc{}:{}/{}", self.frame.agent.0, self.frame.seq, self.index)
    }
}

/// Identifies a task: creating agent plus per-agent counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId {
    pub agent: AgentId,
    pub seq: u32,
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}:{}", self.agent.0, self.seq)
    }
}

/// Identifies an artefact track: tracking agent plus per-agent counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackId {
    pub agent: AgentId,
    pub seq: u32,
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tr{}:{}", self.agent.0, self.seq)
    }
}

/// Artefact classes scored by the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtefactClass {
    Survivor,
    Backpack,
    Cellphone,
    Drill,
    Extinguisher,
    Gas,
    Helmet,
    Rope,
    Vent,
}

impl ArtefactClass {
    pub fn as_u8(self) -> u8 {
        match self {
            ArtefactClass::Survivor => 0,
            ArtefactClass::Backpack => 1,
            ArtefactClass::Cellphone => 2,
            ArtefactClass::Drill => 3,
            ArtefactClass::Extinguisher => 4,
            ArtefactClass::Gas => 5,
            ArtefactClass::Helmet => 6,
            ArtefactClass::Rope => 7,
            ArtefactClass::Vent => 8,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => ArtefactClass::Survivor,
            1 => ArtefactClass::Backpack,
            2 => ArtefactClass::Cellphone,
            3 => ArtefactClass::Drill,
            4 => ArtefactClass::Extinguisher,
            5 => ArtefactClass::Gas,
            6 => ArtefactClass::Helmet,
            7 => ArtefactClass::Rope,
            8 => ArtefactClass::Vent,
            _ => return None,
        })
    }

    /// Classes sensed by proximity rather than vision.
    pub fn is_proximity(self) -> bool {
        matches!(self, ArtefactClass::Cellphone | ArtefactClass::Gas)
    }
}

impl fmt::Display for ArtefactClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ArtefactClass::Survivor => "survivor",
            ArtefactClass::Backpack => "backpack",
            ArtefactClass::Cellphone => "cellphone",
            ArtefactClass::Drill => "drill",
            ArtefactClass::Extinguisher => "extinguisher",
            ArtefactClass::Gas => "gas",
            ArtefactClass::Helmet => "helmet",
            ArtefactClass::Rope => "rope",
            ArtefactClass::Vent => "vent",
        };
        f.write_str(s)
    }
}
