//! Desk-scale simulator and library for a decentralized multi-robot
//! exploration stack.
//!
//! The crate is organized as a set of per-agent subsystems that communicate
//! only through a simulated lossy mesh network:
//!
//! * [`world`] — 2D grid worlds, agent kinematics, ray-cast sensing.
//! * [`netsim`] — discrete-event mesh network with line-of-sight links,
//!   per-link bandwidth, and droppable relay nodes.
//! * [`mule`] — disruption-tolerant publish/subscribe data sharing built on
//!   manifest-driven anti-entropy sync.
//! * [`atlas`] — per-agent global pose-graph mapping (SE(2) optimization,
//!   ICP alignment, clique-validated merge hypotheses).
//! * [`frontier`] — visibility-based frontier detection via hidden point
//!   removal.
//! * [`topomap`] — topometric world model and global navigation planner.
//! * [`tasking`] — consensus-based market task allocation.
//! * [`executive`] — scripted finite-state-automaton mission executive.
//! * [`artefacts`] — probabilistic artefact detection, tracking and scoring.
//! * [`scenario`] / [`sim`] — scenario loading, the fixed-step simulation
//!   loop, and deterministic metrics logging.
//!
//! Everything is deterministic: a run is a pure function of the scenario and
//! a seed.

pub mod artefacts;
pub mod atlas;
pub mod executive;
pub mod frontier;
pub mod geom;
pub mod metrics;
pub mod mule;
pub mod netsim;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod tasking;
pub mod topomap;
pub mod types;
pub mod wire;
pub mod world;

pub use geom::{Point2, Pose2};
pub use types::{AgentId, AgentKind, FrameId, FrontierId, MessageId, TaskId, TrackId};
