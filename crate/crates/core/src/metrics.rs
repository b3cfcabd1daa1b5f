//! Run outputs: the 1 Hz metrics time series, the end-of-run summary, and
//! the artefact report dump used for offline scoring.
//!
//! Everything here formats deterministically. Floats go out with fixed
//! precision in the CSV and through serde_json (shortest roundtrip) in the
//! summary, so equal runs produce byte-identical files.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{Point2, Pose2};
use crate::types::{AgentId, ArtefactClass};

/// Per-agent slice of one metrics sample.
#[derive(Debug, Clone)]
pub struct AgentSample {
    /// True pose in world coordinates.
    pub pose: Pose2,
    /// Distance between believed and true position, None while the agent
    /// has no resolvable pose estimate.
    pub pos_error: Option<f64>,
    /// Fraction of this agent's store the base is known to hold.
    pub sync_to_base: f64,
    /// Tasks this agent currently owns.
    pub tasks_owned: usize,
}

/// One 1 Hz metrics sample.
#[derive(Debug, Clone)]
pub struct Sample {
    pub time: f64,
    /// One entry per roster agent, in roster order.
    pub agents: Vec<AgentSample>,
    /// Fraction of reachable free cells any agent has sensed.
    pub coverage: f64,
    /// Active frontiers summed over agents.
    pub frontiers_active: usize,
    /// Cumulative delivered bytes, one entry per topic in topic order.
    pub bytes_by_topic: Vec<u64>,
    /// Rows in the base station task table.
    pub task_rows: usize,
    /// Cumulative artefact reports sent by all agents.
    pub reports_sent: u64,
}

/// The run's time series, with a fixed column layout derived from the
/// agent roster and topic list.
#[derive(Debug, Clone)]
pub struct MetricsLog {
    agents: Vec<AgentId>,
    topics: Vec<String>,
    rows: Vec<Sample>,
}

impl MetricsLog {
    pub fn new(agents: Vec<AgentId>, topics: Vec<String>) -> Self {
        MetricsLog {
            agents,
            topics,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: Sample) {
        assert_eq!(sample.agents.len(), self.agents.len());
        assert_eq!(sample.bytes_by_topic.len(), self.topics.len());
        self.rows.push(sample);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["time".to_string()];
        for a in &self.agents {
            cols.push(format!("{a}_x"));
            cols.push(format!("{a}_y"));
            cols.push(format!("{a}_theta"));
            cols.push(format!("{a}_err"));
        }
        cols.push("coverage".into());
        cols.push("frontiers_active".into());
        for t in &self.topics {
            cols.push(format!("bytes_{t}"));
        }
        for a in &self.agents {
            cols.push(format!("{a}_sync"));
        }
        cols.push("task_rows".into());
        for a in &self.agents {
            cols.push(format!("{a}_owned"));
        }
        cols.push("reports_sent".into());
        cols.join(",")
    }

    pub fn csv(&self) -> String {
        use std::fmt::Write;
        let mut out = self.header();
        out.push('\n');
        for row in &self.rows {
            write!(out, "{:.1}", row.time).unwrap();
            for a in &row.agents {
                let t = a.pose.translation();
                write!(out, ",{:.4},{:.4},{:.4}", t.x, t.y, a.pose.theta).unwrap();
                match a.pos_error {
                    Some(e) => write!(out, ",{e:.4}").unwrap(),
                    None => out.push_str(",nan"),
                }
            }
            write!(out, ",{:.6},{}", row.coverage, row.frontiers_active).unwrap();
            for b in &row.bytes_by_topic {
                write!(out, ",{b}").unwrap();
            }
            for a in &row.agents {
                write!(out, ",{:.6}", a.sync_to_base).unwrap();
            }
            write!(out, ",{}", row.task_rows).unwrap();
            for a in &row.agents {
                write!(out, ",{}", a.tasks_owned).unwrap();
            }
            write!(out, ",{}", row.reports_sent).unwrap();
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> io::Result<()> {
        std::fs::write(path, self.csv())
    }
}

/// Upper edges of the delivery latency buckets, seconds. The final bucket
/// is open-ended.
pub const LATENCY_EDGES: [f64; 9] = [1.0, 2.0, 5.0, 10.0, 30.0, 60.0, 120.0, 300.0, 600.0];

/// Histogram of publish-to-base delivery latencies for persistent messages.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LatencyHistogram {
    /// Bucket upper edges, seconds; one implicit open bucket follows.
    pub edges: Vec<f64>,
    /// Delivered message count per bucket, `edges.len() + 1` entries.
    pub counts: Vec<u64>,
    pub delivered: u64,
    /// Persistent messages that never reached the base.
    pub outstanding: u64,
    pub max_seconds: f64,
}

impl Default for LatencyHistogram {
    fn default() -> Self {
        LatencyHistogram {
            edges: LATENCY_EDGES.to_vec(),
            counts: vec![0; LATENCY_EDGES.len() + 1],
            delivered: 0,
            outstanding: 0,
            max_seconds: 0.0,
        }
    }
}

impl LatencyHistogram {
    pub fn record(&mut self, seconds: f64) {
        let bucket = self
            .edges
            .iter()
            .position(|&e| seconds < e)
            .unwrap_or(self.edges.len());
        self.counts[bucket] += 1;
        self.delivered += 1;
        if seconds > self.max_seconds {
            self.max_seconds = seconds;
        }
    }
}

/// Artefact scoring digest for the summary.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArtefactSummary {
    pub correct: usize,
    pub total: usize,
    pub reports: usize,
    /// RMS position error over scored matches, meters.
    pub rms_error: f64,
}

/// End-of-run summary written next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    /// Requested mission duration, seconds.
    pub duration: f64,
    /// Simulated seconds actually run.
    pub sim_seconds: f64,
    pub coverage: f64,
    /// Meters traveled per agent.
    pub distance: BTreeMap<String, f64>,
    /// RMS believed-vs-true position error per agent over samples with a
    /// pose estimate, meters.
    pub localization_rms: BTreeMap<String, f64>,
    pub artefacts: ArtefactSummary,
    pub latency: LatencyHistogram,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, path: impl AsRef<Path>) -> io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<RunSummary> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(io::Error::other)
    }
}

/// An artefact class at a world position, for the scoring dump.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArtefactPoint {
    pub class: ArtefactClass,
    pub x: f64,
    pub y: f64,
}

impl ArtefactPoint {
    pub fn new(class: ArtefactClass, p: Point2) -> Self {
        ArtefactPoint { class, x: p.x, y: p.y }
    }

    pub fn pair(&self) -> (ArtefactClass, Point2) {
        (self.class, Point2::new(self.x, self.y))
    }
}

/// Ground truth and received reports in world coordinates, written at the
/// end of a run and consumed by offline scoring.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ReportDump {
    pub truths: Vec<ArtefactPoint>,
    pub reports: Vec<ArtefactPoint>,
}

impl ReportDump {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("dump serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, path: impl AsRef<Path>) -> io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<ReportDump> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(io::Error::other)
    }
}
