//! Artefact detection, tracking, report throttling, and scoring.
//!
//! Visual detection is a calibrated Bernoulli channel: within sensor range
//! and line of sight, each tick may produce a detection whose measured
//! position carries range-dependent Gaussian noise. Detections feed a
//! per-agent tracker that associates by comparing a Gaussian density around
//! each known track against a uniform new-track density calibrated so the
//! crossover sits exactly at 1 m. Mature tracks are reported over the data
//! layer through a token bucket; runs are scored by greedy one-to-one
//! matching against ground truth at a 5 m gate.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{Point2, Pose2};
use crate::types::{AgentId, ArtefactClass, FrameId, TrackId};
use crate::wire::{Reader, WireError, Writer};

/// Detections beyond this range are ignored, meters.
pub const DETECT_RANGE: f64 = 20.0;

/// Per-tick detection probability at zero range.
pub const DETECT_P0: f64 = 0.15;

/// Measurement noise at zero range, meters (1 sigma).
const NOISE_BASE: f64 = 0.05;

/// Extra measurement noise per meter of range (1 sigma).
const NOISE_PER_M: f64 = 0.02;

/// Posterior confidence is drawn uniformly from this interval.
const POSTERIOR_LO: f64 = 0.3;
const POSTERIOR_HI: f64 = 1.0;

/// Default per-class posterior threshold for keeping a detection.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Isotropic position sigma of a track, meters.
pub const TRACK_SIGMA: f64 = 0.5;

/// Distance at which a detection prefers a new track over association.
pub const NEW_TRACK_DIST: f64 = 1.0;

/// Tracks unseen this long are dropped, seconds.
pub const TRACK_EXPIRY: f64 = 30.0;

/// Associated detections before a track may be reported.
pub const MATURITY: u16 = 3;

/// Report rate limit: bucket refills at this many sends per minute.
pub const SENDS_PER_MINUTE: f64 = 6.0;

/// A reported track is re-sent only after its mean moves this far, meters.
pub const RESEND_DIST: f64 = 0.5;

/// Radius of the signal-proximity channel, meters.
pub const PROXIMITY_RADIUS: f64 = 10.0;

/// Whether a class is sensed by proximity (signal strength) instead of
/// vision.
pub fn is_signal(class: ArtefactClass) -> bool {
    matches!(class, ArtefactClass::Cellphone | ArtefactClass::Gas)
}

/// One accepted detection, localized in the detecting agent's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class: ArtefactClass,
    pub frame: FrameId,
    /// Measured position in `frame` coordinates.
    pub position: Point2,
    pub posterior: f64,
    pub time: f64,
    pub agent: AgentId,
}

/// Per-tick detection channel. `frame_pose` is the global pose of the
/// agent's current local frame; measured positions are stored relative to
/// it. `visible` is the line-of-sight verdict from ground truth.
#[allow(clippy::too_many_arguments)]
pub fn simulate_detection(
    agent: AgentId,
    agent_pos: Point2,
    frame: FrameId,
    frame_pose: Pose2,
    class: ArtefactClass,
    true_pos: Point2,
    visible: bool,
    threshold: f64,
    rng: &mut impl Rng,
    time: f64,
) -> Option<Detection> {
    let range = agent_pos.dist(true_pos);
    if range > DETECT_RANGE || !visible {
        return None;
    }
    let p = DETECT_P0 * (1.0 - range / DETECT_RANGE).max(0.0);
    if rng.random_range(0.0..1.0) >= p {
        return None;
    }
    let sigma = NOISE_BASE + NOISE_PER_M * range;
    let noise = Normal::new(0.0, sigma).unwrap();
    let measured = Point2::new(true_pos.x + noise.sample(rng), true_pos.y + noise.sample(rng));
    let posterior = rng.random_range(POSTERIOR_LO..POSTERIOR_HI);
    if posterior < threshold {
        return None;
    }
    Some(Detection {
        class,
        frame,
        position: frame_pose.untransform(measured),
        posterior,
        time,
        agent,
    })
}

/// A believed artefact: running-mean position with fixed isotropic sigma.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: TrackId,
    pub class: ArtefactClass,
    /// Frame of the first associated detection.
    pub frame: FrameId,
    /// Running mean in `frame` coordinates.
    pub mean: Point2,
    pub sigma: f64,
    pub count: u16,
    pub last_seen: f64,
    /// Mean at the time of the last report, None until first sent.
    pub reported_at: Option<Point2>,
}

/// A track snapshot sent to the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub track: TrackId,
    pub class: ArtefactClass,
    pub frame: FrameId,
    pub position: Point2,
    pub sigma: f64,
    pub count: u16,
    pub time: f64,
}

impl Report {
    /// Fixed 35 bytes.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(35);
        w.u16(self.track.agent.0);
        w.u32(self.track.seq);
        w.u8(self.class.as_u8());
        w.u16(self.frame.agent.0);
        w.u32(self.frame.seq);
        w.f32(self.position.x as f32);
        w.f32(self.position.y as f32);
        w.f32(self.sigma as f32);
        w.u16(self.count);
        w.f64(self.time);
        w.finish()
    }

    pub fn decode(buf: &[u8]) -> Result<Report, WireError> {
        let mut r = Reader::new(buf);
        let track = TrackId {
            agent: AgentId(r.u16()?),
            seq: r.u32()?,
        };
        let class_byte = r.u8()?;
        let class = ArtefactClass::from_u8(class_byte).ok_or(WireError::BadDiscriminant {
            what: "artefact class",
            value: class_byte,
        })?;
        let frame = FrameId {
            agent: AgentId(r.u16()?),
            seq: r.u32()?,
        };
        let position = Point2::new(r.f32()? as f64, r.f32()? as f64);
        let sigma = r.f32()? as f64;
        let count = r.u16()?;
        let time = r.f64()?;
        r.expect_end()?;
        Ok(Report {
            track,
            class,
            frame,
            position,
            sigma,
            count,
            time,
        })
    }
}

/// Per-agent track table plus the report rate limiter.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub me: AgentId,
    next_seq: u32,
    tracks: BTreeMap<TrackId, Track>,
    /// Report tokens; capacity one, refilled at [`SENDS_PER_MINUTE`].
    bucket: f64,
    bucket_at: f64,
}

impl Tracker {
    pub fn new(me: AgentId) -> Self {
        Tracker {
            me,
            next_seq: 0,
            tracks: BTreeMap::new(),
            bucket: 1.0,
            bucket_at: 0.0,
        }
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn get(&self, id: TrackId) -> Option<&Track> {
        self.tracks.get(&id)
    }

    /// Associates a detection with the best same-class track or opens a new
    /// one. Scores are densities at the detection position: an isotropic
    /// Gaussian per track versus a uniform new-track density calibrated so
    /// the crossover sits exactly at [`NEW_TRACK_DIST`]. `resolve` maps
    /// frames to global poses; unresolvable detections are dropped.
    pub fn update(
        &mut self,
        det: &Detection,
        resolve: &dyn Fn(FrameId) -> Option<Pose2>,
    ) -> Option<TrackId> {
        let det_global = resolve(det.frame)?.transform(det.position);
        let norm = 1.0 / (2.0 * std::f64::consts::PI * TRACK_SIGMA * TRACK_SIGMA);
        let uniform = norm * (-NEW_TRACK_DIST * NEW_TRACK_DIST / (2.0 * TRACK_SIGMA * TRACK_SIGMA)).exp();
        let mut best: Option<(f64, TrackId)> = None;
        for track in self.tracks.values() {
            if track.class != det.class {
                continue;
            }
            let Some(pose) = resolve(track.frame) else { continue };
            let d = pose.transform(track.mean).dist(det_global);
            let density = norm * (-d * d / (2.0 * TRACK_SIGMA * TRACK_SIGMA)).exp();
            if best.map_or(true, |(b, _)| density > b) {
                best = Some((density, track.id));
            }
        }
        match best.filter(|&(density, _)| density >= uniform) {
            Some((_, id)) => {
                let track = self.tracks.get_mut(&id).unwrap();
                let pose = resolve(track.frame)?;
                let mean_global = pose.transform(track.mean);
                let n = track.count as f64;
                let new_global = Point2::new(
                    (mean_global.x * n + det_global.x) / (n + 1.0),
                    (mean_global.y * n + det_global.y) / (n + 1.0),
                );
                track.mean = pose.untransform(new_global);
                track.count = track.count.saturating_add(1);
                track.last_seen = det.time;
                Some(id)
            }
            None => {
                self.next_seq += 1;
                let id = TrackId {
                    agent: self.me,
                    seq: self.next_seq,
                };
                self.tracks.insert(
                    id,
                    Track {
                        id,
                        class: det.class,
                        frame: det.frame,
                        mean: det.position,
                        sigma: TRACK_SIGMA,
                        count: 1,
                        last_seen: det.time,
                        reported_at: None,
                    },
                );
                Some(id)
            }
        }
    }

    /// Drops tracks not re-detected within [`TRACK_EXPIRY`].
    pub fn sweep(&mut self, now: f64) {
        self.tracks.retain(|_, t| now - t.last_seen <= TRACK_EXPIRY);
    }

    /// Emits reports for mature tracks, rate-limited by the token bucket.
    /// A track is sendable once it has [`MATURITY`] detections and is
    /// re-sent only after its mean moves more than [`RESEND_DIST`].
    pub fn throttle_and_send(&mut self, now: f64) -> Vec<Report> {
        self.bucket = (self.bucket + (now - self.bucket_at) * SENDS_PER_MINUTE / 60.0).min(1.0);
        self.bucket_at = now;
        let mut out = Vec::new();
        for track in self.tracks.values_mut() {
            if self.bucket < 1.0 {
                break;
            }
            if track.count < MATURITY {
                continue;
            }
            let moved = match track.reported_at {
                None => true,
                Some(at) => track.mean.dist(at) > RESEND_DIST,
            };
            if !moved {
                continue;
            }
            self.bucket -= 1.0;
            track.reported_at = Some(track.mean);
            out.push(Report {
                track: track.id,
                class: track.class,
                frame: track.frame,
                position: track.mean,
                sigma: track.sigma,
                count: track.count,
                time: now,
            });
        }
        out
    }
}

/// A proximity (signal-strength) report: the agent pose at closest
/// approach, not the artefact position.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityReport {
    pub class: ArtefactClass,
    /// Agent position at closest approach, global.
    pub position: Point2,
    pub min_distance: f64,
    pub time: f64,
}

#[derive(Debug, Clone)]
struct Encounter {
    min_distance: f64,
    at: Point2,
    when: f64,
}

/// Tracks one agent's encounters with signal artefacts. Keys are the
/// caller's artefact indices.
#[derive(Debug, Clone, Default)]
pub struct ProximitySensor {
    active: BTreeMap<usize, Encounter>,
}

impl ProximitySensor {
    pub fn new() -> Self {
        Self::default()
    }

    /// One tick of the signal channel for one artefact. No line of sight is
    /// required. Returns a report when the agent leaves the radius.
    pub fn step(
        &mut self,
        artefact: usize,
        class: ArtefactClass,
        artefact_pos: Point2,
        agent_pos: Point2,
        now: f64,
    ) -> Option<ProximityReport> {
        debug_assert!(is_signal(class));
        let d = agent_pos.dist(artefact_pos);
        if d <= PROXIMITY_RADIUS {
            let enc = self.active.entry(artefact).or_insert(Encounter {
                min_distance: f64::INFINITY,
                at: agent_pos,
                when: now,
            });
            if d < enc.min_distance {
                *enc = Encounter {
                    min_distance: d,
                    at: agent_pos,
                    when: now,
                };
            }
            None
        } else {
            self.active.remove(&artefact).map(|enc| ProximityReport {
                class,
                position: enc.at,
                min_distance: enc.min_distance,
                time: enc.when,
            })
        }
    }

    /// Flushes encounters still open at the end of a run.
    pub fn finish(&mut self, classes: &dyn Fn(usize) -> ArtefactClass) -> Vec<ProximityReport> {
        let drained = std::mem::take(&mut self.active);
        drained
            .into_iter()
            .map(|(idx, enc)| ProximityReport {
                class: classes(idx),
                position: enc.at,
                min_distance: enc.min_distance,
                time: enc.when,
            })
            .collect()
    }
}

/// Scoring distance gate, meters.
pub const SCORE_GATE: f64 = 5.0;

/// Outcome for one ground-truth artefact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthOutcome {
    /// Index into the report list, None when nothing matched.
    pub report: Option<usize>,
    pub error: f64,
}

/// Run-level scoring summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Scorecard {
    pub per_truth: Vec<TruthOutcome>,
    pub correct: usize,
    pub total_truths: usize,
    pub total_reports: usize,
    /// RMS position error over correct reports, 0 when none.
    pub rms_error: f64,
}

/// Greedy one-to-one matching: truths in order, each taking the nearest
/// unmatched correct-class report within the 5 m gate.
pub fn score(reports: &[(ArtefactClass, Point2)], truths: &[(ArtefactClass, Point2)]) -> Scorecard {
    let mut taken = vec![false; reports.len()];
    let mut per_truth = Vec::with_capacity(truths.len());
    let mut sq_sum = 0.0;
    let mut correct = 0;
    for &(class, at) in truths {
        let mut best: Option<(f64, usize)> = None;
        for (i, &(rc, rp)) in reports.iter().enumerate() {
            if taken[i] || rc != class {
                continue;
            }
            let d = rp.dist(at);
            if d <= SCORE_GATE && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        match best {
            Some((d, i)) => {
                taken[i] = true;
                correct += 1;
                sq_sum += d * d;
                per_truth.push(TruthOutcome {
                    report: Some(i),
                    error: d,
                });
            }
            None => per_truth.push(TruthOutcome {
                report: None,
                error: f64::INFINITY,
            }),
        }
    }
    Scorecard {
        per_truth,
        correct,
        total_truths: truths.len(),
        total_reports: reports.len(),
        rms_error: if correct > 0 {
            (sq_sum / correct as f64).sqrt()
        } else {
            0.0
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn frame() -> FrameId {
        FrameId {
            agent: AgentId(1),
            seq: 1,
        }
    }

    fn identity(_: FrameId) -> Option<Pose2> {
        Some(Pose2::identity())
    }

    fn det(class: ArtefactClass, at: Point2, time: f64) -> Detection {
        Detection {
            class,
            frame: frame(),
            position: at,
            posterior: 0.9,
            time,
            agent: AgentId(1),
        }
    }

    #[test]
    fn beyond_range_is_never_detected() {
        let mut rng = substream(7, Stream::Detection, 1);
        for _ in 0..1000 {
            let got = simulate_detection(
                AgentId(1),
                Point2::new(0.0, 0.0),
                frame(),
                Pose2::identity(),
                ArtefactClass::Backpack,
                Point2::new(25.0, 0.0),
                true,
                DEFAULT_THRESHOLD,
                &mut rng,
                0.0,
            );
            assert!(got.is_none());
        }
    }

    #[test]
    fn occlusion_blocks_detection() {
        let mut rng = substream(7, Stream::Detection, 1);
        for _ in 0..1000 {
            let got = simulate_detection(
                AgentId(1),
                Point2::new(0.0, 0.0),
                frame(),
                Pose2::identity(),
                ArtefactClass::Backpack,
                Point2::new(2.0, 0.0),
                false,
                DEFAULT_THRESHOLD,
                &mut rng,
                0.0,
            );
            assert!(got.is_none());
        }
    }

    /// Empirical acceptance rate matches p0(1 - r/20) times the posterior
    /// acceptance fraction within Monte-Carlo tolerance.
    #[test]
    fn detection_rate_matches_bernoulli_model() {
        let mut rng = substream(11, Stream::Detection, 2);
        let range = 5.0;
        let trials = 20_000;
        let mut hits = 0;
        for _ in 0..trials {
            if simulate_detection(
                AgentId(1),
                Point2::new(0.0, 0.0),
                frame(),
                Pose2::identity(),
                ArtefactClass::Drill,
                Point2::new(range, 0.0),
                true,
                DEFAULT_THRESHOLD,
                &mut rng,
                0.0,
            )
            .is_some()
            {
                hits += 1;
            }
        }
        let p_detect = DETECT_P0 * (1.0 - range / DETECT_RANGE);
        let p_keep = (POSTERIOR_HI - DEFAULT_THRESHOLD) / (POSTERIOR_HI - POSTERIOR_LO);
        let expect = p_detect * p_keep;
        let got = hits as f64 / trials as f64;
        assert!(
            (got - expect).abs() < 0.01,
            "rate {got:.4} vs model {expect:.4}"
        );
        // At close range, 100 ticks effectively always detect.
        let mut seen = false;
        for _ in 0..100 {
            seen |= simulate_detection(
                AgentId(1),
                Point2::new(0.0, 0.0),
                frame(),
                Pose2::identity(),
                ArtefactClass::Drill,
                Point2::new(0.5, 0.0),
                true,
                0.0,
                &mut rng,
                0.0,
            )
            .is_some();
        }
        assert!(seen);
    }

    #[test]
    fn measurement_noise_grows_with_range() {
        let spread = |range: f64, seed: u64| {
            let mut rng = substream(seed, Stream::Detection, 3);
            let mut sum_sq = 0.0;
            let mut n = 0;
            while n < 2000 {
                if let Some(d) = simulate_detection(
                    AgentId(1),
                    Point2::new(0.0, 0.0),
                    frame(),
                    Pose2::identity(),
                    ArtefactClass::Rope,
                    Point2::new(range, 0.0),
                    true,
                    0.0,
                    &mut rng,
                    0.0,
                ) {
                    let err = d.position.dist(Point2::new(range, 0.0));
                    sum_sq += err * err;
                    n += 1;
                }
            }
            (sum_sq / n as f64).sqrt()
        };
        let near = spread(1.0, 5);
        let far = spread(15.0, 5);
        // RMS of a 2D isotropic Gaussian is sigma * sqrt(2).
        let near_expect = (NOISE_BASE + NOISE_PER_M * 1.0) * 2f64.sqrt();
        let far_expect = (NOISE_BASE + NOISE_PER_M * 15.0) * 2f64.sqrt();
        assert!((near - near_expect).abs() / near_expect < 0.1);
        assert!((far - far_expect).abs() / far_expect < 0.1);
    }

    #[test]
    fn association_crossover_sits_at_one_meter() {
        let mut tracker = Tracker::new(AgentId(1));
        let first = tracker
            .update(&det(ArtefactClass::Helmet, Point2::new(0.0, 0.0), 0.0), &identity)
            .unwrap();

        let near = tracker
            .update(&det(ArtefactClass::Helmet, Point2::new(0.3, 0.0), 1.0), &identity)
            .unwrap();
        assert_eq!(near, first, "0.3 m associates");
        assert_eq!(tracker.get(first).unwrap().count, 2);
        let mean = tracker.get(first).unwrap().mean;
        assert!((mean.x - 0.15).abs() < 1e-9, "running average");

        let far = tracker
            .update(&det(ArtefactClass::Helmet, Point2::new(1.65, 0.0), 2.0), &identity)
            .unwrap();
        assert_ne!(far, first, "1.5 m from the mean opens a new track");

        // Same position, different class: never associated.
        let other = tracker
            .update(&det(ArtefactClass::Survivor, Point2::new(0.15, 0.0), 3.0), &identity)
            .unwrap();
        assert_ne!(other, first);
    }

    #[test]
    fn stale_tracks_expire_at_sweep() {
        let mut tracker = Tracker::new(AgentId(1));
        tracker
            .update(&det(ArtefactClass::Gas, Point2::new(0.0, 0.0), 0.0), &identity)
            .unwrap();
        tracker.sweep(30.0);
        assert_eq!(tracker.tracks().count(), 1, "exactly 30 s is kept");
        tracker.sweep(31.0);
        assert_eq!(tracker.tracks().count(), 0, "31 s is dropped");
    }

    #[test]
    fn maturity_gate_and_resend_suppression() {
        let mut tracker = Tracker::new(AgentId(1));
        for i in 0..2 {
            tracker
                .update(&det(ArtefactClass::Backpack, Point2::new(0.0, 0.0), i as f64), &identity)
                .unwrap();
        }
        assert!(tracker.throttle_and_send(2.0).is_empty(), "2 detections stay private");

        // Eight more re-detections: one report in total.
        let mut sent = 0;
        for i in 2..10 {
            tracker
                .update(&det(ArtefactClass::Backpack, Point2::new(0.0, 0.0), i as f64), &identity)
                .unwrap();
            sent += tracker.throttle_and_send(i as f64).len();
        }
        assert_eq!(sent, 1, "10 re-detections produce exactly 1 report");

        // Drag the mean more than half a meter: one re-send.
        let mut moved = 0;
        for i in 10..40 {
            tracker
                .update(&det(ArtefactClass::Backpack, Point2::new(2.0, 0.0), i as f64), &identity)
                .unwrap();
            moved += tracker.throttle_and_send(i as f64).len();
        }
        assert_eq!(moved, 1, "re-sent once after the mean moved > 0.5 m");
    }

    #[test]
    fn token_bucket_caps_first_minute_at_six() {
        let mut tracker = Tracker::new(AgentId(1));
        for k in 0..20 {
            let at = Point2::new(5.0 * k as f64, 0.0);
            for i in 0..3 {
                tracker
                    .update(&det(ArtefactClass::Drill, at, i as f64), &identity)
                    .unwrap();
            }
        }
        let mut first_minute = 0;
        let mut total = 0;
        for tick in 0..600 {
            let now = tick as f64;
            let n = tracker.throttle_and_send(now).len();
            total += n;
            if now < 60.0 {
                first_minute += n;
            }
        }
        assert_eq!(first_minute, 6);
        assert_eq!(total, 20, "every mature track eventually reports");
    }

    #[test]
    fn proximity_reports_closest_approach_per_encounter() {
        let mut sensor = ProximitySensor::new();
        let phone = Point2::new(0.0, 0.0);
        let mut reports = Vec::new();
        // Straight drive past at 3 m lateral offset, then back again.
        for pass in 0..2 {
            for step in 0..81 {
                let x = -20.0 + step as f64 * 0.5;
                let agent = Point2::new(x, 3.0);
                let now = (pass * 100 + step) as f64;
                reports.extend(sensor.step(0, ArtefactClass::Cellphone, phone, agent, now));
            }
        }
        assert_eq!(reports.len(), 2, "one report per encounter");
        for r in &reports {
            assert!((r.min_distance - 3.0).abs() < 1e-9);
            assert!(r.position.dist(phone) <= 3.0 + 1e-9);
        }

        // Never inside the radius: nothing.
        let mut silent = ProximitySensor::new();
        for step in 0..80 {
            let agent = Point2::new(-20.0 + step as f64 * 0.5, 11.0);
            assert!(silent
                .step(0, ArtefactClass::Gas, phone, agent, step as f64)
                .is_none());
        }
        assert!(silent.finish(&|_| ArtefactClass::Gas).is_empty());
    }

    #[test]
    fn scoring_matches_one_to_one_within_gate() {
        let truths = vec![
            (ArtefactClass::Survivor, Point2::new(0.0, 0.0)),
            (ArtefactClass::Backpack, Point2::new(10.0, 0.0)),
        ];
        let reports = vec![
            (ArtefactClass::Survivor, Point2::new(0.22, 0.0)),
            (ArtefactClass::Survivor, Point2::new(0.5, 0.0)),
            (ArtefactClass::Backpack, Point2::new(10.0, 5.01)),
        ];
        let card = score(&reports, &truths);
        assert_eq!(card.correct, 1);
        assert_eq!(card.per_truth[0].report, Some(0), "nearest report wins");
        assert!((card.per_truth[0].error - 0.22).abs() < 1e-9);
        assert_eq!(card.per_truth[1].report, None, "5.01 m misses the gate");
        assert!((card.rms_error - 0.22).abs() < 1e-9);

        // Wrong class never matches even when close.
        let card = score(
            &[(ArtefactClass::Rope, Point2::new(0.1, 0.0))],
            &[(ArtefactClass::Survivor, Point2::new(0.0, 0.0))],
        );
        assert_eq!(card.correct, 0);
    }

    #[test]
    fn report_codec_roundtrip() {
        let report = Report {
            track: TrackId {
                agent: AgentId(3),
                seq: 17,
            },
            class: ArtefactClass::Extinguisher,
            frame: frame(),
            position: Point2::new(-4.25, 8.5),
            sigma: TRACK_SIGMA,
            count: 5,
            time: 123.5,
        };
        let bytes = report.encode();
        assert_eq!(bytes.len(), 35);
        assert_eq!(Report::decode(&bytes).unwrap(), report);
        assert!(Report::decode(&bytes[..10]).is_err());
    }
}
