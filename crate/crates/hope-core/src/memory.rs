//! Dual-timescale episodic memory and the occlusion-robust tracker
//! built on it.
//!
//! Two stores with different lifetimes back the tracker. Short-term
//! memory is a sliding buffer of the last [`STM_CAPACITY`] frames of
//! observed object states, queried by softmax cross-attention. Long-term
//! memory is an associative weight matrix updated online by a gated,
//! normalized delta rule:
//!
//! ```text
//!     W <- W + g (v - W k) k^t / (k^t k)
//! ```
//!
//! which stores a key-value pair in one shot at g = 1 and contracts the
//! readout error by exactly (1 - g) per repeated write.
//!
//! The gate g combines two per-frame signals,
//!
//! ```text
//!     s_t = |y_hat - y|^2          (surprise: squared prediction error)
//!     r_t = 1 - sigmoid(noise)     (reliability of the sensor)
//!     g_t = sigmoid(w_s s_t + w_r r_t + b)
//! ```
//!
//! so surprising observations from a clean sensor write strongly while
//! noisy ones barely register.
//!
//! [`track_sequence`] runs a greedy gated tracker over a frame sequence
//! in one of three modes: no memory (tracks die after a few missed
//! frames), short-term memory (dead tracks can be revived by attention
//! over the buffer window), and the dual store (revival also works past
//! the window through the weight memory). The report scores every
//! disappearance/reappearance event by whether the object resumed its
//! old track id, summarized by the Occ-Track fraction over events longer
//! than a configured gap.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frames the short-term buffer retains; at 10 Hz this is a 5 second
/// window.
pub const STM_CAPACITY: usize = 50;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Squared prediction error between a predicted and an observed vector.
pub fn surprise(pred: &[f64], obs: &[f64]) -> Result<f64> {
    if pred.len() != obs.len() {
        return Err(Error::DimensionMismatch(format!(
            "prediction has length {}, observation {}",
            pred.len(),
            obs.len()
        )));
    }
    if pred.iter().chain(obs.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "surprise inputs must be finite".into(),
        ));
    }
    Ok(pred
        .iter()
        .zip(obs.iter())
        .map(|(p, o)| (p - o) * (p - o))
        .sum())
}

/// Sensor reliability, `1 - sigmoid(noise_level)`, strictly decreasing
/// from 0.5 at zero noise toward 0.
pub fn reliability(noise_level: f64) -> Result<f64> {
    if !noise_level.is_finite() || noise_level < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise level must be finite and nonnegative, got {noise_level}"
        )));
    }
    Ok(1.0 - sigmoid(noise_level))
}

/// Coefficients of the write gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w_s: f64,
    pub w_r: f64,
    pub b: f64,
}

impl Default for GateParams {
    /// Chosen so a clean surprising observation writes strongly
    /// (g > 0.7) and a maximally noisy one writes weakly (g < 0.2).
    fn default() -> Self {
        Self {
            w_s: 2.0,
            w_r: 4.0,
            b: -2.0,
        }
    }
}

impl GateParams {
    pub fn validate(&self) -> Result<()> {
        if ![self.w_s, self.w_r, self.b].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "gate parameters must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// The write gate, `sigmoid(w_s s + w_r r + b)`, always strictly inside
/// (0, 1).
pub fn gate(s: f64, r: f64, params: &GateParams) -> Result<f64> {
    params.validate()?;
    if !s.is_finite() || !r.is_finite() {
        return Err(Error::InvalidParameter(
            "gate inputs must be finite".into(),
        ));
    }
    Ok(sigmoid(params.w_s * s + params.w_r * r + params.b))
}

/// Associative weight memory mapping keys of length `key_dim` to values
/// of length `value_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtmState {
    w: DMatrix<f64>,
    key_dim: usize,
    value_dim: usize,
    norm_cap: f64,
    writes: usize,
}

impl LtmState {
    /// Empty memory with the default Frobenius norm cap of 1e6.
    pub fn new(key_dim: usize, value_dim: usize) -> Result<Self> {
        Self::with_norm_cap(key_dim, value_dim, 1e6)
    }

    pub fn with_norm_cap(key_dim: usize, value_dim: usize, norm_cap: f64) -> Result<Self> {
        if key_dim == 0 || value_dim == 0 {
            return Err(Error::InvalidParameter(
                "memory dimensions must be at least 1".into(),
            ));
        }
        if !(norm_cap > 0.0) || !norm_cap.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "norm cap must be positive and finite, got {norm_cap}"
            )));
        }
        Ok(Self {
            w: DMatrix::zeros(value_dim, key_dim),
            key_dim,
            value_dim,
            norm_cap,
            writes: 0,
        })
    }

    #[must_use]
    pub fn key_dim(&self) -> usize {
        self.key_dim
    }

    #[must_use]
    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    /// Number of writes applied so far.
    #[must_use]
    pub fn writes(&self) -> usize {
        self.writes
    }

    /// The gated normalized delta rule. A gate of zero leaves the matrix
    /// untouched, bit for bit; a gate of one stores the pair in one
    /// shot. Keys too small to normalize are rejected.
    pub fn write(&mut self, key: &DVector<f64>, value: &DVector<f64>, g: f64) -> Result<()> {
        if key.len() != self.key_dim || value.len() != self.value_dim {
            return Err(Error::DimensionMismatch(format!(
                "write with key length {} and value length {}, memory is {} -> {}",
                key.len(),
                value.len(),
                self.key_dim,
                self.value_dim
            )));
        }
        if key.iter().chain(value.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "write inputs must be finite".into(),
            ));
        }
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::InvalidParameter(format!(
                "gate must lie in [0, 1], got {g}"
            )));
        }
        let norm_sq: f64 = key.dot(key);
        if !norm_sq.is_normal() {
            return Err(Error::DegenerateKey);
        }
        if g == 0.0 {
            self.writes += 1;
            return Ok(());
        }
        let residual = value - &self.w * key;
        let updated = &self.w + residual * (key.transpose() * (g / norm_sq));
        let norm = updated.norm();
        if !norm.is_finite() || norm > self.norm_cap {
            return Err(Error::InvalidParameter(format!(
                "write pushes the memory norm to {norm:.3e}, past the cap {:.3e}",
                self.norm_cap
            )));
        }
        self.w = updated;
        self.writes += 1;
        Ok(())
    }

    /// Linear readout `W key`.
    pub fn read(&self, key: &DVector<f64>) -> Result<DVector<f64>> {
        if key.len() != self.key_dim {
            return Err(Error::DimensionMismatch(format!(
                "read with key length {}, memory expects {}",
                key.len(),
                self.key_dim
            )));
        }
        if key.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("read key must be finite".into()));
        }
        Ok(&self.w * key)
    }
}

/// One remembered object state: which track observed it, and what was
/// seen.
#[derive(Debug, Clone, PartialEq)]
pub struct StmObjectState {
    pub track_id: u64,
    pub feature: DVector<f64>,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

/// One buffered frame of observed object states.
#[derive(Debug, Clone, PartialEq)]
pub struct StmFrame {
    pub timestamp: f64,
    pub objects: Vec<StmObjectState>,
}

/// Sliding window over the last [`STM_CAPACITY`] frames, strictly
/// oldest-out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StmBuffer {
    frames: VecDeque<StmFrame>,
}

impl StmBuffer {
    #[must_use]
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a frame, evicting the oldest once the window is full.
    pub fn push(&mut self, frame: StmFrame) {
        if self.frames.len() == STM_CAPACITY {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Buffered frames, oldest first.
    pub fn frames(&self) -> impl Iterator<Item = &StmFrame> {
        self.frames.iter()
    }

    /// All buffered object states in a fixed order: frames oldest first,
    /// objects in insertion order. Cross-attention weights follow this
    /// order.
    pub fn entries(&self) -> impl Iterator<Item = &StmObjectState> {
        self.frames.iter().flat_map(|f| f.objects.iter())
    }
}

/// Softmax cross-attention over every buffered object state, with
/// weight proportional to `exp(<query, feature_i> / (sqrt(d) * temperature))`.
/// Returns the attention-weighted feature and the weights in
/// [`StmBuffer::entries`] order. An empty buffer cannot answer.
pub fn stm_cross_attend(
    query: &DVector<f64>,
    buffer: &StmBuffer,
    temperature: f64,
) -> Result<(DVector<f64>, Vec<f64>)> {
    if buffer.entries().next().is_none() {
        return Err(Error::ColdStart);
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("query must be finite".into()));
    }
    let d = query.len();
    let scale = 1.0 / ((d as f64).sqrt() * temperature);
    let mut logits = Vec::new();
    for entry in buffer.entries() {
        if entry.feature.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "buffered feature has length {}, query {d}",
                entry.feature.len()
            )));
        }
        logits.push(query.dot(&entry.feature) * scale);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut retrieved = DVector::zeros(d);
    for (w, entry) in weights.iter().zip(buffer.entries()) {
        retrieved += &entry.feature * *w;
    }
    Ok((retrieved, weights))
}

/// One object detection inside a frame. The identity hint is ground
/// truth carried along for scoring; the tracker itself never reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedObject {
    pub id_hint: Option<u64>,
    pub feature: Vec<f64>,
    pub position: [f64; 2],
}

/// One frame of detections with the sensor noise level in effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    pub timestamp: f64,
    pub objects: Vec<ObservedObject>,
    pub noise_level: f64,
}

/// Which memory stores the tracker may consult.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackMode {
    /// Tracks die for good after `max_coast` missed frames.
    #[serde(rename = "none")]
    None,
    /// Dead tracks can be revived by attention over the buffer window.
    #[serde(rename = "stm")]
    Stm,
    /// Revival also works past the window through the weight memory.
    #[serde(rename = "stm+ltm")]
    StmLtm,
}

impl std::str::FromStr for TrackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "stm" => Ok(Self::Stm),
            "stm+ltm" => Ok(Self::StmLtm),
            other => Err(Error::InvalidParameter(format!(
                "unknown track mode {other:?}, expected none, stm, or stm+ltm"
            ))),
        }
    }
}

impl std::fmt::Display for TrackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Stm => "stm",
            Self::StmLtm => "stm+ltm",
        })
    }
}

/// Tracker tuning knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Gating radius on the association cost.
    pub assoc_gate: f64,
    /// Position scale (meters) for the distance term.
    pub pos_sigma: f64,
    /// Missed frames before a track dies.
    pub max_coast: usize,
    /// Only gaps longer than this count toward Occ-Track.
    pub occ_threshold_frames: usize,
    /// Cross-attention temperature for revival queries.
    pub stm_temperature: f64,
    /// Cosine similarity a revival candidate must reach.
    pub revival_sim: f64,
    pub gate_params: GateParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            assoc_gate: 5.0,
            pos_sigma: 1.0,
            max_coast: 3,
            occ_threshold_frames: 10,
            stm_temperature: 0.1,
            revival_sim: 0.8,
            gate_params: GateParams::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("assoc_gate", self.assoc_gate),
            ("pos_sigma", self.pos_sigma),
            ("stm_temperature", self.stm_temperature),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.revival_sim.is_finite() || !(0.0..=1.0).contains(&self.revival_sim) {
            return Err(Error::InvalidParameter(format!(
                "revival_sim must lie in [0, 1], got {}",
                self.revival_sim
            )));
        }
        self.gate_params.validate()
    }
}

/// Outcome of one disappearance/reappearance event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcclusionEvent {
    /// Ground-truth object id.
    pub object: u64,
    /// Consecutive frames the object was absent.
    pub gap_frames: usize,
    /// Whether the object resumed its pre-gap track id.
    pub recovered: bool,
}

/// Lifetime summary of one track.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub track_id: u64,
    pub first_frame: usize,
    pub last_frame: usize,
    /// Frames in which the track matched a detection.
    pub observations: usize,
}

/// What a tracking run produced: the Occ-Track fraction (absent when no
/// event exceeds the gap threshold), every gap event, and the track
/// lifetimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub mode: TrackMode,
    pub occ_track: Option<f64>,
    pub events: Vec<OcclusionEvent>,
    pub tracks: Vec<TrackSummary>,
}

struct Track {
    id: u64,
    /// Normalized feature at creation, the stable identity key.
    descriptor: DVector<f64>,
    feature: DVector<f64>,
    position: [f64; 2],
    velocity: [f64; 2],
    coast: usize,
    alive: bool,
    first_frame: usize,
    last_frame: usize,
    observations: usize,
}

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

fn normalized(v: &DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    if n.is_normal() {
        Some(v / n)
    } else {
        None
    }
}

/// Runs the greedy gated tracker over a frame sequence and scores every
/// occlusion event against the ground-truth identity hints.
///
/// Association per frame: alive tracks predict forward at constant
/// velocity; every track/detection pair within `assoc_gate` of combined
/// position distance (in units of `pos_sigma`) and feature cosine
/// distance is a candidate; cheapest pairs match first. Unmatched tracks
/// coast, then die after `max_coast` consecutive misses. Unmatched
/// detections try revival according to the mode, then open new tracks.
pub fn track_sequence(
    frames: &[FrameObservation],
    mode: TrackMode,
    config: &TrackerConfig,
) -> Result<TrackReport> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d_f = frames
        .iter()
        .flat_map(|f| f.objects.iter())
        .map(|o| o.feature.len())
        .next()
        .unwrap_or(0);
    for (t, frame) in frames.iter().enumerate() {
        if !frame.timestamp.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "frame {t} has a nonfinite timestamp"
            )));
        }
        if t > 0 && frame.timestamp <= frames[t - 1].timestamp {
            return Err(Error::InvalidParameter(format!(
                "timestamps must be strictly increasing, frame {t} goes backward"
            )));
        }
        if !frame.noise_level.is_finite() || frame.noise_level < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "frame {t} has an invalid noise level"
            )));
        }
        for o in &frame.objects {
            if o.feature.len() != d_f {
                return Err(Error::DimensionMismatch(format!(
                    "frame {t} mixes feature lengths {} and {d_f}",
                    o.feature.len()
                )));
            }
            if o.feature.iter().any(|v| !v.is_finite())
                || o.position.iter().any(|v| !v.is_finite())
            {
                return Err(Error::InvalidParameter(format!(
                    "frame {t} contains nonfinite object data"
                )));
            }
        }
    }

    let mut tracks: Vec<Track> = Vec::new();
    let mut stm = StmBuffer::new();
    let mut ltm = if d_f > 0 {
        Some(LtmState::new(d_f, d_f + 4)?)
    } else {
        None
    };
    let mut next_id: u64 = 0;
    // Per frame: ground-truth id -> assigned track id.
    let mut assignments: Vec<BTreeMap<u64, u64>> = Vec::with_capacity(frames.len());

    for (t, frame) in frames.iter().enumerate() {
        let dt = if t == 0 {
            0.0
        } else {
            frame.timestamp - frames[t - 1].timestamp
        };
        let r_t = reliability(frame.noise_level)?;
        let detections: Vec<DVector<f64>> = frame
            .objects
            .iter()
            .map(|o| DVector::from_column_slice(&o.feature))
            .collect();

        // Predict alive tracks forward.
        let predicted: Vec<[f64; 2]> = tracks
            .iter()
            .map(|tr| {
                [
                    tr.position[0] + tr.velocity[0] * dt,
                    tr.position[1] + tr.velocity[1] * dt,
                ]
            })
            .collect();

        // Candidate costs, cheapest first; ties break on track id then
        // detection index so the result never depends on storage order.
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, track) in tracks.iter().enumerate() {
            if !track.alive {
                continue;
            }
            for (di, obj) in frame.objects.iter().enumerate() {
                let dx = predicted[ti][0] - obj.position[0];
                let dy = predicted[ti][1] - obj.position[1];
                let pos_d = (dx * dx + dy * dy).sqrt() / config.pos_sigma;
                let cos_d = 1.0 - cosine(&track.feature, &detections[di]);
                let cost = pos_d + cos_d;
                if cost <= config.assoc_gate {
                    candidates.push((cost, ti, di));
                }
            }
        }
        candidates.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| tracks[a.1].id.cmp(&tracks[b.1].id))
                .then_with(|| a.2.cmp(&b.2))
        });

        let mut track_taken = vec![false; tracks.len()];
        let mut det_taken = vec![false; frame.objects.len()];
        let mut matches: Vec<(usize, usize)> = Vec::new();
        for (_, ti, di) in candidates {
            if track_taken[ti] || det_taken[di] {
                continue;
            }
            track_taken[ti] = true;
            det_taken[di] = true;
            matches.push((ti, di));
        }

        let mut frame_assignments = BTreeMap::new();
        let mut stm_frame = StmFrame {
            timestamp: frame.timestamp,
            objects: Vec::new(),
        };

        for &(ti, di) in &matches {
            let obj = &frame.objects[di];
            // Surprise compares the constant-velocity extrapolation of
            // feature and position against what arrived.
            let mut pred_vec: Vec<f64> = tracks[ti].feature.iter().copied().collect();
            pred_vec.extend_from_slice(&predicted[ti]);
            let mut obs_vec = obj.feature.clone();
            obs_vec.extend_from_slice(&obj.position);
            let s_t = surprise(&pred_vec, &obs_vec)?;
            let g = gate(s_t, r_t, &config.gate_params)?;

            let track = &mut tracks[ti];
            let new_velocity = if dt > 0.0 {
                [
                    (obj.position[0] - track.position[0]) / dt,
                    (obj.position[1] - track.position[1]) / dt,
                ]
            } else {
                track.velocity
            };
            track.position = obj.position;
            track.velocity = new_velocity;
            track.feature = detections[di].clone();
            track.coast = 0;
            track.last_frame = t;
            track.observations += 1;

            if mode == TrackMode::StmLtm {
                if let (Some(ltm), Some(key)) = (ltm.as_mut(), normalized(&track.descriptor)) {
                    let mut value: Vec<f64> = obj.feature.clone();
                    value.extend_from_slice(&obj.position);
                    value.extend_from_slice(&track.velocity);
                    ltm.write(&key, &DVector::from_column_slice(&value), g)?;
                }
            }
            stm_frame.objects.push(StmObjectState {
                track_id: track.id,
                feature: detections[di].clone(),
                position: obj.position,
                velocity: track.velocity,
            });
            if let Some(hint) = obj.id_hint {
                frame_assignments.insert(hint, track.id);
            }
        }

        // Unmatched tracks coast on their prediction and eventually die.
        for (ti, track) in tracks.iter_mut().enumerate() {
            if !track.alive || track_taken[ti] {
                continue;
            }
            track.position = predicted[ti];
            track.coast += 1;
            if track.coast >= config.max_coast {
                track.alive = false;
            }
        }

        // Unmatched detections: revival first, then a fresh track.
        for (di, obj) in frame.objects.iter().enumerate() {
            if det_taken[di] {
                continue;
            }
            let feature = &detections[di];
            let mut revived: Option<usize> = None;

            if mode != TrackMode::None && !stm.is_empty() && d_f > 0 {
                let (_, weights) = stm_cross_attend(feature, &stm, config.stm_temperature)?;
                let best = weights
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i);
                if let Some(best) = best {
                    let entry = stm.entries().nth(best).expect("weight index in range");
                    if cosine(feature, &entry.feature) >= config.revival_sim {
                        if let Some(ti) = tracks.iter().position(|tr| tr.id == entry.track_id) {
                            if !tracks[ti].alive {
                                revived = Some(ti);
                            }
                        }
                    }
                }
            }

            if revived.is_none() && mode == TrackMode::StmLtm && d_f > 0 {
                if let (Some(ltm), Some(key)) = (ltm.as_ref(), normalized(feature)) {
                    if ltm.writes() > 0 {
                        let recalled = ltm.read(&key)?;
                        let recalled_feature = DVector::from_iterator(
                            d_f,
                            recalled.iter().take(d_f).copied(),
                        );
                        // A key the memory knows reads back a feature
                        // aligned with the query; an unknown key reads
                        // back noise near zero.
                        if cosine(&recalled_feature, feature) >= config.revival_sim {
                            let best_dead = tracks
                                .iter()
                                .enumerate()
                                .filter(|(_, tr)| !tr.alive)
                                .map(|(i, tr)| (cosine(&tr.descriptor, feature), i))
                                .max_by(|a, b| {
                                    a.0.total_cmp(&b.0)
                                        .then_with(|| tracks[b.1].id.cmp(&tracks[a.1].id))
                                });
                            if let Some((sim, ti)) = best_dead {
                                if sim >= config.revival_sim {
                                    revived = Some(ti);
                                }
                            }
                        }
                    }
                }
            }

            let ti = match revived {
                Some(ti) => {
                    let track = &mut tracks[ti];
                    track.alive = true;
                    track.coast = 0;
                    track.position = obj.position;
                    track.velocity = [0.0, 0.0];
                    track.feature = feature.clone();
                    track.last_frame = t;
                    track.observations += 1;
                    ti
                }
                None => {
                    let id = next_id;
                    next_id += 1;
                    tracks.push(Track {
                        id,
                        descriptor: normalized(feature)
                            .unwrap_or_else(|| DVector::zeros(feature.len())),
                        feature: feature.clone(),
                        position: obj.position,
                        velocity: [0.0, 0.0],
                        coast: 0,
                        alive: true,
                        first_frame: t,
                        last_frame: t,
                        observations: 1,
                    });
                    tracks.len() - 1
                }
            };
            stm_frame.objects.push(StmObjectState {
                track_id: tracks[ti].id,
                feature: feature.clone(),
                position: obj.position,
                velocity: tracks[ti].velocity,
            });
            if let Some(hint) = obj.id_hint {
                frame_assignments.insert(hint, tracks[ti].id);
            }
        }

        stm.push(stm_frame);
        assignments.push(frame_assignments);
    }

    // Score disappearance/reappearance events from the ground-truth
    // hints: an object seen, absent for a run of frames, then seen again
    // is one event, recovered when the track id survived the gap.
    let mut presence: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (t, frame) in frames.iter().enumerate() {
        for obj in &frame.objects {
            if let Some(hint) = obj.id_hint {
                presence.entry(hint).or_default().push(t);
            }
        }
    }
    let mut events = Vec::new();
    for (object, seen) in &presence {
        for pair in seen.windows(2) {
            let gap = pair[1] - pair[0] - 1;
            if gap == 0 {
                continue;
            }
            let before = assignments[pair[0]].get(object);
            let after = assignments[pair[1]].get(object);
            let recovered = matches!((before, after), (Some(a), Some(b)) if a == b);
            events.push(OcclusionEvent {
                object: *object,
                gap_frames: gap,
                recovered,
            });
        }
    }
    let counted: Vec<&OcclusionEvent> = events
        .iter()
        .filter(|e| e.gap_frames > config.occ_threshold_frames)
        .collect();
    let occ_track = if counted.is_empty() {
        None
    } else {
        Some(counted.iter().filter(|e| e.recovered).count() as f64 / counted.len() as f64)
    };

    let track_summaries = tracks
        .iter()
        .map(|tr| TrackSummary {
            track_id: tr.id,
            first_frame: tr.first_frame,
            last_frame: tr.last_frame,
            observations: tr.observations,
        })
        .collect();

    Ok(TrackReport {
        mode,
        occ_track,
        events,
        tracks: track_summaries,
    })
}
