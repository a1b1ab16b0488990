//! Benchmark experiments: scaling of message passing against a dense
//! attention reference, measured scene complexity by type, occlusion
//! recovery by memory mode, and routing-policy fidelity at matched
//! compute. Every experiment returns a [`BenchResult`] carrying CSV
//! rows, named summary statistics, and any violated guarantees.
//!
//! Timing methodology: single thread, monotonic clock, three warmup
//! runs discarded, median of the measured trials reported. Non-timing
//! columns are pure functions of the seeds, so a re-run with the same
//! seeds reproduces them bit for bit.

use std::fmt::Write as _;
use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hope_core::error::{Error, Result};
use hope_core::ghn::{
    run_ghn, scene_at_dimension, AgentState, AttentionBaseline, GhnParams, HypergraphScene,
};
use hope_core::grassmann::{grassmann_distance, qr_retract, random_subspace};
use hope_core::lid::{estimate_lid, LidConfig};
use hope_core::memory::{
    track_sequence, FrameObservation, ObservedObject, TrackMode, TrackerConfig,
};
use hope_core::router::{threshold_route, RouterParams, PathSpec, NUM_PATHS, PATHS};
use hope_core::scenegen::{gen_scene, ScenarioConfig, SceneType};

/// Width of the dense attention reference. One attend pass at this
/// width costs about as many floating point operations as six dense
/// transformer layers of model width 256 at sequence length 384,
/// projections and feedforward blocks included, which is the reference
/// stack the comparison is calibrated against.
pub const ATTENTION_WIDTH: usize = 8192;

/// Fraction of low-complexity frames in the mixed stream experiments.
pub const SHALLOW_FRACTION: f64 = 0.61;

/// One finished experiment: rows ready for CSV, named statistics, and
/// the list of violated guarantees (empty on a clean run).
#[derive(Debug, Clone)]
pub struct BenchResult {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub stats: Vec<(String, f64)>,
    pub violations: Vec<String>,
}

impl BenchResult {
    fn new(experiment: &str, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            stats: Vec::new(),
            violations: Vec::new(),
        }
    }

    fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn stat(&self, name: &str) -> Option<f64> {
        self.stats
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    /// Renders the CSV: a header line, then one line per row. Values
    /// never contain commas, so no quoting is needed.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// One line per statistic, for printing after the CSV is written.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.stats {
            let _ = writeln!(out, "{}: {name} = {value}", self.experiment);
        }
        out
    }
}

fn time_ns<F: FnMut()>(mut f: F) -> u64 {
    let start = Instant::now();
    f();
    start.elapsed().as_nanos() as u64
}

fn median_u64(samples: &[u64]) -> u64 {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    sorted[sorted.len() / 2]
}

/// Through-the-points least squares slope of ln(y) on ln(x).
fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(ly.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Bootstrap 95% interval for the fitted slope: trials are resampled
/// with replacement within each size, medians recomputed, slope refit.
fn bootstrap_slope_ci(
    sizes: &[f64],
    trials_by_size: &[Vec<u64>],
    seed: u64,
) -> (f64, f64) {
    const B: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes = Vec::with_capacity(B);
    for _ in 0..B {
        let medians: Vec<f64> = trials_by_size
            .iter()
            .map(|trials| {
                let resampled: Vec<u64> = (0..trials.len())
                    .map(|_| trials[rng.gen_range(0..trials.len())])
                    .collect();
                median_u64(&resampled) as f64
            })
            .collect();
        slopes.push(log_log_slope(sizes, &medians));
    }
    slopes.sort_by(f64::total_cmp);
    (slopes[(B as f64 * 0.025) as usize], slopes[(B as f64 * 0.975) as usize])
}

/// A density-capped benchmark scene: `l` agents on a 2 m grid (at most
/// nine agents in any 3 m disc, under the cap of fifteen) whose
/// subspaces are small perturbations of one base, so the subspace gate
/// admits spatial neighbors and the hyperedges are genuinely populated.
fn grid_scene(l: usize, k: usize, seed: u64) -> Result<HypergraphScene> {
    let side = (l as f64).sqrt().ceil() as usize;
    let base = random_subspace(40, k, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED);
    let agents: Vec<AgentState> = (0..l)
        .map(|i| {
            let mut m = base.basis().clone();
            for v in m.iter_mut() {
                *v += 0.05 * rng.gen_range(-1.0..1.0);
            }
            AgentState::new(
                i as u64,
                [(i % side) as f64 * 2.0, (i / side) as f64 * 2.0],
                [0.0, 0.0],
                qr_retract(&m)?,
            )
        })
        .collect::<Result<_>>()?;
    HypergraphScene::new(agents, GhnParams::for_dim(k, seed)?)
}

/// Draws one complexity signal from the mixed stream: 61% calm
/// (below tau1), 24% moderate, 15% chaotic (above tau2).
fn stream_dhat(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    if u < SHALLOW_FRACTION {
        rng.gen_range(2.5..4.5)
    } else if u < SHALLOW_FRACTION + 0.24 {
        rng.gen_range(6.0..10.0)
    } else {
        rng.gen_range(12.5..15.5)
    }
}

/// Latency scaling of dense attention, deep message passing, and the
/// adaptively routed mixed stream, over the agent counts in `l_list`.
pub fn bench_scaling(l_list: &[usize], trials: usize, base_seed: u64) -> Result<BenchResult> {
    if l_list.len() < 4 {
        return Err(Error::InvalidParameter(
            "need at least four agent counts to fit an exponent".into(),
        ));
    }
    if l_list.windows(2).any(|w| w[0] >= w[1]) || l_list[0] < 2 {
        return Err(Error::InvalidParameter(
            "agent counts must be ascending and at least 2".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }

    let mut result = BenchResult::new(
        "scaling",
        &["impl", "l", "trial", "seed", "latency_ns"],
    );
    let router = RouterParams::default();
    const STREAM_FRAMES: usize = 24;

    let mut attention_medians = Vec::new();
    let mut ghn_medians = Vec::new();
    let mut attention_trials = Vec::new();
    let mut ghn_trials = Vec::new();
    let mut adaptive_mean_at_max = 0.0;
    let mut deep_median_at_max = 0.0;
    let ratio_at = |l: usize| -> Option<usize> { l_list.iter().position(|&x| x == l) };

    for (li, &l) in l_list.iter().enumerate() {
        let seed = base_seed.wrapping_add((l as u64).wrapping_mul(0x9E37_79B9));
        let scene = grid_scene(l, 8, seed)?;
        // Every path width the router can pick, prepared outside the
        // timed region; the deep one doubles as the static reference.
        let widths: Vec<HypergraphScene> = PATHS
            .iter()
            .map(|p| scene_at_dimension(&scene, p.subspace_dim))
            .collect::<Result<_>>()?;
        let attention = AttentionBaseline::prepare(&scene, ATTENTION_WIDTH, seed)?;

        let mut lat_attention = Vec::with_capacity(trials);
        let mut lat_ghn = Vec::with_capacity(trials);
        let mut lat_adaptive = Vec::with_capacity(trials);
        for _ in 0..3 {
            black_box(attention.attend());
            black_box(run_ghn(&widths[2], PATHS[2])?);
        }
        for trial in 0..trials {
            let ns = time_ns(|| {
                black_box(attention.attend());
            });
            lat_attention.push(ns);
            result.push_row(vec![
                "attention".into(),
                l.to_string(),
                trial.to_string(),
                seed.to_string(),
                ns.to_string(),
            ]);

            let ns = time_ns(|| {
                black_box(run_ghn(&widths[2], PATHS[2]).expect("deep pass"));
            });
            lat_ghn.push(ns);
            result.push_row(vec![
                "ghn_deep".into(),
                l.to_string(),
                trial.to_string(),
                seed.to_string(),
                ns.to_string(),
            ]);

            // One adaptive pass over a seeded mixed stream; the row
            // records the mean per-frame latency.
            let mut stream_rng =
                ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0xD1B5));
            let signals: Vec<f64> = (0..STREAM_FRAMES).map(|_| stream_dhat(&mut stream_rng)).collect();
            let mut total = 0u64;
            for &dhat in &signals {
                let decision = threshold_route(dhat, &router)?;
                let staged = &widths[decision.selected];
                total += time_ns(|| {
                    black_box(run_ghn(staged, PATHS[decision.selected]).expect("routed pass"));
                });
            }
            let ns = total / STREAM_FRAMES as u64;
            lat_adaptive.push(ns);
            result.push_row(vec![
                "adaptive".into(),
                l.to_string(),
                trial.to_string(),
                seed.to_string(),
                ns.to_string(),
            ]);
        }

        attention_medians.push(median_u64(&lat_attention) as f64);
        ghn_medians.push(median_u64(&lat_ghn) as f64);
        attention_trials.push(lat_attention);
        ghn_trials.push(lat_ghn);
        if li == l_list.len() - 1 {
            adaptive_mean_at_max =
                lat_adaptive.iter().sum::<u64>() as f64 / lat_adaptive.len() as f64;
            deep_median_at_max = *ghn_medians.last().unwrap();
        }
    }

    let sizes: Vec<f64> = l_list.iter().map(|&l| l as f64).collect();
    let slope_attention = log_log_slope(&sizes, &attention_medians);
    let slope_ghn = log_log_slope(&sizes, &ghn_medians);
    let (att_lo, att_hi) = bootstrap_slope_ci(&sizes, &attention_trials, base_seed ^ 0xB00);
    let (ghn_lo, ghn_hi) = bootstrap_slope_ci(&sizes, &ghn_trials, base_seed ^ 0xB01);

    result.stats.push(("slope_attention".into(), slope_attention));
    result.stats.push(("slope_attention_ci_lo".into(), att_lo));
    result.stats.push(("slope_attention_ci_hi".into(), att_hi));
    result.stats.push(("slope_ghn".into(), slope_ghn));
    result.stats.push(("slope_ghn_ci_lo".into(), ghn_lo));
    result.stats.push(("slope_ghn_ci_hi".into(), ghn_hi));

    if let Some(i) = ratio_at(384) {
        let ratio = attention_medians[i] / ghn_medians[i];
        result.stats.push(("ratio_at_384".into(), ratio));
        if ratio < 3.0 {
            result
                .violations
                .push(format!("attention/ghn ratio at 384 agents is {ratio:.2}, floor is 3.0"));
        }
    }
    let ratio_max = attention_medians.last().unwrap() / ghn_medians.last().unwrap();
    result.stats.push(("ratio_at_max_l".into(), ratio_max));
    result
        .stats
        .push(("adaptive_mean_ns_at_max_l".into(), adaptive_mean_at_max));
    result
        .stats
        .push(("deep_median_ns_at_max_l".into(), deep_median_at_max));
    let savings = 100.0 * (1.0 - adaptive_mean_at_max / deep_median_at_max);
    result.stats.push(("adaptive_savings_pct_at_max_l".into(), savings));
    result.stats.push(("shallow_fraction".into(), SHALLOW_FRACTION));

    if !(1.8..=2.2).contains(&slope_attention) {
        result.violations.push(format!(
            "attention latency exponent {slope_attention:.3} outside [1.8, 2.2]"
        ));
    }
    if !(0.8..=1.3).contains(&slope_ghn) {
        result.violations.push(format!(
            "message passing latency exponent {slope_ghn:.3} outside [0.8, 1.3]"
        ));
    }
    if adaptive_mean_at_max >= deep_median_at_max {
        result.violations.push(format!(
            "adaptive stream mean {adaptive_mean_at_max:.0} ns is not below the static deep {deep_median_at_max:.0} ns"
        ));
    }
    Ok(result)
}

/// Measured complexity per scene type over seeded scenarios, with the
/// ordering and band checks.
pub fn bench_lid_by_scene(seeds: usize, base_seed: u64) -> Result<BenchResult> {
    if seeds < 20 {
        return Err(Error::InvalidParameter(
            "scene complexity statistics need at least 20 seeds per type".into(),
        ));
    }
    let mut result = BenchResult::new(
        "lid_by_scene",
        &["scene_type", "seed", "n_points", "n_used", "d_hat"],
    );
    let mut means = Vec::new();
    for scene_type in SceneType::ALL {
        let mut values = Vec::with_capacity(seeds);
        for i in 0..seeds {
            let seed = base_seed.wrapping_add(i as u64);
            let mut config = ScenarioConfig::for_type(scene_type, seed);
            config.frames = 1;
            let scenario = gen_scene(&config)?;
            let estimate = estimate_lid(&scenario.frames[0].cloud, &LidConfig::default())?;
            values.push(estimate.d_hat);
            result.push_row(vec![
                scene_type.to_string(),
                seed.to_string(),
                scenario.frames[0].cloud.len().to_string(),
                estimate.n_used.to_string(),
                estimate.d_hat.to_string(),
            ]);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / values.len() as f64)
            .sqrt();
        result.stats.push((format!("mean_{scene_type}"), mean));
        result.stats.push((format!("sd_{scene_type}"), sd));
        means.push((scene_type, mean));
    }

    for pair in means[..4].windows(2) {
        if pair[0].1 >= pair[1].1 {
            result.violations.push(format!(
                "mean complexity must increase {} -> {}, got {:.3} >= {:.3}",
                pair[0].0, pair[1].0, pair[0].1, pair[1].1
            ));
        }
    }
    let intersection = means[3].1;
    for &(t, m) in &means[4..] {
        if m < intersection {
            result.violations.push(format!(
                "mean complexity of {t} ({m:.3}) fell below intersection ({intersection:.3})"
            ));
        }
        if m <= 12.0 {
            result
                .violations
                .push(format!("mean complexity of {t} ({m:.3}) must exceed 12"));
        }
    }
    if means[0].1 >= 5.0 {
        result.violations.push(format!(
            "mean highway complexity ({:.3}) must stay below 5",
            means[0].1
        ));
    }
    Ok(result)
}

/// Two well-separated objects on straight tracks; the second one is
/// blanked for `gap` frames starting at frame 20. Deterministic, noise
/// free, and long enough that the occlusion registers as an event.
fn scripted_occlusion_frames(gap: usize) -> Vec<FrameObservation> {
    let frames = gap + 80;
    let window = 20..20 + gap;
    (0..frames)
        .map(|t| {
            let mut objects = vec![ObservedObject {
                id_hint: Some(0),
                feature: vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                position: [t as f64, 0.0],
            }];
            if !window.contains(&t) {
                objects.push(ObservedObject {
                    id_hint: Some(1),
                    feature: vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                    position: [t as f64, 50.0],
                });
            }
            FrameObservation {
                timestamp: t as f64 * 0.1,
                objects,
                noise_level: 0.0,
            }
        })
        .collect()
}

/// Randomized variant: four objects on constant-velocity tracks from
/// well-separated starts, unit-norm random features, object 1 blanked
/// for `gap` frames starting at frame 20.
fn randomized_occlusion_frames(gap: usize, seed: u64) -> Vec<FrameObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = gap + 80;
    let window = 20..20 + gap;
    let starts = [[-80.0, -80.0], [80.0, -80.0], [-80.0, 80.0], [80.0, 80.0]];
    let objects: Vec<([f64; 2], [f64; 2], Vec<f64>)> = starts
        .iter()
        .map(|&start| {
            let jittered = [
                start[0] + rng.gen_range(-5.0..5.0),
                start[1] + rng.gen_range(-5.0..5.0),
            ];
            let velocity = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let mut feature: Vec<f64> = (0..48).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = feature.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in feature.iter_mut() {
                *x /= norm;
            }
            (jittered, velocity, feature)
        })
        .collect();
    (0..frames)
        .map(|t| {
            let objects = objects
                .iter()
                .enumerate()
                .filter(|(i, _)| !(*i == 1 && window.contains(&t)))
                .map(|(i, (start, velocity, feature))| ObservedObject {
                    id_hint: Some(i as u64),
                    feature: feature.clone(),
                    position: [
                        start[0] + velocity[0] * 0.1 * t as f64,
                        start[1] + velocity[1] * 0.1 * t as f64,
                    ],
                })
                .collect();
            FrameObservation {
                timestamp: t as f64 * 0.1,
                objects,
                noise_level: 0.0,
            }
        })
        .collect()
}

fn occ_track(frames: &[FrameObservation], mode: TrackMode) -> Result<f64> {
    let report = track_sequence(frames, mode, &TrackerConfig::default())?;
    report.occ_track.ok_or_else(|| {
        Error::InvalidParameter("occlusion scenario produced no occlusion event".into())
    })
}

/// Occlusion recovery rate per gap length and memory mode, on the
/// deterministic scripted pair plus seeded randomized scenes.
pub fn bench_occlusion(
    gaps: &[usize],
    modes: &[TrackMode],
    seeds: usize,
    base_seed: u64,
) -> Result<BenchResult> {
    if gaps.is_empty() || modes.is_empty() || seeds == 0 {
        return Err(Error::InvalidParameter(
            "need at least one gap, one mode, and one seed".into(),
        ));
    }
    if gaps.iter().any(|&g| g <= 10) {
        return Err(Error::InvalidParameter(
            "gaps at or below the event threshold of 10 frames never register".into(),
        ));
    }
    let mut result = BenchResult::new(
        "occlusion",
        &["suite", "gap", "mode", "seed", "occ_track"],
    );

    let record = |result: &mut BenchResult,
                      suite: &str,
                      gap: usize,
                      mode: TrackMode,
                      seed: u64,
                      value: f64| {
        result.push_row(vec![
            suite.into(),
            gap.to_string(),
            mode.to_string(),
            seed.to_string(),
            value.to_string(),
        ]);
    };

    for &gap in gaps {
        let scripted = scripted_occlusion_frames(gap);
        let mut by_mode = Vec::new();
        for &mode in modes {
            let value = occ_track(&scripted, mode)?;
            record(&mut result, "scripted", gap, mode, 0, value);
            result
                .stats
                .push((format!("scripted_gap{gap}_{mode}"), value));
            by_mode.push((mode, value));
        }
        for (mode, value) in &by_mode {
            // Gaps within a coast length of the 50-frame buffer edge can
            // legitimately land on either side, so only the clear cases
            // pin an exact value for the buffer-only mode.
            let expected = match mode {
                TrackMode::None => Some(0.0),
                TrackMode::Stm if gap <= 45 => Some(1.0),
                TrackMode::Stm if gap >= 55 => Some(0.0),
                TrackMode::Stm => None,
                TrackMode::StmLtm => Some(1.0),
            };
            if let Some(expected) = expected {
                if *value != expected {
                    result.violations.push(format!(
                        "scripted gap {gap}, mode {mode}: occ-track {value}, expected {expected}"
                    ));
                }
            }
        }

        for i in 0..seeds {
            let seed = base_seed.wrapping_add(i as u64);
            let frames = randomized_occlusion_frames(gap, seed);
            let mut per_mode = Vec::new();
            for &mode in modes {
                let value = occ_track(&frames, mode)?;
                record(&mut result, "randomized", gap, mode, seed, value);
                per_mode.push((mode, value));
            }
            // Memory only ever helps: none <= stm <= stm+ltm.
            let rank = |m: TrackMode| match m {
                TrackMode::None => 0,
                TrackMode::Stm => 1,
                TrackMode::StmLtm => 2,
            };
            let mut sorted = per_mode.clone();
            sorted.sort_by_key(|(m, _)| rank(*m));
            for pair in sorted.windows(2) {
                if pair[0].1 > pair[1].1 {
                    result.violations.push(format!(
                        "gap {gap}, seed {seed}: mode {} recovered {} but {} recovered {}",
                        pair[0].0, pair[0].1, pair[1].0, pair[1].1
                    ));
                }
            }
        }
    }
    Ok(result)
}

/// Projector geometry of a processed scene: the upper triangle of the
/// pairwise subspace-distance matrix (distances come from the principal
/// angles between the agents' projectors) after staging the scene at
/// the path's width and running the path. Distances within one run
/// share the run's width, so geometries from different widths are
/// directly comparable; raw projector norms across widths are not,
/// because the constant rank gap between an 8 and a 32 dimensional
/// projector dominates any alignment signal.
fn path_structure(scene: &HypergraphScene, path: PathSpec) -> Result<Vec<f64>> {
    let staged = scene_at_dimension(scene, path.subspace_dim)?;
    let out = run_ghn(&staged, path)?;
    let l = out.agents.len();
    let mut pairs = Vec::with_capacity(l * (l - 1) / 2);
    for i in 0..l {
        for j in i + 1..l {
            pairs.push(grassmann_distance(
                &out.agents[i].subspace,
                &out.agents[j].subspace,
            )?);
        }
    }
    Ok(pairs)
}

/// Root-mean-square difference between two projector geometries.
fn structure_deviation(a: &[f64], b: &[f64]) -> f64 {
    let total: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    (total / a.len() as f64).sqrt()
}

/// A routing-ablation frame: the complexity signal plus a scene whose
/// subspace heterogeneity grows with that signal, so skimping on deep
/// processing costs fidelity exactly where the signal says it will. The
/// largest spread keeps every pair inside the message gate; past the
/// gate no path would exchange messages and depth would stop mattering.
fn ablation_scene(l: usize, dhat: f64, seed: u64) -> Result<HypergraphScene> {
    let spread = 0.002 + 0.028 * ((dhat - 2.0) / 14.0).clamp(0.0, 1.0);
    let side = (l as f64).sqrt().ceil() as usize;
    let base = random_subspace(40, 8, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xAB1A);
    let agents: Vec<AgentState> = (0..l)
        .map(|i| {
            let mut m = base.basis().clone();
            for v in m.iter_mut() {
                *v += spread * rng.gen_range(-1.0..1.0);
            }
            AgentState::new(
                i as u64,
                [(i % side) as f64 * 1.5, (i / side) as f64 * 1.5],
                [0.0, 0.0],
                qr_retract(&m)?,
            )
        })
        .collect::<Result<_>>()?;
    HypergraphScene::new(agents, GhnParams::for_dim(8, seed)?)
}

/// Compute proxy for one routed frame: rounds times squared width times
/// agent count, the leading term of the per-frame operation count.
fn path_ops(path: PathSpec, l: usize) -> u64 {
    (path.rounds * path.subspace_dim * path.subspace_dim * l) as u64
}

/// Fidelity of complexity-driven routing against uniform-random routing
/// at exactly matched compute, with the always-deep and always-shallow
/// endpoints bounding the trade-off curve.
pub fn bench_routing_ablation(seeds: usize, base_seed: u64) -> Result<BenchResult> {
    if seeds == 0 {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    const STREAM_FRAMES: usize = 30;
    const AGENTS: usize = 24;
    let router = RouterParams::default();
    let mut result = BenchResult::new(
        "routing",
        &["seed", "policy", "mean_deviation", "total_ops"],
    );

    let mut lid_means = Vec::new();
    let mut random_means = Vec::new();
    let mut shallow_means = Vec::new();
    let mut lid_wins = 0usize;
    for i in 0..seeds {
        let seed = base_seed.wrapping_add((i as u64).wrapping_mul(0x51_7CC1));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signals: Vec<f64> = (0..STREAM_FRAMES).map(|_| stream_dhat(&mut rng)).collect();
        let lid_paths: Vec<usize> = signals
            .iter()
            .map(|&dhat| threshold_route(dhat, &router).map(|d| d.selected))
            .collect::<Result<_>>()?;
        // The random policy replays the same multiset of paths in a
        // shuffled order: identical total compute, no complexity signal.
        let mut random_paths = lid_paths.clone();
        random_paths.shuffle(&mut rng);

        let mut dev = [0.0f64; 4]; // lid, random, shallow, deep
        let mut ops = [0u64; 4];
        for (f, &dhat) in signals.iter().enumerate() {
            let scene = ablation_scene(AGENTS, dhat, seed ^ (f as u64).wrapping_mul(0xF00D))?;
            let deep = path_structure(&scene, PATHS[NUM_PATHS - 1])?;
            let mut cached: [Option<Vec<f64>>; NUM_PATHS] = [None, None, None];
            cached[NUM_PATHS - 1] = Some(deep.clone());
            for (slot, &p) in [
                lid_paths[f],
                random_paths[f],
                0,
                NUM_PATHS - 1,
            ]
            .iter()
            .enumerate()
            {
                if cached[p].is_none() {
                    cached[p] = Some(path_structure(&scene, PATHS[p])?);
                }
                dev[slot] += structure_deviation(cached[p].as_ref().unwrap(), &deep);
                ops[slot] += path_ops(PATHS[p], AGENTS);
            }
        }
        for d in dev.iter_mut() {
            *d /= STREAM_FRAMES as f64;
        }
        for (slot, policy) in ["lid", "random", "always_shallow", "always_deep"]
            .iter()
            .enumerate()
        {
            result.push_row(vec![
                seed.to_string(),
                (*policy).into(),
                dev[slot].to_string(),
                ops[slot].to_string(),
            ]);
        }
        if ops[0] != ops[1] {
            result.violations.push(format!(
                "seed {seed}: compute mismatch between policies ({} vs {})",
                ops[0], ops[1]
            ));
        }
        if dev[0] < dev[1] {
            lid_wins += 1;
        }
        lid_means.push(dev[0]);
        random_means.push(dev[1]);
        shallow_means.push(dev[2]);
        if dev[3] != 0.0 {
            result.violations.push(format!(
                "seed {seed}: always-deep deviated from itself by {}",
                dev[3]
            ));
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mean_lid = mean(&lid_means);
    let mean_random = mean(&random_means);
    let mean_shallow = mean(&shallow_means);
    result.stats.push(("mean_deviation_lid".into(), mean_lid));
    result.stats.push(("mean_deviation_random".into(), mean_random));
    result
        .stats
        .push(("mean_deviation_always_shallow".into(), mean_shallow));
    result.stats.push(("mean_deviation_always_deep".into(), 0.0));
    result
        .stats
        .push(("lid_wins".into(), lid_wins as f64));
    result.stats.push(("seeds".into(), seeds as f64));

    if mean_lid >= mean_random {
        result.violations.push(format!(
            "complexity-driven routing ({mean_lid:.6}) must beat random routing ({mean_random:.6}) at matched compute"
        ));
    }
    if mean_shallow < mean_random {
        result.violations.push(format!(
            "always-shallow ({mean_shallow:.6}) should bound random routing ({mean_random:.6}) from above"
        ));
    }
    Ok(result)
}
