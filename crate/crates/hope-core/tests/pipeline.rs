//! End-to-end flows across modules: generated scenarios feed the
//! dimension estimator, the router, the message-passing network, and
//! the tracker without any glue beyond the public APIs.

use hope_core::lid::{estimate_lid, LidConfig};
use hope_core::memory::{track_sequence, TrackMode, TrackerConfig};
use hope_core::router::{threshold_route, RouterParams, PATHS};
use hope_core::scenegen::{
    apply_occlusions, gen_scene, OcclusionScript, ScenarioConfig, SceneType,
};

fn mean_dhat(scene_type: SceneType, seeds: std::ops::Range<u64>) -> f64 {
    let n = (seeds.end - seeds.start) as f64;
    seeds
        .map(|seed| {
            let mut config = ScenarioConfig::for_type(scene_type, seed);
            config.frames = 1;
            let scenario = gen_scene(&config).unwrap();
            estimate_lid(&scenario.frames[0].cloud, &LidConfig::default())
                .unwrap()
                .d_hat
        })
        .sum::<f64>()
        / n
}

#[test]
fn generated_scene_supports_message_passing() {
    let mut config = ScenarioConfig::for_type(SceneType::Suburban, 5);
    config.frames = 1;
    let scenario = gen_scene(&config).unwrap();
    let out = hope_core::ghn::run_ghn(&scenario.seed_scene, PATHS[0]).unwrap();
    assert_eq!(out.agents.len(), config.num_agents);
    for agent in &out.agents {
        let u = agent.subspace.basis();
        let gram = u.transpose() * u;
        let defect = (gram - nalgebra::DMatrix::identity(u.ncols(), u.ncols())).norm();
        assert!(defect <= 1e-6, "agent {} defect {defect}", agent.id);
    }
    let again = hope_core::ghn::run_ghn(&scenario.seed_scene, PATHS[0]).unwrap();
    assert_eq!(out, again, "message passing on a fixed scene is deterministic");
}

#[test]
fn calm_scenes_route_shallow_and_chaotic_scenes_route_deep() {
    let params = RouterParams::default();
    let calm = mean_dhat(SceneType::Highway, 0..3);
    let chaotic = mean_dhat(SceneType::Construction, 0..3);
    let shallow = threshold_route(calm, &params).unwrap();
    let deep = threshold_route(chaotic, &params).unwrap();
    assert_eq!(
        (shallow.rounds, shallow.subspace_dim),
        (2, 8),
        "calm traffic (d-hat {calm:.2}) must take the shallow path"
    );
    assert_eq!(
        (deep.rounds, deep.subspace_dim),
        (6, 32),
        "chaotic traffic (d-hat {chaotic:.2}) must take the deep path"
    );
}

#[test]
fn scene_complexity_orders_by_type() {
    let means: Vec<f64> = [
        SceneType::Highway,
        SceneType::Suburban,
        SceneType::Urban,
        SceneType::Intersection,
    ]
    .iter()
    .map(|&t| mean_dhat(t, 0..6))
    .collect();
    for pair in means.windows(2) {
        assert!(
            pair[0] < pair[1],
            "complexity must increase with scene type, got {means:?}"
        );
    }
}

fn occ_track_for(gap: usize, mode: TrackMode) -> f64 {
    let mut config = ScenarioConfig::for_type(SceneType::Highway, 0);
    config.frames = 120;
    config.occlusions = vec![OcclusionScript {
        object_id: 3,
        start_frame: 15,
        duration_frames: gap,
    }];
    let scenario = apply_occlusions(&gen_scene(&config).unwrap()).unwrap();
    let frames: Vec<_> = scenario
        .frames
        .iter()
        .map(|f| f.observation.clone())
        .collect();
    let report = track_sequence(&frames, mode, &TrackerConfig::default()).unwrap();
    report
        .occ_track
        .expect("a gap this long must register as an occlusion event")
}

#[test]
fn short_occlusion_recovery_needs_short_term_memory() {
    assert_eq!(occ_track_for(40, TrackMode::None), 0.0);
    assert_eq!(occ_track_for(40, TrackMode::Stm), 1.0);
    assert_eq!(occ_track_for(40, TrackMode::StmLtm), 1.0);
}

#[test]
fn long_occlusion_recovery_needs_long_term_memory() {
    assert_eq!(occ_track_for(80, TrackMode::Stm), 0.0);
    assert_eq!(occ_track_for(80, TrackMode::StmLtm), 1.0);
}
