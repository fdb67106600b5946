mod common;

use std::sync::Arc;

use image::RgbImage;
use panonav_core::engine::{
    neighbors_vector, AgentPose, DirPanos, ObsValue, PanoCache, PanoSource, LATLNG_BINS_PER_AXIS, YAW_BINS,
};
use panonav_core::games::COIN_GAME;
use panonav_core::panograph::{initial_bearing_deg, GraphError, LatLng, StreetGraph, TangentPlane};
use panonav_core::projector::{project, ViewSpec};
use panonav_core::synthcity::{render_node, write_city};
use panonav_core::{Action, ActionTuple, EnvConfig, EnvError, Environment, ObservationKind, StepResult};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{city, city_params, record, synthetic};

struct Flat;

impl PanoSource for Flat {
    fn load(&self, _id: &str) -> Result<RgbImage, GraphError> {
        Ok(RgbImage::new(16, 8))
    }
}

fn config(game: &str, observations: Vec<ObservationKind>) -> EnvConfig {
    EnvConfig {
        game: game.into(),
        observations,
        auto_reset: false,
        ..EnvConfig::default()
    }
}

fn city_env(seed: u64, config: EnvConfig) -> Environment {
    let params = city_params(seed, 3, 0.3, 64);
    let g = city(&params);
    let src = synthetic(&g, &params);
    Environment::new(g, src, config).unwrap()
}

/// Hub "h" with spokes 10 m out at the given bearings, named "s0", "s1", ...
fn star(bearings: &[f64]) -> Arc<StreetGraph> {
    let plane = TangentPlane::new(LatLng::new(40.0, -74.0));
    let spokes: Vec<String> = (0..bearings.len()).map(|i| format!("s{i}")).collect();
    let mut recs = vec![record("h", 40.0, -74.0, &spokes)];
    for (id, b) in spokes.iter().zip(bearings) {
        let p = plane.to_latlng(10.0 * b.to_radians().sin(), 10.0 * b.to_radians().cos());
        recs.push(record(id, p.lat, p.lng, &[]));
    }
    Arc::new(StreetGraph::from_records(recs).unwrap())
}

fn wrap(a: f64) -> f64 {
    (a + 180.0).rem_euclid(360.0) - 180.0
}

/// Expected pose after one action, computed from first principles.
fn expected_pose(graph: &StreetGraph, pose: AgentPose, a: &ActionTuple) -> AgentPose {
    let yaw = (pose.yaw + a.rotate_yaw).rem_euclid(360.0);
    let pitch = (pose.pitch + a.rotate_pitch).clamp(-90.0, 90.0);
    let mut node = pose.node;
    if a.move_forward {
        let here = graph.node(pose.node);
        let mut candidates: Vec<(f64, &str)> = here
            .neighbors
            .iter()
            .chain(graph.nodes().iter().filter(|n| n.neighbors.contains(&here.id)).map(|n| &n.id))
            .map(|id| {
                let b = initial_bearing_deg(here.position(), graph.node(graph.idx(id).unwrap()).position()).unwrap();
                (wrap(b - yaw).abs(), id.as_str())
            })
            .filter(|(off, _)| *off <= 30.0)
            .collect();
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(y.1)));
        if let Some((_, id)) = candidates.first() {
            node = graph.idx(id).unwrap();
        }
    }
    AgentPose {
        node,
        yaw,
        pitch,
        fov: (pose.fov + a.zoom).clamp(30.0, 120.0),
    }
}

fn random_action(rng: &mut impl Rng) -> ActionTuple {
    ActionTuple {
        rotate_yaw: if rng.gen_bool(0.5) { rng.gen_range(-400.0..400.0) } else { 22.5 * rng.gen_range(-4..=4) as f64 },
        rotate_pitch: if rng.gen_bool(0.2) { rng.gen_range(-60.0..60.0) } else { 0.0 },
        move_forward: rng.gen_bool(0.6),
        zoom: if rng.gen_bool(0.2) { rng.gen_range(-50.0..50.0) } else { 0.0 },
    }
}

#[test]
fn action_fuzz_matches_reference_semantics() {
    let cfg = EnvConfig {
        episode_length: 200_000,
        ..config(
            COIN_GAME,
            vec![ObservationKind::YawLabel, ObservationKind::LatlngLabel, ObservationKind::Neighbors],
        )
    };
    let mut env = city_env(2, cfg);
    let graph = Arc::clone(env.graph());
    env.reset().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut moves = 0;
    for _ in 0..100_000 {
        let before = env.pose().unwrap();
        let a = random_action(&mut rng);
        let res = env.step(a).unwrap();
        let after = env.pose().unwrap();
        let want = expected_pose(&graph, before, &a);
        assert_eq!(after.node, want.node);
        assert!((after.yaw - want.yaw).abs() < 1e-9 || (after.yaw - want.yaw).abs() > 360.0 - 1e-9);
        assert_eq!((after.pitch, after.fov), (want.pitch, want.fov));
        // no teleports
        assert!(after.node == before.node || graph.neighbors(before.node).contains(&after.node));
        moves += usize::from(after.node != before.node);
        assert!(res.observation.label(ObservationKind::YawLabel).unwrap() < YAW_BINS);
        assert!(res.observation.label(ObservationKind::LatlngLabel).unwrap() < LATLNG_BINS_PER_AXIS.pow(2));
        assert!(!res.done);
    }
    assert!(moves > 10_000, "{moves}");
}

#[test]
fn noop_keeps_everything() {
    let mut env = city_env(1, config(COIN_GAME, vec![ObservationKind::ViewImage, ObservationKind::Yaw]));
    let first = env.reset().unwrap();
    let pose = env.pose().unwrap();
    for _ in 0..5 {
        let r = env.step(ActionTuple::NOOP).unwrap();
        assert_eq!(r.observation, first);
        assert_eq!(env.pose().unwrap(), pose);
        assert_eq!(r.info["moved"], false);
    }
}

#[test]
fn sixteen_turns_return_to_the_start_view() {
    let mut env = city_env(1, config(COIN_GAME, vec![ObservationKind::ViewImage, ObservationKind::YawLabel]));
    let first = env.reset().unwrap();
    let label0 = first.label(ObservationKind::YawLabel).unwrap();
    let mut last = first.clone();
    for k in 1..=16 {
        let r = env.step(ActionTuple::turn(22.5)).unwrap();
        assert_ne!(r.observation.view_image(), last.view_image());
        let label = r.observation.label(ObservationKind::YawLabel).unwrap();
        // snapped starts advance one bin per turn
        if (env.pose().unwrap().yaw / 22.5).fract() == 0.0 {
            assert_eq!(label, (label0 + k) % 16);
        }
        last = r.observation;
    }
    assert_eq!(last.view_image(), first.view_image());
}

#[test]
fn view_is_the_projected_panorama() {
    let params = city_params(3, 2, 0.3, 64);
    let g = city(&params);
    let mut env = Environment::new(
        Arc::clone(&g),
        synthetic(&g, &params),
        config(COIN_GAME, vec![ObservationKind::ViewImage]),
    )
    .unwrap();
    env.reset().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let r = env.step(random_action(&mut rng)).unwrap();
        let p = env.pose().unwrap();
        let want = project(&render_node(&g, p.node, &params), &ViewSpec::new(p.yaw, p.pitch, p.fov, 84).unwrap()).unwrap();
        assert_eq!(r.observation.view_image().unwrap(), &want);
    }
}

#[test]
fn episode_ends_at_step_limit() {
    let mut env = city_env(5, config(COIN_GAME, vec![ObservationKind::Yaw]));
    env.reset().unwrap();
    for i in 1..=1000 {
        let r = env.step(ActionTuple::NOOP).unwrap();
        assert_eq!(r.done, i == 1000, "step {i}");
        assert_eq!(r.info["step"], i);
        assert_eq!(r.info["time_up"], i == 1000);
    }
    assert!(matches!(env.step(ActionTuple::NOOP), Err(EnvError::EpisodeOver)));
    env.reset().unwrap();
    assert!(!env.step(ActionTuple::NOOP).unwrap().done);
}

#[test]
fn auto_reset_starts_the_next_episode() {
    let cfg = EnvConfig {
        auto_reset: true,
        episode_length: 10,
        ..config(COIN_GAME, vec![ObservationKind::Yaw])
    };
    let mut env = city_env(5, cfg);
    env.reset().unwrap();
    for _ in 0..9 {
        env.step(ActionTuple::turn(10.0)).unwrap();
    }
    let last = env.step(ActionTuple::turn(10.0)).unwrap();
    assert!(last.done);
    assert_eq!(last.info["episode"], 1);
    assert_eq!(env.episodes(), 2);
    // the observation already belongs to the new episode
    assert_eq!(last.observation.scalar(ObservationKind::Yaw), Some(env.pose().unwrap().yaw));
    assert_eq!(env.step(ActionTuple::NOOP).unwrap().info["step"], 1);
}

#[test]
fn errors_are_reported() {
    let mut env = city_env(5, config(COIN_GAME, vec![ObservationKind::Yaw]));
    assert!(matches!(env.step(0usize), Err(EnvError::NotReset)));
    assert!(matches!(env.observe(), Err(EnvError::NotReset)));
    env.reset().unwrap();
    assert!(matches!(env.step(5usize), Err(EnvError::ActionOutOfRange { index: 5, len: 5 })));
    assert!(matches!(
        ActionTuple::from_array([0.0, 0.0, 0.5, 0.0]),
        Err(EnvError::InvalidAction(_))
    ));
    assert!(matches!(
        ActionTuple::from_array([f64::NAN, 0.0, 0.0, 0.0]),
        Err(EnvError::InvalidAction(_))
    ));
    let bad = EnvConfig {
        fov: 10.0,
        ..EnvConfig::default()
    };
    assert!(matches!(Environment::new(star(&[0.0]), Arc::new(Flat), bad), Err(EnvError::Config(_))));
    let unknown = EnvConfig {
        game: "nope".into(),
        ..EnvConfig::default()
    };
    assert!(Environment::new(star(&[0.0]), Arc::new(Flat), unknown).is_err());
}

#[test]
fn discrete_actions_follow_the_table() {
    let g = star(&[0.0, 90.0]);
    let mut env = Environment::new(Arc::clone(&g), Arc::new(Flat), config(COIN_GAME, vec![])).unwrap();
    let hub = g.idx("h").unwrap();
    let mut steps = 0;
    while env.pose().is_none_or(|p| p.node != hub) {
        env.reset().unwrap();
        steps += 1;
        assert!(steps < 1000);
    }
    let yaw0 = env.pose().unwrap().yaw;
    for (i, delta) in [(1usize, -22.5), (2, -67.5), (3, 22.5), (4, 67.5)] {
        let before = env.pose().unwrap().yaw;
        env.step(i).unwrap();
        assert!((wrap(env.pose().unwrap().yaw - before) - delta).abs() < 1e-9);
    }
    assert!((env.pose().unwrap().yaw - yaw0).abs() < 1e-9);
}

#[test]
fn pitch_does_not_affect_moving() {
    let g = star(&[0.0]);
    let hub = AgentPose {
        node: g.idx("h").unwrap(),
        yaw: 0.0,
        pitch: 0.0,
        fov: 60.0,
    };
    for pitch in [-90.0, -30.0, 45.0, 90.0] {
        let a = ActionTuple {
            rotate_pitch: pitch,
            ..ActionTuple::forward()
        };
        let p = panonav_core::engine::apply_action(hub, &a, &g);
        assert_eq!(g.node(p.node).id, "s0");
        assert_eq!(p.pitch, pitch);
    }
}

#[test]
fn move_tolerance_and_tie_break() {
    let g = star(&[0.0, 30.0, 330.0, 120.0]);
    let at = |yaw: f64| AgentPose {
        node: g.idx("h").unwrap(),
        yaw,
        pitch: 0.0,
        fov: 60.0,
    };
    let go = |yaw: f64| {
        let p = panonav_core::engine::apply_move_forward(at(yaw), &g);
        g.node(p.node).id.clone()
    };
    assert_eq!(go(0.0), "s0");
    assert_eq!(go(10.0), "s0");
    assert_eq!(go(16.0), "s1");
    assert_eq!(go(59.0), "s1");
    assert_eq!(go(61.0), "h");
    assert_eq!(go(90.5), "s3");
    assert_eq!(go(89.0), "h");
    assert_eq!(go(300.5), "s2");
    assert_eq!(go(180.0), "h");

    // two spokes on the same bearing: the smaller id wins
    let twin = star(&[45.0, 45.0]);
    let p = panonav_core::engine::apply_move_forward(
        AgentPose {
            node: twin.idx("h").unwrap(),
            yaw: 45.0,
            pitch: 0.0,
            fov: 60.0,
        },
        &twin,
    );
    assert_eq!(twin.node(p.node).id, "s0");
}

#[test]
fn neighbors_vector_examples() {
    let g = star(&[0.0, 90.0, 180.0, 200.0]);
    let hub = g.idx("h").unwrap();
    let pose = |yaw| AgentPose {
        node: hub,
        yaw,
        pitch: 0.0,
        fov: 60.0,
    };
    let bins = |yaw| neighbors_vector(&pose(yaw), &g).iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect::<Vec<_>>();
    assert_eq!(bins(0.0), [0, 4, 8, 9]);
    assert_eq!(bins(90.0), [0, 4, 5, 12]);
    assert_eq!(bins(200.0), [0, 7, 11, 15]);
    // a spoke has only its hub behind it
    let spoke = AgentPose {
        node: g.idx("s1").unwrap(),
        ..pose(90.0)
    };
    let v = neighbors_vector(&spoke, &g);
    assert_eq!(v.iter().map(|&b| b as u32).sum::<u32>(), 1);
    assert_eq!(v[8], 1);
}

fn run(env: &mut Environment, seed: u64, steps: usize) -> Vec<StepResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    env.reset().unwrap();
    (0..steps)
        .map(|_| {
            let a: Action = if rng.gen_bool(0.5) { Action::Discrete(rng.gen_range(0..5)) } else { random_action(&mut rng).into() };
            env.step(a).unwrap()
        })
        .collect()
}

fn all_kinds() -> Vec<ObservationKind> {
    ObservationKind::ALL.to_vec()
}

#[test]
fn runs_are_deterministic_across_cache_budgets() {
    let base = EnvConfig {
        seed: 17,
        auto_reset: true,
        episode_length: 120,
        ..config("courier_game", all_kinds())
    };
    let mut reference = city_env(7, base.clone());
    let a = run(&mut reference, 3, 300);
    for budget in [0, 64 * 64 * 2 * 3 * 2, usize::MAX] {
        let mut env = city_env(
            7,
            EnvConfig {
                cache_budget_bytes: budget,
                ..base.clone()
            },
        );
        assert_eq!(run(&mut env, 3, 300), a, "budget {budget}");
    }
    let mut other = city_env(7, EnvConfig { seed: 18, ..base });
    assert_ne!(run(&mut other, 3, 300), a);
}

#[test]
fn stored_images_and_rendering_agree() {
    let params = city_params(9, 2, 0.2, 64);
    let with = tempfile::tempdir().unwrap();
    let without = tempfile::tempdir().unwrap();
    write_city(with.path(), &params, "x", true).unwrap();
    write_city(without.path(), &params, "x", false).unwrap();
    let cfg = EnvConfig {
        seed: 4,
        ..config("courier_game", vec![ObservationKind::ViewImage, ObservationKind::GraphImage])
    };
    let mut a = Environment::open(with.path(), cfg.clone()).unwrap();
    let mut b = Environment::from_config(EnvConfig {
        graph_path: Some(without.path().to_path_buf()),
        ..cfg
    })
    .unwrap();
    assert_eq!(run(&mut a, 8, 200), run(&mut b, 8, 200));
}

#[test]
fn cache_evicts_least_recently_used() {
    let params = city_params(1, 1, 0.0, 32);
    let g = city(&params);
    let src: Arc<dyn PanoSource> = synthetic(&g, &params);
    let one = 64 * 32 * 3;
    let mut cache = PanoCache::new(Arc::clone(&src), 2 * one);
    let ids: Vec<String> = (0..3).map(|i| g.node(i).id.clone()).collect();
    cache.get(&ids[0]).unwrap();
    cache.get(&ids[1]).unwrap();
    cache.get(&ids[0]).unwrap();
    cache.get(&ids[2]).unwrap();
    assert!(cache.contains(&ids[0]) && cache.contains(&ids[2]) && !cache.contains(&ids[1]));
    let s = cache.stats();
    assert_eq!((s.hits, s.misses, s.evictions), (1, 3, 1));
    assert!(cache.used_bytes() <= cache.budget_bytes());
    assert_eq!(*cache.get(&ids[1]).unwrap(), src.load(&ids[1]).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let mut missing = PanoCache::new(Arc::new(DirPanos::new(dir.path())), one);
    assert!(missing.get("nope").is_err());
}

#[test]
fn target_channels_are_missing_without_a_target() {
    let mut env = city_env(
        2,
        config(
            COIN_GAME,
            vec![ObservationKind::TargetLatlng, ObservationKind::TargetMetadata, ObservationKind::TargetLatlngLabel],
        ),
    );
    let obs = env.reset().unwrap();
    assert!(obs.channels.iter().all(|(_, v)| *v == ObsValue::Missing));
    let mut courier = city_env(2, config("courier_game", vec![ObservationKind::TargetLatlng]));
    let obs = courier.reset().unwrap();
    let goal = courier.game().goal().unwrap();
    assert_eq!(obs.get(ObservationKind::TargetLatlng), Some(&ObsValue::LatLng(courier.graph().position(goal))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exactly_the_requested_channels(mask in 0u32..(1 << 15), seed in 0u64..4, rev in any::<bool>()) {
        let mut kinds: Vec<ObservationKind> =
            ObservationKind::ALL.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, k)| *k).collect();
        if rev {
            kinds.reverse();
        }
        let mut env = city_env(seed, config("step_by_step_instruction_game", kinds.clone()));
        let obs = env.reset().unwrap();
        prop_assert_eq!(obs.kinds(), kinds.clone());
        let r = env.step(0usize).unwrap();
        prop_assert_eq!(r.observation.kinds(), kinds);
    }
}

#[test]
fn images_have_configured_sizes() {
    let cfg = EnvConfig {
        frame_size: 40,
        graph_image_size: 72,
        ..config("courier_game", vec![ObservationKind::ViewImage, ObservationKind::GraphImage])
    };
    let mut env = city_env(2, cfg);
    let obs = env.reset().unwrap();
    assert_eq!(obs.view_image().unwrap().dimensions(), (40, 40));
    assert_eq!(obs.graph_image().unwrap().dimensions(), (72, 72));
}
