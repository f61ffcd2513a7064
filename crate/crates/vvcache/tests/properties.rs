//! Cross-module invariants: workload statistics, delivery safety, feature
//! bookkeeping, masking, determinism and baseline structure.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vvcache::action::{Action, ActionLayout, ActionMask};
use vvcache::baselines::BaselinePolicy;
use vvcache::cache::{ActionContext, CacheState};
use vvcache::config::ExperimentConfig;
use vvcache::content::{LibraryConfig, ViewportId, VirtualViewport};
use vvcache::delivery::DelayConfig;
use vvcache::dqn::{select_action, NetDims, QNetwork};
use vvcache::env::{EnvConfig, SimEnv};
use vvcache::events::{Event, EventSink, NullSink};
use vvcache::harness::run_experiment;
use vvcache::policy::{AlwaysNoOp, CachePolicy, OraclePolicy};
use vvcache::workload::{
    lsr_predict, RequestSet, ViewportDist, WorkloadConfig, WorkloadGenerator,
};

fn small_lib(videos: u32, gops: u32) -> LibraryConfig {
    LibraryConfig {
        num_videos: videos,
        num_gops: gops,
        ..LibraryConfig::default()
    }
}

#[test]
fn empirical_video_frequencies_match_zipf_within_tv_distance() {
    let lib = small_lib(10, 2);
    let cfg = WorkloadConfig {
        eta_v: 1.0,
        total_sets: 100_000,
        seed: 21,
        ..WorkloadConfig::default()
    };
    let mut generator = WorkloadGenerator::new(cfg, &lib, None).unwrap();
    let mut counts = vec![0u64; 10];
    for _ in 0..100_000 {
        counts[generator.next_set().unwrap().video as usize] += 1;
    }
    let tv: f64 = (0..10)
        .map(|v| {
            let emp = counts[v] as f64 / 100_000.0;
            (emp - generator.video_prob(v as u32)).abs()
        })
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.01, "total variation distance {tv}");
}

#[test]
fn lsr_accuracy_is_exact_on_constant_and_chance_on_uniform() {
    let lib = small_lib(5, 30);
    // Constant trajectories: always correct.
    let mut constant = WorkloadGenerator::new(
        WorkloadConfig {
            viewport_dist: ViewportDist::Selective { id: ViewportId(4) },
            total_sets: 100,
            seed: 3,
            ..WorkloadConfig::default()
        },
        &lib,
        None,
    )
    .unwrap();
    for _ in 0..100 {
        let req = constant.next_set().unwrap();
        for g in 0..30 {
            assert_eq!(lsr_predict(&req, g), req.viewports[g as usize]);
        }
    }
    // Uniform i.i.d. viewports: accuracy converges to 1/8 for g >= 2.
    let mut uniform = WorkloadGenerator::new(
        WorkloadConfig {
            viewport_dist: ViewportDist::Zipf { eta_p: 0.0 },
            total_sets: 2000,
            seed: 4,
            ..WorkloadConfig::default()
        },
        &lib,
        None,
    )
    .unwrap();
    let mut correct = 0u64;
    let mut total = 0u64;
    for _ in 0..2000 {
        let req = uniform.next_set().unwrap();
        for g in 1..30 {
            total += 1;
            if lsr_predict(&req, g) == req.viewports[g as usize] {
                correct += 1;
            }
        }
    }
    let acc = correct as f64 / total as f64;
    assert!((acc - 0.125).abs() < 0.01, "accuracy {acc}");
}

/// Recomputes a run's per-set distortion from delivery events and checks
/// the environment's ledger against it; also checks the deadline literally.
struct DeltaChecker {
    deltas: Vec<f64>,
    violations: u64,
}

impl EventSink for DeltaChecker {
    fn on_event(&mut self, event: &Event) {
        if let Event::Delivery {
            set,
            elapsed_s,
            delivered_gain_db,
            ..
        } = event
        {
            let set = *set as usize;
            if self.deltas.len() <= set {
                self.deltas.resize(set + 1, 0.0);
            }
            self.deltas[set] += delivered_gain_db;
            if *elapsed_s > 1.0 + 1e-9 {
                self.violations += 1;
            }
        }
    }
}

#[test]
fn ledger_deltas_match_delivery_event_recount() {
    let lib = small_lib(8, 6);
    let mut env = SimEnv::new(
        lib.clone(),
        DelayConfig::default(),
        EnvConfig {
            short_window: 10,
            long_window: 30,
            reward_window: 5,
        },
        3,
    )
    .unwrap();
    let mut generator = WorkloadGenerator::new(
        WorkloadConfig {
            total_sets: 300,
            seed: 7,
            ..WorkloadConfig::default()
        },
        &lib,
        None,
    )
    .unwrap();
    let mut checker = DeltaChecker {
        deltas: Vec::new(),
        violations: 0,
    };
    let mut policy = BaselinePolicy::lfu(3);
    for _ in 0..300 {
        let req = generator.next_set().unwrap();
        env.process_request_set(&req, &mut policy, &mut checker)
            .unwrap();
    }
    assert_eq!(checker.violations, 0);
    for i in 0..300u64 {
        assert!(
            (env.delta(i) - checker.deltas[i as usize]).abs() < 1e-9,
            "set {i}: ledger {} vs recount {}",
            env.delta(i),
            checker.deltas[i as usize]
        );
    }
}

#[test]
fn same_seed_same_policy_replays_bit_identically() {
    let run = || {
        let lib = small_lib(12, 4);
        let mut env = SimEnv::new(
            lib.clone(),
            DelayConfig::default(),
            EnvConfig {
                short_window: 8,
                long_window: 16,
                reward_window: 3,
            },
            2,
        )
        .unwrap();
        let mut generator = WorkloadGenerator::new(
            WorkloadConfig {
                total_sets: 150,
                seed: 99,
                ..WorkloadConfig::default()
            },
            &lib,
            None,
        )
        .unwrap();
        let mut policy = BaselinePolicy::lru(2);
        let mut sink = NullSink;
        let mut deltas = Vec::new();
        let mut rewards = Vec::new();
        for _ in 0..150 {
            let req = generator.next_set().unwrap();
            let settled = env
                .process_request_set(&req, &mut policy, &mut sink)
                .unwrap();
            rewards.extend(settled.iter().map(|t| t.reward.to_bits()));
        }
        for i in 0..150 {
            deltas.push(env.delta(i).to_bits());
        }
        (deltas, rewards)
    };
    assert_eq!(run(), run());
}

#[test]
fn oracle_dominates_noop_in_total_delivered_distortion() {
    let mut base = ExperimentConfig::default();
    base.library = small_lib(10, 5);
    base.workload.total_sets = 400;
    base.env = EnvConfig {
        short_window: 20,
        long_window: 50,
        reward_window: 10,
    };
    base.cache_fraction = 0.2;
    base.seed = 5;
    let mut noop_cfg = base.clone();
    noop_cfg.policy = "noop".into();
    let mut oracle_cfg = base;
    oracle_cfg.policy = "oracle".into();
    let noop = run_experiment(&noop_cfg).unwrap();
    let oracle = run_experiment(&oracle_cfg).unwrap();
    assert!(
        oracle.total_delta_db >= noop.total_delta_db,
        "oracle {} < noop {}",
        oracle.total_delta_db,
        noop.total_delta_db
    );
}

#[test]
fn baseline_ends_each_set_with_the_last_predicted_viewport() {
    let lib = small_lib(6, 8);
    let viewports = lib.enumerate_viewports().unwrap();
    for make in [BaselinePolicy::lfu, BaselinePolicy::lru, BaselinePolicy::fifo] {
        let mut env = SimEnv::new(
            lib.clone(),
            DelayConfig::default(),
            EnvConfig {
                short_window: 10,
                long_window: 20,
                reward_window: 4,
            },
            2,
        )
        .unwrap();
        let mut generator = WorkloadGenerator::new(
            WorkloadConfig {
                total_sets: 200,
                seed: 31,
                ..WorkloadConfig::default()
            },
            &lib,
            None,
        )
        .unwrap();
        let mut policy = make(2);
        let mut sink = NullSink;
        for _ in 0..200 {
            let req = generator.next_set().unwrap();
            env.process_request_set(&req, &mut policy, &mut sink)
                .unwrap();
            let slot = env
                .cache()
                .slot_of(req.video)
                .expect("baselines always admit");
            let vv = env.cache().slot(slot).unwrap().virtual_viewport.clone();
            let last_predicted = lsr_predict(&req, lib.num_gops - 1);
            let mut expect = viewports[(last_predicted.0 - 1) as usize].tiles.clone();
            expect.sort_unstable();
            let mut got = vv.tiles().to_vec();
            got.sort_unstable();
            assert_eq!(got, expect, "policy {}", policy.name());
        }
    }
}

#[test]
fn target_network_is_frozen_between_syncs() {
    use vvcache::dqn::{DqnAgent, Phase, TrainerConfig};
    let cfg = TrainerConfig {
        train_period: 3,
        target_sync_period: 9,
        minibatch: 4,
        ..TrainerConfig::default()
    };
    let mut agent = DqnAgent::new(cfg, 1, 4, 42).unwrap();
    agent.set_phase(Phase::Online);
    let lib = small_lib(5, 3);
    let mut env = SimEnv::new(
        lib.clone(),
        DelayConfig::default(),
        EnvConfig {
            short_window: 5,
            long_window: 10,
            reward_window: 1,
        },
        1,
    )
    .unwrap();
    let mut generator = WorkloadGenerator::new(
        WorkloadConfig {
            total_sets: 200,
            seed: 8,
            ..WorkloadConfig::default()
        },
        &lib,
        None,
    )
    .unwrap();
    let mut sink = NullSink;
    let hash = |net: &QNetwork| -> u64 {
        let mut acc = 0u64;
        for i in 0..net.param_count() {
            acc = acc
                .rotate_left(7)
                .wrapping_add(net.param(i).to_bits());
        }
        acc
    };
    let mut last_hash = hash(agent.target_network());
    let mut last_syncs = agent.sync_count();
    for _ in 0..200 {
        let req = generator.next_set().unwrap();
        env.process_request_set(&req, &mut agent, &mut sink).unwrap();
        let h = hash(agent.target_network());
        if agent.sync_count() == last_syncs {
            assert_eq!(h, last_hash, "target changed without a sync");
        }
        last_hash = h;
        last_syncs = agent.sync_count();
    }
    assert!(agent.sync_count() > 0, "test must exercise at least one sync");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Epsilon-greedy selection never returns a masked-out action.
    #[test]
    fn selection_respects_arbitrary_masks(
        bits in prop::collection::vec(any::<bool>(), 11),
        eps in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(bits.iter().any(|&b| b));
        let net = QNetwork::new(
            NetDims { input: 6, hidden: 11, output: 11 },
            &mut ChaCha8Rng::seed_from_u64(seed),
        );
        let mask = ActionMask::from_bits(bits.clone());
        let features = vvcache::cache::FeatureVector::from_values(vec![0.1; 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        for _ in 0..32 {
            let a = select_action(&net, &features, &mask, eps, &mut rng);
            prop_assert!(bits[a]);
        }
    }

    /// Cache invariants hold under any legal action sequence: videos stay
    /// unique across slots and virtual viewports keep exactly k distinct
    /// tiles.
    #[test]
    fn cache_invariants_survive_random_legal_actions(seed in any::<u64>()) {
        let lib = LibraryConfig::default();
        let viewports = lib.enumerate_viewports().unwrap();
        let layout = ActionLayout::new(3, 4);
        let mut cache = CacheState::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for step in 0..200 {
            let video = rng.gen_range(0..20u32);
            let vp = &viewports[rng.gen_range(0..viewports.len())];
            if let Some(slot) = cache.slot_of(video) {
                // Tile decision: candidate outside the virtual viewport.
                let vv = cache.slot(slot).unwrap().virtual_viewport.clone();
                let candidates: Vec<u16> =
                    (0..12u16).filter(|t| !vv.contains(*t)).collect();
                let tile = candidates[rng.gen_range(0..candidates.len())];
                let action = if rng.gen_bool(0.5) {
                    Action::NoOp
                } else {
                    Action::ReplaceTile { slot, pos: rng.gen_range(0..4) }
                };
                cache
                    .apply_action(action, &ActionContext {
                        video,
                        initial_viewport: VirtualViewport::from(vp),
                        candidate_tile: Some(tile),
                    })
                    .unwrap();
            } else {
                let action = if rng.gen_bool(0.25) {
                    Action::NoOp
                } else {
                    Action::ReplaceVideo { slot: rng.gen_range(0..3) }
                };
                cache
                    .apply_action(action, &ActionContext {
                        video,
                        initial_viewport: VirtualViewport::from(vp),
                        candidate_tile: None,
                    })
                    .unwrap();
            }
            // Invariants.
            let mut seen = Vec::new();
            for (_, entry) in cache.iter() {
                if let Some(e) = entry {
                    prop_assert!(!seen.contains(&e.video), "step {}: duplicate video", step);
                    seen.push(e.video);
                    prop_assert_eq!(e.virtual_viewport.len(), 4);
                    let mut tiles = e.virtual_viewport.tiles().to_vec();
                    tiles.sort_unstable();
                    tiles.dedup();
                    prop_assert_eq!(tiles.len(), 4, "step {}: duplicate vv tiles", step);
                }
            }
        }
        let _ = layout;
    }

    /// Per-decision actions mutate at most one slot, and a tile action at
    /// most one position of one virtual viewport.
    #[test]
    fn actions_touch_at_most_one_slot(seed in any::<u64>()) {
        let lib = LibraryConfig::default();
        let viewports = lib.enumerate_viewports().unwrap();
        let mut cache = CacheState::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Pre-fill.
        for slot in 0..4usize {
            cache
                .apply_action(Action::ReplaceVideo { slot }, &ActionContext {
                    video: slot as u32,
                    initial_viewport: VirtualViewport::from(&viewports[slot]),
                    candidate_tile: None,
                })
                .unwrap();
        }
        for _ in 0..100 {
            let before = cache.clone();
            let slot = rng.gen_range(0..4usize);
            let video = cache.slot(slot).unwrap().video;
            let vv = cache.slot(slot).unwrap().virtual_viewport.clone();
            let candidates: Vec<u16> = (0..12u16).filter(|t| !vv.contains(*t)).collect();
            let tile = candidates[rng.gen_range(0..candidates.len())];
            cache
                .apply_action(
                    Action::ReplaceTile { slot, pos: rng.gen_range(0..4) },
                    &ActionContext {
                        video,
                        initial_viewport: vv.clone(),
                        candidate_tile: Some(tile),
                    },
                )
                .unwrap();
            let mut changed_slots = 0;
            for s in 0..4usize {
                if cache.slot(s) != before.slot(s) {
                    changed_slots += 1;
                    let b = before.slot(s).unwrap().virtual_viewport.tiles();
                    let a = cache.slot(s).unwrap().virtual_viewport.tiles();
                    let diffs = a.iter().zip(b).filter(|(x, y)| x != y).count();
                    prop_assert_eq!(diffs, 1, "one position changes");
                }
            }
            prop_assert!(changed_slots <= 1);
        }
    }
}

#[test]
fn request_set_streams_are_identical_across_policies() {
    // Matched seeds: the workload stream must not depend on the policy.
    let lib = small_lib(20, 4);
    let cfg = WorkloadConfig {
        total_sets: 100,
        seed: 77,
        ..WorkloadConfig::default()
    };
    let collect = |mut g: WorkloadGenerator| -> Vec<RequestSet> {
        (0..100).map(|_| g.next_set().unwrap()).collect()
    };
    let a = collect(WorkloadGenerator::new(cfg.clone(), &lib, None).unwrap());
    let b = collect(WorkloadGenerator::new(cfg, &lib, None).unwrap());
    assert_eq!(a, b);
}

#[test]
fn noop_policy_never_mutates_the_cache_across_a_run() {
    let lib = small_lib(10, 3);
    let mut env = SimEnv::new(
        lib.clone(),
        DelayConfig::default(),
        EnvConfig {
            short_window: 5,
            long_window: 10,
            reward_window: 2,
        },
        2,
    )
    .unwrap();
    let mut generator = WorkloadGenerator::new(
        WorkloadConfig {
            total_sets: 100,
            seed: 55,
            ..WorkloadConfig::default()
        },
        &lib,
        None,
    )
    .unwrap();
    let mut sink = NullSink;
    let mut policy = AlwaysNoOp;
    for _ in 0..100 {
        let req = generator.next_set().unwrap();
        env.process_request_set(&req, &mut policy, &mut sink)
            .unwrap();
    }
    assert_eq!(env.cache().first_empty(), Some(0), "cache must stay empty");
    let _ = OraclePolicy {
        target_video: 0,
        target_tiles: vec![0, 1, 4, 5],
    };
}
