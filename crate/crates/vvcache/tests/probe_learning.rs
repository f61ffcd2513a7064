//! Scratch probe for learning dynamics (not part of the suite; run with
//! --ignored). Prints diagnostics for the tiny stationary instance.

use vvcache::config::ExperimentConfig;
use vvcache::content::{LibraryConfig, ViewportId};
use vvcache::delivery::DelayConfig;
use vvcache::env::{EnvConfig, SimEnv};
use vvcache::events::NullSink;
use vvcache::harness::offline_phase;
use vvcache::workload::{ViewportDist, WorkloadConfig, WorkloadGenerator};

struct Knobs {
    reward_window: u64,
    reward_scale: f64,
    warmup: u64,
    train_period: u64,
    epochs: usize,
    gamma: f64,
}

fn tiny_cfg(seed: u64, k: &Knobs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.library = LibraryConfig {
        num_videos: 4,
        num_gops: 2,
        num_tiles: 4,
        grid_cols: 2,
        grid_rows: 2,
        viewport_tiles: 2,
        ..LibraryConfig::default()
    };
    cfg.workload = WorkloadConfig {
        eta_v: 1.0,
        viewport_dist: ViewportDist::Selective { id: ViewportId(1) },
        total_sets: 3000,
        seed,
    };
    cfg.env = EnvConfig {
        short_window: 50,
        long_window: 200,
        reward_window: k.reward_window,
    };
    cfg.trainer.warmup_sets = k.warmup;
    cfg.trainer.reward_scale = k.reward_scale;
    cfg.trainer.offline_epochs = k.epochs;
    cfg.trainer.train_period = k.train_period;
    cfg.trainer.target_sync_period = k.train_period;
    cfg.trainer.gamma = k.gamma;
    cfg.cache_fraction = 0.25;
    cfg.seed = seed;
    cfg.policy = "dqn".into();
    cfg
}

#[test]
#[ignore]
fn probe_tiny_instance() {
    for (h, scale, warmup, period, gamma) in [
        (1u64, 280.0, 1500u64, 20u64, 0.6f64),
        (1, 1000.0, 1500, 20, 0.6),
        (1, 280.0, 1500, 20, 0.0),
        (1, 1000.0, 1500, 20, 0.0),
        (2, 1000.0, 1500, 20, 0.6),
    ] {
        println!("--- H={h} scale={scale} warmup={warmup} period={period} gamma={gamma}");
        for seed in [1u64, 2, 3, 4, 5] {
            let cfg = tiny_cfg(seed, &Knobs { reward_window: h, reward_scale: scale, warmup, train_period: period, epochs: 100, gamma });
            let start = std::time::Instant::now();
            let mut agent = offline_phase(&cfg).unwrap();
            let offline_losses: Vec<f64> = agent
                .loss_log()
                .iter()
                .filter(|p| p.phase == "offline")
                .map(|p| p.loss)
                .collect();
            let mut env = SimEnv::new(
                cfg.library.clone(),
                DelayConfig::default(),
                cfg.env,
                cfg.capacity(),
            )
            .unwrap();
            let mut generator =
                WorkloadGenerator::new(cfg.resolved_workload(), &cfg.library, None).unwrap();
            let mut sink = NullSink;
            let mut rank1_final = 0u64;
            for i in 0..3000u64 {
                let req = generator.next_set().unwrap();
                env.process_request_set(&req, &mut agent, &mut sink).unwrap();
                if i >= 2500 {
                    let cached0 = env.cache().slot(0).map(|e| e.video) == Some(0);
                    rank1_final += cached0 as u64;
                }
            }
            // Inspect learned preferences on crafted observations:
            // (popular cached, unpopular candidate) should prefer NoOp;
            // the reverse should prefer Replace.
            let probe_q = |x: f32, z: f32| -> (f64, f64) {
                let f = [x, x, 2.0 * x, 2.0 * x, 2.0 * x, 2.0 * x, z, z];
                let q = agent.network().forward(&f);
                (q[0], q[1])
            };
            let (q_noop_keep, q_rep_keep) = probe_q(0.5, 0.1);
            let (q_noop_swap, q_rep_swap) = probe_q(0.1, 0.5);
            println!(
                "seed={seed}: rank1_frac={:.3} last_loss={:.4} keep:[{:.4} vs {:.4} -> {}] swap:[{:.4} vs {:.4} -> {}] elapsed={:.1}s",
                rank1_final as f64 / 500.0,
                offline_losses.last().unwrap(),
                q_noop_keep, q_rep_keep, if q_noop_keep >= q_rep_keep { "keep" } else { "REP" },
                q_noop_swap, q_rep_swap, if q_rep_swap > q_noop_swap { "rep" } else { "KEEP" },
                start.elapsed().as_secs_f64(),
            );
        }
    }
}
