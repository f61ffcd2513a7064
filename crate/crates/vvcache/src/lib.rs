//! vvcache: a desk-scale simulator and policy library for proactive edge
//! caching of tiled, layered 360-degree video.
//!
//! A small base station caches whole videos at base quality plus, per video,
//! a *virtual viewport*: the `k` most worthwhile tiles in high quality,
//! chosen freely rather than as a rectangle. Policies decide what to cache
//! online, from request history alone. The crate ships a DQN policy driven
//! by delayed distortion-reduction rewards and the LFU/LRU/FIFO baselines,
//! an environment with a per-GOP delivery-deadline model, synthetic Zipf and
//! trace-driven workloads, and an experiment harness with CSV reporting.
//!
//! The book under `book/` walks through every concept with runnable
//! examples; start with `vvcache::harness::run_experiment` for programmatic
//! use, or the `vvcache` binary for the command line.
//!
//! ```
//! use vvcache::config::ExperimentConfig;
//! use vvcache::harness::run_experiment;
//!
//! let mut cfg = ExperimentConfig::default();
//! cfg.library.num_videos = 20;
//! cfg.library.num_gops = 4;
//! cfg.workload.total_sets = 50;
//! cfg.env = vvcache::env::EnvConfig {
//!     short_window: 10,
//!     long_window: 20,
//!     reward_window: 10,
//! };
//! cfg.policy = "lfu".to_string();
//! let record = run_experiment(&cfg).unwrap();
//! assert_eq!(record.sets, 50);
//! assert!(record.hit_ratio >= 0.0 && record.hit_ratio <= 1.0);
//! ```

pub mod action;
pub mod baselines;
pub mod cache;
pub mod config;
pub mod content;
pub mod delivery;
pub mod dqn;
pub mod env;
pub mod error;
pub mod events;
pub mod harness;
pub mod metrics;
pub mod policy;
pub mod seeds;
pub mod workload;

pub use action::{Action, ActionLayout, ActionMask};
pub use cache::{CacheState, Candidate, FeatureVector, Lookup, RequestHistory};
pub use config::ExperimentConfig;
pub use content::{Layer, LibraryConfig, TileKey, Viewport, ViewportId, VirtualViewport};
pub use delivery::{schedule_gop_delivery, DelayConfig, DeliveryPlan};
pub use env::{DecisionContext, EnvConfig, SettledTransition, SimEnv};
pub use harness::{run_experiment, run_sweep, SweepAxis};
pub use metrics::{MetricsAggregator, MetricsRecord};
pub use policy::CachePolicy;
pub use workload::{lsr_predict, RequestSet, WorkloadConfig, WorkloadGenerator};

// The book's code blocks run as doctests so the guide cannot drift from the
// library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }
    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(ContentModel, "../../../book/src/content-model.md");
    chapter!(Workloads, "../../../book/src/workloads.md");
    chapter!(Delivery, "../../../book/src/delivery.md");
    chapter!(CacheAndFeatures, "../../../book/src/cache-and-features.md");
    chapter!(Environment, "../../../book/src/environment.md");
    chapter!(Policies, "../../../book/src/policies.md");
    chapter!(Learning, "../../../book/src/learning.md");
    chapter!(Experiments, "../../../book/src/experiments.md");
}
