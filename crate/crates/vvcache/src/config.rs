//! Experiment configuration: a human-readable key-value file with sections,
//! parsed into the typed sub-configs.
//!
//! ```text
//! # comment
//! [library]
//! videos = 500
//! viewport_tiles = 4
//!
//! [workload]
//! viewport_mode = zipf
//! eta_p = 1.0
//!
//! [experiment]
//! policy = dqn
//! cache_fraction = 0.10
//! seed = 7
//! ```
//!
//! Every key is optional; omitted keys keep their defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::content::{LibraryConfig, ViewportId};
use crate::delivery::DelayConfig;
use crate::dqn::TrainerConfig;
use crate::env::EnvConfig;
use crate::error::ConfigError;
use crate::workload::{ViewportDist, WorkloadConfig};

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub library: LibraryConfig,
    pub workload: WorkloadConfig,
    pub delay: DelayConfig,
    pub env: EnvConfig,
    pub trainer: TrainerConfig,
    pub policy: String,
    /// Cache capacity = round(cache_fraction * videos), at least 1.
    pub cache_fraction: f64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
    /// Workload seed override; by default the experiment seed is used.
    pub workload_seed: Option<u64>,
    /// When set, the full JSON-lines event stream is written here.
    pub events_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            library: LibraryConfig::default(),
            workload: WorkloadConfig::default(),
            delay: DelayConfig::default(),
            env: EnvConfig::default(),
            trainer: TrainerConfig::default(),
            policy: "dqn".to_string(),
            cache_fraction: 0.10,
            seed: 0,
            out_dir: None,
            trace_path: None,
            workload_seed: None,
            events_path: None,
        }
    }
}

impl ExperimentConfig {
    /// Cache capacity in video slots.
    pub fn capacity(&self) -> usize {
        ((self.cache_fraction * self.library.num_videos as f64).round() as usize).max(1)
    }

    pub fn events_path(&self) -> Option<std::path::PathBuf> {
        self.events_path.clone()
    }

    /// The workload config with its seed resolved.
    pub fn resolved_workload(&self) -> WorkloadConfig {
        let mut wl = self.workload.clone();
        wl.seed = self.workload_seed.unwrap_or(self.seed);
        wl
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.library.validate()?;
        self.workload.validate(&self.library)?;
        self.delay.validate()?;
        self.env.validate()?;
        self.trainer.validate()?;
        if !(self.cache_fraction > 0.0) {
            return Err(ConfigError::invalid("cache_fraction must be > 0"));
        }
        const POLICIES: [&str; 6] = ["dqn", "lfu", "lru", "fifo", "noop", "oracle"];
        if !POLICIES.contains(&self.policy.as_str()) {
            return Err(ConfigError::invalid(format!(
                "unknown policy {:?}; expected one of {POLICIES:?}",
                self.policy
            )));
        }
        if matches!(self.workload.viewport_dist, ViewportDist::Trace) && self.trace_path.is_none()
        {
            return Err(ConfigError::invalid("trace viewport_mode requires trace_path"));
        }
        Ok(())
    }

    /// Parses a config file; unknown sections or keys are errors.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_content(&text)
    }

    pub fn from_str_content(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::invalid(format!("line {}: expected key = value", lineno + 1))
            })?;
            if current.is_empty() {
                return Err(ConfigError::invalid(format!(
                    "line {}: key outside any [section]",
                    lineno + 1
                )));
            }
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
        }

        let mut cfg = ExperimentConfig::default();
        let mut viewport_mode: Option<String> = None;
        let mut eta_p = 1.0f64;
        let mut selective_id = 1u32;
        let mut weights: Option<Vec<f64>> = None;
        for (section, keys) in &sections {
            for (key, value) in keys {
                let fail = |what: &str| {
                    ConfigError::invalid(format!("[{section}] {key}: cannot parse {value:?} as {what}"))
                };
                macro_rules! num {
                    ($ty:ty) => {
                        value.parse::<$ty>().map_err(|_| fail(stringify!($ty)))?
                    };
                }
                match (section.as_str(), key.as_str()) {
                    ("library", "videos") => cfg.library.num_videos = num!(u32),
                    ("library", "gops") => cfg.library.num_gops = num!(u32),
                    ("library", "tiles") => cfg.library.num_tiles = num!(u16),
                    ("library", "grid_cols") => cfg.library.grid_cols = num!(u16),
                    ("library", "grid_rows") => cfg.library.grid_rows = num!(u16),
                    ("library", "viewport_tiles") => cfg.library.viewport_tiles = num!(u16),
                    ("library", "base_bitrate_mbps") => cfg.library.base_bitrate_mbps = num!(f64),
                    ("library", "enh_bitrate_mbps") => cfg.library.enh_bitrate_mbps = num!(f64),
                    ("library", "gop_duration_s") => cfg.library.gop_duration_s = num!(f64),
                    ("library", "base_gain_db") => cfg.library.base_gain_db = num!(f64),
                    ("library", "enh_gain_db") => cfg.library.enh_gain_db = num!(f64),
                    ("workload", "eta_v") => cfg.workload.eta_v = num!(f64),
                    ("workload", "viewport_mode") => viewport_mode = Some(value.clone()),
                    ("workload", "eta_p") => eta_p = num!(f64),
                    ("workload", "selective_id") => selective_id = num!(u32),
                    ("workload", "viewport_weights") => {
                        let parsed: Result<Vec<f64>, _> =
                            value.split(',').map(|v| v.trim().parse::<f64>()).collect();
                        weights = Some(parsed.map_err(|_| fail("comma-separated floats"))?);
                    }
                    ("workload", "trace_path") => cfg.trace_path = Some(PathBuf::from(value)),
                    ("workload", "request_sets") => cfg.workload.total_sets = num!(u64),
                    ("workload", "seed") => cfg.workload_seed = Some(num!(u64)),
                    ("delivery", "d_sbs_s_per_mbit") => cfg.delay.d_sbs_s_per_mbit = num!(f64),
                    ("delivery", "d_mbs_s_per_mbit") => cfg.delay.d_mbs_s_per_mbit = num!(f64),
                    ("env", "short_window") => cfg.env.short_window = num!(usize),
                    ("env", "long_window") => cfg.env.long_window = num!(usize),
                    ("env", "reward_window") => cfg.env.reward_window = num!(u64),
                    ("trainer", "learning_rate") => cfg.trainer.learning_rate = num!(f64),
                    ("trainer", "epsilon") => cfg.trainer.epsilon = num!(f64),
                    ("trainer", "epsilon_offline") => cfg.trainer.epsilon_offline = num!(f64),
                    ("trainer", "gamma") => cfg.trainer.gamma = num!(f64),
                    ("trainer", "minibatch") => cfg.trainer.minibatch = num!(usize),
                    ("trainer", "train_period") => cfg.trainer.train_period = num!(u64),
                    ("trainer", "target_sync_period") => {
                        cfg.trainer.target_sync_period = num!(u64)
                    }
                    ("trainer", "offline_epochs") => cfg.trainer.offline_epochs = num!(usize),
                    ("trainer", "replay_capacity") => cfg.trainer.replay_capacity = num!(usize),
                    ("trainer", "warmup_sets") => cfg.trainer.warmup_sets = num!(u64),
                    ("trainer", "adam_beta1") => cfg.trainer.adam_beta1 = num!(f64),
                    ("trainer", "adam_beta2") => cfg.trainer.adam_beta2 = num!(f64),
                    ("trainer", "adam_epsilon") => cfg.trainer.adam_epsilon = num!(f64),
                    ("trainer", "reward_scale") => cfg.trainer.reward_scale = num!(f64),
                    ("experiment", "policy") => cfg.policy = value.clone(),
                    ("experiment", "cache_fraction") => cfg.cache_fraction = num!(f64),
                    ("experiment", "seed") => cfg.seed = num!(u64),
                    ("experiment", "out_dir") => cfg.out_dir = Some(PathBuf::from(value)),
                    _ => {
                        return Err(ConfigError::invalid(format!(
                            "unknown key [{section}] {key}"
                        )))
                    }
                }
            }
        }
        cfg.workload.viewport_dist = match viewport_mode.as_deref() {
            None | Some("zipf") => ViewportDist::Zipf { eta_p },
            Some("selective") => ViewportDist::Selective {
                id: ViewportId(selective_id),
            },
            Some("weighted") => ViewportDist::Weighted {
                weights: weights.ok_or_else(|| {
                    ConfigError::invalid("viewport_mode = weighted requires viewport_weights")
                })?,
            },
            Some("trace") => ViewportDist::Trace,
            Some(other) => {
                return Err(ConfigError::invalid(format!(
                    "viewport_mode {other:?}: expected zipf|selective|weighted|trace"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_paper_operating_point() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.capacity(), 50);
        assert_eq!(cfg.library.num_videos, 500);
        assert_eq!(cfg.env.long_window, 1000);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn parses_sections_and_overrides() {
        let text = r#"
# an experiment
[library]
videos = 40
gops = 5

[workload]
eta_v = 1.2
viewport_mode = selective
selective_id = 3
request_sets = 100

[experiment]
policy = lfu
cache_fraction = 0.25
seed = 9
"#;
        let cfg = ExperimentConfig::from_str_content(text).unwrap();
        assert_eq!(cfg.library.num_videos, 40);
        assert_eq!(cfg.capacity(), 10);
        assert_eq!(cfg.policy, "lfu");
        assert_eq!(
            cfg.workload.viewport_dist,
            ViewportDist::Selective { id: ViewportId(3) }
        );
        assert_eq!(cfg.resolved_workload().seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_str_content("[library]\nvideo = 4\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"));
    }

    #[test]
    fn weighted_mode_requires_weights() {
        let err =
            ExperimentConfig::from_str_content("[workload]\nviewport_mode = weighted\n").unwrap_err();
        assert!(err.to_string().contains("viewport_weights"));
        let ok = ExperimentConfig::from_str_content(
            "[workload]\nviewport_mode = weighted\nviewport_weights = 32,30,1,1,1,1,1,1\n",
        )
        .unwrap();
        match ok.workload.viewport_dist {
            ViewportDist::Weighted { ref weights } => assert_eq!(weights.len(), 8),
            _ => panic!("expected weighted"),
        }
    }

    #[test]
    fn workload_seed_override_wins() {
        let cfg = ExperimentConfig::from_str_content(
            "[workload]\nseed = 123\n[experiment]\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.resolved_workload().seed, 123);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn bad_values_name_the_key() {
        let err = ExperimentConfig::from_str_content("[library]\nvideos = many\n").unwrap_err();
        assert!(err.to_string().contains("videos"));
    }
}
