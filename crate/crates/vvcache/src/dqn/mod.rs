//! The learning policy: masked epsilon-greedy action selection over a
//! Q-network, experience replay, a fixed target network, Adam, and the
//! offline/online training schedule.

mod adam;
mod network;
mod replay;

pub use adam::Adam;
pub use network::{BatchItem, NetDims, QNetwork};
pub use replay::{ReplayBuffer, StoredTransition};

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionLayout, ActionMask};
use crate::cache::FeatureVector;
use crate::env::{DecisionContext, SettledTransition};
use crate::error::ConfigError;
use crate::policy::CachePolicy;
use crate::seeds::{rng_for, Stream};

/// Hyper-parameters of the trainer. Defaults are the standard operating
/// point: lr 0.001, epsilon 0.05 online / 1.0 offline, gamma 0.6, minibatch
/// 32, training every 200 decisions, 100 offline epochs, replay capacity
/// 2000.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub epsilon_offline: f64,
    pub gamma: f64,
    pub minibatch: usize,
    /// Train one minibatch every this many decisions (`N_B`).
    pub train_period: u64,
    /// Copy evaluation weights into the target network every this many
    /// decisions (`N_T`); rides the training cadence by default.
    pub target_sync_period: u64,
    pub offline_epochs: usize,
    pub replay_capacity: usize,
    /// Request sets of pure exploration used to gather historic
    /// transitions before offline training.
    pub warmup_sets: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Rewards are divided by this before entering the learner; 1.0 feeds
    /// raw dB sums.
    pub reward_scale: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epsilon: 0.05,
            epsilon_offline: 1.0,
            gamma: 0.6,
            minibatch: 32,
            train_period: 200,
            target_sync_period: 200,
            offline_epochs: 100,
            replay_capacity: 2000,
            warmup_sets: 1000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            reward_scale: 1.0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.epsilon) || !(0.0..=1.0).contains(&self.epsilon_offline) {
            return Err(ConfigError::invalid("epsilon must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(ConfigError::invalid("gamma must be in [0, 1]"));
        }
        if self.minibatch < 1 || self.train_period < 1 || self.target_sync_period < 1 {
            return Err(ConfigError::invalid("batch size and periods must be >= 1"));
        }
        if self.replay_capacity < self.minibatch {
            return Err(ConfigError::invalid("replay capacity below minibatch size"));
        }
        if !(self.learning_rate > 0.0) || !(self.reward_scale > 0.0) {
            return Err(ConfigError::invalid("learning rate and reward scale must be > 0"));
        }
        Ok(())
    }
}

/// Which schedule the agent is currently following.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Pure exploration; transitions are collected but no training runs.
    OfflineCollect,
    /// Epsilon-greedy acting with periodic training and target syncs.
    Online,
}

/// One recorded loss value.
#[derive(Debug, Clone, Serialize)]
pub struct LossPoint {
    pub phase: &'static str,
    pub step: u64,
    pub loss: f64,
}

/// Masked epsilon-greedy selection: with probability `1 - epsilon` the legal
/// action of maximum Q-value (ties to the lowest index), otherwise a legal
/// action uniformly at random. Never returns a masked-out index.
pub fn select_action(
    net: &QNetwork,
    features: &FeatureVector,
    mask: &ActionMask,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> usize {
    let legal: Vec<usize> = mask.legal_indices().collect();
    assert!(!legal.is_empty(), "action mask permits nothing");
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        legal[rng.gen_range(0..legal.len())]
    } else {
        net.masked_argmax(features.values(), &legal)
    }
}

/// TD targets `y_i = r_i + gamma * max_a' Q_target(s'_i, a')`, the max
/// restricted to the successor state's legal actions.
pub fn td_targets(
    batch: &[&StoredTransition],
    target_net: &QNetwork,
    gamma: f64,
    layout: &ActionLayout,
) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            let legal = t.next_mask.legal_indices(layout);
            t.reward + gamma * target_net.masked_max(t.next_state.values(), &legal)
        })
        .collect()
}

/// The DQN caching policy.
pub struct DqnAgent {
    cfg: TrainerConfig,
    layout: ActionLayout,
    net: QNetwork,
    target: QNetwork,
    adam: Adam,
    buffer: ReplayBuffer,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    phase: Phase,
    decisions: u64,
    online_train_steps: u64,
    syncs: u64,
    loss_log: Vec<LossPoint>,
}

impl DqnAgent {
    pub fn new(
        cfg: TrainerConfig,
        capacity: usize,
        viewport_tiles: usize,
        master_seed: u64,
    ) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let layout = ActionLayout::new(capacity, viewport_tiles);
        let dims = NetDims {
            input: FeatureVector::expected_len(capacity, viewport_tiles),
            hidden: layout.len(),
            output: layout.len(),
        };
        let mut init_rng = rng_for(master_seed, Stream::NetworkInit);
        let net = QNetwork::new(dims, &mut init_rng);
        let mut target = QNetwork::zeroed(dims);
        target.copy_from(&net);
        Ok(Self {
            adam: Adam::new(
                dims.param_count(),
                cfg.learning_rate,
                cfg.adam_beta1,
                cfg.adam_beta2,
                cfg.adam_epsilon,
            ),
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            explore_rng: rng_for(master_seed, Stream::Exploration),
            replay_rng: rng_for(master_seed, Stream::Replay),
            phase: Phase::OfflineCollect,
            decisions: 0,
            online_train_steps: 0,
            syncs: 0,
            loss_log: Vec::new(),
            layout,
            net,
            target,
            cfg,
        })
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn target_network(&self) -> &QNetwork {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn loss_log(&self) -> &[LossPoint] {
        &self.loss_log
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn sync_count(&self) -> u64 {
        self.syncs
    }

    fn epsilon_now(&self) -> f64 {
        match self.phase {
            Phase::OfflineCollect => self.cfg.epsilon_offline,
            Phase::Online => self.cfg.epsilon,
        }
    }

    /// Copies evaluation weights into the fixed target network.
    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.net);
        self.syncs += 1;
    }

    /// One gradient step on a uniformly sampled minibatch; returns the
    /// pre-step loss, or `None` while the buffer is underfull.
    pub fn train_minibatch(&mut self) -> Option<f64> {
        if self.buffer.len() < self.cfg.minibatch {
            return None;
        }
        let idx = self
            .buffer
            .sample_indices(&mut self.replay_rng, self.cfg.minibatch);
        let batch: Vec<&StoredTransition> = idx.iter().map(|&i| self.buffer.get(i)).collect();
        let targets = td_targets(&batch, &self.target, self.cfg.gamma, &self.layout);
        let items: Vec<BatchItem> = batch
            .iter()
            .zip(&targets)
            .map(|(t, &y)| BatchItem {
                state: t.state.values(),
                action: t.action,
                target: y,
            })
            .collect();
        let (loss, grads) = self.net.loss_and_grads(&items);
        self.adam.step(self.net.params_mut(), &grads);
        Some(loss)
    }

    /// Offline phase: epochs of minibatch updates over the collected buffer,
    /// syncing the target network after every epoch. Returns per-epoch mean
    /// losses.
    pub fn offline_train(&mut self) -> Result<Vec<f64>, ConfigError> {
        if self.buffer.len() < self.cfg.minibatch {
            return Err(ConfigError::invalid(format!(
                "offline training needs at least one minibatch of transitions \
                 ({} collected, {} required); warm-up too short",
                self.buffer.len(),
                self.cfg.minibatch
            )));
        }
        let batches_per_epoch = (self.buffer.len() / self.cfg.minibatch).max(1);
        let mut epoch_means = Vec::with_capacity(self.cfg.offline_epochs);
        for epoch in 0..self.cfg.offline_epochs {
            let mut sum = 0.0;
            for _ in 0..batches_per_epoch {
                sum += self.train_minibatch().expect("buffer is full enough");
            }
            let mean = sum / batches_per_epoch as f64;
            self.loss_log.push(LossPoint {
                phase: "offline",
                step: epoch as u64,
                loss: mean,
            });
            epoch_means.push(mean);
            self.sync_target();
        }
        Ok(epoch_means)
    }
}

impl CachePolicy for DqnAgent {
    fn name(&self) -> &'static str {
        "dqn"
    }

    fn decide(&mut self, ctx: &DecisionContext, _cache: &crate::cache::CacheState) -> usize {
        select_action(
            &self.net,
            &ctx.features,
            &ctx.mask,
            self.epsilon_now(),
            &mut self.explore_rng,
        )
    }

    fn applied(&mut self, _ctx: &DecisionContext, _action: Action, _cache: &crate::cache::CacheState) {
        self.decisions += 1;
        if self.phase != Phase::Online {
            return;
        }
        if self.decisions % self.cfg.train_period == 0 {
            if let Some(loss) = self.train_minibatch() {
                self.online_train_steps += 1;
                self.loss_log.push(LossPoint {
                    phase: "online",
                    step: self.online_train_steps,
                    loss,
                });
            }
        }
        if self.decisions % self.cfg.target_sync_period == 0 {
            self.sync_target();
        }
    }

    fn settled(&mut self, t: &SettledTransition) {
        self.buffer.push(StoredTransition {
            state: t.state.clone(),
            action: t.action_index,
            reward: t.reward / self.cfg.reward_scale,
            next_state: t.next_state.clone(),
            next_mask: t.next_mask,
        });
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    input: usize,
    hidden: usize,
    output: usize,
    params: Vec<f64>,
}

/// Writes a JSON parameter dump with a layer-shape header.
pub fn save_checkpoint(net: &QNetwork, mut out: impl Write) -> std::io::Result<()> {
    let dims = net.dims();
    let ckpt = Checkpoint {
        input: dims.input,
        hidden: dims.hidden,
        output: dims.output,
        params: (0..net.param_count()).map(|i| net.param(i)).collect(),
    };
    serde_json::to_writer(&mut out, &ckpt)?;
    Ok(())
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(mut input: impl Read) -> std::io::Result<QNetwork> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    let dims = NetDims {
        input: ckpt.input,
        hidden: ckpt.hidden,
        output: ckpt.output,
    };
    if ckpt.params.len() != dims.param_count() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "parameter count does not match the shape header",
        ));
    }
    let mut net = QNetwork::zeroed(dims);
    for (i, p) in ckpt.params.into_iter().enumerate() {
        net.set_param(i, p);
    }
    Ok(net)
}
