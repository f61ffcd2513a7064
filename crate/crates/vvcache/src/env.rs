//! The online caching environment: request-set processing, decision points,
//! action masking, delayed reward settlement and event emission.
//!
//! One request set is processed in a fixed order. First the whole-video
//! decision (only when the video is uncached): the policy may install it in
//! any slot or decline. Then every GOP in turn: the predicted viewport is
//! scheduled for delivery against the deadline, and each backhaul-fetched
//! enhancement tile missing from the cached virtual viewport triggers one
//! sequential tile decision. Finally the set enters the history windows, the
//! set's realised distortion is accrued, and rewards whose observation
//! window has elapsed are settled.

use std::collections::VecDeque;

use crate::action::{ActionLayout, ActionMask};
use crate::cache::{
    extract_features, ActionContext, CacheState, Candidate, FeatureVector, RequestHistory,
};
use crate::content::{Layer, LibraryConfig, TileKey, Viewport, VirtualViewport};
use crate::delivery::{schedule_gop_delivery, DelayConfig};
use crate::error::{ConfigError, EnvError};
use crate::events::{DecisionKind, Event, EventSink};
use crate::policy::CachePolicy;
use crate::workload::{lsr_predict, RequestSet};

/// Observation-window and reward-window lengths, counted in request sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvConfig {
    /// Short feature window `H_s`.
    pub short_window: usize,
    /// Long feature window `H_l`.
    pub long_window: usize,
    /// Reward horizon `H`: a decision's reward is the mean realised
    /// distortion over the next `H` sets.
    pub reward_window: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            short_window: 300,
            long_window: 1000,
            reward_window: 1000,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.short_window < 1 || self.short_window > self.long_window {
            return Err(ConfigError::invalid("need 1 <= H_s <= H_l"));
        }
        if self.reward_window < 1 {
            return Err(ConfigError::invalid("reward window must be >= 1"));
        }
        Ok(())
    }
}

/// Everything a policy sees at one decision point.
#[derive(Debug, Clone)]
pub struct DecisionContext {
    pub set_index: u64,
    pub video: u32,
    /// 0-based GOP for tile decisions; `None` for the w0 decision.
    pub gop: Option<u32>,
    /// The item being decided about.
    pub candidate: Candidate,
    /// Slot currently holding `video` (tile decisions only).
    pub slot: Option<usize>,
    /// Tiles of the predicted viewport of the triggering request.
    pub predicted_tiles: Vec<u16>,
    /// Observation snapshot at decision time.
    pub features: FeatureVector,
    /// Legal actions for this decision.
    pub mask: ActionMask,
}

impl DecisionContext {
    pub fn kind(&self) -> DecisionKind {
        match self.candidate {
            Candidate::Video(_) => DecisionKind::Video,
            Candidate::Tile(..) => DecisionKind::Tile,
        }
    }

    pub fn candidate_tile(&self) -> Option<u16> {
        match self.candidate {
            Candidate::Video(_) => None,
            Candidate::Tile(_, m) => Some(m),
        }
    }
}

/// Which mask applies in a transition's successor state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Video,
    Tile { slot: usize },
}

impl MaskKind {
    pub fn mask(self, layout: &ActionLayout) -> ActionMask {
        match self {
            MaskKind::Video => layout.video_mask(),
            MaskKind::Tile { slot } => layout.tile_mask(slot),
        }
    }

    /// Legal action indices, ascending, without materialising a mask.
    pub fn legal_indices(self, layout: &ActionLayout) -> Vec<usize> {
        match self {
            MaskKind::Video => (0..=layout.capacity).collect(),
            MaskKind::Tile { slot } => {
                let start = 1 + layout.capacity + slot * layout.viewport_tiles;
                std::iter::once(0)
                    .chain(start..start + layout.viewport_tiles)
                    .collect()
            }
        }
    }
}

/// A decision whose successor state is not yet known: it completes at the
/// next decision point, whose observation becomes this transition's `s'`.
#[derive(Debug, Clone)]
struct OpenTransition {
    state: FeatureVector,
    action_index: usize,
    origin_set: u64,
    settle_at: u64,
}

/// A decision awaiting its delayed reward.
#[derive(Debug, Clone)]
struct PendingTransition {
    state: FeatureVector,
    action_index: usize,
    next_state: FeatureVector,
    next_mask: MaskKind,
    origin_set: u64,
    settle_at: u64,
}

/// A transition whose reward has matured.
#[derive(Debug, Clone)]
pub struct SettledTransition {
    pub state: FeatureVector,
    pub action_index: usize,
    pub reward: f64,
    pub next_state: FeatureVector,
    pub next_mask: MaskKind,
    pub origin_set: u64,
}

/// The per-SBS simulation environment.
pub struct SimEnv {
    lib: LibraryConfig,
    delay: DelayConfig,
    cfg: EnvConfig,
    viewports: Vec<Viewport>,
    layout: ActionLayout,
    cache: CacheState,
    history: RequestHistory,
    /// `delta_prefix[i+1] - delta_prefix[i]` is set `i`'s realised
    /// distortion reduction in dB.
    delta_prefix: Vec<f64>,
    open: Option<OpenTransition>,
    pending: VecDeque<PendingTransition>,
    set_index: u64,
    decisions: u64,
}

impl SimEnv {
    pub fn new(
        lib: LibraryConfig,
        delay: DelayConfig,
        cfg: EnvConfig,
        capacity: usize,
    ) -> Result<Self, ConfigError> {
        lib.validate()?;
        delay.validate()?;
        cfg.validate()?;
        if capacity < 1 {
            return Err(ConfigError::invalid("cache capacity must be >= 1"));
        }
        let viewports = lib.enumerate_viewports()?;
        let history = RequestHistory::new(cfg.short_window, cfg.long_window, &lib);
        Ok(Self {
            layout: ActionLayout::new(capacity, lib.viewport_tiles as usize),
            cache: CacheState::new(capacity),
            history,
            viewports,
            delta_prefix: vec![0.0],
            open: None,
            pending: VecDeque::new(),
            set_index: 0,
            decisions: 0,
            lib,
            delay,
            cfg,
        })
    }

    pub fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn cache(&self) -> &CacheState {
        &self.cache
    }

    pub fn history(&self) -> &RequestHistory {
        &self.history
    }

    pub fn viewports(&self) -> &[Viewport] {
        &self.viewports
    }

    pub fn library(&self) -> &LibraryConfig {
        &self.lib
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn sets_processed(&self) -> u64 {
        self.set_index
    }

    /// Realised distortion reduction of set `i`, in dB.
    pub fn delta(&self, i: u64) -> f64 {
        self.delta_prefix[i as usize + 1] - self.delta_prefix[i as usize]
    }

    fn viewport_tiles(&self, id: crate::content::ViewportId) -> &[u16] {
        &self.viewports[(id.0 - 1) as usize].tiles
    }

    fn features_for(&self, candidate: Candidate) -> FeatureVector {
        extract_features(
            &self.history,
            &self.cache,
            candidate,
            self.lib.viewport_tiles as usize,
        )
    }

    /// Runs one decision point: the observation completes the previous
    /// decision's transition (it is that transition's successor state),
    /// then the policy is queried, the mask enforced and the action applied.
    fn decide(
        &mut self,
        ctx: DecisionContext,
        policy: &mut dyn CachePolicy,
        sink: &mut dyn EventSink,
    ) -> Result<(), EnvError> {
        if let Some(open) = self.open.take() {
            let next_mask = match ctx.candidate {
                Candidate::Video(_) => MaskKind::Video,
                Candidate::Tile(..) => MaskKind::Tile {
                    slot: ctx.slot.expect("tile context carries its slot"),
                },
            };
            self.pending.push_back(PendingTransition {
                state: open.state,
                action_index: open.action_index,
                next_state: ctx.features.clone(),
                next_mask,
                origin_set: open.origin_set,
                settle_at: open.settle_at,
            });
        }
        let action_index = policy.decide(&ctx, &self.cache);
        if !ctx.mask.allows(action_index) {
            return Err(EnvError::MaskedAction(action_index));
        }
        let action = self.layout.decode(action_index);
        let action_ctx = ActionContext {
            video: ctx.video,
            initial_viewport: VirtualViewport::new(ctx.predicted_tiles.clone(), &self.lib)
                .expect("predicted viewport is a valid virtual viewport"),
            candidate_tile: ctx.candidate_tile(),
        };
        self.cache.apply_action(action, &action_ctx)?;
        self.decisions += 1;
        sink.on_event(&Event::Decision {
            set: ctx.set_index,
            kind: ctx.kind(),
            video: ctx.video,
            gop: ctx.gop,
            candidate_tile: ctx.candidate_tile(),
            action_index,
            action,
        });
        self.open = Some(OpenTransition {
            state: ctx.features.clone(),
            action_index,
            origin_set: ctx.set_index,
            settle_at: ctx.set_index + self.cfg.reward_window,
        });
        policy.applied(&ctx, action, &self.cache);
        Ok(())
    }

    /// Processes one request set end to end; returns the transitions whose
    /// rewards matured at this set.
    pub fn process_request_set(
        &mut self,
        req: &RequestSet,
        policy: &mut dyn CachePolicy,
        sink: &mut dyn EventSink,
    ) -> Result<Vec<SettledTransition>, EnvError> {
        assert_eq!(
            req.viewports.len(),
            self.lib.num_gops as usize,
            "request set must cover all GOPs"
        );
        let i = self.set_index;
        let video = req.video;
        let cached_at_start = self.cache.contains(video);
        policy.begin_set(req, &self.cache, i);

        // w0: admission decision for an uncached video. The new slot's
        // virtual viewport starts as the first GOP's predicted viewport,
        // the only tile set in hand at decision time.
        if !cached_at_start {
            let predicted_tiles = self.viewport_tiles(lsr_predict(req, 0)).to_vec();
            let ctx = DecisionContext {
                set_index: i,
                video,
                gop: None,
                candidate: Candidate::Video(video),
                slot: None,
                predicted_tiles,
                features: self.features_for(Candidate::Video(video)),
                mask: self.layout.video_mask(),
            };
            self.decide(ctx, policy, sink)?;
        }

        let mut delta_set = 0.0;
        for gop in 0..self.lib.num_gops {
            let predicted_id = lsr_predict(req, gop);
            let predicted_tiles = self.viewport_tiles(predicted_id).to_vec();
            let requested_id = req.viewports[gop as usize];
            let requested_tiles = self.viewport_tiles(requested_id).to_vec();

            // Virtual-viewport membership at GOP-processing time, as a
            // bitmask (the library caps tiles at 64).
            let vv_bits: u64 = match self.cache.slot_of(video) {
                Some(slot) => self
                    .cache
                    .slot(slot)
                    .unwrap()
                    .virtual_viewport
                    .tiles()
                    .iter()
                    .fold(0u64, |acc, &t| acc | 1 << t),
                None => 0,
            };
            let video_cached_now = self.cache.contains(video);

            let mut requested: Vec<TileKey> = (0..self.lib.num_tiles)
                .map(|tile| TileKey {
                    video,
                    gop,
                    layer: Layer::Base,
                    tile,
                })
                .collect();
            requested.extend(predicted_tiles.iter().map(|&tile| TileKey {
                video,
                gop,
                layer: Layer::Enhancement,
                tile,
            }));

            // Delivery pricing: a video admitted during this set still pays
            // backhaul rates until the set completes; tiles count as
            // cache-served only if the video was cached when the set began.
            let plan = schedule_gop_delivery(
                &requested,
                |key: TileKey| match key.layer {
                    Layer::Base => cached_at_start,
                    Layer::Enhancement => cached_at_start && (vv_bits >> key.tile) & 1 == 1,
                },
                &self.lib,
                &self.delay,
            );
            delta_set += plan.delivered_gain_db(&self.lib);

            let mut delivered_base_bits = 0u64;
            let mut delivered_enh_bits = 0u64;
            for key in &plan.delivered {
                match key.layer {
                    Layer::Base => delivered_base_bits |= 1 << key.tile,
                    Layer::Enhancement => delivered_enh_bits |= 1 << key.tile,
                }
            }
            let in_bits = |tiles: &[u16], bits: u64| {
                tiles.iter().filter(|&&t| (bits >> t) & 1 == 1).count() as u16
            };
            let enh_hits = if video_cached_now {
                in_bits(&predicted_tiles, vv_bits)
            } else {
                0
            };
            sink.on_event(&Event::Delivery {
                set: i,
                gop,
                video,
                requested_viewport: requested_id.0,
                predicted_viewport: predicted_id.0,
                base_hit: cached_at_start,
                enh_hits,
                delivered_base: plan
                    .delivered
                    .iter()
                    .filter(|k| k.layer == Layer::Base)
                    .count() as u16,
                delivered_enh: plan
                    .delivered
                    .iter()
                    .filter(|k| k.layer == Layer::Enhancement)
                    .count() as u16,
                rendered_enh: in_bits(&requested_tiles, delivered_enh_bits),
                rendered_base: in_bits(&requested_tiles, delivered_base_bits),
                backhaul_mbit: plan.backhaul_mbit,
                elapsed_s: plan.elapsed_s,
                delivered_gain_db: plan.delivered_gain_db(&self.lib),
            });

            // Sequential tile decisions for the backhaul-fetched tiles that
            // are not part of the cached virtual viewport. The candidate
            // list is fixed before the first decision of the GOP; each
            // decision sees features reflecting earlier ones.
            if let Some(slot) = self.cache.slot_of(video) {
                let candidates: Vec<u16> = predicted_tiles
                    .iter()
                    .copied()
                    .filter(|&t| (vv_bits >> t) & 1 == 0)
                    .collect();
                for tile in candidates {
                    debug_assert!(!self
                        .cache
                        .slot(slot)
                        .unwrap()
                        .virtual_viewport
                        .contains(tile));
                    let ctx = DecisionContext {
                        set_index: i,
                        video,
                        gop: Some(gop),
                        candidate: Candidate::Tile(video, tile),
                        slot: Some(slot),
                        predicted_tiles: predicted_tiles.clone(),
                        features: self.features_for(Candidate::Tile(video, tile)),
                        mask: self.layout.tile_mask(slot),
                    };
                    self.decide(ctx, policy, sink)?;
                }
            }
        }

        self.history.record_request_set(req, &self.viewports);
        let total = self.delta_prefix.last().copied().unwrap();
        self.delta_prefix.push(total + delta_set);

        let settled = self.settle(i, sink);
        for t in &settled {
            policy.settled(t);
        }
        self.set_index += 1;
        Ok(settled)
    }

    /// Matures every pending transition whose window of `H` sets has fully
    /// elapsed: reward = mean realised distortion over those sets.
    fn settle(&mut self, current_set: u64, sink: &mut dyn EventSink) -> Vec<SettledTransition> {
        let mut out = Vec::new();
        while let Some(front) = self.pending.front() {
            if front.settle_at > current_set {
                break;
            }
            let p = self.pending.pop_front().unwrap();
            let h = self.cfg.reward_window;
            let start = (p.origin_set + 1) as usize;
            let end = (p.origin_set + h) as usize;
            let reward = (self.delta_prefix[end + 1] - self.delta_prefix[start]) / h as f64;
            sink.on_event(&Event::Settlement {
                set: current_set,
                origin_set: p.origin_set,
                action_index: p.action_index,
                reward_db: reward,
            });
            out.push(SettledTransition {
                state: p.state,
                action_index: p.action_index,
                reward,
                next_state: p.next_state,
                next_mask: p.next_mask,
                origin_set: p.origin_set,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::ViewportId;
    use crate::events::NullSink;
    use crate::policy::{AlwaysNoOp, FillFirstSlot};

    fn tiny_lib() -> LibraryConfig {
        LibraryConfig {
            num_videos: 4,
            num_gops: 3,
            ..LibraryConfig::default()
        }
    }

    fn env_with(reward_window: u64) -> SimEnv {
        SimEnv::new(
            tiny_lib(),
            DelayConfig::default(),
            EnvConfig {
                short_window: 5,
                long_window: 10,
                reward_window,
            },
            2,
        )
        .unwrap()
    }

    fn req(index: u64, video: u32, vps: &[u32]) -> RequestSet {
        RequestSet {
            index,
            video,
            viewports: vps.iter().map(|&v| ViewportId(v)).collect(),
        }
    }

    #[test]
    fn noop_policy_leaves_cache_empty_and_pays_backhaul() {
        let mut env = env_with(2);
        let mut policy = AlwaysNoOp;
        let mut sink = NullSink;
        env.process_request_set(&req(0, 1, &[1, 1, 1]), &mut policy, &mut sink)
            .unwrap();
        assert!(env.cache().first_empty() == Some(0));
        // All base tiles still delivered (12 * 1/6 * 1/2 = 1.0 s), no
        // enhancement fits: 3 GOPs * 360 dB.
        assert!((env.delta(0) - 3.0 * 360.0).abs() < 1e-9);
    }

    #[test]
    fn fill_policy_installs_video_on_first_touch() {
        let mut env = env_with(2);
        let mut policy = FillFirstSlot;
        let mut sink = NullSink;
        env.process_request_set(&req(0, 3, &[2, 2, 2]), &mut policy, &mut sink)
            .unwrap();
        assert_eq!(env.cache().slot(0).unwrap().video, 3);
        // vv seeded from the first GOP's predicted (= requested) viewport.
        let vps = env.viewports().to_vec();
        assert_eq!(
            env.cache().slot(0).unwrap().virtual_viewport.tiles(),
            &vps[1].tiles[..]
        );
    }

    #[test]
    fn cached_video_with_matching_viewport_yields_no_decisions() {
        let mut env = env_with(2);
        let mut sink = NullSink;
        let mut fill = FillFirstSlot;
        env.process_request_set(&req(0, 2, &[4, 4, 4]), &mut fill, &mut sink)
            .unwrap();
        let decisions_before = env.decisions();
        let mut noop = AlwaysNoOp;
        env.process_request_set(&req(1, 2, &[4, 4, 4]), &mut noop, &mut sink)
            .unwrap();
        // Full hit on every GOP: no video decision, no tile candidates.
        assert_eq!(env.decisions(), decisions_before);
        // Full cache service delivers everything: 3 * (360 + 40) dB.
        assert!((env.delta(1) - 3.0 * 400.0).abs() < 1e-9);
    }

    #[test]
    fn rewards_settle_after_the_window_with_mean_delta() {
        let mut env = env_with(2);
        let mut policy = AlwaysNoOp;
        let mut sink = NullSink;
        let settled0 = env
            .process_request_set(&req(0, 1, &[1, 1, 1]), &mut policy, &mut sink)
            .unwrap();
        assert!(settled0.is_empty());
        let settled1 = env
            .process_request_set(&req(1, 2, &[1, 1, 1]), &mut policy, &mut sink)
            .unwrap();
        assert!(settled1.is_empty());
        let settled2 = env
            .process_request_set(&req(2, 3, &[1, 1, 1]), &mut policy, &mut sink)
            .unwrap();
        // Decision from set 0 settles at set 2 with mean of deltas 1..=2.
        assert_eq!(settled2.len(), 1);
        let expected = (env.delta(1) + env.delta(2)) / 2.0;
        assert!((settled2[0].reward - expected).abs() < 1e-9);
        assert_eq!(settled2[0].origin_set, 0);
    }

    #[test]
    fn single_set_window_settles_next_set() {
        let mut env = env_with(1);
        let mut policy = AlwaysNoOp;
        let mut sink = NullSink;
        env.process_request_set(&req(0, 1, &[1, 1, 1]), &mut policy, &mut sink)
            .unwrap();
        let settled = env
            .process_request_set(&req(1, 2, &[1, 1, 1]), &mut policy, &mut sink)
            .unwrap();
        assert_eq!(settled.len(), 1);
        assert!((settled[0].reward - env.delta(1)).abs() < 1e-9);
    }

    #[test]
    fn masked_action_is_a_contract_violation() {
        struct Rogue;
        impl CachePolicy for Rogue {
            fn name(&self) -> &'static str {
                "rogue"
            }
            fn decide(&mut self, ctx: &DecisionContext, _cache: &CacheState) -> usize {
                ctx.mask.len() - 1 // a tile action of the last slot
            }
        }
        let mut env = env_with(1);
        let mut sink = NullSink;
        let err = env
            .process_request_set(&req(0, 1, &[1, 1, 1]), &mut Rogue, &mut sink)
            .unwrap_err();
        assert!(matches!(err, EnvError::MaskedAction(_)));
    }

    #[test]
    fn soft_hit_generates_one_decision_per_missing_tile() {
        let mut env = env_with(2);
        let mut sink = NullSink;
        let mut fill = FillFirstSlot;
        // Viewport 1 tiles {0,1,4,5}; viewport 3 tiles {2,3,6,7}: disjoint.
        env.process_request_set(&req(0, 2, &[1, 1, 1]), &mut fill, &mut sink)
            .unwrap();
        let before = env.decisions();
        let mut noop = AlwaysNoOp;
        env.process_request_set(&req(1, 2, &[3, 3, 3]), &mut noop, &mut sink)
            .unwrap();
        // GOP 0 predicts viewport 3 (requested): 4 missing tiles; GOPs 1-2
        // predict viewport 3 again: still missing under a no-op policy.
        assert_eq!(env.decisions() - before, 12);
    }
}
