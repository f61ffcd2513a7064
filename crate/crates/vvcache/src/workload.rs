//! Request-set generation: synthetic Zipf workloads and trace replay, plus
//! the last-sample-replication (LSR) viewport predictor.
//!
//! One request set is the bundle a user issues for one video: an implicit
//! whole-video base-quality demand plus, for every GOP `g`, a high-quality
//! demand for the viewport watched at `g`.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::content::{LibraryConfig, ViewportId};
use crate::error::{ConfigError, TraceError};
use crate::seeds::{rng_for, Stream};

/// One user's demand for one video: the base-quality whole-video request is
/// implicit; `viewports[g]` is the viewport requested for GOP `g` (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestSet {
    pub index: u64,
    pub video: u32,
    pub viewports: Vec<ViewportId>,
}

/// How per-GOP viewports are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ViewportDist {
    /// Zipf over viewport ids, rank = id (viewport 1 is rank 1).
    Zipf { eta_p: f64 },
    /// Every request is for one fixed viewport.
    Selective { id: ViewportId },
    /// Arbitrary categorical weights indexed by viewport id - 1.
    Weighted { weights: Vec<f64> },
    /// Replay per-video head-movement trajectories from a trace file.
    Trace,
}

/// Workload parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    /// Zipf shape for video popularity; 0 = uniform.
    pub eta_v: f64,
    pub viewport_dist: ViewportDist,
    /// Total request sets in a run (`W`).
    pub total_sets: u64,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            eta_v: 1.0,
            viewport_dist: ViewportDist::Zipf { eta_p: 1.0 },
            total_sets: 10_000,
            seed: 0,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self, lib: &LibraryConfig) -> Result<(), ConfigError> {
        if self.total_sets < 1 {
            return Err(ConfigError::invalid("request_sets must be >= 1"));
        }
        if self.eta_v < 0.0 {
            return Err(ConfigError::invalid("eta_v must be >= 0"));
        }
        let num_vps = lib.enumerate_viewports()?.len() as u32;
        match &self.viewport_dist {
            ViewportDist::Zipf { eta_p } => {
                if *eta_p < 0.0 {
                    return Err(ConfigError::invalid("eta_p must be >= 0"));
                }
            }
            ViewportDist::Selective { id } => {
                if id.0 < 1 || id.0 > num_vps {
                    return Err(ConfigError::invalid(format!(
                        "selective viewport id {} outside 1..={num_vps}",
                        id.0
                    )));
                }
            }
            ViewportDist::Weighted { weights } => {
                if weights.len() != num_vps as usize {
                    return Err(ConfigError::invalid(format!(
                        "viewport_weights needs {num_vps} entries"
                    )));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(ConfigError::invalid("viewport_weights must be >= 0, sum > 0"));
                }
            }
            ViewportDist::Trace => {}
        }
        Ok(())
    }
}

/// Cumulative table for sampling a Zipf (or arbitrary categorical) law.
#[derive(Debug, Clone)]
struct Categorical {
    cumulative: Vec<f64>,
}

impl Categorical {
    fn zipf(n: usize, eta: f64) -> Self {
        Self::from_weights((1..=n).map(|rank| (rank as f64).powf(-eta)))
    }

    fn from_weights(weights: impl Iterator<Item = f64>) -> Self {
        let mut cumulative: Vec<f64> = Vec::new();
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    /// Samples an index in `[0, n)`; rank 0 is the most likely.
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let u: f64 = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u)
    }

    fn prob(&self, idx: usize) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let prev = if idx == 0 { 0.0 } else { self.cumulative[idx - 1] };
        (self.cumulative[idx] - prev) / total
    }
}

/// Per-GOP viewport trajectories sampled from a head-movement dataset,
/// plus the library-video -> trajectory assignment.
#[derive(Debug, Clone)]
pub struct TrajectoryTable {
    /// (dataset video, trajectory id) -> per-GOP viewport ids.
    trajectories: BTreeMap<(u32, u32), Vec<ViewportId>>,
    /// library video index -> key into `trajectories`.
    assignment: Vec<(u32, u32)>,
}

impl TrajectoryTable {
    /// Number of distinct trajectories in the table.
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// The trajectory assigned to a library video, truncated to `G` GOPs.
    pub fn viewports_for(&self, video: u32, num_gops: u32) -> &[ViewportId] {
        let key = self.assignment[video as usize];
        &self.trajectories[&key][..num_gops as usize]
    }
}

/// Reads a trace CSV (`dataset_video,trajectory,gop,viewport_id`) and assigns
/// every library video a (dataset video, trajectory) pair uniformly at
/// random: first the dataset video, then one of its trajectories.
pub fn ingest_trajectories(
    path: &Path,
    lib: &LibraryConfig,
    seed: u64,
) -> Result<TrajectoryTable, TraceError> {
    let file = std::fs::File::open(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let num_vps = lib
        .enumerate_viewports()
        .map_err(|e| TraceError::Malformed {
            row: 0,
            reason: e.to_string(),
        })?
        .len() as u32;

    // (video, trajectory) -> gop -> viewport id. Rows need not be sorted.
    let mut raw: BTreeMap<(u32, u32), BTreeMap<u32, ViewportId>> = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let row = lineno + 1;
        let line = line.map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if row == 1 {
            if line != "dataset_video,trajectory,gop,viewport_id" {
                return Err(TraceError::Malformed {
                    row,
                    reason: format!("expected header dataset_video,trajectory,gop,viewport_id, got {line:?}"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(TraceError::Malformed {
                row,
                reason: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, name: &str| -> Result<u32, TraceError> {
            s.trim().parse().map_err(|_| TraceError::Malformed {
                row,
                reason: format!("cannot parse {name} {s:?}"),
            })
        };
        let video = parse(fields[0], "dataset_video")?;
        let traj = parse(fields[1], "trajectory")?;
        let gop = parse(fields[2], "gop")?;
        let vp = parse(fields[3], "viewport_id")?;
        if vp < 1 || vp > num_vps {
            return Err(TraceError::Malformed {
                row,
                reason: format!("viewport_id {vp} outside 1..={num_vps}"),
            });
        }
        if raw
            .entry((video, traj))
            .or_default()
            .insert(gop, ViewportId(vp))
            .is_some()
        {
            return Err(TraceError::Malformed {
                row,
                reason: format!("duplicate gop {gop} for trajectory ({video}, {traj})"),
            });
        }
    }
    if raw.is_empty() {
        return Err(TraceError::Empty);
    }

    let mut trajectories = BTreeMap::new();
    for ((video, traj), gops) in raw {
        let seq: Vec<ViewportId> = gops.into_values().collect();
        if seq.len() < lib.num_gops as usize {
            return Err(TraceError::TooShort {
                video,
                trajectory: traj,
                len: seq.len(),
                need: lib.num_gops as usize,
            });
        }
        trajectories.insert((video, traj), seq);
    }

    // Group trajectories per dataset video for the two-stage assignment.
    let mut by_video: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for key in trajectories.keys() {
        by_video.entry(key.0).or_default().push(*key);
    }
    let videos: Vec<u32> = by_video.keys().copied().collect();
    let mut rng = rng_for(seed, Stream::TraceMapping);
    let assignment = (0..lib.num_videos)
        .map(|_| {
            let dv = videos[rng.gen_range(0..videos.len())];
            let options = &by_video[&dv];
            options[rng.gen_range(0..options.len())]
        })
        .collect();

    Ok(TrajectoryTable {
        trajectories,
        assignment,
    })
}

/// Stateful generator producing the deterministic stream of request sets.
pub struct WorkloadGenerator {
    cfg: WorkloadConfig,
    num_gops: u32,
    videos: Categorical,
    viewports: Option<Categorical>,
    selective: Option<ViewportId>,
    table: Option<TrajectoryTable>,
    rng: ChaCha8Rng,
    next_index: u64,
}

impl WorkloadGenerator {
    /// Builds a generator. Trace mode requires `table`.
    pub fn new(
        cfg: WorkloadConfig,
        lib: &LibraryConfig,
        table: Option<TrajectoryTable>,
    ) -> Result<Self, ConfigError> {
        Self::with_stream(cfg, lib, table, Stream::Workload)
    }

    /// As `new`, but drawing from a different RNG stream; warm-up runs use
    /// this to explore traffic distinct from the evaluation stream.
    pub fn with_stream(
        cfg: WorkloadConfig,
        lib: &LibraryConfig,
        table: Option<TrajectoryTable>,
        stream: Stream,
    ) -> Result<Self, ConfigError> {
        cfg.validate(lib)?;
        let num_vps = lib.enumerate_viewports()?.len();
        let (viewports, selective) = match &cfg.viewport_dist {
            ViewportDist::Zipf { eta_p } => (Some(Categorical::zipf(num_vps, *eta_p)), None),
            ViewportDist::Weighted { weights } => (
                Some(Categorical::from_weights(weights.iter().copied())),
                None,
            ),
            ViewportDist::Selective { id } => (None, Some(*id)),
            ViewportDist::Trace => {
                if table.is_none() {
                    return Err(ConfigError::invalid(
                        "trace viewport mode requires a trajectory table",
                    ));
                }
                (None, None)
            }
        };
        Ok(Self {
            rng: rng_for(cfg.seed, stream),
            videos: Categorical::zipf(lib.num_videos as usize, cfg.eta_v),
            viewports,
            selective,
            table,
            num_gops: lib.num_gops,
            cfg,
            next_index: 0,
        })
    }

    /// Probability that video `v` is requested (Zipf over 1-based rank).
    pub fn video_prob(&self, v: u32) -> f64 {
        self.videos.prob(v as usize)
    }

    /// Draws one video index.
    pub fn sample_video(&mut self) -> u32 {
        self.videos.sample(&mut self.rng) as u32
    }

    /// Draws one viewport id from the configured distribution.
    ///
    /// Trace workloads carry their viewports in the trajectory table and
    /// must not use this sampler.
    pub fn sample_viewport(&mut self) -> Result<ViewportId, ConfigError> {
        if let Some(id) = self.selective {
            return Ok(id);
        }
        match &self.viewports {
            Some(table) => Ok(ViewportId(table.sample(&mut self.rng) as u32 + 1)),
            None => Err(ConfigError::invalid(
                "sample_viewport is not applicable in trace mode",
            )),
        }
    }

    /// Produces the next request set in the stream.
    pub fn next_set(&mut self) -> Result<RequestSet, ConfigError> {
        let index = self.next_index;
        self.next_index += 1;
        let video = self.sample_video();
        let viewports = match &self.cfg.viewport_dist {
            ViewportDist::Trace => self
                .table
                .as_ref()
                .expect("validated at construction")
                .viewports_for(video, self.num_gops)
                .to_vec(),
            _ => (0..self.num_gops)
                .map(|_| self.sample_viewport())
                .collect::<Result<_, _>>()?,
        };
        Ok(RequestSet {
            index,
            video,
            viewports,
        })
    }

    pub fn total_sets(&self) -> u64 {
        self.cfg.total_sets
    }
}

/// Last-sample-replication viewport prediction.
///
/// The predicted viewport for the first GOP is the one actually requested;
/// for every later GOP it is the viewport requested at the previous GOP.
/// `gop` is 0-based.
pub fn lsr_predict(req: &RequestSet, gop: u32) -> ViewportId {
    assert!(
        (gop as usize) < req.viewports.len(),
        "gop {gop} out of range for {}-GOP request set",
        req.viewports.len()
    );
    if gop == 0 {
        req.viewports[0]
    } else {
        req.viewports[gop as usize - 1]
    }
}
