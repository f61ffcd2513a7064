//! Experiment runner: seeding, policy construction, the offline/online
//! schedule, metric aggregation, parameter sweeps and CSV emission.

use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::baselines::BaselinePolicy;
use crate::config::ExperimentConfig;
use crate::dqn::{DqnAgent, Phase};
use crate::env::SimEnv;
use crate::error::{ConfigError, EnvError, TraceError};
use crate::events::{EventSink, JsonlSink, TeeSink};
use crate::metrics::{MetricsAggregator, MetricsRecord};
use crate::policy::{AlwaysNoOp, CachePolicy, OraclePolicy};
use crate::seeds::Stream;
use crate::workload::{ingest_trajectories, TrajectoryTable, ViewportDist, WorkloadGenerator};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn io_err(path: impl Into<std::path::PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Runs one experiment end to end and, when an output directory is set,
/// writes `summary.csv`, `sweep.csv`, `viewport_hist.csv`, `tile_hist.csv`,
/// `loss.csv` and `cache_snapshot.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsRecord, HarnessError> {
    cfg.validate()?;
    let table = load_table(cfg)?;
    let record = run_policy(cfg, &table)?;
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_summary(dir, std::slice::from_ref(&record))?;
        let single = [SweepPoint {
            axis: "none".into(),
            value: 0.0,
            record: record.clone(),
        }];
        write_sweep(dir, &single)?;
        write_histograms(dir, &record)?;
        write_loss(dir, &record)?;
        write_snapshot(dir, &record)?;
    }
    Ok(record)
}

fn load_table(cfg: &ExperimentConfig) -> Result<Option<TrajectoryTable>, HarnessError> {
    if !matches!(cfg.workload.viewport_dist, ViewportDist::Trace) {
        return Ok(None);
    }
    let path = cfg
        .trace_path
        .as_ref()
        .expect("validated: trace mode has a path");
    Ok(Some(ingest_trajectories(path, &cfg.library, cfg.seed)?))
}

fn run_policy(
    cfg: &ExperimentConfig,
    table: &Option<TrajectoryTable>,
) -> Result<MetricsRecord, HarnessError> {
    match cfg.policy.as_str() {
        "dqn" => {
            let mut agent = offline_phase_with_table(cfg, table)?;
            let mut record = run_online(cfg, table, &mut agent)?;
            record.loss_series = agent.loss_log().to_vec();
            Ok(record)
        }
        "lfu" => run_online(cfg, table, &mut BaselinePolicy::lfu(cfg.capacity())),
        "lru" => run_online(cfg, table, &mut BaselinePolicy::lru(cfg.capacity())),
        "fifo" => run_online(cfg, table, &mut BaselinePolicy::fifo(cfg.capacity())),
        "noop" => run_online(cfg, table, &mut AlwaysNoOp),
        "oracle" => {
            let (target_video, target_tiles) = oracle_targets(cfg, table)?;
            run_online(
                cfg,
                table,
                &mut OraclePolicy {
                    target_video,
                    target_tiles,
                },
            )
        }
        other => Err(ConfigError::invalid(format!("unknown policy {other:?}")).into()),
    }
}

/// Builds the DQN agent and runs the offline phase: pure-exploration
/// collection over a warm-up stream long enough for `warmup_sets` decisions'
/// rewards to mature, then epochs of minibatch training on the buffer.
/// Returns the agent trained and switched to the online phase.
pub fn offline_phase(cfg: &ExperimentConfig) -> Result<DqnAgent, HarnessError> {
    let table = load_table(cfg)?;
    offline_phase_with_table(cfg, &table)
}

fn offline_phase_with_table(
    cfg: &ExperimentConfig,
    table: &Option<TrajectoryTable>,
) -> Result<DqnAgent, HarnessError> {
    let mut agent = DqnAgent::new(
        cfg.trainer.clone(),
        cfg.capacity(),
        cfg.library.viewport_tiles as usize,
        cfg.seed,
    )?;
    if cfg.trainer.warmup_sets == 0 {
        return Err(ConfigError::invalid("warm-up of zero sets cannot fill the replay buffer").into());
    }
    let mut env = SimEnv::new(
        cfg.library.clone(),
        cfg.delay,
        cfg.env,
        cfg.capacity(),
    )?;
    let mut generator = WorkloadGenerator::with_stream(
        cfg.resolved_workload(),
        &cfg.library,
        table.clone(),
        Stream::WarmupWorkload,
    )?;
    let mut sink = crate::events::NullSink;
    // Rewards settle `H` sets late; run the collection stream long enough
    // that every warm-up decision's reward matures.
    let collect_sets = cfg.trainer.warmup_sets + cfg.env.reward_window;
    for _ in 0..collect_sets {
        let req = generator.next_set()?;
        env.process_request_set(&req, &mut agent, &mut sink)?;
    }
    agent.offline_train()?;
    agent.set_phase(Phase::Online);
    Ok(agent)
}

/// Runs the online evaluation: `W` request sets against a fresh environment.
fn run_online(
    cfg: &ExperimentConfig,
    table: &Option<TrajectoryTable>,
    policy: &mut dyn CachePolicy,
) -> Result<MetricsRecord, HarnessError> {
    let start = Instant::now();
    let mut env = SimEnv::new(
        cfg.library.clone(),
        cfg.delay,
        cfg.env,
        cfg.capacity(),
    )?;
    let mut generator =
        WorkloadGenerator::new(cfg.resolved_workload(), &cfg.library, table.clone())?;
    let mut agg = MetricsAggregator::new(&cfg.library);

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    match cfg.events_path() {
        Some(path) => {
            let file = std::fs::File::create(&path).map_err(io_err(&path))?;
            let mut jsonl = JsonlSink::new(BufWriter::new(file));
            let mut tee = TeeSink {
                first: &mut agg,
                second: &mut jsonl,
            };
            drive(&mut env, &mut generator, policy, &mut tee)?;
            jsonl.into_inner().flush().map_err(io_err(&path))?;
        }
        None => drive(&mut env, &mut generator, policy, &mut agg)?,
    }

    Ok(MetricsRecord {
        policy: policy.name().to_string(),
        seed: cfg.seed,
        capacity: cfg.capacity(),
        sets: env.sets_processed(),
        mean_psnr_db: agg.mean_psnr_db(),
        hit_ratio: agg.hit_ratio(),
        backhaul_gb: agg.backhaul_gb(),
        eq1_violations: agg.eq1_violations(),
        decisions: env.decisions(),
        total_delta_db: agg.total_delta_db(),
        viewport_requests: agg.viewport_requests().to_vec(),
        tile_requests: agg.tile_requests().to_vec(),
        loss_series: Vec::new(),
        cache_snapshot: env.cache().snapshot(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn drive(
    env: &mut SimEnv,
    generator: &mut WorkloadGenerator,
    policy: &mut dyn CachePolicy,
    sink: &mut dyn EventSink,
) -> Result<(), HarnessError> {
    for _ in 0..generator.total_sets() {
        let req = generator.next_set()?;
        env.process_request_set(&req, policy, sink)?;
    }
    Ok(())
}

/// Exact expected-popularity targets for the clairvoyant oracle policy:
/// the rank-1 video and its `k` most requested tiles.
fn oracle_targets(
    cfg: &ExperimentConfig,
    table: &Option<TrajectoryTable>,
) -> Result<(u32, Vec<u16>), HarnessError> {
    let target_video = 0u32; // Zipf rank 1.
    let viewports = cfg.library.enumerate_viewports()?;
    let probs: Vec<f64> = match &cfg.workload.viewport_dist {
        ViewportDist::Zipf { eta_p } => {
            let w: Vec<f64> = (1..=viewports.len())
                .map(|r| (r as f64).powf(-eta_p))
                .collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        }
        ViewportDist::Selective { id } => {
            let mut p = vec![0.0; viewports.len()];
            p[(id.0 - 1) as usize] = 1.0;
            p
        }
        ViewportDist::Weighted { weights } => {
            let total: f64 = weights.iter().sum();
            weights.iter().map(|w| w / total).collect()
        }
        ViewportDist::Trace => {
            let table = table.as_ref().expect("trace mode has a table");
            let mut counts = vec![0.0; viewports.len()];
            for vp in table.viewports_for(target_video, cfg.library.num_gops) {
                counts[(vp.0 - 1) as usize] += 1.0;
            }
            let total: f64 = counts.iter().sum();
            counts.into_iter().map(|c| c / total).collect()
        }
    };
    let mut scores: Vec<(u16, f64)> = (0..cfg.library.num_tiles)
        .map(|tile| {
            let s = viewports
                .iter()
                .zip(&probs)
                .filter(|(vp, _)| vp.tiles.contains(&tile))
                .map(|(_, p)| p)
                .sum();
            (tile, s)
        })
        .collect();
    scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let tiles = scores
        .iter()
        .take(cfg.library.viewport_tiles as usize)
        .map(|&(t, _)| t)
        .collect();
    Ok((target_video, tiles))
}

/// Sweep axis selectable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Cache size as a percentage of the library.
    Cache,
    /// Video-popularity Zipf shape.
    EtaV,
    /// Viewport-popularity Zipf shape.
    EtaP,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        match name {
            "cache" => Ok(Self::Cache),
            "eta_v" => Ok(Self::EtaV),
            "eta_p" => Ok(Self::EtaP),
            other => Err(ConfigError::invalid(format!(
                "unknown sweep axis {other:?}; expected cache|eta_v|eta_p"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Cache => "cache",
            Self::EtaV => "eta_v",
            Self::EtaP => "eta_p",
        }
    }

    /// Applies one sweep value to a copy of the base config.
    pub fn apply(&self, cfg: &ExperimentConfig, value: f64) -> ExperimentConfig {
        let mut out = cfg.clone();
        match self {
            Self::Cache => out.cache_fraction = value / 100.0,
            Self::EtaV => out.workload.eta_v = value,
            Self::EtaP => out.workload.viewport_dist = ViewportDist::Zipf { eta_p: value },
        }
        out
    }
}

/// One completed sweep run.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub axis: String,
    pub value: f64,
    pub record: MetricsRecord,
}

/// Runs the full sweep grid: every (value, policy, seed) combination with
/// matched workload seeds across policies. Results arrive in sweep-key
/// order.
pub fn run_sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    policies: &[String],
    seeds: &[u64],
) -> Result<Vec<SweepPoint>, HarnessError> {
    if values.is_empty() {
        return Err(ConfigError::invalid("sweep needs at least one value").into());
    }
    let mut out = Vec::new();
    for &value in values {
        for policy in policies {
            for &seed in seeds {
                let mut cfg = axis.apply(base, value);
                cfg.policy = policy.clone();
                cfg.seed = seed;
                cfg.out_dir = None;
                let record = {
                    let table = load_table(&cfg)?;
                    run_policy(&cfg, &table)?
                };
                out.push(SweepPoint {
                    axis: axis.name().to_string(),
                    value,
                    record,
                });
            }
        }
    }
    if let Some(dir) = &base.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_sweep(dir, &out)?;
        let records: Vec<MetricsRecord> = out.iter().map(|p| p.record.clone()).collect();
        write_summary(dir, &records)?;
    }
    Ok(out)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<std::fs::File>, HarnessError> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        std::fs::File::create(&path).map_err(io_err(&path))?,
    ))
}

pub fn write_summary(dir: &Path, records: &[MetricsRecord]) -> Result<(), HarnessError> {
    let mut f = create(dir, "summary.csv")?;
    let fail = io_err(dir.join("summary.csv"));
    (|| -> std::io::Result<()> {
        writeln!(
            f,
            "policy,seed,capacity,sets,y_psnr_db,hit_ratio,backhaul_gb,eq1_violations,decisions,total_delta_db"
        )?;
        for r in records {
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{}",
                r.policy,
                r.seed,
                r.capacity,
                r.sets,
                r.mean_psnr_db,
                r.hit_ratio,
                r.backhaul_gb,
                r.eq1_violations,
                r.decisions,
                r.total_delta_db
            )?;
        }
        f.flush()
    })()
    .map_err(fail)
}

pub fn write_sweep(dir: &Path, points: &[SweepPoint]) -> Result<(), HarnessError> {
    let mut f = create(dir, "sweep.csv")?;
    let fail = io_err(dir.join("sweep.csv"));
    (|| -> std::io::Result<()> {
        writeln!(f, "axis,value,policy,seed,capacity,y_psnr_db,hit_ratio,backhaul_gb")?;
        for p in points {
            let r = &p.record;
            writeln!(
                f,
                "{},{},{},{},{},{},{},{}",
                p.axis, p.value, r.policy, r.seed, r.capacity, r.mean_psnr_db, r.hit_ratio, r.backhaul_gb
            )?;
        }
        f.flush()
    })()
    .map_err(fail)
}

fn write_histograms(dir: &Path, record: &MetricsRecord) -> Result<(), HarnessError> {
    let mut f = create(dir, "viewport_hist.csv")?;
    (|| -> std::io::Result<()> {
        writeln!(f, "viewport_id,requests")?;
        for (i, c) in record.viewport_requests.iter().enumerate() {
            writeln!(f, "{},{}", i + 1, c)?;
        }
        f.flush()
    })()
    .map_err(io_err(&dir.join("viewport_hist.csv")))?;

    let mut f = create(dir, "tile_hist.csv")?;
    (|| -> std::io::Result<()> {
        writeln!(f, "tile,requests")?;
        for (i, c) in record.tile_requests.iter().enumerate() {
            writeln!(f, "{},{}", i, c)?;
        }
        f.flush()
    })()
    .map_err(io_err(&dir.join("tile_hist.csv")))
}

fn write_loss(dir: &Path, record: &MetricsRecord) -> Result<(), HarnessError> {
    let mut f = create(dir, "loss.csv")?;
    (|| -> std::io::Result<()> {
        writeln!(f, "phase,epoch_or_step,loss")?;
        for p in &record.loss_series {
            writeln!(f, "{},{},{}", p.phase, p.step, p.loss)?;
        }
        f.flush()
    })()
    .map_err(io_err(&dir.join("loss.csv")))
}

fn write_snapshot(dir: &Path, record: &MetricsRecord) -> Result<(), HarnessError> {
    let path = dir.join("cache_snapshot.json");
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &record.cache_snapshot)
        .map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })
}

/// Pivots `sweep.csv` in `dir` into plot-ready per-metric tables
/// (`report_y_psnr_db.csv`, `report_hit_ratio.csv`, `report_backhaul_gb.csv`):
/// one row per sweep value, one column per policy, seeds averaged.
pub fn write_report(dir: &Path) -> Result<(), HarnessError> {
    let path = dir.join("sweep.csv");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(HarnessError::Io {
                path: path.display().to_string(),
                source: std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("sweep.csv line {}: expected 8 fields", i + 1),
                ),
            });
        }
        let parse = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
        rows.push((
            fields[0].to_string(),
            parse(fields[1]),
            fields[2].to_string(),
            [parse(fields[5]), parse(fields[6]), parse(fields[7])],
        ));
    }
    let mut policies: Vec<String> = rows.iter().map(|r| r.2.clone()).collect();
    policies.sort();
    policies.dedup();
    let mut values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();

    for (mi, metric) in ["y_psnr_db", "hit_ratio", "backhaul_gb"].iter().enumerate() {
        let name = format!("report_{metric}.csv");
        let mut f = create(dir, &name)?;
        (|| -> std::io::Result<()> {
            writeln!(f, "value,{}", policies.join(","))?;
            for &v in &values {
                let mut cells = vec![format!("{v}")];
                for p in &policies {
                    let vals: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.1 == v && &r.2 == p)
                        .map(|r| r.3[mi])
                        .collect();
                    let mean = if vals.is_empty() {
                        f64::NAN
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    };
                    cells.push(format!("{mean}"));
                }
                writeln!(f, "{}", cells.join(","))?;
            }
            f.flush()
        })()
        .map_err(io_err(&dir.join(&name)))?;
    }
    Ok(())
}
