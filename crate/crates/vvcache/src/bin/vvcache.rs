//! Command-line front end: run one experiment, sweep a parameter axis, or
//! pivot sweep results into plot-ready tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vvcache::config::ExperimentConfig;
use vvcache::harness::{run_experiment, run_sweep, write_report, SweepAxis};

#[derive(Parser)]
#[command(name = "vvcache", version, about = "Edge-caching simulator for tiled 360-degree video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment and write its metrics.
    Run {
        /// Key-value config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Policy override: dqn|lfu|lru|fifo|noop|oracle.
        #[arg(long)]
        policy: Option<String>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the raw JSON-lines event stream here.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Run a sweep over one axis for one or more policies and seeds.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Axis: cache (percent of the library) | eta_v | eta_p.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values, e.g. 5,10,15,20,25.
        #[arg(long)]
        values: String,
        /// Comma-separated policies; defaults to the config's policy.
        #[arg(long)]
        policies: Option<String>,
        /// Comma-separated seeds; defaults to the config's seed.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pivot a sweep directory into per-metric plot-ready CSV tables.
    Report {
        /// Directory containing sweep.csv.
        #[arg(long, name = "in")]
        input: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, String> {
    match path {
        Some(p) => ExperimentConfig::from_file(p).map_err(|e| e.to_string()),
        None => Ok(ExperimentConfig::default()),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, String> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| format!("cannot parse {what} value {v:?}"))
        })
        .collect()
}

fn run() -> Result<(), String> {
    match Cli::parse().command {
        Command::Run {
            config,
            policy,
            seed,
            out,
            events,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(p) = policy {
                cfg.policy = p;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            cfg.events_path = events;
            cfg.validate().map_err(|e| e.to_string())?;
            let record = run_experiment(&cfg).map_err(|e| e.to_string())?;
            println!(
                "policy={} seed={} capacity={} sets={} y_psnr_db={:.4} hit_ratio={:.4} backhaul_gb={:.4} decisions={} wall_s={:.1}",
                record.policy,
                record.seed,
                record.capacity,
                record.sets,
                record.mean_psnr_db,
                record.hit_ratio,
                record.backhaul_gb,
                record.decisions,
                record.wall_time_s
            );
            if let Some(dir) = &cfg.out_dir {
                println!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::Sweep {
            config,
            axis,
            values,
            policies,
            seeds,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            let axis = SweepAxis::parse(&axis).map_err(|e| e.to_string())?;
            let values: Vec<f64> = parse_list(&values, "axis")?;
            let policies: Vec<String> = match policies {
                Some(p) => p.split(',').map(|s| s.trim().to_string()).collect(),
                None => vec![cfg.policy.clone()],
            };
            let seeds: Vec<u64> = match seeds {
                Some(s) => parse_list(&s, "seed")?,
                None => vec![cfg.seed],
            };
            let points = run_sweep(&cfg, axis, &values, &policies, &seeds)
                .map_err(|e| e.to_string())?;
            for p in &points {
                println!(
                    "{}={} policy={} seed={} y_psnr_db={:.4} hit_ratio={:.4} backhaul_gb={:.4}",
                    p.axis,
                    p.value,
                    p.record.policy,
                    p.record.seed,
                    p.record.mean_psnr_db,
                    p.record.hit_ratio,
                    p.record.backhaul_gb
                );
            }
            if let Some(dir) = &cfg.out_dir {
                println!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::Report { input } => {
            write_report(&input).map_err(|e| e.to_string())?;
            println!("wrote reports under {}", input.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
