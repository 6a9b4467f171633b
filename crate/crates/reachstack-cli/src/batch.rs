//! Episode batch execution and file emission.
//!
//! Episodes of a batch are independent and run in parallel; results are
//! collected in seed order, so outputs are byte-for-byte reproducible from
//! `(config, base seed)`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use reachstack_core::hji::ValueFunction;
use reachstack_core::metrics::{aggregate, window_points, AggregateStats, MetricsRecord};
use reachstack_core::sim::{run_episode, EpisodeResult};

use crate::config::RunConfig;
use crate::error::AppError;

/// Seconds per trade-off window in the aggregate document.
pub const WINDOW_SECONDS: f64 = 10.0;

/// The per-configuration JSON document emitted next to the episode CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateDoc {
    pub name: String,
    pub planner: String,
    pub controller: String,
    pub scheme: String,
    pub episodes: usize,
    pub base_seed: u64,
    pub stats: AggregateStats,
    /// Per-window `(mean speed, 1st-percentile TTC)` points pooled over all
    /// episodes, in episode order.
    pub windows: Vec<[f64; 2]>,
}

#[derive(Debug)]
pub struct BatchResult {
    pub doc: AggregateDoc,
    pub episodes: Vec<EpisodeResult>,
}

/// Run every episode of the configuration and pool the statistics.
pub fn run_batch(cfg: &RunConfig, vf: Option<&ValueFunction>) -> Result<BatchResult, AppError> {
    let configs: Vec<_> = (0..cfg.scenario.episodes)
        .map(|i| cfg.episode_config(cfg.scenario.base_seed + i as u64))
        .collect();
    let episodes: Vec<EpisodeResult> = configs
        .par_iter()
        .map(|ec| run_episode(ec, vf))
        .collect::<Result<_, _>>()?;

    let pooled: Vec<MetricsRecord> = episodes
        .iter()
        .flat_map(|e| e.records.iter().copied())
        .collect();
    let stats = aggregate(&pooled)
        .map_err(|e| AppError::Config(format!("no samples to aggregate: {e}")))?;
    let windows = episodes
        .iter()
        .flat_map(|e| window_points(&e.records, WINDOW_SECONDS))
        .map(|(v, t)| [v, t])
        .collect();

    Ok(BatchResult {
        doc: AggregateDoc {
            name: cfg.config_name(),
            planner: cfg.planner_label().to_string(),
            controller: cfg.controller_label().to_string(),
            scheme: cfg.scheme_label().to_string(),
            episodes: cfg.scenario.episodes,
            base_seed: cfg.scenario.base_seed,
            stats,
            windows,
        },
        episodes,
    })
}

pub const EPISODE_CSV_HEADER: &str =
    "t,ttc,btn,stn,v_r,abs_a_r,intervened,min_pair_value,collision_event";

pub fn episode_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 64);
    out.push_str(EPISODE_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.ttc,
            r.btn,
            r.stn,
            r.v_r,
            r.abs_a_r,
            r.intervened as u8,
            r.min_pair_value,
            r.collision as u8,
        );
    }
    out
}

/// Write per-episode CSVs plus the aggregate JSON; returns the written paths.
pub fn write_batch(out_dir: &Path, result: &BatchResult) -> Result<Vec<PathBuf>, AppError> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (i, episode) in result.episodes.iter().enumerate() {
        let path = out_dir.join(format!("{}_ep{:03}.csv", result.doc.name, i));
        fs::write(&path, episode_csv(&episode.records))?;
        written.push(path);
    }
    let agg_path = out_dir.join(format!("{}_aggregate.json", result.doc.name));
    let json = serde_json::to_string_pretty(&result.doc)
        .map_err(|e| AppError::Config(e.to_string()))?;
    fs::write(&agg_path, json + "\n")?;
    written.push(agg_path);
    Ok(written)
}
