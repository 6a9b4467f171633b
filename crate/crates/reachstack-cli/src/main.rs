//! `reachstack` command line tool.
//!
//! Subcommands: `brt compute` solves and caches the pairwise value table,
//! `sim run` executes an episode batch for one planner/controller
//! configuration, `report` renders statistics tables and trade-off plot data
//! from aggregate files.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use reachstack_cli::batch::{run_batch, write_batch};
use reachstack_cli::config::{load_config, RunConfig};
use reachstack_cli::error::AppError;
use reachstack_cli::report::{load_aggregates, write_report};
use reachstack_cli::table_io::{read_table, resolve_table_path, write_table, Precision};
use reachstack_core::hji::{solve_brt, ValueFunction};
use reachstack_core::solver::SolverConfig;

#[derive(Parser)]
#[command(name = "reachstack", version, about = "Reachability-infused highway planning and control stack")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Per-episode progress output.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonConfig {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override config values, e.g. --set scenario.episodes=5
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Backward-reachable-tube value tables.
    Brt {
        #[command(subcommand)]
        command: BrtCommand,
    },
    /// Closed-loop highway simulation batches.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Render statistics tables and trade-off plot data from aggregates.
    Report {
        /// Aggregate JSON files (glob pattern or single path).
        #[arg(long = "in", value_name = "GLOB")]
        input: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BrtCommand {
    /// Solve the pairwise tube and write the value table file.
    Compute {
        #[command(flatten)]
        common: CommonConfig,
        /// Output table path; defaults to the config's `table` entry.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run the configured episode batch and write CSV logs plus aggregates.
    Run {
        #[command(flatten)]
        common: CommonConfig,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the episode count.
        #[arg(long)]
        episodes: Option<usize>,
    },
}

fn load_with_flags(
    common: &CommonConfig,
    seed: Option<u64>,
    episodes: Option<usize>,
) -> Result<RunConfig, AppError> {
    let mut overrides = common.set.clone();
    if let Some(s) = seed {
        overrides.push(format!("scenario.base_seed={s}"));
    }
    if let Some(e) = episodes {
        overrides.push(format!("scenario.episodes={e}"));
    }
    load_config(&common.config, &overrides)
}

fn cmd_brt_compute(
    common: &CommonConfig,
    out: Option<PathBuf>,
    quiet: bool,
) -> Result<(), AppError> {
    let cfg = load_config(&common.config, &common.set)?;
    let out_path = match out.or_else(|| cfg.table.clone()) {
        Some(p) => p,
        None => resolve_table_path(&PathBuf::from("brt.hjvt")),
    };
    let grid = cfg.grid_spec()?;
    let solver_cfg = SolverConfig {
        store_intermediate: false,
        ..cfg.solver.clone()
    };
    if !quiet {
        eprintln!(
            "solving tube: {} nodes, horizon {} s",
            grid.len(),
            solver_cfg.time_horizon_tau
        );
    }
    let start = Instant::now();
    let table = solve_brt(&cfg.dynamics_bounds, &cfg.rss, &grid, &solver_cfg)?;
    let precision = if cfg.output.precision == "f32" {
        Precision::F32
    } else {
        Precision::F64
    };
    write_table(&out_path, &table, precision)?;
    if !quiet {
        eprintln!(
            "solved in {:.1} s: value range [{:.3}, {:.3}], wrote {}",
            start.elapsed().as_secs_f64(),
            table.min_value(),
            table.max_value(),
            out_path.display()
        );
    }
    Ok(())
}

fn cmd_sim_run(
    common: &CommonConfig,
    seed: Option<u64>,
    episodes: Option<usize>,
    quiet: bool,
    verbose: bool,
) -> Result<(), AppError> {
    let cfg = load_with_flags(common, seed, episodes)?;
    let vf = match (&cfg.table, cfg.needs_table()) {
        (Some(path), _) => {
            let resolved = resolve_table_path(path);
            let table = read_table(&resolved)?;
            Some(ValueFunction::new(table).map_err(|e| AppError::Config(e.to_string()))?)
        }
        (None, true) => {
            return Err(AppError::MissingDependency(
                "configuration requires a value table".to_string(),
            ))
        }
        (None, false) => None,
    };
    if !quiet {
        eprintln!(
            "running {}: {} episodes x {} s, {} other cars",
            cfg.config_name(),
            cfg.scenario.episodes,
            cfg.scenario.duration_s,
            cfg.scenario.n_other_cars
        );
    }
    let start = Instant::now();
    let result = run_batch(&cfg, vf.as_ref())?;
    if verbose {
        for (i, e) in result.episodes.iter().enumerate() {
            eprintln!(
                "  episode {i}: mean v {:.2}, interventions {:.1}%, collisions {}",
                e.stats.mean_v, e.stats.intervention_pct, e.stats.collision_count
            );
        }
    }
    let written = write_batch(&cfg.output.dir, &result)?;
    if !quiet {
        eprintln!(
            "finished in {:.1} s: mean v {:.2} m/s, TTC>=3 {:.3}, interventions {:.1}%, {} files in {}",
            start.elapsed().as_secs_f64(),
            result.doc.stats.mean_v,
            result.doc.stats.frac_ttc_ge_3,
            result.doc.stats.intervention_pct,
            written.len(),
            cfg.output.dir.display()
        );
    }
    Ok(())
}

fn cmd_report(input: &str, out: &PathBuf, quiet: bool) -> Result<(), AppError> {
    let docs = load_aggregates(input)?;
    let text = write_report(&docs, out)?;
    if !quiet {
        print!("{text}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Brt { command } => match command {
            BrtCommand::Compute { common, out } => {
                cmd_brt_compute(common, out.clone(), cli.quiet)
            }
        },
        Command::Sim { command } => match command {
            SimCommand::Run {
                common,
                seed,
                episodes,
            } => cmd_sim_run(common, *seed, *episodes, cli.quiet, cli.verbose),
        },
        Command::Report { input, out } => cmd_report(input, out, cli.quiet),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
