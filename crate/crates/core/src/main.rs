use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use evo_replicator::envs::EnvId;
use evo_replicator::harness::oracle::oracle_values;
use evo_replicator::harness::{compare_methods, parse_seed_list, read_summary, run_experiment, ExperimentConfig, Method};
use evo_replicator::{Error, Result};

/// Evolutionary self-replicators on a 1-D grid, plus ES and GA baselines.
#[derive(Debug, Parser)]
#[command(name = "evorep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one method over a set of seeds and write logs and a summary.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Method when no config file is given: self_replicator, ea or ga.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        env: Option<String>,
        /// Seeds such as `0..10` or `1,5,9`.
        #[arg(long)]
        seed_list: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// World ticks, or generations for ea / ga.
        #[arg(long)]
        budget: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Rank the pooled final medians of several summary.csv files.
    Compare {
        #[arg(required = true, num_args = 2..)]
        summaries: Vec<PathBuf>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file and print it with all defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print reference values: hand-computed examples, scripted-policy
    /// lifespans and random-genome baselines.
    Oracle {
        /// Limit to one environment (default: all).
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        init_scale: Option<f64>,
    },
}

fn build_config(
    config: Option<&Path>,
    method: Option<&str>,
    env: Option<&str>,
    seed_list: Option<&str>,
    out: Option<PathBuf>,
    budget: Option<u64>,
) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => {
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(m) = method {
                cfg.method = m.parse()?;
                if budget.is_none() {
                    cfg.budget = cfg.method.default_budget();
                }
            }
            if let Some(e) = env {
                let id: EnvId = e.parse()?;
                if id != cfg.env.env_id {
                    return Err(Error::Config {
                        field: "env".into(),
                        reason: format!("--env {id} conflicts with config env {}", cfg.env.env_id),
                    });
                }
            }
            cfg
        }
        None => {
            let env = env.ok_or_else(|| Error::Config {
                field: "env".into(),
                reason: "give --env or --config".into(),
            })?;
            let method: Method = method.unwrap_or("self_replicator").parse()?;
            ExperimentConfig::new(method, env.parse()?)
        }
    };
    if let Some(s) = seed_list {
        cfg.seeds = parse_seed_list(s)?;
    }
    if let Some(b) = budget {
        cfg.budget = b;
    }
    if out.is_some() {
        cfg.out = out;
    }
    if cfg.out.is_none() {
        return Err(Error::Config {
            field: "out".into(),
            reason: "give --out or experiment.out".into(),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            method,
            env,
            seed_list,
            out,
            budget,
            jobs,
        } => {
            let cfg = build_config(
                config.as_deref(),
                method.as_deref(),
                env.as_deref(),
                seed_list.as_deref(),
                out,
                budget,
            )?;
            let report = run_experiment(&cfg, jobs)?;
            println!("{:<10} {:>10} {:>14} {:>12}", "seed", "deaths", "final median", "max");
            for r in report.rows() {
                println!(
                    "{:<10} {:>10} {:>14} {:>12}",
                    r.seed,
                    r.n_deaths,
                    fmt_opt(r.median_final_window),
                    fmt_opt(r.max_lifespan)
                );
            }
            println!("wrote {}", cfg.out.expect("checked").display());
        }
        Command::Compare { summaries, out } => {
            let tables = summaries
                .iter()
                .map(|p| read_summary(p))
                .collect::<Result<Vec<_>>>()?;
            let table = compare_methods(&tables)?;
            print!("{table}");
            if let Some(path) = out {
                std::fs::write(&path, table.to_string()).map_err(|e| Error::Io { path, source: e })?;
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            print!("{}", cfg.to_toml());
        }
        Command::Oracle { env, seed, init_scale } => {
            let envs = match env {
                Some(e) => vec![e.parse()?],
                None => EnvId::ALL.to_vec(),
            };
            let scale = init_scale.unwrap_or(evo_replicator::genome::DEFAULT_INIT_SCALE);
            for v in oracle_values(&envs, scale, seed)? {
                println!("{} = {}", v.name, v.value);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
