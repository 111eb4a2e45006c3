//! Replicate runs and their summaries.
//!
//! Output directory layout:
//!
//! ```text
//! config.toml          full configuration, defaults included
//! events_<seed>.csv    event log of each seed
//! summary.csv          one row per seed plus a `pooled` row
//! curves/curve_<seed>.csv
//! curves/pooled.csv    all seeds' deaths merged by tick
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::events::{baseline_record, EventRecord, EventWriter};
use super::stats::{curve_stats, median_lifespan, pooled_curve, LifespanCurve};
use crate::baselines::{baseline_run, BaselineMethod};
use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::world::World;

pub const POOLED: &str = "pooled";

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub env_id: EnvId,
    /// The seed, or `pooled`.
    pub seed: String,
    pub n_deaths: u64,
    /// Median of the last `window` deaths; empty when there were none.
    pub median_final_window: Option<f64>,
    pub max_lifespan: Option<u64>,
    pub ticks_or_generations: u64,
}

impl SummaryRow {
    pub fn is_pooled(&self) -> bool {
        self.seed == POOLED
    }
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub curve: LifespanCurve,
    pub summary: SummaryRow,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// In the order of `cfg.seeds`.
    pub seeds: Vec<SeedResult>,
    pub pooled: SummaryRow,
    pub pooled_curve: LifespanCurve,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = self.seeds.iter().map(|s| s.summary.clone()).collect();
        rows.push(self.pooled.clone());
        rows
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// Runs one replicate. When `out` is given the event log is streamed to
/// `out/events_<seed>.csv`.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<SeedResult> {
    let path = out.map(|d| d.join(format!("events_{seed}.csv")));
    let mut writer = match &path {
        Some(p) => Some(EventWriter::new(create(p)?)),
        None => None,
    };
    let mut deaths: Vec<EventRecord> = Vec::new();
    let mut emit = |r: EventRecord| -> Result<()> {
        if let (Some(w), Some(p)) = (writer.as_mut(), path.as_deref()) {
            w.write(&r).map_err(|e| csv_io(p, e))?;
        }
        if r.is_death() {
            deaths.push(r);
        }
        Ok(())
    };

    match cfg.method {
        Method::SelfReplicator => {
            let mut world = World::new(cfg.world, cfg.env.clone(), cfg.policy, seed)?;
            for _ in 0..cfg.budget {
                for e in world.tick()? {
                    emit(EventRecord::from(&e))?;
                }
            }
        }
        Method::Ea | Method::Ga => {
            let method = if cfg.method == Method::Ea {
                BaselineMethod::Ea
            } else {
                BaselineMethod::Ga
            };
            let log = baseline_run(
                method,
                &cfg.env,
                &cfg.policy,
                &cfg.ea,
                &cfg.ga,
                cfg.world.init_scale,
                cfg.budget,
                seed,
            )?;
            for (i, r) in log.iter().enumerate() {
                emit(baseline_record(r, i as u64))?;
            }
        }
    }
    if let (Some(w), Some(p)) = (writer, path.as_deref()) {
        w.finish().map_err(|e| Error::io(p, e))?.flush().map_err(|e| Error::io(p, e))?;
    }

    let curve = curve_stats(&deaths, cfg.window)?;
    let summary = SummaryRow {
        method: cfg.method,
        env_id: cfg.env.env_id,
        seed: seed.to_string(),
        n_deaths: curve.points.len() as u64,
        median_final_window: curve.final_window_median(),
        max_lifespan: curve.max_lifespan(),
        ticks_or_generations: cfg.budget,
    };
    Ok(SeedResult { seed, curve, summary })
}

/// Pooled row: deaths and budgets summed, the median taken over the union
/// of every seed's final window.
pub fn pooled_summary(cfg: &ExperimentConfig, seeds: &[SeedResult]) -> SummaryRow {
    let windows: Vec<u64> = seeds.iter().filter_map(|s| s.curve.final_window()).flatten().collect();
    SummaryRow {
        method: cfg.method,
        env_id: cfg.env.env_id,
        seed: POOLED.to_string(),
        n_deaths: seeds.iter().map(|s| s.summary.n_deaths).sum(),
        median_final_window: median_lifespan(&windows).ok(),
        max_lifespan: seeds.iter().filter_map(|s| s.summary.max_lifespan).max(),
        ticks_or_generations: cfg.budget * seeds.len() as u64,
    }
}

/// Runs every seed of `cfg` on a pool of `jobs` threads (all cores when
/// `None`). Results do not depend on `jobs` or on the order of the seeds.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let out = cfg.out.as_deref();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir.join("curves")).map_err(|e| Error::io(dir, e))?;
        let echo = dir.join("config.toml");
        std::fs::write(&echo, cfg.to_toml()).map_err(|e| Error::io(&echo, e))?;
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;
    let seeds: Vec<SeedResult> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&s| run_seed(cfg, s, out))
            .collect::<Result<Vec<_>>>()
    })?;

    let pooled = pooled_summary(cfg, &seeds);
    let curves: Vec<LifespanCurve> = seeds.iter().map(|s| s.curve.clone()).collect();
    let pooled_curve = pooled_curve(&curves, cfg.window);
    let report = ExperimentReport {
        seeds,
        pooled,
        pooled_curve,
    };

    if let Some(dir) = out {
        write_summary(&dir.join("summary.csv"), &report.rows())?;
        for s in &report.seeds {
            let p = dir.join("curves").join(format!("curve_{}.csv", s.seed));
            s.curve.write_csv(create(&p)?).map_err(|e| csv_io(&p, e))?;
        }
        let p = dir.join("curves").join("pooled.csv");
        report.pooled_curve.write_csv(create(&p)?).map_err(|e| csv_io(&p, e))?;
    }
    Ok(report)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<csv::Result<Vec<SummaryRow>>>()
        .map_err(|e| csv_io(path, e))
}

/// Per-seed event log path inside an output directory.
pub fn events_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("events_{seed}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvSpec;
    use crate::harness::events::load_events;
    use crate::world::EventKind;

    fn quick(method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(method, EnvId::DodgeSurvival);
        cfg.env = EnvSpec::with_params(EnvId::DodgeSurvival, Some(60), &Default::default()).unwrap();
        cfg.policy = cfg.env.policy_spec(4).unwrap();
        cfg.world.grid_dim = 8;
        cfg.seeds = vec![3, 1];
        cfg.budget = match method {
            Method::SelfReplicator => 300,
            _ => 2,
        };
        cfg.ea.population_size = 6;
        cfg.ga.population_size = 6;
        cfg.ga.elite_size = 2;
        cfg.window = 10;
        cfg
    }

    #[test]
    fn one_tick_logs_only_tick_zero() {
        let mut cfg = quick(Method::SelfReplicator);
        cfg.budget = 1;
        cfg.seeds = vec![0];
        let dir = tempfile::tempdir().unwrap();
        cfg.out = Some(dir.path().to_path_buf());
        run_experiment(&cfg, Some(1)).unwrap();
        let events = load_events(&events_path(dir.path(), 0)).unwrap();
        assert!(!events.is_empty());
        assert!(events.iter().all(|e| e.tick == 0));
        assert_eq!(events[0].event_type, EventKind::Reseed);
    }

    #[test]
    fn files_written_and_summary_recomputable() {
        for method in Method::ALL {
            let mut cfg = quick(method);
            let dir = tempfile::tempdir().unwrap();
            cfg.out = Some(dir.path().to_path_buf());
            let report = run_experiment(&cfg, Some(2)).unwrap();
            for s in [3, 1] {
                assert!(events_path(dir.path(), s).exists());
                assert!(dir.path().join(format!("curves/curve_{s}.csv")).exists());
            }
            assert!(dir.path().join("curves/pooled.csv").exists());
            let echo = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
            assert_eq!(echo, cfg);

            let rows = read_summary(&dir.path().join("summary.csv")).unwrap();
            assert_eq!(rows, report.rows());
            assert_eq!(rows.len(), 3);
            assert!(rows[2].is_pooled());
            for row in &rows[..2] {
                let seed: u64 = row.seed.parse().unwrap();
                let events = load_events(&events_path(dir.path(), seed)).unwrap();
                let curve = curve_stats(&events, cfg.window).unwrap();
                let m = curve.final_window_median().unwrap();
                assert!((m - row.median_final_window.unwrap()).abs() <= 1e-9);
                assert_eq!(curve.points.len() as u64, row.n_deaths);
            }
        }
    }

    #[test]
    fn baseline_logs_have_one_death_per_evaluation() {
        let cfg = quick(Method::Ga);
        let r = run_seed(&cfg, 5, None).unwrap();
        assert_eq!(r.summary.n_deaths, 12);
        let cfg = quick(Method::Ea);
        let r = run_seed(&cfg, 5, None).unwrap();
        assert_eq!(r.summary.n_deaths, 12);
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let mut cfg = quick(Method::SelfReplicator);
        cfg.out = Some(blocker.join("sub"));
        let err = run_experiment(&cfg, Some(1)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
