//! Lifespan statistics over event logs.

use std::io::Write;

use serde::Serialize;

use super::events::EventRecord;
use crate::error::{Error, Result};

/// Median of `lifespans`; an even count averages the two middle values.
pub fn median_lifespan(lifespans: &[u64]) -> Result<f64> {
    if lifespans.is_empty() {
        return Err(Error::Contract("median of an empty lifespan list".into()));
    }
    let mut v = lifespans.to_vec();
    v.sort_unstable();
    Ok(median_sorted(&v))
}

fn median_sorted(v: &[u64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CurvePoint {
    pub death_index: u64,
    pub death_tick: u64,
    pub org_id: u64,
    pub lifespan: u64,
}

/// Deaths in the order they happened plus the sliding-window median.
///
/// `medians[i]` covers points `i ..= i + window - 1`, so the series is empty
/// until `window` deaths exist.
#[derive(Debug, Clone, PartialEq)]
pub struct LifespanCurve {
    pub window: usize,
    pub points: Vec<CurvePoint>,
    pub medians: Vec<f64>,
}

impl LifespanCurve {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lifespans(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.lifespan).collect()
    }

    /// Median of the first `window` deaths (fewer if the run had fewer).
    pub fn first_window_median(&self) -> Option<f64> {
        let n = self.points.len().min(self.window);
        median_lifespan(&self.lifespans()[..n]).ok()
    }

    /// Median of the last `window` deaths (fewer if the run had fewer).
    pub fn final_window_median(&self) -> Option<f64> {
        self.final_window().and_then(|w| median_lifespan(&w).ok())
    }

    pub fn final_window(&self) -> Option<Vec<u64>> {
        if self.points.is_empty() {
            return None;
        }
        let start = self.points.len().saturating_sub(self.window);
        Some(self.points[start..].iter().map(|p| p.lifespan).collect())
    }

    /// Tick of the first death at which the trailing window median reached
    /// `threshold`.
    pub fn first_tick_reaching(&self, threshold: f64) -> Option<u64> {
        self.medians
            .iter()
            .position(|&m| m >= threshold)
            .map(|i| self.points[i + self.window - 1].death_tick)
    }

    pub fn max_lifespan(&self) -> Option<u64> {
        self.points.iter().map(|p| p.lifespan).max()
    }

    /// Writes `death_index,death_tick,org_id,lifespan,window_median`; the
    /// median column is empty until a full window exists.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["death_index", "death_tick", "org_id", "lifespan", "window_median"])?;
        for (i, p) in self.points.iter().enumerate() {
            let median = if i + 1 >= self.window {
                self.medians[i + 1 - self.window].to_string()
            } else {
                String::new()
            };
            w.write_record([
                p.death_index.to_string(),
                p.death_tick.to_string(),
                p.org_id.to_string(),
                p.lifespan.to_string(),
                median,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sliding medians of width `window` over `values`.
pub fn sliding_medians(values: &[u64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    let mut sorted: Vec<u64> = values[..window].to_vec();
    sorted.sort_unstable();
    let mut out = Vec::with_capacity(values.len() - window + 1);
    out.push(median_sorted(&sorted));
    for i in window..values.len() {
        let old = values[i - window];
        let at = sorted.binary_search(&old).expect("value in window");
        sorted.remove(at);
        let new = values[i];
        let at = sorted.partition_point(|&x| x < new);
        sorted.insert(at, new);
        out.push(median_sorted(&sorted));
    }
    out
}

/// Orders the deaths in `log` by tick (ties by org_id) and computes the
/// window medians. A log without deaths gives an empty curve.
pub fn curve_stats(log: &[EventRecord], window: usize) -> Result<LifespanCurve> {
    if window == 0 {
        return Err(Error::config("window", "must be at least 1"));
    }
    let mut deaths: Vec<(u64, u64, u64)> = Vec::new();
    for r in log.iter().filter(|r| r.is_death()) {
        let lifespan = r
            .lifespan
            .ok_or_else(|| Error::Contract(format!("death of organism {} has no lifespan", r.org_id)))?;
        deaths.push((r.tick, r.org_id, lifespan));
    }
    deaths.sort_by_key(|&(tick, org, _)| (tick, org));
    Ok(curve_from_sorted(deaths, window))
}

fn curve_from_sorted(deaths: Vec<(u64, u64, u64)>, window: usize) -> LifespanCurve {
    let points: Vec<CurvePoint> = deaths
        .into_iter()
        .enumerate()
        .map(|(i, (death_tick, org_id, lifespan))| CurvePoint {
            death_index: i as u64,
            death_tick,
            org_id,
            lifespan,
        })
        .collect();
    let lifespans: Vec<u64> = points.iter().map(|p| p.lifespan).collect();
    LifespanCurve {
        window,
        medians: sliding_medians(&lifespans, window),
        points,
    }
}

/// All seeds' deaths merged by tick (ties by seed position, then org_id).
/// `org_id` in the pooled curve is the id within its own run.
pub fn pooled_curve(curves: &[LifespanCurve], window: usize) -> LifespanCurve {
    let mut deaths: Vec<(u64, usize, u64, u64)> = Vec::new();
    for (run, c) in curves.iter().enumerate() {
        deaths.extend(c.points.iter().map(|p| (p.death_tick, run, p.org_id, p.lifespan)));
    }
    deaths.sort_by_key(|&(tick, run, org, _)| (tick, run, org));
    curve_from_sorted(deaths.into_iter().map(|(t, _, o, l)| (t, o, l)).collect(), window)
}
