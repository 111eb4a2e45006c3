//! Side-by-side final-window medians of several runs on one environment.

use std::fmt;

use super::config::Method;
use super::run::SummaryRow;
use crate::envs::EnvId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub pooled_median: Option<f64>,
    /// `(seed, median_final_window)` in file order.
    pub per_seed: Vec<(String, Option<f64>)>,
}

/// Methods ranked by pooled final-window median, highest first. Raw numbers
/// only; no significance test is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub env_id: EnvId,
    pub rows: Vec<MethodRow>,
}

/// Builds the ranking from the contents of two or more `summary.csv` files.
pub fn compare_methods(summaries: &[Vec<SummaryRow>]) -> Result<Comparison> {
    if summaries.len() < 2 {
        return Err(Error::config("compare", "needs at least two summaries"));
    }
    let mut env: Option<EnvId> = None;
    let mut rows = Vec::new();
    for table in summaries {
        let first = table
            .first()
            .ok_or_else(|| Error::config("compare", "empty summary"))?;
        for r in table {
            if r.method != first.method {
                return Err(Error::config("compare", "summary mixes methods"));
            }
            match env {
                None => env = Some(r.env_id),
                Some(e) if e != r.env_id => {
                    return Err(Error::config(
                        "env_id",
                        format!("summaries cover different environments ({e} and {})", r.env_id),
                    ));
                }
                Some(_) => {}
            }
        }
        let pooled = table
            .iter()
            .find(|r| r.is_pooled())
            .ok_or_else(|| Error::config("compare", "summary has no pooled row"))?;
        rows.push(MethodRow {
            method: first.method,
            pooled_median: pooled.median_final_window,
            per_seed: table
                .iter()
                .filter(|r| !r.is_pooled())
                .map(|r| (r.seed.clone(), r.median_final_window))
                .collect(),
        });
    }
    // stable: equal medians keep input order; missing medians rank last
    rows.sort_by(|a, b| {
        let key = |m: Option<f64>| m.unwrap_or(f64::NEG_INFINITY);
        key(b.pooled_median).total_cmp(&key(a.pooled_median))
    });
    Ok(Comparison {
        env_id: env.expect("at least one row"),
        rows,
    })
}

fn fmt_median(m: Option<f64>) -> String {
    m.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "env {}", self.env_id)?;
        writeln!(f, "{:<4} {:<16} {:>14}  per-seed", "rank", "method", "pooled median")?;
        for (i, r) in self.rows.iter().enumerate() {
            let seeds: Vec<String> = r
                .per_seed
                .iter()
                .map(|(s, m)| format!("{s}:{}", fmt_median(*m)))
                .collect();
            writeln!(
                f,
                "{:<4} {:<16} {:>14}  {}",
                i + 1,
                r.method.name(),
                fmt_median(r.pooled_median),
                seeds.join(" ")
            )?;
        }
        Ok(())
    }
}
