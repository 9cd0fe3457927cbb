use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::scene_eval::MetricRow;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

impl Direction {
    /// Direction of a summary column such as `dt_residual_echo_db`.
    pub fn for_metric(name: &str) -> Self {
        if name.ends_with("residual_echo_db") {
            Direction::LowerIsBetter
        } else {
            Direction::HigherIsBetter
        }
    }
}

/// Aggregate scores of one method, keyed by metric name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: String,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRank {
    pub method: String,
    /// Rank per metric, 1 = best, ties share the mean of their positions.
    pub per_metric: BTreeMap<String, f64>,
    pub average: f64,
}

/// Rank methods on every metric they all report, then average.
pub fn rank_methods(methods: &[MethodScores], direction: impl Fn(&str) -> Direction) -> Result<Vec<MethodRank>> {
    if methods.len() < 2 {
        return Err(Error::input("ranking needs at least two methods"));
    }
    let names: BTreeSet<&String> = methods[0].scores.keys().collect();
    for m in methods {
        let own: BTreeSet<&String> = m.scores.keys().collect();
        if own != names {
            return Err(Error::input(alloc::format!(
                "method `{}` reports a different metric set than `{}`",
                m.method, methods[0].method
            )));
        }
    }
    if names.is_empty() {
        return Err(Error::input("no metrics to rank"));
    }
    let mut out: Vec<MethodRank> = methods
        .iter()
        .map(|m| MethodRank { method: m.method.clone(), per_metric: BTreeMap::new(), average: 0.0 })
        .collect();
    for name in &names {
        let vals: Vec<f64> = methods.iter().map(|m| m.scores[*name]).collect();
        if let Some(i) = vals.iter().position(|v| v.is_nan()) {
            return Err(Error::NonFinite { what: "ranked metric", index: i });
        }
        let better = |a: f64, b: f64| match direction(name) {
            Direction::HigherIsBetter => a > b,
            Direction::LowerIsBetter => a < b,
        };
        for (i, &v) in vals.iter().enumerate() {
            let wins = vals.iter().filter(|&&o| better(o, v)).count();
            let ties = vals.iter().filter(|&&o| o == v).count();
            let rank = wins as f64 + (ties as f64 + 1.0) / 2.0;
            out[i].per_metric.insert((*name).clone(), rank);
        }
    }
    for r in &mut out {
        r.average = r.per_metric.values().sum::<f64>() / r.per_metric.len() as f64;
    }
    Ok(out)
}

/// Per-method means of `{condition}_{metric}` columns over finite values.
///
/// All methods must cover the same scene ids.
pub fn summarize(rows: &[MetricRow]) -> Result<Vec<MethodScores>> {
    let mut by_method: BTreeMap<&str, Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        by_method.entry(&r.method).or_default().push(r);
    }
    let mut scene_sets = by_method.values().map(|rs| rs.iter().map(|r| r.scene_id.as_str()).collect::<BTreeSet<_>>());
    if let Some(first) = scene_sets.next() {
        if scene_sets.any(|s| s != first) {
            return Err(Error::input("methods were evaluated on different scene sets"));
        }
    }
    Ok(by_method
        .into_iter()
        .map(|(method, rs)| {
            let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
            for r in rs {
                let ext = r.external.iter().map(|(k, v)| (k.as_str(), Some(*v)));
                for (name, v) in r.values().into_iter().chain(ext) {
                    if let Some(v) = v.filter(|v| v.is_finite()) {
                        let e = acc.entry(alloc::format!("{}_{name}", r.condition.label())).or_insert((0.0, 0));
                        e.0 += v;
                        e.1 += 1;
                    }
                }
            }
            MethodScores {
                method: method.into(),
                scores: acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
            }
        })
        .collect())
}
