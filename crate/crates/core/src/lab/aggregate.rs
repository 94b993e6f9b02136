use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::biograph::Split;
use crate::unlearner::{Method, UnlearnEpoch};

use super::config::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 { 0.0 } else { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
        Self { mean, std, n }
    }
}

/// Cells averaged together: same model, method, target split and delta.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Group {
    pub model: String,
    pub method: Method,
    pub split: Split,
    pub delta: f64,
}

impl Group {
    pub fn of(c: &Cell) -> Self {
        Self { model: c.model.clone(), method: c.method, split: c.split, delta: c.delta }
    }

    fn key(&self) -> (String, Method, Split, u64) {
        (self.model.clone(), self.method, self.split, self.delta.to_bits())
    }
}

/// A metric over unlearning epochs, averaged over attributes and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggSeries {
    #[serde(flatten)]
    pub group: Group,
    pub metric: String,
    pub points: Vec<(usize, Stat)>,
}

/// Final `target_bio - target_qa` of a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    #[serde(flatten)]
    pub group: Group,
    pub gap: Stat,
}

fn grouped<'a>(results: &'a [(Cell, Vec<UnlearnEpoch>)]) -> Vec<(Group, Vec<&'a Vec<UnlearnEpoch>>)> {
    let mut map: BTreeMap<(String, Method, Split, u64), (Group, Vec<&Vec<UnlearnEpoch>>)> = BTreeMap::new();
    for (cell, trace) in results {
        let g = Group::of(cell);
        map.entry(g.key()).or_insert_with(|| (g, Vec::new())).1.push(trace);
    }
    map.into_values().collect()
}

/// Mean and std per (group, metric, epoch) over all cells of the group.
pub fn aggregate(results: &[(Cell, Vec<UnlearnEpoch>)]) -> Vec<AggSeries> {
    let mut out = Vec::new();
    for (group, traces) in grouped(results) {
        let mut by_metric: BTreeMap<&str, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
        for t in &traces {
            for e in t.iter() {
                for (k, v) in &e.metrics {
                    by_metric.entry(k).or_default().entry(e.epoch).or_default().push(*v);
                }
            }
        }
        for (metric, epochs) in by_metric {
            out.push(AggSeries {
                group: group.clone(),
                metric: metric.to_string(),
                points: epochs.into_iter().map(|(e, v)| (e, Stat::of(&v))).collect(),
            });
        }
    }
    out
}

pub fn gaps(results: &[(Cell, Vec<UnlearnEpoch>)]) -> Vec<GapRow> {
    grouped(results)
        .into_iter()
        .map(|(group, traces)| {
            let vals: Vec<f64> = traces
                .iter()
                .filter_map(|t| t.last())
                .filter_map(|e| Some(e.metrics.get("target_bio")? - e.metrics.get("target_qa")?))
                .collect();
            GapRow { group, gap: Stat::of(&vals) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biograph::Attribute;
    use approx::assert_relative_eq;

    fn cell(attr: Attribute, seed: u64) -> Cell {
        Cell { block: 0, model: "m".into(), method: Method::GradientAscent, split: Split::HighCount, attribute: attr, delta: 1.0, seed }
    }

    fn trace(vals: &[(f64, f64)]) -> Vec<UnlearnEpoch> {
        vals.iter()
            .enumerate()
            .map(|(e, &(qa, bio))| UnlearnEpoch {
                epoch: e,
                losses: None,
                metrics: [("target_qa".to_string(), qa), ("target_bio".to_string(), bio)].into_iter().collect(),
            })
            .collect()
    }

    #[test]
    fn matches_direct_recomputation() {
        let results = vec![
            (cell(Attribute::Employer, 0), trace(&[(1.0, 1.0), (0.2, 0.9)])),
            (cell(Attribute::Employer, 1), trace(&[(1.0, 1.0), (0.4, 0.7)])),
            (cell(Attribute::Birthday, 0), trace(&[(0.9, 1.0), (0.0, 0.5)])),
        ];
        let agg = aggregate(&results);
        assert_eq!(agg.len(), 2);
        let qa = agg.iter().find(|s| s.metric == "target_qa").unwrap();
        let (e, s) = qa.points[1];
        assert_eq!((e, s.n), (1, 3));
        assert_relative_eq!(s.mean, 0.2, epsilon = 1e-12);
        // sample variance of {0.2, 0.4, 0.0} is 0.04
        assert_relative_eq!(s.std, 0.2, epsilon = 1e-12);
        let g = &gaps(&results)[0];
        assert_relative_eq!(g.gap.mean, (0.7 + 0.3 + 0.5) / 3.0, epsilon = 1e-12);
        assert_eq!(Stat::of(&[3.0]).std, 0.0);
        assert!(Stat::of(&[]).mean.is_nan());
    }
}
