use std::collections::HashSet;
use std::io::Write;

use super::matrix::ScoreTable;
use super::stats::{pearson, StatsError};
use crate::datasets::normalize_key;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscrepancyDirection {
    EstimateLower,
    EstimateHigher,
}

impl DiscrepancyDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscrepancyDirection::EstimateLower => "estimate_lower",
            DiscrepancyDirection::EstimateHigher => "estimate_higher",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub key: String,
    pub gold: f64,
    pub estimate: f64,
    /// `estimate - gold`
    pub diff: f64,
    pub direction: DiscrepancyDirection,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscrepancyReport {
    pub threshold: f64,
    pub shared: usize,
    pub entries: Vec<Discrepancy>,
    pub warnings: Vec<String>,
}

/// Shared items whose estimate differs from the gold rating by strictly more
/// than `threshold`, largest absolute difference first.
pub fn discrepancy_report(
    gold: &ScoreTable,
    est: &ScoreTable,
    threshold: f64,
) -> DiscrepancyReport {
    let (keys, gs, es) = gold.intersect(est);
    let mut report = DiscrepancyReport {
        threshold,
        shared: keys.len(),
        ..Default::default()
    };
    if keys.is_empty() {
        report.warnings.push(format!(
            "{} and {} share no expressions",
            gold.name, est.name
        ));
        return report;
    }
    for ((key, g), e) in keys.into_iter().zip(gs).zip(es) {
        let diff = e - g;
        if diff.abs() > threshold {
            report.entries.push(Discrepancy {
                key,
                gold: g,
                estimate: e,
                diff,
                direction: if diff < 0.0 {
                    DiscrepancyDirection::EstimateLower
                } else {
                    DiscrepancyDirection::EstimateHigher
                },
            });
        }
    }
    report.entries.sort_by(|a, b| {
        b.diff
            .abs()
            .total_cmp(&a.diff.abs())
            .then_with(|| a.key.cmp(&b.key))
    });
    report
}

impl DiscrepancyReport {
    pub fn count(&self, direction: DiscrepancyDirection) -> usize {
        self.entries
            .iter()
            .filter(|e| e.direction == direction)
            .count()
    }

    /// `expression,gold,estimate,diff,direction`
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["expression", "gold", "estimate", "diff", "direction"])?;
        for e in &self.entries {
            w.write_record([
                e.key.clone(),
                e.gold.to_string(),
                e.estimate.to_string(),
                format!("{:.6}", e.diff),
                e.direction.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pearson correlation restricted to `keys`, with the number of matched items.
pub fn subset_correlation(
    gold: &ScoreTable,
    est: &ScoreTable,
    keys: &[String],
) -> Result<(f64, usize), StatsError> {
    let mut seen = HashSet::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in keys {
        let Ok(k) = normalize_key(k) else { continue };
        if !seen.insert(k.clone()) {
            continue;
        }
        if let (Some(g), Some(e)) = (gold.get(&k), est.get(&k)) {
            xs.push(g);
            ys.push(e);
        }
    }
    let n = xs.len();
    Ok((pearson(&xs, &ys)?, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Low,
    High,
}

/// The `n` lowest or highest scoring items, ties ordered by key.
pub fn extremes(est: &ScoreTable, n: usize, direction: Direction) -> Vec<(String, f64)> {
    let mut items: Vec<(String, f64)> = est.values.iter().map(|(k, &v)| (k.clone(), v)).collect();
    items.sort_by(|a, b| {
        let by_value = match direction {
            Direction::Low => a.1.total_cmp(&b.1),
            Direction::High => b.1.total_cmp(&a.1),
        };
        by_value.then_with(|| a.0.cmp(&b.0))
    });
    items.truncate(n);
    items
}
