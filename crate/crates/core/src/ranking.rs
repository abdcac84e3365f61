//! Rank columns of the master list.

use std::cmp::Ordering;

use crate::model::EstimateTable;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankError {
    #[error("relative rank {0} outside (0, 1]")]
    OutOfRange(f64),
    #[error("cannot rank NaN")]
    NaN,
}

/// 1-based ascending ranks; tied values share the mean of the positions they
/// occupy.
pub fn average_ranks(values: &[f64]) -> Result<Vec<f64>, RankError> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(RankError::NaN);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    Ok(ranks)
}

/// Tie-averaged rank divided by the number of values. Output lies in (0, 1];
/// a unique largest value maps to exactly 1.0.
pub fn relative_ranks(values: &[f64]) -> Result<Vec<f64>, RankError> {
    let n = values.len() as f64;
    Ok(average_ranks(values)?.into_iter().map(|r| r / n).collect())
}

/// Relative rank rounded up to a 1..=100 scale.
pub fn percentile_rank(relative: f64) -> Result<u8, RankError> {
    if relative.is_nan() {
        return Err(RankError::NaN);
    }
    if !(relative > 0.0 && relative <= 1.0 + crate::model::PROB_EPS) {
        return Err(RankError::OutOfRange(relative));
    }
    // rank/N products such as 0.07 * 100 land a hair above the integer.
    let pct = (relative * 100.0 - crate::model::PROB_EPS).ceil();
    Ok(pct.clamp(1.0, 100.0) as u8)
}

/// Fills the relative-rank and percentile columns from the
/// probability-weighted estimates.
pub fn assign_ranks(mut table: EstimateTable) -> Result<EstimateTable, RankError> {
    let values: Vec<f64> = table.rows.iter().map(|r| r.expected).collect();
    let ranks = relative_ranks(&values)?;
    for (row, rel) in table.rows.iter_mut().zip(ranks) {
        row.relative_rank = Some(rel);
        row.percentile = Some(percentile_rank(rel)?);
    }
    Ok(table)
}
