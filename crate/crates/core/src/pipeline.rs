//! Expressions in, estimate table out.

use crate::client::{ClientError, LlmClient};
use crate::estimator::estimate;
use crate::model::{EstimateTable, Expression, ScaleSpec, Variable};
use crate::Error;

/// An expression that produced no estimate, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub expression: Expression,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRun {
    /// Estimates in input order, failed items omitted.
    pub table: EstimateTable,
    pub failures: Vec<Failure>,
}

/// Rates every expression and converts each answer into an estimate. Items
/// whose request fails or whose answer holds no in-scale numeral are listed
/// in `failures`; the run fails only when nothing could be estimated.
pub async fn estimate_expressions(
    client: &LlmClient,
    expressions: &[Expression],
    variable: Variable,
    scale: &ScaleSpec,
) -> Result<EstimationRun, Error> {
    scale.validate()?;
    let items = client.batch_estimate(expressions, variable, scale).await?;
    let mut rows = Vec::with_capacity(items.len());
    let mut failures = Vec::new();
    for item in items {
        let outcome = item.outcome.map_err(|e| e.to_string()).and_then(|dist| {
            estimate(item.expression.clone(), variable, scale, &dist).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(row) => rows.push(row),
            Err(reason) => failures.push(Failure {
                expression: item.expression,
                reason,
            }),
        }
    }
    if rows.is_empty() {
        let total = failures.len();
        let first = failures
            .first()
            .map(|f| f.reason.clone())
            .unwrap_or_default();
        return Err(ClientError::BatchFailed {
            failed: total,
            total,
            first,
        }
        .into());
    }
    Ok(EstimationRun {
        table: EstimateTable::new(variable, rows)?,
        failures,
    })
}
