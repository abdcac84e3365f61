//! Point estimates from a rating distribution.

use crate::model::{Expression, ModelError, NormEstimate, RatingDistribution, ScaleSpec, Variable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error("no in-scale rating: all probability mass is off-scale")]
    NoRating,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The scale point with the highest probability. Ties go to the smaller point.
pub fn dominant_rating(dist: &RatingDistribution) -> Result<u8, EstimateError> {
    let mut best: Option<(u8, f64)> = None;
    // BTreeMap iterates points in ascending order, so a strict `>` keeps the
    // smaller point on ties.
    for (&point, &p) in dist.mass() {
        if p > 0.0 && best.is_none_or(|(_, bp)| p > bp) {
            best = Some((point, p));
        }
    }
    best.map(|(point, _)| point).ok_or(EstimateError::NoRating)
}

/// Probability-weighted rating after renormalizing the in-scale mass to one.
pub fn expected_rating(dist: &RatingDistribution) -> Result<f64, EstimateError> {
    let total = dist.in_scale_mass();
    if total <= 0.0 {
        return Err(EstimateError::NoRating);
    }
    let weighted: f64 = dist.mass().iter().map(|(&pt, &p)| f64::from(pt) * p).sum();
    let (lo, hi) = dist.bounds();
    Ok((weighted / total).clamp(f64::from(lo), f64::from(hi)))
}

/// Both estimates packaged as a [`NormEstimate`] without rank columns.
pub fn estimate(
    expression: Expression,
    variable: Variable,
    scale: &ScaleSpec,
    dist: &RatingDistribution,
) -> Result<NormEstimate, EstimateError> {
    let dominant = dominant_rating(dist)?;
    let expected = expected_rating(dist)?;
    Ok(NormEstimate::new(
        expression,
        variable,
        scale,
        dominant,
        expected,
        dist.residual(),
    )?)
}
