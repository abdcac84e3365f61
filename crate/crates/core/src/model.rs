//! Domain types shared by every stage of the pipeline.
//!
//! Nothing in here touches the filesystem or the network. Constructors
//! validate their invariants and hand back [`ModelError`] on violation, so a
//! value that exists is a value that is well formed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::datasets::normalize_key;

/// Absolute tolerance used for probability bookkeeping.
pub const PROB_EPS: f64 = 1e-9;

/// Residual mass above which an item is reported as low-confidence.
pub const LOW_CONFIDENCE_RESIDUAL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid scale: {0}")]
    InvalidScale(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{what} {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
}

/// The three rated dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Concreteness,
    Valence,
    Arousal,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Concreteness, Variable::Valence, Variable::Arousal];

    pub fn as_str(self) -> &'static str {
        match self {
            Variable::Concreteness => "concreteness",
            Variable::Valence => "valence",
            Variable::Arousal => "arousal",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variable {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "concreteness" => Ok(Variable::Concreteness),
            "valence" => Ok(Variable::Valence),
            "arousal" => Ok(Variable::Arousal),
            other => Err(ModelError::InvalidInput(format!(
                "unknown variable {other:?} (expected concreteness, valence or arousal)"
            ))),
        }
    }
}

/// Bounds, anchor words and end-point labels of a rating scale.
///
/// Points are single-digit integers so that every rating is one numeral
/// token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub min: u8,
    pub max: u8,
    pub low_anchors: Vec<String>,
    pub high_anchors: Vec<String>,
    pub low_label: String,
    pub high_label: String,
}

impl ScaleSpec {
    pub fn new(
        min: u8,
        max: u8,
        low_anchors: Vec<String>,
        high_anchors: Vec<String>,
        low_label: impl Into<String>,
        high_label: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let scale = ScaleSpec {
            min,
            max,
            low_anchors,
            high_anchors,
            low_label: low_label.into(),
            high_label: high_label.into(),
        };
        scale.validate()?;
        Ok(scale)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(1 <= self.min && self.min < self.max && self.max <= 9) {
            return Err(ModelError::InvalidScale(format!(
                "bounds must satisfy 1 <= min < max <= 9, got {}..{}",
                self.min, self.max
            )));
        }
        for (name, anchors) in [("low", &self.low_anchors), ("high", &self.high_anchors)] {
            if anchors.is_empty() || anchors.iter().any(|a| a.trim().is_empty()) {
                return Err(ModelError::InvalidScale(format!(
                    "{name} anchors must be a non-empty list of non-empty words"
                )));
            }
        }
        if self.low_label.trim().is_empty() || self.high_label.trim().is_empty() {
            return Err(ModelError::InvalidScale("labels must be non-empty".into()));
        }
        Ok(())
    }

    pub fn contains(&self, point: u8) -> bool {
        (self.min..=self.max).contains(&point)
    }

    pub fn contains_value(&self, value: f64) -> bool {
        value >= f64::from(self.min) && value <= f64::from(self.max)
    }

    /// Number of scale points.
    pub fn cardinality(&self) -> usize {
        usize::from(self.max - self.min) + 1
    }

    pub fn points(&self) -> impl Iterator<Item = u8> {
        self.min..=self.max
    }
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| (*w).to_string()).collect()
}

/// The scale and anchor words used for each variable by default.
pub fn default_scale(variable: Variable) -> ScaleSpec {
    match variable {
        Variable::Concreteness => ScaleSpec {
            min: 1,
            max: 5,
            low_anchors: words(&["essentialness", "although", "hope"]),
            high_anchors: words(&["bat", "frangipane", "blackbird"]),
            low_label: "very abstract".into(),
            high_label: "very concrete".into(),
        },
        Variable::Valence => ScaleSpec {
            min: 1,
            max: 9,
            low_anchors: words(&["pedophile", "AIDS", "wreck"]),
            high_anchors: words(&["vacation", "fantastic", "laugh"]),
            low_label: "very negative, bad".into(),
            high_label: "very positive, good".into(),
        },
        Variable::Arousal => ScaleSpec {
            min: 1,
            max: 9,
            low_anchors: words(&["grain", "dull", "rest"]),
            high_anchors: words(&["gun", "lover", "thrill"]),
            low_label: "very calm, relaxed".into(),
            high_label: "very aroused, energized".into(),
        },
    }
}

/// A word or multiword expression together with its join key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Expression {
    raw: String,
    key: String,
}

impl Expression {
    pub fn new(raw: impl Into<String>) -> Result<Self, ModelError> {
        let raw = raw.into();
        let key = normalize_key(&raw)
            .map_err(|_| ModelError::InvalidInput("expression is empty".into()))?;
        Ok(Expression { raw, key })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn key(&self) -> &str {
        &self.key
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// Probability mass over integer scale points plus whatever the model put on
/// tokens that are not an in-scale numeral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingDistribution {
    min: u8,
    max: u8,
    mass: BTreeMap<u8, f64>,
    residual: f64,
}

impl RatingDistribution {
    pub fn new(
        scale: &ScaleSpec,
        mass: BTreeMap<u8, f64>,
        residual: f64,
    ) -> Result<Self, ModelError> {
        for (&point, &p) in &mass {
            if !scale.contains(point) {
                return Err(ModelError::OutOfRange {
                    what: "scale point",
                    value: f64::from(point),
                    min: f64::from(scale.min),
                    max: f64::from(scale.max),
                });
            }
            check_probability("probability", p)?;
        }
        check_probability("residual", residual)?;
        let total: f64 = mass.values().sum::<f64>() + residual;
        if total > 1.0 + PROB_EPS {
            return Err(ModelError::InvalidInput(format!(
                "total probability {total} exceeds 1"
            )));
        }
        Ok(RatingDistribution {
            min: scale.min,
            max: scale.max,
            mass,
            residual,
        })
    }

    pub fn mass(&self) -> &BTreeMap<u8, f64> {
        &self.mass
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn bounds(&self) -> (u8, u8) {
        (self.min, self.max)
    }

    pub fn in_scale_mass(&self) -> f64 {
        self.mass.values().sum()
    }

    /// True when no token mapped onto a scale point.
    pub fn is_all_residual(&self) -> bool {
        self.in_scale_mass() <= 0.0
    }

    pub fn is_low_confidence(&self) -> bool {
        self.residual > LOW_CONFIDENCE_RESIDUAL
    }
}

fn check_probability(what: &'static str, p: f64) -> Result<(), ModelError> {
    if p.is_nan() || !(0.0..=1.0 + PROB_EPS).contains(&p) {
        return Err(ModelError::OutOfRange {
            what,
            value: p,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(())
}

/// One expression's estimate for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub expression: Expression,
    pub variable: Variable,
    pub dominant: u8,
    pub expected: f64,
    /// Off-scale probability mass reported by the model.
    pub residual: f64,
    pub relative_rank: Option<f64>,
    pub percentile: Option<u8>,
}

impl NormEstimate {
    pub fn new(
        expression: Expression,
        variable: Variable,
        scale: &ScaleSpec,
        dominant: u8,
        expected: f64,
        residual: f64,
    ) -> Result<Self, ModelError> {
        if !scale.contains(dominant) {
            return Err(ModelError::OutOfRange {
                what: "dominant rating",
                value: f64::from(dominant),
                min: f64::from(scale.min),
                max: f64::from(scale.max),
            });
        }
        if !scale.contains_value(expected) {
            return Err(ModelError::OutOfRange {
                what: "expected rating",
                value: expected,
                min: f64::from(scale.min),
                max: f64::from(scale.max),
            });
        }
        check_probability("residual", residual)?;
        Ok(NormEstimate {
            expression,
            variable,
            dominant,
            expected,
            residual,
            relative_rank: None,
            percentile: None,
        })
    }

    /// Attaches a relative rank and the percentile derived from it.
    pub fn with_rank(mut self, relative_rank: f64) -> Result<Self, ModelError> {
        let percentile = crate::ranking::percentile_rank(relative_rank)
            .map_err(|e| ModelError::InvalidInput(e.to_string()))?;
        self.relative_rank = Some(relative_rank);
        self.percentile = Some(percentile);
        Ok(self)
    }

    pub fn is_low_confidence(&self) -> bool {
        self.residual > LOW_CONFIDENCE_RESIDUAL
    }
}

/// Estimates for one variable over an ordered list of expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    pub variable: Variable,
    pub rows: Vec<NormEstimate>,
}

impl EstimateTable {
    pub fn new(variable: Variable, rows: Vec<NormEstimate>) -> Result<Self, ModelError> {
        let mut seen = std::collections::HashSet::new();
        for row in &rows {
            if row.variable != variable {
                return Err(ModelError::InvalidInput(format!(
                    "{} row {:?} in a {variable} table",
                    row.variable,
                    row.expression.raw()
                )));
            }
            if !seen.insert(row.expression.key()) {
                return Err(ModelError::InvalidInput(format!(
                    "duplicate expression {:?}",
                    row.expression.key()
                )));
            }
        }
        Ok(EstimateTable { variable, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&NormEstimate> {
        self.rows.iter().find(|r| r.expression.key() == key)
    }
}

/// A named rating source (human norms or another model's estimates) keyed by
/// normalized expression.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldNorms {
    pub source_name: String,
    pub variable: Variable,
    pub scale: ScaleSpec,
    ratings: IndexMap<String, f64>,
}

impl GoldNorms {
    pub fn new(
        source_name: impl Into<String>,
        variable: Variable,
        scale: ScaleSpec,
        ratings: IndexMap<String, f64>,
    ) -> Result<Self, ModelError> {
        scale.validate()?;
        let mut normalized = IndexMap::with_capacity(ratings.len());
        for (key, value) in ratings {
            if !scale.contains_value(value) {
                return Err(ModelError::OutOfRange {
                    what: "rating",
                    value,
                    min: f64::from(scale.min),
                    max: f64::from(scale.max),
                });
            }
            let key = normalize_key(&key).map_err(|e| ModelError::InvalidInput(e.to_string()))?;
            if normalized.insert(key.clone(), value).is_some() {
                return Err(ModelError::InvalidInput(format!("duplicate key {key:?}")));
            }
        }
        Ok(GoldNorms {
            source_name: source_name.into(),
            variable,
            scale,
            ratings: normalized,
        })
    }

    pub fn ratings(&self) -> &IndexMap<String, f64> {
        &self.ratings
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.ratings.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }
}

/// Correlation statistics for one pair of sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub pearson: f64,
    pub spearman: f64,
    pub n: usize,
}

/// Source-by-source correlations laid out like a published norms table:
/// Pearson above the diagonal, Spearman below, both computed pairwise-complete.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    sources: Vec<String>,
    // Row-major upper triangle, one slot per unordered pair (i < j).
    cells: Vec<Option<PairStats>>,
}

impl CorrelationMatrix {
    pub fn new(sources: Vec<String>) -> Self {
        let k = sources.len();
        CorrelationMatrix {
            sources,
            cells: vec![None; k * k.saturating_sub(1) / 2],
        }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.sources.len();
        if i == j || i >= k || j >= k {
            return None;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        // Offset of row `a` in the packed upper triangle.
        Some(a * (2 * k - a - 1) / 2 + (b - a - 1))
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn set(&mut self, i: usize, j: usize, stats: Option<PairStats>) -> Result<(), ModelError> {
        let slot = self
            .slot(i, j)
            .ok_or_else(|| ModelError::InvalidInput(format!("no matrix cell ({i}, {j})")))?;
        if let Some(s) = stats {
            for r in [s.pearson, s.spearman] {
                if r.is_nan() || r.abs() > 1.0 + PROB_EPS {
                    return Err(ModelError::OutOfRange {
                        what: "correlation",
                        value: r,
                        min: -1.0,
                        max: 1.0,
                    });
                }
            }
            if s.n < 3 {
                return Err(ModelError::InvalidInput(format!(
                    "populated cell needs n >= 3, got {}",
                    s.n
                )));
            }
        }
        self.cells[slot] = stats;
        Ok(())
    }

    /// Statistics for an unordered pair, if that cell is populated.
    pub fn pair(&self, i: usize, j: usize) -> Option<PairStats> {
        self.slot(i, j).and_then(|s| self.cells[s])
    }

    /// The value displayed at row `i`, column `j`: Pearson when `i < j`,
    /// Spearman when `i > j`.
    pub fn display_value(&self, i: usize, j: usize) -> Option<f64> {
        let stats = self.pair(i, j)?;
        Some(if i < j { stats.pearson } else { stats.spearman })
    }

    pub fn pairwise_n(&self, i: usize, j: usize) -> Option<usize> {
        self.pair(i, j).map(|s| s.n)
    }
}
