use std::io::Write;

use indexmap::IndexMap;

use super::stats::{pearson, spearman, StatsError};
use crate::model::{CorrelationMatrix, EstimateTable, GoldNorms, PairStats};

/// A named column of scores keyed by normalized expression. This is the
/// common currency between gold norms and model estimates in every analysis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub name: String,
    pub values: IndexMap<String, f64>,
}

impl ScoreTable {
    pub fn new(name: impl Into<String>, values: IndexMap<String, f64>) -> Self {
        ScoreTable {
            name: name.into(),
            values,
        }
    }

    pub fn from_pairs<K: Into<String>>(
        name: impl Into<String>,
        pairs: impl IntoIterator<Item = (K, f64)>,
    ) -> Self {
        ScoreTable::new(
            name,
            pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    /// Paired values over the shared keys, in `self`'s order.
    pub fn intersect(&self, other: &ScoreTable) -> (Vec<String>, Vec<f64>, Vec<f64>) {
        let mut keys = Vec::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (k, &x) in &self.values {
            if let Some(&y) = other.values.get(k) {
                keys.push(k.clone());
                xs.push(x);
                ys.push(y);
            }
        }
        (keys, xs, ys)
    }

    pub fn shared_count(&self, other: &ScoreTable) -> usize {
        self.values
            .keys()
            .filter(|k| other.values.contains_key(*k))
            .count()
    }
}

impl From<&GoldNorms> for ScoreTable {
    fn from(g: &GoldNorms) -> Self {
        ScoreTable::new(g.source_name.clone(), g.ratings().clone())
    }
}

/// Which estimate column of an [`EstimateTable`] to analyse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Dominant,
    Expected,
}

impl EstimateTable {
    pub fn scores(&self, name: impl Into<String>, kind: ScoreKind) -> ScoreTable {
        ScoreTable::new(
            name,
            self.rows
                .iter()
                .map(|e| {
                    let v = match kind {
                        ScoreKind::Dominant => f64::from(e.dominant),
                        ScoreKind::Expected => e.expected,
                    };
                    (e.expression.key().to_string(), v)
                })
                .collect(),
        )
    }
}

/// Pearson and Spearman over the keys two tables share.
pub fn compare(a: &ScoreTable, b: &ScoreTable) -> Result<PairStats, StatsError> {
    let (_, xs, ys) = a.intersect(b);
    Ok(PairStats {
        pearson: pearson(&xs, &ys)?,
        spearman: spearman(&xs, &ys)?,
        n: xs.len(),
    })
}

/// Pairwise-complete correlation matrix plus a warning per unpopulated cell.
#[derive(Debug, Clone)]
pub struct MatrixReport {
    pub matrix: CorrelationMatrix,
    pub warnings: Vec<String>,
}

pub fn correlation_matrix(sources: &[ScoreTable]) -> Result<MatrixReport, StatsError> {
    if sources.len() < 2 {
        return Err(StatsError::Invalid(format!(
            "correlation matrix needs at least 2 sources, got {}",
            sources.len()
        )));
    }
    let mut matrix = CorrelationMatrix::new(sources.iter().map(|s| s.name.clone()).collect());
    let mut warnings = Vec::new();
    for i in 0..sources.len() {
        for j in (i + 1)..sources.len() {
            let cell = match compare(&sources[i], &sources[j]) {
                Ok(stats) => Some(stats),
                Err(e) => {
                    warnings.push(format!("{} x {}: {e}", sources[i].name, sources[j].name));
                    None
                }
            };
            matrix
                .set(i, j, cell)
                .map_err(|e| StatsError::Invalid(e.to_string()))?;
        }
    }
    Ok(MatrixReport { matrix, warnings })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl CorrelationMatrix {
    /// Long form: `source_a,source_b,pearson,spearman,n`, one row per pair.
    pub fn write_long_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source_a", "source_b", "pearson", "spearman", "n"])?;
        let names = self.sources();
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                let p = self.pair(i, j);
                w.write_record([
                    names[i].clone(),
                    names[j].clone(),
                    fmt_opt(p.map(|s| s.pearson)),
                    fmt_opt(p.map(|s| s.spearman)),
                    p.map(|s| s.n.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Square layout with Pearson above and Spearman below the diagonal.
    pub fn write_square_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let names = self.sources();
        let mut header = vec!["source".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (i, name) in names.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend((0..names.len()).map(|j| fmt_opt(self.display_value(i, j))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(name: &str, pairs: &[(&str, f64)]) -> ScoreTable {
        ScoreTable::from_pairs(name, pairs.iter().map(|&(k, v)| (k, v)))
    }

    #[test]
    fn identical_sources_correlate_perfectly() {
        let a = table("a", &[("x", 1.0), ("y", 2.5), ("z", 2.0), ("w", 4.0)]);
        let mut b = a.clone();
        b.name = "b".into();
        let report = correlation_matrix(&[a, b]).unwrap();
        let cell = report.matrix.pair(0, 1).unwrap();
        assert!((cell.pearson - 1.0).abs() < 1e-15);
        assert!((cell.spearman - 1.0).abs() < 1e-15);
        assert_eq!(cell.n, 4);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn sparse_pair_is_absent_with_warning() {
        let a = table("a", &[("x", 1.0), ("y", 2.0), ("z", 3.0)]);
        let b = table("b", &[("x", 1.0), ("y", 2.0), ("q", 3.0)]);
        let c = table("c", &[("x", 3.0), ("y", 1.0), ("z", 2.0)]);
        let report = correlation_matrix(&[a, b, c]).unwrap();
        assert!(report.matrix.pair(0, 1).is_none());
        assert!(report.matrix.pair(0, 2).is_some());
        assert_eq!(report.warnings.len(), 2);
        assert!(report.warnings[0].starts_with("a x b"));
    }

    #[test]
    fn needs_two_sources() {
        assert!(correlation_matrix(&[table("a", &[])]).is_err());
    }

    #[test]
    fn csv_layouts() {
        let a = table("a", &[("x", 1.0), ("y", 2.0), ("z", 3.0)]);
        let b = table("b", &[("x", 1.0), ("y", 3.0), ("z", 2.0)]);
        let m = correlation_matrix(&[a, b]).unwrap().matrix;
        let mut long = Vec::new();
        m.write_long_csv(&mut long).unwrap();
        assert_eq!(
            String::from_utf8(long).unwrap(),
            "source_a,source_b,pearson,spearman,n\na,b,0.500000,0.500000,3\n"
        );
        let mut square = Vec::new();
        m.write_square_csv(&mut square).unwrap();
        assert_eq!(
            String::from_utf8(square).unwrap(),
            "source,a,b\na,,0.500000\nb,0.500000,\n"
        );
    }
}
