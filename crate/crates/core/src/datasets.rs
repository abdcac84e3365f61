//! CSV/TSV ingestion of expression lists, gold norms and estimate tables, and
//! the master-list export.
//!
//! Every loader accounts for each data row: it is either kept or listed in the
//! [`LoadReport`] with the reason it was dropped.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use crate::analytics::ScoreTable;
use crate::model::{EstimateTable, Expression, GoldNorms, NormEstimate, ScaleSpec, Variable};

/// Share of rejected gold rows above which loading fails outright.
pub const MAX_REJECTED_FRACTION: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing column {column:?} (found: {found})")]
    MissingColumn {
        path: PathBuf,
        column: String,
        found: String,
    },
    #[error("{path}: no usable rows")]
    Empty { path: PathBuf },
    #[error("{path}: rejected {rejected} of {total} rows (limit 5%)")]
    TooManyRejected {
        path: PathBuf,
        rejected: usize,
        total: usize,
    },
    #[error("{variable} table is missing {} expression(s) of the shared universe: {}", missing.len(), preview(missing))]
    UniverseMismatch {
        variable: Variable,
        missing: Vec<String>,
    },
    #[error("{0}")]
    Invalid(String),
}

fn preview(keys: &[String]) -> String {
    let shown: Vec<&str> = keys.iter().take(10).map(String::as_str).collect();
    let more = keys.len().saturating_sub(shown.len());
    if more > 0 {
        format!("{} (+{more} more)", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

/// Join key: trimmed, internal whitespace collapsed to single spaces,
/// lowercased. Articles and inflections are left alone, so "a blind spot" and
/// "blind spot" stay distinct.
pub fn normalize_key(raw: &str) -> Result<String, DatasetError> {
    let key = raw
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    if key.is_empty() {
        return Err(DatasetError::Invalid("empty expression".into()));
    }
    Ok(key)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    /// 1-based line in the file, header included.
    pub line: u64,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub rows: usize,
    pub kept: usize,
    /// Rows excluded by the known-flag filter.
    pub filtered: Vec<RowIssue>,
    pub duplicates: Vec<RowIssue>,
    pub rejected: Vec<RowIssue>,
}

impl LoadReport {
    pub fn dropped(&self) -> usize {
        self.filtered.len() + self.duplicates.len() + self.rejected.len()
    }

    fn drop(&mut self, kind: DropKind, line: u64, text: &str, reason: impl Into<String>) {
        let issue = RowIssue {
            line,
            text: text.to_string(),
            reason: reason.into(),
        };
        match kind {
            DropKind::Filtered => self.filtered.push(issue),
            DropKind::Duplicate => self.duplicates.push(issue),
            DropKind::Rejected => self.rejected.push(issue),
        }
    }

    /// `line,kind,text,reason`
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["line", "kind", "text", "reason"])?;
        for (kind, issues) in [
            ("filtered", &self.filtered),
            ("duplicate", &self.duplicates),
            ("rejected", &self.rejected),
        ] {
            for i in issues {
                w.write_record([
                    i.line.to_string(),
                    kind.into(),
                    i.text.clone(),
                    i.reason.clone(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

enum DropKind {
    Filtered,
    Duplicate,
    Rejected,
}

fn delimiter_for(path: &Path) -> u8 {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
    {
        Some(ext) if ext == "tsv" || ext == "tab" => b'\t',
        _ => b',',
    }
}

struct Table {
    path: PathBuf,
    headers: Vec<String>,
    reader: csv::Reader<Box<dyn Read>>,
}

impl Table {
    fn open(path: &Path) -> Result<Self, DatasetError> {
        let file = File::open(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter_for(path))
            .trim(csv::Trim::All)
            .from_reader(Box::new(io::BufReader::new(file)) as Box<dyn Read>);
        let headers = reader
            .headers()
            .map_err(|source| DatasetError::Csv {
                path: path.to_path_buf(),
                source,
            })?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_string())
            .collect();
        Ok(Table {
            path: path.to_path_buf(),
            headers,
            reader,
        })
    }

    fn find(&self, column: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == column).or_else(|| {
            self.headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(column))
        })
    }

    fn column(&self, column: &str) -> Result<usize, DatasetError> {
        self.find(column)
            .ok_or_else(|| DatasetError::MissingColumn {
                path: self.path.clone(),
                column: column.to_string(),
                found: self.headers.join(", "),
            })
    }

    /// Data rows with their 1-based line numbers.
    fn rows(
        &mut self,
    ) -> impl Iterator<Item = Result<(u64, csv::StringRecord), DatasetError>> + '_ {
        let path = self.path.clone();
        self.reader.records().map(move |r| {
            let rec = r.map_err(|source| DatasetError::Csv {
                path: path.clone(),
                source,
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            Ok((line, rec))
        })
    }
}

fn is_truthy(flag: &str) -> bool {
    match flag.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "t" => true,
        other => other.parse::<f64>().is_ok_and(|v| v > 0.0),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpressionListOptions {
    pub column: String,
    /// When set, rows whose flag is not truthy are filtered out.
    pub known_column: Option<String>,
}

impl Default for ExpressionListOptions {
    fn default() -> Self {
        ExpressionListOptions {
            column: "expression".into(),
            known_column: None,
        }
    }
}

/// Loads expressions in file order. Duplicate keys keep the first occurrence.
pub fn load_expression_list(
    path: impl AsRef<Path>,
    opts: &ExpressionListOptions,
) -> Result<(Vec<Expression>, LoadReport), DatasetError> {
    let mut table = Table::open(path.as_ref())?;
    let col = table.column(&opts.column)?;
    let known = opts
        .known_column
        .as_deref()
        .map(|c| table.column(c))
        .transpose()?;
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in table.rows() {
        let (line, rec) = row?;
        report.rows += 1;
        let text = rec.get(col).unwrap_or("");
        if let Some(k) = known {
            let flag = rec.get(k).unwrap_or("");
            if !is_truthy(flag) {
                report.drop(
                    DropKind::Filtered,
                    line,
                    text,
                    format!("known flag {flag:?}"),
                );
                continue;
            }
        }
        let Ok(expr) = Expression::new(text) else {
            report.drop(DropKind::Rejected, line, text, "empty expression");
            continue;
        };
        if !seen.insert(expr.key().to_string()) {
            report.drop(
                DropKind::Duplicate,
                line,
                text,
                format!("duplicate key {:?}", expr.key()),
            );
            continue;
        }
        out.push(expr);
    }
    report.kept = out.len();
    if out.is_empty() {
        return Err(DatasetError::Empty {
            path: path.as_ref().to_path_buf(),
        });
    }
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldColumns {
    pub key: String,
    pub rating: String,
}

impl Default for GoldColumns {
    fn default() -> Self {
        GoldColumns {
            key: "expression".into(),
            rating: "rating".into(),
        }
    }
}

/// Loads a gold norm file, rejecting rows that are unparseable, off-scale or
/// duplicated. More than 5% rejected rows is an error.
pub fn load_gold_norms(
    path: impl AsRef<Path>,
    source_name: &str,
    variable: Variable,
    scale: &ScaleSpec,
    cols: &GoldColumns,
) -> Result<(GoldNorms, LoadReport), DatasetError> {
    let path = path.as_ref();
    scale
        .validate()
        .map_err(|e| DatasetError::Invalid(e.to_string()))?;
    let mut table = Table::open(path)?;
    let kc = table.column(&cols.key)?;
    let rc = table.column(&cols.rating)?;
    let mut report = LoadReport::default();
    let mut ratings = IndexMap::new();
    for row in table.rows() {
        let (line, rec) = row?;
        report.rows += 1;
        let text = rec.get(kc).unwrap_or("");
        let Ok(key) = normalize_key(text) else {
            report.drop(DropKind::Rejected, line, text, "empty expression");
            continue;
        };
        let raw_rating = rec.get(rc).unwrap_or("");
        let rating = match raw_rating.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                report.drop(
                    DropKind::Rejected,
                    line,
                    text,
                    format!("unparseable rating {raw_rating:?}"),
                );
                continue;
            }
        };
        if !scale.contains_value(rating) {
            report.drop(
                DropKind::Rejected,
                line,
                text,
                format!("rating {rating} outside {}..{}", scale.min, scale.max),
            );
            continue;
        }
        if ratings.contains_key(&key) {
            report.drop(
                DropKind::Duplicate,
                line,
                text,
                format!("duplicate key {key:?}"),
            );
            continue;
        }
        ratings.insert(key, rating);
    }
    report.kept = ratings.len();
    if ratings.is_empty() {
        return Err(DatasetError::Empty {
            path: path.to_path_buf(),
        });
    }
    let bad = report.rejected.len() + report.duplicates.len();
    if bad as f64 > MAX_REJECTED_FRACTION * report.rows as f64 {
        return Err(DatasetError::TooManyRejected {
            path: path.to_path_buf(),
            rejected: bad,
            total: report.rows,
        });
    }
    let gold = GoldNorms::new(source_name, variable, scale.clone(), ratings)
        .map_err(|e| DatasetError::Invalid(e.to_string()))?;
    Ok((gold, report))
}

/// Value columns tried, in order, when none is named explicitly.
pub const VALUE_COLUMN_CANDIDATES: [&str; 3] = ["expected", "prob_estimate", "rating"];

/// Loads any keyed numeric column as a [`ScoreTable`]. Rows with an empty
/// value are skipped; unparseable values are an error.
pub fn load_score_table(
    path: impl AsRef<Path>,
    name: &str,
    key_column: &str,
    value_column: Option<&str>,
) -> Result<ScoreTable, DatasetError> {
    let path = path.as_ref();
    let mut table = Table::open(path)?;
    let kc = table.column(key_column)?;
    let vc = match value_column {
        Some(c) => table.column(c)?,
        None => VALUE_COLUMN_CANDIDATES
            .iter()
            .find_map(|c| table.find(c))
            .ok_or_else(|| DatasetError::MissingColumn {
                path: path.to_path_buf(),
                column: VALUE_COLUMN_CANDIDATES.join("|"),
                found: table.headers.join(", "),
            })?,
    };
    let mut values = IndexMap::new();
    for row in table.rows() {
        let (line, rec) = row?;
        let raw = rec.get(vc).unwrap_or("");
        if raw.is_empty() {
            continue;
        }
        let key = normalize_key(rec.get(kc).unwrap_or(""))
            .map_err(|_| DatasetError::Invalid(format!("{}:{line}: empty key", path.display())))?;
        let v: f64 = raw.parse().map_err(|_| {
            DatasetError::Invalid(format!(
                "{}:{line}: unparseable value {raw:?}",
                path.display()
            ))
        })?;
        if values.insert(key.clone(), v).is_some() {
            return Err(DatasetError::Invalid(format!(
                "{}:{line}: duplicate key {key:?}",
                path.display()
            )));
        }
    }
    if values.is_empty() {
        return Err(DatasetError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(ScoreTable::new(name, values))
}

pub const ESTIMATE_HEADER: [&str; 8] = [
    "expression",
    "variable",
    "dominant",
    "expected",
    "residual",
    "low_confidence",
    "relative_rank",
    "percentile",
];

fn opt_to_string<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes an estimate table. Reals use the shortest representation that
/// parses back to the same value.
pub fn write_estimates<W: Write>(table: &EstimateTable, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ESTIMATE_HEADER)?;
    for e in &table.rows {
        w.write_record([
            e.expression.raw().to_string(),
            e.variable.to_string(),
            e.dominant.to_string(),
            e.expected.to_string(),
            e.residual.to_string(),
            u8::from(e.is_low_confidence()).to_string(),
            opt_to_string(e.relative_rank),
            opt_to_string(e.percentile),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_estimates(table: &EstimateTable, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = create(path)?;
    write_estimates(table, io::BufWriter::new(file)).map_err(|source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File, DatasetError> {
    File::create(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    column: &str,
    raw: &str,
) -> Result<T, DatasetError> {
    raw.parse().map_err(|_| {
        DatasetError::Invalid(format!(
            "{}:{line}: bad {column} value {raw:?}",
            path.display()
        ))
    })
}

fn parse_opt<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    column: &str,
    raw: &str,
) -> Result<Option<T>, DatasetError> {
    if raw.is_empty() {
        Ok(None)
    } else {
        parse_field(path, line, column, raw).map(Some)
    }
}

/// Builds one estimate row and checks its rank columns against each other.
#[allow(clippy::too_many_arguments)]
fn build_estimate(
    path: &Path,
    line: u64,
    expression: &str,
    variable: Variable,
    dominant: u8,
    expected: f64,
    residual: f64,
    relative_rank: Option<f64>,
    percentile: Option<u8>,
) -> Result<NormEstimate, DatasetError> {
    let ctx = |e: &dyn std::fmt::Display| {
        DatasetError::Invalid(format!("{}:{line}: {e}", path.display()))
    };
    let expr = Expression::new(expression).map_err(|e| ctx(&e))?;
    let scale = crate::model::default_scale(variable);
    let mut est = NormEstimate::new(expr, variable, &scale, dominant, expected, residual)
        .map_err(|e| ctx(&e))?;
    match (relative_rank, percentile) {
        (Some(rel), pct) => {
            est = est.with_rank(rel).map_err(|e| ctx(&e))?;
            if pct.is_some() && pct != est.percentile {
                return Err(ctx(&format!(
                    "percentile {} disagrees with relative rank {rel}",
                    opt_to_string(pct)
                )));
            }
        }
        (None, Some(_)) => return Err(ctx(&"percentile without relative rank")),
        (None, None) => {}
    }
    Ok(est)
}

/// Reads a file written by [`write_estimates`]. Every row must carry the
/// same variable.
pub fn load_estimates(path: impl AsRef<Path>) -> Result<EstimateTable, DatasetError> {
    let path = path.as_ref();
    let mut table = Table::open(path)?;
    let idx: Vec<usize> = ESTIMATE_HEADER
        .iter()
        .filter(|c| **c != "low_confidence")
        .map(|c| table.column(c))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut variable = None;
    for row in table.rows() {
        let (line, rec) = row?;
        let f = |i: usize| rec.get(idx[i]).unwrap_or("");
        let var: Variable = parse_field(path, line, "variable", f(1))?;
        if *variable.get_or_insert(var) != var {
            return Err(DatasetError::Invalid(format!(
                "{}:{line}: mixed variables in one estimate file",
                path.display()
            )));
        }
        rows.push(build_estimate(
            path,
            line,
            f(0),
            var,
            parse_field(path, line, "dominant", f(2))?,
            parse_field(path, line, "expected", f(3))?,
            parse_field(path, line, "residual", f(4))?,
            parse_opt(path, line, "relative_rank", f(5))?,
            parse_opt(path, line, "percentile", f(6))?,
        )?);
    }
    let variable = variable.ok_or_else(|| DatasetError::Empty {
        path: path.to_path_buf(),
    })?;
    EstimateTable::new(variable, rows)
        .map_err(|e| DatasetError::Invalid(format!("{}: {e}", path.display())))
}

const MASTER_SUFFIXES: [&str; 4] = ["dominant", "prob_estimate", "relative_rank", "percentile"];

/// `expression` followed by four columns per variable.
pub fn master_list_header(variables: &[Variable]) -> Vec<String> {
    let mut header = vec!["expression".to_string()];
    for v in variables {
        header.extend(MASTER_SUFFIXES.iter().map(|s| format!("{v}_{s}")));
    }
    header
}

/// Orders the tables by variable, checks they cover the same expressions,
/// and fills in rank columns where they are missing. Also returns the row
/// order, which follows the first table as supplied.
fn prepare_master(
    tables: &[EstimateTable],
) -> Result<(Vec<EstimateTable>, Vec<Expression>), DatasetError> {
    let Some(first) = tables.first() else {
        return Err(DatasetError::Invalid(
            "master list needs at least one variable".into(),
        ));
    };
    let order: Vec<Expression> = first.rows.iter().map(|r| r.expression.clone()).collect();
    let mut sorted: Vec<EstimateTable> = tables.to_vec();
    sorted.sort_by_key(|t| t.variable);
    for w in sorted.windows(2) {
        if w[0].variable == w[1].variable {
            return Err(DatasetError::Invalid(format!(
                "variable {} supplied twice",
                w[0].variable
            )));
        }
    }
    let universe: HashSet<&str> = order.iter().map(Expression::key).collect();
    for t in &sorted {
        let keys: HashSet<&str> = t.rows.iter().map(|r| r.expression.key()).collect();
        let mut missing: Vec<String> = order
            .iter()
            .map(Expression::key)
            .filter(|k| !keys.contains(k))
            .map(str::to_string)
            .collect();
        missing.extend(
            t.rows
                .iter()
                .map(|r| r.expression.key())
                .filter(|k| !universe.contains(k))
                .map(str::to_string),
        );
        if !missing.is_empty() {
            return Err(DatasetError::UniverseMismatch {
                variable: t.variable,
                missing,
            });
        }
    }
    let ranked = sorted
        .into_iter()
        .map(|t| {
            if t.rows.iter().all(|r| r.relative_rank.is_some()) {
                Ok(t)
            } else {
                crate::ranking::assign_ranks(t).map_err(|e| DatasetError::Invalid(e.to_string()))
            }
        })
        .collect::<Result<_, _>>()?;
    Ok((ranked, order))
}

/// Writes the master list: one row per expression, four columns per variable.
pub fn write_master_list<W: Write>(tables: &[EstimateTable], out: W) -> Result<(), DatasetError> {
    let (tables, order) = prepare_master(tables)?;
    let variables: Vec<Variable> = tables.iter().map(|t| t.variable).collect();
    let lookup: Vec<HashMap<&str, &NormEstimate>> = tables
        .iter()
        .map(|t| t.rows.iter().map(|r| (r.expression.key(), r)).collect())
        .collect();
    let csv_err = |source| DatasetError::Csv {
        path: PathBuf::from("<master list>"),
        source,
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(master_list_header(&variables))
        .map_err(csv_err)?;
    for expr in &order {
        let mut rec = vec![expr.raw().to_string()];
        for map in &lookup {
            let e = map[expr.key()];
            rec.push(e.dominant.to_string());
            rec.push(e.expected.to_string());
            rec.push(opt_to_string(e.relative_rank));
            rec.push(opt_to_string(e.percentile));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: PathBuf::from("<master list>"),
        source,
    })?;
    Ok(())
}

pub fn export_master_list(
    tables: &[EstimateTable],
    path: impl AsRef<Path>,
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = create(path)?;
    write_master_list(tables, io::BufWriter::new(file))
}

/// Reads a master list back into one estimate table per variable.
pub fn load_master_list(path: impl AsRef<Path>) -> Result<Vec<EstimateTable>, DatasetError> {
    let path = path.as_ref();
    let mut table = Table::open(path)?;
    if table.headers.first().map(String::as_str) != Some("expression")
        || table.headers.len() < 5
        || (table.headers.len() - 1) % 4 != 0
    {
        return Err(DatasetError::Invalid(format!(
            "{}: not a master list header: {}",
            path.display(),
            table.headers.join(",")
        )));
    }
    let mut variables = Vec::new();
    for group in table.headers[1..].chunks(4) {
        let var_name = group[0].strip_suffix("_dominant").unwrap_or_default();
        let var: Variable = var_name.parse().map_err(|_| {
            DatasetError::Invalid(format!("{}: bad column {:?}", path.display(), group[0]))
        })?;
        let expected: Vec<String> = MASTER_SUFFIXES
            .iter()
            .map(|s| format!("{var}_{s}"))
            .collect();
        if group != expected.as_slice() {
            return Err(DatasetError::Invalid(format!(
                "{}: expected columns {}",
                path.display(),
                expected.join(",")
            )));
        }
        variables.push(var);
    }
    let mut rows: Vec<Vec<NormEstimate>> = vec![Vec::new(); variables.len()];
    for row in table.rows() {
        let (line, rec) = row?;
        let expr = rec.get(0).unwrap_or("");
        for (vi, &var) in variables.iter().enumerate() {
            let f = |k: usize| rec.get(1 + vi * 4 + k).unwrap_or("");
            rows[vi].push(build_estimate(
                path,
                line,
                expr,
                var,
                parse_field(path, line, "dominant", f(0))?,
                parse_field(path, line, "prob_estimate", f(1))?,
                0.0,
                parse_opt(path, line, "relative_rank", f(2))?,
                parse_opt(path, line, "percentile", f(3))?,
            )?);
        }
    }
    if rows.first().is_none_or(Vec::is_empty) {
        return Err(DatasetError::Empty {
            path: path.to_path_buf(),
        });
    }
    variables
        .into_iter()
        .zip(rows)
        .map(|(v, r)| EstimateTable::new(v, r).map_err(|e| DatasetError::Invalid(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_scale;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn normalize_rules() {
        assert_eq!(
            normalize_key("  Merry   Christmas ").unwrap(),
            "merry christmas"
        );
        assert_eq!(normalize_key("A").unwrap(), "a");
        assert_ne!(
            normalize_key("blind spot").unwrap(),
            normalize_key("a blind spot").unwrap()
        );
        assert_eq!(
            normalize_key("Tab\tSeparated\nwords").unwrap(),
            "tab separated words"
        );
        assert!(normalize_key(" \t ").is_err());
    }

    #[test]
    fn expression_list_order_dedup_and_filter() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "words.csv",
            "expression,known\nshoot a film,1\nfat cat,1\nShoot  a film,1\n1 timothy,0\nhold water,1\n",
        );
        let (list, report) = load_expression_list(&p, &ExpressionListOptions::default()).unwrap();
        let raws: Vec<&str> = list.iter().map(|e| e.raw()).collect();
        assert_eq!(raws, ["shoot a film", "fat cat", "1 timothy", "hold water"]);
        assert_eq!(report.duplicates.len(), 1);
        assert_eq!(report.duplicates[0].line, 4);

        let opts = ExpressionListOptions {
            known_column: Some("known".into()),
            ..Default::default()
        };
        let (list, report) = load_expression_list(&p, &opts).unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(report.filtered.len(), 1);
        assert_eq!(report.kept + report.dropped(), report.rows);
    }

    #[test]
    fn expression_list_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "w.csv", "word\nx\n");
        assert!(matches!(
            load_expression_list(&p, &ExpressionListOptions::default()),
            Err(DatasetError::MissingColumn { .. })
        ));
        let p = write(&dir, "e.csv", "expression\n");
        assert!(matches!(
            load_expression_list(&p, &ExpressionListOptions::default()),
            Err(DatasetError::Empty { .. })
        ));
        assert!(matches!(
            load_expression_list(
                dir.path().join("nope.csv"),
                &ExpressionListOptions::default()
            ),
            Err(DatasetError::Io { .. })
        ));
    }

    #[test]
    fn tsv_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "w.tsv", "Word\tConc\nbat\t4.9\nhope\t1.2\n");
        let cols = GoldColumns {
            key: "Word".into(),
            rating: "Conc".into(),
        };
        let scale = default_scale(Variable::Concreteness);
        let (g, _) = load_gold_norms(&p, "b", Variable::Concreteness, &scale, &cols).unwrap();
        assert_eq!(g.get("bat"), Some(4.9));
    }

    #[test]
    fn gold_rejects_out_of_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("expression,rating\n");
        for i in 0..10 {
            body.push_str(&format!("w{i},{}\n", 1.0 + f64::from(i) * 0.5));
        }
        let scale = default_scale(Variable::Valence);
        let ok = write(&dir, "ok.csv", &body);
        let (g, r) =
            load_gold_norms(&ok, "w", Variable::Valence, &scale, &GoldColumns::default()).unwrap();
        assert_eq!(g.len(), 10);
        assert!(r.rejected.is_empty());

        // One bad row in 21 stays under the 5% limit.
        let mut big = body.clone();
        for i in 10..20 {
            big.push_str(&format!("w{i},5\n"));
        }
        big.push_str("bad,9.5\n");
        let p = write(&dir, "big.csv", &big);
        let (g, r) =
            load_gold_norms(&p, "w", Variable::Valence, &scale, &GoldColumns::default()).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(r.rejected.len(), 1);
        assert_eq!(r.kept + r.dropped(), r.rows);

        body.push_str("bad,9.5\n");
        let p = write(&dir, "bad.csv", &body);
        assert!(matches!(
            load_gold_norms(&p, "w", Variable::Valence, &scale, &GoldColumns::default()),
            Err(DatasetError::TooManyRejected {
                rejected: 1,
                total: 11,
                ..
            })
        ));
    }

    fn table(var: Variable, items: &[(&str, u8, f64)]) -> EstimateTable {
        let scale = default_scale(var);
        EstimateTable::new(
            var,
            items
                .iter()
                .map(|&(e, d, x)| {
                    NormEstimate::new(Expression::new(e).unwrap(), var, &scale, d, x, 0.0).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn master_list_schema_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let tables = [
            table(
                Variable::Valence,
                &[("pure joy", 9, 8.91), ("war, famine", 1, 1.2)],
            ),
            table(
                Variable::Concreteness,
                &[("war, famine", 3, 2.75), ("pure joy", 2, 1.5)],
            ),
            table(
                Variable::Arousal,
                &[("pure joy", 6, 6.0), ("war, famine", 7, 7.125)],
            ),
        ];
        let p1 = dir.path().join("m1.csv");
        export_master_list(&tables, &p1).unwrap();
        let text = std::fs::read_to_string(&p1).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 13);
        assert_eq!(
            text,
            "expression,concreteness_dominant,concreteness_prob_estimate,concreteness_relative_rank,\
             concreteness_percentile,valence_dominant,valence_prob_estimate,valence_relative_rank,\
             valence_percentile,arousal_dominant,arousal_prob_estimate,arousal_relative_rank,\
             arousal_percentile\n\
             pure joy,2,1.5,0.5,50,9,8.91,1,100,6,6,0.5,50\n\
             \"war, famine\",3,2.75,1,100,1,1.2,0.5,50,7,7.125,1,100\n"
        );
        let loaded = load_master_list(&p1).unwrap();
        assert_eq!(loaded.len(), 3);
        let p2 = dir.path().join("m2.csv");
        export_master_list(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn master_list_universe_mismatch() {
        let tables = [
            table(Variable::Valence, &[("a", 5, 5.0), ("b", 5, 5.0)]),
            table(Variable::Arousal, &[("a", 5, 5.0), ("c", 5, 5.0)]),
        ];
        let err = write_master_list(&tables, Vec::new()).unwrap_err();
        match err {
            DatasetError::UniverseMismatch { variable, missing } => {
                assert_eq!(variable, Variable::Arousal);
                assert_eq!(missing, ["b", "c"]);
            }
            other => panic!("{other}"),
        }
        let dup = [
            table(Variable::Valence, &[("a", 5, 5.0)]),
            table(Variable::Valence, &[("a", 5, 5.0)]),
        ];
        assert!(write_master_list(&dup, Vec::new()).is_err());
    }

    #[test]
    fn estimates_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = crate::ranking::assign_ranks(table(
            Variable::Concreteness,
            &[
                ("bat", 5, 4.9),
                ("hope", 1, 1.0 / 3.0 + 1.0),
                ("blind spot", 3, 3.17),
            ],
        ))
        .unwrap();
        let p = dir.path().join("est.csv");
        save_estimates(&t, &p).unwrap();
        let back = load_estimates(&p).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn score_table_picks_value_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "s.csv",
            "expression,dominant,expected\nA,4,3.5\nb,2,\n",
        );
        let t = load_score_table(&p, "gpt", "expression", None).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("a"), Some(3.5));
        let t = load_score_table(&p, "gpt", "expression", Some("dominant")).unwrap();
        assert_eq!(t.get("b"), Some(2.0));
    }
}
