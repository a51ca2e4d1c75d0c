//! CSV and JSON ingestion/emission for matrices and vectors, plus the
//! `R0:R1:step` sweep specification.
//!
//! CSV: comma separated, `.` decimal point, `#` starts a comment line. An
//! optional first row of labels is recognised when any of its fields is not a
//! number. JSON: `{"labels": [...], "rows": [[...]]}` for matrices and
//! `{"labels": [...], "values": [...]}` for vectors.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chain::{default_labels, ProbabilityVector, StochasticMatrix};
use crate::error::{Error, Result};

/// Upper bound on the number of points a sweep spec may expand to.
pub const MAX_SWEEP_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown format {other:?} (expected csv or json)"
            ))),
        }
    }
}

/// A finite real vector with optional labels (payoff vectors are not
/// probability vectors, so they stay in this raw form).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVector {
    pub values: Vec<f64>,
    pub labels: Option<Vec<String>>,
}

impl LabeledVector {
    pub fn into_probability(self) -> Result<ProbabilityVector> {
        match self.labels {
            Some(l) => ProbabilityVector::with_labels(self.values, l),
            None => ProbabilityVector::new(self.values),
        }
    }
}

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<(usize, Vec<f64>)>,
}

fn parse_number(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("not a number: {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value {field:?}"),
        });
    }
    Ok(v)
}

fn read_table(text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let is_header =
            header.is_none() && rows.is_empty() && rec.iter().any(|f| f.parse::<f64>().is_err());
        if is_header {
            header = Some(rec.iter().map(str::to_owned).collect());
            continue;
        }
        let values = rec
            .iter()
            .map(|f| parse_number(f, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, values));
    }
    Ok(Table { header, rows })
}

/// Parses a square row-stochastic matrix from CSV.
pub fn parse_matrix_csv(text: &str) -> Result<StochasticMatrix> {
    let table = read_table(text)?;
    if table.rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = table.rows.len();
    for (line, row) in &table.rows {
        if row.len() != n {
            return Err(Error::Parse {
                line: *line,
                msg: format!("expected {n} fields, found {}", row.len()),
            });
        }
    }
    let rows = table.rows.into_iter().map(|(_, r)| r).collect();
    match table.header {
        Some(h) => StochasticMatrix::with_labels(rows, h),
        None => StochasticMatrix::new(rows),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    #[serde(default)]
    labels: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorDoc {
    #[serde(default)]
    labels: Option<Vec<String>>,
    #[serde(default)]
    values: Option<Vec<f64>>,
    #[serde(default)]
    rows: Option<Vec<Vec<f64>>>,
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    }
}

/// Parses a square row-stochastic matrix from `{"labels": [...], "rows": [[...]]}`.
pub fn parse_matrix_json(text: &str) -> Result<StochasticMatrix> {
    let doc: MatrixDoc = serde_json::from_str(text).map_err(json_error)?;
    match doc.labels {
        Some(l) => StochasticMatrix::with_labels(doc.rows, l),
        None => StochasticMatrix::new(doc.rows),
    }
}

pub fn parse_matrix(text: &str, format: Format) -> Result<StochasticMatrix> {
    match format {
        Format::Csv => parse_matrix_csv(text),
        Format::Json => parse_matrix_json(text),
    }
}

/// Parses a vector given either as one CSV row or as one CSV column.
pub fn parse_vector_csv(text: &str) -> Result<LabeledVector> {
    let table = read_table(text)?;
    let values: Vec<f64> = match table.rows.as_slice() {
        [] => return Err(Error::EmptyInput),
        [(_, row)] => row.clone(),
        many => {
            let mut out = Vec::with_capacity(many.len());
            for (line, row) in many {
                if row.len() != 1 {
                    return Err(Error::Parse {
                        line: *line,
                        msg: "a vector must be a single row or a single column".into(),
                    });
                }
                out.push(row[0]);
            }
            out
        }
    };
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let labels = match table.header {
        Some(h) if h.len() == values.len() => Some(h),
        Some(h) if h.len() == 1 && table.rows.len() > 1 => None,
        Some(h) => {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: h.len(),
            })
        }
        None => None,
    };
    Ok(LabeledVector { values, labels })
}

/// Parses `{"labels": [...], "values": [...]}`; a single-row or single-column
/// `"rows"` array is accepted in place of `"values"`.
pub fn parse_vector_json(text: &str) -> Result<LabeledVector> {
    let doc: VectorDoc = serde_json::from_str(text).map_err(json_error)?;
    let values = match (doc.values, doc.rows) {
        (Some(v), None) => v,
        (None, Some(rows)) => {
            if rows.len() == 1 {
                rows.into_iter().next().unwrap_or_default()
            } else if rows.iter().all(|r| r.len() == 1) {
                rows.into_iter().map(|r| r[0]).collect()
            } else {
                return Err(Error::Parse {
                    line: 1,
                    msg: "a vector must be a single row or a single column".into(),
                });
            }
        }
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "expected exactly one of \"values\" or \"rows\"".into(),
            })
        }
    };
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(l) = &doc.labels {
        if l.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: l.len(),
            });
        }
    }
    Ok(LabeledVector {
        values,
        labels: doc.labels,
    })
}

pub fn parse_vector(text: &str, format: Format) -> Result<LabeledVector> {
    let v = match format {
        Format::Csv => parse_vector_csv(text)?,
        Format::Json => parse_vector_json(text)?,
    };
    if let Some((index, &value)) = v.values.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(v)
}

/// Expands `R0:R1:step` into the grid `R0, R0+step, …` up to and including R1.
///
/// Grid points are rounded to 12 decimals so that `0:1:0.1` yields `0.3`
/// rather than `0.30000000000000004`.
pub fn parse_sweep_spec(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::Parse {
        line: 1,
        msg: format!("sweep spec {spec:?}: {msg}"),
    };
    let parts: Vec<&str> = spec.trim().split(':').collect();
    let [a, b, s] = parts.as_slice() else {
        return Err(bad("expected start:stop:step"));
    };
    let num = |f: &str| -> Result<f64> {
        let v: f64 = f.trim().parse().map_err(|_| bad("not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("non-finite value"))
        }
    };
    let (start, stop, step) = (num(a)?, num(b)?, num(s)?);
    if step <= 0.0 {
        return Err(bad("step must be positive"));
    }
    if stop < start {
        return Err(bad("stop must not be below start"));
    }
    let count = ((stop - start) / step + 1e-9).floor();
    if count.is_nan() || count >= MAX_SWEEP_POINTS as f64 {
        return Err(bad("too many points"));
    }
    let count = count as usize;
    Ok((0..=count)
        .map(|k| round12(start + k as f64 * step))
        .collect())
}

fn round12(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r.is_finite() {
        r
    } else {
        x
    }
}

/// Shortest round-trip decimal form; negative zero is printed as `0`.
pub fn format_value(v: f64) -> String {
    format!("{}", v + 0.0)
}

fn clean_rows(m: &StochasticMatrix) -> Vec<Vec<f64>> {
    m.rows().map(|r| r.iter().map(|v| v + 0.0).collect()).collect()
}

fn labels_are_default(labels: &[String]) -> bool {
    labels == default_labels(labels.len()).as_slice()
}

fn needs_header(labels: &[String]) -> bool {
    labels.iter().any(|l| l.parse::<f64>().is_err())
}

fn push_csv_row<I: IntoIterator<Item = String>>(out: &mut String, fields: I) {
    let mut first = true;
    for f in fields {
        if !first {
            out.push(',');
        }
        first = false;
        if f.contains([',', '"', '\n', '\r']) || f.starts_with('#') {
            let _ = write!(out, "\"{}\"", f.replace('"', "\"\""));
        } else {
            out.push_str(&f);
        }
    }
    out.push('\n');
}

/// Emits a matrix as CSV. The label row is written only when a label is
/// non-numeric, since a numeric label row would be read back as data.
pub fn matrix_to_csv(m: &StochasticMatrix) -> String {
    let mut out = String::new();
    if needs_header(m.col_labels()) {
        push_csv_row(&mut out, m.col_labels().iter().cloned());
    }
    for row in m.rows() {
        push_csv_row(&mut out, row.iter().map(|&v| format_value(v)));
    }
    out
}

pub fn vector_to_csv(values: &[f64], labels: &[String]) -> String {
    let mut out = String::new();
    if needs_header(labels) {
        push_csv_row(&mut out, labels.iter().cloned());
    }
    push_csv_row(&mut out, values.iter().map(|&v| format_value(v)));
    out
}

pub fn matrix_to_json_value(m: &StochasticMatrix) -> Value {
    let mut v = json!({
        "labels": m.labels(),
        "rows": clean_rows(m),
    });
    if m.col_labels() != m.labels() {
        v["col_labels"] = json!(m.col_labels());
    }
    v
}

pub fn matrix_to_json(m: &StochasticMatrix) -> String {
    matrix_to_json_value(m).to_string()
}

pub fn vector_to_json_value(values: &[f64], labels: &[String]) -> Value {
    let values: Vec<f64> = values.iter().map(|v| v + 0.0).collect();
    json!({ "labels": labels, "values": values })
}

pub fn matrix_to_string(m: &StochasticMatrix, format: Format) -> String {
    match format {
        Format::Csv => matrix_to_csv(m),
        Format::Json => matrix_to_json(m),
    }
}

/// True when CSV emission would drop the labels of `m`.
pub fn csv_drops_labels(m: &StochasticMatrix) -> bool {
    !needs_header(m.labels()) && !labels_are_default(m.labels())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_CSV: &str = "0.4,0.2,0.3,0.1\n0.3,0.5,0.1,0.1\n0.2,0.3,0.4,0.1\n0.6,0.2,0.1,0.1\n";

    #[test]
    fn csv_without_header() {
        let m = parse_matrix_csv(EXAMPLE_CSV).unwrap();
        assert_eq!(m.n(), 4);
        assert_eq!(m.get(3, 0), 0.6);
        assert_eq!(m.labels()[0], "1");
    }

    #[test]
    fn csv_with_header_comments_and_spaces() {
        let text = "# chain\na, b\n 0.5 , 0.5\n\n1, 0\n";
        let m = parse_matrix_csv(text).unwrap();
        assert_eq!(m.labels(), ["a", "b"]);
        assert_eq!(m.get(1, 0), 1.0);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            parse_matrix_csv("0.5,0.5\n1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_matrix_csv("NaN,1\n1,0\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(parse_matrix_csv("0.5,0.5\n0.5,0.5\nx,y\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_matrix_csv(""), Err(Error::EmptyInput)));
        assert!(matches!(
            parse_matrix_csv("0.5,0.6\n0.5,0.5\n"),
            Err(Error::NonStochastic { row: 0, .. })
        ));
    }

    #[test]
    fn json_matrix_round_trip() {
        let m = parse_matrix_csv(EXAMPLE_CSV).unwrap();
        let back = parse_matrix_json(&matrix_to_json(&m)).unwrap();
        assert_eq!(m, back);
        let back = parse_matrix_csv(&matrix_to_csv(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn named_labels_round_trip_through_csv() {
        let m = StochasticMatrix::with_labels(
            vec![vec![0.25, 0.75], vec![1.0, 0.0]],
            vec!["up".into(), "down".into()],
        )
        .unwrap();
        assert_eq!(parse_matrix_csv(&matrix_to_csv(&m)).unwrap(), m);
    }

    #[test]
    fn vectors() {
        let row = parse_vector("0.34,0.32,0.24,0.1", Format::Csv).unwrap();
        let col = parse_vector("mu\n0.34\n0.32\n0.24\n0.1\n", Format::Csv).unwrap();
        assert_eq!(row.values, col.values);
        let js = parse_vector(r#"{"values":[0.34,0.32,0.24,0.1]}"#, Format::Json).unwrap();
        assert_eq!(js.values, row.values);
        let named = parse_vector("a,b\n0.5,0.5\n", Format::Csv).unwrap();
        assert_eq!(named.labels.unwrap(), ["a", "b"]);
        assert!(parse_vector(r#"{"values":[]}"#, Format::Json).is_err());
        assert!(parse_vector("1,2\n3,4\n", Format::Csv).is_err());
    }

    #[test]
    fn sweep_specs() {
        assert_eq!(
            parse_sweep_spec("0:0.4:0.1").unwrap(),
            vec![0.0, 0.1, 0.2, 0.3, 0.4]
        );
        assert_eq!(parse_sweep_spec("0.2:0.2:1").unwrap(), vec![0.2]);
        assert!(parse_sweep_spec("0:1").is_err());
        assert!(parse_sweep_spec("0:1:0").is_err());
        assert!(parse_sweep_spec("1:0:0.1").is_err());
        assert!(parse_sweep_spec("0:1:1e-300").is_err());
        assert!(parse_sweep_spec("0:inf:1").is_err());
    }
}
