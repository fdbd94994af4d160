//! Flat table model: header row, string row labels, single-dtype columns.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw cell texts treated as missing values.
pub const NULL_LEXICON: [&str; 7] = ["", "NA", "N/A", "NaN", "nan", "null", "None"];

pub fn is_null(raw: &str) -> bool {
    NULL_LEXICON.contains(&raw)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("empty input")]
    Empty,
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{expected} row labels given for {found} rows")]
    LabelCount { expected: usize, found: usize },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("duplicate row label {0:?}")]
    DuplicateLabel(String),
}

/// Pandas-style column datatype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DType {
    #[serde(rename = "int64")]
    Int64,
    #[serde(rename = "float64")]
    Float64,
    #[serde(rename = "bool")]
    Bool,
    #[serde(rename = "datetime64[ns]")]
    Datetime,
    #[serde(rename = "object")]
    Object,
}

impl DType {
    pub const ALL: [DType; 5] = [
        DType::Int64,
        DType::Float64,
        DType::Bool,
        DType::Datetime,
        DType::Object,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DType::Int64 => "int64",
            DType::Float64 => "float64",
            DType::Bool => "bool",
            DType::Datetime => "datetime64[ns]",
            DType::Object => "object",
        }
    }

    /// Numeric dtypes render as bare literals in JSON-like formats.
    pub fn is_numeric(self) -> bool {
        matches!(self, DType::Int64 | DType::Float64)
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    pub year: i32,
    pub month: u8,
    pub day: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Bool(bool),
    Date(Date),
    Text(String),
}

/// A cell keeps its source text verbatim alongside the parsed value.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    raw: String,
    value: Value,
}

impl Cell {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let value = classify(&raw);
        Cell { raw, value }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn value(&self) -> &Value {
        &self.value
    }
}

/// Integer grammar: `-?(0|[1-9][0-9]*)` within i64 range.
pub fn parse_int(s: &str) -> Option<i64> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    s.parse().ok()
}

/// Real grammar is the JSON number grammar, so every float64 cell is also a
/// valid bare literal in JSON, Python and DataMatrix renderings.
pub fn parse_real(s: &str) -> Option<f64> {
    let b = s.as_bytes();
    let mut i = 0;
    if b.get(i) == Some(&b'-') {
        i += 1;
    }
    match b.get(i) {
        Some(b'0') => i += 1,
        Some(c) if c.is_ascii_digit() => {
            while b.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
        }
        _ => return None,
    }
    if b.get(i) == Some(&b'.') {
        i += 1;
        let start = i;
        while b.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i == start {
            return None;
        }
    }
    if matches!(b.get(i), Some(b'e' | b'E')) {
        i += 1;
        if matches!(b.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        let start = i;
        while b.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
        if i == start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "True" | "true" => Some(true),
        "False" | "false" => Some(false),
        _ => None,
    }
}

fn fixed_digits(s: &str, n: usize) -> Option<u32> {
    if s.len() == n && s.bytes().all(|b| b.is_ascii_digit()) {
        s.parse().ok()
    } else {
        None
    }
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        2 => 28,
        _ => 0,
    }
}

/// Accepts `YYYY-MM-DD` and `MM/DD/YYYY` calendar dates.
pub fn parse_date(s: &str) -> Option<Date> {
    let (y, m, d) = if let [y, m, d] = s.split('-').collect::<Vec<_>>()[..] {
        (fixed_digits(y, 4)?, fixed_digits(m, 2)?, fixed_digits(d, 2)?)
    } else if let [m, d, y] = s.split('/').collect::<Vec<_>>()[..] {
        (fixed_digits(y, 4)?, fixed_digits(m, 2)?, fixed_digits(d, 2)?)
    } else {
        return None;
    };
    let (year, month, day) = (y as i32, m as u8, d as u8);
    if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
        return None;
    }
    Some(Date { year, month, day })
}

fn classify(raw: &str) -> Value {
    if is_null(raw) {
        Value::Null
    } else if let Some(v) = parse_int(raw) {
        Value::Int(v)
    } else if let Some(v) = parse_real(raw) {
        Value::Real(v)
    } else if let Some(v) = parse_bool(raw) {
        Value::Bool(v)
    } else if let Some(v) = parse_date(raw) {
        Value::Date(v)
    } else {
        Value::Text(raw.to_string())
    }
}

/// Most specific dtype satisfied by every non-null cell; `object` when the
/// column has no non-null cells.
pub fn infer_dtype<S: AsRef<str>>(cells: &[S]) -> DType {
    let mut present = cells.iter().map(AsRef::as_ref).filter(|c| !is_null(c)).peekable();
    if present.peek().is_none() {
        return DType::Object;
    }
    let (mut int, mut real, mut boolean, mut date) = (true, true, true, true);
    for c in present {
        let is_int = parse_int(c).is_some();
        int &= is_int;
        real &= is_int || parse_real(c).is_some();
        boolean &= parse_bool(c).is_some();
        date &= parse_date(c).is_some();
        if !(real || boolean || date) {
            return DType::Object;
        }
    }
    if int {
        DType::Int64
    } else if real {
        DType::Float64
    } else if boolean {
        DType::Bool
    } else if date {
        DType::Datetime
    } else {
        DType::Object
    }
}

/// Immutable flat table. Construction validates shape and uniqueness and
/// infers one dtype per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TableData", try_from = "TableData")]
pub struct Table {
    column_names: Vec<String>,
    row_labels: Vec<String>,
    rows: Vec<Vec<Cell>>,
    dtypes: Vec<DType>,
}

impl Table {
    pub fn new(
        column_names: Vec<String>,
        row_labels: Vec<String>,
        rows: Vec<Vec<String>>,
    ) -> Result<Self, TableError> {
        if row_labels.len() != rows.len() {
            return Err(TableError::LabelCount {
                expected: row_labels.len(),
                found: rows.len(),
            });
        }
        let width = column_names.len();
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(TableError::RowWidth {
                row,
                expected: width,
                found: r.len(),
            });
        }
        if let Some(dup) = first_duplicate(&column_names) {
            return Err(TableError::DuplicateColumn(dup.to_string()));
        }
        if let Some(dup) = first_duplicate(&row_labels) {
            return Err(TableError::DuplicateLabel(dup.to_string()));
        }
        let dtypes = (0..width)
            .map(|j| infer_dtype(&rows.iter().map(|r| r[j].as_str()).collect::<Vec<_>>()))
            .collect();
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(Cell::new).collect())
            .collect();
        Ok(Table {
            column_names,
            row_labels,
            rows,
            dtypes,
        })
    }

    /// Table with positional labels "0".."n-1".
    pub fn with_default_labels(
        column_names: Vec<String>,
        rows: Vec<Vec<String>>,
    ) -> Result<Self, TableError> {
        let labels = default_labels(rows.len());
        Self::new(column_names, labels, rows)
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn dtypes(&self) -> &[DType] {
        &self.dtypes
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.rows[row][col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Cell]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = &Cell> {
        self.rows.iter().map(move |r| &r[col])
    }

    /// Grid of raw texts, row-major.
    pub fn raw_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|c| c.raw.clone()).collect())
            .collect()
    }

    /// Structural equality on names, labels and raw texts (dtypes ignored).
    pub fn same_content(&self, other: &Table) -> bool {
        self.column_names == other.column_names
            && self.row_labels == other.row_labels
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.iter().map(Cell::raw).eq(b.iter().map(Cell::raw)))
            && self.rows.len() == other.rows.len()
    }

    /// First `n` rows, dtypes re-inferred over the kept rows.
    pub fn head(&self, n: usize) -> Table {
        let n = n.min(self.n_rows());
        Table::new(
            self.column_names.clone(),
            self.row_labels[..n].to_vec(),
            self.raw_rows().into_iter().take(n).collect(),
        )
        .expect("prefix of a valid table is valid")
    }

    pub fn relabeled(&self) -> Table {
        Table::with_default_labels(self.column_names.clone(), self.raw_rows())
            .expect("relabeling keeps a valid table valid")
    }
}

/// Split-orient JSON shape: `{"columns": [...], "index": [...], "data": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableData {
    pub columns: Vec<String>,
    pub index: Vec<String>,
    pub data: Vec<Vec<String>>,
}

impl From<Table> for TableData {
    fn from(t: Table) -> Self {
        TableData {
            data: t.raw_rows(),
            columns: t.column_names,
            index: t.row_labels,
        }
    }
}

impl TryFrom<TableData> for Table {
    type Error = TableError;

    fn try_from(d: TableData) -> Result<Self, Self::Error> {
        Table::new(d.columns, d.index, d.data)
    }
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn first_duplicate(items: &[String]) -> Option<&str> {
    let mut seen = HashSet::with_capacity(items.len());
    items
        .iter()
        .find(|s| !seen.insert(s.as_str()))
        .map(String::as_str)
}

/// Reads comma-delimited, double-quote escaped CSV. Labels are positional.
pub fn load_csv(bytes: &[u8], has_header: bool) -> Result<Table, TableError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(TableError::Empty);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(bytes);
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                pos,
                expected_len,
                len,
            } => TableError::Ragged {
                line: pos.as_ref().map_or(0, |p| p.line()),
                expected: *expected_len as usize,
                found: *len as usize,
            },
            _ => TableError::Csv(e.to_string()),
        })?;
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let mut records = records.into_iter();
    let (names, rows): (Vec<String>, Vec<Vec<String>>) = if has_header {
        let header = records.next().ok_or(TableError::Empty)?;
        (header, records.collect())
    } else {
        let rows: Vec<_> = records.collect();
        let width = rows.first().map_or(0, Vec::len);
        ((0..width).map(|j| format!("col_{j}")).collect(), rows)
    };
    Table::with_default_labels(names, rows)
}

/// Removes every row holding a null-lexicon cell, then relabels positionally.
pub fn drop_null_rows(t: &Table) -> Table {
    let kept: Vec<Vec<String>> = t
        .rows
        .iter()
        .filter(|r| !r.iter().any(|c| is_null(&c.raw)))
        .map(|r| r.iter().map(|c| c.raw.clone()).collect())
        .collect();
    Table::with_default_labels(t.column_names.clone(), kept)
        .expect("row subset of a valid table is valid")
}

/// Swaps rows and columns; labels become column names and vice versa.
pub fn transpose(t: &Table) -> Table {
    let rows = (0..t.n_cols())
        .map(|j| t.rows.iter().map(|r| r[j].raw.clone()).collect())
        .collect();
    Table::new(t.row_labels.clone(), t.column_names.clone(), rows)
        .expect("transpose of a valid table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t0() -> Table {
        load_csv(b"name,age\nalice,30\nbob,25", true).unwrap()
    }

    #[test]
    fn load_small_csv() {
        let t = t0();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.dtypes(), &[DType::Object, DType::Int64]);
        assert_eq!(t.row_labels(), &["0", "1"]);
    }

    #[test]
    fn header_only_is_empty_object_column() {
        let t = load_csv(b"a\n", true).unwrap();
        assert_eq!((t.n_rows(), t.n_cols()), (0, 1));
        assert_eq!(t.dtypes(), &[DType::Object]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = load_csv(b"x,y\n1,2\n3", true).unwrap_err();
        assert!(matches!(err, TableError::Ragged { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(load_csv(b"", true).unwrap_err(), TableError::Empty);
    }

    #[test]
    fn headerless_names() {
        let t = load_csv(b"1,x\n2,y\n", false).unwrap();
        assert_eq!(t.column_names(), &["col_0", "col_1"]);
        assert_eq!(t.n_rows(), 2);
    }

    #[test]
    fn duplicate_header_rejected() {
        assert!(matches!(
            load_csv(b"a,a\n1,2", true),
            Err(TableError::DuplicateColumn(_))
        ));
    }

    #[test]
    fn drop_nulls() {
        let t = load_csv(b"s,n\na,1\n,2", true).unwrap();
        let d = drop_null_rows(&t);
        assert_eq!(d.raw_rows(), vec![vec!["a", "1"]]);
        assert_eq!(d.row_labels(), &["0"]);

        let clean = t0();
        assert_eq!(drop_null_rows(&clean), clean);

        let all = load_csv(b"s,n\nNA,1\nNaN,2", true).unwrap();
        assert_eq!(drop_null_rows(&all).n_rows(), 0);
    }

    #[test]
    fn dtype_examples() {
        assert_eq!(infer_dtype(&["1", "2", "3"]), DType::Int64);
        assert_eq!(infer_dtype(&["1.5", "2"]), DType::Float64);
        assert_eq!(infer_dtype(&["1.5", "apple"]), DType::Object);
        assert_eq!(infer_dtype(&["True", "false"]), DType::Bool);
        assert_eq!(infer_dtype(&["2020-02-29", "03/01/2021"]), DType::Datetime);
        assert_eq!(infer_dtype(&["2021-02-29"]), DType::Object);
        assert_eq!(infer_dtype::<&str>(&[]), DType::Object);
        assert_eq!(infer_dtype(&["", "NA"]), DType::Object);
        assert_eq!(infer_dtype(&["NA", "4"]), DType::Int64);
        assert_eq!(infer_dtype(&["007"]), DType::Object);
        assert_eq!(infer_dtype(&["1e5", "-0.25"]), DType::Float64);
    }

    #[test]
    fn transpose_small() {
        let t = Table::with_default_labels(
            vec!["a".into(), "b".into()],
            vec![vec!["1".into(), "2".into()], vec!["3".into(), "4".into()]],
        )
        .unwrap();
        let tt = transpose(&t);
        assert_eq!(tt.column_names(), &["0", "1"]);
        assert_eq!(tt.row_labels(), &["a", "b"]);
        assert_eq!(tt.raw_rows(), vec![vec!["1", "3"], vec!["2", "4"]]);
        assert!(transpose(&tt).same_content(&t));

        let wide = load_csv(b"a,b,c\n1,x,2.5", true).unwrap();
        let tall = transpose(&wide);
        assert_eq!((tall.n_rows(), tall.n_cols()), (3, 1));
        assert_eq!(tall.dtypes(), &[DType::Object]);
    }
}
