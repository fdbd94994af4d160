//! Table representation formats. Each format serializes deterministically and
//! parses back both its own output (exactly) and noisy model output
//! (leniently: surrounding prose, code fences, duplicate labels).

mod delimited;
mod dfloader;
mod html;
mod literal;
mod markdown;
mod matrix;
mod tokens;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{self, Table};

pub use tokens::{token_estimate, HeuristicCounter, TokenCounter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Format {
    DFLoader,
    Json,
    DataMatrix,
    Markdown,
    CommaSeparated,
    TabSeparated,
    Html,
    HtmlNoSpace,
}

impl Format {
    pub const ALL: [Format; 8] = [
        Format::DFLoader,
        Format::Json,
        Format::DataMatrix,
        Format::Markdown,
        Format::CommaSeparated,
        Format::TabSeparated,
        Format::Html,
        Format::HtmlNoSpace,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Format::DFLoader => "DFLoader",
            Format::Json => "Json",
            Format::DataMatrix => "DataMatrix",
            Format::Markdown => "Markdown",
            Format::CommaSeparated => "CommaSeparated",
            Format::TabSeparated => "TabSeparated",
            Format::Html => "Html",
            Format::HtmlNoSpace => "HtmlNoSpace",
        }
    }

    /// Human-facing name used inside prompts.
    pub fn describe(self) -> &'static str {
        match self {
            Format::DFLoader => "pandas DataFrame code",
            Format::Json => "JSON",
            Format::DataMatrix => "data matrix (list of lists)",
            Format::Markdown => "Markdown",
            Format::CommaSeparated => "comma-separated values",
            Format::TabSeparated => "tab-separated values",
            Format::Html => "HTML",
            Format::HtmlNoSpace => "HTML without whitespace",
        }
    }

    pub fn is_html(self) -> bool {
        matches!(self, Format::Html | Format::HtmlNoSpace)
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown format {0:?}")]
pub struct UnknownFormat(pub String);

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Format::ALL
            .into_iter()
            .find(|f| f.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownFormat(s.to_string()))
    }
}

/// Unrecoverable parse failure at a byte offset of the input.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {position}: {reason}")]
pub struct ParseError {
    pub position: usize,
    pub reason: String,
}

impl ParseError {
    pub(crate) fn new(position: usize, reason: impl Into<String>) -> Self {
        ParseError {
            position,
            reason: reason.into(),
        }
    }
}

pub fn serialize(t: &Table, f: Format) -> String {
    match f {
        Format::CommaSeparated => delimited::serialize(t, ','),
        Format::TabSeparated => delimited::serialize(t, '\t'),
        Format::Json => literal::serialize_json(t),
        Format::DataMatrix => matrix::serialize(t),
        Format::DFLoader => dfloader::serialize(t),
        Format::Markdown => markdown::serialize(t),
        Format::Html => html::serialize(t, true),
        Format::HtmlNoSpace => html::serialize(t, false),
    }
}

pub fn parse(s: &str, f: Format) -> Result<Table, ParseError> {
    match fenced_block(s) {
        Some(inner) => parse_body(inner, f).or_else(|_| parse_body(s, f)),
        None => parse_body(s, f),
    }
}

fn parse_body(body: &str, f: Format) -> Result<Table, ParseError> {
    let raw = match f {
        Format::CommaSeparated => delimited::parse(body, ','),
        Format::TabSeparated => delimited::parse(body, '\t'),
        Format::Json => literal::parse_json(body),
        Format::DataMatrix => matrix::parse(body),
        Format::DFLoader => dfloader::parse(body),
        Format::Markdown => markdown::parse(body),
        Format::Html | Format::HtmlNoSpace => html::parse(body),
    }?;
    Ok(raw.assemble())
}

/// Text between the first fence line (three backticks and an optional
/// language tag, nothing else) and the next bare three-backtick line.
fn fenced_block(s: &str) -> Option<&str> {
    let is_opener = |l: &str| {
        l.trim()
            .strip_prefix("```")
            .is_some_and(|tag| tag.chars().all(|c| c.is_ascii_alphanumeric() || "_-+.".contains(c)))
    };
    let mut offset = 0;
    let mut start = None;
    for line in s.split_inclusive('\n') {
        match start {
            None if is_opener(line) => start = Some(offset + line.len()),
            Some(begin) if line.trim() == "```" => return Some(&s[begin..offset]),
            _ => {}
        }
        offset += line.len();
    }
    None
}

/// Grid recovered from text before shape repair.
#[derive(Debug, Default)]
pub(crate) struct RawGrid {
    pub names: Vec<String>,
    pub labels: Option<Vec<String>>,
    pub rows: Vec<Vec<String>>,
}

impl RawGrid {
    /// Splits a header-plus-rows grid, taking labels from the first column when
    /// the header's first cell is the index marker.
    pub fn from_header_rows(mut header: Vec<String>, mut rows: Vec<Vec<String>>) -> RawGrid {
        let indexed = header.first().is_some_and(|h| is_index_marker(h));
        if indexed {
            header.remove(0);
            let labels = rows
                .iter_mut()
                .map(|r| if r.is_empty() { String::new() } else { r.remove(0) })
                .collect();
            RawGrid {
                names: header,
                labels: Some(labels),
                rows,
            }
        } else {
            RawGrid {
                names: header,
                labels: None,
                rows,
            }
        }
    }

    /// Pads or truncates rows to the header width, synthesizes missing labels
    /// and makes names and labels unique.
    pub fn assemble(self) -> Table {
        let width = self.names.len();
        let rows: Vec<Vec<String>> = self
            .rows
            .into_iter()
            .map(|mut r| {
                r.resize(width, String::new());
                r
            })
            .collect();
        let labels = match self.labels {
            Some(mut l) => {
                l.resize_with(rows.len(), String::new);
                repair_duplicates(l)
            }
            None => table::default_labels(rows.len()),
        };
        Table::new(repair_duplicates(self.names), labels, rows)
            .expect("assembled grid is rectangular with unique keys")
    }
}

pub(crate) fn is_index_marker(h: &str) -> bool {
    let h = h.trim();
    h.is_empty() || h.eq_ignore_ascii_case("index")
}

/// Repeated entries get a `#k` suffix, k counting earlier occurrences.
pub fn repair_duplicates(items: Vec<String>) -> Vec<String> {
    use std::collections::{HashMap, HashSet};
    let mut taken: HashSet<String> = HashSet::with_capacity(items.len());
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let mut candidate = item.clone();
        while taken.contains(&candidate) {
            let k = counts.entry(item.clone()).or_insert(0);
            *k += 1;
            candidate = format!("{item}#{k}");
        }
        taken.insert(candidate.clone());
        out.push(candidate);
    }
    out
}

/// Text that may be written as a bare numeric literal.
pub(crate) fn is_number_lexeme(s: &str) -> bool {
    table::parse_real(s).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::load_csv;

    pub(crate) fn t0() -> Table {
        load_csv(b"name,age\nalice,30\nbob,25", true).unwrap()
    }

    #[test]
    fn csv_example() {
        assert_eq!(
            serialize(&t0(), Format::CommaSeparated),
            "index,name,age\n0,alice,30\n1,bob,25"
        );
    }

    #[test]
    fn json_example() {
        assert_eq!(
            serialize(&t0(), Format::Json),
            "{\"0\": {\"name\": \"alice\", \"age\": 30},\n\"1\": {\"name\": \"bob\", \"age\": 25}}"
        );
    }

    #[test]
    fn dfloader_example() {
        assert_eq!(
            serialize(&t0(), Format::DFLoader),
            "pd.DataFrame({\n  \"name\": [\"alice\", \"bob\"],\n  \"age\": [30, 25]\n}, index=[0, 1])"
        );
    }

    #[test]
    fn every_format_round_trips_t0() {
        for f in Format::ALL {
            let s = serialize(&t0(), f);
            let back = parse(&s, f).unwrap_or_else(|e| panic!("{f}: {e}\n{s}"));
            assert!(back.same_content(&t0()), "{f}\n{s}");
            assert_eq!(back.dtypes(), t0().dtypes(), "{f}");
        }
    }

    #[test]
    fn duplicate_labels_are_suffixed() {
        let t = parse("index,name\n0,alice\n0,bob", Format::CommaSeparated).unwrap();
        assert_eq!(t.row_labels(), &["0", "0#1"]);
        assert_eq!(t.raw_rows(), vec![vec!["alice"], vec!["bob"]]);
        assert_eq!(
            repair_duplicates(vec!["a".into(), "a".into(), "a#1".into(), "a".into()]),
            vec!["a", "a#1", "a#1#1", "a#2"]
        );
    }

    #[test]
    fn unclosed_html_fails_at_end() {
        let err = parse("<table><tr>", Format::Html).unwrap_err();
        assert_eq!(err.position, "<table><tr>".len());
    }

    #[test]
    fn format_ids_parse() {
        for f in Format::ALL {
            assert_eq!(f.id().parse::<Format>().unwrap(), f);
        }
        assert!("XML".parse::<Format>().is_err());
    }

    #[test]
    fn prose_and_fences_are_skipped() {
        let out = "Sure! Here is the table:\n```\nindex,name,age\n0,alice,30\n1,bob,25\n```\nHope this helps";
        let t = parse(out, Format::CommaSeparated).unwrap();
        assert!(t.same_content(&t0()));

        let md = "The table:\n\n| index | name | age |\n|---|---|---|\n| 0 | alice | 30 |\n| 1 | bob | 25 |\n\nDone.";
        assert!(parse(md, Format::Markdown).unwrap().same_content(&t0()));

        let js = "Answer: {\"0\": {\"name\": \"alice\", \"age\": 30}, \"1\": {\"name\": \"bob\", \"age\": 25}} end";
        assert!(parse(js, Format::Json).unwrap().same_content(&t0()));

        let fenced = "Sure, here it is:\n```csv\nindex,name,age\n0,alice,30\n1,bob,25\n```\n";
        assert!(parse(fenced, Format::CommaSeparated).unwrap().same_content(&t0()));
    }

    #[test]
    fn backticks_inside_cells_are_data() {
        let t = Table::with_default_labels(vec!["a".into()], vec![vec!["x\n````\ny".into()], vec!["```".into()]]).unwrap();
        for f in Format::ALL {
            assert_eq!(parse(&serialize(&t, f), f).unwrap(), t, "{f}");
        }
    }

    #[test]
    fn missing_index_column_gets_positional_labels() {
        let t = parse("name,age\nalice,30\nbob,25", Format::CommaSeparated).unwrap();
        assert!(t.same_content(&t0()));
        let t = parse(
            "pd.DataFrame({\"name\": [\"alice\", \"bob\"], \"age\": [30, 25]})",
            Format::DFLoader,
        )
        .unwrap();
        assert!(t.same_content(&t0()));
    }
}
