//! GitHub pipe tables with an `index` first column.

use super::{ParseError, RawGrid};
use crate::table::Table;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn line<'a>(cells: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::from("|");
    for c in cells {
        out.push(' ');
        out.push_str(&escape(c));
        out.push_str(" |");
    }
    out
}

pub fn serialize(t: &Table) -> String {
    let mut lines = vec![
        line(std::iter::once("index").chain(t.column_names().iter().map(String::as_str))),
        line(std::iter::repeat_n("---", t.n_cols() + 1)),
    ];
    for (label, row) in t.row_labels().iter().zip(t.rows()) {
        lines.push(line(
            std::iter::once(label.as_str()).chain(row.iter().map(|c| c.raw())),
        ));
    }
    lines.join("\n")
}

/// Splits on unescaped pipes and undoes escapes. Outer pipes are optional.
fn split_row(line: &str) -> Vec<String> {
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('n') => cur.push('\n'),
                Some('r') => cur.push('\r'),
                Some(other) => cur.push(other),
                None => cur.push('\\'),
            },
            '|' => cells.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    cells.push(cur);
    let trimmed = line.trim();
    if trimmed.starts_with('|') {
        cells.remove(0);
    }
    if trimmed.ends_with('|') && !trimmed.ends_with("\\|") && !cells.is_empty() {
        cells.pop();
    }
    cells
        .into_iter()
        .map(|c| {
            let c = c.strip_prefix(' ').unwrap_or(&c);
            c.strip_suffix(' ').unwrap_or(c).to_string()
        })
        .collect()
}

fn has_unescaped_pipe(line: &str) -> bool {
    let mut escaped = false;
    for c in line.chars() {
        match c {
            '\\' if !escaped => escaped = true,
            '|' if !escaped => return true,
            _ => escaped = false,
        }
    }
    false
}

fn is_alignment(cells: &[String]) -> bool {
    !cells.is_empty()
        && cells.iter().all(|c| {
            let c = c.trim();
            let c = c.strip_prefix(':').unwrap_or(c);
            let c = c.strip_suffix(':').unwrap_or(c);
            !c.is_empty() && c.chars().all(|ch| ch == '-')
        })
}

pub fn parse(s: &str) -> Result<RawGrid, ParseError> {
    let lines: Vec<&str> = s
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .skip_while(|l| !has_unescaped_pipe(l))
        .take_while(|l| has_unescaped_pipe(l))
        .collect();
    let mut rows = lines.iter().map(|l| split_row(l));
    let header = rows
        .next()
        .ok_or_else(|| ParseError::new(s.len(), "no pipe table found"))?;
    let mut body: Vec<Vec<String>> = rows.collect();
    if body.first().is_some_and(|r| is_alignment(r)) {
        body.remove(0);
    }
    Ok(RawGrid::from_header_rows(header, body))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_survive() {
        let cells = split_row(&line(["a|b", " x ", "", "back\\slash", "two\nlines"]));
        assert_eq!(cells, vec!["a|b", " x ", "", "back\\slash", "two\nlines"]);
    }

    #[test]
    fn tolerates_missing_outer_pipes() {
        assert_eq!(split_row("a | b"), vec!["a", "b"]);
        assert!(is_alignment(&split_row("|:---|---:|")));
    }
}
