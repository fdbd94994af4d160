//! Data-matrix grammar: a list of lists, header first, strings single-quoted.

use super::literal::{Lit, Reader};
use super::{is_number_lexeme, ParseError, RawGrid};
use crate::table::Table;

pub fn py_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                out.push_str(&format!("\\x{:02x}", c as u32))
            }
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn literal(raw: &str, bare: bool) -> String {
    if bare && is_number_lexeme(raw) {
        raw.to_string()
    } else {
        py_str(raw)
    }
}

pub fn serialize(t: &Table) -> String {
    let header: Vec<String> = std::iter::once(py_str("index"))
        .chain(t.column_names().iter().map(|n| py_str(n)))
        .collect();
    let mut lines = vec![format!("[{}]", header.join(", "))];
    for (label, row) in t.row_labels().iter().zip(t.rows()) {
        let items: Vec<String> = std::iter::once(literal(label, true))
            .chain(
                row.iter()
                    .zip(t.dtypes())
                    .map(|(c, d)| literal(c.raw(), d.is_numeric())),
            )
            .collect();
        lines.push(format!("[{}]", items.join(", ")));
    }
    format!("[{}]", lines.join(",\n "))
}

pub fn parse(s: &str) -> Result<RawGrid, ParseError> {
    let start = s
        .find('[')
        .ok_or_else(|| ParseError::new(s.len(), "no list found"))?;
    let mut reader = Reader::new(s, start);
    let Lit::List(items) = reader.value()? else {
        unreachable!("value starting with '[' is a list")
    };
    let mut rows = items.into_iter().map(|item| match item {
        Lit::List(cells) => cells.into_iter().map(Lit::into_cell).collect::<Vec<_>>(),
        scalar => vec![scalar.into_cell()],
    });
    let header = rows
        .next()
        .ok_or_else(|| ParseError::new(start, "empty matrix"))?;
    Ok(RawGrid::from_header_rows(header, rows.collect()))
}
