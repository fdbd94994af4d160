use super::{ParseError, RawGrid};
use crate::table::Table;

fn push_field(out: &mut String, field: &str, delim: char) {
    if field.contains([delim, '"', '\n', '\r']) {
        out.push('"');
        out.push_str(&field.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(field);
    }
}

fn push_record<'a>(out: &mut String, fields: impl IntoIterator<Item = &'a str>, delim: char) {
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            out.push(delim);
        }
        push_field(out, f, delim);
    }
}

pub fn serialize(t: &Table, delim: char) -> String {
    let mut out = String::new();
    push_record(
        &mut out,
        std::iter::once("index").chain(t.column_names().iter().map(String::as_str)),
        delim,
    );
    for (label, row) in t.row_labels().iter().zip(t.rows()) {
        out.push('\n');
        push_record(
            &mut out,
            std::iter::once(label.as_str()).chain(row.iter().map(|c| c.raw())),
            delim,
        );
    }
    out
}

pub fn parse(s: &str, delim: char) -> Result<RawGrid, ParseError> {
    // The table block starts at the first line carrying a delimiter.
    let mut offset = 0;
    let mut start = None;
    for line in s.split_inclusive('\n') {
        if line.contains(delim) {
            start = Some(offset);
            break;
        }
        offset += line.len();
    }
    let start = match start {
        Some(p) => p,
        None => s
            .find(|c: char| !c.is_whitespace())
            .ok_or_else(|| ParseError::new(s.len(), "no table found"))?,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delim as u8)
        .from_reader(&s.as_bytes()[start..]);
    let mut records: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let pos = e.position().map_or(s.len(), |p| start + p.byte() as usize);
            ParseError::new(pos, e.to_string())
        })?;
        // A single-field line after a multi-column header is trailing prose.
        if rec.len() == 1 && records.first().is_some_and(|h| h.len() > 1) {
            break;
        }
        records.push(rec.iter().map(str::to_string).collect());
    }
    let mut records = records.into_iter();
    let header = records
        .next()
        .ok_or_else(|| ParseError::new(s.len(), "no table found"))?;
    Ok(RawGrid::from_header_rows(header, records.collect()))
}
