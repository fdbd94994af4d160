//! DataFrame-constructor grammar: one `"name": [values]` entry per column and
//! an explicit `index=[...]` list.

use super::literal::{json_str, Lit, Reader};
use super::{is_number_lexeme, ParseError, RawGrid};
use crate::table::Table;

fn literal(raw: &str, bare: bool) -> String {
    if bare && is_number_lexeme(raw) {
        raw.to_string()
    } else {
        json_str(raw)
    }
}

pub fn serialize(t: &Table) -> String {
    let index: Vec<String> = t.row_labels().iter().map(|l| literal(l, true)).collect();
    let columns: Vec<String> = t
        .column_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let numeric = t.dtypes()[j].is_numeric();
            let values: Vec<String> = t.column(j).map(|c| literal(c.raw(), numeric)).collect();
            format!("  {}: [{}]", json_str(name), values.join(", "))
        })
        .collect();
    let body = if columns.is_empty() {
        String::new()
    } else {
        format!("\n{}\n", columns.join(",\n"))
    };
    format!("pd.DataFrame({{{body}}}, index=[{}])", index.join(", "))
}

pub fn parse(s: &str) -> Result<RawGrid, ParseError> {
    let start = match s.find("DataFrame(") {
        Some(p) => p + "DataFrame(".len(),
        None => s
            .find('{')
            .ok_or_else(|| ParseError::new(s.len(), "no DataFrame constructor found"))?,
    };
    let mut reader = Reader::new(s, start);
    reader.eat("data=");
    let Lit::Dict(columns) = reader.value()? else {
        return Err(ParseError::new(start, "expected a dict of columns"));
    };
    let mut labels = None;
    if reader.eat(",") && reader.eat("index") {
        reader.expect("=")?;
        match reader.value()? {
            Lit::List(items) => labels = Some(items.into_iter().map(Lit::into_cell).collect()),
            _ => return Err(ParseError::new(reader.pos(), "index must be a list")),
        }
    }
    let mut names = Vec::with_capacity(columns.len());
    let mut cols: Vec<Vec<String>> = Vec::with_capacity(columns.len());
    for (name, values) in columns {
        names.push(name);
        cols.push(match values {
            Lit::List(items) => items.into_iter().map(Lit::into_cell).collect(),
            scalar => vec![scalar.into_cell()],
        });
    }
    let n_rows = cols
        .iter()
        .map(Vec::len)
        .chain(labels.as_ref().map(Vec::len))
        .max()
        .unwrap_or(0);
    let rows = (0..n_rows)
        .map(|i| {
            cols.iter()
                .map(|c| c.get(i).cloned().unwrap_or_default())
                .collect()
        })
        .collect();
    Ok(RawGrid {
        names,
        labels,
        rows,
    })
}
