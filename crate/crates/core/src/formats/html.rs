//! `<table>` grammar with a `<thead>` header row; the indented variant puts
//! one tag per line, the compact variant has no whitespace between tags.

use super::{ParseError, RawGrid};
use crate::table::Table;

fn escape(s: &str) -> String {
    // Whitespace-only text would vanish when inter-tag whitespace is removed.
    if !s.is_empty() && s.chars().all(char::is_whitespace) {
        return s.chars().map(|c| format!("&#{};", c as u32)).collect();
    }
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

fn decode(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let entity = rest
            .find(';')
            .filter(|&end| end <= 10)
            .and_then(|end| decode_entity(&rest[1..end]).map(|c| (c, end)));
        match entity {
            Some((c, end)) => {
                out.push(c);
                rest = &rest[end + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entity(name: &str) -> Option<char> {
    match name {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some('\u{a0}'),
        _ => {
            let num = name.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(code)
        }
    }
}

pub fn serialize(t: &Table, indent: bool) -> String {
    let mut lines: Vec<(usize, String)> = vec![(0, "<table>".into()), (1, "<thead>".into())];
    lines.push((2, "<tr>".into()));
    for name in std::iter::once("index").chain(t.column_names().iter().map(String::as_str)) {
        lines.push((3, format!("<th>{}</th>", escape(name))));
    }
    lines.push((2, "</tr>".into()));
    lines.push((1, "</thead>".into()));
    lines.push((1, "<tbody>".into()));
    for (label, row) in t.row_labels().iter().zip(t.rows()) {
        lines.push((2, "<tr>".into()));
        for cell in std::iter::once(label.as_str()).chain(row.iter().map(|c| c.raw())) {
            lines.push((3, format!("<td>{}</td>", escape(cell))));
        }
        lines.push((2, "</tr>".into()));
    }
    lines.push((1, "</tbody>".into()));
    lines.push((0, "</table>".into()));
    if indent {
        lines
            .into_iter()
            .map(|(depth, l)| format!("{}{l}", "  ".repeat(depth)))
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        lines.into_iter().map(|(_, l)| l).collect()
    }
}

enum Token<'a> {
    Open(String),
    Close(String),
    Text(&'a str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Iterator for Lexer<'a> {
    type Item = (usize, Token<'a>);

    fn next(&mut self) -> Option<Self::Item> {
        let rest = &self.src[self.pos..];
        if rest.is_empty() {
            return None;
        }
        let at = self.pos;
        if let Some(tag) = rest.strip_prefix('<') {
            let end = tag.find('>').map_or(rest.len(), |e| e + 2);
            self.pos += end;
            let inner = rest[1..end.min(rest.len())].trim_end_matches('>');
            let (closing, body) = match inner.strip_prefix('/') {
                Some(b) => (true, b),
                None => (false, inner),
            };
            let name = body
                .split(|c: char| c.is_whitespace() || c == '/')
                .next()
                .unwrap_or("")
                .to_ascii_lowercase();
            Some((at, if closing { Token::Close(name) } else { Token::Open(name) }))
        } else {
            let end = rest.find('<').unwrap_or(rest.len());
            self.pos += end;
            Some((at, Token::Text(&rest[..end])))
        }
    }
}

pub fn parse(s: &str) -> Result<RawGrid, ParseError> {
    let mut lexer = Lexer { src: s, pos: 0 };
    let found = lexer
        .by_ref()
        .any(|(_, t)| matches!(t, Token::Open(ref n) if n == "table"));
    if !found {
        return Err(ParseError::new(s.len(), "no <table> found"));
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut row: Option<Vec<String>> = None;
    let mut cell: Option<String> = None;
    let mut closed = false;

    fn finish_cell(cell: &mut Option<String>, row: &mut Option<Vec<String>>) {
        if let Some(text) = cell.take() {
            row.get_or_insert_with(Vec::new).push(decode(&text));
        }
    }
    fn finish_row(
        cell: &mut Option<String>,
        row: &mut Option<Vec<String>>,
        rows: &mut Vec<Vec<String>>,
    ) {
        finish_cell(cell, row);
        rows.extend(row.take());
    }

    // Cells and rows may be left unclosed; the next opening tag closes them.
    for (_, token) in lexer.by_ref() {
        match token {
            Token::Open(name) => match name.as_str() {
                "tr" => {
                    finish_row(&mut cell, &mut row, &mut rows);
                    row = Some(Vec::new());
                }
                "td" | "th" => {
                    finish_cell(&mut cell, &mut row);
                    cell = Some(String::new());
                }
                _ => {}
            },
            Token::Close(name) => match name.as_str() {
                "td" | "th" => finish_cell(&mut cell, &mut row),
                "tr" | "thead" | "tbody" => finish_row(&mut cell, &mut row, &mut rows),
                "table" => {
                    finish_row(&mut cell, &mut row, &mut rows);
                    closed = true;
                    break;
                }
                _ => {}
            },
            Token::Text(text) => {
                if let Some(c) = cell.as_mut() {
                    c.push_str(text);
                }
            }
        }
    }
    if !closed {
        return Err(ParseError::new(s.len(), "unclosed <table>"));
    }

    let mut rows = rows.into_iter();
    let header = rows
        .next()
        .ok_or_else(|| ParseError::new(s.len(), "table has no rows"))?;
    Ok(RawGrid::from_header_rows(header, rows.collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entities() {
        assert_eq!(decode("a &amp; b &lt;&#32;&#x41;&bogus"), "a & b < A&bogus");
        assert_eq!(escape("  "), "&#32;&#32;");
        assert_eq!(decode(&escape("<\"a\" & b>")), "<\"a\" & b>");
    }

    #[test]
    fn header_row_without_thead() {
        let g = parse("<table><tr><th>index</th><th>a</th></tr><tr><td>0</td><td>x</td></tr></table>")
            .unwrap();
        assert_eq!(g.names, vec!["a"]);
        assert_eq!(g.rows, vec![vec!["x"]]);
    }
}
