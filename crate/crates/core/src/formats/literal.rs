//! Lenient reader for JSON and Python literal syntax (dicts, lists, quoted
//! strings in either quote style, bare numbers, True/False/None). Number
//! lexemes are kept verbatim so cell text survives a round trip unchanged.

use super::{is_number_lexeme, ParseError, RawGrid};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq)]
pub enum Lit {
    Str(String),
    /// Number, keyword or other bare token, verbatim.
    Bare(String),
    List(Vec<Lit>),
    Dict(Vec<(String, Lit)>),
}

impl Lit {
    /// Cell text for a scalar; containers are rendered compactly.
    pub fn into_cell(self) -> String {
        match self {
            Lit::Str(s) => s,
            Lit::Bare(b) => match b.as_str() {
                "true" | "True" => "True".into(),
                "false" | "False" => "False".into(),
                "null" | "None" => String::new(),
                "nan" | "NaN" => "NaN".into(),
                _ => b,
            },
            other => other.render(),
        }
    }

    fn render(&self) -> String {
        match self {
            Lit::Str(s) => json_str(s),
            Lit::Bare(b) => b.clone(),
            Lit::List(items) => format!(
                "[{}]",
                items.iter().map(Lit::render).collect::<Vec<_>>().join(", ")
            ),
            Lit::Dict(items) => format!(
                "{{{}}}",
                items
                    .iter()
                    .map(|(k, v)| format!("{}: {}", json_str(k), v.render()))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }
}

pub fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

pub struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(src: &'a str, pos: usize) -> Self {
        Reader { src, pos }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn err(&self, reason: impl Into<String>) -> ParseError {
        ParseError::new(self.pos, reason)
    }

    pub fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    /// Consumes `token` after optional whitespace.
    pub fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        if self.eat(token) {
            Ok(())
        } else if self.pos >= self.src.len() {
            Err(self.err(format!("expected {token:?}, found end of input")))
        } else {
            Err(self.err(format!("expected {token:?}")))
        }
    }

    pub fn value(&mut self) -> Result<Lit, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('{') => self.dict(),
            Some('[') => self.list(),
            Some(q @ ('"' | '\'')) => self.string(q).map(Lit::Str),
            Some(_) => self.bare(),
        }
    }

    fn dict(&mut self) -> Result<Lit, ParseError> {
        self.expect("{")?;
        let mut items = Vec::new();
        loop {
            if self.eat("}") {
                return Ok(Lit::Dict(items));
            }
            let key = match self.value()? {
                Lit::Str(s) | Lit::Bare(s) => s,
                other => other.render(),
            };
            self.expect(":")?;
            let value = self.value()?;
            items.push((key, value));
            if !self.eat(",") {
                self.expect("}")?;
                return Ok(Lit::Dict(items));
            }
        }
    }

    fn list(&mut self) -> Result<Lit, ParseError> {
        self.expect("[")?;
        let mut items = Vec::new();
        loop {
            if self.eat("]") {
                return Ok(Lit::List(items));
            }
            items.push(self.value()?);
            if !self.eat(",") {
                self.expect("]")?;
                return Ok(Lit::List(items));
            }
        }
    }

    fn bare(&mut self) -> Result<Lit, ParseError> {
        let rest = self.rest();
        let len = rest
            .find(|c: char| c.is_whitespace() || ",:]}[{)(".contains(c))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("unexpected character"));
        }
        self.pos += len;
        Ok(Lit::Bare(rest[..len].to_string()))
    }

    fn hex(&mut self, digits: usize) -> Result<u32, ParseError> {
        let rest = self.rest();
        let code = rest
            .get(..digits)
            .and_then(|h| u32::from_str_radix(h, 16).ok())
            .ok_or_else(|| self.err("bad hex escape"))?;
        self.pos += digits;
        Ok(code)
    }

    fn string(&mut self, quote: char) -> Result<String, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(ParseError::new(self.src.len(), format!(
                    "unterminated string starting at byte {start}"
                )));
            };
            self.pos += c.len_utf8();
            if c == quote {
                return Ok(out);
            }
            if c != '\\' {
                out.push(c);
                continue;
            }
            let Some(e) = self.peek() else { continue };
            self.pos += e.len_utf8();
            match e {
                'n' => out.push('\n'),
                'r' => out.push('\r'),
                't' => out.push('\t'),
                'b' => out.push('\u{8}'),
                'f' => out.push('\u{c}'),
                '0' => out.push('\0'),
                'x' => {
                    let code = self.hex(2)?;
                    out.push(char::from_u32(code).unwrap_or('\u{fffd}'));
                }
                'u' => {
                    let hi = self.hex(4)?;
                    let code = if (0xD800..0xDC00).contains(&hi) && self.rest().starts_with("\\u") {
                        self.pos += 2;
                        let lo = self.hex(4)?;
                        0x10000 + ((hi - 0xD800) << 10) + (lo.wrapping_sub(0xDC00) & 0x3ff)
                    } else {
                        hi
                    };
                    out.push(char::from_u32(code).unwrap_or('\u{fffd}'));
                }
                other => out.push(other),
            }
        }
    }
}

/// JSON literal for a cell: numeric columns emit bare number lexemes.
fn json_cell(raw: &str, numeric: bool) -> String {
    if numeric && is_number_lexeme(raw) {
        raw.to_string()
    } else {
        json_str(raw)
    }
}

pub fn serialize_json(t: &Table) -> String {
    let rows: Vec<String> = t
        .row_labels()
        .iter()
        .zip(t.rows())
        .map(|(label, row)| {
            let fields: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    format!(
                        "{}: {}",
                        json_str(&t.column_names()[j]),
                        json_cell(c.raw(), t.dtypes()[j].is_numeric())
                    )
                })
                .collect();
            format!("{}: {{{}}}", json_str(label), fields.join(", "))
        })
        .collect();
    format!("{{{}}}", rows.join(",\n"))
}

pub fn parse_json(s: &str) -> Result<RawGrid, ParseError> {
    let start = s
        .find('{')
        .ok_or_else(|| ParseError::new(s.len(), "no JSON object found"))?;
    let mut reader = Reader::new(s, start);
    let Lit::Dict(entries) = reader.value()? else {
        unreachable!("value starting with '{{' is a dict")
    };
    let mut names: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(entries.len());
    let mut records = Vec::with_capacity(entries.len());
    for (label, row) in entries {
        labels.push(label);
        let fields = match row {
            Lit::Dict(fields) => fields,
            scalar => vec![(String::from("value"), scalar)],
        };
        for (k, _) in &fields {
            if !names.contains(k) {
                names.push(k.clone());
            }
        }
        records.push(fields);
    }
    let rows = records
        .into_iter()
        .map(|fields| {
            let mut row = vec![String::new(); names.len()];
            for (k, v) in fields {
                let j = names.iter().position(|n| *n == k).expect("name collected above");
                row[j] = v.into_cell();
            }
            row
        })
        .collect();
    Ok(RawGrid {
        names,
        labels: Some(labels),
        rows,
    })
}
