#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::Rng;
use tablebench::table::Table;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixtures() -> Vec<PathBuf> {
    vec![fixture("employees.csv"), fixture("weather.csv")]
}

const PIECES: &[&str] = &[
    "a", "b", "x", "zed", "Name", "value", " ", ",", "\"", "'", "|", "\\", "\n", "\t", "<", ">", "&",
    "{", "}", "[", "]", ":", "é", "日本", "--", "#", "``", "NA", "1", "2.5", "True", "index",
];

pub fn text<R: Rng>(rng: &mut R) -> String {
    let len = rng.random_range(1..=4);
    (0..len).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

fn date<R: Rng>(rng: &mut R) -> String {
    let (y, m, d) = (rng.random_range(1990..2030), rng.random_range(1..=12), rng.random_range(1..=28));
    if rng.random_bool(0.5) {
        format!("{y:04}-{m:02}-{d:02}")
    } else {
        format!("{m:02}/{d:02}/{y:04}")
    }
}

fn cell<R: Rng>(kind: usize, rng: &mut R) -> String {
    if rng.random_bool(0.08) {
        return ["", "NA", "NaN", "None", "null"].choose(rng).unwrap().to_string();
    }
    match kind {
        0 => rng.random_range(-500i64..5000).to_string(),
        1 => format!("{:.3}", rng.random_range(-100.0..100.0)),
        2 => ["True", "False", "true", "false"].choose(rng).unwrap().to_string(),
        3 => date(rng),
        _ => text(rng),
    }
}

fn unique<R: Rng>(n: usize, rng: &mut R, mut make: impl FnMut(&mut R) -> String) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let s = make(rng);
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    out
}

/// Random table with typed and free-text columns, nulls and awkward
/// characters in names, labels and cells.
pub fn random_table<R: Rng>(rng: &mut R, max_rows: usize, max_cols: usize) -> Table {
    let cols = rng.random_range(1..=max_cols);
    let rows = rng.random_range(1..=max_rows);
    let kinds: Vec<usize> = (0..cols).map(|_| rng.random_range(0..6)).collect();
    let names = unique(cols, rng, |r| text(r));
    let labels = if rng.random_bool(0.5) {
        (0..rows).map(|i| i.to_string()).collect()
    } else {
        unique(rows, rng, |r| text(r))
    };
    let data = (0..rows)
        .map(|_| kinds.iter().map(|&k| cell(k, rng)).collect())
        .collect();
    Table::new(names, labels, data).expect("generated table is valid")
}

/// Plain wide table of short words and numbers, as in typical datasets.
pub fn wide_table<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Table {
    let names = (0..cols).map(|j| format!("column_{j}")).collect();
    let data = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|j| match j % 3 {
                    0 => rng.random_range(0..100_000).to_string(),
                    1 => format!("{:.2}", rng.random_range(0.0..1000.0)),
                    _ => ["alpha", "beta", "gamma", "delta"].choose(rng).unwrap().to_string(),
                })
                .collect()
        })
        .collect();
    Table::with_default_labels(names, data).expect("generated table is valid")
}

/// Brute-force cell matcher: list every coordinate of both grids (header
/// names at (0, j+1), labels at (i+1, 0), values at (i+1, j+1)) and compare
/// all pairs.
pub fn brute_force_prf(pred: &Table, gold: &Table) -> (f64, f64, f64) {
    fn cells(t: &Table) -> Vec<((usize, usize), String)> {
        let norm = tablebench::scoring::normalize_cell;
        let mut out = Vec::new();
        for (j, n) in t.column_names().iter().enumerate() {
            out.push(((0, j + 1), norm(n)));
        }
        for (i, l) in t.row_labels().iter().enumerate() {
            out.push(((i + 1, 0), norm(l)));
        }
        for (i, r) in t.raw_rows().iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                out.push(((i + 1, j + 1), norm(v)));
            }
        }
        out
    }
    let (p, g) = (cells(pred), cells(gold));
    let matched = p
        .iter()
        .filter(|(pc, pv)| g.iter().any(|(gc, gv)| gc == pc && gv == pv))
        .count();
    let precision = if p.is_empty() { 0.0 } else { matched as f64 / p.len() as f64 };
    let recall = if g.is_empty() { 0.0 } else { matched as f64 / g.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// A canned HTTP response: status, extra headers, body.
pub type Canned = (u16, Vec<(&'static str, String)>, String);

/// Captured (authorization header, body) pairs.
pub type Requests = std::sync::Arc<std::sync::Mutex<Vec<(Option<String>, String)>>>;

/// Minimal HTTP/1.1 server on localhost. Each connection gets the next
/// response from `script`; the last one repeats. Returns the base URL and
/// the captured (authorization header, body) of every request.
pub fn mock_server(script: Vec<Canned>) -> (String, Requests) {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::sync::{Arc, Mutex};

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    std::thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(mut stream) = stream else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut len, mut auth) = (0usize, None);
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0; len];
            let _ = reader.read_exact(&mut body);
            log.lock().unwrap().push((auth, String::from_utf8_lossy(&body).into_owned()));
            let (status, headers, text) = &script[i.min(script.len() - 1)];
            let mut out = format!("HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n", text.len());
            for (k, v) in headers {
                out.push_str(&format!("{k}: {v}\r\n"));
            }
            out.push_str("\r\n");
            out.push_str(text);
            let _ = stream.write_all(out.as_bytes());
        }
    });
    (url, seen)
}

/// A completion reply body with the given texts, listed in reverse index order.
pub fn choices_json(texts: &[&str]) -> String {
    let choices: Vec<_> = texts
        .iter()
        .enumerate()
        .rev()
        .map(|(i, t)| serde_json::json!({"index": i, "text": t}))
        .collect();
    serde_json::json!({ "choices": choices }).to_string()
}
