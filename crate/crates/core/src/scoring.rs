//! Completion judging: normalized exact match with pass@1 for fact-finding
//! tasks, coordinate-aligned cell precision/recall/F1 for transformations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats;
use crate::table::Table;
use crate::taskgen::{AnswerKey, TaskInstance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScoreError {
    #[error("instance {0} has no completions to score")]
    NoCompletions(String),
    #[error("instance {id} has the wrong answer kind for {judge}")]
    WrongAnswerKind { id: String, judge: &'static str },
}

fn strip_wrappers(mut s: &str) -> &str {
    loop {
        let t = s.trim();
        let stripped = ['"', '\'', '`'].iter().find_map(|&q| {
            t.strip_prefix(q)
                .and_then(|r| r.strip_suffix(q))
        });
        match stripped {
            Some(inner) if t.len() >= 2 => s = inner,
            _ => return t,
        }
    }
}

/// Canonical text for a numeric literal: integral values without a fraction,
/// others in shortest round-trip decimal.
fn canonical_number(s: &str) -> Option<String> {
    let numeric = s
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e'));
    if !numeric || !s.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    let v: f64 = s.parse().ok().filter(|v: &f64| v.is_finite())?;
    if v == v.trunc() && v.abs() < 1e15 {
        Some(format!("{}", v as i64))
    } else {
        Some(format!("{v}"))
    }
}

/// Cell-level normalization: trim, strip quotes and backticks, casefold,
/// canonicalize numbers.
pub fn normalize_cell(s: &str) -> String {
    let folded = strip_wrappers(s).to_lowercase();
    canonical_number(&folded).unwrap_or(folded)
}

/// Answer normalization: the last non-empty line, then [`normalize_cell`].
pub fn normalize_answer(s: &str) -> String {
    let line = s
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("");
    normalize_cell(line)
}

/// Unbiased pass@k estimator `1 - C(n-c, k) / C(n, k)`.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> f64 {
    assert!(c <= n && k >= 1 && k <= n, "pass@k needs c <= n and 1 <= k <= n");
    if n - c < k {
        return 1.0;
    }
    1.0 - ((n - c + 1)..=n)
        .map(|i| 1.0 - k as f64 / i as f64)
        .product::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub parse_failed: bool,
}

impl CellScore {
    pub const ZERO: CellScore = CellScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        parse_failed: false,
    };

    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        CellScore {
            precision,
            recall,
            f1,
            parse_failed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdicts {
    Fact(Vec<bool>),
    Table(Vec<CellScore>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub instance_id: String,
    pub verdicts: Verdicts,
}

impl ScoreRecord {
    pub fn pass_at_1(&self) -> Option<f64> {
        match &self.verdicts {
            Verdicts::Fact(v) => {
                let c = v.iter().filter(|&&ok| ok).count();
                Some(c as f64 / v.len() as f64)
            }
            Verdicts::Table(_) => None,
        }
    }

    /// Mean precision, recall and F1 over completions.
    pub fn mean_prf(&self) -> Option<(f64, f64, f64)> {
        match &self.verdicts {
            Verdicts::Table(scores) => {
                let n = scores.len() as f64;
                let sum = scores.iter().fold((0.0, 0.0, 0.0), |acc, s| {
                    (acc.0 + s.precision, acc.1 + s.recall, acc.2 + s.f1)
                });
                Some((sum.0 / n, sum.1 / n, sum.2 / n))
            }
            Verdicts::Fact(_) => None,
        }
    }

    /// Per-instance statistical unit: pass@1 or mean F1.
    pub fn instance_score(&self) -> f64 {
        self.pass_at_1()
            .or_else(|| self.mean_prf().map(|(_, _, f1)| f1))
            .expect("every verdict kind has a score")
    }
}

pub fn judge_fact(instance: &TaskInstance, completions: &[String]) -> Result<ScoreRecord, ScoreError> {
    let AnswerKey::Accept(accept) = &instance.answer else {
        return Err(ScoreError::WrongAnswerKind {
            id: instance.id.clone(),
            judge: "judge_fact",
        });
    };
    if completions.is_empty() {
        return Err(ScoreError::NoCompletions(instance.id.clone()));
    }
    let verdicts = completions
        .iter()
        .map(|c| accept.contains(&normalize_answer(c)))
        .collect();
    Ok(ScoreRecord {
        instance_id: instance.id.clone(),
        verdicts: Verdicts::Fact(verdicts),
    })
}

/// Cells keyed by grid position: header names on row 0, labels on column 0,
/// values offset by one in both directions.
pub fn coordinate_cells(t: &Table) -> HashMap<(usize, usize), String> {
    let mut cells = HashMap::with_capacity((t.n_rows() + 1) * (t.n_cols() + 1));
    for (j, name) in t.column_names().iter().enumerate() {
        cells.insert((0, j + 1), normalize_cell(name));
    }
    for (i, (label, row)) in t.row_labels().iter().zip(t.rows()).enumerate() {
        cells.insert((i + 1, 0), normalize_cell(label));
        for (j, c) in row.iter().enumerate() {
            cells.insert((i + 1, j + 1), normalize_cell(c.raw()));
        }
    }
    cells
}

pub fn table_cell_score(predicted: &Table, gold: &Table) -> CellScore {
    let pred = coordinate_cells(predicted);
    let gold = coordinate_cells(gold);
    let matched = gold
        .iter()
        .filter(|(pos, v)| pred.get(*pos) == Some(*v))
        .count();
    CellScore::from_counts(matched, pred.len(), gold.len())
}

pub fn judge_table(instance: &TaskInstance, completions: &[String]) -> Result<ScoreRecord, ScoreError> {
    let AnswerKey::Gold { table, format } = &instance.answer else {
        return Err(ScoreError::WrongAnswerKind {
            id: instance.id.clone(),
            judge: "judge_table",
        });
    };
    if completions.is_empty() {
        return Err(ScoreError::NoCompletions(instance.id.clone()));
    }
    let scores = completions
        .iter()
        .map(|c| match formats::parse(c, *format) {
            Ok(pred) => table_cell_score(&pred, table),
            Err(_) => CellScore {
                parse_failed: true,
                ..CellScore::ZERO
            },
        })
        .collect();
    Ok(ScoreRecord {
        instance_id: instance.id.clone(),
        verdicts: Verdicts::Table(scores),
    })
}

pub fn judge(instance: &TaskInstance, completions: &[String]) -> Result<ScoreRecord, ScoreError> {
    match instance.answer {
        AnswerKey::Accept(_) => judge_fact(instance, completions),
        AnswerKey::Gold { .. } => judge_table(instance, completions),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::Format;
    use crate::noise::NoiseKind;
    use crate::table::load_csv;
    use crate::taskgen::TaskKind;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn fact(accept: &[&str]) -> TaskInstance {
        TaskInstance {
            id: "x".into(),
            kind: TaskKind::Navigation,
            dataset: "d".into(),
            format: Format::Json,
            noise: NoiseKind::OriginalData,
            seed: 0,
            rendered_table: String::new(),
            question: String::new(),
            answer: AnswerKey::Accept(accept.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>()),
        }
    }

    fn table_task(gold: Table) -> TaskInstance {
        TaskInstance {
            answer: AnswerKey::Gold {
                table: gold,
                format: Format::CommaSeparated,
            },
            kind: TaskKind::TableTranspose,
            ..fact(&[])
        }
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_answer(" Alice\n"), "alice");
        assert_eq!(normalize_answer("`30.0`"), "30");
        assert_eq!(normalize_answer("The answer is:\nage"), "age");
        assert_eq!(normalize_answer("\"'1.50'\""), "1.5");
        assert_eq!(normalize_answer("-0"), "0");
        assert_eq!(normalize_answer("2020-01-01"), "2020-01-01");
        assert_eq!(normalize_answer("\""), "\"");
        assert_eq!(normalize_answer("1e20"), "100000000000000000000");
    }

    #[test]
    fn pass_at_1_examples() {
        let inst = fact(&["alice"]);
        let mk = |c: usize| -> Vec<String> {
            (0..15).map(|i| if i < c { "Alice".into() } else { "bob".into() }).collect()
        };
        assert_eq!(judge_fact(&inst, &mk(15)).unwrap().pass_at_1(), Some(1.0));
        assert_eq!(judge_fact(&inst, &mk(0)).unwrap().pass_at_1(), Some(0.0));
        let p = judge_fact(&inst, &mk(5)).unwrap().pass_at_1().unwrap();
        assert!((p - 0.3333).abs() < 1e-4);
        assert!((p - pass_at_k(15, 5, 1)).abs() < 1e-12);
        assert_eq!(
            judge_fact(&inst, &[]),
            Err(ScoreError::NoCompletions("x".into()))
        );
    }

    #[test]
    fn table_examples() {
        let gold = load_csv(b"a,b\n1,2\n3,4", true).unwrap();
        let inst = table_task(gold.clone());
        let exact = formats::serialize(&gold, Format::CommaSeparated);
        let rec = judge_table(&inst, &[exact, String::new()]).unwrap();
        let Verdicts::Table(scores) = &rec.verdicts else { panic!() };
        assert_eq!((scores[0].precision, scores[0].recall, scores[0].f1), (1.0, 1.0, 1.0));
        assert_eq!((scores[1].precision, scores[1].recall, scores[1].f1), (0.0, 0.0, 0.0));
        assert!(scores[1].parse_failed);
        assert_eq!(rec.mean_prf().unwrap().2, 0.5);

        // Columns swapped: the 2 labels still line up, the 6 name/value cells do not.
        let swapped = "index,b,a\n0,2,1\n1,4,3".to_string();
        let rec = judge_table(&inst, &[swapped]).unwrap();
        assert!((rec.instance_score() - 2.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn f1_zero_iff_no_match() {
        assert_eq!(CellScore::from_counts(0, 5, 5).f1, 0.0);
        assert!(CellScore::from_counts(1, 5, 5).f1 > 0.0);
        assert_eq!(CellScore::from_counts(0, 0, 5), CellScore::ZERO);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(s in "\\PC{0,12}") {
            let once = normalize_answer(&s);
            prop_assert_eq!(normalize_answer(&once), once.clone());
            prop_assert_eq!(normalize_cell(&once), once);
        }

        #[test]
        fn numeric_normalization_is_idempotent(v in -1e18f64..1e18) {
            let once = normalize_answer(&format!("{v}"));
            prop_assert_eq!(normalize_answer(&once), once);
        }
    }
}
