//! Seeded structural noise operators. Every operator is a pure function of
//! (operator, seed, table).

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::table::{self, Table};

/// Separator inserted between merged column values and names.
pub const MERGE_SEPARATOR: &str = "-----";

/// Name of the single column produced by [`NoiseKind::SerializeRow`].
pub const SERIALIZED_ROW_COLUMN: &str = "row";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseKind {
    OriginalData,
    ShuffleRows,
    ShuffleColumns,
    TransposeTable,
    ArbitraryColumnNames,
    SequentialColumnNames,
    ShuffleColumnNames,
    SerializeRow,
    ColumnMerger,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 9] = [
        NoiseKind::OriginalData,
        NoiseKind::ShuffleRows,
        NoiseKind::ShuffleColumns,
        NoiseKind::TransposeTable,
        NoiseKind::ArbitraryColumnNames,
        NoiseKind::SequentialColumnNames,
        NoiseKind::ShuffleColumnNames,
        NoiseKind::SerializeRow,
        NoiseKind::ColumnMerger,
    ];

    pub fn id(self) -> &'static str {
        match self {
            NoiseKind::OriginalData => "OriginalData",
            NoiseKind::ShuffleRows => "ShuffleRows",
            NoiseKind::ShuffleColumns => "ShuffleColumns",
            NoiseKind::TransposeTable => "TransposeTable",
            NoiseKind::ArbitraryColumnNames => "ArbitraryColumnNames",
            NoiseKind::SequentialColumnNames => "SequentialColumnNames",
            NoiseKind::ShuffleColumnNames => "ShuffleColumnNames",
            NoiseKind::SerializeRow => "SerializeRow",
            NoiseKind::ColumnMerger => "ColumnMerger",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown noise operation {0:?}")]
pub struct UnknownNoise(pub String);

impl FromStr for NoiseKind {
    type Err = UnknownNoise;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoiseKind::ALL
            .into_iter()
            .find(|n| n.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownNoise(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NoiseError {
    #[error("{op} needs at least {needed} columns, table has {found}")]
    NotApplicable {
        op: NoiseKind,
        needed: usize,
        found: usize,
    },
    #[error("{op} produced an invalid table: {reason}")]
    Invalid { op: NoiseKind, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseOp {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseOp {
    pub fn new(kind: NoiseKind, seed: u64) -> Self {
        NoiseOp { kind, seed }
    }

    pub fn apply(&self, t: &Table) -> Result<Table, NoiseError> {
        apply_noise(*self, t)
    }
}

/// Seeded shuffle of `0..n` that is not the identity whenever `n > 1`.
fn non_identity_permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if n <= 1 || perm.iter().enumerate().any(|(i, &p)| i != p) {
            return perm;
        }
    }
}

fn rebuild(
    op: NoiseKind,
    names: Vec<String>,
    labels: Vec<String>,
    rows: Vec<Vec<String>>,
) -> Result<Table, NoiseError> {
    Table::new(names, labels, rows).map_err(|e| NoiseError::Invalid {
        op,
        reason: e.to_string(),
    })
}

fn select_columns(t: &Table, order: &[usize]) -> (Vec<String>, Vec<Vec<String>>) {
    let names = order.iter().map(|&j| t.column_names()[j].clone()).collect();
    let rows = t
        .rows()
        .map(|r| order.iter().map(|&j| r[j].raw().to_string()).collect())
        .collect();
    (names, rows)
}

pub fn apply_noise(op: NoiseOp, t: &Table) -> Result<Table, NoiseError> {
    let mut rng = seed::rng(op.seed);
    let labels = t.row_labels().to_vec();
    match op.kind {
        NoiseKind::OriginalData => Ok(t.clone()),
        NoiseKind::ShuffleRows => {
            let perm = non_identity_permutation(t.n_rows(), &mut rng);
            let raw = t.raw_rows();
            rebuild(
                op.kind,
                t.column_names().to_vec(),
                perm.iter().map(|&i| labels[i].clone()).collect(),
                perm.iter().map(|&i| raw[i].clone()).collect(),
            )
        }
        NoiseKind::ShuffleColumns => {
            let perm = non_identity_permutation(t.n_cols(), &mut rng);
            let (names, rows) = select_columns(t, &perm);
            rebuild(op.kind, names, labels, rows)
        }
        NoiseKind::TransposeTable => Ok(table::transpose(t)),
        NoiseKind::ArbitraryColumnNames => {
            let mut seen = HashSet::new();
            let names = (0..t.n_cols())
                .map(|_| loop {
                    let name = random_name(&mut rng);
                    if seen.insert(name.clone()) {
                        break name;
                    }
                })
                .collect();
            rebuild(op.kind, names, labels, t.raw_rows())
        }
        NoiseKind::SequentialColumnNames => {
            let names = (0..t.n_cols()).map(|j| format!("col_{j}")).collect();
            rebuild(op.kind, names, labels, t.raw_rows())
        }
        NoiseKind::ShuffleColumnNames => {
            let perm = non_identity_permutation(t.n_cols(), &mut rng);
            let names = perm.iter().map(|&j| t.column_names()[j].clone()).collect();
            rebuild(op.kind, names, labels, t.raw_rows())
        }
        NoiseKind::SerializeRow => {
            let rows = t.rows().map(|r| vec![serialize_row(t.column_names(), r.iter().map(|c| c.raw()))]).collect();
            rebuild(op.kind, vec![SERIALIZED_ROW_COLUMN.into()], labels, rows)
        }
        NoiseKind::ColumnMerger => {
            let k = t.n_cols();
            if k < 2 {
                return Err(NoiseError::NotApplicable {
                    op: op.kind,
                    needed: 2,
                    found: k,
                });
            }
            let arity = rng.random_range(2..=k.min(4));
            let start = rng.random_range(0..=k - arity);
            merge_columns(t, start, arity)
        }
    }
}

fn random_name<R: Rng>(rng: &mut R) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..8)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
        .collect()
}

/// `"name1: v1, name2: v2, ..."` for one row.
pub fn serialize_row<'a>(names: &[String], values: impl Iterator<Item = &'a str>) -> String {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| format!("{n}: {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Joins columns `start..start + arity` into one column, names and values
/// separated by [`MERGE_SEPARATOR`].
pub fn merge_columns(t: &Table, start: usize, arity: usize) -> Result<Table, NoiseError> {
    let k = t.n_cols();
    if arity < 2 || start + arity > k {
        return Err(NoiseError::NotApplicable {
            op: NoiseKind::ColumnMerger,
            needed: start + arity.max(2),
            found: k,
        });
    }
    let window = start..start + arity;
    let mut names: Vec<String> = t.column_names()[..start].to_vec();
    names.push(t.column_names()[window.clone()].join(MERGE_SEPARATOR));
    names.extend_from_slice(&t.column_names()[start + arity..]);
    let rows = t
        .rows()
        .map(|r| {
            let mut row: Vec<String> = r[..start].iter().map(|c| c.raw().to_string()).collect();
            row.push(
                r[window.clone()]
                    .iter()
                    .map(|c| c.raw())
                    .collect::<Vec<_>>()
                    .join(MERGE_SEPARATOR),
            );
            row.extend(r[start + arity..].iter().map(|c| c.raw().to_string()));
            row
        })
        .collect();
    rebuild(NoiseKind::ColumnMerger, names, t.row_labels().to_vec(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{load_csv, DType};

    fn t0() -> Table {
        load_csv(b"name,age\nalice,30\nbob,25", true).unwrap()
    }

    fn wide() -> Table {
        load_csv(
            b"a,b,c,d,e\n1,x,2.5,True,2020-01-01\n2,y,3.5,False,2020-01-02\n3,z,4.5,True,2020-01-03",
            true,
        )
        .unwrap()
    }

    #[test]
    fn sequential_names() {
        let t = apply_noise(NoiseOp::new(NoiseKind::SequentialColumnNames, 0), &t0()).unwrap();
        assert_eq!(t.column_names(), &["col_0", "col_1"]);
        assert_eq!(t.raw_rows(), t0().raw_rows());
    }

    #[test]
    fn merge_two_columns() {
        let t = merge_columns(&t0(), 0, 2).unwrap();
        assert_eq!(t.column_names(), &["name-----age"]);
        assert_eq!(t.cell(0, 0).raw(), "alice-----30");
        assert_eq!(t.dtypes(), &[DType::Object]);
        // on two columns the seeded choice is forced
        for s in 0..20 {
            let m = apply_noise(NoiseOp::new(NoiseKind::ColumnMerger, s), &t0()).unwrap();
            assert!(m.same_content(&t));
        }
    }

    #[test]
    fn merger_needs_two_columns() {
        let one = load_csv(b"a\n1", true).unwrap();
        assert!(matches!(
            apply_noise(NoiseOp::new(NoiseKind::ColumnMerger, 1), &one),
            Err(NoiseError::NotApplicable { .. })
        ));
    }

    #[test]
    fn serialize_row_single_column() {
        let t = apply_noise(NoiseOp::new(NoiseKind::SerializeRow, 0), &t0()).unwrap();
        assert_eq!(t.column_names(), &["row"]);
        assert_eq!(t.cell(0, 0).raw(), "name: alice, age: 30");
        assert_eq!(t.row_labels(), t0().row_labels());
    }

    #[test]
    fn arbitrary_names_are_unique_alnum() {
        let t = apply_noise(NoiseOp::new(NoiseKind::ArbitraryColumnNames, 7), &wide()).unwrap();
        for n in t.column_names() {
            assert_eq!(n.len(), 8);
            assert!(n.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()));
        }
    }

    #[test]
    fn shuffles_never_identity() {
        for s in 0..50 {
            let r = apply_noise(NoiseOp::new(NoiseKind::ShuffleRows, s), &t0()).unwrap();
            assert_eq!(r.row_labels(), &["1", "0"]);
            let c = apply_noise(NoiseOp::new(NoiseKind::ShuffleColumns, s), &t0()).unwrap();
            assert_eq!(c.column_names(), &["age", "name"]);
            assert_eq!(c.dtypes(), &[DType::Int64, DType::Object]);
            let n = apply_noise(NoiseOp::new(NoiseKind::ShuffleColumnNames, s), &t0()).unwrap();
            assert_eq!(n.column_names(), &["age", "name"]);
            assert_eq!(n.raw_rows(), t0().raw_rows());
        }
    }

    #[test]
    fn ids_round_trip() {
        for n in NoiseKind::ALL {
            assert_eq!(n.id().parse::<NoiseKind>().unwrap(), n);
        }
    }
}
