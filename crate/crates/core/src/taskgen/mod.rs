//! Self-supervised task generation. Ground truth is always computed from the
//! noisy table after it has been cut down to fit the prompt budget, so an
//! answer never depends on rows the model did not see.

mod prompt;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{self, Format, TokenCounter};
use crate::noise::{self, NoiseKind};
use crate::scoring::{normalize_answer, normalize_cell};
use crate::seed;
use crate::table::{self, Table};

pub use prompt::{build_prompt, PromptTemplate, DEFAULT_TEMPLATE};

/// Context window of the target model.
pub const TOKEN_LIMIT: usize = 4097;
/// Tokens held back for the completion of a fact-finding prompt.
pub const FACT_RESERVE: usize = 256;
/// Tokens held back for the completion of a transformation prompt.
pub const TRANSFORM_RESERVE: usize = 1536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    Navigation,
    ColumnLookup,
    RowLookup,
    DataTypeLookup,
    TableReconstruction,
    TableTranspose,
    TableColumnReorder,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::Navigation,
        TaskKind::ColumnLookup,
        TaskKind::RowLookup,
        TaskKind::DataTypeLookup,
        TaskKind::TableReconstruction,
        TaskKind::TableTranspose,
        TaskKind::TableColumnReorder,
    ];

    pub const FACT: [TaskKind; 4] = [
        TaskKind::ColumnLookup,
        TaskKind::DataTypeLookup,
        TaskKind::Navigation,
        TaskKind::RowLookup,
    ];

    pub const TRANSFORM: [TaskKind; 3] = [
        TaskKind::TableColumnReorder,
        TaskKind::TableReconstruction,
        TaskKind::TableTranspose,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TaskKind::Navigation => "Navigation",
            TaskKind::ColumnLookup => "ColumnLookup",
            TaskKind::RowLookup => "RowLookup",
            TaskKind::DataTypeLookup => "DataTypeLookup",
            TaskKind::TableReconstruction => "TableReconstruction",
            TaskKind::TableTranspose => "TableTranspose",
            TaskKind::TableColumnReorder => "TableColumnReorder",
        }
    }

    /// Column heading used in reports, e.g. `NavigationTests`.
    pub fn report_name(self) -> String {
        format!("{}Tests", self.id())
    }

    pub fn is_fact(self) -> bool {
        matches!(
            self,
            TaskKind::Navigation
                | TaskKind::ColumnLookup
                | TaskKind::RowLookup
                | TaskKind::DataTypeLookup
        )
    }

    pub fn reserve(self) -> usize {
        if self.is_fact() {
            FACT_RESERVE
        } else {
            TRANSFORM_RESERVE
        }
    }

    /// Instances per (table, format, noise, task) unless configured otherwise.
    pub fn default_count(self, format: Format) -> usize {
        match (self.is_fact(), format.is_html()) {
            (true, true) => 50,
            (true, false) => 100,
            (false, _) => 25,
        }
    }

    /// Completions sampled per instance.
    pub fn default_completions(self) -> usize {
        if self.is_fact() {
            15
        } else {
            5
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown task {0:?}")]
pub struct UnknownTask(pub String);

impl FromStr for TaskKind {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.strip_suffix("Tests").unwrap_or(s);
        TaskKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("table has no rows")]
    EmptyTable,
    #[error("{kind} needs at least {needed} columns, table has {found}")]
    NotApplicable {
        kind: TaskKind,
        needed: usize,
        found: usize,
    },
    #[error("a single row needs more than the {available} tokens available")]
    TableTooWide { available: usize },
    #[error("prompt overhead of {overhead} tokens leaves no room in a budget of {available}")]
    NoBudget { overhead: usize, available: usize },
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("template placeholder {0:?} has no value")]
    UnfilledPlaceholder(String),
    #[error("{kind} is not a {expected} task")]
    WrongKind {
        kind: TaskKind,
        expected: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKey {
    /// Normalized strings any of which counts as correct.
    Accept(BTreeSet<String>),
    /// Expected output table and the format it must be written in.
    Gold { table: Table, format: Format },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub kind: TaskKind,
    pub dataset: String,
    pub format: Format,
    pub noise: NoiseKind,
    pub seed: u64,
    pub rendered_table: String,
    pub question: String,
    pub answer: AnswerKey,
}

impl TaskInstance {
    pub fn prompt(&self, template: &PromptTemplate) -> Result<String, TaskError> {
        template.fill(self.kind, self.format, &self.rendered_table, &self.question)
    }
}

/// Shared settings for one generation pass.
#[derive(Clone, Copy)]
pub struct GenContext<'a> {
    pub dataset: &'a str,
    pub template: &'a PromptTemplate,
    pub counter: &'a dyn TokenCounter,
    pub token_limit: usize,
}

/// Generated instances plus how many were asked for.
#[derive(Debug, Clone)]
pub struct Batch {
    pub instances: Vec<TaskInstance>,
    pub requested: usize,
    pub rows_kept: usize,
    pub rows_total: usize,
}

impl Batch {
    /// Fewer distinct targets existed than instances requested.
    pub fn is_short(&self) -> bool {
        self.instances.len() < self.requested
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub limit: usize,
    pub reserve: usize,
}

impl Budget {
    pub fn for_kind(kind: TaskKind, limit: usize) -> Self {
        Budget {
            limit,
            reserve: kind.reserve(),
        }
    }

    pub fn available(&self) -> usize {
        self.limit.saturating_sub(self.reserve)
    }
}

/// Largest `k` in `0..=n` with `fits(k)`, given `fits` is monotone
/// (true up to some point, false after).
pub fn longest_fitting_prefix(n: usize, mut fits: impl FnMut(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Longest row prefix whose serialization plus `prompt_overhead` fits the
/// budget minus the completion reserve.
pub fn fit_rows_to_budget(
    t: &Table,
    f: Format,
    prompt_overhead: usize,
    budget: Budget,
    counter: &dyn TokenCounter,
) -> Result<Table, TaskError> {
    let available = budget.available();
    if prompt_overhead >= available {
        return Err(TaskError::NoBudget {
            overhead: prompt_overhead,
            available,
        });
    }
    if t.n_rows() == 0 {
        return Err(TaskError::EmptyTable);
    }
    let k = longest_fitting_prefix(t.n_rows(), |k| {
        counter.count(&formats::serialize(&t.head(k), f)) + prompt_overhead <= available
    });
    if k == 0 {
        return Err(TaskError::TableTooWide { available });
    }
    Ok(t.head(k))
}

fn quoted(s: &str) -> String {
    format!("\"{s}\"")
}

fn navigation_question(label: &str, column: &str) -> String {
    format!(
        "What is the value in the row with index {} and the column {}?",
        quoted(label),
        quoted(column)
    )
}

fn column_lookup_question(value: &str) -> String {
    format!(
        "Which column contains the value {}? Give the column name.",
        quoted(value)
    )
}

fn row_lookup_question(value: &str) -> String {
    format!(
        "Which row contains the value {}? Give the row index.",
        quoted(value)
    )
}

fn dtype_question(column: &str) -> String {
    format!(
        "What is the pandas datatype of the column {}? Choose one of int64, float64, bool, datetime64[ns], object.",
        quoted(column)
    )
}

const TRANSPOSE_QUESTION: &str =
    "Transpose the table so that its columns become rows and its rows become columns.";

const RECONSTRUCTION_QUESTION: &str =
    "Rebuild the table from these rows. Number the row index 0, 1, 2, ... in the order the rows appear.";

fn reorder_question(order: &[String]) -> String {
    format!(
        "Reorder the columns of the table to this order: {}.",
        serde_json::to_string(order).expect("string list serializes")
    )
}

/// Distinct raw cell values in first-appearance order.
fn distinct_values(t: &Table) -> Vec<String> {
    let mut seen = HashSet::new();
    t.rows()
        .flatten()
        .map(|c| c.raw())
        .filter(|v| seen.insert(*v))
        .map(str::to_string)
        .collect()
}

fn fact_targets(kind: TaskKind, t: &Table) -> Vec<(String, AnswerKey)> {
    let accept = |items: Vec<String>| AnswerKey::Accept(items.iter().map(|s| normalize_answer(s)).collect());
    match kind {
        TaskKind::Navigation => t
            .row_labels()
            .iter()
            .enumerate()
            .flat_map(|(i, label)| {
                t.column_names().iter().enumerate().map(move |(j, name)| {
                    (
                        navigation_question(label, name),
                        accept(vec![t.cell(i, j).raw().to_string()]),
                    )
                })
            })
            .collect(),
        TaskKind::ColumnLookup | TaskKind::RowLookup => {
            // Normalized value -> columns and rows holding it, in table order.
            let mut holders: HashMap<String, (BTreeSet<usize>, BTreeSet<usize>)> = HashMap::new();
            for (i, row) in t.rows().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    let entry = holders.entry(normalize_cell(c.raw())).or_default();
                    entry.0.insert(j);
                    entry.1.insert(i);
                }
            }
            distinct_values(t)
                .into_iter()
                .map(|v| {
                    let (cols, rows) = &holders[&normalize_cell(&v)];
                    if kind == TaskKind::ColumnLookup {
                        let names = cols.iter().map(|&j| t.column_names()[j].clone()).collect();
                        (column_lookup_question(&v), accept(names))
                    } else {
                        let labels = rows.iter().map(|&i| t.row_labels()[i].clone()).collect();
                        (row_lookup_question(&v), accept(labels))
                    }
                })
                .collect()
        }
        TaskKind::DataTypeLookup => t
            .column_names()
            .iter()
            .zip(t.dtypes())
            .map(|(name, d)| (dtype_question(name), accept(vec![d.name().to_string()])))
            .collect(),
        _ => Vec::new(),
    }
}

fn instance_id(dataset: &str, f: Format, noise: NoiseKind, kind: TaskKind, i: usize) -> String {
    format!("{dataset}/{f}/{noise}/{kind}/{i}")
}

/// Fact-finding instances over `noisy`, which is truncated to the budget
/// before targets are sampled without replacement.
pub fn gen_fact_finding(
    kind: TaskKind,
    noisy: &Table,
    f: Format,
    noise: NoiseKind,
    count: usize,
    seed: u64,
    ctx: &GenContext<'_>,
) -> Result<Batch, TaskError> {
    if !kind.is_fact() {
        return Err(TaskError::WrongKind {
            kind,
            expected: "fact-finding",
        });
    }
    if noisy.n_rows() == 0 {
        return Err(TaskError::EmptyTable);
    }
    // Any question drawn later is at most as long as the longest candidate
    // over the untruncated table.
    let overhead = fact_targets(kind, noisy)
        .iter()
        .map(|(q, _)| ctx.template.fill(kind, f, "", q).map(|p| ctx.counter.count(&p)))
        .try_fold(0, |acc, c| c.map(|c| acc.max(c)))?;
    let truncated = fit_rows_to_budget(
        noisy,
        f,
        overhead,
        Budget::for_kind(kind, ctx.token_limit),
        ctx.counter,
    )?;
    let rendered = formats::serialize(&truncated, f);
    let targets = fact_targets(kind, &truncated);
    let mut rng = seed::rng(seed);
    let picks = index::sample(&mut rng, targets.len(), count.min(targets.len()));
    let instances = picks
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let (question, answer) = targets[t].clone();
            TaskInstance {
                id: instance_id(ctx.dataset, f, noise, kind, i),
                kind,
                dataset: ctx.dataset.to_string(),
                format: f,
                noise,
                seed,
                rendered_table: rendered.clone(),
                question,
                answer,
            }
        })
        .collect();
    Ok(Batch {
        instances,
        requested: count,
        rows_kept: truncated.n_rows(),
        rows_total: noisy.n_rows(),
    })
}

/// Text shown to the model for a transformation task.
fn transformation_input(kind: TaskKind, t: &Table, f: Format) -> String {
    match kind {
        TaskKind::TableReconstruction => t
            .rows()
            .map(|r| noise::serialize_row(t.column_names(), r.iter().map(|c| c.raw())))
            .collect::<Vec<_>>()
            .join("\n"),
        _ => formats::serialize(t, f),
    }
}

fn transformation_gold(kind: TaskKind, t: &Table) -> Table {
    match kind {
        // Row labels are not part of the serialized rows, so the expected
        // output numbers rows positionally.
        TaskKind::TableReconstruction => t.relabeled(),
        TaskKind::TableTranspose => table::transpose(t),
        _ => t.clone(),
    }
}

fn select_rows(t: &Table, rows: &[usize]) -> Table {
    let raw = t.raw_rows();
    Table::new(
        t.column_names().to_vec(),
        rows.iter().map(|&i| t.row_labels()[i].clone()).collect(),
        rows.iter().map(|&i| raw[i].clone()).collect(),
    )
    .expect("row subset of a valid table is valid")
}

fn permute_columns(t: &Table, order: &[usize]) -> Table {
    let raw = t.raw_rows();
    Table::new(
        order.iter().map(|&j| t.column_names()[j].clone()).collect(),
        t.row_labels().to_vec(),
        raw.iter()
            .map(|r| order.iter().map(|&j| r[j].clone()).collect())
            .collect(),
    )
    .expect("column permutation of a valid table is valid")
}

/// Up to `count` distinct non-identity permutations of `0..k`.
fn distinct_permutations<R: Rng>(k: usize, count: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let identity: Vec<usize> = (0..k).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < count.max(1) * 50 {
        attempts += 1;
        let mut p = identity.clone();
        p.shuffle(rng);
        if p != identity && seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

/// Transformation instances. Reorder uses the budget-fitting row prefix with
/// a distinct column order per instance; transpose and reconstruction draw a
/// distinct row sample per instance, sized between half and all of the
/// fitting prefix length.
pub fn gen_transformation(
    kind: TaskKind,
    noisy: &Table,
    f: Format,
    noise: NoiseKind,
    count: usize,
    seed: u64,
    ctx: &GenContext<'_>,
) -> Result<Batch, TaskError> {
    if kind.is_fact() {
        return Err(TaskError::WrongKind {
            kind,
            expected: "transformation",
        });
    }
    if noisy.n_rows() == 0 {
        return Err(TaskError::EmptyTable);
    }
    if kind == TaskKind::TableColumnReorder && noisy.n_cols() < 2 {
        return Err(TaskError::NotApplicable {
            kind,
            needed: 2,
            found: noisy.n_cols(),
        });
    }
    let question = match kind {
        TaskKind::TableReconstruction => RECONSTRUCTION_QUESTION.to_string(),
        TaskKind::TableTranspose => TRANSPOSE_QUESTION.to_string(),
        _ => reorder_question(noisy.column_names()),
    };
    let budget = Budget::for_kind(kind, ctx.token_limit);
    let overhead = ctx.counter.count(&ctx.template.fill(kind, f, "", &question)?);
    if overhead >= budget.available() {
        return Err(TaskError::NoBudget {
            overhead,
            available: budget.available(),
        });
    }
    let fits = |sub: &Table| {
        ctx.counter.count(&transformation_input(kind, sub, f)) + overhead <= budget.available()
            && ctx
                .counter
                .count(&formats::serialize(&transformation_gold(kind, sub), f))
                <= budget.reserve
    };
    let kmax = longest_fitting_prefix(noisy.n_rows(), |k| fits(&noisy.head(k)));
    if kmax == 0 {
        return Err(TaskError::TableTooWide {
            available: budget.available(),
        });
    }

    let mut rng = seed::rng(seed);
    let mut cases: Vec<(Table, String, Table)> = Vec::new();
    if kind == TaskKind::TableColumnReorder {
        let base = noisy.head(kmax);
        for order in distinct_permutations(base.n_cols(), count, &mut rng) {
            let gold = permute_columns(&base, &order);
            cases.push((base.clone(), reorder_question(gold.column_names()), gold));
        }
    } else {
        let n = noisy.n_rows();
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut attempts = 0;
        while cases.len() < count && attempts < count.max(1) * 20 {
            attempts += 1;
            let size = rng.random_range(kmax.div_ceil(2)..=kmax);
            let mut rows = index::sample(&mut rng, n, size).into_vec();
            rows.sort_unstable();
            let mut sub = select_rows(noisy, &rows);
            while !fits(&sub) && rows.len() > 1 {
                rows.pop();
                sub = select_rows(noisy, &rows);
            }
            if fits(&sub) && seen.insert(rows) {
                let gold = transformation_gold(kind, &sub);
                cases.push((sub, question.clone(), gold));
            }
        }
    }

    let instances = cases
        .into_iter()
        .enumerate()
        .map(|(i, (shown, question, gold))| TaskInstance {
            id: instance_id(ctx.dataset, f, noise, kind, i),
            kind,
            dataset: ctx.dataset.to_string(),
            format: f,
            noise,
            seed,
            rendered_table: transformation_input(kind, &shown, f),
            question,
            answer: AnswerKey::Gold {
                table: gold,
                format: f,
            },
        })
        .collect();
    Ok(Batch {
        instances,
        requested: count,
        rows_kept: kmax,
        rows_total: noisy.n_rows(),
    })
}

/// Dispatches on task family.
pub fn generate(
    kind: TaskKind,
    noisy: &Table,
    f: Format,
    noise: NoiseKind,
    count: usize,
    seed: u64,
    ctx: &GenContext<'_>,
) -> Result<Batch, TaskError> {
    if kind.is_fact() {
        gen_fact_finding(kind, noisy, f, noise, count, seed, ctx)
    } else {
        gen_transformation(kind, noisy, f, noise, count, seed, ctx)
    }
}
