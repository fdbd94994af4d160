mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use regex::Regex;
use tablebench::formats::{parse, serialize, token_estimate, Format, HeuristicCounter};
use tablebench::harness::{generate_instances, load_datasets, RunConfig};
use tablebench::noise::{serialize_row, NoiseKind};
use tablebench::scoring::{normalize_answer, normalize_cell};
use tablebench::seed::rng;
use tablebench::table::{infer_dtype, transpose, Table};
use tablebench::taskgen::{
    build_prompt, fit_rows_to_budget, generate, longest_fitting_prefix, AnswerKey, Budget, GenContext,
    PromptTemplate, TaskError, TaskKind, DEFAULT_TEMPLATE,
};

fn accept(a: &AnswerKey) -> &BTreeSet<String> {
    match a {
        AnswerKey::Accept(s) => s,
        AnswerKey::Gold { .. } => panic!("expected a fact answer"),
    }
}

fn gold(a: &AnswerKey) -> &Table {
    match a {
        AnswerKey::Gold { table, .. } => table,
        AnswerKey::Accept(_) => panic!("expected a gold table"),
    }
}

fn quoted_args(re: &Regex, q: &str) -> Vec<String> {
    let caps = re.captures(q).unwrap_or_else(|| panic!("question does not match {re}: {q}"));
    caps.iter().skip(1).map(|m| m.unwrap().as_str().to_string()).collect()
}

/// Re-derives every answer from the rendered table text alone.
#[test]
fn answers_follow_from_rendered_tables() {
    let cfg = RunConfig {
        datasets: common::fixtures(),
        fact_count: 15,
        html_fact_count: 10,
        transform_count: 4,
        seed: 11,
        ..RunConfig::default()
    };
    let datasets = load_datasets(&cfg).unwrap();
    let (instances, _) = generate_instances(&cfg, &datasets).unwrap();
    let nav = Regex::new(r#"^What is the value in the row with index "(.*)" and the column "(.*)"\?$"#).unwrap();
    let col = Regex::new(r#"^Which column contains the value "(.*)"\? Give the column name\.$"#).unwrap();
    let row = Regex::new(r#"^Which row contains the value "(.*)"\? Give the row index\.$"#).unwrap();
    let dt = Regex::new(r#"^What is the pandas datatype of the column "(.*)"\? Choose"#).unwrap();
    let reorder = Regex::new(r"^Reorder the columns of the table to this order: (.*)\.$").unwrap();

    let mut seen = BTreeSet::new();
    for inst in &instances {
        seen.insert((inst.format, inst.noise, inst.kind));
        if inst.kind == TaskKind::TableReconstruction {
            let g = gold(&inst.answer);
            let lines: Vec<String> =
                g.raw_rows().iter().map(|r| serialize_row(g.column_names(), r.iter().map(String::as_str))).collect();
            assert_eq!(inst.rendered_table, lines.join("\n"), "{}", inst.id);
            assert!(g.row_labels().iter().enumerate().all(|(i, l)| *l == i.to_string()));
            continue;
        }
        let shown = parse(&inst.rendered_table, inst.format).unwrap_or_else(|e| panic!("{}: {e}", inst.id));
        let n = |s: &str| normalize_cell(s);
        match inst.kind {
            TaskKind::Navigation => {
                let args = quoted_args(&nav, &inst.question);
                let i = shown.row_labels().iter().position(|l| *l == args[0]).expect("label exists");
                let j = shown.column_names().iter().position(|c| *c == args[1]).expect("column exists");
                let want: BTreeSet<String> = [normalize_answer(shown.cell(i, j).raw())].into();
                assert_eq!(accept(&inst.answer), &want, "{}", inst.id);
            }
            TaskKind::ColumnLookup => {
                let v = &quoted_args(&col, &inst.question)[0];
                let want: BTreeSet<String> = (0..shown.n_cols())
                    .filter(|&j| shown.raw_rows().iter().any(|r| n(&r[j]) == n(v)))
                    .map(|j| normalize_answer(&shown.column_names()[j]))
                    .collect();
                assert_eq!(accept(&inst.answer), &want, "{}", inst.id);
            }
            TaskKind::RowLookup => {
                let v = &quoted_args(&row, &inst.question)[0];
                let want: BTreeSet<String> = shown
                    .raw_rows()
                    .iter()
                    .zip(shown.row_labels())
                    .filter(|(r, _)| r.iter().any(|c| n(c) == n(v)))
                    .map(|(_, l)| normalize_answer(l))
                    .collect();
                assert_eq!(accept(&inst.answer), &want, "{}", inst.id);
            }
            TaskKind::DataTypeLookup => {
                let name = &quoted_args(&dt, &inst.question)[0];
                let j = shown.column_names().iter().position(|c| c == name).unwrap();
                let cells: Vec<String> = shown.raw_rows().iter().map(|r| r[j].clone()).collect();
                let want: BTreeSet<String> = [infer_dtype(&cells).name().to_string()].into();
                assert_eq!(accept(&inst.answer), &want, "{}", inst.id);
            }
            TaskKind::TableTranspose => {
                assert_eq!(gold(&inst.answer), &transpose(&shown), "{}", inst.id);
            }
            TaskKind::TableColumnReorder => {
                let order: Vec<String> = serde_json::from_str(&quoted_args(&reorder, &inst.question)[0]).unwrap();
                let g = gold(&inst.answer);
                assert_eq!(g.column_names(), order.as_slice());
                assert_eq!(BTreeSet::from_iter(order.iter()), BTreeSet::from_iter(shown.column_names().iter()));
                for (j, name) in order.iter().enumerate() {
                    let src = shown.column_names().iter().position(|c| c == name).unwrap();
                    let a: Vec<_> = g.raw_rows().iter().map(|r| r[j].clone()).collect();
                    let b: Vec<_> = shown.raw_rows().iter().map(|r| r[src].clone()).collect();
                    assert_eq!(a, b, "{}", inst.id);
                }
            }
            TaskKind::TableReconstruction => unreachable!(),
        }
        let prompt = build_prompt(inst, DEFAULT_TEMPLATE).unwrap();
        assert!(token_estimate(&prompt) <= 4097 - inst.kind.reserve(), "{}", inst.id);
        assert!(prompt.contains(&inst.rendered_table) && prompt.contains(&inst.question));
    }
    // Reorder cannot apply once SerializeRow leaves a single column.
    assert_eq!(seen.len(), 8 * 9 * 7 - 8);
}

#[test]
fn generation_is_deterministic_and_seed_sensitive() {
    let t = common::wide_table(&mut rng(2), 40, 6);
    let tpl = PromptTemplate::builtin(DEFAULT_TEMPLATE).unwrap();
    let ctx = GenContext { dataset: "d", template: &tpl, counter: &HeuristicCounter, token_limit: 4097 };
    for kind in TaskKind::ALL {
        let a = generate(kind, &t, Format::Markdown, NoiseKind::OriginalData, 10, 5, &ctx).unwrap();
        let b = generate(kind, &t, Format::Markdown, NoiseKind::OriginalData, 10, 5, &ctx).unwrap();
        let c = generate(kind, &t, Format::Markdown, NoiseKind::OriginalData, 10, 6, &ctx).unwrap();
        assert_eq!(a.instances, b.instances, "{kind}");
        if kind != TaskKind::DataTypeLookup {
            assert_ne!(a.instances, c.instances, "{kind}");
        }
        let distinct: BTreeSet<_> = a.instances.iter().map(|i| (&i.rendered_table, &i.question)).collect();
        assert_eq!(distinct.len(), a.instances.len(), "{kind} repeats an instance");
    }
}

#[test]
fn too_wide_and_too_small_budgets() {
    let wide = common::wide_table(&mut rng(9), 3, 400);
    let tpl = PromptTemplate::builtin(DEFAULT_TEMPLATE).unwrap();
    let ctx = GenContext { dataset: "d", template: &tpl, counter: &HeuristicCounter, token_limit: 4097 };
    let err = generate(TaskKind::Navigation, &wide, Format::Html, NoiseKind::OriginalData, 5, 0, &ctx).unwrap_err();
    assert!(matches!(err, TaskError::TableTooWide { .. }), "{err:?}");

    let tiny = GenContext { token_limit: 300, ..ctx };
    let t = common::wide_table(&mut rng(9), 3, 3);
    let err = generate(TaskKind::TableTranspose, &t, Format::Json, NoiseKind::OriginalData, 5, 0, &tiny).unwrap_err();
    assert!(matches!(err, TaskError::NoBudget { .. }), "{err:?}");
}

proptest! {
    #[test]
    fn binary_search_matches_linear_scan(n in 0usize..300, cut in 0usize..320) {
        let linear = (0..=n).rev().find(|&k| k <= cut).unwrap_or(0);
        let mut calls = 0;
        let found = longest_fitting_prefix(n, |k| { calls += 1; k <= cut });
        prop_assert_eq!(found, linear);
        prop_assert!(calls <= 10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn row_fit_is_the_longest_prefix(seed in 0u64..500, overhead in 0usize..2000) {
        let t = common::wide_table(&mut rng(seed), 120, 5 + (seed as usize % 10));
        for f in [Format::CommaSeparated, Format::Html, Format::DFLoader, Format::Json] {
            let budget = Budget { limit: 4097, reserve: 256 };
            let fits = |k: usize| token_estimate(&serialize(&t.head(k), f)) + overhead <= budget.available();
            let linear = (1..=t.n_rows()).take_while(|&k| fits(k)).last();
            match fit_rows_to_budget(&t, f, overhead, budget, &HeuristicCounter) {
                Ok(kept) => prop_assert_eq!(Some(kept.n_rows()), linear),
                Err(_) => prop_assert_eq!(linear, None),
            }
        }
    }
}
