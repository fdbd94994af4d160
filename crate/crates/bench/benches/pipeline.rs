use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tablebench::formats::{parse, serialize, Format, HeuristicCounter};
use tablebench::noise::{apply_noise, NoiseKind, NoiseOp};
use tablebench::scoring::table_cell_score;
use tablebench::taskgen::{fit_rows_to_budget, Budget};
use tablebench_bench::sample_table;

fn formats(c: &mut Criterion) {
    let t = sample_table(200, 10, 1);
    let mut g = c.benchmark_group("serialize");
    for f in Format::ALL {
        g.bench_with_input(BenchmarkId::from_parameter(f), &f, |b, &f| b.iter(|| serialize(black_box(&t), f)));
    }
    g.finish();

    let mut g = c.benchmark_group("parse");
    for f in Format::ALL {
        let text = serialize(&t, f);
        g.bench_with_input(BenchmarkId::from_parameter(f), &text, |b, text| b.iter(|| parse(black_box(text), f).unwrap()));
    }
    g.finish();
}

fn noise(c: &mut Criterion) {
    let t = sample_table(200, 10, 2);
    let mut g = c.benchmark_group("noise");
    for kind in NoiseKind::ALL {
        g.bench_with_input(BenchmarkId::from_parameter(kind), &kind, |b, &kind| {
            b.iter(|| apply_noise(NoiseOp::new(kind, 7), black_box(&t)).unwrap())
        });
    }
    g.finish();
}

fn scoring(c: &mut Criterion) {
    let gold = sample_table(100, 10, 3);
    let pred = apply_noise(NoiseOp::new(NoiseKind::ShuffleRows, 1), &gold).unwrap();
    c.bench_function("table_cell_score 100x10", |b| b.iter(|| table_cell_score(black_box(&pred), &gold)));
}

fn budget(c: &mut Criterion) {
    let t = sample_table(2000, 8, 4);
    let budget = Budget { limit: 4097, reserve: 256 };
    let mut g = c.benchmark_group("fit_rows_to_budget");
    for f in [Format::CommaSeparated, Format::Html] {
        g.bench_with_input(BenchmarkId::from_parameter(f), &f, |b, &f| {
            b.iter(|| fit_rows_to_budget(black_box(&t), f, 200, budget, &HeuristicCounter).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, formats, noise, scoring, budget);
criterion_main!(benches);
