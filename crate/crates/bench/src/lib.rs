//! Inputs shared by the criterion benches.

use rand::Rng;
use tablebench::seed::rng;
use tablebench::table::Table;

/// A mixed-type table: integer id, float, boolean, date and free text.
pub fn sample_table(rows: usize, cols: usize, seed: u64) -> Table {
    let mut r = rng(seed);
    let names = (0..cols).map(|j| format!("col {j}")).collect();
    let data = (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| match j % 5 {
                    0 => i.to_string(),
                    1 => format!("{:.2}", r.random_range(-1000.0..1000.0)),
                    2 => if r.random_bool(0.5) { "True" } else { "False" }.to_string(),
                    3 => format!("2023-{:02}-{:02}", r.random_range(1..=12), r.random_range(1..=28)),
                    _ => format!("item, \"{}\"", r.random_range(0..10_000)),
                })
                .collect()
        })
        .collect();
    Table::with_default_labels(names, data).expect("rectangular")
}
