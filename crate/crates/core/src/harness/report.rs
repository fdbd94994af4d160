//! Absolute and delta tables over pooled per-instance scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{read_jsonl, Coverage, HarnessError, ResultRecord, RunConfig};
use crate::formats::Format;
use crate::noise::NoiseKind;
use crate::stats::{bonferroni_threshold, delta_table, mean, TTestVariant};
use crate::taskgen::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub alpha: f64,
    pub comparisons: usize,
    pub variant: TTestVariant,
    pub bold_max: bool,
}

impl ReportOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        ReportOptions {
            alpha: cfg.alpha,
            comparisons: cfg.comparisons,
            variant: cfg.t_test,
            bold_max: cfg.bold_max,
        }
    }
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions::from_config(&RunConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub markdown: String,
    pub csv: String,
    pub warnings: Vec<String>,
}

/// Splits `{dataset}/{format}/{noise}/{task}/{index}`; the dataset part may
/// itself contain slashes.
pub fn parse_instance_id(id: &str) -> Option<(String, Format, NoiseKind, TaskKind)> {
    let mut parts = id.rsplitn(5, '/');
    let _index: usize = parts.next()?.parse().ok()?;
    let kind = parts.next()?.parse().ok()?;
    let noise = parts.next()?.parse().ok()?;
    let format = parts.next()?.parse().ok()?;
    let dataset = parts.next()?.to_string();
    Some((dataset, format, noise, kind))
}

type Cell = (Format, NoiseKind, TaskKind);

struct Family {
    title: &'static str,
    delta_title: &'static str,
    metric: &'static str,
    tasks: &'static [TaskKind],
}

const FAMILIES: [Family; 2] = [
    Family {
        title: "Fact-finding pass@1 (%)",
        delta_title: "Fact-finding pass@1 delta from OriginalData (points)",
        metric: "pass1",
        tasks: &TaskKind::FACT,
    },
    Family {
        title: "Transformation F1 (%)",
        delta_title: "Transformation F1 delta from OriginalData (points)",
        metric: "f1",
        tasks: &TaskKind::TRANSFORM,
    },
];

fn fmt2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn fmt_delta(x: f64) -> String {
    let s = fmt2(x);
    if s == "0.00" || s.starts_with('-') {
        s
    } else {
        format!("+{s}")
    }
}

fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| {
            rows.iter()
                .map(|r| r[j].chars().count())
                .chain([header[j].chars().count(), 3])
                .max()
                .unwrap_or(3)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (c, &w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let rule: Vec<String> = widths
        .iter()
        .enumerate()
        .map(|(j, &w)| if j == 0 { "-".repeat(w + 2) } else { format!("{}:", "-".repeat(w + 1)) })
        .collect();
    let mut out = line(header);
    out.push_str(&format!("|{}|\n", rule.join("|")));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

struct CsvOut(csv::Writer<Vec<u8>>);

impl CsvOut {
    fn new() -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["table", "format", "noise", "task", "value", "n", "p_value", "significant"])
            .expect("in-memory write");
        CsvOut(w)
    }

    #[allow(clippy::too_many_arguments)]
    fn row(&mut self, table: &str, f: Format, noise: NoiseKind, task: &str, value: f64, n: usize, p: Option<f64>, sig: Option<bool>) {
        let p = p.map(|p| format!("{p:.6}")).unwrap_or_default();
        let sig = sig.map(|s| s.to_string()).unwrap_or_default();
        self.0
            .write_record([table, f.id(), noise.id(), task, &fmt2(value), &n.to_string(), &p, &sig])
            .expect("in-memory write");
    }

    fn finish(self) -> String {
        String::from_utf8(self.0.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Renders absolute tables for every noise condition present and delta
/// tables for every noise against OriginalData.
pub fn build_report(
    results: &[ResultRecord],
    coverage: Option<&Coverage>,
    opts: &ReportOptions,
) -> Result<Report, HarnessError> {
    let threshold =
        bonferroni_threshold(opts.alpha, opts.comparisons).map_err(|e| HarnessError::Validation(e.to_string()))?;
    let mut scores: BTreeMap<Cell, Vec<f64>> = BTreeMap::new();
    let mut datasets: BTreeMap<NoiseKind, BTreeSet<String>> = BTreeMap::new();
    for r in results {
        let (dataset, f, noise, kind) = parse_instance_id(&r.id)
            .ok_or_else(|| HarnessError::Validation(format!("unrecognized instance id {:?}", r.id)))?;
        scores.entry((f, noise, kind)).or_default().push(r.instance_score());
        datasets.entry(noise).or_default().insert(dataset);
    }
    let formats: BTreeSet<Format> = scores.keys().map(|c| c.0).collect();
    let noises: BTreeSet<NoiseKind> = scores.keys().map(|c| c.1).collect();

    let mut md = String::from("# Benchmark report\n");
    let mut csv = CsvOut::new();
    let mut warnings = Vec::new();

    for fam in &FAMILIES {
        let tasks: Vec<TaskKind> = fam
            .tasks
            .iter()
            .copied()
            .filter(|k| scores.keys().any(|c| c.2 == *k))
            .collect();
        if tasks.is_empty() {
            continue;
        }
        let mut header = vec!["Format".to_string()];
        header.extend(tasks.iter().map(|k| k.report_name()));
        header.push("Overall".into());

        let _ = write!(md, "\n## {}\n", fam.title);
        for &noise in &noises {
            let mut values: Vec<Vec<Option<f64>>> = Vec::new();
            for &f in &formats {
                let mut row: Vec<Option<f64>> = tasks
                    .iter()
                    .map(|&k| scores.get(&(f, noise, k)).map(|v| 100.0 * mean(v)))
                    .collect();
                let present: Vec<f64> = row.iter().flatten().copied().collect();
                row.push((!present.is_empty()).then(|| mean(&present)));
                for (j, v) in row.iter().enumerate() {
                    if let Some(v) = v {
                        let (task, n) = match tasks.get(j) {
                            Some(k) => (k.report_name(), scores[&(f, noise, *k)].len()),
                            None => ("Overall".to_string(), 0),
                        };
                        csv.row(fam.metric, f, noise, &task, *v, n, None, None);
                    }
                }
                values.push(row);
            }
            let col_max: Vec<Option<f64>> = (0..=tasks.len())
                .map(|j| values.iter().filter_map(|r| r[j]).reduce(f64::max))
                .collect();
            let rows: Vec<Vec<String>> = formats
                .iter()
                .zip(&values)
                .map(|(f, row)| {
                    let mut cells = vec![f.id().to_string()];
                    cells.extend(row.iter().zip(&col_max).map(|(v, m)| match v {
                        Some(v) if opts.bold_max && fmt2(*v) == fmt2(m.unwrap_or(f64::NAN)) => {
                            format!("**{}**", fmt2(*v))
                        }
                        Some(v) => fmt2(*v),
                        None => "n/a".into(),
                    }));
                    cells
                })
                .collect();
            let _ = write!(md, "\n### {noise}\n\n{}", markdown_table(&header, &rows));
        }

        if !noises.contains(&NoiseKind::OriginalData) {
            let w = format!("{}: no OriginalData results, delta table omitted", fam.delta_title);
            tracing::warn!("{w}");
            warnings.push(w);
            continue;
        }
        let treated: Vec<NoiseKind> = noises.iter().copied().filter(|n| *n != NoiseKind::OriginalData).collect();
        if treated.is_empty() {
            continue;
        }
        let mut header = vec!["Format".to_string(), "Noise".to_string()];
        header.extend(tasks.iter().map(|k| k.report_name()));
        let mut rows = Vec::new();
        for &f in &formats {
            for &noise in &treated {
                let mut base = BTreeMap::new();
                let mut noisy = BTreeMap::new();
                for &k in &tasks {
                    match (scores.get(&(f, NoiseKind::OriginalData, k)), scores.get(&(f, noise, k))) {
                        (Some(b), Some(n)) => {
                            base.insert(k, b.clone());
                            noisy.insert(k, n.clone());
                        }
                        (None, Some(_)) => {
                            let w = format!("{f}/{noise}/{k}: no OriginalData baseline, delta omitted");
                            tracing::warn!("{w}");
                            warnings.push(w);
                        }
                        _ => {}
                    }
                }
                if base.is_empty() {
                    continue;
                }
                let deltas = delta_table(&base, &noisy, opts.variant, opts.alpha, opts.comparisons)
                    .map_err(|e| HarnessError::Validation(e.to_string()))?;
                let mut cells = vec![f.id().to_string(), noise.id().to_string()];
                for k in &tasks {
                    match deltas.get(k) {
                        Some(d) => {
                            let mark = if d.comparison.significant { "**" } else { "" };
                            cells.push(format!("{}{mark}", fmt_delta(d.delta)));
                            csv.row(
                                &format!("{}_delta", fam.metric),
                                f,
                                noise,
                                &k.report_name(),
                                d.delta,
                                noisy[k].len(),
                                d.comparison.p_value,
                                Some(d.comparison.significant),
                            );
                        }
                        None => cells.push("n/a".into()),
                    }
                }
                rows.push(cells);
            }
        }
        if !rows.is_empty() {
            let _ = write!(md, "\n## {}\n\n{}", fam.delta_title, markdown_table(&header, &rows));
            let test = match opts.variant {
                TTestVariant::Student => "Student",
                TTestVariant::Welch => "Welch",
            };
            let _ = writeln!(
                md,
                "\n`**` marks p < {} ({test} t-test, alpha {} / m {}).",
                threshold, opts.alpha, opts.comparisons
            );
        }
    }

    md.push_str("\n## Coverage\n\n");
    for (noise, names) in &datasets {
        let n: usize = scores.iter().filter(|(c, _)| c.1 == *noise).map(|(_, v)| v.len()).sum();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let _ = writeln!(md, "- {noise}: {n} instances over {}", names.join(", "));
    }
    if let Some(cov) = coverage {
        for note in &cov.skipped {
            let _ = writeln!(md, "- skipped {}: {}", note_cell(note), note.reason);
        }
        for note in &cov.short {
            let _ = writeln!(md, "- short {}: {}", note_cell(note), note.reason);
        }
    }
    if md.contains("n/a") {
        md.push_str("- n/a: no results for that cell\n");
    }

    Ok(Report {
        markdown: md,
        csv: csv.finish(),
        warnings,
    })
}

fn note_cell(note: &super::SkipNote) -> String {
    let mut parts = vec![note.dataset.clone(), note.noise.id().to_string()];
    parts.extend(note.format.map(|f| f.id().to_string()));
    parts.extend(note.task.map(|k| k.id().to_string()));
    parts.join("/")
}

/// Reads results (and the coverage sidecar, if present), writes
/// `report.md` and `report.csv` into `out_dir`.
pub fn cmd_report(
    results_path: &Path,
    coverage_path: Option<&Path>,
    out_dir: &Path,
    opts: &ReportOptions,
) -> Result<Report, HarnessError> {
    let results: Vec<ResultRecord> = read_jsonl(results_path)?;
    let coverage = match coverage_path.filter(|p| p.exists()) {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            Some(serde_json::from_str::<Coverage>(&text).map_err(|e| HarnessError::Validation(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let report = build_report(&results, coverage.as_ref(), opts)?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let md_path = out_dir.join("report.md");
    std::fs::write(&md_path, &report.markdown).map_err(|e| HarnessError::io(&md_path, e))?;
    let csv_path = out_dir.join("report.csv");
    std::fs::write(&csv_path, &report.csv).map_err(|e| HarnessError::io(&csv_path, e))?;
    Ok(report)
}
