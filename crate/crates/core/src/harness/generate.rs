use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_jsonl, HarnessError, RunConfig};
use crate::formats::{Format, HeuristicCounter};
use crate::noise::{NoiseKind, NoiseOp};
use crate::seed::derive_seed;
use crate::table::{drop_null_rows, load_csv, Table};
use crate::taskgen::{generate, GenContext, PromptTemplate, TaskInstance, TaskKind};

/// A benchmark cell that was skipped or came up short.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipNote {
    pub dataset: String,
    pub noise: NoiseKind,
    pub format: Option<Format>,
    pub task: Option<TaskKind>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub instances: usize,
    pub skipped: Vec<SkipNote>,
    pub short: Vec<SkipNote>,
}

/// Loads each CSV, drops all-null rows and applies `max_rows`.
pub fn load_datasets(cfg: &RunConfig) -> Result<Vec<(String, Table)>, HarnessError> {
    if cfg.datasets.is_empty() {
        return Err(HarnessError::Validation("no datasets configured".into()));
    }
    let mut names = BTreeSet::new();
    let mut out = Vec::new();
    for path in &cfg.datasets {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| HarnessError::Validation(format!("bad dataset path {}", path.display())))?
            .to_string();
        if !names.insert(name.clone()) {
            return Err(HarnessError::Validation(format!("two datasets named {name:?}")));
        }
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        let table = load_csv(&bytes, cfg.has_header)
            .map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))?;
        let mut table = drop_null_rows(&table);
        if let Some(n) = cfg.max_rows {
            table = table.head(n);
        }
        if table.n_rows() == 0 {
            return Err(HarnessError::Validation(format!("{}: no rows left after dropping nulls", path.display())));
        }
        out.push((name, table));
    }
    Ok(out)
}

/// Every (dataset, noise, format, task) batch, in that nesting order.
pub fn generate_instances(
    cfg: &RunConfig,
    datasets: &[(String, Table)],
) -> Result<(Vec<TaskInstance>, Coverage), HarnessError> {
    let template = PromptTemplate::builtin(&cfg.template).map_err(|e| HarnessError::Validation(e.to_string()))?;
    let mut instances = Vec::new();
    let mut coverage = Coverage::default();
    for (name, table) in datasets {
        let ctx = GenContext {
            dataset: name,
            template: &template,
            counter: &HeuristicCounter,
            token_limit: cfg.token_limit,
        };
        for &noise in &cfg.noises {
            let op = NoiseOp::new(noise, derive_seed(cfg.seed, &[name, "noise", noise.id()]));
            let noisy = match op.apply(table) {
                Ok(t) => t,
                Err(e) => {
                    tracing::warn!(dataset = %name, %noise, "skipping: {e}");
                    coverage.skipped.push(SkipNote {
                        dataset: name.clone(),
                        noise,
                        format: None,
                        task: None,
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            for &format in &cfg.formats {
                for &kind in &cfg.tasks {
                    let count = cfg.count_for(kind, format);
                    let seed = derive_seed(cfg.seed, &[name, noise.id(), kind.id()]);
                    let note = |reason: String| SkipNote {
                        dataset: name.clone(),
                        noise,
                        format: Some(format),
                        task: Some(kind),
                        reason,
                    };
                    match generate(kind, &noisy, format, noise, count, seed, &ctx) {
                        Ok(batch) => {
                            if batch.is_short() {
                                coverage.short.push(note(format!(
                                    "{} of {} instances",
                                    batch.instances.len(),
                                    batch.requested
                                )));
                            }
                            instances.extend(batch.instances);
                        }
                        Err(e) => {
                            tracing::warn!(dataset = %name, %noise, %format, task = %kind, "skipping: {e}");
                            coverage.skipped.push(note(e.to_string()));
                        }
                    }
                }
            }
        }
    }
    coverage.instances = instances.len();
    Ok((instances, coverage))
}

/// Writes the benchmark JSONL and its coverage sidecar into the output directory.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Coverage, HarnessError> {
    let datasets = load_datasets(cfg)?;
    let (instances, coverage) = generate_instances(cfg, &datasets)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_jsonl(&cfg.benchmark_path(), &instances)?;
    write_coverage(&cfg.coverage_path(), &coverage)?;
    Ok(coverage)
}

fn write_coverage(path: &Path, coverage: &Coverage) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(coverage).expect("coverage serializes");
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}
