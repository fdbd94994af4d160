use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunConfig};
use crate::client::{Client, ClientError, CompletionRequest};
use crate::scoring::{judge, ScoreRecord, Verdicts};
use crate::taskgen::{PromptTemplate, TaskInstance};

/// One evaluated instance, as written to the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    pub completions: Vec<String>,
    pub verdicts: Verdicts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub pass1: Option<f64>,
    pub backend: String,
    pub started_at: String,
    pub finished_at: String,
}

impl ResultRecord {
    pub fn score_record(&self) -> ScoreRecord {
        ScoreRecord {
            instance_id: self.id.clone(),
            verdicts: self.verdicts.clone(),
        }
    }

    pub fn instance_score(&self) -> f64 {
        self.score_record().instance_score()
    }
}

/// An instance that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub id: String,
    pub error: String,
    pub at: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub total: usize,
    pub already_done: usize,
    pub completed: usize,
    pub failed: usize,
}

fn now() -> String {
    humantime::format_rfc3339_millis(SystemTime::now()).to_string()
}

/// Completes and judges one instance.
pub fn evaluate(
    cfg: &RunConfig,
    template: &PromptTemplate,
    client: &Client,
    instance: &TaskInstance,
) -> Result<ResultRecord, ClientError> {
    let prompt = instance
        .prompt(template)
        .map_err(|e| ClientError::Config(e.to_string()))?;
    let req = CompletionRequest {
        prompt,
        n: cfg.completions_for(instance.kind),
        temperature: 0.0,
        max_tokens: instance.kind.reserve(),
    };
    let started_at = now();
    let completions = client.complete(&req, instance)?;
    let score = judge(instance, &completions).map_err(|e| ClientError::Config(e.to_string()))?;
    let prf = score.mean_prf();
    Ok(ResultRecord {
        id: instance.id.clone(),
        completions,
        pass1: score.pass_at_1(),
        precision: prf.map(|p| p.0),
        recall: prf.map(|p| p.1),
        f1: prf.map(|p| p.2),
        verdicts: score.verdicts,
        backend: client.backend_id(),
        started_at,
        finished_at: now(),
    })
}

/// Ids already in the results file. A torn final line from an interrupted
/// run is cut off so appends start on a clean line.
fn completed_ids(path: &Path) -> Result<HashSet<String>, HarnessError> {
    let Ok(file) = File::open(path) else {
        return Ok(HashSet::new());
    };
    let mut ids = HashSet::new();
    let mut good = Vec::new();
    let mut torn = false;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        match serde_json::from_str::<ResultRecord>(&line) {
            Ok(r) if !torn && ids.insert(r.id.clone()) => good.push(line),
            Ok(_) => {}
            Err(_) => torn = true,
        }
    }
    if torn {
        tracing::warn!("dropping unreadable tail of {}", path.display());
        let mut text = good.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(ids)
}

fn open_output(path: &Path, append: bool) -> Result<File, HarnessError> {
    let mut opts = OpenOptions::new();
    opts.create(true);
    if append {
        opts.append(true);
    } else {
        opts.write(true).truncate(true);
    }
    opts.open(path).map_err(|e| HarnessError::io(path, e))
}

/// Evaluates every instance not yet in `results_path` on a worker pool.
/// Results are written in instance order by a single writer; failures go to
/// `errors_path` and the run continues, except on configuration errors
/// which stop it.
pub fn cmd_run(
    cfg: &RunConfig,
    client: &Client,
    instances: &[TaskInstance],
    results_path: &Path,
    errors_path: &Path,
    resume: bool,
) -> Result<RunSummary, HarnessError> {
    let template = PromptTemplate::builtin(&cfg.template).map_err(|e| HarnessError::Validation(e.to_string()))?;
    let mut seen = HashSet::new();
    if let Some(dup) = instances.iter().find(|i| !seen.insert(i.id.as_str())) {
        return Err(HarnessError::Validation(format!("duplicate instance id {}", dup.id)));
    }
    let done = if resume { completed_ids(results_path)? } else { HashSet::new() };
    let pending: Vec<&TaskInstance> = instances.iter().filter(|i| !done.contains(&i.id)).collect();
    let mut summary = RunSummary {
        total: instances.len(),
        already_done: instances.len() - pending.len(),
        ..RunSummary::default()
    };
    let mut results = open_output(results_path, resume)?;
    let mut errors = open_output(errors_path, resume)?;

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut fatal: Option<String> = None;
    let (tx, rx) = mpsc::channel::<(usize, Result<ResultRecord, ClientError>)>();
    std::thread::scope(|s| -> Result<(), HarnessError> {
        for _ in 0..cfg.workers.min(pending.len().max(1)) {
            let tx = tx.clone();
            let (next, abort, pending, template) = (&next, &abort, &pending, &template);
            s.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(instance) = pending.get(i) else { break };
                let outcome = evaluate(cfg, template, client, instance);
                if matches!(outcome, Err(ClientError::Config(_))) {
                    abort.store(true, Ordering::SeqCst);
                }
                if tx.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut buffer = BTreeMap::new();
        let mut cursor = 0;
        for (i, outcome) in rx {
            buffer.insert(i, outcome);
            while let Some(outcome) = buffer.remove(&cursor) {
                let id = &pending[cursor].id;
                cursor += 1;
                match outcome {
                    Ok(record) => {
                        let line = serde_json::to_string(&record).expect("result serializes");
                        writeln!(results, "{line}").map_err(|e| HarnessError::io(results_path, e))?;
                        summary.completed += 1;
                    }
                    Err(e) => {
                        tracing::warn!(%id, "evaluation failed: {e}");
                        if let ClientError::Config(msg) = &e {
                            fatal.get_or_insert_with(|| msg.clone());
                        }
                        let record = ErrorRecord {
                            id: id.clone(),
                            error: e.to_string(),
                            at: now(),
                        };
                        let line = serde_json::to_string(&record).expect("error record serializes");
                        writeln!(errors, "{line}").map_err(|e| HarnessError::io(errors_path, e))?;
                        summary.failed += 1;
                    }
                }
            }
        }
        Ok(())
    })?;
    results.flush().map_err(|e| HarnessError::io(results_path, e))?;
    match fatal {
        Some(msg) => Err(HarnessError::Config(msg)),
        None => Ok(summary),
    }
}
