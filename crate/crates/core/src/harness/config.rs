use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use super::HarnessError;
use crate::client::BackendConfig;
use crate::formats::Format;
use crate::noise::NoiseKind;
use crate::stats::{TTestVariant, DEFAULT_ALPHA};
use crate::taskgen::{PromptTemplate, TaskKind, TOKEN_LIMIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV files; each file stem names its dataset.
    pub datasets: Vec<PathBuf>,
    pub has_header: bool,
    #[serde(deserialize_with = "ids")]
    pub formats: Vec<Format>,
    #[serde(deserialize_with = "ids")]
    pub noises: Vec<NoiseKind>,
    #[serde(deserialize_with = "ids")]
    pub tasks: Vec<TaskKind>,
    pub fact_count: usize,
    pub html_fact_count: usize,
    pub transform_count: usize,
    pub fact_completions: usize,
    pub transform_completions: usize,
    pub seed: u64,
    pub backend: BackendConfig,
    pub alpha: f64,
    /// Bonferroni divisor: number of noise conditions compared to baseline.
    pub comparisons: usize,
    pub t_test: TTestVariant,
    pub token_limit: usize,
    pub workers: usize,
    pub tokens_per_minute: Option<usize>,
    pub template: String,
    /// Keep only the first rows of each dataset before anything else.
    pub max_rows: Option<usize>,
    pub output_dir: PathBuf,
    pub bold_max: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            datasets: Vec::new(),
            has_header: true,
            formats: Format::ALL.to_vec(),
            noises: NoiseKind::ALL.to_vec(),
            tasks: TaskKind::ALL.to_vec(),
            fact_count: 100,
            html_fact_count: 50,
            transform_count: 25,
            fact_completions: 15,
            transform_completions: 5,
            seed: 0,
            backend: BackendConfig::PerfectOracle,
            alpha: DEFAULT_ALPHA,
            comparisons: 8,
            t_test: TTestVariant::Student,
            token_limit: TOKEN_LIMIT,
            workers: 4,
            tokens_per_minute: None,
            template: crate::taskgen::DEFAULT_TEMPLATE.to_string(),
            max_rows: None,
            output_dir: PathBuf::from("out"),
            bold_max: false,
        }
    }
}

fn ids<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: Display,
{
    Vec::<String>::deserialize(d)?
        .iter()
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .collect()
}

impl RunConfig {
    /// Reads TOML or JSON by extension. Relative dataset paths resolve
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let bad = |e: String| HarnessError::Validation(format!("{}: {e}", path.display()));
        let mut cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?,
            _ => toml::from_str(&text).map_err(|e| bad(e.to_string()))?,
        };
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: &str| Err(HarnessError::Validation(m.to_string()));
        if self.formats.is_empty() || self.noises.is_empty() || self.tasks.is_empty() {
            return fail("formats, noises and tasks must each name at least one id");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail("alpha must lie in (0, 1)");
        }
        if self.comparisons == 0 {
            return fail("comparisons must be at least 1");
        }
        if self.workers == 0 {
            return fail("workers must be at least 1");
        }
        if self.fact_completions == 0 || self.transform_completions == 0 {
            return fail("completion counts must be positive");
        }
        PromptTemplate::builtin(&self.template).map_err(|e| HarnessError::Validation(e.to_string()))?;
        Ok(())
    }

    pub fn count_for(&self, kind: TaskKind, format: Format) -> usize {
        match (kind.is_fact(), format.is_html()) {
            (true, true) => self.html_fact_count,
            (true, false) => self.fact_count,
            (false, _) => self.transform_count,
        }
    }

    pub fn completions_for(&self, kind: TaskKind) -> usize {
        if kind.is_fact() {
            self.fact_completions
        } else {
            self.transform_completions
        }
    }

    pub fn benchmark_path(&self) -> PathBuf {
        self.output_dir.join("benchmark.jsonl")
    }

    pub fn coverage_path(&self) -> PathBuf {
        self.output_dir.join("coverage.json")
    }

    pub fn results_path(&self) -> PathBuf {
        self.output_dir.join("results.jsonl")
    }

    pub fn errors_path(&self) -> PathBuf {
        self.output_dir.join("errors.jsonl")
    }

    pub fn cache_path(&self) -> PathBuf {
        self.output_dir.join("cache.jsonl")
    }
}
