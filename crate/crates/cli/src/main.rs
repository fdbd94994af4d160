use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tablebench::client::{BackendConfig, CacheWriter, Client, ClientError, RetryPolicy};
use tablebench::formats::{parse, serialize, Format};
use tablebench::harness::{
    cmd_generate, cmd_report, cmd_run, read_jsonl, HarnessError, ReportOptions, RunConfig,
};
use tablebench::seed::rng;
use tablebench::table::Table;
use tablebench::taskgen::TaskInstance;
use tracing_subscriber::EnvFilter;

/// Structural table-understanding benchmark: generate tasks, run a model,
/// score and report.
#[derive(Parser)]
#[command(name = "tablebench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write benchmark.jsonl and coverage.json.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Complete and score every instance of benchmark.jsonl.
    Run {
        #[command(flatten)]
        common: Common,
        /// perfect_oracle | corrupt_oracle:RATE[:SEED] | replay:PATH | http:URL
        #[arg(long)]
        backend: Option<String>,
        /// Model name; required by the http backend.
        #[arg(long)]
        model: Option<String>,
        /// Environment variable holding the http backend's API key.
        #[arg(long, default_value = "OPENAI_API_KEY")]
        api_key_env: String,
        /// Skip instances already present in results.jsonl.
        #[arg(long)]
        resume: bool,
    },
    /// Render report.md and report.csv from results.jsonl.
    Report {
        #[command(flatten)]
        common: Common,
        /// Results file; defaults to results.jsonl in the output directory.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Round-trip and perfect-oracle pipeline check on built-in tables.
    Selftest {
        /// Scratch directory; defaults to a fresh temporary directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl ToString) -> Self {
        Failure { code: 1, message: message.to_string() }
    }

    fn transport(message: impl ToString) -> Self {
        Failure { code: 2, message: message.to_string() }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            // Raised mid-run when the backend rejects credentials.
            HarnessError::Config(_) => Failure::transport(e),
            _ => Failure::validation(e),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        if e.is_transport() {
            Failure::transport(e)
        } else {
            Failure::validation(e)
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn backend_from_flag(flag: &str, model: Option<&str>, api_key_env: &str, seed: u64) -> Result<BackendConfig, Failure> {
    let (kind, arg) = flag.split_once(':').unwrap_or((flag, ""));
    let bad = || Failure::validation(format!("unrecognized backend {flag:?}"));
    Ok(match kind {
        "perfect_oracle" if arg.is_empty() => BackendConfig::PerfectOracle,
        "corrupt_oracle" => {
            let (rate, seed) = match arg.split_once(':') {
                Some((r, s)) => (r, s.parse().map_err(|_| bad())?),
                None => (arg, seed),
            };
            BackendConfig::CorruptOracle { rate: rate.parse().map_err(|_| bad())?, seed }
        }
        "replay" if !arg.is_empty() => BackendConfig::Replay { path: arg.into(), model: None },
        "http" if !arg.is_empty() => BackendConfig::Http {
            url: arg.to_string(),
            model: model.ok_or_else(|| Failure::validation("the http backend needs --model"))?.to_string(),
            api_key_env: Some(api_key_env.to_string()),
            retry: RetryPolicy::default(),
        },
        _ => return Err(bad()),
    })
}

fn generate(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    if cfg.datasets.is_empty() {
        return Err(Failure::validation("the config names no datasets"));
    }
    let coverage = cmd_generate(&cfg)?;
    eprintln!(
        "wrote {} instances to {} ({} skipped, {} short)",
        coverage.instances,
        cfg.benchmark_path().display(),
        coverage.skipped.len(),
        coverage.short.len()
    );
    Ok(())
}

fn run(common: &Common, backend: Option<&str>, model: Option<&str>, key_env: &str, resume: bool) -> Result<(), Failure> {
    let mut cfg = load_config(common)?;
    if let Some(flag) = backend {
        cfg.backend = backend_from_flag(flag, model, key_env, cfg.seed)?;
    }
    let bench = cfg.benchmark_path();
    if !bench.exists() {
        return Err(Failure::validation(format!("{} not found; run `generate` first", bench.display())));
    }
    let instances: Vec<TaskInstance> = read_jsonl(&bench)?;
    let mut client = Client::new(cfg.backend.build()?).with_in_flight(cfg.workers);
    if !matches!(cfg.backend, BackendConfig::Replay { .. }) {
        client = client.with_cache(CacheWriter::open(&cfg.cache_path())?);
    }
    if let Some(tpm) = cfg.tokens_per_minute {
        client = client.with_tokens_per_minute(tpm);
    }
    let summary = cmd_run(&cfg, &client, &instances, &cfg.results_path(), &cfg.errors_path(), resume)?;
    eprintln!(
        "{}: {} instances, {} already done, {} completed, {} failed",
        client.backend_id(),
        summary.total,
        summary.already_done,
        summary.completed,
        summary.failed
    );
    if summary.failed > 0 {
        return Err(Failure::transport(format!(
            "{} instances failed; see {}",
            summary.failed,
            cfg.errors_path().display()
        )));
    }
    Ok(())
}

fn report(common: &Common, results: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let results = results.map(Path::to_path_buf).unwrap_or_else(|| cfg.results_path());
    let coverage = cfg.coverage_path();
    let report = cmd_report(&results, Some(&coverage), &cfg.output_dir, &ReportOptions::from_config(&cfg))?;
    for w in &report.warnings {
        tracing::warn!("{w}");
    }
    print!("{}", report.markdown);
    Ok(())
}

const FIXTURES: [(&str, &str); 2] = [
    ("employees.csv", include_str!("../../core/fixtures/employees.csv")),
    ("weather.csv", include_str!("../../core/fixtures/weather.csv")),
];

fn selftest(out: Option<&Path>) -> Result<(), Failure> {
    let scratch;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => {
            scratch = tempfile::tempdir().map_err(Failure::validation)?;
            scratch.path().to_path_buf()
        }
    };
    let io = |p: &Path, e: std::io::Error| Failure::validation(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;

    let mut failures = 0;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failures += usize::from(!ok);
    };

    let mut r = rng(0);
    let mut bad = Vec::new();
    for i in 0..100 {
        let t = random_table(&mut r, i);
        for f in Format::ALL {
            if parse(&serialize(&t, f), f).ok().as_ref() != Some(&t) {
                bad.push(format!("table {i} in {f}"));
            }
        }
    }
    check("round trip", bad.is_empty(), format!("{} of 800 failed {:?}", bad.len(), bad.first()));

    let mut datasets = Vec::new();
    for (name, text) in FIXTURES {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| io(&p, e))?;
        datasets.push(p);
    }
    let cfg = RunConfig {
        datasets,
        fact_count: 10,
        html_fact_count: 5,
        transform_count: 3,
        fact_completions: 2,
        transform_completions: 1,
        output_dir: dir.join("out"),
        ..RunConfig::default()
    };
    let coverage = cmd_generate(&cfg)?;
    let instances: Vec<TaskInstance> = read_jsonl(&cfg.benchmark_path())?;
    let client = Client::new(BackendConfig::PerfectOracle.build()?);
    let summary = cmd_run(&cfg, &client, &instances, &cfg.results_path(), &cfg.errors_path(), false)?;
    check(
        "perfect oracle run",
        summary.failed == 0 && summary.completed == coverage.instances,
        format!("{} of {} instances scored", summary.completed, coverage.instances),
    );
    let report = cmd_report(&cfg.results_path(), Some(&cfg.coverage_path()), &cfg.output_dir, &ReportOptions::default())?;
    let cells: Vec<&str> = report.csv.lines().skip(1).filter(|l| l.starts_with("pass1,") || l.starts_with("f1,")).collect();
    let imperfect = cells.iter().filter(|l| l.split(',').nth(4) != Some("100.00")).count();
    check(
        "perfect oracle report",
        !cells.is_empty() && imperfect == 0,
        format!("{imperfect} of {} cells below 100.00", cells.len()),
    );

    if failures > 0 {
        return Err(Failure::validation(format!("{failures} selftest checks failed")));
    }
    Ok(())
}

fn random_table(r: &mut impl rand::Rng, i: usize) -> Table {
    let rows = r.random_range(1..8);
    let cols = r.random_range(1..6);
    let pool = ["1", "-2.5", "x", "a,b", "say \"hi\"", "", "NA", "True", "2021-03-04", "<td>", "| pipe", "line\nbreak"];
    let names = (0..cols).map(|j| format!("c{i}_{j}")).collect();
    let data = (0..rows)
        .map(|_| (0..cols).map(|_| pool[r.random_range(0..pool.len())].to_string()).collect())
        .collect();
    Table::with_default_labels(names, data).expect("rectangular")
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate { common } => generate(common),
        Command::Run { common, backend, model, api_key_env, resume } => {
            run(common, backend.as_deref(), model.as_deref(), api_key_env, *resume)
        }
        Command::Report { common, results } => report(common, results.as_deref()),
        Command::Selftest { out } => selftest(out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
