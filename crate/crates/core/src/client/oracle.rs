//! Backends that answer from the instance's own ground truth.

use rand::seq::index;
use rand::Rng;

use super::{Backend, ClientError, CompletionRequest};
use crate::formats;
use crate::scoring::normalize_answer;
use crate::seed;
use crate::taskgen::{AnswerKey, TaskInstance};

fn correct_answer(instance: &TaskInstance) -> String {
    match &instance.answer {
        AnswerKey::Accept(accept) => accept.iter().next().cloned().unwrap_or_default(),
        AnswerKey::Gold { table, format } => formats::serialize(table, *format),
    }
}

/// A fact answer outside the accept set; transformations get no table.
fn wrong_answer(instance: &TaskInstance) -> String {
    match &instance.answer {
        AnswerKey::Accept(accept) => (0..)
            .map(|i| format!("wrong answer {i}"))
            .find(|w| !accept.contains(&normalize_answer(w)))
            .expect("an unbounded candidate stream has a miss"),
        AnswerKey::Gold { .. } => String::new(),
    }
}

pub struct PerfectOracle;

impl Backend for PerfectOracle {
    fn id(&self) -> String {
        "perfect_oracle".into()
    }

    fn model(&self) -> &str {
        "perfect_oracle"
    }

    fn complete(&self, req: &CompletionRequest, instance: &TaskInstance) -> Result<Vec<String>, ClientError> {
        Ok(vec![correct_answer(instance); req.n])
    }
}

/// Which of `n` completions are corrupted for one instance. Exactly
/// `floor(rate * n)` positions, plus one more with probability equal to the
/// fractional remainder, all drawn from a stream keyed by seed and instance.
pub fn corruption_schedule(seed: u64, instance_id: &str, n: usize, rate: f64) -> Vec<bool> {
    let mut rng = seed::rng(seed::derive_seed(seed, &[instance_id]));
    let exact = rate * n as f64;
    let whole = (exact + 1e-9).floor();
    let extra = rng.random::<f64>() < (exact - whole).max(0.0);
    let wrong = (whole as usize + usize::from(extra)).min(n);
    let mut schedule = vec![false; n];
    for i in index::sample(&mut rng, n, wrong) {
        schedule[i] = true;
    }
    schedule
}

pub struct CorruptOracle {
    rate: f64,
    seed: u64,
}

impl CorruptOracle {
    pub fn new(rate: f64, seed: u64) -> Result<Self, ClientError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(ClientError::Config(format!("corruption rate {rate} outside [0, 1]")));
        }
        Ok(CorruptOracle { rate, seed })
    }
}

impl Backend for CorruptOracle {
    fn id(&self) -> String {
        format!("corrupt_oracle({})", self.rate)
    }

    fn model(&self) -> &str {
        "corrupt_oracle"
    }

    fn complete(&self, req: &CompletionRequest, instance: &TaskInstance) -> Result<Vec<String>, ClientError> {
        let (right, wrong) = (correct_answer(instance), wrong_answer(instance));
        Ok(corruption_schedule(self.seed, &instance.id, req.n, self.rate)
            .into_iter()
            .map(|bad| if bad { wrong.clone() } else { right.clone() })
            .collect())
    }
}
