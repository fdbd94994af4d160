//! Two-sample t-tests with Bonferroni correction and baseline-vs-noisy deltas.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("each sample needs at least 2 observations (got {a} and {b})")]
    TooFewSamples { a: usize, b: usize },
    #[error("samples have zero variance")]
    DegenerateVariance,
    #[error("comparison count must be at least 1")]
    NoComparisons,
    #[error("cell {0} is missing from one side of the comparison")]
    MismatchedCells(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    /// Pooled variance (equal-variance assumption).
    #[default]
    Student,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t_stat: f64,
    pub p_value: f64,
    pub dof: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Two-sided independent two-sample t-test.
pub fn t_test(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewSamples {
            a: a.len(),
            b: b.len(),
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (se, dof) = match variant {
        TTestVariant::Student => {
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), na + nb - 2.0)
        }
        TTestVariant::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let dof = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            ((qa + qb).sqrt(), dof)
        }
    };
    if se <= 0.0 || !se.is_finite() {
        return Err(StatsError::DegenerateVariance);
    }
    let t_stat = (ma - mb) / se;
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|_| StatsError::DegenerateVariance)?;
    let p_value = (2.0 * dist.cdf(-t_stat.abs())).clamp(0.0, 1.0);
    Ok(TTest {
        t_stat,
        p_value,
        dof,
    })
}

pub fn bonferroni_threshold(alpha: f64, m: usize) -> Result<f64, StatsError> {
    if m < 1 {
        return Err(StatsError::NoComparisons);
    }
    Ok(alpha / m as f64)
}

/// One baseline-vs-treatment comparison after correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub m: usize,
    pub alpha: f64,
    pub significant: bool,
}

impl Comparison {
    /// Degenerate samples yield no p-value and are never significant.
    pub fn run(a: &[f64], b: &[f64], variant: TTestVariant, alpha: f64, m: usize) -> Result<Self, StatsError> {
        let threshold = bonferroni_threshold(alpha, m)?;
        let test = t_test(a, b, variant).ok();
        Ok(Comparison {
            t_stat: test.map(|t| t.t_stat),
            p_value: test.map(|t| t.p_value),
            m,
            alpha,
            significant: test.is_some_and(|t| t.p_value < threshold),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaCell {
    /// Treatment minus baseline mean, in percentage points.
    pub delta: f64,
    pub comparison: Comparison,
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Per-cell deltas between per-instance score vectors keyed alike.
pub fn delta_table<K: Ord + Clone + std::fmt::Debug>(
    baseline: &BTreeMap<K, Vec<f64>>,
    noisy: &BTreeMap<K, Vec<f64>>,
    variant: TTestVariant,
    alpha: f64,
    m: usize,
) -> Result<BTreeMap<K, DeltaCell>, StatsError> {
    if let Some(k) = baseline
        .keys()
        .find(|k| !noisy.contains_key(*k))
        .or_else(|| noisy.keys().find(|k| !baseline.contains_key(*k)))
    {
        return Err(StatsError::MismatchedCells(format!("{k:?}")));
    }
    baseline
        .iter()
        .map(|(k, base)| {
            let treat = &noisy[k];
            let delta = 100.0 * (mean(treat) - mean(base));
            let comparison = Comparison::run(base, treat, variant, alpha, m)?;
            Ok((k.clone(), DeltaCell { delta, comparison }))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 4.0];
        let r = t_test(&a, &a, TTestVariant::Student).unwrap();
        assert_eq!(r.t_stat, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn degenerate_variance() {
        let z = [0.0; 10];
        assert_eq!(
            t_test(&z, &z, TTestVariant::Student),
            Err(StatsError::DegenerateVariance)
        );
        assert!(matches!(
            t_test(&[1.0], &z, TTestVariant::Welch),
            Err(StatsError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn bonferroni_values() {
        assert_eq!(bonferroni_threshold(0.01, 8).unwrap(), 0.00125);
        assert!((bonferroni_threshold(0.01, 7).unwrap() - 0.001_428_571_428_571_428_5).abs() < 1e-15);
        assert_eq!(bonferroni_threshold(0.05, 1).unwrap(), 0.05);
        assert_eq!(bonferroni_threshold(0.05, 0), Err(StatsError::NoComparisons));
    }

    #[test]
    fn antisymmetric_t() {
        let a = [0.1, 0.5, 0.9, 0.4];
        let b = [0.3, 0.8, 0.9, 1.0, 0.7];
        for v in [TTestVariant::Student, TTestVariant::Welch] {
            let ab = t_test(&a, &b, v).unwrap();
            let ba = t_test(&b, &a, v).unwrap();
            assert!((ab.t_stat + ba.t_stat).abs() < 1e-12);
            assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn p_decreases_with_shift() {
        let base = [0.0, 1.0, 2.0, 3.0, 4.0];
        let mut last = 1.1;
        for step in 0..10 {
            let shifted: Vec<f64> = base.iter().map(|v| v + step as f64 * 0.5).collect();
            let p = t_test(&base, &shifted, TTestVariant::Student).unwrap().p_value;
            assert!(p < last || (step == 0 && p == 1.0));
            last = p;
        }
    }

    #[test]
    fn delta_examples() {
        let mut base = BTreeMap::new();
        base.insert("nav", vec![0.7143]);
        let mut noisy = BTreeMap::new();
        noisy.insert("nav", vec![0.9229]);
        let d = delta_table(&base, &noisy, TTestVariant::Student, DEFAULT_ALPHA, 8).unwrap();
        assert!((d["nav"].delta - 20.86).abs() < 1e-9);
        assert!(!d["nav"].comparison.significant);

        base.insert("dt", vec![0.9643]);
        noisy.insert("dt", vec![0.84]);
        let d = delta_table(&base, &noisy, TTestVariant::Student, DEFAULT_ALPHA, 8).unwrap();
        assert!((d["dt"].delta + 12.43).abs() < 1e-9);

        let same = delta_table(&base, &base, TTestVariant::Student, DEFAULT_ALPHA, 8).unwrap();
        assert!(same.values().all(|c| c.delta == 0.0 && !c.comparison.significant));

        noisy.remove("dt");
        assert!(matches!(
            delta_table(&base, &noisy, TTestVariant::Student, DEFAULT_ALPHA, 8),
            Err(StatsError::MismatchedCells(_))
        ));
    }
}
