use std::collections::HashSet;
use std::fmt::Write as _;
use std::thread;

use super::generate::{
    corrupt, diagnostic_accuracy, error_split, generate_cases, generate_rulebase, CorruptOptions, Corruption,
    SyntheticSpec,
};
use super::stats::{paired_t_test, TTestResult};
use super::HarnessError;
use crate::diagnosis::OutcomeCode;
use crate::dsl::CaseInstance;
use crate::network::NetworkConfig;
use crate::revision::{refine, Applied, Preference, RefineConfig};
use crate::rulebase::RuleBase;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub spec: SyntheticSpec,
    pub n_experiments: usize,
    pub refine: RefineConfig,
    /// Attempts per experiment when searching for an observable corruption.
    pub corrupt_attempts: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            spec: SyntheticSpec::default(),
            n_experiments: 10,
            refine: RefineConfig { prefer: Some(Preference::KnowledgeBase), ..RefineConfig::default() },
            corrupt_attempts: 2000,
        }
    }
}

impl SuiteConfig {
    fn network(&self) -> NetworkConfig {
        NetworkConfig { data_error_mode: false, combine: self.refine.combine, threshold: self.refine.revision.k }
    }

    fn experiment_seed(&self, i: usize) -> u64 {
        self.spec.seed.wrapping_add((i as u64).wrapping_mul(GOLDEN))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    /// 1-based.
    pub experiment: usize,
    pub bad_before: usize,
    pub bad_after: usize,
    pub acc_before: f64,
    pub acc_after: f64,
    pub improvement: f64,
    /// Original rules removed by the refinement.
    pub correct_deleted: usize,
    pub outcome: OutcomeCode,
    pub applied: Applied,
    /// Cases used for training; the others were the reference set.
    pub n_training: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub rows: Vec<ExperimentRow>,
    pub original_rules: usize,
    /// Original rules kept, summed over experiments.
    pub retained_rules: usize,
    /// Bad rules before vs after; `None` when fewer than two rows or degenerate.
    pub t_bad: Option<TTestResult>,
    /// Accuracy after vs before.
    pub t_accuracy: Option<TTestResult>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn t_line(out: &mut String, name: &str, t: &Option<TTestResult>) {
    match t {
        Some(r) => {
            let levels: Vec<String> = r.significant_at.iter().map(|a| a.to_string()).collect();
            let levels = if levels.is_empty() { "none".to_string() } else { levels.join(",") };
            writeln!(out, "{name}\t{:.2}\tdf={}\tsignificant_at={levels}", r.t, r.df).unwrap();
        }
        None => writeln!(out, "{name}\tundefined").unwrap(),
    }
}

impl SuiteResult {
    pub fn mean_bad_before(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.bad_before as f64))
    }

    pub fn mean_bad_after(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.bad_after as f64))
    }

    pub fn rows_not_worse(&self) -> usize {
        self.rows.iter().filter(|r| r.acc_after >= r.acc_before).count()
    }

    /// Fraction of original rules kept across all experiments.
    pub fn retention(&self) -> f64 {
        let total = self.original_rules * self.rows.len();
        if total == 0 {
            1.0
        } else {
            self.retained_rules as f64 / total as f64
        }
    }

    /// Tab-separated table with an Average row and both t statistics.
    pub fn table(&self) -> String {
        let mut out = String::from("experiment\tbad_before\tbad_after\tacc_before\tacc_after\timprovement\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.1}\t{:.1}\t{:.1}",
                r.experiment, r.bad_before, r.bad_after, r.acc_before, r.acc_after, r.improvement
            )
            .unwrap();
        }
        if !self.rows.is_empty() {
            writeln!(
                out,
                "Average\t{:.1}\t{:.1}\t{:.1}\t{:.1}\t{:.1}",
                self.mean_bad_before(),
                self.mean_bad_after(),
                mean(self.rows.iter().map(|r| r.acc_before)),
                mean(self.rows.iter().map(|r| r.acc_after)),
                mean(self.rows.iter().map(|r| r.improvement)),
            )
            .unwrap();
        }
        t_line(&mut out, "t_bad_rules", &self.t_bad);
        t_line(&mut out, "t_accuracy", &self.t_accuracy);
        out
    }
}

struct Prepared {
    index: usize,
    corruption: Corruption,
    acc_before: f64,
    training: Vec<CaseInstance>,
    reference: Vec<CaseInstance>,
}

fn run_one(
    p: &Prepared,
    original: &RuleBase,
    cases: &[CaseInstance],
    cfg: &SuiteConfig,
) -> Result<ExperimentRow, HarnessError> {
    let refined = refine(&p.corruption.rulebase, &p.training, &p.reference, &cfg.refine)?;
    let rb = &refined.rulebase;
    let bad_after = p.corruption.bad_rules.iter().filter(|id| rb.rule(id).is_some()).count();
    let correct_deleted = original.rules().iter().filter(|r| rb.rule(&r.id).is_none()).count();
    let acc_after = diagnostic_accuracy(rb, cases, cfg.network())?;
    Ok(ExperimentRow {
        experiment: p.index,
        bad_before: p.corruption.bad_rules.len(),
        bad_after,
        acc_before: p.acc_before,
        acc_after,
        improvement: acc_after - p.acc_before,
        correct_deleted,
        outcome: refined.diagnosis.outcome.code,
        applied: refined.applied,
        n_training: p.training.len(),
    })
}

/// Experiment `i` (1-based) injects `i` bad rules into the same generated
/// base; no bad rule is shared between experiments. Corruption runs in
/// order, refinement runs in parallel.
pub fn run_experiment_suite(cfg: &SuiteConfig) -> Result<SuiteResult, HarnessError> {
    let original = generate_rulebase(&cfg.spec)?;
    let cases = generate_cases(&original, cfg.spec.n_cases, cfg.experiment_seed(0))?;
    let eps = cfg.refine.train.eps_train;
    let wrap = |experiment: usize| move |e: HarnessError| HarnessError::Pipeline { experiment, source: Box::new(e) };

    let mut exclude = HashSet::new();
    let mut prepared = Vec::with_capacity(cfg.n_experiments);
    for index in 1..=cfg.n_experiments {
        let options = CorruptOptions {
            id_prefix: format!("x{index:02}b"),
            exclude: exclude.clone(),
            eps,
            network: cfg.network(),
            max_attempts: cfg.corrupt_attempts,
            ..CorruptOptions::default()
        };
        let corruption =
            corrupt(&original, index, cfg.experiment_seed(index), &cases, &options).map_err(wrap(index))?;
        exclude.extend(corruption.signatures.iter().cloned());
        let acc_before = diagnostic_accuracy(&corruption.rulebase, &cases, cfg.network()).map_err(wrap(index))?;
        let (training, reference) =
            error_split(&corruption.rulebase, &cases, cfg.network(), eps).map_err(wrap(index))?;
        prepared.push(Prepared { index, corruption, acc_before, training, reference });
    }

    let rows: Vec<Result<ExperimentRow, HarnessError>> = thread::scope(|s| {
        let handles: Vec<_> =
            prepared.iter().map(|p| s.spawn(|| run_one(p, &original, &cases, cfg).map_err(wrap(p.index)))).collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let original_rules = original.rules().len();
    let retained_rules = rows.iter().map(|r| original_rules - r.correct_deleted).sum();
    let before: Vec<f64> = rows.iter().map(|r| r.bad_before as f64).collect();
    let after: Vec<f64> = rows.iter().map(|r| r.bad_after as f64).collect();
    let acc_before: Vec<f64> = rows.iter().map(|r| r.acc_before).collect();
    let acc_after: Vec<f64> = rows.iter().map(|r| r.acc_after).collect();
    Ok(SuiteResult {
        t_bad: paired_t_test(&before, &after).ok(),
        t_accuracy: paired_t_test(&acc_after, &acc_before).ok(),
        rows,
        original_rules,
        retained_rules,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_experiments_give_empty_table() {
        let r = run_experiment_suite(&SuiteConfig { n_experiments: 0, ..Default::default() }).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(
            r.table(),
            "experiment\tbad_before\tbad_after\tacc_before\tacc_after\timprovement\n\
             t_bad_rules\tundefined\nt_accuracy\tundefined\n"
        );
    }

    #[test]
    fn table_layout() {
        let row = |i: usize, after: usize, a0: f64, a1: f64| ExperimentRow {
            experiment: i,
            bad_before: i,
            bad_after: after,
            acc_before: a0,
            acc_after: a1,
            improvement: a1 - a0,
            correct_deleted: 0,
            outcome: OutcomeCode::O5,
            applied: Applied::KnowledgeBase,
            n_training: 1,
        };
        let rows = vec![row(1, 0, 90.0, 100.0), row(2, 1, 80.0, 95.0)];
        let r = SuiteResult {
            t_bad: paired_t_test(&[1.0, 2.0], &[0.0, 1.0]).ok(),
            t_accuracy: paired_t_test(&[100.0, 95.0], &[90.0, 80.0]).ok(),
            rows,
            original_rules: 50,
            retained_rules: 100,
        };
        let table = r.table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[1], "1\t1\t0\t90.0\t100.0\t10.0");
        assert_eq!(lines[3], "Average\t1.5\t0.5\t85.0\t97.5\t12.5");
        assert_eq!(lines[4], "t_bad_rules\tundefined");
        assert!(lines[5].starts_with("t_accuracy\t5.00\tdf=1"), "{}", lines[5]);
        assert_eq!(r.retention(), 1.0);
        assert_eq!(r.rows_not_worse(), 2);
    }
}
