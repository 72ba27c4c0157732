//! Telling knowledge-base errors apart from input-data errors.
//!
//! The same error cases are trained three times from the same starting
//! weights: once with only the data links adjustable, once with only the
//! rule connections adjustable, and once with both. The success/failure
//! triple selects one of eight outcomes.

use std::fmt;
use std::thread;

use thiserror::Error;

use crate::dsl::CaseInstance;
use crate::network::BeliefNetwork;
use crate::trainer::{train, ClampMask, ClampPolicy, TrainConfig, TrainError, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutcomeCode {
    O1,
    O2,
    O3,
    O4,
    O5,
    O6,
    O7,
    O8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    ExpertChooseKbOrData,
    UnlikelyIgnored,
    ReviseData,
    ReviseKb,
    ReviseBoth,
    DeadlockExpert,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::ExpertChooseKbOrData => "expert_choose_kb_or_data",
            Action::UnlikelyIgnored => "unlikely_ignored",
            Action::ReviseData => "revise_data",
            Action::ReviseKb => "revise_kb",
            Action::ReviseBoth => "revise_both",
            Action::DeadlockExpert => "deadlock_expert",
        }
    }
}

impl fmt::Display for OutcomeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeClass {
    /// Data links only.
    pub test1: bool,
    /// Rule connections only.
    pub test2: bool,
    /// Everything adjustable.
    pub test3: bool,
    pub code: OutcomeCode,
    pub action: Action,
}

impl OutcomeClass {
    /// `S`/`F` triple, e.g. `F S S`.
    pub fn triple(&self) -> String {
        let sf = |b: bool| if b { "S" } else { "F" };
        format!("{} {} {}", sf(self.test1), sf(self.test2), sf(self.test3))
    }
}

pub fn classify_outcome(test1: bool, test2: bool, test3: bool) -> OutcomeClass {
    use OutcomeCode::*;
    let code = match (test1, test2, test3) {
        (true, true, true) => O1,
        (true, true, false) => O2,
        (true, false, true) => O3,
        (true, false, false) => O4,
        (false, true, true) => O5,
        (false, true, false) => O6,
        (false, false, true) => O7,
        (false, false, false) => O8,
    };
    let action = match code {
        O1 => Action::ExpertChooseKbOrData,
        O2 | O4 | O6 => Action::UnlikelyIgnored,
        O3 => Action::ReviseData,
        O5 => Action::ReviseKb,
        O7 => Action::ReviseBoth,
        O8 => Action::DeadlockExpert,
    };
    OutcomeClass { test1, test2, test3, code, action }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub policy: ClampPolicy,
    pub outcome: TrainOutcome,
    pub success: bool,
    /// The network as trained by this test.
    pub network: BeliefNetwork,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosisReport {
    pub outcome: OutcomeClass,
    /// Tests 1, 2, 3 in order.
    pub tests: [TestRun; 3],
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosisError {
    #[error("network was not compiled with a data layer")]
    NoDataLayer,
    #[error("test {test}: {source}")]
    Train {
        test: usize,
        #[source]
        source: TrainError,
    },
}

pub const TEST_POLICIES: [ClampPolicy; 3] = [ClampPolicy::KnowledgeBase, ClampPolicy::Data, ClampPolicy::None];

/// Runs the three clamping tests on private copies of `net`.
pub fn run_three_tests(
    net: &BeliefNetwork,
    training: &[CaseInstance],
    reference: &[CaseInstance],
    cfg: &TrainConfig,
) -> Result<DiagnosisReport, DiagnosisError> {
    if !net.config().data_error_mode {
        return Err(DiagnosisError::NoDataLayer);
    }
    let runs: Vec<Result<TestRun, DiagnosisError>> = thread::scope(|s| {
        let handles: Vec<_> = TEST_POLICIES
            .iter()
            .enumerate()
            .map(|(i, &policy)| {
                s.spawn(move || {
                    let mut copy = net.clone();
                    let mask = ClampMask::for_policy(&copy, policy);
                    let outcome = train(&mut copy, training, reference, &mask, cfg)
                        .map_err(|source| DiagnosisError::Train { test: i + 1, source })?;
                    let success = outcome.resolved && outcome.reference_consistent;
                    Ok(TestRun { policy, outcome, success, network: copy })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("test thread panicked")).collect()
    });

    let mut it = runs.into_iter();
    let tests = [it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?];
    let outcome = classify_outcome(tests[0].success, tests[1].success, tests[2].success);
    Ok(DiagnosisReport { outcome, tests })
}
