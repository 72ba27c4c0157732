//! Certainty-factor rule bases as trainable belief networks.
//!
//! A rule base is compiled into a weighted DAG whose connection weights are
//! the rule strengths. Errors observed on cases are back-propagated to adjust
//! those strengths (and, optionally, the reliability of each observed input),
//! a three-way clamping test decides whether the knowledge or the data is at
//! fault, and weak rules are deleted.

pub mod diagnosis;
pub mod dsl;
pub mod harness;
pub mod inference;
pub mod network;
pub mod revision;
pub mod rulebase;
pub mod trainer;

pub use diagnosis::{classify_outcome, run_three_tests, Action, DiagnosisReport, OutcomeClass, OutcomeCode};
pub use dsl::{parse_cases, parse_rulebase, serialize_cases, serialize_rulebase, CaseInstance, DslError};
pub use inference::{combine, eval_premise, infer, threshold_contribution, BeliefAssignment, Observation};
pub use network::{BeliefNetwork, CombineMode, ConnId, NetworkConfig, NodeId, NodeKind, Origin};
pub use revision::{refine, RefineConfig, Refinement, RevisionConfig, RevisionReport};
pub use rulebase::{Clause, Premise, Rule, RuleBase};
pub use trainer::{train, ClampMask, ClampPolicy, TrainConfig, TrainOutcome};

/// Formats `x` with nine significant digits.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.8}", x);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{:.*}", decimals, x)
}
