//! Synthetic replication of the rule-deletion experiment: generate a layered
//! rule base and cases it diagnoses correctly, inject incorrect rules,
//! refine, and compare before/after with paired t-tests.

mod experiment;
mod generate;
mod stats;

use thiserror::Error;

use crate::inference::InferenceError;
use crate::revision::RefineError;

pub use experiment::{run_experiment_suite, ExperimentRow, SuiteConfig, SuiteResult};
pub use generate::{
    corrupt, diagnostic_accuracy, error_split, generate_cases, generate_cases_with, generate_rulebase, CaseProfile,
    CorruptOptions, Corruption, SyntheticSpec,
};
pub use stats::{critical_value, paired_t_test, TTestResult, SIGNIFICANCE_LEVELS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
    #[error("could not generate a consistent case after {attempts} attempts ({generated} generated)")]
    GenerationExhausted { generated: usize, attempts: usize },
    #[error("no observable corruption found in {attempts} attempts")]
    CannotCorrupt { attempts: usize },
    #[error("case `{case}` has no label")]
    NoLabel { case: String },
    #[error("no cases to score")]
    EmptyCases,
    #[error("all paired differences are identical")]
    Degenerate,
    #[error("paired samples differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 pairs, got {n}")]
    TooFewSamples { n: usize },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("experiment {experiment}: {source}")]
    Pipeline {
        experiment: usize,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Refine(#[from] RefineError),
}
