//! Turning trained networks into edits of the rule base and the case data.
//!
//! Only two edits are ever applied to a rule base: strengths are replaced by
//! the trained weights, and rules whose strength magnitude falls below the
//! inference cutoff are deleted. With contribution-level thresholding at the
//! same cutoff such a rule can never contribute, so deleting it leaves every
//! thresholded conclusion unchanged; [`verify_deletion_safety`] checks that
//! on concrete probes. Generalization and specialization are only suggested.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;

use thiserror::Error;

use crate::diagnosis::{run_three_tests, Action, DiagnosisError, DiagnosisReport};
use crate::dsl::CaseInstance;
use crate::inference::{infer, Observation};
use crate::network::{BeliefNetwork, CombineMode, CompileError, NetworkConfig, Origin};
use crate::rulebase::RuleBase;
use crate::sig9;
use crate::trainer::{TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct RevisionConfig {
    /// Rule deletion threshold.
    pub k: f64,
    /// Data-link deletion threshold.
    pub data_k: f64,
    /// Fraction of the final epochs over which a discrepancy must persist.
    pub suggestion_window: f64,
    /// Minimum |mean discrepancy| over the window that triggers a suggestion.
    pub suggestion_floor: f64,
    /// Belief written in place of a deleted observation.
    pub deleted_belief: f64,
}

impl Default for RevisionConfig {
    fn default() -> Self {
        RevisionConfig { k: 0.2, data_k: 0.2, suggestion_window: 0.2, suggestion_floor: 0.2, deleted_belief: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrengthChange {
    pub rule: String,
    pub old: f64,
    pub new: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeletedRule {
    pub rule: String,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DataDeletion {
    pub case: String,
    pub attribute: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuggestionKind {
    Generalize,
    Specialize,
}

impl SuggestionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SuggestionKind::Generalize => "generalize",
            SuggestionKind::Specialize => "specialize",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub hypothesis: String,
    pub kind: SuggestionKind,
    /// Mean discrepancy over the window.
    pub evidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RevisionReport {
    pub strength_changes: Vec<StrengthChange>,
    pub deleted_rules: Vec<DeletedRule>,
    pub deleted_data: Vec<DataDeletion>,
    pub suggestions: Vec<Suggestion>,
}

impl RevisionReport {
    pub fn is_empty(&self) -> bool {
        self.strength_changes.is_empty()
            && self.deleted_rules.is_empty()
            && self.deleted_data.is_empty()
            && self.suggestions.is_empty()
    }

    /// Sections `CHANGED`, `DELETED`, `DATA-DELETED`, `SUGGEST`, one
    /// tab-separated record per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("CHANGED\n");
        for c in &self.strength_changes {
            writeln!(out, "{}\t{}\t{}", c.rule, sig9(c.old), sig9(c.new)).unwrap();
        }
        out.push_str("DELETED\n");
        for d in &self.deleted_rules {
            writeln!(out, "{}\t{}", d.rule, sig9(d.strength)).unwrap();
        }
        out.push_str("DATA-DELETED\n");
        for d in &self.deleted_data {
            writeln!(out, "{}\t{}", d.case, d.attribute).unwrap();
        }
        out.push_str("SUGGEST\n");
        for s in &self.suggestions {
            writeln!(out, "{}\t{}\t{}", s.hypothesis, s.kind.as_str(), sig9(s.evidence)).unwrap();
        }
        out
    }
}

/// Removes every rule with |strength| < k (strict: |strength| == k stays).
pub fn delete_weak_rules(rb: &RuleBase, k: f64) -> (RuleBase, Vec<DeletedRule>) {
    let deleted: Vec<DeletedRule> = rb
        .rules()
        .iter()
        .filter(|r| r.strength.abs() < k)
        .map(|r| DeletedRule { rule: r.id.clone(), strength: r.strength })
        .collect();
    let ids: HashSet<&str> = deleted.iter().map(|d| d.rule.as_str()).collect();
    (rb.remove_rules(&ids), deleted)
}

/// Compares output beliefs of two rule bases on every probe, exactly.
pub fn verify_deletion_safety(
    before: &RuleBase,
    after: &RuleBase,
    probes: &[BTreeMap<String, f64>],
    config: NetworkConfig,
    thresholding: bool,
) -> bool {
    let config = NetworkConfig { data_error_mode: false, ..config };
    let a = BeliefNetwork::compile(before, config);
    let b = BeliefNetwork::compile(after, config);
    probes.iter().all(|probe| {
        let run = |net: &BeliefNetwork| {
            let obs = Observation::from_pairs(net, probe.iter().map(|(k, v)| (k.as_str(), *v)));
            infer(net, &obs, thresholding).map(|beliefs| beliefs.outputs(net))
        };
        run(&a) == run(&b)
    })
}

/// Attributes whose data link has fallen below `data_k`, reported for every
/// case that observed them.
pub fn revise_data(net: &BeliefNetwork, cases: &[CaseInstance], data_k: f64) -> Vec<DataDeletion> {
    let weak: Vec<&str> = net
        .connections()
        .iter()
        .filter_map(|c| match &c.origin {
            Origin::DataLink(attr) if c.weight < data_k => Some(attr.as_str()),
            _ => None,
        })
        .collect();
    let mut out: Vec<DataDeletion> = cases
        .iter()
        .flat_map(|case| {
            weak.iter()
                .filter(|a| case.observed_belief(a) != 0.0)
                .map(|a| DataDeletion { case: case.id.clone(), attribute: (*a).to_owned() })
        })
        .collect();
    out.sort();
    out
}

/// Copies of `cases` with the deleted observations replaced by `belief`.
pub fn apply_data_deletions(cases: &[CaseInstance], deletions: &[DataDeletion], belief: f64) -> Vec<CaseInstance> {
    cases
        .iter()
        .map(|case| {
            let mut c = case.clone();
            for d in deletions.iter().filter(|d| d.case == case.id) {
                c.observed.insert(d.attribute.clone(), belief);
            }
            c
        })
        .collect()
}

/// Hypotheses whose discrepancy stayed large through the final part of
/// training. Nothing is suggested for a resolved run.
pub fn suggest_structural(outcome: &TrainOutcome, cfg: &RevisionConfig) -> Vec<Suggestion> {
    if outcome.resolved || outcome.trace.is_empty() {
        return Vec::new();
    }
    let n = outcome.trace.len();
    let window = ((n as f64 * cfg.suggestion_window).ceil() as usize).clamp(1, n);
    let tail = &outcome.trace[n - window..];
    outcome
        .hypotheses
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let mean = tail.iter().map(|r| r.mean_discrepancy[i]).sum::<f64>() / window as f64;
            let kind = if mean >= cfg.suggestion_floor {
                SuggestionKind::Generalize
            } else if mean <= -cfg.suggestion_floor {
                SuggestionKind::Specialize
            } else {
                return None;
            };
            Some(Suggestion { hypothesis: h.clone(), kind, evidence: mean })
        })
        .collect()
}

/// Assembles a report. `synced` carries trained strengths for every rule of
/// `original`; deleted rules are listed only under deletions.
pub fn build_report(
    original: &RuleBase,
    synced: &RuleBase,
    deleted: Vec<DeletedRule>,
    mut deleted_data: Vec<DataDeletion>,
    suggestions: Vec<Suggestion>,
) -> RevisionReport {
    let gone: HashSet<&str> = deleted.iter().map(|d| d.rule.as_str()).collect();
    let strength_changes = original
        .rules()
        .iter()
        .filter(|r| !gone.contains(r.id.as_str()))
        .filter_map(|r| {
            let new = synced.rule(&r.id)?.strength;
            ((new - r.strength).abs() > 1e-9).then(|| StrengthChange { rule: r.id.clone(), old: r.strength, new })
        })
        .collect();
    let mut deleted_rules = deleted;
    deleted_rules.sort_by(|a, b| a.rule.cmp(&b.rule));
    deleted_data.sort();
    RevisionReport { strength_changes, deleted_rules, deleted_data, suggestions }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    KnowledgeBase,
    Data,
}

/// What the refinement actually changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    Nothing,
    Data,
    KnowledgeBase,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub combine: CombineMode,
    pub train: TrainConfig,
    pub revision: RevisionConfig,
    /// Settles the either-or outcome without asking.
    pub prefer: Option<Preference>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            combine: CombineMode::Mycin,
            train: TrainConfig::default(),
            revision: RevisionConfig::default(),
            prefer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub diagnosis: DiagnosisReport,
    pub applied: Applied,
    pub rulebase: RuleBase,
    /// Error cases with deleted observations replaced.
    pub cases: Vec<CaseInstance>,
    pub report: RevisionReport,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error(transparent)]
    Diagnosis(#[from] DiagnosisError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Diagnose, then apply the revision the outcome calls for.
///
/// Either-or outcomes use `cfg.prefer`; without a preference, as for
/// deadlocks and unlikely outcomes, nothing is applied and the report only
/// carries suggestions from the fully adjustable run.
pub fn refine(
    rb: &RuleBase,
    error_cases: &[CaseInstance],
    reference: &[CaseInstance],
    cfg: &RefineConfig,
) -> Result<Refinement, RefineError> {
    let net_cfg = NetworkConfig { data_error_mode: true, combine: cfg.combine, threshold: cfg.revision.k };
    let net = BeliefNetwork::compile(rb, net_cfg);
    let diagnosis = run_three_tests(&net, error_cases, reference, &cfg.train)?;

    let applied = match (diagnosis.outcome.action, cfg.prefer) {
        (Action::ReviseData, _) | (Action::ExpertChooseKbOrData, Some(Preference::Data)) => Applied::Data,
        (Action::ReviseKb, _) | (Action::ExpertChooseKbOrData, Some(Preference::KnowledgeBase)) => {
            Applied::KnowledgeBase
        }
        (Action::ReviseBoth, _) => Applied::Both,
        _ => Applied::Nothing,
    };
    let source = match applied {
        Applied::Data => &diagnosis.tests[0],
        Applied::KnowledgeBase => &diagnosis.tests[1],
        Applied::Both | Applied::Nothing => &diagnosis.tests[2],
    };
    let suggestions = suggest_structural(&source.outcome, &cfg.revision);

    let (rulebase, report, cases) = match applied {
        Applied::Nothing => (rb.clone(), build_report(rb, rb, vec![], vec![], suggestions), error_cases.to_vec()),
        _ => {
            let kb = matches!(applied, Applied::KnowledgeBase | Applied::Both);
            let data = matches!(applied, Applied::Data | Applied::Both);
            let (synced, revised, deleted) = if kb {
                let synced = source.network.sync_strengths(rb)?;
                let (revised, deleted) = delete_weak_rules(&synced, cfg.revision.k);
                (synced, revised, deleted)
            } else {
                (rb.clone(), rb.clone(), vec![])
            };
            let deleted_data =
                if data { revise_data(&source.network, error_cases, cfg.revision.data_k) } else { vec![] };
            let cases = apply_data_deletions(error_cases, &deleted_data, cfg.revision.deleted_belief);
            (revised, build_report(rb, &synced, deleted, deleted_data, suggestions), cases)
        }
    };

    Ok(Refinement { diagnosis, applied, rulebase, cases, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_rulebase;
    use crate::trainer::EpochRecord;

    fn weak_base() -> RuleBase {
        parse_rulebase(
            "attr a. attr b. hypo h. hypo g.\n\
             rule r1: IF a THEN h (0.15).\n\
             rule r2: IF b THEN h (-0.15).\n\
             rule r3: IF a THEN g (0.25).\n\
             rule r4: IF b THEN g (0.2).",
        )
        .unwrap()
    }

    #[test]
    fn deletion_threshold_is_strict_on_magnitude() {
        let (after, deleted) = delete_weak_rules(&weak_base(), 0.2);
        let ids: Vec<&str> = deleted.iter().map(|d| d.rule.as_str()).collect();
        assert_eq!(ids, ["r1", "r2"]);
        let kept: Vec<&str> = after.rules().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(kept, ["r3", "r4"]);
    }

    #[test]
    fn deletion_safe_only_with_thresholding() {
        let before = weak_base();
        let (after, _) = delete_weak_rules(&before, 0.2);
        let probes = vec![BTreeMap::from([("a".to_string(), 1.0)])];
        assert!(verify_deletion_safety(&before, &after, &probes, NetworkConfig::default(), true));
        // without the cutoff the 0.15 rule moves h from 0.15 to 0
        assert!(!verify_deletion_safety(&before, &after, &probes, NetworkConfig::default(), false));
        assert!(verify_deletion_safety(&before, &before, &probes, NetworkConfig::default(), false));
    }

    #[test]
    fn weak_data_links_delete_observations() {
        let rb = parse_rulebase("attr a. attr b. hypo h. rule r1: IF a AND b THEN h (0.5).").unwrap();
        let mut net = BeliefNetwork::compile(&rb, NetworkConfig { data_error_mode: true, ..Default::default() });
        let cases = vec![
            CaseInstance::new(&rb, "c1", [("a".into(), 0.9), ("b".into(), 0.4)], [], None),
            CaseInstance::new(&rb, "c2", [("b".into(), 0.4)], [], None),
        ];
        assert!(revise_data(&net, &cases, 0.2).is_empty());
        let link = net.data_link("a").unwrap();
        net.set_weight(link, 0.1);
        let deleted = revise_data(&net, &cases, 0.2);
        assert_eq!(deleted, [DataDeletion { case: "c1".into(), attribute: "a".into() }]);
        let revised = apply_data_deletions(&cases, &deleted, 0.0);
        assert_eq!(revised[0].observed_belief("a"), 0.0);
        assert_eq!(revised[0].observed_belief("b"), 0.4);
    }

    fn outcome_with(means: &[[f64; 2]], resolved: bool) -> TrainOutcome {
        TrainOutcome {
            resolved,
            epochs_used: means.len(),
            final_max_discrepancy: 0.5,
            reference_violations: vec![],
            reference_consistent: true,
            weight_delta_norm: 0.0,
            hypotheses: vec!["h".into(), "g".into()],
            trace: means
                .iter()
                .enumerate()
                .map(|(i, m)| EpochRecord {
                    epoch: i + 1,
                    max_abs_discrepancy: 0.5,
                    mean_discrepancy: m.to_vec(),
                    promoted: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn resistant_discrepancies_become_suggestions() {
        let cfg = RevisionConfig::default();
        let out = outcome_with(&[[0.4, -0.4]; 10], false);
        let s = suggest_structural(&out, &cfg);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].hypothesis.as_str(), s[0].kind), ("h", SuggestionKind::Generalize));
        assert!((s[0].evidence - 0.4).abs() < 1e-12);
        assert_eq!(s[1].kind, SuggestionKind::Specialize);
        assert!((s[1].evidence + 0.4).abs() < 1e-12);

        // only the last 20% counts: early large values are ignored
        let mut trace = vec![[0.9, 0.0]; 8];
        trace.extend([[0.05, 0.0]; 2]);
        assert!(suggest_structural(&outcome_with(&trace, false), &cfg).is_empty());

        assert!(suggest_structural(&outcome_with(&[[0.4, -0.4]; 10], true), &cfg).is_empty());
    }

    #[test]
    fn report_lists_deleted_rules_once() {
        let rb = parse_rulebase("attr a. hypo h. rule r1: IF a THEN h (0.8). rule r2: IF a THEN h (0.5).").unwrap();
        let mut net = BeliefNetwork::compile(&rb, NetworkConfig::default());
        net.set_weight(net.rule_connection("r1").unwrap(), 0.1);
        net.set_weight(net.rule_connection("r2").unwrap(), 0.45);
        let synced = net.sync_strengths(&rb).unwrap();
        let (_, deleted) = delete_weak_rules(&synced, 0.2);
        let report = build_report(&rb, &synced, deleted, vec![], vec![]);
        assert_eq!(report.deleted_rules, [DeletedRule { rule: "r1".into(), strength: 0.1 }]);
        assert_eq!(report.strength_changes.len(), 1);
        assert_eq!(report.strength_changes[0].rule, "r2");
        assert_eq!(
            report.to_text(),
            "CHANGED\nr2\t0.500000000\t0.450000000\nDELETED\nr1\t0.100000000\nDATA-DELETED\nSUGGEST\n"
        );

        let untouched = build_report(&rb, &rb, vec![], vec![], vec![]);
        assert!(untouched.is_empty());
    }
}
