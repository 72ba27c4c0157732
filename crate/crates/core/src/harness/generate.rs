use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::dsl::CaseInstance;
use crate::inference::{infer, infer_into, threshold_contribution, Observation};
use crate::network::{BeliefNetwork, CombineMode, NetworkConfig, Origin};
use crate::rulebase::{Premise, Rule, RuleBase, RuleSignature, ValidationOptions};

/// Shape of a generated rule base: attributes feed intermediates and
/// hypotheses, intermediates feed hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_attributes: usize,
    pub n_middle: usize,
    pub n_hypotheses: usize,
    pub n_rules: usize,
    pub n_cases: usize,
    /// Magnitude range of generated strengths.
    pub strength_range: (f64, f64),
    /// Probability that a generated rule is negative evidence.
    pub negative_fraction: f64,
    /// Probability that an attribute-level premise is a two-atom conjunction.
    pub conjunction_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_attributes: 20,
            n_middle: 3,
            n_hypotheses: 5,
            n_rules: 50,
            n_cases: 20,
            strength_range: (0.3, 0.9),
            negative_fraction: 0.2,
            conjunction_fraction: 0.3,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    fn attribute_names(&self) -> Vec<String> {
        let w = digits(self.n_attributes);
        (1..=self.n_attributes).map(|i| format!("a{i:0w$}")).collect()
    }

    fn middle_names(&self) -> Vec<String> {
        let w = digits(self.n_middle);
        (1..=self.n_middle).map(|i| format!("m{i:0w$}")).collect()
    }

    fn hypothesis_names(&self) -> Vec<String> {
        let w = digits(self.n_hypotheses);
        (1..=self.n_hypotheses).map(|i| format!("h{i:0w$}")).collect()
    }

    /// Distinct single-atom layered edges.
    pub fn edge_capacity(&self) -> usize {
        self.n_attributes * (self.n_middle + self.n_hypotheses) + self.n_middle * self.n_hypotheses
    }
}

fn digits(n: usize) -> usize {
    n.max(1).to_string().len()
}

/// Draws one layered rule shape.
struct Layers<'a> {
    attributes: &'a [String],
    middle: &'a [String],
    hypotheses: &'a [String],
    conjunction_fraction: f64,
}

impl Layers<'_> {
    fn attribute_premise(&self, rng: &mut ChaCha8Rng) -> Premise {
        let first = &self.attributes[rng.gen_range(0..self.attributes.len())];
        if self.attributes.len() > 1 && rng.gen_bool(self.conjunction_fraction) {
            loop {
                let second = &self.attributes[rng.gen_range(0..self.attributes.len())];
                if second != first {
                    return Premise::all_of([first.clone(), second.clone()]);
                }
            }
        }
        Premise::all_of([first.clone()])
    }

    fn random_rule(&self, rng: &mut ChaCha8Rng) -> (Premise, String) {
        let to_middle = !self.middle.is_empty() && rng.gen_bool(0.3);
        let from_middle = !self.middle.is_empty() && !to_middle && rng.gen_bool(0.25);
        if to_middle {
            let m = self.middle[rng.gen_range(0..self.middle.len())].clone();
            (self.attribute_premise(rng), m)
        } else if from_middle {
            let m = self.middle[rng.gen_range(0..self.middle.len())].clone();
            let h = self.hypotheses[rng.gen_range(0..self.hypotheses.len())].clone();
            (Premise::all_of([m]), h)
        } else {
            let h = self.hypotheses[rng.gen_range(0..self.hypotheses.len())].clone();
            (self.attribute_premise(rng), h)
        }
    }
}

fn random_strength(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64), negative_fraction: f64) -> f64 {
    let magnitude = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    if rng.gen_bool(negative_fraction) {
        -magnitude
    } else {
        magnitude
    }
}

fn signature(premise: &Premise, conclusion: &str) -> RuleSignature {
    Rule::new("", premise.clone(), conclusion, 0.0).signature()
}

/// Seeded, deterministic layered rule base.
pub fn generate_rulebase(spec: &SyntheticSpec) -> Result<RuleBase, HarnessError> {
    if spec.n_attributes == 0 || spec.n_hypotheses == 0 || spec.n_rules == 0 {
        return Err(HarnessError::Infeasible("attribute, hypothesis and rule counts must be positive".into()));
    }
    let (lo, hi) = spec.strength_range;
    if !(0.0 < lo && lo <= hi && hi <= 1.0) {
        return Err(HarnessError::Infeasible(format!("strength range [{lo}, {hi}]")));
    }
    if spec.n_rules > spec.edge_capacity() {
        return Err(HarnessError::Infeasible(format!(
            "{} rules exceed the {} distinct layered edges",
            spec.n_rules,
            spec.edge_capacity()
        )));
    }
    let required = 2 * spec.n_middle + spec.n_hypotheses.saturating_sub(spec.n_middle);
    if spec.n_rules < required {
        return Err(HarnessError::Infeasible(format!(
            "{} rules cannot connect {} intermediates and {} hypotheses (need {required})",
            spec.n_rules, spec.n_middle, spec.n_hypotheses
        )));
    }

    let attributes = spec.attribute_names();
    let middle = spec.middle_names();
    let hypotheses = spec.hypothesis_names();
    let layers = Layers {
        attributes: &attributes,
        middle: &middle,
        hypotheses: &hypotheses,
        conjunction_fraction: spec.conjunction_fraction,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen: HashSet<RuleSignature> = HashSet::new();
    let mut shapes: Vec<(Premise, String)> = Vec::with_capacity(spec.n_rules);
    let mut push = |premise: Premise, conclusion: String, shapes: &mut Vec<(Premise, String)>| {
        if seen.insert(signature(&premise, &conclusion)) {
            shapes.push((premise, conclusion));
            true
        } else {
            false
        }
    };

    // every intermediate is concluded and consumed; hypotheses get a parent
    let mut fed: HashSet<&str> = HashSet::new();
    for (i, m) in middle.iter().enumerate() {
        let a = attributes[rng.gen_range(0..attributes.len())].clone();
        push(Premise::all_of([a]), m.clone(), &mut shapes);
        let h = &hypotheses[i % hypotheses.len()];
        fed.insert(h);
        push(Premise::all_of([m.clone()]), h.clone(), &mut shapes);
    }
    for h in &hypotheses {
        if !fed.contains(h.as_str()) {
            let a = attributes[rng.gen_range(0..attributes.len())].clone();
            push(Premise::all_of([a]), h.clone(), &mut shapes);
        }
    }

    let budget = spec.n_rules * 1000;
    let mut attempts = 0;
    while shapes.len() < spec.n_rules {
        attempts += 1;
        if attempts > budget {
            return Err(HarnessError::Infeasible("rule space exhausted".into()));
        }
        let (premise, conclusion) = layers.random_rule(&mut rng);
        push(premise, conclusion, &mut shapes);
    }

    let w = digits(spec.n_rules);
    let rules = shapes
        .into_iter()
        .enumerate()
        .map(|(i, (premise, conclusion))| {
            let s = random_strength(&mut rng, spec.strength_range, spec.negative_fraction);
            Rule::new(format!("r{:0w$}", i + 1), premise, conclusion, s)
        })
        .collect();

    RuleBase::build(
        format!("synthetic-{}", spec.seed),
        attributes,
        hypotheses,
        Vec::new(),
        rules,
        ValidationOptions::default(),
    )
    .map_err(|e| HarnessError::Infeasible(e.to_string()))
}

/// How observed patterns are drawn and which generated cases are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseProfile {
    /// Probability that an attribute is observed at all.
    pub present_probability: f64,
    /// Magnitude range of observed beliefs.
    pub belief_range: (f64, f64),
    /// Probability that an observed belief is negative.
    pub negative_fraction: f64,
    /// Thresholded and unthresholded outputs must agree to within this.
    pub agreement_tolerance: f64,
    /// Minimum gap between the best and second-best hypothesis.
    pub label_margin: f64,
    pub combine: CombineMode,
    pub threshold: f64,
    /// Draws allowed per requested case.
    pub attempts_per_case: usize,
}

impl Default for CaseProfile {
    fn default() -> Self {
        CaseProfile {
            present_probability: 0.3,
            belief_range: (0.5, 1.0),
            negative_fraction: 0.1,
            agreement_tolerance: 0.025,
            label_margin: 0.1,
            combine: CombineMode::Mycin,
            threshold: 0.2,
            attempts_per_case: 10_000,
        }
    }
}

impl CaseProfile {
    fn network_config(&self) -> NetworkConfig {
        NetworkConfig { data_error_mode: false, combine: self.combine, threshold: self.threshold }
    }
}

/// Index of the largest value, ties going to the lexicographically smallest name.
fn argmax(names: &[String], values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] || (values[i] == values[best] && names[i] < names[best]) {
            best = i;
        }
    }
    best
}

pub fn generate_cases(rb: &RuleBase, n: usize, seed: u64) -> Result<Vec<CaseInstance>, HarnessError> {
    generate_cases_with(rb, n, seed, &CaseProfile::default())
}

/// Random observed patterns whose targets are the thresholded conclusions of
/// `rb`; each case is labelled with its top hypothesis.
pub fn generate_cases_with(
    rb: &RuleBase,
    n: usize,
    seed: u64,
    profile: &CaseProfile,
) -> Result<Vec<CaseInstance>, HarnessError> {
    let net = BeliefNetwork::compile(rb, profile.network_config());
    let hypotheses = rb.hypotheses();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = n.saturating_mul(profile.attempts_per_case);
    let w = digits(n);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    let (lo, hi) = profile.belief_range;

    while out.len() < n {
        attempts += 1;
        if attempts > budget {
            return Err(HarnessError::GenerationExhausted { generated: out.len(), attempts: budget });
        }
        let observed: Vec<f64> = rb
            .attributes()
            .iter()
            .map(|_| {
                if !rng.gen_bool(profile.present_probability) {
                    return 0.0;
                }
                let m = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                if rng.gen_bool(profile.negative_fraction) {
                    -m
                } else {
                    m
                }
            })
            .collect();
        let obs = Observation(observed);
        let Ok(on) = infer(&net, &obs, true) else { continue };
        let Ok(off) = infer(&net, &obs, false) else { continue };
        let target = on.outputs(&net);
        let raw = off.outputs(&net);

        if target.iter().cloned().fold(f64::NEG_INFINITY, f64::max) <= 0.0 {
            continue;
        }
        if target.iter().zip(&raw).any(|(a, b)| (a - b).abs() > profile.agreement_tolerance) {
            continue;
        }
        let best = argmax(hypotheses, &target);
        let runner_up =
            target.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        if target[best] - runner_up < profile.label_margin {
            continue;
        }

        out.push(CaseInstance::new(
            rb,
            format!("c{:0w$}", out.len() + 1),
            rb.attributes().iter().cloned().zip(obs.0),
            hypotheses.iter().cloned().zip(target),
            Some(hypotheses[best].clone()),
        ));
    }
    Ok(out)
}

/// Percentage of labelled cases whose top thresholded hypothesis is the label.
pub fn diagnostic_accuracy(rb: &RuleBase, cases: &[CaseInstance], config: NetworkConfig) -> Result<f64, HarnessError> {
    if cases.is_empty() {
        return Err(HarnessError::EmptyCases);
    }
    let net = BeliefNetwork::compile(rb, NetworkConfig { data_error_mode: false, ..config });
    let mut correct = 0;
    for case in cases {
        let label = case.label.as_ref().ok_or_else(|| HarnessError::NoLabel { case: case.id.clone() })?;
        let beliefs = infer(&net, &Observation::from_case(&net, case), true)?;
        let best = argmax(rb.hypotheses(), &beliefs.outputs(&net));
        if rb.hypotheses()[best] == *label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / cases.len() as f64)
}

/// Splits cases into those the rule base gets wrong (misdiagnosed, or some
/// unthresholded output further than `eps` from its target) and the rest.
pub fn error_split(
    rb: &RuleBase,
    cases: &[CaseInstance],
    config: NetworkConfig,
    eps: f64,
) -> Result<(Vec<CaseInstance>, Vec<CaseInstance>), HarnessError> {
    let net = BeliefNetwork::compile(rb, NetworkConfig { data_error_mode: false, ..config });
    let mut errors = Vec::new();
    let mut consistent = Vec::new();
    for case in cases {
        let obs = Observation::from_case(&net, case);
        let on = infer(&net, &obs, true)?.outputs(&net);
        let off = infer(&net, &obs, false)?.outputs(&net);
        let misdiagnosed = case.label.as_ref().is_some_and(|l| rb.hypotheses()[argmax(rb.hypotheses(), &on)] != *l);
        let drifted = net.outputs().iter().zip(&off).any(|((h, _), o)| (case.target_belief(h) - o).abs() > eps);
        if misdiagnosed || drifted {
            errors.push(case.clone());
        } else {
            consistent.push(case.clone());
        }
    }
    Ok((errors, consistent))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptOptions {
    /// Prefix of injected rule ids.
    pub id_prefix: String,
    /// Signatures that may not be injected (e.g. used by earlier experiments).
    pub exclude: HashSet<RuleSignature>,
    pub strength_range: (f64, f64),
    /// Tolerance defining an observable output shift.
    pub eps: f64,
    pub network: NetworkConfig,
    pub max_attempts: usize,
}

impl Default for CorruptOptions {
    fn default() -> Self {
        CorruptOptions {
            id_prefix: "bad".into(),
            exclude: HashSet::new(),
            strength_range: (0.3, 0.9),
            eps: 0.05,
            network: NetworkConfig::default(),
            max_attempts: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    pub rulebase: RuleBase,
    pub bad_rules: Vec<String>,
    pub signatures: Vec<RuleSignature>,
}

/// Injects `n_bad` new layered rules, each of which fires above the cutoff
/// on some case, such that at least one case becomes an error case.
pub fn corrupt(
    rb: &RuleBase,
    n_bad: usize,
    seed: u64,
    cases: &[CaseInstance],
    options: &CorruptOptions,
) -> Result<Corruption, HarnessError> {
    if n_bad == 0 {
        return Err(HarnessError::Infeasible("at least one bad rule is required".into()));
    }
    let middle: Vec<String> = rb.intermediates();
    let layers =
        Layers { attributes: rb.attributes(), middle: &middle, hypotheses: rb.hypotheses(), conjunction_fraction: 0.3 };
    let existing: HashSet<RuleSignature> = rb.rules().iter().map(Rule::signature).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = digits(n_bad);

    for _ in 0..options.max_attempts {
        let mut sigs: Vec<RuleSignature> = Vec::with_capacity(n_bad);
        let mut bad = Vec::with_capacity(n_bad);
        let mut tries = 0;
        while bad.len() < n_bad && tries < n_bad * 1000 {
            tries += 1;
            let (premise, conclusion) = layers.random_rule(&mut rng);
            let sig = signature(&premise, &conclusion);
            if existing.contains(&sig) || options.exclude.contains(&sig) || sigs.contains(&sig) {
                continue;
            }
            let s = random_strength(&mut rng, options.strength_range, 0.5);
            bad.push(Rule::new(format!("{}{:0w$}", options.id_prefix, bad.len() + 1), premise, conclusion, s));
            sigs.push(sig);
        }
        if bad.len() < n_bad {
            return Err(HarnessError::Infeasible("no room for more distinct rules".into()));
        }
        let mut rules = rb.rules().to_vec();
        rules.extend(bad.iter().cloned());
        let Ok(candidate) = RuleBase::build(
            rb.name().to_owned(),
            rb.attributes().to_vec(),
            rb.hypotheses().to_vec(),
            rb.declared_concepts().to_vec(),
            rules,
            ValidationOptions::default(),
        ) else {
            continue;
        };
        let net = BeliefNetwork::compile(&candidate, NetworkConfig { data_error_mode: false, ..options.network });
        if !bad.iter().all(|r| fires(&net, &r.id, cases, options.network.threshold)) {
            continue;
        }
        let Ok((errors, _)) = error_split(&candidate, cases, options.network, options.eps) else {
            continue;
        };
        if errors.is_empty() {
            continue;
        }
        let bad_rules = bad.into_iter().map(|r| r.id).collect();
        return Ok(Corruption { rulebase: candidate, bad_rules, signatures: sigs });
    }
    Err(HarnessError::CannotCorrupt { attempts: options.max_attempts })
}

/// Whether the rule's thresholded contribution is nonzero on some case.
fn fires(net: &BeliefNetwork, rule: &str, cases: &[CaseInstance], k: f64) -> bool {
    let Some(conn) = net.rule_connection(rule) else { return false };
    let c = net.connection(conn);
    debug_assert!(matches!(c.origin, Origin::Rule(_)));
    let mut beliefs = Vec::new();
    cases.iter().any(|case| {
        let obs = Observation::from_case(net, case);
        infer_into(net, &obs.0, true, &mut beliefs).is_ok()
            && threshold_contribution(c.weight * beliefs[c.from.0], k) != 0.0
    })
}
