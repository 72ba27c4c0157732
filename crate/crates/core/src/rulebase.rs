//! Symbolic rule bases: declarations, rules with certainty-factor strengths,
//! and the structural checks every rule base must pass.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::dsl::DslError;

/// A disjunction of atoms. A single-atom clause is a plain atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause(pub Vec<String>);

impl Clause {
    pub fn atom(name: impl Into<String>) -> Self {
        Clause(vec![name.into()])
    }

    pub fn any_of<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Clause(names.into_iter().map(Into::into).collect())
    }

    pub fn atoms(&self) -> &[String] {
        &self.0
    }

    pub fn is_disjunction(&self) -> bool {
        self.0.len() > 1
    }
}

/// Conjunction of clauses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Premise(pub Vec<Clause>);

impl Premise {
    /// Plain conjunction of single atoms.
    pub fn all_of<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Premise(names.into_iter().map(Clause::atom).collect())
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.0
    }

    /// Every atom in order of appearance, duplicates included.
    pub fn atoms(&self) -> impl Iterator<Item = &str> {
        self.0.iter().flat_map(|c| c.0.iter().map(String::as_str))
    }

    /// Distinct atoms in order of first appearance.
    pub fn distinct_atoms(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.atoms().filter(|a| seen.insert(*a)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: String,
    pub premise: Premise,
    pub conclusion: String,
    pub strength: f64,
}

impl Rule {
    pub fn new(id: impl Into<String>, premise: Premise, conclusion: impl Into<String>, strength: f64) -> Self {
        Rule { id: id.into(), premise, conclusion: conclusion.into(), strength }
    }

    /// Premise atoms (sorted, per clause) and conclusion; two rules with the
    /// same signature say the same thing up to strength.
    pub fn signature(&self) -> RuleSignature {
        let mut clauses: Vec<Vec<String>> = self
            .premise
            .0
            .iter()
            .map(|c| {
                let mut atoms = c.0.clone();
                atoms.sort();
                atoms
            })
            .collect();
        clauses.sort();
        RuleSignature { clauses, conclusion: self.conclusion.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleSignature {
    pub clauses: Vec<Vec<String>>,
    pub conclusion: String,
}

/// Knobs for structural validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ValidationOptions {
    /// Let a final hypothesis appear inside a premise. Rejected by default.
    pub allow_hypothesis_premise: bool,
}

/// What a name denotes inside a rule base.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConceptRole {
    Attribute,
    Intermediate,
    Hypothesis,
}

/// A validated rule base. Rules are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleBase {
    name: String,
    attributes: Vec<String>,
    hypotheses: Vec<String>,
    concepts: Vec<String>,
    rules: Vec<Rule>,
}

impl RuleBase {
    /// Validates with default options.
    pub fn new(
        name: impl Into<String>,
        attributes: Vec<String>,
        hypotheses: Vec<String>,
        rules: Vec<Rule>,
    ) -> Result<Self, DslError> {
        Self::build(name.into(), attributes, hypotheses, Vec::new(), rules, ValidationOptions::default())
    }

    /// Full constructor. `concepts` explicitly declares intermediate concepts
    /// that no longer satisfy the inferred-intermediate rule (for instance
    /// after the rules concluding them were deleted).
    pub fn build(
        name: String,
        attributes: Vec<String>,
        hypotheses: Vec<String>,
        concepts: Vec<String>,
        mut rules: Vec<Rule>,
        options: ValidationOptions,
    ) -> Result<Self, DslError> {
        rules.sort_by(|a, b| a.id.cmp(&b.id));
        let rb = RuleBase { name, attributes, hypotheses, concepts, rules };
        rb.validate(options)?;
        Ok(rb)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn hypotheses(&self) -> &[String] {
        &self.hypotheses
    }

    /// Explicitly declared intermediate concepts.
    pub fn declared_concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.binary_search_by(|r| r.id.as_str().cmp(id)).ok().map(|i| &self.rules[i])
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Intermediate concepts in sorted order: every non-attribute,
    /// non-hypothesis name used by some rule, plus declared ones.
    pub fn intermediates(&self) -> Vec<String> {
        let mut set: BTreeSet<&str> = self.concepts.iter().map(String::as_str).collect();
        for rule in &self.rules {
            for atom in rule.premise.atoms().chain(std::iter::once(rule.conclusion.as_str())) {
                if self.role_of_declared(atom).is_none() {
                    set.insert(atom);
                }
            }
        }
        set.into_iter().map(str::to_owned).collect()
    }

    pub fn role(&self, name: &str) -> Option<ConceptRole> {
        self.role_of_declared(name)
            .or_else(|| self.intermediates().iter().any(|c| c == name).then_some(ConceptRole::Intermediate))
    }

    fn role_of_declared(&self, name: &str) -> Option<ConceptRole> {
        if self.attributes.iter().any(|a| a == name) {
            Some(ConceptRole::Attribute)
        } else if self.hypotheses.iter().any(|h| h == name) {
            Some(ConceptRole::Hypothesis)
        } else {
            None
        }
    }

    /// Replaces rule strengths by id. Ids not present are ignored.
    pub(crate) fn set_strengths(&mut self, strengths: &HashMap<&str, f64>) {
        for rule in &mut self.rules {
            if let Some(&s) = strengths.get(rule.id.as_str()) {
                rule.strength = s;
            }
        }
    }

    /// Removes the listed rules; intermediates left without a concluding rule
    /// or without a consuming rule become declared concepts.
    pub(crate) fn remove_rules(&self, ids: &HashSet<&str>) -> RuleBase {
        let before = self.intermediates();
        let rules: Vec<Rule> = self.rules.iter().filter(|r| !ids.contains(r.id.as_str())).cloned().collect();
        let mut next = RuleBase {
            name: self.name.clone(),
            attributes: self.attributes.clone(),
            hypotheses: self.hypotheses.clone(),
            concepts: self.concepts.clone(),
            rules,
        };
        let (concluded, consumed) = next.usage();
        let orphaned: Vec<String> = before
            .into_iter()
            .filter(|c| !(concluded.contains(c.as_str()) && consumed.contains(c.as_str())))
            .filter(|c| !next.concepts.contains(c))
            .collect();
        next.concepts.extend(orphaned);
        next.concepts.sort();
        next
    }

    fn usage(&self) -> (HashSet<&str>, HashSet<&str>) {
        let concluded = self.rules.iter().map(|r| r.conclusion.as_str()).collect();
        let consumed = self.rules.iter().flat_map(|r| r.premise.atoms()).collect();
        (concluded, consumed)
    }

    fn validate(&self, options: ValidationOptions) -> Result<(), DslError> {
        let mut declared = HashSet::new();
        for name in self.attributes.iter().chain(&self.hypotheses).chain(&self.concepts) {
            if !declared.insert(name.as_str()) {
                return Err(DslError::DuplicateDeclaration { name: name.clone() });
            }
        }

        for rule in &self.rules {
            if !(rule.strength.is_finite() && (-1.0..=1.0).contains(&rule.strength)) {
                return Err(DslError::StrengthOutOfRange { rule: rule.id.clone(), value: rule.strength });
            }
        }

        for pair in self.rules.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(DslError::DuplicateRuleId { id: pair[0].id.clone() });
            }
        }

        for rule in &self.rules {
            if rule.premise.0.is_empty() {
                return Err(DslError::EmptyPremise { rule: rule.id.clone() });
            }
            for clause in &rule.premise.0 {
                if clause.0.is_empty() {
                    return Err(DslError::EmptyPremise { rule: rule.id.clone() });
                }
                let mut seen = HashSet::new();
                for atom in &clause.0 {
                    if !seen.insert(atom.as_str()) {
                        return Err(DslError::DuplicateAtom { rule: rule.id.clone(), atom: atom.clone() });
                    }
                }
            }
        }

        if let Some(path) = self.find_cycle() {
            return Err(DslError::Cycle { path });
        }

        let (concluded, consumed) = self.usage();
        for rule in &self.rules {
            match self.role_of_declared(&rule.conclusion) {
                Some(ConceptRole::Attribute) => {
                    return Err(DslError::ConclusionIsAttribute {
                        rule: rule.id.clone(),
                        name: rule.conclusion.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    let name = rule.conclusion.as_str();
                    if !consumed.contains(name) && !self.concepts.iter().any(|c| c == name) {
                        return Err(DslError::UndeclaredName { rule: rule.id.clone(), name: name.to_owned() });
                    }
                }
            }
            for atom in rule.premise.atoms() {
                match self.role_of_declared(atom) {
                    Some(ConceptRole::Hypothesis) if !options.allow_hypothesis_premise => {
                        return Err(DslError::HypothesisInPremise { rule: rule.id.clone(), name: atom.to_owned() })
                    }
                    Some(_) => {}
                    None => {
                        if !concluded.contains(atom) && !self.concepts.iter().any(|c| c == atom) {
                            return Err(DslError::UndeclaredName { rule: rule.id.clone(), name: atom.to_owned() });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Depth-first search over premise-atom -> conclusion edges. Returns a
    /// closed path such as `[a, b, a]` when one exists.
    fn find_cycle(&self) -> Option<Vec<String>> {
        let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for rule in &self.rules {
            for atom in rule.premise.atoms() {
                edges.entry(atom).or_default().insert(&rule.conclusion);
            }
        }

        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: HashMap<&str, Mark> = HashMap::new();

        for &start in edges.keys() {
            if marks.contains_key(start) {
                continue;
            }
            // (node, iterator position) stack for an iterative DFS
            let mut stack: Vec<(&str, Vec<&str>)> = Vec::new();
            let succ = |n: &str| -> Vec<&str> { edges.get(n).map(|s| s.iter().copied().collect()).unwrap_or_default() };
            marks.insert(start, Mark::Open);
            stack.push((start, succ(start)));
            while let Some((node, pending)) = stack.last_mut() {
                let node = *node;
                match pending.pop() {
                    Some(next) => match marks.get(next) {
                        Some(Mark::Open) => {
                            let from = stack.iter().position(|(n, _)| *n == next).unwrap();
                            let mut path: Vec<String> = stack[from..].iter().map(|(n, _)| (*n).to_owned()).collect();
                            path.push(next.to_owned());
                            return Some(path);
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(next, Mark::Open);
                            let mut s = succ(next);
                            s.reverse();
                            stack.push((next, s));
                        }
                    },
                    None => {
                        marks.insert(node, Mark::Done);
                        stack.pop();
                    }
                }
            }
        }
        None
    }
}

impl fmt::Display for RuleBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::dsl::serialize_rulebase(self))
    }
}
