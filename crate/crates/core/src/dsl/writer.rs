use std::fmt::Write;

use crate::rulebase::{Clause, RuleBase};

/// Canonical text: name, declarations in declaration order, then rules in id
/// order. Strengths use the shortest representation that parses back to the
/// same `f64`.
pub fn serialize_rulebase(rb: &RuleBase) -> String {
    let mut out = String::new();
    writeln!(out, "base {}.", rb.name()).unwrap();
    for a in rb.attributes() {
        writeln!(out, "attr {a}.").unwrap();
    }
    for h in rb.hypotheses() {
        writeln!(out, "hypo {h}.").unwrap();
    }
    for c in rb.declared_concepts() {
        writeln!(out, "concept {c}.").unwrap();
    }
    for rule in rb.rules() {
        let clauses: Vec<String> = rule.premise.clauses().iter().map(clause_text).collect();
        writeln!(out, "rule {}: IF {} THEN {} ({}).", rule.id, clauses.join(" AND "), rule.conclusion, rule.strength)
            .unwrap();
    }
    out
}

fn clause_text(c: &Clause) -> String {
    if c.is_disjunction() {
        format!("({})", c.atoms().join(" OR "))
    } else {
        c.atoms()[0].clone()
    }
}
