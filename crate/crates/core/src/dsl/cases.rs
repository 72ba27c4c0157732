use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;

use super::lexer::{tokenize, Tok};
use super::parser::Cursor;
use super::DslError;
use crate::rulebase::RuleBase;

/// One training or reference example: an observed input pattern and the
/// desired output pattern.
///
/// `observed` holds every declared attribute and `target` every declared
/// hypothesis; names absent from the source text are filled with belief 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseInstance {
    pub id: String,
    pub observed: BTreeMap<String, f64>,
    pub target: BTreeMap<String, f64>,
    pub label: Option<String>,
}

impl CaseInstance {
    /// Builds a case with unset attributes and hypotheses at belief 0.
    pub fn new(
        rb: &RuleBase,
        id: impl Into<String>,
        observed: impl IntoIterator<Item = (String, f64)>,
        target: impl IntoIterator<Item = (String, f64)>,
        label: Option<String>,
    ) -> Self {
        let mut o: BTreeMap<String, f64> = rb.attributes().iter().map(|a| (a.clone(), 0.0)).collect();
        o.extend(observed);
        let mut t: BTreeMap<String, f64> = rb.hypotheses().iter().map(|h| (h.clone(), 0.0)).collect();
        t.extend(target);
        CaseInstance { id: id.into(), observed: o, target: t, label }
    }

    pub fn observed_belief(&self, attribute: &str) -> f64 {
        self.observed.get(attribute).copied().unwrap_or(0.0)
    }

    pub fn target_belief(&self, hypothesis: &str) -> f64 {
        self.target.get(hypothesis).copied().unwrap_or(0.0)
    }
}

/// Parses a case file against `rb`. Records keep file order.
pub fn parse_cases(text: &str, rb: &RuleBase) -> Result<Vec<CaseInstance>, DslError> {
    let attributes: HashSet<&str> = rb.attributes().iter().map(String::as_str).collect();
    let hypotheses: HashSet<&str> = rb.hypotheses().iter().map(String::as_str).collect();
    let mut ids = HashSet::new();
    let mut out = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let tokens = tokenize(line, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        let mut p = Cursor::new(&tokens);
        p.keyword("case")?;
        let id = p.name()?;
        p.expect(Tok::Colon, "`:`")?;

        let observed = assignments(&mut p, line_no, &attributes, |p| p.peek() == Some(&Tok::Arrow))?;
        p.expect(Tok::Arrow, "`=>`")?;
        let target = assignments(&mut p, line_no, &hypotheses, |p| p.at_end() || p.peek_is_keyword("label"))?;

        let label = if p.peek_is_keyword("label") {
            p.keyword("label")?;
            p.expect(Tok::Equals, "`=`")?;
            let h = p.name()?;
            if !hypotheses.contains(h.as_str()) {
                return Err(DslError::UnknownName { line: line_no, name: h });
            }
            Some(h)
        } else {
            None
        };
        if !p.at_end() {
            return Err(p.error_here("unexpected trailing input"));
        }
        if !ids.insert(id.clone()) {
            return Err(DslError::DuplicateCaseId { line: line_no, id });
        }
        out.push(CaseInstance::new(rb, id, observed, target, label));
    }
    Ok(out)
}

// name=value [, name=value]*, possibly empty, up to `stop`
fn assignments(
    p: &mut Cursor<'_>,
    line: usize,
    known: &HashSet<&str>,
    stop: impl Fn(&Cursor<'_>) -> bool,
) -> Result<Vec<(String, f64)>, DslError> {
    let mut out: Vec<(String, f64)> = Vec::new();
    if stop(p) {
        return Ok(out);
    }
    loop {
        let name = p.name()?;
        p.expect(Tok::Equals, "`=`")?;
        let value = p.number()?;
        if !known.contains(name.as_str()) {
            return Err(DslError::UnknownName { line, name });
        }
        if !(-1.0..=1.0).contains(&value) {
            return Err(DslError::BeliefOutOfRange { line, name, value });
        }
        if out.iter().any(|(n, _)| *n == name) {
            return Err(p.error_here(&format!("`{name}` assigned twice")));
        }
        out.push((name, value));
        if p.peek() == Some(&Tok::Comma) {
            p.expect(Tok::Comma, "`,`")?;
        } else {
            break;
        }
    }
    Ok(out)
}

/// Writes cases in the same format `parse_cases` reads. Zero observed beliefs
/// are omitted; targets are always written in full.
pub fn serialize_cases(cases: &[CaseInstance]) -> String {
    let mut out = String::new();
    for case in cases {
        let observed: Vec<String> =
            case.observed.iter().filter(|(_, v)| **v != 0.0).map(|(k, v)| format!("{k}={v}")).collect();
        let target: Vec<String> = case.target.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(out, "case {}: {} => {}", case.id, observed.join(", "), target.join(", ")).unwrap();
        if let Some(label) = &case.label {
            write!(out, " label={label}").unwrap();
        }
        out.push('\n');
    }
    out
}
