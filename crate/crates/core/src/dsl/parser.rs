use super::lexer::{tokenize, Tok, Token};
use super::DslError;
use crate::rulebase::{Clause, Premise, Rule, RuleBase, ValidationOptions};

pub(crate) const DEFAULT_NAME: &str = "rulebase";

/// Parses and validates rule-base source with default validation options.
pub fn parse_rulebase(text: &str) -> Result<RuleBase, DslError> {
    parse_rulebase_with(text, ValidationOptions::default())
}

pub fn parse_rulebase_with(text: &str, options: ValidationOptions) -> Result<RuleBase, DslError> {
    let tokens = tokenize(text, 1)?;
    let mut p = Cursor::new(&tokens);

    let mut name = None;
    let mut attributes = Vec::new();
    let mut hypotheses = Vec::new();
    let mut concepts = Vec::new();
    let mut rules = Vec::new();

    while !p.at_end() {
        let keyword = p.ident("statement keyword")?;
        match keyword.as_str() {
            "attr" => attributes.push(p.name()?),
            "hypo" => hypotheses.push(p.name()?),
            "concept" => concepts.push(p.name()?),
            "base" => {
                if name.is_some() {
                    return Err(p.error_prev("`base` given twice"));
                }
                name = Some(p.name()?);
            }
            "rule" => {
                rules.push(p.rule()?);
                continue;
            }
            other => return Err(p.error_prev(&format!("unknown statement `{other}`"))),
        }
        p.expect(Tok::Dot, "`.`")?;
    }

    RuleBase::build(name.unwrap_or_else(|| DEFAULT_NAME.to_owned()), attributes, hypotheses, concepts, rules, options)
}

pub(crate) struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(tokens: &'a [Token]) -> Self {
        Cursor { tokens, pos: 0 }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    pub(crate) fn peek_is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    pub(crate) fn error_here(&self, message: &str) -> DslError {
        match self.tokens.get(self.pos).or(self.tokens.last()) {
            Some(t) => DslError::Syntax { line: t.line, column: t.column, message: message.to_owned() },
            None => DslError::Syntax { line: 1, column: 1, message: message.to_owned() },
        }
    }

    fn error_prev(&self, message: &str) -> DslError {
        let t = &self.tokens[self.pos.saturating_sub(1)];
        DslError::Syntax { line: t.line, column: t.column, message: message.to_owned() }
    }

    pub(crate) fn expect(&mut self, tok: Tok, what: &str) -> Result<(), DslError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(&format!("expected {what}")))
        }
    }

    pub(crate) fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        if self.peek_is_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(&format!("expected `{kw}`")))
        }
    }

    pub(crate) fn ident(&mut self, what: &str) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error_here(&format!("expected {what}"))),
        }
    }

    /// Identifier that is not a reserved word.
    pub(crate) fn name(&mut self) -> Result<String, DslError> {
        let s = self.ident("name")?;
        if super::KEYWORDS.contains(&s.as_str()) {
            return Err(self.error_prev(&format!("reserved word `{s}` used as a name")));
        }
        Ok(s)
    }

    pub(crate) fn number(&mut self) -> Result<f64, DslError> {
        match self.bump() {
            Some(Token { tok: Tok::Number(v), .. }) => Ok(*v),
            _ => {
                self.pos -= 1;
                Err(self.error_here("expected number"))
            }
        }
    }

    // rule <id>: IF <clause> [AND <clause>]* THEN <name> (<strength>).
    fn rule(&mut self) -> Result<Rule, DslError> {
        let id = self.name()?;
        self.expect(Tok::Colon, "`:`")?;
        self.keyword("IF")?;
        let mut clauses = vec![self.clause()?];
        while self.peek_is_keyword("AND") {
            self.pos += 1;
            clauses.push(self.clause()?);
        }
        self.keyword("THEN")?;
        let conclusion = self.name()?;
        self.expect(Tok::LParen, "`(` before strength")?;
        let strength = self.number()?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Dot, "`.`")?;
        Ok(Rule::new(id, Premise(clauses), conclusion, strength))
    }

    // <atom> | ( <atom> [OR <atom>]+ )
    fn clause(&mut self) -> Result<Clause, DslError> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let mut atoms = vec![self.name()?];
            while self.peek_is_keyword("OR") {
                self.pos += 1;
                atoms.push(self.name()?);
            }
            if atoms.len() < 2 {
                return Err(self.error_here("expected `OR` inside parenthesised clause"));
            }
            self.expect(Tok::RParen, "`)`")?;
            Ok(Clause(atoms))
        } else {
            Ok(Clause::atom(self.name()?))
        }
    }
}
