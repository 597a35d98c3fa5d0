//! Control-group predicate rules and the majority-vote pseudo-label
//! assignment. Rules are data, not code: a minimal infix grammar over
//! comparisons `(x1 >= 4) & ((x2 >= 4) | (x3 >= 4))` with `&` binding tighter
//! than `|`, loaded from plain-text files with `[confusion]` /
//! `[no_confusion]` sections.
//!
//! Comparisons are evaluated over reals so half-point annotation scores work
//! unchanged.

use std::fmt;

use crate::corpus::Judgment;

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("rule parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("factor x{index} out of range: {value}")]
    RangeViolation { index: usize, value: f64 },
    #[error("rule set must declare at least one rule per outcome")]
    EmptyOutcome,
    #[error("majority vote over an empty list")]
    EmptyVotes,
}

/// Scores X1..X5: goods/services, visual, phonetic, conceptual, attention.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FactorVector {
    pub values: [f64; 5],
}

impl FactorVector {
    pub fn new(values: [f64; 5]) -> Self {
        Self { values }
    }

    /// X1, X2, X5 live on [1,5]; X3, X4 admit 0 ("neutral").
    pub fn validate(&self) -> Result<(), RuleError> {
        for (i, &v) in self.values.iter().enumerate() {
            let min = if i == 2 || i == 3 { 0.0 } else { 1.0 };
            if !v.is_finite() || v < min || v > 5.0 {
                return Err(RuleError::RangeViolation {
                    index: i + 1,
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// 1-based access: x(1) is X1.
    pub fn x(&self, index: usize) -> f64 {
        self.values[index - 1]
    }
}

impl From<[f64; 5]> for FactorVector {
    fn from(values: [f64; 5]) -> Self {
        Self { values }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

/// Boolean expression tree over comparisons (xi op c).
#[derive(Clone, Debug, PartialEq)]
pub enum RulePredicate {
    Compare {
        factor: usize,
        op: CompareOp,
        constant: f64,
    },
    And(Box<RulePredicate>, Box<RulePredicate>),
    Or(Box<RulePredicate>, Box<RulePredicate>),
}

impl RulePredicate {
    pub fn eval(&self, x: &FactorVector) -> bool {
        match self {
            RulePredicate::Compare {
                factor,
                op,
                constant,
            } => op.eval(x.x(*factor), *constant),
            RulePredicate::And(a, b) => a.eval(x) && b.eval(x),
            RulePredicate::Or(a, b) => a.eval(x) || b.eval(x),
        }
    }
}

impl fmt::Display for RulePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RulePredicate::Compare {
                factor,
                op,
                constant,
            } => write!(f, "(x{} {} {})", factor, op.symbol(), constant),
            RulePredicate::And(a, b) => write!(f, "({} & {})", a, b),
            RulePredicate::Or(a, b) => write!(f, "({} | {})", a, b),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Confusion,
    NoConfusion,
    Undetermined,
    Conflict,
}

impl Outcome {
    pub fn is_decided(self) -> bool {
        matches!(self, Outcome::Confusion | Outcome::NoConfusion)
    }
}

#[derive(Clone, Debug)]
pub struct RuleSet {
    pub annotator: String,
    pub confusion_rules: Vec<RulePredicate>,
    pub no_confusion_rules: Vec<RulePredicate>,
}

impl RuleSet {
    pub fn validate(&self) -> Result<(), RuleError> {
        if self.confusion_rules.is_empty() || self.no_confusion_rules.is_empty() {
            return Err(RuleError::EmptyOutcome);
        }
        Ok(())
    }
}

/// Confusion if any confusion rule fires and no no-confusion rule does;
/// symmetric for no-confusion; Conflict when both sides fire; Undetermined
/// when neither.
pub fn evaluate_rules(ruleset: &RuleSet, x: &FactorVector) -> Result<Outcome, RuleError> {
    x.validate()?;
    let confusion = ruleset.confusion_rules.iter().any(|r| r.eval(x));
    let no_confusion = ruleset.no_confusion_rules.iter().any(|r| r.eval(x));
    Ok(match (confusion, no_confusion) {
        (true, false) => Outcome::Confusion,
        (false, true) => Outcome::NoConfusion,
        (true, true) => Outcome::Conflict,
        (false, false) => Outcome::Undetermined,
    })
}

/// Tie policy for majority voting.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// The conservative legal outcome.
    #[default]
    NoConfusion,
    Confusion,
}

pub fn majority_label(votes: &[Judgment], tie: TiePolicy) -> Result<Judgment, RuleError> {
    if votes.is_empty() {
        return Err(RuleError::EmptyVotes);
    }
    let confusion = votes.iter().filter(|&&v| v == Judgment::Confusion).count();
    let no_confusion = votes.len() - confusion;
    Ok(if confusion > no_confusion {
        Judgment::Confusion
    } else if no_confusion > confusion {
        Judgment::NoConfusion
    } else {
        match tie {
            TiePolicy::NoConfusion => Judgment::NoConfusion,
            TiePolicy::Confusion => Judgment::Confusion,
        }
    })
}

// ---------------------------------------------------------------------------
// Rule file parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    line: usize,
    src: &'a str,
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    LParen,
    RParen,
    And,
    Or,
    Factor(usize),
    Op(CompareOp),
    Number(f64),
}

fn lex(line_no: usize, text: &str) -> Result<Vec<Token>, RuleError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let err = |msg: String| RuleError::Parse {
        line: line_no,
        msg,
    };
    while let Some(&c) = chars.peek() {
        match c {
            ' ' | '\t' => {
                chars.next();
            }
            '(' => {
                chars.next();
                tokens.push(Token::LParen);
            }
            ')' => {
                chars.next();
                tokens.push(Token::RParen);
            }
            '&' => {
                chars.next();
                tokens.push(Token::And);
            }
            '|' => {
                chars.next();
                tokens.push(Token::Or);
            }
            '<' | '>' => {
                chars.next();
                let eq = chars.peek() == Some(&'=');
                if eq {
                    chars.next();
                }
                tokens.push(Token::Op(match (c, eq) {
                    ('<', false) => CompareOp::Lt,
                    ('<', true) => CompareOp::Le,
                    ('>', false) => CompareOp::Gt,
                    _ => CompareOp::Ge,
                }));
            }
            'x' | 'X' => {
                chars.next();
                let mut digits = String::new();
                while chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    digits.push(chars.next().unwrap());
                }
                let index: usize = digits
                    .parse()
                    .map_err(|_| err(format!("bad factor reference 'x{}'", digits)))?;
                if !(1..=5).contains(&index) {
                    return Err(err(format!("factor x{} out of x1..x5", index)));
                }
                tokens.push(Token::Factor(index));
            }
            d if d.is_ascii_digit() => {
                let mut digits = String::new();
                while chars
                    .peek()
                    .is_some_and(|d| d.is_ascii_digit() || *d == '.')
                {
                    digits.push(chars.next().unwrap());
                }
                let value: f64 = digits
                    .parse()
                    .map_err(|_| err(format!("bad constant '{}'", digits)))?;
                if !(0.0..=5.0).contains(&value) {
                    return Err(err(format!("constant {} outside [0, 5]", value)));
                }
                tokens.push(Token::Number(value));
            }
            other => return Err(err(format!("unexpected character '{}'", other))),
        }
    }
    Ok(tokens)
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> RuleError {
        RuleError::Parse {
            line: self.line,
            msg: format!("{} in '{}'", msg.into(), self.src.trim()),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    // expr := term ('|' term)*
    fn expr(&mut self) -> Result<RulePredicate, RuleError> {
        let mut lhs = self.term()?;
        while self.peek() == Some(&Token::Or) {
            self.next();
            let rhs = self.term()?;
            lhs = RulePredicate::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // term := atom ('&' atom)*
    fn term(&mut self) -> Result<RulePredicate, RuleError> {
        let mut lhs = self.atom()?;
        while self.peek() == Some(&Token::And) {
            self.next();
            let rhs = self.atom()?;
            lhs = RulePredicate::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // atom := '(' expr ')' | comparison
    fn atom(&mut self) -> Result<RulePredicate, RuleError> {
        match self.peek() {
            Some(Token::LParen) => {
                self.next();
                let inner = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(self.err("expected ')'")),
                }
            }
            Some(Token::Factor(_)) => self.comparison(),
            _ => Err(self.err("expected '(' or factor")),
        }
    }

    fn comparison(&mut self) -> Result<RulePredicate, RuleError> {
        let Some(Token::Factor(factor)) = self.next() else {
            return Err(self.err("expected factor"));
        };
        let Some(Token::Op(op)) = self.next() else {
            return Err(self.err("expected comparison operator"));
        };
        let Some(Token::Number(constant)) = self.next() else {
            return Err(self.err("expected numeric constant"));
        };
        Ok(RulePredicate::Compare {
            factor,
            op,
            constant,
        })
    }
}

/// Parse a single predicate line.
pub fn parse_predicate(line_no: usize, text: &str) -> Result<RulePredicate, RuleError> {
    let tokens = lex(line_no, text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        line: line_no,
        src: text,
    };
    let pred = parser.expr()?;
    if parser.peek().is_some() {
        return Err(parser.err("trailing tokens"));
    }
    Ok(pred)
}

/// Parse a whole rule file: `annotator = <id>` header, then `[confusion]`
/// and `[no_confusion]` sections with one predicate per line.
pub fn parse_rule_file(content: &str) -> Result<RuleSet, RuleError> {
    let mut annotator = None;
    let mut section: Option<bool> = None; // true = confusion
    let mut confusion = Vec::new();
    let mut no_confusion = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("annotator") {
            let rest = rest.trim();
            let Some(value) = rest.strip_prefix('=') else {
                return Err(RuleError::Parse {
                    line: line_no,
                    msg: "expected 'annotator = <id>'".into(),
                });
            };
            annotator = Some(value.trim().to_string());
            continue;
        }
        match line {
            "[confusion]" => {
                section = Some(true);
                continue;
            }
            "[no_confusion]" => {
                section = Some(false);
                continue;
            }
            _ => {}
        }
        let Some(is_confusion) = section else {
            return Err(RuleError::Parse {
                line: line_no,
                msg: "predicate outside of a [confusion]/[no_confusion] section".into(),
            });
        };
        let pred = parse_predicate(line_no, line)?;
        if is_confusion {
            confusion.push(pred);
        } else {
            no_confusion.push(pred);
        }
    }
    let ruleset = RuleSet {
        annotator: annotator.unwrap_or_default(),
        confusion_rules: confusion,
        no_confusion_rules: no_confusion,
    };
    ruleset.validate()?;
    Ok(ruleset)
}

/// Serialize a rule set back to the file grammar.
pub fn format_rule_file(ruleset: &RuleSet) -> String {
    let mut out = format!("annotator = {}\n\n[confusion]\n", ruleset.annotator);
    for r in &ruleset.confusion_rules {
        out.push_str(&format!("{}\n", r));
    }
    out.push_str("\n[no_confusion]\n");
    for r in &ruleset.no_confusion_rules {
        out.push_str(&format!("{}\n", r));
    }
    out
}

/// The control-group rule sets shipped with the crate.
pub mod builtin {
    use super::{parse_rule_file, RuleSet};

    /// Annotator 1, verbatim. The third confusion predicate reads oddly
    /// (any factor below 2 implying confusion) but is kept as listed.
    pub const ANNOTATOR_1: &str = "\
annotator = 1

[confusion]
(x1 >= 4) & ((x2 >= 4) | (x3 >= 4))
(x1 >= 4) | (x2 >= 4) | (x3 >= 4) | (x4 >= 4) | (x5 >= 4)
(x1 < 2) | (x2 < 2) | (x3 < 2) | (x4 < 2) | (x5 < 2)

[no_confusion]
(x1 >= 4) & ((x2 < 2) | (x3 < 2))
";

    /// Annotator 2, verbatim. The second confusion predicate also appears in
    /// the no-confusion column; the duplication is preserved.
    pub const ANNOTATOR_2: &str = "\
annotator = 2

[confusion]
(x1 > 3) & (x5 > 3) & (x2 >= 3) & (x3 >= 3) & (x4 >= 3)
(x1 >= 4) & (x2 <= 2) & (x3 <= 2) & (x4 <= 2)

[no_confusion]
(x1 >= 4) & (x2 <= 2) & (x3 <= 2) & (x4 <= 2)
";

    /// Annotator 1 with the third listed confusion predicate moved to the
    /// no-confusion side, its plain reading.
    pub const RECONCILED: &str = "\
annotator = 1-reconciled

[confusion]
(x1 >= 4) & ((x2 >= 4) | (x3 >= 4))
(x1 >= 4) | (x2 >= 4) | (x3 >= 4) | (x4 >= 4) | (x5 >= 4)

[no_confusion]
(x1 >= 4) & ((x2 < 2) | (x3 < 2))
(x1 < 2) | (x2 < 2) | (x3 < 2) | (x4 < 2) | (x5 < 2)
";

    pub fn annotator_1() -> RuleSet {
        parse_rule_file(ANNOTATOR_1).expect("built-in rule set")
    }

    pub fn annotator_2() -> RuleSet {
        parse_rule_file(ANNOTATOR_2).expect("built-in rule set")
    }

    pub fn reconciled() -> RuleSet {
        parse_rule_file(RECONCILED).expect("built-in rule set")
    }

    pub fn by_name(name: &str) -> Option<RuleSet> {
        match name {
            "annotator1" => Some(annotator_1()),
            "annotator2" => Some(annotator_2()),
            "reconciled" => Some(reconciled()),
            _ => None,
        }
    }
}
