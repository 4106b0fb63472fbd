//! Abstract syntax of the generate-define-test fragment.
//!
//! Programs consist of pooled facts, exactly-k choice rules and
//! comparison-headed test rules. Atom-headed rules whose bodies range over
//! domain predicates are also accepted; they extend the domain before
//! choices are instantiated.

mod lexer;
mod parser;
mod safety;

use std::collections::BTreeSet;
use std::fmt::{self, Write};

pub use parser::{parse_program, SyntaxError};
pub use safety::{validate_safety, Diagnostic, DiagnosticKind};

use crate::value::write_quoted;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Integer division truncating toward zero.
    Div,
    /// Remainder with the sign of the dividend, written `\`.
    Rem,
}

impl ArithOp {
    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div | ArithOp::Rem => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Rem => "\\",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Int(i64),
    /// String constant, stored without the surrounding quotes.
    Str(String),
    Var(String),
    Arith(ArithOp, Box<Term>, Box<Term>),
    Abs(Box<Term>),
    /// Only valid as a whole operand of `=` or `!=`; at least two elements.
    Tuple(Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn str(s: &str) -> Self {
        Term::Str(s.to_string())
    }

    pub fn arith(op: ArithOp, lhs: Term, rhs: Term) -> Self {
        Term::Arith(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Int(_) | Term::Str(_) => true,
            Term::Var(_) => false,
            Term::Arith(_, l, r) => l.is_ground() && r.is_ground(),
            Term::Abs(t) => t.is_ground(),
            Term::Tuple(ts) => ts.iter().all(Term::is_ground),
        }
    }

    pub fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Int(_) | Term::Str(_) => {}
            Term::Var(v) => {
                out.insert(v);
            }
            Term::Arith(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Term::Abs(t) => t.collect_vars(out),
            Term::Tuple(ts) => ts.iter().for_each(|t| t.collect_vars(out)),
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        match self {
            Term::Int(i) => write!(f, "{i}"),
            Term::Str(s) => write_quoted(f, s),
            Term::Var(v) => f.write_str(v),
            Term::Arith(op, l, r) => {
                let p = op.precedence();
                let paren = p < ctx;
                if paren {
                    f.write_char('(')?;
                }
                l.write_prec(f, p)?;
                f.write_str(op.symbol())?;
                // right operands of equal precedence keep their grouping
                r.write_prec(f, p + 1)?;
                if paren {
                    f.write_char(')')?;
                }
                Ok(())
            }
            Term::Abs(t) => {
                f.write_char('|')?;
                t.write_prec(f, 0)?;
                f.write_char('|')
            }
            Term::Tuple(ts) => {
                f.write_char('(')?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    t.write_prec(f, 0)?;
                }
                f.write_char(')')
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CompOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompOp::Eq => "=",
            CompOp::Ne => "!=",
            CompOp::Lt => "<",
            CompOp::Gt => ">",
            CompOp::Le => "<=",
            CompOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CompOp::Eq | CompOp::Ne)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub lhs: Term,
    pub op: CompOp,
    pub rhs: Term,
}

impl Comparison {
    pub fn new(lhs: Term, op: CompOp, rhs: Term) -> Self {
        Comparison { lhs, op, rhs }
    }

    pub fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        self.lhs.collect_vars(out);
        self.rhs.collect_vars(out);
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.lhs, self.op.symbol(), self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.to_string(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        self.args.iter().for_each(|t| t.collect_vars(out));
    }

    /// Variables occurring as a whole argument, which matching can bind.
    pub fn binding_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        for t in &self.args {
            if let Term::Var(v) = t {
                out.insert(v);
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_char('(')?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_char(',')?;
            }
            write!(f, "{t}")?;
        }
        f.write_char(')')
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Atom(Atom),
    Comparison(Comparison),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom(a) => a.fmt(f),
            Literal::Comparison(c) => c.fmt(f),
        }
    }
}

/// `p(a; b; c).` with one pool per argument position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fact {
    pub predicate: String,
    pub pools: Vec<Vec<Term>>,
}

/// `{head: conditions}=k :- body.`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChoiceRule {
    pub head: Atom,
    pub conditions: Vec<Atom>,
    pub cardinality: u32,
    pub body: Vec<Literal>,
}

/// `C1; ...; Cm :- body.` or `{C1; ...; Cm}=k :- body.`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TestRule {
    pub heads: Vec<Comparison>,
    /// `None` reads as "at least one head holds", `Some(k)` as "exactly k hold".
    pub cardinality: Option<u32>,
    pub body: Vec<Literal>,
}

/// `head :- body.` where every body atom is a domain predicate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DefineRule {
    pub head: Atom,
    pub body: Vec<Literal>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Fact(Fact),
    Choice(ChoiceRule),
    Test(TestRule),
    Define(DefineRule),
}

impl Rule {
    pub fn body(&self) -> &[Literal] {
        match self {
            Rule::Fact(_) => &[],
            Rule::Choice(c) => &c.body,
            Rule::Test(t) => &t.body,
            Rule::Define(d) => &d.body,
        }
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &[Literal]) -> fmt::Result {
    if body.is_empty() {
        return f.write_char('.');
    }
    f.write_str(" :- ")?;
    for (i, l) in body.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{l}")?;
    }
    f.write_char('.')
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Fact(fact) => {
                f.write_str(&fact.predicate)?;
                if !fact.pools.is_empty() {
                    f.write_char('(')?;
                    for (i, pool) in fact.pools.iter().enumerate() {
                        if i > 0 {
                            f.write_char(',')?;
                        }
                        for (j, t) in pool.iter().enumerate() {
                            if j > 0 {
                                f.write_str("; ")?;
                            }
                            write!(f, "{t}")?;
                        }
                    }
                    f.write_char(')')?;
                }
                f.write_char('.')
            }
            Rule::Choice(c) => {
                write!(f, "{{{}", c.head)?;
                for (i, a) in c.conditions.iter().enumerate() {
                    f.write_str(if i == 0 { ": " } else { ", " })?;
                    write!(f, "{a}")?;
                }
                write!(f, "}}={}", c.cardinality)?;
                write_body(f, &c.body)
            }
            Rule::Test(t) => {
                if t.cardinality.is_some() {
                    f.write_char('{')?;
                }
                for (i, c) in t.heads.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{c}")?;
                }
                if let Some(k) = t.cardinality {
                    write!(f, "}}={k}")?;
                }
                write_body(f, &t.body)
            }
            Rule::Define(d) => {
                write!(f, "{}", d.head)?;
                write_body(f, &d.body)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Self {
        Program { rules }
    }

    /// Predicates defined by facts or definitions.
    pub fn domain_predicates(&self) -> BTreeSet<&str> {
        self.rules
            .iter()
            .filter_map(|r| match r {
                Rule::Fact(f) => Some(f.predicate.as_str()),
                Rule::Define(d) => Some(d.head.predicate.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Predicates appearing in choice-rule heads.
    pub fn chosen_predicates(&self) -> BTreeSet<&str> {
        self.rules
            .iter()
            .filter_map(|r| match r {
                Rule::Choice(c) => Some(c.head.predicate.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Appends the rules of `other`, as when joining a generate part with a
    /// define-and-test part.
    pub fn extend(&mut self, other: Program) {
        self.rules.extend(other.rules);
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Canonical concrete syntax, one rule per line.
pub fn render_program(p: &Program) -> String {
    p.to_string()
}
