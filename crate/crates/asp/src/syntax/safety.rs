use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Atom, Literal, Program, Rule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagnosticKind {
    /// A variable that no positive body (or condition) atom binds.
    UnsafeVariable,
    ArityMismatch,
    /// A body or condition atom over a predicate no fact, definition or
    /// choice rule introduces.
    UnknownPredicate,
    /// A predicate that is both a fact/definition head and a choice head.
    DomainChosenOverlap,
    /// A chosen predicate used where only domain predicates can be
    /// instantiated: choice bodies and conditions, definition bodies.
    ChosenInDomainContext,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Diagnostic {
    pub rule: usize,
    pub kind: DiagnosticKind,
    /// The offending variable or predicate name.
    pub subject: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            DiagnosticKind::UnsafeVariable => "unsafe variable",
            DiagnosticKind::ArityMismatch => "arity mismatch for predicate",
            DiagnosticKind::UnknownPredicate => "unknown predicate",
            DiagnosticKind::DomainChosenOverlap => "predicate is both domain and chosen",
            DiagnosticKind::ChosenInDomainContext => "chosen predicate used in a domain position",
        };
        write!(f, "rule {}: {what} `{}`", self.rule, self.subject)
    }
}

/// Checks variable safety and predicate declarations. An empty result means
/// the program can be grounded.
pub fn validate_safety(p: &Program) -> Vec<Diagnostic> {
    let domain = p.domain_predicates();
    let chosen = p.chosen_predicates();
    let mut out = BTreeSet::new();
    let mut push = |rule: usize, kind, subject: &str| {
        out.insert(Diagnostic {
            rule,
            kind,
            subject: subject.to_string(),
        });
    };

    let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, rule) in p.rules.iter().enumerate() {
        for (pred, arity) in occurrences(rule) {
            let expected = *arities.entry(pred).or_insert(arity);
            if expected != arity {
                push(i, DiagnosticKind::ArityMismatch, pred);
            }
        }
    }

    for (i, rule) in p.rules.iter().enumerate() {
        let body_atoms: Vec<&Atom> = rule
            .body()
            .iter()
            .filter_map(|l| match l {
                Literal::Atom(a) => Some(a),
                Literal::Comparison(_) => None,
            })
            .collect();
        let mut bound = BTreeSet::new();
        body_atoms.iter().for_each(|a| a.binding_vars(&mut bound));

        let mut used = BTreeSet::new();
        for l in rule.body() {
            match l {
                Literal::Atom(a) => a.collect_vars(&mut used),
                Literal::Comparison(c) => c.collect_vars(&mut used),
            }
        }

        let mut referenced: Vec<&Atom> = body_atoms.clone();
        let domain_only = match rule {
            Rule::Fact(f) => {
                for t in f.pools.iter().flatten() {
                    t.collect_vars(&mut used);
                }
                false
            }
            Rule::Choice(c) => {
                c.head.collect_vars(&mut used);
                for a in &c.conditions {
                    a.binding_vars(&mut bound);
                    a.collect_vars(&mut used);
                }
                referenced.extend(&c.conditions);
                if domain.contains(c.head.predicate.as_str()) {
                    push(i, DiagnosticKind::DomainChosenOverlap, &c.head.predicate);
                }
                true
            }
            Rule::Test(t) => {
                t.heads.iter().for_each(|c| c.collect_vars(&mut used));
                false
            }
            Rule::Define(d) => {
                d.head.collect_vars(&mut used);
                if chosen.contains(d.head.predicate.as_str()) {
                    push(i, DiagnosticKind::DomainChosenOverlap, &d.head.predicate);
                }
                true
            }
        };
        if let Rule::Fact(f) = rule {
            if chosen.contains(f.predicate.as_str()) {
                push(i, DiagnosticKind::DomainChosenOverlap, &f.predicate);
            }
        }

        for v in used.difference(&bound) {
            push(i, DiagnosticKind::UnsafeVariable, v);
        }
        for a in referenced {
            let pred = a.predicate.as_str();
            let is_domain = domain.contains(pred);
            let is_chosen = chosen.contains(pred);
            if !is_domain && !is_chosen {
                push(i, DiagnosticKind::UnknownPredicate, pred);
            } else if domain_only && is_chosen && !is_domain {
                push(i, DiagnosticKind::ChosenInDomainContext, pred);
            }
        }
    }
    out.into_iter().collect()
}

fn occurrences(rule: &Rule) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    match rule {
        Rule::Fact(f) => out.push((f.predicate.as_str(), f.pools.len())),
        Rule::Choice(c) => {
            out.push((c.head.predicate.as_str(), c.head.arity()));
            out.extend(
                c.conditions
                    .iter()
                    .map(|a| (a.predicate.as_str(), a.arity())),
            );
        }
        Rule::Define(d) => out.push((d.head.predicate.as_str(), d.head.arity())),
        Rule::Test(_) => {}
    }
    for l in rule.body() {
        if let Literal::Atom(a) = l {
            out.push((a.predicate.as_str(), a.arity()));
        }
    }
    out
}
