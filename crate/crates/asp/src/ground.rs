//! Instantiation of programs over domain extensions.
//!
//! Choice rules become [`GroundChoice`]s. Test rule instances whose head
//! condition fails become [`Nogood`]s over their chosen-predicate body atoms;
//! instances whose head already holds, or whose body comparisons fail, vanish.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::eval::{evaluate_comparison, evaluate_term, Binding, EvalError, VarLookup};
use crate::syntax::{validate_safety, Atom, Comparison, Diagnostic, Literal, Program, Rule, Term};
use crate::value::{GroundAtom, Value};

/// Upper bound on atoms derived by definitions before grounding gives up.
const MAX_DERIVED_ATOMS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GroundError {
    #[error("program is not safe: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Unsafe(Vec<Diagnostic>),
    #[error("rule {rule}: {source} (binding {})", render_binding(.binding))]
    Eval {
        rule: usize,
        binding: Binding,
        source: EvalError,
    },
    #[error("rule {rule}: definitions derived more than {MAX_DERIVED_ATOMS} atoms")]
    TooLarge { rule: usize },
    #[error("grounding exceeded its {0:?} budget")]
    Timeout(Duration),
}

fn render_binding(b: &Binding) -> String {
    let parts: Vec<String> = b.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundChoice {
    /// Index of the originating choice rule.
    pub rule: usize,
    /// The body instance this choice belongs to, e.g. `E="Bonita"`.
    pub binding: Binding,
    /// Distinct head instances in canonical order.
    pub candidates: Vec<GroundAtom>,
    pub cardinality: u32,
}

/// Chosen atoms that must not all be true together.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Nogood {
    pub atoms: BTreeSet<GroundAtom>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundProgram {
    pub facts: BTreeSet<GroundAtom>,
    pub choices: Vec<GroundChoice>,
    /// Sorted and free of duplicates. An empty nogood means the tests are
    /// violated by the facts alone.
    pub nogoods: Vec<Nogood>,
}

impl GroundProgram {
    /// Canonical text dump: `FACT`, `CHOICE` and `NOGOOD` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for f in &self.facts {
            let _ = writeln!(out, "FACT {f}");
        }
        for c in &self.choices {
            let _ = writeln!(
                out,
                "CHOICE k={} [{}]",
                c.cardinality,
                join_atoms(&c.candidates)
            );
        }
        for n in &self.nogoods {
            let _ = writeln!(out, "NOGOOD [{}]", join_atoms(&n.atoms));
        }
        out
    }

    /// Every atom appearing as a choice candidate.
    pub fn candidate_atoms(&self) -> BTreeSet<&GroundAtom> {
        self.choices.iter().flat_map(|c| &c.candidates).collect()
    }
}

fn join_atoms<'a>(atoms: impl IntoIterator<Item = &'a GroundAtom>) -> String {
    atoms
        .into_iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Clone, Debug, Default)]
pub struct GroundOptions {
    /// Wall-clock budget for the whole instantiation.
    pub budget: Option<Duration>,
}

pub fn ground_program(p: &Program) -> Result<GroundProgram, GroundError> {
    ground_program_with(p, &GroundOptions::default())
}

pub fn ground_program_with(
    p: &Program,
    opts: &GroundOptions,
) -> Result<GroundProgram, GroundError> {
    let diagnostics = validate_safety(p);
    if !diagnostics.is_empty() {
        return Err(GroundError::Unsafe(diagnostics));
    }
    let mut clock = Clock::new(opts.budget);

    let mut domain: BTreeSet<GroundAtom> = BTreeSet::new();
    for (i, rule) in p.rules.iter().enumerate() {
        if let Rule::Fact(f) = rule {
            expand_fact(i, &f.predicate, &f.pools, &mut domain)?;
        }
    }
    derive_definitions(p, &mut domain, &mut clock)?;
    let domain_index = Extension::build(&domain);

    let mut choices = Vec::new();
    for (i, rule) in p.rules.iter().enumerate() {
        let Rule::Choice(c) = rule else { continue };
        let body_atoms = atoms_of(&c.body);
        let body_comps = comparisons_of(&c.body);
        let mut instances: Vec<Binding> = Vec::new();
        Join::new(i, &body_atoms, &body_comps, &mut clock).run(
            &domain_index,
            &mut |slots, _| {
                instances.push(slots.to_binding());
                Ok(())
            },
        )?;
        for binding in instances {
            let cond_refs: Vec<&Atom> = c.conditions.iter().collect();
            let mut candidates = BTreeSet::new();
            let mut join = Join::new(i, &cond_refs, &[], &mut clock);
            join.preset(&binding);
            join.run(&domain_index, &mut |slots, _| {
                candidates.insert(instantiate(i, &c.head, slots)?);
                Ok(())
            })?;
            choices.push(GroundChoice {
                rule: i,
                binding,
                candidates: candidates.into_iter().collect(),
                cardinality: c.cardinality,
            });
        }
    }

    let chosen_preds = p.chosen_predicates();
    let mut universe = domain.clone();
    universe.extend(choices.iter().flat_map(|c| c.candidates.iter().cloned()));
    let universe_index = Extension::build(&universe);

    let mut nogoods: BTreeSet<Nogood> = BTreeSet::new();
    for (i, rule) in p.rules.iter().enumerate() {
        let Rule::Test(t) = rule else { continue };
        let body_atoms = atoms_of(&t.body);
        let body_comps = comparisons_of(&t.body);
        Join::new(i, &body_atoms, &body_comps, &mut clock).run(
            &universe_index,
            &mut |slots, matched| {
                let mut holding = 0u32;
                for head in &t.heads {
                    if evaluate_comparison(head, slots).map_err(|e| slots.error(i, e))? {
                        holding += 1;
                    }
                }
                let satisfied = match t.cardinality {
                    None => holding >= 1,
                    Some(k) => holding == k,
                };
                if !satisfied {
                    let atoms = matched
                        .iter()
                        .filter(|a| chosen_preds.contains(&*a.predicate))
                        .map(|a| (*a).clone())
                        .collect();
                    nogoods.insert(Nogood { atoms });
                }
                Ok(())
            },
        )?;
    }

    Ok(GroundProgram {
        facts: domain,
        choices,
        nogoods: nogoods.into_iter().collect(),
    })
}

fn expand_fact(
    rule: usize,
    predicate: &str,
    pools: &[Vec<Term>],
    out: &mut BTreeSet<GroundAtom>,
) -> Result<(), GroundError> {
    let empty = Binding::new();
    let mut values: Vec<Vec<Value>> = Vec::with_capacity(pools.len());
    for pool in pools {
        let mut vs = Vec::with_capacity(pool.len());
        for t in pool {
            vs.push(
                evaluate_term(t, &empty).map_err(|source| GroundError::Eval {
                    rule,
                    binding: Binding::new(),
                    source,
                })?,
            );
        }
        values.push(vs);
    }
    // cartesian product across argument positions
    let mut tuples: Vec<Vec<Value>> = vec![Vec::new()];
    for vs in &values {
        tuples = tuples
            .into_iter()
            .flat_map(|prefix| {
                vs.iter().map(move |v| {
                    let mut t = prefix.clone();
                    t.push(v.clone());
                    t
                })
            })
            .collect();
    }
    out.extend(
        tuples
            .into_iter()
            .map(|args| GroundAtom::new(predicate, args)),
    );
    Ok(())
}

fn derive_definitions(
    p: &Program,
    domain: &mut BTreeSet<GroundAtom>,
    clock: &mut Clock,
) -> Result<(), GroundError> {
    let defs: Vec<(usize, &crate::syntax::DefineRule)> = p
        .rules
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Rule::Define(d) => Some((i, d)),
            _ => None,
        })
        .collect();
    if defs.is_empty() {
        return Ok(());
    }
    loop {
        let index = Extension::build(domain);
        let mut fresh = Vec::new();
        for &(i, d) in &defs {
            let atoms = atoms_of(&d.body);
            let comps = comparisons_of(&d.body);
            Join::new(i, &atoms, &comps, clock).run(&index, &mut |slots, _| {
                let a = instantiate(i, &d.head, slots)?;
                if !domain.contains(&a) {
                    fresh.push((i, a));
                }
                Ok(())
            })?;
        }
        if fresh.is_empty() {
            return Ok(());
        }
        for (i, a) in fresh {
            domain.insert(a);
            if domain.len() > MAX_DERIVED_ATOMS {
                return Err(GroundError::TooLarge { rule: i });
            }
        }
    }
}

fn atoms_of(body: &[Literal]) -> Vec<&Atom> {
    body.iter()
        .filter_map(|l| match l {
            Literal::Atom(a) => Some(a),
            _ => None,
        })
        .collect()
}

fn comparisons_of(body: &[Literal]) -> Vec<&Comparison> {
    body.iter()
        .filter_map(|l| match l {
            Literal::Comparison(c) => Some(c),
            _ => None,
        })
        .collect()
}

fn instantiate(rule: usize, atom: &Atom, slots: &Slots) -> Result<GroundAtom, GroundError> {
    let args = atom
        .args
        .iter()
        .map(|t| evaluate_term(t, slots))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| slots.error(rule, e))?;
    Ok(GroundAtom::new(&atom.predicate, args))
}

struct Clock {
    start: Instant,
    budget: Option<Duration>,
    ticks: u32,
}

impl Clock {
    fn new(budget: Option<Duration>) -> Self {
        Clock {
            start: Instant::now(),
            budget,
            ticks: 0,
        }
    }

    fn tick(&mut self) -> Result<(), GroundError> {
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks.is_multiple_of(4096) {
            if let Some(b) = self.budget {
                if self.start.elapsed() > b {
                    return Err(GroundError::Timeout(b));
                }
            }
        }
        Ok(())
    }
}

/// Ground atoms of each predicate, indexed by (position, value).
type OnMatch<'f, 'e> = dyn FnMut(&Slots, &[&'e GroundAtom]) -> Result<(), GroundError> + 'f;

struct Extension<'a> {
    preds: HashMap<&'a str, PredIndex<'a>>,
}

struct PredIndex<'a> {
    atoms: Vec<&'a GroundAtom>,
    by_position: Vec<HashMap<&'a Value, Vec<usize>>>,
}

impl<'a> Extension<'a> {
    fn build(atoms: &'a BTreeSet<GroundAtom>) -> Self {
        let mut preds: HashMap<&str, PredIndex> = HashMap::new();
        for a in atoms {
            let idx = preds.entry(&a.predicate).or_insert_with(|| PredIndex {
                atoms: Vec::new(),
                by_position: vec![HashMap::new(); a.args.len()],
            });
            if idx.by_position.len() != a.args.len() {
                continue;
            }
            let n = idx.atoms.len();
            idx.atoms.push(a);
            for (pos, v) in a.args.iter().enumerate() {
                idx.by_position[pos].entry(v).or_default().push(n);
            }
        }
        Extension { preds }
    }
}

/// Variable slots of one rule during a join.
struct Slots {
    names: Vec<String>,
    values: Vec<Option<Value>>,
}

impl Slots {
    fn slot(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn to_binding(&self) -> Binding {
        self.names
            .iter()
            .zip(&self.values)
            .filter_map(|(n, v)| v.clone().map(|v| (n.clone(), v)))
            .collect()
    }

    fn error(&self, rule: usize, source: EvalError) -> GroundError {
        GroundError::Eval {
            rule,
            binding: self.to_binding(),
            source,
        }
    }
}

impl VarLookup for Slots {
    fn lookup(&self, var: &str) -> Option<&Value> {
        self.slot(var).and_then(|i| self.values[i].as_ref())
    }
}

enum ArgPattern<'t> {
    Slot(usize),
    Term(&'t Term),
}

struct Step<'t> {
    predicate: &'t str,
    args: Vec<ArgPattern<'t>>,
    /// Comparisons that become fully bound once this step matched.
    checks: Vec<&'t Comparison>,
}

/// Nested-loop join of body atoms with comparisons evaluated as soon as
/// their variables are bound.
struct Join<'t, 'c> {
    rule: usize,
    slots: Slots,
    initial: Vec<&'t Comparison>,
    steps: Vec<Step<'t>>,
    clock: &'c mut Clock,
}

impl<'t, 'c> Join<'t, 'c> {
    fn new(
        rule: usize,
        atoms: &[&'t Atom],
        comps: &[&'t Comparison],
        clock: &'c mut Clock,
    ) -> Self {
        let mut names: Vec<String> = Vec::new();
        let mut all_vars = BTreeSet::new();
        atoms.iter().for_each(|a| a.collect_vars(&mut all_vars));
        comps.iter().for_each(|c| c.collect_vars(&mut all_vars));
        names.extend(all_vars.iter().map(|v| v.to_string()));

        // order atoms so that arithmetic arguments only see bound variables
        let mut remaining: Vec<&Atom> = atoms.to_vec();
        let mut bound: BTreeSet<&str> = BTreeSet::new();
        let mut ordered = Vec::new();
        while !remaining.is_empty() {
            let pick = remaining
                .iter()
                .position(|a| {
                    a.args.iter().all(|t| match t {
                        Term::Var(_) => true,
                        other => {
                            let mut vs = BTreeSet::new();
                            other.collect_vars(&mut vs);
                            vs.is_subset(&bound)
                        }
                    })
                })
                .unwrap_or(0);
            let a = remaining.remove(pick);
            a.binding_vars(&mut bound);
            ordered.push((a, bound.clone()));
        }

        let mut pending: Vec<&Comparison> = comps.to_vec();
        let mut take_ready = |bound: &BTreeSet<&str>| {
            let mut ready = Vec::new();
            pending.retain(|c| {
                let mut vs = BTreeSet::new();
                c.collect_vars(&mut vs);
                if vs.is_subset(bound) {
                    ready.push(*c);
                    false
                } else {
                    true
                }
            });
            ready
        };
        let initial = take_ready(&BTreeSet::new());
        let mut steps = Vec::new();
        for (a, bound_after) in ordered {
            let args = a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => ArgPattern::Slot(names.iter().position(|n| n == v).unwrap()),
                    other => ArgPattern::Term(other),
                })
                .collect();
            steps.push(Step {
                predicate: &a.predicate,
                args,
                checks: take_ready(&bound_after),
            });
        }
        // whatever is left references unbound variables; evaluating it at the
        // end surfaces the error with the binding attached
        if let Some(last) = steps.last_mut() {
            last.checks.extend(pending);
        }

        let values = vec![None; names.len()];
        Join {
            rule,
            slots: Slots { names, values },
            initial,
            steps,
            clock,
        }
    }

    fn preset(&mut self, binding: &Binding) {
        for (k, v) in binding {
            match self.slots.slot(k) {
                Some(i) => self.slots.values[i] = Some(v.clone()),
                None => {
                    self.slots.names.push(k.clone());
                    self.slots.values.push(Some(v.clone()));
                }
            }
        }
    }

    fn run<'e>(
        mut self,
        ext: &Extension<'e>,
        on_match: &mut OnMatch<'_, 'e>,
    ) -> Result<(), GroundError> {
        for c in &self.initial {
            let ok =
                evaluate_comparison(c, &self.slots).map_err(|e| self.slots.error(self.rule, e))?;
            if !ok {
                return Ok(());
            }
        }
        let mut matched = Vec::with_capacity(self.steps.len());
        self.descend(0, ext, &mut matched, on_match)
    }

    fn descend<'e>(
        &mut self,
        depth: usize,
        ext: &Extension<'e>,
        matched: &mut Vec<&'e GroundAtom>,
        on_match: &mut OnMatch<'_, 'e>,
    ) -> Result<(), GroundError> {
        if depth == self.steps.len() {
            return on_match(&self.slots, matched);
        }
        let step = &self.steps[depth];
        let Some(pred) = ext.preds.get(step.predicate) else {
            return Ok(());
        };
        if pred.by_position.len() != step.args.len() {
            return Ok(());
        }

        // resolve whatever is already determined
        let mut fixed: Vec<Option<Value>> = Vec::with_capacity(step.args.len());
        for arg in &step.args {
            fixed.push(match arg {
                ArgPattern::Slot(i) => self.slots.values[*i].clone(),
                ArgPattern::Term(t) => Some(
                    evaluate_term(t, &self.slots).map_err(|e| self.slots.error(self.rule, e))?,
                ),
            });
        }
        let candidates: Vec<usize> = match fixed
            .iter()
            .enumerate()
            .find_map(|(pos, v)| v.as_ref().map(|v| (pos, v)))
        {
            Some((pos, v)) => pred.by_position[pos].get(v).cloned().unwrap_or_default(),
            None => (0..pred.atoms.len()).collect(),
        };

        for idx in candidates {
            self.clock.tick()?;
            let atom = pred.atoms[idx];
            let mut newly = Vec::new();
            let mut ok = true;
            for (pos, arg) in self.steps[depth].args.iter().enumerate() {
                let value = &atom.args[pos];
                match (arg, &fixed[pos]) {
                    (_, Some(f)) if f != value => {
                        ok = false;
                        break;
                    }
                    (_, Some(_)) => {}
                    (ArgPattern::Slot(i), None) => match &self.slots.values[*i] {
                        // repeated variable bound earlier in this atom
                        Some(existing) if existing != value => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            self.slots.values[*i] = Some(value.clone());
                            newly.push(*i);
                        }
                    },
                    (ArgPattern::Term(_), None) => unreachable!("terms are always resolved"),
                }
            }
            if ok {
                for c in &self.steps[depth].checks {
                    match evaluate_comparison(c, &self.slots) {
                        Ok(true) => {}
                        Ok(false) => {
                            ok = false;
                            break;
                        }
                        Err(e) => return Err(self.slots.error(self.rule, e)),
                    }
                }
            }
            if ok {
                matched.push(atom);
                self.descend(depth + 1, ext, matched, on_match)?;
                matched.pop();
            }
            for i in newly {
                self.slots.values[i] = None;
            }
        }
        Ok(())
    }
}
