//! Backtracking model enumeration over choices and nogoods.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::ground::GroundProgram;
use crate::value::GroundAtom;

pub const DEFAULT_LIMIT: usize = 2;
pub const DEFAULT_BUDGET: Duration = Duration::from_secs(10);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StableModel {
    /// Facts plus chosen atoms.
    pub atoms: BTreeSet<GroundAtom>,
}

impl StableModel {
    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    /// Atoms of the given predicate, in canonical order.
    pub fn with_predicate<'a>(
        &'a self,
        predicate: &'a str,
    ) -> impl Iterator<Item = &'a GroundAtom> + 'a {
        self.atoms
            .iter()
            .filter(move |a| &*a.predicate == predicate)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub decisions: u64,
    pub propagations: u64,
    #[serde(with = "duration_secs")]
    pub elapsed: Duration,
}

mod duration_secs {
    use serde::Serializer;
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub models: Vec<StableModel>,
    /// True iff the whole search space was explored.
    pub exhausted: bool,
    pub stats: SolveStats,
}

impl SolveResult {
    /// Models separated by `----` and a trailing `MODELS <n> EXHAUSTED <bool>` line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, m) in self.models.iter().enumerate() {
            if i > 0 {
                out.push_str("----\n");
            }
            for a in &m.atoms {
                let _ = writeln!(out, "{a}");
            }
        }
        let _ = writeln!(
            out,
            "MODELS {} EXHAUSTED {}",
            self.models.len(),
            self.exhausted
        );
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("solving exceeded its {0:?} budget")]
    Timeout(Duration),
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Stop after this many models. `usize::MAX` enumerates all.
    pub limit: usize,
    pub budget: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            limit: DEFAULT_LIMIT,
            budget: Some(DEFAULT_BUDGET),
        }
    }
}

/// Enumerates up to `limit` models without a time budget.
pub fn enumerate_models(g: &GroundProgram, limit: usize) -> Result<SolveResult, SolveError> {
    enumerate_models_with(
        g,
        &SolveOptions {
            limit,
            budget: None,
        },
    )
}

pub fn enumerate_models_with(
    g: &GroundProgram,
    opts: &SolveOptions,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let mut engine = Engine::new(g);
    let mut search = Search {
        limit: opts.limit,
        budget: opts.budget,
        start,
        models: Vec::new(),
    };
    let exhausted = if opts.limit == 0 {
        false
    } else if engine.initialise() {
        search.run(&mut engine, 0)?
    } else {
        true
    };
    let models = search
        .models
        .into_iter()
        .map(|chosen| {
            let mut atoms = g.facts.clone();
            atoms.extend(chosen);
            StableModel { atoms }
        })
        .collect();
    Ok(SolveResult {
        models,
        exhausted,
        stats: SolveStats {
            decisions: engine.decisions,
            propagations: engine.propagations,
            elapsed: start.elapsed(),
        },
    })
}

struct ChoiceState {
    members: Vec<usize>,
    k: u32,
    trues: u32,
    undecided: u32,
}

struct NogoodState {
    members: Vec<usize>,
    trues: u32,
    falses: u32,
}

struct Engine<'g> {
    atoms: Vec<&'g GroundAtom>,
    value: Vec<Option<bool>>,
    choices: Vec<ChoiceState>,
    nogoods: Vec<NogoodState>,
    atom_choices: Vec<Vec<usize>>,
    atom_nogoods: Vec<Vec<usize>>,
    trail: Vec<usize>,
    queue: Vec<usize>,
    decisions: u64,
    propagations: u64,
}

impl<'g> Engine<'g> {
    fn new(g: &'g GroundProgram) -> Self {
        let atoms: Vec<&GroundAtom> = g.candidate_atoms().into_iter().collect();
        let id: BTreeMap<&GroundAtom, usize> =
            atoms.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let mut atom_choices = vec![Vec::new(); atoms.len()];
        let mut atom_nogoods = vec![Vec::new(); atoms.len()];
        let choices = g
            .choices
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                let members: Vec<usize> = c.candidates.iter().map(|a| id[a]).collect();
                members.iter().for_each(|&m| atom_choices[m].push(ci));
                ChoiceState {
                    undecided: members.len() as u32,
                    members,
                    k: c.cardinality,
                    trues: 0,
                }
            })
            .collect();
        let nogoods = g
            .nogoods
            .iter()
            .enumerate()
            .map(|(ni, n)| {
                // an atom no choice offers can never be true
                let members: Option<Vec<usize>> =
                    n.atoms.iter().map(|a| id.get(a).copied()).collect();
                let members = members.unwrap_or_default();
                members.iter().for_each(|&m| atom_nogoods[m].push(ni));
                let trivially_satisfied = members.len() != n.atoms.len();
                NogoodState {
                    members,
                    trues: 0,
                    falses: u32::from(trivially_satisfied),
                }
            })
            .collect();
        Engine {
            value: vec![None; atoms.len()],
            atoms,
            choices,
            nogoods,
            atom_choices,
            atom_nogoods,
            trail: Vec::new(),
            queue: Vec::new(),
            decisions: 0,
            propagations: 0,
        }
    }

    /// Checks every constraint once. Returns false on a root conflict.
    fn initialise(&mut self) -> bool {
        for c in 0..self.choices.len() {
            if !self.check_choice(c) {
                return false;
            }
        }
        for n in 0..self.nogoods.len() {
            if !self.check_nogood(n) {
                return false;
            }
        }
        self.propagate()
    }

    fn assign(&mut self, atom: usize, v: bool) -> bool {
        if let Some(old) = self.value[atom] {
            return old == v;
        }
        self.value[atom] = Some(v);
        self.trail.push(atom);
        for &c in &self.atom_choices[atom] {
            let c = &mut self.choices[c];
            c.undecided -= 1;
            c.trues += u32::from(v);
        }
        for &n in &self.atom_nogoods[atom] {
            let n = &mut self.nogoods[n];
            if v {
                n.trues += 1;
            } else {
                n.falses += 1;
            }
        }
        self.queue.push(atom);
        true
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let atom = self.trail.pop().unwrap();
            let v = self.value[atom].take().unwrap();
            for &c in &self.atom_choices[atom] {
                let c = &mut self.choices[c];
                c.undecided += 1;
                c.trues -= u32::from(v);
            }
            for &n in &self.atom_nogoods[atom] {
                let n = &mut self.nogoods[n];
                if v {
                    n.trues -= 1;
                } else {
                    n.falses -= 1;
                }
            }
        }
        self.queue.clear();
    }

    fn check_choice(&mut self, c: usize) -> bool {
        let st = &self.choices[c];
        if st.trues > st.k || st.trues + st.undecided < st.k {
            return false;
        }
        if st.undecided == 0 {
            return true;
        }
        let force = if st.trues == st.k {
            false
        } else if st.trues + st.undecided == st.k {
            true
        } else {
            return true;
        };
        let pending: Vec<usize> = st
            .members
            .iter()
            .copied()
            .filter(|&m| self.value[m].is_none())
            .collect();
        for m in pending {
            self.propagations += 1;
            if !self.assign(m, force) {
                return false;
            }
        }
        true
    }

    fn check_nogood(&mut self, n: usize) -> bool {
        let st = &self.nogoods[n];
        if st.falses > 0 {
            return true;
        }
        let len = st.members.len() as u32;
        if st.trues == len {
            return false;
        }
        if st.trues + 1 == len {
            let last = st
                .members
                .iter()
                .copied()
                .find(|&m| self.value[m].is_none());
            if let Some(m) = last {
                self.propagations += 1;
                return self.assign(m, false);
            }
        }
        true
    }

    fn propagate(&mut self) -> bool {
        while let Some(atom) = self.queue.pop() {
            for i in 0..self.atom_choices[atom].len() {
                let c = self.atom_choices[atom][i];
                if !self.check_choice(c) {
                    self.queue.clear();
                    return false;
                }
            }
            for i in 0..self.atom_nogoods[atom].len() {
                let n = self.atom_nogoods[atom][i];
                if !self.check_nogood(n) {
                    self.queue.clear();
                    return false;
                }
            }
        }
        true
    }

    fn chosen(&self) -> Vec<GroundAtom> {
        self.atoms
            .iter()
            .zip(&self.value)
            .filter(|(_, v)| **v == Some(true))
            .map(|(a, _)| (*a).clone())
            .collect()
    }
}

struct Search {
    limit: usize,
    budget: Option<Duration>,
    start: Instant,
    models: Vec<Vec<GroundAtom>>,
}

impl Search {
    /// Returns whether the subtree was fully explored.
    fn run(&mut self, e: &mut Engine, from: usize) -> Result<bool, SolveError> {
        let Some(ci) = (from..e.choices.len()).find(|&c| e.choices[c].undecided > 0) else {
            self.models.push(e.chosen());
            return Ok(self.models.len() < self.limit);
        };
        let st = &e.choices[ci];
        let need = (st.k - st.trues) as usize;
        let open: Vec<usize> = st
            .members
            .iter()
            .copied()
            .filter(|&m| e.value[m].is_none())
            .collect();

        // k-subsets of the open candidates in lexicographic order
        let mut pick: Vec<usize> = (0..need).collect();
        loop {
            e.decisions += 1;
            if let Some(b) = self.budget {
                if e.decisions.is_multiple_of(256) && self.start.elapsed() > b {
                    return Err(SolveError::Timeout(b));
                }
            }
            let mark = e.trail.len();
            let mut ok = true;
            let mut p = 0;
            for (i, &m) in open.iter().enumerate() {
                let v = p < pick.len() && pick[p] == i;
                if v {
                    p += 1;
                }
                ok &= e.assign(m, v);
            }
            if ok && e.propagate() && !self.run(e, ci + 1)? {
                e.undo(mark);
                return Ok(false);
            }
            e.undo(mark);

            // advance to the next combination
            let n = open.len();
            let Some(i) = (0..need).rev().find(|&i| pick[i] != i + n - need) else {
                return Ok(true);
            };
            pick[i] += 1;
            for j in i + 1..need {
                pick[j] = pick[j - 1] + 1;
            }
        }
    }
}

/// Why an atom set is not a model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingFact(GroundAtom),
    /// An atom that is neither a fact nor a choice candidate.
    Unsupported(GroundAtom),
    Cardinality {
        choice: usize,
        expected: u32,
        found: usize,
    },
    Nogood {
        index: usize,
        atoms: Vec<GroundAtom>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingFact(a) => write!(f, "fact {a} is missing"),
            Violation::Unsupported(a) => {
                write!(f, "atom {a} is neither a fact nor a choice candidate")
            }
            Violation::Cardinality {
                choice,
                expected,
                found,
            } => write!(
                f,
                "choice {choice} needs exactly {expected} candidates, found {found}"
            ),
            Violation::Nogood { index, atoms } => {
                let atoms: Vec<String> = atoms.iter().map(ToString::to_string).collect();
                write!(f, "nogood {index} is contained: [{}]", atoms.join(", "))
            }
        }
    }
}

/// Verifies facts, supportedness, cardinalities and nogoods, in that order.
pub fn check_model(g: &GroundProgram, atoms: &BTreeSet<GroundAtom>) -> Result<(), Violation> {
    if let Some(f) = g.facts.iter().find(|f| !atoms.contains(*f)) {
        return Err(Violation::MissingFact(f.clone()));
    }
    let candidates = g.candidate_atoms();
    if let Some(a) = atoms
        .iter()
        .find(|a| !g.facts.contains(*a) && !candidates.contains(a))
    {
        return Err(Violation::Unsupported(a.clone()));
    }
    for (i, c) in g.choices.iter().enumerate() {
        let found = c.candidates.iter().filter(|a| atoms.contains(*a)).count();
        if found != c.cardinality as usize {
            return Err(Violation::Cardinality {
                choice: i,
                expected: c.cardinality,
                found,
            });
        }
    }
    for (i, n) in g.nogoods.iter().enumerate() {
        if n.atoms.iter().all(|a| atoms.contains(a)) {
            return Err(Violation::Nogood {
                index: i,
                atoms: n.atoms.iter().cloned().collect(),
            });
        }
    }
    Ok(())
}
