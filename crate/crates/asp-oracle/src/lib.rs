//! Deliberately naive reference implementations for differential testing.
//!
//! The grounder here substitutes every combination of universe values for a
//! rule's variables and keeps the instances whose atoms exist; the model
//! enumerator unions every combination of per-choice k-subsets and tests it.
//! Nothing is shared with the library's evaluator or join engine; only the
//! abstract syntax and value types are reused.

use std::collections::{BTreeMap, BTreeSet};

use p2a_asp::syntax::{ArithOp, Atom, CompOp, Comparison, Literal, Program, Rule, Term};
use p2a_asp::{GroundAtom, Value};
use rand::seq::SliceRandom;
use rand::Rng;

pub type Assignment = BTreeMap<String, Value>;

/// Ground program as sets, so the comparison with the library is order-free.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleGround {
    pub facts: BTreeSet<GroundAtom>,
    /// (rule index, body assignment, k, candidates)
    pub choices: BTreeSet<(usize, Assignment, u32, BTreeSet<GroundAtom>)>,
    pub nogoods: BTreeSet<BTreeSet<GroundAtom>>,
}

impl OracleGround {
    pub fn candidates(&self) -> BTreeSet<GroundAtom> {
        self.choices
            .iter()
            .flat_map(|c| c.3.iter().cloned())
            .collect()
    }
}

fn truncating_div(x: i64, y: i64) -> Option<i64> {
    if y == 0 {
        return None;
    }
    let q = x.unsigned_abs().checked_div(y.unsigned_abs())?;
    let q = i64::try_from(q).ok()?;
    Some(if (x < 0) != (y < 0) { -q } else { q })
}

fn eval(t: &Term, a: &Assignment) -> Result<Value, String> {
    Ok(match t {
        Term::Int(i) => Value::Int(*i),
        Term::Str(s) => Value::str(s),
        Term::Var(v) => a.get(v).cloned().ok_or_else(|| format!("unbound {v}"))?,
        Term::Abs(inner) => match eval(inner, a)? {
            Value::Int(i) => Value::Int(i.checked_abs().ok_or("overflow")?),
            other => return Err(format!("abs of {other}")),
        },
        Term::Arith(op, l, r) => {
            let (Value::Int(x), Value::Int(y)) = (eval(l, a)?, eval(r, a)?) else {
                return Err("arithmetic on a string".into());
            };
            let out = match op {
                ArithOp::Add => x.checked_add(y),
                ArithOp::Sub => x.checked_sub(y),
                ArithOp::Mul => x.checked_mul(y),
                ArithOp::Div => truncating_div(x, y),
                ArithOp::Rem => truncating_div(x, y)
                    .and_then(|q| q.checked_mul(y))
                    .and_then(|p| x.checked_sub(p)),
            };
            Value::Int(out.ok_or("arithmetic error")?)
        }
        Term::Tuple(_) => return Err("bare tuple".into()),
    })
}

fn holds(c: &Comparison, a: &Assignment) -> Result<bool, String> {
    let sides = |t: &Term| -> Result<Vec<Value>, String> {
        match t {
            Term::Tuple(ts) => ts.iter().map(|t| eval(t, a)).collect(),
            other => Ok(vec![eval(other, a)?]),
        }
    };
    let (l, r) = (sides(&c.lhs)?, sides(&c.rhs)?);
    if l.len() != r.len() {
        return Err("tuple length".into());
    }
    let mut equal = true;
    for (x, y) in l.iter().zip(&r) {
        match (x, y) {
            (Value::Int(_), Value::Int(_)) | (Value::Str(_), Value::Str(_)) => equal &= x == y,
            _ => return Err("mixed sorts".into()),
        }
    }
    match c.op {
        CompOp::Eq => Ok(equal),
        CompOp::Ne => Ok(!equal),
        op => {
            let ([Value::Int(x)], [Value::Int(y)]) = (l.as_slice(), r.as_slice()) else {
                return Err("ordering on non-integers".into());
            };
            Ok(match op {
                CompOp::Lt => x < y,
                CompOp::Le => x <= y,
                CompOp::Gt => x > y,
                CompOp::Ge => x >= y,
                _ => unreachable!(),
            })
        }
    }
}

fn instantiate(atom: &Atom, a: &Assignment) -> Result<GroundAtom, String> {
    let args = atom
        .args
        .iter()
        .map(|t| eval(t, a))
        .collect::<Result<_, _>>()?;
    Ok(GroundAtom::new(&atom.predicate, args))
}

fn vars_of<'a>(
    atoms: impl IntoIterator<Item = &'a Atom>,
    comps: impl IntoIterator<Item = &'a Comparison>,
) -> Vec<String> {
    let mut vs = BTreeSet::new();
    atoms.into_iter().for_each(|a| a.collect_vars(&mut vs));
    comps.into_iter().for_each(|c| c.collect_vars(&mut vs));
    vs.into_iter().map(String::from).collect()
}

/// Every assignment of `universe` values to `vars`.
fn assignments(vars: &[String], universe: &[Value], base: &Assignment) -> Vec<Assignment> {
    let mut out = vec![base.clone()];
    for v in vars {
        if base.contains_key(v) {
            continue;
        }
        out = out
            .into_iter()
            .flat_map(|a| {
                universe.iter().map(move |x| {
                    let mut a = a.clone();
                    a.insert(v.clone(), x.clone());
                    a
                })
            })
            .collect();
    }
    out
}

/// Assignments under which every atom is in `ext` and every comparison holds.
fn satisfying(
    atoms: &[&Atom],
    comps: &[&Comparison],
    universe: &[Value],
    ext: &BTreeSet<GroundAtom>,
    base: &Assignment,
) -> Result<Vec<Assignment>, String> {
    let vars = vars_of(atoms.iter().copied(), comps.iter().copied());
    let mut out = Vec::new();
    'next: for a in assignments(&vars, universe, base) {
        for atom in atoms {
            // arithmetic on a value that cannot match is not an error
            match instantiate(atom, &a) {
                Ok(g) if ext.contains(&g) => {}
                _ => continue 'next,
            }
        }
        for c in comps {
            if !holds(c, &a)? {
                continue 'next;
            }
        }
        out.push(a);
    }
    Ok(out)
}

fn split(body: &[Literal]) -> (Vec<&Atom>, Vec<&Comparison>) {
    let mut atoms = Vec::new();
    let mut comps = Vec::new();
    for l in body {
        match l {
            Literal::Atom(a) => atoms.push(a),
            Literal::Comparison(c) => comps.push(c),
        }
    }
    (atoms, comps)
}

fn universe_of(atoms: &BTreeSet<GroundAtom>) -> Vec<Value> {
    let set: BTreeSet<Value> = atoms.iter().flat_map(|a| a.args.iter().cloned()).collect();
    set.into_iter().collect()
}

/// Substitute-all-bindings grounding. Errors carry a short description.
pub fn ground(p: &Program) -> Result<OracleGround, String> {
    let mut facts = BTreeSet::new();
    for rule in &p.rules {
        if let Rule::Fact(f) = rule {
            let mut tuples: Vec<Vec<Value>> = vec![vec![]];
            for pool in &f.pools {
                let values: Vec<Value> = pool
                    .iter()
                    .map(|t| eval(t, &Assignment::new()))
                    .collect::<Result<_, _>>()?;
                tuples = tuples
                    .iter()
                    .flat_map(|t| {
                        values.iter().map(move |v| {
                            let mut t = t.clone();
                            t.push(v.clone());
                            t
                        })
                    })
                    .collect();
            }
            for args in tuples {
                facts.insert(GroundAtom::new(&f.predicate, args));
            }
        }
    }

    loop {
        let universe = universe_of(&facts);
        let mut derived = facts.clone();
        for rule in &p.rules {
            if let Rule::Define(d) = rule {
                let (atoms, comps) = split(&d.body);
                for a in satisfying(&atoms, &comps, &universe, &facts, &Assignment::new())? {
                    derived.insert(instantiate(&d.head, &a)?);
                }
            }
        }
        if derived.len() == facts.len() {
            break;
        }
        facts = derived;
    }

    let universe = universe_of(&facts);
    let mut choices = BTreeSet::new();
    for (i, rule) in p.rules.iter().enumerate() {
        if let Rule::Choice(c) = rule {
            let (atoms, comps) = split(&c.body);
            for body in satisfying(&atoms, &comps, &universe, &facts, &Assignment::new())? {
                let conds: Vec<&Atom> = c.conditions.iter().collect();
                let mut candidates = BTreeSet::new();
                for a in satisfying(&conds, &[], &universe, &facts, &body)? {
                    candidates.insert(instantiate(&c.head, &a)?);
                }
                choices.insert((i, body, c.cardinality, candidates));
            }
        }
    }

    let chosen = p.chosen_predicates();
    let mut ext = facts.clone();
    ext.extend(choices.iter().flat_map(|c| c.3.iter().cloned()));
    let universe = universe_of(&ext);
    let mut nogoods = BTreeSet::new();
    for rule in &p.rules {
        if let Rule::Test(t) = rule {
            let (atoms, comps) = split(&t.body);
            for a in satisfying(&atoms, &comps, &universe, &ext, &Assignment::new())? {
                let mut count = 0;
                for h in &t.heads {
                    count += u32::from(holds(h, &a)?);
                }
                let ok = match t.cardinality {
                    None => count > 0,
                    Some(k) => count == k,
                };
                if !ok {
                    let mut ng = BTreeSet::new();
                    for atom in &atoms {
                        if chosen.contains(atom.predicate.as_str()) {
                            ng.insert(instantiate(atom, &a)?);
                        }
                    }
                    nogoods.insert(ng);
                }
            }
        }
    }
    Ok(OracleGround {
        facts,
        choices,
        nogoods,
    })
}

/// Evaluates the test rules directly against `atoms`, which must include the
/// facts. True iff every instance with a true body has a satisfied head.
pub fn satisfies_tests(p: &Program, atoms: &BTreeSet<GroundAtom>) -> Result<bool, String> {
    let universe = universe_of(atoms);
    for rule in &p.rules {
        if let Rule::Test(t) = rule {
            let (body_atoms, comps) = split(&t.body);
            for a in satisfying(&body_atoms, &comps, &universe, atoms, &Assignment::new())? {
                let mut count = 0;
                for h in &t.heads {
                    count += u32::from(holds(h, &a)?);
                }
                let ok = match t.cardinality {
                    None => count > 0,
                    Some(k) => count == k,
                };
                if !ok {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Product over choices of `C(|candidates|, k)`.
pub fn search_space(g: &OracleGround) -> f64 {
    g.choices
        .iter()
        .map(|c| binomial(c.3.len(), c.2 as usize))
        .product()
}

fn k_subsets<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut out = Vec::new();
    for (i, first) in items.iter().enumerate() {
        for mut rest in k_subsets(&items[i + 1..], k - 1) {
            rest.insert(0, first.clone());
            out.push(rest);
        }
    }
    out
}

/// Independent model test: exactly k per choice, no nogood contained,
/// nothing outside facts and candidates.
pub fn is_model(g: &OracleGround, atoms: &BTreeSet<GroundAtom>) -> bool {
    let candidates = g.candidates();
    g.facts.is_subset(atoms)
        && atoms
            .iter()
            .all(|a| g.facts.contains(a) || candidates.contains(a))
        && g.choices
            .iter()
            .all(|c| c.3.iter().filter(|a| atoms.contains(*a)).count() == c.2 as usize)
        && g.nogoods.iter().all(|n| !n.is_subset(atoms))
}

/// Generate-and-test over the product of per-choice k-subsets.
pub fn models(g: &OracleGround) -> BTreeSet<BTreeSet<GroundAtom>> {
    let mut partial: BTreeSet<BTreeSet<GroundAtom>> = BTreeSet::from([g.facts.clone()]);
    for (_, _, k, candidates) in &g.choices {
        let cands: Vec<GroundAtom> = candidates.iter().cloned().collect();
        let subsets = k_subsets(&cands, *k as usize);
        let mut next = BTreeSet::new();
        for base in &partial {
            for s in &subsets {
                let mut m = base.clone();
                m.extend(s.iter().cloned());
                next.insert(m);
            }
        }
        partial = next;
    }
    partial.into_iter().filter(|m| is_model(g, m)).collect()
}

const VARS: [&str; 3] = ["X", "Y", "Z"];

/// A random integer-only program in the fragment.
///
/// At most four values per category and three variables per rule; division
/// and remainder only by non-zero constants, so grounding cannot fail.
pub fn random_program<R: Rng>(rng: &mut R) -> String {
    let mut src = String::new();
    let n_cats = rng.gen_range(1..=3);
    let mut cats = Vec::new();
    for c in 0..n_cats {
        let size = rng.gen_range(1..=4);
        let mut pool: Vec<i64> = (-2..8).collect();
        pool.shuffle(rng);
        pool.truncate(size);
        let vals: Vec<String> = pool.iter().map(i64::to_string).collect();
        src.push_str(&format!("c{c}({}).\n", vals.join("; ")));
        cats.push(format!("c{c}"));
    }
    if rng.gen_bool(0.3) {
        let a = cats.choose(rng).unwrap();
        let b = cats.choose(rng).unwrap();
        src.push_str(&format!(
            "d(X, Y) :- {a}(X), {b}(Y), X{}Y.\n",
            ["<", "!=", "<="].choose(rng).unwrap()
        ));
        cats.push("d".into());
    }
    let unary: Vec<&String> = cats.iter().filter(|c| c.as_str() != "d").collect();

    // choice rules
    let n_choices = rng.gen_range(1..=2);
    let mut chosen: Vec<(String, usize)> = Vec::new();
    for i in 0..n_choices {
        let name = format!("m{i}");
        let a = unary.choose(rng).unwrap();
        let b = unary.choose(rng).unwrap();
        match rng.gen_range(0..3) {
            0 => {
                let k = rng.gen_range(0..=2);
                src.push_str(&format!("{{{name}(X): {a}(X)}}={k}.\n"));
                chosen.push((name, 1));
            }
            1 => {
                let k = rng.gen_range(0..=2);
                src.push_str(&format!("{{{name}(X, Y): {b}(Y)}}={k} :- {a}(X).\n"));
                chosen.push((name, 2));
            }
            _ => {
                let k = rng.gen_range(1..=2);
                // one identical choice per Z, so candidates are shared
                src.push_str(&format!(
                    "{{{name}(X, Y): {b}(Y), {a}(X)}}={k} :- {a}(Z), Z>=Z.\n"
                ));
                chosen.push((name, 2));
            }
        }
    }

    let n_tests = rng.gen_range(1..=4);
    for _ in 0..n_tests {
        let mut body: Vec<String> = Vec::new();
        let mut used: BTreeSet<&str> = BTreeSet::new();
        for _ in 0..rng.gen_range(1..=2) {
            let (name, arity) = chosen.choose(rng).unwrap();
            let args: Vec<&str> = (0..*arity).map(|_| *VARS.choose(rng).unwrap()).collect();
            used.extend(args.iter().copied());
            body.push(format!("{name}({})", args.join(", ")));
        }
        if rng.gen_bool(0.3) {
            let c = unary.choose(rng).unwrap();
            let v = *used.iter().collect::<Vec<_>>().choose(rng).unwrap();
            body.push(format!("{c}({v})"));
        }
        let used: Vec<&str> = used.into_iter().collect();
        if rng.gen_bool(0.5) {
            body.push(random_comparison(rng, &used));
        }
        let n_heads = rng.gen_range(1..=3);
        let heads: Vec<String> = (0..n_heads)
            .map(|_| random_comparison(rng, &used))
            .collect();
        let head = if rng.gen_bool(0.5) {
            heads.join("; ")
        } else {
            format!("{{{}}}={}", heads.join("; "), rng.gen_range(0..=n_heads))
        };
        src.push_str(&format!("{head} :- {}.\n", body.join(", ")));
    }
    src
}

fn random_term<R: Rng>(rng: &mut R, vars: &[&str]) -> String {
    let v = *vars.choose(rng).unwrap();
    let w = *vars.choose(rng).unwrap();
    let c = rng.gen_range(1..=3);
    match rng.gen_range(0..9) {
        0..=2 => v.to_string(),
        3 => rng.gen_range(-2..8).to_string(),
        4 => format!("{v}+{c}"),
        5 => format!("{v}-{w}"),
        6 => format!("|{v}-{c}|"),
        7 => format!("{v}/{c}"),
        _ => format!("{v}\\{}", c + 1),
    }
}

fn random_comparison<R: Rng>(rng: &mut R, vars: &[&str]) -> String {
    if vars.len() >= 2 && rng.gen_bool(0.1) {
        return format!("({}, {})!=({}, {})", vars[0], vars[1], vars[1], vars[0]);
    }
    let op = ["=", "!=", "<", ">", "<=", ">="].choose(rng).unwrap();
    format!("{}{op}{}", random_term(rng, vars), random_term(rng, vars))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn division_truncates() {
        assert_eq!(truncating_div(-7, 2), Some(-3));
        assert_eq!(truncating_div(7, -2), Some(-3));
        assert_eq!(truncating_div(7, 0), None);
    }

    #[test]
    fn random_programs_parse_and_ground() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let src = random_program(&mut rng);
            let p = p2a_asp::parse_program(&src).unwrap_or_else(|e| panic!("{e}\n{src}"));
            ground(&p).unwrap_or_else(|e| panic!("{e}\n{src}"));
        }
    }

    #[test]
    fn subsets() {
        assert_eq!(
            k_subsets(&[1, 2, 3], 2),
            vec![vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(k_subsets(&[1], 2), Vec::<Vec<i32>>::new());
    }
}
