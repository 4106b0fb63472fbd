use std::collections::{BTreeMap, BTreeSet};

use p2a_asp::{StableModel, Value};
use thiserror::Error;

use super::GoldSolution;
use crate::pipeline::{normalize_name, PredicateSignature};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("no predicate signature matches the model atoms")]
    NoRelation,
    #[error("gold category `{0}` has no counterpart in the model")]
    Unmapped(String),
}

type Row = BTreeMap<String, Value>;

fn atom_rows(model: &StableModel, sig: &PredicateSignature) -> Vec<Row> {
    model
        .with_predicate(&sig.name)
        .filter(|a| a.args.len() == sig.args.len())
        .map(|a| {
            sig.args
                .iter()
                .zip(&a.args)
                .map(|(p, v)| (p.category.clone(), v.clone()))
                .collect()
        })
        .collect()
}

fn join(left: Vec<Row>, right: Vec<Row>) -> Vec<Row> {
    let mut out = Vec::new();
    for l in &left {
        for r in &right {
            if r.iter().all(|(k, v)| l.get(k).is_none_or(|lv| lv == v)) {
                let mut row = l.clone();
                row.extend(r.iter().map(|(k, v)| (k.clone(), v.clone())));
                out.push(row);
            }
        }
    }
    out
}

fn plain_column<'a>(rows: impl Iterator<Item = Option<&'a Value>>) -> BTreeSet<String> {
    rows.flatten().map(Value::plain_text).collect()
}

/// Turns the model's atoms into rows, keyed by category through the
/// signatures, and compares them with the gold rows as multisets.
pub fn compare_solution(
    model: &StableModel,
    gold: &GoldSolution,
    signatures: &[PredicateSignature],
) -> Result<bool, CompareError> {
    let mut rows: Option<Vec<Row>> = None;
    for sig in signatures {
        let r = atom_rows(model, sig);
        if r.is_empty() {
            continue;
        }
        rows = Some(match rows {
            None => r,
            Some(acc) => join(acc, r),
        });
    }
    let rows = rows.ok_or(CompareError::NoRelation)?;

    let model_cats: BTreeSet<&String> = rows.iter().flat_map(|r| r.keys()).collect();
    let mut mapping: BTreeMap<&str, &str> = BTreeMap::new();
    let gold_cats = gold.categories();
    for g in &gold_cats {
        if let Some(m) = model_cats.iter().find(|m| normalize_name(m) == *g) {
            mapping.insert(g, m);
        }
    }
    for g in &gold_cats {
        if mapping.contains_key(g) {
            continue;
        }
        let want = plain_column(gold.rows.iter().map(|r| r.get(*g)));
        let taken: BTreeSet<&str> = mapping.values().copied().collect();
        let hit = model_cats.iter().find(|m| {
            !taken.contains(m.as_str())
                && plain_column(rows.iter().map(|r| r.get(m.as_str()))) == want
        });
        match hit {
            Some(m) => mapping.insert(g, m),
            None => return Err(CompareError::Unmapped(g.to_string())),
        };
    }

    let project = |get: &dyn Fn(&str) -> Option<String>| -> Vec<Option<String>> {
        gold_cats.iter().map(|g| get(g)).collect()
    };
    let mut ours: Vec<Vec<Option<String>>> = rows
        .iter()
        .map(|r| project(&|g| r.get(mapping[g]).map(Value::plain_text)))
        .collect();
    let mut theirs: Vec<Vec<Option<String>>> = gold
        .rows
        .iter()
        .map(|r| project(&|g| r.get(g).map(Value::plain_text)))
        .collect();
    ours.sort();
    theirs.sort();
    Ok(ours == theirs)
}
