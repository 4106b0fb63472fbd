use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use p2a_asp::Value;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::pipeline::{normalize_name, parse_raw_constants, CategorizedConstants, Category};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train or test)")),
        }
    }
}

/// Reference assignment, one map from category to value per entity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct GoldSolution {
    pub rows: Vec<BTreeMap<String, Value>>,
}

impl GoldSolution {
    pub fn categories(&self) -> BTreeSet<&str> {
        self.rows
            .iter()
            .flat_map(|r| r.keys().map(String::as_str))
            .collect()
    }

    pub fn column(&self, category: &str) -> Vec<&Value> {
        self.rows.iter().filter_map(|r| r.get(category)).collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        let first = self.rows.first().ok_or("no rows")?;
        let keys: BTreeSet<&String> = first.keys().collect();
        if keys.is_empty() {
            return Err("empty row".into());
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.keys().collect::<BTreeSet<_>>() != keys {
                return Err(format!("row {i} has a different category set"));
            }
        }
        for k in keys {
            let mut counts: BTreeMap<&Value, usize> = BTreeMap::new();
            for v in self.column(k) {
                *counts.entry(v).or_default() += 1;
            }
            // a value may repeat only when every value of the category
            // repeats equally, as when each entity holds k items
            let distinct: BTreeSet<usize> = counts.values().copied().collect();
            if distinct.len() > 1 {
                return Err(format!("category `{k}` repeats some values but not others"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PuzzleCase {
    pub id: String,
    pub split: Split,
    pub story: String,
    pub given_constants: Option<CategorizedConstants>,
    pub gold: GoldSolution,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn field_err(line: usize, field: &str, message: impl Into<String>) -> SchemaError {
    SchemaError::Field {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn scalar(v: &Json) -> Option<Value> {
    match v {
        Json::Number(n) => n.as_i64().map(Value::Int),
        Json::String(s) => Some(Value::str(s)),
        _ => None,
    }
}

fn parse_constants_field(line: usize, v: &Json) -> Result<CategorizedConstants, SchemaError> {
    match v {
        Json::String(s) => {
            parse_raw_constants(s).map_err(|e| field_err(line, "constants", e.to_string()))
        }
        Json::Object(map) => {
            let mut categories = Vec::new();
            for (name, vals) in map {
                let values = vals
                    .as_array()
                    .ok_or_else(|| {
                        field_err(line, "constants", format!("`{name}` is not an array"))
                    })?
                    .iter()
                    .map(|x| {
                        scalar(x).ok_or_else(|| {
                            field_err(
                                line,
                                "constants",
                                format!("`{name}` has a non-scalar value"),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if values.is_empty() {
                    return Err(field_err(line, "constants", format!("`{name}` is empty")));
                }
                categories.push(Category {
                    name: name.clone(),
                    values,
                });
            }
            Ok(CategorizedConstants::new(categories))
        }
        _ => Err(field_err(
            line,
            "constants",
            "expected a string or an object",
        )),
    }
}

fn parse_solution(line: usize, v: &Json) -> Result<GoldSolution, SchemaError> {
    let rows = v
        .as_array()
        .ok_or_else(|| field_err(line, "solution", "expected an array of rows"))?;
    let mut gold = GoldSolution::default();
    for row in rows {
        let obj = row
            .as_object()
            .ok_or_else(|| field_err(line, "solution", "row is not an object"))?;
        let mut out = BTreeMap::new();
        for (k, v) in obj {
            let v = scalar(v).ok_or_else(|| {
                field_err(
                    line,
                    "solution",
                    format!("`{k}` is not an integer or string"),
                )
            })?;
            out.insert(normalize_name(k), v);
        }
        gold.rows.push(out);
    }
    gold.validate()
        .map_err(|m| field_err(line, "solution", m))?;
    Ok(gold)
}

fn value_set(
    values: impl IntoIterator<Item = impl std::borrow::Borrow<Value>>,
) -> BTreeSet<String> {
    values
        .into_iter()
        .map(|v| {
            v.borrow()
                .plain_text()
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect()
        })
        .collect()
}

fn check_coverage(
    line: usize,
    given: &CategorizedConstants,
    gold: &GoldSolution,
) -> Result<(), SchemaError> {
    let cats = gold.categories();
    for c in &given.categories {
        let name = normalize_name(&c.name);
        let values = value_set(&c.values);
        let covered = cats.contains(name.as_str())
            || cats.contains(name.trim_end_matches('s'))
            || cats.iter().any(|g| value_set(gold.column(g)) == values);
        if !covered {
            return Err(field_err(
                line,
                "solution",
                format!("no column for given category `{}`", c.name),
            ));
        }
    }
    Ok(())
}

fn parse_case(line: usize, text: &str) -> Result<PuzzleCase, SchemaError> {
    let obj: Json =
        serde_json::from_str(text).map_err(|e| field_err(line, "<json>", e.to_string()))?;
    let get = |f: &str| obj.get(f).filter(|v| !v.is_null());
    let str_field = |f: &str| {
        get(f)
            .ok_or_else(|| field_err(line, f, "missing"))?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| field_err(line, f, "expected a string"))
    };
    let id = str_field("id")?;
    let split = str_field("split")?
        .parse()
        .map_err(|m: String| field_err(line, "split", m))?;
    let story = str_field("story")?;
    let given_constants = get("constants")
        .map(|v| parse_constants_field(line, v))
        .transpose()?;
    let gold = parse_solution(
        line,
        get("solution").ok_or_else(|| field_err(line, "solution", "missing"))?,
    )?;
    if let Some(given) = &given_constants {
        check_coverage(line, given, &gold)?;
    }
    Ok(PuzzleCase {
        id,
        split,
        story,
        given_constants,
        gold,
    })
}

/// One case per non-blank line.
pub fn parse_dataset(text: &str) -> Result<Vec<PuzzleCase>, SchemaError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_case(i + 1, l))
        .collect()
}

pub fn load_dataset(path: &Path) -> Result<Vec<PuzzleCase>, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_dataset(&text)
}
