//! Stage response parsing: sanitization, constants, predicates, paraphrases.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::LazyLock;

use p2a_asp::Value;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("no variable belongs to category `{0}`")]
    UncoveredCategory(String),
    #[error("variable `{variable}` of `{predicate}` matches no category")]
    UnmappedVariable { predicate: String, variable: String },
}

fn format_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Format {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub values: Vec<Value>,
}

/// Constants grouped by category, in listing order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategorizedConstants {
    pub categories: Vec<Category>,
}

impl CategorizedConstants {
    pub fn new(categories: Vec<Category>) -> Self {
        CategorizedConstants { categories }
    }

    pub fn get(&self, name: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.name.as_str())
    }

    /// `name: v1; v2; v3.` lines with strings quoted.
    pub fn render_canonical(&self) -> String {
        self.render(|v| v.to_string())
    }

    /// Same layout without quoting, as raw constants appear in a story.
    pub fn render_plain(&self) -> String {
        self.render(Value::plain_text)
    }

    fn render(&self, show: impl Fn(&Value) -> String) -> String {
        self.categories
            .iter()
            .map(|c| {
                let vals: Vec<String> = c.values.iter().map(&show).collect();
                format!("{}: {}.", c.name, vals.join("; "))
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Identifier-shaped names; categories mixing sorts become all strings.
    pub fn normalized(&self) -> Self {
        let categories = self
            .categories
            .iter()
            .map(|c| {
                let mixed = c.values.iter().any(|v| v.as_int().is_some())
                    && c.values.iter().any(|v| v.as_str().is_some());
                let values = if mixed {
                    c.values
                        .iter()
                        .map(|v| Value::str(&v.plain_text()))
                        .collect()
                } else {
                    c.values.clone()
                };
                Category {
                    name: normalize_name(&c.name),
                    values,
                }
            })
            .collect();
        CategorizedConstants { categories }
    }

    /// Checks the well-formedness rules a formatted listing must meet.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for c in &self.categories {
            if !is_identifier(&c.name) {
                return Err(format!("category `{}` is not an identifier", c.name));
            }
            if !seen.insert(&c.name) {
                return Err(format!("category `{}` listed twice", c.name));
            }
            check_values(&c.name, &c.values)?;
        }
        Ok(())
    }
}

fn check_values(name: &str, values: &[Value]) -> Result<(), String> {
    if values.is_empty() {
        return Err(format!("category `{name}` has no constants"));
    }
    let ints = values.iter().filter(|v| v.as_int().is_some()).count();
    if ints != 0 && ints != values.len() {
        return Err(format!("category `{name}` mixes integers and strings"));
    }
    let distinct: BTreeSet<_> = values.iter().collect();
    if distinct.len() != values.len() {
        return Err(format!("category `{name}` repeats a constant"));
    }
    Ok(())
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Lowercase with runs of other characters collapsed to one underscore.
pub fn normalize_name(raw: &str) -> String {
    let mut out = String::new();
    for c in raw.trim().chars() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, 'c');
    }
    out
}

const HEADERS: &[&str] = &[
    "constants:",
    "formatted constants:",
    "predicates:",
    "asp rules:",
    "rules:",
    "constraints:",
    "copy:",
];

static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+(\.\d+)*\.?\s").unwrap());

fn looks_structured(line: &str) -> bool {
    let t = line.trim();
    t.starts_with('%')
        || t.contains(":-")
        || (t.contains('(') && t.contains(')'))
        || (t.contains(':') && (t.contains(';') || t.ends_with('.')))
        || NUMBERED.is_match(line)
}

fn sanitize_once(text: &str) -> String {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.trim_start().starts_with("```"))
        .filter(|l| !HEADERS.contains(&l.trim().to_ascii_lowercase().as_str()))
        .collect();
    let mut blocks: Vec<Vec<&str>> = vec![Vec::new()];
    for l in lines {
        if l.trim().is_empty() {
            if !blocks.last().unwrap().is_empty() {
                blocks.push(Vec::new());
            }
        } else {
            blocks.last_mut().unwrap().push(l);
        }
    }
    blocks.retain(|b| !b.is_empty());
    while blocks.len() > 1 && !blocks.last().unwrap().iter().any(|l| looks_structured(l)) {
        blocks.pop();
    }
    blocks
        .iter()
        .map(|b| b.join("\n"))
        .collect::<Vec<_>>()
        .join("\n\n")
        .trim()
        .to_string()
}

/// Removes code fences, echoed section headers and a trailing block of
/// commentary. Idempotent.
pub fn sanitize(response: &str) -> String {
    let mut cur = response.replace("\r\n", "\n").replace('\r', "\n");
    loop {
        let next = sanitize_once(&cur);
        if next == cur {
            return next;
        }
        cur = next;
    }
}

/// Splits on `sep` outside double quotes.
fn split_unquoted(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut quoted = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if escaped {
            escaped = false;
        } else if quoted && c == '\\' {
            escaped = true;
        } else if c == '"' {
            quoted = !quoted;
        } else if c == sep && !quoted {
            parts.push(&s[start..i]);
            start = i + c.len_utf8();
        }
    }
    parts.push(&s[start..]);
    parts
}

fn split_category_line(line: &str) -> Option<(&str, &str)> {
    let parts = split_unquoted(line, ':');
    if parts.len() < 2 {
        return None;
    }
    let name = parts[0];
    Some((name, &line[name.len() + 1..]))
}

fn strip_period(s: &str) -> &str {
    let s = s.trim();
    s.strip_suffix('.').unwrap_or(s)
}

fn parse_token(tok: &str) -> Option<Value> {
    if let Ok(i) = tok.parse::<i64>() {
        return Some(Value::Int(i));
    }
    let inner = tok.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next()? {
                'n' => out.push('\n'),
                other => out.push(other),
            },
            '"' => return None,
            c => out.push(c),
        }
    }
    Some(Value::str(&out))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

/// Parses formatted constants, one `category: c1; c2; ...; cn.` per line.
pub fn parse_constants(response: &str) -> Result<CategorizedConstants, ParseError> {
    let mut out = CategorizedConstants::default();
    for (n, line) in content_lines(response) {
        let (name, rest) =
            split_category_line(line).ok_or_else(|| format_err(n, "missing `:` after category"))?;
        let name = normalize_name(name);
        if name.is_empty() {
            return Err(format_err(n, "empty category name"));
        }
        let mut values = Vec::new();
        for tok in split_unquoted(strip_period(rest), ';') {
            let tok = tok.trim();
            let v = parse_token(tok).ok_or_else(|| {
                format_err(
                    n,
                    format!("`{tok}` is neither an integer nor a quoted string"),
                )
            })?;
            values.push(v);
        }
        check_values(&name, &values).map_err(|m| format_err(n, m))?;
        if out.get(&name).is_some() {
            return Err(format_err(n, format!("category `{name}` listed twice")));
        }
        out.categories.push(Category { name, values });
    }
    if out.categories.is_empty() {
        return Err(format_err(1, "no categories"));
    }
    Ok(out)
}

/// Reads unformatted constants such as `Prices: $225; $275.`, keeping
/// names and values as written. Integer-looking values become integers.
pub fn parse_raw_constants(text: &str) -> Result<CategorizedConstants, ParseError> {
    let mut out = CategorizedConstants::default();
    for (n, line) in content_lines(text) {
        let (name, rest) =
            split_category_line(line).ok_or_else(|| format_err(n, "missing `:` after category"))?;
        let values: Vec<Value> = split_unquoted(strip_period(rest), ';')
            .into_iter()
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| parse_token(t).unwrap_or_else(|| Value::str(t.trim_matches('"'))))
            .collect();
        if values.is_empty() {
            return Err(format_err(n, "category has no constants"));
        }
        out.categories.push(Category {
            name: name.trim().to_string(),
            values,
        });
    }
    if out.categories.is_empty() {
        return Err(format_err(1, "no categories"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateArg {
    pub variable: String,
    pub category: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSignature {
    pub name: String,
    pub args: Vec<PredicateArg>,
}

impl fmt::Display for PredicateSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars: Vec<&str> = self.args.iter().map(|a| a.variable.as_str()).collect();
        write!(f, "{}({})", self.name, vars.join(", "))
    }
}

pub fn render_predicates(preds: &[PredicateSignature]) -> String {
    preds
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

static PREDICATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([a-z][A-Za-z0-9_]*)\s*\(([^()]*)\)$").unwrap());
static VARIABLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Z][A-Za-z0-9_]*$").unwrap());

const STOP_WORDS: &[&str] = &[
    "of", "the", "a", "an", "and", "in", "on", "for", "per", "to",
];

/// Categories `var` plausibly abbreviates, from the most specific rule that
/// matches anything.
fn candidate_categories<'a>(var: &str, constants: &'a CategorizedConstants) -> Vec<&'a str> {
    let v = var
        .trim_end_matches(|c: char| c.is_ascii_digit())
        .to_lowercase();
    if v.is_empty() {
        return Vec::new();
    }
    let tiers: [&dyn Fn(&str) -> bool; 3] = [
        &|cat: &str| {
            let words: Vec<&str> = cat.split('_').filter(|w| !w.is_empty()).collect();
            let initials: String = words
                .iter()
                .filter(|w| !STOP_WORDS.contains(w))
                .filter_map(|w| w.chars().next())
                .collect();
            initials == v || cat == v || words.first() == Some(&v.as_str())
        },
        &|cat: &str| cat.replace('_', "").starts_with(&v),
        &|cat: &str| {
            let mut it = cat.chars();
            cat.starts_with(&v[..1]) && v.chars().all(|c| it.any(|d| d == c))
        },
    ];
    for tier in tiers {
        let hits: Vec<&str> = constants.names().filter(|c| tier(c)).collect();
        if !hits.is_empty() {
            return hits;
        }
    }
    Vec::new()
}

/// Parses `name(V1, ..., Vn)` lines and maps each variable to a category.
pub fn parse_predicates(
    response: &str,
    constants: &CategorizedConstants,
) -> Result<Vec<PredicateSignature>, ParseError> {
    let mut raw = Vec::new();
    for (n, line) in content_lines(response) {
        let line = strip_period(line);
        let caps = PREDICATE.captures(line).ok_or_else(|| {
            format_err(n, format!("`{line}` is not of the form name(V1, ..., Vn)"))
        })?;
        let mut vars = Vec::new();
        for v in caps[2].split(',').map(str::trim) {
            if !VARIABLE.is_match(v) {
                return Err(format_err(n, format!("`{v}` is not a variable")));
            }
            if vars.contains(&v) {
                return Err(format_err(n, format!("variable `{v}` repeats")));
            }
            vars.push(v);
        }
        raw.push((
            caps[1].to_string(),
            vars.into_iter().map(String::from).collect::<Vec<_>>(),
        ));
    }
    if raw.is_empty() {
        return Err(format_err(1, "no predicates"));
    }

    let names: Vec<&str> = constants.names().collect();
    let mut sigs = Vec::new();
    let mut covered: BTreeSet<String> = BTreeSet::new();
    for (name, vars) in &raw {
        let cands: Vec<Vec<&str>> = vars
            .iter()
            .map(|v| candidate_categories(v, constants))
            .collect();
        let mut chosen: Vec<Option<&str>> = cands
            .iter()
            .map(|c| if c.len() == 1 { Some(c[0]) } else { None })
            .collect();
        for i in 0..vars.len() {
            if chosen[i].is_some() {
                continue;
            }
            let used: BTreeSet<&str> = chosen.iter().flatten().copied().collect();
            let pick = if cands[i].is_empty() {
                names
                    .iter()
                    .copied()
                    .find(|c| !used.contains(c) && !covered.contains(*c))
                    .or_else(|| names.get(i).copied().filter(|c| !used.contains(c)))
            } else {
                names
                    .get(i)
                    .copied()
                    .filter(|c| cands[i].contains(c) && !used.contains(c))
                    .or_else(|| cands[i].iter().copied().find(|c| !used.contains(c)))
                    .or(Some(cands[i][0]))
            };
            chosen[i] = pick;
            if pick.is_none() {
                return Err(ParseError::UnmappedVariable {
                    predicate: name.clone(),
                    variable: vars[i].clone(),
                });
            }
        }
        let args: Vec<PredicateArg> = vars
            .iter()
            .zip(chosen)
            .map(|(v, c)| PredicateArg {
                variable: v.clone(),
                category: c.unwrap().to_string(),
            })
            .collect();
        covered.extend(args.iter().map(|a| a.category.clone()));
        sigs.push(PredicateSignature {
            name: name.clone(),
            args,
        });
    }
    if let Some(missing) = names.iter().find(|c| !covered.contains(**c)) {
        return Err(ParseError::UncoveredCategory(missing.to_string()));
    }
    Ok(sigs)
}

pub fn is_numbered(line: &str) -> bool {
    NUMBERED.is_match(line)
}

/// Line span from the first to the last numbered line, if any.
fn clue_block(lines: &[&str]) -> Option<(usize, usize)> {
    let first = lines.iter().position(|l| is_numbered(l))?;
    let last = lines.iter().rposition(|l| is_numbered(l))?;
    Some((first, last))
}

/// The numbered clue lines of a story, joined by newlines.
pub fn numbered_sentences(story: &str) -> Option<String> {
    let lines: Vec<&str> = story.lines().collect();
    let (a, b) = clue_block(&lines)?;
    Some(
        lines[a..=b]
            .iter()
            .map(|l| l.trim())
            .collect::<Vec<_>>()
            .join("\n"),
    )
}

/// Replaces the story's numbered clues with the numbered lines of a
/// paraphrase response.
pub fn apply_paraphrase(story: &str, response: &str) -> Result<String, ParseError> {
    let lines: Vec<&str> = story.lines().collect();
    let Some((a, b)) = clue_block(&lines) else {
        return Ok(story.to_string());
    };
    let clues: Vec<&str> = response
        .lines()
        .map(str::trim)
        .filter(|l| is_numbered(l))
        .collect();
    if clues.is_empty() {
        return Err(format_err(1, "response has no numbered sentences"));
    }
    let mut out: Vec<&str> = lines[..a].to_vec();
    out.extend(clues);
    out.extend(&lines[b + 1..]);
    Ok(out.join("\n"))
}
