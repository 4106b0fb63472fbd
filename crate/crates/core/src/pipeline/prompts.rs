//! Prompt templates and placeholder substitution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::{
    numbered_sentences, render_predicates, CategorizedConstants, PredicateSignature,
};
use super::Stage;

pub const CONSTANT_EXTRACTION: &str = include_str!("../../templates/constant_extraction.txt");
pub const CONSTANT_FORMATTING: &str = include_str!("../../templates/constant_formatting.txt");
pub const PREDICATE_GENERATION: &str = include_str!("../../templates/predicate_generation.txt");
pub const GENERATE_RULES: &str = include_str!("../../templates/generate_rules.txt");
pub const PARAPHRASE: &str = include_str!("../../templates/paraphrase.txt");
pub const CONSTRAINT_RULES: &str = include_str!("../../templates/constraint_rules.txt");
pub const CONSTRAINT_RULES_ORIGINAL: &str =
    include_str!("../../templates/constraint_rules_original.txt");

/// Which constraint-rule template to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum R2Template {
    /// Uniqueness stated as clue `0.` in the examples.
    #[default]
    Amended,
    Original,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{stage} prompt needs {placeholder}")]
pub struct MissingInput {
    pub stage: Stage,
    pub placeholder: &'static str,
}

/// Already-rendered placeholder values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PromptInputs {
    pub story: Option<String>,
    pub constants: Option<String>,
    pub predicates: Option<String>,
    pub sentences: Option<String>,
}

pub fn template(stage: Stage, r2: R2Template) -> &'static str {
    match stage {
        Stage::ConstantExtraction => CONSTANT_EXTRACTION,
        Stage::ConstantFormatting => CONSTANT_FORMATTING,
        Stage::PredicateGeneration => PREDICATE_GENERATION,
        Stage::GenerateRules => GENERATE_RULES,
        Stage::Paraphrase => PARAPHRASE,
        Stage::ConstraintRules => match r2 {
            R2Template::Amended => CONSTRAINT_RULES,
            R2Template::Original => CONSTRAINT_RULES_ORIGINAL,
        },
    }
}

/// Placeholders of a stage, in template order.
pub fn placeholders(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::ConstantExtraction => &["<story>"],
        Stage::ConstantFormatting => &["<constants>"],
        Stage::PredicateGeneration => &["<story>", "<constants>"],
        Stage::GenerateRules => &["<constants>", "<predicates>"],
        Stage::Paraphrase => &["<sentences>"],
        Stage::ConstraintRules => &["<story>", "<constants>", "<predicates>"],
    }
}

fn slot<'a>(inputs: &'a PromptInputs, placeholder: &str) -> Option<&'a str> {
    let v = match placeholder {
        "<story>" => &inputs.story,
        "<constants>" => &inputs.constants,
        "<predicates>" => &inputs.predicates,
        "<sentences>" => &inputs.sentences,
        _ => unreachable!("unknown placeholder {placeholder}"),
    };
    v.as_deref().filter(|s| !s.trim().is_empty())
}

/// The final occurrence of each placeholder is the query slot; earlier
/// angle-bracket text belongs to the template's own examples.
fn slot_positions(tpl: &str, stage: Stage) -> Vec<(usize, &'static str)> {
    placeholders(stage)
        .iter()
        .map(|p| (tpl.rfind(p).expect("template has placeholder"), *p))
        .collect()
}

pub fn build_prompt_text(
    stage: Stage,
    inputs: &PromptInputs,
    r2: R2Template,
) -> Result<String, MissingInput> {
    let tpl = template(stage, r2);
    let mut out = String::with_capacity(tpl.len() + 1024);
    let mut at = 0;
    for (pos, ph) in slot_positions(tpl, stage) {
        let value = slot(inputs, ph).ok_or(MissingInput {
            stage,
            placeholder: ph,
        })?;
        out.push_str(&tpl[at..pos]);
        out.push_str(value.trim());
        at = pos + ph.len();
    }
    out.push_str(&tpl[at..]);
    Ok(out.trim_end().to_string())
}

/// Substitutes the stage's inputs into its template. Formatting prompts
/// show the constants unquoted; other stages use the canonical form.
pub fn build_prompt_with(
    stage: Stage,
    story: &str,
    constants: Option<&CategorizedConstants>,
    predicates: Option<&[PredicateSignature]>,
    r2: R2Template,
) -> Result<String, MissingInput> {
    let inputs = PromptInputs {
        story: Some(story.to_string()),
        constants: constants.map(|c| match stage {
            Stage::ConstantFormatting => c.render_plain(),
            _ => c.render_canonical(),
        }),
        predicates: predicates.map(render_predicates),
        sentences: numbered_sentences(story),
    };
    build_prompt_text(stage, &inputs, r2)
}

pub fn build_prompt(
    stage: Stage,
    story: &str,
    constants: Option<&CategorizedConstants>,
    predicates: Option<&[PredicateSignature]>,
) -> Result<String, MissingInput> {
    build_prompt_with(stage, story, constants, predicates, R2Template::default())
}

/// Recovers the substituted values from a built prompt.
pub fn extract_inputs(stage: Stage, prompt: &str, r2: R2Template) -> Option<PromptInputs> {
    let tpl = template(stage, r2).trim_end();
    let slots = slot_positions(tpl, stage);
    let mut out = PromptInputs::default();
    let prefix = &tpl[..slots[0].0];
    let mut rest = prompt.strip_prefix(prefix)?;
    for (i, (pos, ph)) in slots.iter().enumerate() {
        let lit_start = pos + ph.len();
        let lit = match slots.get(i + 1) {
            Some((next, _)) => &tpl[lit_start..*next],
            None => &tpl[lit_start..],
        };
        let value = if i + 1 == slots.len() {
            rest.strip_suffix(lit)?
        } else {
            &rest[..rest.find(lit)?]
        };
        rest = &rest[value.len() + lit.len()..];
        let v = Some(value.to_string());
        match *ph {
            "<story>" => out.story = v,
            "<constants>" => out.constants = v,
            "<predicates>" => out.predicates = v,
            _ => out.sentences = v,
        }
    }
    Some(out)
}
