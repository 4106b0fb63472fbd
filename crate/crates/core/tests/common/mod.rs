#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};

use puzzle2asp::llm::{CompletionBackend, CompletionRequest, LlmError};
use puzzle2asp::pipeline::prompts::{extract_inputs, template};
use puzzle2asp::pipeline::{R2Template, Stage};

pub struct Puzzle {
    pub name: &'static str,
    /// A name that appears in every stage input of this puzzle.
    pub marker: &'static str,
    pub story: &'static str,
    pub raw_constants: &'static str,
    pub constants: &'static str,
    pub predicates: &'static str,
    pub generate: &'static str,
    pub constraints: &'static str,
    pub paraphrase: &'static str,
    pub gold: &'static str,
}

macro_rules! puzzle {
    ($name:literal, $marker:literal) => {
        Puzzle {
            name: $name,
            marker: $marker,
            story: include_str!(concat!("../fixtures/", $name, "/story.txt")),
            raw_constants: include_str!(concat!("../fixtures/", $name, "/raw_constants.txt")),
            constants: include_str!(concat!("../fixtures/", $name, "/constants.txt")),
            predicates: include_str!(concat!("../fixtures/", $name, "/predicates.txt")),
            generate: include_str!(concat!("../fixtures/", $name, "/generate.lp")),
            constraints: include_str!(concat!("../fixtures/", $name, "/constraints.lp")),
            paraphrase: include_str!(concat!("../fixtures/", $name, "/paraphrase.txt")),
            gold: include_str!(concat!("../fixtures/", $name, "/gold.json")),
        }
    };
}

pub const FOODIE: Puzzle = puzzle!("foodie", "Kurt");
pub const WEIGHT_LOSS: Puzzle = puzzle!("weight_loss", "Celia");
pub const GRAIN: Puzzle = puzzle!("grain", "Bonita");
pub const PUZZLES: [Puzzle; 3] = [FOODIE, WEIGHT_LOSS, GRAIN];

pub const DATASET: &str = include_str!("../fixtures/dataset.jsonl");

pub fn fixture_path(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// Recognizes the stage of a prompt from its template and the puzzle from
/// the substituted inputs, then answers with that puzzle's fixture text.
/// Rule responses come wrapped the way chat models tend to wrap them.
#[derive(Default)]
pub struct StageAwareBackend {
    pub calls: AtomicUsize,
}

pub fn stage_of(prompt: &str) -> Option<Stage> {
    Stage::ALL.into_iter().find(|s| {
        let first = template(*s, R2Template::Amended).lines().next().unwrap();
        prompt.starts_with(first)
    })
}

impl CompletionBackend for StageAwareBackend {
    fn name(&self) -> &str {
        "stage-aware"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let unknown = || LlmError::Http {
            status: 400,
            body: "unrecognized prompt".into(),
        };
        let stage = stage_of(&req.prompt).ok_or_else(unknown)?;
        let inputs = extract_inputs(stage, &req.prompt, R2Template::Amended)
            .or_else(|| extract_inputs(stage, &req.prompt, R2Template::Original))
            .ok_or_else(unknown)?;
        let text = [inputs.story, inputs.constants, inputs.predicates, inputs.sentences]
            .into_iter()
            .flatten()
            .collect::<Vec<_>>()
            .join("\n");
        let p = PUZZLES.iter().find(|p| text.contains(p.marker)).ok_or_else(unknown)?;
        Ok(match stage {
            Stage::ConstantExtraction => p.raw_constants.to_string(),
            Stage::ConstantFormatting => p.constants.to_string(),
            Stage::PredicateGeneration => p.predicates.to_string(),
            Stage::GenerateRules => format!("```asp\n{}```", p.generate),
            Stage::Paraphrase => p.paraphrase.to_string(),
            Stage::ConstraintRules => format!(
                "Constraints:\n{}\nThese constraints cover every numbered clue.",
                p.constraints
            ),
        })
    }
}
