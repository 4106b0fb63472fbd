//! Story to answer set program in six prompted stages.

pub mod parse;
pub mod prompts;

use std::fmt;

use p2a_asp::{parse_program, render_program, Program};
use serde::{Deserialize, Serialize, Serializer};

use crate::llm::{CompletionBackend, CompletionRequest, DEFAULT_MAX_TOKENS, DEFAULT_MODEL};
pub use parse::{
    apply_paraphrase, normalize_name, numbered_sentences, parse_constants, parse_predicates,
    parse_raw_constants, render_predicates, sanitize, CategorizedConstants, Category, ParseError,
    PredicateArg, PredicateSignature,
};
pub use prompts::{
    build_prompt, build_prompt_text, build_prompt_with, extract_inputs, MissingInput, PromptInputs,
    R2Template,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ConstantExtraction,
    ConstantFormatting,
    PredicateGeneration,
    GenerateRules,
    Paraphrase,
    ConstraintRules,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::ConstantExtraction,
        Stage::ConstantFormatting,
        Stage::PredicateGeneration,
        Stage::GenerateRules,
        Stage::Paraphrase,
        Stage::ConstraintRules,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::ConstantExtraction => "constant_extraction",
            Stage::ConstantFormatting => "constant_formatting",
            Stage::PredicateGeneration => "predicate_generation",
            Stage::GenerateRules => "generate_rules",
            Stage::Paraphrase => "paraphrase",
            Stage::ConstraintRules => "constraint_rules",
        }
    }

    /// Stages whose responses are ASP rules.
    pub fn emits_rules(self) -> bool {
        matches!(self, Stage::GenerateRules | Stage::ConstraintRules)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub enable_formatting: bool,
    pub enable_paraphrase: bool,
    pub use_given_constants: bool,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub max_stage_retries: u32,
    pub r2_template: R2Template,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            enable_formatting: true,
            enable_paraphrase: true,
            use_given_constants: true,
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            max_stage_retries: 1,
            r2_template: R2Template::Amended,
        }
    }
}

impl PipelineOptions {
    fn request(&self, prompt: &str) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.to_string(),
            model: self.model.clone(),
            temperature: self.temperature,
            top_p: self.top_p,
            max_tokens: self.max_tokens,
            stop: None,
        }
    }
}

fn serialize_program<S: Serializer>(p: &Option<Program>, s: S) -> Result<S::Ok, S::Error> {
    match p {
        Some(p) => s.serialize_some(&render_program(p)),
        None => s.serialize_none(),
    }
}

/// A parsed stage response.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Artifact {
    Constants(CategorizedConstants),
    Predicates(Vec<PredicateSignature>),
    Rules(#[serde(serialize_with = "serialize_rules")] Program),
    Story(String),
}

fn serialize_rules<S: Serializer>(p: &Program, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&render_program(p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageResult {
    Parsed { artifact: Artifact },
    ParseFailure { message: String },
    BackendFailure { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub prompt: String,
    pub attempts: u32,
    pub raw_response: Option<String>,
    pub result: StageResult,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "stage", rename_all = "snake_case")]
pub enum PipelineOutcome {
    Assembled,
    StageParseFailure(Stage),
    BackendFailure(Stage),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineTrace {
    pub story: String,
    pub records: Vec<StageRecord>,
    pub constants: Option<CategorizedConstants>,
    pub predicates: Option<Vec<PredicateSignature>>,
    #[serde(serialize_with = "serialize_program")]
    pub assembled_program: Option<Program>,
    /// Rules of the assembled program that came from the generate stage;
    /// the rest came from the constraint stage.
    pub generate_rule_count: usize,
    pub outcome: PipelineOutcome,
}

impl PipelineTrace {
    pub fn record(&self, stage: Stage) -> Option<&StageRecord> {
        self.records.iter().find(|r| r.stage == stage)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

struct Run<'a> {
    opts: &'a PipelineOptions,
    backend: &'a dyn CompletionBackend,
    records: Vec<StageRecord>,
    failed: Option<PipelineOutcome>,
}

impl Run<'_> {
    /// Prompts until the response parses or retries run out.
    fn stage<T>(
        &mut self,
        stage: Stage,
        prompt: String,
        parse: impl Fn(&str) -> Result<(T, Artifact), String>,
    ) -> Option<T> {
        let req = self.opts.request(&prompt);
        let mut attempts = 0;
        loop {
            attempts += 1;
            let last = attempts > self.opts.max_stage_retries;
            let (raw, result, value) = match self.backend.complete(&req) {
                Err(e) => (
                    None,
                    StageResult::BackendFailure {
                        message: e.to_string(),
                    },
                    None,
                ),
                Ok(text) => match parse(&sanitize(&text)) {
                    Ok((v, artifact)) => (Some(text), StageResult::Parsed { artifact }, Some(v)),
                    Err(message) => (Some(text), StageResult::ParseFailure { message }, None),
                },
            };
            if value.is_some() || last {
                let outcome = match &result {
                    StageResult::Parsed { .. } => None,
                    StageResult::ParseFailure { .. } => {
                        Some(PipelineOutcome::StageParseFailure(stage))
                    }
                    StageResult::BackendFailure { .. } => {
                        Some(PipelineOutcome::BackendFailure(stage))
                    }
                };
                if let StageResult::BackendFailure { message } = &result {
                    log::warn!("{stage}: {message}");
                }
                self.records.push(StageRecord {
                    stage,
                    prompt,
                    attempts,
                    raw_response: raw,
                    result,
                });
                self.failed = outcome;
                return value;
            }
        }
    }

    fn prompt(
        &mut self,
        stage: Stage,
        story: &str,
        c: Option<&CategorizedConstants>,
        p: Option<&[PredicateSignature]>,
    ) -> Option<String> {
        match build_prompt_with(stage, story, c, p, self.opts.r2_template) {
            Ok(text) => Some(text),
            Err(e) => {
                self.records.push(StageRecord {
                    stage,
                    prompt: String::new(),
                    attempts: 0,
                    raw_response: None,
                    result: StageResult::ParseFailure {
                        message: e.to_string(),
                    },
                });
                self.failed = Some(PipelineOutcome::StageParseFailure(stage));
                None
            }
        }
    }

    fn formatted(
        &mut self,
        story: &str,
        raw: &CategorizedConstants,
    ) -> Option<CategorizedConstants> {
        let prompt = self.prompt(Stage::ConstantFormatting, story, Some(raw), None)?;
        self.stage(Stage::ConstantFormatting, prompt, constants_artifact)
    }

    fn constants(
        &mut self,
        story: &str,
        given: Option<&CategorizedConstants>,
    ) -> Option<CategorizedConstants> {
        if let (Some(given), true) = (given, self.opts.use_given_constants) {
            return if self.opts.enable_formatting {
                self.formatted(story, given)
            } else {
                Some(given.normalized())
            };
        }
        let prompt = self.prompt(Stage::ConstantExtraction, story, None, None)?;
        if self.opts.enable_formatting {
            let raw = self.stage(Stage::ConstantExtraction, prompt, |text| {
                let c = parse_raw_constants(text).map_err(|e| e.to_string())?;
                Ok((c.clone(), Artifact::Constants(c)))
            })?;
            self.formatted(story, &raw)
        } else {
            self.stage(Stage::ConstantExtraction, prompt, constants_artifact)
        }
    }
}

fn constants_artifact(text: &str) -> Result<(CategorizedConstants, Artifact), String> {
    let c = parse_constants(text).map_err(|e| e.to_string())?;
    Ok((c.clone(), Artifact::Constants(c)))
}

fn rules_artifact(text: &str) -> Result<(Program, Artifact), String> {
    let p = parse_program(text).map_err(|e| e.to_string())?;
    Ok((p.clone(), Artifact::Rules(p)))
}

/// Runs every stage in order. Failures end the run early and are reported
/// in the trace outcome.
pub fn run_pipeline(
    story: &str,
    given_constants: Option<&CategorizedConstants>,
    opts: &PipelineOptions,
    backend: &dyn CompletionBackend,
) -> PipelineTrace {
    let mut run = Run {
        opts,
        backend,
        records: Vec::new(),
        failed: None,
    };
    let mut trace = PipelineTrace {
        story: story.to_string(),
        records: Vec::new(),
        constants: None,
        predicates: None,
        assembled_program: None,
        generate_rule_count: 0,
        outcome: PipelineOutcome::Assembled,
    };

    let assembled = (|| {
        let constants = run.constants(story, given_constants)?;
        trace.constants = Some(constants.clone());

        let prompt = run.prompt(Stage::PredicateGeneration, story, Some(&constants), None)?;
        let predicates = run.stage(Stage::PredicateGeneration, prompt, |text| {
            let p = parse_predicates(text, &constants).map_err(|e| e.to_string())?;
            Ok((p.clone(), Artifact::Predicates(p)))
        })?;
        trace.predicates = Some(predicates.clone());

        let prompt = run.prompt(
            Stage::GenerateRules,
            "",
            Some(&constants),
            Some(&predicates),
        )?;
        let generate = run.stage(Stage::GenerateRules, prompt, rules_artifact)?;

        let mut r2_story = story.to_string();
        if opts.enable_paraphrase && numbered_sentences(story).is_some() {
            let prompt = run.prompt(Stage::Paraphrase, story, None, None)?;
            r2_story = run.stage(Stage::Paraphrase, prompt, |text| {
                let s = apply_paraphrase(story, text).map_err(|e| e.to_string())?;
                Ok((s.clone(), Artifact::Story(s)))
            })?;
        }

        let prompt = run.prompt(
            Stage::ConstraintRules,
            &r2_story,
            Some(&constants),
            Some(&predicates),
        )?;
        let test = run.stage(Stage::ConstraintRules, prompt, rules_artifact)?;

        let mut program = generate;
        let count = program.rules.len();
        program.extend(test);
        Some((program, count))
    })();

    trace.records = run.records;
    match assembled {
        Some((program, count)) => {
            trace.assembled_program = Some(program);
            trace.generate_rule_count = count;
        }
        None => trace.outcome = run.failed.expect("failed stage recorded"),
    }
    trace
}
