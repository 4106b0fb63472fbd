//! Dataset loading, per-case evaluation, scoring and reports.

mod compare;
mod dataset;
mod report;

use std::path::Path;
use std::time::Duration;

use p2a_asp::{
    enumerate_models_with, ground_program_with, validate_safety, GroundError, GroundOptions,
    SolveOptions, SolveStats, DEFAULT_BUDGET, DEFAULT_LIMIT,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::llm::CompletionBackend;
use crate::pipeline::{run_pipeline, PipelineOptions, PipelineOutcome, PipelineTrace, Stage};

pub use compare::{compare_solution, CompareError};
pub use dataset::{load_dataset, parse_dataset, GoldSolution, PuzzleCase, SchemaError, Split};
pub use report::{report, Report, ReportError, SplitSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "stage", rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    WrongModel,
    NoModel,
    MultipleModels,
    SyntaxError(Stage),
    FormatError(Stage),
    BackendError(Stage),
    Timeout,
}

impl Outcome {
    /// Histogram key, e.g. `syntax_error(constraint_rules)`.
    pub fn label(&self) -> String {
        match self {
            Outcome::Correct => "correct".into(),
            Outcome::WrongModel => "wrong_model".into(),
            Outcome::NoModel => "no_model".into(),
            Outcome::MultipleModels => "multiple_models".into(),
            Outcome::SyntaxError(s) => format!("syntax_error({s})"),
            Outcome::FormatError(s) => format!("format_error({s})"),
            Outcome::BackendError(s) => format!("backend_error({s})"),
            Outcome::Timeout => "timeout".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub pipeline: PipelineOptions,
    pub limit: usize,
    pub solve_budget: Option<Duration>,
    pub ground_budget: Option<Duration>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            pipeline: PipelineOptions::default(),
            limit: DEFAULT_LIMIT,
            solve_budget: Some(DEFAULT_BUDGET),
            ground_budget: Some(DEFAULT_BUDGET),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub id: String,
    pub split: Split,
    pub outcome: Outcome,
    /// Models found, up to the enumeration limit.
    pub models: Option<usize>,
    pub detail: Option<String>,
    pub stats: Option<SolveStats>,
    pub trace: PipelineTrace,
}

fn rules_stage(rule: usize, trace: &PipelineTrace) -> Stage {
    if rule < trace.generate_rule_count {
        Stage::GenerateRules
    } else {
        Stage::ConstraintRules
    }
}

/// Runs the pipeline on one case, then grounds, solves and scores.
pub fn evaluate_case(
    case: &PuzzleCase,
    backend: &dyn CompletionBackend,
    opts: &EvalOptions,
) -> CaseResult {
    let trace = run_pipeline(
        &case.story,
        case.given_constants.as_ref(),
        &opts.pipeline,
        backend,
    );
    let mut result = CaseResult {
        id: case.id.clone(),
        split: case.split,
        outcome: Outcome::Timeout,
        models: None,
        detail: None,
        stats: None,
        trace,
    };
    let trace = &result.trace;
    let (outcome, detail) = match trace.outcome {
        PipelineOutcome::BackendFailure(s) => (Outcome::BackendError(s), None),
        PipelineOutcome::StageParseFailure(s) if s.emits_rules() => (Outcome::SyntaxError(s), None),
        PipelineOutcome::StageParseFailure(s) => (Outcome::FormatError(s), None),
        PipelineOutcome::Assembled => {
            let program = trace.assembled_program.as_ref().expect("assembled");
            let diags = validate_safety(program);
            if let Some(d) = diags.first() {
                (
                    Outcome::SyntaxError(rules_stage(d.rule, trace)),
                    Some(d.to_string()),
                )
            } else {
                let gopts = GroundOptions {
                    budget: opts.ground_budget,
                };
                match ground_program_with(program, &gopts) {
                    Err(GroundError::Unsafe(d)) => (
                        Outcome::SyntaxError(rules_stage(d[0].rule, trace)),
                        Some(d[0].to_string()),
                    ),
                    Err(e @ GroundError::Eval { rule, .. }) => (
                        Outcome::SyntaxError(rules_stage(rule, trace)),
                        Some(e.to_string()),
                    ),
                    Err(e) => (Outcome::Timeout, Some(e.to_string())),
                    Ok(ground) => {
                        let sopts = SolveOptions {
                            limit: opts.limit,
                            budget: opts.solve_budget,
                        };
                        match enumerate_models_with(&ground, &sopts) {
                            Err(e) => (Outcome::Timeout, Some(e.to_string())),
                            Ok(solved) => {
                                result.models = Some(solved.models.len());
                                result.stats = Some(solved.stats.clone());
                                match solved.models.len() {
                                    0 => (Outcome::NoModel, None),
                                    1 => {
                                        let sigs = trace.predicates.as_deref().unwrap_or_default();
                                        match compare_solution(&solved.models[0], &case.gold, sigs)
                                        {
                                            Ok(true) => (Outcome::Correct, None),
                                            Ok(false) => (Outcome::WrongModel, None),
                                            Err(e) => (Outcome::WrongModel, Some(e.to_string())),
                                        }
                                    }
                                    _ => (Outcome::MultipleModels, None),
                                }
                            }
                        }
                    }
                }
            }
        }
    };
    result.outcome = outcome;
    result.detail = detail;
    result
}

/// Evaluates cases on `workers` threads; results keep input order.
pub fn evaluate_all(
    cases: &[PuzzleCase],
    backend: &dyn CompletionBackend,
    opts: &EvalOptions,
    workers: usize,
) -> Vec<CaseResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        cases
            .par_iter()
            .map(|c| evaluate_case(c, backend, opts))
            .collect()
    })
}

/// Writes `<dir>/<id>.json` for every result.
pub fn write_traces(dir: &Path, results: &[CaseResult]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in results {
        let name: String =
            r.id.chars()
                .map(|c| {
                    if c.is_alphanumeric() || c == '-' || c == '_' {
                        c
                    } else {
                        '_'
                    }
                })
                .collect();
        std::fs::write(dir.join(format!("{name}.json")), r.trace.to_json() + "\n")?;
    }
    Ok(())
}
