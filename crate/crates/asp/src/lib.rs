//! A negation-free generate-define-test fragment of answer set programming.
//!
//! Source text is parsed by [`parse_program`], instantiated by
//! [`ground_program`] into choices and nogoods, and solved by
//! [`enumerate_models`].

pub mod eval;
pub mod ground;
pub mod solve;
pub mod syntax;
pub mod value;

pub use eval::{evaluate_comparison, evaluate_term, Binding, EvalError};
pub use ground::{
    ground_program, ground_program_with, GroundChoice, GroundError, GroundOptions, GroundProgram,
    Nogood,
};
pub use solve::{
    check_model, enumerate_models, enumerate_models_with, SolveError, SolveOptions, SolveResult,
    SolveStats, StableModel, Violation, DEFAULT_BUDGET, DEFAULT_LIMIT,
};
pub use syntax::{
    parse_program, render_program, validate_safety, Diagnostic, DiagnosticKind, Program,
    SyntaxError,
};
pub use value::{GroundAtom, Value};
