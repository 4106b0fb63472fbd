//! Natural-language logic puzzles to answer set programs: prompt pipeline,
//! completion backends and the benchmark harness.

pub mod bench;
pub mod llm;
pub mod pipeline;
