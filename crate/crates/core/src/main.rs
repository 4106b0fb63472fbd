use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use p2a_asp::{
    enumerate_models_with, ground_program_with, parse_program, validate_safety, GroundOptions, SolveOptions,
};
use puzzle2asp::bench::{evaluate_all, load_dataset, report, write_traces, EvalOptions, Split};
use puzzle2asp::llm::{BackendConfig, BackendRegistry, CompletionBackend, LiveConfig};
use puzzle2asp::pipeline::{parse_raw_constants, run_pipeline, PipelineOptions, PipelineOutcome};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "puzzle2asp", version, about = "Logic puzzles to answer set programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground and solve an ASP program
    Solve {
        file: PathBuf,
        /// Models to enumerate; 0 means all
        #[arg(long, default_value_t = 2)]
        limit: usize,
        /// Time budget in seconds
        #[arg(long, default_value_t = 10.0)]
        budget: f64,
        /// Print the ground program instead of solving
        #[arg(long)]
        ground_only: bool,
    },
    /// Turn one story into an ASP program
    Pipeline {
        story: PathBuf,
        /// Given constants, one `category: c1; c2; ...` line each
        #[arg(long)]
        constants: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
        /// Write the full trace as JSON
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate a JSON-lines dataset
    Bench {
        dataset: PathBuf,
        #[arg(long)]
        split: Option<Split>,
        #[command(flatten)]
        backend: BackendArgs,
        /// Write the JSON report here
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Write one trace file per case into this directory
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, default_value = "live")]
    backend: String,
    #[arg(long)]
    cassette: Option<PathBuf>,
    /// Record every exchange into the cassette
    #[arg(long)]
    record: bool,
    /// JSON array of responses for the scripted backend
    #[arg(long)]
    script: Option<PathBuf>,
    /// JSON config with `pipeline`, `live`, `limit` and `budget` sections
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    no_paraphrase: bool,
    #[arg(long)]
    no_format: bool,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    pipeline: Option<PipelineOptions>,
    live: Option<LiveConfig>,
    limit: Option<usize>,
    budget: Option<f64>,
}

struct Setup {
    backend: std::sync::Arc<dyn CompletionBackend>,
    eval: EvalOptions,
}

fn budget(secs: f64) -> Result<Option<Duration>, String> {
    if secs.is_finite() && secs > 0.0 {
        Ok(Some(Duration::from_secs_f64(secs)))
    } else if secs == 0.0 {
        Ok(None)
    } else {
        Err(format!("invalid budget {secs}"))
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

impl BackendArgs {
    fn setup(&self) -> Result<Setup, String> {
        let cfg: ConfigFile = match &self.config {
            Some(p) => serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
            None => ConfigFile::default(),
        };
        let mut pipeline = cfg.pipeline.unwrap_or_default();
        pipeline.enable_paraphrase &= !self.no_paraphrase;
        pipeline.enable_formatting &= !self.no_format;
        let mut eval = EvalOptions {
            pipeline,
            ..EvalOptions::default()
        };
        if let Some(limit) = cfg.limit {
            eval.limit = limit;
        }
        if let Some(b) = cfg.budget {
            eval.solve_budget = budget(b)?;
            eval.ground_budget = eval.solve_budget;
        }
        let backend_cfg = BackendConfig {
            cassette: self.cassette.clone(),
            script: self.script.clone(),
            record: self.record,
            live: cfg.live.unwrap_or_default().with_env(),
        };
        let backend = BackendRegistry::with_defaults()
            .build(&self.backend, &backend_cfg)
            .map_err(|e| e.to_string())?;
        Ok(Setup { backend, eval })
    }
}

fn solve(file: &Path, limit: usize, secs: f64, ground_only: bool) -> Result<(), String> {
    let program = parse_program(&read(file)?).map_err(|e| format!("{}: {e}", file.display()))?;
    let diags = validate_safety(&program);
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(lines.join("\n"));
    }
    let budget = budget(secs)?;
    let ground = ground_program_with(&program, &GroundOptions { budget }).map_err(|e| e.to_string())?;
    if ground_only {
        print!("{}", ground.dump());
        return Ok(());
    }
    let opts = SolveOptions {
        limit: if limit == 0 { usize::MAX } else { limit },
        budget,
    };
    let result = enumerate_models_with(&ground, &opts).map_err(|e| e.to_string())?;
    print!("{}", result.render());
    Ok(())
}

fn pipeline(story: &Path, constants: Option<&Path>, args: &BackendArgs, trace: Option<&Path>) -> Result<(), String> {
    let setup = args.setup()?;
    let story = read(story)?;
    let given = constants
        .map(|p| parse_raw_constants(&read(p)?).map_err(|e| format!("{}: {e}", p.display())))
        .transpose()?;
    let t = run_pipeline(&story, given.as_ref(), &setup.eval.pipeline, setup.backend.as_ref());
    if let Some(path) = trace {
        std::fs::write(path, t.to_json() + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
    }
    match (&t.outcome, &t.assembled_program) {
        (PipelineOutcome::Assembled, Some(p)) => {
            print!("{p}");
            Ok(())
        }
        (PipelineOutcome::StageParseFailure(s), _) => Err(format!("stage {s}: response did not parse")),
        (PipelineOutcome::BackendFailure(s), _) => Err(format!("stage {s}: backend failed")),
        _ => unreachable!("assembled trace has a program"),
    }
}

fn bench(
    dataset: &Path,
    split: Option<Split>,
    args: &BackendArgs,
    out: Option<&Path>,
    workers: usize,
    trace_dir: Option<&Path>,
) -> Result<(), String> {
    let setup = args.setup()?;
    let mut cases = load_dataset(dataset).map_err(|e| e.to_string())?;
    if let Some(s) = split {
        cases.retain(|c| c.split == s);
    }
    let results = evaluate_all(&cases, setup.backend.as_ref(), &setup.eval, workers);
    if let Some(dir) = trace_dir {
        write_traces(dir, &results).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    let rep = report(&results).map_err(|e| e.to_string())?;
    print!("{}", rep.to_table());
    if let Some(path) = out {
        std::fs::write(path, rep.to_json()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Solve {
            file,
            limit,
            budget,
            ground_only,
        } => solve(file, *limit, *budget, *ground_only),
        Command::Pipeline {
            story,
            constants,
            backend,
            trace,
        } => pipeline(story, constants.as_deref(), backend, trace.as_deref()),
        Command::Bench {
            dataset,
            split,
            backend,
            out,
            workers,
            trace_dir,
        } => bench(dataset, *split, backend, out.as_deref(), *workers, trace_dir.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
