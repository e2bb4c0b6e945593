//! Batch front end: parse problem files, run analysis stages, and print
//! deterministic text and JSON reports.

mod pipeline;
mod problem;
mod report;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use pipeline::{run_file, CommandKind, Overrides, RunOutput};

#[derive(Parser)]
#[command(
    name = "presymp",
    version,
    about = "Constraint analysis for singular velocity-quadratic Lagrangians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Problem files to process.
    #[arg(required = true, value_name = "FILE")]
    files: Vec<PathBuf>,

    /// Also write the report as JSON (an array when several files are given).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Random seed for numeric sampling (overrides the file's [engine] seed).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Stabilization round limit (overrides the file's setting).
    #[arg(long, value_name = "N")]
    max_generations: Option<u32>,

    /// Sample points per numeric check (overrides the file's setting).
    #[arg(long, value_name = "N")]
    trials: Option<u32>,

    /// Process this many files in parallel.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: chains, classification, evolution, canonical.
    Analyze(RunArgs),
    /// Canonical (phase-space) constraint chain and classification only.
    Hamiltonian(RunArgs),
    /// Velocity-space chains, with and without the second-order condition.
    Lagrangian(RunArgs),
    /// Evolution-operator identities and the generation-shift table.
    KCheck(RunArgs),
    /// Valence, reduced ranks, and kernel invariance of a transformation.
    CanonicalCheck(RunArgs),
    /// Parse and build every block of the file without analysis.
    Validate(RunArgs),
}

impl Command {
    fn split(&self) -> (CommandKind, &RunArgs) {
        match self {
            Command::Analyze(a) => (CommandKind::Analyze, a),
            Command::Hamiltonian(a) => (CommandKind::Hamiltonian, a),
            Command::Lagrangian(a) => (CommandKind::Lagrangian, a),
            Command::KCheck(a) => (CommandKind::KCheck, a),
            Command::CanonicalCheck(a) => (CommandKind::CanonicalCheck, a),
            Command::Validate(a) => (CommandKind::Validate, a),
        }
    }
}

fn run_all(kind: CommandKind, args: &RunArgs) -> Vec<RunOutput> {
    let overrides = Overrides {
        seed: args.seed,
        max_generations: args.max_generations,
        trials: args.trials,
    };
    let jobs = args.jobs.max(1).min(args.files.len().max(1));
    if jobs == 1 {
        return args
            .files
            .iter()
            .map(|f| run_file(kind, f, &overrides))
            .collect();
    }
    // Independent analyses; workers pull the next unprocessed index and the
    // results are reassembled in input order.
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<RunOutput>> = Vec::new();
    slots.resize_with(args.files.len(), || None);
    let slots = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= args.files.len() {
                    break;
                }
                let out = run_file(kind, &args.files[i], &overrides);
                slots.lock().expect("worker panicked")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .iter_mut()
        .map(|s| s.take().expect("every file was processed"))
        .collect()
}

fn main() {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    let outputs = run_all(kind, args);

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let stderr = std::io::stderr();
    let mut err = stderr.lock();

    let mut first = true;
    for o in &outputs {
        if let Some(text) = &o.text {
            if !first {
                let _ = writeln!(out);
            }
            let _ = out.write_all(text.as_bytes());
            first = false;
        }
        for w in &o.warnings {
            let _ = writeln!(err, "warning: {w}");
        }
        for e in &o.errors {
            let _ = writeln!(err, "error: {e}");
        }
    }
    let _ = out.flush();

    if let Some(path) = &args.json {
        let value = if outputs.len() == 1 {
            outputs[0].json.clone()
        } else {
            serde_json::Value::Array(outputs.iter().map(|o| o.json.clone()).collect())
        };
        let doc = serde_json::to_string_pretty(&value).expect("reports serialize");
        if let Err(e) = std::fs::write(path, doc + "\n") {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            std::process::exit(2);
        }
    }
    let _ = err.flush();

    let code = outputs.iter().map(|o| o.code).max().unwrap_or(0);
    std::process::exit(code.into());
}
