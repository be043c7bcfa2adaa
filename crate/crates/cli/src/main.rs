use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use mmbt_core::dsl::{self, ValidateOptions};
use mmbt_core::harness::{self, HarnessError, Prepared, RunConfig};
use mmbt_core::labsim::Task;

/// Exit status for malformed trees, configurations or arguments.
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mmbt",
    version,
    about = "Multimodal behaviour-tree lab simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Built-in task to use when no configuration file is given.
    #[arg(long, value_parser = parse_task, default_value = "capping")]
    task: Task,
    /// TOML run configuration; overrides --task.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fault injection with alternating proper/improper trials; a bare `--faults` means on.
    #[arg(long, value_parser = parse_switch, num_args = 0..=1, default_missing_value = "on")]
    faults: Option<bool>,
    /// Use the fault-free vote rule that divides the weighted sum by N.
    #[arg(long)]
    strict_eq1: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and print the JSON summary.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        trials: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Also write a JSONL trace of every trial.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a tree file and print diagnostics.
    Validate {
        #[arg(long = "tree", value_name = "FILE", conflicts_with = "tree_pos")]
        tree: Option<PathBuf>,
        #[arg(value_name = "TREE", required_unless_present = "tree")]
        tree_pos: Option<PathBuf>,
        /// Configuration whose modalities are considered known.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Exact fused accuracy of a condition under the configured surrogates.
    Oracle {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        condition: String,
        /// Prior probability that the condition truly holds.
        #[arg(long, default_value_t = 0.5)]
        prior: f64,
    },
    /// Write the JSONL trace of a single trial.
    Trace {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one skill in isolation with alternating proper/improper setups.
    Skill {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        skill: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Print a built-in tree or configuration.
    Show {
        #[arg(value_parser = parse_task)]
        task: Task,
        #[arg(long)]
        config: bool,
    },
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(format!("expected on or off, got `{s}`")),
    }
}

fn parse_task(s: &str) -> Result<Task, String> {
    Task::parse(s).ok_or_else(|| format!("unknown task `{s}` (expected capping or insertion)"))
}

/// Errors that should map to the "invalid input" exit status.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn harness_err(e: HarnessError) -> anyhow::Error {
    match e {
        HarnessError::Dsl(diags) => {
            let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
            Invalid(lines.join("\n")).into()
        }
        HarnessError::Config(_) | HarnessError::Io(_) | HarnessError::Fusion(_) => {
            Invalid(e.to_string()).into()
        }
        other => other.into(),
    }
}

fn prepare(source: &Source, trials: Option<u64>) -> anyhow::Result<Prepared> {
    let (mut cfg, tree) = match &source.config {
        Some(path) => RunConfig::load(path).map_err(harness_err)?,
        None => (
            RunConfig::shipped(source.task),
            harness::shipped_tree(source.task).to_string(),
        ),
    };
    if let Some(t) = trials {
        cfg = cfg.with_trials(t);
    }
    if let Some(s) = source.seed {
        cfg = cfg.with_seed(s);
    }
    match source.faults {
        Some(true) => cfg = cfg.with_faults(true, true),
        Some(false) => cfg = cfg.with_faults(false, false),
        None => {}
    }
    if source.strict_eq1 {
        cfg.strict_eq1 = true;
    }
    let prepared = harness::prepare(cfg, &tree).map_err(harness_err)?;
    for w in &prepared.warnings {
        eprintln!("{w}");
    }
    Ok(prepared)
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(value: &serde_json::Value, path: Option<&Path>) -> anyhow::Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            source,
            trials,
            workers,
            trace,
            out,
        } => {
            let prepared = prepare(&source, trials)?;
            let result = harness::run_trials(&prepared, workers).map_err(harness_err)?;
            if let Some(path) = trace {
                let mut w = output(Some(&path))?;
                harness::write_trace(&prepared, prepared.seed, 0..prepared.trials, &mut w)
                    .map_err(harness_err)?;
            }
            emit_json(&result.summary.to_json(), out.as_deref())?;
        }
        Command::Validate {
            tree,
            tree_pos,
            config,
        } => {
            let tree = tree.or(tree_pos).expect("clap requires a tree");
            let text = std::fs::read_to_string(&tree)
                .map_err(|e| Invalid(format!("{}: {e}", tree.display())))?;
            let name = tree.display();
            let parsed = match dsl::parse(&text) {
                Ok(t) => t,
                Err(diags) => {
                    for d in &diags {
                        println!("{name}:{d}");
                    }
                    return Ok(ExitCode::from(EXIT_INVALID));
                }
            };
            let mut opts = ValidateOptions::default();
            if let Some(path) = config {
                let (cfg, _) = RunConfig::load(&path).map_err(harness_err)?;
                let mut known: Vec<String> = cfg.surrogates.keys().cloned().collect();
                for f in cfg.fusion.values() {
                    known.extend(f.surrogates.keys().cloned());
                }
                opts = opts.with_modalities(known);
            }
            let diags = dsl::validate(&parsed, &opts);
            for d in &diags {
                println!("{name}:{d}");
            }
            if diags.iter().any(|d| d.is_error()) {
                return Ok(ExitCode::from(EXIT_INVALID));
            }
            println!("{name}: ok ({} warning(s))", diags.len());
        }
        Command::Oracle {
            source,
            condition,
            prior,
        } => {
            let prepared = prepare(&source, None)?;
            let report = harness::oracle(&prepared, &condition, prior).map_err(harness_err)?;
            emit_json(&serde_json::to_value(report)?, None)?;
        }
        Command::Trace { source, trial, out } => {
            let prepared = prepare(&source, None)?;
            let mut w = output(out.as_deref())?;
            let reports = harness::write_trace(&prepared, prepared.seed, [trial], &mut w)
                .map_err(harness_err)?;
            let r = &reports[0];
            eprintln!(
                "trial {trial}: {} after {:.2} s",
                r.outcome.as_str(),
                r.duration_s
            );
        }
        Command::Skill {
            source,
            skill,
            trials,
            workers,
        } => {
            let prepared = prepare(&source, None)?;
            let summary =
                harness::evaluate_skill(&prepared, &skill, trials, prepared.seed, workers)
                    .map_err(harness_err)?;
            emit_json(&serde_json::to_value(summary)?, None)?;
        }
        Command::Show { task, config } => {
            let text = if config {
                match task {
                    Task::Capping => harness::CAPPING_CONFIG,
                    Task::Insertion => harness::INSERTION_CONFIG,
                }
            } else {
                harness::shipped_tree(task)
            };
            print!("{text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
