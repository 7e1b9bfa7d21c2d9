use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rgl::config::{Algorithm, ExperimentConfig, Size, Task};
use rgl::report::Report;
use rgl::spec::{CellName, ReadoutName};
use rgl::suites;

#[derive(Parser)]
#[command(
    name = "rgl",
    version,
    about = "Gradient engines for recurrent networks: equivalence, approximation and cost experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON). Each command has a built-in default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; trial i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// BPTT, RTRL and full-order e-prop agree; finite differences; learning-signal identity.
    Equiv {
        /// Flip one explicit Jacobian entry seen by the causal algorithms.
        #[arg(long)]
        mutate: bool,
    },
    /// Error of m-order e-prop against the exact gradient for every m.
    Approx,
    /// Per-step flops and trace memory scaling.
    Bench,
    /// Offline and online weight updates.
    Train,
    /// Incremental traces against brute-force definitional sums.
    Oracle,
}

#[derive(ValueEnum, Clone, Copy)]
enum Format {
    Csv,
    Json,
}

fn default_config(command: Command) -> ExperimentConfig {
    let sine = Task::SinePattern { frequencies: Vec::new() };
    match command {
        Command::Equiv { .. } => {
            let mut c = ExperimentConfig::new(sine, vec![Algorithm::Bptt, Algorithm::Rtrl], Size::Fixed(32), 10);
            c.random.readout = ReadoutName::LeakyIntegrator;
            c
        }
        Command::Approx => {
            let mut c = ExperimentConfig::new(sine, vec![Algorithm::Bptt], Size::Fixed(10), 10);
            c.random.n = Size::Fixed(6);
            c
        }
        Command::Bench => {
            ExperimentConfig::new(sine, vec![Algorithm::Bptt, Algorithm::Eprop, Algorithm::Rtrl], Size::Fixed(16), 1)
        }
        Command::Train => {
            let algs = vec![Algorithm::Bptt, Algorithm::Rtrl, Algorithm::Eprop];
            let mut c = ExperimentConfig::new(Task::TeacherStudent, algs, Size::Fixed(20), 1);
            c.learning_rate = 0.01;
            c
        }
        Command::Oracle => {
            let mut c = ExperimentConfig::new(sine, Vec::new(), Size::Range([2, 5]), 20);
            c.random.n = Size::Range([1, 3]);
            c.random.cell = CellName::Alif;
            c.random.readout = ReadoutName::LeakyIntegrator;
            c
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => default_config(cli.command),
    };
    if let Some(seed) = cli.seed {
        config.reseed(seed);
    }
    if let Command::Equiv { mutate: true } = cli.command {
        config.mutate = true;
    }
    let report: Report = match cli.command {
        Command::Equiv { .. } => suites::run_equivalence_suite(&config)?,
        Command::Approx => suites::run_approximation_report(&config)?,
        Command::Bench => suites::run_complexity_benchmark(&config)?,
        Command::Train => suites::run_online_training(&config)?,
        Command::Oracle => suites::run_oracle_suite(&config)?,
    };

    let out_path = cli.out.clone().or(config.output.clone());
    let sink: Box<dyn Write> = match &out_path {
        Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match cli.format {
        Format::Csv => report.write_csv(&mut sink)?,
        Format::Json => report.write_json(&mut sink)?,
    }
    sink.flush()?;

    let summary = report.summary();
    eprintln!(
        "{} rows: {} passed, {} failed, {} skipped; {}",
        summary.rows,
        summary.passed,
        summary.failed,
        summary.skipped,
        if summary.pass { "PASS" } else { "FAIL" }
    );
    for (name, ok) in summary.checks.iter().filter(|(_, ok)| !**ok) {
        eprintln!("check failed: {name} ({ok})");
    }
    Ok(summary.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
