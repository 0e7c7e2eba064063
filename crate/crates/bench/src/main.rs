use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sphtri::dataset::write_results;
use sphtri::Method;
use sphtri_bench::{
    run_real_experiment, run_runtime_benchmark, run_synthetic_experiment, write_summary,
    BenchError, ExperimentDescriptor, Report, ResidualKind, SummaryRow,
};

/// Two-view triangulation benchmarks.
///
/// Noise levels (sigma) are standard deviations: radians for noise on the
/// sphere, pixels for noise in the image.
#[derive(Parser)]
#[command(name = "sphtri-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep noise levels over a synthetic scene.
    Synthetic(Common),
    /// Evaluate the methods on a correspondence dataset.
    Real(Common),
    /// Measure per-point runtime, single-threaded.
    Runtime(Common),
    /// Compare the closed-form and iterative optimal corrections; the s2
    /// columns hold the summed ray correction lengths.
    Fwcheck(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment descriptor (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master random seed; overrides the descriptor.
    #[arg(long)]
    seed: Option<u64>,
    /// Summary CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated methods; overrides the descriptor.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Optional per-point results CSV.
    #[arg(long)]
    results: Option<PathBuf>,
}

impl Common {
    fn descriptor(
        &self,
        default: ExperimentDescriptor,
    ) -> Result<ExperimentDescriptor, BenchError> {
        let mut desc = match &self.config {
            Some(path) => ExperimentDescriptor::from_json_file(path)?,
            None => default,
        };
        if let Some(seed) = self.seed {
            desc.seed = seed;
        }
        if let Some(names) = &self.methods {
            desc.methods = names
                .iter()
                .map(|n| n.parse::<Method>())
                .collect::<Result<_, _>>()
                .map_err(|e| BenchError::Config(e.to_string()))?;
        }
        desc.validate()?;
        Ok(desc)
    }
}

fn emit(rows: &[SummaryRow], out: &Option<PathBuf>) -> Result<(), BenchError> {
    let io = |e: &dyn std::fmt::Display| BenchError::Io(e.to_string());
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io(&format!("{}: {e}", path.display())))?;
            write_summary(rows, BufWriter::new(file)).map_err(|e| io(&e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_summary(rows, &mut lock).map_err(|e| io(&e))?;
            lock.flush().map_err(|e| io(&e))
        }
    }
}

fn finish(report: Report, args: &Common) -> Result<(), BenchError> {
    if report.dropped > 0 {
        eprintln!(
            "{} synthetic points were not visible in both images",
            report.dropped
        );
    }
    if let Some(path) = &args.results {
        write_results(&report.records, path)?;
    }
    emit(&report.rows, &args.out)
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Synthetic(args) => {
            let desc = args.descriptor(ExperimentDescriptor::default())?;
            eprintln!(
                "synthetic: {} sigma values x {} trials, {} methods",
                desc.sigmas.len(),
                desc.trials,
                desc.methods.len()
            );
            finish(
                run_synthetic_experiment(&desc, ResidualKind::Reprojection)?,
                &args,
            )
        }
        Command::Real(args) => {
            let desc = args.descriptor(ExperimentDescriptor::default())?;
            eprintln!(
                "real: loading {:?}",
                desc.dataset.as_deref().unwrap_or("".as_ref())
            );
            finish(run_real_experiment(&desc)?, &args)
        }
        Command::Runtime(args) => {
            let desc = args.descriptor(ExperimentDescriptor::default())?;
            eprintln!(
                "runtime: {} points, {} timed passes per method",
                desc.runtime.points, desc.runtime.repetitions
            );
            emit(&run_runtime_benchmark(&desc)?, &args.out)
        }
        Command::Fwcheck(args) => {
            let desc = args.descriptor(ExperimentDescriptor::fwcheck())?;
            eprintln!("fwcheck: reference method {}", desc.reference_method);
            finish(
                run_synthetic_experiment(&desc, ResidualKind::Correction)?,
                &args,
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
