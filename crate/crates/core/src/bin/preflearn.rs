use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use preflearn::harness::demo::{demo_coordinate_dominant, demo_small_margin};
use preflearn::harness::record::{write_details_jsonl, write_records_csv};
use preflearn::harness::report::verify_noise;
use preflearn::harness::sweep::{write_summary_csv, write_sweep_csv};
use preflearn::harness::{run_experiment, run_sweep, Experiment, TrialDetail};
use preflearn::{Error, NoiseModel};

#[derive(Parser)]
#[command(
    name = "preflearn",
    version,
    about = "Learn simplex-weighted utilities from pairwise comparisons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of one experiment and write one CSV row per trial.
    Run(RunArgs),
    /// Run a grid over `n` or `eps`; also writes `<output>.summary.csv`.
    Sweep(RunArgs),
    /// Check symmetry, monotonicity, inverse accuracy and the inverse bound of a c.d.f.
    VerifyNoise {
        #[arg(long, value_enum)]
        model: NoiseChoice,
    },
    /// Run one of the impossibility demonstrations and print JSON.
    Demo {
        #[arg(long, value_enum)]
        which: DemoChoice,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `output`; stdout when neither is set.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write wall_seconds as 0.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseChoice {
    Logistic,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoChoice {
    Thm2,
    Thm6,
}

enum Failure {
    Lib(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_jsonl(exp: &Experiment, details: &[TrialDetail], timing: bool) -> Result<(), Failure> {
    if let Some(path) = &exp.config.jsonl {
        write_details_jsonl(BufWriter::new(File::create(path)?), details, timing)?;
    }
    Ok(())
}

fn report_aborts(details: &[TrialDetail]) -> bool {
    let mut any = false;
    for d in details.iter().filter(|d| d.aborted()) {
        any = true;
        eprintln!(
            "trial {} aborted: {}",
            d.record.trial_index,
            d.diagnostic.as_deref().unwrap_or("unknown")
        );
    }
    any
}

fn run(args: &RunArgs) -> Result<bool, Failure> {
    let exp = Experiment::from_path(&args.config)?;
    let details = run_experiment(&exp)?;
    let timing = !args.no_timing;
    let output = args.output.clone().or_else(|| exp.config.output.clone());
    let records: Vec<_> = details.iter().map(|d| d.record.clone()).collect();
    write_records_csv(open_output(output.as_deref())?, &records, timing)?;
    write_jsonl(&exp, &details, timing)?;
    Ok(report_aborts(&details))
}

fn sweep(args: &RunArgs) -> Result<bool, Failure> {
    let exp = Experiment::from_path(&args.config)?;
    let result = run_sweep(&exp)?;
    let timing = !args.no_timing;
    let output = args.output.clone().or_else(|| exp.config.output.clone());
    write_sweep_csv(open_output(output.as_deref())?, &result, timing)?;
    match &output {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(".summary.csv");
            write_summary_csv(BufWriter::new(File::create(PathBuf::from(name))?), &result)?;
        }
        None => write_summary_csv(io::stderr().lock(), &result)?,
    }
    eprintln!(
        "fitted slope of median {}: {:.6}",
        result.metric, result.slope
    );
    write_jsonl(&exp, &result.details, timing)?;
    Ok(report_aborts(&result.details))
}

fn verify(model: NoiseChoice) -> Result<(), Failure> {
    let nm = match model {
        NoiseChoice::Logistic => NoiseModel::logistic(1.0)?,
        NoiseChoice::Gaussian => NoiseModel::gaussian(1.0)?,
    };
    let r = verify_noise(&nm)?;
    let mut out = io::stdout().lock();
    writeln!(out, "model: {}", r.model)?;
    writeln!(out, "symmetry max error: {:e}", r.symmetry_max_error)?;
    writeln!(out, "monotone: {}", r.monotone)?;
    writeln!(out, "inverse max error: {:e}", r.inverse_max_error)?;
    if let Some(e) = r.logistic_identity_max_error {
        writeln!(out, "logistic curvature identity max error: {e:e}")?;
    }
    writeln!(out, "gamma on [-1, 1]: {:.9}", r.gamma_b1)?;
    writeln!(out, "max bound violation: {:e}", r.max_bound_violation)?;
    writeln!(out, "x,inverse,bound,slack")?;
    for b in &r.bound_table {
        writeln!(
            out,
            "{:.4},{:.12},{:.12},{:.6e}",
            b.x, b.inverse, b.bound, b.slack
        )?;
    }
    let ok = r.symmetry_max_error <= 1e-12
        && r.monotone
        && r.max_bound_violation <= 1e-12
        && r.logistic_identity_max_error.is_none_or(|e| e <= 1e-12);
    if ok {
        Ok(())
    } else {
        Err(Failure::Check("noise checks failed".into()))
    }
}

fn demo(which: DemoChoice, seed: u64) -> Result<(), Failure> {
    let json = match which {
        DemoChoice::Thm6 => serde_json::to_string_pretty(&demo_coordinate_dominant(3, 1000, seed)?),
        DemoChoice::Thm2 => serde_json::to_string_pretty(&demo_small_margin(
            &[1e-1, 1e-2, 1e-3],
            &NoiseModel::logistic(1.0)?,
            2000,
            0.9,
            seed,
        )?),
    }
    .map_err(Error::from)?;
    println!("{json}");
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_)
        | Error::Domain(_)
        | Error::Json(_)
        | Error::DimensionMismatch { .. }
        | Error::Unsupported(_) => 2,
        Error::Aborted(_) | Error::Numerical(_) | Error::NoPreimage(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::VerifyNoise { model } => verify(*model).map(|_| false),
        Command::Demo { which, seed } => demo(*which, *seed).map(|_| false),
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(3),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
