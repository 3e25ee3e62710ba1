use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlkit::{Level, TaskKind};
use mlkit_cli::{commands, CliError, Command, ExperimentConfig, InspectKind, ListKind, RunSettings};

#[derive(Parser)]
#[command(name = "mlkit", version, about = "Run tabular machine learning experiments from a JSON config")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Resample the first learner on the first task.
    Resample(RunArgs),
    /// Tune the hyperparameters given in the tuning block.
    Tune(RunArgs),
    /// Run every learner on every task.
    Benchmark(RunArgs),
    /// Wrapper-based feature selection.
    Featsel(RunArgs),
    /// Threshold sweeps, calibration, learning curves and partial dependence.
    Inspect {
        #[arg(value_enum)]
        what: InspectArg,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Print registered learners, measures or filters as CSV.
    List {
        #[arg(value_enum)]
        what: ListArg,
        /// Only entries for this task type.
        #[arg(long)]
        kind: Option<String>,
        /// Comma-separated properties every entry must have.
        #[arg(long, value_delimiter = ',')]
        properties: Vec<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "MLKIT_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "MLKIT_WORKERS")]
    workers: Option<usize>,
    /// benchmark, resample, tune or featsel.
    #[arg(long)]
    level: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InspectArg {
    Threshperf,
    Calibration,
    Learningcurve,
    Pdp,
    Fanova,
}

#[derive(Clone, Copy, ValueEnum)]
enum ListArg {
    Learners,
    Measures,
    Filters,
}

fn run_config(cmd: Command, a: RunArgs) -> Result<(), CliError> {
    let level = match a.level {
        Some(l) => Some(l.parse::<Level>().map_err(|e| CliError::config("--level", e.to_string()))?),
        None => None,
    };
    let (cfg, base) = ExperimentConfig::load(&a.config)?;
    let settings = RunSettings { seed: a.seed, workers: a.workers, level };
    let files = commands::run(cmd, &cfg, &base, &a.out, &settings)?;
    for f in files {
        println!("{}", a.out.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Resample(a) => run_config(Command::Resample, a),
        Cmd::Tune(a) => run_config(Command::Tune, a),
        Cmd::Benchmark(a) => run_config(Command::Benchmark, a),
        Cmd::Featsel(a) => run_config(Command::Featsel, a),
        Cmd::Inspect { what, args } => {
            let k = match what {
                InspectArg::Threshperf => InspectKind::Threshperf,
                InspectArg::Calibration => InspectKind::Calibration,
                InspectArg::Learningcurve => InspectKind::Learningcurve,
                InspectArg::Pdp => InspectKind::Pdp,
                InspectArg::Fanova => InspectKind::Fanova,
            };
            run_config(Command::Inspect(k), args)
        }
        Cmd::List { what, kind, properties } => {
            let what = match what {
                ListArg::Learners => ListKind::Learners,
                ListArg::Measures => ListKind::Measures,
                ListArg::Filters => ListKind::Filters,
            };
            kind.map(|k| k.parse::<TaskKind>())
                .transpose()
                .map_err(|e| CliError::config("--kind", e.to_string()))
                .and_then(|k| commands::list(what, k, &properties))
                .map(|csv| print!("{csv}"))
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
