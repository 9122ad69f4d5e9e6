use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use posbias::config::{load_config, ConfigError};
use posbias::formats::{self, EstimateFile, FormatError};
use posbias::harness::{self, HarnessError, ResultFormat};
use posbias_core::pipeline::{pair_stats_with_rankings, simulate};
use posbias_core::{derive_rankings, fit_mle, pairwise_estimate, true_propensities, FitOptions};

/// Position-bias propensity estimation from multi-ranker click logs.
#[derive(Debug, Parser)]
#[command(name = "posbias", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a corpus, two rankers and their click logs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_logs: PathBuf,
        #[arg(long)]
        out_corpus: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate relative propensities from a click log.
    Estimate {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long, value_enum, default_value_t = Method::Mle)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        /// Resolve log ids against this corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Cross-check the rankings recovered from the logs against this file.
        #[arg(long)]
        rankings: Option<PathBuf>,
        /// Write per-pair click statistics here.
        #[arg(long)]
        stats_out: Option<PathBuf>,
    },
    /// Run a sweep or overlap experiment.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated sweep counts or overlap fractions.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 6)]
        runs: usize,
        /// Base seed; overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Print the simulated propensities (1/r)^eta for r = 1..=top-k.
    Truth {
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Mle,
    Pairwise,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Sweep,
    Overlap,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_IMPOSSIBLE: u8 = 3;

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<posbias_core::Error> for Failure {
    fn from(e: posbias_core::Error) -> Self {
        let code = if e.is_estimation_impossible() {
            EXIT_IMPOSSIBLE
        } else {
            EXIT_VALIDATION
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        let code = match &e {
            FormatError::Io(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match &e {
            ConfigError::Io { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Core(e) => e.into(),
            HarnessError::Io(e) => e.into(),
            e => Failure {
                code: EXIT_VALIDATION,
                message: e.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

fn validation(message: String) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message,
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            out_logs,
            out_corpus,
            seed,
        } => {
            let mut config = load_config(config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let sim = simulate(&config)?;
            formats::save_corpus(&out_corpus, &sim.corpus)?;
            formats::save_logs(&out_logs, &sim.logs)?;
            eprintln!(
                "simulated {} records over {} queries",
                sim.logs.len(),
                sim.corpus.len()
            );
        }
        Command::Estimate {
            logs,
            top_k,
            method,
            out,
            corpus,
            rankings,
            stats_out,
        } => {
            let corpus = corpus.map(formats::load_corpus).transpose()?;
            let logs = formats::load_logs(&logs, corpus.as_ref())?;
            let derived = derive_rankings(&logs)?;
            if let Some(path) = rankings {
                let given = formats::load_rankings(path, logs.catalog())?;
                derived.check_consistent_with(&given)?;
            }
            let stats = pair_stats_with_rankings(&logs, &derived, top_k)?;
            if let Some(path) = stats_out {
                formats::save_pair_stats(path, &stats)?;
            }
            let file = match method {
                Method::Mle => {
                    let est = fit_mle(&stats, &FitOptions::default())?;
                    if !est.converged {
                        eprintln!(
                            "warning: ascent stopped after {} iterations without converging",
                            est.iterations
                        );
                    }
                    EstimateFile::from(&est)
                }
                Method::Pairwise => EstimateFile::from(&pairwise_estimate(&stats)?),
            };
            if !file.unidentifiable.is_empty() {
                eprintln!("unidentifiable positions: {:?}", file.unidentifiable);
            }
            formats::save_estimate(out, &file)?;
        }
        Command::Experiment {
            kind,
            config,
            values,
            runs,
            seed,
            out,
            format,
        } => {
            let mut config = load_config(config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let rows = match kind {
                ExperimentKind::Sweep => {
                    let xs = values
                        .iter()
                        .map(|v| v.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| validation(format!("--values: {e}")))?;
                    harness::run_sweep_experiment(&config, &xs, runs)?
                }
                ExperimentKind::Overlap => {
                    let xs = values
                        .iter()
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| validation(format!("--values: {e}")))?;
                    harness::run_overlap_experiment(&config, &xs, runs)?
                }
            };
            let format = match format {
                Format::Csv => ResultFormat::Csv,
                Format::Json => ResultFormat::Json,
            };
            harness::emit_results(&rows, out, format)?;
        }
        Command::Truth { eta, top_k } => {
            if !(eta >= 0.0 && eta.is_finite()) || top_k == 0 {
                return Err(validation("eta must be non-negative and top-k positive".into()));
            }
            let p = true_propensities(eta, top_k);
            println!("{}", serde_json::to_string(&p).expect("floats serialize"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
