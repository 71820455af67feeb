use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use lowrank_rsaa::certificates::verify_report;
use lowrank_rsaa::experiments::{run_experiment, write_outputs, ExperimentSpec};
use lowrank_rsaa::problems::{make_problem_with, sample, BatchDocument, Family, Noise, ProblemConfig, ProblemDocument};
use lowrank_rsaa::solvers::{solve_nuclear, solve_pipeline, solve_rsaa, solve_saa, SolveReport, SolverConfig};
use lowrank_rsaa::theory::{evaluate_all, tuned_mcp, TheoryInputs};
use lowrank_rsaa::{Error, McpParams, Result};

const WORKERS_ENV: &str = "LOWRANK_RSAA_WORKERS";

#[derive(Parser)]
#[command(name = "lowrank-rsaa", version, about = "Low-rank PSD stochastic programs with MCP-regularized SAA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write records.csv and summary.json.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; defaults to the spec's output_path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per core). LOWRANK_RSAA_WORKERS takes precedence.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Solve one problem instance on one batch and print the report.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        batch: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Regularization weight; defaults to the theory-tuned value.
        #[arg(long)]
        lambda: Option<f64>,
        /// Solver configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// With `pipeline`, also write the nuclear-stage report here.
        #[arg(long)]
        nuclear_out: Option<PathBuf>,
    },
    /// Re-check a saved report. With --problem and --batch the certificate is recomputed.
    Check {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, requires = "batch")]
        problem: Option<PathBuf>,
        #[arg(long, requires = "problem")]
        batch: Option<PathBuf>,
        #[arg(long)]
        kkt_tol: Option<f64>,
    },
    /// Evaluate tuning parameters and bounds for the given inputs.
    Theory {
        #[arg(long)]
        inputs: PathBuf,
    },
    /// Draw a problem instance and write it as JSON.
    Generate {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        s: usize,
        #[arg(long = "radius", short = 'R')]
        radius: f64,
        #[arg(long)]
        noise_scale: f64,
        #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
        noise: NoiseArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        pilot_samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw an i.i.d. batch for a problem and write it as JSON.
    Sample {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Saa,
    Nuclear,
    Rsaa,
    Pipeline,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Denoising,
    Sensing,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    Exponential,
}

/// A user-facing failure: exit 1 for bad input, 2 otherwise.
struct Failure {
    invalid: bool,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { invalid: e.is_invalid_input(), message: e.to_string() }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { invalid: true, message: message.into() }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| Failure {
            invalid: false,
            message: format!("{}: {e}", path.display()),
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}").and_then(|_| stdout.flush()) {
                // A closed pipe (e.g. `| head`) is not an error.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Failure { invalid: false, message: format!("stdout: {e}") })
                }
                _ => Ok(()),
            }
        }
    }
}

fn workers(flag: usize) -> std::result::Result<usize, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| invalid(format!("{WORKERS_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn mcp_for(inst: &lowrank_rsaa::ProblemInstance, n: usize, lambda: Option<f64>) -> Result<McpParams> {
    match lambda {
        Some(l) => McpParams::tuned(l, inst.constants.u_l),
        None => tuned_mcp(inst, n),
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Experiment { spec, out, workers: flag } => {
            let spec: ExperimentSpec = read_json(&spec)?;
            let dir = out
                .or_else(|| spec.output_path.clone())
                .ok_or_else(|| invalid("no output directory: pass --out or set output_path"))?;
            let output = run_experiment(&spec, workers(flag)?)?;
            let (csv, json) = write_outputs(&output, &dir)?;
            eprintln!(
                "{} records, {} failures; wrote {} and {}",
                output.records.len(),
                output.summary.failures,
                csv.display(),
                json.display()
            );
        }
        Command::Solve { problem, batch, method, lambda, config, out, nuclear_out } => {
            let inst = read_json::<ProblemDocument>(&problem)?.into_instance()?;
            let batch = read_json::<BatchDocument>(&batch)?.into_batch()?;
            let cfg: SolverConfig = match config {
                Some(path) => read_json(&path)?,
                None => SolverConfig::default(),
            };
            let report: SolveReport = match method {
                MethodArg::Saa => solve_saa(&inst, &batch, &cfg)?,
                MethodArg::Nuclear => {
                    let prm = mcp_for(&inst, batch.len(), lambda)?;
                    solve_nuclear(&inst, &batch, prm.lambda(), &cfg)?
                }
                MethodArg::Rsaa => {
                    let prm = mcp_for(&inst, batch.len(), lambda)?;
                    let init = solve_nuclear(&inst, &batch, prm.lambda(), &cfg)?;
                    solve_rsaa(&inst, &batch, &prm, &cfg, &init.solution)?
                }
                MethodArg::Pipeline => {
                    let prm = mcp_for(&inst, batch.len(), lambda)?;
                    let (nuclear, rsaa) = solve_pipeline(&inst, &batch, &prm, &cfg)?;
                    if let Some(path) = nuclear_out {
                        emit(&nuclear, Some(&path))?;
                    }
                    rsaa
                }
            };
            emit(&report, out.as_deref())?;
        }
        Command::Check { report, problem, batch, kkt_tol } => {
            let report: SolveReport = read_json(&report)?;
            let data = match (problem, batch) {
                (Some(p), Some(b)) => Some((
                    read_json::<ProblemDocument>(&p)?.into_instance()?,
                    read_json::<BatchDocument>(&b)?.into_batch()?,
                )),
                _ => None,
            };
            let check = verify_report(&report, data.as_ref().map(|(i, b)| (i, b)), kkt_tol)?;
            emit(&check, None)?;
            if !check.passed {
                return Err(invalid("report failed verification"));
            }
        }
        Command::Theory { inputs } => {
            let inputs: TheoryInputs = read_json(&inputs)?;
            emit(&evaluate_all(&inputs)?, None)?;
        }
        Command::Generate { family, p, s, radius, noise_scale, noise, seed, pilot_samples, out } => {
            let family = match family {
                FamilyArg::Denoising => Family::Denoising,
                FamilyArg::Sensing => Family::Sensing,
            };
            let mut cfg = ProblemConfig::new(family, p, s, radius, noise_scale, seed);
            cfg.noise = match noise {
                NoiseArg::Gaussian => Noise::Gaussian,
                NoiseArg::Exponential => Noise::Exponential,
            };
            if let Some(m) = pilot_samples {
                cfg.pilot_samples = m;
            }
            let inst = make_problem_with(&cfg)?;
            emit(&ProblemDocument::from(&inst), out.as_deref())?;
        }
        Command::Sample { problem, n, seed, out } => {
            let inst = read_json::<ProblemDocument>(&problem)?.into_instance()?;
            let batch = sample(&inst, n, seed)?;
            emit(&BatchDocument::from(&batch), out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(if f.invalid { 1 } else { 2 })
        }
    }
}
