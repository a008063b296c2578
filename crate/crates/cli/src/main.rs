use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boxreach::MethodChoice;
use boxreach_cli::problem::{Loaded, ProblemFile, Request};
use boxreach_cli::run::{self, Outcome};
use boxreach_cli::{CliError, OUT_DIR_ENV};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boxreach", version, about = "Interval over-approximation of reachable sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(multiple = false)]
struct MethodArgs {
    /// Method name, or `auto`.
    #[arg(long)]
    method: Option<String>,
    /// Run every applicable method.
    #[arg(long)]
    all: bool,
}

impl MethodArgs {
    fn request(&self) -> Result<Option<Request>, CliError> {
        if self.all {
            return Ok(Some(Request::All));
        }
        self.method
            .as_deref()
            .map(|m| {
                m.parse::<MethodChoice>()
                    .map(Request::One)
                    .map_err(|e| CliError::Input(format!("--method: {e}")))
            })
            .transpose()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Over-approximate the reachable set of a problem file.
    Reach {
        file: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long, env = OUT_DIR_ENV, default_value = "boxreach-out")]
        out: PathBuf,
        /// Runge-Kutta steps over the horizon.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write a Monte-Carlo successor cloud of this many samples.
        #[arg(long)]
        cloud: Option<usize>,
    },
    /// Check the boxes against a Monte-Carlo successor cloud.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long, env = OUT_DIR_ENV, default_value = "boxreach-out")]
        out: PathBuf,
    },
    /// Built-in benchmarks with a timing table.
    Bench {
        #[command(subcommand)]
        which: Bench,
    },
}

#[derive(Subcommand)]
enum Bench {
    /// Traffic network with `n` links (odd, >= 3).
    Traffic {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Write artifacts here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(file: &Path, steps: Option<usize>, seed: Option<u64>, request: Option<Request>) -> Result<Loaded, CliError> {
    let mut f = ProblemFile::read(file)?;
    if let Some(s) = steps {
        f.solver.steps = s;
    }
    if let Some(s) = seed {
        f.solver.seed = s;
    }
    let mut loaded = f.build()?;
    if let Some(r) = request {
        loaded.request = r;
    }
    Ok(loaded)
}

fn summarize(outcome: &Outcome) {
    for r in &outcome.report.results {
        println!("{}: {}", r.method, r.over_approx);
    }
    for s in &outcome.report.skipped {
        println!("{} {}: {}", s.method, if s.failed { "failed" } else { "skipped" }, s.reason);
    }
}

fn main_inner(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Reach {
            file,
            method,
            out,
            steps,
            seed,
            cloud,
        } => {
            let loaded = load(&file, steps, seed, method.request()?)?;
            let cloud = cloud.map(|n| (n, loaded.config.seed));
            let outcome = run::reach(&loaded, Some(&out), cloud)?;
            summarize(&outcome);
            Ok(!outcome.failed)
        }
        Command::Validate {
            file,
            samples,
            seed,
            method,
            out,
        } => {
            let loaded = load(&file, None, None, Some(method.request()?.unwrap_or(Request::All)))?;
            let outcome = run::validate(&loaded, samples, seed, Some(&out))?;
            for c in &outcome.result.validation.as_ref().expect("validation present").methods {
                println!(
                    "{}: containment {:.4}, worst slack {:.3e}{}",
                    c.method,
                    c.fraction,
                    c.worst_slack,
                    if c.sound { "" } else { "  SOUNDNESS FAILURE" }
                );
            }
            for s in &outcome.report.skipped {
                println!("{} {}: {}", s.method, if s.failed { "failed" } else { "skipped" }, s.reason);
            }
            Ok(!outcome.failed)
        }
        Command::Bench {
            which: Bench::Traffic { n, method, steps, out },
        } => {
            let request = method.request()?.unwrap_or(Request::All);
            let outcome = run::bench_traffic(n, steps, request, out.as_deref())?;
            print!("{}", run::bench_table(&outcome.report));
            Ok(!outcome.failed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
