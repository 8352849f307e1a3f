use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tforms::cli::check::Suite;
use tforms::cli::{self, DensityArgs, Outcome, Problem, EXIT_ERROR};

/// Classification of torsion Hermitian forms on the circle.
#[derive(Parser)]
#[command(name = "tforms", version)]
struct Args {
    /// Sampling resolution for symbolic fields; sampled fields must match it.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Germ signatures of the positive and negative parts of a form.
    Classify {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide congruence of two forms and emit certificates.
    Congruence {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Positive/negative splitting.
    Split {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Canonical metabolizer of a definite form.
    Metabolizer {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral density curve `lambda,F` as CSV.
    Density {
        problem: PathBuf,
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded property suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the task named inside a problem file.
    Run {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("TFORMS_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or(format!("TFORMS_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn dispatch(args: Args) -> tforms::Result<Outcome> {
    let load = |p: &Path| Problem::load(p, args.grid);
    match &args.command {
        Command::Classify { problem, out } => cli::run_classify(&load(problem)?, out.as_deref()),
        Command::Congruence { a, b, out } => cli::run_congruence(&load(a)?.form()?, &load(b)?.form()?, out.as_deref()),
        Command::Split { problem, out } => cli::run_split(&load(problem)?, out.as_deref()),
        Command::Metabolizer { problem, out } => cli::run_metabolizer(&load(problem)?, out.as_deref()),
        Command::Density { problem, lambda_min, lambda_max, points, out } => {
            let d = DensityArgs { lambda_min: *lambda_min, lambda_max: *lambda_max, points: *points };
            cli::run_density(&load(problem)?, d, out.as_deref())
        }
        Command::Check { seed, suite, out } => cli::run_check_task(*seed, *suite, out.as_deref()),
        Command::Run { problem, out } => cli::run(&load(problem)?, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_ERROR as u8);
    }
    match dispatch(args) {
        Ok(o) => {
            eprintln!("{}", o.summary);
            ExitCode::from(o.exit as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
