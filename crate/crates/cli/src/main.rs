mod bundle;
mod commands;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::Failure;
use report::Report;

#[derive(Parser, Debug)]
#[command(name = "loopshift", version, about = "Loop shifts: entropy, periodic points and almost-isomorphism codes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Truncation degree; overrides the degree in spec files.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Length budget for explicit codes and graphs.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Width of entropy enclosures.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Gap exponent as a fraction, e.g. 3/2.
    #[arg(long, global = true)]
    pub beta: Option<String>,
    /// Bundle directory for almost-iso; report file for other commands.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    ReturnTimes,
    CodingTimes,
    Injectivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    F,
    G,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entropy, period, recurrence class, SPR verdict and periodic-point tables.
    Analyze { spec: PathBuf },
    /// Builds the common extension of two shifts and writes a verified bundle.
    AlmostIso { f: PathBuf, g: PathBuf },
    /// Seeded statistics on a spec file or a bundle directory.
    Simulate {
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Largest period for injectivity checks.
        #[arg(long, default_value_t = 8)]
        period: usize,
        /// Number of return-time tail terms.
        #[arg(long, default_value_t = 40)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = SideArg::F)]
        side: SideArg,
    },
    /// Deletes loops with length counts R from a shift and checks the identities.
    LoopsLemma {
        spec: PathBuf,
        /// Deletions as `length:count` pairs, e.g. `1:1,3:2`.
        #[arg(long)]
        r: String,
        /// Allow deletions without a certified magic loop.
        #[arg(long)]
        no_magic: bool,
        /// Draw deletions from a designated copy of the R loops.
        #[arg(long)]
        restrict: bool,
    },
    /// Short-loop removal and gap preparation of a pair of shifts.
    Gapprep { f: PathBuf, g: PathBuf },
    /// First-return series of a vertex in a nonnegative integer matrix.
    FirstReturn {
        spec: Option<PathBuf>,
        /// Matrix as JSON, e.g. `[[1,1],[1,0]]`.
        #[arg(long, conflicts_with = "spec")]
        matrix: Option<String>,
        #[arg(long)]
        vertex: Option<usize>,
    },
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Analyze { spec } => commands::analyze(g, spec),
        Command::AlmostIso { f, g: gspec } => commands::almost_iso(g, f, gspec),
        Command::Simulate {
            input,
            mode,
            samples,
            period,
            n_max,
            side,
        } => commands::simulate(g, input, *mode, *samples, *period, *n_max, *side),
        Command::LoopsLemma {
            spec,
            r,
            no_magic,
            restrict,
        } => commands::loops_lemma(g, spec, r, !no_magic, *restrict),
        Command::Gapprep { f, g: gspec } => commands::gapprep(g, f, gspec),
        Command::FirstReturn { spec, matrix, vertex } => {
            commands::first_return(g, spec.as_deref(), matrix.as_deref(), *vertex)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|rep| {
        let writes_file = !matches!(cli.command, Command::AlmostIso { .. });
        rep.emit(cli.global.format, cli.global.output.as_deref().filter(|_| writes_file))?;
        Ok(rep)
    });
    let failure = match result {
        Ok(rep) => rep.verdict,
        Err(f) => Some(f),
    };
    match failure {
        None => ExitCode::from(error::OK as u8),
        Some(f) => {
            match cli.global.format {
                Format::Text => eprintln!("error: {f}"),
                Format::Json => eprintln!(
                    "{}",
                    serde_json::json!({"error": f.kind, "code": f.code, "message": f.message})
                ),
            }
            ExitCode::from(f.code as u8)
        }
    }
}
