use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use srcomplement_cli::run::{run_file, Command, Format, Options};

/// Minimal rigid complements of sub-Riemannian structures.
///
/// Exit status: 0 on success, 2 for a degenerate or invalid structure or
/// complement, 1 for I/O and parse errors.
#[derive(Parser)]
#[command(name = "srcomp", version)]
struct Cli {
    /// Relative rank tolerance.
    #[arg(long, global = true, default_value_t = srcomplement::DEFAULT_TOL)]
    tol: f64,
    /// Seed of the sampled step-2 nondegeneracy checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Emit JSON only.
    #[arg(long, global = true, conflicts_with = "text")]
    json: bool,
    /// Emit a text summary only.
    #[arg(long, global = true)]
    text: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Filtration, growth vector and nondegeneracy checks.
    Analyze { file: PathBuf },
    /// The minimal rigid complement.
    Complement {
        file: PathBuf,
        /// Skip the trace constraint in the last step.
        #[arg(long)]
        alternate: bool,
    },
    /// Validate the `complement` blocks of the file and test V-rigidity.
    Check { file: PathBuf },
    /// Full report: complements, V-normality, Popp volume, torsion.
    Report { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        eprintln!("error: --tol must be a positive number");
        return ExitCode::from(1);
    }
    let format = if cli.json {
        Format::Json
    } else if cli.text {
        Format::Text
    } else {
        Format::Default
    };
    let mut opts = Options { tol: cli.tol, seed: cli.seed, alternate: false, format };
    let (command, file) = match cli.command {
        Cmd::Analyze { file } => (Command::Analyze, file),
        Cmd::Complement { file, alternate } => {
            opts.alternate = alternate;
            (Command::Complement, file)
        }
        Cmd::Check { file } => (Command::Check, file),
        Cmd::Report { file } => (Command::Report, file),
    };
    let out = run_file(command, &file, &opts);
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.code as u8)
}
