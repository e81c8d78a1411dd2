//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::compare::compare;
use crate::run::{execute, Pipeline, RunOptions};

#[derive(Debug, Parser)]
#[command(
    name = "sublap",
    version,
    about = "Verification experiments for weighted sub-Laplacians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Thread count. Recorded in the report; computations are sequential.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and verify a Lyapunov certificate.
    CheckLyapunov(RunArgs),
    /// Smallest non-zero eigenvalues of the weighted sub-Laplacian.
    PoincareGap(RunArgs),
    /// Weighted gap against the `μ`-weighted mass form.
    ImprovedGap(RunArgs),
    /// Resolvent decay between two separated sets.
    Offdiag(RunArgs),
    /// Quadratic functional against fractional powers, and resolvent identities.
    QuadraticId(RunArgs),
    /// Non-local Poincaré estimates.
    Nonlocal(RunArgs),
    /// Covering nets, overlap counts and annulus estimates.
    Covering(RunArgs),
    /// Every pipeline whose section is present.
    All(RunArgs),
    /// Write the assembled forms as sparse triplet files.
    ExportForms(RunArgs),
    /// Field-wise relative differences of two reports.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
}

fn run(pipeline: Pipeline, a: RunArgs) -> i32 {
    let opts = RunOptions {
        config: a.config,
        out: a.out,
        threads: a.threads,
        seed: a.seed,
    };
    match execute(pipeline, &opts) {
        Ok(outcome) => {
            for a in &outcome.report.assertions {
                println!("{:<16} {}", a.pipeline, if a.holds { "holds" } else { "VIOLATED" });
            }
            println!("report written to {}", outcome.out_dir.display());
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs the command line and returns the process exit status: 0 when every
/// asserted inequality holds, 2 when one is violated, 1 on any error
/// including usage errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::CheckLyapunov(a) => run(Pipeline::CheckLyapunov, a),
        Command::PoincareGap(a) => run(Pipeline::PoincareGap, a),
        Command::ImprovedGap(a) => run(Pipeline::ImprovedGap, a),
        Command::Offdiag(a) => run(Pipeline::Offdiag, a),
        Command::QuadraticId(a) => run(Pipeline::QuadraticId, a),
        Command::Nonlocal(a) => run(Pipeline::Nonlocal, a),
        Command::Covering(a) => run(Pipeline::Covering, a),
        Command::All(a) => run(Pipeline::All, a),
        Command::ExportForms(a) => run(Pipeline::ExportForms, a),
        Command::Compare {
            report_a,
            report_b,
            tolerance,
        } => match compare(&report_a, &report_b, tolerance) {
            Ok(summary) => {
                for d in &summary.diffs {
                    let rel = d.relative.map_or("-".to_string(), |r| format!("{r:.3e}"));
                    let mark = if d.exceeds { "!" } else { " " };
                    println!("{mark} {} {} -> {} (relative {rel})", d.path, d.a, d.b);
                }
                println!(
                    "{} differing fields, {} beyond tolerance {}",
                    summary.diffs.len(),
                    summary.exceeding().count(),
                    tolerance
                );
                if summary.within_tolerance() {
                    0
                } else {
                    2
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
    }
}
