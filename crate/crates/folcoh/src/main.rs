use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use folcoh::foliation::DEFAULT_REL_TOL;
use folcoh::properties::Status;
use folcoh::report::{list_cases, run_case, RunConfig, Suite};

#[derive(Parser)]
#[command(name = "folcoh", version, about = "Basic and antibasic cohomology of foliations on finite models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in cases with their expected tables.
    List,
    /// Compute one case and write its report.
    Run {
        #[arg(long)]
        case: String,
        /// Scalar grid resolution (see `list` for how it maps to sizes).
        #[arg(long, conflicts_with = "jmax")]
        n: Option<usize>,
        /// Peter-Weyl truncation for su2 cases.
        #[arg(long)]
        jmax: Option<f64>,
        /// Relative rank threshold.
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        tol: f64,
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report path; spectra go next to it as <stem>.spectra.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // usage errors get their own status so that 2 keeps meaning a failed check
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::List => {
            print!("{}", list_cases());
            ExitCode::SUCCESS
        }
        Command::Run { case, n, jmax, tol, suite, seed, out } => {
            let cfg = match RunConfig::new(&case, n, jmax, tol, suite, seed) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(64);
                }
            };
            let report = run_case(&cfg);
            match &out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, report.to_json()) {
                        eprintln!("error: writing {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                    let csv = path.with_extension("spectra.csv");
                    if let Err(e) = report.write_spectra(&csv) {
                        eprintln!("error: writing {}: {e}", csv.display());
                        return ExitCode::from(2);
                    }
                }
                None => println!("{}", report.to_json()),
            }
            eprintln!("{} at {}", report.case, report.resolution.label);
            if let Some(b) = &report.betti {
                eprintln!("  h = {:?}  h_b = {:?}  h_a = {:?}", b.h, b.h_b, b.h_a_rank);
            }
            for r in report.identities.iter().filter(|r| r.failed()) {
                eprintln!("  identity {} failed: residual {:e}", r.name, r.residual);
            }
            for p in report.properties.iter().filter(|p| p.status == Status::Failed) {
                eprintln!("  property {} failed: {}", p.name, p.detail.as_deref().unwrap_or(""));
            }
            for d in &report.discrepancies {
                eprintln!("  discrepancy ({:?}) {}^{}: expected {}, computed {}", d.source, d.table, d.degree, d.expected, d.computed);
            }
            for e in &report.errors {
                eprintln!("  error: {e}");
            }
            eprintln!("  outcome: {:?} (exit {})", report.outcome, report.exit_code);
            ExitCode::from(report.exit_code as u8)
        }
    }
}
