//! Runs a subcommand through the library entry point of the command-line
//! tool and prints the resulting report as CSV.

use clap::Parser;
use fieldlab::cli::{run_report, Cli};

fn main() {
    let cli = Cli::parse_from(["fieldlab", "zeta", "--seed", "5", "--format", "csv"]);
    match run_report(&cli) {
        Ok(report) => {
            print!("{}", report.to_csv().expect("report serializes"));
            let failed = report.checks.iter().filter(|c| !c.pass).count();
            eprintln!("{} checks, {failed} failed", report.checks.len());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
