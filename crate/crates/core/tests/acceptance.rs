//! Runs the full verification suite, one line per criterion.
//!
//! Set `FBMLAB_ACCEPT_SUITE=fast` for the quick subset.

use std::process::ExitCode;

use fbmlab_core::acceptance::{run_suite, Suite, DEFAULT_SEED};

fn main() -> ExitCode {
    let suite = match std::env::var("FBMLAB_ACCEPT_SUITE") {
        Ok(s) => s.parse().expect("FBMLAB_ACCEPT_SUITE must be fast or full"),
        Err(_) => Suite::Full,
    };
    println!("\nrunning acceptance suite ({suite:?}, seed {DEFAULT_SEED})");
    let report = run_suite(suite, DEFAULT_SEED, |r| println!("{}", r.line()));
    let failed: Vec<u8> = report.results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} in {:.1} s\n",
        report.results.len() - failed.len(),
        failed.len(),
        failed,
        report.elapsed_ms as f64 / 1000.0
    );
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
