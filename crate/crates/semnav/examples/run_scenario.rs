//! Run seeded trials of a builtin scenario with the deterministic oracle
//! and print the report table.
//!
//!     cargo run -p semnav --example run_scenario [scenario] [trials] [seed]

use semnav::harness::{builtin, render_report, run_trials, ReportFormat};
use semnav::semantic::OracleProvider;

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "sequential".to_string());
    let trials: usize = args.next().and_then(|v| v.parse().ok()).unwrap_or(10);
    let seed: u64 = args.next().and_then(|v| v.parse().ok()).unwrap_or(42);

    let scenario = builtin(&name).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2);
    });
    let provider = OracleProvider::default();
    let report = run_trials(&scenario, trials, &provider, seed);
    print!("{}", render_report(&report, ReportFormat::Text));

    for (i, trial) in report.rows[0].trial_results.iter().enumerate() {
        let stages: Vec<String> = trial
            .stage_results
            .iter()
            .map(|s| {
                format!(
                    "{:?}->{} (buffer {})",
                    s.stage_kind,
                    s.goal.label.as_deref().unwrap_or("-"),
                    s.replanned_with_buffer
                )
            })
            .collect();
        println!(
            "trial {i:>2}: success={} compliant={} {}",
            trial.overall_success,
            trial.semantic_compliance,
            stages.join(", ")
        );
    }
}
