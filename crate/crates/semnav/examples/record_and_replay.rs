//! Record a provider transcript during one run, then replay it twice and
//! verify the reports are byte-identical.
//!
//!     cargo run -p semnav --example record_and_replay

use semnav::harness::{builtin, render_report, run_trials, ReportFormat};
use semnav::llm_client::{load_transcript, RecordingProvider, ReplayProvider};
use semnav::semantic::OracleProvider;

fn main() {
    let dir = std::env::temp_dir().join("semnav-record-replay");
    std::fs::create_dir_all(&dir).unwrap();
    let transcript = dir.join("battery.jsonl");

    let scenario = builtin("battery").unwrap();
    let recorder =
        RecordingProvider::create(OracleProvider::default(), &transcript).unwrap();
    let recorded = run_trials(&scenario, 5, &recorder, 7);
    println!(
        "recorded {} trials, compliance {:.0}%",
        recorded.rows[0].trials,
        recorded.rows[0].compliance_rate * 100.0
    );

    let records = load_transcript(&transcript).unwrap();
    println!("transcript {} has {} records", transcript.display(), records.len());
    println!("first prompt hash: {}", &records[0].prompt_hash[..16]);

    let mut reports = Vec::new();
    for _ in 0..2 {
        let replay = ReplayProvider::from_file(&transcript).unwrap();
        let report = run_trials(&scenario, 5, &replay, 7);
        reports.push(render_report(&report, ReportFormat::Json));
    }
    assert_eq!(reports[0].as_bytes(), reports[1].as_bytes());
    println!("two replays rendered byte-identical reports ({} bytes)", reports[0].len());
}
