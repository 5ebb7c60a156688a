//! Check the calibrated reconstruction fixture against its reference
//! values: two candidate metric blocks and the two canonical decisions.
//!
//!     cargo run -p semnav --example calibration_fixture

use semnav::harness::calibration_candidates;
use semnav::semantic::{
    build_selection_prompt, parse_decision, DecisionProvider, MissionStage, OracleProvider,
};

const REFERENCE: [(f64, f64, f64); 2] = [
    // (path_length, min_clearance, avg_clearance)
    (0.5855240642829357, 0.13249999610707164, 0.13249999610707164),
    (0.9838379446400219, 0.0052999998442828655, 0.06183333151663343),
];

fn main() {
    let candidates = calibration_candidates();
    for (c, (length, min_c, avg_c)) in candidates.iter().zip(REFERENCE) {
        println!("candidate {}:", c.index);
        println!("  path_length   {:>22.16}  (ref {length}, err {:+.2e})",
            c.metrics.path_length, c.metrics.path_length - length);
        println!("  min_clearance {:>22.16}  (ref {min_c}, err {:+.2e})",
            c.metrics.min_clearance, c.metrics.min_clearance - min_c);
        println!("  avg_clearance {:>22.16}  (ref {avg_c}, err {:+.2e})",
            c.metrics.avg_clearance, c.metrics.avg_clearance - avg_c);
        println!("  obstacle_count {}  turns {}  descriptors {:?}",
            c.metrics.obstacle_count, c.metrics.turn_count, c.metrics.descriptors);
    }

    // Stage 1: the oracle must pick the resource candidate with buffer 0.
    let stage = MissionStage::resource_collection(&[]);
    let prompt = build_selection_prompt(&stage, &candidates);
    let provider = OracleProvider::default();
    let response = provider.complete(&prompt).unwrap();
    println!("\noracle response: {}", response.text);
    let decision = parse_decision(&response.text, candidates.len(), &[0, 20]).unwrap();
    println!("parsed decision: candidate {} buffer {}", decision.selected_candidate, decision.buffer);
    assert_eq!((decision.selected_candidate, decision.buffer), (0, 0));
    println!("\ncalibration fixture matches its reference values");
}
