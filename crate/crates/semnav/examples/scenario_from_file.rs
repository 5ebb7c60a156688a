//! Define a scenario in TOML, load it, and run it. Shows the full file
//! schema: world geometry, stages with cues, jitter bounds, and execution
//! overrides.
//!
//!     cargo run -p semnav --example scenario_from_file

use semnav::harness::{load_scenario, render_report, run_trials, ReportFormat};
use semnav::semantic::OracleProvider;

const SCENARIO_TOML: &str = r#"
name = "wet-floor"
resolution_m = 0.01
correct_goal_label = "dry"
trials_default = 6
buffers_offered = [0]

[world]
arena_width_m = 1.0
arena_height_m = 1.0
robot_radius_m = 0.05
robot_start = { x = 0.105, y = 0.505, heading = 0.0 }

[[world.obstacles]]
center = [0.685, 0.47]
width_m = 0.27
height_m = 0.06
label = "wet floor sign"

[[world.goals]]
position = [0.85, 0.85]
label = "dry"

[[world.goals]]
position = [0.85, 0.20]
label = "wet"

[[stages]]
kind = "final_navigation"
cues = ["the floor near one goal is wet and toxic to the electronics"]
goal_labels = ["dry", "wet"]

[jitter]
obstacle_m = 0.01
goal_m = 0.01

[exec.planner]
proximity_radius_m = 0.15
descriptor_radius_m = 0.30
skinny_ratio = 3.0
crowd_count = 3

[exec.noise]
sigma_m = 0.01
step_m = 0.005
speed_mps = 0.1

[exec]
allowed_decision_buffers = [0, 20]
retry_cap = 3
goal_tolerance_m = 0.03
"#;

fn main() {
    let dir = std::env::temp_dir().join("semnav-scenario-file");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("wet_floor.toml");
    std::fs::write(&path, SCENARIO_TOML).unwrap();

    let scenario = load_scenario(&path).unwrap();
    println!("loaded {:?} with {} goals", scenario.name, scenario.world.goals.len());

    let report = run_trials(&scenario, scenario.trials_default, &OracleProvider::default(), 3);
    print!("{}", render_report(&report, ReportFormat::Text));
}
