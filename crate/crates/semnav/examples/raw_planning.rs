//! Run the provider-as-planner mode on an obstacle course: the provider
//! proposes waypoints from geometric information, a supercover collision
//! check gates them, and the simulator executes the accepted plan.
//!
//!     cargo run -p semnav --example raw_planning

use semnav::executor::{collision_check, CollisionVerdict};
use semnav::grid::{build_grid, validate_start, world_to_cell};
use semnav::harness::builtin;
use semnav::semantic::{
    build_raw_planning_prompt, parse_waypoints, DecisionProvider, OracleProvider,
};

fn main() {
    for name in ["course1", "course2", "course3"] {
        let scenario = builtin(name).unwrap();
        let world = &scenario.world;
        let grid = build_grid(world, 0.01).unwrap();
        let start = validate_start(world, &grid).unwrap();
        let goal = world_to_cell(world.goals[0].position, &grid).unwrap();

        let prompt = build_raw_planning_prompt(&grid, start, goal);
        let provider = OracleProvider::default();
        let response = provider.complete(&prompt).unwrap();
        let plan = parse_waypoints(&response.text, world).unwrap();
        let verdict = collision_check(&plan, &grid, world.robot_radius_m);

        println!(
            "{name}: {} obstacle boxes, {} waypoints, check={}",
            world.obstacles.len(),
            plan.waypoints.len(),
            match verdict {
                CollisionVerdict::Clear => "clear".to_string(),
                CollisionVerdict::PredictedCollision { segment } =>
                    format!("predicted collision at segment {segment}"),
            }
        );

        let trace = semnav::executor::simulate_waypoints(
            world,
            &plan.waypoints,
            &scenario.exec.noise,
            1,
        );
        println!(
            "  executed: collided={} travelled {:.3} m in {:.1} s (sim)",
            trace.collided,
            trace.distance_travelled_m,
            trace.duration_s()
        );
    }
}
