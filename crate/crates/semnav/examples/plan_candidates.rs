//! Generate candidate paths for a two-goal world and print the metric
//! payload exactly as the decision layer receives it.
//!
//!     cargo run -p semnav --example plan_candidates

use semnav::grid::{Goal, Obstacle, Point2, Pose2, Rect, WorldModel};
use semnav::planner::{generate_candidates, PlannerConfig};
use semnav::semantic::{build_selection_prompt, MissionStage};

fn main() {
    let world = WorldModel {
        arena_width_m: 1.0,
        arena_height_m: 1.0,
        obstacles: vec![
            Obstacle::labeled(Rect::from_corners(0.55, 0.44, 0.82, 0.50), "TOXIC"),
            Obstacle::new(Rect::from_corners(0.30, 0.70, 0.40, 0.80)),
        ],
        goals: vec![
            Goal::new(Point2::new(0.85, 0.85), "upper"),
            Goal::new(Point2::new(0.85, 0.20), "lower"),
        ],
        robot_start: Pose2::new(0.105, 0.505, 0.0),
        robot_radius_m: 0.05,
    };

    let config = PlannerConfig { descriptor_radius_m: 0.30, ..PlannerConfig::default() };
    let candidates = generate_candidates(&world, &world.goals, &[0, 20], 0.01, &config)
        .expect("world has reachable goals");

    println!("{} candidates (goal-major, buffer-minor):", candidates.len());
    for c in &candidates {
        println!(
            "  #{} goal={:<6} buffer={:<2} length={:.4} m  turns={} obstacles={} \
             min_clearance={:.4} m  descriptors={:?}",
            c.index,
            c.goal.label.as_deref().unwrap_or("-"),
            c.buffer_used,
            c.metrics.path_length,
            c.metrics.turn_count,
            c.metrics.obstacle_count,
            c.metrics.min_clearance,
            c.metrics.descriptors,
        );
    }

    let stage = MissionStage::final_navigation(&["there is a toxic spill in the area"]);
    let prompt = build_selection_prompt(&stage, &candidates);
    println!("\n--- system text ---\n{}", prompt.system_text);
    println!("\n--- payload ---\n{}", prompt.payload);
}
