//! The safety/length trade-off of obstacle buffering: Monte-Carlo the
//! narrow-gap world at buffer 0 (risky, short) versus buffer 20 (safe,
//! long) under movement noise.
//!
//!     cargo run -p semnav --example buffer_tradeoff

use semnav::executor::{simulate_follow, NoiseConfig};
use semnav::grid::{build_grid, clearance_field, validate_start, world_to_cell};
use semnav::harness::builtin;
use semnav::planner::astar;

fn main() {
    let scenario = builtin("narrow_gap").unwrap();
    let world = &scenario.world;
    let grid = build_grid(world, 0.01).unwrap();
    let field = clearance_field(&grid);
    let start = validate_start(world, &grid).unwrap();
    let goal = world_to_cell(world.goals[0].position, &grid).unwrap();

    let risky = astar(&grid, start, goal).unwrap();
    let buffered = astar(&grid.inflate(20), start, goal).unwrap();

    let min_clearance = |path: &semnav::planner::Path| {
        path.cells.iter().map(|&c| field.clearance_m(c)).fold(f64::INFINITY, f64::min)
    };
    println!(
        "buffer  0: length {:.3} m, min clearance {:.3} m",
        risky.length_m,
        min_clearance(&risky)
    );
    println!(
        "buffer 20: length {:.3} m, min clearance {:.3} m",
        buffered.length_m,
        min_clearance(&buffered)
    );

    let noise = NoiseConfig { sigma_m: 0.02, ..NoiseConfig::default() };
    let runs = 100;
    let mut risky_hits = 0;
    let mut buffered_hits = 0;
    for seed in 0..runs {
        if simulate_follow(world, &risky, &noise, seed).collided {
            risky_hits += 1;
        }
        if simulate_follow(world, &buffered, &noise, seed).collided {
            buffered_hits += 1;
        }
    }
    println!("\nwith sigma = {:.0} mm lateral noise over {runs} seeded runs:", noise.sigma_m * 1e3);
    println!("  buffer  0 collided {risky_hits}/{runs}");
    println!("  buffer 20 collided {buffered_hits}/{runs}");
}
