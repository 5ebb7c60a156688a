//! Render scenario worlds as ASCII (stdout) and PGM images (temp files),
//! overlaying the shortest paths to every goal.
//!
//!     cargo run -p semnav --example render_worlds

use semnav::grid::{build_grid, validate_start, world_to_cell};
use semnav::harness::{builtin, render_world, WorldFormat};
use semnav::planner::astar;

fn main() {
    let out_dir = std::env::temp_dir().join("semnav-renders");
    std::fs::create_dir_all(&out_dir).unwrap();

    for name in ["course3", "sequential", "crowded"] {
        let scenario = builtin(name).unwrap();
        let grid = build_grid(&scenario.world, scenario.mission.resolution_m).unwrap();
        let start = validate_start(&scenario.world, &grid).unwrap();
        let mut paths = Vec::new();
        for goal in &scenario.world.goals {
            let cell = world_to_cell(goal.position, &grid).unwrap();
            if let Ok(path) = astar(&grid, start, cell) {
                paths.push(path);
            }
        }
        let refs: Vec<&semnav::planner::Path> = paths.iter().collect();

        println!("=== {name} ===");
        let ascii = render_world(
            &scenario.world,
            &refs,
            scenario.mission.resolution_m,
            WorldFormat::Ascii,
        );
        print!("{}", String::from_utf8_lossy(&ascii));

        let pgm = render_world(
            &scenario.world,
            &refs,
            scenario.mission.resolution_m,
            WorldFormat::Pgm,
        );
        let path = out_dir.join(format!("{name}.pgm"));
        std::fs::write(&path, pgm).unwrap();
        println!("wrote {}\n", path.display());
    }
}
