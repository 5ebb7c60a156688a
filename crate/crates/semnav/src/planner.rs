//! A* search over occupancy grids plus the candidate-path machinery the
//! decision layer consumes: metrics, qualitative obstacle descriptors, and
//! per-(goal, buffer) candidate generation.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{
    cell_to_world, clearance_field, world_to_cell, Cell, ClearanceField, Goal, GridError,
    OccupancyGrid, WorldModel,
};

/// Path cost as exact step counts: `straight + diag * sqrt(2)` cells.
/// Comparisons are done in integer arithmetic, so tie-breaking and the
/// Dijkstra-equality property are bit-reproducible across platforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCost {
    pub straight: u32,
    pub diag: u32,
}

impl StepCost {
    pub const ZERO: StepCost = StepCost { straight: 0, diag: 0 };

    pub fn meters(self, resolution_m: f64) -> f64 {
        (self.straight as f64 + self.diag as f64 * SQRT_2) * resolution_m
    }

    fn plus(self, other: StepCost) -> StepCost {
        StepCost {
            straight: self.straight + other.straight,
            diag: self.diag + other.diag,
        }
    }
}

impl Ord for StepCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // self < other  iff  da < db * sqrt(2), with
        // da = straight difference, db = diag difference (flipped).
        let da = self.straight as i64 - other.straight as i64;
        let db = other.diag as i64 - self.diag as i64;
        if da == 0 && db == 0 {
            return Ordering::Equal;
        }
        if da <= 0 && db >= 0 {
            return Ordering::Less;
        }
        if da >= 0 && db <= 0 {
            return Ordering::Greater;
        }
        // Same sign; da^2 == 2 db^2 has no nonzero integer solutions.
        let (lhs, rhs) = (da * da, 2 * db * db);
        if da < 0 {
            if lhs > rhs { Ordering::Less } else { Ordering::Greater }
        } else if lhs < rhs {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

impl PartialOrd for StepCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A collision-free grid path: the full 8-connected cell chain, the
/// downsampled waypoints (collinear-run endpoints, metres), and the exact
/// Euclidean length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<Cell>,
    pub waypoints: Vec<Point2>,
    pub length_m: f64,
    pub steps: StepCost,
}

use crate::grid::Point2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NoPath {
    #[error("goal cell is occupied")]
    GoalOccupied,
    #[error("goal is unreachable from start")]
    Unreachable,
    #[error("start cell is occupied")]
    StartOccupied,
    #[error("start or goal cell out of bounds")]
    OutOfBounds,
}

const MOVES: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

fn octile(from: Cell, to: Cell) -> StepCost {
    let dx = from.col.abs_diff(to.col) as u32;
    let dy = from.row.abs_diff(to.row) as u32;
    let (lo, hi) = (dx.min(dy), dx.max(dy));
    StepCost { straight: hi - lo, diag: lo }
}

#[derive(PartialEq, Eq)]
struct OpenEntry {
    f: StepCost,
    h: StepCost,
    idx: usize,
    cell: Cell,
}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse so the smallest key pops first.
        // Ties break on lower h, then row-major cell order.
        other
            .f
            .cmp(&self.f)
            .then_with(|| other.h.cmp(&self.h))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimal-cost 8-connected path under edge costs {1, sqrt(2)} scaled by
/// the grid resolution. Diagonal moves are forbidden when either shared
/// orthogonal neighbour is occupied (no corner cutting). Tie-breaking:
/// lower f, then lower h, then row-major cell order.
pub fn astar(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<Path, NoPath> {
    if !grid.in_bounds(start) || !grid.in_bounds(goal) {
        return Err(NoPath::OutOfBounds);
    }
    if grid.occupied(goal) {
        return Err(NoPath::GoalOccupied);
    }
    if grid.occupied(start) {
        return Err(NoPath::StartOccupied);
    }

    let mut g: HashMap<Cell, StepCost> = HashMap::with_capacity(1024);
    let mut parent: HashMap<Cell, Cell> = HashMap::with_capacity(1024);
    let mut closed: HashMap<Cell, ()> = HashMap::with_capacity(1024);
    let mut open = BinaryHeap::new();

    g.insert(start, StepCost::ZERO);
    let h0 = octile(start, goal);
    open.push(OpenEntry { f: h0, h: h0, idx: grid.idx(start), cell: start });

    while let Some(OpenEntry { cell, .. }) = open.pop() {
        if closed.contains_key(&cell) {
            continue;
        }
        closed.insert(cell, ());
        if cell == goal {
            return Ok(assemble_path(grid, &parent, start, goal, g[&goal]));
        }
        let g_cur = g[&cell];
        for (dc, dr) in MOVES {
            let nc = cell.col as i64 + dc;
            let nr = cell.row as i64 + dr;
            if nc < 0 || nr < 0 || nc as usize >= grid.cols || nr as usize >= grid.rows {
                continue;
            }
            let next = Cell::new(nc as usize, nr as usize);
            if grid.occupied(next) {
                continue;
            }
            let diagonal = dc != 0 && dr != 0;
            if diagonal {
                let side_a = Cell::new(nc as usize, cell.row);
                let side_b = Cell::new(cell.col, nr as usize);
                if grid.occupied(side_a) || grid.occupied(side_b) {
                    continue;
                }
            }
            let step = if diagonal {
                StepCost { straight: 0, diag: 1 }
            } else {
                StepCost { straight: 1, diag: 0 }
            };
            let ng = g_cur.plus(step);
            if let Some(old) = g.get(&next) {
                if ng >= *old {
                    continue;
                }
            }
            g.insert(next, ng);
            parent.insert(next, cell);
            let h = octile(next, goal);
            open.push(OpenEntry { f: ng.plus(h), h, idx: grid.idx(next), cell: next });
        }
    }
    Err(NoPath::Unreachable)
}

fn assemble_path(
    grid: &OccupancyGrid,
    parent: &HashMap<Cell, Cell>,
    start: Cell,
    goal: Cell,
    steps: StepCost,
) -> Path {
    let mut cells = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = parent[&cur];
        cells.push(cur);
    }
    cells.reverse();
    let waypoint_cells = downsample_collinear(&cells);
    let waypoints = waypoint_cells
        .iter()
        .map(|&c| cell_to_world(c, grid).expect("path cell in bounds"))
        .collect();
    Path {
        cells,
        waypoints,
        length_m: steps.meters(grid.resolution_m),
        steps,
    }
}

/// Keeps only the endpoints of collinear runs, the waypoints actually sent
/// for execution. Preserves total Euclidean length exactly.
pub fn downsample_collinear(cells: &[Cell]) -> Vec<Cell> {
    if cells.len() <= 2 {
        return cells.to_vec();
    }
    let dir = |a: Cell, b: Cell| {
        ((b.col as i64 - a.col as i64).signum(), (b.row as i64 - a.row as i64).signum())
    };
    let mut out = vec![cells[0]];
    for i in 1..cells.len() - 1 {
        if dir(cells[i - 1], cells[i]) != dir(cells[i], cells[i + 1]) {
            out.push(cells[i]);
        }
    }
    out.push(*cells.last().unwrap());
    out
}

/// Metric block for one candidate path. `descriptors` holds the
/// qualitative obstacle descriptions for the candidate's goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub path_length: f64,
    pub obstacle_count: usize,
    pub turn_count: usize,
    pub min_clearance: f64,
    pub avg_clearance: f64,
    pub descriptors: Vec<String>,
}

/// Planner tuning knobs. Defaults follow the arena conventions: counting
/// and descriptor radii of 0.15 m, skinny aspect ratio 3, crowd at 3
/// obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub proximity_radius_m: f64,
    pub descriptor_radius_m: f64,
    pub skinny_ratio: f64,
    pub crowd_count: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            proximity_radius_m: 0.15,
            descriptor_radius_m: 0.15,
            skinny_ratio: 3.0,
            crowd_count: 3,
        }
    }
}

/// Computes the metric block for a path. Clearances are measured over the
/// path cells against the uninflated clearance field; on an obstacle-free
/// world they are capped at the arena diagonal so every value stays finite.
/// `descriptors` is left empty; candidate generation fills it per goal.
pub fn path_metrics(
    path: &Path,
    world: &WorldModel,
    clearance: &ClearanceField,
    proximity_radius_m: f64,
) -> PathMetrics {
    let cap = world.arena_width_m.hypot(world.arena_height_m);
    let mut min_c = f64::INFINITY;
    let mut sum = 0.0;
    for &cell in &path.cells {
        let c = clearance.clearance_m(cell).min(cap);
        min_c = min_c.min(c);
        sum += c;
    }
    let avg_c = if path.cells.is_empty() { 0.0 } else { sum / path.cells.len() as f64 };
    let min_c = if path.cells.is_empty() { 0.0 } else { min_c };

    let res = clearance.resolution_m;
    let mut obstacle_count = 0;
    for o in &world.obstacles {
        let near = path.cells.iter().any(|&cell| {
            let p = Point2::new((cell.col as f64 + 0.5) * res, (cell.row as f64 + 0.5) * res);
            o.shape.distance_to(p) <= proximity_radius_m
        });
        if near {
            obstacle_count += 1;
        }
    }

    let turn_count = turn_count(&path.cells);

    PathMetrics {
        path_length: path.length_m,
        obstacle_count,
        turn_count,
        min_clearance: min_c,
        avg_clearance: avg_c,
        descriptors: Vec::new(),
    }
}

/// Number of quantized (8-direction) heading changes along the cell chain
/// after collinear-run compression.
pub fn turn_count(cells: &[Cell]) -> usize {
    downsample_collinear(cells).len().saturating_sub(2)
}

/// Deterministic qualitative descriptors for the obstacles within `radius`
/// of a goal: arrangement ("a single skinny obstacle near the goal",
/// "multiple clustered obstacles near the goal") plus each obstacle label
/// verbatim.
pub fn describe_obstacles(
    world: &WorldModel,
    goal: &Goal,
    radius_m: f64,
    config: &PlannerConfig,
) -> Vec<String> {
    let near: Vec<&crate::grid::Obstacle> = world
        .obstacles
        .iter()
        .filter(|o| o.shape.distance_to(goal.position) <= radius_m)
        .collect();
    let mut out = Vec::new();
    if near.len() == 1 {
        if near[0].shape.aspect() >= config.skinny_ratio {
            out.push("a single skinny obstacle near the goal".to_string());
        } else {
            out.push("a single obstacle near the goal".to_string());
        }
    } else if near.len() >= config.crowd_count {
        out.push("multiple clustered obstacles near the goal".to_string());
    }
    for o in &near {
        if let Some(label) = &o.label {
            out.push(label.clone());
        }
    }
    out
}

/// One A* solution for a specific (goal, buffer) pair with its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCandidate {
    pub index: usize,
    pub goal: Goal,
    pub buffer_used: usize,
    pub path: Path,
    pub metrics: PathMetrics,
}

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error("no (goal, buffer) pair is reachable")]
    AllUnreachable,
    #[error("goals and buffers must be non-empty")]
    EmptyInput,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Generates one candidate per reachable (goal, buffer) pair, indexed
/// contiguously in (goal-order, buffer-order). Unreachable pairs are
/// omitted. Clearance metrics are always measured against the uninflated
/// grid.
pub fn generate_candidates(
    world: &WorldModel,
    goals: &[Goal],
    buffers: &[usize],
    resolution_m: f64,
    config: &PlannerConfig,
) -> Result<Vec<PathCandidate>, CandidateError> {
    if goals.is_empty() || buffers.is_empty() {
        return Err(CandidateError::EmptyInput);
    }
    let raw = crate::grid::build_grid(world, resolution_m)?;
    let start = crate::grid::validate_start(world, &raw)?;
    let field = clearance_field(&raw);
    let mut grids: HashMap<usize, OccupancyGrid> = HashMap::new();
    let mut out = Vec::new();
    for goal in goals {
        for &buffer in buffers {
            let grid = grids.entry(buffer).or_insert_with(|| raw.inflate(buffer));
            let goal_cell = match world_to_cell(goal.position, grid) {
                Ok(c) => c,
                Err(_) => continue,
            };
            match astar(grid, start, goal_cell) {
                Ok(path) => {
                    let mut metrics = path_metrics(&path, world, &field, config.proximity_radius_m);
                    metrics.descriptors =
                        describe_obstacles(world, goal, config.descriptor_radius_m, config);
                    out.push(PathCandidate {
                        index: out.len(),
                        goal: goal.clone(),
                        buffer_used: buffer,
                        path,
                        metrics,
                    });
                }
                Err(_) => continue,
            }
        }
    }
    if out.is_empty() {
        return Err(CandidateError::AllUnreachable);
    }
    Ok(out)
}
