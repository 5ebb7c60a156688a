//! Mission execution: candidate generation, decision acquisition with
//! re-query, buffer-triggered replanning, waypoint-following simulation
//! with collision detection, and stage sequencing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{
    build_grid, validate_start, world_to_cell, Cell, Goal, OccupancyGrid, Point2, Pose2,
    WorldModel,
};
use crate::planner::{astar, generate_candidates, CandidateError, NoPath, Path, PlannerConfig};
use crate::semantic::{
    build_raw_planning_prompt, build_selection_prompt, parse_decision, parse_waypoints, Decision,
    DecisionProvider, MissionStage, StageKind, WaypointPlan,
};

/// A mission: ordered stages over one world, with the buffers offered for
/// candidate pre-computation and the label of the goal that counts as
/// semantically correct to reach first (None or "any" accepts any goal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSpec {
    pub stages: Vec<MissionStage>,
    pub world: WorldModel,
    pub buffers_offered: Vec<usize>,
    pub resolution_m: f64,
    #[serde(default)]
    pub correct_goal_label: Option<String>,
}

impl MissionSpec {
    pub fn validate(&self) -> Result<(), StageError> {
        if self.stages.is_empty() {
            return Err(StageError::BadMission("mission has no stages".into()));
        }
        if self.stages.iter().any(|s| s.instruction_text.trim().is_empty()) {
            return Err(StageError::BadMission("stage instruction text is empty".into()));
        }
        let raw = self.stages.iter().filter(|s| s.kind == StageKind::RawPlanning).count();
        if raw > 0 && self.stages.len() != 1 {
            return Err(StageError::BadMission(
                "raw planning missions must have exactly one stage".into(),
            ));
        }
        if raw == 0 && self.stages.len() > 2 {
            return Err(StageError::BadMission(
                "selection missions have at most two stages".into(),
            ));
        }
        Ok(())
    }
}

/// Simulation knobs: per-step lateral Gaussian noise about the nominal
/// trajectory, step length, and nominal speed for timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_m: f64,
    pub step_m: f64,
    pub speed_mps: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma_m: 0.01, step_m: 0.005, speed_mps: 0.1 }
    }
}

/// Execution policy shared by all stages of a mission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub planner: PlannerConfig,
    pub noise: NoiseConfig,
    /// Buffer values a decision may legally request.
    pub allowed_decision_buffers: Vec<usize>,
    /// Re-queries allowed after the initial provider call.
    pub retry_cap: usize,
    pub goal_tolerance_m: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            noise: NoiseConfig::default(),
            allowed_decision_buffers: vec![0, 20],
            retry_cap: 3,
            goal_tolerance_m: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t_s: f64,
    pub pose: Pose2,
}

/// What the robot actually did: timestamped poses, collision flag and
/// point, and distance travelled. If a collision happened the trace ends
/// at the collision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub poses: Vec<TimedPose>,
    pub collided: bool,
    pub collision_point: Option<Point2>,
    pub distance_travelled_m: f64,
}

impl ExecutionTrace {
    pub fn final_pose(&self) -> Pose2 {
        self.poses.last().map(|tp| tp.pose).expect("trace has at least the start pose")
    }

    pub fn duration_s(&self) -> f64 {
        self.poses.last().map(|tp| tp.t_s).unwrap_or(0.0)
    }
}

/// The decision that drove a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecRecord {
    Selected(Decision),
    Waypoints(WaypointPlan),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage_kind: StageKind,
    pub decision: ExecRecord,
    pub goal: Goal,
    pub replanned_with_buffer: usize,
    /// The A* path actually executed (None for raw-planning stages, whose
    /// waypoints are in `decision`).
    pub path: Option<Path>,
    pub trace: ExecutionTrace,
    pub reached_goal: bool,
    pub provider_latency_s: f64,
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("invalid mission: {0}")]
    BadMission(String),
    #[error("no goals offered to this stage")]
    NoGoals,
    #[error("candidate generation failed: {0}")]
    Candidates(#[from] CandidateError),
    #[error("provider failed after retry cap: {0}")]
    ProviderFailure(String),
    #[error("no path to goal after inflating to buffer {buffer}: {reason}")]
    NoPathAfterBuffer { buffer: usize, reason: NoPath },
    #[error("raw plan rejected by collision check after retry cap")]
    RawPlanRejected,
    #[error("grid error: {0}")]
    Grid(#[from] crate::grid::GridError),
}

/// Per-trial outcome record. Serialized as line-delimited JSON by the
/// harness; `schema_version` guards the wire format. `world` is the
/// (possibly jittered) world the trial actually ran in, so results can be
/// re-checked against the exact geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub schema_version: u32,
    pub world: WorldModel,
    pub stage_results: Vec<StageResult>,
    pub overall_success: bool,
    pub semantic_compliance: bool,
    pub total_time_s: f64,
    #[serde(default)]
    pub error: Option<String>,
}

pub const TRIAL_SCHEMA_VERSION: u32 = 1;

/// Simulates a disc robot following waypoints at fixed step length with
/// seeded zero-mean lateral Gaussian noise about the nominal trajectory.
/// Collision is declared when the disc overlaps any obstacle rectangle in
/// continuous geometry; the trace then ends at the collision point.
pub fn simulate_waypoints(
    world: &WorldModel,
    waypoints: &[Point2],
    noise: &NoiseConfig,
    seed: u64,
) -> ExecutionTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = world.robot_start;
    let mut poses = vec![TimedPose { t_s: 0.0, pose: start }];
    let mut t = 0.0;
    let mut travelled = 0.0;
    let mut prev_actual = start.position();
    let mut nominal = start.position();
    let radius = world.robot_radius_m;

    let collide_at =
        |p: Point2| -> bool { world.obstacles.iter().any(|o| o.shape.distance_to(p) < radius) };

    if collide_at(start.position()) {
        return ExecutionTrace {
            poses,
            collided: true,
            collision_point: Some(start.position()),
            distance_travelled_m: 0.0,
        };
    }

    for wp in waypoints {
        let seg = Point2::new(wp.x - nominal.x, wp.y - nominal.y);
        let seg_len = seg.x.hypot(seg.y);
        if seg_len < 1e-12 {
            continue;
        }
        let dir = Point2::new(seg.x / seg_len, seg.y / seg_len);
        let perp = Point2::new(-dir.y, dir.x);
        let heading = dir.y.atan2(dir.x);
        let steps = (seg_len / noise.step_m).ceil() as usize;
        for k in 1..=steps {
            let along = (k as f64 * noise.step_m).min(seg_len);
            let base = Point2::new(nominal.x + dir.x * along, nominal.y + dir.y * along);
            let lateral =
                if noise.sigma_m > 0.0 { gaussian(&mut rng) * noise.sigma_m } else { 0.0 };
            let actual = Point2::new(base.x + perp.x * lateral, base.y + perp.y * lateral);
            let step_nominal =
                if k == steps { seg_len - (k - 1) as f64 * noise.step_m } else { noise.step_m };
            t += step_nominal / noise.speed_mps;
            travelled += prev_actual.dist(&actual);
            prev_actual = actual;
            poses.push(TimedPose { t_s: t, pose: Pose2::new(actual.x, actual.y, heading) });
            if collide_at(actual) {
                return ExecutionTrace {
                    poses,
                    collided: true,
                    collision_point: Some(actual),
                    distance_travelled_m: travelled,
                };
            }
        }
        nominal = *wp;
    }
    // Settle exactly onto the final waypoint: transit noise models path
    // following imprecision, while the terminal condition is convergence
    // on the target.
    if let Some(last) = waypoints.last() {
        if prev_actual.dist(last) > 1e-12 {
            let heading = poses.last().map(|tp| tp.pose.heading).unwrap_or(0.0);
            t += prev_actual.dist(last) / noise.speed_mps;
            travelled += prev_actual.dist(last);
            poses.push(TimedPose { t_s: t, pose: Pose2::new(last.x, last.y, heading) });
            if collide_at(*last) {
                return ExecutionTrace {
                    poses,
                    collided: true,
                    collision_point: Some(*last),
                    distance_travelled_m: travelled,
                };
            }
        }
    }
    ExecutionTrace {
        poses,
        collided: false,
        collision_point: None,
        distance_travelled_m: travelled,
    }
}

/// Follows an A* path via its downsampled waypoints. See
/// [`simulate_waypoints`].
pub fn simulate_follow(
    world: &WorldModel,
    path: &Path,
    noise: &NoiseConfig,
    seed: u64,
) -> ExecutionTrace {
    simulate_waypoints(world, &path.waypoints, noise, seed)
}

/// Box-Muller standard normal draw.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionVerdict {
    Clear,
    PredictedCollision { segment: usize },
}

/// Supercover rasterization of one segment: every cell the continuous
/// segment touches, including both side cells at exact corner crossings.
pub fn supercover_cells(a: Point2, b: Point2, grid: &OccupancyGrid) -> Vec<Cell> {
    let res = grid.resolution_m;
    let clamp_cell = |x: f64, max: usize| -> i64 {
        let c = (x / res).floor() as i64;
        c.clamp(0, max as i64 - 1)
    };
    let mut x = clamp_cell(a.x, grid.cols);
    let mut y = clamp_cell(a.y, grid.rows);
    let xe = clamp_cell(b.x, grid.cols);
    let ye = clamp_cell(b.y, grid.rows);
    let mut cells = Vec::new();
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let sx: i64 = if dx > 0.0 { 1 } else { -1 };
    let sy: i64 = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx != 0.0 { (res / dx.abs()).abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { (res / dy.abs()).abs() } else { f64::INFINITY };
    let next_boundary = |c: i64, s: i64| -> f64 { (c + i64::from(s > 0)) as f64 * res };
    let mut t_max_x =
        if dx != 0.0 { ((next_boundary(x, sx) - a.x) / dx).abs() } else { f64::INFINITY };
    let mut t_max_y =
        if dy != 0.0 { ((next_boundary(y, sy) - a.y) / dy).abs() } else { f64::INFINITY };
    let cap = 2 * (grid.cols + grid.rows) + 4;
    for _ in 0..cap {
        cells.push(Cell::new(x as usize, y as usize));
        if x == xe && y == ye {
            break;
        }
        if t_max_x < t_max_y {
            x += sx;
            t_max_x += t_delta_x;
        } else if t_max_y < t_max_x {
            y += sy;
            t_max_y += t_delta_y;
        } else {
            // Exact corner crossing: the segment touches both side cells.
            if (x + sx) >= 0 && ((x + sx) as usize) < grid.cols {
                cells.push(Cell::new((x + sx) as usize, y as usize));
            }
            if (y + sy) >= 0 && ((y + sy) as usize) < grid.rows {
                cells.push(Cell::new(x as usize, (y + sy) as usize));
            }
            x += sx;
            y += sy;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        }
        if x < 0 || y < 0 || x as usize >= grid.cols || y as usize >= grid.rows {
            break;
        }
    }
    cells
}

/// Quick feasibility gate for provider-proposed waypoint plans: each
/// segment is rasterized with a supercover line and checked against the
/// occupancy dilated by the robot footprint. Reports the first offending
/// segment.
pub fn collision_check(
    plan: &WaypointPlan,
    grid: &OccupancyGrid,
    robot_radius_m: f64,
) -> CollisionVerdict {
    assert!(!plan.waypoints.is_empty(), "collision_check expects a non-empty plan");
    let dilation = (robot_radius_m / grid.resolution_m).ceil() as usize;
    let checked = if grid.buffer_cells == 0 && dilation > 0 {
        grid.inflate(dilation)
    } else {
        grid.clone()
    };
    if plan.waypoints.len() == 1 {
        let p = plan.waypoints[0];
        let col =
            ((p.x / grid.resolution_m).floor() as i64).clamp(0, grid.cols as i64 - 1) as usize;
        let row =
            ((p.y / grid.resolution_m).floor() as i64).clamp(0, grid.rows as i64 - 1) as usize;
        if checked.occupied(Cell::new(col, row)) {
            return CollisionVerdict::PredictedCollision { segment: 0 };
        }
        return CollisionVerdict::Clear;
    }
    for (i, pair) in plan.waypoints.windows(2).enumerate() {
        for cell in supercover_cells(pair[0], pair[1], grid) {
            if checked.occupied(cell) {
                return CollisionVerdict::PredictedCollision { segment: i };
            }
        }
    }
    CollisionVerdict::Clear
}

fn offered_goals(world: &WorldModel, stage: &MissionStage) -> Vec<Goal> {
    match &stage.goal_labels {
        None => world.goals.clone(),
        Some(labels) => world
            .goals
            .iter()
            .filter(|g| g.label.as_ref().map(|l| labels.contains(l)).unwrap_or(false))
            .cloned()
            .collect(),
    }
}

/// Runs one stage from the world's current robot pose: generate candidates
/// (or a raw prompt), obtain and parse a decision with re-query up to the
/// retry cap, replan when the decided buffer differs from the selected
/// candidate's, then simulate the execution.
pub fn run_stage(
    world: &WorldModel,
    stage: &MissionStage,
    provider: &dyn DecisionProvider,
    spec: &MissionSpec,
    config: &ExecConfig,
    seed: u64,
) -> Result<StageResult, StageError> {
    match stage.kind {
        StageKind::RawPlanning => run_raw_stage(world, stage, provider, spec, config, seed),
        _ => run_selection_stage(world, stage, provider, spec, config, seed),
    }
}

fn run_selection_stage(
    world: &WorldModel,
    stage: &MissionStage,
    provider: &dyn DecisionProvider,
    spec: &MissionSpec,
    config: &ExecConfig,
    seed: u64,
) -> Result<StageResult, StageError> {
    let goals = offered_goals(world, stage);
    if goals.is_empty() {
        return Err(StageError::NoGoals);
    }
    let candidates = generate_candidates(
        world,
        &goals,
        &spec.buffers_offered,
        spec.resolution_m,
        &config.planner,
    )?;
    let prompt = build_selection_prompt(stage, &candidates);

    let mut latency = 0.0;
    let mut last_err = String::new();
    let mut decision = None;
    for _attempt in 0..=config.retry_cap {
        match provider.complete(&prompt) {
            Ok(response) => {
                latency += response.latency_s;
                match parse_decision(
                    &response.text,
                    candidates.len(),
                    &config.allowed_decision_buffers,
                ) {
                    Ok(d) => {
                        decision = Some(d);
                        break;
                    }
                    Err(e) => last_err = e.to_string(),
                }
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    let decision = decision.ok_or(StageError::ProviderFailure(last_err))?;
    let chosen = &candidates[decision.selected_candidate];

    // Re-inflate and re-run A* when the decided buffer differs from the
    // buffer the candidate was planned with.
    let (path, replanned_with_buffer) = if decision.buffer != chosen.buffer_used {
        let raw = build_grid(world, spec.resolution_m)?;
        let start = validate_start(world, &raw)?;
        let inflated = raw.inflate(decision.buffer);
        let goal_cell = world_to_cell(chosen.goal.position, &inflated)?;
        match astar(&inflated, start, goal_cell) {
            Ok(p) => (p, decision.buffer),
            Err(reason) => {
                return Err(StageError::NoPathAfterBuffer { buffer: decision.buffer, reason })
            }
        }
    } else {
        (chosen.path.clone(), chosen.buffer_used)
    };

    let trace = simulate_follow(world, &path, &config.noise, seed);
    let reached_goal = !trace.collided
        && trace.final_pose().position().dist(&chosen.goal.position) <= config.goal_tolerance_m;
    Ok(StageResult {
        stage_kind: stage.kind,
        decision: ExecRecord::Selected(decision),
        goal: chosen.goal.clone(),
        replanned_with_buffer,
        path: Some(path),
        trace,
        reached_goal,
        provider_latency_s: latency,
    })
}

fn run_raw_stage(
    world: &WorldModel,
    stage: &MissionStage,
    provider: &dyn DecisionProvider,
    spec: &MissionSpec,
    config: &ExecConfig,
    seed: u64,
) -> Result<StageResult, StageError> {
    let goals = offered_goals(world, stage);
    let goal = goals.first().ok_or(StageError::NoGoals)?.clone();
    let grid = build_grid(world, spec.resolution_m)?;
    let start = validate_start(world, &grid)?;
    let goal_cell = world_to_cell(goal.position, &grid)?;
    let prompt = build_raw_planning_prompt(&grid, start, goal_cell);

    let mut latency = 0.0;
    let mut last_err = StageError::RawPlanRejected;
    let mut accepted: Option<WaypointPlan> = None;
    for _attempt in 0..=config.retry_cap {
        match provider.complete(&prompt) {
            Ok(response) => {
                latency += response.latency_s;
                match parse_waypoints(&response.text, world) {
                    Ok(plan) if !plan.waypoints.is_empty() => {
                        match collision_check(&plan, &grid, world.robot_radius_m) {
                            CollisionVerdict::Clear => {
                                accepted = Some(plan);
                                break;
                            }
                            CollisionVerdict::PredictedCollision { .. } => {
                                last_err = StageError::RawPlanRejected;
                            }
                        }
                    }
                    Ok(_) => last_err = StageError::RawPlanRejected,
                    Err(e) => last_err = StageError::ProviderFailure(e.to_string()),
                }
            }
            Err(e) => last_err = StageError::ProviderFailure(e.to_string()),
        }
    }
    let plan = accepted.ok_or(last_err)?;

    let trace = simulate_waypoints(world, &plan.waypoints, &config.noise, seed);
    let reached_goal = !trace.collided
        && trace.final_pose().position().dist(&goal.position) <= config.goal_tolerance_m;
    Ok(StageResult {
        stage_kind: StageKind::RawPlanning,
        decision: ExecRecord::Waypoints(plan),
        goal,
        replanned_with_buffer: 0,
        path: None,
        trace,
        reached_goal,
        provider_latency_s: latency,
    })
}

/// Runs all stages in order. Stage 2 starts from stage 1's final pose; a
/// failed stage stops the mission. Errors aggregate into a failed
/// `TrialResult` rather than propagating.
pub fn run_mission(
    spec: &MissionSpec,
    provider: &dyn DecisionProvider,
    config: &ExecConfig,
    seed: u64,
) -> TrialResult {
    if let Err(e) = spec.validate() {
        return TrialResult {
            schema_version: TRIAL_SCHEMA_VERSION,
            world: spec.world.clone(),
            stage_results: vec![],
            overall_success: false,
            semantic_compliance: false,
            total_time_s: 0.0,
            error: Some(e.to_string()),
        };
    }
    let mut world = spec.world.clone();
    let mut results: Vec<StageResult> = Vec::new();
    let mut error = None;
    let mut total_time = 0.0;
    for (i, stage) in spec.stages.iter().enumerate() {
        let stage_seed = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        match run_stage(&world, stage, provider, spec, config, stage_seed) {
            Ok(result) => {
                total_time += result.trace.duration_s() + result.provider_latency_s;
                let ok = result.reached_goal && !result.trace.collided;
                world.robot_start = result.trace.final_pose();
                results.push(result);
                if !ok {
                    break;
                }
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let overall_success = error.is_none()
        && results.len() == spec.stages.len()
        && results.iter().all(|r| r.reached_goal && !r.trace.collided);
    let semantic_compliance = match results.first() {
        Some(first) if first.reached_goal => match spec.correct_goal_label.as_deref() {
            None | Some("any") => true,
            Some(label) => first.goal.label.as_deref() == Some(label),
        },
        _ => false,
    };
    TrialResult {
        schema_version: TRIAL_SCHEMA_VERSION,
        world: spec.world.clone(),
        stage_results: results,
        overall_success,
        semantic_compliance,
        total_time_s: total_time,
        error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Obstacle, Rect};
    use crate::semantic::{OracleProvider, PromptDoc, ProviderError, ProviderResponse};
    use proptest::prelude::*;
    use rand::Rng;

    fn world(obstacles: Vec<Obstacle>, goals: Vec<Goal>) -> WorldModel {
        WorldModel {
            arena_width_m: 1.0,
            arena_height_m: 1.0,
            obstacles,
            goals,
            robot_start: Pose2::new(0.105, 0.505, 0.0),
            robot_radius_m: 0.05,
        }
    }

    #[test]
    fn simulate_safe_corridor_no_noise() {
        let w = world(vec![Obstacle::new(Rect::from_corners(0.4, 0.7, 0.6, 0.9))], vec![]);
        let noise = NoiseConfig { sigma_m: 0.0, ..NoiseConfig::default() };
        let trace = simulate_waypoints(&w, &[Point2::new(0.9, 0.5)], &noise, 1);
        assert!(!trace.collided);
        assert!((trace.final_pose().x - 0.9).abs() < 1e-9);
        assert_eq!(trace.poses[0].pose, w.robot_start);
    }

    #[test]
    fn simulate_too_narrow_gap_collides() {
        // Gap of 2*radius - epsilon centred on y = 0.5.
        let r = 0.05;
        let gap = 2.0 * r - 0.005;
        let w = world(
            vec![
                Obstacle::new(Rect::from_corners(0.45, 0.5 + gap / 2.0, 0.55, 0.9)),
                Obstacle::new(Rect::from_corners(0.45, 0.1, 0.55, 0.5 - gap / 2.0)),
            ],
            vec![],
        );
        let noise = NoiseConfig { sigma_m: 0.0, ..NoiseConfig::default() };
        let trace = simulate_waypoints(&w, &[Point2::new(0.9, 0.505)], &noise, 1);
        assert!(trace.collided);
        assert!(trace.collision_point.is_some());
        let last = trace.poses.last().unwrap().pose;
        let cp = trace.collision_point.unwrap();
        assert_eq!((last.x, last.y), (cp.x, cp.y));
    }

    #[test]
    fn simulate_is_seed_deterministic() {
        let w = world(vec![], vec![]);
        let noise = NoiseConfig::default();
        let a = simulate_waypoints(&w, &[Point2::new(0.9, 0.5)], &noise, 7);
        let b = simulate_waypoints(&w, &[Point2::new(0.9, 0.5)], &noise, 7);
        assert_eq!(a, b);
        let c = simulate_waypoints(&w, &[Point2::new(0.9, 0.5)], &noise, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn collision_check_clear_and_hit() {
        let w = world(vec![Obstacle::new(Rect::from_corners(0.45, 0.35, 0.55, 0.65))], vec![]);
        let grid = build_grid(&w, 0.01).unwrap();
        let clear_plan =
            WaypointPlan { waypoints: vec![Point2::new(0.1, 0.1), Point2::new(0.9, 0.1)] };
        assert_eq!(collision_check(&clear_plan, &grid, 0.05), CollisionVerdict::Clear);
        let hit_plan =
            WaypointPlan { waypoints: vec![Point2::new(0.1, 0.5), Point2::new(0.9, 0.5)] };
        assert_eq!(
            collision_check(&hit_plan, &grid, 0.05),
            CollisionVerdict::PredictedCollision { segment: 0 }
        );
    }

    /// Dense point-sampling oracle at resolution/4 steps, with the same
    /// footprint dilation as the supercover check.
    fn dense_sampling_verdict(
        plan: &WaypointPlan,
        grid: &OccupancyGrid,
        robot_radius_m: f64,
    ) -> CollisionVerdict {
        let dilation = (robot_radius_m / grid.resolution_m).ceil() as usize;
        let checked = grid.inflate(dilation);
        for (i, pair) in plan.waypoints.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let len = a.dist(&b);
            let steps = (len / (grid.resolution_m / 4.0)).ceil().max(1.0) as usize;
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                let p = Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
                let col = ((p.x / grid.resolution_m).floor() as i64)
                    .clamp(0, grid.cols as i64 - 1) as usize;
                let row = ((p.y / grid.resolution_m).floor() as i64)
                    .clamp(0, grid.rows as i64 - 1) as usize;
                if checked.occupied(Cell::new(col, row)) {
                    return CollisionVerdict::PredictedCollision { segment: i };
                }
            }
        }
        CollisionVerdict::Clear
    }

    #[test]
    fn collision_check_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let mut obstacles = Vec::new();
            for _ in 0..rng.gen_range(1..4) {
                let cx = rng.gen_range(0.2..0.8);
                let cy = rng.gen_range(0.2..0.8);
                let wd = rng.gen_range(0.05..0.2);
                let ht = rng.gen_range(0.05..0.2);
                obstacles.push(Obstacle::new(Rect::new(cx, cy, wd, ht)));
            }
            let w = world(obstacles, vec![]);
            let grid = build_grid(&w, 0.01).unwrap();
            let mut pts = Vec::new();
            for _ in 0..rng.gen_range(2..5) {
                pts.push(Point2::new(rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99)));
            }
            let plan = WaypointPlan { waypoints: pts };
            let fast = collision_check(&plan, &grid, 0.03);
            let slow = dense_sampling_verdict(&plan, &grid, 0.03);
            let agree = matches!(
                (fast, slow),
                (CollisionVerdict::Clear, CollisionVerdict::Clear)
                    | (
                        CollisionVerdict::PredictedCollision { .. },
                        CollisionVerdict::PredictedCollision { .. }
                    )
            );
            assert!(agree, "verdicts disagree: {fast:?} vs {slow:?}");
        }
    }

    fn selection_spec(world: WorldModel, stage: MissionStage) -> MissionSpec {
        MissionSpec {
            stages: vec![stage],
            world,
            buffers_offered: vec![0],
            resolution_m: 0.01,
            correct_goal_label: None,
        }
    }

    #[test]
    fn run_stage_noop_replan_keeps_candidate_path() {
        // Open world: oracle decides buffer 0, same as the candidate.
        let w = world(vec![], vec![Goal::new(Point2::new(0.85, 0.75), "g")]);
        let stage = MissionStage::final_navigation(&[]);
        let spec = selection_spec(w.clone(), stage.clone());
        let config = ExecConfig {
            noise: NoiseConfig { sigma_m: 0.0, ..NoiseConfig::default() },
            ..ExecConfig::default()
        };
        let provider = OracleProvider::default();
        let result = run_stage(&w, &stage, &provider, &spec, &config, 3).unwrap();
        assert_eq!(result.replanned_with_buffer, 0);
        assert!(result.reached_goal);
        assert!(matches!(result.decision, ExecRecord::Selected(d) if d.buffer == 0));
    }

    #[test]
    fn run_stage_replans_when_buffer_differs() {
        // A tight gap on the way to the goal forces min clearance under
        // the oracle threshold; the decision requests buffer 20 and the
        // stage must replan on the inflated grid.
        let w = WorldModel {
            arena_width_m: 1.0,
            arena_height_m: 1.0,
            obstacles: vec![
                Obstacle::new(Rect::from_corners(0.40, 0.30, 0.52, 0.50)),
                Obstacle::new(Rect::from_corners(0.40, 0.56, 0.52, 0.76)),
            ],
            goals: vec![Goal::new(Point2::new(0.85, 0.53), "g")],
            robot_start: Pose2::new(0.105, 0.525, 0.0),
            robot_radius_m: 0.02,
        };
        let stage = MissionStage::final_navigation(&[]);
        let spec = selection_spec(w.clone(), stage.clone());
        let config = ExecConfig {
            noise: NoiseConfig { sigma_m: 0.0, ..NoiseConfig::default() },
            ..ExecConfig::default()
        };
        let provider = OracleProvider::default();
        let result = run_stage(&w, &stage, &provider, &spec, &config, 5).unwrap();
        assert_eq!(result.replanned_with_buffer, 20);
        assert!(matches!(result.decision, ExecRecord::Selected(d) if d.buffer == 20));
        // The raw route really was tight, so the replan changed the route.
        let raw = build_grid(&w, 0.01).unwrap();
        let field = crate::grid::clearance_field(&raw);
        let start = validate_start(&w, &raw).unwrap();
        let goal_cell = world_to_cell(w.goals[0].position, &raw).unwrap();
        let raw_path = astar(&raw, start, goal_cell).unwrap();
        let raw_min =
            raw_path.cells.iter().map(|&c| field.clearance_m(c)).fold(f64::INFINITY, f64::min);
        assert!(raw_min < 0.05, "fixture should make the raw route tight, got {raw_min}");
    }

    #[test]
    fn run_stage_narrow_corridor_no_path_after_buffer() {
        // Corridor 10 cells wide blocks entirely under buffer 20.
        let w = WorldModel {
            arena_width_m: 1.0,
            arena_height_m: 1.0,
            obstacles: vec![
                Obstacle::new(Rect::from_corners(0.30, 0.0, 0.40, 0.45)),
                Obstacle::new(Rect::from_corners(0.30, 0.55, 0.40, 1.0)),
            ],
            goals: vec![Goal::new(Point2::new(0.9, 0.52), "g")],
            robot_start: Pose2::new(0.105, 0.505, 0.0),
            robot_radius_m: 0.02,
        };
        let stage = MissionStage::final_navigation(&[]);
        let spec = selection_spec(w.clone(), stage.clone());
        let config = ExecConfig::default();
        let provider = OracleProvider::default();
        let err = run_stage(&w, &stage, &provider, &spec, &config, 11).unwrap_err();
        assert!(matches!(err, StageError::NoPathAfterBuffer { buffer: 20, .. }));
    }

    struct AlwaysColliding {
        calls: std::sync::atomic::AtomicUsize,
    }
    impl DecisionProvider for AlwaysColliding {
        fn kind(&self) -> &str {
            "stub"
        }
        fn complete(&self, _p: &PromptDoc) -> Result<ProviderResponse, ProviderError> {
            self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            // A straight line through the central obstacle.
            Ok(ProviderResponse { text: "[[0.105,0.505],[0.9,0.5]]".to_string(), latency_s: 0.0 })
        }
    }

    #[test]
    fn raw_mission_requeries_then_fails() {
        let w = world(
            vec![Obstacle::new(Rect::from_corners(0.45, 0.25, 0.55, 0.75))],
            vec![Goal::new(Point2::new(0.9, 0.5), "goal")],
        );
        let spec = MissionSpec {
            stages: vec![MissionStage::raw_planning()],
            world: w,
            buffers_offered: vec![0],
            resolution_m: 0.01,
            correct_goal_label: Some("any".to_string()),
        };
        let provider = AlwaysColliding { calls: std::sync::atomic::AtomicUsize::new(0) };
        let result = run_mission(&spec, &provider, &ExecConfig::default(), 1);
        assert!(!result.overall_success);
        assert!(result.error.is_some());
        // Initial call plus retry_cap re-queries.
        assert_eq!(provider.calls.load(std::sync::atomic::Ordering::SeqCst), 4);
    }

    #[test]
    fn raw_mission_succeeds_with_oracle() {
        let w = world(
            vec![Obstacle::new(Rect::from_corners(0.45, 0.35, 0.55, 0.65))],
            vec![Goal::new(Point2::new(0.9, 0.5), "goal")],
        );
        let spec = MissionSpec {
            stages: vec![MissionStage::raw_planning()],
            world: w,
            buffers_offered: vec![0],
            resolution_m: 0.01,
            correct_goal_label: Some("any".to_string()),
        };
        let config = ExecConfig {
            noise: NoiseConfig { sigma_m: 0.0, ..NoiseConfig::default() },
            ..ExecConfig::default()
        };
        let result = run_mission(&spec, &OracleProvider::default(), &config, 1);
        assert!(result.overall_success, "error: {:?}", result.error);
        assert!(result.semantic_compliance);
    }

    struct FailingProvider;
    impl DecisionProvider for FailingProvider {
        fn kind(&self) -> &str {
            "failing"
        }
        fn complete(&self, _p: &PromptDoc) -> Result<ProviderResponse, ProviderError> {
            Err(ProviderError::Timeout)
        }
    }

    #[test]
    fn stage1_failure_stops_mission() {
        let w = world(
            vec![],
            vec![
                Goal::new(Point2::new(0.5, 0.8), "resource"),
                Goal::new(Point2::new(0.9, 0.2), "final"),
            ],
        );
        let spec = MissionSpec {
            stages: vec![
                MissionStage::resource_collection(&[]).with_goals(&["resource", "final"]),
                MissionStage::final_navigation(&[]).with_goals(&["final"]),
            ],
            world: w,
            buffers_offered: vec![0],
            resolution_m: 0.01,
            correct_goal_label: Some("resource".to_string()),
        };
        let result = run_mission(&spec, &FailingProvider, &ExecConfig::default(), 1);
        assert!(!result.overall_success);
        assert!(!result.semantic_compliance);
        assert!(result.stage_results.is_empty());
        assert!(result.error.as_deref().unwrap_or("").contains("timed out"));
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 16, .. ProptestConfig::default() })]

        /// Zero noise plus a buffer covering the footprint: following an
        /// A* path never collides.
        #[test]
        fn noise_free_buffered_follow_never_collides(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut obstacles = Vec::new();
            for _ in 0..3 {
                let cx = rng.gen_range(0.3..0.7);
                let cy = rng.gen_range(0.3..0.7);
                obstacles.push(Obstacle::new(Rect::new(cx, cy, 0.1, 0.1)));
            }
            // Half-cell radius keeps ceil(r/res) comfortably sufficient.
            let radius = 0.035;
            let w = WorldModel {
                arena_width_m: 1.0,
                arena_height_m: 1.0,
                obstacles,
                goals: vec![Goal::new(Point2::new(0.925, 0.925), "g")],
                robot_start: Pose2::new(0.055, 0.055, 0.0),
                robot_radius_m: radius,
            };
            let raw = build_grid(&w, 0.01).unwrap();
            let buffer = (radius / 0.01).ceil() as usize;
            let inflated = raw.inflate(buffer);
            let start = world_to_cell(w.robot_start.position(), &inflated).unwrap();
            let goal_cell = world_to_cell(w.goals[0].position, &inflated).unwrap();
            if inflated.occupied(start) || inflated.occupied(goal_cell) {
                return Ok(());
            }
            if let Ok(path) = astar(&inflated, start, goal_cell) {
                let noise = NoiseConfig { sigma_m: 0.0, ..NoiseConfig::default() };
                let trace = simulate_follow(&w, &path, &noise, seed);
                prop_assert!(!trace.collided);
            }
        }
    }
}
