//! Scenario corpus, seeded trial batches, report aggregation and
//! rendering, and world visualization for debugging.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::executor::{run_mission, ExecConfig, MissionSpec, NoiseConfig, TrialResult};
use crate::grid::{build_grid, world_to_cell, Goal, Obstacle, Point2, Pose2, Rect, WorldModel};
use crate::planner::PathCandidate;
use crate::semantic::{DecisionProvider, MissionStage, StageKind};

/// Cell size of the calibrated reconstruction fixture. Chosen so that the
/// fixture's candidate metrics land on the reference decision-protocol
/// values within 1e-6: the resource leg is 2320 straight steps at 525
/// cells from a long wall, the other leg is 2682 straight plus 860
/// diagonal steps grazing a block at 21 cells.
pub const CALIBRATION_RESOLUTION_M: f64 = 2.523810744465518e-4;

/// A named, runnable experiment: world, mission, correct goal, trial
/// defaults, jitter bounds, and execution policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub world: WorldModel,
    pub mission: MissionSpec,
    pub correct_goal_label: String,
    pub trials_default: usize,
    #[serde(default)]
    pub jitter: JitterSpec,
    #[serde(default)]
    pub exec: ExecConfig,
}

/// Per-trial placement perturbation bounds, metres per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct JitterSpec {
    pub obstacle_m: f64,
    pub goal_m: f64,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown builtin scenario {0:?}")]
    UnknownBuiltin(String),
    #[error("scenario file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario schema error: {0}")]
    Schema(#[from] toml::de::Error),
    #[error("scenario invalid: {0}")]
    Invalid(String),
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.world.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if self.correct_goal_label != "any"
            && !self
                .world
                .goals
                .iter()
                .any(|g| g.label.as_deref() == Some(self.correct_goal_label.as_str()))
        {
            return Err(ScenarioError::Invalid(format!(
                "correct_goal_label {:?} names no goal",
                self.correct_goal_label
            )));
        }
        self.mission.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn scenario(
    name: &str,
    world: WorldModel,
    stages: Vec<MissionStage>,
    buffers: &[usize],
    resolution: f64,
    correct: &str,
    trials: usize,
    jitter: JitterSpec,
    exec: ExecConfig,
) -> Scenario {
    let mission = MissionSpec {
        stages,
        world: world.clone(),
        buffers_offered: buffers.to_vec(),
        resolution_m: resolution,
        correct_goal_label: Some(correct.to_string()),
    };
    Scenario {
        name: name.to_string(),
        world,
        mission,
        correct_goal_label: correct.to_string(),
        trials_default: trials,
        jitter,
        exec,
    }
}

fn arena(obstacles: Vec<Obstacle>, goals: Vec<Goal>, start: Pose2) -> WorldModel {
    WorldModel {
        arena_width_m: 1.0,
        arena_height_m: 1.0,
        obstacles,
        goals,
        robot_start: start,
        robot_radius_m: 0.05,
    }
}

/// The scenario corpus run by full experiments: three geometric courses,
/// the three semantic tasks, and the two-stage sequential task.
pub const EXPERIMENT_SCENARIOS: [&str; 7] =
    ["course1", "course2", "course3", "toxic", "battery", "crowded", "sequential"];

/// All builtin names, including the calibration and risk fixtures.
pub const BUILTIN_SCENARIOS: [&str; 9] = [
    "course1",
    "course2",
    "course3",
    "toxic",
    "battery",
    "crowded",
    "sequential",
    "narrow_gap",
    "calibration",
];

/// Constructs a builtin scenario by name.
pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    let default_jitter = JitterSpec { obstacle_m: 0.02, goal_m: 0.01 };
    let small_jitter = JitterSpec { obstacle_m: 0.01, goal_m: 0.01 };
    match name {
        "course1" => Ok(scenario(
            "course1",
            arena(
                vec![Obstacle::new(Rect::from_corners(0.45, 0.35, 0.55, 0.65))],
                vec![Goal::new(Point2::new(0.90, 0.50), "goal")],
                Pose2::new(0.105, 0.505, 0.0),
            ),
            vec![MissionStage::raw_planning()],
            &[0],
            0.01,
            "any",
            5,
            default_jitter,
            ExecConfig::default(),
        )),
        "course2" => Ok(scenario(
            "course2",
            arena(
                vec![
                    Obstacle::new(Rect::from_corners(0.35, 0.15, 0.45, 0.55)),
                    Obstacle::new(Rect::from_corners(0.60, 0.45, 0.70, 0.85)),
                ],
                vec![Goal::new(Point2::new(0.90, 0.50), "goal")],
                Pose2::new(0.105, 0.505, 0.0),
            ),
            vec![MissionStage::raw_planning()],
            &[0],
            0.01,
            "any",
            5,
            small_jitter,
            ExecConfig::default(),
        )),
        "course3" => Ok(scenario(
            "course3",
            // Alternating walls force a winding under-over-under slalom.
            arena(
                vec![
                    Obstacle::new(Rect::from_corners(0.18, 0.30, 0.26, 1.0)),
                    Obstacle::new(Rect::from_corners(0.46, 0.0, 0.54, 0.70)),
                    Obstacle::new(Rect::from_corners(0.74, 0.30, 0.82, 1.0)),
                ],
                vec![Goal::new(Point2::new(0.945, 0.155), "goal")],
                Pose2::new(0.105, 0.155, 0.0),
            ),
            vec![MissionStage::raw_planning()],
            &[0],
            0.01,
            "any",
            5,
            JitterSpec { obstacle_m: 0.005, goal_m: 0.01 },
            ExecConfig::default(),
        )),
        "toxic" => {
            let exec = ExecConfig {
                planner: crate::planner::PlannerConfig {
                    descriptor_radius_m: 0.30,
                    ..Default::default()
                },
                ..ExecConfig::default()
            };
            Ok(scenario(
                "toxic",
                arena(
                    vec![Obstacle::labeled(Rect::from_corners(0.55, 0.44, 0.82, 0.50), "TOXIC")],
                    vec![
                        Goal::new(Point2::new(0.85, 0.85), "clear"),
                        Goal::new(Point2::new(0.85, 0.20), "spill"),
                    ],
                    Pose2::new(0.105, 0.505, 0.0),
                ),
                vec![MissionStage::final_navigation(&["there is a toxic spill in the area"])],
                &[0],
                0.01,
                "clear",
                10,
                small_jitter,
                exec,
            ))
        }
        "battery" => {
            // Identical geometry to the toxic scenario; only the label and
            // the cue change, so the same skinny object reads as a charger.
            let exec = ExecConfig {
                planner: crate::planner::PlannerConfig {
                    descriptor_radius_m: 0.30,
                    ..Default::default()
                },
                ..ExecConfig::default()
            };
            Ok(scenario(
                "battery",
                arena(
                    vec![Obstacle::labeled(Rect::from_corners(0.55, 0.44, 0.82, 0.50), "battery")],
                    vec![
                        Goal::new(Point2::new(0.85, 0.85), "away"),
                        Goal::new(Point2::new(0.85, 0.20), "station"),
                    ],
                    Pose2::new(0.105, 0.505, 0.0),
                ),
                vec![MissionStage::final_navigation(&[
                    "you are low on battery and must recharge before continuing",
                ])],
                &[0],
                0.01,
                "station",
                10,
                small_jitter,
                exec,
            ))
        }
        "crowded" => Ok(scenario(
            "crowded",
            arena(
                vec![
                    Obstacle::new(Rect::from_corners(0.70, 0.10, 0.78, 0.18)),
                    Obstacle::new(Rect::from_corners(0.90, 0.24, 0.98, 0.32)),
                    Obstacle::new(Rect::from_corners(0.68, 0.28, 0.76, 0.36)),
                ],
                vec![
                    Goal::new(Point2::new(0.85, 0.85), "quiet"),
                    Goal::new(Point2::new(0.85, 0.20), "busy"),
                ],
                Pose2::new(0.105, 0.505, 0.0),
            ),
            vec![MissionStage::final_navigation(&["one goal is in a crowded area"])],
            &[0],
            0.01,
            "quiet",
            10,
            small_jitter,
            ExecConfig::default(),
        )),
        "sequential" => {
            let exec = ExecConfig {
                planner: crate::planner::PlannerConfig {
                    descriptor_radius_m: 0.30,
                    ..Default::default()
                },
                ..ExecConfig::default()
            };
            Ok(scenario(
                "sequential",
                arena(
                    vec![
                        Obstacle::new(Rect::from_corners(0.60, 0.56, 0.90, 0.62)),
                        Obstacle::new(Rect::from_corners(0.44, 0.56, 0.56, 0.66)),
                        Obstacle::new(Rect::from_corners(0.44, 0.28, 0.56, 0.48)),
                    ],
                    vec![
                        Goal::new(Point2::new(0.88, 0.88), "resource"),
                        Goal::new(Point2::new(0.14, 0.12), "final"),
                    ],
                    Pose2::new(0.105, 0.905, 0.0),
                ),
                vec![
                    MissionStage::resource_collection(&[]).with_goals(&["resource", "final"]),
                    MissionStage::final_navigation(&[]).with_goals(&["final"]),
                ],
                &[0],
                0.01,
                "resource",
                10,
                JitterSpec { obstacle_m: 0.01, goal_m: 0.005 },
                exec,
            ))
        }
        "narrow_gap" => {
            // The risky five-centimetre-clearance corridor: the gap equals
            // the robot width plus ten centimetres.
            Ok(scenario(
                "narrow_gap",
                arena(
                    vec![
                        Obstacle::new(Rect::from_corners(0.25, 0.36, 0.75, 0.40)),
                        Obstacle::new(Rect::from_corners(0.25, 0.60, 0.75, 0.64)),
                    ],
                    vec![Goal::new(Point2::new(0.985, 0.505), "goal")],
                    Pose2::new(0.025, 0.505, 0.0),
                ),
                vec![MissionStage::final_navigation(&[])],
                &[0],
                0.01,
                "any",
                10,
                JitterSpec::default(),
                ExecConfig::default(),
            ))
        }
        "calibration" => Ok(calibration_scenario()),
        other => Err(ScenarioError::UnknownBuiltin(other.to_string())),
    }
}

/// The quantitative reconstruction fixture. Geometry is expressed in whole
/// cells of [`CALIBRATION_RESOLUTION_M`] so the candidate metrics are exact:
/// a 2401 x 61 cell wall 525 cells below the straight resource leg, and an
/// 81 x 80 cell block 21 cells below the other goal's straight leg.
pub fn calibration_scenario() -> Scenario {
    let r = CALIBRATION_RESOLUTION_M;
    let cell_center =
        |col: usize, row: usize| Point2::new((col as f64 + 0.5) * r, (row as f64 + 0.5) * r);
    let cell_rect = |c0: usize, r0: usize, c1: usize, r1: usize| {
        Rect::from_corners(c0 as f64 * r, r0 as f64 * r, (c1 + 1) as f64 * r, (r1 + 1) as f64 * r)
    };
    let start = cell_center(100, 700);
    let world = WorldModel {
        arena_width_m: 3720.5 * r,
        arena_height_m: 1720.5 * r,
        obstacles: vec![
            Obstacle::new(cell_rect(60, 115, 2460, 175)),
            Obstacle::new(cell_rect(1760, 1581, 1840, 1660)),
        ],
        goals: vec![
            Goal::new(cell_center(2420, 700), "resource"),
            Goal::new(cell_center(3642, 1560), "final"),
        ],
        robot_start: Pose2::new(start.x, start.y, 0.0),
        robot_radius_m: 0.002,
    };
    let exec = ExecConfig {
        planner: crate::planner::PlannerConfig {
            // The reference metrics show obstacle_count 0 for a candidate with
            // 5.3 mm minimum clearance, so the counting radius sits below.
            proximity_radius_m: 0.005,
            descriptor_radius_m: 0.15,
            ..Default::default()
        },
        noise: NoiseConfig { sigma_m: 0.0, ..NoiseConfig::default() },
        ..ExecConfig::default()
    };
    scenario(
        "calibration",
        world,
        vec![
            MissionStage::resource_collection(&[]).with_goals(&["resource", "final"]),
            MissionStage::final_navigation(&[]).with_goals(&["final"]),
        ],
        &[0],
        CALIBRATION_RESOLUTION_M,
        "resource",
        1,
        JitterSpec::default(),
        exec,
    )
}

/// Generates the stage-1 candidate set of the reconstruction fixture.
pub fn calibration_candidates() -> Vec<PathCandidate> {
    let s = calibration_scenario();
    crate::planner::generate_candidates(
        &s.world,
        &s.world.goals,
        &s.mission.buffers_offered,
        s.mission.resolution_m,
        &s.exec.planner,
    )
    .expect("calibration fixture candidates are reachable")
}

// ---------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct ScenarioFile {
    name: String,
    resolution_m: f64,
    #[serde(default)]
    buffers_offered: Option<Vec<usize>>,
    correct_goal_label: String,
    #[serde(default)]
    trials_default: Option<usize>,
    world: WorldFile,
    stages: Vec<StageFile>,
    #[serde(default)]
    jitter: Option<JitterSpec>,
    #[serde(default)]
    exec: Option<ExecConfig>,
}

#[derive(Debug, Deserialize)]
struct WorldFile {
    arena_width_m: f64,
    arena_height_m: f64,
    robot_radius_m: f64,
    robot_start: Pose2,
    #[serde(default)]
    obstacles: Vec<ObstacleFile>,
    goals: Vec<GoalFile>,
}

#[derive(Debug, Deserialize)]
struct ObstacleFile {
    center: [f64; 2],
    width_m: f64,
    height_m: f64,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Debug, Deserialize)]
struct GoalFile {
    position: [f64; 2],
    #[serde(default)]
    label: Option<String>,
}

#[derive(Debug, Deserialize)]
struct StageFile {
    kind: StageKind,
    #[serde(default)]
    instruction: Option<String>,
    #[serde(default)]
    cues: Vec<String>,
    #[serde(default)]
    goal_labels: Option<Vec<String>>,
}

/// Loads a scenario from a TOML file. Schema violations surface with the
/// parser's line/column diagnostics.
pub fn load_scenario(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let file: ScenarioFile = toml::from_str(&text)?;
    let world = WorldModel {
        arena_width_m: file.world.arena_width_m,
        arena_height_m: file.world.arena_height_m,
        obstacles: file
            .world
            .obstacles
            .iter()
            .map(|o| Obstacle {
                shape: Rect::new(o.center[0], o.center[1], o.width_m, o.height_m),
                label: o.label.clone(),
            })
            .collect(),
        goals: file
            .world
            .goals
            .iter()
            .map(|g| Goal {
                position: Point2::new(g.position[0], g.position[1]),
                label: g.label.clone(),
            })
            .collect(),
        robot_start: file.world.robot_start,
        robot_radius_m: file.world.robot_radius_m,
    };
    let stages = file
        .stages
        .iter()
        .map(|s| {
            let mut stage = match s.kind {
                StageKind::ResourceCollection => MissionStage::resource_collection(&[]),
                StageKind::FinalNavigation => MissionStage::final_navigation(&[]),
                StageKind::RawPlanning => MissionStage::raw_planning(),
            };
            if let Some(instruction) = &s.instruction {
                stage.instruction_text = instruction.clone();
            }
            stage.semantic_cues = s.cues.clone();
            stage.goal_labels = s.goal_labels.clone();
            stage
        })
        .collect();
    let out = scenario(
        &file.name,
        world,
        stages,
        &file.buffers_offered.unwrap_or_else(|| vec![0]),
        file.resolution_m,
        &file.correct_goal_label,
        file.trials_default.unwrap_or(10),
        file.jitter.unwrap_or_default(),
        file.exec.unwrap_or_default(),
    );
    out.validate()?;
    Ok(out)
}

// ---------------------------------------------------------------------
// Trials and reports
// ---------------------------------------------------------------------

/// One scenario's aggregated trial outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub trials: usize,
    pub success_rate: f64,
    pub compliance_rate: f64,
    pub mean_latency_s: f64,
    pub max_latency_s: f64,
    pub mean_path_length_m: f64,
    pub mean_time_s: f64,
    pub collision_count: usize,
    pub trial_results: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub provider_kind: String,
    pub seed: u64,
    pub config_hash: String,
}

/// Batch report: one row per scenario plus run provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ScenarioRow>,
    pub provenance: Provenance,
}

impl Report {
    /// Concatenates rows; provenance hashes combine so any config change
    /// still changes the merged hash.
    pub fn merge(reports: Vec<Report>) -> Report {
        let provider_kind =
            reports.first().map(|r| r.provenance.provider_kind.clone()).unwrap_or_default();
        let seed = reports.first().map(|r| r.provenance.seed).unwrap_or(0);
        let mut hasher = Sha256::new();
        let mut rows = Vec::new();
        for r in reports {
            hasher.update(r.provenance.config_hash.as_bytes());
            rows.extend(r.rows);
        }
        let config_hash = hex_digest(hasher);
        Report { rows, provenance: Provenance { provider_kind, seed, config_hash } }
    }
}

fn hex_digest(hasher: Sha256) -> String {
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn config_hash(scenario: &Scenario, n: usize, seed: u64, provider_kind: &str) -> String {
    let mut hasher = Sha256::new();
    let blob = serde_json::json!({
        "scenario": scenario,
        "n": n,
        "seed": seed,
        "provider": provider_kind,
        "trial_schema": crate::executor::TRIAL_SCHEMA_VERSION,
    });
    hasher.update(serde_json::to_string(&blob).expect("config serializes").as_bytes());
    hex_digest(hasher)
}

fn jitter_world(world: &WorldModel, jitter: &JitterSpec, rng: &mut ChaCha8Rng) -> WorldModel {
    let mut out = world.clone();
    let draw = |rng: &mut ChaCha8Rng, j: f64| if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
    for o in &mut out.obstacles {
        o.shape.cx += draw(rng, jitter.obstacle_m);
        o.shape.cy += draw(rng, jitter.obstacle_m);
    }
    for g in &mut out.goals {
        g.position.x += draw(rng, jitter.goal_m);
        g.position.y += draw(rng, jitter.goal_m);
    }
    out
}

fn valid_trial_world(world: &WorldModel, resolution_m: f64) -> bool {
    if world.validate().is_err() {
        return false;
    }
    let Ok(grid) = build_grid(world, resolution_m) else { return false };
    if crate::grid::validate_start(world, &grid).is_err() {
        return false;
    }
    world
        .goals
        .iter()
        .all(|g| world_to_cell(g.position, &grid).map(|c| !grid.occupied(c)).unwrap_or(false))
}

/// Runs `n` seeded trials of a scenario: per-trial jitter of obstacle and
/// goal placements within the declared bounds (validity re-checked, with
/// resampling), mission execution, and aggregation.
pub fn run_trials(
    scenario: &Scenario,
    n: usize,
    provider: &dyn DecisionProvider,
    seed: u64,
) -> Report {
    let mut results = Vec::with_capacity(n);
    for trial in 0..n {
        let trial_seed = seed.wrapping_add((trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut jitter_rng = ChaCha8Rng::seed_from_u64(trial_seed ^ 0x6A09_E667_F3BC_C908);
        let mut world = scenario.world.clone();
        if scenario.jitter.obstacle_m > 0.0 || scenario.jitter.goal_m > 0.0 {
            for _ in 0..64 {
                let candidate = jitter_world(&scenario.world, &scenario.jitter, &mut jitter_rng);
                if valid_trial_world(&candidate, scenario.mission.resolution_m) {
                    world = candidate;
                    break;
                }
            }
        }
        let spec = MissionSpec { world, ..scenario.mission.clone() };
        results.push(run_mission(&spec, provider, &scenario.exec, trial_seed));
    }

    let trials = results.len();
    let successes = results.iter().filter(|r| r.overall_success).count();
    let compliant = results.iter().filter(|r| r.semantic_compliance).count();
    let latencies: Vec<f64> = results
        .iter()
        .map(|r| r.stage_results.iter().map(|s| s.provider_latency_s).sum::<f64>())
        .collect();
    let mean_latency_s =
        if trials > 0 { latencies.iter().sum::<f64>() / trials as f64 } else { 0.0 };
    let max_latency_s = latencies.iter().copied().fold(0.0, f64::max);
    let path_lengths: Vec<f64> = results
        .iter()
        .filter(|r| !r.stage_results.is_empty())
        .map(|r| r.stage_results.iter().map(|s| s.trace.distance_travelled_m).sum::<f64>())
        .collect();
    let mean_path_length_m = if path_lengths.is_empty() {
        0.0
    } else {
        path_lengths.iter().sum::<f64>() / path_lengths.len() as f64
    };
    let mean_time_s = if trials > 0 {
        results.iter().map(|r| r.total_time_s).sum::<f64>() / trials as f64
    } else {
        0.0
    };
    let collision_count = results
        .iter()
        .map(|r| r.stage_results.iter().filter(|s| s.trace.collided).count())
        .sum();

    let rate = |k: usize| if trials > 0 { k as f64 / trials as f64 } else { 0.0 };
    Report {
        rows: vec![ScenarioRow {
            scenario: scenario.name.clone(),
            trials,
            success_rate: rate(successes),
            compliance_rate: rate(compliant),
            mean_latency_s,
            max_latency_s,
            mean_path_length_m,
            mean_time_s,
            collision_count,
            trial_results: results,
        }],
        provenance: Provenance {
            provider_kind: provider.kind().to_string(),
            seed,
            config_hash: config_hash(scenario, n, seed, provider.kind()),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Renders a report. The text table carries the experiment columns
/// (trials, success, semantic success, times, latencies); json round-trips
/// through the `Report` type; csv is one row per scenario.
pub fn render_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        ReportFormat::Csv => {
            let mut out = String::from(
                "scenario,trials,success_rate,semantic_success_rate,mean_time_s,\
                 mean_latency_s,max_latency_s,mean_path_length_m,collisions\n",
            );
            for row in &report.rows {
                out.push_str(&format!(
                    "{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.4},{}\n",
                    row.scenario,
                    row.trials,
                    row.success_rate,
                    row.compliance_rate,
                    row.mean_time_s,
                    row.mean_latency_s,
                    row.max_latency_s,
                    row.mean_path_length_m,
                    row.collision_count
                ));
            }
            out
        }
        ReportFormat::Text => {
            let mut out = String::new();
            out.push_str(&format!(
                "{:<12} {:>6} {:>9} {:>9} {:>10} {:>13} {:>13} {:>11} {:>10}\n",
                "scenario",
                "trials",
                "success",
                "semantic",
                "avg_time_s",
                "avg_latency_s",
                "max_latency_s",
                "mean_path_m",
                "collisions"
            ));
            for row in &report.rows {
                out.push_str(&format!(
                    "{:<12} {:>6} {:>8.0}% {:>8.0}% {:>10.2} {:>13.3} {:>13.3} {:>11.3} {:>10}\n",
                    row.scenario,
                    row.trials,
                    row.success_rate * 100.0,
                    row.compliance_rate * 100.0,
                    row.mean_time_s,
                    row.mean_latency_s,
                    row.max_latency_s,
                    row.mean_path_length_m,
                    row.collision_count
                ));
            }
            out.push_str(&format!(
                "provider={} seed={} config={}\n",
                report.provenance.provider_kind,
                report.provenance.seed,
                &report.provenance.config_hash[..16.min(report.provenance.config_hash.len())]
            ));
            out
        }
    }
}

/// Serializes per-trial results as line-delimited JSON.
pub fn trials_jsonl(report: &Report) -> String {
    let mut out = String::new();
    for row in &report.rows {
        for trial in &row.trial_results {
            out.push_str(&serde_json::to_string(trial).expect("trial serializes"));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldFormat {
    Ascii,
    Pgm,
}

impl std::str::FromStr for WorldFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ascii" => Ok(Self::Ascii),
            "pgm" | "image" => Ok(Self::Pgm),
            other => Err(format!("unknown world format {other:?}")),
        }
    }
}

/// Renders the world and any candidate paths. ASCII output is one glyph
/// per grid cell up to 120 columns (then block-downsampled with paths
/// drawn above obstacles); PGM output is binary P5, one pixel per cell.
pub fn render_world(
    world: &WorldModel,
    paths: &[&crate::planner::Path],
    resolution_m: f64,
    format: WorldFormat,
) -> Vec<u8> {
    let grid = build_grid(world, resolution_m).expect("world renders");
    match format {
        WorldFormat::Ascii => render_ascii(world, &grid, paths).into_bytes(),
        WorldFormat::Pgm => render_pgm(world, &grid, paths),
    }
}

fn render_ascii(
    world: &WorldModel,
    grid: &crate::grid::OccupancyGrid,
    paths: &[&crate::planner::Path],
) -> String {
    let scale = grid.cols.div_ceil(120).max(1);
    let w = grid.cols.div_ceil(scale);
    let h = grid.rows.div_ceil(scale);
    let mut canvas = vec![b'.'; w * h];
    for cell in grid.occupied_cells() {
        canvas[(cell.row / scale) * w + cell.col / scale] = b'#';
    }
    for (i, path) in paths.iter().enumerate() {
        let glyph = b'0' + (i % 10) as u8;
        for cell in &path.cells {
            canvas[(cell.row / scale) * w + cell.col / scale] = glyph;
        }
    }
    for goal in &world.goals {
        if let Ok(cell) = world_to_cell(goal.position, grid) {
            canvas[(cell.row / scale) * w + cell.col / scale] = b'G';
        }
    }
    if let Ok(cell) = world_to_cell(world.robot_start.position(), grid) {
        canvas[(cell.row / scale) * w + cell.col / scale] = b'S';
    }
    // Row 0 is the bottom of the arena; print top-down.
    let mut out = String::with_capacity((w + 3) * (h + 2));
    out.push('+');
    out.push_str(&"-".repeat(w));
    out.push_str("+\n");
    for row in (0..h).rev() {
        out.push('|');
        for col in 0..w {
            out.push(canvas[row * w + col] as char);
        }
        out.push_str("|\n");
    }
    out.push('+');
    out.push_str(&"-".repeat(w));
    out.push_str("+\n");
    out
}

fn render_pgm(
    world: &WorldModel,
    grid: &crate::grid::OccupancyGrid,
    paths: &[&crate::planner::Path],
) -> Vec<u8> {
    let mut pixels = vec![255u8; grid.cols * grid.rows];
    for cell in grid.occupied_cells() {
        pixels[cell.row * grid.cols + cell.col] = 0;
    }
    for path in paths {
        for cell in &path.cells {
            pixels[cell.row * grid.cols + cell.col] = 128;
        }
    }
    for goal in &world.goals {
        if let Ok(cell) = world_to_cell(goal.position, grid) {
            pixels[cell.row * grid.cols + cell.col] = 192;
        }
    }
    if let Ok(cell) = world_to_cell(world.robot_start.position(), grid) {
        pixels[cell.row * grid.cols + cell.col] = 64;
    }
    let mut out = format!("P5\n{} {}\n255\n", grid.cols, grid.rows).into_bytes();
    // Flip vertically so row 0 (bottom) lands at the image bottom.
    for row in (0..grid.rows).rev() {
        out.extend_from_slice(&pixels[row * grid.cols..(row + 1) * grid.cols]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::clearance_field;
    use crate::planner::astar;
    use crate::semantic::OracleProvider;

    #[test]
    fn builtin_course1_has_one_obstacle_between() {
        let s = builtin("course1").unwrap();
        assert_eq!(s.world.obstacles.len(), 1);
        let o = &s.world.obstacles[0];
        let sx = s.world.robot_start.x;
        let gx = s.world.goals[0].position.x;
        assert!(o.shape.cx > sx && o.shape.cx < gx);
        s.validate().unwrap();
    }

    #[test]
    fn builtin_crowded_has_clustered_goal() {
        let s = builtin("crowded").unwrap();
        let busy = s.world.goals.iter().find(|g| g.label.as_deref() == Some("busy")).unwrap();
        let near =
            s.world.obstacles.iter().filter(|o| o.shape.distance_to(busy.position) <= 0.15).count();
        assert!(near >= 3, "expected at least 3 obstacles near the busy goal, got {near}");
        // The crowded goal stays reachable.
        let grid = build_grid(&s.world, 0.01).unwrap();
        let start = crate::grid::validate_start(&s.world, &grid).unwrap();
        let goal = world_to_cell(busy.position, &grid).unwrap();
        assert!(astar(&grid, start, goal).is_ok());
    }

    #[test]
    fn all_builtins_validate() {
        for name in BUILTIN_SCENARIOS {
            let s = builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn scenario_file_roundtrip_and_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.toml");
        std::fs::write(
            &good,
            r#"
name = "filetest"
resolution_m = 0.01
correct_goal_label = "g"
trials_default = 3

[world]
arena_width_m = 1.0
arena_height_m = 1.0
robot_radius_m = 0.05
robot_start = { x = 0.1, y = 0.5, heading = 0.0 }

[[world.obstacles]]
center = [0.5, 0.5]
width_m = 0.1
height_m = 0.3
label = "TOXIC"

[[world.goals]]
position = [0.9, 0.5]
label = "g"

[[stages]]
kind = "final_navigation"
cues = ["there is a toxic spill"]
"#,
        )
        .unwrap();
        let s = load_scenario(&good).unwrap();
        assert_eq!(s.name, "filetest");
        assert_eq!(s.trials_default, 3);
        assert_eq!(s.world.obstacles[0].label.as_deref(), Some("TOXIC"));

        // Missing goals section fails with a schema diagnostic.
        let bad = dir.path().join("bad.toml");
        std::fs::write(
            &bad,
            r#"
name = "broken"
resolution_m = 0.01
correct_goal_label = "g"

[world]
arena_width_m = 1.0
arena_height_m = 1.0
robot_radius_m = 0.05
robot_start = { x = 0.1, y = 0.5 }

[[stages]]
kind = "final_navigation"
"#,
        )
        .unwrap();
        let err = load_scenario(&bad).unwrap_err();
        assert!(matches!(err, ScenarioError::Schema(_)), "got {err:?}");
    }

    #[test]
    fn calibration_candidates_have_expected_shape() {
        let candidates = calibration_candidates();
        assert_eq!(candidates.len(), 2);
        assert_eq!(candidates[0].index, 0);
        assert_eq!(candidates[1].index, 1);
        assert_eq!(candidates[0].goal.label.as_deref(), Some("resource"));
        assert_eq!(candidates[0].metrics.obstacle_count, 0);
        assert_eq!(candidates[1].metrics.obstacle_count, 0);
        assert!(candidates[0]
            .metrics
            .descriptors
            .iter()
            .any(|d| d.contains("single skinny obstacle")));
        assert!(candidates[1].metrics.descriptors.is_empty());
    }

    #[test]
    fn toxic_trials_are_fully_compliant() {
        let s = builtin("toxic").unwrap();
        let provider = OracleProvider::default();
        let report = run_trials(&s, 4, &provider, 11);
        assert_eq!(report.rows[0].compliance_rate, 1.0);
        assert_eq!(report.rows[0].success_rate, 1.0);
    }

    #[test]
    fn trials_are_deterministic_for_fixed_seed() {
        let s = builtin("crowded").unwrap();
        let provider = OracleProvider::default();
        let a = run_trials(&s, 3, &provider, 5);
        let b = run_trials(&s, 3, &provider, 5);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn config_hash_tracks_config_changes() {
        let s = builtin("toxic").unwrap();
        let provider = OracleProvider::default();
        let a = run_trials(&s, 2, &provider, 5);
        let b = run_trials(&s, 2, &provider, 6);
        assert_ne!(a.provenance.config_hash, b.provenance.config_hash);
        let mut s2 = s.clone();
        s2.exec.noise.sigma_m = 0.02;
        let c = run_trials(&s2, 2, &provider, 5);
        assert_ne!(a.provenance.config_hash, c.provenance.config_hash);
    }

    #[test]
    fn report_renders_all_formats() {
        let s = builtin("battery").unwrap();
        let provider = OracleProvider::default();
        let report = run_trials(&s, 2, &provider, 9);
        let text = render_report(&report, ReportFormat::Text);
        assert!(text.contains("battery"));
        assert!(text.contains("semantic"));
        let json = render_report(&report, ReportFormat::Json);
        let parsed: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
        let csv = render_report(&report, ReportFormat::Csv);
        assert!(csv.lines().count() == 2);

        let empty = Report {
            rows: vec![],
            provenance: Provenance {
                provider_kind: "oracle".into(),
                seed: 0,
                config_hash: "0".into(),
            },
        };
        let header_only = render_report(&empty, ReportFormat::Csv);
        assert_eq!(header_only.lines().count(), 1);
        let text_empty = render_report(&empty, ReportFormat::Text);
        assert!(text_empty.contains("scenario"));
    }

    #[test]
    fn ascii_render_keeps_paths_off_obstacles() {
        let s = builtin("course3").unwrap();
        let grid = build_grid(&s.world, 0.01).unwrap();
        let start = crate::grid::validate_start(&s.world, &grid).unwrap();
        let goal = world_to_cell(s.world.goals[0].position, &grid).unwrap();
        let path = astar(&grid, start, goal).unwrap();
        let ascii =
            String::from_utf8(render_world(&s.world, &[&path], 0.01, WorldFormat::Ascii)).unwrap();
        // One glyph per cell at this scale: a path glyph can never sit on
        // an obstacle glyph because the path is collision-free.
        assert!(ascii.contains('0'));
        assert!(ascii.contains('#'));
        assert!(ascii.contains('S'));
        assert!(ascii.contains('G'));
    }

    #[test]
    fn empty_world_renders_blank_frame() {
        let world = arena(vec![], vec![], Pose2::new(0.5, 0.5, 0.0));
        let ascii = String::from_utf8(render_world(&world, &[], 0.01, WorldFormat::Ascii)).unwrap();
        assert!(!ascii.contains('#'));
        assert!(ascii.contains('.'));
    }

    #[test]
    fn buffered_and_unbuffered_sequential_paths_differ() {
        let s = builtin("sequential").unwrap();
        let grid = build_grid(&s.world, 0.01).unwrap();
        let field = clearance_field(&grid);
        // Stage-2 leg: from the resource goal to the final goal.
        let start = world_to_cell(s.world.goals[0].position, &grid).unwrap();
        let goal = world_to_cell(s.world.goals[1].position, &grid).unwrap();
        let raw_path = astar(&grid, start, goal).unwrap();
        let buffered_grid = grid.inflate(20);
        let buffered_path = astar(&buffered_grid, start, goal).unwrap();
        assert_ne!(raw_path.cells, buffered_path.cells);
        assert!(buffered_path.length_m > raw_path.length_m);
        let raw_min =
            raw_path.cells.iter().map(|&c| field.clearance_m(c)).fold(f64::INFINITY, f64::min);
        assert!(raw_min < 0.05, "raw stage-2 leg should be tight, got {raw_min}");
        let buffered_min = buffered_path
            .cells
            .iter()
            .map(|&c| field.clearance_m(c))
            .fold(f64::INFINITY, f64::min);
        assert!(buffered_min >= (20.0 - 2f64.sqrt()) * 0.01);
    }

    #[test]
    fn concurrent_trials_share_one_provider() {
        let provider = std::sync::Arc::new(OracleProvider::default());
        let mut handles = Vec::new();
        for (i, name) in ["toxic", "battery", "crowded", "sequential"].iter().enumerate() {
            let provider = provider.clone();
            let name = name.to_string();
            handles.push(std::thread::spawn(move || {
                let s = builtin(&name).unwrap();
                let report = run_trials(&s, 3, provider.as_ref(), i as u64);
                (name, report.rows[0].success_rate)
            }));
        }
        for handle in handles {
            let (name, rate) = handle.join().unwrap();
            assert_eq!(rate, 1.0, "{name} failed under concurrent execution");
        }
    }

    #[test]
    fn trials_jsonl_emits_one_line_per_trial() {
        let s = builtin("course1").unwrap();
        let provider = OracleProvider::default();
        let report = run_trials(&s, 3, &provider, 2);
        let jsonl = trials_jsonl(&report);
        assert_eq!(jsonl.lines().count(), 3);
        for line in jsonl.lines() {
            let parsed: TrialResult = serde_json::from_str(line).unwrap();
            assert_eq!(parsed.schema_version, 1);
        }
    }
}
