//! Hybrid semantic navigation pipeline.
//!
//! Classical A* path candidates are generated on an inflatable occupancy
//! grid, then a structured-prompt decision layer (a live chat model, a
//! recorded transcript, or a deterministic rule oracle) selects a candidate
//! and a safety buffer. The executor re-inflates and re-plans when the
//! decision asks for a buffer, simulates waypoint following with collision
//! detection, and sequences multi-stage missions. A scenario harness runs
//! seeded trial batches and renders reports.

pub mod executor;
pub mod grid;
pub mod harness;
pub mod llm_client;
pub mod planner;
pub mod semantic;

pub use grid::{
    build_grid, cell_to_world, clearance_field, validate_start, world_to_cell, Cell,
    ClearanceField, Goal, GridError, Obstacle, OccupancyGrid, Point2, Pose2, Rect, WorldModel,
};
pub use planner::{
    astar, describe_obstacles, generate_candidates, path_metrics, NoPath, Path, PathCandidate,
    PathMetrics, PlannerConfig,
};
pub use semantic::{
    build_raw_planning_prompt, build_selection_prompt, oracle_decide, parse_decision,
    parse_waypoints, Decision, DecisionProvider, MissionStage, OracleConfig, OracleProvider,
    ParseError, PromptDoc, PromptSchema, ProviderError, ProviderResponse, StageKind, WaypointPlan,
};
pub use executor::{
    collision_check, run_mission, run_stage, simulate_follow, simulate_waypoints,
    CollisionVerdict, ExecConfig, ExecRecord, ExecutionTrace, MissionSpec, NoiseConfig,
    StageError, StageResult, TrialResult,
};
pub use llm_client::{
    ClientConfig, LiveProvider, RecordingProvider, ReplayProvider, TranscriptError,
    TranscriptRecord,
};
pub use harness::{
    builtin, load_scenario, render_report, render_world, run_trials, Report, ReportFormat,
    Scenario, WorldFormat,
};
