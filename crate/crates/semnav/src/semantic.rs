//! Decision layer: structured selection prompts, strict-JSON decision and
//! waypoint parsing, and pluggable decision providers. The deterministic
//! rule oracle lives here; the live HTTP provider is in [`crate::llm_client`].

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::grid::{Cell, OccupancyGrid, Point2, WorldModel};
use crate::planner::{self, PathCandidate};

/// Canonical stage-1 instruction: collect the resource marked by the single
/// skinny obstacle, then choose a buffer.
pub const RESOURCE_TEMPLATE: &str = "You are an LLM controlling a BittleBot in a 2D grid. \
The mission is to collect a resource. There are two goals in your environment. The goal a \
little further away with a single skinny obstacle is the resource goal and is your target. \
For this mission, you should only go to the goal with a single skinny obstacle near it and \
avoid the other goal. Based on the candidate path metrics (including path length, obstacle \
count, clearances, and qualitative description of obstacles), select the candidate that \
travels to the resource marker and then decide on the appropriate occupancy grid buffer: if \
the path is direct with minimal obstacles, set the buffer to 0; if it requires turns or \
obstacle avoidance, set it to 20. Return your decision strictly in JSON format: \
{\"mode\":\"candidate_selection\", \"selected_candidate\":<index>, \"buffer\":<value>}. \
Do not include any extra fields.";

/// Canonical stage-2 instruction: reach the final goal while maintaining
/// safe clearance, choosing a buffer.
pub const FINAL_TEMPLATE: &str = "You are an LLM controlling a BittleBot in a 2D grid. The \
mission is now to navigate to the final goal while maintaining safe clearance from \
obstacles. Among the candidate paths provided, select the one that ensures the safest \
navigation. Based on the candidate path metrics (including path length, obstacle count, and \
clearances), determine whether the path is sufficiently direct (set buffer 0) or if it \
requires turns or obstacle avoidance (set buffer 20). Return your decision strictly in JSON \
format: {\"mode\":\"candidate_selection\", \"selected_candidate\":<index>, \
\"buffer\":<value>}. Do not include any extra fields.";

/// Raw-planning instruction: the provider itself proposes waypoints from
/// basic geometric information.
pub const RAW_PLANNING_TEMPLATE: &str = "You are an LLM controlling a BittleBot in a 2D \
grid. Plan a route from the start position to the goal position that avoids all obstacles. \
The payload lists the arena size in meters, the grid resolution, each obstacle bounding box \
as [x0, y0, x1, y1] in meters, and the start and goal positions in meters. Respond strictly \
with a JSON array of [x, y] waypoints in meters leading from the start to the goal. Do not \
include any other text.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    ResourceCollection,
    FinalNavigation,
    RawPlanning,
}

/// One leg of a mission: what the provider is asked to do, the contextual
/// cues injected into the prompt, and which goals are on offer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionStage {
    pub kind: StageKind,
    pub instruction_text: String,
    #[serde(default)]
    pub semantic_cues: Vec<String>,
    /// When set, only goals whose label is listed are offered this stage.
    #[serde(default)]
    pub goal_labels: Option<Vec<String>>,
}

impl MissionStage {
    pub fn resource_collection(cues: &[&str]) -> Self {
        Self {
            kind: StageKind::ResourceCollection,
            instruction_text: RESOURCE_TEMPLATE.to_string(),
            semantic_cues: cues.iter().map(|s| s.to_string()).collect(),
            goal_labels: None,
        }
    }

    pub fn final_navigation(cues: &[&str]) -> Self {
        Self {
            kind: StageKind::FinalNavigation,
            instruction_text: FINAL_TEMPLATE.to_string(),
            semantic_cues: cues.iter().map(|s| s.to_string()).collect(),
            goal_labels: None,
        }
    }

    pub fn raw_planning() -> Self {
        Self {
            kind: StageKind::RawPlanning,
            instruction_text: RAW_PLANNING_TEMPLATE.to_string(),
            semantic_cues: Vec::new(),
            goal_labels: None,
        }
    }

    pub fn with_goals(mut self, labels: &[&str]) -> Self {
        self.goal_labels = Some(labels.iter().map(|s| s.to_string()).collect());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSchema {
    CandidateSelection,
    WaypointList,
}

/// A fully rendered provider query: system text plus a JSON payload.
/// Construction is deterministic, so identical inputs give byte-identical
/// documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDoc {
    pub system_text: String,
    pub payload: String,
    pub expected_schema: PromptSchema,
}

impl PromptDoc {
    /// The exact text covered by transcript hashes: system text and payload.
    pub fn canonical_text(&self) -> String {
        format!("{}\n\n{}", self.system_text, self.payload)
    }
}

/// Wire form of one candidate. Field names and order match the decision
/// protocol exactly: index, path_length, obstacle_count, min_clearance,
/// avg_clearance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateWire {
    pub index: usize,
    pub path_length: f64,
    pub obstacle_count: usize,
    pub min_clearance: f64,
    pub avg_clearance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CandidatePayload {
    candidate_paths: Vec<CandidateWire>,
}

/// Parsed semantic verdict: which candidate to execute and at what buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub selected_candidate: usize,
    pub buffer: usize,
}

impl Decision {
    /// Renders the canonical response text, byte-for-byte the shape the
    /// protocol documents.
    pub fn to_response_text(&self) -> String {
        format!(
            "{{\"mode\":\"candidate_selection\", \"selected_candidate\":{}, \"buffer\":{}}}",
            self.selected_candidate, self.buffer
        )
    }
}

/// Waypoint list proposed by a raw-planning provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub waypoints: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("no parseable JSON value in provider output")]
    MalformedJson,
    #[error("unknown decision mode {0:?}")]
    UnknownMode(String),
    #[error("selected_candidate {got} out of range (candidate count {count})")]
    IndexOutOfRange { got: i64, count: usize },
    #[error("buffer {0} not in the allowed set")]
    BufferNotAllowed(i64),
    #[error("provider output contains {0} JSON objects, expected exactly one")]
    MultipleObjects(usize),
    #[error("waypoint ({0}, {1}) outside the arena")]
    OutOfArena(f64, f64),
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("request timed out")]
    Timeout,
    #[error("http error status {0}")]
    Http(u16),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited by endpoint")]
    RateLimited,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("transcript hash mismatch: prompt not seen at record time")]
    HashMismatch,
    #[error("transcript exhausted: no recorded response left")]
    ExhaustedTranscript,
    #[error("oracle could not decide: {0}")]
    Oracle(String),
}

/// Raw text returned by a provider plus the observed latency.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderResponse {
    pub text: String,
    pub latency_s: f64,
}

/// Any source of decisions: a live chat endpoint, a recorded transcript,
/// or the deterministic rule oracle. Implementations must be safe to share
/// across concurrently running trials.
pub trait DecisionProvider: Send + Sync {
    /// Short provenance tag for reports ("oracle", "live", "replay", ...).
    fn kind(&self) -> &str;
    fn complete(&self, prompt: &PromptDoc) -> Result<ProviderResponse, ProviderError>;
}

impl<T: DecisionProvider + ?Sized> DecisionProvider for Box<T> {
    fn kind(&self) -> &str {
        (**self).kind()
    }
    fn complete(&self, prompt: &PromptDoc) -> Result<ProviderResponse, ProviderError> {
        (**self).complete(prompt)
    }
}

/// Builds the selection prompt for a stage: instruction template, context
/// cues verbatim, per-candidate qualitative descriptions (with turn counts),
/// and the candidate metric array as payload.
pub fn build_selection_prompt(stage: &MissionStage, candidates: &[PathCandidate]) -> PromptDoc {
    assert!(
        stage.kind != StageKind::RawPlanning,
        "raw planning stages carry no candidate set"
    );
    assert!(!candidates.is_empty(), "candidate set must be non-empty");
    let mut text = stage.instruction_text.clone();
    if !stage.semantic_cues.is_empty() {
        text.push_str("\n\nContext cues:");
        for cue in &stage.semantic_cues {
            text.push_str("\n- ");
            text.push_str(cue);
        }
    }
    text.push_str("\n\nQualitative obstacle descriptions:");
    for c in candidates {
        let desc = if c.metrics.descriptors.is_empty() {
            "(none)".to_string()
        } else {
            c.metrics.descriptors.join("; ")
        };
        text.push_str(&format!(
            "\ncandidate {} [turns: {}]: {}",
            c.index, c.metrics.turn_count, desc
        ));
    }
    let payload = CandidatePayload {
        candidate_paths: candidates
            .iter()
            .map(|c| CandidateWire {
                index: c.index,
                path_length: c.metrics.path_length,
                obstacle_count: c.metrics.obstacle_count,
                min_clearance: c.metrics.min_clearance,
                avg_clearance: c.metrics.avg_clearance,
            })
            .collect(),
    };
    PromptDoc {
        system_text: text,
        payload: serde_json::to_string(&payload).expect("candidate payload serializes"),
        expected_schema: PromptSchema::CandidateSelection,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPlanningPayload {
    arena: [f64; 2],
    resolution: f64,
    start: [f64; 2],
    goal: [f64; 2],
    obstacles: Vec<[f64; 4]>,
}

/// Builds the raw-planning prompt. Obstacle boxes are the bounding boxes of
/// the 4-connected occupied components of the grid, in metres.
pub fn build_raw_planning_prompt(grid: &OccupancyGrid, start: Cell, goal: Cell) -> PromptDoc {
    assert!(grid.in_bounds(start) && grid.in_bounds(goal), "cells must be in bounds");
    let res = grid.resolution_m;
    let boxes = occupied_component_boxes(grid);
    let payload = RawPlanningPayload {
        arena: [grid.cols as f64 * res, grid.rows as f64 * res],
        resolution: res,
        start: [(start.col as f64 + 0.5) * res, (start.row as f64 + 0.5) * res],
        goal: [(goal.col as f64 + 0.5) * res, (goal.row as f64 + 0.5) * res],
        obstacles: boxes
            .iter()
            .map(|&(c0, r0, c1, r1)| {
                [
                    c0 as f64 * res,
                    r0 as f64 * res,
                    (c1 + 1) as f64 * res,
                    (r1 + 1) as f64 * res,
                ]
            })
            .collect(),
    };
    PromptDoc {
        system_text: RAW_PLANNING_TEMPLATE.to_string(),
        payload: serde_json::to_string(&payload).expect("raw payload serializes"),
        expected_schema: PromptSchema::WaypointList,
    }
}

/// Bounding boxes (col0, row0, col1, row1 inclusive) of 4-connected
/// occupied components, in discovery (row-major) order.
fn occupied_component_boxes(grid: &OccupancyGrid) -> Vec<(usize, usize, usize, usize)> {
    let mut seen = vec![false; grid.cols * grid.rows];
    let mut boxes = Vec::new();
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let i = row * grid.cols + col;
            if seen[i] || !grid.occupied(Cell::new(col, row)) {
                continue;
            }
            let (mut c0, mut r0, mut c1, mut r1) = (col, row, col, row);
            let mut stack = vec![(col, row)];
            seen[i] = true;
            while let Some((c, r)) = stack.pop() {
                c0 = c0.min(c);
                c1 = c1.max(c);
                r0 = r0.min(r);
                r1 = r1.max(r);
                for (dc, dr) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                    let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                    if nc < 0 || nr < 0 || nc as usize >= grid.cols || nr as usize >= grid.rows {
                        continue;
                    }
                    let ni = nr as usize * grid.cols + nc as usize;
                    if !seen[ni] && grid.occupied(Cell::new(nc as usize, nr as usize)) {
                        seen[ni] = true;
                        stack.push((nc as usize, nr as usize));
                    }
                }
            }
            boxes.push((c0, r0, c1, r1));
        }
    }
    boxes
}

/// Finds top-level balanced JSON spans opening with `open` and closing with
/// `close`, skipping string literals and escapes. Spans nested inside any
/// other bracket structure are not reported.
fn balanced_spans(text: &str, open: u8, close: u8) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    let mut any_depth = 0usize;
    let mut target_open_at_depth = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_str {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_str = false;
            }
            continue;
        }
        match b {
            b'"' => {
                if any_depth > 0 {
                    in_str = true;
                }
            }
            b'{' | b'[' => {
                if any_depth == 0 && b == open {
                    start = i;
                    target_open_at_depth = true;
                } else if any_depth == 0 {
                    target_open_at_depth = false;
                }
                any_depth += 1;
            }
            b'}' | b']' if any_depth > 0 => {
                any_depth -= 1;
                if any_depth == 0 && b == close && target_open_at_depth {
                    spans.push((start, i + 1));
                    target_open_at_depth = false;
                }
            }
            _ => {}
        }
    }
    spans
}

/// Parses and validates a candidate-selection decision from raw provider
/// output. Tolerates surrounding prose and a JSON-string-encoded object,
/// but requires exactly one object.
pub fn parse_decision(
    text: &str,
    candidate_count: usize,
    allowed_buffers: &[usize],
) -> Result<Decision, ParseError> {
    let trimmed = text.trim();
    // A response that is a JSON string wrapping the object (as printed by
    // some client logs) is unwrapped one level.
    if let Ok(Value::String(inner)) = serde_json::from_str::<Value>(trimmed) {
        return parse_decision(&inner, candidate_count, allowed_buffers);
    }
    let spans = balanced_spans(trimmed, b'{', b'}');
    let objects: Vec<Value> = spans
        .iter()
        .filter_map(|&(a, b)| serde_json::from_str::<Value>(&trimmed[a..b]).ok())
        .filter(|v| v.is_object())
        .collect();
    match objects.len() {
        0 => Err(ParseError::MalformedJson),
        1 => validate_decision(&objects[0], candidate_count, allowed_buffers),
        n => Err(ParseError::MultipleObjects(n)),
    }
}

fn validate_decision(
    v: &Value,
    candidate_count: usize,
    allowed_buffers: &[usize],
) -> Result<Decision, ParseError> {
    let obj = v.as_object().ok_or(ParseError::MalformedJson)?;
    let mode = obj
        .get("mode")
        .and_then(Value::as_str)
        .ok_or(ParseError::MalformedJson)?;
    if mode != "candidate_selection" {
        return Err(ParseError::UnknownMode(mode.to_string()));
    }
    let idx = obj
        .get("selected_candidate")
        .and_then(Value::as_i64)
        .ok_or(ParseError::MalformedJson)?;
    if idx < 0 || idx as usize >= candidate_count {
        return Err(ParseError::IndexOutOfRange { got: idx, count: candidate_count });
    }
    let buffer = obj
        .get("buffer")
        .and_then(Value::as_i64)
        .ok_or(ParseError::MalformedJson)?;
    if buffer < 0 || !allowed_buffers.contains(&(buffer as usize)) {
        return Err(ParseError::BufferNotAllowed(buffer));
    }
    Ok(Decision { selected_candidate: idx as usize, buffer: buffer as usize })
}

/// Extracts a waypoint array from raw provider output and validates arena
/// containment.
pub fn parse_waypoints(text: &str, world: &WorldModel) -> Result<WaypointPlan, ParseError> {
    let trimmed = text.trim();
    if let Ok(Value::String(inner)) = serde_json::from_str::<Value>(trimmed) {
        return parse_waypoints(&inner, world);
    }
    let spans = balanced_spans(trimmed, b'[', b']');
    let array = spans
        .iter()
        .filter_map(|&(a, b)| serde_json::from_str::<Value>(&trimmed[a..b]).ok())
        .find(|v| v.is_array())
        .ok_or(ParseError::MalformedJson)?;
    let mut waypoints = Vec::new();
    for item in array.as_array().unwrap() {
        let pair = item.as_array().ok_or(ParseError::MalformedJson)?;
        if pair.len() != 2 {
            return Err(ParseError::MalformedJson);
        }
        let x = pair[0].as_f64().ok_or(ParseError::MalformedJson)?;
        let y = pair[1].as_f64().ok_or(ParseError::MalformedJson)?;
        if !x.is_finite() || !y.is_finite() {
            return Err(ParseError::MalformedJson);
        }
        if x < 0.0 || y < 0.0 || x > world.arena_width_m || y > world.arena_height_m {
            return Err(ParseError::OutOfArena(x, y));
        }
        waypoints.push(Point2::new(x, y));
    }
    Ok(WaypointPlan { waypoints })
}

/// Deterministic decision thresholds. Buffer goes high when the selected
/// path turns at least `turn_threshold` times, passes any obstacle, or
/// dips under `clearance_threshold_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub turn_threshold: usize,
    pub clearance_threshold_m: f64,
    pub buffer_low: usize,
    pub buffer_high: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            turn_threshold: 2,
            clearance_threshold_m: 0.05,
            buffer_low: 0,
            buffer_high: 20,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("no rule matched: cues absent and goals indistinguishable")]
    NoRuleMatched,
}

struct OracleItem {
    descriptors: Vec<String>,
    turn_count: usize,
    obstacle_count: usize,
    min_clearance: f64,
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.to_lowercase())
}

fn decide_core(
    kind: StageKind,
    cues: &[String],
    items: &[OracleItem],
    rules: &OracleConfig,
) -> Result<Decision, OracleError> {
    let has_cue = |word: &str| cues.iter().any(|c| contains_ci(c, word));
    let descriptor_match =
        |item: &OracleItem, word: &str| item.descriptors.iter().any(|d| contains_ci(d, word));

    let pick = if kind == StageKind::ResourceCollection {
        items.iter().position(|i| descriptor_match(i, "single skinny obstacle"))
    } else if has_cue("toxic") {
        items.iter().position(|i| !descriptor_match(i, "toxic"))
    } else if has_cue("battery") {
        items.iter().position(|i| descriptor_match(i, "battery"))
    } else if has_cue("crowded") {
        items.iter().position(|i| !descriptor_match(i, "multiple clustered obstacles"))
    } else {
        None
    };
    let selected = match pick {
        Some(i) => i,
        None if items.len() == 1 => 0,
        None => return Err(OracleError::NoRuleMatched),
    };
    let item = &items[selected];
    let buffer = if item.turn_count >= rules.turn_threshold
        || item.obstacle_count >= 1
        || item.min_clearance < rules.clearance_threshold_m
    {
        rules.buffer_high
    } else {
        rules.buffer_low
    };
    Ok(Decision { selected_candidate: selected, buffer })
}

/// Deterministic rule verdict over a structured candidate set: resource
/// stages pick the "single skinny obstacle" goal; toxic, battery and
/// crowded cues pick by goal descriptors; the buffer follows the threshold
/// rule in `rules`.
pub fn oracle_decide(
    stage: &MissionStage,
    candidates: &[PathCandidate],
    rules: &OracleConfig,
) -> Result<Decision, OracleError> {
    let items: Vec<OracleItem> = candidates
        .iter()
        .map(|c| OracleItem {
            descriptors: c.metrics.descriptors.clone(),
            turn_count: c.metrics.turn_count,
            obstacle_count: c.metrics.obstacle_count,
            min_clearance: c.metrics.min_clearance,
        })
        .collect();
    decide_core(stage.kind, &stage.semantic_cues, &items, rules)
}

/// The deterministic provider: replays the oracle rules from the prompt
/// document alone, so it plugs into the same pipeline as a live model.
/// For raw-planning prompts it plans on the payload geometry with a safety
/// margin and answers with waypoints.
pub struct OracleProvider {
    pub rules: OracleConfig,
    /// Preferred inflation (cells) when the oracle plans raw routes.
    pub raw_safety_cells: usize,
    /// Tightest inflation the oracle will fall back to when the preferred
    /// margin leaves no route.
    pub raw_safety_floor_cells: usize,
}

impl Default for OracleProvider {
    fn default() -> Self {
        Self { rules: OracleConfig::default(), raw_safety_cells: 9, raw_safety_floor_cells: 6 }
    }
}

impl OracleProvider {
    pub fn new(rules: OracleConfig) -> Self {
        Self { rules, ..Self::default() }
    }

    fn answer_selection(&self, prompt: &PromptDoc) -> Result<String, ProviderError> {
        let payload: CandidatePayload = serde_json::from_str(&prompt.payload)
            .map_err(|e| ProviderError::Oracle(format!("bad payload: {e}")))?;
        let kind = if prompt.system_text.contains("collect a resource") {
            StageKind::ResourceCollection
        } else {
            StageKind::FinalNavigation
        };
        let cues = parse_section_lines(&prompt.system_text, "Context cues:")
            .iter()
            .filter_map(|l| l.strip_prefix("- ").map(str::to_string))
            .collect::<Vec<_>>();
        let descs = parse_candidate_descriptions(&prompt.system_text);
        let items: Vec<OracleItem> = payload
            .candidate_paths
            .iter()
            .map(|w| {
                let (turns, descriptors) = descs.get(&w.index).cloned().unwrap_or((0, vec![]));
                OracleItem {
                    descriptors,
                    turn_count: turns,
                    obstacle_count: w.obstacle_count,
                    min_clearance: w.min_clearance,
                }
            })
            .collect();
        let decision = decide_core(kind, &cues, &items, &self.rules)
            .map_err(|e| ProviderError::Oracle(e.to_string()))?;
        // Map the positional pick back to the wire index.
        let decision = Decision {
            selected_candidate: payload.candidate_paths[decision.selected_candidate].index,
            buffer: decision.buffer,
        };
        Ok(decision.to_response_text())
    }

    fn answer_raw_planning(&self, prompt: &PromptDoc) -> Result<String, ProviderError> {
        let payload: RawPlanningPayload = serde_json::from_str(&prompt.payload)
            .map_err(|e| ProviderError::Oracle(format!("bad payload: {e}")))?;
        let world = WorldModel {
            arena_width_m: payload.arena[0],
            arena_height_m: payload.arena[1],
            obstacles: payload
                .obstacles
                .iter()
                .map(|&[x0, y0, x1, y1]| {
                    crate::grid::Obstacle::new(crate::grid::Rect::from_corners(x0, y0, x1, y1))
                })
                .collect(),
            goals: vec![],
            robot_start: crate::grid::Pose2::new(payload.start[0], payload.start[1], 0.0),
            robot_radius_m: 0.0,
        };
        let raw = crate::grid::build_grid(&world, payload.resolution)
            .map_err(|e| ProviderError::Oracle(e.to_string()))?;
        let start =
            crate::grid::world_to_cell(Point2::new(payload.start[0], payload.start[1]), &raw)
                .map_err(|e| ProviderError::Oracle(e.to_string()))?;
        let goal = crate::grid::world_to_cell(Point2::new(payload.goal[0], payload.goal[1]), &raw)
            .map_err(|e| ProviderError::Oracle(e.to_string()))?;
        // Prefer a generous margin and fall back to tighter ones when
        // blocked, but never below the floor margin: routes planned with
        // less clearance than the executor's footprint check would only be
        // rejected and re-queried.
        let mut waypoints = None;
        let floor = self.raw_safety_floor_cells.min(self.raw_safety_cells);
        let mut margins = vec![self.raw_safety_cells];
        let mid = (self.raw_safety_cells + floor) / 2;
        if mid < self.raw_safety_cells && mid > floor {
            margins.push(mid);
        }
        margins.push(floor);
        for margin in margins {
            let grid = raw.inflate(margin);
            if let Ok(path) = planner::astar(&grid, start, goal) {
                waypoints = Some(path.waypoints);
                break;
            }
        }
        let waypoints = waypoints.unwrap_or_default();
        let array: Vec<[f64; 2]> = waypoints.iter().map(|p| [p.x, p.y]).collect();
        Ok(serde_json::to_string(&array).expect("waypoint array serializes"))
    }
}

impl DecisionProvider for OracleProvider {
    fn kind(&self) -> &str {
        "oracle"
    }

    fn complete(&self, prompt: &PromptDoc) -> Result<ProviderResponse, ProviderError> {
        let text = match prompt.expected_schema {
            PromptSchema::CandidateSelection => self.answer_selection(prompt)?,
            PromptSchema::WaypointList => self.answer_raw_planning(prompt)?,
        };
        Ok(ProviderResponse { text, latency_s: 0.0 })
    }
}

/// Returns the lines of the section starting after `header` until the next
/// blank line.
fn parse_section_lines(text: &str, header: &str) -> Vec<String> {
    let Some(pos) = text.find(header) else { return vec![] };
    text[pos + header.len()..]
        .lines()
        .skip(1)
        .take_while(|l| !l.trim().is_empty())
        .map(|l| l.to_string())
        .collect()
}

/// Parses "candidate N [turns: T]: d1; d2" lines back into structured form.
fn parse_candidate_descriptions(
    text: &str,
) -> std::collections::HashMap<usize, (usize, Vec<String>)> {
    let mut out = std::collections::HashMap::new();
    for line in parse_section_lines(text, "Qualitative obstacle descriptions:") {
        let Some(rest) = line.strip_prefix("candidate ") else { continue };
        let Some((idx_part, rest)) = rest.split_once(" [turns: ") else { continue };
        let Some((turns_part, desc_part)) = rest.split_once("]: ") else { continue };
        let (Ok(idx), Ok(turns)) = (idx_part.parse::<usize>(), turns_part.parse::<usize>()) else {
            continue;
        };
        let descriptors = if desc_part.trim() == "(none)" {
            vec![]
        } else {
            desc_part.split("; ").map(str::to_string).collect()
        };
        out.insert(idx, (turns, descriptors));
    }
    out
}
