//! World model and occupancy grid: construction, Chebyshev inflation,
//! exact Euclidean clearance fields, and world/cell coordinate transforms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in world coordinates, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Planar robot pose. Heading is radians in [-pi, pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Grid cell index: column (x) and row (y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Axis-aligned rectangle given by centre and extents, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub cx: f64,
    pub cy: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl Rect {
    pub fn new(cx: f64, cy: f64, width_m: f64, height_m: f64) -> Self {
        Self { cx, cy, width_m, height_m }
    }

    /// Rectangle spanning [x0, x1] x [y0, y1].
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)
    }

    pub fn x0(&self) -> f64 {
        self.cx - self.width_m / 2.0
    }
    pub fn x1(&self) -> f64 {
        self.cx + self.width_m / 2.0
    }
    pub fn y0(&self) -> f64 {
        self.cy - self.height_m / 2.0
    }
    pub fn y1(&self) -> f64 {
        self.cy + self.height_m / 2.0
    }

    /// Boundary points count as contained.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x0() && p.x <= self.x1() && p.y >= self.y0() && p.y <= self.y1()
    }

    /// Euclidean distance from a point to the rectangle (zero inside).
    pub fn distance_to(&self, p: Point2) -> f64 {
        let dx = (self.x0() - p.x).max(0.0).max(p.x - self.x1());
        let dy = (self.y0() - p.y).max(0.0).max(p.y - self.y1());
        dx.hypot(dy)
    }

    /// Chebyshev (max-axis) distance from a point to the rectangle.
    pub fn chebyshev_to(&self, p: Point2) -> f64 {
        let dx = (self.x0() - p.x).max(0.0).max(p.x - self.x1());
        let dy = (self.y0() - p.y).max(0.0).max(p.y - self.y1());
        dx.max(dy)
    }

    /// Aspect ratio, long side over short side.
    pub fn aspect(&self) -> f64 {
        let (a, b) = (self.width_m.max(self.height_m), self.width_m.min(self.height_m));
        if b <= 0.0 {
            f64::INFINITY
        } else {
            a / b
        }
    }
}

/// Obstacle: a rectangle plus an optional semantic tag such as "TOXIC" or
/// "battery". The tag is the channel through which the decision layer can
/// reinterpret geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Rect,
    #[serde(default)]
    pub label: Option<String>,
}

impl Obstacle {
    pub fn new(shape: Rect) -> Self {
        Self { shape, label: None }
    }

    pub fn labeled(shape: Rect, label: &str) -> Self {
        Self { shape, label: Some(label.to_string()) }
    }
}

/// Navigation goal with an optional semantic tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub position: Point2,
    #[serde(default)]
    pub label: Option<String>,
}

impl Goal {
    pub fn new(position: Point2, label: &str) -> Self {
        Self { position, label: Some(label.to_string()) }
    }
}

/// Ground-truth arena: dimensions, labelled obstacles and goals, robot
/// start pose and footprint radius. Everything downstream (grids, plans,
/// simulation) derives from this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub arena_width_m: f64,
    pub arena_height_m: f64,
    pub obstacles: Vec<Obstacle>,
    pub goals: Vec<Goal>,
    pub robot_start: Pose2,
    pub robot_radius_m: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("arena dimensions must be strictly positive, got {0} x {1}")]
    BadArena(f64, f64),
    #[error("resolution must be positive and yield at least one cell, got {0}")]
    BadResolution(f64),
    #[error("obstacle {0} extends outside the arena")]
    ObstacleOutsideArena(usize),
    #[error("goal {0} lies outside the arena")]
    GoalOutsideArena(usize),
    #[error("robot start cell is occupied")]
    StartOccupied,
    #[error("point ({0}, {1}) is outside the arena")]
    PointOutOfBounds(f64, f64),
    #[error("cell ({0}, {1}) is outside the grid")]
    CellOutOfBounds(usize, usize),
    #[error("non-finite coordinate in world model")]
    NonFinite,
}

impl WorldModel {
    /// Checks the geometric invariants that do not need a grid:
    /// positive arena, everything inside it, finite coordinates.
    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.arena_width_m > 0.0 && self.arena_height_m > 0.0) {
            return Err(GridError::BadArena(self.arena_width_m, self.arena_height_m));
        }
        let finite = |v: f64| v.is_finite();
        if !finite(self.robot_start.x)
            || !finite(self.robot_start.y)
            || !finite(self.robot_start.heading)
        {
            return Err(GridError::NonFinite);
        }
        // Sub-nanometre slack absorbs centre/extent rounding for shapes
        // built flush against the arena boundary.
        const EDGE_TOL: f64 = 1e-9;
        for (i, o) in self.obstacles.iter().enumerate() {
            let r = &o.shape;
            if !(r.width_m > 0.0 && r.height_m > 0.0) || !finite(r.cx) || !finite(r.cy) {
                return Err(GridError::ObstacleOutsideArena(i));
            }
            if r.x0() < -EDGE_TOL
                || r.y0() < -EDGE_TOL
                || r.x1() > self.arena_width_m + EDGE_TOL
                || r.y1() > self.arena_height_m + EDGE_TOL
            {
                return Err(GridError::ObstacleOutsideArena(i));
            }
        }
        for (i, g) in self.goals.iter().enumerate() {
            let p = g.position;
            if !finite(p.x) || !finite(p.y) {
                return Err(GridError::NonFinite);
            }
            if p.x < 0.0 || p.y < 0.0 || p.x > self.arena_width_m || p.y > self.arena_height_m {
                return Err(GridError::GoalOutsideArena(i));
            }
        }
        Ok(())
    }
}

/// 2D boolean occupancy lattice with a recorded inflation level.
/// Immutable after construction; `inflate` returns a new grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub resolution_m: f64,
    pub cols: usize,
    pub rows: usize,
    pub buffer_cells: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    #[inline]
    pub fn idx(&self, cell: Cell) -> usize {
        cell.row * self.cols + cell.col
    }

    #[inline]
    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.col < self.cols && cell.row < self.rows
    }

    #[inline]
    pub fn occupied(&self, cell: Cell) -> bool {
        self.cells[self.idx(cell)]
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// All occupied cells, row-major.
    pub fn occupied_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &occupied)| occupied)
            .map(move |(i, _)| Cell::new(i % self.cols, i / self.cols))
    }

    /// Chebyshev dilation of the occupied set by `buffer_cells`, saturating
    /// at the grid boundary. Implemented as two separable 1D passes, so it
    /// is exact and O(cells). The input must be an uninflated grid.
    pub fn inflate(&self, buffer_cells: usize) -> OccupancyGrid {
        assert_eq!(self.buffer_cells, 0, "inflate expects an uninflated grid");
        if buffer_cells == 0 {
            return self.clone();
        }
        let b = buffer_cells;
        let (cols, rows) = (self.cols, self.rows);
        // Pass 1: horizontal. dist[i] = cells since last occupied in the row.
        let mut mid = vec![false; cols * rows];
        for r in 0..rows {
            let base = r * cols;
            let mut since = usize::MAX;
            for c in 0..cols {
                since = if self.cells[base + c] { 0 } else { since.saturating_add(1) };
                if since <= b {
                    mid[base + c] = true;
                }
            }
            since = usize::MAX;
            for c in (0..cols).rev() {
                since = if self.cells[base + c] { 0 } else { since.saturating_add(1) };
                if since <= b {
                    mid[base + c] = true;
                }
            }
        }
        // Pass 2: vertical over the horizontally dilated grid.
        let mut out = vec![false; cols * rows];
        for c in 0..cols {
            let mut since = usize::MAX;
            for r in 0..rows {
                since = if mid[r * cols + c] { 0 } else { since.saturating_add(1) };
                if since <= b {
                    out[r * cols + c] = true;
                }
            }
            since = usize::MAX;
            for r in (0..rows).rev() {
                since = if mid[r * cols + c] { 0 } else { since.saturating_add(1) };
                if since <= b {
                    out[r * cols + c] = true;
                }
            }
        }
        OccupancyGrid {
            resolution_m: self.resolution_m,
            cols,
            rows,
            buffer_cells,
            cells: out,
        }
    }
}

/// Per-cell squared Euclidean distance (in cell units) from the cell centre
/// to the nearest occupied cell centre of the uninflated grid. On a grid
/// with no obstacles every entry is the sentinel `UNBOUNDED` and
/// `clearance_m` reports infinity.
#[derive(Debug, Clone)]
pub struct ClearanceField {
    pub resolution_m: f64,
    pub cols: usize,
    pub rows: usize,
    dist_sq: Vec<u32>,
}

impl ClearanceField {
    pub const UNBOUNDED: u32 = u32::MAX;

    #[inline]
    pub fn dist_sq_cells(&self, cell: Cell) -> u32 {
        self.dist_sq[cell.row * self.cols + cell.col]
    }

    /// Clearance in metres; `f64::INFINITY` on an obstacle-free grid.
    #[inline]
    pub fn clearance_m(&self, cell: Cell) -> f64 {
        let d = self.dist_sq_cells(cell);
        if d == Self::UNBOUNDED {
            f64::INFINITY
        } else {
            (d as f64).sqrt() * self.resolution_m
        }
    }
}

/// Builds the occupancy grid for a world at the given resolution. A cell is
/// occupied when its centre lies inside any obstacle rectangle; points on
/// the rectangle boundary count as inside.
pub fn build_grid(world: &WorldModel, resolution_m: f64) -> Result<OccupancyGrid, GridError> {
    world.validate()?;
    if resolution_m <= 0.0 || !resolution_m.is_finite() {
        return Err(GridError::BadResolution(resolution_m));
    }
    let cols = (world.arena_width_m / resolution_m).ceil() as usize;
    let rows = (world.arena_height_m / resolution_m).ceil() as usize;
    if cols == 0 || rows == 0 {
        return Err(GridError::BadResolution(resolution_m));
    }
    let mut cells = vec![false; cols * rows];
    for o in &world.obstacles {
        let r = &o.shape;
        // Column c has centre (c + 0.5) * res; inclusive on both edges.
        let c0 = ((r.x0() / resolution_m - 0.5).ceil().max(0.0)) as usize;
        let c1 = (r.x1() / resolution_m - 0.5).floor();
        let r0 = ((r.y0() / resolution_m - 0.5).ceil().max(0.0)) as usize;
        let r1 = (r.y1() / resolution_m - 0.5).floor();
        if c1 < 0.0 || r1 < 0.0 {
            continue;
        }
        let c1 = (c1 as usize).min(cols - 1);
        let r1 = (r1 as usize).min(rows - 1);
        for row in r0..=r1 {
            for col in c0..=c1 {
                cells[row * cols + col] = true;
            }
        }
    }
    Ok(OccupancyGrid {
        resolution_m,
        cols,
        rows,
        buffer_cells: 0,
        cells,
    })
}

/// Checks the remaining world invariant that needs a grid: the robot's
/// start cell must be free in the uninflated grid. Mission execution and
/// scenario loading call this; plain rasterization does not.
pub fn validate_start(world: &WorldModel, grid: &OccupancyGrid) -> Result<Cell, GridError> {
    let start = world_to_cell(world.robot_start.position(), grid)?;
    if grid.occupied(start) {
        return Err(GridError::StartOccupied);
    }
    Ok(start)
}

/// Convenience alias for [`OccupancyGrid::inflate`].
pub fn inflate(grid: &OccupancyGrid, buffer_cells: usize) -> OccupancyGrid {
    grid.inflate(buffer_cells)
}

/// Exact Euclidean distance transform (Meijster's algorithm) over the
/// uninflated grid. Distances are squared and in cell units, so they are
/// integers and bit-reproducible.
pub fn clearance_field(grid: &OccupancyGrid) -> ClearanceField {
    assert_eq!(grid.buffer_cells, 0, "clearance is defined on the uninflated grid");
    let (cols, rows) = (grid.cols, grid.rows);
    let inf: i64 = (cols + rows) as i64 + 1;

    // Phase 1: per-column vertical distance to the nearest occupied cell.
    let mut g = vec![0i64; cols * rows];
    for c in 0..cols {
        g[c] = if grid.cells[c] { 0 } else { inf };
        for r in 1..rows {
            let i = r * cols + c;
            g[i] = if grid.cells[i] { 0 } else { g[i - cols] + 1 };
        }
        for r in (0..rows - 1).rev() {
            let i = r * cols + c;
            if g[i + cols] < g[i] {
                g[i] = g[i + cols] + 1;
            }
        }
    }

    // Phase 2: per-row lower envelope of the parabolas y = g(i)^2 + (x-i)^2.
    let mut dist_sq = vec![ClearanceField::UNBOUNDED; cols * rows];
    let has_obstacle = grid.cells.iter().any(|&c| c);
    if has_obstacle {
        let f = |x: i64, i: i64, grow: &[i64]| (x - i) * (x - i) + grow[i as usize] * grow[i as usize];
        let sep = |i: i64, u: i64, grow: &[i64]| {
            (u * u - i * i + grow[u as usize] * grow[u as usize] - grow[i as usize] * grow[i as usize])
                / (2 * (u - i))
        };
        let mut s = vec![0i64; cols];
        let mut t = vec![0i64; cols];
        let mut grow = vec![0i64; cols];
        for r in 0..rows {
            let base = r * cols;
            grow.copy_from_slice(&g[base..base + cols]);
            let mut q: i64 = 0;
            s[0] = 0;
            t[0] = 0;
            for u in 1..cols as i64 {
                while q >= 0 && f(t[q as usize], s[q as usize], &grow) > f(t[q as usize], u, &grow) {
                    q -= 1;
                }
                if q < 0 {
                    q = 0;
                    s[0] = u;
                } else {
                    let w = 1 + sep(s[q as usize], u, &grow);
                    if w < cols as i64 {
                        q += 1;
                        s[q as usize] = u;
                        t[q as usize] = w;
                    }
                }
            }
            for u in (0..cols as i64).rev() {
                let d = f(u, s[q as usize], &grow);
                dist_sq[base + u as usize] = d.min(u32::MAX as i64) as u32;
                if u == t[q as usize] {
                    q -= 1;
                }
            }
        }
    }
    ClearanceField {
        resolution_m: grid.resolution_m,
        cols,
        rows,
        dist_sq,
    }
}

/// Maps a world point to the cell containing it.
pub fn world_to_cell(point: Point2, grid: &OccupancyGrid) -> Result<Cell, GridError> {
    if !point.x.is_finite() || !point.y.is_finite() {
        return Err(GridError::NonFinite);
    }
    let col = (point.x / grid.resolution_m).floor();
    let row = (point.y / grid.resolution_m).floor();
    if col < 0.0 || row < 0.0 {
        return Err(GridError::PointOutOfBounds(point.x, point.y));
    }
    let cell = Cell::new(col as usize, row as usize);
    if !grid.in_bounds(cell) {
        return Err(GridError::PointOutOfBounds(point.x, point.y));
    }
    Ok(cell)
}

/// Maps a cell to the world coordinates of its centre.
pub fn cell_to_world(cell: Cell, grid: &OccupancyGrid) -> Result<Point2, GridError> {
    if !grid.in_bounds(cell) {
        return Err(GridError::CellOutOfBounds(cell.col, cell.row));
    }
    Ok(Point2::new(
        (cell.col as f64 + 0.5) * grid.resolution_m,
        (cell.row as f64 + 0.5) * grid.resolution_m,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn empty_world(w: f64, h: f64) -> WorldModel {
        WorldModel {
            arena_width_m: w,
            arena_height_m: h,
            obstacles: vec![],
            goals: vec![],
            robot_start: Pose2::new(0.05, 0.05, 0.0),
            robot_radius_m: 0.05,
        }
    }

    #[test]
    fn build_grid_rasterizes_block() {
        // 1 m x 1 m world, one 10 cm x 40 cm obstacle, 1 cm cells.
        let mut world = empty_world(1.0, 1.0);
        world.obstacles.push(Obstacle::new(Rect::from_corners(0.40, 0.30, 0.50, 0.70)));
        let grid = build_grid(&world, 0.01).unwrap();
        assert_eq!((grid.cols, grid.rows), (100, 100));
        assert_eq!(grid.occupied_count(), 10 * 40);
        assert!(grid.occupied(Cell::new(40, 30)));
        assert!(grid.occupied(Cell::new(49, 69)));
        assert!(!grid.occupied(Cell::new(50, 30)));
        assert!(!grid.occupied(Cell::new(39, 30)));
    }

    #[test]
    fn build_grid_empty_world_is_free() {
        let grid = build_grid(&empty_world(0.5, 0.5), 0.01).unwrap();
        assert_eq!(grid.occupied_count(), 0);
    }

    #[test]
    fn build_grid_full_cover() {
        let mut world = empty_world(0.2, 0.2);
        world.obstacles.push(Obstacle::new(Rect::from_corners(0.0, 0.0, 0.2, 0.2)));
        let grid = build_grid(&world, 0.01).unwrap();
        assert_eq!(grid.occupied_count(), 20 * 20);
        assert_eq!(validate_start(&world, &grid), Err(GridError::StartOccupied));
    }

    #[test]
    fn build_grid_rejects_degenerate_resolution() {
        let world = empty_world(1.0, 1.0);
        assert!(matches!(build_grid(&world, 0.0), Err(GridError::BadResolution(_))));
        assert!(matches!(build_grid(&world, -0.1), Err(GridError::BadResolution(_))));
    }

    #[test]
    fn build_grid_is_deterministic() {
        let mut world = empty_world(1.0, 1.0);
        world.obstacles.push(Obstacle::new(Rect::from_corners(0.33, 0.21, 0.57, 0.48)));
        let a = build_grid(&world, 0.013).unwrap();
        let b = build_grid(&world, 0.013).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validate_rejects_outside_geometry() {
        let mut world = empty_world(1.0, 1.0);
        world.obstacles.push(Obstacle::new(Rect::from_corners(0.9, 0.9, 1.1, 1.0)));
        assert_eq!(world.validate(), Err(GridError::ObstacleOutsideArena(0)));
        world.obstacles.clear();
        world.goals.push(Goal::new(Point2::new(1.2, 0.5), "g"));
        assert_eq!(world.validate(), Err(GridError::GoalOutsideArena(0)));
    }

    #[test]
    fn inflate_zero_is_identity() {
        let mut world = empty_world(0.5, 0.5);
        world.obstacles.push(Obstacle::new(Rect::from_corners(0.2, 0.2, 0.3, 0.3)));
        let grid = build_grid(&world, 0.01).unwrap();
        assert_eq!(grid.inflate(0), grid);
    }

    #[test]
    fn inflate_single_cell_makes_3x3() {
        let mut world = empty_world(0.1, 0.1);
        world.obstacles.push(Obstacle::new(Rect::from_corners(0.05, 0.05, 0.06, 0.06)));
        let grid = build_grid(&world, 0.01).unwrap();
        assert_eq!(grid.occupied_count(), 1);
        let inflated = grid.inflate(1);
        assert_eq!(inflated.occupied_count(), 9);
        assert_eq!(inflated.buffer_cells, 1);
        for dr in 0..3usize {
            for dc in 0..3usize {
                assert!(inflated.occupied(Cell::new(4 + dc, 4 + dr)));
            }
        }
    }

    fn random_grid(rng: &mut ChaCha8Rng, cols: usize, rows: usize, fill: f64) -> OccupancyGrid {
        let cells = (0..cols * rows).map(|_| rng.gen_bool(fill)).collect();
        OccupancyGrid { resolution_m: 0.01, cols, rows, buffer_cells: 0, cells }
    }

    /// Brute-force Chebyshev dilation, the independent oracle for inflate.
    fn brute_dilate(grid: &OccupancyGrid, b: usize) -> Vec<bool> {
        let mut out = vec![false; grid.cols * grid.rows];
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                'scan: for rr in 0..grid.rows {
                    for cc in 0..grid.cols {
                        if grid.occupied(Cell::new(cc, rr))
                            && cc.abs_diff(c) <= b
                            && rr.abs_diff(r) <= b
                        {
                            out[r * grid.cols + c] = true;
                            break 'scan;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn inflate_matches_brute_force_chebyshev() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = random_grid(&mut rng, 50, 50, 0.02);
        let inflated = grid.inflate(20);
        assert_eq!(inflated.cells, brute_dilate(&grid, 20));
    }

    #[test]
    fn inflate_is_monotone_in_buffer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = random_grid(&mut rng, 40, 30, 0.05);
        let mut prev = grid.inflate(0);
        for b in [1usize, 2, 5, 9] {
            let next = grid.inflate(b);
            for (a, b) in prev.cells.iter().zip(next.cells.iter()) {
                assert!(!a || *b, "occupied set must grow with buffer");
            }
            prev = next;
        }
    }

    #[test]
    fn clearance_unit_and_diagonal_steps() {
        let mut world = empty_world(0.1, 0.1);
        world.obstacles.push(Obstacle::new(Rect::from_corners(0.05, 0.05, 0.06, 0.06)));
        let grid = build_grid(&world, 0.01).unwrap();
        let field = clearance_field(&grid);
        assert_eq!(field.clearance_m(Cell::new(5, 5)), 0.0);
        assert!((field.clearance_m(Cell::new(4, 5)) - 0.01).abs() < 1e-12);
        assert!((field.clearance_m(Cell::new(4, 4)) - 0.01 * 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn clearance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = random_grid(&mut rng, 30, 30, 0.07);
        let field = clearance_field(&grid);
        let occupied: Vec<Cell> = grid.occupied_cells().collect();
        assert!(!occupied.is_empty());
        for r in 0..30 {
            for c in 0..30 {
                let best = occupied
                    .iter()
                    .map(|o| {
                        let dx = o.col.abs_diff(c) as f64;
                        let dy = o.row.abs_diff(r) as f64;
                        (dx * dx + dy * dy).sqrt() * 0.01
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    (field.clearance_m(Cell::new(c, r)) - best).abs() < 1e-9,
                    "clearance mismatch at ({c},{r})"
                );
            }
        }
    }

    #[test]
    fn clearance_of_empty_grid_is_unbounded() {
        let grid = build_grid(&empty_world(0.3, 0.3), 0.01).unwrap();
        let field = clearance_field(&grid);
        assert_eq!(field.dist_sq_cells(Cell::new(10, 10)), ClearanceField::UNBOUNDED);
        assert!(field.clearance_m(Cell::new(0, 0)).is_infinite());
    }

    #[test]
    fn clearance_is_lipschitz_under_8_adjacency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = random_grid(&mut rng, 25, 25, 0.08);
        let field = clearance_field(&grid);
        let step = 0.01 * 2.0_f64.sqrt() + 1e-12;
        for r in 0..25usize {
            for c in 0..25usize {
                for (dc, dr) in [(1i64, 0i64), (0, 1), (1, 1), (1, -1)] {
                    let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                    if nc < 0 || nr < 0 || nc >= 25 || nr >= 25 {
                        continue;
                    }
                    let a = field.clearance_m(Cell::new(c, r));
                    let b = field.clearance_m(Cell::new(nc as usize, nr as usize));
                    assert!((a - b).abs() <= step);
                }
            }
        }
    }

    #[test]
    fn world_cell_roundtrip() {
        let grid = build_grid(&empty_world(0.2, 0.2), 0.01).unwrap();
        assert_eq!(world_to_cell(Point2::new(0.005, 0.005), &grid).unwrap(), Cell::new(0, 0));
        let center = cell_to_world(Cell::new(0, 0), &grid).unwrap();
        assert_eq!(center, Point2::new(0.005, 0.005));
        for row in 0..20 {
            for col in 0..20 {
                let cell = Cell::new(col, row);
                let p = cell_to_world(cell, &grid).unwrap();
                assert_eq!(world_to_cell(p, &grid).unwrap(), cell);
            }
        }
        assert!(world_to_cell(Point2::new(0.25, 0.1), &grid).is_err());
        assert!(cell_to_world(Cell::new(20, 0), &grid).is_err());
    }
}
