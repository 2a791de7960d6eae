//! Occupancy-grid world with named landmarks.
//!
//! Cell `(x, y)` covers `[x·res, (x+1)·res) × [y·res, (y+1)·res)` in meters,
//! with `y` growing northwards. In the text format the first grid row is the
//! northernmost (`y = height - 1`).

mod format;
mod path;
mod ray;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::pose::{Point2, Pose};

pub use format::load_world;
pub use path::Unreachable;

/// Integer grid coordinate `(x, y)`.
pub type CellIndex = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Occupied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LandmarkKind {
    Doorway,
    Room,
    Object,
    Hallway,
    Obstacle,
}

impl LandmarkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LandmarkKind::Doorway => "doorway",
            LandmarkKind::Room => "room",
            LandmarkKind::Object => "object",
            LandmarkKind::Hallway => "hallway",
            LandmarkKind::Obstacle => "obstacle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "doorway" => LandmarkKind::Doorway,
            "room" => LandmarkKind::Room,
            "object" => LandmarkKind::Object,
            "hallway" => LandmarkKind::Hallway,
            "obstacle" => LandmarkKind::Obstacle,
            _ => return None,
        })
    }

    /// Areas are walkable regions (rooms and hallways).
    pub fn is_area(self) -> bool {
        matches!(self, LandmarkKind::Room | LandmarkKind::Hallway)
    }

    /// Solid things occupying cells.
    pub fn is_solid(self) -> bool {
        matches!(self, LandmarkKind::Object | LandmarkKind::Obstacle)
    }
}

impl fmt::Display for LandmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Landmark {
    pub name: String,
    pub kind: LandmarkKind,
    /// Sorted by `(y, x)`, no duplicates.
    pub footprint: Vec<CellIndex>,
    pub reference_point: Point2,
    /// Whether the reference point was given explicitly rather than derived
    /// as the footprint centroid.
    pub explicit_reference: bool,
}

impl Landmark {
    pub fn contains(&self, cell: CellIndex) -> bool {
        self.footprint
            .binary_search_by(|c| (c.1, c.0).cmp(&(cell.1, cell.0)))
            .is_ok()
    }
}

/// A landmark as declared, before validation against a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSpec {
    pub name: String,
    pub kind: LandmarkKind,
    pub footprint: Vec<CellIndex>,
    pub reference_point: Option<Point2>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("grid must be at least 4x4, got {width}x{height}")]
    BadDimensions { width: usize, height: usize },
    #[error("resolution must be positive and finite")]
    BadResolution,
    #[error("grid has {found} cells, expected {expected}")]
    CellCount { expected: usize, found: usize },
    #[error("duplicate landmark `{0}`")]
    DuplicateLandmark(String),
    #[error("landmark `{0}` has a footprint outside the grid")]
    LandmarkOutOfBounds(String),
    #[error("landmark `{name}`: {reason}")]
    InvalidFootprint { name: String, reason: &'static str },
    #[error("pose is not inside a free cell")]
    PoseNotFree,
    #[error("pose orientation is not a unit yaw-only quaternion")]
    PoseNotYawOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldMap {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<Cell>,
    landmarks: Vec<Landmark>,
    /// Default start `(x_m, y_m, yaw_deg)`.
    start: Option<[f64; 3]>,
}

impl WorldMap {
    /// Builds a map, checking every structural invariant. `cells` is row-major
    /// with `y = 0` first.
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<Cell>,
        landmarks: Vec<LandmarkSpec>,
    ) -> Result<Self, WorldError> {
        if width < 4 || height < 4 {
            return Err(WorldError::BadDimensions { width, height });
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(WorldError::BadResolution);
        }
        if cells.len() != width * height {
            return Err(WorldError::CellCount {
                expected: width * height,
                found: cells.len(),
            });
        }
        let mut map = WorldMap {
            width,
            height,
            resolution,
            cells,
            landmarks: Vec::with_capacity(landmarks.len()),
            start: None,
        };
        for spec in landmarks {
            let lm = map.validate_landmark(spec)?;
            map.landmarks.push(lm);
        }
        map.landmarks.sort_by_key(|a| a.name.to_lowercase());
        Ok(map)
    }

    /// All-free grid without landmarks.
    pub fn open(width: usize, height: usize, resolution: f64) -> Result<Self, WorldError> {
        Self::new(width, height, resolution, vec![Cell::Free; width * height], Vec::new())
    }

    /// Sets the default start pose, given as `(x_m, y_m, yaw_deg)`.
    pub fn with_start(mut self, x: f64, y: f64, yaw_deg: f64) -> Result<Self, WorldError> {
        if !yaw_deg.is_finite() {
            return Err(WorldError::PoseNotYawOnly);
        }
        self.check_pose(&Pose::new(x, y, yaw_deg.to_radians()))?;
        self.start = Some([x, y, yaw_deg]);
        Ok(self)
    }

    /// Default start pose, when the world declares one.
    pub fn start(&self) -> Option<Pose> {
        self.start.map(|[x, y, yaw]| Pose::new(x, y, yaw.to_radians()))
    }

    pub fn start_spec(&self) -> Option<[f64; 3]> {
        self.start
    }

    fn validate_landmark(&self, spec: LandmarkSpec) -> Result<Landmark, WorldError> {
        let name = spec.name;
        if self
            .landmarks
            .iter()
            .any(|l| l.name.to_lowercase() == name.to_lowercase())
        {
            return Err(WorldError::DuplicateLandmark(name));
        }
        let mut footprint = spec.footprint;
        footprint.sort_by_key(|a| (a.1, a.0));
        footprint.dedup();
        if footprint.is_empty() {
            return Err(WorldError::InvalidFootprint {
                name,
                reason: "empty footprint",
            });
        }
        if footprint.iter().any(|&(x, y)| x >= self.width || y >= self.height) {
            return Err(WorldError::LandmarkOutOfBounds(name));
        }
        let invalid = |reason| WorldError::InvalidFootprint {
            name: name.clone(),
            reason,
        };
        match spec.kind {
            LandmarkKind::Room | LandmarkKind::Hallway => {
                if footprint.iter().any(|&c| !self.is_free(c)) {
                    return Err(invalid("area footprint must contain only free cells"));
                }
                if !is_connected(&footprint) {
                    return Err(invalid("area footprint must be connected"));
                }
            }
            LandmarkKind::Object | LandmarkKind::Obstacle => {
                if footprint.iter().any(|&c| self.is_free(c)) {
                    return Err(invalid("object footprint must contain only occupied cells"));
                }
            }
            LandmarkKind::Doorway => {
                if footprint.iter().any(|&c| !self.is_free(c)) {
                    return Err(invalid("doorway footprint must contain only free cells"));
                }
                if self.door_normal_of(&footprint).is_none() {
                    return Err(invalid(
                        "doorway must be a gap with occupied cells on two opposite sides",
                    ));
                }
            }
        }
        let centroid = {
            let n = footprint.len() as f64;
            let (sx, sy) = footprint.iter().fold((0.0, 0.0), |(sx, sy), &c| {
                let p = self.cell_center(c);
                (sx + p.x, sy + p.y)
            });
            Point2::new(sx / n, sy / n)
        };
        Ok(Landmark {
            name,
            kind: spec.kind,
            footprint,
            explicit_reference: spec.reference_point.is_some(),
            reference_point: spec.reference_point.unwrap_or(centroid),
        })
    }

    /// Passage direction through a doorway gap: `(0, 1)` when the gap sits in
    /// a horizontal wall (occupied cells west and east of it), `(1, 0)` for a
    /// vertical wall.
    fn door_normal_of(&self, footprint: &[CellIndex]) -> Option<Point2> {
        let x0 = footprint.iter().map(|c| c.0).min()?;
        let x1 = footprint.iter().map(|c| c.0).max()?;
        let y0 = footprint.iter().map(|c| c.1).min()?;
        let y1 = footprint.iter().map(|c| c.1).max()?;
        let occ = |x: Option<usize>, y: Option<usize>| match (x, y) {
            (Some(x), Some(y)) if x < self.width && y < self.height => !self.is_free((x, y)),
            _ => false,
        };
        let horizontal_wall = (y0..=y1).all(|y| occ(x0.checked_sub(1), Some(y)) && occ(Some(x1 + 1), Some(y)));
        if horizontal_wall {
            return Some(Point2::new(0.0, 1.0));
        }
        let vertical_wall = (x0..=x1).all(|x| occ(Some(x), y0.checked_sub(1)) && occ(Some(x), Some(y1 + 1)));
        if vertical_wall {
            return Some(Point2::new(1.0, 0.0));
        }
        None
    }

    /// Passage normal of a doorway landmark (see [`LandmarkKind::Doorway`]).
    pub fn doorway_normal(&self, lm: &Landmark) -> Option<Point2> {
        if lm.kind != LandmarkKind::Doorway {
            return None;
        }
        self.door_normal_of(&lm.footprint)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    /// Case-insensitive lookup.
    pub fn landmark(&self, name: &str) -> Option<&Landmark> {
        self.landmarks.iter().find(|l| l.name.eq_ignore_ascii_case(name))
    }

    /// Map diagonal in meters.
    pub fn diagonal(&self) -> f64 {
        math::hypot(
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn cell(&self, c: CellIndex) -> Cell {
        self.cells[c.1 * self.width + c.0]
    }

    pub fn is_free(&self, c: CellIndex) -> bool {
        c.0 < self.width && c.1 < self.height && self.cell(c) == Cell::Free
    }

    pub fn cell_center(&self, c: CellIndex) -> Point2 {
        Point2::new(
            (c.0 as f64 + 0.5) * self.resolution,
            (c.1 as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing a point, or `None` outside the grid.
    pub fn cell_of(&self, p: Point2) -> Option<CellIndex> {
        let fx = p.x / self.resolution;
        let fy = p.y / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0 && fx.is_finite() && fy.is_finite()) {
            return None;
        }
        // Truncation is floor for non-negative values.
        let (x, y) = (fx as usize, fy as usize);
        (x < self.width && y < self.height).then_some((x, y))
    }

    pub fn is_free_point(&self, p: Point2) -> bool {
        self.cell_of(p).is_some_and(|c| self.is_free(c))
    }

    /// Checks the pose invariants: free cell, unit yaw-only quaternion.
    pub fn check_pose(&self, pose: &Pose) -> Result<(), WorldError> {
        if !pose.orientation.is_unit_yaw_only() || pose.position[2] != 0.0 {
            return Err(WorldError::PoseNotYawOnly);
        }
        if !self.is_free_point(pose.xy()) {
            return Err(WorldError::PoseNotFree);
        }
        Ok(())
    }

    /// All free cells, sorted by `(y, x)`.
    pub fn free_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| (x, y)))
            .filter(move |&c| self.is_free(c))
    }

    /// Fraction of in-grid cells with centers within `radius` of `p` that are free.
    pub fn openness(&self, p: Point2, radius: f64) -> f64 {
        let r_cells = math::floor(radius / self.resolution) as i64 + 1;
        let Some((cx, cy)) = self.cell_of(p) else {
            return 0.0;
        };
        let (mut total, mut free) = (0usize, 0usize);
        for dy in -r_cells..=r_cells {
            for dx in -r_cells..=r_cells {
                let x = cx as i64 + dx;
                let y = cy as i64 + dy;
                if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
                    continue;
                }
                let c = (x as usize, y as usize);
                if self.cell_center(c).dist(p) <= radius {
                    total += 1;
                    if self.is_free(c) {
                        free += 1;
                    }
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            free as f64 / total as f64
        }
    }

    /// 4-neighbours of a cell inside the grid.
    pub fn neighbors4(&self, c: CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        let (x, y) = (c.0 as i64, c.1 as i64);
        [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(move |(dx, dy)| (x + dx, y + dy))
            .filter(move |&(nx, ny)| nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height)
            .map(|(nx, ny)| (nx as usize, ny as usize))
    }
}

fn is_connected(cells: &[CellIndex]) -> bool {
    let Some(&start) = cells.first() else {
        return true;
    };
    let member = |c: CellIndex| cells.binary_search_by(|d| (d.1, d.0).cmp(&(c.1, c.0))).is_ok();
    let mut seen = vec![false; cells.len()];
    let index = |c: CellIndex| cells.binary_search_by(|d| (d.1, d.0).cmp(&(c.1, c.0))).unwrap();
    let mut stack = vec![start];
    seen[0] = true;
    let mut count = 1;
    while let Some((x, y)) = stack.pop() {
        let cand = [
            (x.wrapping_add(1), y),
            (x.wrapping_sub(1), y),
            (x, y.wrapping_add(1)),
            (x, y.wrapping_sub(1)),
        ];
        for n in cand {
            if member(n) {
                let i = index(n);
                if !seen[i] {
                    seen[i] = true;
                    count += 1;
                    stack.push(n);
                }
            }
        }
    }
    count == cells.len()
}
