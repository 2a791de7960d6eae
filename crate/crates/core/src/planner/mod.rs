//! Candidate end-pose waypoints for an instruction, and their features.
//!
//! One instruction admits many end poses. [`generate_candidates`] enumerates
//! the admissible poses of the instruction's kind on the grid (cell centers ×
//! yaw buckets for landmark kinds, commanded displacements for directional
//! kinds), ranks them with a deterministic round-robin over strata (standoff
//! bands, sides, yaw classes) and keeps the first `k`.

mod candidates;
mod features;

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

use crate::language::{Instruction, InstructionKind};
use crate::math;
use crate::pose::{Point2, Pose};
use crate::world::{CellIndex, Landmark, LandmarkKind, WorldMap};

pub use candidates::{admissible_poses, generate_candidates, rank_round_robin, RankedPose};
pub use features::{extract_features, FeatureContext};

pub const FEATURE_DIM: usize = 8;

/// Waypoint features, every component in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FeatureVector {
    /// Grid path length from the start pose over the map diagonal.
    pub travel: f64,
    /// Distance to the referent over `max_range`.
    pub goal_dist: f64,
    /// Ray 0 (facing direction) free distance over `max_range`.
    pub frontal_clearance: f64,
    /// Mean ray length over `max_range`.
    pub visibility: f64,
    /// Visible fraction of the referent region.
    pub coverage: f64,
    /// `(1 + cos θ) / 2`, θ between heading and the referent direction.
    pub alignment: f64,
    /// Free-cell fraction within the openness radius.
    pub openness: f64,
    /// `|Δyaw| / π` relative to the start pose.
    pub heading_change: f64,
}

impl FeatureVector {
    pub const NAMES: [&'static str; FEATURE_DIM] = [
        "travel",
        "goal_dist",
        "frontal_clearance",
        "visibility",
        "coverage",
        "alignment",
        "openness",
        "heading_change",
    ];

    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        [
            self.travel,
            self.goal_dist,
            self.frontal_clearance,
            self.visibility,
            self.coverage,
            self.alignment,
            self.openness,
            self.heading_change,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_DIM]) -> Self {
        Self {
            travel: a[0],
            goal_dist: a[1],
            frontal_clearance: a[2],
            visibility: a[3],
            coverage: a[4],
            alignment: a[5],
            openness: a[6],
            heading_change: a[7],
        }
    }

    /// Builds from an untyped slice; fails unless it has exactly
    /// [`FEATURE_DIM`] entries.
    pub fn from_slice(s: &[f64]) -> Result<Self, DimensionMismatch> {
        let a: [f64; FEATURE_DIM] = s.try_into().map_err(|_| DimensionMismatch {
            expected: FEATURE_DIM,
            found: s.len(),
        })?;
        Ok(Self::from_array(a))
    }

    pub fn in_unit_box(&self) -> bool {
        self.to_array().iter().all(|v| (0.0..=1.0).contains(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("expected {expected} features, got {found}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub found: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaypointCandidate {
    pub id: usize,
    pub pose: Pose,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("unknown landmark `{0}`")]
    UnknownLandmark(String),
    #[error("landmark `{name}` is a {found}, which this instruction cannot target")]
    LandmarkKindMismatch { name: String, found: LandmarkKind },
    /// No admissible free pose. For directional kinds `max_feasible` is the
    /// largest achievable displacement along the commanded direction; for
    /// landmark kinds it is 0.
    #[error("instruction is infeasible here (max feasible displacement {max_feasible:.2} m)")]
    Infeasible { max_feasible: f64 },
    #[error("current pose is invalid: {0}")]
    InvalidPose(crate::world::WorldError),
    #[error("k must be at least 2")]
    BadK,
    #[error("instruction is malformed: {0}")]
    Malformed(crate::language::LanguageError),
}

/// Planner tunables. Distances are meters, angles radians.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    pub k: usize,
    pub max_range: f64,
    pub n_rays: usize,
    /// Field of view for the coverage feature.
    pub fov: f64,
    pub yaw_buckets: usize,
    /// Facing tolerance for kinds that must face their referent.
    pub facing_tolerance: f64,
    pub entrance_standoff: (f64, f64),
    pub object_ring: (f64, f64),
    /// Width of standoff / ring bands used as ranking strata.
    pub standoff_band: f64,
    pub room_depth_band: f64,
    pub room_depth_bands: usize,
    /// Depth of the far region for `NavigateUnexplored`.
    pub far_region_depth: f64,
    /// How far past an obstacle (beyond its far edge) a pose may be.
    pub pass_distance: f64,
    pub pass_band: f64,
    pub lateral_offset: (f64, f64),
    pub direction_ladder: Vec<f64>,
    /// Relative offsets applied to commanded distances / angles, in rank order.
    pub tolerance_band: Vec<f64>,
    pub openness_radius: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            k: 8,
            max_range: 5.0,
            n_rays: 16,
            fov: FRAC_PI_2,
            yaw_buckets: 16,
            facing_tolerance: 15f64.to_radians(),
            entrance_standoff: (0.3, 1.5),
            object_ring: (0.3, 1.2),
            standoff_band: 0.3,
            room_depth_band: 1.0,
            room_depth_bands: 3,
            far_region_depth: 1.0,
            pass_distance: 1.2,
            pass_band: 0.6,
            lateral_offset: (0.1, 1.2),
            direction_ladder: alloc::vec![0.5, 1.0, 1.5, 2.0, 3.0],
            tolerance_band: alloc::vec![0.0, -0.1, 0.1, -0.2, 0.2],
            openness_radius: 1.0,
        }
    }
}

impl PlannerConfig {
    pub fn bucket_yaw(&self, b: usize) -> f64 {
        math::wrap_angle(b as f64 * TAU / self.yaw_buckets as f64)
    }

    pub fn yaw_bucket(&self, yaw: f64) -> usize {
        let step = TAU / self.yaw_buckets as f64;
        let a = math::wrap_angle(yaw);
        let a = if a < 0.0 { a + TAU } else { a };
        (math::round(a / step) as usize) % self.yaw_buckets
    }
}

/// An instruction resolved against a map and start pose.
#[derive(Clone, Debug)]
pub struct Grounded<'m> {
    pub kind: InstructionKind,
    pub landmark: Option<&'m Landmark>,
    pub start: Pose,
    /// Commanded heading for directional kinds; bearing to the landmark otherwise.
    pub heading: f64,
}

/// Words that name a landmark kind rather than a specific landmark.
fn kind_word(tok: &str) -> Option<LandmarkKind> {
    Some(match tok {
        "doorway" | "door" | "entrance" | "entryway" => LandmarkKind::Doorway,
        "room" => LandmarkKind::Room,
        "hallway" | "hall" | "corridor" => LandmarkKind::Hallway,
        _ => return None,
    })
}

fn compatible(kind: InstructionKind, lk: LandmarkKind) -> bool {
    match kind {
        InstructionKind::ApproachEntrance => lk == LandmarkKind::Doorway,
        InstructionKind::EnterRoom => lk == LandmarkKind::Room,
        InstructionKind::ApproachObject | InstructionKind::HandleObstruction => lk.is_solid(),
        InstructionKind::NavigateUnexplored => lk.is_area(),
        _ => false,
    }
}

/// Resolves the instruction's landmark reference: an exact (case-insensitive)
/// name first, then a kind word ("door", "room", "hallway") naming the nearest
/// compatible landmark.
pub fn ground<'m>(map: &'m WorldMap, start: &Pose, instr: &Instruction) -> Result<Grounded<'m>, PlannerError> {
    instr.validate().map_err(PlannerError::Malformed)?;
    if !instr.kind.needs_landmark() {
        let dir = instr.direction.expect("validated");
        let heading = match instr.rotation_deg {
            Some(a) => math::wrap_angle(start.yaw() + a.to_radians()),
            None => dir.heading(start.yaw()),
        };
        return Ok(Grounded {
            kind: instr.kind,
            landmark: None,
            start: *start,
            heading,
        });
    }
    let name = instr.landmark.as_deref().expect("validated");
    let lm = match map.landmark(name) {
        Some(lm) => {
            if !compatible(instr.kind, lm.kind) {
                return Err(PlannerError::LandmarkKindMismatch {
                    name: lm.name.clone(),
                    found: lm.kind,
                });
            }
            lm
        }
        None => {
            let wanted = kind_word(name).ok_or_else(|| PlannerError::UnknownLandmark(name.into()))?;
            let p = start.xy();
            map.landmarks()
                .iter()
                .filter(|l| l.kind == wanted && compatible(instr.kind, l.kind))
                .min_by(|a, b| {
                    a.reference_point
                        .dist(p)
                        .total_cmp(&b.reference_point.dist(p))
                        .then_with(|| a.name.cmp(&b.name))
                })
                .ok_or_else(|| PlannerError::UnknownLandmark(name.into()))?
        }
    };
    Ok(Grounded {
        kind: instr.kind,
        landmark: Some(lm),
        start: *start,
        heading: start.xy().bearing_to(lm.reference_point),
    })
}

/// Side of a doorway (`+1` / `-1` along its passage normal) a point is on.
pub fn door_side(normal: Point2, door_ref: Point2, p: Point2) -> f64 {
    if (p - door_ref).dot(normal) < -1e-9 {
        -1.0
    } else {
        1.0
    }
}

/// Doorways that touch the area (4-adjacent), nearest to `p` first.
pub fn doorways_of<'m>(map: &'m WorldMap, area: &Landmark, p: Point2) -> Vec<&'m Landmark> {
    let mut doors: Vec<&Landmark> = map
        .landmarks()
        .iter()
        .filter(|d| d.kind == LandmarkKind::Doorway)
        .filter(|d| d.footprint.iter().any(|&c| map.neighbors4(c).any(|n| area.contains(n))))
        .collect();
    doors.sort_by(|a, b| {
        a.reference_point
            .dist(p)
            .total_cmp(&b.reference_point.dist(p))
            .then_with(|| a.name.cmp(&b.name))
    });
    doors
}

/// The area footprint on the far side of a doorway as seen from `p`, or the
/// doorway footprint when no area touches that side.
pub fn beyond_door_region(map: &WorldMap, door: &Landmark, p: Point2) -> Vec<CellIndex> {
    let Some(normal) = map.doorway_normal(door) else {
        return door.footprint.clone();
    };
    let s = door_side(normal, door.reference_point, p);
    let (dx, dy) = ((-s * normal.x) as i64, (-s * normal.y) as i64);
    let beyond: Vec<CellIndex> = door
        .footprint
        .iter()
        .filter_map(|&(x, y)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            (nx >= 0 && ny >= 0).then_some((nx as usize, ny as usize))
        })
        .collect();
    map.landmarks()
        .iter()
        .filter(|l| l.kind.is_area())
        .find(|l| beyond.iter().any(|&c| l.contains(c)))
        .map(|l| l.footprint.clone())
        .unwrap_or_else(|| door.footprint.clone())
}
