use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{beyond_door_region, ground, FeatureVector, Grounded, PlannerConfig, PlannerError};
use crate::language::{Instruction, InstructionKind};
use crate::math;
use crate::pose::{Point2, Pose};
use crate::world::{CellIndex, WorldMap};

/// Everything about an (instruction, start pose) pair that the features of
/// its candidates share: the grounded referent, the distance field from the
/// start cell and the coverage region.
#[derive(Clone, Debug)]
pub struct FeatureContext<'m> {
    pub map: &'m WorldMap,
    pub cfg: &'m PlannerConfig,
    pub grounded: Grounded<'m>,
    /// Path distance (m) from the start cell to every cell.
    pub dist: Vec<f64>,
    /// Point the alignment and goal-distance features measure against.
    pub referent: Point2,
    /// `None` means the candidate's own facing half-plane.
    pub region: Option<Vec<CellIndex>>,
    /// Far region of an area for `NavigateUnexplored`, empty otherwise.
    pub far_region: Vec<CellIndex>,
}

impl<'m> FeatureContext<'m> {
    pub fn new(
        map: &'m WorldMap,
        cfg: &'m PlannerConfig,
        start: &Pose,
        instr: &Instruction,
    ) -> Result<Self, PlannerError> {
        map.check_pose(start).map_err(PlannerError::InvalidPose)?;
        let grounded = ground(map, start, instr)?;
        let start_cell = map.cell_of(start.xy()).expect("checked pose");
        let dist = map.distance_field(start_cell);
        let p = start.xy();
        let mut far_region = Vec::new();
        let (referent, region) = match (grounded.kind, grounded.landmark) {
            (InstructionKind::ApproachEntrance, Some(door)) => {
                (door.reference_point, Some(beyond_door_region(map, door, p)))
            }
            (InstructionKind::NavigateUnexplored, Some(area)) => {
                far_region = far_cells(map, &dist, &area.footprint, cfg.far_region_depth);
                let referent = centroid(map, &far_region).unwrap_or(area.reference_point);
                (referent, Some(area.footprint.clone()))
            }
            (_, Some(lm)) => (lm.reference_point, Some(lm.footprint.clone())),
            (kind, None) => {
                let reach = match (kind, instr.distance) {
                    (InstructionKind::DirectionOnly, _) => cfg.direction_ladder.iter().copied().fold(0.0, f64::max),
                    (_, Some(d)) => d,
                    (_, None) => 0.0,
                };
                (p + Point2::unit_from_angle(grounded.heading).scale(reach), None)
            }
        };
        Ok(Self {
            map,
            cfg,
            grounded,
            dist,
            referent,
            region,
            far_region,
        })
    }

    pub fn path_distance(&self, c: CellIndex) -> f64 {
        self.dist[c.1 * self.map.width() + c.0]
    }

    pub fn features(&self, pose: &Pose) -> FeatureVector {
        let map = self.map;
        let cfg = self.cfg;
        let p = pose.xy();
        let yaw = pose.yaw();
        let range = cfg.max_range;
        let unit = |v: f64| v.clamp(0.0, 1.0);

        let travel = match map.cell_of(p) {
            Some(c) if self.path_distance(c).is_finite() => self.path_distance(c) / map.diagonal(),
            _ => 1.0,
        };
        let rays = map.raycast_profile(pose, cfg.n_rays, range);
        let frontal = rays.first().copied().unwrap_or(0.0) / range;
        let visibility = rays.iter().sum::<f64>() / (rays.len().max(1) as f64 * range);
        let coverage = match &self.region {
            Some(region) => map.visible_fraction(pose, region, range, cfg.fov),
            None => {
                let half = facing_half_plane(map, pose, range);
                map.visible_fraction(pose, &half, range, cfg.fov)
            }
        };
        let to_ref = self.referent - p;
        let dir = if to_ref.norm() > 1e-6 {
            p.bearing_to(self.referent)
        } else {
            self.grounded.heading
        };
        let alignment = 0.5 * (1.0 + math::cos(math::angle_diff(yaw, dir)));

        FeatureVector {
            travel: unit(travel),
            goal_dist: unit(to_ref.norm() / range),
            frontal_clearance: unit(frontal),
            visibility: unit(visibility),
            coverage: unit(coverage),
            alignment: unit(alignment),
            openness: unit(map.openness(p, cfg.openness_radius)),
            heading_change: unit(math::angle_diff(yaw, self.grounded.start.yaw()) / PI),
        }
    }
}

/// Features of `candidate` as an end pose for `instr` issued at `current`.
pub fn extract_features(
    map: &WorldMap,
    cfg: &PlannerConfig,
    current: &Pose,
    candidate: &Pose,
    instr: &Instruction,
) -> Result<FeatureVector, PlannerError> {
    Ok(FeatureContext::new(map, cfg, current, instr)?.features(candidate))
}

/// Free cells within `range` whose centers lie in front of the pose.
fn facing_half_plane(map: &WorldMap, pose: &Pose, range: f64) -> Vec<CellIndex> {
    let p = pose.xy();
    let h = pose.heading();
    let res = map.resolution();
    let r = (range / res) as i64 + 1;
    let (cx, cy) = map.cell_of(p).map(|(x, y)| (x as i64, y as i64)).unwrap_or((0, 0));
    let mut out = Vec::new();
    for y in (cy - r).max(0)..=(cy + r).min(map.height() as i64 - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(map.width() as i64 - 1) {
            let c = (x as usize, y as usize);
            if !map.is_free(c) {
                continue;
            }
            let v = map.cell_center(c) - p;
            if v.norm() <= range && v.dot(h) >= 0.0 {
                out.push(c);
            }
        }
    }
    out
}

fn far_cells(map: &WorldMap, dist: &[f64], footprint: &[CellIndex], depth: f64) -> Vec<CellIndex> {
    let d = |c: &CellIndex| dist[c.1 * map.width() + c.0];
    let max = footprint
        .iter()
        .map(d)
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Vec::new();
    }
    footprint
        .iter()
        .copied()
        .filter(|c| d(c).is_finite() && d(c) >= max - depth)
        .collect()
}

fn centroid(map: &WorldMap, cells: &[CellIndex]) -> Option<Point2> {
    if cells.is_empty() {
        return None;
    }
    let sum = cells
        .iter()
        .fold(Point2::new(0.0, 0.0), |acc, &c| acc + map.cell_center(c));
    Some(sum.scale(1.0 / cells.len() as f64))
}
