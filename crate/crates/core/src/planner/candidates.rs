use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use super::{door_side, doorways_of, FeatureContext, PlannerConfig, PlannerError, WaypointCandidate};
use crate::language::{Instruction, InstructionKind};
use crate::math::{self, quantize};
use crate::pose::{Point2, Pose};
use crate::world::{CellIndex, Landmark, WorldMap};

/// An admissible pose with its ranking stratum and within-stratum key.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedPose {
    pub cell: CellIndex,
    pub pose: Pose,
    pub stratum: u32,
    pub key: [i64; 2],
}

impl RankedPose {
    fn order_key(&self) -> (u32, [i64; 2], usize, usize, i64) {
        (
            self.stratum,
            self.key,
            self.cell.1,
            self.cell.0,
            quantize(self.pose.yaw()),
        )
    }
}

/// Deduplicates by (cell, yaw) and takes the first `k` in round-robin order:
/// the best of every stratum, then the second best of every stratum, and so on.
pub fn rank_round_robin(poses: Vec<RankedPose>, k: usize) -> Vec<RankedPose> {
    let keys: Vec<_> = poses.iter().map(RankedPose::order_key).collect();
    let mut idx: Vec<usize> = (0..poses.len()).collect();
    idx.sort_unstable_by_key(|&i| {
        let k = keys[i];
        (k.3, k.2, k.4, k)
    });
    idx.dedup_by_key(|i| {
        let k = keys[*i];
        (k.3, k.2, k.4)
    });
    idx.sort_unstable_by_key(|&i| keys[i]);
    let mut slots: Vec<Option<RankedPose>> = poses.into_iter().map(Some).collect();
    let poses = idx.into_iter().map(|i| slots[i].take().expect("indices are distinct"));
    let mut ranked: Vec<(usize, RankedPose)> = Vec::with_capacity(poses.len());
    let mut rank = 0;
    for (i, p) in poses.enumerate() {
        let same = i > 0 && ranked.last().map(|(_, q)| q.stratum) == Some(p.stratum);
        rank = if same { rank + 1 } else { 0 };
        ranked.push((rank, p));
    }
    ranked.sort_by_key(|(r, p)| (*r, p.stratum));
    ranked.into_iter().take(k).map(|(_, p)| p).collect()
}

/// Up to `cfg.k` distinct admissible end poses for `instr` from `current`,
/// with ids `0..n` in rank order.
pub fn generate_candidates(
    map: &WorldMap,
    cfg: &PlannerConfig,
    current: &Pose,
    instr: &Instruction,
) -> Result<Vec<WaypointCandidate>, PlannerError> {
    if cfg.k < 2 {
        return Err(PlannerError::BadK);
    }
    let ctx = FeatureContext::new(map, cfg, current, instr)?;
    let admissible = admissible_poses(&ctx, instr)?;
    if admissible.is_empty() {
        return Err(PlannerError::Infeasible { max_feasible: 0.0 });
    }
    Ok(rank_round_robin(admissible, cfg.k)
        .into_iter()
        .enumerate()
        .map(|(id, r)| WaypointCandidate {
            id,
            features: ctx.features(&r.pose),
            pose: r.pose,
        })
        .collect())
}

/// Every admissible pose for the instruction, unranked.
pub fn admissible_poses(ctx: &FeatureContext<'_>, instr: &Instruction) -> Result<Vec<RankedPose>, PlannerError> {
    let g = &ctx.grounded;
    Ok(match (g.kind, g.landmark) {
        (InstructionKind::ApproachEntrance, Some(door)) => approach_entrance(ctx, door),
        (InstructionKind::EnterRoom, Some(room)) => enter_room(ctx, room),
        (InstructionKind::ApproachObject, Some(obj)) => approach_object(ctx, obj),
        (InstructionKind::NavigateUnexplored, Some(_)) => navigate_unexplored(ctx),
        (InstructionKind::HandleObstruction, Some(obj)) => handle_obstruction(ctx, obj),
        (InstructionKind::DirectionOnly, None) => direction_only(ctx)?,
        (InstructionKind::DirectionOrientation | InstructionKind::MetricMove, None) => {
            if let Some(angle) = instr.rotation_deg {
                rotation(ctx, angle)
            } else {
                displacement(ctx, instr.distance.expect("validated"))?
            }
        }
        _ => unreachable!("grounding pairs landmark kinds with a landmark"),
    })
}

fn reachable(ctx: &FeatureContext<'_>, c: CellIndex) -> bool {
    ctx.map.is_free(c) && ctx.path_distance(c).is_finite()
}

/// Reachable free cells whose centers lie within `radius` of `p`, in `(y, x)` order.
fn cells_near(ctx: &FeatureContext<'_>, p: Point2, radius: f64) -> Vec<CellIndex> {
    let map = ctx.map;
    let res = map.resolution();
    let lo = |v: f64| math::floor((v - radius) / res).max(0.0) as usize;
    let hi = |v: f64, n: usize| (math::floor((v + radius) / res) as i64).clamp(-1, n as i64 - 1);
    let (x1, y1) = (hi(p.x, map.width()), hi(p.y, map.height()));
    let mut out = Vec::new();
    for y in lo(p.y)..=(y1.max(0) as usize) {
        for x in lo(p.x)..=(x1.max(0) as usize) {
            let c = (x, y);
            if x < map.width() && y < map.height() && reachable(ctx, c) && map.cell_center(c).dist(p) <= radius {
                out.push(c);
            }
        }
    }
    out
}

/// Bucket yaws within the facing tolerance of `bearing`.
fn facing_yaws(cfg: &PlannerConfig, bearing: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    (0..cfg.yaw_buckets).filter_map(move |b| {
        let yaw = cfg.bucket_yaw(b);
        let dev = math::angle_diff(yaw, bearing);
        (dev <= cfg.facing_tolerance + 1e-12).then_some((yaw, dev))
    })
}

fn band(value: f64, width: f64, bands: u32) -> u32 {
    (math::floor(value / width).max(0.0) as u32).min(bands - 1)
}

fn bands_in(lo: f64, hi: f64, width: f64) -> u32 {
    (math::floor((hi - lo) / width - 1e-9) as u32 + 1).max(1)
}

fn approach_entrance(ctx: &FeatureContext<'_>, door: &Landmark) -> Vec<RankedPose> {
    let (map, cfg) = (ctx.map, ctx.cfg);
    let r = door.reference_point;
    let normal = map.doorway_normal(door);
    let start = ctx.grounded.start.xy();
    let side = normal.map(|n| door_side(n, r, start)).unwrap_or(1.0);
    let (lo, hi) = cfg.entrance_standoff;
    let bands = bands_in(lo, hi, cfg.standoff_band);
    let mut out = Vec::new();
    for c in cells_near(ctx, r, hi) {
        if door.contains(c) {
            continue;
        }
        let p = map.cell_center(c);
        let v = p - r;
        let d = v.norm();
        if d < lo {
            continue;
        }
        let lateral = match normal {
            Some(n) => {
                if v.dot(n) * side <= 1e-9 {
                    continue;
                }
                math::abs(n.cross(v))
            }
            None => 0.0,
        };
        for (yaw, dev) in facing_yaws(cfg, p.bearing_to(r)) {
            out.push(RankedPose {
                cell: c,
                pose: Pose::new(p.x, p.y, yaw),
                stratum: band(d - lo, cfg.standoff_band, bands),
                key: [quantize(lateral), quantize(dev)],
            });
        }
    }
    out
}

fn enter_room(ctx: &FeatureContext<'_>, room: &Landmark) -> Vec<RankedPose> {
    let (map, cfg) = (ctx.map, ctx.cfg);
    let start = ctx.grounded.start;
    let entry = doorways_of(map, room, start.xy())
        .first()
        .map(|d| d.reference_point)
        .unwrap_or(start.xy());
    let inward = if entry.dist(room.reference_point) > 1e-9 {
        entry.bearing_to(room.reference_point)
    } else {
        start.yaw()
    };
    let axis = Point2::unit_from_angle(inward);
    let depth_bands = cfg.room_depth_bands.max(1) as u32;
    let mut out = Vec::new();
    for &c in &room.footprint {
        if !reachable(ctx, c) {
            continue;
        }
        let p = map.cell_center(c);
        let v = p - entry;
        let depth = band(v.norm(), cfg.room_depth_band, depth_bands);
        let lateral = math::abs(axis.cross(v));
        for b in 0..cfg.yaw_buckets {
            let yaw = cfg.bucket_yaw(b);
            let dev = math::angle_diff(yaw, inward);
            let (class, center) = yaw_class(dev);
            out.push(RankedPose {
                cell: c,
                pose: Pose::new(p.x, p.y, yaw),
                stratum: depth * 3 + class,
                key: [quantize(math::abs(dev - center)), quantize(lateral)],
            });
        }
    }
    out
}

/// Facing class relative to a reference bearing: ahead, sideways, back.
fn yaw_class(dev: f64) -> (u32, f64) {
    if dev <= FRAC_PI_4 + 1e-12 {
        (0, 0.0)
    } else if dev <= 3.0 * FRAC_PI_4 + 1e-12 {
        (1, FRAC_PI_2)
    } else {
        (2, PI)
    }
}

fn approach_object(ctx: &FeatureContext<'_>, obj: &Landmark) -> Vec<RankedPose> {
    let (map, cfg) = (ctx.map, ctx.cfg);
    let r = obj.reference_point;
    let to_robot = ctx.grounded.start.xy() - r;
    let robot_bearing = math::atan2(to_robot.y, to_robot.x);
    let (lo, hi) = cfg.object_ring;
    let bands = bands_in(lo, hi, cfg.standoff_band);
    let mut out = Vec::new();
    for c in cells_near(ctx, r, hi) {
        let p = map.cell_center(c);
        let v = p - r;
        let d = v.norm();
        if d < lo {
            continue;
        }
        let around = math::angle_diff(math::atan2(v.y, v.x), robot_bearing);
        for (yaw, dev) in facing_yaws(cfg, p.bearing_to(r)) {
            out.push(RankedPose {
                cell: c,
                pose: Pose::new(p.x, p.y, yaw),
                stratum: band(d - lo, cfg.standoff_band, bands),
                key: [quantize(around), quantize(dev)],
            });
        }
    }
    out
}

fn navigate_unexplored(ctx: &FeatureContext<'_>) -> Vec<RankedPose> {
    let (map, cfg) = (ctx.map, ctx.cfg);
    let start = ctx.grounded.start.xy();
    let mut out = Vec::new();
    for &c in &ctx.far_region {
        let p = map.cell_center(c);
        let outward = if p.dist(start) > 1e-9 {
            start.bearing_to(p)
        } else {
            ctx.grounded.start.yaw()
        };
        for b in 0..cfg.yaw_buckets {
            let yaw = cfg.bucket_yaw(b);
            let dev = math::angle_diff(yaw, outward);
            out.push(RankedPose {
                cell: c,
                pose: Pose::new(p.x, p.y, yaw),
                stratum: yaw_class(dev).0,
                key: [quantize(-ctx.path_distance(c)), quantize(dev)],
            });
        }
    }
    out
}

fn handle_obstruction(ctx: &FeatureContext<'_>, obj: &Landmark) -> Vec<RankedPose> {
    let (map, cfg) = (ctx.map, ctx.cfg);
    let r = obj.reference_point;
    let start = ctx.grounded.start;
    let to_obj = r - start.xy();
    let axis = if to_obj.norm() > 1e-9 {
        to_obj.scale(1.0 / to_obj.norm())
    } else {
        start.heading()
    };
    let travel = math::atan2(axis.y, axis.x);
    let half = 0.5 * map.resolution() * (math::abs(axis.x) + math::abs(axis.y));
    let extent = obj
        .footprint
        .iter()
        .map(|&c| (map.cell_center(c) - r).dot(axis) + half)
        .fold(0.0, f64::max);
    let (lat_lo, lat_hi) = cfg.lateral_offset;
    let bands = bands_in(0.0, cfg.pass_distance, cfg.pass_band);
    let mut out = Vec::new();
    for c in cells_near(ctx, r, extent + cfg.pass_distance + lat_hi) {
        let v = map.cell_center(c) - r;
        let along = v.dot(axis) - extent;
        let lateral = axis.cross(v);
        if !(0.0..=cfg.pass_distance).contains(&along) || !(lat_lo..=lat_hi).contains(&math::abs(lateral)) {
            continue;
        }
        let side = if lateral > 0.0 { 0 } else { 1 };
        let p = map.cell_center(c);
        for (yaw, dev) in facing_yaws(cfg, travel) {
            out.push(RankedPose {
                cell: c,
                pose: Pose::new(p.x, p.y, yaw),
                stratum: band(along, cfg.pass_band, bands) * 2 + side,
                key: [quantize(math::abs(lateral)), quantize(dev)],
            });
        }
    }
    out
}

/// Free distance from the start along the commanded heading.
fn free_run(ctx: &FeatureContext<'_>) -> f64 {
    let g = &ctx.grounded;
    ctx.map.raycast(g.start.xy(), g.heading, ctx.map.diagonal())
}

/// A pose at the center of the cell `d` meters along the commanded heading,
/// if that cell is reachable.
fn along_heading(ctx: &FeatureContext<'_>, d: f64, yaw: f64, stratum: u32) -> Option<RankedPose> {
    let g = &ctx.grounded;
    let c = ctx
        .map
        .cell_of(g.start.xy() + Point2::unit_from_angle(g.heading).scale(d))?;
    let q = ctx.map.cell_center(c);
    reachable(ctx, c).then(|| RankedPose {
        cell: c,
        pose: Pose::new(q.x, q.y, yaw),
        stratum,
        key: [0, 0],
    })
}

fn direction_only(ctx: &FeatureContext<'_>) -> Result<Vec<RankedPose>, PlannerError> {
    let free = free_run(ctx);
    let heading = ctx.grounded.heading;
    let out: Vec<RankedPose> = ctx
        .cfg
        .direction_ladder
        .iter()
        .enumerate()
        .filter(|(_, &d)| d < free)
        .filter_map(|(i, &d)| along_heading(ctx, d, heading, i as u32))
        .collect();
    if out.is_empty() {
        return Err(PlannerError::Infeasible { max_feasible: free });
    }
    Ok(out)
}

fn displacement(ctx: &FeatureContext<'_>, distance: f64) -> Result<Vec<RankedPose>, PlannerError> {
    let free = free_run(ctx);
    let g = &ctx.grounded;
    let band = &ctx.cfg.tolerance_band;
    let shortest = band.iter().map(|f| distance * (1.0 + f)).fold(f64::INFINITY, f64::min);
    if shortest >= free {
        return Err(PlannerError::Infeasible { max_feasible: free });
    }
    let yaw = if g.kind == InstructionKind::MetricMove {
        g.start.yaw()
    } else {
        g.heading
    };
    let clip = free - 0.25 * ctx.map.resolution();
    let out: Vec<RankedPose> = band
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let d = distance * (1.0 + f);
            let d = if d < free { d } else { clip };
            (d > 0.0).then_some((i, d))
        })
        .filter_map(|(i, d)| along_heading(ctx, d, yaw, i as u32))
        .collect();
    if out.is_empty() {
        return Err(PlannerError::Infeasible { max_feasible: free });
    }
    Ok(out)
}

fn rotation(ctx: &FeatureContext<'_>, angle_deg: f64) -> Vec<RankedPose> {
    let start = ctx.grounded.start;
    let cell = ctx.map.cell_of(start.xy()).expect("checked pose");
    ctx.cfg
        .tolerance_band
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let yaw = math::wrap_angle(start.yaw() + (angle_deg * (1.0 + f)).to_radians());
            RankedPose {
                cell,
                pose: Pose::new(start.position[0], start.position[1], yaw),
                stratum: i as u32,
                key: [0, 0],
            }
        })
        .collect()
}
