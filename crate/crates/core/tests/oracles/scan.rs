//! Exhaustive admissible-pose scan: every free reachable cell of the grid and
//! every yaw bucket is tested against the admissibility rules of the
//! instruction kind, and the survivors are ranked by stratum round-robin.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use super::geometry::{bellman_ford, cell_of, CellIndex};
use waypref_core::{Instruction, InstructionKind, Landmark, LandmarkKind, PlannerConfig, Point2, Pose, WorldMap};

/// A scanned pose: cell, quantized yaw, stratum and within-stratum key.
#[derive(Clone, Debug, PartialEq)]
pub struct Scanned {
    pub cell: CellIndex,
    pub yaw: i64,
    pub stratum: u32,
    pub key: [i64; 2],
}

pub fn q(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

fn wrap(a: f64) -> f64 {
    let mut r = a - TAU * ((a + PI) / TAU).floor();
    if r <= -PI {
        r += TAU;
    }
    if r > PI {
        r -= TAU;
    }
    r
}

fn diff(a: f64, b: f64) -> f64 {
    wrap(a - b).abs()
}

fn center(map: &WorldMap, c: CellIndex) -> Point2 {
    let r = map.resolution();
    Point2::new((c.0 as f64 + 0.5) * r, (c.1 as f64 + 0.5) * r)
}

fn bearing(a: Point2, b: Point2) -> f64 {
    (b.y - a.y).atan2(b.x - a.x)
}

fn dist(a: Point2, b: Point2) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

fn band(value: f64, width: f64, bands: u32) -> u32 {
    ((value / width).floor().max(0.0) as u32).min(bands - 1)
}

fn bands_in(lo: f64, hi: f64, width: f64) -> u32 {
    (((hi - lo) / width - 1e-9).floor() as u32 + 1).max(1)
}

fn facing_class(dev: f64) -> (u32, f64) {
    if dev <= FRAC_PI_4 + 1e-12 {
        (0, 0.0)
    } else if dev <= 3.0 * FRAC_PI_4 + 1e-12 {
        (1, FRAC_PI_2)
    } else {
        (2, PI)
    }
}

fn bucket_yaws(cfg: &PlannerConfig) -> Vec<f64> {
    (0..cfg.yaw_buckets)
        .map(|b| wrap(b as f64 * TAU / cfg.yaw_buckets as f64))
        .collect()
}

/// Resolves the landmark the instruction names, by exact name or by kind word
/// (nearest landmark of that kind).
fn resolve<'m>(map: &'m WorldMap, start: &Pose, name: &str) -> &'m Landmark {
    if let Some(lm) = map.landmarks().iter().find(|l| l.name.eq_ignore_ascii_case(name)) {
        return lm;
    }
    let kind = match name {
        "doorway" | "door" | "entrance" | "entryway" => LandmarkKind::Doorway,
        "room" => LandmarkKind::Room,
        _ => LandmarkKind::Hallway,
    };
    map.landmarks()
        .iter()
        .filter(|l| l.kind == kind)
        .min_by(|a, b| {
            dist(a.reference_point, start.xy())
                .total_cmp(&dist(b.reference_point, start.xy()))
                .then_with(|| a.name.cmp(&b.name))
        })
        .expect("fixture has the landmark")
}

fn heading_of(instr: &Instruction, start: &Pose) -> f64 {
    match instr.rotation_deg {
        Some(a) => wrap(start.yaw() + a.to_radians()),
        None => instr.direction.expect("directional").heading(start.yaw()),
    }
}

/// Every admissible pose for `instr` from `start`, found by scanning the grid.
pub fn scan(map: &WorldMap, cfg: &PlannerConfig, start: &Pose, instr: &Instruction) -> Vec<Scanned> {
    let s = start.xy();
    let start_cell = cell_of(map, s).expect("start inside the grid");
    let dist_field = bellman_ford(map, start_cell);
    let path = |c: CellIndex| dist_field[c.1 * map.width() + c.0];
    let cells: Vec<CellIndex> = (0..map.height())
        .flat_map(|y| (0..map.width()).map(move |x| (x, y)))
        .filter(|&c| map.is_free(c) && path(c).is_finite())
        .collect();
    let yaws = bucket_yaws(cfg);
    let tol = cfg.facing_tolerance + 1e-12;
    let mut out = Vec::new();
    let mut push = |cell: CellIndex, yaw: f64, stratum: u32, key: [i64; 2]| {
        out.push(Scanned {
            cell,
            yaw: q(wrap(yaw)),
            stratum,
            key,
        })
    };
    match instr.kind {
        InstructionKind::ApproachEntrance => {
            let door = resolve(map, start, instr.landmark.as_deref().unwrap());
            let r = door.reference_point;
            let normal = map.doorway_normal(door);
            let side = match normal {
                Some(n) if (s.x - r.x) * n.x + (s.y - r.y) * n.y < -1e-9 => -1.0,
                _ => 1.0,
            };
            let (lo, hi) = cfg.entrance_standoff;
            let bands = bands_in(lo, hi, cfg.standoff_band);
            for &c in &cells {
                let p = center(map, c);
                let (vx, vy) = (p.x - r.x, p.y - r.y);
                let d = vx.hypot(vy);
                if door.footprint.contains(&c) || d < lo || d > hi {
                    continue;
                }
                let lateral = match normal {
                    Some(n) if (vx * n.x + vy * n.y) * side <= 1e-9 => continue,
                    Some(n) => (n.x * vy - n.y * vx).abs(),
                    None => 0.0,
                };
                let to_door = bearing(p, r);
                for &yaw in &yaws {
                    let dev = diff(yaw, to_door);
                    if dev <= tol {
                        push(c, yaw, band(d - lo, cfg.standoff_band, bands), [q(lateral), q(dev)]);
                    }
                }
            }
        }
        InstructionKind::EnterRoom => {
            let room = resolve(map, start, instr.landmark.as_deref().unwrap());
            let mut doors: Vec<&Landmark> = map
                .landmarks()
                .iter()
                .filter(|d| d.kind == LandmarkKind::Doorway)
                .filter(|d| {
                    d.footprint.iter().any(|&(x, y)| {
                        [(x + 1, y), (x.wrapping_sub(1), y), (x, y + 1), (x, y.wrapping_sub(1))]
                            .iter()
                            .any(|n| room.footprint.contains(n))
                    })
                })
                .collect();
            doors.sort_by(|a, b| {
                dist(a.reference_point, s)
                    .total_cmp(&dist(b.reference_point, s))
                    .then_with(|| a.name.cmp(&b.name))
            });
            let entry = doors.first().map_or(s, |d| d.reference_point);
            let inward = if dist(entry, room.reference_point) > 1e-9 {
                bearing(entry, room.reference_point)
            } else {
                start.yaw()
            };
            let (ax, ay) = (inward.cos(), inward.sin());
            for &c in cells.iter().filter(|c| room.footprint.contains(c)) {
                let p = center(map, c);
                let (vx, vy) = (p.x - entry.x, p.y - entry.y);
                let depth = band(vx.hypot(vy), cfg.room_depth_band, cfg.room_depth_bands as u32);
                let lateral = (ax * vy - ay * vx).abs();
                for &yaw in &yaws {
                    let dev = diff(yaw, inward);
                    let (class, mid) = facing_class(dev);
                    push(c, yaw, depth * 3 + class, [q((dev - mid).abs()), q(lateral)]);
                }
            }
        }
        InstructionKind::ApproachObject => {
            let obj = resolve(map, start, instr.landmark.as_deref().unwrap());
            let r = obj.reference_point;
            let robot_bearing = bearing(r, s);
            let (lo, hi) = cfg.object_ring;
            let bands = bands_in(lo, hi, cfg.standoff_band);
            for &c in &cells {
                let p = center(map, c);
                let d = dist(p, r);
                if d < lo || d > hi {
                    continue;
                }
                let around = diff(bearing(r, p), robot_bearing);
                let to_obj = bearing(p, r);
                for &yaw in &yaws {
                    let dev = diff(yaw, to_obj);
                    if dev <= tol {
                        push(c, yaw, band(d - lo, cfg.standoff_band, bands), [q(around), q(dev)]);
                    }
                }
            }
        }
        InstructionKind::NavigateUnexplored => {
            let area = resolve(map, start, instr.landmark.as_deref().unwrap());
            let deepest = area
                .footprint
                .iter()
                .map(|&c| path(c))
                .filter(|d| d.is_finite())
                .fold(f64::NEG_INFINITY, f64::max);
            for &c in cells.iter().filter(|c| area.footprint.contains(c)) {
                if path(c) < deepest - cfg.far_region_depth {
                    continue;
                }
                let p = center(map, c);
                let outward = if dist(s, p) > 1e-9 { bearing(s, p) } else { start.yaw() };
                for &yaw in &yaws {
                    let dev = diff(yaw, outward);
                    push(c, yaw, facing_class(dev).0, [q(-path(c)), q(dev)]);
                }
            }
        }
        InstructionKind::HandleObstruction => {
            let obj = resolve(map, start, instr.landmark.as_deref().unwrap());
            let r = obj.reference_point;
            let (tx, ty) = (r.x - s.x, r.y - s.y);
            let len = tx.hypot(ty);
            let (ax, ay) = if len > 1e-9 {
                (tx / len, ty / len)
            } else {
                (start.yaw().cos(), start.yaw().sin())
            };
            let travel = ay.atan2(ax);
            let half = 0.5 * map.resolution() * (ax.abs() + ay.abs());
            let extent = obj
                .footprint
                .iter()
                .map(|&c| {
                    let p = center(map, c);
                    (p.x - r.x) * ax + (p.y - r.y) * ay + half
                })
                .fold(0.0, f64::max);
            let (lat_lo, lat_hi) = cfg.lateral_offset;
            let bands = bands_in(0.0, cfg.pass_distance, cfg.pass_band);
            for &c in &cells {
                let p = center(map, c);
                let (vx, vy) = (p.x - r.x, p.y - r.y);
                if vx.hypot(vy) > extent + cfg.pass_distance + lat_hi {
                    continue;
                }
                let along = vx * ax + vy * ay - extent;
                let lateral = ax * vy - ay * vx;
                if !(0.0..=cfg.pass_distance).contains(&along) || !(lat_lo..=lat_hi).contains(&lateral.abs()) {
                    continue;
                }
                let side = if lateral > 0.0 { 0 } else { 1 };
                for &yaw in &yaws {
                    let dev = diff(yaw, travel);
                    if dev <= tol {
                        push(
                            c,
                            yaw,
                            band(along, cfg.pass_band, bands) * 2 + side,
                            [q(lateral.abs()), q(dev)],
                        );
                    }
                }
            }
        }
        InstructionKind::DirectionOnly | InstructionKind::DirectionOrientation | InstructionKind::MetricMove => {
            let heading = heading_of(instr, start);
            if let Some(angle) = instr.rotation_deg {
                for (i, f) in cfg.tolerance_band.iter().enumerate() {
                    push(
                        start_cell,
                        start.yaw() + (angle * (1.0 + f)).to_radians(),
                        i as u32,
                        [0, 0],
                    );
                }
                return out;
            }
            let free = map.raycast(s, heading, map.diagonal());
            let (ux, uy) = (heading.cos(), heading.sin());
            let ladder: Vec<(u32, f64)> = if instr.kind == InstructionKind::DirectionOnly {
                cfg.direction_ladder
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d < free)
                    .map(|(i, &d)| (i as u32, d))
                    .collect()
            } else {
                let distance = instr.distance.unwrap();
                if cfg.tolerance_band.iter().all(|f| distance * (1.0 + f) >= free) {
                    return out;
                }
                cfg.tolerance_band
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let d = distance * (1.0 + f);
                        (i as u32, if d < free { d } else { free - 0.25 * map.resolution() })
                    })
                    .filter(|&(_, d)| d > 0.0)
                    .collect()
            };
            let yaw = if instr.kind == InstructionKind::MetricMove {
                start.yaw()
            } else {
                heading
            };
            for &c in &cells {
                for &(i, d) in &ladder {
                    if cell_of(map, Point2::new(s.x + ux * d, s.y + uy * d)) == Some(c) {
                        push(c, yaw, i, [0, 0]);
                    }
                }
            }
        }
    }
    out
}

/// Keeps the best entry per (cell, yaw), then takes the best of every stratum,
/// the second best of every stratum, and so on, up to `k`.
pub fn top_k(scanned: Vec<Scanned>, k: usize) -> Vec<(CellIndex, i64)> {
    let order = |p: &Scanned| (p.stratum, p.key, p.cell.1, p.cell.0, p.yaw);
    let mut best: BTreeMap<(CellIndex, i64), Scanned> = BTreeMap::new();
    for p in scanned {
        let slot = best.entry((p.cell, p.yaw)).or_insert_with(|| p.clone());
        if order(&p) < order(slot) {
            *slot = p;
        }
    }
    let mut strata: BTreeMap<u32, Vec<Scanned>> = BTreeMap::new();
    for p in best.into_values() {
        strata.entry(p.stratum).or_default().push(p);
    }
    for group in strata.values_mut() {
        group.sort_by_key(order);
    }
    let depth = strata.values().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::new();
    for rank in 0..depth {
        for group in strata.values() {
            if let Some(p) = group.get(rank) {
                out.push((p.cell, p.yaw));
            }
        }
    }
    out.truncate(k);
    out
}
