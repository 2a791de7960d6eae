//! Slow reference implementations of grid geometry.

use rand::Rng;
use waypref_core::{load_world, Point2, Pose, WorldMap};

pub type CellIndex = (usize, usize);

pub fn cell_of(map: &WorldMap, p: Point2) -> Option<CellIndex> {
    let r = map.resolution();
    let (fx, fy) = ((p.x / r).floor(), (p.y / r).floor());
    (fx >= 0.0 && fy >= 0.0 && (fx as usize) < map.width() && (fy as usize) < map.height())
        .then_some((fx as usize, fy as usize))
}

fn occupied(map: &WorldMap, x: i64, y: i64) -> bool {
    x < 0 || y < 0 || x as usize >= map.width() || y as usize >= map.height() || !map.is_free((x as usize, y as usize))
}

/// Single-source grid distances by Bellman-Ford relaxation over the
/// 8-connected free-cell graph; diagonal steps need both side cells free.
pub fn bellman_ford(map: &WorldMap, from: CellIndex) -> Vec<f64> {
    let (w, h) = (map.width(), map.height());
    let r = map.resolution();
    let mut edges = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if occupied(map, x, y) {
                continue;
            }
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if (dx, dy) == (0, 0) || occupied(map, x + dx, y + dy) {
                        continue;
                    }
                    let diagonal = dx != 0 && dy != 0;
                    if diagonal && (occupied(map, x + dx, y) || occupied(map, x, y + dy)) {
                        continue;
                    }
                    let cost = if diagonal { 2f64.sqrt() * r } else { r };
                    edges.push((
                        (y as usize) * w + x as usize,
                        ((y + dy) as usize) * w + (x + dx) as usize,
                        cost,
                    ));
                }
            }
        }
    }
    let mut d = vec![f64::INFINITY; w * h];
    if !map.is_free(from) {
        return d;
    }
    d[from.1 * w + from.0] = 0.0;
    for _ in 0..w * h {
        let mut changed = false;
        for &(a, b, c) in &edges {
            if d[a] + c < d[b] - 1e-12 {
                d[b] = d[a] + c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Exact grid traversal (Amanatides-Woo): distance to the first occupied or
/// out-of-grid cell along the ray, capped at `max_range`.
pub fn dda_raycast(map: &WorldMap, origin: Point2, theta: f64, max_range: f64) -> f64 {
    let r = map.resolution();
    let Some((cx, cy)) = cell_of(map, origin) else {
        return 0.0;
    };
    if !map.is_free((cx, cy)) {
        return 0.0;
    }
    let (dx, dy) = (theta.cos(), theta.sin());
    let (mut x, mut y) = (cx as i64, cy as i64);
    let step_x = if dx > 0.0 { 1 } else { -1 };
    let step_y = if dy > 0.0 { 1 } else { -1 };
    let boundary = |c: i64, step: i64| (c + if step > 0 { 1 } else { 0 }) as f64 * r;
    let mut t_x = if dx.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (boundary(x, step_x) - origin.x) / dx
    };
    let mut t_y = if dy.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (boundary(y, step_y) - origin.y) / dy
    };
    let dt_x = if dx.abs() < 1e-15 { f64::INFINITY } else { r / dx.abs() };
    let dt_y = if dy.abs() < 1e-15 { f64::INFINITY } else { r / dy.abs() };
    loop {
        let t = t_x.min(t_y);
        if t > max_range {
            return max_range;
        }
        if t_x <= t_y {
            x += step_x;
            t_x += dt_x;
        } else {
            y += step_y;
            t_y += dt_y;
        }
        if occupied(map, x, y) {
            return t.max(0.0);
        }
    }
}

/// Cells the open segment `a`-`b` passes through, in order, by exact traversal.
fn segment_cells(map: &WorldMap, a: Point2, b: Point2) -> Vec<(i64, i64)> {
    let r = map.resolution();
    let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
    let mut x = (a.x / r).floor() as i64;
    let mut y = (a.y / r).floor() as i64;
    let mut out = vec![(x, y)];
    if len == 0.0 {
        return out;
    }
    let (dx, dy) = ((b.x - a.x) / len, (b.y - a.y) / len);
    let step_x = if dx > 0.0 { 1 } else { -1 };
    let step_y = if dy > 0.0 { 1 } else { -1 };
    let boundary = |c: i64, step: i64| (c + if step > 0 { 1 } else { 0 }) as f64 * r;
    let mut t_x = if dx.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (boundary(x, step_x) - a.x) / dx
    };
    let mut t_y = if dy.abs() < 1e-15 {
        f64::INFINITY
    } else {
        (boundary(y, step_y) - a.y) / dy
    };
    let dt_x = if dx.abs() < 1e-15 { f64::INFINITY } else { r / dx.abs() };
    let dt_y = if dy.abs() < 1e-15 { f64::INFINITY } else { r / dy.abs() };
    while t_x.min(t_y) < len {
        if t_x <= t_y {
            x += step_x;
            t_x += dt_x;
        } else {
            y += step_y;
            t_y += dt_y;
        }
        out.push((x, y));
    }
    out
}

/// Visible fraction by enumerating the region: a cell counts when its center
/// is in range, inside the field of view, and the segment to it crosses only
/// free cells before reaching it.
pub fn enumerate_visible_fraction(map: &WorldMap, pose: &Pose, region: &[CellIndex], max_range: f64, fov: f64) -> f64 {
    if region.is_empty() {
        return 0.0;
    }
    let o = pose.xy();
    let yaw = pose.yaw();
    let visible = region
        .iter()
        .filter(|&&c| {
            let r = map.resolution();
            let center = Point2::new((c.0 as f64 + 0.5) * r, (c.1 as f64 + 0.5) * r);
            let (vx, vy) = (center.x - o.x, center.y - o.y);
            let d = (vx * vx + vy * vy).sqrt();
            if d > max_range {
                return false;
            }
            if d > 1e-12 {
                let mut off = vy.atan2(vx) - yaw;
                while off > std::f64::consts::PI {
                    off -= std::f64::consts::TAU;
                }
                while off < -std::f64::consts::PI {
                    off += std::f64::consts::TAU;
                }
                if off.abs() > fov / 2.0 + 1e-12 {
                    return false;
                }
            }
            let target = (c.0 as i64, c.1 as i64);
            for cell in segment_cells(map, o, center) {
                if cell == target {
                    return true;
                }
                if occupied(map, cell.0, cell.1) {
                    return false;
                }
            }
            true
        })
        .count();
    visible as f64 / region.len() as f64
}

/// A random map of at most 20x20 cells with walls on the border and
/// scattered obstacles inside.
pub fn random_map(rng: &mut impl Rng) -> WorldMap {
    let w = rng.random_range(4..=20);
    let h = rng.random_range(4..=20);
    let res = [0.1, 0.25, 0.5][rng.random_range(0..3)];
    let density = rng.random_range(0.0..0.35);
    let mut text = format!("world {w} {h} {res}\n");
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            text.push(if border || rng.random_bool(density) { '#' } else { '.' });
        }
        text.push('\n');
    }
    load_world(&text).expect("generated map is valid")
}

/// A uniformly random point inside a random free cell.
pub fn random_free_pose(map: &WorldMap, rng: &mut impl Rng) -> Option<Pose> {
    let free: Vec<CellIndex> = map.free_cells().collect();
    if free.is_empty() {
        return None;
    }
    let c = free[rng.random_range(0..free.len())];
    let r = map.resolution();
    let x = (c.0 as f64 + rng.random_range(0.05..0.95)) * r;
    let y = (c.1 as f64 + rng.random_range(0.05..0.95)) * r;
    Some(Pose::new(
        x,
        y,
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    ))
}

/// A random rectangle of cells (free or not) inside the grid.
pub fn random_region(map: &WorldMap, rng: &mut impl Rng) -> Vec<CellIndex> {
    let x0 = rng.random_range(0..map.width());
    let y0 = rng.random_range(0..map.height());
    let x1 = (x0 + rng.random_range(0..5)).min(map.width() - 1);
    let y1 = (y0 + rng.random_range(0..5)).min(map.height() - 1);
    (y0..=y1).flat_map(|y| (x0..=x1).map(move |x| (x, y))).collect()
}
