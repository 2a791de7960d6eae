//! Raycasting and line-of-sight.
//!
//! Rays are marched at quarter-cell steps; once a sample lands in an occupied
//! (or out-of-grid) cell, the exact entry distance into that cell is returned.
//! A step that changes both cell coordinates also tests the corner cell the
//! ray clipped between the two samples.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use super::{CellIndex, WorldMap};
use crate::math;
use crate::pose::{Point2, Pose};

impl WorldMap {
    /// Free distance from `origin` along `theta`, clipped to `[0, max_range]`.
    pub fn raycast(&self, origin: Point2, theta: f64, max_range: f64) -> f64 {
        if !self.is_free_point(origin) {
            return 0.0;
        }
        let dir = Point2::unit_from_angle(theta);
        let step = 0.25 * self.resolution;
        let mut prev = self.cell_of(origin).expect("free point is in the grid");
        let mut i = 1u64;
        loop {
            let t = i as f64 * step;
            let p = origin + dir.scale(t.min(max_range));
            let next = self.cell_of(p);
            if let Some(hit) = next.and_then(|n| self.clipped_corner(origin, dir, prev, n)) {
                return hit.clamp(0.0, max_range);
            }
            if t > max_range {
                return max_range;
            }
            match next {
                Some(c) if self.is_free(c) => prev = c,
                Some(c) => {
                    return self.cell_entry(origin, dir, c).unwrap_or(t).clamp(0.0, max_range);
                }
                None => {
                    return self.grid_exit(origin, dir).clamp(0.0, max_range);
                }
            }
            i += 1;
        }
    }

    /// Entry distance into an occupied cell the ray crossed diagonally
    /// between sample cells `prev` and `next`.
    fn clipped_corner(&self, origin: Point2, dir: Point2, prev: CellIndex, next: CellIndex) -> Option<f64> {
        if prev.0 == next.0 || prev.1 == next.1 {
            return None;
        }
        [(next.0, prev.1), (prev.0, next.1)]
            .into_iter()
            .filter(|&c| !self.is_free(c))
            .filter_map(|c| self.cell_span(origin, dir, c))
            .filter(|(t_in, t_out)| t_out - t_in > 1e-12)
            .map(|(t_in, _)| t_in.max(0.0))
            .reduce(f64::min)
    }

    /// Distances along `n_rays` evenly spaced rays; ray 0 points along the pose's yaw.
    pub fn raycast_profile(&self, pose: &Pose, n_rays: usize, max_range: f64) -> Vec<f64> {
        let origin = pose.xy();
        let yaw = pose.yaw();
        (0..n_rays)
            .map(|k| self.raycast(origin, yaw + TAU * k as f64 / n_rays as f64, max_range))
            .collect()
    }

    /// Parametric distance at which the ray enters the cell's square.
    fn cell_entry(&self, origin: Point2, dir: Point2, c: CellIndex) -> Option<f64> {
        self.cell_span(origin, dir, c).map(|(t_in, _)| t_in.max(0.0))
    }

    /// Parametric interval the line spends inside the cell's square.
    fn cell_span(&self, origin: Point2, dir: Point2, c: CellIndex) -> Option<(f64, f64)> {
        let r = self.resolution;
        let (lo_x, hi_x) = (c.0 as f64 * r, (c.0 + 1) as f64 * r);
        let (lo_y, hi_y) = (c.1 as f64 * r, (c.1 + 1) as f64 * r);
        let (tx0, tx1) = slab(origin.x, dir.x, lo_x, hi_x)?;
        let (ty0, ty1) = slab(origin.y, dir.y, lo_y, hi_y)?;
        let t_in = tx0.max(ty0);
        let t_out = tx1.min(ty1);
        (t_in <= t_out).then_some((t_in, t_out))
    }

    /// Distance at which the ray leaves the grid rectangle.
    fn grid_exit(&self, origin: Point2, dir: Point2) -> f64 {
        let w = self.width as f64 * self.resolution;
        let h = self.height as f64 * self.resolution;
        let tx = slab(origin.x, dir.x, 0.0, w).map_or(f64::INFINITY, |s| s.1);
        let ty = slab(origin.y, dir.y, 0.0, h).map_or(f64::INFINITY, |s| s.1);
        tx.min(ty)
    }

    /// Whether the segment from `from` to the center of `target` crosses no
    /// occupied or out-of-grid cell other than `target` itself.
    pub fn line_of_sight(&self, from: Point2, target: CellIndex) -> bool {
        let to = self.cell_center(target);
        let d = from.dist(to);
        if d == 0.0 {
            return true;
        }
        let dir = (to - from).scale(1.0 / d);
        let step = 0.25 * self.resolution;
        let n = math::floor(d / step) as u64;
        let mut prev: Option<CellIndex> = None;
        for i in 0..=n {
            let p = from + dir.scale(i as f64 * step);
            let c = self.cell_of(p);
            if let (Some(a), Some(b)) = (prev, c) {
                if self.clipped_corner(from, dir, a, b).is_some() {
                    return false;
                }
            }
            match c {
                Some(c) if c == target => return true,
                Some(c) if self.is_free(c) => prev = Some(c),
                _ => return false,
            }
        }
        true
    }

    /// Fraction of `region` cells whose centers are within `max_range`, inside
    /// the `fov` cone around the pose's heading, and in line of sight.
    pub fn visible_fraction(&self, pose: &Pose, region: &[CellIndex], max_range: f64, fov: f64) -> f64 {
        if region.is_empty() {
            return 0.0;
        }
        let origin = pose.xy();
        let yaw = pose.yaw();
        let half = 0.5 * fov;
        let visible = region
            .iter()
            .filter(|&&c| {
                let center = self.cell_center(c);
                let d = origin.dist(center);
                if d > max_range {
                    return false;
                }
                if d > 1e-12 && math::angle_diff(origin.bearing_to(center), yaw) > half + 1e-12 {
                    return false;
                }
                self.line_of_sight(origin, c)
            })
            .count();
        visible as f64 / region.len() as f64
    }
}

/// Entry/exit parameters of a ray against one axis-aligned slab.
fn slab(o: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d.abs() < 1e-15 {
        if o >= lo && o <= hi {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let a = (lo - o) / d;
        let b = (hi - o) / d;
        Some((a.min(b), a.max(b)))
    }
}
