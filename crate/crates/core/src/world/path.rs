//! 8-connected grid shortest paths (Dijkstra).
//!
//! Diagonal steps cost `√2·res` and may not cut a corner: both orthogonal
//! neighbours of a diagonal step must be free. Path costs are tracked as
//! integer `(straight, diagonal)` step counts so the length is computed in a
//! single expression, which keeps it exactly symmetric in its endpoints.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::SQRT_2;

use super::{CellIndex, WorldMap};
use crate::pose::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no free-cell path between the poses")]
pub struct Unreachable;

#[derive(Clone, Copy, PartialEq, Eq)]
struct Steps {
    straight: u32,
    diagonal: u32,
}

impl Steps {
    fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }
}

#[derive(PartialEq, Eq)]
struct Entry {
    steps: Steps,
    node: usize,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on path value, then node index for determinism.
        other
            .steps
            .value()
            .total_cmp(&self.steps.value())
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const MOVES: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

impl WorldMap {
    /// Path length in meters from `from` to every cell; `f64::INFINITY` for
    /// unreachable or occupied cells. Indexed `y * width + x`.
    pub fn distance_field(&self, from: CellIndex) -> Vec<f64> {
        let n = self.width * self.height;
        let mut best: Vec<Option<Steps>> = vec![None; n];
        let mut out = vec![f64::INFINITY; n];
        if !self.is_free(from) {
            return out;
        }
        let start = from.1 * self.width + from.0;
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        best[start] = Some(Steps {
            straight: 0,
            diagonal: 0,
        });
        heap.push(Entry {
            steps: Steps {
                straight: 0,
                diagonal: 0,
            },
            node: start,
        });
        while let Some(Entry { steps, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            out[node] = steps.value() * self.resolution;
            let (x, y) = ((node % self.width) as i64, (node / self.width) as i64);
            for (dx, dy) in MOVES {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx as usize >= self.width || ny as usize >= self.height {
                    continue;
                }
                let nc = (nx as usize, ny as usize);
                if !self.is_free(nc) {
                    continue;
                }
                let diag = dx != 0 && dy != 0;
                if diag
                    && !(self.is_free(((x + dx) as usize, y as usize)) && self.is_free((x as usize, (y + dy) as usize)))
                {
                    continue;
                }
                let next = if diag {
                    Steps {
                        straight: steps.straight,
                        diagonal: steps.diagonal + 1,
                    }
                } else {
                    Steps {
                        straight: steps.straight + 1,
                        diagonal: steps.diagonal,
                    }
                };
                let ni = nc.1 * self.width + nc.0;
                if done[ni] {
                    continue;
                }
                let better = match best[ni] {
                    None => true,
                    Some(old) => next.value() < old.value(),
                };
                if better {
                    best[ni] = Some(next);
                    heap.push(Entry { steps: next, node: ni });
                }
            }
        }
        out
    }

    /// Shortest 8-connected path length in meters between the cells of two poses.
    pub fn shortest_path_length(&self, from: &Pose, to: &Pose) -> Result<f64, Unreachable> {
        let a = self
            .cell_of(from.xy())
            .filter(|&c| self.is_free(c))
            .ok_or(Unreachable)?;
        let b = self.cell_of(to.xy()).filter(|&c| self.is_free(c)).ok_or(Unreachable)?;
        self.cell_path_length(a, b)
    }

    pub fn cell_path_length(&self, a: CellIndex, b: CellIndex) -> Result<f64, Unreachable> {
        if a == b && self.is_free(a) {
            return Ok(0.0);
        }
        let d = self.distance_field(a)[b.1 * self.width + b.0];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Unreachable)
        }
    }
}
