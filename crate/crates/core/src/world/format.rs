//! Line-oriented world file format.
//!
//! ```text
//! ; comment
//! world <width> <height> <resolution_m>
//! <height rows of `.` (free) / `#` (occupied), northernmost row first>
//! landmark <name> <kind> rect <x0> <y0> <x1> <y1> [ref <x_m> <y_m>]
//! landmark <name> <kind> <x>,<y> <x>,<y> ... [ref <x_m> <y_m>]
//! start <x_m> <y_m> <yaw_deg>
//! ```
//!
//! For rooms and hallways a `rect` selects the free cells inside the rectangle.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Cell, CellIndex, Landmark, LandmarkKind, LandmarkSpec, WorldError, WorldMap};
use crate::pose::Point2;

fn perr(line: usize, message: impl Into<String>) -> WorldError {
    WorldError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses world-file text into a validated map.
pub fn load_world(text: &str) -> Result<WorldMap, WorldError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split(';').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| perr(1, "missing `world` header"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "world" {
        return Err(perr(hline, "expected `world <width> <height> <resolution_m>`"));
    }
    let width: usize = parts[1]
        .parse()
        .map_err(|_| perr(hline, format!("bad width `{}`", parts[1])))?;
    let height: usize = parts[2]
        .parse()
        .map_err(|_| perr(hline, format!("bad height `{}`", parts[2])))?;
    let resolution: f64 = parts[3]
        .parse()
        .map_err(|_| perr(hline, format!("bad resolution `{}`", parts[3])))?;
    if width < 4 || height < 4 {
        return Err(WorldError::BadDimensions { width, height });
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(WorldError::BadResolution);
    }

    let mut rows: Vec<Vec<Cell>> = Vec::with_capacity(height);
    let mut last_line = hline;
    while rows.len() < height {
        let (ln, row) = lines.next().ok_or_else(|| {
            perr(
                last_line + 1,
                format!("expected {height} grid rows, found {}", rows.len()),
            )
        })?;
        last_line = ln;
        if row.len() != width {
            return Err(perr(
                ln,
                format!("grid row has {} cells, expected {width}", row.chars().count()),
            ));
        }
        let mut cells = Vec::with_capacity(width);
        for ch in row.chars() {
            cells.push(match ch {
                '.' => Cell::Free,
                '#' => Cell::Occupied,
                other => return Err(perr(ln, format!("unexpected grid character `{other}`"))),
            });
        }
        rows.push(cells);
    }
    // First row in the file is the northernmost.
    let cells: Vec<Cell> = rows.into_iter().rev().flatten().collect();

    let mut specs = Vec::new();
    let mut start = None;
    for (ln, line) in lines {
        if line.starts_with("start") {
            if start.is_some() {
                return Err(perr(ln, "duplicate `start`"));
            }
            start = Some((ln, parse_start(ln, line)?));
        } else {
            specs.push(parse_landmark(ln, line, width, height, &cells)?);
        }
    }
    let map = WorldMap::new(width, height, resolution, cells, specs)?;
    match start {
        Some((ln, [x, y, yaw])) => map
            .with_start(x, y, yaw)
            .map_err(|e| perr(ln, format!("start pose: {e}"))),
        None => Ok(map),
    }
}

fn parse_start(ln: usize, line: &str) -> Result<[f64; 3], WorldError> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "start" {
        return Err(perr(ln, "expected `start <x_m> <y_m> <yaw_deg>`"));
    }
    let mut v = [0.0; 3];
    for (slot, t) in v.iter_mut().zip(&toks[1..]) {
        *slot = t
            .parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .ok_or_else(|| perr(ln, format!("bad number `{t}`")))?;
    }
    Ok(v)
}

fn parse_landmark(
    ln: usize,
    line: &str,
    width: usize,
    height: usize,
    cells: &[Cell],
) -> Result<LandmarkSpec, WorldError> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() < 4 || toks[0] != "landmark" {
        return Err(perr(ln, "expected `landmark <name> <kind> <footprint>`"));
    }
    let name = toks[1].to_string();
    if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(perr(ln, format!("bad landmark name `{name}`")));
    }
    let kind = LandmarkKind::parse(toks[2]).ok_or_else(|| perr(ln, format!("unknown landmark kind `{}`", toks[2])))?;

    let mut rest = &toks[3..];
    let mut reference_point = None;
    if let Some(pos) = rest.iter().position(|t| *t == "ref") {
        let r = &rest[pos..];
        if r.len() != 3 {
            return Err(perr(ln, "expected `ref <x_m> <y_m>` at end of line"));
        }
        let x: f64 = r[1].parse().map_err(|_| perr(ln, "bad ref x"))?;
        let y: f64 = r[2].parse().map_err(|_| perr(ln, "bad ref y"))?;
        reference_point = Some(Point2::new(x, y));
        rest = &rest[..pos];
    }

    let num = |s: &str| -> Result<usize, WorldError> {
        s.parse::<usize>()
            .map_err(|_| perr(ln, format!("bad cell coordinate `{s}`")))
    };
    let footprint: Vec<CellIndex> = if rest.first() == Some(&"rect") {
        if rest.len() != 5 {
            return Err(perr(ln, "expected `rect <x0> <y0> <x1> <y1>`"));
        }
        let (x0, y0, x1, y1) = (num(rest[1])?, num(rest[2])?, num(rest[3])?, num(rest[4])?);
        if x0 > x1 || y0 > y1 {
            return Err(perr(ln, "rect corners out of order"));
        }
        if x1 >= width || y1 >= height {
            return Err(WorldError::LandmarkOutOfBounds(name));
        }
        let mut fp = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !kind.is_area() || cells[y * width + x] == Cell::Free {
                    fp.push((x, y));
                }
            }
        }
        fp
    } else {
        if rest.is_empty() {
            return Err(perr(ln, "missing footprint"));
        }
        rest.iter()
            .map(|t| {
                let (a, b) = t
                    .split_once(',')
                    .ok_or_else(|| perr(ln, format!("bad cell `{t}`, expected x,y")))?;
                Ok((num(a)?, num(b)?))
            })
            .collect::<Result<_, _>>()?
    };
    Ok(LandmarkSpec {
        name,
        kind,
        footprint,
        reference_point,
    })
}

impl WorldMap {
    /// Canonical text form. Loading it yields an equal map, and serializing a
    /// map twice gives identical bytes.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "world {} {} {}", self.width, self.height, self.resolution);
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                out.push(if self.is_free((x, y)) { '.' } else { '#' });
            }
            out.push('\n');
        }
        if let Some([x, y, yaw]) = self.start_spec() {
            let _ = writeln!(out, "start {x} {y} {yaw}");
        }
        // Landmarks are kept sorted by lowercase name.
        for lm in &self.landmarks {
            let _ = write!(out, "landmark {} {} {}", lm.name, lm.kind, self.footprint_text(lm));
            if lm.explicit_reference {
                let _ = write!(out, " ref {} {}", lm.reference_point.x, lm.reference_point.y);
            }
            out.push('\n');
        }
        out
    }

    fn footprint_text(&self, lm: &Landmark) -> String {
        let x0 = lm.footprint.iter().map(|c| c.0).min().unwrap_or(0);
        let x1 = lm.footprint.iter().map(|c| c.0).max().unwrap_or(0);
        let y0 = lm.footprint.iter().map(|c| c.1).min().unwrap_or(0);
        let y1 = lm.footprint.iter().map(|c| c.1).max().unwrap_or(0);
        let mut rect_cells = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !lm.kind.is_area() || self.is_free((x, y)) {
                    rect_cells.push((x, y));
                }
            }
        }
        if rect_cells == lm.footprint {
            format!("rect {x0} {y0} {x1} {y1}")
        } else {
            let parts: Vec<String> = lm.footprint.iter().map(|(x, y)| format!("{x},{y}")).collect();
            parts.join(" ")
        }
    }
}
