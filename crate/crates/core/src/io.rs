//! Text dumps: configurations and factor graphs as JSON lines, allocations as
//! PGM rasters with a JSON sidecar, clumpings as JSON.
//!
//! Coordinates are written with 17 significant digits, so reading a dump
//! back recovers every point bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::allocation::{Allocation, UNCLAIMED};
use crate::clumping::ClumpingSequence;
use crate::error::{usage, Error, Result};
use crate::factor::FactorGraph;
use crate::geometry::{Carrier, GroupPoint, Window};
use crate::process::{Configuration, Mark, MarkedConfiguration};

fn push_number(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("writing to a string");
}

fn push_points(out: &mut String, pts: &[GroupPoint]) {
    out.push('[');
    for (k, p) in pts.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push('[');
        for (i, &x) in p.coords().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_number(out, x);
        }
        out.push(']');
    }
    out.push(']');
}

/// One JSON object `{"carrier": .., "window": .., "points": [..], "marks": [..]}`.
pub fn configuration_json(c: &Configuration, marks: Option<&[Mark]>) -> Result<String> {
    let mut out = String::from("{\"carrier\":");
    out.push_str(&serde_json::to_string(c.carrier())?);
    out.push_str(",\"window\":");
    out.push_str(&serde_json::to_string(c.window())?);
    out.push_str(",\"points\":");
    push_points(&mut out, c.points());
    if let Some(m) = marks {
        if m.len() != c.len() {
            return usage("one mark per point is required");
        }
        out.push_str(",\"marks\":");
        out.push_str(&serde_json::to_string(m)?);
    }
    out.push('}');
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigurationRecord {
    carrier: Carrier,
    window: Window,
    points: Vec<GroupPoint>,
    #[serde(default)]
    marks: Option<Vec<Mark>>,
}

/// A configuration read back from a dump line, with its marks if present.
#[derive(Clone, Debug, PartialEq)]
pub enum Dumped {
    Plain(Configuration),
    Marked(MarkedConfiguration),
}

pub fn parse_configuration(line: &str) -> Result<Dumped> {
    let r: ConfigurationRecord = serde_json::from_str(line)?;
    r.carrier.validate()?;
    Ok(match r.marks {
        None => Dumped::Plain(Configuration::new(r.carrier, r.window, r.points)?),
        Some(m) => {
            if m.len() != r.points.len() {
                return Err(Error::Config("one mark per point is required".into()));
            }
            Dumped::Marked(MarkedConfiguration::from_pairs(
                r.carrier,
                r.window,
                r.points.into_iter().zip(m).collect(),
            )?)
        }
    })
}

pub fn write_configurations<W: Write>(mut w: W, configs: &[Configuration]) -> Result<()> {
    for c in configs {
        writeln!(w, "{}", configuration_json(c, None)?)?;
    }
    Ok(())
}

pub fn read_configurations<R: BufRead>(r: R) -> Result<Vec<Dumped>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(parse_configuration(&line)?);
        }
    }
    Ok(out)
}

/// `{"points": [..], "edges": [[i, j], ..]}` with edges in sorted order.
pub fn graph_json(g: &FactorGraph) -> String {
    let mut out = String::from("{\"points\":");
    push_points(&mut out, g.base().points());
    out.push_str(",\"edges\":[");
    for (k, (i, j)) in g.edges().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        write!(out, "[{i},{j}]").expect("writing to a string");
    }
    out.push_str("]}");
    out
}

/// Binary PGM of a planar allocation: grey level `owner + 1`, with 0 for
/// unclaimed cells. Row 0 is the top of the image, the largest second
/// coordinate.
pub fn allocation_pgm(a: &Allocation) -> Result<Vec<u8>> {
    let grid = a.grid();
    if grid.dim() != 2 {
        return usage("rasters are written for planar allocations only");
    }
    let n = grid.per_axis();
    let maxval = a.base().len().max(1);
    if maxval > u16::MAX as usize {
        return usage("too many points for a 16-bit raster");
    }
    let mut out = format!("P5\n{n} {n}\n{maxval}\n").into_bytes();
    for row in (0..n).rev() {
        for col in 0..n {
            let o = a.owner()[grid.cell_index(&[col, row])];
            let v = if o == UNCLAIMED { 0 } else { o as u16 + 1 };
            if maxval < 256 {
                out.push(v as u8);
            } else {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationSidecar {
    pub cell_side: f64,
    pub capacity: f64,
    pub converged: bool,
    pub rounds: usize,
    pub unclaimed_volume: f64,
    pub points: Vec<GroupPoint>,
    pub volumes: Vec<f64>,
}

pub fn allocation_sidecar(a: &Allocation) -> AllocationSidecar {
    AllocationSidecar {
        cell_side: a.grid().side(),
        capacity: a.capacity(),
        converged: a.converged(),
        rounds: a.rounds(),
        unclaimed_volume: a.unclaimed_volume(),
        points: a.base().points().to_vec(),
        volumes: a.volumes(),
    }
}

/// `{"levels": [[[i, ..], ..], ..]}`.
pub fn clumping_json(s: &ClumpingSequence) -> Result<String> {
    Ok(serde_json::to_string(&serde_json::json!({ "levels": s.levels() }))?)
}

/// Levels of a clumping dump.
pub fn parse_clumping_levels(text: &str) -> Result<Vec<Vec<Vec<usize>>>> {
    let v: Value = serde_json::from_str(text)?;
    let levels = v
        .get("levels")
        .ok_or_else(|| Error::Config("missing \"levels\"".into()))?;
    Ok(serde_json::from_value(levels.clone())?)
}
