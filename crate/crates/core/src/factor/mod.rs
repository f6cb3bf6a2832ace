//! Equivariant factor operations.
//!
//! Rules that look at a rooted configuration are wrapped in [`Local`], which
//! pairs the rule with the radius it reads. The rule only ever sees the
//! configuration clipped to that radius, so on the torus every derived factor
//! commutes with translation exactly.

mod encoding;
mod graph;
pub(crate) mod voronoi;

pub use encoding::{check_local_encoding, local_decode_marks, local_encode_marks, Sign};
pub use graph::{distance_r_graph, graph_from_arrow_set, nearest_neighbor_digraph, FactorGraph};
pub use voronoi::{voronoi_partition, CellGrid, VoronoiPartition};

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::geometry::{Carrier, GroupPoint};
use crate::process::{Configuration, Mark, MarkedConfiguration, RootedConfiguration};

/// Distance below which two points are treated as coinciding when checking
/// separation.
pub const SEPARATION_TOL: f64 = 1e-9;

/// A rule evaluated on rooted configurations clipped to `radius`.
#[derive(Clone, Copy)]
pub struct Local<F> {
    pub radius: f64,
    pub rule: F,
}

impl<F> Local<F> {
    pub fn new(radius: f64, rule: F) -> Self {
        Local { radius, rule }
    }

    /// Rejects radii that are not finite or, on the torus, not below `L/4`.
    pub fn check(&self, carrier: &Carrier) -> Result<()> {
        check_range(carrier, self.radius, "rule radius")
    }
}

pub(crate) fn check_range(carrier: &Carrier, r: f64, what: &str) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return usage(format!("{what} must be finite and non-negative, got {r}"));
    }
    if let Some(side) = carrier.side() {
        if r >= side / 4.0 {
            return usage(format!("{what} {r} must be below L/4 = {}", side / 4.0));
        }
    }
    Ok(())
}

/// Keeps exactly the points at distance greater than `delta` from every other point.
pub fn delta_thinning(c: &Configuration, delta: f64) -> Configuration {
    let idx = c.index();
    let keep: Vec<bool> = c
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut alone = true;
            idx.within(p, delta, |j| alone &= j == i);
            alone
        })
        .collect();
    c.select(|i| keep[i])
}

/// Keeps the points whose unit-interval mark is at most `p`.
pub fn independent_thinning(mc: &MarkedConfiguration<Mark>, p: f64) -> Result<Configuration> {
    if !(0.0..=1.0).contains(&p) {
        return usage(format!("retention probability {p} is outside [0, 1]"));
    }
    if mc.marks().iter().any(|m| !matches!(m, Mark::Unit(_))) {
        return usage("independent thinning needs unit-interval marks");
    }
    Ok(mc.retain(|m| matches!(m, Mark::Unit(u) if *u <= p)))
}

fn check_offsets(carrier: &Carrier, offsets: &[GroupPoint]) -> Result<()> {
    for f in offsets {
        carrier.check(f)?;
    }
    if !offsets.contains(&carrier.identity()) {
        return usage("offset set must contain the identity");
    }
    Ok(())
}

/// A pair of points of `c` whose `F`-translates collide, if any: points
/// `x, y` with `x f_i = y f_j` for some `f_i != f_j` in `F`.
pub fn f_separation_violation(c: &Configuration, offsets: &[GroupPoint]) -> Option<(GroupPoint, GroupPoint)> {
    let carrier = c.carrier();
    let idx = c.index();
    for x in c.points() {
        for (i, fi) in offsets.iter().enumerate() {
            for (j, fj) in offsets.iter().enumerate() {
                if i == j {
                    continue;
                }
                let probe = carrier.mul_unchecked(&carrier.mul_unchecked(x, fi), &carrier.inv_unchecked(fj));
                let mut hit = None;
                idx.within(&probe, SEPARATION_TOL, |k| {
                    hit.get_or_insert(k);
                });
                if let Some(k) = hit {
                    return Some((*x, c.points()[k]));
                }
            }
        }
    }
    None
}

/// Whether `c` and `c f` are disjoint for every non-identity `f` in `F`, and
/// more generally whether all translates `c f` for `f` in `F` are pairwise
/// disjoint.
pub fn check_f_separated(c: &Configuration, offsets: &[GroupPoint]) -> bool {
    f_separation_violation(c, offsets).is_none()
}

/// `omega F = {x f : x in omega, f in F}`.
pub fn constant_thickening(c: &Configuration, offsets: &[GroupPoint]) -> Result<Configuration> {
    let carrier = *c.carrier();
    check_offsets(&carrier, offsets)?;
    if let Some((x, y)) = f_separation_violation(c, offsets) {
        return Err(Error::Precondition(format!(
            "configuration is not F-separated: translates of {x:?} and {y:?} collide"
        )));
    }
    let mut pts = Vec::with_capacity(c.len() * offsets.len());
    for x in c.points() {
        for f in offsets {
            pts.push(carrier.mul_unchecked(x, f));
        }
    }
    Ok(Configuration::assemble(carrier, c.window().clone(), pts))
}

/// `theta^A(omega) = {x in omega : x^-1 omega in A}`.
pub fn thinning_from_set<F>(c: &Configuration, a: &Local<F>) -> Result<Configuration>
where
    F: Fn(&RootedConfiguration) -> bool,
{
    a.check(c.carrier())?;
    let idx = c.index();
    let keep: Vec<bool> = (0..c.len()).map(|i| (a.rule)(&c.view_at(i, a.radius, &idx))).collect();
    Ok(c.select(|i| keep[i]))
}

/// Marks each point `x` with `P(x^-1 omega)`.
pub fn marking_from_map<M, F>(c: &Configuration, p: &Local<F>) -> Result<MarkedConfiguration<M>>
where
    M: Clone,
    F: Fn(&RootedConfiguration) -> M,
{
    p.check(c.carrier())?;
    let idx = c.index();
    let marks = (0..c.len()).map(|i| (p.rule)(&c.view_at(i, p.radius, &idx))).collect();
    MarkedConfiguration::new(c.clone(), marks)
}

/// Colours of the input/output decomposition of a factor map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colour {
    /// Input only: removed by the map.
    Red,
    /// Output only: added by the map.
    Blue,
    /// Both input and output.
    Purple,
}

/// Overlays `c` and `phi(c)`, colouring each point by membership.
pub fn input_output_decomposition<F>(phi: F, c: &Configuration) -> MarkedConfiguration<Colour>
where
    F: Fn(&Configuration) -> Configuration,
{
    let out = phi(c);
    let mut pairs: Vec<(GroupPoint, Colour)> = c
        .points()
        .iter()
        .map(|p| {
            (
                *p,
                if out.contains_point(p) {
                    Colour::Purple
                } else {
                    Colour::Red
                },
            )
        })
        .collect();
    pairs.extend(
        out.points()
            .iter()
            .filter(|p| !c.contains_point(p))
            .map(|p| (*p, Colour::Blue)),
    );
    MarkedConfiguration::assemble(*c.carrier(), c.window().clone(), pairs)
}

/// Deletes the red points and forgets the colours.
pub fn project_decomposition(mc: &MarkedConfiguration<Colour>) -> Configuration {
    mc.retain(|m| *m != Colour::Red)
}

/// Ready-made local rules.
pub mod rules {
    use super::Local;
    use crate::process::RootedConfiguration;

    /// The root has no other point within distance `delta`.
    pub fn isolated(delta: f64) -> Local<impl Fn(&RootedConfiguration) -> bool + Copy> {
        Local::new(delta, move |v: &RootedConfiguration| v.count_within(delta) == 0)
    }

    /// At least `k` other points within distance `r` of the root.
    pub fn crowded(k: usize, r: f64) -> Local<impl Fn(&RootedConfiguration) -> bool + Copy> {
        Local::new(r, move |v: &RootedConfiguration| v.count_within(r) >= k)
    }
}
