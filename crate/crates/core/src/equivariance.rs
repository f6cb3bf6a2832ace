//! Randomised check that factor operations commute with torus translation.
//!
//! Each trial draws a configuration and a translation `g` and compares
//! `op(g . omega)` with `g . op(omega)` for equality of every coordinate.
//! Grid-based operations use translations by whole cells.

use rand::Rng;

use crate::allocation::balanced_allocation;
use crate::clumping::build_clumping;
use crate::error::{usage, Result};
use crate::factor::{
    constant_thickening, delta_thinning, distance_r_graph, independent_thinning, input_output_decomposition,
    local_decode_marks, local_encode_marks, marking_from_map, nearest_neighbor_digraph, rules, thinning_from_set,
    voronoi_partition, CellGrid, Sign,
};
use crate::geometry::{Carrier, GroupPoint, Window, MAX_DIM};
use crate::process::{attach_iid_marks, translate, Configuration, MarkSpace, MarkedConfiguration, ProcessSpec};
use crate::report::StatReport;
use crate::rng::{run_trials, stream};

/// Names of the operations, in report order.
pub const OPERATIONS: [&str; 13] = [
    "translation_action",
    "delta_thinning",
    "independent_thinning",
    "constant_thickening",
    "thinning_from_set",
    "marking_from_map",
    "input_output_decomposition",
    "distance_r_graph",
    "nearest_neighbor_digraph",
    "voronoi_partition",
    "balanced_allocation",
    "local_mark_encoding",
    "clumping_partitions",
];

const DELTA: f64 = 0.5;
const GRID_DIVISIONS: usize = 64;

fn cell_translation<R: Rng + ?Sized>(carrier: &Carrier, grid: &CellGrid, rng: &mut R) -> GroupPoint {
    let mut c = [0.0; MAX_DIM];
    for x in c.iter_mut().take(carrier.dim()) {
        *x = rng.random_range(0..grid.per_axis()) as f64 * grid.side();
    }
    GroupPoint::new(&c[..carrier.dim()])
}

fn shifted_cell(grid: &CellGrid, cell: usize, by: usize) -> usize {
    let (a, b) = (grid.cell_coords(cell), grid.cell_coords(by));
    let n = grid.per_axis();
    let k: Vec<usize> = (0..grid.dim()).map(|i| (a[i] + b[i]) % n).collect();
    grid.cell_index(&k)
}

/// Owner point of each cell, moved by `g`, indexed by the moved cell.
fn moved_owners(
    carrier: &Carrier,
    grid: &CellGrid,
    pts: &[GroupPoint],
    owner: impl Fn(usize) -> Option<usize>,
    g: &GroupPoint,
) -> Vec<Option<GroupPoint>> {
    let by = grid.cell_of(g);
    let mut out = vec![None; grid.len()];
    for cell in 0..grid.len() {
        out[shifted_cell(grid, cell, by)] = owner(cell).map(|i| carrier.mul_unchecked(g, &pts[i]));
    }
    out
}

fn point_partitions(
    levels: Vec<Vec<Vec<GroupPoint>>>,
    carrier: &Carrier,
    g: Option<&GroupPoint>,
) -> Vec<Vec<Vec<GroupPoint>>> {
    levels
        .into_iter()
        .map(|level| {
            let mut level: Vec<Vec<GroupPoint>> = level
                .into_iter()
                .map(|class| {
                    let mut v: Vec<GroupPoint> = class
                        .iter()
                        .map(|p| g.map_or(*p, |g| carrier.mul_unchecked(g, p)))
                        .collect();
                    v.sort_by(GroupPoint::lex_cmp);
                    v
                })
                .collect();
            level.sort_by(|a, b| a[0].lex_cmp(&b[0]));
            level
        })
        .collect()
}

fn run_one<R: Rng + ?Sized>(spec: &ProcessSpec, carrier: &Carrier, rng: &mut R) -> Result<Vec<bool>> {
    let c = spec.sample(carrier, &Window::Full, rng)?;
    let g = carrier.canonicalize(&crate::geometry::sample_uniform(carrier, &Window::Full, rng)?);
    let h = carrier.canonicalize(&crate::geometry::sample_uniform(carrier, &Window::Full, rng)?);
    let gc = translate(&c, &g)?;
    let mut ok = Vec::with_capacity(OPERATIONS.len());

    ok.push(translate(&gc, &h)? == translate(&c, &carrier.mul(&h, &g)?)?);
    ok.push(delta_thinning(&gc, DELTA) == translate(&delta_thinning(&c, DELTA), &g)?);

    let marked = attach_iid_marks(&c, &MarkSpace::UnitInterval, rng)?;
    ok.push(independent_thinning(&marked.translate(&g)?, 0.5)? == translate(&independent_thinning(&marked, 0.5)?, &g)?);

    let sep = delta_thinning(&c, DELTA);
    let offsets = [
        carrier.identity(),
        carrier.canonicalize(&GroupPoint::new(&{
            let mut f = vec![0.0; carrier.dim()];
            f[0] = 0.125;
            f
        })),
    ];
    ok.push(
        constant_thickening(&translate(&sep, &g)?, &offsets)? == translate(&constant_thickening(&sep, &offsets)?, &g)?,
    );

    let a = rules::isolated(DELTA);
    ok.push(thinning_from_set(&gc, &a)? == translate(&thinning_from_set(&c, &a)?, &g)?);
    let p = rules::crowded(2, 0.8);
    ok.push(marking_from_map(&gc, &p)? == marking_from_map(&c, &p)?.translate(&g)?);
    let phi = |x: &Configuration| delta_thinning(x, DELTA);
    ok.push(input_output_decomposition(phi, &gc) == input_output_decomposition(phi, &c).translate(&g)?);

    ok.push(distance_r_graph(&gc, 1.0)? == distance_r_graph(&c, 1.0)?.translate(&g)?);
    ok.push(nearest_neighbor_digraph(&gc)? == nearest_neighbor_digraph(&c)?.translate(&g)?);

    let grid = CellGrid::with_divisions(carrier, GRID_DIVISIONS)?;
    let gg = cell_translation(carrier, &grid, rng);
    let cg = translate(&c, &gg)?;
    if c.is_empty() {
        ok.extend([true, true]);
    } else {
        let v = voronoi_partition(&c, grid.side())?;
        let tv = voronoi_partition(&cg, grid.side())?;
        let expect = moved_owners(carrier, &grid, c.points(), |k| Some(v.owner()[k] as usize), &gg);
        ok.push((0..grid.len()).all(|k| Some(cg.points()[tv.owner()[k] as usize]) == expect[k]));
        let al = balanced_allocation(&c, grid.side(), 0.01, 500)?;
        let tal = balanced_allocation(&cg, grid.side(), 0.01, 500)?;
        let expect = moved_owners(carrier, &grid, c.points(), |k| al.owner_of(k), &gg);
        ok.push((0..grid.len()).all(|k| tal.owner_of(k).map(|i| cg.points()[i]) == expect[k]));
    }

    if carrier.dim() == 2 {
        let signs: Vec<Sign> = (0..sep.len())
            .map(|_| if rng.random::<bool>() { Sign::Plus } else { Sign::Minus })
            .collect();
        let mc = MarkedConfiguration::new(sep.clone(), signs)?;
        let enc = local_encode_marks(&mc, DELTA)?;
        let tenc = local_encode_marks(&mc.translate(&g)?, DELTA)?;
        ok.push(tenc == translate(&enc, &g)? && local_decode_marks(&tenc, DELTA)? == mc.translate(&g)?);
    } else {
        ok.push(true);
    }

    if c.is_empty() {
        ok.push(true);
    } else {
        let s = build_clumping(&c, 64)?;
        let ts = build_clumping(&gc, 64)?;
        ok.push(
            point_partitions(s.point_partitions(), carrier, Some(&g))
                == point_partitions(ts.point_partitions(), carrier, None),
        );
    }
    Ok(ok)
}

/// One exact report per operation over `trials` random pairs `(omega, g)`.
pub fn check_equivariance(spec: &ProcessSpec, carrier: &Carrier, trials: usize, seed: u64) -> Result<Vec<StatReport>> {
    if !carrier.is_torus() {
        return usage("the equivariance suite runs on the torus");
    }
    spec.validate(carrier)?;
    let per_trial = run_trials(trials, seed, stream::CONTROL, |_, rng| run_one(spec, carrier, rng))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(OPERATIONS
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let matched = per_trial.iter().filter(|r| r[k]).count() as u64;
            StatReport::exact("equivariance", name, matched, trials as u64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::all_pass;

    #[test]
    fn all_operations_commute_with_translation() {
        let t = Carrier::torus(2, 10.0).unwrap();
        let r = check_equivariance(&ProcessSpec::poisson(0.5), &t, 20, 1).unwrap();
        assert_eq!(r.len(), OPERATIONS.len());
        assert!(all_pass(&r), "{r:#?}");
    }

    #[test]
    fn one_dimensional_torus() {
        let t = Carrier::torus(1, 10.0).unwrap();
        let r = check_equivariance(&ProcessSpec::poisson(2.0), &t, 20, 2).unwrap();
        assert!(all_pass(&r), "{r:#?}");
    }
}
