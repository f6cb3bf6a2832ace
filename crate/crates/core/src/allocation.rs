//! Balanced allocations on a grid-discretised torus, extra head schemes and
//! the Palm mean of the Voronoi cell volume.
//!
//! Every point starts with the cells of its Voronoi region nearest to it, up
//! to its quota of `floor(cells / n)` cells; the rest of its region is left
//! unclaimed. Each round every point short of capacity applies to the nearest
//! point that still holds unclaimed cells in its region, and each such sharer
//! grants its closest applicant the unclaimed cells nearest to that
//! applicant, up to the applicant's deficit.

use std::cmp::Ordering;

use crate::error::{usage, Error, Result};
use crate::factor::voronoi::nearest_owner;
use crate::factor::CellGrid;
use crate::geometry::{Carrier, GroupPoint, Window};
use crate::palm::{mecke_reference, palm_samples, CheckParams, Core, Observations};
use crate::process::{reroot, Configuration, ProcessSpec};
use crate::report::{Criterion, StatReport};
use crate::rng::{run_trials, stream};
use crate::stats::Accumulator;

/// Owner value of a cell that belongs to no point.
pub const UNCLAIMED: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    base: Configuration,
    grid: CellGrid,
    owner: Vec<u32>,
    voronoi: Vec<u32>,
    capacity: f64,
    converged: bool,
    history: Vec<f64>,
}

impl Allocation {
    pub fn base(&self) -> &Configuration {
        &self.base
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    /// Owner of every cell, or [`UNCLAIMED`].
    pub fn owner(&self) -> &[u32] {
        &self.owner
    }

    pub fn owner_of(&self, cell: usize) -> Option<usize> {
        match self.owner[cell] {
            UNCLAIMED => None,
            o => Some(o as usize),
        }
    }

    /// Owner of `cell` in the Voronoi partition the allocation started from.
    pub fn voronoi_owner(&self, cell: usize) -> usize {
        self.voronoi[cell] as usize
    }

    /// Target volume per point, `L^d / n`.
    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Number of rounds run after the initial Voronoi step.
    pub fn rounds(&self) -> usize {
        self.history.len() - 1
    }

    /// Claimed volume after initialisation and after each round.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn cell_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.base.len()];
        for &o in &self.owner {
            if o != UNCLAIMED {
                c[o as usize] += 1;
            }
        }
        c
    }

    pub fn volumes(&self) -> Vec<f64> {
        let v = self.grid.cell_volume();
        self.cell_counts().into_iter().map(|k| k as f64 * v).collect()
    }

    pub fn unclaimed_cells(&self) -> usize {
        self.owner.iter().filter(|&&o| o == UNCLAIMED).count()
    }

    pub fn unclaimed_volume(&self) -> f64 {
        self.unclaimed_cells() as f64 * self.grid.cell_volume()
    }

    /// Largest shortfall `capacity - volume` over the points.
    pub fn max_deficit(&self) -> f64 {
        self.volumes()
            .iter()
            .map(|v| self.capacity - v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Sorts `cells` by distance of their centres from `from`, ties broken by
/// the displacement.
fn sort_by_distance(grid: &CellGrid, from: &GroupPoint, cells: &mut [u32]) {
    let carrier = grid.carrier();
    let mut keyed: Vec<(f64, u32)> = cells
        .iter()
        .map(|&c| (carrier.dist2(from, &grid.center(c as usize)), c))
        .collect();
    keyed.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| carrier.closer(from, &grid.center(a.1 as usize), &grid.center(b.1 as usize)))
    });
    for (slot, (_, c)) in cells.iter_mut().zip(keyed) {
        *slot = c;
    }
}

fn closest<'a>(
    carrier: &Carrier,
    from: &GroupPoint,
    pts: &[GroupPoint],
    candidates: impl Iterator<Item = &'a usize>,
) -> Option<usize> {
    candidates
        .copied()
        .reduce(|a, b| match carrier.closer(from, &pts[b], &pts[a]) {
            Ordering::Less => b,
            _ => a,
        })
}

/// Balanced allocation with cells of side `h`, stopping once every deficit
/// is at most `epsilon` or after `max_rounds` rounds. A point that holds its
/// full quota counts as satisfied even when the rounding shortfall, below
/// one cell, exceeds `epsilon`.
pub fn balanced_allocation(c: &Configuration, h: f64, epsilon: f64, max_rounds: usize) -> Result<Allocation> {
    balanced_allocation_with(c, h, epsilon, max_rounds, |_, _| {})
}

/// As [`balanced_allocation`], calling `observe(round, owner)` after the
/// initial step (round 0) and after every round.
pub fn balanced_allocation_with(
    c: &Configuration,
    h: f64,
    epsilon: f64,
    max_rounds: usize,
    mut observe: impl FnMut(usize, &[u32]),
) -> Result<Allocation> {
    if c.is_empty() {
        return usage("allocation of an empty configuration");
    }
    if !(epsilon > 0.0) {
        return usage("epsilon must be positive");
    }
    let grid = CellGrid::new(c.carrier(), h)?;
    let carrier = *c.carrier();
    let pts = c.points();
    let n = pts.len();
    let total = grid.len();
    let quota = total / n;
    let cell_volume = grid.cell_volume();
    let capacity = total as f64 * cell_volume / n as f64;

    let voronoi = nearest_owner(c, &grid)?;
    let mut region: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (cell, &o) in voronoi.iter().enumerate() {
        region[o as usize].push(cell as u32);
    }
    let mut owner = vec![UNCLAIMED; total];
    let mut owned = vec![0usize; n];
    // Unclaimed cells of each point's Voronoi region.
    let mut spare: Vec<Vec<u32>> = Vec::with_capacity(n);
    for (i, mut cells) in region.into_iter().enumerate() {
        sort_by_distance(&grid, &pts[i], &mut cells);
        let k = quota.min(cells.len());
        for &cell in &cells[..k] {
            owner[cell as usize] = i as u32;
        }
        owned[i] = k;
        spare.push(cells.split_off(k));
    }
    let claimed = |owned: &[usize]| owned.iter().sum::<usize>() as f64 * cell_volume;
    let mut history = vec![claimed(&owned)];
    observe(0, &owner);

    let mut converged = false;
    for round in 1..=max_rounds + 1 {
        let wanters: Vec<usize> = (0..n)
            .filter(|&i| owned[i] < quota && capacity - owned[i] as f64 * cell_volume > epsilon)
            .collect();
        if wanters.is_empty() {
            converged = true;
            break;
        }
        let sharers: Vec<usize> = (0..n).filter(|&i| !spare[i].is_empty()).collect();
        if sharers.is_empty() || round > max_rounds {
            break;
        }
        let mut applicants: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &w in &wanters {
            let s = closest(&carrier, &pts[w], pts, sharers.iter()).expect("sharers is non-empty");
            applicants[s].push(w);
        }
        for &s in &sharers {
            let Some(a) = closest(&carrier, &pts[s], pts, applicants[s].iter()) else {
                continue;
            };
            let list = &mut spare[s];
            sort_by_distance(&grid, &pts[a], list);
            let k = (quota - owned[a]).min(list.len());
            for cell in list.drain(..k) {
                owner[cell as usize] = a as u32;
            }
            owned[a] += k;
        }
        history.push(claimed(&owned));
        observe(round, &owner);
    }
    Ok(Allocation {
        base: c.clone(),
        grid,
        owner,
        voronoi,
        capacity,
        converged,
        history,
    })
}

/// The point whose allocated cell contains the identity.
pub fn extra_head_point(a: &Allocation) -> Result<GroupPoint> {
    let cell = a.grid.cell_of(&a.base.carrier().identity());
    a.owner_of(cell).map(|i| a.base.points()[i]).ok_or(Error::Unclaimed)
}

/// Grid and stopping rule of the allocations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AllocParams {
    pub divisions: usize,
    pub epsilon: f64,
    pub max_rounds: usize,
}

impl Default for AllocParams {
    fn default() -> Self {
        AllocParams {
            divisions: 128,
            epsilon: 0.01,
            max_rounds: 500,
        }
    }
}

impl AllocParams {
    pub fn side(&self, carrier: &Carrier) -> Result<f64> {
        match carrier.side() {
            Some(l) if self.divisions > 0 => Ok(l / self.divisions as f64),
            _ => usage("allocations need a torus and a positive number of divisions"),
        }
    }
}

/// Minimum fraction of configurations on which the allocation must converge.
pub const MIN_CONVERGED_FRACTION: f64 = 0.99;

/// Whether a finished allocation satisfies every post-condition: volumes at
/// most one cell above capacity, each point within `epsilon` of capacity or
/// at its full quota, unclaimed volume at most `n epsilon`, claimed volume
/// non-decreasing over rounds and every cell counted once.
pub fn allocation_post_conditions(a: &Allocation, epsilon: f64) -> bool {
    let cv = a.grid().cell_volume();
    let quota = a.grid().len() / a.base().len();
    let counts = a.cell_counts();
    counts.iter().all(|&k| {
        let v = k as f64 * cv;
        v <= a.capacity() + cv && (a.capacity() - v <= epsilon || k == quota)
    }) && a.unclaimed_volume() <= a.base().len() as f64 * epsilon
        && a.history().windows(2).all(|w| w[0] <= w[1])
        && counts.iter().sum::<usize>() + a.unclaimed_cells() == a.grid().len()
}

/// Allocates `trials` sampled configurations and reports the convergence
/// rate, the post-conditions on converged runs and the number of rounds.
pub fn check_allocations(
    spec: &ProcessSpec,
    carrier: &Carrier,
    alloc: &AllocParams,
    trials: usize,
    seed: u64,
) -> Result<Vec<StatReport>> {
    const EXP: &str = "allocation";
    spec.validate(carrier)?;
    let h = alloc.side(carrier)?;
    CellGrid::new(carrier, h)?;
    let runs = run_trials(
        trials,
        seed,
        stream::ALLOCATION,
        |_, rng| -> Result<Option<(bool, bool, usize)>> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            if c.is_empty() {
                return Ok(None);
            }
            let a = balanced_allocation(&c, h, alloc.epsilon, alloc.max_rounds)?;
            Ok(Some((
                a.converged(),
                a.converged() && allocation_post_conditions(&a, alloc.epsilon),
                a.rounds(),
            )))
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let runs: Vec<(bool, bool, usize)> = runs.into_iter().flatten().collect();
    let n = runs.len() as u64;
    let converged = runs.iter().filter(|r| r.0).count() as u64;
    let ok = runs.iter().filter(|r| r.1).count() as u64;
    let fraction = if n == 0 { 0.0 } else { converged as f64 / n as f64 };
    let mut conv = StatReport::record(EXP, "converged_fraction", fraction, 0.0, n);
    conv.pass = fraction >= MIN_CONVERGED_FRACTION;
    let mut rounds = Accumulator::new();
    for r in &runs {
        rounds.push(r.2 as f64);
    }
    let max_rounds = runs.iter().map(|r| r.2).max().unwrap_or(0);
    Ok(vec![
        conv,
        StatReport::exact(EXP, "post_conditions_on_converged", ok, converged),
        StatReport::record(EXP, "mean_rounds", rounds.mean(), rounds.mean_se(), n),
        StatReport::record(EXP, "max_rounds", max_rounds as f64, 0.0, n),
    ])
}

/// Largest acceptable fraction of resampled configurations.
pub const MAX_RETRY_RATE: f64 = 0.05;
const MAX_ATTEMPTS: usize = 100;

struct HeadDraw {
    head: Vec<f64>,
    control: Vec<f64>,
    retries: usize,
}

/// Reroots each configuration at its extra head point and compares the
/// battery with the Palm law (the Poisson reference with the root adjoined
/// for Poisson input). The same comparison for the owner of the identity's
/// Voronoi cell must be rejected.
pub fn check_extra_head(
    spec: &ProcessSpec,
    carrier: &Carrier,
    alloc: &AllocParams,
    p: &CheckParams,
) -> Result<Vec<StatReport>> {
    const EXP: &str = "extra_head";
    let r_bat = p.battery.reach();
    crate::palm::check_palm_inputs(spec, carrier, r_bat)?;
    let h = alloc.side(carrier)?;
    CellGrid::new(carrier, h)?;
    let draws = run_trials(p.trials, p.seed, stream::ALLOCATION, |_, rng| -> Result<HeadDraw> {
        for attempt in 0..MAX_ATTEMPTS {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            if c.is_empty() {
                continue;
            }
            let a = balanced_allocation(&c, h, alloc.epsilon, alloc.max_rounds)?;
            if !a.converged() {
                continue;
            }
            let Ok(x) = extra_head_point(&a) else { continue };
            let cell = a.grid().cell_of(&carrier.identity());
            let v = c.points()[a.voronoi_owner(cell)];
            let observe = |g: &GroupPoint| -> Result<Vec<f64>> { Ok(p.battery.observe(&reroot(&c, g)?.clip(r_bat))) };
            return Ok(HeadDraw {
                head: observe(&x)?,
                control: observe(&v)?,
                retries: attempt,
            });
        }
        Err(Error::InsufficientData(format!(
            "no usable allocation in {MAX_ATTEMPTS} attempts"
        )))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let reference: Observations = if matches!(spec, ProcessSpec::Poisson { .. }) {
        mecke_reference(spec.intensity(carrier), carrier, r_bat, p.trials, p.seed)?
            .iter()
            .map(|v| vec![p.battery.observe(v)])
            .collect()
    } else {
        palm_samples(spec, carrier, p.trials, r_bat, Core::Full, p.seed)?.observe(&p.battery)
    };
    let head: Observations = draws.iter().map(|d| vec![d.head.clone()]).collect();
    let control: Observations = draws.iter().map(|d| vec![d.control.clone()]).collect();
    let mut reports = p.battery.compare(EXP, &head, &reference, p.alpha);

    let retries: usize = draws.iter().map(|d| d.retries).sum();
    let rate = retries as f64 / (retries + p.trials) as f64;
    let mut r = StatReport::record(EXP, "retry_rate", rate, 0.0, (retries + p.trials) as u64);
    r.pass = rate <= MAX_RETRY_RATE;
    reports.push(if r.pass { r } else { r.with_note("retry rate above 5%") });

    let level = p.alpha / p.battery.len() as f64;
    let ctrl = p
        .battery
        .compare("extra_head_voronoi_control", &control, &reference, p.alpha);
    let (worst, p_min) = ctrl
        .iter()
        .map(|r| (r.statistic.as_str(), r.estimate))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("battery is non-empty");
    reports.push(
        StatReport::record(EXP, "voronoi_owner_control_min_p", p_min, 0.0, p.trials as u64)
            .with_criterion(Criterion::Reject { alpha: level })
            .with_note(format!("most discrepant statistic: {worst}")),
    );
    Ok(reports)
}

/// Palm mean of the volume of the root's Voronoi cell on a grid with
/// `divisions` cells per side, against `1 / intensity`.
pub fn check_voronoi_palm_volume(
    spec: &ProcessSpec,
    carrier: &Carrier,
    divisions: usize,
    p: &CheckParams,
) -> Result<StatReport> {
    crate::palm::check_palm_inputs(spec, carrier, 0.0)?;
    let grid = CellGrid::with_divisions(carrier, divisions)?;
    let per_trial = run_trials(p.trials, p.seed, stream::PALM, |_, rng| -> Result<(f64, f64)> {
        let c = spec.sample(carrier, &Window::Full, rng)?;
        let core = p.core.indices(&c)?;
        if core.is_empty() {
            return Ok((0.0, 0.0));
        }
        let owner = nearest_owner(&c, &grid)?;
        let mut counts = vec![0usize; c.len()];
        for o in owner {
            counts[o as usize] += 1;
        }
        let vol: usize = core.iter().map(|&i| counts[i]).sum();
        Ok((vol as f64 * grid.cell_volume(), core.len() as f64))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut acc = Accumulator::new();
    for (v, n) in per_trial {
        acc.push_pair(v, n);
    }
    Ok(StatReport::ratio(
        "voronoi_palm_volume",
        "mean_root_cell_volume",
        acc,
        Some(1.0 / spec.intensity(carrier)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_poisson, translate};
    use crate::report::all_pass;
    use crate::rng::trial_rng;

    fn torus() -> Carrier {
        Carrier::torus(2, 10.0).unwrap()
    }

    fn config(pts: &[[f64; 2]]) -> Configuration {
        Configuration::new(torus(), Window::Full, pts.iter().map(|p| GroupPoint::new(p)).collect()).unwrap()
    }

    #[test]
    fn singleton_owns_everything() {
        let a = balanced_allocation(&config(&[[3.0, 4.0]]), 10.0 / 64.0, 0.01, 10).unwrap();
        assert!(a.converged());
        assert_eq!(a.volumes(), vec![100.0]);
        assert_eq!(a.capacity(), 100.0);
        assert_eq!(extra_head_point(&a).unwrap(), GroupPoint::new(&[3.0, 4.0]));
    }

    #[test]
    fn antipodal_pair_is_balanced() {
        let h = 10.0 / 128.0;
        let a = balanced_allocation(&config(&[[2.5, 2.5], [7.5, 7.5]]), h, 0.01, 10).unwrap();
        assert!(a.converged());
        let v = a.volumes();
        assert_eq!(v, vec![50.0, 50.0]);
        let x = extra_head_point(&a).unwrap();
        let again = extra_head_point(&balanced_allocation(a.base(), h, 0.01, 10).unwrap()).unwrap();
        assert_eq!(x, again);
    }

    #[test]
    fn poisson_allocation_meets_post_conditions() {
        let t = torus();
        let h = 10.0 / 256.0;
        let c = sample_poisson(&t, &Window::Full, 1.0, &mut trial_rng(3, 0, 0)).unwrap();
        let mut claimed = Vec::new();
        let mut frozen = true;
        let mut prev: Option<Vec<u32>> = None;
        let a = balanced_allocation_with(&c, h, 0.01, 500, |_, owner| {
            claimed.push(owner.iter().filter(|&&o| o != UNCLAIMED).count());
            if let Some(p) = &prev {
                // Owned cells are never taken away.
                frozen &= p.iter().zip(owner).all(|(a, b)| *a == UNCLAIMED || a == b);
            }
            prev = Some(owner.to_vec());
        })
        .unwrap();
        assert!(a.converged());
        assert!(frozen);
        assert!(claimed.windows(2).all(|w| w[0] <= w[1]));
        let cv = h * h;
        for v in a.volumes() {
            assert!(v <= a.capacity() + cv);
            assert!(v >= a.capacity() - 0.01);
        }
        assert!(a.unclaimed_volume() <= c.len() as f64 * 0.01);
        assert!(a.unclaimed_volume() < 1.0);
        let counts = a.cell_counts();
        assert_eq!(counts.iter().sum::<usize>() + a.unclaimed_cells(), a.grid().len());
    }

    #[test]
    fn allocation_is_translation_equivariant() {
        let t = torus();
        let h = 10.0 / 128.0;
        let c = sample_poisson(&t, &Window::Full, 0.5, &mut trial_rng(4, 0, 0)).unwrap();
        let g = GroupPoint::new(&[17.0 * h, 101.0 * h]);
        let a = balanced_allocation(&c, h, 0.01, 500).unwrap();
        let tc = translate(&c, &g).unwrap();
        let b = balanced_allocation(&tc, h, 0.01, 500).unwrap();
        let shift = a.grid().cell_of(&g);
        let n = a.grid().per_axis();
        for cell in 0..a.grid().len() {
            let k = a.grid().cell_coords(cell);
            let s = a.grid().cell_coords(shift);
            let moved = a.grid().cell_index(&[(k[0] + s[0]) % n, (k[1] + s[1]) % n]);
            let expect = a.owner_of(cell).map(|i| t.mul(&g, &c.points()[i]).unwrap());
            assert_eq!(b.owner_of(moved).map(|i| tc.points()[i]), expect);
        }
    }

    #[test]
    fn rejects_empty_and_reports_unclaimed() {
        let t = torus();
        assert!(balanced_allocation(&Configuration::empty(t, Window::Full), 0.5, 0.01, 5).is_err());
        // Zero rounds leave the identity cell unclaimed when its Voronoi owner is full.
        let c = config(&[[4.0, 4.0], [5.5, 5.5], [5.0, 6.0], [6.0, 5.0]]);
        let a = balanced_allocation(&c, 10.0 / 64.0, 0.01, 0).unwrap();
        assert!(!a.converged());
        assert!(matches!(extra_head_point(&a), Err(Error::Unclaimed)));
    }

    #[test]
    fn extra_head_passes_and_voronoi_control_is_rejected() {
        let p = CheckParams::default().with_trials(1500).with_seed(5);
        let r = check_extra_head(
            &ProcessSpec::poisson(1.0),
            &torus(),
            &AllocParams {
                divisions: 64,
                ..Default::default()
            },
            &p,
        )
        .unwrap();
        assert!(all_pass(&r), "{r:#?}");
    }

    #[test]
    fn lattice_extra_head_is_trivial() {
        let p = CheckParams::default().with_trials(50).with_seed(6);
        let spec = ProcessSpec::Lattice { spacing: 2.0 };
        let r = check_extra_head(
            &spec,
            &torus(),
            &AllocParams {
                divisions: 64,
                ..Default::default()
            },
            &p,
        )
        .unwrap();
        assert!(r[..4].iter().all(|x| x.pass), "{r:#?}");
    }

    #[test]
    fn batch_allocations_converge() {
        let alloc = AllocParams {
            divisions: 128,
            ..Default::default()
        };
        let r = check_allocations(&ProcessSpec::poisson(1.0), &torus(), &alloc, 10, 9).unwrap();
        assert!(all_pass(&r), "{r:#?}");
        assert_eq!(r[1].n, 10);
    }

    #[test]
    fn lattice_voronoi_volume_is_exact() {
        let p = CheckParams::default().with_trials(20).with_seed(7);
        let r = check_voronoi_palm_volume(&ProcessSpec::Lattice { spacing: 2.0 }, &torus(), 320, &p).unwrap();
        assert_eq!((r.estimate, r.stderr), (4.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn poisson_voronoi_volume_is_one() {
        let p = CheckParams::default().with_trials(100).with_seed(8);
        let r = check_voronoi_palm_volume(&ProcessSpec::poisson(1.0), &torus(), 128, &p).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
