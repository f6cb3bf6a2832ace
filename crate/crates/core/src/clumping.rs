//! One-ended clumpings by iterated nearest-cluster merging, and the directed
//! line read off from them.
//!
//! Level 0 is the partition into singletons. At each level every cluster
//! selects its nearest other cluster (single linkage), and clusters joined by
//! selections form the classes of the next level, so the number of classes at
//! least halves until one remains.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::factor::FactorGraph;
use crate::geometry::{lex_cmp_slices, Carrier, GroupPoint, Window};
use crate::process::{Configuration, ProcessSpec};
use crate::report::StatReport;
use crate::rng::{run_trials, stream};
use crate::stats::Accumulator;

/// A class of a partition: sorted point indices.
pub type Class = Vec<usize>;

#[derive(Clone, Debug, PartialEq)]
pub struct ClumpingSequence {
    base: Configuration,
    levels: Vec<Vec<Class>>,
}

impl ClumpingSequence {
    /// Wraps arbitrary levels without checking them; see [`verify_clumping`].
    pub fn from_levels(base: Configuration, levels: Vec<Vec<Class>>) -> ClumpingSequence {
        ClumpingSequence { base, levels }
    }

    pub fn base(&self) -> &Configuration {
        &self.base
    }

    pub fn levels(&self) -> &[Vec<Class>] {
        &self.levels
    }

    /// Lexicographically smallest point of each class of `level`.
    pub fn representatives(&self, level: usize) -> Vec<GroupPoint> {
        self.levels[level]
            .iter()
            .map(|c| representative(&self.base, c))
            .collect()
    }

    /// Partition of each level as sets of points, independent of indexing.
    pub fn point_partitions(&self) -> Vec<Vec<Vec<GroupPoint>>> {
        self.levels
            .iter()
            .map(|level| {
                let mut classes: Vec<Vec<GroupPoint>> = level
                    .iter()
                    .map(|c| {
                        let mut pts: Vec<GroupPoint> = c.iter().map(|&i| self.base.points()[i]).collect();
                        pts.sort_by(GroupPoint::lex_cmp);
                        pts
                    })
                    .collect();
                classes.sort_by(|a, b| a[0].lex_cmp(&b[0]));
                classes
            })
            .collect()
    }
}

fn representative(base: &Configuration, class: &[usize]) -> GroupPoint {
    class
        .iter()
        .map(|&i| base.points()[i])
        .min_by(GroupPoint::lex_cmp)
        .expect("classes are non-empty")
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Orders candidate links `(from, to)` by distance, then by the displacement
/// from `from`, then by the position of `from`.
fn link_cmp(carrier: &Carrier, pts: &[GroupPoint], a: (usize, usize), b: (usize, usize)) -> Ordering {
    carrier
        .dist2(&pts[a.0], &pts[a.1])
        .total_cmp(&carrier.dist2(&pts[b.0], &pts[b.1]))
        .then_with(|| {
            lex_cmp_slices(
                &carrier.displacement(&pts[a.0], &pts[a.1]),
                &carrier.displacement(&pts[b.0], &pts[b.1]),
            )
        })
        .then_with(|| pts[a.0].lex_cmp(&pts[b.0]))
}

/// Builds levels until a single class remains or `max_levels` merges are done.
pub fn build_clumping(c: &Configuration, max_levels: usize) -> Result<ClumpingSequence> {
    if c.is_empty() {
        return usage("clumping of an empty configuration");
    }
    if !c.carrier().is_torus() {
        return usage("clumpings are built on the torus");
    }
    let carrier = *c.carrier();
    let pts = c.points();
    let n = pts.len();
    let mut label: Vec<usize> = (0..n).collect();
    let mut levels = vec![(0..n).map(|i| vec![i]).collect::<Vec<Class>>()];
    while levels.last().map_or(0, Vec::len) > 1 && levels.len() <= max_levels {
        let classes = levels.last().expect("at least one level");
        // Nearest outside point of every cluster, by brute force over pairs.
        let mut best: Vec<Option<(usize, usize)>> = vec![None; classes.len()];
        for i in 0..n {
            for j in 0..n {
                if label[i] == label[j] {
                    continue;
                }
                let slot = &mut best[label[i]];
                if slot.is_none_or(|b| link_cmp(&carrier, pts, (i, j), b) == Ordering::Less) {
                    *slot = Some((i, j));
                }
            }
        }
        let mut parent: Vec<usize> = (0..classes.len()).collect();
        for (k, link) in best.iter().enumerate() {
            let (_, j) = link.expect("more than one class");
            let (a, b) = (find(&mut parent, k), find(&mut parent, label[j]));
            parent[a.max(b)] = a.min(b);
        }
        let mut next: Vec<Class> = Vec::new();
        let mut slot = vec![usize::MAX; classes.len()];
        for k in 0..classes.len() {
            let root = find(&mut parent, k);
            if slot[root] == usize::MAX {
                slot[root] = next.len();
                next.push(Vec::new());
            }
            next[slot[root]].extend_from_slice(&classes[k]);
        }
        for class in next.iter_mut() {
            class.sort_unstable();
        }
        next.sort();
        for (k, class) in next.iter().enumerate() {
            for &i in class {
                label[i] = k;
            }
        }
        levels.push(next);
    }
    Ok(ClumpingSequence {
        base: c.clone(),
        levels,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    Partitions,
    Ascending,
    OneEnded,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axiom::Partitions => "partitions",
            Axiom::Ascending => "ascending",
            Axiom::OneEnded => "one_ended",
        })
    }
}

/// A failed axiom with a pair of point indices witnessing it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub axiom: Axiom,
    pub level: usize,
    pub witness: (usize, usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} fails at level {} for points {:?}",
            self.axiom, self.level, self.witness
        )
    }
}

/// Outcome of [`verify_clumping`]: the first violation of each axiom.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClumpingVerdict {
    pub violations: Vec<Violation>,
}

impl ClumpingVerdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn failed(&self, axiom: Axiom) -> Option<&Violation> {
        self.violations.iter().find(|v| v.axiom == axiom)
    }
}

fn labels(level: &[Class], n: usize) -> std::result::Result<Vec<usize>, (usize, usize)> {
    let mut label = vec![usize::MAX; n];
    for (k, class) in level.iter().enumerate() {
        for &i in class {
            if i >= n || label[i] != usize::MAX {
                return Err((i, i));
            }
            label[i] = k;
        }
    }
    match label.iter().position(|&l| l == usize::MAX) {
        Some(i) => Err((i, i)),
        None => Ok(label),
    }
}

/// Checks that every level partitions the points with level 0 the
/// singletons, that each level coarsens the previous one, and that every
/// pair of points shares a class at the last level.
pub fn verify_clumping(s: &ClumpingSequence) -> ClumpingVerdict {
    let n = s.base.len();
    let mut verdict = ClumpingVerdict::default();
    let mut add = |v: Violation| {
        if verdict.failed(v.axiom).is_none() {
            verdict.violations.push(v);
        }
    };
    if n == 0 {
        return verdict;
    }
    let mut all = Vec::with_capacity(s.levels.len());
    for (l, level) in s.levels.iter().enumerate() {
        match labels(level, n) {
            Ok(lab) => all.push(Some(lab)),
            Err(w) => {
                add(Violation {
                    axiom: Axiom::Partitions,
                    level: l,
                    witness: w,
                });
                all.push(None);
            }
        }
    }
    match s.levels.first() {
        None => add(Violation {
            axiom: Axiom::Partitions,
            level: 0,
            witness: (0, 0),
        }),
        Some(first) => {
            if let Some(c) = first.iter().find(|c| c.len() > 1) {
                add(Violation {
                    axiom: Axiom::Partitions,
                    level: 0,
                    witness: (c[0], c[1]),
                });
            }
        }
    }
    for l in 1..all.len() {
        let (Some(prev), Some(cur)) = (&all[l - 1], &all[l]) else {
            continue;
        };
        let mut first_of = vec![usize::MAX; s.levels[l - 1].len()];
        for i in 0..n {
            let f = &mut first_of[prev[i]];
            if *f == usize::MAX {
                *f = i;
            } else if cur[*f] != cur[i] {
                add(Violation {
                    axiom: Axiom::Ascending,
                    level: l,
                    witness: (*f, i),
                });
                break;
            }
        }
    }
    match all.last() {
        Some(Some(last)) => {
            if let Some(j) = (1..n).find(|&j| last[j] != last[0]) {
                add(Violation {
                    axiom: Axiom::OneEnded,
                    level: all.len() - 1,
                    witness: (0, j),
                });
            }
        }
        _ => add(Violation {
            axiom: Axiom::OneEnded,
            level: all.len().saturating_sub(1),
            witness: (0, 0),
        }),
    }
    verdict
}

/// Directed Hamiltonian path through the points: orders are concatenated
/// along the merges, children in lexicographic order of their representatives.
pub fn z_line_factor(s: &ClumpingSequence) -> Result<FactorGraph> {
    let n = s.base.len();
    if s.levels.last().map(Vec::len) != Some(1) || !verify_clumping(s).passed() {
        return usage("the clumping must be valid and end in a single class");
    }
    let mut orders: Vec<Vec<usize>> = s.levels[0].clone();
    for l in 1..s.levels.len() {
        let reps = s.representatives(l - 1);
        let mut child_of = vec![0; n];
        for (k, class) in s.levels[l - 1].iter().enumerate() {
            for &i in class {
                child_of[i] = k;
            }
        }
        let mut next = Vec::with_capacity(s.levels[l].len());
        for class in &s.levels[l] {
            let mut children: Vec<usize> = class.iter().map(|&i| child_of[i]).collect();
            children.sort_unstable();
            children.dedup();
            children.sort_by(|a, b| reps[*a].lex_cmp(&reps[*b]));
            next.push(children.iter().flat_map(|&k| orders[k].iter().copied()).collect());
        }
        orders = next;
    }
    let line = &orders[0];
    FactorGraph::new(s.base.clone(), line.windows(2).map(|w| (w[0], w[1])).collect())
}

/// The path of a z-line as a sequence of point indices, source first.
pub fn line_order(g: &FactorGraph) -> Option<Vec<usize>> {
    let n = g.base().len();
    if n == 0 || g.edges().len() != n - 1 {
        return None;
    }
    let mut next = vec![usize::MAX; n];
    let mut indeg = vec![0; n];
    for &(a, b) in g.edges() {
        if next[a] != usize::MAX {
            return None;
        }
        next[a] = b;
        indeg[b] += 1;
    }
    let start = (0..n).find(|&i| indeg[i] == 0)?;
    let mut order = vec![start];
    while order.len() < n {
        let nx = next[*order.last().expect("non-empty")];
        if nx == usize::MAX || indeg[nx] != 1 {
            return None;
        }
        order.push(nx);
    }
    Some(order)
}

/// Axioms held, z-line locality and depth of one trial.
type TrialRow = ([bool; 3], bool, usize);

/// Builds clumpings of `trials` sampled configurations and reports how many
/// satisfy each axiom, how many give a Hamiltonian line with every class
/// contiguous along it, and the number of levels.
pub fn check_clumpings(
    spec: &ProcessSpec,
    carrier: &Carrier,
    max_levels: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<StatReport>> {
    const EXP: &str = "clumping";
    spec.validate(carrier)?;
    let runs = run_trials(trials, seed, stream::AUX, |_, rng| -> Result<Option<TrialRow>> {
        let c = spec.sample(carrier, &Window::Full, rng)?;
        if c.is_empty() {
            return Ok(None);
        }
        let s = build_clumping(&c, max_levels)?;
        let v = verify_clumping(&s);
        let axioms = [Axiom::Partitions, Axiom::Ascending, Axiom::OneEnded].map(|a| v.failed(a).is_none());
        let line = z_line_factor(&s).ok().is_some_and(|g| is_clump_local_line(&s, &g));
        Ok(Some((axioms, line, s.levels().len() - 1)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let runs: Vec<_> = runs.into_iter().flatten().collect();
    let n = runs.len() as u64;
    let count = |f: &dyn Fn(&TrialRow) -> bool| runs.iter().filter(|r| f(r)).count() as u64;
    let mut levels = Accumulator::new();
    for r in &runs {
        levels.push(r.2 as f64);
    }
    Ok(vec![
        StatReport::exact(EXP, "axiom_partitions", count(&|r| r.0[0]), n),
        StatReport::exact(EXP, "axiom_ascending", count(&|r| r.0[1]), n),
        StatReport::exact(EXP, "axiom_one_ended", count(&|r| r.0[2]), n),
        StatReport::exact(EXP, "z_line_hamiltonian_and_clump_local", count(&|r| r.1), n),
        StatReport::record(EXP, "mean_levels", levels.mean(), levels.mean_se(), n),
        StatReport::record(
            EXP,
            "max_levels",
            runs.iter().map(|r| r.2).max().unwrap_or(0) as f64,
            0.0,
            n,
        ),
    ])
}

/// The graph is a simple directed path through every point (`n - 1` edges,
/// one source, one sink) and every class of every level is contiguous on it.
pub fn is_clump_local_line(s: &ClumpingSequence, g: &FactorGraph) -> bool {
    let Some(order) = line_order(g) else { return false };
    let (ind, outd) = (g.in_degrees(), g.out_degrees());
    let n = order.len();
    if n > 1 && (ind.iter().filter(|&&d| d == 0).count() != 1 || outd.iter().filter(|&&d| d == 0).count() != 1) {
        return false;
    }
    let mut pos = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k;
    }
    s.levels().iter().flatten().all(|class| {
        let lo = class.iter().map(|&i| pos[i]).min().unwrap_or(0);
        let hi = class.iter().map(|&i| pos[i]).max().unwrap_or(0);
        hi - lo + 1 == class.len()
    })
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
    fn two_points_merge_at_level_one() {
        let s = build_clumping(&config(&[[1.0, 1.0], [3.0, 1.0]]), 10).unwrap();
        assert_eq!(s.levels(), &[vec![vec![0], vec![1]], vec![vec![0, 1]]]);
        assert!(verify_clumping(&s).passed());
    }

    #[test]
    fn two_pairs_merge_in_two_levels() {
        let s = build_clumping(&config(&[[1.0, 1.0], [1.2, 1.0], [6.0, 6.0], [6.0, 6.3]]), 10).unwrap();
        assert_eq!(s.levels().len(), 3);
        assert_eq!(s.levels()[1], vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(s.levels()[2], vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn singleton_passes_vacuously() {
        let s = build_clumping(&config(&[[1.0, 1.0]]), 10).unwrap();
        assert_eq!(s.levels().len(), 1);
        assert!(verify_clumping(&s).passed());
        assert!(z_line_factor(&s).unwrap().edges().is_empty());
    }

    #[test]
    fn split_class_fails_ascending() {
        let c = config(&[[1.0, 1.0], [2.0, 1.0], [3.0, 1.0]]);
        let s = ClumpingSequence::from_levels(
            c,
            vec![
                vec![vec![0], vec![1], vec![2]],
                vec![vec![0, 1], vec![2]],
                vec![vec![0], vec![1, 2]],
                vec![vec![0, 1, 2]],
            ],
        );
        let v = verify_clumping(&s);
        assert_eq!(v.violations.len(), 1);
        assert_eq!(v.failed(Axiom::Ascending).unwrap().witness, (0, 1));
        assert!(z_line_factor(&s).is_err());
    }

    #[test]
    fn bad_partitions_and_disconnected_tops_fail() {
        let c = config(&[[1.0, 1.0], [2.0, 1.0], [3.0, 1.0]]);
        let s = ClumpingSequence::from_levels(c.clone(), vec![vec![vec![0], vec![1]]]);
        assert!(verify_clumping(&s).failed(Axiom::Partitions).is_some());
        let s = ClumpingSequence::from_levels(c, vec![vec![vec![0], vec![1], vec![2]], vec![vec![0, 1], vec![2]]]);
        let v = verify_clumping(&s);
        assert_eq!(v.failed(Axiom::OneEnded).unwrap().witness, (0, 2));
    }

    #[test]
    fn three_point_line() {
        let s = build_clumping(&config(&[[1.0, 1.0], [1.5, 1.0], [4.0, 1.0]]), 10).unwrap();
        let g = z_line_factor(&s).unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(line_order(&g).unwrap().len(), 3);
        assert!(g.is_weakly_connected());
    }

    #[test]
    fn poisson_clumpings_and_lines() {
        let t = torus();
        for trial in 0..20 {
            let c = sample_poisson(&t, &Window::Full, 1.0, &mut trial_rng(11, 0, trial)).unwrap();
            let s = build_clumping(&c, 64).unwrap();
            assert!(verify_clumping(&s).passed());
            for w in s.levels().windows(2) {
                assert!(w[1].len() <= w[0].len() / 2 || w[1].len() == 1);
            }
            let g = z_line_factor(&s).unwrap();
            let order = line_order(&g).unwrap();
            assert!(g.is_hamiltonian_path());
            // Every class occupies a contiguous stretch of the line.
            let mut pos = vec![0; c.len()];
            for (k, &i) in order.iter().enumerate() {
                pos[i] = k;
            }
            for level in s.levels() {
                for class in level {
                    let lo = class.iter().map(|&i| pos[i]).min().unwrap();
                    let hi = class.iter().map(|&i| pos[i]).max().unwrap();
                    assert_eq!(hi - lo + 1, class.len());
                }
            }
        }
    }

    #[test]
    fn batch_check_passes() {
        let r = check_clumpings(&ProcessSpec::poisson(1.0), &torus(), 64, 30, 13).unwrap();
        assert!(all_pass(&r), "{r:#?}");
        assert!(r[5].estimate <= 9.0);
    }

    #[test]
    fn partition_structure_is_translation_equivariant() {
        let t = torus();
        let c = sample_poisson(&t, &Window::Full, 1.0, &mut trial_rng(12, 0, 0)).unwrap();
        let g = t.canonicalize(&GroupPoint::new(&[3.7, 8.9]));
        let s = build_clumping(&c, 64).unwrap();
        let ts = build_clumping(&translate(&c, &g).unwrap(), 64).unwrap();
        let moved: Vec<Vec<Vec<GroupPoint>>> = s
            .point_partitions()
            .into_iter()
            .map(|level| {
                let mut level: Vec<Vec<GroupPoint>> = level
                    .into_iter()
                    .map(|class| {
                        let mut v: Vec<GroupPoint> = class.iter().map(|p| t.mul(&g, p).unwrap()).collect();
                        v.sort_by(GroupPoint::lex_cmp);
                        v
                    })
                    .collect();
                level.sort_by(|a, b| a[0].lex_cmp(&b[0]));
                level
            })
            .collect();
        assert_eq!(moved, ts.point_partitions());
    }
}
