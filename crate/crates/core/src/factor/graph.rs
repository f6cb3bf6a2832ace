use std::collections::VecDeque;

use super::{check_range, Local};
use crate::error::{usage, Result};
use crate::geometry::GroupPoint;
use crate::process::{translate, Configuration, RootedConfiguration};

/// Directed edges between points of a configuration, as sorted index pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorGraph {
    base: Configuration,
    edges: Vec<(usize, usize)>,
}

impl FactorGraph {
    pub fn new(base: Configuration, mut edges: Vec<(usize, usize)>) -> Result<FactorGraph> {
        let n = base.len();
        if let Some(e) = edges.iter().find(|(i, j)| *i >= n || *j >= n) {
            return usage(format!("edge {e:?} refers to a missing point"));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(FactorGraph { base, edges })
    }

    pub fn base(&self) -> &Configuration {
        &self.base
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.base.len()];
        for &(i, _) in &self.edges {
            d[i] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.base.len()];
        for &(_, j) in &self.edges {
            d[j] += 1;
        }
        d
    }

    /// Edges as coordinate pairs, independent of point indexing.
    pub fn edge_points(&self) -> Vec<(GroupPoint, GroupPoint)> {
        let p = self.base.points();
        self.edges.iter().map(|&(i, j)| (p[i], p[j])).collect()
    }

    /// The image of the graph under left translation.
    pub fn translate(&self, g: &GroupPoint) -> Result<FactorGraph> {
        let moved = translate(&self.base, g)?;
        let c = self.base.carrier();
        let remap: Vec<usize> = self
            .base
            .points()
            .iter()
            .map(|p| {
                moved
                    .position(&c.mul_unchecked(g, p))
                    .expect("translated point present")
            })
            .collect();
        let edges = self.edges.iter().map(|&(i, j)| (remap[i], remap[j])).collect();
        FactorGraph::new(moved, edges)
    }

    /// Connectivity of the underlying undirected graph.
    pub fn is_weakly_connected(&self) -> bool {
        let n = self.base.len();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }

    /// Whether the edges form one directed path through every point.
    pub fn is_hamiltonian_path(&self) -> bool {
        let n = self.base.len();
        if n == 0 {
            return self.edges.is_empty();
        }
        if self.edges.len() != n - 1 {
            return false;
        }
        let (outd, ind) = (self.out_degrees(), self.in_degrees());
        if outd.iter().any(|&d| d > 1) || ind.iter().any(|&d| d > 1) {
            return false;
        }
        let sources: Vec<usize> = (0..n).filter(|&i| ind[i] == 0).collect();
        let sinks = (0..n).filter(|&i| outd[i] == 0).count();
        if sources.len() != 1 || sinks != 1 {
            return false;
        }
        let mut next = vec![usize::MAX; n];
        for &(i, j) in &self.edges {
            next[i] = j;
        }
        let mut v = sources[0];
        let mut visited = 1;
        while next[v] != usize::MAX {
            v = next[v];
            visited += 1;
            if visited > n {
                return false;
            }
        }
        visited == n
    }
}

/// Edge `(x, y)` for `y != x` within the rule radius of `x` whenever
/// `arrow(x^-1 omega, x^-1 y)` holds.
pub fn graph_from_arrow_set<F>(c: &Configuration, arrow: &Local<F>) -> Result<FactorGraph>
where
    F: Fn(&RootedConfiguration, &GroupPoint) -> bool,
{
    arrow.check(c.carrier())?;
    let carrier = *c.carrier();
    let idx = c.index();
    let pts = c.points();
    let mut edges = Vec::new();
    for (i, x) in pts.iter().enumerate() {
        let view = c.view_at(i, arrow.radius, &idx);
        let xinv = carrier.inv_unchecked(x);
        let mut nbrs = Vec::new();
        idx.within(x, arrow.radius, |j| {
            if j != i {
                nbrs.push(j);
            }
        });
        for j in nbrs {
            if (arrow.rule)(&view, &carrier.mul_unchecked(&xinv, &pts[j])) {
                edges.push((i, j));
            }
        }
    }
    FactorGraph::new(c.clone(), edges)
}

/// Both directed edges between every pair at distance at most `r`.
pub fn distance_r_graph(c: &Configuration, r: f64) -> Result<FactorGraph> {
    check_range(c.carrier(), r, "graph radius")?;
    let idx = c.index();
    let mut edges = Vec::new();
    for (i, x) in c.points().iter().enumerate() {
        idx.within(x, r, |j| {
            if j != i {
                edges.push((i, j));
            }
        });
    }
    FactorGraph::new(c.clone(), edges)
}

/// One edge from each point to its nearest other point.
pub fn nearest_neighbor_digraph(c: &Configuration) -> Result<FactorGraph> {
    if c.len() < 2 {
        return usage("nearest-neighbour digraph needs at least two points");
    }
    let idx = c.index();
    let edges = c
        .points()
        .iter()
        .enumerate()
        .map(|(i, x)| (i, idx.nearest(x, Some(i)).expect("at least two points")))
        .collect();
    FactorGraph::new(c.clone(), edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Carrier, Window};
    use crate::process::sample_poisson;
    use crate::rng::trial_rng;

    fn line(xs: &[f64]) -> Configuration {
        let t = Carrier::torus(1, 10.0).unwrap();
        Configuration::new(t, Window::Full, xs.iter().map(|x| GroupPoint::new(&[*x])).collect()).unwrap()
    }

    #[test]
    fn distance_graph_examples() {
        let g = distance_r_graph(&line(&[1.0, 2.0, 3.0]), 1.0).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert!(distance_r_graph(&line(&[1.0, 2.0, 3.0]), 0.5)
            .unwrap()
            .edges()
            .is_empty());
    }

    #[test]
    fn arrow_set_reproduces_distance_graph() {
        let t = Carrier::torus(2, 10.0).unwrap();
        let c = sample_poisson(&t, &Window::Full, 1.0, &mut trial_rng(8, 0, 0)).unwrap();
        let id = t.identity();
        let rule = Local::new(1.2, move |_: &RootedConfiguration, y: &GroupPoint| {
            t.distance(&id, y) <= 1.2
        });
        assert_eq!(
            graph_from_arrow_set(&c, &rule).unwrap(),
            distance_r_graph(&c, 1.2).unwrap()
        );
        let never = Local::new(1.0, |_: &RootedConfiguration, _: &GroupPoint| false);
        assert!(graph_from_arrow_set(&c, &never).unwrap().edges().is_empty());
    }

    #[test]
    fn nearest_neighbour_examples() {
        let g = nearest_neighbor_digraph(&line(&[1.0, 4.0])).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
        assert!(nearest_neighbor_digraph(&line(&[1.0])).is_err());
        let t = Carrier::torus(2, 10.0).unwrap();
        let c = sample_poisson(&t, &Window::Full, 1.0, &mut trial_rng(9, 0, 0)).unwrap();
        let g = nearest_neighbor_digraph(&c).unwrap();
        assert!(g.out_degrees().iter().all(|&d| d == 1));
    }

    #[test]
    fn hamiltonian_path_detection() {
        let c = line(&[1.0, 2.0, 3.0]);
        assert!(FactorGraph::new(c.clone(), vec![(0, 1), (1, 2)])
            .unwrap()
            .is_hamiltonian_path());
        assert!(!FactorGraph::new(c.clone(), vec![(0, 1), (1, 0)])
            .unwrap()
            .is_hamiltonian_path());
        assert!(!FactorGraph::new(c, vec![(0, 1)]).unwrap().is_hamiltonian_path());
    }
}
