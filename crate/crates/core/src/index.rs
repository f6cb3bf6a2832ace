//! Uniform cell grid for radius and nearest-neighbour queries.
//!
//! Flat carriers bucket points into a grid (periodic on the torus). The affine
//! carrier has no cheap bucketing under its metric and falls back to a scan.

use std::cmp::Ordering;

use crate::geometry::{Carrier, GroupPoint, MAX_DIM};

pub struct SpatialIndex<'a> {
    carrier: Carrier,
    points: &'a [GroupPoint],
    grid: Option<Grid>,
}

struct Grid {
    n: usize,
    side: f64,
    origin: [f64; MAX_DIM],
    periodic: bool,
    start: Vec<u32>,
    order: Vec<u32>,
}

impl Grid {
    fn cell_of(&self, x: &[f64]) -> [isize; MAX_DIM] {
        let mut c = [0isize; MAX_DIM];
        for (i, v) in x.iter().enumerate() {
            let k = ((v - self.origin[i]) / self.side).floor() as isize;
            c[i] = if self.periodic {
                k.rem_euclid(self.n as isize)
            } else {
                k.clamp(0, self.n as isize - 1)
            };
        }
        c
    }

    fn flat(&self, c: &[isize; MAX_DIM], d: usize) -> usize {
        let mut f = 0usize;
        for &ci in c[..d].iter().rev() {
            f = f * self.n + ci as usize;
        }
        f
    }

    fn bucket(&self, cell: usize) -> &[u32] {
        &self.order[self.start[cell] as usize..self.start[cell + 1] as usize]
    }
}

impl<'a> SpatialIndex<'a> {
    pub fn new(carrier: &Carrier, points: &'a [GroupPoint]) -> Self {
        let d = carrier.dim();
        let grid = match *carrier {
            Carrier::AffineLine => None,
            _ if points.len() < 16 => None,
            Carrier::FlatTorus { side, .. } => {
                let n = cells_per_axis(points.len(), d);
                Some(build(points, d, n, side / n as f64, [0.0; MAX_DIM], true))
            }
            Carrier::EuclideanBox { .. } => {
                let mut lo = [f64::INFINITY; MAX_DIM];
                let mut hi = [f64::NEG_INFINITY; MAX_DIM];
                for p in points {
                    for i in 0..d {
                        lo[i] = lo[i].min(p.coords()[i]);
                        hi[i] = hi[i].max(p.coords()[i]);
                    }
                }
                let extent = (0..d).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
                if extent <= 0.0 {
                    None
                } else {
                    let n = cells_per_axis(points.len(), d);
                    Some(build(points, d, n, extent * (1.0 + 1e-12) / n as f64, lo, false))
                }
            }
        };
        SpatialIndex {
            carrier: *carrier,
            points,
            grid,
        }
    }

    pub fn points(&self) -> &'a [GroupPoint] {
        self.points
    }

    /// Calls `f` with the index of every point within distance `r` of `center`.
    pub fn within<F: FnMut(usize)>(&self, center: &GroupPoint, r: f64, mut f: F) {
        let Some(g) = &self.grid else {
            for (i, p) in self.points.iter().enumerate() {
                if self.carrier.distance(center, p) <= r {
                    f(i);
                }
            }
            return;
        };
        let d = self.carrier.dim();
        let reach = (r / g.side).ceil() as isize;
        let c0 = if g.periodic {
            g.cell_of(center.coords())
        } else {
            // Unclamped cell, so that queries from outside the bounding box work.
            let mut c = [0isize; MAX_DIM];
            for i in 0..d {
                c[i] = ((center.coords()[i] - g.origin[i]) / g.side).floor() as isize;
            }
            c
        };
        let n = g.n as isize;
        let mut ranges = [(0isize, 0isize); MAX_DIM];
        for i in 0..d {
            ranges[i] = if g.periodic && 2 * reach + 1 >= n {
                (0, n - 1)
            } else if g.periodic {
                (c0[i] - reach, c0[i] + reach)
            } else {
                ((c0[i] - reach).max(0), (c0[i] + reach).min(n - 1))
            };
            if ranges[i].0 > ranges[i].1 {
                return;
            }
        }
        let mut cur = [0isize; MAX_DIM];
        for i in 0..d {
            cur[i] = ranges[i].0;
        }
        loop {
            let mut cell = [0isize; MAX_DIM];
            for i in 0..d {
                cell[i] = if g.periodic { cur[i].rem_euclid(n) } else { cur[i] };
            }
            for &j in g.bucket(g.flat(&cell, d)) {
                let j = j as usize;
                if self.carrier.distance(center, &self.points[j]) <= r {
                    f(j);
                }
            }
            let mut ax = 0;
            loop {
                if ax == d {
                    return;
                }
                cur[ax] += 1;
                if cur[ax] <= ranges[ax].1 {
                    break;
                }
                cur[ax] = ranges[ax].0;
                ax += 1;
            }
        }
    }

    /// Indices within distance `r`, in ascending index order.
    pub fn within_sorted(&self, center: &GroupPoint, r: f64) -> Vec<usize> {
        let mut v = Vec::new();
        self.within(center, r, |j| v.push(j));
        v.sort_unstable();
        v
    }

    /// Nearest point to `center`, skipping `exclude`. Ties are broken by the
    /// lexicographic order of displacements from `center`.
    pub fn nearest(&self, center: &GroupPoint, exclude: Option<usize>) -> Option<usize> {
        let Some(g) = &self.grid else {
            return self.nearest_scan(center, exclude);
        };
        let d = self.carrier.dim();
        let n = g.n as isize;
        if !g.periodic {
            let span = g.side * g.n as f64;
            let outside = (0..d).any(|i| {
                let x = center.coords()[i] - g.origin[i];
                !(0.0..span).contains(&x)
            });
            if outside {
                return self.nearest_scan(center, exclude);
            }
        }
        let c0 = g.cell_of(center.coords());
        let mut best: Option<usize> = None;
        let mut k = 0isize;
        loop {
            if 2 * k + 1 >= n {
                return self.nearest_scan(center, exclude);
            }
            // Visit the cells on the Chebyshev shell of radius k.
            let mut cur = [0isize; MAX_DIM];
            for i in 0..d {
                cur[i] = -k;
            }
            loop {
                let on_shell = cur[..d].iter().any(|x| x.abs() == k);
                let mut cell = [0isize; MAX_DIM];
                let mut inside = true;
                for i in 0..d {
                    let c = c0[i] + cur[i];
                    cell[i] = if g.periodic {
                        c.rem_euclid(n)
                    } else {
                        if c < 0 || c >= n {
                            inside = false;
                        }
                        c
                    };
                }
                if on_shell && inside {
                    for &j in g.bucket(g.flat(&cell, d)) {
                        let j = j as usize;
                        if Some(j) == exclude {
                            continue;
                        }
                        best = Some(match best {
                            None => j,
                            Some(b) => self.pick(center, b, j),
                        });
                    }
                }
                let mut ax = 0;
                let mut done = false;
                loop {
                    if ax == d {
                        done = true;
                        break;
                    }
                    cur[ax] += 1;
                    if cur[ax] <= k {
                        break;
                    }
                    cur[ax] = -k;
                    ax += 1;
                }
                if done {
                    break;
                }
            }
            if let Some(b) = best {
                // Unvisited points lie at least k cell sides away.
                if self.carrier.distance(center, &self.points[b]) < k as f64 * g.side {
                    return best;
                }
            }
            if !g.periodic && k >= n {
                return best;
            }
            k += 1;
        }
    }

    fn pick(&self, center: &GroupPoint, a: usize, b: usize) -> usize {
        match self.carrier.closer(center, &self.points[a], &self.points[b]) {
            Ordering::Greater => b,
            _ => a,
        }
    }

    fn nearest_scan(&self, center: &GroupPoint, exclude: Option<usize>) -> Option<usize> {
        let mut best = None;
        for j in 0..self.points.len() {
            if Some(j) == exclude {
                continue;
            }
            best = Some(match best {
                None => j,
                Some(b) => self.pick(center, b, j),
            });
        }
        best
    }
}

fn cells_per_axis(n_points: usize, d: usize) -> usize {
    let per_axis = (n_points as f64 / 2.0).powf(1.0 / d as f64).floor() as usize;
    per_axis.clamp(1, 1 << (20 / d))
}

fn build(points: &[GroupPoint], d: usize, n: usize, side: f64, origin: [f64; MAX_DIM], periodic: bool) -> Grid {
    let total = n.pow(d as u32);
    let mut g = Grid {
        n,
        side,
        origin,
        periodic,
        start: vec![0; total + 1],
        order: vec![0; points.len()],
    };
    let cells: Vec<usize> = points.iter().map(|p| g.flat(&g.cell_of(p.coords()), d)).collect();
    for &c in &cells {
        g.start[c + 1] += 1;
    }
    for i in 0..total {
        g.start[i + 1] += g.start[i];
    }
    let mut fill = g.start.clone();
    for (i, &c) in cells.iter().enumerate() {
        g.order[fill[c] as usize] = i as u32;
        fill[c] += 1;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_uniform, Window};
    use crate::rng::trial_rng;

    fn cloud(carrier: &Carrier, w: &Window, n: usize, seed: u64) -> Vec<GroupPoint> {
        let mut rng = trial_rng(seed, 0, 0);
        (0..n).map(|_| sample_uniform(carrier, w, &mut rng).unwrap()).collect()
    }

    fn brute_nearest(carrier: &Carrier, pts: &[GroupPoint], c: &GroupPoint, ex: Option<usize>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in 0..pts.len() {
            if Some(j) == ex {
                continue;
            }
            if best.is_none_or(|b| carrier.closer(c, &pts[j], &pts[b]) == Ordering::Less) {
                best = Some(j);
            }
        }
        best
    }

    #[test]
    fn torus_queries_match_brute_force() {
        let t = Carrier::torus(2, 10.0).unwrap();
        let pts = cloud(&t, &Window::Full, 300, 1);
        let idx = SpatialIndex::new(&t, &pts);
        for (i, p) in pts.iter().enumerate().take(60) {
            for r in [0.3, 1.0, 2.4, 6.0] {
                let got = idx.within_sorted(p, r);
                let want: Vec<usize> = (0..pts.len()).filter(|&j| t.distance(p, &pts[j]) <= r).collect();
                assert_eq!(got, want);
            }
            assert_eq!(idx.nearest(p, Some(i)), brute_nearest(&t, &pts, p, Some(i)));
        }
    }

    #[test]
    fn euclidean_queries_match_brute_force() {
        let e = Carrier::euclidean(3).unwrap();
        let pts = cloud(&e, &Window::cube(0.0, 4.0, 3), 200, 2);
        let idx = SpatialIndex::new(&e, &pts);
        let probe = GroupPoint::new(&[-1.0, 2.0, 5.0]);
        assert_eq!(
            idx.within_sorted(&probe, 2.0),
            (0..pts.len())
                .filter(|&j| e.distance(&probe, &pts[j]) <= 2.0)
                .collect::<Vec<_>>()
        );
        for (i, p) in pts.iter().enumerate().take(40) {
            assert_eq!(idx.nearest(p, Some(i)), brute_nearest(&e, &pts, p, Some(i)));
        }
    }

    #[test]
    fn empty_and_singleton() {
        let t = Carrier::torus(2, 10.0).unwrap();
        let none: Vec<GroupPoint> = vec![];
        assert_eq!(SpatialIndex::new(&t, &none).nearest(&t.identity(), None), None);
        let one = vec![GroupPoint::new(&[1.0, 1.0])];
        assert_eq!(SpatialIndex::new(&t, &one).nearest(&t.identity(), Some(0)), None);
    }
}
