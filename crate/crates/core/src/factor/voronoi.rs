use std::cmp::Ordering;

use crate::error::{usage, Result};
use crate::geometry::{Carrier, GroupPoint, MAX_DIM};
use crate::process::Configuration;

/// Cubical cells of side `h` tiling the torus. Cell `k` has integer
/// coordinates `k_0 + n k_1 + n^2 k_2`, and cell 0 is `[0, h)^d`, the cell
/// containing the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellGrid {
    carrier: Carrier,
    n: usize,
    h: f64,
}

impl CellGrid {
    pub fn new(carrier: &Carrier, h: f64) -> Result<CellGrid> {
        let Some(side) = carrier.side() else {
            return usage("cell grids are defined on the torus only");
        };
        let ratio = side / h;
        if !(h > 0.0) || ratio.fract() != 0.0 {
            return usage(format!("grid side {h} does not divide {side}"));
        }
        if (h / carrier.quantum()).fract() != 0.0 {
            return usage(format!("grid side {h} is not a multiple of the coordinate resolution"));
        }
        let n = ratio as usize;
        if n.pow(carrier.dim() as u32) > u32::MAX as usize {
            return usage("grid has too many cells");
        }
        Ok(CellGrid {
            carrier: *carrier,
            n,
            h,
        })
    }

    /// Grid with `divisions` cells per side.
    pub fn with_divisions(carrier: &Carrier, divisions: usize) -> Result<CellGrid> {
        let side = carrier
            .side()
            .ok_or_else(|| crate::error::Error::Usage("torus required".into()))?;
        CellGrid::new(carrier, side / divisions as f64)
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn per_axis(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.carrier.dim()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn cell_coords(&self, cell: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        let mut k = cell;
        for x in c.iter_mut().take(self.dim()) {
            *x = k % self.n;
            k /= self.n;
        }
        c
    }

    pub fn cell_index(&self, coords: &[usize]) -> usize {
        coords.iter().rev().fold(0, |acc, &c| acc * self.n + c)
    }

    pub fn center(&self, cell: usize) -> GroupPoint {
        let k = self.cell_coords(cell);
        let mut c = [0.0; MAX_DIM];
        for i in 0..self.dim() {
            c[i] = (k[i] as f64 + 0.5) * self.h;
        }
        GroupPoint::from_raw(c, self.dim())
    }

    pub fn cell_of(&self, p: &GroupPoint) -> usize {
        let mut k = [0usize; MAX_DIM];
        for i in 0..self.dim() {
            k[i] = ((p.coords()[i] / self.h).floor() as usize).min(self.n - 1);
        }
        self.cell_index(&k[..self.dim()])
    }

    /// Cells of an axis-aligned block of cell coordinates `[lo, hi)`.
    pub(crate) fn block_cells(&self, lo: &[usize], hi: &[usize], mut f: impl FnMut(usize)) {
        let d = self.dim();
        let mut cur = [0usize; MAX_DIM];
        cur[..d].copy_from_slice(&lo[..d]);
        loop {
            f(self.cell_index(&cur[..d]));
            let mut ax = 0;
            loop {
                if ax == d {
                    return;
                }
                cur[ax] += 1;
                if cur[ax] < hi[ax] {
                    break;
                }
                cur[ax] = lo[ax];
                ax += 1;
            }
        }
    }
}

/// Grid-discretised Voronoi tessellation: each cell belongs to the point
/// nearest its centre.
#[derive(Clone, Debug, PartialEq)]
pub struct VoronoiPartition {
    base: Configuration,
    grid: CellGrid,
    owner: Vec<u32>,
}

impl VoronoiPartition {
    pub fn base(&self) -> &Configuration {
        &self.base
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn owner(&self) -> &[u32] {
        &self.owner
    }

    pub fn cell_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.base.len()];
        for &o in &self.owner {
            c[o as usize] += 1;
        }
        c
    }

    pub fn volumes(&self) -> Vec<f64> {
        let v = self.grid.cell_volume();
        self.cell_counts().into_iter().map(|k| k as f64 * v).collect()
    }

    /// Owner of the cell containing `p`.
    pub fn owner_of(&self, p: &GroupPoint) -> usize {
        self.owner[self.grid.cell_of(p)] as usize
    }
}

/// Cell-centre Voronoi partition with distance-then-displacement tie-break.
pub fn voronoi_partition(c: &Configuration, h: f64) -> Result<VoronoiPartition> {
    let grid = CellGrid::new(c.carrier(), h)?;
    let owner = nearest_owner(c, &grid)?;
    Ok(VoronoiPartition {
        base: c.clone(),
        grid,
        owner,
    })
}

/// For every cell, the index of the nearest point to its centre.
pub(crate) fn nearest_owner(c: &Configuration, grid: &CellGrid) -> Result<Vec<u32>> {
    if c.is_empty() {
        return usage("Voronoi partition of an empty configuration");
    }
    let carrier = *c.carrier();
    let side = carrier.side().expect("grid carrier is a torus");
    let d = carrier.dim();
    let pts = c.points();
    let idx = c.index();
    let n = grid.per_axis();
    let spacing = (side.powi(d as i32) / pts.len() as f64).powf(1.0 / d as f64);
    let b = ((spacing / grid.side() / 2.0).floor() as usize).clamp(1, n);
    let mut owner = vec![0u32; grid.len()];
    let mut cand = Vec::new();
    let mut blo = [0usize; MAX_DIM];
    loop {
        let mut bhi = [0usize; MAX_DIM];
        let mut bc = [0.0; MAX_DIM];
        let mut half_diag2 = 0.0;
        for i in 0..d {
            bhi[i] = (blo[i] + b).min(n);
            let first = (blo[i] as f64 + 0.5) * grid.side();
            let last = (bhi[i] as f64 - 0.5) * grid.side();
            bc[i] = 0.5 * (first + last);
            half_diag2 += (0.5 * (last - first)).powi(2);
        }
        let centre = GroupPoint::from_raw(bc, d);
        let rb = half_diag2.sqrt();
        let near = idx.nearest(&centre, None).expect("non-empty configuration");
        let d0 = carrier.distance(&centre, &pts[near]);
        cand.clear();
        idx.within(&centre, d0 + 2.0 * rb + 1e-9, |j| cand.push(j));
        grid.block_cells(&blo[..d], &bhi[..d], |cell| {
            let x = grid.center(cell);
            let mut best = cand[0];
            let mut best_d2 = carrier.dist2(&x, &pts[best]);
            for &j in &cand[1..] {
                let d2 = carrier.dist2(&x, &pts[j]);
                if d2 < best_d2 || (d2 == best_d2 && carrier.closer(&x, &pts[j], &pts[best]) == Ordering::Less) {
                    best = j;
                    best_d2 = d2;
                }
            }
            owner[cell] = best as u32;
        });
        let mut ax = 0;
        loop {
            if ax == d {
                return Ok(owner);
            }
            blo[ax] += b;
            if blo[ax] < n {
                break;
            }
            blo[ax] = 0;
            ax += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;
    use crate::process::sample_poisson;
    use crate::rng::trial_rng;

    fn torus() -> Carrier {
        Carrier::torus(2, 10.0).unwrap()
    }

    #[test]
    fn singleton_owns_everything() {
        let c = Configuration::new(torus(), Window::Full, vec![GroupPoint::new(&[3.0, 4.0])]).unwrap();
        let v = voronoi_partition(&c, 10.0 / 64.0).unwrap();
        assert_eq!(v.volumes(), vec![100.0]);
    }

    #[test]
    fn antipodal_pair_splits_evenly() {
        let h = 10.0 / 128.0;
        let c = Configuration::new(
            torus(),
            Window::Full,
            vec![GroupPoint::new(&[2.5, 2.5]), GroupPoint::new(&[7.5, 7.5])],
        )
        .unwrap();
        let v = voronoi_partition(&c, h).unwrap().volumes();
        assert_eq!(v[0] + v[1], 100.0);
        // Boundary cells are split by the tie-break; the perimeter is 4 * 10 / sqrt(2).
        assert!((v[0] - 50.0).abs() <= h * 4.0 * 10.0 / 2f64.sqrt());
    }

    #[test]
    fn matches_brute_force_and_sums_to_area() {
        let t = torus();
        let c = sample_poisson(&t, &Window::Full, 1.0, &mut trial_rng(10, 0, 0)).unwrap();
        let v = voronoi_partition(&c, 10.0 / 64.0).unwrap();
        for cell in 0..v.grid().len() {
            let x = v.grid().center(cell);
            let mut best = 0;
            for j in 1..c.len() {
                if t.closer(&x, &c.points()[j], &c.points()[best]) == Ordering::Less {
                    best = j;
                }
            }
            assert_eq!(v.owner()[cell] as usize, best);
        }
        assert_eq!(v.cell_counts().iter().sum::<usize>(), 64 * 64);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = torus();
        assert!(voronoi_partition(&Configuration::empty(t, Window::Full), 0.5).is_err());
        let c = Configuration::new(t, Window::Full, vec![GroupPoint::new(&[1.0, 1.0])]).unwrap();
        assert!(voronoi_partition(&c, 3.0).is_err());
    }
}
