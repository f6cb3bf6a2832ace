//! Fixed battery of rooted statistics and the two-sample comparison on it.
//!
//! Each rooted sample is summarised by the number of non-root points in balls
//! of a few radii and the nearest-neighbour distance censored at the largest
//! radius. Two laws are compared statistic by statistic with the
//! cluster-robust Wald test on binned values, at a Bonferroni-corrected level.

use serde::{Deserialize, Serialize};

use crate::process::RootedConfiguration;
use crate::report::StatReport;
use crate::stats::cluster_wald_two_sample;

/// Observations grouped by cluster: `clusters[i][k]` is the statistic vector
/// of the `k`-th rooted sample from trial `i`.
pub type Observations = Vec<Vec<Vec<f64>>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Battery {
    pub radii: Vec<f64>,
}

impl Default for Battery {
    fn default() -> Self {
        Battery {
            radii: vec![0.5, 1.0, 2.0],
        }
    }
}

impl Battery {
    pub fn new(radii: Vec<f64>) -> Battery {
        Battery { radii }
    }

    /// Largest radius; the observation window of every sample must cover it.
    pub fn reach(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.radii.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.radii.iter().map(|r| format!("count_r{r}")).collect();
        v.push(format!("nn_censored_{}", self.reach()));
        v
    }

    pub fn observe(&self, v: &RootedConfiguration) -> Vec<f64> {
        let mut out: Vec<f64> = self.radii.iter().map(|&r| v.count_within(r) as f64).collect();
        out.push(v.nearest_distance().unwrap_or(f64::INFINITY).min(self.reach()));
        out
    }

    /// One p-value report per statistic; each passes at level `alpha / len`.
    pub fn compare(&self, experiment: &str, a: &Observations, b: &Observations, alpha: f64) -> Vec<StatReport> {
        let level = alpha / self.len() as f64;
        let n = (a.iter().map(Vec::len).sum::<usize>() + b.iter().map(Vec::len).sum::<usize>()) as u64;
        let mut reports = Vec::new();
        for (s, name) in self.names().iter().enumerate() {
            let va: Vec<Vec<f64>> = a.iter().map(|c| c.iter().map(|o| o[s]).collect()).collect();
            let vb: Vec<Vec<f64>> = b.iter().map(|c| c.iter().map(|o| o[s]).collect()).collect();
            let integer = s < self.radii.len();
            let edges = if integer {
                integer_edges(&va, &vb)
            } else {
                quantile_edges(&va, &vb)
            };
            let report = if edges.is_empty() {
                // A single bin: both samples are concentrated on it.
                StatReport::record(experiment, name, 1.0, 0.0, n)
                    .with_criterion(crate::report::Criterion::PValue { alpha: level })
                    .with_note("single bin")
            } else {
                let ha = histograms(&va, &edges);
                let hb = histograms(&vb, &edges);
                match cluster_wald_two_sample(&ha, &hb) {
                    Ok(t) => StatReport::test(experiment, name, &t, n, level),
                    Err(e) => StatReport::failure(experiment, name, e.to_string()),
                }
            };
            reports.push(report);
        }
        reports
    }
}

/// Bin edges: a value `v` lies in bin `k` when `edges[k-1] <= v < edges[k]`.
fn histograms(clusters: &[Vec<f64>], edges: &[f64]) -> Vec<Vec<f64>> {
    clusters
        .iter()
        .map(|c| {
            let mut h = vec![0.0; edges.len() + 1];
            for &v in c {
                h[edges.partition_point(|&e| e <= v)] += 1.0;
            }
            h
        })
        .collect()
}

fn flat(c: &[Vec<f64>]) -> Vec<f64> {
    c.iter().flatten().copied().collect()
}

/// Edges for integer data, merging sparse values so every bin holds at
/// least 1% of the equally weighted pooled mass and enough of the smaller sample.
fn integer_edges(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let (fa, fb) = (flat(a), flat(b));
    if fa.is_empty() || fb.is_empty() {
        return Vec::new();
    }
    let max = fa.iter().chain(&fb).copied().fold(0.0, f64::max) as usize;
    let mut freq = vec![0.0; max + 1];
    for (sample, w) in [(&fa, 0.5 / fa.len() as f64), (&fb, 0.5 / fb.len() as f64)] {
        for &v in sample.iter() {
            freq[v as usize] += w;
        }
    }
    let min_n = fa.len().min(fb.len()) as f64;
    let threshold = (5.0 / min_n).max(0.01);
    let mut edges = Vec::new();
    let mut acc = 0.0;
    let mut remaining: f64 = freq.iter().sum();
    for (v, f) in freq.iter().enumerate() {
        acc += f;
        remaining -= f;
        if acc >= threshold && remaining >= threshold {
            edges.push(v as f64 + 0.5);
            acc = 0.0;
        }
    }
    edges
}

/// Edges at the deciles of each sample, merged.
fn quantile_edges(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut edges = Vec::new();
    for sample in [flat(a), flat(b)] {
        if sample.is_empty() {
            return Vec::new();
        }
        let mut s = sample;
        s.sort_by(f64::total_cmp);
        for q in 1..10 {
            edges.push(s[(q * s.len()) / 10]);
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    // An edge at or below the overall minimum leaves an empty first bin.
    let lo = flat(a).into_iter().chain(flat(b)).fold(f64::INFINITY, f64::min);
    edges.retain(|&e| e > lo);
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_edges_pool_tails() {
        let a = vec![vec![0.0, 1.0, 1.0, 2.0, 9.0]; 40];
        let b = vec![vec![0.0, 1.0, 2.0, 2.0, 3.0]; 40];
        let e = integer_edges(&a, &b);
        assert!(!e.is_empty());
        assert!(e.iter().all(|x| x.fract() == 0.5));
        assert!(*e.last().unwrap() < 9.0);
    }

    #[test]
    fn identical_point_masses_pass() {
        let bat = Battery::default();
        let obs: Observations = vec![vec![vec![0.0, 1.0, 4.0, 2.0]]; 50];
        let r = bat.compare("t", &obs, &obs, 0.01);
        assert_eq!(r.len(), 4);
        assert!(r.iter().all(|x| x.pass));
    }

    #[test]
    fn shifted_counts_fail() {
        let bat = Battery::new(vec![1.0]);
        let a: Observations = (0..200).map(|i| vec![vec![(i % 3) as f64, 0.5]]).collect();
        let b: Observations = (0..200).map(|i| vec![vec![(i % 3 + 1) as f64, 0.5]]).collect();
        let r = bat.compare("t", &a, &b, 0.01);
        assert!(!r[0].pass);
        assert!(r[1].pass);
    }
}
