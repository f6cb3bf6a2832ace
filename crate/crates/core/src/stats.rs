//! Statistical utilities: exact moment accumulators, goodness-of-fit tests and
//! the cluster-robust two-sample Wald test used by the comparison battery.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};

const FIXED_SCALE: f64 = 4_294_967_296.0; // 2^32

fn to_fixed(x: f64) -> i128 {
    debug_assert!(x.is_finite(), "non-finite value in accumulator");
    (x * FIXED_SCALE).round() as i128
}

fn from_fixed(v: i128) -> f64 {
    v as f64 / FIXED_SCALE
}

fn from_fixed2(v: i128) -> f64 {
    v as f64 / (FIXED_SCALE * FIXED_SCALE)
}

/// Sums of a pair `(x, y)` and their second moments, kept in exact 2^-32
/// fixed point so that merging is associative and commutative bit-for-bit.
/// Values are expected to satisfy `|x|, |y| < 2^30`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accumulator {
    pub n: u64,
    sx: i128,
    sy: i128,
    sxx: i128,
    sxy: i128,
    syy: i128,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.push_pair(x, 0.0);
    }

    pub fn push_pair(&mut self, x: f64, y: f64) {
        let (fx, fy) = (to_fixed(x), to_fixed(y));
        self.n += 1;
        self.sx += fx;
        self.sy += fy;
        self.sxx += fx * fx;
        self.sxy += fx * fy;
        self.syy += fy * fy;
    }

    pub fn merge(&self, o: &Accumulator) -> Accumulator {
        Accumulator {
            n: self.n + o.n,
            sx: self.sx + o.sx,
            sy: self.sy + o.sy,
            sxx: self.sxx + o.sxx,
            sxy: self.sxy + o.sxy,
            syy: self.syy + o.syy,
        }
    }

    pub fn sum_x(&self) -> f64 {
        from_fixed(self.sx)
    }

    pub fn sum_y(&self) -> f64 {
        from_fixed(self.sy)
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.sum_x() / self.n as f64
    }

    /// Standard error of the mean of `x`.
    pub fn mean_se(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let ss = from_fixed2(self.sxx) - self.sum_x() * self.sum_x() / n;
        (ss.max(0.0) / (n - 1.0) / n).sqrt()
    }

    /// Ratio estimator `sum x / sum y` over clusters.
    pub fn ratio(&self) -> f64 {
        let sy = self.sum_y();
        if sy == 0.0 {
            0.0
        } else {
            self.sum_x() / sy
        }
    }

    /// Cluster-robust (delta-method) standard error of [`Accumulator::ratio`].
    pub fn ratio_se(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let r = self.ratio();
        let ybar = self.sum_y() / n;
        if ybar == 0.0 {
            return 0.0;
        }
        let resid = from_fixed2(self.sxx) - 2.0 * r * from_fixed2(self.sxy) + r * r * from_fixed2(self.syy);
        (resid.max(0.0) / (n * (n - 1.0) * ybar * ybar)).sqrt()
    }
}

/// Mean and standard error of a sample.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let mut a = Accumulator::new();
    for &v in values {
        a.push(v);
    }
    (a.mean(), a.mean_se())
}

/// Standardised discrepancy. A zero standard error gives `0` on exact
/// agreement and an infinite score otherwise.
pub fn z_score(estimate: f64, stderr: f64, reference: f64) -> f64 {
    let diff = estimate - reference;
    if stderr > 0.0 {
        diff / stderr
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).expect("positive degrees of freedom").sf(x)
}

/// Merges adjacent cells until every expected count is at least `min_expected`.
pub fn merge_sparse_cells(observed: &[u64], expected: &[f64], min_expected: f64) -> (Vec<u64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e) = (0u64, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= min_expected {
            obs.push(o);
            exp.push(e);
            o = 0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0 {
        if let (Some(lo), Some(le)) = (obs.last_mut(), exp.last_mut()) {
            *lo += o;
            *le += e;
        } else {
            obs.push(o);
            exp.push(e);
        }
    }
    (obs, exp)
}

/// Pearson goodness of fit. `fitted` is the number of parameters estimated
/// from the data.
pub fn chi_square_gof(observed: &[u64], expected: &[f64], fitted: usize) -> Result<TestResult> {
    if observed.len() != expected.len() {
        return Err(Error::Usage("observed and expected lengths differ".into()));
    }
    let total: u64 = observed.iter().sum();
    if total < 30 {
        return Err(Error::InsufficientData(format!(
            "{total} observations, need at least 30"
        )));
    }
    if let Some(e) = expected.iter().find(|&&e| e < 5.0) {
        return Err(Error::InsufficientData(format!("expected cell count {e} is below 5")));
    }
    if observed.len() < 2 + fitted {
        return Err(Error::InsufficientData("too few cells for the test".into()));
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let df = (observed.len() - 1 - fitted) as f64;
    Ok(TestResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df),
    })
}

/// GOF of integer draws against a Poisson law of the given mean, with tails
/// pooled so every cell expects at least 5.
pub fn poisson_gof(draws: &[u64], mean: f64) -> Result<TestResult> {
    let n = draws.len() as f64;
    let max = draws.iter().copied().max().unwrap_or(0);
    let upper = max.max((mean + 10.0 * mean.sqrt() + 10.0) as u64) as usize;
    let mut observed = vec![0u64; upper + 1];
    for &k in draws {
        observed[k as usize] += 1;
    }
    let law = Poisson::new(mean).map_err(|e| Error::Usage(e.to_string()))?;
    let mut expected: Vec<f64> = (0..=upper).map(|k| n * law.pmf(k as u64)).collect();
    let head: f64 = expected.iter().sum();
    expected[upper] += (n - head).max(0.0);
    let (o, e) = merge_sparse_cells(&observed, &expected, 5.0);
    chi_square_gof(&o, &e, 0)
}

/// Index-of-dispersion test for Poisson counts; two-sided p-value.
pub fn poisson_dispersion(counts: &[u64]) -> Result<TestResult> {
    if counts.len() < 30 {
        return Err(Error::InsufficientData(format!(
            "{} counts, need at least 30",
            counts.len()
        )));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    if mean == 0.0 {
        return Err(Error::InsufficientData("all counts are zero".into()));
    }
    let statistic = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / mean;
    let df = n - 1.0;
    let upper = chi_square_sf(statistic, df);
    let p_value = (2.0 * upper.min(1.0 - upper)).min(1.0);
    Ok(TestResult { statistic, df, p_value })
}

/// Asymptotic Kolmogorov distribution survival function.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    let en = n.sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    })
}

pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let en = ((na * nb) as f64 / (na + nb) as f64).sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    })
}

/// Per-cluster histogram counts for one group of a two-sample comparison.
pub type ClusterCounts = Vec<Vec<f64>>;

/// Cluster-robust two-sample Wald test for equality of binned proportions.
///
/// Each group is a list of clusters (typically simulation trials), each
/// holding counts per bin. Proportions are ratio estimates
/// `sum_i Y_i / sum_i N_i` with a sandwich covariance over clusters; the last
/// bin is dropped, and bins that are constant in both groups contribute no
/// degrees of freedom when they agree and reject outright when they differ.
pub fn cluster_wald_two_sample(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<TestResult> {
    let k = a.first().or(b.first()).map_or(0, |c| c.len());
    if k < 2 {
        return Err(Error::InsufficientData("need at least two bins".into()));
    }
    let (pa, ca) = cluster_proportions(a, k)?;
    let (pb, cb) = cluster_proportions(b, k)?;
    let m = k - 1;
    let diff: Vec<f64> = (0..m).map(|i| pa[i] - pb[i]).collect();
    let cov = &ca + &cb;
    let scale = (0..m).map(|i| cov[(i, i)]).fold(0.0, f64::max);
    let mut keep = Vec::new();
    for i in 0..m {
        if cov[(i, i)] <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            if diff[i].abs() > 1e-12 {
                return Ok(TestResult {
                    statistic: f64::INFINITY,
                    df: m as f64,
                    p_value: 0.0,
                });
            }
        } else {
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Ok(TestResult {
            statistic: 0.0,
            df: 0.0,
            p_value: 1.0,
        });
    }
    let r = keep.len();
    let v = DVector::from_fn(r, |i, _| diff[keep[i]]);
    let mut c = DMatrix::from_fn(r, r, |i, j| cov[(keep[i], keep[j])]);
    let trace = c.trace();
    let mut statistic = None;
    for ridge in [0.0, 1e-12, 1e-9, 1e-6] {
        if ridge > 0.0 {
            for i in 0..r {
                c[(i, i)] += ridge * trace / r as f64;
            }
        }
        if let Some(ch) = c.clone().cholesky() {
            statistic = Some(v.dot(&ch.solve(&v)));
            break;
        }
    }
    let statistic = statistic.ok_or_else(|| Error::InsufficientData("singular covariance".into()))?;
    let df = r as f64;
    Ok(TestResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df),
    })
}

fn cluster_proportions(clusters: &[Vec<f64>], k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = clusters.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} clusters, need at least 2")));
    }
    let mut tot = vec![0.0; k];
    let mut totn = 0.0;
    for c in clusters {
        if c.len() != k {
            return Err(Error::Usage("clusters have differing bin counts".into()));
        }
        for (t, &y) in tot.iter_mut().zip(c) {
            *t += y;
        }
        totn += c.iter().sum::<f64>();
    }
    if totn == 0.0 {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let p: Vec<f64> = tot.iter().map(|t| t / totn).collect();
    let m = k - 1;
    let mut cov = DMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    for c in clusters {
        let ni: f64 = c.iter().sum();
        for j in 0..m {
            e[j] = c[j] - p[j] * ni;
        }
        for i in 0..m {
            for j in 0..m {
                cov[(i, j)] += e[i] * e[j];
            }
        }
    }
    let nbar = totn / n as f64;
    cov /= n as f64 * (n as f64 - 1.0) * nbar * nbar;
    Ok((p, cov))
}
