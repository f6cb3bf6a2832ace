//! Named estimates with pass/fail verdicts, mergeable across trial batches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{z_score, Accumulator, TestResult};

pub const DEFAULT_Z_MAX: f64 = 3.0;
pub const DEFAULT_ALPHA: f64 = 0.01;

pub const CSV_HEADER: &str = "experiment,statistic,estimate,stderr,n,reference,z,pass";

/// How a report decides `pass`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    /// `|z| <= max_abs_z` against the reference.
    ZScore { max_abs_z: f64 },
    /// The estimate is a p-value; pass when it is at least `alpha`.
    PValue { alpha: f64 },
    /// Deterministic identity; pass only on exact agreement.
    Exact,
    /// Pass when `|z|` exceeds the bound (used for sensitivity checks that
    /// must detect a discrepancy).
    Separation { min_abs_z: f64 },
    /// The estimate is a p-value; pass when it is below `alpha` (a control
    /// that the test must reject).
    Reject { alpha: f64 },
}

/// The sufficient statistics behind a report, kept so reports can be merged.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    Mean(Accumulator),
    /// Cluster ratio estimator `sum x / sum y`.
    Ratio(Accumulator),
    /// Difference of two independent estimators.
    Difference(Box<Estimator>, Box<Estimator>),
    /// Count of exact matches.
    Exact {
        matched: u64,
        total: u64,
    },
}

impl Estimator {
    /// `(estimate, stderr, n)`.
    pub fn value(&self) -> (f64, f64, u64) {
        match self {
            Estimator::Mean(a) => (a.mean(), a.mean_se(), a.n),
            Estimator::Ratio(a) => (a.ratio(), a.ratio_se(), a.n),
            Estimator::Difference(l, r) => {
                let (el, sl, nl) = l.value();
                let (er, sr, nr) = r.value();
                (el - er, sl.hypot(sr), nl.min(nr))
            }
            Estimator::Exact { matched, total } => {
                let e = if *total == 0 {
                    1.0
                } else {
                    *matched as f64 / *total as f64
                };
                (e, 0.0, *total)
            }
        }
    }

    pub fn merge(&self, other: &Estimator) -> Result<Estimator> {
        Ok(match (self, other) {
            (Estimator::Mean(a), Estimator::Mean(b)) => Estimator::Mean(a.merge(b)),
            (Estimator::Ratio(a), Estimator::Ratio(b)) => Estimator::Ratio(a.merge(b)),
            (Estimator::Difference(a, b), Estimator::Difference(c, d)) => {
                Estimator::Difference(Box::new(a.merge(c)?), Box::new(b.merge(d)?))
            }
            (Estimator::Exact { matched: m1, total: t1 }, Estimator::Exact { matched: m2, total: t2 }) => {
                Estimator::Exact {
                    matched: m1 + m2,
                    total: t1 + t2,
                }
            }
            _ => return Err(Error::Usage("cannot merge reports with different estimators".into())),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub experiment: String,
    pub statistic: String,
    pub estimate: f64,
    pub stderr: f64,
    pub n: u64,
    pub reference: Option<f64>,
    pub z: Option<f64>,
    pub pass: bool,
    pub criterion: Criterion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip)]
    estimator: Option<Estimator>,
}

impl StatReport {
    /// Report for an estimator compared against `reference` (for
    /// [`Estimator::Difference`] the reference is normally `0`).
    pub fn from_estimator(
        experiment: &str,
        statistic: &str,
        estimator: Estimator,
        reference: Option<f64>,
        criterion: Criterion,
    ) -> StatReport {
        let (estimate, stderr, n) = estimator.value();
        let mut r = StatReport {
            experiment: experiment.to_string(),
            statistic: statistic.to_string(),
            estimate,
            stderr,
            n,
            reference,
            z: None,
            pass: false,
            criterion,
            note: None,
            estimator: Some(estimator),
        };
        r.evaluate();
        r
    }

    pub fn mean(experiment: &str, statistic: &str, acc: Accumulator, reference: Option<f64>) -> StatReport {
        Self::from_estimator(
            experiment,
            statistic,
            Estimator::Mean(acc),
            reference,
            Criterion::ZScore {
                max_abs_z: DEFAULT_Z_MAX,
            },
        )
    }

    pub fn ratio(experiment: &str, statistic: &str, acc: Accumulator, reference: Option<f64>) -> StatReport {
        Self::from_estimator(
            experiment,
            statistic,
            Estimator::Ratio(acc),
            reference,
            Criterion::ZScore {
                max_abs_z: DEFAULT_Z_MAX,
            },
        )
    }

    pub fn difference(experiment: &str, statistic: &str, lhs: Estimator, rhs: Estimator) -> StatReport {
        Self::from_estimator(
            experiment,
            statistic,
            Estimator::Difference(Box::new(lhs), Box::new(rhs)),
            Some(0.0),
            Criterion::ZScore {
                max_abs_z: DEFAULT_Z_MAX,
            },
        )
    }

    pub fn exact(experiment: &str, statistic: &str, matched: u64, total: u64) -> StatReport {
        Self::from_estimator(
            experiment,
            statistic,
            Estimator::Exact { matched, total },
            Some(1.0),
            Criterion::Exact,
        )
    }

    /// Report for a hypothesis test; the estimate column carries the p-value.
    pub fn test(experiment: &str, statistic: &str, result: &TestResult, n: u64, alpha: f64) -> StatReport {
        let pass = result.p_value >= alpha;
        StatReport {
            experiment: experiment.to_string(),
            statistic: statistic.to_string(),
            estimate: result.p_value,
            stderr: 0.0,
            n,
            reference: None,
            z: None,
            pass,
            criterion: Criterion::PValue { alpha },
            note: Some(format!("chi2={} df={}", result.statistic, result.df)),
            estimator: None,
        }
    }

    /// A report with no reference that always passes; used to record values.
    pub fn record(experiment: &str, statistic: &str, estimate: f64, stderr: f64, n: u64) -> StatReport {
        StatReport {
            experiment: experiment.to_string(),
            statistic: statistic.to_string(),
            estimate,
            stderr,
            n,
            reference: None,
            z: None,
            pass: true,
            criterion: Criterion::ZScore {
                max_abs_z: DEFAULT_Z_MAX,
            },
            note: None,
            estimator: None,
        }
    }

    /// A failing report describing why a check could not run.
    pub fn failure(experiment: &str, statistic: &str, note: impl Into<String>) -> StatReport {
        let mut r = Self::record(experiment, statistic, f64::NAN, 0.0, 0);
        r.pass = false;
        r.note = Some(note.into());
        r
    }

    pub fn with_criterion(mut self, criterion: Criterion) -> StatReport {
        self.criterion = criterion;
        self.evaluate();
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> StatReport {
        self.note = Some(note.into());
        self
    }

    pub fn estimator(&self) -> Option<&Estimator> {
        self.estimator.as_ref()
    }

    fn evaluate(&mut self) {
        self.z = self.reference.map(|r| z_score(self.estimate, self.stderr, r));
        self.pass = match (self.criterion, self.z) {
            (Criterion::ZScore { max_abs_z }, Some(z)) => z.abs() <= max_abs_z,
            (Criterion::Separation { min_abs_z }, Some(z)) => z.abs() > min_abs_z,
            (Criterion::Exact, Some(z)) => z == 0.0,
            (Criterion::PValue { alpha }, _) => self.estimate >= alpha,
            (Criterion::Reject { alpha }, _) => self.estimate < alpha,
            (_, None) => true,
        };
    }

    /// Pools two reports of the same statistic. Associative and commutative.
    pub fn merge(&self, other: &StatReport) -> Result<StatReport> {
        if self.experiment != other.experiment
            || self.statistic != other.statistic
            || self.reference != other.reference
            || self.criterion != other.criterion
        {
            return Err(Error::Usage(format!(
                "cannot merge {}/{} with {}/{}",
                self.experiment, self.statistic, other.experiment, other.statistic
            )));
        }
        let (Some(a), Some(b)) = (&self.estimator, &other.estimator) else {
            return Err(Error::Usage("report carries no mergeable estimator".into()));
        };
        let mut r = Self::from_estimator(
            &self.experiment,
            &self.statistic,
            a.merge(b)?,
            self.reference,
            self.criterion,
        );
        r.note = self.note.clone();
        Ok(r)
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), csv_float);
        format!(
            "{},{},{},{},{},{},{},{}",
            csv_field(&self.experiment),
            csv_field(&self.statistic),
            csv_float(self.estimate),
            csv_float(self.stderr),
            self.n,
            opt(self.reference),
            opt(self.z),
            self.pass
        )
    }
}

/// Shortest round-trip form, in scientific notation for very small or large magnitudes.
fn csv_float(x: f64) -> String {
    if x != 0.0 && x.is_finite() && !(1e-6..1e15).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn to_csv(reports: &[StatReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn all_pass(reports: &[StatReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(xs: &[f64]) -> Accumulator {
        let mut a = Accumulator::new();
        for &x in xs {
            a.push(x);
        }
        a
    }

    #[test]
    fn pass_follows_z() {
        let r = StatReport::mean("e", "s", acc(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(r.z, Some(0.0));
        assert!(r.pass);
        let r = StatReport::mean("e", "s", acc(&[1.0, 1.0, 1.0]), Some(2.0));
        assert_eq!(r.z, Some(f64::NEG_INFINITY));
        assert!(!r.pass);
    }

    #[test]
    fn merge_is_associative_and_commutative() {
        let a = StatReport::mean("e", "s", acc(&[0.1, 0.7, 0.3]), Some(0.5));
        let b = StatReport::mean("e", "s", acc(&[0.9, 0.2]), Some(0.5));
        let c = StatReport::mean("e", "s", acc(&[0.45, 0.55, 0.6, 0.33]), Some(0.5));
        let l = a.merge(&b.merge(&c).unwrap()).unwrap();
        let r = a.merge(&b).unwrap().merge(&c).unwrap();
        assert_eq!(l, r);
        assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
    }

    #[test]
    fn mismatched_reports_do_not_merge() {
        let a = StatReport::mean("e", "s", acc(&[1.0]), None);
        let b = StatReport::mean("e", "t", acc(&[1.0]), None);
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn exact_report() {
        assert!(StatReport::exact("e", "s", 10, 10).pass);
        assert!(!StatReport::exact("e", "s", 9, 10).pass);
    }

    #[test]
    fn csv_formatting() {
        let r = StatReport::record("exp", "a,b", 1.5, 0.25, 4);
        assert_eq!(r.csv_row(), "exp,\"a,b\",1.5,0.25,4,none,none,true");
        assert!(to_csv(&[r]).starts_with(CSV_HEADER));
    }
}
