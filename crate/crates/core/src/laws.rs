//! Counting and intensity laws of sampled processes and of thinnings and
//! thickenings derived from them.

use crate::error::{usage, Result};
use crate::factor::{constant_thickening, independent_thinning};
use crate::geometry::{Carrier, GroupPoint, Window};
use crate::process::{attach_iid_marks, count, sample_poisson, MarkSpace, ProcessSpec};
use crate::report::{StatReport, DEFAULT_ALPHA};
use crate::rng::{run_trials, stream};
use crate::stats::{poisson_gof, Accumulator};

/// Windows used by [`check_poisson_law`] on a torus of side `side`: three
/// cubes of sides 1, 2 and 3, and a disjoint pair for the correlation.
pub fn default_law_windows(dim: usize, side: f64) -> (Vec<Window>, (Window, Window)) {
    let s = side / 10.0;
    (
        vec![
            Window::cube(0.0, s, dim),
            Window::cube(0.0, 2.0 * s, dim),
            Window::cube(3.0 * s, 6.0 * s, dim),
        ],
        (Window::cube(0.0, 2.0 * s, dim), Window::cube(5.0 * s, 7.0 * s, dim)),
    )
}

/// Chi-square fit of window counts to `Pois(t vol(U))` for each window, the
/// mean count per unit volume, and the covariance of counts in two disjoint
/// windows.
pub fn check_poisson_law(
    spec: &ProcessSpec,
    carrier: &Carrier,
    windows: &[Window],
    pair: &(Window, Window),
    trials: usize,
    seed: u64,
) -> Result<Vec<StatReport>> {
    const EXP: &str = "poisson_law";
    spec.validate(carrier)?;
    for w in windows.iter().chain([&pair.0, &pair.1]) {
        w.validate(carrier)?;
    }
    if !pair.0.bounds(carrier).0.is_empty() && windows_overlap(carrier, &pair.0, &pair.1) {
        return usage("the correlation windows must be disjoint");
    }
    let t = spec.intensity(carrier);
    let all: Vec<&Window> = windows.iter().chain([&pair.0, &pair.1]).collect();
    let counts = run_trials(trials, seed, stream::SAMPLE, |_, rng| -> Result<Vec<u64>> {
        let c = spec.sample(carrier, &Window::Full, rng)?;
        Ok(all.iter().map(|w| count(&c, w) as u64).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::new();
    for (k, w) in windows.iter().enumerate() {
        let vol = w.haar_volume(carrier);
        let draws: Vec<u64> = counts.iter().map(|c| c[k]).collect();
        let name = format!("count_gof_window{k}");
        reports.push(match poisson_gof(&draws, t * vol) {
            Ok(r) => StatReport::test(EXP, &name, &r, trials as u64, DEFAULT_ALPHA),
            Err(e) => StatReport::failure(EXP, &name, e.to_string()),
        });
        let mut acc = Accumulator::new();
        for &d in &draws {
            acc.push(d as f64 / vol);
        }
        reports.push(StatReport::mean(EXP, &format!("intensity_window{k}"), acc, Some(t)));
    }
    let m = windows.len();
    let (m0, m1) = (t * pair.0.haar_volume(carrier), t * pair.1.haar_volume(carrier));
    let mut acc = Accumulator::new();
    for c in &counts {
        acc.push((c[m] as f64 - m0) * (c[m + 1] as f64 - m1));
    }
    reports.push(StatReport::mean(EXP, "disjoint_count_covariance", acc, Some(0.0)));
    Ok(reports)
}

fn windows_overlap(carrier: &Carrier, a: &Window, b: &Window) -> bool {
    let (alo, ahi) = a.bounds(carrier);
    let (blo, bhi) = b.bounds(carrier);
    (0..alo.len()).all(|i| alo[i] < bhi[i] && blo[i] < ahi[i])
}

/// Intensity of independent `p`-thinning of Poisson(`t`), against `p t`.
pub fn check_thinning_intensity(
    t: f64,
    p: f64,
    carrier: &Carrier,
    window: &Window,
    trials: usize,
    seed: u64,
) -> Result<StatReport> {
    window.validate(carrier)?;
    let vol = window.haar_volume(carrier);
    let vals = run_trials(trials, seed, stream::SAMPLE, |_, rng| -> Result<f64> {
        let c = sample_poisson(carrier, window, t, rng)?;
        let marked = attach_iid_marks(&c, &MarkSpace::UnitInterval, rng)?;
        Ok(independent_thinning(&marked, p)?.len() as f64 / vol)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut acc = Accumulator::new();
    for v in vals {
        acc.push(v);
    }
    Ok(StatReport::mean(
        "intensity_laws",
        "independent_thinning_intensity",
        acc,
        Some(p * t),
    ))
}

/// Constant thickening of `base` by `offsets` on the torus: the point count
/// is exactly `|F|` times the base count in every configuration, and the
/// intensity is `|F|` times the base intensity.
pub fn check_thickening_intensity(
    base: &ProcessSpec,
    offsets: &[GroupPoint],
    carrier: &Carrier,
    trials: usize,
    seed: u64,
) -> Result<Vec<StatReport>> {
    const EXP: &str = "intensity_laws";
    base.validate(carrier)?;
    let vol = Window::Full.haar_volume(carrier);
    if !vol.is_finite() {
        return usage("thickening counts are taken on the torus");
    }
    let vals = run_trials(trials, seed, stream::AUX, |_, rng| -> Result<(bool, f64)> {
        let c = base.sample(carrier, &Window::Full, rng)?;
        let th = constant_thickening(&c, offsets)?;
        Ok((th.len() == offsets.len() * c.len(), th.len() as f64 / vol))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let matched = vals.iter().filter(|v| v.0).count() as u64;
    let mut acc = Accumulator::new();
    for v in &vals {
        acc.push(v.1);
    }
    Ok(vec![
        StatReport::exact(EXP, "thickened_count_equals_F_times_count", matched, trials as u64),
        StatReport::mean(
            EXP,
            "thickened_intensity",
            acc,
            Some(offsets.len() as f64 * base.intensity(carrier)),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::all_pass;

    fn torus() -> Carrier {
        Carrier::torus(2, 10.0).unwrap()
    }

    #[test]
    fn poisson_passes_and_lattice_fails() {
        let (w, pair) = default_law_windows(2, 10.0);
        let r = check_poisson_law(&ProcessSpec::poisson(1.0), &torus(), &w, &pair, 2000, 2).unwrap();
        assert_eq!(r.len(), 7);
        assert!(all_pass(&r), "{r:#?}");
        let r = check_poisson_law(&ProcessSpec::Lattice { spacing: 1.0 }, &torus(), &w, &pair, 500, 1).unwrap();
        assert!(!all_pass(&r));
    }

    #[test]
    fn overlapping_pair_is_rejected() {
        let (w, _) = default_law_windows(2, 10.0);
        let pair = (Window::cube(0.0, 2.0, 2), Window::cube(1.0, 3.0, 2));
        assert!(check_poisson_law(&ProcessSpec::poisson(1.0), &torus(), &w, &pair, 10, 1).is_err());
    }

    #[test]
    fn thinning_and_thickening_intensities() {
        let r = check_thinning_intensity(1.0, 0.3, &torus(), &Window::Full, 500, 2).unwrap();
        assert!(r.pass, "{r:?}");
        let base = ProcessSpec::Thinned {
            intensity: 1.0,
            delta: 0.5,
        };
        let f = vec![torus().identity(), GroupPoint::new(&[0.2, 0.0])];
        let r = check_thickening_intensity(&base, &f, &torus(), 300, 3).unwrap();
        assert!(all_pass(&r), "{r:?}");
    }
}
