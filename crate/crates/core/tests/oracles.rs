//! Closed-form values checked against a second route, with frozen literals.

use palmlab::geometry::{
    haar_volume_quadrature, right_translate_volume, unit_ball_volume, Carrier, GroupPoint, Window, QUADRATURE_RTOL,
};
use palmlab::process::{count, sample_poisson, ProcessSpec};
use palmlab::rng::{mix64, run_trials, splitmix64, trial_rng};
use palmlab::stats::{chi_square_gof, poisson_gof, two_sample_ks};

/// `exp(-pi/4)`, from an independent evaluation.
const VOID_HALF_UNIT: f64 = 0.45593812776599624;

#[test]
fn splitmix_matches_reference_outputs() {
    assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
    assert_eq!(mix64(0, 0, 0), 0x2382_75bc_38fc_be91);
    assert_eq!(mix64(1, 2, 3), 0xd073_4750_fde3_62b3);
    assert_eq!(mix64(u64::MAX, 9, 1_000_000), 0x7d07_7db5_0333_1b49);
}

#[test]
fn thinned_intensity_is_the_void_probability() {
    let t = Carrier::torus(2, 10.0).unwrap();
    let spec = ProcessSpec::Thinned {
        intensity: 1.0,
        delta: 0.5,
    };
    assert!((spec.intensity(&t) - VOID_HALF_UNIT).abs() < 1e-15);
    assert!((unit_ball_volume(2) * 0.25 - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
}

#[test]
fn affine_volumes_agree_with_quadrature() {
    let a = Carrier::affine();
    let u = Window::affine_box((1.0, 2.0), (0.0, 1.0));
    // Integral of a^-2 over [1, 2] x [0, 1].
    assert_eq!(u.haar_volume(&a), 0.5);
    assert!((haar_volume_quadrature(&a, &u) - 0.5).abs() <= QUADRATURE_RTOL * 0.5);
    // U f^-1 = [1/2, 1] x [0, 1] for f = (2, 0).
    let shifted = right_translate_volume(&a, &u, &GroupPoint::new(&[2.0, 0.0])).unwrap();
    assert!((shifted - 1.0).abs() <= QUADRATURE_RTOL);
    assert_eq!(Window::affine_box((0.5, 1.0), (0.0, 1.0)).haar_volume(&a), 1.0);
    let expected_count = 20.0 * (0.5 + shifted);
    assert!((expected_count - 30.0).abs() < 1e-4);
}

#[test]
fn affine_ball_volume_agrees_with_quadrature() {
    let a = Carrier::affine();
    let ball = Window::ball(GroupPoint::new(&[1.5, -0.5]), 1.0);
    let closed = ball.haar_volume(&a);
    assert!((closed - 2.0 * std::f64::consts::PI * (1f64.cosh() - 1.0)).abs() < 1e-12);
    assert!((haar_volume_quadrature(&a, &ball) - closed).abs() <= 1e-3 * closed);
}

#[test]
fn exact_expected_counts_fit_perfectly() {
    let r = chi_square_gof(&[12, 30, 58], &[12.0, 30.0, 58.0], 0).unwrap();
    assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    let xs = [0.3, 1.2, 2.5, 2.5, 7.0];
    assert_eq!(two_sample_ks(&xs, &xs).unwrap().statistic, 0.0);
}

#[test]
fn window_counts_of_the_sampler_are_poisson_four() {
    let e = Carrier::euclidean(2).unwrap();
    let u = Window::cube(0.0, 2.0, 2);
    let draws: Vec<u64> = run_trials(100_000, 17, 1, |_, rng| {
        count(&sample_poisson(&e, &u, 1.0, rng).unwrap(), &u) as u64
    });
    let r = poisson_gof(&draws, 4.0).unwrap();
    assert!(r.p_value >= 0.01, "{r:?}");
    let mean = draws.iter().sum::<u64>() as f64 / draws.len() as f64;
    assert!((mean - 4.0).abs() < 3.0 * (4.0f64 / 1e5).sqrt() + 1e-12, "{mean}");
}

#[test]
fn lattice_shift_is_one_separated() {
    let t = Carrier::torus(2, 10.0).unwrap();
    let c = ProcessSpec::Lattice { spacing: 1.0 }
        .sample(&t, &Window::Full, &mut trial_rng(1, 1, 1))
        .unwrap();
    assert_eq!(c.len(), 100);
    assert!(c.min_pairwise_distance() > 0.5);
}
