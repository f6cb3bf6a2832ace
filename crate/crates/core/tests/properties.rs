use proptest::prelude::*;

use palmlab::factor::{delta_thinning, distance_r_graph, local_decode_marks, local_encode_marks, Sign};
use palmlab::geometry::{right_translate_volume, Carrier, GroupPoint, Window, ALGEBRAIC_TOL};
use palmlab::harness::{ExperimentConfig, Subcommand};
use palmlab::io::{configuration_json, parse_configuration, Dumped};
use palmlab::process::{sample_poisson, translate, Configuration, MarkedConfiguration, ProcessSpec};
use palmlab::report::StatReport;
use palmlab::rng::trial_rng;
use palmlab::stats::Accumulator;

const L: f64 = 10.0;
/// Grid of exactly representable torus coordinates.
const STEP: f64 = 1.0 / 1024.0;

fn torus() -> Carrier {
    Carrier::torus(2, L).unwrap()
}

fn torus_point() -> impl Strategy<Value = GroupPoint> {
    let n = (L / STEP) as u32;
    (0..n, 0..n).prop_map(|(x, y)| GroupPoint::new(&[x as f64 * STEP, y as f64 * STEP]))
}

fn affine_point() -> impl Strategy<Value = GroupPoint> {
    (-3.0f64..3.0, -5.0f64..5.0).prop_map(|(la, b)| GroupPoint::new(&[la.exp(), b]))
}

fn close(a: &GroupPoint, b: &GroupPoint) -> bool {
    a.coords()
        .iter()
        .zip(b.coords())
        .all(|(x, y)| (x - y).abs() <= ALGEBRAIC_TOL * (1.0 + x.abs().max(y.abs())))
}

fn poisson(seed: u64) -> Configuration {
    sample_poisson(&torus(), &Window::Full, 1.0, &mut trial_rng(seed, 99, 0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn torus_group_laws_are_exact(g in torus_point(), h in torus_point(), k in torus_point()) {
        let t = torus();
        let gh_k = t.mul(&t.mul(&g, &h)?, &k)?;
        let g_hk = t.mul(&g, &t.mul(&h, &k)?)?;
        prop_assert_eq!(gh_k, g_hk);
        prop_assert_eq!(t.mul(&g, &t.inv(&g)?)?, t.identity());
        prop_assert_eq!(t.mul(&t.identity(), &g)?, g);
    }

    #[test]
    fn affine_group_laws(g in affine_point(), h in affine_point(), k in affine_point()) {
        let a = Carrier::affine();
        let gh_k = a.mul(&a.mul(&g, &h)?, &k)?;
        let g_hk = a.mul(&g, &a.mul(&h, &k)?)?;
        prop_assert!(close(&gh_k, &g_hk), "{:?} vs {:?}", gh_k, g_hk);
        prop_assert!(close(&a.mul(&g, &a.inv(&g)?)?, &a.identity()));
    }

    #[test]
    fn torus_metric_is_left_invariant(g in torus_point(), x in torus_point(), y in torus_point()) {
        let t = torus();
        prop_assert_eq!(t.distance(&t.mul(&g, &x)?, &t.mul(&g, &y)?), t.distance(&x, &y));
    }

    #[test]
    fn affine_metric_is_left_invariant(g in affine_point(), x in affine_point(), y in affine_point()) {
        let a = Carrier::affine();
        let d = a.distance(&x, &y);
        let dg = a.distance(&a.mul(&g, &x)?, &a.mul(&g, &y)?);
        prop_assert!((d - dg).abs() <= 1e-7 * (1.0 + d), "{} vs {}", d, dg);
    }

    #[test]
    fn affine_haar_volume_is_left_invariant(g in affine_point(), la in -1.0f64..1.0, wa in 0.1f64..2.0, b in -2.0f64..2.0, wb in 0.1f64..3.0) {
        let a = Carrier::affine();
        let lo = la.exp();
        let u = Window::affine_box((lo, lo * (1.0 + wa)), (b, b + wb));
        let v = u.haar_volume(&a);
        let vg = u.translate(&a, &g).haar_volume(&a);
        prop_assert!((v - vg).abs() <= 1e-9 * v, "{} vs {}", v, vg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn right_translation_scales_affine_volume_by_the_modulus(la in -0.5f64..0.5, lf in -1.0f64..1.0, bf in -2.0f64..2.0) {
        let a = Carrier::affine();
        let lo = la.exp();
        let u = Window::affine_box((lo, 2.0 * lo), (0.0, 1.0));
        let f = GroupPoint::new(&[lf.exp(), bf]);
        let ratio = right_translate_volume(&a, &u, &f)? / u.haar_volume(&a);
        prop_assert!((ratio - lf.exp()).abs() <= 1e-6 * ratio, "{} vs {}", ratio, lf.exp());
    }

    #[test]
    fn torus_is_unimodular(x in 0.0f64..5.0, w in 0.5f64..4.0, f in torus_point()) {
        let t = torus();
        let u = Window::Box { lo: vec![x, x], hi: vec![x + w, x + w] };
        let v = right_translate_volume(&t, &u, &f)?;
        prop_assert!((v - w * w).abs() <= 1e-6 * w * w);
    }

    #[test]
    fn thinning_and_graphs_commute_with_translation(seed in 0u64..10_000, g in torus_point(), r in 0.1f64..2.4) {
        let c = poisson(seed);
        let moved = translate(&c, &g)?;
        prop_assert_eq!(delta_thinning(&moved, 0.5), translate(&delta_thinning(&c, 0.5), &g)?);
        let t = torus();
        let mut a: Vec<_> = distance_r_graph(&c, r)?
            .edge_points()
            .into_iter()
            .map(|(x, y)| (t.mul(&g, &x).unwrap(), t.mul(&g, &y).unwrap()))
            .collect();
        let mut b = distance_r_graph(&moved, r)?.edge_points();
        let key = |p: &(GroupPoint, GroupPoint)| (p.0.coords().to_vec(), p.1.coords().to_vec());
        a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        b.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn accumulator_merge_is_associative_and_commutative(
        xs in prop::collection::vec((-1e3f64..1e3, 0.0f64..50.0), 0..40),
        cut1 in 0usize..40,
        cut2 in 0usize..40,
    ) {
        let (i, j) = (cut1.min(cut2).min(xs.len()), cut1.max(cut2).min(xs.len()));
        let acc = |s: &[(f64, f64)]| {
            let mut a = Accumulator::new();
            for &(x, y) in s {
                a.push_pair(x, y);
            }
            a
        };
        let (a, b, c) = (acc(&xs[..i]), acc(&xs[i..j]), acc(&xs[j..]));
        prop_assert_eq!(a.merge(&b).merge(&c), a.merge(&b.merge(&c)));
        prop_assert_eq!(a.merge(&b), b.merge(&a));
        prop_assert_eq!(a.merge(&b).merge(&c), acc(&xs));
        let reports: Vec<StatReport> = [a, b, c].iter().map(|x| StatReport::mean("e", "s", *x, Some(0.0))).collect();
        let left = reports[0].merge(&reports[1])?.merge(&reports[2])?;
        let right = reports[0].merge(&reports[1].merge(&reports[2])?)?;
        prop_assert_eq!(left.csv_row(), right.csv_row());
    }

    #[test]
    fn configuration_dump_round_trips(seed in 0u64..10_000) {
        let c = poisson(seed);
        let line = configuration_json(&c, None)?;
        match parse_configuration(&line)? {
            Dumped::Plain(back) => prop_assert_eq!(back, c),
            Dumped::Marked(_) => prop_assert!(false, "marks appeared"),
        }
    }

    #[test]
    fn experiment_config_round_trips(seed in any::<u64>(), trials in 1usize..100_000, radius in 0.1f64..2.4, dumps in any::<bool>()) {
        let mut cfg = ExperimentConfig { seed, trials: Some(trials), ..ExperimentConfig::default() };
        cfg.experiment.radius = Some(radius);
        cfg.output.dumps = dumps;
        let cfg = cfg.resolve(Subcommand::VerifyMtp, false)?;
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap())?;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn local_encoding_round_trips(seed in 0u64..10_000, bits in any::<u64>()) {
        let spec = ProcessSpec::Thinned { intensity: 1.0, delta: 0.5 };
        let c = spec.sample(&torus(), &Window::Full, &mut trial_rng(seed, 98, 0))?;
        let signs = (0..c.len()).map(|i| if bits >> (i % 64) & 1 == 1 { Sign::Plus } else { Sign::Minus }).collect();
        let mc = MarkedConfiguration::new(c, signs)?;
        prop_assert_eq!(local_decode_marks(&local_encode_marks(&mc, 0.5)?, 0.5)?, mc);
    }
}
