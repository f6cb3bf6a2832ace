use rand::Rng;

use super::{check_palm_inputs, core_views, palm_samples, Battery, CheckParams, Observations};
use crate::error::{usage, Error, Result};
use crate::factor::{constant_thickening, graph_from_arrow_set, marking_from_map, thinning_from_set, Local};
use crate::geometry::{right_translate_volume, Carrier, GroupPoint, Window, MAX_DIM};
use crate::process::{count, sample_poisson, Configuration, ProcessSpec, RootedConfiguration};
use crate::report::{Criterion, Estimator, StatReport};
use crate::rng::{run_trials, stream};
use crate::stats::Accumulator;

/// Minimum empirical probability of the conditioning event in the thinning check.
pub const MIN_CONDITIONING_MASS: f64 = 1e-3;

fn collect<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

fn vacuous(experiment: &str) -> Vec<StatReport> {
    vec![StatReport::record(experiment, "no_samples", 0.0, 0.0, 0).with_note("no samples")]
}

/// Fresh Poisson samples near the identity with the identity adjoined.
pub fn mecke_reference(
    intensity: f64,
    carrier: &Carrier,
    r_obs: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<RootedConfiguration>> {
    let id = carrier.identity();
    let ball = Window::ball(id, r_obs);
    collect(run_trials(trials, seed, stream::REFERENCE, |_, rng| {
        let c = sample_poisson(carrier, &ball, intensity, rng)?;
        let mut pts = c.points().to_vec();
        pts.push(id);
        RootedConfiguration::new(Configuration::assemble(*carrier, ball.clone(), pts))
    }))
}

fn singleton_clusters(samples: &[RootedConfiguration], battery: &Battery) -> Observations {
    samples.iter().map(|v| vec![battery.observe(v)]).collect()
}

/// Compares the Palm battery of `spec` with that of a Poisson process of the
/// same intensity with the root adjoined.
pub fn check_mecke_slivnyak(spec: &ProcessSpec, carrier: &Carrier, p: &CheckParams) -> Result<Vec<StatReport>> {
    const EXP: &str = "mecke_slivnyak";
    let r_obs = p.battery.reach();
    check_palm_inputs(spec, carrier, r_obs)?;
    let t = spec.intensity(carrier);
    if t == 0.0 {
        return Ok(vacuous(EXP));
    }
    let palm = palm_samples(spec, carrier, p.trials, r_obs, p.core, p.seed)?;
    if palm.is_empty() {
        return Ok(vacuous(EXP));
    }
    let reference = mecke_reference(t, carrier, r_obs, p.trials, p.seed)?;
    Ok(p.battery.compare(
        EXP,
        &palm.observe(&p.battery),
        &singleton_clusters(&reference, &p.battery),
        p.alpha,
    ))
}

/// Both sides of the Campbell-Little-Mecke-Matthes identity, from independent
/// simulations.
#[derive(Clone, Debug, PartialEq)]
pub struct ClmmSides {
    /// Per-trial `sum over x in omega of f(x, x^-1 omega)`.
    pub lhs: Accumulator,
    /// Per-trial `(t N I, N)` where `I` is the quadrature integral at a
    /// uniformly chosen core root and `N` the number of core points.
    pub rhs: Accumulator,
}

struct Quadrature {
    nodes: Vec<GroupPoint>,
    weight: f64,
}

fn quadrature_nodes(carrier: &Carrier, support: &Window, h: f64) -> Result<Quadrature> {
    let Window::Box { lo, hi } = support else {
        return usage("the support window must be a box");
    };
    let d = carrier.dim();
    let mut counts = [1usize; MAX_DIM];
    let mut steps = [0.0; MAX_DIM];
    for i in 0..d {
        let extent = hi[i] - lo[i];
        let n = (extent / h).round();
        if n < 1.0 || (n * h - extent).abs() > 1e-9 * extent.max(1.0) {
            return usage(format!(
                "support extent {extent} is not a multiple of the grid side {h}"
            ));
        }
        counts[i] = n as usize;
        steps[i] = extent / n;
    }
    let mut nodes = Vec::new();
    let mut k = [0usize; MAX_DIM];
    loop {
        let mut c = [0.0; MAX_DIM];
        for i in 0..d {
            c[i] = lo[i] + (k[i] as f64 + 0.5) * steps[i];
        }
        nodes.push(carrier.canonicalize(&GroupPoint::new(&c[..d])));
        let mut ax = 0;
        loop {
            if ax == d {
                return Ok(Quadrature {
                    nodes,
                    weight: steps[..d].iter().product(),
                });
            }
            k[ax] += 1;
            if k[ax] < counts[ax] {
                break;
            }
            k[ax] = 0;
            ax += 1;
        }
    }
}

fn nonneg(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else {
        usage(format!("test function returned {v}; it must be non-negative"))
    }
}

/// Simulates both sides of the identity for a non-negative `f` supported on
/// `support` (an axis-aligned box), integrating over the support with a
/// midpoint grid of side `h`.
pub fn clmm_sides<F>(
    f: &Local<F>,
    support: &Window,
    h: f64,
    spec: &ProcessSpec,
    carrier: &Carrier,
    p: &CheckParams,
) -> Result<ClmmSides>
where
    F: Fn(&GroupPoint, &RootedConfiguration) -> f64 + Sync,
{
    check_palm_inputs(spec, carrier, f.radius)?;
    support.validate(carrier)?;
    let quad = quadrature_nodes(carrier, support, h)?;
    let t = spec.intensity(carrier);
    let lhs = collect(run_trials(p.trials, p.seed, stream::DIRECT, |_, rng| -> Result<f64> {
        let c = spec.sample(carrier, &Window::Full, rng)?;
        let idx = c.index();
        let mut s = 0.0;
        for (i, x) in c.points().iter().enumerate() {
            if support.contains(carrier, x) {
                s += nonneg((f.rule)(x, &c.view_at(i, f.radius, &idx)))?;
            }
        }
        Ok(s)
    }))?;
    let rhs = collect(run_trials(
        p.trials,
        p.seed,
        stream::PALM,
        |_, rng| -> Result<(f64, f64)> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            let core = p.core.indices(&c)?;
            if core.is_empty() {
                return Ok((0.0, 0.0));
            }
            let root = core[rng.random_range(0..core.len())];
            let view = c.view_at(root, f.radius, &c.index());
            let mut integral = 0.0;
            for x in &quad.nodes {
                integral += nonneg((f.rule)(x, &view))?;
            }
            integral *= quad.weight;
            let n = core.len() as f64;
            Ok((t * n * integral, n))
        },
    ))?;
    let mut sides = ClmmSides {
        lhs: Accumulator::new(),
        rhs: Accumulator::new(),
    };
    for v in lhs {
        sides.lhs.push(v);
    }
    for (y, n) in rhs {
        sides.rhs.push_pair(y, n);
    }
    Ok(sides)
}

/// Reports the two sides and their standardised difference.
pub fn check_clmm<F>(
    f: &Local<F>,
    support: &Window,
    h: f64,
    spec: &ProcessSpec,
    carrier: &Carrier,
    p: &CheckParams,
) -> Result<Vec<StatReport>>
where
    F: Fn(&GroupPoint, &RootedConfiguration) -> f64 + Sync,
{
    const EXP: &str = "clmm";
    let s = clmm_sides(f, support, h, spec, carrier, p)?;
    let lhs = Estimator::Mean(s.lhs);
    let rhs = Estimator::Ratio(s.rhs);
    let (le, ls, ln) = lhs.value();
    let (re, rs, rn) = rhs.value();
    Ok(vec![
        StatReport::record(EXP, "lhs", le, ls, ln),
        StatReport::record(EXP, "rhs", re, rs, rn),
        StatReport::difference(EXP, "lhs_minus_rhs", lhs, rhs),
    ])
}

fn view_nearest(v: &RootedConfiguration) -> Option<GroupPoint> {
    let c = v.carrier();
    let id = c.identity();
    let mut best: Option<GroupPoint> = None;
    for p in v.points() {
        if *p == id {
            continue;
        }
        if best.is_none_or(|b| c.closer(&id, p, &b) == std::cmp::Ordering::Less) {
            best = Some(*p);
        }
    }
    best
}

/// Arrow rule of the nearest-neighbour digraph, reading the ball of radius `r`.
pub fn nearest_neighbor_arrow(r: f64) -> Local<impl Fn(&RootedConfiguration, &GroupPoint) -> bool + Copy + Sync> {
    Local::new(r, |v: &RootedConfiguration, y: &GroupPoint| view_nearest(v) == Some(*y))
}

/// Unit mass from each point to its nearest neighbour within `r`.
pub fn nearest_neighbor_transport(r: f64) -> Local<impl Fn(&GroupPoint, &RootedConfiguration) -> f64 + Copy + Sync> {
    Local::new(
        r,
        |y: &GroupPoint, v: &RootedConfiguration| {
            if view_nearest(v) == Some(*y) {
                1.0
            } else {
                0.0
            }
        },
    )
}

struct Flow {
    out: Accumulator,
    inn: Accumulator,
    diff: Accumulator,
}

fn flow_reports(experiment: &str, what: (&str, &str), flow: Flow) -> Vec<StatReport> {
    vec![
        StatReport::ratio(experiment, what.0, flow.out, None),
        StatReport::ratio(experiment, what.1, flow.inn, None),
        StatReport::ratio(experiment, "in_minus_out", flow.diff, Some(0.0)),
    ]
}

fn accumulate_flows(per_trial: Vec<(f64, f64, f64)>) -> Flow {
    let mut f = Flow {
        out: Accumulator::new(),
        inn: Accumulator::new(),
        diff: Accumulator::new(),
    };
    for (o, i, n) in per_trial {
        f.out.push_pair(o, n);
        f.inn.push_pair(i, n);
        f.diff.push_pair(i - o, n);
    }
    f
}

/// Palm expectations of mass sent from and received at the root, for a
/// transport `T(x^-1 y; x^-1 omega)` vanishing beyond the rule radius.
pub fn check_mtp<F>(
    transport: &Local<F>,
    spec: &ProcessSpec,
    carrier: &Carrier,
    p: &CheckParams,
) -> Result<Vec<StatReport>>
where
    F: Fn(&GroupPoint, &RootedConfiguration) -> f64 + Sync,
{
    check_palm_inputs(spec, carrier, transport.radius)?;
    let per_trial = collect(run_trials(
        p.trials,
        p.seed,
        stream::PALM,
        |_, rng| -> Result<(f64, f64, f64)> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            let idx = c.index();
            let pts = c.points();
            let mut out = vec![0.0; c.len()];
            let mut inn = vec![0.0; c.len()];
            for (i, x) in pts.iter().enumerate() {
                let view = c.view_at(i, transport.radius, &idx);
                let xinv = carrier.inv_unchecked(x);
                let mut targets = Vec::new();
                idx.within(x, transport.radius, |j| targets.push(j));
                for j in targets {
                    let m = nonneg((transport.rule)(&carrier.mul_unchecked(&xinv, &pts[j]), &view))?;
                    out[i] += m;
                    inn[j] += m;
                }
            }
            let core = p.core.indices(&c)?;
            Ok((
                core.iter().map(|&i| out[i]).sum(),
                core.iter().map(|&i| inn[i]).sum(),
                core.len() as f64,
            ))
        },
    ))?;
    Ok(flow_reports(
        "mtp",
        ("mass_out", "mass_in"),
        accumulate_flows(per_trial),
    ))
}

/// Palm expectations of the root's out- and in-degree in the factor graph
/// of an arrow rule.
pub fn check_degree_balance<F>(
    arrow: &Local<F>,
    spec: &ProcessSpec,
    carrier: &Carrier,
    p: &CheckParams,
) -> Result<Vec<StatReport>>
where
    F: Fn(&RootedConfiguration, &GroupPoint) -> bool + Sync,
{
    check_palm_inputs(spec, carrier, arrow.radius)?;
    let per_trial = collect(run_trials(
        p.trials,
        p.seed,
        stream::PALM,
        |_, rng| -> Result<(f64, f64, f64)> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            let g = graph_from_arrow_set(&c, arrow)?;
            let (outd, ind) = (g.out_degrees(), g.in_degrees());
            let core = p.core.indices(&c)?;
            Ok((
                core.iter().map(|&i| outd[i] as f64).sum(),
                core.iter().map(|&i| ind[i] as f64).sum(),
                core.len() as f64,
            ))
        },
    ))?;
    Ok(flow_reports(
        "degree_balance",
        ("out_degree", "in_degree"),
        accumulate_flows(per_trial),
    ))
}

fn rooted_within(carrier: &Carrier, pts: Vec<GroupPoint>, r: f64) -> RootedConfiguration {
    let id = carrier.identity();
    let pts = pts.into_iter().filter(|p| carrier.distance(&id, p) <= r).collect();
    RootedConfiguration::new(Configuration::assemble(*carrier, Window::ball(id, r), pts)).expect("root is retained")
}

fn check_internal_radius(carrier: &Carrier, r: f64) -> Result<()> {
    if let Some(side) = carrier.side() {
        if r >= side / 2.0 {
            return usage(format!("observation radius {r} must be below L/2"));
        }
    }
    Ok(())
}

/// Palm battery of `theta^A(Pi)` against `theta^A` applied to Palm samples of
/// `Pi` conditioned on the root being retained.
pub fn check_palm_thinning<F>(
    a: &Local<F>,
    spec: &ProcessSpec,
    carrier: &Carrier,
    p: &CheckParams,
) -> Result<Vec<StatReport>>
where
    F: Fn(&RootedConfiguration) -> bool + Sync,
{
    let r_bat = p.battery.reach();
    check_palm_inputs(spec, carrier, r_bat)?;
    a.check(carrier)?;
    let r_wide = r_bat + a.radius;
    check_internal_radius(carrier, r_wide)?;

    let direct = collect(run_trials(
        p.trials,
        p.seed,
        stream::PIPELINE_A,
        |_, rng| -> Result<Vec<Vec<f64>>> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            let thinned = thinning_from_set(&c, a)?;
            Ok(core_views(&thinned, &p.core, r_bat)?
                .iter()
                .map(|v| p.battery.observe(v))
                .collect())
        },
    ))?;

    let conditioned = collect(run_trials(
        p.trials,
        p.seed,
        stream::PIPELINE_B,
        |_, rng| -> Result<(Vec<Vec<f64>>, usize)> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            let views = core_views(&c, &p.core, r_wide)?;
            let total = views.len();
            let mut obs = Vec::new();
            for view in views {
                let v = view.config();
                let vidx = v.index();
                if !(a.rule)(&v.view_at(view.root_index(), a.radius, &vidx)) {
                    continue;
                }
                let id = carrier.identity();
                let kept: Vec<GroupPoint> = (0..v.len())
                    .filter(|&j| carrier.distance(&id, &v.points()[j]) <= r_bat)
                    .filter(|&j| (a.rule)(&v.view_at(j, a.radius, &vidx)))
                    .map(|j| v.points()[j])
                    .collect();
                obs.push(p.battery.observe(&rooted_within(carrier, kept, r_bat)));
            }
            Ok((obs, total))
        },
    ))?;
    let total: usize = conditioned.iter().map(|c| c.1).sum();
    let retained: usize = conditioned.iter().map(|c| c.0.len()).sum();
    let mass = if total == 0 {
        0.0
    } else {
        retained as f64 / total as f64
    };
    if mass < MIN_CONDITIONING_MASS {
        return Err(Error::InsufficientData(format!(
            "insufficient conditioning mass: the root is retained in {retained} of {total} samples"
        )));
    }
    let conditioned: Observations = conditioned.into_iter().map(|c| c.0).collect();
    let mut reports = p.battery.compare("palm_thinning", &direct, &conditioned, p.alpha);
    reports.push(StatReport::record(
        "palm_thinning",
        "conditioning_mass",
        mass,
        0.0,
        total as u64,
    ));
    Ok(reports)
}

/// Checks that colouring and rerooting commute at every core point.
pub fn check_palm_colouring<M, F>(
    colour: &Local<F>,
    spec: &ProcessSpec,
    carrier: &Carrier,
    p: &CheckParams,
) -> Result<StatReport>
where
    M: PartialEq + Clone + Send,
    F: Fn(&RootedConfiguration) -> M + Sync,
{
    let r_cmp = p.battery.reach();
    check_palm_inputs(spec, carrier, r_cmp)?;
    colour.check(carrier)?;
    check_internal_radius(carrier, r_cmp + colour.radius)?;
    let counts = collect(run_trials(
        p.trials,
        p.seed,
        stream::PALM,
        |_, rng| -> Result<(u64, u64)> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            let coloured = marking_from_map(&c, colour)?;
            let idx = c.index();
            let (mut matched, mut total) = (0, 0);
            for i in p.core.indices(&c)? {
                let x = c.points()[i];
                let xinv = carrier.inv_unchecked(&x);
                let mut first: Vec<(GroupPoint, M)> = Vec::new();
                idx.within(&x, r_cmp, |j| {
                    first.push((
                        carrier.mul_unchecked(&xinv, &c.points()[j]),
                        coloured.marks()[j].clone(),
                    ));
                });
                first.sort_by(|a, b| a.0.lex_cmp(&b.0));

                let view = c.view_at(i, r_cmp + colour.radius, &idx);
                let recoloured = marking_from_map(view.config(), colour)?;
                let id = carrier.identity();
                let second: Vec<(GroupPoint, M)> = recoloured
                    .iter()
                    .filter(|(q, _)| carrier.distance(&id, q) <= r_cmp)
                    .map(|(q, m)| (*q, m.clone()))
                    .collect();
                total += 1;
                if first == second {
                    matched += 1;
                }
            }
            Ok((matched, total))
        },
    ))?;
    let matched = counts.iter().map(|c| c.0).sum();
    let total = counts.iter().map(|c| c.1).sum();
    Ok(StatReport::exact(
        "palm_colouring",
        "colour_then_reroot_equals_reroot_then_colour",
        matched,
        total,
    ))
}

/// Palm battery of `Pi F` against `X^-1 (Pi_0 F)` with `X` uniform on `F`,
/// for a delta-thinned Poisson base process.
pub fn check_palm_thickening(
    offsets: &[GroupPoint],
    spec: &ProcessSpec,
    carrier: &Carrier,
    p: &CheckParams,
) -> Result<Vec<StatReport>> {
    const EXP: &str = "palm_thickening";
    let ProcessSpec::Thinned { delta, .. } = *spec else {
        return usage("the thickening check needs a delta-thinned base process");
    };
    let r_bat = p.battery.reach();
    check_palm_inputs(spec, carrier, r_bat)?;
    let id = carrier.identity();
    if !offsets.contains(&id) {
        return usage("offset set must contain the identity");
    }
    let reach = offsets.iter().map(|f| carrier.distance(&id, f)).fold(0.0, f64::max);
    if delta <= 2.0 * reach {
        return Err(Error::Precondition(format!(
            "delta {delta} does not exceed twice the offset reach {reach}"
        )));
    }
    let r_base = r_bat + 2.0 * reach;
    check_internal_radius(carrier, r_base)?;

    let direct = collect(run_trials(
        p.trials,
        p.seed,
        stream::PIPELINE_A,
        |_, rng| -> Result<(Vec<Vec<f64>>, bool)> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            let thick = constant_thickening(&c, offsets)?;
            let exact = thick.len() == offsets.len() * c.len();
            let obs = core_views(&thick, &p.core, r_bat)?
                .iter()
                .map(|v| p.battery.observe(v))
                .collect();
            Ok((obs, exact))
        },
    ))?;
    let matched = direct.iter().filter(|d| d.1).count() as u64;
    let direct: Observations = direct.into_iter().map(|d| d.0).collect();

    let rerooted = collect(run_trials(
        p.trials,
        p.seed,
        stream::PIPELINE_B,
        |_, rng| -> Result<Vec<Vec<f64>>> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            let views = core_views(&c, &p.core, r_base)?;
            let mut obs = Vec::with_capacity(views.len());
            for v in views {
                let x = offsets[rng.random_range(0..offsets.len())];
                let xinv = carrier.inv_unchecked(&x);
                let mut pts = Vec::with_capacity(v.points().len() * offsets.len());
                for y in v.points() {
                    for f in offsets {
                        pts.push(carrier.mul_unchecked(&xinv, &carrier.mul_unchecked(y, f)));
                    }
                }
                obs.push(p.battery.observe(&rooted_within(carrier, pts, r_bat)));
            }
            Ok(obs)
        },
    ))?;

    let mut reports = p.battery.compare(EXP, &direct, &rerooted, p.alpha);
    reports.push(StatReport::exact(
        EXP,
        "thickened_count_equals_F_times_count",
        matched,
        p.trials as u64,
    ));
    Ok(reports)
}

fn right_image_bounds(carrier: &Carrier, u: &Window, f: &GroupPoint) -> Result<(Vec<f64>, Vec<f64>)> {
    let Window::Box { lo, hi } = u else {
        return usage("thickening window must be a box");
    };
    let k = carrier.inv(f)?;
    let (alpha, beta) = (k.coords()[0], k.coords()[1]);
    let shear = [lo[0] * beta, hi[0] * beta];
    let img_lo = [lo[0] * alpha, lo[1] + shear[0].min(shear[1])];
    let img_hi = [hi[0] * alpha, hi[1] + shear[0].max(shear[1])];
    Ok((
        vec![lo[0].min(img_lo[0]), lo[1].min(img_lo[1])],
        vec![hi[0].max(img_hi[0]), hi[1].max(img_hi[1])],
    ))
}

/// Mean of `|Pi F cap U|` for `F = {e, f}` on the affine group, against the
/// quadrature value `t (lambda(U) + lambda(U f^-1))` and the unimodular
/// guess `2 t lambda(U)`.
pub fn check_nonunimodular_thickening(
    t: f64,
    u: &Window,
    f: &GroupPoint,
    trials: usize,
    seed: u64,
) -> Result<Vec<StatReport>> {
    const EXP: &str = "nonunimodular_thickening";
    let carrier = Carrier::affine();
    u.validate(&carrier)?;
    carrier.check(f)?;
    let (lo, hi) = right_image_bounds(&carrier, u, f)?;
    let region = Window::Box { lo, hi };
    let offsets = [carrier.identity(), *f];
    let counts = collect(run_trials(trials, seed, stream::SAMPLE, |_, rng| -> Result<f64> {
        let c = sample_poisson(&carrier, &region, t, rng)?;
        Ok(count(&constant_thickening(&c, &offsets)?, u) as f64)
    }))?;
    let mut acc = Accumulator::new();
    for v in counts {
        acc.push(v);
    }
    let vol = u.haar_volume(&carrier);
    let shifted = right_translate_volume(&carrier, u, f)?;
    let expected = t * (vol + shifted);
    let naive = 2.0 * t * vol;
    let differs = (shifted - vol).abs() > 1e-6 * vol;
    let against_naive = StatReport::mean(EXP, "count_vs_2t_vol_U", acc, Some(naive));
    let against_naive = if differs {
        against_naive.with_criterion(Criterion::Separation { min_abs_z: 5.0 })
    } else {
        against_naive
    };
    Ok(vec![
        StatReport::mean(EXP, "count_vs_quadrature", acc, Some(expected)),
        against_naive,
        StatReport::record(EXP, "vol_Uf_inv_over_vol_U", shifted / vol, 0.0, 0),
    ])
}

/// Torus counterpart of [`check_nonunimodular_thickening`]: the thickened
/// count in `U` has mean `2 t lambda(U)`.
pub fn check_unimodular_thickening_control(
    carrier: &Carrier,
    t: f64,
    u: &Window,
    f: &GroupPoint,
    trials: usize,
    seed: u64,
) -> Result<StatReport> {
    if !carrier.is_torus() {
        return usage("the control runs on the torus");
    }
    u.validate(carrier)?;
    let offsets = [carrier.identity(), carrier.canonicalize(f)];
    let counts = collect(run_trials(trials, seed, stream::CONTROL, |_, rng| -> Result<f64> {
        let c = sample_poisson(carrier, &Window::Full, t, rng)?;
        Ok(count(&constant_thickening(&c, &offsets)?, u) as f64)
    }))?;
    let mut acc = Accumulator::new();
    for v in counts {
        acc.push(v);
    }
    Ok(StatReport::mean(
        "unimodular_thickening_control",
        "count_vs_2t_vol_U",
        acc,
        Some(2.0 * t * u.haar_volume(carrier)),
    ))
}
