//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. Every tolerance is pinned below.

use std::process::ExitCode;

use palmlab::geometry::unit_ball_volume;
use palmlab::harness::{self, ExperimentConfig, Outcome, Overrides, Subcommand, DEFAULT_SEED};
use palmlab::palm::{check_mecke_slivnyak, Battery, CheckParams, Core};
use palmlab::process::ProcessSpec;
use palmlab::report::{Estimator, StatReport};
use palmlab::Carrier;

const SEED: u64 = DEFAULT_SEED;
const ALPHA: f64 = 0.01;
const Z_MAX: f64 = 3.0;
const Z_SEPARATION: f64 = 5.0;
const VOID_TOL: f64 = 0.01;
const VOID_RADIUS: f64 = 0.5;
const MIN_VOID_SAMPLES: f64 = 1e5;
const TRIALS: usize = 10_000;
const MIN_ROOTED: f64 = 1e4;
const CONFIGURATIONS: usize = 1000;
const MIN_CONVERGED: f64 = 0.99;
const VORONOI_DIVISIONS: usize = 512;
const EQUIVARIANCE_OPERATIONS: usize = 13;
const DETERMINISM_THREADS: usize = 2;

const RUNS: [Subcommand; 13] = [
    Subcommand::VerifyPoisson,
    Subcommand::VerifyMecke,
    Subcommand::VerifyClmm,
    Subcommand::VerifyMtp,
    Subcommand::VerifyDegrees,
    Subcommand::VerifyThinning,
    Subcommand::VerifyThickening,
    Subcommand::VerifyNonunimodular,
    Subcommand::VerifyPalmCalculus,
    Subcommand::VoronoiVolume,
    Subcommand::Alloc,
    Subcommand::ExtraHead,
    Subcommand::Clump,
];

type Criterion = (&'static str, fn(&Suite) -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

struct Checks {
    pass: bool,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Checks {
        Checks {
            pass: true,
            notes: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        self.notes.push(if ok { note } else { format!("FAILED {note}") });
    }

    fn verdict(self) -> Verdict {
        Verdict {
            pass: self.pass,
            detail: self.notes.join("; "),
        }
    }
}

struct Suite {
    configs: Vec<ExperimentConfig>,
    outcomes: Vec<Outcome>,
}

impl Suite {
    fn outcome(&self, sub: Subcommand) -> &Outcome {
        let i = RUNS.iter().position(|s| *s == sub).expect("run is part of the suite");
        &self.outcomes[i]
    }

    fn trials(&self, sub: Subcommand) -> usize {
        self.outcome(sub).manifest.config.trials.unwrap_or(0)
    }

    fn report(&self, sub: Subcommand, experiment: &str, statistic: &str) -> &StatReport {
        self.outcome(sub)
            .manifest
            .reports
            .iter()
            .find(|r| r.experiment == experiment && r.statistic == statistic)
            .unwrap_or_else(|| panic!("{sub} has no report {experiment}/{statistic}"))
    }

    fn reports(&self, sub: Subcommand, experiment: &str) -> Vec<&StatReport> {
        self.outcome(sub)
            .manifest
            .reports
            .iter()
            .filter(|r| r.experiment == experiment)
            .collect()
    }
}

/// Rooted samples behind a ratio estimate.
fn rooted(r: &StatReport) -> f64 {
    match r.estimator() {
        Some(Estimator::Ratio(a)) => a.sum_y(),
        _ => r.n as f64,
    }
}

fn z_within(r: &StatReport, max: f64) -> bool {
    r.z.is_some_and(|z| z.abs() <= max)
}

fn exact_all(r: &StatReport) -> bool {
    matches!(r.estimator(), Some(Estimator::Exact { matched, total }) if matched == total && *total > 0)
}

/// Battery p-values against the Bonferroni level; returns (all pass, minimum p).
fn battery_passes(reports: &[&StatReport], battery: &Battery) -> (bool, f64) {
    let names = battery.names();
    let level = ALPHA / names.len() as f64;
    let ps: Vec<f64> = reports
        .iter()
        .filter(|r| names.contains(&r.statistic))
        .map(|r| r.estimate)
        .collect();
    let min = ps.iter().copied().fold(1.0, f64::min);
    (ps.len() == names.len() && min >= level, min)
}

fn fmt_z(r: &StatReport) -> String {
    r.z.map_or("none".into(), |z| format!("{z:.2}"))
}

fn poisson_law(s: &Suite) -> Verdict {
    let sub = Subcommand::VerifyPoisson;
    let mut c = Checks::new();
    c.require(s.trials(sub) == TRIALS, format!("{} trials", s.trials(sub)));
    for w in 0..3 {
        let r = s.report(sub, "poisson_law", &format!("count_gof_window{w}"));
        c.require(r.estimate >= ALPHA, format!("window {w} GOF p = {:.4}", r.estimate));
    }
    let cov = s.report(sub, "poisson_law", "disjoint_count_covariance");
    c.require(z_within(cov, Z_MAX), format!("disjoint covariance z = {}", fmt_z(cov)));
    c.verdict()
}

fn mecke_slivnyak(s: &Suite) -> Verdict {
    let sub = Subcommand::VerifyMecke;
    let mut c = Checks::new();
    let battery = Battery::default();
    c.require(s.trials(sub) == TRIALS, format!("{} trials", s.trials(sub)));
    let (ok, min) = battery_passes(&s.reports(sub, "mecke_slivnyak"), &battery);
    c.require(ok, format!("Poisson battery min p = {min:.4}"));
    let carrier = Carrier::torus(2, 10.0).expect("torus");
    let params = CheckParams::default()
        .with_trials(TRIALS)
        .with_seed(SEED)
        .with_core(Core::default());
    for (name, spec) in [
        ("lattice shift", ProcessSpec::Lattice { spacing: 1.0 }),
        (
            "delta-thinned Poisson",
            ProcessSpec::Thinned {
                intensity: 1.0,
                delta: 0.5,
            },
        ),
    ] {
        let reports = check_mecke_slivnyak(&spec, &carrier, &params).expect("sensitivity run");
        let refs: Vec<&StatReport> = reports.iter().collect();
        let (ok, min) = battery_passes(&refs, &battery);
        c.require(!ok, format!("{name} rejected, min p = {min:.3e}"));
    }
    c.verdict()
}

fn void_probability(s: &Suite) -> Verdict {
    let r = s.report(Subcommand::VerifyMecke, "mecke_slivnyak", "void_probability_r0.5");
    let expected = (-unit_ball_volume(2) * VOID_RADIUS * VOID_RADIUS).exp();
    let mut c = Checks::new();
    c.require(
        (r.estimate - expected).abs() <= VOID_TOL,
        format!("estimate {:.4} vs exp(-pi/4) = {expected:.4}", r.estimate),
    );
    c.require(rooted(r) >= MIN_VOID_SAMPLES, format!("{} rooted samples", rooted(r)));
    c.verdict()
}

fn clmm(s: &Suite) -> Verdict {
    let sub = Subcommand::VerifyClmm;
    let mut c = Checks::new();
    c.require(s.trials(sub) == TRIALS, format!("{} trials", s.trials(sub)));
    for exp in ["clmm_indicator", "clmm_indicator_void_0.5"] {
        let r = s.report(sub, exp, "lhs_minus_rhs");
        c.require(z_within(r, Z_MAX), format!("{exp} z = {}", fmt_z(r)));
    }
    c.verdict()
}

fn flow(s: &Suite, sub: Subcommand, experiment: &str, out: &str) -> Verdict {
    let mut c = Checks::new();
    let o = s.report(sub, experiment, out);
    c.require(o.estimate == 1.0, format!("{out} = {}", o.estimate));
    let d = s.report(sub, experiment, "in_minus_out");
    c.require(z_within(d, Z_MAX), format!("in - out z = {}", fmt_z(d)));
    c.require(rooted(d) >= MIN_ROOTED, format!("{} rooted samples", rooted(d)));
    c.verdict()
}

fn intensity_laws(s: &Suite) -> Verdict {
    let mut c = Checks::new();
    let thin = s.report(
        Subcommand::VerifyThinning,
        "intensity_laws",
        "independent_thinning_intensity",
    );
    c.require(z_within(thin, Z_MAX), format!("p-thinning z = {}", fmt_z(thin)));
    let thick = s.report(
        Subcommand::VerifyThickening,
        "intensity_laws",
        "thickened_count_equals_F_times_count",
    );
    c.require(
        exact_all(thick),
        format!("torus |F| t exact on {} configurations", thick.n),
    );
    let sub = Subcommand::VerifyNonunimodular;
    let quad = s.report(sub, "nonunimodular_thickening", "count_vs_quadrature");
    c.require(
        z_within(quad, Z_MAX),
        format!("affine vs quadrature z = {}", fmt_z(quad)),
    );
    let naive = s.report(sub, "nonunimodular_thickening", "count_vs_2t_vol_U");
    c.require(
        naive.z.is_some_and(|z| z.abs() > Z_SEPARATION),
        format!("affine vs 2 t vol(U) z = {}", fmt_z(naive)),
    );
    c.verdict()
}

fn palm_calculus(s: &Suite) -> Verdict {
    let sub = Subcommand::VerifyPalmCalculus;
    let mut c = Checks::new();
    let battery = Battery::default();
    c.require(s.trials(sub) == TRIALS, format!("{} trials", s.trials(sub)));
    let (ok, min) = battery_passes(&s.reports(sub, "palm_thinning"), &battery);
    c.require(ok, format!("thinning min p = {min:.4}"));
    let colour = s.report(sub, "palm_colouring", "colour_then_reroot_equals_reroot_then_colour");
    c.require(exact_all(colour), format!("colouring bit-exact on {} roots", colour.n));
    let (ok, min) = battery_passes(&s.reports(sub, "palm_thickening"), &battery);
    c.require(ok, format!("thickening min p = {min:.4}"));
    let count = s.report(sub, "palm_thickening", "thickened_count_equals_F_times_count");
    c.require(exact_all(count), "thickened count exact".into());
    c.verdict()
}

fn voronoi_volume(s: &Suite) -> Verdict {
    let sub = Subcommand::VoronoiVolume;
    let mut c = Checks::new();
    let divisions = s.outcome(sub).manifest.config.experiment.divisions;
    c.require(divisions == Some(VORONOI_DIVISIONS), format!("grid {divisions:?}"));
    let r = s.report(sub, "voronoi_palm_volume", "mean_root_cell_volume");
    c.require(
        r.reference == Some(1.0) && z_within(r, Z_MAX),
        format!("E0[vol] = {:.4}, z = {}", r.estimate, fmt_z(r)),
    );
    c.require(rooted(r) >= MIN_ROOTED, format!("{} rooted samples", rooted(r)));
    c.verdict()
}

fn allocation(s: &Suite) -> Verdict {
    let mut c = Checks::new();
    let sub = Subcommand::Alloc;
    c.require(
        s.trials(sub) == CONFIGURATIONS,
        format!("{} configurations", s.trials(sub)),
    );
    let conv = s.report(sub, "allocation", "converged_fraction");
    c.require(
        conv.estimate >= MIN_CONVERGED,
        format!("converged {:.3}", conv.estimate),
    );
    let post = s.report(sub, "allocation", "post_conditions_on_converged");
    c.require(exact_all(post), "post-conditions on every converged run".into());
    let sub = Subcommand::ExtraHead;
    let (ok, min) = battery_passes(&s.reports(sub, "extra_head"), &Battery::default());
    c.require(ok, format!("extra head min p = {min:.4}"));
    let retry = s.report(sub, "extra_head", "retry_rate");
    c.require(retry.pass, format!("retry rate {:.4}", retry.estimate));
    let control = s.report(sub, "extra_head", "voronoi_owner_control_min_p");
    c.require(
        control.estimate < ALPHA / Battery::default().len() as f64,
        format!("Voronoi-owner control rejected, min p = {:.3e}", control.estimate),
    );
    c.verdict()
}

fn clumping(s: &Suite) -> Verdict {
    let sub = Subcommand::Clump;
    let mut c = Checks::new();
    c.require(
        s.trials(sub) == CONFIGURATIONS,
        format!("{} configurations", s.trials(sub)),
    );
    for stat in [
        "axiom_partitions",
        "axiom_ascending",
        "axiom_one_ended",
        "z_line_hamiltonian_and_clump_local",
    ] {
        let r = s.report(sub, "clumping", stat);
        c.require(
            exact_all(r),
            format!("{stat} {}/{}", (r.estimate * r.n as f64).round(), r.n),
        );
    }
    c.verdict()
}

fn equivariance(s: &Suite) -> Verdict {
    let reports = s.reports(Subcommand::VerifyPalmCalculus, "equivariance");
    let mut c = Checks::new();
    c.require(
        reports.len() == EQUIVARIANCE_OPERATIONS,
        format!("{} operations", reports.len()),
    );
    for r in reports {
        c.require(
            exact_all(r) && r.n as usize == CONFIGURATIONS,
            format!("{} {}/{}", r.statistic, (r.estimate * r.n as f64).round(), r.n),
        );
    }
    c.verdict()
}

fn determinism(s: &Suite) -> Verdict {
    let mut c = Checks::new();
    for (cfg, first) in s.configs.iter().zip(&s.outcomes) {
        let second = harness::run_with_threads(cfg, DETERMINISM_THREADS).expect("rerun");
        let sub = first.manifest.subcommand;
        c.require(first.csv == second.csv, format!("{sub}"));
    }
    c.verdict()
}

fn main() -> ExitCode {
    let overrides = Overrides {
        seed: Some(SEED),
        ..Overrides::default()
    };
    let configs: Vec<ExperimentConfig> = RUNS
        .iter()
        .map(|&sub| harness::load(sub, None, &overrides).expect("default configuration"))
        .collect();
    let outcomes: Vec<Outcome> = configs
        .iter()
        .map(|cfg| {
            let o = harness::run(cfg).expect("default run");
            eprintln!("ran {} in {:.1} s", o.manifest.subcommand, o.wall_time.as_secs_f64());
            o
        })
        .collect();
    let suite = Suite { configs, outcomes };
    let criteria: [Criterion; 13] = [
        ("Poisson law", poisson_law),
        ("Mecke-Slivnyak battery and sensitivity", mecke_slivnyak),
        ("void probability anchor", void_probability),
        ("CLMM", clmm),
        ("mass transport", |s| flow(s, Subcommand::VerifyMtp, "mtp", "mass_out")),
        ("degree balance", |s| {
            flow(s, Subcommand::VerifyDegrees, "degree_balance", "out_degree")
        }),
        ("intensity laws", intensity_laws),
        ("Palm calculus", palm_calculus),
        ("Voronoi Palm volume", voronoi_volume),
        ("balanced allocation and extra head", allocation),
        ("clumping and Z-line", clumping),
        ("equivariance", equivariance),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check(&suite);
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
