//! Experiment dispatch, run manifests and artifact output.
//!
//! A run is a pure function of its resolved configuration: the reports, the
//! CSV and the manifest are bit-identical for every thread count. Wall time is
//! kept out of the manifest and written to a separate timing file.

mod config;

pub use config::{ExperimentConfig, ExperimentParams, OutputSpec, Subcommand, DEFAULT_SEED};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    balanced_allocation, check_allocations, check_extra_head, check_voronoi_palm_volume, AllocParams,
};
use crate::clumping::{build_clumping, check_clumpings, z_line_factor};
use crate::equivariance::check_equivariance;
use crate::error::{Error, Result};
use crate::factor::{check_local_encoding, nearest_neighbor_digraph, rules, Local};
use crate::geometry::{unit_ball_volume, Carrier, GroupPoint, Window};
use crate::io::{allocation_pgm, allocation_sidecar, clumping_json, configuration_json, graph_json};
use crate::laws::{check_poisson_law, check_thickening_intensity, check_thinning_intensity, default_law_windows};
use crate::palm::{self, Battery, CheckParams, Core};
use crate::process::{estimate_intensity, Configuration, ProcessSpec, RootedConfiguration};
use crate::report::{all_pass, to_csv, StatReport};
use crate::rng::{run_trials, stream};

pub const TOOL: &str = "palmlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Configurations written by the dump of a verification run.
const DUMPED_SAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: Subcommand,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub pass: bool,
    pub reports: Vec<StatReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub csv: String,
    pub artifacts: Vec<Artifact>,
    pub wall_time: Duration,
}

/// Command-line values that take precedence over the configuration file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub paper_scale: bool,
}

/// Reads, overrides and resolves a configuration.
pub fn load(sub: Subcommand, path: Option<&Path>, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text).map_err(|e| match config::config_error(e) {
                Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
                e => e,
            })?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(t) = o.trials {
        cfg.trials = Some(t);
    }
    if let Some(d) = &o.out {
        cfg.output.dir = Some(d.display().to_string());
    }
    cfg.resolve(sub, o.paper_scale)
}

/// Runs `cfg` on a dedicated pool of `threads` workers.
pub fn run_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run(cfg))
}

/// Runs a configuration, resolving it first if needed.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sub = cfg
        .experiment
        .name
        .ok_or_else(|| Error::Config("experiment.name is required".into()))?;
    let cfg = cfg.clone().resolve(sub, false)?;
    let start = Instant::now();
    info!("{sub}: {} trials, seed {}", cfg.trials.unwrap_or(0), cfg.seed);
    let Experiment { reports, artifacts } = dispatch(sub, &cfg)?;
    let wall_time = start.elapsed();
    let mut recorded = cfg.clone();
    recorded.output = OutputSpec::default();
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        subcommand: sub,
        config_hash: cfg.hash(),
        config: recorded,
        pass: all_pass(&reports),
        reports,
    };
    let csv = to_csv(&manifest.reports);
    Ok(Outcome {
        manifest,
        csv,
        artifacts,
        wall_time,
    })
}

/// Writes `report.csv`, `manifest.json`, `timing.json` and the artifacts.
pub fn write_outcome(o: &Outcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.csv"), &o.csv)?;
    let mut manifest = serde_json::to_string_pretty(&o.manifest)?;
    manifest.push('\n');
    fs::write(dir.join("manifest.json"), manifest)?;
    let timing = serde_json::json!({ "wall_time_seconds": o.wall_time.as_secs_f64() });
    fs::write(dir.join("timing.json"), format!("{timing}\n"))?;
    for a in &o.artifacts {
        fs::write(dir.join(&a.name), &a.bytes)?;
    }
    Ok(())
}

struct Experiment {
    reports: Vec<StatReport>,
    artifacts: Vec<Artifact>,
}

impl Experiment {
    fn new(reports: Vec<StatReport>) -> Experiment {
        Experiment {
            reports,
            artifacts: Vec::new(),
        }
    }

    fn with(mut self, name: &str, bytes: Vec<u8>) -> Experiment {
        self.artifacts.push(Artifact {
            name: name.into(),
            bytes,
        });
        self
    }
}

/// Resolved parameters in the form the checkers take.
struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    e: &'a ExperimentParams,
    carrier: Carrier,
    spec: ProcessSpec,
    trials: usize,
    seed: u64,
}

impl Ctx<'_> {
    fn params(&self) -> CheckParams {
        CheckParams {
            trials: self.trials,
            seed: self.seed,
            core: self.e.core.unwrap_or_default(),
            battery: Battery::new(self.e.radii.clone().unwrap_or_default()),
            alpha: self.e.alpha.unwrap_or(crate::report::DEFAULT_ALPHA),
        }
    }

    fn radius(&self) -> f64 {
        self.e.radius.expect("resolved")
    }

    fn delta(&self) -> f64 {
        self.e.delta.expect("resolved")
    }

    fn window(&self) -> Window {
        self.e.window.clone().unwrap_or(Window::Full)
    }

    fn offsets(&self) -> Result<Vec<GroupPoint>> {
        self.e
            .offsets
            .clone()
            .ok_or_else(|| Error::Config("experiment.offsets is required on this group".into()))
    }

    fn alloc(&self) -> AllocParams {
        AllocParams {
            divisions: self.e.divisions.expect("resolved"),
            epsilon: self.e.epsilon.expect("resolved"),
            max_rounds: self.e.max_rounds.expect("resolved"),
        }
    }

    fn dumps(&self) -> bool {
        self.cfg.output.dumps
    }

    /// The first few sampled configurations, on their own stream.
    fn samples(&self, k: usize) -> Result<Vec<Configuration>> {
        let w = match self.carrier {
            Carrier::FlatTorus { .. } => Window::Full,
            _ => self.window(),
        };
        run_trials(k, self.seed, stream::SAMPLE, |_, rng| {
            self.spec.sample(&self.carrier, &w, rng)
        })
        .into_iter()
        .collect()
    }

    fn sample_dump(&self, k: usize) -> Result<Vec<u8>> {
        let mut out = String::new();
        for c in self.samples(k)? {
            out.push_str(&configuration_json(&c, None)?);
            out.push('\n');
        }
        Ok(out.into_bytes())
    }

    /// A `delta`-thinned base with the intensity of the configured process.
    fn thinned(&self) -> ProcessSpec {
        match &self.spec {
            s @ ProcessSpec::Thinned { .. } => s.clone(),
            s => ProcessSpec::Thinned {
                intensity: base_intensity(s, &self.carrier),
                delta: self.delta(),
            },
        }
    }
}

fn base_intensity(spec: &ProcessSpec, carrier: &Carrier) -> f64 {
    match spec {
        ProcessSpec::Poisson { intensity }
        | ProcessSpec::Thinned { intensity, .. }
        | ProcessSpec::Thickened { intensity, .. }
        | ProcessSpec::Marked { intensity, .. } => *intensity,
        s => s.intensity(carrier),
    }
}

fn renamed(reports: Vec<StatReport>, experiment: &str) -> Vec<StatReport> {
    reports
        .into_iter()
        .map(|mut r| {
            r.experiment = experiment.into();
            r
        })
        .collect()
}

fn planar_torus_or_default(c: &Carrier) -> Carrier {
    if c.is_torus() {
        *c
    } else {
        Carrier::FlatTorus { dim: 2, side: 10.0 }
    }
}

fn dispatch(sub: Subcommand, cfg: &ExperimentConfig) -> Result<Experiment> {
    let ctx = Ctx {
        cfg,
        e: &cfg.experiment,
        carrier: cfg.group,
        spec: cfg.process.clone().expect("resolved"),
        trials: cfg.trials.expect("resolved"),
        seed: cfg.seed,
    };
    let (carrier, spec) = (&ctx.carrier, &ctx.spec);
    let p = ctx.params();
    let mut ex = match sub {
        Subcommand::Sample => {
            let samples = ctx.samples(ctx.trials)?;
            let w = match carrier {
                Carrier::FlatTorus { .. } => Window::Full,
                _ => ctx.window(),
            };
            let report = estimate_intensity(&samples, &w)?;
            let reference = spec.intensity(carrier);
            let report = StatReport::from_estimator(
                "sample",
                &report.statistic,
                report.estimator().cloned().expect("mean estimator"),
                Some(reference),
                crate::report::Criterion::ZScore {
                    max_abs_z: crate::report::DEFAULT_Z_MAX,
                },
            );
            let mut dump = String::new();
            for c in &samples {
                dump.push_str(&configuration_json(c, None)?);
                dump.push('\n');
            }
            return Ok(Experiment::new(vec![report]).with("configurations.jsonl", dump.into_bytes()));
        }
        Subcommand::VerifyPoisson => {
            let side = carrier.side().unwrap_or(10.0);
            let (windows, pair) = default_law_windows(carrier.dim(), side);
            Experiment::new(check_poisson_law(spec, carrier, &windows, &pair, ctx.trials, ctx.seed)?)
        }
        Subcommand::VerifyMecke => {
            let mut reports = palm::check_mecke_slivnyak(spec, carrier, &p)?;
            reports.push(void_probability(spec, carrier, &p)?);
            Experiment::new(reports)
        }
        Subcommand::VerifyClmm => {
            let u = ctx.window();
            let h = carrier
                .side()
                .ok_or_else(|| Error::Config("verify-clmm runs on the torus".into()))?
                / ctx.e.divisions.expect("resolved") as f64;
            let indicator = Local::new(0.0, |_: &GroupPoint, _: &RootedConfiguration| 1.0);
            let void = Local::new(
                0.5,
                |_: &GroupPoint, v: &RootedConfiguration| {
                    if v.count_within(0.5) == 0 {
                        1.0
                    } else {
                        0.0
                    }
                },
            );
            let mut reports = renamed(
                palm::check_clmm(&indicator, &u, h, spec, carrier, &p)?,
                "clmm_indicator",
            );
            reports.extend(renamed(
                palm::check_clmm(&void, &u, h, spec, carrier, &p)?,
                "clmm_indicator_void_0.5",
            ));
            Experiment::new(reports)
        }
        Subcommand::VerifyMtp => Experiment::new(palm::check_mtp(
            &palm::nearest_neighbor_transport(ctx.radius()),
            spec,
            carrier,
            &p,
        )?),
        Subcommand::VerifyDegrees => {
            let ex = Experiment::new(palm::check_degree_balance(
                &palm::nearest_neighbor_arrow(ctx.radius()),
                spec,
                carrier,
                &p,
            )?);
            if ctx.dumps() {
                let c = ctx.samples(1)?.remove(0);
                let g = nearest_neighbor_digraph(&c)?;
                ex.with("nn_graph.json", (graph_json(&g) + "\n").into_bytes())
            } else {
                ex
            }
        }
        Subcommand::VerifyThinning => {
            let mut reports = palm::check_palm_thinning(&rules::isolated(ctx.delta()), spec, carrier, &p)?;
            let t = base_intensity(spec, carrier);
            let pr = ctx.e.p.expect("resolved");
            reports.push(check_thinning_intensity(
                t,
                pr,
                carrier,
                &ctx.window(),
                ctx.trials,
                ctx.seed,
            )?);
            Experiment::new(reports)
        }
        Subcommand::VerifyThickening => {
            let offsets = ctx.offsets()?;
            let base = ctx.thinned();
            let mut reports = palm::check_palm_thickening(&offsets, &base, carrier, &p)?;
            reports.extend(check_thickening_intensity(
                &base, &offsets, carrier, ctx.trials, ctx.seed,
            )?);
            Experiment::new(reports)
        }
        Subcommand::VerifyNonunimodular => {
            let t = base_intensity(spec, carrier);
            let f = ctx.e.f.expect("resolved");
            let mut reports = palm::check_nonunimodular_thickening(t, &ctx.window(), &f, ctx.trials, ctx.seed)?;
            let torus = planar_torus_or_default(carrier);
            let mut shift = vec![0.0; torus.dim()];
            shift[0] = f.coords()[0];
            let u = Window::cube(0.0, 1.0, torus.dim());
            reports.push(palm::check_unimodular_thickening_control(
                &torus,
                t,
                &u,
                &GroupPoint::new(&shift),
                ctx.trials,
                ctx.seed,
            )?);
            Experiment::new(reports)
        }
        Subcommand::VerifyPalmCalculus => {
            let mut reports = palm::check_palm_thinning(&rules::isolated(ctx.delta()), spec, carrier, &p)?;
            reports.push(palm::check_palm_colouring(&rules::crowded(2, 0.8), spec, carrier, &p)?);
            let offsets = ctx.offsets()?;
            reports.extend(palm::check_palm_thickening(&offsets, &ctx.thinned(), carrier, &p)?);
            reports.extend(check_equivariance(spec, carrier, ctx.trials.min(1000), ctx.seed)?);
            Experiment::new(reports)
        }
        Subcommand::Alloc => {
            let alloc = ctx.alloc();
            let ex = Experiment::new(check_allocations(spec, carrier, &alloc, ctx.trials, ctx.seed)?);
            if ctx.dumps() {
                let c = ctx.samples(1)?.remove(0);
                let a = balanced_allocation(&c, alloc.side(carrier)?, alloc.epsilon, alloc.max_rounds)?;
                let sidecar = serde_json::to_string_pretty(&allocation_sidecar(&a))? + "\n";
                ex.with("allocation.pgm", allocation_pgm(&a)?)
                    .with("allocation.json", sidecar.into_bytes())
            } else {
                ex
            }
        }
        Subcommand::ExtraHead => Experiment::new(check_extra_head(spec, carrier, &ctx.alloc(), &p)?),
        Subcommand::VoronoiVolume => Experiment::new(vec![check_voronoi_palm_volume(
            spec,
            carrier,
            ctx.e.divisions.expect("resolved"),
            &p,
        )?]),
        Subcommand::Clump | Subcommand::Zline => {
            let max_levels = ctx.e.max_levels.expect("resolved");
            let mut reports = check_clumpings(spec, carrier, max_levels, ctx.trials, ctx.seed)?;
            if sub == Subcommand::Zline {
                reports.retain(|r| r.statistic.starts_with("z_line"));
            }
            let ex = Experiment::new(reports);
            if ctx.dumps() {
                let c = ctx.samples(1)?.remove(0);
                let s = build_clumping(&c, max_levels)?;
                if sub == Subcommand::Clump {
                    ex.with("clumping.json", (clumping_json(&s)? + "\n").into_bytes())
                } else {
                    ex.with("z_line.json", (graph_json(&z_line_factor(&s)?) + "\n").into_bytes())
                }
            } else {
                ex
            }
        }
        Subcommand::EncodeMarks => {
            let ex = Experiment::new(vec![check_local_encoding(
                spec,
                carrier,
                ctx.delta(),
                ctx.trials,
                ctx.seed,
            )?]);
            if ctx.dumps() {
                let c = ctx.samples(1)?.remove(0);
                let mc = crate::process::MarkedConfiguration::new(
                    c.clone(),
                    (0..c.len())
                        .map(|i| {
                            if i % 2 == 0 {
                                crate::factor::Sign::Plus
                            } else {
                                crate::factor::Sign::Minus
                            }
                        })
                        .collect(),
                )?;
                let enc = crate::factor::local_encode_marks(&mc, ctx.delta())?;
                ex.with("encoded.jsonl", (configuration_json(&enc, None)? + "\n").into_bytes())
            } else {
                ex
            }
        }
    };
    if ctx.dumps() && ex.artifacts.is_empty() {
        ex = ex.with("configurations.jsonl", ctx.sample_dump(DUMPED_SAMPLES.min(ctx.trials))?);
    }
    Ok(ex)
}

/// Palm probability of no other point within 1/2, from every point of each
/// configuration, against `exp(-t omega_d / 2^d)` for Poisson input.
fn void_probability(spec: &ProcessSpec, carrier: &Carrier, p: &CheckParams) -> Result<StatReport> {
    const R: f64 = 0.5;
    let ps = palm::palm_samples(spec, carrier, p.trials, R, Core::Full, p.seed)?;
    let r = palm::palm_probability(&ps, |v| v.count_within(R) == 0);
    let acc = match r.estimator() {
        Some(crate::report::Estimator::Ratio(a)) => *a,
        _ => unreachable!("palm_probability is a ratio"),
    };
    let reference = match spec {
        ProcessSpec::Poisson { intensity } => {
            let d = carrier.dim();
            Some((-intensity * unit_ball_volume(d) * R.powi(d as i32)).exp())
        }
        _ => None,
    };
    Ok(StatReport::ratio(
        "mecke_slivnyak",
        "void_probability_r0.5",
        acc,
        reference,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(sub: Subcommand, trials: usize) -> ExperimentConfig {
        let o = Overrides {
            seed: Some(3),
            trials: Some(trials),
            ..Overrides::default()
        };
        load(sub, None, &o).unwrap()
    }

    #[test]
    fn every_subcommand_runs_at_small_scale() {
        for sub in Subcommand::ALL {
            let trials = match sub {
                Subcommand::VerifyPoisson | Subcommand::VerifyNonunimodular => 200,
                Subcommand::Alloc | Subcommand::ExtraHead | Subcommand::VoronoiVolume => 10,
                _ => 40,
            };
            let o = run(&quick(sub, trials)).unwrap_or_else(|e| panic!("{sub}: {e}"));
            assert!(!o.manifest.reports.is_empty(), "{sub}");
            assert!(o.csv.starts_with(crate::report::CSV_HEADER));
        }
    }

    #[test]
    fn thread_count_does_not_change_the_manifest() {
        let cfg = quick(Subcommand::VerifyMecke, 60);
        let a = run_with_threads(&cfg, 1).unwrap();
        let b = run_with_threads(&cfg, 4).unwrap();
        assert_eq!(a.csv, b.csv);
        assert_eq!(
            serde_json::to_string(&a.manifest).unwrap(),
            serde_json::to_string(&b.manifest).unwrap()
        );
    }

    #[test]
    fn dumps_are_written() {
        let mut cfg = quick(Subcommand::Alloc, 2);
        cfg.output.dumps = true;
        let o = run(&cfg).unwrap();
        let names: Vec<_> = o.artifacts.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["allocation.pgm", "allocation.json"]);
        let dir = tempfile::tempdir().unwrap();
        write_outcome(&o, dir.path()).unwrap();
        for f in ["report.csv", "manifest.json", "timing.json", "allocation.pgm"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
