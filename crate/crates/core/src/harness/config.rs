//! Strict JSON experiment configuration with per-subcommand defaults.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::factor::check_range;
use crate::geometry::{Carrier, GroupPoint, Window};
use crate::palm::Core;
use crate::process::ProcessSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Sample,
    VerifyPoisson,
    VerifyMecke,
    VerifyClmm,
    VerifyMtp,
    VerifyDegrees,
    VerifyThinning,
    VerifyThickening,
    VerifyNonunimodular,
    VerifyPalmCalculus,
    Alloc,
    ExtraHead,
    VoronoiVolume,
    Clump,
    Zline,
    EncodeMarks,
}

impl Subcommand {
    pub const ALL: [Subcommand; 16] = [
        Subcommand::Sample,
        Subcommand::VerifyPoisson,
        Subcommand::VerifyMecke,
        Subcommand::VerifyClmm,
        Subcommand::VerifyMtp,
        Subcommand::VerifyDegrees,
        Subcommand::VerifyThinning,
        Subcommand::VerifyThickening,
        Subcommand::VerifyNonunimodular,
        Subcommand::VerifyPalmCalculus,
        Subcommand::Alloc,
        Subcommand::ExtraHead,
        Subcommand::VoronoiVolume,
        Subcommand::Clump,
        Subcommand::Zline,
        Subcommand::EncodeMarks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Sample => "sample",
            Subcommand::VerifyPoisson => "verify-poisson",
            Subcommand::VerifyMecke => "verify-mecke",
            Subcommand::VerifyClmm => "verify-clmm",
            Subcommand::VerifyMtp => "verify-mtp",
            Subcommand::VerifyDegrees => "verify-degrees",
            Subcommand::VerifyThinning => "verify-thinning",
            Subcommand::VerifyThickening => "verify-thickening",
            Subcommand::VerifyNonunimodular => "verify-nonunimodular",
            Subcommand::VerifyPalmCalculus => "verify-palm-calculus",
            Subcommand::Alloc => "alloc",
            Subcommand::ExtraHead => "extra-head",
            Subcommand::VoronoiVolume => "voronoi-volume",
            Subcommand::Clump => "clump",
            Subcommand::Zline => "zline",
            Subcommand::EncodeMarks => "encode-marks",
        }
    }

    /// Default trial counts without and with `--paper-scale`.
    pub fn default_trials(self) -> (usize, usize) {
        match self {
            Subcommand::Sample => (100, 1000),
            Subcommand::VerifyMtp | Subcommand::VerifyDegrees | Subcommand::VoronoiVolume => (500, 5000),
            Subcommand::Alloc => (1000, 1000),
            Subcommand::Clump | Subcommand::Zline | Subcommand::EncodeMarks => (1000, 10_000),
            _ => (10_000, 100_000),
        }
    }

    pub fn default_process(self) -> ProcessSpec {
        match self {
            Subcommand::VerifyThickening | Subcommand::EncodeMarks => ProcessSpec::Thinned {
                intensity: 1.0,
                delta: 0.5,
            },
            Subcommand::VerifyNonunimodular => ProcessSpec::poisson(20.0),
            _ => ProcessSpec::poisson(1.0),
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand {s:?}")))
    }
}

/// Rewraps a validation failure as a configuration error with the same message.
pub(crate) fn config_error(e: Error) -> Error {
    match e {
        Error::Usage(m) | Error::Range(m) | Error::Precondition(m) | Error::Config(m) => Error::Config(m),
        e => Error::Config(e.to_string()),
    }
}

/// Experiment parameters; unset fields take the subcommand's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    pub name: Option<Subcommand>,
    /// Interaction radius of graph and transport rules.
    pub radius: Option<f64>,
    /// Isolation radius of thinning and colouring rules.
    pub delta: Option<f64>,
    /// Retention probability of independent thinning.
    pub p: Option<f64>,
    /// Thickening offsets, containing the identity.
    pub offsets: Option<Vec<GroupPoint>>,
    /// Grid cells per side; the cell side is `L / divisions`.
    pub divisions: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_rounds: Option<usize>,
    pub max_levels: Option<usize>,
    /// Test window: CLMM support, affine thickening window, sampling window.
    pub window: Option<Window>,
    /// The non-identity offset of the affine thickening.
    pub f: Option<GroupPoint>,
    /// Radii of the ball counts in the statistic battery.
    pub radii: Option<Vec<f64>>,
    pub core: Option<Core>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
    /// Write configuration, graph, raster or clumping dumps.
    #[serde(default)]
    pub dumps: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_group")]
    pub group: Carrier,
    pub process: Option<ProcessSpec>,
    #[serde(default)]
    pub experiment: ExperimentParams,
    pub trials: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Master seed of default runs and of the acceptance suite.
pub const DEFAULT_SEED: u64 = 1;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_group() -> Carrier {
    Carrier::FlatTorus { dim: 2, side: 10.0 }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            group: default_group(),
            process: None,
            experiment: ExperimentParams::default(),
            trials: None,
            seed: DEFAULT_SEED,
            output: OutputSpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses strict JSON; errors carry the line and column.
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills every unset field with the defaults of `sub` and validates.
    pub fn resolve(mut self, sub: Subcommand, paper_scale: bool) -> Result<ExperimentConfig> {
        match self.experiment.name {
            Some(n) if n != sub => {
                return Err(Error::Config(format!("config is for {n}, not {sub}")));
            }
            _ => self.experiment.name = Some(sub),
        }
        self.group.validate()?;
        let (desk, large) = sub.default_trials();
        self.trials.get_or_insert(if paper_scale { large } else { desk });
        self.process.get_or_insert_with(|| sub.default_process());
        let e = &mut self.experiment;
        let dim = self.group.dim();
        let torus = self.group.is_torus();
        e.radius.get_or_insert(2.4);
        e.delta.get_or_insert(0.5);
        e.p.get_or_insert(0.5);
        e.epsilon.get_or_insert(0.01);
        e.max_rounds.get_or_insert(500);
        e.max_levels.get_or_insert(64);
        e.alpha.get_or_insert(crate::report::DEFAULT_ALPHA);
        e.radii.get_or_insert_with(|| vec![0.5, 1.0, 2.0]);
        e.core.get_or_insert_with(|| Core::half(&self.group));
        e.divisions.get_or_insert(match sub {
            Subcommand::ExtraHead | Subcommand::VerifyThinning => 128,
            Subcommand::Alloc if !paper_scale => 256,
            _ => 512,
        });
        if e.offsets.is_none() && torus {
            let mut f = vec![0.0; dim];
            f[0] = 0.125;
            e.offsets = Some(vec![self.group.identity(), GroupPoint::new(&f)]);
        }
        e.f.get_or_insert_with(|| GroupPoint::new(&[2.0, 0.0]));
        if e.window.is_none() {
            e.window = Some(match (sub, self.group) {
                (Subcommand::VerifyNonunimodular, _) | (_, Carrier::AffineLine) => {
                    Window::affine_box((1.0, 2.0), (0.0, 1.0))
                }
                (Subcommand::VerifyClmm, _) => Window::cube(0.0, 1.25, dim),
                (_, Carrier::EuclideanBox { .. }) => Window::cube(0.0, 10.0, dim),
                _ => Window::Full,
            });
        }
        self.validate()?;
        Ok(self)
    }

    /// Interaction ranges below `L/4` and parameters in range.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let g = &self.group;
        let bad = |m: String| Err(Error::Config(m));
        let range = |r: Option<f64>, what: &str| match r {
            Some(r) => check_range(g, r, what).map_err(config_error),
            None => Ok(()),
        };
        range(e.radius, "radius")?;
        range(e.delta, "delta")?;
        if let Some(radii) = &e.radii {
            if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
                return bad("battery radii must be positive and non-empty".into());
            }
            range(radii.iter().copied().reduce(f64::max), "battery radius")?;
        }
        if let Some(offsets) = &e.offsets {
            let id = g.identity();
            for f in offsets {
                g.check(f).map_err(config_error)?;
            }
            range(
                offsets.iter().map(|f| g.distance(&id, f)).reduce(f64::max),
                "offset reach",
            )?;
        }
        if let Some(p) = e.p {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("p must lie in [0, 1], got {p}"));
            }
        }
        if let Some(a) = e.alpha {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("alpha must lie in (0, 1), got {a}"));
            }
        }
        if let Some(w) = &e.window {
            if !matches!(e.name, Some(Subcommand::VerifyNonunimodular)) {
                w.validate(g).map_err(config_error)?;
            }
        }
        if let Some(p) = &self.process {
            p.validate(g).map_err(config_error)?;
        }
        if self.trials == Some(0) {
            return bad("trials must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the configuration without its output section.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSpec::default();
        let text = serde_json::to_string(&c).expect("configurations serialise");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
