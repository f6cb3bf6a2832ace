//! Palm sampling by relative rates and Monte Carlo checks of Palm identities.
//!
//! A Palm sample set is built by simulating the process on the torus and
//! rerooting at every point of a fixed core window. Estimates are ratio
//! estimators over trials, with standard errors computed per trial so the
//! correlation between samples from the same configuration is respected.

mod battery;
mod checks;

pub use battery::{Battery, Observations};
pub use checks::{
    check_clmm, check_degree_balance, check_mecke_slivnyak, check_mtp, check_nonunimodular_thickening,
    check_palm_colouring, check_palm_thickening, check_palm_thinning, check_unimodular_thickening_control, clmm_sides,
    mecke_reference, nearest_neighbor_arrow, nearest_neighbor_transport, ClmmSides,
};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::factor::check_range;
use crate::geometry::{Carrier, Window};
use crate::process::{Configuration, ProcessSpec, RootedConfiguration};
use crate::report::{StatReport, DEFAULT_ALPHA};
use crate::rng::{run_trials, stream};
use crate::stats::Accumulator;

/// The region whose points are used as roots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Core {
    /// The whole torus.
    Full,
    /// The box `[0, side)^d`.
    Box { side: f64 },
}

impl Default for Core {
    fn default() -> Self {
        Core::Box { side: 5.0 }
    }
}

impl Core {
    /// Box of half the torus side.
    pub fn half(carrier: &Carrier) -> Core {
        Core::Box {
            side: carrier.side().unwrap_or(1.0) / 2.0,
        }
    }

    pub fn window(&self, carrier: &Carrier) -> Result<Window> {
        let side = carrier
            .side()
            .ok_or_else(|| crate::Error::Usage("Palm sampling needs a torus".into()))?;
        match *self {
            Core::Full => Ok(Window::Full),
            Core::Box { side: s } => {
                if !(s > 0.0 && s <= side) {
                    return usage(format!("core side {s} must lie in (0, {side}]"));
                }
                Ok(Window::cube(0.0, s, carrier.dim()))
            }
        }
    }

    pub fn indices(&self, c: &Configuration) -> Result<Vec<usize>> {
        let w = self.window(c.carrier())?;
        Ok((0..c.len())
            .filter(|&i| w.contains(c.carrier(), &c.points()[i]))
            .collect())
    }
}

/// Shared parameters of the Monte Carlo checks.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckParams {
    pub trials: usize,
    pub seed: u64,
    pub core: Core,
    pub battery: Battery,
    pub alpha: f64,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            trials: 10_000,
            seed: 0,
            core: Core::default(),
            battery: Battery::default(),
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl CheckParams {
    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_core(mut self, core: Core) -> Self {
        self.core = core;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub process: ProcessSpec,
    pub seed: u64,
    pub trials: usize,
}

/// Rooted samples grouped by the trial that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct PalmSampleSet {
    pub clusters: Vec<Vec<RootedConfiguration>>,
    pub r_obs: f64,
    pub provenance: Provenance,
}

impl PalmSampleSet {
    pub fn len(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &RootedConfiguration> {
        self.clusters.iter().flatten()
    }

    /// Battery observations in cluster layout.
    pub fn observe(&self, battery: &Battery) -> Observations {
        self.clusters
            .iter()
            .map(|c| c.iter().map(|v| battery.observe(v)).collect())
            .collect()
    }
}

pub(crate) fn check_palm_inputs(spec: &ProcessSpec, carrier: &Carrier, r_obs: f64) -> Result<()> {
    if !carrier.is_torus() {
        return usage("Palm sampling is implemented on the torus");
    }
    spec.validate(carrier)?;
    check_range(carrier, r_obs, "observation radius")
}

/// Rooted views at the core points of one configuration.
pub(crate) fn core_views(c: &Configuration, core: &Core, r: f64) -> Result<Vec<RootedConfiguration>> {
    let idx = c.index();
    Ok(core.indices(c)?.into_iter().map(|i| c.view_at(i, r, &idx)).collect())
}

/// Rooted samples at every core point of `trials` independent configurations.
pub fn palm_samples(
    spec: &ProcessSpec,
    carrier: &Carrier,
    trials: usize,
    r_obs: f64,
    core: Core,
    seed: u64,
) -> Result<PalmSampleSet> {
    check_palm_inputs(spec, carrier, r_obs)?;
    core.window(carrier)?;
    let clusters = run_trials(
        trials,
        seed,
        stream::PALM,
        |_, rng| -> Result<Vec<RootedConfiguration>> {
            let c = spec.sample(carrier, &Window::Full, rng)?;
            core_views(&c, &core, r_obs)
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let set = PalmSampleSet {
        clusters,
        r_obs,
        provenance: Provenance {
            process: spec.clone(),
            seed,
            trials,
        },
    };
    if set.is_empty() {
        warn!("Palm sample set is empty");
    }
    Ok(set)
}

/// Ratio estimate of the Palm probability of `event`, with a per-trial
/// (cluster-robust) standard error.
pub fn palm_probability<F>(ps: &PalmSampleSet, event: F) -> StatReport
where
    F: Fn(&RootedConfiguration) -> bool,
{
    let mut acc = Accumulator::new();
    for c in &ps.clusters {
        let hits = c.iter().filter(|v| event(v)).count();
        acc.push_pair(hits as f64, c.len() as f64);
    }
    StatReport::ratio("palm_probability", "P0(event)", acc, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GroupPoint;

    #[test]
    fn lattice_palm_is_a_single_atom() {
        let t = Carrier::torus(1, 10.0).unwrap();
        let ps = palm_samples(&ProcessSpec::Lattice { spacing: 2.0 }, &t, 20, 2.4, Core::Full, 1).unwrap();
        let expected = Configuration::new(
            t,
            Window::Full,
            [0.0, 2.0, 8.0].iter().map(|x| GroupPoint::new(&[*x])).collect(),
        )
        .unwrap();
        assert_eq!(ps.len(), 100);
        assert!(ps.iter().all(|v| v.points() == expected.points()));
    }

    #[test]
    fn empty_process_gives_empty_set() {
        let t = Carrier::torus(2, 10.0).unwrap();
        let ps = palm_samples(&ProcessSpec::poisson(0.0), &t, 10, 1.0, Core::default(), 1).unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn trivial_events() {
        let t = Carrier::torus(2, 10.0).unwrap();
        let ps = palm_samples(&ProcessSpec::poisson(1.0), &t, 50, 1.0, Core::default(), 2).unwrap();
        let yes = palm_probability(&ps, |_| true);
        assert_eq!((yes.estimate, yes.stderr), (1.0, 0.0));
        assert_eq!(palm_probability(&ps, |_| false).estimate, 0.0);
    }

    #[test]
    fn rejects_large_observation_radius() {
        let t = Carrier::torus(2, 10.0).unwrap();
        assert!(palm_samples(&ProcessSpec::poisson(1.0), &t, 5, 2.5, Core::default(), 0).is_err());
        assert!(palm_samples(&ProcessSpec::poisson(1.0), &t, 5, 1.0, Core::Box { side: 0.0 }, 0).is_err());
    }
}
