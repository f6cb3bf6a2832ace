//! Configurations, marks, rooted and birooted configurations, and samplers.

use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::factor;
use crate::geometry::{sample_uniform, unit_ball_volume, Carrier, GroupPoint, Window};
use crate::index::SpatialIndex;
use crate::report::StatReport;
use crate::stats::Accumulator;

/// Minimum separation between distinct points.
pub const DISTINCT_TOL: f64 = 1e-12;

static DUPLICATE_REDRAWS: AtomicU64 = AtomicU64::new(0);

/// Number of sampled points redrawn because they coincided with another.
pub fn duplicate_redraws() -> u64 {
    DUPLICATE_REDRAWS.load(AtomicOrdering::Relaxed)
}

/// A finite set of distinct points in a window, stored in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    carrier: Carrier,
    window: Window,
    points: Vec<GroupPoint>,
}

impl Configuration {
    /// Validates membership and distinctness and sorts the points.
    pub fn new(carrier: Carrier, window: Window, points: Vec<GroupPoint>) -> Result<Configuration> {
        carrier.validate()?;
        window.validate(&carrier)?;
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            carrier.check(&p)?;
            let p = carrier.canonicalize(&p);
            if !window.contains(&carrier, &p) {
                return usage(format!("point {p:?} lies outside the window"));
            }
            pts.push(p);
        }
        let c = Configuration::assemble(carrier, window, pts);
        if let Some((i, j)) = c.close_pair(DISTINCT_TOL) {
            return usage(format!(
                "points {:?} and {:?} are not distinct",
                c.points[i], c.points[j]
            ));
        }
        Ok(c)
    }

    pub fn empty(carrier: Carrier, window: Window) -> Configuration {
        Configuration {
            carrier,
            window,
            points: Vec::new(),
        }
    }

    /// Sorts already-valid points without further checks.
    pub(crate) fn assemble(carrier: Carrier, window: Window, mut points: Vec<GroupPoint>) -> Configuration {
        points.sort_by(GroupPoint::lex_cmp);
        Configuration {
            carrier,
            window,
            points,
        }
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn points(&self) -> &[GroupPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Position of `g` among the points, by exact coordinate match.
    pub fn position(&self, g: &GroupPoint) -> Option<usize> {
        self.points.binary_search_by(|p| p.lex_cmp(g)).ok()
    }

    pub fn contains_point(&self, g: &GroupPoint) -> bool {
        self.position(g).is_some()
    }

    pub fn index(&self) -> SpatialIndex<'_> {
        SpatialIndex::new(&self.carrier, &self.points)
    }

    /// Some pair of distinct indices at distance at most `tol`.
    pub fn close_pair(&self, tol: f64) -> Option<(usize, usize)> {
        let idx = self.index();
        for (i, p) in self.points.iter().enumerate() {
            let mut hit = None;
            idx.within(p, tol, |j| {
                if j != i && hit.is_none() {
                    hit = Some(j);
                }
            });
            if let Some(j) = hit {
                return Some((i.min(j), i.max(j)));
            }
        }
        None
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let idx = self.index();
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            if let Some(j) = idx.nearest(p, Some(i)) {
                best = best.min(self.carrier.distance(p, &self.points[j]));
            }
        }
        best
    }

    /// Same points, different window.
    pub fn with_window(&self, window: Window) -> Configuration {
        Configuration {
            carrier: self.carrier,
            window,
            points: self.points.clone(),
        }
    }

    /// Subset of points selected by index.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> Configuration {
        Configuration {
            carrier: self.carrier,
            window: self.window.clone(),
            points: (0..self.len()).filter(|&i| keep(i)).map(|i| self.points[i]).collect(),
        }
    }

    /// The configuration seen from point `i`: the points within `r` of it,
    /// translated so that point `i` sits at the identity.
    pub fn view_at(&self, i: usize, r: f64, idx: &SpatialIndex<'_>) -> RootedConfiguration {
        let x = self.points[i];
        let xinv = self.carrier.inv_unchecked(&x);
        let mut pts = Vec::new();
        idx.within(&x, r, |j| pts.push(self.carrier.mul_unchecked(&xinv, &self.points[j])));
        let id = self.carrier.identity();
        RootedConfiguration(Configuration::assemble(self.carrier, Window::ball(id, r), pts))
    }
}

/// Symbols of a finite alphabet or values in the unit interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mark {
    Symbol(u32),
    Unit(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkSpace {
    Alphabet { size: u32 },
    UnitInterval,
}

/// A configuration with one mark per point, aligned with the canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedConfiguration<M = Mark> {
    base: Configuration,
    marks: Vec<M>,
}

impl<M: Clone> MarkedConfiguration<M> {
    pub fn new(base: Configuration, marks: Vec<M>) -> Result<Self> {
        if marks.len() != base.len() {
            return usage(format!("{} marks for {} points", marks.len(), base.len()));
        }
        Ok(MarkedConfiguration { base, marks })
    }

    /// Builds from unsorted `(point, mark)` pairs.
    pub fn from_pairs(carrier: Carrier, window: Window, pairs: Vec<(GroupPoint, M)>) -> Result<Self> {
        let (pts, _): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let base = Configuration::new(carrier, window, pts)?;
        let mut pairs: Vec<(GroupPoint, M)> = pairs.into_iter().map(|(p, m)| (carrier.canonicalize(&p), m)).collect();
        pairs.sort_by(|a, b| a.0.lex_cmp(&b.0));
        let marks = pairs.into_iter().map(|(_, m)| m).collect();
        Ok(MarkedConfiguration { base, marks })
    }

    pub(crate) fn assemble(carrier: Carrier, window: Window, mut pairs: Vec<(GroupPoint, M)>) -> Self {
        pairs.sort_by(|a, b| a.0.lex_cmp(&b.0));
        let (pts, marks): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        MarkedConfiguration {
            base: Configuration {
                carrier,
                window,
                points: pts,
            },
            marks,
        }
    }

    pub fn base(&self) -> &Configuration {
        &self.base
    }

    pub fn points(&self) -> &[GroupPoint] {
        self.base.points()
    }

    pub fn marks(&self) -> &[M] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupPoint, &M)> {
        self.base.points.iter().zip(&self.marks)
    }

    /// Points whose marks satisfy `keep`.
    pub fn retain(&self, keep: impl Fn(&M) -> bool) -> Configuration {
        self.base.select(|i| keep(&self.marks[i]))
    }

    /// Left translation carrying marks with their points.
    pub fn translate(&self, g: &GroupPoint) -> Result<Self> {
        let moved = translate(&self.base, g)?;
        let c = self.base.carrier;
        let pairs = self.iter().map(|(p, m)| (c.mul_unchecked(g, p), m.clone())).collect();
        Ok(Self::assemble(c, moved.window, pairs))
    }
}

/// A configuration containing the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct RootedConfiguration(Configuration);

impl RootedConfiguration {
    pub fn new(c: Configuration) -> Result<Self> {
        let id = c.carrier.identity();
        if !c.contains_point(&id) {
            return usage("rooted configuration must contain the identity");
        }
        Ok(RootedConfiguration(c))
    }

    pub fn config(&self) -> &Configuration {
        &self.0
    }

    pub fn into_config(self) -> Configuration {
        self.0
    }

    pub fn points(&self) -> &[GroupPoint] {
        self.0.points()
    }

    pub fn carrier(&self) -> &Carrier {
        &self.0.carrier
    }

    /// Index of the root among the points.
    pub fn root_index(&self) -> usize {
        self.0
            .position(&self.0.carrier.identity())
            .expect("rooted configuration contains the identity")
    }

    /// Number of points other than the root within distance `r` of it.
    pub fn count_within(&self, r: f64) -> usize {
        let id = self.0.carrier.identity();
        self.points()
            .iter()
            .filter(|p| **p != id && self.0.carrier.distance(&id, p) <= r)
            .count()
    }

    /// Distance from the root to the nearest other point.
    pub fn nearest_distance(&self) -> Option<f64> {
        let id = self.0.carrier.identity();
        self.points()
            .iter()
            .filter(|p| **p != id)
            .map(|p| self.0.carrier.distance(&id, p))
            .min_by(f64::total_cmp)
    }

    /// Restriction to the closed ball of radius `r` about the root.
    pub fn clip(&self, r: f64) -> RootedConfiguration {
        let c = &self.0;
        let id = c.carrier.identity();
        let pts = c
            .points
            .iter()
            .copied()
            .filter(|p| c.carrier.distance(&id, p) <= r)
            .collect();
        RootedConfiguration(Configuration {
            carrier: c.carrier,
            window: Window::ball(id, r),
            points: pts,
        })
    }
}

/// An arrow `(omega, g)` of the rerooting groupoid: a rooted configuration
/// together with one of its points.
#[derive(Clone, Debug, PartialEq)]
pub struct BirootedPair {
    base: RootedConfiguration,
    target: GroupPoint,
}

impl BirootedPair {
    pub fn new(base: RootedConfiguration, target: GroupPoint) -> Result<Self> {
        if !base.0.contains_point(&target) {
            return usage(format!("target {target:?} is not a point of the configuration"));
        }
        Ok(BirootedPair { base, target })
    }

    pub fn source(&self) -> &RootedConfiguration {
        &self.base
    }

    pub fn target(&self) -> &GroupPoint {
        &self.target
    }

    /// The configuration rerooted at the target.
    pub fn target_config(&self) -> RootedConfiguration {
        reroot(self.base.config(), &self.target).expect("target is a point of the base")
    }

    /// `(omega, g) . (g^-1 omega, h) = (omega, g h)`.
    pub fn compose(&self, next: &BirootedPair) -> Result<BirootedPair> {
        if next.base != self.target_config() {
            return usage("arrows are not composable");
        }
        let c = self.base.carrier();
        let gh = c.mul_unchecked(&self.target, &next.target);
        BirootedPair::new(self.base.clone(), gh)
    }

    pub fn inverse(&self) -> BirootedPair {
        let c = self.base.carrier();
        BirootedPair {
            base: self.target_config(),
            target: c.inv_unchecked(&self.target),
        }
    }
}

/// Left action `g . omega`.
///
/// On the torus the window moves with the points. On other carriers the
/// window is the fixed simulated region and every image must stay inside it.
pub fn translate(c: &Configuration, g: &GroupPoint) -> Result<Configuration> {
    let carrier = c.carrier;
    carrier.check(g)?;
    let pts: Vec<GroupPoint> = c.points.iter().map(|p| carrier.mul_unchecked(g, p)).collect();
    if carrier.is_torus() {
        let window = c.window.translate(&carrier, g);
        return Ok(Configuration::assemble(carrier, window, pts));
    }
    if let Some(p) = pts.iter().find(|p| !c.window.contains(&carrier, p)) {
        return Err(Error::Range(format!("translated point {p:?} leaves the window")));
    }
    Ok(Configuration::assemble(carrier, c.window.clone(), pts))
}

/// `x^-1 . omega` for a point `x` of `omega`; the window moves with it.
pub fn reroot(c: &Configuration, x: &GroupPoint) -> Result<RootedConfiguration> {
    if !c.contains_point(x) {
        return usage(format!("{x:?} is not a point of the configuration"));
    }
    let carrier = c.carrier;
    let xinv = carrier.inv_unchecked(x);
    let pts = c.points.iter().map(|p| carrier.mul_unchecked(&xinv, p)).collect();
    let window = c.window.translate(&carrier, &xinv);
    Ok(RootedConfiguration(Configuration::assemble(carrier, window, pts)))
}

pub fn count(c: &Configuration, u: &Window) -> usize {
    c.points.iter().filter(|p| u.contains(&c.carrier, p)).count()
}

/// Mean of `N_U / lambda(U)` over the samples.
pub fn estimate_intensity(samples: &[Configuration], u: &Window) -> Result<StatReport> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least 2",
            samples.len()
        )));
    }
    let carrier = samples[0].carrier;
    let vol = u.haar_volume(&carrier);
    if !(vol > 0.0 && vol.is_finite()) {
        return usage(format!("window volume {vol} is not positive and finite"));
    }
    let mut acc = Accumulator::new();
    for s in samples {
        acc.push(count(s, u) as f64 / vol);
    }
    Ok(StatReport::mean("intensity", "N_U/vol(U)", acc, None))
}

/// Homogeneous Poisson process of intensity `t` on the window.
pub fn sample_poisson<R: Rng + ?Sized>(
    carrier: &Carrier,
    window: &Window,
    t: f64,
    rng: &mut R,
) -> Result<Configuration> {
    carrier.validate()?;
    window.validate(carrier)?;
    if !(t.is_finite() && t >= 0.0) {
        return usage(format!("intensity must be finite and non-negative, got {t}"));
    }
    let vol = window.haar_volume(carrier);
    if !vol.is_finite() {
        return usage("cannot sample a Poisson process on an infinite window");
    }
    let mean = t * vol;
    let n = if mean > 0.0 {
        Poisson::new(mean).map_err(|e| Error::Usage(e.to_string()))?.sample(rng) as usize
    } else {
        0
    };
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        pts.push(sample_uniform(carrier, window, rng)?);
    }
    redraw_duplicates(carrier, window, pts, rng)
}

fn redraw_duplicates<R: Rng + ?Sized>(
    carrier: &Carrier,
    window: &Window,
    pts: Vec<GroupPoint>,
    rng: &mut R,
) -> Result<Configuration> {
    let mut c = Configuration::assemble(*carrier, window.clone(), pts);
    while let Some((_, j)) = c.close_pair(DISTINCT_TOL) {
        DUPLICATE_REDRAWS.fetch_add(1, AtomicOrdering::Relaxed);
        let mut pts = c.points;
        pts[j] = sample_uniform(carrier, window, rng)?;
        c = Configuration::assemble(*carrier, window.clone(), pts);
    }
    Ok(c)
}

/// The grid `s Z^d mod L` shifted by a uniform element of `[0, s)^d`.
pub fn sample_lattice_shift<R: Rng + ?Sized>(carrier: &Carrier, spacing: f64, rng: &mut R) -> Result<Configuration> {
    let Carrier::FlatTorus { dim, side } = *carrier else {
        return usage("lattice shifts are defined on the torus only");
    };
    let per_axis = side / spacing;
    if !(spacing > 0.0) || per_axis.fract() != 0.0 {
        return usage(format!("spacing {spacing} does not divide the side {side}"));
    }
    let m = per_axis as usize;
    let shift = sample_uniform(carrier, &Window::cube(0.0, spacing, dim), rng)?;
    let mut pts = Vec::with_capacity(m.pow(dim as u32));
    let mut k = vec![0usize; dim];
    loop {
        let c: Vec<f64> = (0..dim).map(|i| shift.coords()[i] + k[i] as f64 * spacing).collect();
        pts.push(carrier.canonicalize(&GroupPoint::new(&c)));
        let mut ax = 0;
        loop {
            if ax == dim {
                return Ok(Configuration::assemble(*carrier, Window::Full, pts));
            }
            k[ax] += 1;
            if k[ax] < m {
                break;
            }
            k[ax] = 0;
            ax += 1;
        }
    }
}

/// IID marks, independent of the positions. Unit-interval marks lie in `(0, 1]`.
pub fn attach_iid_marks<R: Rng + ?Sized>(
    c: &Configuration,
    space: &MarkSpace,
    rng: &mut R,
) -> Result<MarkedConfiguration> {
    let marks = match *space {
        MarkSpace::Alphabet { size: 0 } => return usage("mark alphabet is empty"),
        MarkSpace::Alphabet { size } => (0..c.len()).map(|_| Mark::Symbol(rng.random_range(0..size))).collect(),
        MarkSpace::UnitInterval => (0..c.len()).map(|_| Mark::Unit(1.0 - rng.random::<f64>())).collect(),
    };
    MarkedConfiguration::new(c.clone(), marks)
}

/// A point process law, as named in experiment configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    Poisson {
        intensity: f64,
    },
    Lattice {
        spacing: f64,
    },
    /// Poisson after delta-thinning.
    Thinned {
        intensity: f64,
        delta: f64,
    },
    /// Delta-thinned Poisson, then thickened by the offsets.
    Thickened {
        intensity: f64,
        delta: f64,
        offsets: Vec<GroupPoint>,
    },
    /// Poisson with IID unit marks, keeping points whose mark is at most `retain`.
    Marked {
        intensity: f64,
        retain: f64,
    },
}

impl ProcessSpec {
    pub fn poisson(intensity: f64) -> ProcessSpec {
        ProcessSpec::Poisson { intensity }
    }

    pub fn validate(&self, carrier: &Carrier) -> Result<()> {
        let quarter = carrier.side().map_or(f64::INFINITY, |l| l / 4.0);
        let nonneg = |t: f64| {
            if t.is_finite() && t >= 0.0 {
                Ok(())
            } else {
                usage(format!("intensity must be finite and non-negative, got {t}"))
            }
        };
        match self {
            ProcessSpec::Poisson { intensity } => nonneg(*intensity),
            ProcessSpec::Lattice { spacing } => {
                let side = carrier
                    .side()
                    .ok_or_else(|| Error::Usage("lattice needs a torus".into()))?;
                if *spacing > 0.0 && (side / spacing).fract() == 0.0 {
                    Ok(())
                } else {
                    usage(format!("spacing {spacing} does not divide {side}"))
                }
            }
            ProcessSpec::Thinned { intensity, delta } => {
                nonneg(*intensity)?;
                if !(*delta > 0.0 && *delta < quarter) {
                    return usage(format!("delta must lie in (0, L/4), got {delta}"));
                }
                Ok(())
            }
            ProcessSpec::Thickened {
                intensity,
                delta,
                offsets,
            } => {
                ProcessSpec::Thinned {
                    intensity: *intensity,
                    delta: *delta,
                }
                .validate(carrier)?;
                let id = carrier.identity();
                if !offsets.contains(&id) {
                    return usage("thickening offsets must contain the identity");
                }
                let reach = offsets.iter().map(|f| carrier.distance(&id, f)).fold(0.0, f64::max);
                if *delta <= 2.0 * reach {
                    return usage(format!("delta {delta} must exceed twice the offset reach {reach}"));
                }
                for f in offsets {
                    carrier.check(f)?;
                }
                Ok(())
            }
            ProcessSpec::Marked { intensity, retain } => {
                nonneg(*intensity)?;
                if !(0.0..=1.0).contains(retain) {
                    return usage("retain probability must lie in [0, 1]");
                }
                Ok(())
            }
        }
    }

    /// Closed-form intensity.
    pub fn intensity(&self, carrier: &Carrier) -> f64 {
        let d = carrier.dim() as i32;
        match self {
            ProcessSpec::Poisson { intensity } => *intensity,
            ProcessSpec::Lattice { spacing } => spacing.powi(-d),
            ProcessSpec::Thinned { intensity, delta } => {
                intensity * (-intensity * unit_ball_volume(d as usize) * delta.powi(d)).exp()
            }
            ProcessSpec::Thickened {
                intensity,
                delta,
                offsets,
            } => {
                offsets.len() as f64
                    * ProcessSpec::Thinned {
                        intensity: *intensity,
                        delta: *delta,
                    }
                    .intensity(carrier)
            }
            ProcessSpec::Marked { intensity, retain } => intensity * retain,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, carrier: &Carrier, window: &Window, rng: &mut R) -> Result<Configuration> {
        match self {
            ProcessSpec::Poisson { intensity } => sample_poisson(carrier, window, *intensity, rng),
            ProcessSpec::Lattice { spacing } => {
                if *window != Window::Full {
                    return usage("lattice shifts are sampled on the full torus");
                }
                sample_lattice_shift(carrier, *spacing, rng)
            }
            ProcessSpec::Thinned { intensity, delta } => {
                let base = sample_poisson(carrier, window, *intensity, rng)?;
                Ok(factor::delta_thinning(&base, *delta))
            }
            ProcessSpec::Thickened {
                intensity,
                delta,
                offsets,
            } => {
                let base = sample_poisson(carrier, window, *intensity, rng)?;
                factor::constant_thickening(&factor::delta_thinning(&base, *delta), offsets)
            }
            ProcessSpec::Marked { intensity, retain } => {
                let base = sample_poisson(carrier, window, *intensity, rng)?;
                let marked = attach_iid_marks(&base, &MarkSpace::UnitInterval, rng)?;
                factor::independent_thinning(&marked, *retain)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::Poisson { .. } => "poisson",
            ProcessSpec::Lattice { .. } => "lattice",
            ProcessSpec::Thinned { .. } => "thinned",
            ProcessSpec::Thickened { .. } => "thickened",
            ProcessSpec::Marked { .. } => "marked",
        }
    }
}
