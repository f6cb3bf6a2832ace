//! Carrier groups, their metrics and Haar measures, and windows.
//!
//! Three carriers are provided:
//!
//! * [`Carrier::FlatTorus`]: `(R/LZ)^d`, the default stand-in for a noncompact
//!   unimodular group. Coordinates are kept on a dyadic lattice of spacing
//!   `2^-m` (with `L * 2^m <= 2^50`), so the group law is exact in `f64` and
//!   every translation is bit-exactly invertible.
//! * [`Carrier::EuclideanBox`]: plain `R^d`, for boundary-effect experiments.
//! * [`Carrier::AffineLine`]: the `ax + b` group with law
//!   `(a, b) * (a', b') = (a a', a b' + b)`, left Haar density `da db / a^2`
//!   and the hyperbolic upper-half-plane metric on `(b, a)`. Non-unimodular.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{usage, Error, Result};

pub const MAX_DIM: usize = 3;

/// Tolerance for algebraic identities (left invariance, associativity).
pub const ALGEBRAIC_TOL: f64 = 1e-9;
/// Relative tolerance for quadrature-based volumes.
pub const QUADRATURE_RTOL: f64 = 1e-6;

/// An element of a carrier group.
///
/// For the torus and Euclidean carriers the coordinates are the usual ones;
/// for the affine line they are `(a, b)` with `a > 0`.
#[derive(Clone, Copy, PartialEq)]
pub struct GroupPoint {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl GroupPoint {
    /// Panics if `coords` is empty or longer than [`MAX_DIM`].
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "GroupPoint supports 1..={MAX_DIM} coordinates, got {}",
            coords.len()
        );
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        GroupPoint {
            coords: c,
            dim: coords.len() as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub(crate) fn raw(&self) -> &[f64; MAX_DIM] {
        &self.coords
    }

    pub(crate) fn from_raw(coords: [f64; MAX_DIM], dim: usize) -> Self {
        GroupPoint { coords, dim: dim as u8 }
    }

    /// Lexicographic total order on coordinates.
    pub fn lex_cmp(&self, other: &GroupPoint) -> Ordering {
        lex_cmp_slices(self.coords(), other.coords())
    }
}

pub(crate) fn lex_cmp_slices(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

impl fmt::Debug for GroupPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for GroupPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(de::Error::custom(format!("point must have 1..={MAX_DIM} coordinates")));
        }
        Ok(GroupPoint::new(&v))
    }
}

/// The ambient group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Carrier {
    FlatTorus { dim: usize, side: f64 },
    EuclideanBox { dim: usize },
    AffineLine,
}

impl Carrier {
    pub fn torus(dim: usize, side: f64) -> Result<Carrier> {
        let c = Carrier::FlatTorus { dim, side };
        c.validate()?;
        Ok(c)
    }

    pub fn euclidean(dim: usize) -> Result<Carrier> {
        let c = Carrier::EuclideanBox { dim };
        c.validate()?;
        Ok(c)
    }

    pub fn affine() -> Carrier {
        Carrier::AffineLine
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Carrier::FlatTorus { dim, side } => {
                if !(1..=MAX_DIM).contains(&dim) {
                    return usage(format!("torus dimension must be 1..={MAX_DIM}"));
                }
                if !(side.is_finite() && side > 0.0) {
                    return usage("torus side must be positive and finite");
                }
                let scaled = side * torus_scale(side);
                if scaled.fract() != 0.0 {
                    return usage(format!(
                        "torus side {side} is not a dyadic rational at resolution 2^-{}",
                        torus_exponent(side)
                    ));
                }
                Ok(())
            }
            Carrier::EuclideanBox { dim } => {
                if !(1..=MAX_DIM).contains(&dim) {
                    return usage(format!("Euclidean dimension must be 1..={MAX_DIM}"));
                }
                Ok(())
            }
            Carrier::AffineLine => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Carrier::FlatTorus { dim, .. } | Carrier::EuclideanBox { dim } => dim,
            Carrier::AffineLine => 2,
        }
    }

    pub fn is_unimodular(&self) -> bool {
        !matches!(self, Carrier::AffineLine)
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Carrier::FlatTorus { .. })
    }

    /// Side length of the torus, if this is one.
    pub fn side(&self) -> Option<f64> {
        match *self {
            Carrier::FlatTorus { side, .. } => Some(side),
            _ => None,
        }
    }

    /// Coordinate resolution of the torus lattice (`0` for other carriers).
    pub fn quantum(&self) -> f64 {
        match *self {
            Carrier::FlatTorus { side, .. } => 1.0 / torus_scale(side),
            _ => 0.0,
        }
    }

    pub fn identity(&self) -> GroupPoint {
        match *self {
            Carrier::AffineLine => GroupPoint::new(&[1.0, 0.0]),
            _ => GroupPoint::from_raw([0.0; MAX_DIM], self.dim()),
        }
    }

    /// Checks that `g` is an element of this carrier.
    pub fn check(&self, g: &GroupPoint) -> Result<()> {
        if g.dim() != self.dim() {
            return usage(format!(
                "point {g:?} has dimension {} but the carrier has dimension {}",
                g.dim(),
                self.dim()
            ));
        }
        if g.coords().iter().any(|x| !x.is_finite()) {
            return usage(format!("point {g:?} has non-finite coordinates"));
        }
        if let Carrier::AffineLine = self {
            if g.coords()[0] <= 0.0 {
                return usage(format!("affine scale coordinate must be positive: {g:?}"));
            }
        }
        Ok(())
    }

    /// Maps a point onto the carrier's canonical representative. On the torus
    /// this snaps to the dyadic lattice and reduces into `[0, L)`.
    pub fn canonicalize(&self, g: &GroupPoint) -> GroupPoint {
        match *self {
            Carrier::FlatTorus { side, .. } => {
                let scale = torus_scale(side);
                let mut c = *g.raw();
                for x in c.iter_mut().take(g.dim()) {
                    *x = reduce_mod((*x * scale).round() / scale, side);
                }
                GroupPoint::from_raw(c, g.dim())
            }
            _ => *g,
        }
    }

    pub fn mul(&self, g: &GroupPoint, h: &GroupPoint) -> Result<GroupPoint> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul_unchecked(g, h))
    }

    pub fn inv(&self, g: &GroupPoint) -> Result<GroupPoint> {
        self.check(g)?;
        Ok(self.inv_unchecked(g))
    }

    pub(crate) fn mul_unchecked(&self, g: &GroupPoint, h: &GroupPoint) -> GroupPoint {
        let d = self.dim();
        match *self {
            Carrier::FlatTorus { side, .. } => {
                let mut c = [0.0; MAX_DIM];
                for i in 0..d {
                    c[i] = add_mod(g.coords[i], h.coords[i], side);
                }
                self.canonicalize(&GroupPoint::from_raw(c, d))
            }
            Carrier::EuclideanBox { .. } => {
                let mut c = [0.0; MAX_DIM];
                for i in 0..d {
                    c[i] = g.coords[i] + h.coords[i];
                }
                GroupPoint::from_raw(c, d)
            }
            Carrier::AffineLine => {
                let (a, b) = (g.coords[0], g.coords[1]);
                let (a2, b2) = (h.coords[0], h.coords[1]);
                GroupPoint::new(&[a * a2, a * b2 + b])
            }
        }
    }

    pub(crate) fn inv_unchecked(&self, g: &GroupPoint) -> GroupPoint {
        let d = self.dim();
        match *self {
            Carrier::FlatTorus { side, .. } => {
                let mut c = [0.0; MAX_DIM];
                for i in 0..d {
                    let x = g.coords[i];
                    c[i] = if x == 0.0 { 0.0 } else { side - x };
                }
                GroupPoint::from_raw(c, d)
            }
            Carrier::EuclideanBox { .. } => {
                let mut c = [0.0; MAX_DIM];
                for i in 0..d {
                    c[i] = -g.coords[i];
                }
                GroupPoint::from_raw(c, d)
            }
            Carrier::AffineLine => {
                let (a, b) = (g.coords[0], g.coords[1]);
                GroupPoint::new(&[1.0 / a, -b / a])
            }
        }
    }

    /// Left-invariant proper metric.
    pub fn distance(&self, g: &GroupPoint, h: &GroupPoint) -> f64 {
        match *self {
            Carrier::AffineLine => {
                let (a1, b1) = (g.coords[0], g.coords[1]);
                let (a2, b2) = (h.coords[0], h.coords[1]);
                let num = (b1 - b2) * (b1 - b2) + (a1 - a2) * (a1 - a2);
                2.0 * (num / (4.0 * a1 * a2)).sqrt().asinh()
            }
            Carrier::FlatTorus { dim: 1, side } => wrap_abs(g.coords[0] - h.coords[0], side),
            _ => self.dist2(g, h).sqrt(),
        }
    }

    /// Checked variant of [`Carrier::distance`].
    pub fn try_distance(&self, g: &GroupPoint, h: &GroupPoint) -> Result<f64> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.distance(g, h))
    }

    /// Squared distance for the flat carriers. Bit-exactly translation
    /// invariant on the torus.
    pub(crate) fn dist2(&self, g: &GroupPoint, h: &GroupPoint) -> f64 {
        match *self {
            Carrier::FlatTorus { dim, side } => {
                let mut s = 0.0;
                for i in 0..dim {
                    let dx = wrap_abs(g.coords[i] - h.coords[i], side);
                    s += dx * dx;
                }
                s
            }
            Carrier::EuclideanBox { dim } => {
                let mut s = 0.0;
                for i in 0..dim {
                    let dx = g.coords[i] - h.coords[i];
                    s += dx * dx;
                }
                s
            }
            Carrier::AffineLine => {
                let d = self.distance(g, h);
                d * d
            }
        }
    }

    /// Coordinates of `from^-1 * to`, with torus coordinates taken in the
    /// signed range `(-L/2, L/2]`. Used as a translation-invariant tie-break.
    pub fn displacement(&self, from: &GroupPoint, to: &GroupPoint) -> [f64; MAX_DIM] {
        match *self {
            Carrier::FlatTorus { dim, side } => {
                let mut c = [0.0; MAX_DIM];
                for i in 0..dim {
                    c[i] = wrap_signed(to.coords[i] - from.coords[i], side);
                }
                c
            }
            Carrier::EuclideanBox { dim } => {
                let mut c = [0.0; MAX_DIM];
                for i in 0..dim {
                    c[i] = to.coords[i] - from.coords[i];
                }
                c
            }
            Carrier::AffineLine => *self.mul_unchecked(&self.inv_unchecked(from), to).raw(),
        }
    }

    /// Orders `a` and `b` by distance from `from`, ties broken by the
    /// lexicographic order of their displacements from `from`.
    pub(crate) fn closer(&self, from: &GroupPoint, a: &GroupPoint, b: &GroupPoint) -> Ordering {
        let da = self.dist2(from, a);
        let db = self.dist2(from, b);
        match da.total_cmp(&db) {
            Ordering::Equal => {
                let d = self.dim();
                lex_cmp_slices(&self.displacement(from, a)[..d], &self.displacement(from, b)[..d])
            }
            o => o,
        }
    }

    /// Density of left Haar measure with respect to coordinate Lebesgue measure.
    pub fn haar_density(&self, g: &GroupPoint) -> f64 {
        match self {
            Carrier::AffineLine => {
                let a = g.coords[0];
                1.0 / (a * a)
            }
            _ => 1.0,
        }
    }

    /// `|det D R_k(x)|` for right multiplication `x -> x k`.
    fn right_jacobian(&self, k: &GroupPoint) -> f64 {
        match self {
            Carrier::AffineLine => k.coords[0],
            _ => 1.0,
        }
    }
}

fn torus_exponent(side: f64) -> i32 {
    50 - side.log2().ceil() as i32
}

fn torus_scale(side: f64) -> f64 {
    2f64.powi(torus_exponent(side))
}

fn reduce_mod(x: f64, side: f64) -> f64 {
    let mut r = x % side;
    if r < 0.0 {
        r += side;
    }
    if r >= side {
        r -= side;
    }
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn add_mod(x: f64, y: f64, side: f64) -> f64 {
    reduce_mod(x + y, side)
}

pub(crate) fn wrap_abs(dx: f64, side: f64) -> f64 {
    let a = dx.abs();
    if a > 0.5 * side {
        side - a
    } else {
        a
    }
}

pub(crate) fn wrap_signed(dx: f64, side: f64) -> f64 {
    if dx > 0.5 * side {
        dx - side
    } else if dx <= -0.5 * side {
        dx + side
    } else {
        dx
    }
}

/// A region of the carrier.
///
/// On the torus, `Box` coordinates may wrap: a point `x` is inside when
/// `(x_i - lo_i) mod L < hi_i - lo_i` for every axis. On the affine line a
/// `Box` is the coordinate box `{(a, b) : a in [lo_0, hi_0), b in [lo_1, hi_1)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Window {
    /// The whole torus.
    Full,
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Closed metric ball.
    Ball {
        center: GroupPoint,
        radius: f64,
    },
}

impl Window {
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Window {
        Window::Box {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn affine_box(a: (f64, f64), b: (f64, f64)) -> Window {
        Window::Box {
            lo: vec![a.0, b.0],
            hi: vec![a.1, b.1],
        }
    }

    pub fn ball(center: GroupPoint, radius: f64) -> Window {
        Window::Ball { center, radius }
    }

    pub fn validate(&self, carrier: &Carrier) -> Result<()> {
        match self {
            Window::Full => {
                if !carrier.is_torus() {
                    return usage("the full window is only defined on the torus");
                }
            }
            Window::Box { lo, hi } => {
                if lo.len() != carrier.dim() || hi.len() != carrier.dim() {
                    return usage("box window dimension does not match the carrier");
                }
                if lo.iter().chain(hi).any(|x| !x.is_finite()) {
                    return usage("box window bounds must be finite");
                }
                if let Carrier::AffineLine = carrier {
                    if lo[0] <= 0.0 {
                        return usage("affine box must have a positive lower scale bound");
                    }
                }
                if let Some(side) = carrier.side() {
                    if lo.iter().zip(hi).any(|(l, h)| h - l > side) {
                        return usage("box window is wider than the torus");
                    }
                }
            }
            Window::Ball { center, radius } => {
                carrier.check(center)?;
                if !(radius.is_finite() && *radius >= 0.0) {
                    return usage("ball radius must be finite and non-negative");
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, carrier: &Carrier, g: &GroupPoint) -> bool {
        match self {
            Window::Full => true,
            Window::Box { lo, hi } => {
                let c = g.coords();
                match carrier.side() {
                    Some(side) => (0..c.len()).all(|i| {
                        let ext = hi[i] - lo[i];
                        ext >= side || reduce_mod(c[i] - lo[i], side) < ext
                    }),
                    None => (0..c.len()).all(|i| c[i] >= lo[i] && c[i] < hi[i]),
                }
            }
            Window::Ball { center, radius } => carrier.distance(center, g) <= *radius,
        }
    }

    /// Haar volume of the window. Degenerate regions have volume `0`; the full
    /// window of a non-compact carrier is infinite.
    pub fn haar_volume(&self, carrier: &Carrier) -> f64 {
        match self {
            Window::Full => match *carrier {
                Carrier::FlatTorus { dim, side } => side.powi(dim as i32),
                _ => f64::INFINITY,
            },
            Window::Box { lo, hi } => {
                if lo.iter().zip(hi).any(|(l, h)| h <= l) {
                    return 0.0;
                }
                match carrier {
                    Carrier::AffineLine => (1.0 / lo[0] - 1.0 / hi[0]) * (hi[1] - lo[1]),
                    _ => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
                }
            }
            Window::Ball { radius, .. } => {
                let r = *radius;
                match carrier {
                    Carrier::AffineLine => 2.0 * std::f64::consts::PI * (r.cosh() - 1.0),
                    _ => unit_ball_volume(carrier.dim()) * r.powi(carrier.dim() as i32),
                }
            }
        }
    }

    /// Image of the window under left multiplication by `g`.
    pub fn translate(&self, carrier: &Carrier, g: &GroupPoint) -> Window {
        match self {
            Window::Full => Window::Full,
            Window::Ball { center, radius } => Window::Ball {
                center: carrier.mul_unchecked(g, center),
                radius: *radius,
            },
            Window::Box { lo, hi } => match carrier {
                Carrier::AffineLine => {
                    let (a, b) = (g.coords()[0], g.coords()[1]);
                    Window::Box {
                        lo: vec![a * lo[0], a * lo[1] + b],
                        hi: vec![a * hi[0], a * hi[1] + b],
                    }
                }
                Carrier::FlatTorus { side, .. } => {
                    let new_lo: Vec<f64> = lo
                        .iter()
                        .zip(g.coords())
                        .map(|(l, x)| reduce_mod(l + x, *side))
                        .collect();
                    let new_hi = new_lo
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(nl, (l, h))| nl + (h - l))
                        .collect();
                    Window::Box { lo: new_lo, hi: new_hi }
                }
                Carrier::EuclideanBox { .. } => Window::Box {
                    lo: lo.iter().zip(g.coords()).map(|(l, x)| l + x).collect(),
                    hi: hi.iter().zip(g.coords()).map(|(h, x)| h + x).collect(),
                },
            },
        }
    }

    /// A coordinate box containing the window.
    pub fn bounds(&self, carrier: &Carrier) -> (Vec<f64>, Vec<f64>) {
        let d = carrier.dim();
        match self {
            Window::Full => {
                let side = carrier.side().unwrap_or(f64::INFINITY);
                (vec![0.0; d], vec![side; d])
            }
            Window::Box { lo, hi } => (lo.clone(), hi.clone()),
            Window::Ball { center, radius } => {
                let c = center.coords();
                match carrier {
                    Carrier::AffineLine => {
                        let (a, b) = (c[0], c[1]);
                        let r = *radius;
                        (
                            vec![a * (-r).exp(), b - a * r.sinh()],
                            vec![a * r.exp(), b + a * r.sinh()],
                        )
                    }
                    _ => (
                        c.iter().map(|x| x - radius).collect(),
                        c.iter().map(|x| x + radius).collect(),
                    ),
                }
            }
        }
    }
}

pub fn unit_ball_volume(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 / 3.0 * PI,
        _ => unreachable!("dimension is validated to be at most {MAX_DIM}"),
    }
}

pub fn haar_volume(carrier: &Carrier, w: &Window) -> f64 {
    w.haar_volume(carrier)
}

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite Gauss-Legendre integral of `f` over the coordinate box
/// `[lo, hi]`, with `panels` panels per axis.
pub fn integrate_box<F: Fn(&GroupPoint) -> f64>(lo: &[f64], hi: &[f64], panels: usize, f: F) -> f64 {
    let d = lo.len();
    let panels = panels.max(1);
    let per_axis = panels * GL_NODES.len();
    let mut nodes = vec![Vec::with_capacity(per_axis); d];
    let mut weights = vec![Vec::with_capacity(per_axis); d];
    for ax in 0..d {
        let width = (hi[ax] - lo[ax]) / panels as f64;
        for p in 0..panels {
            let mid = lo[ax] + (p as f64 + 0.5) * width;
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                nodes[ax].push(mid + 0.5 * width * x);
                weights[ax].push(0.5 * width * w);
            }
        }
    }
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let mut c = [0.0; MAX_DIM];
        let mut w = 1.0;
        for ax in 0..d {
            c[ax] = nodes[ax][idx[ax]];
            w *= weights[ax][idx[ax]];
        }
        total += w * f(&GroupPoint::from_raw(c, d));
        let mut ax = 0;
        loop {
            idx[ax] += 1;
            if idx[ax] < per_axis {
                break;
            }
            idx[ax] = 0;
            ax += 1;
            if ax == d {
                return total;
            }
        }
    }
}

const QUADRATURE_PANELS: usize = 32;

/// Haar volume of a window computed by quadrature of the Haar density.
pub fn haar_volume_quadrature(carrier: &Carrier, w: &Window) -> f64 {
    let (lo, hi) = w.bounds(carrier);
    if lo.iter().zip(&hi).any(|(l, h)| h <= l) {
        return 0.0;
    }
    let exact_box = matches!(w, Window::Box { .. } | Window::Full);
    integrate_box(&lo, &hi, QUADRATURE_PANELS, |x| {
        if exact_box || w.contains(carrier, x) {
            carrier.haar_density(x)
        } else {
            0.0
        }
    })
}

/// `lambda(W f^-1)`, by quadrature of the Haar density over the
/// right-translated region.
pub fn right_translate_volume(carrier: &Carrier, w: &Window, f: &GroupPoint) -> Result<f64> {
    carrier.check(f)?;
    w.validate(carrier)?;
    let k = carrier.inv_unchecked(f);
    let jac = carrier.right_jacobian(&k);
    let (lo, hi) = w.bounds(carrier);
    if lo.iter().zip(&hi).any(|(l, h)| h <= l) {
        return Ok(0.0);
    }
    let exact_box = matches!(w, Window::Box { .. } | Window::Full);
    Ok(integrate_box(&lo, &hi, QUADRATURE_PANELS, |x| {
        if exact_box || w.contains(carrier, x) {
            carrier.haar_density(&carrier.mul_unchecked(x, &k)) * jac
        } else {
            0.0
        }
    }))
}

/// Draws a point from normalised Haar measure restricted to `w`.
pub fn sample_uniform<R: Rng + ?Sized>(carrier: &Carrier, w: &Window, rng: &mut R) -> Result<GroupPoint> {
    let vol = w.haar_volume(carrier);
    if !(vol > 0.0 && vol.is_finite()) {
        return usage(format!("cannot sample uniformly from a window of volume {vol}"));
    }
    let d = carrier.dim();
    match (carrier, w) {
        (Carrier::FlatTorus { side, .. }, Window::Full) => {
            let scale = torus_scale(*side);
            let ticks = (side * scale) as u64;
            let mut c = [0.0; MAX_DIM];
            for x in c.iter_mut().take(d) {
                *x = rng.random_range(0..ticks) as f64 / scale;
            }
            Ok(GroupPoint::from_raw(c, d))
        }
        (Carrier::FlatTorus { side, .. }, Window::Box { lo, hi }) => {
            let scale = torus_scale(*side);
            let mut c = [0.0; MAX_DIM];
            for i in 0..d {
                let ticks = (((hi[i] - lo[i]) * scale).floor() as u64).max(1);
                c[i] = lo[i] + rng.random_range(0..ticks) as f64 / scale;
            }
            Ok(carrier.canonicalize(&GroupPoint::from_raw(c, d)))
        }
        (Carrier::EuclideanBox { .. }, Window::Box { lo, hi }) => {
            let mut c = [0.0; MAX_DIM];
            for i in 0..d {
                c[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
            }
            Ok(GroupPoint::from_raw(c, d))
        }
        (Carrier::AffineLine, Window::Box { lo, hi }) => Ok(sample_affine_box(lo, hi, rng)),
        (Carrier::AffineLine, Window::Ball { .. }) => {
            let (lo, hi) = w.bounds(carrier);
            loop {
                let g = sample_affine_box(&lo, &hi, rng);
                if w.contains(carrier, &g) {
                    return Ok(g);
                }
            }
        }
        (_, Window::Ball { .. }) => {
            let (lo, hi) = w.bounds(carrier);
            loop {
                let mut c = [0.0; MAX_DIM];
                for i in 0..d {
                    c[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
                }
                let g = carrier.canonicalize(&GroupPoint::from_raw(c, d));
                if w.contains(carrier, &g) {
                    return Ok(g);
                }
            }
        }
        _ => Err(Error::Usage(format!("unsupported window {w:?} for {carrier:?}"))),
    }
}

fn sample_affine_box<R: Rng + ?Sized>(lo: &[f64], hi: &[f64], rng: &mut R) -> GroupPoint {
    // Inverse transform for the a-marginal, whose density is proportional to a^-2.
    let (ia0, ia1) = (1.0 / lo[0], 1.0 / hi[0]);
    let u: f64 = rng.random();
    let a = 1.0 / (ia0 - u * (ia0 - ia1));
    let b = lo[1] + (hi[1] - lo[1]) * rng.random::<f64>();
    GroupPoint::new(&[a, b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    fn p(c: &[f64]) -> GroupPoint {
        GroupPoint::new(c)
    }

    #[test]
    fn torus_wraparound_product() {
        let t = Carrier::torus(2, 10.0).unwrap();
        assert_eq!(t.mul(&p(&[9.0, 9.0]), &p(&[2.0, 3.0])).unwrap(), p(&[1.0, 2.0]));
        let g = p(&[3.5, 7.25]);
        assert_eq!(t.mul(&g, &t.identity()).unwrap(), g);
    }

    #[test]
    fn affine_law_and_inverse() {
        let a = Carrier::affine();
        assert_eq!(a.mul(&p(&[2.0, 1.0]), &p(&[3.0, 4.0])).unwrap(), p(&[6.0, 9.0]));
        assert_eq!(a.inv(&p(&[2.0, 1.0])).unwrap(), p(&[0.5, -0.5]));
        assert!(a.mul(&p(&[-1.0, 0.0]), &p(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let t = Carrier::torus(2, 10.0).unwrap();
        assert!(matches!(t.mul(&p(&[1.0]), &p(&[1.0, 2.0])), Err(Error::Usage(_))));
        assert!(t.try_distance(&p(&[1.0, 1.0, 1.0]), &p(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn torus_distance_takes_shorter_wrap() {
        let t = Carrier::torus(1, 10.0).unwrap();
        assert_eq!(t.distance(&p(&[1.0]), &p(&[9.0])), 2.0);
        assert_eq!(t.distance(&p(&[4.0]), &p(&[4.0])), 0.0);
    }

    #[test]
    fn non_dyadic_torus_side_is_rejected() {
        assert!(Carrier::torus(2, 0.1).is_err());
        assert!(Carrier::torus(4, 10.0).is_err());
        assert!(Carrier::torus(2, 10.0).is_ok());
    }

    #[test]
    fn volumes_of_standard_windows() {
        let t = Carrier::torus(2, 10.0).unwrap();
        assert_eq!(Window::Full.haar_volume(&t), 100.0);
        let e = Carrier::euclidean(3).unwrap();
        assert_eq!(Window::cube(0.0, 1.0, 3).haar_volume(&e), 1.0);
        let a = Carrier::affine();
        let w = Window::affine_box((1.0, 2.0), (0.0, 1.0));
        assert!((w.haar_volume(&a) - 0.5).abs() < 1e-15);
        assert_eq!(Window::affine_box((2.0, 1.0), (0.0, 1.0)).haar_volume(&a), 0.0);
    }

    #[test]
    fn torus_box_wraps() {
        let t = Carrier::torus(1, 10.0).unwrap();
        let w = Window::Box {
            lo: vec![9.0],
            hi: vec![11.0],
        };
        assert!(w.contains(&t, &p(&[0.5])));
        assert!(w.contains(&t, &p(&[9.5])));
        assert!(!w.contains(&t, &p(&[1.5])));
    }

    #[test]
    fn zero_volume_window_cannot_be_sampled() {
        let e = Carrier::euclidean(1).unwrap();
        let mut rng = trial_rng(0, 0, 0);
        let w = Window::cube(1.0, 1.0, 1);
        assert!(matches!(sample_uniform(&e, &w, &mut rng), Err(Error::Usage(_))));
    }

    #[test]
    fn canonical_torus_points_are_dyadic() {
        let t = Carrier::torus(2, 10.0).unwrap();
        let q = t.quantum();
        let g = t.canonicalize(&p(&[0.3, -0.1]));
        for x in g.coords() {
            assert_eq!((x / q).fract(), 0.0);
            assert!((0.0..10.0).contains(x));
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let v = integrate_box(&[0.0, 0.0], &[1.0, 2.0], 1, |x| x.coords()[0].powi(3) * x.coords()[1]);
        assert!((v - 0.5).abs() < 1e-14);
    }
}
