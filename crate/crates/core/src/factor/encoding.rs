//! Binary marks encoded as local point decorations.
//!
//! Every original point gets satellites arranged in arms. An arm is two
//! satellites at distances `0.006 delta` and `0.009 delta` along a coordinate
//! axis, so each satellite has a partner within `delta / 200` while the
//! original has no point that close. `+` carries arms along both axes (four
//! satellites) and `-` one arm along the first axis (two satellites).

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::geometry::{Carrier, GroupPoint};
use crate::process::{Configuration, MarkedConfiguration, ProcessSpec};
use crate::report::StatReport;
use crate::rng::{run_trials, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

const ARM: [f64; 2] = [0.006, 0.009];

fn check_planar_torus(carrier: &Carrier) -> Result<()> {
    match carrier {
        Carrier::FlatTorus { dim: 2, .. } => Ok(()),
        _ => usage("local encoding is defined on the two-dimensional torus"),
    }
}

pub fn local_encode_marks(mc: &MarkedConfiguration<Sign>, delta: f64) -> Result<Configuration> {
    let carrier = *mc.base().carrier();
    check_planar_torus(&carrier)?;
    if !(delta > 0.0) {
        return usage("delta must be positive");
    }
    if mc.len() >= 2 {
        let sep = mc.base().min_pairwise_distance();
        if sep <= delta {
            return Err(Error::Precondition(format!(
                "configuration is not delta-separated: minimum distance {sep} <= {delta}"
            )));
        }
    }
    // Offsets are snapped to the coordinate lattice first so that adding them
    // is exact and commutes with translation.
    let offset = |axis: usize, s: f64| {
        let mut c = [0.0, 0.0];
        c[axis] = s * delta;
        carrier.canonicalize(&GroupPoint::new(&c))
    };
    let mut pts = Vec::with_capacity(mc.len() * 5);
    for (x, sign) in mc.iter() {
        pts.push(*x);
        let axes: &[usize] = match sign {
            Sign::Plus => &[0, 1],
            Sign::Minus => &[0],
        };
        for &axis in axes {
            for s in ARM {
                pts.push(carrier.mul_unchecked(x, &offset(axis, s)));
            }
        }
    }
    Ok(Configuration::assemble(carrier, mc.base().window().clone(), pts))
}

/// Inverse of [`local_encode_marks`] on its outputs.
pub fn local_decode_marks(c: &Configuration, delta: f64) -> Result<MarkedConfiguration<Sign>> {
    check_planar_torus(c.carrier())?;
    let idx = c.index();
    let mut pairs = Vec::new();
    for (i, x) in c.points().iter().enumerate() {
        let mut near = 0usize;
        let mut isolated = true;
        idx.within(x, delta / 100.0, |j| {
            if j != i {
                near += 1;
                if c.carrier().distance(x, &c.points()[j]) <= delta / 200.0 {
                    isolated = false;
                }
            }
        });
        if !isolated {
            continue;
        }
        let sign = match near {
            4 => Sign::Plus,
            2 => Sign::Minus,
            k => return usage(format!("point {x:?} has {k} satellites; not an encoded configuration")),
        };
        pairs.push((*x, sign));
    }
    Ok(MarkedConfiguration::assemble(*c.carrier(), c.window().clone(), pairs))
}

/// Encodes IID fair signs on `trials` sampled configurations and counts the
/// exact round trips. The process must be `delta`-separated.
pub fn check_local_encoding(
    spec: &ProcessSpec,
    carrier: &Carrier,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<StatReport> {
    check_planar_torus(carrier)?;
    spec.validate(carrier)?;
    let outcomes = run_trials(trials, seed, stream::AUX, |_, rng| -> Result<bool> {
        let c = spec.sample(carrier, &crate::geometry::Window::Full, rng)?;
        let signs = (0..c.len())
            .map(|_| {
                if rand::Rng::random_bool(rng, 0.5) {
                    Sign::Plus
                } else {
                    Sign::Minus
                }
            })
            .collect();
        let mc = MarkedConfiguration::new(c, signs)?;
        let enc = local_encode_marks(&mc, delta)?;
        Ok(enc.len()
            == mc
                .iter()
                .map(|(_, s)| if *s == Sign::Plus { 5 } else { 3 })
                .sum::<usize>()
            && local_decode_marks(&enc, delta)? == mc)
    });
    let mut matched = 0;
    for o in outcomes {
        matched += o? as u64;
    }
    Ok(StatReport::exact(
        "local_encoding",
        "decode_encode_identity",
        matched,
        trials as u64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;

    fn torus() -> Carrier {
        Carrier::torus(2, 10.0).unwrap()
    }

    #[test]
    fn empty_round_trip() {
        let mc = MarkedConfiguration::<Sign>::from_pairs(torus(), Window::Full, vec![]).unwrap();
        let enc = local_encode_marks(&mc, 0.5).unwrap();
        assert!(enc.is_empty());
        assert_eq!(local_decode_marks(&enc, 0.5).unwrap(), mc);
    }

    #[test]
    fn single_plus_has_five_points() {
        let mc =
            MarkedConfiguration::from_pairs(torus(), Window::Full, vec![(GroupPoint::new(&[1.0, 2.0]), Sign::Plus)])
                .unwrap();
        let enc = local_encode_marks(&mc, 0.5).unwrap();
        assert_eq!(enc.len(), 5);
        assert_eq!(local_decode_marks(&enc, 0.5).unwrap(), mc);
    }

    #[test]
    fn mixed_round_trip() {
        let pairs = vec![
            (GroupPoint::new(&[1.0, 2.0]), Sign::Plus),
            (GroupPoint::new(&[1.6, 2.0]), Sign::Minus),
            (GroupPoint::new(&[9.99, 9.995]), Sign::Minus),
        ];
        let mc = MarkedConfiguration::from_pairs(torus(), Window::Full, pairs).unwrap();
        let enc = local_encode_marks(&mc, 0.5).unwrap();
        assert_eq!(enc.len(), 5 + 3 + 3);
        assert_eq!(local_decode_marks(&enc, 0.5).unwrap(), mc);
    }

    #[test]
    fn thinned_poisson_round_trips() {
        let spec = ProcessSpec::Thinned {
            intensity: 1.0,
            delta: 0.5,
        };
        let r = check_local_encoding(&spec, &torus(), 0.5, 20, 3).unwrap();
        assert!(r.pass, "{r:?}");
        let e = check_local_encoding(&ProcessSpec::poisson(1.0), &torus(), 0.5, 20, 3).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn separation_is_required() {
        let pairs = vec![
            (GroupPoint::new(&[1.0, 2.0]), Sign::Plus),
            (GroupPoint::new(&[1.3, 2.0]), Sign::Minus),
        ];
        let mc = MarkedConfiguration::from_pairs(torus(), Window::Full, pairs).unwrap();
        assert!(matches!(local_encode_marks(&mc, 0.5), Err(Error::Precondition(_))));
    }
}
