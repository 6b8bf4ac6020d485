//! Named test-field generators.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use hsdecomp_core::maxfn::discrete_convolution;
use hsdecomp_core::MetricMeasureSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldSpec {
    /// First coordinate, or distance from point 0 on matrix spaces.
    Linear,
    /// Tent `max(0, 1 - d(·, c)/(diam/2))` at a seeded center `c`.
    Bump { seed: u64 },
    /// Seeded increments in `[-d, d]` along a breadth-first spanning tree.
    RandomLipschitz { seed: u64 },
    /// `u_r` of the indicator of `{d(0, ·) <= diam/2}` at `r` = 2 spacings.
    IndicatorSmoothed,
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Linear => write!(f, "linear"),
            FieldSpec::Bump { seed } => write!(f, "bump({seed})"),
            FieldSpec::RandomLipschitz { seed } => write!(f, "random-lipschitz({seed})"),
            FieldSpec::IndicatorSmoothed => write!(f, "indicator-smoothed"),
        }
    }
}

impl FromStr for FieldSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let seeded = |prefix: &str| -> Option<Result<u64>> {
            let rest = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(rest.trim().parse::<u64>().map_err(|_| anyhow!("bad seed in field `{s}`")))
        };
        match s {
            "linear" => return Ok(FieldSpec::Linear),
            "indicator-smoothed" => return Ok(FieldSpec::IndicatorSmoothed),
            _ => {}
        }
        if let Some(seed) = seeded("bump") {
            return Ok(FieldSpec::Bump { seed: seed? });
        }
        if let Some(seed) = seeded("random-lipschitz") {
            return Ok(FieldSpec::RandomLipschitz { seed: seed? });
        }
        bail!("unknown field generator `{s}`")
    }
}

impl serde::Serialize for FieldSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for FieldSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Generates the field. One whose oscillation is below `1e-12` of its sup
/// (e.g. a smoothing wider than the space) is snapped to an exact constant.
pub fn generate(space: &MetricMeasureSpace, spec: FieldSpec) -> Result<Vec<f64>> {
    let mut f = raw(space, spec)?;
    let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= 1e-12 * lo.abs().max(hi.abs()) {
        f.iter_mut().for_each(|v| *v = lo);
    }
    Ok(f)
}

fn raw(space: &MetricMeasureSpace, spec: FieldSpec) -> Result<Vec<f64>> {
    let n = space.len();
    let diam = space.diameter();
    Ok(match spec {
        FieldSpec::Linear => match space.coords() {
            Some(c) => c.iter().map(|p| p[0]).collect(),
            None => space.distance_row(0).to_vec(),
        },
        FieldSpec::Bump { seed } => {
            let c = ChaCha8Rng::seed_from_u64(seed).gen_range(0..n);
            (0..n).map(|x| (1.0 - space.d(x, c) / (0.5 * diam)).max(0.0)).collect()
        }
        FieldSpec::RandomLipschitz { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut f = vec![f64::NAN; n];
            f[0] = 0.0;
            let mut queue = std::collections::VecDeque::from([0usize]);
            while let Some(x) = queue.pop_front() {
                for &y in space.neighbors(x) {
                    if f[y].is_nan() {
                        f[y] = f[x] + rng.gen_range(-1.0..=1.0) * space.d(x, y);
                        queue.push_back(y);
                    }
                }
            }
            f
        }
        FieldSpec::IndicatorSmoothed => {
            let ind: Vec<f64> = (0..n).map(|x| if space.d(0, x) <= 0.5 * diam { 1.0 } else { 0.0 }).collect();
            discrete_convolution(space, &ind, 2.0 * space.spacing())?.0.into_vec()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use hsdecomp_core::{build_space, SpaceSpec};

    #[test]
    fn names_round_trip() {
        for s in ["linear", "bump(3)", "random-lipschitz(42)", "indicator-smoothed"] {
            assert_eq!(s.parse::<FieldSpec>().unwrap().to_string(), s);
        }
        assert!("bump".parse::<FieldSpec>().is_err());
        assert!("cubic".parse::<FieldSpec>().is_err());
    }

    #[test]
    fn generated_fields_are_finite_and_deterministic() {
        let s = build_space(&SpaceSpec::Cloud { n: 32, seed: 5 }).unwrap();
        for spec in [
            FieldSpec::Linear,
            FieldSpec::Bump { seed: 1 },
            FieldSpec::RandomLipschitz { seed: 1 },
            FieldSpec::IndicatorSmoothed,
        ] {
            let f = generate(&s, spec).unwrap();
            assert_eq!(f.len(), 32);
            assert!(f.iter().all(|v| v.is_finite()));
            assert_eq!(f, generate(&s, spec).unwrap());
        }
    }

    #[test]
    fn random_lipschitz_respects_edges() {
        let s = build_space(&SpaceSpec::Grid { k: 5 }).unwrap();
        let f = generate(&s, FieldSpec::RandomLipschitz { seed: 9 }).unwrap();
        // Tree edges are bounded by construction; other edges by at most the
        // sum along the tree, so only the sup of increments is checked here.
        assert!(f.iter().all(|v| v.abs() <= 8.0));
    }

    #[test]
    fn wide_smoothing_gives_an_exact_constant() {
        let s = build_space(&SpaceSpec::Cloud { n: 16, seed: 7 }).unwrap();
        let f = generate(&s, FieldSpec::IndicatorSmoothed).unwrap();
        assert!(f.iter().all(|&v| v == f[0]));
    }

    #[test]
    fn linear_on_p4() {
        let s = build_space(&SpaceSpec::Path { n: 4, spacing: 1.0 }).unwrap();
        assert_eq!(generate(&s, FieldSpec::Linear).unwrap(), vec![0.0, 1.0, 2.0, 3.0]);
    }
}
