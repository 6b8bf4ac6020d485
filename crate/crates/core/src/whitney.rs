//! Whitney covers of a level set and the subordinate partition of unity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::{discrete_gradient, Ball, MetricMeasureSpace};

/// Dilation from underlying to covering balls.
pub const C1: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyCover {
    pub omega: Vec<usize>,
    pub complement: Vec<usize>,
    /// Pairwise member-disjoint balls `B(x_i, d(x_i, F)/(2 C1))`.
    pub underlying: Vec<Ball>,
    /// `B(x_i, r_i)` with `r_i = d(x_i, F)/2`.
    pub covering: Vec<Ball>,
    pub centers: Vec<usize>,
    pub radii: Vec<f64>,
    /// `max_x #{i : x in B_i}`.
    pub overlap: usize,
    pub c1: f64,
}

impl WhitneyCover {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Distance from each point to the set `targets` (`+inf` if empty).
pub fn distance_to_set(space: &MetricMeasureSpace, targets: &[usize]) -> Vec<f64> {
    (0..space.len())
        .map(|x| targets.iter().map(|&z| space.d(x, z)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Greedy Whitney decomposition of `omega`: points in decreasing `d(·, F)`,
/// ties by id; a point becomes a center iff its underlying ball misses every
/// accepted underlying ball. A rejected `y` meets some earlier `x_j`'s ball,
/// so `d(y, x_j) <= d(x_j, F)/C1 = r_j/2`.
pub fn whitney_cover(space: &MetricMeasureSpace, omega: &[usize]) -> Result<WhitneyCover> {
    let n = space.len();
    let mut in_omega = vec![false; n];
    for &x in omega {
        if x >= n {
            return Err(Error::Shape(format!("point {x} outside a space of {n} points")));
        }
        in_omega[x] = true;
    }
    let omega: Vec<usize> = (0..n).filter(|&x| in_omega[x]).collect();
    let complement: Vec<usize> = (0..n).filter(|&x| !in_omega[x]).collect();
    if omega.is_empty() {
        return Ok(WhitneyCover {
            omega,
            complement,
            underlying: Vec::new(),
            covering: Vec::new(),
            centers: Vec::new(),
            radii: Vec::new(),
            overlap: 0,
            c1: C1,
        });
    }
    if complement.is_empty() {
        return Err(Error::ComplementEmpty);
    }
    let dist_f = distance_to_set(space, &complement);
    let mut order = omega.clone();
    order.sort_by(|&a, &b| dist_f[b].total_cmp(&dist_f[a]).then(a.cmp(&b)));

    let mut taken = vec![false; n];
    let mut underlying = Vec::new();
    let mut centers = Vec::new();
    for x in order {
        let ball = space.ball(x, dist_f[x] / (2.0 * C1));
        if ball.members.iter().any(|&y| taken[y]) {
            continue;
        }
        for &y in &ball.members {
            taken[y] = true;
        }
        underlying.push(ball);
        centers.push(x);
    }
    let radii: Vec<f64> = centers.iter().map(|&x| 0.5 * dist_f[x]).collect();
    let covering: Vec<Ball> = centers.iter().zip(&radii).map(|(&x, &r)| space.ball(x, r)).collect();
    let mut count = vec![0usize; n];
    for b in &covering {
        for &y in &b.members {
            count[y] += 1;
        }
    }
    if let Some(&x) = omega.iter().find(|&&x| count[x] == 0) {
        return Err(Error::Invariant(format!("Whitney balls miss point {x} of the level set")));
    }
    Ok(WhitneyCover {
        omega,
        complement,
        underlying,
        covering,
        centers,
        radii,
        overlap: count.into_iter().max().unwrap_or(0),
        c1: C1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub chi: Vec<ScalarField>,
    /// `max_x |∇chi_i|(x)` per index.
    pub gradient_sup: Vec<f64>,
    /// `max_i r_i * gradient_sup[i]`.
    pub c_pu: f64,
}

/// `chi_i = psi_i / sum_j psi_j` on `omega`, 0 on `F`, where
/// `psi_i = max(0, 1 - d(·, x_i)/r_i)`. Every `y` in `omega` lies within
/// `r_j/2` of some center, so the denominator is at least 1/2 there.
pub fn partition_of_unity(space: &MetricMeasureSpace, cover: &WhitneyCover) -> Result<PartitionOfUnity> {
    let n = space.len();
    let m = cover.len();
    let tents: Vec<Vec<f64>> = cover
        .centers
        .iter()
        .zip(&cover.radii)
        .map(|(&c, &r)| (0..n).map(|y| (1.0 - space.d(y, c) / r).max(0.0)).collect())
        .collect();
    let mut inside = vec![false; n];
    for &x in &cover.omega {
        inside[x] = true;
    }
    let mut total = vec![0.0; n];
    for t in &tents {
        for (s, v) in total.iter_mut().zip(t) {
            *s += v;
        }
    }
    if let Some(&x) = cover.omega.iter().find(|&&x| total[x] <= 0.0) {
        return Err(Error::Invariant(format!("tents vanish at point {x} of the level set")));
    }
    let chi: Vec<ScalarField> = tents
        .into_iter()
        .map(|t| {
            ScalarField::new(
                (0..n)
                    .map(|y| if inside[y] && t[y] > 0.0 { t[y] / total[y] } else { 0.0 })
                    .collect(),
            )
        })
        .collect();
    let gradient_sup: Vec<f64> = chi
        .iter()
        .map(|c| discrete_gradient(space, c).iter().copied().fold(0.0, f64::max))
        .collect();
    let c_pu = (0..m).map(|i| cover.radii[i] * gradient_sup[i]).fold(0.0, f64::max);
    Ok(PartitionOfUnity { chi, gradient_sup, c_pu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, SpaceSpec};

    fn p4() -> MetricMeasureSpace {
        build_space(&SpaceSpec::Path { n: 4, spacing: 1.0 }).unwrap()
    }

    #[test]
    fn p4_middle_pair() {
        let s = p4();
        let cover = whitney_cover(&s, &[1, 2]).unwrap();
        assert_eq!(cover.centers, vec![1, 2]);
        assert_eq!(cover.radii, vec![0.5, 0.5]);
        assert_eq!(cover.covering[0].members, vec![1]);
        assert_eq!(cover.covering[1].members, vec![2]);
        assert_eq!(cover.overlap, 1);
        let pu = partition_of_unity(&s, &cover).unwrap();
        assert_eq!(&*pu.chi[0], &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(&*pu.chi[1], &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_and_full_level_sets() {
        let s = p4();
        assert!(whitney_cover(&s, &[]).unwrap().is_empty());
        assert!(matches!(whitney_cover(&s, &[0, 1, 2, 3]), Err(Error::ComplementEmpty)));
    }

    #[test]
    fn single_point_of_grid() {
        let s = build_space(&SpaceSpec::Grid { k: 4 }).unwrap();
        let cover = whitney_cover(&s, &[5]).unwrap();
        assert_eq!(cover.centers, vec![5]);
        assert_eq!(cover.radii, vec![0.5]);
        let pu = partition_of_unity(&s, &cover).unwrap();
        assert_eq!(pu.chi[0][5], 1.0);
        assert_eq!(pu.chi[0].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn cloud_cover_invariants() {
        let s = build_space(&SpaceSpec::Cloud { n: 64, seed: 7 }).unwrap();
        let omega: Vec<usize> = (0..64).filter(|&x| s.coords().unwrap()[x][0] < 0.6).collect();
        let cover = whitney_cover(&s, &omega).unwrap();
        let dist_f = distance_to_set(&s, &cover.complement);
        let mut seen = vec![false; 64];
        for b in &cover.underlying {
            for &y in &b.members {
                assert!(!seen[y]);
                seen[y] = true;
            }
        }
        for (i, &c) in cover.centers.iter().enumerate() {
            assert_eq!(cover.radii[i], 0.5 * dist_f[c]);
            let twice = s.ball(c, 2.0 * cover.radii[i]);
            assert!(twice.members.iter().any(|y| cover.complement.contains(y)));
        }
        for &x in &omega {
            let idx: Vec<usize> = (0..cover.len()).filter(|&i| cover.covering[i].contains(x)).collect();
            assert!(!idx.is_empty());
            for &i in &idx {
                for &k in &idx {
                    assert!(cover.radii[k] <= 3.0 * cover.radii[i] + 1e-12);
                }
            }
        }
        let pu = partition_of_unity(&s, &cover).unwrap();
        for x in 0..64 {
            let sum: f64 = pu.chi.iter().map(|c| c[x]).sum();
            let expect = if omega.contains(&x) { 1.0 } else { 0.0 };
            assert!((sum - expect).abs() < 1e-12);
        }
        for (i, c) in pu.chi.iter().enumerate() {
            for x in c.support() {
                assert!(cover.covering[i].contains(x));
            }
        }
        assert!(cover.overlap <= 64);
    }
}
