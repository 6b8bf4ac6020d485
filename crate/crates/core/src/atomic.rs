//! Atomic decompositions built from Calderón–Zygmund decompositions at the
//! dyadic heights `alpha = 2^j`, and validators for every atom flavor.
//!
//! With `g^j` the good part at height `2^j`, `f = g^{j_min} + sum_j l^j` where
//! `l^j = g^{j+1} - g^j`. Each `l^j` is split over the Whitney balls of level
//! `j`, normalized by one constant `gamma` and emitted as atoms. The finite
//! space stops the telescoping at `j_min`, so `g^{j_min}` is kept as a
//! residual.

use serde::{Deserialize, Serialize};

use crate::czd::{verify_cz, CZDecomposition, CzContext, CzFlavor, CzReport};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::maxfn::{grand_maximal, grand_maximal_upper, GrandMode};
use crate::space::{discrete_gradient, doubling_profile, Ball, MetricMeasureSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomKind {
    /// `||a||_t <= mu(B)^(-1/t')`, zero mean.
    H1,
    /// `||∇a||_t <= mu(B)^(-1/t')`, zero mean.
    HsMoment,
    /// `||∇a||_t <= mu(B)^(-1/t')`, `||a||_1 <= r(B)`.
    HsSize,
    /// `||a||_t + ||∇a||_t <= mu(B)^(-1/t')`, zero mean.
    HsNonhomog,
    /// `||∇a||_t <= mu(B)^(-1/t')`, `||a||_1 <= min(1, r(B))`.
    Ls,
}

impl AtomKind {
    pub fn has_moment(self) -> bool {
        matches!(self, AtomKind::H1 | AtomKind::HsMoment | AtomKind::HsNonhomog)
    }

    /// The CZ flavor driving the decomposition (`None` for `H1`).
    pub fn cz_flavor(self) -> Option<CzFlavor> {
        match self {
            AtomKind::H1 => None,
            AtomKind::HsMoment | AtomKind::HsSize => Some(CzFlavor::Homogeneous),
            AtomKind::HsNonhomog => Some(CzFlavor::Tilde),
            AtomKind::Ls => Some(CzFlavor::M11),
        }
    }
}

impl std::str::FromStr for AtomKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "h1" => Ok(AtomKind::H1),
            "hs_moment" => Ok(AtomKind::HsMoment),
            "hs_size" => Ok(AtomKind::HsSize),
            "hs_nonhomog" => Ok(AtomKind::HsNonhomog),
            "ls" => Ok(AtomKind::Ls),
            _ => Err(Error::Parse(format!("unknown atom flavor `{s}`"))),
        }
    }
}

/// Atom flavor with its integrability exponent `t in (1, inf]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomFlavor {
    pub kind: AtomKind,
    pub t: f64,
}

/// `mu^(1/t)`, with `t = inf` giving 1.
fn mass_pow(mass: f64, t: f64) -> f64 {
    if t.is_infinite() {
        1.0
    } else {
        mass.powf(1.0 / t)
    }
}

fn norm(space: &MetricMeasureSpace, v: &[f64], t: f64) -> f64 {
    space.lp_norm(v, t)
}

/// Ratios of an unnormalized function `l` against the flavor's bounds for
/// the ball `(mass, radius)`; each is at most 1 for an admissible atom.
/// Returns `(size-or-gradient ratio, l1 ratio)`.
fn ratios(space: &MetricMeasureSpace, l: &[f64], kind: AtomKind, t: f64, mass: f64, radius: f64) -> (f64, f64) {
    // ||a||_t <= mu^(-1/t')  <=>  ||a||_t mu^(1/t') <= 1  <=>  ||a||_t mu / mu^(1/t) <= 1.
    let scale = mass / mass_pow(mass, t);
    let grad = || norm(space, &discrete_gradient(space, l), t);
    let main = match kind {
        AtomKind::H1 => norm(space, l, t),
        AtomKind::HsMoment | AtomKind::HsSize | AtomKind::Ls => grad(),
        AtomKind::HsNonhomog => norm(space, l, t) + grad(),
    } * scale;
    let l1 = match kind {
        AtomKind::HsSize => space.lp_norm(l, 1.0) / radius,
        AtomKind::Ls => space.lp_norm(l, 1.0) / radius.min(1.0),
        _ => 0.0,
    };
    (main, l1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub passed: bool,
    /// First point of the support outside the ball.
    pub support_violation: Option<usize>,
    /// Size or gradient norm over its bound.
    pub norm_ratio: f64,
    /// `||a||_1` over its bound (size flavors), else 0.
    pub l1_ratio: f64,
    /// `|∫ a dμ|` (moment flavors), else 0.
    pub moment: f64,
    pub moment_ok: bool,
}

/// Checks support, norm bounds (1e-9 relative slack) and the moment or
/// `L1` condition of the flavor.
pub fn validate_atom(space: &MetricMeasureSpace, a: &[f64], ball: &Ball, flavor: AtomFlavor) -> Result<AtomReport> {
    space.check_field(a)?;
    if !(flavor.t > 1.0) {
        return Err(Error::InvalidParameter(format!("atom exponent t = {} must exceed 1", flavor.t)));
    }
    let support_violation = (0..space.len()).find(|&y| a[y] != 0.0 && !ball.contains(y));
    let (norm_ratio, l1_ratio) = ratios(space, a, flavor.kind, flavor.t, ball.mass, ball.radius);
    let sup = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (moment, moment_ok) = if flavor.kind.has_moment() {
        let m = space.integral(a).abs();
        (m, m <= 1e-9 * ball.mass * sup)
    } else {
        (0.0, true)
    };
    let tol = 1.0 + 1e-9;
    Ok(AtomReport {
        passed: support_violation.is_none() && norm_ratio <= tol && l1_ratio <= tol && moment_ok,
        support_violation,
        norm_ratio,
        l1_ratio,
        moment,
        moment_ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub level: i32,
    /// Index of the Whitney ball at this level.
    pub index: usize,
    pub values: ScalarField,
    /// Smallest tight ball at the Whitney center containing the support.
    pub ball: Ball,
    pub lambda: f64,
}

/// Per-level identities and measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub level: i32,
    /// `max |sum_k l_k^j - l^j|` relative to `max(||l^j||_inf, ||f||_inf)`.
    pub partition_error: f64,
    /// `max_l |sum_k c_{k,l}|` relative to `max(|c_{k,l}|, ||f||_inf)` (moment flavors).
    pub moment_sum_error: f64,
    /// `max_k ||l_k^j||_inf / 2^j`.
    pub sup_ratio: f64,
    /// `max_k r(B') / r_k^j`.
    pub enclosing_ratio: f64,
    /// Pieces discarded as cancellation noise (`||l_k^j||_inf <= 1e-12 ||f||_inf`).
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicDecomposition {
    pub flavor: AtomFlavor,
    pub q: f64,
    pub field: ScalarField,
    pub atoms: Vec<Atom>,
    /// `g^{j_min}`.
    pub residual: ScalarField,
    pub gamma: f64,
    /// `[j_min, j_max]`, or `None` for a constant field.
    pub j_range: Option<(i32, i32)>,
    pub levels: Vec<CZDecomposition>,
    pub checks: Vec<LevelCheck>,
    /// CZ measurements at `j_min` (residual smallness).
    pub residual_report: Option<CzReport>,
    pub l1_sum: f64,
    /// `||integrand||_1` of the level function.
    pub integrand_l1: f64,
}

/// `q* = s q / (s - q)`, or `inf` when `s <= q`.
pub fn sobolev_conjugate(s: f64, q: f64) -> f64 {
    if s > q {
        s * q / (s - q)
    } else {
        f64::INFINITY
    }
}

/// Dyadic atomic decomposition of `field` with atoms of the given kind at
/// exponent `q* = s q / (s - q)`.
pub fn atomic_decompose(
    space: &MetricMeasureSpace,
    field: &[f64],
    kind: AtomKind,
    q: f64,
) -> Result<AtomicDecomposition> {
    atomic_decompose_with(space, field, kind, q, GrandMode::Auto)
}

pub fn atomic_decompose_with(
    space: &MetricMeasureSpace,
    field: &[f64],
    kind: AtomKind,
    q: f64,
    grand_mode: GrandMode,
) -> Result<AtomicDecomposition> {
    let cz = kind
        .cz_flavor()
        .ok_or_else(|| Error::InvalidParameter("h1 atoms are validated, not constructed".into()))?;
    space.check_field(field)?;
    let profile = doubling_profile(space);
    profile.check_q(q)?;
    let t = sobolev_conjugate(profile.s, q);
    let flavor = AtomFlavor { kind, t };
    let f = ScalarField::new(field.to_vec());
    let empty = |f: ScalarField| AtomicDecomposition {
        flavor,
        q,
        residual: f.clone(),
        field: f,
        atoms: Vec::new(),
        gamma: 0.0,
        j_range: None,
        levels: Vec::new(),
        checks: Vec::new(),
        residual_report: None,
        l1_sum: 0.0,
        integrand_l1: 0.0,
    };
    if field.iter().all(|&v| v == field[0]) {
        return Ok(empty(f));
    }
    let ctx = CzContext::new(space, field, q, cz, grand_mode)?;
    let h = ctx.level();
    let (lo, hi) = (h.min(), h.max());
    if !(lo > 0.0) {
        return Err(Error::Invariant(format!("level function vanishes somewhere (min {lo})")));
    }
    let j_max = hi.log2().ceil() as i32;
    let j_min = lo.log2().ceil() as i32;
    let levels: Vec<CZDecomposition> = (j_min..=j_max)
        .map(|j| ctx.decompose(2f64.powi(j)))
        .collect::<Result<_>>()?;
    debug_assert!(levels.last().map_or(true, |d| d.b.is_empty()));

    // Pre-atoms with their Whitney center, level and index.
    let mut pre: Vec<(i32, usize, usize, Vec<f64>)> = Vec::new();
    let mut checks = Vec::new();
    let noise = 1e-12 * f.sup_norm();
    for (idx, j) in (j_min..j_max).enumerate() {
        let (cur, next) = (&levels[idx], &levels[idx + 1]);
        let (pieces, moment_sum_error) = split_level(space, cur, next, kind.has_moment(), f.sup_norm());
        let ell: Vec<f64> = next.g.iter().zip(cur.g.iter()).map(|(a, b)| a - b).collect();
        let scale = ell.iter().fold(f.sup_norm(), |m, v| m.max(v.abs()));
        let mut partition_error = 0.0f64;
        for y in 0..space.len() {
            let s: f64 = pieces.iter().map(|p| p[y]).sum();
            partition_error = partition_error.max((s - ell[y]).abs() / scale);
        }
        let two_j = 2f64.powi(j);
        let mut sup_ratio = 0.0f64;
        let mut enclosing_ratio = 0.0f64;
        let mut dropped = 0;
        for (k, piece) in pieces.into_iter().enumerate() {
            let sup = piece.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if sup <= noise {
                dropped += usize::from(sup > 0.0);
                continue;
            }
            sup_ratio = sup_ratio.max(sup / two_j);
            let center = cur.cover.centers[k];
            let ball = enclosing_ball(space, center, &piece);
            enclosing_ratio = enclosing_ratio.max(ball.radius / cur.cover.radii[k]);
            pre.push((j, k, center, piece));
        }
        checks.push(LevelCheck {
            level: j,
            partition_error,
            moment_sum_error,
            sup_ratio,
            enclosing_ratio,
            dropped,
        });
    }

    let mut gamma = 0.0f64;
    let mut balls = Vec::with_capacity(pre.len());
    for (j, _, center, piece) in &pre {
        let ball = enclosing_ball(space, *center, piece);
        let two_j = 2f64.powi(*j);
        let (main, l1) = ratios(space, piece, kind, t, ball.mass, ball.radius);
        // a = l / (gamma 2^j mu(B')) scales both ratios by 1/(gamma 2^j mu(B')).
        let denom = two_j * ball.mass;
        gamma = gamma.max(main / denom).max(l1 / denom);
        balls.push(ball);
    }
    let atoms: Vec<Atom> = pre
        .into_iter()
        .zip(balls)
        .map(|((j, k, _, piece), ball)| {
            let lambda = gamma * 2f64.powi(j) * ball.mass;
            Atom {
                level: j,
                index: k,
                values: ScalarField::new(piece.iter().map(|v| v / lambda).collect()),
                ball,
                lambda,
            }
        })
        .collect();
    let l1_sum = atoms.iter().map(|a| a.lambda.abs()).sum();
    let residual_report = Some(verify_cz(space, &levels[0]));
    Ok(AtomicDecomposition {
        flavor,
        q,
        field: f,
        residual: levels[0].g.clone(),
        atoms,
        gamma,
        j_range: Some((j_min, j_max)),
        checks,
        residual_report,
        l1_sum,
        integrand_l1: space.lp_norm(ctx.integrand(), 1.0),
        levels,
    })
}

/// Splits `l^j = g^{j+1} - g^j = sum_k b_k^j - sum_l b_l^{j+1}` over the
/// level-`j` balls. With moments:
///   `l_k = b_k - sum_l b_l chi_k + sum_l c_{k,l} chi_l`,
///   `c_{k,l} = ∫ b_l chi_k / ∫ chi_l`,
/// so each piece has zero mean; otherwise `l_k = l^j chi_k`.
/// Also returns `max_l |sum_k c_{k,l}|` relative to the largest `|c_{k,l}|`.
fn split_level(
    space: &MetricMeasureSpace,
    cur: &CZDecomposition,
    next: &CZDecomposition,
    moment: bool,
    f_sup: f64,
) -> (Vec<Vec<f64>>, f64) {
    let n = space.len();
    let chi_k = &cur.pu.chi;
    if !moment {
        let ell: Vec<f64> = next.g.iter().zip(cur.g.iter()).map(|(a, b)| a - b).collect();
        let pieces = chi_k.iter().map(|c| (0..n).map(|y| ell[y] * c[y]).collect()).collect();
        return (pieces, 0.0);
    }
    let chi_l = &next.pu.chi;
    let mass_l: Vec<f64> = chi_l.iter().map(|c| space.integral(c)).collect();
    let mut coeff = vec![vec![0.0; chi_l.len()]; chi_k.len()];
    for (k, ck) in chi_k.iter().enumerate() {
        for (l, bl) in next.b.iter().enumerate() {
            let s: f64 = (0..n).map(|y| bl[y] * ck[y] * space.mu(y)).sum();
            coeff[k][l] = s / mass_l[l];
        }
    }
    // `b_l = (f - c_l) chi_l` carries roundoff on the scale of `f` itself.
    let biggest = coeff.iter().flatten().fold(f_sup, |m, v| m.max(v.abs()));
    let moment_sum_error = (0..chi_l.len())
        .map(|l| (0..chi_k.len()).map(|k| coeff[k][l]).sum::<f64>().abs() / biggest)
        .fold(0.0, f64::max);
    let pieces = (0..chi_k.len())
        .map(|k| {
            (0..n)
                .map(|y| {
                    let mut v = cur.b[k][y];
                    for (l, bl) in next.b.iter().enumerate() {
                        v += coeff[k][l] * chi_l[l][y] - bl[y] * chi_k[k][y];
                    }
                    v
                })
                .collect()
        })
        .collect();
    (pieces, moment_sum_error)
}

/// Smallest tight ball at `center` containing the support of `values`.
fn enclosing_ball(space: &MetricMeasureSpace, center: usize, values: &[f64]) -> Ball {
    let reach = (0..space.len())
        .filter(|&y| values[y] != 0.0)
        .map(|y| space.d(center, y))
        .fold(0.0, f64::max);
    let nearest = space
        .distance_row(center)
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let radius = if reach > 0.0 || !nearest.is_finite() { reach } else { nearest };
    space.ball(center, radius)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionError {
    pub sup: f64,
    pub l1: f64,
    /// `||∇(f - reconstruction)||_1`.
    pub grad_l1: f64,
}

/// `residual + sum lambda a`, with its distance to the original field.
pub fn reconstruct(space: &MetricMeasureSpace, dec: &AtomicDecomposition) -> (ScalarField, ReconstructionError) {
    let mut out = dec.residual.clone();
    for atom in &dec.atoms {
        for (o, v) in out.iter_mut().zip(atom.values.iter()) {
            *o += atom.lambda * v;
        }
    }
    let diff = dec.field.sub(&out);
    let err = ReconstructionError {
        sup: diff.sup_norm(),
        l1: space.lp_norm(&diff, 1.0),
        grad_l1: space.lp_norm(&discrete_gradient(space, &diff), 1.0),
    };
    (out, err)
}

/// `||a⁺||_1`, exact or a certified upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomPlusNorm {
    pub value: f64,
    pub exact: bool,
}

/// `||a⁺||_1` for an H¹ atom. `mode` resolves as for the grand maximal
/// function, except that the tent side becomes the upper bound of
/// [`grand_maximal_upper`]: a lower bound cannot certify the inclusion, so an
/// explicit `Tent` is refused.
pub fn h1_atom_grand_maximal_check(
    space: &MetricMeasureSpace,
    a: &[f64],
    ball: &Ball,
    t: f64,
    mode: GrandMode,
) -> Result<AtomPlusNorm> {
    let report = validate_atom(space, a, ball, AtomFlavor { kind: AtomKind::H1, t })?;
    if !report.passed {
        return Err(Error::InvalidParameter(format!(
            "not an H1 ({t})-atom for the given ball: {report:?}"
        )));
    }
    let exact = match mode.resolve(space.len()) {
        GrandMode::ExactLp => true,
        GrandMode::Tent if mode == GrandMode::Auto => false,
        _ => return Err(Error::InvalidParameter("tent values only bound a⁺ from below".into())),
    };
    let plus = if exact { grand_maximal(space, a, GrandMode::ExactLp)? } else { grand_maximal_upper(space, a)? };
    Ok(AtomPlusNorm { value: space.lp_norm(&plus, 1.0), exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, SpaceSpec};

    fn p4() -> MetricMeasureSpace {
        build_space(&SpaceSpec::Path { n: 4, spacing: 1.0 }).unwrap()
    }

    const LIN: [f64; 4] = [0.0, 1.0, 2.0, 3.0];

    #[test]
    fn constant_field_gives_empty_decomposition() {
        let s = p4();
        let q = doubling_profile(&s).default_q();
        let dec = atomic_decompose(&s, &[2.0; 4], AtomKind::HsMoment, q).unwrap();
        assert!(dec.atoms.is_empty());
        assert_eq!(dec.l1_sum, 0.0);
        let (rec, err) = reconstruct(&s, &dec);
        assert_eq!(rec.values(), &[2.0; 4]);
        assert_eq!(err.sup, 0.0);
    }

    #[test]
    fn two_point_atom_on_p4() {
        let s = p4();
        let ball = s.ball(1, 1.0);
        // a = c (1_{1} - 1_{2}): |∇a| = [c, 2c, 2c, c], ||∇a||_2 = c sqrt(10).
        // Bound mu(B)^(-1/2) = 3^(-1/2) gives c = 1/sqrt(30).
        let c = 1.0 / 30f64.sqrt();
        let a = [0.0, c, -c, 0.0];
        let flavor = AtomFlavor { kind: AtomKind::HsMoment, t: 2.0 };
        let rep = validate_atom(&s, &a, &ball, flavor).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!((rep.norm_ratio - 1.0).abs() < 1e-12);
        let too_big = [0.0, 1.01 * c, -1.01 * c, 0.0];
        assert!(!validate_atom(&s, &too_big, &ball, flavor).unwrap().passed);
    }

    #[test]
    fn zero_field_passes_every_flavor() {
        let s = p4();
        let ball = s.ball(0, 1.0);
        for kind in [AtomKind::H1, AtomKind::HsMoment, AtomKind::HsSize, AtomKind::HsNonhomog, AtomKind::Ls] {
            assert!(validate_atom(&s, &[0.0; 4], &ball, AtomFlavor { kind, t: 2.0 }).unwrap().passed);
        }
    }

    #[test]
    fn support_violation_is_named() {
        let s = p4();
        let ball = s.ball(0, 1.0);
        let rep = validate_atom(&s, &[0.0, 0.01, 0.0, -0.01], &ball, AtomFlavor { kind: AtomKind::H1, t: 2.0 }).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.support_violation, Some(3));
    }

    #[test]
    fn p4_moment_decomposition_identities() {
        let s = p4();
        let q = doubling_profile(&s).default_q();
        let dec = atomic_decompose(&s, &LIN, AtomKind::HsMoment, q).unwrap();
        for atom in &dec.atoms {
            let sup = atom.values.sup_norm();
            assert!(s.integral(&atom.values).abs() <= 1e-9 * atom.ball.mass * sup);
            assert!(validate_atom(&s, &atom.values, &atom.ball, dec.flavor).unwrap().passed);
        }
        for c in &dec.checks {
            assert!(c.partition_error <= 1e-12);
        }
        let (_, err) = reconstruct(&s, &dec);
        assert!(err.sup <= 1e-12 && err.l1 <= 1e-12 && err.grad_l1 <= 1e-12);
    }

    #[test]
    fn dropping_an_atom_costs_its_norm() {
        let s = build_space(&SpaceSpec::Path { n: 16, spacing: 1.0 }).unwrap();
        let f = spike(16);
        let q = doubling_profile(&s).default_q();
        let mut dec = atomic_decompose(&s, &f, AtomKind::HsSize, q).unwrap();
        assert!(!dec.atoms.is_empty());
        let dropped = dec.atoms.remove(0);
        let (_, err) = reconstruct(&s, &dec);
        let expect = dropped.values.scaled(dropped.lambda.abs());
        assert!((err.sup - expect.sup_norm()).abs() < 1e-12);
        assert!((err.l1 - s.lp_norm(&expect, 1.0)).abs() < 1e-12);
    }

    fn spike(n: usize) -> Vec<f64> {
        (0..n).map(|i| if i == n / 2 { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn doubling_the_field_shifts_levels() {
        let s = build_space(&SpaceSpec::Path { n: 16, spacing: 1.0 }).unwrap();
        let q = doubling_profile(&s).default_q();
        let f = spike(16);
        let a = atomic_decompose(&s, &f, AtomKind::HsMoment, q).unwrap();
        let f2: Vec<f64> = f.iter().map(|v| 2.0 * v).collect();
        let b = atomic_decompose(&s, &f2, AtomKind::HsMoment, q).unwrap();
        let (lo, hi) = a.j_range.unwrap();
        assert_eq!(b.j_range, Some((lo + 1, hi + 1)));
        assert!(!a.atoms.is_empty());
        assert_eq!(a.atoms.len(), b.atoms.len());
        for (x, y) in a.atoms.iter().zip(&b.atoms) {
            assert_eq!(x.level + 1, y.level);
            assert!((y.lambda - 2.0 * x.lambda).abs() <= 1e-12 * x.lambda);
            assert!(x.values.iter().zip(y.values.iter()).all(|(u, v)| (u - v).abs() <= 1e-12));
        }
    }

    #[test]
    fn h1_check_scales_linearly() {
        let s = p4();
        let ball = s.ball(1, 1.0);
        let a = [0.0, 0.25, -0.25, 0.0];
        let full = h1_atom_grand_maximal_check(&s, &a, &ball, 2.0, GrandMode::Auto).unwrap().value;
        let half = h1_atom_grand_maximal_check(&s, &[0.0, 0.125, -0.125, 0.0], &ball, 2.0, GrandMode::Auto).unwrap().value;
        assert!(full > 0.0);
        assert!((full - 2.0 * half).abs() < 1e-9 * full);
        assert_eq!(h1_atom_grand_maximal_check(&s, &[0.0; 4], &ball, 2.0, GrandMode::Auto).unwrap().value, 0.0);
    }
}
