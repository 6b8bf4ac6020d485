//! Maximal operators over the tight-ball family.
//!
//! Every supremum here runs over `space.ball_family()`. Balls centered at `c`
//! are nested, so a quantity that depends only on the ball is distributed to
//! its members with one suffix maximum per center.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lp::{self, graph_distances, TestPolytope};
use crate::polytope;
use crate::space::{discrete_gradient, members_average, BallView, MetricMeasureSpace};

/// Evaluates `value(ball index)` on every tight ball and returns, per point,
/// the maximum over the balls containing it (0 if none).
pub(crate) fn sup_over_balls<F>(space: &MetricMeasureSpace, value: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    let values: Vec<f64> = (0..space.ball_family().len())
        .into_par_iter()
        .map(&value)
        .collect();
    distribute(space, &values)
}

/// Per-point maximum of per-ball values over the balls containing the point.
pub(crate) fn distribute(space: &MetricMeasureSpace, values: &[f64]) -> Vec<f64> {
    let family = space.ball_family();
    let mut out = vec![0.0f64; space.len()];
    for c in 0..space.len() {
        let range = family.centered_at(c);
        if range.is_empty() {
            continue;
        }
        let row = family.sorted_from(c);
        // Walk radii downward; positions below the current ball's length see
        // the running maximum of this and all larger balls.
        let mut best = 0.0f64;
        for i in range.rev() {
            let ball = family.get(i);
            best = best.max(values[i]);
            let len = ball.members.len();
            let lower = match i.checked_sub(1) {
                Some(j) if family.get(j).center == c => family.get(j).members.len(),
                _ => 0,
            };
            for &y in &row[lower..len] {
                out[y] = out[y].max(best);
            }
        }
    }
    out
}

fn checked(space: &MetricMeasureSpace, field: &[f64]) -> Result<()> {
    space.check_field(field)
}

/// Non-centered Hardy–Littlewood maximal function `max_{B ∋ x} avg_B |f|`.
pub fn hl_maximal(space: &MetricMeasureSpace, field: &[f64]) -> Result<ScalarField> {
    checked(space, field)?;
    let abs: Vec<f64> = field.iter().map(|v| v.abs()).collect();
    Ok(hl_maximal_nonneg(space, &abs))
}

fn hl_maximal_nonneg(space: &MetricMeasureSpace, abs: &[f64]) -> ScalarField {
    let family = space.ball_family();
    let mut values = vec![0.0; family.len()];
    for c in 0..space.len() {
        let row = family.sorted_from(c);
        let mut acc = 0.0;
        let mut k = 0;
        for i in family.centered_at(c) {
            let b = family.get(i);
            while k < b.members.len() {
                acc += abs[row[k]] * space.mu(row[k]);
                k += 1;
            }
            values[i] = acc / b.mass;
        }
    }
    ScalarField::new(distribute(space, &values))
}

/// `M_r f = (M |f|^r)^(1/r)` for `0 < r <= 1`.
pub fn hl_maximal_q(space: &MetricMeasureSpace, field: &[f64], r: f64) -> Result<ScalarField> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter(format!("maximal exponent r = {r} must lie in (0, 1]")));
    }
    checked(space, field)?;
    let pow: Vec<f64> = field.iter().map(|v| v.abs().powf(r)).collect();
    Ok(hl_maximal_nonneg(space, &pow).map(|v| v.powf(1.0 / r)))
}

/// Sobolev sharp maximal function `Nf(x) = max_{B ∋ x} r(B)^-1 avg_B |f - f_B|`.
pub fn sobolev_sharp(space: &MetricMeasureSpace, field: &[f64]) -> Result<ScalarField> {
    checked(space, field)?;
    let family = space.ball_family();
    Ok(ScalarField::new(sup_over_balls(space, |i| {
        let b = family.get(i);
        let mean = members_average(space, field, b.members, b.mass);
        let osc: f64 = b
            .members
            .iter()
            .map(|&y| (field[y] - mean).abs() * space.mu(y))
            .sum();
        osc / (b.mass * b.radius)
    })))
}

/// Calderón maximal function `f★(x) = max_{B ∋ x} r(B)^-1 avg_B |f - f(x)|`.
pub fn calderon_star(space: &MetricMeasureSpace, field: &[f64]) -> Result<ScalarField> {
    checked(space, field)?;
    let family = space.ball_family();
    let n = space.len();
    let per_center: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let mut best: Vec<(usize, f64)> = Vec::new();
            let mut local = vec![0.0f64; n];
            for i in family.centered_at(c) {
                let b = family.get(i);
                // Sorted values with weighted prefix sums give
                // sum_y |f(y) - t| mu(y) in O(log m) per member.
                let mut vals: Vec<(f64, f64)> =
                    b.members.iter().map(|&y| (field[y], space.mu(y))).collect();
                vals.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut pm = Vec::with_capacity(vals.len() + 1);
                let mut pfm = Vec::with_capacity(vals.len() + 1);
                pm.push(0.0);
                pfm.push(0.0);
                for &(v, w) in &vals {
                    pm.push(pm.last().unwrap() + w);
                    pfm.push(pfm.last().unwrap() + v * w);
                }
                let (tm, tfm) = (pm[vals.len()], pfm[vals.len()]);
                for &x in b.members {
                    let t = field[x];
                    let k = vals.partition_point(|p| p.0 < t);
                    let below = t * pm[k] - pfm[k];
                    let above = (tfm - pfm[k]) - t * (tm - pm[k]);
                    let v = (below + above).max(0.0) / (b.mass * b.radius);
                    if v > local[x] {
                        local[x] = v;
                    }
                }
            }
            for (x, &v) in local.iter().enumerate() {
                if v > 0.0 {
                    best.push((x, v));
                }
            }
            best
        })
        .collect();
    let mut out = vec![0.0f64; n];
    for list in per_center {
        for (x, v) in list {
            out[x] = out[x].max(v);
        }
    }
    Ok(ScalarField::new(out))
}

/// How the grand maximal function evaluates the supremum over test functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrandMode {
    /// Normalized tent per ball: a lower bound.
    Tent,
    /// Exact linear program over the discrete test class.
    ExactLp,
    /// `ExactLp` for `n <= 128`, `Tent` above.
    Auto,
}

impl GrandMode {
    pub fn resolve(self, n: usize) -> GrandMode {
        match self {
            GrandMode::Auto if n <= 128 => GrandMode::ExactLp,
            GrandMode::Auto => GrandMode::Tent,
            m => m,
        }
    }
}

fn tent_values(space: &MetricMeasureSpace, field: &[f64]) -> Vec<f64> {
    let family = space.ball_family();
    (0..family.len())
        .into_par_iter()
        .map(|i| {
            let b = family.get(i);
            let s: f64 = b
                .members
                .iter()
                .map(|&y| field[y] * space.mu(y) * (1.0 - space.d(b.center, y) / b.radius).max(0.0))
                .sum();
            s.abs() / b.mass
        })
        .collect()
}

/// Grand maximal function `f⁺(x) = max_{B ∋ x} max_{psi in T¹(B)} |∫ f psi dμ|`.
pub fn grand_maximal(space: &MetricMeasureSpace, field: &[f64], mode: GrandMode) -> Result<ScalarField> {
    checked(space, field)?;
    let tent = tent_values(space, field);
    match mode.resolve(space.len()) {
        GrandMode::Tent => Ok(ScalarField::new(distribute(space, &tent))),
        _ => grand_maximal_lp(space, field, &tent, true).map(ScalarField::new),
    }
}

/// Pointwise upper bound for `f⁺`: the ball bounds used to prune the exact
/// evaluation, maximized over balls. Never below the exact value, and cheap
/// when the exact programs are not.
pub fn grand_maximal_upper(space: &MetricMeasureSpace, field: &[f64]) -> Result<ScalarField> {
    checked(space, field)?;
    let tent = tent_values(space, field);
    grand_maximal_lp(space, field, &tent, false).map(ScalarField::new)
}

/// Exact evaluation. Balls are visited in decreasing order of an upper bound
/// and skipped once no member can improve; the tent values seed the lower
/// bounds. Bounds used, with `phi = mu(B) psi`:
///   `|∫ f psi| <= avg_B |f|`, and, since `psi` is `1/(r mu(B))`-Lipschitz
///   for the graph distance `SP` and bounded by `1/mu(B)`,
///   `|∫ f psi| <= (min_z sum_y |f(y)| SP(y, z) mu(y) / r + |∫ f|) / mu(B)`.
///
/// With `exact` false the programs are skipped and each ball contributes its
/// tightest bound instead.
fn grand_maximal_lp(space: &MetricMeasureSpace, field: &[f64], tent: &[f64], exact: bool) -> Result<Vec<f64>> {
    let family = space.ball_family();
    let n = space.len();
    let support: Vec<usize> = (0..n).filter(|&y| field[y] != 0.0).collect();
    if support.is_empty() {
        return Ok(vec![0.0; n]);
    }
    let total: f64 = space.integral(field).abs();
    let sp = if support.len() < n { Some(graph_distances(space)) } else { None };
    let moment = if let Some(sp) = &sp {
        (0..n)
            .map(|z| {
                support
                    .iter()
                    .map(|&y| field[y].abs() * sp[y][z] * space.mu(y))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };
    let mut upper: Vec<(f64, usize)> = (0..family.len())
        .map(|i| {
            let b = family.get(i);
            let l1: f64 = b.members.iter().map(|&y| field[y].abs() * space.mu(y)).sum();
            let ub = l1.min(moment / b.radius + total) / b.mass;
            (ub.max(tent[i]), i)
        })
        .collect();
    upper.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut out = distribute(space, tent);
    for &(ub, i) in &upper {
        let b = family.get(i);
        let floor = b.members.iter().map(|&y| out[y]).fold(f64::INFINITY, f64::min);
        if ub <= floor {
            continue;
        }
        let capped = match &sp {
            Some(sp) => capped_bound(space, field, &support, sp, &b, total),
            None => f64::INFINITY,
        };
        if capped <= floor {
            continue;
        }
        if !exact {
            let v = ub.min(capped).max(tent[i]);
            for &y in b.members {
                out[y] = out[y].max(v);
            }
            continue;
        }
        let poly = TestPolytope::new(space, &b);
        let coef: Vec<f64> = b.members.iter().map(|&y| field[y] * space.mu(y)).collect();
        let slots: Vec<usize> = (0..coef.len()).filter(|&k| coef[k] != 0.0).collect();
        if slots.is_empty() {
            continue;
        }
        let m = slots.len();
        let value = if m < poly.len() && m * (m - 1) / 2 <= poly.edges.len().max(poly.len()) {
            poly.maximize_on_support(sp.as_ref().expect("partial support"), &coef, &slots)?
        } else {
            poly.maximize(&coef)?.0
        };
        let v = (value / b.mass).max(tent[i]);
        for &y in b.members {
            if v > out[y] {
                out[y] = v;
            }
        }
    }
    Ok(out)
}

/// Per-ball refinement of the moment bound: against `phi(z)` for a support
/// point `z`, `|phi(y) - phi(z)|` is at most `min(2, SP/r)` inside the ball
/// and `min(1, SP/r)` outside, where `phi` vanishes.
fn capped_bound(
    space: &MetricMeasureSpace,
    field: &[f64],
    support: &[usize],
    sp: &[Vec<f64>],
    b: &BallView<'_>,
    total: f64,
) -> f64 {
    let inside: Vec<bool> = {
        let mut v = vec![false; space.len()];
        b.members.iter().for_each(|&y| v[y] = true);
        v
    };
    let best = support
        .iter()
        .map(|&z| {
            support
                .iter()
                .map(|&y| {
                    let cap = if inside[y] { 2.0 } else { 1.0 };
                    field[y].abs() * space.mu(y) * (sp[y][z] / b.radius).min(cap)
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    (best + total) / b.mass
}

/// Cover used by the discrete convolution at one scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionCover {
    pub radius: f64,
    /// Greedy `r`-separated centers in ascending id order.
    pub centers: Vec<usize>,
    /// `max_x #{j : x in 6B_j}`.
    pub overlap: usize,
}

/// `u_r(x) = sum_j phi_j(x) avg_{3B_j} u` with `phi_j` the normalized tents
/// `max(0, 1 - d(·, x_j)/(6r))`; supp `phi_j` ⊆ 6B_j and `phi_j >= 1/(2K)` on 3B_j.
pub fn discrete_convolution(
    space: &MetricMeasureSpace,
    field: &[f64],
    r: f64,
) -> Result<(ScalarField, ConvolutionCover)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("convolution radius {r} must be positive")));
    }
    checked(space, field)?;
    let n = space.len();
    let mut centers: Vec<usize> = Vec::new();
    for x in 0..n {
        if centers.iter().all(|&c| space.d(x, c) > r) {
            centers.push(x);
        }
    }
    let averages: Vec<f64> = centers
        .iter()
        .map(|&c| {
            let (mut s, mut m) = (0.0, 0.0);
            for y in 0..n {
                if space.d(c, y) <= 3.0 * r {
                    s += field[y] * space.mu(y);
                    m += space.mu(y);
                }
            }
            s / m
        })
        .collect();
    let mut overlap = 0;
    let values = (0..n)
        .map(|x| {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut count = 0;
            for (j, &c) in centers.iter().enumerate() {
                let d = space.d(x, c);
                if d <= 6.0 * r {
                    count += 1;
                }
                let psi = (1.0 - d / (6.0 * r)).max(0.0);
                num += psi * averages[j];
                den += psi;
            }
            overlap = overlap.max(count);
            num / den
        })
        .collect();
    Ok((
        ScalarField::new(values),
        ConvolutionCover {
            radius: r,
            centers,
            overlap,
        },
    ))
}

/// `M★(∇f)(x) = max_j |∇ u_{r_j}|(x)`.
pub fn grad_maximal_star(space: &MetricMeasureSpace, field: &[f64], radii: &[f64]) -> Result<ScalarField> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter("radius list is empty".into()));
    }
    let mut out = vec![0.0f64; space.len()];
    for &r in radii {
        let (u, _) = discrete_convolution(space, field, r)?;
        for (o, g) in out.iter_mut().zip(discrete_gradient(space, &u).iter()) {
            *o = o.max(*g);
        }
    }
    Ok(ScalarField::new(out))
}

/// Result of the `(∇f)⁺` computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradPlus {
    pub values: ScalarField,
    /// Every ball's alternation reached a stationary value within the round cap.
    pub converged: bool,
    /// Vertex-enumeration values (small spaces only).
    pub oracle: Option<ScalarField>,
    /// `converged`, and the oracle (when run) agrees to 1e-6.
    pub certified: bool,
}

const GRAD_PLUS_ROUNDS: usize = 50;
/// Below this relative gain a round counts as stationary (minilp works to ~1e-8).
const GRAD_PLUS_RTOL: f64 = 1e-8;
const ORACLE_MAX_POINTS: usize = 8;

/// Edge data shared by the `(∇f)⁺` programs. Edges are oriented `a -> b` with `a < b`.
struct EdgeCalculus {
    grad: Vec<f64>,
    inv_len: Vec<f64>,
}

impl EdgeCalculus {
    fn new(space: &MetricMeasureSpace, field: &[f64]) -> Self {
        let (grad, inv_len) = space
            .edges()
            .iter()
            .map(|&(a, b)| {
                let d = space.d(a, b);
                ((field[b] - field[a]) / d, 1.0 / d)
            })
            .unzip();
        EdgeCalculus { grad, inv_len }
    }
}

/// `div Phi(x) = mu(x)^-1 (sum_{e = (x, ·)} Phi_e / d_e - sum_{e = (·, x)} Phi_e / d_e)`,
/// the negative adjoint of the edge difference quotient.
pub fn divergence(space: &MetricMeasureSpace, flux: &[f64]) -> Vec<f64> {
    let mut div = vec![0.0; space.len()];
    for (k, &(a, b)) in space.edges().iter().enumerate() {
        let q = flux[k] / space.d(a, b);
        div[a] += q;
        div[b] -= q;
    }
    for (x, v) in div.iter_mut().enumerate() {
        *v /= space.mu(x);
    }
    div
}

/// Maximizes `sum_e w_e Phi_e` over `|Phi| <= 1`, `|div Phi| <= 1/r`.
fn flux_step(space: &MetricMeasureSpace, ec: &EdgeCalculus, w: &[f64], r: f64, ball: usize) -> Result<(f64, Vec<f64>)> {
    let n = space.len();
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<Variable> = w.iter().map(|&c| p.add_var(c, (-1.0, 1.0))).collect();
    let mut rows: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); n];
    for (k, &(a, b)) in space.edges().iter().enumerate() {
        rows[a].push((vars[k], ec.inv_len[k]));
        rows[b].push((vars[k], -ec.inv_len[k]));
    }
    for (x, mut row) in rows.into_iter().enumerate() {
        let s = p.add_var(0.0, (-1.0 / r, 1.0 / r));
        row.push((s, -space.mu(x)));
        p.add_constraint(lp::expr(row), ComparisonOp::Eq, 0.0);
    }
    let sol = lp::solve(&p, ball)?;
    Ok((sol.objective(), vars.iter().map(|&v| sol[v]).collect()))
}

/// Per-member coefficients of `phi` in the bilinear form for a fixed flux.
fn phi_coefficients(space: &MetricMeasureSpace, ec: &EdgeCalculus, poly: &TestPolytope, flux: &[f64]) -> Vec<f64> {
    let mut coef = vec![0.0; poly.len()];
    for (k, &(a, b)) in space.edges().iter().enumerate() {
        let c = 0.5 * ec.grad[k] * flux[k];
        if poly.slot[a] != usize::MAX {
            coef[poly.slot[a]] += c;
        }
        if poly.slot[b] != usize::MAX {
            coef[poly.slot[b]] += c;
        }
    }
    coef
}

fn edge_weights(space: &MetricMeasureSpace, ec: &EdgeCalculus, poly: &TestPolytope, phi: &[f64]) -> Vec<f64> {
    space
        .edges()
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let pa = poly.slot.get(a).filter(|&&s| s != usize::MAX).map_or(0.0, |&s| phi[s]);
            let pb = poly.slot.get(b).filter(|&&s| s != usize::MAX).map_or(0.0, |&s| phi[s]);
            ec.grad[k] * 0.5 * (pa + pb)
        })
        .collect()
}

/// Alternating maximization of the bilinear form for one ball. Each start
/// gets one round; the best is then iterated until the value stops rising by
/// more than the solver's relative precision. Returns the value (already
/// divided by `mu(B)`) and whether that happened within the round cap.
fn alternate(space: &MetricMeasureSpace, ec: &EdgeCalculus, poly: &TestPolytope, mass: f64) -> Result<(f64, bool)> {
    let round = |phi: &[f64]| -> Result<(f64, Vec<f64>)> {
        let w = edge_weights(space, ec, poly, phi);
        let (_, flux) = flux_step(space, ec, &w, poly.radius, poly.index)?;
        poly.maximize(&phi_coefficients(space, ec, poly, &flux))
    };
    let flat = poly.maximize(&vec![1.0; poly.len()])?.1;
    let sign_flux: Vec<f64> = ec.grad.iter().map(|g| g.signum()).collect();
    let from_sign = poly.maximize(&phi_coefficients(space, ec, poly, &sign_flux))?.1;
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(3);
    for phi0 in [poly.tent(space), flat, from_sign] {
        if !starts.contains(&phi0) {
            starts.push(phi0);
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for phi0 in &starts {
        let (v, phi) = round(phi0)?;
        if best.as_ref().map_or(true, |b| v > b.0) {
            best = Some((v, phi));
        }
    }
    let (mut value, mut phi) = best.expect("at least one start");
    let mut stationary = false;
    for _ in 1..GRAD_PLUS_ROUNDS {
        let (v, next) = round(&phi)?;
        if v <= value + GRAD_PLUS_RTOL * value.abs() {
            value = value.max(v);
            stationary = true;
            break;
        }
        value = v;
        phi = next;
    }
    Ok((value / mass, stationary))
}

/// `(∇f)⁺(x)`: for each ball containing `x`, the maximum of
/// `|sum_e ∇f(e) psi~(e) Phi(e)|` over test functions `psi` of the ball and
/// edge fields with `|Phi| <= 1`, `|div Phi| <= 1/r(B)`.
///
/// The bilinear program is solved by alternating linear programs from three
/// starts. On spaces with at most 8 points the exact value is also computed
/// by enumerating the vertices of both polytopes.
pub fn grad_plus(space: &MetricMeasureSpace, field: &[f64]) -> Result<GradPlus> {
    checked(space, field)?;
    let family = space.ball_family();
    let ec = EdgeCalculus::new(space, field);
    let n = space.len();
    if ec.grad.iter().all(|&g| g == 0.0) {
        return Ok(GradPlus {
            values: ScalarField::zeros(n),
            converged: true,
            oracle: (n <= ORACLE_MAX_POINTS).then(|| ScalarField::zeros(n)),
            certified: true,
        });
    }
    // Upper bounds per ball, with cap(y) = min(1, SP(y, outside)/r) >= |phi(y)|:
    //   direct: sum_e |∇f| (cap_a + cap_b)/2, using |Phi| <= 1;
    //   by parts: for any constant c,
    //     sum_e ∇f phi~ Phi = -sum_x (f - c) phi div(Phi) mu - sum_e ∇phi (f~ - c) Phi,
    //   so the value is at most sum |f - c| cap mu / r + sum_e |∇phi|max |f~ - c|.
    let sp = graph_distances(space);
    let mut upper: Vec<(f64, usize)> = (0..family.len())
        .map(|i| {
            let b = family.get(i);
            let r = b.radius;
            let mut inside = vec![false; n];
            for &y in b.members {
                inside[y] = true;
            }
            let cap: Vec<f64> = (0..n)
                .map(|y| {
                    if !inside[y] {
                        return 0.0;
                    }
                    let out = (0..n).filter(|&z| !inside[z]).map(|z| sp[y][z]).fold(f64::INFINITY, f64::min);
                    (out / r).min(1.0)
                })
                .collect();
            let c = weighted_median(b.members.iter().map(|&y| (field[y], space.mu(y))));
            let mut direct = 0.0;
            let mut parts: f64 = b.members.iter().map(|&y| (field[y] - c).abs() * cap[y] * space.mu(y)).sum::<f64>() / r;
            for (k, &(a, z)) in space.edges().iter().enumerate() {
                let both = cap[a] + cap[z];
                if both == 0.0 {
                    continue;
                }
                direct += ec.grad[k].abs() * 0.5 * both;
                let dphi = (1.0 / r).min(both * ec.inv_len[k]);
                parts += dphi * (0.5 * (field[a] + field[z]) - c).abs();
            }
            (direct.min(parts) / b.mass, i)
        })
        .collect();
    upper.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut out = vec![0.0f64; n];
    let mut converged = true;
    for &(ub, i) in &upper {
        let b = family.get(i);
        let floor = b.members.iter().map(|&y| out[y]).fold(f64::INFINITY, f64::min);
        if ub <= floor {
            continue;
        }
        let poly = TestPolytope::new(space, &b);
        let (v, ok) = alternate(space, &ec, &poly, b.mass)?;
        converged &= ok;
        for &y in b.members {
            out[y] = out[y].max(v);
        }
    }
    let oracle = if n <= ORACLE_MAX_POINTS {
        Some(grad_plus_oracle(space, &ec)?)
    } else {
        None
    };
    let agrees = oracle
        .as_ref()
        .map_or(true, |o| o.iter().zip(&out).all(|(a, b)| (a - b).abs() <= 1e-6 * a.abs().max(1.0)));
    Ok(GradPlus {
        values: ScalarField::new(out),
        converged,
        certified: converged && agrees,
        oracle,
    })
}

fn weighted_median(items: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut v: Vec<(f64, f64)> = items.collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * v.iter().map(|p| p.1).sum::<f64>();
    let mut acc = 0.0;
    for &(x, w) in &v {
        acc += w;
        if acc >= half {
            return x;
        }
    }
    v.last().map_or(0.0, |p| p.0)
}

/// Exact `(∇f)⁺` by pairing every vertex of the test polytope with every
/// vertex of the flux polytope.
fn grad_plus_oracle(space: &MetricMeasureSpace, ec: &EdgeCalculus) -> Result<ScalarField> {
    let family = space.ball_family();
    let n = space.len();
    let m = space.edges().len();
    let mut values = vec![0.0; family.len()];
    for (i, value) in values.iter_mut().enumerate() {
        let b = family.get(i);
        let poly = TestPolytope::new(space, &b);
        let k = poly.len();
        // Test polytope: |phi_k| <= bound_k, |phi_a - phi_b| <= w.
        let mut a_rows = Vec::new();
        let mut rhs = Vec::new();
        for s in 0..k {
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; k];
                row[s] = sign;
                a_rows.push(row);
                rhs.push(poly.bound[s]);
            }
        }
        for &(a, c, w) in &poly.edges {
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; k];
                row[a] = sign;
                row[c] = -sign;
                a_rows.push(row);
                rhs.push(w);
            }
        }
        let phi_vertices = polytope::vertices(&a_rows, &rhs)?;
        // Flux polytope: |Phi_e| <= 1, |div Phi(x)| <= 1/r.
        let mut f_rows = Vec::new();
        let mut f_rhs = Vec::new();
        for e in 0..m {
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; m];
                row[e] = sign;
                f_rows.push(row);
                f_rhs.push(1.0);
            }
        }
        for x in 0..n {
            let mut row = vec![0.0; m];
            for (e, &(a, c)) in space.edges().iter().enumerate() {
                if a == x {
                    row[e] += ec.inv_len[e] / space.mu(x);
                }
                if c == x {
                    row[e] -= ec.inv_len[e] / space.mu(x);
                }
            }
            f_rows.push(row.clone());
            f_rhs.push(1.0 / b.radius);
            f_rows.push(row.iter().map(|v| -v).collect());
            f_rhs.push(1.0 / b.radius);
        }
        let flux_vertices = polytope::vertices(&f_rows, &f_rhs)?;
        let mut best = 0.0f64;
        for phi in &phi_vertices {
            let w = edge_weights(space, ec, &poly, phi);
            for flux in &flux_vertices {
                let v: f64 = w.iter().zip(flux).map(|(a, b)| a * b).sum();
                best = best.max(v.abs());
            }
        }
        *value = best / b.mass;
    }
    Ok(ScalarField::new(distribute(space, &values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, enumerate_balls, SpaceSpec};

    fn p4() -> MetricMeasureSpace {
        build_space(&SpaceSpec::Path { n: 4, spacing: 1.0 }).unwrap()
    }

    const LIN: [f64; 4] = [0.0, 1.0, 2.0, 3.0];

    /// Brute force over the materialized family, one ball at a time.
    fn oracle_sup(space: &MetricMeasureSpace, value: impl Fn(&crate::space::Ball, usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0f64; space.len()];
        for b in enumerate_balls(space) {
            for &x in &b.members {
                out[x] = out[x].max(value(&b, x));
            }
        }
        out
    }

    #[test]
    fn hl_maximal_on_p4() {
        let m = hl_maximal(&p4(), &LIN).unwrap();
        assert_eq!(m[0], 1.5);
        assert_eq!(&*m, &[1.5, 2.0, 2.5, 2.5]);
        let c = hl_maximal(&p4(), &[2.0; 4]).unwrap();
        assert_eq!(&*c, &[2.0; 4]);
    }

    #[test]
    fn hl_maximal_q_half_on_p4() {
        let s = p4();
        let m = hl_maximal_q(&s, &LIN, 0.5).unwrap();
        let oracle = oracle_sup(&s, |b, _| {
            b.members.iter().map(|&y| LIN[y].sqrt()).sum::<f64>() / b.mass
        });
        for x in 0..4 {
            assert!((m[x] - oracle[x] * oracle[x]).abs() < 1e-14);
        }
        // Largest sqrt-average containing 0 is over the whole path.
        let whole = (1.0 + 2f64.sqrt() + 3f64.sqrt()) / 4.0;
        assert!((m[0] - whole * whole).abs() < 1e-14);
        assert!(hl_maximal_q(&s, &LIN, 0.0).is_err());
        for v in hl_maximal_q(&s, &[-3.0; 4], 0.3).unwrap().iter() {
            assert!((v - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sobolev_sharp_on_p4() {
        let nf = sobolev_sharp(&p4(), &LIN).unwrap();
        assert!((nf[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(&*sobolev_sharp(&p4(), &[1.0; 4]).unwrap(), &[0.0; 4]);
    }

    #[test]
    fn calderon_star_on_p4() {
        let s = p4();
        let fs = calderon_star(&s, &LIN).unwrap();
        assert_eq!(fs[0], 1.0);
        let oracle = oracle_sup(&s, |b, x| {
            b.members.iter().map(|&y| (LIN[y] - LIN[x]).abs()).sum::<f64>() / (b.mass * b.radius)
        });
        assert_eq!(&*fs, oracle.as_slice());
    }

    #[test]
    fn grand_maximal_constant_and_ordering() {
        let s = p4();
        let lp = grand_maximal(&s, &[-2.0; 4], GrandMode::ExactLp).unwrap();
        for v in lp.iter() {
            assert!((v - 2.0).abs() < 1e-9);
        }
        let tent = grand_maximal(&s, &LIN, GrandMode::Tent).unwrap();
        let exact = grand_maximal(&s, &LIN, GrandMode::ExactLp).unwrap();
        for x in 0..4 {
            assert!(tent[x] <= exact[x] + 1e-9);
        }
    }

    #[test]
    fn grand_maximal_misses_endpoint_value_on_p4() {
        let s = p4();
        let fp = grand_maximal(&s, &LIN, GrandMode::ExactLp).unwrap();
        // The best ball containing 3 is {2, 3}, where phi = 1 is admissible.
        assert!((fp[3] - 2.5).abs() < 1e-9);
        for x in 0..3 {
            assert!(LIN[x] <= fp[x] + 1e-9);
        }
        // Discrete substitute: the indicator of x is a test function of the
        // smallest ball centered at x.
        for x in 0..4 {
            let b = s.ball_family().get(s.ball_family().centered_at(x).start);
            assert!(LIN[x] * s.mu(x) / b.mass <= fp[x] + 1e-9);
        }
    }

    #[test]
    fn discrete_convolution_on_p4() {
        let s = p4();
        let (u, cover) = discrete_convolution(&s, &[5.0; 4], 1.0).unwrap();
        assert!(u.iter().all(|v| (v - 5.0).abs() < 1e-14));
        // Centers 0 and 2 (point 1 is within 1 of 0, point 3 within 1 of 2).
        assert_eq!(cover.centers, vec![0, 2]);
        assert_eq!(cover.overlap, 2);
        let (u, _) = discrete_convolution(&s, &LIN, 1.0).unwrap();
        // 3B_0 = 3B_2 = whole space, so both averages are 1.5.
        for v in u.iter() {
            assert!((v - 1.5).abs() < 1e-14);
        }
        let (u, cover) = discrete_convolution(&s, &LIN, 10.0).unwrap();
        assert_eq!(cover.centers, vec![0]);
        assert!(u.iter().all(|v| (v - 1.5).abs() < 1e-14));
    }

    #[test]
    fn discrete_convolution_half_radius_on_p4() {
        let s = p4();
        let (u, cover) = discrete_convolution(&s, &LIN, 0.5).unwrap();
        assert_eq!(cover.centers, vec![0, 1, 2, 3]);
        // 3B_j = B(j, 1.5): averages 0.5, 1, 2, 2.5. Tents max(0, 1 - d/3).
        let avg = [0.5, 1.0, 2.0, 2.5];
        for x in 0..4 {
            let w: Vec<f64> = (0..4).map(|j| (1.0 - (x as f64 - j as f64).abs() / 3.0).max(0.0)).collect();
            let expect = w.iter().zip(&avg).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
            assert!((u[x] - expect).abs() < 1e-14);
        }
        assert_eq!(cover.overlap, 4);
    }

    #[test]
    fn grad_maximal_star_single_radius() {
        let s = build_space(&SpaceSpec::Cycle { n: 8 }).unwrap();
        let f: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let star = grad_maximal_star(&s, &f, &[0.5]).unwrap();
        let (u, _) = discrete_convolution(&s, &f, 0.5).unwrap();
        assert_eq!(&*star, &*discrete_gradient(&s, &u));
        assert_eq!(&*grad_maximal_star(&s, &[1.0; 8], &[0.5, 1.0]).unwrap(), &[0.0; 8]);
    }

    #[test]
    fn divergence_is_negative_adjoint() {
        let s = build_space(&SpaceSpec::Grid { k: 3 }).unwrap();
        let phi: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).cos()).collect();
        let flux: Vec<f64> = (0..s.edges().len()).map(|k| (k as f64 * 1.3).sin()).collect();
        let div = divergence(&s, &flux);
        let lhs: f64 = s
            .edges()
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| (phi[b] - phi[a]) / s.d(a, b) * flux[k])
            .sum();
        let rhs: f64 = (0..9).map(|x| phi[x] * div[x] * s.mu(x)).sum();
        assert!((lhs + rhs).abs() < 1e-12);
    }

    #[test]
    fn grad_plus_vanishes_on_constants() {
        let s = p4();
        let gp = grad_plus(&s, &[3.0; 4]).unwrap();
        assert_eq!(&*gp.values, &[0.0; 4]);
        assert!(gp.certified);
    }

    #[test]
    fn grad_plus_on_p4_matches_vertex_oracle() {
        let s = p4();
        let gp = grad_plus(&s, &LIN).unwrap();
        let oracle = gp.oracle.clone().unwrap();
        for x in 0..4 {
            assert!((gp.values[x] - oracle[x]).abs() < 1e-6, "{x}: {} vs {}", gp.values[x], oracle[x]);
        }
        assert!(gp.certified);
    }
}
