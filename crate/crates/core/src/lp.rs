//! Linear programs over the discrete test-function class of a ball.
//!
//! A test function for the ball `B = B(c, r)` is `psi` with support in `B`,
//! `|psi| <= 1/mu(B)` and `|psi(y) - psi(z)| <= d(y, z) / (r mu(B))` on every
//! edge. We work with `phi = mu(B) psi`, so the class becomes
//! `|phi| <= 1`, `|phi(y) - phi(z)| <= d/r` on edges inside `B` and
//! `|phi(y)| <= d/r` on edges leaving `B`. The polytope is symmetric, so
//! `max |<c, phi>| = max <c, phi>`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, Variable};

use crate::error::{Error, Result};
use crate::space::{BallView, MetricMeasureSpace};

pub(crate) fn solve(problem: &Problem, ball: usize) -> Result<Solution> {
    problem.solve().map_err(|e| Error::Solver {
        ball,
        reason: e.to_string(),
    })
}

/// The scaled test-function polytope of one tight ball.
pub(crate) struct TestPolytope<'a> {
    pub index: usize,
    pub radius: f64,
    pub members: &'a [usize],
    /// Position of each space point in `members`, `usize::MAX` outside.
    pub slot: Vec<usize>,
    /// `min(1, min over leaving edges of d/r)` per member.
    pub bound: Vec<f64>,
    /// Internal edges as member slots with their `d/r`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl<'a> TestPolytope<'a> {
    pub fn new(space: &MetricMeasureSpace, ball: &BallView<'a>) -> Self {
        let mut slot = vec![usize::MAX; space.len()];
        for (k, &y) in ball.members.iter().enumerate() {
            slot[y] = k;
        }
        let r = ball.radius;
        let mut bound = vec![1.0f64; ball.members.len()];
        let mut edges = Vec::new();
        for (k, &y) in ball.members.iter().enumerate() {
            for &z in space.neighbors(y) {
                let w = space.d(y, z) / r;
                match slot[z] {
                    usize::MAX => bound[k] = bound[k].min(w),
                    j if j > k => edges.push((k, j, w)),
                    _ => {}
                }
            }
        }
        TestPolytope {
            index: ball.index,
            radius: r,
            members: ball.members,
            slot,
            bound,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Feasible tent `phi(y) = max(0, 1 - d(y, c)/r)`.
    pub fn tent(&self, space: &MetricMeasureSpace) -> Vec<f64> {
        let c = self.members[0];
        self.members
            .iter()
            .map(|&y| (1.0 - space.d(c, y) / self.radius).max(0.0))
            .collect()
    }

    /// Maximizes `sum_k coef[k] phi[k]` over the polytope.
    pub fn maximize(&self, coef: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut p = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<Variable> = coef
            .iter()
            .zip(&self.bound)
            .map(|(&c, &u)| p.add_var(c, (-u, u)))
            .collect();
        for &(a, b, w) in &self.edges {
            if w >= self.bound[a] + self.bound[b] {
                continue;
            }
            p.add_constraint(&[(vars[a], 1.0), (vars[b], -1.0)], ComparisonOp::Le, w);
            p.add_constraint(&[(vars[a], 1.0), (vars[b], -1.0)], ComparisonOp::Ge, -w);
        }
        let sol = solve(&p, self.index)?;
        let phi = vars.iter().map(|&v| sol[v]).collect();
        Ok((sol.objective(), phi))
    }

    /// Maximizes `sum_k coef[k] phi[k]` when `coef` vanishes off `support`
    /// (member slots). Only the support coordinates enter the LP: a vector on
    /// the support extends to the whole polytope iff it respects the box and
    /// the shortest-path distances of the graph with everything outside `B`
    /// collapsed to one node pinned at zero. Those are `min(SP(a, b), g(a) + g(b))`
    /// with `SP` the global graph distances `sp` and `g` the distance to the
    /// complement: a path leaving `B` is never shorter than `g(a) + g(b)`.
    pub fn maximize_on_support(&self, sp: &[Vec<f64>], coef: &[f64], support: &[usize]) -> Result<f64> {
        let m = support.len();
        let points: Vec<usize> = support.iter().map(|&k| self.members[k]).collect();
        // Distance to the complement, attained by a path whose prefix stays in B.
        let ground: Vec<f64> = points
            .iter()
            .map(|&y| {
                (0..sp.len())
                    .filter(|&w| self.slot[w] == usize::MAX)
                    .map(|w| sp[y][w])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mut p = Problem::new(OptimizationDirection::Maximize);
        let bounds: Vec<f64> = ground.iter().map(|g| (g / self.radius).min(1.0)).collect();
        let vars: Vec<Variable> = (0..m).map(|a| p.add_var(coef[support[a]], (-bounds[a], bounds[a]))).collect();
        for a in 0..m {
            for b in a + 1..m {
                let w = sp[points[a]][points[b]].min(ground[a] + ground[b]) / self.radius;
                if w >= bounds[a] + bounds[b] {
                    continue;
                }
                p.add_constraint(&[(vars[a], 1.0), (vars[b], -1.0)], ComparisonOp::Le, w);
                p.add_constraint(&[(vars[a], 1.0), (vars[b], -1.0)], ComparisonOp::Ge, -w);
            }
        }
        Ok(solve(&p, self.index)?.objective())
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}

/// All-pairs shortest-path lengths along the edge graph.
pub(crate) fn graph_distances(space: &MetricMeasureSpace) -> Vec<Vec<f64>> {
    let adj: Vec<Vec<(usize, f64)>> = (0..space.len())
        .map(|x| space.neighbors(x).iter().map(|&y| (y, space.d(x, y))).collect())
        .collect();
    (0..space.len()).map(|x| dijkstra(&adj, x)).collect()
}

/// Builds `sum coef * var` as a minilp expression.
pub(crate) fn expr(terms: impl IntoIterator<Item = (Variable, f64)>) -> LinearExpr {
    let mut e = LinearExpr::empty();
    for (v, c) in terms {
        e.add(v, c);
    }
    e
}
