//! Finite metric measure spaces, closed balls, averages and the discrete
//! calculus (edge gradients) everything else is built on.
//!
//! A space is immutable after construction. The canonical family of "tight"
//! balls, one per center and per distinct positive distance from it, is
//! computed lazily and cached; every supremum over balls in the crate runs
//! over this family.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GradientField;

/// Relative slack used when validating the triangle inequality and symmetry.
const METRIC_TOL: f64 = 1e-12;

/// Generator descriptor for the built-in fixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    /// `n` points on a line, `d(i, j) = spacing * |i - j|`.
    Path { n: usize, spacing: f64 },
    /// `n` equally spaced points on the unit circle with the arc-length metric.
    Cycle { n: usize },
    /// `k x k` lattice with unit spacing and the lattice path (l1) metric.
    Grid { k: usize },
    /// `n` seeded uniform points in the unit square with the Euclidean metric.
    Cloud { n: usize, seed: u64 },
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::Path { n, spacing } => write!(f, "path({n},{spacing})"),
            SpaceSpec::Cycle { n } => write!(f, "cycle({n})"),
            SpaceSpec::Grid { k } => write!(f, "grid({k}x{k})"),
            SpaceSpec::Cloud { n, seed } => write!(f, "cloud({n},{seed})"),
        }
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;

    /// Parses `path(4,1.0)`, `cycle(8)`, `grid(4)` / `grid(4x4)` and `cloud(64,7)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("unrecognized space descriptor `{s}`"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = &s[..open];
        let args: Vec<&str> = s[open + 1..s.len() - 1].split(',').map(str::trim).collect();
        let int = |a: &str| a.parse::<usize>().map_err(|_| bad());
        match (name, args.as_slice()) {
            ("path", [n]) => Ok(SpaceSpec::Path {
                n: int(n)?,
                spacing: 1.0,
            }),
            ("path", [n, h]) => Ok(SpaceSpec::Path {
                n: int(n)?,
                spacing: h.parse().map_err(|_| bad())?,
            }),
            ("cycle", [n]) => Ok(SpaceSpec::Cycle { n: int(n)? }),
            ("grid", [k]) => {
                let k = match k.split_once('x') {
                    Some((a, b)) if a == b => int(a)?,
                    Some(_) => return Err(bad()),
                    None => int(k)?,
                };
                Ok(SpaceSpec::Grid { k })
            }
            ("cloud", [n, seed]) => Ok(SpaceSpec::Cloud {
                n: int(n)?,
                seed: seed.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Finite point set with a metric, a positive point measure and an edge graph.
#[derive(Clone, Debug)]
pub struct MetricMeasureSpace {
    n: usize,
    dist: Vec<f64>,
    measure: Vec<f64>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    coords: Option<Vec<Vec<f64>>>,
    euclidean: bool,
    spacing: f64,
    balls: OnceLock<BallFamily>,
}

impl MetricMeasureSpace {
    /// Validates and builds a space from a full distance table.
    pub fn new(
        distances: Vec<Vec<f64>>,
        measure: Vec<f64>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = distances.len();
        if measure.len() != n {
            return Err(Error::Shape(format!(
                "measure has {} entries for {n} points",
                measure.len()
            )));
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in distances.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "distance row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            dist.extend_from_slice(row);
        }
        Self::from_parts(n, dist, measure, edges, None, false)
    }

    /// Builds a space from Euclidean coordinates.
    pub fn from_coords(
        coords: Vec<Vec<f64>>,
        measure: Vec<f64>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = coords.len();
        if measure.len() != n {
            return Err(Error::Shape(format!(
                "measure has {} entries for {n} points",
                measure.len()
            )));
        }
        let dim = coords.first().map_or(0, Vec::len);
        if coords.iter().any(|c| c.len() != dim) {
            return Err(Error::Shape("coordinates of unequal dimension".into()));
        }
        let dist = euclidean_table(&coords);
        Self::from_parts(n, dist, measure, edges, Some(coords), true)
    }

    fn from_parts(
        n: usize,
        mut dist: Vec<f64>,
        measure: Vec<f64>,
        edges: Vec<(usize, usize)>,
        coords: Option<Vec<Vec<f64>>>,
        euclidean: bool,
    ) -> Result<Self> {
        validate_metric(n, &mut dist)?;
        for (point, &w) in measure.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositiveWeight { point, weight: w });
            }
        }
        let mut norm_edges: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidEdge(a, b));
            }
            norm_edges.push((a.min(b), a.max(b)));
        }
        norm_edges.sort_unstable();
        norm_edges.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &norm_edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        check_connected(n, &adjacency)?;
        let spacing = norm_edges
            .iter()
            .map(|&(a, b)| dist[a * n + b])
            .fold(f64::INFINITY, f64::min);
        Ok(MetricMeasureSpace {
            n,
            dist,
            measure,
            edges: norm_edges,
            adjacency,
            coords,
            euclidean,
            spacing: if spacing.is_finite() { spacing } else { 1.0 },
            balls: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n + y]
    }

    pub fn distance_row(&self, x: usize) -> &[f64] {
        &self.dist[x * self.n..(x + 1) * self.n]
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    #[inline]
    pub fn mu(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// Unordered edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn is_euclidean(&self) -> bool {
        self.euclidean
    }

    /// Nominal spacing of the generator (the shortest edge for loaded spaces).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Returns a copy with the generator spacing overridden.
    fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }

    /// Relabels points: new id `perm[old]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        if perm.len() != n {
            return Err(Error::Shape("permutation length".into()));
        }
        let mut inv = vec![usize::MAX; n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || inv[new] != usize::MAX {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            inv[new] = old;
        }
        let mut dist = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                dist[perm[a] * n + perm[b]] = self.d(a, b);
            }
        }
        let measure = (0..n).map(|new| self.measure[inv[new]]).collect();
        let edges = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let coords = self
            .coords
            .as_ref()
            .map(|c| (0..n).map(|new| c[inv[new]].clone()).collect());
        Ok(Self::from_parts(n, dist, measure, edges, coords, self.euclidean)?.with_spacing(self.spacing))
    }

    pub(crate) fn check_field(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n {
            return Err(Error::Shape(format!(
                "field has {} values for {} points",
                field.len(),
                self.n
            )));
        }
        if let Some(point) = field.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point });
        }
        Ok(())
    }

    /// `sum_x f(x) mu(x)`.
    pub fn integral(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.measure).map(|(v, w)| v * w).sum()
    }

    /// `(sum |f|^p mu)^(1/p)`; `p = inf` gives the sup norm. Quasi-norm for p < 1.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return f.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let s: f64 = f
            .iter()
            .zip(&self.measure)
            .map(|(v, w)| v.abs().powf(p) * w)
            .sum();
        s.powf(1.0 / p)
    }

    /// Closed ball `{y : d(c, y) <= r}`.
    pub fn ball(&self, center: usize, radius: f64) -> Ball {
        let members: Vec<usize> = (0..self.n).filter(|&y| self.d(center, y) <= radius).collect();
        let mass = members.iter().map(|&y| self.measure[y]).sum();
        Ball {
            center,
            radius,
            members,
            mass,
        }
    }

    /// The cached canonical family of tight balls.
    pub fn ball_family(&self) -> &BallFamily {
        self.balls.get_or_init(|| BallFamily::build(self))
    }
}

fn euclidean_table(coords: &[Vec<f64>]) -> Vec<f64> {
    let n = coords.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = coords[i]
                .iter()
                .zip(&coords[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let d = s.sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    dist
}

fn validate_metric(n: usize, dist: &mut [f64]) -> Result<()> {
    let scale = dist.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = METRIC_TOL * scale.max(f64::MIN_POSITIVE);
    for x in 0..n {
        for y in 0..n {
            let v = dist[x * n + y];
            if !v.is_finite() || v < 0.0 || (x == y) != (v == 0.0) {
                return Err(Error::Diagonal { x, y, value: v });
            }
        }
    }
    for x in 0..n {
        for y in x + 1..n {
            let (a, b) = (dist[x * n + y], dist[y * n + x]);
            if (a - b).abs() > tol {
                return Err(Error::NonSymmetric {
                    x,
                    y,
                    dxy: a,
                    dyx: b,
                });
            }
            let m = 0.5 * (a + b);
            dist[x * n + y] = m;
            dist[y * n + x] = m;
        }
    }
    for x in 0..n {
        for y in 0..n {
            let dxy = dist[x * n + y];
            for z in 0..n {
                let bound = dxy + dist[y * n + z];
                let dxz = dist[x * n + z];
                if dxz > bound + tol {
                    return Err(Error::Triangle {
                        x,
                        y,
                        z,
                        dxz,
                        bound,
                    });
                }
            }
        }
    }
    Ok(())
}

fn check_connected(n: usize, adjacency: &[Vec<usize>]) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &y in &adjacency[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(point) => Err(Error::Disconnected { point }),
        None => Ok(()),
    }
}

/// Builds one of the generator fixtures. Deterministic in its parameters.
pub fn build_space(spec: &SpaceSpec) -> Result<MetricMeasureSpace> {
    match *spec {
        SpaceSpec::Path { n, spacing } => {
            if n == 0 || !(spacing > 0.0 && spacing.is_finite()) {
                return Err(Error::InvalidParameter(format!("{spec}")));
            }
            let coords = (0..n).map(|i| vec![spacing * i as f64]).collect();
            let edges = (1..n).map(|i| (i - 1, i)).collect();
            Ok(MetricMeasureSpace::from_coords(coords, vec![1.0; n], edges)?.with_spacing(spacing))
        }
        SpaceSpec::Cycle { n } => {
            if n < 3 {
                return Err(Error::InvalidParameter(format!("{spec} needs n >= 3")));
            }
            let step = 2.0 * PI / n as f64;
            let dist = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let k = i.abs_diff(j);
                            step * k.min(n - k) as f64
                        })
                        .collect()
                })
                .collect();
            let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
            let coords = (0..n)
                .map(|i| {
                    let t = step * i as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect();
            let mut space = MetricMeasureSpace::new(dist, vec![1.0; n], edges)?;
            space.coords = Some(coords);
            Ok(space.with_spacing(step))
        }
        SpaceSpec::Grid { k } => {
            if k == 0 {
                return Err(Error::InvalidParameter(format!("{spec}")));
            }
            let n = k * k;
            let pos = |p: usize| ((p / k) as f64, (p % k) as f64);
            let dist = (0..n)
                .map(|a| {
                    let (ai, aj) = pos(a);
                    (0..n)
                        .map(|b| {
                            let (bi, bj) = pos(b);
                            (ai - bi).abs() + (aj - bj).abs()
                        })
                        .collect()
                })
                .collect();
            let mut edges = Vec::new();
            for i in 0..k {
                for j in 0..k {
                    let p = i * k + j;
                    if j + 1 < k {
                        edges.push((p, p + 1));
                    }
                    if i + 1 < k {
                        edges.push((p, p + k));
                    }
                }
            }
            let mut space = MetricMeasureSpace::new(dist, vec![1.0; n], edges)?;
            space.coords = Some((0..n).map(|p| vec![pos(p).0, pos(p).1]).collect());
            Ok(space.with_spacing(1.0))
        }
        SpaceSpec::Cloud { n, seed } => {
            if n == 0 {
                return Err(Error::InvalidParameter(format!("{spec}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coords: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
                .collect();
            let spacing = 1.0 / (n as f64).sqrt();
            let edges = cloud_edges(&coords, 2.0 * spacing);
            Ok(MetricMeasureSpace::from_coords(coords, vec![1.0; n], edges)?.with_spacing(spacing))
        }
    }
}

/// epsilon-graph on the points, plus the shortest bridging pairs needed to
/// join whatever components the epsilon-graph leaves (Kruskal order).
fn cloud_edges(coords: &[Vec<f64>], eps: f64) -> Vec<(usize, usize)> {
    let n = coords.len();
    let table = euclidean_table(coords);
    let mut edges = Vec::new();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if table[i * n + j] <= eps {
                edges.push((i, j));
                uf.union(i, j);
            }
        }
    }
    if uf.components > 1 {
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        pairs.sort_by(|&(a, b), &(c, d)| {
            table[a * n + b]
                .total_cmp(&table[c * n + d])
                .then((a, b).cmp(&(c, d)))
        });
        for (i, j) in pairs {
            if uf.union(i, j) {
                edges.push((i, j));
                if uf.components == 1 {
                    break;
                }
            }
        }
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        self.components -= 1;
        true
    }
}

/// A closed ball with a stored radius. Members are sorted by point id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub members: Vec<usize>,
    pub mass: f64,
}

impl Ball {
    pub fn contains(&self, y: usize) -> bool {
        self.members.binary_search(&y).is_ok()
    }
}

/// A tight ball viewed through the family: members are listed by increasing
/// distance from the center (ties by id).
#[derive(Clone, Copy, Debug)]
pub struct BallView<'a> {
    pub index: usize,
    pub center: usize,
    pub radius: f64,
    pub mass: f64,
    pub members: &'a [usize],
}

impl BallView<'_> {
    pub fn to_ball(&self) -> Ball {
        let mut members = self.members.to_vec();
        members.sort_unstable();
        Ball {
            center: self.center,
            radius: self.radius,
            members,
            mass: self.mass,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct TightBall {
    center: usize,
    len: usize,
    radius: f64,
    mass: f64,
}

/// All tight balls of a space: for each center (ascending) and each distinct
/// positive distance from it (ascending), the closed ball of that radius.
#[derive(Clone, Debug)]
pub struct BallFamily {
    n: usize,
    order: Vec<usize>,
    balls: Vec<TightBall>,
    starts: Vec<usize>,
}

impl BallFamily {
    fn build(space: &MetricMeasureSpace) -> Self {
        let n = space.len();
        let mut order = Vec::with_capacity(n * n);
        let mut balls = Vec::new();
        let mut starts = Vec::with_capacity(n + 1);
        for c in 0..n {
            starts.push(balls.len());
            let mut row: Vec<usize> = (0..n).collect();
            row.sort_by(|&a, &b| space.d(c, a).total_cmp(&space.d(c, b)).then(a.cmp(&b)));
            let mut mass = 0.0;
            for (k, &y) in row.iter().enumerate() {
                mass += space.mu(y);
                let r = space.d(c, y);
                let last_of_radius = k + 1 == n || space.d(c, row[k + 1]) != r;
                if r > 0.0 && last_of_radius {
                    balls.push(TightBall {
                        center: c,
                        len: k + 1,
                        radius: r,
                        mass,
                    });
                }
            }
            order.extend(row);
        }
        starts.push(balls.len());
        BallFamily {
            n,
            order,
            balls,
            starts,
        }
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn get(&self, index: usize) -> BallView<'_> {
        let b = self.balls[index];
        let start = b.center * self.n;
        BallView {
            index,
            center: b.center,
            radius: b.radius,
            mass: b.mass,
            members: &self.order[start..start + b.len],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = BallView<'_>> + '_ {
        (0..self.balls.len()).map(move |i| self.get(i))
    }

    /// Indices of the balls centered at `center`, in ascending radius.
    pub fn centered_at(&self, center: usize) -> std::ops::Range<usize> {
        self.starts[center]..self.starts[center + 1]
    }

    /// Points sorted by distance from `center` (ties by id); the center first.
    pub fn sorted_from(&self, center: usize) -> &[usize] {
        &self.order[center * self.n..(center + 1) * self.n]
    }
}

/// Materializes the canonical tight-ball family.
pub fn enumerate_balls(space: &MetricMeasureSpace) -> Vec<Ball> {
    space.ball_family().iter().map(|b| b.to_ball()).collect()
}

/// Weighted average `sum_{y in B} f(y) mu(y) / mu(B)`.
pub fn ball_average(space: &MetricMeasureSpace, field: &[f64], ball: &Ball) -> f64 {
    members_average(space, field, &ball.members, ball.mass)
}

pub(crate) fn members_average(
    space: &MetricMeasureSpace,
    field: &[f64],
    members: &[usize],
    mass: f64,
) -> f64 {
    members.iter().map(|&y| field[y] * space.mu(y)).sum::<f64>() / mass
}

/// Measured doubling constant and its exponent `s = log2(c_d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingProfile {
    pub c_d: f64,
    pub s: f64,
}

impl DoublingProfile {
    /// Lower end of the admissible exponent interval `(s/(s+1), 1)`.
    pub fn q_lower(&self) -> f64 {
        self.s / (self.s + 1.0)
    }

    /// Midpoint of the admissible interval.
    pub fn default_q(&self) -> f64 {
        0.5 * (self.q_lower() + 1.0)
    }

    pub fn check_q(&self, q: f64) -> Result<()> {
        let lower = self.q_lower();
        if q > lower && q < 1.0 {
            Ok(())
        } else {
            Err(Error::ExponentOutOfRange { q, lower, s: self.s })
        }
    }
}

/// `sup_{x, r} mu(B(x, 2r)) / mu(B(x, r))`, evaluated on the critical radii
/// `{d(x, y)} U {d(x, y) / 2}` where both masses change.
pub fn doubling_profile(space: &MetricMeasureSpace) -> DoublingProfile {
    let n = space.len();
    let family = space.ball_family();
    let mut c_d: f64 = 1.0;
    for x in 0..n {
        let row = family.sorted_from(x);
        let dists: Vec<f64> = row.iter().map(|&y| space.d(x, y)).collect();
        let mut prefix = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &y in row {
            acc += space.mu(y);
            prefix.push(acc);
        }
        let mass_within = |rho: f64| {
            let k = dists.partition_point(|&d| d <= rho);
            prefix[k - 1]
        };
        for &d in dists.iter().skip(1) {
            for r in [d, 0.5 * d] {
                c_d = c_d.max(mass_within(2.0 * r) / mass_within(r));
            }
        }
    }
    DoublingProfile {
        c_d,
        s: c_d.log2(),
    }
}

/// Pointwise edge-gradient magnitude.
pub fn discrete_gradient(space: &MetricMeasureSpace, field: &[f64]) -> GradientField {
    let values = (0..space.len())
        .map(|x| {
            space
                .neighbors(x)
                .iter()
                .map(|&y| (field[x] - field[y]).abs() / space.d(x, y))
                .fold(0.0, f64::max)
        })
        .collect();
    GradientField::new(values)
}

/// Result of a Poincare-constant measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    /// Smallest admissible constant; `+inf` when some ball has oscillation
    /// but no gradient.
    pub constant: f64,
    /// Ball attaining the constant (or witnessing the violation).
    pub witness: Option<Ball>,
}

/// Smallest `C` with `(avg_B |f - f_B|^q)^(1/q) <= C r (avg_B |grad f|^q)^(1/q)`
/// over the tight-ball family.
pub fn poincare_constant(
    space: &MetricMeasureSpace,
    q: f64,
    field: &[f64],
) -> Result<PoincareReport> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("Poincare exponent q = {q} must be >= 1")));
    }
    space.check_field(field)?;
    let grad = discrete_gradient(space, field);
    let mut best = PoincareReport {
        constant: 0.0,
        witness: None,
    };
    for ball in space.ball_family().iter() {
        let mean = members_average(space, field, ball.members, ball.mass);
        let lhs = (ball
            .members
            .iter()
            .map(|&y| (field[y] - mean).abs().powf(q) * space.mu(y))
            .sum::<f64>()
            / ball.mass)
            .powf(1.0 / q);
        let rhs = ball.radius
            * (ball
                .members
                .iter()
                .map(|&y| grad[y].powf(q) * space.mu(y))
                .sum::<f64>()
                / ball.mass)
                .powf(1.0 / q);
        let scale = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rhs == 0.0 {
            if lhs > 1e-12 * scale {
                return Ok(PoincareReport {
                    constant: f64::INFINITY,
                    witness: Some(ball.to_ball()),
                });
            }
            continue;
        }
        let ratio = lhs / rhs;
        if ratio > best.constant {
            best = PoincareReport {
                constant: ratio,
                witness: Some(ball.to_ball()),
            };
        }
    }
    Ok(best)
}
