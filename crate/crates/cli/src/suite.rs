//! The acceptance matrix. Each check produces rows (one per fixture, field
//! and measured quantity); a module error becomes a failed row and never
//! aborts the remaining rows.

use std::sync::OnceLock;
use std::time::Instant;

use anyhow::{anyhow, Result};
use hsdecomp_core::atomic::{atomic_decompose, h1_atom_grand_maximal_check, reconstruct, validate_atom, AtomFlavor, AtomKind};
use hsdecomp_core::czd::{alpha_grid, verify_cz, CzContext, CzFlavor};
use hsdecomp_core::hajlasz::{hajlasz_norm_lp, mn_constant_with};
use hsdecomp_core::maxfn::{
    calderon_star, discrete_convolution, grad_maximal_star, grad_plus, grand_maximal, hl_maximal, sobolev_sharp,
    GrandMode,
};
use hsdecomp_core::{build_space, discrete_gradient, doubling_profile, DoublingProfile, MetricMeasureSpace, ScalarField, SpaceSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CheckId, ExperimentConfig};
use crate::fields::{generate, FieldSpec};

/// One measured quantity. `passed` is decided by the check, usually
/// `measured <= ceiling`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub check: CheckId,
    pub fixture: String,
    pub n: usize,
    pub field: String,
    pub quantity: String,
    /// Extra case data such as the flavor or the height.
    pub case: String,
    pub measured: f64,
    pub ceiling: f64,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: CheckId,
    pub title: String,
    pub passed: bool,
    pub rows: Vec<Row>,
}

impl CheckResult {
    pub fn failed_rows(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.passed)
    }

    /// Row with the largest `measured / ceiling`.
    pub fn worst(&self) -> Option<&Row> {
        self.rows
            .iter()
            .filter(|r| r.ceiling > 0.0)
            .max_by(|a, b| (a.measured / a.ceiling).total_cmp(&(b.measured / b.ceiling)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub fixture: String,
    pub n: usize,
    pub seed: Option<u64>,
    pub q: f64,
    pub s: f64,
    pub c_d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    pub fingerprints: Vec<Fingerprint>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, id: CheckId) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Wall-clock seconds per check; kept apart from the report so that reports
/// are byte-identical across runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings(pub Vec<(CheckId, f64)>);

/// A built fixture with its fields and cached operator values.
pub struct Fixture {
    pub spec: SpaceSpec,
    pub label: String,
    pub space: MetricMeasureSpace,
    pub profile: DoublingProfile,
    /// Configured or default `q`, or the reason it is not admissible.
    pub q: std::result::Result<f64, String>,
    pub fields: Vec<(FieldSpec, Vec<f64>)>,
    nf: Vec<OnceLock<ScalarField>>,
    star: Vec<OnceLock<ScalarField>>,
}

impl Fixture {
    pub fn new(spec: &SpaceSpec, cfg: &ExperimentConfig) -> Result<Self> {
        let space = build_space(spec)?;
        let profile = doubling_profile(&space);
        let q = match cfg.q {
            Some(q) => profile.check_q(q).map(|_| q).map_err(|e| e.to_string()),
            None => Ok(profile.default_q()),
        };
        let fields = cfg
            .fields
            .iter()
            .map(|&f| Ok((f, generate(&space, f)?)))
            .collect::<Result<Vec<_>>>()?;
        let k = fields.len();
        Ok(Fixture {
            label: spec.to_string(),
            spec: spec.clone(),
            space,
            profile,
            q,
            fields,
            nf: (0..k).map(|_| OnceLock::new()).collect(),
            star: (0..k).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn nf(&self, i: usize) -> Result<&ScalarField> {
        cached(&self.nf[i], || sobolev_sharp(&self.space, &self.fields[i].1))
    }

    pub fn star(&self, i: usize) -> Result<&ScalarField> {
        cached(&self.star[i], || calderon_star(&self.space, &self.fields[i].1))
    }

    fn q(&self) -> Result<f64> {
        self.q.clone().map_err(|e| anyhow!("precondition: {e}"))
    }

    fn fingerprint(&self) -> Fingerprint {
        Fingerprint {
            fixture: self.label.clone(),
            n: self.space.len(),
            seed: match self.spec {
                SpaceSpec::Cloud { seed, .. } => Some(seed),
                _ => None,
            },
            q: self.q.clone().unwrap_or(f64::NAN),
            s: self.profile.s,
            c_d: self.profile.c_d,
        }
    }
}

fn cached<'a>(
    cell: &'a OnceLock<ScalarField>,
    compute: impl FnOnce() -> hsdecomp_core::Result<ScalarField>,
) -> Result<&'a ScalarField> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = compute()?;
    Ok(cell.get_or_init(|| v))
}

/// Builds rows for one `(fixture, field)` cell.
struct Cell<'a> {
    check: CheckId,
    fixture: &'a str,
    n: usize,
    field: String,
    rows: Vec<Row>,
}

impl<'a> Cell<'a> {
    fn new(check: CheckId, fx: &'a Fixture, field: impl Into<String>) -> Self {
        Cell {
            check,
            fixture: &fx.label,
            n: fx.space.len(),
            field: field.into(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, quantity: &str, case: impl Into<String>, measured: f64, ceiling: f64, passed: bool) {
        self.rows.push(Row {
            check: self.check,
            fixture: self.fixture.to_string(),
            n: self.n,
            field: self.field.clone(),
            quantity: quantity.into(),
            case: case.into(),
            measured,
            ceiling,
            passed,
            error: None,
        });
    }

    /// `measured <= ceiling`, with NaN failing.
    fn at_most(&mut self, quantity: &str, case: impl Into<String>, measured: f64, ceiling: f64) {
        self.push(quantity, case, measured, ceiling, measured <= ceiling);
    }

    /// Runs `body`; an error becomes one failed row.
    fn run(mut self, quantity: &str, body: impl FnOnce(&mut Self) -> Result<()>) -> Vec<Row> {
        if let Err(e) = body(&mut self) {
            self.rows.push(Row {
                check: self.check,
                fixture: self.fixture.to_string(),
                n: self.n,
                field: self.field.clone(),
                quantity: quantity.into(),
                case: String::new(),
                measured: f64::NAN,
                ceiling: f64::NAN,
                passed: false,
                error: Some(format!("{e:#}")),
            });
        }
        self.rows
    }
}

/// `max_x num(x) / den(x)` with `0/0 = 0` and `positive/0 = inf`.
fn max_ratio(num: &[f64], den: &[f64]) -> f64 {
    num.iter()
        .zip(den)
        .map(|(&a, &b)| if a <= 0.0 { 0.0 } else if b <= 0.0 { f64::INFINITY } else { a / b })
        .fold(0.0, f64::max)
}

/// `max_ratio` with numerators up to `floor` (roundoff) counted as zero.
fn max_ratio_above(num: &[f64], den: &[f64], floor: f64) -> f64 {
    let num: Vec<f64> = num.iter().map(|&v| if v <= floor { 0.0 } else { v }).collect();
    max_ratio(&num, den)
}

/// `max |a - b| / max(||b||_inf, tiny)`.
fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// `max / min` over the positive finite entries; `None` with fewer than two.
pub fn spread(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().filter(|x| *x > 0.0 && x.is_finite()).collect();
    if v.len() < 2 {
        return None;
    }
    let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    Some(hi / lo)
}

fn is_constant(f: &[f64]) -> bool {
    f.iter().all(|&v| v == f[0])
}

/// Adds one spread row per group: the per-fixture maxima of `quantity`
/// (restricted by `filter`) compared across fixtures.
fn spread_rows(
    check: CheckId,
    rows: &[Row],
    quantity: &str,
    case_filter: impl Fn(&Row) -> bool,
    label: &str,
    ceiling: f64,
) -> Row {
    let mut fixtures: Vec<(&str, f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.quantity == quantity && r.error.is_none() && case_filter(r)) {
        match fixtures.iter_mut().find(|(f, _)| *f == r.fixture) {
            Some((_, m)) => *m = m.max(r.measured),
            None => fixtures.push((&r.fixture, r.measured)),
        }
    }
    let s = spread(fixtures.iter().map(|&(_, m)| m));
    Row {
        check,
        fixture: "*".into(),
        n: 0,
        field: "*".into(),
        quantity: format!("spread:{quantity}"),
        case: label.into(),
        measured: s.unwrap_or(1.0),
        ceiling,
        passed: s.map_or(true, |s| s <= ceiling),
        error: None,
    }
}

pub fn run_suite(cfg: &ExperimentConfig) -> Result<(SuiteReport, Timings)> {
    cfg.validate()?;
    let fixtures: Vec<Fixture> = cfg.fixtures.iter().map(|s| Fixture::new(s, cfg)).collect::<Result<_>>()?;
    let mut checks = Vec::new();
    let mut timings = Timings::default();
    for &id in &cfg.checks {
        let start = Instant::now();
        let rows = match id {
            CheckId::A1 => check_a1(&fixtures),
            CheckId::A2 => check_a2(cfg, &fixtures)?,
            CheckId::A3 => check_a3(cfg, &fixtures),
            CheckId::A4 => check_a4(cfg, &fixtures),
            CheckId::A5 => check_a5(cfg, &fixtures),
            CheckId::A6 => check_a6(cfg, &fixtures),
            CheckId::A7 => check_a7(cfg, &fixtures),
            CheckId::A8 => check_a8(cfg, &fixtures),
        };
        timings.0.push((id, start.elapsed().as_secs_f64()));
        checks.push(CheckResult {
            id,
            title: id.title().into(),
            passed: rows.iter().all(|r| r.passed),
            rows,
        });
    }
    let fingerprints = fixtures.iter().map(Fixture::fingerprint).collect();
    Ok((SuiteReport { checks, fingerprints }, timings))
}

/// Runs one check on the given config.
pub fn run_check(cfg: &ExperimentConfig, id: CheckId) -> Result<(CheckResult, f64)> {
    let cfg = ExperimentConfig {
        checks: vec![id],
        ..cfg.clone()
    };
    let (mut report, timings) = run_suite(&cfg)?;
    Ok((report.checks.remove(0), timings.0[0].1))
}

fn check_a1(fixtures: &[Fixture]) -> Vec<Row> {
    let mut rows = Vec::new();
    for fx in fixtures {
        for (i, (spec, _)) in fx.fields.iter().enumerate() {
            rows.extend(Cell::new(CheckId::A1, fx, spec.to_string()).run("nf_vs_star", |c| {
                let (nf, star) = (fx.nf(i)?, fx.star(i)?);
                let twice: Vec<f64> = star.iter().map(|v| 2.0 * v).collect();
                c.at_most("nf/(2 star)", "", max_ratio(nf, &twice), 1.0 + 1e-12);
                let bound = 1.0 + 16.0 * fx.profile.c_d * fx.profile.c_d;
                let scaled: Vec<f64> = nf.iter().map(|v| bound * v).collect();
                c.at_most("star/((1+16cd^2) nf)", format!("c_d={}", fx.profile.c_d), max_ratio(star, &scaled), 1.0 + 1e-9);
                Ok(())
            }));
        }
    }
    rows
}

fn check_a2(cfg: &ExperimentConfig, fixtures: &[Fixture]) -> Result<Vec<Row>> {
    let c = &cfg.ceilings;
    let mut extra = Vec::new();
    for spec in &cfg.hajlasz_clouds {
        if !cfg.fixtures.contains(spec) {
            extra.push(Fixture::new(spec, cfg)?);
        }
    }
    let mut rows = Vec::new();
    for fx in fixtures.iter().chain(&extra) {
        for (i, (spec, f)) in fx.fields.iter().enumerate() {
            rows.extend(Cell::new(CheckId::A2, fx, spec.to_string()).run("hajlasz", |cell| {
                let cert = hajlasz_norm_lp(&fx.space, f)?;
                let nf = fx.nf(i)?;
                let nf1 = fx.space.lp_norm(nf, 1.0);
                let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs())) / fx.space.spacing();
                cell.at_most("-slack/scale", "", -cert.slack / scale.max(f64::MIN_POSITIVE), 1e-9);
                if is_constant(f) {
                    return Ok(());
                }
                let ratio = nf1 / cert.value;
                let b = c.hajlasz_bracket;
                cell.push("nf1/value", "", ratio, b, ratio >= 1.0 / b && ratio <= b);
                cell.at_most("gap/value", "", (cert.value - cert.dual_bound) / cert.value, 1e-9);
                let mn = mn_constant_with(&fx.space, f, nf);
                cell.at_most("value/(2 mn nf1)", format!("mn={}", mn.constant), cert.value / (2.0 * mn.constant * nf1), 1.0 + 1e-9);
                Ok(())
            }));
        }
    }
    let clouds: Vec<String> = cfg.hajlasz_clouds.iter().map(|s| s.to_string()).collect();
    for spec in &cfg.fields {
        let label = spec.to_string();
        rows.push(spread_rows(
            CheckId::A2,
            &rows,
            "nf1/value",
            |r| r.field == label && clouds.contains(&r.fixture),
            &format!("clouds, field {label}"),
            c.spread,
        ));
    }
    Ok(rows)
}

const CZ_CONSTANTS: [&str; 4] = ["C_g", "C_b1", "C_bq", "C_B"];

fn flavor_name(f: CzFlavor) -> &'static str {
    match f {
        CzFlavor::Homogeneous => "homog",
        CzFlavor::Tilde => "tilde",
        CzFlavor::M11 => "m11",
    }
}

fn check_a3(cfg: &ExperimentConfig, fixtures: &[Fixture]) -> Vec<Row> {
    let c = &cfg.ceilings;
    let mut rows = Vec::new();
    for fx in fixtures {
        for (spec, f) in &fx.fields {
            for &flavor in &cfg.cz_flavors {
                let name = flavor_name(flavor);
                rows.extend(Cell::new(CheckId::A3, fx, spec.to_string()).run("cz", |cell| {
                    let ctx = CzContext::new(&fx.space, f, fx.q()?, flavor, GrandMode::Auto)?;
                    let mut worst = [0.0f64; 4];
                    let (mut resid, mut support, mut overlap) = (0.0f64, true, 0usize);
                    let (mut center, mut star, mut c_q) = (0.0f64, 0.0f64, f64::INFINITY);
                    for alpha in alpha_grid(ctx.level(), cfg.alpha_points) {
                        let rep = verify_cz(&fx.space, &ctx.decompose(alpha)?);
                        for (w, v) in worst.iter_mut().zip([rep.c_g, rep.c_b1, rep.c_bq, rep.c_big_b]) {
                            *w = w.max(v);
                        }
                        resid = resid.max(rep.relative_residual);
                        support &= rep.support_ok;
                        overlap = overlap.max(rep.overlap);
                        center = center.max(rep.center_ratio.unwrap_or(0.0));
                        star = star.max(rep.star_ratio.unwrap_or(0.0));
                        c_q = rep.c_q;
                    }
                    cell.at_most("residual", name, resid, 1e-9);
                    cell.push("support", name, if support { 0.0 } else { 1.0 }, 0.0, support);
                    cell.at_most("K", name, overlap as f64, c.overlap as f64);
                    for (q, w) in CZ_CONSTANTS.iter().zip(worst) {
                        cell.at_most(q, name, w, c.cz_constant);
                    }
                    if flavor == CzFlavor::M11 {
                        cell.at_most("|c_i|/alpha", name, center, 2.0);
                        cell.at_most("star(x_i)/(c_q alpha)", name, star / c_q, 1.0);
                    }
                    Ok(())
                }));
            }
        }
    }
    for &flavor in &cfg.cz_flavors {
        let name = flavor_name(flavor);
        for q in CZ_CONSTANTS {
            rows.push(spread_rows(CheckId::A3, &rows, q, |r| r.case == name, name, c.spread));
        }
    }
    rows
}

fn atom_name(k: AtomKind) -> &'static str {
    match k {
        AtomKind::H1 => "h1",
        AtomKind::HsMoment => "hs-moment",
        AtomKind::HsSize => "hs-size",
        AtomKind::HsNonhomog => "hs-nonhomog",
        AtomKind::Ls => "ls",
    }
}

fn check_a4(cfg: &ExperimentConfig, fixtures: &[Fixture]) -> Vec<Row> {
    let c = &cfg.ceilings;
    let mut rows = Vec::new();
    for fx in fixtures {
        for (i, (spec, f)) in fx.fields.iter().enumerate() {
            for &kind in &cfg.atom_flavors {
                let name = atom_name(kind);
                rows.extend(Cell::new(CheckId::A4, fx, spec.to_string()).run("atomic", |cell| {
                    let s = &fx.space;
                    let dec = atomic_decompose(s, f, kind, fx.q()?)?;
                    let case = match dec.j_range {
                        Some((lo, hi)) => format!("{name} j={lo}..{hi} atoms={}", dec.atoms.len()),
                        None => format!("{name} constant"),
                    };
                    let mut worst_atom = 0.0f64;
                    let mut failures = 0usize;
                    for atom in &dec.atoms {
                        let rep = validate_atom(s, &atom.values, &atom.ball, dec.flavor)?;
                        worst_atom = worst_atom.max(rep.norm_ratio).max(rep.l1_ratio);
                        failures += usize::from(!rep.passed);
                    }
                    cell.push("atom ratio", &case, worst_atom, 1.0, failures == 0);
                    let part = dec.checks.iter().map(|l| l.partition_error).fold(0.0, f64::max);
                    let moment = dec.checks.iter().map(|l| l.moment_sum_error).fold(0.0, f64::max);
                    cell.at_most("partition", &case, part, 1e-12);
                    if kind.has_moment() {
                        cell.at_most("moment sum", &case, moment, 1e-12);
                    }
                    let (_, err) = reconstruct(s, &dec);
                    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
                    let grad_scale = s.lp_norm(&discrete_gradient(s, f), 1.0).max(f64::MIN_POSITIVE);
                    cell.at_most("recon sup", &case, err.sup / scale, 1e-9);
                    cell.at_most("recon l1", &case, err.l1 / s.lp_norm(f, 1.0).max(f64::MIN_POSITIVE), 1e-9);
                    cell.at_most("recon w11", &case, err.grad_l1 / grad_scale, 1e-9);
                    if dec.atoms.is_empty() {
                        return Ok(());
                    }
                    let nf1 = s.lp_norm(fx.nf(i)?, 1.0);
                    let norm = if kind == AtomKind::Ls { s.lp_norm(f, 1.0) + nf1 } else { nf1 };
                    cell.at_most("sum|lambda|/norm", &case, dec.l1_sum / norm, c.atomic_constant);
                    if let Some(rep) = &dec.residual_report {
                        cell.at_most("residual C", &case, rep.c_g, c.atomic_constant);
                    }
                    Ok(())
                }));
            }
        }
    }
    for &kind in &cfg.atom_flavors {
        let name = atom_name(kind);
        let prefix = format!("{name} ");
        rows.push(spread_rows(CheckId::A4, &rows, "sum|lambda|/norm", |r| r.case.starts_with(&prefix), name, c.spread));
    }
    rows
}

/// Seeded `H1` `(1, 2)`-atom: random values on a random tight ball, mean
/// removed, scaled so that `||a||_2 = mu(B)^(-1/2)`.
pub fn random_h1_atom(space: &MetricMeasureSpace, rng: &mut ChaCha8Rng) -> (Vec<f64>, hsdecomp_core::Ball) {
    let family = space.ball_family();
    loop {
        let i = rng.gen_range(0..family.len());
        let ball = family.get(i).to_ball();
        if ball.members.len() < 2 {
            continue;
        }
        let mut a = vec![0.0; space.len()];
        for &y in &ball.members {
            a[y] = rng.gen_range(-1.0..1.0);
        }
        let mean = space.integral(&a) / ball.mass;
        for &y in &ball.members {
            a[y] -= mean;
        }
        let norm = space.lp_norm(&a, 2.0);
        if norm == 0.0 {
            continue;
        }
        let scale = ball.mass.powf(-0.5) / norm;
        for v in &mut a {
            *v *= scale;
        }
        return (a, ball);
    }
}

fn check_a5(cfg: &ExperimentConfig, fixtures: &[Fixture]) -> Vec<Row> {
    let mut rows = Vec::new();
    for (k, fx) in fixtures.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
        for j in 0..cfg.atoms_per_fixture {
            let (a, ball) = random_h1_atom(&fx.space, &mut rng);
            rows.extend(Cell::new(CheckId::A5, fx, format!("atom{j}")).run("h1", |cell| {
                // Exact up to n = 128, a certified upper bound above.
                let norm = h1_atom_grand_maximal_check(&fx.space, &a, &ball, 2.0, GrandMode::Auto)?;
                let rep = validate_atom(&fx.space, &a, &ball, AtomFlavor { kind: AtomKind::H1, t: 2.0 })?;
                let case = format!(
                    "center={} r={} |B|={} {}",
                    ball.center,
                    ball.radius,
                    ball.members.len(),
                    if norm.exact { "exact" } else { "upper" }
                );
                let ok = rep.passed && norm.value <= cfg.ceilings.h1_atom;
                cell.push("||a+||_1", case, norm.value, cfg.ceilings.h1_atom, ok);
                Ok(())
            }));
        }
    }
    rows
}

fn check_a6(cfg: &ExperimentConfig, fixtures: &[Fixture]) -> Vec<Row> {
    let mut rows = Vec::new();
    for fx in fixtures.iter().filter(|f| f.space.len() <= cfg.grad_plus_max_n) {
        for (i, (spec, f)) in fx.fields.iter().enumerate() {
            rows.extend(Cell::new(CheckId::A6, fx, spec.to_string()).run("grad_plus", |cell| {
                let gp = grad_plus(&fx.space, f)?;
                let nf = fx.nf(i)?;
                let c_e = 1.0 + fx.space.max_degree() as f64;
                let case = format!("C_E={c_e} converged={}", gp.converged);
                let scaled: Vec<f64> = nf.iter().map(|v| c_e * v).collect();
                cell.at_most("gradplus/(C_E nf)", case, max_ratio(&gp.values, &scaled), 1.0 + 1e-9);
                if let Some(oracle) = &gp.oracle {
                    cell.at_most("oracle diff", "", rel_diff(&gp.values, oracle), 1e-6);
                }
                Ok(())
            }));
        }
    }
    rows
}

fn check_a7(cfg: &ExperimentConfig, fixtures: &[Fixture]) -> Vec<Row> {
    let c = &cfg.ceilings;
    let mut rows = Vec::new();
    for fx in fixtures {
        for (i, (spec, f)) in fx.fields.iter().enumerate() {
            rows.extend(Cell::new(CheckId::A7, fx, spec.to_string()).run("convolution", |cell| {
                let s = &fx.space;
                let nf = fx.nf(i)?;
                let radii: Vec<f64> = cfg.convolution_scales.iter().map(|k| k * s.spacing()).collect();
                let floor = 1e-12 * f.iter().fold(0.0f64, |m, v| m.max(v.abs())) / s.spacing();
                let mut errors = Vec::new();
                for (&k, &r) in cfg.convolution_scales.iter().zip(&radii) {
                    let (u, cover) = discrete_convolution(s, f, r)?;
                    let grad = discrete_gradient(s, &u);
                    cell.at_most("|grad u_r|/nf", format!("r={k}h K={}", cover.overlap), max_ratio_above(&grad, nf, floor), c.convolution);
                    let diff: Vec<f64> = u.iter().zip(f).map(|(a, b)| a - b).collect();
                    errors.push(s.lp_norm(&diff, 1.0));
                }
                let mstar = grad_maximal_star(s, f, &radii)?;
                cell.at_most("Mstar(grad f)/nf", "", max_ratio_above(&mstar, nf, floor), c.convolution);
                let floor = 1e-12 * s.lp_norm(f, 1.0);
                let growth = errors
                    .windows(2)
                    .map(|w| if w[1] <= floor { 0.0 } else if w[0] <= floor { f64::INFINITY } else { w[1] / w[0] })
                    .fold(0.0, f64::max);
                let case = errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" ");
                cell.at_most("||u_r-f||_1 growth", case, growth, 1.0 + c.convolution_slack);
                Ok(())
            }));
        }
    }
    rows
}

fn check_a8(cfg: &ExperimentConfig, fixtures: &[Fixture]) -> Vec<Row> {
    const TOL: f64 = 1e-9;
    const A: f64 = -2.5;
    const SHIFT: f64 = 1.75;
    let mut rows = Vec::new();
    for (k, fx) in fixtures.iter().enumerate() {
        let s = &fx.space;
        let n = s.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ (k as u64 + 1)));
        for (i, (spec, f)) in fx.fields.iter().enumerate() {
            rows.extend(Cell::new(CheckId::A8, fx, spec.to_string()).run("invariance", |cell| {
                let af: Vec<f64> = f.iter().map(|v| A * v).collect();
                let shifted: Vec<f64> = f.iter().map(|v| v + SHIFT).collect();
                let t = s.relabeled(&perm)?;
                let mut g = vec![0.0; n];
                for (old, &new) in perm.iter().enumerate() {
                    g[new] = f[old];
                }
                let unpermute = |v: &[f64]| -> Vec<f64> { (0..n).map(|old| v[perm[old]]).collect() };
                let plus = |x: &MetricMeasureSpace, v: &[f64]| grand_maximal(x, v, GrandMode::Auto);
                type Op<'a> = (&'a str, bool, Box<dyn Fn(&MetricMeasureSpace, &[f64]) -> hsdecomp_core::Result<ScalarField> + 'a>);
                let ops: Vec<Op> = vec![
                    ("N", true, Box::new(sobolev_sharp)),
                    ("star", true, Box::new(calderon_star)),
                    ("plus", false, Box::new(plus)),
                    ("M", false, Box::new(hl_maximal)),
                ];
                for (name, translation, op) in &ops {
                    let base: Vec<f64> = match *name {
                        "N" => fx.nf(i)?.to_vec(),
                        "star" => fx.star(i)?.to_vec(),
                        _ => op(s, f)?.into_vec(),
                    };
                    let scaled: Vec<f64> = base.iter().map(|v| A.abs() * v).collect();
                    cell.at_most(&format!("{name} scaling"), "", rel_diff(&op(s, &af)?, &scaled), TOL);
                    if *translation {
                        cell.at_most(&format!("{name} translation"), "", rel_diff(&op(s, &shifted)?, &base), TOL);
                    }
                    cell.at_most(&format!("{name} relabeling"), "", rel_diff(&unpermute(&op(&t, &g)?), &base), TOL);
                }
                if is_constant(f) {
                    return Ok(());
                }
                let q = fx.q()?;
                let ctx = CzContext::new(s, f, q, CzFlavor::Homogeneous, GrandMode::Auto)?;
                let grid = alpha_grid(ctx.level(), cfg.alpha_points);
                let alpha = grid[grid.len() / 2];
                const B: f64 = 3.0;
                let bf: Vec<f64> = f.iter().map(|v| B * v).collect();
                let (d1, d2) = (
                    ctx.decompose(alpha)?,
                    CzContext::new(s, &bf, q, CzFlavor::Homogeneous, GrandMode::Auto)?.decompose(B * alpha)?,
                );
                let mut cz = if d1.b.len() == d2.b.len() { 0.0 } else { f64::INFINITY };
                let sg: Vec<f64> = d1.g.iter().map(|v| B * v).collect();
                cz = f64::max(cz, rel_diff(&d2.g, &sg));
                for (b1, b2) in d1.b.iter().zip(&d2.b) {
                    let sb: Vec<f64> = b1.iter().map(|v| B * v).collect();
                    cz = cz.max((0..n).map(|x| (b2[x] - sb[x]).abs()).fold(0.0, f64::max) / (B * f.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
                }
                cell.at_most("CZ scale equivariance", format!("alpha={alpha}"), cz, TOL);

                let two: Vec<f64> = f.iter().map(|v| 2.0 * v).collect();
                let (a1, a2) = (atomic_decompose(s, f, AtomKind::HsMoment, q)?, atomic_decompose(s, &two, AtomKind::HsMoment, q)?);
                let shifted_range = a1.j_range.map(|(lo, hi)| (lo + 1, hi + 1)) == a2.j_range;
                let mut atomic = if shifted_range && a1.atoms.len() == a2.atoms.len() { 0.0 } else { f64::INFINITY };
                for (x, y) in a1.atoms.iter().zip(&a2.atoms) {
                    atomic = atomic.max((y.lambda - 2.0 * x.lambda).abs() / x.lambda.abs());
                    atomic = atomic.max(rel_diff(&y.values, &x.values));
                    if y.level != x.level + 1 {
                        atomic = f64::INFINITY;
                    }
                }
                cell.at_most("atomic j-shift", format!("atoms={}", a1.atoms.len()), atomic, TOL);
                Ok(())
            }));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_ignores_zeros() {
        assert_eq!(spread([0.0, 2.0, 8.0]), Some(4.0));
        assert_eq!(spread([0.0, 3.0]), None);
        assert_eq!(spread([]), None);
    }

    #[test]
    fn max_ratio_conventions() {
        assert_eq!(max_ratio(&[0.0, 1.0], &[0.0, 2.0]), 0.5);
        assert_eq!(max_ratio(&[1.0], &[0.0]), f64::INFINITY);
    }

    #[test]
    fn empty_check_list_passes() {
        let cfg = ExperimentConfig {
            checks: Vec::new(),
            ..ExperimentConfig::p4_only()
        };
        let (report, _) = run_suite(&cfg).unwrap();
        assert!(report.checks.is_empty());
        assert!(report.passed());
    }

    #[test]
    fn inadmissible_q_fails_rows_without_aborting() {
        let cfg = ExperimentConfig {
            q: Some(0.01),
            checks: vec![CheckId::A1, CheckId::A3],
            ..ExperimentConfig::p4_only()
        };
        let (report, _) = run_suite(&cfg).unwrap();
        assert!(report.check(CheckId::A1).unwrap().passed);
        let a3 = report.check(CheckId::A3).unwrap();
        assert!(!a3.passed);
        assert!(a3.failed_rows().all(|r| r.error.as_deref().is_some_and(|e| e.contains("precondition"))));
    }

    #[test]
    fn random_atoms_are_h1_atoms() {
        let s = build_space(&SpaceSpec::Grid { k: 4 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (a, ball) = random_h1_atom(&s, &mut rng);
            let rep = validate_atom(&s, &a, &ball, AtomFlavor { kind: AtomKind::H1, t: 2.0 }).unwrap();
            assert!(rep.passed);
            assert!((rep.norm_ratio - 1.0).abs() < 1e-12);
        }
    }
}
