use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hsdecomp::fields::{generate, FieldSpec};
use hsdecomp::plotdata::emit_plotdata;
use hsdecomp::report::{summary_lines, write_report};
use hsdecomp::{run_suite, ExperimentConfig};
use hsdecomp_core::atomic::{atomic_decompose_with, AtomKind};
use hsdecomp_core::czd::{verify_cz, CzContext, CzFlavor};
use hsdecomp_core::hajlasz::hajlasz_norm_lp;
use hsdecomp_core::io::{read_field, read_space, write_field, write_space};
use hsdecomp_core::maxfn::{
    calderon_star, grad_maximal_star, grad_plus, grand_maximal, hl_maximal, hl_maximal_q, sobolev_sharp, GrandMode,
};
use hsdecomp_core::whitney::{partition_of_unity, whitney_cover};
use hsdecomp_core::{build_space, doubling_profile, MetricMeasureSpace, ScalarField, SpaceSpec};
use serde_json::json;

#[derive(Parser)]
#[command(name = "hsdecomp", version, about = "Maximal functions, Hajłasz norms and CZ/atomic decompositions on finite metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the acceptance suite (all of A1-A8 unless the config restricts it).
    Run {
        /// Config JSON; omitted means the default matrix.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-check scaling CSVs under OUT/plot.
        #[arg(long)]
        plot: bool,
    },
    /// Write a generated space (and optionally a field) to disk.
    GenSpace {
        /// e.g. path(4,1), cycle(8), grid(4x4), cloud(64,7)
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
        /// e.g. linear, bump(1), random-lipschitz(2), indicator-smoothed
        #[arg(long, requires = "field_out")]
        field: Option<String>,
        #[arg(long)]
        field_out: Option<PathBuf>,
    },
    /// Evaluate one maximal operator.
    Maxfn {
        #[arg(long, value_enum)]
        op: Op,
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        /// Comma-separated radii for `ustar`.
        #[arg(long)]
        radii: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact Hajłasz norm with its certificate.
    Hajlasz {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Whitney cover of a point set.
    Whitney {
        #[arg(long)]
        space: PathBuf,
        /// Comma-separated point ids.
        #[arg(long)]
        omega: String,
        #[arg(long)]
        out: PathBuf,
        /// Write chi_<i>.csv partition-of-unity fields here.
        #[arg(long)]
        pu_dir: Option<PathBuf>,
    },
    /// Calderón–Zygmund decomposition at one height.
    Czd {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// homog, tilde or m11
        #[arg(long)]
        flavor: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dyadic atomic decomposition.
    Atomic {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// hs-moment, hs-size, hs-nonhomog or ls
        #[arg(long)]
        flavor: String,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    /// Hardy–Littlewood maximal function.
    M,
    /// `M_q`.
    Mq,
    /// Sobolev sharp maximal function `N`.
    N,
    /// Calderón maximal function `f★`.
    Star,
    /// `(∇f)⁺`.
    Plus,
    /// Grand maximal function `f⁺`.
    Grand,
    /// `M★(∇f)` over the given radii.
    Ustar,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Tent,
    Lp,
    Auto,
}

impl From<Mode> for GrandMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Tent => GrandMode::Tent,
            Mode::Lp => GrandMode::ExactLp,
            Mode::Auto => GrandMode::Auto,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(space: &Path, field: &Path) -> Result<(MetricMeasureSpace, ScalarField)> {
    let s = read_space(space).with_context(|| format!("reading space {}", space.display()))?;
    let f = read_field(field, s.len()).with_context(|| format!("reading field {}", field.display()))?;
    Ok((s, f))
}

fn q_or_default(space: &MetricMeasureSpace, q: Option<f64>) -> f64 {
    q.unwrap_or_else(|| doubling_profile(space).default_q())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

/// `{id: value}` for the nonzero entries.
fn sparse(v: &[f64]) -> BTreeMap<usize, f64> {
    v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).collect()
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { config, out, plot } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            let (report, timings) = run_suite(&cfg)?;
            write_report(&out, &report, &timings)?;
            if plot {
                emit_plotdata(&report, &out.join("plot"))?;
            }
            for line in summary_lines(&report, &timings) {
                println!("{line}");
            }
            return Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::GenSpace { spec, out, field, field_out } => {
            let spec: SpaceSpec = spec.parse()?;
            let s = build_space(&spec)?;
            write_space(&out, &s)?;
            if let (Some(name), Some(path)) = (field, field_out) {
                let f: FieldSpec = name.parse()?;
                write_field(path, &generate(&s, f)?)?;
            }
        }
        Command::Maxfn { op, space, field, q, mode, radii, out } => {
            let (s, f) = load(&space, &field)?;
            let values = match op {
                Op::M => hl_maximal(&s, &f)?,
                Op::Mq => hl_maximal_q(&s, &f, q_or_default(&s, q))?,
                Op::N => sobolev_sharp(&s, &f)?,
                Op::Star => calderon_star(&s, &f)?,
                Op::Plus => grad_plus(&s, &f)?.values,
                Op::Grand => grand_maximal(&s, &f, mode.into())?,
                Op::Ustar => {
                    let Some(radii) = radii else { bail!("--radii is required for ustar") };
                    let radii = radii
                        .split(',')
                        .map(|r| r.trim().parse::<f64>().with_context(|| format!("bad radius `{r}`")))
                        .collect::<Result<Vec<_>>>()?;
                    grad_maximal_star(&s, &f, &radii)?
                }
            };
            write_field(&out, &values)?;
        }
        Command::Hajlasz { space, field, out } => {
            let (s, f) = load(&space, &field)?;
            let c = hajlasz_norm_lp(&s, &f)?;
            write_json(
                &out,
                &json!({ "value": c.value, "g": c.g, "slack": c.slack, "dual_bound": c.dual_bound, "rounds": c.rounds }),
            )?;
        }
        Command::Whitney { space, omega, out, pu_dir } => {
            let s = read_space(&space)?;
            let omega = omega
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad point id `{t}`")))
                .collect::<Result<Vec<_>>>()?;
            let cover = whitney_cover(&s, &omega)?;
            write_json(&out, &json!({ "c1": cover.c1, "centers": cover.centers, "radii": cover.radii, "K": cover.overlap }))?;
            if let Some(dir) = pu_dir {
                std::fs::create_dir_all(&dir)?;
                let pu = partition_of_unity(&s, &cover)?;
                for (i, chi) in pu.chi.iter().enumerate() {
                    write_field(dir.join(format!("chi_{i}.csv")), chi)?;
                }
            }
        }
        Command::Czd { space, field, flavor, alpha, q, mode, out } => {
            let (s, f) = load(&space, &field)?;
            let flavor: CzFlavor = flavor.parse()?;
            let ctx = CzContext::new(&s, &f, q_or_default(&s, q), flavor, mode.into())?;
            let dec = ctx.decompose(alpha)?;
            let report = verify_cz(&s, &dec);
            let b: Vec<_> = dec.b.iter().map(|b| sparse(b)).collect();
            write_json(
                &out,
                &json!({
                    "alpha": dec.alpha,
                    "q": dec.q,
                    "flavor": dec.flavor,
                    "grand_mode": dec.grand_mode,
                    "cover": { "c1": dec.cover.c1, "centers": dec.cover.centers, "radii": dec.cover.radii, "K": dec.cover.overlap },
                    "c": dec.c,
                    "b": b,
                    "g": dec.g,
                    "selected": dec.selected,
                    "report": report,
                }),
            )?;
        }
        Command::Atomic { space, field, flavor, q, mode, out } => {
            let (s, f) = load(&space, &field)?;
            let kind: AtomKind = flavor.parse()?;
            let dec = atomic_decompose_with(&s, &f, kind, q_or_default(&s, q), mode.into())?;
            let atoms: Vec<_> = dec
                .atoms
                .iter()
                .map(|a| {
                    json!({
                        "level": a.level,
                        "ball": { "center": a.ball.center, "radius": a.ball.radius, "members": a.ball.members },
                        "lambda": a.lambda,
                        "values": sparse(&a.values),
                    })
                })
                .collect();
            write_json(
                &out,
                &json!({
                    "flavor": dec.flavor,
                    "q": dec.q,
                    "gamma": dec.gamma,
                    "j_min": dec.j_range.map(|r| r.0),
                    "j_max": dec.j_range.map(|r| r.1),
                    "atoms": atoms,
                    "residual": dec.residual,
                    "l1_sum": dec.l1_sum,
                    "integrand_l1": dec.integrand_l1,
                    "checks": dec.checks,
                    "residual_report": dec.residual_report,
                }),
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
