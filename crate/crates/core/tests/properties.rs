//! Randomized invariants over small spaces and fields.

use hsdecomp_core::atomic::{atomic_decompose, reconstruct, validate_atom, AtomKind};
use hsdecomp_core::czd::{alpha_grid, verify_cz, CzContext, CzFlavor};
use hsdecomp_core::hajlasz::{hajlasz_norm_lp, mn_constant_with};
use hsdecomp_core::io::{field_from_csv, field_to_csv};
use hsdecomp_core::maxfn::{
    calderon_star, discrete_convolution, grad_maximal_star, grand_maximal, grand_maximal_upper, hl_maximal, hl_maximal_q,
    sobolev_sharp, GrandMode,
};
use hsdecomp_core::whitney::{distance_to_set, partition_of_unity, whitney_cover};
use hsdecomp_core::{
    ball_average, build_space, discrete_gradient, doubling_profile, MetricMeasureSpace, SpaceSpec,
};
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = SpaceSpec> {
    prop_oneof![
        (3usize..9, 0.25f64..2.0).prop_map(|(n, spacing)| SpaceSpec::Path { n, spacing }),
        (4usize..10).prop_map(|n| SpaceSpec::Cycle { n }),
        (2usize..4).prop_map(|k| SpaceSpec::Grid { k }),
        (6usize..20, any::<u64>()).prop_map(|(n, seed)| SpaceSpec::Cloud { n, seed }),
    ]
}

fn space_and_field() -> impl Strategy<Value = (MetricMeasureSpace, Vec<f64>)> {
    spec().prop_flat_map(|s| {
        let space = build_space(&s).unwrap();
        let n = space.len();
        (Just(space), prop::collection::vec(-5.0f64..5.0, n))
    })
}

fn two_fields() -> impl Strategy<Value = (MetricMeasureSpace, Vec<f64>, Vec<f64>)> {
    space_and_field().prop_flat_map(|(s, f)| {
        let n = s.len();
        (Just(s), Just(f), prop::collection::vec(-5.0f64..5.0, n))
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tight_balls_dominate_real_radii((s, f) in space_and_field(), radii in prop::collection::vec(0.0f64..1.0, 8)) {
        let nf = sobolev_sharp(&s, &f).unwrap();
        let diam = s.diameter();
        for c in 0..s.len() {
            for &t in &radii {
                let r = t * 1.5 * diam;
                let ball = s.ball(c, r);
                if ball.members.len() < 2 || r <= 0.0 {
                    continue;
                }
                let avg = ball_average(&s, &f, &ball);
                let osc: f64 = ball.members.iter().map(|&y| (f[y] - avg).abs() * s.mu(y)).sum::<f64>() / ball.mass;
                for &y in &ball.members {
                    prop_assert!(osc / r <= nf[y] * (1.0 + 1e-12) + 1e-300);
                }
            }
        }
    }

    #[test]
    fn ball_average_is_linear_and_monotone((s, f, g) in two_fields(), a in -3.0f64..3.0) {
        let h: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
        let upper: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x.max(*y)).collect();
        for ball in s.ball_family().iter().map(|b| b.to_ball()) {
            let (af, ag) = (ball_average(&s, &f, &ball), ball_average(&s, &g, &ball));
            prop_assert!(close(ball_average(&s, &h, &ball), a * af + ag, 1e-12));
            prop_assert!(ball_average(&s, &upper, &ball) >= af.max(ag) - 1e-12);
        }
    }

    #[test]
    fn doubling_profile_ignores_labels(sp in spec(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let s = build_space(&sp).unwrap();
        let mut perm: Vec<usize> = (0..s.len()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let t = s.relabeled(&perm).unwrap();
        let (a, b) = (doubling_profile(&s), doubling_profile(&t));
        prop_assert!(close(a.c_d, b.c_d, 1e-12));
        prop_assert!(close(a.s, b.s, 1e-12));
    }

    #[test]
    fn gradient_is_affine_covariant((s, f) in space_and_field(), a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let g = discrete_gradient(&s, &f);
        let h: Vec<f64> = f.iter().map(|v| a * v + b).collect();
        for (x, y) in discrete_gradient(&s, &h).iter().zip(g.iter()) {
            prop_assert!(close(*x, a.abs() * y, 1e-12));
        }
    }

    #[test]
    fn sharp_and_star_are_equivalent((s, f) in space_and_field()) {
        let nf = sobolev_sharp(&s, &f).unwrap();
        let star = calderon_star(&s, &f).unwrap();
        let c_d = doubling_profile(&s).c_d;
        for x in 0..s.len() {
            prop_assert!(nf[x] <= 2.0 * star[x] * (1.0 + 1e-12));
            prop_assert!(star[x] <= (1.0 + 16.0 * c_d * c_d) * nf[x] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn maximal_operators_are_sublinear((s, f, g) in two_fields()) {
        let h: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
        type Op = fn(&MetricMeasureSpace, &[f64]) -> hsdecomp_core::Result<hsdecomp_core::ScalarField>;
        let ops: [Op; 3] = [hl_maximal, sobolev_sharp, calderon_star];
        for op in ops {
            let (a, b, c) = (op(&s, &f).unwrap(), op(&s, &g).unwrap(), op(&s, &h).unwrap());
            for x in 0..s.len() {
                prop_assert!(c[x] <= (a[x] + b[x]) * (1.0 + 1e-12) + 1e-12);
            }
        }
    }

    #[test]
    fn operators_are_homogeneous((s, f) in space_and_field(), a in -4.0f64..4.0, shift in -4.0f64..4.0) {
        let af: Vec<f64> = f.iter().map(|v| a * v).collect();
        let r = 2.0 * s.spacing();
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = vec![
            (hl_maximal(&s, &f).unwrap().into_vec(), hl_maximal(&s, &af).unwrap().into_vec()),
            (hl_maximal_q(&s, &f, 0.5).unwrap().into_vec(), hl_maximal_q(&s, &af, 0.5).unwrap().into_vec()),
            (sobolev_sharp(&s, &f).unwrap().into_vec(), sobolev_sharp(&s, &af).unwrap().into_vec()),
            (calderon_star(&s, &f).unwrap().into_vec(), calderon_star(&s, &af).unwrap().into_vec()),
            (grand_maximal(&s, &f, GrandMode::Tent).unwrap().into_vec(), grand_maximal(&s, &af, GrandMode::Tent).unwrap().into_vec()),
            (grad_maximal_star(&s, &f, &[r]).unwrap().into_vec(), grad_maximal_star(&s, &af, &[r]).unwrap().into_vec()),
        ];
        for (x, y) in pairs {
            for (u, v) in x.iter().zip(&y) {
                prop_assert!(close(*v, a.abs() * u, 1e-9));
            }
        }
        let (u, _) = discrete_convolution(&s, &f, r).unwrap();
        let (v, _) = discrete_convolution(&s, &af, r).unwrap();
        for (p, q) in u.iter().zip(v.iter()) {
            prop_assert!(close(*q, a * p, 1e-9));
        }
        // Constants are annihilated by the oscillation operators.
        let c = vec![shift; s.len()];
        prop_assert!(sobolev_sharp(&s, &c).unwrap().iter().all(|v| v.abs() <= 1e-12));
        prop_assert!(calderon_star(&s, &c).unwrap().iter().all(|v| v.abs() <= 1e-12));
        prop_assert!(grad_maximal_star(&s, &c, &[r]).unwrap().iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn whitney_cover_invariants((s, f) in space_and_field()) {
        let omega: Vec<usize> = (0..s.len()).filter(|&x| f[x] > 0.0).collect();
        prop_assume!(!omega.is_empty() && omega.len() < s.len());
        let cover = whitney_cover(&s, &omega).unwrap();
        let dist_f = distance_to_set(&s, &cover.complement);
        let mut taken = vec![false; s.len()];
        for b in &cover.underlying {
            for &y in &b.members {
                prop_assert!(!taken[y]);
                taken[y] = true;
            }
        }
        for (i, &c) in cover.centers.iter().enumerate() {
            prop_assert!(s.ball(c, 2.0 * cover.radii[i]).members.iter().any(|y| cover.complement.contains(y)));
            prop_assert_eq!(cover.radii[i], 0.5 * dist_f[c]);
        }
        for &x in &omega {
            let idx: Vec<usize> = (0..cover.len()).filter(|&i| cover.covering[i].contains(x)).collect();
            prop_assert!(!idx.is_empty());
            for &i in &idx {
                for &k in &idx {
                    prop_assert!(cover.radii[k] <= 3.0 * cover.radii[i] * (1.0 + 1e-12));
                }
            }
        }
        let pu = partition_of_unity(&s, &cover).unwrap();
        for x in 0..s.len() {
            let sum: f64 = pu.chi.iter().map(|c| c[x]).sum();
            let expect = if omega.contains(&x) { 1.0 } else { 0.0 };
            prop_assert!((sum - expect).abs() <= 1e-12);
        }
        for (i, chi) in pu.chi.iter().enumerate() {
            prop_assert!(chi.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!(chi.support().into_iter().all(|y| cover.covering[i].contains(y)));
        }
    }

    #[test]
    fn cz_reconstructs_and_stays_in_balls((s, f) in space_and_field(), pick in 0usize..5, fl in 0usize..3) {
        let flavor = [CzFlavor::Homogeneous, CzFlavor::Tilde, CzFlavor::M11][fl];
        let q = doubling_profile(&s).default_q();
        let ctx = CzContext::new(&s, &f, q, flavor, GrandMode::Tent).unwrap();
        let grid = alpha_grid(ctx.level(), 5);
        prop_assume!(!grid.is_empty());
        let alpha = grid[pick.min(grid.len() - 1)];
        let dec = match ctx.decompose(alpha) {
            Ok(d) => d,
            Err(hsdecomp_core::Error::ComplementEmpty) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let rep = verify_cz(&s, &dec);
        prop_assert!(rep.relative_residual <= 1e-9);
        prop_assert!(rep.support_ok);
        prop_assert!(rep.overlap <= 64);
        if flavor == CzFlavor::M11 {
            prop_assert!(rep.center_ratio.unwrap_or(0.0) <= 2.0);
            prop_assert!(rep.star_ratio.unwrap_or(0.0) <= rep.c_q);
        }
    }

    #[test]
    fn atoms_are_admissible_and_reconstruct((s, f) in space_and_field(), k in 0usize..4) {
        let kind = [AtomKind::HsMoment, AtomKind::HsSize, AtomKind::HsNonhomog, AtomKind::Ls][k];
        let q = doubling_profile(&s).default_q();
        let dec = hsdecomp_core::atomic::atomic_decompose_with(&s, &f, kind, q, GrandMode::Tent).unwrap();
        for atom in &dec.atoms {
            let rep = validate_atom(&s, &atom.values, &atom.ball, dec.flavor).unwrap();
            prop_assert!(rep.passed, "{:?}", rep);
        }
        for c in &dec.checks {
            prop_assert!(c.partition_error <= 1e-12);
            prop_assert!(c.moment_sum_error <= 1e-12);
        }
        let (_, err) = reconstruct(&s, &dec);
        let scale = f.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err.sup <= 1e-9 * scale);
        prop_assert!(err.l1 <= 1e-9 * scale * s.total_measure());
        prop_assert!(err.grad_l1 <= 1e-9 * scale * s.total_measure() / s.spacing());
    }

    #[test]
    fn field_csv_round_trips(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..40)) {
        let mut buf = Vec::new();
        field_to_csv(&mut buf, &values).unwrap();
        let back = field_from_csv(&buf[..], values.len()).unwrap();
        prop_assert_eq!(back.values(), &values[..]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tent_exact_and_upper_are_ordered((s, f) in space_and_field()) {
        // The sparse copy exercises the support-reduced programs and bounds.
        let sparse: Vec<f64> = f.iter().enumerate().map(|(i, &v)| if i % 3 == 0 { v } else { 0.0 }).collect();
        for g in [&f, &sparse] {
            let tent = grand_maximal(&s, g, GrandMode::Tent).unwrap();
            let exact = grand_maximal(&s, g, GrandMode::ExactLp).unwrap();
            let upper = grand_maximal_upper(&s, g).unwrap();
            for x in 0..s.len() {
                prop_assert!(tent[x] <= exact[x] * (1.0 + 1e-9) + 1e-12);
                prop_assert!(exact[x] <= upper[x] * (1.0 + 1e-9) + 1e-12);
            }
        }
    }

    #[test]
    fn hajlasz_value_is_sandwiched((s, f) in space_and_field()) {
        let cert = hajlasz_norm_lp(&s, &f).unwrap();
        let nf = sobolev_sharp(&s, &f).unwrap();
        let mn = mn_constant_with(&s, &f, &nf);
        let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs())) / s.spacing();
        prop_assert!(cert.g.iter().all(|&v| v >= 0.0));
        prop_assert!(cert.slack >= -1e-9 * scale.max(1.0));
        prop_assert!(cert.dual_bound <= cert.value * (1.0 + 1e-9) + 1e-12);
        prop_assert!(cert.value <= 2.0 * mn.constant * s.lp_norm(&nf, 1.0) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn doubling_a_field_shifts_atom_levels((s, f) in space_and_field()) {
        let q = doubling_profile(&s).default_q();
        let a = atomic_decompose(&s, &f, AtomKind::HsMoment, q).unwrap();
        let f2: Vec<f64> = f.iter().map(|v| 2.0 * v).collect();
        let b = atomic_decompose(&s, &f2, AtomKind::HsMoment, q).unwrap();
        prop_assert_eq!(a.atoms.len(), b.atoms.len());
        prop_assert_eq!(a.j_range.map(|(l, h)| (l + 1, h + 1)), b.j_range);
        for (x, y) in a.atoms.iter().zip(&b.atoms) {
            prop_assert!(close(y.lambda, 2.0 * x.lambda, 1e-9));
            for (u, v) in x.values.iter().zip(y.values.iter()) {
                prop_assert!((u - v).abs() <= 1e-9 * x.values.sup_norm().max(1e-300));
            }
        }
    }
}
