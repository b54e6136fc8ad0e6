use nalgebra::DVector;
use proptest::prelude::*;

use ratiodual::dual::{evaluate, total_complementary};
use ratiodual::io::{generate, parse_instance, serialize_instance};
use ratiodual::solver::find_start;
use ratiodual::{DualPoint, FractionalProgram, GenOptions, PrimalPoint};

fn program(seed: u64, n: usize, m: usize) -> FractionalProgram {
    FractionalProgram::validate(
        generate(&GenOptions {
            n,
            m,
            seed,
            conditioning: 1.0,
        })
        .unwrap(),
    )
    .unwrap()
}

fn instance() -> impl Strategy<Value = FractionalProgram> {
    (0u64..5_000, 1usize..=6, 1usize..=4).prop_map(|(seed, n, m)| program(seed, n, m))
}

fn mu_at(p: &FractionalProgram, t: f64) -> f64 {
    let iv = p.mu_interval();
    iv.mu0 + t * (iv.mu_max - iv.mu0)
}

/// Point `center + s * dir` with `s` chosen so that `h = level`, scaled by
/// `r` in `[0, 1]`; feasible for `{h >= level}` up to rounding.
fn inside(p: &FractionalProgram, dir: &[f64], r: f64, level: f64) -> PrimalPoint {
    let d = DVector::from_iterator(p.dim(), dir.iter().copied().cycle().take(p.dim()));
    let d = if d.norm() < 1e-6 {
        DVector::from_element(p.dim(), 1.0)
    } else {
        d
    };
    let curvature = d.dot(&(-p.h() * &d));
    let room = (p.h_max() - level).max(0.0);
    let s = (2.0 * room / curvature).sqrt() * r * (1.0 - 1e-9);
    PrimalPoint::new(p.center() + d * s)
}

fn any_point(n_max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n_max)
}

/// Interior dual point at least as large as the start point.
fn interior(p: &FractionalProgram, mu: f64, dv: f64, ds: f64) -> DualPoint {
    let s = find_start(p, mu).expect("interior start").point;
    DualPoint::new(mu, s.varsigma + dv, s.sigma + ds)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quartic_term_is_nonnegative(p in instance(), x in any_point(6)) {
        let x = PrimalPoint::from_slice(&x[..p.dim()]);
        prop_assert!(p.components(&x).unwrap().g >= 0.0);
    }

    #[test]
    fn subproblem_objective_grows_with_mu(
        p in instance(), dir in any_point(6), r in 0.0f64..1.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = (mu_at(&p, t1.min(t2)), mu_at(&p, t1.max(t2)));
        let x = inside(&p, &dir, r, 1.0 / hi);
        prop_assert!(p.eval_p_mu(lo, &x).unwrap() <= p.eval_p_mu(hi, &x).unwrap());
    }

    #[test]
    fn subproblem_sets_are_nested(p in instance(), dir in any_point(6), r in 0.0f64..1.2, t in 0.0f64..1.0) {
        let mu = mu_at(&p, t);
        let x = inside(&p, &dir, r, 1.0 / mu);
        if p.is_feasible_mu(mu, &x).unwrap() {
            prop_assert!(p.is_feasible(&x).unwrap());
        }
    }

    #[test]
    fn ratio_equals_subproblem_at_matching_mu(p in instance(), dir in any_point(6), r in 0.0f64..1.0) {
        let x = inside(&p, &dir, r, p.delta());
        let mu = 1.0 / p.h_value(&x).unwrap();
        let a = p.eval_p0(&x).unwrap();
        let b = p.eval_p_mu(mu, &x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn complementary_function_bounds_the_dual(
        p in instance(), x in any_point(6), t in 0.0f64..1.0, dv in 0.0f64..10.0, ds in 0.0f64..10.0,
    ) {
        let d = interior(&p, mu_at(&p, t), dv, ds);
        let e = evaluate(&p, &d).unwrap();
        let xi = total_complementary(&p, &PrimalPoint::from_slice(&x[..p.dim()]), &d).unwrap();
        prop_assert!(xi >= e.value - 1e-9 * (1.0 + e.value.abs()));
        let at_candidate = total_complementary(&p, &e.x_candidate, &d).unwrap();
        prop_assert!((at_candidate - e.value).abs() <= 1e-9 * (1.0 + e.value.abs()));
    }

    #[test]
    fn linear_solve_residual_is_small(p in instance(), t in 0.0f64..1.0, dv in 0.0f64..10.0, ds in 0.0f64..10.0) {
        let e = evaluate(&p, &interior(&p, mu_at(&p, t), dv, ds)).unwrap();
        let scale = e.factorization.g.amax() * e.x_candidate.as_vector().amax() + e.rhs_norm;
        prop_assert!(e.residual <= 1e-10 * (1.0 + scale));
    }

    #[test]
    fn weak_duality(
        p in instance(), dir in any_point(6), r in 0.0f64..1.0, t in 0.0f64..1.0,
        dv in 0.0f64..10.0, ds in 0.0f64..10.0,
    ) {
        let mu = mu_at(&p, t);
        let dual = evaluate(&p, &interior(&p, mu, dv, ds)).unwrap().value;
        let primal = p.eval_p_mu(mu, &inside(&p, &dir, r, 1.0 / mu)).unwrap();
        prop_assert!(dual <= primal + 1e-9 * (1.0 + primal.abs()));
    }

    #[test]
    fn instance_round_trip(seed in any::<u64>(), n in 1usize..=6, m in 1usize..=6) {
        let data = generate(&GenOptions { n, m, seed, conditioning: 1.0 }).unwrap();
        let text = serialize_instance(&data).unwrap();
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(back.data(), &data);
        prop_assert_eq!(serialize_instance(back.data()).unwrap(), text);
    }
}
