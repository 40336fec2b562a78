use eqsmooth_core::game::{simulate, utility, AttackSpec, DefenseSpec};
use eqsmooth_core::geometry::{fgm_direction, halfspace_of, in_robust_set, phi_n, project_to_ball};
use eqsmooth_core::linalg::{norm, scaled};
use eqsmooth_core::oracle::oracle_solve;
use eqsmooth_core::rng::{seeded, uniform_in_ball};
use eqsmooth_core::solve::{solve, surrogate, surrogate_objective, SolveConfig};
use eqsmooth_core::{Budget, Dataset, LinearizationRecord};
use proptest::prelude::*;

fn nonzero_f() -> impl Strategy<Value = f64> {
    prop_oneof![0.01f64..3.0, -3.0f64..-0.01]
}

fn record(dim: usize) -> impl Strategy<Value = LinearizationRecord> {
    (nonzero_f(), prop::collection::vec(-2.0f64..2.0, dim))
        .prop_filter("nonzero gradient", |(_, g)| norm(g) > 1e-3)
        .prop_map(|(f, g)| LinearizationRecord::new(f, g))
}

fn dataset(dim: usize, max_n: usize) -> impl Strategy<Value = Dataset> {
    (prop::collection::vec(record(dim), 1..=max_n), 0.05f64..1.0)
        .prop_map(move |(rs, eps)| Dataset::new(rs, Budget::new(eps, dim).unwrap()).unwrap())
}

fn ball_point(dim: usize, eps: f64, seed: u64) -> Vec<f64> {
    uniform_in_ball(&mut seeded(seed), dim, eps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn positive_scaling_changes_nothing(
        r in record(3), k in 0.01f64..100.0, eps in 0.05f64..1.0, seed in any::<u64>()
    ) {
        let b = Budget::new(eps, 3).unwrap();
        let scaled_rec = LinearizationRecord::new(k * r.f_value, scaled(&r.gradient, k));
        let v = ball_point(3, eps, seed);
        let h1 = halfspace_of(&r, &b).unwrap();
        let h2 = halfspace_of(&scaled_rec, &b).unwrap();
        // membership can only differ when v sits on the boundary to round-off
        if h1.margin(&v).abs() > 1e-9 * norm(&h1.c) {
            prop_assert_eq!(in_robust_set(&v, &h1, &b).unwrap(), in_robust_set(&v, &h2, &b).unwrap());
        }
        let a1 = fgm_direction(&r, &b).unwrap();
        let a2 = fgm_direction(&scaled_rec, &b).unwrap();
        for (x, y) in a1.iter().zip(&a2) {
            prop_assert!((x - y).abs() <= 1e-12 * eps);
        }
    }

    #[test]
    fn fgm_has_norm_epsilon(r in record(4), eps in 0.01f64..5.0) {
        let b = Budget::new(eps, 4).unwrap();
        let a = fgm_direction(&r, &b).unwrap();
        prop_assert!((norm(&a) - eps).abs() <= 1e-9 * eps);
    }

    #[test]
    fn anti_fgm_is_always_robust(r in record(3), eps in 0.01f64..2.0) {
        let b = Budget::new(eps, 3).unwrap();
        let anti = scaled(&fgm_direction(&r, &b).unwrap(), -1.0);
        let h = halfspace_of(&r, &b).unwrap();
        // cᵀ(ε ĉ) + b = |f| exactly in real arithmetic
        prop_assert!(h.margin(&anti) >= -1e-12 * (1.0 + r.f_value.abs()));
    }

    #[test]
    fn full_ball_iff_confident(r in record(2), eps in 0.01f64..2.0, seed in any::<u64>()) {
        let b = Budget::new(eps, 2).unwrap();
        let h = halfspace_of(&r, &b).unwrap();
        let confident = r.f_value.abs() >= 2.0 * eps * norm(&r.gradient);
        prop_assert_eq!(h.covers_ball(eps), confident);
        if confident {
            let v = ball_point(2, eps, seed);
            prop_assert!(in_robust_set(&v, &h, &b).unwrap());
        }
    }

    #[test]
    fn phi_n_is_a_multiple_of_one_over_n(ds in dataset(2, 15), seed in any::<u64>()) {
        let v = ball_point(2, ds.budget().epsilon(), seed);
        let p = phi_n(&v, &ds).unwrap();
        let k = p * ds.len() as f64;
        prop_assert_eq!(k, k.round());
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert_eq!(p, ds.satisfied_count(&v) as f64 / ds.len() as f64);
    }

    #[test]
    fn surrogate_is_a_lower_bound(ds in dataset(3, 20), seed in any::<u64>(), scale in 0.01f64..10.0) {
        let v = ball_point(3, ds.budget().epsilon(), seed);
        prop_assert!(surrogate_objective(&v, &ds, scale) <= phi_n(&v, &ds).unwrap());
        for h in ds.halfspaces() {
            let m = h.margin(&v);
            let indicator = f64::from(u8::from(m >= 0.0));
            prop_assert!(surrogate(m) <= indicator);
        }
    }

    #[test]
    fn projection_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 3), eps in 0.01f64..3.0) {
        let b = Budget::new(eps, 3).unwrap();
        let p = project_to_ball(&v, &b);
        prop_assert!(b.contains(&p));
        prop_assert_eq!(project_to_ball(&p, &b), p);
    }

    #[test]
    fn utilities_are_zero_sum_and_counted(ds in dataset(2, 12), seed in any::<u64>()) {
        let eps = ds.budget().epsilon();
        let d = ball_point(2, eps, seed);
        let a = ball_point(2, eps, seed.wrapping_add(1));
        for attack in [AttackSpec::None, AttackSpec::Fgm, AttackSpec::Fixed(a.clone())] {
            let rep = simulate(&ds, &attack, &DefenseSpec::Fixed(d.clone()), None).unwrap();
            let n = rep.n() as i64;
            prop_assert_eq!(rep.utility_sum(), n - 2 * rep.defender_wins() as i64);
            prop_assert_eq!(rep.mean_defender_utility(), -rep.mean_attacker_utility);
            prop_assert!((rep.approximate_accuracy - (1.0 - rep.mean_attacker_utility) / 2.0).abs() < 1e-12);
        }
        for r in ds.records() {
            let u = utility(r, &a, &d, ds.budget()).unwrap();
            prop_assert!(u == 1 || u == -1);
        }
    }

    #[test]
    fn fgm_accuracy_is_robust_coverage(ds in dataset(3, 12), seed in any::<u64>()) {
        let d = ball_point(3, ds.budget().epsilon(), seed);
        let rep = simulate(&ds, &AttackSpec::Fgm, &DefenseSpec::Fixed(d.clone()), None).unwrap();
        prop_assert_eq!(rep.defender_wins(), ds.satisfied_count(&d));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_is_deterministic_feasible_and_exact(ds in dataset(2, 10), seed in any::<u64>()) {
        let cfg = SolveConfig::for_budget(ds.budget()).with_seed(seed);
        let r1 = solve(&ds, &cfg).unwrap();
        let r2 = solve(&ds, &cfg).unwrap();
        prop_assert_eq!(&r1, &r2);
        prop_assert!(norm(&r1.v_star) <= ds.budget().epsilon() * (1.0 + 1e-9));
        prop_assert_eq!(r1.phi_value, phi_n(&r1.v_star, &ds).unwrap());
        prop_assert_eq!(r1.phi_value, r1.satisfied_indices.len() as f64 / ds.len() as f64);
        prop_assert!(r1.restarts_log.iter().all(|&p| p <= r1.phi_value));
    }

    #[test]
    fn oracle_bounds_the_solver(ds in dataset(2, 8), seed in any::<u64>()) {
        let o = oracle_solve(&ds, 20).unwrap();
        let s = solve(&ds, &SolveConfig::for_budget(ds.budget()).with_seed(seed)).unwrap();
        prop_assert!(o.phi_value >= s.phi_value);
        prop_assert_eq!(o.phi_value, phi_n(&o.v_star, &ds).unwrap());
        prop_assert!(o.phi_value >= phi_n(&[0.0; 2], &ds).unwrap());
        for h in ds.halfspaces() {
            let p = project_to_ball(&h.min_norm_point(), ds.budget());
            prop_assert!(o.phi_value >= phi_n(&p, &ds).unwrap());
        }
    }
}
