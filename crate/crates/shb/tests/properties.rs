//! Property tests: structural facts that must hold across whole parameter
//! ranges, not just on the reference configurations.

mod common;

use proptest::prelude::*;
use shb::cli::RunConfig;
use shb::integrator::{integrate, Direction, StopPolicy, Tolerances};
use shb::model::{Nonlinearity, Problem, ProblemSpec, State};
use shb::shooting::linear_limit_profile;
use shb::transforms::{mu_to_problem, reflect};

fn cubic(k: f64) -> Problem {
    Problem::prototype(1.0, 1.0, 3.0, k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// For the odd prototype, f(-t) is exactly -f(t): |t| and the sign
    /// factor commute with rounding.
    #[test]
    fn prototype_is_exactly_odd(t in -1e3f64..1e3, alpha in 0.0f64..10.0, p in 1.5f64..6.0) {
        let nl = Nonlinearity::prototype(alpha, 1.0, p).unwrap();
        prop_assert_eq!(nl.f(-t), -nl.f(t));
        prop_assert_eq!(nl.f_int(-t), nl.f_int(t));
    }

    /// The potential grows with |t|.
    #[test]
    fn potential_grows_with_magnitude(t1 in -30.0f64..30.0, scale in 1.001f64..3.0) {
        let nl = Nonlinearity::prototype(1.0, 1.0, 3.0).unwrap();
        let t2 = t1 * scale;
        prop_assert!(nl.f_int(t2) >= nl.f_int(t1));
    }

    /// Frequencies of the linearization: λ₁λ₂ = sqrt(f'(0)) and
    /// λ₁² + λ₂² = k, and both are characteristic roots.
    #[test]
    fn linear_profile_frequency_identities(f0 in 1e-2f64..10.0, ratio in 1.02f64..4.0) {
        let k = 2.0 * f0.sqrt() * ratio;
        let prof = linear_limit_profile(k, f0).unwrap();
        let (l1, l2) = (prof.lambda1, prof.lambda2);
        prop_assert!((l1 * l2 - f0.sqrt()).abs() <= 1e-12 * (1.0 + f0.sqrt()));
        prop_assert!((l1 * l1 + l2 * l2 - k).abs() <= 1e-12 * (1.0 + k));
        for l in [l1, l2] {
            let residual = l.powi(4) - k * l * l + f0;
            prop_assert!(residual.abs() <= 1e-11 * (1.0 + k * k + f0));
        }
        prop_assert!(prof.t_crit > 0.0 && prof.t_crit.is_finite());
    }

    /// The run configuration round-trips losslessly through JSON.
    #[test]
    fn run_config_round_trips(
        alpha in 0.0f64..10.0,
        q in 1.0f64..3.0,
        dp in 0.1f64..4.0,
        k in -3.0f64..5.0,
        w0 in -2.0f64..2.0,
        span in 0.1f64..100.0,
        mu in proptest::option::of(-5.0f64..1.0),
    ) {
        let cfg = RunConfig {
            problem: ProblemSpec::Prototype { alpha, q, p: q + dp, k },
            ic: [w0, 0.25, -0.5, 1.0],
            direction: Direction::Backward,
            span,
            tol: Tolerances::default(),
            stop: None,
            out_dir: None,
            scan: None,
            mu,
            ladder_start: None,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let again: RunConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(cfg, again);
    }

    /// Composing the state maps of the eigenvalue substitution in either
    /// order is the identity.
    #[test]
    fn mu_state_maps_invert(
        mu in -5.0f64..0.999,
        s in -3.0f64..3.0,
        w in -2.0f64..2.0,
        w1 in -2.0f64..2.0,
        w2 in -2.0f64..2.0,
        w3 in -2.0f64..2.0,
    ) {
        let map = mu_to_problem(mu).unwrap();
        let st = State::new(s, [w, w1, w2, w3]);
        let there = map.canonical_state(&map.pulled_back_state(&st));
        let back = map.pulled_back_state(&map.canonical_state(&st));
        for round in [there, back] {
            prop_assert!((round.s - st.s).abs() <= 1e-12 * (1.0 + st.s.abs()));
            for i in 0..4 {
                prop_assert!((round.y[i] - st.y[i]).abs() <= 1e-12 * (1.0 + st.y[i].abs()));
            }
        }
    }
}

proptest! {
    // Integration-bearing properties: fewer cases, each runs the solver.
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// At or below the threshold, H is nondecreasing along any solution:
    /// H' = (w''')² + k w'w''' + f'(w)(w')² is a nonnegative quadratic
    /// form as long as k² <= 4 f'(w).
    #[test]
    fn h_never_decreases_at_or_below_threshold(
        k in 0.05f64..2.0,
        w0 in -1.0f64..1.0,
        w2 in -1.0f64..1.0,
    ) {
        prop_assume!(w0.abs() + w2.abs() > 1e-3);
        let prob = cubic(k);
        let traj = integrate(
            &prob,
            &State::new(0.0, [w0, 0.0, w2, 0.0]),
            Direction::Forward,
            Tolerances::default(),
            &StopPolicy::to(8.0),
        ).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for (st, inv) in &traj.samples {
            let scale = st.y[3] * st.y[3]
                + (prob.k * st.y[1] * st.y[3]).abs()
                + prob.nl.fprime(st.y[0]) * st.y[1] * st.y[1];
            prop_assert!(
                inv.hprime >= -1e-10 * (1.0 + scale),
                "H' = {} at s = {}", inv.hprime, st.s
            );
            prop_assert!(
                inv.h >= prev - 1e-8 * (1.0 + prev.abs()),
                "H fell from {prev} to {} at s = {}", inv.h, st.s
            );
            prev = inv.h;
        }
    }

    /// In the same regime the discriminant functional stays nonpositive:
    /// D = (k² - 4 f'(w)) (w')² and f' >= 1 >= k²/4.
    #[test]
    fn discriminant_stays_nonpositive_below_threshold(
        k in 0.05f64..2.0,
        w0 in -1.0f64..1.0,
        w3 in -1.0f64..1.0,
    ) {
        prop_assume!(w0.abs() + w3.abs() > 1e-3);
        let traj = integrate(
            &cubic(k),
            &State::new(0.0, [w0, 0.0, 0.0, w3]),
            Direction::Forward,
            Tolerances::default(),
            &StopPolicy::to(8.0),
        ).unwrap();
        for (st, inv) in &traj.samples {
            prop_assert!(
                inv.d <= 1e-12 * (1.0 + st.y[1] * st.y[1]),
                "D = {} at s = {}", inv.d, st.s
            );
        }
    }

    /// Reflection is an involution on stored trajectories.
    #[test]
    fn double_reflection_is_the_identity(k in 0.2f64..3.0, w0 in -1.0f64..1.0) {
        prop_assume!(w0.abs() > 1e-3);
        let traj = integrate(
            &cubic(k),
            &State::new(0.0, [w0, 0.3, 0.0, -0.2]),
            Direction::Forward,
            Tolerances::default(),
            &StopPolicy::to(2.0),
        ).unwrap();
        let twice = reflect(&reflect(&traj));
        prop_assert_eq!(traj.samples.len(), twice.samples.len());
        for (a, b) in traj.samples.iter().zip(&twice.samples) {
            prop_assert_eq!(a.0.s, b.0.s);
            prop_assert_eq!(a.0.y, b.0.y);
        }
    }
}
