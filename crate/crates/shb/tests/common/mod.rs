//! Shared fixtures for the integration-test suite: an independent
//! fixed-step integrator used as an oracle, and the two reference runs,
//! each computed once per test binary.
//!
//! Each test binary compiles its own copy, so not every helper is used
//! everywhere.
#![allow(dead_code)]

use std::sync::OnceLock;

use shb::integrator::{integrate, Direction, StopPolicy, Tolerances, Trajectory};
use shb::model::{rhs, Problem, State};

pub const REFERENCE_IC: [f64; 4] = [0.8, 0.0, 0.0, 0.0];

/// k = 1.5 with the odd cubic-plus-linear nonlinearity: escapes forward.
pub fn reference_problem() -> Problem {
    Problem::prototype(1.0, 1.0, 3.0, 1.5).unwrap()
}

/// k = 3.5, same nonlinearity: above the threshold, stays bounded.
pub fn bounded_problem() -> Problem {
    Problem::prototype(1.0, 1.0, 3.0, 3.5).unwrap()
}

/// The escaping reference run at default tolerances.
pub fn reference_run() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| {
        integrate(
            &reference_problem(),
            &State::new(0.0, REFERENCE_IC),
            Direction::Forward,
            Tolerances::default(),
            &StopPolicy::to(100.0),
        )
        .expect("reference run integrates")
    })
}

/// The bounded reference run over [0, 40] at default tolerances.
pub fn bounded_run() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| {
        integrate(
            &bounded_problem(),
            &State::new(0.0, REFERENCE_IC),
            Direction::Forward,
            Tolerances::default(),
            &StopPolicy::to(40.0),
        )
        .expect("bounded run integrates")
    })
}

fn stage(prob: &Problem, y: &[f64; 4]) -> [f64; 4] {
    rhs(prob, &State::new(0.0, *y)).expect("finite stage")
}

fn add(y: &[f64; 4], d: &[f64; 4], h: f64) -> [f64; 4] {
    let mut out = *y;
    for i in 0..4 {
        out[i] += h * d[i];
    }
    out
}

/// One classical fourth-order Runge-Kutta step (the equation is
/// autonomous, so stages need no abscissa).
pub fn rk4_step(prob: &Problem, y: &[f64; 4], h: f64) -> [f64; 4] {
    let k1 = stage(prob, y);
    let k2 = stage(prob, &add(y, &k1, h / 2.0));
    let k3 = stage(prob, &add(y, &k2, h / 2.0));
    let k4 = stage(prob, &add(y, &k3, h));
    let mut out = *y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

/// Fixed-step classical Runge-Kutta chain from `ic` — an independent
/// scheme sharing no code with the adaptive integrator.  Stops at `s_max`,
/// when |w| reaches `escape`, or when the state stops being finite.
pub fn rk4(prob: &Problem, ic: &State, h: f64, s_max: f64, escape: f64) -> Vec<State> {
    let mut out = vec![*ic];
    let (mut s, mut y) = (ic.s, ic.y);
    while s < s_max && y[0].abs() < escape && y.iter().all(|v| v.is_finite()) {
        let step = h.min(s_max - s);
        y = rk4_step(prob, &y, step);
        s += step;
        out.push(State::new(s, y));
    }
    out
}

/// First zero of state component `comp` strictly inside the chain, refined
/// by bisection over fresh sub-integrations from the bracketing step's left
/// state; `None` when the component keeps one sign.
pub fn rk4_first_zero(prob: &Problem, chain: &[State], comp: usize) -> Option<f64> {
    for pair in chain.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.y[comp] == 0.0 || b.y[comp] == 0.0 {
            continue;
        }
        if a.y[comp].signum() == b.y[comp].signum() {
            continue;
        }
        let value = |dt: f64| {
            if dt == 0.0 {
                return a.y[comp];
            }
            let n = 8;
            let mut y = a.y;
            for _ in 0..n {
                y = rk4_step(prob, &y, dt / n as f64);
            }
            y[comp]
        };
        let (mut lo, mut hi) = (0.0, b.s - a.s);
        for _ in 0..200 {
            if hi - lo <= 1e-13 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if value(mid).signum() == a.y[comp].signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Some(a.s + 0.5 * (lo + hi));
    }
    None
}
