//! Symmetries and changes of variables: reflection, abscissa shifts, the
//! classical-form parameter map, and finite-difference residual oracles.
//!
//! The equation contains only even-order derivatives, so `w(-s)` solves it
//! whenever `w(s)` does, and since it is autonomous every shift `w(s + s0)`
//! is again a solution.  [`reflect`] and [`shift`] realize both on whole
//! trajectories, exactly — segment polynomials are recomposed, never
//! re-integrated.
//!
//! The classical fourth-order form
//!
//! ```text
//! (1 + d²/dx²)² U + U³ - mu U = 0,        mu < 1,
//! ```
//!
//! is equivalent to the canonical equation with k = 2/sqrt(1-mu) and
//! f(t) = t³ + t under w(s) = (1-mu)^{-1/2} U(s (1-mu)^{-1/4}); at mu = 1
//! the form already is canonical with k = 2 and f(t) = t³, and for mu > 1
//! the nonlinearity acquires a double well outside this crate's hypotheses,
//! so the map refuses.  [`MuMap`] carries the canonical problem together
//! with the scaling factors; [`pull_back`] applies the inverse substitution
//! to a whole trajectory.  A pulled-back trajectory is itself canonical —
//! U solves `U'''' + 2U'' + U³ + (1-mu)U = 0` — so its metadata names that
//! problem and every downstream diagnostic works on it unchanged.
//!
//! [`ode_residual_at`] and [`mu_form_residual_at`] measure how well a
//! trajectory satisfies its equation by reconstructing the fourth
//! derivative from the dense third-derivative output with a centered
//! five-point stencil; they are the oracles behind the shift/reflect/map
//! tests and deliberately share no code with the integrator.

use crate::integrator::{StopReason, Trajectory};
use crate::model::{invariants, Nonlinearity, Problem, State};
use crate::{Error, Result};

/// Mirror image in s: samples and dense output of `w(-s)`, exact by
/// construction (odd-order components negated, polynomials recomposed).
pub fn reflect(traj: &Trajectory) -> Trajectory {
    traj.reflected()
}

/// Re-bases the trajectory so that `s0` (an interior abscissa) becomes 0.
///
/// Pure bookkeeping: every stored abscissa is shifted by `-s0` while the
/// polynomial coefficients, states, and functionals are reused bitwise, so
/// the shifted trajectory solves the equation exactly as well as the
/// original did.
pub fn shift(traj: &Trajectory, s0: f64) -> Result<Trajectory> {
    if !s0.is_finite() {
        return Err(Error::NonFiniteInput("shift abscissa"));
    }
    if !(traj.s_start()..=traj.s_end()).contains(&s0) {
        return Err(Error::InvalidInput(format!(
            "shift abscissa {s0} outside [{}, {}]",
            traj.s_start(),
            traj.s_end()
        )));
    }
    let segments = traj
        .segments
        .iter()
        .map(|seg| {
            let mut seg = seg.clone();
            seg.lo -= s0;
            seg.hi -= s0;
            seg.t0 -= s0;
            seg
        })
        .collect();
    let samples = traj
        .samples
        .iter()
        .map(|&(st, inv)| (State::new(st.s - s0, st.y), inv))
        .collect();
    let mut meta = traj.meta.clone();
    meta.initial = State::new(meta.initial.s - s0, meta.initial.y);
    meta.stop.s_max -= s0;
    meta.stop_reason = match meta.stop_reason {
        StopReason::Escape { s } => StopReason::Escape { s: s - s0 },
        StopReason::StepUnderflow { s } => StopReason::StepUnderflow { s: s - s0 },
        StopReason::EventCap { s } => StopReason::EventCap { s: s - s0 },
        r => r,
    };
    Ok(Trajectory {
        segments,
        samples,
        meta,
    })
}

/// The classical-form parameter map at one value of mu.
#[derive(Debug, Clone)]
pub struct MuMap {
    pub mu: f64,
    /// Canonical problem the classical solutions transform into.
    pub problem: Problem,
    /// (1-mu)^{-1/2}: `w(s) = amplitude_factor * U(abscissa_factor * s)`.
    pub amplitude_factor: f64,
    /// (1-mu)^{-1/4}, the classical abscissa per unit canonical abscissa.
    pub abscissa_factor: f64,
}

impl MuMap {
    /// (1-mu)^{1/4}: canonical abscissa per unit classical abscissa.
    fn kappa(&self) -> f64 {
        1.0 / self.abscissa_factor
    }

    /// Classical state (x; U, U', U'', U''') -> canonical state at s = κx
    /// with w^(i) = κ^{-(2+i)} U^(i).
    pub fn canonical_state(&self, u: &State) -> State {
        let kap = self.kappa();
        let mut y = [0.0; 4];
        let mut scale = kap * kap;
        for (yi, ui) in y.iter_mut().zip(&u.y) {
            *yi = ui / scale;
            scale *= kap;
        }
        State::new(u.s * kap, y)
    }

    /// Canonical state -> classical state at x = s/κ with U^(i) = κ^(2+i) w^(i).
    pub fn pulled_back_state(&self, w: &State) -> State {
        let kap = self.kappa();
        let mut y = [0.0; 4];
        let mut scale = kap * kap;
        for (yi, wi) in y.iter_mut().zip(&w.y) {
            *yi = wi * scale;
            scale *= kap;
        }
        State::new(w.s / kap, y)
    }
}

/// Builds the [`MuMap`] for `mu <= 1`; `mu > 1` is refused, and `mu = 1` is
/// the identity map onto k = 2 with the pure cubic nonlinearity.
pub fn mu_to_problem(mu: f64) -> Result<MuMap> {
    if !mu.is_finite() {
        return Err(Error::NonFiniteInput("mu"));
    }
    if mu > 1.0 {
        return Err(Error::OutOfDomain(mu));
    }
    if mu == 1.0 {
        return Ok(MuMap {
            mu,
            problem: Problem::prototype(0.0, 1.0, 3.0, 2.0)?,
            amplitude_factor: 1.0,
            abscissa_factor: 1.0,
        });
    }
    let one_minus = 1.0 - mu;
    Ok(MuMap {
        mu,
        problem: Problem::prototype(1.0, 1.0, 3.0, 2.0 / one_minus.sqrt())?,
        amplitude_factor: 1.0 / one_minus.sqrt(),
        abscissa_factor: 1.0 / one_minus.powf(0.25),
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Applies the inverse substitution to a canonical trajectory, yielding the
/// classical-variable trajectory U(x) with dense output and functionals
/// recomputed under the equation U solves,
/// `U'''' + 2U'' + U³ + (1-mu)U = 0`.
///
/// The input must be a trajectory of the canonical problem for this `mu`
/// (prototype t³ + t with k = 2/sqrt(1-mu), or t³ with k = 2 at mu = 1).
pub fn pull_back(traj: &Trajectory, mu: f64) -> Result<Trajectory> {
    let map = mu_to_problem(mu)?;
    let (exp_alpha, exp_k) = match map.problem.nl {
        Nonlinearity::Prototype { alpha, .. } => (alpha, map.problem.k),
        Nonlinearity::Custom { .. } => unreachable!("map problems are prototypes"),
    };
    match traj.meta.problem.nl {
        Nonlinearity::Prototype { alpha, q, p }
            if close(alpha, exp_alpha)
                && q == 1.0
                && p == 3.0
                && close(traj.meta.problem.k, exp_k) => {}
        _ => {
            return Err(Error::InvalidInput(format!(
                "trajectory problem does not match the canonical form for mu = {mu}"
            )));
        }
    }

    let kap = map.kappa();
    // U solves the canonical equation with k = 2 and f(t) = t³ + (1-mu)t.
    let u_prob = Problem::prototype(1.0 - mu, 1.0, 3.0, 2.0)?;
    let segments = traj
        .segments
        .iter()
        .map(|seg| {
            let mut out = seg.clone();
            out.lo /= kap;
            out.hi /= kap;
            out.t0 /= kap;
            out.h /= kap;
            let mut scale = kap * kap;
            for i in 0..4 {
                for c in &mut out.c[i] {
                    *c *= scale;
                }
                scale *= kap;
            }
            out
        })
        .collect();
    let samples = traj
        .samples
        .iter()
        .map(|(st, _)| {
            let u = map.pulled_back_state(st);
            let inv = invariants(&u_prob, &u).expect("finite state");
            (u, inv)
        })
        .collect::<Vec<_>>();
    let mut meta = traj.meta.clone();
    meta.initial = map.pulled_back_state(&meta.initial);
    meta.e0 = invariants(&u_prob, &meta.initial)?.e;
    // E scales by κ⁸ = (1-mu)², and so does any drift bound on it.
    meta.drift_budget *= kap.powi(8);
    meta.problem = u_prob;
    meta.stop.s_max /= kap;
    meta.stop.min_step /= kap;
    meta.stop.escape_threshold *= kap * kap;
    meta.stop_reason = match meta.stop_reason {
        StopReason::Escape { s } => StopReason::Escape { s: s / kap },
        StopReason::StepUnderflow { s } => StopReason::StepUnderflow { s: s / kap },
        StopReason::EventCap { s } => StopReason::EventCap { s: s / kap },
        r => r,
    };
    Ok(Trajectory {
        segments,
        samples,
        meta,
    })
}

/// |w'''' + k w'' + f(w)| at `s`, with w'''' reconstructed from the dense
/// third derivative by the centered five-point stencil of width `h`.
///
/// Needs `s ± 2h` inside the trajectory.  The stencil error is
/// O(h⁴) + O(ε/h) for dense-output noise ε, so `h` around 1e-3..1e-2 pairs
/// well with tolerances at or below 1e-11.
pub fn ode_residual_at(traj: &Trajectory, s: f64, h: f64) -> Result<f64> {
    let st = stencil_center(traj, s, h)?;
    let w4 = fourth_derivative(traj, s, h);
    let prob = &traj.meta.problem;
    Ok((w4 + prob.k * st.y[2] + prob.nl.f(st.y[0])).abs())
}

/// |(1 + d²/dx²)² U + U³ - mu U| at `s` for a classical-variable
/// trajectory, derivatives from the dense output as in [`ode_residual_at`].
pub fn mu_form_residual_at(traj: &Trajectory, mu: f64, s: f64, h: f64) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::NonFiniteInput("mu"));
    }
    let st = stencil_center(traj, s, h)?;
    let u4 = fourth_derivative(traj, s, h);
    let u = st.y[0];
    Ok((u4 + 2.0 * st.y[2] + u + u * u * u - mu * u).abs())
}

fn stencil_center(traj: &Trajectory, s: f64, h: f64) -> Result<State> {
    if !(s.is_finite() && h.is_finite() && h > 0.0) {
        return Err(Error::NonFiniteInput("residual stencil"));
    }
    if s - 2.0 * h < traj.s_start() || s + 2.0 * h > traj.s_end() {
        return Err(Error::InvalidInput(format!(
            "stencil [{}, {}] outside the trajectory",
            s - 2.0 * h,
            s + 2.0 * h
        )));
    }
    Ok(traj.state_at(s).expect("inside span"))
}

fn fourth_derivative(traj: &Trajectory, s: f64, h: f64) -> f64 {
    let w3 = |x: f64| traj.state_at(x).expect("inside span").y[3];
    (-w3(s + 2.0 * h) + 8.0 * w3(s + h) - 8.0 * w3(s - h) + w3(s - 2.0 * h)) / (12.0 * h)
}
