//! Adaptive integration of the first-order system with dense output.
//!
//! The stepper is the classic Dormand–Prince 5(4) pair (seven stages, FSAL)
//! with the standard free fourth-order interpolant, a PI step-size
//! controller, and a weighted RMS error norm.  Each accepted step stores its
//! interpolant in monomial form, so a [`Trajectory`] is a piecewise
//! polynomial that can be evaluated, reflected, translated, and rescaled
//! exactly (the latter operations live in [`crate::transforms`]).
//!
//! Integration stops at the first of: the horizon `s_max`, an escape
//! (`|w|` reaching the escape threshold — the crossing is then located on
//! the dense output by bisection and the final segment truncated there, so
//! the reported escape abscissa does not depend on where the last step
//! happened to land), a step-size underflow, or the accepted-step cap.
//!
//! Backward integration reuses the forward core through the symmetry
//! s → -s, under which (w, w', w'', w''') ↦ (w, -w', w'', -w''') maps
//! solutions to solutions; trajectories are always stored with ascending
//! abscissas.

use std::io;

use serde::{Deserialize, Serialize};

use crate::model::{invariants, InvariantSample, Problem, State};
use crate::{Error, Result};

// Dormand–Prince 5(4) tableau.  The system is autonomous, so the stage
// abscissas c_i never enter the right-hand side.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Error weights: 5th-order minus 4th-order solution.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Weights of the free fourth-order interpolant.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;
// PI controller (order-5 exponent 1/5 with integral gain 0.04).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

/// Relative and absolute tolerance of the weighted error norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel: 1e-10,
            abs: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64) -> Self {
        Tolerances { rel, abs }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0 && v <= 1e-2;
        if ok(self.rel) && ok(self.abs) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "tolerances must lie in (0, 1e-2], got rel = {}, abs = {}",
                self.rel, self.abs
            )))
        }
    }
}

/// Orientation of a run relative to the initial abscissa.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

/// When to stop integrating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopPolicy {
    /// Stop (and truncate) once |w| reaches this value.
    pub escape_threshold: f64,
    /// Horizon abscissa: above the start for forward runs, below it for
    /// backward runs.
    pub s_max: f64,
    /// Step-size floor, relative to max(1, |s|).
    pub min_step: f64,
    /// Cap on the number of accepted steps.
    pub max_events: usize,
}

impl StopPolicy {
    /// Policy that runs to `s_max` with the default escape threshold 1e8,
    /// step floor 1e-13, and a one-million-step cap.
    pub fn to(s_max: f64) -> Self {
        StopPolicy {
            escape_threshold: 1e8,
            s_max,
            min_step: 1e-13,
            max_events: 1_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.escape_threshold.is_finite() && self.escape_threshold > 0.0)
            || !self.s_max.is_finite()
            || !(self.min_step.is_finite() && self.min_step > 0.0)
            || self.max_events == 0
        {
            return Err(Error::InvalidInput(format!(
                "invalid stop policy: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StopReason {
    /// Reached the horizon abscissa.
    ReachedHorizon,
    /// |w| reached the escape threshold; `s` is the refined crossing.
    Escape { s: f64 },
    /// The step size underflowed after at least one accepted step.
    StepUnderflow { s: f64 },
    /// The accepted-step cap fired.
    EventCap { s: f64 },
}

/// One accepted step stored as a quartic interpolant in monomial form.
///
/// The polynomial is evaluated in the local variable θ = (s - t0)/h and is
/// valid on [lo, hi]; normally lo = t0 and hi = t0 + h, but truncation
/// (escape refinement) and reflection can shrink or offset the valid window
/// inside the polynomial's native span.
#[derive(Debug, Clone)]
pub(crate) struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub t0: f64,
    pub h: f64,
    /// Monomial coefficients per component: y_i(θ) = Σ_j c[i][j] θ^j.
    pub c: [[f64; 5]; 4],
    /// Weighted error estimate of the producing step.
    pub err: f64,
}

impl Segment {
    pub(crate) fn eval(&self, s: f64) -> [f64; 4] {
        let th = (s - self.t0) / self.h;
        let mut y = [0.0; 4];
        for (yi, c) in y.iter_mut().zip(&self.c) {
            *yi = (((c[4] * th + c[3]) * th + c[2]) * th + c[1]) * th + c[0];
        }
        y
    }
}

/// Run description and bookkeeping attached to a trajectory.
#[derive(Debug, Clone)]
pub struct Meta {
    pub problem: Problem,
    pub tol: Tolerances,
    pub stop: StopPolicy,
    pub direction: Direction,
    pub stop_reason: StopReason,
    /// The state integration started from (for backward runs this is the
    /// rightmost sample).
    pub initial: State,
    /// Energy at the initial state; the reference for drift audits.
    pub e0: f64,
    /// Scale-aware bound the observed energy drift is expected to satisfy:
    /// 1e3 · rel · (1 + |E0| + max G) · sqrt(accepted steps).  In double
    /// precision no absolute drift bound is possible once the functional
    /// scale G grows, since even evaluating E costs ~2e-16·G.
    pub drift_budget: f64,
    pub naccept: usize,
    pub nreject: usize,
}

/// Piecewise-polynomial solution with per-step samples and functionals.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub(crate) segments: Vec<Segment>,
    /// One entry per accepted step plus the initial state, ascending in s.
    pub samples: Vec<(State, InvariantSample)>,
    pub meta: Meta,
}

impl Trajectory {
    /// Leftmost abscissa.
    pub fn s_start(&self) -> f64 {
        self.samples.first().expect("nonempty").0.s
    }

    /// Rightmost abscissa.
    pub fn s_end(&self) -> f64 {
        self.samples.last().expect("nonempty").0.s
    }

    /// Dense-output state at `s`, or None outside the span.  At segment
    /// joints this returns the stored per-step sample (the same floating
    /// values, stored once), so dense output and samples never disagree.
    pub fn state_at(&self, s: f64) -> Option<State> {
        if !s.is_finite() || self.segments.is_empty() {
            return if self.samples.first().map(|p| p.0.s) == Some(s) {
                Some(self.samples[0].0)
            } else {
                None
            };
        }
        if s < self.s_start() || s > self.s_end() {
            return None;
        }
        let idx = self
            .segments
            .partition_point(|seg| seg.hi < s)
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        if s == seg.lo {
            return Some(self.samples[idx].0);
        }
        if s == seg.hi {
            return Some(self.samples[idx + 1].0);
        }
        Some(State::new(s, seg.eval(s)))
    }

    /// Functionals at `s`, through the dense output.
    pub fn invariants_at(&self, s: f64) -> Option<InvariantSample> {
        let st = self.state_at(s)?;
        invariants(&self.meta.problem, &st).ok()
    }

    /// Largest |w| over the per-step samples.
    pub fn max_abs_w(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, p| m.max(p.0.w().abs()))
    }

    /// Writes the canonical CSV: header `s,w,w1,w2,w3,E,G,H`, one row per
    /// accepted step, every number with 17 significant digits so the file
    /// round-trips losslessly.
    pub fn write_csv(&self, out: &mut dyn io::Write) -> io::Result<()> {
        writeln!(out, "s,w,w1,w2,w3,E,G,H")?;
        for (st, inv) in &self.samples {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                st.s, st.y[0], st.y[1], st.y[2], st.y[3], inv.e, inv.g, inv.h
            )?;
        }
        Ok(())
    }

    /// Mirror image s ↦ -s, (w, w', w'', w''') ↦ (w, -w', w'', -w''').
    /// Exact: segment polynomials are composed with θ ↦ 1-θ and odd
    /// components negated, so no re-integration happens.
    pub(crate) fn reflected(&self) -> Trajectory {
        let prob = &self.meta.problem;
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|seg| {
                let c0 = &seg.c;
                let mut c = [[0.0; 5]; 4];
                for i in 0..4 {
                    // p(1-u) expanded back into monomials of u.
                    let [a0, a1, a2, a3, a4] = c0[i];
                    let sign = if i % 2 == 1 { -1.0 } else { 1.0 };
                    c[i] = [
                        sign * (a0 + a1 + a2 + a3 + a4),
                        sign * -(a1 + 2.0 * a2 + 3.0 * a3 + 4.0 * a4),
                        sign * (a2 + 3.0 * a3 + 6.0 * a4),
                        sign * -(a3 + 4.0 * a4),
                        sign * a4,
                    ];
                }
                Segment {
                    lo: -seg.hi,
                    hi: -seg.lo,
                    t0: -(seg.t0 + seg.h),
                    h: seg.h,
                    c,
                    err: seg.err,
                }
            })
            .collect();
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|(st, _)| {
                let rst = reflect_state(st);
                let inv = invariants(prob, &rst).expect("finite state");
                (rst, inv)
            })
            .collect();
        let mut meta = self.meta.clone();
        meta.direction = match meta.direction {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        };
        meta.initial = reflect_state(&meta.initial);
        meta.stop.s_max = -meta.stop.s_max;
        meta.stop_reason = match meta.stop_reason {
            StopReason::Escape { s } => StopReason::Escape { s: -s },
            StopReason::StepUnderflow { s } => StopReason::StepUnderflow { s: -s },
            StopReason::EventCap { s } => StopReason::EventCap { s: -s },
            r => r,
        };
        Trajectory {
            segments,
            samples,
            meta,
        }
    }

    /// Shortens the trajectory to end exactly at `s` (interior abscissa).
    pub(crate) fn truncated_at(&self, s: f64) -> Result<Trajectory> {
        if !(s > self.s_start() && s <= self.s_end()) {
            return Err(Error::InvalidInput(format!(
                "truncation abscissa {s} outside ({}, {}]",
                self.s_start(),
                self.s_end()
            )));
        }
        let idx = self
            .segments
            .partition_point(|seg| seg.hi < s)
            .min(self.segments.len() - 1);
        let mut segments: Vec<Segment> = self.segments[..=idx].to_vec();
        let mut samples: Vec<(State, InvariantSample)> = self.samples[..=idx].to_vec();
        if s == segments[idx].lo {
            segments.pop();
        } else {
            segments[idx].hi = s;
            let st = if s == self.segments[idx].hi {
                self.samples[idx + 1].0
            } else {
                State::new(s, segments[idx].eval(s))
            };
            let inv = invariants(&self.meta.problem, &st)?;
            samples.push((st, inv));
        }
        let mut meta = self.meta.clone();
        meta.stop_reason = StopReason::ReachedHorizon;
        meta.stop.s_max = s;
        meta.naccept = segments.len();
        Ok(Trajectory {
            segments,
            samples,
            meta,
        })
    }
}

pub(crate) fn reflect_state(st: &State) -> State {
    State::new(-st.s, [st.y[0], -st.y[1], st.y[2], -st.y[3]])
}

/// Result of the conserved-energy audit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyAudit {
    /// Energy at the initial state.
    pub e0: f64,
    /// max over samples of |E(s) - E0|.
    pub max_drift: f64,
    /// Abscissa where the max is attained.
    pub argmax_s: f64,
    /// Whether the drift stayed within the scale-aware budget in the meta.
    pub within_budget: bool,
}

/// Audits conservation of E against the initial state of the run.
pub fn energy_audit(traj: &Trajectory) -> EnergyAudit {
    let e0 = traj.meta.e0;
    let mut max_drift = 0.0;
    let mut argmax_s = traj.meta.initial.s;
    for (st, inv) in &traj.samples {
        let drift = (inv.e - e0).abs();
        if drift > max_drift {
            max_drift = drift;
            argmax_s = st.s;
        }
    }
    EnergyAudit {
        e0,
        max_drift,
        argmax_s,
        within_budget: max_drift <= traj.meta.drift_budget,
    }
}

/// Integrates the problem from `ic` until the stop policy fires.
///
/// Tolerances must lie in (0, 1e-2]; `stop.s_max` must be beyond `ic.s` in
/// the direction of the run, and |w(ic)| must start below the escape
/// threshold.  Backward runs are computed by reflecting the initial state,
/// running the forward core, and reflecting the result (which is exact).
pub fn integrate(
    prob: &Problem,
    ic: &State,
    dir: Direction,
    tol: Tolerances,
    stop: &StopPolicy,
) -> Result<Trajectory> {
    if !ic.is_finite() {
        return Err(Error::NonFiniteInput("initial state"));
    }
    tol.validate()?;
    stop.validate()?;
    if ic.y[0].abs() >= stop.escape_threshold {
        return Err(Error::InvalidInput(format!(
            "initial |w| = {} already at the escape threshold {}",
            ic.y[0].abs(),
            stop.escape_threshold
        )));
    }
    match dir {
        Direction::Forward => {
            if stop.s_max <= ic.s {
                return Err(Error::InvalidInput(format!(
                    "forward run needs s_max > {}, got {}",
                    ic.s, stop.s_max
                )));
            }
            forward_core(prob, ic, tol, stop)
        }
        Direction::Backward => {
            if stop.s_max >= ic.s {
                return Err(Error::InvalidInput(format!(
                    "backward run needs s_max < {}, got {}",
                    ic.s, stop.s_max
                )));
            }
            let reflected_ic = reflect_state(ic);
            let rstop = StopPolicy {
                s_max: -stop.s_max,
                ..*stop
            };
            let traj = forward_core(prob, &reflected_ic, tol, &rstop)?;
            Ok(traj.reflected())
        }
    }
}

fn weighted_rms(v: &[f64; 4], y0: &[f64; 4], y1: &[f64; 4], tol: Tolerances) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        let sc = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
        let r = v[i] / sc;
        acc += r * r;
    }
    (acc / 4.0).sqrt()
}

fn initial_step(prob: &Problem, ic: &State, f0: &[f64; 4], tol: Tolerances, span: f64) -> f64 {
    let y0 = &ic.y;
    let zero = [0.0; 4];
    let d0 = weighted_rms(y0, y0, &zero, tol);
    let d1 = weighted_rms(f0, y0, &zero, tol);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span);
    let y1 = [
        y0[0] + h0 * f0[0],
        y0[1] + h0 * f0[1],
        y0[2] + h0 * f0[2],
        y0[3] + h0 * f0[3],
    ];
    let f1 = prob.deriv(&y1);
    let df = [f1[0] - f0[0], f1[1] - f0[1], f1[2] - f0[2], f1[3] - f0[3]];
    let d2 = weighted_rms(&df, y0, &zero, tol) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    h1.min(100.0 * h0).min(span)
}

fn forward_core(
    prob: &Problem,
    ic: &State,
    tol: Tolerances,
    stop: &StopPolicy,
) -> Result<Trajectory> {
    let mut s = ic.s;
    let mut y = ic.y;
    let mut k1 = prob.deriv(&y);
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("rhs at the initial state"));
    }
    let inv0 = invariants(prob, ic)?;
    let mut samples = vec![(*ic, inv0)];
    let mut segments: Vec<Segment> = Vec::new();
    let mut h = initial_step(prob, ic, &k1, tol, stop.s_max - s);
    let mut facold: f64 = 1e-4;
    let mut naccept = 0usize;
    let mut nreject = 0usize;
    let stop_reason;

    'outer: loop {
        let remaining = stop.s_max - s;
        let mut hitting_end = false;
        if h >= remaining {
            h = remaining;
            hitting_end = true;
        }
        if !hitting_end && h < stop.min_step * s.abs().max(1.0) {
            if naccept == 0 {
                return Err(Error::StepUnderflowAtStart { s });
            }
            stop_reason = StopReason::StepUnderflow { s };
            break;
        }

        // Stages (k1 carried over by FSAL).
        let st2 = stage(&y, h, &[(A21, &k1)]);
        let k2 = prob.deriv(&st2);
        let st3 = stage(&y, h, &[(A31, &k1), (A32, &k2)]);
        let k3 = prob.deriv(&st3);
        let st4 = stage(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        let k4 = prob.deriv(&st4);
        let st5 = stage(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = prob.deriv(&st5);
        let st6 = stage(
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        let k6 = prob.deriv(&st6);
        let y_new = stage(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = prob.deriv(&y_new);

        let mut err_vec = [0.0; 4];
        for i in 0..4 {
            err_vec[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let finite = y_new.iter().chain(k7.iter()).all(|v| v.is_finite());
        let err = if finite {
            weighted_rms(&err_vec, &y, &y_new, tol)
        } else {
            f64::INFINITY
        };

        if !(err <= 1.0) {
            // Rejected: shrink without growth, classic exponent.
            let scale = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, 1.0)
            } else {
                MIN_SCALE
            };
            h *= scale;
            nreject += 1;
            if h < stop.min_step * s.abs().max(1.0) {
                if naccept == 0 {
                    return Err(Error::StepUnderflowAtStart { s });
                }
                stop_reason = StopReason::StepUnderflow { s };
                break 'outer;
            }
            continue;
        }

        // Accepted: build the dense interpolant in monomial form.
        let mut c = [[0.0; 5]; 4];
        for i in 0..4 {
            let dy = y_new[i] - y[i];
            let bspl = h * k1[i] - dy;
            let r4 = dy - h * k7[i] - bspl;
            let r5 =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            c[i] = [y[i], dy + bspl, r4 + r5 - bspl, -(r4 + 2.0 * r5), r5];
        }
        let s_next = if hitting_end { stop.s_max } else { s + h };
        segments.push(Segment {
            lo: s,
            hi: s_next,
            t0: s,
            h,
            c,
            err,
        });
        let st_new = State::new(s_next, y_new);
        samples.push((st_new, invariants(prob, &st_new)?));
        naccept += 1;

        // Escape: locate the threshold crossing on this segment's dense
        // output and truncate there.
        if y_new[0].abs() >= stop.escape_threshold {
            let seg = segments.last_mut().expect("just pushed");
            let thr = stop.escape_threshold;
            let (mut lo, mut hi) = (seg.lo, seg.hi);
            if seg.eval(lo)[0].abs() < thr {
                for _ in 0..80 {
                    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if seg.eval(mid)[0].abs() < thr {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            } else {
                hi = lo; // crossing at (or before) the segment start
            }
            let s_esc = hi;
            if s_esc < seg.hi {
                seg.hi = s_esc;
                let esc_state = State::new(s_esc, seg.eval(s_esc));
                samples.pop();
                samples.push((esc_state, invariants(prob, &esc_state)?));
            }
            stop_reason = StopReason::Escape { s: s_esc };
            break 'outer;
        }

        if hitting_end {
            stop_reason = StopReason::ReachedHorizon;
            break 'outer;
        }
        if naccept >= stop.max_events {
            stop_reason = StopReason::EventCap { s: s_next };
            break 'outer;
        }

        // PI controller.
        let scale = if err == 0.0 {
            MAX_SCALE
        } else {
            (SAFETY * err.powf(-EXPO) * facold.powf(BETA)).clamp(MIN_SCALE, MAX_SCALE)
        };
        facold = err.max(1e-4);
        s = s_next;
        y = y_new;
        k1 = k7;
        h *= scale;
    }

    let g_max = samples.iter().fold(0.0f64, |m, p| m.max(p.1.g.abs()));
    let e0 = samples[0].1.e;
    let drift_budget = 1e3 * tol.rel * (1.0 + e0.abs() + g_max) * (naccept.max(1) as f64).sqrt();
    Ok(Trajectory {
        segments,
        samples,
        meta: Meta {
            problem: prob.clone(),
            tol,
            stop: *stop,
            direction: Direction::Forward,
            stop_reason,
            initial: *ic,
            e0,
            drift_budget,
            naccept,
            nreject,
        },
    })
}

#[inline]
fn stage(y: &[f64; 4], h: f64, terms: &[(f64, &[f64; 4])]) -> [f64; 4] {
    let mut out = *y;
    for (a, k) in terms {
        for i in 0..4 {
            out[i] += h * a * k[i];
        }
    }
    out
}

/// Locates a zero of `event` on the dense output inside `bracket`.
///
/// The endpoint values must straddle zero (an exact zero at an endpoint
/// returns that endpoint).  Bisection narrows the bracket to width 1e-12,
/// followed by one guarded secant polish.
pub fn locate_event<F>(traj: &Trajectory, event: F, bracket: (f64, f64)) -> Result<f64>
where
    F: Fn(&State) -> f64,
{
    let (mut a, mut b) = bracket;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFiniteInput("event bracket"));
    }
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let eval = |s: f64| -> Result<f64> {
        let st = traj
            .state_at(s)
            .ok_or_else(|| Error::InvalidInput(format!("abscissa {s} outside the trajectory")))?;
        Ok(event(&st))
    };
    let mut ga = eval(a)?;
    let mut gb = eval(b)?;
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(Error::NoSignChange { a, b });
    }
    for _ in 0..200 {
        if b - a <= 1e-12 {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = eval(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
            gb = gm;
        }
    }
    // One secant step inside the final bracket, kept only if it improves.
    let den = gb - ga;
    if den != 0.0 {
        let cand = b - gb * (b - a) / den;
        if cand.is_finite() && cand >= a && cand <= b {
            if let Ok(gc) = eval(cand) {
                if gc.abs() <= ga.abs().min(gb.abs()) {
                    return Ok(cand);
                }
            }
        }
    }
    Ok(0.5 * (a + b))
}
