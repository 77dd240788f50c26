//! Periodic solutions above the threshold by topological shooting.
//!
//! For k > k_f the equation admits periodic solutions, found as follows.
//! Integrate the zero-energy symmetric data
//!
//! ```text
//! (w, w', w'', w''')(0) = (0, a, 0, -k a / 2),        a > 0,
//! ```
//!
//! to the first critical point m(a) of w and read off the shooting map
//! φ(a) = w'''(m(a)).  The initial data make E = 0 and H(0) = 0 exactly.
//! For small a the dynamics are governed by the linearization at 0, whose
//! explicit solution has positive third derivative at its first critical
//! point (computed in closed form by [`linear_limit_profile`]); for large a
//! the power-dominated limit forces it negative.  A sign change of φ pins
//! an amplitude a* whose first critical point is a *point of symmetry*:
//! w'(m) = w'''(m) = 0.  Reflecting about m and extending oddly about 0
//! ([`build_symmetric_extension`]) then tiles a global periodic solution of
//! period 4m.
//!
//! Both asymptotic regimes double as oracles: [`linear_limit_profile`]
//! checks the small-a limit against closed forms, and
//! [`limit_profile_deviation`] measures how fast the rescaled large-a shot
//! approaches the pure-power problem `V'''' + |V|^{p-1}V = 0` with data
//! (0, 1, 0, 0).

use serde::{Deserialize, Serialize};

use crate::integrator::{
    integrate, locate_event, Direction, StopPolicy, StopReason, Tolerances, Trajectory,
};
use crate::model::{invariants, Nonlinearity, Problem, State};
use crate::{Error, Result};

/// Amplitude scan window for [`find_periodic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGrid {
    pub a_min: f64,
    pub a_max: f64,
    /// Number of logarithmically spaced evaluation points.
    pub grid: usize,
}

impl Default for ScanGrid {
    /// Six decades around unit amplitude, about ten points per decade.
    fn default() -> Self {
        ScanGrid {
            a_min: 1e-3,
            a_max: 1e3,
            grid: 61,
        }
    }
}

/// Hard outer limits the scan may expand to, one decade at a time.
const SCAN_FLOOR: f64 = 1e-6;
const SCAN_CEIL: f64 = 1e6;

/// Joint tolerance of the symmetric extension.
const SYMMETRY_LIMIT: f64 = 1e-6;

/// End-state residuals of a constructed periodic solution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residuals {
    /// |w'(m)| at the point of symmetry.
    pub w1_at_m: f64,
    /// |w'''(m)| at the point of symmetry.
    pub w3_at_m: f64,
    /// Max component mismatch between the re-integrated state after one
    /// period and the initial state.
    pub closure: f64,
}

/// A validated periodic solution.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    /// Root amplitude a*.
    pub a_star: f64,
    /// First critical abscissa, the point of symmetry.
    pub m: f64,
    /// 4m: odd reflection about 0 and even reflection about m tile the line.
    pub period: f64,
    /// The trajectory over [0, m] the solution is generated from.
    pub half_wave: Trajectory,
    pub residuals: Residuals,
    /// Further sign-change brackets of the scan beyond the one solved.
    pub extra_brackets: Vec<(f64, f64)>,
}

/// Serializable summary (everything but the trajectory).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeriodicSummary {
    pub a_star: f64,
    pub m: f64,
    pub period: f64,
    pub residuals: Residuals,
}

impl PeriodicSolution {
    pub fn summary(&self) -> PeriodicSummary {
        PeriodicSummary {
            a_star: self.a_star,
            m: self.m,
            period: self.period,
            residuals: self.residuals,
        }
    }
}

/// Closed-form first-critical-point data of the linearized problem
/// `V'''' + k V'' + f'(0) V = 0` with data (0, 1, 0, -k/2).
///
/// For f'(0) > 0 (and k > 2 sqrt(f'(0))) the solution is
/// `V = (sin(λ₁ t)/λ₁ + sin(λ₂ t)/λ₂)/2` with λ₁ ≥ λ₂ the fourth-root
/// pair of the characteristic polynomial, so V' = (cos λ₁t + cos λ₂t)/2
/// and the first critical point solves cos(λ₂T) = -cos(λ₁T).  For
/// f'(0) = 0 one root pair collapses and the solution picks up a secular
/// (linear-in-t) term instead: V = (sin(√k t)/√k + t)/2, T = π/√k.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearLimitProfile {
    /// Fast frequency; √k in the secular branch.
    pub lambda1: f64,
    /// Slow frequency; 0 marks the secular branch.
    pub lambda2: f64,
    /// First critical abscissa of V.
    pub t_crit: f64,
    /// V'''(T), whose positivity drives the small-amplitude sign of the
    /// shooting map.
    pub v3_crit: f64,
    /// Whether the f'(0) = 0 secular branch applies.
    pub secular: bool,
}

/// Computes the [`LinearLimitProfile`]; needs k > 2 sqrt(f'(0)) unless
/// f'(0) = 0.
pub fn linear_limit_profile(k: f64, fprime0: f64) -> Result<LinearLimitProfile> {
    if !(k.is_finite() && fprime0.is_finite()) {
        return Err(Error::NonFiniteInput("linear profile parameters"));
    }
    if fprime0 < 0.0 {
        return Err(Error::NegativeDerivative(fprime0));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidInput(format!(
            "the linearization needs k > 0, got k = {k}"
        )));
    }
    if fprime0 == 0.0 {
        let rt = k.sqrt();
        return Ok(LinearLimitProfile {
            lambda1: rt,
            lambda2: 0.0,
            t_crit: std::f64::consts::PI / rt,
            v3_crit: k / 2.0,
            secular: true,
        });
    }
    let threshold = 2.0 * fprime0.sqrt();
    if k <= threshold {
        return Err(Error::DegenerateRoots { k, threshold });
    }
    let disc = (k * k - 4.0 * fprime0).sqrt();
    let lambda1 = ((k + disc) / 2.0).sqrt();
    let lambda2 = ((k - disc) / 2.0).sqrt();
    // V'(t) = (cos λ₁t + cos λ₂t)/2 is positive at π/(2λ₁) and negative
    // at π/λ₁, so the first zero sits between; bisect it down.
    let vp = |t: f64| ((lambda1 * t).cos() + (lambda2 * t).cos()) / 2.0;
    let (mut lo, mut hi) = (
        std::f64::consts::FRAC_PI_2 / lambda1,
        std::f64::consts::PI / lambda1,
    );
    for _ in 0..200 {
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if vp(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_crit = 0.5 * (lo + hi);
    let v3_crit = 0.5 * disc * (lambda2 * t_crit).cos();
    Ok(LinearLimitProfile {
        lambda1,
        lambda2,
        t_crit,
        v3_crit,
        secular: false,
    })
}

/// First sign change of w' strictly after the start, refined on the dense
/// output; `None` when w' keeps its sign over the whole trajectory.
fn first_derivative_zero(traj: &Trajectory) -> Result<Option<f64>> {
    let start = traj.s_start();
    let mut prev: Option<(f64, f64)> = None;
    for pair in traj.samples.windows(2) {
        let (a, b) = (pair[0].0.s, pair[1].0.s);
        for j in 0..=5 {
            let s = a + (b - a) * (j as f64) / 5.0;
            if s <= start {
                continue;
            }
            let g = traj.state_at(s).expect("inside span").y[1];
            if g == 0.0 {
                continue;
            }
            if let Some((ps, pg)) = prev {
                if pg.signum() != g.signum() {
                    return locate_event(traj, |st: &State| st.y[1], (ps, s)).map(Some);
                }
            }
            prev = Some((s, g));
        }
    }
    Ok(None)
}

/// Zero-energy shooting data for an amplitude.
fn shooting_state(k: f64, a: f64) -> State {
    State::new(0.0, [0.0, a, 0.0, -k * a / 2.0])
}

/// The trajectory to the first critical point and everything read there.
struct Shot {
    traj: Trajectory,
    m: f64,
    phi: f64,
}

fn shoot(prob: &Problem, a: f64, tol: Tolerances) -> Result<Shot> {
    if !a.is_finite() {
        return Err(Error::NonFiniteInput("shooting amplitude"));
    }
    if a <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "shooting amplitude must be positive, got {a}"
        )));
    }
    if !(prob.k > 0.0) {
        return Err(Error::InvalidInput(format!(
            "shooting requires k > 0, got k = {}",
            prob.k
        )));
    }
    let ic = shooting_state(prob.k, a);
    // m(a) shrinks like a^(-2σ/...) for large a and approaches the
    // linear-profile abscissa for small a; a few expanding horizons cover
    // every regime without paying for the largest up front.
    let mut last_end = 0.0;
    for horizon in [10.0, 50.0, 250.0] {
        let traj = integrate(prob, &ic, Direction::Forward, tol, &StopPolicy::to(horizon))?;
        if let Some(m) = first_derivative_zero(&traj)? {
            let st = traj.state_at(m).expect("inside span");
            return Ok(Shot {
                traj,
                m,
                phi: st.y[3],
            });
        }
        last_end = traj.s_end();
        if !matches!(traj.meta.stop_reason, StopReason::ReachedHorizon) {
            break;
        }
    }
    Err(Error::NoFirstCriticalPoint { s: last_end })
}

/// Shooting map φ(a) = w'''(m(a)) at default tolerances.
pub fn phi(prob: &Problem, a: f64) -> Result<f64> {
    phi_with(prob, a, Tolerances::default())
}

/// Shooting map at caller-chosen tolerances.
pub fn phi_with(prob: &Problem, a: f64, tol: Tolerances) -> Result<f64> {
    shoot(prob, a, tol).map(|s| s.phi)
}

/// Log-spaced amplitudes, endpoints included.
fn log_grid(a_min: f64, a_max: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a_min.ln(), a_max.ln());
    (0..n)
        .map(|i| (la + (lb - la) * (i as f64) / ((n - 1) as f64)).exp())
        .collect()
}

/// Finds a periodic solution by scanning φ for a sign change and bisecting
/// the first bracket.
///
/// The scan starts on `scan` and widens decade by decade (to at most
/// [1e-6, 1e6]) while φ keeps a single sign; when the widened scan still
/// has no sign change the search reports [`Error::BracketingFailed`] —
/// the expected outcome at or below the threshold k_f, where no periodic
/// solution exists.  Amplitudes where φ is undefined (no critical point
/// before escape) are skipped, and a bracket is only formed between
/// adjacent defined evaluations.  The first bracket is solved; any further
/// ones are reported unsolved in `extra_brackets`.
pub fn find_periodic(prob: &Problem, scan: &ScanGrid, tol: Tolerances) -> Result<PeriodicSolution> {
    if !prob.nl.is_odd() {
        return Err(Error::InvalidInput(
            "periodic construction needs an odd nonlinearity".to_string(),
        ));
    }
    if !(scan.a_min > 0.0 && scan.a_max > scan.a_min && scan.grid >= 2) {
        return Err(Error::InvalidInput(format!(
            "invalid scan grid: [{}, {}] with {} points",
            scan.a_min, scan.a_max, scan.grid
        )));
    }

    // Points per decade of the requested grid, reused when expanding.
    let decades = (scan.a_max / scan.a_min).log10();
    let density = ((scan.grid - 1) as f64 / decades).max(1.0);
    let (mut a_min, mut a_max) = (scan.a_min, scan.a_max);
    let brackets = loop {
        let n = ((a_max / a_min).log10() * density).round() as usize + 1;
        let amps = log_grid(a_min, a_max, n.max(2));
        let mut values = Vec::with_capacity(amps.len());
        for &a in &amps {
            match shoot(prob, a, tol) {
                Ok(shot) => values.push(Some(shot.phi)),
                Err(Error::NoFirstCriticalPoint { .. }) => values.push(None),
                Err(e) => return Err(e),
            }
        }
        let mut found = Vec::new();
        for i in 1..amps.len() {
            if let (Some(lo), Some(hi)) = (values[i - 1], values[i]) {
                if lo == 0.0 {
                    found.push((amps[i - 1], amps[i - 1]));
                } else if lo.signum() != hi.signum() {
                    found.push((amps[i - 1], amps[i]));
                }
            }
        }
        if let Some(&last) = values.last() {
            if last == Some(0.0) {
                found.push((*amps.last().unwrap(), *amps.last().unwrap()));
            }
        }
        if !found.is_empty() {
            break found;
        }
        if a_min <= SCAN_FLOOR && a_max >= SCAN_CEIL {
            return Err(Error::BracketingFailed { a_min, a_max });
        }
        a_min = (a_min / 10.0).max(SCAN_FLOOR);
        a_max = (a_max * 10.0).min(SCAN_CEIL);
    };

    // Root refinement needs φ resolved above integration noise, so the
    // bisection never evaluates looser than rel 1e-12.
    let fine = Tolerances::new(tol.rel.min(1e-12), tol.abs.min(1e-14));
    let (mut lo, mut hi) = brackets[0];
    let a_star = if lo == hi {
        lo
    } else {
        let mut flo = phi_with(prob, lo, fine)?;
        let target = |a: f64| 1e-10 * a.max(1.0);
        let mut root = None;
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi {
                break;
            }
            let fmid = phi_with(prob, mid, fine)?;
            if fmid.abs() <= target(mid) {
                root = Some(mid);
                break;
            }
            if fmid.signum() == flo.signum() {
                lo = mid;
                flo = fmid;
            } else {
                hi = mid;
            }
        }
        match root {
            Some(r) => r,
            None => {
                let mid = 0.5 * (lo + hi);
                let fmid = phi_with(prob, mid, fine)?;
                if fmid.abs() > target(mid) {
                    return Err(Error::ValidationFailed(format!(
                        "bisection stalled at a = {mid} with phi = {fmid:e}"
                    )));
                }
                mid
            }
        }
    };

    let shot = shoot(prob, a_star, fine)?;
    let half_wave = shot.traj.truncated_at(shot.m)?;
    let end = half_wave.state_at(shot.m).expect("end of half wave");
    let period = 4.0 * shot.m;

    // Validate by re-integrating one full period from the same data.
    let full = integrate(
        prob,
        &shooting_state(prob.k, a_star),
        Direction::Forward,
        fine,
        &StopPolicy::to(period),
    )?;
    let wrapped = full
        .state_at(period.min(full.s_end()))
        .expect("end of period");
    let ic = shooting_state(prob.k, a_star);
    let closure = (0..4)
        .map(|i| (wrapped.y[i] - ic.y[i]).abs())
        .fold(0.0, f64::max);
    let residuals = Residuals {
        w1_at_m: end.y[1].abs(),
        w3_at_m: end.y[3].abs(),
        closure,
    };
    if closure > 1e-6 {
        return Err(Error::ValidationFailed(format!(
            "one-period closure residual {closure:e} exceeds 1e-6"
        )));
    }
    Ok(PeriodicSolution {
        a_star,
        m: shot.m,
        period,
        half_wave,
        residuals,
        extra_brackets: brackets[1..].to_vec(),
    })
}

/// Adds `delta` to every stored abscissa (segments, samples, metadata).
fn translate_in_place(traj: &mut Trajectory, delta: f64) {
    for seg in &mut traj.segments {
        seg.lo += delta;
        seg.hi += delta;
        seg.t0 += delta;
    }
    for (st, _) in &mut traj.samples {
        st.s += delta;
    }
}

/// Negates the solution: w -> -w componentwise, functionals recomputed.
fn negate_in_place(traj: &mut Trajectory) -> Result<()> {
    let prob = traj.meta.problem.clone();
    for seg in &mut traj.segments {
        for comp in &mut seg.c {
            for c in comp {
                *c = -*c;
            }
        }
    }
    for (st, inv) in &mut traj.samples {
        for y in &mut st.y {
            *y = -*y;
        }
        *inv = invariants(&prob, st)?;
    }
    Ok(())
}

/// Tiles one full period [0, 4m] from a half wave over [0, m] ending at a
/// point of symmetry:
///
/// ```text
/// [0, m]   w(s)          [m, 2m]  w(2m - s)
/// [2m, 3m] -w(s - 2m)    [3m, 4m] -w(4m - s)
/// ```
///
/// The pieces are exact recompositions of the input's dense output.  The
/// data must start at s = 0 with w(0) = w''(0) = 0 (the odd pivot) and end
/// with |w'(m)|, |w'''(m)| small (the even pivot); any violation beyond
/// 1e-6 is a [`Error::SymmetryViolation`].  Only odd nonlinearities admit
/// the sign-flipped half (`odd_f`).
pub fn build_symmetric_extension(half: &Trajectory, m: f64, odd_f: bool) -> Result<Trajectory> {
    if !odd_f {
        return Err(Error::InvalidInput(
            "odd extension needs an odd nonlinearity".to_string(),
        ));
    }
    if half.s_start() != 0.0 {
        return Err(Error::InvalidInput(format!(
            "half wave must start at s = 0, starts at {}",
            half.s_start()
        )));
    }
    if !(m.is_finite() && (m - half.s_end()).abs() <= 1e-12 * (1.0 + m.abs())) {
        return Err(Error::InvalidInput(format!(
            "symmetry abscissa {m} does not match the half wave end {}",
            half.s_end()
        )));
    }
    let first = half.state_at(0.0).expect("start state");
    let last = half.state_at(half.s_end()).expect("end state");
    let mismatch = first.y[0]
        .abs()
        .max(first.y[2].abs())
        .max(last.y[1].abs())
        .max(last.y[3].abs());
    if mismatch > SYMMETRY_LIMIT {
        return Err(Error::SymmetryViolation {
            mismatch,
            limit: SYMMETRY_LIMIT,
        });
    }

    let mut reflected = half.reflected(); // w(-s) on [-m, 0]
    translate_in_place(&mut reflected, 2.0 * m); // w(2m-s) on [m, 2m]
    let mut negated = half.clone();
    negate_in_place(&mut negated)?; // -w(s) on [0, m]
    translate_in_place(&mut negated, 2.0 * m); // -w(s-2m) on [2m, 3m]
    let mut neg_reflected = half.reflected();
    negate_in_place(&mut neg_reflected)?; // -w(-s) on [-m, 0]
    translate_in_place(&mut neg_reflected, 4.0 * m); // -w(4m-s) on [3m, 4m]

    let mut segments = half.segments.clone();
    let mut samples = half.samples.clone();
    for piece in [reflected, negated, neg_reflected] {
        segments.extend(piece.segments);
        samples.extend(piece.samples.into_iter().skip(1));
    }
    let mut meta = half.meta.clone();
    meta.direction = Direction::Forward;
    meta.stop_reason = StopReason::ReachedHorizon;
    meta.stop.s_max = segments.last().expect("nonempty").hi;
    meta.naccept = segments.len();
    Ok(Trajectory {
        segments,
        samples,
        meta,
    })
}

/// Deviation of a rescaled shot from its large-amplitude limit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RescaleCheck {
    /// sup over [0, horizon] of |a^ρ w(a^{-σ} t) - V(t)|.
    pub sup_deviation: f64,
    /// First critical abscissa of the limit profile V, the comparison
    /// window's right edge.
    pub horizon: f64,
}

/// Compares the shot of amplitude `a`, rescaled by v(t) = a^ρ w(a^{-σ} t)
/// with σ = (p-1)/(p+3) and ρ = -4/(p+3), against the limit problem
/// `V'''' + |V|^{p-1}V = 0` with data (0, 1, 0, 0) over one rise of V.
///
/// Under the rescaling the linear terms carry coefficients k a^{-2σ} and
/// α a^{ρ(p-q)}, so the deviation vanishes as a grows.
pub fn limit_profile_deviation(prob: &Problem, a: f64, tol: Tolerances) -> Result<RescaleCheck> {
    let p = match prob.nl {
        Nonlinearity::Prototype { p, .. } => p,
        Nonlinearity::Custom { .. } => {
            return Err(Error::InvalidInput(
                "the rescaling limit needs prototype exponents".to_string(),
            ));
        }
    };
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rescaling amplitude must be positive, got {a}"
        )));
    }
    let sigma = (p - 1.0) / (p + 3.0);
    let rho = -4.0 / (p + 3.0);

    let limit_prob = Problem::prototype(0.0, 1.0, p, 0.0)?;
    let limit = integrate(
        &limit_prob,
        &State::new(0.0, [0.0, 1.0, 0.0, 0.0]),
        Direction::Forward,
        tol,
        &StopPolicy::to(20.0),
    )?;
    let horizon =
        first_derivative_zero(&limit)?.ok_or(Error::NoFirstCriticalPoint { s: limit.s_end() })?;

    // The shot covers the compressed window [0, a^{-σ} horizon].
    let squeeze = a.powf(-sigma);
    let shot = integrate(
        prob,
        &shooting_state(prob.k, a),
        Direction::Forward,
        tol,
        &StopPolicy::to(horizon * squeeze),
    )?;
    let amp = a.powf(rho);
    let mut sup = 0.0f64;
    for i in 0..=200 {
        let t = horizon * (i as f64) / 200.0;
        let v = amp * shot.state_at(t * squeeze).expect("inside window").y[0];
        let big_v = limit.state_at(t).expect("inside window").y[0];
        sup = sup.max((v - big_v).abs());
    }
    Ok(RescaleCheck {
        sup_deviation: sup,
        horizon,
    })
}
