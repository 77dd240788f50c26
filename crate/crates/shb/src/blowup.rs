//! Escape classification and finite escape-abscissa estimation.
//!
//! In the regime 0 < k ≤ k_f (with the growth hypotheses holding) every
//! nontrivial solution leaves any bounded set at a finite abscissa R, and
//! the rung gaps m_{j+1} - m_j of its oscillation ladder contract
//! geometrically, because the gaps scale like M_j^{(1-p)/4} while the
//! amplitudes at least double every other rung.  [`estimate_r`] turns that
//! into a computable two-sided bracket: the last rung abscissa is a lower
//! bound for R (the solution demonstrably exists there), and summing the
//! fitted geometric tail on top of the last gap gives the upper estimate
//!
//! ```text
//! R_upper = m_last + g_last * rho / (1 - rho),   rho = fitted gap ratio.
//! ```
//!
//! [`detect_blowup`] wires the pipeline end to end — integrate, extract the
//! ladder, fit the tail — and renders a verdict.  Backward runs reuse the
//! forward pipeline on the reflected initial state (only even-order
//! derivatives enter the equation) and mirror the bracket back, so both
//! directions share one code path.

use serde::Serialize;

use crate::integrator::{integrate, reflect_state, Direction, StopPolicy, StopReason, Tolerances};
use crate::ladder::{extract_ladder, Ladder};
use crate::model::{check_hypotheses, GridSpec, Problem, Regime, State};
use crate::{Error, Result};

/// Outcome of a classification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The run escaped, or its ladder contracts with diverging amplitudes.
    FiniteEscape,
    /// The run reached the horizon with |w| below the escape threshold and
    /// no divergence signature.
    BoundedToHorizon,
    /// The run ended without reaching either the horizon or the escape
    /// threshold (step underflow or step-count cap).
    Inconclusive,
}

/// Two-sided escape-abscissa estimate from the ladder tail.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct REstimate {
    /// Last rung abscissa: the solution exists at least this far.
    pub r_lower: f64,
    /// Last rung abscissa plus the fitted geometric tail sum.
    pub r_upper: f64,
    /// Fitted ratio of consecutive rung gaps, in (0, 1).
    pub fitted_ratio: f64,
}

/// Full classification record for one direction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlowupReport {
    pub direction: Direction,
    pub verdict: Verdict,
    /// Bracket below the escape abscissa (`None` unless finite escape).
    #[serde(rename = "R_lower")]
    pub r_lower: Option<f64>,
    /// Bracket above the escape abscissa (`None` unless finite escape).
    #[serde(rename = "R_upper")]
    pub r_upper: Option<f64>,
    /// Fitted gap ratio backing the bracket.
    pub fitted_ratio: Option<f64>,
    /// Whether 0 < k <= k_f and all growth hypotheses hold, i.e. whether
    /// finite escape is guaranteed for every nontrivial solution.
    pub theorem_regime: bool,
}

/// Number of trailing gaps entering the geometric fit.  Six balances the
/// asymptotic nature of the contraction against double precision: for p = 3
/// the amplitudes reach the escape threshold after roughly a dozen rungs.
const FIT_WINDOW: usize = 6;

/// Fits a geometric ratio to the trailing rung gaps and sums the tail.
///
/// Needs at least three gaps; errors with [`Error::NoContraction`] when the
/// fitted ratio is not below one.
pub fn estimate_r(lad: &Ladder) -> Result<REstimate> {
    let gaps = lad.gaps();
    if gaps.len() < 3 {
        return Err(Error::InsufficientRungs {
            got: gaps.len(),
            need: 3,
        });
    }
    let tail = &gaps[gaps.len() - FIT_WINDOW.min(gaps.len())..];
    // Least squares of ln g_l against the gap index.
    let n = tail.len() as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (l, &g) in tail.iter().enumerate() {
        let (x, y) = (l as f64, g.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let ratio = slope.exp();
    if !(ratio < 1.0) {
        return Err(Error::NoContraction { ratio });
    }
    let m_last = lad.extrema.last().expect("ladder nonempty").s;
    let g_last = *gaps.last().expect("gaps nonempty");
    Ok(REstimate {
        r_lower: m_last,
        r_upper: m_last + g_last * ratio / (1.0 - ratio),
        fitted_ratio: ratio,
    })
}

/// Whether the problem sits where finite escape is guaranteed: 0 < k <= k_f
/// and the growth hypotheses hold (checked in closed form for the prototype
/// family, sampled otherwise).
fn theorem_regime(prob: &Problem) -> Result<bool> {
    if prob.regime()? != Regime::UniversalBlowup {
        return Ok(false);
    }
    let report = check_hypotheses(
        &prob.nl,
        &GridSpec {
            t_max: 10.0,
            n: 400,
        },
    )?;
    Ok(report.all_hold())
}

/// Runs the forward pipeline and classifies.  A run that escaped must also
/// yield a usable tail fit — fit failures propagate so the caller sees why
/// no bracket exists.  A run that stayed bounded is probed for the
/// divergence signature (contracting gaps and strictly growing amplitudes)
/// before it is called bounded.
fn classify_forward(
    prob: &Problem,
    ic: &State,
    tol: Tolerances,
    stop: &StopPolicy,
) -> Result<(Verdict, Option<REstimate>)> {
    let traj = integrate(prob, ic, Direction::Forward, tol, stop)?;
    if matches!(traj.meta.stop_reason, StopReason::Escape { .. }) {
        let lad = extract_ladder(&traj, traj.s_start())?;
        let est = estimate_r(&lad)?;
        return Ok((Verdict::FiniteEscape, Some(est)));
    }
    let divergence = extract_ladder(&traj, traj.s_start()).ok().and_then(|lad| {
        let growing = lad
            .extrema
            .windows(2)
            .all(|p| p[1].amplitude() > p[0].amplitude());
        match estimate_r(&lad) {
            Ok(est) if growing => Some(est),
            _ => None,
        }
    });
    if let Some(est) = divergence {
        Ok((Verdict::FiniteEscape, Some(est)))
    } else if traj.meta.stop_reason == StopReason::ReachedHorizon {
        Ok((Verdict::BoundedToHorizon, None))
    } else {
        Ok((Verdict::Inconclusive, None))
    }
}

/// Classifies one direction of the solution through `ic`, bracketing the
/// escape abscissa when the verdict is finite escape.
pub fn detect_blowup(
    prob: &Problem,
    ic: &State,
    dir: Direction,
    tol: Tolerances,
    stop: &StopPolicy,
) -> Result<BlowupReport> {
    let regime = theorem_regime(prob)?;
    let report = |verdict: Verdict, est: Option<REstimate>| BlowupReport {
        direction: dir,
        verdict,
        r_lower: est.map(|e| e.r_lower),
        r_upper: est.map(|e| e.r_upper),
        fitted_ratio: est.map(|e| e.fitted_ratio),
        theorem_regime: regime,
    };
    match dir {
        Direction::Forward => {
            let (verdict, est) = classify_forward(prob, ic, tol, stop)?;
            Ok(report(verdict, est))
        }
        Direction::Backward => {
            // Forward pipeline on the mirror image, bracket mirrored back:
            // the escape abscissa R of the reflected run sits at -R here.
            let mut stop_fwd = *stop;
            stop_fwd.s_max = -stop.s_max;
            let (verdict, est) = classify_forward(prob, &reflect_state(ic), tol, &stop_fwd)?;
            let est = est.map(|e| REstimate {
                r_lower: -e.r_upper,
                r_upper: -e.r_lower,
                fitted_ratio: e.fitted_ratio,
            });
            Ok(report(verdict, est))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::Tolerances;
    use crate::ladder::{Extremum, Rung};

    /// Ladder whose only meaningful content is the extremum abscissas.
    fn synthetic_ladder(abscissas: &[f64]) -> Ladder {
        let extrema: Vec<Extremum> = abscissas
            .iter()
            .enumerate()
            .map(|(j, &s)| Extremum {
                s,
                w: if j % 2 == 0 { 1.0 } else { -1.0 },
                w2: 0.0,
                w3: 0.0,
                g: 0.0,
                h: 0.0,
                f_of_w: 0.0,
                is_max: j % 2 == 0,
            })
            .collect();
        let rungs = extrema
            .windows(2)
            .map(|p| Rung {
                m: p[0].s,
                w_m: p[0].w,
                z: None,
                tau: None,
                r: None,
                theta: None,
                m_next: p[1].s,
            })
            .collect();
        let parity = extrema
            .iter()
            .map(|e| if e.w >= 0.0 { 1 } else { -1 })
            .collect();
        Ladder {
            extrema,
            rungs,
            parity,
        }
    }

    #[test]
    fn geometric_tail_sums_in_closed_form() {
        // Gaps 0.9^l from m = 0 sum to exactly 10.
        let mut abscissas = vec![0.0];
        let mut m = 0.0;
        for l in 0..8 {
            m += 0.9f64.powi(l);
            abscissas.push(m);
        }
        let est = estimate_r(&synthetic_ladder(&abscissas)).unwrap();
        assert!((est.fitted_ratio - 0.9).abs() < 1e-12);
        assert!(
            (est.r_upper - 10.0).abs() < 1e-9,
            "R_upper = {}",
            est.r_upper
        );
        assert_eq!(est.r_lower, *abscissas.last().unwrap());
    }

    #[test]
    fn equal_gaps_are_not_contracting() {
        let abscissas: Vec<f64> = (0..6).map(|j| j as f64).collect();
        match estimate_r(&synthetic_ladder(&abscissas)) {
            Err(Error::NoContraction { ratio }) => assert!((ratio - 1.0).abs() < 1e-12),
            other => panic!("expected NoContraction, got {other:?}"),
        }
    }

    #[test]
    fn tail_fit_needs_three_gaps() {
        let lad = synthetic_ladder(&[0.0, 1.0, 1.5]);
        assert!(matches!(
            estimate_r(&lad),
            Err(Error::InsufficientRungs { got: 2, need: 3 })
        ));
    }

    #[test]
    fn reference_run_escapes_both_ways() {
        let prob = Problem::prototype(1.0, 1.0, 3.0, 1.5).unwrap();
        let ic = State::new(0.0, [0.8, 0.0, 0.0, 0.0]);
        let stop = StopPolicy::to(100.0);
        let fwd =
            detect_blowup(&prob, &ic, Direction::Forward, Tolerances::default(), &stop).unwrap();
        assert_eq!(fwd.verdict, Verdict::FiniteEscape);
        assert!(fwd.theorem_regime);
        let (lo, hi) = (fwd.r_lower.unwrap(), fwd.r_upper.unwrap());
        assert!(lo < hi && hi - lo <= 1e-2, "bracket [{lo}, {hi}]");
        assert!(fwd.fitted_ratio.unwrap() < 1.0);

        // The initial state is even in s, so the backward picture is the
        // exact mirror.
        let bwd = detect_blowup(
            &prob,
            &ic,
            Direction::Backward,
            Tolerances::default(),
            &StopPolicy::to(-100.0),
        )
        .unwrap();
        assert_eq!(bwd.verdict, Verdict::FiniteEscape);
        assert_eq!(bwd.r_lower.unwrap(), -hi);
        assert_eq!(bwd.r_upper.unwrap(), -lo);
    }

    #[test]
    fn bounded_run_above_threshold() {
        let prob = Problem::prototype(1.0, 1.0, 3.0, 3.5).unwrap();
        let ic = State::new(0.0, [0.8, 0.0, 0.0, 0.0]);
        let rep = detect_blowup(
            &prob,
            &ic,
            Direction::Forward,
            Tolerances::default(),
            &StopPolicy::to(40.0),
        )
        .unwrap();
        assert_eq!(rep.verdict, Verdict::BoundedToHorizon);
        assert!(!rep.theorem_regime);
        assert!(rep.r_lower.is_none() && rep.r_upper.is_none() && rep.fitted_ratio.is_none());
    }

    #[test]
    fn report_serializes_with_the_documented_keys() {
        let rep = BlowupReport {
            direction: Direction::Forward,
            verdict: Verdict::FiniteEscape,
            r_lower: Some(6.7),
            r_upper: Some(6.8),
            fitted_ratio: Some(0.4),
            theorem_regime: true,
        };
        let json = serde_json::to_string(&rep).unwrap();
        assert_eq!(
            json,
            "{\"direction\":\"forward\",\"verdict\":\"finite_escape\",\"R_lower\":6.7,\
             \"R_upper\":6.8,\"fitted_ratio\":0.4,\"theorem_regime\":true}"
        );
        let bounded = BlowupReport {
            direction: Direction::Backward,
            verdict: Verdict::BoundedToHorizon,
            r_lower: None,
            r_upper: None,
            fitted_ratio: None,
            theorem_regime: false,
        };
        let json = serde_json::to_string(&bounded).unwrap();
        assert!(json.contains("\"verdict\":\"bounded_to_horizon\""));
        assert!(json.contains("\"R_lower\":null"));
    }
}
