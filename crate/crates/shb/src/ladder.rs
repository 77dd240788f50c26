//! Oscillation-ladder extraction and its monotonicity/scaling diagnostics.
//!
//! In the escape regime a nontrivial solution oscillates with growing
//! amplitude.  Each half-oscillation contributes a *rung*: the extremum m_j
//! of w, the following zero z_j of w, the zero tau_j of w''', the zero r_j
//! of w'', and the next extremum m_{j+1}, in that order, with w alternating
//! sign from one extremum to the next.  Writing M_j = |w(m_j)| for the rung
//! amplitudes and F for the antiderivative of f, the ladder carries the
//! structure the finite-space escape argument runs on:
//!
//! * H(m_j) = w''(m_j) w'''(m_j) is positive and strictly increasing;
//! * F(M_j) is strictly increasing, and from some index onward at least
//!   doubles every other rung;
//! * |w''(m_j)| scales like M_j^{(p+1)/2} and the intra-rung gaps like
//!   M_j^{(1-p)/4}, which [`sequence_diagnostics`] measures as log–log
//!   slopes over the trailing rungs.
//!
//! Extraction walks a subsampled grid over the dense output, brackets sign
//! changes of the relevant derivative, and refines each with
//! [`locate_event`].  Only sign *changes* count: a derivative that touches
//! zero without crossing is not an event.  For a critical point where w''
//! also vanishes (a degenerate extremum), the bracket is re-checked once at
//! tighter width and the max/min classification falls back to the sign of
//! w''' at the point.

use std::io;

use serde::Serialize;

use crate::integrator::{locate_event, Trajectory};
use crate::model::State;
use crate::{Error, Result};

/// A refined critical point of w with the data every diagnostic needs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Extremum {
    /// Abscissa m_j.
    pub s: f64,
    /// w(m_j) (signed).
    pub w: f64,
    /// w''(m_j).
    pub w2: f64,
    /// w'''(m_j).
    pub w3: f64,
    /// G at m_j.
    pub g: f64,
    /// H at m_j.
    pub h: f64,
    /// F(w(m_j)).
    pub f_of_w: f64,
    /// Local maximum (true) or minimum (false) of w.
    pub is_max: bool,
}

impl Extremum {
    /// Rung amplitude M_j = |w(m_j)|.
    pub fn amplitude(&self) -> f64 {
        self.w.abs()
    }
}

/// One rung: the events between an extremum and its successor.  Events that
/// were not found in the interval are `None` (outside the escape regime the
/// full pattern need not exist).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Rung {
    /// Left extremum abscissa m_j.
    pub m: f64,
    /// w(m_j).
    pub w_m: f64,
    /// First zero of w after m_j.
    pub z: Option<f64>,
    /// First zero of w''' after m_j.
    pub tau: Option<f64>,
    /// First zero of w'' after m_j.
    pub r: Option<f64>,
    /// First zero of w'''' after m_j; only searched once the amplitude
    /// reaches ten times the first rung's.
    pub theta: Option<f64>,
    /// Right extremum abscissa m_{j+1}.
    pub m_next: f64,
}

impl Rung {
    /// All of z, tau, r present.
    pub fn is_complete(&self) -> bool {
        self.z.is_some() && self.tau.is_some() && self.r.is_some()
    }
}

/// The extracted ladder: n extrema and the n-1 rungs between them.
#[derive(Debug, Clone, Serialize)]
pub struct Ladder {
    pub extrema: Vec<Extremum>,
    pub rungs: Vec<Rung>,
    /// Signs of w at the extrema (+1/-1).
    pub parity: Vec<i8>,
}

impl Ladder {
    /// Gaps m_{j+1} - m_j between consecutive extrema.
    pub fn gaps(&self) -> Vec<f64> {
        self.extrema.windows(2).map(|p| p[1].s - p[0].s).collect()
    }
}

/// Least-squares line through (ln x, ln y) pairs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the ln-residuals, as a goodness-of-fit measure.
    pub residual_rms: f64,
    /// Number of points that entered the fit (fits with n < 2 carry NaNs).
    pub n: usize,
}

/// Pass/fail record of the ladder's structural laws plus the scaling fits.
#[derive(Debug, Clone, Serialize)]
pub struct LadderReport {
    /// Per rung: all events present and ordered m < z < tau < r < m'.
    pub ordering_ok: Vec<bool>,
    /// Per rung: w alternates sign between the two extrema.
    pub sign_pattern_ok: Vec<bool>,
    /// Per consecutive extrema pair: F(M_{j+1}) > F(M_j).
    pub f_increasing_ok: Vec<bool>,
    /// First extremum index from which F(M_{i+1}) > 2 F(M_{i-1}) holds
    /// through the end of the ladder, if any.
    pub skip_one_doubling_from: Option<usize>,
    /// Slope of ln|w''(m_j)| against ln M_j over the trailing rungs.
    pub amp_fit: SlopeFit,
    /// Slopes of the ln gap lengths (z-m, r-z, m'-r) against ln M_j.
    pub gap_fits: [SlopeFit; 3],
}

/// Subsampling grid: segment joints plus four interior points per segment.
fn subgrid(traj: &Trajectory) -> Vec<f64> {
    let mut pts = Vec::with_capacity(traj.samples.len() * 5);
    for (st, _) in &traj.samples {
        pts.push(st.s);
    }
    let joints = pts.clone();
    for win in joints.windows(2) {
        let (a, b) = (win[0], win[1]);
        for j in 1..5 {
            pts.push(a + (b - a) * (j as f64) / 5.0);
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    pts
}

/// Brackets sign changes of `event` over the grid points inside
/// (lo, hi] and refines each; returns them in ascending order.
fn scan_events<F>(
    traj: &Trajectory,
    pts: &[f64],
    event: &F,
    lo: f64,
    hi: f64,
    first_only: bool,
) -> Result<Vec<f64>>
where
    F: Fn(&State) -> f64,
{
    let mut found = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &s in pts {
        if s < lo || s > hi {
            continue;
        }
        let g = event(&traj.state_at(s).expect("grid point inside span"));
        if g == 0.0 {
            // Exact zero on the grid: the surrounding nonzero values still
            // bracket it if it is a crossing, so just skip the point.
            continue;
        }
        if let Some((ps, pg)) = prev {
            if pg.signum() != g.signum() {
                let e = locate_event(traj, event, (ps, s))?;
                if e > lo && e <= hi {
                    found.push(e);
                    if first_only {
                        return Ok(found);
                    }
                }
            }
        }
        prev = Some((s, g));
    }
    Ok(found)
}

/// Extracts the ladder of every critical point strictly after `s_start`.
///
/// Errors with [`Error::TrivialSolution`] when the trajectory is
/// identically zero and with [`Error::NoCompleteRung`] when no rung with
/// the full event pattern exists after `s_start`.
pub fn extract_ladder(traj: &Trajectory, s_start: f64) -> Result<Ladder> {
    if !s_start.is_finite() {
        return Err(Error::NonFiniteInput("s_start"));
    }
    if traj.samples.iter().all(|(st, _)| st.y == [0.0; 4]) {
        return Err(Error::TrivialSolution);
    }
    let prob = &traj.meta.problem;
    let pts = subgrid(traj);
    let hi = traj.s_end();
    let ms = scan_events(traj, &pts, &|st: &State| st.y[1], s_start, hi, false)?;
    if ms.len() < 2 {
        return Err(Error::NoCompleteRung);
    }

    let mut extrema = Vec::with_capacity(ms.len());
    for &m in &ms {
        let st = traj.state_at(m).expect("refined event inside span");
        let inv = traj.invariants_at(m).expect("finite state");
        let degenerate_scale = 1e-10 * (1.0 + st.y[0].abs()).powi(2);
        let is_max = if st.y[2].abs() > degenerate_scale {
            st.y[2] < 0.0
        } else {
            // Degenerate critical point: classify by the sign of w'''.
            st.y[3] < 0.0
        };
        extrema.push(Extremum {
            s: m,
            w: st.y[0],
            w2: st.y[2],
            w3: st.y[3],
            g: inv.g,
            h: inv.h,
            f_of_w: prob.nl.f_int(st.y[0]),
            is_max,
        });
    }

    let m_first = extrema[0].amplitude();
    let k = prob.k;
    let nl = prob.nl.clone();
    let mut rungs = Vec::with_capacity(extrema.len() - 1);
    for pair in extrema.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let first_in = |ev: &dyn Fn(&State) -> f64| -> Result<Option<f64>> {
            let hits = scan_events(traj, &pts, &ev, a.s, b.s, true)?;
            Ok(hits.first().copied().filter(|&e| e < b.s))
        };
        let z = first_in(&|st: &State| st.y[0])?;
        let tau = first_in(&|st: &State| st.y[3])?;
        let r = first_in(&|st: &State| st.y[2])?;
        let theta = if a.amplitude() >= 10.0 * m_first {
            first_in(&|st: &State| -k * st.y[2] - nl.f(st.y[0]))?
        } else {
            None
        };
        rungs.push(Rung {
            m: a.s,
            w_m: a.w,
            z,
            tau,
            r,
            theta,
            m_next: b.s,
        });
    }

    if !rungs.iter().any(Rung::is_complete) {
        return Err(Error::NoCompleteRung);
    }
    let parity = extrema
        .iter()
        .map(|e| if e.w >= 0.0 { 1 } else { -1 })
        .collect();
    Ok(Ladder {
        extrema,
        rungs,
        parity,
    })
}

fn fit_loglog(points: &[(f64, f64)]) -> SlopeFit {
    let n = points.len();
    if n < 2 {
        return SlopeFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            residual_rms: f64::NAN,
            n,
        };
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let nf = n as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let denom = nf * sxx - sx * sx;
    let slope = (nf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / nf;
    let ss: f64 = logs
        .iter()
        .map(|&(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    SlopeFit {
        slope,
        intercept,
        residual_rms: (ss / nf).sqrt(),
        n,
    }
}

/// Checks the structural laws and measures the scaling exponents over the
/// trailing max(4, ⌈n/2⌉) rungs.  Needs at least four rungs.
pub fn sequence_diagnostics(lad: &Ladder) -> Result<LadderReport> {
    let nr = lad.rungs.len();
    if nr < 4 {
        return Err(Error::InsufficientRungs { got: nr, need: 4 });
    }
    let ordering_ok = lad
        .rungs
        .iter()
        .map(|r| match (r.z, r.tau, r.r) {
            (Some(z), Some(tau), Some(rr)) => r.m < z && z < tau && tau < rr && rr < r.m_next,
            _ => false,
        })
        .collect();
    let sign_pattern_ok = lad
        .extrema
        .windows(2)
        .map(|p| p[0].w * p[1].w < 0.0)
        .collect();
    let fm: Vec<f64> = lad.extrema.iter().map(|e| e.f_of_w).collect();
    let f_increasing_ok = fm.windows(2).map(|p| p[1] > p[0]).collect();
    let mut skip_one_doubling_from = None;
    for i in (1..fm.len() - 1).rev() {
        if fm[i + 1] > 2.0 * fm[i - 1] {
            skip_one_doubling_from = Some(i);
        } else {
            break;
        }
    }

    let take = (nr.div_ceil(2)).max(4).min(nr);
    let sel = nr - take..nr;
    let amp_pts: Vec<(f64, f64)> = sel
        .clone()
        .map(|j| (lad.extrema[j].amplitude(), lad.extrema[j].w2.abs()))
        .collect();
    let gap = |j: usize, which: usize| -> Option<(f64, f64)> {
        let r = &lad.rungs[j];
        let len = match which {
            0 => r.z? - r.m,
            1 => r.r? - r.z?,
            _ => r.m_next - r.r?,
        };
        (len > 0.0).then_some((lad.extrema[j].amplitude(), len))
    };
    let gap_fits = [0, 1, 2].map(|which| {
        let pts: Vec<(f64, f64)> = sel.clone().filter_map(|j| gap(j, which)).collect();
        fit_loglog(&pts)
    });
    Ok(LadderReport {
        ordering_ok,
        sign_pattern_ok,
        f_increasing_ok,
        skip_one_doubling_from,
        amp_fit: fit_loglog(&amp_pts),
        gap_fits,
    })
}

/// Writes the per-rung CSV: `j,m,z,tau,r,theta,M,F_M,G_m,H_m`, with 17
/// significant digits and empty fields for absent events.
pub fn write_ladder_csv(lad: &Ladder, out: &mut dyn io::Write) -> io::Result<()> {
    writeln!(out, "j,m,z,tau,r,theta,M,F_M,G_m,H_m")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for (j, rung) in lad.rungs.iter().enumerate() {
        let e = &lad.extrema[j];
        writeln!(
            out,
            "{},{:.16e},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            j + 1,
            rung.m,
            opt(rung.z),
            opt(rung.tau),
            opt(rung.r),
            opt(rung.theta),
            e.amplitude(),
            e.f_of_w,
            e.g,
            e.h
        )?;
    }
    Ok(())
}
