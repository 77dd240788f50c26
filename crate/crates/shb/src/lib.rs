//! Numerical toolkit for the stationary Swift–Hohenberg equation
//!
//! ```text
//! w''''(s) + k w''(s) + f(w(s)) = 0,
//! ```
//!
//! integrated as the first-order system y = (w, w', w'', w''').  The library
//! provides:
//!
//! * [`model`] — the nonlinearity family, growth-hypothesis checks, and the
//!   scalar functionals (conserved energy E, amplitude functional G, its
//!   derivative H, and the companion Hbar) that organize the dynamics;
//! * [`integrator`] — an adaptive Dormand–Prince 5(4) integrator with dense
//!   output, event location, escape detection, and an energy-drift audit;
//! * [`ladder`] — extraction of the oscillation ladder (extrema, zeros,
//!   inflection-type markers) and its monotonicity/scaling diagnostics;
//! * [`blowup`] — finite-space escape verdicts and a geometric-tail estimate
//!   bracketing the escape abscissa;
//! * [`shooting`] — periodic solutions for k above the threshold
//!   2·sqrt(f'(0)), via a topological shooting function and symmetric
//!   extension of the computed quarter wave, plus the small- and
//!   large-amplitude limit profiles;
//! * [`transforms`] — reflection, translation, the amplitude rescaling used
//!   by the large-shot limit, and the classical (mu-form) change of
//!   variables;
//! * [`cli`] — the `shb` command-line front end (CSV/JSON/SVG outputs).
//!
//! # Example
//!
//! Integrate the reference cubic problem f(t) = t³ + t at k = 3 from the
//! history-free data (0, 1, 0, -3/2), for which the energy E is exactly 0:
//!
//! ```
//! use shb::integrator::{integrate, Direction, StopPolicy, Tolerances};
//! use shb::model::{Problem, State};
//!
//! let prob = Problem::prototype(1.0, 1.0, 3.0, 3.0).unwrap();
//! let ic = State::new(0.0, [0.0, 1.0, 0.0, -1.5]);
//! let traj = integrate(&prob, &ic, Direction::Forward, Tolerances::default(),
//!                      &StopPolicy::to(6.0)).unwrap();
//! let audit = shb::integrator::energy_audit(&traj);
//! assert!(audit.max_drift < 1e-9);
//! ```

// Guards like `!(k > 0.0)` are negated on purpose so that NaN fails them;
// the un-negated comparison would silently accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod cli;
pub mod integrator;
pub mod ladder;
pub mod model;
pub mod shooting;
pub mod transforms;

mod error;

pub use error::{Error, Result};
