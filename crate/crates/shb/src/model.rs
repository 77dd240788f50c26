//! The equation, its nonlinearity family, and the scalar functionals that
//! organize the dynamics.
//!
//! Everything in this crate concerns the fourth-order autonomous equation
//!
//! ```text
//! w''''(s) + k w''(s) + f(w(s)) = 0,
//! ```
//!
//! written as the first-order system y = (w, w', w'', w''') with
//! y' = (w', w'', w''', -k w'' - f(w)).  With F the antiderivative of f
//! vanishing at 0, the scalar functionals are
//!
//! ```text
//! E    = w' w''' - (w'')²/2 + (k/2)(w')² + F(w)     (constant along solutions)
//! G    = (w'')²/2 + (k/2)(w')² + F(w)
//! H    = G' = w'' w''' + k w' w'' + f(w) w'
//! H'   = (w''')² + k w' w''' + f'(w) (w')²
//! D    = (k² - 4 f'(w)) (w')²     (discriminant of H' as a quadratic in w''')
//! Hbar = w' w'' - w w''' - k w w'
//! ```
//!
//! At a critical point ξ of w (where w' = 0) the two quadratic halves of E
//! and G collapse and G(ξ) = 2 F(w(ξ)) - E, so F(w(ξ)) = (G(ξ) + E)/2.
//!
//! The growth conditions under which the finite-space escape results hold
//! are bundled into [`check_hypotheses`]: sign condition f(t)·t > 0 for
//! t ≠ 0, superquadratic growth of f(t)·t, domination f'(t) > f'(0) ≥ 0 away
//! from the origin, and strict positivity of f'(0).  For the prototype
//! family all four are decidable in closed form.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scalar callback used by custom nonlinearities.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The nonlinearity f in `w'''' + k w'' + f(w) = 0`.
///
/// The prototype family is
///
/// ```text
/// f(t) = alpha |t|^{q-1} t + |t|^{p-1} t,    alpha >= 0,  p > q >= 1,
/// ```
///
/// so the reference cubic f(t) = t³ + t is `(alpha, q, p) = (1, 1, 3)`.
/// When q = 1 the first term is evaluated as `alpha * t` exactly, which
/// gives f'(0) = alpha with no 0⁰ ambiguity.
///
/// Custom nonlinearities supply f and f' as closures and optionally the
/// antiderivative F (with F(0) = 0); when F is absent it is computed on
/// demand by adaptive quadrature to absolute accuracy 1e-12, which is exact
/// enough for every diagnostic in the crate but costs a quadrature per
/// evaluation — hot paths should pass `f_int` explicitly.
#[derive(Clone)]
pub enum Nonlinearity {
    /// `f(t) = alpha |t|^{q-1} t + |t|^{p-1} t`.
    Prototype { alpha: f64, q: f64, p: f64 },
    /// User-supplied f, f', optional antiderivative, and oddness flag.
    Custom {
        f: ScalarFn,
        fprime: ScalarFn,
        f_int: Option<ScalarFn>,
        odd: bool,
    },
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Prototype { alpha, q, p } => out
                .debug_struct("Prototype")
                .field("alpha", alpha)
                .field("q", q)
                .field("p", p)
                .finish(),
            Nonlinearity::Custom { odd, .. } => {
                out.debug_struct("Custom").field("odd", odd).finish()
            }
        }
    }
}

/// sign(t) |t|^e, with the removable value 0 at t = 0.
fn signed_pow(t: f64, e: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(e)
    }
}

impl Nonlinearity {
    /// Builds a prototype nonlinearity, validating `alpha >= 0`, `p > q >= 1`.
    pub fn prototype(alpha: f64, q: f64, p: f64) -> Result<Self> {
        if !(alpha.is_finite() && q.is_finite() && p.is_finite()) {
            return Err(Error::NonFiniteInput("prototype parameters"));
        }
        if alpha < 0.0 || q < 1.0 || p <= q {
            return Err(Error::InvalidInput(format!(
                "prototype requires alpha >= 0 and p > q >= 1, got alpha = {alpha}, q = {q}, p = {p}"
            )));
        }
        Ok(Nonlinearity::Prototype { alpha, q, p })
    }

    /// Wraps user-supplied callbacks.  `f_int` must satisfy F(0) = 0 when
    /// given; `odd` declares f(-t) = -f(t) and gates the symmetric-extension
    /// construction.
    pub fn custom(f: ScalarFn, fprime: ScalarFn, f_int: Option<ScalarFn>, odd: bool) -> Self {
        Nonlinearity::Custom {
            f,
            fprime,
            f_int,
            odd,
        }
    }

    /// Whether f is odd (exact for the prototype family).
    pub fn is_odd(&self) -> bool {
        match self {
            Nonlinearity::Prototype { .. } => true,
            Nonlinearity::Custom { odd, .. } => *odd,
        }
    }

    /// f'(0): `alpha` for q = 1, zero for q > 1, the callback value otherwise.
    pub fn fprime0(&self) -> f64 {
        match self {
            Nonlinearity::Prototype { alpha, q, .. } => {
                if *q == 1.0 {
                    *alpha
                } else {
                    0.0
                }
            }
            Nonlinearity::Custom { fprime, .. } => fprime(0.0),
        }
    }

    /// f(t).
    pub fn f(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Prototype { alpha, q, p } => {
                let low = if *q == 1.0 { t } else { signed_pow(t, *q) };
                alpha * low + signed_pow(t, *p)
            }
            Nonlinearity::Custom { f, .. } => f(t),
        }
    }

    /// f'(t).
    pub fn fprime(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Prototype { alpha, q, p } => {
                let low = if *q == 1.0 {
                    *alpha
                } else {
                    alpha * q * t.abs().powf(q - 1.0)
                };
                low + p * t.abs().powf(p - 1.0)
            }
            Nonlinearity::Custom { fprime, .. } => fprime(t),
        }
    }

    /// F(t), the antiderivative of f with F(0) = 0.
    pub fn f_int(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Prototype { alpha, q, p } => {
                alpha * t.abs().powf(q + 1.0) / (q + 1.0) + t.abs().powf(p + 1.0) / (p + 1.0)
            }
            Nonlinearity::Custom { f, f_int, .. } => match f_int {
                Some(big_f) => big_f(t),
                None => integral(&**f, 0.0, t, 1e-12),
            },
        }
    }
}

/// A fixed nonlinearity together with the linear coefficient k.
#[derive(Debug, Clone)]
pub struct Problem {
    pub nl: Nonlinearity,
    pub k: f64,
}

/// Position of k relative to the threshold k_f = 2*sqrt(f'(0)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// k <= 0: outside the range covered by this crate's diagnostics.
    NonPositive,
    /// 0 < k <= k_f: every nontrivial solution (under the growth
    /// hypotheses) escapes to infinity at a finite abscissa.
    UniversalBlowup,
    /// k > k_f: periodic solutions exist and the shooting layer applies.
    AbovePeriodicThreshold,
}

impl Problem {
    /// Builds a problem from an arbitrary nonlinearity.
    pub fn new(nl: Nonlinearity, k: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::NonFiniteInput("k"));
        }
        Ok(Problem { nl, k })
    }

    /// Prototype-family convenience constructor.
    pub fn prototype(alpha: f64, q: f64, p: f64, k: f64) -> Result<Self> {
        Problem::new(Nonlinearity::prototype(alpha, q, p)?, k)
    }

    /// Right-hand side of the first-order system, unchecked hot path:
    /// `(w, w', w'', w''') -> (w', w'', w''', -k w'' - f(w))`.
    #[inline]
    pub fn deriv(&self, y: &[f64; 4]) -> [f64; 4] {
        [y[1], y[2], y[3], -self.k * y[2] - self.nl.f(y[0])]
    }

    /// Classifies k against the threshold 2*sqrt(f'(0)).
    pub fn regime(&self) -> Result<Regime> {
        let kf = k_threshold(&self.nl)?;
        Ok(if self.k <= 0.0 {
            Regime::NonPositive
        } else if self.k <= kf {
            Regime::UniversalBlowup
        } else {
            Regime::AbovePeriodicThreshold
        })
    }
}

/// A point on a trajectory: abscissa s and y = (w, w', w'', w''').
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub s: f64,
    pub y: [f64; 4],
}

impl State {
    pub fn new(s: f64, y: [f64; 4]) -> Self {
        State { s, y }
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.y.iter().all(|v| v.is_finite())
    }

    /// w.
    pub fn w(&self) -> f64 {
        self.y[0]
    }

    /// w'.
    pub fn w1(&self) -> f64 {
        self.y[1]
    }

    /// w''.
    pub fn w2(&self) -> f64 {
        self.y[2]
    }

    /// w'''.
    pub fn w3(&self) -> f64 {
        self.y[3]
    }
}

/// The six scalar functionals evaluated at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantSample {
    /// E = w' w''' - (w'')²/2 + (k/2)(w')² + F(w); constant along solutions.
    #[serde(rename = "E")]
    pub e: f64,
    /// G = (w'')²/2 + (k/2)(w')² + F(w).
    #[serde(rename = "G")]
    pub g: f64,
    /// H = G' = w'' w''' + k w' w'' + f(w) w'.
    #[serde(rename = "H")]
    pub h: f64,
    /// H' = (w''')² + k w' w''' + f'(w)(w')².
    #[serde(rename = "Hprime")]
    pub hprime: f64,
    /// D = (k² - 4 f'(w))(w')², the discriminant of H' in w'''.
    #[serde(rename = "D")]
    pub d: f64,
    /// Hbar = w' w'' - w w''' - k w w'.
    #[serde(rename = "Hbar")]
    pub hbar: f64,
}

/// Evaluates (f(t), f'(t), F(t)), rejecting non-finite input or output.
pub fn eval_nonlinearity(nl: &Nonlinearity, t: f64) -> Result<(f64, f64, f64)> {
    if !t.is_finite() {
        return Err(Error::NonFiniteInput("eval_nonlinearity argument"));
    }
    let out = (nl.f(t), nl.fprime(t), nl.f_int(t));
    if !(out.0.is_finite() && out.1.is_finite() && out.2.is_finite()) {
        return Err(Error::NonFiniteInput("nonlinearity value"));
    }
    Ok(out)
}

/// Right-hand side of the first-order system with finiteness checks.
pub fn rhs(prob: &Problem, st: &State) -> Result<[f64; 4]> {
    if !st.is_finite() {
        return Err(Error::NonFiniteInput("rhs state"));
    }
    let dy = prob.deriv(&st.y);
    if dy.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("rhs value"));
    }
    Ok(dy)
}

/// The threshold k_f = 2*sqrt(f'(0)) separating universal finite-space
/// escape (0 < k <= k_f) from the regime with periodic solutions (k > k_f).
///
/// For the prototype family this is exact: 2*sqrt(alpha) when q = 1
/// (in particular exactly 2 for the reference cubic) and 0 when q > 1.
pub fn k_threshold(nl: &Nonlinearity) -> Result<f64> {
    let fp0 = nl.fprime0();
    if !fp0.is_finite() {
        return Err(Error::NonFiniteInput("f'(0)"));
    }
    if fp0 < 0.0 {
        return Err(Error::NegativeDerivative(fp0));
    }
    Ok(2.0 * fp0.sqrt())
}

/// Evaluates all six functionals at a state.
pub fn invariants(prob: &Problem, st: &State) -> Result<InvariantSample> {
    if !st.is_finite() {
        return Err(Error::NonFiniteInput("invariants state"));
    }
    let [w, w1, w2, w3] = st.y;
    let (f, fp, big_f) = eval_nonlinearity(&prob.nl, w)?;
    let k = prob.k;
    Ok(InvariantSample {
        e: w1 * w3 - 0.5 * w2 * w2 + 0.5 * k * w1 * w1 + big_f,
        g: 0.5 * w2 * w2 + 0.5 * k * w1 * w1 + big_f,
        h: w2 * w3 + k * w1 * w2 + f * w1,
        hprime: w3 * w3 + k * w1 * w3 + fp * w1 * w1,
        d: (k * k - 4.0 * fp) * (w1 * w1),
        hbar: w1 * w2 - w * w3 - k * w * w1,
    })
}

/// Symmetric sampling grid for the sampled hypothesis checks: 2n+1 points
/// uniformly covering [-t_max, t_max], origin included.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_max: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { t_max: 5.0, n: 50 }
    }
}

impl GridSpec {
    fn points(&self) -> Vec<f64> {
        let n = self.n as i64;
        (-n..=n)
            .map(|i| self.t_max * (i as f64) / (n as f64))
            .collect()
    }
}

/// Outcome of the growth-hypothesis checks.
///
/// For the prototype family every answer is decided in closed form
/// (`exact = true`); for custom nonlinearities the checks are sampled on the
/// grid and are therefore necessary-but-not-sufficient evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesesReport {
    /// f(t)·t > 0 for every t ≠ 0 (sign condition).
    pub sign_condition: bool,
    /// f(t)·t grows superquadratically for large |t| (needed for the
    /// finite-space escape results).
    pub superquadratic_growth: bool,
    /// f'(t) > f'(0) >= 0 for every t ≠ 0.
    pub derivative_dominates_origin: bool,
    /// f'(0) > 0 strictly.
    pub positive_derivative_at_origin: bool,
    /// Whether the answers are exact rather than sampled.
    pub exact: bool,
    /// First sampled violation, as (check name, offending t).
    pub first_violation: Option<(String, f64)>,
}

impl HypothesesReport {
    /// All four checks passed.
    pub fn all_hold(&self) -> bool {
        self.sign_condition
            && self.superquadratic_growth
            && self.derivative_dominates_origin
            && self.positive_derivative_at_origin
    }
}

/// Checks the growth hypotheses, in closed form for the prototype family
/// and by grid sampling otherwise.
///
/// Sampled checks: the sign condition and origin-domination are tested at
/// every grid point; superquadratic growth is a log–log slope test of
/// f(t)·t at the two outermost magnitudes on each side (slope > 2 required
/// on both).
pub fn check_hypotheses(nl: &Nonlinearity, grid: &GridSpec) -> Result<HypothesesReport> {
    if !(grid.t_max.is_finite() && grid.t_max > 0.0) || grid.n < 2 {
        return Err(Error::InvalidInput(format!(
            "grid requires t_max > 0 and n >= 2, got t_max = {}, n = {}",
            grid.t_max, grid.n
        )));
    }

    if let Nonlinearity::Prototype { alpha, q, .. } = nl {
        // alpha >= 0 and p > q >= 1 are enforced at construction, so the
        // sign condition, superquadratic growth of |t|^{p+1}, and
        // f'(t) - f'(0) = alpha q |t|^{q-1} [q>1] + p |t|^{p-1} > 0 hold
        // identically; only f'(0) > 0 depends on the parameters.
        return Ok(HypothesesReport {
            sign_condition: true,
            superquadratic_growth: true,
            derivative_dominates_origin: true,
            positive_derivative_at_origin: *q == 1.0 && *alpha > 0.0,
            exact: true,
            first_violation: None,
        });
    }

    let fp0 = nl.fprime0();
    let pts = grid.points();
    let mut report = HypothesesReport {
        sign_condition: true,
        superquadratic_growth: true,
        // The hypothesis demands f'(t) > f'(0) >= 0, so a negative f'(0)
        // fails it outright rather than being an input error here.
        derivative_dominates_origin: fp0 >= 0.0,
        positive_derivative_at_origin: fp0 > 0.0,
        exact: false,
        first_violation: None,
    };
    let violation =
        |report_flag: &mut bool, name: &str, t: f64, first: &mut Option<(String, f64)>| {
            *report_flag = false;
            if first.is_none() {
                *first = Some((name.to_string(), t));
            }
        };
    for &t in &pts {
        if t == 0.0 {
            continue;
        }
        let (f, fp, _big_f) = eval_nonlinearity(nl, t)?;
        if f * t <= 0.0 {
            violation(
                &mut report.sign_condition,
                "sign_condition",
                t,
                &mut report.first_violation,
            );
        }
        if fp <= fp0 {
            violation(
                &mut report.derivative_dominates_origin,
                "derivative_dominates_origin",
                t,
                &mut report.first_violation,
            );
        }
    }
    // Log–log slope of t f(t) at the two outermost magnitudes on each side.
    for sign in [1.0, -1.0] {
        let t2 = sign * grid.t_max;
        let t1 = sign * grid.t_max * ((grid.n - 1) as f64) / (grid.n as f64);
        let g2 = nl.f(t2) * t2;
        let g1 = nl.f(t1) * t1;
        let ok = g1 > 0.0 && g2 > 0.0 && {
            let slope = (g2 / g1).ln() / (t2.abs() / t1.abs()).ln();
            slope > 2.0
        };
        if !ok {
            violation(
                &mut report.superquadratic_growth,
                "superquadratic_growth",
                t2,
                &mut report.first_violation,
            );
        }
    }
    if !report.positive_derivative_at_origin && report.first_violation.is_none() {
        report.first_violation = Some(("positive_derivative_at_origin".to_string(), 0.0));
    }
    Ok(report)
}

/// Serializable description of a problem (prototype family only, since
/// closures do not round-trip through JSON).
///
/// Serialized form, exactly:
/// `{"kind":"prototype","alpha":1.0,"q":1.0,"p":3.0,"k":1.5}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Prototype { alpha: f64, q: f64, p: f64, k: f64 },
}

impl ProblemSpec {
    /// Validates and builds the runnable problem.
    pub fn build(&self) -> Result<Problem> {
        let ProblemSpec::Prototype { alpha, q, p, k } = *self;
        Problem::prototype(alpha, q, p, k)
    }
}

impl Problem {
    /// The serializable description, when the nonlinearity is a prototype.
    pub fn spec(&self) -> Result<ProblemSpec> {
        match self.nl {
            Nonlinearity::Prototype { alpha, q, p } => Ok(ProblemSpec::Prototype {
                alpha,
                q,
                p,
                k: self.k,
            }),
            Nonlinearity::Custom { .. } => Err(Error::InvalidInput(
                "custom nonlinearities have no serializable form".to_string(),
            )),
        }
    }
}

/// Adaptive Simpson quadrature of `f` over [a, b] to absolute accuracy
/// `tol`; handles a > b by orientation.
pub(crate) fn integral(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adapt(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn adapt(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(k: f64) -> Problem {
        Problem::prototype(1.0, 1.0, 3.0, k).unwrap()
    }

    #[test]
    fn prototype_values_at_one() {
        let nl = Nonlinearity::prototype(1.0, 1.0, 3.0).unwrap();
        let (f, fp, big_f) = eval_nonlinearity(&nl, 1.0).unwrap();
        assert_eq!(f, 2.0);
        assert_eq!(fp, 4.0);
        assert_eq!(big_f, 0.75);
        let (f0, fp0, big_f0) = eval_nonlinearity(&nl, 0.0).unwrap();
        assert_eq!((f0, fp0, big_f0), (0.0, 1.0, 0.0));
        assert_eq!(nl.f(-1.0), -2.0); // odd
    }

    #[test]
    fn prototype_rejects_bad_parameters() {
        assert!(Nonlinearity::prototype(-0.5, 1.0, 3.0).is_err());
        assert!(Nonlinearity::prototype(1.0, 0.5, 3.0).is_err());
        assert!(Nonlinearity::prototype(1.0, 3.0, 3.0).is_err());
        assert!(Nonlinearity::prototype(f64::NAN, 1.0, 3.0).is_err());
    }

    #[test]
    fn rhs_examples() {
        let st = State::new(0.0, [0.0, 1.0, 0.0, -1.0]);
        let dy = rhs(&cubic(2.0), &st).unwrap();
        assert_eq!(dy, [1.0, 0.0, -1.0, 0.0]);

        let zero = State::new(0.0, [0.0; 4]);
        assert_eq!(rhs(&cubic(2.0), &zero).unwrap(), [0.0; 4]);

        let st = State::new(0.0, [0.8, 0.0, 0.0, 0.0]);
        let dy = rhs(&cubic(3.5), &st).unwrap();
        assert_eq!(dy[..3], [0.0, 0.0, 0.0]);
        assert!((dy[3] + 1.312).abs() < 1e-12, "dy[3] = {}", dy[3]);

        let bad = State::new(0.0, [f64::NAN, 0.0, 0.0, 0.0]);
        assert!(matches!(
            rhs(&cubic(2.0), &bad),
            Err(Error::NonFiniteInput(_))
        ));
    }

    #[test]
    fn threshold_values() {
        let nl = Nonlinearity::prototype(1.0, 1.0, 3.0).unwrap();
        assert_eq!(k_threshold(&nl).unwrap(), 2.0); // exact

        let nl = Nonlinearity::prototype(2.7, 1.5, 3.0).unwrap();
        assert_eq!(k_threshold(&nl).unwrap(), 0.0); // q > 1 kills f'(0)

        let lin: ScalarFn = Arc::new(|t| 4.0 * t);
        let dlin: ScalarFn = Arc::new(|_| 4.0);
        let nl = Nonlinearity::custom(lin, dlin, None, true);
        assert_eq!(k_threshold(&nl).unwrap(), 4.0);

        let neg: ScalarFn = Arc::new(|t| -t);
        let dneg: ScalarFn = Arc::new(|_| -1.0);
        let nl = Nonlinearity::custom(neg, dneg, None, true);
        assert!(matches!(
            k_threshold(&nl),
            Err(Error::NegativeDerivative(_))
        ));
    }

    #[test]
    fn invariants_at_zero_energy_data() {
        // (0, 1, 0, -k/2) at k = 3 forces E = 0 and H = 0 exactly.
        let st = State::new(0.0, [0.0, 1.0, 0.0, -1.5]);
        let inv = invariants(&cubic(3.0), &st).unwrap();
        assert_eq!(inv.e, 0.0);
        assert_eq!(inv.h, 0.0);
        assert_eq!(inv.g, 1.5);
        assert_eq!(inv.d, 5.0); // (9 - 4·1)·1
        assert_eq!(inv.hbar, 0.0);
    }

    #[test]
    fn invariants_at_rest_point_data() {
        // At (0.8, 0, 0, 0) every derivative term drops out, so
        // E = G = F(0.8) and the critical-point identity F = (G + E)/2
        // holds on the nose.
        let st = State::new(0.0, [0.8, 0.0, 0.0, 0.0]);
        let inv = invariants(&cubic(1.5), &st).unwrap();
        let big_f = 0.5 * 0.8f64.powi(2) + 0.25 * 0.8f64.powi(4);
        assert!((inv.e - big_f).abs() < 1e-15);
        assert!((inv.g - big_f).abs() < 1e-15);
        assert_eq!(inv.h, 0.0);
        assert!((0.5 * (inv.g + inv.e) - big_f).abs() < 1e-15);
        assert!((inv.e - 0.4224).abs() < 1e-15);
    }

    #[test]
    fn zero_state_has_zero_invariants() {
        let inv = invariants(&cubic(2.0), &State::new(0.0, [0.0; 4])).unwrap();
        assert_eq!(
            (inv.e, inv.g, inv.h, inv.hprime, inv.d, inv.hbar),
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn hypotheses_prototype_all_hold() {
        let nl = Nonlinearity::prototype(1.0, 1.0, 3.0).unwrap();
        let rep = check_hypotheses(&nl, &GridSpec::default()).unwrap();
        assert!(rep.all_hold());
        assert!(rep.exact);
    }

    #[test]
    fn hypotheses_prototype_without_linear_part() {
        let nl = Nonlinearity::prototype(0.0, 2.0, 3.0).unwrap();
        let rep = check_hypotheses(&nl, &GridSpec::default()).unwrap();
        assert!(!rep.positive_derivative_at_origin);
        assert!(rep.sign_condition && rep.superquadratic_growth && rep.derivative_dominates_origin);
    }

    #[test]
    fn hypotheses_cubic_minus_linear_fails_sign() {
        // f(t) = t³ - t pushes toward the origin for |t| < 1.
        let f: ScalarFn = Arc::new(|t: f64| t.powi(3) - t);
        let fp: ScalarFn = Arc::new(|t: f64| 3.0 * t * t - 1.0);
        let nl = Nonlinearity::custom(f, fp, None, true);
        let rep = check_hypotheses(&nl, &GridSpec::default()).unwrap();
        assert!(!rep.sign_condition);
        assert!(!rep.exact);
        let (name, t) = rep.first_violation.unwrap();
        assert_eq!(name, "sign_condition");
        assert!(t.abs() <= 1.0); // first offender is t = -1 where f(t)·t = 0
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        for (alpha, q, p) in [(1.0, 1.0, 3.0), (0.5, 2.0, 3.7), (2.0, 1.0, 2.0)] {
            let nl = Nonlinearity::prototype(alpha, q, p).unwrap();
            for t in [-3.0, -1.2, -0.3, 0.0, 0.4, 1.0, 2.5] {
                let direct = nl.f_int(t);
                let quad = integral(&|x| nl.f(x), 0.0, t, 1e-13);
                assert!(
                    (direct - quad).abs() <= 1e-10 * direct.abs().max(1.0),
                    "F mismatch at t = {t}: {direct} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn custom_without_antiderivative_uses_quadrature() {
        let f: ScalarFn = Arc::new(|t: f64| t.powi(3) + t);
        let fp: ScalarFn = Arc::new(|t: f64| 3.0 * t * t + 1.0);
        let nl = Nonlinearity::custom(f, fp, None, true);
        let exact = 0.25 * 1.3f64.powi(4) + 0.5 * 1.3f64.powi(2);
        assert!((nl.f_int(1.3) - exact).abs() < 1e-11);
        assert_eq!(nl.f_int(0.0), 0.0);
    }

    #[test]
    fn problem_spec_round_trip() {
        let spec = ProblemSpec::Prototype {
            alpha: 1.0,
            q: 1.0,
            p: 3.0,
            k: 1.5,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"prototype","alpha":1.0,"q":1.0,"p":3.0,"k":1.5}"#
        );
        let back: ProblemSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert!(back.build().is_ok());
    }

    #[test]
    fn regime_classification() {
        assert_eq!(cubic(-1.0).regime().unwrap(), Regime::NonPositive);
        assert_eq!(cubic(1.5).regime().unwrap(), Regime::UniversalBlowup);
        assert_eq!(cubic(2.0).regime().unwrap(), Regime::UniversalBlowup); // boundary included
        assert_eq!(cubic(3.5).regime().unwrap(), Regime::AbovePeriodicThreshold);
    }
}
