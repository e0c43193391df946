//! Scalar majorant functions and their Newton sequences.
//!
//! A majorant `f: [0, R) -> R` satisfies
//!
//! * h1: `f(0) > 0`, `f'(0) = -1`,
//! * h2: `f'` convex and strictly increasing,
//! * h3: `f(t) = 0` for some `t`,
//! * h4: `f(t) < 0` for some `t` (only when requested).
//!
//! Two closed-form families are provided ([`MajorantSpec::Quadratic`] for the
//! Lipschitz case, [`MajorantSpec::Smale`] for analytic maps), plus the
//! perturbed majorant `g(t) = -[f(t + rho) + 2 rho] / f'(rho)` used for
//! robustness balls, and [`CustomMajorant`] for user supplied callbacks.
//!
//! Every closed-form quantity (`t*`, `beta`) is recomputed numerically by
//! bisection or golden-section search and a disagreement is reported as
//! [`Error::CrossCheck`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default stopping tolerance on `t* - t_k`.
pub const DEFAULT_STOP_TOL: f64 = 1e-14;
/// Default cap on the number of scalar Newton steps.
pub const DEFAULT_K_MAX: usize = 60;

const CROSS_CHECK_TOL: f64 = 1e-10;
const H_SAMPLES: usize = 1000;

/// `3 - 2 sqrt(2)`, the largest admissible `alpha = b gamma`.
pub fn smale_alpha_bound() -> f64 {
    3.0 - 2.0 * std::f64::consts::SQRT_2
}

/// How a set of h-conditions was established.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMethod {
    Analytic,
    /// Dense sampling; evidence rather than proof.
    Empirical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HConditions {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
    pub method: CheckMethod,
}

impl HConditions {
    pub fn all(&self) -> bool {
        self.h1 && self.h2 && self.h3 && self.h4
    }
}

/// Scalar function interface shared by every majorant.
///
/// Implementors supply the raw function, its derivative, the left derivative
/// of the derivative, and the right end of the domain `[0, R)`. The provided
/// methods derive everything else numerically; closed-form families override
/// them.
pub trait Majorant {
    fn value(&self, t: f64) -> f64;
    fn slope(&self, t: f64) -> f64;
    /// `D^- f'(t)`.
    fn curvature(&self, t: f64) -> f64;
    /// Right end `R` of the domain `[0, R)`; may be `+inf`.
    fn domain_end(&self) -> f64;

    fn in_domain(&self, t: f64) -> bool {
        t >= 0.0 && t < self.domain_end()
    }

    fn eval_f(&self, t: f64) -> Result<f64> {
        domain_guard(self, t)?;
        Ok(self.value(t))
    }

    fn eval_fprime(&self, t: f64) -> Result<f64> {
        domain_guard(self, t)?;
        Ok(self.slope(t))
    }

    fn eval_fprime_left_derivative_at(&self, t: f64) -> Result<f64> {
        domain_guard(self, t)?;
        Ok(self.curvature(t))
    }

    /// `t_bar = sup { t in [0, R) : f'(t) < 0 }`.
    fn t_bar(&self) -> f64 {
        numeric_t_bar(self)
    }

    /// Smallest zero `t*` of `f`.
    fn smallest_zero(&self) -> Result<f64> {
        numeric_smallest_zero(self)
    }

    /// `beta = sup { -f(t) : t in [0, R) }`; requires h4.
    fn beta(&self) -> Result<f64> {
        let beta = numeric_beta(self);
        if beta > 0.0 {
            Ok(beta)
        } else {
            Err(Error::Hypothesis(format!(
                "h4 fails: f is nonnegative on its domain (sup -f = {beta:e})"
            )))
        }
    }

    fn h_conditions(&self) -> HConditions {
        empirical_h_conditions(self)
    }
}

fn domain_guard<M: Majorant + ?Sized>(m: &M, t: f64) -> Result<()> {
    if m.in_domain(t) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "t = {t} outside [0, {})",
            m.domain_end()
        )))
    }
}

/// Largest float strictly below `x` (for finite positive `x`).
fn below(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

/// Bisection for a sign change of `g` on `[lo, hi]` with `g(lo) > 0 >= g(hi)`
/// (or the reverse when `positive_low` is false). Runs to machine precision.
fn bisect(mut lo: f64, mut hi: f64, positive_low: bool, g: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if (v > 0.0) == positive_low {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_min(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..400 {
        if (hi - lo) <= 1e-15 * (1.0 + lo.abs() + hi.abs()) {
            break;
        }
        if gc < gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - inv_phi * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + inv_phi * (hi - lo);
            gd = g(d);
        }
    }
    let t = 0.5 * (lo + hi);
    let candidates = [(t, g(t)), (lo, g(lo)), (hi, g(hi))];
    candidates
        .into_iter()
        .fold((t, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// `t_bar` located by bisection on the sign of `f'`.
pub fn numeric_t_bar<M: Majorant + ?Sized>(m: &M) -> f64 {
    let end = m.domain_end();
    let hi = if end.is_finite() {
        let last = below(end);
        if m.slope(last) < 0.0 {
            return end;
        }
        last
    } else {
        let mut hi = 1.0;
        while m.slope(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        hi
    };
    bisect(0.0, hi, false, |t| m.slope(t))
}

fn root_tolerance(scale: f64, slope: f64, curvature: f64) -> f64 {
    // uncertainty of a root from the rounding error in f near it
    let df = 16.0 * f64::EPSILON * scale;
    let simple = if slope != 0.0 { df / slope.abs() } else { f64::INFINITY };
    let double = if curvature > 0.0 {
        (2.0 * df / curvature).sqrt()
    } else {
        f64::INFINITY
    };
    simple.min(double)
}

/// Smallest zero of `f` by bisection on `[0, t_bar]`.
pub fn numeric_smallest_zero<M: Majorant + ?Sized>(m: &M) -> Result<f64> {
    let f0 = m.value(0.0);
    if !(f0 > 0.0) {
        return Err(Error::Hypothesis(format!("h1 fails: f(0) = {f0}")));
    }
    let tb = m.t_bar();
    let hi = if tb.is_finite() {
        if tb >= m.domain_end() {
            below(tb)
        } else {
            tb
        }
    } else {
        // f' < 0 everywhere on an unbounded domain: search outward for f <= 0
        let mut hi = 1.0;
        while m.value(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::NoZero("f stays positive on [0, +inf)".into()));
            }
        }
        hi
    };
    let f_hi = m.value(hi);
    if f_hi > 0.0 {
        let scale = 1.0 + f0.abs() + hi.abs();
        if f_hi <= 16.0 * f64::EPSILON * scale {
            // double root at t_bar within rounding
            return Ok(hi);
        }
        return Err(Error::NoZero(format!(
            "min f = f({hi}) = {f_hi:e} > 0 (h3 fails)"
        )));
    }
    Ok(bisect(0.0, hi, true, |t| m.value(t)))
}

/// `sup -f` on the domain by golden-section search.
pub fn numeric_beta<M: Majorant + ?Sized>(m: &M) -> f64 {
    let tb = m.t_bar();
    let end = m.domain_end();
    let hi = if end.is_finite() {
        below(end)
    } else if tb.is_finite() {
        2.0 * tb + 1.0
    } else {
        return f64::INFINITY;
    };
    let (_, min) = golden_min(0.0, hi, |t| m.value(t));
    -min
}

/// h-conditions by sampling `f`, `f'` on a grid of 1000 points.
pub fn empirical_h_conditions<M: Majorant + ?Sized>(m: &M) -> HConditions {
    let end = m.domain_end();
    let tb = m.t_bar();
    let upper = if end.is_finite() {
        end
    } else if tb.is_finite() {
        2.0 * tb + 1.0
    } else {
        1e3
    };
    let grid: Vec<f64> = (0..H_SAMPLES)
        .map(|i| upper * i as f64 / H_SAMPLES as f64)
        .collect();
    let slopes: Vec<f64> = grid.iter().map(|&t| m.slope(t)).collect();
    let h1 = m.value(0.0) > 0.0 && (m.slope(0.0) + 1.0).abs() <= 1e-12;
    let increasing = slopes.windows(2).all(|w| w[1] > w[0]);
    let convex = slopes.windows(3).all(|w| {
        let tol = 1e-9 * (1.0 + w[0].abs() + w[2].abs());
        w[1] <= 0.5 * (w[0] + w[2]) + tol
    });
    let mut values = grid.iter().skip(1).map(|&t| m.value(t));
    let min_value = values.by_ref().fold(f64::INFINITY, f64::min);
    HConditions {
        h1,
        h2: increasing && convex,
        h3: min_value <= 0.0,
        h4: min_value < 0.0,
        method: CheckMethod::Empirical,
    }
}

/// The two closed-form majorant families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MajorantSpec {
    /// `f(t) = L t^2 / 2 - t + b` on `[0, +inf)`.
    Quadratic {
        #[serde(rename = "L")]
        l: f64,
        b: f64,
    },
    /// `f(t) = t / (1 - gamma t) - 2 t + b` on `[0, 1 / gamma)`.
    Smale { gamma: f64, b: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be a positive finite number, got {v}"
        )))
    }
}

impl MajorantSpec {
    pub fn quadratic(l: f64, b: f64) -> Result<Self> {
        positive("L", l)?;
        positive("b", b)?;
        Ok(MajorantSpec::Quadratic { l, b })
    }

    pub fn smale(gamma: f64, b: f64) -> Result<Self> {
        positive("gamma", gamma)?;
        positive("b", b)?;
        Ok(MajorantSpec::Smale { gamma, b })
    }

    pub fn b(&self) -> f64 {
        match *self {
            MajorantSpec::Quadratic { b, .. } | MajorantSpec::Smale { b, .. } => b,
        }
    }

    /// `2 b L` for the quadratic family, `alpha = b gamma` for Smale.
    pub fn hypothesis_quantity(&self) -> f64 {
        match *self {
            MajorantSpec::Quadratic { l, b } => 2.0 * b * l,
            MajorantSpec::Smale { gamma, b } => b * gamma,
        }
    }

    fn hypothesis_bound(&self) -> f64 {
        match self {
            MajorantSpec::Quadratic { .. } => 1.0,
            MajorantSpec::Smale { .. } => smale_alpha_bound(),
        }
    }

    /// Closed-form `t*`, `None` when h3 fails.
    pub fn closed_form_zero(&self) -> Option<f64> {
        if self.hypothesis_quantity() > self.hypothesis_bound() {
            return None;
        }
        Some(match *self {
            // 2b / (1 + sqrt(1 - 2bL)) == (1 - sqrt(1 - 2bL)) / L without cancellation
            MajorantSpec::Quadratic { l, b } => 2.0 * b / (1.0 + (1.0 - 2.0 * b * l).max(0.0).sqrt()),
            MajorantSpec::Smale { gamma, b } => {
                let alpha = b * gamma;
                let disc = ((alpha + 1.0).powi(2) - 8.0 * alpha).max(0.0);
                // rationalized (alpha + 1 - sqrt(disc)) / (4 gamma)
                2.0 * b / (alpha + 1.0 + disc.sqrt())
            }
        })
    }

    /// Closed-form `beta`; `<= 0` when h4 fails.
    pub fn closed_form_beta(&self) -> f64 {
        match *self {
            MajorantSpec::Quadratic { l, b } => (1.0 - 2.0 * l * b) / (2.0 * l),
            MajorantSpec::Smale { gamma, b } => (smale_alpha_bound() - b * gamma) / gamma,
        }
    }

    /// Closed-form quadratic-rate constant, `None` unless h4 holds.
    pub fn closed_form_rate_constant(&self) -> Option<f64> {
        if self.hypothesis_quantity() >= self.hypothesis_bound() {
            return None;
        }
        Some(match *self {
            MajorantSpec::Quadratic { l, b } => l / (2.0 * (1.0 - 2.0 * b * l).sqrt()),
            MajorantSpec::Smale { gamma, .. } => {
                let u = 1.0 - gamma * self.closed_form_zero()?;
                gamma / (u * (2.0 * u * u - 1.0))
            }
        })
    }
}

impl Majorant for MajorantSpec {
    fn value(&self, t: f64) -> f64 {
        match *self {
            MajorantSpec::Quadratic { l, b } => 0.5 * l * t * t - t + b,
            MajorantSpec::Smale { gamma, b } => t / (1.0 - gamma * t) - 2.0 * t + b,
        }
    }

    fn slope(&self, t: f64) -> f64 {
        match *self {
            MajorantSpec::Quadratic { l, .. } => l * t - 1.0,
            MajorantSpec::Smale { gamma, .. } => {
                let u = 1.0 - gamma * t;
                1.0 / (u * u) - 2.0
            }
        }
    }

    fn curvature(&self, t: f64) -> f64 {
        match *self {
            MajorantSpec::Quadratic { l, .. } => l,
            MajorantSpec::Smale { gamma, .. } => {
                let u = 1.0 - gamma * t;
                2.0 * gamma / (u * u * u)
            }
        }
    }

    fn domain_end(&self) -> f64 {
        match *self {
            MajorantSpec::Quadratic { .. } => f64::INFINITY,
            MajorantSpec::Smale { gamma, .. } => 1.0 / gamma,
        }
    }

    fn t_bar(&self) -> f64 {
        match *self {
            MajorantSpec::Quadratic { l, .. } => 1.0 / l,
            MajorantSpec::Smale { gamma, .. } => (1.0 - std::f64::consts::FRAC_1_SQRT_2) / gamma,
        }
    }

    fn smallest_zero(&self) -> Result<f64> {
        let closed = self.closed_form_zero().ok_or_else(|| {
            Error::NoZero(format!(
                "{} = {} exceeds {}",
                match self {
                    MajorantSpec::Quadratic { .. } => "2bL",
                    MajorantSpec::Smale { .. } => "alpha",
                },
                self.hypothesis_quantity(),
                self.hypothesis_bound()
            ))
        })?;
        let numeric = numeric_smallest_zero(self)?;
        let tol = CROSS_CHECK_TOL
            + root_tolerance(
                1.0 + self.b() + closed,
                self.slope(closed),
                self.curvature(closed),
            );
        if (closed - numeric).abs() > tol {
            return Err(Error::CrossCheck(format!(
                "t* closed form {closed} vs bisection {numeric}"
            )));
        }
        Ok(closed)
    }

    fn beta(&self) -> Result<f64> {
        let closed = self.closed_form_beta();
        if !(closed > 0.0) {
            return Err(Error::Hypothesis(format!(
                "h4 fails: sup -f = {closed:e} <= 0"
            )));
        }
        let numeric = numeric_beta(self);
        if (closed - numeric).abs() > CROSS_CHECK_TOL * (1.0 + closed.abs()) {
            return Err(Error::CrossCheck(format!(
                "beta closed form {closed} vs golden-section {numeric}"
            )));
        }
        Ok(closed)
    }

    fn h_conditions(&self) -> HConditions {
        let q = self.hypothesis_quantity();
        let bound = self.hypothesis_bound();
        HConditions {
            h1: true,
            h2: true,
            h3: q <= bound,
            h4: q < bound,
            method: CheckMethod::Analytic,
        }
    }
}

/// `g(t) = -[f(t + rho) + 2 rho] / f'(rho)` on `[0, R - rho)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedMajorant<M> {
    base: M,
    rho: f64,
    scale: f64,
}

impl<M: Majorant> PerturbedMajorant<M> {
    pub fn new(base: M, rho: f64) -> Result<Self> {
        let beta = base.beta()?;
        if !(rho >= 0.0 && rho < beta / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "rho = {rho} outside [0, beta/2) = [0, {})",
                beta / 2.0
            )));
        }
        let fp = base.slope(rho);
        Ok(Self {
            base,
            rho,
            scale: -1.0 / fp,
        })
    }

    pub fn base(&self) -> &M {
        &self.base
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl<M: Majorant> Majorant for PerturbedMajorant<M> {
    fn value(&self, t: f64) -> f64 {
        self.scale * (self.base.value(t + self.rho) + 2.0 * self.rho)
    }

    fn slope(&self, t: f64) -> f64 {
        if t == 0.0 {
            // g'(0) = -f'(rho)/f'(rho) exactly
            return -1.0;
        }
        self.scale * self.base.slope(t + self.rho)
    }

    fn curvature(&self, t: f64) -> f64 {
        self.scale * self.base.curvature(t + self.rho)
    }

    fn domain_end(&self) -> f64 {
        self.base.domain_end() - self.rho
    }

    fn t_bar(&self) -> f64 {
        self.base.t_bar() - self.rho
    }

    fn beta(&self) -> Result<f64> {
        // sup -g = (beta_f - 2 rho) / (-f'(rho))
        let beta_f = self.base.beta()?;
        Ok(self.scale * (beta_f - 2.0 * self.rho))
    }

    fn h_conditions(&self) -> HConditions {
        let base = self.base.h_conditions();
        let beta_f = self.base.beta().unwrap_or(f64::NEG_INFINITY);
        HConditions {
            h1: self.value(0.0) > 0.0,
            h2: base.h2,
            h3: base.h3 && 2.0 * self.rho <= beta_f,
            h4: 2.0 * self.rho < beta_f,
            method: base.method,
        }
    }
}

impl PerturbedMajorant<MajorantSpec> {
    /// Closed-form smallest zero of `g` derived directly from `g(t) = 0`.
    pub fn closed_form_zero(&self) -> f64 {
        let rho = self.rho;
        match self.base {
            MajorantSpec::Quadratic { l, b } => {
                let c = b + 2.0 * rho;
                2.0 * c / (1.0 + (1.0 - 2.0 * l * c).max(0.0).sqrt()) - rho
            }
            MajorantSpec::Smale { .. } => self.printed_closed_form_zero(),
        }
    }

    /// The closed form for `t_{*,rho}` as commonly printed for each family.
    ///
    /// For the quadratic family this carries `b - 2 rho` under the radical,
    /// which is not the zero of `g`; it is kept for reporting only.
    pub fn printed_closed_form_zero(&self) -> f64 {
        let rho = self.rho;
        match self.base {
            MajorantSpec::Quadratic { l, b } => {
                (1.0 - rho * l - (1.0 - 2.0 * l * (b - 2.0 * rho)).sqrt()) / l
            }
            MajorantSpec::Smale { gamma, b } => {
                let alpha = b * gamma;
                let a = alpha + 1.0 - 2.0 * rho * gamma;
                let disc = a * a - 8.0 * alpha - 8.0 * rho * gamma * (1.0 - alpha);
                (a - disc.max(0.0).sqrt()) / (4.0 * gamma)
            }
        }
    }

    /// Family closed form of `D^-g'(t*) / (-2 g'(t*))` evaluated at `t_star_rho`.
    pub fn closed_form_rate_constant(&self, t_star_rho: f64) -> f64 {
        let s = t_star_rho + self.rho;
        match self.base {
            MajorantSpec::Quadratic { l, .. } => l / (2.0 * (1.0 - l * s)),
            MajorantSpec::Smale { gamma, .. } => {
                let u = 1.0 - gamma * s;
                gamma / (u * (2.0 * u * u - 1.0))
            }
        }
    }

    /// `L / (2 sqrt(1 - 2L(b - 2 rho)))`, the printed quadratic rate constant.
    pub fn printed_rate_constant(&self) -> Option<f64> {
        match self.base {
            MajorantSpec::Quadratic { l, b } => {
                Some(l / (2.0 * (1.0 - 2.0 * l * (b - 2.0 * self.rho)).sqrt()))
            }
            MajorantSpec::Smale { .. } => None,
        }
    }
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied majorant given by callbacks for `f`, `f'` and `f''`.
///
/// Its h-conditions are checked by sampling only.
pub struct CustomMajorant {
    f: ScalarFn,
    df: ScalarFn,
    d2f: ScalarFn,
    domain_end: f64,
}

impl CustomMajorant {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain_end: f64,
    ) -> Result<Self> {
        if !(domain_end > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "domain end must be positive, got {domain_end}"
            )));
        }
        Ok(Self {
            f: Box::new(f),
            df: Box::new(df),
            d2f: Box::new(d2f),
            domain_end,
        })
    }
}

impl std::fmt::Debug for CustomMajorant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CustomMajorant")
            .field("domain_end", &self.domain_end)
            .finish_non_exhaustive()
    }
}

impl Majorant for CustomMajorant {
    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }
    fn slope(&self, t: f64) -> f64 {
        (self.df)(t)
    }
    fn curvature(&self, t: f64) -> f64 {
        (self.d2f)(t)
    }
    fn domain_end(&self) -> f64 {
        self.domain_end
    }
}

/// The scalar Newton sequence `t_0 = 0, t_{k+1} = n_f(t_k)` with its limit data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantTrace {
    pub t: Vec<f64>,
    pub t_star: f64,
    pub t_bar: f64,
    /// `None` when h4 fails.
    pub beta: Option<f64>,
    pub converged: bool,
}

impl MajorantTrace {
    /// `t_k`, with `t*` standing in for indices past the recorded trace.
    pub fn t_at(&self, k: usize) -> f64 {
        self.t.get(k).copied().unwrap_or(self.t_star)
    }
}

pub fn eval_f<M: Majorant + ?Sized>(spec: &M, t: f64) -> Result<f64> {
    spec.eval_f(t)
}

pub fn eval_fprime<M: Majorant + ?Sized>(spec: &M, t: f64) -> Result<f64> {
    spec.eval_fprime(t)
}

pub fn eval_fprime_left_derivative_at<M: Majorant + ?Sized>(spec: &M, t: f64) -> Result<f64> {
    spec.eval_fprime_left_derivative_at(t)
}

/// `n_f(t) = t - f(t) / f'(t)` for `t in [0, t*)`.
pub fn newton_iterate_scalar<M: Majorant + ?Sized>(spec: &M, t: f64) -> Result<f64> {
    domain_guard(spec, t)?;
    let (f, fp) = (spec.value(t), spec.slope(t));
    // on [0, R): f > 0 and f' < 0 exactly when t < t*
    if !(fp < 0.0) {
        return Err(Error::Domain(format!("f'({t}) = {fp} >= 0")));
    }
    if !(f > 0.0) {
        return Err(Error::Domain(format!("t = {t} >= t* (f(t) = {f})")));
    }
    Ok(t - f / fp)
}

pub fn smallest_zero<M: Majorant + ?Sized>(spec: &M) -> Result<f64> {
    spec.smallest_zero()
}

pub fn beta<M: Majorant + ?Sized>(spec: &M) -> Result<f64> {
    spec.beta()
}

pub fn check_h_conditions<M: Majorant + ?Sized>(spec: &M) -> HConditions {
    spec.h_conditions()
}

pub fn perturbed_majorant<M: Majorant>(spec: M, rho: f64) -> Result<PerturbedMajorant<M>> {
    PerturbedMajorant::new(spec, rho)
}

/// `D^-f'(t*) / (-2 f'(t*))`; requires h4.
pub fn quadratic_rate_constant<M: Majorant + ?Sized>(spec: &M) -> Result<f64> {
    if !spec.h_conditions().h4 {
        return Err(Error::Hypothesis(
            "h4 fails: f'(t*) = 0, no quadratic-rate constant".into(),
        ));
    }
    let t_star = spec.smallest_zero()?;
    let fp = spec.slope(t_star);
    if !(fp < 0.0) {
        return Err(Error::Hypothesis(format!("f'(t*) = {fp} is not negative")));
    }
    Ok(spec.curvature(t_star) / (-2.0 * fp))
}

/// Iterates `n_f` from `t_0 = 0` until `t* - t_k < stop_tol` or `k_max` steps.
pub fn majorant_sequence<M: Majorant + ?Sized>(
    spec: &M,
    k_max: usize,
    stop_tol: f64,
) -> Result<MajorantTrace> {
    let t_star = spec.smallest_zero()?;
    let mut t = vec![0.0];
    let mut converged = false;
    for _ in 0..k_max {
        let tk = *t.last().unwrap();
        if t_star - tk < stop_tol {
            converged = true;
            break;
        }
        let (f, fp) = (spec.value(tk), spec.slope(tk));
        if !(f > 0.0 && fp < 0.0) {
            // tk is t* to working precision
            converged = true;
            break;
        }
        let next = tk - f / fp;
        if !(next > tk) || next >= t_star {
            converged = true;
            break;
        }
        t.push(next);
    }
    if t_star - t.last().unwrap() < stop_tol {
        converged = true;
    }
    Ok(MajorantTrace {
        t,
        t_star,
        t_bar: spec.t_bar(),
        beta: spec.beta().ok(),
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad(l: f64, b: f64) -> MajorantSpec {
        MajorantSpec::quadratic(l, b).unwrap()
    }

    fn smale(g: f64, b: f64) -> MajorantSpec {
        MajorantSpec::smale(g, b).unwrap()
    }

    #[test]
    fn evaluation() {
        let q = quad(1.0, 0.375);
        assert_eq!(q.eval_f(0.0).unwrap(), 0.375);
        assert_eq!(q.eval_fprime(0.0).unwrap(), -1.0);
        assert_eq!(smale(1.0 / 3.0, 1.0 / 12.0).eval_fprime(0.0).unwrap(), -1.0);
        assert_abs_diff_eq!(quad(2.0, 0.1).eval_f(0.5).unwrap(), -0.15, epsilon = 1e-15);
        assert_eq!(quad(2.0, 0.1).eval_fprime_left_derivative_at(0.3).unwrap(), 2.0);
        assert!(smale(1.0, 0.1).eval_f(1.0).is_err());
        assert!(q.eval_f(-0.1).is_err());
    }

    #[test]
    fn scalar_newton_step() {
        let q = quad(1.0, 0.375);
        assert_eq!(newton_iterate_scalar(&q, 0.0).unwrap(), 0.375);
        assert_abs_diff_eq!(newton_iterate_scalar(&q, 0.375).unwrap(), 0.4875, epsilon = 1e-15);
        let s = smale(1.0 / 3.0, 1.0 / 12.0);
        assert_abs_diff_eq!(newton_iterate_scalar(&s, 0.0).unwrap(), 1.0 / 12.0, epsilon = 1e-17);
        // past t* = 0.5
        assert!(newton_iterate_scalar(&q, 0.6).is_err());
        assert!(newton_iterate_scalar(&q, 1.5).is_err());
    }

    #[test]
    fn smallest_zero_examples() {
        assert_abs_diff_eq!(quad(1.0, 0.375).smallest_zero().unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(quad(1.0, 0.5).smallest_zero().unwrap(), 1.0, epsilon = 1e-15);
        let ts = smale(1.0 / 3.0, 1.0 / 12.0).smallest_zero().unwrap();
        // exact root of 2 gamma t^2 - (1 + alpha) t + b = 0
        assert_abs_diff_eq!(ts, 0.085_863_240_717_766_81, epsilon = 1e-15);
        assert!(1.5 - 2f64.sqrt() <= ts);
        assert!(matches!(quad(1.0, 0.6).smallest_zero(), Err(Error::NoZero(_))));
        assert!(matches!(smale(1.0, 1.0).smallest_zero(), Err(Error::NoZero(_))));
        // Smale boundary alpha = 3 - 2 sqrt 2 has a double root at t_bar
        let sb = smale(1.0, smale_alpha_bound());
        assert_abs_diff_eq!(sb.smallest_zero().unwrap(), sb.t_bar(), epsilon = 1e-7);
    }

    #[test]
    fn printed_smale_zero_matches_rationalized_form() {
        let (gamma, b) = (1.0 / 3.0, 1.0 / 12.0);
        let alpha = gamma * b;
        let printed = (alpha + 1.0 - ((alpha + 1.0f64).powi(2) - 8.0 * alpha).sqrt()) / (4.0 * gamma);
        assert_abs_diff_eq!(smale(gamma, b).smallest_zero().unwrap(), printed, epsilon = 1e-15);
    }

    #[test]
    fn sequence_examples() {
        let tr = majorant_sequence(&quad(1.0, 0.375), DEFAULT_K_MAX, DEFAULT_STOP_TOL).unwrap();
        assert_eq!(tr.t[0], 0.0);
        assert_eq!(tr.t[1], 0.375);
        assert_abs_diff_eq!(tr.t[2], 0.4875, epsilon = 1e-15);
        // 0.4875 + f(0.4875) / 0.5125 = 0.4875 + 0.006328125 / 0.5125
        assert_abs_diff_eq!(tr.t[3], 0.499_847_560_975_609_8, epsilon = 1e-15);
        assert!(tr.converged);
        assert_eq!(tr.t_star, 0.5);
        assert_eq!(tr.t_bar, 1.0);

        let tr = majorant_sequence(&smale(1.0 / 3.0, 1.0 / 12.0), 60, 1e-14).unwrap();
        assert_abs_diff_eq!(tr.t[1], 1.0 / 12.0, epsilon = 1e-17);
        assert!(tr.converged);

        // nearly linear f: one step lands on t* = b
        let tr = majorant_sequence(&quad(1e-12, 0.25), 60, 1e-10).unwrap();
        assert_abs_diff_eq!(tr.t[1], 0.25, epsilon = 1e-15);
        assert_eq!(tr.t.len(), 2);
    }

    #[test]
    fn beta_examples() {
        assert_abs_diff_eq!(quad(1.0, 0.375).beta().unwrap(), 0.125, epsilon = 1e-15);
        assert!(quad(1.0, 0.5).beta().is_err());
        // minimizer (1 - 2^{-1/2}) / gamma, value (3 - 2 sqrt 2 - alpha) / gamma
        let s = smale(1.0 / 3.0, 1.0 / 12.0);
        let tm = (1.0 - 0.5f64.sqrt()) * 3.0;
        assert_abs_diff_eq!(tm, 0.87868, epsilon = 1e-5);
        assert_abs_diff_eq!(s.beta().unwrap(), -s.value(tm), epsilon = 1e-15);
        assert_abs_diff_eq!(s.beta().unwrap(), 0.431385, epsilon = 1e-6);
    }

    #[test]
    fn rate_constants() {
        let q = quad(1.0, 0.375);
        assert_abs_diff_eq!(quadratic_rate_constant(&q).unwrap(), 1.0, epsilon = 1e-14);
        let q2 = quad(2.0, 0.1);
        assert_abs_diff_eq!(quadratic_rate_constant(&q2).unwrap(), 1.290994, epsilon = 1e-6);
        assert_abs_diff_eq!(
            quadratic_rate_constant(&q2).unwrap(),
            q2.closed_form_rate_constant().unwrap(),
            epsilon = 1e-12
        );
        let s = smale(1.0 / 3.0, 1.0 / 12.0);
        let generic = quadratic_rate_constant(&s).unwrap();
        let printed = s.closed_form_rate_constant().unwrap();
        assert_abs_diff_eq!(generic, printed, epsilon = 1e-12);
        assert_abs_diff_eq!(generic, 0.3868, epsilon = 1e-4);
        assert!(quadratic_rate_constant(&quad(1.0, 0.5)).is_err());
    }

    #[test]
    fn h_condition_examples() {
        assert!(quad(1.0, 0.375).h_conditions().all());
        let h = quad(1.0, 0.5).h_conditions();
        assert!(h.h1 && h.h2 && h.h3 && !h.h4);
        assert!(!smale(1.0, 1.0).h_conditions().h3);
        let hb = smale(1.0, smale_alpha_bound()).h_conditions();
        assert!(hb.h3 && !hb.h4);
    }

    #[test]
    fn perturbed_examples() {
        let f = quad(1.0, 0.375);
        let g0 = perturbed_majorant(f, 0.0).unwrap();
        for i in 0..50 {
            let t = i as f64 * 0.05;
            assert_eq!(g0.value(t), f.value(t));
            assert_eq!(g0.slope(t), f.slope(t));
        }
        let g = perturbed_majorant(f, 0.05).unwrap();
        let expected = (f.value(0.05) + 0.1) / 0.95;
        assert_abs_diff_eq!(g.value(0.0), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(g.value(0.0), 0.448684, epsilon = 1e-6);
        assert_eq!(g.slope(0.0), -1.0);
        assert!(g.h_conditions().all());
        let root = g.smallest_zero().unwrap();
        assert_abs_diff_eq!(root, 0.95 - 0.05f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(root, g.closed_form_zero(), epsilon = 1e-12);
        assert!((root - g.printed_closed_form_zero()).abs() > 1e-2);
        assert!(perturbed_majorant(f, 0.0625).is_err());
        assert!(perturbed_majorant(f, -0.01).is_err());
    }

    #[test]
    fn perturbed_smale_closed_form_agrees() {
        let f = smale(1.0 / 3.0, 1.0 / 12.0);
        for &rho in &[0.0, 0.01, 0.1, 0.2] {
            let g = perturbed_majorant(f, rho).unwrap();
            assert!(g.h_conditions().all());
            let root = g.smallest_zero().unwrap();
            assert_abs_diff_eq!(root, g.printed_closed_form_zero(), epsilon = 1e-10);
            let q = quadratic_rate_constant(&g).unwrap();
            assert_abs_diff_eq!(q, g.closed_form_rate_constant(root), epsilon = 1e-9);
        }
    }

    #[test]
    fn custom_majorant_uses_sampling() {
        let c = CustomMajorant::new(
            |t| 0.5 * t * t - t + 0.375,
            |t| t - 1.0,
            |_| 1.0,
            f64::INFINITY,
        )
        .unwrap();
        let h = c.h_conditions();
        assert_eq!(h.method, CheckMethod::Empirical);
        assert!(h.all());
        assert_abs_diff_eq!(c.smallest_zero().unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(c.beta().unwrap(), 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(c.t_bar(), 1.0, epsilon = 1e-14);
        // not a majorant: f'(0) != -1
        let bad = CustomMajorant::new(|t| 1.0 - 2.0 * t, |_| -2.0, |_| 0.0, 10.0).unwrap();
        assert!(!bad.h_conditions().h1);
    }

    #[test]
    fn serde_layout() {
        let s = serde_json::to_string(&quad(1.0, 0.375)).unwrap();
        assert_eq!(s, r#"{"family":"quadratic","L":1.0,"b":0.375}"#);
        let back: MajorantSpec = serde_json::from_str(r#"{"family":"smale","gamma":0.5,"b":0.1}"#).unwrap();
        assert_eq!(back, smale(0.5, 0.1));
    }
}
