//! Kantorovich and Smale certificates, robustness balls, sampled constants and
//! pointwise diagnostics of the majorant condition.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majorant::{
    majorant_sequence, quadratic_rate_constant, smale_alpha_bound, Majorant, MajorantSpec,
    MajorantTrace, PerturbedMajorant, DEFAULT_K_MAX, DEFAULT_STOP_TOL,
};
use crate::minstep::{
    min_norm_step, sublinear_image_norm, LinearInclusionSubproblem, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL,
};
use crate::problem::InclusionProblem;

/// Slack for the pointwise diagnostics.
pub const CHECK_TOL: f64 = 1e-9;

/// Number of random directions used by [`operator_bound_check`].
pub const OPERATOR_DIRECTIONS: usize = 200;

const OPERATOR_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Quadratic,
    Smale,
}

impl Family {
    pub fn constant_name(&self) -> &'static str {
        match self {
            Family::Quadratic => "L",
            Family::Smale => "gamma",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    UserSupplied,
    SampledEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub family: Family,
    pub params: MajorantSpec,
    pub provenance: BTreeMap<String, Provenance>,
    /// `2bL` or `alpha = b gamma`.
    pub hypothesis_value: f64,
    /// `1` or `3 - 2 sqrt 2`.
    pub hypothesis_bound: f64,
    pub hypothesis_ok: bool,
    pub strict_ok: bool,
    pub t_star: Option<f64>,
    pub t_bar: f64,
    pub beta: Option<f64>,
    pub rho_max: Option<f64>,
    #[serde(rename = "Q")]
    pub q: Option<f64>,
    /// The robustness radius as printed for the Smale family, reported beside `rho_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_bound_printed: Option<f64>,
    /// True when any constant was estimated by sampling.
    pub empirical: bool,
}

impl Certificate {
    fn assemble(spec: MajorantSpec) -> Result<Self> {
        let (family, hypothesis_bound, rho_bound_printed) = match spec {
            MajorantSpec::Quadratic { .. } => (Family::Quadratic, 1.0, None),
            MajorantSpec::Smale { gamma, b } => {
                let alpha = gamma * b;
                let s2 = 2f64.sqrt();
                (
                    Family::Smale,
                    smale_alpha_bound(),
                    Some((s2 * (3.0 - alpha) - 3.0) / (2.0 * gamma * s2)),
                )
            }
        };
        let hypothesis_value = spec.hypothesis_quantity();
        let h = spec.h_conditions();
        let t_star = if h.h3 { Some(spec.smallest_zero()?) } else { None };
        let beta = if h.h4 { Some(spec.beta()?) } else { None };
        let q = if h.h4 { Some(quadratic_rate_constant(&spec)?) } else { None };
        let mut provenance = BTreeMap::new();
        provenance.insert(family.constant_name().to_string(), Provenance::UserSupplied);
        provenance.insert("b".to_string(), Provenance::UserSupplied);
        Ok(Self {
            family,
            params: spec,
            provenance,
            hypothesis_value,
            hypothesis_bound,
            hypothesis_ok: h.h3,
            strict_ok: h.h4,
            t_star,
            t_bar: spec.t_bar(),
            beta,
            rho_max: beta.map(|b| b / 2.0),
            q,
            rho_bound_printed,
            empirical: false,
        })
    }

    /// Sets the provenance of the family constant and of `b`.
    pub fn with_provenance(mut self, constant: Provenance, b: Provenance) -> Self {
        self.provenance
            .insert(self.family.constant_name().to_string(), constant);
        self.provenance.insert("b".to_string(), b);
        self.empirical = self
            .provenance
            .values()
            .any(|p| *p == Provenance::SampledEstimate);
        self
    }

    pub fn spec(&self) -> MajorantSpec {
        self.params
    }

    /// The majorant sequence `t_k` of this certificate.
    pub fn majorant_trace(&self) -> Result<MajorantTrace> {
        majorant_sequence(&self.params, DEFAULT_K_MAX, DEFAULT_STOP_TOL)
    }
}

/// Exact `b`: the norm of the least-norm first step at `x~`.
pub fn compute_b(problem: &InclusionProblem) -> Result<f64> {
    let sub = problem.subproblem(problem.x_tilde())?;
    Ok(min_norm_step(&sub, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL)?.norm_d)
}

pub fn kantorovich_certificate(l: f64, b: f64) -> Result<Certificate> {
    Certificate::assemble(MajorantSpec::quadratic(l, b)?)
}

pub fn smale_certificate(gamma: f64, b: f64) -> Result<Certificate> {
    Certificate::assemble(MajorantSpec::smale(gamma, b)?)
}

/// The perturbed majorant of a certificate and its constants.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessBall {
    pub rho: f64,
    pub g: PerturbedMajorant<MajorantSpec>,
    /// Smallest zero of `g`, by bisection.
    pub t_star_rho: f64,
    /// `D^-g'(t_{*,rho}) / (-2 g'(t_{*,rho}))`.
    pub q_rho: f64,
    pub t_star_rho_closed_form: f64,
    pub t_star_rho_printed: f64,
    pub q_rho_closed_form: f64,
    pub q_rho_printed: Option<f64>,
}

#[derive(Serialize)]
struct RobustnessBallDoc {
    rho: f64,
    g0: f64,
    t_star_rho: f64,
    #[serde(rename = "Q_rho")]
    q_rho: f64,
    t_star_rho_closed_form: f64,
    t_star_rho_printed: f64,
    #[serde(rename = "Q_rho_closed_form")]
    q_rho_closed_form: f64,
    #[serde(rename = "Q_rho_printed", skip_serializing_if = "Option::is_none")]
    q_rho_printed: Option<f64>,
    t_bar_rho: f64,
}

impl Serialize for RobustnessBall {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RobustnessBallDoc {
            rho: self.rho,
            g0: self.g.value(0.0),
            t_star_rho: self.t_star_rho,
            q_rho: self.q_rho,
            t_star_rho_closed_form: self.t_star_rho_closed_form,
            t_star_rho_printed: self.t_star_rho_printed,
            q_rho_closed_form: self.q_rho_closed_form,
            q_rho_printed: self.q_rho_printed,
            t_bar_rho: self.g.t_bar(),
        }
        .serialize(s)
    }
}

impl RobustnessBall {
    pub fn majorant_trace(&self) -> Result<MajorantTrace> {
        majorant_sequence(&self.g, DEFAULT_K_MAX, DEFAULT_STOP_TOL)
    }
}

pub fn robustness_ball(cert: &Certificate, rho: f64) -> Result<RobustnessBall> {
    let rho_max = cert.rho_max.ok_or_else(|| {
        Error::Hypothesis("certificate has no robustness radius (h4 fails)".into())
    })?;
    if !(rho >= 0.0 && rho < rho_max) {
        return Err(Error::Hypothesis(format!(
            "rho = {rho} must lie in [0, rho_max) with rho_max = {rho_max}"
        )));
    }
    let g = PerturbedMajorant::new(cert.params, rho)?;
    let t_star_rho = g.smallest_zero()?;
    let q_rho = quadratic_rate_constant(&g)?;
    Ok(RobustnessBall {
        rho,
        t_star_rho,
        q_rho,
        t_star_rho_closed_form: g.closed_form_zero(),
        t_star_rho_printed: g.printed_closed_form_zero(),
        q_rho_closed_form: g.closed_form_rate_constant(t_star_rho),
        q_rho_printed: g.printed_rate_constant(),
        g,
    })
}

/// A sampled constant. It is the maximum over the samples and therefore a lower bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledEstimate {
    pub value: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Index of the sample attaining the maximum.
    pub argmax: Option<usize>,
    pub semantics: String,
}

/// Generator for sample `index`, independent of evaluation order.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform point in the open ball `B(center, radius)`.
pub fn point_in_ball<R: Rng>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let n = center.len();
    let u = unit_vector(rng, n);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    center.iter().zip(u).map(|(c, ui)| c + r * ui).collect()
}

/// `e_j` and `-e_j` for `j < n`.
fn coordinate_directions(n: usize) -> Vec<Vec<f64>> {
    (0..2 * n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
            e
        })
        .collect()
}

/// Order-independent maximum; ties go to the lower index.
fn max_indexed(values: impl ParallelIterator<Item = Result<(usize, f64)>>) -> Result<Option<(usize, f64)>> {
    values.try_fold(|| None, |acc: Option<(usize, f64)>, item| {
        let item = item?;
        Ok(better(acc, Some(item)))
    })
    .try_reduce(|| None, |a, b| Ok(better(a, b)))
}

fn better(a: Option<(usize, f64)>, b: Option<(usize, f64)>) -> Option<(usize, f64)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.1 > x.1 || (y.1 == x.1 && y.0 < x.0) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

fn mat_vec(j: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (j * DVector::from_column_slice(u)).iter().copied().collect()
}

fn require_robinson(problem: &InclusionProblem) -> Result<DMatrix<f64>> {
    compute_b(problem)?;
    problem.eval_jacobian(problem.x_tilde())
}

/// Sampled lower bound for `sup |T_{x~}^-1 [F'(y) - F'(x)]| / |y - x|` over `B(x~, R)`.
pub fn estimate_l(problem: &InclusionProblem, n_samples: usize, seed: u64) -> Result<SampledEstimate> {
    let j0 = require_robinson(problem)?;
    let cone = problem.cone();
    let (n, c, r) = (problem.n(), problem.x_tilde(), problem.radius());
    let best = max_indexed((0..n_samples).into_par_iter().map(|i| {
        let mut rng = sample_rng(seed, i as u64);
        let x = point_in_ball(&mut rng, c, r);
        let y = point_in_ball(&mut rng, c, r);
        let u = unit_vector(&mut rng, n);
        let gap = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if gap == 0.0 {
            return Ok((i, 0.0));
        }
        let dj = problem.eval_jacobian(&y)? - problem.eval_jacobian(&x)?;
        let w = mat_vec(&dj, &u);
        Ok((i, sublinear_image_norm(&j0, &cone, &w)? / gap))
    }))?;
    Ok(SampledEstimate {
        value: best.map_or(0.0, |b| b.1),
        n_samples,
        seed,
        argmax: best.map(|b| b.0),
        semantics: "empirical lower bound (maximum over samples)".into(),
    })
}

/// Sampled lower bound for `sup_k |T_{x~}^-1 F^(k)(x~) / k!|^(1/(k-1))`, using
/// diagonal arguments `F^(k)(x~)(v, ..., v)` over random and coordinate unit directions.
pub fn estimate_gamma(problem: &InclusionProblem, n_samples: usize, seed: u64) -> Result<SampledEstimate> {
    let j0 = require_robinson(problem)?;
    let cone = problem.cone();
    let (n, c) = (problem.n(), problem.x_tilde());
    let deg = problem.degree() as usize;
    if deg < 2 {
        return Ok(SampledEstimate {
            value: 0.0,
            n_samples,
            seed,
            argmax: None,
            semantics: "exact: F is affine".into(),
        });
    }
    let coords = coordinate_directions(n);
    let total = n_samples + coords.len();
    let best = max_indexed((0..total).into_par_iter().map(|i| {
        let v = if i < coords.len() {
            coords[i].clone()
        } else {
            unit_vector(&mut sample_rng(seed, i as u64), n)
        };
        let coeffs = problem.directional_taylor(c, &v, deg)?;
        let mut g = 0.0f64;
        for (k, ck) in coeffs.iter().enumerate().skip(2) {
            let norm = sublinear_image_norm(&j0, &cone, ck)?;
            g = g.max(norm.powf(1.0 / (k as f64 - 1.0)));
        }
        Ok((i, g))
    }))?;
    Ok(SampledEstimate {
        value: best.map_or(0.0, |b| b.1),
        n_samples: total,
        seed,
        argmax: best.map(|b| b.0),
        semantics: "empirical lower bound (diagonal directions only)".into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `|T_{x~}^-1(-E(x, y))| <= e(t, s)` with `t = |x - x~|`, `s = t + |y - x|`.
pub fn linearization_error_check(
    problem: &InclusionProblem,
    x: &[f64],
    y: &[f64],
    spec: &MajorantSpec,
) -> Result<PointCheck> {
    let t = norm_diff(x, problem.x_tilde());
    let s = t + norm_diff(y, x);
    let bound = problem.radius().min(spec.domain_end());
    if s >= bound {
        return Err(Error::Domain(format!(
            "|x - x~| + |y - x| = {s} must be below {bound}"
        )));
    }
    let fx = problem.eval_f(x)?;
    let fy = problem.eval_f(y)?;
    let jx = problem.eval_jacobian(x)?;
    let step: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let lin = mat_vec(&jx, &step);
    // -E = F(x) + F'(x)(y - x) - F(y)
    let minus_e: Vec<f64> = (0..problem.m()).map(|i| fx[i] + lin[i] - fy[i]).collect();
    let j0 = problem.eval_jacobian(problem.x_tilde())?;
    let lhs = sublinear_image_norm(&j0, &problem.cone(), &minus_e)?;
    let rhs = spec.eval_f(s)? - spec.eval_f(t)? - spec.eval_fprime(t)? * (s - t);
    Ok(PointCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + CHECK_TOL,
    })
}

/// Sampled `sup_u |T_x^-1 F'(x~) u|` against `-1/f'(t)` with `t = |x - x~|`.
///
/// The left side is a lower bound, so `ok = false` is a genuine violation.
pub fn operator_bound_check(problem: &InclusionProblem, x: &[f64], spec: &MajorantSpec) -> Result<PointCheck> {
    let t = norm_diff(x, problem.x_tilde());
    if t >= spec.t_bar() {
        return Err(Error::Domain(format!("|x - x~| = {t} must be below t_bar = {}", spec.t_bar())));
    }
    let jx = problem.eval_jacobian(x)?;
    let j0 = problem.eval_jacobian(problem.x_tilde())?;
    let cone = problem.cone();
    let n = problem.n();
    let mut dirs = coordinate_directions(n);
    dirs.extend((0..OPERATOR_DIRECTIONS).map(|i| unit_vector(&mut sample_rng(OPERATOR_SEED, i as u64), n)));
    let mut lhs = 0.0f64;
    for u in &dirs {
        // an infeasible subproblem here is a failure of Robinson's condition at x
        let w: Vec<f64> = mat_vec(&j0, u).iter().map(|v| -v).collect();
        let sub = LinearInclusionSubproblem::new(jx.clone(), w, cone)?;
        let v = min_norm_step(&sub, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL)?.norm_d;
        lhs = lhs.max(v);
    }
    let rhs = -1.0 / spec.eval_fprime(t)?;
    Ok(PointCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + CHECK_TOL,
    })
}
