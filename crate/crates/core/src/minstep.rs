//! Least-norm Newton step.
//!
//! Solves `min |d|  s.t.  F + J d in C` for `C = R^p_- x {0}^q`, i.e.
//!
//! ```text
//!     minimize     |d|_2
//!     subject to   J_I d + F_I <= 0      (first p rows)
//!                  J_E d + F_E  = 0      (last q rows)
//! ```
//!
//! The equality rows are eliminated with an SVD: `d = d0 + Z y` where `d0` is
//! the minimum-norm solution of `J_E d = -F_E` and the columns of `Z` span the
//! null space of `J_E`. Because `d0` lies in the row space of `J_E`,
//! `|d|^2 = |d0|^2 + |y|^2` and what remains is a least-distance program in `y`
//! with inequality constraints only. That program is solved exactly through
//! its dual nonnegative least-squares problem (Lawson-Hanson), which also
//! yields a Farkas certificate when the constraints are inconsistent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cone::ProductCone;
use crate::error::{Error, Result};

pub const DEFAULT_FEAS_TOL: f64 = 1e-10;
pub const DEFAULT_OPT_TOL: f64 = 1e-10;

/// The linearized inclusion `F(x) + F'(x) d in C` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearInclusionSubproblem {
    jacobian: DMatrix<f64>,
    value: Vec<f64>,
    cone: ProductCone,
}

impl LinearInclusionSubproblem {
    pub fn new(jacobian: DMatrix<f64>, value: Vec<f64>, cone: ProductCone) -> Result<Self> {
        if jacobian.nrows() != cone.dim() {
            return Err(Error::DimensionMismatch {
                what: "jacobian rows",
                expected: cone.dim(),
                found: jacobian.nrows(),
            });
        }
        if value.len() != cone.dim() {
            return Err(Error::DimensionMismatch {
                what: "F(x)",
                expected: cone.dim(),
                found: value.len(),
            });
        }
        if jacobian.ncols() == 0 {
            return Err(Error::InvalidArgument("jacobian has no columns".into()));
        }
        if !jacobian.iter().chain(&value).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "subproblem data contains NaN or infinite entries".into(),
            ));
        }
        Ok(Self {
            jacobian,
            value,
            cone,
        })
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn cone(&self) -> ProductCone {
        self.cone
    }

    pub fn n(&self) -> usize {
        self.jacobian.ncols()
    }

    /// `F + J d`.
    pub fn linearized(&self, d: &[f64]) -> Vec<f64> {
        let jd = &self.jacobian * DVector::from_column_slice(d);
        jd.iter().zip(&self.value).map(|(a, b)| a + b).collect()
    }

    fn scale(&self) -> f64 {
        self.value.iter().fold(1.0f64, |s, v| s.max(v.abs()))
    }
}

/// Exact minimizer of the subproblem with its KKT multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub d: Vec<f64>,
    pub norm_d: f64,
    /// Inequality rows that are tight at the solution.
    pub active_set: Vec<usize>,
    /// One multiplier per row: `lambda_i >= 0` on the first `p` rows, free on the rest,
    /// with `d + J^T multipliers = 0`.
    pub multipliers: Vec<f64>,
    pub feasibility_residual: f64,
}

/// Residuals of the KKT system of the least-norm problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktResiduals {
    /// `|d + J^T y|`.
    pub stationarity: f64,
    /// `d(0, F + J d - C)`.
    pub primal: f64,
    /// Largest negative part of the inequality multipliers.
    pub dual: f64,
    /// `max_i |lambda_i (F + J d)_i|` over inequality rows.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

impl NewtonStep {
    pub fn kkt_residuals(&self, sub: &LinearInclusionSubproblem) -> KktResiduals {
        let p = sub.cone.p();
        let y = DVector::from_column_slice(&self.multipliers);
        let stat = DVector::from_column_slice(&self.d) + sub.jacobian.transpose() * y;
        let lin = sub.linearized(&self.d);
        KktResiduals {
            stationarity: stat.norm(),
            primal: sub.cone.distance_unchecked(&lin),
            dual: self.multipliers[..p]
                .iter()
                .fold(0.0f64, |m, &l| m.max(-l)),
            complementarity: self.multipliers[..p]
                .iter()
                .zip(&lin[..p])
                .fold(0.0f64, |m, (l, s)| m.max((l * s).abs())),
        }
    }
}

/// Multipliers `y = (lambda, mu)` with `lambda >= 0`, `J^T y = 0` and `y . F > 0`,
/// proving that `F + J d in C` has no solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub multipliers: Vec<f64>,
    /// `y . F`, positive for a valid certificate.
    pub gap: f64,
    /// `|J^T y|`, zero up to rounding.
    pub stationarity: f64,
}

impl FarkasCertificate {
    fn build(sub: &LinearInclusionSubproblem, mut y: Vec<f64>) -> Self {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            y.iter_mut().for_each(|v| *v /= norm);
        }
        let yv = DVector::from_column_slice(&y);
        let stationarity = (sub.jacobian.transpose() * &yv).norm();
        let gap = y.iter().zip(&sub.value).map(|(a, b)| a * b).sum();
        Self {
            multipliers: y,
            gap,
            stationarity,
        }
    }
}

/// SVD-based elimination of the equality rows.
struct EqualityReduction {
    d0: DVector<f64>,
    null_basis: DMatrix<f64>,
    /// `(sigma_k, u_k restricted to the q rows, v_k)` for the retained singular triples.
    range: Vec<(f64, DVector<f64>, DVector<f64>)>,
}

impl EqualityReduction {
    fn identity(n: usize) -> Self {
        Self {
            d0: DVector::zeros(n),
            null_basis: DMatrix::identity(n, n),
            range: Vec::new(),
        }
    }

    fn new(j_e: &DMatrix<f64>, f_e: &DVector<f64>) -> Self {
        let (q, n) = j_e.shape();
        let rows = q.max(n);
        let mut padded = DMatrix::zeros(rows, n);
        padded.view_mut((0, 0), (q, n)).copy_from(j_e);
        let svd = padded.svd(true, true);
        let u = svd.u.expect("u computed");
        let v_t = svd.v_t.expect("v_t computed");
        let smax = svd.singular_values.max();
        let tol = rows as f64 * f64::EPSILON * smax;

        let mut d0 = DVector::zeros(n);
        let mut range = Vec::new();
        let mut null_cols = Vec::new();
        for (k, &s) in svd.singular_values.iter().enumerate() {
            let v = v_t.row(k).transpose();
            if s > tol && s > 0.0 {
                let uk = u.column(k).rows(0, q).into_owned();
                d0 += &v * (-uk.dot(f_e) / s);
                range.push((s, uk, v));
            } else {
                null_cols.push(v);
            }
        }
        let null_basis = if null_cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };
        Self {
            d0,
            null_basis,
            range,
        }
    }

    /// Minimum-norm `mu` with `J_E^T mu = w` for `w` in the row space of `J_E`.
    fn solve_transpose(&self, w: &DVector<f64>, q: usize) -> DVector<f64> {
        let mut mu = DVector::zeros(q);
        for (s, uk, v) in &self.range {
            mu += uk * (v.dot(w) / s);
        }
        mu
    }
}

enum LdpOutcome {
    /// `y` and multipliers `lambda >= 0` with `y = G^T lambda`.
    Solved { y: DVector<f64>, lambda: DVector<f64> },
    /// `lambda >= 0` with `G^T lambda = 0`, `h . lambda > 0`.
    Infeasible { lambda: DVector<f64> },
}

/// `min |y| s.t. G y >= h` via the dual NNLS problem.
fn least_distance(
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    row_norms: &[f64],
    iter_budget: &mut usize,
) -> Result<LdpOutcome> {
    let (p, k) = g.shape();
    let mut lambda = DVector::zeros(p);

    // rows with vanishing normals: either void or a direct contradiction
    let mut keep = Vec::new();
    for i in 0..p {
        let gi = g.row(i).norm();
        if gi <= 1e-13 * row_norms[i].max(f64::MIN_POSITIVE) {
            if h[i] > 0.0 {
                lambda[i] = 1.0;
                return Ok(LdpOutcome::Infeasible { lambda });
            }
        } else {
            keep.push((i, gi));
        }
    }
    if keep.iter().all(|&(i, _)| h[i] <= 0.0) {
        return Ok(LdpOutcome::Solved {
            y: DVector::zeros(k),
            lambda,
        });
    }

    // normalize rows of [G | h], then h by its largest entry
    let hs = keep.iter().fold(0.0f64, |m, &(i, gi)| m.max((h[i] / gi).abs()));
    let r = keep.len();
    let mut e = DMatrix::zeros(k + 1, r);
    for (c, &(i, gi)) in keep.iter().enumerate() {
        for j in 0..k {
            e[(j, c)] = g[(i, j)] / gi;
        }
        e[(k, c)] = h[i] / gi / hs;
    }
    let mut f = DVector::zeros(k + 1);
    f[k] = 1.0;

    let u = nnls(&e, &f, iter_budget)?;
    let residual = &e * &u - &f;
    let denom = -residual[k];
    if denom <= 1e-14 {
        for (c, &(i, gi)) in keep.iter().enumerate() {
            lambda[i] = u[c] / gi;
        }
        return Ok(LdpOutcome::Infeasible { lambda });
    }
    let y = residual.rows(0, k) * (hs / denom);
    for (c, &(i, gi)) in keep.iter().enumerate() {
        lambda[i] = hs * u[c] / (denom * gi);
    }
    Ok(LdpOutcome::Solved { y, lambda })
}

/// Lawson-Hanson active-set NNLS: `min |E u - f|` over `u >= 0`.
///
/// Entering column: largest dual gradient, lowest index on ties.
fn nnls(e: &DMatrix<f64>, f: &DVector<f64>, budget: &mut usize) -> Result<DVector<f64>> {
    let n = e.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut excluded = vec![false; n];
    let tol = 10.0 * f64::EPSILON * e.norm().max(1.0) * f.norm().max(1.0) * (n as f64);

    loop {
        let w = e.transpose() * (f - e * &x);
        let mut entering = None;
        let mut best = tol;
        for j in 0..n {
            if !passive[j] && !excluded[j] && w[j] > best {
                best = w[j];
                entering = Some(j);
            }
        }
        let Some(t) = entering else {
            return Ok(x);
        };
        passive[t] = true;

        let mut first = true;
        loop {
            take_iteration(budget)?;
            let z = passive_lstsq(e, f, &passive);
            if first && z[t] <= 0.0 {
                // rounding made the entering column useless; skip it this round
                passive[t] = false;
                excluded[t] = true;
                break;
            }
            first = false;
            let all_positive = (0..n).filter(|&j| passive[j]).all(|j| z[j] > 0.0);
            if all_positive {
                x = z;
                excluded.iter_mut().for_each(|v| *v = false);
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in 0..n {
                if passive[j] && z[j] <= 0.0 {
                    let a = x[j] / (x[j] - z[j]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            x = &x + (z - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= 0.0 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            // the column that set alpha leaves exactly
            for j in 0..n {
                if passive[j] && x[j].abs() <= f64::EPSILON * x.amax() {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            excluded.iter_mut().for_each(|v| *v = false);
        }
    }
}

fn take_iteration(budget: &mut usize) -> Result<()> {
    if *budget == 0 {
        return Err(Error::IterationLimit {
            context: "least-norm step",
            limit: 0,
        });
    }
    *budget -= 1;
    Ok(())
}

/// Least-squares solution on the passive columns, zero elsewhere.
fn passive_lstsq(e: &DMatrix<f64>, f: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let sub = e.select_columns(&cols);
    let svd = sub.svd(true, true);
    let eps = f64::EPSILON * svd.singular_values.max() * (e.nrows().max(cols.len()) as f64);
    let sol = svd.solve(f, eps).expect("u and v_t computed");
    let mut z = DVector::zeros(passive.len());
    for (c, &j) in cols.iter().enumerate() {
        z[j] = sol[c];
    }
    z
}

/// Unique minimum-norm `d` with `F + J d in C`.
pub fn min_norm_step(
    sub: &LinearInclusionSubproblem,
    feas_tol: f64,
    opt_tol: f64,
) -> Result<NewtonStep> {
    if !(feas_tol >= 0.0 && opt_tol >= 0.0) {
        return Err(Error::InvalidArgument("tolerances must be nonnegative".into()));
    }
    let (p, q, n) = (sub.cone.p(), sub.cone.q(), sub.n());
    let m = p + q;
    let scale = sub.scale();
    let limit = 50 * (n + m);
    let mut budget = limit;

    let j_i = sub.jacobian.rows(0, p).into_owned();
    let f_i = DVector::from_column_slice(&sub.value[..p]);

    let reduction = if q > 0 {
        let j_e = sub.jacobian.rows(p, q).into_owned();
        let f_e = DVector::from_column_slice(&sub.value[p..]);
        let red = EqualityReduction::new(&j_e, &f_e);
        let res = &j_e * &red.d0 + &f_e;
        if res.norm() > feas_tol * scale {
            let mut y = vec![0.0; m];
            y[p..].copy_from_slice(res.as_slice());
            return Err(Error::Infeasible(Box::new(FarkasCertificate::build(sub, y))));
        }
        red
    } else {
        EqualityReduction::identity(n)
    };

    let (d, lambda) = if p > 0 {
        let g = -(&j_i * &reduction.null_basis);
        let h = &j_i * &reduction.d0 + &f_i;
        let row_norms: Vec<f64> = (0..p).map(|i| j_i.row(i).norm()).collect();
        let remap = |e| match e {
            Error::IterationLimit { context, .. } => Error::IterationLimit { context, limit },
            e => e,
        };
        let mut outcome = least_distance(&g, &h, &row_norms, &mut budget).map_err(remap)?;
        if matches!(outcome, LdpOutcome::Infeasible { .. }) && feas_tol > 0.0 {
            // rounding can leave a feasible set of empty interior just out of reach;
            // retry within the feasibility tolerance the result is checked against
            let slack = feas_tol * scale / (p as f64).sqrt();
            let relaxed = h.add_scalar(-slack);
            let mut retry_budget = limit;
            if let LdpOutcome::Solved { y, lambda } =
                least_distance(&g, &relaxed, &row_norms, &mut retry_budget).map_err(remap)?
            {
                outcome = LdpOutcome::Solved { y, lambda };
            }
        }
        match outcome {
            LdpOutcome::Solved { y, lambda } => (&reduction.d0 + &reduction.null_basis * y, lambda),
            LdpOutcome::Infeasible { lambda } => {
                let mut y = vec![0.0; m];
                y[..p].copy_from_slice(lambda.as_slice());
                if q > 0 {
                    let w = -(j_i.transpose() * &lambda);
                    let mu = reduction.solve_transpose(&w, q);
                    y[p..].copy_from_slice(mu.as_slice());
                }
                return Err(Error::Infeasible(Box::new(FarkasCertificate::build(sub, y))));
            }
        }
    } else {
        (reduction.d0.clone(), DVector::zeros(0))
    };

    let mut multipliers = vec![0.0; m];
    multipliers[..p].copy_from_slice(lambda.as_slice());
    if q > 0 {
        let w = -(&d + j_i.transpose() * &lambda);
        let mu = reduction.solve_transpose(&w, q);
        multipliers[p..].copy_from_slice(mu.as_slice());
    }

    let d: Vec<f64> = d.iter().copied().collect();
    let lin = sub.linearized(&d);
    let feasibility_residual = sub.cone.distance_unchecked(&lin);
    if feasibility_residual > feas_tol * scale {
        return Err(Error::Numerical(format!(
            "step violates the linearized inclusion by {feasibility_residual:e}"
        )));
    }
    let active_set = (0..p)
        .filter(|&i| multipliers[i] > 0.0 || lin[i] >= -opt_tol * scale)
        .collect();
    let norm_d = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(NewtonStep {
        d,
        norm_d,
        active_set,
        multipliers,
        feasibility_residual,
    })
}

/// `|T^{-1} w| = min { |d| : J d - w in C }`, `+inf` when no such `d` exists.
pub fn sublinear_image_norm(jacobian: &DMatrix<f64>, cone: &ProductCone, w: &[f64]) -> Result<f64> {
    let sub = LinearInclusionSubproblem::new(
        jacobian.clone(),
        w.iter().map(|v| -v).collect(),
        *cone,
    )?;
    match min_norm_step(&sub, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL) {
        Ok(step) => Ok(step.norm_d),
        Err(Error::Infeasible(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}
