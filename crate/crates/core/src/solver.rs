//! Outer Newton iteration `x_{k+1} = x_k + argmin { |d| : F(x_k) + F'(x_k) d in C }`
//! and checks of the iterates against a majorant sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majorant::{Majorant, MajorantSpec, MajorantTrace};
use crate::minstep::{
    min_norm_step, sublinear_image_norm, FarkasCertificate, DEFAULT_FEAS_TOL, DEFAULT_OPT_TOL,
};
use crate::problem::InclusionProblem;

/// Absolute slack used by every bound check.
pub const BOUND_TOL: f64 = 1e-9;

/// Consecutive step-norm increases that abort an uncertified run.
pub const DIVERGENCE_STREAK: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_iter: usize,
    pub residual_tol: f64,
    pub step_tol: f64,
    pub record_bounds: bool,
    pub feas_tol: f64,
    pub opt_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            residual_tol: 1e-10,
            step_tol: 1e-12,
            record_bounds: false,
            feas_tol: DEFAULT_FEAS_TOL,
            opt_tol: DEFAULT_OPT_TOL,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        for (name, v) in [
            ("residual_tol", self.residual_tol),
            ("step_tol", self.step_tol),
            ("feas_tol", self.feas_tol),
            ("opt_tol", self.opt_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    ConvergedResidual,
    ConvergedStep,
    MaxIter,
    StepFailure,
}

impl SolveStatus {
    pub fn converged(&self) -> bool {
        matches!(self, SolveStatus::ConvergedResidual | SolveStatus::ConvergedStep)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::ConvergedResidual => "converged_residual",
            SolveStatus::ConvergedStep => "converged_step",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::StepFailure => "step_failure",
        }
    }
}

/// Online comparison of step `k` with the majorant sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub k: usize,
    pub t_gap: f64,
    pub step_le_gap: bool,
    pub quad_ratio_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub iterates: Vec<Vec<f64>>,
    pub step_norms: Vec<f64>,
    pub residuals: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_checks: Option<Vec<BoundCheck>>,
    pub status: SolveStatus,
    /// Separating multipliers when the last subproblem was infeasible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<FarkasCertificate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl SolveTrace {
    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("trace holds x_0")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("trace holds a residual")
    }

    pub fn iterations(&self) -> usize {
        self.step_norms.len()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn newton_solve(problem: &InclusionProblem, x0: &[f64], config: &SolveConfig) -> Result<SolveTrace> {
    run(problem, x0, config, None)
}

/// As [`newton_solve`], recording per-step comparisons with `majorant` when
/// `config.record_bounds` is set. The divergence guard is disabled.
pub fn newton_solve_with_majorant(
    problem: &InclusionProblem,
    x0: &[f64],
    config: &SolveConfig,
    majorant: &MajorantTrace,
    q: f64,
) -> Result<SolveTrace> {
    run(problem, x0, config, Some((majorant, q)))
}

fn run(
    problem: &InclusionProblem,
    x0: &[f64],
    config: &SolveConfig,
    majorant: Option<(&MajorantTrace, f64)>,
) -> Result<SolveTrace> {
    config.validate()?;
    if x0.len() != problem.n() {
        return Err(Error::DimensionMismatch {
            what: "x0",
            expected: problem.n(),
            found: x0.len(),
        });
    }
    let cone = problem.cone();
    let mut diagnostics = Vec::new();
    let offset = dist(x0, problem.x_tilde());
    if offset > problem.radius() {
        diagnostics.push(format!(
            "x0 lies outside B(x_tilde, R): |x0 - x_tilde| = {offset:e} > R = {:e}",
            problem.radius()
        ));
    }

    let mut x = x0.to_vec();
    let mut iterates = vec![x.clone()];
    let mut step_norms: Vec<f64> = Vec::new();
    let mut residuals = Vec::new();
    let mut bound_checks = (config.record_bounds && majorant.is_some()).then(Vec::new);
    let mut certificate = None;
    let mut increases = 0usize;

    let status = loop {
        let fx = problem.eval_f(&x)?;
        let res = cone.distance_unchecked(&fx);
        residuals.push(res);
        if res <= config.residual_tol {
            break SolveStatus::ConvergedResidual;
        }
        if step_norms.last().is_some_and(|&s| s <= config.step_tol) {
            break SolveStatus::ConvergedStep;
        }
        let k = step_norms.len();
        if k >= config.max_iter {
            break SolveStatus::MaxIter;
        }
        let sub = problem.subproblem(&x)?;
        let step = match min_norm_step(&sub, config.feas_tol, config.opt_tol) {
            Ok(s) => s,
            Err(Error::Infeasible(c)) => {
                diagnostics.push(format!("linearized inclusion infeasible at iterate {k}"));
                certificate = Some(*c);
                break SolveStatus::StepFailure;
            }
            Err(e @ (Error::Numerical(_) | Error::IterationLimit { .. })) => {
                diagnostics.push(format!("step computation failed at iterate {k}: {e}"));
                break SolveStatus::StepFailure;
            }
            Err(e) => return Err(e),
        };
        for (xi, di) in x.iter_mut().zip(&step.d) {
            *xi += di;
        }
        if let (Some(checks), Some((mt, q))) = (bound_checks.as_mut(), majorant) {
            let t_gap = mt.t_at(k + 1) - mt.t_at(k);
            let quad_ratio_ok = match step_norms.last() {
                Some(&prev) => step.norm_d <= q * prev * prev + BOUND_TOL,
                None => true,
            };
            checks.push(BoundCheck {
                k,
                t_gap,
                step_le_gap: step.norm_d <= t_gap + BOUND_TOL,
                quad_ratio_ok,
            });
        }
        if majorant.is_none() {
            if step_norms.last().is_some_and(|&s| step.norm_d > s) {
                increases += 1;
            } else {
                increases = 0;
            }
        }
        step_norms.push(step.norm_d);
        iterates.push(x.clone());
        if increases >= DIVERGENCE_STREAK {
            let fx = problem.eval_f(&x)?;
            residuals.push(cone.distance_unchecked(&fx));
            diagnostics.push(format!(
                "step norms increased {DIVERGENCE_STREAK} times in a row; aborting"
            ));
            break SolveStatus::MaxIter;
        }
    };

    Ok(SolveTrace {
        iterates,
        step_norms,
        residuals,
        bound_checks,
        status,
        certificate,
        diagnostics,
    })
}

/// One inequality evaluated at index `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs + tolerance - lhs`; negative means violated.
    pub slack: f64,
    pub ok: bool,
}

impl InequalityCheck {
    fn new(k: usize, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = rhs + tol - lhs;
        Self {
            k,
            lhs,
            rhs,
            slack,
            ok: slack >= 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `|x_{k+1} - x_k| <= t_{k+1} - t_k`, k >= 0.
    pub step_gap: Vec<InequalityCheck>,
    /// `|x_{k+1} - x_k| <= (t_{k+1} - t_k) / (t_k - t_{k-1})^2 |x_k - x_{k-1}|^2`, k >= 1.
    pub step_ratio: Vec<InequalityCheck>,
    /// `|x_{k+1} - x_k| <= Q |x_k - x_{k-1}|^2`, k >= 1.
    pub quadratic: Vec<InequalityCheck>,
    /// `|x_* - x_k| <= t_* - t_k` with the final iterate standing in for `x_*`.
    pub distance: Vec<InequalityCheck>,
    /// `|x_k - x_0| < t_*`.
    pub containment: Vec<InequalityCheck>,
    pub tolerance: f64,
    pub distance_tolerance: f64,
    pub pass: bool,
    pub note: String,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        [
            &self.step_gap,
            &self.step_ratio,
            &self.quadratic,
            &self.distance,
            &self.containment,
        ]
        .iter()
        .map(|v| v.iter().filter(|c| !c.ok).count())
        .sum()
    }
}

/// Checks the iterates of a converged run against the majorant sequence.
pub fn verify_majorant_bounds(trace: &SolveTrace, majorant: &MajorantTrace, q: f64) -> Result<BoundReport> {
    if majorant.t.is_empty() {
        return Err(Error::InvalidArgument("majorant trace is empty".into()));
    }
    if trace.iterates.len() != trace.step_norms.len() + 1 {
        return Err(Error::DimensionMismatch {
            what: "trace iterates vs steps",
            expected: trace.step_norms.len() + 1,
            found: trace.iterates.len(),
        });
    }
    if !trace.status.converged() {
        return Err(Error::InvalidArgument(format!(
            "trace did not converge (status {})",
            trace.status.as_str()
        )));
    }
    let tol = BOUND_TOL;
    let t = |k: usize| majorant.t_at(k);
    let steps = &trace.step_norms;

    let step_gap = steps
        .iter()
        .enumerate()
        .map(|(k, &s)| InequalityCheck::new(k, s, t(k + 1) - t(k), tol))
        .collect();

    let mut step_ratio = Vec::new();
    let mut quadratic = Vec::new();
    for k in 1..steps.len() {
        let prev = steps[k - 1];
        let gap_prev = t(k) - t(k - 1);
        if gap_prev > 0.0 {
            let rhs = (t(k + 1) - t(k)) / (gap_prev * gap_prev) * prev * prev;
            step_ratio.push(InequalityCheck::new(k, steps[k], rhs, tol));
        }
        quadratic.push(InequalityCheck::new(k, steps[k], q * prev * prev, tol));
    }

    let last = trace.last();
    let final_step = steps.last().copied().unwrap_or(0.0);
    let distance_tolerance = tol + 10.0 * final_step;
    let distance = trace
        .iterates
        .iter()
        .enumerate()
        .map(|(k, xk)| InequalityCheck::new(k, dist(last, xk), majorant.t_star - t(k), distance_tolerance))
        .collect();

    let x0 = &trace.iterates[0];
    let containment = trace
        .iterates
        .iter()
        .enumerate()
        .map(|(k, xk)| InequalityCheck::new(k, dist(xk, x0), majorant.t_star, tol))
        .collect();

    let mut report = BoundReport {
        step_gap,
        step_ratio,
        quadratic,
        distance,
        containment,
        tolerance: tol,
        distance_tolerance,
        pass: false,
        note: "x_* is approximated by the final iterate; its tolerance adds 10x the final step norm"
            .into(),
    };
    report.pass = report.violations() == 0;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionCheck {
    pub inside: bool,
    pub distance: f64,
    pub step_norm: f64,
    pub step_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Membership of `x` in `K(t) = { |x - x~| <= t, |T_x^-1(-F(x))| <= -f(t)/f'(t) }`.
pub fn region_k_check(problem: &InclusionProblem, x: &[f64], t: f64, spec: &MajorantSpec) -> Result<RegionCheck> {
    let t_star = spec.smallest_zero()?;
    if !(0.0..t_star).contains(&t) {
        return Err(Error::Domain(format!("t = {t} must lie in [0, t_*) = [0, {t_star})")));
    }
    let distance = dist(x, problem.x_tilde());
    let step_bound = -spec.eval_f(t)? / spec.eval_fprime(t)?;
    let fx = problem.eval_f(x)?;
    let w: Vec<f64> = fx.iter().map(|v| -v).collect();
    let step_norm = sublinear_image_norm(&problem.eval_jacobian(x)?, &problem.cone(), &w)?;
    let diagnostic = step_norm
        .is_infinite()
        .then(|| "linearized inclusion infeasible at x".to_string());
    Ok(RegionCheck {
        inside: distance <= t + BOUND_TOL && step_norm <= step_bound + BOUND_TOL,
        distance,
        step_norm,
        step_bound,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorant::{majorant_sequence, quadratic_rate_constant};
    use crate::problem::catalog_problem;
    use approx::assert_abs_diff_eq;

    fn solve(name: &str) -> SolveTrace {
        let p = catalog_problem(name).unwrap();
        newton_solve(&p, p.x_tilde(), &SolveConfig::default()).unwrap()
    }

    #[test]
    fn sqrt2_matches_scalar_newton() {
        let p = catalog_problem("sqrt2").unwrap();
        let cfg = SolveConfig {
            residual_tol: 1e-13,
            ..SolveConfig::default()
        };
        let tr = newton_solve(&p, p.x_tilde(), &cfg).unwrap();
        assert_eq!(tr.status, SolveStatus::ConvergedResidual);
        let mut x = 1.5f64;
        for xk in &tr.iterates {
            assert_abs_diff_eq!(xk[0], x, epsilon = 1e-15);
            x -= (x * x - 2.0) / (2.0 * x);
        }
        assert_abs_diff_eq!(tr.iterates[1][0], 1.5 - 0.25 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tr.iterates[1][0], 1.4166667, epsilon = 1e-7);
        assert_abs_diff_eq!(tr.iterates[2][0], 1.4142157, epsilon = 1e-7);
        assert_abs_diff_eq!(tr.last()[0], 2f64.sqrt(), epsilon = 1e-12);
        assert!(tr.iterations() <= 5);
    }

    #[test]
    fn affine_problem_converges_in_one_step() {
        let tr = solve("ineq-line");
        assert_eq!(tr.status, SolveStatus::ConvergedResidual);
        assert_eq!(tr.iterations(), 1);
        assert_abs_diff_eq!(tr.last()[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(tr.last()[1], 0.5, epsilon = 1e-14);
        assert!(tr.final_residual() <= 1e-14);
    }

    #[test]
    fn feasible_start_takes_no_step() {
        let p = catalog_problem("ineq-line").unwrap();
        let tr = newton_solve(&p, &[0.2, 0.2], &SolveConfig::default()).unwrap();
        assert_eq!(tr.status, SolveStatus::ConvergedResidual);
        assert_eq!(tr.iterations(), 0);
        assert_eq!(tr.residuals, vec![0.0]);
    }

    #[test]
    fn catalog_problems_converge() {
        for name in ["cubic", "ineq-circle", "system-2x2", "mixed-3"] {
            let tr = solve(name);
            assert!(tr.status.converged(), "{name}: {:?}", tr.status);
            assert!(tr.final_residual() <= 1e-10, "{name}");
            let p = catalog_problem(name).unwrap();
            if let Some(sol) = &p.expected().solution {
                assert!(dist(tr.last(), sol) <= 1e-9, "{name}: {:?}", tr.last());
            }
        }
    }

    #[test]
    fn infeasible_linearization_is_a_step_failure() {
        // F(x) = x^2 + 1 = 0 at x = 0 has F'(0) = 0
        let p = crate::problem::InclusionProblem::new(
            None,
            1,
            crate::cone::ProductCone::zero(1).unwrap(),
            vec![crate::poly::PolyExpr::add(
                crate::poly::PolyExpr::pow(crate::poly::PolyExpr::var(0), 2),
                crate::poly::PolyExpr::constant(1.0),
            )],
            vec![0.0],
            1.0,
            Default::default(),
        )
        .unwrap();
        let tr = newton_solve(&p, &[0.0], &SolveConfig::default()).unwrap();
        assert_eq!(tr.status, SolveStatus::StepFailure);
        let cert = tr.certificate.as_ref().unwrap();
        assert!(cert.gap > 0.0);
        assert_eq!(tr.iterations(), 0);
    }

    #[test]
    fn far_start_hits_guard_or_limit() {
        let p = catalog_problem("sqrt2").unwrap();
        let cfg = SolveConfig {
            max_iter: 3,
            ..SolveConfig::default()
        };
        let tr = newton_solve(&p, &[1000.0], &cfg).unwrap();
        assert_eq!(tr.status, SolveStatus::MaxIter);
        assert!(tr.diagnostics[0].contains("outside"));
        assert_eq!(tr.iterates.len(), tr.residuals.len());
        assert_eq!(tr.iterates.len(), tr.step_norms.len() + 1);
    }

    #[test]
    fn bounds_hold_for_exact_quadratic_certificate() {
        let p = catalog_problem("sqrt2").unwrap();
        let spec = MajorantSpec::quadratic(2.0 / 3.0, 1.0 / 12.0).unwrap();
        let mt = majorant_sequence(&spec, 60, 1e-14).unwrap();
        let q = quadratic_rate_constant(&spec).unwrap();
        let cfg = SolveConfig {
            record_bounds: true,
            ..SolveConfig::default()
        };
        let tr = newton_solve_with_majorant(&p, p.x_tilde(), &cfg, &mt, q).unwrap();
        let checks = tr.bound_checks.as_ref().unwrap();
        assert!(checks.iter().all(|c| c.step_le_gap && c.quad_ratio_ok));
        // k = 0 is an equality: the first step norm is b
        assert_abs_diff_eq!(tr.step_norms[0], checks[0].t_gap, epsilon = 1e-15);
        let report = verify_majorant_bounds(&tr, &mt, q).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn undersized_constant_is_caught() {
        let p = catalog_problem("cubic").unwrap();
        let b = 0.197 / 5.07;
        let spec = MajorantSpec::quadratic(0.01, b).unwrap();
        let mt = majorant_sequence(&spec, 60, 1e-14).unwrap();
        let q = quadratic_rate_constant(&spec).unwrap();
        let tr = newton_solve(&p, p.x_tilde(), &SolveConfig::default()).unwrap();
        let report = verify_majorant_bounds(&tr, &mt, q).unwrap();
        assert!(!report.pass);
        assert!(report.violations() > 0);
    }

    #[test]
    fn unconverged_trace_is_rejected() {
        let p = catalog_problem("sqrt2").unwrap();
        let cfg = SolveConfig {
            max_iter: 1,
            ..SolveConfig::default()
        };
        let tr = newton_solve(&p, p.x_tilde(), &cfg).unwrap();
        let spec = MajorantSpec::quadratic(2.0 / 3.0, 1.0 / 12.0).unwrap();
        let mt = majorant_sequence(&spec, 60, 1e-14).unwrap();
        assert!(verify_majorant_bounds(&tr, &mt, 1.0).is_err());
    }

    #[test]
    fn region_k_examples() {
        let p = catalog_problem("sqrt2").unwrap();
        let spec = MajorantSpec::quadratic(2.0 / 3.0, 1.0 / 12.0).unwrap();
        let r0 = region_k_check(&p, &[1.5], 0.0, &spec).unwrap();
        assert!(r0.inside);
        assert_abs_diff_eq!(r0.step_norm, 1.0 / 12.0, epsilon = 1e-15);
        assert!(!region_k_check(&p, &[1.2], 0.01, &spec).unwrap().inside);
        // one Newton step maps K(0) into K(n_f(0))
        let t1 = crate::majorant::newton_iterate_scalar(&spec, 0.0).unwrap();
        let x1 = 1.5 - 0.25 / 3.0;
        assert!(region_k_check(&p, &[x1], t1, &spec).unwrap().inside);
        assert!(region_k_check(&p, &[1.5], 1.0, &spec).is_err());
    }

    #[test]
    fn trace_json_layout() {
        let tr = solve("sqrt2");
        let v = serde_json::to_value(&tr).unwrap();
        for key in ["iterates", "step_norms", "residuals", "status"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["status"], "converged_residual");
        let back: SolveTrace = serde_json::from_value(v).unwrap();
        assert_eq!(back, tr);
    }
}
