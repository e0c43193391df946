//! Command-line front end: `solve`, `certify`, `verify` and `catalog`.
//!
//! Exit codes: 0 success, 1 bad input, 2 iteration limit, 3 step failure,
//! 4 robustness radius out of range, 5 failed hypothesis or bound violation.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use newton_incl::certify::{
    estimate_gamma, estimate_l, point_in_ball, sample_rng, RobustnessBall, SampledEstimate,
};
use newton_incl::solver::{
    newton_solve, newton_solve_with_majorant, verify_majorant_bounds, BoundReport, SolveConfig,
    SolveStatus, SolveTrace,
};
use newton_incl::{
    catalog, catalog_problem, compute_b, kantorovich_certificate, load_problem, robustness_ball,
    save_problem, smale_certificate, Certificate, InclusionProblem, Provenance,
};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_STEP_FAILURE: i32 = 3;
pub const EXIT_RHO: i32 = 4;
pub const EXIT_VIOLATION: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "newton-incl", version, about = "Newton's method for F(x) in R^p_- x {0}^q with convergence certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the Newton iteration and print the iteration table.
    Solve(SolveArgs),
    /// Build a Kantorovich or Smale certificate at the base point.
    Certify(CertifyArgs),
    /// Solve from the base point (and perturbed starts) and check every bound.
    Verify(VerifyArgs),
    /// List or export the built-in problems.
    Catalog(CatalogArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Problem JSON file or catalog name.
    problem: String,
    /// Starting point, comma separated (defaults to x_tilde).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Residual tolerance on d(0, F(x) - C).
    #[arg(long, default_value = "1e-10")]
    tol: String,
    /// Write the JSON report to this path ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Quadratic,
    Smale,
}

#[derive(Args, Debug)]
struct CertFlags {
    #[arg(long, value_enum, default_value_t = FamilyArg::Quadratic)]
    family: FamilyArg,
    /// Lipschitz constant: a number, a ratio like 2/3, or "estimate".
    #[arg(long = "L")]
    l: Option<String>,
    /// Smale constant: a number, a ratio like 1/3, or "estimate".
    #[arg(long)]
    gamma: Option<String>,
    /// Samples used by "estimate".
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, env = "NEWTON_INCL_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    problem: String,
    #[command(flatten)]
    cert: CertFlags,
    /// Report the perturbed majorant for this radius.
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    problem: String,
    #[command(flatten)]
    cert: CertFlags,
    /// Number of random starts inside B(x_tilde, rho).
    #[arg(long, default_value_t = 0)]
    perturb: usize,
    /// Perturbation radius (defaults to rho_max / 2).
    #[arg(long)]
    rho: Option<String>,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value = "1e-12")]
    tol: String,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CatalogArgs {
    /// Write every problem as <name>.json into this directory.
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

/// Failure carrying an exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<newton_incl::Error> for Failure {
    fn from(e: newton_incl::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_INPUT,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a, out, err),
        Command::Certify(a) => cmd_certify(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Catalog(a) => cmd_catalog(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// `"1/3"`, `"0.25"`, `"-2"`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let num: f64 = a.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let den: f64 = b.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if den == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            num / den
        }
        None => s.parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not a finite number: {s:?}"))
    }
}

fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_real).collect()
}

fn load_source(source: &str) -> Result<InclusionProblem, Failure> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return load_problem(&text).map_err(|e| Failure::input(format!("{source}: {e}")));
    }
    catalog_problem(source).ok_or_else(|| {
        Failure::input(format!(
            "{source:?} is neither a readable file nor a catalog problem (see `newton-incl catalog`)"
        ))
    })
}

fn label(problem: &InclusionProblem) -> String {
    problem.name().unwrap_or("(unnamed)").to_string()
}

fn sci(v: f64) -> String {
    format!("{v:.11e}")
}

fn sci_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), sci)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn emit_json(target: &Path, mut doc: Value, start: Instant, out: &mut dyn Write) -> Result<(), Failure> {
    doc["timing_ms"] = json!(elapsed_ms(start));
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    if target == Path::new("-") {
        out.write_all(text.as_bytes())?;
    } else {
        std::fs::write(target, text)?;
    }
    Ok(())
}

fn to_stdout(json: &Option<PathBuf>) -> bool {
    json.as_deref() == Some(Path::new("-"))
}

// ---- solve ----

fn status_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::ConvergedResidual | SolveStatus::ConvergedStep => EXIT_OK,
        SolveStatus::MaxIter => EXIT_MAX_ITER,
        SolveStatus::StepFailure => EXIT_STEP_FAILURE,
    }
}

fn print_trace(trace: &SolveTrace, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{:>4}  {:>18}  {:>18}", "k", "step_norm", "residual")?;
    for (k, r) in trace.residuals.iter().enumerate() {
        let step = k
            .checked_sub(1)
            .and_then(|j| trace.step_norms.get(j))
            .map_or_else(|| "-".to_string(), |s| sci(*s));
        writeln!(out, "{k:>4}  {step:>18}  {:>18}", sci(*r))?;
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let start = Instant::now();
    let problem = load_source(&a.problem)?;
    let x0 = match &a.x0 {
        Some(s) => parse_vector(s).map_err(Failure::input)?,
        None => problem.x_tilde().to_vec(),
    };
    if x0.len() != problem.n() {
        return Err(Failure::input(format!(
            "--x0 has {} entries, problem has n = {}",
            x0.len(),
            problem.n()
        )));
    }
    let config = SolveConfig {
        max_iter: a.max_iter,
        residual_tol: parse_real(&a.tol).map_err(Failure::input)?,
        ..SolveConfig::default()
    };
    let trace = newton_solve(&problem, &x0, &config)?;
    for d in &trace.diagnostics {
        writeln!(err, "warning: {d}")?;
    }
    if !to_stdout(&a.json) {
        writeln!(out, "problem {}  n = {}  p = {}  q = {}", label(&problem), problem.n(), problem.cone().p(), problem.cone().q())?;
        print_trace(&trace, out)?;
        writeln!(out, "status: {}", trace.status.as_str())?;
        let x = trace.last().iter().map(|v| sci(*v)).collect::<Vec<_>>().join(", ");
        writeln!(out, "x = [{x}]")?;
    }
    if let Some(target) = &a.json {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": "solve",
            "problem": label(&problem),
            "x0": x0,
            "config": config,
            "trace": trace,
        });
        emit_json(target, doc, start, out)?;
    }
    Ok(status_code(trace.status))
}

// ---- certificates ----

#[derive(Serialize)]
struct CertificateBuild {
    certificate: Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<SampledEstimate>,
}

enum Constant {
    Value(f64, Provenance),
    Estimate,
}

fn constant_flag(problem: &InclusionProblem, flags: &CertFlags) -> Result<Constant, Failure> {
    let (given, other, name, own, foreign) = match flags.family {
        FamilyArg::Quadratic => (&flags.l, &flags.gamma, "--L", problem.expected().l, "--gamma"),
        FamilyArg::Smale => (&flags.gamma, &flags.l, "--gamma", problem.expected().gamma, "--L"),
    };
    if other.is_some() {
        return Err(Failure::input(format!(
            "{foreign} does not apply to the {:?} family; use {name}",
            flags.family
        )));
    }
    match given.as_deref() {
        Some("estimate") => Ok(Constant::Estimate),
        Some(s) => Ok(Constant::Value(parse_real(s).map_err(Failure::input)?, Provenance::UserSupplied)),
        None => own
            .map(|v| Constant::Value(v, Provenance::Exact))
            .ok_or_else(|| Failure::input(format!("give {name} <value> or {name} estimate"))),
    }
}

/// Certificate at `x~` with `b` computed exactly. `Ok(None)` when `F(x~)` is already in `C`.
fn build_certificate(problem: &InclusionProblem, flags: &CertFlags) -> Result<Option<CertificateBuild>, Failure> {
    let constant = constant_flag(problem, flags)?;
    let b = match compute_b(problem) {
        Ok(b) => b,
        Err(newton_incl::Error::Infeasible(_)) => {
            return Err(Failure {
                code: EXIT_VIOLATION,
                message: "Robinson's condition fails at x_tilde: the linearized inclusion is infeasible".into(),
            })
        }
        Err(e) => return Err(e.into()),
    };
    if b == 0.0 {
        return Ok(None);
    }
    let (value, provenance, estimate) = match constant {
        Constant::Value(v, p) => (v, p, None),
        Constant::Estimate => {
            let est = match flags.family {
                FamilyArg::Quadratic => estimate_l(problem, flags.samples, flags.seed)?,
                FamilyArg::Smale => estimate_gamma(problem, flags.samples, flags.seed)?,
            };
            (est.value, Provenance::SampledEstimate, Some(est))
        }
    };
    if value.is_nan() || value <= 0.0 {
        return Err(Failure::input(format!(
            "the family constant must be positive, got {value} (an affine F needs no majorant)"
        )));
    }
    let cert = match flags.family {
        FamilyArg::Quadratic => kantorovich_certificate(value, b)?,
        FamilyArg::Smale => smale_certificate(value, b)?,
    }
    .with_provenance(provenance, Provenance::Exact);
    Ok(Some(CertificateBuild {
        certificate: cert,
        estimate,
    }))
}

fn provenance_label(p: Provenance) -> &'static str {
    match p {
        Provenance::Exact => "exact",
        Provenance::UserSupplied => "user supplied",
        Provenance::SampledEstimate => "empirical estimate",
    }
}

fn print_certificate(cert: &Certificate, out: &mut dyn Write) -> std::io::Result<()> {
    let cname = cert.family.constant_name();
    let spec = cert.spec();
    let cval = match spec {
        newton_incl::MajorantSpec::Quadratic { l, .. } => l,
        newton_incl::MajorantSpec::Smale { gamma, .. } => gamma,
    };
    let quantity = match cert.family {
        newton_incl::Family::Quadratic => "2bL",
        newton_incl::Family::Smale => "alpha",
    };
    writeln!(out, "family     {:?}", cert.family)?;
    writeln!(out, "{cname:<10} {}  ({})", sci(cval), provenance_label(cert.provenance[cname]))?;
    writeln!(out, "{:<10} {}  ({})", "b", sci(spec.b()), provenance_label(cert.provenance["b"]))?;
    writeln!(out, "{quantity:<10} {}  (bound {})", sci(cert.hypothesis_value), sci(cert.hypothesis_bound))?;
    writeln!(out, "t_star     {}", sci_opt(cert.t_star))?;
    writeln!(out, "t_bar      {}", sci(cert.t_bar))?;
    writeln!(out, "beta       {}", sci_opt(cert.beta))?;
    writeln!(out, "rho_max    {}", sci_opt(cert.rho_max))?;
    if let Some(v) = cert.rho_bound_printed {
        writeln!(out, "rho_printed {}", sci(v))?;
    }
    writeln!(out, "Q          {}", sci_opt(cert.q))?;
    let verdict = match (cert.hypothesis_ok, cert.strict_ok) {
        (true, true) => "OK",
        (true, false) => "OK (boundary case: h4 fails, no quadratic rate)",
        (false, _) => "FAIL (hypothesis violated)",
    };
    if cert.empirical {
        writeln!(out, "verdict    {verdict} [empirical: sampled constant is a lower bound]")?;
    } else {
        writeln!(out, "verdict    {verdict}")?;
    }
    Ok(())
}

fn print_ball(ball: &RobustnessBall, out: &mut dyn Write) -> std::io::Result<()> {
    use newton_incl::Majorant;
    writeln!(out, "rho        {}", sci(ball.rho))?;
    writeln!(out, "g(0)       {}", sci(ball.g.value(0.0)))?;
    writeln!(out, "t_star_rho {}  (bisection)", sci(ball.t_star_rho))?;
    writeln!(out, "           {}  (closed form)", sci(ball.t_star_rho_closed_form))?;
    writeln!(out, "           {}  (printed form)", sci(ball.t_star_rho_printed))?;
    writeln!(out, "Q_rho      {}", sci(ball.q_rho))?;
    if let Some(q) = ball.q_rho_printed {
        writeln!(out, "           {}  (printed form)", sci(q))?;
    }
    Ok(())
}

fn rho_failure(rho: f64, rho_max: Option<f64>) -> Failure {
    Failure {
        code: EXIT_RHO,
        message: match rho_max {
            Some(m) => format!("rho = {} must satisfy 0 <= rho < rho_max = {}", sci(rho), sci(m)),
            None => "the certificate has no robustness radius (strict hypothesis fails)".into(),
        },
    }
}

fn ball_for(cert: &Certificate, rho: f64) -> Result<RobustnessBall, Failure> {
    match cert.rho_max {
        Some(m) if rho >= 0.0 && rho < m => Ok(robustness_ball(cert, rho)?),
        m => Err(rho_failure(rho, m)),
    }
}

fn cmd_certify(a: &CertifyArgs, out: &mut dyn Write) -> CmdResult {
    let start = Instant::now();
    let problem = load_source(&a.problem)?;
    let quiet = to_stdout(&a.json);
    let Some(build) = build_certificate(&problem, &a.cert)? else {
        if !quiet {
            writeln!(out, "F(x_tilde) already lies in C: x_tilde is a solution")?;
        }
        if let Some(t) = &a.json {
            let doc = json!({"schema_version": SCHEMA_VERSION, "command": "certify", "problem": label(&problem), "b": 0.0});
            emit_json(t, doc, start, out)?;
        }
        return Ok(EXIT_OK);
    };
    let cert = &build.certificate;
    if !quiet {
        writeln!(out, "problem    {}", label(&problem))?;
        print_certificate(cert, out)?;
        if let Some(est) = &build.estimate {
            writeln!(out, "estimate   {} samples, seed {}", est.n_samples, est.seed)?;
        }
    }
    let ball = match &a.rho {
        Some(s) => {
            let rho = parse_real(s).map_err(Failure::input)?;
            match ball_for(cert, rho) {
                Ok(b) => Some(b),
                Err(f) => {
                    if !quiet {
                        writeln!(out, "rho        {}  exceeds rho_max {}", sci(rho), sci_opt(cert.rho_max))?;
                    }
                    return Err(f);
                }
            }
        }
        None => None,
    };
    if let (Some(b), false) = (&ball, quiet) {
        print_ball(b, out)?;
    }
    if let Some(t) = &a.json {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": "certify",
            "problem": label(&problem),
            "certificate": cert,
            "estimate": build.estimate,
            "robustness": ball,
        });
        emit_json(t, doc, start, out)?;
    }
    Ok(if cert.hypothesis_ok { EXIT_OK } else { EXIT_VIOLATION })
}

// ---- verify ----

#[derive(Serialize)]
struct StartReport {
    label: String,
    x0: Vec<f64>,
    status: SolveStatus,
    iterations: usize,
    final_residual: f64,
    /// `max_k |x_k - x~|`.
    max_distance_from_x_tilde: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundReport>,
    pass: bool,
}

fn check_start(
    problem: &InclusionProblem,
    label: String,
    x0: Vec<f64>,
    config: &SolveConfig,
    majorant: &newton_incl::MajorantTrace,
    q: f64,
) -> Result<StartReport, Failure> {
    let trace = newton_solve_with_majorant(problem, &x0, config, majorant, q)?;
    let bounds = if trace.status.converged() {
        Some(verify_majorant_bounds(&trace, majorant, q)?)
    } else {
        None
    };
    let max_distance_from_x_tilde = trace
        .iterates
        .iter()
        .map(|x| x.iter().zip(problem.x_tilde()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let pass = bounds.as_ref().is_some_and(|b| b.pass);
    Ok(StartReport {
        label,
        x0,
        status: trace.status,
        iterations: trace.iterations(),
        final_residual: trace.final_residual(),
        max_distance_from_x_tilde,
        bounds,
        pass,
    })
}

fn mark(checks: &[newton_incl::solver::InequalityCheck]) -> String {
    let bad = checks.iter().filter(|c| !c.ok).count();
    if bad == 0 {
        "ok".into()
    } else {
        format!("FAIL({bad})")
    }
}

fn print_matrix(rows: &[StartReport], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<12} {:<18} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}  result",
        "start", "status", "iters", "step<=gap", "ratio", "quad", "dist", "ball"
    )?;
    for r in rows {
        let cols: Vec<String> = match &r.bounds {
            Some(b) => vec![
                mark(&b.step_gap),
                mark(&b.step_ratio),
                mark(&b.quadratic),
                mark(&b.distance),
                mark(&b.containment),
            ],
            None => vec!["-".into(); 5],
        };
        writeln!(
            out,
            "{:<12} {:<18} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}  {}",
            r.label,
            r.status.as_str(),
            r.iterations,
            cols[0],
            cols[1],
            cols[2],
            cols[3],
            cols[4],
            if r.pass { "pass" } else { "FAIL" }
        )?;
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let start = Instant::now();
    let problem = load_source(&a.problem)?;
    let quiet = to_stdout(&a.json);
    let config = SolveConfig {
        max_iter: a.max_iter,
        residual_tol: parse_real(&a.tol).map_err(Failure::input)?,
        record_bounds: true,
        ..SolveConfig::default()
    };
    let Some(build) = build_certificate(&problem, &a.cert)? else {
        if !quiet {
            writeln!(out, "F(x_tilde) already lies in C: nothing to verify")?;
        }
        if let Some(t) = &a.json {
            let doc = json!({"schema_version": SCHEMA_VERSION, "command": "verify", "problem": label(&problem), "pass": true});
            emit_json(t, doc, start, out)?;
        }
        return Ok(EXIT_OK);
    };
    let cert = &build.certificate;
    if !quiet {
        writeln!(out, "problem    {}", label(&problem))?;
        print_certificate(cert, out)?;
    }
    if !cert.hypothesis_ok {
        if let Some(t) = &a.json {
            let doc = json!({"schema_version": SCHEMA_VERSION, "command": "verify", "problem": label(&problem), "certificate": cert, "pass": false});
            emit_json(t, doc, start, out)?;
        }
        return Ok(EXIT_VIOLATION);
    }
    let mtrace = cert.majorant_trace()?;
    // without h4 there is no quadratic constant and the quadratic checks are vacuous
    let q = cert.q.unwrap_or(f64::INFINITY);
    let mut rows = vec![check_start(&problem, "x_tilde".into(), problem.x_tilde().to_vec(), &config, &mtrace, q)?];

    let mut ball = None;
    if a.perturb > 0 {
        let rho = match &a.rho {
            Some(s) => parse_real(s).map_err(Failure::input)?,
            None => cert.rho_max.map_or(0.0, |m| 0.5 * m),
        };
        let b = ball_for(cert, rho)?;
        let gtrace = b.majorant_trace()?;
        let seed = a.cert.seed;
        let perturbed: Result<Vec<StartReport>, Failure> = (0..a.perturb)
            .into_par_iter()
            .map(|i| {
                let x0 = point_in_ball(&mut sample_rng(seed, i as u64), problem.x_tilde(), rho);
                check_start(&problem, format!("x_hat[{i}]"), x0, &config, &gtrace, b.q_rho)
            })
            .collect();
        rows.extend(perturbed?);
        ball = Some(b);
    }

    let pass = rows.iter().all(|r| r.pass);
    if !quiet {
        if let Some(b) = &ball {
            print_ball(b, out)?;
        }
        print_matrix(&rows, out)?;
        let failed = rows.iter().filter(|r| !r.pass).count();
        writeln!(out, "{} of {} starts passed all checks", rows.len() - failed, rows.len())?;
        if cert.empirical {
            writeln!(out, "note: checks use a sampled constant and are empirical")?;
        }
    }
    if let Some(t) = &a.json {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": "verify",
            "problem": label(&problem),
            "certificate": cert,
            "estimate": build.estimate,
            "robustness": ball,
            "starts": rows,
            "pass": pass,
        });
        emit_json(t, doc, start, out)?;
    }
    Ok(if pass { EXIT_OK } else { EXIT_VIOLATION })
}

// ---- catalog ----

fn cmd_catalog(a: &CatalogArgs, out: &mut dyn Write) -> CmdResult {
    let start = Instant::now();
    let problems = catalog();
    if let Some(dir) = &a.export {
        std::fs::create_dir_all(dir)?;
        for p in &problems {
            std::fs::write(dir.join(format!("{}.json", label(p))), save_problem(p))?;
        }
    }
    if !to_stdout(&a.json) {
        writeln!(out, "{:<12} {:>2} {:>2} {:>2}  {:<22} {:>6}", "name", "n", "p", "q", "x_tilde", "R")?;
        for p in &problems {
            let xt = p.x_tilde().iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(", ");
            writeln!(
                out,
                "{:<12} {:>2} {:>2} {:>2}  {:<22} {:>6}",
                label(p),
                p.n(),
                p.cone().p(),
                p.cone().q(),
                format!("[{xt}]"),
                p.radius()
            )?;
        }
    }
    if let Some(t) = &a.json {
        let list: Vec<Value> = problems
            .iter()
            .map(|p| serde_json::from_str(&save_problem(p)).expect("saved problem parses"))
            .collect();
        let doc = json!({"schema_version": SCHEMA_VERSION, "command": "catalog", "problems": list});
        emit_json(t, doc, start, out)?;
    }
    Ok(EXIT_OK)
}
