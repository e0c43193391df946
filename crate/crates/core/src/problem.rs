//! Inclusion problems `F(x) in C` with polynomial `F`, JSON I/O and a small catalog.

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::cone::ProductCone;
use crate::error::{Error, Result};
use crate::minstep::LinearInclusionSubproblem;
use crate::poly::{PolyExpr, MAX_DEPTH};

/// Reference constants shipped with a problem.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expected {
    pub l: Option<f64>,
    pub gamma: Option<f64>,
    pub b: Option<f64>,
    pub solution: Option<Vec<f64>>,
}

impl Expected {
    fn is_empty(&self) -> bool {
        self.l.is_none() && self.gamma.is_none() && self.b.is_none() && self.solution.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InclusionProblem {
    name: Option<String>,
    n: usize,
    cone: ProductCone,
    f: Vec<PolyExpr>,
    /// `jac[i][j] = dF_i / dx_j`, built once.
    jac: Vec<Vec<PolyExpr>>,
    x_tilde: Vec<f64>,
    r: f64,
    expected: Expected,
}

impl InclusionProblem {
    pub fn new(
        name: Option<String>,
        n: usize,
        cone: ProductCone,
        f: Vec<PolyExpr>,
        x_tilde: Vec<f64>,
        r: f64,
        expected: Expected,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if f.len() != cone.dim() {
            return Err(Error::DimensionMismatch {
                what: "F (p + q components)",
                expected: cone.dim(),
                found: f.len(),
            });
        }
        if x_tilde.len() != n {
            return Err(Error::DimensionMismatch {
                what: "x_tilde",
                expected: n,
                found: x_tilde.len(),
            });
        }
        if !x_tilde.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("x_tilde must be finite".into()));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("R must be positive and finite, got {r}")));
        }
        for (i, fi) in f.iter().enumerate() {
            if fi.depth() > MAX_DEPTH {
                return Err(Error::InvalidArgument(format!(
                    "F[{i}] is deeper than {MAX_DEPTH}"
                )));
            }
            if let Some(v) = fi.max_var() {
                if v >= n {
                    return Err(Error::InvalidArgument(format!(
                        "F[{i}] references variable {v} but n = {n}"
                    )));
                }
            }
        }
        if let Some(s) = &expected.solution {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "expected.solution",
                    expected: n,
                    found: s.len(),
                });
            }
        }
        let jac = f
            .iter()
            .map(|fi| (0..n).map(|j| fi.derivative(j)).collect())
            .collect();
        Ok(Self {
            name,
            n,
            cone,
            f,
            jac,
            x_tilde,
            r,
            expected,
        })
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.cone.dim()
    }

    pub fn cone(&self) -> ProductCone {
        self.cone
    }

    pub fn components(&self) -> &[PolyExpr] {
        &self.f
    }

    pub fn x_tilde(&self) -> &[f64] {
        &self.x_tilde
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn expected(&self) -> &Expected {
        &self.expected
    }

    /// Total degree of `F`.
    pub fn degree(&self) -> u32 {
        self.f.iter().map(PolyExpr::degree).max().unwrap_or(0)
    }

    /// Same problem with a new base point.
    pub fn with_base_point(&self, x_tilde: Vec<f64>) -> Result<Self> {
        let mut p = self.clone();
        if x_tilde.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "x_tilde",
                expected: self.n,
                found: x_tilde.len(),
            });
        }
        p.x_tilde = x_tilde;
        Ok(p)
    }

    /// `F` replaced by `diag(s) F` with `s > 0`; the cone is unchanged.
    pub fn scaled(&self, s: &[f64]) -> Result<Self> {
        if s.len() != self.m() {
            return Err(Error::DimensionMismatch {
                what: "scaling",
                expected: self.m(),
                found: s.len(),
            });
        }
        if !s.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument("scaling factors must be positive".into()));
        }
        let f = self
            .f
            .iter()
            .zip(s)
            .map(|(fi, &si)| PolyExpr::mul(PolyExpr::constant(si), fi.clone()))
            .collect();
        Self::new(
            self.name.clone(),
            self.n,
            self.cone,
            f,
            self.x_tilde.clone(),
            self.r,
            Expected::default(),
        )
    }

    fn check_point(&self, x: &[f64], what: &'static str) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.n,
                found: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!("{what} is not finite")));
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, "x")?;
        let v: Vec<f64> = self.f.iter().map(|fi| fi.eval(x)).collect();
        if !v.iter().all(|y| y.is_finite()) {
            return Err(Error::Domain("F(x) overflowed".into()));
        }
        Ok(v)
    }

    pub fn eval_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x, "x")?;
        let j = DMatrix::from_fn(self.m(), self.n, |i, k| self.jac[i][k].eval(x));
        if !j.iter().all(|y| y.is_finite()) {
            return Err(Error::Domain("F'(x) overflowed".into()));
        }
        Ok(j)
    }

    /// `coeffs[k][i]`: coefficient of `tau^k` in `F_i(x + tau v)`, `k = 0..=order`.
    pub fn directional_taylor(&self, x: &[f64], v: &[f64], order: usize) -> Result<Vec<Vec<f64>>> {
        self.check_point(x, "x")?;
        self.check_point(v, "v")?;
        let per_component: Vec<Vec<f64>> =
            self.f.iter().map(|fi| fi.taylor(x, v, order)).collect();
        Ok((0..=order)
            .map(|k| per_component.iter().map(|c| c[k]).collect())
            .collect())
    }

    /// The linearized inclusion at `x`.
    pub fn subproblem(&self, x: &[f64]) -> Result<LinearInclusionSubproblem> {
        LinearInclusionSubproblem::new(self.eval_jacobian(x)?, self.eval_f(x)?, self.cone)
    }
}

pub fn eval_f(problem: &InclusionProblem, x: &[f64]) -> Result<Vec<f64>> {
    problem.eval_f(x)
}

pub fn eval_jacobian(problem: &InclusionProblem, x: &[f64]) -> Result<DMatrix<f64>> {
    problem.eval_jacobian(x)
}

pub fn directional_taylor(
    problem: &InclusionProblem,
    x: &[f64],
    v: &[f64],
    order: usize,
) -> Result<Vec<Vec<f64>>> {
    problem.directional_taylor(x, v, order)
}

// ---- JSON ----

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::schema(path, format!("missing field \"{key}\"")))
}

fn as_count(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|k| k as usize)
        .ok_or_else(|| Error::schema(path, "expected a nonnegative integer"))
}

fn as_real(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::schema(path, "expected a finite number"))
}

fn as_reals(v: &Value, path: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::schema(path, "expected an array of numbers"))?
        .iter()
        .enumerate()
        .map(|(i, x)| as_real(x, &format!("{path}[{i}]")))
        .collect()
}

const KNOWN_FIELDS: [&str; 7] = ["name", "n", "cone", "F", "x_tilde", "R", "expected"];

pub fn load_problem(text: &str) -> Result<InclusionProblem> {
    let doc: Value = serde_json::from_str(text)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::schema("$", "expected a JSON object"))?;
    for key in obj.keys() {
        if !KNOWN_FIELDS.contains(&key.as_str()) {
            return Err(Error::schema(format!("$.{key}"), "unknown field"));
        }
    }
    let name = match obj.get("name") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(Error::schema("$.name", "expected a string")),
    };
    let n = as_count(field(obj, "n", "$")?, "$.n")?;
    if n == 0 {
        return Err(Error::schema("$.n", "must be at least 1"));
    }

    let cone_v = field(obj, "cone", "$")?
        .as_object()
        .ok_or_else(|| Error::schema("$.cone", "expected an object {\"p\": int, \"q\": int}"))?;
    let p = as_count(field(cone_v, "p", "$.cone")?, "$.cone.p")?;
    let q = as_count(field(cone_v, "q", "$.cone")?, "$.cone.q")?;
    let cone = ProductCone::new(p, q).map_err(|_| Error::schema("$.cone", "p + q must be at least 1"))?;

    let f_arr = field(obj, "F", "$")?
        .as_array()
        .ok_or_else(|| Error::schema("$.F", "expected an array of expressions"))?;
    if f_arr.len() != p + q {
        return Err(Error::schema(
            "$.F",
            format!("has {} components but cone.p + cone.q = {}", f_arr.len(), p + q),
        ));
    }
    let mut f = Vec::with_capacity(f_arr.len());
    for (i, e) in f_arr.iter().enumerate() {
        let path = format!("$.F[{i}]");
        let expr = PolyExpr::from_json(e, &path)?;
        if let Some(v) = expr.max_var() {
            if v >= n {
                return Err(Error::schema(path, format!("variable index {v} out of range for n = {n}")));
            }
        }
        f.push(expr);
    }

    let x_tilde = as_reals(field(obj, "x_tilde", "$")?, "$.x_tilde")?;
    if x_tilde.len() != n {
        return Err(Error::schema("$.x_tilde", format!("expected {n} entries, found {}", x_tilde.len())));
    }
    let r = as_real(field(obj, "R", "$")?, "$.R")?;
    if r <= 0.0 {
        return Err(Error::schema("$.R", "must be positive"));
    }

    let mut expected = Expected::default();
    match obj.get("expected") {
        None | Some(Value::Null) => {}
        Some(Value::Object(e)) => {
            for (key, v) in e {
                let path = format!("$.expected.{key}");
                match key.as_str() {
                    "L" => expected.l = Some(as_real(v, &path)?),
                    "gamma" => expected.gamma = Some(as_real(v, &path)?),
                    "b" => expected.b = Some(as_real(v, &path)?),
                    "solution" => {
                        let s = as_reals(v, &path)?;
                        if s.len() != n {
                            return Err(Error::schema(path, format!("expected {n} entries")));
                        }
                        expected.solution = Some(s);
                    }
                    _ => return Err(Error::schema(path, "unknown field")),
                }
            }
        }
        Some(_) => return Err(Error::schema("$.expected", "expected an object")),
    }

    InclusionProblem::new(name, n, cone, f, x_tilde, r, expected)
}

#[derive(Serialize)]
struct ExpectedDoc<'a> {
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solution: Option<&'a [f64]>,
}

#[derive(Serialize)]
struct ProblemDoc<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<&'a str>,
    n: usize,
    cone: ProductCone,
    #[serde(rename = "F")]
    f: Vec<Value>,
    x_tilde: &'a [f64],
    #[serde(rename = "R")]
    r: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected: Option<ExpectedDoc<'a>>,
}

/// Pretty-printed JSON; numbers use the shortest representation that round-trips.
pub fn save_problem(problem: &InclusionProblem) -> String {
    let e = &problem.expected;
    let doc = ProblemDoc {
        name: problem.name(),
        n: problem.n,
        cone: problem.cone,
        f: problem.f.iter().map(PolyExpr::to_json).collect(),
        x_tilde: &problem.x_tilde,
        r: problem.r,
        expected: (!e.is_empty()).then_some(ExpectedDoc {
            l: e.l,
            gamma: e.gamma,
            b: e.b,
            solution: e.solution.as_deref(),
        }),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("problem serializes");
    s.push('\n');
    s
}

// ---- catalog ----

fn x(i: usize) -> PolyExpr {
    PolyExpr::var(i)
}

fn c(v: f64) -> PolyExpr {
    PolyExpr::constant(v)
}

fn sq(e: PolyExpr) -> PolyExpr {
    PolyExpr::pow(e, 2)
}

fn build(
    name: &str,
    n: usize,
    (p, q): (usize, usize),
    f: Vec<PolyExpr>,
    x_tilde: Vec<f64>,
    r: f64,
    expected: Expected,
) -> InclusionProblem {
    InclusionProblem::new(
        Some(name.to_string()),
        n,
        ProductCone::new(p, q).expect("catalog cone"),
        f,
        x_tilde,
        r,
        expected,
    )
    .expect("catalog entry is valid")
}

/// Built-in problems.
pub fn catalog() -> Vec<InclusionProblem> {
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    // first step: d1 = d2 - 0.1 with 1.8 d1 + 1.6 d2 = -0.45 active
    let d2: f64 = -0.27 / 3.4;
    let circle_b = ((d2 - 0.1) * (d2 - 0.1) + d2 * d2).sqrt();
    vec![
        // |F''| / |F'(x~)| = 2/3 everywhere; gamma = 1/3, b = 0.25 / 3
        build(
            "sqrt2",
            1,
            (0, 1),
            vec![PolyExpr::add(sq(x(0)), c(-2.0))],
            vec![1.5],
            0.5,
            Expected {
                l: Some(2.0 / 3.0),
                gamma: Some(1.0 / 3.0),
                b: Some(1.0 / 12.0),
                solution: Some(vec![s2]),
            },
        ),
        // F'(x~) = 5.07; L = sup 3|x + y| / 5.07 = 9.6 / 5.07; gamma from k = 2: 3.9 / 5.07
        build(
            "cubic",
            1,
            (0, 1),
            vec![PolyExpr::add(PolyExpr::pow(x(0), 3), c(-2.0))],
            vec![1.3],
            0.3,
            Expected {
                l: Some(9.6 / 5.07),
                gamma: Some(3.9 / 5.07),
                b: Some(0.197 / 5.07),
                solution: Some(vec![2f64.cbrt()]),
            },
        ),
        build(
            "ineq-line",
            2,
            (1, 1),
            vec![
                PolyExpr::sum([x(0), x(1), c(-1.0)]),
                PolyExpr::sub(x(0), x(1)),
            ],
            vec![1.0, 1.0],
            1.0,
            Expected {
                l: Some(0.0),
                gamma: Some(0.0),
                b: Some(0.5f64.sqrt()),
                solution: Some(vec![0.5, 0.5]),
            },
        ),
        // only the inequality row varies and only its negative part is seen by T^-1
        build(
            "ineq-circle",
            2,
            (1, 1),
            vec![
                PolyExpr::sum([sq(x(0)), sq(x(1)), c(-1.0)]),
                PolyExpr::sub(x(0), x(1)),
            ],
            vec![0.9, 0.8],
            0.5,
            Expected {
                l: Some(s2 / 1.7),
                gamma: None,
                b: Some(circle_b),
                solution: Some(vec![0.5f64.sqrt(), 0.5f64.sqrt()]),
            },
        ),
        build(
            "system-2x2",
            2,
            (0, 2),
            vec![
                PolyExpr::sum([sq(x(0)), sq(x(1)), c(-4.0)]),
                PolyExpr::add(PolyExpr::mul(x(0), x(1)), c(-1.0)),
            ],
            vec![2.0, 0.5],
            0.5,
            Expected {
                solution: Some(vec![(s6 + s2) / 2.0, (s6 - s2) / 2.0]),
                ..Expected::default()
            },
        ),
        build(
            "mixed-3",
            3,
            (2, 1),
            vec![
                PolyExpr::sum([sq(x(0)), sq(x(1)), sq(x(2)), c(-1.0)]),
                PolyExpr::sub(c(0.2), PolyExpr::mul(x(0), x(1))),
                PolyExpr::sum([x(0), x(1), x(2), c(-1.0)]),
            ],
            vec![1.0, 0.8, 0.3],
            1.0,
            Expected::default(),
        ),
    ]
}

pub fn catalog_problem(name: &str) -> Option<InclusionProblem> {
    catalog().into_iter().find(|p| p.name() == Some(name))
}
