//! Polynomial expression trees.
//!
//! Components of `F` are built from constants, variables, `+`, unary `-`, `*` and
//! nonnegative integer powers. Derivatives are taken symbolically and
//! directional Taylor coefficients are computed by evaluating the tree over
//! truncated univariate polynomials, so no finite differences are involved.

use serde_json::Value;

use crate::error::{Error, Result};

pub const MAX_DEPTH: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum PolyExpr {
    Const(f64),
    Var(usize),
    Add(Box<PolyExpr>, Box<PolyExpr>),
    Neg(Box<PolyExpr>),
    Mul(Box<PolyExpr>, Box<PolyExpr>),
    Pow(Box<PolyExpr>, u32),
}

impl PolyExpr {
    pub fn constant(c: f64) -> Self {
        PolyExpr::Const(c)
    }

    pub fn var(i: usize) -> Self {
        PolyExpr::Var(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: PolyExpr, b: PolyExpr) -> Self {
        PolyExpr::Add(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: PolyExpr, b: PolyExpr) -> Self {
        PolyExpr::add(a, PolyExpr::neg(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: PolyExpr) -> Self {
        PolyExpr::Neg(Box::new(a))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: PolyExpr, b: PolyExpr) -> Self {
        PolyExpr::Mul(Box::new(a), Box::new(b))
    }

    pub fn pow(a: PolyExpr, k: u32) -> Self {
        PolyExpr::Pow(Box::new(a), k)
    }

    /// Sum of a nonempty list of terms, left-associated.
    pub fn sum(terms: impl IntoIterator<Item = PolyExpr>) -> Self {
        terms
            .into_iter()
            .reduce(PolyExpr::add)
            .unwrap_or(PolyExpr::Const(0.0))
    }

    pub fn depth(&self) -> usize {
        match self {
            PolyExpr::Const(_) | PolyExpr::Var(_) => 1,
            PolyExpr::Neg(a) | PolyExpr::Pow(a, _) => 1 + a.depth(),
            PolyExpr::Add(a, b) | PolyExpr::Mul(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            PolyExpr::Const(_) => None,
            PolyExpr::Var(i) => Some(*i),
            PolyExpr::Neg(a) | PolyExpr::Pow(a, _) => a.max_var(),
            PolyExpr::Add(a, b) | PolyExpr::Mul(a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Upper bound on the total degree (exact unless terms cancel).
    pub fn degree(&self) -> u32 {
        match self {
            PolyExpr::Const(_) => 0,
            PolyExpr::Var(_) => 1,
            PolyExpr::Neg(a) => a.degree(),
            PolyExpr::Pow(a, k) => a.degree() * k,
            PolyExpr::Add(a, b) => a.degree().max(b.degree()),
            PolyExpr::Mul(a, b) => a.degree() + b.degree(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PolyExpr::Const(c) => *c,
            PolyExpr::Var(i) => x[*i],
            PolyExpr::Add(a, b) => a.eval(x) + b.eval(x),
            PolyExpr::Neg(a) => -a.eval(x),
            PolyExpr::Mul(a, b) => a.eval(x) * b.eval(x),
            PolyExpr::Pow(a, k) => a.eval(x).powi(*k as i32),
        }
    }

    /// Partial derivative with respect to variable `i`, lightly simplified.
    pub fn derivative(&self, i: usize) -> PolyExpr {
        match self {
            PolyExpr::Const(_) => PolyExpr::Const(0.0),
            PolyExpr::Var(j) => PolyExpr::Const(if *j == i { 1.0 } else { 0.0 }),
            PolyExpr::Add(a, b) => s_add(a.derivative(i), b.derivative(i)),
            PolyExpr::Neg(a) => s_neg(a.derivative(i)),
            PolyExpr::Mul(a, b) => s_add(
                s_mul(a.derivative(i), (**b).clone()),
                s_mul((**a).clone(), b.derivative(i)),
            ),
            PolyExpr::Pow(a, k) => match k {
                0 => PolyExpr::Const(0.0),
                1 => a.derivative(i),
                _ => s_mul(
                    s_mul(PolyExpr::Const(*k as f64), s_pow((**a).clone(), k - 1)),
                    a.derivative(i),
                ),
            },
        }
    }

    /// Coefficients `c_0..=c_order` of `tau -> self(x + tau v)`.
    pub fn taylor(&self, x: &[f64], v: &[f64], order: usize) -> Vec<f64> {
        match self {
            PolyExpr::Const(c) => truncated(vec![*c], order),
            PolyExpr::Var(i) => truncated(vec![x[*i], v[*i]], order),
            PolyExpr::Add(a, b) => {
                let (a, b) = (a.taylor(x, v, order), b.taylor(x, v, order));
                a.iter().zip(&b).map(|(p, q)| p + q).collect()
            }
            PolyExpr::Neg(a) => a.taylor(x, v, order).into_iter().map(|c| -c).collect(),
            PolyExpr::Mul(a, b) => series_mul(&a.taylor(x, v, order), &b.taylor(x, v, order)),
            PolyExpr::Pow(a, k) => {
                let base = a.taylor(x, v, order);
                let mut acc = truncated(vec![1.0], order);
                for _ in 0..*k {
                    acc = series_mul(&acc, &base);
                }
                acc
            }
        }
    }

    /// Parses the nested-array encoding
    /// `["add", a, b] | ["mul", a, b] | ["neg", a] | ["pow", a, k] | ["var", i] | ["const", c]`.
    pub fn from_json(value: &Value, path: &str) -> Result<Self> {
        Self::parse(value, path, 1)
    }

    fn parse(value: &Value, path: &str, depth: usize) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::schema(path, format!("expression deeper than {MAX_DEPTH}")));
        }
        let items = value
            .as_array()
            .ok_or_else(|| Error::schema(path, "expected an expression array"))?;
        let op = items
            .first()
            .and_then(Value::as_str)
            .ok_or_else(|| Error::schema(format!("{path}[0]"), "expected an operator string"))?;
        let arity = |n: usize| -> Result<()> {
            if items.len() == n + 1 {
                Ok(())
            } else {
                Err(Error::schema(
                    path,
                    format!("\"{op}\" takes {n} argument(s), found {}", items.len() - 1),
                ))
            }
        };
        let child = |k: usize| Self::parse(&items[k], &format!("{path}[{k}]"), depth + 1);
        match op {
            "const" => {
                arity(1)?;
                let c = items[1]
                    .as_f64()
                    .filter(|c| c.is_finite())
                    .ok_or_else(|| Error::schema(format!("{path}[1]"), "expected a finite number"))?;
                Ok(PolyExpr::Const(c))
            }
            "var" => {
                arity(1)?;
                let i = items[1].as_u64().ok_or_else(|| {
                    Error::schema(format!("{path}[1]"), "expected a nonnegative integer index")
                })?;
                Ok(PolyExpr::Var(i as usize))
            }
            "add" => {
                arity(2)?;
                Ok(PolyExpr::add(child(1)?, child(2)?))
            }
            "mul" => {
                arity(2)?;
                Ok(PolyExpr::mul(child(1)?, child(2)?))
            }
            "neg" => {
                arity(1)?;
                Ok(PolyExpr::neg(child(1)?))
            }
            "pow" => {
                arity(2)?;
                let k = items[2]
                    .as_u64()
                    .filter(|&k| k <= u32::MAX as u64)
                    .ok_or_else(|| {
                        Error::schema(format!("{path}[2]"), "expected a nonnegative integer power")
                    })?;
                Ok(PolyExpr::pow(child(1)?, k as u32))
            }
            other => Err(Error::schema(
                format!("{path}[0]"),
                format!("unknown operator \"{other}\""),
            )),
        }
    }

    pub fn to_json(&self) -> Value {
        use serde_json::json;
        match self {
            PolyExpr::Const(c) => json!(["const", c]),
            PolyExpr::Var(i) => json!(["var", i]),
            PolyExpr::Add(a, b) => json!(["add", a.to_json(), b.to_json()]),
            PolyExpr::Neg(a) => json!(["neg", a.to_json()]),
            PolyExpr::Mul(a, b) => json!(["mul", a.to_json(), b.to_json()]),
            PolyExpr::Pow(a, k) => json!(["pow", a.to_json(), k]),
        }
    }
}

fn is_const(e: &PolyExpr, v: f64) -> bool {
    matches!(e, PolyExpr::Const(c) if *c == v)
}

fn s_add(a: PolyExpr, b: PolyExpr) -> PolyExpr {
    match (&a, &b) {
        (PolyExpr::Const(x), PolyExpr::Const(y)) => PolyExpr::Const(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        _ => PolyExpr::add(a, b),
    }
}

fn s_neg(a: PolyExpr) -> PolyExpr {
    match a {
        PolyExpr::Const(c) => PolyExpr::Const(-c),
        PolyExpr::Neg(inner) => *inner,
        other => PolyExpr::neg(other),
    }
}

fn s_mul(a: PolyExpr, b: PolyExpr) -> PolyExpr {
    match (&a, &b) {
        (PolyExpr::Const(x), PolyExpr::Const(y)) => PolyExpr::Const(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => PolyExpr::Const(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ => PolyExpr::mul(a, b),
    }
}

fn s_pow(a: PolyExpr, k: u32) -> PolyExpr {
    match (k, &a) {
        (0, _) => PolyExpr::Const(1.0),
        (1, _) => a,
        (_, PolyExpr::Const(c)) => PolyExpr::Const(c.powi(k as i32)),
        _ => PolyExpr::pow(a, k),
    }
}

fn truncated(mut c: Vec<f64>, order: usize) -> Vec<f64> {
    c.resize(order + 1, 0.0);
    c
}

fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().take(n - i).enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}
