//! The product cone `C = R^p_- x {0}^q`.
//!
//! The first `p` components of a vector in `Y = R^(p+q)` are constrained to be
//! nonpositive, the remaining `q` to vanish. `p = 0` gives the degenerate cone
//! `{0}`, for which the inclusion `F(x) in C` is a plain system of equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductCone {
    p: usize,
    q: usize,
}

impl ProductCone {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p + q == 0 {
            return Err(Error::InvalidArgument(
                "cone must have at least one component (p + q >= 1)".into(),
            ));
        }
        Ok(Self { p, q })
    }

    /// The degenerate cone `{0} in R^m`.
    pub fn zero(m: usize) -> Result<Self> {
        Self::new(0, m)
    }

    /// Number of `<= 0` components.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of `= 0` components.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Ambient dimension `m = p + q`.
    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn is_degenerate(&self) -> bool {
        self.p == 0
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "cone vector",
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Membership `v in C` up to an absolute per-component tolerance.
    pub fn contains(&self, v: &[f64], tol: f64) -> Result<bool> {
        self.check(v)?;
        if !(tol >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be nonnegative, got {tol}"
            )));
        }
        let (ineq, eq) = v.split_at(self.p);
        Ok(ineq.iter().all(|&x| x <= tol) && eq.iter().all(|&x| x.abs() <= tol))
    }

    /// `v - Proj_C(v)`.
    pub fn residual(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(self.residual_unchecked(v))
    }

    pub(crate) fn residual_unchecked(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| if i < self.p { x.max(0.0) } else { x })
            .collect()
    }

    /// `d(0, v - C)`, the Euclidean distance from `v` to the cone.
    pub fn distance(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        Ok(self.distance_unchecked(v))
    }

    pub(crate) fn distance_unchecked(&self, v: &[f64]) -> f64 {
        v.iter()
            .enumerate()
            .map(|(i, &x)| if i < self.p { x.max(0.0) } else { x })
            .map(|r| r * r)
            .sum::<f64>()
            .sqrt()
    }
}

pub fn contains(cone: &ProductCone, v: &[f64], tol: f64) -> Result<bool> {
    cone.contains(v, tol)
}

pub fn residual(cone: &ProductCone, v: &[f64]) -> Result<Vec<f64>> {
    cone.residual(v)
}

pub fn distance_to_cone(cone: &ProductCone, v: &[f64]) -> Result<f64> {
    cone.distance(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cone(p: usize, q: usize) -> ProductCone {
        ProductCone::new(p, q).unwrap()
    }

    #[test]
    fn empty_cone_rejected() {
        assert!(ProductCone::new(0, 0).is_err());
    }

    #[test]
    fn membership() {
        assert!(cone(1, 1).contains(&[-0.5, 0.0], 0.0).unwrap());
        assert!(!cone(1, 1).contains(&[0.1, 0.0], 1e-12).unwrap());
        assert!(cone(0, 2).contains(&[1e-13, -1e-13], 1e-12).unwrap());
        assert!(cone(1, 1).contains(&[0.0], 0.0).is_err());
        assert!(cone(1, 1).contains(&[0.0, 0.0], -1.0).is_err());
    }

    /// Grid minimization of |v - c| over c in C, used as a projection oracle.
    fn grid_residual_norm(cone: &ProductCone, v: &[f64]) -> f64 {
        // c_i ranges over a grid in [-2, 0] for inequality rows, fixed at 0 otherwise
        let steps = 400;
        let mut best = f64::INFINITY;
        let p = cone.p();
        let mut idx = vec![0usize; p];
        loop {
            let mut s = 0.0;
            for (i, &x) in v.iter().enumerate() {
                let c = if i < p {
                    -2.0 * idx[i] as f64 / steps as f64
                } else {
                    0.0
                };
                s += (x - c) * (x - c);
            }
            best = best.min(s.sqrt());
            let mut k = 0;
            while k < p {
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == p {
                break;
            }
        }
        best
    }

    #[test]
    fn residual_examples() {
        let c = cone(2, 1);
        let v = [0.5, -1.0, 0.3];
        assert_eq!(c.residual(&v).unwrap(), vec![0.5, 0.0, 0.3]);
        let d = c.distance(&v).unwrap();
        assert!((d - 0.34f64.sqrt()).abs() < 1e-15);
        assert!((d - 0.583095).abs() < 1e-6);
        assert!((grid_residual_norm(&c, &v) - d).abs() < 1e-12);

        assert_eq!(cone(1, 0).residual(&[-2.0]).unwrap(), vec![0.0]);
        assert_eq!(cone(0, 1).residual(&[7.0]).unwrap(), vec![7.0]);
        assert_eq!(cone(0, 1).distance(&[-3.0]).unwrap(), 3.0);
        assert_eq!(cone(2, 1).distance(&[-1.0, -3.0, 0.0]).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn distance_is_a_lower_bound(
            p in 0usize..3, q in 0usize..3,
            v in proptest::collection::vec(-5.0f64..5.0, 6),
            c in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            prop_assume!(p + q >= 1);
            let k = cone(p, q);
            let v = &v[..p + q];
            let c: Vec<f64> = (0..p + q)
                .map(|i| if i < p { -c[i].abs() } else { 0.0 })
                .collect();
            let dist: f64 = v.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!(k.distance(v).unwrap() <= dist + 1e-12);
        }

        #[test]
        fn residual_positively_homogeneous(
            v in proptest::collection::vec(-5.0f64..5.0, 4),
            alpha in 1e-3f64..1e3,
        ) {
            let k = cone(2, 2);
            let r = k.residual(&v).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| alpha * x).collect();
            let rs = k.residual(&scaled).unwrap();
            for (a, b) in r.iter().zip(&rs) {
                prop_assert!((alpha * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn zero_distance_iff_member(v in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let k = cone(2, 1);
            let mut v = v;
            if v[2].abs() < 0.5 { v[2] = 0.0; }
            prop_assert_eq!(k.contains(&v, 0.0).unwrap(), k.distance(&v).unwrap() == 0.0);
        }
    }
}
