//! Dense univariate polynomials with complex coefficients (ascending order).

use crate::linalg::{canonical_sort, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly::new(vec![C64::new(0.0, 0.0)])
    }

    pub fn constant(c: C64) -> Self {
        Poly::new(vec![c])
    }

    /// The monic linear factor `z - r`.
    pub fn linear(r: C64) -> Self {
        Poly::new(vec![-r, C64::new(1.0, 0.0)])
    }

    pub fn from_roots(roots: &[C64], lead: C64) -> Self {
        roots
            .iter()
            .fold(Poly::constant(lead), |acc, &r| &acc * &Poly::linear(r))
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: C64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Degree after discarding leading coefficients below `rel_tol` times the
    /// largest coefficient.
    pub fn degree(&self, rel_tol: f64) -> usize {
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            return 0;
        }
        self.coeffs
            .iter()
            .rposition(|c| c.norm() > rel_tol * scale)
            .unwrap_or(0)
    }

    pub fn trimmed(&self, rel_tol: f64) -> Poly {
        let d = self.degree(rel_tol);
        Poly::new(self.coeffs[..=d].to_vec())
    }

    pub fn leading(&self) -> C64 {
        *self.coeffs.last().unwrap()
    }

    /// Roots from the eigenvalues of the companion matrix, each polished by a
    /// few Newton steps, returned in canonical (Re, Im) order.
    pub fn roots(&self, rel_tol: f64) -> Vec<C64> {
        let p = self.trimmed(rel_tol);
        let d = p.coeffs.len() - 1;
        if d == 0 {
            return Vec::new();
        }
        let lead = p.leading();
        let mut comp = DMatrix::<C64>::zeros(d, d);
        for i in 1..d {
            comp[(i, i - 1)] = C64::new(1.0, 0.0);
        }
        for i in 0..d {
            comp[(i, d - 1)] = -p.coeffs[i] / lead;
        }
        let eig = crate::linalg::schur_eigenvalues(&comp);
        let dp = p.derivative();
        let mut roots: Vec<C64> = eig
            .iter()
            .map(|&r0| {
                let mut r = r0;
                for _ in 0..4 {
                    let f = p.eval(r);
                    let df = dp.eval(r);
                    if df.norm() == 0.0 {
                        break;
                    }
                    let step = f / df;
                    if !step.is_finite() || step.norm() > 1e-3 * (1.0 + r.norm()) {
                        break;
                    }
                    r -= step;
                }
                r
            })
            .collect();
        canonical_sort(&mut roots);
        roots
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let zero = C64::new(0.0, 0.0);
        Poly::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(zero)
                        + rhs.coeffs.get(i).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn roots_of_product_are_recovered() {
        let rs = [c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.5), c(-1.0, 2.0)];
        let p = Poly::from_roots(&rs, c(2.0, -1.0));
        let found = p.roots(1e-14);
        let mut expect = rs.to_vec();
        canonical_sort(&mut expect);
        for (a, b) in found.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn derivative_and_eval() {
        let p = Poly::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(p.eval(c(2.0, 0.0)), c(17.0, 0.0));
        assert_eq!(p.derivative().eval(c(2.0, 0.0)), c(14.0, 0.0));
    }

    #[test]
    fn degree_ignores_tiny_leading_terms() {
        let p = Poly::new(vec![c(1.0, 0.0), c(1.0, 0.0), c(1e-18, 0.0)]);
        assert_eq!(p.degree(1e-12), 1);
    }
}
