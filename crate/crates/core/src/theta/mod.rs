//! Riemann theta functions with characteristics and the kernels built from
//! them: prime form, Szegő kernel, canonical bidifferential and third-kind
//! differentials. Kernels are returned as coefficients in the z-chart.
//!
//! The lattice sum is evaluated as
//! `theta[d](z) = exp(pi y' Y^-1 y) sum_n exp(i pi m'Xm + 2 pi i m'(x + d'') - pi (m + c)'Y(m + c))`
//! with `m = n + d'`, `z = x + i y`, `tau = X + i Y` and `c = Y^-1 y`, summed over
//! the ellipsoid `|T(m + c)| <= R`, `T'T = pi Y`.

mod kernels;

pub use kernels::*;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

pub const DEFAULT_EPS: f64 = 1e-12;
pub const MAX_RADIUS: f64 = 40.0;
/// `|Theta(q)| / max lattice term` below this means `q` is treated as on the theta divisor.
pub const DIVISOR_GUARD: f64 = 1e-10;

/// Half-integer characteristic `[d'; d'']`.
#[derive(Clone, Debug, PartialEq)]
pub struct Characteristic {
    pub top: Vec<f64>,
    pub bottom: Vec<f64>,
}

impl Characteristic {
    pub fn zero(g: usize) -> Self {
        Characteristic { top: vec![0.0; g], bottom: vec![0.0; g] }
    }

    /// `4 d' . d'' mod 2`.
    pub fn parity(&self) -> u32 {
        let s: f64 = self.top.iter().zip(&self.bottom).map(|(a, b)| 4.0 * a * b).sum();
        (s.round() as i64).rem_euclid(2) as u32
    }

    pub fn is_odd(&self) -> bool {
        self.parity() == 1
    }

    /// All `4^g` half-characteristics, lexicographic in `(d'_1..d'_g, d''_1..d''_g)`.
    pub fn all(g: usize) -> Vec<Characteristic> {
        (0..1usize << (2 * g))
            .map(|bits| {
                let digit = |k: usize| if bits >> (2 * g - 1 - k) & 1 == 1 { 0.5 } else { 0.0 };
                Characteristic {
                    top: (0..g).map(digit).collect(),
                    bottom: (g..2 * g).map(digit).collect(),
                }
            })
            .collect()
    }
}

/// A theta value with derivatives, all sharing the factor `exp(log_scale)`.
#[derive(Clone, Debug)]
pub struct ThetaValue {
    pub log_scale: f64,
    pub value: C64,
    pub grad: Vec<C64>,
    pub hess: CMat,
    /// Largest single lattice term on the same scale.
    pub max_term: f64,
}

impl ThetaValue {
    pub fn materialize(&self) -> C64 {
        self.value * self.log_scale.exp()
    }

    pub fn grad_materialized(&self) -> Vec<C64> {
        let s = self.log_scale.exp();
        self.grad.iter().map(|g| g * s).collect()
    }

    pub fn log_grad(&self) -> Vec<C64> {
        self.grad.iter().map(|g| g / self.value).collect()
    }

    pub fn log_hess(&self) -> CMat {
        let g = self.grad.len();
        CMat::from_fn(g, g, |a, b| {
            self.hess[(a, b)] / self.value - self.grad[a] * self.grad[b] / (self.value * self.value)
        })
    }

    /// `|value| / max_term`, the quantity compared against the divisor guard.
    pub fn relative_size(&self) -> f64 {
        self.value.norm() / self.max_term.max(1e-300)
    }
}

#[derive(Clone, Debug)]
pub struct ThetaContext {
    pub tau: CMat,
    pub g: usize,
    y: DMatrix<f64>,
    y_inv: DMatrix<f64>,
    /// Upper triangular with `T'T = pi Y`.
    t: DMatrix<f64>,
    sigma_min: f64,
    pub eps: f64,
}

impl ThetaContext {
    pub fn new(tau: &CMat, eps: f64) -> Result<ThetaContext> {
        let g = tau.nrows();
        let y = DMatrix::<f64>::from_fn(g, g, |i, j| 0.5 * (tau[(i, j)].im + tau[(j, i)].im));
        let chol = (y.clone() * PI).cholesky().ok_or_else(|| Error::InvalidParameter(
            "Im tau is not positive definite".into(),
        ))?;
        let t = chol.l().transpose();
        let y_inv = y.clone().try_inverse().expect("positive definite");
        let sigma_min = t.clone().singular_values().min();
        Ok(ThetaContext { tau: tau.clone(), g, y, y_inv, t, sigma_min, eps })
    }

    fn tail_bound(&self, r: f64, shift_norm: f64) -> f64 {
        let rho = self.sigma_min;
        let mut total = 0.0;
        for k in 0..400 {
            let rk = r + k as f64;
            let count = (1.0 + 2.0 * (rk + 1.0) / rho).powi(self.g as i32);
            let poly = (1.0 + 2.0 * PI * ((rk + 1.0) / rho + shift_norm)).powi(2);
            let term = count * poly * (-rk * rk).exp();
            total += term;
            if term < 1e-40 {
                break;
            }
        }
        total
    }

    /// Ellipsoid radius for absolute target `target` on the normalized scale.
    fn radius(&self, target: f64, shift_norm: f64) -> Result<f64> {
        let mut r = 1.0;
        while self.tail_bound(r, shift_norm) > target {
            r += 0.25;
            if r > MAX_RADIUS {
                return Err(Error::TruncationFailure { radius: r });
            }
        }
        Ok(r)
    }

    /// Lattice points `m` (as `n + d'`) inside the ellipsoid around `-center`.
    fn enumerate(&self, center: &[f64], r: f64, offset: &[f64], out: &mut Vec<Vec<f64>>) {
        let g = self.g;
        let mut cur = vec![0.0; g];
        self.enum_level(g as isize - 1, center, r * r, offset, &mut cur, out);
    }

    fn enum_level(
        &self,
        i: isize,
        center: &[f64],
        budget: f64,
        offset: &[f64],
        cur: &mut Vec<f64>,
        out: &mut Vec<Vec<f64>>,
    ) {
        if i < 0 {
            out.push(cur.clone());
            return;
        }
        let i = i as usize;
        let g = self.g;
        let tii = self.t[(i, i)];
        let tail: f64 = (i + 1..g).map(|j| self.t[(i, j)] * (cur[j] + center[j])).sum();
        // v_i = m_i + center_i with m_i = n_i + offset_i
        let mid = -tail / tii - center[i] - offset[i];
        let half = budget.max(0.0).sqrt() / tii;
        let lo = (mid - half).ceil() as i64;
        let hi = (mid + half).floor() as i64;
        for n in lo..=hi {
            let m = n as f64 + offset[i];
            let lin = tii * (m + center[i]) + tail;
            cur[i] = m;
            self.enum_level(i as isize - 1, center, budget - lin * lin, offset, cur, out);
        }
        cur[i] = 0.0;
    }

    /// `theta[ch](z)` with gradient and Hessian.
    pub fn eval(&self, ch: &Characteristic, z: &[C64], order: usize) -> Result<ThetaValue> {
        let g = self.g;
        if z.len() != g {
            return Err(Error::InvalidParameter(format!("theta argument has length {}, expected {g}", z.len())));
        }
        let x: Vec<f64> = z.iter().zip(&ch.bottom).map(|(w, d)| w.re + d).collect();
        let yv = DVector::<f64>::from_fn(g, |i, _| z[i].im);
        let c = &self.y_inv * &yv;
        let log_scale = PI * yv.dot(&c);
        let center: Vec<f64> = c.iter().copied().collect();
        // nearest point sets the relative scale for the truncation target
        let near: Vec<f64> = (0..g)
            .map(|i| (-center[i] - ch.top[i]).round() + ch.top[i])
            .collect();
        let v = DVector::<f64>::from_fn(g, |i, _| near[i] + center[i]);
        let d2 = (&self.t * v).norm_squared();
        let shift_norm = center.iter().map(|t| t.abs()).fold(0.0, f64::max) + 1.0;
        let r = self.radius(self.eps * (-d2).exp(), shift_norm)?;
        let mut pts = Vec::new();
        self.enumerate(&center, r, &ch.top, &mut pts);
        let mut value = C64::new(0.0, 0.0);
        let mut grad = vec![C64::new(0.0, 0.0); g];
        let mut hess = CMat::zeros(g, g);
        let mut max_term: f64 = 0.0;
        let two_pi_i = C64::new(0.0, 2.0 * PI);
        for m in &pts {
            let mut quad_x = 0.0;
            let mut quad_y = 0.0;
            for a in 0..g {
                for b in 0..g {
                    quad_x += m[a] * self.tau[(a, b)].re * m[b];
                    quad_y += (m[a] + center[a]) * self.y[(a, b)] * (m[b] + center[b]);
                }
            }
            let lin: f64 = m.iter().zip(&x).map(|(a, b)| a * b).sum();
            let phase = PI * quad_x + 2.0 * PI * lin;
            let term = C64::from_polar((-PI * quad_y).exp(), phase);
            max_term = max_term.max(term.norm());
            value += term;
            if order >= 1 {
                for a in 0..g {
                    grad[a] += term * two_pi_i * m[a];
                    if order >= 2 {
                        for b in 0..g {
                            hess[(a, b)] += term * two_pi_i * two_pi_i * m[a] * m[b];
                        }
                    }
                }
            }
        }
        Ok(ThetaValue { log_scale, value, grad, hess, max_term })
    }

    /// Riemann theta `Theta(z)` (zero characteristic).
    pub fn theta(&self, z: &[C64], order: usize) -> Result<ThetaValue> {
        self.eval(&Characteristic::zero(self.g), z, order)
    }

    /// `Theta(q)` with the theta-divisor guard applied.
    pub fn theta_guarded(&self, q: &[C64], order: usize) -> Result<ThetaValue> {
        let t = self.theta(q, order)?;
        let ratio = t.relative_size();
        if ratio < DIVISOR_GUARD {
            return Err(Error::OnThetaDivisor { ratio });
        }
        Ok(t)
    }

    /// First odd characteristic (lexicographic) with `|grad theta[d](0)| > 1e-8`.
    pub fn odd_characteristic(&self) -> Result<(Characteristic, Vec<C64>)> {
        let zero = vec![C64::new(0.0, 0.0); self.g];
        for ch in Characteristic::all(self.g) {
            if !ch.is_odd() {
                continue;
            }
            let t = self.eval(&ch, &zero, 1)?;
            let grad = t.grad_materialized();
            if grad.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() > 1e-8 {
                return Ok((ch, grad));
            }
        }
        Err(Error::OddCharDegenerate)
    }

    /// Residual of `theta[d](z + tau e_a) = exp(-i pi tau_aa - 2 pi i (z_a + d''_a)) theta[d](z)`.
    pub fn quasi_periodicity_residual(&self, ch: &Characteristic, z: &[C64], a: usize) -> Result<f64> {
        let lhs = self.eval(ch, &(0..self.g).map(|i| z[i] + self.tau[(i, a)]).collect::<Vec<_>>(), 0)?;
        let rhs = self.eval(ch, z, 0)?;
        let factor = (C64::new(0.0, -PI) * self.tau[(a, a)]
            - C64::new(0.0, 2.0 * PI) * (z[a] + ch.bottom[a]))
            .exp();
        let l = lhs.materialize();
        let r = rhs.materialize() * factor;
        let scale = (lhs.max_term * lhs.log_scale.exp()).max(r.norm());
        Ok((l - r).norm() / scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    /// Direct box sum `|n_i| <= 12`, no recentering.
    fn brute(tau: &CMat, ch: &Characteristic, z: &[C64]) -> C64 {
        let g = tau.nrows();
        let mut acc = C64::new(0.0, 0.0);
        let k = 12i64;
        let total = (2 * k + 1).pow(g as u32);
        for idx in 0..total {
            let mut rem = idx;
            let m: Vec<f64> = (0..g)
                .map(|i| {
                    let n = rem % (2 * k + 1) - k;
                    rem /= 2 * k + 1;
                    n as f64 + ch.top[i]
                })
                .collect();
            let mut e = C64::new(0.0, 0.0);
            for a in 0..g {
                for b in 0..g {
                    e += C64::new(0.0, PI) * m[a] * tau[(a, b)] * m[b];
                }
                e += C64::new(0.0, 2.0 * PI) * m[a] * (z[a] + ch.bottom[a]);
            }
            acc += e.exp();
        }
        acc
    }

    fn tau2() -> CMat {
        CMat::from_row_slice(2, 2, &[c(0.3, 1.1), c(-0.2, 0.35), c(-0.2, 0.35), c(0.45, 0.9)])
    }

    #[test]
    fn theta3_at_tau_i() {
        let ctx = ThetaContext::new(&CMat::from_element(1, 1, c(0.0, 1.0)), DEFAULT_EPS).unwrap();
        let v = ctx.theta(&[c(0.0, 0.0)], 0).unwrap().materialize();
        assert!((v - c(1.086_434_811_213_308, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn matches_box_sum_with_characteristics() {
        let tau = tau2();
        let ctx = ThetaContext::new(&tau, DEFAULT_EPS).unwrap();
        let z = [c(0.31, -0.42), c(-0.17, 0.23)];
        for ch in Characteristic::all(2) {
            let a = ctx.eval(&ch, &z, 0).unwrap().materialize();
            let b = brute(&tau, &ch, &z);
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()), "{ch:?}: {a} vs {b}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let ctx = ThetaContext::new(&tau2(), DEFAULT_EPS).unwrap();
        let ch = Characteristic { top: vec![0.5, 0.0], bottom: vec![0.5, 0.5] };
        let z = [c(0.2, 0.1), c(-0.3, 0.05)];
        let t = ctx.eval(&ch, &z, 2).unwrap();
        let h = 1e-5;
        for a in 0..2 {
            let mut zp = z;
            let mut zm = z;
            zp[a] += h;
            zm[a] -= h;
            let tp = ctx.eval(&ch, &zp, 1).unwrap();
            let tm = ctx.eval(&ch, &zm, 1).unwrap();
            let fd = (tp.materialize() - tm.materialize()) / (2.0 * h);
            assert!((fd - t.grad_materialized()[a]).norm() < 1e-7);
            for b in 0..2 {
                let fd2 = (tp.grad_materialized()[b] - tm.grad_materialized()[b]) / (2.0 * h);
                assert!((fd2 - t.hess[(a, b)] * t.log_scale.exp()).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn parity_and_periodicity() {
        let ctx = ThetaContext::new(&tau2(), DEFAULT_EPS).unwrap();
        let z = [c(0.11, 0.27), c(-0.38, -0.12)];
        let mz = [-z[0], -z[1]];
        for ch in Characteristic::all(2) {
            let a = ctx.eval(&ch, &z, 0).unwrap().materialize();
            let b = ctx.eval(&ch, &mz, 0).unwrap().materialize();
            let sign = if ch.is_odd() { -1.0 } else { 1.0 };
            assert!((a - b * sign).norm() < 1e-12);
            for k in 0..2 {
                assert!(ctx.quasi_periodicity_residual(&ch, &z, k).unwrap() < 1e-12);
            }
        }
        let shifted = [z[0] + 1.0, z[1]];
        let t0 = ctx.theta(&z, 0).unwrap().materialize();
        let t1 = ctx.theta(&shifted, 0).unwrap().materialize();
        assert!((t0 - t1).norm() < 1e-12);
    }

    #[test]
    fn characteristics_enumerate_six_odd_in_genus_two() {
        let all = Characteristic::all(2);
        assert_eq!(all.len(), 16);
        assert_eq!(all.iter().filter(|c| c.is_odd()).count(), 6);
        let ctx = ThetaContext::new(&tau2(), DEFAULT_EPS).unwrap();
        let (ch, _) = ctx.odd_characteristic().unwrap();
        assert!(ch.is_odd());
        let v = ctx.eval(&ch, &[c(0.0, 0.0), c(0.0, 0.0)], 0).unwrap();
        assert!(v.materialize().norm() < 1e-14);
    }

    #[test]
    fn tighter_target_agrees() {
        let tau = tau2();
        let a = ThetaContext::new(&tau, 1e-12).unwrap();
        let b = ThetaContext::new(&tau, 1e-15).unwrap();
        let z = [c(0.4, 0.9), c(-0.2, -0.7)];
        let x = a.theta(&z, 0).unwrap();
        let y = b.theta(&z, 0).unwrap();
        assert!((x.value - y.value).norm() < 1e-12 * x.max_term);
    }
}
