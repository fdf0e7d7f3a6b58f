//! Gauss–Legendre panel quadrature with adaptive bisection.
//!
//! Each panel is integrated with N and 2N nodes; the difference is the panel
//! error estimate. Panels whose estimate exceeds their share of the target are
//! split in half.

use crate::error::{Error, Result};
use crate::linalg::C64;
use std::f64::consts::PI;
use std::sync::OnceLock;

pub const BASE_ORDER: usize = 16;
const MAX_DEPTH: usize = 40;

/// Nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static R16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R32: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        16 => R16.get_or_init(|| gauss_legendre(16)),
        32 => R32.get_or_init(|| gauss_legendre(32)),
        _ => panic!("unsupported rule order {n}"),
    }
}

fn panel<F>(f: &mut F, a: f64, b: f64, n: usize, dim: usize) -> Vec<C64>
where
    F: FnMut(f64) -> Vec<C64>,
{
    let (x, w) = rule(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut acc = vec![C64::new(0.0, 0.0); dim];
    for (xi, wi) in x.iter().zip(w) {
        let v = f(mid + half * xi);
        for (s, vi) in acc.iter_mut().zip(v) {
            *s += vi * (wi * half);
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Vec<C64>,
    pub error: f64,
}

/// Adaptive integral of a vector-valued integrand over the real interval [a, b].
pub fn integrate<F>(mut f: F, a: f64, b: f64, dim: usize, tol: f64) -> Result<QuadResult>
where
    F: FnMut(f64) -> Vec<C64>,
{
    let mut value = vec![C64::new(0.0, 0.0); dim];
    let mut error = 0.0;
    let mut stack = vec![(a, b, 0usize)];
    let total = (b - a).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let coarse = panel(&mut f, lo, hi, BASE_ORDER, dim);
        let fine = panel(&mut f, lo, hi, 2 * BASE_ORDER, dim);
        let est = coarse
            .iter()
            .zip(&fine)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        let share = tol * ((hi - lo).abs() / total).max(1e-3);
        if est <= share || depth >= MAX_DEPTH {
            if depth >= MAX_DEPTH && est > share * 1e3 {
                return Err(Error::QuadratureFailure { target: tol, estimate: est });
            }
            for (s, v) in value.iter_mut().zip(fine) {
                *s += v;
            }
            error += est;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(QuadResult { value, error })
}

/// Trapezoidal rule on a periodic integrand over [0, 2pi) with `n` nodes.
pub fn periodic_trapezoid<F>(mut f: F, n: usize, dim: usize) -> Vec<C64>
where
    F: FnMut(f64) -> Vec<C64>,
{
    let mut acc = vec![C64::new(0.0, 0.0); dim];
    let h = 2.0 * PI / n as f64;
    for k in 0..n {
        for (s, v) in acc.iter_mut().zip(f(k as f64 * h)) {
            *s += v * h;
        }
    }
    acc
}
