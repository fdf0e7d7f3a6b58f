//! Small dense complex linear algebra helpers on top of nalgebra.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::cmp::Ordering;

pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Lexicographic (Re, Im) order used for sheets, eigenvalues and branch points.
pub fn canonical_cmp(a: &C64, b: &C64) -> Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
}

pub fn canonical_sort(v: &mut [C64]) {
    v.sort_by(canonical_cmp);
}

pub fn min_pairwise_gap(v: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            gap = gap.min((v[i] - v[j]).norm());
        }
    }
    gap
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn diag(v: &[C64]) -> CMat {
    let n = v.len();
    let mut m = CMat::zeros(n, n);
    for (i, &x) in v.iter().enumerate() {
        m[(i, i)] = x;
    }
    m
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn max_offdiag(m: &CMat) -> f64 {
    let mut out: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                out = out.max(m[(i, j)].norm());
            }
        }
    }
    out
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("singular matrix".into()))
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Eigenvalues in canonical order and unit eigenvectors (columns, same order).
/// Eigenvectors come from the smallest right singular vector of `A - lambda`.
pub fn eig(m: &CMat) -> (Vec<C64>, CMat) {
    let n = m.nrows();
    let mut vals = schur_eigenvalues(m);
    canonical_sort(&mut vals);
    let mut vecs = CMat::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        let shifted = m - identity(n) * lam;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        for r in 0..n {
            vecs[(r, k)] = vt[(imin, r)].conj();
        }
    }
    (vals, vecs)
}

/// Eigenvalues (unordered) from a bounded complex Schur iteration. Exactly
/// defective inputs can stall QR; those are retried with a tiny shift of one entry.
pub fn schur_eigenvalues(m: &CMat) -> Vec<C64> {
    let scale = max_abs(m).max(1e-300);
    let mut a = m.clone();
    for attempt in 0..4 {
        if let Some(s) = a.clone().try_schur(f64::EPSILON, 20_000) {
            if let Some(ev) = s.eigenvalues() {
                return ev.iter().copied().collect();
            }
        }
        let n = a.nrows();
        a[(n - 1, 0)] += C64::new(1e-15, 1e-15 * (attempt + 1) as f64) * scale;
    }
    panic!("Schur iteration failed to converge");
}

/// Principal n-th root.
pub fn nth_root(z: C64, n: usize) -> C64 {
    z.powf(1.0 / n as f64)
}
