//! Darboux coordinates of spectral data and the round-trip checks.

use super::{direct, direct_with, inverse_at, inverse_with, max_diff, SpectralData};
use crate::error::{Error, Result};
use crate::json::cpx_vec;
use crate::linalg::{inverse, max_abs, CMat, C64};
use crate::periods::lattice_distance;
use crate::ratmat::{mu_from_lambda, PhasePoint};
use crate::theta::SurfaceKernels;
use serde_json::{json, Value};
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct Coordinates {
    pub actions: Vec<C64>,
    pub q: Vec<C64>,
    /// `mu[j][k-1] = mu_j^(k)`.
    pub mu: Vec<Vec<C64>>,
    /// `rho[j][k-1] = rho_j^(k)` from principal logs.
    pub rho: Vec<Vec<C64>>,
    /// Winding of the telescoped sum relative to the principal log of the product.
    pub rho_winding: Vec<Vec<i64>>,
}

impl Coordinates {
    pub fn to_json(&self) -> Value {
        json!({
            "I": cpx_vec(&self.actions),
            "q": cpx_vec(&self.q),
            "mu": self.mu.iter().map(|m| cpx_vec(m)).collect::<Vec<_>>(),
            "rho": self.rho.iter().map(|r| cpx_vec(r)).collect::<Vec<_>>(),
            "rho_winding": self.rho_winding,
        })
    }
}

/// `rho^(k) = sum_(i <= k) log r^(i)`, so that `exp(rho^(k) - rho^(k-1)) = r^(k)`.
pub fn rho_from_toric(toric: &[Vec<C64>], tol: f64) -> Result<(Vec<Vec<C64>>, Vec<Vec<i64>>)> {
    let mut rho = Vec::new();
    let mut wind = Vec::new();
    for (j, r) in toric.iter().enumerate() {
        if r.iter().any(|x| x.norm() < tol) {
            return Err(Error::LogBranchAmbiguity { index: j });
        }
        let n = r.len();
        let mut acc = C64::new(0.0, 0.0);
        let mut prod = C64::new(1.0, 0.0);
        let mut rj = Vec::new();
        let mut wj = Vec::new();
        for x in &r[..n - 1] {
            acc += x.ln();
            prod *= x;
            rj.push(acc);
            wj.push(((acc.im - prod.ln().im) / (2.0 * PI)).round() as i64);
        }
        rho.push(rj);
        wind.push(wj);
    }
    Ok((rho, wind))
}

/// Inverse of [`rho_from_toric`].
pub fn toric_from_rho(rho: &[Vec<C64>]) -> Vec<Vec<C64>> {
    rho.iter()
        .map(|r| {
            let n = r.len() + 1;
            (0..n)
                .map(|k| {
                    let hi = if k < n - 1 { r[k] } else { C64::new(0.0, 0.0) };
                    let lo = if k > 0 { r[k - 1] } else { C64::new(0.0, 0.0) };
                    (hi - lo).exp()
                })
                .collect()
        })
        .collect()
}

pub fn extract_coords(data: &SpectralData, k: &SurfaceKernels, tol: f64) -> Result<Coordinates> {
    let (actions, _) = k.abel.periods.action_periods(tol)?;
    let lambda = k.abel.periods.residues_v()?;
    let mu = mu_from_lambda(&lambda, 1e-8)?.values;
    let (rho, rho_winding) = rho_from_toric(&data.toric, 1e-12)?;
    Ok(Coordinates { actions, q: data.q.clone(), mu, rho, rho_winding })
}

/// Distance between `rho` values modulo `2 pi i`.
pub fn rho_distance(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    let mut out = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        for (u, v) in x.iter().zip(y) {
            let d = u - v;
            let k = (d.im / (2.0 * PI)).round();
            out = out.max(C64::new(d.re, d.im - 2.0 * PI * k).norm());
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct RoundTripReport {
    /// `H(F(p))` against the gauge-fixed `p`, after one left SL(n) fit.
    pub g_error: f64,
    pub l_error: f64,
    /// `F(H(d))` against `d`.
    pub q_error: f64,
    pub actions_error: f64,
    pub mu_error: f64,
    pub rho_error: f64,
    pub conjugation_residual: f64,
    pub toric_offdiag: f64,
}

impl RoundTripReport {
    pub fn max_error(&self) -> f64 {
        [self.g_error, self.l_error, self.q_error, self.actions_error, self.mu_error, self.rho_error]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "G": self.g_error,
            "L": self.l_error,
            "q": self.q_error,
            "I": self.actions_error,
            "mu": self.mu_error,
            "rho": self.rho_error,
            "conjugation": self.conjugation_residual,
            "toric_offdiag": self.toric_offdiag,
            "max_error": self.max_error(),
        })
    }
}

/// Max `|S G_j - G'_j|` with `S` fitted on the first pole.
pub fn compare_points(p: &PhasePoint, other: &PhasePoint) -> Result<(f64, f64)> {
    let s = &other.diagonalizers[0] * inverse(&p.diagonalizers[0])?;
    let mut g_err = 0.0f64;
    let mut l_err = 0.0f64;
    for j in 0..p.m() {
        g_err = g_err.max(max_diff(&(&s * &p.diagonalizers[j]), &other.diagonalizers[j]));
        for (a, b) in p.eigenvalues[j].iter().zip(&other.eigenvalues[j]) {
            l_err = l_err.max((a - b).norm());
        }
    }
    Ok((g_err, l_err))
}

/// Both compositions on one instance. `q_shift` perturbs the spectral data
/// before the second leg to exercise the sensitivity of the comparison.
pub fn roundtrip(point: &PhasePoint, z0: Option<C64>, tol: f64, q_shift: f64) -> Result<RoundTripReport> {
    let out = direct(point, z0, tol)?;
    let k = SurfaceKernels::from_curve(&out.data.curve, tol)?;
    let mut data = out.data.clone();
    for q in data.q.iter_mut() {
        *q += q_shift;
    }
    let back = inverse_with(&k, &data.q, &data.toric)?;
    let (g_error, l_error) = compare_points(&out.fixed, &back)?;
    // F(H(d)) with d = F(p)
    let again = direct_with(&k, &back)?;
    let c1 = extract_coords(&data, &k, tol)?;
    let c2 = extract_coords(&again.data, &k, tol)?;
    let dq: Vec<C64> = data.q.iter().zip(&again.data.q).map(|(a, b)| a - b).collect();
    let q_error = lattice_distance(k.tau(), &dq);
    let vec_err = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let actions_error = vec_err(&c1.actions, &c2.actions);
    let mu_error = c1.mu.iter().zip(&c2.mu).map(|(a, b)| vec_err(a, b)).fold(0.0, f64::max);
    let rho_error = rho_distance(&c1.rho, &c2.rho);
    Ok(RoundTripReport {
        g_error,
        l_error,
        q_error,
        actions_error,
        mu_error,
        rho_error,
        conjugation_residual: out.conjugation_residual,
        toric_offdiag: out.toric_offdiag,
    })
}

#[derive(Clone, Debug)]
pub struct BasepointReport {
    pub conjugation_residual: f64,
    pub q2_residual: f64,
    pub conjugator: CMat,
}

/// Reconstruct from `data` with basepoints `z0` and `z1` and compare the two
/// matrices up to one constant conjugation.
pub fn z0_independence(data: &SpectralData, z0: C64, z1: C64, samples: &[C64], tol: f64) -> Result<BasepointReport> {
    let p0 = inverse_at(data, z0, tol)?;
    let p1 = inverse_at(data, z1, tol)?;
    let a0 = p0.assemble()?;
    let a1 = p1.assemble()?;
    // A1_j = C A0_j C^-1 for all residues; solve the stacked linear system for C
    let n = a0.n;
    let mut rows = Vec::new();
    for (x, y) in a0.residues.iter().zip(&a1.residues) {
        // C x - y C = 0 as (x^T (x) 1 - 1 (x) y) vec(C) = 0
        let mut block = CMat::zeros(n * n, n * n);
        for r in 0..n {
            for c in 0..n {
                for k in 0..n {
                    // (C x)_(r c) = sum_k C_(r k) x_(k c)
                    block[(r + n * c, r + n * k)] += x[(k, c)];
                    // (y C)_(r c) = sum_k y_(r k) C_(k c)
                    block[(r + n * c, k + n * c)] -= y[(r, k)];
                }
            }
        }
        rows.push(block);
    }
    let mut big = CMat::zeros(rows.len() * n * n, n * n);
    for (i, b) in rows.iter().enumerate() {
        big.view_mut((i * n * n, 0), (n * n, n * n)).copy_from(b);
    }
    let svd = big.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::InvalidParameter("svd failed".into()))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let v = vt.row(imin).transpose();
    let mut conj = CMat::from_fn(n, n, |r, c| v[r + n * c].conj());
    let det = conj.determinant();
    conj /= crate::linalg::nth_root(det, n);
    let cinv = inverse(&conj)?;
    let mut worst = 0.0f64;
    let mut q2 = 0.0f64;
    for &z in samples {
        let m0 = a0.evaluate(z)?;
        let m1 = a1.evaluate(z)?;
        let scale = max_abs(&m0).max(1.0);
        worst = worst.max(max_diff(&(&conj * &m0 * &cinv), &m1) / scale);
        q2 = q2.max((m0.determinant() - m1.determinant()).norm() / scale.powi(2));
    }
    Ok(BasepointReport { conjugation_residual: worst, q2_residual: q2, conjugator: conj })
}
