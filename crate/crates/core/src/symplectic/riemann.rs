//! Vector of Riemann constants for the Abel map with basepoint `x0 = z0^(1)`.
//!
//! Convention: `theta(U_x(D) + K^x) = 0` for every effective divisor `D` of
//! degree `g - 1`. At the Weierstrass point `e*` the constant is a half period
//! `kappa`, found by testing the `2^(2g)` candidates against random divisors, and
//! `K^x = kappa + (g - 1)(U(x) - U(e*))`.

use crate::curve::SurfacePoint;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::linalg::{CMat, C64};
use crate::periods::lattice_distance;
use crate::theta::SurfaceKernels;

#[derive(Clone, Debug)]
pub struct RiemannConstants {
    /// Half period `K^(e*)`.
    pub kappa: Vec<C64>,
    /// Bits `(a, b)` with `kappa = (a + tau b) / 2`.
    pub bits: (Vec<u8>, Vec<u8>),
    /// Largest relative `|theta|` over the test divisors for the chosen candidate.
    pub vanishing: f64,
    /// Same quantity for the runner-up.
    pub runner_up: f64,
}

fn half_period(tau: &CMat, a: &[u8], b: &[u8]) -> Vec<C64> {
    let g = a.len();
    (0..g)
        .map(|i| {
            let tb: C64 = (0..g).map(|j| tau[(i, j)] * b[j] as f64).sum();
            0.5 * (C64::new(a[i] as f64, 0.0) + tb)
        })
        .collect()
}

/// Points on sheet 1 away from branch points and poles, used as test divisors.
fn probe_points(k: &SurfaceKernels, count: usize) -> Result<Vec<SurfacePoint>> {
    let curve = k.curve();
    let z0 = curve.anchor;
    let mut out = Vec::new();
    let mut i = 0;
    while out.len() < count && i < 200 {
        let ang = 2.399963 * i as f64;
        let r = 0.3 + 0.17 * (i % 5) as f64;
        let z = z0 + C64::from_polar(r, ang);
        i += 1;
        let near_pole = curve.poles.iter().any(|t| (t - z).norm() < 0.1);
        if curve.branch_distance(z) > 0.1 && !near_pole {
            out.push(curve.point(z, 1 + (i % 2))?);
        }
    }
    Ok(out)
}

pub fn riemann_constants(k: &SurfaceKernels) -> Result<RiemannConstants> {
    let g = k.genus();
    let tau = k.tau();
    let ue = &k.abel.u_e_star;
    let probes = probe_points(k, 3 * g.max(1))?;
    let mut divisors: Vec<Vec<C64>> = Vec::new();
    for t in 0..3 {
        let mut d = vec![C64::new(0.0, 0.0); g];
        for p in probes.iter().skip(t * g.max(1)).take(g.saturating_sub(1)) {
            let u = k.abel.abel_map(p)?;
            for a in 0..g {
                d[a] += u[a] - ue[a];
            }
        }
        divisors.push(d);
    }
    let mut scored: Vec<(f64, Vec<u8>, Vec<u8>)> = Vec::new();
    for code in 0..(1u32 << (2 * g)) {
        let a: Vec<u8> = (0..g).map(|i| ((code >> i) & 1) as u8).collect();
        let b: Vec<u8> = (0..g).map(|i| ((code >> (g + i)) & 1) as u8).collect();
        let kap = half_period(tau, &a, &b);
        let mut worst = 0.0f64;
        for d in &divisors {
            let z: Vec<C64> = d.iter().zip(&kap).map(|(x, y)| x + y).collect();
            worst = worst.max(k.theta.theta(&z, 0)?.relative_size());
        }
        scored.push((worst, a, b));
    }
    scored.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (vanishing, a, b) = scored[0].clone();
    let runner_up = scored.get(1).map_or(f64::INFINITY, |s| s.0);
    if vanishing > 1e-6 {
        return Err(Error::BasisDegenerate {
            reason: format!("no half period annihilates the theta divisor (best {vanishing:.2e})"),
        });
    }
    Ok(RiemannConstants { kappa: half_period(tau, &a, &b), bits: (a, b), vanishing, runner_up })
}

impl RiemannConstants {
    /// `K^x` for the Abel map with the basepoint of `k`.
    pub fn at(&self, k: &SurfaceKernels, x: &SurfacePoint) -> Result<Vec<C64>> {
        let g = k.genus();
        let u = k.abel.abel_map(x)?;
        Ok((0..g)
            .map(|a| self.kappa[a] + (g as f64 - 1.0) * (u[a] - k.abel.u_e_star[a]))
            .collect())
    }
}

/// `K^x_a = (1 + tau_aa)/2 - sum_(b != a) oint_(a_b) v_b(t) U_a(t)` with `U` based
/// at `x` and continued along each loop from the Abel map at its start.
///
/// The formula assumes `U` is lifted inside the canonical polygon. Our Abel map
/// uses a different fundamental domain, so the start value of each loop may be
/// off by `tau m_b`; the check minimizes over `m_b` in `{-1, 0, 1}^g` and returns
/// the lattice distance to `expected` together with the best value.
pub fn riemann_constants_quadrature(
    k: &SurfaceKernels,
    x: &SurfacePoint,
    expected: &[C64],
    panels: usize,
) -> Result<(f64, Vec<C64>)> {
    let g = k.genus();
    let tau = k.tau();
    let basis = &k.abel.periods.basis;
    let pd = &k.abel.periods;
    let ux = k.abel.abel_map(x)?;
    let (xs, ws) = gauss_legendre(16);
    let nodes: Vec<f64> = xs.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let weights: Vec<f64> = ws.iter().map(|t| 0.5 * t).collect();
    let mut base: Vec<C64> = (0..g).map(|a| 0.5 * (1.0 + tau[(a, a)])).collect();
    for (bi, cycle) in basis.a.iter().enumerate() {
        for &(li, mult) in cycle {
            let lp = &basis.loops[li];
            let sgn = lp.orientation * mult as f64;
            let start = lp.pieces[0].point(0.0).0;
            let sheet = crate::periods::HomologyBasis::sheet_of(k.curve(), start, lp.branch.w(start))?;
            let p0 = k.curve().point(start, sheet)?;
            let mut u: Vec<C64> = k.abel.abel_map(&p0)?.iter().zip(&ux).map(|(a, b)| a - b).collect();
            let mut acc = vec![C64::new(0.0, 0.0); g];
            for piece in &lp.pieces {
                let ds = 1.0 / panels as f64;
                for p in 0..panels {
                    let s0 = p as f64 * ds;
                    for (xi, wi) in nodes.iter().zip(&weights) {
                        let (z, dz) = piece.point(s0 + ds * xi);
                        let v = pd.v_at(z, lp.branch.w(z));
                        // U at the node: panel start value plus the partial integral
                        let mut un = u.clone();
                        for (yj, wj) in nodes.iter().zip(&weights) {
                            let (zt, dzt) = piece.point(s0 + ds * xi * yj);
                            let vt = pd.v_at(zt, lp.branch.w(zt));
                            for a in 0..g {
                                un[a] += vt[a] * dzt * (ds * xi * wj);
                            }
                        }
                        for a in 0..g {
                            acc[a] += v[bi] * un[a] * dz * (ds * wi);
                        }
                    }
                    for (xi, wi) in nodes.iter().zip(&weights) {
                        let (z, dz) = piece.point(s0 + ds * xi);
                        let v = pd.v_at(z, lp.branch.w(z));
                        for a in 0..g {
                            u[a] += v[a] * dz * (ds * wi);
                        }
                    }
                }
            }
            for a in 0..g {
                if a != bi {
                    base[a] -= sgn * acc[a];
                }
            }
        }
    }
    // lift search: K_a -= sum_(b != a) (tau m_b)_a
    let total = 3usize.pow((g * g) as u32);
    let mut best = (f64::INFINITY, base.clone());
    for code in 0..total {
        let mut c = code;
        let mut cand = base.clone();
        for b in 0..g {
            let mb: Vec<f64> = (0..g)
                .map(|_| {
                    let d = (c % 3) as f64 - 1.0;
                    c /= 3;
                    d
                })
                .collect();
            for a in 0..g {
                if a != b {
                    cand[a] -= (0..g).map(|j| tau[(a, j)] * mb[j]).sum::<C64>();
                }
            }
        }
        let d = constants_distance(tau, &cand, expected);
        if d < best.0 {
            best = (d, cand);
        }
    }
    Ok(best)
}

/// Distance between two candidates for `K^x` modulo the period lattice.
pub fn constants_distance(tau: &CMat, k1: &[C64], k2: &[C64]) -> f64 {
    let d: Vec<C64> = k1.iter().zip(k2).map(|(a, b)| a - b).collect();
    lattice_distance(tau, &d)
}
