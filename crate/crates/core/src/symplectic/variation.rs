//! Variations of the Szegő kernel and of the Riemann constants under changes
//! of the curve moduli `I` and `mu`, at fixed projections `z(x), z(y)`.
//!
//! Branch-point residues use the local parameter `zeta` with `z = e + zeta^2`.
//! In the z-chart the residue density is `v W_z / y_z dz`, where
//! `W_z = a_z b - a b_z` for `a = S(x, t)` and `b = S(t, y)`.

use super::coords::{CoordTangent, Direction};
use super::forms::{richardson, SymplecticContext};
use super::riemann::riemann_constants;
use crate::curve::sqrt_ratio_product;
use crate::error::Result;
use crate::linalg::{CMat, C64};
use crate::periods::HomologyBasis;
use crate::quad::periodic_trapezoid;
use crate::theta::{Marked, SurfaceKernels};
use std::f64::consts::PI;

/// `d/dz log h` at `z`.
fn dlog_h(k: &SurfaceKernels, z: C64) -> C64 {
    let roots = k.r_poly.roots(1e-10);
    let a: C64 = roots.iter().map(|r| 0.5 / (z - r)).sum();
    let b: C64 = k.curve().branch_points.iter().map(|e| 0.25 / (z - e)).sum();
    a - b
}

/// `d/dz log y` on the sheet of `t`.
fn dlog_y(k: &SurfaceKernels, z: C64) -> C64 {
    let c = k.curve();
    let a: C64 = c.branch_points.iter().map(|e| 0.5 / (z - e)).sum();
    let b: C64 = c.poles.iter().map(|t| 1.0 / (z - t)).sum();
    a - b
}

/// `S(x, t) S(t, y)` and the Wronskian `W_z` in `t`.
fn wronskian(k: &SurfaceKernels, q: &[C64], x: &Marked, t: &Marked, y: &Marked) -> Result<(C64, C64)> {
    let g = k.genus();
    let a = k.szego(q, x, t)?.value;
    let b = k.szego(q, t, y)?.value;
    let dx: Vec<C64> = (0..g).map(|i| x.u[i] - t.u[i]).collect();
    let dy: Vec<C64> = (0..g).map(|i| t.u[i] - y.u[i]).collect();
    let shifted = |d: &[C64]| -> Vec<C64> { d.iter().zip(q).map(|(a, b)| a + b).collect() };
    let ga = k.theta.theta(&shifted(&dx), 1)?.log_grad();
    let oa = k.theta.eval(&k.odd, &dx, 1)?.log_grad();
    let gb = k.theta.theta(&shifted(&dy), 1)?.log_grad();
    let ob = k.theta.eval(&k.odd, &dy, 1)?.log_grad();
    let hh = dlog_h(k, t.point.z);
    let mut la = hh;
    let mut lb = hh;
    for i in 0..g {
        la -= t.v[i] * (ga[i] - oa[i]);
        lb += t.v[i] * (gb[i] - ob[i]);
    }
    let ab = a * b;
    Ok((ab, ab * (la - lb)))
}

/// `res_(zeta = 0)` of `f(t) W_z / y_z dz` at branch point `e`, with `f` the
/// z-chart coefficient of a differential supplied per point.
fn branch_residue<F>(k: &SurfaceKernels, q: &[C64], x: &Marked, y: &Marked, e: C64, radius: f64, nodes: usize, f: &F) -> Result<Vec<C64>>
where
    F: Fn(&Marked) -> Result<Vec<C64>>,
{
    let curve = k.curve();
    let lead = curve.p.as_ref().expect("hyperelliptic").leading();
    let others: Vec<C64> = curve.branch_points.iter().filter(|b| (*b - e).norm() > 1e-14).copied().collect();
    let f_e: C64 = lead.sqrt() * others.iter().map(|b| (e - b).sqrt()).product::<C64>();
    let r = radius.sqrt();
    let mut failure = None;
    let dim = f(&k.mark_at(curve.anchor, 1)?)?.len();
    let out = periodic_trapezoid(
        |phi| {
            let zeta = C64::from_polar(r, phi);
            let z = e + zeta * zeta;
            let w = zeta * f_e * sqrt_ratio_product(&others, z, e);
            let eval = || -> Result<Vec<C64>> {
                let sheet = HomologyBasis::sheet_of(curve, z, w)?;
                let t = k.mark_at(z, sheet)?;
                let (_, wz) = wronskian(k, q, x, &t, y)?;
                let yt = t.w / curve.pole_product(z);
                let yz = yt * dlog_y(k, z);
                let dens = f(&t)?;
                // res = (1 / 2 pi i) oint (...) 2 zeta dzeta, dzeta = i zeta dphi, over 2 pi
                Ok(dens.into_iter().map(|d| d * wz / yz * 2.0 * zeta * zeta * 2.0 * PI / (2.0 * PI)).collect())
            };
            match eval() {
                Ok(v) => v,
                Err(err) => {
                    failure = Some(err);
                    vec![C64::new(0.0, 0.0); dim]
                }
            }
        },
        nodes,
        dim,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(out.into_iter().map(|v| v / (2.0 * PI)).collect()),
    }
}

/// `-(pi i / 2) sum_e res_e f W / (dz dy)` for every component of `f`.
pub fn branch_residue_sum<F>(k: &SurfaceKernels, q: &[C64], x: &Marked, y: &Marked, radius_frac: f64, f: &F) -> Result<(Vec<C64>, f64)>
where
    F: Fn(&Marked) -> Result<Vec<C64>>,
{
    let bp = k.curve().branch_points.clone();
    let sep = crate::linalg::min_pairwise_gap(&bp);
    let mut totals = Vec::new();
    for frac in [radius_frac, 0.5 * radius_frac] {
        let mut acc: Vec<C64> = Vec::new();
        for &e in &bp {
            let r = branch_residue(k, q, x, y, e, frac * sep, 96, f)?;
            if acc.is_empty() {
                acc = vec![C64::new(0.0, 0.0); r.len()];
            }
            for (a, v) in acc.iter_mut().zip(r) {
                *a += v;
            }
        }
        totals.push(acc.into_iter().map(|v| v * C64::new(0.0, -PI / 2.0)).collect::<Vec<_>>());
    }
    let conv = totals[0].iter().zip(&totals[1]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok((totals.swap_remove(0), conv))
}

/// Third-kind differential with residues `+1, -1` at `t_j` on sheets 1 and 2,
/// normalized to vanish over the loops that define the action periods.
#[derive(Clone, Debug)]
pub struct LoopThirdKind {
    pub pole: C64,
    scale: C64,
    /// Periods of the unnormalized differential over the a-loops.
    pub a_loop_periods: Vec<C64>,
}

impl LoopThirdKind {
    pub fn new(k: &SurfaceKernels, j: usize, tol: f64) -> Result<Self> {
        let curve = k.curve();
        let pole = curve.poles[j];
        let scale = curve.w_on_sheet(pole, 1)?;
        let basis = &k.abel.periods.basis;
        let f = |z: C64, w: C64| vec![scale / ((z - pole) * w)];
        let a_loop_periods = basis.a.iter().map(|a| Ok(basis.integrate(a, &f, 1, tol)?.0[0])).collect::<Result<_>>()?;
        Ok(LoopThirdKind { pole, scale, a_loop_periods })
    }

    pub fn eval(&self, t: &Marked) -> C64 {
        let raw = self.scale / ((t.point.z - self.pole) * t.w);
        raw - self.a_loop_periods.iter().zip(&t.v).map(|(p, v)| p * v).sum::<C64>()
    }
}

#[derive(Clone, Debug)]
pub struct VariationEntry {
    pub label: String,
    pub lhs: C64,
    pub rhs: C64,
    pub mismatch: f64,
    pub fd_disagreement: f64,
    pub radius_convergence: f64,
}

#[derive(Clone, Debug)]
pub struct SzegoVariationReport {
    pub entries: Vec<VariationEntry>,
    /// Least-squares `c` in `lhs = c rhs` over all entries.
    pub best_ratio: C64,
    pub max_mismatch: f64,
}

impl SymplecticContext {
    /// `S_q(x, y)` on the curve at the coordinates moved by `s` along `u`, with
    /// `z(x), z(y)` fixed and the sheets kept.
    fn szego_along(&self, u: &CoordTangent, s: f64, x: (C64, usize), y: (C64, usize)) -> Result<C64> {
        let coords = u.apply(&self.coords, s);
        let (data, k) = super::coords::realize(&self.data, &coords, self.tol)?;
        let mx = k.mark_at(x.0, x.1)?;
        let my = k.mark_at(y.0, y.1)?;
        Ok(k.szego(&data.q, &mx, &my)?.value)
    }

    /// Finite differences of `S_q(x, y)` along `I_alpha` and `2 pi i mu_j`
    /// against the branch-point residue formulas.
    pub fn szego_variation(&self, x: (C64, usize), y: (C64, usize), poles: &[usize]) -> Result<SzegoVariationReport> {
        let k = &self.kernels;
        let q = &self.data.q;
        let (g, m) = (self.genus(), self.m());
        let mx = k.mark_at(x.0, x.1)?;
        let my = k.mark_at(y.0, y.1)?;
        let h = self.fd.h * self.coordinate_scale();
        let mut entries = Vec::new();
        let (rhs_i, conv_i) = branch_residue_sum(k, q, &mx, &my, 0.05, &|t: &Marked| Ok(t.v.clone()))?;
        for a in 0..g {
            let u = CoordTangent::basis(g, m, Direction::Action(a));
            let (d, dis) = richardson(|s| Ok(vec![self.szego_along(&u, s, x, y)?]), h, self.fd.levels)?;
            entries.push(entry(format!("I{}", a + 1), d[0], rhs_i[a], dis, conv_i));
        }
        for &j in poles {
            let w3 = LoopThirdKind::new(k, j, self.tol)?;
            let (rhs, conv) = branch_residue_sum(k, q, &mx, &my, 0.05, &|tt: &Marked| Ok(vec![w3.eval(tt)]))?;
            let u = CoordTangent::basis(g, m, Direction::Mu(j));
            let (d, dis) = richardson(|s| Ok(vec![self.szego_along(&u, s, x, y)?]), h, self.fd.levels)?;
            let lhs = d[0] / C64::new(0.0, 2.0 * PI);
            entries.push(entry(format!("mu{}", j + 1), lhs, rhs[0], dis / (2.0 * PI), conv));
        }
        let num: C64 = entries.iter().map(|e| e.rhs.conj() * e.lhs).sum();
        let den: f64 = entries.iter().map(|e| e.rhs.norm_sqr()).sum();
        let best_ratio = num / den.max(1e-300);
        let max_mismatch = entries.iter().map(|e| e.mismatch).fold(0.0, f64::max);
        Ok(SzegoVariationReport { entries, best_ratio, max_mismatch })
    }

    /// `M_ab = dK^x_a / dI_b` at fixed `mu` and fixed `z(x)`.
    pub fn riemann_gradient(&self, x: (C64, usize)) -> Result<CMat> {
        let (g, m) = (self.genus(), self.m());
        let h = self.fd.h * self.coordinate_scale();
        let mut out = CMat::zeros(g, g);
        for b in 0..g {
            let u = CoordTangent::basis(g, m, Direction::Action(b));
            let (d, _) = richardson(
                |s| {
                    let coords = u.apply(&self.coords, s);
                    let (_, k) = super::coords::realize(&self.data, &coords, self.tol)?;
                    let rc = riemann_constants(&k)?;
                    let p = k.curve().point(x.0, x.1)?;
                    rc.at(&k, &p)
                },
                h,
                self.fd.levels,
            )?;
            for a in 0..g {
                out[(a, b)] = d[a];
            }
        }
        Ok(out)
    }
}

fn entry(label: String, lhs: C64, rhs: C64, fd: f64, conv: f64) -> VariationEntry {
    let mismatch = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-300);
    VariationEntry { label, lhs, rhs, mismatch, fd_disagreement: fd, radius_convergence: conv }
}
