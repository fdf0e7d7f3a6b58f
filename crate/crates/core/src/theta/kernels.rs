//! Kernels on the spectral curve in the z-chart trivialization.
//!
//! The prime form is `E(x, y) = theta[d](U(x) - U(y)) / (h(x) h(y))` with `d` the
//! selected odd characteristic and `h^2 = sum_a d_a theta[d](0) v_a`. In the z-chart
//! `h^2 = R(z) / w` for a polynomial `R` of degree at most `g - 1`; the sign of `h`
//! on each sheet is fixed by continuation along the segment from the anchor,
//! starting from the principal root there.

use super::{Characteristic, ThetaContext, ThetaValue};
use crate::curve::{sqrt_ratio_product, SpectralCurve, SurfacePoint};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::periods::{AbelContext, Cycle, PeriodData};
use crate::poly::Poly;
use crate::quad::periodic_trapezoid;
use std::cell::RefCell;
use std::f64::consts::PI;

/// A surface point with its Abel image, holomorphic differentials and `h`.
#[derive(Clone, Debug)]
pub struct Marked {
    pub point: SurfacePoint,
    pub w: C64,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    pub h: C64,
}

/// Kernel value as a z-chart coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelValue {
    pub value: C64,
    pub singular: bool,
}

#[derive(Clone, Debug)]
pub struct SurfaceKernels {
    pub abel: AbelContext,
    pub theta: ThetaContext,
    pub odd: Characteristic,
    pub odd_grad: Vec<C64>,
    pub r_poly: Poly,
    r_roots: Vec<C64>,
    h_anchor: [C64; 2],
}

#[derive(Clone, Debug)]
pub struct FayReport {
    pub max_relative_residual: f64,
    pub pairs: usize,
}

fn diff(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl SurfaceKernels {
    pub fn new(abel: AbelContext, eps: f64) -> Result<SurfaceKernels> {
        let theta = ThetaContext::new(&abel.periods.tau, eps)?;
        let (odd, odd_grad) = theta.odd_characteristic()?;
        let g = abel.genus();
        let norm = &abel.periods.norm;
        let coeffs: Vec<C64> = (0..g)
            .map(|ga| (0..g).map(|al| odd_grad[al] * norm[(al, ga)]).sum())
            .collect();
        let r_poly = Poly::new(coeffs).trimmed(1e-10);
        let r_roots = r_poly.roots(1e-10);
        let curve = &abel.periods.curve;
        let z0 = curve.anchor;
        let r0 = r_poly.eval(z0);
        let h_anchor = [
            (r0 / curve.w_on_sheet(z0, 1)?).sqrt(),
            (r0 / curve.w_on_sheet(z0, 2)?).sqrt(),
        ];
        Ok(SurfaceKernels { abel, theta, odd, odd_grad, r_poly, r_roots, h_anchor })
    }

    /// Periods, Abel map and kernels of `curve` at quadrature target `tol`.
    pub fn from_curve(curve: &SpectralCurve, tol: f64) -> Result<SurfaceKernels> {
        let pd = PeriodData::compute(curve, tol)?;
        SurfaceKernels::new(AbelContext::new(pd, 0.1 * tol)?, 0.1 * tol)
    }

    pub fn curve(&self) -> &SpectralCurve {
        &self.abel.periods.curve
    }

    pub fn genus(&self) -> usize {
        self.abel.genus()
    }

    pub fn tau(&self) -> &CMat {
        &self.abel.periods.tau
    }

    /// `h` at `z` on `sheet`.
    pub fn h_at(&self, z: C64, sheet: usize) -> C64 {
        let curve = self.curve();
        let z0 = curve.anchor;
        let quarter: C64 = curve
            .branch_points
            .iter()
            .map(|e| ((z - e) / (z0 - e)).powf(-0.25))
            .product();
        self.h_anchor[sheet - 1] * sqrt_ratio_product(&self.r_roots, z, z0) * quarter
    }

    pub fn mark(&self, x: &SurfacePoint) -> Result<Marked> {
        let w = self.curve().w_on_sheet(x.z, x.sheet)?;
        let u = self.abel.abel_map(x)?;
        let v = self.abel.periods.v_at(x.z, w);
        Ok(Marked { point: *x, w, u, v, h: self.h_at(x.z, x.sheet) })
    }

    pub fn mark_at(&self, z: C64, sheet: usize) -> Result<Marked> {
        let p = self.curve().point(z, sheet)?;
        self.mark(&p)
    }

    fn same_point(x: &Marked, y: &Marked) -> bool {
        x.point.sheet == y.point.sheet && (x.point.z - y.point.z).norm() == 0.0
    }

    fn odd_theta(&self, z: &[C64], order: usize) -> Result<ThetaValue> {
        self.theta.eval(&self.odd, z, order)
    }

    pub fn prime_form(&self, x: &Marked, y: &Marked) -> Result<KernelValue> {
        if Self::same_point(x, y) {
            return Ok(KernelValue { value: C64::new(0.0, 0.0), singular: false });
        }
        let t = self.odd_theta(&diff(&x.u, &y.u), 0)?;
        Ok(KernelValue { value: t.materialize() / (x.h * y.h), singular: false })
    }

    /// `S_q(x, y) = Theta(U(x) - U(y) + q) / (Theta(q) E(x, y))`.
    pub fn szego(&self, q: &[C64], x: &Marked, y: &Marked) -> Result<KernelValue> {
        let tq = self.theta.theta_guarded(q, 0)?;
        self.szego_with(q, &tq, x, y)
    }

    fn szego_with(&self, q: &[C64], tq: &ThetaValue, x: &Marked, y: &Marked) -> Result<KernelValue> {
        if Self::same_point(x, y) {
            return Err(Error::NearDiagonal { distance: 0.0 });
        }
        let d = diff(&x.u, &y.u);
        let num = self.theta.theta(&add(&d, q), 0)?;
        let den = self.odd_theta(&d, 0)?;
        let scale = (num.log_scale - den.log_scale - tq.log_scale).exp();
        let value = scale * num.value / (den.value * tq.value) * x.h * y.h;
        Ok(KernelValue { value, singular: false })
    }

    /// `B(x, y) = -sum d_a d_b log theta[d](U(x) - U(y)) v_a(x) v_b(y)`.
    pub fn bidifferential(&self, x: &Marked, y: &Marked) -> Result<KernelValue> {
        let dz = (x.point.z - y.point.z).norm();
        if x.point.sheet == y.point.sheet && dz < 1e-7 {
            return Err(Error::NearDiagonal { distance: dz });
        }
        let t = self.odd_theta(&diff(&x.u, &y.u), 2)?;
        let lh = t.log_hess();
        let g = self.genus();
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..g {
            for b in 0..g {
                acc -= lh[(a, b)] * x.v[a] * y.v[b];
            }
        }
        Ok(KernelValue { value: acc, singular: false })
    }

    /// `w_(p,s)(t) = d_t log (E(t, p) / E(t, s))`.
    pub fn third_kind(&self, p: &Marked, s: &Marked, t: &Marked) -> Result<KernelValue> {
        for other in [p, s] {
            let d = (t.point.z - other.point.z).norm();
            if t.point.sheet == other.point.sheet && d < 1e-9 {
                return Err(Error::NearDiagonal { distance: d });
            }
        }
        let gp = self.odd_theta(&diff(&t.u, &p.u), 1)?.log_grad();
        let gs = self.odd_theta(&diff(&t.u, &s.u), 1)?.log_grad();
        let value = (0..self.genus()).map(|a| t.v[a] * (gp[a] - gs[a])).sum();
        Ok(KernelValue { value, singular: false })
    }

    /// `psi(x, x0) = S_q(x, x0) (z(x) - z(x0))`, equal to 1 at `x = x0`.
    pub fn psi(&self, q: &[C64], x: &Marked, x0: &Marked) -> Result<C64> {
        if (x.point.z - x0.point.z).norm() == 0.0 {
            return Ok(if x.point.sheet == x0.point.sheet {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            });
        }
        Ok(self.szego(q, x, x0)?.value * (x.point.z - x0.point.z))
    }

    /// Estimate of `lim (z(x') - z(x)) S_q(x', x)` as `x' -> x` on the same sheet from
    /// the symmetric offsets `z(x) +- off`, which cancel the linear term.
    pub fn szego_diagonal_limit(&self, q: &[C64], x: &Marked, off: f64) -> Result<C64> {
        let tq = self.theta.theta_guarded(q, 0)?;
        let mut acc = C64::new(0.0, 0.0);
        for d in [off, -off] {
            let xp = self.mark_at(x.point.z + d, x.point.sheet)?;
            acc += self.szego_with(q, &tq, &xp, x)?.value * d;
        }
        Ok(acc / 2.0)
    }

    /// Relative residual of `S(x,y) S(y,x) + B(x,y) + sum d_a d_b log Theta(q) v_a(x) v_b(y)`.
    pub fn fay_residual(&self, q: &[C64], x: &Marked, y: &Marked) -> Result<f64> {
        let tq = self.theta.theta_guarded(q, 2)?;
        let sxy = self.szego_with(q, &tq, x, y)?.value;
        let syx = self.szego_with(q, &tq, y, x)?.value;
        let b = self.bidifferential(x, y)?.value;
        let lh = tq.log_hess();
        let g = self.genus();
        let mut extra = C64::new(0.0, 0.0);
        for a in 0..g {
            for c in 0..g {
                extra += lh[(a, c)] * x.v[a] * y.v[c];
            }
        }
        let lhs = sxy * syx;
        let scale = lhs.norm().max(b.norm()).max(extra.norm());
        Ok((lhs + b + extra).norm() / scale)
    }

    pub fn verify_fay(&self, q: &[C64], pairs: &[(Marked, Marked)]) -> Result<FayReport> {
        let mut worst: f64 = 0.0;
        for (x, y) in pairs {
            worst = worst.max(self.fay_residual(q, x, y)?);
        }
        Ok(FayReport { max_relative_residual: worst, pairs: pairs.len() })
    }

    /// Relative residual of
    /// `sum_i S(x, z^(i)) S(z^(i), y) - S(x, y) (1/(z(x) - z) - 1/(z(y) - z))`.
    pub fn sheet_sum_residual(&self, q: &[C64], x: &Marked, y: &Marked, z: C64) -> Result<f64> {
        let tq = self.theta.theta_guarded(q, 0)?;
        let mut lhs = C64::new(0.0, 0.0);
        let mut scale: f64 = 0.0;
        for sheet in 1..=2 {
            let t = self.mark_at(z, sheet)?;
            let term = self.szego_with(q, &tq, x, &t)?.value * self.szego_with(q, &tq, &t, y)?.value;
            scale = scale.max(term.norm());
            lhs += term;
        }
        let sxy = self.szego_with(q, &tq, x, y)?.value;
        let one = C64::new(1.0, 0.0);
        let rhs = sxy * (one / (x.point.z - z) - one / (y.point.z - z));
        Ok((lhs - rhs).norm() / scale.max(rhs.norm()))
    }

    /// `oint_cycle f(t) dz(t)` where `f` receives the marked point `t`.
    pub fn cycle_integral<F>(&self, cycle: &Cycle, f: F, dim: usize, tol: f64) -> Result<Vec<C64>>
    where
        F: Fn(&Marked) -> Result<Vec<C64>>,
    {
        let err = RefCell::new(None);
        let curve = self.curve();
        let integrand = |z: C64, w: C64| -> Vec<C64> {
            let run = || -> Result<Vec<C64>> {
                let sheet = crate::periods::HomologyBasis::sheet_of(curve, z, w)?;
                let t = self.mark_at(z, sheet)?;
                f(&t)
            };
            match run() {
                Ok(v) => v,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    vec![C64::new(0.0, 0.0); dim]
                }
            }
        };
        let (v, _) = self.abel.periods.basis.integrate(cycle, &integrand, dim, tol)?;
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// Residue at `p` of the meromorphic differential `f(t) dz(t)` from a circle of radius `r`.
    pub fn circle_residue<F>(&self, p: &SurfacePoint, r: f64, nodes: usize, f: F) -> Result<C64>
    where
        F: Fn(&Marked) -> Result<C64>,
    {
        let curve = self.curve();
        let wp = curve.w_on_sheet(p.z, p.sheet)?;
        let err = RefCell::new(None);
        let v = periodic_trapezoid(
            |th| {
                let e = C64::from_polar(1.0, th);
                let z = p.z + e * r;
                let w = wp * sqrt_ratio_product(&curve.branch_points, z, p.z);
                let run = || -> Result<C64> {
                    let sheet = crate::periods::HomologyBasis::sheet_of(curve, z, w)?;
                    f(&self.mark_at(z, sheet)?)
                };
                match run() {
                    Ok(val) => vec![val * C64::new(0.0, 1.0) * e * r],
                    Err(er) => {
                        err.borrow_mut().get_or_insert(er);
                        vec![C64::new(0.0, 0.0)]
                    }
                }
            },
            nodes,
            1,
        );
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(v[0] / C64::new(0.0, 2.0 * PI)),
        }
    }

    /// `d S_q(x, y) / d q_gamma` by central differences with one Richardson step.
    pub fn szego_dq_fd(&self, q: &[C64], gamma: usize, x: &Marked, y: &Marked, h: f64, dir: C64) -> Result<C64> {
        let d = |step: f64| -> Result<C64> {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[gamma] += dir * step;
            qm[gamma] -= dir * step;
            Ok((self.szego(&qp, x, y)?.value - self.szego(&qm, x, y)?.value) / (dir * (2.0 * step)))
        };
        let d1 = d(h)?;
        let d2 = d(h / 2.0)?;
        Ok((4.0 * d2 - d1) / 3.0)
    }

    /// `oint_(a_gamma) S_q(x, t) S_q(t, y) dt`.
    pub fn szego_product_a_period(&self, q: &[C64], gamma: usize, x: &Marked, y: &Marked, tol: f64) -> Result<C64> {
        let tq = self.theta.theta_guarded(q, 0)?;
        let cycle = self.abel.periods.basis.a[gamma].clone();
        let v = self.cycle_integral(
            &cycle,
            |t| Ok(vec![self.szego_with(q, &tq, x, t)?.value * self.szego_with(q, &tq, t, y)?.value]),
            1,
            tol,
        )?;
        Ok(v[0])
    }

    /// Relative mismatch between the q-derivative of `S_q(x, y)` and
    /// `-oint_(a_gamma) S_q(x, t) S_q(t, y)`; both real and imaginary steps are checked.
    pub fn dq_szego_check(&self, q: &[C64], gamma: usize, x: &Marked, y: &Marked, h: f64) -> Result<f64> {
        if gamma >= self.genus() {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} out of range")));
        }
        let contour = -self.szego_product_a_period(q, gamma, x, y, 1e-11)?;
        let mut worst: f64 = 0.0;
        for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
            let fd = self.szego_dq_fd(q, gamma, x, y, h, dir)?;
            worst = worst.max((fd - contour).norm() / contour.norm().max(fd.norm()));
        }
        Ok(worst)
    }

    /// Intersection number of `a_gamma` with the path from `y` to `x` that the
    /// Abel-map lifts follow. The contour identity above holds as written when it
    /// vanishes; otherwise the derivative picks up `-2 pi i n S_q(x, y)`.
    pub fn a_crossing(&self, gamma: usize, x: &Marked, y: &Marked) -> Result<i64> {
        let basis = &self.abel.periods.basis;
        let mut n = 0;
        for &(l, coef) in &basis.a[gamma] {
            let lp = &basis.loops[l];
            n += coef as i64 * (self.abel.lift_crossings(&x.point, lp)? - self.abel.lift_crossings(&y.point, lp)?);
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::ratmat::random_phase_point;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn kernels(m: usize, seed: u64) -> SurfaceKernels {
        let p = random_phase_point(2, m, seed).unwrap();
        let curve = SpectralCurve::build(&p.assemble().unwrap()).unwrap();
        let pd = PeriodData::compute(&curve, 1e-12).unwrap();
        SurfaceKernels::new(AbelContext::new(pd, 1e-13).unwrap(), 1e-13).unwrap()
    }

    fn random_marked(k: &SurfaceKernels, rng: &mut ChaCha8Rng) -> Marked {
        loop {
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if k.curve().branch_distance(z) > 0.2 {
                return k.mark_at(z, rng.gen_range(1..=2)).unwrap();
            }
        }
    }

    #[test]
    fn prime_form_antisymmetric_and_normalized() {
        for m in [4, 5] {
            let k = kernels(m, 21);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let x = random_marked(&k, &mut rng);
            let y = random_marked(&k, &mut rng);
            let a = k.prime_form(&x, &y).unwrap().value;
            let b = k.prime_form(&y, &x).unwrap().value;
            assert!((a + b).norm() < 1e-10 * a.norm(), "m={m}: {a} {b}");
            let off = 1e-4;
            let x2 = k.mark_at(x.point.z + off, x.point.sheet).unwrap();
            let e = k.prime_form(&x2, &x).unwrap().value / off;
            assert!((e - 1.0).norm() < 1e-6, "m={m}: {e}");
            let s = k.szego_diagonal_limit(&vec![c(0.31, 0.17); m - 3], &x, off).unwrap();
            assert!((s - 1.0).norm() < 1e-6, "m={m}: {s}");
        }
    }

    #[test]
    fn fay_identity() {
        for (m, q) in [(4, vec![c(0.31, 0.17)]), (5, vec![c(0.31, 0.17), c(-0.12, 0.08)])] {
            let k = kernels(m, 22);
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let pairs: Vec<_> = (0..5).map(|_| (random_marked(&k, &mut rng), random_marked(&k, &mut rng))).collect();
            let r = k.verify_fay(&q, &pairs).unwrap();
            assert!(r.max_relative_residual < 1e-8, "m={m}: {}", r.max_relative_residual);
        }
    }

    #[test]
    fn sheet_sum() {
        let k = kernels(5, 23);
        let q = vec![c(0.21, -0.1), c(0.05, 0.3)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            let x = random_marked(&k, &mut rng);
            let y = random_marked(&k, &mut rng);
            let z = random_marked(&k, &mut rng).point.z;
            let r = k.sheet_sum_residual(&q, &x, &y, z).unwrap();
            assert!(r < 1e-8, "{r}");
        }
    }

    #[test]
    fn bidifferential_and_third_kind_normalization() {
        let k = kernels(4, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_marked(&k, &mut rng);
        let y = random_marked(&k, &mut rng);
        let bxy = k.bidifferential(&x, &y).unwrap().value;
        let byx = k.bidifferential(&y, &x).unwrap().value;
        assert!((bxy - byx).norm() < 1e-9 * bxy.norm());
        let a0 = k.abel.periods.basis.a[0].clone();
        let ab = k.cycle_integral(&a0, |t| Ok(vec![k.bidifferential(t, &y)?.value]), 1, 1e-11).unwrap();
        println!("a-period of B: {}", ab[0]);
        let aw = k.cycle_integral(&a0, |t| Ok(vec![k.third_kind(&x, &y, t)?.value]), 1, 1e-11).unwrap();
        println!("a-period of w: {}", aw[0]);
        let rp = k.circle_residue(&x.point, 0.05, 128, |t| Ok(k.third_kind(&x, &y, t)?.value)).unwrap();
        let rs = k.circle_residue(&y.point, 0.05, 128, |t| Ok(k.third_kind(&x, &y, t)?.value)).unwrap();
        println!("residues {rp} {rs}");
        assert!((rp - 1.0).norm() < 1e-8 && (rs + 1.0).norm() < 1e-8);
    }

    #[test]
    fn dq_variation_up_to_lift_crossings() {
        let mut seen = [false; 2];
        for (m, seed) in [(4, 25), (5, 2), (6, 3)] {
            let k = kernels(m, seed);
            let q = vec![c(0.31, 0.17); m - 3];
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..10 {
                let x = random_marked(&k, &mut rng);
                let y = random_marked(&k, &mut rng);
                let gamma = m - 4;
                let n = k.a_crossing(gamma, &x, &y).unwrap();
                let fd = k.szego_dq_fd(&q, gamma, &x, &y, 1e-5, c(1.0, 0.0)).unwrap();
                let ct = k.szego_product_a_period(&q, gamma, &x, &y, 1e-11).unwrap();
                let s = k.szego(&q, &x, &y).unwrap().value;
                let jump = c(0.0, 2.0 * std::f64::consts::PI) * n as f64 * s;
                assert!((fd + ct + jump).norm() < 1e-6 * fd.norm().max(ct.norm()), "m={m} n={n}");
                if n == 0 {
                    assert!(k.dq_szego_check(&q, gamma, &x, &y, 1e-5).unwrap() < 1e-6);
                }
                seen[(n != 0) as usize] = true;
            }
        }
        assert!(seen[0] && seen[1]);
    }
}
