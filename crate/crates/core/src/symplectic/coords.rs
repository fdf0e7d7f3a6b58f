//! Spectral data as a function of the Darboux coordinates `(I, q, mu, rho)`.
//!
//! For `n = 2` the numerator of `Q_2` is `N = N_mu + C(z) prod (z - t_j)`, where
//! `N_mu` interpolates `N(t_j) = -mu_j^2 prod_(k != j) (t_j - t_k)^2` and `C` has
//! degree `g - 1`. The coefficients of `C` are fixed by the action periods through
//! Newton's method, with `dI_a / dc_b = -1/2 oint_(a_a) z^b dz / w`.

use crate::curve::SpectralCurve;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::periods::PeriodData;
use crate::poly::Poly;
use crate::ratmat::CharCoeffs;
use crate::theta::SurfaceKernels;
use crate::transform::{toric_from_rho, Coordinates, SpectralData};

const NEWTON_MAX: usize = 30;

/// A tangent vector in Darboux coordinates (`n = 2`, one `mu` and `rho` per pole).
#[derive(Clone, Debug, PartialEq)]
pub struct CoordTangent {
    pub d_actions: Vec<C64>,
    pub d_q: Vec<C64>,
    pub d_mu: Vec<C64>,
    pub d_rho: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Action(usize),
    Q(usize),
    Mu(usize),
    Rho(usize),
}

impl CoordTangent {
    pub fn zero(g: usize, m: usize) -> Self {
        let z = C64::new(0.0, 0.0);
        CoordTangent { d_actions: vec![z; g], d_q: vec![z; g], d_mu: vec![z; m], d_rho: vec![z; m] }
    }

    pub fn basis(g: usize, m: usize, dir: Direction) -> Self {
        let mut t = Self::zero(g, m);
        let one = C64::new(1.0, 0.0);
        match dir {
            Direction::Action(a) => t.d_actions[a] = one,
            Direction::Q(a) => t.d_q[a] = one,
            Direction::Mu(j) => t.d_mu[j] = one,
            Direction::Rho(j) => t.d_rho[j] = one,
        }
        t
    }

    pub fn norm(&self) -> f64 {
        [&self.d_actions, &self.d_q, &self.d_mu, &self.d_rho]
            .iter()
            .flat_map(|v| v.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Coordinates moved by `s` along the tangent.
    pub fn apply(&self, c: &Coordinates, s: f64) -> Coordinates {
        let add = |a: &[C64], d: &[C64]| a.iter().zip(d).map(|(x, y)| x + y * s).collect::<Vec<_>>();
        Coordinates {
            actions: add(&c.actions, &self.d_actions),
            q: add(&c.q, &self.d_q),
            mu: c.mu.iter().zip(&self.d_mu).map(|(m, d)| vec![m[0] + d * s]).collect(),
            rho: c.rho.iter().zip(&self.d_rho).map(|(r, d)| vec![r[0] + d * s]).collect(),
            rho_winding: c.rho_winding.clone(),
        }
    }
}

/// `(N_mu, C)` with `N = N_mu + C prod (z - t_j)`.
pub fn split_numerator(curve: &SpectralCurve) -> Result<(Poly, Poly)> {
    let n_poly = &curve.char_coeffs.numerators[2];
    let mu: Vec<C64> = (0..curve.m()).map(|j| Ok(curve.sheet_residues(j)?[0])).collect::<Result<_>>()?;
    let n_mu = interpolant(&curve.poles, &mu);
    let prod = Poly::from_roots(&curve.poles, C64::new(1.0, 0.0));
    let (quot, rem) = divide(&(n_poly - &n_mu), &prod);
    let scale = n_poly.max_abs_coeff().max(1.0);
    if rem.max_abs_coeff() > 1e-8 * scale {
        return Err(Error::InvalidParameter(format!(
            "numerator does not interpolate the residues (remainder {:.2e})",
            rem.max_abs_coeff()
        )));
    }
    Ok((n_mu, quot))
}

/// Degree `m - 1` polynomial with `N(t_j) = -mu_j^2 prod_(k != j) (t_j - t_k)^2`.
pub fn interpolant(poles: &[C64], mu: &[C64]) -> Poly {
    let mut out = Poly::zero();
    for (j, &t) in poles.iter().enumerate() {
        let others: Vec<C64> = poles.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &s)| s).collect();
        let d: C64 = others.iter().map(|s| t - s).product();
        let value = -mu[j] * mu[j] * d * d;
        out = &out + &Poly::from_roots(&others, value / d);
    }
    out
}

/// Division by a monic polynomial.
fn divide(num: &Poly, den: &Poly) -> (Poly, Poly) {
    let dn = den.coeffs.len() - 1;
    let mut rem = num.coeffs.clone();
    if rem.len() <= dn {
        return (Poly::zero(), num.clone());
    }
    let mut quot = vec![C64::new(0.0, 0.0); rem.len() - dn];
    for i in (0..quot.len()).rev() {
        let c = rem[i + dn];
        quot[i] = c;
        for k in 0..=dn {
            rem[i + k] -= c * den.coeffs[k];
        }
    }
    rem.truncate(dn);
    (Poly::new(quot), Poly::new(rem))
}

fn curve_from_parts(template: &SpectralCurve, n_mu: &Poly, c: &[C64]) -> Result<SpectralCurve> {
    let prod = Poly::from_roots(&template.poles, C64::new(1.0, 0.0));
    let num = n_mu + &(&Poly::new(c.to_vec()) * &prod);
    let cc = CharCoeffs {
        n: 2,
        poles: template.poles.clone(),
        numerators: vec![Poly::constant(C64::new(1.0, 0.0)), Poly::zero(), num],
    };
    let curve = SpectralCurve::from_char_coeffs(&cc)?;
    if curve.genus != template.genus || curve.branch_points.len() != template.branch_points.len() {
        return Err(Error::InvalidParameter("deformation changed the topology of the curve".into()));
    }
    curve.with_branch_order(&template.branch_points)?.with_anchor(template.anchor)
}

/// Curve with residues `mu` on sheet 1 and action periods `actions`, found by
/// Newton's method starting from `template`.
pub fn curve_from_coordinates(template: &SpectralCurve, mu: &[C64], actions: &[C64], tol: f64) -> Result<SpectralCurve> {
    let g = template.genus;
    let (_, c0) = split_numerator(template)?;
    let mut c: Vec<C64> = (0..g).map(|i| c0.coeffs.get(i).copied().unwrap_or_default()).collect();
    let n_mu = interpolant(&template.poles, mu);
    let scale = actions.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for _ in 0..NEWTON_MAX {
        let curve = curve_from_parts(template, &n_mu, &c)?;
        let pd = PeriodData::compute(&curve, tol)?;
        let (cur, _) = pd.action_periods(tol)?;
        let res: Vec<C64> = cur.iter().zip(actions).map(|(a, b)| a - b).collect();
        let err = res.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if err < 50.0 * tol * scale {
            check_residue_signs(&curve, mu)?;
            return Ok(curve);
        }
        let jac = CMat::from_fn(g, g, |a, b| -0.5 * pd.a_periods[(b, a)]);
        let rhs = nalgebra::DVector::from_vec(res);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::BasisDegenerate { reason: "singular action Jacobian".into() })?;
        for b in 0..g {
            c[b] -= step[b];
        }
    }
    Err(Error::QuadratureFailure { target: tol, estimate: f64::NAN })
}

fn check_residue_signs(curve: &SpectralCurve, mu: &[C64]) -> Result<()> {
    for (j, want) in mu.iter().enumerate() {
        let got = curve.sheet_residues(j)?[0];
        if (got - want).norm() > 1e-6 * want.norm().max(1.0) {
            return Err(Error::ContinuationAmbiguous { z: format!("residue at pole {j}: {got} vs {want}") });
        }
    }
    Ok(())
}

/// Spectral data and kernels at `coords`, built around `base`.
pub fn realize(base: &SpectralData, coords: &Coordinates, tol: f64) -> Result<(SpectralData, SurfaceKernels)> {
    let mu: Vec<C64> = coords.mu.iter().map(|m| m[0]).collect();
    let curve = curve_from_coordinates(&base.curve, &mu, &coords.actions, tol)?;
    let k = SurfaceKernels::from_curve(&curve, tol)?;
    let data = SpectralData {
        curve,
        q: coords.q.clone(),
        q_lift: base.q_lift.clone(),
        toric: toric_from_rho(&coords.rho),
    };
    Ok((data, k))
}
