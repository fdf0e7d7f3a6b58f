//! The potential `theta_A = tr sum_j L_j G_j^-1 dG_j` and its exterior derivative,
//! evaluated on tangents obtained by central differences through the inverse
//! transform.

use super::coords::{realize, CoordTangent};
use crate::error::{Error, Result};
use crate::linalg::{inverse, trace, CMat, C64};
use crate::ratmat::PhasePoint;
use crate::theta::SurfaceKernels;
use crate::transform::{direct, extract_coords, inverse_with, Coordinates, SpectralData};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdConfig {
    /// Step relative to the coordinate scale.
    pub h: f64,
    pub levels: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { h: 1e-5, levels: 2 }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1e-8..=1e-2).contains(&self.h) || self.levels == 0 || self.levels > 6 {
            return Err(Error::InvalidParameter(format!("fd step {} / levels {} out of range", self.h, self.levels)));
        }
        Ok(())
    }
}

/// A value from Richardson-extrapolated central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdValue {
    pub value: C64,
    /// Difference between the last two extrapolation levels.
    pub disagreement: f64,
}

/// Richardson table of central differences at `h, h/2, ...`; returns the
/// extrapolated derivative and the last-level disagreement.
pub fn richardson<F>(mut f: F, h: f64, levels: usize) -> Result<(Vec<C64>, f64)>
where
    F: FnMut(f64) -> Result<Vec<C64>>,
{
    let mut table: Vec<Vec<Vec<C64>>> = Vec::new();
    for i in 0..levels {
        let hi = h / 2f64.powi(i as i32);
        let plus = f(hi)?;
        let minus = f(-hi)?;
        let d: Vec<C64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * hi)).collect();
        let mut row = vec![d];
        for k in 1..=i {
            let fac = 4f64.powi(k as i32) - 1.0;
            let prev = &table[i - 1][k - 1];
            let cur = &row[k - 1];
            row.push(cur.iter().zip(prev).map(|(c, p)| c + (c - p) / fac).collect());
        }
        table.push(row);
    }
    let last = table.last().expect("levels >= 1");
    let best = last.last().expect("nonempty").clone();
    let dis = if last.len() > 1 {
        best.iter().zip(&last[last.len() - 2]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok((best, dis))
}

/// First-order variation of a phase point.
#[derive(Clone, Debug)]
pub struct PointTangent {
    pub dg: Vec<CMat>,
    pub dl: Vec<Vec<C64>>,
    pub disagreement: f64,
}

/// Base spectral data with its coordinates and reconstructed phase point.
#[derive(Clone, Debug)]
pub struct SymplecticContext {
    pub data: SpectralData,
    pub kernels: SurfaceKernels,
    pub coords: Coordinates,
    pub point: PhasePoint,
    pub fd: FdConfig,
    pub tol: f64,
}

fn flatten(p: &PhasePoint) -> Vec<C64> {
    let mut out = Vec::new();
    for g in &p.diagonalizers {
        out.extend(g.iter().copied());
    }
    for l in &p.eigenvalues {
        out.extend(l.iter().copied());
    }
    out
}

impl SymplecticContext {
    pub fn new(data: SpectralData, fd: FdConfig, tol: f64) -> Result<Self> {
        fd.validate()?;
        let kernels = SurfaceKernels::from_curve(&data.curve, tol)?;
        let coords = extract_coords(&data, &kernels, tol)?;
        let point = inverse_with(&kernels, &data.q, &data.toric)?;
        Ok(SymplecticContext { data, kernels, coords, point, fd, tol })
    }

    pub fn from_point(p: &PhasePoint, z0: Option<C64>, fd: FdConfig, tol: f64) -> Result<Self> {
        let out = direct(p, z0, tol)?;
        Self::new(out.data, fd, tol)
    }

    pub fn genus(&self) -> usize {
        self.data.genus()
    }

    pub fn m(&self) -> usize {
        self.data.curve.m()
    }

    /// Scale used to turn the relative step into an absolute one.
    pub fn coordinate_scale(&self) -> f64 {
        let c = &self.coords;
        c.actions.iter().chain(c.mu.iter().flatten()).map(|z| z.norm()).fold(1.0, f64::max)
    }

    pub fn point_at(&self, coords: &Coordinates) -> Result<PhasePoint> {
        let (data, k) = realize(&self.data, coords, self.tol)?;
        inverse_with(&k, &data.q, &data.toric)
    }

    /// `(dG_j, dL_j)` along `u` with absolute step `h`.
    pub fn tangent_with(&self, u: &CoordTangent, h: f64, levels: usize) -> Result<PointTangent> {
        self.tangent_by(|s| self.point_at(&u.apply(&self.coords, s)), h, levels)
    }

    /// Tangent of an arbitrary one-parameter family of phase points through the base point.
    pub fn tangent_by<F>(&self, family: F, h: f64, levels: usize) -> Result<PointTangent>
    where
        F: Fn(f64) -> Result<PhasePoint>,
    {
        let (d, disagreement) = richardson(|s| Ok(flatten(&family(s)?)), h, levels)?;
        let n = self.point.n;
        let m = self.m();
        let mut dg = Vec::with_capacity(m);
        for j in 0..m {
            let off = j * n * n;
            dg.push(CMat::from_iterator(n, n, d[off..off + n * n].iter().copied()));
        }
        let base = m * n * n;
        let dl = (0..m).map(|j| d[base + j * n..base + (j + 1) * n].to_vec()).collect();
        Ok(PointTangent { dg, dl, disagreement })
    }

    pub fn tangent(&self, u: &CoordTangent) -> Result<PointTangent> {
        let h = self.fd.h * self.coordinate_scale() / u.norm().max(1e-300);
        self.tangent_with(u, h, self.fd.levels)
    }

    /// `theta_A(u)`.
    pub fn theta(&self, u: &CoordTangent) -> Result<FdValue> {
        let t = self.tangent(u)?;
        Ok(FdValue { value: theta_on(&self.point, &t)?, disagreement: t.disagreement })
    }

    /// `omega_A(u, v)`.
    pub fn omega(&self, u: &CoordTangent, v: &CoordTangent) -> Result<FdValue> {
        let tu = self.tangent(u)?;
        let tv = self.tangent(v)?;
        Ok(FdValue { value: omega_on(&self.point, &tu, &tv)?, disagreement: tu.disagreement.max(tv.disagreement) })
    }
}

pub fn theta_on(p: &PhasePoint, t: &PointTangent) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..p.m() {
        let l = crate::linalg::diag(&p.eigenvalues[j]);
        acc += trace(&(l * inverse(&p.diagonalizers[j])? * &t.dg[j]));
    }
    Ok(acc)
}

/// `tr sum_j (dL_u Z_v - dL_v Z_u - L [Z_u, Z_v])` with `Z = G^-1 dG`.
pub fn omega_on(p: &PhasePoint, tu: &PointTangent, tv: &PointTangent) -> Result<C64> {
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..p.m() {
        let gi = inverse(&p.diagonalizers[j])?;
        let zu = &gi * &tu.dg[j];
        let zv = &gi * &tv.dg[j];
        let l = crate::linalg::diag(&p.eigenvalues[j]);
        let dlu = crate::linalg::diag(&tu.dl[j]);
        let dlv = crate::linalg::diag(&tv.dl[j]);
        acc += trace(&(dlu * &zv)) - trace(&(dlv * &zu)) - trace(&(l * (&zu * &zv - &zv * &zu)));
    }
    Ok(acc)
}

/// `sum dI ^ dq + sum drho ^ dmu` on coordinate tangents.
pub fn omega_s(u: &CoordTangent, v: &CoordTangent) -> C64 {
    let wedge = |a: &[C64], b: &[C64], c: &[C64], d: &[C64]| -> C64 {
        a.iter().zip(b).zip(c.iter().zip(d)).map(|((a, b), (c, d))| a * d - c * b).sum()
    };
    // wedge(x_u, y_u, x_v, y_v) = x_u y_v - x_v y_u
    wedge(&u.d_actions, &u.d_q, &v.d_actions, &v.d_q) + wedge(&u.d_rho, &u.d_mu, &v.d_rho, &v.d_mu)
}
