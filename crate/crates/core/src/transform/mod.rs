//! Direct and inverse spectral transforms for `n = 2`.
//!
//! The inverse builds the eigenvector matrix `Psi(z, z0)` from the Szegő kernel,
//! `Psi_ab = psi(z^(b), z0^(a))`, and sets `G_j = Psi(t_j, z0) R_j` after
//! normalizing `Psi(t_j, z0)` to unit determinant. The direct transform reads the
//! divisor `D` of the normalized eigenvector off the zeros of the off-diagonal
//! entry `A_12`, sets `q = -U(D) - K^x`, and recovers `R_j` against the same
//! reference matrices.

mod checks;
pub use checks::*;

use crate::curve::{SpectralCurve, SurfacePoint};
use crate::error::{Error, Result};
use crate::json::{cpx_vec, field, parse_cpx_vec};
use crate::linalg::{self, diag, identity, max_abs, max_offdiag, nth_root, CMat, C64};
use crate::periods::reduce_mod_lattice;
use crate::poly::Poly;
use crate::ratmat::PhasePoint;
use crate::symplectic::{riemann_constants, RiemannConstants};
use crate::theta::{Marked, SurfaceKernels};
use serde_json::{json, Value};

pub const DEFAULT_TOL: f64 = 1e-8;

/// A point of the space of spectral data with the basepoint fixed by the curve anchor.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub curve: SpectralCurve,
    /// `q` reduced to `a + tau b` with `a, b` in `[-1/2, 1/2)^g`.
    pub q: Vec<C64>,
    /// `(m_a, n_a)` with unreduced `q_a = reduced_a + n_a + (tau m)_a`.
    pub q_lift: Vec<(i64, i64)>,
    /// Diagonal entries of `R_j`.
    pub toric: Vec<Vec<C64>>,
}

#[derive(Clone, Debug)]
pub struct EigenvectorDivisor {
    pub points: Vec<SurfacePoint>,
    pub trivial: Vec<SurfacePoint>,
    pub basepoint: C64,
}

/// Everything the direct transform computes on the way to the spectral data.
#[derive(Clone, Debug)]
pub struct DirectOutput {
    pub data: SpectralData,
    pub divisor: EigenvectorDivisor,
    pub riemann: RiemannConstants,
    pub k_x: Vec<C64>,
    /// Diagonal gauge `D` with `D A D^-1` equal to the reconstructed matrix.
    pub gauge: CMat,
    /// `max_j |D A_j D^-1 - A~_j|` relative to the residue scale.
    pub conjugation_residual: f64,
    /// Largest off-diagonal entry of any `R_j`.
    pub toric_offdiag: f64,
    /// The gauge-fixed input, columns of `G_j` in sheet order, unit determinant.
    pub fixed: PhasePoint,
}

fn require_n2(n: usize) -> Result<()> {
    if n != 2 {
        return Err(Error::InvalidParameter(format!("the spectral transform is implemented for n = 2, got n = {n}")));
    }
    Ok(())
}

/// `Psi(z, z0)` with entries `psi(z^(b), z0^(a))`.
pub fn psihat(k: &SurfaceKernels, q: &[C64], z: C64, z0: C64) -> Result<CMat> {
    let n = k.curve().n;
    let zs: Vec<Marked> = (1..=n).map(|b| k.mark_at(z, b)).collect::<Result<_>>()?;
    let z0s: Vec<Marked> = (1..=n).map(|a| k.mark_at(z0, a)).collect::<Result<_>>()?;
    psihat_marked(k, q, &zs, &z0s)
}

pub fn psihat_marked(k: &SurfaceKernels, q: &[C64], zs: &[Marked], z0s: &[Marked]) -> Result<CMat> {
    let n = zs.len();
    let mut m = CMat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] = k.psi(q, &zs[b], &z0s[a])?;
        }
    }
    Ok(m)
}

/// `Psi(z, z0)^-1 = Psi(z0, z)`.
pub fn psihat_inverse(k: &SurfaceKernels, q: &[C64], z: C64, z0: C64) -> Result<CMat> {
    psihat(k, q, z0, z)
}

/// `Y(z)`: eigenvalues on the labeled sheets.
pub fn sheet_eigenvalues(curve: &SpectralCurve, z: C64) -> Result<Vec<C64>> {
    let pp = curve.pole_product(z);
    (1..=curve.n).map(|s| Ok(curve.w_on_sheet(z, s)? / pp)).collect()
}

/// Unit-determinant reference matrices `Psi(t_j, z0) / det^(1/n)`.
pub fn reference_matrices(k: &SurfaceKernels, q: &[C64]) -> Result<Vec<CMat>> {
    let curve = k.curve();
    let z0 = curve.anchor;
    k.theta.theta_guarded(q, 0)?;
    curve
        .poles
        .iter()
        .map(|&t| {
            let g0 = psihat(k, q, t, z0)?;
            let det = g0.determinant();
            Ok(g0 / nth_root(det, curve.n))
        })
        .collect()
}

/// Inverse transform with precomputed kernels of `data.curve`.
pub fn inverse_with(k: &SurfaceKernels, q: &[C64], toric: &[Vec<C64>]) -> Result<PhasePoint> {
    let curve = k.curve();
    require_n2(curve.n)?;
    let refs = reference_matrices(k, q)?;
    let eigenvalues: Vec<Vec<C64>> = (0..curve.m()).map(|j| curve.sheet_residues(j)).collect::<Result<_>>()?;
    let g: Vec<CMat> = refs.iter().zip(toric).map(|(r, t)| r * diag(t)).collect();
    PhasePoint::new(curve.n, curve.poles.clone(), g, eigenvalues, DEFAULT_TOL)
}

pub fn inverse(data: &SpectralData, tol: f64) -> Result<PhasePoint> {
    let k = SurfaceKernels::from_curve(&data.curve, tol)?;
    inverse_with(&k, &data.q, &data.toric)
}

/// Inverse transform after moving the basepoint to `z0`.
pub fn inverse_at(data: &SpectralData, z0: C64, tol: f64) -> Result<PhasePoint> {
    let curve = data.curve.with_anchor(z0)?;
    let k = SurfaceKernels::from_curve(&curve, tol)?;
    inverse_with(&k, &data.q, &data.toric)
}

/// Left action that reorders the gauge-fixed point so `A(z0)_kk = y^(k)(z0)`.
fn align_with_sheets(p: &PhasePoint, curve: &SpectralCurve) -> Result<PhasePoint> {
    let z0 = curve.anchor;
    let a0 = p.assemble()?.evaluate(z0)?;
    let y = sheet_eigenvalues(curve, z0)?;
    let n = p.n;
    let perm = match_order(&(0..n).map(|k| a0[(k, k)]).collect::<Vec<_>>(), &y)?;
    if perm.iter().enumerate().all(|(i, &k)| i == k) {
        return Ok(p.clone());
    }
    // row k of the new frame is row perm[k] of the old one
    let mut s = CMat::zeros(n, n);
    for (k, &src) in perm.iter().enumerate() {
        s[(k, src)] = C64::new(1.0, 0.0);
    }
    let det = s.determinant();
    Ok(p.left_act(&(s / nth_root(det, n))))
}

/// `perm[k]` is the index in `values` that matches `targets[k]`.
fn match_order(values: &[C64], targets: &[C64]) -> Result<Vec<usize>> {
    let scale = targets.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let mut used = vec![false; values.len()];
    let mut perm = Vec::new();
    for t in targets {
        let (i, d) = values
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, v)| (i, (v - t).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::InvalidParameter("eigenvalue matching failed".into()))?;
        if d > 1e-6 * scale.max(1.0) {
            return Err(Error::ContinuationAmbiguous { z: format!("eigenvalue {t} unmatched (gap {d:.2e})") });
        }
        used[i] = true;
        perm.push(i);
    }
    Ok(perm)
}

/// Poles of the normalized eigenvector: zeros of `prod (z - t_j) A_12(z)` on the
/// sheet where `y = A_22(z)`, minus the trivial pole `z0^(2)`.
pub fn eigenvector_divisor(p: &PhasePoint, curve: &SpectralCurve) -> Result<EigenvectorDivisor> {
    require_n2(p.n)?;
    let a = p.assemble()?;
    let z0 = curve.anchor;
    let mut b = Poly::zero();
    for (j, r) in a.residues.iter().enumerate() {
        let others: Vec<C64> = a.poles.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &t)| t).collect();
        b = &b + &Poly::from_roots(&others, r[(0, 1)]);
    }
    let b = b.trimmed(1e-12);
    let mut roots = b.roots(1e-12);
    let (i0, d0) = roots
        .iter()
        .enumerate()
        .map(|(i, r)| (i, (r - z0).norm()))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or_else(|| Error::BasisDegenerate { reason: "A_12 vanishes identically".into() })?;
    if d0 > 1e-6 {
        return Err(Error::InvalidParameter(format!("A(z0) is not diagonal (nearest zero of A_12 at distance {d0:.2e})")));
    }
    roots.remove(i0);
    let mut points = Vec::new();
    for z in roots {
        let dist = curve.branch_distance(z);
        if dist < 1e-8 {
            return Err(Error::NearBranchPoint { z: z.to_string(), distance: dist });
        }
        let a22 = a.evaluate(z)?[(1, 1)];
        let y = sheet_eigenvalues(curve, z)?;
        let sheet = if (y[0] - a22).norm() < (y[1] - a22).norm() { 1 } else { 2 };
        points.push(curve.point(z, sheet)?);
    }
    if points.len() != curve.genus {
        return Err(Error::BasisDegenerate {
            reason: format!("divisor degree {} differs from genus {}", points.len(), curve.genus),
        });
    }
    Ok(EigenvectorDivisor { points, trivial: vec![curve.point(z0, 2)?], basepoint: z0 })
}

/// Diagonal `D` (unit determinant) matching `D A_j D^-1` to `B_j` in least squares.
fn fit_diagonal_gauge(a: &[CMat], b: &[CMat]) -> CMat {
    let n = a[0].nrows();
    let mut d = vec![C64::new(1.0, 0.0); n];
    for k in 1..n {
        // (D A D^-1)_(k0) = (d_k / d_0) A_(k0) and (D A D^-1)_(0k) = (d_0 / d_k) A_(0k)
        let (mut lo, mut lo_w) = (C64::new(0.0, 0.0), 0.0);
        let (mut up, mut up_w) = (C64::new(0.0, 0.0), 0.0);
        for (x, y) in a.iter().zip(b) {
            lo += x[(k, 0)].conj() * y[(k, 0)];
            lo_w += x[(k, 0)].norm_sqr();
            up += x[(0, k)].conj() * y[(0, k)];
            up_w += x[(0, k)].norm_sqr();
        }
        d[k] = if lo_w >= up_w && lo_w > 0.0 {
            lo / lo_w
        } else if up_w > 0.0 {
            up_w / up
        } else {
            C64::new(1.0, 0.0)
        };
    }
    let det: C64 = d.iter().product();
    let s = nth_root(det, n);
    diag(&d.iter().map(|x| x / s).collect::<Vec<_>>())
}

pub fn direct(point: &PhasePoint, z0: Option<C64>, tol: f64) -> Result<DirectOutput> {
    require_n2(point.n)?;
    let built = SpectralCurve::build(&point.assemble()?)?;
    let curve = match z0 {
        Some(z) => built.with_anchor(z)?,
        None => built,
    };
    let fixed = align_with_sheets(&point.gauge_fix(curve.anchor)?, &curve)?;
    let k = SurfaceKernels::from_curve(&curve, tol)?;
    direct_with(&k, &fixed)
}

/// Direct transform of a point already gauge-fixed and aligned at the anchor of `k`.
pub fn direct_with(k: &SurfaceKernels, fixed: &PhasePoint) -> Result<DirectOutput> {
    let curve = k.curve();
    let g = curve.genus;
    let divisor = eigenvector_divisor(fixed, curve)?;
    let riemann = riemann_constants(k)?;
    let x0 = curve.point(curve.anchor, 1)?;
    let k_x = riemann.at(k, &x0)?;
    let mut q_raw: Vec<C64> = k_x.iter().map(|x| -x).collect();
    for p in &divisor.points {
        let u = k.abel.abel_map(p)?;
        for a in 0..g {
            q_raw[a] -= u[a];
        }
    }
    let red = reduce_mod_lattice(k.tau(), &q_raw);
    let q = red.reduced.clone();
    let q_lift = red.m.iter().zip(&red.n).map(|(&m, &n)| (m, n)).collect();
    let refs = reference_matrices(k, &q)?;

    // columns of G_j in sheet order, unit determinant
    let mut sorted_g = Vec::new();
    let mut sorted_l = Vec::new();
    for j in 0..curve.m() {
        let lam = curve.sheet_residues(j)?;
        let perm = match_order(&fixed.eigenvalues[j], &lam)?;
        let gj = &fixed.diagonalizers[j];
        let mut gp = CMat::zeros(2, 2);
        for (col, &src) in perm.iter().enumerate() {
            gp.set_column(col, &gj.column(src));
        }
        let det = gp.determinant();
        sorted_g.push(gp / nth_root(det, 2));
        sorted_l.push(lam);
    }
    let sorted = PhasePoint { n: 2, poles: curve.poles.clone(), diagonalizers: sorted_g, eigenvalues: sorted_l };

    let a_in = sorted.assemble()?.residues;
    let a_ref: Vec<CMat> = refs
        .iter()
        .zip(&sorted.eigenvalues)
        .map(|(r, l)| Ok(r * diag(l) * linalg::inverse(r)?))
        .collect::<Result<_>>()?;
    let gauge = fit_diagonal_gauge(&a_in, &a_ref);
    let gauge_inv = linalg::inverse(&gauge)?;
    let scale = a_in.iter().map(max_abs).fold(1e-300, f64::max);
    let conjugation_residual = a_in
        .iter()
        .zip(&a_ref)
        .map(|(x, y)| max_abs(&(&gauge * x * &gauge_inv - y)))
        .fold(0.0, f64::max)
        / scale;

    let mut toric = Vec::new();
    let mut toric_offdiag = 0.0f64;
    for (r, gj) in refs.iter().zip(&sorted.diagonalizers) {
        let rj = linalg::inverse(r)? * &gauge * gj;
        let off = max_offdiag(&rj) / max_abs(&rj).max(1e-300);
        toric_offdiag = toric_offdiag.max(off);
        toric.push((0..2).map(|i| rj[(i, i)]).collect::<Vec<_>>());
    }
    if toric_offdiag > 1e-6 {
        return Err(Error::NonDiagonalToric { index: 0, offdiag: toric_offdiag });
    }
    let fixed = sorted.left_act(&gauge);
    let data = SpectralData { curve: curve.clone(), q, q_lift, toric };
    Ok(DirectOutput { data, divisor, riemann, k_x, gauge, conjugation_residual, toric_offdiag, fixed })
}

impl SpectralData {
    pub fn genus(&self) -> usize {
        self.curve.genus
    }

    /// Unreduced `q = reduced + n + tau m`.
    pub fn q_unreduced(&self, tau: &CMat) -> Vec<C64> {
        let g = self.genus();
        (0..g)
            .map(|a| {
                let tm: C64 = (0..g).map(|b| tau[(a, b)] * self.q_lift[b].0 as f64).sum();
                self.q[a] + self.q_lift[a].1 as f64 + tm
            })
            .collect()
    }

    pub fn toric_matrices(&self) -> Vec<CMat> {
        self.toric.iter().map(|t| diag(t)).collect()
    }

    pub fn to_json(&self, coords: Option<&Coordinates>) -> Value {
        json!({
            "curve": self.curve.to_json(),
            "q": cpx_vec(&self.q),
            "q_lift": self.q_lift.iter().map(|&(m, n)| json!([m, n])).collect::<Vec<_>>(),
            "R": self.toric.iter().map(|r| cpx_vec(r)).collect::<Vec<_>>(),
            "coords": coords.map_or(Value::Null, |c| c.to_json()),
        })
    }

    pub fn from_json(v: &Value) -> Result<SpectralData> {
        let curve = SpectralCurve::from_json(field(v, "curve")?)?;
        let q = parse_cpx_vec(field(v, "q")?, "q")?;
        if q.len() != curve.genus {
            return Err(Error::Parse(format!("q has {} entries, genus is {}", q.len(), curve.genus)));
        }
        let q_lift = match v.get("q_lift") {
            Some(Value::Array(items)) => items
                .iter()
                .map(|it| {
                    let pair = it.as_array().filter(|a| a.len() == 2);
                    let get = |i: usize| pair.and_then(|a| a[i].as_i64());
                    match (get(0), get(1)) {
                        (Some(m), Some(n)) => Ok((m, n)),
                        _ => Err(Error::Parse("q_lift entries must be [m, n] integer pairs".into())),
                    }
                })
                .collect::<Result<Vec<_>>>()?,
            _ => vec![(0, 0); q.len()],
        };
        if q_lift.len() != q.len() {
            return Err(Error::Parse("q_lift length differs from q".into()));
        }
        let rs = field(v, "R")?
            .as_array()
            .ok_or_else(|| Error::Parse("R must be an array".into()))?;
        let toric: Vec<Vec<C64>> = rs
            .iter()
            .enumerate()
            .map(|(j, r)| parse_cpx_vec(r, &format!("R[{j}]")))
            .collect::<Result<_>>()?;
        if toric.len() != curve.m() || toric.iter().any(|r| r.len() != curve.n) {
            return Err(Error::Parse(format!("R must hold {} diagonals of length {}", curve.m(), curve.n)));
        }
        for (j, r) in toric.iter().enumerate() {
            let det: C64 = r.iter().product();
            if (det - 1.0).norm() > 1e-8 {
                return Err(Error::Parse(format!("R[{j}] has determinant {det}")));
            }
        }
        Ok(SpectralData { curve, q, q_lift, toric })
    }
}

/// `max |A - B|` entrywise.
pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

/// Identity check helper for `Psi Psi^-1`.
pub fn identity_defect(m: &CMat) -> f64 {
    max_diff(m, &identity(m.nrows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratmat::random_phase_point;

    use crate::linalg::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(m: usize, seed: u64) -> (DirectOutput, SurfaceKernels) {
        let p = random_phase_point(2, m, seed).unwrap();
        let out = direct(&p, None, 1e-12).unwrap();
        let k = SurfaceKernels::from_curve(&out.data.curve, 1e-12).unwrap();
        (out, k)
    }

    fn random_z(k: &SurfaceKernels, rng: &mut ChaCha8Rng) -> C64 {
        loop {
            let z = c(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5));
            let curve = k.curve();
            if curve.branch_distance(z) > 0.1 && curve.poles.iter().all(|t| (t - z).norm() > 0.1) {
                return z;
            }
        }
    }

    #[test]
    fn roundtrips() {
        for (m, seed) in [(4, 1), (5, 2), (4, 9)] {
            let p = random_phase_point(2, m, seed).unwrap();
            let r = roundtrip(&p, None, 1e-12, 0.0).unwrap();
            assert!(r.max_error() < 1e-8, "{r:?}");
            assert!(r.conjugation_residual < 1e-8 && r.toric_offdiag < 1e-8);
        }
        let p = random_phase_point(2, 4, 1).unwrap();
        assert!(roundtrip(&p, None, 1e-12, 0.1).unwrap().max_error() > 1e-2);
    }

    #[test]
    fn divisor_degree_and_theta() {
        let (out, k) = setup(4, 1);
        assert_eq!(out.divisor.points.len(), 1);
        assert!(k.theta.theta(&out.data.q, 0).unwrap().relative_size() > crate::theta::DIVISOR_GUARD);
    }

    #[test]
    fn psihat_identities() {
        let (out, k) = setup(5, 2);
        let q = &out.data.q;
        let z0 = k.curve().anchor;
        let near = psihat(&k, q, z0 + 1e-5, z0).unwrap();
        assert!(identity_defect(&near) < 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = random_z(&k, &mut rng);
            let ps = psihat(&k, q, z, z0).unwrap();
            let pi = psihat_inverse(&k, q, z, z0).unwrap();
            assert!(identity_defect(&(&ps * &pi)) < 1e-8);
            assert!(ps.determinant().norm() > 1e-8);
        }
    }

    #[test]
    fn reconstruction_matches_psihat() {
        let (out, k) = setup(5, 2);
        let q = &out.data.q;
        let p = inverse_with(&k, q, &out.data.toric).unwrap();
        let a = p.assemble().unwrap();
        assert!(max_abs(&a.residue_sum()) < 1e-8);
        let cc = a.char_coeffs();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let z = random_z(&k, &mut rng);
            let ps = psihat(&k, q, z, k.curve().anchor).unwrap();
            let y = sheet_eigenvalues(k.curve(), z).unwrap();
            let via = &ps * diag(&y) * linalg::inverse(&ps).unwrap();
            let az = a.evaluate(z).unwrap();
            assert!(max_diff(&via, &az) < 1e-8 * max_abs(&az).max(1.0));
            for b in 0..2 {
                let col = ps.column(b).into_owned();
                let lhs = &az * &col;
                let rhs = &col * y[b];
                assert!((lhs - rhs).norm() < 1e-8 * col.norm() * max_abs(&az).max(1.0));
            }
            let want = k.curve().char_coeffs.eval(2, z);
            assert!((cc.eval(2, z) - want).norm() < 1e-7 * want.norm().max(1.0));
        }
    }

    #[test]
    fn single_valued_across_cuts() {
        let (out, k) = setup(4, 1);
        let q = &out.data.q;
        let curve = k.curve();
        let z0 = curve.anchor;
        // straddle the cut ray leaving each branch point away from z0
        for e in curve.branch_points.clone() {
            let dir = (e - z0) / (e - z0).norm();
            let base = e + dir * 0.05;
            let eps = dir * C64::new(0.0, 1e-7);
            let mut vals = Vec::new();
            for z in [base + eps, base - eps] {
                let ps = psihat(&k, q, z, z0).unwrap();
                let y = sheet_eigenvalues(curve, z).unwrap();
                vals.push(&ps * diag(&y) * linalg::inverse(&ps).unwrap());
            }
            assert!(max_diff(&vals[0], &vals[1]) < 1e-5 * max_abs(&vals[0]).max(1.0));
        }
    }

    #[test]
    fn basepoint_independence() {
        let (out, k) = setup(4, 1);
        let z0 = k.curve().anchor;
        let z1 = z0 + c(0.15, -0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<C64> = (0..10).map(|_| random_z(&k, &mut rng)).collect();
        let r = z0_independence(&out.data, z0, z1, &samples, 1e-12).unwrap();
        assert!(r.conjugation_residual < 1e-6, "{r:?}");
        assert!(r.q2_residual < 1e-8);
    }

    #[test]
    fn json_roundtrip() {
        let (out, k) = setup(4, 1);
        let coords = extract_coords(&out.data, &k, 1e-12).unwrap();
        let v = out.data.to_json(Some(&coords));
        let back = SpectralData::from_json(&v).unwrap();
        assert_eq!(back.q, out.data.q);
        assert_eq!(back.toric, out.data.toric);
        assert_eq!(back.q_lift, out.data.q_lift);
    }

    #[test]
    fn rho_telescoping() {
        let (rho, _) = rho_from_toric(&[vec![c(1.0, 0.0), c(1.0, 0.0)]], 1e-12).unwrap();
        assert_eq!(rho[0][0], c(0.0, 0.0));
        let r = vec![vec![c(2.0, 1.0), c(2.0, 1.0).inv()]];
        let (rho, _) = rho_from_toric(&r, 1e-12).unwrap();
        assert!((rho[0][0] - c(2.0, 1.0).ln()).norm() < 1e-15);
        let back = toric_from_rho(&rho);
        assert!((back[0][0] - r[0][0]).norm() < 1e-14 && (back[0][1] - r[0][1]).norm() < 1e-14);
    }
}
