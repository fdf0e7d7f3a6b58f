//! The phase space of traceless rational matrices with simple poles.
//!
//! A [`PhasePoint`] stores poles `t_j`, diagonalizers `G_j` in SL(n) and the
//! diagonal eigenvalue matrices `L_j`; the residues are `A_j = G_j L_j G_j^-1`
//! and the moment constraint is `sum_j A_j = 0`.

use crate::curve::{self, SpectralCurve};
use crate::error::{Error, Result};
use crate::json::{cpx, field, parse_cpx, parse_cpx_vec};
use crate::linalg::{
    canonical_sort, diag, eig, identity, inverse, max_abs, min_pairwise_gap, nth_root, trace,
    CMat, C64,
};
use crate::poly::Poly;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_DIM: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub n: usize,
    pub poles: Vec<C64>,
    pub diagonalizers: Vec<CMat>,
    /// `eigenvalues[j][k]` is the k-th diagonal entry of `L_j`.
    pub eigenvalues: Vec<Vec<C64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    pub n: usize,
    pub poles: Vec<C64>,
    pub residues: Vec<CMat>,
}

/// Coefficients of `det(y - A(z)) = y^n + Q_2 y^(n-2) + ... + Q_n`, each
/// stored as a numerator polynomial over `prod_j (z - t_j)^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharCoeffs {
    pub n: usize,
    pub poles: Vec<C64>,
    /// `numerators[k]` is the numerator of `Q_k` for k = 0..=n (`Q_0 = 1`, `Q_1 = 0`).
    pub numerators: Vec<Poly>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MuCoordinates {
    /// `values[j][k-1] = mu_j^(k)` for k = 1..n-1.
    pub values: Vec<Vec<C64>>,
}

impl PhasePoint {
    /// Validated constructor.
    pub fn new(
        n: usize,
        poles: Vec<C64>,
        diagonalizers: Vec<CMat>,
        eigenvalues: Vec<Vec<C64>>,
        tol: f64,
    ) -> Result<Self> {
        let p = PhasePoint { n, poles, diagonalizers, eigenvalues };
        p.validate(tol)?;
        Ok(p)
    }

    pub fn m(&self) -> usize {
        self.poles.len()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.n;
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidParameter(format!("n = {n} outside 2..={MAX_DIM}")));
        }
        let m = self.m();
        if self.diagonalizers.len() != m || self.eigenvalues.len() != m {
            return Err(Error::InvalidParameter(format!(
                "{m} poles but {} diagonalizers and {} eigenvalue lists",
                self.diagonalizers.len(),
                self.eigenvalues.len()
            )));
        }
        if min_pairwise_gap(&self.poles) < tol {
            return Err(Error::InvalidParameter("poles are not distinct".into()));
        }
        for (j, (g, l)) in self.diagonalizers.iter().zip(&self.eigenvalues).enumerate() {
            if g.nrows() != n || g.ncols() != n || l.len() != n {
                return Err(Error::InvalidParameter(format!("dimension mismatch at index {j}")));
            }
            let det = g.determinant();
            if (det - C64::new(1.0, 0.0)).norm() > tol.max(1e-14) * 1e2 {
                return Err(Error::InvalidParameter(format!("det G_{j} = {det} is not 1")));
            }
            let tr: C64 = l.iter().sum();
            let scale = l.iter().map(|x| x.norm()).fold(1e-300, f64::max);
            if tr.norm() > tol * scale {
                return Err(Error::TraceViolation { index: j, trace: tr.to_string() });
            }
            let gap = min_pairwise_gap(l);
            if gap < tol * scale {
                return Err(Error::DegenerateSpectrum { gap });
            }
        }
        let a = self.assemble_unchecked()?;
        let residual = max_abs(&a.residue_sum());
        let scale: f64 = a.residues.iter().map(max_abs).sum();
        if residual > tol * scale.max(1.0) {
            return Err(Error::ConstraintViolation { residual });
        }
        Ok(())
    }

    fn assemble_unchecked(&self) -> Result<RationalMatrix> {
        let residues = self
            .diagonalizers
            .iter()
            .zip(&self.eigenvalues)
            .map(|(g, l)| Ok(g * diag(l) * inverse(g)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(RationalMatrix { n: self.n, poles: self.poles.clone(), residues })
    }

    /// `A(z) = sum_j G_j L_j G_j^-1 / (z - t_j)`.
    pub fn assemble(&self) -> Result<RationalMatrix> {
        let a = self.assemble_unchecked()?;
        let residual = max_abs(&a.residue_sum());
        let scale: f64 = a.residues.iter().map(max_abs).sum();
        if residual > DEFAULT_TOL * scale.max(1.0) {
            return Err(Error::ConstraintViolation { residual });
        }
        Ok(a)
    }

    /// Left-multiply every diagonalizer by the same `s`.
    pub fn left_act(&self, s: &CMat) -> PhasePoint {
        PhasePoint {
            n: self.n,
            poles: self.poles.clone(),
            diagonalizers: self.diagonalizers.iter().map(|g| s * g).collect(),
            eigenvalues: self.eigenvalues.clone(),
        }
    }

    /// Representative with `A(z0)` diagonal, eigenvalues in canonical order.
    ///
    /// With `A(z0) = V D V^-1` and the eigenvector columns scaled so that
    /// `V_kk = 1`, the gauge is `S = det(V)^(1/n) V^-1`.
    pub fn gauge_fix(&self, z0: C64) -> Result<PhasePoint> {
        let a = self.assemble()?;
        let a0 = a.evaluate(z0)?;
        let (vals, mut v) = eig(&a0);
        let scale = vals.iter().map(|x| x.norm()).fold(1e-300, f64::max);
        let gap = min_pairwise_gap(&vals);
        if gap < 1e-12 * scale.max(1.0) {
            return Err(Error::DegenerateSpectrum { gap });
        }
        let n = self.n;
        for k in 0..n {
            let pivot = v[(k, k)];
            let norm = v.column(k).norm();
            let s = if pivot.norm() > 1e-8 * norm {
                C64::new(1.0, 0.0) / pivot
            } else {
                C64::new(1.0 / norm, 0.0)
            };
            for r in 0..n {
                v[(r, k)] *= s;
            }
        }
        let det = v.determinant();
        let s = inverse(&v)? * nth_root(det, n);
        Ok(self.left_act(&s))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "poles": self.poles.iter().map(|&z| cpx(z)).collect::<Vec<_>>(),
            "G": self.diagonalizers.iter().map(|g| {
                (0..self.n).flat_map(|r| (0..self.n).map(move |c| (r, c)))
                    .map(|(r, c)| cpx(g[(r, c)])).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "L": self.eigenvalues.iter().map(|l| l.iter().map(|&z| cpx(z)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    /// Parse and validate. `G` is a list of row-major flattened n x n matrices.
    pub fn from_json(v: &Value, tol: f64) -> Result<PhasePoint> {
        let n = field(v, "n")?
            .as_u64()
            .ok_or_else(|| Error::Parse("\"n\" must be a positive integer".into()))?
            as usize;
        let poles = parse_cpx_vec(field(v, "poles")?, "poles")?;
        let m = poles.len();
        let gs = field(v, "G")?
            .as_array()
            .ok_or_else(|| Error::Parse("\"G\" must be an array".into()))?;
        let ls = field(v, "L")?
            .as_array()
            .ok_or_else(|| Error::Parse("\"L\" must be an array".into()))?;
        if gs.len() != m {
            return Err(Error::Parse(format!("\"G\" has {} entries, expected {m}", gs.len())));
        }
        if ls.len() != m {
            return Err(Error::Parse(format!("\"L\" has {} entries, expected {m}", ls.len())));
        }
        let mut diagonalizers = Vec::with_capacity(m);
        for (j, gj) in gs.iter().enumerate() {
            let entries = parse_cpx_vec(gj, &format!("G[{j}]"))?;
            if entries.len() != n * n {
                return Err(Error::Parse(format!(
                    "G[{j}] has {} entries, expected {}",
                    entries.len(),
                    n * n
                )));
            }
            diagonalizers.push(CMat::from_row_slice(n, n, &entries));
        }
        let mut eigenvalues = Vec::with_capacity(m);
        for (j, lj) in ls.iter().enumerate() {
            let l = parse_cpx_vec(lj, &format!("L[{j}]"))?;
            if l.len() != n {
                return Err(Error::Parse(format!("L[{j}] has {} entries, expected {n}", l.len())));
            }
            eigenvalues.push(l);
        }
        PhasePoint::new(n, poles, diagonalizers, eigenvalues, tol)
    }
}

impl RationalMatrix {
    pub fn residue_sum(&self) -> CMat {
        self.residues
            .iter()
            .fold(CMat::zeros(self.n, self.n), |acc, a| acc + a)
    }

    pub fn evaluate(&self, z: C64) -> Result<CMat> {
        let mut out = CMat::zeros(self.n, self.n);
        for (j, (t, a)) in self.poles.iter().zip(&self.residues).enumerate() {
            let d = z - t;
            if d.norm() < 1e-12 * (1.0 + t.norm()) {
                return Err(Error::PoleEvaluation { z: z.to_string(), index: j });
            }
            out += a / d;
        }
        Ok(out)
    }

    /// Conjugate all residues by `s`.
    pub fn conjugate(&self, s: &CMat) -> Result<RationalMatrix> {
        let si = inverse(s)?;
        Ok(RationalMatrix {
            n: self.n,
            poles: self.poles.clone(),
            residues: self.residues.iter().map(|a| s * a * &si).collect(),
        })
    }

    /// `prod_j (z - t_j) A(z)` as a matrix of polynomials.
    fn cleared(&self) -> Vec<Vec<Poly>> {
        let n = self.n;
        let mut out = vec![vec![Poly::zero(); n]; n];
        for (j, a) in self.residues.iter().enumerate() {
            let others: Vec<C64> = self
                .poles
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &t)| t)
                .collect();
            let basis = Poly::from_roots(&others, C64::new(1.0, 0.0));
            for r in 0..n {
                for c in 0..n {
                    out[r][c] = &out[r][c] + &basis.scale(a[(r, c)]);
                }
            }
        }
        out
    }

    /// Faddeev–LeVerrier over the polynomial ring applied to `prod (z - t_j) A(z)`.
    pub fn char_coeffs(&self) -> CharCoeffs {
        let n = self.n;
        let b = self.cleared();
        let matmul = |x: &Vec<Vec<Poly>>, y: &Vec<Vec<Poly>>| {
            let mut out = vec![vec![Poly::zero(); n]; n];
            for r in 0..n {
                for c in 0..n {
                    for k in 0..n {
                        out[r][c] = &out[r][c] + &(&x[r][k] * &y[k][c]);
                    }
                }
            }
            out
        };
        // coeffs[k] multiplies w^(n-k) in det(w - B)
        let mut coeffs = vec![Poly::zero(); n + 1];
        coeffs[0] = Poly::constant(C64::new(1.0, 0.0));
        let mut mk = vec![vec![Poly::zero(); n]; n];
        for k in 1..=n {
            let mut next = matmul(&b, &mk);
            for (i, row) in next.iter_mut().enumerate() {
                row[i] = &row[i] + &coeffs[k - 1];
            }
            mk = next;
            let bm = matmul(&b, &mk);
            let tr = (0..n).fold(Poly::zero(), |acc, i| &acc + &bm[i][i]);
            coeffs[k] = tr.scale(C64::new(-1.0 / k as f64, 0.0));
        }
        CharCoeffs { n, poles: self.poles.clone(), numerators: coeffs }
    }
}

impl CharCoeffs {
    pub fn pole_product(&self, z: C64) -> C64 {
        self.poles.iter().map(|t| z - t).product()
    }

    /// `Q_k(z)`.
    pub fn eval(&self, k: usize, z: C64) -> C64 {
        self.numerators[k].eval(z) / self.pole_product(z).powu(k as u32)
    }
}

/// `mu^(k) = sum_{i<=k} lambda^(i)`, k = 1..n-1.
pub fn mu_from_lambda(eigenvalues: &[Vec<C64>], tol: f64) -> Result<MuCoordinates> {
    let mut values = Vec::with_capacity(eigenvalues.len());
    for (j, l) in eigenvalues.iter().enumerate() {
        let tr: C64 = l.iter().sum();
        let scale = l.iter().map(|x| x.norm()).fold(1.0, f64::max);
        if tr.norm() > tol * scale {
            return Err(Error::TraceViolation { index: j, trace: tr.to_string() });
        }
        let mut acc = C64::new(0.0, 0.0);
        values.push(
            l[..l.len() - 1]
                .iter()
                .map(|&x| {
                    acc += x;
                    acc
                })
                .collect(),
        );
    }
    Ok(MuCoordinates { values })
}

/// Inverse of [`mu_from_lambda`]: `lambda^(k) = mu^(k) - mu^(k-1)`, `mu^(0) = mu^(n) = 0`.
pub fn lambda_from_mu(mu: &MuCoordinates) -> Vec<Vec<C64>> {
    mu.values
        .iter()
        .map(|m| {
            let n = m.len() + 1;
            (0..n)
                .map(|k| {
                    let hi = if k < n - 1 { m[k] } else { C64::new(0.0, 0.0) };
                    let lo = if k > 0 { m[k - 1] } else { C64::new(0.0, 0.0) };
                    hi - lo
                })
                .collect()
        })
        .collect()
}

fn random_c64(rng: &mut ChaCha8Rng, scale: f64) -> C64 {
    C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

fn random_sl(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    loop {
        let g = CMat::from_fn(n, n, |r, c| {
            random_c64(rng, 1.0) + if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        });
        let det = g.determinant();
        if det.norm() > 0.2 {
            return g / nth_root(det, n);
        }
    }
}

/// A reproducible random point of the phase space whose spectral curve is
/// smooth, irreducible and numerically well separated.
pub fn random_phase_point(n: usize, m: usize, seed: u64) -> Result<PhasePoint> {
    if n < 2 || n > MAX_DIM || m < 3 {
        return Err(Error::InvalidParameter(format!("need n in 2..={MAX_DIM} and m >= 3")));
    }
    const ATTEMPTS: usize = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ATTEMPTS {
        let mut poles: Vec<C64> = (0..m).map(|_| random_c64(&mut rng, 2.0)).collect();
        canonical_sort(&mut poles);
        if min_pairwise_gap(&poles) < 0.5 {
            continue;
        }
        let mut diagonalizers = Vec::with_capacity(m);
        let mut eigenvalues = Vec::with_capacity(m);
        let mut sum = CMat::zeros(n, n);
        for _ in 0..m - 1 {
            let g = random_sl(&mut rng, n);
            let mut l: Vec<C64> = (0..n).map(|_| random_c64(&mut rng, 1.0)).collect();
            let mean = l.iter().sum::<C64>() / n as f64;
            l.iter_mut().for_each(|x| *x -= mean);
            sum += &g * diag(&l) * inverse(&g)?;
            diagonalizers.push(g);
            eigenvalues.push(l);
        }
        let last = -sum;
        let (vals, vecs) = eig(&last);
        let scale = vals.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if min_pairwise_gap(&vals) < 0.2 * scale.max(0.1) || scale > 4.0 {
            continue;
        }
        let det = vecs.determinant();
        if det.norm() < 1e-3 {
            continue;
        }
        diagonalizers.push(&vecs / nth_root(det, n));
        eigenvalues.push(vals);
        let point = match PhasePoint::new(n, poles, diagonalizers, eigenvalues, DEFAULT_TOL) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if n == 2 {
            let a = point.assemble()?;
            match SpectralCurve::from_char_coeffs(&a.char_coeffs()) {
                Ok(curve) if curve::well_conditioned(&curve) => return Ok(point),
                _ => continue,
            }
        } else {
            return Ok(point);
        }
    }
    Err(Error::GenerationFailure { attempts: ATTEMPTS })
}

/// Residues of the identity-diagonalizer example (used in tests and docs).
pub fn two_pole_example() -> PhasePoint {
    let one = C64::new(1.0, 0.0);
    PhasePoint {
        n: 2,
        poles: vec![C64::new(0.0, 0.0), one],
        diagonalizers: vec![identity(2), identity(2)],
        eigenvalues: vec![vec![one, -one], vec![-one, one]],
    }
}

/// `tr A_j` for each residue.
pub fn residue_traces(a: &RationalMatrix) -> Vec<C64> {
    a.residues.iter().map(trace).collect()
}

pub fn parse_point_str(s: &str) -> Result<PhasePoint> {
    let v: Value = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    PhasePoint::from_json(&v, DEFAULT_TOL)
}

pub fn parse_cpx_arg(v: &Value) -> Result<C64> {
    parse_cpx(v, "value")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_offdiag};

    #[test]
    fn char_coeffs_match_determinant() {
        for (n, m) in [(2, 4), (3, 4), (4, 3)] {
            let p = random_phase_point(n, m, 7).unwrap();
            let a = p.assemble().unwrap();
            let cc = a.char_coeffs();
            let z = c(0.31, -0.77);
            let y = c(-0.4, 0.9);
            let az = a.evaluate(z).unwrap();
            let det = (identity(n) * y - az).determinant();
            let poly: C64 = (0..=n).map(|k| cc.eval(k, z) * y.powu((n - k) as u32)).sum();
            assert!((det - poly).norm() < 1e-10 * (1.0 + det.norm()), "n={n}: {det} vs {poly}");
            assert!(cc.eval(1, z).norm() < 1e-10);
        }
    }

    #[test]
    fn gauge_fix_diagonalizes_at_anchor() {
        let p = random_phase_point(2, 5, 3).unwrap();
        let z0 = c(0.1, 2.7);
        let q = p.gauge_fix(z0).unwrap();
        let a0 = q.assemble().unwrap().evaluate(z0).unwrap();
        assert!(max_offdiag(&a0) < 1e-10);
        assert!(crate::linalg::canonical_cmp(&a0[(0, 0)], &a0[(1, 1)]).is_lt());
        q.validate(1e-9).unwrap();
    }

    #[test]
    fn json_round_trip_and_diagnostics() {
        let p = random_phase_point(3, 4, 11).unwrap();
        let back = PhasePoint::from_json(&p.to_json(), 1e-9).unwrap();
        assert_eq!(back.poles, p.poles);
        let mut v = p.to_json();
        v["L"][1] = serde_json::json!([[1.0, 0.0]]);
        let err = PhasePoint::from_json(&v, 1e-9).unwrap_err();
        assert!(err.to_string().contains("L[1]"), "{err}");
    }

    #[test]
    fn trace_violation_is_reported() {
        let mut p = two_pole_example();
        p.eigenvalues[0][0] = c(1.5, 0.0);
        assert!(matches!(p.validate(1e-10), Err(Error::TraceViolation { index: 0, .. })));
    }

    #[test]
    fn mu_lambda_round_trip() {
        let l = vec![vec![c(1.0, 0.0), c(-3.0, 1.0), c(2.0, -1.0)]];
        let mu = mu_from_lambda(&l, 1e-12).unwrap();
        assert_eq!(mu.values[0][1], c(-2.0, 1.0));
        assert_eq!(lambda_from_mu(&mu), l);
    }

    #[test]
    fn two_pole_example_has_expected_q2() {
        let a = two_pole_example().assemble().unwrap();
        let cc = a.char_coeffs();
        let z = c(0.3, 0.4);
        let expect = -C64::new(1.0, 0.0) / (z * z * (z - 1.0) * (z - 1.0));
        assert!((cc.eval(2, z) - expect).norm() < 1e-12);
    }
}
