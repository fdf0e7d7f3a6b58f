//! Finite-difference checks of the potential, the symplectic form, the
//! symmetry of the Riemann-constant gradient and the Szegő variations.

use super::coords::{realize, CoordTangent, Direction};
use super::forms::{omega_on, omega_s, theta_on, SymplecticContext};
use super::riemann::riemann_constants;
use super::variation::SzegoVariationReport;
use crate::error::{Error, Result};
use crate::json::{cpx, cpx_vec};
use crate::linalg::{CMat, C64};
use crate::ratmat::PhasePoint;
use crate::transform::inverse_with;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Pass threshold of the form checks.
pub const FORM_TOL: f64 = 1e-4;

/// Base step of the convergence witness relative to the coordinate scale,
/// large enough for truncation error to dominate the Newton and roundoff noise.
pub const WITNESS_STEP: f64 = 1e-2;

#[derive(Clone, Debug)]
pub struct ContractionEntry {
    pub direction: Direction,
    pub value: C64,
    pub expected: C64,
    pub rel_error: f64,
    /// `err(h) / err(h/2)` of the extrapolated estimator against a finer reference.
    pub witness_ratio: f64,
    /// The same ratio for plain central differences; tends to 4 from either side.
    pub plain_ratio: f64,
    pub disagreement: f64,
}

impl ContractionEntry {
    pub fn label(&self) -> String {
        match self.direction {
            Direction::Action(a) => format!("I{}", a + 1),
            Direction::Q(a) => format!("q{}", a + 1),
            Direction::Mu(j) => format!("mu{}", j + 1),
            Direction::Rho(j) => format!("rho{}", j + 1),
        }
    }

    pub fn pass(&self) -> bool {
        self.rel_error < FORM_TOL && self.witness_ratio >= 4.0
    }

    pub fn to_json(&self) -> Value {
        json!({
            "direction": self.label(),
            "value": cpx(self.value),
            "expected": cpx(self.expected),
            "rel_error": self.rel_error,
            "witness_ratio": self.witness_ratio,
            "plain_ratio": self.plain_ratio,
            "fd_disagreement": self.disagreement,
            "pass": self.pass(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct PairEntry {
    pub omega_a: C64,
    pub omega_s: C64,
    pub mismatch: f64,
}

#[derive(Clone, Debug)]
pub struct DarbouxReport {
    pub contractions: Vec<ContractionEntry>,
    pub pairs: Vec<PairEntry>,
    pub leaf_pairs: Vec<PairEntry>,
    pub gamma_pairs: Vec<PairEntry>,
    /// `omega_A` on the coordinate basis, ordered `I, q, mu, rho`.
    pub basis_matrix: CMat,
}

fn max_mismatch(v: &[PairEntry]) -> f64 {
    v.iter().map(|p| p.mismatch).fold(0.0, f64::max)
}

impl DarbouxReport {
    pub fn contraction_pass(&self) -> bool {
        self.contractions.iter().all(|c| c.pass())
    }

    pub fn pairs_mismatch(&self) -> f64 {
        max_mismatch(&self.pairs)
    }

    pub fn leaf_mismatch(&self) -> f64 {
        max_mismatch(&self.leaf_pairs)
    }

    pub fn gamma_mismatch(&self) -> f64 {
        max_mismatch(&self.gamma_pairs)
    }

    pub fn form_pass(&self) -> bool {
        self.pairs_mismatch() < FORM_TOL && self.leaf_mismatch() < FORM_TOL && self.gamma_mismatch() < FORM_TOL
    }

    pub fn residuals_json(&self) -> Value {
        let pairs = |v: &[PairEntry]| -> Value {
            v.iter()
                .map(|p| json!({"omega_A": cpx(p.omega_a), "omega_S": cpx(p.omega_s), "mismatch": p.mismatch}))
                .collect()
        };
        let basis: Vec<Value> = (0..self.basis_matrix.nrows())
            .map(|r| Value::Array((0..self.basis_matrix.ncols()).map(|c| cpx(self.basis_matrix[(r, c)])).collect()))
            .collect();
        json!({
            "contractions": self.contractions.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
            "random_pairs": pairs(&self.pairs),
            "random_pairs_max": self.pairs_mismatch(),
            "leaf_pairs": pairs(&self.leaf_pairs),
            "leaf_max": self.leaf_mismatch(),
            "gamma_pairs": pairs(&self.gamma_pairs),
            "gamma_max": self.gamma_mismatch(),
            "omega_A_basis": basis,
        })
    }
}

fn random_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_tangent(rng: &mut ChaCha8Rng, g: usize, m: usize, leaf: bool) -> CoordTangent {
    let mut t = CoordTangent::zero(g, m);
    t.d_actions.iter_mut().for_each(|x| *x = random_c64(rng));
    t.d_q.iter_mut().for_each(|x| *x = random_c64(rng));
    if !leaf {
        t.d_mu.iter_mut().for_each(|x| *x = random_c64(rng));
        t.d_rho.iter_mut().for_each(|x| *x = random_c64(rng));
    }
    t
}

fn pair(omega_a: C64, omega_s: C64, norm: f64) -> PairEntry {
    PairEntry { omega_a, omega_s, mismatch: (omega_a - omega_s).norm() / norm.max(1e-300) }
}

impl SymplecticContext {
    /// A point with fixed projection away from branch points and poles.
    pub fn generic_point(&self, sheet: usize) -> (C64, usize) {
        let c = &self.data.curve;
        let far = |z: C64| {
            let pole = c.poles.iter().map(|t| (z - t).norm()).fold(f64::INFINITY, f64::min);
            c.branch_distance(z).min(pole)
        };
        let z = [C64::new(0.31, 0.17), C64::new(-0.27, 0.22), C64::new(0.19, -0.33), C64::new(-0.41, -0.12)]
            .iter()
            .map(|d| c.anchor + d)
            .max_by(|a, b| far(*a).total_cmp(&far(*b)))
            .expect("nonempty");
        (z, sheet)
    }

    fn check_fd(&self, disagreement: f64, scale: f64) -> Result<()> {
        if disagreement > 10.0 * FORM_TOL * scale.max(1.0) {
            return Err(Error::FdInstability { disagreement });
        }
        Ok(())
    }

    /// `theta_A` on one coordinate direction with the expected value and the
    /// second-order convergence witness.
    pub fn contraction(&self, dir: Direction) -> Result<ContractionEntry> {
        let (g, m) = (self.genus(), self.m());
        let u = CoordTangent::basis(g, m, dir);
        let th = self.theta(&u)?;
        let actions_scale = self.coords.actions.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let expected = match dir {
            Direction::Q(a) => self.coords.actions[a],
            Direction::Rho(j) => self.coords.mu[j][0],
            _ => C64::new(0.0, 0.0),
        };
        let denom = if expected.norm() > 1e-12 { expected.norm() } else { actions_scale.max(1e-12) };
        self.check_fd(th.disagreement, denom)?;
        let h = WITNESS_STEP * self.coordinate_scale();
        let levels = self.fd.levels;
        let at = |h: f64, levels: usize| -> Result<C64> { theta_on(&self.point, &self.tangent_with(&u, h, levels)?) };
        let reference = at(h / 2.0, levels + 1)?;
        let e1 = (at(h, levels)? - reference).norm();
        let e2 = (at(h / 2.0, levels)? - reference).norm();
        let p1 = (at(h, 1)? - reference).norm();
        let p2 = (at(h / 2.0, 1)? - reference).norm();
        Ok(ContractionEntry {
            direction: dir,
            value: th.value,
            expected,
            rel_error: (th.value - expected).norm() / denom,
            witness_ratio: e1 / e2.max(1e-300),
            plain_ratio: p1 / p2.max(1e-300),
            disagreement: th.disagreement,
        })
    }

    pub fn all_directions(&self) -> Vec<Direction> {
        let (g, m) = (self.genus(), self.m());
        let mut out: Vec<Direction> = (0..g).map(Direction::Action).collect();
        out.extend((0..g).map(Direction::Q));
        out.extend((0..m).map(Direction::Mu));
        out.extend((0..m).map(Direction::Rho));
        out
    }

    /// Phase point at actions `actions` and angles `gamma = q + K^x`, with `mu`
    /// and `rho` kept at their base values.
    pub fn point_at_gamma(&self, actions: &[C64], gamma: &[C64], x: (C64, usize)) -> Result<PhasePoint> {
        let mut coords = self.coords.clone();
        coords.actions = actions.to_vec();
        let (data, k) = realize(&self.data, &coords, self.tol)?;
        let kx = riemann_constants(&k)?.at(&k, &k.curve().point(x.0, x.1)?)?;
        let q: Vec<C64> = gamma.iter().zip(&kx).map(|(a, b)| a - b).collect();
        inverse_with(&k, &q, &data.toric)
    }

    /// `gamma^x = q + K^x` at the base point.
    pub fn gamma(&self, x: (C64, usize)) -> Result<Vec<C64>> {
        let k = &self.kernels;
        let kx = riemann_constants(k)?.at(k, &k.curve().point(x.0, x.1)?)?;
        Ok(self.coords.q.iter().zip(&kx).map(|(a, b)| a + b).collect())
    }

    /// Contractions, random full and leaf tangent pairs, and the leaf form in
    /// the coordinates `(I, gamma^x)`.
    pub fn verify_darboux(&self, trials: usize, seed: u64) -> Result<DarbouxReport> {
        let (g, m) = (self.genus(), self.m());
        let contractions = self.all_directions().into_iter().map(|d| self.contraction(d)).collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut run = |leaf: bool| -> Result<Vec<PairEntry>> {
            (0..trials)
                .map(|_| {
                    let u = random_tangent(&mut rng, g, m, leaf);
                    let v = random_tangent(&mut rng, g, m, leaf);
                    let w = self.omega(&u, &v)?;
                    self.check_fd(w.disagreement, 1.0)?;
                    Ok(pair(w.value, omega_s(&u, &v), u.norm() * v.norm()))
                })
                .collect()
        };
        let pairs = run(false)?;
        let leaf_pairs = run(true)?;
        let x = self.generic_point(1);
        let gamma0 = self.gamma(x)?;
        let h = self.fd.h * self.coordinate_scale();
        let mut gamma_pairs = Vec::with_capacity(trials);
        for _ in 0..trials {
            let mut tangents = Vec::new();
            let mut dirs = Vec::new();
            for _ in 0..2 {
                let di: Vec<C64> = (0..g).map(|_| random_c64(&mut rng)).collect();
                let dgam: Vec<C64> = (0..g).map(|_| random_c64(&mut rng)).collect();
                let family = |s: f64| {
                    let a: Vec<C64> = self.coords.actions.iter().zip(&di).map(|(a, d)| a + d * s).collect();
                    let gm: Vec<C64> = gamma0.iter().zip(&dgam).map(|(a, d)| a + d * s).collect();
                    self.point_at_gamma(&a, &gm, x)
                };
                let t = self.tangent_by(family, h, self.fd.levels)?;
                self.check_fd(t.disagreement, 1.0)?;
                tangents.push(t);
                dirs.push((di, dgam));
            }
            let wa = omega_on(&self.point, &tangents[0], &tangents[1])?;
            let (u, v) = (&dirs[0], &dirs[1]);
            let ws: C64 = (0..g).map(|a| u.0[a] * v.1[a] - v.0[a] * u.1[a]).sum();
            let norm = |d: &(Vec<C64>, Vec<C64>)| d.0.iter().chain(&d.1).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            gamma_pairs.push(pair(wa, ws, norm(u) * norm(v)));
        }
        let dirs = self.all_directions();
        let tangents = dirs
            .iter()
            .map(|d| self.tangent(&CoordTangent::basis(g, m, *d)))
            .collect::<Result<Vec<_>>>()?;
        let nd = dirs.len();
        let mut basis_matrix = CMat::zeros(nd, nd);
        for i in 0..nd {
            for k in i + 1..nd {
                let w = omega_on(&self.point, &tangents[i], &tangents[k])?;
                basis_matrix[(i, k)] = w;
                basis_matrix[(k, i)] = -w;
            }
        }
        Ok(DarbouxReport { contractions, pairs, leaf_pairs, gamma_pairs, basis_matrix })
    }

    /// `M_ab = dK^x_a / dI_b` for `x` over the same `z` on both sheets.
    pub fn verify_k_symmetry(&self) -> Result<KSymmetryReport> {
        let mut gradients = Vec::new();
        for sheet in [1, 2] {
            let x = self.generic_point(sheet);
            gradients.push((x, self.riemann_gradient(x)?));
        }
        Ok(KSymmetryReport { gradients })
    }
}

#[derive(Clone, Debug)]
pub struct KSymmetryReport {
    pub gradients: Vec<((C64, usize), CMat)>,
}

impl KSymmetryReport {
    pub fn asymmetry(&self) -> f64 {
        self.gradients
            .iter()
            .map(|(_, m)| crate::linalg::max_abs(&(m - m.transpose())))
            .fold(0.0, f64::max)
    }

    pub fn finite(&self) -> bool {
        self.gradients.iter().all(|(_, m)| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    pub fn pass(&self) -> bool {
        self.finite() && self.asymmetry() < FORM_TOL
    }

    pub fn residuals_json(&self) -> Value {
        let mats: Vec<Value> = self
            .gradients
            .iter()
            .map(|((z, sheet), m)| {
                let rows: Vec<Value> = (0..m.nrows()).map(|r| cpx_vec(&m.row(r).iter().copied().collect::<Vec<_>>())).collect();
                json!({"z": cpx(*z), "sheet": sheet, "M": rows, "asymmetry": crate::linalg::max_abs(&(m - m.transpose()))})
            })
            .collect();
        json!({"gradients": mats, "max_asymmetry": self.asymmetry()})
    }
}

impl SzegoVariationReport {
    /// Mismatch at the stated constant below `FORM_TOL` and best-fit ratio within `1 +- FORM_TOL`.
    pub fn pass(&self) -> bool {
        self.max_mismatch < FORM_TOL && (self.best_ratio - 1.0).norm() < FORM_TOL
    }

    pub fn convention_mismatch(&self) -> bool {
        (self.best_ratio - 1.0).norm() >= FORM_TOL
    }

    pub fn residuals_json(&self) -> Value {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|e| {
                json!({
                    "direction": e.label,
                    "lhs": cpx(e.lhs),
                    "rhs": cpx(e.rhs),
                    "ratio": cpx(e.lhs / e.rhs),
                    "mismatch": e.mismatch,
                    "fd_disagreement": e.fd_disagreement,
                    "radius_convergence": e.radius_convergence,
                })
            })
            .collect();
        json!({
            "entries": entries,
            "max_mismatch": self.max_mismatch,
            "best_ratio": cpx(self.best_ratio),
            "convention_mismatch": self.convention_mismatch(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inverse;
    use crate::ratmat::random_phase_point;
    use crate::symplectic::{FdConfig, PointTangent};
    use std::f64::consts::PI;

    fn context(m: usize, seed: u64) -> SymplecticContext {
        let p = random_phase_point(2, m, seed).unwrap();
        SymplecticContext::from_point(&p, None, FdConfig::default(), 1e-12).unwrap()
    }

    #[test]
    fn leaf_and_gamma_forms_are_darboux() {
        let ctx = context(4, 1);
        let r = ctx.verify_darboux(3, 11).unwrap();
        assert!(r.leaf_mismatch() < FORM_TOL, "{:e}", r.leaf_mismatch());
        assert!(r.gamma_mismatch() < FORM_TOL, "{:e}", r.gamma_mismatch());
        let b = &r.basis_matrix;
        // I-q block of omega_A on the coordinate basis
        assert!((b[(0, 1)] - 1.0).norm() < 1e-6, "{}", b[(0, 1)]);
    }

    #[test]
    fn vanishing_contractions_converge_at_second_order() {
        let ctx = context(4, 1);
        for dir in [Direction::Action(0), Direction::Mu(0), Direction::Mu(2)] {
            let c = ctx.contraction(dir).unwrap();
            assert!(c.pass(), "{}: {:e} ratio {}", c.label(), c.rel_error, c.witness_ratio);
            assert!((c.plain_ratio - 4.0).abs() < 0.2, "{}", c.plain_ratio);
        }
    }

    #[test]
    fn rho_contraction_is_the_sheet_one_residue_twice() {
        let ctx = context(4, 3);
        let c = ctx.contraction(Direction::Rho(1)).unwrap();
        assert!((c.value - 2.0 * c.expected).norm() < 1e-6 * c.expected.norm(), "{} vs {}", c.value, c.expected);
    }

    #[test]
    fn riemann_gradient_symmetric_at_genus_two() {
        let ctx = context(5, 2);
        let r = ctx.verify_k_symmetry().unwrap();
        assert!(r.pass(), "{:e}", r.asymmetry());
        assert_eq!(r.gradients.len(), 2);
    }

    #[test]
    fn szego_variation_has_one_constant_ratio_per_kind() {
        let ctx = context(5, 2);
        let r = ctx.szego_variation(ctx.generic_point(1), ctx.generic_point(2), &[0]).unwrap();
        let g = ctx.genus();
        for e in &r.entries {
            assert!(e.radius_convergence < 1e-8 * e.rhs.norm(), "{}", e.label);
            let want = if e.label.starts_with('I') { C64::new(0.0, -1.0 / PI) } else { C64::new(-1.0 / (2.0 * PI * PI), 0.0) };
            assert!((e.lhs / e.rhs - want).norm() < 1e-6, "{}: {}", e.label, e.lhs / e.rhs);
        }
        assert_eq!(r.entries.len(), g + 1);
        assert!(r.convention_mismatch());
    }

    fn left_moved(t: &PointTangent, p: &crate::ratmat::PhasePoint, s0: &CMat, x: &CMat) -> PointTangent {
        let dg = t.dg.iter().zip(&p.diagonalizers).map(|(d, g)| s0 * (x * g + d)).collect();
        PointTangent { dg, dl: t.dl.clone(), disagreement: t.disagreement }
    }

    #[test]
    fn omega_is_antisymmetric_and_gauge_invariant() {
        let ctx = context(4, 1);
        let (g, m) = (ctx.genus(), ctx.m());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_tangent(&mut rng, g, m, false);
        let v = random_tangent(&mut rng, g, m, false);
        let tu = ctx.tangent(&u).unwrap();
        let tv = ctx.tangent(&v).unwrap();
        let w = omega_on(&ctx.point, &tu, &tv).unwrap();
        assert!((w + omega_on(&ctx.point, &tv, &tu).unwrap()).norm() < 1e-12);
        assert!(omega_on(&ctx.point, &tu, &tu).unwrap().norm() < 1e-12);
        let s0 = CMat::from_row_slice(2, 2, &[C64::new(1.2, 0.1), C64::new(0.3, -0.2), C64::new(-0.4, 0.5), C64::new(0.9, 0.0)]);
        let s0 = &s0 / crate::linalg::nth_root(s0.determinant(), 2);
        let xu = CMat::from_row_slice(2, 2, &[C64::new(0.2, 0.1), C64::new(-0.7, 0.3), C64::new(0.5, 0.0), C64::new(-0.2, -0.1)]);
        let xv = CMat::from_row_slice(2, 2, &[C64::new(-0.3, 0.4), C64::new(0.1, 0.2), C64::new(0.6, -0.5), C64::new(0.3, -0.4)]);
        let moved = ctx.point.left_act(&s0);
        let w2 = omega_on(&moved, &left_moved(&tu, &ctx.point, &s0, &xu), &left_moved(&tv, &ctx.point, &s0, &xv)).unwrap();
        assert!((w - w2).norm() < 1e-8 * w.norm().max(1.0), "{w} vs {w2}");
        assert!(inverse(&s0).is_ok());
    }
}
