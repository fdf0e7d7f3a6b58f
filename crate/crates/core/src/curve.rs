//! Spectral curves `det(y - A(z)) = 0` and their sheets.
//!
//! For `n = 2` the curve is put in the hyperelliptic form `w^2 = P(z)` with
//! `w = y prod_j (z - t_j)`. Sheet `k` above `z` is the root obtained from the
//! `k`-th root (canonical order) at the anchor `z0` by continuation along the
//! straight segment `z0 -> z`. Along such a segment
//! `w(z) = w(z0) prod_i sqrt((z - e_i)/(z0 - e_i))` with principal roots, which
//! is exact as long as the segment misses every branch point.

use crate::error::{Error, Result};
use crate::json::{cpx, cpx_vec, field, parse_cpx, parse_cpx_vec};
use crate::linalg::{canonical_cmp, canonical_sort, min_pairwise_gap, C64};
use crate::poly::Poly;
use crate::ratmat::{CharCoeffs, RationalMatrix};
use serde_json::{json, Value};

/// Relative tolerance for repeated-root and perfect-square tests. Double roots
/// only resolve to about `sqrt(eps)`, so this is looser than the structural tolerance.
pub const ROOT_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SpectralCurve {
    pub n: usize,
    pub poles: Vec<C64>,
    pub char_coeffs: CharCoeffs,
    /// `P(z)` with `w^2 = P` (n = 2 only).
    pub p: Option<Poly>,
    /// Finite branch points in canonical order.
    pub branch_points: Vec<C64>,
    pub genus: usize,
    pub infinity_is_branch: bool,
    pub anchor: C64,
    /// `w` on each sheet at the anchor (n = 2).
    anchor_w: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub z: C64,
    /// Sheet label, 1-based.
    pub sheet: usize,
    pub y: C64,
}

/// A point above infinity: `y ~ leading / z^2` on that sheet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfinityPoint {
    pub sheet: usize,
    pub leading: C64,
}

#[derive(Clone, Debug)]
pub struct SheetPath {
    pub waypoints: Vec<C64>,
    pub start: SurfacePoint,
    /// `(z, y)` samples accepted by the continuation.
    pub samples: Vec<(C64, C64)>,
    pub end: SurfacePoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminantReport {
    pub smooth: bool,
    pub irreducible: bool,
    pub min_root_gap: f64,
}

/// Squarefree and perfect-square tests on `P`.
pub fn discriminant_check(p: &Poly) -> DiscriminantReport {
    let roots = p.roots(1e-13);
    let scale = 1.0 + roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let gap = min_pairwise_gap(&roots);
    let smooth = gap > ROOT_TOL * scale;
    let irreducible = !is_perfect_square(&roots, scale);
    DiscriminantReport { smooth, irreducible, min_root_gap: gap }
}

fn is_perfect_square(roots: &[C64], scale: f64) -> bool {
    if roots.len() % 2 == 1 {
        return false;
    }
    let mut left: Vec<C64> = roots.to_vec();
    while let Some(r) = left.pop() {
        let (k, d) = left
            .iter()
            .enumerate()
            .map(|(k, s)| (k, (s - r).norm()))
            .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if k == usize::MAX || d > 1e-4 * scale {
            return false;
        }
        left.swap_remove(k);
    }
    true
}

/// `g = n(n-1)m/2 - n^2 + 1`.
pub fn generic_genus(n: usize, m: usize) -> i64 {
    (n * (n - 1) * m / 2) as i64 - (n * n) as i64 + 1
}

/// `p = n(n-1)(m-2)`.
pub fn generic_branch_count(n: usize, m: usize) -> usize {
    n * (n - 1) * (m.saturating_sub(2))
}

/// Principal square root of each ratio `(z - e)/(z0 - e)`, multiplied.
pub fn sqrt_ratio_product(roots: &[C64], z: C64, z0: C64) -> C64 {
    roots
        .iter()
        .map(|e| ((z - e) / (z0 - e)).sqrt())
        .product()
}

/// Distance from the segment `[a, b]` to `p`.
pub fn segment_distance(a: C64, b: C64, p: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a) * d.conj()).re / len2;
    (a + d * t.clamp(0.0, 1.0) - p).norm()
}

/// True when the curve's branch points and poles are well separated, which is
/// what the random generator requires.
pub fn well_conditioned(curve: &SpectralCurve) -> bool {
    if curve.n != 2 || curve.infinity_is_branch {
        return false;
    }
    let bp = &curve.branch_points;
    if bp.len() != 2 * curve.poles.len() - 4 {
        return false;
    }
    let pole_gap = bp
        .iter()
        .flat_map(|e| curve.poles.iter().map(move |t| (e - t).norm()))
        .fold(f64::INFINITY, f64::min);
    min_pairwise_gap(bp) > 0.15
        && pole_gap > 0.15
        && bp.iter().all(|e| e.norm() < 6.0)
        && chain_clearance(bp, &curve.poles) > 0.1
}

/// Smallest distance from a segment `[e_k, e_k+1]` of the canonically sorted
/// branch-point chain to any other branch point or pole.
pub fn chain_clearance(branch_points: &[C64], poles: &[C64]) -> f64 {
    let mut out = f64::INFINITY;
    for k in 0..branch_points.len().saturating_sub(1) {
        let (a, b) = (branch_points[k], branch_points[k + 1]);
        for (i, e) in branch_points.iter().enumerate() {
            if i != k && i != k + 1 {
                out = out.min(segment_distance(a, b, *e));
            }
        }
        for t in poles {
            out = out.min(segment_distance(a, b, *t));
        }
    }
    out
}

impl SpectralCurve {
    pub fn build(a: &RationalMatrix) -> Result<Self> {
        Self::from_char_coeffs(&a.char_coeffs())
    }

    pub fn from_char_coeffs(cc: &CharCoeffs) -> Result<Self> {
        let n = cc.n;
        let m = cc.poles.len();
        if n != 2 {
            let genus = generic_genus(n, m).max(0) as usize;
            return Ok(SpectralCurve {
                n,
                poles: cc.poles.clone(),
                char_coeffs: cc.clone(),
                p: None,
                branch_points: Vec::new(),
                genus,
                infinity_is_branch: false,
                anchor: default_anchor(&[], &cc.poles),
                anchor_w: Vec::new(),
            });
        }
        let p = (-&cc.numerators[2]).trimmed(1e-13);
        let deg = p.degree(1e-13);
        if deg == 0 {
            return Err(Error::ReducibleCurve);
        }
        let report = discriminant_check(&p);
        if !report.irreducible {
            return Err(Error::ReducibleCurve);
        }
        if !report.smooth {
            return Err(Error::SingularCurve { gap: report.min_root_gap });
        }
        let roots = p.roots(1e-13);
        let scale = 1.0 + roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
        for e in &roots {
            for t in &cc.poles {
                let d = (e - t).norm();
                if d < ROOT_TOL * scale {
                    return Err(Error::SingularCurve { gap: d });
                }
            }
        }
        let infinity_is_branch = deg % 2 == 1;
        let ramification = deg + usize::from(infinity_is_branch);
        let genus = ramification / 2 - 1;
        let anchor = default_anchor(&roots, &cc.poles);
        let mut curve = SpectralCurve {
            n,
            poles: cc.poles.clone(),
            char_coeffs: cc.clone(),
            p: Some(p),
            branch_points: roots,
            genus,
            infinity_is_branch,
            anchor,
            anchor_w: Vec::new(),
        };
        curve.set_anchor(anchor)?;
        Ok(curve)
    }

    /// The curve `w^2 = p(z)` with no poles, so that `y = w`.
    pub fn from_hyperelliptic(p: Poly) -> Result<Self> {
        let numerators = vec![Poly::constant(C64::new(1.0, 0.0)), Poly::zero(), -&p];
        Self::from_char_coeffs(&CharCoeffs { n: 2, poles: Vec::new(), numerators })
    }

    /// The same curve with its branch points listed in the order of their
    /// nearest counterparts in `reference`, so that homology bases built along a
    /// deformation are continuous.
    pub fn with_branch_order(&self, reference: &[C64]) -> Result<Self> {
        if reference.len() != self.branch_points.len() {
            return Err(Error::InvalidParameter("branch point count changed".into()));
        }
        let mut left = self.branch_points.clone();
        let mut ordered = Vec::with_capacity(left.len());
        for r in reference {
            let (i, _) = left
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - r).norm().total_cmp(&(b.1 - r).norm()))
                .expect("same length");
            ordered.push(left.swap_remove(i));
        }
        let mut c = self.clone();
        c.branch_points = ordered;
        Ok(c)
    }

    /// Re-anchor the sheet labeling at `z0`.
    pub fn with_anchor(&self, z0: C64) -> Result<Self> {
        let mut c = self.clone();
        c.set_anchor(z0)?;
        Ok(c)
    }

    fn set_anchor(&mut self, z0: C64) -> Result<()> {
        let ys = self.roots_at(z0)?;
        let pp = self.pole_product(z0);
        self.anchor = z0;
        self.anchor_w = ys.iter().map(|y| y * pp).collect();
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.poles.len()
    }

    pub fn pole_product(&self, z: C64) -> C64 {
        self.poles.iter().map(|t| z - t).product()
    }

    /// `P(z)`; panics for n != 2.
    pub fn p_eval(&self, z: C64) -> C64 {
        self.p.as_ref().expect("hyperelliptic model").eval(z)
    }

    /// `det(y - A(z))` up to the factor `prod (z - t_j)^n`.
    pub fn residual(&self, z: C64, y: C64) -> f64 {
        let pp = self.pole_product(z);
        let w = y * pp;
        let n = self.n;
        let mut acc = C64::new(0.0, 0.0);
        let mut scale = 0.0;
        for k in 0..=n {
            let term = self.char_coeffs.numerators[k].eval(z) * w.powu((n - k) as u32);
            scale += term.norm();
            acc += term;
        }
        acc.norm() / scale.max(1e-300)
    }

    fn check_not_pole(&self, z: C64) -> Result<()> {
        for (j, t) in self.poles.iter().enumerate() {
            if (z - t).norm() < 1e-12 * (1.0 + t.norm()) {
                return Err(Error::PoleEvaluation { z: z.to_string(), index: j });
            }
        }
        Ok(())
    }

    /// All `y` above `z` in canonical order.
    pub fn roots_at(&self, z: C64) -> Result<Vec<C64>> {
        self.check_not_pole(z)?;
        let pp = self.pole_product(z);
        let mut ys: Vec<C64> = if self.n == 2 {
            let q2 = self.char_coeffs.eval(2, z);
            let r = (-q2).sqrt();
            vec![r, -r]
        } else {
            let n = self.n;
            let coeffs: Vec<C64> = (0..=n)
                .map(|i| self.char_coeffs.numerators[n - i].eval(z))
                .collect();
            Poly::new(coeffs).roots(1e-15).into_iter().map(|w| w / pp).collect()
        };
        canonical_sort(&mut ys);
        let scale = ys.iter().map(|y| y.norm()).fold(1e-300, f64::max);
        let gap = min_pairwise_gap(&ys);
        if gap < 1e-10 * scale {
            return Err(Error::NearBranchPoint { z: z.to_string(), distance: gap });
        }
        Ok(ys)
    }

    /// Minimum distance from `z` to a finite branch point.
    pub fn branch_distance(&self, z: C64) -> f64 {
        self.branch_points
            .iter()
            .map(|e| (z - e).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// `w` on `sheet` above `z` (n = 2), by the straight-segment product formula.
    pub fn w_on_sheet(&self, z: C64, sheet: usize) -> Result<C64> {
        if self.n != 2 {
            return Err(Error::InvalidParameter("w is defined for n = 2 only".into()));
        }
        if sheet == 0 || sheet > 2 {
            return Err(Error::InvalidParameter(format!("sheet {sheet} out of range")));
        }
        let d = self.branch_distance(z);
        if d < 1e-13 * (1.0 + z.norm()) {
            return Err(Error::NearBranchPoint { z: z.to_string(), distance: d });
        }
        Ok(self.anchor_w[sheet - 1] * sqrt_ratio_product(&self.branch_points, z, self.anchor))
    }

    /// Labeled point above `z`. For `n = 2` a point above a pole is allowed and
    /// carries `y = inf`; the kernels only use `z`, the sheet and `w` there.
    pub fn point(&self, z: C64, sheet: usize) -> Result<SurfacePoint> {
        if self.n == 2 {
            let w = self.w_on_sheet(z, sheet)?;
            let y = match self.check_not_pole(z) {
                Ok(()) => w / self.pole_product(z),
                Err(_) => C64::new(f64::INFINITY, 0.0),
            };
            return Ok(SurfacePoint { z, sheet, y });
        }
        self.check_not_pole(z)?;
        let pts = self.points_above(z)?;
        pts.get(sheet.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("sheet {sheet} out of range")))
    }

    /// The `n` labeled points above `z`.
    pub fn points_above(&self, z: C64) -> Result<Vec<SurfacePoint>> {
        if self.n == 2 {
            return (1..=2).map(|k| self.point(z, k)).collect();
        }
        let start = self.roots_at(self.anchor)?;
        (0..self.n)
            .map(|k| {
                let s = SurfacePoint { z: self.anchor, sheet: k + 1, y: start[k] };
                let y = self.track(&[self.anchor, z], s.y)?.1;
                Ok(SurfacePoint { z, sheet: k + 1, y })
            })
            .collect()
    }

    /// Residue of `y dz` at `t_j` on each sheet (the eigenvalues of `A_j` in sheet order).
    pub fn sheet_residues(&self, j: usize) -> Result<Vec<C64>> {
        let t = self.poles[j];
        let others: C64 = self
            .poles
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, s)| t - s)
            .product();
        if self.n == 2 {
            return (1..=2).map(|k| Ok(self.w_on_sheet(t, k)? / others)).collect();
        }
        // y (z - t) at a nearby point along the segment, extrapolated linearly.
        let h = 1e-4 * (1.0 + min_pairwise_gap(&self.poles).min(1.0));
        let dir = (self.anchor - t) / (self.anchor - t).norm();
        let a = self.points_above(t + dir * h)?;
        let b = self.points_above(t + dir * (2.0 * h))?;
        Ok(a.iter()
            .zip(&b)
            .map(|(p, q)| 2.0 * p.y * dir * h - q.y * dir * (2.0 * h))
            .collect())
    }

    /// The points above infinity (requires an even-degree model).
    pub fn infinity_points(&self) -> Result<Vec<InfinityPoint>> {
        if self.n != 2 {
            return Err(Error::InvalidParameter("infinity points are implemented for n = 2".into()));
        }
        if self.infinity_is_branch {
            return Err(Error::InfinityIsBranchPoint);
        }
        let dir = self.infinity_direction();
        let half = self.branch_points.len() / 2;
        let m = self.m();
        (1..=2)
            .map(|k| {
                let ratio: C64 = self
                    .branch_points
                    .iter()
                    .map(|e| (dir / (self.anchor - e)).sqrt())
                    .product();
                // w ~ anchor_w * ratio * s^half with z ~ s dir, and y = w / z^m.
                let w_lead = self.anchor_w[k - 1] * ratio / dir.powu(half as u32);
                let leading = if 2 + half == m {
                    w_lead
                } else {
                    C64::new(0.0, 0.0)
                };
                Ok(InfinityPoint { sheet: k, leading })
            })
            .collect()
    }

    /// Unit direction of the ray from the anchor used to label points at infinity.
    pub fn infinity_direction(&self) -> C64 {
        let mut best = (C64::new(1.0, 0.0), -1.0);
        for i in 0..64 {
            let d = C64::from_polar(1.0, std::f64::consts::TAU * i as f64 / 64.0);
            let clear = self
                .branch_points
                .iter()
                .map(|e| ray_distance(self.anchor, d, *e))
                .fold(f64::INFINITY, f64::min);
            if clear > best.1 + 1e-12 {
                best = (d, clear);
            }
        }
        best.0
    }

    /// Nearest-root continuation of `y` along a polyline with adaptive steps.
    /// Returns the accepted samples and the final `y`.
    fn track(&self, path: &[C64], y_start: C64) -> Result<(Vec<(C64, C64)>, C64)> {
        let mut y = y_start;
        let mut samples = vec![(path[0], y)];
        for seg in path.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = (b - a).norm();
            if len == 0.0 {
                continue;
            }
            let floor = 2f64.powi(-20);
            let mut s: f64 = 0.0;
            let mut step: f64 = 1.0 / 16.0;
            while s < 1.0 {
                let s_next = (s + step).min(1.0);
                let z = a + (b - a) * s_next;
                let roots = self.roots_at(z)?;
                let mut dists: Vec<(usize, f64)> =
                    roots.iter().enumerate().map(|(i, r)| (i, (r - y).norm())).collect();
                dists.sort_by(|p, q| p.1.partial_cmp(&q.1).unwrap());
                let accepted = dists.len() < 2 || dists[1].1 >= 3.0 * dists[0].1;
                if accepted {
                    y = roots[dists[0].0];
                    samples.push((z, y));
                    s = s_next;
                    step = (step * 2.0).min(1.0 / 16.0);
                } else {
                    step /= 2.0;
                    if step < floor {
                        return Err(Error::ContinuationAmbiguous { z: z.to_string() });
                    }
                }
            }
        }
        Ok((samples, y))
    }

    /// Continue `start` along `path` (which must begin at `start.z`).
    pub fn continue_path(&self, path: &[C64], start: SurfacePoint) -> Result<SheetPath> {
        if path.is_empty() || (path[0] - start.z).norm() > 1e-12 * (1.0 + start.z.norm()) {
            return Err(Error::InvalidParameter("path must start at the start point".into()));
        }
        let (samples, y) = self.track(path, start.y)?;
        let z = *path.last().unwrap();
        let labeled = self.points_above(z)?;
        let (k, _) = labeled
            .iter()
            .enumerate()
            .map(|(k, p)| (k, (p.y - y).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        Ok(SheetPath {
            waypoints: path.to_vec(),
            start,
            samples,
            end: SurfacePoint { z, sheet: k + 1, y },
        })
    }

    pub fn continue_sheet(&self, path: &[C64], start: SurfacePoint) -> Result<SurfacePoint> {
        Ok(self.continue_path(path, start)?.end)
    }

    pub fn discriminant(&self) -> Option<DiscriminantReport> {
        self.p.as_ref().map(discriminant_check)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "poles": cpx_vec(&self.poles),
            "Q_num": self.char_coeffs.numerators[2..].iter().map(|q| cpx_vec(&q.coeffs)).collect::<Vec<_>>(),
            "P": self.p.as_ref().map(|p| cpx_vec(&p.coeffs)).unwrap_or(Value::Null),
            "branch_points": cpx_vec(&self.branch_points),
            "genus": self.genus,
            "z0": cpx(self.anchor),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let n = field(v, "n")?
            .as_u64()
            .ok_or_else(|| Error::Parse("\"n\" must be a positive integer".into()))?
            as usize;
        if n < 2 {
            return Err(Error::Parse("\"n\" must be at least 2".into()));
        }
        let poles = parse_cpx_vec(field(v, "poles")?, "poles")?;
        let qs = field(v, "Q_num")?
            .as_array()
            .ok_or_else(|| Error::Parse("\"Q_num\" must be an array".into()))?;
        if qs.len() != n - 1 {
            return Err(Error::Parse(format!("\"Q_num\" has {} entries, expected {}", qs.len(), n - 1)));
        }
        let mut numerators = vec![Poly::constant(C64::new(1.0, 0.0)), Poly::zero()];
        for (k, q) in qs.iter().enumerate() {
            numerators.push(Poly::new(parse_cpx_vec(q, &format!("Q_num[{k}]"))?));
        }
        let cc = CharCoeffs { n, poles, numerators };
        let curve = Self::from_char_coeffs(&cc)?;
        match v.get("z0") {
            Some(z0) if !z0.is_null() => curve.with_anchor(parse_cpx(z0, "z0")?),
            _ => Ok(curve),
        }
    }
}

fn ray_distance(origin: C64, dir: C64, p: C64) -> f64 {
    let t = ((p - origin) * dir.conj()).re;
    if t <= 0.0 {
        (p - origin).norm()
    } else {
        (p - origin - dir * t).norm()
    }
}

/// A base point far from branch points and poles, inside their bounding box.
pub fn default_anchor(branch_points: &[C64], poles: &[C64]) -> C64 {
    let all: Vec<C64> = branch_points.iter().chain(poles).copied().collect();
    if all.is_empty() {
        return C64::new(0.0, 0.0);
    }
    let (mut lo, mut hi) = (all[0], all[0]);
    for z in &all {
        lo = C64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = C64::new(hi.re.max(z.re), hi.im.max(z.im));
    }
    let pad = 0.1 * (hi - lo).norm().max(1.0);
    let mut best = (C64::new(0.0, 0.0), -1.0);
    let k = 40;
    for i in 0..=k {
        for j in 0..=k {
            let z = C64::new(
                lo.re - pad + (hi.re - lo.re + 2.0 * pad) * i as f64 / k as f64,
                lo.im - pad + (hi.im - lo.im + 2.0 * pad) * j as f64 / k as f64,
            );
            let d = all.iter().map(|e| (z - e).norm()).fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (z, d);
            }
        }
    }
    best.0
}

/// Sort key helper so callers can order surface points deterministically.
pub fn cmp_points(a: &SurfacePoint, b: &SurfacePoint) -> std::cmp::Ordering {
    canonical_cmp(&a.z, &b.z).then(a.sheet.cmp(&b.sheet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::ratmat::{random_phase_point, two_pole_example};

    fn curve(m: usize, seed: u64) -> SpectralCurve {
        let p = random_phase_point(2, m, seed).unwrap();
        SpectralCurve::build(&p.assemble().unwrap()).unwrap()
    }

    #[test]
    fn genus_and_branch_counts() {
        for m in 4..=6 {
            let cv = curve(m, 1);
            assert_eq!(cv.genus as i64, generic_genus(2, m));
            assert_eq!(cv.branch_points.len(), generic_branch_count(2, m));
        }
    }

    #[test]
    fn two_pole_example_is_reducible() {
        let a = two_pole_example().assemble().unwrap();
        assert!(matches!(SpectralCurve::build(&a), Err(Error::ReducibleCurve)));
    }

    #[test]
    fn discriminant_examples() {
        let one = c(1.0, 0.0);
        let p = Poly::from_roots(&[one, one, c(2.0, 0.0), c(3.0, 0.0)], one);
        assert!(!discriminant_check(&p).smooth);
        let q = Poly::from_roots(&[one, one, -one, -one], one);
        assert!(!discriminant_check(&q).irreducible);
        assert!(discriminant_check(&curve(5, 2).p.unwrap()).smooth);
    }

    #[test]
    fn roots_sum_to_zero_and_satisfy_curve() {
        let cv = curve(5, 4);
        let z = c(0.37, -1.21);
        let ys = cv.roots_at(z).unwrap();
        assert!((ys[0] + ys[1]).norm() < 1e-12);
        for p in cv.points_above(z).unwrap() {
            assert!(cv.residual(z, p.y) < 1e-12);
        }
    }

    #[test]
    fn labels_at_anchor_are_canonical() {
        let cv = curve(4, 5);
        let pts = cv.points_above(cv.anchor).unwrap();
        let ys = cv.roots_at(cv.anchor).unwrap();
        assert!((pts[0].y - ys[0]).norm() < 1e-12 && (pts[1].y - ys[1]).norm() < 1e-12);
    }

    fn circle(center: C64, r: f64, start: C64) -> Vec<C64> {
        let a0 = (start - center).arg();
        let mut path = vec![start, center + C64::from_polar(r, a0)];
        for i in 1..=64 {
            path.push(center + C64::from_polar(r, a0 + std::f64::consts::TAU * i as f64 / 64.0));
        }
        path.push(start);
        path
    }

    #[test]
    fn monodromy_of_small_loops() {
        let cv = curve(5, 6);
        let start = cv.point(cv.anchor, 1).unwrap();
        let e = cv.branch_points[0];
        let r = 0.3 * min_pairwise_gap(&cv.branch_points).min(cv.branch_distance(cv.anchor));
        let end = cv.continue_sheet(&circle(e, r, cv.anchor), start).unwrap();
        assert_eq!(end.sheet, 2);
        let far = cv.continue_sheet(&circle(cv.anchor, 0.01, cv.anchor), start).unwrap();
        assert_eq!(far.sheet, 1);
    }

    #[test]
    fn continuation_matches_product_formula() {
        let cv = curve(5, 8);
        let z = c(-0.4, 0.9);
        let start = cv.point(cv.anchor, 2).unwrap();
        let end = cv.continue_sheet(&[cv.anchor, z], start).unwrap();
        assert_eq!(end.sheet, 2);
        assert!((end.y - cv.point(z, 2).unwrap().y).norm() < 1e-10);
    }

    #[test]
    fn json_round_trip() {
        let cv = curve(4, 9);
        let back = SpectralCurve::from_json(&cv.to_json()).unwrap();
        assert_eq!(back.genus, cv.genus);
        assert!((back.anchor - cv.anchor).norm() == 0.0);
        for (a, b) in back.branch_points.iter().zip(&cv.branch_points) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn infinity_points_for_even_degree() {
        let cv = curve(4, 10);
        let inf = cv.infinity_points().unwrap();
        assert_eq!(inf.len(), 2);
        assert!((inf[0].leading + inf[1].leading).norm() < 1e-10);
        let z = cv.anchor + cv.infinity_direction() * 1e4;
        let y = cv.point(z, 1).unwrap().y;
        assert!((y * z * z - inf[0].leading).norm() < 1e-3 * inf[0].leading.norm());
    }
}
