//! Homology basis, period matrix, Abel map and periods of `y dz` for `n = 2`.
//!
//! The branch points `e_1..e_2g+2` (canonical order) form an x-monotone chain.
//! Loop `c_k` is a stadium around the segment `[e_k, e_k+1]`, lifted with the
//! principal-root branch of `w` (independent of the sheet labeling anchor). Then `a_i = c_(2i-1)` encircles the
//! cut `[e_(2i-1), e_(2i)]` and `b_i = c_(2i) + c_(2i+2) + ... + c_(2g)` runs from
//! that cut to the last one. Loop orientations are fixed from numerically
//! computed intersection numbers so that `a_i . b_j = delta_ij`.

use crate::curve::{segment_distance, SpectralCurve, SurfacePoint};
use crate::error::{Error, Result};
use crate::json::cpx;
use crate::linalg::{inverse, CMat, C64};
use crate::quad::integrate;
use serde_json::{json, Value};
use std::f64::consts::PI;

pub const DEFAULT_QUAD_TARGET: f64 = 1e-11;

#[derive(Clone, Copy, Debug)]
pub enum Piece {
    Line { a: C64, b: C64 },
    Arc { center: C64, radius: f64, t0: f64, t1: f64 },
}

impl Piece {
    pub fn point(&self, s: f64) -> (C64, C64) {
        match *self {
            Piece::Line { a, b } => (a + (b - a) * s, b - a),
            Piece::Arc { center, radius, t0, t1 } => {
                let t = t0 + (t1 - t0) * s;
                let e = C64::from_polar(1.0, t);
                (center + e * radius, C64::new(0.0, 1.0) * e * radius * (t1 - t0))
            }
        }
    }
}

/// `w` along a stadium loop as a closed-form continuous branch.
#[derive(Clone, Debug)]
pub struct LoopBranch {
    mid: C64,
    half: C64,
    /// `(e, sqrt(mid - e))` for branch points outside the loop.
    outside: Vec<(C64, C64)>,
    factor: C64,
}

impl LoopBranch {
    pub fn w(&self, z: C64) -> C64 {
        let u = z - self.mid;
        let inner = u * (C64::new(1.0, 0.0) - self.half * self.half / (u * u)).sqrt();
        let rest: C64 = self
            .outside
            .iter()
            .map(|(e, s)| s * ((z - e) / (self.mid - e)).sqrt())
            .product();
        self.factor * inner * rest
    }
}

#[derive(Clone, Debug)]
pub struct ChainLoop {
    pub e0: C64,
    pub e1: C64,
    pub radius: f64,
    pub pieces: Vec<Piece>,
    pub branch: LoopBranch,
    /// `+1` or `-1`: orientation applied when the loop enters a cycle.
    pub orientation: f64,
}

impl ChainLoop {
    fn new(curve: &SpectralCurve, k: usize, radius: f64) -> ChainLoop {
        let bp = &curve.branch_points;
        let (e0, e1) = (bp[k], bp[k + 1]);
        let d = e1 - e0;
        let nrm = d / d.norm();
        let normal = nrm * C64::new(0.0, 1.0);
        let ang = nrm.arg();
        // counterclockwise: bottom edge e0 -> e1, cap around e1, top edge back, cap around e0
        let pieces = vec![
            Piece::Line { a: e0 - normal * radius, b: e1 - normal * radius },
            Piece::Arc { center: e1, radius, t0: ang - PI / 2.0, t1: ang + PI / 2.0 },
            Piece::Line { a: e1 + normal * radius, b: e0 + normal * radius },
            Piece::Arc { center: e0, radius, t0: ang + PI / 2.0, t1: ang + 3.0 * PI / 2.0 },
        ];
        let mid = 0.5 * (e0 + e1);
        let lead = curve.p.as_ref().expect("hyperelliptic model").leading();
        let outside = bp
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k && i != k + 1)
            .map(|(_, &e)| (e, (mid - e).sqrt()))
            .collect();
        // the lift uses principal roots only, so it does not depend on the anchor
        let branch = LoopBranch { mid, half: 0.5 * d, outside, factor: lead.sqrt() };
        ChainLoop { e0, e1, radius, pieces, branch, orientation: 1.0 }
    }

    /// `orientation * oint f(z, w) dz`.
    pub fn integrate<F>(&self, f: &F, dim: usize, tol: f64) -> Result<(Vec<C64>, f64)>
    where
        F: Fn(C64, C64) -> Vec<C64>,
    {
        let mut acc = vec![C64::new(0.0, 0.0); dim];
        let mut err = 0.0;
        for piece in &self.pieces {
            let r = integrate(
                |s| {
                    let (z, dz) = piece.point(s);
                    let w = self.branch.w(z);
                    f(z, w).into_iter().map(|v| v * dz).collect()
                },
                0.0,
                1.0,
                dim,
                tol / 4.0,
            )?;
            for (a, v) in acc.iter_mut().zip(r.value) {
                *a += v * self.orientation;
            }
            err += r.error;
        }
        Ok((acc, err))
    }

    /// Polyline samples `(z, w)` with the direction already oriented.
    fn samples(&self, per_arc: usize) -> Vec<(C64, C64)> {
        let mut out = Vec::new();
        for piece in &self.pieces {
            let k = match piece {
                Piece::Line { .. } => 8,
                Piece::Arc { .. } => per_arc,
            };
            for i in 0..k {
                let z = piece.point(i as f64 / k as f64).0;
                out.push((z, self.branch.w(z)));
            }
        }
        if self.orientation < 0.0 {
            out.reverse();
        }
        let first = out[0];
        out.push(first);
        out
    }
}

/// A cycle as an integer combination of chain loops.
pub type Cycle = Vec<(usize, i32)>;

#[derive(Clone, Debug)]
pub struct HomologyBasis {
    pub genus: usize,
    pub loops: Vec<ChainLoop>,
    pub cuts: Vec<(C64, C64)>,
    pub a: Vec<Cycle>,
    pub b: Vec<Cycle>,
    /// Intersection matrix in the order `(a_1..a_g, b_1..b_g)`.
    pub intersection: Vec<Vec<i32>>,
}

fn seg_intersection(p0: C64, p1: C64, q0: C64, q1: C64) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let den = r.re * s.im - r.im * s.re;
    if den.abs() < 1e-300 {
        return None;
    }
    let qp = q0 - p0;
    let t = (qp.re * s.im - qp.im * s.re) / den;
    let u = (qp.re * r.im - qp.im * r.re) / den;
    ((0.0..1.0).contains(&t) && (0.0..1.0).contains(&u)).then_some((t, u))
}

/// Algebraic intersection number of two lifted loops: signed plane crossings
/// counted only where both lifts are on the same sheet.
fn intersection_number(p: &ChainLoop, q: &ChainLoop) -> i32 {
    let ps = p.samples(96);
    let qs = q.samples(96);
    let mut total = 0;
    for i in 0..ps.len() - 1 {
        for j in 0..qs.len() - 1 {
            if let Some((t, u)) = seg_intersection(ps[i].0, ps[i + 1].0, qs[j].0, qs[j + 1].0) {
                let z = ps[i].0 + (ps[i + 1].0 - ps[i].0) * t;
                let _ = u;
                let wp = p.branch.w(z);
                let wq = q.branch.w(z);
                if (wp - wq).norm() < (wp + wq).norm() {
                    let dp = ps[i + 1].0 - ps[i].0;
                    let dq = qs[j + 1].0 - qs[j].0;
                    let cross = dp.re * dq.im - dp.im * dq.re;
                    total += if cross > 0.0 { 1 } else { -1 };
                }
            }
        }
    }
    total
}

fn cycle_intersection(loops: &[ChainLoop], pair: &[Vec<i32>], x: &Cycle, y: &Cycle) -> i32 {
    let _ = loops;
    let mut s = 0;
    for &(i, ci) in x {
        for &(j, cj) in y {
            s += ci * cj * pair[i][j];
        }
    }
    s
}

impl HomologyBasis {
    pub fn build(curve: &SpectralCurve) -> Result<HomologyBasis> {
        if curve.n != 2 {
            return Err(Error::BasisDegenerate { reason: "only n = 2 is supported".into() });
        }
        if curve.infinity_is_branch {
            return Err(Error::InfinityIsBranchPoint);
        }
        let g = curve.genus;
        let bp = &curve.branch_points;
        if g == 0 {
            return Ok(HomologyBasis {
                genus: 0,
                loops: Vec::new(),
                cuts: vec![(bp[0], bp[1])],
                a: Vec::new(),
                b: Vec::new(),
                intersection: Vec::new(),
            });
        }
        let mut loops = Vec::with_capacity(2 * g + 1);
        for k in 0..=2 * g {
            let (e0, e1) = (bp[k], bp[k + 1]);
            let mut clear = f64::INFINITY;
            for (i, e) in bp.iter().enumerate() {
                if i != k && i != k + 1 {
                    clear = clear.min(segment_distance(e0, e1, *e));
                }
            }
            for t in &curve.poles {
                clear = clear.min(segment_distance(e0, e1, *t));
            }
            clear = clear.min((e1 - e0).norm());
            if !(clear > 1e-8) {
                return Err(Error::BasisDegenerate {
                    reason: format!("chain segment {k} passes through a branch point or pole"),
                });
            }
            // alternate radii so that collinear neighbours still cross transversally
            let frac = if k % 2 == 0 { 0.4 } else { 0.3 };
            loops.push(ChainLoop::new(curve, k, frac * clear));
        }
        // orient so that c_k . c_k+1 = +1
        for k in 0..2 * g {
            let s = intersection_number(&loops[k], &loops[k + 1]);
            if s.abs() != 1 {
                return Err(Error::BasisDegenerate {
                    reason: format!("adjacent loops {k}, {} intersect {s} times", k + 1),
                });
            }
            loops[k + 1].orientation = loops[k].orientation;
            if intersection_number(&loops[k], &loops[k + 1]) != 1 {
                loops[k + 1].orientation = -loops[k + 1].orientation;
            }
        }
        let a: Vec<Cycle> = (0..g).map(|i| vec![(2 * i, 1)]).collect();
        let b: Vec<Cycle> = (0..g)
            .map(|i| (i..g).map(|k| (2 * k + 1, 1)).collect())
            .collect();
        let nl = loops.len();
        let mut pair = vec![vec![0; nl]; nl];
        for i in 0..nl {
            for j in 0..nl {
                if i != j {
                    pair[i][j] = intersection_number(&loops[i], &loops[j]);
                }
            }
        }
        let all: Vec<&Cycle> = a.iter().chain(&b).collect();
        let intersection: Vec<Vec<i32>> = all
            .iter()
            .map(|x| all.iter().map(|y| cycle_intersection(&loops, &pair, x, y)).collect())
            .collect();
        for (i, row) in intersection.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let expect = if j == i + g && i < g {
                    1
                } else if i == j + g && j < g {
                    -1
                } else {
                    0
                };
                if v != expect {
                    return Err(Error::BasisDegenerate {
                        reason: format!("intersection matrix entry ({i}, {j}) = {v}"),
                    });
                }
            }
        }
        let cuts = (0..=g).map(|i| (bp[2 * i], bp[2 * i + 1])).collect();
        Ok(HomologyBasis { genus: g, loops, cuts, a, b, intersection })
    }

    /// `oint_cycle f(z, w) dz` with an error estimate.
    pub fn integrate<F>(&self, cycle: &Cycle, f: &F, dim: usize, tol: f64) -> Result<(Vec<C64>, f64)>
    where
        F: Fn(C64, C64) -> Vec<C64>,
    {
        let mut acc = vec![C64::new(0.0, 0.0); dim];
        let mut err = 0.0;
        for &(k, c) in cycle {
            let (v, e) = self.loops[k].integrate(f, dim, tol / cycle.len() as f64)?;
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x * c as f64;
            }
            err += e;
        }
        Ok((acc, err))
    }

    /// Integrate `f` over each `a` cycle and then each `b` cycle.
    pub fn all_periods<F>(&self, f: &F, dim: usize, tol: f64) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>, f64)>
    where
        F: Fn(C64, C64) -> Vec<C64>,
    {
        // b cycles are sums of loops, so integrate each loop once.
        let mut per_loop = Vec::with_capacity(self.loops.len());
        let mut err = 0.0;
        for l in &self.loops {
            let (v, e) = l.integrate(f, dim, tol / self.loops.len() as f64)?;
            per_loop.push(v);
            err += e;
        }
        let combine = |c: &Cycle| {
            let mut acc = vec![C64::new(0.0, 0.0); dim];
            for &(k, s) in c {
                for (a, x) in acc.iter_mut().zip(&per_loop[k]) {
                    *a += x * s as f64;
                }
            }
            acc
        };
        Ok((self.a.iter().map(combine).collect(), self.b.iter().map(combine).collect(), err))
    }

    /// Sheet label of the point `(z, w)` on the labeled surface.
    pub fn sheet_of(curve: &SpectralCurve, z: C64, w: C64) -> Result<usize> {
        let w1 = curve.w_on_sheet(z, 1)?;
        Ok(if (w - w1).norm() <= (w + w1).norm() { 1 } else { 2 })
    }
}

/// Periods of the holomorphic differentials and the normalized basis.
#[derive(Clone, Debug)]
pub struct PeriodData {
    pub curve: SpectralCurve,
    pub basis: HomologyBasis,
    /// `a_periods[(alpha, beta)] = oint_(a_beta) z^alpha dz / w` (0-based alpha).
    pub a_periods: CMat,
    pub b_periods: CMat,
    /// `v_alpha = sum_gamma norm[(alpha, gamma)] z^gamma dz / w`.
    pub norm: CMat,
    pub tau: CMat,
    pub quad_error: f64,
}

impl PeriodData {
    pub fn compute(curve: &SpectralCurve, tol: f64) -> Result<PeriodData> {
        let basis = HomologyBasis::build(curve)?;
        let g = curve.genus;
        if g == 0 {
            return Err(Error::BasisDegenerate { reason: "genus 0 has no periods".into() });
        }
        let f = |z: C64, w: C64| (0..g).map(|k| z.powu(k as u32) / w).collect::<Vec<_>>();
        let (ap, bp, err) = basis.all_periods(&f, g, tol)?;
        let a_periods = CMat::from_fn(g, g, |al, be| ap[be][al]);
        let b_periods = CMat::from_fn(g, g, |al, be| bp[be][al]);
        let norm = inverse(&a_periods)
            .map_err(|_| Error::BasisDegenerate { reason: "singular a-period matrix".into() })?;
        let tau = &norm * &b_periods;
        Ok(PeriodData { curve: curve.clone(), basis, a_periods, b_periods, norm, tau, quad_error: err })
    }

    pub fn genus(&self) -> usize {
        self.curve.genus
    }

    /// `(v_1 .. v_g)` as `dz`-coefficients at `(z, w)`.
    pub fn v_at(&self, z: C64, w: C64) -> Vec<C64> {
        let g = self.genus();
        let mono: Vec<C64> = (0..g).map(|k| z.powu(k as u32) / w).collect();
        (0..g)
            .map(|al| (0..g).map(|ga| self.norm[(al, ga)] * mono[ga]).sum())
            .collect()
    }

    /// `v_alpha(x)` in the z-chart.
    pub fn holo_diff_eval(&self, alpha: usize, x: &SurfacePoint) -> Result<C64> {
        let w = self.curve.w_on_sheet(x.z, x.sheet)?;
        Ok(self.v_at(x.z, w)[alpha])
    }

    pub fn holo_diffs(&self, x: &SurfacePoint) -> Result<Vec<C64>> {
        let w = self.curve.w_on_sheet(x.z, x.sheet)?;
        Ok(self.v_at(x.z, w))
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.tau - self.tau.transpose()).iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Cholesky of `Im tau` succeeds.
    pub fn im_tau_positive(&self) -> bool {
        let g = self.genus();
        let im = nalgebra::DMatrix::<f64>::from_fn(g, g, |i, j| {
            0.5 * (self.tau[(i, j)].im + self.tau[(j, i)].im)
        });
        im.cholesky().is_some()
    }

    /// `I_alpha = oint_(a_alpha) y dz`.
    pub fn action_periods(&self, tol: f64) -> Result<(Vec<C64>, f64)> {
        let curve = &self.curve;
        let f = |z: C64, w: C64| vec![w / curve.pole_product(z)];
        let mut out = Vec::with_capacity(self.genus());
        let mut err = 0.0;
        for a in &self.basis.a {
            let (v, e) = self.basis.integrate(a, &f, 1, tol)?;
            out.push(v[0]);
            err += e;
        }
        Ok((out, err))
    }

    /// `lambda_j^(k) = res_(t_j^(k)) y dz`.
    pub fn residues_v(&self) -> Result<Vec<Vec<C64>>> {
        (0..self.curve.m()).map(|j| self.curve.sheet_residues(j)).collect()
    }

    pub fn to_report_json(&self, actions: &[C64], residues: &[Vec<C64>], quad_error: f64) -> Value {
        let g = self.genus();
        json!({
            "tau": (0..g).map(|i| (0..g).map(|j| cpx(self.tau[(i, j)])).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "I": actions.iter().map(|&z| cpx(z)).collect::<Vec<_>>(),
            "lambda": residues.iter().map(|r| r.iter().map(|&z| cpx(z)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "quad_error": quad_error,
        })
    }
}

/// Residue of `y dz` at `t_j` on `sheet` from the trapezoid rule on a circle of radius `r`.
pub fn residue_by_circle(curve: &SpectralCurve, j: usize, sheet: usize, r: f64, nodes: usize) -> Result<C64> {
    let t = curve.poles[j];
    let wt = curve.w_on_sheet(t, sheet)?;
    let v = crate::quad::periodic_trapezoid(
        |th| {
            let e = C64::from_polar(1.0, th);
            let z = t + e * r;
            let w = wt * crate::curve::sqrt_ratio_product(&curve.branch_points, z, t);
            vec![w / curve.pole_product(z) * C64::new(0.0, 1.0) * e * r]
        },
        nodes,
        1,
    );
    Ok(v[0] / C64::new(0.0, 2.0 * PI))
}

/// Abel map with basepoint `x0 = z0^(1)`, `z0` the curve anchor.
///
/// The labeled surface is cut along the rays from each branch point pointing
/// away from `z0`, except for the ray at `e*`, across which the two sheets are
/// glued. For `x = z^(1)` the map is the integral along the straight segment,
/// `I(z)`, and for `x = z^(2)` it is `2 I(e*) - I(z)`.
#[derive(Clone, Debug)]
pub struct AbelContext {
    pub periods: PeriodData,
    pub e_star: C64,
    pub u_e_star: Vec<C64>,
    pub tol: f64,
}

/// An Abel-map value and the lattice shift used to reduce it, `value = reduced + n + tau m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeReduction {
    pub reduced: Vec<C64>,
    pub n: Vec<i64>,
    pub m: Vec<i64>,
}

impl AbelContext {
    pub fn new(periods: PeriodData, tol: f64) -> Result<AbelContext> {
        let curve = &periods.curve;
        let z0 = curve.anchor;
        let bp = &curve.branch_points;
        // nearest branch point whose segment to z0 stays clear of the others
        let mut best: Option<(f64, usize)> = None;
        for (i, e) in bp.iter().enumerate() {
            let clear = bp
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, f)| segment_distance(z0, *e, *f))
                .fold(f64::INFINITY, f64::min);
            let dist = (e - z0).norm();
            if clear > 0.05 * dist {
                let score = dist / clear.min(dist);
                if best.map_or(true, |(s, _)| score < s) {
                    best = Some((score, i));
                }
            }
        }
        let (_, i_star) = best.ok_or_else(|| Error::BasisDegenerate {
            reason: "no branch point visible from the base point".into(),
        })?;
        let e_star = bp[i_star];
        let g = periods.genus();
        let others: Vec<C64> = bp.iter().enumerate().filter(|&(k, _)| k != i_star).map(|(_, &e)| e).collect();
        let w0 = curve.w_on_sheet(z0, 1)?;
        // z = e* + (z0 - e*) u^2; the e* factor of w becomes u.
        let r = integrate(
            |u| {
                let z = e_star + (z0 - e_star) * (u * u);
                let w_over_u = w0 * crate::curve::sqrt_ratio_product(&others, z, z0);
                let mono: Vec<C64> = (0..g).map(|k| z.powu(k as u32)).collect();
                (0..g)
                    .map(|al| {
                        let s: C64 = (0..g).map(|ga| periods.norm[(al, ga)] * mono[ga]).sum();
                        s * (z0 - e_star) * 2.0 / w_over_u
                    })
                    .collect()
            },
            1.0,
            0.0,
            g,
            tol,
        )?;
        Ok(AbelContext { periods, e_star, u_e_star: r.value, tol })
    }

    pub fn curve(&self) -> &SpectralCurve {
        &self.periods.curve
    }

    pub fn genus(&self) -> usize {
        self.periods.genus()
    }

    /// `I(z)`: integral of `v` on sheet 1 along the segment `z0 -> z`.
    pub fn sheet_one_integral(&self, z: C64) -> Result<Vec<C64>> {
        let curve = self.curve();
        let z0 = curve.anchor;
        let g = self.genus();
        if (z - z0).norm() == 0.0 {
            return Ok(vec![C64::new(0.0, 0.0); g]);
        }
        let d = curve.branch_distance(z);
        if d < 1e-12 {
            return Err(Error::NearBranchPoint { z: z.to_string(), distance: d });
        }
        let mut bad = None;
        let r = integrate(
            |s| {
                let p = z0 + (z - z0) * s;
                match curve.w_on_sheet(p, 1) {
                    Ok(w) => self.periods.v_at(p, w).into_iter().map(|v| v * (z - z0)).collect(),
                    Err(e) => {
                        bad = Some(e);
                        vec![C64::new(0.0, 0.0); g]
                    }
                }
            },
            0.0,
            1.0,
            g,
            self.tol,
        )?;
        match bad {
            Some(e) => Err(e),
            None => Ok(r.value),
        }
    }

    pub fn abel_map(&self, x: &SurfacePoint) -> Result<Vec<C64>> {
        let i = self.sheet_one_integral(x.z)?;
        Ok(match x.sheet {
            1 => i,
            2 => self.u_e_star.iter().zip(&i).map(|(e, v)| 2.0 * e - v).collect(),
            s => return Err(Error::InvalidParameter(format!("sheet {s} out of range"))),
        })
    }

    /// Abel map of a branch point (independent of sheet).
    pub fn abel_branch_point(&self, e: C64) -> Result<Vec<C64>> {
        if (e - self.e_star).norm() < 1e-14 {
            return Ok(self.u_e_star.clone());
        }
        // approach along the segment from z0, stop short, and finish with the substitution
        let curve = self.curve();
        let z0 = curve.anchor;
        let g = self.genus();
        let others: Vec<C64> = curve
            .branch_points
            .iter()
            .filter(|f| (*f - e).norm() > 1e-14)
            .copied()
            .collect();
        let w0 = curve.w_on_sheet(z0, 1)?;
        let r = integrate(
            |u| {
                let z = e + (z0 - e) * (u * u);
                let w_over_u = w0 * crate::curve::sqrt_ratio_product(&others, z, z0);
                let v = self.periods.v_at(z, w_over_u);
                v.into_iter().map(|x| x * (z0 - e) * 2.0).collect()
            },
            1.0,
            0.0,
            g,
            self.tol,
        )?;
        Ok(r.value)
    }

    pub fn reduce(&self, v: &[C64]) -> LatticeReduction {
        reduce_mod_lattice(&self.periods.tau, v)
    }

    /// The piecewise straight path from `z0^(1)` to `x` along which `abel_map`
    /// integrates, as `(start, end, sheet)` segments.
    pub fn lift_path(&self, x: &SurfacePoint) -> Vec<(C64, C64, usize)> {
        let z0 = self.curve().anchor;
        match x.sheet {
            1 => vec![(z0, x.z, 1)],
            _ => vec![(z0, self.e_star, 1), (self.e_star, z0, 2), (z0, x.z, 2)],
        }
    }

    /// Signed intersection number of the lift path of `x` with a chain loop.
    pub fn lift_crossings(&self, x: &SurfacePoint, lp: &ChainLoop) -> Result<i64> {
        let curve = self.curve();
        let inside = |p: C64| segment_distance(lp.e0, lp.e1, p) < lp.radius;
        let mut count = 0i64;
        for (a, b, sheet) in self.lift_path(x) {
            let steps = 2048;
            let at = |s: f64| a + (b - a) * s;
            let mut prev = inside(at(0.0));
            for k in 1..=steps {
                let (s0, s1) = ((k - 1) as f64 / steps as f64, k as f64 / steps as f64);
                let now = inside(at(s1));
                if now == prev {
                    continue;
                }
                let (mut lo, mut hi) = (s0, s1);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if inside(at(mid)) == prev {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let p = at(0.5 * (lo + hi));
                let w = curve.w_on_sheet(p, sheet)?;
                let wl = lp.branch.w(p);
                if (w - wl).norm() < (w + wl).norm() {
                    count += if now { 1 } else { -1 };
                }
                prev = now;
            }
        }
        Ok(count * lp.orientation as i64)
    }
}

/// Write `v = x + tau y` with real `x, y`.
pub fn lattice_coordinates(tau: &CMat, v: &[C64]) -> (Vec<f64>, Vec<f64>) {
    let g = v.len();
    let im = nalgebra::DMatrix::<f64>::from_fn(g, g, |i, j| tau[(i, j)].im);
    let imv = nalgebra::DVector::<f64>::from_fn(g, |i, _| v[i].im);
    let y = im.lu().solve(&imv).expect("Im tau is invertible");
    let x: Vec<f64> = (0..g)
        .map(|i| v[i].re - (0..g).map(|j| tau[(i, j)].re * y[j]).sum::<f64>())
        .collect();
    (x, y.iter().copied().collect())
}

/// Reduce to `a + tau b` with `a, b` in `[-1/2, 1/2)^g`.
pub fn reduce_mod_lattice(tau: &CMat, v: &[C64]) -> LatticeReduction {
    let g = v.len();
    let (x, y) = lattice_coordinates(tau, v);
    let n: Vec<i64> = x.iter().map(|t| (t + 0.5).floor() as i64).collect();
    let m: Vec<i64> = y.iter().map(|t| (t + 0.5).floor() as i64).collect();
    let reduced = (0..g)
        .map(|i| {
            let shift: C64 = (0..g).map(|j| tau[(i, j)] * m[j] as f64).sum();
            v[i] - n[i] as f64 - shift
        })
        .collect();
    LatticeReduction { reduced, n, m }
}

/// Distance from `v` to the nearest lattice point `n + tau m`.
pub fn lattice_distance(tau: &CMat, v: &[C64]) -> f64 {
    reduce_mod_lattice(tau, v)
        .reduced
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Arithmetic-geometric mean of two positive reals.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    while (a - b).abs() > 1e-16 * a {
        let t = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = t;
    }
    a
}

/// Complete elliptic integral of the first kind with parameter `m = k^2`.
pub fn ellip_k(m: f64) -> f64 {
    PI / (2.0 * agm(1.0, (1.0 - m).sqrt()))
}

/// `tau` of a genus-one curve with four real branch points `e1 < e2 < e3 < e4`,
/// for the a-cycle around `[e1, e2]`: `i K(1 - m) / K(m)` with the cross ratio
/// `m = (e2 - e1)(e4 - e3) / ((e3 - e1)(e4 - e2))`. `None` for other curves.
pub fn agm_tau(curve: &SpectralCurve) -> Option<C64> {
    let bp = &curve.branch_points;
    if curve.genus != 1 || bp.len() != 4 || bp.iter().any(|e| e.im.abs() > 1e-12 * (1.0 + e.norm())) {
        return None;
    }
    let mut e: Vec<f64> = bp.iter().map(|z| z.re).collect();
    e.sort_by(f64::total_cmp);
    let m = (e[1] - e[0]) * (e[3] - e[2]) / ((e[2] - e[0]) * (e[3] - e[1]));
    Some(C64::new(0.0, ellip_k(1.0 - m) / ellip_k(m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};
    use crate::poly::Poly;
    use crate::ratmat::random_phase_point;

    fn real_quartic(scale: C64) -> SpectralCurve {
        let roots: Vec<C64> = [0.0, 1.0, 2.0, 3.0].iter().map(|&r| scale * r).collect();
        SpectralCurve::from_hyperelliptic(Poly::from_roots(&roots, c(1.0, 0.0))).unwrap()
    }

    fn random_periods(m: usize, seed: u64) -> PeriodData {
        let p = random_phase_point(2, m, seed).unwrap();
        let curve = SpectralCurve::build(&p.assemble().unwrap()).unwrap();
        PeriodData::compute(&curve, DEFAULT_QUAD_TARGET).unwrap()
    }

    #[test]
    fn elliptic_tau_matches_agm() {
        let pd = PeriodData::compute(&real_quartic(c(1.0, 0.0)), DEFAULT_QUAD_TARGET).unwrap();
        let expect = c(0.0, ellip_k(0.75) / ellip_k(0.25));
        assert!((expect.im - 1.279_261_571_171_006_5).abs() < 1e-14);
        assert!((pd.tau[(0, 0)] - expect).norm() < 1e-8, "{}", pd.tau[(0, 0)]);
    }

    #[test]
    fn tau_is_scale_invariant() {
        let base = PeriodData::compute(&real_quartic(c(1.0, 0.0)), DEFAULT_QUAD_TARGET).unwrap();
        for s in [c(2.5, 0.0), c(0.7, 0.2)] {
            let pd = PeriodData::compute(&real_quartic(s), DEFAULT_QUAD_TARGET).unwrap();
            assert!((pd.tau[(0, 0)] - base.tau[(0, 0)]).norm() < 1e-8);
        }
    }

    #[test]
    fn riemann_relations_and_normalization() {
        for (m, seed) in [(4, 1), (5, 2), (6, 3)] {
            let pd = random_periods(m, seed);
            assert!(pd.symmetry_defect() < 1e-10, "m={m}: {}", pd.symmetry_defect());
            assert!(pd.im_tau_positive());
            let g = pd.genus();
            let f = |z: C64, w: C64| pd.v_at(z, w);
            let (ap, bp, _) = pd.basis.all_periods(&f, g, 1e-12).unwrap();
            for be in 0..g {
                for al in 0..g {
                    let d = if al == be { 1.0 } else { 0.0 };
                    assert!((ap[be][al] - d).norm() < 1e-9);
                    assert!((bp[be][al] - pd.tau[(al, be)]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn residues_match_eigenvalues() {
        let p = random_phase_point(2, 5, 4).unwrap();
        let curve = SpectralCurve::build(&p.assemble().unwrap()).unwrap();
        let pd = PeriodData::compute(&curve, DEFAULT_QUAD_TARGET).unwrap();
        let res = pd.residues_v().unwrap();
        for (j, r) in res.iter().enumerate() {
            assert!((r[0] + r[1]).norm() < 1e-10);
            let mut mine = r.clone();
            crate::linalg::canonical_sort(&mut mine);
            let mut expect = p.eigenvalues[j].clone();
            crate::linalg::canonical_sort(&mut expect);
            for (a, b) in mine.iter().zip(&expect) {
                assert!((a - b).norm() < 1e-10, "{a} vs {b}");
            }
            let q1 = residue_by_circle(&curve, j, 1, 0.05, 64).unwrap();
            let q2 = residue_by_circle(&curve, j, 1, 0.025, 64).unwrap();
            assert!((q1 - r[0]).norm() < 1e-10 && (q2 - r[0]).norm() < 1e-10);
        }
    }

    #[test]
    fn action_periods_flip_with_orientation() {
        let pd = random_periods(4, 5);
        let (i1, _) = pd.action_periods(1e-12).unwrap();
        let curve = &pd.curve;
        let f = |z: C64, w: C64| vec![w / curve.pole_product(z)];
        let rev: Cycle = vec![(pd.basis.a[0][0].0, -1)];
        let (v, _) = pd.basis.integrate(&rev, &f, 1, 1e-12).unwrap();
        assert!((v[0] + i1[0]).norm() < 1e-9);
        let (i2, _) = pd.action_periods(1e-13).unwrap();
        assert!((i1[0] - i2[0]).norm() < 1e-9);
    }

    #[test]
    fn abel_map_involution_about_e_star() {
        let pd = random_periods(5, 6);
        let ctx = AbelContext::new(pd, 1e-12).unwrap();
        let z = c(0.3, -0.45);
        let u1 = ctx.abel_map(&ctx.curve().point(z, 1).unwrap()).unwrap();
        let u2 = ctx.abel_map(&ctx.curve().point(z, 2).unwrap()).unwrap();
        for al in 0..2 {
            let a = u1[al] - ctx.u_e_star[al];
            let b = u2[al] - ctx.u_e_star[al];
            assert!((a + b).norm() < 1e-12);
        }
        let zero = ctx.abel_map(&ctx.curve().point(ctx.curve().anchor, 1).unwrap()).unwrap();
        assert!(zero.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn abel_map_of_branch_points_is_a_half_period() {
        let pd = random_periods(5, 7);
        let ctx = AbelContext::new(pd, 1e-12).unwrap();
        for e in ctx.curve().branch_points.clone() {
            let u = ctx.abel_branch_point(e).unwrap();
            let d: Vec<C64> = u.iter().zip(&ctx.u_e_star).map(|(a, b)| 2.0 * (a - b)).collect();
            assert!(lattice_distance(&ctx.periods.tau, &d) < 1e-9);
        }
    }

    #[test]
    fn lattice_reduction_recovers_shift() {
        let pd = random_periods(5, 8);
        let tau = &pd.tau;
        let base = vec![c(0.1, 0.05), c(-0.2, 0.1)];
        let red0 = reduce_mod_lattice(tau, &base);
        let shifted: Vec<C64> = (0..2)
            .map(|i| base[i] + 3.0 - (tau[(i, 0)] * 2.0) + tau[(i, 1)])
            .collect();
        let red = reduce_mod_lattice(tau, &shifted);
        assert_eq!(red.n, vec![red0.n[0] + 3, red0.n[1] + 3]);
        assert_eq!(red.m, vec![red0.m[0] - 2, red0.m[1] + 1]);
        let diff: Vec<C64> = red.reduced.iter().zip(&red0.reduced).map(|(a, b)| a - b).collect();
        assert!(max_abs(&CMat::from_column_slice(2, 1, &diff)) < 1e-12);
    }
}
