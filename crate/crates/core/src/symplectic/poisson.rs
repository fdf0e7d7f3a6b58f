//! The dynamical r-matrix bracket on pairs `(G, L)` and the bracket it
//! induces on `A = G L G^-1`.

use crate::error::{Error, Result};
use crate::linalg::{diag, inverse, min_pairwise_gap, CMat, C64};

/// A coordinate function on the pair `(G, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    /// `G_(b, j)`.
    G(usize, usize),
    /// `lambda_l`.
    Lambda(usize),
}

/// `{f, h}_0` for two coordinate functions.
///
/// `{G_bj, G_cl} = G_bl G_cj / (lambda_j - lambda_l)` for `j != l` and zero otherwise,
/// `{G_bk, lambda_l} = -G_bk delta_lk`, `{lambda, lambda} = 0`.
pub fn poisson_bracket(g: &CMat, lambda: &[C64], f: Observable, h: Observable) -> Result<C64> {
    let zero = C64::new(0.0, 0.0);
    Ok(match (f, h) {
        (Observable::G(b, j), Observable::G(c, l)) => {
            if j == l {
                zero
            } else {
                let d = lambda[j] - lambda[l];
                if d.norm() == 0.0 {
                    return Err(Error::DegenerateSpectrum { gap: 0.0 });
                }
                g[(b, l)] * g[(c, j)] / d
            }
        }
        (Observable::G(b, k), Observable::Lambda(l)) => {
            if k == l {
                -g[(b, k)]
            } else {
                zero
            }
        }
        (Observable::Lambda(_), Observable::G(_, _)) => -poisson_bracket(g, lambda, h, f)?,
        (Observable::Lambda(_), Observable::Lambda(_)) => zero,
    })
}

fn observables(n: usize) -> Vec<Observable> {
    let mut out: Vec<Observable> = (0..n).flat_map(|b| (0..n).map(move |j| Observable::G(b, j))).collect();
    out.extend((0..n).map(Observable::Lambda));
    out
}

/// `dA_ab / d(obs)` for every observable, as matrices.
fn gradients(g: &CMat, lambda: &[C64]) -> Result<Vec<CMat>> {
    let n = g.nrows();
    let gi = inverse(g)?;
    let l = diag(lambda);
    let a = g * &l * &gi;
    let mut out = Vec::new();
    for obs in observables(n) {
        let d = match obs {
            Observable::G(p, q) => {
                let mut e = CMat::zeros(n, n);
                e[(p, q)] = C64::new(1.0, 0.0);
                // dA = dG L G^-1 - A dG G^-1
                &e * &l * &gi - &a * &e * &gi
            }
            Observable::Lambda(k) => {
                let mut e = CMat::zeros(n, n);
                e[(k, k)] = C64::new(1.0, 0.0);
                g * e * &gi
            }
        };
        out.push(d);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct KkReport {
    pub n: usize,
    /// `chain[(a n + b, c n + d)] = {A_ab, A_cd}` by the chain rule.
    pub chain: CMat,
    /// `delta_cb A_ad - delta_ad A_cb`.
    pub closed_form: CMat,
    pub residual: f64,
    pub antisymmetry: f64,
}

/// Chain-rule bracket of the entries of `A = G L G^-1` against the
/// Kirillov-Kostant form.
pub fn verify_induced_kk(g: &CMat, lambda: &[C64]) -> Result<KkReport> {
    let n = g.nrows();
    let scale = lambda.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
    let gap = min_pairwise_gap(lambda);
    if gap < 1e-10 * scale {
        return Err(Error::DegenerateSpectrum { gap });
    }
    let obs = observables(n);
    let grads = gradients(g, lambda)?;
    let mut pb = CMat::zeros(obs.len(), obs.len());
    for (i, &f) in obs.iter().enumerate() {
        for (k, &h) in obs.iter().enumerate() {
            pb[(i, k)] = poisson_bracket(g, lambda, f, h)?;
        }
    }
    let gi = inverse(g)?;
    let a = g * diag(lambda) * gi;
    let nn = n * n;
    let mut chain = CMat::zeros(nn, nn);
    let mut closed = CMat::zeros(nn, nn);
    for r in 0..nn {
        let (ai, bi) = (r / n, r % n);
        for s in 0..nn {
            let (ci, di) = (s / n, s % n);
            let mut acc = C64::new(0.0, 0.0);
            for (i, gi) in grads.iter().enumerate() {
                for (k, gk) in grads.iter().enumerate() {
                    acc += gi[(ai, bi)] * gk[(ci, di)] * pb[(i, k)];
                }
            }
            chain[(r, s)] = acc;
            let mut cf = C64::new(0.0, 0.0);
            if ci == bi {
                cf += a[(ai, di)];
            }
            if ai == di {
                cf -= a[(ci, bi)];
            }
            closed[(r, s)] = cf;
        }
    }
    let norm = crate::linalg::max_abs(&a).max(1.0);
    let residual = crate::linalg::max_abs(&(&chain - &closed)) / norm;
    let antisymmetry = crate::linalg::max_abs(&(&chain + chain.transpose())) / norm;
    Ok(KkReport { n, chain, closed_form: closed, residual, antisymmetry })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratmat::random_phase_point;

    #[test]
    fn induced_bracket_is_kirillov_kostant() {
        for n in [2, 3] {
            let p = random_phase_point(n, 4, 5).unwrap();
            for j in 0..p.m() {
                let r = verify_induced_kk(&p.diagonalizers[j], &p.eigenvalues[j]).unwrap();
                assert!(r.residual < 1e-12, "n={n}: {:e}", r.residual);
                assert!(r.antisymmetry < 1e-13, "n={n}: {:e}", r.antisymmetry);
            }
        }
    }

    #[test]
    fn diagonal_g_kills_equal_index_entries() {
        let g = CMat::identity(3, 3);
        let l = [C64::new(1.0, 0.0), C64::new(-0.4, 0.2), C64::new(-0.6, -0.2)];
        for b in 0..3 {
            for c in 0..3 {
                for j in 0..3 {
                    let v = poisson_bracket(&g, &l, Observable::G(b, j), Observable::G(c, j)).unwrap();
                    assert_eq!(v, C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn degenerate_spectrum_rejected() {
        let g = CMat::identity(2, 2);
        let l = [C64::new(0.5, 0.0), C64::new(0.5, 0.0)];
        assert!(matches!(verify_induced_kk(&g, &l), Err(Error::DegenerateSpectrum { .. })));
    }
}
