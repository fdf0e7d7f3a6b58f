//! Bracket of residue entries induced from the canonical structure on
//! `(G, L)`, against the Kirillov-Kostant form.

use szego_spectral::ratmat::random_phase_point;
use szego_spectral::symplectic::verify_induced_kk;

fn main() -> szego_spectral::Result<()> {
    for n in [2, 3] {
        let p = random_phase_point(n, 4, 1)?;
        for j in 0..p.m() {
            let r = verify_induced_kk(&p.diagonalizers[j], &p.eigenvalues[j])?;
            println!("n={n} pole {j}: residual {:.1e}, antisymmetry {:.1e}", r.residual, r.antisymmetry);
        }
    }
    Ok(())
}
