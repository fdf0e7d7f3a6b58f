//! Variation of the Szegő kernel in the actions and residues against the
//! branch-point residue formula.

use szego_spectral::ratmat::random_phase_point;
use szego_spectral::symplectic::{FdConfig, SymplecticContext};

fn main() -> szego_spectral::Result<()> {
    let p = random_phase_point(2, 5, 2)?;
    let ctx = SymplecticContext::from_point(&p, None, FdConfig::default(), 1e-12)?;
    let r = ctx.szego_variation(ctx.generic_point(1), ctx.generic_point(2), &[0, 1])?;
    for e in &r.entries {
        println!("{:<4} lhs/rhs = {:.8}", e.label, e.lhs / e.rhs);
    }
    println!("best ratio {:.6}, convention mismatch: {}", r.best_ratio, r.convention_mismatch());
    Ok(())
}
