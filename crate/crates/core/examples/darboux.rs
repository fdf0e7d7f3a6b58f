//! Contractions of the potential and the symplectic form in spectral
//! coordinates, by finite differences through the inverse transform.

use szego_spectral::ratmat::random_phase_point;
use szego_spectral::symplectic::{FdConfig, SymplecticContext};

fn main() -> szego_spectral::Result<()> {
    let p = random_phase_point(2, 4, 1)?;
    let ctx = SymplecticContext::from_point(&p, None, FdConfig::default(), 1e-12)?;
    let r = ctx.verify_darboux(3, 1)?;
    for c in &r.contractions {
        println!(
            "theta(d/d{:<4}) = {:.6}  expected {:.6}  witness {:.1}",
            c.label(),
            c.value,
            c.expected,
            c.witness_ratio
        );
    }
    println!("random pairs {:.2e}", r.pairs_mismatch());
    println!("leaf pairs   {:.2e}", r.leaf_mismatch());
    println!("gamma pairs  {:.2e}", r.gamma_mismatch());
    Ok(())
}
