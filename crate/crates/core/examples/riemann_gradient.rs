//! Symmetry of the derivative of the vector of Riemann constants in the actions.

use szego_spectral::ratmat::random_phase_point;
use szego_spectral::symplectic::{FdConfig, SymplecticContext};

fn main() -> szego_spectral::Result<()> {
    let p = random_phase_point(2, 5, 2)?;
    let ctx = SymplecticContext::from_point(&p, None, FdConfig::default(), 1e-12)?;
    let m = ctx.riemann_gradient(ctx.generic_point(1))?;
    println!("dK/dI = {m:.6}");
    println!("asymmetry {:.1e}", ctx.verify_k_symmetry()?.asymmetry());
    Ok(())
}
