//! Direct and inverse transform on a seeded genus-two point.

use szego_spectral::ratmat::random_phase_point;
use szego_spectral::transform::{direct, extract_coords, inverse, roundtrip};
use szego_spectral::theta::SurfaceKernels;

fn main() -> szego_spectral::Result<()> {
    let p = random_phase_point(2, 5, 2)?;
    let out = direct(&p, None, 1e-12)?;
    let d = &out.data;
    println!("genus {}, q = {:?}", d.genus(), d.q);
    println!("conjugation residual {:.2e}", out.conjugation_residual);
    println!("toric off-diagonal {:.2e}", out.toric_offdiag);

    let k = SurfaceKernels::from_curve(&d.curve, 1e-12)?;
    let c = extract_coords(d, &k, 1e-12)?;
    println!("actions {:?}", c.actions);

    let back = inverse(d, 1e-12)?;
    println!("reconstructed residues at {} poles", back.m());
    let r = roundtrip(&p, None, 1e-12, 0.0)?;
    println!("round trip: G {:.1e}, L {:.1e}, q {:.1e}, I {:.1e}", r.g_error, r.l_error, r.q_error, r.actions_error);
    Ok(())
}
