//! Reconstruction from two basepoints differs by one constant conjugation.

use szego_spectral::linalg::C64;
use szego_spectral::ratmat::random_phase_point;
use szego_spectral::transform::{direct, z0_independence};

fn main() -> szego_spectral::Result<()> {
    let p = random_phase_point(2, 4, 1)?;
    let data = direct(&p, None, 1e-12)?.data;
    let z0 = data.curve.anchor;
    let z1 = z0 + C64::new(0.2, 0.25);
    let samples: Vec<C64> = (0..10).map(|i| z0 + C64::from_polar(0.6 + 0.1 * i as f64, 0.9 * i as f64)).collect();
    let r = z0_independence(&data, z0, z1, &samples, 1e-12)?;
    println!("conjugation residual {:.1e}", r.conjugation_residual);
    println!("conjugator {:.6}", r.conjugator);
    Ok(())
}
