//! Fay's trisecant identity, the sheet sum and the q-variation of the Szegő
//! kernel at a few points of a genus-two curve.

use szego_spectral::linalg::C64;
use szego_spectral::ratmat::random_phase_point;
use szego_spectral::curve::SpectralCurve;
use szego_spectral::theta::SurfaceKernels;

fn main() -> szego_spectral::Result<()> {
    let p = random_phase_point(2, 5, 2)?;
    let k = SurfaceKernels::from_curve(&SpectralCurve::build(&p.assemble()?)?, 1e-12)?;
    let q = vec![C64::new(0.31, 0.17), C64::new(-0.12, 0.08)];

    let x = k.mark_at(C64::new(0.35, 0.6), 1)?;
    let y = k.mark_at(C64::new(-0.7, 0.25), 2)?;
    let fay = k.verify_fay(&q, &[(x.clone(), y.clone())])?;
    println!("Fay residual {:.1e}", fay.max_relative_residual);
    println!("sheet sum residual {:.1e}", k.sheet_sum_residual(&q, &x, &y, C64::new(0.1, -0.9))?);

    let y1 = k.mark_at(C64::new(-0.7, 0.25), 1)?;
    for gamma in 0..k.genus() {
        let n = k.a_crossing(gamma, &x, &y1)?;
        if n == 0 {
            println!("dq_{gamma} mismatch {:.1e}", k.dq_szego_check(&q, gamma, &x, &y1, 1e-5)?);
        } else {
            println!("dq_{gamma}: lift path crosses a_{gamma} {n} times");
        }
    }
    Ok(())
}
