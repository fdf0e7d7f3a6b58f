//! Period matrix of an elliptic quartic against the AGM closed form, and the
//! Riemann relations of a random genus-two curve.

use szego_spectral::curve::SpectralCurve;
use szego_spectral::linalg::C64;
use szego_spectral::periods::{agm_tau, PeriodData};
use szego_spectral::poly::Poly;
use szego_spectral::ratmat::random_phase_point;

fn main() -> szego_spectral::Result<()> {
    let roots: Vec<C64> = [0.0, 1.0, 2.0, 3.0].iter().map(|&r| C64::new(r, 0.0)).collect();
    let quartic = SpectralCurve::from_hyperelliptic(Poly::from_roots(&roots, C64::new(1.0, 0.0)))?;
    let pd = PeriodData::compute(&quartic, 1e-12)?;
    let agm = agm_tau(&quartic).expect("four real branch points");
    println!("tau {:.15}", pd.tau[(0, 0)]);
    println!("agm {agm:.15}");

    let p = random_phase_point(2, 5, 2)?;
    let curve = SpectralCurve::build(&p.assemble()?)?;
    let pd = PeriodData::compute(&curve, 1e-12)?;
    println!("genus {} tau {:.6}", pd.genus(), pd.tau);
    println!("symmetry defect {:.1e}, Im tau > 0: {}", pd.symmetry_defect(), pd.im_tau_positive());
    let (actions, err) = pd.action_periods(1e-12)?;
    println!("actions {actions:?} (quadrature error {err:.1e})");
    Ok(())
}
