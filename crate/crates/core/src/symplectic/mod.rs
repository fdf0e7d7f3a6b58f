//! Symplectic structures on the phase space and on the spectral data.

mod coords;
mod forms;
mod poisson;
mod reports;
mod riemann;
mod variation;
pub use coords::*;
pub use forms::*;
pub use poisson::*;
pub use reports::*;
pub use riemann::*;
pub use variation::*;
