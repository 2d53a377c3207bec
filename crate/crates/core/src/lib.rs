//! Magneto-geostrophic active scalar toolkit.
//!
//! * [`symbols`]: Fourier multipliers of the velocity and magnetic field.
//! * [`spectrum`]: unstable eigenvalues of the linearised operator.
//! * [`field`], [`gevrey`]: spectral fields and analyticity diagnostics.
//! * [`evolution`]: linear and nonlinear pseudo-spectral solvers.

pub mod error;
pub mod evolution;
pub mod field;
pub mod gevrey;
pub mod spectrum;
pub mod symbols;

pub use error::{MgError, Result};
pub use field::SpectralField;
pub use spectrum::{ModeParams, UnstableMode};
pub use symbols::{PhysicalParams, Wavevector};
