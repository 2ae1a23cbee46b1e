//! Incompressible 2D Navier-Stokes on a periodic channel with Navier
//! slip-with-friction walls and a prescribed, time-oscillating wall-normal
//! flux. The solution is built as lifting, linear Stokes evolution, and
//! nonlinear perturbation; each layer is exposed separately so the energy
//! estimates of every piece can be audited.

pub mod analysis;
pub mod boundary;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod manufactured;
pub mod nse;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod saddle;
pub mod stokes;

pub use error::{Error, Result};
pub use grid::{ChannelGrid, DeformationField, PressureField, VelocityField};
