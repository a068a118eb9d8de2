//! Steady compressible Euler flows in a spherical shell: spherically symmetric
//! backgrounds and transonic shocks, linearization coefficients, spectral
//! elliptic mode solvers, transport along characteristics, and the fixed-point
//! iterations for subsonic stability and the transonic free-boundary problem.

pub mod elliptic;
pub mod error;
pub mod background;
pub mod coeffs;
pub mod config;
pub mod gas;
pub mod grid;
pub mod higher_order;
pub mod io;
pub mod numerics;
pub mod residual;
pub mod sphere;
pub mod subsonic;
pub mod transonic;
pub mod transport;

pub use error::{Error, Result};
pub use gas::{FlowState, GasConstants};
