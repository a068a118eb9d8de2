//! Generic numerical building blocks: ODE integration, Chebyshev collocation,
//! Gauss–Legendre quadrature, scalar root finding and forward-mode duals.

pub mod cheb;
pub mod dual;
pub mod ode;
pub mod quad;
pub mod roots;
