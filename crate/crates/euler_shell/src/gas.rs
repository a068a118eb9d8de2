//! Polytropic gas algebra and the shell metric.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Gas constants of a polytropic gas `p = A(s) ρ^γ`, `A(s) = k0 exp(s / c_v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasConstants {
    pub gamma: f64,
    pub c_v: f64,
    pub k0: f64,
}

impl GasConstants {
    pub fn new(gamma: f64, c_v: f64, k0: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(c_v > 0.0) || !(k0 > 0.0) {
            return Err(Error::Domain(format!("c_v and k0 must be positive, got {c_v}, {k0}")));
        }
        Ok(GasConstants { gamma, c_v, k0 })
    }

    /// Gas with `c_v = k0 = 1`.
    pub fn with_gamma(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0, 1.0)
    }

    /// Entropy `s = c_v ln(A / k0)`.
    pub fn entropy(&self, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return Err(Error::Domain(format!("entropy function must be positive, got {a}")));
        }
        Ok(self.c_v * (a / self.k0).ln())
    }

    /// Entropy function `A(s) = k0 exp(s / c_v)`.
    pub fn entropy_function_of(&self, s: f64) -> f64 {
        self.k0 * (s / self.c_v).exp()
    }

    /// Density from entropy function and pressure, the inverse of `A = p ρ^{-γ}`.
    pub fn rho_from_entropy(&self, a: f64, p: f64) -> Result<f64> {
        if !(a > 0.0) || !(p > 0.0) {
            return Err(Error::Domain(format!("A and p must be positive, got {a}, {p}")));
        }
        Ok((p / a).powf(1.0 / self.gamma))
    }

    /// Squared sound speed from `p` and `ρ`.
    pub fn c2(&self, p: f64, rho: f64) -> f64 {
        self.gamma * p / rho
    }
}

/// Pointwise gas state: radial velocity `u0`, tangential velocity `ut` in the
/// orthonormal (θ, φ) frame, pressure and density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub u0: f64,
    pub ut: [f64; 2],
    pub p: f64,
    pub rho: f64,
}

impl FlowState {
    pub fn new(u0: f64, ut: [f64; 2], p: f64, rho: f64) -> Result<Self> {
        let s = FlowState { u0, ut, p, rho };
        s.check()?;
        Ok(s)
    }

    /// Radial flow state.
    pub fn radial(u0: f64, p: f64, rho: f64) -> Result<Self> {
        Self::new(u0, [0.0, 0.0], p, rho)
    }

    fn check(&self) -> Result<()> {
        if !(self.p > 0.0) || !(self.rho > 0.0) {
            return Err(Error::Domain(format!("p and rho must be positive, got {}, {}", self.p, self.rho)));
        }
        if !(self.u0.is_finite() && self.ut[0].is_finite() && self.ut[1].is_finite()) {
            return Err(Error::Domain("velocity must be finite".into()));
        }
        Ok(())
    }

    pub fn speed2(&self) -> f64 {
        self.u0 * self.u0 + self.ut[0] * self.ut[0] + self.ut[1] * self.ut[1]
    }

    pub fn sound_speed(&self, gas: &GasConstants) -> Result<f64> {
        self.check()?;
        Ok(gas.c2(self.p, self.rho).sqrt())
    }

    /// Bernoulli constant `|u|²/2 + c²/(γ−1)`.
    pub fn bernoulli(&self, gas: &GasConstants) -> Result<f64> {
        self.check()?;
        Ok(0.5 * self.speed2() + gas.c2(self.p, self.rho) / (gas.gamma - 1.0))
    }

    /// Entropy function `A = p ρ^{-γ}`.
    pub fn entropy_function(&self, gas: &GasConstants) -> Result<f64> {
        self.check()?;
        Ok(self.p * self.rho.powf(-gas.gamma))
    }

    /// Mach number `|u| / c`.
    pub fn mach(&self, gas: &GasConstants) -> Result<f64> {
        Ok(self.speed2().sqrt() / self.sound_speed(gas)?)
    }
}

/// Radial velocity from `(E, A, p)` and tangential speed squared; `None` if
/// the kinetic energy left for the radial component is negative.
pub fn radial_speed(gas: &GasConstants, e: f64, a: f64, p: f64, wt2: f64) -> Option<f64> {
    let rho = (p / a).powf(1.0 / gas.gamma);
    let k = 2.0 * (e - gas.c2(p, rho) / (gas.gamma - 1.0)) - wt2;
    if k > 0.0 {
        Some(k.sqrt())
    } else {
        None
    }
}

/// Nonzero Christoffel symbols `Γ^k_{ij}` of `dr² + r²(dθ² + sin²θ dφ²)`,
/// indexed `[k][i][j]` with coordinates `(r, θ, φ)`.
pub fn christoffel(r: f64, theta: f64) -> [[[f64; 3]; 3]; 3] {
    let (s, c) = theta.sin_cos();
    let mut g = [[[0.0; 3]; 3]; 3];
    g[0][1][1] = -r;
    g[0][2][2] = -r * s * s;
    g[1][0][1] = 1.0 / r;
    g[1][1][0] = 1.0 / r;
    g[1][2][2] = -s * c;
    g[2][0][2] = 1.0 / r;
    g[2][2][0] = 1.0 / r;
    g[2][1][2] = c / s;
    g[2][2][1] = c / s;
    g
}

/// Diagonal of the shell metric `G = diag(1, r², r² sin²θ)`.
pub fn metric_diag(r: f64, theta: f64) -> [f64; 3] {
    let s = theta.sin();
    [1.0, r * r, r * r * s * s]
}
