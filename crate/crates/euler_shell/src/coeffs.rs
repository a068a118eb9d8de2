//! Linearization coefficients of the pressure equation and the boundary
//! constants of the transonic problem.
//!
//! `b, e, d1, d2` are the closed-form coefficients of the linearized pressure
//! operator in terms of the squared Mach number `t`. The shock constants
//! `μ1..μ6, γ2, γ3` have no closed form; they are obtained by central
//! differences with Richardson extrapolation of exact nonlinear maps built
//! from the normal-shock relations and the exact boundary functional.

use crate::background::{normal_shock_jump, RadialProfile, TransonicBackground};
use crate::error::{Error, Result};
use crate::gas::FlowState;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `γ(1+2γ)t⁴ + (−4γ²+2γ−3)t³ + (14−7γ)t² − 19t + 6`.
pub fn stability_poly(gamma: f64, t: f64) -> f64 {
    let g = gamma;
    g * (1.0 + 2.0 * g) * t.powi(4) + (-4.0 * g * g + 2.0 * g - 3.0) * t.powi(3) + (14.0 - 7.0 * g) * t * t - 19.0 * t
        + 6.0
}

/// Coefficients `b, e, d1, d2` of the linearized pressure operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureCoeffs {
    pub b: f64,
    pub e: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Closed-form `b(t), e(t), d1(t), d2(t)`.
pub fn linearization_coeffs(gamma: f64, t: f64) -> Result<PressureCoeffs> {
    if !(gamma > 1.0) {
        return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be a nonnegative number, got {t}")));
    }
    if (t - 1.0).abs() <= 1e-14 {
        return Err(Error::Pole);
    }
    let g = gamma;
    let tm1 = t - 1.0;
    let tm1_3 = tm1 * tm1 * tm1;
    let b = ((1.0 + 2.0 * g) * t * t - 3.0 * t + 4.0) / (2.0 * tm1);
    let e = 2.0 / tm1_3
        * (g * (1.0 + 2.0 * g) * t.powi(4) + (-4.0 * g * g + 2.0 * g - 3.0) * t.powi(3) + (14.0 - 7.0 * g) * t * t
            - 19.0 * t
            + 6.0);
    let q = (2.0 * g - 3.0) * t * t + 8.0 * t - 3.0;
    let d1 = 4.0 / tm1_3 * q;
    let d2 = -2.0 / (g - 1.0) / tm1_3 * (2.0 + (g - 1.0) * t) * q;
    Ok(PressureCoeffs { b, e, d1, d2 })
}

/// Robin constant `(2/r)(γM⁴ − M² + 2)/(M² − 1)²` of the exit condition.
pub fn gamma1_value(gamma: f64, mach: f64, r: f64) -> Result<f64> {
    if !(mach >= 0.0 && mach < 1.0) {
        return Err(Error::Precondition(format!("background must be subsonic, M = {mach}")));
    }
    let m2 = mach * mach;
    Ok(2.0 / r * (gamma * m2 * m2 - m2 + 2.0) / ((m2 - 1.0) * (m2 - 1.0)))
}

/// `γ1` of a subsonic profile at the exit radius `r1`.
pub fn gamma1(background: &RadialProfile, r1: f64) -> Result<f64> {
    gamma1_value(background.gas.gamma, background.mach(r1), r1)
}

/// Shock constants of a transonic background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuConstants {
    /// `μ0 … μ9`.
    pub mu: [f64; 10],
    pub gamma2: f64,
    pub gamma3: f64,
}

/// Radial shock at `r` fed by the upstream branch, minus the downstream
/// branch: differences of `(u⁰, p, ρ, A)`.
pub fn shock_offset(tb: &TransonicBackground, r: f64) -> Result<[f64; 4]> {
    let gas = tb.gas;
    let up = tb.supersonic.flow_state(r);
    let down = normal_shock_jump(&up, &gas)?;
    let bg = tb.subsonic.flow_state(r);
    Ok([
        down.u0 - bg.u0,
        down.p - bg.p,
        down.rho - bg.rho,
        down.entropy_function(&gas)? - bg.entropy_function(&gas)?,
    ])
}

/// Central-difference slope of `f` at `x` with step `h`.
pub fn central_slope<F: FnMut(f64) -> Result<[f64; 4]>>(f: &mut F, x: f64, h: f64) -> Result<[f64; 4]> {
    let a = f(x + h)?;
    let b = f(x - h)?;
    Ok(std::array::from_fn(|k| (a[k] - b[k]) / (2.0 * h)))
}

/// Richardson-extrapolated central difference from steps `h` and `h/2`.
pub fn richardson_slope<F: FnMut(f64) -> Result<[f64; 4]>>(f: &mut F, x: f64, h: f64) -> Result<[f64; 4]> {
    let d1 = central_slope(f, x, h)?;
    let d2 = central_slope(f, x, 0.5 * h)?;
    Ok(std::array::from_fn(|k| (4.0 * d2[k] - d1[k]) / 3.0))
}

/// Exact boundary functional `∂₀p + 2γp(u⁰)²/(x⁰((u⁰)² − c²)) − G1` on a
/// spherical front at `r_b + δ` carrying the radial shock state, with the
/// normal pressure derivative perturbed by `q` and tangential codifferential `d`.
pub fn front_functional(tb: &TransonicBackground, delta: f64, q: f64, d: f64) -> Result<f64> {
    let gas = tb.gas;
    let g = gas.gamma;
    let x0 = tb.r_b() + delta;
    let up = tb.supersonic.flow_state(x0);
    let s = normal_shock_jump(&up, &gas)?;
    let dp_b = tb.subsonic.jet(x0).dy[1];
    let c2 = gas.c2(s.p, s.rho);
    let u2 = s.u0 * s.u0;
    let robin = 2.0 * g * s.p * u2 / (x0 * (u2 - c2));
    let g1 = s.rho * s.u0 / ((u2 / c2 - 1.0) * x0 * x0) * d;
    Ok(dp_b + q + robin - g1)
}

/// Step used for all numerical linearizations at the shock.
pub fn default_step(tb: &TransonicBackground) -> f64 {
    1e-5 * tb.r_b()
}

/// `μ0 … μ9, γ2, γ3` of a transonic background.
pub fn mu_constants(tb: &TransonicBackground) -> Result<MuConstants> {
    mu_constants_with_step(tb, default_step(tb))
}

/// As [`mu_constants`] with an explicit difference step.
pub fn mu_constants_with_step(tb: &TransonicBackground, h: f64) -> Result<MuConstants> {
    let r_b = tb.r_b();
    if !(h > 0.0 && h < tb.h_sharp.min(tb.h_up)) {
        return Err(Error::Precondition(format!("difference step {h} outside the extension interval")));
    }
    let (up, down) = tb.shock_states();
    let mu0 = down.rho * down.u0 / (down.p - up.p);
    let slopes = richardson_slope(&mut |r| shock_offset(tb, r), r_b, h)?;
    let [mu1, mu2, mu3, mu4] = slopes;
    let rd = richardson_slope(
        &mut |dl| {
            let v = front_functional(tb, dl, 0.0, 0.0)?;
            Ok([v, 0.0, 0.0, 0.0])
        },
        0.0,
        h,
    )?[0];
    let gamma2 = rd / mu2;
    let gamma3 = -(front_functional(tb, 0.0, 0.0, 1.0)? - front_functional(tb, 0.0, 0.0, -1.0)?) / 2.0;
    let mu5 = 1.0 / gamma3;
    let mu6 = gamma2 * mu2 / gamma3;
    let mu7 = -mu0 * mu6;
    let mu8 = -mu2 * mu5 / (4.0 * PI * mu6);
    let mu9 = -mu0 * mu2 * mu5;
    let out = MuConstants { mu: [mu0, mu1, mu2, mu3, mu4, mu5, mu6, mu7, mu8, mu9], gamma2, gamma3 };
    out.check_signs()?;
    Ok(out)
}

impl MuConstants {
    /// Sign pattern required by the linearized front conditions.
    pub fn check_signs(&self) -> Result<()> {
        let m = &self.mu;
        let checks = [
            (m[0] > 0.0, "mu0 > 0"),
            (m[5] < 0.0, "mu5 < 0"),
            (m[6] > 0.0, "mu6 > 0"),
            (m[7] < 0.0, "mu7 < 0"),
            (m[8] < 0.0, "mu8 < 0"),
            (m[9] < 0.0, "mu9 < 0"),
            (self.gamma2 > 0.0, "gamma2 > 0"),
            (self.gamma3 < 0.0, "gamma3 < 0"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::LinearizationInconsistency(format!("{what} fails: {self:?}")));
            }
        }
        Ok(())
    }
}

/// Coefficients `e1..e5` of the nonlocal pressure operator along the
/// downstream branch.
#[derive(Debug, Clone)]
pub struct ECoeffs {
    pub gamma: f64,
    pub ratio_mu4_mu2: f64,
    pub profile: RadialProfile,
    pub r_lo: f64,
    pub r_hi: f64,
}

/// Build `e1..e5` for a transonic background.
pub fn e_coeffs(tb: &TransonicBackground, mu: &MuConstants) -> Result<ECoeffs> {
    let r_lo = tb.r_b();
    let r_hi = tb.params.r1;
    for i in 0..=16 {
        let r = r_lo + (r_hi - r_lo) * i as f64 / 16.0;
        if !(tb.subsonic.t(r) < 1.0) {
            return Err(Error::Precondition(format!("downstream branch not subsonic at r = {r}")));
        }
    }
    Ok(ECoeffs { gamma: tb.gas.gamma, ratio_mu4_mu2: mu.mu[4] / mu.mu[2], profile: tb.subsonic.clone(), r_lo, r_hi })
}

impl ECoeffs {
    /// `[e1, e2, e3, e4, e5]` at `y⁰`.
    pub fn eval(&self, y0: f64) -> Result<[f64; 5]> {
        let st = self.profile.state(y0);
        let t = self.profile.t(y0);
        let c = linearization_coeffs(self.gamma, t)?;
        let rho = st[2];
        Ok([
            y0 * y0 * (t - 1.0),
            4.0 * y0 * c.b,
            c.e,
            self.ratio_mu4_mu2 * rho.powf(self.gamma) * c.d2,
            -rho * c.d1,
        ])
    }
}

/// Coefficients of the subsonic pressure operator multiplied by `(x⁰)²`:
/// `[x²(t−1), 4x b, e, 0]` and the source factors `[ρ_b d1, ρ_b^γ d2]`.
#[derive(Debug, Clone)]
pub struct SubsonicOperatorCoeffs {
    pub gamma: f64,
    pub profile: RadialProfile,
}

impl SubsonicOperatorCoeffs {
    pub fn new(profile: &RadialProfile) -> Self {
        SubsonicOperatorCoeffs { gamma: profile.gas.gamma, profile: profile.clone() }
    }

    pub fn eval(&self, x: f64) -> Result<[f64; 4]> {
        let t = self.profile.t(x);
        let c = linearization_coeffs(self.gamma, t)?;
        Ok([x * x * (t - 1.0), 4.0 * x * c.b, c.e, 0.0])
    }

    /// `[ρ_b d1, ρ_b^γ d2]` at `x`.
    pub fn source_factors(&self, x: f64) -> Result<[f64; 2]> {
        let t = self.profile.t(x);
        let c = linearization_coeffs(self.gamma, t)?;
        let rho = self.profile.state(x)[2];
        Ok([rho * c.d1, rho.powf(self.gamma) * c.d2])
    }
}

/// State downstream of a radial shock at `r` fed by `upstream`.
pub fn radial_shock_state(upstream: &RadialProfile, r: f64) -> Result<FlowState> {
    normal_shock_jump(&upstream.flow_state(r), &upstream.gas)
}
