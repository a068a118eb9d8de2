//! Free-boundary solver for a transonic shock in the shell.
//!
//! The unknowns are the shock front `x⁰ = ψ(ω)` and the subsonic flow behind
//! it. The flow is stored on the normalized shell `[r_b, r1]` with the
//! radial coordinate `y⁰` that maps the front to `y⁰ = r_b`; the pressure is
//! kept as the deviation `P̂ = p − p_b⁺(x⁰(y⁰))` from the background pressure
//! at the physical radius, and `Ê`, `Â` as deviations from the background
//! Bernoulli constant and entropy function.
//!
//! One step of the mapping transports `Ê` from the front, solves the nonlocal
//! pressure problem with the Venttsel condition on the front, updates the
//! front, transports `Â`, solves the div-curl system for the tangential
//! velocity on the front and transports the tangential velocity through the
//! shell. All boundary and interior nonlinear terms are evaluated as the exact
//! nonlinear expression minus its linear part, so a fixed point satisfies the
//! exact jump conditions and the Euler equations.

use crate::background::{normal_shock_jump, solve_transonic_background, RadialProfile, TransonicBackground, TransonicParams};
use crate::coeffs::{e_coeffs, mu_constants, ECoeffs, MuConstants};
use crate::elliptic::{check_s_condition, venttsel_solve, SConditionReport, VenttselProblem};
use crate::error::{Error, Result};
use crate::gas::{FlowState, GasConstants};
use crate::grid::{ShellField, ShellGrid};
use crate::higher_order::{
    coordinate_jets_mapped, covariant_pressure_equation, f1_transcribed, f2_transcribed, robin_terms, BackgroundPoint,
    CoordinateJet, PressurePerturbation,
};
use crate::io::fmt17;
use crate::numerics::ode::rk4_step;
use crate::numerics::roots::brent;
use crate::residual::{euler_residual_mapped, CartesianGradient, RadialMap, ResidualNorms};
use crate::sphere::{div_curl_solve, laplace_beltrami, SphCoeffs, SphereGrid};
use crate::subsonic::grid_norm;
use crate::transport::{solve_transport, CharacteristicField, Surface, TransportOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn node_frame(s: &SphereGrid, a: usize) -> [[f64; 3]; 3] {
    s.frame(a / s.n_lon, a % s.n_lon)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Unit-sphere gradient `(∂_θ f, ∂_φ f / sin θ)` of grid values.
fn sphere_gradient(s: &SphereGrid, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(s.gradient(&s.analyze(f)?))
}

/// `d*ω = −div ω` of a tangent field given by orthonormal components.
fn codifferential(s: &SphereGrid, wt: &[f64], wp: &[f64]) -> Result<Vec<f64>> {
    let (alpha, _) = s.analyze_tangent(wt, wp)?;
    Ok(s.synthesize(&laplace_beltrami(&alpha).scale(-1.0)))
}

/// Trust radius `min((r_b − r0)/4, (r1 − r_b)/4, h♯)` for `|ψ − r_b|`.
pub fn trust_radius(tb: &TransonicBackground) -> f64 {
    let p = &tb.params;
    (0.25 * (p.r_b - p.r0)).min(0.25 * (p.r1 - p.r_b)).min(tb.h_sharp)
}

/// Shock front `x⁰ = ψ(ω)` split into its position `r^p` (the mean) and its
/// mean-zero profile `ψ^p`.
#[derive(Debug, Clone)]
pub struct ShockFront {
    /// Grid values of `ψ` on the angular grid.
    pub psi: Vec<f64>,
    /// Expansion of `ψ` up to the truncation degree.
    pub coeffs: SphCoeffs,
    pub r_p: f64,
    pub psi_p: Vec<f64>,
}

impl ShockFront {
    pub fn new(sphere: &SphereGrid, psi: Vec<f64>) -> Result<Self> {
        if psi.len() != sphere.len() {
            return Err(Error::Config(format!("front has {} values, expected {}", psi.len(), sphere.len())));
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite front value".into()));
        }
        let r_p = sphere.integrate(&psi) / (4.0 * PI);
        let psi_p = psi.iter().map(|v| v - r_p).collect();
        Ok(ShockFront { coeffs: sphere.analyze(&psi)?, psi, r_p, psi_p })
    }

    /// The sphere `ψ ≡ r`.
    pub fn flat(sphere: &SphereGrid, r: f64) -> Self {
        Self::new(sphere, vec![r; sphere.len()]).expect("constant front")
    }

    /// `∫ψ^p` over the unit sphere.
    pub fn profile_integral(&self, sphere: &SphereGrid) -> f64 {
        sphere.integrate(&self.psi_p)
    }

    /// `max |ψ − r_b|`.
    pub fn max_offset(&self, r_b: f64) -> f64 {
        self.psi.iter().fold(0.0f64, |m, v| m.max((v - r_b).abs()))
    }

    /// `max |ψ^p|`.
    pub fn amplitude(&self) -> f64 {
        sup(&self.psi_p)
    }

    /// Error unless `|ψ − r_b| < bound` everywhere.
    pub fn check_trust(&self, r_b: f64, bound: f64) -> Result<()> {
        let d = self.max_offset(r_b);
        if !(d < bound) {
            return Err(Error::TrustRegion(format!("front offset {d:e} reaches the bound {bound:e}")));
        }
        Ok(())
    }

    /// CSV rows `theta,phi,psi`.
    pub fn to_csv(&self, sphere: &SphereGrid) -> String {
        let mut s = String::from("theta,phi,psi\n");
        for j in 0..sphere.n_lat {
            for k in 0..sphere.n_lon {
                let v = self.psi[j * sphere.n_lon + k];
                s.push_str(&format!("{},{},{}\n", fmt17(sphere.theta[j]), fmt17(sphere.phi[k]), fmt17(v)));
            }
        }
        s
    }
}

/// Affine change of the radial coordinate that maps the region between the
/// front and the outer sphere onto `[r_b, r1]`:
/// `y⁰ = (x⁰ − ψ)/(r1 − ψ)·(r1 − r_b) + r_b`.
#[derive(Debug, Clone)]
pub struct NormalizedDomain {
    pub r_b: f64,
    pub r1: f64,
    pub psi: Vec<f64>,
    /// Unit-sphere gradient of `ψ`.
    pub grad: [Vec<f64>; 2],
}

/// The coordinate change for `front` on the normalized grid `grid`
/// (`[r_b, r1]`); fails if the front leaves `|ψ − r_b| < bound`.
pub fn normalize_domain(front: &ShockFront, grid: &ShellGrid, bound: f64) -> Result<NormalizedDomain> {
    let (r_b, r1) = (grid.radial.a, grid.radial.b);
    front.check_trust(r_b, bound)?;
    if front.psi.len() != grid.n_ang() {
        return Err(Error::Config("front and grid have different angular grids".into()));
    }
    let (gt, gp) = sphere_gradient(&grid.sphere_full, &front.psi_p)?;
    Ok(NormalizedDomain { r_b, r1, psi: front.psi.clone(), grad: [gt, gp] })
}

impl NormalizedDomain {
    pub fn to_normalized(&self, a: usize, x0: f64) -> f64 {
        let psi = self.psi[a];
        (x0 - psi) / (self.r1 - psi) * (self.r1 - self.r_b) + self.r_b
    }

    pub fn to_physical(&self, a: usize, y0: f64) -> f64 {
        let psi = self.psi[a];
        psi + (y0 - self.r_b) * (self.r1 - psi) / (self.r1 - self.r_b)
    }

    /// `∂x⁰/∂y⁰` along the ray through node `a`.
    pub fn x_y(&self, a: usize) -> f64 {
        (self.r1 - self.psi[a]) / (self.r1 - self.r_b)
    }

    /// Radial component in the normalized coordinates of a velocity with
    /// physical components `(u⁰, u_θ, u_φ)` at `y⁰`; the tangential components
    /// are unchanged: `v⁰ = (r1 − r_b)/(r1 − ψ)·(u⁰ + (y⁰ − r1)/(r1 − r_b)·u^α∂_αψ)`.
    pub fn pushforward(&self, a: usize, y0: f64, u: [f64; 3]) -> [f64; 3] {
        let x = self.to_physical(a, y0);
        let along = (u[1] * self.grad[0][a] + u[2] * self.grad[1][a]) / x;
        let v0 = (u[0] + (y0 - self.r1) / (self.r1 - self.r_b) * along) / self.x_y(a);
        [v0, u[1], u[2]]
    }

    /// Inverse of [`NormalizedDomain::pushforward`].
    pub fn pullback(&self, a: usize, y0: f64, v: [f64; 3]) -> [f64; 3] {
        let x = self.to_physical(a, y0);
        let along = (v[1] * self.grad[0][a] + v[2] * self.grad[1][a]) / x;
        [v[0] * self.x_y(a) - (y0 - self.r1) / (self.r1 - self.r_b) * along, v[1], v[2]]
    }

    /// Physical radius, `∂X/∂y⁰` and `∇_S X` of every node of `grid`.
    pub fn radial_map(&self, grid: &ShellGrid) -> RadialMap {
        let (n, na) = (grid.len(), grid.n_ang());
        let mut m = RadialMap { x: vec![0.0; n], x_y: vec![0.0; n], gx_theta: vec![0.0; n], gx_phi: vec![0.0; n] };
        for i in 0..grid.n_r() {
            let y = grid.r(i);
            let w = (self.r1 - y) / (self.r1 - self.r_b);
            for a in 0..na {
                let q = i * na + a;
                m.x[q] = self.to_physical(a, y);
                m.x_y[q] = self.x_y(a);
                m.gx_theta[q] = w * self.grad[0][a];
                m.gx_phi[q] = w * self.grad[1][a];
            }
        }
        m
    }
}

/// Coordinate change of the normalized grid `grid` for the front values `psi`.
pub fn front_map(grid: &ShellGrid, psi: &[f64]) -> Result<RadialMap> {
    let front = ShockFront::new(&grid.sphere, psi.to_vec())?;
    Ok(normalize_domain(&front, grid, f64::INFINITY)?.radial_map(grid))
}

/// Flow state upstream of the front: Cartesian velocity, pressure, density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpstreamState {
    pub v: [f64; 3],
    pub p: f64,
    pub rho: f64,
}

impl UpstreamState {
    pub fn bernoulli(&self, gamma: f64) -> f64 {
        0.5 * dot3(&self.v, &self.v) + gamma * self.p / ((gamma - 1.0) * self.rho)
    }

    pub fn entropy_function(&self, gamma: f64) -> f64 {
        self.p * self.rho.powf(-gamma)
    }
}

/// Inflow data on the inner sphere `r = r0`: radial velocity, orthonormal
/// tangential components, pressure and density on the angular grid.
#[derive(Debug, Clone)]
pub struct InflowData {
    pub u0: Vec<f64>,
    pub ut: [Vec<f64>; 2],
    pub p: Vec<f64>,
    pub rho: Vec<f64>,
}

impl InflowData {
    /// The radial state of `profile` at `r0` on every node.
    pub fn radial(profile: &RadialProfile, sphere: &SphereGrid, r0: f64) -> Self {
        let y = profile.state(r0);
        let n = sphere.len();
        InflowData { u0: vec![y[0]; n], ut: [vec![0.0; n], vec![0.0; n]], p: vec![y[1]; n], rho: vec![y[2]; n] }
    }
}

/// Marched state per node: `(m = ρu⁰, E, A, W_x, W_y, W_z)` with `W` the
/// Cartesian tangential velocity.
type MarchState = [f64; 6];

#[derive(Debug, Clone)]
struct MarchedField {
    radii: Vec<f64>,
    vals: Vec<Vec<MarchState>>,
    ders: Vec<Vec<MarchState>>,
}

#[derive(Debug, Clone)]
enum InflowKind {
    Radial(RadialProfile),
    Marched(MarchedField),
}

/// Supersonic flow upstream of the front on `[r0, r_hi]`.
#[derive(Debug, Clone)]
pub struct SupersonicInflow {
    pub gas: GasConstants,
    pub sphere: SphereGrid,
    pub r0: f64,
    pub r_hi: f64,
    pub data: InflowData,
    kind: InflowKind,
}

/// Recover `(ρ, p, u⁰)` on the supersonic branch from a marched state.
fn recover_supersonic(gas: &GasConstants, s: &MarchState) -> Result<(f64, f64, f64)> {
    let g = gas.gamma;
    let [m, e, a, wx, wy, wz] = *s;
    let w2 = wx * wx + wy * wy + wz * wz;
    if !(m > 0.0 && a > 0.0) {
        return Err(Error::Numeric(format!("invalid marched state m = {m}, A = {a}")));
    }
    let f = |rho: f64| 0.5 * (m / rho).powi(2) + g * a * rho.powf(g - 1.0) / (g - 1.0) + 0.5 * w2 - e;
    let rho_star = (m * m / (g * a)).powf(1.0 / (g + 1.0));
    if !(f(rho_star) < 0.0) {
        return Err(Error::Numeric("supersonic flow lost supersonicity during marching".into()));
    }
    let rho = brent(f, 1e-8 * rho_star, rho_star, 1e-16 * rho_star, 300)?;
    Ok((rho, a * rho.powf(g), m / rho))
}

/// `d/dr` of the marched state on one sphere.
fn march_rhs(gas: &GasConstants, full: &SphereGrid, r: f64, s: &[MarchState]) -> Result<Vec<MarchState>> {
    let n = s.len();
    let rec: Vec<(f64, f64, f64)> = s.iter().map(|x| recover_supersonic(gas, x)).collect::<Result<_>>()?;
    let frames: Vec<[[f64; 3]; 3]> = (0..n).map(|a| node_frame(full, a)).collect();
    let comp = |k: usize| s.iter().map(|x| x[k]).collect::<Vec<f64>>();
    let mut grads = Vec::with_capacity(5);
    for k in 1..6 {
        grads.push(sphere_gradient(full, &comp(k))?);
    }
    let p: Vec<f64> = rec.iter().map(|x| x.1).collect();
    let gp = sphere_gradient(full, &p)?;
    let wt: Vec<f64> = (0..n).map(|a| dot3(&frames[a][1], &[s[a][3], s[a][4], s[a][5]])).collect();
    let wp: Vec<f64> = (0..n).map(|a| dot3(&frames[a][2], &[s[a][3], s[a][4], s[a][5]])).collect();
    let rwt: Vec<f64> = (0..n).map(|a| rec[a].0 * wt[a]).collect();
    let rwp: Vec<f64> = (0..n).map(|a| rec[a].0 * wp[a]).collect();
    let div_neg = codifferential(full, &rwt, &rwp)?;
    Ok((0..n)
        .map(|a| {
            let (rho, _, u) = rec[a];
            let fr = &frames[a];
            let along = |k: usize| (wt[a] * grads[k].0[a] + wp[a] * grads[k].1[a]) / r;
            let w = [s[a][3], s[a][4], s[a][5]];
            let w2 = dot3(&w, &w);
            let mut d = [0.0; 6];
            d[0] = -2.0 * s[a][0] / r + div_neg[a] / r;
            d[1] = -along(0) / u;
            d[2] = -along(1) / u;
            for c in 0..3 {
                let gpc = gp.0[a] * fr[1][c] + gp.1[a] * fr[2][c];
                d[3 + c] = (-along(2 + c) - u / r * w[c] - gpc / (r * rho) - w2 / r * fr[0][c]) / u;
            }
            d
        })
        .collect())
}

/// Integrate the steady Euler equations outward from supersonic data on
/// `r = r0` up to `r_hi` with `n_steps` RK4 steps in `r`; angular derivatives
/// are spectral on the grid `sphere`.
pub fn solve_supersonic(
    gas: GasConstants,
    sphere: &SphereGrid,
    r0: f64,
    r_hi: f64,
    data: InflowData,
    n_steps: usize,
) -> Result<SupersonicInflow> {
    let n = sphere.len();
    let g = gas.gamma;
    for (name, v) in [("u0", &data.u0), ("ut_theta", &data.ut[0]), ("ut_phi", &data.ut[1]), ("p", &data.p), ("rho", &data.rho)] {
        if v.len() != n {
            return Err(Error::Config(format!("inflow {name} has {} values, expected {n}", v.len())));
        }
    }
    if !(r_hi > r0 && r0 > 0.0) || n_steps == 0 {
        return Err(Error::Config(format!("invalid marching interval [{r0}, {r_hi}] or step count {n_steps}")));
    }
    let full = sphere.with_degree((sphere.n_lat - 1).min((sphere.n_lon - 1) / 2))?;
    let mut s: Vec<MarchState> = Vec::with_capacity(n);
    for a in 0..n {
        let (u, p, rho) = (data.u0[a], data.p[a], data.rho[a]);
        let (wt, wp) = (data.ut[0][a], data.ut[1][a]);
        if !(p > 0.0 && rho > 0.0) {
            return Err(Error::Domain("inflow pressure and density must be positive".into()));
        }
        if !(u * u > g * p / rho) || !(u > 0.0) {
            return Err(Error::Precondition(format!("inflow radial velocity {u} is not supersonic")));
        }
        let fr = node_frame(sphere, a);
        let e = 0.5 * (u * u + wt * wt + wp * wp) + g * p / ((g - 1.0) * rho);
        s.push([rho * u, e, p * rho.powf(-g), wt * fr[1][0] + wp * fr[2][0], wt * fr[1][1] + wp * fr[2][1], wt * fr[1][2] + wp * fr[2][2]]);
    }
    let h = (r_hi - r0) / n_steps as f64;
    let flat = |v: &[MarchState]| v.iter().flat_map(|x| x.iter().copied()).collect::<Vec<f64>>();
    let unflat = |v: &[f64]| v.chunks(6).map(|c| std::array::from_fn(|k| c[k])).collect::<Vec<MarchState>>();
    let mut radii = vec![r0];
    let mut ders = vec![march_rhs(&gas, &full, r0, &s)?];
    let mut vals = vec![s.clone()];
    let mut y = flat(&s);
    let mut err: Option<Error> = None;
    for k in 0..n_steps {
        let r = r0 + k as f64 * h;
        let mut out = vec![0.0; y.len()];
        let mut f = |rr: f64, yy: &[f64], o: &mut [f64]| match march_rhs(&gas, &full, rr, &unflat(yy)) {
            Ok(d) => o.copy_from_slice(&flat(&d)),
            Err(e) => {
                err.get_or_insert(e);
                o.iter_mut().for_each(|v| *v = 0.0);
            }
        };
        rk4_step(&mut f, r, &y, h, &mut out);
        if let Some(e) = err.take() {
            return Err(e);
        }
        let mut st = unflat(&out);
        for (a, x) in st.iter_mut().enumerate() {
            let rh = node_frame(sphere, a)[0];
            let wr = x[3] * rh[0] + x[4] * rh[1] + x[5] * rh[2];
            for c in 0..3 {
                x[3 + c] -= wr * rh[c];
            }
        }
        let rn = if k + 1 == n_steps { r_hi } else { r + h };
        ders.push(march_rhs(&gas, &full, rn, &st)?);
        radii.push(rn);
        y = flat(&st);
        vals.push(st);
    }
    Ok(SupersonicInflow { gas, sphere: sphere.clone(), r0, r_hi, data, kind: InflowKind::Marched(MarchedField { radii, vals, ders }) })
}

impl SupersonicInflow {
    /// The supersonic branch of a background, used exactly.
    pub fn radial(profile: &RadialProfile, sphere: &SphereGrid, r0: f64, r_hi: f64) -> Self {
        SupersonicInflow {
            gas: profile.gas,
            sphere: sphere.clone(),
            r0,
            r_hi,
            data: InflowData::radial(profile, sphere, r0),
            kind: InflowKind::Radial(profile.clone()),
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.kind, InflowKind::Radial(_))
    }

    /// State at node `a` of the angular grid and radius `r`.
    pub fn at(&self, a: usize, r: f64) -> Result<UpstreamState> {
        if !(r >= self.r0 - 1e-12 && r <= self.r_hi + 1e-12) {
            return Err(Error::TrustRegion(format!("radius {r} outside the supersonic region [{}, {}]", self.r0, self.r_hi)));
        }
        let fr = node_frame(&self.sphere, a);
        match &self.kind {
            InflowKind::Radial(p) => {
                let y = p.state(r);
                Ok(UpstreamState { v: fr[0].map(|c| y[0] * c), p: y[1], rho: y[2] })
            }
            InflowKind::Marched(m) => {
                let s = m.interpolate(a, r);
                let (rho, p, u) = recover_supersonic(&self.gas, &s)?;
                Ok(UpstreamState { v: std::array::from_fn(|c| u * fr[0][c] + s[3 + c]), p, rho })
            }
        }
    }

    /// Largest deviation of `(u⁰, u_θ, u_φ, p, ρ)` from `profile` over the
    /// angular grid at the radii `rs`.
    pub fn deviation_from(&self, profile: &RadialProfile, rs: &[f64]) -> Result<f64> {
        let mut d = 0.0f64;
        for &r in rs {
            let y = profile.state(r);
            for a in 0..self.sphere.len() {
                let s = self.at(a, r)?;
                let fr = node_frame(&self.sphere, a);
                let comps = [dot3(&s.v, &fr[0]) - y[0], dot3(&s.v, &fr[1]), dot3(&s.v, &fr[2]), s.p - y[1], s.rho - y[2]];
                d = d.max(comps.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            }
        }
        Ok(d)
    }
}

impl MarchedField {
    /// Cubic Hermite interpolation in `r` at node `a`.
    fn interpolate(&self, a: usize, r: f64) -> MarchState {
        let n = self.radii.len();
        let i = match self.radii.iter().position(|&x| x > r) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        }
        .min(n - 2);
        let (r0, r1) = (self.radii[i], self.radii[i + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (h00, h10, h01, h11) =
            (2.0 * t.powi(3) - 3.0 * t * t + 1.0, t.powi(3) - 2.0 * t * t + t, -2.0 * t.powi(3) + 3.0 * t * t, t.powi(3) - t * t);
        std::array::from_fn(|k| {
            h00 * self.vals[i][a][k] + h10 * h * self.ders[i][a][k] + h01 * self.vals[i + 1][a][k] + h11 * h * self.ders[i + 1][a][k]
        })
    }
}

/// Downstream state of the exact jump conditions on a tilted front.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhSolution {
    /// Cartesian downstream velocity.
    pub v: [f64; 3],
    pub p: f64,
    pub rho: f64,
    /// Unit normal `ν ∝ r̂ − ∇_Sψ/ψ`.
    pub normal: [f64; 3],
    /// `m = ρ⁻(u⁰⁻ − u_t⁻·∇_Sψ/ψ)`.
    pub m: f64,
    /// `ω = mψ[[u_t]]/[[p]]` in orthonormal components; equals `∇_Sψ`.
    pub omega: [f64; 2],
    /// `[[p]] = p⁺ − p⁻`.
    pub jump: f64,
}

/// Unit normal of the front `x⁰ = ψ` at a point with frame `fr`.
pub fn front_normal(fr: &[[f64; 3]; 3], psi: f64, grad: [f64; 2]) -> [f64; 3] {
    let n: [f64; 3] = std::array::from_fn(|c| fr[0][c] - (grad[0] * fr[1][c] + grad[1] * fr[2][c]) / psi);
    let l = dot3(&n, &n).sqrt();
    n.map(|v| v / l)
}

/// Relative violations of the mass, normal momentum, Bernoulli and
/// tangential velocity jump conditions between two states across `normal`.
pub fn rh_residuals(gamma: f64, up: &UpstreamState, down: &UpstreamState, normal: &[f64; 3]) -> [f64; 4] {
    let (vu, vd) = (dot3(&up.v, normal), dot3(&down.v, normal));
    let (ju, jd) = (up.rho * vu, down.rho * vd);
    let (mu, md) = (ju * vu + up.p, jd * vd + down.p);
    let (eu, ed) = (up.bernoulli(gamma), down.bernoulli(gamma));
    let tang: f64 = (0..3)
        .map(|c| ((up.v[c] - vu * normal[c]) - (down.v[c] - vd * normal[c])).powi(2))
        .sum::<f64>()
        .sqrt();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
    [rel(ju, jd), rel(mu, md), rel(eu, ed), tang / dot3(&up.v, &up.v).sqrt()]
}

/// Solve the jump conditions for the downstream state behind the front
/// `x⁰ = ψ` with unit-sphere gradient `grad` at a point with frame `fr`.
///
/// The normal speed behind the shock is the compressive root of
/// `(1/2 − γ/(γ−1))w² + γP/((γ−1)j)·w − H = 0` with `j = ρ⁻v_n⁻`,
/// `P = j v_n⁻ + p⁻`, `H = E⁻ − |v_τ|²/2`; the tangential velocity is continuous.
pub fn exact_rh_solve(gas: &GasConstants, up: &UpstreamState, fr: &[[f64; 3]; 3], psi: f64, grad: [f64; 2]) -> Result<RhSolution> {
    let g = gas.gamma;
    let nu = front_normal(fr, psi, grad);
    let vn = dot3(&up.v, &nu);
    let c2 = g * up.p / up.rho;
    if !(vn > 0.0 && vn * vn > c2) {
        return Err(Error::Numeric(format!("upstream normal speed {vn} is not supersonic (c = {})", c2.sqrt())));
    }
    let j = up.rho * vn;
    let big_p = j * vn + up.p;
    let vt: [f64; 3] = std::array::from_fn(|c| up.v[c] - vn * nu[c]);
    let h = up.bernoulli(g) - 0.5 * dot3(&vt, &vt);
    let qa = 0.5 - g / (g - 1.0);
    let qb = g * big_p / ((g - 1.0) * j);
    let mut w = -h / (qa * vn);
    for _ in 0..3 {
        let f = (qa * w + qb) * w - h;
        w -= f / (2.0 * qa * w + qb);
    }
    let p = big_p - j * w;
    if !(w > 0.0 && w < vn && p > up.p) {
        return Err(Error::Numeric(format!("no admissible compressive root (w = {w}, v_n = {vn}, p = {p})")));
    }
    let rho = j / w;
    let v: [f64; 3] = std::array::from_fn(|c| vt[c] + w * nu[c]);
    let ut_up = [dot3(&up.v, &fr[1]), dot3(&up.v, &fr[2])];
    let ut_dn = [dot3(&v, &fr[1]), dot3(&v, &fr[2])];
    let m = up.rho * (dot3(&up.v, &fr[0]) - (ut_up[0] * grad[0] + ut_up[1] * grad[1]) / psi);
    let jump = p - up.p;
    let omega = [m * psi * (ut_dn[0] - ut_up[0]) / jump, m * psi * (ut_dn[1] - ut_up[1]) / jump];
    Ok(RhSolution { v, p, rho, normal: nu, m, omega, jump })
}

/// Background, grid and constants of the free-boundary problem.
#[derive(Debug, Clone)]
pub struct TransonicProblem {
    pub tb: TransonicBackground,
    pub mu: MuConstants,
    pub ec: ECoeffs,
    /// Normalized grid on `[r_b, r1]`.
    pub grid: Arc<ShellGrid>,
    /// Subsonic background on the normalized grid.
    pub background: ShellField,
    pub trust: f64,
    p_disc_b: Vec<f64>,
    phi_b: Vec<f64>,
}

/// Unknowns of the fixed-point mapping on the normalized grid.
#[derive(Debug, Clone)]
pub struct TransonicIterate {
    pub front: ShockFront,
    pub e_hat: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub a_hat: Vec<f64>,
    /// Orthonormal tangential velocity `(u_θ, u_φ)`.
    pub ut: [Vec<f64>; 2],
}

/// Physical flow of an iterate with its coordinate change.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub field: ShellField,
    pub map: RadialMap,
    pub domain: NormalizedDomain,
}

/// `p_b⁺` at the radii `xs`, landing exactly on every distinct radius.
fn background_pressure(profile: &RadialProfile, xs: &[f64]) -> Result<Vec<f64>> {
    let mut uniq: Vec<f64> = xs.to_vec();
    uniq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    uniq.dedup();
    let ys = profile.sample(&uniq)?;
    Ok(xs.iter().map(|x| ys[uniq.partition_point(|u| u < x)][1]).collect())
}

impl TransonicIterate {
    /// The background itself: flat front at `r_b`, zero perturbations.
    pub fn background(prob: &TransonicProblem) -> Self {
        let n = prob.grid.len();
        TransonicIterate {
            front: ShockFront::flat(&prob.grid.sphere, prob.tb.r_b()),
            e_hat: vec![0.0; n],
            p_hat: vec![0.0; n],
            a_hat: vec![0.0; n],
            ut: [vec![0.0; n], vec![0.0; n]],
        }
    }

    /// Physical flow: `p = p_b⁺(x⁰) + P̂`, `ρ` from `A_b + Â`, `u⁰` from the
    /// Bernoulli law with `E_b + Ê`.
    pub fn physical(&self, prob: &TransonicProblem) -> Result<PhysicalField> {
        let grid = &prob.grid;
        let domain = normalize_domain(&self.front, grid, prob.trust)?;
        let map = domain.radial_map(grid);
        let gas = prob.tb.gas;
        let g = gas.gamma;
        let pb = background_pressure(&prob.tb.subsonic, &map.x)?;
        let (e_b, a_b) = (prob.tb.subsonic.e, prob.tb.subsonic.a);
        let n = grid.len();
        let mut field = ShellField {
            grid: grid.clone(),
            u0: vec![0.0; n],
            u_theta: self.ut[0].clone(),
            u_phi: self.ut[1].clone(),
            p: vec![0.0; n],
            rho: vec![0.0; n],
        };
        for q in 0..n {
            let p = pb[q] + self.p_hat[q];
            if !(p > 0.0) {
                return Err(Error::TrustRegion("pressure iterate is not positive".into()));
            }
            let rho = gas.rho_from_entropy(a_b + self.a_hat[q], p)?;
            let w2 = self.ut[0][q].powi(2) + self.ut[1][q].powi(2);
            let k = 2.0 * (e_b + self.e_hat[q]) - 2.0 * g * p / ((g - 1.0) * rho) - w2;
            if !(k > 0.0) {
                return Err(Error::TrustRegion(format!("no radial speed left at radius {}", map.x[q])));
            }
            field.u0[q] = k.sqrt();
            field.p[q] = p;
            field.rho[q] = rho;
        }
        Ok(PhysicalField { field, map, domain })
    }

    /// Difference norms `[ψ, Ê, P̂, Â, u_t]` between two iterates.
    pub fn distance(&self, other: &Self, grid: &ShellGrid) -> [f64; 5] {
        let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>();
        let dpsi: Vec<f64> = diff(&self.front.psi, &other.front.psi);
        let rep: Vec<f64> = (0..grid.n_r()).flat_map(|_| dpsi.iter().copied()).collect();
        [
            grid_norm(grid, &rep),
            grid_norm(grid, &diff(&self.e_hat, &other.e_hat)),
            grid_norm(grid, &diff(&self.p_hat, &other.p_hat)),
            grid_norm(grid, &diff(&self.a_hat, &other.a_hat)),
            grid_norm(grid, &diff(&self.ut[0], &other.ut[0])) + grid_norm(grid, &diff(&self.ut[1], &other.ut[1])),
        ]
    }

    /// `self + θ(next − self)`.
    pub fn relax(&self, next: &Self, theta: f64, sphere: &SphereGrid) -> Result<Self> {
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a + theta * (b - a)).collect::<Vec<_>>();
        Ok(TransonicIterate {
            front: ShockFront::new(sphere, mix(&self.front.psi, &next.front.psi))?,
            e_hat: mix(&self.e_hat, &next.e_hat),
            p_hat: mix(&self.p_hat, &next.p_hat),
            a_hat: mix(&self.a_hat, &next.a_hat),
            ut: [mix(&self.ut[0], &next.ut[0]), mix(&self.ut[1], &next.ut[1])],
        })
    }
}

impl TransonicProblem {
    /// Normalized grid with `n_r` Chebyshev nodes on `[r_b, r1]` and
    /// truncation degree `l_max`.
    pub fn new(tb: &TransonicBackground, n_r: usize, l_max: usize) -> Result<Self> {
        let mu = mu_constants(tb)?;
        let ec = e_coeffs(tb, &mu)?;
        let grid = Arc::new(ShellGrid::new(tb.r_b(), tb.params.r1, n_r, l_max)?);
        let mut prob = TransonicProblem {
            tb: tb.clone(),
            mu,
            ec,
            background: ShellField::from_fn(grid.clone(), |_, _, _| FlowState { u0: 1.0, ut: [0.0; 2], p: 1.0, rho: 1.0 }),
            grid,
            trust: trust_radius(tb),
            p_disc_b: Vec::new(),
            phi_b: Vec::new(),
        };
        let phys = TransonicIterate::background(&prob).physical(&prob)?;
        let jets = coordinate_jets_mapped(&phys.field, Some(&phys.map))?;
        let g = prob.gamma();
        prob.p_disc_b = jets.par_iter().map(|j| covariant_pressure_equation(g, j)).collect();
        prob.phi_b = jets[..prob.grid.n_ang()].iter().map(|j| robin_terms(g, j).defect(j.dp[0])).collect();
        prob.background = phys.field;
        Ok(prob)
    }

    pub fn gamma(&self) -> f64 {
        self.tb.gas.gamma
    }

    /// Background exit pressure `p_b⁺(r1)`.
    pub fn exit_pressure(&self) -> f64 {
        self.background.p[(self.grid.n_r() - 1) * self.grid.n_ang()]
    }

    fn venttsel(&self) -> VenttselProblem<'_> {
        VenttselProblem::from_background(&self.grid, &self.ec, &self.mu)
    }
}

/// Component of a transonic boundary perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransonicField {
    /// Back pressure on the outer sphere.
    P1,
    /// Radial inflow velocity on the inner sphere.
    U0In,
    /// Inflow pressure.
    PIn,
    /// Inflow density.
    RhoIn,
    /// Gradient part `∇Y` of the inflow tangential velocity.
    UtIn,
    /// Rotational part `*∇Y` of the inflow tangential velocity.
    UtCurlIn,
}

impl std::str::FromStr for TransonicField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1" => Ok(TransonicField::P1),
            "u0_in" => Ok(TransonicField::U0In),
            "p_in" => Ok(TransonicField::PIn),
            "rho_in" => Ok(TransonicField::RhoIn),
            "ut_in" => Ok(TransonicField::UtIn),
            "ut_curl_in" => Ok(TransonicField::UtCurlIn),
            _ => Err(Error::Parse(format!("unknown transonic field '{s}'"))),
        }
    }
}

/// Single-harmonic perturbation `amp·Y_n^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransonicPerturbation {
    pub field: TransonicField,
    pub n: usize,
    pub m: i64,
    pub amp: f64,
}

/// Back pressure on the outer sphere and the supersonic inflow.
#[derive(Debug, Clone)]
pub struct TransonicBCs {
    pub p1: Vec<f64>,
    pub inflow: SupersonicInflow,
    /// `max |p1 − p_b⁺(r1)|` plus the largest deviation of the inflow data.
    pub eps: f64,
}

impl TransonicBCs {
    pub fn unperturbed(prob: &TransonicProblem) -> Result<Self> {
        Self::from_perturbations(prob, &[], 0)
    }

    /// Background data plus single harmonics. Inflow perturbations are
    /// marched through the supersonic region with `march_steps` RK4 steps.
    pub fn from_perturbations(prob: &TransonicProblem, list: &[TransonicPerturbation], march_steps: usize) -> Result<Self> {
        let sph = &prob.grid.sphere;
        let l = sph.l_max;
        let mut c: Vec<SphCoeffs> = (0..6).map(|_| SphCoeffs::zeros(l)).collect();
        for pt in list {
            if pt.n > l || pt.m.unsigned_abs() as usize > pt.n {
                return Err(Error::Config(format!("harmonic ({}, {}) outside degree {l}", pt.n, pt.m)));
            }
            let k = pt.field as usize;
            let v = c[k].get(pt.n, pt.m) + pt.amp;
            c[k].set(pt.n, pt.m, v);
        }
        let p1: Vec<f64> = sph.synthesize(&c[0]).iter().map(|v| prob.exit_pressure() + v).collect();
        let tb = &prob.tb;
        let (r0, r_hi) = (tb.params.r0, tb.supersonic.r_hi);
        let inflow_perturbed = list.iter().any(|p| p.field != TransonicField::P1 && p.amp != 0.0);
        let inflow = if inflow_perturbed {
            let mut data = InflowData::radial(&tb.supersonic, sph, r0);
            let add = |v: &mut Vec<f64>, d: Vec<f64>| v.iter_mut().zip(d).for_each(|(a, b)| *a += b);
            add(&mut data.u0, sph.synthesize(&c[1]));
            add(&mut data.p, sph.synthesize(&c[2]));
            add(&mut data.rho, sph.synthesize(&c[3]));
            let (ut, up) = sph.synthesize_tangent(&c[4], &c[5]);
            add(&mut data.ut[0], ut);
            add(&mut data.ut[1], up);
            let steps = if march_steps == 0 { 200 } else { march_steps };
            solve_supersonic(tb.gas, sph, r0, r_hi, data, steps)?
        } else {
            SupersonicInflow::radial(&tb.supersonic, sph, r0, r_hi)
        };
        Self::from_parts(prob, p1, inflow)
    }

    /// Data from grid values of the back pressure and a solved inflow.
    pub fn from_parts(prob: &TransonicProblem, p1: Vec<f64>, inflow: SupersonicInflow) -> Result<Self> {
        let na = prob.grid.n_ang();
        if p1.len() != na || inflow.sphere.len() != na {
            return Err(Error::Config(format!("back pressure or inflow not on the {na}-point angular grid")));
        }
        if p1.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Domain("back pressure must be positive and finite".into()));
        }
        let base = InflowData::radial(&prob.tb.supersonic, &inflow.sphere, inflow.r0);
        let d = &inflow.data;
        let dev = sup(&d.ut[0]).max(sup(&d.ut[1]))
            + [(&d.u0, &base.u0), (&d.p, &base.p), (&d.rho, &base.rho)]
                .iter()
                .map(|(x, y)| x.iter().zip(y.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
                .sum::<f64>();
        let pe = prob.exit_pressure();
        let eps = p1.iter().fold(0.0f64, |m, p| m.max((p - pe).abs())) + dev;
        Ok(TransonicBCs { p1, inflow, eps })
    }
}

/// Boundary terms on the front, each the exact expression minus its linear part.
#[derive(Debug, Clone)]
pub struct GTermSet {
    /// 1-form `mψ(u_t − u_t⁻)/[[p]] − μ0 ψ u_t` (orthonormal components).
    pub g0: [Vec<f64>; 2],
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub g3: Vec<f64>,
    pub g4: Vec<f64>,
    pub g5: Vec<f64>,
    pub g6: Vec<f64>,
    pub g7: Vec<f64>,
    pub g8: Vec<f64>,
    /// Nonlinear part `G̃` of the front condition on `∂0p`.
    pub g_tilde: Vec<f64>,
    /// `p_RH − p_b⁺(ψ)`.
    pub p_hat_rh: Vec<f64>,
    /// `A_RH − A_b`.
    pub a_hat_rh: Vec<f64>,
    /// Upstream Bernoulli constant at the front.
    pub e_minus: Vec<f64>,
    pub rh: Vec<RhSolution>,
}

impl GTermSet {
    /// Largest grid value over `g0 … g8`.
    pub fn max_norm(&self) -> f64 {
        [&self.g0[0], &self.g0[1], &self.g1, &self.g2, &self.g3, &self.g4, &self.g5, &self.g6, &self.g7, &self.g8]
            .iter()
            .map(|v| sup(v))
            .fold(0.0, f64::max)
    }
}

/// Boundary terms of the iterate `it` with upstream flow `inflow`.
pub fn g_terms(prob: &TransonicProblem, it: &TransonicIterate, inflow: &SupersonicInflow) -> Result<GTermSet> {
    let phys = it.physical(prob)?;
    let jets = coordinate_jets_mapped(&phys.field, Some(&phys.map))?;
    g_terms_with(prob, it, &phys, &jets, inflow)
}

fn g_terms_with(
    prob: &TransonicProblem,
    it: &TransonicIterate,
    phys: &PhysicalField,
    jets: &[CoordinateJet],
    inflow: &SupersonicInflow,
) -> Result<GTermSet> {
    let grid = &*prob.grid;
    let gas = prob.tb.gas;
    let g = gas.gamma;
    let na = grid.n_ang();
    let sph = &grid.sphere_full;
    let [mu0, mu1, mu2, mu3, mu4, _, mu6, mu7, _, _] = prob.mu.mu;
    let (gamma2, gamma3) = (prob.mu.gamma2, prob.mu.gamma3);
    let r_b = prob.tb.r_b();
    let a_b = prob.tb.subsonic.a;
    let psi = &it.front.psi;
    let grad = &phys.domain.grad;
    let rh: Vec<RhSolution> = (0..na)
        .into_par_iter()
        .map(|a| {
            let up = inflow.at(a, psi[a])?;
            exact_rh_solve(&gas, &up, &node_frame(sph, a), psi[a], [grad[0][a], grad[1][a]])
        })
        .collect::<Result<_>>()?;
    let ups: Vec<UpstreamState> = (0..na).map(|a| inflow.at(a, psi[a])).collect::<Result<_>>()?;
    let dp_hat = CartesianGradient::new(grid, None).d_radial(&it.p_hat);
    let wt: Vec<f64> = (0..na).map(|a| psi[a] * it.ut[0][a]).collect();
    let wp: Vec<f64> = (0..na).map(|a| psi[a] * it.ut[1][a]).collect();
    let dstar_w = codifferential(sph, &wt, &wp)?;
    let mut out = GTermSet {
        g0: [vec![0.0; na], vec![0.0; na]],
        g1: vec![0.0; na],
        g2: vec![0.0; na],
        g3: vec![0.0; na],
        g4: vec![0.0; na],
        g5: vec![0.0; na],
        g6: vec![0.0; na],
        g7: vec![0.0; na],
        g8: vec![0.0; na],
        g_tilde: vec![0.0; na],
        p_hat_rh: vec![0.0; na],
        a_hat_rh: vec![0.0; na],
        e_minus: vec![0.0; na],
        rh: rh.clone(),
    };
    for a in 0..na {
        let fr = node_frame(sph, a);
        let s = &rh[a];
        let d = psi[a] - r_b;
        let bg = prob.tb.subsonic.state(psi[a]);
        let u_rh = dot3(&s.v, &fr[0]);
        let a_rh = s.p * s.rho.powf(-g);
        out.g1[a] = (u_rh - bg[0]) - mu1 * d;
        out.p_hat_rh[a] = s.p - bg[1];
        out.g2[a] = out.p_hat_rh[a] - mu2 * d;
        out.g3[a] = (s.rho - bg[2]) - mu3 * d;
        out.a_hat_rh[a] = a_rh - a_b;
        out.g4[a] = out.a_hat_rh[a] - mu4 * d;
        out.e_minus[a] = ups[a].bernoulli(g);
        let ut_up = [dot3(&ups[a].v, &fr[1]), dot3(&ups[a].v, &fr[2])];
        for c in 0..2 {
            let u = it.ut[c][a];
            out.g0[c][a] = s.m * psi[a] * (u - ut_up[c]) / s.jump - mu0 * psi[a] * u;
        }
        let c2 = g * s.p / s.rho;
        let q_rh = 2.0 * g * s.p * u_rh * u_rh / (psi[a] * (u_rh * u_rh - c2));
        let j = &jets[a];
        let rt = robin_terms(g, j);
        let phi = j.dp[0] + q_rh - rt.g1 - rt.g2 - prob.phi_b[a];
        out.g_tilde[a] = phi - (dp_hat[a] + gamma2 * out.p_hat_rh[a] - gamma3 * dstar_w[a]);
        out.g5[a] = (out.g_tilde[a] + gamma2 * out.g2[a]) / gamma3;
    }
    let dstar_g0 = codifferential(sph, &out.g0[0], &out.g0[1])?;
    let lap_g2 = sph.synthesize(&laplace_beltrami(&sph.analyze(&out.g2)?));
    let int_g5 = sph.integrate(&out.g5);
    for a in 0..na {
        out.g6[a] = mu0 * out.g5[a] + dstar_g0[a];
        out.g7[a] = mu2 / (4.0 * PI * mu6) * int_g5 - out.g2[a];
        out.g8[a] = -lap_g2[a] + mu7 * out.g2[a] + mu0 * mu2 * out.g5[a] + mu2 * dstar_g0[a];
    }
    Ok(out)
}

/// Decomposition of the interior right-hand side `f = y²(F + F̃1 + F̃2)`:
/// `F` is the subsonic higher-order term at the physical point, `F̃2` the
/// entropy coupling `ρ_b^γ d2 ((μ4/μ2) i*P̂ − Â)/y²` and `F̃1` the remainder
/// from the coordinate change.
#[derive(Debug, Clone)]
pub struct InteriorTerms {
    pub f: Vec<f64>,
    pub big_f: Vec<f64>,
    pub f1_tilde: Vec<f64>,
    pub f2_tilde: Vec<f64>,
}

fn interior_rhs(prob: &TransonicProblem, it: &TransonicIterate, jets: &[CoordinateJet]) -> Result<Vec<f64>> {
    let grid = &*prob.grid;
    let g = prob.gamma();
    let (na, nr) = (grid.n_ang(), grid.n_r());
    let (lp, _, _) = prob.venttsel().apply(&it.p_hat)?;
    let mut f = vec![0.0; grid.len()];
    for i in 0..nr {
        let y = grid.r(i);
        let e5 = prob.ec.eval(y)?[4];
        for a in 0..na {
            let q = i * na + a;
            let c2b = g * prob.background.p[q] / prob.background.rho[q];
            let defect = covariant_pressure_equation(g, &jets[q]) - prob.p_disc_b[q];
            f[q] = lp[q] - e5 * it.e_hat[q] - y * y * defect / c2b;
        }
    }
    Ok(f)
}

/// Interior right-hand side of the iterate and its decomposition.
pub fn interior_terms(prob: &TransonicProblem, it: &TransonicIterate) -> Result<InteriorTerms> {
    let phys = it.physical(prob)?;
    let jets = coordinate_jets_mapped(&phys.field, Some(&phys.map))?;
    let f = interior_rhs(prob, it, &jets)?;
    let grid = &*prob.grid;
    let g = prob.gamma();
    let na = grid.n_ang();
    let ratio = prob.mu.mu[4] / prob.mu.mu[2];
    let (e_b, a_b) = (prob.tb.subsonic.e, prob.tb.subsonic.a);
    let n = grid.len();
    let (mut big_f, mut f1t, mut f2t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for q in 0..n {
        let y = grid.r(q / na);
        let j = &jets[q];
        let rj = prob.tb.subsonic.jet(j.x);
        let bp = BackgroundPoint { x: j.x, u: rj.y[0], p: rj.y[1], rho: rj.y[2], pr: rj.dy[1], prr: rj.d2y[1], lap: 0.0 };
        let d = PressurePerturbation {
            p: j.p - bp.p,
            pr: j.dp[0] - bp.pr,
            prr: j.hp[0][0] - bp.prr,
            lap: j.surface_laplacian(),
            e: j.bernoulli(g) - e_b,
            a: j.p * j.rho.powf(-g) - a_b,
        };
        big_f[q] = (f1_transcribed(g, j) + f2_transcribed(g, &bp, &d)) / bp.c2(g);
        let d2 = prob.ec.eval(y)?[3] / ratio;
        f2t[q] = d2 * (ratio * it.p_hat[q % na] - it.a_hat[q]) / (y * y);
        f1t[q] = f[q] / (y * y) - big_f[q] - f2t[q];
    }
    Ok(InteriorTerms { f, big_f, f1_tilde: f1t, f2_tilde: f2t })
}

/// Iteration controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransonicOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial under-relaxation factor.
    pub theta: f64,
    pub theta_min: f64,
    pub substeps: usize,
    /// Relative threshold of the S-Condition check.
    pub s_threshold: f64,
    /// Run even if the S-Condition check fails.
    pub allow_s_violation: bool,
}

impl Default for TransonicOptions {
    fn default() -> Self {
        TransonicOptions {
            tol: 1e-10,
            max_iter: 100,
            theta: 1.0,
            theta_min: 0.25,
            substeps: 1,
            s_threshold: 1e-8,
            allow_s_violation: false,
        }
    }
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Mean of the codifferential datum of the front velocity before the solve.
    pub div_curl_mean: f64,
    /// `∫ψ^p` of the new front.
    pub psi_p_integral: f64,
    /// Largest boundary term.
    pub g_norm: f64,
}

/// One application of the six-step mapping.
pub fn transonic_step(
    prob: &TransonicProblem,
    it: &TransonicIterate,
    bcs: &TransonicBCs,
    opts: &TransonicOptions,
) -> Result<(TransonicIterate, StepDiagnostics)> {
    let grid = &prob.grid;
    let sph = &grid.sphere;
    let gas = prob.tb.gas;
    let g = gas.gamma;
    let (n, na, nr) = (grid.len(), grid.n_ang(), grid.n_r());
    let [mu0, _, mu2, _, mu4, mu5, mu6, _, _, _] = prob.mu.mu;
    let r_b = prob.tb.r_b();
    let (e_b, a_b) = (prob.tb.subsonic.e, prob.tb.subsonic.a);
    let topts = TransportOptions { substeps: opts.substeps };

    let phys = it.physical(prob)?;
    let jets = coordinate_jets_mapped(&phys.field, Some(&phys.map))?;
    let gt = g_terms_with(prob, it, &phys, &jets, &bcs.inflow)?;
    let cf = CharacteristicField::from_field_mapped(&phys.field, &phys.map, None)?;

    let e_data: Vec<f64> = gt.e_minus.iter().map(|e| e - e_b).collect();
    let e_hat = solve_transport(&cf, None, None, &e_data, Surface::Inner, topts)?;

    let f = interior_rhs(prob, it, &jets)?;
    let mut rhs = vec![0.0; n];
    for i in 0..nr {
        let e5 = prob.ec.eval(grid.r(i))?[4];
        for a in 0..na {
            rhs[i * na + a] = e5 * e_hat[i * na + a] + f[i * na + a];
        }
    }
    let h1: Vec<f64> = (0..na).map(|a| bcs.p1[a] - prob.exit_pressure()).collect();
    let sol = venttsel_solve(&prob.venttsel(), &rhs, &gt.g8, &h1)?;

    let psi: Vec<f64> = (0..na).map(|a| r_b + (sol.p[a] - gt.g2[a]) / mu2).collect();
    let front = ShockFront::new(sph, psi)?;
    front.check_trust(r_b, prob.trust)?;

    let a_data: Vec<f64> = (0..na).map(|a| mu4 * (front.psi[a] - r_b) + gt.g4[a]).collect();
    let a_hat = solve_transport(&cf, None, None, &a_data, Surface::Inner, topts)?;

    let datum: Vec<f64> = (0..na).map(|a| mu5 * sol.dp[a] + mu6 * (front.psi[a] - r_b) + gt.g5[a]).collect();
    let psi_c = sph.analyze(&datum)?;
    let (_, beta_g0) = sph.analyze_tangent(&gt.g0[0], &gt.g0[1])?;
    let chi = laplace_beltrami(&beta_g0).scale(-1.0 / mu0);
    let div_curl_mean = psi_c.mean();
    let form = div_curl_solve(sph, &chi, &psi_c)?;
    let ut_front = [
        (0..na).map(|a| form.w_theta[a] / front.psi[a]).collect::<Vec<f64>>(),
        (0..na).map(|a| form.w_phi[a] / front.psi[a]).collect::<Vec<f64>>(),
    ];

    let domain = normalize_domain(&front, grid, prob.trust)?;
    let map = domain.radial_map(grid);
    let pb = background_pressure(&prob.tb.subsonic, &map.x)?;
    let p: Vec<f64> = (0..n).map(|q| pb[q] + sol.p[q]).collect();
    if p.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::TrustRegion("pressure iterate is not positive".into()));
    }
    let rho: Vec<f64> = (0..n).map(|q| gas.rho_from_entropy(a_b + a_hat[q], p[q])).collect::<Result<_>>()?;
    let cg = CartesianGradient::new(grid, Some(map));
    let gp = cg.gradient(&p)?;
    let mut damp = vec![0.0; n];
    let mut src = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for q in 0..n {
        let fr = node_frame(sph, q % na);
        let x = cg.map().x[q];
        damp[q] = phys.field.u0[q] / phys.map.x[q];
        let w2 = it.ut[0][q].powi(2) + it.ut[1][q].powi(2);
        let gq = [gp[0][q], gp[1][q], gp[2][q]];
        let gr = dot3(&gq, &fr[0]);
        for c in 0..3 {
            src[c][q] = -(gq[c] - gr * fr[0][c]) / rho[q] - w2 / x * fr[0][c];
        }
    }
    let mut w = Vec::with_capacity(3);
    for c in 0..3 {
        let data: Vec<f64> = (0..na)
            .map(|a| {
                let fr = node_frame(sph, a);
                ut_front[0][a] * fr[1][c] + ut_front[1][a] * fr[2][c]
            })
            .collect();
        w.push(solve_transport(&cf, Some(&damp), Some(&src[c]), &data, Surface::Inner, topts)?);
    }
    let mut ut = [vec![0.0; n], vec![0.0; n]];
    for q in 0..n {
        let fr = node_frame(sph, q % na);
        let wq = [w[0][q], w[1][q], w[2][q]];
        ut[0][q] = dot3(&wq, &fr[1]);
        ut[1][q] = dot3(&wq, &fr[2]);
    }
    let diag = StepDiagnostics { div_curl_mean, psi_p_integral: front.profile_integral(sph), g_norm: gt.max_norm() };
    let _ = g;
    Ok((TransonicIterate { front, e_hat, p_hat: sol.p, a_hat, ut }, diag))
}

/// Jump-condition check on the front of a flow.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RhReport {
    /// Largest relative violation of `[[ρu·ν]] = 0`.
    pub mass: f64,
    pub momentum: f64,
    pub bernoulli: f64,
    pub tangential: f64,
    /// `min [[p]]` over the front.
    pub min_jump: f64,
    /// `max |E⁺ − E⁻|` over the front.
    pub e_jump: f64,
}

impl RhReport {
    pub fn max_residual(&self) -> f64 {
        self.mass.max(self.momentum).max(self.bernoulli).max(self.tangential)
    }
}

/// Evaluate the jump conditions between `inflow` and the downstream flow of
/// `it` on its front.
pub fn rh_report(prob: &TransonicProblem, it: &TransonicIterate, inflow: &SupersonicInflow) -> Result<RhReport> {
    let phys = it.physical(prob)?;
    let g = prob.gamma();
    let sph = &prob.grid.sphere_full;
    let mut rep = RhReport { min_jump: f64::INFINITY, ..Default::default() };
    for a in 0..prob.grid.n_ang() {
        let psi = it.front.psi[a];
        let up = inflow.at(a, psi)?;
        let fr = node_frame(sph, a);
        let down = UpstreamState { v: phys.field.cartesian_velocity(a), p: phys.field.p[a], rho: phys.field.rho[a] };
        let nu = front_normal(&fr, psi, [phys.domain.grad[0][a], phys.domain.grad[1][a]]);
        let r = rh_residuals(g, &up, &down, &nu);
        rep.mass = rep.mass.max(r[0]);
        rep.momentum = rep.momentum.max(r[1]);
        rep.bernoulli = rep.bernoulli.max(r[2]);
        rep.tangential = rep.tangential.max(r[3]);
        rep.min_jump = rep.min_jump.min(down.p - up.p);
        rep.e_jump = rep.e_jump.max((down.bernoulli(g) - up.bernoulli(g)).abs());
    }
    Ok(rep)
}

/// Diagnostics of a transonic run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransonicReport {
    pub eps: f64,
    /// Norm of `T(U_k) − U_k` per iteration.
    pub corrections: Vec<f64>,
    /// Per iteration: corrections of `[ψ, Ê, P̂, Â, u_t]`.
    pub step_corrections: Vec<[f64; 5]>,
    pub step_diagnostics: Vec<StepDiagnostics>,
    /// Relaxation factor used in each iteration.
    pub thetas: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Largest of the last five quotients.
    pub contraction: f64,
    pub converged: bool,
    pub iterations: usize,
    pub s_condition: SConditionReport,
    pub r_p: f64,
    /// `max |ψ^p|`.
    pub front_amplitude: f64,
    pub psi_p_integral: f64,
    pub rh: RhReport,
    pub residual: ResidualNorms,
    pub background_residual: ResidualNorms,
}

/// Result of [`iterate_transonic`].
#[derive(Debug, Clone)]
pub struct TransonicSolution {
    pub front: ShockFront,
    pub iterate: TransonicIterate,
    /// Subsonic flow on the normalized grid; node `q` sits at radius `map.x[q]`.
    pub field: ShellField,
    pub map: RadialMap,
    pub report: TransonicReport,
}

impl TransonicSolution {
    /// Physical radius of every node of the field.
    pub fn physical_radii(&self) -> &[f64] {
        &self.map.x
    }

    /// Sidecar metadata of the normalized field, carrying the front.
    pub fn meta(&self, gas: &GasConstants) -> crate::grid::FieldMeta {
        crate::grid::FieldMeta { front: Some(self.front.psi.clone()), ..self.field.meta(gas) }
    }

    /// CSV rows `y,x,theta,phi,u0,u_theta,u_phi,p,rho` of the subsonic flow.
    pub fn to_csv(&self) -> String {
        let grid = &*self.field.grid;
        let mut s = String::from("y,x,theta,phi,u0,u_theta,u_phi,p,rho\n");
        for i in 0..grid.n_r() {
            for j in 0..grid.sphere.n_lat {
                for k in 0..grid.sphere.n_lon {
                    let q = grid.index(i, j, k);
                    let row = [
                        grid.r(i),
                        self.map.x[q],
                        grid.sphere.theta[j],
                        grid.sphere.phi[k],
                        self.field.u0[q],
                        self.field.u_theta[q],
                        self.field.u_phi[q],
                        self.field.p[q],
                        self.field.rho[q],
                    ];
                    s.push_str(&row.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(","));
                    s.push('\n');
                }
            }
        }
        s
    }
}

/// Solve the free-boundary problem by iterating [`transonic_step`] from the
/// background.
pub fn iterate_transonic(prob: &TransonicProblem, bcs: &TransonicBCs, opts: &TransonicOptions) -> Result<TransonicSolution> {
    let s_condition = check_s_condition(&prob.tb, prob.grid.sphere.l_max.max(1), opts.s_threshold)?;
    if !s_condition.holds && !opts.allow_s_violation {
        return Err(Error::SCondition(s_condition.violated[0]));
    }
    if !(opts.theta > 0.0 && opts.theta <= 1.0 && opts.theta_min > 0.0 && opts.theta_min <= opts.theta) {
        return Err(Error::Config(format!("invalid relaxation factors {} / {}", opts.theta, opts.theta_min)));
    }
    let sph = &prob.grid.sphere;
    let mut it = TransonicIterate::background(prob);
    let mut theta = opts.theta;
    let (mut corrections, mut step_corrections, mut step_diagnostics, mut thetas) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let (next, diag) = transonic_step(prob, &it, bcs, opts)?;
        if diag.psi_p_integral.abs() > 1e-10 {
            return Err(Error::Numeric(format!("front profile has nonzero mean {:e}", diag.psi_p_integral)));
        }
        let parts = next.distance(&it, &prob.grid);
        let dc: f64 = parts.iter().sum();
        if let Some(&last) = corrections.last() {
            if dc > last {
                theta = (0.5 * theta).max(opts.theta_min);
            }
        }
        corrections.push(dc);
        step_corrections.push(parts);
        step_diagnostics.push(diag);
        thetas.push(theta);
        it = if theta == 1.0 { next } else { it.relax(&next, theta, sph)? };
        if dc < opts.tol {
            converged = true;
            break;
        }
    }
    let ratios: Vec<f64> = corrections.windows(2).map(|w| w[1] / w[0]).collect();
    let contraction = ratios.iter().rev().take(5).fold(0.0f64, |a, &r| a.max(r));
    let phys = it.physical(prob)?;
    let gas = prob.tb.gas;
    let bg_map = TransonicIterate::background(prob).physical(prob)?.map;
    let report = TransonicReport {
        eps: bcs.eps,
        iterations: corrections.len(),
        corrections,
        step_corrections,
        step_diagnostics,
        thetas,
        ratios,
        contraction,
        converged,
        s_condition,
        r_p: it.front.r_p,
        front_amplitude: it.front.amplitude(),
        psi_p_integral: it.front.profile_integral(sph),
        rh: rh_report(prob, &it, &bcs.inflow)?,
        residual: euler_residual_mapped(&phys.field, &gas, Some(phys.map.clone()))?.norms,
        background_residual: euler_residual_mapped(&prob.background, &gas, Some(bg_map))?.norms,
    };
    if !converged {
        return Err(Error::NotConverged { iterations: report.iterations, last: *report.corrections.last().unwrap_or(&f64::NAN) });
    }
    Ok(TransonicSolution { front: it.front.clone(), iterate: it, field: phys.field, map: phys.map, report })
}

/// Shock radius of the spherically symmetric transonic flow with the same
/// supersonic branch as `tb` and exit pressure `p_b⁺(r1) + delta_p`, found by
/// Brent's method over the shock radius; returns the radius and background.
pub fn shooting_oracle(tb: &TransonicBackground, delta_p: f64) -> Result<(f64, TransonicBackground)> {
    let gas = tb.gas;
    let target = tb.exit_pressure() + delta_p;
    let build = |r: f64| -> Result<TransonicBackground> {
        let down = normal_shock_jump(&tb.supersonic.flow_state(r), &gas)?;
        let mach = down.u0 / down.sound_speed(&gas)?;
        solve_transonic_background(TransonicParams { r_b: r, p_s: down.p, rho_s: down.rho, m_s: mach, ..tb.params })
    };
    let h = 0.5 * trust_radius(tb);
    let r_b = tb.r_b();
    let mut err = None;
    let r = brent(
        |r| match build(r) {
            Ok(b) => b.exit_pressure() - target,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        r_b - h,
        r_b + h,
        1e-14,
        200,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let r = r?;
    Ok((r, build(r)?))
}
