//! Conservation-form Euler residuals and the vorticity identity check.
//!
//! Fluxes are assembled in Cartesian components (smooth scalars on every
//! sphere), differentiated radially on the Chebyshev nodes and tangentially by
//! spectral gradients, and the momentum residual is reported in the
//! orthonormal spherical frame. This equals the covariant divergence written
//! with the shell's Christoffel symbols.

use crate::error::{Error, Result};
use crate::gas::GasConstants;
use crate::grid::{ShellField, ShellGrid};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Physical radius of every grid point when the field lives on a mapped grid
/// `x0 = X(y0, ω)`, with `∂X/∂y0` and the surface gradient of `X` at fixed `y0`.
#[derive(Debug, Clone)]
pub struct RadialMap {
    pub x: Vec<f64>,
    pub x_y: Vec<f64>,
    pub gx_theta: Vec<f64>,
    pub gx_phi: Vec<f64>,
}

impl RadialMap {
    /// The identity map of a shell grid.
    pub fn identity(grid: &ShellGrid) -> Self {
        let n = grid.len();
        let mut x = Vec::with_capacity(n);
        for i in 0..grid.n_r() {
            x.extend(std::iter::repeat_n(grid.r(i), grid.n_ang()));
        }
        RadialMap { x, x_y: vec![1.0; n], gx_theta: vec![0.0; n], gx_phi: vec![0.0; n] }
    }
}

/// Differentiation context for Cartesian gradients of grid scalars.
pub struct CartesianGradient<'a> {
    grid: &'a ShellGrid,
    d: DMatrix<f64>,
    map: RadialMap,
}

impl<'a> CartesianGradient<'a> {
    pub fn new(grid: &'a ShellGrid, map: Option<RadialMap>) -> Self {
        CartesianGradient { grid, d: grid.radial.diff_matrix(), map: map.unwrap_or_else(|| RadialMap::identity(grid)) }
    }

    pub fn map(&self) -> &RadialMap {
        &self.map
    }

    /// Derivative along the radial grid coordinate at fixed angle, evaluated
    /// as `Σ_l D_il (f_l − f_i)` so that the large near-boundary rows act on
    /// differences instead of values.
    pub fn d_radial(&self, f: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (nr, na) = (g.n_r(), g.n_ang());
        let mut out = vec![0.0; f.len()];
        for a in 0..na {
            for i in 0..nr {
                let fi = f[i * na + a];
                let mut s = 0.0;
                for l in 0..nr {
                    if l != i {
                        s += self.d[(i, l)] * (f[l * na + a] - fi);
                    }
                }
                out[i * na + a] = s;
            }
        }
        out
    }

    /// Surface gradient `(∂_θ, (1/sin θ)∂_φ)` on each radial level at fixed
    /// grid radius.
    pub fn surface_gradient(&self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.grid;
        let na = g.n_ang();
        let mut gt = vec![0.0; f.len()];
        let mut gp = vec![0.0; f.len()];
        for i in 0..g.n_r() {
            let c = g.sphere_full.analyze(&f[i * na..(i + 1) * na])?;
            let (a, b) = g.sphere_full.gradient(&c);
            gt[i * na..(i + 1) * na].copy_from_slice(&a);
            gp[i * na..(i + 1) * na].copy_from_slice(&b);
        }
        Ok((gt, gp))
    }

    /// Cartesian gradient of a grid scalar in physical space.
    pub fn gradient(&self, f: &[f64]) -> Result<[Vec<f64>; 3]> {
        let g = self.grid;
        let fy = self.d_radial(f);
        let (gt, gp) = self.surface_gradient(f)?;
        let n = f.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for q in 0..n {
            let a = q % g.n_ang();
            let (j, k) = (a / g.sphere.n_lon, a % g.sphere.n_lon);
            let fr = g.sphere.frame(j, k);
            let m = &self.map;
            let fx = fy[q] / m.x_y[q];
            let st = (gt[q] - fx * m.gx_theta[q]) / m.x[q];
            let sp = (gp[q] - fx * m.gx_phi[q]) / m.x[q];
            for c in 0..3 {
                out[c][q] = fx * fr[0][c] + st * fr[1][c] + sp * fr[2][c];
            }
        }
        Ok(out)
    }
}

/// Pointwise residuals and their norms.
#[derive(Debug, Clone)]
pub struct EulerResidual {
    /// Momentum residual in the orthonormal frame `(r̂, θ̂, φ̂)`.
    pub momentum: [Vec<f64>; 3],
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub norms: ResidualNorms,
}

/// ∞-norm and volume-averaged L²-norm per conservation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawNorms {
    pub linf: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub momentum: LawNorms,
    pub mass: LawNorms,
    pub energy: LawNorms,
}

impl ResidualNorms {
    /// Largest ∞-norm over the three laws.
    pub fn max_linf(&self) -> f64 {
        self.momentum.linf.max(self.mass.linf).max(self.energy.linf)
    }

    /// Largest L²-norm over the three laws.
    pub fn max_l2(&self) -> f64 {
        self.momentum.l2.max(self.mass.l2).max(self.energy.l2)
    }
}

fn law_norms(vals: &[f64], w: &[f64]) -> LawNorms {
    let linf = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (mut s, mut ws) = (0.0, 0.0);
    for (v, wi) in vals.iter().zip(w) {
        s += wi * v * v;
        ws += wi;
    }
    LawNorms { linf, l2: (s / ws).sqrt() }
}

/// Residuals of `div(ρu) = 0`, `div(ρu⊗u + pI) = 0`, `div(ρuE) = 0`.
pub fn euler_residual(field: &ShellField, gas: &GasConstants) -> Result<EulerResidual> {
    euler_residual_mapped(field, gas, None)
}

/// As [`euler_residual`] for a field whose radial grid coordinate is mapped to
/// physical radius by `map`.
pub fn euler_residual_mapped(field: &ShellField, gas: &GasConstants, map: Option<RadialMap>) -> Result<EulerResidual> {
    field.validate()?;
    let grid = &*field.grid;
    if grid.n_r() < 4 || grid.sphere.l_max < 1 {
        return Err(Error::Config("grid too coarse for differentiation".into()));
    }
    let n = grid.len();
    let cg = CartesianGradient::new(grid, map);
    let u: Vec<[f64; 3]> = (0..n).map(|q| field.cartesian_velocity(q)).collect();
    let e: Vec<f64> = (0..n).map(|q| field.state(q).bernoulli(gas)).collect::<Result<_>>()?;
    let mut mass = vec![0.0; n];
    let mut energy = vec![0.0; n];
    let mut mom = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for b in 0..3 {
        let m: Vec<f64> = (0..n).map(|q| field.rho[q] * u[q][b]).collect();
        let gm = cg.gradient(&m)?;
        let h: Vec<f64> = (0..n).map(|q| m[q] * e[q]).collect();
        let gh = cg.gradient(&h)?;
        for q in 0..n {
            mass[q] += gm[b][q];
            energy[q] += gh[b][q];
        }
        for a in 0..3 {
            let f: Vec<f64> = (0..n).map(|q| m[q] * u[q][a] + if a == b { field.p[q] } else { 0.0 }).collect();
            let gf = cg.gradient(&f)?;
            for q in 0..n {
                mom[a][q] += gf[b][q];
            }
        }
    }
    let mut sph = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for q in 0..n {
        let a = q % grid.n_ang();
        let fr = grid.sphere.frame(a / grid.sphere.n_lon, a % grid.sphere.n_lon);
        for l in 0..3 {
            sph[l][q] = (0..3).map(|c| fr[l][c] * mom[c][q]).sum();
        }
    }
    let w = grid.volume_weights();
    let mag: Vec<f64> = (0..n).map(|q| (sph[0][q].powi(2) + sph[1][q].powi(2) + sph[2][q].powi(2)).sqrt()).collect();
    let norms = ResidualNorms { momentum: law_norms(&mag, &w), mass: law_norms(&mass, &w), energy: law_norms(&energy, &w) };
    Ok(EulerResidual { momentum: sph, mass, energy, norms })
}

/// Maximum over the grid and `k` of `|u^m ω_{km}|` in the coordinates
/// `(r, θ, φ)`, after checking that `E` and `A` are constant to `tol`
/// (relative).
pub fn vorticity_identity_check(field: &ShellField, gas: &GasConstants, tol: f64) -> Result<f64> {
    field.validate()?;
    let grid = &*field.grid;
    let n = grid.len();
    let mut e = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    for q in 0..n {
        let s = field.state(q);
        e.push(s.bernoulli(gas)?);
        a.push(s.entropy_function(gas)?);
    }
    for (name, v) in [("Bernoulli constant", &e), ("entropy function", &a)] {
        let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(l, h), x| (l.min(*x), h.max(*x)));
        if hi - lo > tol * hi.abs().max(1e-300) {
            return Err(Error::Precondition(format!("{name} varies by {:e}; identity not asserted", hi - lo)));
        }
    }
    let cg = CartesianGradient::new(grid, None);
    let u: Vec<[f64; 3]> = (0..n).map(|q| field.cartesian_velocity(q)).collect();
    let grads: Vec<[Vec<f64>; 3]> = (0..3)
        .map(|c| cg.gradient(&u.iter().map(|v| v[c]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for q in 0..n {
        // grads[c][d] = ∂_d u_c
        let curl = [
            grads[2][1][q] - grads[1][2][q],
            grads[0][2][q] - grads[2][0][q],
            grads[1][0][q] - grads[0][1][q],
        ];
        let v = u[q];
        let lamb = [v[1] * curl[2] - v[2] * curl[1], v[2] * curl[0] - v[0] * curl[2], v[0] * curl[1] - v[1] * curl[0]];
        let i = q / grid.n_ang();
        let ang = q % grid.n_ang();
        let (j, k) = (ang / grid.sphere.n_lon, ang % grid.sphere.n_lon);
        let fr = grid.sphere.frame(j, k);
        let r = grid.r(i);
        let scale = [1.0, r, r * grid.sphere.sin_t[j]];
        for l in 0..3 {
            let c: f64 = (0..3).map(|d| fr[l][d] * lamb[d]).sum::<f64>() * scale[l];
            worst = worst.max(c.abs());
        }
    }
    Ok(worst)
}
