//! Pointwise terms of the second-order pressure equation: the nonlinear
//! operator `N(U)`, its linearization about a radial flow, and the
//! higher-order remainders `F1`, `F2` written in the spherical chart.
//!
//! Derivatives enter through a [`CoordinateJet`], the coordinate components of
//! velocity, pressure and density gradients at one point, built from Cartesian
//! spectral derivatives so that the pole singularity of the chart never enters
//! a differentiation.

use crate::coeffs::linearization_coeffs;
use crate::error::Result;
use crate::gas::{christoffel, metric_diag};
use crate::grid::{ShellField, ShellGrid};
use crate::residual::{CartesianGradient, RadialMap};
use crate::sphere::laplace_beltrami;
use rayon::prelude::*;

/// `N(U)` from the Bernoulli constant, `c²`, the pressure, its first and
/// second radial derivatives and its surface Laplacian `Δ'p`.
#[allow(clippy::too_many_arguments)]
pub fn pressure_operator(gamma: f64, x: f64, e: f64, c2: f64, p: f64, pr: f64, prr: f64, lap: f64) -> f64 {
    let g = gamma;
    let k = e - c2 / (g - 1.0);
    (2.0 * e - (g + 1.0) / (g - 1.0) * c2) * prr - c2 / (x * x) * lap + 4.0 / x * (e - g * c2 / (g - 1.0)) * pr
        - 2.0 / p * (k + c2 * c2 / (4.0 * g * k)) * pr * pr
        + 4.0 * g * p / (x * x) * k
}

/// Radial background at one point. `pr`, `prr`, `lap` are the derivatives
/// of the background pressure as seen by the discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundPoint {
    pub x: f64,
    pub u: f64,
    pub p: f64,
    pub rho: f64,
    pub pr: f64,
    pub prr: f64,
    pub lap: f64,
}

impl BackgroundPoint {
    pub fn c2(&self, gamma: f64) -> f64 {
        gamma * self.p / self.rho
    }

    pub fn bernoulli(&self, gamma: f64) -> f64 {
        0.5 * self.u * self.u + self.c2(gamma) / (gamma - 1.0)
    }

    pub fn entropy_function(&self, gamma: f64) -> f64 {
        self.p * self.rho.powf(-gamma)
    }

    /// `N(U_b)`.
    pub fn pressure_operator(&self, gamma: f64) -> f64 {
        pressure_operator(gamma, self.x, self.bernoulli(gamma), self.c2(gamma), self.p, self.pr, self.prr, self.lap)
    }
}

/// Perturbation `(p̂, ∂0p̂, ∂0²p̂, Δ'p̂, Ê, Â)` at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PressurePerturbation {
    pub p: f64,
    pub pr: f64,
    pub prr: f64,
    pub lap: f64,
    pub e: f64,
    pub a: f64,
}

impl PressurePerturbation {
    pub fn scale(&self, s: f64) -> Self {
        PressurePerturbation {
            p: s * self.p,
            pr: s * self.pr,
            prr: s * self.prr,
            lap: s * self.lap,
            e: s * self.e,
            a: s * self.a,
        }
    }
}

/// Full state quantities `(E, p, c², ∂0p, ∂0²p, Δ'p)` of background plus
/// perturbation.
fn perturbed(gamma: f64, bg: &BackgroundPoint, d: &PressurePerturbation) -> [f64; 6] {
    let e = bg.bernoulli(gamma) + d.e;
    let a = bg.entropy_function(gamma) + d.a;
    let p = bg.p + d.p;
    let rho = (p / a).powf(1.0 / gamma);
    [e, p, gamma * p / rho, bg.pr + d.pr, bg.prr + d.prr, bg.lap + d.lap]
}

/// `L(Û) = −Δ'p̂/x² + (t−1)∂0²p̂ + (4b/x)∂0p̂ + e p̂/x² + (ρ_b d1 Ê + ρ_b^γ d2 Â)/x²`.
pub fn linear_operator(gamma: f64, bg: &BackgroundPoint, d: &PressurePerturbation) -> Result<f64> {
    let t = bg.u * bg.u / bg.c2(gamma);
    let c = linearization_coeffs(gamma, t)?;
    let x2 = bg.x * bg.x;
    Ok(-d.lap / x2 + (t - 1.0) * d.prr + 4.0 / bg.x * c.b * d.pr + c.e / x2 * d.p
        + bg.rho / x2 * c.d1 * d.e
        + bg.rho.powf(gamma) / x2 * c.d2 * d.a)
}

/// `F2 = c_b² L(Û) − (N(U) − N(U_b))`.
pub fn f2_identity(gamma: f64, bg: &BackgroundPoint, d: &PressurePerturbation) -> Result<f64> {
    let [e, p, c2, pr, prr, lap] = perturbed(gamma, bg, d);
    let n = pressure_operator(gamma, bg.x, e, c2, p, pr, prr, lap);
    Ok(bg.c2(gamma) * linear_operator(gamma, bg, d)? - (n - bg.pressure_operator(gamma)))
}

/// `F2` term by term. The factor multiplying the quadratic remainder of
/// `c² − c_b²` is evaluated with the exact remainder
/// `c² − c_b² − (γ−1)p̂/ρ_b − ρ_b^{γ−1}Â`.
pub fn f2_transcribed(gamma: f64, bg: &BackgroundPoint, d: &PressurePerturbation) -> f64 {
    let g = gamma;
    let gm1 = g - 1.0;
    let x = bg.x;
    let x2 = x * x;
    let [_, pp, cc, px, _, _] = perturbed(gamma, bg, d);
    let (p, p1, p2) = (bg.p, bg.pr, bg.prr);
    let cb = bg.c2(g);
    let ub2 = bg.u * bg.u;
    let dc = cc - cb;
    let eh = d.e;
    let u2 = 2.0 * (bg.bernoulli(g) + eh) - 2.0 * cc / gm1;
    let rem = dc - gm1 / bg.rho * d.p - bg.rho.powf(gm1) * d.a;
    let (q0, q1, q2) = (d.p, d.pr, d.prr);
    let s = px + p1;
    let minus_f2 = 4.0 * g * q0 / x2 * (eh - dc / gm1) + 4.0 / x * q1 * (eh - g / gm1 * dc) - dc / x2 * d.lap
        + (2.0 * eh - (g + 1.0) / gm1 * dc) * q2
        - ub2 / p * q1 * q1
        + s * q1 * (ub2 / p - u2 / pp)
        + p1 * p1 * q0 / p * (u2 / pp - ub2 / p)
        - p1 * p1 / (g * ub2) * (((cc + cb) / pp - 2.0 * cb / p) * dc - cb * cb / p * q0 * (1.0 / pp - 1.0 / p))
        - cb * cb / (g * p * ub2) * q1 * q1
        - p1 * p1 / g * (1.0 / u2 - 1.0 / ub2) * ((cc * cc / pp - cb * cb / p) + 2.0 * cb * cb / (p * ub2) * (dc / gm1 - eh))
        - s * q1 / g * (cc * cc / (pp * u2) - cb * cb / (p * ub2))
        + (-4.0 * g / gm1 * p / x2 - 4.0 * g / gm1 * p1 / x - (g + 1.0) / gm1 * p2 + 2.0 / gm1 * p1 * p1 / p
            - 2.0 * cb / (g * p * ub2) * p1 * p1 * (1.0 + cb / (gm1 * ub2)))
            * rem;
    -minus_f2
}

/// Coordinate components at one point of the chart `(r, θ, φ)`:
/// `u^k`, `∂_j u^k` (stored `du[j][k]`), `∂_j p`, `∂_j∂_k p`, `∂_j ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateJet {
    pub x: f64,
    pub theta: f64,
    pub u: [f64; 3],
    pub du: [[f64; 3]; 3],
    pub p: f64,
    pub dp: [f64; 3],
    pub hp: [[f64; 3]; 3],
    pub rho: f64,
    pub drho: [f64; 3],
}

impl CoordinateJet {
    pub fn metric(&self) -> [f64; 3] {
        metric_diag(self.x, self.theta)
    }

    /// `Γ^k_{ij}` indexed `[k][i][j]`.
    pub fn christoffel(&self) -> [[[f64; 3]; 3]; 3] {
        christoffel(self.x, self.theta)
    }

    /// `∇_j u^k`, stored `[j][k]`.
    pub fn covariant_du(&self) -> [[f64; 3]; 3] {
        let gam = self.christoffel();
        std::array::from_fn(|j| std::array::from_fn(|k| self.du[j][k] + (0..3).map(|m| gam[k][j][m] * self.u[m]).sum::<f64>()))
    }

    /// `∂_j A` for `A = p ρ^{−γ}`.
    pub fn da(&self, gamma: f64) -> [f64; 3] {
        let a = self.p * self.rho.powf(-gamma);
        std::array::from_fn(|k| a * (self.dp[k] / self.p - gamma * self.drho[k] / self.rho))
    }

    /// `G_{αβ} u^α u^β` over the tangential indices.
    pub fn tangential_speed2(&self) -> f64 {
        let g = self.metric();
        g[1] * self.u[1] * self.u[1] + g[2] * self.u[2] * self.u[2]
    }

    pub fn c2(&self, gamma: f64) -> f64 {
        gamma * self.p / self.rho
    }

    pub fn bernoulli(&self, gamma: f64) -> f64 {
        0.5 * (self.u[0] * self.u[0] + self.tangential_speed2()) + self.c2(gamma) / (gamma - 1.0)
    }

    /// `Δ'p = ∂11p + cot θ ∂1p + ∂22p / sin²θ`.
    pub fn surface_laplacian(&self) -> f64 {
        let (s, c) = self.theta.sin_cos();
        self.hp[1][1] + c / s * self.dp[1] + self.hp[2][2] / (s * s)
    }

    /// `u^α ∂_α u⁰ + u^α u^β Γ⁰_{αβ}`.
    fn w(&self) -> f64 {
        let gam = self.christoffel();
        let mut w = self.u[1] * self.du[1][0] + self.u[2] * self.du[2][0];
        for a in 1..3 {
            for b in 1..3 {
                w += self.u[a] * self.u[b] * gam[0][a][b];
            }
        }
        w
    }
}

/// `N(U)` at a jet.
pub fn pressure_operator_at(gamma: f64, j: &CoordinateJet) -> f64 {
    pressure_operator(gamma, j.x, j.bernoulli(gamma), j.c2(gamma), j.p, j.dp[0], j.hp[0][0], j.surface_laplacian())
}

/// `F1` of the pressure equation `N(U) = F1(U)`, term by term.
pub fn f1_transcribed(gamma: f64, j: &CoordinateJet) -> f64 {
    let g = gamma;
    let x = j.x;
    let p = j.p;
    let rho = j.rho;
    let gm = j.metric();
    let gam = j.christoffel();
    let u = j.u;
    let u0 = u[0];
    let c2 = j.c2(g);
    let e = j.bernoulli(g);
    let uu = j.tangential_speed2();
    let p0 = j.dp[0];
    let da = j.da(g);
    let w = j.w();
    let h3 = -uu
        * (j.hp[0][0] / (g * p) + 2.0 * p0 / (g * p * x) + 2.0 / (x * x)
            + p0 * p0 / (g * p * p)
                * (-1.0 + c2 * c2 / g / ((2.0 * e - 2.0 * c2 / (g - 1.0)) * (2.0 * e - uu - 2.0 * c2 / (g - 1.0)))));
    let mut s1 = 0.0;
    for k in 0..3 {
        for l in 0..3 {
            if (k, l) != (0, 0) {
                s1 += u[k] * u[l] * j.hp[l][k] + u[k] * j.du[k][l] * j.dp[l] - u[k] * u[l] * j.dp[k] * j.dp[l] / p;
            }
        }
    }
    let mut s2 = 0.0;
    for l in 0..3 {
        for k in 0..3 {
            if (l, k) != (0, 0) {
                let a: f64 = (1..3).map(|b| gam[l][k][b] * u[b]).sum();
                let b: f64 = (1..3).map(|b| gam[k][l][b] * u[b]).sum();
                s2 += j.du[k][l] * j.du[l][k] + 2.0 * a * j.du[l][k] + a * b;
            }
        }
    }
    let ua_da: f64 = (1..3).map(|a| u[a] * da[a]).sum();
    let ua_dp: f64 = (1..3).map(|a| u[a] * j.dp[a]).sum();
    let grad_p_rho: f64 = (1..3).map(|a| j.dp[a] * j.drho[a] / gm[a]).sum();
    let minus_f1 = g * p * h3 + (-p0 * w + rho.powf(g - 1.0) * p0 * ua_da / u0)
        - g * p * (w / (u0 * u0) + 2.0 * p0 / (rho * u0 * u0) + 2.0 / x) * w
        + ua_dp * 2.0 * u0 / x
        + g * p / (rho * rho) * grad_p_rho
        + s1
        - g * p * s2;
    -minus_f1
}

/// Covariant form `P = N − F1` of the pressure equation:
/// `γp [D_u(D_up/γp) − div(∇p/ρ) − tr(∇u∇u) + (2u⁰/x)φ1 + ρ^{γ−1}∂0p φ4/(γpu⁰) + L3]`,
/// where `φ1 = D_up/γp + div u`, `φ4 = D_uA` and `L3` is quadratic in the
/// radial component of `φ0 = ∇_u u + ∇p/ρ`. Zero on every steady Euler flow.
pub fn covariant_pressure_equation(gamma: f64, j: &CoordinateJet) -> f64 {
    let g = gamma;
    let (x, p, rho, u) = (j.x, j.p, j.rho, j.u);
    let gm = j.metric();
    let (s, c) = j.theta.sin_cos();
    let du_f = |f: &[f64; 3]| (0..3).map(|k| u[k] * f[k]).sum::<f64>();
    let dup = du_f(&j.dp);
    let dq: [f64; 3] = std::array::from_fn(|k| {
        ((0..3).map(|l| j.du[k][l] * j.dp[l]).sum::<f64>() + (0..3).map(|l| u[l] * j.hp[l][k]).sum::<f64>()) / (g * p)
            - dup * j.dp[k] / (g * p * p)
    });
    let t1 = du_f(&dq);
    let divgp = 2.0 / x * j.dp[0] / rho
        + c / (s * x * x) * j.dp[1] / rho
        + (0..3).map(|k| (j.hp[k][k] / rho - j.dp[k] * j.drho[k] / (rho * rho)) / gm[k]).sum::<f64>();
    let cov = j.covariant_du();
    let mut tr = 0.0;
    let mut divu = 0.0;
    for a in 0..3 {
        divu += cov[a][a];
        for b in 0..3 {
            tr += cov[a][b] * cov[b][a];
        }
    }
    let phi1 = dup / (g * p) + divu;
    let phi4 = du_f(&j.da(g));
    let phi00 = (0..3).map(|l| u[l] * cov[l][0]).sum::<f64>() + j.dp[0] / rho;
    let u0 = u[0];
    let w = j.w();
    let l3 = -(j.dp[0] / (g * p) + 2.0 * j.dp[0] / (rho * u0 * u0) + 2.0 / (u0 * u0) * w + 2.0 / x) * phi00
        + phi00 * phi00 / (u0 * u0);
    g * p * (t1 - divgp - tr + 2.0 * u0 / x * phi1 + rho.powf(g - 1.0) * j.dp[0] / (g * p * u0) * phi4 + l3)
}

/// Remainder `h1 = sin x¹ cos x¹ (u²)² + (2/x⁰)(u_b − u⁰)u¹` of the polar
/// momentum equation `u^j∂_j u¹ + (2u_b/x⁰)u¹ = −∂_1p/((x⁰)²ρ) + h1`.
pub fn h1(j: &CoordinateJet, u_b: f64) -> f64 {
    let (s, c) = j.theta.sin_cos();
    s * c * j.u[2] * j.u[2] + 2.0 / j.x * (u_b - j.u[0]) * j.u[1]
}

/// Coordinate jets of a field on an unmapped shell grid.
pub fn coordinate_jets(field: &ShellField) -> Result<Vec<CoordinateJet>> {
    coordinate_jets_mapped(field, None)
}

/// Coordinate jets of a field whose grid points sit at the physical radii of
/// `map` (the identity map if `None`).
pub fn coordinate_jets_mapped(field: &ShellField, map: Option<&RadialMap>) -> Result<Vec<CoordinateJet>> {
    field.validate()?;
    let grid = &*field.grid;
    let n = grid.len();
    let cg = CartesianGradient::new(grid, map.cloned());
    let radii = &cg.map().x;
    let vel: Vec<[f64; 3]> = (0..n).map(|q| field.cartesian_velocity(q)).collect();
    let mut gu = Vec::with_capacity(3);
    for a in 0..3 {
        let comp: Vec<f64> = vel.iter().map(|v| v[a]).collect();
        gu.push(cg.gradient(&comp)?);
    }
    let gp = cg.gradient(&field.p)?;
    let mut hp = Vec::with_capacity(3);
    for comp in &gp {
        hp.push(cg.gradient(comp)?);
    }
    let gr = cg.gradient(&field.rho)?;
    let jets = (0..n)
        .into_par_iter()
        .map(|q| {
            let (_, theta, fr) = point_frame(grid, q);
            let x = radii[q];
            let s = theta.sin();
            let jac = [fr[0], fr[1].map(|v| x * v), fr[2].map(|v| x * s * v)];
            let inv = [fr[0], fr[1].map(|v| v / x), fr[2].map(|v| v / (x * s))];
            let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            let gam = christoffel(x, theta);
            let u: [f64; 3] = std::array::from_fn(|k| dot(&inv[k], &vel[q]));
            let cov: [[f64; 3]; 3] = std::array::from_fn(|j| {
                std::array::from_fn(|k| {
                    let mut v = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            v += inv[k][a] * jac[j][b] * gu[a][b][q];
                        }
                    }
                    v
                })
            });
            let du = std::array::from_fn(|j| std::array::from_fn(|k| cov[j][k] - (0..3).map(|m| gam[k][j][m] * u[m]).sum::<f64>()));
            let gpq = [gp[0][q], gp[1][q], gp[2][q]];
            let dp: [f64; 3] = std::array::from_fn(|j| dot(&jac[j], &gpq));
            let h: [[f64; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|b| 0.5 * (hp[a][b][q] + hp[b][a][q])));
            let hpc = std::array::from_fn(|j| {
                std::array::from_fn(|k| {
                    let mut v = (0..3).map(|m| gam[m][j][k] * dp[m]).sum::<f64>();
                    for a in 0..3 {
                        for b in 0..3 {
                            v += jac[j][a] * jac[k][b] * h[a][b];
                        }
                    }
                    v
                })
            });
            let grq = [gr[0][q], gr[1][q], gr[2][q]];
            CoordinateJet {
                x,
                theta,
                u,
                du,
                p: field.p[q],
                dp,
                hp: hpc,
                rho: field.rho[q],
                drho: std::array::from_fn(|j| dot(&jac[j], &grq)),
            }
        })
        .collect();
    Ok(jets)
}

/// Terms of the exact boundary relation `∂0p + Q = G1 + G2` on a sphere
/// `x⁰ = const`, with `Q = 2γp(u⁰)²/(x⁰((u⁰)² − c²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinTerms {
    pub q: f64,
    pub g1: f64,
    pub g2: f64,
}

impl RobinTerms {
    /// `∂0p + Q − G1 − G2`, zero on steady Euler flows.
    pub fn defect(&self, dp0: f64) -> f64 {
        dp0 + self.q - self.g1 - self.g2
    }
}

/// [`RobinTerms`] at a jet; all tangential derivatives are taken at fixed `x⁰`.
pub fn robin_terms(gamma: f64, j: &CoordinateJet) -> RobinTerms {
    let g = gamma;
    let (x, p, rho, u) = (j.x, j.p, j.rho, j.u);
    let (s, c) = j.theta.sin_cos();
    let gm = j.metric();
    let u0 = u[0];
    let u02 = u0 * u0;
    let c2 = j.c2(g);
    let m2 = u02 / c2;
    let w2 = j.tangential_speed2();
    let div = x * (j.du[1][1] + j.du[2][2] + c / s * u[1]);
    let dgm = [[0.0, 0.0, 2.0 * x * x * s * c], [0.0; 3]];
    let dw2: [f64; 2] = std::array::from_fn(|a| {
        (1..3).map(|b| 2.0 * gm[b] * u[b] * j.du[a + 1][b] + dgm[a][b] * u[b] * u[b]).sum::<f64>()
    });
    let dc2: [f64; 2] = std::array::from_fn(|a| g * (j.dp[a + 1] / rho - p * j.drho[a + 1] / (rho * rho)));
    let de: [f64; 2] = std::array::from_fn(|a| u0 * j.du[a + 1][0] + 0.5 * dw2[a] + dc2[a] / (g - 1.0));
    let da = j.da(g);
    let along = |f: [f64; 2]| u[1] * f[0] + u[2] * f[1];
    let g1 = -rho * u0 * div / (x * (m2 - 1.0));
    let g2 = (-rho.powf(g) / (g - 1.0) * along([da[1], da[2]]) / u0 - rho * along(dw2) / (2.0 * u0) + rho * along(de) / u0
        - rho * w2 / x
        - u0 * along([j.dp[1], j.dp[2]]) * (1.0 / c2 + 1.0 / u02))
        / (m2 - 1.0);
    RobinTerms { q: 2.0 * g * p * u02 / (x * (u02 - c2)), g1, g2 }
}

/// Radius, polar angle and orthonormal frame `(r̂, θ̂, φ̂)` of grid point `q`.
pub fn point_frame(grid: &ShellGrid, q: usize) -> (f64, f64, [[f64; 3]; 3]) {
    let na = grid.n_ang();
    let a = q % na;
    let (j, k) = (a / grid.sphere.n_lon, a % grid.sphere.n_lon);
    (grid.r(q / na), grid.sphere.theta[j], grid.sphere.frame(j, k))
}

/// Radial derivatives `∂0p`, `∂0²p` and surface Laplacian `Δ'p` of a grid
/// scalar on an unmapped grid.
pub fn pressure_jets(grid: &ShellGrid, p: &[f64]) -> Result<[Vec<f64>; 3]> {
    let cg = CartesianGradient::new(grid, None);
    let pr = cg.d_radial(p);
    let prr = cg.d_radial(&pr);
    let na = grid.n_ang();
    let mut lap = vec![0.0; p.len()];
    for i in 0..grid.n_r() {
        let c = grid.sphere_full.analyze(&p[i * na..(i + 1) * na])?;
        lap[i * na..(i + 1) * na].copy_from_slice(&grid.sphere_full.synthesize(&laplace_beltrami(&c)));
    }
    Ok([pr, prr, lap])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_jet(rng: &mut ChaCha8Rng) -> CoordinateJet {
        let mut r = |a: f64, b: f64| rng.gen_range(a..b);
        let mut hp = [[0.0; 3]; 3];
        let vals: Vec<f64> = (0..6).map(|_| r(-1.0, 1.0)).collect();
        let mut it = vals.into_iter();
        for a in 0..3 {
            for b in a..3 {
                let v = it.next().unwrap();
                hp[a][b] = v;
                hp[b][a] = v;
            }
        }
        CoordinateJet {
            x: r(1.3, 1.8),
            theta: r(0.3, 2.7),
            u: [r(0.7, 0.9), r(-0.1, 0.1), r(-0.1, 0.1)],
            du: std::array::from_fn(|_| std::array::from_fn(|_| r(-1.0, 1.0))),
            p: r(1.0, 1.3),
            dp: std::array::from_fn(|_| r(-1.0, 1.0)),
            hp,
            rho: r(1.0, 1.3),
            drho: std::array::from_fn(|_| r(-1.0, 1.0)),
        }
    }

    #[test]
    fn n_minus_f1_is_the_covariant_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let j = random_jet(&mut rng);
            let lhs = pressure_operator_at(1.4, &j) - f1_transcribed(1.4, &j);
            let rhs = covariant_pressure_equation(1.4, &j);
            assert!((lhs - rhs).abs() < 1e-11 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn f1_vanishes_for_radial_jets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut j = random_jet(&mut rng);
        j.u[1] = 0.0;
        j.u[2] = 0.0;
        j.dp[1] = 0.0;
        j.dp[2] = 0.0;
        j.drho = [j.drho[0], 0.0, 0.0];
        j.du = [[j.du[0][0], 0.0, 0.0], [0.0; 3], [0.0; 3]];
        j.hp = [[j.hp[0][0], 0.0, 0.0], [0.0; 3], [0.0; 3]];
        assert_eq!(f1_transcribed(1.4, &j), 0.0);
    }

    fn random_background(rng: &mut ChaCha8Rng, gamma: f64) -> BackgroundPoint {
        let u: f64 = rng.gen_range(0.3..0.8);
        let p = 1.0;
        let rho: f64 = rng.gen_range(0.8..1.5);
        let x: f64 = rng.gen_range(1.0..2.0);
        let c2 = gamma * p / rho;
        let den = x * (u * u - c2);
        let pr = -2.0 * rho * c2 * u * u / den;
        BackgroundPoint { x, u, p, rho, pr, prr: background_prr(gamma, x, u, p, rho), lap: 0.0 }
    }

    /// Second derivative of the background pressure along the flow, by
    /// central differences over an Euler step.
    fn background_prr(gamma: f64, x: f64, u: f64, p: f64, rho: f64) -> f64 {
        let mut y = [0.0; 3];
        crate::background::radial_rhs(gamma, x, &[u, p, rho], &mut y);
        let h = 1e-5;
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        crate::background::radial_rhs(gamma, x + h, &[u + h * y[0], p + h * y[1], rho + h * y[2]], &mut a);
        crate::background::radial_rhs(gamma, x - h, &[u - h * y[0], p - h * y[1], rho - h * y[2]], &mut b);
        (a[1] - b[1]) / (2.0 * h)
    }

    #[test]
    fn f2_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let g: f64 = rng.gen_range(1.1..1.8);
            let bg = random_background(&mut rng, g);
            let d = PressurePerturbation {
                p: rng.gen_range(-0.03..0.03),
                pr: rng.gen_range(-0.03..0.03),
                prr: rng.gen_range(-0.03..0.03),
                lap: rng.gen_range(-0.03..0.03),
                e: rng.gen_range(-0.03..0.03),
                a: rng.gen_range(-0.03..0.03),
            };
            let a = f2_identity(g, &bg, &d).unwrap();
            let b = f2_transcribed(g, &bg, &d);
            assert!((a - b).abs() < 1e-6 * a.abs().max(1e-8), "{a} vs {b}");
        }
    }

    #[test]
    fn f2_is_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bg = random_background(&mut rng, 1.4);
        let d = PressurePerturbation { p: 0.01, pr: -0.02, prr: 0.015, lap: 0.01, e: 0.005, a: -0.01 };
        let f = |s: f64| f2_transcribed(1.4, &bg, &d.scale(s));
        assert_eq!(f2_transcribed(1.4, &bg, &PressurePerturbation::default()), 0.0);
        let ratio = f(1e-2) / f(5e-3);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }
}
