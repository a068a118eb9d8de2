//! Fixed-point solver for steady subsonic flow in the shell with perturbed
//! boundary data: pressure on the inner sphere, Bernoulli constant, entropy
//! and tangential velocity on the outer sphere.
//!
//! One step of the mapping transports `Ê`, `Â` inward along the streamlines
//! of the current iterate, solves the Dirichlet/Robin pressure problem with
//! the higher-order terms of the current iterate on the right, transports the
//! tangential velocity and recovers `u⁰` from the Bernoulli law.

use crate::background::RadialProfile;
use crate::coeffs::{gamma1, stability_poly, SubsonicOperatorCoeffs};
use crate::elliptic::robin_dirichlet_solve;
use crate::error::{Error, Result};
use crate::gas::{FlowState, GasConstants};
use crate::grid::{ShellField, ShellGrid};
use crate::higher_order::{
    coordinate_jets, f1_transcribed, f2_identity, f2_transcribed, point_frame, pressure_jets, BackgroundPoint,
    PressurePerturbation,
};
use crate::residual::{euler_residual, CartesianGradient, ResidualNorms};
use crate::sphere::{laplace_beltrami, SphCoeffs, SphereGrid};
use crate::transport::{solve_transport, CharacteristicField, Surface, TransportOptions};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// How the quadratic part `F2` of the pressure equation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum F2Route {
    /// Term by term.
    #[default]
    Transcribed,
    /// As `c_b² L(Û) − (N(U) − N(U_b))`.
    Identity,
}

/// Background flow sampled on a shell grid, with the constants of the
/// linearized problem.
#[derive(Debug, Clone)]
pub struct SubsonicProblem {
    pub profile: RadialProfile,
    pub grid: Arc<ShellGrid>,
    pub background: ShellField,
    pub ops: SubsonicOperatorCoeffs,
    pub gamma1: f64,
    points: Vec<BackgroundPoint>,
    jets: [Vec<f64>; 3],
}

impl SubsonicProblem {
    /// Sample `profile` on `grid`, whose radial interval must lie inside the
    /// profile's.
    pub fn new(profile: &RadialProfile, grid: Arc<ShellGrid>) -> Result<Self> {
        let (a, b) = (grid.radial.a, grid.radial.b);
        if a < profile.r_lo - 1e-12 || b > profile.r_hi + 1e-12 {
            return Err(Error::Config(format!(
                "grid [{a}, {b}] exceeds the background interval [{}, {}]",
                profile.r_lo, profile.r_hi
            )));
        }
        let nodes: Vec<f64> = (0..grid.n_r()).map(|i| grid.r(i)).collect();
        let states = profile.sample(&nodes)?;
        let background = ShellField::from_fn(grid.clone(), |r, _, _| {
            let i = nodes.iter().position(|&x| x == r).unwrap_or(0);
            let y = states[i];
            FlowState { u0: y[0], ut: [0.0; 2], p: y[1], rho: y[2] }
        });
        let radial_jets: Vec<_> = nodes.iter().map(|&x| profile.jet(x)).collect();
        let points = (0..grid.len())
            .map(|q| {
                let i = q / grid.n_ang();
                BackgroundPoint {
                    x: grid.r(i),
                    u: background.u0[q],
                    p: background.p[q],
                    rho: background.rho[q],
                    pr: radial_jets[i].dy[1],
                    prr: radial_jets[i].d2y[1],
                    lap: 0.0,
                }
            })
            .collect();
        let jets = pressure_jets(&grid, &background.p)?;
        Ok(SubsonicProblem {
            profile: profile.clone(),
            ops: SubsonicOperatorCoeffs::new(profile),
            gamma1: gamma1(profile, b)?,
            grid,
            background,
            points,
            jets,
        })
    }

    pub fn gas(&self) -> GasConstants {
        self.profile.gas
    }

    pub fn gamma(&self) -> f64 {
        self.profile.gas.gamma
    }

    /// Background Bernoulli constant.
    pub fn e_b(&self) -> f64 {
        self.points[0].bernoulli(self.gamma())
    }

    /// Background entropy function `A(s_b)`.
    pub fn a_b(&self) -> f64 {
        self.points[0].entropy_function(self.gamma())
    }

    /// Largest value of the stability polynomial at `t = M_b²` over the
    /// radial nodes; the stability condition asks for a negative value.
    pub fn stability_margin(&self) -> f64 {
        (0..self.grid.n_r()).map(|i| stability_poly(self.gamma(), self.profile.t(self.grid.r(i)))).fold(f64::MIN, f64::max)
    }

    /// `Û` at point `q`; pressure derivatives are differences of discrete
    /// derivatives so that the discretization error of the background cancels.
    fn perturbation(&self, field: &ShellField, jets: &[Vec<f64>; 3], q: usize) -> Result<PressurePerturbation> {
        let gas = self.gas();
        let s = field.state(q);
        let bg = &self.points[q];
        Ok(PressurePerturbation {
            p: s.p - bg.p,
            pr: jets[0][q] - self.jets[0][q],
            prr: jets[1][q] - self.jets[1][q],
            lap: jets[2][q] - self.jets[2][q],
            e: s.bernoulli(&gas)? - bg.bernoulli(gas.gamma),
            a: s.entropy_function(&gas)? - bg.entropy_function(gas.gamma),
        })
    }
}

/// Component of a boundary perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryField {
    /// Pressure on the inner sphere.
    P0,
    /// Bernoulli constant on the outer sphere.
    E1,
    /// Entropy on the outer sphere.
    S1,
    /// Gradient part `∇Y` of the tangential velocity on the outer sphere.
    U1,
    /// Rotational part `*∇Y` of the tangential velocity on the outer sphere.
    U1Curl,
}

impl std::str::FromStr for BoundaryField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p0" => Ok(BoundaryField::P0),
            "E1" | "e1" => Ok(BoundaryField::E1),
            "s1" => Ok(BoundaryField::S1),
            "u1" => Ok(BoundaryField::U1),
            "u1_curl" => Ok(BoundaryField::U1Curl),
            _ => Err(Error::Parse(format!("unknown boundary field '{s}'"))),
        }
    }
}

/// Single-harmonic perturbation `amp·Y_n^m` of one boundary field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPerturbation {
    pub field: BoundaryField,
    pub n: usize,
    pub m: i64,
    pub amp: f64,
}

/// Boundary data on the grid nodes of the two spheres.
#[derive(Debug, Clone)]
pub struct SubsonicBCs {
    pub p0: Vec<f64>,
    pub e1: Vec<f64>,
    pub s1: Vec<f64>,
    /// Orthonormal components `(u_θ, u_φ)` of the tangential velocity on M1.
    pub u1: [Vec<f64>; 2],
    /// Sum of the maxima of `|u1′|`, `|E1 − E_b|`, `|s1 − s_b|`, `|p0 − p_b|`.
    pub eps: f64,
}

impl SubsonicBCs {
    /// The data of the background itself.
    pub fn unperturbed(problem: &SubsonicProblem) -> Result<Self> {
        Self::from_perturbations(problem, &[])
    }

    /// Background data plus a sum of single harmonics.
    pub fn from_perturbations(problem: &SubsonicProblem, list: &[BoundaryPerturbation]) -> Result<Self> {
        let sph = &problem.grid.sphere;
        let l = sph.l_max;
        let mut c = [SphCoeffs::zeros(l), SphCoeffs::zeros(l), SphCoeffs::zeros(l), SphCoeffs::zeros(l), SphCoeffs::zeros(l)];
        for pt in list {
            if pt.n > l || pt.m.unsigned_abs() as usize > pt.n {
                return Err(Error::Config(format!("harmonic ({}, {}) outside degree {l}", pt.n, pt.m)));
            }
            let k = pt.field as usize;
            c[k].set(pt.n, pt.m, c[k].get(pt.n, pt.m) + pt.amp);
        }
        let gas = problem.gas();
        let s_b = gas.entropy(problem.a_b())?;
        let na = problem.grid.n_ang();
        let p_b0 = problem.background.p[0];
        let p0 = sph.synthesize(&c[0]).iter().map(|v| p_b0 + v).collect();
        let e1 = sph.synthesize(&c[1]).iter().map(|v| problem.e_b() + v).collect();
        let s1 = sph.synthesize(&c[2]).iter().map(|v| s_b + v).collect();
        let (ut, up) = sph.synthesize_tangent(&c[3], &c[4]);
        debug_assert_eq!(ut.len(), na);
        Self::from_values(problem, p0, e1, s1, [ut, up])
    }

    /// Data from grid values; measures `eps`.
    pub fn from_values(problem: &SubsonicProblem, p0: Vec<f64>, e1: Vec<f64>, s1: Vec<f64>, u1: [Vec<f64>; 2]) -> Result<Self> {
        let na = problem.grid.n_ang();
        for (name, v) in [("p0", &p0), ("E1", &e1), ("s1", &s1), ("u1_theta", &u1[0]), ("u1_phi", &u1[1])] {
            if v.len() != na {
                return Err(Error::Config(format!("{name} has {} values, expected {na}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("non-finite value in {name}")));
            }
        }
        if p0.iter().any(|&p| p <= 0.0) {
            return Err(Error::Domain("non-positive entry pressure".into()));
        }
        let gas = problem.gas();
        let s_b = gas.entropy(problem.a_b())?;
        let p_b0 = problem.background.p[0];
        let sup = |v: &[f64], c: f64| v.iter().fold(0.0f64, |a, x| a.max((x - c).abs()));
        let speed = (0..na).fold(0.0f64, |a, i| a.max(u1[0][i].hypot(u1[1][i])));
        let eps = speed + sup(&e1, problem.e_b()) + sup(&s1, s_b) + sup(&p0, p_b0);
        Ok(SubsonicBCs { p0, e1, s1, u1, eps })
    }

    /// Entropy function `A(s1)` on M1.
    pub fn a1(&self, gas: &GasConstants) -> Vec<f64> {
        self.s1.iter().map(|&s| gas.entropy_function_of(s)).collect()
    }
}

/// `F1`, `F2` and `F = (F1 + F2)/c_b²` on the grid.
#[derive(Debug, Clone)]
pub struct FTerms {
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub f: Vec<f64>,
}

/// Higher-order right-hand side of the pressure equation at the iterate `u`.
pub fn higher_order_f(problem: &SubsonicProblem, u: &ShellField, route: F2Route) -> Result<FTerms> {
    let g = problem.gamma();
    let jets = coordinate_jets(u)?;
    let pj = pressure_jets(&problem.grid, &u.p)?;
    let n = problem.grid.len();
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut f = vec![0.0; n];
    for q in 0..n {
        let bg = &problem.points[q];
        let d = problem.perturbation(u, &pj, q)?;
        f1[q] = f1_transcribed(g, &jets[q]);
        f2[q] = match route {
            F2Route::Transcribed => f2_transcribed(g, bg, &d),
            F2Route::Identity => f2_identity(g, bg, &d)?,
        };
        f[q] = (f1[q] + f2[q]) / bg.c2(g);
    }
    Ok(FTerms { f1, f2, f })
}

/// `F2` by both routes at the iterate `u`.
pub fn f2_both_routes(problem: &SubsonicProblem, u: &ShellField) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = problem.gamma();
    let pj = pressure_jets(&problem.grid, &u.p)?;
    let mut tr = Vec::with_capacity(u.p.len());
    let mut id = Vec::with_capacity(u.p.len());
    for q in 0..problem.grid.len() {
        let d = problem.perturbation(u, &pj, q)?;
        tr.push(f2_transcribed(g, &problem.points[q], &d));
        id.push(f2_identity(g, &problem.points[q], &d)?);
    }
    Ok((tr, id))
}

/// Parts of the Robin data on the outer sphere.
#[derive(Debug, Clone)]
pub struct GTerms {
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub g3: Vec<f64>,
    pub g: Vec<f64>,
}

fn level<'a>(grid: &ShellGrid, v: &'a [f64], i: usize) -> &'a [f64] {
    let na = grid.n_ang();
    &v[i * na..(i + 1) * na]
}

fn surface_grad(sphere: &SphereGrid, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(sphere.gradient(&sphere.analyze(f)?))
}

/// Higher-order Robin data `G = G1 + G2 + G3` at the iterate `u`. The
/// Bernoulli constant and the entropy on M1 are taken from the data, the
/// pressure and the tangential velocity from the iterate; `G3` is the exact
/// remainder `γ1 p̂ − (Q − Q_b)` of `Q = 2γp(u⁰)²/(x⁰((u⁰)² − c²))`.
pub fn higher_order_g(problem: &SubsonicProblem, u: &ShellField, bcs: &SubsonicBCs) -> Result<GTerms> {
    let grid = &*problem.grid;
    let gas = problem.gas();
    let g = gas.gamma;
    let io = grid.n_r() - 1;
    let x = grid.r(io);
    let na = grid.n_ang();
    let sph = &grid.sphere_full;
    let p = level(grid, &u.p, io);
    let ut = level(grid, &u.u_theta, io);
    let up = level(grid, &u.u_phi, io);
    let a1 = bcs.a1(&gas);
    let w2: Vec<f64> = (0..na).map(|a| ut[a] * ut[a] + up[a] * up[a]).collect();
    let (alpha, _) = sph.analyze_tangent(ut, up)?;
    let div = sph.synthesize(&laplace_beltrami(&alpha));
    let grads = [
        surface_grad(sph, &a1)?,
        surface_grad(sph, &w2)?,
        surface_grad(sph, &bcs.e1)?,
        surface_grad(sph, p)?,
    ];
    let bq = io * na;
    let (ub, pb, rb) = (problem.background.u0[bq], problem.background.p[bq], problem.background.rho[bq]);
    let cb = g * pb / rb;
    let q_b = 2.0 * g * pb * ub * ub / (x * (ub * ub - cb));
    let mut out = GTerms { g1: vec![0.0; na], g2: vec![0.0; na], g3: vec![0.0; na], g: vec![0.0; na] };
    for a in 0..na {
        let rho = gas.rho_from_entropy(a1[a], p[a])?;
        let c2 = g * p[a] / rho;
        let u02 = 2.0 * bcs.e1[a] - 2.0 * c2 / (g - 1.0) - w2[a];
        if !(u02 > 0.0) {
            return Err(Error::TrustRegion(format!("no radial speed left on the outer sphere ({u02:e})")));
        }
        let u0 = u02.sqrt();
        let m2 = u02 / c2;
        let along = |k: usize| (ut[a] * grads[k].0[a] + up[a] * grads[k].1[a]) / x;
        let q = 2.0 * g * p[a] * u02 / (x * (u02 - c2));
        out.g1[a] = -rho * u0 * div[a] / (x * (m2 - 1.0));
        out.g2[a] = (-rho.powf(g) / (g - 1.0) * along(0) / u0 - rho * along(1) / (2.0 * u0) + rho * along(2) / u0
            - rho * w2[a] / x
            - u0 * along(3) * (1.0 / c2 + 1.0 / u02))
            / (m2 - 1.0);
        out.g3[a] = problem.gamma1 * (p[a] - pb) - (q - q_b);
        out.g[a] = out.g1[a] + out.g2[a] + out.g3[a];
    }
    Ok(out)
}

/// Iteration controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SubsonicOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest admissible perturbation size.
    pub eps0: f64,
    pub route: F2Route,
    /// Run even if the stability polynomial is nonnegative somewhere.
    pub allow_unstable: bool,
    pub substeps: usize,
}

impl Default for SubsonicOptions {
    fn default() -> Self {
        SubsonicOptions { tol: 1e-10, max_iter: 100, eps0: 0.05, route: F2Route::Transcribed, allow_unstable: false, substeps: 1 }
    }
}

/// Diagnostics of a run of the fixed-point iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationReport {
    pub eps: f64,
    /// `‖U_{k+1} − U_k‖₂` per iteration.
    pub corrections: Vec<f64>,
    /// Successive quotients of the corrections.
    pub ratios: Vec<f64>,
    /// Largest of the last five quotients.
    pub contraction: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Trust-region constant `K = max(2C̃, 1)`.
    pub trust_k: f64,
    /// `‖U − U_b‖₂` of the final iterate.
    pub distance: f64,
    pub residual: ResidualNorms,
    pub background_residual: ResidualNorms,
}

/// Grid surrogate of a `C²` norm: the maxima of `|v|` and of its first and
/// second differences along the three grid directions.
pub fn grid_norm(grid: &ShellGrid, v: &[f64]) -> f64 {
    let (nr, nl, nk) = (grid.n_r(), grid.sphere.n_lat, grid.sphere.n_lon);
    let at = |i: usize, j: usize, k: usize| v[grid.index(i, j, k)];
    let (mut m0, mut m1, mut m2) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..nr {
        for j in 0..nl {
            for k in 0..nk {
                let c = at(i, j, k);
                m0 = m0.max(c.abs());
                let kp = at(i, j, (k + 1) % nk);
                let km = at(i, j, (k + nk - 1) % nk);
                m1 = m1.max((kp - c).abs());
                m2 = m2.max((kp - 2.0 * c + km).abs());
                if i + 1 < nr {
                    m1 = m1.max((at(i + 1, j, k) - c).abs());
                    if i > 0 {
                        m2 = m2.max((at(i + 1, j, k) - 2.0 * c + at(i - 1, j, k)).abs());
                    }
                }
                if j + 1 < nl {
                    m1 = m1.max((at(i, j + 1, k) - c).abs());
                    if j > 0 {
                        m2 = m2.max((at(i, j + 1, k) - 2.0 * c + at(i, j - 1, k)).abs());
                    }
                }
            }
        }
    }
    m0 + m1 + m2
}

/// Sum of [`grid_norm`] over the components of `a − b`.
pub fn field_distance(a: &ShellField, b: &ShellField) -> f64 {
    let g = &*a.grid;
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>();
    [(&a.u0, &b.u0), (&a.u_theta, &b.u_theta), (&a.u_phi, &b.u_phi), (&a.p, &b.p), (&a.rho, &b.rho)]
        .iter()
        .map(|(x, y)| grid_norm(g, &diff(x, y)))
        .sum()
}

/// One application of the fixed-point mapping.
pub fn subsonic_step(problem: &SubsonicProblem, u: &ShellField, bcs: &SubsonicBCs, opts: &SubsonicOptions) -> Result<ShellField> {
    let grid = &problem.grid;
    let gas = problem.gas();
    let g = gas.gamma;
    let (n, na, nr) = (grid.len(), grid.n_ang(), grid.n_r());
    let topts = TransportOptions { substeps: opts.substeps };
    let cf = CharacteristicField::from_field(u, None)?;
    let (e_b, a_b) = (problem.e_b(), problem.a_b());
    let e_data: Vec<f64> = bcs.e1.iter().map(|e| e - e_b).collect();
    let a_data: Vec<f64> = bcs.a1(&gas).iter().map(|a| a - a_b).collect();
    let e_hat = solve_transport(&cf, None, None, &e_data, Surface::Outer, topts)?;
    let a_hat = solve_transport(&cf, None, None, &a_data, Surface::Outer, topts)?;

    let ft = higher_order_f(problem, u, opts.route)?;
    let gt = higher_order_g(problem, u, bcs)?;
    let mut rhs = vec![0.0; n];
    for i in 0..nr {
        let x = grid.r(i);
        let [s1, s2] = problem.ops.source_factors(x)?;
        for a in 0..na {
            let q = i * na + a;
            rhs[q] = x * x * ft.f[q] - s1 * e_hat[q] - s2 * a_hat[q];
        }
    }
    let g0: Vec<f64> = (0..na).map(|a| bcs.p0[a] - problem.background.p[a]).collect();
    let sol = robin_dirichlet_solve(grid, &problem.ops, problem.gamma1, &rhs, &g0, &gt.g)?;

    let p: Vec<f64> = (0..n).map(|q| problem.background.p[q] + sol.p[q]).collect();
    if p.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::TrustRegion("pressure iterate is not positive".into()));
    }
    let rho: Vec<f64> = (0..n).map(|q| gas.rho_from_entropy(a_b + a_hat[q], p[q])).collect::<Result<_>>()?;

    let cg = CartesianGradient::new(grid, None);
    let (gpt, gpp) = cg.surface_gradient(&p)?;
    let mut damp = vec![0.0; n];
    let mut src = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for q in 0..n {
        let (x, _, fr) = point_frame(grid, q);
        damp[q] = u.u0[q] / x;
        let w2 = u.u_theta[q].powi(2) + u.u_phi[q].powi(2);
        for c in 0..3 {
            src[c][q] = -(gpt[q] * fr[1][c] + gpp[q] * fr[2][c]) / (x * rho[q]) - w2 / x * fr[0][c];
        }
    }
    let io = nr - 1;
    let mut w = Vec::with_capacity(3);
    for c in 0..3 {
        let data: Vec<f64> = (0..na)
            .map(|a| {
                let (_, _, fr) = point_frame(grid, io * na + a);
                bcs.u1[0][a] * fr[1][c] + bcs.u1[1][a] * fr[2][c]
            })
            .collect();
        w.push(solve_transport(&cf, Some(&damp), Some(&src[c]), &data, Surface::Outer, topts)?);
    }

    let mut out = problem.background.clone();
    for q in 0..n {
        let (_, _, fr) = point_frame(grid, q);
        let wt = (0..3).map(|c| w[c][q] * fr[1][c]).sum::<f64>();
        let wp = (0..3).map(|c| w[c][q] * fr[2][c]).sum::<f64>();
        let c2 = g * p[q] / rho[q];
        let k = 2.0 * (e_b + e_hat[q]) - 2.0 * c2 / (g - 1.0) - wt * wt - wp * wp;
        if !(k > 0.0) {
            return Err(Error::TrustRegion(format!("no radial speed left at radius {}", grid.r(q / na))));
        }
        out.u0[q] = k.sqrt();
        out.u_theta[q] = wt;
        out.u_phi[q] = wp;
        out.p[q] = p[q];
        out.rho[q] = rho[q];
    }
    Ok(out)
}

/// Solve the perturbed problem by iterating [`subsonic_step`] from the
/// background.
pub fn iterate_subsonic(problem: &SubsonicProblem, bcs: &SubsonicBCs, opts: &SubsonicOptions) -> Result<(ShellField, IterationReport)> {
    if !opts.allow_unstable {
        let m = problem.stability_margin();
        if !(m < 0.0) {
            return Err(Error::StabilityCondition(format!("stability polynomial reaches {m:.6e} on the background")));
        }
    }
    if bcs.eps > opts.eps0 {
        return Err(Error::Precondition(format!("perturbation size {:e} exceeds {:e}", bcs.eps, opts.eps0)));
    }
    let gas = problem.gas();
    let mut u = problem.background.clone();
    let mut corrections = Vec::new();
    let mut trust_k = 1.0;
    let mut converged = false;
    for it in 0..opts.max_iter {
        let next = subsonic_step(problem, &u, bcs, opts)?;
        let dc = field_distance(&next, &u);
        let dist = field_distance(&next, &problem.background);
        if it == 0 && bcs.eps > 0.0 {
            trust_k = (2.0 * dist / bcs.eps).max(1.0);
        } else if bcs.eps > 0.0 && dist > trust_k * bcs.eps {
            return Err(Error::TrustRegion(format!(
                "iterate {} is {dist:e} from the background, beyond K·ε = {:e}",
                it + 1,
                trust_k * bcs.eps
            )));
        }
        corrections.push(dc);
        u = next;
        if dc < opts.tol {
            converged = true;
            break;
        }
    }
    let ratios: Vec<f64> = corrections.windows(2).map(|w| w[1] / w[0]).collect();
    let contraction = ratios.iter().rev().take(5).fold(0.0f64, |a, &r| a.max(r));
    let report = IterationReport {
        eps: bcs.eps,
        iterations: corrections.len(),
        corrections,
        ratios,
        contraction,
        converged,
        trust_k,
        distance: field_distance(&u, &problem.background),
        residual: euler_residual(&u, &gas)?.norms,
        background_residual: euler_residual(&problem.background, &gas)?.norms,
    };
    Ok((u, report))
}

/// The flow of `profile` as a source centred at `c` instead of the origin,
/// sampled on `grid`: an exact steady Euler flow that is not symmetric about
/// the shell centre.
pub fn off_centre_source_flow(profile: &RadialProfile, grid: Arc<ShellGrid>, c: [f64; 3]) -> Result<ShellField> {
    let n = grid.len();
    let mut rel = Vec::with_capacity(n);
    for q in 0..n {
        let (r, _, fr) = point_frame(&grid, q);
        rel.push(std::array::from_fn::<f64, 3, _>(|a| r * fr[0][a] - c[a]));
    }
    let d: Vec<f64> = rel.iter().map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()).collect();
    if d.iter().any(|&d| d < profile.r_lo || d > profile.r_hi) {
        return Err(Error::Config("shifted shell leaves the background interval".into()));
    }
    let ys = profile.sample(&d)?;
    let mut out = ShellField::from_fn(grid.clone(), |_, _, _| FlowState { u0: 0.0, ut: [0.0; 2], p: 1.0, rho: 1.0 });
    for q in 0..n {
        let (_, _, fr) = point_frame(&grid, q);
        let y = ys[q];
        let comp = |l: usize| (0..3).map(|a| y[0] * rel[q][a] / d[q] * fr[l][a]).sum::<f64>();
        out.u0[q] = comp(0);
        out.u_theta[q] = comp(1);
        out.u_phi[q] = comp(2);
        out.p[q] = y[1];
        out.rho[q] = y[2];
    }
    Ok(out)
}
