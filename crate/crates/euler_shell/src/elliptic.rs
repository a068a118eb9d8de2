//! Mode-wise solution of the pressure equations: two-point boundary value
//! problems for each spherical-harmonic degree, the nonlocal problem with the
//! second-order tangential (Venttsel) condition at the inner sphere, the
//! Robin-Dirichlet problem of the subsonic flow, and the S-Condition check.
//!
//! Every mode problem is written as `v'' + p v' + q_n v = r v(a) + f̃` with
//! `p = e2/e1`, `q_n = (e3 + λ_n)/e1`, `r = −e4/e1`, `f̃ = f/e1`, solved by a
//! fundamental pair at the left endpoint and variation of parameters.

use crate::background::{solve_transonic_background, TransonicBackground, TransonicParams};
use crate::coeffs::{e_coeffs, mu_constants, ECoeffs, MuConstants, SubsonicOperatorCoeffs};
use crate::error::{Error, Result};
use crate::grid::ShellGrid;
use crate::numerics::cheb::ChebGrid;
use crate::numerics::ode::{DenseSolution, Dopri5};
use crate::sphere::SphCoeffs;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Coefficients `[e1, e2, e3, e4]` of a radial operator
/// `e1 ∂² + e2 ∂ + e3 − Δ' + e4 i*`.
pub trait RadialCoefficients: Sync {
    fn e(&self, y: f64) -> [f64; 4];
}

impl<F: Fn(f64) -> [f64; 4] + Sync> RadialCoefficients for F {
    fn e(&self, y: f64) -> [f64; 4] {
        self(y)
    }
}

impl RadialCoefficients for ECoeffs {
    fn e(&self, y: f64) -> [f64; 4] {
        match self.eval(y) {
            Ok(e) => [e[0], e[1], e[2], e[3]],
            Err(_) => [f64::NAN; 4],
        }
    }
}

impl RadialCoefficients for SubsonicOperatorCoeffs {
    fn e(&self, y: f64) -> [f64; 4] {
        self.eval(y).unwrap_or([f64::NAN; 4])
    }
}

fn integrator() -> Dopri5 {
    Dopri5 { rtol: 1e-12, atol: 1e-14, max_steps: 2_000_000, initial_fraction: 1e-4 }
}

/// Which failure a singular mode system reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Venttsel,
    RobinDirichlet,
}

/// Two-point problem of one harmonic degree on `[a, b]` with boundary rows
/// `left[0] v(a) + left[1] v'(a) = h_L` and `right[0] v(b) + right[1] v'(b) = h_R`.
pub struct ModeBVP<'a> {
    pub n: usize,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub coeffs: &'a dyn RadialCoefficients,
    pub left: [f64; 2],
    pub right: [f64; 2],
    pub nonlocal: bool,
    pub kind: ModeKind,
}

/// Fundamental solutions with `(φ¹, φ¹′) = (1, 0)` and `(φ², φ²′) = (0, 1)` at `a`.
pub struct CauchyPair {
    pub solution: DenseSolution,
}

impl CauchyPair {
    /// `[φ¹, φ¹′, φ², φ²′]` at `y`.
    pub fn eval(&self, y: f64) -> [f64; 4] {
        let v = self.solution.eval(y);
        [v[0], v[1], v[2], v[3]]
    }

    /// Denominator `φ¹φ²′ − φ¹′φ²` of the variation-of-parameters kernel.
    pub fn wronskian(&self, y: f64) -> f64 {
        let v = self.eval(y);
        v[0] * v[3] - v[1] * v[2]
    }

    /// Kernel `K(t, s)`.
    pub fn kernel(&self, t: f64, s: f64) -> f64 {
        let (ps, pt) = (self.eval(s), self.eval(t));
        (ps[0] * pt[2] - pt[0] * ps[2]) / (ps[0] * ps[3] - ps[1] * ps[2])
    }
}

/// Values and derivatives of a mode solution on the radial nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
}

impl<'a> ModeBVP<'a> {
    /// Mode problem of the nonlocal equation with the condition
    /// `μ9 v'(r_b) + (μ7 + λ_n) v(r_b) = h0` and `v(r1) = h1`.
    pub fn venttsel(n: usize, coeffs: &'a dyn RadialCoefficients, r_b: f64, r1: f64, mu7: f64, mu9: f64) -> Self {
        let lambda = (n * (n + 1)) as f64;
        ModeBVP {
            n,
            lambda,
            a: r_b,
            b: r1,
            coeffs,
            left: [(mu7 + lambda) / mu9, 1.0],
            right: [1.0, 0.0],
            nonlocal: true,
            kind: ModeKind::Venttsel,
        }
    }

    /// Mode problem with `v(r0) = g0` and `v'(r1) + γ1 v(r1) = g1`.
    pub fn robin_dirichlet(n: usize, coeffs: &'a dyn RadialCoefficients, r0: f64, r1: f64, gamma1: f64) -> Self {
        ModeBVP {
            n,
            lambda: (n * (n + 1)) as f64,
            a: r0,
            b: r1,
            coeffs,
            left: [1.0, 0.0],
            right: [gamma1, 1.0],
            nonlocal: false,
            kind: ModeKind::RobinDirichlet,
        }
    }

    /// `(p, q_n, r, e1)` at `y`.
    pub fn pqr(&self, y: f64) -> (f64, f64, f64, f64) {
        let e = self.coeffs.e(y);
        let r = if self.nonlocal { -e[3] / e[0] } else { 0.0 };
        (e[1] / e[0], (e[2] + self.lambda) / e[0], r, e[0])
    }

    fn check_coeffs(&self) -> Result<()> {
        for i in 0..=32 {
            let y = self.a + (self.b - self.a) * i as f64 / 32.0;
            let (p, q, r, e1) = self.pqr(y);
            if !(p.is_finite() && q.is_finite() && r.is_finite()) || e1 == 0.0 {
                return Err(Error::Domain(format!("mode coefficients not finite at y = {y}")));
            }
        }
        Ok(())
    }

    pub fn cauchy_pair(&self) -> Result<CauchyPair> {
        self.check_coeffs()?;
        let solution = integrator().solve(
            |y, s, o| {
                let (p, q, _, _) = self.pqr(y);
                o[0] = s[1];
                o[1] = -p * s[1] - q * s[0];
                o[2] = s[3];
                o[3] = -p * s[3] - q * s[2];
            },
            self.a,
            &[1.0, 0.0, 0.0, 1.0],
            self.b,
            |_, _| false,
        )?;
        Ok(CauchyPair { solution })
    }

    /// Solve for several right-hand sides sharing the operator. `f[m]` holds
    /// `f` (not divided by `e1`) on the nodes of `radial`, which must span `[a, b]`.
    pub fn solve(&self, radial: &ChebGrid, f: &[Vec<f64>], h_left: &[f64], h_right: &[f64]) -> Result<Vec<ModeSolution>> {
        self.check_coeffs()?;
        let k = f.len();
        if h_left.len() != k || h_right.len() != k || f.iter().any(|v| v.len() != radial.len()) {
            return Err(Error::Config("mode data sizes do not match".into()));
        }
        if (radial.a - self.a).abs() > 1e-12 || (radial.b - self.b).abs() > 1e-12 {
            return Err(Error::Config("radial nodes do not span the mode interval".into()));
        }
        let zero: Vec<bool> = f.iter().map(|v| v.iter().all(|x| *x == 0.0)).collect();
        let dim = 6 + 2 * k;
        let mut y0 = vec![0.0; dim];
        y0[0] = 1.0;
        y0[3] = 1.0;
        let mut fv = vec![0.0; k];
        let states = integrator().solve_at(
            |y, s, o| {
                let (p, q, r, e1) = self.pqr(y);
                o[0] = s[1];
                o[1] = -p * s[1] - q * s[0];
                o[2] = s[3];
                o[3] = -p * s[3] - q * s[2];
                let w = s[0] * s[3] - s[1] * s[2];
                let (g1, g2) = (s[0] / w, s[2] / w);
                o[4] = g1 * r;
                o[5] = g2 * r;
                if zero.iter().all(|z| *z) {
                    o[6..].iter_mut().for_each(|x| *x = 0.0);
                    return;
                }
                let wts = radial.interp_weights(y);
                for m in 0..k {
                    fv[m] = if zero[m] { 0.0 } else { wts.iter().zip(&f[m]).map(|(a, b)| a * b).sum::<f64>() / e1 };
                    o[6 + 2 * m] = g1 * fv[m];
                    o[7 + 2 * m] = g2 * fv[m];
                }
            },
            self.a,
            &y0,
            &radial.nodes,
        )?;
        let last = states.last().ok_or_else(|| Error::Numeric("empty radial grid".into()))?;
        let part = |s: &[f64], i: usize| (s[2] * s[i] - s[0] * s[i + 1], s[3] * s[i] - s[1] * s[i + 1]);
        let (rb, rbd) = part(last, 4);
        let [al, bl] = self.left;
        let [ar, br] = self.right;
        // unknowns c1 = v(a), c2 = v'(a)
        let m11 = al;
        let m12 = bl;
        let m21 = ar * (last[0] + rb) + br * (last[1] + rbd);
        let m22 = ar * last[2] + br * last[3];
        let det = m11 * m22 - m12 * m21;
        let scale = (m11.abs() + m12.abs()) * (m21.abs() + m22.abs());
        if !(det.abs() > 1e-10 * scale) {
            return Err(match self.kind {
                ModeKind::Venttsel => Error::SCondition(self.n),
                ModeKind::RobinDirichlet => {
                    Error::StabilityCondition(format!("mode problem of degree {} is singular", self.n))
                }
            });
        }
        let mut out = Vec::with_capacity(k);
        for m in 0..k {
            let (fb, fbd) = part(last, 6 + 2 * m);
            let r1 = h_left[m];
            let r2 = h_right[m] - ar * fb - br * fbd;
            let c1 = (r1 * m22 - m12 * r2) / det;
            let c2 = (m11 * r2 - m21 * r1) / det;
            let mut v = Vec::with_capacity(radial.len());
            let mut dv = Vec::with_capacity(radial.len());
            for s in &states {
                let (rr, rrd) = part(s, 4);
                let (ff, ffd) = part(s, 6 + 2 * m);
                v.push(c1 * (s[0] + rr) + c2 * s[2] + ff);
                dv.push(c1 * (s[1] + rrd) + c2 * s[3] + ffd);
            }
            out.push(ModeSolution { v, dv });
        }
        Ok(out)
    }

    /// Second-order finite-difference reference solution on `N + 1` uniform
    /// points, with the nonlocal term as a dense column.
    pub fn finite_difference_solve<F: Fn(f64) -> f64>(&self, f: F, h_left: f64, h_right: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (self.b - self.a) / n as f64;
        let ys: Vec<f64> = (0..=n).map(|k| self.a + k as f64 * h).collect();
        // rows k = 1..n−1: lo v_{k−1} + di v_k + up v_{k+1} + nl v_0 = rhs
        let mut lo = vec![0.0; n + 1];
        let mut di = vec![0.0; n + 1];
        let mut up = vec![0.0; n + 1];
        let mut nl = vec![0.0; n + 1];
        let mut rhs = vec![0.0; n + 1];
        for k in 1..n {
            let (p, q, r, e1) = self.pqr(ys[k]);
            lo[k] = 1.0 / (h * h) - p / (2.0 * h);
            di[k] = -2.0 / (h * h) + q;
            up[k] = 1.0 / (h * h) + p / (2.0 * h);
            nl[k] = -r;
            rhs[k] = f(ys[k]) / e1;
        }
        let [ar, br] = self.right;
        // right row a2 v_{n−2} + a1 v_{n−1} + a0 v_n = h_right; eliminate v_{n−2} with row n−1
        let (a2, a1, a0) = (br / (2.0 * h), -4.0 * br / (2.0 * h), ar + 3.0 * br / (2.0 * h));
        let s = a2 / lo[n - 1];
        let last = (a1 - s * di[n - 1], a0 - s * up[n - 1], -s * nl[n - 1], h_right - s * rhs[n - 1]);
        // v = c X + Y with X_0 = 1, Y_0 = 0 solved by the Thomas algorithm on v_1..v_n
        let solve = |v0: f64, with_rhs: bool| -> Vec<f64> {
            let m = n;
            let mut a = vec![0.0; m + 1];
            let mut bb = vec![0.0; m + 1];
            let mut c = vec![0.0; m + 1];
            let mut d = vec![0.0; m + 1];
            for k in 1..n {
                a[k] = lo[k];
                bb[k] = di[k];
                c[k] = up[k];
                d[k] = if with_rhs { rhs[k] } else { 0.0 } - nl[k] * v0;
            }
            d[1] -= lo[1] * v0;
            a[1] = 0.0;
            a[n] = last.0;
            bb[n] = last.1;
            c[n] = 0.0;
            d[n] = if with_rhs { last.3 } else { 0.0 } - last.2 * v0;
            for k in 2..=n {
                let w = a[k] / bb[k - 1];
                bb[k] -= w * c[k - 1];
                d[k] -= w * d[k - 1];
            }
            let mut v = vec![0.0; n + 1];
            v[0] = v0;
            v[n] = d[n] / bb[n];
            for k in (1..n).rev() {
                v[k] = (d[k] - c[k] * v[k + 1]) / bb[k];
            }
            v
        };
        let x = solve(1.0, false);
        let y = solve(0.0, true);
        let [al, bl] = self.left;
        let dx = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h);
        let dy = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
        let c = (h_left - bl * dy) / (al * x[0] + bl * dx);
        let v = x.iter().zip(&y).map(|(a, b)| c * a + b).collect();
        (ys, v)
    }
}

/// Grid values of a solution of the full problem and of its radial derivative.
#[derive(Debug, Clone)]
pub struct ModeField {
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
}

fn analyze_levels(grid: &ShellGrid, f: &[f64]) -> Result<Vec<SphCoeffs>> {
    let na = grid.n_ang();
    (0..grid.n_r()).map(|i| grid.sphere.analyze(&f[i * na..(i + 1) * na])).collect()
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Config(format!("{name} has {} values, expected {n}", v.len())));
    }
    Ok(())
}

fn synthesize_modes(grid: &ShellGrid, sols: &[(usize, i64, ModeSolution)]) -> ModeField {
    let l = grid.sphere.l_max;
    let na = grid.n_ang();
    let mut p = vec![0.0; grid.len()];
    let mut dp = vec![0.0; grid.len()];
    for i in 0..grid.n_r() {
        let mut cv = SphCoeffs::zeros(l);
        let mut cd = SphCoeffs::zeros(l);
        for (n, m, s) in sols {
            cv.set(*n, *m, s.v[i]);
            cd.set(*n, *m, s.dv[i]);
        }
        p[i * na..(i + 1) * na].copy_from_slice(&grid.sphere.synthesize(&cv));
        dp[i * na..(i + 1) * na].copy_from_slice(&grid.sphere.synthesize(&cd));
    }
    ModeField { p, dp }
}

/// Nonlocal problem on a shell grid over `[r_b, r1]`:
/// `𝔏p = f`, `p = h1` on the outer sphere and
/// `−Δ'p + μ7 p + μ9 ∂0p = h0` on the inner sphere.
pub struct VenttselProblem<'a> {
    pub grid: &'a ShellGrid,
    pub coeffs: &'a dyn RadialCoefficients,
    pub mu7: f64,
    pub mu9: f64,
}

impl<'a> VenttselProblem<'a> {
    pub fn from_background(grid: &'a ShellGrid, ec: &'a ECoeffs, mu: &MuConstants) -> Self {
        VenttselProblem { grid, coeffs: ec, mu7: mu.mu[7], mu9: mu.mu[9] }
    }

    /// Apply `𝔏` and both boundary operators spectrally: interior residual
    /// data, `h0` and `h1` of a grid field.
    pub fn apply(&self, p: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let g = self.grid;
        let (na, nr) = (g.n_ang(), g.n_r());
        let d = g.radial.diff_matrix();
        let mut dp = vec![0.0; p.len()];
        let mut d2p = vec![0.0; p.len()];
        for a in 0..na {
            let col: Vec<f64> = (0..nr).map(|i| p[i * na + a]).collect();
            let c1: Vec<f64> = (0..nr).map(|i| (0..nr).map(|l| d[(i, l)] * col[l]).sum()).collect();
            for i in 0..nr {
                dp[i * na + a] = c1[i];
                d2p[i * na + a] = (0..nr).map(|l| d[(i, l)] * c1[l]).sum();
            }
        }
        let lap = |v: &[f64]| -> Result<Vec<f64>> {
            let c = g.sphere.analyze(v)?;
            Ok(g.sphere.synthesize(&crate::sphere::laplace_beltrami(&c)))
        };
        let inner = &p[..na];
        let mut f = vec![0.0; p.len()];
        for i in 0..nr {
            let e = self.coeffs.e(g.r(i));
            let l = lap(&p[i * na..(i + 1) * na])?;
            for a in 0..na {
                let q = i * na + a;
                f[q] = -l[a] + e[0] * d2p[q] + e[1] * dp[q] + e[2] * p[q] + e[3] * inner[a];
            }
        }
        let l0 = lap(inner)?;
        let h0 = (0..na).map(|a| -l0[a] + self.mu7 * inner[a] + self.mu9 * dp[a]).collect();
        let h1 = p[(nr - 1) * na..].to_vec();
        Ok((f, h0, h1))
    }
}

/// Solve the nonlocal problem mode by mode (data band-limited to the grid's
/// truncation degree). Nonzero `h1` is removed by subtracting its constant
/// radial extension.
pub fn venttsel_solve(prob: &VenttselProblem, f: &[f64], h0: &[f64], h1: &[f64]) -> Result<ModeField> {
    let g = prob.grid;
    check_len("f", f, g.len())?;
    check_len("h0", h0, g.n_ang())?;
    check_len("h1", h1, g.n_ang())?;
    let fc = analyze_levels(g, f)?;
    let h0c = g.sphere.analyze(h0)?;
    let h1c = g.sphere.analyze(h1)?;
    let l = g.sphere.l_max;
    let e: Vec<[f64; 4]> = (0..g.n_r()).map(|i| prob.coeffs.e(g.r(i))).collect();
    let per_n: Vec<Result<Vec<(usize, i64, ModeSolution)>>> = (0..=l)
        .into_par_iter()
        .map(|n| {
            let bvp = ModeBVP::venttsel(n, prob.coeffs, g.radial.a, g.radial.b, prob.mu7, prob.mu9);
            let ms: Vec<i64> = (-(n as i64)..=n as i64).collect();
            let lam = bvp.lambda;
            let data: Vec<Vec<f64>> = ms
                .iter()
                .map(|&m| {
                    let h = h1c.get(n, m);
                    (0..g.n_r()).map(|i| fc[i].get(n, m) - (lam + e[i][2] + e[i][3]) * h).collect()
                })
                .collect();
            let hl: Vec<f64> = ms.iter().map(|&m| (h0c.get(n, m) - (lam + prob.mu7) * h1c.get(n, m)) / prob.mu9).collect();
            let hr = vec![0.0; ms.len()];
            let sols = bvp.solve(&g.radial, &data, &hl, &hr)?;
            Ok(ms
                .iter()
                .zip(sols)
                .map(|(&m, mut s)| {
                    let h = h1c.get(n, m);
                    s.v.iter_mut().for_each(|v| *v += h);
                    (n, m, s)
                })
                .collect())
        })
        .collect();
    let mut all = Vec::new();
    for r in per_n {
        all.extend(r?);
    }
    Ok(synthesize_modes(g, &all))
}

/// Subsonic pressure problem on `[r0, r1]`: `x²·𝓛p = f` with `p = g0` on the
/// inner sphere and `∂0p + γ1 p = g1` on the outer sphere.
pub fn robin_dirichlet_solve(
    grid: &ShellGrid,
    coeffs: &dyn RadialCoefficients,
    gamma1: f64,
    f: &[f64],
    g0: &[f64],
    g1: &[f64],
) -> Result<ModeField> {
    check_len("f", f, grid.len())?;
    check_len("g0", g0, grid.n_ang())?;
    check_len("g1", g1, grid.n_ang())?;
    let fc = analyze_levels(grid, f)?;
    let g0c = grid.sphere.analyze(g0)?;
    let g1c = grid.sphere.analyze(g1)?;
    let per_n: Vec<Result<Vec<(usize, i64, ModeSolution)>>> = (0..=grid.sphere.l_max)
        .into_par_iter()
        .map(|n| {
            let bvp = robin_dirichlet_mode(n, coeffs, grid.radial.a, grid.radial.b, gamma1);
            let ms: Vec<i64> = (-(n as i64)..=n as i64).collect();
            let data: Vec<Vec<f64>> = ms.iter().map(|&m| (0..grid.n_r()).map(|i| fc[i].get(n, m)).collect()).collect();
            let hl: Vec<f64> = ms.iter().map(|&m| g0c.get(n, m)).collect();
            let hr: Vec<f64> = ms.iter().map(|&m| g1c.get(n, m)).collect();
            let sols = bvp.solve(&grid.radial, &data, &hl, &hr)?;
            Ok(ms.iter().zip(sols).map(|(&m, s)| (n, m, s)).collect())
        })
        .collect();
    let mut all = Vec::new();
    for r in per_n {
        all.extend(r?);
    }
    Ok(synthesize_modes(grid, &all))
}

/// Solve one degree of the subsonic pressure problem: `f` on the nodes of
/// `radial` (spanning `[r0, r1]`), Dirichlet value `g0`, Robin value `g1`.
pub fn robin_dirichlet_mode_solve(
    n: usize,
    coeffs: &dyn RadialCoefficients,
    gamma1: f64,
    radial: &ChebGrid,
    f: &[f64],
    g0: f64,
    g1: f64,
) -> Result<ModeSolution> {
    let bvp = robin_dirichlet_mode(n, coeffs, radial.a, radial.b, gamma1);
    Ok(bvp.solve(radial, &[f.to_vec()], &[g0], &[g1])?.remove(0))
}

fn robin_dirichlet_mode(n: usize, coeffs: &dyn RadialCoefficients, r0: f64, r1: f64, gamma1: f64) -> ModeBVP<'_> {
    ModeBVP::robin_dirichlet(n, coeffs, r0, r1, gamma1)
}

/// Coefficients of the S-Condition problems of one transonic background.
pub struct SConditionContext {
    pub r_b: f64,
    pub r1: f64,
    pub ec: ECoeffs,
    pub mu: MuConstants,
}

impl SConditionContext {
    pub fn new(tb: &TransonicBackground) -> Result<Self> {
        let mu = mu_constants(tb)?;
        let ec = e_coeffs(tb, &mu)?;
        Ok(SConditionContext { r_b: tb.r_b(), r1: tb.params.r1, ec, mu })
    }

    /// `ϑ_n = w(r1)` for `e1 w'' + e2 w' + (e3 + λ_n) w = −e4`,
    /// `w(r_b) = 1`, `w'(r_b) = −(μ7 + λ_n)/μ9`.
    pub fn theta(&self, n: usize) -> Result<f64> {
        let lam = (n * (n + 1)) as f64;
        let w1 = -(self.mu.mu[7] + lam) / self.mu.mu[9];
        let ec = &self.ec;
        let sol = integrator().solve(
            |y, s, o| {
                let e = RadialCoefficients::e(ec, y);
                o[0] = s[1];
                o[1] = (-e[3] - e[1] * s[1] - (e[2] + lam) * s[0]) / e[0];
            },
            self.r_b,
            &[1.0, w1],
            self.r1,
            |_, _| false,
        )?;
        let v = sol.y_end[0];
        if !v.is_finite() {
            return Err(Error::Numeric(format!("theta_{n} is not finite")));
        }
        Ok(v)
    }
}

/// `ϑ_n(r_b)` of a transonic background.
pub fn theta(n: usize, tb: &TransonicBackground) -> Result<f64> {
    SConditionContext::new(tb)?.theta(n)
}

/// Outcome of the S-Condition check of one background.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SConditionReport {
    pub r_b: f64,
    /// `ϑ_n` for `n = 0..=n_eff`.
    pub thetas: Vec<f64>,
    pub n_max: usize,
    pub n_eff: usize,
    pub threshold: f64,
    pub violated: Vec<usize>,
    pub holds: bool,
    /// `min_n |ϑ_n|` over the checked degrees.
    pub margin: f64,
}

/// Evaluate `ϑ_n` for `n ≤ n_max`, stopping early once `ϑ_n > 1` has
/// increased for three consecutive degrees. A degree is violated when
/// `|ϑ_n| ≤ threshold·|ϑ_0|` (`|ϑ_0| ≤ threshold` for `n = 0`).
pub fn check_s_condition(tb: &TransonicBackground, n_max: usize, threshold: f64) -> Result<SConditionReport> {
    let ctx = SConditionContext::new(tb)?;
    check_s_condition_with(&ctx, n_max, threshold)
}

pub fn check_s_condition_with(ctx: &SConditionContext, n_max: usize, threshold: f64) -> Result<SConditionReport> {
    if n_max < 1 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let mut thetas = Vec::new();
    let mut growing = 0;
    for n in 0..=n_max {
        let t = ctx.theta(n)?;
        if n > 0 && t > 1.0 && t > thetas[n - 1] {
            growing += 1;
        } else {
            growing = 0;
        }
        thetas.push(t);
        if growing >= 3 {
            break;
        }
    }
    let t0 = thetas[0].abs();
    let violated: Vec<usize> = thetas
        .iter()
        .enumerate()
        .filter(|(n, t)| if *n == 0 { t.abs() <= threshold } else { t.abs() <= threshold * t0 })
        .map(|(n, _)| n)
        .collect();
    let margin = thetas.iter().fold(f64::INFINITY, |a, t| a.min(t.abs()));
    Ok(SConditionReport {
        r_b: ctx.r_b,
        n_eff: thetas.len() - 1,
        thetas,
        n_max,
        threshold,
        holds: violated.is_empty(),
        violated,
        margin,
    })
}

/// `ϑ_n` over a grid of shock radii with the other background parameters fixed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SConditionScan {
    pub reports: Vec<SConditionReport>,
    /// Shock radii where the background or its coefficients could not be built.
    pub failures: Vec<(f64, String)>,
    /// `(n, r_b left, r_b right)` for every sign change of `ϑ_n` between
    /// neighbouring grid points.
    pub brackets: Vec<(usize, f64, f64)>,
}

impl SConditionScan {
    /// CSV rows `rb,n,theta`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rb,n,theta\n");
        for r in &self.reports {
            for (n, t) in r.thetas.iter().enumerate() {
                s.push_str(&format!("{},{},{}\n", crate::io::fmt17(r.r_b), n, crate::io::fmt17(*t)));
            }
        }
        s
    }
}

/// Scan the S-Condition over `rb_grid` (increasing).
pub fn s_condition_scan(params: TransonicParams, rb_grid: &[f64], n_max: usize, threshold: f64) -> SConditionScan {
    let results: Vec<std::result::Result<SConditionReport, (f64, String)>> = rb_grid
        .par_iter()
        .map(|&rb| {
            let tb = solve_transonic_background(TransonicParams { r_b: rb, ..params }).map_err(|e| (rb, e.to_string()))?;
            check_s_condition(&tb, n_max, threshold).map_err(|e| (rb, e.to_string()))
        })
        .collect();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(f) => failures.push(f),
        }
    }
    let mut brackets = Vec::new();
    for w in reports.windows(2) {
        let n_common = w[0].thetas.len().min(w[1].thetas.len());
        for n in 0..n_common {
            if w[0].thetas[n].signum() != w[1].thetas[n].signum() {
                brackets.push((n, w[0].r_b, w[1].r_b));
            }
        }
    }
    SConditionScan { reports, failures, brackets }
}
