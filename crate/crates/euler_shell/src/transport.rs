//! Transport along the integral curves of a velocity field on the shell:
//! `D_u E + a E = f` with data on the inner or the outer boundary sphere.
//!
//! Curves are parametrized by the radial grid coordinate `y⁰` and stored as
//! unit 3-vectors. The solver is semi-Lagrangian level by level: each node of
//! a level is traced back with RK4 to the previous level, where the solution
//! is evaluated spectrally, and the source terms are integrated along the way.

use crate::error::{Error, Result};
use crate::grid::{ShellField, ShellGrid};
use crate::residual::RadialMap;
use rayon::prelude::*;
use std::sync::Arc;

/// Boundary sphere carrying the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Inner,
    Outer,
}

impl Surface {
    fn level(self, grid: &ShellGrid) -> usize {
        match self {
            Surface::Inner => 0,
            Surface::Outer => grid.n_r() - 1,
        }
    }

    /// Levels in the order they are reached from the surface.
    fn sweep(self, grid: &ShellGrid) -> Vec<usize> {
        let n = grid.n_r();
        match self {
            Surface::Inner => (0..n).collect(),
            Surface::Outer => (0..n).rev().collect(),
        }
    }
}

/// Curve field `dω/dy⁰ = s(y⁰, ω)` together with `1/v⁰ = dt/dy⁰`.
#[derive(Debug, Clone)]
pub struct CharacteristicField {
    pub grid: Arc<ShellGrid>,
    /// Cartesian components of `s` on the grid.
    pub slope: [Vec<f64>; 3],
    pub inv_v0: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
    n_c: usize,
}

fn level_coeffs(grid: &ShellGrid, fields: &[&[f64]], i: usize) -> Result<Vec<f64>> {
    let na = grid.n_ang();
    let mut out = Vec::new();
    for f in fields {
        out.extend(grid.sphere_full.analyze(&f[i * na..(i + 1) * na])?.data);
    }
    Ok(out)
}

fn combine(w: &[f64], levels: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; levels[0].len()];
    for (wl, c) in w.iter().zip(levels) {
        if *wl != 0.0 {
            for (o, v) in out.iter_mut().zip(c) {
                *o += wl * v;
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: [f64; 3]) -> [f64; 3] {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    [x[0] / n, x[1] / n, x[2] / n]
}

impl CharacteristicField {
    /// Integral curves of a velocity field on an unmapped grid.
    pub fn from_field(field: &ShellField, delta: Option<f64>) -> Result<Self> {
        Self::from_field_mapped(field, &RadialMap::identity(&field.grid), delta)
    }

    /// Integral curves on a grid mapped by `x⁰ = X(y⁰, ω)`:
    /// `dy⁰/dt = (u⁰ − u_t·∇_S X / x⁰)/X_y`, `dω/dt = u_t/x⁰`.
    pub fn from_field_mapped(field: &ShellField, map: &RadialMap, delta: Option<f64>) -> Result<Self> {
        let grid = field.grid.clone();
        let n = grid.len();
        let umax = field.u0.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let delta = delta.unwrap_or(1e-6 * umax);
        let mut slope = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut inv_v0 = vec![0.0; n];
        for q in 0..n {
            let a = q % grid.n_ang();
            let (j, k) = (a / grid.sphere.n_lon, a % grid.sphere.n_lon);
            let (ut, up) = (field.u_theta[q], field.u_phi[q]);
            let x = map.x[q];
            let v0 = (field.u0[q] - (ut * map.gx_theta[q] + up * map.gx_phi[q]) / x) / map.x_y[q];
            if !(v0 >= delta && delta > 0.0) {
                return Err(Error::Stagnation(format!(
                    "radial speed {v0:e} below the lower bound {delta:e} at radius {}",
                    grid.r(q / grid.n_ang())
                )));
            }
            let fr = grid.sphere.frame(j, k);
            for c in 0..3 {
                slope[c][q] = (ut * fr[1][c] + up * fr[2][c]) / (x * v0);
            }
            inv_v0[q] = 1.0 / v0;
        }
        Self::from_parts(grid, slope, inv_v0)
    }

    /// Field from grid values of the slope and of `1/v⁰`.
    pub fn from_parts(grid: Arc<ShellGrid>, slope: [Vec<f64>; 3], inv_v0: Vec<f64>) -> Result<Self> {
        let coeffs = (0..grid.n_r())
            .map(|i| level_coeffs(&grid, &[&slope[0], &slope[1], &slope[2]], i))
            .collect::<Result<Vec<_>>>()?;
        let n_c = grid.sphere_full.n_coeffs();
        Ok(CharacteristicField { grid, slope, inv_v0, coeffs, n_c })
    }

    fn coeffs_at(&self, y: f64) -> Vec<f64> {
        combine(&self.grid.radial.interp_weights(y), &self.coeffs)
    }

    /// Slope `dω/dy⁰` at an arbitrary radius and unit vector.
    pub fn slope_at(&self, y: f64, x: [f64; 3]) -> [f64; 3] {
        let c = self.coeffs_at(y);
        let mut b = Vec::new();
        self.grid.sphere_full.basis_at(x, &mut b);
        let n = self.n_c;
        [dot(&b, &c[..n]), dot(&b, &c[n..2 * n]), dot(&b, &c[2 * n..])]
    }

    /// Point reached at `y_to` by the curve through `(y_from, x)`, with
    /// `n_steps` RK4 steps.
    pub fn trace_curve(&self, y_from: f64, x: [f64; 3], y_to: f64, n_steps: usize) -> [f64; 3] {
        let h = (y_to - y_from) / n_steps as f64;
        let mut p = normalize(x);
        for s in 0..n_steps {
            let y = y_from + s as f64 * h;
            let f = |y: f64, p: [f64; 3]| self.slope_at(y, p);
            let k1 = f(y, p);
            let k2 = f(y + 0.5 * h, add(p, k1, 0.5 * h));
            let k3 = f(y + 0.5 * h, add(p, k2, 0.5 * h));
            let k4 = f(y + h, add(p, k3, h));
            p = normalize(std::array::from_fn(|c| p[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c])));
        }
        p
    }
}

fn add(p: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [p[0] + h * k[0], p[1] + h * k[1], p[2] + h * k[2]]
}

/// Options of the level-by-level solver.
#[derive(Debug, Clone, Copy)]
pub struct TransportOptions {
    /// RK4 steps between consecutive radial levels.
    pub substeps: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { substeps: 1 }
    }
}

/// Coefficients of one RK4 stage radius: slope, `a/v⁰` and `f/v⁰`.
struct Stage {
    c: Vec<f64>,
}

/// Solve `D_u E + a E = f` with `E = data` on `from`, where `D_u` is the
/// derivative along the curves parametrized by time (`dE/dy⁰ = (f − aE)/v⁰`).
pub fn solve_transport(
    field: &CharacteristicField,
    a: Option<&[f64]>,
    f: Option<&[f64]>,
    data: &[f64],
    from: Surface,
    opts: TransportOptions,
) -> Result<Vec<f64>> {
    let grid = &field.grid;
    let (na, n) = (grid.n_ang(), grid.len());
    if data.len() != na {
        return Err(Error::Config(format!("boundary data has {} values, expected {na}", data.len())));
    }
    for (name, v) in [("a", a), ("f", f)] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(Error::Config(format!("{name} has {} values, expected {n}", v.len())));
            }
        }
    }
    let alpha: Vec<f64> = (0..n).map(|q| a.map_or(0.0, |a| a[q]) * field.inv_v0[q]).collect();
    let beta: Vec<f64> = (0..n).map(|q| f.map_or(0.0, |f| f[q]) * field.inv_v0[q]).collect();
    let has_src = a.is_some() || f.is_some();
    let src_levels = if has_src {
        (0..grid.n_r()).map(|i| level_coeffs(grid, &[&alpha, &beta], i)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let n_c = field.n_c;
    let stage_at = |y: f64| -> Stage {
        let w = grid.radial.interp_weights(y);
        let mut c = combine(&w, &field.coeffs);
        if has_src {
            c.extend(combine(&w, &src_levels));
        }
        Stage { c }
    };

    let mut out = vec![0.0; n];
    let s0 = from.level(grid);
    out[s0 * na..(s0 + 1) * na].copy_from_slice(data);
    let sweep = from.sweep(grid);
    let sub = opts.substeps.max(1);
    for w in sweep.windows(2) {
        let (ip, i) = (w[0], w[1]);
        let (yp, yi) = (grid.r(ip), grid.r(i));
        let h = (yp - yi) / sub as f64;
        let stages: Vec<[Stage; 3]> = (0..sub)
            .map(|s| {
                let y = yi + s as f64 * h;
                [stage_at(y), stage_at(y + 0.5 * h), stage_at(y + h)]
            })
            .collect();
        let prev = grid.sphere_full.analyze(&out[ip * na..(ip + 1) * na])?;
        let sphere = &grid.sphere_full;
        let level: Vec<f64> = (0..na)
            .into_par_iter()
            .map(|a| {
                let (j, k) = (a / sphere.n_lon, a % sphere.n_lon);
                let mut b = Vec::new();
                let eval = |st: &Stage, p: [f64; 3], g: f64, b: &mut Vec<f64>| -> [f64; 5] {
                    sphere.basis_at(p, b);
                    let s = [dot(b, &st.c[..n_c]), dot(b, &st.c[n_c..2 * n_c]), dot(b, &st.c[2 * n_c..3 * n_c])];
                    if has_src {
                        let al = dot(b, &st.c[3 * n_c..4 * n_c]);
                        let be = dot(b, &st.c[4 * n_c..]);
                        [s[0], s[1], s[2], -al, -be * (-g).exp()]
                    } else {
                        [s[0], s[1], s[2], 0.0, 0.0]
                    }
                };
                let mut p = grid.sphere.xyz(j, k);
                let (mut g, mut hh) = (0.0, 0.0);
                for st in &stages {
                    let k1 = eval(&st[0], p, g, &mut b);
                    let p2 = add(p, [k1[0], k1[1], k1[2]], 0.5 * h);
                    let k2 = eval(&st[1], p2, g + 0.5 * h * k1[3], &mut b);
                    let p3 = add(p, [k2[0], k2[1], k2[2]], 0.5 * h);
                    let k3 = eval(&st[1], p3, g + 0.5 * h * k2[3], &mut b);
                    let p4 = add(p, [k3[0], k3[1], k3[2]], h);
                    let k4 = eval(&st[2], p4, g + h * k3[3], &mut b);
                    let inc = |c: usize| h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                    p = normalize([p[0] + inc(0), p[1] + inc(1), p[2] + inc(2)]);
                    let dg = inc(3);
                    let dh = inc(4);
                    g += dg;
                    hh += dh;
                }
                sphere.eval_at(&prev, p) * (-g).exp() + hh
            })
            .collect();
        out[i * na..(i + 1) * na].copy_from_slice(&level);
    }
    Ok(out)
}

/// Foot points on the data surface of the curves through every grid node.
#[derive(Debug, Clone)]
pub struct CharacteristicMap {
    pub grid: Arc<ShellGrid>,
    pub from: Surface,
    pub feet: Vec<[f64; 3]>,
}

/// Foot points of every node, obtained by transporting the embedding
/// coordinates from the data surface.
pub fn trace_characteristics(field: &CharacteristicField, from: Surface) -> Result<CharacteristicMap> {
    let grid = &field.grid;
    let na = grid.n_ang();
    let mut comps = Vec::with_capacity(3);
    for c in 0..3 {
        let data: Vec<f64> = (0..na)
            .map(|a| grid.sphere.xyz(a / grid.sphere.n_lon, a % grid.sphere.n_lon)[c])
            .collect();
        comps.push(solve_transport(field, None, None, &data, from, TransportOptions::default())?);
    }
    let feet = (0..grid.len()).map(|q| normalize([comps[0][q], comps[1][q], comps[2][q]])).collect();
    Ok(CharacteristicMap { grid: grid.clone(), from, feet })
}

impl CharacteristicMap {
    /// Largest angular displacement `|foot − node|` over the shell.
    pub fn max_displacement(&self) -> f64 {
        let g = &self.grid;
        let na = g.n_ang();
        (0..g.len())
            .map(|q| {
                let a = q % na;
                let x = g.sphere.xyz(a / g.sphere.n_lon, a % g.sphere.n_lon);
                let f = self.feet[q];
                ((x[0] - f[0]).powi(2) + (x[1] - f[1]).powi(2) + (x[2] - f[2]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// `surface_data` composed with the foot map: the value carried along the
/// curve from the data surface.
pub fn pullback_initial(map: &CharacteristicMap, surface_data: &[f64]) -> Result<Vec<f64>> {
    let g = &map.grid;
    if surface_data.len() != g.n_ang() {
        return Err(Error::Config(format!("surface data has {} values, expected {}", surface_data.len(), g.n_ang())));
    }
    let c = g.sphere_full.analyze(surface_data)?;
    Ok(map.feet.par_iter().map(|x| g.sphere_full.eval_at(&c, *x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::FlowState;
    use crate::sphere::SphCoeffs;

    fn grid(n_r: usize, l: usize) -> Arc<ShellGrid> {
        Arc::new(ShellGrid::new(1.0, 1.5, n_r, l).unwrap())
    }

    /// `u = (1, r ω(r) ẑ × ω̂)`: rigid rotation about the z axis with rate `w(r)`.
    fn rotating(g: Arc<ShellGrid>, w: impl Fn(f64) -> f64) -> ShellField {
        let sin_t = g.sphere.sin_t.clone();
        ShellField::from_fn(g, |r, j, _| FlowState { u0: 1.0, ut: [0.0, r * w(r) * sin_t[j]], p: 1.0, rho: 1.0 })
    }

    fn rot_z(x: [f64; 3], ang: f64) -> [f64; 3] {
        let (s, c) = ang.sin_cos();
        [c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]]
    }

    fn data(g: &ShellGrid) -> (SphCoeffs, Vec<f64>) {
        let mut c = SphCoeffs::zeros(g.sphere.l_max);
        c.set(0, 0, 1.0);
        c.set(2, 1, 0.7);
        c.set(3, -2, -0.4);
        c.set(4, 3, 0.2);
        let v = g.sphere.synthesize(&c);
        (c, v)
    }

    #[test]
    fn zero_tangential_velocity_keeps_data_on_radii() {
        let g = grid(12, 6);
        let u = rotating(g.clone(), |_| 0.0);
        let cf = CharacteristicField::from_field(&u, None).unwrap();
        let (_, d) = data(&g);
        let e = solve_transport(&cf, None, None, &d, Surface::Inner, TransportOptions::default()).unwrap();
        let na = g.n_ang();
        for i in 0..g.n_r() {
            for a in 0..na {
                assert!((e[i * na + a] - d[a]).abs() < 1e-12);
            }
        }
        let m = trace_characteristics(&cf, Surface::Outer).unwrap();
        assert!(m.max_displacement() < 1e-12);
    }

    #[test]
    fn exponential_decay() {
        let g = grid(16, 4);
        let u = rotating(g.clone(), |_| 0.0);
        let cf = CharacteristicField::from_field(&u, None).unwrap();
        let (_, d) = data(&g);
        let alpha = 0.8;
        let a = vec![alpha; g.len()];
        let e = solve_transport(&cf, Some(&a), None, &d, Surface::Inner, TransportOptions::default()).unwrap();
        let na = g.n_ang();
        for i in 0..g.n_r() {
            let fac = (-alpha * (g.r(i) - 1.0)).exp();
            for q in 0..na {
                assert!((e[i * na + q] - d[q] * fac).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn constant_source_from_outer_surface() {
        // E' = f with u0 = 1 and data 0 at r = 1.5 gives E = f (r − 1.5)
        let g = grid(10, 4);
        let u = rotating(g.clone(), |_| 0.6);
        let cf = CharacteristicField::from_field(&u, None).unwrap();
        let f = vec![2.0; g.len()];
        let e = solve_transport(&cf, None, Some(&f), &vec![0.0; g.n_ang()], Surface::Outer, TransportOptions::default())
            .unwrap();
        for q in 0..g.len() {
            let r = g.r(q / g.n_ang());
            assert!((e[q] - 2.0 * (r - 1.5)).abs() < 1e-10);
        }
    }

    #[test]
    fn rigid_rotation_matches_closed_form() {
        let g = grid(24, 6);
        let w = 1.3;
        let u = rotating(g.clone(), |_| w);
        let cf = CharacteristicField::from_field(&u, None).unwrap();
        let (c, d) = data(&g);
        let e = solve_transport(&cf, None, None, &d, Surface::Inner, TransportOptions::default()).unwrap();
        let na = g.n_ang();
        let mut err = 0.0f64;
        for i in 0..g.n_r() {
            for a in 0..na {
                let x = g.sphere.xyz(a / g.sphere.n_lon, a % g.sphere.n_lon);
                let foot = rot_z(x, -w * (g.r(i) - 1.0));
                err = err.max((e[i * na + a] - g.sphere.eval_at(&c, foot)).abs());
            }
        }
        assert!(err < 1e-8, "{err}");
        let m = trace_characteristics(&cf, Surface::Inner).unwrap();
        assert!(m.max_displacement() <= w * 0.5 + 1e-9);
        let pb = pullback_initial(&m, &d).unwrap();
        let diff = pb.iter().zip(&e).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn tracer_converges_at_fourth_order() {
        let g = grid(6, 4);
        let wf = |r: f64| 3.0 * (2.0 * r).sin();
        let u = rotating(g.clone(), wf);
        let cf = CharacteristicField::from_field(&u, None).unwrap();
        let (c, d) = data(&g);
        // angle ∫_1^r 3 sin(2s) ds
        let angle = |r: f64| 1.5 * ((2.0f64).cos() - (2.0 * r).cos());
        let errs: Vec<f64> = [1usize, 2, 4, 8]
            .iter()
            .map(|&s| {
                let e = solve_transport(&cf, None, None, &d, Surface::Inner, TransportOptions { substeps: s }).unwrap();
                let na = g.n_ang();
                let i = g.n_r() - 1;
                (0..na)
                    .map(|a| {
                        let x = g.sphere.xyz(a / g.sphere.n_lon, a % g.sphere.n_lon);
                        (e[i * na + a] - g.sphere.eval_at(&c, rot_z(x, -angle(g.r(i))))).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 3.6 && order < 4.6, "errors {errs:?}");
        }
    }

    #[test]
    fn forward_then_backward_returns() {
        let g = grid(16, 6);
        let u = rotating(g.clone(), |r| 2.0 * r);
        let cf = CharacteristicField::from_field(&u, None).unwrap();
        let x = normalize([0.3, -0.5, 0.8]);
        let fwd = cf.trace_curve(1.0, x, 1.5, 64);
        let back = cf.trace_curve(1.5, fwd, 1.0, 64);
        let d = ((x[0] - back[0]).powi(2) + (x[1] - back[1]).powi(2) + (x[2] - back[2]).powi(2)).sqrt();
        assert!(d < 1e-9);
    }

    #[test]
    fn range_is_preserved() {
        let g = grid(16, 6);
        let u = rotating(g.clone(), |r| 1.0 + r);
        let cf = CharacteristicField::from_field(&u, None).unwrap();
        let (_, d) = data(&g);
        let e = solve_transport(&cf, None, None, &d, Surface::Inner, TransportOptions::default()).unwrap();
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in &e {
            assert!(*v >= lo - 0.05 && *v <= hi + 0.05);
        }
        // at the nodes the carried values equal data at rotated points, so the
        // level range stays within the continuous range of the data
        let (c, _) = data(&g);
        let mut cont_lo = f64::INFINITY;
        let mut cont_hi = f64::NEG_INFINITY;
        for t in 0..200 {
            for p in 0..400 {
                let th = std::f64::consts::PI * (t as f64 + 0.5) / 200.0;
                let ph = 2.0 * std::f64::consts::PI * p as f64 / 400.0;
                let v = g.sphere.eval_at(&c, [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
                cont_lo = cont_lo.min(v);
                cont_hi = cont_hi.max(v);
            }
        }
        for v in &e {
            assert!(*v >= cont_lo - 1e-3 && *v <= cont_hi + 1e-3);
        }
    }

    #[test]
    fn stagnation_is_rejected() {
        let g = grid(8, 4);
        let sin_t = g.sphere.sin_t.clone();
        let u = ShellField::from_fn(g, |r, j, _| FlowState { u0: r - 1.2, ut: [0.0, sin_t[j]], p: 1.0, rho: 1.0 });
        assert!(matches!(CharacteristicField::from_field(&u, None), Err(Error::Stagnation(_))));
    }
}
