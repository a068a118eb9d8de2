//! Acceptance suite: runs criteria 1 to 11 in order and prints one
//! pass/fail line per criterion. Exits nonzero if any criterion fails.

use euler_shell::background::{
    mach_closed_form, mach_rhs, solve_transonic_background, subsonic_from_mach, RadialProfile, TransonicBackground,
    TransonicParams,
};
use euler_shell::coeffs::{linearization_coeffs, mu_constants, stability_poly};
use euler_shell::elliptic::{
    s_condition_scan, venttsel_solve, ModeBVP, SConditionContext, VenttselProblem,
};
use euler_shell::grid::{ShellField, ShellGrid};
use euler_shell::numerics::cheb::ChebGrid;
use euler_shell::residual::{euler_residual, ResidualNorms};
use euler_shell::sphere::{div_curl_solve, SphCoeffs, SphereGrid, TangentForm};
use euler_shell::subsonic::{
    f2_both_routes, field_distance, iterate_subsonic, BoundaryField, BoundaryPerturbation, IterationReport,
    SubsonicBCs, SubsonicOptions, SubsonicProblem,
};
use euler_shell::transonic::{
    iterate_transonic, shooting_oracle, TransonicBCs, TransonicField, TransonicOptions, TransonicPerturbation,
    TransonicProblem, TransonicSolution,
};
use euler_shell::transport::{solve_transport, CharacteristicField, Surface, TransportOptions};
use euler_shell::{Error, FlowState, GasConstants};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

type Check = Result<String, String>;

/// Collects named conditions; fails with the first violated one.
struct Checks {
    notes: Vec<String>,
    failed: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { notes: Vec::new(), failed: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let w = what.into();
        if ok {
            self.notes.push(w);
        } else {
            self.failed.push(w);
        }
    }

    fn finish(self) -> Check {
        if self.failed.is_empty() {
            Ok(self.notes.join("; "))
        } else {
            Err(self.failed.join("; "))
        }
    }
}

fn e<T>(r: std::result::Result<T, Error>) -> std::result::Result<T, String> {
    r.map_err(|x| x.to_string())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn weighted_rms(v: &[f64], w: &[f64]) -> f64 {
    let (s, ws) = v.iter().zip(w).fold((0.0, 0.0), |(s, ws), (x, w)| (s + w * x * x, ws + w));
    (s / ws).sqrt()
}

fn default_params() -> TransonicParams {
    TransonicParams { gamma: 1.4, r0: 1.0, r1: 2.0, r_b: 1.5, p_s: 1.0, rho_s: 1.0, m_s: 0.5 }
}

fn random_coeffs(rng: &mut ChaCha8Rng, l: usize) -> SphCoeffs {
    let mut c = SphCoeffs::zeros(l);
    for v in &mut c.data {
        *v = rng.gen_range(-1.0..1.0);
    }
    c
}

fn c1_closed_form() -> Check {
    let mut c = Checks::new();
    let m0 = 0.8;
    let t = Instant::now();
    let mut worst = 0.0f64;
    for gamma in [1.2, 1.4, 5.0 / 3.0] {
        let gas = e(GasConstants::with_gamma(gamma))?;
        let cf = e(mach_closed_form(gamma, m0, 1.0))?;
        let r_hi = 1.01 * e(cf.r_of(0.1))?;
        let prof = e(subsonic_from_mach(&gas, m0, 1.0, 1.0, 1.0, r_hi))?;
        for k in 0..=200 {
            let m = 0.1 + (m0 - 0.1) * k as f64 / 200.0;
            let r = e(cf.r_of(m))?;
            // radius error implied by the Mach error at the closed-form radius
            let dr = (prof.mach(r) - m) / mach_rhs(gamma, r, prof.mach(r));
            worst = worst.max(dr.abs() / r);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    c.check(worst <= 1e-8, format!("max relative r error {worst:.2e} (limit 1e-8)"));
    c.check(secs < 1.0, format!("runtime {secs:.3} s"));
    c.finish()
}

fn c2_coefficients() -> Check {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_pole = 0.0f64;
    for _ in 0..20 {
        let g: f64 = rng.gen_range(1.01..3.0);
        worst_pole = worst_pole.max((stability_poly(g, 1.0) + 2.0 * (g + 1.0).powi(2)).abs());
    }
    c.check(worst_pole <= 1e-12, format!("pole numerator error {worst_pole:.2e}"));
    let mut worst_id = 0.0f64;
    for _ in 0..100 {
        let g: f64 = rng.gen_range(1.01..3.0);
        let t: f64 = rng.gen_range(0.0..0.99);
        let k = e(linearization_coeffs(g, t))?;
        let lhs = 2.0 * (g - 1.0) * k.d2 + (2.0 + (g - 1.0) * t) * k.d1;
        worst_id = worst_id.max(lhs.abs() / k.d1.abs().max(1.0));
    }
    c.check(worst_id <= 1e-12, format!("d1/d2 identity error {worst_id:.2e} (relative to max(|d1|, 1))"));
    c.finish()
}

fn branch_residual(prof: &RadialProfile, gas: &GasConstants, a: f64, b: f64) -> std::result::Result<f64, String> {
    let grid = Arc::new(e(ShellGrid::new(a, b, 256, 2))?);
    let ys = e(prof.sample(&grid.radial.nodes))?;
    let nodes = grid.radial.nodes.clone();
    let f = ShellField::from_fn(grid, |r, _, _| {
        let i = nodes.iter().position(|x| *x == r).unwrap();
        FlowState { u0: ys[i][0], ut: [0.0; 2], p: ys[i][1], rho: ys[i][2] }
    });
    Ok(e(euler_residual(&f, gas))?.norms.max_linf())
}

fn c3_transonic_background() -> Check {
    let mut c = Checks::new();
    let (mut rh, mut jump, mut res) = (0.0f64, f64::INFINITY, 0.0f64);
    let mut bad = Vec::new();
    let mut worst = String::new();
    for gamma in [1.2, 1.4, 5.0 / 3.0] {
        for r_b in [1.2, 1.3, 1.4] {
            for m_s in [0.46, 0.5, 0.52] {
                let p = TransonicParams { gamma, r_b, m_s, ..default_params() };
                let tb = match solve_transonic_background(p) {
                    Ok(tb) => tb,
                    Err(x) => {
                        bad.push(format!("({gamma:.3}, {r_b}, {m_s}): {x}"));
                        continue;
                    }
                };
                rh = rh.max(tb.rh_residual());
                jump = jump.min(tb.pressure_jump());
                let (up, down) = tb.shock_states();
                let (mu, md) = (e(up.mach(&tb.gas))?, e(down.mach(&tb.gas))?);
                if !(mu > 1.0 && md < 1.0) {
                    bad.push(format!("({gamma:.3}, {r_b}, {m_s}): M- {mu}, M+ {md}"));
                }
                if let Err(x) = mu_constants(&tb).and_then(|m| m.check_signs()) {
                    bad.push(format!("({gamma:.3}, {r_b}, {m_s}): {x}"));
                }
                for (branch, a, b) in [(&tb.supersonic, p.r0, r_b), (&tb.subsonic, r_b, p.r1)] {
                    let v = branch_residual(branch, &tb.gas, a, b)?;
                    if v > res {
                        res = v;
                        worst = format!("gamma {gamma:.3}, r_b {r_b}, M_s {m_s}, [{a}, {b}]");
                    }
                }
            }
        }
    }
    c.check(bad.is_empty(), format!("27 backgrounds admissible with valid signs {bad:?}"));
    c.check(rh <= 1e-10, format!("max R-H residual {rh:.2e}"));
    c.check(jump > 0.0, format!("min pressure jump {jump:.3e}"));
    c.check(res <= 1e-9, format!("max branch Euler residual {res:.2e} at N_r=256 ({worst})"));
    c.finish()
}

fn c4_s_condition() -> Check {
    let mut c = Checks::new();
    let p = TransonicParams { r0: 1.2, ..default_params() };
    let near = e(solve_transonic_background(TransonicParams { r_b: p.r1 - 1e-3, ..p }))?;
    let t0 = e(e(SConditionContext::new(&near))?.theta(0))?;
    c.check((t0 - 1.0).abs() <= 1e-2, format!("theta_0 at r1-1e-3 = {t0:.6}"));

    let rb: Vec<f64> = (0..200).map(|i| 1.22 + 0.77 * i as f64 / 199.0).collect();
    let t = Instant::now();
    let scan = s_condition_scan(p, &rb, 64, 1e-8);
    let secs = t.elapsed().as_secs_f64();
    c.check(secs < 60.0, format!("200-point scan with n_max=64 in {secs:.1} s"));
    c.check(scan.reports.len() >= 150, format!("{} admissible radii of 200", scan.reports.len()));

    // continuity: differences over shrinking steps shrink proportionally
    let mut cont = 0.0f64;
    for &r in &[1.3, 1.6, 1.9] {
        let th = |x: f64| -> std::result::Result<[f64; 3], String> {
            let tb = e(solve_transonic_background(TransonicParams { r_b: x, ..p }))?;
            let ctx = e(SConditionContext::new(&tb))?;
            Ok([e(ctx.theta(0))?, e(ctx.theta(3))?, e(ctx.theta(10))?])
        };
        let base = th(r)?;
        let d = |h: f64| -> std::result::Result<f64, String> {
            let v = th(r + h)?;
            Ok((0..3).map(|k| (v[k] - base[k]).abs()).fold(0.0, f64::max))
        };
        let (d1, d2) = (d(1e-3)?, d(1e-4)?);
        cont = cont.max(d2 / d1);
    }
    c.check(cont < 0.2, format!("theta difference ratio under step/10 = {cont:.3}"));

    // isolated sign changes: exactly one crossing inside each bracket, no
    // adjacent brackets for the same degree
    let mut isolated = true;
    for (k, &(n, a, b)) in scan.brackets.iter().enumerate() {
        if scan.brackets[..k].iter().any(|&(m, _, b2)| m == n && b2 == a) {
            isolated = false;
        }
        let mut signs = Vec::new();
        for j in 0..=10 {
            let x = a + (b - a) * j as f64 / 10.0;
            let tb = e(solve_transonic_background(TransonicParams { r_b: x, ..p }))?;
            signs.push(e(e(SConditionContext::new(&tb))?.theta(n))?.signum());
        }
        if signs.windows(2).filter(|w| w[0] != w[1]).count() != 1 {
            isolated = false;
        }
    }
    c.check(isolated, format!("{} sign changes, all isolated", scan.brackets.len()));

    let tb = e(solve_transonic_background(p))?;
    let ctx = e(SConditionContext::new(&tb))?;
    let g = ChebGrid::new(ctx.r_b, ctx.r1, 40);
    let mut worst = 0.0f64;
    for n in [0usize, 2, 5] {
        let bvp = ModeBVP::venttsel(n, &ctx.ec, ctx.r_b, ctx.r1, ctx.mu.mu[7], ctx.mu.mu[9]);
        let ff = |y: f64| (3.0 * y).cos();
        let f: Vec<f64> = g.nodes.iter().map(|y| ff(*y)).collect();
        let s = &e(bvp.solve(&g, &[f], &[0.4], &[0.0]))?[0];
        let (ys, vfd) = bvp.finite_difference_solve(ff, 0.4, 0.0, 2000);
        worst = worst.max(ys.iter().zip(&vfd).fold(0.0f64, |m, (y, v)| m.max((g.interpolate(&s.v, *y) - v).abs())));
    }
    c.check(worst <= 1e-5, format!("mode solver vs finite differences (N=2000) {worst:.2e}"));
    c.finish()
}

fn c5_venttsel() -> Check {
    let mut c = Checks::new();
    let tb = e(solve_transonic_background(default_params()))?;
    let ctx = e(SConditionContext::new(&tb))?;
    let (l, n_r) = (8, 200);
    let grid = e(ShellGrid::new(ctx.r_b, ctx.r1, n_r, l))?;
    let prob = VenttselProblem::from_background(&grid, &ctx.ec, &ctx.mu);
    let na = grid.n_ang();
    let k = PI / (ctx.r1 - ctx.r_b);
    let mut coeffs = SphCoeffs::zeros(l);
    coeffs.set(2, 0, 1.0);
    coeffs.set(5, -3, 0.4);
    coeffs.set(8, 7, -0.2);
    let ang = grid.sphere.synthesize(&coeffs);
    let mut f = vec![0.0; grid.len()];
    let mut exact = vec![0.0; grid.len()];
    let mut h0 = vec![0.0; na];
    for i in 0..n_r {
        let y = grid.r(i) - ctx.r_b;
        let (v, dv, d2v) = ((k * y).sin(), k * (k * y).cos(), -k * k * (k * y).sin());
        let ec = euler_shell::elliptic::RadialCoefficients::e(&ctx.ec, grid.r(i));
        for (n, m, a) in coeffs.iter() {
            if a == 0.0 {
                continue;
            }
            let lam = (n * (n + 1)) as f64;
            let fv = ec[0] * d2v + ec[1] * dv + (ec[2] + lam) * v;
            let y_nm = grid.sphere.synthesize(&SphCoeffs::single(l, n, m, a));
            for q in 0..na {
                f[i * na + q] += fv * y_nm[q];
                if i == 0 {
                    h0[q] += ctx.mu.mu[9] * k * y_nm[q];
                }
            }
        }
        for q in 0..na {
            exact[i * na + q] = v * ang[q];
        }
    }
    let sol = e(venttsel_solve(&prob, &f, &h0, &vec![0.0; na]))?;
    let err = max_diff(&sol.p, &exact);
    c.check(err <= 1e-6, format!("manufactured solution error {err:.2e} at N_r=200, L=8"));
    let (rf, rh0, rh1) = e(prob.apply(&sol.p))?;
    let w = grid.volume_weights();
    let wa: Vec<f64> = (0..na).map(|q| grid.sphere.area_weight(q / grid.sphere.n_lon)).collect();
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    let ri2 = weighted_rms(&d(&rf, &f), &w);
    let ri = weighted_rms(&d(&first_order_interior(&prob, &ctx, &sol)?, &f), &w);
    let dd = weighted_rms(&d(&radial_derivative(&grid, &sol.p), &sol.dp), &w);
    let r0 = weighted_rms(&d(&rh0, &h0), &wa);
    let r1 = weighted_rms(&rh1, &wa);
    c.check(ri <= 1e-8 && r0 <= 1e-8 && r1 <= 1e-8, format!("residuals interior {ri:.1e}, inner {r0:.1e}, outer {r1:.1e}"));
    c.check(dd <= 1e-8, format!("derivative field consistent with D p to {dd:.1e} (D^2 p collocation residual {ri2:.1e})"));
    let zero = e(venttsel_solve(&prob, &vec![0.0; grid.len()], &vec![0.0; na], &vec![0.0; na]))?;
    let z = max_abs(&zero.p);
    c.check(z <= 1e-12, format!("zero data gives {z:.1e}"));
    c.finish()
}

/// `D_r` of a shell field column by column.
fn radial_derivative(grid: &ShellGrid, v: &[f64]) -> Vec<f64> {
    let (na, nr) = (grid.n_ang(), grid.n_r());
    let d = grid.radial.diff_matrix();
    let mut out = vec![0.0; v.len()];
    for a in 0..na {
        for i in 0..nr {
            out[i * na + a] = (0..nr).map(|l| d[(i, l)] * v[l * na + a]).sum();
        }
    }
    out
}

/// Interior operator applied to a solution given as the pair `(p, ∂p)`, with
/// the second radial derivative taken from the derivative field.
fn first_order_interior(
    prob: &VenttselProblem,
    ctx: &SConditionContext,
    sol: &euler_shell::elliptic::ModeField,
) -> std::result::Result<Vec<f64>, String> {
    let g = prob.grid;
    let na = g.n_ang();
    let d2p = radial_derivative(g, &sol.dp);
    let mut f = vec![0.0; sol.p.len()];
    for i in 0..g.n_r() {
        let ec = euler_shell::elliptic::RadialCoefficients::e(&ctx.ec, g.r(i));
        let c = e(g.sphere.analyze(&sol.p[i * na..(i + 1) * na]))?;
        let lap = g.sphere.synthesize(&euler_shell::sphere::laplace_beltrami(&c));
        for a in 0..na {
            let q = i * na + a;
            f[q] = -lap[a] + ec[0] * d2p[q] + ec[1] * sol.dp[q] + ec[2] * sol.p[q] + ec[3] * sol.p[a];
        }
    }
    Ok(f)
}

fn c6_div_curl() -> Check {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for l in [4usize, 8, 16] {
        let g = e(SphereGrid::dealiased(l))?;
        for _ in 0..5 {
            let chi = random_coeffs(&mut rng, l).mean_zero();
            let psi = random_coeffs(&mut rng, l).mean_zero();
            let w = e(div_curl_solve(&g, &chi, &psi))?;
            let w2 = e(TangentForm::from_components(&g, w.w_theta.clone(), w.w_phi.clone()))?;
            worst = worst.max(max_diff(&w2.exterior_derivative().data, &chi.data));
            worst = worst.max(max_diff(&w2.codifferential().data, &psi.data));
        }
    }
    c.check(worst <= 1e-10, format!("reconstruction error {worst:.2e}"));
    let g = e(SphereGrid::dealiased(8))?;
    let zero = SphCoeffs::zeros(8);
    let bad = SphCoeffs::single(8, 0, 0, 1e-3);
    let detected = matches!(div_curl_solve(&g, &bad, &zero), Err(Error::Solvability(_)))
        && matches!(div_curl_solve(&g, &zero, &bad), Err(Error::Solvability(_)));
    c.check(detected, "nonzero means rejected");
    c.finish()
}

fn rotating(g: Arc<ShellGrid>, w: impl Fn(f64) -> f64) -> ShellField {
    let sin_t = g.sphere.sin_t.clone();
    ShellField::from_fn(g, |r, j, _| FlowState { u0: 1.0, ut: [0.0, r * w(r) * sin_t[j]], p: 1.0, rho: 1.0 })
}

fn rot_z(x: [f64; 3], ang: f64) -> [f64; 3] {
    let (s, c) = ang.sin_cos();
    [c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]]
}

fn c7_transport() -> Check {
    let mut c = Checks::new();
    let data = |g: &ShellGrid| {
        let mut k = SphCoeffs::zeros(g.sphere.l_max);
        k.set(0, 0, 1.0);
        k.set(2, 1, 0.7);
        k.set(3, -2, -0.4);
        k.set(4, 3, 0.2);
        let v = g.sphere.synthesize(&k);
        (k, v)
    };
    let grid = |n_r, l| -> std::result::Result<Arc<ShellGrid>, String> { Ok(Arc::new(e(ShellGrid::new(1.0, 1.5, n_r, l))?)) };
    let opts = TransportOptions::default();

    let g = grid(16, 6)?;
    let na = g.n_ang();
    let cf = e(CharacteristicField::from_field(&rotating(g.clone(), |_| 0.0), None))?;
    let (_, d) = data(&g);
    let alpha = 0.8;
    let sol = e(solve_transport(&cf, Some(&vec![alpha; g.len()]), None, &d, Surface::Inner, opts))?;
    let exact: Vec<f64> = (0..g.len()).map(|q| d[q % na] * (-alpha * (g.r(q / na) - 1.0)).exp()).collect();
    let e1 = max_diff(&sol, &exact);

    let cf = e(CharacteristicField::from_field(&rotating(g.clone(), |_| 0.6), None))?;
    let sol = e(solve_transport(&cf, None, Some(&vec![2.0; g.len()]), &vec![0.0; na], Surface::Outer, opts))?;
    let exact: Vec<f64> = (0..g.len()).map(|q| 2.0 * (g.r(q / na) - 1.5)).collect();
    let e2 = max_diff(&sol, &exact);

    let g = grid(24, 6)?;
    let na = g.n_ang();
    let w = 1.3;
    let cf = e(CharacteristicField::from_field(&rotating(g.clone(), |_| w), None))?;
    let (k, d) = data(&g);
    let sol = e(solve_transport(&cf, None, None, &d, Surface::Inner, opts))?;
    let mut e3 = 0.0f64;
    for q in 0..g.len() {
        let a = q % na;
        let x = g.sphere.xyz(a / g.sphere.n_lon, a % g.sphere.n_lon);
        e3 = e3.max((sol[q] - g.sphere.eval_at(&k, rot_z(x, -w * (g.r(q / na) - 1.0)))).abs());
    }
    c.check(e1.max(e2).max(e3) <= 1e-8, format!("damped {e1:.1e}, sourced {e2:.1e}, rotation {e3:.1e}"));

    let g = grid(6, 4)?;
    let na = g.n_ang();
    let cf = e(CharacteristicField::from_field(&rotating(g.clone(), |r| 3.0 * (2.0 * r).sin()), None))?;
    let (k, d) = data(&g);
    let angle = |r: f64| 1.5 * ((2.0f64).cos() - (2.0 * r).cos());
    let mut errs = Vec::new();
    for s in [1usize, 2, 4, 8] {
        let sol = e(solve_transport(&cf, None, None, &d, Surface::Inner, TransportOptions { substeps: s }))?;
        let i = g.n_r() - 1;
        let err = (0..na)
            .map(|a| {
                let x = g.sphere.xyz(a / g.sphere.n_lon, a % g.sphere.n_lon);
                (sol[i * na + a] - g.sphere.eval_at(&k, rot_z(x, -angle(g.r(i))))).abs()
            })
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    c.check(orders.iter().all(|o| *o > 3.6 && *o < 4.6), format!("observed orders {orders:.2?}"));
    c.finish()
}

const SUB_R1: f64 = 1.06;

fn subsonic_problem(n_r: usize, l: usize) -> std::result::Result<SubsonicProblem, String> {
    let gas = e(GasConstants::with_gamma(1.4))?;
    let prof = e(subsonic_from_mach(&gas, 0.8, 1.0, 1.0, 1.0, SUB_R1))?;
    let grid = Arc::new(e(ShellGrid::new(1.0, SUB_R1, n_r, l))?);
    e(SubsonicProblem::new(&prof, grid))
}

fn c8_f2_double_entry() -> Check {
    let mut c = Checks::new();
    let pb = subsonic_problem(24, 6)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let k: [SphCoeffs; 4] = std::array::from_fn(|_| random_coeffs(&mut rng, 4).resized(6).scale(1e-3));
        let freq: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.5..3.0));
        let ang: Vec<Vec<f64>> = k.iter().map(|c| pb.grid.sphere.synthesize(c)).collect();
        let nl = pb.grid.sphere.n_lon;
        let u = ShellField::from_fn(pb.grid.clone(), |r, j, kk| {
            let b = pb.profile.flow_state(r);
            let a = j * nl + kk;
            let s = |i: usize| ang[i][a] * (freq[i] * (r - 1.0) / (SUB_R1 - 1.0)).cos();
            FlowState { u0: b.u0 * (1.0 + s(0)), ut: [s(1), -s(1)], p: b.p * (1.0 + s(2)), rho: b.rho * (1.0 + s(3)) }
        });
        let (tr, id) = e(f2_both_routes(&pb, &u))?;
        let num = tr.iter().zip(&id).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den = id.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    c.check(worst <= 1e-6, format!("max relative difference {worst:.2e} over 10 fields"));
    c.finish()
}

fn subsonic_list(scale: f64) -> Vec<BoundaryPerturbation> {
    vec![
        BoundaryPerturbation { field: BoundaryField::P0, n: 2, m: 1, amp: scale },
        BoundaryPerturbation { field: BoundaryField::E1, n: 1, m: 0, amp: 0.5 * scale },
        BoundaryPerturbation { field: BoundaryField::U1, n: 3, m: -2, amp: 0.3 * scale },
    ]
}

/// Subsonic run with the boundary perturbation sized to `eps`.
fn subsonic_run(pb: &SubsonicProblem, eps: f64) -> std::result::Result<(ShellField, IterationReport, f64), String> {
    let unit = e(SubsonicBCs::from_perturbations(pb, &subsonic_list(1.0)))?.eps;
    let bcs = e(SubsonicBCs::from_perturbations(pb, &subsonic_list(eps / unit)))?;
    let t = Instant::now();
    let (u, rep) = e(iterate_subsonic(pb, &bcs, &SubsonicOptions { substeps: 2, ..Default::default() }))?;
    Ok((u, rep, t.elapsed().as_secs_f64()))
}

fn c9_subsonic(out: &mut Vec<ResidualNorms>) -> Check {
    let mut c = Checks::new();
    let pb = subsonic_problem(128, 8)?;
    let bcs = e(SubsonicBCs::unperturbed(&pb))?;
    let (u, _) = e(iterate_subsonic(&pb, &bcs, &SubsonicOptions::default()))?;
    let d0 = field_distance(&u, &pb.background);
    c.check(d0 <= 1e-12, format!("eps=0 distance {d0:.1e}"));
    let (_, rep, secs) = subsonic_run(&pb, 1e-3)?;
    let (_, rep2, _) = subsonic_run(&pb, 5e-4)?;
    c.check(rep.converged && rep2.converged, format!("converged in {} and {} iterations", rep.iterations, rep2.iterations));
    c.check(rep.contraction < 1.0, format!("contraction {:.3}", rep.contraction));
    let ratio = rep.distance / rep2.distance;
    c.check((ratio - 2.0).abs() <= 0.2, format!("distance ratio {ratio:.4}"));
    let (res, bg) = (rep.residual.max_linf(), rep.background_residual.max_linf());
    c.check(res <= 10.0 * bg, format!("Euler residual {res:.2e} vs background {bg:.2e}"));
    c.check(secs < 300.0, format!("runtime {secs:.1} s at L=8, N_r=128"));
    out.push(rep.residual);
    c.finish()
}

fn transonic_run(
    tb: &TransonicBackground,
    n_r: usize,
    l: usize,
    list: &[TransonicPerturbation],
) -> std::result::Result<(TransonicSolution, f64), String> {
    let t = Instant::now();
    let prob = e(TransonicProblem::new(tb, n_r, l))?;
    let bcs = e(TransonicBCs::from_perturbations(&prob, list, 0))?;
    let sol = e(iterate_transonic(&prob, &bcs, &TransonicOptions::default()))?;
    Ok((sol, t.elapsed().as_secs_f64()))
}

fn y10(eps: f64) -> Vec<TransonicPerturbation> {
    vec![TransonicPerturbation { field: TransonicField::P1, n: 1, m: 0, amp: eps }]
}

fn front_checks(c: &mut Checks, tag: &str, sol: &TransonicSolution) {
    let r = &sol.report;
    c.check(r.converged, format!("{tag}: converged in {} iterations", r.iterations));
    c.check(r.rh.max_residual() <= 1e-8, format!("{tag}: R-H residual {:.1e}", r.rh.max_residual()));
    c.check(r.psi_p_integral.abs() <= 1e-10, format!("{tag}: psi^p integral {:.1e}", r.psi_p_integral));
    c.check(r.rh.min_jump > 0.0, format!("{tag}: min pressure jump {:.4e}", r.rh.min_jump));
    c.check(r.rh.e_jump <= 1e-10, format!("{tag}: Bernoulli jump {:.1e}", r.rh.e_jump));
    let dc = r.step_diagnostics.iter().fold(0.0f64, |a, d| a.max(d.div_curl_mean.abs()));
    c.check(dc <= 1e-10, format!("{tag}: div-curl mean {dc:.1e}"));
}

fn c10_transonic(out: &mut Vec<ResidualNorms>) -> Check {
    let mut c = Checks::new();
    let tb = e(solve_transonic_background(default_params()))?;
    let (n_r, l) = (128, 8);
    let pe = tb.exit_pressure();
    let dp = 1e-3 * pe;
    let (r_oracle, tb_oracle) = e(shooting_oracle(&tb, dp))?;
    let list = [TransonicPerturbation { field: TransonicField::P1, n: 0, m: 0, amp: dp * (4.0 * PI).sqrt() }];
    let (sol, secs) = transonic_run(&tb, n_r, l, &list)?;
    front_checks(&mut c, "uniform", &sol);
    let dr = (sol.report.r_p - r_oracle).abs();
    c.check(dr <= 1e-4 * tb.r_b(), format!("shock radius {:.10} vs oracle {r_oracle:.10}", sol.report.r_p));
    let na = sol.field.grid.n_ang();
    let outer = &sol.field.p[sol.field.p.len() - na..];
    let pe_err = outer.iter().fold(0.0f64, |a, p| a.max((p - (pe + dp)).abs()));
    let oracle_err = (tb_oracle.exit_pressure() - (pe + dp)).abs();
    c.check(pe_err <= 1e-12 * pe && oracle_err <= 1e-12 * pe, format!("exit pressure error {pe_err:.1e}, oracle {oracle_err:.1e}"));
    c.check(secs < 600.0, format!("uniform run {secs:.1} s"));

    let (s1, secs1) = transonic_run(&tb, n_r, l, &y10(dp))?;
    let (s2, secs2) = transonic_run(&tb, n_r, l, &y10(0.5 * dp))?;
    front_checks(&mut c, "Y10", &s1);
    front_checks(&mut c, "Y10 half", &s2);
    let ratio = s1.report.front_amplitude / s2.report.front_amplitude;
    c.check((ratio - 2.0).abs() <= 0.1, format!("front amplitude ratio {ratio:.4}"));
    c.check(secs1.max(secs2) < 600.0, format!("Y10 runs {secs1:.1} s, {secs2:.1} s at L=8, N_r=128"));
    out.push(sol.report.residual);
    out.push(s1.report.residual);
    c.finish()
}

/// Dominant law of the coarse residual and its fine-to-coarse ratio.
fn refinement_ratio(coarse: &ResidualNorms, fine: &ResidualNorms) -> (&'static str, f64) {
    let laws = [("momentum", coarse.momentum.l2, fine.momentum.l2), ("mass", coarse.mass.l2, fine.mass.l2), ("energy", coarse.energy.l2, fine.energy.l2)];
    let (name, c, f) = laws.iter().cloned().fold(laws[0], |a, b| if b.1 > a.1 { b } else { a });
    (name, f / c)
}

fn c11_refinement(prior: &[ResidualNorms]) -> Check {
    let mut c = Checks::new();
    let small = prior.iter().fold(0.0f64, |a, r| a.max(r.max_linf()));
    c.check(small <= 1e-6, format!("criteria 9-10 solutions have Euler residual <= {small:.1e}"));

    let levels = [(8usize, 4usize), (12, 6)];
    let mut sub = Vec::new();
    for (n_r, l) in levels {
        let pb = subsonic_problem(n_r, l)?;
        sub.push(subsonic_run(&pb, 1e-3)?.1.residual);
    }
    let (law, ratio) = refinement_ratio(&sub[0], &sub[1]);
    c.check(ratio <= 0.5, format!("subsonic {levels:?}: {law} ratio {ratio:.3}"));

    let tb = e(solve_transonic_background(default_params()))?;
    let dp = 1e-3 * tb.exit_pressure();
    let levels = [(12usize, 6usize), (16, 8)];
    let mut tr = Vec::new();
    for (n_r, l) in levels {
        tr.push(transonic_run(&tb, n_r, l, &y10(dp))?.0.report.residual);
    }
    let (law, ratio) = refinement_ratio(&tr[0], &tr[1]);
    c.check(ratio <= 0.5, format!("transonic {levels:?}: {law} ratio {ratio:.3}"));
    c.finish()
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let t = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panic: {}", msg.unwrap_or_default()))
    });
    let secs = t.elapsed().as_secs_f64();
    match &r {
        Ok(s) => println!("criterion {n:>2} PASS  {name} ({secs:.1} s): {s}"),
        Err(s) => println!("criterion {n:>2} FAIL  {name} ({secs:.1} s): {s}"),
    }
    r.is_ok()
}

fn main() {
    let mut residuals = Vec::new();
    let mut ok = true;
    ok &= run(1, "subsonic background vs closed form", c1_closed_form);
    ok &= run(2, "coefficient exactness", c2_coefficients);
    ok &= run(3, "transonic background", c3_transonic_background);
    ok &= run(4, "S-condition", c4_s_condition);
    ok &= run(5, "nonlocal elliptic solver", c5_venttsel);
    ok &= run(6, "div-curl system", c6_div_curl);
    ok &= run(7, "transport", c7_transport);
    ok &= run(8, "F2 double entry", c8_f2_double_entry);
    ok &= run(9, "subsonic iteration", || c9_subsonic(&mut residuals));
    ok &= run(10, "transonic iteration vs 1-D oracle", || c10_transonic(&mut residuals));
    ok &= run(11, "Euler residual under refinement", || c11_refinement(&residuals));
    if !ok {
        std::process::exit(1);
    }
}
