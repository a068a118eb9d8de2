//! Command-line driver: parses arguments and configuration files, runs the
//! solvers and writes CSV and JSON artifacts.
//!
//! Exit codes: 0 on success, 2 on invalid input or a failed precondition,
//! 3 on non-convergence or numerical failure.

use clap::{Args, Parser, Subcommand};
use euler_shell::background::{solve_transonic_background, subsonic_from_mach};
use euler_shell::coeffs::{linearization_coeffs, stability_poly};
use euler_shell::config::{
    BackgroundConfig, CoeffsConfig, KeyValues, SConditionConfig, SubsonicConfig, TransonicBackgroundConfig, TransonicConfig,
};
use euler_shell::elliptic::s_condition_scan;
use euler_shell::grid::{ShellField, ShellGrid};
use euler_shell::io::fmt17;
use euler_shell::residual::euler_residual_mapped;
use euler_shell::subsonic::{iterate_subsonic, SubsonicBCs, SubsonicOptions, SubsonicProblem};
use euler_shell::transonic::{front_map, iterate_transonic, TransonicBCs, TransonicOptions, TransonicProblem};
use euler_shell::{Error, GasConstants, Result};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "euler-shell", version, about = "Steady Euler flows in a spherical shell")]
pub struct Cli {
    /// Worker threads; the EULER_SHELL_THREADS environment variable overrides it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Subsonic spherically symmetric background.
    Background(BackgroundArgs),
    /// Spherically symmetric transonic shock.
    TransonicBackground(TransonicBackgroundArgs),
    /// Linearization coefficients at one squared Mach number.
    Coeffs(CoeffsArgs),
    /// S-Condition over a grid of shock radii.
    Scondition(SConditionArgs),
    /// Subsonic stability iteration.
    Subsonic(ConfigArgs),
    /// Transonic free-boundary iteration.
    Transonic(ConfigArgs),
    /// Euler residual norms of field files.
    Residuals(ResidualsArgs),
}

#[derive(Args, Debug)]
pub struct BackgroundArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long)]
    pub r1: Option<f64>,
    /// Entry Mach number.
    #[arg(long = "m0", alias = "M0")]
    pub m0: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    /// Number of equispaced output radii.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TransonicParamArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long)]
    pub r1: Option<f64>,
    #[arg(long = "p-s")]
    pub p_s: Option<f64>,
    #[arg(long = "rho-s")]
    pub rho_s: Option<f64>,
    /// Mach number just behind the shock.
    #[arg(long = "m-s")]
    pub m_s: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TransonicBackgroundArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: TransonicParamArgs,
    /// Shock radius.
    #[arg(long)]
    pub rb: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CoeffsArgs {
    #[arg(long)]
    pub gamma: f64,
    /// Squared Mach number.
    #[arg(long)]
    pub t: f64,
}

#[derive(Args, Debug)]
pub struct SConditionArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: TransonicParamArgs,
    /// Shock radii as `lo:hi:count` or a comma-separated list.
    #[arg(long = "rb-grid")]
    pub rb_grid: Option<String>,
    #[arg(long = "n-max")]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct ResidualsArgs {
    /// Field CSV files with their JSON sidecars.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

/// Exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. } | Error::Numeric(_) => EXIT_NOT_CONVERGED,
        _ => EXIT_INVALID,
    }
}

fn load(path: Option<&Path>) -> Result<KeyValues> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            KeyValues::parse(&text).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
        }
        None => Ok(KeyValues::default()),
    }
}

fn set_opt<T: ToString>(kv: &mut KeyValues, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        kv.set(key, v.to_string());
    }
}

fn set_transonic(kv: &mut KeyValues, a: &TransonicParamArgs) {
    set_opt(kv, "gamma", &a.gamma);
    set_opt(kv, "r0", &a.r0);
    set_opt(kv, "r1", &a.r1);
    set_opt(kv, "p_s", &a.p_s);
    set_opt(kv, "rho_s", &a.rho_s);
    set_opt(kv, "M_s", &a.m_s);
}

fn write(out: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let p = out.join(name);
    std::fs::write(&p, text)?;
    Ok(p)
}

fn write_json(out: &Path, name: &str, v: &Value) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))?;
    write(out, name, &(text + "\n"))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn table_csv(rows: &[[f64; 7]]) -> String {
    let mut s = String::from("r,u,p,rho,M,E,A\n");
    for r in rows {
        s.push_str(&r.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

fn background(out: &Path, a: &BackgroundArgs) -> Result<i32> {
    let mut kv = load(a.config.as_deref())?;
    set_opt(&mut kv, "gamma", &a.gamma);
    set_opt(&mut kv, "r0", &a.r0);
    set_opt(&mut kv, "r1", &a.r1);
    set_opt(&mut kv, "M0", &a.m0);
    set_opt(&mut kv, "p0", &a.p0);
    set_opt(&mut kv, "rho0", &a.rho0);
    set_opt(&mut kv, "points", &a.points);
    let c = BackgroundConfig::from_kv(&kv)?;
    let gas = GasConstants::with_gamma(c.gamma)?;
    let prof = subsonic_from_mach(&gas, c.m0, c.p0, c.rho0, c.r0, c.r1)?;
    let rows = prof.table(&linspace(c.r0, c.r1, c.points))?;
    write(out, "background.csv", &table_csv(&rows))?;
    write_json(out, "background.json", &json!({ "config": c.to_kv().to_json(), "E": prof.e, "A": prof.a }))?;
    println!("background: {} rows, exit Mach {}", rows.len(), fmt17(rows[rows.len() - 1][4]));
    Ok(EXIT_OK)
}

fn transonic_background(out: &Path, a: &TransonicBackgroundArgs) -> Result<i32> {
    let mut kv = load(a.config.as_deref())?;
    set_transonic(&mut kv, &a.params);
    set_opt(&mut kv, "r_b", &a.rb);
    set_opt(&mut kv, "points", &a.points);
    let c = TransonicBackgroundConfig::from_kv(&kv)?;
    let tb = solve_transonic_background(c.params)?;
    let p = &c.params;
    let rs = linspace(p.r0, p.r1, c.points);
    let (lo, hi): (Vec<f64>, Vec<f64>) = rs.iter().partition(|&&r| r < p.r_b);
    let mut rows = tb.supersonic.table(&lo)?;
    let mut hi = hi;
    if hi.first() != Some(&p.r_b) {
        hi.insert(0, p.r_b);
        rows.extend(tb.supersonic.table(&[p.r_b])?);
    }
    rows.extend(tb.subsonic.table(&hi)?);
    write(out, "transonic_background.csv", &table_csv(&rows))?;
    let (up, down) = tb.shock_states();
    write_json(
        out,
        "transonic_background.json",
        &json!({
            "config": c.to_kv().to_json(),
            "upstream": { "u": up.u0, "p": up.p, "rho": up.rho, "M": up.mach(&tb.gas)? },
            "downstream": { "u": down.u0, "p": down.p, "rho": down.rho, "M": down.mach(&tb.gas)? },
            "rh_residual": tb.rh_residual(),
            "pressure_jump": tb.pressure_jump(),
            "exit_pressure": tb.exit_pressure(),
            "h_sharp": tb.h_sharp,
            "h_up": tb.h_up,
            "warnings": tb.warnings,
        }),
    )?;
    println!("transonic-background: shock at {}, exit pressure {}", fmt17(p.r_b), fmt17(tb.exit_pressure()));
    Ok(EXIT_OK)
}

fn coeffs(a: &CoeffsArgs) -> Result<i32> {
    let mut kv = KeyValues::default();
    kv.push("gamma", a.gamma);
    kv.push("t", a.t);
    let c = CoeffsConfig::from_kv(&kv)?;
    let vals = match linearization_coeffs(c.gamma, c.t) {
        Ok(k) => [k.b, k.e, k.d1, k.d2].map(fmt17),
        Err(Error::Pole) => ["nan", "nan", "nan", "nan"].map(String::from),
        Err(e) => return Err(e),
    };
    println!("gamma,t,b,e,d1,d2,stability_poly");
    println!("{},{},{},{}", fmt17(c.gamma), fmt17(c.t), vals.join(","), fmt17(stability_poly(c.gamma, c.t)));
    Ok(EXIT_OK)
}

fn scondition(out: &Path, a: &SConditionArgs) -> Result<i32> {
    let mut kv = load(a.config.as_deref())?;
    set_transonic(&mut kv, &a.params);
    set_opt(&mut kv, "rb_grid", &a.rb_grid);
    set_opt(&mut kv, "n_max", &a.n_max);
    set_opt(&mut kv, "threshold", &a.threshold);
    let c = SConditionConfig::from_kv(&kv)?;
    let scan = s_condition_scan(c.params, &c.rb_grid, c.n_max, c.threshold);
    write(out, "scondition.csv", &scan.to_csv())?;
    let verdicts: Vec<Value> = scan
        .reports
        .iter()
        .map(|r| json!({ "rb": r.r_b, "holds": r.holds, "violated": r.violated, "margin": r.margin, "n_eff": r.n_eff }))
        .collect();
    let holds = scan.reports.iter().filter(|r| r.holds).count();
    write_json(
        out,
        "scondition.json",
        &json!({
            "config": c.to_kv().to_json(),
            "holds": holds,
            "violated": scan.reports.len() - holds,
            "verdicts": verdicts,
            "sign_changes": scan.brackets,
            "failures": scan.failures,
        }),
    )?;
    println!(
        "scondition: holds at {holds}, violated at {}, no admissible background at {} of {} shock radii",
        scan.reports.len() - holds,
        scan.failures.len(),
        c.rb_grid.len()
    );
    Ok(EXIT_OK)
}

fn subsonic(out: &Path, a: &ConfigArgs) -> Result<i32> {
    let c = SubsonicConfig::from_kv(&load(Some(&a.config))?)?;
    let gas = GasConstants::with_gamma(c.gamma)?;
    let prof = subsonic_from_mach(&gas, c.m0, c.p0, c.rho0, c.r0, c.r1)?;
    let grid = Arc::new(ShellGrid::new(c.r0, c.r1, c.n_r, c.l_max)?);
    let prob = SubsonicProblem::new(&prof, grid)?;
    let bcs = SubsonicBCs::from_perturbations(&prob, &c.perturbations)?;
    let opts = SubsonicOptions {
        tol: c.tol,
        max_iter: c.max_iter,
        substeps: c.substeps,
        allow_unstable: c.allow_unstable,
        ..Default::default()
    };
    let (field, report) = iterate_subsonic(&prob, &bcs, &opts)?;
    field.write(&gas, &out.join("subsonic_field.csv"))?;
    write_json(out, "subsonic_report.json", &json!({ "config": c.to_kv().to_json(), "report": to_value(&report) }))?;
    println!("subsonic: {} iterations, last correction {:e}", report.iterations, report.corrections.last().copied().unwrap_or(0.0));
    Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn transonic(out: &Path, a: &ConfigArgs) -> Result<i32> {
    let c = TransonicConfig::from_kv(&load(Some(&a.config))?)?;
    let tb = solve_transonic_background(c.params)?;
    let prob = TransonicProblem::new(&tb, c.n_r, c.l_max)?;
    let bcs = TransonicBCs::from_perturbations(&prob, &c.perturbations, c.march_steps)?;
    let opts = TransonicOptions {
        tol: c.tol,
        max_iter: c.max_iter,
        theta: c.theta,
        theta_min: c.theta_min,
        substeps: c.substeps,
        s_threshold: c.s_threshold,
        allow_s_violation: c.allow_s_violation,
    };
    let sol = iterate_transonic(&prob, &bcs, &opts)?;
    let sph = &prob.grid.sphere;
    write(out, "front.csv", &sol.front.to_csv(sph))?;
    write(out, "front_coeffs.csv", &sol.front.coeffs.to_csv())?;
    std::fs::create_dir_all(out)?;
    sol.field.write_with_meta(&sol.meta(&tb.gas), &out.join("transonic_field.csv"))?;
    write(out, "transonic_physical.csv", &sol.to_csv())?;
    write_json(out, "transonic_report.json", &json!({ "config": c.to_kv().to_json(), "report": to_value(&sol.report) }))?;
    println!(
        "transonic: {} iterations, shock position {}, front amplitude {:e}",
        sol.report.iterations,
        fmt17(sol.report.r_p),
        sol.report.front_amplitude
    );
    Ok(EXIT_OK)
}

fn residuals(a: &ResidualsArgs) -> Result<i32> {
    let mut out = serde_json::Map::new();
    for f in &a.files {
        let (field, meta) = ShellField::read(f).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("{}: {io}", f.display())),
            other => other,
        })?;
        let gas = GasConstants::with_gamma(meta.gamma)?;
        let map = match &meta.front {
            Some(psi) => Some(front_map(&field.grid, psi)?),
            None => None,
        };
        let res = euler_residual_mapped(&field, &gas, map)?;
        out.insert(f.display().to_string(), to_value(&res.norms));
    }
    println!("{}", serde_json::to_string_pretty(&Value::Object(out)).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(EXIT_OK)
}

/// Thread count from `EULER_SHELL_THREADS`, falling back to `flag`.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var("EULER_SHELL_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("EULER_SHELL_THREADS must be a positive integer, got {s:?}"))),
        Err(_) => Ok(flag),
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Background(a) => background(out, a),
        Command::TransonicBackground(a) => transonic_background(out, a),
        Command::Coeffs(a) => coeffs(a),
        Command::Scondition(a) => scondition(out, a),
        Command::Subsonic(a) => subsonic(out, a),
        Command::Transonic(a) => transonic(out, a),
        Command::Residuals(a) => residuals(a),
    }
}

/// Run with the given arguments (including the program name) and return
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
