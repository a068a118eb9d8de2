use euler_shell::config::{KeyValues, SubsonicConfig, TransonicBackgroundConfig, TransonicConfig};
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_euler-shell"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env_remove("EULER_SHELL_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn coeffs_at_the_pole_prints_the_numerator() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["coeffs", "--gamma", "1.4", "--t", "1.0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(out.lines().next().unwrap(), "gamma,t,b,e,d1,d2,stability_poly");
    let poly: f64 = row[6].parse().unwrap();
    assert!((poly + 11.52).abs() < 1e-12, "{poly}");
}

#[test]
fn sonic_entry_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["background", "--m0", "1.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sonic-at-entry"), "{}", stderr(&o));
}

#[test]
fn background_outputs_and_echo_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["background", "--m0", "0.5", "--points", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("background.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "r,u,p,rho,M,E,A");
    assert_eq!(csv.lines().count(), 12);
    let echo = &json(&d.path().join("background.json"))["config"];
    let kv = KeyValues::from_json(echo).unwrap();
    let c = euler_shell::config::BackgroundConfig::from_kv(&kv).unwrap();
    assert_eq!(c.m0, 0.5);
    assert_eq!(c.points, 11);

    let o = run(d.path(), &["transonic-background", "--rb", "1.4", "--points", "21"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let meta = json(&d.path().join("transonic_background.json"));
    assert!(meta["rh_residual"].as_f64().unwrap() <= 1e-10);
    let c = TransonicBackgroundConfig::from_kv(&KeyValues::from_json(&meta["config"]).unwrap()).unwrap();
    assert_eq!(c.params.r_b, 1.4);
}

#[test]
fn scondition_writes_theta_table_and_verdicts() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["scondition", "--gamma", "1.4", "--rb-grid", "1.3:1.7:3", "--n-max", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("scondition.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "rb,n,theta");
    let v = json(&d.path().join("scondition.json"));
    assert_eq!(v["verdicts"].as_array().unwrap().len(), 3);
}

#[test]
fn transonic_unperturbed_is_a_single_iteration() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    std::fs::write(&cfg, "# unperturbed\nL_max = 4\nN_r = 16\n").unwrap();
    let o = run(d.path(), &["transonic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = json(&d.path().join("transonic_report.json"));
    assert_eq!(rep["report"]["iterations"].as_u64(), Some(1));
    let front = std::fs::read_to_string(d.path().join("front.csv")).unwrap();
    assert_eq!(front.lines().next().unwrap(), "theta,phi,psi");
    for line in front.lines().skip(1) {
        let psi: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((psi - 1.5).abs() <= 1e-12, "{psi}");
    }
    let c = TransonicConfig::from_kv(&KeyValues::from_json(&rep["config"]).unwrap()).unwrap();
    assert_eq!((c.l_max, c.n_r), (4, 16));
    let o = run(d.path(), &["residuals", d.path().join("transonic_field.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let norms = v.as_object().unwrap().values().next().unwrap();
    for law in ["momentum", "mass", "energy"] {
        assert!(norms[law]["linf"].as_f64().unwrap() < 1e-8, "{law}: {norms}");
    }
}

#[test]
fn transonic_non_convergence_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    std::fs::write(&cfg, "L_max = 4\nN_r = 16\nmax_iter = 1\nperturb.p1 = 1,0,1e-3\n").unwrap();
    let o = run(d.path(), &["transonic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn malformed_configs_exit_2_with_line_numbers() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.cfg");
    std::fs::write(&cfg, "L_max = 4\n\nbogus = 1\n").unwrap();
    let o = run(d.path(), &["transonic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("bogus"), "{}", stderr(&o));
    std::fs::write(&cfg, "gamma = 1.4\nperturb.p0 = 1,2,1e-3\n").unwrap();
    let o = run(d.path(), &["subsonic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let o = run(d.path(), &["subsonic", "--config", d.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(d.path(), &["nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn subsonic_run_residuals_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    std::fs::write(&cfg, "L_max = 4\nN_r = 24\n").unwrap();
    let o = run(d.path(), &["subsonic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let field = d.path().join("subsonic_field.csv");
    let first = std::fs::read(&field).unwrap();
    let o = run(d.path(), &["--threads", "2", "subsonic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(first, std::fs::read(&field).unwrap());
    let rep = json(&d.path().join("subsonic_report.json"));
    SubsonicConfig::from_kv(&KeyValues::from_json(&rep["config"]).unwrap()).unwrap();

    let o = run(d.path(), &["residuals", field.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let norms = v.as_object().unwrap().values().next().unwrap().clone();
    for law in ["momentum", "mass", "energy"] {
        assert!(norms[law]["linf"].as_f64().unwrap() <= 1e-9, "{law}: {norms}");
    }

    let text = String::from_utf8(first).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cols: Vec<String> = lines[40].split(',').map(String::from).collect();
    cols[6] = "5.0".into();
    lines[40] = cols.join(",");
    let bad = d.path().join("corrupt.csv");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    std::fs::copy(field.with_extension("json"), bad.with_extension("json")).unwrap();
    let o = run(d.path(), &["residuals", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let linf = v.as_object().unwrap().values().next().unwrap()["momentum"]["linf"].as_f64().unwrap();
    assert!(linf > 1e-2, "{linf}");

    let empty = d.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    std::fs::copy(field.with_extension("json"), empty.with_extension("json")).unwrap();
    let o = run(d.path(), &["residuals", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_variable_must_be_a_positive_integer() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_euler-shell"))
        .args(["coeffs", "--gamma", "1.4", "--t", "0.5"])
        .env("EULER_SHELL_THREADS", "zero")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_euler-shell"))
        .args(["coeffs", "--gamma", "1.4", "--t", "0.5"])
        .env("EULER_SHELL_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}
