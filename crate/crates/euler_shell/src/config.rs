//! Run configurations in the flat `key = value` text format.
//!
//! A configuration file holds one `key = value` pair per line; `#` starts a
//! comment. Boundary perturbations are repeated lines
//! `perturb.<field> = n,m,amplitude`. Unknown and duplicate keys are rejected
//! with the offending line number. Every configuration renders back to the
//! same format and to a JSON echo that parses to an equal configuration.

use crate::background::TransonicParams;
use crate::error::{Error, Result};
use crate::subsonic::{BoundaryField, BoundaryPerturbation};
use crate::transonic::{TransonicField, TransonicPerturbation};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::str::FromStr;

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based line number, 0 for entries not read from a file.
    pub line: usize,
}

/// Ordered `key = value` entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    pub entries: Vec<Entry>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value', got {raw:?}", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key or value", i + 1)));
            }
            entries.push(Entry { key: k.to_string(), value: v.to_string(), line: i + 1 });
        }
        Ok(KeyValues { entries })
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push(Entry { key: key.to_string(), value: value.to_string(), line: 0 });
    }

    /// Replace every entry of `key` by a single new one.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.retain(|e| e.key != key);
        self.push(key, value);
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{} = {}\n", e.key, e.value)).collect()
    }

    /// JSON object with scalar keys as strings and `perturb` as a list of
    /// `{field, value}` pairs.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        let mut pert = Vec::new();
        for e in &self.entries {
            match e.key.strip_prefix("perturb.") {
                Some(f) => pert.push(serde_json::json!({ "field": f, "value": e.value })),
                None => {
                    m.insert(e.key.clone(), Value::String(e.value.clone()));
                }
            }
        }
        if !pert.is_empty() {
            m.insert("perturb".into(), Value::Array(pert));
        }
        Value::Object(m)
    }

    /// Inverse of [`KeyValues::to_json`].
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Parse("config echo is not a JSON object".into()))?;
        let mut kv = KeyValues::default();
        for (k, val) in obj {
            if k == "perturb" {
                for p in val.as_array().ok_or_else(|| Error::Parse("perturb is not a list".into()))? {
                    let f = p["field"].as_str().ok_or_else(|| Error::Parse("perturb entry without field".into()))?;
                    let s = p["value"].as_str().ok_or_else(|| Error::Parse("perturb entry without value".into()))?;
                    kv.push(&format!("perturb.{f}"), s);
                }
            } else {
                let s = match val {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                kv.push(k, s);
            }
        }
        Ok(kv)
    }
}

fn at(e: &Entry) -> String {
    if e.line > 0 {
        format!("line {}: ", e.line)
    } else {
        String::new()
    }
}

/// Typed access to entries with tracking of consumed keys.
struct Reader<'a> {
    kv: &'a KeyValues,
    scalars: BTreeMap<&'a str, &'a Entry>,
    used: Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(kv: &'a KeyValues) -> Result<Self> {
        let mut scalars = BTreeMap::new();
        for e in &kv.entries {
            if e.key.starts_with("perturb.") {
                continue;
            }
            if scalars.insert(e.key.as_str(), e).is_some() {
                return Err(Error::Parse(format!("{}duplicate key '{}'", at(e), e.key)));
            }
        }
        Ok(Reader { kv, scalars, used: Vec::new() })
    }

    fn get<T: FromStr>(&mut self, keys: &[&str], default: Option<T>) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let found: Vec<&Entry> = keys.iter().filter_map(|k| self.scalars.get(k).copied()).collect();
        self.used.extend(keys.iter().map(|k| k.to_string()));
        match found.as_slice() {
            [] => default.ok_or_else(|| Error::Config(format!("missing key '{}'", keys[0]))),
            [e] => e.value.parse::<T>().map_err(|err| Error::Parse(format!("{}invalid value for '{}': {err}", at(e), e.key))),
            [_, e, ..] => Err(Error::Parse(format!("{}'{}' given twice under different names", at(e), e.key))),
        }
    }

    fn perturbations(&mut self) -> Result<Vec<(&'a Entry, String, usize, i64, f64)>> {
        let mut out = Vec::new();
        for e in &self.kv.entries {
            if let Some(f) = e.key.strip_prefix("perturb.") {
                let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(Error::Parse(format!("{}expected 'n,m,amplitude' for '{}'", at(e), e.key)));
                }
                let bad = |what: &str| Error::Parse(format!("{}invalid {what} in '{}'", at(e), e.value));
                let n: usize = parts[0].parse().map_err(|_| bad("degree"))?;
                let m: i64 = parts[1].parse().map_err(|_| bad("order"))?;
                let amp: f64 = parts[2].parse().map_err(|_| bad("amplitude"))?;
                if m.unsigned_abs() as usize > n || !amp.is_finite() {
                    return Err(Error::Parse(format!("{}need |m| <= n and a finite amplitude", at(e))));
                }
                out.push((e, f.to_string(), n, m, amp));
            }
        }
        Ok(out)
    }

    fn finish(self) -> Result<()> {
        for e in &self.kv.entries {
            if !e.key.starts_with("perturb.") && !self.used.iter().any(|k| k == &e.key) {
                return Err(Error::Parse(format!("{}unknown key '{}'", at(e), e.key)));
            }
        }
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameters(format!("gamma must exceed 1, got {gamma}")));
    }
    Ok(())
}

fn check_radii(r0: f64, r1: f64) -> Result<()> {
    if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) {
        return Err(Error::InvalidParameters(format!("need 0 < r0 < r1, got r0 = {r0}, r1 = {r1}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameters(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Subsonic background given by the entry state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundConfig {
    pub gamma: f64,
    pub r0: f64,
    pub r1: f64,
    pub m0: f64,
    pub p0: f64,
    pub rho0: f64,
    /// Number of equispaced output radii.
    pub points: usize,
}

impl BackgroundConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut r = Reader::new(kv)?;
        let c = BackgroundConfig {
            gamma: r.get(&["gamma"], Some(1.4))?,
            r0: r.get(&["r0"], Some(1.0))?,
            r1: r.get(&["r1"], Some(2.0))?,
            m0: r.get(&["M0", "m0"], None)?,
            p0: r.get(&["p0"], Some(1.0))?,
            rho0: r.get(&["rho0"], Some(1.0))?,
            points: r.get(&["points"], Some(101))?,
        };
        r.finish()?;
        check_gamma(c.gamma)?;
        check_radii(c.r0, c.r1)?;
        check_positive("p0", c.p0)?;
        check_positive("rho0", c.rho0)?;
        if !(c.m0 > 0.0) {
            return Err(Error::InvalidParameters(format!("M0 must be positive, got {}", c.m0)));
        }
        if c.points < 2 {
            return Err(Error::InvalidParameters("points must be at least 2".into()));
        }
        Ok(c)
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.push("gamma", self.gamma);
        kv.push("r0", self.r0);
        kv.push("r1", self.r1);
        kv.push("M0", self.m0);
        kv.push("p0", self.p0);
        kv.push("rho0", self.rho0);
        kv.push("points", self.points);
        kv
    }
}

fn read_transonic(r: &mut Reader) -> Result<TransonicParams> {
    let p = TransonicParams {
        gamma: r.get(&["gamma"], Some(1.4))?,
        r0: r.get(&["r0"], Some(1.0))?,
        r1: r.get(&["r1"], Some(2.0))?,
        r_b: r.get(&["r_b", "rb"], Some(1.5))?,
        p_s: r.get(&["p_s"], Some(1.0))?,
        rho_s: r.get(&["rho_s"], Some(1.0))?,
        m_s: r.get(&["M_s", "m_s"], Some(0.5))?,
    };
    check_gamma(p.gamma)?;
    check_radii(p.r0, p.r1)?;
    check_positive("p_s", p.p_s)?;
    check_positive("rho_s", p.rho_s)?;
    check_positive("M_s", p.m_s)?;
    Ok(p)
}

fn check_rb(p: &TransonicParams) -> Result<()> {
    if !(p.r_b > p.r0 && p.r_b < p.r1) {
        return Err(Error::InvalidParameters(format!("need r0 < r_b < r1, got r_b = {}", p.r_b)));
    }
    Ok(())
}

fn push_transonic(kv: &mut KeyValues, p: &TransonicParams) {
    kv.push("gamma", p.gamma);
    kv.push("r0", p.r0);
    kv.push("r1", p.r1);
    kv.push("r_b", p.r_b);
    kv.push("p_s", p.p_s);
    kv.push("rho_s", p.rho_s);
    kv.push("M_s", p.m_s);
}

/// Transonic background given by the downstream state at the shock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransonicBackgroundConfig {
    pub params: TransonicParams,
    pub points: usize,
}

impl TransonicBackgroundConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut r = Reader::new(kv)?;
        let params = read_transonic(&mut r)?;
        let points = r.get(&["points"], Some(101))?;
        r.finish()?;
        check_rb(&params)?;
        if points < 2 {
            return Err(Error::InvalidParameters("points must be at least 2".into()));
        }
        Ok(TransonicBackgroundConfig { params, points })
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        push_transonic(&mut kv, &self.params);
        kv.push("points", self.points);
        kv
    }
}

/// Pointwise coefficient evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffsConfig {
    pub gamma: f64,
    pub t: f64,
}

impl CoeffsConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut r = Reader::new(kv)?;
        let c = CoeffsConfig { gamma: r.get(&["gamma"], None)?, t: r.get(&["t"], None)? };
        r.finish()?;
        check_gamma(c.gamma)?;
        if !(c.t >= 0.0 && c.t.is_finite()) {
            return Err(Error::InvalidParameters(format!("t must be a nonnegative squared Mach number, got {}", c.t)));
        }
        Ok(c)
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.push("gamma", self.gamma);
        kv.push("t", self.t);
        kv
    }
}

/// Grid of shock radii, either `lo:hi:count` or a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct RbGrid(pub Vec<f64>);

impl FromStr for RbGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid shock radius grid '{s}'"));
        let v: Vec<f64> = if let [lo, hi, n] = s.split(':').collect::<Vec<_>>()[..] {
            let (lo, hi): (f64, f64) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n < 2 || !(hi > lo) {
                return Err(bad());
            }
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        } else {
            s.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?
        };
        if v.is_empty() || v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse(format!("shock radius grid '{s}' must be strictly increasing")));
        }
        Ok(RbGrid(v))
    }
}

impl std::fmt::Display for RbGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", s.join(","))
    }
}

/// S-Condition scan over shock radii.
#[derive(Debug, Clone, PartialEq)]
pub struct SConditionConfig {
    /// Background parameters; `r_b` is the first grid value and is replaced
    /// by each grid value in turn.
    pub params: TransonicParams,
    pub rb_grid: Vec<f64>,
    pub n_max: usize,
    pub threshold: f64,
}

impl SConditionConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut r = Reader::new(kv)?;
        let grid: RbGrid = r.get(&["rb_grid", "rb-grid"], None)?;
        let mut params = read_transonic(&mut r)?;
        params.r_b = grid.0[0];
        let n_max = r.get(&["n_max", "n-max"], Some(16))?;
        let threshold = r.get(&["threshold"], Some(1e-8))?;
        r.finish()?;
        if grid.0.iter().any(|&rb| !(rb > params.r0 && rb < params.r1)) {
            return Err(Error::InvalidParameters("shock radii must lie strictly inside (r0, r1)".into()));
        }
        if n_max < 1 {
            return Err(Error::InvalidParameters("n_max must be at least 1".into()));
        }
        check_positive("threshold", threshold)?;
        Ok(SConditionConfig { params, rb_grid: grid.0, n_max, threshold })
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        push_transonic(&mut kv, &self.params);
        kv.push("rb_grid", RbGrid(self.rb_grid.clone()));
        kv.push("n_max", self.n_max);
        kv.push("threshold", self.threshold);
        kv
    }
}

/// Subsonic stability run.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsonicConfig {
    pub gamma: f64,
    pub r0: f64,
    pub r1: f64,
    pub m0: f64,
    pub p0: f64,
    pub rho0: f64,
    pub l_max: usize,
    pub n_r: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub substeps: usize,
    pub allow_unstable: bool,
    pub perturbations: Vec<BoundaryPerturbation>,
}

fn field_name_subsonic(f: BoundaryField) -> &'static str {
    match f {
        BoundaryField::P0 => "p0",
        BoundaryField::E1 => "E1",
        BoundaryField::S1 => "s1",
        BoundaryField::U1 => "u1",
        BoundaryField::U1Curl => "u1_curl",
    }
}

impl SubsonicConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut r = Reader::new(kv)?;
        let mut c = SubsonicConfig {
            gamma: r.get(&["gamma"], Some(1.4))?,
            r0: r.get(&["r0"], Some(1.0))?,
            r1: r.get(&["r1"], Some(1.06))?,
            m0: r.get(&["M0", "m0"], Some(0.8))?,
            p0: r.get(&["p0"], Some(1.0))?,
            rho0: r.get(&["rho0"], Some(1.0))?,
            l_max: r.get(&["L_max", "l_max"], Some(8))?,
            n_r: r.get(&["N_r", "n_r"], Some(32))?,
            tol: r.get(&["tol"], Some(1e-10))?,
            max_iter: r.get(&["max_iter"], Some(100))?,
            substeps: r.get(&["substeps"], Some(1))?,
            allow_unstable: r.get(&["allow_unstable"], Some(false))?,
            perturbations: Vec::new(),
        };
        for (e, f, n, m, amp) in r.perturbations()? {
            let field = BoundaryField::from_str(&f).map_err(|err| Error::Parse(format!("{}{err}", at(e))))?;
            if n > c.l_max {
                return Err(Error::Parse(format!("{}degree {n} exceeds L_max = {}", at(e), c.l_max)));
            }
            c.perturbations.push(BoundaryPerturbation { field, n, m, amp });
        }
        r.finish()?;
        check_gamma(c.gamma)?;
        check_radii(c.r0, c.r1)?;
        check_positive("p0", c.p0)?;
        check_positive("rho0", c.rho0)?;
        check_positive("tol", c.tol)?;
        if !(c.m0 > 0.0) {
            return Err(Error::InvalidParameters(format!("M0 must be positive, got {}", c.m0)));
        }
        if c.n_r < 4 || c.max_iter == 0 || c.substeps == 0 {
            return Err(Error::InvalidParameters("need N_r >= 4, max_iter >= 1 and substeps >= 1".into()));
        }
        Ok(c)
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.push("gamma", self.gamma);
        kv.push("r0", self.r0);
        kv.push("r1", self.r1);
        kv.push("M0", self.m0);
        kv.push("p0", self.p0);
        kv.push("rho0", self.rho0);
        kv.push("L_max", self.l_max);
        kv.push("N_r", self.n_r);
        kv.push("tol", self.tol);
        kv.push("max_iter", self.max_iter);
        kv.push("substeps", self.substeps);
        kv.push("allow_unstable", self.allow_unstable);
        for p in &self.perturbations {
            kv.push(&format!("perturb.{}", field_name_subsonic(p.field)), format!("{},{},{}", p.n, p.m, p.amp));
        }
        kv
    }
}

/// Transonic free-boundary run.
#[derive(Debug, Clone, PartialEq)]
pub struct TransonicConfig {
    pub params: TransonicParams,
    pub l_max: usize,
    pub n_r: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub theta: f64,
    pub theta_min: f64,
    pub substeps: usize,
    pub march_steps: usize,
    pub s_threshold: f64,
    pub allow_s_violation: bool,
    pub perturbations: Vec<TransonicPerturbation>,
}

fn field_name_transonic(f: TransonicField) -> &'static str {
    match f {
        TransonicField::P1 => "p1",
        TransonicField::U0In => "u0_in",
        TransonicField::PIn => "p_in",
        TransonicField::RhoIn => "rho_in",
        TransonicField::UtIn => "ut_in",
        TransonicField::UtCurlIn => "ut_curl_in",
    }
}

impl TransonicConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut r = Reader::new(kv)?;
        let params = read_transonic(&mut r)?;
        let mut c = TransonicConfig {
            params,
            l_max: r.get(&["L_max", "l_max"], Some(8))?,
            n_r: r.get(&["N_r", "n_r"], Some(32))?,
            tol: r.get(&["tol"], Some(1e-10))?,
            max_iter: r.get(&["max_iter"], Some(100))?,
            theta: r.get(&["theta"], Some(1.0))?,
            theta_min: r.get(&["theta_min"], Some(0.25))?,
            substeps: r.get(&["substeps"], Some(1))?,
            march_steps: r.get(&["march_steps"], Some(200))?,
            s_threshold: r.get(&["s_threshold"], Some(1e-8))?,
            allow_s_violation: r.get(&["allow_s_violation"], Some(false))?,
            perturbations: Vec::new(),
        };
        check_rb(&c.params)?;
        for (e, f, n, m, amp) in r.perturbations()? {
            let field = TransonicField::from_str(&f).map_err(|err| Error::Parse(format!("{}{err}", at(e))))?;
            if n > c.l_max {
                return Err(Error::Parse(format!("{}degree {n} exceeds L_max = {}", at(e), c.l_max)));
            }
            c.perturbations.push(TransonicPerturbation { field, n, m, amp });
        }
        r.finish()?;
        check_positive("tol", c.tol)?;
        check_positive("s_threshold", c.s_threshold)?;
        if !(c.theta > 0.0 && c.theta <= 1.0 && c.theta_min > 0.0 && c.theta_min <= c.theta) {
            return Err(Error::InvalidParameters("need 0 < theta_min <= theta <= 1".into()));
        }
        if c.n_r < 4 || c.max_iter == 0 || c.substeps == 0 || c.march_steps == 0 {
            return Err(Error::InvalidParameters("need N_r >= 4 and positive max_iter, substeps, march_steps".into()));
        }
        Ok(c)
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        push_transonic(&mut kv, &self.params);
        kv.push("L_max", self.l_max);
        kv.push("N_r", self.n_r);
        kv.push("tol", self.tol);
        kv.push("max_iter", self.max_iter);
        kv.push("theta", self.theta);
        kv.push("theta_min", self.theta_min);
        kv.push("substeps", self.substeps);
        kv.push("march_steps", self.march_steps);
        kv.push("s_threshold", self.s_threshold);
        kv.push("allow_s_violation", self.allow_s_violation);
        for p in &self.perturbations {
            kv.push(&format!("perturb.{}", field_name_transonic(p.field)), format!("{},{},{}", p.n, p.m, p.amp));
        }
        kv
    }
}
