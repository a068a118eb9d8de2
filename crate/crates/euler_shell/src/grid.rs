//! Tensor grids on the shell (Chebyshev radial nodes × spherical quadrature
//! grid), flow fields on them, and their CSV/JSON serialization.

use crate::error::{Error, Result};
use crate::gas::{FlowState, GasConstants};
use crate::io::fmt17;
use crate::numerics::cheb::ChebGrid;
use crate::sphere::SphereGrid;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

/// Radial Chebyshev–Lobatto nodes on `[r0, r1]` times a spherical grid.
///
/// `sphere` carries tables up to the truncation degree `L_max`; `sphere_full`
/// uses the same nodes with the highest degree the grid resolves and is used
/// for derivatives of nonlinear expressions.
#[derive(Debug, Clone)]
pub struct ShellGrid {
    pub radial: ChebGrid,
    pub sphere: SphereGrid,
    pub sphere_full: SphereGrid,
}

/// Grid dimensions as written to the JSON sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r0: f64,
    pub r1: f64,
    pub n_r: usize,
    pub l_max: usize,
    pub n_lat: usize,
    pub n_lon: usize,
}

impl ShellGrid {
    /// Shell grid with a dealiased spherical grid for degree `l_max`.
    pub fn new(r0: f64, r1: f64, n_r: usize, l_max: usize) -> Result<Self> {
        let sphere = SphereGrid::dealiased(l_max)?;
        Self::from_parts(r0, r1, n_r, sphere)
    }

    pub fn from_spec(s: &GridSpec) -> Result<Self> {
        Self::from_parts(s.r0, s.r1, s.n_r, SphereGrid::new(s.l_max, s.n_lat, s.n_lon)?)
    }

    pub fn from_parts(r0: f64, r1: f64, n_r: usize, sphere: SphereGrid) -> Result<Self> {
        if !(r1 > r0) || !(r0 > 0.0) {
            return Err(Error::Config(format!("need 0 < r0 < r1, got {r0}, {r1}")));
        }
        if n_r < 4 {
            return Err(Error::Config(format!("need at least 4 radial nodes, got {n_r}")));
        }
        let l_full = (sphere.n_lat - 1).min((sphere.n_lon - 1) / 2);
        let sphere_full = sphere.with_degree(l_full)?;
        Ok(ShellGrid { radial: ChebGrid::new(r0, r1, n_r), sphere, sphere_full })
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            r0: self.radial.a,
            r1: self.radial.b,
            n_r: self.n_r(),
            l_max: self.sphere.l_max,
            n_lat: self.sphere.n_lat,
            n_lon: self.sphere.n_lon,
        }
    }

    pub fn n_r(&self) -> usize {
        self.radial.len()
    }

    /// Points per radial level.
    pub fn n_ang(&self) -> usize {
        self.sphere.len()
    }

    pub fn len(&self) -> usize {
        self.n_r() * self.n_ang()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of `(radial i, colatitude j, longitude k)`.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i * self.n_ang() + j * self.sphere.n_lon + k
    }

    pub fn r(&self, i: usize) -> f64 {
        self.radial.nodes[i]
    }

    /// Volume quadrature weights `w_r r² w_ang`, flat.
    pub fn volume_weights(&self) -> Vec<f64> {
        let wr = self.radial.quadrature_weights();
        let mut w = Vec::with_capacity(self.len());
        for i in 0..self.n_r() {
            let r2 = self.r(i) * self.r(i);
            for j in 0..self.sphere.n_lat {
                let wa = self.sphere.area_weight(j);
                for _ in 0..self.sphere.n_lon {
                    w.push(wr[i] * r2 * wa);
                }
            }
        }
        w
    }
}

/// Flow field on a shell grid: radial velocity, orthonormal tangential
/// components `(u_θ, u_φ)`, pressure and density, flat in grid order.
#[derive(Debug, Clone)]
pub struct ShellField {
    pub grid: Arc<ShellGrid>,
    pub u0: Vec<f64>,
    pub u_theta: Vec<f64>,
    pub u_phi: Vec<f64>,
    pub p: Vec<f64>,
    pub rho: Vec<f64>,
}

/// JSON sidecar describing a field CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldMeta {
    pub gamma: f64,
    pub grid: GridSpec,
    pub l_max: usize,
    /// Shock front `ψ` on the angular grid when the radial coordinate is
    /// the normalized one of a transonic solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub front: Option<Vec<f64>>,
}

const FIELD_HEADER: &str = "r,theta,phi,u0,u1,u2,p,rho";

impl ShellField {
    /// Field from a function of `(r, unit position)`.
    pub fn from_fn<F: FnMut(f64, usize, usize) -> FlowState>(grid: Arc<ShellGrid>, mut f: F) -> Self {
        let n = grid.len();
        let mut out = ShellField {
            grid: grid.clone(),
            u0: vec![0.0; n],
            u_theta: vec![0.0; n],
            u_phi: vec![0.0; n],
            p: vec![0.0; n],
            rho: vec![0.0; n],
        };
        for i in 0..grid.n_r() {
            for j in 0..grid.sphere.n_lat {
                for k in 0..grid.sphere.n_lon {
                    let s = f(grid.r(i), j, k);
                    let q = grid.index(i, j, k);
                    out.u0[q] = s.u0;
                    out.u_theta[q] = s.ut[0];
                    out.u_phi[q] = s.ut[1];
                    out.p[q] = s.p;
                    out.rho[q] = s.rho;
                }
            }
        }
        out
    }

    pub fn state(&self, q: usize) -> FlowState {
        FlowState { u0: self.u0[q], ut: [self.u_theta[q], self.u_phi[q]], p: self.p[q], rho: self.rho[q] }
    }

    /// Check the invariants: positive `p`, `ρ` and finite entries.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        for v in [&self.u0, &self.u_theta, &self.u_phi, &self.p, &self.rho] {
            if v.len() != n {
                return Err(Error::Config(format!("field has {} values for {} grid points", v.len(), n)));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain("non-finite field value".into()));
            }
        }
        if self.p.iter().chain(&self.rho).any(|x| *x <= 0.0) {
            return Err(Error::Domain("non-positive pressure or density".into()));
        }
        Ok(())
    }

    /// Cartesian velocity components at flat index `q`.
    pub fn cartesian_velocity(&self, q: usize) -> [f64; 3] {
        let g = &self.grid;
        let a = q % g.n_ang();
        let (j, k) = (a / g.sphere.n_lon, a % g.sphere.n_lon);
        let f = g.sphere.frame(j, k);
        let (u, t, ph) = (self.u0[q], self.u_theta[q], self.u_phi[q]);
        [0, 1, 2].map(|c| u * f[0][c] + t * f[1][c] + ph * f[2][c])
    }

    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut s = String::with_capacity(g.len() * 200);
        s.push_str(FIELD_HEADER);
        s.push('\n');
        for i in 0..g.n_r() {
            for j in 0..g.sphere.n_lat {
                for k in 0..g.sphere.n_lon {
                    let q = g.index(i, j, k);
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{}",
                        fmt17(g.r(i)),
                        fmt17(g.sphere.theta[j]),
                        fmt17(g.sphere.phi[k]),
                        fmt17(self.u0[q]),
                        fmt17(self.u_theta[q]),
                        fmt17(self.u_phi[q]),
                        fmt17(self.p[q]),
                        fmt17(self.rho[q])
                    );
                }
            }
        }
        s
    }

    pub fn meta(&self, gas: &GasConstants) -> FieldMeta {
        FieldMeta { gamma: gas.gamma, grid: self.grid.spec(), l_max: self.grid.sphere.l_max, front: None }
    }

    /// Write `<stem>.csv` and `<stem>.json`.
    pub fn write(&self, gas: &GasConstants, csv_path: &Path) -> Result<()> {
        self.write_with_meta(&self.meta(gas), csv_path)
    }

    /// Write `<stem>.csv` and the sidecar `meta` as `<stem>.json`.
    pub fn write_with_meta(&self, meta: &FieldMeta, csv_path: &Path) -> Result<()> {
        std::fs::write(csv_path, self.to_csv())?;
        let meta = serde_json::to_string_pretty(meta).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(csv_path.with_extension("json"), meta)?;
        Ok(())
    }

    /// Parse a CSV against the grid described by its sidecar metadata.
    pub fn from_csv(text: &str, meta: &FieldMeta) -> Result<Self> {
        let grid = Arc::new(ShellGrid::from_spec(&meta.grid)?);
        let n = grid.len();
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == FIELD_HEADER => {}
            Some(h) => return Err(Error::Parse(format!("line 1: expected header {FIELD_HEADER:?}, got {h:?}"))),
            None => return Err(Error::Parse("empty field file".into())),
        }
        let mut cols: [Vec<f64>; 5] = Default::default();
        let mut count = 0;
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = ln + 2;
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
            if vals.len() != 8 {
                return Err(Error::Parse(format!("line {lineno}: expected 8 fields, got {}", vals.len())));
            }
            if count >= n {
                return Err(Error::Parse(format!("line {lineno}: more rows than the {n} grid points")));
            }
            let i = count / grid.n_ang();
            let a = count % grid.n_ang();
            let (j, k) = (a / grid.sphere.n_lon, a % grid.sphere.n_lon);
            let tol = 1e-12;
            if (vals[0] - grid.r(i)).abs() > tol * grid.r(i).abs().max(1.0)
                || (vals[1] - grid.sphere.theta[j]).abs() > tol
                || (vals[2] - grid.sphere.phi[k]).abs() > tol
            {
                return Err(Error::Parse(format!("line {lineno}: coordinates do not match the grid")));
            }
            for c in 0..5 {
                cols[c].push(vals[3 + c]);
            }
            count += 1;
        }
        if count != n {
            return Err(Error::Parse(format!("expected {n} rows, got {count}")));
        }
        let [u0, u_theta, u_phi, p, rho] = cols;
        Ok(ShellField { grid, u0, u_theta, u_phi, p, rho })
    }

    /// Read `<path>` and its `.json` sidecar.
    pub fn read(csv_path: &Path) -> Result<(Self, FieldMeta)> {
        let meta_text = std::fs::read_to_string(csv_path.with_extension("json"))?;
        let meta: FieldMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse(format!("sidecar: {e}")))?;
        let text = std::fs::read_to_string(csv_path)?;
        Ok((Self::from_csv(&text, &meta)?, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_weights_integrate_shell_volume() {
        let g = ShellGrid::new(1.0, 2.0, 12, 4).unwrap();
        let v: f64 = g.volume_weights().iter().sum();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * (8.0 - 1.0);
        assert!((v - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let g = Arc::new(ShellGrid::new(1.0, 1.5, 5, 2).unwrap());
        let f = ShellField::from_fn(g.clone(), |r, j, k| FlowState {
            u0: r.sqrt(),
            ut: [0.1 * j as f64 / 3.0, -0.2 * k as f64 / 7.0],
            p: 1.0 + r / 3.0,
            rho: 2.0 / r,
        });
        let gas = GasConstants::with_gamma(1.4).unwrap();
        let back = ShellField::from_csv(&f.to_csv(), &f.meta(&gas)).unwrap();
        assert_eq!(back.u0, f.u0);
        assert_eq!(back.u_theta, f.u_theta);
        assert_eq!(back.u_phi, f.u_phi);
        assert_eq!(back.p, f.p);
        assert_eq!(back.rho, f.rho);
    }

    #[test]
    fn csv_rejects_malformed_rows() {
        let g = Arc::new(ShellGrid::new(1.0, 1.5, 4, 1).unwrap());
        let f = ShellField::from_fn(g, |_, _, _| FlowState { u0: 1.0, ut: [0.0; 2], p: 1.0, rho: 1.0 });
        let gas = GasConstants::with_gamma(1.4).unwrap();
        let meta = f.meta(&gas);
        let text = f.to_csv();
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(ShellField::from_csv(&truncated, &meta), Err(Error::Parse(_))));
        assert!(matches!(ShellField::from_csv("", &meta), Err(Error::Parse(_))));
        let bad = text.replacen("e0,", "x,", 1);
        assert!(ShellField::from_csv(&bad, &meta).is_err());
    }
}
