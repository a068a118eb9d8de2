//! Real orthonormal spherical harmonics on a Gauss–Legendre × uniform-longitude
//! grid: transforms, Laplace–Beltrami operator, tangent 1-forms through Hodge
//! potentials, and the div-curl solver on the unit sphere.
//!
//! Basis: `Y_{n,0} = P̄_n^0(cos θ)`, `Y_{n,m} = √2 P̄_n^m cos mφ` and
//! `Y_{n,-m} = √2 P̄_n^m sin mφ` for `m > 0`, with `P̄` fully normalized and
//! without the Condon–Shortley phase.

use crate::error::{Error, Result};
use crate::numerics::quad::gauss_legendre;
use std::f64::consts::PI;
use std::fmt::Write as _;

#[inline]
fn tri(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// Spherical-harmonic coefficients `c_{n,m}`, `0 ≤ n ≤ l_max`, `|m| ≤ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphCoeffs {
    pub l_max: usize,
    pub data: Vec<f64>,
}

impl SphCoeffs {
    pub fn zeros(l_max: usize) -> Self {
        SphCoeffs { l_max, data: vec![0.0; (l_max + 1) * (l_max + 1)] }
    }

    /// Single basis function `Y_{n,m}` with the given amplitude.
    pub fn single(l_max: usize, n: usize, m: i64, amp: f64) -> Self {
        let mut c = Self::zeros(l_max);
        c.set(n, m, amp);
        c
    }

    #[inline]
    pub fn pos(n: usize, m: i64) -> usize {
        (n * n + n).wrapping_add(m as usize)
    }

    pub fn get(&self, n: usize, m: i64) -> f64 {
        self.data[Self::pos(n, m)]
    }

    pub fn set(&mut self, n: usize, m: i64, v: f64) {
        let p = Self::pos(n, m);
        self.data[p] = v;
    }

    /// Iterate `(n, m, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, f64)> + '_ {
        (0..=self.l_max).flat_map(move |n| (-(n as i64)..=n as i64).map(move |m| (n, m, self.get(n, m))))
    }

    /// Copy into another truncation degree (zero padding or truncation).
    pub fn resized(&self, l_max: usize) -> Self {
        let mut out = Self::zeros(l_max);
        for n in 0..=l_max.min(self.l_max) {
            for m in -(n as i64)..=n as i64 {
                out.set(n, m, self.get(n, m));
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        SphCoeffs { l_max: self.l_max, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, o: &SphCoeffs) -> Self {
        assert_eq!(self.l_max, o.l_max);
        SphCoeffs { l_max: self.l_max, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }

    /// Mean over the sphere `(1/4π)∫f = c_{0,0}/√(4π)`.
    pub fn mean(&self) -> f64 {
        self.data[0] / (4.0 * PI).sqrt()
    }

    /// Remove the `n = 0` component.
    pub fn mean_zero(&self) -> Self {
        let mut c = self.clone();
        c.data[0] = 0.0;
        c
    }

    /// Apply a per-degree multiplier.
    pub fn map_degree<F: Fn(usize) -> f64>(&self, f: F) -> Self {
        let mut c = self.clone();
        for n in 0..=self.l_max {
            let s = f(n);
            for m in -(n as i64)..=n as i64 {
                let p = Self::pos(n, m);
                c.data[p] *= s;
            }
        }
        c
    }

    /// CSV rows `n,m,value` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,m,value\n");
        for (n, m, v) in self.iter() {
            let _ = writeln!(s, "{n},{m},{}", crate::io::fmt17(v));
        }
        s
    }

    /// Parse CSV rows `n,m,value`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line.trim() != "n,m,value" {
                    return Err(Error::Parse(format!("expected header n,m,value, got {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 fields", i + 1)));
            }
            let perr = |e: String| Error::Parse(format!("line {}: {e}", i + 1));
            let n: usize = f[0].trim().parse().map_err(|e| perr(format!("{e}")))?;
            let m: i64 = f[1].trim().parse().map_err(|e| perr(format!("{e}")))?;
            let v: f64 = f[2].trim().parse().map_err(|e| perr(format!("{e}")))?;
            if m.unsigned_abs() as usize > n {
                return Err(perr(format!("|m| > n for ({n},{m})")));
            }
            rows.push((n, m, v));
        }
        let l = rows.iter().map(|r| r.0).max().unwrap_or(0);
        let mut c = Self::zeros(l);
        for (n, m, v) in rows {
            c.set(n, m, v);
        }
        Ok(c)
    }
}

/// Fully normalized associated Legendre values `P̄_n^m(cos θ)` for `m ≤ n ≤ l`,
/// stored triangularly; `P̄_n^m / sin θ` and `dP̄_n^m/dθ` optional.
fn legendre_table(l: usize, z: f64, s: f64, out: &mut [f64]) {
    out[0] = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=l {
        if m > 0 {
            out[tri(m, m)] = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s * out[tri(m - 1, m - 1)];
        }
        if m + 1 <= l {
            out[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * z * out[tri(m, m)];
        }
        for n in (m + 2)..=l {
            let nf = n as f64;
            let mf = m as f64;
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
            let b = (((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0)).sqrt();
            out[tri(n, m)] = a * (z * out[tri(n - 1, m)] - b * out[tri(n - 2, m)]);
        }
    }
}

/// Quadrature grid on the unit sphere with spectral tables up to `l_max`.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub l_max: usize,
    pub n_lat: usize,
    pub n_lon: usize,
    pub theta: Vec<f64>,
    pub cos_t: Vec<f64>,
    pub sin_t: Vec<f64>,
    /// Gauss weights in `cos θ` (sum 2).
    pub w_lat: Vec<f64>,
    pub phi: Vec<f64>,
    p: Vec<Vec<f64>>,
    dp: Vec<Vec<f64>>,
    cosm: Vec<Vec<f64>>,
    sinm: Vec<Vec<f64>>,
}

impl SphereGrid {
    /// Grid with `n_lat ≥ l_max + 1` colatitudes and `n_lon ≥ 2 l_max + 1` longitudes.
    pub fn new(l_max: usize, n_lat: usize, n_lon: usize) -> Result<Self> {
        if n_lat < l_max + 1 || n_lon < 2 * l_max + 1 {
            return Err(Error::Config(format!(
                "grid {n_lat}x{n_lon} too coarse for degree {l_max} (need {}x{})",
                l_max + 1,
                2 * l_max + 1
            )));
        }
        let (x, w) = gauss_legendre(n_lat);
        let theta: Vec<f64> = x.iter().map(|z| z.acos()).collect();
        let sin_t: Vec<f64> = x.iter().map(|z| (1.0 - z * z).sqrt()).collect();
        let phi: Vec<f64> = (0..n_lon).map(|k| 2.0 * PI * k as f64 / n_lon as f64).collect();
        let nt = tri(l_max, l_max) + 1;
        let mut p = vec![vec![0.0; nt]; n_lat];
        let mut dp = vec![vec![0.0; nt]; n_lat];
        for j in 0..n_lat {
            // one extra degree for the derivative recurrence
            let mut ext = vec![0.0; tri(l_max + 1, l_max + 1) + 1];
            legendre_table(l_max + 1, x[j], sin_t[j], &mut ext);
            for n in 0..=l_max {
                for m in 0..=n {
                    p[j][tri(n, m)] = ext[tri(n, m)];
                    // dP̄_n^m/dθ = [n z P̄_n^m − sqrt((2n+1)/(2n+3)·((n+1)²−m²))·P̄_{n+1}^m·... ] / s
                    let nf = n as f64;
                    let mf = m as f64;
                    let c = (((2.0 * nf + 1.0) / (2.0 * nf + 3.0)) * ((nf + 1.0) * (nf + 1.0) - mf * mf)).sqrt();
                    dp[j][tri(n, m)] = (c * ext[tri(n + 1, m)] - (nf + 1.0) * x[j] * ext[tri(n, m)]) / sin_t[j];
                }
            }
        }
        let cosm = (0..=l_max).map(|m| phi.iter().map(|f| (m as f64 * f).cos()).collect()).collect();
        let sinm = (0..=l_max).map(|m| phi.iter().map(|f| (m as f64 * f).sin()).collect()).collect();
        Ok(SphereGrid { l_max, n_lat, n_lon, theta, cos_t: x, sin_t, w_lat: w, phi, p, dp, cosm, sinm })
    }

    /// Grid padded against aliasing of quadratic products: `⌈3(L+1)/2⌉`
    /// colatitudes and twice as many longitudes.
    pub fn dealiased(l_max: usize) -> Result<Self> {
        let n_lat = (3 * (l_max + 1)).div_ceil(2);
        Self::new(l_max, n_lat, (2 * n_lat).max(2 * l_max + 1))
    }

    /// Same nodes with tables up to another degree.
    pub fn with_degree(&self, l_max: usize) -> Result<Self> {
        Self::new(l_max, self.n_lat, self.n_lon)
    }

    pub fn len(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_coeffs(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }

    /// Area weight of grid node `(j, k)`; weights sum to `4π`.
    pub fn area_weight(&self, j: usize) -> f64 {
        self.w_lat[j] * 2.0 * PI / self.n_lon as f64
    }

    /// Unit position vector of node `(j, k)`.
    pub fn xyz(&self, j: usize, k: usize) -> [f64; 3] {
        let (s, c) = (self.sin_t[j], self.cos_t[j]);
        [s * self.phi[k].cos(), s * self.phi[k].sin(), c]
    }

    /// Orthonormal frame `(r̂, ê_θ, ê_φ)` at node `(j, k)`.
    pub fn frame(&self, j: usize, k: usize) -> [[f64; 3]; 3] {
        let (s, c) = (self.sin_t[j], self.cos_t[j]);
        let (sf, cf) = self.phi[k].sin_cos();
        [[s * cf, s * sf, c], [c * cf, c * sf, -s], [-sf, cf, 0.0]]
    }

    /// Quadrature of grid values over the sphere.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n_lat {
            let row: f64 = f[j * self.n_lon..(j + 1) * self.n_lon].iter().sum();
            s += self.area_weight(j) * row;
        }
        s
    }

    fn fourier_rows(&self, f: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let dphi = 2.0 * PI / self.n_lon as f64;
        let mut a = vec![vec![0.0; self.l_max + 1]; self.n_lat];
        let mut b = vec![vec![0.0; self.l_max + 1]; self.n_lat];
        for j in 0..self.n_lat {
            let row = &f[j * self.n_lon..(j + 1) * self.n_lon];
            for m in 0..=self.l_max {
                let (mut sa, mut sb) = (0.0, 0.0);
                for k in 0..self.n_lon {
                    sa += row[k] * self.cosm[m][k];
                    sb += row[k] * self.sinm[m][k];
                }
                a[j][m] = sa * dphi;
                b[j][m] = sb * dphi;
            }
        }
        (a, b)
    }

    /// Quadrature projection onto the basis up to `l_max`.
    pub fn analyze(&self, f: &[f64]) -> Result<SphCoeffs> {
        if f.len() != self.len() {
            return Err(Error::Config(format!("expected {} grid values, got {}", self.len(), f.len())));
        }
        let (a, b) = self.fourier_rows(f);
        let mut c = SphCoeffs::zeros(self.l_max);
        let r2 = 2f64.sqrt();
        for j in 0..self.n_lat {
            let w = self.w_lat[j];
            for n in 0..=self.l_max {
                c.data[SphCoeffs::pos(n, 0)] += w * self.p[j][tri(n, 0)] * a[j][0];
                for m in 1..=n {
                    let pw = w * r2 * self.p[j][tri(n, m)];
                    c.data[SphCoeffs::pos(n, m as i64)] += pw * a[j][m];
                    c.data[SphCoeffs::pos(n, -(m as i64))] += pw * b[j][m];
                }
            }
        }
        Ok(c)
    }

    fn synth_rows(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for j in 0..self.n_lat {
            for k in 0..self.n_lon {
                let mut v = a[j][0];
                for m in 1..=self.l_max {
                    v += a[j][m] * self.cosm[m][k] + b[j][m] * self.sinm[m][k];
                }
                out[j * self.n_lon + k] = v;
            }
        }
        out
    }

    /// Per-latitude Fourier amplitudes of `Σ c_{n,m} T(n,m,j)` where `T` is the
    /// latitude table selected by `which` (0: P̄, 1: dP̄/dθ, 2: P̄/sinθ·m).
    fn latitude_modes(&self, c: &SphCoeffs, which: u8) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let r2 = 2f64.sqrt();
        let l = self.l_max.min(c.l_max);
        let mut a = vec![vec![0.0; self.l_max + 1]; self.n_lat];
        let mut b = vec![vec![0.0; self.l_max + 1]; self.n_lat];
        for j in 0..self.n_lat {
            for n in 0..=l {
                let t = |m: usize| match which {
                    0 => self.p[j][tri(n, m)],
                    1 => self.dp[j][tri(n, m)],
                    _ => m as f64 * self.p[j][tri(n, m)] / self.sin_t[j],
                };
                a[j][0] += c.get(n, 0) * t(0);
                for m in 1..=n {
                    a[j][m] += r2 * c.get(n, m as i64) * t(m);
                    b[j][m] += r2 * c.get(n, -(m as i64)) * t(m);
                }
            }
        }
        (a, b)
    }

    /// Grid values of the expansion.
    pub fn synthesize(&self, c: &SphCoeffs) -> Vec<f64> {
        let (a, b) = self.latitude_modes(c, 0);
        self.synth_rows(&a, &b)
    }

    /// Surface gradient `(∂_θ f, (1/sin θ) ∂_φ f)` on the grid.
    pub fn gradient(&self, c: &SphCoeffs) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.latitude_modes(c, 1);
        let gt = self.synth_rows(&a, &b);
        let (a, b) = self.latitude_modes(c, 2);
        // ∂_φ of cos mφ is −m sin mφ, of sin mφ is m cos mφ
        let nb: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let gp = self.synth_rows(&b, &nb);
        (gt, gp)
    }

    /// Spectral projection of a tangent field given by orthonormal components
    /// onto gradient and co-gradient potentials, `v = ∇α + *∇β`.
    pub fn analyze_tangent(&self, vt: &[f64], vp: &[f64]) -> Result<(SphCoeffs, SphCoeffs)> {
        if vt.len() != self.len() || vp.len() != self.len() {
            return Err(Error::Config("tangent component length mismatch".into()));
        }
        let (at, bt) = self.fourier_rows(vt);
        let (ap, bp) = self.fourier_rows(vp);
        let mut alpha = SphCoeffs::zeros(self.l_max);
        let mut beta = SphCoeffs::zeros(self.l_max);
        let r2 = 2f64.sqrt();
        for j in 0..self.n_lat {
            let w = self.w_lat[j];
            let s = self.sin_t[j];
            for n in 1..=self.l_max {
                let lam = (n * (n + 1)) as f64;
                let d0 = self.dp[j][tri(n, 0)];
                // m = 0: ∇Y = (dP, 0), *∇Y = (0, dP)
                alpha.data[SphCoeffs::pos(n, 0)] += w * d0 * at[j][0] / lam;
                beta.data[SphCoeffs::pos(n, 0)] += w * d0 * ap[j][0] / lam;
                for m in 1..=n {
                    let d = r2 * self.dp[j][tri(n, m)];
                    let q = r2 * m as f64 * self.p[j][tri(n, m)] / s;
                    // cosine type: ∇Y = (d cos, −q sin); *∇Y = (q sin, d cos)
                    alpha.data[SphCoeffs::pos(n, m as i64)] += w * (d * at[j][m] - q * bp[j][m]) / lam;
                    beta.data[SphCoeffs::pos(n, m as i64)] += w * (q * bt[j][m] + d * ap[j][m]) / lam;
                    // sine type: ∇Y = (d sin, q cos); *∇Y = (−q cos, d sin)
                    alpha.data[SphCoeffs::pos(n, -(m as i64))] += w * (d * bt[j][m] + q * ap[j][m]) / lam;
                    beta.data[SphCoeffs::pos(n, -(m as i64))] += w * (-q * at[j][m] + d * bp[j][m]) / lam;
                }
            }
        }
        Ok((alpha, beta))
    }

    /// Orthonormal components of `∇α + *∇β`, where `*` rotates `(a, b) ↦ (−b, a)`.
    pub fn synthesize_tangent(&self, alpha: &SphCoeffs, beta: &SphCoeffs) -> (Vec<f64>, Vec<f64>) {
        let (at, ap) = self.gradient(alpha);
        let (bt, bp) = self.gradient(beta);
        let vt = at.iter().zip(&bp).map(|(a, b)| a - b).collect();
        let vp = ap.iter().zip(&bt).map(|(a, b)| a + b).collect();
        (vt, vp)
    }

    /// Values of every basis function at a unit vector (pole safe).
    pub fn basis_at(&self, x: [f64; 3], out: &mut Vec<f64>) {
        let l = self.l_max;
        out.clear();
        out.resize((l + 1) * (l + 1), 0.0);
        let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let z = x[2] / norm;
        let s = (x[0] * x[0] + x[1] * x[1]).sqrt() / norm;
        let (cf, sf) = if s > 0.0 { (x[0] / (s * norm), x[1] / (s * norm)) } else { (1.0, 0.0) };
        let mut p = vec![0.0; tri(l, l) + 1];
        legendre_table(l, z, s, &mut p);
        let r2 = 2f64.sqrt();
        let (mut cm, mut sm) = (1.0, 0.0);
        for m in 0..=l {
            if m > 0 {
                let c2 = cm * cf - sm * sf;
                sm = sm * cf + cm * sf;
                cm = c2;
            }
            for n in m..=l {
                if m == 0 {
                    out[SphCoeffs::pos(n, 0)] = p[tri(n, 0)];
                } else {
                    out[SphCoeffs::pos(n, m as i64)] = r2 * p[tri(n, m)] * cm;
                    out[SphCoeffs::pos(n, -(m as i64))] = r2 * p[tri(n, m)] * sm;
                }
            }
        }
    }

    /// Evaluate an expansion at a unit vector.
    pub fn eval_at(&self, c: &SphCoeffs, x: [f64; 3]) -> f64 {
        let mut b = Vec::new();
        self.basis_at(x, &mut b);
        b.iter().zip(&c.data).map(|(a, b)| a * b).sum()
    }
}

/// Laplace–Beltrami operator on coefficients: `c_{n,m} ↦ −n(n+1) c_{n,m}`.
pub fn laplace_beltrami(c: &SphCoeffs) -> SphCoeffs {
    c.map_degree(|n| -((n * (n + 1)) as f64))
}

/// Inverse of `−Δ'` on mean-zero coefficients (the `n = 0` entry is dropped).
pub fn inverse_neg_laplacian(c: &SphCoeffs) -> SphCoeffs {
    c.map_degree(|n| if n == 0 { 0.0 } else { 1.0 / (n * (n + 1)) as f64 })
}

/// Tangent 1-form on the unit sphere: orthonormal components on the grid and
/// its Hodge potentials `ω = dα + *dβ` (both mean-zero).
#[derive(Debug, Clone)]
pub struct TangentForm {
    pub w_theta: Vec<f64>,
    pub w_phi: Vec<f64>,
    pub alpha: SphCoeffs,
    pub beta: SphCoeffs,
}

impl TangentForm {
    pub fn from_potentials(grid: &SphereGrid, alpha: SphCoeffs, beta: SphCoeffs) -> Self {
        let (w_theta, w_phi) = grid.synthesize_tangent(&alpha, &beta);
        TangentForm { w_theta, w_phi, alpha, beta }
    }

    pub fn from_components(grid: &SphereGrid, w_theta: Vec<f64>, w_phi: Vec<f64>) -> Result<Self> {
        let (alpha, beta) = grid.analyze_tangent(&w_theta, &w_phi)?;
        Ok(TangentForm { w_theta, w_phi, alpha, beta })
    }

    /// `d*ω = −div ω`, as coefficients.
    pub fn codifferential(&self) -> SphCoeffs {
        laplace_beltrami(&self.alpha).scale(-1.0)
    }

    /// Density of `dω` with respect to the area form, as coefficients.
    pub fn exterior_derivative(&self) -> SphCoeffs {
        laplace_beltrami(&self.beta)
    }

    /// Coordinate components `(ω_θ, ω_φ)` of the form (`ω = ω_θ dθ + ω_φ dφ`).
    pub fn coordinate_components(&self, grid: &SphereGrid) -> (Vec<f64>, Vec<f64>) {
        form_vector_convert(grid, &self.w_theta, &self.w_phi, 1.0, Conversion::VectorToForm)
    }
}

/// Direction of index conversion in [`form_vector_convert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conversion {
    /// Lower the index: vector components `(v^θ, v^φ)` to form components.
    VectorToForm,
    /// Raise the index: form components `(ω_θ, ω_φ)` to vector components.
    FormToVector,
}

/// Index raising/lowering with the metric `r² g`, `g = dθ² + sin²θ dφ²`,
/// in coordinate components on the grid (`r = 1` gives `g` itself).
pub fn form_vector_convert(grid: &SphereGrid, a: &[f64], b: &[f64], r: f64, dir: Conversion) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; a.len()];
    let mut y = vec![0.0; b.len()];
    for j in 0..grid.n_lat {
        let g11 = r * r;
        let g22 = r * r * grid.sin_t[j] * grid.sin_t[j];
        for k in 0..grid.n_lon {
            let i = j * grid.n_lon + k;
            match dir {
                Conversion::VectorToForm => {
                    x[i] = g11 * a[i];
                    y[i] = g22 * b[i];
                }
                Conversion::FormToVector => {
                    x[i] = a[i] / g11;
                    y[i] = b[i] / g22;
                }
            }
        }
    }
    (x, y)
}

/// Solve `dω = chi·vol`, `d*ω = psi` on the unit sphere. Both data must have
/// zero mean to `1e-10` (relative to their size).
pub fn div_curl_solve(grid: &SphereGrid, chi: &SphCoeffs, psi: &SphCoeffs) -> Result<TangentForm> {
    for (name, c) in [("chi", chi), ("psi", psi)] {
        let scale = c.data.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        if c.data[0].abs() > 1e-10 * scale {
            return Err(Error::Solvability(format!("{name} has nonzero mean {:e}", c.mean())));
        }
    }
    let alpha = inverse_neg_laplacian(&psi.resized(grid.l_max));
    let beta = inverse_neg_laplacian(&chi.resized(grid.l_max)).scale(-1.0);
    Ok(TangentForm::from_potentials(grid, alpha, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coeffs(l: usize, seed: u64) -> SphCoeffs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = SphCoeffs::zeros(l);
        for v in &mut c.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        c
    }

    /// Associated Legendre function by the explicit derivative formula
    /// (unnormalized, no Condon–Shortley phase).
    fn assoc_legendre_explicit(n: usize, m: usize, x: f64) -> f64 {
        // P_n(x) = 2^{-n} Σ_k (-1)^k C(n,k) C(2n-2k, n) x^{n-2k}; differentiate m times
        let mut s = 0.0;
        let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
        for k in 0..=n / 2 {
            let pw = n as i64 - 2 * k as i64 - m as i64;
            if pw < 0 {
                continue;
            }
            let coeff = (-1f64).powi(k as i32) * fact(2 * n - 2 * k) / (fact(k) * fact(n - k) * fact(n - 2 * k));
            let dcoef = fact(n - 2 * k) / fact(pw as usize);
            s += coeff * dcoef * x.powi(pw as i32);
        }
        s / 2f64.powi(n as i32) * (1.0 - x * x).powf(m as f64 / 2.0)
    }

    #[test]
    fn constant_function_coefficient() {
        let g = SphereGrid::new(6, 7, 13).unwrap();
        let c = g.analyze(&vec![1.0; g.len()]).unwrap();
        assert!((c.get(0, 0) - (4.0 * PI).sqrt()).abs() < 1e-13);
        assert!(c.data[1..].iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn analysis_of_explicit_harmonic() {
        let g = SphereGrid::new(5, 6, 11).unwrap();
        let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
        let norm = (2.0 * 7.0 / (4.0 * PI) * fact(1) / fact(5)).sqrt();
        let mut f = vec![0.0; g.len()];
        for j in 0..g.n_lat {
            for k in 0..g.n_lon {
                f[j * g.n_lon + k] = norm * assoc_legendre_explicit(3, 2, g.cos_t[j]) * (2.0 * g.phi[k]).cos();
            }
        }
        let c = g.analyze(&f).unwrap();
        for (n, m, v) in c.iter() {
            let expect = if (n, m) == (3, 2) { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-13, "({n},{m}) = {v}");
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = SphereGrid::new(10, 11, 21).unwrap();
        let c = random_coeffs(10, 3);
        let f = g.synthesize(&c);
        let c2 = g.analyze(&f).unwrap();
        let f2 = g.synthesize(&c2);
        for (a, b) in f.iter().zip(&f2) {
            assert!((a - b).abs() < 1e-12);
        }
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        let parseval: f64 = c.data.iter().map(|v| v * v).sum();
        assert!((g.integrate(&sq) - parseval).abs() < 1e-12 * parseval);
    }

    #[test]
    fn point_evaluation_matches_grid() {
        let g = SphereGrid::new(7, 8, 15).unwrap();
        let c = random_coeffs(7, 5);
        let f = g.synthesize(&c);
        for (j, k) in [(0, 0), (3, 7), (7, 14)] {
            assert!((g.eval_at(&c, g.xyz(j, k)) - f[j * g.n_lon + k]).abs() < 1e-12);
        }
        // pole value only has zonal contributions
        let pole: f64 = (0..=7).map(|n| c.get(n, 0) * ((2 * n + 1) as f64 / (4.0 * PI)).sqrt()).sum();
        assert!((g.eval_at(&c, [0.0, 0.0, 1.0]) - pole).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_harmonics() {
        let g = SphereGrid::new(6, 7, 13).unwrap();
        let c = random_coeffs(6, 9);
        let (gt, gp) = g.gradient(&c);
        let h = 1e-6;
        for (j, k) in [(1, 2), (4, 9)] {
            let th = g.theta[j];
            let ph = g.phi[k];
            let at = |t: f64, p: f64| g.eval_at(&c, [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]);
            let dt = (at(th + h, ph) - at(th - h, ph)) / (2.0 * h);
            let dp = (at(th, ph + h) - at(th, ph - h)) / (2.0 * h) / th.sin();
            assert!((gt[j * g.n_lon + k] - dt).abs() < 1e-7);
            assert!((gp[j * g.n_lon + k] - dp).abs() < 1e-7);
        }
    }

    #[test]
    fn laplacian_eigenvalues() {
        let c = SphCoeffs::single(4, 1, 0, 1.0);
        let l = laplace_beltrami(&c);
        assert_eq!(l.get(1, 0), -2.0);
        let k = SphCoeffs::single(4, 0, 0, 3.0);
        assert_eq!(laplace_beltrami(&k).get(0, 0), 0.0);
    }

    #[test]
    fn laplacian_matches_finite_differences_at_order_two() {
        let g = SphereGrid::new(5, 6, 11).unwrap();
        let c = random_coeffs(5, 21);
        let lc = laplace_beltrami(&c);
        let (th, ph) = (1.1f64, 0.4f64);
        let f = |t: f64, p: f64| g.eval_at(&c, [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]);
        let exact = g.eval_at(&lc, [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
        let fd = |h: f64| {
            let s = th.sin();
            let ft = ((th + 0.5 * h).sin() * (f(th + h, ph) - f(th, ph)) - (th - 0.5 * h).sin() * (f(th, ph) - f(th - h, ph)))
                / (h * h * s);
            let fp = (f(th, ph + h) - 2.0 * f(th, ph) + f(th, ph - h)) / (h * h * s * s);
            ft + fp
        };
        let e1 = (fd(0.02) - exact).abs();
        let e2 = (fd(0.01) - exact).abs();
        assert!((e1 / e2).log2() > 1.8 && (e1 / e2).log2() < 2.2);
    }

    #[test]
    fn tangent_round_trip() {
        let g = SphereGrid::new(8, 9, 17).unwrap();
        let a = random_coeffs(8, 1).mean_zero();
        let b = random_coeffs(8, 2).mean_zero();
        let (vt, vp) = g.synthesize_tangent(&a, &b);
        let (a2, b2) = g.analyze_tangent(&vt, &vp).unwrap();
        for i in 0..a.data.len() {
            assert!((a.data[i] - a2.data[i]).abs() < 1e-12);
            assert!((b.data[i] - b2.data[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn div_curl_examples() {
        let g = SphereGrid::new(6, 7, 13).unwrap();
        let zero = SphCoeffs::zeros(6);
        let w = div_curl_solve(&g, &zero, &zero).unwrap();
        assert!(w.w_theta.iter().chain(&w.w_phi).all(|v| v.abs() < 1e-15));
        let psi = SphCoeffs::single(6, 1, 0, 2.0);
        let w = div_curl_solve(&g, &zero, &psi).unwrap();
        let k = (3.0 / (4.0 * PI)).sqrt();
        for j in 0..g.n_lat {
            for kk in 0..g.n_lon {
                let i = j * g.n_lon + kk;
                assert!((w.w_theta[i] + k * g.sin_t[j]).abs() < 1e-13);
                assert!(w.w_phi[i].abs() < 1e-13);
            }
        }
        let bad = SphCoeffs::single(6, 0, 0, 1.0);
        assert!(matches!(div_curl_solve(&g, &bad, &zero), Err(Error::Solvability(_))));
    }

    #[test]
    fn div_curl_reconstruction() {
        let g = SphereGrid::new(8, 9, 17).unwrap();
        let chi = random_coeffs(8, 11).mean_zero();
        let psi = random_coeffs(8, 12).mean_zero();
        let w = div_curl_solve(&g, &chi, &psi).unwrap();
        let w2 = TangentForm::from_components(&g, w.w_theta.clone(), w.w_phi.clone()).unwrap();
        let (dchi, dpsi) = (w2.exterior_derivative(), w2.codifferential());
        for i in 0..chi.data.len() {
            assert!((dchi.data[i] - chi.data[i]).abs() < 1e-10);
            assert!((dpsi.data[i] - psi.data[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn form_vector_conversion() {
        let g = SphereGrid::new(4, 5, 9).unwrap();
        let a: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.11).cos()).collect();
        let (fa, fb) = form_vector_convert(&g, &a, &b, 1.7, Conversion::VectorToForm);
        let (va, vb) = form_vector_convert(&g, &fa, &fb, 1.7, Conversion::FormToVector);
        for i in 0..g.len() {
            assert!((va[i] - a[i]).abs() < 1e-14 && (vb[i] - b[i]).abs() < 1e-14);
            let j = i / g.n_lon;
            let s2 = g.sin_t[j] * g.sin_t[j];
            let norm_g = a[i] * a[i] + s2 * b[i] * b[i];
            let norm_big = fa[i] * a[i] + fb[i] * b[i];
            assert!((norm_big - 1.7 * 1.7 * norm_g).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_by_longitude_permutation_commutes() {
        let g = SphereGrid::new(4, 5, 10).unwrap();
        let c = random_coeffs(4, 7);
        let f = g.synthesize(&c);
        let shift = 3;
        let rot: Vec<f64> = (0..g.len())
            .map(|i| {
                let (j, k) = (i / g.n_lon, i % g.n_lon);
                f[j * g.n_lon + (k + g.n_lon - shift) % g.n_lon]
            })
            .collect();
        // rotate coefficients analytically by angle 2π·shift/n_lon
        let ang = 2.0 * PI * shift as f64 / g.n_lon as f64;
        let mut cr = c.clone();
        for n in 0..=4usize {
            for m in 1..=n as i64 {
                let (a, b) = (c.get(n, m), c.get(n, -m));
                let (s, co) = (m as f64 * ang).sin_cos();
                cr.set(n, m, a * co - b * s);
                cr.set(n, -m, a * s + b * co);
            }
        }
        let fr = g.synthesize(&cr);
        for (a, b) in rot.iter().zip(&fr) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let c = random_coeffs(3, 4);
        let back = SphCoeffs::from_csv(&c.to_csv()).unwrap();
        assert_eq!(c, back);
    }
}
