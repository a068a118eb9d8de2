//! Chebyshev–Lobatto collocation on an interval: nodes, barycentric
//! interpolation, differentiation and integration matrices, quadrature weights.

use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Chebyshev–Lobatto grid on `[a, b]` with nodes in increasing order.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebGrid {
    /// `n` nodes (`n ≥ 2`) including both endpoints.
    pub fn new(a: f64, b: f64, n: usize) -> Self {
        assert!(n >= 2 && b > a, "need at least two nodes on a non-empty interval");
        let m = n - 1;
        let nodes: Vec<f64> = (0..n)
            .map(|j| {
                if j == 0 {
                    a
                } else if j == m {
                    b
                } else {
                    0.5 * (a + b) - 0.5 * (b - a) * (PI * j as f64 / m as f64).cos()
                }
            })
            .collect();
        let weights = (0..n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == m {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        ChebGrid { a, b, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Barycentric interpolation weights of the grid interpolant at `x`.
    pub fn interp_weights(&self, x: f64) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for j in 0..n {
            if x == self.nodes[j] {
                out[j] = 1.0;
                return out;
            }
        }
        let mut s = 0.0;
        for j in 0..n {
            let c = self.weights[j] / (x - self.nodes[j]);
            out[j] = c;
            s += c;
        }
        for v in &mut out {
            *v /= s;
        }
        out
    }

    /// Evaluate the interpolant of `values` at `x`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let w = self.interp_weights(x);
        w.iter().zip(values).map(|(a, b)| a * b).sum()
    }

    /// First-derivative collocation matrix.
    pub fn diff_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (self.weights[j] / self.weights[i]) / (self.nodes[i] - self.nodes[j]);
                    d[(i, j)] = v;
                    s += v;
                }
            }
            d[(i, i)] = -s;
        }
        d
    }

    /// Map node values to Chebyshev coefficients of the interpolant.
    pub fn to_coeffs(&self, values: &[f64]) -> Vec<f64> {
        let n = self.len();
        let m = n - 1;
        let mut c = vec![0.0; n];
        // node j corresponds to x = -cos(pi j / m); T_k(-x) = (-1)^k T_k(x)
        for (k, ck) in c.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, v) in values.iter().enumerate() {
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                s += w * v * (PI * (k * j) as f64 / m as f64).cos();
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let scale = if k == 0 || k == m { 1.0 } else { 2.0 };
            *ck = sign * scale * s / m as f64;
        }
        c
    }

    /// Evaluate a Chebyshev series (in the mapped variable) at `x`.
    pub fn eval_coeffs(&self, c: &[f64], x: f64) -> f64 {
        let s = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c.iter().skip(1).rev() {
            let b0 = 2.0 * s * b1 - b2 + ck;
            b2 = b1;
            b1 = b0;
        }
        s * b1 - b2 + c[0]
    }

    /// Matrix `Q` with `(Q v)_i = ∫_a^{x_i} p(s) ds`, `p` the interpolant of `v`.
    pub fn cumulative_integration_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let half = 0.5 * (self.b - self.a);
        let mut q = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let c = self.to_coeffs(&e);
            // antiderivative coefficients in s ∈ [-1, 1]
            let mut ci = vec![0.0; n + 1];
            for k in 1..=n {
                let ckm1 = if k == 1 { 2.0 * c[0] } else { c[k - 1] };
                let ckp1 = if k + 1 < n { c[k + 1] } else { 0.0 };
                ci[k] = (ckm1 - ckp1) / (2.0 * k as f64);
            }
            // fix constant so antiderivative vanishes at s = -1
            let mut at_minus = 0.0;
            for (k, v) in ci.iter().enumerate().skip(1) {
                at_minus += if k % 2 == 0 { *v } else { -*v };
            }
            ci[0] = -at_minus;
            for i in 0..n {
                let s = (2.0 * self.nodes[i] - self.a - self.b) / (self.b - self.a);
                let (mut b1, mut b2) = (0.0, 0.0);
                for &ck in ci.iter().skip(1).rev() {
                    let b0 = 2.0 * s * b1 - b2 + ck;
                    b2 = b1;
                    b1 = b0;
                }
                q[(i, j)] = half * (s * b1 - b2 + ci[0]);
            }
        }
        q
    }

    /// Clenshaw–Curtis quadrature weights for `∫_a^b`.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let q = self.cumulative_integration_matrix();
        let n = self.len();
        (0..n).map(|j| q[(n - 1, j)]).collect()
    }
}

/// Apply a dense matrix to a vector.
pub fn matvec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let (r, c) = m.shape();
    assert_eq!(c, v.len());
    (0..r).map(|i| (0..c).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differentiates_polynomials_exactly() {
        let g = ChebGrid::new(1.0, 2.5, 12);
        let v: Vec<f64> = g.nodes.iter().map(|x| x.powi(5) - 3.0 * x).collect();
        let dv = matvec(&g.diff_matrix(), &v);
        for (x, d) in g.nodes.iter().zip(&dv) {
            assert!((d - (5.0 * x.powi(4) - 3.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_and_coefficients() {
        let g = ChebGrid::new(-0.5, 3.0, 20);
        let v: Vec<f64> = g.nodes.iter().map(|x| x.sin()).collect();
        let c = g.to_coeffs(&v);
        for &x in &[-0.4, 0.3, 1.7, 2.99] {
            assert!((g.interpolate(&v, x) - x.sin()).abs() < 1e-13);
            assert!((g.eval_coeffs(&c, x) - x.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn integration_matrix() {
        let g = ChebGrid::new(1.0, 2.0, 16);
        let v: Vec<f64> = g.nodes.iter().map(|x| x.exp()).collect();
        let iv = matvec(&g.cumulative_integration_matrix(), &v);
        for (x, i) in g.nodes.iter().zip(&iv) {
            assert!((i - (x.exp() - 1f64.exp())).abs() < 1e-13);
        }
        let w = g.quadrature_weights();
        let s: f64 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }
}
