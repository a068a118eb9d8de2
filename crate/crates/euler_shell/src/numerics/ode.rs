//! Explicit Runge–Kutta integrators: Dormand–Prince 5(4) with dense output and
//! classical fixed-step RK4.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Tolerances and limits for [`Dopri5`].
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step as a fraction of the interval length.
    pub initial_fraction: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 { rtol: 1e-10, atol: 1e-12, max_steps: 200_000, initial_fraction: 1e-3 }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
struct DenseStep {
    t0: f64,
    h: f64,
    rc: [Vec<f64>; 5],
}

impl DenseStep {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        for i in 0..out.len() {
            out[i] = self.rc[0][i]
                + th * (self.rc[1][i] + th1 * (self.rc[2][i] + th * (self.rc[3][i] + th1 * self.rc[4][i])));
        }
    }
}

/// Result of an adaptive integration with dense output over `[t_start, t_end]`
/// (either direction).
#[derive(Debug, Clone)]
pub struct DenseSolution {
    steps: Vec<DenseStep>,
    pub t_start: f64,
    pub t_end: f64,
    pub y_end: Vec<f64>,
    /// True when the stop predicate interrupted the integration before `t_end`.
    pub stopped: bool,
}

impl DenseSolution {
    /// Number of accepted steps.
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// Evaluate the continuous extension at `t` (clamped to the covered range).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.y_end.len()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let forward = self.t_end >= self.t_start;
        let key = |s: &DenseStep| if forward { s.t0 } else { -s.t0 };
        let tk = if forward { t } else { -t };
        let idx = match self.steps.binary_search_by(|s| key(s).partial_cmp(&tk).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        self.steps[idx.min(self.steps.len() - 1)].eval(t, out);
    }
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Dopri5 { rtol, atol, ..Default::default() }
    }

    /// Integrate `y' = f(t, y)` from `t0` to `t1`, recording dense output.
    /// `stop(t, y)` is checked after every accepted step; returning true ends
    /// the integration early with `stopped = true`.
    pub fn solve<F, S>(&self, mut f: F, t0: f64, y0: &[f64], t1: f64, mut stop: S) -> Result<DenseSolution>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        S: FnMut(f64, &[f64]) -> bool,
    {
        let mut steps = Vec::new();
        let (t, y, stopped) = self.march(&mut f, t0, y0, &[t1], &mut |_, _, _| {}, Some(&mut steps), &mut stop)?;
        debug_assert!(stopped || (t - t1).abs() <= 1e-14 * t1.abs().max(1.0));
        Ok(DenseSolution { steps, t_start: t0, t_end: t, y_end: y, stopped })
    }

    /// Integrate through the monotone sequence `points` (first entry may equal
    /// `t0`), landing exactly on each point, and return the state there.
    pub fn solve_at<F>(&self, mut f: F, t0: f64, y0: &[f64], points: &[f64]) -> Result<Vec<Vec<f64>>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        let mut rest = points;
        while let Some(&p) = rest.first() {
            if p == t0 {
                out.push(y0.to_vec());
                rest = &rest[1..];
            } else {
                break;
            }
        }
        if rest.is_empty() {
            return Ok(out);
        }
        let (_, _, stopped) = self.march(
            &mut f,
            t0,
            y0,
            rest,
            &mut |_, _, y| out.push(y.to_vec()),
            None,
            &mut |_, _| false,
        )?;
        debug_assert!(!stopped);
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn march<F, S>(
        &self,
        f: &mut F,
        t0: f64,
        y0: &[f64],
        targets: &[f64],
        on_target: &mut dyn FnMut(usize, f64, &[f64]),
        mut dense: Option<&mut Vec<DenseStep>>,
        stop: &mut S,
    ) -> Result<(f64, Vec<f64>, bool)>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        S: FnMut(f64, &[f64]) -> bool,
    {
        let n = y0.len();
        let t_final = *targets.last().expect("at least one target");
        let dir = if t_final >= t0 { 1.0 } else { -1.0 };
        let span = (t_final - t0).abs();
        if span == 0.0 {
            for (i, &tt) in targets.iter().enumerate() {
                on_target(i, tt, y0);
            }
            return Ok((t0, y0.to_vec(), false));
        }
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        f(t, &y, &mut k[0]);
        let mut h = dir * span * self.initial_fraction;
        let mut next_target = 0usize;
        let mut steps = 0usize;
        let mut rejected_last = false;
        while next_target < targets.len() {
            if steps >= self.max_steps {
                return Err(Error::Numeric(format!("step limit reached at t = {t}")));
            }
            steps += 1;
            let target = targets[next_target];
            let mut hit = false;
            if (t + h - target) * dir >= 0.0 {
                h = target - t;
                hit = true;
            }
            if h.abs() < 1e-15 * t.abs().max(1.0) {
                if hit {
                    on_target(next_target, target, &y);
                    next_target += 1;
                    h = dir * span * self.initial_fraction;
                    continue;
                }
                return Err(Error::Numeric(format!("step size underflow at t = {t}")));
            }
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k[0][i];
            }
            let (a, b) = k.split_at_mut(1);
            f(t + C2 * h, &ytmp, &mut b[0]);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * a[0][i] + A32 * b[0][i]);
            }
            f(t + C3 * h, &ytmp, &mut b[1]);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * a[0][i] + A42 * b[0][i] + A43 * b[1][i]);
            }
            f(t + C4 * h, &ytmp, &mut b[2]);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * a[0][i] + A52 * b[0][i] + A53 * b[1][i] + A54 * b[2][i]);
            }
            f(t + C5 * h, &ytmp, &mut b[3]);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A61 * a[0][i] + A62 * b[0][i] + A63 * b[1][i] + A64 * b[2][i] + A65 * b[3][i]);
            }
            f(t + h, &ytmp, &mut b[4]);
            for i in 0..n {
                ynew[i] = y[i]
                    + h * (A71 * a[0][i] + A73 * b[1][i] + A74 * b[2][i] + A75 * b[3][i] + A76 * b[4][i]);
            }
            f(t + h, &ynew, &mut b[5]);
            let mut err = 0.0;
            let mut finite = true;
            for i in 0..n {
                let e = h
                    * (E1 * a[0][i] + E3 * b[1][i] + E4 * b[2][i] + E5 * b[3][i] + E6 * b[4][i] + E7 * b[5][i]);
                let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sc) * (e / sc);
                finite &= ynew[i].is_finite() && e.is_finite();
            }
            err = (err / n as f64).sqrt();
            if !finite {
                h *= 0.25;
                rejected_last = true;
                continue;
            }
            if err <= 1.0 {
                if let Some(d) = dense.as_deref_mut() {
                    let mut rc: [Vec<f64>; 5] = Default::default();
                    rc[0] = y.clone();
                    rc[1] = (0..n).map(|i| ynew[i] - y[i]).collect();
                    rc[2] = (0..n).map(|i| h * a[0][i] - rc[1][i]).collect();
                    rc[3] = (0..n).map(|i| rc[1][i] - h * b[5][i] - rc[2][i]).collect();
                    rc[4] = (0..n)
                        .map(|i| {
                            h * (D1 * a[0][i] + D3 * b[1][i] + D4 * b[2][i] + D5 * b[3][i] + D6 * b[4][i]
                                + D7 * b[5][i])
                        })
                        .collect();
                    d.push(DenseStep { t0: t, h, rc });
                }
                t = if hit { target } else { t + h };
                y.copy_from_slice(&ynew);
                let k7 = b[5].clone();
                a[0].copy_from_slice(&k7);
                if hit {
                    on_target(next_target, target, &y);
                    next_target += 1;
                }
                if stop(t, &y) {
                    return Ok((t, y, true));
                }
                let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                if rejected_last {
                    fac = fac.min(1.0);
                }
                fac = fac.clamp(0.2, 5.0);
                h *= fac;
                rejected_last = false;
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                h *= fac;
                rejected_last = true;
            }
        }
        Ok((t, y, false))
    }
}

/// One classical RK4 step.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &[f64], h: f64, out: &mut [f64])
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}
