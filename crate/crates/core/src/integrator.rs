//! Dormand–Prince 5(4) explicit Runge–Kutta with adaptive step size and
//! continuous (dense) output of order 4.

use serde::{Deserialize, Serialize};

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

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step; `None` for unbounded.
    pub h_max: Option<f64>,
    /// Steps shorter than this abort the integration.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-9,
            atol: 1e-12,
            h_max: None,
            h_min: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol >= 0.0 && self.rtol.is_finite() && self.atol.is_finite()) {
            return Err(Error::config(format!("invalid tolerances rtol={}, atol={}", self.rtol, self.atol)));
        }
        if self.atol == 0.0 && self.rtol == 0.0 {
            return Err(Error::config("tolerances cannot both vanish"));
        }
        Ok(())
    }
}

/// Interpolant of one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    coeffs: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r0, r1, r2, r3, r4] = &self.coeffs;
        for i in 0..out.len() {
            out[i] = r0[i] + theta * (r1[i] + theta1 * (r2[i] + theta * (r3[i] + theta1 * r4[i])));
        }
    }
}

/// Statistics of a finished integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `dy/dt = f(t, y)` from `t0` through every time in `t_out`
/// (non-decreasing, `>= t0`).
///
/// `on_output(t, y)` receives the dense-output state at each requested time;
/// `on_step(step)` sees every accepted step and may abort with an error.
pub fn integrate<F, S, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    opts: &IntegratorOptions,
    mut on_step: S,
    mut on_output: O,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    S: FnMut(f64, &[f64]) -> Result<()>,
    O: FnMut(f64, &[f64]) -> Result<()>,
{
    opts.validate()?;
    if t_out.windows(2).any(|w| w[1] < w[0]) || t_out.first().is_some_and(|&t| t < t0) {
        return Err(Error::config("output times must be non-decreasing and not before t0"));
    }
    let n = y0.len();
    let mut stats = IntegrationStats::default();
    let mut out_idx = 0;
    let mut buf = vec![0.0; n];
    while out_idx < t_out.len() && t_out[out_idx] == t0 {
        on_output(t0, y0)?;
        out_idx += 1;
    }
    let Some(&t_end) = t_out.last() else {
        return Ok(stats);
    };
    if t_end == t0 {
        return Ok(stats);
    }

    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    f(t, &y, &mut k1)?;
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t, &y, &k1, opts, &mut stats)?;
    if let Some(hmax) = opts.h_max {
        h = h.min(hmax);
    }
    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration {
                t,
                message: format!("exceeded {} steps", opts.max_steps),
                state: y,
            });
        }
        if h < opts.h_min.max(16.0 * f64::EPSILON * t.abs()) {
            return Err(Error::Integration {
                t,
                message: format!("step size underflow (h = {h:e})"),
                state: y,
            });
        }
        if t + 1.01 * h >= t_end {
            h = t_end - t;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &ytmp, &mut k2)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &ytmp, &mut k3)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &ytmp, &mut k4)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &ytmp, &mut k5)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &ytmp, &mut k6)?;
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, &ynew, &mut k7)?;
        stats.evaluations += 6;

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err_sq += (e / sc).powi(2);
        }
        let err = (err_sq / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            let mut dense = DenseStep {
                t0: t,
                h,
                coeffs: [y.clone(), vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            };
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                dense.coeffs[1][i] = ydiff;
                dense.coeffs[2][i] = bspl;
                dense.coeffs[3][i] = ydiff - h * k7[i] - bspl;
                dense.coeffs[4][i] =
                    h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let t_new = if h == t_end - t { t_end } else { t + h };
            while out_idx < t_out.len() && t_out[out_idx] <= t_new {
                let tq = t_out[out_idx];
                if tq == t_new {
                    on_output(tq, &ynew)?;
                } else {
                    dense.eval(tq, &mut buf);
                    on_output(tq, &buf)?;
                }
                out_idx += 1;
            }
            on_step(t_new, &ynew)?;
            stats.accepted += 1;

            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;

            let mut fac = err.max(1e-10).powf(-0.2 + 0.75 * PI_BETA) * err_old.powf(PI_BETA) * SAFETY;
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_old = err.max(1e-4);
            h *= fac;
            if let Some(hmax) = opts.h_max {
                h = h.min(hmax);
            }
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(stats)
}

fn initial_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    f0: &[f64],
    opts: &IntegratorOptions,
    stats: &mut IntegrationStats,
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    f(t + h0, &y1, &mut f1)?;
    stats.evaluations += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).max(opts.h_min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_with_dense_output() {
        let opts = IntegratorOptions {
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        };
        let t_out: Vec<f64> = (0..=200).map(|i| i as f64 * 0.137).collect();
        let mut max_err: f64 = 0.0;
        integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            &t_out,
            &opts,
            |_, _| Ok(()),
            |t, y| {
                max_err = max_err.max((y[0] - t.cos()).abs()).max((y[1] + t.sin()).abs());
                Ok(())
            },
        )
        .unwrap();
        assert!(max_err < 1e-9, "max error {max_err}");
    }

    #[test]
    fn exponential_decay_relative_accuracy() {
        let opts = IntegratorOptions {
            rtol: 1e-10,
            atol: 0.0,
            ..Default::default()
        };
        let t_out = [1.0, 10.0, 40.0];
        let mut got = Vec::new();
        integrate(
            |_, y, dy| {
                dy[0] = -0.7 * y[0];
                Ok(())
            },
            0.0,
            &[2.0],
            &t_out,
            &opts,
            |_, _| Ok(()),
            |t, y| {
                got.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        for (t, y) in got {
            let want = 2.0 * (-0.7 * t).exp();
            assert!(((y - want) / want).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn blow_up_reports_underflow_with_last_state() {
        let opts = IntegratorOptions::default();
        let res = integrate(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &[2.0],
            &opts,
            |_, _| Ok(()),
            |_, _| Ok(()),
        );
        match res {
            Err(Error::Integration { t, state, .. }) => {
                assert!(t < 1.0 && t > 0.99);
                assert!(state[0] > 1e3);
            }
            other => panic!("expected integration error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_decreasing_output_times() {
        let res = integrate(
            |_, _, dy: &mut [f64]| {
                dy[0] = 0.0;
                Ok(())
            },
            0.0,
            &[0.0],
            &[1.0, 0.5],
            &IntegratorOptions::default(),
            |_, _| Ok(()),
            |_, _| Ok(()),
        );
        assert!(matches!(res, Err(Error::Config(_))));
    }
}
