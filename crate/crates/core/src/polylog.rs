//! Real polylogarithms `Li_2` and `Li_3` for real arguments `z < 1`.
//!
//! Arguments are reduced to one of two convergent expansions:
//!
//! * the defining power series `sum z^k / k^s` for `|z| <= 0.6`;
//! * the expansion in `w = ln z` around `z = 1` for `0.6 < z < 1`.
//!
//! Negative arguments with `|z| > 0.6` are folded back with the duplication
//! formula `Li_s(z) + Li_s(-z) = 2^(1-s) Li_s(z^2)` and, for `z < -1`, with the
//! inversion formulas
//!
//! ```text
//! Li_2(-x) = -pi^2/6 - ln(x)^2 / 2 - Li_2(-1/x)
//! Li_3(-x) =  Li_3(-1/x) - pi^2/6 ln(x) - ln(x)^3 / 6
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};

const ZETA2: f64 = PI * PI / 6.0;
const ZETA3: f64 = 1.202_056_903_159_594_3;

const SERIES_RADIUS: f64 = 0.6;
const SERIES_CUTOFF: f64 = 1e-17;

/// Even-index Bernoulli numbers `B_0, B_2, ..., B_30`.
const BERNOULLI_EVEN: [f64; 16] = [
    1.0,
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

/// Riemann zeta at a non-positive integer `-n`.
fn zeta_nonpositive(n: usize) -> f64 {
    match n {
        0 => -0.5,
        n if n % 2 == 0 => 0.0,
        n => -BERNOULLI_EVEN[n.div_ceil(2)] / (n + 1) as f64,
    }
}

/// `Li_s(z)` for `s` in `{2, 3}` and real `z < 1`.
pub fn polylog(s: u32, z: f64) -> Result<f64> {
    if s != 2 && s != 3 {
        return Err(Error::domain(format!("polylog order {s} not supported")));
    }
    if !z.is_finite() || z >= 1.0 {
        return Err(Error::domain(format!("polylog argument {z} must be finite and < 1")));
    }
    Ok(eval(s, z))
}

/// Dilogarithm, `Li_2(z)` for `z < 1`.
pub fn li2(z: f64) -> Result<f64> {
    polylog(2, z)
}

/// Trilogarithm, `Li_3(z)` for `z < 1`.
pub fn li3(z: f64) -> Result<f64> {
    polylog(3, z)
}

fn eval(s: u32, z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else if z.abs() <= SERIES_RADIUS {
        power_series(s, z)
    } else if z > 0.0 {
        log_series(s, z)
    } else if z == -1.0 {
        -(1.0 - 2f64.powi(1 - s as i32)) * zeta(s)
    } else if z > -1.0 {
        2f64.powi(1 - s as i32) * eval(s, z * z) - log_series(s, -z)
    } else {
        let x = -z;
        let l = x.ln();
        let inner = eval(s, -1.0 / x);
        match s {
            2 => -ZETA2 - 0.5 * l * l - inner,
            _ => inner - ZETA2 * l - l * l * l / 6.0,
        }
    }
}

fn zeta(s: u32) -> f64 {
    if s == 2 {
        ZETA2
    } else {
        ZETA3
    }
}

fn power_series(s: u32, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut zk = 1.0;
    for k in 1..10_000u32 {
        zk *= z;
        let term = zk / (k as f64).powi(s as i32);
        sum += term;
        if term.abs() < SERIES_CUTOFF {
            break;
        }
    }
    sum
}

/// Expansion of `Li_s(e^w)` for small negative `w`:
/// `w^(s-1)/(s-1)! [H_(s-1) - ln(-w)] + sum_(k != s-1) zeta(s-k) w^k / k!`.
fn log_series(s: u32, z: f64) -> f64 {
    let w = z.ln();
    let lw = (-w).ln();
    let mut sum = match s {
        2 => ZETA2 + w * (1.0 - lw),
        _ => ZETA3 + ZETA2 * w + 0.5 * w * w * (1.5 - lw),
    };
    // k = s, s+1, ...: zeta(s - k) = zeta(-n) with n = k - s.
    let mut wk_over_fact = 1.0;
    for k in 1..=s {
        wk_over_fact *= w / k as f64;
    }
    for n in 0..2 * BERNOULLI_EVEN.len() - 1 {
        sum += zeta_nonpositive(n) * wk_over_fact;
        wk_over_fact *= w / (s as usize + n + 1) as f64;
    }
    sum
}
