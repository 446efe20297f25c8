//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 60;

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrates `f` over `[a, b]` until the estimated error is below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::numerical("quadrature limits must be finite"));
    }
    let (whole, _) = kronrod(&f, a, b);
    let mut total = 0.0;
    let mut stack = vec![(a, b, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = kronrod(&f, lo, hi);
        let share = (hi - lo).abs() / (b - a).abs();
        let tol = abs_tol.max(rel_tol * whole.abs()) * share;
        if !val.is_finite() {
            return Err(Error::numerical(format!("non-finite integrand on [{lo}, {hi}]")));
        }
        if err <= tol || depth >= MAX_DEPTH || err < 1e-15 * val.abs() {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    Ok(total)
}

/// Integrates `f` over `[a, inf)` by consecutive panels of width `panel`,
/// stopping once a panel contributes less than `tail_tol` of the running total
/// and the integrand is past `decay_from`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    decay_from: f64,
    panel: f64,
    rel_tol: f64,
    tail_tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = a;
    if decay_from > a {
        total = integrate(&f, a, decay_from, 0.0, rel_tol)?;
        lo = decay_from;
    }
    for _ in 0..100_000 {
        let hi = lo + panel;
        let part = integrate(&f, lo, hi, 0.0, rel_tol)?;
        total += part;
        if part.abs() < tail_tol * total.abs() {
            return Ok(total);
        }
        lo = hi;
    }
    Err(Error::numerical("semi-infinite quadrature did not converge"))
}
