//! Closed-form predictions for the lattice and post-processing of
//! trajectories.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::density::Spdm;
use crate::dynamics::spdm_derivative;
use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;
use crate::linalg::{self, CMatrix};
use crate::reservoirs::ReservoirModel;
use crate::simulate::Trajectory;

type C64 = Complex64;

/// Current-carrying fixed point of the lattice between stationary reservoirs.
#[derive(Debug, Clone, PartialEq)]
pub struct NessState {
    pub j_inf: f64,
    /// Populations of the first, bulk and last sites.
    pub n_first: f64,
    pub n_bulk: f64,
    pub n_last: f64,
    pub populations: Vec<f64>,
    pub sigma_inf: Spdm,
    /// `max |d sigma / dt|` of the stationary RHS at `sigma_inf`.
    pub fixed_point_residual: f64,
}

/// Ladder coefficients `(c_first, c_bulk, c_last)` and current coefficient:
/// `n_l = n_bar + c_l * dn`, `j = c_j * dn`.
fn ladder(lattice: &LatticeConfig) -> (f64, f64, f64, f64) {
    let (gl, gr) = (lattice.gamma_l, lattice.gamma_r);
    let j2 = lattice.hopping * lattice.hopping;
    let den = (4.0 * j2 + gl * gr) * (gl + gr);
    let base = 4.0 * (gl - gr) * j2;
    (
        (base + gl * gr * gr + gl * gl * gr) / (2.0 * den),
        (base + gl * gr * gr - gl * gl * gr) / (2.0 * den),
        (base - gl * gr * gr - gl * gl * gr) / (2.0 * den),
        4.0 * gl * gr * j2 / den,
    )
}

/// Non-equilibrium steady state for resonant occupations
/// `n_L = n_bar + dn/2`, `n_R = n_bar - dn/2`.
///
/// A single site has no bulk and no bond; its population is the
/// coupling-weighted mean of the two occupations.
pub fn ness(delta_n: f64, n_bar: f64, lattice: &LatticeConfig) -> Result<NessState> {
    lattice.validate()?;
    let (gl, gr) = (lattice.gamma_l, lattice.gamma_r);
    if !(gl + gr > 0.0) {
        return Err(Error::domain("steady state needs gamma_L + gamma_R > 0"));
    }
    let m = lattice.sites;
    if m == 0 {
        return Err(Error::domain("lattice has no sites"));
    }
    let (n_l, n_r) = (n_bar + 0.5 * delta_n, n_bar - 0.5 * delta_n);

    let (j_inf, n_first, n_bulk, n_last, sigma) = if m == 1 {
        let n = (gl * n_l + gr * n_r) / (gl + gr);
        let j = gl * (n_l - n);
        (j, n, n, n, Spdm::from_fn(1, |_, _| C64::new(n, 0.0)))
    } else {
        let (cf, cb, cl, cj) = ladder(lattice);
        let j = cj * delta_n;
        let (nf, nb, nl) = (n_bar + cf * delta_n, n_bar + cb * delta_n, n_bar + cl * delta_n);
        // j = -2J Im sigma_(l+1,l)  =>  sigma_(l,l+1) = i j / 2J
        let coh = C64::new(0.0, j / (2.0 * lattice.hopping));
        let sigma = Spdm::from_fn(m, |a, b| {
            if a == b {
                let n = if a == 0 {
                    nf
                } else if a == m - 1 {
                    nl
                } else {
                    nb
                };
                C64::new(n, 0.0)
            } else if b == a + 1 {
                coh
            } else if a == b + 1 {
                coh.conj()
            } else {
                C64::new(0.0, 0.0)
            }
        });
        (j, nf, nb, nl, sigma)
    };
    let residual = spdm_derivative(&sigma, lattice, n_l, n_r).max_abs();
    Ok(NessState {
        j_inf,
        n_first,
        n_bulk,
        n_last,
        populations: (0..m).map(|l| sigma.population(l)).collect(),
        sigma_inf: sigma,
        fixed_point_residual: residual,
    })
}

/// Metastable populations and current tracking slowly drifting reservoirs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetastablePrediction {
    pub n_first: f64,
    pub n_bulk: f64,
    pub n_last: f64,
    pub current: f64,
}

impl MetastablePrediction {
    /// Macroscopic current implied by the edge populations.
    pub fn macroscopic_current(&self, lattice: &LatticeConfig, delta_n: f64, n_bar: f64) -> f64 {
        let (n_l, n_r) = (n_bar + 0.5 * delta_n, n_bar - 0.5 * delta_n);
        -0.5 * lattice.gamma_l * (self.n_first - n_l) + 0.5 * lattice.gamma_r * (self.n_last - n_r)
    }
}

pub fn metastable_state(delta_n: f64, n_bar: f64, lattice: &LatticeConfig) -> Result<MetastablePrediction> {
    let s = ness(delta_n, n_bar, lattice)?;
    Ok(MetastablePrediction {
        n_first: s.n_first,
        n_bulk: s.n_bulk,
        n_last: s.n_last,
        current: s.j_inf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TauRel {
    Finite(f64),
    NonDecaying,
}

impl TauRel {
    pub fn value(self) -> Option<f64> {
        match self {
            TauRel::Finite(t) => Some(t),
            TauRel::NonDecaying => None,
        }
    }
}

/// Spectrum of the single-particle effective Hamiltonian with absorbing edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EffSpectrum {
    /// `E_k = eps_k - i Gamma_k / 2`, sorted by increasing `Gamma_k`.
    pub eigenvalues: Vec<C64>,
    pub gammas: Vec<f64>,
    pub gamma_min: f64,
    pub tau_rel: TauRel,
}

pub fn heff_matrix(lattice: &LatticeConfig) -> CMatrix {
    let m = lattice.sites;
    let mut h = CMatrix::from_fn(m, |a, b| {
        if a == b {
            C64::new(lattice.eps_s, 0.0)
        } else if a.abs_diff(b) == 1 {
            C64::new(-lattice.hopping, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    if m > 0 {
        h[(0, 0)] -= C64::new(0.0, 0.5 * lattice.gamma_l);
        h[(m - 1, m - 1)] -= C64::new(0.0, 0.5 * lattice.gamma_r);
    }
    h
}

pub fn heff_spectrum(lattice: &LatticeConfig) -> Result<EffSpectrum> {
    lattice.validate()?;
    if lattice.sites == 0 {
        return Err(Error::domain("lattice has no sites"));
    }
    let mut ev = linalg::eigenvalues(&heff_matrix(lattice))?;
    ev.sort_by(|a, b| b.im.total_cmp(&a.im));
    let gammas: Vec<f64> = ev.iter().map(|e| -2.0 * e.im).collect();
    let gamma_min = gammas[0];
    let tau_rel = if lattice.gamma_l + lattice.gamma_r == 0.0 {
        TauRel::NonDecaying
    } else {
        TauRel::Finite(1.0 / gamma_min)
    };
    Ok(EffSpectrum {
        eigenvalues: ev,
        gammas,
        gamma_min,
        tau_rel,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// `(M, tau_rel)` for every requested length.
    pub table: Vec<(usize, TauRel)>,
    pub exponent: f64,
    pub prefactor: f64,
}

/// Power-law fit `tau_rel = prefactor * M^exponent` at `gamma_L = gamma_R = gamma_bar`.
/// Single-site lattices are tabulated but kept out of the fit.
pub fn tau_rel_scaling(sites: &[usize], gamma_bar: f64, hopping: f64, eps_s: f64) -> Result<ScalingFit> {
    let mut table = Vec::with_capacity(sites.len());
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &m in sites {
        let lat = LatticeConfig::symmetric(m, hopping, eps_s, gamma_bar)?;
        let tau = heff_spectrum(&lat)?.tau_rel;
        table.push((m, tau));
        if let (true, Some(t)) = (m > 1, tau.value()) {
            xs.push((m as f64).ln());
            ys.push(t.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::numerical("scaling fit needs at least 3 lattice lengths with M > 1"));
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(ScalingFit {
        table,
        exponent: fit.slope,
        prefactor: fit.intercept.exp(),
    })
}

/// Common M-exponent of several scaling tables, each with its own
/// prefactor (least squares on the per-table centred logarithms).
pub fn pooled_exponent(fits: &[ScalingFit]) -> Result<f64> {
    let (mut sxy, mut sxx, mut points) = (0.0, 0.0, 0);
    for fit in fits {
        let pts: Vec<(f64, f64)> = fit
            .table
            .iter()
            .filter(|&&(m, _)| m > 1)
            .filter_map(|&(m, tau)| Some(((m as f64).ln(), tau.value()?.ln())))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        for (x, y) in pts {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            points += 1;
        }
    }
    if points < 3 || sxx == 0.0 {
        return Err(Error::numerical("pooled scaling fit needs at least 3 distinct lattice lengths"));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    Exact,
    Approximate,
    Fit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub alpha: f64,
    /// `1 / alpha`; absent when nothing equilibrates.
    pub tau_eq: Option<f64>,
    pub method: RateMethod,
}

impl RateEstimate {
    fn new(alpha: f64, method: RateMethod) -> Self {
        RateEstimate {
            alpha,
            tau_eq: (alpha > 0.0).then(|| 1.0 / alpha),
            method,
        }
    }
}

/// `8 gamma_L gamma_R J^2 / ((4J^2 + gamma_L gamma_R)(gamma_L + gamma_R))`.
fn coupling_factor(lattice: &LatticeConfig) -> f64 {
    2.0 * lattice.transmission()
}

/// Asymptotic equilibration rate from the reservoir response at `mu_inf`.
pub fn alpha_exact(lattice: &LatticeConfig, model: &ReservoirModel, mu_inf: f64) -> Result<RateEstimate> {
    lattice.validate()?;
    let g = model.g_of_mu(mu_inf, lattice.eps_s)?;
    let f = model.f_of_mu(mu_inf)?;
    Ok(RateEstimate::new(g / f * coupling_factor(lattice), RateMethod::Exact))
}

/// Rate estimated from the initial biases `dn(0)` and `dN(0)`.
pub fn alpha_approx(lattice: &LatticeConfig, delta_n0: f64, delta_big_n0: f64) -> Result<RateEstimate> {
    lattice.validate()?;
    if delta_big_n0 == 0.0 || !delta_big_n0.is_finite() {
        return Err(Error::domain("initial particle number difference must be nonzero"));
    }
    Ok(RateEstimate::new(
        coupling_factor(lattice) * delta_n0 / delta_big_n0,
        RateMethod::Approximate,
    ))
}

/// Taylor coefficients of the SPDM around an empty lattice at `t = 0`,
/// obtained by iterating the equation of motion order by order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortTimeSeries {
    /// `coefficients[p - 1]` multiplies `t^p`.
    pub coefficients: Vec<Spdm>,
}

pub const MAX_SERIES_ORDER: usize = 3;

impl ShortTimeSeries {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Zero for `power == 0` (empty start) and beyond the computed order.
    pub fn coefficient(&self, j: usize, k: usize, power: usize) -> C64 {
        match power {
            0 => C64::new(0.0, 0.0),
            p => self.coefficients.get(p - 1).map_or(C64::new(0.0, 0.0), |c| c.get(j, k)),
        }
    }

    pub fn evaluate(&self, t: f64) -> Spdm {
        let m = self.coefficients.first().map_or(0, |c| c.sites());
        Spdm::from_fn(m, |j, k| {
            self.coefficients
                .iter()
                .rev()
                .fold(C64::new(0.0, 0.0), |acc, c| (acc + c.get(j, k)) * t)
        })
    }
}

pub fn short_time_series(lattice: &LatticeConfig, n_l0: f64, n_r0: f64, order: usize) -> Result<ShortTimeSeries> {
    lattice.validate()?;
    if order == 0 || order > MAX_SERIES_ORDER {
        return Err(Error::domain(format!("series order must be 1..={MAX_SERIES_ORDER}")));
    }
    let m = lattice.sites;
    if m == 0 {
        return Err(Error::domain("lattice has no sites"));
    }
    let mut coefficients = Vec::with_capacity(order);
    let mut c = spdm_derivative(&Spdm::zeros(m), lattice, n_l0, n_r0);
    for p in 1..=order {
        if p > 1 {
            let next = spdm_derivative(&c, lattice, 0.0, 0.0);
            c = Spdm::from_fn(m, |j, k| next.get(j, k) / p as f64);
        }
        coefficients.push(c.clone());
    }
    Ok(ShortTimeSeries { coefficients })
}

/// Leading power of `t` in `sigma_jk` for an initially empty lattice
/// (zero-based site indices).
pub fn leading_exponent(sites: usize, j: usize, k: usize) -> usize {
    let m = sites as isize;
    (m - (j as isize + k as isize + 1 - m).abs()) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    pub points: usize,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::numerical("linear fit needs at least two (x, y) pairs"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::numerical("degenerate abscissae in linear fit"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if n > 2 { (ssr / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        rms: (ssr / nf).sqrt(),
        points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub rate: f64,
    /// Half-width of the 95% confidence interval on `rate`.
    pub rate_ci95: f64,
    /// `|y - y_inf| ~ prefactor * exp(-rate t)`.
    pub prefactor: f64,
    /// RMS residual of `ln |y - y_inf|`.
    pub residual: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 10;

/// Least-squares fit of `ln |y - y_inf|` against `t` over `window`.
pub fn fit_exponential(t: &[f64], y: &[f64], y_inf: f64, window: (f64, f64)) -> Result<ExpFit> {
    if t.len() != y.len() {
        return Err(Error::numerical("time and value series differ in length"));
    }
    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    let mut sign = 0.0;
    for (&ti, &yi) in t.iter().zip(y) {
        if ti < lo || ti > hi {
            continue;
        }
        let d = yi - y_inf;
        if d == 0.0 {
            return Err(Error::numerical(format!("series reaches its asymptote at t = {ti}")));
        }
        if sign != 0.0 && d.signum() != sign {
            return Err(Error::numerical(format!("y - y_inf changes sign near t = {ti}; narrow the window")));
        }
        sign = d.signum();
        xs.push(ti);
        ls.push(d.abs().ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::numerical(format!(
            "fit window [{lo}, {hi}] holds {} points, need {MIN_FIT_POINTS}",
            xs.len()
        )));
    }
    let fit = linear_fit(&xs, &ls)?;
    let dof = (xs.len() - 2) as f64;
    let quantile = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::numerical(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(ExpFit {
        rate: -fit.slope,
        rate_ci95: quantile * fit.slope_stderr,
        prefactor: fit.intercept.exp(),
        residual: fit.rms,
        points: fit.points,
    })
}

/// Fit window `[t_start, t_b]`, where `t_b` is the last time before
/// `|y - y_inf|` falls under `1e3 eps |y(t_start) - y_inf|`.
pub fn decay_window(t: &[f64], y: &[f64], y_inf: f64, t_start: f64) -> Option<(f64, f64)> {
    let first = t.iter().position(|&ti| ti >= t_start)?;
    let d0 = (y[first] - y_inf).abs();
    let floor = 1e3 * f64::EPSILON * d0;
    let mut end = first;
    for i in first..t.len() {
        if (y[i] - y_inf).abs() < floor {
            break;
        }
        end = i;
    }
    (end > first).then(|| (t[first], t[end]))
}

/// First output time after the peak at which every long-range coherence
/// `|sigma_jk|`, `|j - k| > 1`, has dropped below `1e-3` of its running
/// maximum over the trajectory.
pub fn metastability_onset(traj: &Trajectory) -> Option<f64> {
    let series: Vec<f64> = traj
        .observables
        .iter()
        .map(|o| o.coherences.iter().copied().fold(0.0, f64::max))
        .collect();
    let (peak_idx, peak) = series
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    if peak <= 0.0 {
        return None;
    }
    series[peak_idx..]
        .iter()
        .position(|&c| c < 1e-3 * peak)
        .map(|i| traj.observables[peak_idx + i].t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    Alpha,
    TwoAlpha,
}

/// Assigns a fitted rate to the nearer (in log scale) of `alpha` and `2 alpha`.
pub fn classify_rate(rate: f64, alpha: f64) -> RateClass {
    let r = (rate / alpha).ln();
    if (r - 2f64.ln()).abs() < r.abs() {
        RateClass::TwoAlpha
    } else {
        RateClass::Alpha
    }
}
