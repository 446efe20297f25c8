//! Reservoir thermodynamics: occupations, density of states, particle number
//! `N(mu)` and its derivative `f(mu) = dN/dmu`, and the equilibrium state of
//! two identical reservoirs joined through the lattice.
//!
//! Units: `hbar = 1`, energies in `J`, `beta` in `1/J`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;
use crate::polylog::{li2, li3};
use crate::quadrature;

/// Bose chemical potentials closer than this to the band bottom are rejected.
pub const BOSE_MU_GUARD: f64 = 1e-12;

const QUAD_REL_TOL: f64 = 1e-13;
const TAIL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Bose,
    Fermi,
}

impl Statistics {
    /// `+1` for bosons, `-1` for fermions (the upper/lower sign convention).
    pub fn sign(self) -> f64 {
        match self {
            Statistics::Bose => 1.0,
            Statistics::Fermi => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityOfStates {
    /// Anisotropic 3-D harmonic trap, `D(e) = e^2 / (2 wx wy wz)`.
    HarmonicTrap3D { omega: [f64; 3] },
    /// Piecewise-linear density through `(energy[i], density[i])`; zero
    /// outside the table.
    Tabulated { energy: Vec<f64>, density: Vec<f64> },
}

impl DensityOfStates {
    pub fn density(&self, eps: f64) -> f64 {
        match self {
            DensityOfStates::HarmonicTrap3D { omega } => eps * eps / (2.0 * omega[0] * omega[1] * omega[2]),
            DensityOfStates::Tabulated { energy, density } => {
                if eps < energy[0] || eps > energy[energy.len() - 1] {
                    return 0.0;
                }
                let i = energy.partition_point(|&e| e <= eps).clamp(1, energy.len() - 1);
                let (e0, e1) = (energy[i - 1], energy[i]);
                let w = (eps - e0) / (e1 - e0);
                density[i - 1] * (1.0 - w) + density[i] * w
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DensityOfStates::HarmonicTrap3D { omega } => {
                if omega.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::config(format!("trap frequencies must be > 0, got {omega:?}")));
                }
            }
            DensityOfStates::Tabulated { energy, density } => {
                if energy.len() < 2 || energy.len() != density.len() {
                    return Err(Error::config("tabulated DOS needs >= 2 (energy, density) pairs"));
                }
                if energy.windows(2).any(|w| !(w[1] > w[0])) || energy.iter().any(|e| !e.is_finite()) {
                    return Err(Error::config("tabulated DOS energies must be strictly increasing"));
                }
                if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                    return Err(Error::config("tabulated DOS densities must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// A grand-canonical reservoir: statistics, temperature and spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirModel {
    pub statistics: Statistics,
    pub beta: f64,
    pub dos: DensityOfStates,
    /// Lowest single-particle energy of the reservoir.
    pub e0: f64,
}

impl ReservoirModel {
    /// Harmonic trap with `E0 = (wx + wy + wz) / 2`.
    pub fn harmonic(statistics: Statistics, beta: f64, omega: [f64; 3]) -> Result<Self> {
        let model = ReservoirModel {
            statistics,
            beta,
            e0: 0.5 * omega.iter().sum::<f64>(),
            dos: DensityOfStates::HarmonicTrap3D { omega },
        };
        model.validate()?;
        Ok(model)
    }

    /// Tabulated spectrum; `E0` is the first tabulated energy.
    pub fn tabulated(statistics: Statistics, beta: f64, energy: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        let e0 = energy.first().copied().unwrap_or(0.0);
        let model = ReservoirModel {
            statistics,
            beta,
            dos: DensityOfStates::Tabulated { energy, density },
            e0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::config(format!("beta must be > 0, got {}", self.beta)));
        }
        self.dos.validate()?;
        if let DensityOfStates::Tabulated { energy, .. } = &self.dos {
            if energy[0] != self.e0 {
                return Err(Error::config("E0 must equal the first tabulated energy"));
            }
        }
        Ok(())
    }

    fn check_mu(&self, mu: f64) -> Result<()> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("chemical potential {mu} is not finite")));
        }
        if self.statistics == Statistics::Bose && mu >= self.e0 - BOSE_MU_GUARD {
            return Err(Error::domain(format!(
                "bosonic chemical potential {mu} must lie below E0 = {}",
                self.e0
            )));
        }
        Ok(())
    }

    /// Occupation `1 / (exp(beta (eps - mu)) -+ 1)` of the level `eps`.
    pub fn occupation(&self, eps: f64, mu: f64) -> Result<f64> {
        occupation(self.statistics, self.beta * (eps - mu))
    }

    /// `d n / d mu = beta e^x / (e^x -+ 1)^2` with `x = beta (eps - mu)`.
    pub fn g_of_mu(&self, mu: f64, eps: f64) -> Result<f64> {
        let x = self.beta * (eps - mu);
        let n = occupation(self.statistics, x)?;
        Ok(match self.statistics {
            // n (1 - n), with 1 - n evaluated as the occupation at -x
            Statistics::Fermi => self.beta * n * fermi(-x),
            Statistics::Bose => self.beta * n * (1.0 + n),
        })
    }

    /// Reservoir particle number `N(mu)`.
    pub fn particle_number(&self, mu: f64) -> Result<f64> {
        self.check_mu(mu)?;
        match &self.dos {
            DensityOfStates::HarmonicTrap3D { omega } => Ok(self.harmonic_number(omega, mu)),
            DensityOfStates::Tabulated { .. } => self.particle_number_by_quadrature(mu),
        }
    }

    /// `f(mu) = dN/dmu`.
    pub fn f_of_mu(&self, mu: f64) -> Result<f64> {
        self.check_mu(mu)?;
        match &self.dos {
            DensityOfStates::HarmonicTrap3D { omega } => Ok(self.harmonic_f(omega, mu)),
            DensityOfStates::Tabulated { .. } => self.f_of_mu_by_quadrature(mu),
        }
    }

    /// `N(mu)` as the integral of `D(e) n(e)` over the spectrum.
    pub fn particle_number_by_quadrature(&self, mu: f64) -> Result<f64> {
        self.check_mu(mu)?;
        let stat = self.statistics;
        let beta = self.beta;
        self.spectral_integral(mu, |x| occupation(stat, x).unwrap_or(0.0), |x| {
            // integral of n over [x, inf) in units of 1/beta
            -stat.sign() * (-stat.sign() * (-x).exp()).ln_1p() / beta
        })
    }

    /// `f(mu)` as the integral of `D(e) g(mu, e)` over the spectrum.
    pub fn f_of_mu_by_quadrature(&self, mu: f64) -> Result<f64> {
        self.check_mu(mu)?;
        let stat = self.statistics;
        let beta = self.beta;
        self.spectral_integral(
            mu,
            |x| {
                let n = occupation(stat, x).unwrap_or(0.0);
                match stat {
                    Statistics::Fermi => beta * n * fermi(-x),
                    Statistics::Bose => beta * n * (1.0 + n),
                }
            },
            // integral of g over [x, inf) is n(x)
            |x| occupation(stat, x).unwrap_or(0.0),
        )
    }

    /// Integrates `D(e) w(beta (e - mu))` over the spectrum. `tail(x)` bounds
    /// the integral of `w` beyond `x`, used to cut tabulated spectra.
    fn spectral_integral<W, T>(&self, mu: f64, weight: W, tail: T) -> Result<f64>
    where
        W: Fn(f64) -> f64,
        T: Fn(f64) -> f64,
    {
        let beta = self.beta;
        let integrand = |e: f64| self.dos.density(e) * weight(beta * (e - mu));
        match &self.dos {
            DensityOfStates::HarmonicTrap3D { .. } => quadrature::integrate_to_infinity(
                integrand,
                self.e0,
                mu.max(self.e0),
                10.0 / beta,
                QUAD_REL_TOL,
                1e-16,
            ),
            DensityOfStates::Tabulated { energy, density } => {
                // suffix maxima of D bound the remaining contribution
                let mut dmax = density.clone();
                for i in (0..dmax.len() - 1).rev() {
                    dmax[i] = dmax[i].max(dmax[i + 1]);
                }
                let mut total = 0.0;
                for i in 0..energy.len() - 1 {
                    let (lo, hi) = (energy[i], energy[i + 1]);
                    let bound = dmax[i] * tail(beta * (lo - mu));
                    if lo > mu && total > 0.0 && bound < TAIL_TOL * total {
                        break;
                    }
                    total += quadrature::integrate(integrand, lo, hi, 0.0, QUAD_REL_TOL)?;
                }
                Ok(total)
            }
        }
    }

    fn harmonic_number(&self, omega: &[f64; 3], mu: f64) -> f64 {
        let (s, b, e0) = (self.statistics.sign(), self.beta, self.e0);
        let w = omega[0] * omega[1] * omega[2];
        let z = (-b * (e0 - mu)).exp();
        let log_term = (-s * z).ln_1p();
        let l2 = li2(s * z).expect("argument checked by check_mu");
        let l3 = li3(s * z).expect("argument checked by check_mu");
        (-s * e0 * e0 / (2.0 * b) * log_term + s * e0 / (b * b) * l2 + s / (b * b * b) * l3) / w
    }

    fn harmonic_f(&self, omega: &[f64; 3], mu: f64) -> f64 {
        let (s, b, e0) = (self.statistics.sign(), self.beta, self.e0);
        let w = omega[0] * omega[1] * omega[2];
        let z = (-b * (e0 - mu)).exp();
        // z / (1 -+ z) is the occupation of the band bottom
        let n0 = occupation(self.statistics, b * (e0 - mu)).expect("argument checked by check_mu");
        let log_term = (-s * z).ln_1p();
        let l2 = li2(s * z).expect("argument checked by check_mu");
        (0.5 * e0 * e0 * n0 - s * e0 / b * log_term + s / (b * b) * l2) / w
    }
}

fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (x.exp() + 1.0)
    }
}

/// Occupation as a function of `x = beta (eps - mu)`.
pub fn occupation(statistics: Statistics, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("occupation argument is NaN"));
    }
    match statistics {
        Statistics::Fermi => Ok(fermi(x)),
        Statistics::Bose => {
            if x <= 0.0 {
                Err(Error::domain(format!(
                    "bosonic occupation diverges: beta (eps - mu) = {x} <= 0"
                )))
            } else {
                Ok(1.0 / x.exp_m1())
            }
        }
    }
}

/// Common final state of two identical reservoirs and the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub mu_inf: f64,
    /// Occupation of the resonant level (and of every lattice site).
    pub n_inf: f64,
    /// Particle number in each reservoir.
    pub big_n_inf: f64,
}

/// Solves `N0 = 2 N(mu) + M n(eps_S, mu)` for the final chemical potential.
///
/// The search starts around the band bottom; see [`equilibrium_solve_from`]
/// to seed it with the initial chemical potentials.
pub fn equilibrium_solve(n0: f64, lattice: &LatticeConfig, model: &ReservoirModel) -> Result<EquilibriumResult> {
    let guess = match model.statistics {
        Statistics::Fermi => model.e0,
        Statistics::Bose => model.e0 - 1.0 / model.beta,
    };
    equilibrium_solve_from(n0, lattice, model, (guess, guess))
}

/// As [`equilibrium_solve`], with the initial bracket
/// `[min(mu_l, mu_r) - 5/beta, max(mu_l, mu_r) + 5/beta]`.
pub fn equilibrium_solve_from(
    n0: f64,
    lattice: &LatticeConfig,
    model: &ReservoirModel,
    initial_mu: (f64, f64),
) -> Result<EquilibriumResult> {
    if !(n0.is_finite() && n0 > 0.0) {
        return Err(Error::domain(format!("total particle number must be > 0, got {n0}")));
    }
    if !lattice.eps_s.is_finite() {
        return Err(Error::config("on-site energy must be finite"));
    }
    // M = 0 is accepted here: the reservoirs then share N0 on their own.
    let m = lattice.sites as f64;
    let eps = lattice.eps_s;
    let residual = |mu: f64| -> Result<(f64, f64)> {
        let n = model.particle_number(mu)?;
        let occ = model.occupation(eps, mu)?;
        let f = model.f_of_mu(mu)?;
        let g = model.g_of_mu(mu, eps)?;
        Ok((2.0 * n + m * occ - n0, 2.0 * f + m * g))
    };

    // Bose: mu must stay below both the band bottom and the resonant level.
    let ceiling = match model.statistics {
        Statistics::Bose => Some(model.e0.min(eps) - 2.0 * BOSE_MU_GUARD),
        Statistics::Fermi => None,
    };
    let clamp = |mu: f64| ceiling.map_or(mu, |c| mu.min(c));

    let width = 5.0 / model.beta;
    let mut lo = clamp(initial_mu.0.min(initial_mu.1) - width);
    let mut hi = clamp(initial_mu.0.max(initial_mu.1) + width);
    let mut step = width;
    let mut f_lo = residual(lo)?.0;
    let mut f_hi = residual(hi)?.0;
    let mut tries = 0;
    while f_lo > 0.0 {
        step *= 2.0;
        lo -= step;
        f_lo = residual(lo)?.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::numerical("no lower bracket for the equilibrium chemical potential"));
        }
    }
    step = width;
    while f_hi < 0.0 {
        if let Some(c) = ceiling {
            if hi >= c {
                return Err(Error::numerical(format!(
                    "N0 = {n0} exceeds the non-condensed bosonic capacity; no bracket below E0"
                )));
            }
        }
        step *= 2.0;
        hi = clamp(hi + step);
        f_hi = residual(hi)?.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::numerical("no upper bracket for the equilibrium chemical potential"));
        }
    }

    let tol = 1e-9 * n0;
    let mut mu = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (r, dr) = residual(mu)?;
        if r == 0.0 {
            break;
        }
        if r < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let newton = mu - r / dr;
        let next = if dr > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        // converged to rounding once Newton stops moving
        let settled = (next - mu).abs() <= 4.0 * f64::EPSILON * mu.abs().max(1.0);
        mu = next;
        if settled {
            break;
        }
        if hi - lo < 1e-15 * mu.abs().max(1.0) {
            break;
        }
    }
    let (r, _) = residual(mu)?;
    if r.abs() >= tol {
        return Err(Error::numerical(format!("equilibrium residual {r} above tolerance {tol}")));
    }
    Ok(EquilibriumResult {
        mu_inf: mu,
        n_inf: model.occupation(eps, mu)?,
        big_n_inf: model.particle_number(mu)?,
    })
}
