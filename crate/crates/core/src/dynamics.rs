//! Equations of motion of the coupled lattice/reservoir system and the
//! one- and two-body observables derived from the lattice state.
//!
//! The lattice obeys a local master equation whose gain and loss rates at the
//! terminal sites follow the instantaneous resonant-level occupations
//! `n_L = n(eps_S, mu_L(t))`, `n_R = n(eps_S, mu_R(t))`. Particle exchange is
//! balanced by the reservoir rate equations
//! `dN_L/dt = gamma_L (n_1 - n_L)`, written for the chemical potential as
//! `dmu_L/dt = gamma_L (n_1 - n_L) / f(mu_L)`, and likewise on the right.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{Spdm, Tpdm};
use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;
use crate::reservoirs::{ReservoirModel, Statistics};

type C64 = Complex64;

/// The two reservoirs of a finite-reservoir run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirPair {
    pub left: ReservoirModel,
    pub right: ReservoirModel,
}

impl ReservoirPair {
    pub fn new(left: ReservoirModel, right: ReservoirModel) -> Result<Self> {
        if left.statistics != right.statistics {
            return Err(Error::config("both reservoirs must host the same kind of particle"));
        }
        left.validate()?;
        right.validate()?;
        Ok(ReservoirPair { left, right })
    }

    /// Two identical reservoirs.
    pub fn shared(model: ReservoirModel) -> Self {
        ReservoirPair {
            left: model.clone(),
            right: model,
        }
    }

    pub fn statistics(&self) -> Statistics {
        self.left.statistics
    }
}

/// How the reservoirs enter the lattice dynamics.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Finite reservoirs whose chemical potentials evolve with the exchange.
    Finite(ReservoirPair),
    /// Infinite reservoirs with fixed resonant-level occupations.
    Stationary {
        n_l: f64,
        n_r: f64,
        statistics: Statistics,
    },
}

impl Mode {
    pub fn statistics(&self) -> Statistics {
        match self {
            Mode::Finite(pair) => pair.statistics(),
            Mode::Stationary { statistics, .. } => *statistics,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Mode::Finite(_))
    }

    /// Resonant-level occupations `(n_L, n_R)` for the given reservoir state.
    pub fn resonant_occupations(&self, lattice: &LatticeConfig, mu_l: f64, mu_r: f64) -> Result<(f64, f64)> {
        match self {
            Mode::Finite(pair) => Ok((
                pair.left.occupation(lattice.eps_s, mu_l)?,
                pair.right.occupation(lattice.eps_s, mu_r)?,
            )),
            Mode::Stationary { n_l, n_r, .. } => Ok((*n_l, *n_r)),
        }
    }
}

/// Full integration state.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub sigma: Spdm,
    /// Chemical potentials; constant (or NaN when unspecified) for
    /// stationary reservoirs.
    pub mu_l: f64,
    pub mu_r: f64,
    pub delta: Option<Tpdm>,
}

impl SystemState {
    /// Empty lattice at `t = 0`.
    pub fn empty(sites: usize, mu_l: f64, mu_r: f64, with_tpdm: bool) -> Self {
        SystemState {
            t: 0.0,
            sigma: Spdm::zeros(sites),
            mu_l,
            mu_r,
            delta: with_tpdm.then(|| Tpdm::zeros(sites)),
        }
    }

    fn check_dims(&self, lattice: &LatticeConfig) -> Result<()> {
        if self.sigma.sites() != lattice.sites {
            return Err(Error::config(format!(
                "SPDM has {} sites, lattice has {}",
                self.sigma.sites(),
                lattice.sites
            )));
        }
        if let Some(d) = &self.delta {
            if d.sites() != lattice.sites {
                return Err(Error::config("TPDM dimension does not match the lattice"));
            }
        }
        Ok(())
    }
}

/// `d sigma / dt` for given resonant occupations `(n_l, n_r)`.
///
/// The gain/loss rates at a contact are `gamma n` and `gamma (1 +- n)`, and
/// the SPDM decays with their difference `gamma (1 +- n) -+ gamma n = gamma`.
/// The statistics therefore drop out and only the plain `gamma` remains.
pub fn spdm_derivative(sigma: &Spdm, lattice: &LatticeConfig, n_l: f64, n_r: f64) -> Spdm {
    let m = sigma.sites();
    let last = m - 1;
    let ij = C64::new(0.0, lattice.hopping);
    let (gl, gr) = (lattice.gamma_l, lattice.gamma_r);
    let mut d = Spdm::zeros(m);
    for j in 0..m {
        for k in 0..m {
            let (js, ks) = (j as isize, k as isize);
            let hop = sigma.get_or_zero(js, ks + 1) + sigma.get_or_zero(js, ks - 1)
                - sigma.get_or_zero(js + 1, ks)
                - sigma.get_or_zero(js - 1, ks);
            let mut v = ij * hop;
            let edge_l = (j == 0) as u8 + (k == 0) as u8;
            let edge_r = (j == last) as u8 + (k == last) as u8;
            v -= sigma.get(j, k) * (0.5 * (gl * edge_l as f64 + gr * edge_r as f64));
            d.set(j, k, v);
        }
    }
    d.add(0, 0, C64::new(gl * n_l, 0.0));
    d.add(last, last, C64::new(gr * n_r, 0.0));
    d
}

/// SPDM right-hand side for a state and reservoir mode.
pub fn spdm_rhs(state: &SystemState, lattice: &LatticeConfig, mode: &Mode) -> Result<Spdm> {
    state.check_dims(lattice)?;
    let (n_l, n_r) = mode.resonant_occupations(lattice, state.mu_l, state.mu_r)?;
    Ok(spdm_derivative(&state.sigma, lattice, n_l, n_r))
}

/// `(dmu_L/dt, dmu_R/dt)` for finite reservoirs.
pub fn mu_rhs(state: &SystemState, lattice: &LatticeConfig, pair: &ReservoirPair) -> Result<(f64, f64)> {
    state.check_dims(lattice)?;
    let last = lattice.sites - 1;
    let n_l = pair.left.occupation(lattice.eps_s, state.mu_l)?;
    let n_r = pair.right.occupation(lattice.eps_s, state.mu_r)?;
    let f_l = pair.left.f_of_mu(state.mu_l)?;
    let f_r = pair.right.f_of_mu(state.mu_r)?;
    if !(f_l > 0.0 && f_r > 0.0) {
        return Err(Error::numerical(format!("non-positive dN/dmu: f_L = {f_l}, f_R = {f_r}")));
    }
    Ok((
        lattice.gamma_l * (state.sigma.population(0) - n_l) / f_l,
        lattice.gamma_r * (state.sigma.population(last) - n_r) / f_r,
    ))
}

/// `d Delta / dt` for given resonant occupations.
///
/// `sign` terms carry `+` for bosons and `-` for fermions. Indices outside the
/// chain read as zero.
pub fn tpdm_derivative(
    delta: &Tpdm,
    sigma: &Spdm,
    lattice: &LatticeConfig,
    n_l: f64,
    n_r: f64,
    statistics: Statistics,
) -> Tpdm {
    let m = delta.sites();
    let ij = C64::new(0.0, lattice.hopping);
    let s = statistics.sign();
    let contacts = [(0usize, lattice.gamma_l, n_l), (m - 1, lattice.gamma_r, n_r)];
    let mut d = Tpdm::zeros(m);
    let kd = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    for j in 0..m {
        for mm in 0..m {
            for k in 0..m {
                for n in 0..m {
                    let (ji, mi, ki, ni) = (j as isize, mm as isize, k as isize, n as isize);
                    let hop = delta.get_or_zero(ji, mi + 1, ki, ni)
                        + delta.get_or_zero(ji, mi - 1, ki, ni)
                        + delta.get_or_zero(ji, mi, ki, ni + 1)
                        + delta.get_or_zero(ji, mi, ki, ni - 1)
                        - delta.get_or_zero(ji + 1, mi, ki, ni)
                        - delta.get_or_zero(ji - 1, mi, ki, ni)
                        - delta.get_or_zero(ji, mi, ki + 1, ni)
                        - delta.get_or_zero(ji, mi, ki - 1, ni);
                    let mut v = ij * hop;
                    let here = delta.get(j, mm, k, n);
                    for &(e, g, occ) in &contacts {
                        if g == 0.0 {
                            continue;
                        }
                        let hits = kd(j, e) + kd(k, e) + kd(mm, e) + kd(n, e);
                        v -= here * (0.5 * g * hits);
                        let mk = kd(mm, e) * kd(k, e);
                        v += sigma.get(j, n) * (g * mk);
                        let mut src = sigma.get(j, mm) * (kd(k, e) * kd(n, e)) + sigma.get(k, n) * (kd(j, e) * kd(mm, e));
                        src += (C64::new(kd(k, mm), 0.0) + sigma.get(k, mm) * s) * (kd(j, e) * kd(n, e));
                        src += sigma.get(j, n) * (s * mk);
                        v += src * (g * occ);
                    }
                    d.set(j, mm, k, n, v);
                }
            }
        }
    }
    d
}

/// TPDM right-hand side; the state must carry a TPDM.
pub fn tpdm_rhs(state: &SystemState, lattice: &LatticeConfig, mode: &Mode) -> Result<Tpdm> {
    state.check_dims(lattice)?;
    let delta = state
        .delta
        .as_ref()
        .ok_or_else(|| Error::config("state carries no two-particle density matrix"))?;
    let (n_l, n_r) = mode.resonant_occupations(lattice, state.mu_l, state.mu_r)?;
    Ok(tpdm_derivative(delta, &state.sigma, lattice, n_l, n_r, mode.statistics()))
}

/// One-body (and optionally two-body) observables of a lattice state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observables {
    pub t: f64,
    pub mu_l: f64,
    pub mu_r: f64,
    /// Resonant-level occupations `n_L(eps_S)`, `n_R(eps_S)`.
    pub n_res_l: f64,
    pub n_res_r: f64,
    /// Reservoir particle numbers; absent for stationary reservoirs.
    pub big_n_l: Option<f64>,
    pub big_n_r: Option<f64>,
    /// Lattice particle number `Tr sigma`.
    pub n_s: f64,
    /// Site populations `n_l`.
    pub populations: Vec<f64>,
    /// Currents `j_(l,l+1)` from site `l` to `l+1`, positive left to right.
    pub currents: Vec<f64>,
    /// Reservoir-to-reservoir current `-(1/2) d(N_L - N_R)/dt`.
    pub macroscopic_current: f64,
    /// `|sigma_jk|` for `k - j > 1`, row by row.
    pub coherences: Vec<f64>,
    pub var_populations: Option<Vec<f64>>,
    pub var_currents: Option<Vec<f64>>,
}

/// Index pairs `(j, k)` with `k - j > 1`, in the order of
/// [`Observables::coherences`].
pub fn coherence_pairs(sites: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..sites {
        for k in j + 2..sites {
            out.push((j, k));
        }
    }
    out
}

pub fn site_currents(sigma: &Spdm, hopping: f64) -> Vec<f64> {
    let m = sigma.sites();
    (0..m.saturating_sub(1))
        .map(|l| {
            // i J (sigma_(l+1,l) - sigma_(l,l+1)) = -2 J Im sigma_(l+1,l) for Hermitian sigma
            let z = C64::new(0.0, hopping) * (sigma.get(l + 1, l) - sigma.get(l, l + 1));
            z.re
        })
        .collect()
}

pub fn observables(state: &SystemState, lattice: &LatticeConfig, mode: &Mode) -> Result<Observables> {
    state.check_dims(lattice)?;
    let m = lattice.sites;
    let sigma = &state.sigma;
    let (n_l, n_r) = mode.resonant_occupations(lattice, state.mu_l, state.mu_r)?;
    let populations: Vec<f64> = (0..m).map(|l| sigma.population(l)).collect();
    let currents = site_currents(sigma, lattice.hopping);
    let macroscopic_current =
        -0.5 * lattice.gamma_l * (populations[0] - n_l) + 0.5 * lattice.gamma_r * (populations[m - 1] - n_r);
    let coherences = coherence_pairs(m).into_iter().map(|(j, k)| sigma.get(j, k).norm()).collect();
    let (big_n_l, big_n_r) = match mode {
        Mode::Finite(pair) => (
            Some(pair.left.particle_number(state.mu_l)?),
            Some(pair.right.particle_number(state.mu_r)?),
        ),
        Mode::Stationary { .. } => (None, None),
    };
    let (var_populations, var_currents) = match &state.delta {
        Some(delta) => {
            let vn = (0..m).map(|l| delta.get(l, l, l, l).re - populations[l].powi(2)).collect();
            let j2 = lattice.hopping * lattice.hopping;
            let vj = (0..m.saturating_sub(1))
                .map(|l| {
                    let p = l + 1;
                    let two_body = delta.get(p, l, l, p) + delta.get(l, p, p, l) - delta.get(p, l, p, l) - delta.get(l, p, l, p);
                    j2 * two_body.re - currents[l].powi(2)
                })
                .collect();
            (Some(vn), Some(vj))
        }
        None => (None, None),
    };
    Ok(Observables {
        t: state.t,
        mu_l: state.mu_l,
        mu_r: state.mu_r,
        n_res_l: n_l,
        n_res_r: n_r,
        big_n_l,
        big_n_r,
        n_s: sigma.trace(),
        populations,
        currents,
        macroscopic_current,
        coherences,
        var_populations,
        var_currents,
    })
}

/// Layout of the real state vector handed to the integrator:
/// the SPDM diagonal, then `(Re, Im)` of the strict upper triangle row by
/// row, then `(mu_L, mu_R)` for finite reservoirs, then `(Re, Im)` of every
/// TPDM element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub sites: usize,
    pub reservoirs: bool,
    pub tpdm: bool,
}

impl StateLayout {
    pub fn len(&self) -> usize {
        let m = self.sites;
        m * m + if self.reservoirs { 2 } else { 0 } + if self.tpdm { 2 * m * m * m * m } else { 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn mu_offset(&self) -> usize {
        self.sites * self.sites
    }

    fn tpdm_offset(&self) -> usize {
        self.mu_offset() + if self.reservoirs { 2 } else { 0 }
    }

    /// Indices of `mu_L`, `mu_R` in the packed vector, if present.
    pub fn mu_indices(&self) -> Option<(usize, usize)> {
        self.reservoirs.then(|| (self.mu_offset(), self.mu_offset() + 1))
    }

    pub fn pack_spdm(&self, sigma: &Spdm, out: &mut [f64]) {
        let m = self.sites;
        for l in 0..m {
            out[l] = sigma.get(l, l).re;
        }
        let mut p = m;
        for j in 0..m {
            for k in j + 1..m {
                let z = sigma.get(j, k);
                out[p] = z.re;
                out[p + 1] = z.im;
                p += 2;
            }
        }
    }

    pub fn unpack_spdm(&self, y: &[f64]) -> Spdm {
        let m = self.sites;
        let mut s = Spdm::zeros(m);
        for l in 0..m {
            s.set(l, l, C64::new(y[l], 0.0));
        }
        let mut p = m;
        for j in 0..m {
            for k in j + 1..m {
                let z = C64::new(y[p], y[p + 1]);
                s.set(j, k, z);
                s.set(k, j, z.conj());
                p += 2;
            }
        }
        s
    }

    fn pack_tpdm(&self, delta: &Tpdm, out: &mut [f64]) {
        let off = self.tpdm_offset();
        for (i, z) in delta.as_slice().iter().enumerate() {
            out[off + 2 * i] = z.re;
            out[off + 2 * i + 1] = z.im;
        }
    }

    fn unpack_tpdm(&self, y: &[f64]) -> Tpdm {
        let off = self.tpdm_offset();
        let mut d = Tpdm::zeros(self.sites);
        for (i, z) in d.as_mut_slice().iter_mut().enumerate() {
            *z = C64::new(y[off + 2 * i], y[off + 2 * i + 1]);
        }
        d
    }

    pub fn pack(&self, state: &SystemState) -> Vec<f64> {
        let mut y = vec![0.0; self.len()];
        self.pack_spdm(&state.sigma, &mut y);
        if self.reservoirs {
            let o = self.mu_offset();
            y[o] = state.mu_l;
            y[o + 1] = state.mu_r;
        }
        if self.tpdm {
            if let Some(d) = &state.delta {
                self.pack_tpdm(d, &mut y);
            }
        }
        y
    }

    /// Rebuilds a state; `mu` supplies the chemical potentials when the
    /// layout carries none.
    pub fn unpack(&self, t: f64, y: &[f64], mu: (f64, f64)) -> SystemState {
        let (mu_l, mu_r) = if self.reservoirs {
            (y[self.mu_offset()], y[self.mu_offset() + 1])
        } else {
            mu
        };
        SystemState {
            t,
            sigma: self.unpack_spdm(y),
            mu_l,
            mu_r,
            delta: self.tpdm.then(|| self.unpack_tpdm(y)),
        }
    }

    /// Packed right-hand side of the full system.
    pub fn rhs(&self, lattice: &LatticeConfig, mode: &Mode, y: &[f64], dy: &mut [f64], mu: (f64, f64)) -> Result<()> {
        let sigma = self.unpack_spdm(y);
        let (mu_l, mu_r) = if self.reservoirs {
            (y[self.mu_offset()], y[self.mu_offset() + 1])
        } else {
            mu
        };
        let (n_l, n_r) = mode.resonant_occupations(lattice, mu_l, mu_r)?;
        let ds = spdm_derivative(&sigma, lattice, n_l, n_r);
        self.pack_spdm(&ds, dy);
        if self.reservoirs {
            let pair = match mode {
                Mode::Finite(pair) => pair,
                Mode::Stationary { .. } => return Err(Error::config("stationary mode has no reservoir variables")),
            };
            let last = lattice.sites - 1;
            let f_l = pair.left.f_of_mu(mu_l)?;
            let f_r = pair.right.f_of_mu(mu_r)?;
            let o = self.mu_offset();
            dy[o] = lattice.gamma_l * (sigma.population(0) - n_l) / f_l;
            dy[o + 1] = lattice.gamma_r * (sigma.population(last) - n_r) / f_r;
        }
        if self.tpdm {
            let delta = self.unpack_tpdm(y);
            let dd = tpdm_derivative(&delta, &sigma, lattice, n_l, n_r, mode.statistics());
            self.pack_tpdm(&dd, dy);
        }
        Ok(())
    }
}
