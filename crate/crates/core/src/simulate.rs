//! Time integration of a lattice/reservoir configuration with invariant
//! monitoring.

use serde::{Deserialize, Serialize};

use crate::dynamics::{observables, Mode, Observables, StateLayout, SystemState};
use crate::error::{Error, Result};
use crate::integrator::{self, IntegrationStats, IntegratorOptions};
use crate::lattice::LatticeConfig;
use crate::reservoirs::Statistics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub integrator: IntegratorOptions,
    /// Abort when a monitored invariant is violated.
    pub enforce_invariants: bool,
    /// Relative tolerance on `N_L + N_R + Tr sigma`.
    pub conservation_tol: f64,
    /// Slack on the SPDM eigenvalue bounds.
    pub eigenvalue_tol: f64,
    /// Largest lattice for which the TPDM may be propagated.
    pub tpdm_max_sites: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            integrator: IntegratorOptions::default(),
            enforce_invariants: true,
            conservation_tol: 1e-6,
            eigenvalue_tol: 1e-9,
            tpdm_max_sites: 8,
        }
    }
}

/// Worst values of the monitored invariants over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    /// Largest `|N_L + N_R + Tr sigma - N0| / N0` seen on any accepted step.
    pub max_conservation_residual: f64,
    pub max_hermiticity_error: f64,
    /// Extreme SPDM eigenvalues over the output times.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Total particle number at `t0` (finite reservoirs only).
    pub total_particles: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub lattice: LatticeConfig,
    pub states: Vec<SystemState>,
    pub observables: Vec<Observables>,
    pub monitors: Monitors,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Relative conservation residual at every output time.
    pub fn conservation_residuals(&self) -> Option<Vec<f64>> {
        let n0 = self.monitors.total_particles?;
        self.observables
            .iter()
            .map(|o| Some((o.big_n_l? + o.big_n_r? + o.n_s - n0) / n0))
            .collect()
    }
}

/// Total particle number of a finite-reservoir state.
pub fn total_particles(state: &SystemState, mode: &Mode) -> Result<Option<f64>> {
    match mode {
        Mode::Finite(pair) => Ok(Some(
            pair.left.particle_number(state.mu_l)? + pair.right.particle_number(state.mu_r)? + state.sigma.trace(),
        )),
        Mode::Stationary { .. } => Ok(None),
    }
}

/// Integrates from `initial` and samples the state at every time in `t_grid`.
pub fn integrate(
    initial: &SystemState,
    lattice: &LatticeConfig,
    mode: &Mode,
    t_grid: &[f64],
    opts: &SimulationOptions,
) -> Result<Trajectory> {
    lattice.validate()?;
    let m = lattice.sites;
    if initial.sigma.sites() != m {
        return Err(Error::config("initial SPDM does not match the lattice size"));
    }
    if initial.sigma.hermiticity_error() > 1e-10 {
        return Err(Error::config("initial SPDM is not Hermitian"));
    }
    let with_tpdm = initial.delta.is_some();
    if with_tpdm && m > opts.tpdm_max_sites {
        return Err(Error::config(format!(
            "TPDM propagation limited to {} sites (lattice has {m})",
            opts.tpdm_max_sites
        )));
    }
    if let Mode::Stationary { n_l, n_r, statistics } = mode {
        let ok = |n: f64| n.is_finite() && n >= 0.0 && (*statistics == Statistics::Bose || n <= 1.0);
        if !ok(*n_l) || !ok(*n_r) {
            return Err(Error::config("stationary occupations out of range"));
        }
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < initial.t) {
        return Err(Error::config("time grid must be non-decreasing and start at or after t0"));
    }

    let layout = StateLayout {
        sites: m,
        reservoirs: mode.is_finite(),
        tpdm: with_tpdm,
    };
    let fixed_mu = (initial.mu_l, initial.mu_r);
    let y0 = layout.pack(initial);
    let n0 = total_particles(initial, mode)?;
    let mut monitors = Monitors {
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
        total_particles: n0,
        ..Default::default()
    };
    let upper_bound = match mode.statistics() {
        Statistics::Fermi => 1.0 + opts.eigenvalue_tol,
        Statistics::Bose => f64::INFINITY,
    };

    let mut states = Vec::with_capacity(t_grid.len());
    let mut obs = Vec::with_capacity(t_grid.len());

    let check_conservation = |t: f64, y: &[f64], monitors: &mut Monitors| -> Result<()> {
        let (Some(n0), Mode::Finite(pair)) = (n0, mode) else {
            return Ok(());
        };
        let (il, ir) = layout.mu_indices().expect("finite mode packs chemical potentials");
        let trace: f64 = y[..m].iter().sum();
        let total = pair.left.particle_number(y[il])? + pair.right.particle_number(y[ir])? + trace;
        let resid = ((total - n0) / n0).abs();
        monitors.max_conservation_residual = monitors.max_conservation_residual.max(resid);
        if opts.enforce_invariants && resid > opts.conservation_tol {
            return Err(Error::Invariant {
                t,
                message: format!("particle number drifted by {resid:e} (relative)"),
            });
        }
        Ok(())
    };

    let mut step_monitors = monitors;
    let stats = integrator::integrate(
        |_, y, dy| layout.rhs(lattice, mode, y, dy, fixed_mu),
        initial.t,
        &y0,
        t_grid,
        &opts.integrator,
        |t, y| check_conservation(t, y, &mut step_monitors),
        |t, y| {
            let state = layout.unpack(t, y, fixed_mu);
            monitors.max_hermiticity_error = monitors.max_hermiticity_error.max(state.sigma.hermiticity_error());
            let ev = state.sigma.eigenvalues()?;
            let (lo, hi) = (ev[0], ev[ev.len() - 1]);
            monitors.min_eigenvalue = monitors.min_eigenvalue.min(lo);
            monitors.max_eigenvalue = monitors.max_eigenvalue.max(hi);
            if opts.enforce_invariants && (lo < -opts.eigenvalue_tol || hi > upper_bound) {
                return Err(Error::Invariant {
                    t,
                    message: format!("SPDM eigenvalues [{lo}, {hi}] out of bounds"),
                });
            }
            obs.push(observables(&state, lattice, mode)?);
            states.push(state);
            Ok(())
        },
    )?;
    monitors.max_conservation_residual = step_monitors.max_conservation_residual;
    for o in &obs {
        if let (Some(n0), Some(nl), Some(nr)) = (n0, o.big_n_l, o.big_n_r) {
            let r = ((nl + nr + o.n_s - n0) / n0).abs();
            monitors.max_conservation_residual = monitors.max_conservation_residual.max(r);
        }
    }

    Ok(Trajectory {
        lattice: *lattice,
        states,
        observables: obs,
        monitors,
        stats,
    })
}

/// `n` points uniformly spaced on `[t0, t1]`.
pub fn linear_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![t1];
    }
    (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect()
}

/// Logarithmic grid on `[t_min, t_max]` with `per_decade` points per decade,
/// capped at `max_points`; `t = 0` is prepended.
pub fn log_grid(t_min: f64, t_max: f64, per_decade: usize, max_points: usize) -> Vec<f64> {
    let decades = (t_max / t_min).log10();
    let n = ((decades * per_decade as f64).ceil() as usize + 1).clamp(2, max_points.max(2) - 1);
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    for i in 0..n {
        out.push(t_min * 10f64.powf(decades * i as f64 / (n - 1) as f64));
    }
    if let Some(last) = out.last_mut() {
        *last = t_max;
    }
    out
}
