//! Run configuration: TOML schema, validation and derived constants.
//!
//! All energies are in units of the hopping `J`, which is fixed to 1.

use serde::{Deserialize, Serialize};

use qcme_core::reservoirs::occupation;
use qcme_core::{IntegratorOptions, LatticeConfig, ReservoirModel, SimulationOptions, Statistics};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistics: Option<Statistics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub lattice: RawLattice,
    #[serde(default, skip_serializing_if = "is_default")]
    pub reservoirs: RawReservoirs,
    #[serde(default, skip_serializing_if = "is_default")]
    pub grid: RawGrid,
    #[serde(default, skip_serializing_if = "is_default")]
    pub integrator: RawIntegrator,
    #[serde(default, skip_serializing_if = "is_default")]
    pub simulation: RawSimulation,
    #[serde(default, skip_serializing_if = "is_default")]
    pub shorttime: RawShortTime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLattice {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_s: Option<f64>,
    /// Shorthand for `gamma_l = gamma_r = gamma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_r: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawReservoirs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Harmonic trap frequencies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<[f64; 3]>,
    /// Tabulated density of states.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Log,
    Linear,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<GridKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_decade: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
    /// Linear grids only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawIntegrator {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tpdm: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tpdm_max_sites: Option<usize>,
    /// Fit decay rates after a finite-reservoir run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conservation_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawShortTime {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Spectrum,
    Simulate,
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub kind: SweepKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sites: Vec<usize>,
    /// Symmetric couplings `gamma_l = gamma_r`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma: Vec<f64>,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Overrides taken from command-line flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tpdm: bool,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub t_max: Option<f64>,
    pub grid: Option<GridKind>,
}

impl RawConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if o.tpdm {
            self.simulation.tpdm = Some(true);
        }
        if o.rtol.is_some() {
            self.integrator.rtol = o.rtol;
        }
        if o.atol.is_some() {
            self.integrator.atol = o.atol;
        }
        if o.t_max.is_some() {
            self.t_max = o.t_max;
        }
        if o.grid.is_some() {
            self.grid.kind = o.grid;
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn parse_config(text: &str) -> Result<RawConfig, CliError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().trim().to_string();
        if path.is_empty() || path == "." {
            CliError::Config(msg)
        } else {
            CliError::Config(format!("{path}: {msg}"))
        }
    })
}

/// What a subcommand needs from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    /// Lattice only.
    Lattice,
    /// Lattice and resonant reservoir occupations.
    Occupations,
    /// Lattice, reservoir spectrum and initial state.
    Reservoirs,
    /// A full finite-reservoir run.
    FiniteRun,
    /// A full stationary-reservoir run.
    StationaryRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub t_max: f64,
    pub t_min: f64,
    pub per_decade: usize,
    pub max_points: usize,
    pub points: usize,
}

impl GridSpec {
    pub fn times(&self) -> Vec<f64> {
        match self.kind {
            GridKind::Log => qcme_core::simulate::log_grid(self.t_min, self.t_max, self.per_decade, self.max_points),
            GridKind::Linear => qcme_core::simulate::linear_grid(0.0, self.t_max, self.points),
        }
    }
}

/// Quantities computed from the configuration before any dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derived {
    pub e0: Option<f64>,
    pub mu_l0: Option<f64>,
    pub mu_r0: Option<f64>,
    pub n_l0: f64,
    pub n_r0: f64,
    pub big_n_l0: Option<f64>,
    pub big_n_r0: Option<f64>,
    pub big_n0: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub statistics: Statistics,
    pub lattice: LatticeConfig,
    pub model: Option<ReservoirModel>,
    pub derived: Option<Derived>,
    pub grid: Option<GridSpec>,
    pub options: SimulationOptions,
    pub tpdm: bool,
    pub fit: bool,
    pub series_order: usize,
}

struct Checker {
    missing: Vec<String>,
    invalid: Vec<String>,
}

impl Checker {
    fn req<T: Copy>(&mut self, key: &str, v: Option<T>) -> Option<T> {
        if v.is_none() {
            self.missing.push(key.to_string());
        }
        v
    }

    fn bad(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.invalid.push(format!("{key}: {msg}"));
    }

    fn finish(self) -> Result<(), CliError> {
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing required keys: {}", self.missing.join(", ")));
        }
        parts.extend(self.invalid);
        if parts.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(parts.join("; ")))
        }
    }
}

fn positive(c: &mut Checker, key: &str, v: Option<f64>) {
    if let Some(x) = v {
        if !(x.is_finite() && x > 0.0) {
            c.bad(key, format!("must be finite and > 0, got {x}"));
        }
    }
}

fn nonneg(c: &mut Checker, key: &str, v: Option<f64>) {
    if let Some(x) = v {
        if !(x.is_finite() && x >= 0.0) {
            c.bad(key, format!("must be finite and >= 0, got {x}"));
        }
    }
}

fn core_err(key: &str, e: qcme_core::Error) -> CliError {
    CliError::Config(format!("{key}: {e}"))
}

/// Chemical potential that gives occupation `n` at energy `eps`.
fn mu_for_occupation(statistics: Statistics, beta: f64, eps: f64, n: f64) -> f64 {
    eps - (1.0 / n + statistics.sign()).ln() / beta
}

impl RunConfig {
    pub fn resolve(raw: RawConfig, need: Need) -> Result<Self, CliError> {
        let mut c = Checker {
            missing: Vec::new(),
            invalid: Vec::new(),
        };
        let lat = &raw.lattice;
        let res = &raw.reservoirs;
        let uses_reservoirs = need != Need::Lattice;
        let has_dos = matches!(need, Need::Reservoirs | Need::FiniteRun);
        let runs = matches!(need, Need::FiniteRun | Need::StationaryRun);

        let statistics = if uses_reservoirs {
            c.req("statistics", raw.statistics)
        } else {
            raw.statistics
        };
        let sites = c.req("lattice.sites", lat.sites);
        let eps_s = c.req("lattice.eps_s", lat.eps_s);
        let (gamma_l, gamma_r) = match (lat.gamma, lat.gamma_l, lat.gamma_r) {
            (Some(g), None, None) => (Some(g), Some(g)),
            (Some(_), _, _) => {
                c.bad("lattice.gamma", "give either gamma or gamma_l/gamma_r, not both");
                (None, None)
            }
            (None, l, r) => (c.req("lattice.gamma_l", l), c.req("lattice.gamma_r", r)),
        };
        if let Some(0) = sites {
            c.bad("lattice.sites", "must be >= 1");
        }
        if let Some(e) = eps_s {
            if !e.is_finite() {
                c.bad("lattice.eps_s", "must be finite");
            }
        }
        nonneg(&mut c, "lattice.gamma_l", gamma_l);
        nonneg(&mut c, "lattice.gamma_r", gamma_r);

        let mu_pair = res.mu_l.is_some() || res.mu_r.is_some();
        let n_pair = res.n_l.is_some() || res.n_r.is_some();
        let beta = if has_dos || (uses_reservoirs && mu_pair) || (need == Need::FiniteRun) {
            c.req("reservoirs.beta", res.beta)
        } else {
            res.beta
        };
        positive(&mut c, "reservoirs.beta", beta);
        if uses_reservoirs {
            match (mu_pair, n_pair) {
                (true, true) => c.bad("reservoirs", "give either mu_l/mu_r or n_l/n_r, not both"),
                (false, false) => c.missing.push("reservoirs.mu_l/mu_r or reservoirs.n_l/n_r".into()),
                (true, false) => {
                    c.req("reservoirs.mu_l", res.mu_l);
                    c.req("reservoirs.mu_r", res.mu_r);
                }
                (false, true) => {
                    c.req("reservoirs.n_l", res.n_l);
                    c.req("reservoirs.n_r", res.n_r);
                }
            }
        }
        let tabulated = res.energy.is_some() || res.density.is_some();
        if has_dos {
            match (res.omega.is_some(), tabulated) {
                (true, true) => c.bad("reservoirs", "give either omega or energy/density, not both"),
                (false, false) => c.missing.push("reservoirs.omega or reservoirs.energy/density".into()),
                (false, true) => {
                    if res.energy.is_none() {
                        c.missing.push("reservoirs.energy".into());
                    }
                    if res.density.is_none() {
                        c.missing.push("reservoirs.density".into());
                    }
                }
                (true, false) => {}
            }
        }
        let t_max = if runs { c.req("t_max", raw.t_max) } else { raw.t_max };
        positive(&mut c, "t_max", t_max);
        positive(&mut c, "integrator.rtol", raw.integrator.rtol);
        positive(&mut c, "integrator.atol", raw.integrator.atol);
        positive(&mut c, "integrator.h_max", raw.integrator.h_max);
        positive(&mut c, "grid.t_min", raw.grid.t_min);
        nonneg(&mut c, "simulation.conservation_tol", raw.simulation.conservation_tol);
        c.finish()?;

        let lattice = LatticeConfig::new(sites.unwrap(), 1.0, eps_s.unwrap(), gamma_l.unwrap(), gamma_r.unwrap())
            .map_err(|e| core_err("lattice", e))?;
        let statistics = statistics.unwrap_or(Statistics::Fermi);

        let model = if has_dos || (res.omega.is_some() || tabulated) && uses_reservoirs {
            let beta = res.beta.ok_or_else(|| CliError::Config("missing required keys: reservoirs.beta".into()))?;
            let m = match (&res.omega, &res.energy, &res.density) {
                (Some(w), None, None) => ReservoirModel::harmonic(statistics, beta, *w),
                (None, Some(e), Some(d)) => ReservoirModel::tabulated(statistics, beta, e.clone(), d.clone()),
                _ => {
                    return Err(CliError::Config(
                        "reservoirs: give either omega or energy/density, not both".into(),
                    ))
                }
            };
            Some(m.map_err(|e| core_err("reservoirs", e))?)
        } else {
            None
        };

        let derived = if uses_reservoirs {
            Some(derive(&raw, statistics, &lattice, model.as_ref())?)
        } else {
            None
        };

        let grid = t_max.map(|t_max| GridSpec {
            kind: raw.grid.kind.unwrap_or(GridKind::Log),
            t_max,
            t_min: raw.grid.t_min.unwrap_or(1e-3),
            per_decade: raw.grid.per_decade.unwrap_or(200),
            max_points: raw.grid.max_points.unwrap_or(5000),
            points: raw.grid.points.unwrap_or(1001),
        });
        if let Some(g) = &grid {
            if g.kind == GridKind::Log && g.t_min >= g.t_max {
                return Err(CliError::Config(format!("grid.t_min: must be below t_max = {}", g.t_max)));
            }
            if g.kind == GridKind::Linear && g.points < 2 {
                return Err(CliError::Config("grid.points: need at least 2".into()));
            }
            if g.kind == GridKind::Log && (g.per_decade == 0 || g.max_points < 2) {
                return Err(CliError::Config("grid: per_decade must be >= 1 and max_points >= 2".into()));
            }
        }

        let d = IntegratorOptions::default();
        let ri = &raw.integrator;
        let integrator = IntegratorOptions {
            rtol: ri.rtol.unwrap_or(d.rtol),
            atol: ri.atol.unwrap_or(d.atol),
            h_max: ri.h_max.or(d.h_max),
            max_steps: ri.max_steps.unwrap_or(d.max_steps),
            ..d
        };
        let ds = SimulationOptions::default();
        let options = SimulationOptions {
            integrator,
            conservation_tol: raw.simulation.conservation_tol.unwrap_or(ds.conservation_tol),
            tpdm_max_sites: raw.simulation.tpdm_max_sites.unwrap_or(ds.tpdm_max_sites),
            ..ds
        };
        let series_order = raw.shorttime.order.unwrap_or(qcme_core::analysis::MAX_SERIES_ORDER);
        Ok(RunConfig {
            statistics,
            lattice,
            model,
            derived,
            grid,
            options,
            tpdm: raw.simulation.tpdm.unwrap_or(false),
            fit: raw.simulation.fit.unwrap_or(false),
            series_order,
            raw,
        })
    }
}

fn derive(
    raw: &RawConfig,
    statistics: Statistics,
    lattice: &LatticeConfig,
    model: Option<&ReservoirModel>,
) -> Result<Derived, CliError> {
    let res = &raw.reservoirs;
    let eps = lattice.eps_s;
    let (mu, n) = if let (Some(ml), Some(mr)) = (res.mu_l, res.mu_r) {
        let beta = res.beta.expect("checked");
        let occ = |key: &str, mu: f64| -> Result<f64, CliError> {
            if let Some(m) = model {
                m.occupation(eps, mu).map_err(|e| core_err(key, e))
            } else {
                occupation(statistics, beta * (eps - mu)).map_err(|e| core_err(key, e))
            }
        };
        if let Some(m) = model {
            for (key, v) in [("reservoirs.mu_l", ml), ("reservoirs.mu_r", mr)] {
                m.particle_number(v).map_err(|e| core_err(key, e))?;
            }
        }
        ((Some(ml), Some(mr)), (occ("reservoirs.mu_l", ml)?, occ("reservoirs.mu_r", mr)?))
    } else {
        let (nl, nr) = (res.n_l.expect("checked"), res.n_r.expect("checked"));
        for (key, v) in [("reservoirs.n_l", nl), ("reservoirs.n_r", nr)] {
            let ok = match statistics {
                Statistics::Fermi => v > 0.0 && v < 1.0,
                Statistics::Bose => v > 0.0 && v.is_finite(),
            };
            if !ok {
                let range = match statistics {
                    Statistics::Fermi => "(0, 1)",
                    Statistics::Bose => "(0, inf)",
                };
                return Err(CliError::Config(format!("{key}: occupation {v} outside {range}")));
            }
        }
        let mu = match res.beta {
            Some(b) if model.is_some() => (
                Some(mu_for_occupation(statistics, b, eps, nl)),
                Some(mu_for_occupation(statistics, b, eps, nr)),
            ),
            _ => (None, None),
        };
        (mu, (nl, nr))
    };

    let (mut big_l, mut big_r) = (None, None);
    if let (Some(m), (Some(ml), Some(mr))) = (model, mu) {
        big_l = Some(m.particle_number(ml).map_err(|e| core_err("reservoirs.mu_l", e))?);
        big_r = Some(m.particle_number(mr).map_err(|e| core_err("reservoirs.mu_r", e))?);
    }
    Ok(Derived {
        e0: model.map(|m| m.e0),
        mu_l0: mu.0,
        mu_r0: mu.1,
        n_l0: n.0,
        n_r0: n.1,
        big_n_l0: big_l,
        big_n_r0: big_r,
        big_n0: big_l.zip(big_r).map(|(a, b)| a + b),
    })
}
