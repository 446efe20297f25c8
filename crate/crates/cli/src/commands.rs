use rayon::prelude::*;
use serde::Serialize;

use qcme_core::analysis::{
    alpha_approx, alpha_exact, classify_rate, decay_window, fit_exponential, heff_spectrum, leading_exponent,
    metastability_onset, ness, short_time_series, RateClass, TauRel,
};
use qcme_core::dynamics::coherence_pairs;
use qcme_core::simulate::integrate;
use qcme_core::{equilibrium_solve_from, Mode, ReservoirPair, SystemState, Trajectory};

use crate::config::{Need, RawConfig, RunConfig, SweepKind};
use crate::error::CliError;
use crate::output::{Cell, Report, Table};

fn derived(cfg: &RunConfig) -> crate::config::Derived {
    cfg.derived.expect("resolved with reservoirs")
}

fn mode_for(cfg: &RunConfig, finite: bool) -> Mode {
    let d = derived(cfg);
    if finite {
        Mode::Finite(ReservoirPair::shared(cfg.model.clone().expect("finite runs carry a model")))
    } else {
        Mode::Stationary {
            n_l: d.n_l0,
            n_r: d.n_r0,
            statistics: cfg.statistics,
        }
    }
}

fn run(cfg: &RunConfig, finite: bool) -> Result<Trajectory, CliError> {
    let d = derived(cfg);
    let m = cfg.lattice.sites;
    let (mu_l, mu_r) = if finite {
        (d.mu_l0.expect("finite"), d.mu_r0.expect("finite"))
    } else {
        (0.0, 0.0)
    };
    let initial = SystemState::empty(m, mu_l, mu_r, cfg.tpdm);
    let times = cfg.grid.expect("runs carry a grid").times();
    Ok(integrate(&initial, &cfg.lattice, &mode_for(cfg, finite), &times, &cfg.options)?)
}

pub fn trajectory_columns(sites: usize, tpdm: bool) -> Vec<String> {
    let mut c: Vec<String> = ["t", "mu_L", "mu_R", "n_L", "n_R", "N_L", "N_R", "N_S"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    c.extend((1..=sites).map(|l| format!("n_{l}")));
    c.extend((1..sites).map(|l| format!("j_{l}_{}", l + 1)));
    c.push("I".into());
    c.extend(coherence_pairs(sites).iter().map(|(j, k)| format!("abs_sigma_{}_{}", j + 1, k + 1)));
    if tpdm {
        c.extend((1..=sites).map(|l| format!("var_n_{l}")));
        c.extend((1..sites).map(|l| format!("var_j_{l}_{}", l + 1)));
    }
    c.push("conservation_residual".into());
    c
}

fn trajectory_table(traj: &Trajectory, finite: bool, tpdm: bool) -> Table {
    let mut table = Table::new(trajectory_columns(traj.lattice.sites, tpdm));
    let residuals = traj.conservation_residuals();
    for (i, o) in traj.observables.iter().enumerate() {
        let mut row: Vec<Cell> = vec![o.t.into()];
        if finite {
            row.extend([o.mu_l.into(), o.mu_r.into()]);
        } else {
            row.extend([Cell::Empty, Cell::Empty]);
        }
        row.extend([o.n_res_l.into(), o.n_res_r.into(), o.big_n_l.into(), o.big_n_r.into(), o.n_s.into()]);
        row.extend(o.populations.iter().map(|&x| Cell::from(x)));
        row.extend(o.currents.iter().map(|&x| Cell::from(x)));
        row.push(o.macroscopic_current.into());
        row.extend(o.coherences.iter().map(|&x| Cell::from(x)));
        if tpdm {
            for v in [&o.var_populations, &o.var_currents] {
                row.extend(v.as_ref().expect("tpdm run").iter().map(|&x| Cell::from(x)));
            }
        }
        row.push(residuals.as_ref().map(|r| r[i]).into());
        table.push(row);
    }
    table
}

#[derive(Debug, Serialize)]
struct FitRecord {
    quantity: &'static str,
    y_inf: f64,
    window: Option<(f64, f64)>,
    rate: Option<f64>,
    rate_ci95: Option<f64>,
    points: Option<usize>,
    rate_over_alpha: Option<f64>,
    class: Option<RateClass>,
    error: Option<String>,
}

fn fit_rates(cfg: &RunConfig, traj: &Trajectory, t_star: Option<f64>, tau_rel: TauRel, report: &mut Report) -> Result<(), CliError> {
    let model = cfg.model.as_ref().expect("finite");
    let d = derived(cfg);
    let n0 = traj.monitors.total_particles.expect("finite");
    let eq = equilibrium_solve_from(n0, &cfg.lattice, model, (d.mu_l0.unwrap(), d.mu_r0.unwrap()))?;
    let alpha = alpha_exact(&cfg.lattice, model, eq.mu_inf)?;
    let approx = alpha_approx(
        &cfg.lattice,
        d.n_l0 - d.n_r0,
        d.big_n_l0.unwrap() - d.big_n_r0.unwrap(),
    )
    .ok();
    report.summary("alpha_exact", alpha.alpha);
    report.summary("alpha_approx", approx.map(|a| a.alpha));
    report.extra("equilibrium", eq);

    let t = traj.times();
    let obs = &traj.observables;
    let t_a = t_star.unwrap_or(0.0) + 5.0 * tau_rel.value().unwrap_or(0.0);
    let series: [(&'static str, Vec<f64>, f64); 4] = [
        ("delta_n", obs.iter().map(|o| o.n_res_l - o.n_res_r).collect(), 0.0),
        ("n_bar", obs.iter().map(|o| 0.5 * (o.n_res_l + o.n_res_r)).collect(), eq.n_inf),
        ("j_1_2", obs.iter().map(|o| o.currents.first().copied().unwrap_or(o.macroscopic_current)).collect(), 0.0),
        ("delta_N", obs.iter().map(|o| o.big_n_l.unwrap() - o.big_n_r.unwrap()).collect(), 0.0),
    ];
    let mut fits = Vec::new();
    for (quantity, y, y_inf) in series {
        let window = decay_window(&t, &y, y_inf, t_a);
        let mut rec = FitRecord {
            quantity,
            y_inf,
            window,
            rate: None,
            rate_ci95: None,
            points: None,
            rate_over_alpha: None,
            class: None,
            error: None,
        };
        match window.map(|w| fit_exponential(&t, &y, y_inf, w)) {
            None => rec.error = Some(format!("no samples after t = {t_a}")),
            Some(Err(e)) => rec.error = Some(e.to_string()),
            Some(Ok(f)) => {
                rec.rate = Some(f.rate);
                rec.rate_ci95 = Some(f.rate_ci95);
                rec.points = Some(f.points);
                rec.rate_over_alpha = Some(f.rate / alpha.alpha);
                rec.class = Some(classify_rate(f.rate, alpha.alpha));
            }
        }
        fits.push(rec);
    }
    report.extra("fits", fits);
    Ok(())
}

pub fn simulate(raw: RawConfig, finite: bool) -> Result<Report, CliError> {
    let need = if finite { Need::FiniteRun } else { Need::StationaryRun };
    let cfg = RunConfig::resolve(raw, need)?;
    let traj = run(&cfg, finite)?;
    let table = trajectory_table(&traj, finite, cfg.tpdm);
    let name = if finite { "simulate" } else { "stationary" };
    let mut report = Report::new(name, cfg.raw.clone(), cfg.derived, table);

    let t_star = metastability_onset(&traj);
    let tau_rel = heff_spectrum(&cfg.lattice)?.tau_rel;
    report.summary("t_star", t_star);
    report.summary("tau_rel", tau_rel.value());
    report.summary("max_conservation_residual", traj.monitors.total_particles.map(|_| traj.monitors.max_conservation_residual));
    report.summary("min_eigenvalue", traj.monitors.min_eigenvalue);
    report.summary("max_eigenvalue", traj.monitors.max_eigenvalue);
    report.summary("accepted_steps", traj.stats.accepted);
    report.extra("tau_rel_kind", tau_rel);
    report.extra("monitors", traj.monitors);
    report.extra("integration", traj.stats);
    if cfg.fit && finite {
        fit_rates(&cfg, &traj, t_star, tau_rel, &mut report)?;
    }
    Ok(report)
}

pub fn ness_table(raw: RawConfig) -> Result<Report, CliError> {
    let cfg = RunConfig::resolve(raw, Need::Occupations)?;
    let d = derived(&cfg);
    let (dn, nb) = (d.n_l0 - d.n_r0, 0.5 * (d.n_l0 + d.n_r0));
    let s = ness(dn, nb, &cfg.lattice)?;
    let m = cfg.lattice.sites;
    let mut table = Table::new(vec!["site".into(), "n".into(), "j_to_next".into()]);
    for l in 0..m {
        let j = if l + 1 < m { Cell::Num(s.j_inf) } else { Cell::Empty };
        table.push(vec![(l + 1).into(), s.populations[l].into(), j]);
    }
    let mut report = Report::new("ness", cfg.raw.clone(), cfg.derived, table);
    report.summary("delta_n", dn);
    report.summary("n_bar", nb);
    report.summary("j_inf", s.j_inf);
    report.summary("n_first", s.n_first);
    report.summary("n_bulk", s.n_bulk);
    report.summary("n_last", s.n_last);
    report.summary("fixed_point_residual", s.fixed_point_residual);
    Ok(report)
}

pub fn spectrum_table(raw: RawConfig) -> Result<Report, CliError> {
    let cfg = RunConfig::resolve(raw, Need::Lattice)?;
    let s = heff_spectrum(&cfg.lattice)?;
    let mut table = Table::new(vec!["k".into(), "energy".into(), "gamma".into()]);
    for (k, (e, g)) in s.eigenvalues.iter().zip(&s.gammas).enumerate() {
        table.push(vec![(k + 1).into(), e.re.into(), (*g).into()]);
    }
    let mut report = Report::new("spectrum", cfg.raw.clone(), None, table);
    report.summary("gamma_min", s.gamma_min);
    report.summary("tau_rel", s.tau_rel.value());
    report.extra("tau_rel_kind", s.tau_rel);
    Ok(report)
}

pub fn equilibrium_table(raw: RawConfig) -> Result<Report, CliError> {
    let cfg = RunConfig::resolve(raw, Need::Reservoirs)?;
    let d = derived(&cfg);
    let model = cfg.model.as_ref().expect("reservoirs");
    let (mu_l, mu_r) = (d.mu_l0.unwrap(), d.mu_r0.unwrap());
    let n0 = d.big_n0.expect("reservoirs");
    let eq = equilibrium_solve_from(n0, &cfg.lattice, model, (mu_l, mu_r))?;
    let exact = alpha_exact(&cfg.lattice, model, eq.mu_inf)?;
    let approx = alpha_approx(&cfg.lattice, d.n_l0 - d.n_r0, d.big_n_l0.unwrap() - d.big_n_r0.unwrap()).ok();
    let mut table = Table::new(vec!["quantity".into(), "value".into()]);
    let rows: [(&str, Option<f64>); 7] = [
        ("mu_inf", Some(eq.mu_inf)),
        ("n_inf", Some(eq.n_inf)),
        ("N_inf", Some(eq.big_n_inf)),
        ("N0", Some(n0)),
        ("alpha_exact", Some(exact.alpha)),
        ("tau_eq", exact.tau_eq),
        ("alpha_approx", approx.map(|a| a.alpha)),
    ];
    let mut report_rows = Vec::new();
    for (k, v) in rows {
        table.push(vec![k.into(), v.into()]);
        report_rows.push((k, v));
    }
    let mut report = Report::new("equilibrium", cfg.raw.clone(), cfg.derived, table);
    for (k, v) in report_rows {
        report.summary(k, v);
    }
    Ok(report)
}

pub fn shorttime_table(raw: RawConfig) -> Result<Report, CliError> {
    let cfg = RunConfig::resolve(raw, Need::Occupations)?;
    let d = derived(&cfg);
    let series = short_time_series(&cfg.lattice, d.n_l0, d.n_r0, cfg.series_order)?;
    let m = cfg.lattice.sites;
    let mut columns: Vec<String> = vec!["j".into(), "k".into(), "leading_power".into()];
    for p in 1..=series.order() {
        columns.push(format!("c{p}_re"));
        columns.push(format!("c{p}_im"));
    }
    let mut table = Table::new(columns);
    for j in 0..m {
        for k in j..m {
            let mut row: Vec<Cell> = vec![(j + 1).into(), (k + 1).into(), leading_exponent(m, j, k).into()];
            for p in 1..=series.order() {
                let c = series.coefficient(j, k, p);
                row.extend([c.re.into(), c.im.into()]);
            }
            table.push(row);
        }
    }
    let mut report = Report::new("shorttime", cfg.raw.clone(), cfg.derived, table);
    report.summary("order", series.order());
    Ok(report)
}

#[derive(Debug, Clone)]
struct SweepRow {
    sites: usize,
    gamma: f64,
    gamma_min: f64,
    tau_rel: Option<f64>,
    alpha_exact: Option<f64>,
    alpha_approx: Option<f64>,
    run: Option<RunSummary>,
}

#[derive(Debug, Clone)]
struct RunSummary {
    t_star: Option<f64>,
    n_1: f64,
    j_1_2: Option<f64>,
    current: f64,
    max_conservation_residual: Option<f64>,
    accepted_steps: usize,
}

fn has_reservoirs(raw: &RawConfig) -> bool {
    let r = &raw.reservoirs;
    (r.omega.is_some() || r.energy.is_some()) && (r.mu_l.is_some() || r.n_l.is_some())
}

fn sweep_point(base: &RawConfig, kind: SweepKind, sites: usize, gamma: f64) -> Result<SweepRow, CliError> {
    let mut raw = base.clone();
    raw.sweep = None;
    raw.lattice.sites = Some(sites);
    raw.lattice.gamma = Some(gamma);
    raw.lattice.gamma_l = None;
    raw.lattice.gamma_r = None;
    let need = match kind {
        SweepKind::Spectrum if has_reservoirs(&raw) => Need::Reservoirs,
        SweepKind::Spectrum => Need::Lattice,
        SweepKind::Simulate => Need::FiniteRun,
        SweepKind::Stationary => Need::StationaryRun,
    };
    let at = |e: CliError| -> CliError {
        let msg = format!("sweep point sites = {sites}, gamma = {gamma}: {e}");
        match e {
            CliError::Config(_) => CliError::Config(msg),
            CliError::Numerical(_) => CliError::Numerical(msg),
            CliError::Io(_) => CliError::Io(msg),
        }
    };
    let cfg = RunConfig::resolve(raw, need).map_err(at)?;
    let spec = heff_spectrum(&cfg.lattice).map_err(|e| at(e.into()))?;
    let (mut alpha_ex, mut alpha_ap) = (None, None);
    if let (Some(model), Some(d)) = (&cfg.model, cfg.derived) {
        if let (Some(ml), Some(mr), Some(n0)) = (d.mu_l0, d.mu_r0, d.big_n0) {
            let eq = equilibrium_solve_from(n0, &cfg.lattice, model, (ml, mr)).map_err(|e| at(e.into()))?;
            alpha_ex = Some(alpha_exact(&cfg.lattice, model, eq.mu_inf).map_err(|e| at(e.into()))?.alpha);
            alpha_ap = alpha_approx(&cfg.lattice, d.n_l0 - d.n_r0, d.big_n_l0.unwrap() - d.big_n_r0.unwrap())
                .ok()
                .map(|a| a.alpha);
        }
    }
    let run_summary = match kind {
        SweepKind::Spectrum => None,
        SweepKind::Simulate | SweepKind::Stationary => {
            let traj = run(&cfg, kind == SweepKind::Simulate).map_err(at)?;
            let last = traj.observables.last().expect("grid has points");
            Some(RunSummary {
                t_star: metastability_onset(&traj),
                n_1: last.populations[0],
                j_1_2: last.currents.first().copied(),
                current: last.macroscopic_current,
                max_conservation_residual: traj.monitors.total_particles.map(|_| traj.monitors.max_conservation_residual),
                accepted_steps: traj.stats.accepted,
            })
        }
    };
    Ok(SweepRow {
        sites,
        gamma,
        gamma_min: spec.gamma_min,
        tau_rel: spec.tau_rel.value(),
        alpha_exact: alpha_ex,
        alpha_approx: alpha_ap,
        run: run_summary,
    })
}

pub fn sweep(raw: RawConfig, workers: Option<usize>) -> Result<Report, CliError> {
    let spec = raw
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("missing required keys: sweep.kind".into()))?;
    let sites = if spec.sites.is_empty() {
        vec![raw.lattice.sites.ok_or_else(|| CliError::Config("missing required keys: sweep.sites or lattice.sites".into()))?]
    } else {
        spec.sites.clone()
    };
    let gammas = if spec.gamma.is_empty() {
        match (raw.lattice.gamma, raw.lattice.gamma_l, raw.lattice.gamma_r) {
            (Some(g), _, _) => vec![g],
            (None, Some(l), Some(r)) if l == r => vec![l],
            _ => return Err(CliError::Config("missing required keys: sweep.gamma or lattice.gamma".into())),
        }
    } else {
        spec.gamma.clone()
    };
    let points: Vec<(usize, f64)> = sites.iter().flat_map(|&m| gammas.iter().map(move |&g| (m, g))).collect();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Numerical(format!("worker pool: {e}")))?;
    let results: Vec<Result<SweepRow, CliError>> =
        pool.install(|| points.par_iter().map(|&(m, g)| sweep_point(&raw, spec.kind, m, g)).collect());
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let runs = spec.kind != SweepKind::Spectrum;
    let mut columns: Vec<String> = ["sites", "gamma", "gamma_min", "tau_rel", "alpha_exact", "alpha_approx"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if runs {
        for c in ["t_star", "n_1", "j_1_2", "I", "max_conservation_residual", "accepted_steps"] {
            columns.push(c.into());
        }
    }
    let mut table = Table::new(columns);
    for r in &rows {
        let mut row: Vec<Cell> = vec![
            r.sites.into(),
            r.gamma.into(),
            r.gamma_min.into(),
            r.tau_rel.into(),
            r.alpha_exact.into(),
            r.alpha_approx.into(),
        ];
        if let Some(s) = &r.run {
            row.extend([
                s.t_star.into(),
                s.n_1.into(),
                s.j_1_2.into(),
                s.current.into(),
                s.max_conservation_residual.into(),
                s.accepted_steps.into(),
            ]);
        }
        table.push(row);
    }
    let mut report = Report::new("sweep", raw, None, table);
    report.summary("points", rows.len());
    Ok(report)
}
