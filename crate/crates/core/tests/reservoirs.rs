use proptest::prelude::*;
use qcme_core::polylog::{li2, li3, polylog};
use qcme_core::quadrature::{integrate, integrate_to_infinity};
use qcme_core::{equilibrium_solve, equilibrium_solve_from, Error, LatticeConfig, ReservoirModel, Statistics};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRAP: [f64; 3] = [0.2, 0.2, 0.05];

fn fermi(beta: f64) -> ReservoirModel {
    ReservoirModel::harmonic(Statistics::Fermi, beta, TRAP).unwrap()
}

fn bose(beta: f64) -> ReservoirModel {
    ReservoirModel::harmonic(Statistics::Bose, beta, TRAP).unwrap()
}

/// `Li_s(z) = z / Gamma(s) * int_0^inf t^(s-1) / (e^t - z) dt` for `z < 1`.
fn polylog_integral(s: u32, z: f64) -> f64 {
    let gamma = if s == 2 { 1.0 } else { 2.0 };
    let v = integrate_to_infinity(
        |t: f64| t.powi(s as i32 - 1) / (t.exp() - z),
        0.0,
        0.0,
        5.0,
        1e-14,
        1e-18,
    )
    .unwrap();
    z / gamma * v
}

fn direct_series(s: u32, z: f64) -> f64 {
    (1..400).map(|k| z.powi(k) / (k as f64).powi(s as i32)).sum()
}

#[test]
fn polylog_against_direct_series() {
    for &z in &[0.5, -0.5, 0.3, -0.25] {
        for s in [2, 3] {
            let got = polylog(s, z).unwrap();
            assert!((got - direct_series(s, z)).abs() < 1e-12, "Li_{s}({z})");
        }
    }
}

#[test]
fn dilog_against_log_integral() {
    // Li_2(-x) = -int_0^x ln(1 + t) / t dt
    let oracle = -integrate(|t: f64| if t == 0.0 { 1.0 } else { t.ln_1p() / t }, 0.0, 5.0, 0.0, 1e-14).unwrap();
    assert!((li2(-5.0).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn polylog_against_integral_representation() {
    for &z in &[-150.0, -20.0, -5.0, -1.5, -0.9, -0.7, 0.65, 0.8, 0.95, 0.999] {
        for s in [2, 3] {
            let got = polylog(s, z).unwrap();
            let want = polylog_integral(s, z);
            assert!(
                (got - want).abs() < 1e-12 * want.abs().max(1.0),
                "Li_{s}({z}): {got} vs {want}"
            );
        }
    }
}

#[test]
fn reservoir_counts_for_reference_traps() {
    let f = fermi(1.0);
    assert!((f.particle_number(1.2).unwrap() - 1276.0).abs() <= 1.0);
    assert!((f.particle_number(0.7).unwrap() - 838.0).abs() <= 1.0);
    let b = bose(0.7);
    assert!((b.particle_number(-0.059).unwrap() - 1654.0).abs() <= 1.0);
    assert!((b.particle_number(-0.479).unwrap() - 1164.0).abs() <= 1.0);
}

fn random_valid_points(rng: &mut ChaCha8Rng, stat: Statistics) -> Vec<(f64, f64)> {
    (0..10)
        .map(|_| {
            let beta = rng.gen_range(0.3..3.0);
            let mu = match stat {
                Statistics::Fermi => rng.gen_range(-1.0..3.0),
                Statistics::Bose => 0.225 - rng.gen_range(0.01..2.0),
            };
            (mu, beta)
        })
        .collect()
}

#[test]
fn closed_forms_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for stat in [Statistics::Fermi, Statistics::Bose] {
        for (mu, beta) in random_valid_points(&mut rng, stat) {
            let m = ReservoirModel::harmonic(stat, beta, TRAP).unwrap();
            let n_closed = m.particle_number(mu).unwrap();
            let n_quad = m.particle_number_by_quadrature(mu).unwrap();
            assert!(
                ((n_closed - n_quad) / n_quad).abs() < 1e-8,
                "{stat:?} N({mu}, beta={beta}): {n_closed} vs {n_quad}"
            );
            let f_closed = m.f_of_mu(mu).unwrap();
            let f_quad = m.f_of_mu_by_quadrature(mu).unwrap();
            assert!(
                ((f_closed - f_quad) / f_quad).abs() < 1e-8,
                "{stat:?} f({mu}, beta={beta}): {f_closed} vs {f_quad}"
            );
        }
    }
}

#[test]
fn f_is_the_derivative_of_n() {
    let h = 1e-5;
    for (m, mus) in [(fermi(1.0), vec![-0.5, 0.2, 0.97, 1.2, 2.5]), (bose(0.7), vec![-2.0, -0.479, -0.059])] {
        for mu in mus {
            let fd = (m.particle_number(mu + h).unwrap() - m.particle_number(mu - h).unwrap()) / (2.0 * h);
            let f = m.f_of_mu(mu).unwrap();
            assert!(((f - fd) / f).abs() < 1e-6, "mu={mu}: f={f}, fd={fd}");
        }
    }
}

#[test]
fn g_is_the_derivative_of_occupation() {
    let h = 1e-6;
    for (m, eps) in [(fermi(1.0), 2.0), (bose(0.7), 2.0), (fermi(3.0), 0.5)] {
        for mu in [-0.6, -0.2, 0.1] {
            let fd = (m.occupation(eps, mu + h).unwrap() - m.occupation(eps, mu - h).unwrap()) / (2.0 * h);
            let g = m.g_of_mu(mu, eps).unwrap();
            assert!(((g - fd) / g).abs() < 1e-6);
        }
    }
}

#[test]
fn cold_fermi_f_approaches_density_of_states() {
    let m = fermi(50.0);
    let f = m.f_of_mu(2.0).unwrap();
    let d = m.dos.density(2.0);
    assert!(((f - d) / d).abs() < 0.01, "f={f}, D={d}");
}

#[test]
fn monotone_in_mu() {
    let f = fermi(1.0);
    let b = bose(0.7);
    let grid = |lo: f64, hi: f64| (0..120).map(move |i| lo + (hi - lo) * i as f64 / 119.0);
    for (m, lo, hi) in [(&f, -2.0, 3.0), (&b, -3.0, 0.2)] {
        let mut last_n = 0.0;
        let mut last_occ = 0.0;
        for mu in grid(lo, hi) {
            let n = m.particle_number(mu).unwrap();
            let occ = m.occupation(2.0, mu).unwrap();
            assert!(n > last_n && occ > last_occ);
            (last_n, last_occ) = (n, occ);
        }
    }
}

#[test]
fn tabulated_dos_matches_trap_formula() {
    // a fine table of the trap density; linear interpolation of e^2 costs
    // O(h^2) accuracy, so compare loosely here and exactly for a linear DOS.
    let energy: Vec<f64> = (0..=4000).map(|i| 0.225 + i as f64 * 0.01).collect();
    let density: Vec<f64> = energy.iter().map(|e| e * e / (2.0 * 0.2 * 0.2 * 0.05)).collect();
    let tab = ReservoirModel::tabulated(Statistics::Fermi, 1.0, energy, density).unwrap();
    let trap = fermi(1.0);
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    assert!(rel(tab.particle_number(1.2).unwrap(), trap.particle_number(1.2).unwrap()) < 1e-4);
    assert!(rel(tab.f_of_mu(1.2).unwrap(), trap.f_of_mu(1.2).unwrap()) < 1e-4);

    // constant density: N = D / beta * ln(1 + e^(beta (mu - E0))) exactly
    let flat = ReservoirModel::tabulated(Statistics::Fermi, 2.0, vec![0.0, 30.0, 60.0], vec![3.0, 3.0, 3.0]).unwrap();
    let want = 3.0 / 2.0 * (2.0f64 * 1.5).exp().ln_1p();
    assert!(rel(flat.particle_number(1.5).unwrap(), want) < 1e-10);
}

#[test]
fn equilibrium_of_six_site_trap() {
    let m = fermi(1.0);
    let lat = LatticeConfig::symmetric(6, 1.0, 2.0, 0.5).unwrap();
    let eq = equilibrium_solve(2114.0, &lat, &m).unwrap();
    assert!((eq.mu_inf - 0.972).abs() < 1e-3);
    assert!((eq.n_inf - 0.263).abs() < 5e-4);
    assert!((eq.big_n_inf - 1056.0).abs() <= 1.0);
    let resid = 2.0 * eq.big_n_inf + 6.0 * eq.n_inf - 2114.0;
    assert!(resid.abs() < 1e-9 * 2114.0);
    let seeded = equilibrium_solve_from(2114.0, &lat, &m, (1.2, 0.7)).unwrap();
    assert!((seeded.mu_inf - eq.mu_inf).abs() < 1e-10);
}

#[test]
fn lattice_absorbs_particles() {
    let m = fermi(1.0);
    let mu0 = 0.8;
    let n0 = 2.0 * m.particle_number(mu0).unwrap();
    let mut last = mu0;
    for sites in [1, 2, 5, 20] {
        let lat = LatticeConfig::symmetric(sites, 1.0, 2.0, 0.5).unwrap();
        let eq = equilibrium_solve_from(n0, &lat, &m, (mu0, mu0)).unwrap();
        assert!(eq.mu_inf < last, "M={sites}");
        last = eq.mu_inf;
    }
}

#[test]
fn bose_equilibrium_stays_below_band_bottom() {
    let m = bose(0.7);
    let lat = LatticeConfig::symmetric(3, 1.0, 2.0, 0.5).unwrap();
    let eq = equilibrium_solve(1654.0 + 1164.0, &lat, &m).unwrap();
    assert!(eq.mu_inf < m.e0);
    // beyond the thermal capacity at mu -> E0 there is no solution
    let cap = 2.0 * m.particle_number(m.e0 - 1e-9).unwrap();
    assert!(matches!(equilibrium_solve(2.0 * cap, &lat, &m), Err(Error::Numerical(_))));
}

proptest! {
    #[test]
    fn fermi_occupation_is_pauli_bounded(eps in -50.0f64..50.0, mu in -50.0f64..50.0, beta in 0.01f64..20.0) {
        let m = ReservoirModel::harmonic(Statistics::Fermi, beta, TRAP).unwrap();
        let n = m.occupation(eps, mu).unwrap();
        prop_assert!((0.0..=1.0).contains(&n));
        if (beta * (eps - mu)).abs() < 30.0 {
            prop_assert!(n > 0.0 && n < 1.0);
        }
    }

    #[test]
    fn li3_inversion_consistent(x in 1.01f64..1e4) {
        // Li_3(-x) - Li_3(-1/x) = -pi^2/6 ln x - ln(x)^3/6
        let l = x.ln();
        let lhs = li3(-x).unwrap() - li3(-1.0 / x).unwrap();
        let rhs = -std::f64::consts::PI.powi(2) / 6.0 * l - l.powi(3) / 6.0;
        prop_assert!((lhs - rhs).abs() < 1e-11 * rhs.abs().max(1.0));
    }
}
