use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qcme_core::analysis::{
    alpha_approx, alpha_exact, fit_exponential, heff_spectrum, leading_exponent, metastable_state, ness,
    short_time_series, MAX_SERIES_ORDER,
};
use qcme_core::{equilibrium_solve, LatticeConfig, ReservoirModel, Statistics};

fn random_lattice(rng: &mut ChaCha8Rng, m: usize) -> LatticeConfig {
    LatticeConfig::new(
        m,
        rng.gen_range(0.3..2.0),
        rng.gen_range(-1.0..3.0),
        rng.gen_range(0.05..2.0),
        rng.gen_range(0.05..2.0),
    )
    .unwrap()
}

#[test]
fn ness_is_a_fixed_point_and_mirrors() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let m = rng.gen_range(1..9);
        let lat = random_lattice(&mut rng, m);
        let (dn, nb) = (rng.gen_range(-0.4..0.4), rng.gen_range(0.2..0.6));
        let s = ness(dn, nb, &lat).unwrap();
        assert!(s.fixed_point_residual < 1e-13, "{}", s.fixed_point_residual);

        let r = ness(-dn, nb, &lat.mirrored()).unwrap();
        assert!((s.j_inf + r.j_inf).abs() < 1e-14);
        for l in 0..m {
            assert!((s.populations[l] - r.populations[m - 1 - l]).abs() < 1e-14);
        }
    }
}

#[test]
fn metastable_current_agrees_with_edge_balance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let m = rng.gen_range(2..12);
        let lat = random_lattice(&mut rng, m);
        let (dn, nb) = (rng.gen_range(-0.5..0.5), rng.gen_range(0.0..1.0));
        let p = metastable_state(dn, nb, &lat).unwrap();
        let big_i = p.macroscopic_current(&lat, dn, nb);
        assert!((big_i - p.current).abs() <= 1e-13 * (1.0 + p.current.abs()));
    }
}

#[test]
fn effective_spectrum_trace_and_closed_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let m = rng.gen_range(1..15);
        let lat = random_lattice(&mut rng, m);
        let s = heff_spectrum(&lat).unwrap();
        let sum_gamma: f64 = s.gammas.iter().sum();
        let sum_eps: f64 = s.eigenvalues.iter().map(|e| e.re).sum();
        assert!((sum_gamma - lat.gamma_l - lat.gamma_r).abs() < 1e-10);
        assert!((sum_eps - m as f64 * lat.eps_s).abs() < 1e-10);
        assert!(s.gammas.windows(2).all(|w| w[0] <= w[1] + 1e-14));
        assert!(s.gamma_min > 0.0);
    }
    let closed = LatticeConfig::symmetric(5, 1.0, 0.0, 0.0).unwrap();
    let s = heff_spectrum(&closed).unwrap();
    assert_eq!(s.tau_rel.value(), None);
}

#[test]
fn approximate_rate_converges_for_small_bias() {
    let model = ReservoirModel::harmonic(Statistics::Fermi, 1.0, [0.2, 0.2, 0.05]).unwrap();
    let lat = LatticeConfig::symmetric(6, 1.0, 2.0, 0.5).unwrap();
    let mu = 1.0;
    let n0 = 2.0 * model.particle_number(mu).unwrap() + 6.0 * model.occupation(2.0, mu).unwrap();
    let eq = equilibrium_solve(n0, &lat, &model).unwrap();
    assert!((eq.mu_inf - mu).abs() < 1e-10);
    let exact = alpha_exact(&lat, &model, mu).unwrap().alpha;

    let mut prev = f64::INFINITY;
    for bias in [0.4, 0.1, 0.025] {
        let (ml, mr) = (mu + bias, mu - bias);
        let dn = model.occupation(2.0, ml).unwrap() - model.occupation(2.0, mr).unwrap();
        let dbig = model.particle_number(ml).unwrap() - model.particle_number(mr).unwrap();
        let approx = alpha_approx(&lat, dn, dbig).unwrap().alpha;
        let err = (approx / exact - 1.0).abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-3, "{prev}");
    assert!(alpha_approx(&lat, 0.1, 0.0).is_err());
}

#[test]
fn series_vanishes_below_the_leading_power() {
    let lat = LatticeConfig::new(5, 1.0, 2.0, 0.7, 0.4).unwrap();
    let s = short_time_series(&lat, 0.3, 0.1, MAX_SERIES_ORDER).unwrap();
    for j in 0..5 {
        for k in 0..5 {
            let p0 = leading_exponent(5, j, k);
            for p in 0..p0.min(MAX_SERIES_ORDER + 1) {
                assert_eq!(s.coefficient(j, k, p).norm(), 0.0, "({j},{k}) power {p}");
            }
            if p0 <= MAX_SERIES_ORDER {
                assert!(s.coefficient(j, k, p0).norm() > 0.0, "({j},{k}) power {p0}");
            }
        }
    }
    assert!(short_time_series(&lat, 0.3, 0.1, MAX_SERIES_ORDER + 1).is_err());
}

#[test]
fn exponential_fit_recovers_rate_with_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|&ti| 0.5 + 0.2 * (-0.37 * ti).exp() * (1.0 + 1e-3 * rng.gen_range(-1.0..1.0)))
        .collect();
    let fit = fit_exponential(&t, &y, 0.5, (1.0, 15.0)).unwrap();
    assert!((fit.rate - 0.37).abs() < fit.rate_ci95);
    assert!(fit.rate_ci95 < 1e-3);
    assert!((fit.prefactor - 0.2).abs() < 1e-3);
    assert!(fit_exponential(&t, &y, 0.5, (1.0, 1.5)).is_err());
}
