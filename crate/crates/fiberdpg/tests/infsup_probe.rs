use fiberdpg::fem::infsup::*;
use fiberdpg::fibermodes::*;

fn config(length: f64, n_elements: usize) -> InfSupConfig {
    let f = FiberConfig::reference();
    InfSupConfig { length, n_elements, order: 6, k0: f.k0(), n: f.n_core }
}

fn k01() -> f64 {
    solve_modes(&FiberConfig::reference()).unwrap()[0].k_lp
}

#[test]
fn envelope_and_standard_constants_agree() {
    for (l, ne) in [(2.5, 15), (5.0, 30), (10.0, 60)] {
        let r = discrete_infsup_probe(&config(l, ne), k01()).unwrap();
        assert!(r.n_dofs <= 2000);
        let rel = (r.sigma_min_envelope / r.sigma_min_standard - 1.0).abs();
        assert!(rel < 0.05, "L = {l}: {r:?}");
    }
}

#[test]
fn constant_halves_when_length_doubles() {
    let s: Vec<f64> = [(2.5, 15), (5.0, 30), (10.0, 60)].iter().map(|&(l, ne)| sigma_min(&config(l, ne), k01()).unwrap()).collect();
    for w in s.windows(2) {
        let ratio = w[1] / w[0];
        assert!((ratio - 0.5).abs() < 0.15, "{s:?}");
    }
}

#[test]
fn probe_rejects_dense_overflow_and_bad_input() {
    assert!(discrete_infsup_probe(&config(10.0, 400), 1.0).is_err());
    assert!(sigma_min(&config(0.0, 4), 0.0).is_err());
}
