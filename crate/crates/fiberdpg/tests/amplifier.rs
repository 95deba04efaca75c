mod common;

use fiberdpg::amplifier::*;
use fiberdpg::fibermodes::{beat_lengths, solve_modes};
use fiberdpg::units::Z0;
use fiberdpg::C64;
use proptest::prelude::*;

fn cvec(v: [f64; 6]) -> [C64; 3] {
    [C64::new(v[0], v[1]), C64::new(v[2], v[3]), C64::new(v[4], v[5])]
}

fn thermal(fiber: &fiberdpg::fibermodes::FiberConfig, stations: usize) -> ThermalState {
    let grid = PolarGrid::new(fiber.r_core, fiber.r_clad, PolarGridConfig { core_rings: 4, clad_rings: 6, sectors: 8 }).unwrap();
    ThermalState::new(grid, ThermalParams::default(), stations)
}

#[test]
fn zero_source_keeps_zero_temperature() {
    let f = common::desk_fiber();
    let st = thermal(&f, 3);
    let q = vec![vec![0.0; st.grid.n_cells()]; 3];
    let next = st.heat_step(&q, 1e-3).unwrap();
    assert!(next.t.iter().flatten().all(|t| *t == 0.0));
    assert!(st.heat_step(&q, 0.0).is_err());
    assert!(st.heat_step(&q[..2], 1e-3).is_err());
}

#[test]
fn cold_fiber_lensing_report_matches_cold_modes() {
    let f = common::desk_fiber();
    let rep = thermal_lensing_report(&f, 0.0, 0.0, 1.2e-5, 100.0, 8.0).unwrap();
    let cold = solve_modes(&f).unwrap();
    assert_eq!(rep.modes, cold);
    assert_eq!(rep.beats, beat_lengths(&cold).unwrap());
    let shortest = rep.beats.iter().map(|b| b.beat_length).fold(f64::INFINITY, f64::min);
    assert!((rep.layers_per_beat - shortest * 1e3 / 100.0).abs() < 1e-12);
    assert!(rep.resolution_ok);
    assert!(!thermal_lensing_report(&f, 0.0, 0.0, 1.2e-5, 400.0, 8.0).unwrap().resolution_ok);
}

#[test]
fn converged_iterate_is_a_stable_fixed_point() {
    let f = common::desk_fiber();
    let cfg = AmplifierConfig {
        length: 200.0,
        n_layers: 2,
        refinement: 0,
        seed_power: 0.01,
        pump_power: 5.0,
        gain: YbTwoLevel { n_dopant: 3e26, ..YbTwoLevel::default() },
        ..AmplifierConfig::default()
    };
    let mut st = AmplifierState::new(f, cfg).unwrap();
    fixed_point_solve(&mut st).unwrap();
    assert!(st.converged);
    let tol = st.config.tol;
    st.config.tol = 2.0 * tol;
    st.config.max_iter = 1;
    fixed_point_solve(&mut st).unwrap();
    let last = st.history.last().unwrap();
    assert!(last.residual < 2.0 * tol);
    assert!(last.p_p_out < 5.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn irradiance_is_the_same_from_envelope_or_physical_fields(e in prop::array::uniform6(-1e3f64..1e3), h in prop::array::uniform6(-1e3f64..1e3), k in 0.0f64..20.0, z in 0.0f64..1e4) {
        let (e, h) = (cvec(e), cvec(h));
        let env = irradiance(e, h);
        let scale = e.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() * h.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() / Z0;
        prop_assume!(env > 1e-3 * scale);
        prop_assert!((irradiance_physical(e, h, k, z) - env).abs() <= 1e-14 * env);
    }

    #[test]
    fn heat_source_is_non_negative(i_s in 0.0f64..1e11, i_p in 0.0f64..1e11, n in 0.0f64..1e27) {
        let m = YbTwoLevel { n_dopant: n, ..YbTwoLevel::default() };
        let f2 = m.upper_fraction(i_s, i_p);
        prop_assert!((0.0..=1.0).contains(&f2));
        let (gs, gp) = m.gains(i_s, i_p);
        prop_assert!(heat_source(&m, i_s, i_p) >= -1e-12 * (gs.abs() * i_s + gp.abs() * i_p));
        prop_assert!(gs <= m.sigma_es * n && gs >= -m.sigma_as * n);
        prop_assert!(gp <= m.sigma_ep * n && gp >= -m.sigma_ap * n);
    }

    #[test]
    fn gain_vanishes_outside_the_core(i_s in 0.0f64..1e11, i_p in 0.0f64..1e11, r in 12.71f64..40.0) {
        let m = YbTwoLevel::default();
        prop_assert_eq!(gain_eval(&m, i_s, i_p, r, 12.7).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn pump_march_with_constant_loss_is_exponential(g in -500.0f64..0.0, len in 10.0f64..5000.0, n in 2usize..20) {
        let z: Vec<f64> = (0..=n).map(|i| len * i as f64 / n as f64).collect();
        let i = march_pump(3.0e9, &z, &|_, _| g).unwrap();
        for (zz, v) in z.iter().zip(&i) {
            let exact = 3.0e9 * (g * zz * 1e-6).exp();
            prop_assert!((v / exact - 1.0).abs() < 1e-8);
        }
        prop_assert!(i.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn implicit_heat_step_keeps_temperature_non_negative(seed in prop::collection::vec(0.0f64..1e10, 80), dt in 1e-6f64..1.0) {
        let f = common::desk_fiber();
        let st = thermal(&f, 1);
        let q = vec![seed[..st.grid.n_cells()].to_vec()];
        let next = st.heat_step(&q, dt).unwrap();
        prop_assert!(next.t[0].iter().all(|t| *t >= 0.0));
        let again = next.heat_step(&q, dt).unwrap();
        prop_assert!(again.t[0].iter().zip(&next.t[0]).all(|(b, a)| b >= a));
    }
}
