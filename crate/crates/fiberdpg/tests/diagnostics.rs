mod common;

use fiberdpg::diagnostics::*;
use fiberdpg::fem::mesh::build_mesh;
use fiberdpg::fibermodes::*;
use fiberdpg::units::{UM2_TO_M2, Z0};
use fiberdpg::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup() -> (FiberConfig, Vec<LPMode>, ModeBasis) {
    let fiber = common::desk_fiber();
    let modes = solve_modes(&fiber).unwrap();
    let mesh = build_mesh(&fiber, 1.0, 1, 1).unwrap();
    let basis = ModeBasis::new(&modes, &fiber, CrossSectionQuadrature::new(&mesh, 8)).unwrap();
    (fiber, modes, basis)
}

fn sample(q: &CrossSectionQuadrature, prof: &ModeProfile) -> Vec<[C64; 2]> {
    q.points
        .iter()
        .map(|(_, _, x, _)| {
            let v = prof.vector(x[0], x[1]);
            [C64::new(v[0], 0.0), C64::new(v[1], 0.0)]
        })
        .collect()
}

fn norm_sq(q: &CrossSectionQuadrature, f: &[[C64; 2]]) -> f64 {
    q.points.iter().zip(f).map(|((_, _, _, w), v)| w * (v[0].norm_sqr() + v[1].norm_sqr())).sum()
}

fn power_of(amp: C64, mode: &LPMode, fiber: &FiberConfig) -> f64 {
    amp.norm_sqr() * mode.k_lp / fiber.k0() / Z0 * UM2_TO_M2
}

#[test]
fn basis_is_orthonormal() {
    let (_, _, basis) = setup();
    // 2 + 4 + 4 + 2 members for LP01, LP11, LP21, LP02
    assert_eq!(basis.members.len(), 12);
    assert!(basis.orthonormality_defect() < 1e-10, "{}", basis.orthonormality_defect());
}

#[test]
fn superposition_of_lp01_and_lp11_is_recovered() {
    let (fiber, modes, basis) = setup();
    let q = &basis.quadrature;
    let p01 = ModeProfile::new(modes[0], &fiber, Polarization::X, Rotation::Cos);
    let p11 = ModeProfile::new(modes[1], &fiber, Polarization::X, Rotation::Cos);
    let (s01, s11) = (sample(q, &p01), sample(q, &p11));
    let (n01, n11) = (norm_sq(q, &s01).sqrt(), norm_sq(q, &s11).sqrt());
    let (alpha, beta) = (C64::new(30.0, 4.0), C64::new(-7.0, 2.5));
    let et: Vec<[C64; 2]> = s01.iter().zip(&s11).map(|(a, b)| [alpha * a[0] / n01 + beta * b[0] / n11, C64::new(0.0, 0.0)]).collect();
    let mp = basis.project(&et).unwrap();
    assert_eq!(mp.labels, vec!["LP01", "LP11", "LP21", "LP02"]);
    let want01 = power_of(alpha, &modes[0], &fiber);
    let want11 = power_of(beta, &modes[1], &fiber);
    assert!((mp.powers[0] / want01 - 1.0).abs() < 1e-6);
    assert!((mp.powers[1] / want11 - 1.0).abs() < 1e-6);
    assert!(mp.powers[2] < 1e-8 * want01 && mp.powers[3] < 1e-8 * want01);
    let hom = mp.hom_fraction().unwrap();
    assert!((hom - want11 / (want01 + want11)).abs() < 1e-6);
}

#[test]
fn pure_launch_is_all_fundamental() {
    let (fiber, modes, basis) = setup();
    let et = sample(&basis.quadrature, &ModeProfile::new(modes[0], &fiber, Polarization::Y, Rotation::Cos));
    let mp = basis.project(&et).unwrap();
    assert!(mp.powers[0] / mp.total() > 0.999);
    assert!(mp.hom_fraction().unwrap() < 1e-3);
}

#[test]
fn non_orthonormal_basis_is_rejected() {
    let (_, _, mut basis) = setup();
    let v = basis.members[0].values.clone();
    basis.members[1].values = v;
    assert!(basis.project(&basis.members[0].values.clone()).is_err());
}

#[test]
fn beat_spectrum_of_lp01_and_lp11_peaks_at_their_beat() {
    let (fiber, modes, _) = setup();
    let beats = beat_lengths(&modes).unwrap();
    let p01 = ModeProfile::new(modes[0], &fiber, Polarization::X, Rotation::Cos);
    let p11 = ModeProfile::new(modes[1], &fiber, Polarization::X, Rotation::Cos);
    let lp02 = *modes.iter().find(|m| m.label() == "LP02").unwrap();
    let p02 = ModeProfile::new(lp02, &fiber, Polarization::X, Rotation::Cos);
    let x = [0.4 * fiber.r_core, 0.0];
    let n = 4096;
    let dz = 10.0;
    let z: Vec<f64> = (0..n).map(|i| i as f64 * dz).collect();
    let line = |other: &ModeProfile, k: f64| -> Vec<f64> {
        z.iter()
            .map(|&z| (C64::from_polar(p01.scalar(x[0], x[1]), -modes[0].k_lp * z) + C64::from_polar(0.5 * other.scalar(x[0], x[1]), -k * z)).norm_sqr())
            .collect()
    };
    let s = mode_beat_spectrum(&z, &line(&p11, modes[1].k_lp)).unwrap();
    assert!(z.last().unwrap() * 1e-3 > 3.0 * beats[0].beat_length);
    assert!((s.peaks[0] - 2.03).abs() <= s.bin, "{} vs 2.03 (bin {})", s.peaks[0], s.bin);
    assert!((s.peaks[0] - beats[0].delta_k).abs() <= s.bin);
    let s = mode_beat_spectrum(&z, &line(&p02, lp02.k_lp)).unwrap();
    assert!((s.peaks[0] - 5.11).abs() <= s.bin, "{}", s.peaks[0]);
}

#[test]
fn beat_spectrum_needs_uniform_data() {
    let z: Vec<f64> = (0..8).map(|i| i as f64).collect();
    assert!(mode_beat_spectrum(&z, &[1.0; 8]).is_err());
    let mut z: Vec<f64> = (0..32).map(|i| i as f64).collect();
    z[5] = 5.5;
    assert!(mode_beat_spectrum(&z, &[1.0; 32]).is_err());
}

#[test]
fn all_stable_and_degenerate_sweeps() {
    assert!(regime_classify(&[0.0, 0.04, 0.049]).iter().all(|r| *r == Regime::Stable));
    assert_eq!(regime_classify(&[0.05]), vec![Regime::Transition]);
    assert!(tmi_metric_from_pairs(&[(1.0, 0.0), (0.0, 0.05)]).unwrap().threshold_flag);
    assert!(!tmi_metric_from_pairs(&[(0.95, 0.0499), (1.0, 0.05)]).unwrap().threshold_flag);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projections_never_exceed_the_field_norm(seed in any::<u64>(), modal in 0.0f64..1.0) {
        let (_, _, basis) = setup();
        let q = &basis.quadrature;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let coef: Vec<C64> = basis.members.iter().map(|_| c()).collect();
        let (a, b, d) = (c(), c(), c());
        let et: Vec<[C64; 2]> = q.points.iter().enumerate().map(|(i, (_, _, x, _))| {
            let mut v = [a * (x[0] * 0.1).sin() + d * x[1] * 0.01, b * (x[0] * x[1] * 0.02).cos()];
            for (m, cm) in basis.members.iter().zip(&coef) {
                v[0] += m.values[i][0] * *cm * modal;
                v[1] += m.values[i][1] * *cm * modal;
            }
            v
        }).collect();
        let mp = basis.project(&et).unwrap();
        let s: f64 = mp.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        prop_assert!(s <= norm_sq(q, &et) * (1.0 + 1e-12));
        prop_assert!(mp.powers.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn tmi_metric_ignores_per_sample_scaling(series in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 1e-6f64..1e6), 2..20)) {
        prop_assume!(series.iter().all(|(f, h, _)| f + h > 1e-9));
        let raw: Vec<(f64, f64)> = series.iter().map(|(f, h, _)| (*f, *h)).collect();
        let scaled: Vec<(f64, f64)> = series.iter().map(|(f, h, s)| (f * s, h * s)).collect();
        let a = tmi_metric_from_pairs(&raw).unwrap();
        let b = tmi_metric_from_pairs(&scaled).unwrap();
        prop_assert!((a.m_tmi - b.m_tmi).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.m_tmi));
        prop_assert_eq!(a.threshold_flag, a.m_tmi >= 0.05);
    }

    #[test]
    fn chaotic_is_never_followed_by_stable(m in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let r = regime_classify(&m);
        prop_assert_eq!(r.len(), m.len());
        if let Some(first) = r.iter().position(|x| *x == Regime::Chaotic) {
            prop_assert!(r[first..].iter().all(|x| *x != Regime::Stable));
        }
    }
}
