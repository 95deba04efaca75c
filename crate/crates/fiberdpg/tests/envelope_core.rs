use std::f64::consts::PI;

use fiberdpg::envelope::*;
use fiberdpg::fibermodes::{solve_modes, FiberConfig};
use fiberdpg::units::{EPS0, MU0};
use fiberdpg::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Sum of plane waves `a e^{i q·x}`, `b e^{i q·x}` with `q = 2π m / len`.
#[derive(Debug, Clone)]
struct Fourier {
    terms: Vec<([i32; 3], CVec3, CVec3)>,
}

impl Fourier {
    fn random(rng: &mut ChaCha8Rng, n_terms: usize, max_m: i32) -> Self {
        let mut c = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let mut terms = Vec::new();
        for _ in 0..n_terms {
            let a = [c(), c(), c()];
            let b = [c(), c(), c()];
            terms.push(([0; 3], a, b));
        }
        for t in terms.iter_mut() {
            t.0 = [rng.gen_range(-max_m..=max_m), rng.gen_range(-max_m..=max_m), rng.gen_range(-max_m..=max_m)];
        }
        Fourier { terms }
    }

    fn q(grid: &Grid3, m: [i32; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| 2.0 * PI * m[a] as f64 / grid.len[a])
    }

    fn field(&self, grid: Grid3, kind: FieldKind) -> FieldPair {
        FieldPair::from_fn(grid, kind, |x| {
            let mut e = [ZERO; 3];
            let mut h = [ZERO; 3];
            for (m, a, b) in &self.terms {
                let q = Self::q(&grid, *m);
                let ph = C64::from_polar(1.0, q[0] * x[0] + q[1] * x[1] + q[2] * x[2]);
                for c in 0..3 {
                    e[c] += a[c] * ph;
                    h[c] += b[c] * ph;
                }
            }
            (e, h)
        })
    }

    /// 𝒜u evaluated term by term with `∇× → i q×`.
    fn operator(&self, grid: Grid3, k_env: f64, eps: C64, omega: f64) -> FieldPair {
        FieldPair::from_fn(grid, FieldKind::Envelope, |x| {
            let mut r1 = [ZERO; 3];
            let mut r2 = [ZERO; 3];
            for (m, a, b) in &self.terms {
                let q = Self::q(&grid, *m);
                let ph = C64::from_polar(1.0, q[0] * x[0] + q[1] * x[1] + q[2] * x[2]);
                let qc = q.map(|v| C64::new(0.0, v * 1e6));
                let curl_a = cross(qc, *a);
                let curl_b = cross(qc, *b);
                let ik = I * k_env * 1e6;
                let rb = rotate_ez(*b);
                let ra = rotate_ez(*a);
                for c in 0..3 {
                    r1[c] += (-I * omega * eps * a[c] + curl_b[c] - ik * rb[c]) * ph;
                    r2[c] += (curl_a[c] - ik * ra[c] + I * omega * MU0 * b[c]) * ph;
                }
            }
            (r1, r2)
        })
    }
}

fn max_diff(a: &FieldPair, b: &FieldPair) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in a.e.iter().chain(&a.h).zip(b.e.iter().chain(&b.h)) {
        for c in 0..3 {
            worst = worst.max((x[c] - y[c]).norm());
        }
    }
    worst
}

fn max_abs(a: &FieldPair) -> f64 {
    a.e.iter().chain(&a.h).flat_map(|v| v.iter().map(|c| c.norm())).fold(0.0, f64::max)
}

fn box_grid(n: usize) -> Grid3 {
    Grid3::new([n, n, n], [-1.5, -1.5, 0.0], [3.0, 3.0, 4.0])
}

fn omega() -> f64 {
    FiberConfig::reference().omega()
}

#[test]
fn zero_envelope_wavenumber_is_the_maxwell_operator() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = box_grid(8);
    let u = Fourier::random(&mut rng, 4, 2).field(g, FieldKind::Envelope);
    let mat = MaterialCoefficients::uniform(&g, C64::new(2.1, 0.0), omega());
    let a = apply_envelope_operator(&u, &EnvelopeAnsatz::uniform(0.0).unwrap(), &mat, &SpectralDerivative).unwrap();
    let b = apply_maxwell_operator(&u, &mat, &SpectralDerivative).unwrap();
    assert_eq!(max_diff(&a, &b), 0.0);
}

#[test]
fn matched_envelope_of_a_guided_plane_wave_has_zero_residual() {
    // homogeneous core: E = x̂ e^{−iβz}, H = (β/ωμ0) ŷ e^{−iβz}, β = k0 n
    let fiber = FiberConfig::reference();
    let beta = fiber.k_core();
    let g = box_grid(6);
    let hy = beta * 1e6 / (omega() * MU0);
    let u = FieldPair::from_fn(g, FieldKind::Envelope, |_| ([C64::new(1.0, 0.0), ZERO, ZERO], [ZERO, C64::new(hy, 0.0), ZERO]));
    let mat = MaterialCoefficients::uniform(&g, C64::new(fiber.n_core * fiber.n_core, 0.0), omega());
    let r = apply_envelope_operator(&u, &EnvelopeAnsatz::uniform(beta).unwrap(), &mat, &SpectralDerivative).unwrap();
    let scale = omega() * EPS0 * fiber.n_core.powi(2);
    assert!(max_abs(&r) < 1e-12 * scale, "{}", max_abs(&r) / scale);
    // the same field seen with the wrong envelope wavenumber is not a solution
    let r = apply_envelope_operator(&u, &EnvelopeAnsatz::uniform(0.9 * beta).unwrap(), &mat, &SpectralDerivative).unwrap();
    assert!(max_abs(&r) > 0.05 * scale);
}

#[test]
fn manufactured_fields_match_the_analytic_operator() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = Fourier::random(&mut rng, 5, 2);
    let (eps, k) = (C64::new(2.1, 0.03), 8.5);
    let ansatz = EnvelopeAnsatz::uniform(k).unwrap();

    let g = box_grid(8);
    let mat = MaterialCoefficients::uniform(&g, eps, omega());
    let exact = f.operator(g, k, eps * EPS0, omega());
    let got = apply_envelope_operator(&f.field(g, FieldKind::Envelope), &ansatz, &mat, &SpectralDerivative).unwrap();
    assert!(max_diff(&got, &exact) < 1e-12 * max_abs(&exact));

    // fourth-order differences converge at rate four
    let err = |n: usize| {
        let g = box_grid(n);
        let mat = MaterialCoefficients::uniform(&g, eps, omega());
        let exact = f.operator(g, k, eps * EPS0, omega());
        let got = apply_envelope_operator(&f.field(g, FieldKind::Envelope), &ansatz, &mat, &CentralDifference4).unwrap();
        max_diff(&got, &exact) / max_abs(&exact)
    };
    let (e1, e2, e3) = (err(24), err(48), err(96));
    let r1 = (e1 / e2).log2();
    let r2 = (e2 / e3).log2();
    assert!(r1 > 3.7 && r2 > 3.9, "rates {r1} {r2}");
}

#[test]
fn adjoint_is_the_operator_with_conjugated_frequency_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = box_grid(8);
    let v = Fourier::random(&mut rng, 4, 2).field(g, FieldKind::Envelope);
    for (eps, k) in [(C64::new(2.1, 0.0), 0.0), (C64::new(2.1, 0.0), 8.5), (C64::new(2.1, -0.07), 8.5)] {
        let ansatz = EnvelopeAnsatz::uniform(k).unwrap();
        let mat = MaterialCoefficients::uniform(&g, eps, omega());
        let conj = MaterialCoefficients { mu0: MU0, epsilon: mat.epsilon.iter().map(|e| e.conj()).collect(), omega: -omega() };
        let adj = apply_envelope_adjoint(&v, &ansatz, &mat, &SpectralDerivative).unwrap();
        let op = apply_envelope_operator(&v, &ansatz, &conj, &SpectralDerivative).unwrap();
        assert!(max_diff(&adj, &op) <= 1e-15 * max_abs(&op));
    }
}

#[test]
fn shape_mismatch_is_reported() {
    let g = box_grid(4);
    let mut u = FieldPair::zeros(g, FieldKind::Envelope);
    u.e.pop();
    let mat = MaterialCoefficients::uniform(&g, C64::new(2.0, 0.0), omega());
    let a = EnvelopeAnsatz::uniform(1.0).unwrap();
    assert!(apply_envelope_operator(&u, &a, &mat, &SpectralDerivative).is_err());
    assert!(apply_envelope_adjoint(&u, &a, &mat, &SpectralDerivative).is_err());
    let short = MaterialCoefficients { mu0: MU0, epsilon: vec![C64::new(2.0, 0.0); 3], omega: omega() };
    assert!(apply_maxwell_operator(&FieldPair::zeros(g, FieldKind::Envelope), &short, &SpectralDerivative).is_err());
}

#[test]
fn constant_envelope_maps_to_a_traveling_wave() {
    let k01 = solve_modes(&FiberConfig::reference()).unwrap()[0].k_lp;
    let g = Grid3::new([1, 1, 64], [0.0; 3], [1.0, 1.0, 10.0]);
    let one = [C64::new(1.0, 0.0), ZERO, ZERO];
    let u = FieldPair::from_fn(g, FieldKind::Envelope, |_| (one, one));
    let p = envelope_to_physical(&u, &EnvelopeAnsatz::uniform(k01).unwrap()).unwrap();
    for (i, e) in p.e.iter().enumerate() {
        let z = g.point(i)[2];
        assert!((e[0] - C64::from_polar(1.0, -k01 * z)).norm() < 1e-14);
    }
    assert!(envelope_to_physical(&p, &EnvelopeAnsatz::uniform(k01).unwrap()).is_err());
}

#[test]
fn piecewise_envelope_gives_a_continuous_physical_field() {
    // envelope of e^{−iβz} in region i is e^{−i(β − k_i) z}; evaluate at both sides of the interface
    let (beta, l) = (8.56, 2.0);
    let ansatz = EnvelopeAnsatz::piecewise(vec![0.0, l, 3.0], vec![8.5, 0.0]).unwrap();
    let z = [l - 1e-12, l, l + 1e-9];
    for &zz in &z {
        let g = Grid3::new([1, 1, 1], [0.0, 0.0, zz], [1.0, 1.0, 1.0]);
        let k = ansatz.k_at(zz);
        let env = C64::from_polar(1.0, -(beta - k) * zz);
        let u = FieldPair::from_fn(g, FieldKind::Envelope, |_| ([env, ZERO, ZERO], [ZERO; 3]));
        let p = envelope_to_physical(&u, &ansatz).unwrap();
        assert!((p.e[0][0] - C64::from_polar(1.0, -beta * l)).norm() < 1e-8);
    }
}

#[test]
fn two_tone_envelope_spectrum_peaks_at_zero_and_minus_the_beat() {
    let modes = solve_modes(&FiberConfig::reference()).unwrap();
    let (k01, k11) = (modes[0].k_lp, modes[1].k_lp);
    let n = 1 << 18;
    let dz = 0.3;
    let z: Vec<f64> = (0..n).map(|i| i as f64 * dz).collect();
    let f: Vec<C64> = z.iter().map(|&z| C64::from_polar(1.0, -k01 * z) + C64::from_polar(0.6, -k11 * z)).collect();
    let s = shift_spectrum(&z, &f, k01).unwrap();

    let peaks = |v: &[C64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|a, b| v[*b].norm().partial_cmp(&v[*a].norm()).unwrap());
        (s.k[idx[0]], s.k[idx[1]])
    };
    let (p0, p1) = peaks(&s.envelope);
    assert!(p0.abs() <= s.dk);
    assert!((p1 * 1e3 + 2.03).abs() <= s.dk * 1e3 + 0.01, "{}", p1 * 1e3);
    let (q0, q1) = peaks(&s.physical);
    assert!((q0 - k01).abs() <= s.dk && (q1 - k11).abs() <= s.dk);
}

#[test]
fn pure_tone_concentrates_at_zero_and_zero_shift_is_identity() {
    let n = 256;
    let len = 40.0;
    let k = 2.0 * PI * 37.0 / len;
    let z: Vec<f64> = (0..n).map(|i| i as f64 * len / n as f64).collect();
    let f: Vec<C64> = z.iter().map(|&z| C64::from_polar(1.0, -k * z)).collect();
    let s = shift_spectrum(&z, &f, k).unwrap();
    let i0 = s.k.iter().position(|v| v.abs() < 1e-12).unwrap();
    assert!((s.envelope[i0].norm() - 1.0).abs() < 1e-12);
    let rest: f64 = s.envelope.iter().enumerate().filter(|(i, _)| *i != i0).map(|(_, v)| v.norm()).fold(0.0, f64::max);
    assert!(rest < 1e-12);
    assert!(s.shift_mismatch(k).unwrap() < 1e-12);
    assert!(line_transform_at(&z, &f, k).norm() > 0.999);

    let s0 = shift_spectrum(&z, &f, 0.0).unwrap();
    assert!(s0.physical.iter().zip(&s0.envelope).all(|(a, b)| a == b));
}

fn arb_fourier() -> impl Strategy<Value = Fourier> {
    any::<u64>().prop_map(|seed| Fourier::random(&mut ChaCha8Rng::seed_from_u64(seed), 3, 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adjoint_pairing_holds_for_random_fields(fu in arb_fourier(), fv in arb_fourier(), k in 0.0f64..10.0, gain in -0.1f64..0.1, seed in any::<u64>()) {
        let g = box_grid(8);
        let u = fu.field(g, FieldKind::Envelope);
        let v = fv.field(g, FieldKind::Envelope);
        // spatially varying lossy/gainy permittivity
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<C64> = (0..g.size()).map(|_| C64::new(rng.gen_range(2.0..2.2), gain) * EPS0).collect();
        let mat = MaterialCoefficients { mu0: MU0, epsilon: eps, omega: omega() };
        let a = EnvelopeAnsatz::uniform(k).unwrap();
        let au = apply_envelope_operator(&u, &a, &mat, &SpectralDerivative).unwrap();
        let asv = apply_envelope_adjoint(&v, &a, &mat, &SpectralDerivative).unwrap();
        let lhs = au.inner(&v);
        let rhs = u.inner(&asv);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (au.l2_norm() * v.l2_norm()));
    }

    #[test]
    fn envelope_operator_commutes_with_the_ansatz(fu in arb_fourier(), m in 0i32..4) {
        // room above the shifted wavenumbers so nothing aliases
        let g = Grid3::new([8, 8, 16], [-1.5, -1.5, 0.0], [3.0, 3.0, 4.0]);
        // commensurate with the period so e^{−i𝗄z}u stays periodic
        let k = 2.0 * PI * m as f64 / g.len[2];
        let a = EnvelopeAnsatz::uniform(k).unwrap();
        let u = fu.field(g, FieldKind::Envelope);
        let mat = MaterialCoefficients::uniform(&g, C64::new(2.1, 0.01), omega());
        let lhs = apply_envelope_operator(&u, &a, &mat, &SpectralDerivative).unwrap();
        let phys = envelope_to_physical(&u, &a).unwrap();
        let mut rhs = apply_maxwell_operator(&phys, &mat, &SpectralDerivative).unwrap();
        rhs.kind = FieldKind::Physical;
        let rhs = physical_to_envelope(&rhs, &a).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-11 * max_abs(&lhs));
    }

    #[test]
    fn ansatz_preserves_norms_and_round_trips(fu in arb_fourier(), k1 in 0.0f64..20.0, k2 in 0.0f64..20.0, split in 0.5f64..3.5) {
        let g = box_grid(6);
        let u = fu.field(g, FieldKind::Envelope);
        for a in [EnvelopeAnsatz::uniform(k1).unwrap(), EnvelopeAnsatz::piecewise(vec![0.0, split, 4.0], vec![k1, k2]).unwrap()] {
            let p = envelope_to_physical(&u, &a).unwrap();
            prop_assert!((p.l2_norm() - u.l2_norm()).abs() <= 1e-13 * u.l2_norm());
            let back = physical_to_envelope(&p, &a).unwrap();
            prop_assert!(max_diff(&back, &u) <= 1e-14 * max_abs(&u));
        }
    }

    #[test]
    fn spectrum_shift_is_a_circular_bin_shift(seed in any::<u64>(), bins in 0usize..64) {
        let n = 64;
        let len = 12.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // the wrap is exact when z0 is a whole number of steps
        let z: Vec<f64> = (0..n).map(|i| (i + 5) as f64 * len / n as f64).collect();
        let f: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let k = bins as f64 * 2.0 * PI / len;
        let s = shift_spectrum(&z, &f, k).unwrap();
        prop_assert!(s.shift_mismatch(k).unwrap() < 1e-12);
    }
}
