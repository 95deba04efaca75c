mod common;

use std::sync::Arc;

use common::*;
use fiberdpg::boundary::StretchProfile;
use fiberdpg::envelope::EnvelopeAnsatz;
use fiberdpg::fem::dense::{cholesky, hermitian_defect, hermitian_eigenvalues};
use fiberdpg::fem::element::element_system;
use fiberdpg::fem::mesh::build_mesh;
use fiberdpg::fem::solver::*;

fn stretched_fiber_problem(p: usize) -> Problem {
    let fiber = desk_fiber();
    let (m, inlet) = lp01_inlet(&fiber);
    let mesh = Arc::new(build_mesh(&fiber, 4.0, 2, 0).unwrap());
    let mut pr = Problem::new(mesh, p, fiber.k0(), EnvelopeAnsatz::uniform(8.5).unwrap(), eps_of(fiber));
    pr.stretch = Some(StretchProfile::with_decay(2.0, 4.0, 3, fiber.k0(), m.k_lp - 8.5, 30.0).unwrap().as_stretch());
    pr.eps_z_invariant = false;
    pr.inlet = inlet;
    pr
}

#[test]
fn every_element_gram_is_hermitian_positive_definite() {
    let pr = stretched_fiber_problem(2);
    for e in 0..pr.mesh.n_elements() {
        let sys = pr.with_element_input(e, |inp| element_system(inp)).unwrap();
        let g = sys.gram.as_ref();
        let scale = (0..g.nrows()).map(|i| g[(i, i)].norm()).fold(0.0, f64::max);
        assert!(hermitian_defect(g) < 1e-12 * scale, "element {e}");
        cholesky(g).unwrap();
    }
}

#[test]
fn condensed_global_matrix_is_hermitian_psd() {
    let pr = stretched_fiber_problem(1);
    let a = dense_global_matrix(&pr).unwrap();
    let scale = (0..a.nrows()).map(|i| a[(i, i)].norm()).fold(0.0, f64::max);
    assert!(hermitian_defect(a.as_ref()) < 1e-10 * scale);
    let ev = hermitian_eigenvalues(a.as_ref()).unwrap();
    let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min > -1e-10 * scale, "min eigenvalue {min:e} of scale {scale:e}");
}

fn plane_wave_errors(p: usize, k_env: f64) -> Vec<f64> {
    [2usize, 4, 8, 16]
        .iter()
        .map(|&nz| {
            let (pr, ex) = plane_wave_problem(p, nz, k_env);
            combined(l2_errors(&solve(&pr).unwrap(), &ex))
        })
        .collect()
}

#[test]
fn manufactured_plane_wave_converges_at_order_p() {
    for p in [2usize, 3] {
        let errs = plane_wave_errors(p, 0.0);
        let overall = (errs[0] / errs[3]).log2() / 3.0;
        assert!(overall >= p as f64, "p = {p}: errors {errs:?}");
        for w in errs.windows(2) {
            assert!(rate(w[0], w[1]) > p as f64 - 0.1, "p = {p}: errors {errs:?}");
        }
    }
}

#[test]
fn envelope_matched_to_wave_number_is_nearly_exact() {
    // the envelope of e^{−ikz} at 𝗄 = k is constant and lies in the trial space
    let (pr, ex) = plane_wave_problem(2, 2, 3.0);
    let err = combined(l2_errors(&solve(&pr).unwrap(), &ex));
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn residuals_shrink_with_refinement() {
    let r: Vec<f64> = [2usize, 4]
        .iter()
        .map(|&nz| {
            let (pr, _) = plane_wave_problem(2, nz, 0.0);
            let sol = solve(&pr).unwrap();
            residuals(&pr, &sol).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    assert!(r[1] < 0.5 * r[0], "{r:?}");
}
