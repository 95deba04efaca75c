//! Discrete boundedness-below probe on a z-line reduction of the waveguide operator.
//!
//! One transverse polarization of a homogeneous medium: `(E_x, H_y)` on `(0, L)` with
//!
//! ```text
//! A(E, H) = ((∂z − i𝗄) E + i k0 H,  −(∂z − i𝗄) H − i k0 ε E),
//! ```
//!
//! PEC at `z = 0` and the outgoing (matched) relation `H = n E` at `z = L`. Fields are
//! continuous GLL spectral elements; the probe returns the smallest singular value of
//! `A` between the discrete L2 norms.

use faer::Mat;
use serde::Serialize;

use super::dense::{cholesky, lower_solve, singular_value_range};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_lobatto};
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Lagrange basis values and derivatives at `x` for the given nodes.
pub fn lagrange(nodes: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut v = vec![0.0; n];
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut val = 1.0;
        let mut der = 0.0;
        for m in 0..n {
            if m == j {
                continue;
            }
            let den = nodes[j] - nodes[m];
            // product rule over the factors
            der = der * (x - nodes[m]) / den + val / den;
            val *= (x - nodes[m]) / den;
        }
        v[j] = val;
        d[j] = der;
    }
    (v, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfSupConfig {
    pub length: f64,
    pub n_elements: usize,
    pub order: usize,
    pub k0: f64,
    pub n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfSupResult {
    pub sigma_min_standard: f64,
    pub sigma_min_envelope: f64,
    pub n_dofs: usize,
}

/// Smallest singular value for envelope wavenumber `k_env`.
pub fn sigma_min(cfg: &InfSupConfig, k_env: f64) -> Result<f64> {
    if !(cfg.length > 0.0) || cfg.n_elements == 0 || cfg.order < 1 {
        return Err(Error::Precondition("probe needs L > 0, elements and order >= 1".into()));
    }
    let p = cfg.order;
    let nodes = gauss_lobatto(p + 1).0;
    let (gx, gw) = gauss_legendre(p + 2);
    let n_nodes = cfg.n_elements * p + 1;
    let h = cfg.length / cfg.n_elements as f64;
    let npts = cfg.n_elements * gx.len();
    // full unknowns [E_0..E_N, H_0..H_N]; reduced drops E_0 and H_N (= n E_N)
    let nred = 2 * n_nodes - 2;
    let red = |full: usize| -> Vec<(usize, f64)> {
        if full < n_nodes {
            if full == 0 {
                vec![]
            } else {
                vec![(full - 1, 1.0)]
            }
        } else {
            let j = full - n_nodes;
            if j == n_nodes - 1 {
                vec![(n_nodes - 2, cfg.n)]
            } else {
                vec![(n_nodes - 1 + j, 1.0)]
            }
        }
    };
    let eps = cfg.n * cfg.n;
    let mut q = Mat::<C64>::zeros(2 * npts, nred);
    let mut m = Mat::<C64>::zeros(2 * npts, nred);
    let tabs: Vec<(Vec<f64>, Vec<f64>)> = gx.iter().map(|&x| lagrange(&nodes, x)).collect();
    for el in 0..cfg.n_elements {
        for (ip, w) in gw.iter().enumerate() {
            let row = el * gx.len() + ip;
            let sw = (w * h).sqrt();
            let (v, d) = &tabs[ip];
            for a in 0..=p {
                let node = el * p + a;
                let dv = d[a] / h;
                // E contributions
                let e1 = C64::new(dv, 0.0) - I * k_env * v[a];
                let e2 = -I * cfg.k0 * eps * v[a];
                for (c, s) in red(node) {
                    q[(2 * row, c)] += e1 * sw * s;
                    q[(2 * row + 1, c)] += e2 * sw * s;
                    m[(2 * row, c)] += C64::new(sw * v[a] * s, 0.0);
                }
                // H contributions
                let h1 = I * cfg.k0 * v[a];
                let h2 = -(C64::new(dv, 0.0) - I * k_env * v[a]);
                for (c, s) in red(n_nodes + node) {
                    q[(2 * row, c)] += h1 * sw * s;
                    q[(2 * row + 1, c)] += h2 * sw * s;
                    m[(2 * row + 1, c)] += C64::new(sw * v[a] * s, 0.0);
                }
            }
        }
    }
    // σ(Q L⁻ᴴ) with M = L Lᴴ
    let mass = super::dense::adj_mul(m.as_ref(), m.as_ref());
    let l = cholesky(mass.as_ref())?;
    let mut qt = q.adjoint().to_owned();
    lower_solve(l.as_ref(), &mut qt);
    let w = qt.adjoint().to_owned();
    Ok(singular_value_range(w.as_ref())?.0)
}

/// Runs the probe for `k_env = 0` and the given envelope wavenumber.
pub fn discrete_infsup_probe(cfg: &InfSupConfig, k_env: f64) -> Result<InfSupResult> {
    let n_dofs = 2 * (cfg.n_elements * cfg.order + 1) - 2;
    if n_dofs > 4000 {
        return Err(Error::Precondition(format!("probe limited to dense sizes, got {n_dofs} dofs")));
    }
    Ok(InfSupResult { sigma_min_standard: sigma_min(cfg, 0.0)?, sigma_min_envelope: sigma_min(cfg, k_env)?, n_dofs })
}
