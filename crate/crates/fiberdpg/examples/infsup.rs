//! Discrete inf-sup constants of the z-line toy with and without the envelope ansatz.
//!
//! ```text
//! cargo run --release --example infsup
//! ```

use fiberdpg::fem::infsup::{discrete_infsup_probe, InfSupConfig};
use fiberdpg::fibermodes::{solve_modes, FiberConfig};

fn main() -> fiberdpg::Result<()> {
    let f = FiberConfig::reference();
    let k01 = solve_modes(&f)?[0].k_lp;
    println!("L/µm   DOFs   σ_min(𝗄=0)   σ_min(𝗄=k01)  ratio");
    let mut prev: Option<f64> = None;
    for (length, n_elements) in [(2.5, 15), (5.0, 30), (10.0, 60)] {
        let cfg = InfSupConfig { length, n_elements, order: 6, k0: f.k0(), n: f.n_core };
        let r = discrete_infsup_probe(&cfg, k01)?;
        let halving = prev.map(|p| format!("  L doubled: ×{:.3}", r.sigma_min_standard / p)).unwrap_or_default();
        println!("{length:>5}  {:>5}  {:.6e}  {:.6e}  {:.5}{halving}", r.n_dofs, r.sigma_min_standard, r.sigma_min_envelope, r.sigma_min_envelope / r.sigma_min_standard);
        prev = Some(r.sigma_min_standard);
    }
    Ok(())
}
