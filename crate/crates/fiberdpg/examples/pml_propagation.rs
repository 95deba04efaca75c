//! LP01 launch into a fiber terminated by a stretched absorbing layer.
//!
//! Runs both PML formulations from the bundled configs and prints the fitted envelope
//! decay and the standing-wave ratio in the unstretched region.
//!
//! ```text
//! cargo run --release --example pml_propagation
//! ```

use fiberdpg::config::RunConfig;
use fiberdpg::propagate::propagate;

fn main() -> fiberdpg::Result<()> {
    for name in ["pml_formulation1.toml", "pml_formulation2.toml"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
        let cfg = RunConfig::from_toml(&std::fs::read_to_string(path)?)?;
        let t = std::time::Instant::now();
        let run = propagate(&cfg.propagation_spec()?)?;
        let rep = run.pml_report(cfg.output.pml_samples)?.expect("config has a PML");
        let inlet = &run.power_profile(2)?[0];
        println!("{name}: {} elements, {} DOFs, {:.1} s", run.solution.stats.n_elements, run.solution.stats.n_dofs, t.elapsed().as_secs_f64());
        println!("  decay slope {:.5} µm⁻¹ vs {:.5} predicted ({:.2}%)", rep.fitted_slope, rep.predicted_slope, 100.0 * rep.relative_error);
        println!("  SWR in Ω_c {:.4}, LP01 power at the inlet {:.3} mW", rep.swr, 1e3 * inlet.modal.powers[0]);
    }
    Ok(())
}
