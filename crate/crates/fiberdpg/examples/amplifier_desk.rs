//! Coupled gain/pump fixed point on a 2.5 mm toy amplifier, with an energy audit.
//!
//! ```text
//! cargo run --release --example amplifier_desk
//! ```

use fiberdpg::amplifier::{energy_audit, fixed_point_solve, state_lensing_report, AmplifierState};
use fiberdpg::config::RunConfig;

fn main() -> fiberdpg::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/amplify_desk.toml");
    let cfg = RunConfig::from_toml(&std::fs::read_to_string(path)?)?;
    let mut st = AmplifierState::new(cfg.computational_fiber()?, cfg.amplifier_config()?)?;
    fixed_point_solve(&mut st)?;
    println!("iter  residual    P_s(0)/mW  P_s(L)/mW  P_p(L)/W");
    for h in &st.history {
        println!("{:>4}  {:<10.3e}  {:>9.3}  {:>9.3}  {:>8.4}", h.iteration, h.residual, 1e3 * h.p_s_in, 1e3 * h.p_s_out, h.p_p_out);
    }
    let a = energy_audit(&st)?;
    println!("pump lost {:.4} W = signal {:.4} W + heat {:.4} W (defect {:.2}%)", a.pump_lost, a.signal_gained, a.heat, 100.0 * a.relative_defect);
    let lens = state_lensing_report(&st)?;
    println!("core heating {:.3e} K, layers per shortest beat {:.1}", lens.delta_t_core, lens.layers_per_beat);
    Ok(())
}
