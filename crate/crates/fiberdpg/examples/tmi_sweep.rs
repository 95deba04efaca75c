//! Pump sweep of the TMI metric on a heated toy fiber.
//!
//! Each pump level runs two implicit heat steps; `M_TMI` is the time-averaged HOM share
//! at the fiber end.
//!
//! ```text
//! cargo run --release --example tmi_sweep
//! ```

use fiberdpg::amplifier::pump_sweep;
use fiberdpg::config::RunConfig;

fn main() -> fiberdpg::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/tmi_sweep_desk.toml");
    let cfg = RunConfig::from_toml(&std::fs::read_to_string(path)?)?;
    let sweep = pump_sweep(&cfg.computational_fiber()?, &cfg.amplifier_config()?, &cfg.amplifier.pump_sweep)?;
    println!("pump/W   M_TMI       max T/K    regime");
    for p in &sweep {
        println!("{:>6.1}   {:<10.3e}  {:<9.3e}  {}", p.pump_power, p.m_tmi, p.max_t, p.regime);
    }
    Ok(())
}
