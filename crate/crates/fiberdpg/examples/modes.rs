//! Guided LP modes of the reference fiber with cutoffs and beat lengths.
//!
//! ```text
//! cargo run --example modes
//! ```

use fiberdpg::fibermodes::{beat_lengths, cutoff_v, solve_modes, FiberConfig};

fn main() -> fiberdpg::Result<()> {
    let fiber = FiberConfig::reference();
    println!("V = {:.4}, NA = {:.5}", fiber.v_number(), fiber.na());
    let modes = solve_modes(&fiber)?;
    println!("{:<6} {:>10} {:>10} {:>10} {:>8}", "mode", "k_lp/µm⁻¹", "u", "w", "V_c");
    for m in &modes {
        let vc = m.cutoff_v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        println!("{:<6} {:>10.6} {:>10.5} {:>10.5} {:>8}", m.label(), m.k_lp, m.u, m.w, vc);
    }
    for (m, b) in modes[1..].iter().zip(beat_lengths(&modes)?) {
        println!("LP01-{}: Δk = {:.4} mm⁻¹, beat length {:.4} mm ({:.0} wavelengths)", m.label(), b.delta_k, b.beat_length, b.wavelengths_per_beat);
    }
    // first few cutoffs beyond the guided set
    println!("V_c(LP31) = {:.3}, V_c(LP12) = {:.3}", cutoff_v(3, 1).unwrap(), cutoff_v(1, 2).unwrap());
    Ok(())
}
