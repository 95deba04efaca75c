//! Short LP01 run written as WGED1 binary dumps, read back and checked.
//!
//! ```text
//! cargo run --release --example field_dump -- /tmp/lp01
//! ```

use fiberdpg::boundary::{modal_impedance, PMLConfig, PmlMode};
use fiberdpg::dump::FieldDump;
use fiberdpg::fibermodes::{solve_modes, FiberConfig};
use fiberdpg::propagate::{propagate, PropagationSpec};

fn main() -> fiberdpg::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("lp01_dump"));
    std::fs::create_dir_all(&out)?;
    let mut fiber = FiberConfig::reference();
    fiber.r_clad = 3.0 * fiber.r_core;
    let k01 = solve_modes(&fiber)?[0].k_lp;
    let spec = PropagationSpec {
        fiber,
        length: 20.0,
        n_layers: 2,
        n_pml_layers: 0,
        p: 2,
        dp: 1,
        refinement: 0,
        alpha: 1e-4,
        boundary: PMLConfig { mode: PmlMode::Impedance, k_env_main: k01, k_env_pml: None, stretch: None, z_imp: Some(modal_impedance(fiber.k0(), k01)) },
        pml_impedance_end: false,
        launch_mode: "LP01".into(),
        launch_power: 1e-3,
    };
    let run = propagate(&spec)?;
    let names = ["Ex", "Ey", "Ez", "Hx", "Hy", "Hz"];
    for (file, physical) in [("envelope.wged", false), ("physical.wged", true)] {
        let dump = run.sample_grid([16, 16, 8], physical)?;
        let path = out.join(file);
        dump.write(&path, &names, if physical { "physical E, Z0·H" } else { "envelope E, Z0·H" })?;
        let back = FieldDump::read(&path)?;
        assert!(back.data.iter().zip(&dump.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        let peak = (0..back.data.len() / 2).map(|i| back.data[2 * i].hypot(back.data[2 * i + 1])).fold(0.0, f64::max);
        println!("{}: {:?} cells, {} bytes, max |component| {peak:.3e} V/m", path.display(), back.dims, std::fs::metadata(&path)?.len());
    }
    Ok(())
}
