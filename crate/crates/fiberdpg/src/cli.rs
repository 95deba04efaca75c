//! Subcommand drivers behind the `fiberdpg` binary. Each writes its files into the output
//! directory and returns a JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::amplifier::{energy_audit, fixed_point_solve, pump_sweep, AmplifierState};
use crate::config::RunConfig;
use crate::dump::FieldDump;
use crate::error::{Error, Result};
use crate::fibermodes::{beat_lengths, solve_modes, ModeProfile};
use crate::propagate::propagate;
use crate::C64;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_NUMERIC,
    }
}

/// Reads a config file (or the defaults) and echoes the effective config into `out`.
pub fn load_config(path: Option<&Path>, out: &Path) -> Result<RunConfig> {
    let cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    fs::create_dir_all(out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
    fs::write(out.join("effective_config.toml"), cfg.to_toml())?;
    Ok(cfg)
}

fn write(path: &Path, s: String) -> Result<()> {
    fs::write(path, s)?;
    Ok(())
}

pub fn cli_modes(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let fiber = cfg.fiber();
    let modes = solve_modes(&fiber)?;
    let beats = beat_lengths(&modes)?;
    let mut csv = String::from("label,l,p,k_lp_per_um,zeta,chi,u,w,cutoff_v,delta_k_per_mm,beat_length_mm\n");
    for (i, m) in modes.iter().enumerate() {
        let (dk, lb) = if i == 0 { (String::new(), String::new()) } else { (beats[i - 1].delta_k.to_string(), beats[i - 1].beat_length.to_string()) };
        let cut = m.cutoff_v.map(|v| v.to_string()).unwrap_or_default();
        writeln!(csv, "{},{},{},{},{},{},{},{},{},{},{}", m.label(), m.l, m.p, m.k_lp, m.zeta, m.chi, m.u, m.w, cut, dk, lb).unwrap();
    }
    write(&out.join("modes.csv"), csv)?;
    let n = cfg.output.mode_grid;
    if n > 0 {
        let r = fiber.r_clad.min(3.0 * fiber.r_core);
        for m in &modes {
            let members = ModeProfile::members(*m, &fiber);
            let mut dump = FieldDump::zeros([n, n, 1], [-r, r, -r, r, 0.0, 0.0], members.len(), false)?;
            dump.fill(|x| members.iter().map(|p| C64::new(p.scalar(x[0], x[1]), 0.0)).collect());
            let names: Vec<String> = members.iter().map(|p| format!("{} {:?} {:?} scalar profile (1/µm)", m.label(), p.polarization, p.rotation)).collect();
            let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            dump.write(&out.join(format!("{}.wged", m.label())), &refs, "LP mode transverse profiles, unit L2 norm")?;
        }
    }
    Ok(json!({ "fiber": fiber, "v_number": fiber.v_number(), "modes": modes, "beats": beats }))
}

pub fn cli_propagate(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let spec = cfg.propagation_spec()?;
    let run = propagate(&spec)?;
    let names = ["Re/Im E_x (V/m)", "Re/Im E_y (V/m)", "Re/Im E_z (V/m)", "Re/Im Z0 H_x (V/m)", "Re/Im Z0 H_y (V/m)", "Re/Im Z0 H_z (V/m)"];
    if cfg.output.field_dumps {
        run.sample_grid(cfg.output.grid, false)?.write(&out.join("envelope.wged"), &names, "envelope fields, exp(-i k_env z) factored out")?;
        run.sample_grid(cfg.output.grid, true)?.write(&out.join("physical.wged"), &names, "physical fields")?;
    }
    let power = run.power_profile(cfg.output.power_stations)?;
    let mut csv = String::from("z_um,total_w");
    for l in &power[0].modal.labels {
        write!(csv, ",{l}_w").unwrap();
    }
    csv.push('\n');
    for s in &power {
        write!(csv, "{},{}", s.z, s.total).unwrap();
        for p in &s.modal.powers {
            write!(csv, ",{p}").unwrap();
        }
        csv.push('\n');
    }
    write(&out.join("power.csv"), csv)?;
    let report = if spec.launch_power > 0.0 { run.pml_report(cfg.output.pml_samples)? } else { None };
    if let Some(r) = &report {
        let mut csv = String::from("z_um,amplitude,f_um\n");
        for (z, a, f) in &r.samples {
            writeln!(csv, "{z},{a},{f}").unwrap();
        }
        write(&out.join("pml_decay.csv"), csv)?;
    }
    Ok(json!({
        "stats": run.solution.stats,
        "launched": run.launched,
        "boundary": spec.boundary,
        "power_in": power.first().map(|s| s.total),
        "power_out": power.last().map(|s| s.total),
        "pml": report.as_ref().map(|r| json!({
            "fitted_slope": r.fitted_slope,
            "predicted_slope": r.predicted_slope,
            "relative_error": r.relative_error,
            "swr": r.swr,
        })),
    }))
}

pub fn cli_amplify(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let mut state = AmplifierState::new(cfg.computational_fiber()?, cfg.amplifier_config()?)?;
    let result = fixed_point_solve(&mut state);
    // logs are kept on non-convergence
    let mut csv = String::from("iteration,time_s,residual,p_s_in_w,p_s_out_w,p_p_out_w,max_t_k\n");
    for h in &state.history {
        writeln!(csv, "{},{},{},{},{},{},{}", h.iteration, h.time, h.residual, h.p_s_in, h.p_s_out, h.p_p_out, h.max_t).unwrap();
    }
    write(&out.join("iterations.csv"), csv)?;
    if let Some(sol) = &state.solution {
        let basis = crate::diagnostics::ModeBasis::new(&state.modes, &state.fiber, state.quadrature.clone())?;
        let pump = state.pump.power();
        let mut csv = String::from("z_um,signal_w,pump_w");
        for m in &state.modes {
            write!(csv, ",{}_w", m.label()).unwrap();
        }
        csv.push('\n');
        for (i, &z) in state.stations.iter().enumerate() {
            let zz = z.min(state.mesh.length() * (1.0 - 1e-12));
            let mp = crate::diagnostics::project_modes(sol, zz, &basis)?;
            write!(csv, "{z},{},{}", state.signal_power(sol, zz)?, pump[i]).unwrap();
            for p in &mp.powers {
                write!(csv, ",{p}").unwrap();
            }
            csv.push('\n');
        }
        write(&out.join("modal_power.csv"), csv)?;
    }
    result?;
    let audit = energy_audit(&state).ok();
    let last = state.history.last().unwrap();
    Ok(json!({
        "iterations": state.history.len(),
        "converged": state.converged,
        "p_s_in": last.p_s_in,
        "p_s_out": last.p_s_out,
        "p_p_out": last.p_p_out,
        "max_t": last.max_t,
        "energy_audit": audit,
    }))
}

pub fn cli_tmi_sweep(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let pumps = &cfg.amplifier.pump_sweep;
    if pumps.is_empty() {
        return Err(Error::Config("amplifier.pump_sweep needs at least one pump power (W)".into()));
    }
    let points = pump_sweep(&cfg.computational_fiber()?, &cfg.amplifier_config()?, pumps)?;
    let mut csv = String::from("pump_w,m_tmi,threshold_flag,regime,max_t_k\n");
    let mut series = String::from("pump_w,time_s,max_t_k,p_s_out_w,hom_fraction\n");
    for p in &points {
        writeln!(csv, "{},{},{},{},{}", p.pump_power, p.m_tmi, p.threshold_flag, p.regime, p.max_t).unwrap();
        for r in &p.records {
            writeln!(series, "{},{},{},{},{}", p.pump_power, r.time, r.max_t, r.p_s_out, r.modal.hom_fraction()?).unwrap();
        }
    }
    write(&out.join("tmi_sweep.csv"), csv)?;
    write(&out.join("tmi_series.csv"), series)?;
    Ok(json!({ "points": points.iter().map(|p| json!({
        "pump_power": p.pump_power, "m_tmi": p.m_tmi, "threshold_flag": p.threshold_flag, "regime": p.regime, "max_t": p.max_t,
    })).collect::<Vec<_>>() }))
}
