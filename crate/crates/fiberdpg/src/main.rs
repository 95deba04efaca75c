use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fiberdpg::cli;

#[derive(Parser)]
#[command(name = "fiberdpg", about = "Envelope DPG solver for step-index fibers")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// print the summary as JSON
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// guided LP modes, cutoffs and beat lengths
    Modes,
    /// linear launch run with the configured outlet
    Propagate,
    /// coupled gain/heat fixed point
    Amplify,
    /// pump sweep of the TMI metric
    TmiSweep,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: invalid --threads {n}");
            return ExitCode::from(cli::EXIT_CONFIG as u8);
        }
    }
    let run = || {
        let cfg = cli::load_config(args.config.as_deref(), &args.out)?;
        match args.command {
            Command::Modes => cli::cli_modes(&cfg, &args.out),
            Command::Propagate => cli::cli_propagate(&cfg, &args.out),
            Command::Amplify => cli::cli_amplify(&cfg, &args.out),
            Command::TmiSweep => cli::cli_tmi_sweep(&cfg, &args.out),
        }
    };
    match run() {
        Ok(summary) => {
            if args.json {
                println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            } else {
                print_summary(&summary, "");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn print_summary(v: &serde_json::Value, indent: &str) {
    if let Some(map) = v.as_object() {
        for (k, x) in map {
            if x.is_object() || x.is_array() {
                println!("{indent}{k}:");
                print_summary(x, &format!("{indent}  "));
            } else {
                println!("{indent}{k}: {x}");
            }
        }
    } else if let Some(items) = v.as_array() {
        for x in items {
            if x.is_object() {
                println!("{indent}-");
                print_summary(x, &format!("{indent}  "));
            } else {
                println!("{indent}- {x}");
            }
        }
    }
}
