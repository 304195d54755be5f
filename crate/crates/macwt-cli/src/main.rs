//! `macwt`: run one scenario file and emit its artifacts.
//!
//! One subcommand per mode; the scenario's own `mode` field must agree with
//! the subcommand, so a file never silently runs as something else. Exit
//! codes: 0 success, 2 scenario validation, 3 enumeration guard, 4 internal.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use macwt_cli::scenario::{load_scenario, Mode};
use macwt_cli::runner::run;

#[derive(Parser)]
#[command(name = "macwt", version, about = "Exact wiretap-MAC experiments from scenario files")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Secrecy and capacity region polygons over an input grid
    Region(ModeArgs),
    /// Keyed-rate ramp schedule for one operating point
    Ramp(ModeArgs),
    /// Deterministic slot-protocol run with the key ledger
    Protocol(ModeArgs),
    /// Exact leakage audits (one-time pad, single slot, chained slots)
    #[command(name = "leakage-audit")]
    LeakageAudit(ModeArgs),
    /// Block-fading Gaussian run with the ergodic report
    Fading(ModeArgs),
}

#[derive(Args)]
struct ModeArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (overrides the scenario's out_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon override, in slots
    #[arg(long)]
    horizon: Option<u64>,
}

impl Cmd {
    fn mode(&self) -> Mode {
        match self {
            Cmd::Region(_) => Mode::Region,
            Cmd::Ramp(_) => Mode::Ramp,
            Cmd::Protocol(_) => Mode::Protocol,
            Cmd::LeakageAudit(_) => Mode::LeakageAudit,
            Cmd::Fading(_) => Mode::Fading,
        }
    }

    fn args(&self) -> &ModeArgs {
        match self {
            Cmd::Region(a) | Cmd::Ramp(a) | Cmd::Protocol(a) | Cmd::LeakageAudit(a)
            | Cmd::Fading(a) => a,
        }
    }
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_CAPACITY_GUARD: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn classify(e: &macwt::Error) -> (u8, &'static str) {
    match e {
        macwt::Error::InvalidModel(_) | macwt::Error::InvalidArgument(_) => {
            (EXIT_VALIDATION, "validation")
        }
        macwt::Error::CapacityExceeded { .. } => (EXIT_CAPACITY_GUARD, "capacity-guard"),
        _ => (EXIT_INTERNAL, "internal"),
    }
}

fn fail(code: u8, kind: &str, message: String) -> ExitCode {
    let record = serde_json::json!({ "exit": code, "kind": kind, "error": message });
    eprintln!("{record}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.cmd.args();

    // everything up to a runnable scenario is a validation failure
    let scenario = match load_scenario(&args.scenario) {
        Ok(sc) => sc,
        Err(e) => return fail(EXIT_VALIDATION, "validation", e.to_string()),
    };
    if scenario.mode != cli.cmd.mode() {
        return fail(
            EXIT_VALIDATION,
            "validation",
            format!(
                "scenario mode is {} but the {} subcommand was invoked",
                scenario.mode.name(),
                cli.cmd.mode().name()
            ),
        );
    }
    let scenario = scenario.with_overrides(args.seed, args.horizon);
    if let Err(e) = scenario.validate() {
        return fail(EXIT_VALIDATION, "validation", e.to_string());
    }
    let out_dir = match args.out.clone().or_else(|| scenario.out_dir.clone()) {
        Some(d) => d,
        None => {
            return fail(
                EXIT_VALIDATION,
                "validation",
                "no output directory: pass --out or set \"out_dir\" in the scenario".into(),
            )
        }
    };

    match run(&scenario, &out_dir) {
        Ok(outcome) => {
            for rec in &outcome.outputs {
                println!("wrote {}", outcome.out_dir.join(&rec.file).display());
            }
            println!("wrote {}", outcome.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (code, kind) = classify(&e);
            fail(code, kind, e.to_string())
        }
    }
}
