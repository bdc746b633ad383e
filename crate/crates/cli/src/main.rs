use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vonmises_cli::{run, Command, Overrides, Resolution, RunConfig};

/// Blasius profile, Von Mises marching, decay fits and barrier certificates.
///
/// Exit status: 0 when every gate passes, 1 when a gate or a computation
/// fails, 2 on configuration or input/output errors.
#[derive(Debug, Parser)]
#[command(name = "vonmises", version)]
struct Args {
    /// config file; without one every setting takes its default
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (overrides [run] out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// grid and step preset (overrides [run] resolution)
    #[arg(long, value_enum)]
    resolution: Option<Resolution>,
    /// workflow to run (overrides [run] command)
    #[arg(long, value_enum)]
    command: Option<Command>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides { command: args.command, resolution: args.resolution, out: args.out };
    let cfg = match &args.config {
        Some(path) => RunConfig::from_file(path, &overrides),
        None => RunConfig::parse("", "<defaults>", std::path::Path::new("."), &overrides),
    };
    let result = cfg.and_then(|cfg| run(&cfg));
    match result {
        Ok(summary) => {
            for g in summary.failures() {
                eprintln!("FAIL {}: {}", g.name, g.detail);
            }
            let failed = summary.failures().count();
            println!(
                "{}: {} of {} gates passed, {} files, summary in {}",
                if failed == 0 { "ok" } else { "failed" },
                summary.gates.len() - failed,
                summary.gates.len(),
                summary.files.len(),
                "summary.json"
            );
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
