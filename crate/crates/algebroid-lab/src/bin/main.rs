use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use algebroid_lab::config::RunConfig;
use algebroid_lab::error::Error;
use algebroid_lab::fields::set_trunc_cap;
use algebroid_lab::report::{render, Format};
use algebroid_lab::scenario::run_scenario;

#[derive(Parser)]
#[command(name = "algebroid-lab", about = "Verification engine for secondary characteristic classes of trivialized Lie algebroids", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario from a JSON config and write the verification report.
    Run {
        /// Path to the JSON configuration.
        config: PathBuf,
        /// Scenario override: validate | secondary | crainic | example | lemma.
        #[arg(long)]
        scenario: Option<String>,
        /// Output format.
        #[arg(long, default_value = "json")]
        format: String,
        /// Output path (defaults to the config's `out`, then stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the reproducible random fixtures.
        #[arg(long)]
        seed: Option<u64>,
        /// Run independent checks on separate threads.
        #[arg(long)]
        parallel: bool,
    },
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.cmd {
        Cmd::Run { config, scenario, format, out, seed, parallel } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::config(format!("cannot read {}: {e}", config.display())))?;
            let cfg = RunConfig::from_json(&text)?;
            if let Some(cap) = cfg.trunc_cap {
                set_trunc_cap(cap);
            }
            if let Ok(cap) = std::env::var("ALGEBROID_LAB_TRUNC_CAP") {
                let cap: usize = cap
                    .parse()
                    .map_err(|_| Error::config("ALGEBROID_LAB_TRUNC_CAP must be an integer"))?;
                set_trunc_cap(cap);
            }
            let fmt: Format = format.parse()?;
            let started = std::time::Instant::now();
            let report = run_scenario(&cfg, scenario.as_deref(), seed, parallel)?;
            let elapsed = started.elapsed();
            let bytes = render(&report, fmt)?;
            let out_path = out.or_else(|| cfg.out.clone().map(PathBuf::from));
            match out_path {
                Some(p) => std::fs::write(&p, &bytes)
                    .map_err(|e| Error::config(format!("cannot write {}: {e}", p.display())))?,
                None => {
                    use std::io::Write;
                    std::io::stdout()
                        .write_all(&bytes)
                        .map_err(|e| Error::config(format!("cannot write report: {e}")))?;
                }
            }
            eprintln!(
                "{}: {} checks, {} in {:.1} ms",
                report.scenario,
                report.checks.len(),
                if report.pass { "all passed" } else { "FAILURES" },
                elapsed.as_secs_f64() * 1e3
            );
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
