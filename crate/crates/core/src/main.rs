use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use odcf_sim::config::ScenarioConfig;
use odcf_sim::harness::{run_scenario, write_report, RunOptions, ScenarioReport};
use odcf_sim::oracle::{solve_pf, RateModel};
use odcf_sim::reproduce::{self, CASES};
use odcf_sim::{Protocol, SimError};

/// Exit code for unreadable or invalid input.
const EXIT_CONFIG: u8 = 1;
/// Exit code when a reproduced scenario misses its expected behaviour.
const EXIT_ACCEPTANCE: u8 = 2;

#[derive(Parser)]
#[command(name = "odcf-sim", version, about = "Slotted CSMA simulator with a proportional-fairness oracle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario config and write result files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Protocol to run; repeat for several, or `all`. Defaults to the config's.
        #[arg(long)]
        protocol: Vec<String>,
        /// Also write per-replication event logs.
        #[arg(long)]
        event_log: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run canned scenarios and check them against the expected behaviour.
    Reproduce {
        /// Scenario name, or `all`.
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Print the proportional-fair optimum of a scenario's topology as JSON.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Also write `<name>_oracle.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the canned scenarios.
    ListScenarios,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Seed of replication 0; replication i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = odcf_sim::config::DEFAULT_REPLICATIONS)]
    reps: usize,
    #[arg(long = "duration-s")]
    duration_s: Option<f64>,
    /// Run replications on all cores.
    #[arg(long)]
    parallel: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            reps: self.reps,
            seed: self.seed,
            duration_s: self.duration_s,
            parallel: self.parallel,
            ..RunOptions::default()
        }
    }
}

fn parse_protocols(names: &[String]) -> Result<Vec<Protocol>, SimError> {
    if names.iter().any(|n| n == "all") {
        return Ok(Protocol::ALL.to_vec());
    }
    names.iter().map(|n| n.parse()).collect()
}

fn print_report(report: &ScenarioReport) {
    println!(
        "{}: {} reps x {} s, RTS/CTS {}",
        report.name,
        report.reps,
        report.duration_s,
        if report.rts_cts { "on" } else { "off" }
    );
    if let Some(err) = &report.oracle_error {
        println!("  oracle unavailable: {err}");
    }
    for p in &report.protocols {
        let kbps: Vec<String> = p
            .goodputs_bps()
            .iter()
            .map(|g| format!("{:.0}", g / 1e3))
            .collect();
        println!(
            "  {:<9} aggregate {:>8.0} kb/s  jain {:.3}  sum-log {:.2}  flows kb/s [{}]",
            p.protocol.as_str(),
            p.aggregate_mean_bps / 1e3,
            p.jain_mean,
            p.sum_log_mean,
            kbps.join(", ")
        );
    }
}

fn write_all(reports: &[ScenarioReport], out: &Path) -> Result<(), SimError> {
    for r in reports {
        for path in write_report(r, out)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn execute(command: Command) -> Result<bool, SimError> {
    match command {
        Command::Run {
            config,
            protocol,
            event_log,
            common,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let opts = RunOptions {
                protocols: parse_protocols(&protocol)?,
                event_logs: event_log,
                ..common.options()
            };
            let report = run_scenario(&cfg, &opts)?;
            print_report(&report);
            write_all(std::slice::from_ref(&report), &common.out)?;
            Ok(true)
        }
        Command::Reproduce { name, common } => {
            let names: Vec<&str> = if name == "all" {
                CASES.iter().map(|c| c.name).collect()
            } else {
                vec![reproduce::case(&name)?.name]
            };
            let opts = common.options();
            let mut all_pass = true;
            for n in names {
                let case = reproduce::reproduce(n, &opts)?;
                print!("{case}");
                write_all(&case.reports, &common.out)?;
                all_pass &= case.passed();
            }
            Ok(all_pass)
        }
        Command::Oracle { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let topology = cfg.build_topology()?;
            let timing = cfg.timing();
            let solutions = [RateModel::Raw, RateModel::OverheadDiscounted]
                .into_iter()
                .map(|m| solve_pf(&topology, m, &timing))
                .collect::<Result<Vec<_>, _>>()?;
            let text = serde_json::to_string_pretty(&solutions)
                .map_err(|e| SimError::Config(e.to_string()))?;
            println!("{text}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let path = dir.join(format!("{}_oracle.json", cfg.name));
                std::fs::write(&path, text + "\n")?;
                eprintln!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::ListScenarios => {
            for c in CASES {
                println!("{:<14} V={:<5} {}", c.name, c.v, c.about);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_ACCEPTANCE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
