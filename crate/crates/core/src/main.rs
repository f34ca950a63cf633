use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use secure_isac::experiment::{run_schemes, run_sweep, write_sweep_csv, SweepParam, SweepSpec};
use secure_isac::selfcheck::run_suite;
use secure_isac::{default_scenario, Error, Result, ScenarioConfig, SchemeId};

#[derive(Parser)]
#[command(name = "secure-isac", version, about = "Dual-UAV secure sensing and communication planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file; the built-in reference scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Seed for sampled quantities (the optimizers themselves are deterministic).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one or all schemes and write trajectory, rate, sensing and summary files.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "scs_proposed")]
        scheme: SchemeId,
        #[arg(long)]
        all_schemes: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-plan while varying one parameter; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sweep_param: SweepParam,
        /// Comma-separated values; may be empty.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        sweep_values: String,
        #[arg(long, default_value = "scs_proposed")]
        scheme: SchemeId,
        #[arg(long)]
        all_schemes: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Maximum sweep points in flight.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the randomized invariant checks and print one line per property.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Print the reference scenario as JSON.
    Defaults,
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    match &common.scenario {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(default_scenario()),
    }
}

fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::InvalidScenario(format!("bad sweep value `{t}`"))))
        .collect()
}

fn schemes(scheme: SchemeId, all: bool) -> Vec<SchemeId> {
    if all {
        SchemeId::ALL.to_vec()
    } else {
        vec![scheme]
    }
}

fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            common,
            scheme,
            all_schemes,
            out,
        } => {
            let config = load(&common)?;
            let summary = run_schemes(&config, &schemes(scheme, all_schemes), &out, common.seed)?;
            for s in &summary.schemes {
                match (&s.asr, &s.error) {
                    (Some(asr), _) => println!("{}: asr {asr:.6}", s.scheme),
                    (None, Some(e)) => eprintln!("{}: {e}", s.scheme),
                    _ => {}
                }
            }
            Ok(summary.status.exit_code() as u8)
        }
        Command::Sweep {
            common,
            sweep_param,
            sweep_values,
            scheme,
            all_schemes,
            out,
            jobs,
        } => {
            let config = load(&common)?;
            let spec = SweepSpec {
                param: sweep_param,
                values: parse_values(&sweep_values)?,
                schemes: schemes(scheme, all_schemes),
                seed: common.seed,
            };
            let rows = run_sweep(&config, &spec, jobs);
            std::fs::create_dir_all(&out)?;
            write_sweep_csv(&out.join("sweep.csv"), &rows)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            if failed > 0 {
                eprintln!("{failed} of {} sweep points did not finish", rows.len());
            }
            Ok(0)
        }
        Command::Validate { common } => {
            let config = load(&common)?;
            let checks = run_suite(&config, common.seed);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { 0 } else { 1 })
        }
        Command::Defaults => {
            println!("{}", default_scenario().to_json()?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
