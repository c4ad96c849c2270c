//! Command-line front end: `run`, `verify` and `table`.
//!
//! Exit codes: 0 ok, 1 run error (or failed checks), 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use maoii::experiment::{parse_scenario, run_experiment};
use maoii::sim::PolicyId;
use maoii::verify::{parse_grid, verify};
use maoii::whittle::{write_table_csv, WhittleTable};
use maoii::{Error, Metric, SourceParams};

#[derive(Parser)]
#[command(
    name = "maoii",
    version,
    about = "Whittle-index scheduling for the mean age of incorrect information"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario sweep and write `<name>.csv` and `<name>.json`.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (default: the scenario's `output`, else `results`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Restricts the sweep to these policies (comma separated).
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<PolicyId>>,
    },
    /// Cross-check closed forms on a parameter grid.
    Verify {
        #[arg(long)]
        grid: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the index table of one source as CSV.
    Table {
        /// Print only one metric (`n,W`); both by default.
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long = "n-states", short = 'N')]
        n_states: u32,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 20)]
        n_max: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_config() { 2 } else { 1 })
        }
    }
}

fn execute(command: Command) -> maoii::Result<ExitCode> {
    match command {
        Command::Run {
            scenario,
            out,
            seed,
            policies,
        } => {
            let mut scenario = parse_scenario(scenario)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            if let Some(policies) = policies {
                scenario.policies = policies;
            }
            let dir = out
                .or_else(|| scenario.output.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            let output = run_experiment(&scenario, &dir)?;
            for row in &output.rows {
                eprintln!(
                    "{:<12} N_u={:<4} M={:<3} mean={:.4} ci95={}",
                    row.policy,
                    row.n_users,
                    row.channels,
                    row.mean_cost,
                    row.ci95.map_or("-".into(), |c| format!("{c:.4}"))
                );
            }
            println!("{}", output.csv_path.display());
            println!("{}", output.json_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { grid, out } => {
            let grid = parse_grid(grid)?;
            let report = verify(&grid)?;
            println!("{report}");
            if let Some(path) = out {
                let json =
                    serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
                std::fs::write(path, json + "\n")?;
            }
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Table {
            metric,
            p,
            r,
            n_states,
            rho,
            n_max,
        } => {
            let params = SourceParams::make(p, r, n_states, rho)?;
            let stdout = std::io::stdout().lock();
            match metric {
                None => write_table_csv(&params, n_max, stdout)?,
                Some(metric) => {
                    let table = WhittleTable::build(params, metric, n_max)?;
                    let mut writer = csv::Writer::from_writer(stdout);
                    writer.write_record(["n", "W"])?;
                    for (n, w) in (1..).zip(table.indices()) {
                        writer.write_record([n.to_string(), w.to_string()])?;
                    }
                    writer.flush()?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
