//! Runs a bundled scenario at a reduced horizon and prints the CSV table.
//!
//! `cargo run --release --example experiment -- scenarios/scenario2.json`

use maoii::experiment::{parse_scenario, run_rows, write_csv};

fn main() -> maoii::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/scenario2.json").into());
    let mut scenario = parse_scenario(&path)?;
    // keep the demo quick
    scenario.horizon = 20_000;
    scenario.warmup = 2_000;
    scenario.replications = 5;
    scenario.n_users = vec![5, 10];

    let rows = run_rows(&scenario)?;
    write_csv(&rows, std::io::stdout().lock())
}
