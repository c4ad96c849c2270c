//! Steady state of a single source that transmits once its ladder index
//! reaches a threshold.

use maoii::policy_eval::{
    avg_active_time, avg_aoi, avg_maoii_closed, avg_penalty_series, stationary_probability,
};
use maoii::{Metric, SourceParams};

fn main() -> maoii::Result<()> {
    let params = SourceParams::from_r(0.05, 10, 0.4)?;
    let rho = params.rho();

    let n = 3;
    let occupancy: Vec<String> = (1..=6)
        .map(|j| format!("{:.4}", stationary_probability(rho, n, j)))
        .collect();
    println!("u(1..6) with n = {n}: [{}]", occupancy.join(", "));

    println!(
        "{:>3} {:>10} {:>10} {:>10} {:>12}",
        "n", "active", "AoI", "MAoII", "MAoII series"
    );
    for n in [1, 2, 5, 10, 25] {
        let series = avg_penalty_series(&params, n, Metric::Maoii, 1e-12)?;
        println!(
            "{n:>3} {:>10.5} {:>10.5} {:>10.5} {:>12.5}",
            avg_active_time(rho, n),
            avg_aoi(rho, n),
            avg_maoii_closed(&params, n)?,
            series
        );
    }
    Ok(())
}
