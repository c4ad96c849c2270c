//! Solves the single-source relaxed problem by relative value iteration and
//! recovers the indices by bisection on the transmission charge.

use maoii::mdp::{indexability_scan, relative_value_iteration, whittle_search, DualMdpSpec};
use maoii::whittle::whittle_closed;
use maoii::{Metric, SourceParams};

fn main() -> maoii::Result<()> {
    let params = SourceParams::from_r(0.1, 2, 0.5)?;

    let solution = relative_value_iteration(&DualMdpSpec::new(params, Metric::Maoii, 1.0))?;
    println!(
        "charge 1.0: gain {:.6}, threshold {}, {} sweeps",
        solution.gain,
        solution.threshold()?,
        solution.iterations
    );

    for metric in [Metric::Aoi, Metric::Maoii] {
        for n in 1..=4 {
            let searched = whittle_search(&params, n, metric, 1e-4)?;
            let closed = whittle_closed(&params, metric, n)?;
            println!("{metric:>5} n = {n}: bisection {searched:.5}, closed form {closed:.5}");
        }
    }

    let charges = [0.0, 0.2, 0.5, 1.0, 2.0, 5.0];
    let report = indexability_scan(&params, Metric::Maoii, &charges, 1000)?;
    for point in &report.points {
        let threshold = point.threshold.map_or("-".to_string(), |t| t.to_string());
        println!("W = {:>4}: threshold {threshold}", point.charge);
    }
    println!("indexable on this grid: {}", report.passed());
    Ok(())
}
