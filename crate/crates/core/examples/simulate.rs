//! Many sources, few channels: compares the four scheduling policies on a
//! small two-class population.

use maoii::sim::{run, ClassSpec, Dynamics, PolicyId, SimConfig};
use maoii::SourceParams;

fn main() -> maoii::Result<()> {
    let classes = vec![
        ClassSpec {
            params: SourceParams::from_r(0.05, 10, 0.4)?,
            count: 5,
        },
        ClassSpec {
            params: SourceParams::from_r(0.3, 3, 0.4)?,
            count: 5,
        },
    ];
    for policy in PolicyId::ALL {
        let mut config = SimConfig::new(classes.clone(), policy, 20_000, 7);
        config.replications = 8;
        let result = run(&config)?;
        println!(
            "{:<12} M = {}  mean AoII {:.4} +/- {:.4}  per class {:.3?}",
            policy.as_str(),
            result.channels,
            result.mean_cost,
            result.ci95,
            result.class_means
        );
    }

    let mut config = SimConfig::new(classes, PolicyId::WipMaoii, 20_000, 7);
    config.replications = 8;
    config.dynamics = Dynamics::GroundTruth;
    let truth = run(&config)?;
    println!(
        "wip-maoii with full source simulation: {:.4} +/- {:.4}",
        truth.mean_cost, truth.ci95
    );
    Ok(())
}
