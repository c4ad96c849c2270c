//! Monitor belief and the MAoII ladder for one source.
//!
//! Prints `pi^k`, the AoII distribution at a few ladder indices and how `b^j`
//! approaches its limit.

use maoii::metrics::{aoii_pmf, maoii_value_limit, MaoiiLadder, Penalty};
use maoii::source::{belief_update, pi_k, Belief};
use maoii::SourceParams;

fn main() -> maoii::Result<()> {
    let params = SourceParams::from_r(0.1, 8, 0.7)?;
    println!(
        "p = {:.2}, r = {:.2}, N = {}",
        params.p(),
        params.r(),
        params.n_states()
    );

    let mut belief = Belief::certain();
    for k in 0..6 {
        println!(
            "pi^{k} = {:.6} (closed form {:.6})",
            belief.value(),
            pi_k(&params, k)
        );
        belief = belief_update(&params, belief, false);
    }

    for j in [1, 3, 10] {
        let pmf = aoii_pmf(&params, j);
        let shown: Vec<String> = pmf.iter().take(5).map(|w| format!("{w:.4}")).collect();
        println!("P(AoII = k | j = {j}) for k = 0..: [{}]", shown.join(", "));
    }

    let ladder = MaoiiLadder::new(params, 200);
    let limit = maoii_value_limit(&params)?;
    for j in [1, 2, 5, 20, 50, 200] {
        println!(
            "b^{j:<3} = {:.6}   gap to limit {:.2e}",
            ladder.value(j),
            limit - ladder.value(j)
        );
    }
    Ok(())
}
