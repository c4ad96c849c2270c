//! Whittle indices for both metrics, checked against the intersection
//! oracle, and the CSV export.

use maoii::whittle::{
    whittle_aoi, whittle_intersection_oracle, whittle_maoii, whittle_maoii_limit, write_table_csv,
    WhittleTable,
};
use maoii::{Metric, SourceParams};

fn main() -> maoii::Result<()> {
    let params = SourceParams::from_r(0.3, 3, 0.4)?;
    for n in [1, 2, 5, 10] {
        let oracle = whittle_intersection_oracle(&params, n, Metric::Maoii)?;
        println!(
            "n = {n:>2}: W_aoi = {:>8.4}  W_maoii = {:.10}  oracle = {:.10}",
            whittle_aoi(params.rho(), n),
            whittle_maoii(&params, n)?,
            oracle
        );
    }
    println!("sup W_maoii = {:.10}", whittle_maoii_limit(&params)?);

    let table = WhittleTable::validated(params, Metric::Maoii, 1000, 1e-6)?;
    println!(
        "validated table: {} entries, {} substituted, saturates: {}",
        table.n_max(),
        table.substituted().len(),
        table.saturates()
    );

    write_table_csv(&params, 5, std::io::stdout().lock())
}
