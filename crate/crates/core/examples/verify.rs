//! Runs the cross-check report on the bundled boundary grid.

use maoii::verify::{parse_grid, verify};

fn main() -> maoii::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/grids/boundary_grid.json").into());
    let report = verify(&parse_grid(&path)?)?;
    println!("{report}");
    Ok(())
}
