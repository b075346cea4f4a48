//! Quasiconvexity verdicts for the exponentiated Hencky family across the
//! threshold k = 1/8.
//!
//! `cargo run --release --example classify`

use confrelax::convexity::{classify_all, default_grids};
use confrelax::energies::CatalogEnergy;

fn main() -> confrelax::Result<()> {
    let (grid, axis) = default_grids();
    println!("{:>8} {:>8} {:>10} {:>10} {:>8}  first convexity witness", "k", "h conv", "h monot", "g sep", "overall");
    for k in [0.05, 0.1, 0.11, 0.12, 0.124, 0.125, 0.13, 0.2] {
        let e = CatalogEnergy::ExpHencky { k }.energy()?;
        let v = classify_all(&e, &grid, &axis)?;
        println!(
            "{k:>8} {:>8} {:>10} {:>10} {:>8}  {:?}",
            v.h_convex,
            v.h_nondecreasing_on_1inf,
            v.g_separately_convex.map_or("-".into(), |b| b.to_string()),
            v.overall,
            v.convexity_witnesses.samples.first()
        );
    }
    Ok(())
}
