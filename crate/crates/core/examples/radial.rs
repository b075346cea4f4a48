//! Convex envelope of a radial energy `g(√(‖F‖² − 2 det F))`, a double well
//! in the distance to the conformal matrices.
//!
//! `cargo run --release --example radial`

use confrelax::energies::RadialProfile;
use confrelax::envelope::{dacorogna_radial_envelope, EnvelopeConfig};
use confrelax::Mat2;

fn main() -> confrelax::Result<()> {
    let g = RadialProfile::new("double_well", |r: f64| (r * r - 1.0).powi(2));
    let cfg = EnvelopeConfig { t_max: 10.0, ..EnvelopeConfig::default() };
    let env = dacorogna_radial_envelope(&g, &cfg)?;
    println!("pieces:");
    for s in &env.segments {
        println!("  [{:.6}, {:.6})  {:?}", s.t_lo, s.t_hi, s.kind);
    }
    for r in [0.0, 0.5, 1.0, 1.5, 2.0] {
        println!("r = {r:>4}: g = {:>10.6}, envelope = {:>10.6}", g.eval(r), env.eval(r));
    }
    let f = Mat2::new(1.0, 0.5, 0.0, 1.0);
    println!("shear F: W = {:.6}, relaxed = {:.6}", g.eval_matrix(&f), env.eval_matrix(&f));
    Ok(())
}
