//! Monotone-convex envelope of `h`: its pieces, both constructions, and a
//! JSON round trip.
//!
//! `cargo run --release --example envelope -- "exp_hencky{k=0.11}"`

use confrelax::energies::resolve;
use confrelax::envelope::{monotone_convex_envelope, reflection_extension_envelope, EnvelopeConfig, PiecewiseEnvelope};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tag = std::env::args().nth(1).unwrap_or_else(|| "exp_hencky{k=0.11}".into());
    let e = resolve(&tag)?;
    let cfg = EnvelopeConfig::default();
    let env = monotone_convex_envelope(&e, &cfg)?;
    let refl = reflection_extension_envelope(&e, &cfg)?;

    println!("{tag}: {} pieces, flags {:?}", env.segments.len(), env.flags);
    for s in env.pieces() {
        println!("  [{:.6}, {:.6})  {:?}", s.t_lo, s.t_hi, s.kind);
    }
    println!("  tail from {:.6}: {:?}", env.tail.t_lo, env.tail.kind);

    let back = PiecewiseEnvelope::from_json(&env.to_json()?)?;
    println!("{:>10} {:>14} {:>14} {:>14} {:>14}", "t", "h", "C_m h", "reflected", "from json");
    for t in [1.0, 2.0, 2.65363, 5.0, 12.0186, 35.4998, 100.0] {
        println!(
            "{t:>10} {:>14.9} {:>14.9} {:>14.9} {:>14.9}",
            e.h(t),
            env.eval(t),
            refl.eval(t),
            back.eval(t)
        );
    }
    Ok(())
}
