//! Separately convex and polyconvex grid envelopes against `C_m h`.
//!
//! cargo run --release --example oracle_agreement -- "cosh{L=2}" 3 200 30

use std::time::Instant;

use confrelax::energies::resolve;
use confrelax::envelope::{monotone_convex_envelope, EnvelopeConfig};
use confrelax::oracles::{
    compare_oracle_to_envelope, polyconvex_envelope_diag, sc_envelope_grid, symmetric_log_axis, GridFunction2D,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tag = args.first().map_or("exp_hencky{k=0.11}", String::as_str);
    let radius: f64 = args.get(1).map_or(Ok(4.0), |s| s.parse())?;
    let n_sc: usize = args.get(2).map_or(Ok(200), |s| s.parse())?;
    let n_pc: usize = args.get(3).map_or(Ok(30), |s| s.parse())?;

    let e = resolve(tag)?;
    let env = monotone_convex_envelope(&e, &EnvelopeConfig::default())?;

    let clock = Instant::now();
    let gf = GridFunction2D::sample(&e, &symmetric_log_axis(radius, n_sc)?)?;
    let sc = sc_envelope_grid(&gf, 1e-12, 2000)?;
    let cmp = compare_oracle_to_envelope(&sc.grid, &env)?;
    println!(
        "{tag} sc {n_sc}x{n_sc} on [e^-{radius}, e^{radius}]: {} sweeps (converged {}), {cmp}, {:.2?}",
        sc.sweeps,
        sc.converged,
        clock.elapsed()
    );

    let clock = Instant::now();
    let gf = GridFunction2D::sample(&e, &symmetric_log_axis(radius, n_pc)?)?;
    let pc = polyconvex_envelope_diag(&gf, 1e-10)?;
    let cmp = compare_oracle_to_envelope(&pc.grid, &env)?;
    let flagged = pc.boundary_flags.iter().filter(|&&f| f).count();
    println!(
        "{tag} polyconvex {n_pc}x{n_pc}: {cmp}, {flagged} flagged nodes, {:.2?}",
        clock.elapsed()
    );
    Ok(())
}
