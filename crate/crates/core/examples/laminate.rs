//! Binodal region, largest gap, disc energies and laminate certificates.
//!
//! `cargo run --release --example laminate -- "cosh{L=2}"`

use confrelax::energies::resolve;
use confrelax::envelope::{monotone_convex_envelope, EnvelopeConfig};
use confrelax::relaxation::{disc_energies, laminate_certificate, max_gap, qw_eval};
use confrelax::Mat2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tag = std::env::args().nth(1).unwrap_or_else(|| "exp_hencky{k=0.11}".into());
    let e = resolve(&tag)?;
    let cfg = EnvelopeConfig::default();
    let env = monotone_convex_envelope(&e, &cfg)?;
    let gap = max_gap(&e, &env, &cfg)?;
    println!("{tag}: binodal {:?}", gap.binodal);
    println!("largest gap {:.8} at ratio {:.6}", gap.delta, gap.x0);

    let s = gap.x0.sqrt();
    let f0 = Mat2::diag(s, 1.0 / s);
    let (hom, rel) = disc_energies(&e, &env, &f0)?;
    println!("unit disc under F0 = diag(√x0, 1/√x0): homogeneous {hom:.6}, relaxed {rel:.6}");

    // QW only sees the distortion
    let g = (Mat2::rotation(0.4) * f0 * Mat2::rotation(-1.3)).scale(2.0);
    println!("QW(F0) = {:.9}, QW(2 R1 F0 R2) = {:.9}", qw_eval(&e, &env, &f0)?, qw_eval(&e, &env, &g)?);

    for t in [gap.x0, 0.5 * (1.0 + gap.x0)] {
        let c = laminate_certificate(&e, &env, t)?;
        println!(
            "t = {t:.6}: {:?} laminate, θ = {:.6} of ratio {:.6} and 1 − θ of ratio {:.6}",
            c.kind, c.theta, c.t1, c.t2
        );
        println!(
            "  mixed energy {:.10} vs C_m h {:.10}, rank-one residual {:.1e}",
            c.mixed_energy, c.envelope_value, c.rank_one_residual
        );
        println!("  phase 1 {:?}\n  phase 2 {:?}", c.phase1, c.phase2);
    }
    Ok(())
}
