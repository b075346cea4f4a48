//! Direct FE minimization on the unit disc for the two microstructure setups.
//!
//! cargo run --release --example microstructure -- exp 5 20000 [lbfgs|ncg]

use std::time::Instant;

use confrelax::energies::resolve;
use confrelax::envelope::{monotone_convex_envelope, EnvelopeConfig};
use confrelax::microsim::{apply_affine_bc, make_disc_mesh, minimize, quartiles, SimConfig, Solver};
use confrelax::Mat2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let which = args.first().map_or("exp", String::as_str);
    let level: usize = args.get(1).map_or(Ok(4), |s| s.parse())?;
    let max_iters: usize = args.get(2).map_or(Ok(20_000), |s| s.parse())?;
    let solver = match args.get(3).map(String::as_str) {
        Some("ncg") => Solver::Ncg,
        _ => Solver::Lbfgs { memory: 10 },
    };

    let (tag, f0) = match which {
        "cosh" => ("cosh{L=2}", Mat2::IDENTITY),
        _ => {
            let x0 = 12.0186f64;
            ("exp_hencky{k=0.11}", Mat2::diag(x0.sqrt(), 1.0 / x0.sqrt()))
        }
    };
    let e = resolve(tag)?;
    let env = monotone_convex_envelope(&e, &EnvelopeConfig::default())?;
    let t0 = f0.e11 / f0.e22;

    let mesh = make_disc_mesh(level);
    let mut field = apply_affine_bc(&mesh, &f0)?;
    let cfg = SimConfig { level, max_iters, solver, ..SimConfig::default() };
    let clock = Instant::now();
    let r = minimize(&e, &mesh, &mut field, &cfg)?;
    let area = r.mesh_area;
    println!("{tag} level {level}: {} nodes, {} triangles, area {area:.6}", r.nodes, r.triangles);
    println!(
        "  homogeneous {:.6}  relaxed bound {:.6}  final {:.6}",
        area * e.h(t0),
        area * env.eval(t0),
        r.final_energy
    );
    println!(
        "  status {:?} after {} iterations ({} restarts, {} inverted trials), |grad| {:.3e}, {:.2?}",
        r.status,
        r.iterations,
        r.restarts,
        r.inverted_trials,
        r.grad_norm,
        clock.elapsed()
    );
    println!("  {} accepted, {} backtracks", r.accepted, r.backtracks);
    if std::env::var_os("TRACE").is_some() {
        for (it, en) in r.energies.iter().step_by(10) {
            println!("    {it:>6} {en:.6}");
        }
    }
    if let Some((q1, q3)) = quartiles(&r.element_kk) {
        println!("  kk quartiles [{q1:.4}, {q3:.4}]");
    }
    Ok(())
}
