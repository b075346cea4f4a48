//! The catalog energies, a user-defined energy and a tabulated one, with the
//! representation check that their `h`, `Ψ` and `g` forms agree.
//!
//! `cargo run --example energies`

use confrelax::energies::{resolve, validate_rep, Energy, SampleSpec, TailGrowth};

fn main() -> confrelax::Result<()> {
    let spec = SampleSpec::default();
    let mut energies: Vec<Energy> = ["dev_hencky", "log_distortion_sq", "exp_hencky{k=0.11}", "cosh{L=2}", "svk_isochoric"]
        .into_iter()
        .map(resolve)
        .collect::<Result<_, _>>()?;
    // h(t) = (log t)⁴, given only through h
    energies.push(Energy::from_h("log_fourth", |t: f64| t.ln().powi(4)).with_growth(TailGrowth::Linear(0.0)));
    let ts: Vec<f64> = (0..=40).map(|i| 1.0 + 0.25 * i as f64).collect();
    let hs = ts.iter().map(|t| (t - 1.0).powi(2) / (1.0 + t)).collect();
    energies.push(Energy::from_table("table", ts, hs)?);

    println!("{:<22} {:>12} {:>12} {:>12}  representations", "energy", "h(2)", "Ψ(1.5)", "g(1, 3)");
    for e in &energies {
        let report = validate_rep(e, &spec)?;
        println!(
            "{:<22} {:>12.6} {:>12.6} {:>12.6}  {}",
            e.label(),
            e.h(2.0),
            e.psi(1.5),
            e.g(1.0, 3.0),
            if report.is_valid() {
                "agree".to_string()
            } else {
                // cosh overflows at the far corners of the sample square
                let mut kinds: Vec<_> = report.violations.iter().map(|v| format!("{:?}", v.identity)).collect();
                kinds.dedup();
                format!("{} violations: {}", report.violations.len(), kinds.join(", "))
            }
        );
    }
    Ok(())
}
