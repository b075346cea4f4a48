//! Randomized invariants across the modules.

use confrelax::energies::{resolve, CatalogEnergy, Energy, TailGrowth};
use confrelax::envelope::{
    constant_convex_envelope, monotone_convex_envelope, reflection_extension_envelope, EnvelopeConfig,
    PiecewiseEnvelope,
};
use confrelax::grid::LogGrid;
use confrelax::kinematics::{
    dev_log_stretch_norm_sq, k_from_kk, kk_from_k, linear_distortion, outer_distortion, singular_values,
};
use confrelax::microsim::{apply_affine_bc, energy_gradient, make_disc_mesh, minimize, total_energy, NodalField, SimConfig};
use confrelax::oracles::{interior_mask, sc_envelope_grid, sweep_once, symmetric_log_axis, GridFunction2D};
use confrelax::relaxation::{disc_energies, laminate_certificate, max_gap, qw_eval};
use confrelax::Mat2;
use proptest::prelude::*;

const CATALOG: [&str; 6] = [
    "dev_hencky",
    "log_distortion_sq",
    "exp_hencky{k=0.11}",
    "exp_hencky{k=0.125}",
    "cosh{L=2}",
    "svk_isochoric",
];

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    LogGrid::new(lo, hi, n).unwrap().points()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Matrices with det > 0 and entries in [−3, 3], away from singular.
fn gl_plus() -> impl Strategy<Value = Mat2> {
    prop::array::uniform4(-3.0..3.0f64)
        .prop_map(|[a, b, c, d]| {
            let f = Mat2::new(a, b, c, d);
            if f.det() < 0.0 {
                Mat2::new(c, d, a, b)
            } else {
                f
            }
        })
        .prop_filter("nearly singular", |f| f.det() > 1e-2 * f.norm_sq())
}

fn angle() -> impl Strategy<Value = f64> {
    0.0..std::f64::consts::TAU
}

fn envelope(tag: &str) -> (Energy, PiecewiseEnvelope) {
    let e = resolve(tag).unwrap();
    let env = monotone_convex_envelope(&e, &EnvelopeConfig::default()).unwrap();
    (e, env)
}

/// Eigenvalues of the symmetric matrix `FᵀF` by one Jacobi rotation.
fn jacobi_eigen(f: &Mat2) -> (f64, f64) {
    let c = f.transpose() * *f;
    let theta = 0.5 * (2.0 * c.e12).atan2(c.e11 - c.e22);
    let (s, co) = theta.sin_cos();
    let r = Mat2::new(co, -s, s, co);
    let d = r.transpose() * c * r;
    (d.e11.max(d.e22), d.e11.min(d.e22))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn singular_values_reproduce_det_and_norm(f in gl_plus()) {
        let sv = singular_values(&f).unwrap();
        prop_assert!(rel(sv.lambda_max * sv.lambda_min, f.det()) < 1e-10);
        prop_assert!(rel(sv.lambda_max.powi(2) + sv.lambda_min.powi(2), f.norm_sq()) < 1e-10);
    }

    #[test]
    fn distortions_are_conformally_invariant(f in gl_plus(), a in 0.1..10.0f64, r1 in angle(), r2 in angle()) {
        let g = (Mat2::rotation(r1) * f * Mat2::rotation(r2)).scale(a);
        prop_assert!(rel(outer_distortion(&g).unwrap(), outer_distortion(&f).unwrap()) < 1e-10);
        prop_assert!(rel(linear_distortion(&g).unwrap(), linear_distortion(&f).unwrap()) < 1e-10);
    }

    #[test]
    fn distortion_round_trip(log_kk in 0.0..(1e6f64).ln()) {
        let kk = log_kk.exp();
        prop_assert!(rel(kk_from_k(k_from_kk(kk).unwrap()).unwrap(), kk) < 1e-10);
    }

    #[test]
    fn dev_log_norm_matches_matrix_log(f in gl_plus()) {
        // log U has eigenvalues ½ log μ for the eigenvalues μ of FᵀF
        let (mu1, mu2) = jacobi_eigen(&f);
        let (l1, l2) = (0.5 * mu1.ln(), 0.5 * mu2.ln());
        let m = 0.5 * (l1 + l2);
        let oracle = (l1 - m).powi(2) + (l2 - m).powi(2);
        let v = dev_log_stretch_norm_sq(&f).unwrap();
        prop_assert!((v - oracle).abs() <= 1e-8 * oracle.max(1.0), "{} vs {}", v, oracle);
    }

    #[test]
    fn representations_agree(log_t in 0.0..(1e4f64).ln(), which in 0..CATALOG.len()) {
        let e = resolve(CATALOG[which]).unwrap();
        let t = log_t.exp();
        // cosh overflows past moderate ratios
        let Ok(h) = e.h_eval(t) else { return Ok(()) };
        prop_assert!(rel(e.psi_eval(0.5 * (t + 1.0 / t)).unwrap(), h) < 1e-10 || h.abs() < 1e-300);
        prop_assert!(rel(e.g(t, 1.0), h) < 1e-10 || h.abs() < 1e-300);
        // the symmetric extension through the Ψ path
        let by_kk = e.eval_by_kk(&Mat2::diag(1.0 / t, 1.0)).unwrap();
        prop_assert!(rel(by_kk, h) < 1e-10 || h.abs() < 1e-300);
    }

    #[test]
    fn dev_hencky_is_twice_dev_log_norm(f in gl_plus()) {
        let e = resolve("dev_hencky").unwrap();
        let w = e.eval_energy(&f).unwrap();
        prop_assert!(rel(w, 2.0 * dev_log_stretch_norm_sq(&f).unwrap()) < 1e-10 || w < 1e-300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn qw_is_conformally_invariant(f in gl_plus(), a in 0.1..10.0f64, r1 in angle(), r2 in angle(), which in 0..CATALOG.len()) {
        let (e, env) = envelope(CATALOG[which]);
        let g = (Mat2::rotation(r1) * f * Mat2::rotation(r2)).scale(a);
        let (q, p) = (qw_eval(&e, &env, &g).unwrap(), qw_eval(&e, &env, &f).unwrap());
        prop_assert!(rel(q, p) < 1e-10 || p.abs() < 1e-12, "{} vs {}", q, p);
    }

    #[test]
    fn relaxation_ordering(f in gl_plus(), which in 0..CATALOG.len()) {
        let (e, env) = envelope(CATALOG[which]);
        let c = constant_convex_envelope(&e, &EnvelopeConfig::default()).unwrap();
        let q = qw_eval(&e, &env, &f).unwrap();
        let w = e.eval_energy(&f).unwrap();
        let slack = 1e-12 * w.abs().max(1.0);
        prop_assert!(c <= q + slack && q <= w + slack, "{} {} {}", c, q, w);
    }

    #[test]
    fn sublinear_energies_relax_to_their_minimum(f in gl_plus(), which in 0..2usize) {
        let (e, env) = envelope(CATALOG[which]);
        let (_, relaxed) = disc_energies(&e, &env, &f).unwrap();
        prop_assert!((relaxed - std::f64::consts::PI * e.psi(1.0)).abs() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certificates_are_optimal_in_the_binodal(u in 0.0..1.0f64, which in 0..3usize) {
        let (e, env) = envelope(["exp_hencky{k=0.11}", "exp_hencky{k=0.08}", "cosh{L=2}"][which]);
        let gap = max_gap(&e, &env, &EnvelopeConfig::default()).unwrap();
        let iv = gap.binodal[0];
        let hi = if iv.hi.is_finite() { iv.hi } else { 1e3 };
        let t = iv.lo + (hi - iv.lo) * (0.001 + 0.998 * u);
        let c = laminate_certificate(&e, &env, t).unwrap();
        prop_assert!((c.mixed_energy - env.eval(t)).abs() <= 1e-9 * env.scale());
        prop_assert!(c.mixed_energy < e.h(t));
        prop_assert!(c.rank_one_residual <= 1e-12 * c.phase1.max_abs().max(c.phase2.max_abs()).max(1.0));
    }

    #[test]
    fn envelope_is_idempotent_and_sandwiched(which in 0..CATALOG.len()) {
        let (e, env) = envelope(CATALOG[which]);
        let cfg = EnvelopeConfig::default();
        let c = constant_convex_envelope(&e, &cfg).unwrap();
        let scale = env.scale();
        let again = {
            let inner = env.clone();
            let twice = Energy::from_h("envelope", move |t| inner.eval(t)).with_growth(e.growth());
            monotone_convex_envelope(&twice, &cfg).unwrap()
        };
        for t in log_space(1.0, cfg.t_max, 1000).into_iter().filter(|&t| e.h(t) < 1e100) {
            let v = env.eval(t);
            prop_assert!(c <= v + 1e-12 * scale && v <= e.h(t) + 1e-12 * scale.max(e.h(t).abs()));
            prop_assert!((again.eval(t) - v).abs() <= 1e-9 * scale, "t = {}", t);
        }
    }
}

/// `a ln²t + b sin(c ln t) + d |ln t − p| + s (t − 1)²`: smooth pieces with
/// a kink, bounded below, superlinear when `s > 0`.
fn test_function() -> impl Strategy<Value = (f64, f64, f64, f64, f64, f64)> {
    (0.0..1.0f64, 0.0..0.5f64, 0.5..6.0f64, 0.0..0.5f64, 0.0..3.0f64, 0.0..0.01f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn routes_agree_on_random_functions((a, b, c, d, p, s) in test_function()) {
        let h = move |t: f64| {
            let l = t.ln();
            a * l * l + b * (c * l).sin() + d * (l - p).abs() + s * (t - 1.0).powi(2)
        };
        let growth = if s > 0.0 { TailGrowth::Superlinear } else { TailGrowth::Linear(0.0) };
        let e = Energy::from_h("random", h).with_growth(growth);
        let cfg = EnvelopeConfig { t_max: 100.0, ..EnvelopeConfig::default() };
        let flat = monotone_convex_envelope(&e, &cfg).unwrap();
        let refl = reflection_extension_envelope(&e, &cfg).unwrap();
        let scale = flat.scale().max(refl.scale());
        for t in log_space(1.0, cfg.t_max, 500) {
            prop_assert!((flat.eval(t) - refl.eval(t)).abs() <= 1e-8 * scale, "t = {}", t);
            prop_assert!(flat.eval(t) <= h(t) + 1e-12 * scale);
        }
    }

    #[test]
    fn refined_segments_are_double_tangents(k in 0.07..0.12f64) {
        let e = CatalogEnergy::ExpHencky { k }.energy().unwrap();
        let env = monotone_convex_envelope(&e, &EnvelopeConfig::default()).unwrap();
        let segs = env.affine_segments();
        prop_assert!(!segs.is_empty());
        for (t1, t2, a, s, refined) in segs {
            prop_assert!(refined);
            for t in [t1, t2] {
                prop_assert!(rel(e.h(t), a + s * t) < 1e-8, "touch at {}", t);
                prop_assert!(rel(e.dh(t), s) < 1e-6, "slope at {}", t);
            }
        }
    }

    #[test]
    fn sweeps_are_monotone_and_order_preserving(
        base in prop::collection::vec(0.0..5.0f64, 144),
        bump in prop::collection::vec(0.0..1.0f64, 144),
    ) {
        let axis = log_space(0.5, 2.0, 12);
        let f = GridFunction2D::new(axis.clone(), axis.clone(), base.clone()).unwrap();
        let g_vals: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let g = GridFunction2D::new(axis.clone(), axis, g_vals).unwrap();
        let (sf, sg) = (sweep_once(&f), sweep_once(&g));
        for k in 0..144 {
            prop_assert!(sf.values[k] <= f.values[k] + 1e-12);
            prop_assert!(sf.values[k] <= sg.values[k] + 1e-12);
        }
    }
}

#[test]
fn criteria_survive_scaling_and_shifts() {
    use confrelax::convexity::classify_all;
    let grid = LogGrid::new(1.0, 1e3, 2000).unwrap();
    let axis = LogGrid::new(0.1, 10.0, 60).unwrap();
    for tag in ["exp_hencky{k=0.11}", "exp_hencky{k=0.2}", "svk_isochoric"] {
        let e = resolve(tag).unwrap();
        let base = classify_all(&e, &grid, &axis).unwrap();
        for (a, b) in [(0.01, -3.0), (7.5, 100.0)] {
            let inner = e.clone();
            let scaled = Energy::from_h("scaled", move |t| a * inner.h(t) + b).with_growth(e.growth());
            let v = classify_all(&scaled, &grid, &axis).unwrap();
            assert_eq!(v.overall, base.overall, "{tag} scaled by {a}, shifted by {b}");
            assert_eq!(v.g_separately_convex, base.g_separately_convex);
        }
    }
}

#[test]
fn sc_envelope_depends_only_on_the_ratio() {
    let (e, env) = envelope("exp_hencky{k=0.11}");
    let gf = GridFunction2D::sample(&e, &symmetric_log_axis(4.0, 120).unwrap()).unwrap();
    let sc = sc_envelope_grid(&gf, 1e-12, 500).unwrap();
    let mask = interior_mask(&gf, &env).unwrap();
    let n = gf.nx();
    // log-uniform grid: equal index offsets mean equal ratios
    for offset in 0..n as isize {
        let vals: Vec<f64> = (0..n as isize)
            .filter_map(|iy| {
                let ix = iy + offset;
                (ix < n as isize && mask[iy as usize * n + ix as usize]).then(|| sc.grid.at(ix as usize, iy as usize))
            })
            .collect();
        if let (Some(lo), Some(hi)) = (
            vals.iter().cloned().reduce(f64::min),
            vals.iter().cloned().reduce(f64::max),
        ) {
            assert!(hi - lo <= 5e-3, "offset {offset}: spread {}", hi - lo);
        }
    }
}

fn random_state(mesh: &confrelax::microsim::Mesh, f0: &Mat2, seed: u64, amp: f64) -> NodalField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut field = apply_affine_bc(mesh, f0).unwrap();
    let h = mesh.min_edge();
    for (p, &b) in field.positions.iter_mut().zip(&mesh.boundary_mask) {
        if !b {
            p[0] += amp * h * rng.gen_range(-1.0..1.0);
            p[1] += amp * h * rng.gen_range(-1.0..1.0);
        }
    }
    field
}

#[test]
fn assembled_gradient_matches_differences() {
    use rand::{Rng, SeedableRng};
    let mesh = make_disc_mesh(2);
    let s = 3.0f64.sqrt();
    for (tag, f0) in [("exp_hencky{k=0.11}", Mat2::diag(s, 1.0 / s)), ("cosh{L=2}", Mat2::IDENTITY), ("svk_isochoric", Mat2::new(1.0, 0.3, 0.0, 1.0))] {
        let e = resolve(tag).unwrap();
        for seed in 0..3 {
            let field = random_state(&mesh, &f0, seed, 0.2);
            let grad = energy_gradient(&e, &mesh, &field).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + seed);
            let interior: Vec<usize> = (0..mesh.nodes.len()).filter(|&i| !mesh.boundary_mask[i]).collect();
            for _ in 0..20 {
                let node = interior[rng.gen_range(0..interior.len())];
                let axis = rng.gen_range(0..2);
                let step = 1e-6;
                let mut plus = field.clone();
                plus.positions[node][axis] += step;
                let mut minus = field.clone();
                minus.positions[node][axis] -= step;
                let fd = (total_energy(&e, &mesh, &plus).unwrap() - total_energy(&e, &mesh, &minus).unwrap()) / (2.0 * step);
                let g = grad[node][axis];
                assert!((fd - g).abs() <= 1e-5 * g.abs().max(1e-3), "{tag} seed {seed}: {fd} vs {g}");
            }
        }
    }
}

#[test]
fn assembly_is_frame_invariant() {
    let mesh = make_disc_mesh(3);
    let e = resolve("exp_hencky{k=0.11}").unwrap();
    let field = random_state(&mesh, &Mat2::diag(2.0, 0.5), 5, 0.1);
    let w = total_energy(&e, &mesh, &field).unwrap();
    assert!(w.is_finite());
    for (a, angle) in [(0.3, 1.0), (4.0, -2.5)] {
        let r = Mat2::rotation(angle).scale(a);
        let moved = NodalField {
            positions: field.positions.iter().map(|&p| r.apply(p)).collect(),
        };
        let v = total_energy(&e, &mesh, &moved).unwrap();
        assert!(rel(v, w) < 1e-10, "{v} vs {w}");
    }
}

#[test]
fn runs_are_bracketed_by_the_relaxation() {
    let mesh = make_disc_mesh(3);
    let area = mesh.area();
    let s = 12.0186f64.sqrt();
    for (tag, f0) in [("exp_hencky{k=0.11}", Mat2::diag(s, 1.0 / s)), ("cosh{L=2}", Mat2::IDENTITY)] {
        let (e, env) = envelope(tag);
        let mut field = apply_affine_bc(&mesh, &f0).unwrap();
        let cfg = SimConfig { level: 3, max_iters: 3000, ..SimConfig::default() };
        let r = minimize(&e, &mesh, &mut field, &cfg).unwrap();
        let lower = area * qw_eval(&e, &env, &f0).unwrap();
        let upper = area * e.eval_energy(&f0).unwrap();
        assert!(lower <= r.final_energy && r.final_energy <= upper + 1e-9, "{tag}: {lower} {} {upper}", r.final_energy);
        assert!(r.energies.windows(2).all(|w| w[1].1 <= w[0].1));
    }
}

#[test]
fn envelope_json_round_trip() {
    for tag in CATALOG {
        let (e, env) = envelope(tag);
        let back = PiecewiseEnvelope::from_json(&env.to_json().unwrap()).unwrap();
        for t in log_space(1.0, 1e5, 1000).into_iter().filter(|&t| e.h(t) < 1e100) {
            assert!((back.eval(t) - env.eval(t)).abs() <= 1e-12 * env.eval(t).abs().max(1.0), "{tag} at {t}");
        }
    }
}
