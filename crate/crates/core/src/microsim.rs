//! P1 finite elements on the unit disc: direct minimization of
//! `∫ W(∇φ) dx` under affine Dirichlet data `φ = F₀x` on the circle.
//!
//! The energy is evaluated as `Ψ(𝕂(∇φ))`, which is smooth where `h(λ₁/λ₂)`
//! has a kink at `λ₁ = λ₂`. The solver is nonlinear conjugate gradients
//! (Polak–Ribière+) with Armijo backtracking; trial states with an inverted
//! element are rejected, so no barrier term alters `W`. Interior nodes get a
//! seeded random kick first: the homogeneous state is critical and would
//! otherwise never develop microstructure.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energies::Energy;
use crate::kinematics::Mat2;
use crate::{Error, Result};

/// Triangulation of the unit disc.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise node index triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_mask: Vec<bool>,
    pub level: usize,
}

/// Deformed positions `φ(node)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalField {
    pub positions: Vec<[f64; 2]>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Distance from the origin to the boundary of the regular octagon with
/// vertices at angles `kπ/4` on the unit circle, along direction `phi`.
fn octagon_radius(phi: f64) -> f64 {
    let sector = std::f64::consts::FRAC_PI_4;
    let local = phi.rem_euclid(sector) - 0.5 * sector;
    (0.5 * sector).cos() / local.cos()
}

/// Eight-triangle fan on the regular octagon, red-refined `level` times and
/// then mapped onto the disc by radial scaling. Level `L` has `8·4^L`
/// triangles; level 5 has 4225 nodes.
pub fn make_disc_mesh(level: usize) -> Mesh {
    let mut nodes = vec![[0.0, 0.0]];
    for k in 0..8 {
        let a = k as f64 * std::f64::consts::FRAC_PI_4;
        nodes.push([a.cos(), a.sin()]);
    }
    let mut triangles: Vec<[usize; 3]> = (0..8).map(|k| [0, 1 + k, 1 + (k + 1) % 8]).collect();

    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (nodes[a], nodes[b]);
                nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                nodes.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * triangles.len());
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            next.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let boundary_mask: Vec<bool> = nodes
        .iter()
        .map(|p| {
            let r = p[0].hypot(p[1]);
            r > 0.0 && (r - octagon_radius(p[1].atan2(p[0]))).abs() < 1e-12
        })
        .collect();
    for (p, &on_boundary) in nodes.iter_mut().zip(&boundary_mask) {
        let r = p[0].hypot(p[1]);
        if r == 0.0 {
            continue;
        }
        if on_boundary {
            *p = [p[0] / r, p[1] / r];
        } else {
            let s = 1.0 / octagon_radius(p[1].atan2(p[0]));
            *p = [p[0] * s, p[1] * s];
        }
    }
    Mesh {
        nodes,
        triangles,
        boundary_mask,
        level,
    }
}

impl Mesh {
    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| signed_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]))
            .sum()
    }

    /// Shortest edge.
    pub fn min_edge(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (self.nodes[a][0] - self.nodes[b][0]).hypot(self.nodes[a][1] - self.nodes[b][1]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn free_nodes(&self) -> usize {
        self.boundary_mask.iter().filter(|&&b| !b).count()
    }
}

/// Per-element reference data: area and the shape-function gradients.
struct Geometry {
    area: Vec<f64>,
    /// Rows are `∇N₁`, `∇N₂`; `∇N₀ = −∇N₁ − ∇N₂`.
    grad: Vec<[[f64; 2]; 2]>,
}

impl Geometry {
    fn new(mesh: &Mesh) -> Self {
        let mut area = Vec::with_capacity(mesh.triangles.len());
        let mut grad = Vec::with_capacity(mesh.triangles.len());
        for t in &mesh.triangles {
            let (p0, p1, p2) = (mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
            let d = Mat2::new(p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1]);
            let g = d.inverse().expect("mesh triangles have positive area");
            area.push(0.5 * d.det());
            grad.push([[g.e11, g.e12], [g.e21, g.e22]]);
        }
        Geometry { area, grad }
    }

    fn gradient(&self, mesh: &Mesh, x: &[[f64; 2]], k: usize) -> Mat2 {
        let t = mesh.triangles[k];
        let (a, b, c) = (x[t[0]], x[t[1]], x[t[2]]);
        let g = self.grad[k];
        let (u, v) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
        Mat2::new(
            u[0] * g[0][0] + v[0] * g[1][0],
            u[0] * g[0][1] + v[0] * g[1][1],
            u[1] * g[0][0] + v[1] * g[1][0],
            u[1] * g[0][1] + v[1] * g[1][1],
        )
    }

    /// Element energies; `+∞` for an inverted element or a non-finite value.
    fn element_energies(&self, e: &Energy, mesh: &Mesh, x: &[[f64; 2]]) -> Vec<f64> {
        (0..mesh.triangles.len())
            .into_par_iter()
            .map(|k| {
                let f = self.gradient(mesh, x, k);
                let det = f.det();
                if !(det > 0.0) {
                    return f64::INFINITY;
                }
                let w = e.psi((0.5 * f.norm_sq() / det).max(1.0));
                if w.is_finite() {
                    self.area[k] * w
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    /// Summed in element order so the result does not depend on threading.
    fn energy(&self, e: &Energy, mesh: &Mesh, x: &[[f64; 2]]) -> f64 {
        self.element_energies(e, mesh, x).iter().sum()
    }

    /// Nodal gradient of the energy through `∂W/∂F = Ψ′(𝕂)·∂𝕂/∂F` with
    /// `∂𝕂/∂F = F/det − ½‖F‖²/det²·cof F`. Boundary entries are zeroed.
    fn energy_gradient(&self, e: &Energy, mesh: &Mesh, x: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let forces: Vec<[[f64; 2]; 3]> = (0..mesh.triangles.len())
            .into_par_iter()
            .map(|k| {
                let f = self.gradient(mesh, x, k);
                let det = f.det();
                let kk = 0.5 * f.norm_sq() / det;
                let dkk = f.scale(1.0 / det) - f.cofactor().scale(kk / det);
                let p = dkk.scale(self.area[k] * e.dpsi(kk.max(1.0)));
                let g = self.grad[k];
                let n = [[-g[0][0] - g[1][0], -g[0][1] - g[1][1]], g[0], g[1]];
                n.map(|na| [p.e11 * na[0] + p.e12 * na[1], p.e21 * na[0] + p.e22 * na[1]])
            })
            .collect();
        let mut out = vec![[0.0; 2]; mesh.nodes.len()];
        for (t, fk) in mesh.triangles.iter().zip(&forces) {
            for (a, fa) in t.iter().zip(fk) {
                out[*a][0] += fa[0];
                out[*a][1] += fa[1];
            }
        }
        for (o, &b) in out.iter_mut().zip(&mesh.boundary_mask) {
            if b {
                *o = [0.0; 2];
            }
        }
        out
    }
}

fn check_conforms(mesh: &Mesh, field: &NodalField) -> Result<()> {
    if field.positions.len() != mesh.nodes.len() {
        return Err(Error::Argument(format!(
            "field has {} nodes, mesh has {}",
            field.positions.len(),
            mesh.nodes.len()
        )));
    }
    Ok(())
}

/// The homogeneous state `φ(x) = F₀x`.
pub fn apply_affine_bc(mesh: &Mesh, f0: &Mat2) -> Result<NodalField> {
    if !f0.is_finite() || !(f0.det() > 0.0) {
        return Err(Error::Domain(format!("boundary gradient needs det > 0, got {}", f0.det())));
    }
    Ok(NodalField {
        positions: mesh.nodes.iter().map(|&p| f0.apply(p)).collect(),
    })
}

/// `Σ area·W(∇φ)` over the triangles, `+∞` if any element is inverted.
pub fn total_energy(e: &Energy, mesh: &Mesh, field: &NodalField) -> Result<f64> {
    check_conforms(mesh, field)?;
    Ok(Geometry::new(mesh).energy(e, mesh, &field.positions))
}

/// Gradient of [`total_energy`] with respect to the nodal positions, zero on
/// the boundary. Requires a state without inverted elements.
pub fn energy_gradient(e: &Energy, mesh: &Mesh, field: &NodalField) -> Result<Vec<[f64; 2]>> {
    check_conforms(mesh, field)?;
    let geo = Geometry::new(mesh);
    if (0..mesh.triangles.len()).any(|k| !(geo.gradient(mesh, &field.positions, k).det() > 0.0)) {
        return Err(Error::Infeasible("inverted element".into()));
    }
    Ok(geo.energy_gradient(e, mesh, &field.positions))
}

/// Per-element `det ∇φ` and `𝕂(∇φ)`.
pub fn element_fields(mesh: &Mesh, field: &NodalField) -> Result<(Vec<f64>, Vec<f64>)> {
    check_conforms(mesh, field)?;
    let geo = Geometry::new(mesh);
    Ok((0..mesh.triangles.len())
        .map(|k| {
            let f = geo.gradient(mesh, &field.positions, k);
            let det = f.det();
            (det, 0.5 * f.norm_sq() / det)
        })
        .unzip())
}

/// Search direction of the descent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Nonlinear conjugate gradients, Polak–Ribière+.
    Ncg,
    /// Limited-memory BFGS with `memory` correction pairs.
    Lbfgs { memory: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub level: usize,
    pub solver: Solver,
    pub max_iters: usize,
    /// Bound on the Euclidean norm of the free nodal gradient.
    pub grad_tol: f64,
    pub initial_step: f64,
    /// Step reduction factor in `(0, 1)`.
    pub backtrack: f64,
    pub min_step: f64,
    /// Armijo sufficient-decrease constant in `(0, 1)`.
    pub armijo: f64,
    /// Interior kick, in units of the shortest mesh edge.
    pub perturbation: f64,
    pub seed: u64,
    /// Energies are recorded every this many iterations.
    pub checkpoint_every: usize,
    /// The run stops as stagnated when the energy drops by less than
    /// `stall_tol·max(1, |E|)` over `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            level: 5,
            solver: Solver::Lbfgs { memory: 10 },
            max_iters: 20_000,
            grad_tol: 1e-9,
            initial_step: 1.0,
            backtrack: 0.5,
            min_step: 1e-16,
            armijo: 1e-4,
            perturbation: 1e-3,
            seed: 0,
            checkpoint_every: 100,
            stall_window: 500,
            stall_tol: 1e-10,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol", self.grad_tol),
            ("initial_step", self.initial_step),
            ("min_step", self.min_step),
            ("perturbation", self.perturbation),
            ("stall_tol", self.stall_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("backtrack", self.backtrack), ("armijo", self.armijo)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Argument(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.max_iters == 0 || self.checkpoint_every == 0 || self.stall_window == 0 {
            return Err(Error::Argument(
                "max_iters, checkpoint_every and stall_window must be positive".into(),
            ));
        }
        if self.level > 9 {
            return Err(Error::Argument(format!("level {} is beyond desk scale", self.level)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Converged,
    /// No acceptable step above `min_step` along steepest descent, or no
    /// progress over the stall window.
    Stagnated,
    MaxIters,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimReport {
    pub status: SimStatus,
    /// `(iteration, energy)` checkpoints of accepted iterates.
    pub energies: Vec<(usize, f64)>,
    /// Energy of the field as passed in, before the kick.
    pub start_energy: f64,
    pub final_energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub accepted: usize,
    pub backtracks: usize,
    /// Trial states rejected for an inverted element.
    pub inverted_trials: usize,
    pub restarts: usize,
    pub mesh_area: f64,
    pub nodes: usize,
    pub triangles: usize,
    pub config: SimConfig,
    pub element_det: Vec<f64>,
    pub element_kk: Vec<f64>,
}

fn dot(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p[0] * q[0] + p[1] * q[1]).sum()
}

fn axpy(a: f64, x: &[[f64; 2]], y: &mut [[f64; 2]]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        yi[0] += a * xi[0];
        yi[1] += a * xi[1];
    }
}

/// `−H g` by the two-loop recursion over `(s, y, 1/sᵀy)` pairs, oldest first.
fn lbfgs_direction(g: &[[f64; 2]], pairs: &VecDeque<(Vec<[f64; 2]>, Vec<[f64; 2]>, f64)>) -> Vec<[f64; 2]> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v = [gamma * v[0], gamma * v[1]]);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q.iter().map(|v| [-v[0], -v[1]]).collect()
}

/// Perturbs the interior of `field` and runs the descent in place.
pub fn minimize(e: &Energy, mesh: &Mesh, field: &mut NodalField, cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    check_conforms(mesh, field)?;
    let geo = Geometry::new(mesh);
    let start_energy = geo.energy(e, mesh, &field.positions);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let amp = cfg.perturbation * mesh.min_edge();
    for (p, &b) in field.positions.iter_mut().zip(&mesh.boundary_mask) {
        if !b {
            p[0] += amp * rng.gen_range(-1.0..=1.0);
            p[1] += amp * rng.gen_range(-1.0..=1.0);
        }
    }
    let mut energy = geo.energy(e, mesh, &field.positions);
    if !energy.is_finite() {
        return Err(Error::Infeasible(
            "initial state has an inverted element or infinite energy".into(),
        ));
    }

    let x = &mut field.positions;
    let mut g = geo.energy_gradient(e, mesh, x);
    let mut d: Vec<[f64; 2]> = g.iter().map(|v| [-v[0], -v[1]]).collect();
    let mut alpha = cfg.initial_step;
    let mut report = SimReport {
        status: SimStatus::MaxIters,
        energies: vec![(0, energy)],
        start_energy,
        final_energy: energy,
        grad_norm: dot(&g, &g).sqrt(),
        iterations: 0,
        accepted: 0,
        backtracks: 0,
        inverted_trials: 0,
        restarts: 0,
        mesh_area: geo.area.iter().sum(),
        nodes: mesh.nodes.len(),
        triangles: mesh.triangles.len(),
        config: cfg.clone(),
        element_det: Vec::new(),
        element_kk: Vec::new(),
    };
    let mut trial = x.clone();
    let mut pairs: VecDeque<(Vec<[f64; 2]>, Vec<[f64; 2]>, f64)> = VecDeque::new();
    let mut window_start = energy;

    for it in 1..=cfg.max_iters {
        if report.grad_norm <= cfg.grad_tol {
            report.status = SimStatus::Converged;
            break;
        }
        if it > 1 && (it - 1) % cfg.stall_window == 0 {
            if window_start - energy <= cfg.stall_tol * energy.abs().max(1.0) {
                report.status = SimStatus::Stagnated;
                break;
            }
            window_start = energy;
        }
        report.iterations = it;
        let mut slope = dot(&g, &d);
        let mut steepest = false;
        if !(slope < 0.0) {
            d = g.iter().map(|v| [-v[0], -v[1]]).collect();
            pairs.clear();
            slope = -report.grad_norm * report.grad_norm;
            steepest = true;
            report.restarts += 1;
        }
        // quasi-Newton steps start at 1, CG steps at twice the last one
        let mut step = if pairs.is_empty() { (2.0 * alpha).min(cfg.initial_step.max(alpha)) } else { 1.0 };
        let accepted = loop {
            for ((t, p), q) in trial.iter_mut().zip(x.iter()).zip(&d) {
                *t = [p[0] + step * q[0], p[1] + step * q[1]];
            }
            let trial_energy = geo.energy(e, mesh, &trial);
            if trial_energy <= energy + cfg.armijo * step * slope {
                break Some(trial_energy);
            }
            if trial_energy == f64::INFINITY {
                report.inverted_trials += 1;
            }
            report.backtracks += 1;
            step *= cfg.backtrack;
            if step < cfg.min_step {
                break None;
            }
        };
        let Some(new_energy) = accepted else {
            if steepest {
                report.status = SimStatus::Stagnated;
                break;
            }
            // retry along steepest descent
            d = g.iter().map(|v| [-v[0], -v[1]]).collect();
            pairs.clear();
            report.restarts += 1;
            continue;
        };
        std::mem::swap(x, &mut trial);
        energy = new_energy;
        alpha = step;
        report.accepted += 1;

        let g_new = geo.energy_gradient(e, mesh, x);
        match cfg.solver {
            Solver::Ncg => {
                let gg = dot(&g, &g);
                let beta = if gg > 0.0 {
                    ((dot(&g_new, &g_new) - dot(&g_new, &g)) / gg).max(0.0)
                } else {
                    0.0
                };
                for (di, gi) in d.iter_mut().zip(&g_new) {
                    *di = [-gi[0] + beta * di[0], -gi[1] + beta * di[1]];
                }
            }
            Solver::Lbfgs { memory } => {
                let sv: Vec<[f64; 2]> = d.iter().map(|q| [step * q[0], step * q[1]]).collect();
                let yv: Vec<[f64; 2]> = g_new.iter().zip(&g).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
                let sy = dot(&sv, &yv);
                // pairs without positive curvature would break the update
                if sy > 1e-12 * (dot(&sv, &sv) * dot(&yv, &yv)).sqrt() {
                    if pairs.len() == memory {
                        pairs.pop_front();
                    }
                    pairs.push_back((sv, yv, 1.0 / sy));
                }
                d = lbfgs_direction(&g_new, &pairs);
            }
        }
        g = g_new;
        report.grad_norm = dot(&g, &g).sqrt();
        if it % cfg.checkpoint_every == 0 {
            report.energies.push((it, energy));
        }
    }
    if report.grad_norm <= cfg.grad_tol {
        report.status = SimStatus::Converged;
    }
    if report.energies.last().map(|c| c.0) != Some(report.iterations) {
        report.energies.push((report.iterations, energy));
    }
    report.final_energy = energy;
    let (det, kk) = element_fields(mesh, field)?;
    report.element_det = det;
    report.element_kk = kk;
    Ok(report)
}

/// Element table (`centroid_x, centroid_y, det, kk`, one row per triangle in
/// mesh order) at `path`, node table (`node, x, y, phi_x, phi_y, boundary`)
/// next to it with a `_nodes` suffix. Centroids are in the reference disc.
/// Returns the node table path.
pub fn export_fields(mesh: &Mesh, field: &NodalField, path: &Path) -> Result<PathBuf> {
    let (det, kk) = element_fields(mesh, field)?;
    let mut elems = Vec::new();
    writeln!(elems, "centroid_x,centroid_y,det,kk").unwrap();
    for (k, t) in mesh.triangles.iter().enumerate() {
        let c = t.iter().fold([0.0; 2], |s, &a| [s[0] + mesh.nodes[a][0] / 3.0, s[1] + mesh.nodes[a][1] / 3.0]);
        writeln!(elems, "{},{},{},{}", c[0], c[1], det[k], kk[k]).unwrap();
    }
    std::fs::write(path, elems).map_err(|err| Error::io(path, err))?;

    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("fields");
    let node_path = path.with_file_name(format!("{stem}_nodes.csv"));
    let mut nodes = Vec::new();
    writeln!(nodes, "node,x,y,phi_x,phi_y,boundary").unwrap();
    for (i, (p, q)) in mesh.nodes.iter().zip(&field.positions).enumerate() {
        writeln!(nodes, "{i},{},{},{},{},{}", p[0], p[1], q[0], q[1], mesh.boundary_mask[i] as u8).unwrap();
    }
    std::fs::write(&node_path, nodes).map_err(|err| Error::io(&node_path, err))?;
    Ok(node_path)
}

/// Interquartile range `(q1, q3)` by linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        if i + 1 < v.len() {
            v[i] + frac * (v[i + 1] - v[i])
        } else {
            v[i]
        }
    };
    Some((at(0.25), at(0.75)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energies::resolve;

    #[test]
    fn mesh_counts_and_geometry() {
        let m0 = make_disc_mesh(0);
        assert_eq!((m0.nodes.len(), m0.triangles.len()), (9, 8));
        let m5 = make_disc_mesh(5);
        assert_eq!((m5.nodes.len(), m5.triangles.len()), (4225, 8192));
        assert_eq!(make_disc_mesh(3).triangles.len(), 4 * make_disc_mesh(2).triangles.len());
        assert!((m5.area() - std::f64::consts::PI).abs() < 1e-2);
        for m in [&m0, &make_disc_mesh(3)] {
            for t in &m.triangles {
                assert!(signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]) > 0.0);
            }
            for (p, &b) in m.nodes.iter().zip(&m.boundary_mask) {
                let r = p[0].hypot(p[1]);
                assert_eq!(b, (r - 1.0).abs() < 1e-12, "{p:?}");
            }
            assert_eq!(m.boundary_mask.iter().filter(|&&b| b).count(), 8 << m.level);
        }
    }

    #[test]
    fn affine_state() {
        let mesh = make_disc_mesh(2);
        let id = apply_affine_bc(&mesh, &Mat2::IDENTITY).unwrap();
        assert_eq!(id.positions, mesh.nodes);
        let s = 12.0186f64.sqrt();
        let f0 = Mat2::diag(s, 1.0 / s);
        let field = apply_affine_bc(&mesh, &f0).unwrap();
        let (det, _) = element_fields(&mesh, &field).unwrap();
        assert!(det.iter().all(|d| (d - 1.0).abs() < 1e-12));
        assert!(apply_affine_bc(&mesh, &Mat2::diag(1.0, 0.0)).is_err());
        assert!(apply_affine_bc(&mesh, &Mat2::diag(-1.0, 1.0)).is_err());
    }

    #[test]
    fn homogeneous_energies() {
        let mesh = make_disc_mesh(4);
        let area = mesh.area();
        let e = resolve("dev_hencky").unwrap();
        let id = apply_affine_bc(&mesh, &Mat2::IDENTITY).unwrap();
        assert!(total_energy(&e, &mesh, &id).unwrap().abs() < 1e-12);
        let e = resolve("cosh{L=2}").unwrap();
        let w = total_energy(&e, &mesh, &id).unwrap();
        assert!((w - area * (1f64.cosh() - 1.0)).abs() < 1e-10);

        let e = resolve("exp_hencky{k=0.11}").unwrap();
        let x0 = 12.018564f64;
        let f0 = Mat2::diag(x0.sqrt(), 1.0 / x0.sqrt());
        let w = total_energy(&e, &mesh, &apply_affine_bc(&mesh, &f0).unwrap()).unwrap();
        assert!((w - area * e.h(x0)).abs() < 1e-9);
    }

    #[test]
    fn inverted_element_gives_infinity() {
        let mesh = make_disc_mesh(1);
        let mut f = apply_affine_bc(&mesh, &Mat2::IDENTITY).unwrap();
        let i = mesh.boundary_mask.iter().position(|b| !b).unwrap();
        f.positions[i] = [5.0, 5.0];
        let e = resolve("dev_hencky").unwrap();
        assert_eq!(total_energy(&e, &mesh, &f).unwrap(), f64::INFINITY);
        assert!(energy_gradient(&e, &mesh, &f).is_err());
        let short = NodalField { positions: vec![[0.0; 2]] };
        assert!(total_energy(&e, &mesh, &short).is_err());
    }

    #[test]
    fn dev_hencky_identity_stays_optimal() {
        let mesh = make_disc_mesh(2);
        let mut field = apply_affine_bc(&mesh, &Mat2::IDENTITY).unwrap();
        let e = resolve("dev_hencky").unwrap();
        let cfg = SimConfig { max_iters: 2000, ..SimConfig::default() };
        let r = minimize(&e, &mesh, &mut field, &cfg).unwrap();
        assert!(r.final_energy <= 1e-8, "{}", r.final_energy);
        for (p, (q, &b)) in field.positions.iter().zip(mesh.nodes.iter().zip(&mesh.boundary_mask)) {
            if b {
                assert_eq!(p, q);
            }
        }
        assert!(r.energies.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn export_writes_both_tables() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = make_disc_mesh(1);
        let field = apply_affine_bc(&mesh, &Mat2::diag(2.0, 1.0)).unwrap();
        let path = dir.path().join("run.csv");
        let nodes = export_fields(&mesh, &field, &path).unwrap();
        let elems = std::fs::read_to_string(&path).unwrap();
        assert_eq!(elems.lines().count(), mesh.triangles.len() + 1);
        for line in elems.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert!((v[2] - 2.0).abs() < 1e-12 && (v[3] - 1.25).abs() < 1e-12, "{line}");
        }
        assert_eq!(std::fs::read_to_string(nodes).unwrap().lines().count(), mesh.nodes.len() + 1);
        assert!(export_fields(&mesh, &field, &dir.path().join("missing/run.csv")).is_err());
    }

    #[test]
    fn quartiles_interpolate() {
        assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]), Some((2.0, 4.0)));
        assert_eq!(quartiles(&[]), None);
    }
}
