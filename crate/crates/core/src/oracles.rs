//! Brute-force envelopes of `g(λ₁, λ₂)` on a grid of diagonal matrices, used
//! to check [`crate::envelope`] independently.
//!
//! * [`sc_envelope_grid`] convexifies every row and then every column by 1-D
//!   lower hulls until nothing changes: the separately convex envelope on the
//!   grid, i.e. iterated lamination along the two coordinate directions.
//! * [`polyconvex_envelope_diag`] solves, at each node, the linear program
//!   `min Σ θᵢ g(xᵢ, yᵢ)` over convex weights with
//!   `Σ θᵢ (xᵢ, yᵢ, xᵢyᵢ) = (x, y, xy)`: the polyconvex envelope restricted to
//!   diagonal matrices with grid nodes as support.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energies::Energy;
use crate::envelope::{PiecewiseEnvelope, SegmentKind};
use crate::grid::{log_space, LogGrid};
use crate::relaxation::{laminate_certificate, CertificateKind};
use crate::{Error, Result};

/// Values on `x_grid × y_grid`, row-major with `y` selecting the row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction2D {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridFunction2D {
    pub fn new(x_grid: Vec<f64>, y_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("x", &x_grid), ("y", &y_grid)] {
            if axis.len() < 3 {
                return Err(Error::Argument(format!("{name} grid needs >= 3 points")));
            }
            if axis[0] <= 0.0 || axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Argument(format!(
                    "{name} grid must be positive and strictly increasing"
                )));
            }
        }
        if values.len() != x_grid.len() * y_grid.len() {
            return Err(Error::Argument(format!(
                "{} values for a {}x{} grid",
                values.len(),
                x_grid.len(),
                y_grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let (ix, iy) = (i % x_grid.len(), i / x_grid.len());
            return Err(Error::Evaluation {
                at: x_grid[ix] / y_grid[iy],
                msg: format!("non-finite grid value {} at ({}, {})", values[i], x_grid[ix], y_grid[iy]),
            });
        }
        Ok(GridFunction2D { x_grid, y_grid, values })
    }

    /// `g(x, y)` on the square grid `axis × axis`.
    pub fn sample(e: &Energy, axis: &LogGrid) -> Result<Self> {
        let pts = axis.points();
        let values = pts
            .iter()
            .flat_map(|&y| pts.iter().map(move |&x| (x, y)))
            .map(|(x, y)| e.g(x, y))
            .collect();
        GridFunction2D::new(pts.clone(), pts, values)
    }

    pub fn nx(&self) -> usize {
        self.x_grid.len()
    }

    pub fn ny(&self) -> usize {
        self.y_grid.len()
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx() + ix]
    }

    /// CSV with header `x,y,value`, rows ordered by `y` then `x`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let map = |e: csv::Error| Error::Parse(e.to_string());
        wtr.write_record(["x", "y", "value"]).map_err(map)?;
        for (iy, &y) in self.y_grid.iter().enumerate() {
            for (ix, &x) in self.x_grid.iter().enumerate() {
                wtr.serialize((x, y, self.at(ix, iy))).map_err(map)?;
            }
        }
        wtr.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Lower hull of `(xs, ys)` evaluated back at every `xs[i]`.
fn convexify_line(xs: &[f64], ys: &mut [f64]) {
    let slope = |ys: &[f64], i: usize, j: usize| (ys[j] - ys[i]) / (xs[j] - xs[i]);
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for k in 0..xs.len() {
        while hull.len() >= 2 && slope(ys, hull[hull.len() - 2], hull[hull.len() - 1]) >= slope(ys, hull[hull.len() - 1], k) {
            hull.pop();
        }
        hull.push(k);
    }
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let s = slope(ys, a, b);
        let ya = ys[a];
        for i in a + 1..b {
            ys[i] = ya + s * (xs[i] - xs[a]);
        }
    }
}

/// One sweep: every row, then every column.
pub fn sweep_once(gf: &GridFunction2D) -> GridFunction2D {
    let (nx, ny) = (gf.nx(), gf.ny());
    let mut v = gf.values.clone();
    v.par_chunks_mut(nx).for_each(|row| convexify_line(&gf.x_grid, row));
    let mut cols: Vec<Vec<f64>> = (0..nx).map(|ix| (0..ny).map(|iy| v[iy * nx + ix]).collect()).collect();
    cols.par_iter_mut().for_each(|col| convexify_line(&gf.y_grid, col));
    for (ix, col) in cols.iter().enumerate() {
        for (iy, &c) in col.iter().enumerate() {
            v[iy * nx + ix] = c;
        }
    }
    GridFunction2D {
        x_grid: gf.x_grid.clone(),
        y_grid: gf.y_grid.clone(),
        values: v,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScEnvelope {
    pub grid: GridFunction2D,
    pub sweeps: usize,
    pub converged: bool,
    /// Largest relative change in the last sweep.
    pub residual: f64,
}

/// Iterates [`sweep_once`] until no value changes by more than
/// `tol · max(1, |value|)`.
pub fn sc_envelope_grid(gf: &GridFunction2D, tol: f64, max_sweeps: usize) -> Result<ScEnvelope> {
    if !(tol > 0.0) || max_sweeps == 0 {
        return Err(Error::Argument("tol and max_sweeps must be positive".into()));
    }
    let mut cur = gf.clone();
    let mut residual = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        let next = sweep_once(&cur);
        residual = cur
            .values
            .iter()
            .zip(&next.values)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max);
        cur = next;
        if residual <= tol {
            return Ok(ScEnvelope {
                grid: cur,
                sweeps: sweep,
                converged: true,
                residual,
            });
        }
    }
    Ok(ScEnvelope {
        grid: cur,
        sweeps: max_sweeps,
        converged: false,
        residual,
    })
}

/// Columns costing more than this multiple of the node's own (shifted) value
/// could only enter with negligible weight and are left out.
const COST_PRUNE: f64 = 1e8;

/// Lift of node `(xj, yj)` with rows scaled by the target `(x, y)`.
fn lifted(xj: f64, yj: f64, x: f64, y: f64) -> [f64; 4] {
    [1.0, xj / x, yj / y, xj * yj / (x * y)]
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve4(m: [[f64; 4]; 4], rhs: [f64; 4]) -> Option<[f64; 4]> {
    let mut a = m;
    let mut r = rhs;
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        r.swap(c, p);
        for i in c + 1..4 {
            let f = a[i][c] / a[c][c];
            for k in c..4 {
                a[i][k] -= f * a[c][k];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = [0.0; 4];
    for c in (0..4).rev() {
        let s: f64 = (c + 1..4).map(|k| a[c][k] * x[k]).sum();
        x[c] = (r[c] - s) / a[c][c];
    }
    Some(x)
}

fn transpose(m: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut t = [[0.0; 4]; 4];
    for (r, row) in m.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            t[c][r] = *v;
        }
    }
    t
}

/// `min cᵀθ` subject to `Aθ = 1`, `θ ≥ 0` with four rows, by the primal
/// simplex method. Column `warm` must equal the all-ones right-hand side; it
/// starts the basis together with three unit columns held at level zero, so
/// no phase one is needed. The basis is refactored every iteration.
struct SmallLp<'a> {
    cols: &'a [[f64; 4]],
    cost: &'a [f64],
    warm: usize,
}

impl SmallLp<'_> {
    /// Optimal basic weights as `(column, weight)`, or `None` on numerical
    /// failure.
    fn solve(&self) -> Option<Vec<(usize, f64)>> {
        const ART: usize = usize::MAX;
        let n = self.cols.len();
        // basis entries: column index, or ART + row for the unit column e_row
        let mut basis = [self.warm, ART - 1, ART - 2, ART - 3];
        let unit = |k: usize| {
            let mut e = [0.0; 4];
            e[ART - k] = 1.0;
            e
        };
        let column = |k: usize| if k < n { self.cols[k] } else { unit(k) };
        let cost = |k: usize| if k < n { self.cost[k] } else { 0.0 };
        let mut degenerate_run = 0;
        for _ in 0..20 * n + 100 {
            let mut bm = [[0.0; 4]; 4];
            for (c, &k) in basis.iter().enumerate() {
                let col = column(k);
                for r in 0..4 {
                    bm[r][c] = col[r];
                }
            }
            let xb = solve4(bm, [1.0; 4])?;
            let y = solve4(transpose(bm), basis.map(cost))?;
            // reduced costs, relative to the size of the terms involved
            let priced = (0..n).filter(|j| !basis.contains(j)).filter_map(|j| {
                let a = self.cols[j];
                let ya: f64 = (0..4).map(|k| y[k] * a[k]).sum();
                let size = self.cost[j].abs() + (0..4).map(|k| (y[k] * a[k]).abs()).sum::<f64>();
                let d = self.cost[j] - ya;
                (d < -1e-11 * size).then_some((j, d / size.max(f64::MIN_POSITIVE)))
            });
            // steepest relative descent, Bland's rule once pivots stall
            let entering = if degenerate_run > 8 {
                priced.map(|p| p.0).next()
            } else {
                priced.min_by(|p, q| p.1.total_cmp(&q.1)).map(|p| p.0)
            };
            let Some(j) = entering else {
                let weights = basis
                    .iter()
                    .zip(xb)
                    .filter(|&(&k, _)| k < n)
                    .map(|(&k, t)| (k, t.max(0.0)))
                    .filter(|w| w.1 > 0.0)
                    .collect();
                let artificial: f64 = basis.iter().zip(xb).filter(|&(&k, _)| k >= n).map(|(_, t)| t.abs()).sum();
                return (artificial <= 1e-9 && xb.iter().all(|&t| t >= -1e-9)).then_some(weights);
            };
            let u = solve4(bm, self.cols[j])?;
            let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // a unit column still in the basis leaves first, at zero step
            let mut leave = (0..4)
                .filter(|&r| basis[r] >= n && u[r].abs() > 1e-9 * umax)
                .max_by(|&p, &q| u[p].abs().total_cmp(&u[q].abs()));
            if leave.is_none() {
                let mut best = f64::INFINITY;
                for r in 0..4 {
                    if u[r] > 1e-11 * umax {
                        let q = xb[r].max(0.0) / u[r];
                        if q < best || (q == best && leave.is_some_and(|l: usize| basis[r] < basis[l])) {
                            best = q;
                            leave = Some(r);
                        }
                    }
                }
                degenerate_run = if best <= 0.0 { degenerate_run + 1 } else { 0 };
            }
            basis[leave?] = j;
        }
        None
    }
}

/// The program at node `i`: returns (value, failed, support size).
fn node_program(nodes: &[(f64, f64)], values: &[f64], floor: f64, i: usize, tol: f64) -> (f64, bool, usize) {
    let (x, y) = nodes[i];
    let own = values[i] - floor;
    if own <= 0.0 {
        return (values[i], false, 1);
    }
    // columns scaled to unit max entry, costs shifted to a zero minimum and
    // measured in units of the node's own value
    let mut cols = Vec::new();
    let mut cost = Vec::new();
    let mut keep = Vec::new();
    let mut warm = 0;
    for (j, &(xj, yj)) in nodes.iter().enumerate() {
        let c = (values[j] - floor) / own;
        if c > COST_PRUNE {
            continue;
        }
        if j == i {
            warm = cols.len();
        }
        let a = lifted(xj, yj, x, y);
        let s = a.iter().fold(0.0f64, |m, v| m.max(*v));
        cols.push(a.map(|v| v / s));
        cost.push(c / s);
        keep.push((j, s));
    }
    let lp = SmallLp {
        cols: &cols,
        cost: &cost,
        warm,
    };
    let Some(weights) = lp.solve() else {
        return (values[i], true, 1);
    };
    let mut residual = [-1.0; 4];
    let mut value = floor;
    for &(k, w) in &weights {
        let (j, s) = keep[k];
        let theta = w / s;
        let a = lifted(nodes[j].0, nodes[j].1, x, y);
        for r in 0..4 {
            residual[r] += theta * a[r];
        }
        value += theta * (values[j] - floor);
    }
    let feasible = residual.iter().all(|r| r.abs() <= 1e-8);
    if feasible && value <= values[i] + tol * own.max(1.0) {
        (value.min(values[i]), false, weights.len())
    } else {
        (values[i], true, 1)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyconvexEnvelope {
    pub grid: GridFunction2D,
    /// Nodes whose program failed numerically and kept their input value.
    pub boundary_flags: Vec<bool>,
    /// Largest number of support points used at a node.
    pub max_support: usize,
}

/// Polyconvex envelope on diagonal matrices with grid-node support, one
/// small linear program per node. Cost grows like `(nx·ny)²`; grids up to
/// about 40×40 take seconds.
pub fn polyconvex_envelope_diag(gf: &GridFunction2D, tol: f64) -> Result<PolyconvexEnvelope> {
    if !(tol > 0.0) {
        return Err(Error::Argument("tol must be positive".into()));
    }
    let (nx, ny) = (gf.nx(), gf.ny());
    let nodes: Vec<(f64, f64)> = (0..ny)
        .flat_map(|iy| (0..nx).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| (gf.x_grid[ix], gf.y_grid[iy]))
        .collect();
    let floor = gf.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let results: Vec<(f64, bool, usize)> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, _)| node_program(&nodes, &gf.values, floor, i, tol))
        .collect();
    let values = results.iter().map(|r| r.0).collect();
    Ok(PolyconvexEnvelope {
        grid: GridFunction2D {
            x_grid: gf.x_grid.clone(),
            y_grid: gf.y_grid.clone(),
            values,
        },
        boundary_flags: results.iter().map(|r| r.1).collect(),
        max_support: results.iter().map(|r| r.2).max().unwrap_or(0),
    })
}

/// Asymptotic laminates are trusted when the best grid-limited far phase
/// leaves at most this much energy above the envelope.
pub const ASYMPTOTIC_MASK_TOL: f64 = 1e-3;

/// Nodes where a first-order laminate for `C_m h` fits inside the grid box,
/// mixing along the node's row or column.
pub fn interior_mask(gf: &GridFunction2D, env: &PiecewiseEnvelope) -> Result<Vec<bool>> {
    let e = env.energy();
    let (x_lo, x_hi) = (gf.x_grid[0], gf.x_grid[gf.nx() - 1]);
    let (y_lo, y_hi) = (gf.y_grid[0], gf.y_grid[gf.ny() - 1]);
    let slack = 1e-12;
    let within = |v: f64, lo: f64, hi: f64| v >= lo * (1.0 - slack) && v <= hi * (1.0 + slack);
    let mut mask = Vec::with_capacity(gf.values.len());
    for &y in &gf.y_grid {
        for &x in &gf.x_grid {
            let (big, small) = (x.max(y), x.min(y));
            let t = big / small;
            // axis ranges for the larger and the smaller coordinate
            let (big_rng, small_rng) = if x >= y { ((x_lo, x_hi), (y_lo, y_hi)) } else { ((y_lo, y_hi), (x_lo, x_hi)) };
            let c = laminate_certificate(e, env, t)?;
            let ok = match c.kind {
                CertificateKind::Degenerate => true,
                // the ratio is linear only in the larger coordinate
                CertificateKind::Affine => {
                    within(c.t1 * small, big_rng.0, big_rng.1) && within(c.t2 * small, big_rng.0, big_rng.1)
                }
                CertificateKind::Constant => {
                    let s = c.t1;
                    within(big / s, small_rng.0, small_rng.1) && within(big * s, small_rng.0, small_rng.1)
                        || within(small / s, big_rng.0, big_rng.1) && within(small * s, big_rng.0, big_rng.1)
                }
                CertificateKind::Asymptotic => {
                    let t1 = c.t1;
                    let far = big_rng.1 / small;
                    if !within(t1 * small, big_rng.0, big_rng.1) || far <= t {
                        false
                    } else {
                        let theta = (far - t) / (far - t1);
                        let mixed = theta * e.h(t1) + (1.0 - theta) * e.h(far);
                        mixed - env.eval(t) <= ASYMPTOTIC_MASK_TOL
                    }
                }
            };
            mask.push(ok);
        }
    }
    Ok(mask)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleComparison {
    pub max_abs_deviation: f64,
    pub max_abs_at: (f64, f64),
    /// Largest `oracle − C_m h` on the interior band.
    pub max_signed: f64,
    pub max_signed_at: (f64, f64),
    /// Smallest `oracle − C_m h` on the interior band.
    pub min_signed: f64,
    pub min_signed_at: (f64, f64),
    pub interior_nodes: usize,
    pub total_nodes: usize,
    #[serde(skip)]
    pub mask: Vec<bool>,
}

impl std::fmt::Display for OracleComparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "max |dev| {:.3e} at ({:.4}, {:.4}); signed [{:.3e}, {:.3e}]; {} of {} nodes interior",
            self.max_abs_deviation,
            self.max_abs_at.0,
            self.max_abs_at.1,
            self.min_signed,
            self.max_signed,
            self.interior_nodes,
            self.total_nodes
        )
    }
}

/// Deviation of a grid envelope from `C_m h(max/min)` on the interior band.
pub fn compare_oracle_to_envelope(oracle: &GridFunction2D, env: &PiecewiseEnvelope) -> Result<OracleComparison> {
    let mask = interior_mask(oracle, env)?;
    let mut cmp = OracleComparison {
        max_abs_deviation: 0.0,
        max_abs_at: (f64::NAN, f64::NAN),
        max_signed: f64::NEG_INFINITY,
        max_signed_at: (f64::NAN, f64::NAN),
        min_signed: f64::INFINITY,
        min_signed_at: (f64::NAN, f64::NAN),
        interior_nodes: 0,
        total_nodes: oracle.values.len(),
        mask: Vec::new(),
    };
    for (iy, &y) in oracle.y_grid.iter().enumerate() {
        for (ix, &x) in oracle.x_grid.iter().enumerate() {
            if !mask[iy * oracle.nx() + ix] {
                continue;
            }
            cmp.interior_nodes += 1;
            let d = oracle.at(ix, iy) - env.eval(x.max(y) / x.min(y));
            if d.abs() > cmp.max_abs_deviation {
                cmp.max_abs_deviation = d.abs();
                cmp.max_abs_at = (x, y);
            }
            if d > cmp.max_signed {
                cmp.max_signed = d;
                cmp.max_signed_at = (x, y);
            }
            if d < cmp.min_signed {
                cmp.min_signed = d;
                cmp.min_signed_at = (x, y);
            }
        }
    }
    cmp.mask = mask;
    Ok(cmp)
}

/// Log-spaced square axis `[e^-r, e^r]` with `n` points; grid diagonals then
/// carry constant ratio `x/y`.
pub fn symmetric_log_axis(r: f64, n: usize) -> Result<LogGrid> {
    LogGrid::new((-r).exp(), r.exp(), n)
}

/// The largest ratio `x/y` appearing on a square axis.
pub fn max_ratio(axis: &LogGrid) -> f64 {
    let p = log_space(axis.t_min, axis.t_max, axis.n);
    p[p.len() - 1] / p[0]
}

/// `true` when the envelope has a non-trivial piece the oracle can see.
pub fn has_relaxation(env: &PiecewiseEnvelope) -> bool {
    env.pieces().iter().any(|p| !matches!(p.kind, SegmentKind::FollowH))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energies::CatalogEnergy;
    use crate::envelope::{monotone_convex_envelope, EnvelopeConfig};

    fn energy(tag: &str) -> Energy {
        CatalogEnergy::parse(tag).unwrap().energy().unwrap()
    }

    fn rows_and_columns_convex(gf: &GridFunction2D, tol: f64) -> bool {
        let (nx, ny) = (gf.nx(), gf.ny());
        let dd = |x: [f64; 3], f: [f64; 3]| (f[2] - f[1]) / (x[2] - x[1]) - (f[1] - f[0]) / (x[1] - x[0]);
        (0..ny).all(|iy| {
            (1..nx - 1).all(|ix| {
                dd(
                    [gf.x_grid[ix - 1], gf.x_grid[ix], gf.x_grid[ix + 1]],
                    [gf.at(ix - 1, iy), gf.at(ix, iy), gf.at(ix + 1, iy)],
                ) >= -tol
            })
        }) && (0..nx).all(|ix| {
            (1..ny - 1).all(|iy| {
                dd(
                    [gf.y_grid[iy - 1], gf.y_grid[iy], gf.y_grid[iy + 1]],
                    [gf.at(ix, iy - 1), gf.at(ix, iy), gf.at(ix, iy + 1)],
                ) >= -tol
            })
        })
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridFunction2D::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![0.0; 8]).is_err());
        assert!(GridFunction2D::new(vec![1.0, 1.0, 3.0], vec![1.0, 2.0, 3.0], vec![0.0; 9]).is_err());
        let mut v = vec![0.0; 9];
        v[4] = f64::NAN;
        assert!(GridFunction2D::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], v).is_err());
    }

    #[test]
    fn convex_inputs_are_fixed_points() {
        let axis = LogGrid::new(0.5, 2.0, 100).unwrap();
        let gf = GridFunction2D::sample(&energy("svk_isochoric"), &axis).unwrap();
        let sc = sc_envelope_grid(&gf, 1e-12, 50).unwrap();
        assert!(sc.converged);
        for (a, b) in gf.values.iter().zip(&sc.grid.values) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        let xy = Energy::from_g("xy", |x, y| x * y);
        let gf = GridFunction2D::sample(&xy, &axis).unwrap();
        let sc = sc_envelope_grid(&gf, 1e-12, 50).unwrap();
        for (a, b) in gf.values.iter().zip(&sc.grid.values) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn sweep_output_is_separately_convex() {
        let axis = symmetric_log_axis(3.0, 60).unwrap();
        let gf = GridFunction2D::sample(&energy("exp_hencky{k=0.11}"), &axis).unwrap();
        let sc = sc_envelope_grid(&gf, 1e-13, 200).unwrap();
        assert!(sc.converged, "{} sweeps, residual {}", sc.sweeps, sc.residual);
        assert!(rows_and_columns_convex(&sc.grid, 1e-9));
        assert!(sc.grid.values.iter().zip(&gf.values).all(|(s, g)| s <= g));
    }

    #[test]
    fn exp_hencky_sc_agrees_with_envelope() {
        let e = energy("exp_hencky{k=0.11}");
        let env = monotone_convex_envelope(&e, &EnvelopeConfig::default()).unwrap();
        let axis = symmetric_log_axis(4.0, 120).unwrap();
        let gf = GridFunction2D::sample(&e, &axis).unwrap();
        let sc = sc_envelope_grid(&gf, 1e-12, 500).unwrap();
        let cmp = compare_oracle_to_envelope(&sc.grid, &env).unwrap();
        assert!(cmp.interior_nodes > 1000);
        assert!(cmp.max_abs_deviation <= 5e-3, "{cmp}");
        assert!(cmp.min_signed >= -1e-9, "{}", cmp.min_signed);
    }

    #[test]
    fn polyconvex_examples() {
        let axis = LogGrid::new(0.5, 2.0, 12).unwrap();
        let gf = GridFunction2D::sample(&energy("svk_isochoric"), &axis).unwrap();
        let pc = polyconvex_envelope_diag(&gf, 1e-10).unwrap();
        for (a, b) in gf.values.iter().zip(&pc.grid.values) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
        assert!(pc.boundary_flags.iter().all(|&f| !f));

        let e = energy("exp_hencky{k=0.11}");
        let axis = symmetric_log_axis(4.0, 20).unwrap();
        let gf = GridFunction2D::sample(&e, &axis).unwrap();
        let pc = polyconvex_envelope_diag(&gf, 1e-10).unwrap();
        let sc = sc_envelope_grid(&gf, 1e-12, 500).unwrap();
        for ((p, s), g) in pc.grid.values.iter().zip(&sc.grid.values).zip(&gf.values) {
            assert!(p <= &(s + 1e-9 * s.abs().max(1.0)) && p <= g);
        }
        assert!(pc.max_support <= 4);
    }

    #[test]
    fn lp_matches_hand_solution() {
        // three nodes on a row with costs 0, 5, 0: the middle one is a mixture
        let nodes = [(1.0, 1.0), (2.0, 1.0), (4.0, 1.0)];
        let values = [0.0, 5.0, 0.0];
        let (v, failed, support) = node_program(&nodes, &values, 0.0, 1, 1e-10);
        assert!(!failed);
        assert!(v.abs() < 1e-12, "{v}");
        assert_eq!(support, 2);
    }

    #[test]
    fn polyconvex_agrees_with_envelope_on_examples() {
        for (tag, r) in [("exp_hencky{k=0.11}", 4.0), ("cosh{L=2}", 3.0), ("dev_hencky", 12.0)] {
            let e = energy(tag);
            let env = crate::envelope::monotone_convex_envelope(&e, &EnvelopeConfig::default()).unwrap();
            let gf = GridFunction2D::sample(&e, &symmetric_log_axis(r, 30).unwrap()).unwrap();
            let pc = polyconvex_envelope_diag(&gf, 1e-10).unwrap();
            let cmp = compare_oracle_to_envelope(&pc.grid, &env).unwrap();
            assert!(cmp.interior_nodes > 200, "{tag}: {cmp}");
            assert!(cmp.max_abs_deviation <= 1e-2, "{tag}: {cmp}");
            assert!(cmp.min_signed >= -1e-9, "{tag}: {cmp}");
            assert!(pc.max_support <= 4);
        }
    }

    #[test]
    fn ordering_chain_and_sweep_monotonicity() {
        let e = energy("exp_hencky{k=0.11}");
        let gf = GridFunction2D::sample(&e, &symmetric_log_axis(3.0, 16).unwrap()).unwrap();
        let once = sweep_once(&gf);
        let twice = sweep_once(&once);
        let sc = sc_envelope_grid(&gf, 1e-12, 500).unwrap();
        let pc = polyconvex_envelope_diag(&gf, 1e-10).unwrap();
        for k in 0..gf.values.len() {
            let slack = 1e-9 * gf.values[k].abs().max(1.0);
            assert!(once.values[k] <= gf.values[k] + slack);
            assert!(twice.values[k] <= once.values[k] + slack);
            assert!(sc.grid.values[k] <= twice.values[k] + slack);
            assert!(pc.grid.values[k] <= sc.grid.values[k] + slack);
        }
    }

    #[test]
    fn polyconvex_commutes_with_diagonal_scaling() {
        // g(cx, cy) = g(x, y): rescaling the grid leaves the values unchanged
        let e = energy("exp_hencky{k=0.11}");
        let axis = symmetric_log_axis(3.0, 14).unwrap();
        let gf = GridFunction2D::sample(&e, &axis).unwrap();
        let c = 3.7;
        let scaled = GridFunction2D::new(
            gf.x_grid.iter().map(|v| v * c).collect(),
            gf.y_grid.iter().map(|v| v * c).collect(),
            gf.values.clone(),
        )
        .unwrap();
        let a = polyconvex_envelope_diag(&gf, 1e-10).unwrap();
        let b = polyconvex_envelope_diag(&scaled, 1e-10).unwrap();
        for (p, q) in a.grid.values.iter().zip(&b.grid.values) {
            assert!((p - q).abs() <= 1e-8 * p.abs().max(1.0), "{p} vs {q}");
        }
    }

    #[test]
    fn csv_has_header_and_one_row_per_node() {
        let axis = LogGrid::new(0.5, 2.0, 4).unwrap();
        let gf = GridFunction2D::sample(&energy("svk_isochoric"), &axis).unwrap();
        let mut buf = Vec::new();
        gf.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("x,y,value"));
        assert_eq!(text.lines().count(), 17);
    }
}
