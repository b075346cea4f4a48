//! Grid checks of the equivalent convexity criteria for conformally invariant
//! energies.
//!
//! For `W(F) = g(λ₁, λ₂) = h(λ₁/λ₂) = Ψ(𝕂(F))` the following are equivalent:
//! polyconvexity, quasiconvexity, rank-one convexity, separate convexity of
//! `g`, convexity of `h` on `(0, ∞)`, and convexity plus monotonicity of `h`
//! on `[1, ∞)`. For twice differentiable `Ψ` they are also equivalent to
//!
//! ```text
//! (x² − 1)(x + √(x² − 1)) Ψ″(x) + Ψ′(x) ≥ 0   for all x > 1.
//! ```
//!
//! All checks here are semi-decisions on a finite grid: a failed check carries
//! witnesses, a passed check means no violation was found on the grid.

use serde::{Deserialize, Serialize};

use crate::energies::Energy;
use crate::grid::LogGrid;
use crate::kinematics::kk_from_k_unchecked;
use crate::{Error, Result};

/// Relative tolerance for chord tests on sampled `h` and `g`.
pub const CHORD_TOL: f64 = 1e-9;
/// Relative tolerance for the `Ψ` criterion.
pub const CRITERION_VII_TOL: f64 = 1e-7;
const MAX_WITNESSES: usize = 32;

/// Samples where a criterion failed, capped at a few dozen, plus the full count.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witnesses<T> {
    pub count: usize,
    pub samples: Vec<T>,
}

impl<T> Witnesses<T> {
    fn push(&mut self, w: T) {
        self.count += 1;
        if self.samples.len() < MAX_WITNESSES {
            self.samples.push(w);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityVerdict {
    pub grid: LogGrid,
    pub h_convex: bool,
    pub h_nondecreasing_on_1inf: bool,
    pub g_separately_convex: Option<bool>,
    pub psi_criterion_vii: Option<bool>,
    /// `h_convex && h_nondecreasing_on_1inf`.
    pub overall: bool,
    /// Some computed criterion disagrees with `overall`.
    pub inconsistent: bool,
    pub convexity_witnesses: Witnesses<f64>,
    pub monotonicity_witnesses: Witnesses<f64>,
    pub separate_witnesses: Witnesses<(f64, f64)>,
    pub criterion_vii_witnesses: Witnesses<f64>,
}

/// Outcome of the `Ψ` criterion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionReport {
    pub holds: bool,
    /// The minimum lies within the tolerance band around zero.
    pub boundary_indeterminate: bool,
    /// Minimum of the expression divided by its per-sample magnitude.
    pub min_value: f64,
    /// Outer distortion where the minimum was attained.
    pub argmin: f64,
    pub witnesses: Witnesses<f64>,
}

/// Outcome of the separate-convexity test of `g`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparateConvexityReport {
    pub holds: bool,
    pub witnesses: Witnesses<(f64, f64)>,
}

fn sample(e: &Energy, ts: &[f64]) -> Result<Vec<f64>> {
    ts.iter()
        .map(|&t| {
            let v = e.h(t);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Evaluation {
                    at: t,
                    msg: format!("h({t}) = {v}"),
                })
            }
        })
        .collect()
}

/// Rounding allowance for a test involving the given values.
fn rounding_floor(values: &[f64]) -> f64 {
    16.0 * f64::EPSILON * values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Tolerance for a chord test: relative to the local variation of the three
/// samples, so exponentially growing energies do not drown out small
/// violations near `t = 1`.
fn chord_tol(f: [f64; 3]) -> f64 {
    CHORD_TOL * ((f[0] - f[1]).abs() + (f[2] - f[1]).abs()) + rounding_floor(&f)
}

/// `true` when `f₀, f₁, f₂` violate convexity beyond tolerance.
pub(crate) fn chord_violated(x: [f64; 3], f: [f64; 3]) -> bool {
    chord_excess(x, f) > chord_tol(f)
}

/// `f(x₁)` minus the chord through `(x₀, f₀)` and `(x₂, f₂)` at `x₁`. Positive
/// exactly when the second divided difference is negative.
pub(crate) fn chord_excess(x: [f64; 3], f: [f64; 3]) -> f64 {
    let chord = ((x[2] - x[1]) * f[0] + (x[1] - x[0]) * f[2]) / (x[2] - x[0]);
    f[1] - chord
}

fn check_grid(grid: &LogGrid) -> Result<()> {
    if grid.t_min != 1.0 || grid.n < 100 {
        return Err(Error::Argument(format!(
            "convexity grid must start at t = 1 with >= 100 samples, got {grid:?}"
        )));
    }
    Ok(())
}

/// Convexity and monotonicity of `h` on the grid.
pub fn classify_h(e: &Energy, grid: &LogGrid) -> Result<ConvexityVerdict> {
    check_grid(grid)?;
    let ts = grid.points();
    let hs = sample(e, &ts)?;

    let mut convexity = Witnesses::default();
    for i in 1..ts.len() - 1 {
        if chord_violated([ts[i - 1], ts[i], ts[i + 1]], [hs[i - 1], hs[i], hs[i + 1]]) {
            convexity.push(ts[i]);
        }
    }
    // a decrease counts when it exceeds 1e-9 of the range seen so far
    let mut monotonicity = Witnesses::default();
    let (mut lo, mut hi) = (hs[0], hs[0]);
    for i in 1..ts.len() {
        lo = lo.min(hs[i]);
        hi = hi.max(hs[i]);
        let tol = CHORD_TOL * (hi - lo) + rounding_floor(&hs[i - 1..=i]);
        if hs[i] - hs[i - 1] < -tol {
            monotonicity.push(ts[i]);
        }
    }
    let overall = convexity.is_empty() && monotonicity.is_empty();
    Ok(ConvexityVerdict {
        grid: *grid,
        h_convex: convexity.is_empty(),
        h_nondecreasing_on_1inf: monotonicity.is_empty(),
        g_separately_convex: None,
        psi_criterion_vii: None,
        overall,
        inconsistent: false,
        convexity_witnesses: convexity,
        monotonicity_witnesses: monotonicity,
        separate_witnesses: Witnesses::default(),
        criterion_vii_witnesses: Witnesses::default(),
    })
}

/// The `Ψ` criterion, sampled at `𝕂 = ½(t + 1/t)` for the grid's `t > 1`.
///
/// Each sample is compared against `1e-7` times the larger of its two terms,
/// so the verdict does not depend on the magnitude of the energy far out.
pub fn criterion_vii(e: &Energy, grid: &LogGrid) -> Result<CriterionReport> {
    check_grid(grid)?;
    let mut witnesses = Witnesses::default();
    let (mut min_value, mut argmin) = (f64::INFINITY, f64::NAN);
    for t in grid.points().into_iter().filter(|&t| t > 1.0) {
        let x = kk_from_k_unchecked(t);
        if x <= 1.0 {
            continue;
        }
        let (d1, d2) = (e.dpsi(x), e.d2psi(x));
        if !d1.is_finite() || !d2.is_finite() {
            return Err(Error::Evaluation {
                at: x,
                msg: format!("psi derivatives not finite: psi' = {d1}, psi'' = {d2}"),
            });
        }
        let s2 = (x - 1.0) * (x + 1.0);
        let curvature_term = s2 * (x + s2.sqrt()) * d2;
        let magnitude = curvature_term.abs().max(d1.abs());
        let value = if magnitude == 0.0 {
            0.0
        } else {
            (curvature_term + d1) / magnitude
        };
        if value < min_value {
            min_value = value;
            argmin = x;
        }
        if value < -CRITERION_VII_TOL {
            witnesses.push(x);
        }
    }
    Ok(CriterionReport {
        holds: witnesses.is_empty(),
        boundary_indeterminate: min_value.abs() <= CRITERION_VII_TOL,
        min_value,
        argmin,
        witnesses,
    })
}

/// Separate convexity of `g` on the square grid `axis × axis`, by chord tests
/// along every row and every column.
pub fn separately_convex_g(e: &Energy, axis: &LogGrid) -> Result<SeparateConvexityReport> {
    let xs = axis.points();
    let n = xs.len();
    let mut values = Vec::with_capacity(n * n);
    for &y in &xs {
        for &x in &xs {
            let v = e.g(x, y);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    at: x,
                    msg: format!("g({x}, {y}) = {v}"),
                });
            }
            values.push(v);
        }
    }
    let at = |row: usize, col: usize| values[row * n + col];
    let mut witnesses = Witnesses::default();
    for row in 0..n {
        for col in 1..n - 1 {
            let x = [xs[col - 1], xs[col], xs[col + 1]];
            if chord_violated(x, [at(row, col - 1), at(row, col), at(row, col + 1)]) {
                witnesses.push((xs[col], xs[row]));
            }
            // the column through (row, col) with roles swapped
            let (r, c) = (col, row);
            if chord_violated(x, [at(r - 1, c), at(r, c), at(r + 1, c)]) {
                witnesses.push((xs[c], xs[r]));
            }
        }
    }
    Ok(SeparateConvexityReport {
        holds: witnesses.is_empty(),
        witnesses,
    })
}

/// Runs every criterion that applies and flags disagreement with `overall`.
///
/// The `Ψ` criterion is included when `Ψ′`, `Ψ″` exist analytically or can be
/// differentiated numerically, i.e. always; `g` is tested on `g_axis`.
pub fn classify_all(e: &Energy, grid: &LogGrid, g_axis: &LogGrid) -> Result<ConvexityVerdict> {
    let mut verdict = classify_h(e, grid)?;
    let separate = separately_convex_g(e, g_axis)?;
    let vii = criterion_vii(e, grid)?;
    verdict.g_separately_convex = Some(separate.holds);
    verdict.psi_criterion_vii = Some(vii.holds);
    verdict.separate_witnesses = separate.witnesses;
    verdict.criterion_vii_witnesses = vii.witnesses;
    verdict.inconsistent = separate.holds != verdict.overall || vii.holds != verdict.overall;
    Ok(verdict)
}

/// Defaults used by the CLI: `h` on `[1, 10³]` and `g` on `[0.1, 10]²`.
pub fn default_grids() -> (LogGrid, LogGrid) {
    (
        LogGrid { t_min: 1.0, t_max: 1e3, n: 2000 },
        LogGrid { t_min: 0.1, t_max: 10.0, n: 200 },
    )
}
