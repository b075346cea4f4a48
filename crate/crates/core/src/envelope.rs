//! Monotone-convex envelopes `C_m h` on `[1, ∞)`.
//!
//! `C_m h` is the largest convex, non-decreasing minorant of `h` on `[1, ∞)`,
//! and `C_m h(λ₁/λ₂)` is the quasiconvex envelope of `W = h(λ₁/λ₂)`. Two
//! routes compute it from samples and check each other:
//!
//! * flatten `h` to its running minimum up to the leftmost minimizer, then
//!   take the lower convex hull;
//! * reflect `h` about `t = 1` (`ĥ(x) = h(2 − x)` for `x < 1`), take the
//!   ordinary lower hull and restrict it to `[1, ∞)`.
//!
//! Hull edges that skip samples become affine segments; with
//! [`EnvelopeConfig::refine_maxwell`] their endpoints are moved to the exact
//! double tangent by Newton's method. Segments where the hull touches `h`
//! are stored as [`SegmentKind::FollowH`] and evaluate `h` itself.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::convexity::chord_violated;
use crate::energies::{self, Energy, RadialProfile, TailGrowth};
use crate::grid::log_space;
use crate::kinematics::{linear_distortion, Mat2};
use crate::{Error, Result};

/// Samples with `|h|` above this are treated like `+∞`: they cannot support
/// the lower hull and would overflow slope computations.
const HUGE: f64 = 1e100;
/// Relative gap below which a sample counts as touching a hull chord.
const TOUCH_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelopeConfig {
    /// Right end of the sampled domain `[1, t_max]`.
    pub t_max: f64,
    /// Log-spaced samples on `[1, t_max]`.
    pub n_samples: usize,
    pub refine_maxwell: bool,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        EnvelopeConfig {
            t_max: 1e4,
            n_samples: 4096,
            refine_maxwell: true,
            newton_tol: 1e-12,
            newton_max_iter: 100,
        }
    }
}

impl EnvelopeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 1.0 && self.t_max.is_finite()) {
            return Err(Error::Argument(format!("t_max must be in (1, inf), got {}", self.t_max)));
        }
        if self.n_samples < 256 {
            return Err(Error::Argument(format!(
                "n_samples must be >= 256, got {}",
                self.n_samples
            )));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::Argument("newton_tol and newton_max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind {
    /// The envelope equals `h`.
    FollowH,
    /// `intercept + slope·t`; `refined` tells whether the endpoints are exact
    /// double tangents or the discrete hull chord.
    Affine { intercept: f64, slope: f64, refined: bool },
    Constant { value: f64 },
}

/// The envelope on `[t_lo, t_hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_lo: f64,
    pub t_hi: f64,
    #[serde(flatten)]
    pub kind: SegmentKind,
}

/// The envelope on `[t_lo, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub t_lo: f64,
    #[serde(flatten)]
    pub kind: SegmentKind,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFlags {
    /// The result may change if `t_max` grows: the tail is not provably exact.
    pub truncation_sensitive: bool,
    /// Samples dropped because `h` was `+∞` or astronomically large there.
    pub excluded_samples: usize,
    /// Affine segments left at the discrete chord.
    pub unrefined_segments: usize,
    /// Leftmost minimizer of `h` on the samples.
    pub minimizer: f64,
    /// `min h` on the samples.
    pub minimum: f64,
}

/// Which construction produced an envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Flatten,
    Reflect,
}

/// `C_m h` as a partition of `[1, ∞)` into segments plus a tail.
#[derive(Clone)]
pub struct PiecewiseEnvelope {
    pub segments: Vec<Segment>,
    pub tail: Tail,
    pub flags: EnvelopeFlags,
    pub config: EnvelopeConfig,
    pub route: Route,
    energy: Energy,
}

impl fmt::Debug for PiecewiseEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewiseEnvelope")
            .field("energy", &self.energy.label())
            .field("segments", &self.segments)
            .field("tail", &self.tail)
            .field("flags", &self.flags)
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct EnvelopeRecord {
    energy: Option<String>,
    route: Route,
    config: EnvelopeConfig,
    segments: Vec<Segment>,
    tail: Tail,
    flags: EnvelopeFlags,
}

fn eval_kind(kind: &SegmentKind, t: f64, f: impl Fn(f64) -> f64) -> f64 {
    match *kind {
        SegmentKind::FollowH => f(t),
        SegmentKind::Affine { intercept, slope, refined: true } => intercept + slope * t,
        // a sampled chord can overshoot h between a sample and an unresolved
        // kink; the true envelope lies below both
        SegmentKind::Affine { intercept, slope, refined: false } => (intercept + slope * t).min(f(t)),
        SegmentKind::Constant { value } => value,
    }
}

fn eval_pieces(segments: &[Segment], tail: &Tail, t: f64, f: impl Fn(f64) -> f64) -> f64 {
    if t >= tail.t_lo {
        return eval_kind(&tail.kind, t, f);
    }
    let i = segments.partition_point(|s| s.t_lo <= t).saturating_sub(1);
    eval_kind(&segments[i].kind, t, f)
}

impl PiecewiseEnvelope {
    pub fn energy(&self) -> &Energy {
        &self.energy
    }

    /// `C_m h(t)`; `t < 1` is mapped to `1/t` and `t ≤ 0` gives NaN.
    pub fn eval(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return f64::NAN;
        }
        let t = if t < 1.0 { 1.0 / t } else { t };
        eval_pieces(&self.segments, &self.tail, t, |t| self.energy.h(t))
    }

    /// The segment or tail containing `t ≥ 1`, as `(t_lo, t_hi, kind)`.
    pub fn piece_at(&self, t: f64) -> (f64, f64, SegmentKind) {
        if t >= self.tail.t_lo {
            return (self.tail.t_lo, f64::INFINITY, self.tail.kind);
        }
        let i = self.segments.partition_point(|s| s.t_lo <= t).saturating_sub(1);
        let s = &self.segments[i];
        (s.t_lo, s.t_hi, s.kind)
    }

    /// All pieces including the tail, the tail with `t_hi = ∞`.
    pub fn pieces(&self) -> Vec<Segment> {
        let mut v = self.segments.clone();
        v.push(Segment {
            t_lo: self.tail.t_lo,
            t_hi: f64::INFINITY,
            kind: self.tail.kind,
        });
        v
    }

    /// Breakpoints, starting with 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.segments.iter().map(|s| s.t_lo).collect();
        v.push(self.tail.t_lo);
        v
    }

    /// Reference magnitude for tolerances: the largest `|C_m h|` at a breakpoint, at least 1.
    pub fn scale(&self) -> f64 {
        self.breakpoints()
            .iter()
            .map(|&t| self.eval(t).abs())
            .fold(1.0, f64::max)
    }

    /// Affine segments, as `(t1, t2, intercept, slope, refined)`.
    pub fn affine_segments(&self) -> Vec<(f64, f64, f64, f64, bool)> {
        self.segments
            .iter()
            .filter_map(|s| match s.kind {
                SegmentKind::Affine { intercept, slope, refined } => {
                    Some((s.t_lo, s.t_hi, intercept, slope, refined))
                }
                _ => None,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = EnvelopeRecord {
            energy: self.energy.tag().map(str::to_string),
            route: self.route,
            config: self.config,
            segments: self.segments.clone(),
            tail: self.tail,
            flags: self.flags,
        };
        serde_json::to_string_pretty(&rec).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reloads a serialized envelope, resolving its energy by tag.
    pub fn from_json(s: &str) -> Result<Self> {
        let rec: EnvelopeRecord = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let tag = rec.energy.as_deref().ok_or_else(|| {
            Error::Unsupported("envelope record has no energy tag; use from_json_with_energy".into())
        })?;
        let energy = energies::resolve(tag)?;
        Ok(Self::from_record(rec, energy))
    }

    /// Reloads a serialized envelope for an energy supplied by the caller.
    pub fn from_json_with_energy(s: &str, energy: Energy) -> Result<Self> {
        let rec: EnvelopeRecord = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self::from_record(rec, energy))
    }

    fn from_record(rec: EnvelopeRecord, energy: Energy) -> Self {
        PiecewiseEnvelope {
            segments: rec.segments,
            tail: rec.tail,
            flags: rec.flags,
            config: rec.config,
            route: rec.route,
            energy,
        }
    }

    /// `C_m h(λ₁/λ₂)` for a matrix with positive determinant.
    pub fn eval_matrix(&self, f: &Mat2) -> Result<f64> {
        Ok(self.eval(linear_distortion(f)?))
    }
}

/// Lower convex hull of points with strictly increasing `x`. Collinear
/// interior points are dropped.
pub fn lower_convex_hull_1d(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if points.len() < 2 {
        return Err(Error::Argument(format!("hull needs >= 2 points, got {}", points.len())));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Argument("hull points must be finite".into()));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Argument("hull x values must be strictly increasing".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    Ok(hull_indices(&xs, &ys).into_iter().map(|i| points[i]).collect())
}

/// Monotone chain on sorted input, comparing slopes rather than cross
/// products so very large values do not overflow.
fn hull_indices(xs: &[f64], ys: &[f64]) -> Vec<usize> {
    let slope = |i: usize, j: usize| (ys[j] - ys[i]) / (xs[j] - xs[i]);
    let mut h: Vec<usize> = Vec::with_capacity(xs.len());
    for k in 0..xs.len() {
        while h.len() >= 2 && slope(h[h.len() - 2], h[h.len() - 1]) >= slope(h[h.len() - 1], k) {
            h.pop();
        }
        h.push(k);
    }
    h
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - R * (hi - lo);
    let mut d = lo + R * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (hi - lo) <= rel_tol * (lo.abs() + hi.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - R * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + R * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Value and derivatives of the function being convexified.
struct Curve<'a> {
    f: &'a dyn Fn(f64) -> f64,
    df: &'a dyn Fn(f64) -> f64,
    d2f: &'a dyn Fn(f64) -> f64,
}

/// Kept samples of the curve, sorted, starting at the domain origin.
struct Samples {
    xs: Vec<f64>,
    ys: Vec<f64>,
    excluded: usize,
    /// Index of the leftmost minimizer.
    argmin: usize,
}

fn sample_curve(curve: &Curve, grid: &[f64]) -> Result<Samples> {
    let (mut xs, mut ys) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    let mut excluded = 0;
    for &x in grid {
        let y = (curve.f)(x);
        if y.is_nan() || y == f64::NEG_INFINITY {
            return Err(Error::Evaluation {
                at: x,
                msg: format!("energy value {y}"),
            });
        }
        if y.abs() > HUGE {
            if y < 0.0 {
                return Err(Error::EnvelopeUndefined(format!("value {y} at {x}")));
            }
            excluded += 1;
            continue;
        }
        xs.push(x);
        ys.push(y);
    }
    if xs.len() < 2 || xs[0] != grid[0] {
        return Err(Error::Evaluation {
            at: grid[0],
            msg: "too few finite samples at the start of the domain".into(),
        });
    }
    let mut argmin = 0;
    for (i, &y) in ys.iter().enumerate() {
        if y < ys[argmin] {
            argmin = i;
        }
    }
    Ok(Samples { xs, ys, excluded, argmin })
}

/// Rejects curves that keep decreasing past the sampled domain at a rate
/// that does not die out, and reports whether the minimum is at the right end.
fn check_bounded_below(curve: &Curve, s: &Samples) -> Result<bool> {
    let n = s.xs.len();
    if s.argmin != n - 1 || s.ys[n - 1] >= s.ys[n - 2] {
        return Ok(false);
    }
    let x_last = s.xs[n - 1];
    let mut prev = s.ys[n - 1];
    let mut prev_drop: Option<f64> = None;
    let mut sustained = true;
    for j in 1..=8 {
        let v = (curve.f)(x_last * f64::powi(2.0, j));
        if !v.is_finite() || v >= prev {
            sustained = false;
            break;
        }
        let drop = prev - v;
        if let Some(p) = prev_drop {
            if drop < 0.75 * p {
                sustained = false;
                break;
            }
        }
        prev_drop = Some(drop);
        prev = v;
    }
    if sustained {
        return Err(Error::EnvelopeUndefined(format!(
            "h is decreasing at t = {x_last} without levelling off; it is not bounded below"
        )));
    }
    Ok(true)
}

/// Inserts a refined interior minimizer and returns the updated argmin.
fn refine_minimizer(curve: &Curve, s: &mut Samples) {
    let i = s.argmin;
    if i == 0 || i + 1 >= s.xs.len() {
        return;
    }
    let (lo, hi) = (s.xs[i - 1], s.xs[i + 1]);
    let (mut x, mut y) = golden_section_min(curve.f, lo, hi, 1e-15);
    // polish with Newton on f′ when curvature is usable
    for _ in 0..8 {
        let (d1, d2) = ((curve.df)(x), (curve.d2f)(x));
        if !(d2 > 0.0) || !d1.is_finite() {
            break;
        }
        let xn = x - d1 / d2;
        if !(xn > lo && xn < hi) {
            break;
        }
        let yn = (curve.f)(xn);
        if !(yn <= y) {
            break;
        }
        let done = (xn - x).abs() <= 4.0 * f64::EPSILON * x.abs();
        x = xn;
        y = yn;
        if done {
            break;
        }
    }
    if !(y <= s.ys[i]) || x == s.xs[i] {
        return;
    }
    let pos = if x < s.xs[i] { i } else { i + 1 };
    s.xs.insert(pos, x);
    s.ys.insert(pos, y);
    s.argmin = pos;
}

/// One hull vertex restricted to the domain: sample index, or the clipped
/// crossing point at the origin.
#[derive(Clone, Copy, Debug)]
struct Vertex {
    x: f64,
    y: f64,
    idx: usize,
}

fn hull_vertices(s: &Samples, route: Route, origin: f64) -> Vec<Vertex> {
    match route {
        Route::Flatten => {
            let m = s.ys[s.argmin];
            let ys: Vec<f64> = s
                .ys
                .iter()
                .enumerate()
                .map(|(i, &y)| if i <= s.argmin { m } else { y })
                .collect();
            hull_indices(&s.xs, &ys)
                .into_iter()
                .map(|i| Vertex { x: s.xs[i], y: ys[i], idx: i })
                .collect()
        }
        Route::Reflect => {
            let n = s.xs.len();
            let mut xs = Vec::with_capacity(2 * n - 1);
            let mut ys = Vec::with_capacity(2 * n - 1);
            let mut idx = Vec::with_capacity(2 * n - 1);
            for i in (1..n).rev() {
                xs.push(2.0 * origin - s.xs[i]);
                ys.push(s.ys[i]);
                idx.push(i);
            }
            xs.extend_from_slice(&s.xs);
            ys.extend_from_slice(&s.ys);
            idx.extend(0..n);
            let hull = hull_indices(&xs, &ys);
            let first = hull.iter().position(|&k| xs[k] >= origin).unwrap_or(hull.len() - 1);
            let mut out = Vec::with_capacity(hull.len() - first + 1);
            if xs[hull[first]] > origin && first > 0 {
                let (a, b) = (hull[first - 1], hull[first]);
                let w = (origin - xs[a]) / (xs[b] - xs[a]);
                out.push(Vertex {
                    x: origin,
                    y: ys[a] + w * (ys[b] - ys[a]),
                    idx: 0,
                });
            }
            out.extend(hull[first..].iter().map(|&k| Vertex { x: xs[k], y: ys[k], idx: idx[k] }));
            out
        }
    }
}

struct Built {
    segments: Vec<Segment>,
    tail: Tail,
    flags: EnvelopeFlags,
}

/// Largest amount by which a sample in `[a.idx, b.idx]` lies above the chord.
fn chord_gap(s: &Samples, a: &Vertex, b: &Vertex) -> f64 {
    let slope = (b.y - a.y) / (b.x - a.x);
    (a.idx..=b.idx)
        .map(|i| s.ys[i] - (a.y + slope * (s.xs[i] - a.x)))
        .fold(0.0, f64::max)
}

fn touch_tol(a: &Vertex, b: &Vertex) -> f64 {
    TOUCH_TOL * a.y.abs().max(b.y.abs()).max(1.0)
}

/// Result of a double-tangent solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleTangent {
    pub t1: f64,
    pub t2: f64,
    pub intercept: f64,
    pub slope: f64,
    /// `false` when Newton failed and the discrete chord is returned.
    pub refined: bool,
    pub iterations: usize,
}

struct NewtonOpts {
    tol: f64,
    max_iter: usize,
}

/// Free double tangent: `f′(a) = f′(b) = (f(b) − f(a))/(b − a)`.
fn newton_two_sided(curve: &Curve, a0: f64, b0: f64, lower: f64, opts: &NewtonOpts) -> Option<(f64, f64, usize)> {
    let (mut a, mut b) = (a0, b0);
    for it in 0..opts.max_iter {
        let (fa, fb) = ((curve.f)(a), (curve.f)(b));
        let (da, db) = ((curve.df)(a), (curve.df)(b));
        let (sa, sb) = ((curve.d2f)(a), (curve.d2f)(b));
        let r1 = da - db;
        let r2 = fb - fa - da * (b - a);
        let (s1, s2) = (da.abs().max(1.0), fa.abs().max(fb.abs()).max(1.0));
        if !(r1.is_finite() && r2.is_finite()) {
            return None;
        }
        if r1.abs() <= opts.tol * s1 && r2.abs() <= opts.tol * s2 {
            return Some((a, b, it));
        }
        let det = sa * (db - da) - sa * sb * (b - a);
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        // J = [[sa, −sb], [−sa(b−a), db − da]]
        let da_step = -((db - da) * r1 + sb * r2) / det;
        let db_step = -(sa * (b - a) * r1 + sa * r2) / det;
        let mut lambda = 1.0;
        let (mut an, mut bn) = (a + da_step, b + db_step);
        while !(an > lower && bn > an && (curve.f)(bn).is_finite()) {
            lambda *= 0.5;
            if lambda < 1e-10 {
                return None;
            }
            an = a + lambda * da_step;
            bn = b + lambda * db_step;
        }
        let stalled = (an - a).abs() + (bn - b).abs() <= 8.0 * f64::EPSILON * (a.abs() + b.abs());
        a = an;
        b = bn;
        if stalled {
            // derivatives are only as accurate as their differences allow
            let r1 = (curve.df)(a) - (curve.df)(b);
            let r2 = (curve.f)(b) - (curve.f)(a) - (curve.df)(a) * (b - a);
            return (r1.abs() <= 1e-6 * s1 && r2.abs() <= 1e-6 * s2).then_some((a, b, it + 1));
        }
    }
    // difference derivatives jitter below ~1e-11 instead of stalling
    let r1 = (curve.df)(a) - (curve.df)(b);
    let r2 = (curve.f)(b) - (curve.f)(a) - (curve.df)(a) * (b - a);
    let (s1, s2) = ((curve.df)(a).abs().max(1.0), (curve.f)(a).abs().max((curve.f)(b).abs()).max(1.0));
    (r1.abs() <= 1e-6 * s1 && r2.abs() <= 1e-6 * s2).then_some((a, b, opts.max_iter))
}

/// Tangent from a fixed left point `(a, ya)`: `f′(b)(b − a) = f(b) − ya`.
fn newton_pinned(curve: &Curve, a: f64, ya: f64, b0: f64, opts: &NewtonOpts) -> Option<(f64, usize)> {
    let mut b = b0;
    for it in 0..opts.max_iter {
        let (fb, db, sb) = ((curve.f)(b), (curve.df)(b), (curve.d2f)(b));
        let r = db * (b - a) - (fb - ya);
        let scale = fb.abs().max(ya.abs()).max(1.0);
        if !r.is_finite() {
            return None;
        }
        if r.abs() <= opts.tol * scale {
            return Some((b, it));
        }
        let dr = sb * (b - a);
        if dr == 0.0 || !dr.is_finite() {
            return None;
        }
        let step = -r / dr;
        let mut lambda = 1.0;
        let mut bn = b + step;
        while !(bn > a && (curve.f)(bn).is_finite()) {
            lambda *= 0.5;
            if lambda < 1e-10 {
                return None;
            }
            bn = b + lambda * step;
        }
        let stalled = (bn - b).abs() <= 8.0 * f64::EPSILON * b.abs();
        b = bn;
        if stalled {
            let r = (curve.df)(b) * (b - a) - ((curve.f)(b) - ya);
            return (r.abs() <= 1e-6 * scale).then_some((b, it + 1));
        }
    }
    let r = (curve.df)(b) * (b - a) - ((curve.f)(b) - ya);
    (r.abs() <= 1e-6 * (curve.f)(b).abs().max(ya.abs()).max(1.0)).then_some((b, opts.max_iter))
}

/// Local sample spacing around index `i`.
fn spacing(xs: &[f64], i: usize) -> f64 {
    let lo = if i > 0 { xs[i] - xs[i - 1] } else { 0.0 };
    let hi = if i + 1 < xs.len() { xs[i + 1] - xs[i] } else { 0.0 };
    lo.max(hi)
}

/// `true` when the chord through `(a, f(a))` with the given slope stays
/// below the samples strictly inside `(a, b)`.
fn chord_below_samples(curve: &Curve, xs: &[f64], a: f64, b: f64, intercept: f64, slope: f64) -> bool {
    xs.iter().filter(|&&x| x > a && x < b).all(|&x| {
        let y = (curve.f)(x);
        y - (intercept + slope * x) >= -1e-9 * y.abs().max(1.0)
    })
}

/// Refines the affine edge `a → b`; returns `(t1, t2, intercept, slope, iterations)`.
fn refine_edge(
    curve: &Curve,
    s: &Samples,
    a: &Vertex,
    b: &Vertex,
    pinned_left: bool,
    origin: f64,
    opts: &NewtonOpts,
) -> Option<(f64, f64, f64, f64, usize)> {
    let (t1, t2, iters) = if pinned_left {
        let (t2, it) = newton_pinned(curve, a.x, a.y, b.x, opts)?;
        (a.x, t2, it)
    } else {
        newton_two_sided(curve, a.x, b.x, origin, opts)?
    };
    let y1 = if pinned_left { a.y } else { (curve.f)(t1) };
    let slope = ((curve.f)(t2) - y1) / (t2 - t1);
    let intercept = y1 - slope * t1;
    let near = |t: f64, v: &Vertex| (t - v.x).abs() <= 2.0 * spacing(&s.xs, v.idx);
    let ok = (pinned_left || near(t1, a))
        && near(t2, b)
        && slope.is_finite()
        && chord_below_samples(curve, &s.xs, t1, t2, intercept, slope);
    ok.then_some((t1, t2, intercept, slope, iters))
}

struct BuildOpts {
    route: Route,
    origin: f64,
    sigma: Option<f64>,
    refine: bool,
    newton: NewtonOpts,
}

fn build(curve: &Curve, grid: &[f64], opts: &BuildOpts) -> Result<Built> {
    let mut s = sample_curve(curve, grid)?;
    let decreasing_at_end = check_bounded_below(curve, &s)?;
    refine_minimizer(curve, &mut s);
    let mut flags = EnvelopeFlags {
        truncation_sensitive: decreasing_at_end,
        excluded_samples: s.excluded,
        unrefined_segments: 0,
        minimizer: s.xs[s.argmin],
        minimum: s.ys[s.argmin],
    };

    let mut verts = hull_vertices(&s, opts.route, opts.origin);
    let mut tail_kind = SegmentKind::FollowH;
    if let Some(sigma) = opts.sigma {
        let mut best = 0;
        for (k, v) in verts.iter().enumerate() {
            if v.y - sigma * v.x < verts[best].y - sigma * verts[best].x {
                best = k;
            }
        }
        verts.truncate(best + 1);
        let v = verts[best];
        tail_kind = if sigma == 0.0 {
            SegmentKind::Constant { value: v.y }
        } else {
            SegmentKind::Affine {
                intercept: v.y - sigma * v.x,
                slope: sigma,
                refined: true,
            }
        };
    }
    let last_sample = s.xs.len() - 1;

    // classify hull edges
    let mut segments: Vec<Segment> = Vec::new();
    for w in verts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let kind = if chord_gap(&s, a, b) <= touch_tol(a, b) {
            SegmentKind::FollowH
        } else if a.y == b.y {
            SegmentKind::Constant { value: a.y }
        } else {
            let slope = (b.y - a.y) / (b.x - a.x);
            SegmentKind::Affine {
                intercept: a.y - slope * a.x,
                slope,
                refined: false,
            }
        };
        segments.push(Segment { t_lo: a.x, t_hi: b.x, kind });
    }

    // double tangents
    let mut k = 0;
    while k < segments.len() {
        if let SegmentKind::Affine { .. } = segments[k].kind {
            let (a, b) = (&verts[k], &verts[k + 1]);
            let pinned = k == 0 && a.x == opts.origin
                || k > 0 && matches!(segments[k - 1].kind, SegmentKind::Constant { .. });
            let at_truncation = b.idx == last_sample && opts.sigma.is_none();
            if at_truncation {
                flags.truncation_sensitive = true;
            }
            let refined = if opts.refine && !at_truncation {
                refine_edge(curve, &s, a, b, pinned, opts.origin, &opts.newton)
            } else {
                None
            };
            match refined {
                Some((t1, t2, intercept, slope, _)) => {
                    let prev_ok = k == 0 || t1 > segments[k - 1].t_lo;
                    let next_ok = k + 1 >= segments.len() || t2 < segments[k + 1].t_hi;
                    if prev_ok && next_ok {
                        segments[k] = Segment {
                            t_lo: t1,
                            t_hi: t2,
                            kind: SegmentKind::Affine { intercept, slope, refined: true },
                        };
                        if k > 0 {
                            segments[k - 1].t_hi = t1;
                        }
                        if k + 1 < segments.len() {
                            segments[k + 1].t_lo = t2;
                        }
                    } else {
                        flags.unrefined_segments += 1;
                    }
                }
                None => flags.unrefined_segments += 1,
            }
        }
        k += 1;
    }

    // merge neighbours of equal kind
    let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
    for seg in segments {
        match merged.last_mut() {
            Some(last) if same_piece(&last.kind, &seg.kind) => last.t_hi = seg.t_hi,
            _ => merged.push(seg),
        }
    }
    let tail_lo = verts.last().map_or(opts.origin, |v| v.x);
    let mut tail = Tail { t_lo: tail_lo, kind: tail_kind };
    // a refined last segment may end beyond the tail start; never for FollowH tails
    if let Some(last) = merged.last() {
        tail.t_lo = last.t_hi.max(tail.t_lo);
    }
    while let Some(last) = merged.last() {
        if same_piece(&last.kind, &tail.kind) {
            tail.t_lo = last.t_lo;
            merged.pop();
        } else {
            break;
        }
    }
    if merged.is_empty() {
        tail.t_lo = opts.origin;
    }

    if matches!(tail.kind, SegmentKind::FollowH) {
        let x_last = s.xs[last_sample];
        if !tail_convex_increasing(&s, x_last / 2.0) {
            flags.truncation_sensitive = true;
        }
    }
    Ok(Built { segments: merged, tail, flags })
}

fn same_piece(a: &SegmentKind, b: &SegmentKind) -> bool {
    match (a, b) {
        (SegmentKind::FollowH, SegmentKind::FollowH) => true,
        (SegmentKind::Constant { value: u }, SegmentKind::Constant { value: v }) => u == v,
        (
            SegmentKind::Affine { intercept: i1, slope: s1, .. },
            SegmentKind::Affine { intercept: i2, slope: s2, .. },
        ) => i1 == i2 && s1 == s2,
        _ => false,
    }
}

fn tail_convex_increasing(s: &Samples, from: f64) -> bool {
    let start = s.xs.partition_point(|&x| x < from);
    let (xs, ys) = (&s.xs[start..], &s.ys[start..]);
    let increasing = ys.windows(2).all(|w| w[1] >= w[0]);
    let convex = (1..xs.len().saturating_sub(1))
        .all(|i| !chord_violated([xs[i - 1], xs[i], xs[i + 1]], [ys[i - 1], ys[i], ys[i + 1]]));
    increasing && convex
}

fn energy_curve_parts(e: &Energy) -> (impl Fn(f64) -> f64 + '_, impl Fn(f64) -> f64 + '_, impl Fn(f64) -> f64 + '_) {
    (move |t| e.h(t), move |t| e.dh(t), move |t| e.d2h(t))
}

fn sigma_of(e: &Energy) -> Option<f64> {
    match e.growth() {
        TailGrowth::Linear(s) => Some(s),
        TailGrowth::Superlinear | TailGrowth::Unknown => None,
    }
}

fn envelope_by(e: &Energy, cfg: &EnvelopeConfig, route: Route) -> Result<PiecewiseEnvelope> {
    cfg.validate()?;
    let (f, df, d2f) = energy_curve_parts(e);
    let curve = Curve { f: &f, df: &df, d2f: &d2f };
    let grid = log_space(1.0, cfg.t_max, cfg.n_samples);
    let opts = BuildOpts {
        route,
        origin: 1.0,
        sigma: sigma_of(e),
        refine: cfg.refine_maxwell,
        newton: NewtonOpts {
            tol: cfg.newton_tol,
            max_iter: cfg.newton_max_iter,
        },
    };
    let built = build(&curve, &grid, &opts)?;
    let mut env = PiecewiseEnvelope {
        segments: built.segments,
        tail: built.tail,
        flags: built.flags,
        config: *cfg,
        route,
        energy: e.clone(),
    };
    if e.growth() == TailGrowth::Unknown && !env.flags.truncation_sensitive {
        env.flags.truncation_sensitive = slope_moves_with_domain(&curve, cfg, &opts, &env);
    }
    Ok(env)
}

/// Whether the last affine slope changes by more than 1e-6 when `t_max` doubles.
fn slope_moves_with_domain(curve: &Curve, cfg: &EnvelopeConfig, opts: &BuildOpts, env: &PiecewiseEnvelope) -> bool {
    let Some(&(.., slope, _)) = env.affine_segments().last() else {
        return false;
    };
    let grid = log_space(1.0, 2.0 * cfg.t_max, cfg.n_samples + cfg.n_samples / 10);
    match build(curve, &grid, opts) {
        Ok(b) => {
            let last = b.segments.iter().rev().find_map(|s| match s.kind {
                SegmentKind::Affine { slope, .. } => Some(slope),
                _ => None,
            });
            last.is_none_or(|s2| (s2 - slope).abs() > 1e-6)
        }
        Err(_) => true,
    }
}

/// `C_m h` by flattening `h` up to its leftmost minimizer and taking the
/// lower convex hull of the samples.
///
/// Energies with linear or sublinear growth (`h(t)/t → σ`) get a tail ray of
/// slope `σ`, so e.g. `log² t` has the constant envelope `0`.
pub fn monotone_convex_envelope(e: &Energy, cfg: &EnvelopeConfig) -> Result<PiecewiseEnvelope> {
    envelope_by(e, cfg, Route::Flatten)
}

/// `C_m h` as the ordinary convex envelope of `ĥ(x) = h(2 − x)` (`x < 1`),
/// `h(x)` (`x ≥ 1`), restricted to `[1, ∞)`.
pub fn reflection_extension_envelope(e: &Energy, cfg: &EnvelopeConfig) -> Result<PiecewiseEnvelope> {
    envelope_by(e, cfg, Route::Reflect)
}

/// `inf h` over the samples, which is the ordinary convex envelope of `W`
/// on all of `ℝ²ˣ²` (no determinant constraint).
pub fn constant_convex_envelope(e: &Energy, cfg: &EnvelopeConfig) -> Result<f64> {
    cfg.validate()?;
    let (f, df, d2f) = energy_curve_parts(e);
    let curve = Curve { f: &f, df: &df, d2f: &d2f };
    let grid = log_space(1.0, cfg.t_max, cfg.n_samples);
    let mut s = sample_curve(&curve, &grid)?;
    check_bounded_below(&curve, &s)?;
    refine_minimizer(&curve, &mut s);
    Ok(s.ys[s.argmin])
}

/// Double tangent of `h` over the seed interval `[t_lo, t_hi]`: the hull of
/// `h` sampled there must have an affine edge, whose endpoints seed Newton.
pub fn maxwell_double_tangent(e: &Energy, seed: (f64, f64), cfg: &EnvelopeConfig) -> Result<DoubleTangent> {
    cfg.validate()?;
    let (lo, hi) = seed;
    if !(lo >= 1.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Argument(format!("seed interval must satisfy 1 <= lo < hi, got [{lo}, {hi}]")));
    }
    let (f, df, d2f) = energy_curve_parts(e);
    let curve = Curve { f: &f, df: &df, d2f: &d2f };
    let grid: Vec<f64> = (0..cfg.n_samples)
        .map(|i| lo + (hi - lo) * i as f64 / (cfg.n_samples - 1) as f64)
        .collect();
    let s = sample_curve(&curve, &grid)?;
    let idx = hull_indices(&s.xs, &s.ys);
    let verts: Vec<Vertex> = idx.iter().map(|&i| Vertex { x: s.xs[i], y: s.ys[i], idx: i }).collect();
    let best = verts
        .windows(2)
        .map(|w| (chord_gap(&s, &w[0], &w[1]) - touch_tol(&w[0], &w[1]), w[0], w[1]))
        .filter(|(g, ..)| *g > 0.0)
        .max_by(|x, y| x.0.total_cmp(&y.0));
    let Some((_, a, b)) = best else {
        return Err(Error::NothingToRefine);
    };
    let opts = NewtonOpts {
        tol: cfg.newton_tol,
        max_iter: cfg.newton_max_iter,
    };
    match refine_edge(&curve, &s, &a, &b, false, lo.min(1.0), &opts) {
        Some((t1, t2, intercept, slope, iterations)) => Ok(DoubleTangent {
            t1,
            t2,
            intercept,
            slope,
            refined: true,
            iterations,
        }),
        None => {
            let slope = (b.y - a.y) / (b.x - a.x);
            Ok(DoubleTangent {
                t1: a.x,
                t2: b.x,
                intercept: a.y - slope * a.x,
                slope,
                refined: false,
                iterations: cfg.newton_max_iter,
            })
        }
    }
}

/// Convex envelope of the even extension `g̃(x) = g(|x|)` restricted to
/// `[0, ∞)`, for energies `W(F) = g(√(‖F‖² − 2 det F))`.
#[derive(Clone)]
pub struct RadialEnvelope {
    pub segments: Vec<Segment>,
    pub tail: Tail,
    pub flags: EnvelopeFlags,
    pub r_max: f64,
    profile: RadialProfile,
}

impl fmt::Debug for RadialEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialEnvelope")
            .field("profile", &self.profile.label)
            .field("segments", &self.segments)
            .field("tail", &self.tail)
            .finish()
    }
}

impl RadialEnvelope {
    /// `Cg̃(r)`, even in `r`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        eval_pieces(&self.segments, &self.tail, r, |r| self.profile.eval(r))
    }

    /// The relaxed energy `Cg̃(√(‖F‖² − 2 det F))`.
    pub fn eval_matrix(&self, f: &Mat2) -> f64 {
        self.eval((f.norm_sq() - 2.0 * f.det()).max(0.0).sqrt())
    }
}

fn fd1(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = f64::EPSILON.cbrt() * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn fd2(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = f64::EPSILON.powf(0.25) * x.abs().max(1.0);
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Radial envelope on `[0, r_max]` with `r_max = cfg.t_max` and
/// `cfg.n_samples` uniform samples; beyond `r_max` it follows `g`.
pub fn dacorogna_radial_envelope(g: &RadialProfile, cfg: &EnvelopeConfig) -> Result<RadialEnvelope> {
    cfg.validate()?;
    let f = |r: f64| g.eval(r);
    let df = |r: f64| fd1(&f, r);
    let d2f = |r: f64| fd2(&f, r);
    let curve = Curve { f: &f, df: &df, d2f: &d2f };
    let grid: Vec<f64> = (0..cfg.n_samples)
        .map(|i| cfg.t_max * i as f64 / (cfg.n_samples - 1) as f64)
        .collect();
    let opts = BuildOpts {
        route: Route::Reflect,
        origin: 0.0,
        sigma: None,
        refine: cfg.refine_maxwell,
        newton: NewtonOpts {
            tol: cfg.newton_tol,
            max_iter: cfg.newton_max_iter,
        },
    };
    let built = build(&curve, &grid, &opts)?;
    Ok(RadialEnvelope {
        segments: built.segments,
        tail: built.tail,
        flags: built.flags,
        r_max: cfg.t_max,
        profile: g.clone(),
    })
}
