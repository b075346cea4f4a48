//! The relaxed energy `QW(F) = C_m h(λ₁/λ₂)`, its binodal region and energy
//! gap, and explicit first-order laminates that attain it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::energies::Energy;
use crate::envelope::{golden_section_min, EnvelopeConfig, PiecewiseEnvelope, SegmentKind};
use crate::grid::log_space;
use crate::kinematics::{linear_distortion, Mat2};
use crate::{Error, Result};

/// Relative threshold separating "strictly below `h`" from "touching".
pub const BINODAL_TOL: f64 = 1e-10;

fn check_pair(e: &Energy, env: &PiecewiseEnvelope) -> Result<()> {
    if env.energy().same_source(e) {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "envelope was built for `{}`, not `{}`",
            env.energy().label(),
            e.label()
        )))
    }
}

/// `QW(F)` for `F` with positive determinant.
pub fn qw_eval(e: &Energy, env: &PiecewiseEnvelope, f: &Mat2) -> Result<f64> {
    check_pair(e, env)?;
    Ok(env.eval(linear_distortion(f)?))
}

/// A maximal interval of `[1, ∞)` where `C_m h < h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    /// `+∞` for a binodal region that never closes (serialized as `null`).
    pub hi: f64,
    /// `true` when `lo = 1` belongs to the region.
    pub lo_closed: bool,
}

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        (t > self.lo || self.lo_closed && t == self.lo) && t < self.hi
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    /// Ratio `λ₁/λ₂` maximizing `h − C_m h` (over the sampled window if unbounded).
    pub x0: f64,
    pub delta: f64,
    pub binodal: Vec<Interval>,
    /// `x0` came from golden-section refinement rather than the best sample.
    pub refined: bool,
    /// The gap keeps growing past the sampled window.
    pub unbounded: bool,
}

/// Locates the binodal region and the largest gap `Δ = max (h − C_m h)`.
pub fn max_gap(e: &Energy, env: &PiecewiseEnvelope, cfg: &EnvelopeConfig) -> Result<GapReport> {
    check_pair(e, env)?;
    cfg.validate()?;
    let thr = BINODAL_TOL * env.scale();
    let gap = |t: f64| {
        let g = e.h(t) - env.eval(t);
        if g.is_finite() {
            g
        } else {
            f64::NEG_INFINITY
        }
    };

    let mut binodal = Vec::new();
    for p in env.pieces() {
        if matches!(p.kind, SegmentKind::FollowH) {
            continue;
        }
        let probe = if p.t_hi.is_finite() {
            0.5 * (p.t_lo + p.t_hi)
        } else {
            2.0 * p.t_lo + 1.0
        };
        if gap(probe) <= thr {
            continue;
        }
        binodal.push(Interval {
            lo: p.t_lo,
            hi: p.t_hi,
            lo_closed: p.t_lo == 1.0 && gap(1.0) > thr,
        });
    }

    let mut ts = log_space(1.0, cfg.t_max, cfg.n_samples);
    ts.extend(env.breakpoints());
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let (mut best, mut best_gap) = (0, f64::NEG_INFINITY);
    for (i, &t) in ts.iter().enumerate() {
        let g = gap(t);
        if g > best_gap {
            best = i;
            best_gap = g;
        }
    }
    let unbounded = binodal.last().is_some_and(|b| b.hi.is_infinite()) && best == ts.len() - 1;

    if best_gap <= thr {
        return Ok(GapReport {
            x0: 1.0,
            delta: 0.0,
            binodal,
            refined: false,
            unbounded: false,
        });
    }
    let (mut x0, mut delta, mut refined) = (ts[best], best_gap, false);
    if best > 0 && best + 1 < ts.len() {
        let (mut lo, mut hi) = (ts[best - 1], ts[best + 1]);
        if let Some(b) = binodal.iter().find(|b| b.contains(x0)) {
            lo = lo.max(b.lo);
            hi = hi.min(b.hi);
        }
        let (x, neg) = golden_section_min(|t| -gap(t), lo, hi, 1e-12);
        if -neg >= delta {
            x0 = x;
            delta = gap(x);
            refined = true;
        }
    }
    Ok(GapReport {
        x0,
        delta,
        binodal,
        refined,
        unbounded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// `t` is outside the binodal region; a single phase.
    Degenerate,
    /// Mixture of the two tangent points of an affine segment.
    Affine,
    /// Mixture of two matrices of ratio `t*` on the constant segment.
    Constant,
    /// Mixture with one phase pushed far out; the energy matches the
    /// envelope only in the limit and `residual` records the remainder.
    Asymptotic,
}

/// A first-order laminate whose average is `diag(t, 1)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LaminateCertificate {
    pub target: Mat2,
    pub t1: f64,
    pub t2: f64,
    /// Volume fraction of `phase1`.
    pub theta: f64,
    pub phase1: Mat2,
    pub phase2: Mat2,
    /// `θ W(phase1) + (1 − θ) W(phase2)`.
    pub mixed_energy: f64,
    /// `C_m h(t)`.
    pub envelope_value: f64,
    /// `|det(phase1 − phase2)|`, zero for rank-one connected phases.
    pub rank_one_residual: f64,
    /// Largest entry of `θ phase1 + (1 − θ) phase2 − target`, relative to
    /// the largest phase entry (at least 1).
    pub mixture_residual: f64,
    /// `mixed_energy − envelope_value`.
    pub residual: f64,
    pub kind: CertificateKind,
}

fn certificate(
    e: &Energy,
    env_value: f64,
    target: Mat2,
    (t1, t2): (f64, f64),
    theta: f64,
    (phase1, phase2): (Mat2, Mat2),
    kind: CertificateKind,
) -> Result<LaminateCertificate> {
    let w1 = e.eval_energy(&phase1)?;
    let w2 = e.eval_energy(&phase2)?;
    let mixed_energy = if theta == 1.0 { w1 } else { theta * w1 + (1.0 - theta) * w2 };
    let mix = phase1.scale(theta) + phase2.scale(1.0 - theta);
    Ok(LaminateCertificate {
        target,
        t1,
        t2,
        theta,
        phase1,
        phase2,
        mixed_energy,
        envelope_value: env_value,
        rank_one_residual: (phase1 - phase2).det().abs(),
        mixture_residual: (mix - target).max_abs() / phase1.max_abs().max(phase2.max_abs()).max(1.0),
        residual: mixed_energy - env_value,
        kind,
    })
}

/// Two-phase laminate realizing `C_m h(t)` at `diag(t, 1)`.
pub fn laminate_certificate(e: &Energy, env: &PiecewiseEnvelope, t: f64) -> Result<LaminateCertificate> {
    check_pair(e, env)?;
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::Domain(format!("laminate target ratio must be in [1, inf), got {t}")));
    }
    let target = Mat2::diag(t, 1.0);
    let value = env.eval(t);
    let (lo, hi, kind) = env.piece_at(t);
    let t_star = env.flags.minimizer;
    match kind {
        SegmentKind::FollowH => certificate(
            e,
            value,
            target,
            (t, t),
            1.0,
            (target, target),
            CertificateKind::Degenerate,
        ),
        SegmentKind::Affine { .. } if hi.is_finite() => {
            let theta = (hi - t) / (hi - lo);
            certificate(
                e,
                value,
                target,
                (lo, hi),
                theta,
                (Mat2::diag(lo, 1.0), Mat2::diag(hi, 1.0)),
                CertificateKind::Affine,
            )
        }
        SegmentKind::Constant { .. } if t < t_star && t_star > 1.0 => {
            // phases diag(λt*, λ) and diag(λt*, λt*²) average to diag(t, 1) for λ = t/t*
            let lambda = t / t_star;
            let theta = 1.0 - (t_star / t - 1.0) / (t_star * t_star - 1.0);
            certificate(
                e,
                value,
                target,
                (t_star, t_star),
                theta,
                (
                    Mat2::diag(lambda * t_star, lambda),
                    Mat2::diag(lambda * t_star, lambda * t_star * t_star),
                ),
                CertificateKind::Constant,
            )
        }
        _ => asymptotic_certificate(e, env, t, value),
    }
}

/// Mixes the left end of an unbounded flat or linear piece with ever larger ratios.
fn asymptotic_certificate(e: &Energy, env: &PiecewiseEnvelope, t: f64, value: f64) -> Result<LaminateCertificate> {
    let (lo, _, _) = env.piece_at(t);
    let t1 = lo.max(env.flags.minimizer.min(t));
    let tol = 1e-9 * env.scale();
    let target = Mat2::diag(t, 1.0);
    let mut t2 = 2.0 * t.max(2.0);
    let mut best: Option<LaminateCertificate> = None;
    for _ in 0..1000 {
        if t1 >= t {
            // t sits at the left end itself
            return certificate(e, value, target, (t, t), 1.0, (target, target), CertificateKind::Asymptotic);
        }
        let theta = (t2 - t) / (t2 - t1);
        let Ok(c) = certificate(
            e,
            value,
            target,
            (t1, t2),
            theta,
            (Mat2::diag(t1, 1.0), Mat2::diag(t2, 1.0)),
            CertificateKind::Asymptotic,
        ) else {
            break;
        };
        if !c.mixed_energy.is_finite() {
            break;
        }
        let done = c.residual.abs() <= tol;
        if best.is_none_or(|b| c.residual.abs() < b.residual.abs()) {
            best = Some(c);
        }
        if done || t2 > 1e150 {
            break;
        }
        t2 *= 2.0;
    }
    best.ok_or_else(|| Error::Evaluation {
        at: t,
        msg: "no finite far phase for the laminate".into(),
    })
}

/// `(π W(F₀), π QW(F₀))`: the energies of the homogeneous map `x ↦ F₀x` on
/// the unit disc and the relaxed infimum under the same boundary data.
pub fn disc_energies(e: &Energy, env: &PiecewiseEnvelope, f0: &Mat2) -> Result<(f64, f64)> {
    let w = e.eval_energy(f0)?;
    let qw = qw_eval(e, env, f0)?;
    Ok((PI * w, PI * qw))
}
