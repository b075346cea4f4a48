//! Conformally invariant energies and their three equivalent representations.
//!
//! A conformally invariant `W` is stored through `h`, its value at the
//! singular value ratio `t = λ₁/λ₂ ≥ 1`. The other two forms are
//!
//! - `Ψ(𝕂) = h(𝕂 + √(𝕂² − 1))`, the value at outer distortion `𝕂`;
//! - `g(x, y) = h(max(x, y)/min(x, y))`, the value at singular values `(x, y)`.
//!
//! Energies built from a `Ψ` or `g` closure are wrapped into `h` at
//! construction; the original closure is kept so that all paths stay
//! evaluable and can be checked against each other.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::log_space;
use crate::kinematics::{self, k_from_kk_unchecked, kk_from_k_unchecked, Mat2};
use crate::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PairFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Behaviour of `h(t)/t` as `t → ∞`. Envelopes on `[1, ∞)` can only use
/// slopes up to this limit, which matters for sublinear energies whose
/// envelope is constant even though `h` increases forever.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TailGrowth {
    /// `h(t)/t → ∞`.
    Superlinear,
    /// `h(t)/t → slope`; sublinear energies use `Linear(0.0)`.
    Linear(f64),
    /// Nothing known; envelopes treat the truncated domain as exact and flag it.
    Unknown,
}

#[derive(Clone)]
struct Inner {
    label: String,
    tag: Option<String>,
    h: ScalarFn,
    dh: Option<ScalarFn>,
    d2h: Option<ScalarFn>,
    psi: Option<ScalarFn>,
    dpsi: Option<ScalarFn>,
    d2psi: Option<ScalarFn>,
    g: Option<PairFn>,
    growth: TailGrowth,
}

/// A conformally invariant energy, canonically represented by `h` on `[1, ∞)`.
///
/// Cloning is cheap; clones share the same closures and compare equal under
/// [`Energy::same_source`].
#[derive(Clone)]
pub struct Energy {
    inner: Arc<Inner>,
}

impl fmt::Debug for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Energy")
            .field("label", &self.inner.label)
            .field("tag", &self.inner.tag)
            .field("growth", &self.inner.growth)
            .finish_non_exhaustive()
    }
}

impl Energy {
    fn from_inner(inner: Inner) -> Self {
        Energy {
            inner: Arc::new(inner),
        }
    }

    fn bare(label: &str, h: ScalarFn) -> Inner {
        Inner {
            label: label.to_string(),
            tag: None,
            h,
            dh: None,
            d2h: None,
            psi: None,
            dpsi: None,
            d2psi: None,
            g: None,
            growth: TailGrowth::Unknown,
        }
    }

    /// Energy given by `h` on `[1, ∞)`; the symmetric extension `h(1/t) = h(t)` is implicit.
    pub fn from_h(label: &str, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Energy::from_inner(Energy::bare(label, Arc::new(h)))
    }

    /// Energy given by `Ψ` on `[1, ∞)`, wrapped as `h(t) = Ψ(½(t + 1/t))`.
    pub fn from_psi(label: &str, psi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let psi: ScalarFn = Arc::new(psi);
        let p = psi.clone();
        let mut inner = Energy::bare(label, Arc::new(move |t| p(kk_from_k_unchecked(t))));
        inner.psi = Some(psi);
        Energy::from_inner(inner)
    }

    /// Energy given by `g` on `(0, ∞)²`, wrapped as `h(t) = g(t, 1)`. Whether
    /// `g` really is symmetric and scale invariant is checked by [`validate_rep`].
    pub fn from_g(label: &str, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        let g: PairFn = Arc::new(g);
        let gg = g.clone();
        let mut inner = Energy::bare(label, Arc::new(move |t| gg(t, 1.0)));
        inner.g = Some(g);
        Energy::from_inner(inner)
    }

    /// Piecewise-linear `h` through `(t, h)` samples, extended linearly past the last one.
    pub fn from_table(label: &str, ts: Vec<f64>, hs: Vec<f64>) -> Result<Self> {
        if ts.len() < 2 || ts.len() != hs.len() {
            return Err(Error::Argument(format!(
                "table needs >= 2 matching rows, got {} t and {} h values",
                ts.len(),
                hs.len()
            )));
        }
        if ts[0] != 1.0 {
            return Err(Error::Argument(format!("table must start at t = 1, got {}", ts[0])));
        }
        if ts.windows(2).any(|w| w[1] <= w[0]) || hs.iter().any(|h| !h.is_finite()) {
            return Err(Error::Argument(
                "table t values must be strictly increasing with finite h".into(),
            ));
        }
        let n = ts.len();
        let last_slope = (hs[n - 1] - hs[n - 2]) / (ts[n - 1] - ts[n - 2]);
        let (ts, hs) = (Arc::new(ts), Arc::new(hs));
        let h = move |t: f64| {
            let i = match ts.binary_search_by(|p| p.total_cmp(&t)) {
                Ok(i) => return hs[i],
                Err(i) => i.clamp(1, ts.len() - 1),
            };
            let w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
            hs[i - 1] + w * (hs[i] - hs[i - 1])
        };
        Ok(Energy::from_h(label, h).with_growth(TailGrowth::Linear(last_slope)))
    }

    /// Reads a CSV table with header `t,h`.
    pub fn load_table(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let (mut ts, mut hs) = (Vec::new(), Vec::new());
        for rec in rdr.deserialize::<(f64, f64)>() {
            let (t, h) = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            ts.push(t);
            hs.push(h);
        }
        let label = format!("table:{}", path.display());
        let mut e = Energy::from_table(&label, ts, hs)?;
        Arc::make_mut(&mut e.inner).tag = Some(label);
        Ok(e)
    }

    pub fn with_h_derivatives(
        mut self,
        dh: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2h: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let inner = Arc::make_mut(&mut self.inner);
        inner.dh = Some(Arc::new(dh));
        inner.d2h = Some(Arc::new(d2h));
        self
    }

    pub fn with_psi_derivatives(
        mut self,
        dpsi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let inner = Arc::make_mut(&mut self.inner);
        inner.dpsi = Some(Arc::new(dpsi));
        inner.d2psi = Some(Arc::new(d2psi));
        self
    }

    pub fn with_growth(mut self, growth: TailGrowth) -> Self {
        Arc::make_mut(&mut self.inner).growth = growth;
        self
    }

    /// Adds a `Ψ` form to an energy built from `h`; the caller guarantees consistency.
    pub fn with_psi(mut self, psi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Arc::make_mut(&mut self.inner).psi = Some(Arc::new(psi));
        self
    }

    /// Adds a `g` form to an energy built from `h`; the caller guarantees consistency.
    pub fn with_g(mut self, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Arc::make_mut(&mut self.inner).g = Some(Arc::new(g));
        self
    }

    fn with_tag(mut self, tag: String) -> Self {
        Arc::make_mut(&mut self.inner).tag = Some(tag);
        self
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    /// Catalog tag (or table path) this energy can be rebuilt from, if any.
    pub fn tag(&self) -> Option<&str> {
        self.inner.tag.as_deref()
    }

    pub fn growth(&self) -> TailGrowth {
        self.inner.growth
    }

    pub fn has_psi_form(&self) -> bool {
        self.inner.psi.is_some()
    }

    pub fn has_g_form(&self) -> bool {
        self.inner.g.is_some()
    }

    pub fn has_analytic_psi_derivatives(&self) -> bool {
        self.inner.dpsi.is_some() && self.inner.d2psi.is_some()
    }

    /// True when both values come from the same construction (a clone, or the
    /// same catalog tag).
    pub fn same_source(&self, other: &Energy) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || matches!((self.tag(), other.tag()), (Some(a), Some(b)) if a == b)
    }

    /// `h(t)` without domain checks; `t < 1` uses the symmetric extension.
    pub fn h(&self, t: f64) -> f64 {
        let t = if t < 1.0 { 1.0 / t } else { t };
        (self.inner.h)(t)
    }

    /// `Ψ(𝕂)` without domain checks.
    pub fn psi(&self, kk: f64) -> f64 {
        match &self.inner.psi {
            Some(psi) => psi(kk),
            None => (self.inner.h)(k_from_kk_unchecked(kk)),
        }
    }

    /// `g(x, y)`; falls back to `h(max/min)` when no `g` form was given.
    pub fn g(&self, x: f64, y: f64) -> f64 {
        match &self.inner.g {
            Some(g) => g(x, y),
            None => self.h(x.max(y) / x.min(y)),
        }
    }

    /// `h′(t)` on `t ≥ 1`: analytic if supplied, else through `Ψ′`, else central differences.
    pub fn dh(&self, t: f64) -> f64 {
        if let Some(dh) = &self.inner.dh {
            return dh(t);
        }
        if let Some(dpsi) = &self.inner.dpsi {
            return dpsi(kk_from_k_unchecked(t)) * 0.5 * (1.0 - 1.0 / (t * t));
        }
        let step = f64::EPSILON.cbrt() * t.max(1.0);
        (self.h(t + step) - self.h(t - step)) / (2.0 * step)
    }

    /// `h″(t)` on `t ≥ 1`, with the same fallback order as [`Energy::dh`].
    pub fn d2h(&self, t: f64) -> f64 {
        if let Some(d2h) = &self.inner.d2h {
            return d2h(t);
        }
        if let (Some(dpsi), Some(d2psi)) = (&self.inner.dpsi, &self.inner.d2psi) {
            let kk = kk_from_k_unchecked(t);
            let dk = 0.5 * (1.0 - 1.0 / (t * t));
            return d2psi(kk) * dk * dk + dpsi(kk) / (t * t * t);
        }
        let step = f64::EPSILON.powf(0.25) * t.max(1.0);
        (self.h(t + step) - 2.0 * self.h(t) + self.h(t - step)) / (step * step)
    }

    /// `Ψ′(𝕂)` on `𝕂 ≥ 1`.
    pub fn dpsi(&self, kk: f64) -> f64 {
        if let Some(dpsi) = &self.inner.dpsi {
            return dpsi(kk);
        }
        if let Some(dh) = &self.inner.dh {
            if kk > 1.0 {
                let t = k_from_kk_unchecked(kk);
                return dh(t) * t / ((kk - 1.0) * (kk + 1.0)).sqrt();
            }
        }
        let step = f64::EPSILON.cbrt() * kk.max(1.0);
        if kk - step < 1.0 {
            // one-sided second-order stencil at the left end of the domain
            return (-3.0 * self.psi(kk) + 4.0 * self.psi(kk + step) - self.psi(kk + 2.0 * step))
                / (2.0 * step);
        }
        (self.psi(kk + step) - self.psi(kk - step)) / (2.0 * step)
    }

    /// `Ψ″(𝕂)` on `𝕂 ≥ 1`.
    pub fn d2psi(&self, kk: f64) -> f64 {
        if let Some(d2psi) = &self.inner.d2psi {
            return d2psi(kk);
        }
        if let (Some(dh), Some(d2h)) = (&self.inner.dh, &self.inner.d2h) {
            if kk > 1.0 {
                let t = k_from_kk_unchecked(kk);
                let s2 = (kk - 1.0) * (kk + 1.0);
                let dk = t / s2.sqrt();
                return d2h(t) * dk * dk - dh(t) / (s2 * s2.sqrt());
            }
        }
        let step = f64::EPSILON.powf(0.25) * kk.max(1.0);
        let c = kk.max(1.0 + step);
        (self.psi(c + step) - 2.0 * self.psi(c) + self.psi(c - step)) / (step * step)
    }

    /// `h(t)` for `t ≥ 1`, rejecting out-of-domain and non-finite results.
    pub fn h_eval(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 1.0 {
            return Err(Error::Domain(format!("h is queried on [1, inf), got t = {t}")));
        }
        finite((self.inner.h)(t), t)
    }

    /// `Ψ(𝕂)` for `𝕂 ≥ 1`.
    pub fn psi_eval(&self, kk: f64) -> Result<f64> {
        if kk.is_nan() || kk < 1.0 {
            return Err(Error::Domain(format!("psi is queried on [1, inf), got kk = {kk}")));
        }
        finite(self.psi(kk), kk)
    }

    /// `W(F) = h(λ₁/λ₂)`.
    pub fn eval_energy(&self, f: &Mat2) -> Result<f64> {
        self.h_eval(kinematics::linear_distortion(f)?)
    }

    /// `W(F) = Ψ(𝕂(F))`, the smooth evaluation path.
    pub fn eval_by_kk(&self, f: &Mat2) -> Result<f64> {
        self.psi_eval(kinematics::outer_distortion(f)?)
    }
}

fn finite(v: f64, at: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            at,
            msg: format!("non-finite energy value {v}"),
        })
    }
}

/// A radial profile `g` on `[0, ∞)` for energies `W(F) = g(√(‖F‖² − 2 det F))`.
/// These are not conformally invariant and only have the radial envelope.
#[derive(Clone)]
pub struct RadialProfile {
    pub label: String,
    pub g: ScalarFn,
}

impl RadialProfile {
    pub fn new(label: &str, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RadialProfile {
            label: label.to_string(),
            g: Arc::new(g),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.g)(r.abs())
    }

    /// `W(F) = g(√(‖F‖² − 2 det F))`.
    pub fn eval_matrix(&self, f: &Mat2) -> f64 {
        self.eval((2.0 * kinematics::euclid_dist_cso2_sq(f)).sqrt())
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile").field("label", &self.label).finish_non_exhaustive()
    }
}

/// The named energies.
#[derive(Clone, Debug)]
pub enum CatalogEnergy {
    /// `log²(λ₁/λ₂) = arccosh²(𝕂)`.
    DevHencky,
    /// `log²(𝕂)`.
    LogDistortionSq,
    /// `exp(k log²(λ₁/λ₂))`, `k > 0`.
    ExpHencky { k: f64 },
    /// `cosh(𝕂 − L) − 1`, `L ≥ 1`.
    CoshDistortion { l: f64 },
    /// `(t − 1)² + (1/t − 1)² = 4(𝕂² − 𝕂)`.
    IsochoricSvk,
    /// `g(√(‖F‖² − 2 det F))`.
    Radial(RadialProfile),
}

// Series expansions below are in u = x - 1 and kick in where the closed forms
// cancel catastrophically.
const SERIES_CUTOFF: f64 = 1e-4;

/// `arccosh(x)/√(x² − 1)`, equal to 1 at `x = 1`.
fn acosh_ratio(x: f64) -> f64 {
    let u = x - 1.0;
    if u < SERIES_CUTOFF {
        1.0 - u / 3.0 + 2.0 * u * u / 15.0
    } else {
        x.acosh() / (u * (x + 1.0)).sqrt()
    }
}

/// `(1 − x·arccosh(x)/√(x² − 1)) / (x² − 1)`, equal to `−1/3` at `x = 1`.
fn acosh_curvature(x: f64) -> f64 {
    let u = x - 1.0;
    if u < SERIES_CUTOFF {
        -1.0 / 3.0 + 4.0 * u / 15.0 - 6.0 * u * u / 35.0
    } else {
        (1.0 - x * acosh_ratio(x)) / (u * (x + 1.0))
    }
}

fn ratio_of(x: f64, y: f64) -> f64 {
    x.max(y) / x.min(y)
}

impl CatalogEnergy {
    /// Parses `name` or `name{key=value,...}`; e.g. `exp_hencky{k=0.11}`, `cosh{L=2}`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, params) = match spec.find('{') {
            Some(open) => {
                let body = spec[open + 1..]
                    .strip_suffix('}')
                    .ok_or_else(|| Error::Parse(format!("missing closing brace in `{spec}`")))?;
                (&spec[..open], parse_params(body)?)
            }
            None => (spec, Vec::new()),
        };
        let param = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(key))
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Parse(format!("`{name}` needs parameter `{key}`")))
        };
        let expect_keys = |keys: &[&str]| -> Result<()> {
            for (k, _) in &params {
                if !keys.iter().any(|key| key.eq_ignore_ascii_case(k)) {
                    return Err(Error::Parse(format!("`{name}` has no parameter `{k}`")));
                }
            }
            Ok(())
        };
        let e = match name.trim() {
            "dev_hencky" => {
                expect_keys(&[])?;
                CatalogEnergy::DevHencky
            }
            "log_distortion_sq" | "log_kk_sq" => {
                expect_keys(&[])?;
                CatalogEnergy::LogDistortionSq
            }
            "exp_hencky" => {
                expect_keys(&["k"])?;
                CatalogEnergy::ExpHencky { k: param("k")? }
            }
            "cosh" => {
                expect_keys(&["L"])?;
                CatalogEnergy::CoshDistortion { l: param("L")? }
            }
            "svk_isochoric" => {
                expect_keys(&[])?;
                CatalogEnergy::IsochoricSvk
            }
            other => return Err(Error::UnknownEnergy(other.to_string())),
        };
        e.validate()?;
        Ok(e)
    }

    /// Parameter ranges: `k > 0`, `L ≥ 1`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            CatalogEnergy::ExpHencky { k } if !(k > 0.0 && k.is_finite()) => {
                Err(Error::Argument(format!("exp_hencky needs k > 0, got {k}")))
            }
            CatalogEnergy::CoshDistortion { l } if !(l >= 1.0 && l.is_finite()) => {
                Err(Error::Argument(format!("cosh needs L >= 1, got {l}")))
            }
            _ => Ok(()),
        }
    }

    /// Canonical string tag, accepted by [`CatalogEnergy::parse`].
    pub fn tag(&self) -> String {
        match self {
            CatalogEnergy::DevHencky => "dev_hencky".into(),
            CatalogEnergy::LogDistortionSq => "log_distortion_sq".into(),
            CatalogEnergy::ExpHencky { k } => format!("exp_hencky{{k={k}}}"),
            CatalogEnergy::CoshDistortion { l } => format!("cosh{{L={l}}}"),
            CatalogEnergy::IsochoricSvk => "svk_isochoric".into(),
            CatalogEnergy::Radial(p) => format!("radial:{}", p.label),
        }
    }

    /// The conformally invariant energy with analytic `h`, `Ψ`, `g` and derivatives.
    pub fn energy(&self) -> Result<Energy> {
        self.validate()?;
        let tag = self.tag();
        let e = match *self {
            CatalogEnergy::DevHencky => Energy::from_h(&tag, |t: f64| t.ln().powi(2))
                .with_h_derivatives(|t: f64| 2.0 * t.ln() / t, |t: f64| (2.0 - 2.0 * t.ln()) / (t * t))
                .with_psi(|x: f64| x.acosh().powi(2))
                .with_psi_derivatives(|x| 2.0 * acosh_ratio(x), |x| 2.0 * acosh_curvature(x))
                .with_g(|x: f64, y: f64| (x / y).ln().powi(2))
                .with_growth(TailGrowth::Linear(0.0)),
            CatalogEnergy::LogDistortionSq => {
                let h = |t: f64| kk_from_k_unchecked(t).ln().powi(2);
                let dpsi = |x: f64| 2.0 * x.ln() / x;
                let d2psi = |x: f64| (2.0 - 2.0 * x.ln()) / (x * x);
                Energy::from_h(&tag, h)
                    .with_h_derivatives(
                        move |t| dpsi(kk_from_k_unchecked(t)) * 0.5 * (1.0 - 1.0 / (t * t)),
                        move |t| {
                            let (kk, dk) = (kk_from_k_unchecked(t), 0.5 * (1.0 - 1.0 / (t * t)));
                            d2psi(kk) * dk * dk + dpsi(kk) / (t * t * t)
                        },
                    )
                    .with_psi(|x: f64| x.ln().powi(2))
                    .with_psi_derivatives(dpsi, d2psi)
                    .with_g(|x, y| kk_from_k_unchecked(ratio_of(x, y)).ln().powi(2))
                    .with_growth(TailGrowth::Linear(0.0))
            }
            CatalogEnergy::ExpHencky { k } => {
                let h = move |t: f64| (k * t.ln().powi(2)).exp();
                let psi = move |x: f64| (k * x.acosh().powi(2)).exp();
                Energy::from_h(&tag, h)
                    .with_h_derivatives(
                        move |t| h(t) * 2.0 * k * t.ln() / t,
                        move |t| {
                            let l = t.ln();
                            let d = 2.0 * k * l / t;
                            h(t) * (d * d + 2.0 * k * (1.0 - l) / (t * t))
                        },
                    )
                    .with_psi(psi)
                    .with_psi_derivatives(
                        move |x| psi(x) * 2.0 * k * acosh_ratio(x),
                        move |x| {
                            let r = acosh_ratio(x);
                            psi(x) * (4.0 * k * k * r * r + 2.0 * k * acosh_curvature(x))
                        },
                    )
                    .with_g(move |x, y| (k * (x / y).ln().powi(2)).exp())
                    .with_growth(TailGrowth::Superlinear)
            }
            CatalogEnergy::CoshDistortion { l } => {
                let psi = move |x: f64| (x - l).cosh() - 1.0;
                let dpsi = move |x: f64| (x - l).sinh();
                let d2psi = move |x: f64| (x - l).cosh();
                Energy::from_h(&tag, move |t| psi(kk_from_k_unchecked(t)))
                    .with_h_derivatives(
                        move |t| dpsi(kk_from_k_unchecked(t)) * 0.5 * (1.0 - 1.0 / (t * t)),
                        move |t| {
                            let (kk, dk) = (kk_from_k_unchecked(t), 0.5 * (1.0 - 1.0 / (t * t)));
                            d2psi(kk) * dk * dk + dpsi(kk) / (t * t * t)
                        },
                    )
                    .with_psi(psi)
                    .with_psi_derivatives(dpsi, d2psi)
                    .with_g(move |x, y| psi(kk_from_k_unchecked(ratio_of(x, y))))
                    .with_growth(TailGrowth::Superlinear)
            }
            CatalogEnergy::IsochoricSvk => Energy::from_h(&tag, |t: f64| (t - 1.0).powi(2) + (1.0 / t - 1.0).powi(2))
                .with_h_derivatives(
                    |t| 2.0 * (t - 1.0) - 2.0 * (1.0 / t - 1.0) / (t * t),
                    |t| 2.0 + 6.0 / t.powi(4) - 4.0 / t.powi(3),
                )
                .with_psi(|x| 4.0 * (x * x - x))
                .with_psi_derivatives(|x| 8.0 * x - 4.0, |_| 8.0)
                .with_g(|x, y| (x / y - 1.0).powi(2) + (y / x - 1.0).powi(2))
                .with_growth(TailGrowth::Superlinear),
            CatalogEnergy::Radial(ref p) => {
                return Err(Error::Unsupported(format!(
                    "radial energy `{}` is not conformally invariant; use the radial envelope",
                    p.label
                )))
            }
        };
        Ok(e.with_tag(tag))
    }

    pub fn h_eval(&self, t: f64) -> Result<f64> {
        self.energy()?.h_eval(t)
    }

    pub fn psi_eval(&self, kk: f64) -> Result<f64> {
        self.energy()?.psi_eval(kk)
    }

    pub fn eval_energy(&self, f: &Mat2) -> Result<f64> {
        match self {
            CatalogEnergy::Radial(p) => Ok(p.eval_matrix(f)),
            _ => self.energy()?.eval_energy(f),
        }
    }
}

fn parse_params(body: &str) -> Result<Vec<(String, f64)>> {
    body.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("`{}` is not a number", v.trim())))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Resolves a catalog tag or `table:<path>` into an energy.
pub fn resolve(spec: &str) -> Result<Energy> {
    match spec.strip_prefix("table:") {
        Some(path) => Energy::load_table(Path::new(path)),
        None => CatalogEnergy::parse(spec)?.energy(),
    }
}

/// Sample set for [`validate_rep`]: `n` log-spaced points on `[lo, hi]` for
/// each singular value, and the scale factors `a` tried in `g(ax, ay) = g(x, y)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub scales: Vec<f64>,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            lo: 1e-2,
            hi: 1e2,
            n: 13,
            scales: vec![0.1, 0.5, 2.0, 7.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Identity {
    /// `g(x, y) = g(y, x)`
    Symmetry,
    /// `g(ax, ay) = g(x, y)`
    Scale,
    /// the function returned a non-finite value
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub identity: Identity,
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub samples_checked: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const IDENTITY_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= IDENTITY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Checks the symmetry and scale identities that make `g` the singular-value
/// form of a conformally invariant energy. Every failing sample is reported.
pub fn validate_rep(e: &Energy, spec: &SampleSpec) -> Result<ValidationReport> {
    if spec.n < 2 || !(spec.lo > 0.0 && spec.hi > spec.lo) {
        return Err(Error::Argument(format!("bad sample spec {spec:?}")));
    }
    let xs = log_space(spec.lo, spec.hi, spec.n);
    let mut report = ValidationReport::default();
    let mut push = |identity, x, y, a, lhs, rhs| {
        report.violations.push(Violation { identity, x, y, a, lhs, rhs });
    };
    let mut checked = 0;
    for &x in &xs {
        for &y in &xs {
            checked += 1;
            let gxy = e.g(x, y);
            if !gxy.is_finite() {
                push(Identity::NonFinite, x, y, 1.0, gxy, gxy);
                continue;
            }
            let gyx = e.g(y, x);
            if !gyx.is_finite() {
                push(Identity::NonFinite, y, x, 1.0, gyx, gyx);
            } else if !close(gxy, gyx) {
                push(Identity::Symmetry, x, y, 1.0, gxy, gyx);
            }
            for &a in &spec.scales {
                let gs = e.g(a * x, a * y);
                if !gs.is_finite() {
                    push(Identity::NonFinite, a * x, a * y, a, gs, gxy);
                } else if !close(gs, gxy) {
                    push(Identity::Scale, x, y, a, gs, gxy);
                }
            }
        }
    }
    report.samples_checked = checked;
    Ok(report)
}
