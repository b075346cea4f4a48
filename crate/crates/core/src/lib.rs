//! Quasiconvex relaxation of conformally invariant planar energies.
//!
//! A planar energy `W` on `GL+(2)` is conformally invariant when
//! `W(A F B) = W(F)` for all `A`, `B` in `CSO(2)` (positive multiples of
//! rotations). Every such energy is a function of the singular value ratio
//! `t = λ₁/λ₂ ≥ 1`, `W(F) = h(t)`, and its rank-one convex, quasiconvex and
//! polyconvex envelopes all coincide with `C_m h(t)`, the largest convex and
//! non-decreasing minorant of `h` on `[1, ∞)`.
//!
//! Modules:
//!
//! - [`kinematics`]: singular values, distortions and distances to `CSO(2)`.
//! - [`energies`]: the energy catalog and the `h` / `Ψ` / `g` representations.
//! - [`convexity`]: grid checks of the equivalent convexity criteria.
//! - [`envelope`]: the monotone-convex envelope and its cross-check routes.
//! - [`relaxation`]: relaxed energy, binodal region, laminate certificates.
//! - [`oracles`]: brute-force grid envelopes on diagonal matrices.
//! - [`microsim`]: P1 finite-element direct minimization on the unit disc.
//! - [`cli`]: the command-line front end used by the `confrelax` binary.

pub mod cli;
pub mod convexity;
pub mod energies;
pub mod envelope;
mod error;
pub mod grid;
pub mod kinematics;
pub mod microsim;
pub mod oracles;
pub mod relaxation;

pub use error::{Error, Result};
pub use kinematics::Mat2;
