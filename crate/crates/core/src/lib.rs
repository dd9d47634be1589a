//! Constant-curvature space curves that are congruent to their own evolutes.
//!
//! A velocity profile `v(t)` with `v(t + pi) = 1 / v(t)` drives a modified
//! Frenet system whose solution has constant curvature `kappa` and torsion
//! `kappa / v^2`. Its evolute is then congruent to the curve shifted by half a
//! period. Closing such a curve reduces to a two-parameter problem on the
//! symmetry normals at `t = pi/2 + n pi`, which [`closure`] solves by damped
//! Newton iteration after a coarse grid scan.

// `!(x <= tol)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closure;
pub mod frenet;
pub mod geometry;
pub mod io;
mod par;
pub mod profile;
pub mod quadrature;
pub mod service;
pub mod verify;

pub use closure::{
    assemble_closed_curve, classify, closure_residuals, continuation, grid_scan, newton_solve,
    symmetry_lines, ClosedCurve, ClosureError, ClosureResiduals, RationalAngle, SolveResult,
    SymmetryLine,
};
pub use frenet::{integrate, FrenetSample, SampledCurve, Vec3};
pub use profile::{CurveParams, FourierOddProfile, Harmonic, VelocityForm};

/// Whether data-parallel loops run on the rayon pool.
pub fn parallel_enabled() -> bool {
    par::is_parallel()
}
