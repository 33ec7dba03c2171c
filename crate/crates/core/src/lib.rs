//! Anisotropic simplicial mesh adaptation driven by Hessian-based metric
//! fields, P1 finite elements for steady Allen-Cahn problems, and
//! pseudo-arclength continuation with mesh adaptation along the branch.
//!
//! The crate is organized bottom-up:
//!
//! * [`mesh`] - structured box generators, validation, point location,
//!   interpolation, and mesh/VTK file formats.
//! * [`fem`] - stiffness/mass assembly, residual and Jacobian of
//!   `-c Δu - λu - u³ + γu⁵` with parameter-dependent Dirichlet data.
//! * [`metric`] - Hessian recovery and the metric field
//!   `Ψ = η⁻¹ det(|H|)^{-1/(2p+d)} |H|`.
//! * [`adapt`] - coarsen/refine/move/swap passes and the adaptation loop.
//! * [`continuation`] - Newton, pseudo-arclength stepping, bifurcation
//!   detection, branch switching, and adaptation during continuation.
//! * [`driver`] - config-file run driver, branch plots, standalone adaptation.

pub mod adapt;
pub mod continuation;
pub mod driver;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod metric;

pub use error::{Error, Result};
