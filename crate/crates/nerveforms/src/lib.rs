//! Numerical verification of differential-form cocycle identities on
//! simplicial nerves of matrix Lie groups.
//!
//! The library builds three interlocking verification stacks at desk scale:
//!
//! - the second-Chern cocycle (C₁,₃, C₂,₂) on the nerve of SU(2) and its
//!   U(2) variant, with residual checks of all simplicial/de Rham identities
//!   and the integrality of ∫ C₁,₃ over SU(2);
//! - the degree-3 cocycle (c₁(θ), −(−1/2πi)ŝ*(δθ)) of a central
//!   U(1)-extension with connection, instantiated on U(2) → PU(2) flat and
//!   twisted, together with section-change, connection-change and
//!   Behrend–Xu comparisons and an equivariant triple-complex cocycle on
//!   PU(2)⋊S¹;
//! - discretized free-loop groups of SU(2) with the circle transgression
//!   ∫_{S¹} ev*, reproducing the cocycle identities at loop level.
//!
//! Every identity is verified at seeded random probes against explicit
//! tolerances and reported as a pass/fail row; ambiguous sign conventions
//! are resolved by one-time numeric probes and frozen into the report. See
//! the `examples/` directory for one runnable driver per capability and the
//! `verify` binary for the batch suite.

pub mod cmat;
pub mod extension;
pub mod forms;
pub mod groups;
pub mod loops;
pub mod nerve;
pub mod quadrature;
pub mod residual;

pub use cmat::CMat;
pub use forms::{FdScheme, Form, SmoothMap};
pub use groups::{Factor, GroupPoint, GroupSpec, Tangent};
pub use nerve::{CochainLayer, Nerve, ProbeCfg, TotalCochain};
pub use residual::{FrozenSign, IdentityResidual, ResidualReport};
