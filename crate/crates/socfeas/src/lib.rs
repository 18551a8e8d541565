//! Feasibility solver for homogeneous second-order-cone systems.
//!
//! Given A with full row rank, exactly one of
//!   (P)  A x = 0,  x strictly inside a product of Lorentz cones
//!   (D)  A' y + s = 0,  s strictly inside the same product
//! is solvable. This crate decides which, by a short-step primal-dual
//! interior-point method run on a self-dual embedding, and produces a
//! strictly feasible point as the certificate. The Newton systems are solved
//! in simulated finite precision whose width follows an explicit schedule in
//! the current centrality parameter, so the solver doubles as a testbed for
//! the underlying rounding-error analysis.

pub mod barrier;
pub mod conditioning;
pub mod dense;
pub mod embed;
pub mod ipm;
pub mod lorentz;
pub mod roundoff;
