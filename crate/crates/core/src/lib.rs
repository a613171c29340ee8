//! Helicity-type integral invariants of time-periodic Hamiltonian systems on
//! a two-disk.
//!
//! The crate integrates `p' = -H_q, q' = H_p` on the extended phase space
//! `D x S^1`, computes the helicity `int H~ dp dq dt` (with `H~` normalized
//! to vanish on the boundary torus) and its relatives, and checks that
//! different generating flows of one boundary-preserving disk map have
//! helicities differing by integer multiples of `S(D)^2 / 2`.

pub mod acceptance;
pub mod constructor;
pub mod error;
pub mod fields;
pub mod flow;
pub mod geometry;
pub mod invariants;
pub mod linking;
pub mod quadrature;
pub mod report;

pub use error::{Error, Result};
pub use fields::{HamiltonianField, NormalizedField, TimeReparametrization};
pub use geometry::{ActionAngle, Disk, ExtendedPoint, PhasePoint};
