//! Intrinsic complements of equiregular sub-Riemannian structures.
//!
//! A structure is presented by a global frame `e_0, …, e_{n-1}` with constant
//! structure constants `[e_i, e_j] = c_{ij}^k e_k`, the first `d1` frame
//! vectors spanning the horizontal distribution `H` and declared orthonormal.
//! Because the structure constants are constant, every pointwise computation
//! below is global.
//!
//! The crate computes
//! - the bracket filtration `H_1 ⊆ H_2 ⊆ … ⊆ H_r` and the intrinsic inner
//!   products on the quotients `Ĥ_m = H_m / H_{m-1}` ([`structure`]),
//! - the bracket maps `B^{k,m}`, the `𝒥` operators and the semi-𝒥
//!   nondegeneracy verdicts ([`jmaps`]),
//! - the minimal rigid complement `V_2 ⊕ … ⊕ V_r`, its alternate variant,
//!   V-rigidity and V-normality ([`complement`]),
//! - the adapted connection, torsion, Popp volume and related quantities
//!   ([`geometry`]).
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod catalog;
pub mod complement;
pub mod geometry;
pub mod jmaps;
pub mod linalg;
pub mod samples;
pub mod structure;

mod error;

pub use error::Error;

/// Default relative rank tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Crate-wide result alias.
pub type Result<T, E = Error> = core::result::Result<T, E>;

pub use complement::{minimal_rigid_complement, GradedComplement, Variant};
pub use structure::{compute_filtration, quotient_tower, Filtration, QuotientTower, StructureSpec};
