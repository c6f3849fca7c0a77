//! Darmon points on p-adic tori.
//!
//! This crate computes Stark–Heegner / Darmon points attached to a real
//! quadratic field `K` inside the p-adic upper half plane, following the
//! cohomological recipe: a harmonic-cocycle-valued class on the Bruhat–Tits
//! tree of `PGL2(Q_p)` is built from an arithmetic group, lifted to a class
//! valued in measures on the space of primitive vectors of `Z_p^2`, and then
//! integrated against the multiplicative integrand attached to an optimal
//! embedding of `K`.  The resulting p-adic period is finally mapped to a
//! point on an abelian variety through the Tate uniformization.
//!
//! Module map:
//! * [`padic`]   – fixed-precision p-adic scalars and the unramified
//!   quadratic extension, Iwasawa logarithm, Hensel square roots.
//! * [`bttree`]  – vertices/edges of the tree in normal form, the
//!   edge <-> ball dictionary on `P^1(Q_p)`, ball covers.
//! * [`measures`] – harmonic edge systems and measures on primitive vectors.
//! * [`quatalg`] – quaternionic group data: orders, the local splitting,
//!   membership tests, the abelianization oracle interface.
//! * [`modsym`]  – Manin symbols for `Gamma_0(p)`: the fixture oracle.
//! * [`cocycle`] – radial systems and the universal harmonic cocycle,
//!   Hecke stabilization.
//! * [`lift`]    – lifting the stabilized cocycle to measures on primitive
//!   vectors, and the U_p operator.
//! * [`darmon`]  – optimal embeddings, multiplicative integrals and the
//!   Darmon period itself.
//! * [`tate`]    – Tate curves, q-logarithms, and points on elliptic curves.
//! * [`cli`]     – the thin command line front end.

pub mod bttree;
pub mod cli;
pub mod cocycle;
pub mod darmon;
pub mod error;
pub mod lift;
pub mod mat;
pub mod measures;
pub mod modsym;
pub mod padic;
pub mod quatalg;
pub mod tate;

pub use error::Error;

/// Crate version, embedded in every serialized result for provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
