//! Identification of structural shocks in vector autoregressions under sign
//! and ranking restrictions.
//!
//! The library is organized around four pieces:
//!
//! * [`var`] — reduced-form VAR representation, impulse responses and the
//!   simulation DGP used by the benchmark harness.
//! * [`restrictions`] — restriction records, file parsing, identifiability
//!   checks and the candidate table that drives the column search.
//! * [`sampling`] — Haar-uniform orthogonal draws, the natural-conjugate
//!   posterior, the column-search accept-reject sampler, the classical
//!   one-shot baseline, the enumeration fallback and the A0-side variant.
//! * [`harness`] — efficiency benchmarks and the algorithm-equivalence study.
//!
//! All randomness flows through explicit seedable streams (see [`rng`]), so
//! every operation is reproducible given a seed.

pub mod error;
pub mod harness;
pub mod restrictions;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod var;

pub use error::Error;
