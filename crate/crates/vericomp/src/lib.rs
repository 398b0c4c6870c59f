//! Interactive proofs for the evaluation of layered arithmetic circuits,
//! over GF(2^61 - 1).
//!
//! The core is a sum-check-based circuit-evaluation protocol whose prover
//! runs in time linear in the circuit size for circuits with regular wiring,
//! plus special-purpose protocols: a batched protocol for data-parallel
//! circuits with arbitrary wiring, a matrix-multiplication protocol whose
//! prover overhead is an additive O(n^2) on top of any multiplication
//! algorithm, and a carry-aware protocol for the pattern-matching layer.
//! Verifiers stream their inputs and keep O(log n) field elements of state.

pub mod circuit;
pub mod counters;
pub mod dataparallel;
pub mod field;
pub mod gkr;
pub mod matmul;
pub mod mle;
pub mod patternmatch;
pub mod sumcheck;
pub mod transcript;

pub use field::FieldElement;
pub use transcript::{ProtocolId, Rejection, Transcript};
