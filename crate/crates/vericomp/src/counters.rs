//! Work counters used by the cost assertions in the test suites. Counts are
//! incremented at algorithm level (loop trip counts times the field
//! operations per trip), so they are deterministic and thread-free.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WorkCounter {
    /// Field multiplications.
    pub mults: u64,
    /// Point-oracle evaluations (naive prover) or live terms (fast provers).
    pub terms: u64,
    /// Gates enumerated by wiring-predicate evaluations.
    pub gate_visits: u64,
    /// Field elements allocated beyond the caller-provided buffers.
    pub allocated: u64,
}

impl WorkCounter {
    pub fn new() -> Self {
        Self::default()
    }
}
