//! Multilinear extensions, the equality polynomial beta, and the dense
//! bind-one-variable tables every prover in this crate is built on.
//!
//! Convention used throughout: variable 1 is the HIGH-ORDER bit of a label.
//! A table of length 2^v indexed by `x` holds the value for the boolean
//! point whose first variable is the most significant bit of `x`. Binding a
//! variable always removes the current most significant axis, so a bound
//! table is the contiguous fold of its two halves.

use crate::circuit::StreamUpdate;
use crate::field::{FieldElement, FieldError};

/// chi_b(x): 1-x for b = 0, x for b = 1.
#[inline]
pub fn chi(b: u64, x: FieldElement) -> FieldElement {
    debug_assert!(b <= 1);
    if b == 0 {
        FieldElement::ONE - x
    } else {
        x
    }
}

/// One factor of beta: (1-z)(1-t) + z*t.
#[inline]
pub fn beta_factor(z: FieldElement, t: FieldElement) -> FieldElement {
    (FieldElement::ONE - z) * (FieldElement::ONE - t) + z * t
}

/// beta(z, p) = prod_j ((1-z_j)(1-p_j) + z_j p_j), the MLE of equality.
pub fn beta_eval(z: &[FieldElement], p: &[FieldElement]) -> FieldElement {
    assert_eq!(z.len(), p.len(), "beta_eval: dimension mismatch");
    z.iter()
        .zip(p)
        .fold(FieldElement::ONE, |acc, (&zj, &pj)| acc * beta_factor(zj, pj))
}

/// Dense power-of-two table of field elements supporting the halving bind.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalTable {
    entries: Vec<FieldElement>,
}

impl EvalTable {
    pub fn from_values(entries: Vec<FieldElement>) -> Self {
        assert!(
            entries.len().is_power_of_two(),
            "table length must be a power of two"
        );
        EvalTable { entries }
    }


    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn num_vars(&self) -> usize {
        self.entries.len().trailing_zeros() as usize
    }

    pub fn as_slice(&self) -> &[FieldElement] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<FieldElement> {
        self.entries
    }

    /// The sole entry of a fully bound table.
    pub fn single(&self) -> FieldElement {
        assert_eq!(self.entries.len(), 1, "table is not fully bound");
        self.entries[0]
    }

    #[inline]
    pub fn get(&self, idx: usize) -> FieldElement {
        self.entries[idx]
    }

    /// entries[(0, idx)] * c0 + entries[(1, idx)] * c1, the lookup identity
    /// used to evaluate a partially bound MLE at the current variable.
    #[inline]
    pub fn split_eval(&self, idx: usize, c0: FieldElement, c1: FieldElement) -> FieldElement {
        let half = self.entries.len() / 2;
        self.entries[idx] * c0 + self.entries[half + idx] * c1
    }

    /// Binds the current first variable to `r`, halving the table in place:
    /// new[p] = (1-r) * old[(0,p)] + r * old[(1,p)].
    pub fn bind(&mut self, r: FieldElement) {
        assert!(self.entries.len() >= 2, "cannot bind an empty table");
        let half = self.entries.len() / 2;
        let one_minus_r = FieldElement::ONE - r;
        for i in 0..half {
            let lo = self.entries[i];
            let hi = self.entries[half + i];
            self.entries[i] = one_minus_r * lo + r * hi;
        }
        self.entries.truncate(half);
    }
}

/// Binds one variable of a value table; alias for the in-place halving rule.
pub fn bind_variable_values(t: &mut EvalTable, r: FieldElement) {
    t.bind(r);
}

/// chi table over point w: entry b = prod_k chi_{b_k}(w_k), built by the
/// log n-stage doubling recurrence in O(2^v) total work.
pub fn build_chi_table(w: &[FieldElement]) -> EvalTable {
    let mut scratch = 0u64;
    build_chi_table_counted(w, &mut scratch)
}

/// Same as [`build_chi_table`] with a field-multiplication counter.
pub fn build_chi_table_counted(w: &[FieldElement], mults: &mut u64) -> EvalTable {
    let mut table = vec![FieldElement::ONE; 1 << w.len()];
    let mut len = 1usize;
    for &wk in w {
        let one_minus = FieldElement::ONE - wk;
        // Fill back to front so stage j reads stage j-1 in place.
        for i in (0..len).rev() {
            let prev = table[i];
            table[2 * i] = prev * one_minus;
            table[2 * i + 1] = prev * wk;
            *mults += 2;
        }
        len *= 2;
    }
    table.truncate(len);
    EvalTable::from_values(table)
}

/// The C^(0) array: entry p = beta(z, p) for every boolean p. Identical to
/// the chi table since beta(z, p) = chi_p(z) on boolean p.
pub fn build_beta_table(z: &[FieldElement]) -> EvalTable {
    build_chi_table(z)
}

/// Binds one beta-table variable per the z^{-1} halving rule:
/// C^(j)[p] = z_j^{-1} * C^(j-1)[(1, p)] * (r_j z_j + (1-r_j)(1-z_j)).
/// Errors when z_j = 0 (the protocol draws z from the multiplicative group).
pub fn bind_variable_beta(
    t: &mut EvalTable,
    z_j: FieldElement,
    r_j: FieldElement,
) -> Result<(), FieldError> {
    let z_inv = z_j.inverse()?;
    let coeff = z_inv * beta_factor(z_j, r_j);
    let half = t.entries.len() / 2;
    assert!(half >= 1, "cannot bind an empty table");
    for i in 0..half {
        t.entries[i] = t.entries[half + i] * coeff;
    }
    t.entries.truncate(half);
    Ok(())
}

/// beta(z, (r_1..r_{j-1}, t, suffix)) in O(1) from the round-j table:
/// C^(j-1)[(1, suffix)] * z_j^{-1} * (t z_j + (1-t)(1-z_j)).
pub fn eval_bound_beta(
    t: &EvalTable,
    z_j: FieldElement,
    t_val: FieldElement,
    suffix: usize,
) -> Result<FieldElement, FieldError> {
    let z_inv = z_j.inverse()?;
    let half = t.entries.len() / 2;
    Ok(t.entries[half + suffix] * z_inv * beta_factor(z_j, t_val))
}

/// Streaming MLE evaluation (one pass, O(log n) state): the aggregate of all
/// updates is the frequency vector a, and the result is a~(w). Duplicate
/// indices and arbitrary order are fine; each update costs O(log n).
pub fn eval_mle_stream(
    updates: &[StreamUpdate],
    w: &[FieldElement],
) -> Result<FieldElement, FieldError> {
    let n = 1u64 << w.len();
    let mut acc = FieldElement::ZERO;
    for u in updates {
        if u.index >= n {
            return Err(FieldError::MagnitudeTooLarge(u.index as i128));
        }
        let delta = FieldElement::from_signed(u.delta)?;
        let mut weight = delta;
        for (k, &wk) in w.iter().enumerate() {
            let bit = (u.index >> (w.len() - 1 - k)) & 1;
            weight = weight * chi(bit, wk);
        }
        acc += weight;
    }
    Ok(acc)
}

/// Table-based MLE evaluation: inner product of the values with the chi
/// table of w. O(n) time and space.
pub fn eval_mle_table(values: &[FieldElement], w: &[FieldElement]) -> FieldElement {
    assert_eq!(
        values.len(),
        1 << w.len(),
        "value count must be 2^dim(point)"
    );
    let chi_table = build_chi_table(w);
    values
        .iter()
        .zip(chi_table.as_slice())
        .fold(FieldElement::ZERO, |acc, (&v, &c)| acc + v * c)
}


/// Stateful C^(j) array for one sum-check invocation. Generalizes the
/// z^{-1} halving rule so that a zero coordinate in a derived z still works:
/// each round picks the endpoint b with beta_factor(z_j, b) != 0 and scales
/// by its inverse, which reduces to the standard rule whenever z_j != 0.
#[derive(Clone, Debug)]
pub struct BetaTable {
    table: EvalTable,
    z: Vec<FieldElement>,
    round: usize, // 0-based index of the variable currently being bound
    pick_hi: bool,
    pick_inv: FieldElement,
}

impl BetaTable {
    pub fn new(z: &[FieldElement]) -> Self {
        let table = build_beta_table(z);
        let mut bt = BetaTable {
            table,
            z: z.to_vec(),
            round: 0,
            pick_hi: false,
            pick_inv: FieldElement::ONE,
        };
        bt.refresh_pick();
        bt
    }

    fn refresh_pick(&mut self) {
        if self.round >= self.z.len() {
            return;
        }
        let zj = self.z[self.round];
        // beta_factor(z, 1) = z, beta_factor(z, 0) = 1 - z; not both zero.
        if zj.is_zero() {
            self.pick_hi = false;
            self.pick_inv = (FieldElement::ONE - zj).inverse().unwrap();
        } else {
            self.pick_hi = true;
            self.pick_inv = zj.inverse().unwrap();
        }
    }

    pub fn num_vars(&self) -> usize {
        self.z.len()
    }

    /// Scalar c such that beta at (bound prefix, t, suffix) equals
    /// entry_for(suffix) * c. One inverse per round, reused across points.
    pub fn round_coeff(&self, t: FieldElement) -> FieldElement {
        let zj = self.z[self.round];
        beta_factor(zj, t) * self.pick_inv
    }

    #[inline]
    pub fn entry_for(&self, suffix: usize) -> FieldElement {
        let half = self.table.len() / 2;
        let base = if self.pick_hi { half } else { 0 };
        self.table.as_slice()[base + suffix]
    }

    /// Full evaluation at (t, suffix) for the current round.
    #[inline]
    pub fn eval(&self, t: FieldElement, suffix: usize) -> FieldElement {
        self.entry_for(suffix) * self.round_coeff(t)
    }

    /// Direct entry lookup over the remaining variables (used when the
    /// current protocol variable does not appear in beta at all).
    #[inline]
    pub fn entry(&self, idx: usize) -> FieldElement {
        self.table.as_slice()[idx]
    }

    pub fn bind(&mut self, r: FieldElement) {
        let coeff = self.round_coeff(r);
        let half = self.table.len() / 2;
        let base = if self.pick_hi { half } else { 0 };
        for i in 0..half {
            self.table.entries[i] = self.table.entries[base + i] * coeff;
        }
        self.table.entries.truncate(half);
        self.round += 1;
        self.refresh_pick();
    }

    /// The accumulated scalar beta(z, r) once every variable is bound.
    pub fn bound_value(&self) -> FieldElement {
        self.table.single()
    }
}
