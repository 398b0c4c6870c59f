//! Verifiable pattern matching: the subtraction layer computes
//! t_{(i+k) mod n} - p_k at gate (i, k), and its wiring is not regular --
//! one label bit of i or k can flip many bits of i + k. The layer is instead
//! handled by a sum-check with auxiliary carry variables: the carry
//! polynomial forces each c_j to equal the j-th carry of i + k, and the text
//! MLE is read at the sum bits produced by the parity polynomial.
//!
//! Inside this module bit 1 of an integer is its LEAST significant bit (the
//! carry chain runs upward); the interface points translate to and from the
//! circuit's label convention at the boundary. The carry past the top bit is
//! dropped, so text indexing is cyclic mod n, and the occurrence count is
//! over all n rotations.

use crate::circuit::{build_patternmatch_layers, LayeredCircuit};
use crate::counters::WorkCounter;
use crate::field::FieldElement;
use crate::gkr::{
    prove_layer_segment, prove_tree_segment, verify_layer_segment, verify_tree_segment, Claim,
    GkrPlan, Segment,
};
use crate::mle::{beta_eval, chi, BetaTable, EvalTable};
use crate::sumcheck::{interpolate_at, prove_rounds, verify_rounds, PointOracle, RoundMessage, RoundProver};
use crate::transcript::{Draw, ProtocolId, ProveSession, Rejection, Transcript, VerifySession};

fn two() -> FieldElement {
    FieldElement::new(2)
}

/// MLE of the carry predicate: 1 on boolean (i, k, c_in, c_out) iff c_out is
/// the carry of i + k + c_in.
pub fn phi_eval(
    i: FieldElement,
    k: FieldElement,
    c_in: FieldElement,
    c_out: FieldElement,
) -> FieldElement {
    // majority of three bits, multilinearized
    let maj = i * k + i * c_in + k * c_in - two() * i * k * c_in;
    c_out * maj + (FieldElement::ONE - c_out) * (FieldElement::ONE - maj)
}

/// MLE of the sum bit: 1 on boolean (i, k, c) iff i + k + c is odd.
pub fn gamma_eval(i: FieldElement, k: FieldElement, c: FieldElement) -> FieldElement {
    let x = i + k - two() * i * k;
    x + c - two() * x * c
}

/// Product of the per-position carry constraints; c_0 = 0 and k_j = 0 past
/// the pattern width. Bit 1 is the least significant position.
pub fn phi_chain_eval(
    i: &[FieldElement],
    k: &[FieldElement],
    c: &[FieldElement],
) -> FieldElement {
    let log_n = i.len();
    assert_eq!(c.len(), log_n);
    assert!(k.len() <= log_n);
    let mut acc = FieldElement::ONE;
    let mut c_prev = FieldElement::ZERO;
    for j in 0..log_n {
        let kj = k.get(j).copied().unwrap_or(FieldElement::ZERO);
        acc = acc * phi_eval(i[j], kj, c_prev, c[j]);
        c_prev = c[j];
    }
    acc
}

/// MLE over position-ordered bits: bit `a` of the index pairs with
/// `point[a]`, least significant first.
pub fn mle_positional(values: &[FieldElement], point: &[FieldElement]) -> FieldElement {
    assert_eq!(values.len(), 1 << point.len());
    let mut acc = FieldElement::ZERO;
    for (idx, &v) in values.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        let mut w = v;
        for (a, &pa) in point.iter().enumerate() {
            w = w * chi(((idx >> a) & 1) as u64, pa);
        }
        acc += w;
    }
    acc
}

/// The subtraction-layer values: gate (i, k) holds T[(i+k) mod n] - P[k],
/// with i in the high label bits.
pub fn subtraction_values(text: &[FieldElement], pattern: &[FieldElement]) -> Vec<FieldElement> {
    let n = text.len();
    let m = pattern.len();
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        for (k, &p) in pattern.iter().enumerate() {
            out.push(text[(i + k) % n] - p);
        }
    }
    out
}

/// Sum-check variable schedule: (i_1, k_1, c_1, i_2, ..., i_log n, c_log n),
/// triple j losing its k leg past the pattern width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PmVar {
    I(usize),
    K(usize),
    C(usize),
}

fn var_schedule(log_n: usize, log_m: usize) -> Vec<PmVar> {
    let mut vars = Vec::with_capacity(2 * log_n + log_m);
    for j in 1..=log_n {
        vars.push(PmVar::I(j));
        if j <= log_m {
            vars.push(PmVar::K(j));
        }
        vars.push(PmVar::C(j));
    }
    vars
}

/// Per-variable degree bounds, from the factorization beta * Phi * (T - P).
pub fn pm_degrees(log_n: usize, log_m: usize) -> Vec<usize> {
    var_schedule(log_n, log_m)
        .iter()
        .map(|v| match *v {
            PmVar::C(j) if j == log_n => 1,
            _ => 3,
        })
        .collect()
}

/// Reorders a circuit-label point z (i high bits first, then k bits) into
/// the (i_1, k_1, i_2, ...) binding order over least-significant-first bits.
fn reorder_z(z: &[FieldElement], log_n: usize, log_m: usize) -> Vec<FieldElement> {
    assert_eq!(z.len(), log_n + log_m);
    let mut out = Vec::with_capacity(z.len());
    for j in 1..=log_n {
        out.push(z[log_n - j]);
        if j <= log_m {
            out.push(z[log_n + log_m - j]);
        }
    }
    out
}

/// Brute-force oracle for the carry-augmented layer polynomial
/// g_z(i, k, c) = beta(z, (i,k)) * Phi(i,k,c) * (T~(gamma args) - P~(k)).
pub struct PatternOracle<'a> {
    pub text: &'a [FieldElement],
    pub pattern: &'a [FieldElement],
    z_ordered: Vec<FieldElement>,
    log_n: usize,
    log_m: usize,
    vars: Vec<PmVar>,
    degrees: Vec<usize>,
}

impl<'a> PatternOracle<'a> {
    /// `z` is in circuit-label order.
    pub fn new(text: &'a [FieldElement], pattern: &'a [FieldElement], z: &[FieldElement]) -> Self {
        let log_n = text.len().trailing_zeros() as usize;
        let log_m = pattern.len().trailing_zeros() as usize;
        PatternOracle {
            text,
            pattern,
            z_ordered: reorder_z(z, log_n, log_m),
            log_n,
            log_m,
            vars: var_schedule(log_n, log_m),
            degrees: pm_degrees(log_n, log_m),
        }
    }

    fn split(&self, point: &[FieldElement]) -> (Vec<FieldElement>, Vec<FieldElement>, Vec<FieldElement>) {
        let mut i = vec![FieldElement::ZERO; self.log_n];
        let mut k = vec![FieldElement::ZERO; self.log_m];
        let mut c = vec![FieldElement::ZERO; self.log_n];
        for (x, var) in self.vars.iter().enumerate() {
            match *var {
                PmVar::I(j) => i[j - 1] = point[x],
                PmVar::K(j) => k[j - 1] = point[x],
                PmVar::C(j) => c[j - 1] = point[x],
            }
        }
        (i, k, c)
    }
}

impl PointOracle for PatternOracle<'_> {
    fn num_vars(&self) -> usize {
        self.vars.len()
    }

    fn degree(&self, var: usize) -> usize {
        self.degrees[var - 1]
    }

    fn eval(&mut self, point: &[FieldElement]) -> FieldElement {
        let (i, k, c) = self.split(point);
        let ik_point: Vec<FieldElement> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| !matches!(v, PmVar::C(_)))
            .map(|(x, _)| point[x])
            .collect();
        let beta = beta_eval(&self.z_ordered, &ik_point);
        let phi = phi_chain_eval(&i, &k, &c);
        let mut gamma_point = Vec::with_capacity(self.log_n);
        let mut c_prev = FieldElement::ZERO;
        for j in 0..self.log_n {
            let kj = k.get(j).copied().unwrap_or(FieldElement::ZERO);
            gamma_point.push(gamma_eval(i[j], kj, c_prev));
            c_prev = c[j];
        }
        let t_val = mle_positional(self.text, &gamma_point);
        let p_val = mle_positional(self.pattern, &k);
        beta * phi * (t_val - p_val)
    }
}

/// Fast prover for the carry-augmented layer: only carry-consistent suffixes
/// are enumerated, the bound carry constraints collapse into one running
/// product, the text table folds one position after each carry binds, and
/// the pattern table folds with each k bit.
pub struct PatternLayerProver {
    log_n: usize,
    log_m: usize,
    vars: Vec<PmVar>,
    degrees: Vec<usize>,
    round: usize,
    beta: BetaTable,
    t_table: EvalTable,
    p_table: EvalTable,
    bound_i: Vec<FieldElement>,
    bound_k: Vec<FieldElement>,
    bound_c: Vec<FieldElement>,
    phi_bound: FieldElement,
    running: FieldElement,
    last: Option<RoundMessage>,
    pub counter: WorkCounter,
}

impl PatternLayerProver {
    pub fn new(
        text: &[FieldElement],
        pattern: &[FieldElement],
        z: &[FieldElement],
        claim: FieldElement,
    ) -> Self {
        let log_n = text.len().trailing_zeros() as usize;
        let log_m = pattern.len().trailing_zeros() as usize;
        let n = text.len();
        let m = pattern.len();
        let mut counter = WorkCounter::new();
        // position-ordered copies: axis 1 = least significant sum/k bit
        let mut t_perm = vec![FieldElement::ZERO; n];
        for (idx, &v) in text.iter().enumerate() {
            t_perm[(idx as u64).reverse_bits() as usize >> (64 - log_n)] = v;
        }
        let mut p_perm = vec![FieldElement::ZERO; m];
        for (idx, &v) in pattern.iter().enumerate() {
            p_perm[(idx as u64).reverse_bits() as usize >> (64 - log_m)] = v;
        }
        counter.allocated += (n + m) as u64;
        let z_ordered = reorder_z(z, log_n, log_m);
        counter.mults += 2 * (1u64 << (log_n + log_m));
        PatternLayerProver {
            log_n,
            log_m,
            vars: var_schedule(log_n, log_m),
            degrees: pm_degrees(log_n, log_m),
            round: 1,
            beta: BetaTable::new(&z_ordered),
            t_table: EvalTable::from_values(t_perm),
            p_table: EvalTable::from_values(p_perm),
            bound_i: Vec::new(),
            bound_k: Vec::new(),
            bound_c: Vec::new(),
            phi_bound: FieldElement::ONE,
            running: claim,
            last: None,
            counter,
        }
    }

    fn c_prev(&self, j: usize) -> FieldElement {
        if j >= 2 {
            self.bound_c[j - 2]
        } else {
            FieldElement::ZERO
        }
    }

    fn k_bound_or_zero(&self, j: usize) -> FieldElement {
        if j <= self.log_m {
            self.bound_k[j - 1]
        } else {
            FieldElement::ZERO
        }
    }

    /// Free suffix bits beyond triple j: (i_{j'}, k_{j'}) pairs. Returns the
    /// bit count.
    fn tail_pairs(&self, j: usize) -> usize {
        (self.log_n - j) + self.log_m.saturating_sub(j)
    }
}

/// Decoded tail of free (i, k) bits for positions j+1..log_n, plus the
/// carries chained from a free boundary value.
struct Tail {
    i_bits: Vec<u64>,
    k_bits: Vec<u64>, // zero-extended past log_m
}

impl Tail {
    fn decode(free: usize, j: usize, log_n: usize, log_m: usize) -> Tail {
        let mut i_bits = Vec::with_capacity(log_n - j);
        let mut k_bits = Vec::with_capacity(log_n - j);
        let width = (log_n - j) + log_m.saturating_sub(j);
        let mut consumed = 0;
        for jp in j + 1..=log_n {
            consumed += 1;
            i_bits.push(((free >> (width - consumed)) & 1) as u64);
            if jp <= log_m {
                consumed += 1;
                k_bits.push(((free >> (width - consumed)) & 1) as u64);
            } else {
                k_bits.push(0);
            }
        }
        Tail { i_bits, k_bits }
    }

    /// Carries and sum bits for positions j+1..log_n given the carry into
    /// position j+1.
    fn chain(&self, c_into: u64) -> (Vec<u64>, Vec<u64>) {
        let mut carries = Vec::with_capacity(self.i_bits.len());
        let mut sums = Vec::with_capacity(self.i_bits.len());
        let mut c = c_into;
        for (&i, &k) in self.i_bits.iter().zip(&self.k_bits) {
            let total = i + k + c;
            sums.push(total & 1);
            c = total >> 1;
            carries.push(c);
        }
        (carries, sums)
    }

    /// Index over the text-table axes j+shift+1..log_n from the sum bits.
    fn t_index(&self, sums: &[u64], skip: usize, log_n: usize, j: usize) -> usize {
        let mut idx = 0usize;
        for (off, &s) in sums.iter().enumerate().skip(skip) {
            let pos = j + 1 + off; // sum position
            idx |= (s as usize) << (log_n - pos);
        }
        idx
    }

    fn p_index(&self, j: usize, log_m: usize) -> usize {
        let mut idx = 0usize;
        for (off, &k) in self.k_bits.iter().enumerate() {
            let pos = j + 1 + off;
            if pos <= log_m {
                idx |= (k as usize) << (log_m - pos);
            }
        }
        idx
    }

    /// Remaining (i, k) suffix in binding order, most significant first.
    fn beta_suffix(&self, j: usize, log_m: usize) -> usize {
        let mut sfx = 0usize;
        for (off, (&i, &k)) in self.i_bits.iter().zip(&self.k_bits).enumerate() {
            let pos = j + 1 + off;
            sfx = (sfx << 1) | i as usize;
            if pos <= log_m {
                sfx = (sfx << 1) | k as usize;
            }
        }
        sfx
    }
}

impl RoundProver for PatternLayerProver {
    fn num_vars(&self) -> usize {
        self.vars.len()
    }

    fn degree(&self, round: usize) -> usize {
        self.degrees[round - 1]
    }

    fn round_message(&mut self) -> RoundMessage {
        let var = self.vars[self.round - 1];
        let deg = self.degrees[self.round - 1];
        let ts: Vec<FieldElement> = std::iter::once(0u64)
            .chain(2..=deg as u64)
            .map(FieldElement::new)
            .collect();
        let mut evals = vec![FieldElement::ZERO; ts.len()];
        let log_n = self.log_n;
        let log_m = self.log_m;
        let one = FieldElement::ONE;

        match var {
            PmVar::I(j) => {
                let c_prev = self.c_prev(j);
                let has_k = j <= log_m;
                let tail_bits = self.tail_pairs(j);
                let beta_coeff: Vec<_> = ts.iter().map(|&t| self.beta.round_coeff(t)).collect();
                for kj in 0..=(has_k as u64) {
                    let kf = FieldElement::new(kj);
                    for cj in 0..2u64 {
                        let cf = FieldElement::new(cj);
                        for free in 0..1usize << tail_bits {
                            let tail = Tail::decode(free, j, log_n, log_m);
                            let (_, sums) = tail.chain(cj);
                            let t_idx = tail.t_index(&sums, 0, log_n, j);
                            let p_scalar = if log_m >= j {
                                // axes j..log_m remain: k_j then the tail
                                let mut idx = (kj as usize) << (log_m - j);
                                idx |= tail.p_index(j, log_m);
                                self.p_table.get(idx)
                            } else {
                                self.p_table.single()
                            };
                            let beta_sfx = {
                                let mut sfx = 0usize;
                                if has_k {
                                    sfx = kj as usize;
                                }
                                (sfx << (tail.beta_width(j, log_m)))
                                    | tail.beta_suffix(j, log_m)
                            };
                            let beta_entry = self.beta.entry_for(beta_sfx);
                            for (ti, &t) in ts.iter().enumerate() {
                                let phi = phi_eval(t, kf, c_prev, cf);
                                let g = gamma_eval(t, kf, c_prev);
                                let t_val = self.t_table.split_eval(t_idx, one - g, g);
                                evals[ti] += beta_entry
                                    * beta_coeff[ti]
                                    * self.phi_bound
                                    * phi
                                    * (t_val - p_scalar);
                            }
                            self.counter.terms += ts.len() as u64;
                            self.counter.mults += 12 * ts.len() as u64;
                        }
                    }
                }
            }
            PmVar::K(j) => {
                let c_prev = self.c_prev(j);
                let i_r = self.bound_i[j - 1];
                let tail_bits = self.tail_pairs(j);
                let beta_coeff: Vec<_> = ts.iter().map(|&t| self.beta.round_coeff(t)).collect();
                for cj in 0..2u64 {
                    let cf = FieldElement::new(cj);
                    for free in 0..1usize << tail_bits {
                        let tail = Tail::decode(free, j, log_n, log_m);
                        let (_, sums) = tail.chain(cj);
                        let t_idx = tail.t_index(&sums, 0, log_n, j);
                        let p_idx = tail.p_index(j, log_m);
                        let beta_sfx = tail.beta_suffix(j, log_m);
                        let beta_entry = self.beta.entry_for(beta_sfx);
                        for (ti, &t) in ts.iter().enumerate() {
                            let phi = phi_eval(i_r, t, c_prev, cf);
                            let g = gamma_eval(i_r, t, c_prev);
                            let t_val = self.t_table.split_eval(t_idx, one - g, g);
                            let p_val = self.p_table.split_eval(p_idx, one - t, t);
                            evals[ti] += beta_entry
                                * beta_coeff[ti]
                                * self.phi_bound
                                * phi
                                * (t_val - p_val);
                        }
                        self.counter.terms += ts.len() as u64;
                        self.counter.mults += 14 * ts.len() as u64;
                    }
                }
            }
            PmVar::C(j) => {
                let c_prev = self.c_prev(j);
                let i_r = self.bound_i[j - 1];
                let k_r = self.k_bound_or_zero(j);
                let gamma_j = gamma_eval(i_r, k_r, c_prev);
                let phi_j: Vec<_> = ts.iter().map(|&t| phi_eval(i_r, k_r, c_prev, t)).collect();
                if j == log_n {
                    // last carry: no further positions, T has one live axis
                    let t_val = |weights: (FieldElement, FieldElement)| {
                        self.t_table.split_eval(0, weights.0, weights.1)
                    };
                    let p_scalar = self.p_table.single();
                    let base = self.beta.entry(0) * self.phi_bound;
                    for (ti, _) in ts.iter().enumerate() {
                        let tv = t_val((one - gamma_j, gamma_j));
                        evals[ti] = base * phi_j[ti] * (tv - p_scalar);
                    }
                    self.counter.terms += ts.len() as u64;
                    self.counter.mults += 8 * ts.len() as u64;
                } else {
                    // free bits: i_{j+1}, [k_{j+1}], c_{j+1}, then pairs beyond
                    let has_k1 = j + 1 <= log_m;
                    let deeper = self.tail_pairs(j + 1);
                    for i1 in 0..2u64 {
                        let i1f = FieldElement::new(i1);
                        for k1 in 0..=(has_k1 as u64) {
                            let k1f = FieldElement::new(k1);
                            for c1 in 0..2u64 {
                                let c1f = FieldElement::new(c1);
                                for free in 0..1usize << deeper {
                                    let tail = Tail::decode(free, j + 1, log_n, log_m);
                                    let (_, sums) = tail.chain(c1);
                                    // text axes: j (scalar gamma_j), j+1
                                    // (t-dependent), then the boolean sums
                                    let rest = tail.t_index(&sums, 0, log_n, j + 1);
                                    let quarter = 1usize << (log_n - j - 1);
                                    let p_val = if has_k1 || log_m > j {
                                        let mut idx = 0usize;
                                        if has_k1 {
                                            idx |= (k1 as usize) << (log_m - j - 1);
                                        }
                                        idx |= tail.p_index(j + 1, log_m);
                                        self.p_table.get(idx)
                                    } else {
                                        self.p_table.single()
                                    };
                                    let beta_sfx = {
                                        let mut sfx = i1 as usize;
                                        if has_k1 {
                                            sfx = (sfx << 1) | k1 as usize;
                                        }
                                        (sfx << tail.beta_width(j + 1, log_m))
                                            | tail.beta_suffix(j + 1, log_m)
                                    };
                                    let beta_entry = self.beta.entry(beta_sfx);
                                    for (ti, &t) in ts.iter().enumerate() {
                                        let phi_next = phi_eval(i1f, k1f, t, c1f);
                                        let g_next = gamma_eval(i1f, k1f, t);
                                        // combine the two live text axes
                                        let w_j = (one - gamma_j, gamma_j);
                                        let w_n = (one - g_next, g_next);
                                        let t00 = self.t_table.get(rest);
                                        let t01 = self.t_table.get(quarter + rest);
                                        let t10 = self.t_table.get(2 * quarter + rest);
                                        let t11 = self.t_table.get(3 * quarter + rest);
                                        let t_val = w_j.0 * (w_n.0 * t00 + w_n.1 * t01)
                                            + w_j.1 * (w_n.0 * t10 + w_n.1 * t11);
                                        evals[ti] += beta_entry
                                            * self.phi_bound
                                            * phi_j[ti]
                                            * phi_next
                                            * (t_val - p_val);
                                    }
                                    self.counter.terms += ts.len() as u64;
                                    self.counter.mults += 18 * ts.len() as u64;
                                }
                            }
                        }
                    }
                }
            }
        }

        let mut full = Vec::with_capacity(deg + 1);
        full.push(evals[0]);
        full.push(self.running - evals[0]);
        full.extend_from_slice(&evals[1..]);
        let msg = RoundMessage { evals: full };
        self.last = Some(msg.clone());
        msg
    }

    fn bind(&mut self, r: FieldElement) {
        let var = self.vars[self.round - 1];
        match var {
            PmVar::I(j) => {
                let _ = j;
                self.beta.bind(r);
                self.bound_i.push(r);
            }
            PmVar::K(_) => {
                self.beta.bind(r);
                self.counter.mults += self.p_table.len() as u64;
                self.p_table.bind(r);
                self.bound_k.push(r);
            }
            PmVar::C(j) => {
                let c_prev = self.c_prev(j);
                let i_r = self.bound_i[j - 1];
                let k_r = self.k_bound_or_zero(j);
                self.phi_bound = self.phi_bound * phi_eval(i_r, k_r, c_prev, r);
                let g = gamma_eval(i_r, k_r, c_prev);
                self.counter.mults += self.t_table.len() as u64 + 8;
                self.t_table.bind(g);
                self.bound_c.push(r);
            }
        }
        self.running = interpolate_at(&self.last.as_ref().unwrap().evals, r);
        self.round += 1;
    }
}

impl Tail {
    fn beta_width(&self, j: usize, log_m: usize) -> usize {
        self.i_bits.len()
            + self
                .i_bits
                .iter()
                .enumerate()
                .filter(|(off, _)| j + 1 + off <= log_m)
                .count()
    }
}

/// Gamma point of the fully bound run: the text MLE argument.
fn gamma_point(
    bound_i: &[FieldElement],
    bound_k: &[FieldElement],
    bound_c: &[FieldElement],
    log_m: usize,
) -> Vec<FieldElement> {
    let mut out = Vec::with_capacity(bound_i.len());
    let mut c_prev = FieldElement::ZERO;
    for (j0, &i) in bound_i.iter().enumerate() {
        let k = if j0 < log_m {
            bound_k[j0]
        } else {
            FieldElement::ZERO
        };
        out.push(gamma_eval(i, k, c_prev));
        c_prev = bound_c[j0];
    }
    out
}

fn split_bound(
    point: &[FieldElement],
    log_n: usize,
    log_m: usize,
) -> (Vec<FieldElement>, Vec<FieldElement>, Vec<FieldElement>) {
    let vars = var_schedule(log_n, log_m);
    let mut i = Vec::new();
    let mut k = Vec::new();
    let mut c = Vec::new();
    for (x, var) in vars.iter().enumerate() {
        match var {
            PmVar::I(_) => i.push(point[x]),
            PmVar::K(_) => k.push(point[x]),
            PmVar::C(_) => c.push(point[x]),
        }
    }
    (i, k, c)
}

/// Which prover handles the subtraction layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LayerRoute {
    /// Carry-consistent enumeration with folding tables; O(nm) work.
    #[default]
    Fast,
    /// The brute-force reference prover, for cross-checking. Produces an
    /// identical transcript at O(nm^2 log n)-ish cost.
    Unoptimized,
}

/// Prover side of the subtraction-layer reduction: the sum-check plus the
/// claims exchange carrying (T~ at the gamma point, P~ at the bound k).
pub fn prove_patternmatch_layer(
    text: &[FieldElement],
    pattern: &[FieldElement],
    claim: &Claim,
    session: &mut ProveSession,
    counter: &mut WorkCounter,
    route: LayerRoute,
) -> (Vec<FieldElement>, FieldElement, Vec<FieldElement>, FieldElement) {
    let log_n = text.len().trailing_zeros() as usize;
    let log_m = pattern.len().trailing_zeros() as usize;
    let (bound_i, bound_k, bound_c, t_val, p_val) = match route {
        LayerRoute::Fast => {
            let mut prover = PatternLayerProver::new(text, pattern, &claim.point, claim.value);
            prove_rounds(&mut prover, session);
            counter.mults += prover.counter.mults;
            counter.terms += prover.counter.terms;
            let t_val = prover.t_table.single();
            let p_val = prover.p_table.single();
            (prover.bound_i, prover.bound_k, prover.bound_c, t_val, p_val)
        }
        LayerRoute::Unoptimized => {
            let mut prover = NaiveProverRoute::new(text, pattern, &claim.point);
            let out = prove_rounds(&mut prover.inner, session);
            let (bi, bk, bc) = split_bound(&out.point, log_n, log_m);
            let gpt = gamma_point(&bi, &bk, &bc, log_m);
            let t_val = mle_positional(text, &gpt);
            let p_val = mle_positional(pattern, &bk);
            (bi, bk, bc, t_val, p_val)
        }
    };
    let gpt = gamma_point(&bound_i, &bound_k, &bound_c, log_m);
    session.send(vec![t_val, p_val]);
    session.respond(Draw::Uniform, 0);
    (gpt, t_val, bound_k, p_val)
}

struct NaiveProverRoute<'a> {
    inner: crate::sumcheck::NaiveProver<PatternOracle<'a>>,
}

impl<'a> NaiveProverRoute<'a> {
    fn new(text: &'a [FieldElement], pattern: &'a [FieldElement], z: &[FieldElement]) -> Self {
        NaiveProverRoute {
            inner: crate::sumcheck::NaiveProver::new(PatternOracle::new(text, pattern, z)),
        }
    }
}

/// Verifier side; checks the final oracle identity and returns the text and
/// pattern claims for the streaming input checks.
pub fn verify_patternmatch_layer(
    log_n: usize,
    log_m: usize,
    claim: &Claim,
    session: &mut VerifySession<'_>,
    rounds_done: usize,
) -> Result<(Vec<FieldElement>, FieldElement, Vec<FieldElement>, FieldElement), Rejection> {
    let degrees = pm_degrees(log_n, log_m);
    let out = verify_rounds(claim.value, &degrees, session, rounds_done)?;
    let (bi, bk, bc) = split_bound(&out.point, log_n, log_m);
    let msg = session.recv(2)?;
    session.respond(Draw::Uniform, 0)?;
    let (t_val, p_val) = (msg[0], msg[1]);

    let z_ordered = reorder_z(&claim.point, log_n, log_m);
    let ik_point: Vec<FieldElement> = {
        let vars = var_schedule(log_n, log_m);
        vars.iter()
            .enumerate()
            .filter(|(_, v)| !matches!(v, PmVar::C(_)))
            .map(|(x, _)| out.point[x])
            .collect()
    };
    let beta = beta_eval(&z_ordered, &ik_point);
    let phi = phi_chain_eval(&bi, &bk, &bc);
    if beta * phi * (t_val - p_val) != out.claim {
        return Err(Rejection::FinalCheck);
    }
    let gpt = gamma_point(&bi, &bk, &bc, log_m);
    Ok((gpt, t_val, bk, p_val))
}

/// Occurrence count reported by a verified run.
#[derive(Clone, Debug)]
pub struct PatternOutcome {
    pub occurrences: u64,
    pub rounds: usize,
    pub comm_bytes: usize,
}

fn pipeline_plan(fragment: &LayeredCircuit) -> GkrPlan {
    GkrPlan::with_tree_shortcuts(fragment)
}

/// Proves the full pattern-matching pipeline: the Fermat/summation fragment
/// by the circuit protocol, the subtraction layer by the carry sum-check.
pub fn prove_patternmatch(
    text: &[FieldElement],
    pattern: &[FieldElement],
    seed: u64,
) -> Result<(Transcript, FieldElement), crate::circuit::CircuitError> {
    prove_patternmatch_with(text, pattern, seed, LayerRoute::Fast)
}

/// Like [`prove_patternmatch`] with an explicit subtraction-layer route.
pub fn prove_patternmatch_with(
    text: &[FieldElement],
    pattern: &[FieldElement],
    seed: u64,
    route: LayerRoute,
) -> Result<(Transcript, FieldElement), crate::circuit::CircuitError> {
    let n = text.len();
    let m = pattern.len();
    let fragment = build_patternmatch_layers(n, m)?;
    let sub = subtraction_values(text, pattern);
    let mut values = fragment.evaluate(&sub)?;
    let m_all = values[0][0];
    values.push(sub);

    let mut counter = WorkCounter::new();
    let mut session = ProveSession::new(ProtocolId::Pattern, seed);
    session.begin_section(0);
    session.send(vec![m_all]);
    session.respond(Draw::Nonzero, 0);
    let mut pending = vec![Claim {
        point: Vec::new(),
        value: m_all,
    }];
    let plan = pipeline_plan(&fragment);
    let mut total_vars = 0usize;
    for &seg in &plan.segments {
        let below_idx = match seg {
            Segment::Layer(i) => i + 1,
            Segment::AdditionTree { top, depth } => top + depth,
        };
        let claim = &pending[0];
        let below = std::mem::take(&mut values[below_idx]);
        pending = match seg {
            Segment::Layer(i) => {
                let wiring = fragment.layers[i].regular().unwrap();
                session.begin_section((i + 1) as u16);
                total_vars += wiring.in_vars;
                prove_layer_segment(wiring, claim, below, &mut session, &mut counter)
            }
            Segment::AdditionTree { top, depth } => {
                session.begin_section((top + 1) as u16);
                total_vars += depth;
                prove_tree_segment(depth, claim, below, &mut session, &mut counter)
            }
        };
        assert_eq!(pending.len(), 1, "the fragment reduces to a single claim");
    }

    session.begin_section((fragment.depth() + 1) as u16);
    let log_n = n.trailing_zeros() as usize;
    let log_m = m.trailing_zeros() as usize;
    total_vars += 2 * log_n + log_m;
    prove_patternmatch_layer(text, pattern, &pending[0], &mut session, &mut counter, route);
    Ok((session.into_transcript(total_vars as u16), m_all))
}

/// Verifies a pattern-matching transcript; the only streamed inputs are the
/// text and the pattern.
pub fn verify_patternmatch(
    text: &[FieldElement],
    pattern: &[FieldElement],
    bytes: &[u8],
) -> Result<PatternOutcome, Rejection> {
    let n = text.len();
    let m = pattern.len();
    let log_n = n.trailing_zeros() as usize;
    let log_m = m.trailing_zeros() as usize;
    let fragment = build_patternmatch_layers(n, m)
        .map_err(|e| Rejection::Malformed(e.to_string()))?;
    let mut session = VerifySession::open(bytes, ProtocolId::Pattern)?;
    session.begin_section(0)?;
    let opening = session.recv(1)?;
    session.respond(Draw::Nonzero, 0)?;
    let m_all = opening[0];
    let mut pending = vec![Claim {
        point: Vec::new(),
        value: m_all,
    }];
    let plan = pipeline_plan(&fragment);
    let mut rounds_done = 0usize;
    for &seg in &plan.segments {
        let claim = &pending[0];
        pending = match seg {
            Segment::Layer(i) => {
                let wiring = fragment.layers[i].regular().unwrap();
                session.begin_section((i + 1) as u16)?;
                rounds_done += wiring.in_vars;
                verify_layer_segment(wiring, claim, &mut session, rounds_done)?
            }
            Segment::AdditionTree { top, depth } => {
                session.begin_section((top + 1) as u16)?;
                rounds_done += depth;
                verify_tree_segment(depth, claim, &mut session, rounds_done)?
            }
        };
        if pending.len() != 1 {
            return Err(Rejection::Malformed("fragment claim fan-out".into()));
        }
    }
    session.begin_section((fragment.depth() + 1) as u16)?;
    let (gpt, t_val, bk, p_val) =
        verify_patternmatch_layer(log_n, log_m, &pending[0], &mut session, rounds_done)?;
    let (rounds, comm_bytes) = session.finish()?;

    // streaming checks of the two input MLEs
    if mle_positional(text, &gpt) != t_val {
        return Err(Rejection::InputCheck);
    }
    if mle_positional(pattern, &bk) != p_val {
        return Err(Rejection::InputCheck);
    }

    let occurrences = (FieldElement::new(n as u64) - m_all).value();
    Ok(PatternOutcome {
        occurrences,
        rounds,
        comm_bytes,
    })
}

/// Cyclic scan: occurrences of the pattern in the text, indices mod n.
pub fn naive_count(text: &[FieldElement], pattern: &[FieldElement]) -> u64 {
    let n = text.len();
    (0..n)
        .filter(|&i| {
            pattern
                .iter()
                .enumerate()
                .all(|(k, &p)| text[(i + k) % n] == p)
        })
        .count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mle::eval_mle_table;
    use crate::sumcheck::NaiveProver;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn fe(v: u64) -> FieldElement {
        FieldElement::new(v)
    }

    fn fes(vs: &[u64]) -> Vec<FieldElement> {
        vs.iter().map(|&v| fe(v)).collect()
    }

    #[test]
    fn phi_gamma_boolean_examples() {
        assert_eq!(phi_eval(fe(1), fe(1), fe(0), fe(1)), fe(1));
        assert_eq!(phi_eval(fe(1), fe(0), fe(0), fe(1)), fe(0));
        assert_eq!(gamma_eval(fe(1), fe(0), fe(0)), fe(1));
        assert_eq!(gamma_eval(fe(1), fe(1), fe(0)), fe(0));
    }

    #[test]
    fn phi_gamma_match_dense_interpolation_oracles() {
        // 16-entry and 8-entry truth tables, evaluated as dense MLEs
        let mut phi_table = vec![FieldElement::ZERO; 16];
        for bits in 0..16usize {
            let (i, k, c0, c1) = (bits >> 3 & 1, bits >> 2 & 1, bits >> 1 & 1, bits & 1);
            if (i + k + c0 >= 2) as usize == c1 {
                phi_table[bits] = fe(1);
            }
        }
        let mut gamma_table = vec![FieldElement::ZERO; 8];
        for bits in 0..8usize {
            let (i, k, c) = (bits >> 2 & 1, bits >> 1 & 1, bits & 1);
            if (i + k + c) % 2 == 1 {
                gamma_table[bits] = fe(1);
            }
        }
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            let pt: Vec<_> = (0..4).map(|_| FieldElement::random(&mut rng)).collect();
            assert_eq!(
                phi_eval(pt[0], pt[1], pt[2], pt[3]),
                eval_mle_table(&phi_table, &pt)
            );
            assert_eq!(
                gamma_eval(pt[0], pt[1], pt[2]),
                eval_mle_table(&gamma_table, &pt[..3])
            );
        }
    }

    #[test]
    fn phi_chain_is_a_carry_indicator() {
        // log n = 2: i = 1 (bits 1, 0), k = 1: carries are (1, 0)
        let i = fes(&[1, 0]);
        let k = fes(&[1, 0]);
        for c_bits in 0..4u64 {
            let c = fes(&[c_bits & 1, (c_bits >> 1) & 1]);
            let expect = if c_bits == 0b01 { fe(1) } else { fe(0) };
            assert_eq!(phi_chain_eval(&i, &k, &c), expect, "c = {c_bits:02b}");
        }
        assert_eq!(
            phi_chain_eval(&fes(&[0, 0]), &fes(&[0, 0]), &fes(&[0, 0])),
            fe(1)
        );

        // random non-boolean point: product of the factor oracle
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..20 {
            let i: Vec<_> = (0..3).map(|_| FieldElement::random(&mut rng)).collect();
            let k: Vec<_> = (0..2).map(|_| FieldElement::random(&mut rng)).collect();
            let c: Vec<_> = (0..3).map(|_| FieldElement::random(&mut rng)).collect();
            let direct = phi_eval(i[0], k[0], fe(0), c[0])
                * phi_eval(i[1], k[1], c[0], c[1])
                * phi_eval(i[2], fe(0), c[1], c[2]);
            assert_eq!(phi_chain_eval(&i, &k, &c), direct);
        }
    }

    #[test]
    fn carry_soundness_exhaustive() {
        // on boolean (i, k), summing Phi(i,k,c) x(c) over all c picks out
        // exactly the correct carry vector
        let log_n = 3;
        let log_m = 2;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let x: Vec<_> = (0..1 << log_n)
            .map(|_| FieldElement::random(&mut rng))
            .collect();
        for iv in 0..1u64 << log_n {
            for kv in 0..1u64 << log_m {
                let i: Vec<_> = (0..log_n).map(|b| fe((iv >> b) & 1)).collect();
                let k: Vec<_> = (0..log_m).map(|b| fe((kv >> b) & 1)).collect();
                // correct carry chain and sum bits
                let mut c_true = 0u64;
                let mut carry = 0u64;
                for b in 0..log_n {
                    let kb = if b < log_m { (kv >> b) & 1 } else { 0 };
                    let total = ((iv >> b) & 1) + kb + carry;
                    carry = total >> 1;
                    c_true |= carry << b;
                }
                let mut acc = FieldElement::ZERO;
                for cv in 0..1u64 << log_n {
                    let c: Vec<_> = (0..log_n).map(|b| fe((cv >> b) & 1)).collect();
                    acc += phi_chain_eval(&i, &k, &c) * x[cv as usize];
                }
                assert_eq!(acc, x[c_true as usize], "i={iv} k={kv}");
            }
        }
    }

    #[test]
    fn gamma_composition_is_binary_addition() {
        let log_n = 3;
        let log_m = 2;
        for iv in 0..1u64 << log_n {
            for kv in 0..1u64 << log_m {
                let mut carry = 0u64;
                let mut got = 0u64;
                let mut c_prev = fe(0);
                for b in 0..log_n {
                    let ib = fe((iv >> b) & 1);
                    let kb = if b < log_m { fe((kv >> b) & 1) } else { fe(0) };
                    let g = gamma_eval(ib, kb, c_prev);
                    got |= g.value() << b;
                    let total = ((iv >> b) & 1) + if b < log_m { (kv >> b) & 1 } else { 0 } + carry;
                    carry = total >> 1;
                    c_prev = fe(carry);
                }
                assert_eq!(got, (iv + kv) % (1 << log_n), "i={iv} k={kv}");
            }
        }
    }

    #[test]
    fn oracle_boolean_z_reads_the_gate_value() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let n = 4;
        let m = 2;
        let text: Vec<_> = (0..n).map(|_| FieldElement::random(&mut rng)).collect();
        let pattern: Vec<_> = (0..m).map(|_| FieldElement::random(&mut rng)).collect();
        let sub = subtraction_values(&text, &pattern);
        // hypercube sum of the oracle at boolean z equals the gate value
        for gate in 0..n * m {
            let log = 3;
            let z: Vec<_> = (0..log)
                .map(|b| fe(((gate >> (log - 1 - b)) & 1) as u64))
                .collect();
            let mut oracle = PatternOracle::new(&text, &pattern, &z);
            let v = oracle.num_vars();
            let mut acc = FieldElement::ZERO;
            let mut point = vec![FieldElement::ZERO; v];
            for bits in 0..1u64 << v {
                for x in 0..v {
                    point[x] = fe((bits >> (v - 1 - x)) & 1);
                }
                acc += oracle.eval(&point);
            }
            assert_eq!(acc, sub[gate], "gate {gate}");
        }
    }

    #[test]
    fn layer_sum_recovers_sub_value_mle() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 4;
        let m = 2;
        let text: Vec<_> = (0..n).map(|_| FieldElement::random(&mut rng)).collect();
        let pattern: Vec<_> = (0..m).map(|_| FieldElement::random(&mut rng)).collect();
        let sub = subtraction_values(&text, &pattern);
        for _ in 0..10 {
            let z: Vec<_> = (0..3)
                .map(|_| FieldElement::random_nonzero(&mut rng))
                .collect();
            let mut oracle = PatternOracle::new(&text, &pattern, &z);
            let v = oracle.num_vars();
            let mut acc = FieldElement::ZERO;
            let mut point = vec![FieldElement::ZERO; v];
            for bits in 0..1u64 << v {
                for x in 0..v {
                    point[x] = fe((bits >> (v - 1 - x)) & 1);
                }
                acc += oracle.eval(&point);
            }
            assert_eq!(acc, eval_mle_table(&sub, &z));
        }
    }

    #[test]
    fn layer_prover_matches_naive() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for seed in 0..10u64 {
            let n = 4;
            let m = 2;
            let text: Vec<_> = (0..n).map(|_| FieldElement::random(&mut rng)).collect();
            let pattern: Vec<_> = (0..m).map(|_| FieldElement::random(&mut rng)).collect();
            let sub = subtraction_values(&text, &pattern);
            let z: Vec<_> = (0..3)
                .map(|_| FieldElement::random_nonzero(&mut rng))
                .collect();
            let claim = eval_mle_table(&sub, &z);
            let v = 2 * 2 + 1;
            let rs: Vec<_> = (0..v).map(|_| FieldElement::random(&mut rng)).collect();

            let mut fast = PatternLayerProver::new(&text, &pattern, &z, claim);
            let mut naive = NaiveProver::new(PatternOracle::new(&text, &pattern, &z));
            for (j, &r) in rs.iter().enumerate() {
                let mf = fast.round_message();
                let mn = naive.round_message();
                assert_eq!(mf, mn, "seed {seed} round {}", j + 1);
                fast.bind(r);
                naive.bind(r);
            }
            // bound text/pattern claims match direct evaluations
            let gpt = gamma_point(&fast.bound_i, &fast.bound_k, &fast.bound_c, fast.log_m);
            assert_eq!(fast.t_table.single(), mle_positional(&text, &gpt));
            assert_eq!(
                fast.p_table.single(),
                mle_positional(&pattern, &fast.bound_k)
            );
        }
    }

    #[test]
    fn layer_prover_matches_naive_larger() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 8;
        let m = 4;
        let text: Vec<_> = (0..n).map(|_| FieldElement::random(&mut rng)).collect();
        let pattern: Vec<_> = (0..m).map(|_| FieldElement::random(&mut rng)).collect();
        let sub = subtraction_values(&text, &pattern);
        let z: Vec<_> = (0..5)
            .map(|_| FieldElement::random_nonzero(&mut rng))
            .collect();
        let claim = eval_mle_table(&sub, &z);
        let v = 2 * 3 + 2;
        let rs: Vec<_> = (0..v).map(|_| FieldElement::random(&mut rng)).collect();
        let mut fast = PatternLayerProver::new(&text, &pattern, &z, claim);
        let mut naive = NaiveProver::new(PatternOracle::new(&text, &pattern, &z));
        for (j, &r) in rs.iter().enumerate() {
            let mf = fast.round_message();
            let mn = naive.round_message();
            assert_eq!(mf, mn, "round {}", j + 1);
            fast.bind(r);
            naive.bind(r);
        }
    }

    #[test]
    fn live_terms_fall_geometrically() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 16;
        let m = 4;
        let log_n = 4;
        let log_m = 2;
        let text: Vec<_> = (0..n).map(|_| FieldElement::random(&mut rng)).collect();
        let pattern: Vec<_> = (0..m).map(|_| FieldElement::random(&mut rng)).collect();
        let sub = subtraction_values(&text, &pattern);
        let z: Vec<_> = (0..log_n + log_m)
            .map(|_| FieldElement::random_nonzero(&mut rng))
            .collect();
        let claim = eval_mle_table(&sub, &z);
        let mut prover = PatternLayerProver::new(&text, &pattern, &z, claim);
        let vars = var_schedule(log_n, log_m);
        for (x, var) in vars.iter().enumerate() {
            let before = prover.counter.terms;
            prover.round_message();
            let live = prover.counter.terms - before;
            if let PmVar::C(j) = var {
                assert!(
                    live <= 4u64 << (log_n + log_m - j + 2),
                    "round {} live {live}",
                    x + 1
                );
            }
            prover.bind(FieldElement::random(&mut rng));
        }
    }

    #[test]
    fn pipeline_counts_occurrences() {
        // T = "abab" as integers, P = "ab": cyclic occurrences at 0 and 2
        let text = fes(&[10, 11, 10, 11]);
        let pattern = fes(&[10, 11]);
        assert_eq!(naive_count(&text, &pattern), 2);
        let (t, _) = prove_patternmatch(&text, &pattern, 3).unwrap();
        let out = verify_patternmatch(&text, &pattern, &t.to_bytes()).unwrap();
        assert_eq!(out.occurrences, 2);

        // absent pattern
        let text = fes(&[1, 2, 3, 4, 5, 6, 7, 8]);
        let pattern = fes(&[9, 9]);
        assert_eq!(naive_count(&text, &pattern), 0);
        let (t, _) = prove_patternmatch(&text, &pattern, 4).unwrap();
        let out = verify_patternmatch(&text, &pattern, &t.to_bytes()).unwrap();
        assert_eq!(out.occurrences, 0);

        // random instances against the cyclic scan
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for seed in 0..10u64 {
            let n = 8;
            let m = 2;
            let text: Vec<_> = (0..n).map(|_| fe(rng.gen_range(0..3))).collect();
            let pattern: Vec<_> = (0..m).map(|_| fe(rng.gen_range(0..3))).collect();
            let (t, _) = prove_patternmatch(&text, &pattern, seed).unwrap();
            let out = verify_patternmatch(&text, &pattern, &t.to_bytes()).unwrap();
            assert_eq!(out.occurrences, naive_count(&text, &pattern), "seed {seed}");
        }
    }

    #[test]
    fn unoptimized_route_produces_identical_transcripts() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for seed in 0..5u64 {
            let n = 8;
            let m = 2;
            let text: Vec<_> = (0..n).map(|_| fe(rng.gen_range(0..4))).collect();
            let pattern: Vec<_> = (0..m).map(|_| fe(rng.gen_range(0..4))).collect();
            let (fast, _) =
                prove_patternmatch_with(&text, &pattern, seed, LayerRoute::Fast).unwrap();
            let (slow, _) =
                prove_patternmatch_with(&text, &pattern, seed, LayerRoute::Unoptimized).unwrap();
            assert_eq!(fast.to_bytes(), slow.to_bytes(), "seed {seed}");
            verify_patternmatch(&text, &pattern, &slow.to_bytes()).unwrap();
        }
    }

    #[test]
    fn corrupted_count_rejects() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for seed in 0..20u64 {
            let n = 8;
            let m = 2;
            let text: Vec<_> = (0..n).map(|_| fe(rng.gen_range(0..3))).collect();
            let pattern: Vec<_> = (0..m).map(|_| fe(rng.gen_range(0..3))).collect();
            let (t, _) = prove_patternmatch(&text, &pattern, seed).unwrap();
            let mut bad = t.clone();
            bad.rounds[0].message[0] += fe(1);
            assert!(
                verify_patternmatch(&text, &pattern, &bad.to_bytes()).is_err(),
                "seed {seed}"
            );
        }
    }
}
