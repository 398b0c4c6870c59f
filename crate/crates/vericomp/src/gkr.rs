//! The circuit-evaluation protocol: one sum-check per layer with a prover
//! that runs in O(S_i + S_{i+1}) per layer, the reduce-to-one-point step,
//! multi-output opening, and a single-sum-check shortcut for binary
//! addition trees.
//!
//! Round accounting: the opening is one exchange, each sum-check round is
//! one exchange, and every segment ends with exactly one claims exchange
//! (the line restriction h, or the claimed in-neighbor values). Communication
//! counts prover-sent elements at 8 bytes each, excluding the opening
//! message, which is the answer itself.

use crate::circuit::{BitDep, GateKind, Layer, LayeredCircuit, RegularWiring, StreamUpdate, TypeDep};
use crate::counters::WorkCounter;
use crate::field::FieldElement;
use crate::mle::{beta_eval, eval_mle_stream, eval_mle_table, BetaTable, EvalTable};
use crate::sumcheck::{
    interpolate_at, prove_rounds, verify_rounds, PointOracle, RoundMessage, RoundProver,
};
use crate::transcript::{Draw, ProtocolId, ProveSession, Rejection, Transcript, VerifySession};

/// Cap on simultaneously pending claims (each dissimilar layer doubles them).
pub const MAX_PENDING_CLAIMS: usize = 256;

/// The canonical line through two points: l(0) = p0, l(1) = p1.
pub fn line_through(p0: &[FieldElement], p1: &[FieldElement], t: FieldElement) -> Vec<FieldElement> {
    p0.iter().zip(p1).map(|(&a, &b)| a + t * (b - a)).collect()
}

/// W^(i) at a field point: class indicators times the per-class gate
/// semantics, reading the layer-below MLE through `value_of(class, slot)`.
pub fn w_combine(
    wiring: &RegularWiring,
    point: &[FieldElement],
    mut value_of: impl FnMut(usize, usize) -> FieldElement,
) -> FieldElement {
    let mut acc = FieldElement::ZERO;
    for (c, class) in wiring.classes.iter().enumerate() {
        let ind = wiring.class_indicator(c, point);
        let v1 = value_of(c, 0);
        let body = if class.fan_in_one {
            v1
        } else {
            let v2 = value_of(c, 1);
            match class.gate_type {
                TypeDep::Const(GateKind::Add) => v1 + v2,
                TypeDep::Const(GateKind::Mul) => v1 * v2,
                TypeDep::Var { .. } => {
                    let ty = wiring.type_value(c, point);
                    ty * v1 * v2 + (FieldElement::ONE - ty) * (v1 + v2)
                }
            }
        };
        acc += ind * body;
    }
    acc
}

/// Brute-force point oracle for g_z(p) = beta(z, p) * W(p); the reference
/// route every fast layer prover is checked against. Also serves as the
/// general regular-layer polynomial for any descriptor, with the binary-tree
/// and Fermat-chain polynomials as special cases of the builders' wirings.
pub struct LayerOracle<'a> {
    wiring: &'a RegularWiring,
    z: Vec<FieldElement>,
    values_below: &'a [FieldElement],
    degrees: Vec<usize>,
}

impl<'a> LayerOracle<'a> {
    pub fn new(
        wiring: &'a RegularWiring,
        z: &[FieldElement],
        values_below: &'a [FieldElement],
    ) -> Self {
        assert_eq!(z.len(), wiring.in_vars);
        assert_eq!(values_below.len(), 1 << wiring.out_vars);
        LayerOracle {
            wiring,
            z: z.to_vec(),
            values_below,
            degrees: wiring.degrees(),
        }
    }
}

impl PointOracle for LayerOracle<'_> {
    fn num_vars(&self) -> usize {
        self.wiring.in_vars
    }

    fn degree(&self, var: usize) -> usize {
        self.degrees[var - 1]
    }

    fn eval(&mut self, point: &[FieldElement]) -> FieldElement {
        let w = w_combine(self.wiring, point, |c, s| {
            eval_mle_table(self.values_below, &self.wiring.in_point(c, s, point))
        });
        beta_eval(&self.z, point) * w
    }
}

// ---------------------------------------------------------------------------
// Fast layer prover
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct AxisDep {
    var: usize,     // gate-label bit feeding this axis (1-based)
    out_pos: usize, // in-neighbor label bit this axis stands for (1-based)
    negated: bool,
}

/// Axis layout of one in-neighbor table: constant bits are pre-selected and
/// the variable axes are sorted by the label bit driving them, so each round
/// folds a prefix of most-significant axes.
#[derive(Clone, Debug, PartialEq, Eq)]
struct SlotSpec {
    deps: Vec<AxisDep>,
    const_bits: usize,
    out_vars: usize,
}

impl SlotSpec {
    fn from_class(wiring: &RegularWiring, class: usize, slot: usize) -> Self {
        let c = &wiring.classes[class];
        let deps_src = if slot == 0 || c.fan_in_one {
            &c.in1
        } else {
            &c.in2
        };
        let out_vars = wiring.out_vars;
        let mut deps = Vec::new();
        let mut const_bits = 0usize;
        for (pos0, dep) in deps_src.iter().enumerate() {
            let out_pos = pos0 + 1;
            match *dep {
                BitDep::Const(b) => {
                    const_bits |= (b as usize) << (out_vars - out_pos);
                }
                BitDep::Var { bit, negated } => deps.push(AxisDep {
                    var: bit,
                    out_pos,
                    negated,
                }),
            }
        }
        deps.sort_by_key(|d| (d.var, d.out_pos));
        SlotSpec {
            deps,
            const_bits,
            out_vars,
        }
    }

    /// Table axes coincide with the raw layer-value layout.
    fn is_identity(&self) -> bool {
        self.const_bits == 0
            && self.deps.len() == self.out_vars
            && self.deps.iter().enumerate().all(|(m, d)| d.out_pos == m + 1)
    }

    /// Even/odd selections of the raw layout (the two in-neighbor tables of
    /// a binary-tree layer); gathered together in one sequential pass.
    fn is_low_bit_select(&self, other: &SlotSpec) -> bool {
        self.deps == other.deps
            && self.deps.len() + 1 == self.out_vars
            && self
                .deps
                .iter()
                .enumerate()
                .all(|(m, d)| d.out_pos == m + 1)
            && self.const_bits == 0
            && other.const_bits == 1
    }

    /// Gathers the table whose axes follow `deps` order.
    fn gather(&self, raw: &[FieldElement]) -> Vec<FieldElement> {
        let k = self.deps.len();
        let contiguous = k > 0
            && self
                .deps
                .iter()
                .enumerate()
                .all(|(m, d)| d.out_pos == self.deps[0].out_pos + m);
        let mut table = Vec::with_capacity(1 << k);
        if contiguous {
            let shift = self.out_vars - (self.deps[0].out_pos + k - 1);
            for x in 0..1usize << k {
                table.push(raw[self.const_bits | (x << shift)]);
            }
        } else {
            for x in 0..1usize << k {
                let mut label = self.const_bits;
                for (m, d) in self.deps.iter().enumerate() {
                    label |= ((x >> (k - 1 - m)) & 1) << (self.out_vars - d.out_pos);
                }
                table.push(raw[label]);
            }
        }
        table
    }
}

fn unique_slot_specs(wiring: &RegularWiring) -> (Vec<SlotSpec>, Vec<Vec<usize>>) {
    let mut specs: Vec<SlotSpec> = Vec::new();
    let mut map = Vec::with_capacity(wiring.classes.len());
    for (c, class) in wiring.classes.iter().enumerate() {
        let nslots = if class.fan_in_one { 1 } else { 2 };
        let mut ids = Vec::with_capacity(nslots);
        for s in 0..nslots {
            let spec = SlotSpec::from_class(wiring, c, s);
            let id = specs.iter().position(|p| *p == spec).unwrap_or_else(|| {
                specs.push(spec.clone());
                specs.len() - 1
            });
            ids.push(id);
        }
        map.push(ids);
    }
    (specs, map)
}

/// One run of evenly spaced suffix bits mapped onto table-index bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Extract {
    shift_right: u32,
    mask: usize,
    shift_left: u32,
}

enum SlotAccess {
    /// table[offset + idx]; covers inactive slots and boolean nodes.
    Direct(usize),
    /// Two-entry chi combination of the single active axis.
    SplitOne(FieldElement, FieldElement),
    /// General weighted combination over several active axes.
    Combo(Vec<(usize, FieldElement)>),
}

impl SlotAccess {
    fn mults(&self) -> u64 {
        match self {
            SlotAccess::Direct(_) => 0,
            SlotAccess::SplitOne(..) => 2,
            SlotAccess::Combo(parts) => parts.len() as u64,
        }
    }
}

struct SlotState {
    spec: SlotSpec,
    table: EvalTable,
    bound: usize,
    segments: Vec<Extract>,
    xor_mask: usize,
    active: usize,
}

impl SlotState {
    fn prepare_round(&mut self, j: usize, s_i: usize) {
        let rem = &self.spec.deps[self.bound..];
        self.active = rem.iter().take_while(|d| d.var == j).count();
        let after = &rem[self.active..];
        let r = after.len();
        self.segments.clear();
        self.xor_mask = 0;
        let mut m = 0;
        while m < r {
            let start = m;
            while m + 1 < r && after[m + 1].var == after[m].var + 1 {
                m += 1;
            }
            let len = m - start + 1;
            self.segments.push(Extract {
                shift_right: (s_i - after[m].var) as u32,
                mask: (1 << len) - 1,
                shift_left: (r - 1 - m) as u32,
            });
            m += 1;
        }
        for (mm, d) in after.iter().enumerate() {
            if d.negated {
                self.xor_mask |= 1 << (r - 1 - mm);
            }
        }
    }

    #[inline]
    fn index_for(&self, sfx: usize) -> usize {
        let mut idx = 0usize;
        for seg in &self.segments {
            idx |= ((sfx >> seg.shift_right) & seg.mask) << seg.shift_left;
        }
        idx ^ self.xor_mask
    }

    /// How this slot is read at one evaluation node: a plain table lookup
    /// (boolean node, no multiplications) or a chi-weighted combination of
    /// the active axes.
    fn access_plan(&self, t: u64) -> SlotAccess {
        let m = self.active;
        if m == 0 {
            return SlotAccess::Direct(0);
        }
        let rem_bits = self.spec.deps.len() - self.bound - m;
        let actives = &self.spec.deps[self.bound..self.bound + m];
        if t == 0 {
            // the bound values are boolean: one entry survives
            let mut offset = 0usize;
            for (a, d) in actives.iter().enumerate() {
                offset |= (d.negated as usize) << (m - 1 - a);
            }
            return SlotAccess::Direct(offset << rem_bits);
        }
        if m == 1 {
            let tf = FieldElement::new(t);
            let v = if actives[0].negated {
                FieldElement::ONE - tf
            } else {
                tf
            };
            return SlotAccess::SplitOne(FieldElement::ONE - v, v);
        }
        let mut combo = Vec::with_capacity(1 << m);
        for e in 0..1usize << m {
            let mut w = FieldElement::ONE;
            for (a, d) in actives.iter().enumerate() {
                let tf = FieldElement::new(t);
                let v = if d.negated { FieldElement::ONE - tf } else { tf };
                let bit = (e >> (m - 1 - a)) & 1;
                w = w * if bit == 0 { FieldElement::ONE - v } else { v };
            }
            combo.push(((e << rem_bits), w));
        }
        SlotAccess::Combo(combo)
    }

    #[inline]
    fn value_at(&self, idx: usize, access: &SlotAccess) -> FieldElement {
        match access {
            SlotAccess::Direct(offset) => self.table.get(offset + idx),
            SlotAccess::SplitOne(c0, c1) => self.table.split_eval(idx, *c0, *c1),
            SlotAccess::Combo(parts) => parts
                .iter()
                .fold(FieldElement::ZERO, |acc, &(off, w)| {
                    acc + w * self.table.get(off | idx)
                }),
        }
    }

    fn bind(&mut self, r: FieldElement, mults: &mut u64) {
        for _ in 0..self.active {
            let d = self.spec.deps[self.bound];
            let v = if d.negated { FieldElement::ONE - r } else { r };
            *mults += self.table.len() as u64;
            self.table.bind(v);
            self.bound += 1;
        }
        self.active = 0;
    }
}

/// The linear-time layer prover: beta values come from the shrinking C^(j)
/// array, layer-below MLE values from per-slot V^(j) arrays whose axes are
/// ordered by the label bit that drives them. Evaluates the round polynomial
/// at {0} and {2..deg}; the value at 1 is the running claim minus the value
/// at 0.
pub struct LayerProver<'a> {
    wiring: &'a RegularWiring,
    beta: BetaTable,
    slots: Vec<SlotState>,
    slot_of: Vec<Vec<usize>>,
    degrees: Vec<usize>,
    round: usize,
    running: FieldElement,
    last: Option<RoundMessage>,
    bound_rs: Vec<FieldElement>,
    pub counter: WorkCounter,
}

impl<'a> LayerProver<'a> {
    /// Takes ownership of the layer-below value array; the identity-layout
    /// slot reuses the buffer without copying (the V^(0) array is consumed
    /// destructively).
    pub fn new(
        wiring: &'a RegularWiring,
        z: &[FieldElement],
        values_below: Vec<FieldElement>,
        claim: FieldElement,
    ) -> Self {
        assert_eq!(values_below.len(), 1 << wiring.out_vars);
        assert_eq!(z.len(), wiring.in_vars);
        let mut counter = WorkCounter::new();
        let beta = BetaTable::new(z);
        counter.mults += 2u64 << wiring.in_vars;

        let (specs, slot_of) = unique_slot_specs(wiring);
        let mut tables: Vec<Option<Vec<FieldElement>>> = (0..specs.len()).map(|_| None).collect();
        let mut identity = None;
        if specs.len() == 2 && specs[0].is_low_bit_select(&specs[1]) {
            // binary-tree layer: fill both selections in one pass
            let half = values_below.len() / 2;
            let mut even = Vec::with_capacity(half);
            let mut odd = Vec::with_capacity(half);
            for pair in values_below.chunks_exact(2) {
                even.push(pair[0]);
                odd.push(pair[1]);
            }
            counter.allocated += values_below.len() as u64;
            tables[0] = Some(even);
            tables[1] = Some(odd);
        } else {
            for (i, spec) in specs.iter().enumerate() {
                if spec.is_identity() && identity.is_none() {
                    identity = Some(i);
                } else {
                    let t = spec.gather(&values_below);
                    counter.allocated += t.len() as u64;
                    tables[i] = Some(t);
                }
            }
        }
        if let Some(i) = identity {
            tables[i] = Some(values_below);
        }
        let slots = specs
            .into_iter()
            .zip(tables)
            .map(|(spec, table)| SlotState {
                spec,
                table: EvalTable::from_values(table.unwrap()),
                bound: 0,
                segments: Vec::new(),
                xor_mask: 0,
                active: 0,
            })
            .collect();

        LayerProver {
            degrees: wiring.degrees(),
            wiring,
            beta,
            slots,
            slot_of,
            round: 1,
            running: claim,
            last: None,
            bound_rs: Vec::new(),
            counter,
        }
    }

    /// Fully bound in-neighbor MLE values, one per distinct slot layout.
    pub fn bound_slot_values(&self) -> Vec<FieldElement> {
        self.slots.iter().map(|s| s.table.single()).collect()
    }
}

impl RoundProver for LayerProver<'_> {
    fn num_vars(&self) -> usize {
        self.wiring.in_vars
    }

    fn degree(&self, round: usize) -> usize {
        self.degrees[round - 1]
    }

    fn round_message(&mut self) -> RoundMessage {
        let j = self.round;
        let s_i = self.wiring.in_vars;
        let tail = s_i - j;
        let deg = self.degrees[j - 1];
        for slot in &mut self.slots {
            slot.prepare_round(j, s_i);
        }

        let ts: Vec<u64> = std::iter::once(0).chain(2..=deg as u64).collect();
        let beta_coeff: Vec<FieldElement> = ts
            .iter()
            .map(|&t| self.beta.round_coeff(FieldElement::new(t)))
            .collect();
        // per (node, slot) access plans; boolean nodes become plain reads
        let plans: Vec<Vec<SlotAccess>> = ts
            .iter()
            .map(|&t| self.slots.iter().map(|s| s.access_plan(t)).collect())
            .collect();
        // slots often share the suffix-extraction layout; compute each
        // distinct extraction once per point
        let mut extract_group = vec![0usize; self.slots.len()];
        let mut representatives: Vec<usize> = Vec::new();
        for (si, slot) in self.slots.iter().enumerate() {
            let gid = representatives
                .iter()
                .position(|&r| {
                    self.slots[r].segments == slot.segments
                        && self.slots[r].xor_mask == slot.xor_mask
                })
                .unwrap_or_else(|| {
                    representatives.push(si);
                    representatives.len() - 1
                });
            extract_group[si] = gid;
        }

        // class bookkeeping: bound special bits give a scalar, the current
        // one a per-node factor, unbound ones a suffix filter
        let nclasses = self.wiring.classes.len();
        let sbits = &self.wiring.special_bits;
        let trivial_classes = sbits.is_empty()
            && nclasses == 1
            && matches!(self.wiring.classes[0].gate_type, TypeDep::Const(_));
        let mut cls_mask = vec![0usize; nclasses];
        let mut cls_want = vec![0usize; nclasses];
        let mut cls_scalar = vec![FieldElement::ONE; nclasses];
        let mut cls_tfactor = vec![vec![FieldElement::ONE; ts.len()]; nclasses];
        for c in 0..nclasses {
            for (i, &bit) in sbits.iter().enumerate() {
                let want = ((c >> (sbits.len() - 1 - i)) & 1) as u64;
                if bit < j {
                    cls_scalar[c] = cls_scalar[c] * crate::mle::chi(want, self.bound_rs[bit - 1]);
                } else if bit == j {
                    for (ti, &t) in ts.iter().enumerate() {
                        cls_tfactor[c][ti] =
                            cls_tfactor[c][ti] * crate::mle::chi(want, FieldElement::new(t));
                    }
                } else {
                    let pos = s_i - bit;
                    cls_mask[c] |= 1 << pos;
                    cls_want[c] |= ((want as usize) & 1) << pos;
                }
            }
        }

        let mut evals = vec![FieldElement::ZERO; ts.len()];
        let mut group_idx = vec![0usize; representatives.len()];
        let mut slot_vals = vec![FieldElement::ZERO; self.slots.len()];
        for sfx in 0..1usize << tail {
            for (g, &rep) in representatives.iter().enumerate() {
                group_idx[g] = self.slots[rep].index_for(sfx);
            }
            let beta_entry = self.beta.entry_for(sfx);
            for ti in 0..ts.len() {
                for (si, slot) in self.slots.iter().enumerate() {
                    slot_vals[si] = slot.value_at(group_idx[extract_group[si]], &plans[ti][si]);
                }
                let w = if trivial_classes {
                    let class = &self.wiring.classes[0];
                    let v1 = slot_vals[self.slot_of[0][0]];
                    if class.fan_in_one {
                        v1
                    } else {
                        let v2 = slot_vals[self.slot_of[0][1]];
                        match class.gate_type {
                            TypeDep::Const(GateKind::Add) => v1 + v2,
                            TypeDep::Const(GateKind::Mul) => v1 * v2,
                            TypeDep::Var { .. } => unreachable!(),
                        }
                    }
                } else {
                    let mut w = FieldElement::ZERO;
                    for (c, class) in self.wiring.classes.iter().enumerate() {
                        if sfx & cls_mask[c] != cls_want[c] {
                            continue;
                        }
                        let v1 = slot_vals[self.slot_of[c][0]];
                        let body = if class.fan_in_one {
                            v1
                        } else {
                            let v2 = slot_vals[self.slot_of[c][1]];
                            match class.gate_type {
                                TypeDep::Const(GateKind::Add) => v1 + v2,
                                TypeDep::Const(GateKind::Mul) => v1 * v2,
                                TypeDep::Var { bit, negated } => {
                                    let ty = if bit < j {
                                        let x = self.bound_rs[bit - 1];
                                        if negated {
                                            FieldElement::ONE - x
                                        } else {
                                            x
                                        }
                                    } else if bit == j {
                                        let x = FieldElement::new(ts[ti]);
                                        if negated {
                                            FieldElement::ONE - x
                                        } else {
                                            x
                                        }
                                    } else {
                                        let b = ((sfx >> (s_i - bit)) & 1) as u64;
                                        FieldElement::new(b ^ negated as u64)
                                    };
                                    ty * v1 * v2 + (FieldElement::ONE - ty) * (v1 + v2)
                                }
                            }
                        };
                        w += cls_scalar[c] * cls_tfactor[c][ti] * body;
                    }
                    w
                };
                evals[ti] += beta_entry * w;
            }
        }
        for (ti, e) in evals.iter_mut().enumerate() {
            *e = *e * beta_coeff[ti];
        }
        let per_point: u64 = plans
            .iter()
            .map(|node| 2 + node.iter().map(SlotAccess::mults).sum::<u64>())
            .sum::<u64>()
            / ts.len() as u64;
        self.counter.terms += (ts.len() as u64) << tail;
        self.counter.mults += per_point * ((ts.len() as u64) << tail);

        let mut full = Vec::with_capacity(deg + 1);
        full.push(evals[0]);
        full.push(self.running - evals[0]);
        full.extend_from_slice(&evals[1..]);
        let msg = RoundMessage { evals: full };
        self.last = Some(msg.clone());
        msg
    }

    fn bind(&mut self, r: FieldElement) {
        self.counter.mults += 1u64 << (self.wiring.in_vars - self.round);
        self.beta.bind(r);
        for slot in &mut self.slots {
            slot.bind(r, &mut self.counter.mults);
        }
        self.running = interpolate_at(&self.last.as_ref().unwrap().evals, r);
        self.bound_rs.push(r);
        self.round += 1;
    }
}

// ---------------------------------------------------------------------------
// Addition-tree shortcut
// ---------------------------------------------------------------------------

/// Point oracle for the addition-tree polynomial g_z(p) = V_leaf~(z, p).
pub struct TreeOracle<'a> {
    pub leaves: &'a [FieldElement],
    pub z: Vec<FieldElement>,
    pub depth: usize,
}

impl PointOracle for TreeOracle<'_> {
    fn num_vars(&self) -> usize {
        self.depth
    }
    fn degree(&self, _var: usize) -> usize {
        1
    }
    fn eval(&mut self, point: &[FieldElement]) -> FieldElement {
        let mut full = self.z.clone();
        full.extend_from_slice(point);
        eval_mle_table(self.leaves, &full)
    }
}

/// Multilinear prover for a binary addition-tree section: one d-round
/// sum-check over the leaf MLE restricted to the output point z.
pub struct TreeProver {
    table: EvalTable,
    depth: usize,
    running: FieldElement,
    last: Option<RoundMessage>,
    pub counter: WorkCounter,
}

impl TreeProver {
    pub fn new(
        leaves: Vec<FieldElement>,
        z: &[FieldElement],
        depth: usize,
        claim: FieldElement,
    ) -> Self {
        assert_eq!(leaves.len(), 1 << (z.len() + depth));
        let mut counter = WorkCounter::new();
        let mut table = EvalTable::from_values(leaves);
        for &c in z {
            counter.mults += table.len() as u64;
            table.bind(c);
        }
        TreeProver {
            table,
            depth,
            running: claim,
            last: None,
            counter,
        }
    }

    pub fn bound_value(&self) -> FieldElement {
        self.table.single()
    }
}

impl RoundProver for TreeProver {
    fn num_vars(&self) -> usize {
        self.depth
    }

    fn degree(&self, _round: usize) -> usize {
        1
    }

    fn round_message(&mut self) -> RoundMessage {
        let half = self.table.len() / 2;
        let mut at_zero = FieldElement::ZERO;
        for i in 0..half {
            at_zero += self.table.get(i);
        }
        self.counter.terms += half as u64;
        let msg = RoundMessage {
            evals: vec![at_zero, self.running - at_zero],
        };
        self.last = Some(msg.clone());
        msg
    }

    fn bind(&mut self, r: FieldElement) {
        self.counter.mults += self.table.len() as u64;
        self.table.bind(r);
        self.running = interpolate_at(&self.last.as_ref().unwrap().evals, r);
    }
}

// ---------------------------------------------------------------------------
// Segments and the protocol driver
// ---------------------------------------------------------------------------

/// A pending claim: the layer-value MLE at `point` equals `value`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim {
    pub point: Vec<FieldElement>,
    pub value: FieldElement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    /// Standard sum-check over one circuit layer.
    Layer(usize),
    /// Addition-tree shortcut spanning layers top..top+depth-1.
    AdditionTree { top: usize, depth: usize },
}

impl Segment {
    /// Index of the layer whose values feed this segment (== circuit depth
    /// for the input vector).
    fn below(self) -> usize {
        match self {
            Segment::Layer(i) => i + 1,
            Segment::AdditionTree { top, depth } => top + depth,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GkrPlan {
    pub segments: Vec<Segment>,
}

/// Structural test for the canonical tree layer: gate p reads (p,0), (p,1).
pub fn is_binary_add_layer(layer: &Layer) -> bool {
    let Some(w) = layer.regular() else {
        return false;
    };
    if w.classes.len() != 1 || w.out_vars != w.in_vars + 1 {
        return false;
    }
    let c = &w.classes[0];
    if c.fan_in_one || c.gate_type != TypeDep::Const(GateKind::Add) {
        return false;
    }
    let id_ok = |deps: &[BitDep], last: bool| {
        deps.len() == w.out_vars
            && deps[..w.in_vars]
                .iter()
                .enumerate()
                .all(|(m, d)| *d == BitDep::var(m + 1))
            && deps[w.in_vars] == BitDep::Const(last)
    };
    id_ok(&c.in1, false) && id_ok(&c.in2, true)
}

impl GkrPlan {
    pub fn per_layer(circuit: &LayeredCircuit) -> Self {
        GkrPlan {
            segments: (0..circuit.depth()).map(Segment::Layer).collect(),
        }
    }

    /// Collapses maximal runs of binary addition-tree layers into single
    /// sum-check segments.
    pub fn with_tree_shortcuts(circuit: &LayeredCircuit) -> Self {
        let mut segments = Vec::new();
        let mut i = 0;
        while i < circuit.depth() {
            let mut depth = 0;
            while i + depth < circuit.depth() && is_binary_add_layer(&circuit.layers[i + depth]) {
                depth += 1;
            }
            if depth >= 1 {
                segments.push(Segment::AdditionTree { top: i, depth });
                i += depth;
            } else {
                segments.push(Segment::Layer(i));
                i += 1;
            }
        }
        GkrPlan { segments }
    }
}

/// How the verifier evaluates the input MLE for the final check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputCheck {
    /// One incremental pass per point, O(log n) state.
    Streaming,
    /// Memoized chi-table method: O(n) time and space per point.
    Table,
}

/// The verifier's view of the input.
#[derive(Clone, Copy, Debug)]
pub enum VerifierInput<'a> {
    Dense(&'a [FieldElement]),
    Stream {
        updates: &'a [StreamUpdate],
        log_n: usize,
    },
}

impl VerifierInput<'_> {
    pub fn log_size(&self) -> usize {
        match self {
            VerifierInput::Dense(v) => v.len().trailing_zeros() as usize,
            VerifierInput::Stream { log_n, .. } => *log_n,
        }
    }

    pub fn mle_at(&self, point: &[FieldElement], mode: InputCheck) -> FieldElement {
        match (self, mode) {
            (VerifierInput::Dense(values), InputCheck::Table) => eval_mle_table(values, point),
            (VerifierInput::Dense(values), InputCheck::Streaming) => {
                let v = point.len();
                let mut acc = FieldElement::ZERO;
                for (i, &a) in values.iter().enumerate() {
                    if a.is_zero() {
                        continue;
                    }
                    let mut w = a;
                    for (k, &pk) in point.iter().enumerate() {
                        w = w * crate::mle::chi(((i >> (v - 1 - k)) & 1) as u64, pk);
                    }
                    acc += w;
                }
                acc
            }
            (VerifierInput::Stream { updates, .. }, _) => {
                eval_mle_stream(updates, point).expect("stream index out of range")
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GkrOptions {
    pub input_check: InputCheck,
}

impl Default for GkrOptions {
    fn default() -> Self {
        GkrOptions {
            input_check: InputCheck::Streaming,
        }
    }
}

/// Distinct in-neighbor points of a layer at the bound vector r, one per
/// unique slot layout, in (class, slot) first-occurrence order.
fn claim_points(wiring: &RegularWiring, r: &[FieldElement]) -> Vec<Vec<FieldElement>> {
    let mut specs: Vec<SlotSpec> = Vec::new();
    let mut pts = Vec::new();
    for (c, class) in wiring.classes.iter().enumerate() {
        let nslots = if class.fan_in_one { 1 } else { 2 };
        for s in 0..nslots {
            let spec = SlotSpec::from_class(wiring, c, s);
            if !specs.contains(&spec) {
                specs.push(spec);
                pts.push(wiring.in_point(c, s, r));
            }
        }
    }
    pts
}

/// Degree of the line restriction h for a similar layer.
fn line_degree(wiring: &RegularWiring) -> usize {
    wiring.similar.as_ref().map(|t| t.len().max(1)).unwrap_or(0)
}

pub(crate) fn prove_layer_segment(
    wiring: &RegularWiring,
    claim: &Claim,
    values_below: Vec<FieldElement>,
    session: &mut ProveSession,
    counter: &mut WorkCounter,
) -> Vec<Claim> {
    let retain_for_h = wiring.similar.as_ref().map_or(false, |t| t.len() >= 2);
    let retained = retain_for_h.then(|| values_below.clone());

    let mut prover = LayerProver::new(wiring, &claim.point, values_below, claim.value);
    let r = if wiring.in_vars == 0 {
        Vec::new()
    } else {
        prove_rounds(&mut prover, session).point
    };
    let pts = claim_points(wiring, &r);
    let values = prover.bound_slot_values();
    counter.mults += prover.counter.mults;
    counter.terms += prover.counter.terms;
    counter.allocated += prover.counter.allocated;

    if pts.len() == 1 {
        session.send(vec![values[0]]);
        session.respond(Draw::Uniform, 0);
        return vec![Claim {
            point: pts.into_iter().next().unwrap(),
            value: values[0],
        }];
    }
    if pts.len() == 2 && wiring.similar.is_some() {
        let deg_h = line_degree(wiring);
        let mut h = vec![values[0], values[1]];
        if deg_h >= 2 {
            let vals = retained.as_ref().expect("values retained for high-degree h");
            for t in 2..=deg_h as u64 {
                let pt = line_through(&pts[0], &pts[1], FieldElement::new(t));
                h.push(eval_mle_table(vals, &pt));
            }
        }
        session.send(h.clone());
        let r_star = session.respond(Draw::Uniform, 1)[0];
        return vec![Claim {
            point: line_through(&pts[0], &pts[1], r_star),
            value: interpolate_at(&h, r_star),
        }];
    }
    // dissimilar: skip the reduction and carry every point
    session.send(values.clone());
    session.respond(Draw::Uniform, 0);
    pts.into_iter()
        .zip(values)
        .map(|(point, value)| Claim { point, value })
        .collect()
}

pub(crate) fn verify_layer_segment(
    wiring: &RegularWiring,
    claim: &Claim,
    session: &mut VerifySession<'_>,
    rounds_done: usize,
) -> Result<Vec<Claim>, Rejection> {
    let degrees = wiring.degrees();
    let out = verify_rounds(claim.value, &degrees, session, rounds_done)?;
    let r = &out.point;
    let pts = claim_points(wiring, r);
    let (_, slot_map) = unique_slot_specs(wiring);

    let finish = |msg: &[FieldElement], running: FieldElement| -> Result<(), Rejection> {
        let w = w_combine(wiring, r, |c, s| msg[slot_map[c][s]]);
        if beta_eval(&claim.point, r) * w != running {
            return Err(Rejection::FinalCheck);
        }
        Ok(())
    };

    if pts.len() == 1 {
        let msg = session.recv(1)?;
        session.respond(Draw::Uniform, 0)?;
        finish(&msg, out.claim)?;
        return Ok(vec![Claim {
            point: pts.into_iter().next().unwrap(),
            value: msg[0],
        }]);
    }
    if pts.len() == 2 && wiring.similar.is_some() {
        let deg_h = line_degree(wiring);
        let h = session.recv(deg_h + 1)?;
        finish(&h[..2], out.claim)?;
        let r_star = session.respond(Draw::Uniform, 1)?[0];
        return Ok(vec![Claim {
            point: line_through(&pts[0], &pts[1], r_star),
            value: interpolate_at(&h, r_star),
        }]);
    }
    let msg = session.recv(pts.len())?;
    session.respond(Draw::Uniform, 0)?;
    finish(&msg, out.claim)?;
    Ok(pts
        .into_iter()
        .zip(msg)
        .map(|(point, value)| Claim { point, value })
        .collect())
}

pub(crate) fn prove_tree_segment(
    depth: usize,
    claim: &Claim,
    leaves: Vec<FieldElement>,
    session: &mut ProveSession,
    counter: &mut WorkCounter,
) -> Vec<Claim> {
    let mut prover = TreeProver::new(leaves, &claim.point, depth, claim.value);
    let bound = if depth == 0 {
        Vec::new()
    } else {
        prove_rounds(&mut prover, session).point
    };
    counter.mults += prover.counter.mults;
    counter.terms += prover.counter.terms;
    let value = prover.bound_value();
    session.send(vec![value]);
    session.respond(Draw::Uniform, 0);
    let mut point = claim.point.clone();
    point.extend_from_slice(&bound);
    vec![Claim { point, value }]
}

pub(crate) fn verify_tree_segment(
    depth: usize,
    claim: &Claim,
    session: &mut VerifySession<'_>,
    rounds_done: usize,
) -> Result<Vec<Claim>, Rejection> {
    let degrees = vec![1usize; depth];
    let out = verify_rounds(claim.value, &degrees, session, rounds_done)?;
    let msg = session.recv(1)?;
    session.respond(Draw::Uniform, 0)?;
    if msg[0] != out.claim {
        return Err(Rejection::FinalCheck);
    }
    let mut point = claim.point.clone();
    point.extend_from_slice(&out.point);
    Ok(vec![Claim {
        point,
        value: msg[0],
    }])
}

/// What a finished run reports; rounds and bytes come from the transcript.
#[derive(Clone, Debug)]
pub struct GkrOutput {
    pub outputs: Vec<FieldElement>,
    pub rounds: usize,
    pub comm_bytes: usize,
    pub total_vars: usize,
}

/// Honest prover over pre-evaluated layer values; `values` must carry the
/// input vector as its final entry (see `prove_circuit_with_input`). The
/// opening sends `claimed_outputs` while subsequent messages prove the true
/// evaluation, so passing corrupted outputs exercises the soundness path.
pub fn prove_circuit_prepared(
    circuit: &LayeredCircuit,
    mut values: Vec<Vec<FieldElement>>,
    claimed_outputs: &[FieldElement],
    plan: &GkrPlan,
    protocol: ProtocolId,
    seed: u64,
) -> (Transcript, WorkCounter) {
    assert_eq!(values.len(), circuit.depth() + 1);
    assert_eq!(values[circuit.depth()].len(), circuit.input_size());
    assert_eq!(claimed_outputs.len(), circuit.output_size());
    let mut counter = WorkCounter::new();
    let mut session = ProveSession::new(protocol, seed);
    let s_out = circuit.layers[0].log_size;

    session.begin_section(0);
    session.send(claimed_outputs.to_vec());
    let z = session.respond(Draw::Nonzero, s_out);
    let claim = eval_mle_table(&values[0], &z);
    let mut pending = vec![Claim {
        point: z,
        value: claim,
    }];
    let mut total_vars = 0usize;

    for &seg in &plan.segments {
        let below_idx = seg.below();
        let mut next = Vec::new();
        let count = pending.len();
        for (ci, claim) in pending.iter().enumerate() {
            let below = if ci + 1 == count {
                std::mem::take(&mut values[below_idx])
            } else {
                values[below_idx].clone()
            };
            match seg {
                Segment::Layer(i) => {
                    let wiring = circuit.layers[i]
                        .regular()
                        .expect("every proved layer needs a regular descriptor");
                    session.begin_section((i + 1) as u16);
                    total_vars += wiring.in_vars;
                    next.extend(prove_layer_segment(
                        wiring,
                        claim,
                        below,
                        &mut session,
                        &mut counter,
                    ));
                }
                Segment::AdditionTree { top, depth } => {
                    session.begin_section((top + 1) as u16);
                    total_vars += depth;
                    next.extend(prove_tree_segment(depth, claim, below, &mut session, &mut counter));
                }
            }
        }
        assert!(next.len() <= MAX_PENDING_CLAIMS, "pending claim cap exceeded");
        pending = next;
    }
    (session.into_transcript(total_vars as u16), counter)
}

/// Evaluates the circuit and proves the run in one call.
pub fn prove_circuit_with_input(
    circuit: &LayeredCircuit,
    input: &[FieldElement],
    claimed_outputs: &[FieldElement],
    plan: &GkrPlan,
    protocol: ProtocolId,
    seed: u64,
) -> Result<(Transcript, WorkCounter), crate::circuit::CircuitError> {
    let mut values = circuit.evaluate(input)?;
    values.push(input.to_vec());
    Ok(prove_circuit_prepared(
        circuit,
        values,
        claimed_outputs,
        plan,
        protocol,
        seed,
    ))
}

/// Verifies a stored transcript against the circuit and the input.
pub fn verify_circuit_transcript(
    circuit: &LayeredCircuit,
    input: VerifierInput<'_>,
    plan: &GkrPlan,
    protocol: ProtocolId,
    bytes: &[u8],
    opts: GkrOptions,
) -> Result<GkrOutput, Rejection> {
    let mut session = VerifySession::open(bytes, protocol)?;
    let s_out = circuit.layers[0].log_size;

    session.begin_section(0)?;
    let outputs = session.recv(circuit.output_size())?;
    let z = session.respond(Draw::Nonzero, s_out)?;
    let claim = eval_mle_table(&outputs, &z);
    let mut pending = vec![Claim {
        point: z,
        value: claim,
    }];
    let mut rounds_done = 0usize;
    let mut total_vars = 0usize;

    for &seg in &plan.segments {
        let mut next = Vec::new();
        for claim in &pending {
            match seg {
                Segment::Layer(i) => {
                    let wiring = circuit.layers[i]
                        .regular()
                        .ok_or_else(|| Rejection::Malformed("layer lacks a descriptor".into()))?;
                    session.begin_section((i + 1) as u16)?;
                    total_vars += wiring.in_vars;
                    rounds_done += wiring.in_vars;
                    next.extend(verify_layer_segment(wiring, claim, &mut session, rounds_done)?);
                }
                Segment::AdditionTree { top, depth } => {
                    session.begin_section((top + 1) as u16)?;
                    total_vars += depth;
                    rounds_done += depth;
                    next.extend(verify_tree_segment(depth, claim, &mut session, rounds_done)?);
                }
            }
            if next.len() > MAX_PENDING_CLAIMS {
                return Err(Rejection::Malformed("pending claim cap exceeded".into()));
            }
        }
        pending = next;
    }

    if session.total_vars as usize != total_vars {
        return Err(Rejection::Malformed(
            "header round count disagrees with the plan".into(),
        ));
    }
    let (rounds, comm_bytes) = session.finish()?;

    for claim in &pending {
        if input.mle_at(&claim.point, opts.input_check) != claim.value {
            return Err(Rejection::InputCheck);
        }
    }
    Ok(GkrOutput {
        outputs,
        rounds,
        comm_bytes,
        total_vars,
    })
}

/// End-to-end honest run: evaluate, prove, then verify the transcript.
pub fn verify_circuit(
    circuit: &LayeredCircuit,
    input: &[FieldElement],
    claimed_outputs: &[FieldElement],
    plan: &GkrPlan,
    protocol: ProtocolId,
    seed: u64,
    opts: GkrOptions,
) -> Result<(GkrOutput, Transcript), Rejection> {
    let (transcript, _) =
        prove_circuit_with_input(circuit, input, claimed_outputs, plan, protocol, seed)
            .map_err(|e| Rejection::Malformed(e.to_string()))?;
    let out = verify_circuit_transcript(
        circuit,
        VerifierInput::Dense(input),
        plan,
        protocol,
        &transcript.to_bytes(),
        opts,
    )?;
    Ok((out, transcript))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{
        build_binary_tree, build_distinct_circuit, build_matmult_circuit, matmult_input,
        WiringClass,
    };
    use crate::sumcheck::NaiveProver;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn fe(v: u64) -> FieldElement {
        FieldElement::new(v)
    }

    fn random_values(n: usize, rng: &mut ChaCha12Rng) -> Vec<FieldElement> {
        (0..n).map(|_| FieldElement::random(rng)).collect()
    }

    fn drive(prover: &mut dyn RoundProver, rs: &[FieldElement]) -> Vec<RoundMessage> {
        let mut msgs = Vec::new();
        for &r in rs {
            msgs.push(prover.round_message());
            prover.bind(r);
        }
        msgs
    }

    /// True claim via the brute-force sum of g_z over the cube.
    fn layer_claim(
        wiring: &RegularWiring,
        z: &[FieldElement],
        below: &[FieldElement],
    ) -> FieldElement {
        let mut oracle = LayerOracle::new(wiring, z, below);
        let s = wiring.in_vars;
        let mut acc = FieldElement::ZERO;
        let mut point = vec![FieldElement::ZERO; s];
        for b in 0..1u64 << s {
            for k in 0..s {
                point[k] = fe((b >> (s - 1 - k)) & 1);
            }
            acc += oracle.eval(&point);
        }
        acc
    }

    /// Linear-time claim: evaluate the layer and take its value MLE at z.
    fn layer_claim_fast(
        wiring: &RegularWiring,
        z: &[FieldElement],
        below: &[FieldElement],
    ) -> FieldElement {
        let mut vals = Vec::with_capacity(1 << wiring.in_vars);
        for p in 0..1usize << wiring.in_vars {
            let g = wiring.gate_at(p);
            let v = if g.fan_in_one {
                below[g.in1]
            } else {
                match g.kind {
                    GateKind::Add => below[g.in1] + below[g.in2],
                    GateKind::Mul => below[g.in1] * below[g.in2],
                }
            };
            vals.push(v);
        }
        eval_mle_table(&vals, z)
    }

    fn check_layer_equivalence(wiring: &RegularWiring, seed: u64) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let below = random_values(1 << wiring.out_vars, &mut rng);
        let z: Vec<_> = (0..wiring.in_vars)
            .map(|_| FieldElement::random_nonzero(&mut rng))
            .collect();
        let claim = layer_claim(wiring, &z, &below);
        let rs: Vec<_> = (0..wiring.in_vars)
            .map(|_| FieldElement::random(&mut rng))
            .collect();

        let mut fast = LayerProver::new(wiring, &z, below.clone(), claim);
        let fast_msgs = drive(&mut fast, &rs);
        let mut naive = NaiveProver::new(LayerOracle::new(wiring, &z, &below));
        let naive_msgs = drive(&mut naive, &rs);
        assert_eq!(fast_msgs, naive_msgs, "fast/naive message mismatch");

        let pts = claim_points(wiring, &rs);
        for (pt, v) in pts.iter().zip(fast.bound_slot_values()) {
            assert_eq!(v, eval_mle_table(&below, pt));
        }
    }

    #[test]
    fn layer_prover_matches_naive_on_every_builder_layer() {
        let mut seed = 100;
        for n in [4usize, 8, 16, 32] {
            for op in [GateKind::Add, GateKind::Mul] {
                let c = build_binary_tree(n, op).unwrap();
                for layer in &c.layers {
                    check_layer_equivalence(layer.regular().unwrap(), seed);
                    seed += 1;
                }
            }
        }
        let d = build_distinct_circuit(4).unwrap();
        for layer in &d.layers {
            check_layer_equivalence(layer.regular().unwrap(), seed);
            seed += 1;
        }
        let m = build_matmult_circuit(4).unwrap();
        for layer in &m.layers {
            check_layer_equivalence(layer.regular().unwrap(), seed);
            seed += 1;
        }
    }

    #[test]
    fn layer_prover_handles_negated_and_typed_wiring() {
        let class = WiringClass {
            fan_in_one: false,
            gate_type: TypeDep::Var {
                bit: 1,
                negated: false,
            },
            in1: vec![
                BitDep::Var {
                    bit: 2,
                    negated: true,
                },
                BitDep::var(3),
                BitDep::Const(true),
            ],
            in2: vec![
                BitDep::var(3),
                BitDep::Var {
                    bit: 2,
                    negated: true,
                },
                BitDep::Const(false),
            ],
        };
        let wiring = RegularWiring::uniform(3, 3, class, None);
        wiring.validate().unwrap();
        for seed in 0..10 {
            check_layer_equivalence(&wiring, 400 + seed);
        }
    }

    #[test]
    fn layer_prover_work_is_linear() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for log_n in [6usize, 8, 10] {
            let n = 1 << log_n;
            let c = build_distinct_circuit(n).unwrap();
            let layer = &c.layers[log_n + 1]; // an FLT product layer
            let wiring = layer.regular().unwrap();
            let below = random_values(1 << wiring.out_vars, &mut rng);
            let z: Vec<_> = (0..wiring.in_vars)
                .map(|_| FieldElement::random_nonzero(&mut rng))
                .collect();
            let claim = layer_claim_fast(wiring, &z, &below);
            let mut fast = LayerProver::new(wiring, &z, below, claim);
            let rs: Vec<_> = (0..wiring.in_vars)
                .map(|_| FieldElement::random(&mut rng))
                .collect();
            drive(&mut fast, &rs);
            let s_i = 1u64 << wiring.in_vars;
            let s_next = 1u64 << wiring.out_vars;
            assert!(
                fast.counter.mults <= 16 * (s_i + s_next),
                "log_n={log_n}: {} mults for S_i + S_next = {}",
                fast.counter.mults,
                s_i + s_next
            );
        }
    }

    fn thread_cpu_seconds() -> f64 {
        let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
        unsafe {
            libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts);
        }
        ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
    }

    #[test]
    fn layer_prover_time_doubles_with_layer_size() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut times = Vec::new();
        for log_n in [16usize, 17] {
            let layer = crate::circuit::build_distinct_circuit(1 << log_n).unwrap().layers
                [log_n + 1]
                .clone();
            let wiring = layer.regular().unwrap();
            let below = random_values(1 << wiring.out_vars, &mut rng);
            let z: Vec<_> = (0..wiring.in_vars)
                .map(|_| FieldElement::random_nonzero(&mut rng))
                .collect();
            let claim = layer_claim_fast(wiring, &z, &below);
            let rs: Vec<_> = (0..wiring.in_vars)
                .map(|_| FieldElement::random(&mut rng))
                .collect();
            let mut best = f64::MAX;
            for _ in 0..4 {
                let t0 = thread_cpu_seconds();
                let mut fast = LayerProver::new(wiring, &z, below.clone(), claim);
                drive(&mut fast, &rs);
                best = best.min(thread_cpu_seconds() - t0);
            }
            times.push(best);
        }
        let ratio = times[1] / times[0];
        assert!(
            (1.6..=2.6).contains(&ratio),
            "doubling ratio {ratio:.2} outside [1.6, 2.6]"
        );
    }

    #[test]
    fn layer_sum_recovers_layer_value_mle() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let d = build_distinct_circuit(4).unwrap();
        for layer in &d.layers {
            let wiring = layer.regular().unwrap();
            let below = random_values(1 << wiring.out_vars, &mut rng);
            let z: Vec<_> = (0..wiring.in_vars)
                .map(|_| FieldElement::random_nonzero(&mut rng))
                .collect();
            assert_eq!(
                layer_claim(wiring, &z, &below),
                layer_claim_fast(wiring, &z, &below)
            );
        }
    }

    #[test]
    fn layer_oracle_boolean_z_is_an_indicator() {
        let c = build_binary_tree(8, GateKind::Mul).unwrap();
        let wiring = c.layers[2].regular().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let below = random_values(8, &mut rng);
        for zb in 0..4usize {
            let z: Vec<_> = (0..2).map(|k| fe(((zb >> (1 - k)) & 1) as u64)).collect();
            let mut oracle = LayerOracle::new(wiring, &z, &below);
            for pb in 0..4usize {
                let p: Vec<_> = (0..2).map(|k| fe(((pb >> (1 - k)) & 1) as u64)).collect();
                let got = oracle.eval(&p);
                if pb == zb {
                    assert_eq!(got, below[2 * pb] * below[2 * pb + 1]);
                } else {
                    assert_eq!(got, fe(0));
                }
            }
        }
    }

    #[test]
    fn degree_bound_is_at_most_three() {
        for layer in build_distinct_circuit(8).unwrap().layers.iter() {
            assert!(layer.regular().unwrap().degrees().iter().all(|&d| d <= 3));
        }
        for layer in build_matmult_circuit(4).unwrap().layers.iter() {
            assert!(layer.regular().unwrap().degrees().iter().all(|&d| d <= 3));
        }
    }

    #[test]
    fn tree_prover_matches_naive() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for k in [3usize, 5, 8] {
            for out_vars in [0usize, 1, 2] {
                if out_vars >= k {
                    continue;
                }
                let depth = k - out_vars;
                let leaves = random_values(1 << k, &mut rng);
                let z: Vec<_> = (0..out_vars)
                    .map(|_| FieldElement::random(&mut rng))
                    .collect();
                let claim = {
                    let mut acc = FieldElement::ZERO;
                    let mut oracle = TreeOracle {
                        leaves: &leaves,
                        z: z.clone(),
                        depth,
                    };
                    let mut point = vec![FieldElement::ZERO; depth];
                    for b in 0..1u64 << depth {
                        for kk in 0..depth {
                            point[kk] = fe((b >> (depth - 1 - kk)) & 1);
                        }
                        acc += oracle.eval(&point);
                    }
                    acc
                };
                let rs: Vec<_> = (0..depth).map(|_| FieldElement::random(&mut rng)).collect();
                let mut fast = TreeProver::new(leaves.clone(), &z, depth, claim);
                let fast_msgs = drive(&mut fast, &rs);
                let mut naive = NaiveProver::new(TreeOracle {
                    leaves: &leaves,
                    z: z.clone(),
                    depth,
                });
                let naive_msgs = drive(&mut naive, &rs);
                assert_eq!(fast_msgs, naive_msgs);
            }
        }
    }

    fn run_tree_circuit(
        n: usize,
        op: GateKind,
        seed: u64,
        per_layer: bool,
    ) -> (GkrOutput, Transcript) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let c = build_binary_tree(n, op).unwrap();
        let input = random_values(n, &mut rng);
        let values = c.evaluate(&input).unwrap();
        let plan = if per_layer {
            GkrPlan::per_layer(&c)
        } else {
            GkrPlan::with_tree_shortcuts(&c)
        };
        verify_circuit(
            &c,
            &input,
            &values[0].clone(),
            &plan,
            ProtocolId::TreeCircuit,
            seed,
            GkrOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_add_gate_tree() {
        let c = build_binary_tree(2, GateKind::Add).unwrap();
        let input = vec![fe(11), fe(31)];
        let values = c.evaluate(&input).unwrap();
        let plan = GkrPlan::with_tree_shortcuts(&c);
        assert_eq!(plan.segments.len(), 1);
        let (out, t) = verify_circuit(
            &c,
            &input,
            &values[0],
            &plan,
            ProtocolId::TreeCircuit,
            5,
            GkrOptions::default(),
        )
        .unwrap();
        assert_eq!(out.outputs, vec![fe(42)]);
        // opening + one sum-check round + the claims exchange
        assert_eq!(t.rounds.len(), 3);
    }

    #[test]
    fn honest_tree_circuits_accept() {
        for seed in 0..5 {
            run_tree_circuit(8, GateKind::Mul, seed, true);
            run_tree_circuit(8, GateKind::Add, seed, true);
            run_tree_circuit(16, GateKind::Mul, 50 + seed, true);
            run_tree_circuit(16, GateKind::Add, 80 + seed, false);
        }
    }

    #[test]
    fn mul_tree_product_claim_checks_out() {
        let c = build_binary_tree(8, GateKind::Mul).unwrap();
        let input: Vec<_> = (1..=8).map(fe).collect();
        let values = c.evaluate(&input).unwrap();
        assert_eq!(values[0][0], fe(40320));
        let (out, _) = verify_circuit(
            &c,
            &input,
            &values[0].clone(),
            &GkrPlan::per_layer(&c),
            ProtocolId::TreeCircuit,
            1,
            GkrOptions::default(),
        )
        .unwrap();
        assert_eq!(out.outputs[0], fe(40320));
    }

    #[test]
    fn add_tree_rounds_have_three_evals() {
        let c = build_binary_tree(8, GateKind::Add).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let input = random_values(8, &mut rng);
        let values = c.evaluate(&input).unwrap();
        let mut values_full = values.clone();
        values_full.push(input.clone());
        let (t, _) = prove_circuit_prepared(
            &c,
            values_full,
            &values[0],
            &GkrPlan::per_layer(&c),
            ProtocolId::TreeCircuit,
            3,
        );
        let sumcheck_rounds = t.rounds[1..]
            .iter()
            .filter(|r| r.message.len() == 3)
            .count();
        assert_eq!(sumcheck_rounds, 0 + 1 + 2);
    }

    #[test]
    fn honest_distinct_and_matmult_accept() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let n = 8;
        let c = build_distinct_circuit(n).unwrap();
        let input: Vec<_> = (0..n)
            .map(|i| {
                if i % 3 == 0 {
                    FieldElement::ZERO
                } else {
                    FieldElement::random(&mut rng)
                }
            })
            .collect();
        let values = c.evaluate(&input).unwrap();
        let plan = GkrPlan::with_tree_shortcuts(&c);
        let (out, _) = verify_circuit(
            &c,
            &input,
            &values[0].clone(),
            &plan,
            ProtocolId::Distinct,
            21,
            GkrOptions::default(),
        )
        .unwrap();
        let expected = input.iter().filter(|v| !v.is_zero()).count() as u64;
        assert_eq!(out.outputs[0], fe(expected));

        let n = 4;
        let c = build_matmult_circuit(n).unwrap();
        let a = random_values(n * n, &mut rng);
        let b = random_values(n * n, &mut rng);
        let input = matmult_input(&a, &b, n);
        let values = c.evaluate(&input).unwrap();
        for plan in [GkrPlan::per_layer(&c), GkrPlan::with_tree_shortcuts(&c)] {
            let (out, _) = verify_circuit(
                &c,
                &input,
                &values[0].clone(),
                &plan,
                ProtocolId::MatMulGkr,
                33,
                GkrOptions {
                    input_check: InputCheck::Table,
                },
            )
            .unwrap();
            assert_eq!(out.outputs, values[0]);
        }
    }

    #[test]
    fn corrupted_outputs_reject() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for seed in 0..20 {
            let n = 8;
            let c = build_binary_tree(n, GateKind::Mul).unwrap();
            let input = random_values(n, &mut rng);
            let values = c.evaluate(&input).unwrap();
            let mut outputs = values[0].clone();
            outputs[0] += fe(1);
            let res = verify_circuit(
                &c,
                &input,
                &outputs,
                &GkrPlan::per_layer(&c),
                ProtocolId::TreeCircuit,
                seed,
                GkrOptions::default(),
            );
            assert!(res.is_err(), "seed {seed} accepted a corrupted output");
        }
    }

    #[test]
    fn transcript_mutations_reject() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let n = 8;
        let c = build_binary_tree(n, GateKind::Mul).unwrap();
        let input = random_values(n, &mut rng);
        let values = c.evaluate(&input).unwrap();
        let plan = GkrPlan::per_layer(&c);
        let (t, _) =
            prove_circuit_with_input(&c, &input, &values[0], &plan, ProtocolId::TreeCircuit, 7)
                .unwrap();
        let verify = |bytes: &[u8]| {
            verify_circuit_transcript(
                &c,
                VerifierInput::Dense(&input),
                &plan,
                ProtocolId::TreeCircuit,
                bytes,
                GkrOptions::default(),
            )
        };
        verify(&t.to_bytes()).unwrap();

        for round in 0..t.rounds.len() {
            for slot in 0..t.rounds[round].message.len() {
                let mut bad = t.clone();
                bad.rounds[round].message[slot] += fe(1);
                assert!(
                    verify(&bad.to_bytes()).is_err(),
                    "round {round} slot {slot} flip accepted"
                );
            }
        }
        for round in 1..t.rounds.len() {
            if t.rounds[round].message.len() >= 2 {
                let mut bad = t.clone();
                bad.rounds[round].message.swap(0, 1);
                if bad.rounds[round].message != t.rounds[round].message {
                    assert!(
                        verify(&bad.to_bytes()).is_err(),
                        "round {round} swap accepted"
                    );
                }
            }
        }
    }

    #[test]
    fn reduce_to_one_point_continuation_matches_direct_mle() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let c = build_binary_tree(16, GateKind::Add).unwrap();
        let wiring = c.layers[3].regular().unwrap();
        let below = random_values(16, &mut rng);
        let z: Vec<_> = (0..3)
            .map(|_| FieldElement::random_nonzero(&mut rng))
            .collect();
        let claim = Claim {
            point: z.clone(),
            value: layer_claim_fast(wiring, &z, &below),
        };
        let mut session = ProveSession::new(ProtocolId::GkrCustom, 4);
        session.begin_section(1);
        let mut counter = WorkCounter::new();
        let conts = prove_layer_segment(wiring, &claim, below.clone(), &mut session, &mut counter);
        assert_eq!(conts.len(), 1);
        assert_eq!(conts[0].value, eval_mle_table(&below, &conts[0].point));
    }

    #[test]
    fn dissimilar_layer_carries_both_claims() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let c = build_matmult_circuit(2).unwrap();
        let mul = c.layers.last().unwrap().regular().unwrap();
        let below = random_values(1 << mul.out_vars, &mut rng);
        let z: Vec<_> = (0..mul.in_vars)
            .map(|_| FieldElement::random_nonzero(&mut rng))
            .collect();
        let claim = Claim {
            point: z.clone(),
            value: layer_claim_fast(mul, &z, &below),
        };
        let mut session = ProveSession::new(ProtocolId::GkrCustom, 8);
        session.begin_section(1);
        let mut counter = WorkCounter::new();
        let conts = prove_layer_segment(mul, &claim, below.clone(), &mut session, &mut counter);
        assert_eq!(conts.len(), 2);
        for cont in &conts {
            assert_eq!(cont.value, eval_mle_table(&below, &cont.point));
        }
    }

    #[test]
    fn completeness_over_random_library_circuits() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for seed in 0..50u64 {
            match rng.gen_range(0..4) {
                0 => {
                    run_tree_circuit(1 << rng.gen_range(1..6), GateKind::Mul, seed, true);
                }
                1 => {
                    run_tree_circuit(1 << rng.gen_range(1..6), GateKind::Add, seed, false);
                }
                2 => {
                    let n = 1 << rng.gen_range(1..4);
                    let c = build_distinct_circuit(n).unwrap();
                    let input = random_values(n, &mut rng);
                    let values = c.evaluate(&input).unwrap();
                    verify_circuit(
                        &c,
                        &input,
                        &values[0].clone(),
                        &GkrPlan::with_tree_shortcuts(&c),
                        ProtocolId::Distinct,
                        seed,
                        GkrOptions::default(),
                    )
                    .unwrap();
                }
                _ => {
                    let n = 1 << rng.gen_range(1..3);
                    let c = build_matmult_circuit(n).unwrap();
                    let a = random_values(n * n, &mut rng);
                    let b = random_values(n * n, &mut rng);
                    let input = matmult_input(&a, &b, n);
                    let values = c.evaluate(&input).unwrap();
                    verify_circuit(
                        &c,
                        &input,
                        &values[0].clone(),
                        &GkrPlan::per_layer(&c),
                        ProtocolId::MatMulGkr,
                        seed,
                        GkrOptions::default(),
                    )
                    .unwrap();
                }
            }
        }
    }

    #[test]
    fn accounting_matches_transcript_recount() {
        let (out, t) = run_tree_circuit(16, GateKind::Mul, 99, true);
        let (rounds, bytes) = t.rounds_and_bytes();
        assert_eq!(rounds, out.rounds);
        assert_eq!(bytes, out.comm_bytes);
        // opening + per layer (s_i rounds + one claims exchange)
        assert_eq!(rounds, 1 + (0 + 1) + (1 + 1) + (2 + 1) + (3 + 1));
        // mul-tree rounds carry 4 evals, claims exchanges 2
        assert_eq!(bytes, 8 * ((0 + 1 + 2 + 3) * 4 + 4 * 2));
    }
}
