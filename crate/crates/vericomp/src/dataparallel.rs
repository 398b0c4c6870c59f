//! Batched verification of B independent copies of an arbitrary-wiring base
//! circuit. The copies never interact, so every layer's sum-check uses the
//! wiring predicates of the single base circuit: the verifier's
//! preprocessing cost is O(S) regardless of B, and the prover pays the
//! data-parallel price only in the value tables.
//!
//! Gate labels of the super-circuit are (p1, p2) with the copy index p2 in
//! the low-order bits. Each layer runs one sum-check over
//! (p1, omega1, gamma1, p2) in that binding order: the first s_i + 2 s_{i+1}
//! rounds walk the gate list (each gate contributes to exactly one term),
//! and the final b rounds fold dense tables with the wiring predicates
//! frozen to scalars.

use crate::circuit::{Gate, GateKind, LayeredCircuit, LayerWiring};
use crate::counters::WorkCounter;
use crate::field::FieldElement;
use crate::gkr::{line_through, prove_tree_segment, verify_tree_segment, Claim};
use crate::mle::{beta_eval, build_chi_table, eval_mle_table, BetaTable, EvalTable};
use crate::sumcheck::{
    interpolate_at, prove_rounds, verify_rounds, PointOracle, RoundMessage, RoundProver,
};
use crate::transcript::{Draw, ProtocolId, ProveSession, Rejection, Transcript, VerifySession};

/// B side-by-side copies of a base circuit with explicit gate lists.
#[derive(Clone, Debug)]
pub struct SuperCircuit {
    pub base: LayeredCircuit,
    pub copies: usize,
}

impl SuperCircuit {
    pub fn new(base: LayeredCircuit, copies: usize) -> Self {
        assert!(copies.is_power_of_two());
        SuperCircuit { base, copies }
    }

    pub fn copy_bits(&self) -> usize {
        self.copies.trailing_zeros() as usize
    }

    /// Interleaves the per-copy inputs into the (position, copy) layout.
    pub fn star_input(&self, inputs: &[Vec<FieldElement>]) -> Vec<FieldElement> {
        let b = self.copies;
        let n = self.base.input_size();
        assert_eq!(inputs.len(), b);
        let mut star = vec![FieldElement::ZERO; n * b];
        for (c, input) in inputs.iter().enumerate() {
            assert_eq!(input.len(), n);
            for (w, &v) in input.iter().enumerate() {
                star[w * b + c] = v;
            }
        }
        star
    }

    /// Evaluates every copy and returns the star-layout value arrays, one
    /// per base layer, with the star input appended last.
    pub fn evaluate(
        &self,
        inputs: &[Vec<FieldElement>],
    ) -> Result<Vec<Vec<FieldElement>>, crate::circuit::CircuitError> {
        let b = self.copies;
        let depth = self.base.depth();
        let mut star: Vec<Vec<FieldElement>> = (0..depth)
            .map(|i| vec![FieldElement::ZERO; self.base.layers[i].size() * b])
            .collect();
        for (c, input) in inputs.iter().enumerate() {
            let values = self.base.evaluate(input)?;
            for i in 0..depth {
                for (p, &v) in values[i].iter().enumerate() {
                    star[i][p * b + c] = v;
                }
            }
        }
        star.push(self.star_input(inputs));
        Ok(star)
    }
}

/// Brute-force oracle for the data-parallel layer polynomial over
/// (p1, omega1, gamma1, p2).
pub struct DataParallelOracle<'a> {
    pub circuit: &'a LayeredCircuit,
    pub layer: usize,
    pub copy_bits: usize,
    pub z: Vec<FieldElement>,
    pub star_below: &'a [FieldElement],
}

impl DataParallelOracle<'_> {
    fn dims(&self) -> (usize, usize, usize) {
        let s_i = self.circuit.layers[self.layer].log_size;
        let s_next = self.circuit.layers[self.layer].next_log_size();
        (s_i, s_next, self.copy_bits)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let (s_i, s_next, b) = self.dims();
        let mut d = vec![2usize; s_i + 2 * s_next];
        d.extend(vec![3usize; b]);
        d
    }
}

impl PointOracle for DataParallelOracle<'_> {
    fn num_vars(&self) -> usize {
        let (s_i, s_next, b) = self.dims();
        s_i + 2 * s_next + b
    }

    fn degree(&self, var: usize) -> usize {
        self.degrees()[var - 1]
    }

    fn eval(&mut self, point: &[FieldElement]) -> FieldElement {
        let (s_i, s_next, _) = self.dims();
        let (p1, rest) = point.split_at(s_i);
        let (w1, rest) = rest.split_at(s_next);
        let (g1, p2) = rest.split_at(s_next);
        let mut visits = 0;
        let mut pred_point = p1.to_vec();
        pred_point.extend_from_slice(w1);
        pred_point.extend_from_slice(g1);
        let (add_t, mult_t) = self
            .circuit
            .wiring_predicate_eval(self.layer, &pred_point, &mut visits);
        let mut pw = w1.to_vec();
        pw.extend_from_slice(p2);
        let mut pg = g1.to_vec();
        pg.extend_from_slice(p2);
        let v1 = eval_mle_table(self.star_below, &pw);
        let v2 = eval_mle_table(self.star_below, &pg);
        let mut zp = p1.to_vec();
        zp.extend_from_slice(p2);
        beta_eval(&self.z, &zp) * (add_t * (v1 + v2) + mult_t * v1 * v2)
    }
}

/// Fast prover for one data-parallel layer.
pub struct DataParallelLayerProver<'a> {
    gates: Vec<Gate>,
    s_i: usize,
    s_next: usize,
    b: usize,
    round: usize,
    beta1: BetaTable,
    beta2: BetaTable,
    v_omega: EvalTable,
    v_gamma: EvalTable,
    wa: Vec<FieldElement>,
    wb: Vec<FieldElement>,
    wc: Vec<FieldElement>,
    u: Vec<FieldElement>,
    a_hat: FieldElement,
    m_hat: FieldElement,
    running: FieldElement,
    last: Option<RoundMessage>,
    star_below: &'a [FieldElement],
    pub counter: WorkCounter,
}

impl<'a> DataParallelLayerProver<'a> {
    pub fn new(
        circuit: &LayeredCircuit,
        layer: usize,
        copy_bits: usize,
        z: &[FieldElement],
        star_below: &'a [FieldElement],
        claim: FieldElement,
    ) -> Self {
        let s_i = circuit.layers[layer].log_size;
        let s_next = circuit.layers[layer].next_log_size();
        let b = copy_bits;
        assert_eq!(z.len(), s_i + b);
        assert_eq!(star_below.len(), 1 << (s_next + b));
        let gates: Vec<Gate> = (0..circuit.layers[layer].size())
            .map(|p| {
                let g = circuit.layers[layer].gate(p);
                assert!(!g.fan_in_one, "data-parallel bases are fan-in 2");
                g
            })
            .collect();
        let mut counter = WorkCounter::new();
        let beta1 = BetaTable::new(&z[..s_i]);
        let beta2 = BetaTable::new(&z[s_i..]);
        counter.mults += (2u64 << s_i) + (2u64 << b);
        let v_omega = EvalTable::from_values(star_below.to_vec());
        let v_gamma = EvalTable::from_values(star_below.to_vec());
        counter.allocated += 2 * star_below.len() as u64;

        // p1-phase per-gate weights: sum over p2 of beta2 * gate semantics
        let copies = 1usize << b;
        let mut u = Vec::with_capacity(gates.len());
        for g in &gates {
            let mut acc = FieldElement::ZERO;
            for p2 in 0..copies {
                let v1 = star_below[g.in1 * copies + p2];
                let v2 = star_below[g.in2 * copies + p2];
                let body = match g.kind {
                    GateKind::Add => v1 + v2,
                    GateKind::Mul => v1 * v2,
                };
                acc += beta2.entry(p2) * body;
            }
            u.push(acc);
        }
        counter.mults += 2 * (gates.len() as u64) * copies as u64;

        let n_gates = gates.len();
        DataParallelLayerProver {
            gates,
            s_i,
            s_next,
            b,
            round: 1,
            beta1,
            beta2,
            v_omega,
            v_gamma,
            wa: vec![FieldElement::ONE; n_gates],
            wb: vec![FieldElement::ONE; n_gates],
            wc: vec![FieldElement::ONE; n_gates],
            u,
            a_hat: FieldElement::ZERO,
            m_hat: FieldElement::ZERO,
            running: claim,
            last: None,
            star_below,
            counter,
        }
    }

    pub fn bound_pair(&self) -> (FieldElement, FieldElement) {
        (self.v_omega.single(), self.v_gamma.single())
    }

    fn phase(&self, round: usize) -> (usize, usize) {
        // (phase id, index within phase), phases: 0 = p1, 1 = omega,
        // 2 = gamma, 3 = p2
        let r = round - 1;
        if r < self.s_i {
            (0, r)
        } else if r < self.s_i + self.s_next {
            (1, r - self.s_i)
        } else if r < self.s_i + 2 * self.s_next {
            (2, r - self.s_i - self.s_next)
        } else {
            (3, r - self.s_i - 2 * self.s_next)
        }
    }
}

#[inline]
fn chi_bit(bits: usize, pos_from_msb: usize, width: usize, t: FieldElement) -> FieldElement {
    if (bits >> (width - 1 - pos_from_msb)) & 1 == 0 {
        FieldElement::ONE - t
    } else {
        t
    }
}

impl RoundProver for DataParallelLayerProver<'_> {
    fn num_vars(&self) -> usize {
        self.s_i + 2 * self.s_next + self.b
    }

    fn degree(&self, round: usize) -> usize {
        let (phase, _) = self.phase(round);
        if phase == 3 {
            3
        } else {
            2
        }
    }

    fn round_message(&mut self) -> RoundMessage {
        let (phase, m) = self.phase(self.round);
        let deg = if phase == 3 { 3 } else { 2 };
        let ts: Vec<u64> = std::iter::once(0).chain(2..=deg as u64).collect();
        let copies = 1usize << self.b;
        let mut evals = vec![FieldElement::ZERO; ts.len()];

        match phase {
            0 => {
                let mask = (1usize << (self.s_i - 1 - m)) - 1;
                for (ti, &t) in ts.iter().enumerate() {
                    let tf = FieldElement::new(t);
                    let coeff = self.beta1.round_coeff(tf);
                    let mut acc = FieldElement::ZERO;
                    for (gi, _) in self.gates.iter().enumerate() {
                        let label = gi;
                        let sfx = label & mask;
                        let cj = chi_bit(label, m, self.s_i, tf);
                        acc += self.beta1.entry_for(sfx) * self.wa[gi] * cj * self.u[gi];
                    }
                    evals[ti] = acc * coeff;
                }
                self.counter.terms += (ts.len() * self.gates.len()) as u64;
                self.counter.mults += (4 * ts.len() * self.gates.len()) as u64;
            }
            1 => {
                let beta1s = self.beta1.bound_value();
                let mask = (1usize << (self.s_next - 1 - m)) - 1;
                for (ti, &t) in ts.iter().enumerate() {
                    let tf = FieldElement::new(t);
                    let c0 = FieldElement::ONE - tf;
                    let c1 = tf;
                    let mut acc = FieldElement::ZERO;
                    for (gi, g) in self.gates.iter().enumerate() {
                        let sfx = g.in1 & mask;
                        let cj = chi_bit(g.in1, m, self.s_next, tf);
                        let mut inner = FieldElement::ZERO;
                        for p2 in 0..copies {
                            let vw = self.v_omega.split_eval((sfx << self.b) | p2, c0, c1);
                            let vg = self.star_below[g.in2 * copies + p2];
                            let body = match g.kind {
                                GateKind::Add => vw + vg,
                                GateKind::Mul => vw * vg,
                            };
                            inner += self.beta2.entry(p2) * body;
                        }
                        acc += self.wa[gi] * self.wb[gi] * cj * inner;
                    }
                    evals[ti] = acc * beta1s;
                }
                self.counter.terms += (ts.len() * self.gates.len() * copies) as u64;
                self.counter.mults += (7 * ts.len() * self.gates.len() * copies) as u64;
            }
            2 => {
                let beta1s = self.beta1.bound_value();
                let mask = (1usize << (self.s_next - 1 - m)) - 1;
                for (ti, &t) in ts.iter().enumerate() {
                    let tf = FieldElement::new(t);
                    let c0 = FieldElement::ONE - tf;
                    let c1 = tf;
                    let mut acc = FieldElement::ZERO;
                    for (gi, g) in self.gates.iter().enumerate() {
                        let sfx = g.in2 & mask;
                        let cj = chi_bit(g.in2, m, self.s_next, tf);
                        let mut inner = FieldElement::ZERO;
                        for p2 in 0..copies {
                            let vw = self.v_omega.get(p2); // fully bound over omega1
                            let vg = self.v_gamma.split_eval((sfx << self.b) | p2, c0, c1);
                            let body = match g.kind {
                                GateKind::Add => vw + vg,
                                GateKind::Mul => vw * vg,
                            };
                            inner += self.beta2.entry(p2) * body;
                        }
                        acc += self.wa[gi] * self.wb[gi] * self.wc[gi] * cj * inner;
                    }
                    evals[ti] = acc * beta1s;
                }
                self.counter.terms += (ts.len() * self.gates.len() * copies) as u64;
                self.counter.mults += (8 * ts.len() * self.gates.len() * copies) as u64;
            }
            _ => {
                let beta1s = self.beta1.bound_value();
                if m == 0 {
                    // wiring predicates freeze to scalars once (p1, w1, g1)
                    // are bound
                    self.a_hat = FieldElement::ZERO;
                    self.m_hat = FieldElement::ZERO;
                    for (gi, g) in self.gates.iter().enumerate() {
                        let w = self.wa[gi] * self.wb[gi] * self.wc[gi];
                        match g.kind {
                            GateKind::Add => self.a_hat += w,
                            GateKind::Mul => self.m_hat += w,
                        }
                    }
                    self.counter.mults += 2 * self.gates.len() as u64;
                }
                let tail = self.b - 1 - m;
                for (ti, &t) in ts.iter().enumerate() {
                    let tf = FieldElement::new(t);
                    let c0 = FieldElement::ONE - tf;
                    let c1 = tf;
                    let coeff = self.beta2.round_coeff(tf);
                    let mut acc = FieldElement::ZERO;
                    for sfx in 0..1usize << tail {
                        let v1 = self.v_omega.split_eval(sfx, c0, c1);
                        let v2 = self.v_gamma.split_eval(sfx, c0, c1);
                        acc += self.beta2.entry_for(sfx)
                            * (self.a_hat * (v1 + v2) + self.m_hat * v1 * v2);
                    }
                    evals[ti] = acc * coeff * beta1s;
                }
                self.counter.terms += (ts.len() as u64) << tail;
                self.counter.mults += (9 * ts.len() as u64) << tail;
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
        let (phase, m) = self.phase(self.round);
        match phase {
            0 => {
                self.beta1.bind(r);
                for (gi, _) in self.gates.iter().enumerate() {
                    self.wa[gi] = self.wa[gi] * chi_bit(gi, m, self.s_i, r);
                }
                self.counter.mults += self.gates.len() as u64;
            }
            1 => {
                self.counter.mults += self.v_omega.len() as u64;
                self.v_omega.bind(r);
                for (gi, g) in self.gates.iter().enumerate() {
                    self.wb[gi] = self.wb[gi] * chi_bit(g.in1, m, self.s_next, r);
                }
                self.counter.mults += self.gates.len() as u64;
            }
            2 => {
                self.counter.mults += self.v_gamma.len() as u64;
                self.v_gamma.bind(r);
                for (gi, g) in self.gates.iter().enumerate() {
                    self.wc[gi] = self.wc[gi] * chi_bit(g.in2, m, self.s_next, r);
                }
                self.counter.mults += self.gates.len() as u64;
            }
            _ => {
                self.beta2.bind(r);
                self.counter.mults += (self.v_omega.len() + self.v_gamma.len()) as u64;
                self.v_omega.bind(r);
                self.v_gamma.bind(r);
            }
        }
        self.running = interpolate_at(&self.last.as_ref().unwrap().evals, r);
        self.round += 1;
    }
}

fn split_point(
    point: &[FieldElement],
    s_i: usize,
    s_next: usize,
) -> (
    &[FieldElement],
    &[FieldElement],
    &[FieldElement],
    &[FieldElement],
) {
    let (p1, rest) = point.split_at(s_i);
    let (w1, rest) = rest.split_at(s_next);
    let (g1, p2) = rest.split_at(s_next);
    (p1, w1, g1, p2)
}

/// Prover side of one data-parallel layer reduction. Returns the
/// continuation claims about the star layer below.
pub fn prove_dataparallel_layer(
    circuit: &LayeredCircuit,
    layer: usize,
    copy_bits: usize,
    claim: &Claim,
    star_below: &[FieldElement],
    session: &mut ProveSession,
    counter: &mut WorkCounter,
    is_last: bool,
) -> Vec<Claim> {
    let mut prover = DataParallelLayerProver::new(
        circuit,
        layer,
        copy_bits,
        &claim.point,
        star_below,
        claim.value,
    );
    let out = prove_rounds(&mut prover, session);
    let (v1, v2) = prover.bound_pair();
    counter.mults += prover.counter.mults;
    counter.terms += prover.counter.terms;
    let s_i = circuit.layers[layer].log_size;
    let s_next = circuit.layers[layer].next_log_size();
    let (_, rw, rg, rp2) = split_point(&out.point, s_i, s_next);

    let mut pt1 = rw.to_vec();
    pt1.extend_from_slice(rp2);
    let mut pt2 = rg.to_vec();
    pt2.extend_from_slice(rp2);
    if is_last {
        session.send(vec![v1, v2]);
        session.respond(Draw::Uniform, 0);
        return vec![
            Claim {
                point: pt1,
                value: v1,
            },
            Claim {
                point: pt2,
                value: v2,
            },
        ];
    }
    // line restriction over the first s_{i+1} coordinates only; the copy
    // coordinates are shared. Fold the copy axes once, then each h node is
    // one chi-table evaluation.
    let copies = 1usize << copy_bits;
    let chi_p2 = build_chi_table(rp2);
    let mut folded = vec![FieldElement::ZERO; 1 << s_next];
    for w in 0..1usize << s_next {
        let mut acc = FieldElement::ZERO;
        for p2 in 0..copies {
            acc += star_below[w * copies + p2] * chi_p2.get(p2);
        }
        folded[w] = acc;
    }
    counter.mults += (copies << s_next) as u64;
    let deg_h = s_next;
    let mut h = vec![v1, v2];
    for t in 2..=deg_h as u64 {
        let mix = line_through(rw, rg, FieldElement::new(t));
        h.push(eval_mle_table(&folded, &mix));
    }
    session.send(h.clone());
    let r_star = session.respond(Draw::Uniform, 1)[0];
    let mut point = line_through(rw, rg, r_star);
    point.extend_from_slice(rp2);
    vec![Claim {
        point,
        value: interpolate_at(&h, r_star),
    }]
}

/// Verifier side of one data-parallel layer reduction; wiring predicates are
/// evaluated by enumerating the base layer's gates (the O(S_i) preprocessing
/// whose cost is independent of B).
pub fn verify_dataparallel_layer(
    circuit: &LayeredCircuit,
    layer: usize,
    copy_bits: usize,
    claim: &Claim,
    session: &mut VerifySession<'_>,
    rounds_done: usize,
    gate_visits: &mut u64,
    is_last: bool,
) -> Result<Vec<Claim>, Rejection> {
    let s_i = circuit.layers[layer].log_size;
    let s_next = circuit.layers[layer].next_log_size();
    let mut degrees = vec![2usize; s_i + 2 * s_next];
    degrees.extend(vec![3usize; copy_bits]);
    let out = verify_rounds(claim.value, &degrees, session, rounds_done)?;
    let (rp1, rw, rg, rp2) = split_point(&out.point, s_i, s_next);

    let mut pred_point = rp1.to_vec();
    pred_point.extend_from_slice(rw);
    pred_point.extend_from_slice(rg);
    let (add_t, mult_t) = circuit.wiring_predicate_eval(layer, &pred_point, gate_visits);

    let mut zp = rp1.to_vec();
    zp.extend_from_slice(rp2);
    let beta = beta_eval(&claim.point, &zp);

    let finish = |v1: FieldElement, v2: FieldElement| -> Result<(), Rejection> {
        if beta * (add_t * (v1 + v2) + mult_t * v1 * v2) != out.claim {
            return Err(Rejection::FinalCheck);
        }
        Ok(())
    };

    let mut pt1 = rw.to_vec();
    pt1.extend_from_slice(rp2);
    let mut pt2 = rg.to_vec();
    pt2.extend_from_slice(rp2);
    if is_last {
        let msg = session.recv(2)?;
        session.respond(Draw::Uniform, 0)?;
        finish(msg[0], msg[1])?;
        return Ok(vec![
            Claim {
                point: pt1,
                value: msg[0],
            },
            Claim {
                point: pt2,
                value: msg[1],
            },
        ]);
    }
    let h = session.recv(s_next + 1)?;
    finish(h[0], h[1])?;
    let r_star = session.respond(Draw::Uniform, 1)?[0];
    let mut point = line_through(rw, rg, r_star);
    point.extend_from_slice(rp2);
    Ok(vec![Claim {
        point,
        value: interpolate_at(&h, r_star),
    }])
}

/// Outcome of a counting-query pipeline run.
#[derive(Clone, Debug)]
pub struct DataParallelOutcome {
    pub output: FieldElement,
    pub rounds: usize,
    pub comm_bytes: usize,
    /// Gates enumerated by the verifier's wiring-predicate evaluations;
    /// independent of the copy count.
    pub gate_visits: u64,
}

/// Proves the counting-query pipeline: B copies of the base circuit, their
/// outputs aggregated by a binary addition tree down to one total.
pub fn prove_counting_pipeline(
    sc: &SuperCircuit,
    inputs: &[Vec<FieldElement>],
    seed: u64,
) -> Result<(Transcript, WorkCounter), crate::circuit::CircuitError> {
    let star = sc.evaluate(inputs)?;
    let b = sc.copy_bits();
    let s_top = sc.base.layers[0].log_size;
    let agg_depth = s_top + b;
    let total = star[0]
        .iter()
        .fold(FieldElement::ZERO, |acc, &v| acc + v);

    let mut counter = WorkCounter::new();
    let mut session = ProveSession::new(ProtocolId::DataParallel, seed);
    session.begin_section(0);
    session.send(vec![total]);
    session.respond(Draw::Nonzero, 0);
    let mut total_vars = 0usize;

    // aggregation: one addition-tree sum-check over all output-and-copy bits
    session.begin_section(1);
    let agg_claim = Claim {
        point: Vec::new(),
        value: total,
    };
    let mut pending = prove_tree_segment(
        agg_depth,
        &agg_claim,
        star[0].clone(),
        &mut session,
        &mut counter,
    );
    total_vars += agg_depth;

    for layer in 0..sc.base.depth() {
        let is_last = layer + 1 == sc.base.depth();
        let mut next = Vec::new();
        for claim in &pending {
            session.begin_section((layer + 2) as u16);
            let s_i = sc.base.layers[layer].log_size;
            let s_next = sc.base.layers[layer].next_log_size();
            total_vars += s_i + 2 * s_next + b;
            next.extend(prove_dataparallel_layer(
                &sc.base,
                layer,
                b,
                claim,
                &star[layer + 1],
                &mut session,
                &mut counter,
                is_last,
            ));
        }
        pending = next;
    }
    Ok((session.into_transcript(total_vars as u16), counter))
}

/// Verifies a counting-query transcript against the per-copy inputs.
pub fn verify_counting_pipeline(
    sc: &SuperCircuit,
    inputs: &[Vec<FieldElement>],
    bytes: &[u8],
) -> Result<DataParallelOutcome, Rejection> {
    let b = sc.copy_bits();
    let s_top = sc.base.layers[0].log_size;
    let agg_depth = s_top + b;
    let mut session = VerifySession::open(bytes, ProtocolId::DataParallel)?;
    session.begin_section(0)?;
    let opening = session.recv(1)?;
    session.respond(Draw::Nonzero, 0)?;
    let output = opening[0];
    let mut rounds_done = 0usize;
    let mut gate_visits = 0u64;

    session.begin_section(1)?;
    let agg_claim = Claim {
        point: Vec::new(),
        value: output,
    };
    let mut pending = verify_tree_segment(agg_depth, &agg_claim, &mut session, rounds_done)?;
    rounds_done += agg_depth;

    for layer in 0..sc.base.depth() {
        let is_last = layer + 1 == sc.base.depth();
        let mut next = Vec::new();
        for claim in &pending {
            session.begin_section((layer + 2) as u16)?;
            let s_i = sc.base.layers[layer].log_size;
            let s_next = sc.base.layers[layer].next_log_size();
            next.extend(verify_dataparallel_layer(
                &sc.base,
                layer,
                b,
                claim,
                &mut session,
                rounds_done,
                &mut gate_visits,
                is_last,
            )?);
            rounds_done += s_i + 2 * s_next + b;
        }
        pending = next;
    }
    let (rounds, comm_bytes) = session.finish()?;

    let star_input = sc.star_input(inputs);
    for claim in &pending {
        if eval_mle_table(&star_input, &claim.point) != claim.value {
            return Err(Rejection::InputCheck);
        }
    }
    Ok(DataParallelOutcome {
        output,
        rounds,
        comm_bytes,
        gate_visits,
    })
}

/// Random explicit-wiring base circuit for the batched-protocol fixtures.
pub fn random_base_circuit<R: rand::Rng + ?Sized>(
    layer_log_sizes: &[usize],
    input_log_size: usize,
    rng: &mut R,
) -> LayeredCircuit {
    let mut layers = Vec::new();
    for (i, &log_size) in layer_log_sizes.iter().enumerate() {
        let next_log_size = if i + 1 == layer_log_sizes.len() {
            input_log_size
        } else {
            layer_log_sizes[i + 1]
        };
        let below = 1usize << next_log_size;
        let gates = (0..1usize << log_size)
            .map(|_| Gate {
                kind: if rng.gen_bool(0.5) {
                    GateKind::Add
                } else {
                    GateKind::Mul
                },
                in1: rng.gen_range(0..below),
                in2: rng.gen_range(0..below),
                fan_in_one: false,
            })
            .collect();
        layers.push(crate::circuit::Layer {
            log_size,
            wiring: LayerWiring::Explicit {
                gates,
                next_log_size,
            },
        });
    }
    let c = LayeredCircuit {
        layers,
        input_log_size,
    };
    c.check_shape();
    c
}

/// Materializes explicit gate lists for a descriptor-backed circuit, so the
/// same instance can run through both protocol families.
pub fn to_explicit(circuit: &LayeredCircuit) -> LayeredCircuit {
    let layers = circuit
        .layers
        .iter()
        .map(|layer| crate::circuit::Layer {
            log_size: layer.log_size,
            wiring: LayerWiring::Explicit {
                gates: (0..layer.size()).map(|p| layer.gate(p)).collect(),
                next_log_size: layer.next_log_size(),
            },
        })
        .collect();
    LayeredCircuit {
        layers,
        input_log_size: circuit.input_log_size,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_binary_tree;
    use crate::sumcheck::NaiveProver;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn fe(v: u64) -> FieldElement {
        FieldElement::new(v)
    }

    fn random_inputs(b: usize, n: usize, rng: &mut ChaCha12Rng) -> Vec<Vec<FieldElement>> {
        (0..b)
            .map(|_| (0..n).map(|_| FieldElement::random(rng)).collect())
            .collect()
    }

    fn brute_force_total(sc: &SuperCircuit, inputs: &[Vec<FieldElement>]) -> FieldElement {
        inputs
            .iter()
            .map(|input| {
                sc.base.evaluate(input).unwrap()[0]
                    .iter()
                    .fold(FieldElement::ZERO, |a, &v| a + v)
            })
            .fold(FieldElement::ZERO, |a, v| a + v)
    }

    #[test]
    fn single_add_gate_predicate_lights_up() {
        // base circuit: one add gate over two inputs; the boolean wire
        // triple must evaluate the add predicate to 1
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let base = random_base_circuit(&[0], 1, &mut rng);
        let base = {
            let mut b = base;
            b.layers[0].wiring = LayerWiring::Explicit {
                gates: vec![Gate {
                    kind: GateKind::Add,
                    in1: 0,
                    in2: 1,
                    fan_in_one: false,
                }],
                next_log_size: 1,
            };
            b
        };
        let mut visits = 0;
        let (add_t, mult_t) =
            base.wiring_predicate_eval(0, &[fe(0), fe(1)], &mut visits);
        assert_eq!((add_t, mult_t), (fe(1), fe(0)));
    }

    #[test]
    fn layer_prover_matches_naive_on_tiny_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        // B = 2 copies of a 2-gate base layer
        for seed in 0..10u64 {
            let base = random_base_circuit(&[1], 1, &mut rng);
            let sc = SuperCircuit::new(base, 2);
            let inputs = random_inputs(2, 2, &mut rng);
            let star = sc.evaluate(&inputs).unwrap();
            check_dp_equivalence(&sc, 0, &star[1], seed, &mut rng);
        }
        // assorted shapes with B * S <= 2^10
        for seed in 0..10u64 {
            let base = random_base_circuit(&[2, 3], 2, &mut rng);
            let sc = SuperCircuit::new(base, 8);
            let inputs = random_inputs(8, 4, &mut rng);
            let star = sc.evaluate(&inputs).unwrap();
            for layer in 0..2 {
                check_dp_equivalence(&sc, layer, &star[layer + 1], 100 + seed, &mut rng);
            }
        }
    }

    fn check_dp_equivalence(
        sc: &SuperCircuit,
        layer: usize,
        star_below: &[FieldElement],
        _seed: u64,
        rng: &mut ChaCha12Rng,
    ) {
        let b = sc.copy_bits();
        let s_i = sc.base.layers[layer].log_size;
        let s_next = sc.base.layers[layer].next_log_size();
        let v = s_i + 2 * s_next + b;
        let z: Vec<_> = (0..s_i + b)
            .map(|_| FieldElement::random_nonzero(rng))
            .collect();
        // true claim: brute-force hypercube sum of the oracle
        let mut oracle = DataParallelOracle {
            circuit: &sc.base,
            layer,
            copy_bits: b,
            z: z.clone(),
            star_below,
        };
        let mut claim = FieldElement::ZERO;
        let mut point = vec![FieldElement::ZERO; v];
        for bits in 0..1u64 << v {
            for k in 0..v {
                point[k] = fe((bits >> (v - 1 - k)) & 1);
            }
            claim += oracle.eval(&point);
        }
        let rs: Vec<_> = (0..v).map(|_| FieldElement::random(rng)).collect();

        let mut fast =
            DataParallelLayerProver::new(&sc.base, layer, b, &z, star_below, claim);
        let mut naive = NaiveProver::new(DataParallelOracle {
            circuit: &sc.base,
            layer,
            copy_bits: b,
            z: z.clone(),
            star_below,
        });
        for (j, &r) in rs.iter().enumerate() {
            let mf = fast.round_message();
            let mn = naive.round_message();
            assert_eq!(mf, mn, "round {}", j + 1);
            fast.bind(r);
            naive.bind(r);
        }
        // bound pair agrees with direct MLEs
        let (_, rw, rg, rp2) = split_point(&rs, s_i, s_next);
        let (v1, v2) = fast.bound_pair();
        let mut pw = rw.to_vec();
        pw.extend_from_slice(rp2);
        let mut pg = rg.to_vec();
        pg.extend_from_slice(rp2);
        assert_eq!(v1, eval_mle_table(star_below, &pw));
        assert_eq!(v2, eval_mle_table(star_below, &pg));
    }

    #[test]
    fn honest_pipelines_accept() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for seed in 0..10u64 {
            let base = random_base_circuit(&[0, 2], 2, &mut rng);
            let sc = SuperCircuit::new(base, 8);
            let inputs = random_inputs(8, 4, &mut rng);
            let (t, _) = prove_counting_pipeline(&sc, &inputs, seed).unwrap();
            let out = verify_counting_pipeline(&sc, &inputs, &t.to_bytes()).unwrap();
            assert_eq!(out.output, brute_force_total(&sc, &inputs), "seed {seed}");
        }
    }

    #[test]
    fn counting_query_pipeline_counts() {
        // B = 16 copies of a 3-layer predicate, aggregated by the tree
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let base = random_base_circuit(&[0, 1, 2], 3, &mut rng);
        let sc = SuperCircuit::new(base, 16);
        let inputs = random_inputs(16, 8, &mut rng);
        let (t, _) = prove_counting_pipeline(&sc, &inputs, 7).unwrap();
        let out = verify_counting_pipeline(&sc, &inputs, &t.to_bytes()).unwrap();
        assert_eq!(out.output, brute_force_total(&sc, &inputs));
    }

    #[test]
    fn preprocessing_is_independent_of_copy_count() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let base = random_base_circuit(&[1, 2], 2, &mut rng);
        let mut visits = Vec::new();
        for b in [2usize, 8, 64] {
            let sc = SuperCircuit::new(base.clone(), b);
            let inputs = random_inputs(b, 4, &mut rng);
            let (t, _) = prove_counting_pipeline(&sc, &inputs, b as u64).unwrap();
            let out = verify_counting_pipeline(&sc, &inputs, &t.to_bytes()).unwrap();
            visits.push(out.gate_visits);
        }
        assert_eq!(visits[0], visits[1]);
        assert_eq!(visits[1], visits[2]);
    }

    #[test]
    fn perturbed_copy_input_rejects() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for seed in 0..20u64 {
            let base = random_base_circuit(&[0, 1], 2, &mut rng);
            let sc = SuperCircuit::new(base, 4);
            let inputs = random_inputs(4, 4, &mut rng);
            let (t, _) = prove_counting_pipeline(&sc, &inputs, seed).unwrap();
            // the verifier's view of one copy differs from what was proved
            let mut tampered = inputs.clone();
            tampered[(seed as usize) % 4][0] += fe(1);
            assert!(
                verify_counting_pipeline(&sc, &tampered, &t.to_bytes()).is_err(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn corrupted_h_rejects() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let base = random_base_circuit(&[0, 1], 2, &mut rng);
        let sc = SuperCircuit::new(base, 4);
        let inputs = random_inputs(4, 4, &mut rng);
        let (t, _) = prove_counting_pipeline(&sc, &inputs, 3).unwrap();
        verify_counting_pipeline(&sc, &inputs, &t.to_bytes()).unwrap();
        let mut rejected = 0;
        let mut trials = 0;
        for round in 1..t.rounds.len() {
            for slot in 0..t.rounds[round].message.len() {
                let mut bad = t.clone();
                bad.rounds[round].message[slot] += fe(1);
                trials += 1;
                if verify_counting_pipeline(&sc, &inputs, &bad.to_bytes()).is_err() {
                    rejected += 1;
                }
            }
        }
        assert_eq!(rejected, trials);
    }

    #[test]
    fn single_copy_agrees_with_circuit_protocol() {
        // B = 1 collapses to a standard layer reduction; the two protocol
        // families must agree on verdicts for shared instances.
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for seed in 0..10u64 {
            let regular = build_binary_tree(8, GateKind::Add).unwrap();
            let explicit = to_explicit(&regular);
            let input: Vec<_> = (0..8).map(|_| FieldElement::random(&mut rng)).collect();

            let sc = SuperCircuit::new(explicit, 1);
            let (t, _) = prove_counting_pipeline(&sc, &[input.clone()], seed).unwrap();
            let dp_ok = verify_counting_pipeline(&sc, &[input.clone()], &t.to_bytes()).is_ok();

            let values = regular.evaluate(&input).unwrap();
            let gkr_ok = crate::gkr::verify_circuit(
                &regular,
                &input,
                &values[0].clone(),
                &crate::gkr::GkrPlan::per_layer(&regular),
                ProtocolId::TreeCircuit,
                seed,
                crate::gkr::GkrOptions::default(),
            )
            .is_ok();
            assert_eq!(dp_ok, gkr_ok);
            assert!(dp_ok);

            // and both reject a tampered input on the verifier side
            let mut bad = input.clone();
            bad[0] += fe(1);
            let dp_bad = verify_counting_pipeline(&sc, &[bad.clone()], &t.to_bytes()).is_ok();
            assert!(!dp_bad);
        }
    }

    #[test]
    fn prover_work_scales_linearly_in_copies() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let base = random_base_circuit(&[2, 3], 3, &mut rng);
        let mut mults = Vec::new();
        for b in [16usize, 32] {
            let sc = SuperCircuit::new(base.clone(), b);
            let inputs = random_inputs(b, 8, &mut rng);
            let (_, counter) = prove_counting_pipeline(&sc, &inputs, 1).unwrap();
            mults.push(counter.mults as f64);
        }
        let ratio = mults[1] / mults[0];
        assert!(
            (1.7..=2.4).contains(&ratio),
            "B=32 vs B=16 work ratio {ratio}"
        );
    }

    #[test]
    fn reduction_continuation_matches_direct_mle() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let base = random_base_circuit(&[1, 2], 2, &mut rng);
        let sc = SuperCircuit::new(base, 4);
        let inputs = random_inputs(4, 4, &mut rng);
        let star = sc.evaluate(&inputs).unwrap();
        let b = sc.copy_bits();
        let z: Vec<_> = (0..1 + b)
            .map(|_| FieldElement::random_nonzero(&mut rng))
            .collect();
        let claim = Claim {
            point: z.clone(),
            value: eval_mle_table(&star[0], &z),
        };
        let mut session = ProveSession::new(ProtocolId::DataParallel, 1);
        session.begin_section(2);
        let mut counter = WorkCounter::new();
        let conts = prove_dataparallel_layer(
            &sc.base,
            0,
            b,
            &claim,
            &star[1],
            &mut session,
            &mut counter,
            false,
        );
        assert_eq!(conts.len(), 1);
        assert_eq!(conts[0].value, eval_mle_table(&star[1], &conts[0].point));
    }
}
