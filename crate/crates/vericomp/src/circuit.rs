//! Layered arithmetic circuits with regular-wiring descriptors.
//!
//! A circuit is a stack of fan-in-<=2 layers; wires only connect adjacent
//! layers and every layer size is a power of two. Layer 0 is the output
//! layer and the last layer reads the input vector. Wiring is described
//! either by an explicit gate list (arbitrary circuits, used by the
//! data-parallel protocol) or by a `RegularWiring` descriptor: a constant
//! number of label bits select a class, and within a class every in-neighbor
//! label bit is a constant or copies/negates a single gate-label bit. The
//! descriptor is what lets the prover bind one variable per round against
//! geometrically shrinking tables.
//!
//! Gate labels are integers whose bit 1 is the most significant bit,
//! matching the variable convention of the `mle` module.

use crate::field::{FieldElement, FieldError};
use crate::mle::chi;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    Add,
    Mul,
}

/// One gate: type, in-neighbor labels at the layer below, and a fan-in flag.
/// Fan-in-1 gates copy their first in-neighbor; `in2` mirrors `in1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub in1: usize,
    pub in2: usize,
    pub fan_in_one: bool,
}

/// A stream update (i, delta); the aggregate of all updates is the
/// frequency vector that feeds the circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamUpdate {
    pub index: u64,
    pub delta: i64,
}

impl StreamUpdate {
    pub fn new(index: u64, delta: i64) -> Self {
        StreamUpdate { index, delta }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CircuitError {
    #[error("input length {got} does not match circuit input size {want}")]
    InputLength { got: usize, want: usize },
    #[error("size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("stream index {0} out of range")]
    IndexOutOfRange(u64),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Dependency of one in-neighbor label bit on the gate label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDep {
    Const(bool),
    /// Copies gate-label bit `bit` (1-based, 1 = MSB), negated if `negated`.
    Var { bit: usize, negated: bool },
}

impl BitDep {
    pub fn var(bit: usize) -> Self {
        BitDep::Var {
            bit,
            negated: false,
        }
    }

    fn eval_bool(self, label: usize, in_vars: usize) -> bool {
        match self {
            BitDep::Const(b) => b,
            BitDep::Var { bit, negated } => {
                let v = (label >> (in_vars - bit)) & 1 == 1;
                v ^ negated
            }
        }
    }

    fn eval_field(self, point: &[FieldElement]) -> FieldElement {
        match self {
            BitDep::Const(false) => FieldElement::ZERO,
            BitDep::Const(true) => FieldElement::ONE,
            BitDep::Var { bit, negated } => {
                let x = point[bit - 1];
                if negated {
                    FieldElement::ONE - x
                } else {
                    x
                }
            }
        }
    }
}

/// Gate type within a class: constant, or determined by one label bit
/// (bit value 1 selects Mul).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TypeDep {
    Const(GateKind),
    Var { bit: usize, negated: bool },
}

/// One wiring class: the descriptor restricted to a fixed assignment of the
/// special label bits.
#[derive(Clone, Debug)]
pub struct WiringClass {
    pub fan_in_one: bool,
    pub gate_type: TypeDep,
    pub in1: Vec<BitDep>,
    /// Ignored (mirrors in1) when fan_in_one.
    pub in2: Vec<BitDep>,
}

/// Regular wiring: outside the O(1) special-bit set, every in-neighbor label
/// bit depends on at most one gate-label bit.
#[derive(Clone, Debug)]
pub struct RegularWiring {
    pub in_vars: usize,
    pub out_vars: usize,
    /// Special label bits (1-based positions, sorted). Capped at 8.
    pub special_bits: Vec<usize>,
    /// 2^{|special_bits|} classes; the first special bit is the class
    /// index's most significant bit.
    pub classes: Vec<WiringClass>,
    /// Output bits where in1 and in2 may differ, when the two in-neighbor
    /// functions are similar; None marks a dissimilar layer.
    pub similar: Option<Vec<usize>>,
}

pub const MAX_SPECIAL_BITS: usize = 8;

impl RegularWiring {
    /// Single-class descriptor with no special bits.
    pub fn uniform(
        in_vars: usize,
        out_vars: usize,
        class: WiringClass,
        similar: Option<Vec<usize>>,
    ) -> Self {
        RegularWiring {
            in_vars,
            out_vars,
            special_bits: Vec::new(),
            classes: vec![class],
            similar,
        }
    }

    pub fn class_of(&self, label: usize) -> usize {
        let mut rho = 0usize;
        for &bit in &self.special_bits {
            rho = (rho << 1) | ((label >> (self.in_vars - bit)) & 1);
        }
        rho
    }

    /// The explicit gate a label denotes; the boolean ground truth checked
    /// against builder arithmetic.
    pub fn gate_at(&self, label: usize) -> Gate {
        let class = &self.classes[self.class_of(label)];
        let assemble = |deps: &[BitDep]| -> usize {
            let mut out = 0usize;
            for dep in deps {
                out = (out << 1) | dep.eval_bool(label, self.in_vars) as usize;
            }
            out
        };
        let in1 = assemble(&class.in1);
        let in2 = if class.fan_in_one {
            in1
        } else {
            assemble(&class.in2)
        };
        let kind = match class.gate_type {
            TypeDep::Const(k) => k,
            TypeDep::Var { bit, negated } => {
                let v = (label >> (self.in_vars - bit)) & 1 == 1;
                if v ^ negated {
                    GateKind::Mul
                } else {
                    GateKind::Add
                }
            }
        };
        Gate {
            kind,
            in1,
            in2,
            fan_in_one: class.fan_in_one,
        }
    }

    /// The multilinear in-neighbor map of a class evaluated at a field
    /// point: each output coordinate is a constant or +/- one coordinate.
    pub fn in_point(&self, class: usize, slot: usize, point: &[FieldElement]) -> Vec<FieldElement> {
        let c = &self.classes[class];
        let deps = if slot == 0 || c.fan_in_one {
            &c.in1
        } else {
            &c.in2
        };
        deps.iter().map(|d| d.eval_field(point)).collect()
    }

    /// typẽ of a class at a field point (0 = add, 1 = mul).
    pub fn type_value(&self, class: usize, point: &[FieldElement]) -> FieldElement {
        match self.classes[class].gate_type {
            TypeDep::Const(GateKind::Add) => FieldElement::ZERO,
            TypeDep::Const(GateKind::Mul) => FieldElement::ONE,
            TypeDep::Var { bit, negated } => {
                let x = point[bit - 1];
                if negated {
                    FieldElement::ONE - x
                } else {
                    x
                }
            }
        }
    }

    /// Indicator MLE of a class at a field point over the special bits.
    pub fn class_indicator(&self, class: usize, point: &[FieldElement]) -> FieldElement {
        let mut acc = FieldElement::ONE;
        for (i, &bit) in self.special_bits.iter().enumerate() {
            let want = (class >> (self.special_bits.len() - 1 - i)) & 1;
            acc = acc * chi(want as u64, point[bit - 1]);
        }
        acc
    }

    /// Per-variable degree of g_z = beta * W for this layer; the verifier's
    /// round-message length bound is degrees()[j-1] + 1.
    pub fn degrees(&self) -> Vec<usize> {
        let mut degs = vec![0usize; self.in_vars];
        for j in 1..=self.in_vars {
            let mut w_deg = 0usize;
            for class in &self.classes {
                let count = |deps: &[BitDep]| {
                    deps.iter()
                        .filter(|d| matches!(d, BitDep::Var { bit, .. } if *bit == j))
                        .count()
                };
                let a1 = count(&class.in1);
                let a2 = if class.fan_in_one {
                    0
                } else {
                    count(&class.in2)
                };
                let t_dep = matches!(class.gate_type, TypeDep::Var { bit, .. } if bit == j) as usize;
                let body = if class.fan_in_one {
                    a1
                } else {
                    match class.gate_type {
                        TypeDep::Const(GateKind::Add) => a1.max(a2),
                        TypeDep::Const(GateKind::Mul) => a1 + a2,
                        TypeDep::Var { .. } => a1 + a2,
                    }
                };
                let s_dep = self.special_bits.contains(&j) as usize;
                w_deg = w_deg.max(s_dep + t_dep + body);
            }
            degs[j - 1] = 1 + w_deg; // beta contributes 1 in every variable
        }
        degs
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        assert!(self.special_bits.len() <= MAX_SPECIAL_BITS);
        assert_eq!(self.classes.len(), 1 << self.special_bits.len());
        assert!(self.special_bits.windows(2).all(|w| w[0] < w[1]));
        for class in &self.classes {
            assert_eq!(class.in1.len(), self.out_vars);
            if !class.fan_in_one {
                assert_eq!(class.in2.len(), self.out_vars);
            }
            for deps in [&class.in1, &class.in2] {
                for j in 1..=self.in_vars {
                    let affected = deps
                        .iter()
                        .filter(|d| matches!(d, BitDep::Var { bit, .. } if *bit == j))
                        .count();
                    assert!(affected <= MAX_SPECIAL_BITS, "input bit {j} fans out too far");
                }
            }
        }
        if let Some(t) = &self.similar {
            for class in &self.classes {
                if class.fan_in_one {
                    continue;
                }
                for (pos, (d1, d2)) in class.in1.iter().zip(&class.in2).enumerate() {
                    if !t.contains(&(pos + 1)) {
                        assert_eq!(d1, d2, "similar layers must agree outside T");
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum LayerWiring {
    Regular(RegularWiring),
    Explicit {
        gates: Vec<Gate>,
        next_log_size: usize,
    },
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub log_size: usize,
    pub wiring: LayerWiring,
}

impl Layer {
    pub fn size(&self) -> usize {
        1 << self.log_size
    }

    pub fn next_log_size(&self) -> usize {
        match &self.wiring {
            LayerWiring::Regular(w) => w.out_vars,
            LayerWiring::Explicit { next_log_size, .. } => *next_log_size,
        }
    }

    pub fn gate(&self, label: usize) -> Gate {
        match &self.wiring {
            LayerWiring::Regular(w) => w.gate_at(label),
            LayerWiring::Explicit { gates, .. } => gates[label],
        }
    }

    pub fn regular(&self) -> Option<&RegularWiring> {
        match &self.wiring {
            LayerWiring::Regular(w) => Some(w),
            LayerWiring::Explicit { .. } => None,
        }
    }
}

/// Layered circuit; `layers[0]` is the output layer and the final layer's
/// in-neighbors index into the input vector.
#[derive(Clone, Debug)]
pub struct LayeredCircuit {
    pub layers: Vec<Layer>,
    pub input_log_size: usize,
}

impl LayeredCircuit {
    pub fn input_size(&self) -> usize {
        1 << self.input_log_size
    }

    pub fn output_size(&self) -> usize {
        1 << self.layers[0].log_size
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Total gate count over all layers (input not counted).
    pub fn size(&self) -> usize {
        self.layers.iter().map(Layer::size).sum()
    }

    pub fn check_shape(&self) {
        for i in 0..self.layers.len() {
            let below = if i + 1 == self.layers.len() {
                self.input_log_size
            } else {
                self.layers[i + 1].log_size
            };
            assert_eq!(
                self.layers[i].next_log_size(),
                below,
                "layer {i} wiring does not match the layer below"
            );
            if let Some(w) = self.layers[i].regular() {
                assert_eq!(w.in_vars, self.layers[i].log_size);
                w.validate().unwrap();
            }
        }
    }

    /// Bottom-up evaluation; `values[i]` holds layer i's gate values.
    pub fn evaluate(&self, input: &[FieldElement]) -> Result<Vec<Vec<FieldElement>>, CircuitError> {
        if input.len() != self.input_size() {
            return Err(CircuitError::InputLength {
                got: input.len(),
                want: self.input_size(),
            });
        }
        let depth = self.layers.len();
        let mut values: Vec<Vec<FieldElement>> = vec![Vec::new(); depth];
        for i in (0..depth).rev() {
            let layer = &self.layers[i];
            let vals = {
                let below: &[FieldElement] = if i + 1 == depth {
                    input
                } else {
                    &values[i + 1]
                };
                let mut vals = Vec::with_capacity(layer.size());
                for label in 0..layer.size() {
                    let g = layer.gate(label);
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
                vals
            };
            values[i] = vals;
        }
        Ok(values)
    }

    /// MLEs of the layer's wiring predicates at (p*, w1*, w2*), computed by
    /// enumerating the gates in O(S_i * (s_i + 2 s_{i+1})). Returns
    /// (add~, mult~). `gate_visits` counts enumerated gates.
    pub fn wiring_predicate_eval(
        &self,
        layer_idx: usize,
        point: &[FieldElement],
        gate_visits: &mut u64,
    ) -> (FieldElement, FieldElement) {
        let layer = &self.layers[layer_idx];
        let s_i = layer.log_size;
        let s_next = layer.next_log_size();
        assert_eq!(point.len(), s_i + 2 * s_next);
        let (p_star, rest) = point.split_at(s_i);
        let (w1_star, w2_star) = rest.split_at(s_next);

        // chi tables over the three blocks make each gate an O(1) lookup
        let tp = crate::mle::build_chi_table(p_star);
        let t1 = crate::mle::build_chi_table(w1_star);
        let t2 = crate::mle::build_chi_table(w2_star);

        let mut add_acc = FieldElement::ZERO;
        let mut mult_acc = FieldElement::ZERO;
        for label in 0..layer.size() {
            let g = layer.gate(label);
            assert!(
                !g.fan_in_one,
                "wiring predicates are defined for fan-in-2 layers only"
            );
            *gate_visits += 1;
            let w = tp.get(label) * t1.get(g.in1) * t2.get(g.in2);
            match g.kind {
                GateKind::Add => add_acc += w,
                GateKind::Mul => mult_acc += w,
            }
        }
        (add_acc, mult_acc)
    }
}

/// Aggregates a stream of (index, delta) updates into the dense frequency
/// vector of length n. Order-insensitive; duplicate indices accumulate.
pub fn ingest_stream(updates: &[StreamUpdate], n: usize) -> Result<Vec<FieldElement>, CircuitError> {
    let mut a = vec![FieldElement::ZERO; n];
    for u in updates {
        if u.index >= n as u64 {
            return Err(CircuitError::IndexOutOfRange(u.index));
        }
        a[u.index as usize] += FieldElement::from_signed(u.delta)?;
    }
    Ok(a)
}

fn identity_deps(count: usize) -> Vec<BitDep> {
    (1..=count).map(BitDep::var).collect()
}

/// One level of a binary tree: gate p reads (p, 0) and (p, 1) below.
pub fn binary_tree_layer(log_size: usize, op: GateKind) -> Layer {
    let mut in1 = identity_deps(log_size);
    in1.push(BitDep::Const(false));
    let mut in2 = identity_deps(log_size);
    in2.push(BitDep::Const(true));
    let class = WiringClass {
        fan_in_one: false,
        gate_type: TypeDep::Const(op),
        in1,
        in2,
    };
    Layer {
        log_size,
        wiring: LayerWiring::Regular(RegularWiring::uniform(
            log_size,
            log_size + 1,
            class,
            Some(vec![log_size + 1]),
        )),
    }
}

/// Full binary tree over n = 2^k inputs: k layers, single output.
pub fn build_binary_tree(n: usize, op: GateKind) -> Result<LayeredCircuit, CircuitError> {
    if !n.is_power_of_two() || n < 2 {
        return Err(CircuitError::NotPowerOfTwo(n));
    }
    let k = n.trailing_zeros() as usize;
    let layers = (0..k).map(|d| binary_tree_layer(d, op)).collect();
    let c = LayeredCircuit {
        layers,
        input_log_size: k,
    };
    c.check_shape();
    Ok(c)
}

/// Squaring layer: gate p multiplies in-neighbor p by itself.
fn squaring_layer(log_size: usize) -> Layer {
    let class = WiringClass {
        fan_in_one: false,
        gate_type: TypeDep::Const(GateKind::Mul),
        in1: identity_deps(log_size),
        in2: identity_deps(log_size),
    };
    Layer {
        log_size,
        wiring: LayerWiring::Regular(RegularWiring::uniform(
            log_size,
            log_size,
            class,
            Some(vec![]),
        )),
    }
}

/// Copy layer extracting the odd gates below: gate p reads (p, 1).
fn selection_layer(log_size: usize) -> Layer {
    let mut in1 = identity_deps(log_size);
    in1.push(BitDep::Const(true));
    let class = WiringClass {
        fan_in_one: true,
        gate_type: TypeDep::Const(GateKind::Add),
        in1: in1.clone(),
        in2: in1,
    };
    Layer {
        log_size,
        wiring: LayerWiring::Regular(RegularWiring::uniform(
            log_size,
            log_size + 1,
            class,
            Some(vec![]),
        )),
    }
}

/// Square-and-accumulate layer of the Fermat chain (2n gates over 2n):
/// even gate p reads (p_-, 0) twice; odd gate p reads (p_-, 1) and (p_-, 0).
fn flt_product_layer(log_size: usize) -> Layer {
    let s = log_size;
    let mut in1 = identity_deps(s - 1);
    in1.push(BitDep::var(s));
    let mut in2 = identity_deps(s - 1);
    in2.push(BitDep::Const(false));
    let class = WiringClass {
        fan_in_one: false,
        gate_type: TypeDep::Const(GateKind::Mul),
        in1,
        in2,
    };
    Layer {
        log_size: s,
        wiring: LayerWiring::Regular(RegularWiring::uniform(s, s, class, Some(vec![s]))),
    }
}

/// Doubling layer of the Fermat chain (2n gates over n): even gate p squares
/// gate p/2; odd gate p copies gate (p-1)/2.
fn flt_spread_layer(log_size: usize) -> Layer {
    let s = log_size;
    let even = WiringClass {
        fan_in_one: false,
        gate_type: TypeDep::Const(GateKind::Mul),
        in1: identity_deps(s - 1),
        in2: identity_deps(s - 1),
    };
    let odd = WiringClass {
        fan_in_one: true,
        gate_type: TypeDep::Const(GateKind::Mul),
        in1: identity_deps(s - 1),
        in2: identity_deps(s - 1),
    };
    Layer {
        log_size: s,
        wiring: LayerWiring::Regular(RegularWiring {
            in_vars: s,
            out_vars: s - 1,
            special_bits: vec![s],
            classes: vec![even, odd],
            similar: Some(vec![]),
        }),
    }
}

/// Number of square-and-accumulate levels in the a^(q-1) chain: the chain
/// culminates at exponent 2^61 - 2, which takes 59 product layers above the
/// spread and squaring layers.
pub const FLT_PRODUCT_LAYERS: usize = 59;

/// Pushes the Fermat-little-theorem block mapping n values a_i to the 2n-gate
/// layer whose odd gates hold a_i^(q-1). Top layer first.
fn push_flt_block(layers: &mut Vec<Layer>, log_n: usize) {
    for _ in 0..FLT_PRODUCT_LAYERS {
        layers.push(flt_product_layer(log_n + 1));
    }
    layers.push(flt_spread_layer(log_n + 1));
    layers.push(squaring_layer(log_n));
}

/// Circuit counting the nonzero entries of a length-n frequency vector by
/// summing a_i^(q-1): an addition tree over a selection of the Fermat-chain
/// running products.
pub fn build_distinct_circuit(n: usize) -> Result<LayeredCircuit, CircuitError> {
    if !n.is_power_of_two() || n < 2 {
        return Err(CircuitError::NotPowerOfTwo(n));
    }
    let log_n = n.trailing_zeros() as usize;
    let mut layers = Vec::new();
    for d in 0..log_n {
        layers.push(binary_tree_layer(d, GateKind::Add));
    }
    layers.push(selection_layer(log_n));
    push_flt_block(&mut layers, log_n);
    let c = LayeredCircuit {
        layers,
        input_log_size: log_n,
    };
    c.check_shape();
    Ok(c)
}

/// Naive n x n matrix-multiplication circuit: input gate (0,i,j) holds
/// A[i][j] and (1,i,j) holds B[i][j]; the mul layer computes A[i][k]*B[k][j]
/// at gate (i,j,k) and an addition tree sums over k.
pub fn build_matmult_circuit(n: usize) -> Result<LayeredCircuit, CircuitError> {
    if !n.is_power_of_two() || n < 2 {
        return Err(CircuitError::NotPowerOfTwo(n));
    }
    let l = n.trailing_zeros() as usize;
    let mut layers = Vec::new();
    for d in 0..l {
        layers.push(binary_tree_layer(2 * l + d, GateKind::Add));
    }
    // gate (i, j, k): in1 = (0, i, k), in2 = (1, k, j); regular, not similar
    let mut in1 = vec![BitDep::Const(false)];
    in1.extend((1..=l).map(BitDep::var)); // i
    in1.extend((2 * l + 1..=3 * l).map(BitDep::var)); // k
    let mut in2 = vec![BitDep::Const(true)];
    in2.extend((2 * l + 1..=3 * l).map(BitDep::var)); // k
    in2.extend((l + 1..=2 * l).map(BitDep::var)); // j
    let mul_class = WiringClass {
        fan_in_one: false,
        gate_type: TypeDep::Const(GateKind::Mul),
        in1,
        in2,
    };
    layers.push(Layer {
        log_size: 3 * l,
        wiring: LayerWiring::Regular(RegularWiring::uniform(3 * l, 2 * l + 1, mul_class, None)),
    });
    let c = LayeredCircuit {
        layers,
        input_log_size: 2 * l + 1,
    };
    c.check_shape();
    Ok(c)
}

/// Packs two n x n matrices into the matmult circuit's input vector.
pub fn matmult_input(a: &[FieldElement], b: &[FieldElement], n: usize) -> Vec<FieldElement> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * n);
    let mut input = Vec::with_capacity(2 * n * n);
    input.extend_from_slice(a);
    input.extend_from_slice(b);
    input
}

/// The circuit fragment above the pattern-matching subtraction layer:
/// squaring, an addition tree over the pattern index, the Fermat block, and
/// the final addition tree. Its "input" is the nm-vector of subtraction
/// values t_{(i+k) mod n} - p_k at gate (i, k).
pub fn build_patternmatch_layers(n: usize, m: usize) -> Result<LayeredCircuit, CircuitError> {
    if !n.is_power_of_two() || n < 2 {
        return Err(CircuitError::NotPowerOfTwo(n));
    }
    if !m.is_power_of_two() || m < 2 {
        return Err(CircuitError::NotPowerOfTwo(m));
    }
    let log_n = n.trailing_zeros() as usize;
    let log_m = m.trailing_zeros() as usize;
    let mut layers = Vec::new();
    for d in 0..log_n {
        layers.push(binary_tree_layer(d, GateKind::Add));
    }
    layers.push(selection_layer(log_n));
    push_flt_block(&mut layers, log_n);
    for d in 0..log_m {
        layers.push(binary_tree_layer(log_n + d, GateKind::Add));
    }
    layers.push(squaring_layer(log_n + log_m));
    let c = LayeredCircuit {
        layers,
        input_log_size: log_n + log_m,
    };
    c.check_shape();
    Ok(c)
}
