//! Matrix-multiplication verification without circuit evaluation: a single
//! log n-round sum-check on g(p3) = A~(r1, p3) * B~(p3, r2), plus the
//! Freivalds baseline and chained verification of repeated squaring.
//!
//! The prover may compute the claimed product with any algorithm; proving
//! costs an additive O(n^2) field operations on top, and with the in-place
//! mode the working tables fold inside the input matrices so only O(1)
//! extra elements are ever allocated. The verifier streams A, B, and the
//! claimed product, keeping O(log n) field elements.

use crate::counters::WorkCounter;
use crate::field::FieldElement;
use crate::gkr::line_through;
use crate::mle::{chi, eval_mle_table, EvalTable};
use crate::sumcheck::{interpolate_at, prove_rounds, verify_rounds, PointOracle, RoundMessage, RoundProver};
use crate::transcript::{Draw, ProtocolId, ProveSession, Rejection, Transcript, VerifySession};

/// Row-major square matrix over the field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<FieldElement>,
}

impl Matrix {
    pub fn new(n: usize, data: Vec<FieldElement>) -> Self {
        assert!(n.is_power_of_two());
        assert_eq!(data.len(), n * n);
        Matrix { n, data }
    }

    pub fn zero(n: usize) -> Self {
        Matrix::new(n, vec![FieldElement::ZERO; n * n])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zero(n);
        for i in 0..n {
            m.data[i * n + i] = FieldElement::ONE;
        }
        m
    }

    pub fn random<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Matrix::new(n, (0..n * n).map(|_| FieldElement::random(rng)).collect())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> FieldElement {
        self.data[i * self.n + j]
    }

    pub fn log_n(&self) -> usize {
        self.n.trailing_zeros() as usize
    }

    /// MLE of the matrix at a 2 log n point, one streaming pass.
    pub fn mle_streaming(&self, point: &[FieldElement]) -> FieldElement {
        let l = self.log_n();
        assert_eq!(point.len(), 2 * l);
        let mut acc = FieldElement::ZERO;
        for (idx, &v) in self.data.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            let mut w = v;
            for (k, &pk) in point.iter().enumerate() {
                w = w * chi(((idx >> (2 * l - 1 - k)) & 1) as u64, pk);
            }
            acc += w;
        }
        acc
    }
}

/// Schoolbook product; the unverifiable baseline.
pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.n;
    assert_eq!(b.n, n);
    let mut d = Matrix::zero(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a.get(i, k);
            if aik.is_zero() {
                continue;
            }
            for j in 0..n {
                d.data[i * n + j] += aik * b.get(k, j);
            }
        }
    }
    d
}

/// Cache-blocked product; a second unverifiable algorithm used to show the
/// protocol does not care how the prover found the answer.
pub fn blocked_matmul(a: &Matrix, b: &Matrix, block: usize) -> Matrix {
    let n = a.n;
    assert_eq!(b.n, n);
    let mut d = Matrix::zero(n);
    let bs = block.max(1);
    for ii in (0..n).step_by(bs) {
        for kk in (0..n).step_by(bs) {
            for jj in (0..n).step_by(bs) {
                for i in ii..(ii + bs).min(n) {
                    for k in kk..(kk + bs).min(n) {
                        let aik = a.get(i, k);
                        for j in jj..(jj + bs).min(n) {
                            d.data[i * n + j] += aik * b.get(k, j);
                        }
                    }
                }
            }
        }
    }
    d
}

/// Brute-force oracle for g(p3) = A~(r1, p3) * B~(p3, r2).
pub struct MatMulOracle<'a> {
    pub a: &'a Matrix,
    pub b: &'a Matrix,
    pub r1: Vec<FieldElement>,
    pub r2: Vec<FieldElement>,
}

impl PointOracle for MatMulOracle<'_> {
    fn num_vars(&self) -> usize {
        self.a.log_n()
    }
    fn degree(&self, _var: usize) -> usize {
        2
    }
    fn eval(&mut self, p3: &[FieldElement]) -> FieldElement {
        let mut pa = self.r1.clone();
        pa.extend_from_slice(p3);
        let mut pb = p3.to_vec();
        pb.extend_from_slice(&self.r2);
        eval_mle_table(&self.a.data, &pa) * eval_mle_table(&self.b.data, &pb)
    }
}

/// Sum-check prover over the two restricted tables T_A[k] = A~(r1, k) and
/// T_B[k] = B~(k, r2); degree 2 per round, the evaluation at 1 derived from
/// the running claim.
pub struct MatMulProver {
    ta: EvalTable,
    tb: EvalTable,
    running: FieldElement,
    last: Option<RoundMessage>,
    pub counter: WorkCounter,
}

impl MatMulProver {
    /// Restricts fresh tables out of borrowed matrices (O(n) extra space).
    pub fn new(a: &Matrix, b: &Matrix, r1: &[FieldElement], r2: &[FieldElement]) -> Self {
        let n = a.n;
        let mut counter = WorkCounter::new();
        let chi1 = build_chi_table_counted_alloc(r1, &mut counter);
        let chi2 = build_chi_table_counted_alloc(r2, &mut counter);
        let mut ta = vec![FieldElement::ZERO; n];
        let mut tb = vec![FieldElement::ZERO; n];
        counter.allocated += 2 * n as u64;
        for i in 0..n {
            let w = chi1.get(i);
            for k in 0..n {
                ta[k] += w * a.get(i, k);
            }
        }
        for k in 0..n {
            let row = &b.data[k * n..(k + 1) * n];
            let mut acc = FieldElement::ZERO;
            for (j, &v) in row.iter().enumerate() {
                acc += v * chi2.get(j);
            }
            tb[k] = acc;
        }
        counter.mults += 2 * (n as u64) * (n as u64);
        let mut p = MatMulProver {
            ta: EvalTable::from_values(ta),
            tb: EvalTable::from_values(tb),
            running: FieldElement::ZERO,
            last: None,
            counter,
        };
        p.running = p.true_sum();
        p
    }

    /// Folds the tables inside the matrices' own storage: the row axes of A
    /// bind against r1 and the column axes of B against r2, low bit first.
    /// Only O(1) extra field elements are allocated.
    pub fn new_in_place(mut a: Matrix, mut b: Matrix, r1: &[FieldElement], r2: &[FieldElement]) -> Self {
        let n = a.n;
        let l = a.log_n();
        let mut counter = WorkCounter::new();
        // bind A's row bits, most significant first: contiguous halving
        let mut len = n * n;
        for &r in r1 {
            let half = len / 2;
            let one_minus = FieldElement::ONE - r;
            for x in 0..half {
                a.data[x] = one_minus * a.data[x] + r * a.data[half + x];
            }
            len = half;
            counter.mults += 2 * half as u64;
        }
        a.data.truncate(n);
        // bind B's column bits, least significant first: pairwise compaction
        let mut cols = n;
        for pass in 0..l {
            let r = r2[l - 1 - pass];
            let one_minus = FieldElement::ONE - r;
            let half = cols / 2;
            for k in 0..n {
                for y in 0..half {
                    b.data[k * half + y] =
                        one_minus * b.data[k * cols + 2 * y] + r * b.data[k * cols + 2 * y + 1];
                }
            }
            counter.mults += 2 * (n * half) as u64;
            cols = half;
            b.data.truncate(n * cols.max(1));
        }
        let mut p = MatMulProver {
            ta: EvalTable::from_values(a.data),
            tb: EvalTable::from_values(b.data),
            running: FieldElement::ZERO,
            last: None,
            counter,
        };
        p.running = p.true_sum();
        p
    }

    fn true_sum(&mut self) -> FieldElement {
        let mut acc = FieldElement::ZERO;
        for k in 0..self.ta.len() {
            acc += self.ta.get(k) * self.tb.get(k);
        }
        self.counter.mults += self.ta.len() as u64;
        acc
    }
}

impl RoundProver for MatMulProver {
    fn num_vars(&self) -> usize {
        self.ta.num_vars()
    }

    fn degree(&self, _round: usize) -> usize {
        2
    }

    fn round_message(&mut self) -> RoundMessage {
        let half = self.ta.len() / 2;
        let mut at_zero = FieldElement::ZERO;
        let mut at_two = FieldElement::ZERO;
        for x in 0..half {
            let (a0, a1) = (self.ta.get(x), self.ta.get(half + x));
            let (b0, b1) = (self.tb.get(x), self.tb.get(half + x));
            at_zero += a0 * b0;
            at_two += (a1 + a1 - a0) * (b1 + b1 - b0);
        }
        self.counter.mults += 2 * half as u64;
        self.counter.terms += 2 * half as u64;
        let msg = RoundMessage {
            evals: vec![at_zero, self.running - at_zero, at_two],
        };
        self.last = Some(msg.clone());
        msg
    }

    fn bind(&mut self, r: FieldElement) {
        self.counter.mults += 2 * self.ta.len() as u64;
        self.ta.bind(r);
        self.tb.bind(r);
        self.running = interpolate_at(&self.last.as_ref().unwrap().evals, r);
    }
}

fn build_chi_table_counted_alloc(w: &[FieldElement], counter: &mut WorkCounter) -> EvalTable {
    counter.allocated += 1u64 << w.len();
    let t = crate::mle::build_chi_table_counted(w, &mut counter.mults);
    t
}

/// Outcome of a verified multiplication: the opened product plus transcript
/// accounting.
#[derive(Clone, Debug)]
pub struct MatMulOutcome {
    pub product: Vec<FieldElement>,
    pub rounds: usize,
    pub comm_bytes: usize,
}

/// Proves D* = A * B given the claimed product, whatever algorithm produced
/// it. The default keeps the caller's matrices intact.
pub fn prove_matmul(a: &Matrix, b: &Matrix, d_claimed: &Matrix, seed: u64) -> (Transcript, WorkCounter) {
    prove_matmul_impl(MatMulSource::Borrowed(a, b), d_claimed, seed)
}

/// In-place variant: folds the sum-check tables inside the matrices' own
/// buffers, so the prover allocates only O(log n) extra elements.
pub fn prove_matmul_in_place(a: Matrix, b: Matrix, d_claimed: &Matrix, seed: u64) -> (Transcript, WorkCounter) {
    prove_matmul_impl(MatMulSource::Owned(a, b), d_claimed, seed)
}

enum MatMulSource<'a> {
    Borrowed(&'a Matrix, &'a Matrix),
    Owned(Matrix, Matrix),
}

fn prove_matmul_impl(src: MatMulSource<'_>, d_claimed: &Matrix, seed: u64) -> (Transcript, WorkCounter) {
    let n = d_claimed.n;
    let l = d_claimed.log_n();
    let mut session = ProveSession::new(ProtocolId::MatMulSpecial, seed);
    session.send(d_claimed.data.clone());
    let rs = session.respond(Draw::Uniform, 2 * l);
    let (r1, r2) = rs.split_at(l);
    let mut prover = match src {
        MatMulSource::Borrowed(a, b) => {
            assert_eq!(a.n, n);
            assert_eq!(b.n, n);
            MatMulProver::new(a, b, r1, r2)
        }
        MatMulSource::Owned(a, b) => {
            assert_eq!(a.n, n);
            assert_eq!(b.n, n);
            MatMulProver::new_in_place(a, b, r1, r2)
        }
    };
    prove_rounds(&mut prover, &mut session);
    let counter = prover.counter;
    (session.into_transcript(l as u16), counter)
}

/// Verifies a stored matmul transcript: streams the claimed product for the
/// opening check, runs the sum-check, and evaluates both input MLEs for the
/// final check in one joint pass over A and B.
pub fn verify_matmul(a: &Matrix, b: &Matrix, bytes: &[u8]) -> Result<MatMulOutcome, Rejection> {
    let n = a.n;
    let l = a.log_n();
    assert_eq!(b.n, n);
    let mut session = VerifySession::open(bytes, ProtocolId::MatMulSpecial)?;
    let product = session.recv(n * n)?;
    let rs = session.respond(Draw::Uniform, 2 * l)?;
    let (r1, r2) = rs.split_at(l);

    // streaming pass over the claimed output
    let d_star = Matrix::new(n, product.clone());
    let claim = d_star.mle_streaming(&rs);

    let degrees = vec![2usize; l];
    let out = verify_rounds(claim, &degrees, &mut session, 1)?;
    let (rounds, comm_bytes) = session.finish()?;

    // one joint pass over A and B with two accumulators
    let r3 = &out.point;
    let mut va = FieldElement::ZERO;
    let mut vb = FieldElement::ZERO;
    for idx in 0..n * n {
        let (i, j) = (idx / n, idx % n);
        let (av, bv) = (a.data[idx], b.data[idx]);
        if !av.is_zero() {
            let mut w = av;
            for k in 0..l {
                w = w * chi(((i >> (l - 1 - k)) & 1) as u64, r1[k]);
            }
            for k in 0..l {
                w = w * chi(((j >> (l - 1 - k)) & 1) as u64, r3[k]);
            }
            va += w;
        }
        if !bv.is_zero() {
            let mut w = bv;
            for k in 0..l {
                w = w * chi(((i >> (l - 1 - k)) & 1) as u64, r3[k]);
            }
            for k in 0..l {
                w = w * chi(((j >> (l - 1 - k)) & 1) as u64, r2[k]);
            }
            vb += w;
        }
    }
    if va * vb != out.claim {
        return Err(Rejection::FinalCheck);
    }
    Ok(MatMulOutcome {
        product,
        rounds,
        comm_bytes,
    })
}

/// Freivalds' check: accept iff A(Bx) = D*x for a random vector x.
pub fn freivalds<R: rand::Rng + ?Sized>(a: &Matrix, b: &Matrix, d: &Matrix, rng: &mut R) -> bool {
    let n = a.n;
    let x: Vec<FieldElement> = (0..n).map(|_| FieldElement::random(rng)).collect();
    let mat_vec = |m: &Matrix, v: &[FieldElement]| -> Vec<FieldElement> {
        (0..n)
            .map(|i| {
                let mut acc = FieldElement::ZERO;
                for j in 0..n {
                    acc += m.get(i, j) * v[j];
                }
                acc
            })
            .collect()
    };
    let bx = mat_vec(b, &x);
    let abx = mat_vec(a, &bx);
    let dx = mat_vec(d, &x);
    abx == dx
}

/// Repeated squaring M^(2^k) by k chained multiplications.
pub fn matrix_power_naive(m: &Matrix, k: usize) -> Matrix {
    let mut acc = m.clone();
    for _ in 0..k {
        acc = naive_matmul(&acc, &acc);
    }
    acc
}

/// Proves M^(2^k) through k chained sum-checks; between iterations the two
/// pending claims about the same intermediate power merge through a line
/// restriction of degree 2 log n. Intermediate powers never travel.
pub fn prove_matrix_power(m: &Matrix, k: usize, seed: u64) -> (Transcript, Matrix) {
    assert!(k >= 1);
    let mut powers = Vec::with_capacity(k + 1);
    powers.push(m.clone());
    for i in 0..k {
        powers.push(naive_matmul(&powers[i], &powers[i]));
    }
    let t = prove_matrix_power_from_powers(&powers, seed);
    let out = powers.pop().unwrap();
    (t, out)
}

/// Power-chain prover over caller-supplied intermediates (powers[i] claimed
/// to be M^(2^i)); lets the tests corrupt an intermediate.
pub fn prove_matrix_power_from_powers(powers: &[Matrix], seed: u64) -> Transcript {
    let k = powers.len() - 1;
    let _n = powers[0].n;
    let l = powers[0].log_n();
    let mut session = ProveSession::new(ProtocolId::MatPow, seed);
    session.send(powers[k].data.clone());
    let rs = session.respond(Draw::Uniform, 2 * l);
    let (mut r1, mut r2) = {
        let (x, y) = rs.split_at(l);
        (x.to_vec(), y.to_vec())
    };
    for i in (0..k).rev() {
        // this iteration reduces a claim about powers[i+1] to powers[i]
        let src = &powers[i];
        let mut prover = MatMulProver::new(src, src, &r1, &r2);
        let out = prove_rounds(&mut prover, &mut session);
        let r3 = out.point;
        let mut p0 = r1.clone();
        p0.extend_from_slice(&r3);
        let mut p1 = r3.clone();
        p1.extend_from_slice(&r2);
        if i == 0 {
            // final claims checked directly against M by the verifier
            let values = prover.bound_slot_pair();
            session.send(vec![values.0, values.1]);
            session.respond(Draw::Uniform, 0);
        } else {
            let deg_h = 2 * l;
            let (v0, v1) = prover.bound_slot_pair();
            let mut h = vec![v0, v1];
            for t in 2..=deg_h as u64 {
                let pt = line_through(&p0, &p1, FieldElement::new(t));
                h.push(src.mle_streaming(&pt));
            }
            session.send(h);
            let r_star = session.respond(Draw::Uniform, 1)[0];
            let next = line_through(&p0, &p1, r_star);
            r1 = next[..l].to_vec();
            r2 = next[l..].to_vec();
        }
    }
    session.into_transcript((k * l) as u16)
}

impl MatMulProver {
    /// Fully bound table values (A~(r1, r3), B~(r3, r2)) after all rounds.
    pub fn bound_slot_pair(&self) -> (FieldElement, FieldElement) {
        (self.ta.single(), self.tb.single())
    }
}

/// Verifies a matrix-power transcript against M alone; the only streamed
/// objects are the claimed output (in the opening) and M (final check).
pub fn verify_matrix_power(m: &Matrix, k: usize, bytes: &[u8]) -> Result<MatMulOutcome, Rejection> {
    assert!(k >= 1);
    let n = m.n;
    let l = m.log_n();
    let mut session = VerifySession::open(bytes, ProtocolId::MatPow)?;
    let product = session.recv(n * n)?;
    let rs = session.respond(Draw::Uniform, 2 * l)?;
    let (mut r1, mut r2) = {
        let (x, y) = rs.split_at(l);
        (x.to_vec(), y.to_vec())
    };
    let opened = Matrix::new(n, product.clone());
    let mut claim = opened.mle_streaming(&rs);
    let degrees = vec![2usize; l];
    let mut rounds_done = 1;
    for i in (0..k).rev() {
        let out = verify_rounds(claim, &degrees, &mut session, rounds_done)?;
        rounds_done += l;
        let r3 = out.point;
        let mut p0 = r1.clone();
        p0.extend_from_slice(&r3);
        let mut p1 = r3.clone();
        p1.extend_from_slice(&r2);
        if i == 0 {
            let msg = session.recv(2)?;
            session.respond(Draw::Uniform, 0)?;
            if msg[0] * msg[1] != out.claim {
                return Err(Rejection::FinalCheck);
            }
            if m.mle_streaming(&p0) != msg[0] || m.mle_streaming(&p1) != msg[1] {
                return Err(Rejection::InputCheck);
            }
        } else {
            let h = session.recv(2 * l + 1)?;
            if h[0] * h[1] != out.claim {
                return Err(Rejection::Endpoint);
            }
            let r_star = session.respond(Draw::Uniform, 1)?[0];
            let next = line_through(&p0, &p1, r_star);
            r1 = next[..l].to_vec();
            r2 = next[l..].to_vec();
            claim = interpolate_at(&h, r_star);
        }
    }
    let (rounds, comm_bytes) = session.finish()?;
    Ok(MatMulOutcome {
        product,
        rounds,
        comm_bytes,
    })
}
