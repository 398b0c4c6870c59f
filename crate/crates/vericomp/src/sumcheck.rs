//! The sum-check protocol engine: brute-force reference prover, per-round
//! verifier checks, Lagrange interpolation of point-value messages, and the
//! interactive driver shared by every protocol in the crate.
//!
//! A round message is the list of evaluations g_j(0), ..., g_j(deg_j); the
//! verifier checks g_{j-1}(r_{j-1}) = g_j(0) + g_j(1) each round and is left
//! with a claim g(r_1, ..., r_v) that the caller either checks directly or
//! forwards as the next layer's claim.

use crate::field::FieldElement;
use crate::transcript::{Draw, ProveSession, Rejection, VerifySession};

/// Prover round message in point-value form over the nodes {0, ..., deg}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundMessage {
    pub evals: Vec<FieldElement>,
}

impl RoundMessage {
    pub fn degree(&self) -> usize {
        self.evals.len() - 1
    }
}

/// Full point-evaluation access to a v-variate polynomial.
pub trait PointOracle {
    fn num_vars(&self) -> usize;
    /// Degree bound of variable `var` (1-based).
    fn degree(&self, var: usize) -> usize;
    fn eval(&mut self, point: &[FieldElement]) -> FieldElement;
}

/// Lagrange interpolation at `r` of a polynomial given by its values on the
/// nodes {0, ..., deg}; exact for degree <= deg.
pub fn interpolate_at(evals: &[FieldElement], r: FieldElement) -> FieldElement {
    let d = evals.len() - 1;
    if d == 0 {
        return evals[0];
    }
    // nodes are the small integers: numerators by prefix/suffix products,
    // denominators k! (d-k)! with a sign
    let nodes: Vec<FieldElement> = (0..=d as u64).map(FieldElement::new).collect();
    let mut prefix = vec![FieldElement::ONE; d + 2];
    for k in 0..=d {
        prefix[k + 1] = prefix[k] * (r - nodes[k]);
    }
    let mut suffix = vec![FieldElement::ONE; d + 2];
    for k in (0..=d).rev() {
        suffix[k] = suffix[k + 1] * (r - nodes[k]);
    }
    let mut fact = vec![FieldElement::ONE; d + 1];
    for k in 1..=d {
        fact[k] = fact[k - 1] * FieldElement::new(k as u64);
    }
    let mut acc = FieldElement::ZERO;
    for k in 0..=d {
        let denom = fact[k] * fact[d - k];
        let mut term = evals[k] * prefix[k] * suffix[k + 1] * denom.inverse().unwrap();
        if (d - k) % 2 == 1 {
            term = -term;
        }
        acc += term;
    }
    acc
}

/// The brute-force round message: evals[t] = sum over all boolean suffixes
/// of g(bound, t, suffix). This is the oracle implementation every optimized
/// prover is validated against.
pub fn prover_round_naive<O: PointOracle + ?Sized>(
    oracle: &mut O,
    bound: &[FieldElement],
    round: usize,
) -> RoundMessage {
    let v = oracle.num_vars();
    assert!(round >= 1 && round <= v);
    assert_eq!(bound.len(), round - 1);
    let deg = oracle.degree(round);
    let tail = v - round;
    let mut point = vec![FieldElement::ZERO; v];
    point[..round - 1].copy_from_slice(bound);
    let mut evals = Vec::with_capacity(deg + 1);
    for t in 0..=deg as u64 {
        point[round - 1] = FieldElement::new(t);
        let mut acc = FieldElement::ZERO;
        for sfx in 0..1u64 << tail {
            for k in 0..tail {
                point[round + k] = FieldElement::new((sfx >> (tail - 1 - k)) & 1);
            }
            acc += oracle.eval(&point);
        }
        evals.push(acc);
    }
    RoundMessage { evals }
}

/// A sum-check prover driven one round at a time; `round_message` and `bind`
/// alternate, starting with `round_message` for round 1.
pub trait RoundProver {
    fn num_vars(&self) -> usize;
    fn degree(&self, round: usize) -> usize;
    fn round_message(&mut self) -> RoundMessage;
    fn bind(&mut self, r: FieldElement);
}

/// Reference prover wrapping a point oracle; `oracle_calls` counts single
/// g-evaluations across all rounds (Theta(2^v) in total).
pub struct NaiveProver<O: PointOracle> {
    pub oracle: O,
    bound: Vec<FieldElement>,
    round: usize,
    pub oracle_calls: u64,
}

impl<O: PointOracle> NaiveProver<O> {
    pub fn new(oracle: O) -> Self {
        NaiveProver {
            oracle,
            bound: Vec::new(),
            round: 1,
            oracle_calls: 0,
        }
    }
}

impl<O: PointOracle> RoundProver for NaiveProver<O> {
    fn num_vars(&self) -> usize {
        self.oracle.num_vars()
    }

    fn degree(&self, round: usize) -> usize {
        self.oracle.degree(round)
    }

    fn round_message(&mut self) -> RoundMessage {
        let v = self.oracle.num_vars();
        let deg = self.oracle.degree(self.round);
        self.oracle_calls += ((deg + 1) as u64) << (v - self.round);
        prover_round_naive(&mut self.oracle, &self.bound, self.round)
    }

    fn bind(&mut self, r: FieldElement) {
        self.bound.push(r);
        self.round += 1;
    }
}

/// One verifier round check: the message length must match the degree bound
/// and its first two evaluations must sum to the running claim.
pub fn verifier_check_round(
    expected_sum: FieldElement,
    msg: &RoundMessage,
    deg: usize,
    round: usize,
) -> Result<(), Rejection> {
    if msg.evals.len() != deg + 1 {
        return Err(Rejection::Degree(round));
    }
    let at_zero_one = if deg == 0 {
        msg.evals[0] + msg.evals[0]
    } else {
        msg.evals[0] + msg.evals[1]
    };
    if at_zero_one != expected_sum {
        return Err(Rejection::RoundCheck(round));
    }
    Ok(())
}

/// Outcome of a completed sum-check: the bound point and the claim
/// g(r_1, ..., r_v) still to be checked by the caller.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumcheckOutput {
    pub point: Vec<FieldElement>,
    pub claim: FieldElement,
}

/// Prover side of all v rounds against a session.
pub fn prove_rounds<P: RoundProver + ?Sized>(
    prover: &mut P,
    session: &mut ProveSession,
) -> SumcheckOutput {
    let v = prover.num_vars();
    let mut point = Vec::with_capacity(v);
    let mut last = None;
    for _ in 1..=v {
        let msg = prover.round_message();
        session.send(msg.evals.clone());
        let r = session.respond(Draw::Uniform, 1)[0];
        prover.bind(r);
        point.push(r);
        last = Some(msg);
    }
    let claim = interpolate_at(&last.expect("at least one round").evals, point[v - 1]);
    SumcheckOutput { point, claim }
}

/// Verifier side of all v rounds against a session; `round_base` offsets the
/// round numbers reported in rejections.
pub fn verify_rounds(
    claimed_sum: FieldElement,
    degrees: &[usize],
    session: &mut VerifySession<'_>,
    round_base: usize,
) -> Result<SumcheckOutput, Rejection> {
    let mut running = claimed_sum;
    let mut point = Vec::with_capacity(degrees.len());
    for (j, &deg) in degrees.iter().enumerate() {
        let msg = RoundMessage {
            evals: session.recv(deg + 1)?,
        };
        verifier_check_round(running, &msg, deg, round_base + j + 1)?;
        let r = session.respond(Draw::Uniform, 1)?[0];
        running = interpolate_at(&msg.evals, r);
        point.push(r);
    }
    Ok(SumcheckOutput {
        point,
        claim: running,
    })
}

/// Runs the standalone sum-check protocol for H = sum of g over the cube:
/// the prover produces a transcript, the verifier replays it and performs
/// the final check g(r) against the oracle. Returns the verifier's outcome
/// together with the transcript.
pub fn run_sumcheck<P: RoundProver, O: PointOracle>(
    claimed_sum: FieldElement,
    prover: &mut P,
    final_oracle: &mut O,
    seed: u64,
) -> (Result<SumcheckOutput, Rejection>, crate::transcript::Transcript) {
    let v = prover.num_vars();
    let mut session = ProveSession::new(crate::transcript::ProtocolId::SumcheckGeneric, seed);
    prove_rounds(prover, &mut session);
    let transcript = session.into_transcript(v as u16);
    let bytes = transcript.to_bytes();
    let degrees: Vec<usize> = (1..=v).map(|j| final_oracle.degree(j)).collect();
    let result = (|| {
        let mut session = VerifySession::open(&bytes, crate::transcript::ProtocolId::SumcheckGeneric)?;
        let out = verify_rounds(claimed_sum, &degrees, &mut session, 0)?;
        session.finish()?;
        if final_oracle.eval(&out.point) != out.claim {
            return Err(Rejection::FinalCheck);
        }
        Ok(out)
    })();
    (result, transcript)
}
