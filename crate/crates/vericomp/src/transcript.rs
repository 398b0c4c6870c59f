//! Proof transcripts and the prove/verify session plumbing.
//!
//! A transcript is the ordered record of prover messages and verifier
//! challenges. Verifier randomness comes from a ChaCha generator seeded by
//! the value in the header, drawn strictly after the message it responds to,
//! so a stored transcript can be re-verified offline: the checker re-derives
//! every challenge and compares it against the recorded one.
//!
//! Wire format: header {protocol id: 1 byte, v: 2 bytes LE, seed: 8 bytes
//! LE}, then one record per round: an optional section separator {layer
//! index: 2 bytes LE} when a new layer begins, the message elements (8-byte
//! LE each, count implied by the protocol position), and one 8-byte
//! challenge slot (zero when the round has no single-element response).

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::field::FieldElement;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ProtocolId {
    SumcheckGeneric = 0,
    MatMulGkr = 1,
    MatMulTree = 2,
    MatMulSpecial = 3,
    MatPow = 4,
    Distinct = 5,
    Pattern = 6,
    DataParallel = 7,
    TreeCircuit = 8,
    GkrCustom = 9,
}

impl ProtocolId {
    pub fn from_u8(v: u8) -> Option<ProtocolId> {
        use ProtocolId::*;
        Some(match v {
            0 => SumcheckGeneric,
            1 => MatMulGkr,
            2 => MatMulTree,
            3 => MatMulSpecial,
            4 => MatPow,
            5 => Distinct,
            6 => Pattern,
            7 => DataParallel,
            8 => TreeCircuit,
            9 => GkrCustom,
            _ => return None,
        })
    }

    /// GKR-family transcripts carry per-layer section separators.
    pub fn sectioned(self) -> bool {
        !matches!(
            self,
            ProtocolId::SumcheckGeneric | ProtocolId::MatMulSpecial | ProtocolId::MatPow
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("malformed transcript: {0}")]
    Malformed(String),
    #[error("recorded challenge disagrees with the seeded draw at round {0}")]
    ChallengeMismatch(usize),
    #[error("round {0}: message length violates the degree bound")]
    Degree(usize),
    #[error("round {0}: consistency check failed")]
    RoundCheck(usize),
    #[error("final oracle check failed")]
    FinalCheck,
    #[error("line restriction endpoint check failed")]
    Endpoint,
    #[error("input MLE check failed")]
    InputCheck,
    #[error("claimed outputs disagree with the committed opening")]
    OutputCheck,
    #[error("section separator mismatch")]
    SectionMismatch,
    #[error("trailing bytes after the final round")]
    TrailingBytes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Draw {
    Uniform,
    Nonzero,
}

/// One prover-message/verifier-response exchange.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    /// Set when this round opens a new layer section.
    pub section: Option<u16>,
    pub message: Vec<FieldElement>,
    /// First element of the verifier's response, or zero when the response
    /// is empty.
    pub challenge: FieldElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub protocol: ProtocolId,
    /// Total sum-check variable count across every invocation in the run.
    pub total_vars: u16,
    pub seed: u64,
    pub rounds: Vec<Round>,
}

impl Transcript {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(self.protocol as u8);
        out.extend_from_slice(&self.total_vars.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for round in &self.rounds {
            if let Some(tag) = round.section {
                out.extend_from_slice(&tag.to_le_bytes());
            }
            for e in &round.message {
                out.extend_from_slice(&e.to_le_bytes());
            }
            out.extend_from_slice(&round.challenge.to_le_bytes());
        }
        out
    }

    /// Rounds and communicated prover elements, derived from the record.
    /// The opening message (the answer itself) is not counted as
    /// communication, matching how the benchmark tables are reported.
    pub fn rounds_and_bytes(&self) -> (usize, usize) {
        let rounds = self.rounds.len();
        let elements: usize = self.rounds.iter().skip(1).map(|r| r.message.len()).sum();
        (rounds, elements * 8)
    }
}

fn rng_for(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn draw(rng: &mut ChaCha12Rng, kind: Draw) -> FieldElement {
    match kind {
        Draw::Uniform => FieldElement::random(rng),
        Draw::Nonzero => FieldElement::random_nonzero(rng),
    }
}

/// Prover-side session: records rounds and produces the verifier's
/// challenges from the seeded generator, strictly after each message.
pub struct ProveSession {
    protocol: ProtocolId,
    seed: u64,
    rng: ChaCha12Rng,
    rounds: Vec<Round>,
    pending_section: Option<u16>,
    awaiting_response: bool,
}

impl ProveSession {
    pub fn new(protocol: ProtocolId, seed: u64) -> Self {
        ProveSession {
            protocol,
            seed,
            rng: rng_for(seed),
            rounds: Vec::new(),
            pending_section: None,
            awaiting_response: false,
        }
    }

    pub fn begin_section(&mut self, tag: u16) {
        debug_assert!(self.protocol.sectioned());
        debug_assert!(!self.awaiting_response);
        self.pending_section = Some(tag);
    }

    pub fn send(&mut self, message: Vec<FieldElement>) {
        debug_assert!(!self.awaiting_response, "send/respond must alternate");
        self.rounds.push(Round {
            section: self.pending_section.take(),
            message,
            challenge: FieldElement::ZERO,
        });
        self.awaiting_response = true;
    }

    pub fn respond(&mut self, kind: Draw, n: usize) -> Vec<FieldElement> {
        debug_assert!(self.awaiting_response, "respond without a message");
        let out: Vec<_> = (0..n).map(|_| draw(&mut self.rng, kind)).collect();
        if let Some(&first) = out.first() {
            self.rounds.last_mut().unwrap().challenge = first;
        }
        self.awaiting_response = false;
        out
    }

    pub fn into_transcript(self, total_vars: u16) -> Transcript {
        debug_assert!(!self.awaiting_response);
        Transcript {
            protocol: self.protocol,
            total_vars,
            seed: self.seed,
            rounds: self.rounds,
        }
    }
}

/// Verifier-side session: parses the byte stream lazily (lengths are implied
/// by the protocol position), re-derives every challenge, and checks the
/// recorded one against the derivation.
pub struct VerifySession<'a> {
    bytes: &'a [u8],
    pos: usize,
    rng: ChaCha12Rng,
    pub protocol: ProtocolId,
    pub total_vars: u16,
    pub seed: u64,
    pending_section: Option<u16>,
    awaiting_response: bool,
    rounds_seen: usize,
    comm_elements: usize,
}

impl<'a> VerifySession<'a> {
    pub fn open(bytes: &'a [u8], expected: ProtocolId) -> Result<Self, Rejection> {
        if bytes.len() < 11 {
            return Err(Rejection::Malformed("header too short".into()));
        }
        let protocol = ProtocolId::from_u8(bytes[0])
            .ok_or_else(|| Rejection::Malformed(format!("unknown protocol id {}", bytes[0])))?;
        if protocol != expected {
            return Err(Rejection::Malformed(format!(
                "protocol id {} does not match the instance",
                bytes[0]
            )));
        }
        let total_vars = u16::from_le_bytes([bytes[1], bytes[2]]);
        let seed = u64::from_le_bytes(bytes[3..11].try_into().unwrap());
        Ok(VerifySession {
            bytes,
            pos: 11,
            rng: rng_for(seed),
            protocol,
            total_vars,
            seed,
            pending_section: None,
            awaiting_response: false,
            rounds_seen: 0,
            comm_elements: 0,
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], Rejection> {
        if self.pos + n > self.bytes.len() {
            return Err(Rejection::Malformed("transcript truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn read_element(&mut self) -> Result<FieldElement, Rejection> {
        let raw = self.take(8)?;
        FieldElement::from_le_bytes(raw.try_into().unwrap())
            .map_err(|_| Rejection::Malformed("non-canonical field element".into()))
    }

    pub fn begin_section(&mut self, tag: u16) -> Result<(), Rejection> {
        debug_assert!(self.protocol.sectioned());
        self.pending_section = Some(tag);
        Ok(())
    }

    pub fn recv(&mut self, len: usize) -> Result<Vec<FieldElement>, Rejection> {
        debug_assert!(!self.awaiting_response);
        if let Some(tag) = self.pending_section.take() {
            let raw = self.take(2)?;
            let got = u16::from_le_bytes(raw.try_into().unwrap());
            if got != tag {
                return Err(Rejection::SectionMismatch);
            }
        }
        let mut msg = Vec::with_capacity(len);
        for _ in 0..len {
            msg.push(self.read_element()?);
        }
        self.rounds_seen += 1;
        if self.rounds_seen > 1 {
            self.comm_elements += len;
        }
        self.awaiting_response = true;
        Ok(msg)
    }

    pub fn respond(&mut self, kind: Draw, n: usize) -> Result<Vec<FieldElement>, Rejection> {
        debug_assert!(self.awaiting_response);
        let recorded = self.read_element()?;
        let out: Vec<_> = (0..n).map(|_| draw(&mut self.rng, kind)).collect();
        let expect = out.first().copied().unwrap_or(FieldElement::ZERO);
        if recorded != expect {
            return Err(Rejection::ChallengeMismatch(self.rounds_seen));
        }
        self.awaiting_response = false;
        Ok(out)
    }

    pub fn rounds_seen(&self) -> usize {
        self.rounds_seen
    }

    pub fn comm_bytes(&self) -> usize {
        self.comm_elements * 8
    }

    pub fn finish(self) -> Result<(usize, usize), Rejection> {
        if self.pos != self.bytes.len() {
            return Err(Rejection::TrailingBytes);
        }
        Ok((self.rounds_seen, self.comm_elements * 8))
    }
}
