//! Soundness fuzzing: mutate honest transcripts and demand rejection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use vericomp::circuit::{build_binary_tree, build_distinct_circuit, GateKind};
use vericomp::dataparallel::{verify_counting_pipeline, SuperCircuit};
use vericomp::gkr::{GkrOptions, GkrPlan, VerifierInput};
use vericomp::matmul::{naive_matmul, prove_matmul, verify_matmul, verify_matrix_power, Matrix};
use vericomp::patternmatch::verify_patternmatch;
use vericomp::transcript::Transcript;
use vericomp::{FieldElement, ProtocolId};

use crate::runners;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    FlipOutput,
    FlipEval,
    Truncate,
    Replay,
    SwapEndpoints,
    /// No mutation; completeness control.
    Control,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Strategy> {
        Some(match s {
            "flip-output" => Strategy::FlipOutput,
            "flip-eval" => Strategy::FlipEval,
            "truncate" => Strategy::Truncate,
            "replay" => Strategy::Replay,
            "swap-endpoints" => Strategy::SwapEndpoints,
            "control" => Strategy::Control,
            _ => return None,
        })
    }

    pub const ALL: [Strategy; 5] = [
        Strategy::FlipOutput,
        Strategy::FlipEval,
        Strategy::Truncate,
        Strategy::Replay,
        Strategy::SwapEndpoints,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::FlipOutput => "flip-output",
            Strategy::FlipEval => "flip-eval",
            Strategy::Truncate => "truncate",
            Strategy::Replay => "replay",
            Strategy::SwapEndpoints => "swap-endpoints",
            Strategy::Control => "control",
        }
    }
}

/// Applies one mutation in place. Panics if the transcript has no round the
/// strategy can target (never the case for the shipped targets).
pub fn mutate(t: &mut Transcript, strategy: Strategy, rng: &mut ChaCha12Rng) {
    let one = FieldElement::ONE;
    match strategy {
        Strategy::Control => {}
        Strategy::FlipOutput => {
            let slot = rng.gen_range(0..t.rounds[0].message.len());
            t.rounds[0].message[slot] += one;
        }
        Strategy::FlipEval => {
            let round = rng.gen_range(1..t.rounds.len());
            let slot = rng.gen_range(0..t.rounds[round].message.len());
            t.rounds[round].message[slot] += one;
        }
        Strategy::Truncate => {
            let round = rng.gen_range(1..t.rounds.len());
            t.rounds[round].message.pop();
        }
        Strategy::Replay => {
            let round = rng.gen_range(2..t.rounds.len());
            t.rounds[round].message = t.rounds[round - 1].message.clone();
        }
        Strategy::SwapEndpoints => {
            let candidates: Vec<usize> = (1..t.rounds.len())
                .filter(|&r| {
                    t.rounds[r].message.len() >= 2
                        && t.rounds[r].message[0] != t.rounds[r].message[1]
                })
                .collect();
            let round = candidates[rng.gen_range(0..candidates.len())];
            t.rounds[round].message.swap(0, 1);
        }
    }
}

/// A protocol instance the fuzzer can prove and re-verify.
#[derive(Clone, Copy, Debug)]
pub enum Target {
    MatMulSpecial { n: usize },
    GkrMulTree { n: usize },
    MatMulTree { n: usize },
    Distinct { n: usize },
    Pattern { n: usize, m: usize },
    DataParallel { copies: usize },
    MatPow { n: usize, k: usize },
}

impl Target {
    pub fn parse(s: &str) -> Option<Target> {
        Some(match s {
            "matmul-special" => Target::MatMulSpecial { n: 16 },
            "gkr-mul-tree" => Target::GkrMulTree { n: 64 },
            "matmul-tree" => Target::MatMulTree { n: 4 },
            "distinct" => Target::Distinct { n: 16 },
            "pattern" => Target::Pattern { n: 8, m: 2 },
            "dataparallel" => Target::DataParallel { copies: 4 },
            "matpow" => Target::MatPow { n: 4, k: 2 },
            _ => return None,
        })
    }

    pub const NAMES: [&'static str; 7] = [
        "matmul-special",
        "gkr-mul-tree",
        "matmul-tree",
        "distinct",
        "pattern",
        "dataparallel",
        "matpow",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Target::MatMulSpecial { .. } => "matmul-special",
            Target::GkrMulTree { .. } => "gkr-mul-tree",
            Target::MatMulTree { .. } => "matmul-tree",
            Target::Distinct { .. } => "distinct",
            Target::Pattern { .. } => "pattern",
            Target::DataParallel { .. } => "dataparallel",
            Target::MatPow { .. } => "matpow",
        }
    }

    /// Proves one honest instance and returns the transcript plus a checker
    /// for (possibly mutated) transcript bytes.
    fn instance(&self, trial_seed: u64) -> (Transcript, Box<dyn Fn(&[u8]) -> bool>) {
        match *self {
            Target::MatMulSpecial { n } => {
                let (a, b) = runners::random_matrices(n, trial_seed);
                let d = naive_matmul(&a, &b);
                let (t, _) = prove_matmul(&a, &b, &d, trial_seed);
                (t, Box::new(move |bytes| verify_matmul(&a, &b, bytes).is_ok()))
            }
            Target::GkrMulTree { n } => {
                let mut irng = ChaCha12Rng::seed_from_u64(trial_seed);
                let circuit = build_binary_tree(n, GateKind::Mul).unwrap();
                let input: Vec<FieldElement> =
                    (0..n).map(|_| FieldElement::random(&mut irng)).collect();
                let values = circuit.evaluate(&input).unwrap();
                let plan = GkrPlan::per_layer(&circuit);
                let (t, _) = vericomp::gkr::prove_circuit_with_input(
                    &circuit,
                    &input,
                    &values[0],
                    &plan,
                    ProtocolId::TreeCircuit,
                    trial_seed,
                )
                .unwrap();
                (
                    t,
                    Box::new(move |bytes| {
                        vericomp::gkr::verify_circuit_transcript(
                            &circuit,
                            VerifierInput::Dense(&input),
                            &plan,
                            ProtocolId::TreeCircuit,
                            bytes,
                            GkrOptions::default(),
                        )
                        .is_ok()
                    }),
                )
            }
            Target::MatMulTree { n } => {
                let (a, b) = runners::random_matrices(n, trial_seed);
                let circuit = vericomp::circuit::build_matmult_circuit(n).unwrap();
                let input = vericomp::circuit::matmult_input(&a.data, &b.data, n);
                let values = circuit.evaluate(&input).unwrap();
                let plan = GkrPlan::with_tree_shortcuts(&circuit);
                let (t, _) = vericomp::gkr::prove_circuit_with_input(
                    &circuit,
                    &input,
                    &values[0],
                    &plan,
                    ProtocolId::MatMulTree,
                    trial_seed,
                )
                .unwrap();
                (
                    t,
                    Box::new(move |bytes| {
                        vericomp::gkr::verify_circuit_transcript(
                            &circuit,
                            VerifierInput::Dense(&input),
                            &plan,
                            ProtocolId::MatMulTree,
                            bytes,
                            GkrOptions::default(),
                        )
                        .is_ok()
                    }),
                )
            }
            Target::Distinct { n } => {
                let updates = runners::random_updates(n, 3 * n, trial_seed);
                let circuit = build_distinct_circuit(n).unwrap();
                let plan = GkrPlan::with_tree_shortcuts(&circuit);
                let frequency = vericomp::circuit::ingest_stream(&updates, n).unwrap();
                let values = circuit.evaluate(&frequency).unwrap();
                let outputs = values[0].clone();
                let (t, _) = vericomp::gkr::prove_circuit_with_input(
                    &circuit,
                    &frequency,
                    &outputs,
                    &plan,
                    ProtocolId::Distinct,
                    trial_seed,
                )
                .unwrap();
                let log_n = n.trailing_zeros() as usize;
                (
                    t,
                    Box::new(move |bytes| {
                        vericomp::gkr::verify_circuit_transcript(
                            &circuit,
                            VerifierInput::Stream {
                                updates: &updates,
                                log_n,
                            },
                            &plan,
                            ProtocolId::Distinct,
                            bytes,
                            GkrOptions::default(),
                        )
                        .is_ok()
                    }),
                )
            }
            Target::Pattern { n, m } => {
                let mut irng = ChaCha12Rng::seed_from_u64(trial_seed);
                let text: Vec<FieldElement> = (0..n)
                    .map(|_| FieldElement::new(irng.gen_range(0..4)))
                    .collect();
                let pattern: Vec<FieldElement> = (0..m)
                    .map(|_| FieldElement::new(irng.gen_range(0..4)))
                    .collect();
                let (t, _) =
                    vericomp::patternmatch::prove_patternmatch(&text, &pattern, trial_seed)
                        .unwrap();
                (
                    t,
                    Box::new(move |bytes| verify_patternmatch(&text, &pattern, bytes).is_ok()),
                )
            }
            Target::DataParallel { copies } => {
                let base = runners::default_base_circuit(trial_seed);
                let sc = SuperCircuit::new(base, copies);
                let inputs = runners::random_copies(copies, sc.base.input_size(), trial_seed);
                let (t, _) =
                    vericomp::dataparallel::prove_counting_pipeline(&sc, &inputs, trial_seed)
                        .unwrap();
                (
                    t,
                    Box::new(move |bytes| verify_counting_pipeline(&sc, &inputs, bytes).is_ok()),
                )
            }
            Target::MatPow { n, k } => {
                let mut irng = ChaCha12Rng::seed_from_u64(trial_seed);
                let m = Matrix::random(n, &mut irng);
                let (t, _) = vericomp::matmul::prove_matrix_power(&m, k, trial_seed);
                (
                    t,
                    Box::new(move |bytes| verify_matrix_power(&m, k, bytes).is_ok()),
                )
            }
        }
    }

    /// One trial: prove honestly, mutate per the strategy, verify. Returns
    /// whether the verifier accepted.
    pub fn trial(&self, strategy: Strategy, trial_seed: u64) -> bool {
        let mut rng = ChaCha12Rng::seed_from_u64(trial_seed ^ 0x5eed);
        let (mut t, check) = self.instance(trial_seed);
        mutate(&mut t, strategy, &mut rng);
        check(&t.to_bytes())
    }
}

pub struct FuzzStats {
    pub trials: usize,
    pub rejections: usize,
}

impl FuzzStats {
    /// The gate: mutated runs must all reject; the control must never.
    pub fn passes(&self, strategy: Strategy) -> bool {
        if strategy == Strategy::Control {
            self.rejections == 0
        } else {
            self.rejections == self.trials
        }
    }
}

/// Runs seeded trials of one strategy against one target.
pub fn fuzz_soundness(target: &Target, strategy: Strategy, trials: usize, seed: u64) -> FuzzStats {
    let mut rejections = 0;
    for trial in 0..trials {
        if !target.trial(strategy, seed.wrapping_add(trial as u64)) {
            rejections += 1;
        }
    }
    FuzzStats { trials, rejections }
}
