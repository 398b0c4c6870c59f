//! Command-line driver: run the protocols, persist transcripts, reproduce
//! the benchmark tables, and fuzz the verifiers.
//!
//! Exit codes: 0 accept, 1 reject, 2 malformed input.

use vericomp_cli::{bench, fuzz, io, runners};

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use vericomp::circuit::{build_distinct_circuit, build_matmult_circuit, matmult_input};
use vericomp::dataparallel::SuperCircuit;
use vericomp::gkr::{GkrOptions, GkrPlan, VerifierInput};
use vericomp::matmul::Matrix;
use vericomp::{FieldElement, ProtocolId};

#[derive(Parser)]
#[command(name = "vericomp", version, about = "Interactive proofs for circuit evaluation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Protocol randomness seed (recorded in the transcript header).
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Instance-generation seed for randomly generated inputs.
    #[arg(long, default_value_t = 42)]
    instance_seed: u64,
    /// Write the proof transcript to this file.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Circuit protocol on n x n matrix multiplication, one sum-check per layer.
    MatmulGkr {
        #[arg(long)]
        n: usize,
        /// Read A and B from a matrix file instead of generating them.
        #[arg(long)]
        matrices: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Same circuit with addition trees collapsed into single sum-checks.
    MatmulTree {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        matrices: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Special-purpose matmult verification: one log n-round sum-check.
    MatmulSpecial {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        matrices: Option<PathBuf>,
        /// Only produce and write the transcript.
        #[arg(long)]
        prove: bool,
        /// Only verify an existing transcript.
        #[arg(long)]
        verify: bool,
        /// Fold the sum-check tables inside the input matrices.
        #[arg(long)]
        in_place: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Verified repeated squaring M^(2^k).
    Matpow {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Count distinct keys of an update stream.
    Distinct {
        /// Stream file of (index, delta) updates; random when omitted.
        #[arg(long)]
        stream: Option<PathBuf>,
        /// Universe size (power of two); inferred from the stream if absent.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Count pattern occurrences in a text (cyclic indexing).
    Pattern {
        #[arg(long)]
        text: Option<PathBuf>,
        #[arg(long)]
        pattern: Option<PathBuf>,
        /// Random text length when no files are given.
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Random pattern length when no files are given.
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Prove the subtraction layer with the brute-force reference
        /// prover (identical transcript, for cross-checking).
        #[arg(long)]
        naive_layer: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Batched verification of B copies of a base circuit plus aggregation.
    Dataparallel {
        #[arg(long, default_value_t = 8)]
        copies: usize,
        /// Per-copy inputs file; random when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Reproduce the benchmark tables.
    Bench {
        /// Shrink every size so the suite finishes in seconds.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Soundness fuzzing: mutate honest transcripts, demand rejection.
    Fuzz {
        /// Target protocol; all when omitted.
        #[arg(long)]
        protocol: Option<String>,
        /// Mutation strategy; all when omitted.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Re-verify a stored transcript against its instance.
    VerifyTranscript {
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        copies: Option<usize>,
        #[arg(long, default_value_t = 42)]
        instance_seed: u64,
        #[arg(long)]
        matrices: Option<PathBuf>,
        #[arg(long)]
        stream: Option<PathBuf>,
        #[arg(long)]
        text: Option<PathBuf>,
        #[arg(long)]
        pattern: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // die quietly when stdout is a closed pipe (e.g. piped into head)
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_or_random_matrices(
    path: &Option<PathBuf>,
    n: usize,
    instance_seed: u64,
) -> std::io::Result<(Matrix, Matrix)> {
    match path {
        Some(p) => io::read_matrices(p),
        None => Ok(runners::random_matrices(n, instance_seed)),
    }
}

fn write_transcript(path: &Option<PathBuf>, t: &vericomp::Transcript) -> std::io::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, t.to_bytes())?;
    }
    Ok(())
}

fn reject(e: vericomp::Rejection) -> ExitCode {
    eprintln!("reject: {e}");
    ExitCode::from(1)
}

fn overflow_warning(a: &Matrix, b: &Matrix) {
    // integer semantics only hold below the modulus; warn near the edge
    if a.n >= 512 {
        let max = a
            .data
            .iter()
            .chain(&b.data)
            .map(|v| v.value())
            .max()
            .unwrap_or(0);
        if max > 1 << 26 {
            eprintln!(
                "warning: entries exceed 2^26 at n >= 512; integer products may wrap around the modulus"
            );
        }
    }
}

fn run(cli: Cli) -> std::io::Result<ExitCode> {
    match cli.cmd {
        Cmd::MatmulGkr { n, matrices, common } => {
            let (a, b) = load_or_random_matrices(&matrices, n, common.instance_seed)?;
            overflow_warning(&a, &b);
            match runners::run_matmul_gkr(&a, &b, false, common.seed) {
                Ok(run) => {
                    write_transcript(&common.transcript, &run.transcript)?;
                    run.report.print();
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Ok(reject(e)),
            }
        }
        Cmd::MatmulTree { n, matrices, common } => {
            let (a, b) = load_or_random_matrices(&matrices, n, common.instance_seed)?;
            overflow_warning(&a, &b);
            match runners::run_matmul_gkr(&a, &b, true, common.seed) {
                Ok(run) => {
                    write_transcript(&common.transcript, &run.transcript)?;
                    run.report.print();
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Ok(reject(e)),
            }
        }
        Cmd::MatmulSpecial {
            n,
            matrices,
            prove,
            verify,
            in_place,
            common,
        } => {
            let (a, b) = load_or_random_matrices(&matrices, n, common.instance_seed)?;
            overflow_warning(&a, &b);
            if verify && !prove {
                let path = common.transcript.as_ref().ok_or_else(|| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        "--verify needs --transcript",
                    )
                })?;
                let bytes = std::fs::read(path)?;
                return Ok(match vericomp::matmul::verify_matmul(&a, &b, &bytes) {
                    Ok(out) => {
                        println!("accept: {} rounds, {} B", out.rounds, out.comm_bytes);
                        ExitCode::SUCCESS
                    }
                    Err(e) => reject(e),
                });
            }
            let d = vericomp::matmul::naive_matmul(&a, &b);
            if prove && !verify {
                let (t, _) = if in_place {
                    vericomp::matmul::prove_matmul_in_place(a.clone(), b.clone(), &d, common.seed)
                } else {
                    vericomp::matmul::prove_matmul(&a, &b, &d, common.seed)
                };
                write_transcript(&common.transcript, &t)?;
                println!("transcript written ({} rounds)", t.rounds.len());
                return Ok(ExitCode::SUCCESS);
            }
            match runners::run_matmul_special(&a, &b, Some(d), in_place, common.seed) {
                Ok(run) => {
                    write_transcript(&common.transcript, &run.transcript)?;
                    run.report.print();
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Ok(reject(e)),
            }
        }
        Cmd::Matpow { n, k, common } => {
            let mut rng = ChaCha12Rng::seed_from_u64(common.instance_seed);
            let m = Matrix::random(n, &mut rng);
            match runners::run_matpow(&m, k, common.seed) {
                Ok((report, t)) => {
                    write_transcript(&common.transcript, &t)?;
                    report.print();
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Ok(reject(e)),
            }
        }
        Cmd::Distinct { stream, n, common } => {
            let updates = match &stream {
                Some(p) => io::read_stream(p)?,
                None => {
                    let n = n.unwrap_or(1 << 10);
                    runners::random_updates(n, n / 2, common.instance_seed)
                }
            };
            let n = match n {
                Some(n) => n,
                None => {
                    let max = updates.iter().map(|u| u.index).max().unwrap_or(0);
                    ((max + 1).next_power_of_two() as usize).max(2)
                }
            };
            if !n.is_power_of_two() {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    "universe size must be a power of two",
                ));
            }
            match runners::run_distinct(&updates, n, common.seed) {
                Ok(run) => {
                    write_transcript(&common.transcript, &run.transcript)?;
                    println!("{}", run.count);
                    run.report.print();
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Ok(reject(e)),
            }
        }
        Cmd::Pattern {
            text,
            pattern,
            n,
            m,
            naive_layer,
            common,
        } => {
            let (text, pattern) = match (&text, &pattern) {
                (Some(t), Some(p)) => (io::read_elements(t)?, io::read_elements(p)?),
                _ => {
                    let mut rng = ChaCha12Rng::seed_from_u64(common.instance_seed);
                    let text: Vec<FieldElement> =
                        (0..n).map(|_| FieldElement::new(rng.gen_range(0..4))).collect();
                    let pattern: Vec<FieldElement> =
                        (0..m).map(|_| FieldElement::new(rng.gen_range(0..4))).collect();
                    (text, pattern)
                }
            };
            match runners::run_pattern(&text, &pattern, common.seed, naive_layer) {
                Ok(run) => {
                    write_transcript(&common.transcript, &run.transcript)?;
                    println!("{}", run.occurrences);
                    run.report.print();
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Ok(reject(e)),
            }
        }
        Cmd::Dataparallel {
            copies,
            input,
            common,
        } => {
            let base = runners::default_base_circuit(common.instance_seed);
            let inputs = match &input {
                Some(p) => io::read_copies(p)?,
                None => runners::random_copies(copies, base.input_size(), common.instance_seed),
            };
            let copies = inputs.len();
            let sc = SuperCircuit::new(base, copies);
            match runners::run_dataparallel(&sc, &inputs, common.seed) {
                Ok(run) => {
                    write_transcript(&common.transcript, &run.transcript)?;
                    println!("{}", run.output);
                    run.report.print();
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => Ok(reject(e)),
            }
        }
        Cmd::Bench { quick, seed } => match bench::run(quick, seed) {
            Ok(()) => Ok(ExitCode::SUCCESS),
            Err(e) => Ok(reject(e)),
        },
        Cmd::Fuzz {
            protocol,
            strategy,
            trials,
            seed,
        } => {
            let targets: Vec<fuzz::Target> = match &protocol {
                Some(name) => vec![fuzz::Target::parse(name).ok_or_else(|| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        format!("unknown protocol {name}"),
                    )
                })?],
                None => fuzz::Target::NAMES
                    .iter()
                    .map(|n| fuzz::Target::parse(n).unwrap())
                    .collect(),
            };
            let strategies: Vec<fuzz::Strategy> = match &strategy {
                Some(name) => vec![fuzz::Strategy::parse(name).ok_or_else(|| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        format!("unknown strategy {name}"),
                    )
                })?],
                None => fuzz::Strategy::ALL.to_vec(),
            };
            let mut all_pass = true;
            for target in &targets {
                for &strategy in &strategies {
                    let stats = fuzz::fuzz_soundness(target, strategy, trials, seed);
                    let pass = stats.passes(strategy);
                    all_pass &= pass;
                    println!(
                        "fuzz {:<16} {:<15} {}/{} rejections  {}",
                        target.name(),
                        strategy.name(),
                        stats.rejections,
                        stats.trials,
                        if pass { "ok" } else { "FAIL" }
                    );
                }
            }
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::VerifyTranscript {
            protocol,
            transcript,
            n,
            k,
            copies,
            instance_seed,
            matrices,
            stream,
            text,
            pattern,
            input,
        } => {
            let bytes = std::fs::read(&transcript)?;
            let need_n = || {
                n.ok_or_else(|| {
                    std::io::Error::new(std::io::ErrorKind::InvalidInput, "--n is required")
                })
            };
            let outcome: Result<(), vericomp::Rejection> = match protocol.as_str() {
                "matmul-special" => {
                    let (a, b) = load_or_random_matrices(&matrices, need_n()?, instance_seed)?;
                    vericomp::matmul::verify_matmul(&a, &b, &bytes).map(|_| ())
                }
                "matpow" => {
                    let kk = k.ok_or_else(|| {
                        std::io::Error::new(std::io::ErrorKind::InvalidInput, "--k is required")
                    })?;
                    let mut rng = ChaCha12Rng::seed_from_u64(instance_seed);
                    let m = match &matrices {
                        Some(p) => io::read_matrices(p)?.0,
                        None => Matrix::random(need_n()?, &mut rng),
                    };
                    vericomp::matmul::verify_matrix_power(&m, kk, &bytes).map(|_| ())
                }
                "matmul-gkr" | "matmul-tree" => {
                    let tree = protocol == "matmul-tree";
                    let (a, b) = load_or_random_matrices(&matrices, need_n()?, instance_seed)?;
                    let circuit = build_matmult_circuit(a.n)
                        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
                    let plan = if tree {
                        GkrPlan::with_tree_shortcuts(&circuit)
                    } else {
                        GkrPlan::per_layer(&circuit)
                    };
                    let pid = if tree {
                        ProtocolId::MatMulTree
                    } else {
                        ProtocolId::MatMulGkr
                    };
                    let inp = matmult_input(&a.data, &b.data, a.n);
                    vericomp::gkr::verify_circuit_transcript(
                        &circuit,
                        VerifierInput::Dense(&inp),
                        &plan,
                        pid,
                        &bytes,
                        GkrOptions::default(),
                    )
                    .map(|_| ())
                }
                "distinct" => {
                    let updates = match &stream {
                        Some(p) => io::read_stream(p)?,
                        None => {
                            let n = need_n()?;
                            runners::random_updates(n, n / 2, instance_seed)
                        }
                    };
                    let n = match n {
                        Some(n) => n,
                        None => {
                            let max = updates.iter().map(|u| u.index).max().unwrap_or(0);
                            ((max + 1).next_power_of_two() as usize).max(2)
                        }
                    };
                    let circuit = build_distinct_circuit(n)
                        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
                    let plan = GkrPlan::with_tree_shortcuts(&circuit);
                    let log_n = n.trailing_zeros() as usize;
                    vericomp::gkr::verify_circuit_transcript(
                        &circuit,
                        VerifierInput::Stream {
                            updates: &updates,
                            log_n,
                        },
                        &plan,
                        ProtocolId::Distinct,
                        &bytes,
                        GkrOptions::default(),
                    )
                    .map(|_| ())
                }
                "pattern" => {
                    let (t, p) = match (&text, &pattern) {
                        (Some(t), Some(p)) => (io::read_elements(t)?, io::read_elements(p)?),
                        _ => {
                            return Err(std::io::Error::new(
                                std::io::ErrorKind::InvalidInput,
                                "--text and --pattern are required",
                            ))
                        }
                    };
                    vericomp::patternmatch::verify_patternmatch(&t, &p, &bytes).map(|_| ())
                }
                "dataparallel" => {
                    let base = runners::default_base_circuit(instance_seed);
                    let inputs = match &input {
                        Some(p) => io::read_copies(p)?,
                        None => {
                            let c = copies.unwrap_or(8);
                            runners::random_copies(c, base.input_size(), instance_seed)
                        }
                    };
                    let sc = SuperCircuit::new(base, inputs.len());
                    vericomp::dataparallel::verify_counting_pipeline(&sc, &inputs, &bytes)
                        .map(|_| ())
                }
                other => {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        format!("unknown protocol {other}"),
                    ))
                }
            };
            Ok(match outcome {
                Ok(()) => {
                    println!("accept");
                    ExitCode::SUCCESS
                }
                Err(e) => reject(e),
            })
        }
    }
}
