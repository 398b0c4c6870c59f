//! Benchmark suite: round counts, communication, and timing splits for the
//! four protocol families, at the reference sizes.

use vericomp::matmul::Matrix;

use crate::runners::{self, RunReport};

fn header() {
    println!(
        "{:<16} {:<9} {:>7} {:>11} {:>13} {:>13} {:>11}  verdict",
        "protocol", "size", "rounds", "comm (B)", "prover (ms)", "proofgen (ms)", "verify (ms)"
    );
}

fn row(r: &RunReport) {
    println!(
        "{:<16} {:<9} {:>7} {:>11} {:>13.2} {:>13.2} {:>11.2}  {}",
        r.protocol,
        r.size,
        r.rounds,
        r.bytes,
        r.prover_ms,
        r.proofgen_ms,
        r.verifier_ms,
        if r.accepted { "accept" } else { "REJECT" }
    );
    println!("{}", r.tsv());
}

/// Runs the full suite. `quick` trims the sizes so the whole run stays under
/// a few seconds.
pub fn run(quick: bool, seed: u64) -> Result<(), vericomp::Rejection> {
    header();

    // circuit protocol on matmult, per-layer plan
    let gkr_sizes: &[usize] = if quick { &[16, 32, 64] } else { &[64, 128, 256] };
    let mut gkr_proofgen = Vec::new();
    for &n in gkr_sizes {
        let (a, b) = runners::random_matrices(n, seed);
        let run = runners::run_matmul_gkr(&a, &b, false, seed)?;
        gkr_proofgen.push(run.report.proofgen_ms);
        row(&run.report);
    }
    for w in gkr_proofgen.windows(2) {
        println!(
            "# matmul-gkr proof-gen growth per doubling: {:.2}x",
            w[1] / w[0]
        );
    }

    // addition-tree shortcut plan
    let n = if quick { 64 } else { 256 };
    let (a, b) = runners::random_matrices(n, seed);
    let run = runners::run_matmul_gkr(&a, &b, true, seed)?;
    row(&run.report);

    // distinct elements over a random stream
    let n = if quick { 1 << 12 } else { 1 << 20 };
    let updates = runners::random_updates(n, n / 2, seed);
    let run = runners::run_distinct(&updates, n, seed)?;
    row(&run.report);

    // special-purpose matmult: real field multiplication for the ratio
    let n = if quick { 1 << 7 } else { 1 << 10 };
    let (a, b) = runners::random_matrices(n, seed);
    let run = runners::run_matmul_special(&a, &b, None, true, seed)?;
    row(&run.report);
    println!(
        "# matmul-special proof-gen {:.2} ms vs field multiplication {:.2} ms ({:.2}%)",
        run.report.proofgen_ms,
        run.multiply_ms,
        100.0 * run.report.proofgen_ms / run.multiply_ms
    );

    // one size up, product supplied by a rank-one shortcut (rounds only)
    let n2 = 2 * n;
    let (a, b, d) = runners::rank_one_instance(n2, seed);
    let run = runners::run_matmul_special(&a, &b, Some(d), true, seed)?;
    row(&run.report);

    // repeated squaring
    let m = Matrix::random(
        if quick { 16 } else { 64 },
        &mut <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(seed),
    );
    let (report, _) = runners::run_matpow(&m, 3, seed)?;
    row(&report);

    Ok(())
}
