//! Operational surface behind the `vericomp` binary: protocol runners with
//! timing splits, binary input formats, the benchmark suite, and the
//! transcript-mutation fuzzer. Exposed as a library so the acceptance suite
//! drives the same code paths as the command line.

pub mod bench;
pub mod fuzz;
pub mod io;
pub mod runners;
