//! Binary input formats: matrices, update streams, integer sequences.

use std::fs;
use std::io::{self, Read};
use std::path::Path;

use vericomp::circuit::StreamUpdate;
use vericomp::matmul::Matrix;
use vericomp::FieldElement;

/// Matrix file: header {n: 4 bytes LE}, then n^2 little-endian 8-byte
/// entries row-major, two consecutive blocks for A then B.
pub fn read_matrices(path: &Path) -> io::Result<(Matrix, Matrix)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 4 {
        return Err(bad("matrix file too short"));
    }
    let n = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if !n.is_power_of_two() {
        return Err(bad("matrix dimension must be a power of two"));
    }
    let want = 4 + 2 * n * n * 8;
    if bytes.len() != want {
        return Err(bad("matrix file has the wrong length"));
    }
    let read_block = |off: usize| -> io::Result<Matrix> {
        let mut data = Vec::with_capacity(n * n);
        for e in 0..n * n {
            let s = off + e * 8;
            let v = FieldElement::from_le_bytes(bytes[s..s + 8].try_into().unwrap())
                .map_err(|e| bad(&e.to_string()))?;
            data.push(v);
        }
        Ok(Matrix::new(n, data))
    };
    let a = read_block(4)?;
    let b = read_block(4 + n * n * 8)?;
    Ok((a, b))
}


/// Stream file: repeated {i: 8 bytes LE, delta: signed 8 bytes LE}.
pub fn read_stream(path: &Path) -> io::Result<Vec<StreamUpdate>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 16 != 0 {
        return Err(bad("stream file length must be a multiple of 16"));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            StreamUpdate::new(
                u64::from_le_bytes(c[..8].try_into().unwrap()),
                i64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect())
}


/// Text/pattern files: a raw sequence of 8-byte little-endian integers.
pub fn read_elements(path: &Path) -> io::Result<Vec<FieldElement>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(bad("element file length must be a multiple of 8"));
    }
    bytes
        .chunks_exact(8)
        .map(|c| {
            FieldElement::from_le_bytes(c.try_into().unwrap()).map_err(|e| bad(&e.to_string()))
        })
        .collect()
}


/// Data-parallel input file: header {B: 4 bytes, n: 4 bytes}, then B blocks
/// of n elements (one block per copy).
pub fn read_copies(path: &Path) -> io::Result<Vec<Vec<FieldElement>>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 {
        return Err(bad("input file too short"));
    }
    let b = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + b * n * 8 {
        return Err(bad("input file has the wrong length"));
    }
    let mut out = Vec::with_capacity(b);
    for c in 0..b {
        let mut copy = Vec::with_capacity(n);
        for e in 0..n {
            let s = 8 + (c * n + e) * 8;
            copy.push(
                FieldElement::from_le_bytes(bytes[s..s + 8].try_into().unwrap())
                    .map_err(|e| bad(&e.to_string()))?,
            );
        }
        out.push(copy);
    }
    Ok(out)
}


fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}
