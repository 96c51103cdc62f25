//! Binary model files.
//!
//! Layout, all little endian: 8 magic bytes, `u64` m, n, r, then `f64` arrays
//! U (m·r, row major), σ (r), V (n·r, row major), row means (m), column
//! means (n), the global mean, and finally a `u64` FNV-1a checksum of every
//! preceding byte.

use std::io::{Read, Write};

use crate::completion::{Centering, CompletionModel};
use crate::error::{Error, Result};
use crate::linalg::{CompactSvd, DenseMatrix};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: [u8; 8] = *b"NNSVD1\0\0";

const HEADER_BYTES: usize = 8 + 3 * 8;

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Size in bytes of a model file with the given shape.
pub fn model_file_len(m: usize, n: usize, r: usize) -> Option<usize> {
    let floats =
        m.checked_mul(r)?.checked_add(r)?.checked_add(n.checked_mul(r)?)?.checked_add(m)?.checked_add(n)?.checked_add(1)?;
    floats.checked_mul(8)?.checked_add(HEADER_BYTES + 8)
}

pub fn encode_model<T: Scalar>(model: &CompletionModel<T>) -> Vec<u8> {
    let f = &model.factors;
    let (m, n, r) = (f.nrows(), f.ncols(), f.rank());
    let mut buf = Vec::with_capacity(model_file_len(m, n, r).unwrap_or(0));
    buf.extend_from_slice(&MODEL_MAGIC);
    for d in [m, n, r] {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    let c = &model.centering;
    let floats = f
        .u()
        .as_slice()
        .iter()
        .chain(f.sigma())
        .chain(f.v().as_slice())
        .chain(&c.row_means)
        .chain(&c.col_means)
        .chain(std::iter::once(&c.global_mean));
    for x in floats {
        buf.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    let sum = fnv1a64(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    buf
}

pub fn save_model<T: Scalar, W: Write>(model: &CompletionModel<T>, mut w: W) -> Result<()> {
    w.write_all(&encode_model(model))?;
    w.flush()?;
    Ok(())
}

pub fn decode_model<T: Scalar>(bytes: &[u8]) -> Result<CompletionModel<T>> {
    if bytes.len() < MODEL_MAGIC.len() || bytes[..8] != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic bytes)".into()));
    }
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Format(format!("truncated header: expected {HEADER_BYTES} bytes, found {}", bytes.len())));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().expect("8-byte slice"));
    let dims: Vec<usize> = (0..3)
        .map(|k| usize::try_from(word(k)).map_err(|_| Error::Format("dimension does not fit in memory".into())))
        .collect::<Result<_>>()?;
    let (m, n, r) = (dims[0], dims[1], dims[2]);
    if m == 0 || n == 0 || r > m.min(n) {
        return Err(Error::Format(format!("invalid shape m={m}, n={n}, r={r}")));
    }
    let expected = model_file_len(m, n, r).ok_or_else(|| Error::Format("model dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::Format(format!("truncated model: expected {expected} bytes, found {}", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!("{} trailing bytes after the checksum", bytes.len() - expected)));
    }
    let body = &bytes[..expected - 8];
    let stored = u64::from_le_bytes(bytes[expected - 8..].try_into().expect("8-byte slice"));
    if fnv1a64(body) != stored {
        return Err(Error::Format("checksum mismatch".into()));
    }

    let mut values = body[HEADER_BYTES..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut take = |len: usize, what: &str| -> Result<Vec<T>> {
        let v: Vec<f64> = values.by_ref().take(len).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data(format!("non-finite value in {what}")));
        }
        Ok(v.into_iter().map(T::lit).collect())
    };
    let u = take(m * r, "U")?;
    let sigma = take(r, "singular values")?;
    let v = take(n * r, "V")?;
    let row_means = take(m, "row means")?;
    let col_means = take(n, "column means")?;
    let global_mean = take(1, "global mean")?[0];

    let factors = if r == 0 {
        CompactSvd::zero(m, n)
    } else {
        let u = DenseMatrix::from_row_major(m, r, u).map_err(|e| Error::Data(e.to_string()))?;
        let v = DenseMatrix::from_row_major(n, r, v).map_err(|e| Error::Data(e.to_string()))?;
        CompactSvd::from_parts(u, sigma, v).map_err(|e| Error::Data(format!("stored factors are invalid: {e}")))?
    };
    CompletionModel::new(factors, Centering { row_means, col_means, global_mean })
}

pub fn load_model<T: Scalar, R: Read>(mut r: R) -> Result<CompletionModel<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_model(&bytes)
}
