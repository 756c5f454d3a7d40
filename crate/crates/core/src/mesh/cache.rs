//! Binary eigenpair cache. Little-endian layout:
//! `"RMGP"`, version `u32`, `d u32`, `K u32`, `N u32`, `vol f64`, `N` eigenvalues,
//! `K` mass entries, the `K × N` eigenvector matrix column-major, then the
//! CRC32 of every preceding byte.

use std::path::Path;

use nalgebra::DMatrix;

use super::MeshEigenSystem;
use crate::error::{CacheError, Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"RMGP";
pub const CACHE_VERSION: u32 = 1;

const HEADER: usize = 4 + 4 * 4 + 8;

pub fn encode_cache(mes: &MeshEigenSystem) -> Result<Vec<u8>> {
    let k = mes.num_vertices();
    let n = mes.num_eigenpairs();
    let to_u32 = |x: usize, what: &str| {
        u32::try_from(x).map_err(|_| Error::InvalidArgument(format!("{what} {x} does not fit the cache format")))
    };
    let mut buf = Vec::with_capacity(HEADER + 8 * (n + k + k * n) + 4);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&mes.manifold_dim().to_le_bytes());
    buf.extend_from_slice(&to_u32(k, "vertex count")?.to_le_bytes());
    buf.extend_from_slice(&to_u32(n, "eigenpair count")?.to_le_bytes());
    buf.extend_from_slice(&mes.volume().to_le_bytes());
    for x in mes.eigenvalues().iter().chain(mes.mass()).chain(mes.eigenvectors().as_slice()) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

pub fn decode_cache(bytes: &[u8]) -> std::result::Result<MeshEigenSystem, CacheError> {
    if bytes.len() < 4 || &bytes[..4] != CACHE_MAGIC {
        return Err(CacheError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(CacheError::Truncated);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != CACHE_VERSION {
        return Err(CacheError::UnsupportedVersion(version));
    }
    if bytes.len() < HEADER {
        return Err(CacheError::Truncated);
    }
    let d = u32_at(8);
    let k = u32_at(12) as usize;
    let n = u32_at(16) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let vol = f64_at(20);
    let floats = n
        .checked_mul(k)
        .and_then(|kn| kn.checked_add(n + k))
        .ok_or_else(|| CacheError::Malformed(format!("implausible sizes K={k}, N={n}")))?;
    let expected = floats
        .checked_mul(8)
        .and_then(|b| b.checked_add(HEADER + 4))
        .ok_or_else(|| CacheError::Malformed(format!("implausible sizes K={k}, N={n}")))?;
    if bytes.len() < expected {
        return Err(CacheError::Truncated);
    }
    if bytes.len() > expected {
        return Err(CacheError::Malformed(format!(
            "{} trailing bytes after checksum",
            bytes.len() - expected
        )));
    }
    let stored = u32_at(expected - 4);
    if crc32fast::hash(&bytes[..expected - 4]) != stored {
        return Err(CacheError::Checksum);
    }
    let mut off = HEADER;
    let mut take = |count: usize| -> Vec<f64> {
        let v = (0..count).map(|i| f64_at(off + 8 * i)).collect();
        off += 8 * count;
        v
    };
    let eigenvalues = take(n);
    let mass = take(k);
    let vectors = take(k * n);
    MeshEigenSystem::new(eigenvalues, DMatrix::from_vec(k, n, vectors), mass, d, vol)
        .map_err(|e| CacheError::Malformed(e.to_string()))
}

pub fn cache_write(mes: &MeshEigenSystem, path: &Path) -> Result<()> {
    let bytes = encode_cache(mes)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn cache_read(path: &Path) -> Result<MeshEigenSystem> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_cache(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MeshEigenSystem {
        let vecs = DMatrix::from_fn(5, 3, |i, j| ((i * 3 + j) as f64).sin() / 7.0);
        MeshEigenSystem::new(vec![0.0, 1.5, 2.25e-3], vecs, vec![0.1, 0.2, 0.3, 0.4, 1.0 / 3.0], 2, 1.0 + 1.0 / 3.0).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("es.bin");
        let mes = sample();
        cache_write(&mes, &path).unwrap();
        let back = cache_read(&path).unwrap();
        assert_eq!(back, mes);
        let bits = |m: &MeshEigenSystem| -> Vec<u64> {
            m.eigenvalues()
                .iter()
                .chain(m.mass())
                .chain(m.eigenvectors().as_slice())
                .map(|x| x.to_bits())
                .collect()
        };
        assert_eq!(bits(&back), bits(&mes));
        assert_eq!(std::fs::read(&path).unwrap().len(), HEADER + 8 * (3 + 5 + 15) + 4);
    }

    #[test]
    fn corruptions_are_reported() {
        let bytes = encode_cache(&sample()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        let e = decode_cache(&bad).unwrap_err();
        assert_eq!(e, CacheError::BadMagic);
        assert!(e.to_string().contains("not a cache file"));

        let mut bad = bytes.clone();
        bad[4..8].copy_from_slice(&999u32.to_le_bytes());
        let e = decode_cache(&bad).unwrap_err();
        assert!(e.to_string().contains("unsupported version"));

        assert_eq!(decode_cache(&bytes[..bytes.len() - 9]).unwrap_err(), CacheError::Truncated);

        let mut bad = bytes.clone();
        bad[HEADER + 3] ^= 0x10;
        assert_eq!(decode_cache(&bad).unwrap_err(), CacheError::Checksum);
    }
}
