//! Binary MPS checkpoints.
//!
//! ```text
//! magic    "MPS1"              4 bytes
//! version  u8 (= 1)
//! n_sites  u32 LE
//! per site:
//!   left, phys, right          3 × u32 LE
//!   left·phys·right × f64 LE   payload
//! checksum u64 LE              FNV-1a 64 over all payload bytes
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{MatrixProductState, SiteTensor};
use crate::model::PHYS_DIM;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MPS1";
pub const VERSION: u8 = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

pub fn write_checkpoint<W: Write>(state: &MatrixProductState, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(state.n_sites() as u32).to_le_bytes())?;
    let mut hash = FNV_OFFSET;
    for t in state.tensors() {
        for d in [t.left, PHYS_DIM, t.right] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.data.len() * 8);
        for x in &t.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        hash = fnv1a(hash, &buf);
        w.write_all(&buf)?;
    }
    w.write_all(&hash.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<MatrixProductState> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", version[0])));
    }
    let n = read_u32(&mut r)? as usize;
    if n == 0 {
        return Err(Error::Checkpoint("zero sites".into()));
    }
    let mut hash = FNV_OFFSET;
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let left = read_u32(&mut r)? as usize;
        let phys = read_u32(&mut r)? as usize;
        let right = read_u32(&mut r)? as usize;
        if phys != PHYS_DIM {
            return Err(Error::Checkpoint(format!("physical dimension {phys}")));
        }
        let len = left
            .checked_mul(phys)
            .and_then(|x| x.checked_mul(right))
            .filter(|&x| x <= 1 << 28)
            .ok_or_else(|| Error::Checkpoint("tensor too large".into()))?;
        let mut buf = vec![0u8; len * 8];
        r.read_exact(&mut buf)?;
        hash = fnv1a(hash, &buf);
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(SiteTensor::new(left, right, data)?);
    }
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    if u64::from_le_bytes(b) != hash {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    MatrixProductState::from_tensors(tensors, None)
        .map_err(|e| Error::Checkpoint(format!("inconsistent tensors: {e}")))
}

/// Writes to `path` atomically (temporary file + rename).
pub fn save(state: &MatrixProductState, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(state, &mut buf)?;
    crate::atomic::write_atomic(path, &buf)
}

pub fn load(path: &Path) -> Result<MatrixProductState> {
    let f = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::overlap;

    #[test]
    fn round_trip_and_corruption() {
        let m = MatrixProductState::random(6, 4, 11).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"MPS1");
        assert_eq!(buf[4], 1);
        let back = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.tensors(), m.tensors());
        assert!((overlap(&back, &m).unwrap() - 1.0).abs() < 1e-12);

        let mut bad = buf.clone();
        bad[40] ^= 0x10;
        assert!(matches!(read_checkpoint(&bad[..]), Err(Error::Checkpoint(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad[..]).is_err());
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
    }
}
