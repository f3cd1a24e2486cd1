//! Binary index format (little-endian):
//!
//! ```text
//! magic "TAPQ" | version u32 | dim u32 | m u32 | k u32 | n u64
//! codebooks f32[m * k * dim/m] | codes u8[n * m]
//! n × (len u32 | UTF-8 id bytes)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{PqError, PqIndex};

pub const MAGIC: &[u8; 4] = b"TAPQ";
pub const VERSION: u32 = 1;

pub fn write_index<W: Write>(index: &PqIndex, mut w: W) -> Result<(), PqError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(index.dim() as u32).to_le_bytes())?;
    w.write_all(&(index.m() as u32).to_le_bytes())?;
    w.write_all(&(index.k() as u32).to_le_bytes())?;
    w.write_all(&(index.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(index.codebooks().len() * 4);
    for v in index.codebooks() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.write_all(index.codes())?;
    for id in index.ids() {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_index(index: &PqIndex, path: impl AsRef<Path>) -> Result<(), PqError> {
    let file = std::fs::File::create(path)?;
    write_index(index, std::io::BufWriter::new(file))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], PqError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.bytes.len())
            .ok_or_else(|| PqError::CorruptPayload(format!("truncated {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, PqError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, PqError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_index<R: Read>(mut r: R) -> Result<PqIndex, PqError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let magic = cur.take(4, "magic").map_err(|_| PqError::BadMagic)?;
    if magic != MAGIC {
        return Err(PqError::BadMagic);
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(PqError::UnsupportedVersion(version));
    }
    let dim = cur.u32("header")? as usize;
    let m = cur.u32("header")? as usize;
    let k = cur.u32("header")? as usize;
    let n = usize::try_from(cur.u64("header")?).map_err(|_| PqError::CorruptPayload("entry count".into()))?;
    if m == 0 || !dim.is_multiple_of(m) || k == 0 || k > 256 {
        return Err(PqError::CorruptPayload(format!("header dim={dim} m={m} k={k}")));
    }
    let cb_len = m * k * (dim / m);
    let codebooks: Vec<f32> = cur
        .take(cb_len.checked_mul(4).ok_or_else(|| PqError::CorruptPayload("codebook size".into()))?, "codebooks")?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let codes = cur
        .take(n.checked_mul(m).ok_or_else(|| PqError::CorruptPayload("code size".into()))?, "codes")?
        .to_vec();
    let mut ids = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let len = cur.u32("id length")? as usize;
        let raw = cur.take(len, "id")?;
        let id = std::str::from_utf8(raw).map_err(|_| PqError::CorruptPayload("id is not UTF-8".into()))?;
        ids.push(id.to_string());
    }
    if cur.pos != bytes.len() {
        return Err(PqError::CorruptPayload(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    PqIndex::from_parts(dim, m, k, codebooks, codes, ids)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<PqIndex, PqError> {
    let file = std::fs::File::open(path)?;
    read_index(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PqIndex {
        PqIndex::from_parts(
            4,
            2,
            2,
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            vec![0, 1, 1, 0, 1, 1],
            vec!["a".into(), "βeta".into(), "".into()],
        )
        .unwrap()
    }

    #[test]
    fn layout_is_stable() {
        let mut buf = Vec::new();
        write_index(&small(), &mut buf).unwrap();
        assert_eq!(&buf[..4], b"TAPQ");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[20..28], &3u64.to_le_bytes());
        assert_eq!(buf.len(), 28 + 8 * 4 + 6 + (4 + 1) + (4 + 5) + 4);
        assert_eq!(read_index(buf.as_slice()).unwrap(), small());
    }

    #[test]
    fn corrupt_inputs() {
        let mut buf = Vec::new();
        write_index(&small(), &mut buf).unwrap();
        for cut in [2, 10, 30, buf.len() - 1] {
            let err = read_index(&buf[..cut]).unwrap_err();
            if cut < 4 {
                assert_eq!(err, PqError::BadMagic);
            } else {
                assert!(matches!(err, PqError::CorruptPayload(_)), "cut {cut}: {err:?}");
            }
        }
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_index(extra.as_slice()), Err(PqError::CorruptPayload(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert_eq!(read_index(bad.as_slice()), Err(PqError::BadMagic));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert_eq!(read_index(v2.as_slice()), Err(PqError::UnsupportedVersion(2)));
        let mut bad_code = buf;
        bad_code[28 + 32] = 9;
        assert!(matches!(read_index(bad_code.as_slice()), Err(PqError::CorruptPayload(_))));
    }
}
