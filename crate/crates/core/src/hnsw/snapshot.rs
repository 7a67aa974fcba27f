//! Little-endian binary form of a graph. Vectors are not stored; a snapshot
//! is only meaningful together with the dataset it was built from.
//!
//! ```text
//! magic[8] version:u32 m:u32 efc:u32 seed:u64 nodes:u32 max_level:u32 entry:u32
//! per node: row:u32 level:u32 { count:u32 ids:u32* } per layer 0..=level
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{HnswGraph, HnswParams, MAX_LEVEL};
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"FVSHNSW\0";
pub const SNAPSHOT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Snapshot(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Snapshot(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl HnswGraph {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(64 + self.len() * (8 + 4 * 2 * self.params.m));
        out.extend_from_slice(&SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        put_u32(&mut out, self.params.m)?;
        put_u32(&mut out, self.params.efc)?;
        out.extend_from_slice(&self.params.seed.to_le_bytes());
        put_u32(&mut out, self.row_ids.len())?;
        put_u32(&mut out, self.max_level)?;
        out.extend_from_slice(&self.entry.to_le_bytes());
        for (row, layers) in self.row_ids.iter().zip(&self.links) {
            out.extend_from_slice(&row.to_le_bytes());
            put_u32(&mut out, layers.len() - 1)?;
            for list in layers {
                put_u32(&mut out, list.len())?;
                for id in list {
                    out.extend_from_slice(&id.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor { buf, pos: 0 };
        if c.take(8)? != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = c.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let m = c.u32()? as usize;
        let efc = c.u32()? as usize;
        let seed = c.u64()?;
        let n = c.u32()? as usize;
        let max_level = c.u32()? as usize;
        let entry = c.u32()?;
        if m < 2 || n == 0 || entry as usize >= n || max_level > MAX_LEVEL {
            return Err(Error::Snapshot("invalid header".into()));
        }
        let mut row_ids = Vec::with_capacity(n);
        let mut links = Vec::with_capacity(n);
        for node in 0..n {
            row_ids.push(c.u32()?);
            let level = c.u32()? as usize;
            if level > max_level {
                return Err(Error::Snapshot(format!("node {node} level {level} above max")));
            }
            let mut layers = Vec::with_capacity(level + 1);
            for layer in 0..=level {
                let count = c.u32()? as usize;
                let cap = if layer == 0 { 2 * m } else { m };
                if count > cap {
                    return Err(Error::Snapshot(format!("node {node} exceeds degree cap")));
                }
                let mut list = Vec::with_capacity(count);
                for _ in 0..count {
                    let id = c.u32()?;
                    if id as usize >= n {
                        return Err(Error::Snapshot(format!("neighbor {id} out of range")));
                    }
                    list.push(id);
                }
                layers.push(list);
            }
            links.push(layers);
        }
        if c.pos != buf.len() {
            return Err(Error::Snapshot("trailing bytes".into()));
        }
        if links[entry as usize].len() != max_level + 1 {
            return Err(Error::Snapshot("entry point is not on the top layer".into()));
        }
        for (node, layers) in links.iter().enumerate() {
            for (layer, list) in layers.iter().enumerate() {
                if list.iter().any(|&nb| links[nb as usize].len() <= layer) {
                    return Err(Error::Snapshot(format!("node {node} links above a neighbor's level")));
                }
            }
        }
        let mut g = HnswGraph {
            params: HnswParams { m, efc, seed },
            row_ids,
            links,
            entry,
            max_level,
            base_offsets: Vec::new(),
            base_links: Vec::new(),
        };
        g.pack_base_layer();
        Ok(g)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AttributedDataset;
    use crate::distance::Metric;
    use crate::predicate::AttributeSet;

    fn graph() -> HnswGraph {
        let rows: Vec<Vec<f32>> = (0..200)
            .map(|i| vec![(i % 17) as f32, (i % 13) as f32, (i / 7) as f32])
            .collect();
        let ds = AttributedDataset::from_rows(rows, vec![AttributeSet::new(); 200], Metric::L2)
            .unwrap();
        let subset: Vec<usize> = (0..200).step_by(2).collect();
        HnswGraph::build(&ds, &subset, HnswParams::new(3, 20, 9)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = graph();
        let bytes = g.to_bytes().unwrap();
        let back = HnswGraph::from_bytes(&bytes).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let g = graph();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        g.save(&p).unwrap();
        assert_eq!(HnswGraph::load(&p).unwrap(), g);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let bytes = graph().to_bytes().unwrap();
        assert!(HnswGraph::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(HnswGraph::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(HnswGraph::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(HnswGraph::from_bytes(&long).is_err());
    }
}
