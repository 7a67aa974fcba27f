//! Vector, attribute and filter files.
//!
//! Vectors are little-endian `fvecs` (per row: `i32` dim, then `dim` `f32`)
//! or a raw `f32` matrix with a `<file>.shape` sidecar holding `rows dim`.
//! Attribute files have one line per vector: comma separated tokens and
//! `name=value` numerics. Filter files have one filter per line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fvs_core::{AttributeSet, AttributedDataset, Error, FilterExpr, Metric, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorFormat {
    #[default]
    Fvecs,
    Raw,
}

impl FromStr for VectorFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fvecs" => Ok(Self::Fvecs),
            "raw" => Ok(Self::Raw),
            _ => Err(Error::Config(format!("unknown vector format {s:?}"))),
        }
    }
}

/// Row-major `f32` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<f32>> {
        self.data.chunks(self.dim).map(<[f32]>::to_vec).collect()
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Dataset(format!("row {i} has dimension {}, expected {dim}", r.len())));
        }
        Ok(Self {
            dim,
            data: rows.concat(),
        })
    }
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<Matrix> {
    let bytes = fs::read(path)?;
    let mut dim = None;
    let mut data = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let head = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| Error::Dataset("truncated fvecs header".into()))?;
        let d = i32::from_le_bytes(head.try_into().unwrap());
        if d <= 0 {
            return Err(Error::Dataset(format!("invalid fvecs dimension {d}")));
        }
        let d = d as usize;
        if *dim.get_or_insert(d) != d {
            return Err(Error::Dataset(format!(
                "dimension mismatch at row {}: {d} vs {}",
                data.len() / dim.unwrap(),
                dim.unwrap()
            )));
        }
        pos += 4;
        let body = bytes
            .get(pos..pos + 4 * d)
            .ok_or_else(|| Error::Dataset("truncated fvecs row".into()))?;
        data.extend(body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
        pos += 4 * d;
    }
    Ok(Matrix {
        dim: dim.unwrap_or(0),
        data,
    })
}

pub fn write_fvecs(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let d = i32::try_from(m.dim).map_err(|_| Error::Dataset("dimension too large".into()))?;
    for row in m.data.chunks(m.dim.max(1)) {
        w.write_all(&d.to_le_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn shape_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".shape");
    PathBuf::from(s)
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let shape = fs::read_to_string(shape_path(path))?;
    let dims: Vec<usize> = shape
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Dataset(format!("bad shape {shape:?}"))))
        .collect::<Result<_>>()?;
    let [rows, dim] = dims[..] else {
        return Err(Error::Dataset(format!("shape must be `rows dim`, got {shape:?}")));
    };
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != rows * dim * 4 {
        return Err(Error::Dataset(format!(
            "raw file has {} bytes, shape {rows}x{dim} needs {}",
            bytes.len(),
            rows * dim * 4
        )));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Matrix { dim, data })
}

pub fn write_raw(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    for v in &m.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    fs::write(shape_path(path), format!("{} {}\n", m.rows(), m.dim))?;
    Ok(())
}

pub fn read_vectors(path: impl AsRef<Path>, format: VectorFormat) -> Result<Matrix> {
    match format {
        VectorFormat::Fvecs => read_fvecs(path),
        VectorFormat::Raw => read_raw(path),
    }
}

pub fn write_vectors(path: impl AsRef<Path>, m: &Matrix, format: VectorFormat) -> Result<()> {
    match format {
        VectorFormat::Fvecs => write_fvecs(path, m),
        VectorFormat::Raw => write_raw(path, m),
    }
}

pub fn read_attributes(path: impl AsRef<Path>) -> Result<Vec<AttributeSet>> {
    BufReader::new(File::open(path)?)
        .lines()
        .map(|l| AttributeSet::parse_line(&l?))
        .collect()
}

pub fn write_attributes(path: impl AsRef<Path>, attrs: &[AttributeSet]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for a in attrs {
        writeln!(w, "{}", a.to_line())?;
    }
    w.flush()?;
    Ok(())
}

/// One filter per line; blank lines and `#` comments are skipped.
pub fn read_filters(path: impl AsRef<Path>) -> Result<Vec<FilterExpr>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(FilterExpr::parse)
        .collect()
}

pub fn write_filters(path: impl AsRef<Path>, filters: &[FilterExpr]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for f in filters {
        writeln!(w, "{}", f.key())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads vectors and, when given, their attribute file. Without one every
/// row gets the empty attribute set.
pub fn ingest(
    vectors: impl AsRef<Path>,
    format: VectorFormat,
    attributes: Option<&Path>,
    metric: Metric,
) -> Result<AttributedDataset<f32>> {
    let m = read_vectors(vectors, format)?;
    let attrs = match attributes {
        Some(p) => read_attributes(p)?,
        None => vec![AttributeSet::new(); m.rows()],
    };
    if attrs.len() != m.rows() {
        return Err(Error::Dataset(format!(
            "{} attribute lines for {} vectors",
            attrs.len(),
            m.rows()
        )));
    }
    AttributedDataset::new(m.dim, m.data, attrs, metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fvecs_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.fvecs");
        let m = Matrix {
            dim: 3,
            data: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        write_fvecs(&p, &m).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 2 * (4 + 12));
        let back = read_fvecs(&p).unwrap();
        assert_eq!((back.rows(), back.dim), (2, 3));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.fvecs");
        let mut bytes = Vec::new();
        for d in [2i32, 3] {
            bytes.extend(d.to_le_bytes());
            bytes.extend(std::iter::repeat_n(0u8, 4 * d as usize));
        }
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_fvecs(&p), Err(Error::Dataset(_))));
    }

    #[test]
    fn attribute_count_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let v = dir.path().join("v.fvecs");
        let a = dir.path().join("a.txt");
        write_fvecs(&v, &Matrix { dim: 1, data: vec![0.0, 1.0] }).unwrap();
        fs::write(&a, "A,E\n").unwrap();
        assert!(ingest(&v, VectorFormat::Fvecs, Some(&a), Metric::L2).is_err());
        fs::write(&a, "A,E\nB,x=2.5\n").unwrap();
        let ds = ingest(&v, VectorFormat::Fvecs, Some(&a), Metric::L2).unwrap();
        assert!(ds.attributes()[0].has("A") && ds.attributes()[0].has("E"));
        assert_eq!(ds.cardinality(&FilterExpr::parse("x:[2,3]").unwrap()), 1);
    }
}
