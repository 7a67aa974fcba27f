use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::distance::Metric;
use crate::error::{Error, Result};
use crate::predicate::{AttributeSet, Bitmap, FilterExpr};
use crate::scalar::Scalar;

/// Token postings and sorted numeric columns used to turn filters into
/// bitmaps without touching every row.
#[derive(Clone, Debug, Default)]
pub struct AttributeIndex {
    len: usize,
    postings: HashMap<String, Bitmap>,
    columns: HashMap<String, Vec<(f64, u32)>>,
}

impl AttributeIndex {
    pub fn build(attributes: &[AttributeSet]) -> Self {
        let len = attributes.len();
        let mut postings: HashMap<String, Bitmap> = HashMap::new();
        let mut columns: HashMap<String, Vec<(f64, u32)>> = HashMap::new();
        for (row, a) in attributes.iter().enumerate() {
            for t in &a.tokens {
                postings
                    .entry(t.clone())
                    .or_insert_with(|| Bitmap::zeros(len))
                    .insert(row);
            }
            for (name, v) in &a.numerics {
                columns.entry(name.clone()).or_default().push((*v, row as u32));
            }
        }
        for col in columns.values_mut() {
            col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Self {
            len,
            postings,
            columns,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&str, usize)> {
        self.postings.iter().map(|(k, v)| (k.as_str(), v.count()))
    }

    pub fn bitmap(&self, f: &FilterExpr) -> Bitmap {
        match f {
            FilterExpr::True => Bitmap::ones(self.len),
            FilterExpr::Attr(t) => self
                .postings
                .get(t)
                .cloned()
                .unwrap_or_else(|| Bitmap::zeros(self.len)),
            FilterExpr::Range { attr, lo, hi } => {
                let Some(col) = self.columns.get(attr) else {
                    return Bitmap::zeros(self.len);
                };
                let start = lo.map_or(0, |l| col.partition_point(|(v, _)| *v < l));
                let end = hi.map_or(col.len(), |h| col.partition_point(|(v, _)| *v <= h));
                let rows = col[start..end.max(start)].iter().map(|(_, r)| *r as usize);
                Bitmap::from_rows(self.len, rows)
            }
            FilterExpr::And(children) => {
                let mut acc = self.bitmap(&children[0]);
                for c in &children[1..] {
                    if acc.count() == 0 {
                        break;
                    }
                    acc = acc.and(&self.bitmap(c)).expect("same length");
                }
                acc
            }
            FilterExpr::Or(children) => {
                let mut acc = self.bitmap(&children[0]);
                for c in &children[1..] {
                    acc = acc.or(&self.bitmap(c)).expect("same length");
                }
                acc
            }
        }
    }
}

/// `N` vectors of dimension `d` with one attribute set per vector.
#[derive(Clone, Debug)]
pub struct AttributedDataset<T: Scalar> {
    dim: usize,
    vectors: Vec<T>,
    attributes: Vec<AttributeSet>,
    metric: Metric,
    index: AttributeIndex,
}

impl<T: Scalar> AttributedDataset<T> {
    /// `vectors` is row-major, `attributes.len()` rows of `dim` values.
    pub fn new(
        dim: usize,
        vectors: Vec<T>,
        attributes: Vec<AttributeSet>,
        metric: Metric,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dataset("dimension must be at least 1".into()));
        }
        if vectors.len() != dim * attributes.len() {
            return Err(Error::Dataset(format!(
                "{} vector values do not form {} rows of dimension {dim}",
                vectors.len(),
                attributes.len()
            )));
        }
        let index = AttributeIndex::build(&attributes);
        Ok(Self {
            dim,
            vectors,
            attributes,
            metric,
            index,
        })
    }

    pub fn from_rows(rows: Vec<Vec<T>>, attributes: Vec<AttributeSet>, metric: Metric) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Dataset(format!(
                "row {bad} has dimension {} but row 0 has {dim}",
                rows[bad].len()
            )));
        }
        if rows.len() != attributes.len() {
            return Err(Error::Dataset(format!(
                "{} vectors but {} attribute rows",
                rows.len(),
                attributes.len()
            )));
        }
        Self::new(dim, rows.concat(), attributes, metric)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn vector(&self, row: usize) -> &[T] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[T] {
        &self.vectors
    }

    pub fn attributes(&self) -> &[AttributeSet] {
        &self.attributes
    }

    pub fn attribute_index(&self) -> &AttributeIndex {
        &self.index
    }

    #[inline]
    pub fn distance(&self, q: &[T], row: usize) -> T {
        self.metric.distance(q, self.vector(row))
    }

    /// Rows satisfying `f`.
    pub fn bitmap(&self, f: &FilterExpr) -> Bitmap {
        self.index.bitmap(f)
    }

    pub fn cardinality(&self, f: &FilterExpr) -> usize {
        match f {
            FilterExpr::True => self.len(),
            _ => self.bitmap(f).count(),
        }
    }

    /// Hex SHA-256 over shape, metric, vectors (as little-endian `f32`) and
    /// attribute lines. Identifies the data a bundle or cache was built on.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        h.update([self.metric.code()]);
        let mut buf = Vec::with_capacity(self.vectors.len() * 4);
        for v in &self.vectors {
            buf.extend_from_slice(&v.to_le_f32_bytes());
        }
        h.update(&buf);
        for a in &self.attributes {
            h.update(a.to_line().as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Rows satisfying `f`; see [`AttributedDataset::bitmap`].
pub fn bitmap<T: Scalar>(f: &FilterExpr, ds: &AttributedDataset<T>) -> Bitmap {
    ds.bitmap(f)
}

pub fn cardinality<T: Scalar>(f: &FilterExpr, ds: &AttributedDataset<T>) -> usize {
    ds.cardinality(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> AttributedDataset<f32> {
        let attrs = vec![
            AttributeSet::from_tokens(["A", "E"]).with_numeric("x", 1.0),
            AttributeSet::from_tokens(["B"]).with_numeric("x", 5.0),
            AttributeSet::from_tokens(["A", "B"]),
        ];
        AttributedDataset::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]], attrs, Metric::L2).unwrap()
    }

    #[test]
    fn bitmap_via_index() {
        let ds = tiny();
        let f = |s: &str| FilterExpr::parse(s).unwrap();
        assert_eq!(ds.bitmap(&f("A")).to_vec(), vec![0, 2]);
        assert_eq!(ds.bitmap(&f("A&B")).to_vec(), vec![2]);
        assert_eq!(ds.bitmap(&f("E|B")).to_vec(), vec![0, 1, 2]);
        assert_eq!(ds.bitmap(&f("x:[1,4]")).to_vec(), vec![0]);
        assert_eq!(ds.bitmap(&f("x:[*,*]")).to_vec(), vec![0, 1]);
        assert_eq!(ds.bitmap(&f("Z")).count(), 0);
        assert_eq!(ds.cardinality(&FilterExpr::True), 3);
    }

    #[test]
    fn shape_errors() {
        let e = AttributedDataset::<f32>::from_rows(
            vec![vec![0.0, 1.0], vec![1.0]],
            vec![AttributeSet::new(), AttributeSet::new()],
            Metric::L2,
        );
        assert!(e.is_err());
        let e = AttributedDataset::<f32>::from_rows(vec![vec![0.0]], vec![], Metric::L2);
        assert!(e.is_err());
    }
}
