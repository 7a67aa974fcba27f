use crate::error::{Error, Result};

/// Fixed-length set of dataset row ids with a cached popcount.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    words: Vec<u64>,
    len: usize,
    ones: usize,
}

impl std::fmt::Debug for Bitmap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Bitmap(len={}, ones={}, ", self.len, self.ones)?;
        for i in 0..self.len.min(64) {
            f.write_str(if self.contains(i) { "1" } else { "0" })?;
        }
        if self.len > 64 {
            f.write_str("...")?;
        }
        f.write_str(")")
    }
}

impl Bitmap {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
            ones: 0,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut words = vec![u64::MAX; len.div_ceil(64)];
        if len % 64 != 0 {
            if let Some(last) = words.last_mut() {
                *last = (1u64 << (len % 64)) - 1;
            }
        }
        Self {
            words,
            len,
            ones: len,
        }
    }

    pub fn from_rows<I: IntoIterator<Item = usize>>(len: usize, rows: I) -> Self {
        let mut bm = Self::zeros(len);
        for r in rows {
            bm.insert(r);
        }
        bm
    }

    /// Parses a `0`/`1` string, bit 0 first.
    pub fn from_bit_str(s: &str) -> Self {
        let bits: Vec<char> = s.chars().filter(|c| *c == '0' || *c == '1').collect();
        Self::from_rows(
            bits.len(),
            bits.iter()
                .enumerate()
                .filter(|(_, c)| **c == '1')
                .map(|(i, _)| i),
        )
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of set bits.
    #[inline]
    pub fn count(&self) -> usize {
        self.ones
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "row {i} out of range for bitmap of {}", self.len);
        let w = &mut self.words[i >> 6];
        let bit = 1u64 << (i & 63);
        if *w & bit == 0 {
            *w |= bit;
            self.ones += 1;
        }
    }

    fn check_len(&self, other: &Bitmap) -> Result<()> {
        if self.len != other.len {
            return Err(Error::BitmapLength {
                left: self.len,
                right: other.len,
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Bitmap, op: impl Fn(u64, u64) -> u64) -> Result<Bitmap> {
        self.check_len(other)?;
        let words: Vec<u64> = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| op(*a, *b))
            .collect();
        let ones = words.iter().map(|w| w.count_ones() as usize).sum();
        Ok(Bitmap {
            words,
            len: self.len,
            ones,
        })
    }

    pub fn and(&self, other: &Bitmap) -> Result<Bitmap> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Bitmap) -> Result<Bitmap> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn and_not(&self, other: &Bitmap) -> Result<Bitmap> {
        self.zip_with(other, |a, b| a & !b)
    }

    /// `|self & other|` without materializing the intersection.
    pub fn intersection_count(&self, other: &Bitmap) -> Result<usize> {
        self.check_len(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    /// True iff every bit of `inner` is also set in `self`.
    pub fn is_superset_of(&self, inner: &Bitmap) -> Result<bool> {
        self.check_len(inner)?;
        if inner.ones > self.ones {
            return Ok(false);
        }
        Ok(inner
            .words
            .iter()
            .zip(&self.words)
            .all(|(i, o)| i & !o == 0))
    }

    pub fn iter(&self) -> Ones<'_> {
        Ones {
            words: &self.words,
            idx: 0,
            cur: self.words.first().copied().unwrap_or(0),
        }
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

/// Iterator over set bit positions in ascending order.
pub struct Ones<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl Iterator for Ones<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let t = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * 64 + t);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}

/// Decides subsumption from the satisfier sets: `outer` subsumes `inner` iff
/// no row passes `inner` without passing `outer`.
pub fn subsumes_bitmap(outer: &Bitmap, inner: &Bitmap) -> Result<bool> {
    outer.is_superset_of(inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_masks_tail() {
        let bm = Bitmap::ones(70);
        assert_eq!(bm.count(), 70);
        assert_eq!(bm.iter().count(), 70);
        assert!(!bm.contains(70));
        assert_eq!(Bitmap::ones(64).iter().count(), 64);
    }

    #[test]
    fn subsumption_examples() {
        let outer = Bitmap::from_bit_str("0110");
        assert!(subsumes_bitmap(&outer, &Bitmap::from_bit_str("0010")).unwrap());
        assert!(!subsumes_bitmap(&outer, &Bitmap::from_bit_str("0011")).unwrap());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let err = subsumes_bitmap(&Bitmap::zeros(4), &Bitmap::zeros(5)).unwrap_err();
        assert!(matches!(err, Error::BitmapLength { left: 4, right: 5 }));
    }

    #[test]
    fn algebra_keeps_popcount() {
        let a = Bitmap::from_rows(130, [0, 5, 64, 129]);
        let b = Bitmap::from_rows(130, [5, 6, 129]);
        assert_eq!(a.and(&b).unwrap().to_vec(), vec![5, 129]);
        assert_eq!(a.or(&b).unwrap().count(), 5);
        assert_eq!(a.and_not(&b).unwrap().to_vec(), vec![0, 64]);
        assert_eq!(a.intersection_count(&b).unwrap(), 2);
    }
}
