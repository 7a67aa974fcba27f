//! Dense relations over a few thousand nodes and their transitive reduction.

use rayon::prelude::*;

/// `n x n` bit matrix, one row of words per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        let stride = n.div_ceil(64);
        Self {
            n,
            stride,
            words: vec![0; n * stride],
        }
    }

    /// Fills row `i` with `rel(i, j)` for every `j`, rows in parallel.
    pub fn from_fn(n: usize, rel: impl Fn(usize, usize) -> bool + Sync) -> Self {
        let mut m = Self::new(n);
        let stride = m.stride;
        if stride > 0 {
            m.words
                .par_chunks_mut(stride)
                .enumerate()
                .for_each(|(i, row)| {
                    for j in 0..n {
                        if rel(i, j) {
                            row[j >> 6] |= 1 << (j & 63);
                        }
                    }
                });
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        (self.words[i * self.stride + (j >> 6)] >> (j & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        self.words[i * self.stride + (j >> 6)] |= 1 << (j & 63);
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.words[i * self.stride..(i + 1) * self.stride]
    }

    /// Column indices set in row `i`, ascending.
    pub fn row_ones(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().enumerate().flat_map(|(w, &bits)| {
            let mut b = bits;
            std::iter::from_fn(move || {
                if b == 0 {
                    return None;
                }
                let t = b.trailing_zeros() as usize;
                b &= b - 1;
                Some(w * 64 + t)
            })
        })
    }
}

/// Hasse edges of a strict order on nodes `0..n` that are numbered
/// topologically (`above(i, j)` is only asked for `i < j`).
///
/// Returns the children of each node in ascending order. The relation given
/// need not be transitively closed: its closure is reduced, so every pair
/// related through a chain stays connected through a path.
pub fn transitive_reduction(n: usize, above: impl Fn(usize, usize) -> bool + Sync) -> Vec<Vec<usize>> {
    let rel = BitMatrix::from_fn(n, |i, j| i < j && above(i, j));
    reduce(&rel)
}

/// As [`transitive_reduction`] for an already materialized upper-triangular
/// relation.
pub fn reduce(rel: &BitMatrix) -> Vec<Vec<usize>> {
    let n = rel.len();
    let mut closure = BitMatrix::new(n);
    let mut children = vec![Vec::new(); n];
    let stride = closure.stride;
    for i in (0..n).rev() {
        let mut covered = vec![0u64; stride];
        for j in rel.row_ones(i) {
            if (covered[j >> 6] >> (j & 63)) & 1 == 1 {
                continue;
            }
            children[i].push(j);
            covered[j >> 6] |= 1 << (j & 63);
            for (c, w) in covered.iter_mut().zip(closure.row(j)) {
                *c |= w;
            }
        }
        closure.words[i * stride..(i + 1) * stride].copy_from_slice(&covered);
    }
    children
}

/// Reverses a child adjacency list.
pub fn parents_of(children: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut parents = vec![Vec::new(); children.len()];
    for (p, cs) in children.iter().enumerate() {
        for &c in cs {
            parents[c].push(p);
        }
    }
    parents
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_and_diamond() {
        // 0 > 1 > 3, 0 > 2 > 3, plus the implied 0 > 3.
        let rel = |i: usize, j: usize| matches!((i, j), (0, 1) | (0, 2) | (0, 3) | (1, 3) | (2, 3));
        assert_eq!(transitive_reduction(4, rel), vec![vec![1, 2], vec![3], vec![3], vec![]]);
    }

    #[test]
    fn unclosed_input_is_closed_first() {
        // 0 > 1 > 2 given without 0 > 2, plus 0 > 2's consequence via 1.
        let rel = |i: usize, j: usize| matches!((i, j), (0, 1) | (1, 2) | (0, 2));
        assert_eq!(transitive_reduction(3, rel), vec![vec![1], vec![2], vec![]]);
        let rel = |i: usize, j: usize| matches!((i, j), (0, 1) | (1, 2));
        assert_eq!(transitive_reduction(3, rel), vec![vec![1], vec![2], vec![]]);
    }

    #[test]
    fn matrix_rows() {
        let m = BitMatrix::from_fn(130, |i, j| (i + j) % 64 == 0);
        assert_eq!(m.row_ones(1).collect::<Vec<_>>(), vec![63, 127]);
        assert!(m.get(0, 128));
        assert_eq!(parents_of(&[vec![1, 2], vec![2], vec![]]), vec![vec![], vec![0], vec![0, 1]]);
    }
}
