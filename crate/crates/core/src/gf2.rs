//! Bit-packed dense matrices over GF(2): rank and unique solution of `A x = b`.

use crate::bits::BitArray;

/// Row-major, one packed row per equation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    cols: usize,
    stride: usize,
    data: Vec<u64>,
    rows: usize,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = cols.div_ceil(64);
        Self { cols, stride, data: vec![0; rows * stride], rows }
    }

    pub fn from_rows(rows: &[BitArray], cols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols);
            m.row_mut(r).copy_from_slice(row.words());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    fn row_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.row(r)[c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let mask = 1u64 << (c % 64);
        let w = &mut self.row_mut(r)[c / 64];
        if v {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// `dst ^= src`, touching only words from `from_word` on.
    fn xor_rows(&mut self, dst: usize, src: usize, from_word: usize) {
        debug_assert_ne!(dst, src);
        let s = self.stride;
        let (lo, hi) = self.data.split_at_mut(dst.max(src) * s);
        let (d, sr) = if dst < src {
            (&mut lo[dst * s..(dst + 1) * s], &hi[..s])
        } else {
            (&mut hi[..s], &lo[src * s..(src + 1) * s])
        };
        for (a, b) in d[from_word..].iter_mut().zip(&sr[from_word..]) {
            *a ^= b;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.data.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    /// Reduces to reduced row-echelon form over the first `pivot_cols`
    /// columns; returns the pivot column of each leading row.
    fn reduce(&mut self, pivot_cols: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..pivot_cols {
            if rank == self.rows {
                break;
            }
            let Some(p) = (rank..self.rows).find(|&r| self.get(r, c)) else {
                continue;
            };
            self.swap_rows(rank, p);
            let word = c / 64;
            for r in 0..self.rows {
                if r != rank && self.get(r, c) {
                    self.xor_rows(r, rank, word);
                }
            }
            pivots.push(c);
            rank += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().reduce(self.cols).len()
    }

    /// Keeps only the listed columns, in order.
    pub fn select_columns(&self, columns: &[u32]) -> Self {
        let mut out = Self::zeros(self.rows, columns.len());
        for r in 0..self.rows {
            for (j, &c) in columns.iter().enumerate() {
                if self.get(r, c as usize) {
                    out.set(r, j, true);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("system is rank deficient: rank {rank} < {unknowns} unknowns")]
pub struct SingularSystem {
    pub rank: usize,
    pub unknowns: usize,
}

/// Unique solution of `a x = rhs`, requiring full column rank. Consistency of
/// surplus equations is not checked.
pub fn solve(a: &Gf2Matrix, rhs: &BitArray) -> Result<BitArray, SingularSystem> {
    assert_eq!(a.rows(), rhs.len());
    let n = a.cols();
    let mut aug = Gf2Matrix::zeros(a.rows(), n + 1);
    for r in 0..a.rows() {
        let src = a.row(r).to_vec();
        aug.row_mut(r)[..src.len()].copy_from_slice(&src);
        aug.set(r, n, rhs.get(r));
    }
    let pivots = aug.reduce(n);
    if pivots.len() < n {
        return Err(SingularSystem { rank: pivots.len(), unknowns: n });
    }
    let mut x = BitArray::zeros(n);
    for (r, &c) in pivots.iter().enumerate() {
        x.set(c, aug.get(r, n));
    }
    Ok(x)
}
