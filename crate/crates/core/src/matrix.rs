//! Square integer matrices and the block/renaming constructions used by the
//! reductions.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::num::Rational;

/// A square matrix with small integer entries, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    dim: usize,
    entries: Vec<i64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl Matrix {
    pub fn zero(dim: usize) -> Self {
        Matrix { dim, entries: vec![0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zero(dim);
        for i in 0..dim {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from rows; returns `None` if the rows are not square.
    pub fn from_rows(rows: &[Vec<i64>]) -> Option<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        Some(Matrix { dim, entries: rows.iter().flatten().copied().collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: i64) {
        self.entries[i * self.dim + j] = value;
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.dim.max(1)).take(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_identity(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j) == i64::from(i == j)))
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zero(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Matrix product `self * other`. Panics on dimension mismatch or overflow.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        let n = self.dim;
        let mut out = Matrix::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    let b = other.get(k, j);
                    if b != 0 {
                        let cur = out.get(i, j);
                        let add = a.checked_mul(b).expect("matrix entry overflow");
                        out.set(i, j, cur.checked_add(add).expect("matrix entry overflow"));
                    }
                }
            }
        }
        out
    }

    pub fn pow(&self, exp: usize) -> Matrix {
        let mut out = Matrix::identity(self.dim);
        for _ in 0..exp {
            out = out.mul(self);
        }
        out
    }

    /// Matrix-vector product over the rationals.
    pub fn apply(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch");
        (0..self.dim)
            .map(|i| {
                let mut acc = Rational::zero();
                for (j, x) in v.iter().enumerate() {
                    let a = self.get(i, j);
                    if a == 1 {
                        acc += x;
                    } else if a != 0 {
                        acc += x * Rational::from_integer(BigInt::from(a));
                    }
                }
                acc
            })
            .collect()
    }

    /// Block-diagonal matrix `diag(self, other)`.
    pub fn block_diag(&self, other: &Matrix) -> Matrix {
        let n = self.dim + other.dim;
        let mut out = Matrix::zero(n);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(i, j, self.get(i, j));
            }
        }
        for i in 0..other.dim {
            for j in 0..other.dim {
                out.set(self.dim + i, self.dim + j, other.get(i, j));
            }
        }
        out
    }

    /// `diag(self, I_extra)`.
    pub fn extend(&self, extra: usize) -> Matrix {
        self.block_diag(&Matrix::identity(extra))
    }

    /// Renames counters: the result maps counter `rename[a]` to `rename[b]`
    /// exactly as `self` maps `a` to `b`. `rename` must be a permutation.
    pub fn renamed(&self, rename: &[usize]) -> Matrix {
        assert_eq!(rename.len(), self.dim, "renaming has wrong length");
        let mut out = Matrix::zero(self.dim);
        for a in 0..self.dim {
            for b in 0..self.dim {
                out.set(rename[a], rename[b], self.get(a, b));
            }
        }
        out
    }

    /// Embeds `block` into an `n`-dimensional identity so that it acts on the
    /// counters `offset .. offset + block.dim()`.
    pub fn embed_at(n: usize, block: &Matrix, offset: usize) -> Matrix {
        let k = block.dim;
        assert!(offset + k <= n, "block does not fit");
        let mut out = Matrix::identity(n);
        for i in 0..k {
            for j in 0..k {
                out.set(offset + i, offset + j, block.get(i, j));
            }
        }
        out
    }

    /// The `dim`-dimensional reset matrix for `counter`: identity with a zero
    /// in that diagonal position.
    pub fn reset(dim: usize, counter: usize) -> Matrix {
        let mut m = Matrix::identity(dim);
        m.set(counter, counter, 0);
        m
    }

    /// The permutation matrix that moves the value of counter `a` to `perm[a]`.
    pub fn permutation(perm: &[usize]) -> Matrix {
        let mut m = Matrix::zero(perm.len());
        for (a, &b) in perm.iter().enumerate() {
            m.set(b, a, 1);
        }
        m
    }

    /// Recovers the permutation if this is a permutation matrix.
    pub fn as_permutation(&self) -> Option<Vec<usize>> {
        let n = self.dim;
        let mut perm = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        for a in 0..n {
            for b in 0..n {
                match self.get(b, a) {
                    0 => {}
                    1 if perm[a] == usize::MAX && !seen[b] => {
                        perm[a] = b;
                        seen[b] = true;
                    }
                    _ => return None,
                }
            }
            if perm[a] == usize::MAX {
                return None;
            }
        }
        Some(perm)
    }
}

/// Matrices with arbitrary-precision entries, used where long products occur.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BigMatrix {
    dim: usize,
    entries: Vec<BigInt>,
}

impl BigMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![BigInt::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = BigInt::one();
        }
        BigMatrix { dim, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.dim + j]
    }

    /// `self * small`.
    pub fn right_mul(&self, small: &Matrix) -> BigMatrix {
        let n = self.dim;
        let mut entries = vec![BigInt::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = small.get(k, j);
                    if b != 0 {
                        entries[i * n + j] += a * b;
                    }
                }
            }
        }
        BigMatrix { dim: n, entries }
    }

    pub fn apply(&self, v: &[Rational]) -> Vec<Rational> {
        (0..self.dim)
            .map(|i| {
                let mut acc = Rational::zero();
                for (j, x) in v.iter().enumerate() {
                    let a = self.get(i, j);
                    if !a.is_zero() {
                        acc += x * Rational::from_integer(a.clone());
                    }
                }
                acc
            })
            .collect()
    }
}

impl From<&Matrix> for BigMatrix {
    fn from(m: &Matrix) -> Self {
        BigMatrix { dim: m.dim, entries: m.entries.iter().map(|&x| BigInt::from(x)).collect() }
    }
}

/// Permutation helpers; a permutation is a vector mapping `a` to `perm[a]`.
pub mod perm {
    pub fn identity(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    /// `outer ∘ inner`: apply `inner` first.
    pub fn compose(outer: &[usize], inner: &[usize]) -> Vec<usize> {
        inner.iter().map(|&x| outer[x]).collect()
    }

    pub fn inverse(p: &[usize]) -> Vec<usize> {
        let mut inv = vec![0; p.len()];
        for (a, &b) in p.iter().enumerate() {
            inv[b] = a;
        }
        inv
    }

    /// Smallest `k >= 1` with `p^k = id`.
    pub fn order(p: &[usize]) -> usize {
        let id = identity(p.len());
        let mut cur = p.to_vec();
        let mut k = 1;
        while cur != id {
            cur = compose(p, &cur);
            k += 1;
        }
        k
    }

    /// The cyclic shift `a ↦ (a + offset) mod n`.
    pub fn shift(n: usize, offset: usize) -> Vec<usize> {
        (0..n).map(|a| (a + offset) % n).collect()
    }
}
