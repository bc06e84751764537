//! Sparse LDLᵀ factorisation of symmetric matrices (up-looking, elimination-tree
//! based) for the quasi-definite KKT systems of the interior-point solver.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Upper triangle of a symmetric matrix in compressed-column form, already
/// permuted into elimination order.
#[derive(Debug, Clone)]
pub struct UpperCsc {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl UpperCsc {
    /// Builds the pattern from `(row, col)` pairs (any triangle; duplicates
    /// merged). Returns the matrix with zero values.
    pub fn from_pattern(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, c) in entries {
            let (lo, hi) = if r <= c { (r, c) } else { (c, r) };
            cols[hi].push(lo);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for (c, mut rows) in cols.into_iter().enumerate() {
            rows.push(c);
            rows.sort_unstable();
            rows.dedup();
            row_idx.extend(rows);
            col_ptr.push(row_idx.len());
        }
        let nnz = row_idx.len();
        UpperCsc { n, col_ptr, row_idx, values: vec![0.0; nnz] }
    }

    /// Storage slot of entry `(r, c)` (either triangle).
    pub fn slot(&self, r: usize, c: usize) -> usize {
        let (lo, hi) = if r <= c { (r, c) } else { (c, r) };
        let rows = &self.row_idx[self.col_ptr[hi]..self.col_ptr[hi + 1]];
        self.col_ptr[hi] + rows.binary_search(&lo).expect("entry outside the sparsity pattern")
    }

    /// `y = A x` using the symmetric structure.
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.n {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[p];
                let v = self.values[p];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
    }
}

/// Symbolic analysis shared by every factorisation with the same pattern.
#[derive(Debug, Clone)]
pub struct Symbolic {
    parent: Vec<usize>,
    l_ptr: Vec<usize>,
}

impl Symbolic {
    pub fn analyse(a: &UpperCsc) -> Self {
        let n = a.n;
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut count = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for p in a.col_ptr[k]..a.col_ptr[k + 1] {
                let mut i = a.row_idx[p];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        count[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut l_ptr = vec![0; n + 1];
        for k in 0..n {
            l_ptr[k + 1] = l_ptr[k] + count[k];
        }
        Symbolic { parent, l_ptr }
    }

    pub fn factor_nnz(&self) -> usize {
        *self.l_ptr.last().unwrap_or(&0)
    }
}

/// `A = L D Lᵀ` with unit lower-triangular `L` stored by columns.
#[derive(Debug, Clone)]
pub struct Factor {
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    pub d: Vec<f64>,
}

impl Factor {
    pub fn compute(a: &UpperCsc, sym: &Symbolic) -> Result<Self> {
        let n = a.n;
        let nnz = sym.factor_nnz();
        let mut l_idx = vec![0; nnz];
        let mut l_val = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0; n];
        let mut flag = vec![NONE; n];
        let mut fill = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in a.col_ptr[k]..a.col_ptr[k + 1] {
                let mut i = a.row_idx[p];
                y[i] += a.values[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = sym.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let end = sym.l_ptr[i] + fill[i];
                for p in sym.l_ptr[i]..end {
                    y[l_idx[p]] -= l_val[p] * yi;
                }
                let lki = yi / d[i];
                d[k] -= lki * yi;
                l_idx[end] = k;
                l_val[end] = lki;
                fill[i] += 1;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(Error::Factorization(format!("zero or non-finite pivot at column {k}")));
            }
        }
        Ok(Factor { l_ptr: sym.l_ptr.clone(), l_idx, l_val, d })
    }

    /// Number of negative pivots, the negative inertia of `A`.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|v| **v < 0.0).count()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for j in 0..n {
            let bj = b[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                b[self.l_idx[p]] -= self.l_val[p] * bj;
            }
        }
        for j in 0..n {
            b[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut acc = b[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                acc -= self.l_val[p] * b[self.l_idx[p]];
            }
            b[j] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn to_csc(m: &DMatrix<f64>) -> UpperCsc {
        let n = m.nrows();
        let entries: Vec<(usize, usize)> = (0..n).flat_map(|c| (0..=c).map(move |r| (r, c))).filter(|(r, c)| m[(*r, *c)] != 0.0).collect();
        let mut a = UpperCsc::from_pattern(n, entries);
        for c in 0..n {
            for p in a.col_ptr[c]..a.col_ptr[c + 1] {
                a.values[p] = m[(a.row_idx[p], c)];
            }
        }
        a
    }

    #[test]
    fn quasi_definite_inertia() {
        // [[4, 1], [1, -3]] has one negative eigenvalue
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, -3.0]);
        let a = to_csc(&m);
        let f = Factor::compute(&a, &Symbolic::analyse(&a)).unwrap();
        assert_eq!(f.negative_pivots(), 1);
        let mut b = vec![1.0, 2.0];
        f.solve_in_place(&mut b);
        let x = m.lu().solve(&DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert!((b[0] - x[0]).abs() < 1e-14 && (b[1] - x[1]).abs() < 1e-14);
    }

    #[test]
    fn zero_pivot_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let a = to_csc(&m);
        assert!(Factor::compute(&a, &Symbolic::analyse(&a)).is_err());
    }

    proptest! {
        #[test]
        fn solves_random_sparse_quasi_definite(seed in proptest::collection::vec(-1.0f64..1.0, 200), n in 3usize..12, m in 1usize..6) {
            let size = n + m;
            let mut k = DMatrix::zeros(size, size);
            let mut it = seed.iter().cycle();
            for i in 0..n {
                k[(i, i)] = 2.0 + it.next().unwrap().abs();
                for j in 0..i {
                    let v = *it.next().unwrap();
                    if v.abs() < 0.3 {
                        k[(i, j)] = v * 0.3;
                        k[(j, i)] = v * 0.3;
                    }
                }
            }
            for r in 0..m {
                k[(n + r, n + r)] = -0.5 - it.next().unwrap().abs();
                for j in 0..n {
                    let v = *it.next().unwrap();
                    if v.abs() > 0.4 {
                        k[(n + r, j)] = v;
                        k[(j, n + r)] = v;
                    }
                }
            }
            let a = to_csc(&k);
            let f = Factor::compute(&a, &Symbolic::analyse(&a)).unwrap();
            prop_assert_eq!(f.negative_pivots(), m);
            let rhs: Vec<f64> = (0..size).map(|i| (i as f64).cos()).collect();
            let mut x = rhs.clone();
            f.solve_in_place(&mut x);
            let mut back = vec![0.0; size];
            a.mul(&x, &mut back);
            for (u, v) in back.iter().zip(&rhs) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
