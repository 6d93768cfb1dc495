//! Compressed sparse row storage, a Jacobi-preconditioned conjugate gradient
//! solver and a banded Cholesky factorization for the constant time-stepping
//! matrix.

use crate::error::{Error, Result};

/// Sparse matrix in compressed sparse row format.
///
/// Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate entries are
    /// summed in insertion order, so two mirrored entries fed in the same order
    /// end up bitwise equal.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::DimensionMismatch {
                    context: "triplet index out of bounds",
                    expected: n_rows.max(n_cols),
                    found: r.max(c),
                });
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // stable: preserves insertion order among duplicates
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    context: "ragged dense matrix",
                    expected: n_cols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n_rows, n_cols, &triplets)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over the stored `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Stored value at `(i, j)`, zero when the entry is not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Exact (bitwise) symmetry of the stored pattern and values.
    pub fn is_symmetric(&self) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        (0..self.n_rows).all(|i| self.row(i).all(|(j, v)| self.get(j, i).to_bits() == v.to_bits()))
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n_rows)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                context: "spmv input",
                expected: self.n_cols,
                found: x.len(),
            });
        }
        if y.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                context: "spmv output",
                expected: self.n_rows,
                found: y.len(),
            });
        }
        self.spmv_unchecked(x, y);
        Ok(())
    }

    /// `y = self * x` without dimension checks; callers guarantee lengths.
    pub(crate) fn spmv_unchecked(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            *yi = self.col_indices[range.clone()]
                .iter()
                .zip(&self.values[range])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> Result<CsrMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                context: "linear combination",
                expected: self.n_rows,
                found: other.n_rows,
            });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        CsrMatrix::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    /// `x^T self y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(dot(x, &self.spmv(y)?))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Conjugate gradient with a cached Jacobi preconditioner.
#[derive(Debug, Clone)]
pub struct CgSolver {
    inv_diag: Vec<f64>,
    rel_tol: f64,
    max_iters: usize,
}

impl CgSolver {
    pub fn new(m: &CsrMatrix, rel_tol: f64) -> Result<Self> {
        if m.n_rows() != m.n_cols() {
            return Err(Error::DimensionMismatch {
                context: "CG requires a square matrix",
                expected: m.n_rows(),
                found: m.n_cols(),
            });
        }
        if !(rel_tol > 0.0 && rel_tol <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "relative tolerance {rel_tol} outside (0, 1e-6]"
            )));
        }
        let inv_diag = m
            .diagonal()
            .into_iter()
            .map(|d| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::InvalidParameter(format!(
                        "non-positive diagonal entry {d}"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            inv_diag,
            rel_tol,
            max_iters: 10 * m.n_rows().max(1),
        })
    }

    /// Solves `m x = b`, starting from `x` (warm start). Returns the number of
    /// iterations used.
    pub fn solve_into(&self, m: &CsrMatrix, b: &[f64], x: &mut [f64]) -> Result<usize> {
        let n = self.inv_diag.len();
        if b.len() != n || x.len() != n {
            return Err(Error::DimensionMismatch {
                context: "CG right-hand side",
                expected: n,
                found: b.len().min(x.len()),
            });
        }
        let b_norm = norm2(b);
        if b_norm == 0.0 {
            x.fill(0.0);
            return Ok(0);
        }
        let target = self.rel_tol * b_norm;

        let mut r = vec![0.0; n];
        m.spmv_unchecked(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut q = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let mut res = norm2(&r);

        for iter in 0..self.max_iters {
            if res <= target {
                return Ok(iter);
            }
            m.spmv_unchecked(&p, &mut q);
            let pq = dot(&p, &q);
            if pq <= 0.0 {
                return Err(Error::NotConverged {
                    iterations: iter,
                    residual: res / b_norm,
                });
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            res = norm2(&r);
            for i in 0..n {
                z[i] = r[i] * self.inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if res <= target {
            return Ok(self.max_iters);
        }
        Err(Error::NotConverged {
            iterations: self.max_iters,
            residual: res / b_norm,
        })
    }
}

/// Solves the SPD system `m x = b` to `‖m x − b‖ ≤ rel_tol ‖b‖` with
/// Jacobi-preconditioned conjugate gradients.
pub fn solve_spd(m: &CsrMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let solver = CgSolver::new(m, rel_tol)?;
    let mut x = vec![0.0; m.n_rows()];
    solver.solve_into(m, b, &mut x)?;
    Ok(x)
}

/// Cholesky factor `L L^T` of a symmetric positive definite banded matrix.
///
/// Row `i` of `L` stores the entries `L[i][i-bw..=i]` contiguously.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    factor: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        let n = m.n_rows();
        if n != m.n_cols() {
            return Err(Error::DimensionMismatch {
                context: "Cholesky requires a square matrix",
                expected: n,
                found: m.n_cols(),
            });
        }
        let bw = m.bandwidth();
        let w = bw + 1;
        let mut f = vec![0.0; n * w];
        // lower triangle; slot bw holds the diagonal
        for i in 0..n {
            for (j, v) in m.row(i) {
                if j <= i {
                    f[i * w + bw - (i - j)] = v;
                }
            }
        }
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = f[i * w + bw - (i - j)];
                for k in lo..j {
                    s -= f[i * w + bw - (i - k)] * f[j * w + bw - (j - k)];
                }
                if j == i {
                    if s <= 0.0 {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    f[i * w + bw] = s.sqrt();
                } else {
                    f[i * w + bw - (i - j)] = s / f[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, factor: f })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "Cholesky right-hand side",
                expected: self.n,
                found: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Overwrites `x` (holding the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let f = &self.factor;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &f[i * w + bw - (i - lo)..i * w + bw];
            let s: f64 = row.iter().zip(&x[lo..i]).map(|(l, v)| l * v).sum();
            x[i] = (x[i] - s) / f[i * w + bw];
        }
        for i in (0..n).rev() {
            x[i] /= f[i * w + bw];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                x[k] -= f[i * w + bw - (i - k)] * xi;
            }
        }
    }
}
