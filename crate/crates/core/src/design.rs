//! Design-matrix storage.
//!
//! Dense data lives in a column-major `DMatrix`; sparse data is kept in CSR
//! with a CSC mirror so that both `A x` and column gathers for the Newton
//! system stay proportional to the number of stored entries.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Fraction of nonzeros above which sparse input is densified.
pub const DENSE_FALLBACK_DENSITY: f64 = 0.25;

/// Compressed sparse row matrix with a compressed-column mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
    // CSC mirror
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from raw arrays. Column indices within a row must be
    /// strictly increasing and lie in `[0, ncols)`.
    pub fn new(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != nrows + 1 {
            return Err(Error::DimensionMismatch {
                what: "csr indptr",
                expected: nrows + 1,
                got: indptr.len(),
            });
        }
        if indices.len() != data.len() || *indptr.last().unwrap_or(&0) != data.len() {
            return Err(Error::InvalidParameter(
                "csr indices/data/indptr lengths disagree".into(),
            ));
        }
        if indptr[0] != 0 {
            return Err(Error::InvalidParameter("csr indptr must start at 0".into()));
        }
        for r in 0..nrows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(Error::InvalidParameter(format!(
                    "csr indptr decreases at row {r}"
                )));
            }
            let row = &indices[lo..hi];
            for (k, &c) in row.iter().enumerate() {
                if c >= ncols {
                    return Err(Error::InvalidParameter(format!(
                        "column index {c} out of range [0, {ncols}) in row {r}"
                    )));
                }
                if k > 0 && row[k - 1] >= c {
                    return Err(Error::InvalidParameter(format!(
                        "column indices not strictly increasing in row {r}"
                    )));
                }
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }

        let mut counts = vec![0usize; ncols + 1];
        for &c in &indices {
            counts[c + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut col_rows = vec![0usize; data.len()];
        let mut col_data = vec![0.0; data.len()];
        for r in 0..nrows {
            for k in indptr[r]..indptr[r + 1] {
                let c = indices[k];
                let dst = next[c];
                col_rows[dst] = r;
                col_data[dst] = data[k];
                next[c] += 1;
            }
        }

        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
            col_ptr,
            col_rows,
            col_data,
        })
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn density(&self) -> f64 {
        let total = (self.nrows * self.ncols).max(1) as f64;
        self.nnz() as f64 / total
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[lo..hi], &self.data[lo..hi])
    }

    pub fn column(&self, c: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.col_ptr[c], self.col_ptr[c + 1]);
        (&self.col_rows[lo..hi], &self.col_data[lo..hi])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(r, c)] = v;
            }
        }
        out
    }
}

/// The regression design matrix `A`, dense or sparse.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl DesignMatrix {
    /// Wraps a sparse matrix, densifying it when it is not actually sparse.
    pub fn from_sparse(csr: CsrMatrix) -> Self {
        if csr.density() > DENSE_FALLBACK_DENSITY {
            DesignMatrix::Dense(csr.to_dense())
        } else {
            DesignMatrix::Sparse(csr)
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            DesignMatrix::Dense(a) => a.nrows(),
            DesignMatrix::Sparse(a) => a.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            DesignMatrix::Dense(a) => a.ncols(),
            DesignMatrix::Sparse(a) => a.ncols,
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, DesignMatrix::Sparse(_))
    }

    /// `A x`. Zero entries of `x` are skipped, which makes products with the
    /// (usually sparse) prox output cheap.
    pub fn mul_vec(&self, x: &[f64]) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.ncols());
        let mut out = DVector::zeros(self.nrows());
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                self.axpy_column(j, xj, out.as_mut_slice());
            }
        }
        out
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> DVector<f64> {
        debug_assert_eq!(y.len(), self.nrows());
        match self {
            DesignMatrix::Dense(a) => a.tr_mul(&DVector::from_column_slice(y)),
            DesignMatrix::Sparse(a) => {
                let mut out = DVector::zeros(a.ncols);
                for r in 0..a.nrows {
                    let yr = y[r];
                    if yr == 0.0 {
                        continue;
                    }
                    let (cols, vals) = a.row(r);
                    for (&c, &v) in cols.iter().zip(vals) {
                        out[c] += v * yr;
                    }
                }
                out
            }
        }
    }

    /// `out += alpha * A[:, j]`.
    pub fn axpy_column(&self, j: usize, alpha: f64, out: &mut [f64]) {
        match self {
            DesignMatrix::Dense(a) => {
                for (o, &v) in out.iter_mut().zip(a.column(j).iter()) {
                    *o += alpha * v;
                }
            }
            DesignMatrix::Sparse(a) => {
                let (rows, vals) = a.column(j);
                for (&r, &v) in rows.iter().zip(vals) {
                    out[r] += alpha * v;
                }
            }
        }
    }

    /// Dense `I_m + sigma * A Aᵀ`.
    pub fn identity_plus_scaled_aat(&self, sigma: f64) -> DMatrix<f64> {
        let m = self.nrows();
        let mut g = match self {
            DesignMatrix::Dense(a) => a * a.transpose() * sigma,
            DesignMatrix::Sparse(a) => {
                let mut g = DMatrix::zeros(m, m);
                for c in 0..a.ncols {
                    let (rows, vals) = a.column(c);
                    for (&ri, &vi) in rows.iter().zip(vals) {
                        for (&rj, &vj) in rows.iter().zip(vals) {
                            g[(ri, rj)] += sigma * vi * vj;
                        }
                    }
                }
                g
            }
        };
        for i in 0..m {
            g[(i, i)] += 1.0;
        }
        g
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            DesignMatrix::Dense(a) => a.clone(),
            DesignMatrix::Sparse(a) => a.to_dense(),
        }
    }

    pub(crate) fn all_finite(&self) -> bool {
        match self {
            DesignMatrix::Dense(a) => a.iter().all(|v| v.is_finite()),
            DesignMatrix::Sparse(a) => a.data.iter().all(|v| v.is_finite()),
        }
    }
}
