//! Compressed sparse row matrices, sparse LU, and the small dense helpers used
//! by the reduced-order code.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Row-major sparse matrix with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Duplicates are summed in their input order, so the result is a pure
    /// function of the triplet sequence.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // counting sort by row keeps the input order inside each row
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            order.clear();
            order.extend(counts[r]..counts[r + 1]);
            order.sort_by_key(|&k| cols[k]);
            let row_start = indices.len();
            for &k in &order {
                if indices.len() > row_start && *indices.last().unwrap() == cols[k] {
                    *data.last_mut().unwrap() += vals[k];
                } else {
                    indices.push(cols[k]);
                    data.push(vals[k]);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], data: vec![] }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Iterates over `(col, value)` of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()].iter().copied().zip(self.data[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(k) => self.data[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out.push((i, j, v));
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// Computes `Aᵀ x` without forming the transpose.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                y[j] += v * x[i];
            }
        }
        y
    }

    /// The bilinear form `yᵀ A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        dot(y, &self.matvec(x))
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Linear combination `Σ αₖ Aₖ` of equally shaped matrices.
    pub fn lincomb(terms: &[(f64, &CsrMatrix)]) -> Self {
        assert!(!terms.is_empty());
        let (nr, nc) = (terms[0].1.nrows, terms[0].1.ncols);
        let mut t = Vec::new();
        for &(alpha, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nr, nc), "shape mismatch in lincomb");
            t.extend(m.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)));
        }
        Self::from_triplets(nr, nc, &t)
    }

    /// Embeds `[[A, Bᵀ], [B, C]]`-style blocks: each block is placed at the
    /// given row/column offset of a matrix with the given shape.
    pub fn from_blocks(nrows: usize, ncols: usize, blocks: &[(usize, usize, &CsrMatrix)]) -> Self {
        let mut t = Vec::new();
        for &(r0, c0, m) in blocks {
            t.extend(m.triplets().into_iter().map(|(i, j, v)| (r0 + i, c0 + j, v)));
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    /// Submatrix with the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_map[j] != usize::MAX {
                    t.push((ri, col_map[j], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &t)
    }

    /// Largest entrywise asymmetry `max |a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn raw_data(&self) -> &[f64] {
        &self.data
    }

    /// Writes the matrix as `i j value` lines.
    pub fn write_coo<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.16e}")?;
        }
        Ok(())
    }
}

/// Symmetric Dirichlet elimination.
///
/// For every constrained index `d` with value `g_d`, the known column is moved to
/// the right-hand side, row and column `d` are zeroed, the diagonal is set to
/// one and `rhs[d] = g_d`. Returns the constrained matrix; `rhs` is updated in
/// place. `constrained` must be sorted.
pub fn eliminate(a: &CsrMatrix, rhs: &mut [f64], constrained: &[usize], values: &[f64]) -> CsrMatrix {
    assert_eq!(constrained.len(), values.len());
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    let mut fixed = vec![None; n];
    for (&d, &g) in constrained.iter().zip(values) {
        fixed[d] = Some(g);
    }
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..n {
        if fixed[i].is_some() {
            continue;
        }
        for (j, v) in a.row(i) {
            match fixed[j] {
                Some(g) => rhs[i] -= v * g,
                None => t.push((i, j, v)),
            }
        }
    }
    for (&d, &g) in constrained.iter().zip(values) {
        t.push((d, d, 1.0));
        rhs[d] = g;
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// Sparse LU factorization of a square matrix.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::SingularSystem(format!("matrix is {}x{}", a.nrows, a.ncols)));
        }
        let t: Vec<_> = a.triplets().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &t)
            .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        let lu = m.sp_lu().map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        Ok(Self { n: a.nrows, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(rhs);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::SingularSystem("non-finite solution from sparse LU".into()))
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `y ← y + α x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Small dense matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| dot(&self.data[i * self.ncols..(i + 1) * self.ncols], x)).collect()
    }

    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            axpy(x[i], &self.data[i * self.ncols..(i + 1) * self.ncols], &mut y);
        }
        y
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a != 0.0 {
                    for j in 0..other.ncols {
                        out.data[i * other.ncols + j] += a * other[(k, j)];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)])
    }

    /// Solves `A x = b` by LU with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(b.len(), self.nrows);
        let lu = self.to_faer().partial_piv_lu();
        let x = lu.solve(Mat::<f64>::from_fn(self.nrows, 1, |i, _| b[i]));
        let out: Vec<f64> = (0..self.nrows).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::SingularSystem("non-finite solution from dense LU".into()))
        }
    }

    /// Eigen-decomposition of a symmetric matrix; eigenvalues ascending,
    /// eigenvectors as columns.
    pub fn symmetric_eigen(&self) -> Result<(Vec<f64>, DenseMatrix)> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let e = self
            .to_faer()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|err| Error::EigenFailure(format!("{err:?}")))?;
        let s = e.S().column_vector();
        let u = e.U();
        let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let vecs = DenseMatrix::from_fn(n, n, |i, j| u[(i, j)]);
        Ok((vals, vecs))
    }

    /// Cholesky factor `L` with `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<DenseMatrix> {
        let n = self.nrows;
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return Err(Error::SingularSystem("matrix is not positive definite".into()));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}
