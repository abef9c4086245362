//! Minimal complex CSR matrix used for circuit Hamiltonians and spin-space
//! operators. Rows are canonical (sorted, duplicate-accumulated), so
//! structural equality of two builds implies elementwise equality.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets; duplicates accumulate, exact
    /// zeros are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, C64)>) -> Self {
        for &(r, c, _) in &trips {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
        }
        trips.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut data: Vec<C64> = Vec::with_capacity(trips.len());
        let mut i = 0;
        while i < trips.len() {
            let (r, c, mut v) = trips[i];
            i += 1;
            while i < trips.len() && trips[i].0 == r && trips[i].1 == c {
                v += trips[i].2;
                i += 1;
            }
            if v != C64::new(0.0, 0.0) {
                indices.push(c);
                data.push(v);
                indptr[r + 1] = indices.len();
            }
        }
        for r in 0..nrows {
            if indptr[r + 1] < indptr[r] {
                indptr[r + 1] = indptr[r];
            }
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let trips = diag
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self::from_triplets(n, n, trips)
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

    pub fn row(&self, r: usize) -> (&[usize], &[C64]) {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[lo..hi], &self.data[lo..hi])
    }

    pub fn diagonal(&self) -> Vec<C64> {
        let n = self.nrows.min(self.ncols);
        let mut d = vec![C64::new(0.0, 0.0); n];
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c == r {
                    d[r] = v;
                }
            }
        }
        d
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    /// a*self + b*other, same shape required.
    pub fn linear_combination(&self, a: C64, other: &Self, b: C64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trips = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trips.push((r, c, a * v));
            }
            let (cols, vals) = other.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trips.push((r, c, b * v));
            }
        }
        Self::from_triplets(self.nrows, self.ncols, trips)
    }

    pub fn dagger(&self) -> Self {
        let mut trips = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trips.push((c, r, v.conj()));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, trips)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul shape mismatch");
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut trips = Vec::new();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&k, &v) in cols.iter().zip(vals) {
                let (kc, kv) = other.row(k);
                for (&c, &w) in kc.iter().zip(kv) {
                    if acc[c] == C64::new(0.0, 0.0) {
                        touched.push(c);
                    }
                    acc[c] += v * w;
                }
            }
            for &c in &touched {
                trips.push((r, c, acc[c]));
                acc[c] = C64::new(0.0, 0.0);
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, trips)
    }

    /// y = A x.
    pub fn spmv(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut s = C64::new(0.0, 0.0);
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            y[r] = s;
        }
    }

    /// out += coeff * A * b (dense b, row-major).
    pub fn spmm_acc(&self, b: &Array2<C64>, coeff: C64, out: &mut Array2<C64>) {
        assert_eq!(self.ncols, b.nrows());
        assert_eq!(out.nrows(), self.nrows);
        assert_eq!(out.ncols(), b.ncols());
        let bs = b.as_slice().expect("contiguous");
        let os = out.as_slice_mut().expect("contiguous");
        let w = b.ncols();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let orow = &mut os[r * w..(r + 1) * w];
            for (&k, &v) in cols.iter().zip(vals) {
                let cv = coeff * v;
                let brow = &bs[k * w..(k + 1) * w];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += cv * bv;
                }
            }
        }
    }

    /// out += coeff * b * A (dense b, row-major).
    pub fn spmm_right_acc(&self, b: &Array2<C64>, coeff: C64, out: &mut Array2<C64>) {
        assert_eq!(b.ncols(), self.nrows);
        assert_eq!(out.nrows(), b.nrows());
        assert_eq!(out.ncols(), self.ncols);
        let bs = b.as_slice().expect("contiguous");
        let os = out.as_slice_mut().expect("contiguous");
        let w = self.ncols;
        let bw = b.ncols();
        for i in 0..b.nrows() {
            let brow = &bs[i * bw..(i + 1) * bw];
            let orow = &mut os[i * w..(i + 1) * w];
            for k in 0..bw {
                let bv = coeff * brow[k];
                if bv == C64::new(0.0, 0.0) {
                    continue;
                }
                let (cols, vals) = self.row(k);
                for (&c, &v) in cols.iter().zip(vals) {
                    orow[c] += bv * v;
                }
            }
        }
    }

    /// tr(A rho) for square A and dense rho of matching dimension.
    pub fn expectation(&self, rho: &Array2<C64>) -> C64 {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(rho.nrows(), self.nrows);
        let mut s = C64::new(0.0, 0.0);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * rho[(c, r)];
            }
        }
        s
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.nrows, self.ncols));
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn spmv_array(&self, x: &Array1<C64>) -> Array1<C64> {
        let mut y = Array1::zeros(self.nrows);
        self.spmv(x.as_slice().unwrap(), y.as_slice_mut().unwrap());
        y
    }

    /// Largest absolute elementwise difference; matrices must share a shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let diff = self.linear_combination(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0));
        diff.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.max_abs_diff(&self.dagger()) <= tol
    }

    /// Kronecker product self ⊗ other (row index = r_self * other.nrows + r_other).
    pub fn kron(&self, other: &Self) -> Self {
        let mut trips = Vec::with_capacity(self.nnz() * other.nnz());
        for r1 in 0..self.nrows {
            let (c1s, v1s) = self.row(r1);
            for (&c1, &v1) in c1s.iter().zip(v1s) {
                for r2 in 0..other.nrows {
                    let (c2s, v2s) = other.row(r2);
                    for (&c2, &v2) in c2s.iter().zip(v2s) {
                        trips.push((r1 * other.nrows + r2, c1 * other.ncols + c2, v1 * v2));
                    }
                }
            }
        }
        Self::from_triplets(self.nrows * other.nrows, self.ncols * other.ncols, trips)
    }
}
