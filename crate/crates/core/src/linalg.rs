//! Small dense linear algebra for regression designs.
//!
//! Imputation models here have a handful of columns, so a row-major matrix
//! with a Cholesky factorisation covers everything the samplers need.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a design matrix with a leading intercept column from column slices,
    /// restricted to `rows`.
    pub fn design(columns: &[&[S]], rows: &[usize]) -> Self {
        let cols = columns.len() + 1;
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            data.push(S::one());
            for c in columns {
                data.push(c[r]);
            }
        }
        Self { rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn trace(&self) -> S {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `XᵀX`.
    pub fn gram(&self) -> Matrix<S> {
        self.weighted_gram(None)
    }

    /// `XᵀWX` with `W = diag(weights)`.
    pub fn weighted_gram(&self, weights: Option<&[S]>) -> Matrix<S> {
        let p = self.cols;
        let mut out = Matrix::zeros(p, p);
        for i in 0..self.rows {
            let row = self.row(i);
            let w = weights.map_or(S::one(), |w| w[i]);
            for a in 0..p {
                let ra = row[a] * w;
                for b in a..p {
                    out.data[a * p + b] += ra * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                out.data[a * p + b] = out.data[b * p + a];
            }
        }
        out
    }

    /// `Xᵀv`.
    pub fn t_mul_vec(&self, v: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate().take(self.rows) {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
        out
    }

    /// `Xv`.
    pub fn mul_vec(&self, v: &[S]) -> Result<Vec<S>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: v.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn add_diagonal(&mut self, value: S) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += value;
        }
    }
}

impl<S> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.cols + c]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower-triangular Cholesky factor `L` with `A = LLᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<S> {
    lower: Matrix<S>,
}

impl<S: Scalar> Cholesky<S> {
    /// Factorises a symmetric positive-definite matrix; fails with
    /// [`Error::RankDeficient`] when a pivot is not strictly positive.
    pub fn new(a: &Matrix<S>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
        }
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(S::zero(), S::max);
        let tol = scale * S::epsilon() * S::of_usize(n.max(1));
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > tol) {
                return Err(Error::RankDeficient { cols: n });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &Matrix<S> {
        &self.lower
    }

    /// Solves `Ax = b`.
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.lower.nrows();
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let t = l[(i, k)] * y[k];
                y[i] -= t;
            }
            y[i] /= l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = l[(k, i)] * y[k];
                y[i] -= t;
            }
            y[i] /= l[(i, i)];
        }
        y
    }

    /// `A⁻¹`.
    pub fn inverse(&self) -> Matrix<S> {
        let n = self.lower.nrows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![S::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = S::zero());
            e[j] = S::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    /// `L z`: maps a standard-normal vector to `N(0, A)`.
    pub fn lower_mul(&self, z: &[S]) -> Vec<S> {
        let n = self.lower.nrows();
        (0..n)
            .map(|i| (0..=i).fold(S::zero(), |acc, k| acc + self.lower[(i, k)] * z[k]))
            .collect()
    }
}

/// Ridge stabiliser `κ = 1e-8 · trace(XᵀX) / p` applied to every normal-equation solve.
pub fn ridge_kappa<S: Scalar>(gram: &Matrix<S>) -> S {
    S::of(1e-8) * gram.trace() / S::of_usize(gram.ncols().max(1))
}

/// Ordinary least squares with the standard ridge stabiliser.
#[derive(Debug, Clone)]
pub struct OlsFit<S> {
    pub coef: Vec<S>,
    /// `σ̂²(XᵀX)⁻¹` with `σ̂² = SSR / (n − p)`.
    pub cov: Matrix<S>,
    pub ssr: S,
}

pub fn ols<S: Scalar>(x: &Matrix<S>, y: &[S]) -> Result<OlsFit<S>> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n <= p {
        return Err(Error::TooFewRows { needed: p + 1, available: n });
    }
    let mut g = x.gram();
    let kappa = ridge_kappa(&g);
    g.add_diagonal(kappa);
    let chol = Cholesky::new(&g)?;
    let coef = chol.solve(&x.t_mul_vec(y));
    let fitted = x.mul_vec(&coef)?;
    let ssr: S = y.iter().zip(&fitted).map(|(&a, &b)| (a - b) * (a - b)).sum();
    let s2 = ssr / S::of_usize(n - p);
    let mut cov = chol.inverse();
    for v in cov.data.iter_mut() {
        *v *= s2;
    }
    Ok(OlsFit { coef, cov, ssr })
}
