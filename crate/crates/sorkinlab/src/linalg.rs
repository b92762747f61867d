//! Thin helpers over faer for the dense Hermitian work done by the
//! propagator, Fock and decoherence modules.

use faer::complex_native::c64;
use faer::{Col, Mat, Side};
use num_complex::Complex64;

pub type RMat = Mat<f64>;
pub type CMat = Mat<c64>;

#[inline]
pub fn to_nc(z: c64) -> Complex64 {
    Complex64::new(z.re, z.im)
}

#[inline]
pub fn to_fc(z: Complex64) -> c64 {
    c64::new(z.re, z.im)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "eigh needs a square matrix");
        let n = m.nrows();
        if n == 0 {
            return Self { values: vec![], vectors: CMat::zeros(0, 0) };
        }
        let e = m.selfadjoint_eigendecomposition(Side::Lower);
        let s = e.s().column_vector();
        let values = (0..n).map(|i| s.read(i).re).collect();
        Self { values, vectors: e.u().to_owned() }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Coordinates of `v` in the eigenbasis: V† v.
    pub fn to_eigenbasis(&self, v: &[Complex64]) -> Vec<Complex64> {
        let col = to_col(v);
        let out = self.vectors.adjoint() * &col;
        from_col(&out)
    }

    /// Maps eigenbasis coordinates back: V c.
    pub fn from_eigenbasis(&self, c: &[Complex64]) -> Vec<Complex64> {
        let col = to_col(c);
        let out = &self.vectors * &col;
        from_col(&out)
    }

    /// Applies F(X) = V diag(F(λ)) V† to a vector.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64, v: &[Complex64]) -> Vec<Complex64> {
        let mut c = self.to_eigenbasis(v);
        for (ci, &l) in c.iter_mut().zip(&self.values) {
            *ci *= f(l);
        }
        self.from_eigenbasis(&c)
    }

    /// Dense F(X).
    pub fn function_matrix(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        let n = self.dim();
        let fv: Vec<c64> = self.values.iter().map(|&l| to_fc(f(l))).collect();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors.read(i, j) * fv[j]);
        &scaled * self.vectors.adjoint()
    }
}

pub fn to_col(v: &[Complex64]) -> Col<c64> {
    Col::from_fn(v.len(), |i| to_fc(v[i]))
}

pub fn from_col(c: &Col<c64>) -> Vec<Complex64> {
    (0..c.nrows()).map(|i| to_nc(c.read(i))).collect()
}

pub fn matvec(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    from_col(&(m * &to_col(v)))
}

/// ⟨a, b⟩ with conjugation on the left.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m.read(i, j).norm());
        }
    }
    best
}

pub fn real_to_complex(m: &RMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m.read(i, j), 0.0))
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a.read(i / br, j / bc) * b.read(i % br, j % bc))
}
