//! Small dense complex matrices.
//!
//! Everything the test statistics need reduces to determinants, inverses and
//! traces of `q × q` complex matrices, with `q` rarely above 4. Matrices are
//! stored row-major in a flat `Vec`; no dimension is hard-coded.
//!
//! Hermitian positive-definite inputs are factored with Cholesky. General
//! (possibly indefinite) matrices go through LU with partial pivoting.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::tolerance;

pub use num_complex::Complex64 as Complex;

/// General square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![Complex::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMatrix { n, data }
    }

    /// Builds a matrix from `n²` entries in row-major order.
    pub fn from_row_major(n: usize, data: Vec<Complex>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(CMatrix { n, data })
    }

    pub fn from_diagonal(diag: &[Complex]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn add(&self, other: &CMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    fn zip_with(&self, other: &CMatrix, f: impl Fn(Complex, Complex) -> Complex) -> Result<Self> {
        check_dims(self.n, other.n)?;
        Ok(CMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn mul_vec(&self, v: &[Complex]) -> Result<Vec<Complex>> {
        check_dims(self.n, v.len())?;
        Ok((0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest `|a_ij − conj(a_ji)|`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex;

    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        &mut self.data[i * self.n + j]
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// A `q × q` Hermitian matrix with a real diagonal.
///
/// Construction from data checks finiteness, Hermitian symmetry (up to
/// [`tolerance::HERMITIAN_INPUT`] relative to the largest entry) and a
/// non-negative diagonal, then overwrites the lower triangle with the
/// conjugate of the upper one so the symmetry is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("Hermitian matrix"));
        }
        let asymmetry = m.hermitian_asymmetry();
        if asymmetry > tolerance::HERMITIAN_INPUT * m.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian { asymmetry });
        }
        let h = Self::symmetrize(m);
        for i in 0..h.q() {
            let d = h.0[(i, i)].re;
            if d < 0.0 {
                return Err(Error::NegativeDiagonal { index: i, value: d });
            }
        }
        Ok(h)
    }

    /// Builds from the upper triangle including the diagonal, row by row
    /// (`q(q+1)/2` entries). The lower triangle is filled by conjugation.
    pub fn from_upper(q: usize, upper: &[Complex]) -> Result<Self> {
        check_dims(q * (q + 1) / 2, upper.len())?;
        let mut m = CMatrix::zeros(q);
        let mut it = upper.iter();
        for i in 0..q {
            for j in i..q {
                let z = *it.next().unwrap();
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        Self::new(m)
    }

    pub fn identity(q: usize) -> Self {
        HermitianMatrix(CMatrix::identity(q))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let d: Vec<Complex> = diag.iter().map(|&x| Complex::new(x, 0.0)).collect();
        Self::new(CMatrix::from_diagonal(&d))
    }

    /// Replaces `m` by `(m + m*)/2`, skipping validation. Used for results
    /// of arithmetic on matrices that are Hermitian up to rounding.
    pub(crate) fn symmetrize(m: CMatrix) -> Self {
        let n = m.dim();
        let mut out = m;
        for i in 0..n {
            out[(i, i)] = Complex::new(out[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
                out[(i, j)] = avg;
                out[(j, i)] = avg.conj();
            }
        }
        HermitianMatrix(out)
    }

    pub fn q(&self) -> usize {
        self.0.dim()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Real diagonal entries.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.q()).map(|i| self.0[(i, i)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// `log |m|` through Cholesky; fails unless `m` is positive definite.
    pub fn log_det(&self) -> Result<f64> {
        Ok(cholesky_hpd(self)?.log_det())
    }

    pub fn add(&self, other: &HermitianMatrix) -> Result<Self> {
        Ok(Self::symmetrize(self.0.add(&other.0)?))
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(self.0.scale(s))
    }

    /// `a·self + b·other`, the weighted sums used by the Rényi and χ² statistics.
    pub fn combine(&self, a: f64, other: &HermitianMatrix, b: f64) -> Result<CMatrix> {
        self.0.scale(a).add(&other.0.scale(b))
    }
}

impl Index<(usize, usize)> for HermitianMatrix {
    type Output = Complex;

    fn index(&self, idx: (usize, usize)) -> &Complex {
        &self.0[idx]
    }
}

impl AsRef<CMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Matrix product.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_dims(a.n, b.n)?;
    let n = a.n;
    let mut out = CMatrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[(i, k)];
            if aik == Complex::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    Ok(out)
}

pub fn trace(m: &CMatrix) -> Complex {
    (0..m.n).map(|i| m[(i, i)]).sum()
}

/// Determinant by LU; exactly singular input gives zero.
pub fn det(m: &CMatrix) -> Complex {
    match lu(m) {
        Ok(f) => f.det(),
        Err(_) => Complex::new(0.0, 0.0),
    }
}

/// LU factorization with partial pivoting, `P·A = L·U`, stored packed.
#[derive(Clone, Debug)]
pub struct Lu {
    packed: CMatrix,
    perm: Vec<usize>,
    sign: f64,
}

pub fn lu(m: &CMatrix) -> Result<Lu> {
    let n = m.n;
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, a[(i, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularMatrix { rcond: 0.0 });
        }
        if p != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let akk = a[(k, k)];
        for i in (k + 1)..n {
            let f = a[(i, k)] / akk;
            a[(i, k)] = f;
            for j in (k + 1)..n {
                let akj = a[(k, j)];
                a[(i, j)] -= f * akj;
            }
        }
    }
    Ok(Lu { packed: a, perm, sign })
}

impl Lu {
    pub fn det(&self) -> Complex {
        let n = self.packed.n;
        (0..n).map(|i| self.packed[(i, i)]).product::<Complex>() * self.sign
    }

    pub fn solve(&self, b: &[Complex]) -> Vec<Complex> {
        let n = self.packed.n;
        let mut x: Vec<Complex> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.packed[(i, k)];
                x[i] = x[i] - l * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.packed[(i, k)];
                x[i] = x[i] - u * x[k];
            }
            x[i] /= self.packed[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> CMatrix {
        let n = self.packed.n;
        let mut inv = CMatrix::zeros(n);
        let mut e = vec![Complex::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
            e[j] = Complex::new(1.0, 0.0);
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

/// Reciprocal 1-norm condition number of `m` given its inverse.
fn rcond(m: &CMatrix, inv: &CMatrix) -> f64 {
    let k = m.norm1() * inv.norm1();
    if k.is_finite() && k > 0.0 {
        1.0 / k
    } else {
        0.0
    }
}

/// Inverse of a general matrix, rejected below [`tolerance::RCOND_FLOOR`].
pub fn inverse_general(m: &CMatrix) -> Result<CMatrix> {
    let inv = lu(m)?.inverse();
    let rc = rcond(m, &inv);
    if !(rc >= tolerance::RCOND_FLOOR) {
        return Err(Error::SingularMatrix { rcond: rc });
    }
    Ok(inv)
}

/// Inverse of a Hermitian matrix: Cholesky when positive definite, LU
/// otherwise. The result is re-Hermitianized as `(A + A*)/2`.
pub fn inverse(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let inv = match cholesky_hpd(m) {
        Ok(ch) => ch.inverse_matrix(),
        Err(_) => lu(m.as_matrix())?.inverse(),
    };
    let rc = rcond(m.as_matrix(), &inv);
    if !(rc >= tolerance::RCOND_FLOOR) {
        return Err(Error::SingularMatrix { rcond: rc });
    }
    Ok(HermitianMatrix::symmetrize(inv))
}

/// Lower-triangular factor `L` with `L·L* = A` and a real positive diagonal.
#[derive(Clone, Debug)]
pub struct Cholesky {
    factor: CMatrix,
}

pub fn cholesky_hpd(m: &HermitianMatrix) -> Result<Cholesky> {
    let n = m.q();
    let a = m.as_matrix();
    let mut l = CMatrix::zeros(n);
    for j in 0..n {
        let d = a[(j, j)].re - (0..j).map(|k| l[(j, k)].norm_sqr()).sum::<f64>();
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex::new(ljj, 0.0);
        for i in (j + 1)..n {
            let s: Complex = (0..j).map(|k| l[(i, k)] * l[(j, k)].conj()).sum();
            l[(i, j)] = (a[(i, j)] - s) / ljj;
        }
    }
    Ok(Cholesky { factor: l })
}

impl Cholesky {
    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    /// `|A| = (∏ L_ii)²`.
    pub fn det(&self) -> f64 {
        let p: f64 = (0..self.factor.n).map(|i| self.factor[(i, i)].re).product();
        p * p
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.factor.n).map(|i| self.factor[(i, i)].re.ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &[Complex]) -> Vec<Complex> {
        let n = self.factor.n;
        let l = &self.factor;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - l[(i, k)] * y[k];
            }
            y[i] /= l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] = y[i] - l[(k, i)].conj() * y[k];
            }
            y[i] /= l[(i, i)];
        }
        y
    }

    fn inverse_matrix(&self) -> CMatrix {
        let n = self.factor.n;
        let mut inv = CMatrix::zeros(n);
        let mut e = vec![Complex::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
            e[j] = Complex::new(1.0, 0.0);
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }

    pub fn inverse(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrize(self.inverse_matrix())
    }
}

/// Dense real square matrix, row-major. Only what the real embedding of the
/// complex Gaussian needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(n: usize) -> Self {
        RealMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(n * n, data.len())?;
        Ok(RealMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// Lower-triangular Cholesky factor.
    pub fn cholesky(&self) -> Result<RealMatrix> {
        let n = self.n;
        let mut l = RealMatrix::zeros(n);
        for j in 0..n {
            let d = self[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
                l[(i, j)] = (self[(i, j)] - s) / ljj;
            }
        }
        Ok(l)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}
