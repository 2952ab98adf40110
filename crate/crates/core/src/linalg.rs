//! Small dense complex linear algebra: just enough for m×m channel matrices
//! and the (K+1)×(K+1) MMSE Gram matrices.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<Complex<T>>]) -> Self {
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `self * self^H`.
    pub fn gram_outer(&self) -> Self {
        let mut out = Self::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let mut acc = Complex::zero();
                for k in 0..self.cols {
                    acc = acc + self[(i, k)] * self[(j, k)].conj();
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm_sqr(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// `a^H b`.
pub fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T> {
    /// Eigenvalues in descending order.
    pub values: Vec<T>,
    /// Unit eigenvectors stored as columns, ordered like `values`.
    pub vectors: ComplexMatrix<T>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic complex Jacobi eigen-solver. Only the upper triangle's Hermitian
/// structure is assumed; the input is not checked beyond being square.
pub fn hermitian_eigen<T: Real>(a: &ComplexMatrix<T>) -> Result<HermitianEigen<T>> {
    let (values, vectors) = jacobi(a, true)?;
    let vectors = vectors.expect("vectors requested");
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap_or(std::cmp::Ordering::Equal));
    let n = a.rows();
    let sorted_vectors = ComplexMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Ok(HermitianEigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: sorted_vectors,
    })
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues<T: Real>(a: &ComplexMatrix<T>) -> Result<Vec<T>> {
    let (mut values, _) = jacobi(a, false)?;
    values.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    Ok(values)
}

fn jacobi<T: Real>(
    input: &ComplexMatrix<T>,
    want_vectors: bool,
) -> Result<(Vec<T>, Option<ComplexMatrix<T>>)> {
    if !input.is_square() {
        return Err(invalid(format!(
            "eigen-decomposition needs a square matrix, got {}x{}",
            input.rows(),
            input.cols()
        )));
    }
    if !input.is_finite() {
        return Err(invalid("matrix has non-finite entries"));
    }
    let n = input.rows();
    let mut a = input.clone();
    let mut v = want_vectors.then(|| ComplexMatrix::identity(n));
    let scale = a.frobenius_norm_sqr();
    let tol = T::epsilon() * T::epsilon() * scale;

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[(p, q)].norm_sqr();
            }
        }
        if off <= tol || off.is_zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r.is_zero() {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (T::lit(2.0) * r);
                let t = if theta.is_infinite() {
                    T::zero()
                } else {
                    let sgn = if theta < T::zero() { -T::one() } else { T::one() };
                    sgn / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // U = [[c, s e^{iφ}], [-s e^{-iφ}, c]] on the (p, q) plane.
                let upp = Complex::new(c, T::zero());
                let uqq = upp;
                let upq = phase * s;
                let uqp = -(phase.conj() * s);

                rotate_columns(&mut a, p, q, upp, upq, uqp, uqq);
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
                    a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[(p, q)] = Complex::zero();
                a[(q, p)] = Complex::zero();
                a[(p, p)].im = T::zero();
                a[(q, q)].im = T::zero();
                if let Some(v) = v.as_mut() {
                    rotate_columns(v, p, q, upp, upq, uqp, uqq);
                }
            }
        }
    }

    let values = (0..n).map(|i| a[(i, i)].re).collect::<Vec<_>>();
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericFailure("Jacobi iteration diverged".into()));
    }
    Ok((values, v))
}

fn rotate_columns<T: Real>(
    m: &mut ComplexMatrix<T>,
    p: usize,
    q: usize,
    upp: Complex<T>,
    upq: Complex<T>,
    uqp: Complex<T>,
    uqq: Complex<T>,
) {
    for k in 0..m.rows() {
        let xp = m[(k, p)];
        let xq = m[(k, q)];
        m[(k, p)] = xp * upp + xq * uqp;
        m[(k, q)] = xp * upq + xq * uqq;
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^H`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: ComplexMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(a: &ComplexMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(invalid("Cholesky needs a square matrix"));
        }
        let n = a.rows();
        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d = d - l[(j, k)].norm_sqr();
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NumericFailure(format!(
                    "matrix is not Hermitian positive definite (pivot {j})"
                )));
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex::new(djj, T::zero());
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &ComplexMatrix<T> {
        &self.l
    }

    /// Lower bound on the 2-norm condition number from the pivot spread.
    pub fn condition_estimate(&self) -> T {
        let n = self.l.rows();
        if n == 0 {
            return T::one();
        }
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for i in 0..n {
            let d = self.l[(i, i)].re;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let r = hi / lo;
        r * r
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - self.l[(k, i)].conj() * y[k];
            }
            y[i] = s / self.l[(i, i)].re;
        }
        y
    }
}

/// Orthonormal basis of the span of `vectors` (modified Gram-Schmidt with one
/// re-orthogonalisation pass). Numerically dependent vectors are dropped.
pub fn orthonormal_basis<T: Real>(vectors: &[Vec<Complex<T>>]) -> Vec<Vec<Complex<T>>> {
    let mut basis: Vec<Vec<Complex<T>>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let original = norm_sqr(v).sqrt();
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi = *wi - qi * c;
                }
            }
        }
        let nrm = norm_sqr(&w).sqrt();
        if nrm > original * T::epsilon().sqrt() && nrm > T::zero() {
            basis.push(w.into_iter().map(|z| z / nrm).collect());
        }
    }
    basis
}

/// Determinant of a small real matrix by Gaussian elimination with partial
/// pivoting. `a` is row-major `n × n`.
pub fn real_determinant<T: Real>(mut a: Vec<T>, n: usize) -> T {
    assert_eq!(a.len(), n * n);
    let mut det = T::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        if a[pivot * n + col].is_zero() {
            return T::zero();
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let d = a[col * n + col];
        det = det * d;
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            if f.is_zero() {
                continue;
            }
            for k in col..n {
                a[r * n + k] = a[r * n + k] - f * a[col * n + k];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = ComplexMatrix::from_fn(n, n, |_, _| crate::scalar::complex_gaussian(&mut rng));
        h.gram_outer()
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        for n in 1..8 {
            let a = random_hermitian(n, n as u64);
            let e = hermitian_eigen(&a).unwrap();
            for j in 0..n {
                let v = e.vectors.column(j);
                let av = a.matvec(&v);
                for i in 0..n {
                    assert!((av[i] - v[i] * e.values[j]).norm() < 1e-10 * e.values[0].max(1.0));
                }
                assert!((norm_sqr(&v) - 1.0).abs() < 1e-12);
            }
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eigenvalues_match_with_and_without_vectors() {
        let a = random_hermitian(5, 99);
        let full = hermitian_eigen(&a).unwrap().values;
        let only = hermitian_eigenvalues(&a).unwrap();
        for (x, y) in full.iter().zip(&only) {
            assert!((x - y).abs() < 1e-12 * full[0]);
        }
    }

    #[test]
    fn non_square_rejected() {
        let a = ComplexMatrix::<f64>::zeros(2, 3);
        assert!(matches!(hermitian_eigen(&a), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn cholesky_solves() {
        let mut a = random_hermitian(6, 5);
        for i in 0..6 {
            a[(i, i)] += Complex::new(1.0, 0.0);
        }
        let ch = Cholesky::new(&a).unwrap();
        let b: Vec<Complex<f64>> = (0..6).map(|i| Complex::new(i as f64, 1.0)).collect();
        let x = ch.solve(&b);
        let ax = a.matvec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = ComplexMatrix::<f64>::identity(2);
        a[(1, 1)] = Complex::new(-1.0, 0.0);
        assert!(Cholesky::new(&a).is_err());
    }

    #[test]
    fn determinant_small() {
        assert_eq!(real_determinant(vec![2.0, 1.0, 1.0, 2.0], 2), 3.0);
        assert!((real_determinant(vec![0.0f64, 1.0, 1.0, 0.0], 2) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn gram_schmidt_drops_dependent() {
        let v1 = vec![Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)];
        let v2 = vec![Complex::new(2.0, 0.0), Complex::new(0.0, 0.0)];
        let v3 = vec![Complex::new(1.0, 1.0), Complex::new(0.0, 3.0)];
        let b = orthonormal_basis(&[v1, v2, v3]);
        assert_eq!(b.len(), 2);
        assert!(inner(&b[0], &b[1]).norm() < 1e-14);
    }
}
