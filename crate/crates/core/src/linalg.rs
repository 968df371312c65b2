//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{ComplexField, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{re, CMatrix, CVector, Real};

const MAX_SVD_ITER: usize = 10_000;

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

pub fn zeros<T: Real>(r: usize, c: usize) -> CMatrix<T> {
    CMatrix::zeros(r, c)
}

/// Largest entry modulus; zero for empty matrices.
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter()
        .map(|z| z.modulus())
        .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
}

pub fn vec_max_abs<T: Real>(v: &CVector<T>) -> T {
    v.iter()
        .map(|z| z.modulus())
        .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
}

pub fn vec_norm<T: Real>(v: &CVector<T>) -> T {
    v.iter()
        .map(|z| z.modulus_squared())
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

pub fn is_finite<T: Real>(m: &CMatrix<T>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn require_finite<T: Real>(m: &CMatrix<T>, what: &str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn require_square<T: Real>(m: &CMatrix<T>, n: usize, what: &str) -> Result<()> {
    if m.nrows() == n && m.ncols() == n {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{what} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// `max |M - M*|`.
pub fn hermitian_defect<T: Real>(m: &CMatrix<T>) -> T {
    max_abs(&(m - m.adjoint()))
}

/// `max |M + M*|`.
pub fn skew_defect<T: Real>(m: &CMatrix<T>) -> T {
    max_abs(&(m + m.adjoint()))
}

pub fn submatrix<T: Real>(m: &CMatrix<T>, r0: usize, c0: usize, nr: usize, nc: usize) -> CMatrix<T> {
    m.view((r0, c0), (nr, nc)).into_owned()
}

pub fn block_diag<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    let (n1, n2) = (a.nrows(), b.nrows());
    let mut out = zeros(n1 + n2, a.ncols() + b.ncols());
    out.view_mut((0, 0), (n1, a.ncols())).copy_from(a);
    out.view_mut((n1, a.ncols()), (n2, b.ncols())).copy_from(b);
    out
}

/// Singular values in descending order. Empty input yields an empty vector.
pub fn singular_values<T: Real>(m: &CMatrix<T>) -> DVector<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    match SVD::try_new(m.clone(), false, false, T::EPSILON, MAX_SVD_ITER) {
        Some(svd) => svd.singular_values,
        None => DVector::from_element(m.nrows().min(m.ncols()), T::nan()),
    }
}

/// Spectral norm (largest singular value).
pub fn norm2<T: Real>(m: &CMatrix<T>) -> T {
    singular_values(m).iter().copied().fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Full SVD `(U, sigma, V*)` with singular values sorted descending.
pub fn svd_full<T: Real>(m: &CMatrix<T>) -> Result<(CMatrix<T>, DVector<T>, CMatrix<T>)> {
    let svd = SVD::try_new(m.clone(), true, true, T::EPSILON, MAX_SVD_ITER)
        .ok_or(Error::EigensolverFailure)?;
    let u = svd.u.ok_or(Error::EigensolverFailure)?;
    let vt = svd.v_t.ok_or(Error::EigensolverFailure)?;
    Ok((u, svd.singular_values, vt))
}

/// Result of a relative invertibility test on a square block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invertibility<T> {
    pub sigma_min: T,
    pub scale: T,
    pub invertible: bool,
}

/// A square block is invertible when its smallest singular value exceeds
/// `tol * scale`. A zero scale means only exact zeros count as singular.
pub fn invertibility<T: Real>(m: &CMatrix<T>, scale: T, tol: T) -> Invertibility<T> {
    let sv = singular_values(m);
    if sv.is_empty() {
        return Invertibility {
            sigma_min: T::zero(),
            scale,
            invertible: true,
        };
    }
    let sigma_min = sv.iter().copied().fold(T::max_value().unwrap_or(T::one() / T::EPSILON), |a, b| {
        if b < a {
            b
        } else {
            a
        }
    });
    let invertible = sigma_min.is_finite() && sigma_min > tol * scale && sigma_min > T::zero();
    Invertibility {
        sigma_min,
        scale,
        invertible,
    }
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Option<CMatrix<T>> {
    if a.nrows() == 0 {
        return Some(zeros(0, b.ncols()));
    }
    let x = a.clone().lu().solve(b)?;
    is_finite(&x).then_some(x)
}

pub fn inverse<T: Real>(a: &CMatrix<T>) -> Option<CMatrix<T>> {
    solve(a, &identity(a.nrows()))
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues ascending and the
/// matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen<T: Real>(m: &CMatrix<T>) -> Result<(Vec<T>, CMatrix<T>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), zeros(0, 0)));
    }
    // Symmetrise so the solver only sees the Hermitian part.
    let h = (m + m.adjoint()).map(|z| z * re(T::lit(0.5)));
    let eig = SymmetricEigen::try_new(h, T::EPSILON, 0).ok_or(Error::EigensolverFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Negative eigenvalues produce NaN entries, which callers treat as a
/// failed finiteness check.
pub fn hermitian_sqrt<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    let (vals, vecs) = hermitian_eigen(m)?;
    let d = CMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| re(v.sqrt())),
    ));
    Ok(&vecs * d * vecs.adjoint())
}

/// Whether a Cholesky factorisation of the Hermitian part succeeds.
pub fn cholesky_succeeds<T: Real>(m: &CMatrix<T>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    let h = (m + m.adjoint()).map(|z| z * re(T::lit(0.5)));
    h.cholesky().is_some()
}

/// Eigenvalues of a general square matrix from a complex Schur form.
pub fn eigenvalues<T: Real>(m: &CMatrix<T>) -> Result<Vec<Complex<T>>> {
    match m.nrows() {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![m[(0, 0)]]),
        _ => {}
    }
    if !is_finite(m) {
        return Err(Error::EigensolverFailure);
    }
    let schur = Schur::try_new(m.clone(), T::EPSILON, 100_000).ok_or(Error::EigensolverFailure)?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Determinant via LU.
pub fn determinant<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    if m.nrows() == 0 {
        return re(T::one());
    }
    m.clone().lu().determinant()
}

/// `sum |z|` scaled matrix 1-norm (max column sum).
pub fn norm1<T: Real>(m: &CMatrix<T>) -> T {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.modulus()).fold(T::zero(), |a, b| a + b))
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Frobenius norm.
pub fn norm_fro<T: Real>(m: &CMatrix<T>) -> T {
    m.iter()
        .map(|z| z.modulus_squared())
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

/// Null-space basis of `m` (columns), using a relative singular value cut.
pub fn null_space<T: Real>(m: &CMatrix<T>, scale: T, tol: T) -> Result<(CMatrix<T>, DVector<T>)> {
    let ncols = m.ncols();
    if ncols == 0 {
        return Ok((zeros(0, 0), DVector::zeros(0)));
    }
    if m.nrows() == 0 {
        return Ok((identity(ncols), DVector::zeros(0)));
    }
    // Pad to at least square so that V* is the full ncols x ncols factor.
    let padded = if m.nrows() < ncols {
        let mut p = zeros(ncols, ncols);
        p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let (_, sigma, vt) = svd_full(&padded)?;
    let cut = tol * scale;
    let kernel: Vec<usize> = (0..ncols)
        .filter(|&i| sigma[i] <= cut || sigma[i] == T::zero())
        .collect();
    let mut basis = zeros(ncols, kernel.len());
    for (dst, &i) in kernel.iter().enumerate() {
        let row = vt.row(i).adjoint();
        basis.set_column(dst, &row);
    }
    Ok((basis, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigenvalues_of_rotation() {
        let m = CMatrix::<f64>::from_row_slice(2, 2, &[c(0., 0.), c(-1., 0.), c(1., 0.), c(0., 0.)]);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - c(0., -1.)).norm() < 1e-14);
        assert!((ev[1] - c(0., 1.)).norm() < 1e-14);
    }

    #[test]
    fn hermitian_eigen_is_sorted_and_orthonormal() {
        let m = CMatrix::<f64>::from_row_slice(2, 2, &[c(2., 0.), c(0., 1.), c(0., -1.), c(2., 0.)]);
        let (vals, vecs) = hermitian_eigen(&m).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let g = vecs.adjoint() * &vecs;
        assert!(max_abs(&(g - identity(2))) < 1e-14);
    }

    #[test]
    fn null_space_of_wide_and_tall() {
        let m = CMatrix::<f64>::from_row_slice(1, 2, &[c(1., 0.), c(1., 0.)]);
        let (k, _) = null_space(&m, 1.0, 1e-10).unwrap();
        assert_eq!(k.ncols(), 1);
        assert!(max_abs(&(&m * &k)) < 1e-14);
        let tall = CMatrix::<f64>::from_row_slice(3, 1, &[c(0., 0.), c(0., 0.), c(0., 0.)]);
        let (k, _) = null_space(&tall, 1.0, 1e-10).unwrap();
        assert_eq!(k.ncols(), 1);
    }

    #[test]
    fn zero_block_is_singular() {
        let z = zeros::<f64>(1, 1);
        assert!(!invertibility(&z, 0.0, 1e-10).invertible);
        assert!(!invertibility(&z, 1.0, 1e-10).invertible);
        let one = identity::<f64>(1);
        assert!(invertibility(&one, 1.0, 1e-10).invertible);
    }
}
