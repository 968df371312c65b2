//! Structural splitting of the constant skew-Hermitian leading coefficient.
//!
//! Given `J* = -J`, a unitary `V` whose first `n1` columns span `ran J` and
//! whose remaining `n2` columns span `ker J` brings `J` to the block form
//! `V* J V = blkdiag(J11, 0)` with `J11` invertible. Every downstream module
//! works in these coordinates: `V* f = [f1; f2]` splits a field into its
//! differentiated (tangential) and algebraic (normal) parts.

use nalgebra::ComplexField;

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, identity, max_abs, submatrix};
use crate::scalar::{imag_unit, re, CMatrix, CVector, Real, Tolerances};

/// A validated nonzero skew-Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewHermitian<T: Real> {
    matrix: CMatrix<T>,
}

impl<T: Real> SkewHermitian<T> {
    /// Validates `J* = -J` and `J != 0` within `tol.structure`.
    pub fn new(matrix: CMatrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "J must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        linalg::require_finite(&matrix, "J")?;
        let defect = linalg::skew_defect(&matrix);
        if defect > tol.structure {
            return Err(Error::RejectsNonSkew {
                defect: defect.as_f64(),
            });
        }
        if max_abs(&matrix) <= tol.structure {
            return Err(Error::RejectsZero);
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    /// Rank with singular values below `n * tol * sigma_max` treated as zero.
    pub fn rank(&self, tol: &Tolerances<T>) -> usize {
        let sv = linalg::singular_values(&self.matrix);
        let sigma_max = sv.iter().copied().fold(T::zero(), |a, b| if b > a { b } else { a });
        let cut = T::lit(self.dim() as f64) * tol.structure * sigma_max;
        sv.iter().filter(|&&s| s > cut).count()
    }
}

/// The splitting `V* J V = blkdiag(J11, 0)` together with the Moore-Penrose
/// data of `J`.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalSplitting<T: Real> {
    j: CMatrix<T>,
    v: CMatrix<T>,
    n1: usize,
    n2: usize,
    j11: CMatrix<T>,
    j11_inv: CMatrix<T>,
    j_plus: CMatrix<T>,
    projection: CMatrix<T>,
}

/// Builds the splitting from an eigendecomposition of the Hermitian matrix
/// `iJ`.
///
/// Columns spanning `ran J` are ordered by descending `|eigenvalue|`; ties
/// are broken by the index of the first significant eigenvector entry and
/// then by the sign of the eigenvalue (positive first). Each column is
/// rotated so that its first significant entry is real and positive. When
/// `J` is invertible the identity is used for `V`.
pub fn build_splitting<T: Real>(
    j: &SkewHermitian<T>,
    tol: &Tolerances<T>,
) -> Result<CanonicalSplitting<T>> {
    let n = j.dim();
    let n1 = j.rank(tol);
    if n1 == n {
        return CanonicalSplitting::assemble(j.matrix().clone(), identity(n), n1);
    }
    let ij = j.matrix().map(|z| z * imag_unit());
    let (vals, vecs) = linalg::hermitian_eigen(&ij)?;

    let sigma_max = vals
        .iter()
        .map(|v| v.abs())
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    let tie = T::lit(n as f64) * tol.structure * sigma_max;
    let significant = T::tolerance(1e-8);

    let columns: Vec<(T, usize, CVector<T>)> = (0..n)
        .map(|i| {
            let mut col: CVector<T> = vecs.column(i).into_owned();
            let lead = col
                .iter()
                .position(|z| z.modulus() > significant)
                .unwrap_or(0);
            let phase = col[lead].conjugate() / re(col[lead].modulus());
            col.iter_mut().for_each(|z| *z *= phase);
            (vals[i], lead, col)
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (va, la, _) = &columns[a];
        let (vb, lb, _) = &columns[b];
        let (ma, mb) = (va.abs(), vb.abs());
        if (ma - mb).abs() > tie {
            return mb.partial_cmp(&ma).unwrap_or(std::cmp::Ordering::Equal);
        }
        la.cmp(lb)
            .then_with(|| vb.partial_cmp(va).unwrap_or(std::cmp::Ordering::Equal))
    });

    let mut v = linalg::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        v.set_column(dst, &columns[src].2);
    }
    CanonicalSplitting::assemble(j.matrix().clone(), v, n1)
}

/// Moore-Penrose pseudoinverse of a skew-Hermitian matrix, built from the
/// splitting as `V blkdiag(J11^{-1}, 0) V*`.
pub fn pseudoinverse<T: Real>(j: &SkewHermitian<T>, tol: &Tolerances<T>) -> Result<CMatrix<T>> {
    Ok(build_splitting(j, tol)?.j_plus().clone())
}

impl<T: Real> CanonicalSplitting<T> {
    /// Accepts a caller-supplied unitary `V` (for example the explicit
    /// permutation used for Maxwell's equations) after checking that it is
    /// admissible: unitary, and `V* J V` vanishes outside the leading
    /// `rank J` block.
    pub fn from_basis(j: &SkewHermitian<T>, v: CMatrix<T>, tol: &Tolerances<T>) -> Result<Self> {
        let n = j.dim();
        linalg::require_square(&v, n, "V")?;
        linalg::require_finite(&v, "V")?;
        let unitary_defect = max_abs(&(v.adjoint() * &v - identity::<T>(n)));
        if unitary_defect > T::lit(n as f64) * tol.structure * T::lit(10.0) {
            return Err(Error::InadmissibleBasis(format!(
                "V is not unitary (max |V*V - I| = {:e})",
                unitary_defect.as_f64()
            )));
        }
        let n1 = j.rank(tol);
        let rotated = v.adjoint() * j.matrix() * &v;
        let mut outside = rotated.clone();
        outside.view_mut((0, 0), (n1, n1)).fill(re(T::zero()));
        let scale = max_abs(j.matrix());
        let defect = max_abs(&outside);
        if defect > T::lit(n as f64) * T::lit(100.0) * tol.structure * scale {
            return Err(Error::InadmissibleBasis(format!(
                "V* J V has entries of size {:e} outside the leading {n1}x{n1} block",
                defect.as_f64()
            )));
        }
        Self::assemble(j.matrix().clone(), v, n1)
    }

    fn assemble(j: CMatrix<T>, v: CMatrix<T>, n1: usize) -> Result<Self> {
        let n = j.nrows();
        let n2 = n - n1;
        let v1 = submatrix(&v, 0, 0, n, n1);
        let j11 = v1.adjoint() * &j * &v1;
        let j11_inv = linalg::inverse(&j11).ok_or(Error::SingularBlock {
            which: "J11",
            sigma_min: 0.0,
            scale: max_abs(&j).as_f64(),
        })?;
        let j_plus = &v1 * &j11_inv * v1.adjoint();
        let projection = &v1 * v1.adjoint();
        Ok(Self {
            j,
            v,
            n1,
            n2,
            j11,
            j11_inv,
            j_plus,
            projection,
        })
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    /// `rank J`.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// `dim ker J`.
    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn j(&self) -> &CMatrix<T> {
        &self.j
    }

    pub fn v(&self) -> &CMatrix<T> {
        &self.v
    }

    pub fn j11(&self) -> &CMatrix<T> {
        &self.j11
    }

    pub fn j11_inv(&self) -> &CMatrix<T> {
        &self.j11_inv
    }

    /// Moore-Penrose pseudoinverse `J+`.
    pub fn j_plus(&self) -> &CMatrix<T> {
        &self.j_plus
    }

    /// Orthogonal projection `J+ J = J J+` onto `ran J`.
    pub fn projection(&self) -> &CMatrix<T> {
        &self.projection
    }

    pub fn is_regular(&self) -> bool {
        self.n2 == 0
    }

    /// `V* M V` partitioned conformally with `blkdiag(J11, 0)`.
    pub fn partition(&self, m: &CMatrix<T>) -> Result<BlockMatrix<T>> {
        linalg::require_square(m, self.dim(), "coefficient")?;
        Ok(BlockMatrix::split(&(self.v.adjoint() * m * &self.v), self.n1))
    }

    /// Splits `f` into `(f1, f2)` with `V* f = [f1; f2]`.
    pub fn project_tangential(&self, f: &CVector<T>) -> Result<(CVector<T>, CVector<T>)> {
        if f.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {}, expected {}",
                f.len(),
                self.dim()
            )));
        }
        let g = self.v.adjoint() * f;
        Ok((g.rows(0, self.n1).into_owned(), g.rows(self.n1, self.n2).into_owned()))
    }

    /// Inverse of [`project_tangential`](Self::project_tangential): `V [f1; f2]`.
    pub fn combine(&self, f1: &CVector<T>, f2: &CVector<T>) -> Result<CVector<T>> {
        if f1.len() != self.n1 || f2.len() != self.n2 {
            return Err(Error::ShapeMismatch(format!(
                "components of length ({}, {}), expected ({}, {})",
                f1.len(),
                f2.len(),
                self.n1,
                self.n2
            )));
        }
        let mut g = CVector::zeros(self.dim());
        g.rows_mut(0, self.n1).copy_from(f1);
        g.rows_mut(self.n1, self.n2).copy_from(f2);
        Ok(&self.v * g)
    }

    /// Max-norm deviation of `V* J V` from `blkdiag(J11, 0)`.
    pub fn block_defect(&self) -> T {
        let rotated = self.v.adjoint() * &self.j * &self.v;
        let target = block_diag(&self.j11, &linalg::zeros(self.n2, self.n2));
        max_abs(&(rotated - target))
    }

    /// Max-norm deviation of `V* V` from the identity.
    pub fn unitarity_defect(&self) -> T {
        max_abs(&(self.v.adjoint() * &self.v - identity::<T>(self.dim())))
    }
}

/// Max-norm defects of the four Moore-Penrose identities
/// `J J+ J = J`, `J+ J J+ = J+`, `(J+ J)* = J+ J`, `(J J+)* = J J+`.
pub fn moore_penrose_defects<T: Real>(j: &CMatrix<T>, jp: &CMatrix<T>) -> [T; 4] {
    let pj = jp * j;
    let jpj = j * jp;
    [
        max_abs(&(j * jp * j - j)),
        max_abs(&(jp * j * jp - jp)),
        linalg::hermitian_defect(&pj),
        linalg::hermitian_defect(&jpj),
    ]
}

/// A square matrix partitioned as `[[b11, b12], [b21, b22]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix<T: Real> {
    pub b11: CMatrix<T>,
    pub b12: CMatrix<T>,
    pub b21: CMatrix<T>,
    pub b22: CMatrix<T>,
}

impl<T: Real> BlockMatrix<T> {
    /// Partitions `m` with a leading block of size `n1`.
    pub fn split(m: &CMatrix<T>, n1: usize) -> Self {
        let n = m.nrows();
        let n2 = n - n1;
        Self {
            b11: submatrix(m, 0, 0, n1, n1),
            b12: submatrix(m, 0, n1, n1, n2),
            b21: submatrix(m, n1, 0, n2, n1),
            b22: submatrix(m, n1, n1, n2, n2),
        }
    }

    pub fn n1(&self) -> usize {
        self.b11.nrows()
    }

    pub fn n2(&self) -> usize {
        self.b22.nrows()
    }

    pub fn join(&self) -> CMatrix<T> {
        let (n1, n2) = (self.n1(), self.n2());
        let mut m = linalg::zeros(n1 + n2, n1 + n2);
        m.view_mut((0, 0), (n1, n1)).copy_from(&self.b11);
        m.view_mut((0, n1), (n1, n2)).copy_from(&self.b12);
        m.view_mut((n1, 0), (n2, n1)).copy_from(&self.b21);
        m.view_mut((n1, n1), (n2, n2)).copy_from(&self.b22);
        m
    }

    /// The `n2 x n` row block `[b21 b22]`.
    pub fn lower_rows(&self) -> CMatrix<T> {
        let (n1, n2) = (self.n1(), self.n2());
        let mut m = linalg::zeros(n2, n1 + n2);
        m.view_mut((0, 0), (n2, n1)).copy_from(&self.b21);
        m.view_mut((0, n1), (n2, n2)).copy_from(&self.b22);
        m
    }

    /// The `n1 x n` row block `[b11 b12]`.
    pub fn upper_rows(&self) -> CMatrix<T> {
        let (n1, n2) = (self.n1(), self.n2());
        let mut m = linalg::zeros(n1, n1 + n2);
        m.view_mut((0, 0), (n1, n1)).copy_from(&self.b11);
        m.view_mut((0, n1), (n1, n2)).copy_from(&self.b12);
        m
    }

    /// The `n x n2` column block `[b12; b22]`.
    pub fn right_columns(&self) -> CMatrix<T> {
        let (n1, n2) = (self.n1(), self.n2());
        let mut m = linalg::zeros(n1 + n2, n2);
        m.view_mut((0, 0), (n1, n2)).copy_from(&self.b12);
        m.view_mut((n1, 0), (n2, n2)).copy_from(&self.b22);
        m
    }
}
