//! Reduction of the index-1 DAE `J f' + (H - λW) f = W g` to a regular ODE
//! on the tangential components plus an algebraic recovery of the normal
//! components.
//!
//! In splitting coordinates `V* f = [f1; f2]`, `V* g = [g1; g2]` and with
//! `A = V*(H - λW)V`, the system on each layer reads
//!
//! ```text
//! J11 f1' + S f1 = F,             S = A11 - A12 A22^{-1} A21
//! f2 = A22^{-1}(W21 g1 + W22 g2) - A22^{-1} A21 f1
//! F  = (W11 g1 + W12 g2) - A12 A22^{-1}(W21 g1 + W22 g2)
//! ```
//!
//! so `f1' = A_k f1 + B_k V* g` with `A_k = -J11^{-1} S_k`.

use num_complex::Complex;

use crate::canonical::{BlockMatrix, CanonicalSplitting};
use crate::coefficients::{BlockPencil, LayeredCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{self, invertibility};
use crate::scalar::{CMatrix, CVector, Real, Tolerances};

/// Which diagonal block is eliminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchurSide {
    /// `M/M22 = M11 - M12 M22^{-1} M21`.
    Block22,
    /// `M/M11 = M22 - M21 M11^{-1} M12`.
    Block11,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchurComplement<T: Real> {
    pub which: SchurSide,
    pub value: CMatrix<T>,
}

/// Schur complement of a 2x2 block matrix with respect to `which`.
///
/// The eliminated block must be invertible relative to the spectral norm of
/// the whole matrix.
pub fn schur<T: Real>(
    base: &BlockMatrix<T>,
    which: SchurSide,
    tol: &Tolerances<T>,
) -> Result<SchurComplement<T>> {
    let scale = linalg::norm2(&base.join());
    let (keep, left, pivot, right, label) = match which {
        SchurSide::Block22 => (&base.b11, &base.b12, &base.b22, &base.b21, "22"),
        SchurSide::Block11 => (&base.b22, &base.b21, &base.b11, &base.b12, "11"),
    };
    let check = invertibility(pivot, scale, tol.singular);
    if !check.invertible {
        return Err(Error::SingularBlock {
            which: label,
            sigma_min: check.sigma_min.as_f64(),
            scale: scale.as_f64(),
        });
    }
    let solved = linalg::solve(pivot, right).ok_or(Error::SingularBlock {
        which: label,
        sigma_min: check.sigma_min.as_f64(),
        scale: scale.as_f64(),
    })?;
    Ok(SchurComplement {
        which,
        value: keep - left * solved,
    })
}

/// Per-layer reduced data at a fixed spectral parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedLayer<T: Real> {
    pub thickness: T,
    /// `S_k = A11 - A12 A22^{-1} A21` (`n1 x n1`).
    pub schur: CMatrix<T>,
    /// ODE generator `A_k = -J11^{-1} S_k`.
    pub generator: CMatrix<T>,
    /// Recovery `R_k = -A22^{-1} A21` (`n2 x n1`).
    pub recovery: CMatrix<T>,
    /// Source gain `G_k = A22^{-1} [W21 W22]` (`n2 x n`), applied to `V* g`.
    pub source_gain: CMatrix<T>,
    /// Forcing `B_k = J11^{-1}([W11 W12] - A12 G_k)` (`n1 x n`), applied to `V* g`.
    pub forcing: CMatrix<T>,
}

/// The reduced first-order system `f1' = A_k f1 + B_k V* g` on each layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedGenerator<T: Real> {
    pub lambda: Complex<T>,
    pub n1: usize,
    pub n2: usize,
    pub period: T,
    pub layers: Vec<ReducedLayer<T>>,
}

impl<T: Real> ReducedGenerator<T> {
    pub fn layer(&self, k: usize) -> &ReducedLayer<T> {
        &self.layers[k]
    }

    /// `f1'` on layer `k` for the rotated source `V* g`.
    pub fn derivative(&self, k: usize, f1: &CVector<T>, g_rot: Option<&CVector<T>>) -> CVector<T> {
        let layer = &self.layers[k];
        let mut d = &layer.generator * f1;
        if let Some(g) = g_rot {
            d += &layer.forcing * g;
        }
        d
    }

    /// `f2 = G_k V* g + R_k f1` on layer `k`.
    pub fn normal_part(&self, k: usize, f1: &CVector<T>, g_rot: Option<&CVector<T>>) -> CVector<T> {
        let layer = &self.layers[k];
        let mut f2 = &layer.recovery * f1;
        if let Some(g) = g_rot {
            f2 += &layer.source_gain * g;
        }
        f2
    }
}

/// Builds the reduced generator from a shifted pencil.
///
/// Fails with [`Error::SingularA22`] on the first layer whose `A22` block is
/// singular relative to the norm of the layer pencil.
pub fn reduce<T: Real>(
    pencil: &BlockPencil<T>,
    splitting: &CanonicalSplitting<T>,
    tol: &Tolerances<T>,
) -> Result<ReducedGenerator<T>> {
    let (n1, n2) = (splitting.n1(), splitting.n2());
    let j11_inv = splitting.j11_inv();
    let mut period = T::zero();
    let mut layers = Vec::with_capacity(pencil.layers.len());
    for (k, layer) in pencil.layers.iter().enumerate() {
        period += layer.thickness;
        let a = &layer.a;
        let w = &layer.w;
        if a.n1() != n1 || a.n2() != n2 {
            return Err(Error::ShapeMismatch(format!(
                "pencil blocks ({}, {}) do not match splitting ({n1}, {n2})",
                a.n1(),
                a.n2()
            )));
        }
        if !linalg::is_finite(&a.join()) {
            return Err(Error::NonFiniteGenerator);
        }
        let singular = |sigma_min: T| Error::SingularA22 {
            layer: k,
            re: pencil.z.re.as_f64(),
            im: pencil.z.im.as_f64(),
            sigma_min: sigma_min.as_f64(),
        };
        let (schur_value, recovery, source_gain) = if n2 == 0 {
            (a.b11.clone(), linalg::zeros(0, n1), linalg::zeros(0, n1))
        } else {
            let scale = linalg::norm2(&a.join());
            let check = invertibility(&a.b22, scale, tol.singular);
            if !check.invertible {
                return Err(singular(check.sigma_min));
            }
            let mut rhs = linalg::zeros(n2, n1 + n1 + n2);
            rhs.view_mut((0, 0), (n2, n1)).copy_from(&a.b21);
            rhs.view_mut((0, n1), (n2, n1 + n2)).copy_from(&w.lower_rows());
            let solved = linalg::solve(&a.b22, &rhs).ok_or_else(|| singular(check.sigma_min))?;
            let a22_inv_a21 = linalg::submatrix(&solved, 0, 0, n2, n1);
            let gain = linalg::submatrix(&solved, 0, n1, n2, n1 + n2);
            (&a.b11 - &a.b12 * &a22_inv_a21, -a22_inv_a21, gain)
        };
        let generator = -(j11_inv * &schur_value);
        let forcing = if n2 == 0 {
            j11_inv * &w.b11
        } else {
            j11_inv * (w.upper_rows() - &a.b12 * &source_gain)
        };
        if !linalg::is_finite(&generator) {
            return Err(Error::NonFiniteGenerator);
        }
        layers.push(ReducedLayer {
            thickness: layer.thickness,
            schur: schur_value,
            generator,
            recovery,
            source_gain,
            forcing,
        });
    }
    Ok(ReducedGenerator {
        lambda: pencil.z,
        n1,
        n2,
        period,
        layers,
    })
}

/// Convenience: shift the stack at `lambda` and reduce.
pub fn reduce_at<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    lambda: Complex<T>,
    tol: &Tolerances<T>,
) -> Result<ReducedGenerator<T>> {
    reduce(&coeffs.shift_pencil(splitting, lambda)?, splitting, tol)
}

/// Recovers the normal components `f2(t_i) = G_k V* g(t_i) + R_k f1(t_i)`
/// along a sampled trajectory. `layers[i]` is the layer index of sample `i`.
pub fn recover_normal<T: Real>(
    generator: &ReducedGenerator<T>,
    layers: &[usize],
    f1: &[CVector<T>],
    g_rot: Option<&[CVector<T>]>,
) -> Result<Vec<CVector<T>>> {
    if layers.len() != f1.len() {
        return Err(Error::GridMisaligned(format!(
            "{} layer indices for {} samples",
            layers.len(),
            f1.len()
        )));
    }
    if let Some(g) = g_rot {
        if g.len() != f1.len() {
            return Err(Error::GridMisaligned(format!(
                "source has {} samples, trajectory {}",
                g.len(),
                f1.len()
            )));
        }
    }
    layers
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            if k >= generator.layers.len() {
                return Err(Error::GridMisaligned(format!("sample {i} refers to layer {k}")));
            }
            if f1[i].len() != generator.n1 {
                return Err(Error::ShapeMismatch(format!(
                    "f1 sample {i} has length {}, expected {}",
                    f1[i].len(),
                    generator.n1
                )));
            }
            Ok(generator.normal_part(k, &f1[i], g_rot.map(|g| &g[i])))
        })
        .collect()
}

/// `J f' + (H - zW) f - W g` at one point, given `f1' ` from the reduced
/// system. Only `J11 f1'` enters since `J V [0; x] = 0`.
pub fn dae_residual<T: Real>(
    splitting: &CanonicalSplitting<T>,
    h_minus_zw: &CMatrix<T>,
    w: &CMatrix<T>,
    f: &CVector<T>,
    f1_dot: &CVector<T>,
    g: Option<&CVector<T>>,
) -> Result<CVector<T>> {
    let jf_dot = splitting.combine(&(splitting.j11() * f1_dot), &CVector::zeros(splitting.n2()))?;
    let mut r = jf_dot + h_minus_zw * f;
    if let Some(g) = g {
        r -= w * g;
    }
    Ok(r)
}
