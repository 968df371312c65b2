//! Floquet multipliers, Bloch wavenumbers, band scans over real `λ`, and
//! per-layer detection of eigenvalues of infinite multiplicity.
//!
//! The propagating count is the number of multipliers on the unit circle.
//! Its identification with the number of bounded solutions is taken from
//! the ODE theory of periodic canonical systems.

use std::cmp::Ordering;

use nalgebra::ComplexField;
use num_complex::Complex;
use rayon::prelude::*;

use crate::canonical::CanonicalSplitting;
use crate::coefficients::LayeredCoefficients;
use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_eigen, hermitian_sqrt, null_space};
use crate::propagation::{monodromy, monodromy_at, Monodromy};
use crate::reduction::reduce_at;
use crate::scalar::{re, CMatrix, CVector, Real, Tolerances};

/// One Floquet multiplier with its classification.
#[derive(Clone, Debug, PartialEq)]
pub struct Multiplier<T: Real> {
    pub value: Complex<T>,
    pub modulus: T,
    pub on_circle: bool,
    /// `arg(μ)/d` in `(-π/d, π/d]` for on-circle multipliers.
    pub wavenumber: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FloquetSet<T: Real> {
    pub lambda: Complex<T>,
    pub period: T,
    /// Sorted by argument, then modulus. Repeated values appear repeatedly.
    pub multipliers: Vec<Multiplier<T>>,
}

impl<T: Real> FloquetSet<T> {
    /// Number of multipliers on the unit circle.
    pub fn propagating(&self) -> usize {
        self.multipliers.iter().filter(|m| m.on_circle).count()
    }

    pub fn values(&self) -> Vec<Complex<T>> {
        self.multipliers.iter().map(|m| m.value).collect()
    }
}

/// Principal argument in `(-π, π]`.
pub fn principal_arg<T: Real>(z: Complex<T>) -> T {
    let a = z.im.atan2(z.re);
    if a <= -T::pi() {
        T::pi()
    } else {
        a
    }
}

fn by_arg_then_modulus<T: Real>(a: &Complex<T>, b: &Complex<T>) -> Ordering {
    principal_arg(*a)
        .partial_cmp(&principal_arg(*b))
        .unwrap_or(Ordering::Equal)
        .then(a.modulus().partial_cmp(&b.modulus()).unwrap_or(Ordering::Equal))
}

/// Eigenvalues of the monodromy, classified against `tol.circle`.
pub fn floquet<T: Real>(m: &Monodromy<T>, period: T, tol: &Tolerances<T>) -> Result<FloquetSet<T>> {
    if !linalg::is_finite(&m.m) {
        return Err(Error::EigensolverFailure);
    }
    let mut values = linalg::eigenvalues(&m.m)?;
    values.sort_by(by_arg_then_modulus);
    let multipliers = values
        .into_iter()
        .map(|value| {
            let modulus = value.modulus();
            let on_circle = (modulus - T::one()).abs() <= tol.circle;
            Multiplier {
                value,
                modulus,
                on_circle,
                wavenumber: on_circle.then(|| principal_arg(value) / period),
            }
        })
        .collect();
    Ok(FloquetSet {
        lambda: m.lambda,
        period,
        multipliers,
    })
}

/// Reduces, propagates and classifies at one `λ`.
pub fn floquet_at<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    lambda: Complex<T>,
    tol: &Tolerances<T>,
) -> Result<FloquetSet<T>> {
    floquet(&monodromy_at(coeffs, splitting, lambda, tol)?, coeffs.period(), tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeDirection {
    /// Fewer propagating multipliers above the edge than below.
    GapOpens,
    /// More propagating multipliers above the edge than below.
    GapCloses,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandEdge<T: Real> {
    pub lambda: T,
    pub count_below: usize,
    pub count_above: usize,
    pub direction: EdgeDirection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandSample<T: Real> {
    pub lambda: T,
    /// `None` where the reduction is undefined.
    pub floquet: Option<FloquetSet<T>>,
}

impl<T: Real> BandSample<T> {
    pub fn count(&self) -> Option<usize> {
        self.floquet.as_ref().map(FloquetSet::propagating)
    }
}

/// A `λ` at which some layer has singular `(H - λW)_22`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlaggedPoint<T: Real> {
    pub lambda: T,
    pub layer: usize,
    pub point_spectrum: PointSpectrumFinding<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandScan<T: Real> {
    pub samples: Vec<BandSample<T>>,
    pub edges: Vec<BandEdge<T>>,
    pub flagged: Vec<FlaggedPoint<T>>,
}

enum Probe<T: Real> {
    Count(FloquetSet<T>),
    Singular(usize),
}

fn probe<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    lambda: T,
    tol: &Tolerances<T>,
) -> Result<Probe<T>> {
    match reduce_at(coeffs, splitting, re(lambda), tol) {
        Ok(gen) => Ok(Probe::Count(floquet(&monodromy(&gen)?, coeffs.period(), tol)?)),
        Err(Error::SingularA22 { layer, .. }) => Ok(Probe::Singular(layer)),
        Err(e) => Err(e),
    }
}

struct EdgeSearch<'a, T: Real> {
    coeffs: &'a LayeredCoefficients<T>,
    splitting: &'a CanonicalSplitting<T>,
    tol: &'a Tolerances<T>,
    resolution: T,
}

impl<T: Real> EdgeSearch<'_, T> {
    /// Finds every count change in `(lo, hi)` given the counts at the ends.
    fn locate(
        &self,
        mut lo: T,
        c_lo: usize,
        hi: T,
        c_hi: usize,
        edges: &mut Vec<BandEdge<T>>,
        flagged: &mut Vec<(T, usize)>,
    ) -> Result<()> {
        let end = hi;
        let mut hi = hi;
        let mut c_right = c_hi;
        while hi - lo > self.resolution {
            let mid = lo + (hi - lo) * T::lit(0.5);
            match probe(self.coeffs, self.splitting, mid, self.tol)? {
                Probe::Count(f) => {
                    let c = f.propagating();
                    if c == c_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                        c_right = c;
                    }
                }
                Probe::Singular(layer) => {
                    flagged.push((mid, layer));
                    return Ok(());
                }
            }
        }
        let lambda = lo + (hi - lo) * T::lit(0.5);
        edges.push(BandEdge {
            lambda,
            count_below: c_lo,
            count_above: c_right,
            direction: if c_right < c_lo {
                EdgeDirection::GapOpens
            } else {
                EdgeDirection::GapCloses
            },
        });
        if c_right != c_hi && end - hi > self.resolution {
            self.locate(hi, c_right, end, c_hi, edges, flagged)?;
        }
        Ok(())
    }
}

/// Scans `N` equally spaced real `λ` in `[λ_min, λ_max]`, refines every
/// count change by bisection to `1e-10 (λ_max - λ_min)` and flags points
/// where the reduction is undefined.
pub fn band_scan<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    lambda_min: T,
    lambda_max: T,
    num: usize,
    tol: &Tolerances<T>,
) -> Result<BandScan<T>> {
    if num < 2 || !lambda_min.is_finite() || !lambda_max.is_finite() || !(lambda_max > lambda_min) {
        return Err(Error::RangeInvalid(format!(
            "need finite lambda_min < lambda_max and N >= 2, got [{lambda_min}, {lambda_max}], N = {num}"
        )));
    }
    let width = lambda_max - lambda_min;
    let grid: Vec<T> = (0..num)
        .map(|i| {
            if i + 1 == num {
                lambda_max
            } else {
                lambda_min + width * T::lit(i as f64 / (num - 1) as f64)
            }
        })
        .collect();
    let probes: Vec<Probe<T>> = grid
        .par_iter()
        .map(|&l| probe(coeffs, splitting, l, tol))
        .collect::<Result<_>>()?;

    let search = EdgeSearch {
        coeffs,
        splitting,
        tol,
        resolution: width * T::tolerance(1e-10),
    };
    let pairs: Vec<(usize, usize, usize)> = probes
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| match (&w[0], &w[1]) {
            (Probe::Count(a), Probe::Count(b)) if a.propagating() != b.propagating() => {
                Some((i, a.propagating(), b.propagating()))
            }
            _ => None,
        })
        .collect();
    let refined: Vec<(Vec<BandEdge<T>>, Vec<(T, usize)>)> = pairs
        .par_iter()
        .map(|&(i, a, b)| {
            let mut edges = Vec::new();
            let mut flags = Vec::new();
            search.locate(grid[i], a, grid[i + 1], b, &mut edges, &mut flags)?;
            Ok((edges, flags))
        })
        .collect::<Result<_>>()?;

    let mut flagged_raw: Vec<(T, usize)> = grid
        .iter()
        .zip(&probes)
        .filter_map(|(&l, p)| match p {
            Probe::Singular(layer) => Some((l, *layer)),
            Probe::Count(_) => None,
        })
        .collect();
    let mut edges = Vec::new();
    for (e, f) in refined {
        edges.extend(e);
        flagged_raw.extend(f);
    }
    flagged_raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let flagged = flagged_raw
        .into_iter()
        .map(|(lambda, layer)| {
            Ok(FlaggedPoint {
                lambda,
                layer,
                point_spectrum: point_spectrum(coeffs, splitting, lambda, tol)?,
            })
        })
        .collect::<Result<_>>()?;
    let samples = grid
        .into_iter()
        .zip(probes)
        .map(|(lambda, p)| BandSample {
            lambda,
            floquet: match p {
                Probe::Count(f) => Some(f),
                Probe::Singular(_) => None,
            },
        })
        .collect();
    Ok(BandScan {
        samples,
        edges,
        flagged,
    })
}

/// Kernel of `[(H - λW)_12; (H - λW)_22]` on one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerKernel<T: Real> {
    pub layer: usize,
    pub dimension: usize,
    /// Smallest singular value of the stacked map (zero when `n2 = 0`).
    pub sigma_min: T,
    pub scale: T,
    /// Unit-norm kernel vector, if any.
    pub witness: Option<CVector<T>>,
    /// `|A12 f2| + |A22 f2|` for the witness.
    pub residual: Option<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSpectrumFinding<T: Real> {
    pub lambda: T,
    pub layers: Vec<LayerKernel<T>>,
    /// `λ` is certified as an eigenvalue of infinite multiplicity. `false`
    /// means no certificate was found, not that `λ` is not an eigenvalue.
    pub certified: bool,
}

impl<T: Real> PointSpectrumFinding<T> {
    /// First layer with a nontrivial kernel.
    pub fn witness(&self) -> Option<&LayerKernel<T>> {
        self.layers.iter().find(|l| l.dimension > 0)
    }
}

fn layer_scale<T: Real>(h: &CMatrix<T>, w: &CMatrix<T>, lambda: T) -> T {
    let pencil = h - w * re(lambda);
    linalg::norm2(&pencil)
        .max(linalg::norm2(h))
        .max(lambda.abs() * linalg::norm2(w))
}

/// Per-layer kernel test: a nontrivial kernel of the stacked normal columns
/// of the pencil yields compactly supported eigenfunctions `V [0; f2]`.
pub fn point_spectrum<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    lambda: T,
    tol: &Tolerances<T>,
) -> Result<PointSpectrumFinding<T>> {
    let pencil = coeffs.shift_pencil(splitting, re(lambda))?;
    let mut layers = Vec::with_capacity(pencil.layers.len());
    for (k, (pl, layer)) in pencil.layers.iter().zip(coeffs.layers()).enumerate() {
        let stacked = pl.a.right_columns();
        let scale = layer_scale(layer.h(), layer.w(), lambda);
        if stacked.ncols() == 0 {
            layers.push(LayerKernel {
                layer: k,
                dimension: 0,
                sigma_min: T::zero(),
                scale,
                witness: None,
                residual: None,
            });
            continue;
        }
        let (basis, sigma) = null_space(&stacked, scale, tol.singular)?;
        let sigma_min = sigma
            .iter()
            .take(stacked.ncols())
            .copied()
            .fold(T::infinity(), |a, b| if b < a { b } else { a });
        let witness = (basis.ncols() > 0).then(|| basis.column(0).into_owned());
        let residual = witness.as_ref().map(|f2| {
            linalg::vec_norm(&(&pl.a.b12 * f2)) + linalg::vec_norm(&(&pl.a.b22 * f2))
        });
        layers.push(LayerKernel {
            layer: k,
            dimension: basis.ncols(),
            sigma_min,
            scale,
            witness,
            residual,
        });
    }
    let certified = layers.iter().any(|l| l.dimension > 0);
    Ok(PointSpectrumFinding {
        lambda,
        layers,
        certified,
    })
}

/// Independence check of translated witnesses on disjoint supports.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslateCheck<T: Real> {
    /// Weighted Gram matrix `<W f_i, f_j>` over the union of supports.
    pub gram: CMatrix<T>,
    pub min_eigenvalue: T,
    pub independent: bool,
    /// Largest `|J f' + (H - λW) f|` over the supports.
    pub max_residual: T,
}

/// Builds `count` eigenfunctions `f_j = V [0; f2]` supported on the witness
/// layer in periods `0, 1, ..., count - 1` and checks their independence in
/// `L²(W)`.
pub fn translate_family<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    finding: &PointSpectrumFinding<T>,
    count: usize,
    tol: &Tolerances<T>,
) -> Option<TranslateCheck<T>> {
    let kernel = finding.witness()?;
    let f2 = kernel.witness.as_ref()?;
    let layer = &coeffs.layers()[kernel.layer];
    let f = splitting
        .combine(&CVector::zeros(splitting.n1()), f2)
        .ok()?;
    let mass = f.dotc(&(layer.w() * &f)).re * layer.thickness();
    // Supports in distinct periods are disjoint, so the Gram matrix is
    // diagonal with the single-support mass on the diagonal.
    let gram = CMatrix::from_fn(count, count, |i, j| if i == j { re(mass) } else { re(T::zero()) });
    let (eigs, _) = hermitian_eigen(&gram).ok()?;
    let min_eigenvalue = eigs.first().copied().unwrap_or(T::zero());
    // f is constant on the layer interior, so f' = 0 there.
    let residual = linalg::vec_norm(&(layer.pencil(re(finding.lambda)) * &f));
    Some(TranslateCheck {
        independent: min_eigenvalue > tol.singular * mass.max(T::zero()) && mass > T::zero(),
        gram,
        min_eigenvalue,
        max_residual: residual,
    })
}

/// Real `λ` where some layer's `H22 - λW22` is singular and the per-layer
/// kernel test certifies an eigenvalue, sorted and deduplicated.
pub fn point_spectrum_candidates<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    tol: &Tolerances<T>,
) -> Result<Vec<T>> {
    let mut out: Vec<T> = Vec::new();
    if splitting.n2() == 0 {
        return Ok(out);
    }
    for layer in coeffs.layers() {
        let h = splitting.partition(layer.h())?;
        let w = splitting.partition(layer.w())?;
        let root = hermitian_sqrt(&w.b22)?;
        let Some(inv_root) = linalg::inverse(&root) else {
            continue;
        };
        let reduced = &inv_root * &h.b22 * &inv_root;
        let (values, _) = hermitian_eigen(&reduced)?;
        for v in values {
            if point_spectrum(coeffs, splitting, v, tol)?.certified {
                out.push(v);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let merge = T::tolerance(1e-10);
    out.dedup_by(|a, b| (*a - *b).abs() <= merge * T::one().max(b.abs()));
    Ok(out)
}

/// Dimension of the solution space of the homogeneous system on one period,
/// `rank J`, after checking that the monodromy is invertible.
pub fn kernel_dimension_one_period<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    lambda: Complex<T>,
    tol: &Tolerances<T>,
) -> Result<usize> {
    let m = monodromy_at(coeffs, splitting, lambda, tol)?;
    let check = linalg::invertibility(&m.m, linalg::norm2(&m.m), tol.singular);
    if !check.invertible {
        return Err(Error::SingularBlock {
            which: "monodromy",
            sigma_min: check.sigma_min.as_f64(),
            scale: check.scale.as_f64(),
        });
    }
    Ok(splitting.n1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{build_splitting, SkewHermitian};
    use crate::coefficients::Layer;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn example() -> (LayeredCoefficients<f64>, CanonicalSplitting<f64>) {
        let tol = Tolerances::default();
        let j = CMatrix::<f64>::from_row_slice(2, 2, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        let s = build_splitting(&SkewHermitian::new(j, &tol).unwrap(), &tol).unwrap();
        let layer = Layer::new(1.0, linalg::zeros(2, 2), linalg::identity(2)).unwrap();
        (LayeredCoefficients::new(vec![layer]).unwrap(), s)
    }

    #[test]
    fn principal_branch() {
        assert_eq!(principal_arg(c(-1., -0.0)), std::f64::consts::PI);
        assert_eq!(principal_arg(c(-1., 0.0)), std::f64::consts::PI);
        assert_eq!(principal_arg(c(1., 0.)), 0.0);
    }

    #[test]
    fn example_floquet() {
        let (coeffs, s) = example();
        let tol = Tolerances::default();
        let lam = 0.8;
        let f = floquet_at(&coeffs, &s, c(lam, 0.), &tol).unwrap();
        assert_eq!(f.propagating(), 1);
        let m = &f.multipliers[0];
        assert!((m.value - c(0., -lam).exp()).norm() < 1e-14);
        assert!((m.wavenumber.unwrap() + lam).abs() < 1e-14);
    }

    #[test]
    fn identity_monodromy() {
        let m = Monodromy {
            lambda: c(0., 0.),
            m: linalg::identity::<f64>(3),
            condition: 1.0,
        };
        let f = floquet(&m, 2.0, &Tolerances::default()).unwrap();
        assert_eq!(f.propagating(), 3);
        assert!(f.multipliers.iter().all(|m| m.wavenumber == Some(0.0)));
    }

    #[test]
    fn example_band_scan_has_one_mode() {
        let (coeffs, s) = example();
        let scan = band_scan(&coeffs, &s, 1.0, 2.0, 21, &Tolerances::default()).unwrap();
        assert!(scan.samples.iter().all(|x| x.count() == Some(1)));
        assert!(scan.edges.is_empty() && scan.flagged.is_empty());
        assert!(matches!(
            band_scan(&coeffs, &s, 2.0, 1.0, 10, &Tolerances::default()),
            Err(Error::RangeInvalid(_))
        ));
    }

    #[test]
    fn example_scan_through_zero_flags_it() {
        let (coeffs, s) = example();
        let scan = band_scan(&coeffs, &s, -1.0, 1.0, 11, &Tolerances::default()).unwrap();
        assert_eq!(scan.flagged.len(), 1);
        assert_eq!(scan.flagged[0].lambda, 0.0);
        assert!(scan.flagged[0].point_spectrum.certified);
    }

    #[test]
    fn example_point_spectrum() {
        let (coeffs, s) = example();
        let tol = Tolerances::default();
        let zero = point_spectrum(&coeffs, &s, 0.0, &tol).unwrap();
        assert!(zero.certified);
        assert_eq!(zero.layers[0].dimension, 1);
        let check = translate_family(&coeffs, &s, &zero, 3, &tol).unwrap();
        assert!(check.independent);
        assert_eq!(check.max_residual, 0.0);
        assert!(!point_spectrum(&coeffs, &s, 1.0, &tol).unwrap().certified);
        assert_eq!(point_spectrum_candidates(&coeffs, &s, &tol).unwrap(), vec![0.0]);
        assert_eq!(kernel_dimension_one_period(&coeffs, &s, c(1., 0.), &tol).unwrap(), 1);
    }
}
