//! Seeded generators of random canonical systems for self-tests.
//!
//! Sizes are kept moderate so that one-period propagators stay well
//! conditioned: eigenvalues of `iJ` have modulus in `[1, 2]`, `|H| ≈ 0.5`,
//! eigenvalues of `W` lie in `[0.5, 1.5]`, layer thicknesses are at least
//! a third of the mean, and `d = 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::canonical::{build_splitting, CanonicalSplitting, SkewHermitian};
use crate::coefficients::{Layer, LayeredCoefficients};
use crate::error::Result;
use crate::linalg::{self, block_diag};
use crate::scalar::{CMatrix, Tolerances};

pub type Rand = ChaCha8Rng;

pub fn rng(seed: u64) -> Rand {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn complex_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| complex(rng))
}

/// Unitary factor of a random complex matrix.
pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix<f64> {
    if n == 0 {
        return linalg::identity(0);
    }
    complex_matrix(rng, n, n).qr().q()
}

/// Random Hermitian matrix with spectral norm about `scale`.
pub fn hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMatrix<f64> {
    let u = unitary(rng, n);
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(rng.gen_range(-scale..scale), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let h = &u * d * u.adjoint();
    (&h + h.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Random Hermitian positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn positive_definite<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> CMatrix<f64> {
    let u = unitary(rng, n);
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(rng.gen_range(lo..hi), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let w = &u * d * u.adjoint();
    (&w + w.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Random skew-Hermitian matrix of the given rank whose nonzero
/// eigenvalues `±i s` have `s` in `[1, 2]`.
pub fn skew_hermitian<R: Rng>(rng: &mut R, n: usize, rank: usize) -> CMatrix<f64> {
    let u = unitary(rng, n);
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j && i < rank {
            let s = rng.gen_range(1.0..2.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Complex64::new(0.0, sign * s)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let j = &u * d * u.adjoint();
    (&j - j.adjoint()) * Complex64::new(0.5, 0.0)
}

/// A random canonical system.
#[derive(Clone, Debug)]
pub struct RandomSystem {
    pub j: SkewHermitian<f64>,
    pub coeffs: LayeredCoefficients<f64>,
    pub splitting: CanonicalSplitting<f64>,
}

/// Stack with the given `J`, `layers` random Hermitian `H`, positive
/// definite `W` and thicknesses summing to 1.
pub fn stack_for<R: Rng>(rng: &mut R, j: CMatrix<f64>, layers: usize, tol: &Tolerances<f64>) -> Result<RandomSystem> {
    let n = j.nrows();
    let weights: Vec<f64> = (0..layers).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    let layers = weights
        .iter()
        .map(|w| Layer::new(w / total, hermitian(rng, n, 0.5), positive_definite(rng, n, 0.5, 1.5)))
        .collect::<Result<Vec<_>>>()?;
    let j = SkewHermitian::new(j, tol)?;
    let splitting = build_splitting(&j, tol)?;
    Ok(RandomSystem {
        j,
        coeffs: LayeredCoefficients::new(layers)?,
        splitting,
    })
}

/// Random system with `n` in `2..=n_max`, rank in `1..=n` and up to
/// `layers_max` layers.
pub fn system<R: Rng>(rng: &mut R, n_max: usize, layers_max: usize, tol: &Tolerances<f64>) -> Result<RandomSystem> {
    let n = rng.gen_range(2..=n_max.max(2));
    let rank = rng.gen_range(1..=n);
    let layers = rng.gen_range(1..=layers_max.max(1));
    let j = skew_hermitian(rng, n, rank);
    stack_for(rng, j, layers, tol)
}

/// Another admissible basis: `V blkdiag(U1, U2)` with random unitary `U1`,
/// `U2` acting inside `ran J` and `ker J`.
pub fn rotated_basis<R: Rng>(rng: &mut R, splitting: &CanonicalSplitting<f64>) -> CMatrix<f64> {
    let u = block_diag(&unitary(rng, splitting.n1()), &unitary(rng, splitting.n2()));
    splitting.v() * u
}

/// A real `λ` in `[lo, hi]` at which every layer's `(H - λW)_22` has
/// smallest singular value at least `margin`; `None` after 200 draws.
pub fn regular_real_lambda<R: Rng>(
    rng: &mut R,
    sys: &RandomSystem,
    lo: f64,
    hi: f64,
    margin: f64,
) -> Option<f64> {
    (0..200).find_map(|_| {
        let lambda = rng.gen_range(lo..hi);
        let ok = sys.coeffs.layers().iter().all(|layer| {
            let a = sys
                .splitting
                .partition(&layer.pencil(Complex64::new(lambda, 0.0)))
                .expect("dimensions agree");
            let sv = linalg::singular_values(&a.b22);
            sv.iter().all(|&s| s >= margin)
        });
        ok.then_some(lambda)
    })
}
