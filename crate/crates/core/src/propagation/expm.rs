//! Matrix exponential by scaling and squaring with a degree-13 diagonal Padé
//! approximant (Higham 2005).

use crate::error::{Error, Result};
use crate::linalg::{self, identity, norm1};
use crate::scalar::{re, CMatrix, Real};

const B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled `[13/13]` approximant meets unit
/// roundoff in double precision.
const THETA_13: f64 = 5.371920351148152;

fn scaled<T: Real>(m: &CMatrix<T>, c: f64) -> CMatrix<T> {
    m * re(T::lit(c))
}

/// `exp(a)` for a square complex matrix.
pub fn expm<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeMismatch(format!("expm of {}x{} matrix", n, a.ncols())));
    }
    if !linalg::is_finite(a) {
        return Err(Error::NonFiniteGenerator);
    }
    if n == 0 {
        return Ok(identity(0));
    }
    let norm = norm1(a).as_f64();
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = scaled(a, 0.5f64.powi(s));

    let eye = identity::<T>(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = &a6 * (scaled(&a6, B[13]) + scaled(&a4, B[11]) + scaled(&a2, B[9]));
    let u = &a * (inner_u + scaled(&a6, B[7]) + scaled(&a4, B[5]) + scaled(&a2, B[3]) + scaled(&eye, B[1]));
    let inner_v = &a6 * (scaled(&a6, B[12]) + scaled(&a4, B[10]) + scaled(&a2, B[8]));
    let v = inner_v + scaled(&a6, B[6]) + scaled(&a4, B[4]) + scaled(&a2, B[2]) + scaled(&eye, B[0]);

    let mut r = linalg::solve(&(&v - &u), &(&v + &u)).ok_or(Error::NonFiniteGenerator)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if !linalg::is_finite(&r) {
        return Err(Error::NonFiniteGenerator);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_gives_identity() {
        let e = expm(&linalg::zeros::<f64>(3, 3)).unwrap();
        assert!(linalg::max_abs(&(e - identity::<f64>(3))) < 1e-16);
    }

    #[test]
    fn scalar_phase() {
        for lam in [0.3, 7.0, 250.0] {
            let a = CMatrix::<f64>::from_element(1, 1, c(0., -lam));
            let e = expm(&a).unwrap();
            let exact = c(0., -lam).exp();
            assert!((e[(0, 0)] - exact).norm() < 1e-13 * lam.max(1.0), "{lam}");
        }
    }

    #[test]
    fn nilpotent_closed_form() {
        let a = CMatrix::<f64>::from_row_slice(2, 2, &[c(0., 0.), c(3., 1.), c(0., 0.), c(0., 0.)]);
        let e = expm(&a).unwrap();
        let expected = CMatrix::<f64>::from_row_slice(2, 2, &[c(1., 0.), c(3., 1.), c(0., 0.), c(1., 0.)]);
        assert!(linalg::max_abs(&(e - expected)) < 1e-15);
    }

    #[test]
    fn rotation_generator() {
        let t = 40.0;
        let a = CMatrix::<f64>::from_row_slice(2, 2, &[c(0., 0.), c(t, 0.), c(-t, 0.), c(0., 0.)]);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - c(t.cos(), 0.)).norm() < 1e-12);
        assert!((e[(0, 1)] - c(t.sin(), 0.)).norm() < 1e-12);
    }

    #[test]
    fn single_precision() {
        let a = CMatrix::<f32>::from_element(1, 1, num_complex::Complex32::new(0.5, 0.0));
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)].re - 0.5f32.exp()).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_finite() {
        let a = CMatrix::<f64>::from_element(1, 1, c(f64::NAN, 0.));
        assert_eq!(expm(&a), Err(Error::NonFiniteGenerator));
    }
}
