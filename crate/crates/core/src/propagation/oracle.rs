//! Fixed-step classical Runge-Kutta integration of the reduced system, used
//! only to cross-check the exponential propagators.

use crate::coefficients::{LayerFunction, PeriodFunction};
use crate::error::{Error, Result};
use crate::linalg::{self, identity};
use crate::reduction::ReducedGenerator;
use crate::scalar::{re, CMatrix, Real};

use super::segments;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    /// Successive halvings must agree to this relative max-norm tolerance.
    pub tolerance: f64,
    /// The initial step is at most `min thickness / base_divisions`.
    pub base_divisions: usize,
    pub max_halvings: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            base_divisions: 64,
            max_halvings: 12,
        }
    }
}

fn source_term<T: Real>(
    gen: &ReducedGenerator<T>,
    k: usize,
    piece: Option<&LayerFunction<T>>,
    s: T,
    cols: usize,
) -> Option<CMatrix<T>> {
    let piece = piece?;
    let b = &gen.layers[k].forcing * piece.eval(s);
    Some(CMatrix::from_fn(b.len(), cols, |i, _| b[i]))
}

fn rhs<T: Real>(
    gen: &ReducedGenerator<T>,
    k: usize,
    piece: Option<&LayerFunction<T>>,
    s: T,
    y: &CMatrix<T>,
) -> CMatrix<T> {
    let mut d = &gen.layers[k].generator * y;
    if let Some(src) = source_term(gen, k, piece, s, y.ncols()) {
        d += src;
    }
    d
}

fn integrate_once<T: Real>(
    gen: &ReducedGenerator<T>,
    source_rot: Option<&PeriodFunction<T>>,
    t0: T,
    t1: T,
    y0: &CMatrix<T>,
    h: T,
) -> CMatrix<T> {
    let thick: Vec<T> = gen.layers.iter().map(|l| l.thickness).collect();
    let half = T::lit(0.5);
    let sixth = re(T::lit(1.0 / 6.0));
    let two = re(T::lit(2.0));
    let mut y = y0.clone();
    for seg in segments(&thick, t0, t1) {
        let k = seg.layer;
        let piece = source_rot.map(|g| &g.pieces[k]);
        let len = seg.end - seg.start;
        let steps = (len / h).ceil().to_usize().unwrap_or(1).max(1);
        let dt = len / T::lit(steps as f64);
        let hc = re(dt);
        let hh = re(dt * half);
        for i in 0..steps {
            let s = seg.local_start + dt * T::lit(i as f64);
            let k1 = rhs(gen, k, piece, s, &y);
            let k2 = rhs(gen, k, piece, s + dt * half, &(&y + &k1 * hh));
            let k3 = rhs(gen, k, piece, s + dt * half, &(&y + &k2 * hh));
            let k4 = rhs(gen, k, piece, s + dt, &(&y + &k3 * hc));
            y += (k1 + k2 * two + k3 * two + k4) * (hc * sixth);
        }
    }
    y
}

/// Integrates `Y' = A_k Y + B_k V* g` from `t0` to `t1`, halving the step
/// until two successive results agree. The source, if any, must already be
/// rotated into splitting coordinates and is added to every column of `Y`.
pub fn oracle_integrate<T: Real>(
    gen: &ReducedGenerator<T>,
    source_rot: Option<&PeriodFunction<T>>,
    t0: T,
    t1: T,
    y0: &CMatrix<T>,
    opts: &OracleOptions,
) -> Result<CMatrix<T>> {
    if !t0.is_finite() || !t1.is_finite() || t1 < t0 {
        return Err(Error::InvalidInterval(format!("[{t0}, {t1}]")));
    }
    if let Some(g) = source_rot {
        if g.pieces.len() != gen.layers.len() {
            return Err(Error::UnsupportedSource(format!(
                "source has {} pieces, stack has {} layers",
                g.pieces.len(),
                gen.layers.len()
            )));
        }
    }
    let min_thickness = gen
        .layers
        .iter()
        .map(|l| l.thickness)
        .fold(T::infinity(), |a, b| if b < a { b } else { a });
    let mut h = min_thickness / T::lit(opts.base_divisions.max(1) as f64);
    let tol = T::tolerance(opts.tolerance);
    let mut previous = integrate_once(gen, source_rot, t0, t1, y0, h);
    for _ in 0..opts.max_halvings {
        h /= T::lit(2.0);
        let next = integrate_once(gen, source_rot, t0, t1, y0, h);
        let diff = linalg::max_abs(&(&next - &previous));
        let size = T::one().max(linalg::max_abs(&next));
        if !linalg::is_finite(&next) {
            break;
        }
        if diff <= tol * size {
            return Ok(next);
        }
        previous = next;
    }
    Err(Error::StepUnderflow {
        halvings: opts.max_halvings,
    })
}

/// Oracle monodromy: the identity integrated across one period.
pub fn oracle_monodromy<T: Real>(gen: &ReducedGenerator<T>, opts: &OracleOptions) -> Result<CMatrix<T>> {
    oracle_integrate(gen, None, T::zero(), gen.period, &identity(gen.n1), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::ReducedLayer;
    use num_complex::Complex64;

    fn scalar_gen(a: Complex64, thickness: &[f64]) -> ReducedGenerator<f64> {
        let layers = thickness
            .iter()
            .map(|&d| ReducedLayer {
                thickness: d,
                schur: CMatrix::from_element(1, 1, a),
                generator: CMatrix::from_element(1, 1, a),
                recovery: linalg::zeros(1, 1),
                source_gain: linalg::zeros(1, 2),
                forcing: CMatrix::from_row_slice(1, 2, &[Complex64::new(1., 0.), Complex64::new(0., 0.)]),
            })
            .collect();
        ReducedGenerator {
            lambda: Complex64::new(0., 0.),
            n1: 1,
            n2: 1,
            period: thickness.iter().sum(),
            layers,
        }
    }

    #[test]
    fn matches_exponential() {
        let lam = 3.0;
        let gen = scalar_gen(Complex64::new(0., -lam), &[0.5, 0.5]);
        let m = oracle_monodromy(&gen, &OracleOptions::default()).unwrap();
        assert!((m[(0, 0)] - Complex64::new(0., -lam).exp()).norm() < 1e-8);
    }

    #[test]
    fn zero_generator_is_constant() {
        let gen = scalar_gen(Complex64::new(0., 0.), &[1.0]);
        let y0 = CMatrix::from_element(1, 1, Complex64::new(2., -1.));
        let y = oracle_integrate(&gen, None, 0.0, 3.0, &y0, &OracleOptions::default()).unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn constant_source_closed_form() {
        // y' = a y + 1, y(0) = 0  =>  y(t) = (e^{at} - 1)/a.
        let a = Complex64::new(-0.5, 1.0);
        let gen = scalar_gen(a, &[1.0]);
        let g = PeriodFunction::uniform(
            LayerFunction::Constant(nalgebra::DVector::from_vec(vec![Complex64::new(1., 0.), Complex64::new(0., 0.)])),
            1,
        );
        let y = oracle_integrate(&gen, Some(&g), 0.0, 1.0, &linalg::zeros(1, 1), &OracleOptions::default()).unwrap();
        assert!((y[(0, 0)] - (a.exp() - 1.0) / a).norm() < 1e-8);
    }

    #[test]
    fn underflow_is_reported() {
        let gen = scalar_gen(Complex64::new(0., -500.), &[1.0]);
        let opts = OracleOptions {
            tolerance: 1e-14,
            base_divisions: 1,
            max_halvings: 2,
        };
        assert!(matches!(
            oracle_monodromy(&gen, &opts),
            Err(Error::StepUnderflow { halvings: 2 })
        ));
    }
}
