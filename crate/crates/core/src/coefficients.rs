//! Piecewise-constant d-periodic coefficients `H(t)`, `W(t)`.
//!
//! Layers are half-open intervals `[t_k, t_{k+1})` tiling `[0, d)`;
//! evaluation at `t` uses `t mod d`, so `t = d` falls in layer 0.

use nalgebra::ComplexField;
use num_complex::Complex;

use crate::canonical::{BlockMatrix, CanonicalSplitting};
use crate::error::{Error, Result};
use crate::linalg::{self, max_abs};
use crate::scalar::{re, CMatrix, CVector, Real, Tolerances};

/// One homogeneous layer of the period cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T: Real> {
    thickness: T,
    h: CMatrix<T>,
    w: CMatrix<T>,
}

impl<T: Real> Layer<T> {
    /// Rejects non-positive thickness, shape mismatches and non-finite
    /// entries. Hermiticity and definiteness are reported by
    /// [`LayeredCoefficients::validate`] instead of being enforced here.
    pub fn new(thickness: T, h: CMatrix<T>, w: CMatrix<T>) -> Result<Self> {
        if !(thickness.is_finite() && thickness > T::zero()) {
            return Err(Error::InvalidLayer(format!(
                "thickness must be positive, got {thickness}"
            )));
        }
        let n = h.nrows();
        if n == 0 {
            return Err(Error::InvalidLayer("empty coefficient matrices".into()));
        }
        linalg::require_square(&h, n, "H")?;
        linalg::require_square(&w, n, "W")?;
        linalg::require_finite(&h, "H")?;
        linalg::require_finite(&w, "W")?;
        Ok(Self { thickness, h, w })
    }

    pub fn thickness(&self) -> T {
        self.thickness
    }

    pub fn h(&self) -> &CMatrix<T> {
        &self.h
    }

    pub fn w(&self) -> &CMatrix<T> {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `H - z W`.
    pub fn pencil(&self, z: Complex<T>) -> CMatrix<T> {
        &self.h - self.w.map(|x| x * z)
    }

    /// Same layer with `H` replaced by its adjoint.
    pub fn adjoint_h(&self) -> Self {
        Self {
            thickness: self.thickness,
            h: self.h.adjoint(),
            w: self.w.clone(),
        }
    }
}

/// An ordered, non-empty list of layers whose thicknesses sum to the period.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredCoefficients<T: Real> {
    period: T,
    layers: Vec<Layer<T>>,
    starts: Vec<T>,
}

impl<T: Real> LayeredCoefficients<T> {
    /// Period taken as the sum of thicknesses.
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        let period = layers
            .iter()
            .map(|l| l.thickness)
            .fold(T::zero(), |a, b| a + b);
        Self::with_period(period, layers)
    }

    /// Checks that thicknesses sum to `period` within `1e-12 * period`.
    pub fn with_period(period: T, layers: Vec<Layer<T>>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::InvalidLayer("at least one layer is required".into()));
        };
        let n = first.dim();
        if let Some((k, l)) = layers.iter().enumerate().find(|(_, l)| l.dim() != n) {
            return Err(Error::ShapeMismatch(format!(
                "layer {k} has dimension {}, layer 0 has {n}",
                l.dim()
            )));
        }
        let sum = layers
            .iter()
            .map(|l| l.thickness)
            .fold(T::zero(), |a, b| a + b);
        if !(period.is_finite() && period > T::zero())
            || (sum - period).abs() > T::tolerance(1e-12) * period
        {
            return Err(Error::PeriodMismatch {
                sum: sum.as_f64(),
                period: period.as_f64(),
            });
        }
        let mut starts = Vec::with_capacity(layers.len());
        let mut acc = T::zero();
        for l in &layers {
            starts.push(acc);
            acc += l.thickness;
        }
        Ok(Self {
            period,
            layers,
            starts,
        })
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Start of each layer within `[0, d)`.
    pub fn starts(&self) -> &[T] {
        &self.starts
    }

    /// Layer index containing `t`, using `t mod d` and half-open layers.
    pub fn layer_at(&self, t: T) -> usize {
        let s = self.reduce_time(t);
        match self.starts.iter().rposition(|&start| start <= s) {
            Some(k) => k,
            None => 0,
        }
    }

    /// `t mod d` in `[0, d)`.
    pub fn reduce_time(&self, t: T) -> T {
        let d = self.period;
        let mut s = t - (t / d).floor() * d;
        if s >= d || s < T::zero() {
            s = T::zero();
        }
        s
    }

    /// Same stack with every `H` replaced by `H*`.
    pub fn adjoint_h(&self) -> Self {
        Self {
            period: self.period,
            layers: self.layers.iter().map(Layer::adjoint_h).collect(),
            starts: self.starts.clone(),
        }
    }

    /// Per-layer Hermiticity of `H` and positive definiteness of `W`.
    pub fn validate(&self, tol: &Tolerances<T>) -> ValidationReport<T> {
        let layers: Vec<LayerValidation<T>> = self
            .layers
            .iter()
            .enumerate()
            .map(|(index, layer)| validate_layer(index, layer, tol))
            .collect();
        let passed = layers.iter().all(|l| l.passed());
        ValidationReport { layers, passed }
    }

    /// Partitioned blocks of `V*(H - zW)V` and `V*WV` for every layer.
    pub fn shift_pencil(
        &self,
        splitting: &CanonicalSplitting<T>,
        z: Complex<T>,
    ) -> Result<BlockPencil<T>> {
        if splitting.dim() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "splitting has dimension {}, coefficients {}",
                splitting.dim(),
                self.dim()
            )));
        }
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                Ok(PencilLayer {
                    thickness: layer.thickness,
                    a: splitting.partition(&layer.pencil(z))?,
                    w: splitting.partition(&layer.w)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockPencil { z, layers })
    }

    /// `integral_0^d <W(t) f(t), f(t)> dt`, computed exactly per layer.
    pub fn weighted_norm_period(&self, f: &PeriodFunction<T>) -> Result<T> {
        if f.pieces.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "function has {} pieces, stack has {} layers",
                f.pieces.len(),
                self.layers.len()
            )));
        }
        let mut total = T::zero();
        for (k, (layer, piece)) in self.layers.iter().zip(&f.pieces).enumerate() {
            let a = self.starts[k];
            let b = a + layer.thickness;
            let (coeff, rate) = piece.coefficients();
            if coeff.len() != self.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "piece {k} has length {}, expected {}",
                    coeff.len(),
                    self.dim()
                )));
            }
            let quad = coeff.dotc(&(&layer.w * coeff)).re;
            total += quad * exp_weight_integral(rate.re, a, b);
        }
        Ok(total)
    }
}

/// `integral_a^b exp(2 r t) dt`, stable for small `r`.
fn exp_weight_integral<T: Real>(r: T, a: T, b: T) -> T {
    let two_r = r + r;
    if two_r == T::zero() {
        return b - a;
    }
    (two_r * a).exp() * (two_r * (b - a)).exp_m1() / two_r
}

fn validate_layer<T: Real>(index: usize, layer: &Layer<T>, tol: &Tolerances<T>) -> LayerValidation<T> {
    let scale_h = T::one().max(max_abs(&layer.h));
    let scale_w = T::one().max(max_abs(&layer.w));
    let h_defect = linalg::hermitian_defect(&layer.h);
    let w_defect = linalg::hermitian_defect(&layer.w);
    let (w_min_eigenvalue, witness) = match linalg::hermitian_eigen(&layer.w) {
        Ok((vals, vecs)) => (vals[0], Some(vecs.column(0).into_owned())),
        Err(_) => (T::nan(), None),
    };
    let w_sigma_max = linalg::norm2(&layer.w);
    let w_cholesky = linalg::cholesky_succeeds(&layer.w);
    let w_positive_definite = w_defect <= tol.structure * scale_w
        && w_cholesky
        && w_min_eigenvalue > tol.singular * w_sigma_max;
    LayerValidation {
        index,
        h_hermitian_defect: h_defect,
        h_hermitian: h_defect <= tol.structure * scale_h,
        w_hermitian_defect: w_defect,
        w_min_eigenvalue,
        w_positive_definite,
        w_witness: if w_positive_definite { None } else { witness },
    }
}

/// Outcome of [`LayeredCoefficients::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport<T: Real> {
    pub layers: Vec<LayerValidation<T>>,
    pub passed: bool,
}

impl<T: Real> ValidationReport<T> {
    pub fn h_hermitian(&self) -> bool {
        self.layers.iter().all(|l| l.h_hermitian)
    }

    pub fn w_positive_definite(&self) -> bool {
        self.layers.iter().all(|l| l.w_positive_definite)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerValidation<T: Real> {
    pub index: usize,
    pub h_hermitian_defect: T,
    pub h_hermitian: bool,
    pub w_hermitian_defect: T,
    pub w_min_eigenvalue: T,
    pub w_positive_definite: bool,
    /// Eigenvector of the smallest eigenvalue of `W` when the layer fails.
    pub w_witness: Option<CVector<T>>,
}

impl<T: Real> LayerValidation<T> {
    pub fn passed(&self) -> bool {
        self.h_hermitian && self.w_positive_definite
    }
}

/// Per-layer blocks of the shifted pencil `V*(H - zW)V` and of `V*WV`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPencil<T: Real> {
    pub z: Complex<T>,
    pub layers: Vec<PencilLayer<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PencilLayer<T: Real> {
    pub thickness: T,
    pub a: BlockMatrix<T>,
    pub w: BlockMatrix<T>,
}

/// Supported closed-form function classes on one layer. Time is measured
/// within the period, `t mod d`.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerFunction<T: Real> {
    Constant(CVector<T>),
    /// `coeff * exp(rate * t)`.
    Exponential { coeff: CVector<T>, rate: Complex<T> },
}

impl<T: Real> LayerFunction<T> {
    pub fn coefficients(&self) -> (&CVector<T>, Complex<T>) {
        match self {
            Self::Constant(c) => (c, re(T::zero())),
            Self::Exponential { coeff, rate } => (coeff, *rate),
        }
    }

    pub fn eval(&self, t: T) -> CVector<T> {
        let (c, rate) = self.coefficients();
        let e = (rate * re(t)).exp();
        c.map(|z| z * e)
    }
}

/// A function on one period, given piecewise per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodFunction<T: Real> {
    pub pieces: Vec<LayerFunction<T>>,
}

impl<T: Real> PeriodFunction<T> {
    pub fn new(pieces: Vec<LayerFunction<T>>) -> Self {
        Self { pieces }
    }

    /// The same piece on every layer.
    pub fn uniform(piece: LayerFunction<T>, layers: usize) -> Self {
        Self {
            pieces: vec![piece; layers],
        }
    }

    pub fn zero(n: usize, layers: usize) -> Self {
        Self::uniform(LayerFunction::Constant(CVector::zeros(n)), layers)
    }

    /// Builds a function from a textual class name, rejecting unknown ones.
    pub fn piece_from_kind(kind: &str, coeff: CVector<T>, rate: Option<Complex<T>>) -> Result<LayerFunction<T>> {
        match (kind, rate) {
            ("constant", None) => Ok(LayerFunction::Constant(coeff)),
            ("exponential", Some(rate)) => Ok(LayerFunction::Exponential { coeff, rate }),
            ("exponential", None) => Err(Error::UnsupportedFunctionClass(
                "exponential piece needs a rate".into(),
            )),
            (other, _) => Err(Error::UnsupportedFunctionClass(format!(
                "'{other}' (supported: constant, exponential)"
            ))),
        }
    }

    /// Value at `t` (reduced modulo the period of `coeffs`).
    pub fn eval(&self, coeffs: &LayeredCoefficients<T>, t: T) -> CVector<T> {
        let k = coeffs.layer_at(t);
        self.pieces[k].eval(coeffs.reduce_time(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{build_splitting, SkewHermitian};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn example_stack() -> (LayeredCoefficients<f64>, CanonicalSplitting<f64>) {
        let tol = Tolerances::default();
        let j = CMatrix::<f64>::from_row_slice(2, 2, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        let s = build_splitting(&SkewHermitian::new(j, &tol).unwrap(), &tol).unwrap();
        let layer = Layer::new(1.0, linalg::zeros(2, 2), linalg::identity(2)).unwrap();
        (LayeredCoefficients::new(vec![layer]).unwrap(), s)
    }

    #[test]
    fn example_validates() {
        let (coeffs, _) = example_stack();
        assert!(coeffs.validate(&Tolerances::default()).passed);
    }

    #[test]
    fn singular_w_fails_with_witness() {
        let w = CMatrix::<f64>::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        let layer = Layer::new(1.0, linalg::zeros(2, 2), w.clone()).unwrap();
        let coeffs = LayeredCoefficients::new(vec![layer]).unwrap();
        let report = coeffs.validate(&Tolerances::default());
        assert!(!report.passed);
        let witness = report.layers[0].w_witness.clone().unwrap();
        assert!(linalg::vec_max_abs(&(&w * witness)) < 1e-14);
    }

    #[test]
    fn example_pencil_blocks() {
        let (coeffs, s) = example_stack();
        let lam = c(0.7, 0.0);
        let p = coeffs.shift_pencil(&s, lam).unwrap();
        let a = &p.layers[0].a;
        assert!((a.b11[(0, 0)] - (-lam)).norm() < 1e-15);
        assert!((a.b22[(0, 0)] - (-lam)).norm() < 1e-15);
        assert_eq!(a.b12[(0, 0)], c(0., 0.));
        assert_eq!(a.b21[(0, 0)], c(0., 0.));
    }

    #[test]
    fn layer_lookup_half_open() {
        let mk = |t: f64| Layer::new(t, linalg::zeros(1, 1), linalg::identity(1)).unwrap();
        let coeffs = LayeredCoefficients::new(vec![mk(0.25), mk(0.75)]).unwrap();
        assert_eq!(coeffs.layer_at(0.0), 0);
        assert_eq!(coeffs.layer_at(0.25), 1);
        assert_eq!(coeffs.layer_at(0.9), 1);
        assert_eq!(coeffs.layer_at(1.0), 0);
        assert_eq!(coeffs.layer_at(-0.1), 1);
        assert_eq!(coeffs.layer_at(2.3), 1);
    }

    #[test]
    fn period_mismatch_rejected() {
        let l = Layer::new(0.5, linalg::zeros(1, 1), linalg::identity(1)).unwrap();
        assert!(matches!(
            LayeredCoefficients::with_period(1.0, vec![l]),
            Err(Error::PeriodMismatch { .. })
        ));
        assert!(Layer::new(0.0, linalg::zeros(1, 1), linalg::identity(1)).is_err());
    }

    #[test]
    fn weighted_norms() {
        let (coeffs, _) = example_stack();
        let e1 = CVector::<f64>::from_vec(vec![c(1., 0.), c(0., 0.)]);
        let f = PeriodFunction::uniform(LayerFunction::Constant(e1.clone()), 1);
        assert!((coeffs.weighted_norm_period(&f).unwrap() - 1.0).abs() < 1e-15);
        let osc = PeriodFunction::uniform(
            LayerFunction::Exponential {
                coeff: e1,
                rate: c(0., -2.3),
            },
            1,
        );
        assert!((coeffs.weighted_norm_period(&osc).unwrap() - 1.0).abs() < 1e-15);
        let zero = PeriodFunction::zero(2, 1);
        assert_eq!(coeffs.weighted_norm_period(&zero).unwrap(), 0.0);
    }

    #[test]
    fn growing_exponential_norm() {
        // |e^{t}|^2 on [0, 1] integrates to (e^2 - 1) / 2.
        let layer = Layer::new(1.0, linalg::zeros(1, 1), linalg::identity(1)).unwrap();
        let coeffs = LayeredCoefficients::new(vec![layer]).unwrap();
        let f = PeriodFunction::uniform(
            LayerFunction::Exponential {
                coeff: CVector::<f64>::from_vec(vec![c(1., 0.)]),
                rate: c(1., 5.),
            },
            1,
        );
        let expected = ((2.0f64).exp() - 1.0) / 2.0;
        assert!((coeffs.weighted_norm_period(&f).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn unknown_function_class() {
        let v = CVector::<f64>::zeros(1);
        assert!(matches!(
            PeriodFunction::piece_from_kind("spline", v, None),
            Err(Error::UnsupportedFunctionClass(_))
        ));
    }
}
