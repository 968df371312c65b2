//! Exact propagation of the reduced system `f1' = A_k f1 + B_k V* g` through
//! piecewise-constant layers: layer and interval transfer matrices, the
//! monodromy over one period, and the initial value problem with per-layer
//! constant or exponential sources.

mod expm;
pub mod oracle;

pub use expm::expm;

use nalgebra::ComplexField;
use num_complex::Complex;

use crate::canonical::CanonicalSplitting;
use crate::coefficients::{LayerFunction, LayeredCoefficients, PeriodFunction};
use crate::error::{Error, Result};
use crate::linalg::{self, identity};
use crate::reduction::{dae_residual, reduce_at, ReducedGenerator};
use crate::scalar::{re, CMatrix, CVector, Real, Tolerances};

/// A stretch of time inside a single layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment<T> {
    pub layer: usize,
    pub start: T,
    pub end: T,
    /// `start mod d`, the time within the period where the segment begins.
    pub local_start: T,
}

/// Splits `[t0, t1]` at layer boundaries of the periodic stack described by
/// `thicknesses`.
pub fn segments<T: Real>(thicknesses: &[T], t0: T, t1: T) -> Vec<Segment<T>> {
    let mut out = Vec::new();
    if thicknesses.is_empty() || !(t1 > t0) {
        return out;
    }
    let mut starts = Vec::with_capacity(thicknesses.len());
    let mut acc = T::zero();
    for &h in thicknesses {
        starts.push(acc);
        acc += h;
    }
    let period = acc;
    let mut p = (t0 / period).floor();
    let mut tau = t0 - p * period;
    if tau >= period {
        p += T::one();
        tau = T::zero();
    }
    let mut k = starts.iter().rposition(|&s| s <= tau).unwrap_or(0);
    let mut t = t0;
    loop {
        let layer_end = if k + 1 == starts.len() {
            (p + T::one()) * period
        } else {
            p * period + starts[k + 1]
        };
        let end = if layer_end < t1 { layer_end } else { t1 };
        if end > t {
            let local = t - p * period;
            out.push(Segment {
                layer: k,
                start: t,
                end,
                local_start: if local > T::zero() { local } else { T::zero() },
            });
            t = end;
        }
        if t >= t1 {
            break;
        }
        k += 1;
        if k == starts.len() {
            k = 0;
            p += T::one();
        }
    }
    out
}

fn thicknesses<T: Real>(gen: &ReducedGenerator<T>) -> Vec<T> {
    gen.layers.iter().map(|l| l.thickness).collect()
}

fn scale<T: Real>(m: &CMatrix<T>, s: T) -> CMatrix<T> {
    m * re(s)
}

/// `exp(dt A_k)` for `0 < dt <= thickness_k`.
pub fn layer_transfer<T: Real>(gen: &ReducedGenerator<T>, k: usize, dt: T) -> Result<CMatrix<T>> {
    let layer = gen
        .layers
        .get(k)
        .ok_or_else(|| Error::InvalidInterval(format!("layer {k} does not exist")))?;
    let slack = layer.thickness * T::tolerance(1e-12);
    if !(dt > T::zero()) || dt > layer.thickness + slack {
        return Err(Error::InvalidInterval(format!(
            "step {dt} outside (0, {}] on layer {k}",
            layer.thickness
        )));
    }
    expm(&scale(&layer.generator, dt))
}

/// Fundamental solution `Phi(t_start -> t_end)` of the homogeneous reduced
/// system.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix<T: Real> {
    pub lambda: Complex<T>,
    pub interval: (T, T),
    pub phi: CMatrix<T>,
}

pub fn transfer<T: Real>(gen: &ReducedGenerator<T>, t_start: T, t_end: T) -> Result<TransferMatrix<T>> {
    if !t_start.is_finite() || !t_end.is_finite() || t_end < t_start {
        return Err(Error::InvalidInterval(format!("[{t_start}, {t_end}]")));
    }
    let mut phi = identity::<T>(gen.n1);
    for seg in segments(&thicknesses(gen), t_start, t_end) {
        let step = expm(&scale(&gen.layers[seg.layer].generator, seg.end - seg.start))?;
        phi = step * phi;
    }
    Ok(TransferMatrix {
        lambda: gen.lambda,
        interval: (t_start, t_end),
        phi,
    })
}

/// Transfer over one full period `[0, d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monodromy<T: Real> {
    pub lambda: Complex<T>,
    pub m: CMatrix<T>,
    /// Spectral condition number `sigma_max / sigma_min`.
    pub condition: T,
}

pub fn monodromy<T: Real>(gen: &ReducedGenerator<T>) -> Result<Monodromy<T>> {
    let mut m = identity::<T>(gen.n1);
    for layer in &gen.layers {
        m = expm(&scale(&layer.generator, layer.thickness))? * m;
    }
    let sv = linalg::singular_values(&m);
    let condition = match (sv.iter().copied().next(), sv.iter().copied().last()) {
        (Some(hi), Some(lo)) if lo > T::zero() => hi / lo,
        (Some(_), Some(_)) => T::infinity(),
        _ => T::one(),
    };
    Ok(Monodromy {
        lambda: gen.lambda,
        m,
        condition,
    })
}

/// Reduces the stack at `lambda` and returns its monodromy.
pub fn monodromy_at<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    lambda: Complex<T>,
    tol: &Tolerances<T>,
) -> Result<Monodromy<T>> {
    monodromy(&reduce_at(coeffs, splitting, lambda, tol)?)
}

/// `integral_0^d tr A(t) dt`; `det M` equals its exponential.
pub fn trace_integral<T: Real>(gen: &ReducedGenerator<T>) -> Complex<T> {
    gen.layers
        .iter()
        .fold(re(T::zero()), |acc, l| acc + l.generator.trace() * re(l.thickness))
}

/// The source `V* g` in splitting coordinates.
pub fn rotate_source<T: Real>(splitting: &CanonicalSplitting<T>, g: &PeriodFunction<T>) -> PeriodFunction<T> {
    let vt = splitting.v().adjoint();
    PeriodFunction::new(
        g.pieces
            .iter()
            .map(|piece| match piece {
                LayerFunction::Constant(c) => LayerFunction::Constant(&vt * c),
                LayerFunction::Exponential { coeff, rate } => LayerFunction::Exponential {
                    coeff: &vt * coeff,
                    rate: *rate,
                },
            })
            .collect(),
    )
}

/// One evaluated point of an IVP solution.
#[derive(Clone, Debug, PartialEq)]
pub struct IvpPoint<T: Real> {
    pub t: T,
    pub layer: usize,
    pub f1: CVector<T>,
    pub f1_dot: CVector<T>,
    pub f2: CVector<T>,
    /// Assembled `f = V [f1; f2]`.
    pub f: CVector<T>,
    /// Source `g(t)` in original coordinates, if any.
    pub g: Option<CVector<T>>,
}

/// Solution of `J f' + (H - zW) f = W g`, `(J f)(t0) = f0` on `[t0, t1]`.
#[derive(Clone, Debug)]
pub struct IvpSolution<T: Real> {
    pub generator: ReducedGenerator<T>,
    v: CMatrix<T>,
    source: Option<PeriodFunction<T>>,
    source_rot: Option<PeriodFunction<T>>,
    pub t0: T,
    pub t1: T,
    checkpoints: Vec<(Segment<T>, CVector<T>)>,
    f1_start: CVector<T>,
}

/// Advances `f1` by `dt` inside one layer, starting at local time `s0`.
fn advance<T: Real>(
    gen: &ReducedGenerator<T>,
    k: usize,
    piece: Option<&LayerFunction<T>>,
    f1: &CVector<T>,
    s0: T,
    dt: T,
) -> Result<CVector<T>> {
    let layer = &gen.layers[k];
    let n1 = gen.n1;
    let Some(piece) = piece else {
        return Ok(expm(&scale(&layer.generator, dt))? * f1);
    };
    let (coeff, rate) = piece.coefficients();
    let mut aug = linalg::zeros::<T>(n1 + 1, n1 + 1);
    aug.view_mut((0, 0), (n1, n1)).copy_from(&layer.generator);
    aug.view_mut((0, n1), (n1, 1)).copy_from(&(&layer.forcing * coeff));
    aug[(n1, n1)] = rate;
    let mut y = CVector::<T>::zeros(n1 + 1);
    y.rows_mut(0, n1).copy_from(f1);
    y[n1] = (rate * re(s0)).exp();
    let y = expm(&scale(&aug, dt))? * y;
    Ok(y.rows(0, n1).into_owned())
}

/// Solves the initial value problem by exact per-layer variation of
/// constants. `f0` must lie in `ran J` up to `1e-10 |f0|`.
#[allow(clippy::too_many_arguments)]
pub fn solve_ivp<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    z: Complex<T>,
    source: Option<&PeriodFunction<T>>,
    t0: T,
    t1: T,
    f0: &CVector<T>,
    tol: &Tolerances<T>,
) -> Result<IvpSolution<T>> {
    let n = coeffs.dim();
    if f0.len() != n {
        return Err(Error::ShapeMismatch(format!("f0 has length {}, expected {n}", f0.len())));
    }
    if !t0.is_finite() || !t1.is_finite() || t1 < t0 {
        return Err(Error::InvalidInterval(format!("[{t0}, {t1}]")));
    }
    if let Some(g) = source {
        if g.pieces.len() != coeffs.len() {
            return Err(Error::UnsupportedSource(format!(
                "source has {} pieces, stack has {} layers",
                g.pieces.len(),
                coeffs.len()
            )));
        }
        if let Some(bad) = g.pieces.iter().position(|p| p.coefficients().0.len() != n) {
            return Err(Error::UnsupportedSource(format!("piece {bad} does not have length {n}")));
        }
    }
    let norm = linalg::vec_norm(f0);
    let residual = linalg::vec_norm(&(f0 - splitting.projection() * f0));
    if residual > T::tolerance(1e-10) * norm {
        return Err(Error::InitialNotInRange {
            residual: residual.as_f64(),
            norm: norm.as_f64(),
        });
    }
    let generator = reduce_at(coeffs, splitting, z, tol)?;
    let (y1, _) = splitting.project_tangential(f0)?;
    let f1_start = splitting.j11_inv() * y1;
    let source_rot = source.map(|g| rotate_source(splitting, g));

    let mut checkpoints = Vec::new();
    let mut f1 = f1_start.clone();
    for seg in segments(&thicknesses(&generator), t0, t1) {
        let piece = source_rot.as_ref().map(|g| &g.pieces[seg.layer]);
        let next = advance(&generator, seg.layer, piece, &f1, seg.local_start, seg.end - seg.start)?;
        checkpoints.push((seg, f1));
        f1 = next;
    }
    Ok(IvpSolution {
        generator,
        v: splitting.v().clone(),
        source: source.cloned(),
        source_rot,
        t0,
        t1,
        checkpoints,
        f1_start,
    })
}

impl<T: Real> IvpSolution<T> {
    pub fn segments(&self) -> impl Iterator<Item = &Segment<T>> {
        self.checkpoints.iter().map(|(s, _)| s)
    }

    /// Evaluates the solution at `t` in `[t0, t1]`. At a layer boundary the
    /// layer to the left is used, except at `t0`.
    pub fn eval(&self, t: T) -> Result<IvpPoint<T>> {
        if !(t >= self.t0 && t <= self.t1) {
            return Err(Error::InvalidInterval(format!(
                "t = {t} outside [{}, {}]",
                self.t0, self.t1
            )));
        }
        let (seg, f1) = match self.checkpoints.iter().position(|(s, _)| t <= s.end) {
            Some(i) => {
                let (seg, start) = &self.checkpoints[i];
                let dt = t - seg.start;
                let piece = self.source_rot.as_ref().map(|g| &g.pieces[seg.layer]);
                let f1 = if dt > T::zero() {
                    advance(&self.generator, seg.layer, piece, start, seg.local_start, dt)?
                } else {
                    start.clone()
                };
                (*seg, f1)
            }
            None => {
                // Degenerate interval t0 == t1.
                let local = t - (t / self.generator.period).floor() * self.generator.period;
                let k = segments(&thicknesses(&self.generator), t, t + self.generator.period)
                    .first()
                    .map_or(0, |s| s.layer);
                (
                    Segment {
                        layer: k,
                        start: t,
                        end: t,
                        local_start: local,
                    },
                    self.f1_start.clone(),
                )
            }
        };
        let k = seg.layer;
        let s = seg.local_start + (t - seg.start);
        let g_rot = self.source_rot.as_ref().map(|g| g.pieces[k].eval(s));
        let g = self.source.as_ref().map(|g| g.pieces[k].eval(s));
        let f1_dot = self.generator.derivative(k, &f1, g_rot.as_ref());
        let f2 = self.generator.normal_part(k, &f1, g_rot.as_ref());
        let mut stacked = CVector::<T>::zeros(f1.len() + f2.len());
        stacked.rows_mut(0, f1.len()).copy_from(&f1);
        stacked.rows_mut(f1.len(), f2.len()).copy_from(&f2);
        Ok(IvpPoint {
            t,
            layer: k,
            f: &self.v * stacked,
            f1,
            f1_dot,
            f2,
            g,
        })
    }

    /// `count` equally spaced interior points of every segment.
    pub fn interior_samples(&self, count: usize) -> Result<Vec<IvpPoint<T>>> {
        let mut out = Vec::with_capacity(count * self.checkpoints.len());
        for (seg, _) in &self.checkpoints {
            let width = seg.end - seg.start;
            for i in 0..count {
                let frac = T::lit((i as f64 + 0.5) / count as f64);
                out.push(self.eval(seg.start + width * frac)?);
            }
        }
        Ok(out)
    }

    /// `count >= 2` equally spaced points including both endpoints.
    pub fn uniform_samples(&self, count: usize) -> Result<Vec<IvpPoint<T>>> {
        let count = count.max(2);
        (0..count)
            .map(|i| {
                let frac = T::lit(i as f64 / (count - 1) as f64);
                let t = if i + 1 == count {
                    self.t1
                } else {
                    self.t0 + (self.t1 - self.t0) * frac
                };
                self.eval(t)
            })
            .collect()
    }

    /// `|J f' + (H - zW) f - W g|_2` at an evaluated point.
    pub fn residual(
        &self,
        coeffs: &LayeredCoefficients<T>,
        splitting: &CanonicalSplitting<T>,
        point: &IvpPoint<T>,
    ) -> Result<T> {
        let layer = &coeffs.layers()[point.layer];
        let r = dae_residual(
            splitting,
            &layer.pencil(self.generator.lambda),
            layer.w(),
            &point.f,
            &point.f1_dot,
            point.g.as_ref(),
        )?;
        Ok(linalg::vec_norm(&r))
    }
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

    fn example(thickness: &[f64]) -> (LayeredCoefficients<f64>, CanonicalSplitting<f64>) {
        let tol = Tolerances::default();
        let j = CMatrix::<f64>::from_row_slice(2, 2, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        let s = build_splitting(&SkewHermitian::new(j, &tol).unwrap(), &tol).unwrap();
        let layers = thickness
            .iter()
            .map(|&d| Layer::new(d, linalg::zeros(2, 2), linalg::identity(2)).unwrap())
            .collect();
        (LayeredCoefficients::new(layers).unwrap(), s)
    }

    #[test]
    fn segments_tile_interval() {
        let segs = segments(&[0.25, 0.75], 0.1, 2.3);
        let layers: Vec<usize> = segs.iter().map(|s| s.layer).collect();
        assert_eq!(layers, vec![0, 1, 0, 1, 0, 1]);
        assert_eq!(segs[0].start, 0.1);
        assert_eq!(segs.last().unwrap().end, 2.3);
        for w in segs.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert!((segs[2].local_start).abs() < 1e-15);
        assert!(segments(&[1.0], 0.5, 0.5).is_empty());
    }

    #[test]
    fn example_monodromy_is_phase() {
        let (coeffs, s) = example(&[0.4, 0.6]);
        let tol = Tolerances::default();
        for lam in [0.5, -1.3, 4.0] {
            let m = monodromy_at(&coeffs, &s, c(lam, 0.), &tol).unwrap();
            assert!((m.m[(0, 0)] - c(0., -lam).exp()).norm() < 1e-13);
            assert!((m.condition - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_composes() {
        let (coeffs, s) = example(&[0.3, 0.7]);
        let gen = reduce_at(&coeffs, &s, c(1.7, 0.), &Tolerances::default()).unwrap();
        let a = transfer(&gen, 0.0, 0.45).unwrap().phi;
        let b = transfer(&gen, 0.45, 1.9).unwrap().phi;
        let ab = transfer(&gen, 0.0, 1.9).unwrap().phi;
        assert!(linalg::max_abs(&(b * a - ab)) < 1e-13);
        assert!(transfer(&gen, 1.0, 0.0).is_err());
        assert!(layer_transfer(&gen, 0, 0.5).is_err());
        assert!(layer_transfer(&gen, 0, 0.3).is_ok());
    }

    #[test]
    fn example_ivp_phase_and_zero_normal_part() {
        let (coeffs, s) = example(&[1.0]);
        let tol = Tolerances::default();
        let lam = 2.5;
        let f0 = CVector::<f64>::from_vec(vec![c(0., 1.), c(0., 0.)]);
        let sol = solve_ivp(&coeffs, &s, c(lam, 0.), None, 0.2, 1.7, &f0, &tol).unwrap();
        for p in sol.uniform_samples(11).unwrap() {
            let expected = c(0., -lam * (p.t - 0.2)).exp();
            assert!((p.f[0] - expected).norm() < 1e-13);
            assert_eq!(p.f[1], c(0., 0.));
            assert!(sol.residual(&coeffs, &s, &p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn ivp_rejects_initial_outside_range() {
        let (coeffs, s) = example(&[1.0]);
        let f0 = CVector::<f64>::from_vec(vec![c(0., 0.), c(1., 0.)]);
        assert!(matches!(
            solve_ivp(&coeffs, &s, c(1., 0.), None, 0.0, 1.0, &f0, &Tolerances::default()),
            Err(Error::InitialNotInRange { .. })
        ));
    }

    #[test]
    fn ivp_zero_data_gives_zero() {
        let (coeffs, s) = example(&[0.5, 0.5]);
        let f0 = CVector::<f64>::zeros(2);
        let sol = solve_ivp(&coeffs, &s, c(0.7, 0.1), None, 0.0, 2.0, &f0, &Tolerances::default()).unwrap();
        for p in sol.uniform_samples(9).unwrap() {
            assert_eq!(linalg::vec_max_abs(&p.f), 0.0);
        }
    }

    #[test]
    fn ivp_with_sources_has_small_residual() {
        let (coeffs, s) = example(&[0.5, 0.5]);
        let tol = Tolerances::default();
        let g = PeriodFunction::new(vec![
            LayerFunction::Constant(CVector::from_vec(vec![c(1., 0.), c(0., 2.)])),
            LayerFunction::Exponential {
                coeff: CVector::from_vec(vec![c(0.5, 0.5), c(-1., 0.)]),
                rate: c(-0.3, 2.0),
            },
        ]);
        let f0 = CVector::<f64>::from_vec(vec![c(1., 0.), c(0., 0.)]);
        let sol = solve_ivp(&coeffs, &s, c(1.0, 0.5), Some(&g), 0.0, 2.0, &f0, &tol).unwrap();
        for p in sol.interior_samples(10).unwrap() {
            assert!(sol.residual(&coeffs, &s, &p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn liouville_on_example() {
        let (coeffs, s) = example(&[0.2, 0.8]);
        let gen = reduce_at(&coeffs, &s, c(0.9, 0.4), &Tolerances::default()).unwrap();
        let m = monodromy(&gen).unwrap();
        let det = linalg::determinant(&m.m);
        assert!((det - trace_integral(&gen).exp()).norm() < 1e-13);
    }
}
