//! Time-harmonic Maxwell equations in a 1D layered medium as a periodic DAE
//! `J f' + H f = λ W f` with `f = [E; H]`, `λ = ω/c` and units where
//! `c = 1`.
//!
//! The splitting uses the fixed permutation that orders the field as
//! `(E1, E2, H1, H2, E3, H3)`, so the tangential components are the
//! differential unknowns and the normal components the algebraic ones.

use num_complex::Complex;

use crate::canonical::{CanonicalSplitting, SkewHermitian};
use crate::coefficients::{Layer, LayeredCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, hermitian_eigen};
use crate::scalar::{imag_unit, re, CMatrix, Real, Tolerances};
use crate::spectral::{band_scan, BandScan};

fn real_matrix<T: Real>(rows: usize, cols: usize, entries: &[f64]) -> CMatrix<T> {
    CMatrix::from_fn(rows, cols, |i, j| re(T::lit(entries[i * cols + j])))
}

/// `e3×`, the cross product with the stacking direction.
pub fn e3_cross<T: Real>() -> CMatrix<T> {
    real_matrix(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 0.])
}

/// `k⊥×` for the transverse wavevector `(k1, k2, 0)`.
pub fn k_perp_cross<T: Real>(k1: T, k2: T) -> CMatrix<T> {
    let z = re(T::zero());
    CMatrix::from_row_slice(3, 3, &[z, z, re(k2), z, z, re(-k1), re(-k2), re(k1), z])
}

fn block2<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, c: &CMatrix<T>, d: &CMatrix<T>) -> CMatrix<T> {
    let n = a.nrows();
    let mut m = linalg::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

/// `J = i^{-1} [[0, -e3×], [e3×, 0]]`.
pub fn maxwell_j<T: Real>() -> CMatrix<T> {
    let e3 = e3_cross::<T>();
    let zero = linalg::zeros(3, 3);
    block2(&zero, &(-&e3), &e3, &zero) * (-imag_unit::<T>())
}

/// `[[0, k⊥×], [-k⊥×, 0]]`.
pub fn maxwell_h<T: Real>(k1: T, k2: T) -> CMatrix<T> {
    let k = k_perp_cross(k1, k2);
    let zero = linalg::zeros(3, 3);
    block2(&zero, &k, &(-&k), &zero)
}

/// Permutation with columns `e1, e2, e4, e5, e3, e6`.
pub fn maxwell_v<T: Real>() -> CMatrix<T> {
    let cols = [0usize, 1, 3, 4, 2, 5];
    CMatrix::from_fn(6, 6, |i, j| if cols[j] == i { re(T::one()) } else { re(T::zero()) })
}

/// Constitutive tensor `M = [[ε, ξ], [ξ*, μ]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialTensor<T: Real> {
    pub eps: CMatrix<T>,
    pub xi: CMatrix<T>,
    pub mu: CMatrix<T>,
}

impl<T: Real> MaterialTensor<T> {
    pub fn new(eps: CMatrix<T>, mu: CMatrix<T>, xi: Option<CMatrix<T>>) -> Result<Self> {
        let xi = xi.unwrap_or_else(|| linalg::zeros(3, 3));
        for (name, m) in [("eps", &eps), ("mu", &mu), ("xi", &xi)] {
            if m.nrows() != 3 || m.ncols() != 3 {
                return Err(Error::InvalidTensor(format!(
                    "{name} is {}x{}, expected 3x3",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !linalg::is_finite(m) {
                return Err(Error::InvalidTensor(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self { eps, xi, mu })
    }

    /// `ε = eps I3`, `μ = mu I3`, `ξ = 0`.
    pub fn isotropic(eps: T, mu: T) -> Self {
        let i3 = linalg::identity::<T>(3);
        Self {
            eps: &i3 * re(eps),
            xi: linalg::zeros(3, 3),
            mu: &i3 * re(mu),
        }
    }

    pub fn vacuum() -> Self {
        Self::isotropic(T::one(), T::one())
    }

    /// `ζ = ξ*`.
    pub fn zeta(&self) -> CMatrix<T> {
        self.xi.adjoint()
    }

    pub fn assembled(&self) -> CMatrix<T> {
        block2(&self.eps, &self.xi, &self.zeta(), &self.mu)
    }

    fn has_coupling(&self) -> bool {
        linalg::max_abs(&self.xi) > T::zero()
    }
}

/// Which canonical problem to build from the layered medium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaxwellMode<T> {
    /// `λ = ω/c`, `H` from `k⊥`, `W = M`.
    Eigenfrequency,
    /// `ε(λ) = ε0 + λ ε1`, `μ(λ) = μ0 + λ μ1` at fixed `ω`.
    Disorder { omega: T },
    /// `ε(γ) = Re ε + iγ Im ε` (same for `μ`) at fixed `ω`, `λ = iγ`.
    Lossy { omega: T },
}

impl<T> MaxwellMode<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Eigenfrequency => "eigenfrequency",
            Self::Disorder { .. } => "disorder",
            Self::Lossy { .. } => "lossy",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxwellLayer<T: Real> {
    pub thickness: T,
    /// The material, or `(ε0, μ0)` in disorder mode.
    pub material: MaterialTensor<T>,
    /// `(ε1, μ1)` in disorder mode.
    pub perturbation: Option<MaterialTensor<T>>,
}

impl<T: Real> MaxwellLayer<T> {
    pub fn new(thickness: T, material: MaterialTensor<T>) -> Self {
        Self {
            thickness,
            material,
            perturbation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxwellProblem<T: Real> {
    pub layers: Vec<MaxwellLayer<T>>,
    /// Defaults to the sum of thicknesses.
    pub period: Option<T>,
    pub k1: T,
    pub k2: T,
    pub mode: MaxwellMode<T>,
}

impl<T: Real> MaxwellProblem<T> {
    pub fn eigenfrequency(layers: Vec<MaxwellLayer<T>>, k1: T, k2: T) -> Self {
        Self {
            layers,
            period: None,
            k1,
            k2,
            mode: MaxwellMode::Eigenfrequency,
        }
    }

    /// Two isotropic non-magnetic layers with refractive indices `na`, `nb`.
    pub fn bilayer(na: T, da: T, nb: T, db: T, k1: T, k2: T) -> Self {
        Self::eigenfrequency(
            vec![
                MaxwellLayer::new(da, MaterialTensor::isotropic(na * na, T::one())),
                MaxwellLayer::new(db, MaterialTensor::isotropic(nb * nb, T::one())),
            ],
            k1,
            k2,
        )
    }
}

/// The assembled canonical system.
#[derive(Clone, Debug)]
pub struct MaxwellSystem<T: Real> {
    pub j: SkewHermitian<T>,
    pub coeffs: LayeredCoefficients<T>,
    pub splitting: CanonicalSplitting<T>,
}

fn hermitian_parts<T: Real>(m: &CMatrix<T>) -> (CMatrix<T>, CMatrix<T>) {
    let half = re(T::lit(0.5));
    let adj = m.adjoint();
    let real_part = (m + &adj) * half;
    let imag_part = (m - &adj) * (half * (-imag_unit::<T>()));
    (real_part, imag_part)
}

fn require_hermitian<T: Real>(m: &CMatrix<T>, what: &str, layer: usize, tol: &Tolerances<T>) -> Result<()> {
    let defect = linalg::hermitian_defect(m);
    if defect > tol.structure * T::one().max(linalg::max_abs(m)) {
        return Err(Error::InvalidTensor(format!(
            "{what} on layer {layer} is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(())
}

fn require_positive<T: Real>(w: &CMatrix<T>, layer: usize, tol: &Tolerances<T>, what: &str) -> Result<()> {
    let (values, _) = hermitian_eigen(w)?;
    let min = values.first().copied().unwrap_or(T::zero());
    let max = values.last().copied().unwrap_or(T::zero());
    if !(min > tol.singular * max.abs()) || !linalg::cholesky_succeeds(w) {
        return Err(Error::DegenerateW {
            layer,
            reason: format!("{what} has smallest eigenvalue {min:e}; W must be positive definite on every layer"),
        });
    }
    Ok(())
}

/// Builds `J`, the layered `H`, `W` and the fixed splitting.
pub fn assemble<T: Real>(problem: &MaxwellProblem<T>, tol: &Tolerances<T>) -> Result<MaxwellSystem<T>> {
    if problem.layers.is_empty() {
        return Err(Error::InvalidLayer("a Maxwell stack needs at least one layer".into()));
    }
    if !problem.k1.is_finite() || !problem.k2.is_finite() {
        return Err(Error::InvalidTensor("transverse wavenumbers must be finite".into()));
    }
    let h_k = maxwell_h(problem.k1, problem.k2);
    let mut layers = Vec::with_capacity(problem.layers.len());
    for (k, layer) in problem.layers.iter().enumerate() {
        let mat = &layer.material;
        let (h, w) = match problem.mode {
            MaxwellMode::Eigenfrequency => {
                let m = mat.assembled();
                require_hermitian(&mat.eps, "eps", k, tol)?;
                require_hermitian(&mat.mu, "mu", k, tol)?;
                require_positive(&m, k, tol, "M")?;
                (h_k.clone(), m)
            }
            MaxwellMode::Disorder { omega } => {
                require_omega(omega)?;
                let pert = layer.perturbation.as_ref().ok_or_else(|| {
                    Error::InvalidTensor(format!("layer {k} needs eps1/mu1 in disorder mode"))
                })?;
                if mat.has_coupling() || pert.has_coupling() {
                    return Err(Error::InvalidTensor(format!(
                        "layer {k}: disorder mode does not support magnetoelectric coupling"
                    )));
                }
                for (name, m) in [("eps0", &mat.eps), ("mu0", &mat.mu), ("eps1", &pert.eps), ("mu1", &pert.mu)] {
                    require_hermitian(m, name, k, tol)?;
                }
                let w = block_diag(&pert.eps, &pert.mu) * re(omega);
                require_positive(&w, k, tol, "omega blkdiag(eps1, mu1)")?;
                (&h_k - block_diag(&mat.eps, &mat.mu) * re(omega), w)
            }
            MaxwellMode::Lossy { omega } => {
                require_omega(omega)?;
                if mat.has_coupling() {
                    return Err(Error::InvalidTensor(format!(
                        "layer {k}: lossy mode does not support magnetoelectric coupling"
                    )));
                }
                let (re_eps, im_eps) = hermitian_parts(&mat.eps);
                let (re_mu, im_mu) = hermitian_parts(&mat.mu);
                let w = block_diag(&im_eps, &im_mu) * re(omega);
                require_positive(&w, k, tol, "omega blkdiag(Im eps, Im mu) (lossless layer?)")?;
                (&h_k - block_diag(&re_eps, &re_mu) * re(omega), w)
            }
        };
        layers.push(Layer::new(layer.thickness, h, w)?);
    }
    let coeffs = match problem.period {
        Some(d) => LayeredCoefficients::with_period(d, layers)?,
        None => LayeredCoefficients::new(layers)?,
    };
    let j = SkewHermitian::new(maxwell_j(), tol)?;
    let splitting = CanonicalSplitting::from_basis(&j, maxwell_v(), tol)?;
    Ok(MaxwellSystem { j, coeffs, splitting })
}

fn require_omega<T: Real>(omega: T) -> Result<()> {
    if !(omega > T::zero()) || !omega.is_finite() {
        return Err(Error::InvalidTensor(format!("omega must be positive, got {omega}")));
    }
    Ok(())
}

/// Position of `|k⊥|` relative to the light lines of the stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LightCone {
    /// `|k⊥| < λ n_min`: propagating in every layer.
    Inside,
    /// `λ n_min <= |k⊥| <= λ n_max`.
    Between,
    /// `|k⊥| > λ n_max`: evanescent in every layer.
    Outside,
}

impl LightCone {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Inside => "inside",
            Self::Between => "between",
            Self::Outside => "outside",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionRow<T: Real> {
    pub lambda: T,
    pub count: Option<usize>,
    /// Bloch wavenumbers of the on-circle multipliers, in multiplier order.
    pub wavenumbers: Vec<Option<T>>,
    pub moduli: Vec<T>,
    pub k_perp: T,
    pub light_min: T,
    pub light_max: T,
    pub cone: LightCone,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionTable<T: Real> {
    pub scan: BandScan<T>,
    pub rows: Vec<DispersionRow<T>>,
    /// Bounds `sqrt(λ_min(ε) λ_min(μ))` and `sqrt(λ_max(ε) λ_max(μ))` over
    /// the layers.
    pub n_min: T,
    pub n_max: T,
}

fn index_bounds<T: Real>(problem: &MaxwellProblem<T>) -> Result<(T, T)> {
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for layer in &problem.layers {
        let (e, _) = hermitian_eigen(&layer.material.eps)?;
        let (m, _) = hermitian_eigen(&layer.material.mu)?;
        let (e0, e1) = (e[0], e[e.len() - 1]);
        let (m0, m1) = (m[0], m[m.len() - 1]);
        lo = lo.min((e0 * m0).max(T::zero()).sqrt());
        hi = hi.max((e1 * m1).max(T::zero()).sqrt());
    }
    Ok((lo, hi))
}

/// Band scan over `λ = ω/c` with light-line columns.
pub fn band_structure<T: Real>(
    problem: &MaxwellProblem<T>,
    lambda_min: T,
    lambda_max: T,
    num: usize,
    tol: &Tolerances<T>,
) -> Result<DispersionTable<T>> {
    if problem.mode != MaxwellMode::Eigenfrequency {
        return Err(Error::InvalidMode(format!(
            "band structure needs eigenfrequency mode, got {}",
            problem.mode.name()
        )));
    }
    let system = assemble(problem, tol)?;
    let scan = band_scan(&system.coeffs, &system.splitting, lambda_min, lambda_max, num, tol)?;
    let (n_min, n_max) = index_bounds(problem)?;
    let k_perp = (problem.k1 * problem.k1 + problem.k2 * problem.k2).sqrt();
    let rows = scan
        .samples
        .iter()
        .map(|s| {
            let (wavenumbers, moduli) = match &s.floquet {
                Some(f) => (
                    f.multipliers.iter().map(|m| m.wavenumber).collect(),
                    f.multipliers.iter().map(|m| m.modulus).collect(),
                ),
                None => (Vec::new(), Vec::new()),
            };
            let light_min = s.lambda.abs() * n_min;
            let light_max = s.lambda.abs() * n_max;
            let cone = if k_perp < light_min {
                LightCone::Inside
            } else if k_perp > light_max {
                LightCone::Outside
            } else {
                LightCone::Between
            };
            DispersionRow {
                lambda: s.lambda,
                count: s.count(),
                wavenumbers,
                moduli,
                k_perp,
                light_min,
                light_max,
                cone,
            }
        })
        .collect();
    Ok(DispersionTable {
        scan,
        rows,
        n_min,
        n_max,
    })
}

/// `true` when `certify_self_adjoint` is expected to pass for this problem:
/// eigenfrequency mode with every `M` Hermitian positive definite.
pub fn is_passive_lossless<T: Real>(problem: &MaxwellProblem<T>, tol: &Tolerances<T>) -> bool {
    problem.mode == MaxwellMode::Eigenfrequency && assemble(problem, tol).is_ok()
}

/// Imaginary spectral parameter `λ = iγ` of the lossy problem.
pub fn lossy_lambda<T: Real>(gamma: T) -> Complex<T> {
    Complex::new(T::zero(), gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::{certify_self_adjoint, check_index1, Mode};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn j_entries() {
        let j = maxwell_j::<f64>();
        // Rows/cols: E1 E2 E3 H1 H2 H3; J = -i [[0, -e3x], [e3x, 0]].
        let mut expected = linalg::zeros::<f64>(6, 6);
        expected[(0, 4)] = c(0., -1.);
        expected[(1, 3)] = c(0., 1.);
        expected[(3, 1)] = c(0., 1.);
        expected[(4, 0)] = c(0., -1.);
        assert_eq!(j, expected);
    }

    #[test]
    fn splitting_is_the_permutation() {
        let sys = assemble(&MaxwellProblem::eigenfrequency(
            vec![MaxwellLayer::new(1.0, MaterialTensor::vacuum())],
            0.3,
            -0.2,
        ), &Tolerances::default())
        .unwrap();
        assert_eq!(sys.splitting.n1(), 4);
        let expected_j11 = CMatrix::<f64>::from_row_slice(
            4,
            4,
            &[
                c(0., 0.), c(0., 0.), c(0., 0.), c(0., -1.),
                c(0., 0.), c(0., 0.), c(0., 1.), c(0., 0.),
                c(0., 0.), c(0., 1.), c(0., 0.), c(0., 0.),
                c(0., -1.), c(0., 0.), c(0., 0.), c(0., 0.),
            ],
        );
        assert!(linalg::max_abs(&(sys.splitting.j11() - expected_j11)) < 1e-15);
        assert!(linalg::max_abs(&(sys.splitting.j_plus() + sys.j.matrix())) < 1e-14);
    }

    #[test]
    fn h22_vanishes() {
        let sys = assemble(
            &MaxwellProblem::bilayer(1.0, 0.5, 1.5, 0.5, 0.7, 1.1),
            &Tolerances::default(),
        )
        .unwrap();
        let h = sys.splitting.partition(sys.coeffs.layers()[0].h()).unwrap();
        assert_eq!(linalg::max_abs(&h.b22), 0.0);
        let w = sys.coeffs.layers()[1].w();
        assert!((w[(0, 0)] - c(2.25, 0.)).norm() < 1e-15);
        assert!((w[(3, 3)] - c(1., 0.)).norm() < 1e-15);
    }

    #[test]
    fn quarter_wave_certificate() {
        let tol = Tolerances::default();
        let sys = assemble(&MaxwellProblem::bilayer(1.0, 2. / 3., 2.0, 1. / 3., 0.0, 0.0), &tol).unwrap();
        let cert = certify_self_adjoint(&sys.coeffs, &sys.splitting, None, &tol).unwrap();
        assert!(cert.certified());
        let r = check_index1(&sys.coeffs, &sys.splitting, c(0., 1.), Mode::Sufficient, &tol).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn lossy_mode_rejects_lossless_layer() {
        let mut p = MaxwellProblem::eigenfrequency(vec![MaxwellLayer::new(1.0, MaterialTensor::vacuum())], 0.0, 0.0);
        p.mode = MaxwellMode::Lossy { omega: 1.0 };
        assert!(matches!(assemble(&p, &Tolerances::default()), Err(Error::DegenerateW { layer: 0, .. })));
        let i3 = linalg::identity::<f64>(3);
        let eps = &i3 * c(1., 0.5);
        let mu = &i3 * c(1., 0.2);
        p.layers[0].material = MaterialTensor::new(eps, mu, None).unwrap();
        let sys = assemble(&p, &Tolerances::default()).unwrap();
        assert!((sys.coeffs.layers()[0].w()[(0, 0)] - c(0.5, 0.)).norm() < 1e-15);
        assert!((sys.coeffs.layers()[0].h()[(0, 0)] - c(-1., 0.)).norm() < 1e-15);
    }

    #[test]
    fn disorder_mode_blocks() {
        let mut layer = MaxwellLayer::new(1.0, MaterialTensor::isotropic(2.0, 1.0));
        layer.perturbation = Some(MaterialTensor::isotropic(0.5, 0.25));
        let mut p = MaxwellProblem::eigenfrequency(vec![layer], 0.0, 0.0);
        p.mode = MaxwellMode::Disorder { omega: 2.0 };
        let sys = assemble(&p, &Tolerances::default()).unwrap();
        let l = &sys.coeffs.layers()[0];
        assert!((l.h()[(0, 0)] - c(-4., 0.)).norm() < 1e-15);
        assert!((l.w()[(5, 5)] - c(0.5, 0.)).norm() < 1e-15);
    }

    #[test]
    fn non_hermitian_tensor_rejected() {
        let mut eps = linalg::identity::<f64>(3);
        eps[(0, 1)] = c(0.3, 0.);
        let p = MaxwellProblem::eigenfrequency(
            vec![MaxwellLayer::new(1.0, MaterialTensor::new(eps, linalg::identity(3), None).unwrap())],
            0.0,
            0.0,
        );
        assert!(matches!(assemble(&p, &Tolerances::default()), Err(Error::InvalidTensor(_))));
        assert!(MaterialTensor::<f64>::new(linalg::identity(2), linalg::identity(3), None).is_err());
    }

    #[test]
    fn vacuum_has_no_gaps() {
        let p = MaxwellProblem::eigenfrequency(vec![MaxwellLayer::new(1.0, MaterialTensor::vacuum())], 0.0, 0.0);
        let t = band_structure(&p, 0.1, 5.0, 50, &Tolerances::default()).unwrap();
        assert!(t.rows.iter().all(|r| r.count == Some(4)));
        assert!(t.scan.edges.is_empty());
        assert_eq!(t.rows[0].cone, LightCone::Inside);
    }
}
