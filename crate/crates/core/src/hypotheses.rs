//! Local index-1 hypotheses and the self-adjointness certificate.
//!
//! For piecewise-constant layers every local integrability requirement
//! (`L1_loc`, `L2_loc`, `L∞_loc`) reduces to finiteness of a per-layer
//! matrix, so the substantive test is invertibility of the relevant
//! normal-normal block on each layer. Four equivalent or sufficient
//! formulations are offered:
//!
//! * `Definition`: the six conditions on `A = H - z0 W` and `W`.
//! * `Simplified`: the reduced list obtained by eliminating the `W`-only
//!   conditions.
//! * `PencilEquivalent`: for non-real `z0`, `W11` and
//!   `H11 - H12 (H22 - z0 W22)^{-1} H21` locally integrable.
//! * `Sufficient`: `H11`, `W11` and `H12 W22^{-1} H21` locally integrable;
//!   implies the hypotheses for every non-real shift.

use std::fmt;
use std::str::FromStr;

use nalgebra::ComplexField;
use num_complex::Complex;

use crate::canonical::{BlockMatrix, CanonicalSplitting};
use crate::coefficients::{LayeredCoefficients, ValidationReport};
use crate::error::{Error, Result};
use crate::linalg::{self, invertibility};
use crate::scalar::{imag_unit, CMatrix, Real, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Definition,
    Simplified,
    PencilEquivalent,
    Sufficient,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::Definition,
        Mode::Simplified,
        Mode::PencilEquivalent,
        Mode::Sufficient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Definition => "definition",
            Mode::Simplified => "simplified",
            Mode::PencilEquivalent => "pencil_equivalent",
            Mode::Sufficient => "sufficient",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "definition" => Ok(Mode::Definition),
            "simplified" => Ok(Mode::Simplified),
            "pencil" | "pencil_equivalent" | "pencil-equivalent" => Ok(Mode::PencilEquivalent),
            "sufficient" => Ok(Mode::Sufficient),
            other => Err(Error::InvalidMode(format!(
                "unknown mode '{other}' (expected definition, simplified, pencil or sufficient)"
            ))),
        }
    }
}

/// Evidence attached to one condition.
#[derive(Clone, Debug, PartialEq)]
pub enum Witness<T: Real> {
    /// Invertibility test of a block: smallest singular value against
    /// `tol * scale`. The block itself is kept when it is singular.
    Invertibility {
        sigma_min: T,
        scale: T,
        block: Option<CMatrix<T>>,
    },
    /// Finiteness of a derived per-layer matrix; `max_entry` is NaN or
    /// infinite on failure.
    Finite { max_entry: T },
    /// The condition could not be evaluated because a block it needs is
    /// singular or undefined.
    Undefined { reason: String },
    /// Hermiticity / definiteness premise of the periodic setting.
    Premise {
        h_hermitian_defect: T,
        w_min_eigenvalue: T,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionResult<T: Real> {
    pub label: &'static str,
    pub passed: bool,
    pub layer: Option<usize>,
    pub witness: Witness<T>,
}

/// Outcome of [`check_index1`].
#[derive(Clone, Debug, PartialEq)]
pub struct Index1Report<T: Real> {
    pub z0: Complex<T>,
    pub mode: Mode,
    pub conditions: Vec<ConditionResult<T>>,
    pub passed: bool,
}

impl<T: Real> Index1Report<T> {
    fn new(z0: Complex<T>, mode: Mode, conditions: Vec<ConditionResult<T>>) -> Self {
        let passed = conditions.iter().all(|c| c.passed);
        Self {
            z0,
            mode,
            conditions,
            passed,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionResult<T>> {
        self.conditions.iter().filter(|c| !c.passed)
    }
}

fn finite<T: Real>(label: &'static str, layer: usize, m: &CMatrix<T>) -> ConditionResult<T> {
    let ok = linalg::is_finite(m);
    let max_entry = if ok { linalg::max_abs(m) } else { T::nan() };
    ConditionResult {
        label,
        passed: ok,
        layer: Some(layer),
        witness: Witness::Finite { max_entry },
    }
}

fn finite_all<T: Real>(label: &'static str, layer: usize, ms: &[&CMatrix<T>]) -> ConditionResult<T> {
    let ok = ms.iter().all(|m| linalg::is_finite(m));
    let max_entry = if ok {
        ms.iter()
            .map(|m| linalg::max_abs(m))
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    } else {
        T::nan()
    };
    ConditionResult {
        label,
        passed: ok,
        layer: Some(layer),
        witness: Witness::Finite { max_entry },
    }
}

fn undefined<T: Real>(label: &'static str, layer: usize, reason: &str) -> ConditionResult<T> {
    ConditionResult {
        label,
        passed: false,
        layer: Some(layer),
        witness: Witness::Undefined {
            reason: reason.to_string(),
        },
    }
}

fn invertible<T: Real>(
    label: &'static str,
    layer: usize,
    block: &CMatrix<T>,
    scale: T,
    tol: &Tolerances<T>,
) -> (ConditionResult<T>, bool) {
    let check = invertibility(block, scale, tol.singular);
    let result = ConditionResult {
        label,
        passed: check.invertible,
        layer: Some(layer),
        witness: Witness::Invertibility {
            sigma_min: check.sigma_min,
            scale: check.scale,
            block: (!check.invertible).then(|| block.clone()),
        },
    };
    (result, check.invertible)
}

/// Hermitian `H` and positive definite `W` on every layer, assumed by the
/// pencil and sufficient modes.
fn premise<T: Real>(coeffs: &LayeredCoefficients<T>, tol: &Tolerances<T>) -> Vec<ConditionResult<T>> {
    coeffs
        .validate(tol)
        .layers
        .into_iter()
        .map(|l| ConditionResult {
            label: "periodic setting: H Hermitian, W positive definite",
            passed: l.passed(),
            layer: Some(l.index),
            witness: Witness::Premise {
                h_hermitian_defect: l.h_hermitian_defect,
                w_min_eigenvalue: l.w_min_eigenvalue,
            },
        })
        .collect()
}

fn is_real<T: Real>(z: Complex<T>) -> bool {
    z.im == T::zero()
}

/// Checks the local index-1 hypotheses for `H - z0 W, W` with respect to
/// `J` in the requested formulation.
///
/// `PencilEquivalent` and `Sufficient` rest on results stated for non-real
/// shifts and reject a real `z0` with [`Error::InvalidMode`].
pub fn check_index1<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    z0: Complex<T>,
    mode: Mode,
    tol: &Tolerances<T>,
) -> Result<Index1Report<T>> {
    if splitting.dim() != coeffs.dim() {
        return Err(Error::ShapeMismatch(format!(
            "splitting has dimension {}, coefficients {}",
            splitting.dim(),
            coeffs.dim()
        )));
    }
    if matches!(mode, Mode::PencilEquivalent | Mode::Sufficient) && is_real(z0) {
        return Err(Error::InvalidMode(format!(
            "{mode} mode requires a non-real shift, got z0 = {}",
            z0.re
        )));
    }

    let mut conditions = Vec::new();
    if matches!(mode, Mode::PencilEquivalent | Mode::Sufficient) {
        conditions.extend(premise(coeffs, tol));
    }

    if splitting.is_regular() {
        // det J != 0: only local integrability of H and W is required.
        for (k, layer) in coeffs.layers().iter().enumerate() {
            conditions.push(finite_all(
                "H, W locally integrable (det J != 0)",
                k,
                &[layer.h(), layer.w()],
            ));
        }
        return Ok(Index1Report::new(z0, mode, conditions));
    }

    for (k, layer) in coeffs.layers().iter().enumerate() {
        let a = splitting.partition(&layer.pencil(z0))?;
        let w = splitting.partition(layer.w())?;
        match mode {
            Mode::Definition => definition_conditions(k, &a, &w, tol, &mut conditions)?,
            Mode::Simplified => simplified_conditions(k, &a, &w, tol, &mut conditions)?,
            Mode::PencilEquivalent => {
                let h = splitting.partition(layer.h())?;
                pencil_conditions(k, &h, &w, z0, tol, &mut conditions)
            }
            Mode::Sufficient => {
                let h = splitting.partition(layer.h())?;
                sufficient_conditions(k, &h, &w, tol, &mut conditions)
            }
        }
    }
    Ok(Index1Report::new(z0, mode, conditions))
}

struct Derived<T: Real> {
    a22_inv: CMatrix<T>,
    w22_sqrt: CMatrix<T>,
}

fn derive<T: Real>(a: &BlockMatrix<T>, w: &BlockMatrix<T>) -> Result<Option<Derived<T>>> {
    let Some(a22_inv) = linalg::inverse(&a.b22) else {
        return Ok(None);
    };
    let w22_sqrt = linalg::hermitian_sqrt(&w.b22)?;
    Ok(Some(Derived { a22_inv, w22_sqrt }))
}

const A22_INVERTIBLE: &str = "(H - z0 W)_22 invertible";
const A12_L2: &str = "(H - z0 W)_12 (H - z0 W)_22^-1 W22^1/2 locally L2";
const SCHUR_L1: &str = "(H - z0 W)/(H - z0 W)_22 and W11 locally L1";
const WEIGHTED_LINF: &str = "W22^1/2 (H - z0 W)_22^-1 W22^1/2 locally Linf";
const MIXED_L2: &str = "W22^1/2 (W22^-1 W21 - (H - z0 W)_22^-1 (H - z0 W)_21) locally L2";
const W_SCHUR_L1: &str = "W/W22 locally L1";
const A21_L2: &str = "W22^1/2 (H - z0 W)_22^-1 (H - z0 W)_21 locally L2";

fn definition_conditions<T: Real>(
    k: usize,
    a: &BlockMatrix<T>,
    w: &BlockMatrix<T>,
    tol: &Tolerances<T>,
    out: &mut Vec<ConditionResult<T>>,
) -> Result<()> {
    let scale = linalg::norm2(&a.join());
    let (first, ok) = invertible(A22_INVERTIBLE, k, &a.b22, scale, tol);
    out.push(first);
    let derived = if ok { derive(a, w)? } else { None };
    let Some(d) = derived else {
        for label in [A12_L2, SCHUR_L1, WEIGHTED_LINF, MIXED_L2] {
            out.push(undefined(label, k, "(H - z0 W)_22 is singular"));
        }
        out.push(w_schur(k, w));
        return Ok(());
    };
    let schur_a = &a.b11 - &a.b12 * &d.a22_inv * &a.b21;
    out.push(finite(A12_L2, k, &(&a.b12 * &d.a22_inv * &d.w22_sqrt)));
    out.push(finite_all(SCHUR_L1, k, &[&schur_a, &w.b11]));
    out.push(finite(WEIGHTED_LINF, k, &(&d.w22_sqrt * &d.a22_inv * &d.w22_sqrt)));
    let mixed = match linalg::solve(&w.b22, &w.b21) {
        Some(w22_inv_w21) => Some(&d.w22_sqrt * (w22_inv_w21 - &d.a22_inv * &a.b21)),
        None => None,
    };
    out.push(match mixed {
        Some(m) => finite(MIXED_L2, k, &m),
        None => undefined(MIXED_L2, k, "W22 is singular"),
    });
    out.push(w_schur(k, w));
    Ok(())
}

fn w_schur<T: Real>(k: usize, w: &BlockMatrix<T>) -> ConditionResult<T> {
    match linalg::solve(&w.b22, &w.b21) {
        Some(x) => finite(W_SCHUR_L1, k, &(&w.b11 - &w.b12 * x)),
        None => undefined(W_SCHUR_L1, k, "W22 is singular"),
    }
}

fn simplified_conditions<T: Real>(
    k: usize,
    a: &BlockMatrix<T>,
    w: &BlockMatrix<T>,
    tol: &Tolerances<T>,
    out: &mut Vec<ConditionResult<T>>,
) -> Result<()> {
    let scale = linalg::norm2(&a.join());
    let (first, ok) = invertible(A22_INVERTIBLE, k, &a.b22, scale, tol);
    out.push(first);
    let derived = if ok { derive(a, w)? } else { None };
    let Some(d) = derived else {
        for label in [WEIGHTED_LINF, SCHUR_L1, A12_L2, A21_L2] {
            out.push(undefined(label, k, "(H - z0 W)_22 is singular"));
        }
        return Ok(());
    };
    let schur_a = &a.b11 - &a.b12 * &d.a22_inv * &a.b21;
    out.push(finite(WEIGHTED_LINF, k, &(&d.w22_sqrt * &d.a22_inv * &d.w22_sqrt)));
    out.push(finite_all(SCHUR_L1, k, &[&schur_a, &w.b11]));
    out.push(finite(A12_L2, k, &(&a.b12 * &d.a22_inv * &d.w22_sqrt)));
    out.push(finite(A21_L2, k, &(&d.w22_sqrt * &d.a22_inv * &a.b21)));
    Ok(())
}

const PENCIL_INVERTIBLE: &str = "H22 - z0 W22 invertible";
const PENCIL_W11: &str = "W11 locally L1";
const PENCIL_SCHUR: &str = "H11 - H12 (H22 - z0 W22)^-1 H21 locally L1";

fn pencil_conditions<T: Real>(
    k: usize,
    h: &BlockMatrix<T>,
    w: &BlockMatrix<T>,
    z0: Complex<T>,
    tol: &Tolerances<T>,
    out: &mut Vec<ConditionResult<T>>,
) {
    let block = &h.b22 - w.b22.map(|x| x * z0);
    let scale = linalg::norm2(&(h.join() - w.join().map(|x| x * z0)));
    let (first, ok) = invertible(PENCIL_INVERTIBLE, k, &block, scale, tol);
    out.push(first);
    out.push(finite(PENCIL_W11, k, &w.b11));
    let schur = if ok {
        linalg::solve(&block, &h.b21).map(|x| &h.b11 - &h.b12 * x)
    } else {
        None
    };
    out.push(match schur {
        Some(m) => finite(PENCIL_SCHUR, k, &m),
        None => undefined(PENCIL_SCHUR, k, "H22 - z0 W22 is singular"),
    });
}

const SUFF_W22: &str = "W22 invertible";
const SUFF_H11_W11: &str = "H11, W11 locally L1";
const SUFF_CROSS: &str = "H12 W22^-1 H21 locally L1";

fn sufficient_conditions<T: Real>(
    k: usize,
    h: &BlockMatrix<T>,
    w: &BlockMatrix<T>,
    tol: &Tolerances<T>,
    out: &mut Vec<ConditionResult<T>>,
) {
    let scale = linalg::norm2(&w.join());
    let (first, ok) = invertible(SUFF_W22, k, &w.b22, scale, tol);
    out.push(first);
    out.push(finite_all(SUFF_H11_W11, k, &[&h.b11, &w.b11]));
    let cross = if ok {
        linalg::solve(&w.b22, &h.b21).map(|x| &h.b12 * x)
    } else {
        None
    };
    out.push(match cross {
        Some(m) => finite(SUFF_CROSS, k, &m),
        None => undefined(SUFF_CROSS, k, "W22 is singular"),
    });
}

/// Which result licenses the certificate's conclusions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum License {
    /// Sufficient conditions held, so the local index-1 hypotheses hold for
    /// every non-real shift.
    SufficientConditions,
    /// The local index-1 hypotheses were verified directly at `z0`.
    Index1Definition,
    /// Neither route succeeded.
    None,
}

/// Report-style certificate for self-adjointness of the maximal operator.
/// It records which checks passed; it is not a proof.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfAdjointCertificate<T: Real> {
    pub z0: Complex<T>,
    pub validation: ValidationReport<T>,
    /// Report from the sufficient-condition route (`None` when `J` is
    /// invertible, where that route does not apply).
    pub sufficient: Option<Index1Report<T>>,
    /// Report from the definition route.
    pub index1: Index1Report<T>,
    pub license: License,
    pub self_adjoint: bool,
    pub essentially_self_adjoint_minimal: bool,
    pub no_finite_multiplicity_eigenvalues: bool,
    /// Definition route passed although the sufficient conditions failed:
    /// evidence on whether the sufficient conditions are also necessary.
    pub sufficient_failed_but_definition_passed: bool,
}

impl<T: Real> SelfAdjointCertificate<T> {
    pub fn certified(&self) -> bool {
        self.self_adjoint && self.essentially_self_adjoint_minimal && self.no_finite_multiplicity_eigenvalues
    }
}

/// Default shift `z0 = i`.
pub fn default_shift<T: Real>() -> Complex<T> {
    imag_unit()
}

/// Runs the hypothesis checks behind self-adjointness at a non-real shift.
pub fn certify_self_adjoint<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    z0: Option<Complex<T>>,
    tol: &Tolerances<T>,
) -> Result<SelfAdjointCertificate<T>> {
    let z0 = z0.unwrap_or_else(default_shift);
    if is_real(z0) {
        return Err(Error::RealShiftRejected(z0.re.as_f64()));
    }
    let validation = coeffs.validate(tol);
    let sufficient = if splitting.is_regular() {
        None
    } else {
        Some(check_index1(coeffs, splitting, z0, Mode::Sufficient, tol)?)
    };
    let index1 = check_index1(coeffs, splitting, z0, Mode::Definition, tol)?;
    let sufficient_passed = sufficient.as_ref().is_some_and(|r| r.passed);
    let license = if sufficient_passed {
        License::SufficientConditions
    } else if index1.passed {
        License::Index1Definition
    } else {
        License::None
    };
    let ok = validation.passed && (sufficient_passed || index1.passed);
    Ok(SelfAdjointCertificate {
        z0,
        sufficient_failed_but_definition_passed: sufficient.as_ref().is_some_and(|r| !r.passed)
            && index1.passed,
        validation,
        sufficient,
        index1,
        license,
        self_adjoint: ok,
        essentially_self_adjoint_minimal: ok,
        no_finite_multiplicity_eigenvalues: ok,
    })
}

/// Compares the definition-mode verdict for `H - z0 W` with that for the
/// adjoint pencil `(H - z0 W)* = H* - conj(z0) W`. The two must agree.
pub fn dual_pencil_consistency<T: Real>(
    coeffs: &LayeredCoefficients<T>,
    splitting: &CanonicalSplitting<T>,
    z0: Complex<T>,
    tol: &Tolerances<T>,
) -> Result<bool> {
    let direct = check_index1(coeffs, splitting, z0, Mode::Definition, tol)?;
    let dual = check_index1(&coeffs.adjoint_h(), splitting, z0.conjugate(), Mode::Definition, tol)?;
    Ok(direct.passed == dual.passed)
}
