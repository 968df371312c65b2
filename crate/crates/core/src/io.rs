//! JSON and CSV formats. Complex numbers are `[re, im]` pairs (a bare
//! number is accepted as a real value on input); matrices are row-major
//! nested arrays. CSV uses 17 significant digits.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::canonical::{build_splitting, CanonicalSplitting, SkewHermitian};
use crate::coefficients::{Layer, LayerFunction, LayeredCoefficients, PeriodFunction, ValidationReport};
use crate::error::{Error, Result};
use crate::hypotheses::{Index1Report, License, SelfAdjointCertificate, Witness};
use crate::maxwell::{DispersionTable, MaterialTensor, MaxwellLayer, MaxwellMode, MaxwellProblem};
use crate::propagation::{IvpPoint, Monodromy};
use crate::scalar::{CMatrix, CVector, Tolerances};
use crate::spectral::{BandScan, EdgeDirection, FloquetSet, PointSpectrumFinding, TranslateCheck};

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
enum Num {
    Pair([f64; 2]),
    Real(f64),
}

impl From<Num> for Complex64 {
    fn from(n: Num) -> Self {
        match n {
            Num::Pair([re, im]) => Complex64::new(re, im),
            Num::Real(re) => Complex64::new(re, 0.0),
        }
    }
}

type RawMatrix = Vec<Vec<Num>>;

fn matrix(raw: &RawMatrix, what: &str) -> Result<CMatrix<f64>> {
    let rows = raw.len();
    let cols = raw.first().map_or(0, Vec::len);
    if let Some(bad) = raw.iter().position(|r| r.len() != cols) {
        return Err(Error::ShapeMismatch(format!("{what}: row {bad} has a different length")));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| raw[i][j].into()))
}

fn vector(raw: &[Num]) -> CVector<f64> {
    CVector::from_iterator(raw.len(), raw.iter().map(|&n| n.into()))
}

fn parse<'a, D: Deserialize<'a>>(text: &'a str, what: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

/// Reads a file to a string, mapping failures to [`Error::Io`].
pub fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    thickness: f64,
    #[serde(rename = "H")]
    h: RawMatrix,
    #[serde(rename = "W")]
    w: RawMatrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStack {
    period: Option<f64>,
    n: Option<usize>,
    #[serde(rename = "J")]
    j: RawMatrix,
    #[serde(rename = "V")]
    v: Option<RawMatrix>,
    layers: Vec<RawLayer>,
}

/// A parsed stack file: `J`, the layers and the splitting (from `V` when
/// given, otherwise constructed).
#[derive(Clone, Debug)]
pub struct Stack {
    pub j: SkewHermitian<f64>,
    pub coeffs: LayeredCoefficients<f64>,
    pub splitting: CanonicalSplitting<f64>,
}

/// `{ "period", "n", "J", "layers": [{ "thickness", "H", "W" }], "V"? }`.
pub fn parse_stack(text: &str, tol: &Tolerances<f64>) -> Result<Stack> {
    let raw: RawStack = parse(text, "stack")?;
    let j = matrix(&raw.j, "J")?;
    if let Some(n) = raw.n {
        if j.nrows() != n {
            return Err(Error::ShapeMismatch(format!("J is {}x{}, n = {n}", j.nrows(), j.ncols())));
        }
    }
    let j = SkewHermitian::new(j, tol)?;
    let layers = raw
        .layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let h = matrix(&l.h, &format!("layer {k} H"))?;
            let w = matrix(&l.w, &format!("layer {k} W"))?;
            Layer::new(l.thickness, h, w)
        })
        .collect::<Result<Vec<_>>>()?;
    let coeffs = match raw.period {
        Some(d) => LayeredCoefficients::with_period(d, layers)?,
        None => LayeredCoefficients::new(layers)?,
    };
    if coeffs.dim() != j.dim() {
        return Err(Error::ShapeMismatch(format!(
            "J has dimension {}, layers {}",
            j.dim(),
            coeffs.dim()
        )));
    }
    let splitting = match &raw.v {
        Some(v) => CanonicalSplitting::from_basis(&j, matrix(v, "V")?, tol)?,
        None => build_splitting(&j, tol)?,
    };
    Ok(Stack { j, coeffs, splitting })
}

pub fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn matrix_json(m: &CMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_json(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn vector_json(v: &CVector<f64>) -> Value {
    Value::Array(v.iter().map(|&z| complex_json(z)).collect())
}

/// Serializes a stack in the input format, including `V`.
pub fn stack_json(j: &CMatrix<f64>, coeffs: &LayeredCoefficients<f64>, v: Option<&CMatrix<f64>>) -> Value {
    let layers: Vec<Value> = coeffs
        .layers()
        .iter()
        .map(|l| json!({ "thickness": l.thickness(), "H": matrix_json(l.h()), "W": matrix_json(l.w()) }))
        .collect();
    let mut out = json!({
        "period": coeffs.period(),
        "n": coeffs.dim(),
        "J": matrix_json(j),
        "layers": layers,
    });
    if let Some(v) = v {
        out["V"] = matrix_json(v);
    }
    out
}

/// Initial value: a bare array or `{ "f0": [...] }`.
pub fn parse_vector(text: &str) -> Result<CVector<f64>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Bare(Vec<Num>),
        Wrapped { f0: Vec<Num> },
    }
    match parse::<Raw>(text, "vector")? {
        Raw::Bare(v) | Raw::Wrapped { f0: v } => Ok(vector(&v)),
    }
}

/// Source file: `{ "pieces": [{ "kind": "constant" | "exponential",
/// "coeff": [...], "rate"?: [re, im] }] }`, one piece per layer.
pub fn parse_source(text: &str) -> Result<PeriodFunction<f64>> {
    #[derive(Deserialize)]
    struct RawPiece {
        kind: String,
        coeff: Vec<Num>,
        rate: Option<Num>,
    }
    #[derive(Deserialize)]
    struct RawSource {
        pieces: Vec<RawPiece>,
    }
    let raw: RawSource = parse(text, "source")?;
    let pieces = raw
        .pieces
        .into_iter()
        .map(|p| {
            PeriodFunction::piece_from_kind(&p.kind, vector(&p.coeff), p.rate.map(Into::into)).map_err(|e| match e {
                Error::UnsupportedFunctionClass(msg) => Error::UnsupportedSource(msg),
                other => other,
            })
        })
        .collect::<Result<Vec<LayerFunction<f64>>>>()?;
    Ok(PeriodFunction::new(pieces))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterialLayer {
    thickness: f64,
    eps: RawMatrix,
    mu: RawMatrix,
    xi: Option<RawMatrix>,
    eps1: Option<RawMatrix>,
    mu1: Option<RawMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterials {
    period: Option<f64>,
    layers: Vec<RawMaterialLayer>,
    mode: Option<String>,
    omega: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
}

/// `{ "period", "layers": [{ "thickness", "eps", "mu", "xi"?, "eps1"?,
/// "mu1"? }], "mode"?, "omega"?, "k1"?, "k2"? }`. `k1`, `k2` given as
/// arguments override the file.
pub fn parse_materials(text: &str, k1: Option<f64>, k2: Option<f64>) -> Result<MaxwellProblem<f64>> {
    let raw: RawMaterials = parse(text, "materials")?;
    let omega = || {
        raw.omega
            .ok_or_else(|| Error::InvalidTensor("this mode needs \"omega\"".into()))
    };
    let mode = match raw.mode.as_deref().unwrap_or("eigenfrequency") {
        "eigenfrequency" => MaxwellMode::Eigenfrequency,
        "disorder" => MaxwellMode::Disorder { omega: omega()? },
        "lossy" => MaxwellMode::Lossy { omega: omega()? },
        other => {
            return Err(Error::InvalidMode(format!(
                "unknown Maxwell mode '{other}' (expected eigenfrequency, disorder or lossy)"
            )))
        }
    };
    let layers = raw
        .layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let xi = l.xi.as_ref().map(|x| matrix(x, &format!("layer {k} xi"))).transpose()?;
            let material = MaterialTensor::new(
                matrix(&l.eps, &format!("layer {k} eps"))?,
                matrix(&l.mu, &format!("layer {k} mu"))?,
                xi,
            )?;
            let perturbation = match (&l.eps1, &l.mu1) {
                (Some(e), Some(m)) => Some(MaterialTensor::new(
                    matrix(e, &format!("layer {k} eps1"))?,
                    matrix(m, &format!("layer {k} mu1"))?,
                    None,
                )?),
                (None, None) => None,
                _ => {
                    return Err(Error::InvalidTensor(format!(
                        "layer {k}: eps1 and mu1 must be given together"
                    )))
                }
            };
            Ok(MaxwellLayer {
                thickness: l.thickness,
                material,
                perturbation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MaxwellProblem {
        layers,
        period: raw.period,
        k1: k1.or(raw.k1).unwrap_or(0.0),
        k2: k2.or(raw.k2).unwrap_or(0.0),
        mode,
    })
}

fn witness_json(w: &Witness<f64>) -> Value {
    match w {
        Witness::Invertibility { sigma_min, scale, block } => json!({
            "kind": "invertibility",
            "sigma_min": sigma_min,
            "scale": scale,
            "block": block.as_ref().map(matrix_json),
        }),
        Witness::Finite { max_entry } => json!({ "kind": "finite", "max_entry": max_entry }),
        Witness::Undefined { reason } => json!({ "kind": "undefined", "reason": reason }),
        Witness::Premise {
            h_hermitian_defect,
            w_min_eigenvalue,
        } => json!({
            "kind": "premise",
            "h_hermitian_defect": h_hermitian_defect,
            "w_min_eigenvalue": w_min_eigenvalue,
        }),
    }
}

pub fn index1_json(r: &Index1Report<f64>) -> Value {
    let conditions: Vec<Value> = r
        .conditions
        .iter()
        .map(|c| {
            json!({
                "label": c.label,
                "passed": c.passed,
                "layer": c.layer,
                "witness": witness_json(&c.witness),
            })
        })
        .collect();
    json!({
        "z0": complex_json(r.z0),
        "mode": r.mode.as_str(),
        "passed": r.passed,
        "conditions": conditions,
    })
}

pub fn validation_json(v: &ValidationReport<f64>) -> Value {
    let layers: Vec<Value> = v
        .layers
        .iter()
        .map(|l| {
            json!({
                "layer": l.index,
                "h_hermitian_defect": l.h_hermitian_defect,
                "h_hermitian": l.h_hermitian,
                "w_hermitian_defect": l.w_hermitian_defect,
                "w_min_eigenvalue": l.w_min_eigenvalue,
                "w_positive_definite": l.w_positive_definite,
                "w_witness": l.w_witness.as_ref().map(vector_json),
            })
        })
        .collect();
    json!({ "passed": v.passed, "layers": layers })
}

/// Certificate with the point-spectrum candidates found for the stack.
pub fn certificate_json(c: &SelfAdjointCertificate<f64>, candidates: &[f64]) -> Value {
    let license = match c.license {
        License::SufficientConditions => "sufficient conditions on H11, W11, H12 W22^-1 H21",
        License::Index1Definition => "local index-1 hypotheses verified at z0",
        License::None => "none",
    };
    json!({
        "z0": complex_json(c.z0),
        "certified": c.certified(),
        "self_adjoint": c.self_adjoint,
        "essentially_self_adjoint_minimal": c.essentially_self_adjoint_minimal,
        "no_finite_multiplicity_eigenvalues": c.no_finite_multiplicity_eigenvalues,
        "license": license,
        "sufficient_failed_but_definition_passed": c.sufficient_failed_but_definition_passed,
        "infinite_multiplicity_candidates": candidates,
        "validation": validation_json(&c.validation),
        "sufficient": c.sufficient.as_ref().map(index1_json),
        "index1": index1_json(&c.index1),
    })
}

pub fn floquet_json(f: &FloquetSet<f64>) -> Value {
    let multipliers: Vec<Value> = f
        .multipliers
        .iter()
        .map(|m| {
            json!({
                "value": complex_json(m.value),
                "modulus": m.modulus,
                "on_circle": m.on_circle,
                "wavenumber": m.wavenumber,
            })
        })
        .collect();
    json!({
        "lambda": complex_json(f.lambda),
        "period": f.period,
        "propagating": f.propagating(),
        "band_semantics": if f.lambda.im == 0.0 { "defined" } else { "undefined" },
        "multipliers": multipliers,
    })
}

pub fn monodromy_json(m: &Monodromy<f64>, f: &FloquetSet<f64>) -> Value {
    json!({
        "lambda": complex_json(m.lambda),
        "M": matrix_json(&m.m),
        "condition": m.condition,
        "floquet": floquet_json(f),
    })
}

pub fn point_spectrum_json(p: &PointSpectrumFinding<f64>, translates: Option<&TranslateCheck<f64>>) -> Value {
    let layers: Vec<Value> = p
        .layers
        .iter()
        .map(|l| {
            json!({
                "layer": l.layer,
                "kernel_dimension": l.dimension,
                "sigma_min": l.sigma_min,
                "scale": l.scale,
                "witness_f2": l.witness.as_ref().map(vector_json),
                "residual": l.residual,
            })
        })
        .collect();
    json!({
        "lambda": p.lambda,
        "certified": p.certified,
        "verdict": if p.certified { "eigenvalue of infinite multiplicity" } else { "none found" },
        "layers": layers,
        "translates": translates.map(|t| json!({
            "count": t.gram.nrows(),
            "gram": matrix_json(&t.gram),
            "min_eigenvalue": t.min_eigenvalue,
            "independent": t.independent,
            "max_residual": t.max_residual,
        })),
    })
}

pub fn band_summary_json(scan: &BandScan<f64>) -> Value {
    let edges: Vec<Value> = scan
        .edges
        .iter()
        .map(|e| {
            json!({
                "lambda": e.lambda,
                "count_below": e.count_below,
                "count_above": e.count_above,
                "direction": match e.direction {
                    EdgeDirection::GapOpens => "gap_opens",
                    EdgeDirection::GapCloses => "gap_closes",
                },
            })
        })
        .collect();
    let flagged: Vec<Value> = scan
        .flagged
        .iter()
        .map(|f| {
            json!({
                "lambda": f.lambda,
                "layer": f.layer,
                "point_spectrum": point_spectrum_json(&f.point_spectrum, None),
            })
        })
        .collect();
    json!({ "edges": edges, "flagged": flagged })
}

/// Fixed 17-significant-digit formatting.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn width(scan: &BandScan<f64>) -> usize {
    scan.samples
        .iter()
        .filter_map(|s| s.floquet.as_ref().map(|f| f.multipliers.len()))
        .max()
        .unwrap_or(0)
}

/// `lambda,count,k_1..k_m,absmu_1..absmu_m`; blanks where undefined.
pub fn bands_csv(scan: &BandScan<f64>) -> String {
    let m = width(scan);
    let mut out = String::from("lambda,count");
    for i in 1..=m {
        let _ = write!(out, ",k_{i}");
    }
    for i in 1..=m {
        let _ = write!(out, ",absmu_{i}");
    }
    out.push('\n');
    for s in &scan.samples {
        out.push_str(&num(s.lambda));
        out.push(',');
        if let Some(c) = s.count() {
            let _ = write!(out, "{c}");
        }
        let mults = s.floquet.as_ref().map(|f| f.multipliers.as_slice()).unwrap_or(&[]);
        for i in 0..m {
            out.push(',');
            if let Some(k) = mults.get(i).and_then(|x| x.wavenumber) {
                out.push_str(&num(k));
            }
        }
        for i in 0..m {
            out.push(',');
            if let Some(x) = mults.get(i) {
                out.push_str(&num(x.modulus));
            }
        }
        out.push('\n');
    }
    out
}

/// `lambda,count,k_*,absmu_*,k_perp,light_min,light_max,light_cone`.
pub fn dispersion_csv(table: &DispersionTable<f64>) -> String {
    let m = width(&table.scan);
    let mut out = String::from("lambda,count");
    for i in 1..=m {
        let _ = write!(out, ",k_{i}");
    }
    for i in 1..=m {
        let _ = write!(out, ",absmu_{i}");
    }
    out.push_str(",k_perp,light_min,light_max,light_cone\n");
    for r in &table.rows {
        out.push_str(&num(r.lambda));
        out.push(',');
        if let Some(c) = r.count {
            let _ = write!(out, "{c}");
        }
        for i in 0..m {
            out.push(',');
            if let Some(k) = r.wavenumbers.get(i).copied().flatten() {
                out.push_str(&num(k));
            }
        }
        for i in 0..m {
            out.push(',');
            if let Some(x) = r.moduli.get(i) {
                out.push_str(&num(*x));
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            num(r.k_perp),
            num(r.light_min),
            num(r.light_max),
            r.cone.as_str()
        );
    }
    out
}

/// `t,re_f1,im_f1,...,re_fn,im_fn`.
pub fn ivp_csv(points: &[IvpPoint<f64>]) -> String {
    let n = points.first().map_or(0, |p| p.f.len());
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",re_f{i},im_f{i}");
    }
    out.push('\n');
    for p in points {
        out.push_str(&num(p.t));
        for z in p.f.iter() {
            let _ = write!(out, ",{},{}", num(z.re), num(z.im));
        }
        out.push('\n');
    }
    out
}
