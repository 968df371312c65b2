//! Invariant suite run by `canondae selftest`: the worked two-dimensional
//! example, random canonical systems, hypothesis-mode agreement, Maxwell
//! structure and basis independence.

use num_complex::Complex64;
use rand::Rng;

use crate::canonical::{CanonicalSplitting, SkewHermitian};
use crate::coefficients::{Layer, LayerFunction, LayeredCoefficients, PeriodFunction};
use crate::error::Result;
use crate::hypotheses::{certify_self_adjoint, check_index1, Mode, Witness};
use crate::linalg::{self, identity, max_abs};
use crate::maxwell::{assemble, maxwell_j, MaterialTensor, MaxwellLayer, MaxwellProblem};
use crate::propagation::oracle::{oracle_monodromy, OracleOptions};
use crate::propagation::{monodromy, monodromy_at, solve_ivp};
use crate::random::{self, RandomSystem};
use crate::reduction::reduce_at;
use crate::scalar::{CMatrix, CVector, Tolerances};
use crate::spectral::{band_scan, floquet, point_spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SelftestOptions {
    pub seed: u64,
    pub random_stacks: usize,
    pub lambdas_per_stack: usize,
    pub hypothesis_stacks: usize,
    pub shifts_per_stack: usize,
    pub splitting_cases: usize,
    pub example_j_cases: usize,
}

impl SelftestOptions {
    pub fn full(seed: u64) -> Self {
        Self {
            seed,
            random_stacks: 100,
            lambdas_per_stack: 5,
            hypothesis_stacks: 200,
            shifts_per_stack: 10,
            splitting_cases: 20,
            example_j_cases: 20,
        }
    }

    pub fn quick(seed: u64) -> Self {
        Self {
            seed,
            random_stacks: 10,
            lambdas_per_stack: 2,
            hypothesis_stacks: 20,
            shifts_per_stack: 3,
            splitting_cases: 5,
            example_j_cases: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed defect, compared against `bound`.
    pub worst: f64,
    pub bound: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Worst {
    value: f64,
    failures: Vec<String>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            failures: Vec::new(),
        }
    }

    fn observe(&mut self, x: f64) {
        if !(x <= self.value) {
            self.value = if x.is_nan() { f64::INFINITY } else { x };
        }
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 5 {
            self.failures.push(msg);
        }
    }

    fn finish(self, name: &'static str, bound: f64) -> CheckResult {
        let passed = self.failures.is_empty() && self.value <= bound;
        CheckResult {
            name,
            passed,
            worst: self.value,
            bound,
            detail: self.failures.join("; "),
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `J = i diag(1, 0)`, `H = 0`, `W = I` on one layer of thickness `d`.
pub fn example_system(d: f64, tol: &Tolerances<f64>) -> Result<(LayeredCoefficients<f64>, CanonicalSplitting<f64>)> {
    let j = CMatrix::from_row_slice(2, 2, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., 0.)]);
    let j = SkewHermitian::new(j, tol)?;
    let splitting = crate::canonical::build_splitting(&j, tol)?;
    let coeffs = LayeredCoefficients::new(vec![Layer::new(d, linalg::zeros(2, 2), identity(2))?])?;
    Ok((coeffs, splitting))
}

/// Greedy matching distance between two multisets of complex numbers.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let best = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .min_by(|(_, p), (_, q)| (*p - x).norm().total_cmp(&(*q - x).norm()));
        match best {
            Some((i, y)) => {
                used[i] = true;
                worst = worst.max((y - x).norm());
            }
            None => return f64::INFINITY,
        }
    }
    worst
}

fn example_check(opts: &SelftestOptions, tol: &Tolerances<f64>) -> Result<CheckResult> {
    let mut w = Worst::new();
    let mut rng = random::rng(opts.seed ^ 0x1);
    let d = 1.0;
    let (coeffs, s) = example_system(d, tol)?;
    let at_zero = check_index1(&coeffs, &s, c(0., 0.), Mode::Definition, tol)?;
    let witness_ok = at_zero.conditions.first().is_some_and(|cond| {
        !cond.passed
            && matches!(&cond.witness, Witness::Invertibility { block: Some(b), .. } if max_abs(b) == 0.0)
    });
    if at_zero.passed || !witness_ok {
        w.fail("index-1 check at z0 = 0 did not fail with a zero H22 witness".into());
    }
    if !check_index1(&coeffs, &s, c(0., 1.), Mode::Definition, tol)?.passed {
        w.fail("index-1 check at z0 = i failed".into());
    }
    if !certify_self_adjoint(&coeffs, &s, None, tol)?.certified() {
        w.fail("certificate at z0 = i is false".into());
    }
    let zero = point_spectrum(&coeffs, &s, 0.0, tol)?;
    if !zero.certified || zero.layers[0].dimension != 1 {
        w.fail("lambda = 0 not certified with kernel dimension 1".into());
    }
    for _ in 0..50 {
        let mut lambda: f64 = rng.gen_range(-10.0..10.0);
        if lambda.abs() < 1e-3 {
            lambda = 1.0;
        }
        if point_spectrum(&coeffs, &s, lambda, tol)?.certified {
            w.fail(format!("spurious certificate at lambda = {lambda}"));
        }
    }
    for _ in 0..20 {
        let lambda: f64 = rng.gen_range(-10.0..10.0);
        let m = monodromy_at(&coeffs, &s, c(lambda, 0.), tol)?;
        w.observe((m.m[(0, 0)] - c(0., -lambda * d).exp()).norm());
    }
    Ok(w.finish("example: hypotheses, certificate, point spectrum, monodromy", 1e-12))
}

fn generalized_example_check(opts: &SelftestOptions, tol: &Tolerances<f64>) -> Result<CheckResult> {
    let mut w = Worst::new();
    let mut rng = random::rng(opts.seed ^ 0x2);
    for case in 0..opts.example_j_cases {
        let n = rng.gen_range(2..=8);
        let rank = if case % 2 == 0 { n - n % 2 } else { rng.gen_range(1..n) };
        let j = random::skew_hermitian(&mut rng, n, rank.max(1));
        let j = SkewHermitian::new(j, tol)?;
        let s = crate::canonical::build_splitting(&j, tol)?;
        let coeffs = LayeredCoefficients::new(vec![Layer::new(1.0, linalg::zeros(n, n), identity(n))?])?;
        let singular = s.n2() > 0;
        for i in 0..100 {
            let lambda = -5.0 + 10.0 * (i as f64 + 0.5) / 100.0;
            if point_spectrum(&coeffs, &s, lambda, tol)?.certified {
                w.fail(format!("case {case}: certificate at lambda = {lambda}"));
            }
        }
        if point_spectrum(&coeffs, &s, 0.0, tol)?.certified != singular {
            w.fail(format!("case {case}: lambda = 0 verdict does not match det J = 0"));
        }
    }
    Ok(w.finish("generalized example: point spectrum iff det J = 0 at lambda = 0", 0.0))
}

struct SuiteCase {
    sys: RandomSystem,
    lambdas: Vec<f64>,
}

fn random_suite(opts: &SelftestOptions, tol: &Tolerances<f64>) -> Result<Vec<SuiteCase>> {
    let mut rng = random::rng(opts.seed ^ 0x3);
    let mut out = Vec::with_capacity(opts.random_stacks);
    while out.len() < opts.random_stacks {
        let sys = random::system(&mut rng, 8, 5, tol)?;
        let lambdas: Vec<f64> = (0..opts.lambdas_per_stack)
            .filter_map(|_| random::regular_real_lambda(&mut rng, &sys, -5.0, 5.0, 0.1))
            .collect();
        if lambdas.len() == opts.lambdas_per_stack {
            out.push(SuiteCase { sys, lambdas });
        }
    }
    Ok(out)
}

fn unitarity_and_reciprocity(suite: &[SuiteCase], tol: &Tolerances<f64>) -> Result<(CheckResult, CheckResult)> {
    let mut unit = Worst::new();
    let mut recip = Worst::new();
    for case in suite {
        let j11 = case.sys.splitting.j11();
        for &lambda in &case.lambdas {
            let m = monodromy_at(&case.sys.coeffs, &case.sys.splitting, c(lambda, 0.), tol)?;
            unit.observe(max_abs(&(m.m.adjoint() * j11 * &m.m - j11)));
            let f = floquet(&m, case.sys.coeffs.period(), tol)?;
            let mu = f.values();
            let inv: Vec<Complex64> = mu.iter().map(|z| 1.0 / z.conj()).collect();
            recip.observe(multiset_distance(&mu, &inv));
        }
    }
    Ok((
        unit.finish("J11-unitarity of the monodromy", 1e-9),
        recip.finish("multiplier reciprocity mu -> 1/conj(mu)", 1e-8),
    ))
}

fn oracle_checks(
    suite: &[SuiteCase],
    opts: &SelftestOptions,
    tol: &Tolerances<f64>,
) -> Result<(CheckResult, CheckResult)> {
    let mut w = Worst::new();
    let mut res = Worst::new();
    let mut rng = random::rng(opts.seed ^ 0x5);
    let oracle = OracleOptions::default();
    for case in suite {
        let (coeffs, s) = (&case.sys.coeffs, &case.sys.splitting);
        for &lambda in &case.lambdas {
            let gen = reduce_at(coeffs, s, c(lambda, 0.), tol)?;
            let m = monodromy(&gen)?.m;
            let mo = oracle_monodromy(&gen, &oracle)?;
            w.observe(max_abs(&(&m - &mo)) / max_abs(&m).max(1.0));
        }
        // Inhomogeneous IVP residual on one period at the first lambda.
        let n = coeffs.dim();
        let pieces = (0..coeffs.len())
            .map(|k| {
                let coeff = CVector::from_fn(n, |_, _| random::complex(&mut rng));
                if k % 2 == 0 {
                    LayerFunction::Constant(coeff)
                } else {
                    LayerFunction::Exponential {
                        coeff,
                        rate: c(rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0)),
                    }
                }
            })
            .collect();
        let g = PeriodFunction::new(pieces);
        let x = CVector::from_fn(n, |_, _| random::complex(&mut rng));
        let f0 = s.j() * x;
        let z = c(case.lambdas[0], 0.);
        let sol = solve_ivp(coeffs, s, z, Some(&g), 0.0, coeffs.period(), &f0, tol)?;
        for p in sol.interior_samples(50)? {
            let layer = &coeffs.layers()[p.layer];
            let scale = 1.0
                + linalg::norm2(s.j11()) * linalg::vec_norm(&p.f1_dot)
                + linalg::norm2(&layer.pencil(z)) * linalg::vec_norm(&p.f)
                + linalg::norm2(layer.w()) * p.g.as_ref().map_or(0.0, linalg::vec_norm);
            res.observe(sol.residual(coeffs, s, &p)? / scale);
        }
    }
    Ok((
        w.finish("monodromy against the RK4 oracle", 1e-6),
        res.finish("IVP residual of the original DAE", 1e-9),
    ))
}

fn mode_equivalence(opts: &SelftestOptions, tol: &Tolerances<f64>) -> Result<CheckResult> {
    let mut w = Worst::new();
    let mut rng = random::rng(opts.seed ^ 0x6);
    let mut suff_fail_def_pass = 0usize;
    for case in 0..opts.hypothesis_stacks {
        let sys = random::system(&mut rng, 8, 5, tol)?;
        for _ in 0..opts.shifts_per_stack {
            let mut im: f64 = rng.gen_range(-3.0..3.0);
            if im.abs() < 1e-3 {
                im = 1.0;
            }
            let z0 = c(rng.gen_range(-3.0..3.0), im);
            let def = check_index1(&sys.coeffs, &sys.splitting, z0, Mode::Definition, tol)?;
            let pen = check_index1(&sys.coeffs, &sys.splitting, z0, Mode::PencilEquivalent, tol)?;
            let suf = check_index1(&sys.coeffs, &sys.splitting, z0, Mode::Sufficient, tol)?;
            if def.passed != pen.passed {
                w.fail(format!("stack {case}: definition and pencil modes disagree at {z0}"));
            }
            if suf.passed && !def.passed {
                w.fail(format!("stack {case}: sufficient passes but definition fails at {z0}"));
            }
            if !suf.passed && def.passed {
                suff_fail_def_pass += 1;
            }
        }
    }
    let mut r = w.finish("hypothesis modes: definition == pencil, sufficient => definition", 0.0);
    if r.detail.is_empty() {
        r.detail = format!("{suff_fail_def_pass} shifts where sufficient failed but definition passed");
    }
    Ok(r)
}

/// `2 cos a cos b - (na/nb + nb/na) sin a sin b` with `a = λ na da`,
/// `b = λ nb db`.
pub fn bilayer_trace(lambda: f64, na: f64, da: f64, nb: f64, db: f64) -> f64 {
    let (a, b) = (lambda * na * da, lambda * nb * db);
    2.0 * a.cos() * b.cos() - (na / nb + nb / na) * a.sin() * b.sin()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn maxwell_check(tol: &Tolerances<f64>) -> Result<CheckResult> {
    let mut w = Worst::new();
    let j = maxwell_j::<f64>();
    let mut expected = linalg::zeros::<f64>(6, 6);
    expected[(0, 4)] = c(0., -1.);
    expected[(1, 3)] = c(0., 1.);
    expected[(3, 1)] = c(0., 1.);
    expected[(4, 0)] = c(0., -1.);
    if j != expected {
        w.fail("assembled J differs from the reference matrix".into());
    }
    let vacuum = MaxwellProblem::eigenfrequency(vec![MaxwellLayer::new(1.0, MaterialTensor::vacuum())], 0.0, 0.0);
    let sys = assemble(&vacuum, tol)?;
    if sys.splitting.n1() != 4 {
        w.fail(format!("rank J = {}", sys.splitting.n1()));
    }
    w.observe(max_abs(&(sys.splitting.j_plus() + &j)));
    let scan = band_scan(&sys.coeffs, &sys.splitting, 0.1, 5.0, 100, tol)?;
    if scan.samples.iter().any(|s| s.count() != Some(4)) || !scan.edges.is_empty() {
        w.fail("vacuum scan is not fully propagating".into());
    }
    let (na, da, nb, db) = (1.0, 2.0 / 3.0, 2.0, 1.0 / 3.0);
    let qw = assemble(&MaxwellProblem::bilayer(na, da, nb, db, 0.0, 0.0), tol)?;
    let scan = band_scan(&qw.coeffs, &qw.splitting, 1.0, 3.5, 51, tol)?;
    let g = |l: f64| bilayer_trace(l, na, da, nb, db) + 2.0;
    let centre = 3.0 * std::f64::consts::PI / 4.0;
    let lower = bisect(g, 1.0, centre);
    let upper = bisect(g, centre, 3.5);
    let edges: Vec<f64> = scan.edges.iter().map(|e| e.lambda).collect();
    if edges.len() != 2 {
        w.fail(format!("quarter-wave scan found {} edges in [1, 3.5]", edges.len()));
    } else {
        w.observe((edges[0] - lower).abs());
        w.observe((edges[1] - upper).abs());
    }
    Ok(w.finish("Maxwell: J, rank, J+ = -J, vacuum bands, quarter-wave gap edges", 1e-8))
}

fn splitting_independence(opts: &SelftestOptions, tol: &Tolerances<f64>) -> Result<CheckResult> {
    let mut w = Worst::new();
    let mut rng = random::rng(opts.seed ^ 0x8);
    let mut done = 0;
    while done < opts.splitting_cases {
        let sys = random::system(&mut rng, 8, 3, tol)?;
        let Some(lambda) = random::regular_real_lambda(&mut rng, &sys, -5.0, 5.0, 0.1) else {
            continue;
        };
        let v2 = random::rotated_basis(&mut rng, &sys.splitting);
        let s2 = CanonicalSplitting::from_basis(&sys.j, v2, tol)?;
        let f1 = floquet(&monodromy_at(&sys.coeffs, &sys.splitting, c(lambda, 0.), tol)?, 1.0, tol)?;
        let f2 = floquet(&monodromy_at(&sys.coeffs, &s2, c(lambda, 0.), tol)?, 1.0, tol)?;
        w.observe(multiset_distance(&f1.values(), &f2.values()));
        for z0 in [c(0., 1.), c(1.5, -0.5), c(0., 0.)] {
            let a = check_index1(&sys.coeffs, &sys.splitting, z0, Mode::Definition, tol)?.passed;
            let b = check_index1(&sys.coeffs, &s2, z0, Mode::Definition, tol)?.passed;
            if a != b {
                w.fail(format!("verdict at {z0} depends on the basis"));
            }
        }
        done += 1;
    }
    Ok(w.finish("basis independence of multipliers and verdicts", 1e-9))
}

/// Runs the whole suite.
pub fn run(opts: &SelftestOptions, tol: &Tolerances<f64>) -> Result<SelftestReport> {
    let suite = random_suite(opts, tol)?;
    let (unit, recip) = unitarity_and_reciprocity(&suite, tol)?;
    let (oracle, residual) = oracle_checks(&suite, opts, tol)?;
    let checks = vec![
        example_check(opts, tol)?,
        generalized_example_check(opts, tol)?,
        unit,
        recip,
        oracle,
        residual,
        mode_equivalence(opts, tol)?,
        maxwell_check(tol)?,
        splitting_independence(opts, tol)?,
    ];
    Ok(SelftestReport { checks })
}
