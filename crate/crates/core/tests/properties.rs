use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use canondae::canonical::{build_splitting, moore_penrose_defects, CanonicalSplitting, SkewHermitian};
use canondae::coefficients::{Layer, LayeredCoefficients};
use canondae::hypotheses::{check_index1, Mode};
use canondae::maxwell::{assemble, MaterialTensor, MaxwellLayer, MaxwellProblem};
use canondae::propagation::{monodromy, trace_integral, transfer};
use canondae::random;
use canondae::reduction::{reduce_at, schur, SchurSide};
use canondae::spectral::{band_scan, point_spectrum, point_spectrum_candidates, translate_family};
use canondae::{Matrix, Tolerances};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn min_eigenvalue(m: &Matrix) -> f64 {
    let h = (m + m.adjoint()) * c(0.5, 0.);
    h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn splitting_and_pseudoinverse(seed in any::<u64>(), n in 2usize..=12, deficiency in 0usize..6) {
        let tol = Tolerances::default();
        let mut rng = random::rng(seed);
        let rank = n.saturating_sub(deficiency).max(1);
        let j = SkewHermitian::new(random::skew_hermitian(&mut rng, n, rank), &tol).unwrap();
        let s = build_splitting(&j, &tol).unwrap();
        prop_assert_eq!(s.n1(), rank);
        let v = s.v();
        prop_assert!(max_abs(&(v.adjoint() * v - DMatrix::identity(n, n))) <= 1e-12);
        let mut expected = DMatrix::zeros(n, n);
        expected.view_mut((0, 0), (rank, rank)).copy_from(s.j11());
        prop_assert!(max_abs(&(v.adjoint() * j.matrix() * v - expected)) <= 1e-10);
        for d in moore_penrose_defects(j.matrix(), s.j_plus()) {
            prop_assert!(d <= 1e-10, "Moore-Penrose defect {d:e}");
        }
        let p = s.projection();
        prop_assert!(max_abs(&(p * p - p)) <= 1e-12);
        prop_assert!(max_abs(&(p - p.adjoint())) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn weight_schur_complements_in_loewner_order(seed in any::<u64>(), n in 2usize..=10, split in 1usize..9) {
        let tol = Tolerances::default();
        let mut rng = random::rng(seed);
        let n1 = split.min(n - 1);
        let w = random::positive_definite(&mut rng, n, 0.1, 3.0);
        let j = SkewHermitian::new(random::skew_hermitian(&mut rng, n, n1), &tol).unwrap();
        let s = build_splitting(&j, &tol).unwrap();
        let blocks = s.partition(&w).unwrap();
        let w_22 = schur(&blocks, SchurSide::Block22, &tol).unwrap().value;
        let w_11 = schur(&blocks, SchurSide::Block11, &tol).unwrap().value;
        prop_assert!(min_eigenvalue(&w_22) >= -1e-10);
        prop_assert!(min_eigenvalue(&(&blocks.b11 - &w_22)) >= -1e-10);
        prop_assert!(min_eigenvalue(&w_11) >= -1e-10);
        prop_assert!(min_eigenvalue(&(&blocks.b22 - &w_11)) >= -1e-10);
    }
}

fn random_case(seed: u64) -> Option<(random::RandomSystem, f64)> {
    let tol = Tolerances::default();
    let mut rng = random::rng(seed);
    let sys = random::system(&mut rng, 8, 5, &tol).unwrap();
    let lambda = random::regular_real_lambda(&mut rng, &sys, -5.0, 5.0, 0.1)?;
    Some((sys, lambda))
}

#[test]
fn reduced_blocks_are_hermitian_and_recover_the_normal_part() {
    let tol = Tolerances::default();
    for seed in 0..50 {
        let Some((sys, lambda)) = random_case(seed) else { continue };
        let gen = reduce_at(&sys.coeffs, &sys.splitting, c(lambda, 0.), &tol).unwrap();
        for (k, layer) in gen.layers.iter().enumerate() {
            let s = &layer.schur;
            assert!(max_abs(&(s - s.adjoint())) <= 1e-12, "seed {seed} layer {k}");
            let a = sys
                .splitting
                .partition(&sys.coeffs.layers()[k].pencil(c(lambda, 0.)))
                .unwrap();
            if a.b22.nrows() > 0 {
                let defect = max_abs(&(&a.b22 * &layer.recovery + &a.b21));
                assert!(defect <= 1e-12 * max_abs(&a.b21).max(1.0), "seed {seed}: {defect:e}");
            }
        }
    }
}

#[test]
fn pencil_is_hermitian_for_real_shift_and_affine_in_the_shift() {
    let tol = Tolerances::default();
    let mut rng = random::rng(99);
    for _ in 0..20 {
        let sys = random::system(&mut rng, 8, 4, &tol).unwrap();
        let (z1, z2) = (c(rng.gen_range(-3.0..3.0), 0.), c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)));
        let p1 = sys.coeffs.shift_pencil(&sys.splitting, z1).unwrap();
        let p2 = sys.coeffs.shift_pencil(&sys.splitting, z2).unwrap();
        for (a, b) in p1.layers.iter().zip(&p2.layers) {
            let a1 = a.a.join();
            assert!(max_abs(&(&a1 - a1.adjoint())) <= 1e-12);
            let predicted = &a1 - a.w.join() * (z2 - z1);
            assert!(max_abs(&(predicted - b.a.join())) <= 1e-12);
        }
    }
}

#[test]
fn transfer_matrices_compose_and_satisfy_liouville() {
    let tol = Tolerances::default();
    let mut rng = random::rng(5);
    let mut seed = 100;
    let mut checked = 0;
    while checked < 20 {
        seed += 1;
        let Some((sys, lambda)) = random_case(seed) else { continue };
        let gen = reduce_at(&sys.coeffs, &sys.splitting, c(lambda, 0.), &tol).unwrap();
        let m = monodromy(&gen).unwrap().m;
        let d = sys.coeffs.period();
        let scale = max_abs(&m).max(1.0);
        for _ in 0..20 {
            let s: f64 = rng.gen_range(0.0..d);
            let left = transfer(&gen, 0.0, s).unwrap().phi;
            let right = transfer(&gen, s, d).unwrap().phi;
            assert!(max_abs(&(right * left - &m)) <= 1e-10 * scale, "seed {seed}, s = {s}");
        }
        let det = m.determinant();
        let expected = trace_integral(&gen).exp();
        assert!((det - expected).norm() <= 1e-9 * expected.norm(), "seed {seed}");
        checked += 1;
    }
}

#[test]
fn definition_and_pencil_modes_agree_when_hypotheses_fail() {
    // Stacks with a non-Hermitian H whose 22 block is made singular at z0.
    let tol = Tolerances::default();
    let mut rng = random::rng(17);
    for _ in 0..30 {
        let sys = random::system(&mut rng, 6, 3, &tol).unwrap();
        if sys.splitting.n2() == 0 {
            continue;
        }
        let z0 = c(rng.gen_range(-2.0..2.0), rng.gen_range(0.5..2.0));
        let (v, n1) = (sys.splitting.v().clone(), sys.splitting.n1());
        let layers: Vec<Layer<f64>> = sys
            .coeffs
            .layers()
            .iter()
            .map(|l| {
                let mut hv = v.adjoint() * l.h() * &v;
                let wv = v.adjoint() * l.w() * &v;
                let n = hv.nrows();
                let target = wv.view((n1, n1), (n - n1, n - n1)) * z0;
                hv.view_mut((n1, n1), (n - n1, n - n1)).copy_from(&target);
                Layer::new(l.thickness(), &v * hv * v.adjoint(), l.w().clone()).unwrap()
            })
            .collect();
        let coeffs = LayeredCoefficients::new(layers).unwrap();
        let def = check_index1(&coeffs, &sys.splitting, z0, Mode::Definition, &tol).unwrap();
        let pen = check_index1(&coeffs, &sys.splitting, z0, Mode::PencilEquivalent, &tol).unwrap();
        let suf = check_index1(&coeffs, &sys.splitting, z0, Mode::Sufficient, &tol).unwrap();
        assert!(!def.passed);
        assert_eq!(def.passed, pen.passed);
        assert!(!suf.passed || def.passed);
    }
}

/// Stack whose `H` and `W` are block diagonal in the splitting basis, so
/// every generalized eigenvalue of `(H22, W22)` is an eigenvalue of
/// infinite multiplicity.
fn decoupled_stack(seed: u64) -> (LayeredCoefficients<f64>, CanonicalSplitting<f64>) {
    let tol = Tolerances::default();
    let mut rng = random::rng(seed);
    let n = rng.gen_range(3..=7);
    let n1 = rng.gen_range(1..n);
    let j = SkewHermitian::new(random::skew_hermitian(&mut rng, n, n1), &tol).unwrap();
    let s = build_splitting(&j, &tol).unwrap();
    let v = s.v().clone();
    let blockdiag = |a: Matrix, b: Matrix| {
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (n1, n1)).copy_from(&a);
        m.view_mut((n1, n1), (n - n1, n - n1)).copy_from(&b);
        &v * m * v.adjoint()
    };
    let h11 = random::hermitian(&mut rng, n1, 1.0);
    let h22 = random::hermitian(&mut rng, n - n1, 1.0);
    let w11 = random::positive_definite(&mut rng, n1, 0.5, 1.5);
    let w22 = random::positive_definite(&mut rng, n - n1, 0.5, 1.5);
    let h = blockdiag(h11, h22);
    let w = blockdiag(w11, w22);
    let coeffs = LayeredCoefficients::new(vec![Layer::new(1.0, h, w).unwrap()]).unwrap();
    (coeffs, s)
}

#[test]
fn certified_point_spectrum_has_independent_translates() {
    let tol = Tolerances::default();
    let mut certified = 0;
    for seed in 0..10 {
        let (coeffs, s) = decoupled_stack(seed);
        let candidates = point_spectrum_candidates(&coeffs, &s, &tol).unwrap();
        assert_eq!(candidates.len(), s.n2(), "seed {seed}");
        for lambda in candidates {
            let finding = point_spectrum(&coeffs, &s, lambda, &tol).unwrap();
            assert!(finding.certified);
            let layer = &coeffs.layers()[0];
            let scale = 1.0 + layer.h().norm() + lambda.abs() * layer.w().norm();
            let check = translate_family(&coeffs, &s, &finding, 3, &tol).unwrap();
            assert!(check.independent, "seed {seed}");
            assert!(check.max_residual <= 1e-10 * scale, "seed {seed}: {:e}", check.max_residual);
            certified += 1;
        }
    }
    assert!(certified >= 10);
}

fn quarter_wave_edges(kappa: f64) -> Vec<f64> {
    let tol = Tolerances::default();
    let iso = |n: f64| {
        let eps = DMatrix::identity(3, 3) * c(n * n, 0.);
        let mu = DMatrix::identity(3, 3);
        let xi = DMatrix::identity(3, 3) * c(0., kappa);
        MaterialTensor::new(eps, mu, Some(xi)).unwrap()
    };
    let problem = MaxwellProblem::eigenfrequency(
        vec![MaxwellLayer::new(2.0 / 3.0, iso(1.0)), MaxwellLayer::new(1.0 / 3.0, iso(2.0))],
        0.0,
        0.0,
    );
    let sys = assemble(&problem, &tol).unwrap();
    let scan = band_scan(&sys.coeffs, &sys.splitting, 0.5, 3.5, 61, &tol).unwrap();
    scan.edges.iter().map(|e| e.lambda).collect()
}

#[test]
fn weak_biisotropic_coupling_moves_band_edges_continuously() {
    let base = quarter_wave_edges(0.0);
    let perturbed = quarter_wave_edges(1e-6);
    assert_eq!(base.len(), 2);
    assert_eq!(perturbed.len(), base.len());
    for (a, b) in base.iter().zip(&perturbed) {
        assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
    }
}

#[test]
fn single_precision_example() {
    type C32 = num_complex::Complex<f32>;
    let tol = Tolerances32::default();
    let mut j = DMatrix::<C32>::zeros(2, 2);
    j[(0, 0)] = C32::new(0.0, 1.0);
    let j = SkewHermitian::new(j, &tol).unwrap();
    let s = build_splitting(&j, &tol).unwrap();
    let coeffs =
        LayeredCoefficients::new(vec![Layer::new(1.0f32, DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap()])
            .unwrap();
    assert!(!check_index1(&coeffs, &s, C32::new(0.0, 0.0), Mode::Definition, &tol).unwrap().passed);
    assert!(check_index1(&coeffs, &s, C32::new(0.0, 1.0), Mode::Definition, &tol).unwrap().passed);
    let gen = reduce_at(&coeffs, &s, C32::new(1.5, 0.0), &tol).unwrap();
    let m = monodromy(&gen).unwrap().m;
    assert!((m[(0, 0)] - C32::new(0.0, -1.5).exp()).norm() < 1e-5);
    assert!(point_spectrum(&coeffs, &s, 0.0f32, &tol).unwrap().certified);
}

type Tolerances32 = canondae::scalar::Tolerances<f32>;
