use num_complex::Complex64;
use pmqkd::qcore::random::{random_density, random_hermitian, random_pure};
use pmqkd::qcore::{
    binary_entropy, conditional_entropy, eig_hermitian, matrix_sqrt, partial_trace, pinch, relative_entropy, tensor,
    von_neumann_entropy, CMatrix, HermitianMatrix, QError, SystemLayout,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn herm(rows: &[&[(f64, f64)]]) -> HermitianMatrix {
    let n = rows.len();
    let data = rows.iter().flat_map(|r| r.iter().map(|&(a, b)| c(a, b))).collect();
    HermitianMatrix::new(CMatrix::from_vec(n, n, data).unwrap()).unwrap()
}

fn layout(d: &[usize]) -> SystemLayout {
    SystemLayout::new(d.to_vec()).unwrap()
}

#[test]
fn tensor_of_identities_and_basis_projectors() {
    let i2 = HermitianMatrix::identity(2);
    assert_eq!(tensor(&i2, &i2).unwrap(), HermitianMatrix::identity(4));
    let p0 = HermitianMatrix::projector(&[c(1.0, 0.0), c(0.0, 0.0)]);
    let p1 = HermitianMatrix::projector(&[c(0.0, 0.0), c(1.0, 0.0)]);
    let p01 = tensor(&p0, &p1).unwrap();
    let expected = HermitianMatrix::from_real_diagonal(&[0.0, 1.0, 0.0, 0.0]);
    assert!(p01.max_abs_diff(&expected) < 1e-15);
}

#[test]
fn tensor_trace_factorises() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(2, &mut rng);
        let t = tensor(&a, &b).unwrap().trace();
        assert!((t - a.trace() * b.trace()).abs() < 1e-12);
    }
}

#[test]
fn tensor_guard_rejects_oversized_products() {
    let a = HermitianMatrix::identity(32);
    assert!(matches!(tensor(&a, &a), Err(QError::DimensionTooLarge { dim: 1024 })));
}

#[test]
fn partial_trace_product_and_entangled_cases() {
    let p0 = HermitianMatrix::projector(&[c(1.0, 0.0), c(0.0, 0.0)]);
    let mixed = HermitianMatrix::identity(2).scale(0.5);
    let prod = tensor(&p0, &mixed).unwrap();
    let l = layout(&[2, 2]);
    assert!(partial_trace(&prod, &l, &[0]).unwrap().max_abs_diff(&p0) < 1e-15);

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = HermitianMatrix::projector(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
    assert!(partial_trace(&bell, &l, &[1]).unwrap().max_abs_diff(&mixed) < 1e-15);
}

/// Oracle: explicit index contraction for a 3-factor layout.
fn contract_middle(m: &HermitianMatrix, d: [usize; 3]) -> CMatrix {
    let [a, b, cc] = d;
    let dk = a * cc;
    CMatrix::from_fn(dk, dk, |r, s| {
        let (i1, k1) = (r / cc, r % cc);
        let (i2, k2) = (s / cc, s % cc);
        (0..b).map(|j| m[((i1 * b + j) * cc + k1, (i2 * b + j) * cc + k2)]).sum()
    })
}

#[test]
fn partial_trace_matches_index_contraction_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let m = random_density(12, 12, &mut rng);
        let got = partial_trace(&m, &layout(&[2, 3, 2]), &[0, 2]).unwrap();
        assert!(got.as_matrix().max_abs_diff(&contract_middle(&m, [2, 3, 2])) < 1e-13);
    }
    let rho = random_density(2, 2, &mut rng);
    let sigma = random_hermitian(3, &mut rng);
    let prod = tensor(&rho, &sigma).unwrap();
    let reduced = partial_trace(&prod, &layout(&[2, 3]), &[0]).unwrap();
    assert!(reduced.max_abs_diff(&rho.scale(sigma.trace())) < 1e-12);
}

#[test]
fn partial_trace_rejects_bad_layout() {
    let m = HermitianMatrix::identity(4);
    assert!(matches!(partial_trace(&m, &layout(&[3, 2]), &[0]), Err(QError::LayoutMismatch { .. })));
    assert!(matches!(partial_trace(&m, &layout(&[2, 2]), &[5]), Err(QError::BadFactor { .. })));
}

#[test]
fn eig_known_spectra() {
    let d = HermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
    let e = eig_hermitian(&d);
    assert_eq!(e.values, vec![1.0, 2.0]);
    assert!(e.vectors.max_abs_diff(&CMatrix::identity(2)) < 1e-15);

    let x = herm(&[&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)]]);
    let e = eig_hermitian(&x);
    assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);

    let y = herm(&[&[(0.0, 0.0), (0.0, -1.0)], &[(0.0, 1.0), (0.0, 0.0)]]);
    let e = eig_hermitian(&y);
    assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
}

fn reconstruction_residual(m: &HermitianMatrix) -> f64 {
    let e = eig_hermitian(m);
    let rebuilt = e.map(|x| x);
    let unitary_defect = e.vectors.adjoint().matmul(&e.vectors).max_abs_diff(&CMatrix::identity(m.dim()));
    rebuilt.as_matrix().sub(m.as_matrix()).norm().max(unitary_defect * m.as_matrix().norm())
}

#[test]
fn eig_reconstructs_random_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dim in [2, 3, 8, 17, 40] {
        for _ in 0..5 {
            let m = random_hermitian(dim, &mut rng);
            let norm = m.as_matrix().norm();
            assert!(reconstruction_residual(&m) <= 1e-10 * norm, "dim {dim}");
            let e = eig_hermitian(&m);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

#[test]
fn eig_handles_degenerate_and_rank_deficient_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rho = random_density(8, 2, &mut rng);
    assert!(reconstruction_residual(&rho) < 1e-12);
    let e = eig_hermitian(&rho);
    assert!(e.values[..6].iter().all(|v| v.abs() < 1e-13));
    assert!(reconstruction_residual(&HermitianMatrix::identity(6)) < 1e-15);
}

#[test]
fn sqrt_examples() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = HermitianMatrix::projector(&[c(s, 0.0), c(s, 0.0)]);
    assert!(matrix_sqrt(&plus).unwrap().max_abs_diff(&plus) < 1e-14);
    let four = HermitianMatrix::identity(2).scale(4.0);
    assert!(matrix_sqrt(&four).unwrap().max_abs_diff(&HermitianMatrix::identity(2).scale(2.0)) < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let m = random_density(4, 4, &mut rng).scale(3.0);
        let r = matrix_sqrt(&m).unwrap();
        let sq = r.as_matrix().matmul(r.as_matrix());
        assert!(sq.max_abs_diff(m.as_matrix()) < 1e-9);
    }
    let neg = HermitianMatrix::from_real_diagonal(&[1.0, -1e-3]);
    assert!(matches!(matrix_sqrt(&neg), Err(QError::NotPsd { .. })));
}

/// Oracle: D(ρ‖σ) from both spectral decompositions, written out as a double
/// sum Σ_ij |⟨r_i|s_j⟩|² λ_i (log λ_i − log μ_j).
fn relative_entropy_oracle(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> f64 {
    let er = eig_hermitian(rho);
    let es = eig_hermitian(sigma);
    let n = rho.dim();
    let mut total = 0.0;
    for i in 0..n {
        if er.values[i] <= 1e-300 {
            continue;
        }
        for j in 0..n {
            let overlap: Complex64 = (0..n).map(|k| er.vectors[(k, i)].conj() * es.vectors[(k, j)]).sum();
            total += overlap.norm_sqr() * er.values[i] * (er.values[i].log2() - es.values[j].log2());
        }
    }
    total
}

#[test]
fn relative_entropy_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rho = random_density(4, 4, &mut rng);
    assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-12);

    let p0 = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
    let mixed = HermitianMatrix::identity(2).scale(0.5);
    assert!((relative_entropy(&p0, &mixed).unwrap() - 1.0).abs() < 1e-14);
    assert!(matches!(relative_entropy(&mixed, &p0), Err(QError::SupportViolation { .. })));

    for _ in 0..20 {
        let rho = random_density(4, 4, &mut rng);
        let sigma = random_density(4, 4, &mut rng);
        let got = relative_entropy(&rho, &sigma).unwrap();
        assert!((got - relative_entropy_oracle(&rho, &sigma)).abs() < 1e-9);
    }
}

#[test]
fn conditional_entropy_examples() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = HermitianMatrix::projector(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
    let l = layout(&[2, 2]);
    assert!((conditional_entropy(&bell, &l, &[0], &[1]).unwrap() + 1.0).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random_density(2, 2, &mut rng);
    let b = random_density(3, 3, &mut rng);
    let prod = tensor(&a, &b).unwrap();
    let h = conditional_entropy(&prod, &layout(&[2, 3]), &[0], &[1]).unwrap();
    assert!((h - von_neumann_entropy(&a).unwrap()).abs() < 1e-12);
}

#[test]
fn pinch_examples() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = HermitianMatrix::projector(&[c(s, 0.0), c(s, 0.0)]);
    let pinched = pinch(&plus, &layout(&[2]), 0).unwrap();
    assert!(pinched.max_abs_diff(&HermitianMatrix::identity(2).scale(0.5)) < 1e-15);

    let diag = HermitianMatrix::from_real_diagonal(&[0.1, 0.2, 0.3, 0.4]);
    assert_eq!(pinch(&diag, &layout(&[2, 2]), 1).unwrap(), diag);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = random_density(8, 8, &mut rng);
    let l = layout(&[2, 2, 2]);
    let once = pinch(&m, &l, 1).unwrap();
    assert_eq!(pinch(&once, &l, 1).unwrap(), once);
    assert!((once.trace() - m.trace()).abs() < 1e-14);
}

#[test]
fn binary_entropy_examples() {
    assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
    assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
    assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
    // Oracle: h(1/1.05) = log2(1.05) + (0.05/1.05) log2(20), evaluated by hand
    // as 0.07038932789139801 + 0.047619047619047616 * 4.321928094887363.
    let expected = 1.05f64.log2() + (0.05 / 1.05) * 20f64.log2();
    assert!((binary_entropy(1.0 / 1.05).unwrap() - expected).abs() < 1e-15);
    assert!((expected - 0.276195).abs() < 5e-7);
    assert!(binary_entropy(1.5).is_err());
}

#[test]
fn hermitian_construction_rejects_asymmetry() {
    let bad = CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
    assert!(matches!(HermitianMatrix::new(bad), Err(QError::NotHermitian { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_entropy_is_nonnegative(seed in any::<u64>(), dim in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(dim, dim, &mut rng);
        let sigma = random_density(dim, dim, &mut rng);
        let d = relative_entropy(&rho, &sigma).unwrap();
        prop_assert!(d >= -1e-9);
        let trace_distance: f64 = eig_hermitian(&rho.sub(&sigma)).values.iter().map(|v| v.abs()).sum();
        if d.abs() < 1e-12 {
            prop_assert!(trace_distance <= 1e-8);
        }
    }

    #[test]
    fn pinching_never_lowers_entropy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(8, 3, &mut rng);
        let l = layout(&[2, 4]);
        for f in 0..2 {
            let p = pinch(&rho, &l, f).unwrap();
            prop_assert!(von_neumann_entropy(&p).unwrap() >= von_neumann_entropy(&rho).unwrap() - 1e-9);
        }
    }

    #[test]
    fn partial_trace_is_linear_and_trace_preserving(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_hermitian(6, &mut rng);
        let b = random_hermitian(6, &mut rng);
        let l = layout(&[3, 2]);
        let mix = a.mix(&b, t);
        let lhs = partial_trace(&mix, &l, &[1]).unwrap();
        let rhs = partial_trace(&a, &l, &[1]).unwrap().mix(&partial_trace(&b, &l, &[1]).unwrap(), t);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        prop_assert!((lhs.trace() - mix.trace()).abs() < 1e-12);
    }

    #[test]
    fn pure_states_have_zero_entropy(seed in any::<u64>(), dim in 1usize..=16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_pure(dim, &mut rng);
        prop_assert!(von_neumann_entropy(&HermitianMatrix::projector(&v)).unwrap().abs() < 1e-10);
    }
}
