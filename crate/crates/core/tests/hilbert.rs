use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use photocount_core::hilbert::*;
use photocount_core::CoreError;
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn embed_qubit_into_three_mode_space() {
    let space = Arc::new(HilbertSpace::new([("s", 3), ("yn", 2), ("mp", 2)]).unwrap());
    let z = embed(&pauli_z(), "mp", &space).unwrap();
    assert_eq!(z.dim(), 12);
    for i in 0..12 {
        for j in 0..12 {
            let expect = if i == j { if i % 2 == 0 { -1.0 } else { 1.0 } } else { 0.0 };
            assert_eq!(z.matrix()[(i, j)], c(expect));
        }
    }
    let id = embed(&identity(2).unwrap(), "yn", &space).unwrap();
    assert_eq!(id.max_abs_diff(&Operator::identity(space.clone())), 0.0);
}

#[test]
fn embedded_operators_on_different_modes_commute() {
    let space = Arc::new(HilbertSpace::new([("s", 4), ("mp", 2)]).unwrap());
    let n = embed(&number(4).unwrap(), "s", &space).unwrap();
    let z = embed(&pauli_z(), "mp", &space).unwrap();
    let comm = n.commutator(&z).unwrap();
    assert!(comm.matrix().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn embed_rejects_bad_input() {
    let space = Arc::new(HilbertSpace::new([("s", 4), ("mp", 2)]).unwrap());
    assert!(matches!(embed(&pauli_z(), "nope", &space), Err(CoreError::UnknownLabel(_))));
    assert!(matches!(embed(&pauli_z(), "s", &space), Err(CoreError::DimensionMismatch { .. })));
    assert!(matches!(HilbertSpace::new([("s", 4), ("s", 2)]), Err(CoreError::DuplicateLabel(_))));
    assert!(matches!(HilbertSpace::new([("s", 1)]), Err(CoreError::InvalidDimension(1))));
}

#[test]
fn displacement_of_zero_is_identity() {
    let d = displacement(c(0.0), 10).unwrap();
    assert!(d.max_abs_diff(&identity(10).unwrap()) < 1e-14);
}

#[test]
fn displaced_vacuum_has_coherent_amplitudes() {
    let beta = c(1.0);
    let d = displacement(beta, 25).unwrap();
    for n in 0..25 {
        let expect = (-0.5f64).exp() / factorial(n).sqrt();
        assert!((d.matrix()[(n, 0)] - c(expect)).norm() < 1e-8, "n = {n}");
    }
}

#[test]
fn displacement_inverse() {
    let beta = C64::new(0.8, -1.1);
    let dim = 25;
    let p = displacement(beta, dim).unwrap().dot(&displacement(-beta, dim).unwrap()).unwrap();
    assert!(p.max_abs_diff(&identity(dim).unwrap()) < 1e-8);
}

#[test]
fn displacement_guard_reports_defect() {
    match displacement(c(3.0), 10) {
        Err(CoreError::Truncation { alpha_sq, limit, defect }) => {
            assert!((alpha_sq - 9.0).abs() < 1e-12);
            assert_eq!(limit, 2.5);
            assert!(defect > 1e-3);
        }
        other => panic!("expected truncation error, got {other:?}"),
    }
}

#[test]
fn parity_values() {
    let p2 = parity(2).unwrap();
    assert_eq!(p2.matrix()[(0, 0)], c(1.0));
    assert_eq!(p2.matrix()[(1, 1)], c(-1.0));
    let vac = DensityMatrix::fock(0, 5).unwrap();
    assert_eq!(vac.expect(&parity(5).unwrap()).unwrap(), c(1.0));
    let coh = coherent_state(c(1.0), 25).unwrap();
    let direct: f64 = (0..60).map(|n| (-1f64).powi(n) * (-1f64).exp() / factorial(n as usize)).sum();
    let val = coh.expect(&parity(25).unwrap()).unwrap().re;
    assert!((val - direct).abs() < 1e-6);
    assert!((val - 0.1353).abs() < 1e-4);
}

#[test]
fn canonical_states() {
    let vac = coherent_state(c(0.0), 6).unwrap();
    assert!((vac.element(0, 0) - c(1.0)).norm() < 1e-15);
    let th = thermal_state(0.03, 15).unwrap();
    assert!((th.element(0, 0).re - 1.0 / 1.03).abs() < 1e-9);
    let th0 = thermal_state(0.0, 6).unwrap();
    assert_eq!(th0.element(0, 0), c(1.0));
    assert!(thermal_state(-0.1, 6).is_err());
    assert!(coherent_state(c(2.0), 10).is_err());
}

#[test]
fn density_matrix_validation() {
    let space = Arc::new(HilbertSpace::single("s", 2).unwrap());
    let bad_trace = Array2::from_diag(&ndarray::arr1(&[c(0.7), c(0.7)]));
    assert!(DensityMatrix::new(space.clone(), bad_trace).is_err());
    let negative = Array2::from_diag(&ndarray::arr1(&[c(1.2), c(-0.2)]));
    assert!(DensityMatrix::new(space.clone(), negative).is_err());
    let mut nonherm = Array2::from_diag(&ndarray::arr1(&[c(0.5), c(0.5)]));
    nonherm[(0, 1)] = c(0.1);
    assert!(DensityMatrix::new(space, nonherm).is_err());
}

#[test]
fn qubit_conventions() {
    // sigma_- = (sigma_x - i sigma_y)/2 and <sigma_y> = -2 Im <sigma_->.
    let sm = sigma_minus().matrix().clone();
    let combo = (pauli_x().matrix() - &(pauli_y().matrix() * C64::new(0.0, 1.0))) * c(0.5);
    assert!(max_abs_diff(&sm, &combo) < 1e-15);
    assert_eq!(pauli_z().matrix()[(0, 0)], c(-1.0));
    let ket = [c(1.0), C64::new(0.0, 1.0)];
    let space = Arc::new(HilbertSpace::single("q", 2).unwrap());
    let rho = DensityMatrix::pure(space, &ket).unwrap();
    let sy = rho.expect(&pauli_y()).unwrap().re;
    let smv = rho.expect(&sigma_minus()).unwrap();
    assert!((sy + 2.0 * smv.im).abs() < 1e-15);
}

fn arb_complex() -> impl Strategy<Value = C64> {
    (-1.2f64..1.2, -1.2f64..1.2).prop_map(|(a, b)| C64::new(a, b))
}

proptest! {
    #[test]
    fn truncated_commutator_structure(dim in 2usize..30) {
        let a = annihilation(dim).unwrap();
        let comm = a.commutator(&a.adjoint()).unwrap();
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i != j { 0.0 } else if i + 1 == dim { 1.0 - dim as f64 } else { 1.0 };
                prop_assert!((comm.matrix()[(i, j)] - c(expect)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn displacement_group_inverse(beta in arb_complex(), dim in 8usize..26) {
        prop_assume!(beta.norm_sqr() <= dim as f64 / 4.0);
        let p = displacement(beta, dim).unwrap().dot(&displacement(-beta, dim).unwrap()).unwrap();
        prop_assert!(p.max_abs_diff(&identity(dim).unwrap()) < 1e-8);
    }

    #[test]
    fn constructed_states_are_valid(beta in arb_complex(), n_th in 0.0f64..2.0, dim in 8usize..20) {
        prop_assume!(beta.norm_sqr() <= dim as f64 / 4.0);
        prop_assert!(coherent_state(beta, dim).unwrap().diagnostics().is_valid());
        prop_assert!(thermal_state(n_th, dim).unwrap().diagnostics().is_valid());
    }

    #[test]
    fn embed_preserves_spectrum(d1 in 2usize..5, d2 in 2usize..4, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let space = Arc::new(HilbertSpace::new([("a", d1), ("b", 2), ("c", d2)]).unwrap());
        let op = pauli_z().scale_re(x).add(&pauli_x().scale_re(y)).unwrap();
        let e = embed(&op, "b", &space).unwrap();
        let single = op.hermitian_eigenvalues();
        let full = e.hermitian_eigenvalues();
        let mult = d1 * d2;
        prop_assert_eq!(full.len(), 2 * mult);
        for (k, v) in full.iter().enumerate() {
            prop_assert!((v - single[k / mult]).abs() < 1e-10);
        }
    }
}
