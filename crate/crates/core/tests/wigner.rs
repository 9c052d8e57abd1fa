use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use photocount_core::hilbert::{coherent_state, displacement, parity, thermal_state, DensityMatrix, HilbertSpace};
use photocount_core::wigner::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frobenius(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn pad(rho: &Array2<C64>, dim: usize) -> Array2<C64> {
    Array2::from_shape_fn((dim, dim), |(i, j)| if i < rho.nrows() && j < rho.ncols() { rho[(i, j)] } else { C64::new(0.0, 0.0) })
}

fn ket_state(ket: &[C64]) -> DensityMatrix {
    let space = Arc::new(HilbertSpace::single("s", ket.len()).unwrap());
    DensityMatrix::pure(space, ket).unwrap()
}

#[test]
fn vacuum_and_fock_one_at_origin() {
    let vac = DensityMatrix::fock(0, 8).unwrap();
    assert!((wigner_point(vac.matrix(), C64::new(0.0, 0.0)) - 2.0 / PI).abs() < 1e-14);
    let one = DensityMatrix::fock(1, 8).unwrap();
    assert!((wigner_point(one.matrix(), C64::new(0.0, 0.0)) + 2.0 / PI).abs() < 1e-14);
}

#[test]
fn coherent_state_is_a_displaced_gaussian() {
    let beta = C64::new(1.1, -0.4);
    let rho = coherent_state(beta, 25).unwrap();
    for &(x, p) in &[(0.0, 0.0), (1.1, -0.4), (0.5, 0.3), (2.0, -1.0)] {
        let a = C64::new(x, p);
        let expect = 2.0 / PI * (-2.0 * (a - beta).norm_sqr()).exp();
        assert!((wigner_point(rho.matrix(), a) - expect).abs() < 1e-9);
    }
}

#[test]
fn displacement_elements_match_truncated_expm_away_from_edge() {
    let beta = C64::new(0.7, 0.5);
    let exact = displacement_elements(beta, 10);
    let d = displacement(beta, 40).unwrap();
    for m in 0..10 {
        for n in 0..10 {
            assert!((exact[(m, n)] - d.matrix()[(m, n)]).norm() < 1e-10);
        }
    }
}

#[test]
fn parity_consistency() {
    let rho = coherent_state(C64::new(0.9, 0.3), 20).unwrap();
    let w = wigner(&rho, &GridSpec::default()).unwrap();
    let par = expectation_from_wigner(&w, Moment::Parity).unwrap();
    let direct = rho.expect(&parity(20).unwrap()).unwrap().re;
    assert!((par - direct).abs() < 1e-8);
}

#[test]
fn hermite_values_and_normalization() {
    assert!((hermite_psi(0, 0.0) - (2.0 / PI).powf(0.25)).abs() < 1e-15);
    assert!((hermite_psi(0, 0.0) - 0.8932).abs() < 1e-4);
    assert_eq!(hermite_psi(1, 0.0), 0.0);
    let h = 1e-3;
    let xs: Vec<f64> = (-8000..=8000).map(|k| k as f64 * h).collect();
    let tabs: Vec<Vec<f64>> = xs.iter().map(|&x| hermite_psi_all(20, x)).collect();
    for n in 0..=20 {
        let s: f64 = tabs.iter().map(|t| t[n] * t[n]).sum::<f64>() * h;
        assert!((s - 1.0).abs() < 1e-8, "n = {n}: {s}");
    }
    // No factorial overflow far past n = 85.
    assert!(hermite_psi(150, 1.3).is_finite());
}

#[test]
fn vacuum_operator_map_closed_form() {
    let spec = GridSpec::default();
    let w00 = wigner_map_nm(0, 0, &spec, &YQuadrature::default()).unwrap();
    for (i, x) in spec.x().iter().enumerate() {
        for (j, p) in spec.p().iter().enumerate() {
            let expect = 2.0 / PI * (-2.0 * (x * x + p * p)).exp();
            assert!((w00[(i, j)] - C64::new(expect, 0.0)).norm() < 1e-8);
        }
    }
}

#[test]
fn operator_maps_hermitian_and_orthonormal() {
    let spec = GridSpec::default();
    let maps = wigner_maps(4, &spec, &YQuadrature::default()).unwrap();
    let (dx, dp) = (spec.dx(), spec.dp());
    for n in 0..=4 {
        for m in 0..=4 {
            let diff = maps[n][m].iter().zip(maps[m][n].iter()).map(|(a, b)| (a - b.conj()).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
    }
    for &(n, m, n2, m2) in &[(0, 0, 0, 0), (1, 2, 1, 2), (3, 1, 3, 1), (1, 2, 2, 1), (0, 3, 1, 2), (4, 4, 2, 2)] {
        let s: C64 = maps[n][m].iter().zip(maps[n2][m2].iter()).map(|(a, b)| a * b.conj()).sum::<C64>() * (PI * dx * dp);
        let expect = if n == n2 && m == m2 { 1.0 } else { 0.0 };
        assert!((s - C64::new(expect, 0.0)).norm() < 1e-3, "({n},{m}) vs ({n2},{m2}): {s}");
    }
}

#[test]
fn displaced_parity_equals_hermite_contraction() {
    let rho = coherent_state(C64::new(0.6, -0.2), 12).unwrap();
    let mut ket = vec![C64::new(0.0, 0.0); 12];
    ket[0] = C64::new(0.6, 0.0);
    ket[3] = C64::new(0.0, 0.8);
    let sup = ket_state(&ket);
    let spec = GridSpec::square(3.0, 31);
    let maps = wigner_maps(11, &spec, &YQuadrature::default()).unwrap();
    for state in [&rho, &sup] {
        let w = wigner(state, &spec).unwrap();
        for i in 0..spec.nx {
            for j in 0..spec.np {
                let mut s = C64::new(0.0, 0.0);
                for n in 0..12 {
                    for m in 0..12 {
                        s += state.element(n, m) * maps[n][m][(i, j)];
                    }
                }
                assert!((s.re - w.w[(i, j)]).abs() < 1e-6 && s.im.abs() < 1e-6);
            }
        }
    }
}

#[test]
fn vacuum_round_trip() {
    let rho = DensityMatrix::fock(0, 11).unwrap();
    let w = wigner(&rho, &GridSpec::default()).unwrap();
    let rec = reconstruct_rho(&w, 10).unwrap();
    assert!(frobenius(rec.rho.matrix(), rho.matrix()) < 1e-3);
    assert!((rec.raw_trace - 1.0).abs() < 1e-3);
}

#[test]
fn coherent_round_trip() {
    let rho = coherent_state(C64::new(1.5, 0.0), 30).unwrap();
    let w = wigner(&rho, &GridSpec::default()).unwrap();
    let rec = reconstruct_rho(&w, 10).unwrap();
    let truth = rho.matrix().slice(ndarray::s![..11, ..11]).to_owned();
    assert!(frobenius(rec.rho.matrix(), &truth) < 1e-2);
}

#[test]
fn superposition_round_trip_keeps_coherence() {
    let s = 1.0 / 2f64.sqrt();
    let mut ket = vec![C64::new(0.0, 0.0); 11];
    ket[0] = C64::new(s, 0.0);
    ket[2] = C64::new(s, 0.0);
    let w = wigner(&ket_state(&ket), &GridSpec::default()).unwrap();
    let rec = reconstruct_rho(&w, 10).unwrap();
    assert!((rec.rho.element(0, 2).norm() - 0.5).abs() < 2e-2);
}

#[test]
fn reconstruction_orientation() {
    // rho_01 carries the phase of the state, not its conjugate.
    let ket = [C64::new(0.8, 0.0), C64::new(0.0, 0.6), C64::new(0.0, 0.0)];
    let w = wigner(&ket_state(&ket), &GridSpec::default()).unwrap();
    let rec = reconstruct_rho(&w, 4).unwrap();
    assert!((rec.rho.element(1, 0) - C64::new(0.0, 0.48)).norm() < 1e-3);
}

#[test]
fn reconstruction_rejects_coarse_or_small_grids() {
    let rho = DensityMatrix::fock(0, 8).unwrap();
    let coarse = wigner(&rho, &GridSpec::square(4.0, 41)).unwrap();
    assert!(reconstruct_rho(&coarse, 6).is_err());
    let small = wigner(&rho, &GridSpec::square(1.0, 21)).unwrap();
    let err = reconstruct_rho(&small, 6).unwrap_err().to_string();
    assert!(err.contains("radius"));
}

#[test]
fn small_grid_is_annotated_not_rejected() {
    let rho = coherent_state(C64::new(2.0, 0.0), 25).unwrap();
    let w = wigner(&rho, &GridSpec::square(1.5, 31)).unwrap();
    assert_eq!(w.annotations.len(), 1);
    let ok = wigner(&rho, &GridSpec::default()).unwrap();
    assert!(ok.annotations.is_empty());
}

#[test]
fn moments_of_coherent_and_thermal_states() {
    let spec = GridSpec::default();
    let coh = wigner(&coherent_state(C64::new(1.0, 0.0), 25).unwrap(), &spec).unwrap();
    assert!((expectation_from_wigner(&coh, Moment::X).unwrap() - 1.0).abs() < 1e-3);
    assert!(expectation_from_wigner(&coh, Moment::P).unwrap().abs() < 1e-3);
    assert!((coh.norm() - 1.0).abs() < 3e-2);
    let th = wigner(&thermal_state(0.3, 25).unwrap(), &spec).unwrap();
    assert!(expectation_from_wigner(&th, Moment::X).unwrap().abs() < 1e-3);
    assert!(expectation_from_wigner(&th, Moment::P).unwrap().abs() < 1e-3);
}

#[test]
fn thermal_spread_follows_quarter_variance_convention() {
    let n_th = 0.03;
    let w = wigner(&thermal_state(n_th, 15).unwrap(), &GridSpec::default()).unwrap();
    let expect = ((2.0 * n_th + 1.0) / 4.0).sqrt();
    assert!((w.geometric_spread() - expect).abs() < 1e-4);
    // Closed form (2/pi)/(2n+1) exp(-2|alpha|^2/(2n+1)).
    let a = C64::new(0.4, -0.3);
    let closed = 2.0 / PI / (2.0 * n_th + 1.0) * (-2.0 * a.norm_sqr() / (2.0 * n_th + 1.0)).exp();
    assert!((wigner_point(thermal_state(n_th, 40).unwrap().matrix(), a) - closed).abs() < 1e-9);
}

#[test]
fn parity_ramsey_signal_limits() {
    let base = ParityRamseyParams { alpha: 0.0, chi_s_yn: 1.42, gamma_2_yn: 1.0 / 27.0, gamma: 0.0, chi_s_s_yn: 0.0 };
    for t in [0.0, 0.3, 1.7] {
        assert!((parity_ramsey_signal(t, &base) - (-base.gamma_2_yn * t).exp()).abs() < 1e-15);
    }
    let p = ParityRamseyParams { alpha: 2.0, gamma_2_yn: 0.0, ..base };
    let t_rev = 1.0 / p.chi_s_yn;
    assert!((t_rev - 0.704).abs() < 0.01);
    assert!((parity_ramsey_signal(t_rev, &p) - 1.0).abs() < 1e-12);
    assert!((parity_ramsey_signal(0.5 * t_rev, &p) - (-8f64).exp()).abs() < 1e-12);
    assert!((revival_time(4.0, 0.337, 0.0) - 0.674).abs() < 1e-12);
    let shifted = revival_time(4.0, 0.337, -0.003);
    assert!((shifted - 0.674 * (1.0 - 8.0 * 0.003 * 0.337)).abs() < 1e-12);
}

#[test]
fn coherence_metrics() {
    let rho = coherent_state(C64::new(1.2, 0.5), 25).unwrap();
    let report = coherence_report(rho.matrix(), 4);
    for n in 0..=4 {
        for m in 0..=4 {
            assert!((report.normalized[n][m].unwrap() - 1.0).abs() < 1e-8);
        }
    }
    assert!((report.mean.unwrap() - 1.0).abs() < 1e-8);
    let diag = thermal_state(0.5, 10).unwrap();
    assert_eq!(mean_coherence(diag.matrix(), 4), Some(0.0));
    let vac = DensityMatrix::fock(0, 6).unwrap();
    assert_eq!(normalized_coherence(vac.matrix(), 0, 1), None);
    assert_eq!(mean_coherence(vac.matrix(), 4), None);
    assert!((natural_decay_prediction(1, 3, 0.4, 0.5) - (-0.8f64).exp()).abs() < 1e-15);
}

#[test]
fn randomized_mixture_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let rho = random_displaced_fock_mixture(&mut rng);
        let w = wigner_matrix(&rho, &GridSpec::default()).unwrap();
        let rec = reconstruct_rho(&w, 10).unwrap();
        let truth = rho.slice(ndarray::s![..11, ..11]).to_owned();
        assert!(frobenius(rec.rho.matrix(), &truth) < 1e-2);
    }
}

/// Mixture of up to three displaced Fock states, projected onto n <= 6.
pub fn random_displaced_fock_mixture(rng: &mut impl Rng) -> Array2<C64> {
    let big = 40;
    let support = 7;
    let parts = rng.random_range(1..=3);
    let mut rho = Array2::<C64>::zeros((support, support));
    let mut total = 0.0;
    for _ in 0..parts {
        let k = rng.random_range(0..=3usize);
        let beta = C64::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8));
        let d = displacement(beta, big).unwrap();
        let col: Vec<C64> = (0..support).map(|i| d.matrix()[(i, k)]).collect();
        let norm: f64 = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let weight = rng.random_range(0.1..1.0);
        total += weight;
        for i in 0..support {
            for j in 0..support {
                rho[(i, j)] += col[i] * col[j].conj() * (weight / (norm * norm));
            }
        }
    }
    pad(&rho.mapv(|c| c / total), 12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn normalized_coherences_bounded(re in proptest::collection::vec(-1.0f64..1.0, 16), im in proptest::collection::vec(-1.0f64..1.0, 16)) {
        // Random mixed state via A A^dagger.
        let a = Array2::from_shape_fn((4, 4), |(i, j)| C64::new(re[4 * i + j], im[4 * i + j]));
        let ad = a.t().mapv(|c| c.conj());
        let m = a.dot(&ad);
        let tr: f64 = (0..4).map(|i| m[(i, i)].re).sum();
        prop_assume!(tr > 1e-3);
        let rho = m.mapv(|c| c / tr);
        for n in 0..4 {
            for k in 0..4 {
                if let Some(v) = normalized_coherence(&rho, n, k) {
                    prop_assert!((0.0..=1.0 + 1e-6).contains(&v));
                }
            }
        }
    }

    #[test]
    fn wigner_real_moments(x in -1.0f64..1.0, p in -1.0f64..1.0) {
        let rho = coherent_state(C64::new(x, p), 20).unwrap();
        let w = wigner(&rho, &GridSpec::default()).unwrap();
        prop_assert!((expectation_from_wigner(&w, Moment::X).unwrap() - x).abs() < 1e-3);
        prop_assert!((expectation_from_wigner(&w, Moment::P).unwrap() - p).abs() < 1e-3);
    }
}
