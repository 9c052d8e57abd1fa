use std::f64::consts::PI;

use photocount_core::analysis::*;
use photocount_core::fit::ramsey_model;

const G1_MP: f64 = 1.0 / 0.044;
const CHI: f64 = 4.9;

#[test]
fn rotating_frame_removes_oscillation() {
    let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.025).collect();
    let (x, p): (Vec<f64>, Vec<f64>) = t.iter().map(|&ti| ramsey_model(ti, 1.2, 3.96, 0.0, 0.5)).unzip();
    let q = rotating_frame_quadrature(&x, &p, &t, 3.96).unwrap();
    for (ti, qi) in t.iter().zip(&q) {
        assert!((qi - 2.4 * (-0.5 * ti).exp()).abs() < 1e-12);
    }
    // Frame mismatch leaves a beat at the offset.
    let eps = 0.4;
    let q = rotating_frame_quadrature(&x, &p, &t, 3.96 + eps).unwrap();
    for (ti, qi) in t.iter().zip(&q) {
        let expect = 2.4 * (-0.5 * ti).exp() * (2.0 * PI * eps * ti).cos();
        assert!((qi - expect).abs() < 1e-12);
    }
    assert!(rotating_frame_quadrature(&x[..3], &p, &t, 1.0).is_err());
}

#[test]
fn undriven_theory_has_zero_rate() {
    for (n, m) in [(0, 1), (1, 2), (0, 3), (2, 4)] {
        for form in [TheoryForm::Printed, TheoryForm::PairResolved] {
            let th = decoherence_rate_theory(n, m, 2.0, 0.0, G1_MP, CHI, form);
            assert!(th.rate.abs() < 1e-9, "({n},{m}) {form:?}: {}", th.rate);
        }
    }
}

#[test]
fn theory_forms_agree_when_n_is_zero() {
    for m in 1..5 {
        for delta in [-4.9, 0.0, 4.9, 9.8, 19.6] {
            let a = decoherence_rate_theory(0, m, delta, CHI / 2.0, G1_MP, CHI, TheoryForm::Printed);
            let b = decoherence_rate_theory(0, m, delta, CHI / 2.0, G1_MP, CHI, TheoryForm::PairResolved);
            assert!((a.rate - b.rate).abs() < 1e-9);
        }
    }
}

#[test]
fn theory_peaks_near_photon_resonances() {
    // Probing |0> vs |2>: large rate on either resonance, small midway off both.
    let r = |d: f64| decoherence_rate_theory(0, 2, d, CHI / 2.0, G1_MP, CHI, TheoryForm::PairResolved).rate;
    assert!(r(0.0) > 3.0 * r(-2.0 * CHI));
    assert!(r(2.0 * CHI) > 3.0 * r(4.0 * CHI));
}

#[test]
fn symmetric_about_pair_midpoint_for_equal_indices() {
    for n in 0..4 {
        for d in [-3.0, 0.5, 2.0, 7.0] {
            let a = decoherence_rate_theory(n, n, d, CHI / 2.0, G1_MP, CHI, TheoryForm::Printed);
            let b = decoherence_rate_theory(n, n, 2.0 * n as f64 * CHI - d, CHI / 2.0, G1_MP, CHI, TheoryForm::Printed);
            assert!((a.rate - b.rate).abs() < 1e-8);
        }
    }
}

#[test]
fn rates_non_negative_on_grid() {
    for n in 0..20 {
        for m in 0..20 {
            for k in 0..5 {
                let d = -CHI + 1.5 * CHI * k as f64;
                for j in 0..5 {
                    let w = CHI * 0.25 * j as f64;
                    for form in [TheoryForm::Printed, TheoryForm::PairResolved] {
                        let th = decoherence_rate_theory(n, m, d, w, G1_MP, CHI, form);
                        assert!(th.rate >= -1e-9, "({n},{m},{d},{w}) {form:?}: {}", th.rate);
                    }
                }
            }
        }
    }
}

#[test]
fn local_maxima_spacing() {
    let t: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
    let y: Vec<f64> = t.iter().map(|&ti| (2.0 * PI * ti / 1.25).cos()).collect();
    assert!((peak_spacing(&t, &y).unwrap() - 1.25).abs() < 0.011);
    assert_eq!(peak_spacing(&t[..10], &y[..10]), None);
}
