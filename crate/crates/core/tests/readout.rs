use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use photocount_core::readout::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const G1_MP: f64 = 1.0 / 0.044;
const G2_MP: f64 = 1.0 / 0.088;

fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn emission_of_zero_signal_is_zero() {
    let e = emission_coefficient(&[0.0; 5], G1_MP, 1.0).unwrap();
    assert!(e.iter().all(|v| *v == 0.0));
    assert!(emission_coefficient(&[0.1], G1_MP, 0.0).is_err());
}

#[test]
fn weak_resonant_drive_emission_tends_to_gamma_ratio() {
    for omega in [1e-2, 1e-3, 1e-4] {
        let (_, y, _) = steady_state_bloch(0.0, omega, G1_MP, G2_MP);
        let e = emission_coefficient(&[y], G1_MP, omega).unwrap()[0];
        assert!((e - 2.0).abs() < 1e-3, "omega {omega}: {e}");
    }
    // Doubling Gamma_2 halves the coefficient.
    let g2 = 2.0 * G2_MP;
    let (_, y, _) = steady_state_bloch(0.0, 1e-4, G1_MP, g2);
    let halved = emission_coefficient(&[y], G1_MP, 1e-4).unwrap()[0];
    assert!((halved - G1_MP / g2).abs() < 1e-6);
    assert!((halved - 1.0).abs() < 1e-6);
}

#[test]
fn reflection_limits() {
    let far = steady_state_reflection(1e9, 0.5, G1_MP, G1_MP / 2.0);
    assert!((far - C64::new(1.0, 0.0)).norm() < 1e-6);
    // Leading off-resonant correction is i Gamma_1 / (2 pi Delta).
    let d = 1e6;
    let near_far = steady_state_reflection(d, 0.5, G1_MP, G1_MP / 2.0);
    let lead = C64::new(1.0, G1_MP / (2.0 * PI * d));
    assert!((near_far - lead).norm() < 1e-10, "{near_far}");
    let weak = steady_state_reflection(0.0, 1e-6, G1_MP, G1_MP / 2.0);
    assert!((weak - C64::new(-1.0, 0.0)).norm() < 1e-9);
    let strong = steady_state_reflection(0.0, 1e4, G1_MP, G1_MP / 2.0);
    assert!((strong - C64::new(1.0, 0.0)).norm() < 1e-3);
}

#[test]
fn reflection_agrees_with_bloch_components() {
    for &(d, w) in &[(0.3, 0.5), (-2.0, 1.0), (4.9, 2.45)] {
        let (x, y, _) = steady_state_bloch(d, w, G1_MP, G2_MP);
        // <sigma_-> = (x - i y)/2 with sigma_- = (sigma_x - i sigma_y)/2.
        let sm = C64::new(x / 2.0, -y / 2.0);
        let r1 = reflection_from_sigma_minus(sm, G1_MP, w);
        let r2 = steady_state_reflection(d, w, G1_MP, G2_MP);
        assert!((r1 - r2).norm() < 1e-12);
        assert!((1.0 - r2.re - emission_coefficient(&[y], G1_MP, w).unwrap()[0]).abs() < 1e-12);
    }
}

#[test]
fn detuned_emission_follows_lorentzian() {
    let omega = 1e-4;
    let (_, y0, _) = steady_state_bloch(0.0, omega, G1_MP, G2_MP);
    let (_, y1, _) = steady_state_bloch(4.9, omega, G1_MP, G2_MP);
    let expect = 1.0 / (1.0 + (2.0 * PI * 4.9 / G2_MP).powi(2));
    assert!((y1 / y0 - expect).abs() < 1e-6);
}

#[test]
fn demux_picks_matching_channel() {
    let spacing = 4.9;
    let t = grid(0.0, 5.0 / spacing, 5001);
    for j in 0..9 {
        let sig: Vec<f64> = t.iter().map(|&ti| (2.0 * PI * spacing * j as f64 * ti).cos()).collect();
        let ch = demultiplex_all(&t, &sig, 9, spacing, (t[0], t[t.len() - 1])).unwrap();
        for c in &ch {
            if c.k == j {
                assert!((c.value - 1.0).abs() < 1e-6, "k = {j}: {}", c.value);
            } else {
                assert!(c.value.abs() < 1e-10, "leak {} -> {}: {}", j, c.k, c.value);
            }
        }
    }
}

#[test]
fn demux_constant_and_sine() {
    let t = grid(0.1, 2.1, 2001);
    let sig = vec![0.37; t.len()];
    let ch = demultiplex_all(&t, &sig, 4, 5.0, (0.1, 2.1)).unwrap();
    assert!((ch[0].value - 0.37).abs() < 1e-12);
    assert!(ch[1..].iter().all(|c| c.value.abs() < 1e-10));
    let s: Vec<f64> = t.iter().map(|&ti| (2.0 * PI * 10.0 * ti).sin()).collect();
    let c2 = demultiplex(&t, &s, 2, 5.0, (0.1, 2.1)).unwrap();
    assert!(c2.value.abs() < 1e-10 && (c2.quadrature - 1.0).abs() < 1e-5);
}

#[test]
fn demux_errors() {
    let t = grid(0.0, 1.0, 11);
    let s = vec![0.0; 11];
    assert!(demultiplex(&t, &s, 1, 1.0, (0.5, 0.5)).is_err());
    assert!(demultiplex(&t, &s, 1, 0.0, (0.0, 1.0)).is_err());
    assert!(demultiplex(&t, &s, 1, 1.0, (0.0, 2.0)).is_err());
    assert!(demultiplex(&t, &s[..5], 1, 1.0, (0.0, 1.0)).is_err());
}

#[test]
fn undamped_rabi_frequency_is_linear_in_voltage() {
    for v in [0.001, 0.002, 0.005] {
        let w = rabi_angular_frequency(0.543, v, 0.0, 0.0, RabiForm::Printed);
        assert!((w - 2.0 * PI * 543.0 * v).abs() < 1e-9);
    }
    // The two forms differ only by the decay correction.
    let p = rabi_angular_frequency(0.543, 0.002, 30.0, 5.0, RabiForm::Printed);
    let c = rabi_angular_frequency(0.543, 0.002, 30.0, 5.0, RabiForm::Conventional);
    let w0 = 2.0 * PI * 543.0 * 0.002;
    assert!((p * p - (w0 * w0 - (20.0f64 / 16.0).powi(2))).abs() < 1e-9);
    assert!((c * c - (w0 * w0 - 25.0)).abs() < 1e-9);
}

fn synthetic_rabi(xi: f64, noise: f64, seed: u64, form: RabiForm) -> (Vec<f64>, Vec<f64>, RabiParams) {
    let p = RabiParams { a: 0.8, xi, v_mp: 0.01, gamma_1: G1_MP, gamma_2: 8.0, t0: 0.05, phi: 0.3, t_decay: 0.6, r_ss: 0.2 };
    let t = grid(0.05, 1.05, 801);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, noise.max(1e-300)).unwrap();
    let y = t.iter().map(|&ti| rabi_calibration_model(ti, &p, form) + if noise > 0.0 { n.sample(&mut rng) } else { 0.0 }).collect();
    (t, y, p)
}

#[test]
fn rabi_fit_round_trip() {
    for form in [RabiForm::Printed, RabiForm::Conventional] {
        let (t, y, p) = synthetic_rabi(0.543, 0.0, 1, form);
        let f = fit_rabi(&t, &y, p.v_mp, p.gamma_1, p.gamma_2, form).unwrap();
        assert!((f.xi - 0.543).abs() / 0.543 < 1e-3, "{form:?}: {}", f.xi);
    }
    let (t, y, p) = synthetic_rabi(0.543, 0.01 * 0.8, 3, RabiForm::Printed);
    let f = fit_rabi(&t, &y, p.v_mp, p.gamma_1, p.gamma_2, RabiForm::Printed).unwrap();
    assert!((f.xi - 0.543).abs() / 0.543 < 0.02);
    assert!(f.xi_std > 0.0);
}

#[test]
fn rabi_fit_needs_two_periods() {
    let p = RabiParams { a: 0.8, xi: 0.543, v_mp: 0.0005, gamma_1: 0.0, gamma_2: 0.0, t0: 0.0, phi: 0.0, t_decay: 10.0, r_ss: 0.0 };
    let t = grid(0.0, 2.0, 401);
    let y: Vec<f64> = t.iter().map(|&ti| rabi_calibration_model(ti, &p, RabiForm::Printed)).collect();
    assert!(fit_rabi(&t, &y, p.v_mp, 0.0, 0.0, RabiForm::Printed).is_err());
}

proptest! {
    #[test]
    fn demux_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 0usize..9) {
        let t = grid(0.0, 1.0, 501);
        let f: Vec<f64> = t.iter().map(|&x| (3.0 * x).sin() + x * x).collect();
        let g: Vec<f64> = t.iter().map(|&x| (17.0 * x).cos() - x).collect();
        let h: Vec<f64> = f.iter().zip(&g).map(|(u, v)| a * u + b * v).collect();
        let w = (0.0, 1.0);
        let cf = demultiplex(&t, &f, k, 4.9, w).unwrap();
        let cg = demultiplex(&t, &g, k, 4.9, w).unwrap();
        let ch = demultiplex(&t, &h, k, 4.9, w).unwrap();
        prop_assert!((ch.value - (a * cf.value + b * cg.value)).abs() < 1e-12);
        prop_assert!((ch.quadrature - (a * cf.quadrature + b * cg.quadrature)).abs() < 1e-12);
    }

    #[test]
    fn emission_coefficient_bounded(delta in -20.0f64..20.0, omega in 0.01f64..20.0) {
        let r = steady_state_reflection(delta, omega, G1_MP, G2_MP);
        prop_assert!(r.norm() <= 1.0 + 1e-12);
    }
}
