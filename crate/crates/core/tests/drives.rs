use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use photocount_core::drives::*;
use proptest::prelude::*;

#[test]
fn gaussian_center_and_edge() {
    let g = Envelope::gaussian(0.1, 0.025);
    assert!((g.evaluate(0.05) - C64::new(1.0, 0.0)).norm() < 1e-15);
    assert!((g.evaluate(0.0).re - (-2f64).exp()).abs() < 1e-12);
    assert_eq!(g.evaluate(-1e-9), C64::new(0.0, 0.0));
    assert_eq!(g.evaluate(0.1 + 1e-9), C64::new(0.0, 0.0));
}

#[test]
fn delay_shifts_support() {
    let g = Envelope::gaussian(1.9, 0.475).delayed(0.1);
    assert_eq!(g.start(), 0.1);
    assert!((g.end() - 2.0).abs() < 1e-15);
    assert!((g.evaluate(1.05).re - 1.0).abs() < 1e-15);
    assert_eq!(g.evaluate(0.05), C64::new(0.0, 0.0));
}

#[test]
fn single_tone_comb_matches_base() {
    let base = Envelope::gaussian(2.0, 0.25).delayed(0.1);
    let comb = make_comb(1, 4.9, base.clone()).unwrap();
    for k in 0..200 {
        let t = 0.011 * k as f64;
        assert_eq!(comb.evaluate(t), base.evaluate(t));
    }
    assert!(make_comb(0, 4.9, base).is_err());
}

#[test]
fn nine_tone_offsets() {
    let comb = make_comb(9, 4.9, Envelope::square(1.0)).unwrap();
    let offsets: Vec<f64> = comb.tones.iter().map(|t| t.offset).collect();
    for (k, o) in offsets.iter().enumerate() {
        assert!((o + 4.9 * k as f64).abs() < 1e-12);
    }
    assert!((offsets[8] + 39.2).abs() < 1e-12);
    assert_eq!(comb.kind(), EnvelopeKind::Comb);
}

#[test]
fn comb_phases_align_at_commensurate_time() {
    // All tones align when spacing * t is an integer.
    let comb = make_comb(9, 5.0, Envelope::square(1.0)).unwrap();
    assert!((comb.evaluate(0.4).norm() - 9.0).abs() < 1e-10);
    let g = gaussian_comb(9, 5.0, 0.8).unwrap();
    assert!((g.evaluate(0.4).norm() - 9.0).abs() < 1e-10);
}

#[test]
fn comb_tone_k_rotates_at_plus_k_spacing() {
    let comb = make_comb(2, 4.0, Envelope::square(1.0)).unwrap();
    let t = 0.03;
    let expect = C64::new(1.0, 0.0) + C64::from_polar(1.0, 2.0 * PI * 4.0 * t);
    assert!((comb.evaluate(t) - expect).norm() < 1e-14);
}

#[test]
fn detuned_coefficient() {
    let spec = DriveSpec::new("s", DriveForm::Ladder, 1.0, Envelope::square(1.0)).detuned(3.0);
    let t = 0.2;
    let expect = C64::from_polar(1.0, -2.0 * PI * 3.0 * t);
    assert!((spec.coefficient(t) - expect).norm() < 1e-15);
    let neg = DriveSpec::new("s", DriveForm::Ladder, -1.0, Envelope::square(1.0));
    assert!(neg.validate().is_err());
}

#[test]
fn area_of_square_and_gaussian() {
    assert!((Envelope::square(2.0).with_amplitude(0.5).area() - 1.0).abs() < 1e-12);
    // Truncated at +-2 sigma: sigma sqrt(2 pi) erf(sqrt 2).
    let g = Envelope::gaussian(0.1, 0.025);
    let erf_sqrt2 = 0.954_499_736_103_642;
    assert!((g.area() - 0.025 * (2.0 * PI).sqrt() * erf_sqrt2).abs() < 1e-10);
}

proptest! {
    #[test]
    fn evaluation_is_pure(t in -1.0f64..3.0) {
        let e = gaussian_comb(9, 4.9, 2.0).unwrap().delayed(0.1);
        prop_assert_eq!(e.evaluate(t).re.to_bits(), e.evaluate(t).re.to_bits());
        prop_assert_eq!(e.evaluate(t).im.to_bits(), e.evaluate(t).im.to_bits());
    }

    #[test]
    fn energy_scales_as_amplitude_squared(a in 0.1f64..5.0) {
        let base = Envelope::gaussian(1.0, 0.25);
        let scaled = base.clone().with_amplitude(a);
        let energy = |e: &Envelope| (0..=1000).map(|k| e.evaluate(k as f64 / 1000.0).norm_sqr()).sum::<f64>();
        prop_assert!((energy(&scaled) - a * a * energy(&base)).abs() <= 1e-10 * energy(&scaled));
    }

    #[test]
    fn comb_factor_periodic(t in 0.0f64..2.0, n in 1usize..10, spacing in 1.0f64..10.0) {
        let e = make_comb(n, spacing, Envelope::square(100.0)).unwrap();
        let a = e.oscillatory_factor(t);
        let b = e.oscillatory_factor(t + 1.0 / spacing);
        prop_assert!((a - b).norm() < 1e-9 * n as f64);
    }
}
