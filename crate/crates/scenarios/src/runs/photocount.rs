//! Photocounting, displacement calibration and Rabi calibration scenarios.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use photocount_core::drives::Envelope;
use photocount_core::dynamics::models::{
    build_displacement_only, build_h1_yesno, build_h2_single_tone, build_h3_comb, sigma_y_mp, PulseTiming, MULTIPLEXING,
    YES_NO,
};
use photocount_core::dynamics::SolverConfig;
use photocount_core::fit::fit_line;
use photocount_core::hilbert::{excited_projector, sigma_minus};
use photocount_core::readout::{demultiplex_all, fit_rabi, reflection_from_sigma_minus};
use rayon::prelude::*;

use super::*;

fn probe_gap(c: &Ctx) -> Result<f64> {
    Ok(req(c.drive().probe_delay, "drive.probe_delay")?.value())
}

fn grid(c: &Ctx) -> Result<Vec<(f64, f64)>> {
    let eps = c.r.axis("eps_max")?;
    let deltas = c.r.axis("delta_f")?;
    Ok(eps.iter().flat_map(|&e| deltas.iter().map(move |&d| (e, d))).collect())
}

/// Peak table of `y(delta_f)` for each displacement amplitude, labelled by
/// the nearest photon number `delta_f / chi`.
fn peak_table(name: &str, value: &str, eps: &[f64], deltas: &[f64], y: &[f64], chi: f64, floor: f64) -> Table {
    let (mut e, mut k, mut d, mut v, mut off) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, &ei) in eps.iter().enumerate() {
        let row = &y[i * deltas.len()..(i + 1) * deltas.len()];
        for (dp, vp) in peaks(deltas, row, floor) {
            let kk = (dp / chi).round().max(0.0);
            e.push(ei);
            k.push(kk);
            d.push(dp);
            v.push(vp);
            off.push(dp - kk * chi);
        }
    }
    Table::new(name)
        .real("eps_max", "/us", e)
        .real("k", "1", k)
        .real("delta_f", "MHz", d)
        .real(value, "1", v)
        .real("offset", "MHz", off)
}

pub(super) fn yesno(c: &Ctx) -> Result<Output> {
    let p = c.p;
    let opts = c.r.model_options();
    let method = c.r.method();
    let timing = with_gap(PulseTiming::yes_no(), probe_gap(c)?);
    let points = grid(c)?;
    let pe = points
        .par_iter()
        .map(|&(eps, delta)| -> Result<f64> {
            let (ops, meq) = build_h1_yesno(&p, delta, eps, &timing, true, &opts)?;
            let rho0 = ops.thermal_initial(p.n_th_s)?;
            let cfg = SolverConfig::new(method).times(vec![timing.end()]).observe("pe", ops.qubit_op(YES_NO, &excited_projector())?);
            Ok(c.evolve(&rho0, &meq, &cfg)?.real("pe").expect("observed")[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    let (eps, deltas) = (c.r.axis("eps_max")?, c.r.axis("delta_f")?);
    let map = Table::new("pe_map")
        .real("eps_max", "/us", points.iter().map(|q| q.0).collect())
        .real("nbar_est", "1", points.iter().map(|q| nbar_estimate(q.0, &timing, opts.displacement)).collect())
        .real("delta_f", "MHz", points.iter().map(|q| q.1).collect())
        .real("p_e", "1", pe.clone());
    let peaks = peak_table("peaks", "p_e", eps, deltas, &pe, p.chi_s_yn, 0.02);
    Ok(Output { tables: vec![map, peaks], ..Output::default() })
}

/// Emission coefficient matched to the probe envelope g:
/// Gamma_1 Int <sigma_y> g dt / (2 pi Omega Int g^2 dt).
fn matched_emission(t: &[f64], sigma_y: &[f64], probe: &Envelope, gamma_1: f64, omega: f64) -> f64 {
    let g: Vec<f64> = t.iter().map(|&ti| probe.window(ti)).collect();
    let num: Vec<f64> = sigma_y.iter().zip(&g).map(|(s, g)| s * g).collect();
    let den: Vec<f64> = g.iter().map(|g| g * g).collect();
    gamma_1 * trapezoid(t, &num) / (2.0 * PI * omega * trapezoid(t, &den))
}

pub(super) fn single_tone(c: &Ctx) -> Result<Output> {
    let p = c.p;
    let opts = c.r.model_options();
    let method = c.r.method();
    let omega = c.r.omega();
    if !(omega > 0.0) {
        return Err(ScenarioError::Config("photocount-single-tone needs drive.omega_over_chi > 0".into()));
    }
    let timing = with_gap(PulseTiming::multiplexing(), probe_gap(c)?);
    let times = linspace(timing.probe.start(), timing.probe.end(), 201);
    let points = grid(c)?;
    let emission = points
        .par_iter()
        .map(|&(eps, delta)| -> Result<f64> {
            let (ops, meq) = build_h2_single_tone(&p, delta, omega, eps, &timing, &opts)?;
            let rho0 = ops.thermal_initial(p.n_th_s)?;
            let cfg = SolverConfig::new(method).times(times.clone()).observe("sy", sigma_y_mp(&ops)?);
            let sy = c.evolve(&rho0, &meq, &cfg)?.real("sy").expect("observed");
            Ok(matched_emission(&times, &sy, &timing.probe, p.gamma_1_mp, omega))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (eps, deltas) = (c.r.axis("eps_max")?, c.r.axis("delta_f")?);
    let map = Table::new("emission_map")
        .real("eps_max", "/us", points.iter().map(|q| q.0).collect())
        .real("nbar_est", "1", points.iter().map(|q| nbar_estimate(q.0, &timing, opts.displacement)).collect())
        .real("delta_f", "MHz", points.iter().map(|q| q.1).collect())
        .real("emission", "1", emission.clone());
    let peaks = peak_table("peaks", "emission", eps, deltas, &emission, p.chi_s_mp, 0.02);
    Ok(Output { tables: vec![map, peaks], ..Output::default() })
}

/// Demultiplexing window: the longest span inside the probe support holding
/// a whole number of beat periods, centred on the probe.
fn demux_window(probe: &Envelope, spacing: f64) -> (f64, f64) {
    let periods = (probe.duration * spacing).floor().max(1.0);
    let len = (periods / spacing).min(probe.duration);
    let mid = probe.center();
    (mid - len / 2.0, mid + len / 2.0)
}

pub(super) fn multiplexed(c: &Ctx) -> Result<Output> {
    let p = c.p;
    let opts = c.r.model_options();
    let method = c.r.method();
    let omega = c.r.omega();
    let n_tones = req(c.drive().n_tones, "drive.n_tones")?;
    if !(omega > 0.0) {
        return Err(ScenarioError::Config("photocount-multiplexed needs drive.omega_over_chi > 0".into()));
    }
    let timing = with_gap(PulseTiming::multiplexing(), probe_gap(c)?);
    let window = demux_window(&timing.probe, p.chi_s_mp);
    let samples = ((window.1 - window.0) / 1e-3).round() as usize + 1;
    let wtimes = linspace(window.0, window.1, samples);
    let t_disp = timing.displacement.end();
    let mut times = vec![t_disp];
    times.extend(wtimes.iter().copied().filter(|&t| t > t_disp));
    let nbars = c.r.axis("nbar")?;
    let runs = nbars
        .par_iter()
        .map(|&nbar| -> Result<(f64, Vec<(f64, f64)>)> {
            let eps = eps_for_nbar(nbar, &timing, opts.displacement);
            let (ops, meq) = build_h3_comb(&p, omega, eps, n_tones, &timing, &opts)?;
            let rho0 = ops.thermal_initial(p.n_th_s)?;
            let cfg = SolverConfig::new(method).times(times.clone()).observe("sy", sigma_y_mp(&ops)?).observe("n", ops.n.clone());
            let tr = c.evolve(&rho0, &meq, &cfg)?;
            let sy = tr.real("sy").expect("observed");
            let n_after = tr.real("n").expect("observed")[0];
            let k = p.gamma_1_mp / (2.0 * PI * omega);
            let signal: Vec<f64> = sy[1..].iter().map(|v| k * v).collect();
            let ch = demultiplex_all(&times[1..], &signal, n_tones, p.chi_s_mp, window)?;
            Ok((n_after, ch.iter().map(|s| (s.value, s.quadrature)).collect()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut nb, mut na, mut kk, mut val, mut quad) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (&nbar, (n_after, ch)) in nbars.iter().zip(&runs) {
        for (k, &(v, q)) in ch.iter().enumerate() {
            nb.push(nbar);
            na.push(*n_after);
            kk.push(k as f64);
            val.push(v);
            quad.push(q);
        }
    }
    let channels = Table::new("channels")
        .real("nbar", "1", nb)
        .real("nbar_actual", "1", na)
        .real("k", "1", kk)
        .real("value", "1", val)
        .real("quadrature", "1", quad);
    let actual: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (mut k_col, mut at_max, mut at_max_actual, mut max_v, mut uni) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for k in 0..n_tones {
        let y: Vec<f64> = runs.iter().map(|r| r.1[k].0).collect();
        let (x_max, y_max) = refined_argmax(nbars, &y);
        k_col.push(k as f64);
        at_max.push(x_max);
        at_max_actual.push(interpolate(nbars, &actual, x_max));
        max_v.push(y_max);
        uni.push(if is_unimodal(&y, 1e-3) { 1.0 } else { 0.0 });
    }
    let peaks = Table::new("channel_peaks")
        .real("k", "1", k_col)
        .real("nbar_at_max", "1", at_max)
        .real("nbar_actual_at_max", "1", at_max_actual)
        .real("max_value", "1", max_v)
        .real("unimodal", "1", uni);
    let notes = vec![format!("demultiplexing window {:.6} us to {:.6} us", window.0, window.1)];
    Ok(Output { tables: vec![channels, peaks], notes, ..Output::default() })
}

/// Piecewise-linear y(x) for increasing x, clamped at the ends.
fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    if at <= x[0] {
        return y[0];
    }
    for i in 1..x.len() {
        if at <= x[i] {
            let f = (at - x[i - 1]) / (x[i] - x[i - 1]);
            return y[i - 1] + f * (y[i] - y[i - 1]);
        }
    }
    y[y.len() - 1]
}

pub(super) fn calibrate(c: &Ctx) -> Result<Output> {
    let p = c.p;
    let opts = c.r.model_options();
    let method = c.r.method();
    let timing = PulseTiming::multiplexing();
    let eps = c.r.axis("eps_max")?;
    let n_mean = eps
        .par_iter()
        .map(|&e| -> Result<f64> {
            let (ops, meq) = build_displacement_only(&p, e, &timing, &opts)?;
            let rho0 = ops.coherent_initial(C64::new(0.0, 0.0))?;
            let cfg = SolverConfig::new(method).times(vec![timing.displacement.end()]).observe("n", ops.n.clone());
            Ok(c.evolve(&rho0, &meq, &cfg)?.real("n").expect("observed")[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    let sqrt_n: Vec<f64> = n_mean.iter().map(|n| n.max(0.0).sqrt()).collect();
    let fit = fit_line(eps, &sqrt_n)?;
    let lossless = 2.0 * PI * displacement_prefactor(opts.displacement) * timing.displacement.area();
    let data = Table::new("photon_number").real("eps_max", "/us", eps.to_vec()).real("n_mean", "1", n_mean).real("sqrt_n", "1", sqrt_n);
    let fit_t = Table::new("fit")
        .real("slope_per_ns", "ns", vec![fit.slope * 1e3])
        .real("slope_std_per_ns", "ns", vec![fit.slope_std * 1e3])
        .real("intercept", "1", vec![fit.intercept])
        .real("lossless_slope_per_ns", "ns", vec![lossless * 1e3]);
    Ok(Output { tables: vec![data, fit_t], ..Output::default() })
}

pub(super) fn rabi(c: &Ctx) -> Result<Output> {
    let p = c.p;
    let opts = c.r.model_options();
    let method = c.r.method();
    let form = c.analysis().rabi_form.unwrap_or_default();
    let volts = c.r.axis("v_mp")?;
    let times = c.r.axis("time")?.to_vec();
    let (t0, t1) = (times[0], times[times.len() - 1]);
    if !(t1 > t0) {
        return Err(ScenarioError::Config("rabi-calibration needs an increasing time axis".into()));
    }
    let timing = PulseTiming { displacement: Envelope::gaussian(0.1, 0.025), probe: Envelope::square(t1 - t0).delayed(t0) };
    let runs = volts
        .par_iter()
        .map(|&v| -> Result<Vec<C64>> {
            let omega = p.calibration.xi * 1e3 * v;
            let (ops, meq) = build_h2_single_tone(&p, 0.0, omega, 0.0, &timing, &opts)?;
            let rho0 = ops.coherent_initial(C64::new(0.0, 0.0))?;
            let cfg = SolverConfig::new(method).times(times.clone()).observe("sm", ops.qubit_op(MULTIPLEXING, &sigma_minus())?);
            let tr = c.evolve(&rho0, &meq, &cfg)?;
            Ok(tr.observable("sm").expect("observed").iter().map(|&s| reflection_from_sigma_minus(s, p.gamma_1_mp, omega)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut vv, mut tt, mut re, mut im) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut fits = Vec::new();
    for (&v, r) in volts.iter().zip(&runs) {
        for (&t, z) in times.iter().zip(r) {
            vv.push(v);
            tt.push(t);
            re.push(z.re);
            im.push(z.im);
        }
        let re_r: Vec<f64> = r.iter().map(|z| z.re).collect();
        fits.push(fit_rabi(&times, &re_r, v, p.gamma_1_mp, p.gamma_2_mp, form)?);
    }
    let data = Table::new("reflection").real("v_mp", "V", vv).real("time", "us", tt).real("re_r", "1", re).real("im_r", "1", im);
    let col = |f: fn(&photocount_core::readout::RabiFit) -> f64| fits.iter().map(f).collect::<Vec<f64>>();
    let fit_t = Table::new("fit")
        .real("v_mp", "V", volts.to_vec())
        .real("omega", "MHz", volts.iter().map(|v| p.calibration.xi * 1e3 * v).collect())
        .real("xi", "GHz/V", col(|f| f.xi))
        .real("xi_std", "GHz/V", col(|f| f.xi_std))
        .real("a", "1", col(|f| f.a))
        .real("phi", "rad", col(|f| f.phi))
        .real("t_decay", "us", col(|f| f.t_decay))
        .real("r_ss", "1", col(|f| f.r_ss))
        .real("residual_norm", "1", col(|f| f.residual_norm));
    Ok(Output { tables: vec![data, fit_t], ..Output::default() })
}
