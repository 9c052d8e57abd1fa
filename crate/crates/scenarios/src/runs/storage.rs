//! Storage-mode scenarios: Ramsey, measurement-induced dephasing, Fock
//! coherences, QND populations and Wigner snapshots.

use num_complex::Complex64 as C64;
use photocount_core::analysis::{dephasing_sweep, decoherence_rate_theory, peak_spacing, FitModel, SweepSettings, TheoryForm};
use photocount_core::drives::{make_comb, Envelope, Tone};
use photocount_core::dynamics::models::build_h4_with_probe;
use photocount_core::dynamics::{SolverConfig, Trajectory};
use photocount_core::fit::{fit_exponential, fit_line, fit_ramsey, ramsey_model};
use photocount_core::wigner::{mean_coherence, normalized_coherence, ALPHA_CONVENTION};
use rayon::prelude::*;

use super::*;
use crate::config::ProbeKind;

fn beta(c: &Ctx) -> Result<C64> {
    Ok(C64::new(req(c.drive().beta, "drive.beta")?, 0.0))
}

fn delta_f_s0(c: &Ctx) -> Result<f64> {
    Ok(req(c.drive().delta_f_s0, "drive.delta_f_s0")?.value())
}

fn time_axis(c: &Ctx) -> Result<Vec<f64>> {
    let t = c.r.axis("time")?.to_vec();
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ScenarioError::Config("sweep `time` must be strictly increasing".into()));
    }
    Ok(t)
}

/// Square probe lasting until the last requested time.
fn square_until(times: &[f64]) -> Envelope {
    Envelope::square(times[times.len() - 1].max(1e-9))
}

fn comb_until(c: &Ctx, times: &[f64]) -> Result<Envelope> {
    let n = req(c.drive().n_tones, "drive.n_tones")?;
    Ok(make_comb(n, c.p.chi_s_mp, square_until(times))?)
}

/// H4 from a coherent storage state with snapshots at `times`.
fn storage_run(c: &Ctx, omega: f64, probe: &Envelope, times: &[f64]) -> Result<Trajectory> {
    let opts = c.r.model_options();
    let (ops, meq) = build_h4_with_probe(&c.p, omega, delta_f_s0(c)?, probe, &opts)?;
    let rho0 = ops.coherent_initial(beta(c)?)?;
    let cfg = SolverConfig::new(c.r.method()).times(times.to_vec()).snapshots(times.to_vec()).observe("n", ops.n.clone());
    c.evolve(&rho0, &meq, &cfg)
}

fn or_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub(super) fn ramsey(c: &Ctx) -> Result<Output> {
    let times = time_axis(c)?;
    let opts = c.r.model_options();
    let (ops, meq) = build_h4_with_probe(&c.p, 0.0, delta_f_s0(c)?, &square_until(&times), &opts)?;
    let rho0 = ops.coherent_initial(beta(c)?)?;
    let cfg = SolverConfig::new(c.r.method()).times(times.clone()).observe("X", ops.x_quadrature()).observe("P", ops.p_quadrature());
    let tr = c.evolve(&rho0, &meq, &cfg)?;
    let x = tr.real("X").expect("observed");
    let pq = tr.real("P").expect("observed");
    let fit = fit_ramsey(&x, &pq, &times)?;
    let model: Vec<(f64, f64)> = times.iter().map(|&t| ramsey_model(t, fit.a, fit.delta_f_s, fit.phi, fit.gamma_d_s)).collect();
    let quad = Table::new("quadratures")
        .real("time", "us", times.clone())
        .real("x", "1", x)
        .real("p", "1", pq)
        .real("x_fit", "1", model.iter().map(|m| m.0).collect())
        .real("p_fit", "1", model.iter().map(|m| m.1).collect());
    let fit_t = Table::new("fit")
        .real("a", "1", vec![fit.a])
        .real("delta_f_s", "MHz", vec![fit.delta_f_s])
        .real("phi", "rad", vec![fit.phi])
        .real("gamma_d_s", "/us", vec![fit.gamma_d_s])
        .real("gamma_d_s_std", "/us", vec![fit.std_errors[3]])
        .real("gamma_2_s", "/us", vec![c.p.gamma_2_s])
        .real("residual_norm", "1", vec![fit.residual_norm]);
    Ok(Output { tables: vec![quad, fit_t], ..Output::default() })
}

pub(super) fn mid_sweep(c: &Ctx) -> Result<Output> {
    let ratios = c.r.axis("omega_over_chi")?;
    let durations = c.r.axis("duration")?.to_vec();
    let settings = SweepSettings {
        beta: beta(c)?.re,
        delta_f_s0: delta_f_s0(c)?,
        durations: durations.clone(),
        options: c.r.model_options(),
        method: c.r.method(),
        two_tone_threshold: req(c.analysis().two_tone_threshold, "analysis.two_tone_threshold")?,
    };
    let omegas: Vec<f64> = ratios.iter().map(|r| r * c.p.chi_s_mp).collect();
    let points = dephasing_sweep(&c.p, &omegas, &settings)?;
    for pt in &points {
        c.record(&pt.stats, durations.len());
    }
    let col = |f: fn(&photocount_core::analysis::DephasingPoint) -> f64| points.iter().map(f).collect::<Vec<f64>>();
    let gamma = col(|q| q.gamma_d_s);
    let dephasing = Table::new("dephasing")
        .real("omega_over_chi", "1", ratios.to_vec())
        .real("omega", "MHz", omegas.clone())
        .real("gamma_d_s", "/us", gamma.clone())
        .real("gamma_measurement", "/us", gamma.iter().map(|g| g - c.p.gamma_2_s).collect())
        .real("delta_f_s", "MHz", col(|q| q.delta_f_s))
        .text(
            "model",
            points.iter().map(|q| match q.model {
                FitModel::SingleTone => "single-tone".to_string(),
                FitModel::TwoTone => "two-tone".to_string(),
            }).collect(),
        )
        .real("residual_norm", "1", col(|q| q.residual_norm))
        .real("nu", "MHz", col(|q| or_nan(q.nu)))
        .real("zeta", "1", col(|q| or_nan(q.zeta)))
        .text("error", points.iter().map(|q| q.error.clone().unwrap_or_default()).collect());
    let (mut rr, mut dd, mut xx, mut pp) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for pt in &points {
        for (i, &d) in durations.iter().enumerate() {
            rr.push(pt.omega_over_chi);
            dd.push(d);
            xx.push(pt.x[i]);
            pp.push(pt.p[i]);
        }
    }
    let quad = Table::new("quadratures").real("omega_over_chi", "1", rr).real("duration", "us", dd).real("x", "1", xx).real("p", "1", pp);
    let finite: Vec<usize> = (0..points.len()).filter(|&i| gamma[i].is_finite()).collect();
    let xs: Vec<f64> = finite.iter().map(|&i| ratios[i]).collect();
    let ys: Vec<f64> = finite.iter().map(|&i| gamma[i]).collect();
    let (peak_x, peak_y) = if ys.is_empty() { (f64::NAN, f64::NAN) } else { refined_argmax(&xs, &ys) };
    let natural = finite.iter().find(|&&i| ratios[i] == 0.0).map_or(c.p.gamma_2_s, |&i| gamma[i]);
    let summary = Table::new("summary")
        .real("peak_omega_over_chi", "1", vec![peak_x])
        .real("peak_gamma_d_s", "/us", vec![peak_y])
        .real("natural_gamma_d_s", "/us", vec![natural])
        .real("peak_to_natural", "1", vec![peak_y / natural]);
    let notes = points.iter().filter_map(|q| q.error.as_ref().map(|e| format!("omega/chi = {}: fit failed: {e}", q.omega_over_chi))).collect();
    Ok(Output { tables: vec![dephasing, quad, summary], notes, ..Output::default() })
}

fn pairs(n_max: usize) -> Vec<(usize, usize)> {
    (0..=n_max).flat_map(|n| (n + 1..=n_max).map(move |m| (n, m))).collect()
}

/// Relative deviation |a - b| / |b|.
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub(super) fn single_drive(c: &Ctx) -> Result<Output> {
    let times = time_axis(c)?;
    let deltas = c.r.axis("delta_f")?;
    let omega = c.r.omega();
    let n_max = req(c.analysis().n_max, "analysis.n_max")?;
    let fit_start = c.analysis().fit_start.map_or(0.0, |t| t.value());
    let floor = c.analysis().coherence_floor.unwrap_or(1e-6);
    let form = c.analysis().theory_form.unwrap_or_default();
    let tomo = StorageTomography::new(&c.r.config.tomography, false)?;
    let pair_list = pairs(n_max);
    let p = c.p;
    struct Point {
        /// [pair][time] from the analysed matrix, then from the direct one.
        value: Vec<Vec<f64>>,
        direct: Vec<Vec<f64>>,
        diag: Vec<(f64, f64, f64)>,
    }
    let runs = deltas
        .par_iter()
        .map(|&delta| -> Result<Point> {
            let probe = Envelope { tones: vec![Tone { offset: -delta, phase: 0.0 }], ..square_until(&times) };
            let tr = storage_run(c, omega, &probe, &times)?;
            let mut value = vec![Vec::with_capacity(times.len()); pair_list.len()];
            let mut direct = vec![Vec::with_capacity(times.len()); pair_list.len()];
            let mut diag = Vec::new();
            for snap in &tr.snapshots {
                let s = tomo.state(&snap.state)?;
                for (k, &(n, m)) in pair_list.iter().enumerate() {
                    value[k].push(or_nan(normalized_coherence(s.rho(), n, m)));
                    direct[k].push(or_nan(normalized_coherence(&s.direct, n, m)));
                }
                if let Some(r) = &s.reconstruction {
                    let dim = r.rho.dim();
                    let block = s.direct.slice(ndarray::s![..dim, ..dim]).to_owned();
                    let err = (&block - r.rho.matrix()).mapv(|z| z.norm_sqr()).sum().sqrt();
                    diag.push((r.raw_trace, r.diagnostics.min_eigenvalue, err));
                }
            }
            Ok(Point { value, direct, diag })
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut cd, mut ct, mut cn, mut cm, mut cv, mut cdir) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    let (mut rd, mut rn, mut rm, mut g, mut gs, mut gl, mut gp, mut gr, mut ep, mut er) = (vec![], vec![], vec![], vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
    let (mut td, mut tt, mut traw, mut tmin, mut terr) = (vec![], vec![], vec![], vec![], vec![]);
    for (&delta, pt) in deltas.iter().zip(&runs) {
        for (k, &(n, m)) in pair_list.iter().enumerate() {
            for (i, &t) in times.iter().enumerate() {
                cd.push(delta);
                ct.push(t);
                cn.push(n as f64);
                cm.push(m as f64);
                cv.push(pt.value[k][i]);
                cdir.push(pt.direct[k][i]);
            }
            let sel: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= fit_start && pt.value[k][i] > floor).collect();
            let ft: Vec<f64> = sel.iter().map(|&i| times[i]).collect();
            let fy: Vec<f64> = sel.iter().map(|&i| pt.value[k][i]).collect();
            // The slope of ln C is the asymptotic rate; the linear-scale fit
            // is kept for comparison.
            let (fit, lsq) = if ft.len() >= 3 {
                let ln: Vec<f64> = fy.iter().map(|v| v.ln()).collect();
                (fit_line(&ft, &ln).ok(), fit_exponential(&ft, &fy).ok())
            } else {
                (None, None)
            };
            let offset = p.gamma_phi_s() * ((n as f64) - (m as f64)).powi(2);
            let printed = decoherence_rate_theory(n, m, delta, omega, p.gamma_1_mp, p.chi_s_mp, TheoryForm::Printed).rate + offset;
            let resolved = decoherence_rate_theory(n, m, delta, omega, p.gamma_1_mp, p.chi_s_mp, TheoryForm::PairResolved).rate + offset;
            let sim = fit.map_or(f64::NAN, |f| -f.slope);
            rd.push(delta);
            rn.push(n as f64);
            rm.push(m as f64);
            g.push(sim);
            gs.push(fit.map_or(f64::NAN, |f| f.slope_std));
            gl.push(lsq.map_or(f64::NAN, |f| f.gamma));
            gp.push(printed);
            gr.push(resolved);
            ep.push(rel(sim, printed));
            er.push(rel(sim, resolved));
        }
        for (i, d) in pt.diag.iter().enumerate() {
            td.push(delta);
            tt.push(times[i]);
            traw.push(d.0);
            tmin.push(d.1);
            terr.push(d.2);
        }
    }
    let coherences = Table::new("coherences")
        .real("delta_f", "MHz", cd)
        .real("time", "us", ct)
        .real("n", "1", cn)
        .real("m", "1", cm)
        .real("value", "1", cv)
        .real("direct", "1", cdir);
    let selected = match form {
        TheoryForm::Printed => gp.clone(),
        TheoryForm::PairResolved => gr.clone(),
    };
    let rates = Table::new("rates")
        .real("delta_f", "MHz", rd)
        .real("n", "1", rn)
        .real("m", "1", rm)
        .real("gamma_sim", "/us", g)
        .real("gamma_sim_std", "/us", gs)
        .real("gamma_sim_lsq", "/us", gl)
        .real("gamma_theory", "/us", selected)
        .real("gamma_printed", "/us", gp)
        .real("gamma_pair_resolved", "/us", gr)
        .real("rel_error_printed", "1", ep)
        .real("rel_error_pair_resolved", "1", er);
    let mut tables = vec![coherences, rates];
    if !td.is_empty() {
        tables.push(
            Table::new("tomography")
                .real("delta_f", "MHz", td)
                .real("time", "us", tt)
                .real("raw_trace", "1", traw)
                .real("min_eigenvalue", "1", tmin)
                .real("frobenius_error", "1", terr),
        );
    }
    Ok(Output { tables, ..Output::default() })
}

pub(super) fn revivals(c: &Ctx) -> Result<Output> {
    let times = time_axis(c)?;
    let ratios = c.r.axis("omega_over_chi")?;
    let probe = comb_until(c, &times)?;
    let runs = ratios
        .par_iter()
        .map(|&r| -> Result<(Vec<f64>, Vec<f64>)> {
            let tr = storage_run(c, r * c.p.chi_s_mp, &probe, &times)?;
            let mut c12 = Vec::new();
            let mut c13 = Vec::new();
            for snap in &tr.snapshots {
                let s = snap.state.partial_trace(photocount_core::dynamics::models::STORAGE)?;
                c12.push(or_nan(normalized_coherence(s.matrix(), 1, 2)));
                c13.push(or_nan(normalized_coherence(s.matrix(), 1, 3)));
            }
            Ok((c12, c13))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut rr, mut tt, mut a, mut b) = (vec![], vec![], vec![], vec![]);
    let (mut sr, mut sp, mut ss) = (vec![], vec![], vec![]);
    let expected = 1.0 / c.p.chi_s_mp;
    for (&r, (c12, c13)) in ratios.iter().zip(&runs) {
        for (i, &t) in times.iter().enumerate() {
            rr.push(r);
            tt.push(t);
            a.push(c12[i]);
            b.push(c13[i]);
        }
        for (name, y) in [("1-2", c12), ("1-3", c13)] {
            sr.push(r);
            sp.push(name.to_string());
            ss.push(or_nan(peak_spacing(&times, y)));
        }
    }
    let series = Table::new("revivals").real("omega_over_chi", "1", rr).real("time", "us", tt).real("c12", "1", a).real("c13", "1", b);
    let spacing = Table::new("revival_spacing")
        .real("omega_over_chi", "1", sr)
        .text("pair", sp)
        .real("spacing", "us", ss.clone())
        .real("expected_period", "us", vec![expected; ss.len()])
        .real("ratio", "1", ss.iter().map(|s| s / expected).collect());
    Ok(Output { tables: vec![series, spacing], ..Output::default() })
}

pub(super) fn qnd(c: &Ctx) -> Result<Output> {
    let times = time_axis(c)?;
    let ratios = c.r.axis("omega_over_chi")?;
    let probe = comb_until(c, &times)?;
    let top = 6;
    let runs = ratios
        .par_iter()
        .map(|&r| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
            let tr = storage_run(c, r * c.p.chi_s_mp, &probe, &times)?;
            let n_mean = tr.real("n").expect("observed");
            let mut pops = Vec::new();
            for snap in &tr.snapshots {
                let s = snap.state.partial_trace(photocount_core::dynamics::models::STORAGE)?;
                pops.push(s.populations()[..=top].to_vec());
            }
            Ok((n_mean, pops))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new("populations");
    let mut rr = vec![];
    let mut tt = vec![];
    let mut nn = vec![];
    let mut pk = vec![Vec::new(); top + 1];
    for (&r, (n_mean, pops)) in ratios.iter().zip(&runs) {
        for (i, &ti) in times.iter().enumerate() {
            rr.push(r);
            tt.push(ti);
            nn.push(n_mean[i]);
            for k in 0..=top {
                pk[k].push(pops[i][k]);
            }
        }
    }
    t = t.real("omega_over_chi", "1", rr).real("time", "us", tt).real("n_mean", "1", nn);
    for (k, col) in pk.into_iter().enumerate() {
        t = t.real(&format!("p{k}"), "1", col);
    }
    let b2 = beta(c)?.norm_sqr();
    let span = times[times.len() - 1] - times[0];
    let loss = c.r.model_options().storage_loss;
    let predicted = |t: f64| if loss { (-b2 * (-c.p.gamma_1_s * t).exp()).exp() } else { (-b2).exp() };
    let reference = &runs[0].1;
    let mut s = Table::new("qnd_summary").real("omega_over_chi", "1", ratios.to_vec());
    let (mut p0s, mut p0e, mut rise, mut pred, mut dev) = (vec![], vec![], vec![], vec![], vec![]);
    let mut means = vec![Vec::new(); top + 1];
    for (_, pops) in &runs {
        let first = pops[0][0];
        let last = pops[pops.len() - 1][0];
        p0s.push(first);
        p0e.push(last);
        rise.push(last - first);
        pred.push(predicted(times[times.len() - 1]) - predicted(times[0]));
        let d = pops.iter().zip(reference).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max);
        dev.push(d);
        for k in 0..=top {
            let y: Vec<f64> = pops.iter().map(|v| v[k]).collect();
            means[k].push(if span > 0.0 { trapezoid(&times, &y) / span } else { y[0] });
        }
    }
    s = s
        .real("p0_start", "1", p0s)
        .real("p0_end", "1", p0e)
        .real("p0_rise", "1", rise)
        .real("p0_rise_predicted", "1", pred)
        .real("max_deviation", "1", dev);
    for (k, col) in means.into_iter().enumerate() {
        s = s.real(&format!("mean_p{k}"), "1", col);
    }
    let notes = vec![format!("max_deviation is measured against omega/chi = {}", ratios[0])];
    Ok(Output { tables: vec![t, s], notes, ..Output::default() })
}

pub(super) fn wigner_snapshot(c: &Ctx) -> Result<Output> {
    let times = time_axis(c)?;
    let kind = c.drive().probe.unwrap_or(ProbeKind::None);
    let omega = if kind == ProbeKind::None { 0.0 } else { c.r.omega() };
    let probe = match kind {
        ProbeKind::Comb => comb_until(c, &times)?,
        ProbeKind::Single => Envelope { tones: vec![Tone { offset: -c.p.chi_s_mp, phase: 0.0 }], ..square_until(&times) },
        ProbeKind::None => square_until(&times),
    };
    let tomo = StorageTomography::new(&c.r.config.tomography, true)?;
    let n_cmp = req(c.analysis().n_max, "analysis.n_max")?;
    let tr = storage_run(c, omega, &probe, &times)?;
    let mut out = Output::default();
    let (mut dt, mut dn, mut dm, mut dre, mut dim_) = (vec![], vec![], vec![], vec![], vec![]);
    let (mut xt, mut xn, mut xm, mut xre, mut xim) = (vec![], vec![], vec![], vec![], vec![]);
    let (mut ct, mut cn, mut cm, mut cv, mut cdv) = (vec![], vec![], vec![], vec![], vec![]);
    let (mut st, mut sc, mut scd, mut serr, mut straw, mut smin, mut snorm) = (vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
    let probe_name = match kind {
        ProbeKind::None => "none",
        ProbeKind::Single => "single",
        ProbeKind::Comb => "comb",
    };
    for (i, snap) in tr.snapshots.iter().enumerate() {
        let s = tomo.state(&snap.state)?;
        let (w, r) = (s.wigner.clone().expect("sampled"), s.reconstruction.as_ref().expect("reconstructed"));
        let rho = r.rho.matrix();
        let d = rho.nrows();
        for n in 0..d {
            for m in 0..d {
                dt.push(snap.time);
                dn.push(n as f64);
                dm.push(m as f64);
                dre.push(rho[(n, m)].re);
                dim_.push(rho[(n, m)].im);
                xt.push(snap.time);
                xn.push(n as f64);
                xm.push(m as f64);
                xre.push(s.direct[(n, m)].re);
                xim.push(s.direct[(n, m)].im);
            }
        }
        for (n, m) in pairs(n_cmp) {
            ct.push(snap.time);
            cn.push(n as f64);
            cm.push(m as f64);
            cv.push(or_nan(normalized_coherence(rho, n, m)));
            cdv.push(or_nan(normalized_coherence(&s.direct, n, m)));
        }
        let block = s.direct.slice(ndarray::s![..d, ..d]).to_owned();
        st.push(snap.time);
        sc.push(or_nan(mean_coherence(rho, n_cmp)));
        scd.push(or_nan(mean_coherence(&s.direct, n_cmp)));
        serr.push((&block - rho).mapv(|z| z.norm_sqr()).sum().sqrt());
        straw.push(r.raw_trace);
        smin.push(r.diagnostics.min_eigenvalue);
        snorm.push(w.norm());
        let provenance = format!(
            "{} t = {} us, beta = {}, omega/chi = {}, probe {probe_name}; {ALPHA_CONVENTION}",
            c.r.scenario.name(),
            snap.time,
            beta(c)?.re,
            c.drive().omega_over_chi.unwrap_or(0.0),
        );
        out.wigner.push(WignerRecord { name: format!("t{i}"), grid: w, provenance });
    }
    out.tables.push(Table::new("density_matrix").real("time", "us", dt).real("n", "1", dn).real("m", "1", dm).real("re", "1", dre).real("im", "1", dim_));
    out.tables.push(
        Table::new("density_matrix_direct").real("time", "us", xt).real("n", "1", xn).real("m", "1", xm).real("re", "1", xre).real("im", "1", xim),
    );
    out.tables.push(
        Table::new("coherence").real("time", "us", ct).real("n", "1", cn).real("m", "1", cm).real("value", "1", cv).real("direct", "1", cdv),
    );
    out.tables.push(
        Table::new("summary")
            .real("time", "us", st)
            .real("c_rho", "1", sc)
            .real("c_rho_direct", "1", scd)
            .real("frobenius_error", "1", serr)
            .real("raw_trace", "1", straw)
            .real("min_eigenvalue", "1", smin)
            .real("wigner_norm", "1", snorm),
    );
    Ok(out)
}
