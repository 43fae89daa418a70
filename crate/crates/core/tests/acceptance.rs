//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use u2flow::config::RunConfig;
use u2flow::flow::{self, FlowConfig, FlowState};
use u2flow::geometry;
use u2flow::monitors;
use u2flow::pipeline;
use u2flow::profile::Profile;
use u2flow::reference::{self, SolitonBackground, TaubBolt, TaubNut};
use u2flow::spectral::{self, SpectralOperator, SpectralResult};

type Outcome = Result<String, String>;

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_ricci(p: &Profile) -> f64 {
    geometry::curvature(p).unwrap().iter().map(|f| f.max_abs_ricci()).fold(0.0, f64::max)
}

/// Largest change of `(b, c)` after flowing to `t_end`, and the change that
/// truncation error alone produces at the initial state.
fn drift_and_error(p: &Profile, t_end: f64) -> (f64, f64) {
    let fc = FlowConfig { t_end, stop_at_blowup: false, ..FlowConfig::default() };
    let rates = flow::rhs(p, fc.frozen).unwrap();
    let rate = rates.b.iter().chain(&rates.c).fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut slaved = p.clone();
    flow::slave_axis(&mut slaved);
    let defect = (slaved.b[0] - p.b[0]).abs().max((slaved.c[0] - p.c[0]).abs());
    let mut st = FlowState::new(p.clone(), &fc).unwrap();
    flow::run(&mut st, &fc).unwrap();
    let q = &st.profile;
    let drift = (0..p.len()).fold(0.0_f64, |m, i| m.max((q.b[i] - p.b[i]).abs()).max((q.c[i] - p.c[i]).abs()));
    (drift, (t_end * rate).max(defect))
}

fn criterion_1() -> Outcome {
    let sizes = [500, 1000, 2000];
    let mut detail = String::new();
    let mut ok = true;
    for (name, make) in [
        ("nut", &(|n| TaubNut::new(1.0).unwrap().profile(n, 30.0).unwrap()) as &dyn Fn(usize) -> Profile),
        ("bolt", &|n| TaubBolt::new(1.0).unwrap().profile(n, 30.0).unwrap()),
    ] {
        let profiles: Vec<Profile> = sizes.iter().map(|&n| make(n)).collect();
        let errs: Vec<f64> = profiles.iter().map(max_ricci).collect();
        let order = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
        ok &= order >= 1.8;
        let mut ratios = Vec::new();
        for p in &profiles {
            let (drift, err) = drift_and_error(p, 0.1);
            ratios.push(drift / err);
            ok &= drift < 5.0 * err;
        }
        detail += &format!("{name}: max|Ric| {} order {order:.2}, drift/error {}; ", list(&errs), list(&ratios));
    }
    check(ok, detail)
}

fn criterion_2() -> Outcome {
    let nut = geometry::mass(&TaubNut::new(1.0).unwrap().profile(1000, 40.0).unwrap()).unwrap();
    let bolt = geometry::mass(&TaubBolt::new(1.0).unwrap().profile(1000, 40.0).unwrap()).unwrap();
    check((nut - 0.25).abs() < 1e-3 && (bolt - 0.25).abs() < 1e-3, format!("mass nut {nut:.6} bolt {bolt:.6}"))
}

fn criterion_3(bg: &SolitonBackground) -> Outcome {
    let p = &bg.profile;
    let n = p.len() - 1;
    let residual = reference::soliton_residual(bg);
    let kahler = reference::kahler_residual(p);
    let eb = (p.b[n] / p.s[n] - reference::cone_b_slope()).abs();
    let ec = (p.c[n] / p.s[n] - reference::cone_c_slope()).abs();
    let delta = 1.0 - p.u().iter().fold(0.0_f64, |m, &u| m.max(u));
    check(
        residual < 1e-6 && kahler < 1e-8 && eb < 1e-3 && ec < 1e-3 && delta > 0.0,
        format!("soliton residual {residual:.2e}, Kähler {kahler:.2e}, slope errors {eb:.2e} {ec:.2e}, δ {delta:.4}"),
    )
}

fn criterion_4(cfg: &RunConfig, bg: &SolitonBackground, res: &SpectralResult) -> Outcome {
    let op = SpectralOperator::new(bg, res.grid).unwrap();
    let c = pipeline::spectrum_checks(&op, bg, res, cfg.eigen_seed).unwrap();
    let fine_settings = spectral::EigenSettings { grid: res.grid.refined(), ..cfg.eigen() };
    let fine = spectral::eigensolve(bg, cfg.eigen_count, &fine_settings).unwrap();
    let scale = res.eigenvalues[0].abs();
    let shift = res
        .eigenvalues
        .iter()
        .zip(&fine.eigenvalues)
        .take(res.k + 2)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs() / a.abs().max(0.01 * scale)));
    check(
        c.ricci_residual < 1e-4 && c.hessian_residual < 1e-4 && c.self_adjoint_defect < 1e-8 && res.k >= 2 && shift < 0.01,
        format!(
            "L Ric {:.2e}, L Hess f {:.2e}, self-adjoint {:.2e}, K {}, λ {:.5?}, doubling shift {shift:.2e}",
            c.ricci_residual,
            c.hessian_residual,
            c.self_adjoint_defect,
            res.k,
            &res.eigenvalues[..res.k + 2]
        ),
    )
}

fn criterion_5(cfg: &RunConfig, bg: &SolitonBackground) -> (Outcome, Option<FlowState>) {
    let g0 = pipeline::g0(cfg, bg).unwrap();
    let cfg0 = RunConfig { p: vec![0.0], ..cfg.clone() };
    let run = match pipeline::singular_run(&cfg0, g0.profile, bg) {
        Ok(r) => r,
        Err(e) => return (Err(format!("unperturbed run failed: {e}")), None),
    };
    let ratios: Vec<f64> = run.state.history.iter().map(|r| r.type_one_ratio).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = (hi - lo) / mean;
    (
        check(
            spread < 0.05,
            format!(
                "(T̂-t) max|Rm| in [{lo:.4}, {hi:.4}] over {} records, spread {spread:.2e}, T̂ {:.8}",
                ratios.len(),
                run.blowup.t_hat
            ),
        ),
        Some(run.state),
    )
}

fn criterion_6(rep: &pipeline::PipelineReport) -> Outcome {
    let b = &rep.singular.blowup;
    let h = &rep.singular.state.history;
    let shrink = h.last().unwrap().bolt_size / h[0].bolt_size;
    let c_ratio = h.last().unwrap().axis_c / h[0].axis_c;
    let d = b.rescaled_u_distance.unwrap_or(f64::INFINITY);
    check(
        shrink < 0.1 && c_ratio < 0.1 && b.type_one_sup.is_finite() && b.blowup_interval.0 == 0.0 && d < 0.05,
        format!(
            "bolt b(0) ratio {shrink:.2e}, axis c ratio {c_ratio:.2e}, Type-I sup {:.4}, blow-up set [0, {:.3}], rescaled u distance {d:.2e}",
            b.type_one_sup, b.blowup_interval.1
        ),
    )
}

fn criterion_7(cfg: &RunConfig, rep: &pipeline::PipelineReport, unperturbed: Option<&FlowState>) -> Outcome {
    let tol = cfg.tolerances();
    let mut runs = vec![("singular", &rep.singular.state.history), ("capped", &rep.capped.history)];
    if let Some(s) = unperturbed {
        runs.push(("unperturbed", &s.history));
    }
    let mut ok = true;
    let mut detail = String::new();
    for (name, h) in runs {
        let r = monitors::invariant_suite(h, &tol).unwrap();
        ok &= r.all_pass();
        let failed: Vec<_> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        detail += &format!("{name}: {} checks, failed {failed:?}; ", r.checks.len());
    }
    let growth = rep.singular_invariants.rm_growth;
    ok &= growth >= 1e3;
    check(ok, format!("{detail}max|Rm| growth {growth:.3e}"))
}

fn criterion_8(cfg: &RunConfig, rep: &pipeline::PipelineReport) -> Outcome {
    let s = &rep.surgery.report;
    let last = rep.capped.last();
    let drift = (last.mass - s.mass_before).abs();
    let res = last.nut_residual;
    check(
        s.class_pass && s.mass_before == s.mass_after && res < cfg.nut_threshold && drift < 1e-3,
        format!(
            "R̄ {:.3}, capped in class {}, mass {:.6} -> {:.6}, final mass drift {drift:.2e}, nut residual {res:.2e} (below threshold from t = {:.1})",
            s.r_bar,
            s.class_pass,
            s.mass_before,
            s.mass_after,
            rep.converged_at.unwrap_or(f64::NAN)
        ),
    )
}

fn criterion_9(cfg: &RunConfig, bg: &SolitonBackground, res: &SpectralResult) -> Outcome {
    let r = match pipeline::shoot(cfg, bg, res) {
        Ok(r) => r,
        Err(e) => return Err(format!("shoot failed: {e}")),
    };
    let distinct = r.shots[0].outcome != r.shots[1].outcome;
    let halving = r.widths.windows(2).all(|w| (w[1] - 0.5 * w[0]).abs() <= 1e-12 * w[0]);
    check(
        distinct && halving && r.exit_time_monotone(),
        format!(
            "bracket [{:.4e}, {:.4e}], widths {}, endpoint outcomes {} / {}, exit-time monotone {}",
            r.bracket.0,
            r.bracket.1,
            list(&r.widths),
            r.shots[0].outcome.name(),
            r.shots[1].outcome.name(),
            r.exit_time_monotone()
        ),
    )
}

fn report(n: usize, outcome: &Outcome, elapsed: Duration) -> bool {
    let (tag, detail) = match outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {n}: {tag} [{:.1}s] {detail}", elapsed.as_secs_f64());
    outcome.is_ok()
}

fn main() -> ExitCode {
    let cfg = RunConfig::default();
    let mut all = true;
    let mut timed = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        all &= report(n, &o, t.elapsed());
    };
    timed(1, &mut criterion_1);
    timed(2, &mut criterion_2);

    let t = Instant::now();
    let bg = pipeline::soliton().expect("soliton construction");
    let soliton_time = t.elapsed();
    let t = Instant::now();
    let o = criterion_3(&bg);
    all &= report(3, &o, t.elapsed() + soliton_time);

    let t = Instant::now();
    let (res, _) = pipeline::spectrum(&cfg, &bg).expect("spectrum");
    let spectrum_time = t.elapsed();
    let t = Instant::now();
    let o = criterion_4(&cfg, &bg, &res);
    all &= report(4, &o, t.elapsed() + spectrum_time);

    let t = Instant::now();
    let (o, unperturbed) = criterion_5(&cfg, &bg);
    all &= report(5, &o, t.elapsed());

    let t = Instant::now();
    let rep = pipeline::pipeline(&cfg, None);
    let pipeline_time = t.elapsed();
    match &rep {
        Ok(rep) => {
            all &= report(6, &criterion_6(rep), pipeline_time);
            all &= report(7, &criterion_7(&cfg, rep, unperturbed.as_ref()), Duration::ZERO);
            all &= report(8, &criterion_8(&cfg, rep), Duration::ZERO);
        }
        Err(e) => {
            for n in 6..=8 {
                all &= report(n, &Err(format!("pipeline failed: {e}")), pipeline_time);
            }
        }
    }

    let t = Instant::now();
    all &= report(9, &criterion_9(&cfg, &bg, &res), t.elapsed());

    if all {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
