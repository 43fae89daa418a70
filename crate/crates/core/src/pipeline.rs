//! Stages of the end-to-end run: soliton, spectrum, glued data, perturbation,
//! singular flow, surgery and the flow of the capped metric, plus the box
//! shooting driver.

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::{self, BlowupReport, FlowConfig, FlowState, StopReason};
use crate::geometry;
use crate::initial_data::{self, G0};
use crate::io;
use crate::monitors::{self, BoxComponent, InvariantReport, Shot, ShotOutcome, ShootResult};
use crate::profile::Profile;
use crate::reference::{self, FikSettings, SolitonBackground, TaubBolt, TaubNut};
use crate::spectral::{self, SpectralOperator, SpectralResult};
use crate::surgery::{self, Admissibility, SurgeryReport};

/// Wraps a stage failure with the stage name.
pub fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage { stage: name.into(), source: Box::new(other) },
    })
}

/// A closed-form or constructed reference profile and its mass.
pub fn reference_profile(cfg: &RunConfig) -> Result<(Profile, f64)> {
    let p = match cfg.family.as_str() {
        "nut" => TaubNut::new(cfg.n)?.profile(cfg.reference_nodes, cfg.rho_max)?,
        "bolt" => TaubBolt::new(cfg.n)?.profile(cfg.reference_nodes, cfg.rho_max)?,
        "fik" => soliton()?.profile,
        "cone" => reference::cone_fik(cfg.reference_nodes, cfg.rho_max)?,
        other => return Err(Error::Config(format!("unknown family `{other}`"))),
    };
    let mass = geometry::mass(&p).unwrap_or(0.0);
    Ok((p, mass))
}

pub fn soliton() -> Result<SolitonBackground> {
    reference::fik_shoot(&FikSettings::default())
}

/// Identity residuals of the weighted operator on the soliton.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumChecks {
    /// `|L Ric - Ric| / |Ric|`.
    pub ricci_residual: f64,
    /// `|L Hess f| / |Hess f|`.
    pub hessian_residual: f64,
    /// `|<L a, b> - <a, L b>| / (|L a| |b| + |a| |L b|)` on random tensors.
    pub self_adjoint_defect: f64,
    pub gram_defect: f64,
}

pub fn spectrum(cfg: &RunConfig, bg: &SolitonBackground) -> Result<(SpectralResult, SpectrumChecks)> {
    let op = SpectralOperator::new(bg, cfg.spectral_grid())?;
    let res = spectral::eigensolve_with(&op, cfg.eigen_count, &cfg.eigen())?;
    let checks = spectrum_checks(&op, bg, &res, cfg.eigen_seed)?;
    Ok((res, checks))
}

pub fn spectrum_checks(
    op: &SpectralOperator,
    bg: &SolitonBackground,
    res: &SpectralResult,
    seed: u64,
) -> Result<SpectrumChecks> {
    let rel = |x: &spectral::SymTensorU2, target: &spectral::SymTensorU2, scale: f64| -> Result<f64> {
        let mut d = op.apply(x)?;
        d.axpy(-scale, target);
        Ok(op.norm(&d)? / op.norm(x)?)
    };
    let ric = op.ricci(bg)?;
    let hess = op.hessian_f(bg)?;
    let a = spectral::random_regular_tensor(op.nodes(), seed.wrapping_add(1));
    let b = spectral::random_regular_tensor(op.nodes(), seed.wrapping_add(2));
    let (la, lb) = (op.apply(&a)?, op.apply(&b)?);
    let lhs = op.inner(&la, &b)?;
    let rhs = op.inner(&a, &lb)?;
    let scale = op.norm(&la)? * op.norm(&b)? + op.norm(&a)? * op.norm(&lb)?;
    Ok(SpectrumChecks {
        ricci_residual: rel(&ric, &ric, 1.0)?,
        hessian_residual: rel(&hess, &hess, 0.0)?,
        self_adjoint_defect: (lhs - rhs).abs() / scale,
        gram_defect: res.gram_defect(op)?,
    })
}

pub fn g0(cfg: &RunConfig, bg: &SolitonBackground) -> Result<G0> {
    initial_data::build_g0(&cfg.glue(), bg)
}

/// Runs `state` under `fc`, writing a checkpoint after every
/// `checkpoint_every` records when a path is given.
pub fn simulate(
    state: &mut FlowState,
    fc: &FlowConfig,
    checkpoint_every: u64,
    checkpoint: Option<&Path>,
) -> Result<StopReason> {
    let Some(path) = checkpoint.filter(|_| checkpoint_every > 0) else {
        let r = flow::run(state, fc);
        if let (Some(path), Err(_)) = (checkpoint, &r) {
            io::write_checkpoint(path, state)?;
        }
        return r;
    };
    let chunk = checkpoint_every * fc.record_every;
    loop {
        let limit = (state.steps / chunk + 1) * chunk;
        let seg = FlowConfig { max_steps: limit.min(fc.max_steps), ..fc.clone() };
        let r = flow::run(state, &seg);
        io::write_checkpoint(path, state)?;
        match r? {
            StopReason::StepLimit if limit < fc.max_steps => continue,
            other => return Ok(other),
        }
    }
}

/// Flow configuration of the singular run, starting at `t0`.
pub fn singular_flow(cfg: &RunConfig) -> FlowConfig {
    FlowConfig { t_end: cfg.t_end.max(cfg.t0 + 1.0), stop_at_blowup: true, ..cfg.flow() }
}

/// Flow configuration after surgery at time `t`.
pub fn capped_flow(cfg: &RunConfig, t: f64) -> FlowConfig {
    FlowConfig {
        t_end: t + cfg.post_surgery_time,
        record_every: cfg.post_surgery_record_every,
        stop_at_blowup: false,
        ..cfg.flow()
    }
}

/// Result of [`singular_run`].
#[derive(Clone, Debug)]
pub struct SingularRun {
    pub state: FlowState,
    pub blowup: BlowupReport,
}

/// Flows `g` from `t0` to the blow-up threshold and analyses the singularity.
pub fn singular_run(cfg: &RunConfig, g: Profile, bg: &SolitonBackground) -> Result<SingularRun> {
    let fc = singular_flow(cfg);
    let mut state = FlowState::new(g, &fc)?.starting_at(cfg.t0);
    flow::run(&mut state, &fc)?;
    singular_report(cfg, state, bg)
}

/// Blow-up analysis of a finished singular run.
pub fn singular_report(cfg: &RunConfig, mut state: FlowState, bg: &SolitonBackground) -> Result<SingularRun> {
    let fc = singular_flow(cfg);
    let mut blowup = flow::detect_singularity(&mut state, &fc)?;
    let (_, d) = flow::blowup_rescale(&state.profile, state.t, blowup.t_hat, bg, cfg.rescale_radius)?;
    blowup.rescaled_u_distance = Some(d);
    Ok(SingularRun { state, blowup })
}

#[derive(Clone, Debug)]
pub struct SurgeryOutcome {
    pub capped: Profile,
    pub report: SurgeryReport,
    pub admissibility: Admissibility,
}

pub fn surgery_step(cfg: &RunConfig, run: &SingularRun) -> Result<SurgeryOutcome> {
    let r = run.blowup.blowup_interval.1;
    let r_bar = cfg.r_bar_factor * r;
    let threshold = run.state.blowup_threshold(&singular_flow(cfg));
    let admissibility = surgery::surgery_admissible(Some(&run.blowup), &run.state.profile, threshold, r_bar)?;
    if !admissibility.admissible {
        return Err(Error::Precondition(format!("surgery at R̄ = {r_bar} not admissible: {}", admissibility.reason)));
    }
    let (capped, report) = surgery::excise_and_cap(&run.state.profile, r_bar, r)?;
    Ok(SurgeryOutcome { capped, report, admissibility })
}

/// Everything the end-to-end run produces.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub g0: G0,
    pub spectrum: SpectralResult,
    pub initial: Profile,
    pub singular: SingularRun,
    pub singular_invariants: InvariantReport,
    pub surgery: SurgeryOutcome,
    pub capped: FlowState,
    pub capped_invariants: InvariantReport,
    /// First time the Taub-NUT residual fell below the threshold.
    pub converged_at: Option<f64>,
}

impl PipelineReport {
    pub fn final_nut_residual(&self) -> f64 {
        self.capped.last().nut_residual
    }
}

/// Files written by [`pipeline`] into the output directory.
pub struct PipelineFiles {
    pub dir: PathBuf,
}

impl PipelineFiles {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// glue, perturb, flow to the singularity, detect, surgery, flow of the
/// capped metric. Writes stagewise snapshots when `out` is given, and
/// `checkpoint_<stage>.bin` with the latest flow state when a stage after the
/// start of the flow fails.
pub fn pipeline(cfg: &RunConfig, out: Option<&Path>) -> Result<PipelineReport> {
    let files = out.map(|d| PipelineFiles { dir: d.to_path_buf() });
    let save = |name: &str, p: &Profile| -> Result<()> {
        if let Some(f) = &files {
            io::write_profile(&f.path(name), p)?;
        }
        Ok(())
    };
    let bg = stage("soliton", soliton())?;
    let (spectrum, _) = stage("spectrum", spectrum(cfg, &bg))?;
    let g0 = stage("glue", g0(cfg, &bg))?;
    save("g0.txt", &g0.profile)?;
    let initial = stage("perturb", initial_data::perturb(&g0.profile, &cfg.glue(), &bg, &spectrum))?;
    save("initial.txt", &initial)?;

    // Any failure from here on leaves a checkpoint of the latest flow state.
    let checkpoint = |name: &str, state: &FlowState| -> Result<()> {
        if let Some(f) = &files {
            io::write_checkpoint(&f.path(&format!("checkpoint_{name}.bin")), state)?;
        }
        Ok(())
    };
    let fail = |name: &str, state: &FlowState, e: Error| -> Error {
        if let Err(w) = checkpoint(name, state) {
            return Error::Stage { stage: name.into(), source: Box::new(w) };
        }
        Error::Stage { stage: name.into(), source: Box::new(e) }
    };

    let fc = singular_flow(cfg);
    let mut state = stage("flow", FlowState::new(initial.clone(), &fc))?.starting_at(cfg.t0);
    if let Err(e) = flow::run(&mut state, &fc) {
        return Err(fail("flow", &state, e));
    }
    save("singular_final.txt", &state.profile)?;
    let singular = match singular_report(cfg, state.clone(), &bg) {
        Ok(s) => s,
        Err(e) => return Err(fail("detect", &state, e)),
    };
    if let Some(f) = &files {
        io::write_series(&f.path("series_singular.txt"), &singular.state.history)?;
    }
    let singular_invariants = stage("detect", monitors::invariant_suite(&singular.state.history, &cfg.tolerances()))?;

    let surgery = match surgery_step(cfg, &singular) {
        Ok(s) => s,
        Err(e) => return Err(fail("surgery", &singular.state, e)),
    };
    save("capped.txt", &surgery.capped)?;

    let fc2 = capped_flow(cfg, singular.state.t);
    let mut capped = stage("capped_flow", FlowState::new(surgery.capped.clone(), &fc2))?.starting_at(singular.state.t);
    if let Err(e) = flow::run(&mut capped, &fc2) {
        return Err(fail("capped_flow", &capped, e));
    }
    if let Some(f) = &files {
        io::write_series(&f.path("series_capped.txt"), &capped.history)?;
    }
    save("final.txt", &capped.profile)?;
    let capped_invariants = stage("report", monitors::invariant_suite(&capped.history, &cfg.tolerances()))?;
    let converged_at = capped.history.iter().find(|r| r.nut_residual < cfg.nut_threshold).map(|r| r.t);
    if converged_at.is_none() {
        let e = Error::Convergence(format!(
            "Taub-NUT residual {} still above {} at t = {}",
            capped.last().nut_residual,
            cfg.nut_threshold,
            capped.t
        ));
        return Err(fail("report", &capped, e));
    }
    Ok(PipelineReport {
        g0,
        spectrum,
        initial,
        singular,
        singular_invariants,
        surgery,
        capped,
        capped_invariants,
        converged_at,
    })
}

/// Shared inputs of the shots.
pub struct ShotSetup<'a> {
    pub cfg: &'a RunConfig,
    pub bg: &'a SolitonBackground,
    pub spectrum: &'a SpectralResult,
    pub op: SpectralOperator,
    pub g0: Profile,
}

impl<'a> ShotSetup<'a> {
    pub fn new(cfg: &'a RunConfig, bg: &'a SolitonBackground, spectrum: &'a SpectralResult) -> Result<Self> {
        let glue = initial_data::GlueConfig { nodes: cfg.shoot_nodes, ..cfg.glue() };
        let g0 = initial_data::build_g0(&glue, bg)?.profile;
        let op = SpectralOperator::new(bg, spectrum.grid)?;
        Ok(Self { cfg, bg, spectrum, op, g0 })
    }

    /// `|p|` allowed by the perturbation cap.
    pub fn cap(&self) -> f64 {
        self.cfg.glue().p_cap(self.spectrum.lambda_star)
    }

    /// Flows `G_p` with `p` on the top mode until it leaves the box. The
    /// outcome is the sign of the top-mode coefficient at the last sample:
    /// positive means the bolt is smaller than the soliton's.
    pub fn shoot(&self, p: f64) -> Result<Shot> {
        let glue = initial_data::GlueConfig { p: vec![p], nodes: self.cfg.shoot_nodes, ..self.cfg.glue() };
        let g = initial_data::perturb(&self.g0, &glue, self.bg, self.spectrum)?;
        let params = self.cfg.box_params(self.spectrum.lambda_star)?;
        let fc = FlowConfig { t_end: self.cfg.box_t_end, ..self.cfg.flow() };
        let mut state = FlowState::new(g, &fc)?.starting_at(self.cfg.t0);
        let mut last = None;
        let mut exit: Option<(f64, BoxComponent)> = None;
        flow::run_with(&mut state, &fc, |s, _| {
            let h = monitors::deviation_from_soliton(&s.profile, s.t, self.bg, self.op.nodes())?;
            let sample = monitors::box_sample(s.t, &h, &self.op, self.bg, self.spectrum)?;
            let v = monitors::box_violation(&sample, &params);
            last = Some(sample);
            if let Some(c) = v {
                exit = Some((s.t, c));
                return Ok(true);
            }
            Ok(false)
        })?;
        let top = last.map_or(0.0, |s| s.coefficients[0]);
        let outcome = if top > 0.0 { ShotOutcome::BoltCollapse } else { ShotOutcome::EscapeOutward };
        Ok(Shot { p, outcome, exit })
    }
}

/// Bisection over `p ∈ [-r, r] · cap` with `r = shoot_range`.
pub fn shoot(cfg: &RunConfig, bg: &SolitonBackground, spectrum: &SpectralResult) -> Result<ShootResult> {
    let setup = ShotSetup::new(cfg, bg, spectrum)?;
    let w = cfg.shoot_range * setup.cap();
    monitors::box_shoot((-w, w), cfg.shoot_iterations, |p| setup.shoot(p))
}
