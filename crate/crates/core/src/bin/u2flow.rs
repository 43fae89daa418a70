//! Command-line front end. Every command writes its files and a
//! `manifest.toml` into `--out`.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use u2flow::config::RunConfig;
use u2flow::error::{Error, Result};
use u2flow::flow::{self, FlowState};
use u2flow::geometry;
use u2flow::initial_data;
use u2flow::io::{self, RunManifest};
use u2flow::monitors;
use u2flow::pipeline::{self, stage};

#[derive(Parser)]
#[command(name = "u2flow", version, about = "U(2)-symmetric Ricci flow: reference metrics, spectra, singular flows and surgery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (flat TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override a configuration key, `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a Taub-NUT, Taub-Bolt, FIK or cone profile.
    Reference {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        n: Option<f64>,
    },
    /// Eigenpairs of the weighted Lichnerowicz operator on FIK with identity checks.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Build the glued initial metric.
    Glue {
        #[command(flatten)]
        common: Common,
    },
    /// Perturb the glued metric along the unstable modes.
    Perturb {
        #[command(flatten)]
        common: Common,
        /// Glued profile; built from the configuration when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Flow a profile, or resume from a checkpoint.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "resume")]
        input: Option<PathBuf>,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Detect the singularity of a finished run and cap it with a nut.
    Surgery {
        #[command(flatten)]
        common: Common,
        /// Checkpoint of a run that reached the blow-up threshold.
        #[arg(long)]
        input: PathBuf,
    },
    /// glue, perturb, flow, detect, surgery, flow, report.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
    /// Bisection on the top-mode coefficient.
    Shoot {
        #[command(flatten)]
        common: Common,
    },
    /// Invariant suite over a recorded time series.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl Ctx {
    fn new(name: &str, common: &Common, extra: &[String]) -> Result<Self> {
        let text = match &common.config {
            Some(p) => Some(fs::read_to_string(p)?),
            None => None,
        };
        let mut overrides = common.set.clone();
        overrides.extend_from_slice(extra);
        let cfg = RunConfig::load(text.as_deref(), &overrides)?;
        fs::create_dir_all(&common.out)?;
        let manifest = RunManifest::new(name, &cfg);
        Ok(Self { cfg, out: common.out.clone(), manifest, start: Instant::now() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.wall_clock_s = self.start.elapsed().as_secs_f64();
        self.manifest.write(&self.out.join("manifest.toml"))
    }
}

fn grid_summary(m: &mut RunManifest, p: &u2flow::profile::Profile) {
    m.grid("nodes", p.len() as i64);
    m.grid("s_max", p.s_max());
    m.grid("axis_spacing", p.s[0] * 2.0);
    m.grid("topology", p.topology.name());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Reference { common, family, n } => {
            let mut extra = Vec::new();
            if let Some(f) = family {
                extra.push(format!("family=\"{f}\""));
            }
            if let Some(n) = n {
                extra.push(format!("n={n:e}"));
            }
            let mut ctx = Ctx::new("reference", &common, &extra)?;
            let (p, mass) = pipeline::reference_profile(&ctx.cfg)?;
            io::write_profile(&ctx.path("profile.txt"), &p)?;
            grid_summary(&mut ctx.manifest, &p);
            ctx.manifest.summary("mass", mass);
            ctx.manifest.summary("class_pass", geometry::class_check(&p).in_class());
            println!("{} profile, {} nodes, mass {mass}", ctx.cfg.family, p.len());
            ctx.finish()
        }
        Command::Spectrum { common } => {
            let mut ctx = Ctx::new("spectrum", &common, &[])?;
            let bg = stage("soliton", pipeline::soliton())?;
            let (res, checks) = stage("spectrum", pipeline::spectrum(&ctx.cfg, &bg))?;
            io::write_spectrum(&ctx.path("spectrum.txt"), &res)?;
            for (k, h) in res.eigentensors.iter().enumerate() {
                io::write_tensor(&ctx.path(&format!("eigentensor_{k}.txt")), h)?;
            }
            let m = &mut ctx.manifest;
            m.grid("cells", res.grid.cells as i64);
            m.grid("s_max", res.grid.s_max);
            m.summary("k", res.k as i64);
            m.summary("lambda_star", res.lambda_star);
            m.summary("ricci_residual", checks.ricci_residual);
            m.summary("hessian_residual", checks.hessian_residual);
            m.summary("self_adjoint_defect", checks.self_adjoint_defect);
            m.summary("gram_defect", checks.gram_defect);
            for (k, l) in res.eigenvalues.iter().enumerate() {
                println!("{k} {l:e} {:e}", res.residuals[k]);
            }
            ctx.finish()
        }
        Command::Glue { common } => {
            let mut ctx = Ctx::new("glue", &common, &[])?;
            let bg = stage("soliton", pipeline::soliton())?;
            let g0 = stage("glue", pipeline::g0(&ctx.cfg, &bg))?;
            io::write_profile(&ctx.path("g0.txt"), &g0.profile)?;
            grid_summary(&mut ctx.manifest, &g0.profile);
            ctx.manifest.summary("alpha", g0.alpha);
            ctx.manifest.summary("delta", g0.delta);
            ctx.manifest.summary("class_pass", g0.class.in_class());
            ctx.manifest.summary("mass", geometry::mass(&g0.profile).unwrap_or(f64::NAN));
            println!("G0: alpha {} delta {} in class {}", g0.alpha, g0.delta, g0.class.in_class());
            ctx.finish()
        }
        Command::Perturb { common, input } => {
            let mut ctx = Ctx::new("perturb", &common, &[])?;
            let bg = stage("soliton", pipeline::soliton())?;
            let (res, _) = stage("spectrum", pipeline::spectrum(&ctx.cfg, &bg))?;
            let g0 = match input {
                Some(p) => io::read_profile(&p)?,
                None => stage("glue", pipeline::g0(&ctx.cfg, &bg))?.profile,
            };
            let glue = ctx.cfg.glue();
            let p = stage("perturb", initial_data::perturb(&g0, &glue, &bg, &res))?;
            io::write_profile(&ctx.path("perturbed.txt"), &p)?;
            grid_summary(&mut ctx.manifest, &p);
            ctx.manifest.summary("p_cap", glue.p_cap(res.lambda_star));
            ctx.manifest.summary("mass", geometry::mass(&p).unwrap_or(f64::NAN));
            ctx.finish()
        }
        Command::Simulate { common, input, resume } => {
            let mut ctx = Ctx::new("simulate", &common, &[])?;
            let fc = ctx.cfg.flow();
            let mut state = match (input, resume) {
                (_, Some(ck)) => io::read_checkpoint(&ck)?,
                (Some(p), None) => FlowState::new(io::read_profile(&p)?, &fc)?.starting_at(ctx.cfg.t_start),
                (None, None) => return Err(Error::Config("simulate needs --input or --resume".into())),
            };
            let ck = ctx.path("checkpoint.bin");
            let r = pipeline::simulate(&mut state, &fc, ctx.cfg.checkpoint_every, Some(&ck));
            io::write_series(&ctx.path("series.txt"), &state.history)?;
            io::write_profile(&ctx.path("final.txt"), &state.profile)?;
            io::write_checkpoint(&ck, &state)?;
            let reason = stage("flow", r)?;
            grid_summary(&mut ctx.manifest, &state.profile);
            let last = state.last();
            ctx.manifest.summary("stop", format!("{reason:?}"));
            ctx.manifest.summary("t", state.t);
            ctx.manifest.summary("steps", state.steps as i64);
            ctx.manifest.summary("max_rm", last.max_rm);
            ctx.manifest.summary("mass", last.mass);
            println!("stopped ({reason:?}) at t = {} after {} steps", state.t, state.steps);
            ctx.finish()
        }
        Command::Surgery { common, input } => {
            let mut ctx = Ctx::new("surgery", &common, &[])?;
            let bg = stage("soliton", pipeline::soliton())?;
            let state = io::read_checkpoint(&input)?;
            let run = stage("detect", pipeline::singular_report(&ctx.cfg, state, &bg))?;
            let s = stage("surgery", pipeline::surgery_step(&ctx.cfg, &run))?;
            io::write_profile(&ctx.path("capped.txt"), &s.capped)?;
            grid_summary(&mut ctx.manifest, &s.capped);
            blowup_summary(&mut ctx.manifest, &run.blowup);
            surgery_summary(&mut ctx.manifest, &s.report);
            ctx.finish()
        }
        Command::Pipeline { common } => {
            let mut ctx = Ctx::new("pipeline", &common, &[])?;
            let rep = pipeline::pipeline(&ctx.cfg, Some(&ctx.out))?;
            grid_summary(&mut ctx.manifest, &rep.g0.profile);
            let m = &mut ctx.manifest;
            m.summary("alpha", rep.g0.alpha);
            m.summary("delta", rep.g0.delta);
            m.summary("lambda_star", rep.spectrum.lambda_star);
            blowup_summary(m, &rep.singular.blowup);
            surgery_summary(m, &rep.surgery.report);
            m.summary("singular_invariants_pass", rep.singular_invariants.all_pass());
            m.summary("capped_invariants_pass", rep.capped_invariants.all_pass());
            m.summary("final_nut_residual", rep.final_nut_residual());
            m.summary("converged_at", rep.converged_at.unwrap_or(f64::NAN));
            m.summary("final_mass", rep.capped.last().mass);
            println!(
                "blow-up at T = {}, surgery at R = {}, nut residual {} at t = {}",
                rep.singular.blowup.t_hat,
                rep.surgery.report.r_bar,
                rep.final_nut_residual(),
                rep.capped.t
            );
            ctx.finish()
        }
        Command::Shoot { common } => {
            let mut ctx = Ctx::new("shoot", &common, &[])?;
            let bg = stage("soliton", pipeline::soliton())?;
            let (res, _) = stage("spectrum", pipeline::spectrum(&ctx.cfg, &bg))?;
            let r = stage("shoot", pipeline::shoot(&ctx.cfg, &bg, &res))?;
            let mut text = String::from("# columns p outcome exit_t exit_component\n");
            for s in &r.shots {
                let (t, c) = s.exit.map_or((f64::NAN, "none"), |(t, c)| (t, c.name()));
                text.push_str(&format!("{:e} {} {t:e} {c}\n", s.p, s.outcome.name()));
            }
            fs::write(ctx.path("shots.txt"), text)?;
            let m = &mut ctx.manifest;
            m.summary("bracket_lo", r.bracket.0);
            m.summary("bracket_hi", r.bracket.1);
            m.summary("width", r.widths.last().copied().unwrap_or(f64::NAN));
            m.summary("exit_time_monotone", r.exit_time_monotone());
            println!("bracket [{:e}, {:e}]", r.bracket.0, r.bracket.1);
            ctx.finish()
        }
        Command::Check { common, input } => {
            let mut ctx = Ctx::new("check", &common, &[])?;
            let history = io::read_series(&input)?;
            let rep = monitors::invariant_suite(&history, &ctx.cfg.tolerances())?;
            for c in &rep.checks {
                println!("{} {} value {:e} bound {:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
                ctx.manifest.summary(c.name, c.pass);
            }
            ctx.manifest.summary("rm_growth", rep.rm_growth);
            let pass = rep.all_pass();
            ctx.finish()?;
            if pass {
                Ok(())
            } else {
                Err(Error::Structural("invariant suite failed".into()))
            }
        }
    }
}

fn blowup_summary(m: &mut RunManifest, b: &flow::BlowupReport) {
    m.summary("t_hat", b.t_hat);
    m.summary("type_one_sup", b.type_one_sup);
    m.summary("blowup_r", b.blowup_interval.1);
    m.summary("rescaled_u_distance", b.rescaled_u_distance.unwrap_or(f64::NAN));
    m.summary("rm_growth", b.growth);
}

fn surgery_summary(m: &mut RunManifest, s: &u2flow::surgery::SurgeryReport) {
    m.summary("r_bar", s.r_bar);
    m.summary("mass_before", s.mass_before);
    m.summary("mass_after", s.mass_after);
    m.summary("seam_curvature_jump", s.seam_curvature_jump);
    m.summary("capped_class_pass", s.class_pass);
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
