//! Reduced Ricci flow of `(b, c)` at fixed arclength from the axis:
//!
//! ```text
//! b_t = b_ss + (c_s/c + b_s/b) b_s + 2c^2/b^3 - 4/b - b_s V
//! c_t = c_ss + 2 b_s c_s/b - 2c^3/b^4 - c_s V
//! V   = ∫_0^s (2 b_ss/b + c_ss/c) ds
//! ```
//!
//! The grid `s(r)` is fixed, so the lapse is the grid Jacobian and does not
//! evolve. The first node is slaved to the axis conditions. Integrated with
//! SSP-RK3 under `dt = κ (min a Δr)^2`.

use crate::error::{Error, Result};
use crate::geometry::{self, CurvatureFrame};
use crate::profile::{GridMap, Profile, SlopeField, Topology};
use crate::reference::SolitonBackground;
use crate::stencil::{self, Parity, ParityInterp};

/// Remeshing onto a sinh grid whose axis spacing follows the curvature scale.
#[derive(Clone, Debug, PartialEq)]
pub struct RegridSettings {
    /// Target number of cells per curvature length `1/sqrt(max|Rm|)` at the axis.
    pub points_per_scale: f64,
    /// Remesh once the axis spacing is off target by more than this factor.
    pub tolerance: f64,
}

impl Default for RegridSettings {
    fn default() -> Self {
        Self { points_per_scale: 24.0, tolerance: 2.0 }
    }
}

/// Parameters of the monitored quantities recorded along a run.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorSettings {
    /// Weights in `f± = c b_ss ± μ b_s^2 ± ν c_s^2`.
    pub mu: f64,
    pub nu: f64,
    /// Outer limit of the region used by the Taub-NUT residual.
    pub inner_radius: f64,
    /// Start of the exterior region whose curvature is tracked separately.
    pub exterior_start: Option<f64>,
    /// Arclengths at which `c` is sampled every record.
    pub tracers: Vec<f64>,
}

impl Default for MonitorSettings {
    fn default() -> Self {
        Self { mu: 1.0, nu: 1.0, inner_radius: 10.0, exterior_start: None, tracers: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    /// Safety factor κ in `dt = κ (min a Δr)^2`.
    pub kappa: f64,
    pub t_end: f64,
    pub max_steps: u64,
    /// Steps between monitor records.
    pub record_every: u64,
    /// Number of outer nodes held at their initial values.
    pub frozen: usize,
    /// Step halvings tried before declaring a stall.
    pub max_halvings: u32,
    /// Blow-up threshold as a multiple of the initial `max|Rm|`.
    pub blowup_factor: f64,
    /// Fraction of the outer plateau of `c` defining the collapsed region.
    pub theta: f64,
    /// Stop as soon as the blow-up threshold is crossed.
    pub stop_at_blowup: bool,
    pub regrid: Option<RegridSettings>,
    pub monitors: MonitorSettings,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            kappa: 0.2,
            t_end: 1.0,
            max_steps: 10_000_000,
            record_every: 20,
            frozen: 2,
            max_halvings: 12,
            blowup_factor: 1e6,
            theta: 0.1,
            stop_at_blowup: true,
            regrid: None,
            monitors: MonitorSettings::default(),
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 0.3) {
            return Err(Error::Parameter(format!("kappa = {} outside (0, 0.3]", self.kappa)));
        }
        if self.record_every == 0 {
            return Err(Error::Parameter("record_every must be positive".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Parameter(format!("theta = {} outside (0, 1)", self.theta)));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::Parameter("blowup_factor must exceed 1".into()));
        }
        if let Some(r) = &self.regrid {
            if !(r.points_per_scale > 1.0 && r.tolerance > 1.0) {
                return Err(Error::Parameter("invalid regrid settings".into()));
            }
        }
        Ok(())
    }
}

/// Monitored quantities at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub max_rm: f64,
    /// `b(0)` for a bolt, zero for a nut.
    pub bolt_size: f64,
    /// `c` at the first node.
    pub axis_c: f64,
    /// Physical spacing of the first cell.
    pub axis_spacing: f64,
    pub mass: f64,
    pub u_max: f64,
    pub min_bs: f64,
    pub min_cs: f64,
    pub max_bs: f64,
    pub max_cs: f64,
    pub c2rm_max: f64,
    /// `(T̂ - t) max|Rm|`, filled in once `T̂` is known.
    pub type_one_ratio: f64,
    /// Taub-NUT residual (nut only).
    pub nut_residual: f64,
    pub fplus_max: f64,
    pub fminus_min: f64,
    /// `max|Rm|` over the exterior region.
    pub exterior_rm: f64,
    pub tracers: Vec<f64>,
}

impl MonitorRecord {
    pub const COLUMNS: [&'static str; 20] = [
        "step",
        "t",
        "dt",
        "max_rm",
        "bolt_size",
        "axis_c",
        "axis_spacing",
        "mass",
        "u_max",
        "min_bs",
        "min_cs",
        "max_bs",
        "max_cs",
        "c2rm_max",
        "type_one_ratio",
        "nut_residual",
        "fplus_max",
        "fminus_min",
        "exterior_rm",
        "tracers",
    ];

    /// Scalar columns in [`Self::COLUMNS`] order (tracers excluded).
    pub fn scalars(&self) -> [f64; 19] {
        [
            self.step as f64,
            self.t,
            self.dt,
            self.max_rm,
            self.bolt_size,
            self.axis_c,
            self.axis_spacing,
            self.mass,
            self.u_max,
            self.min_bs,
            self.min_cs,
            self.max_bs,
            self.max_cs,
            self.c2rm_max,
            self.type_one_ratio,
            self.nut_residual,
            self.fplus_max,
            self.fminus_min,
            self.exterior_rm,
        ]
    }

    pub fn from_scalars(v: &[f64], tracers: Vec<f64>) -> Result<Self> {
        if v.len() != 19 {
            return Err(Error::Format(format!("expected 19 scalar columns, got {}", v.len())));
        }
        Ok(Self {
            step: v[0] as u64,
            t: v[1],
            dt: v[2],
            max_rm: v[3],
            bolt_size: v[4],
            axis_c: v[5],
            axis_spacing: v[6],
            mass: v[7],
            u_max: v[8],
            min_bs: v[9],
            min_cs: v[10],
            max_bs: v[11],
            max_cs: v[12],
            c2rm_max: v[13],
            type_one_ratio: v[14],
            nut_residual: v[15],
            fplus_max: v[16],
            fminus_min: v[17],
            exterior_rm: v[18],
            tracers,
        })
    }
}

/// Evolving profile plus step control and history.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub profile: Profile,
    pub t: f64,
    /// Last step taken.
    pub dt: f64,
    pub t_hat: Option<f64>,
    pub steps: u64,
    pub regrids: u32,
    /// `max|Rm|` of the initial data.
    pub rm0: f64,
    pub history: Vec<MonitorRecord>,
}

impl FlowState {
    pub fn new(mut profile: Profile, cfg: &FlowConfig) -> Result<Self> {
        cfg.validate()?;
        profile.validate()?;
        slave_axis(&mut profile);
        if profile.len() < stencil::MIN_NODES + cfg.frozen {
            return Err(Error::Resolution("grid too small for the frozen boundary".into()));
        }
        let mut state = Self {
            profile,
            t: 0.0,
            dt: 0.0,
            t_hat: None,
            steps: 0,
            regrids: 0,
            rm0: 0.0,
            history: Vec::new(),
        };
        let rec = record(&state, &cfg.monitors);
        state.rm0 = rec.max_rm;
        state.history.push(rec);
        Ok(state)
    }

    /// Starts the clock at `t0` instead of zero.
    pub fn starting_at(mut self, t0: f64) -> Self {
        self.t = t0;
        for r in &mut self.history {
            r.t = t0;
        }
        self
    }

    pub fn blowup_threshold(&self, cfg: &FlowConfig) -> f64 {
        cfg.blowup_factor * self.rm0
    }

    pub fn last(&self) -> &MonitorRecord {
        self.history.last().expect("history is never empty")
    }
}

/// Time derivatives of `(b, c)` at fixed arclength.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rates {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Local part of the rates plus the arclength derivatives and the shift
/// integrand `2 b_ss/b + c_ss/c` at node `i`.
#[inline]
fn node_terms(p: &Profile, dr: f64, i: usize) -> [f64; 5] {
    let bp = p.topology.b_parity();
    let (a, b, c) = (p.a[i], p.b[i], p.c[i]);
    let ar = stencil::d1_at(&p.a, dr, Parity::Even, i);
    let br = stencil::d1_at(&p.b, dr, bp, i);
    let brr = stencil::d2_at(&p.b, dr, bp, i);
    let cr = stencil::d1_at(&p.c, dr, Parity::Odd, i);
    let crr = stencil::d2_at(&p.c, dr, Parity::Odd, i);
    let a2 = a * a;
    let bs = br / a;
    let cs = cr / a;
    let bss = brr / a2 - ar * br / (a2 * a);
    let css = crr / a2 - ar * cr / (a2 * a);
    let b2 = b * b;
    let bt = bss + (cs / c + bs / b) * bs + 2.0 * c * c / (b2 * b) - 4.0 / b;
    let ct = css + 2.0 * bs * cs / b - 2.0 * c * c * c / (b2 * b2);
    [bt, ct, bs, cs, 2.0 * bss / b + css / c]
}

/// Right-hand side of the reduced flow in the arclength gauge:
///
/// ```text
/// b_t = [b rate] - b_s V,   c_t = [c rate] - c_s V,   V(s) = ∫_0^s (2 b_ss/b + c_ss/c) ds
/// ```
///
/// The last `frozen` nodes keep only the shift, so the exterior metric is
/// static at fixed physical position.
pub fn rhs(p: &Profile, frozen: usize) -> Result<Rates> {
    let n = p.len();
    let dr = p.dr();
    let live = n.saturating_sub(frozen);
    let terms = crate::par::map_indices(n, |i| node_terms(p, dr, i));
    let weighted: Vec<f64> = (0..n).map(|i| terms[i][4] * p.a[i]).collect();
    let shift = stencil::cumulative_even(&weighted, dr);
    let mut out = Rates { b: Vec::with_capacity(n), c: Vec::with_capacity(n) };
    for (i, [bt, ct, bs, cs, _]) in terms.into_iter().enumerate() {
        let (bt, ct) = if i < live { (bt, ct) } else { (0.0, 0.0) };
        let (bt, ct) = (bt - bs * shift[i], ct - cs * shift[i]);
        if !(bt.is_finite() && ct.is_finite()) {
            return Err(Error::AxisRegularity(format!("non-finite rate at node {i} (s = {})", p.s[i])));
        }
        out.b.push(bt);
        out.c.push(ct);
    }
    Ok(out)
}

/// Overwrites the first node by a fit through nodes 1..=3 that satisfies the
/// axis conditions exactly: `c = s + O(s^3)`, and `b = s + O(s^3)` at a nut
/// or `b` even at a bolt.
pub fn slave_axis(p: &mut Profile) {
    let s = &p.s;
    let unit_odd = |f: &[f64]| -> f64 {
        // f = s + p1 s^3 + p2 s^5 through nodes 1 and 2.
        let (s1, s2) = (s[1], s[2]);
        let (g1, g2) = ((f[1] - s1) / (s1 * s1 * s1), (f[2] - s2) / (s2 * s2 * s2));
        let p2 = (g2 - g1) / (s2 * s2 - s1 * s1);
        let p1 = g1 - p2 * s1 * s1;
        let s0 = s[0];
        s0 + s0 * s0 * s0 * (p1 + p2 * s0 * s0)
    };
    let c0 = unit_odd(&p.c);
    let b0 = match p.topology {
        Topology::Nut => unit_odd(&p.b),
        Topology::Bolt => {
            let xs: Vec<f64> = s[1..4].iter().map(|x| x * x).collect();
            stencil::lagrange(&xs, &p.b[1..4], s[0] * s[0])
        }
    };
    p.c[0] = c0;
    p.b[0] = b0;
}

fn combine(base: &Profile, w0: f64, stage: &Profile, w1: f64, rates: &Rates, dt: f64) -> Profile {
    let mix = |x: &[f64], y: &[f64], r: &[f64]| -> Vec<f64> {
        x.iter().zip(y).zip(r).map(|((x, y), r)| w0 * x + w1 * (y + dt * r)).collect()
    };
    let mut out = Profile {
        topology: base.topology,
        r: base.r.clone(),
        s: base.s.clone(),
        a: base.a.clone(),
        b: mix(&base.b, &stage.b, &rates.b),
        c: mix(&base.c, &stage.c, &rates.c),
    };
    slave_axis(&mut out);
    out
}

fn positive(p: &Profile) -> bool {
    (0..p.len()).all(|i| p.b[i] > 0.0 && p.c[i] > 0.0)
}

/// One SSP-RK3 step of size `dt`. A zero step returns the input unchanged.
pub fn advance(p: &Profile, dt: f64, frozen: usize) -> Result<Profile> {
    if dt == 0.0 {
        return Ok(p.clone());
    }
    let bad = |stage: &str| Error::Stall { t: f64::NAN, reason: format!("{stage} lost positivity") };
    let k0 = rhs(p, frozen)?;
    let y1 = combine(p, 0.0, p, 1.0, &k0, dt);
    if !positive(&y1) {
        return Err(bad("stage 1"));
    }
    let k1 = rhs(&y1, frozen)?;
    let y2 = combine(p, 0.75, &y1, 0.25, &k1, dt);
    if !positive(&y2) {
        return Err(bad("stage 2"));
    }
    let k2 = rhs(&y2, frozen)?;
    let y3 = combine(p, 1.0 / 3.0, &y2, 2.0 / 3.0, &k2, dt);
    if !positive(&y3) {
        return Err(bad("stage 3"));
    }
    y3.validate()?;
    Ok(y3)
}

/// Stable step for the current grid.
pub fn stable_dt(p: &Profile, kappa: f64) -> f64 {
    let h = p.min_spacing();
    kappa * h * h
}

/// One accepted step with halving on failure.
pub fn step(state: &mut FlowState, cfg: &FlowConfig) -> Result<()> {
    let mut dt = stable_dt(&state.profile, cfg.kappa);
    let remaining = cfg.t_end - state.t;
    if remaining < dt {
        dt = remaining.max(0.0);
    }
    let mut last_err = None;
    for _ in 0..=cfg.max_halvings {
        match advance(&state.profile, dt, cfg.frozen) {
            Ok(p) => {
                state.profile = p;
                state.t += dt;
                state.dt = dt;
                state.steps += 1;
                return Ok(());
            }
            Err(e) => {
                last_err = Some(e);
                dt *= 0.5;
            }
        }
    }
    Err(Error::Stall {
        t: state.t,
        reason: format!(
            "step rejected after {} halvings: {}",
            cfg.max_halvings,
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ),
    })
}

/// Why [`run`] returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    TimeReached,
    StepLimit,
    Blowup,
    Observer,
}

/// `f+ = c b_ss + μ b_s^2 + ν c_s^2` and `f- = c b_ss - μ b_s^2 - ν c_s^2`.
pub fn f_pm(c: f64, bs: f64, cs: f64, bss: f64, mu: f64, nu: f64) -> (f64, f64) {
    let q = mu * bs * bs + nu * cs * cs;
    (c * bss + q, c * bss - q)
}

/// Taub-NUT residual from precomputed slopes.
fn nut_residual_from(p: &Profile, sl: &SlopeField, inner: f64) -> f64 {
    (0..p.len())
        .take_while(|&i| p.s[i] <= inner)
        .map(|i| {
            let u = p.c[i] / p.b[i];
            (sl.bs[i] - (2.0 - u)).abs() + (sl.cs[i] - u * u).abs()
        })
        .fold(0.0, f64::max)
}

/// `sup |b_s - (2 - u)| + |c_s - u^2|` over `s <= inner`.
pub fn nut_residual(p: &Profile, inner: f64) -> Result<f64> {
    if p.topology != Topology::Nut {
        return Err(Error::Precondition("the Taub-NUT residual needs a nut".into()));
    }
    Ok(nut_residual_from(p, &p.slopes(), inner))
}

/// Monitored quantities of the current state.
pub fn record(state: &FlowState, m: &MonitorSettings) -> MonitorRecord {
    let p = &state.profile;
    let sl = p.slopes();
    let frames = geometry::curvature_from(p, &sl);
    summarize(state, m, &sl, &frames)
}

fn summarize(state: &FlowState, m: &MonitorSettings, sl: &SlopeField, frames: &[CurvatureFrame]) -> MonitorRecord {
    let p = &state.profile;
    let n = p.len();
    let mut rec = MonitorRecord {
        step: state.steps,
        t: state.t,
        dt: state.dt,
        max_rm: 0.0,
        bolt_size: p.bolt_size().unwrap_or(0.0),
        axis_c: p.c[0],
        axis_spacing: p.a[0] * p.dr(),
        mass: geometry::mass(p).unwrap_or(f64::NAN),
        u_max: f64::NEG_INFINITY,
        min_bs: f64::INFINITY,
        min_cs: f64::INFINITY,
        max_bs: f64::NEG_INFINITY,
        max_cs: f64::NEG_INFINITY,
        c2rm_max: 0.0,
        type_one_ratio: f64::NAN,
        nut_residual: f64::NAN,
        fplus_max: f64::NEG_INFINITY,
        fminus_min: f64::INFINITY,
        exterior_rm: f64::NAN,
        tracers: Vec::new(),
    };
    for i in 0..n {
        let rm = frames[i].riem_norm;
        rec.max_rm = rec.max_rm.max(rm);
        rec.c2rm_max = rec.c2rm_max.max(p.c[i] * p.c[i] * rm);
        rec.u_max = rec.u_max.max(p.c[i] / p.b[i]);
        rec.min_bs = rec.min_bs.min(sl.bs[i]);
        rec.min_cs = rec.min_cs.min(sl.cs[i]);
        rec.max_bs = rec.max_bs.max(sl.bs[i]);
        rec.max_cs = rec.max_cs.max(sl.cs[i]);
        let (fp, fm) = f_pm(p.c[i], sl.bs[i], sl.cs[i], sl.bss[i], m.mu, m.nu);
        rec.fplus_max = rec.fplus_max.max(fp);
        rec.fminus_min = rec.fminus_min.min(fm);
    }
    if p.topology == Topology::Nut {
        rec.nut_residual = nut_residual_from(p, sl, m.inner_radius);
    }
    if let Some(ext) = m.exterior_start {
        rec.exterior_rm = (0..n)
            .filter(|&i| p.s[i] >= ext)
            .map(|i| frames[i].riem_norm)
            .fold(0.0, f64::max);
    }
    if !m.tracers.is_empty() {
        let ci = ParityInterp::new(&p.s, &p.c, Parity::Odd, 6);
        rec.tracers = m
            .tracers
            .iter()
            .map(|&s| if s <= p.s_max() { ci.eval(s) } else { f64::NAN })
            .collect();
    }
    rec
}

/// Remeshes onto a sinh grid with axis spacing `h0`, keeping the node count.
pub fn regrid(state: &mut FlowState, h0: f64) -> Result<()> {
    let p = &state.profile;
    let grid = GridMap::Sinh { n: p.len(), length: p.s_max(), h0 };
    state.profile = p.remap(&grid)?;
    state.regrids += 1;
    Ok(())
}

fn maybe_regrid(state: &mut FlowState, cfg: &FlowConfig, max_rm: f64) -> Result<bool> {
    let Some(rg) = &cfg.regrid else { return Ok(false) };
    if !(max_rm > 0.0) {
        return Ok(false);
    }
    let target = 1.0 / (max_rm.sqrt() * rg.points_per_scale);
    let spacing = state.profile.a[0] * state.profile.dr();
    let ratio = spacing / target;
    if ratio > rg.tolerance || ratio < 1.0 / rg.tolerance {
        regrid(state, target)?;
        return Ok(true);
    }
    Ok(false)
}

/// Integrates until `t_end`, the step limit or (optionally) the blow-up
/// threshold, recording monitors every `record_every` steps.
pub fn run(state: &mut FlowState, cfg: &FlowConfig) -> Result<StopReason> {
    run_with(state, cfg, |_, _| Ok(false))
}

/// [`run`] with an observer called after every record; returning `true`
/// stops the run.
pub fn run_with<F>(state: &mut FlowState, cfg: &FlowConfig, mut observe: F) -> Result<StopReason>
where
    F: FnMut(&FlowState, &MonitorRecord) -> Result<bool>,
{
    cfg.validate()?;
    let threshold = state.blowup_threshold(cfg);
    loop {
        if state.t >= cfg.t_end {
            return Ok(StopReason::TimeReached);
        }
        if state.steps >= cfg.max_steps {
            return Ok(StopReason::StepLimit);
        }
        step(state, cfg)?;
        let due = state.steps % cfg.record_every == 0 || state.t >= cfg.t_end;
        if due {
            let mut rec = record(state, &cfg.monitors);
            if maybe_regrid(state, cfg, rec.max_rm)? {
                rec = record(state, &cfg.monitors);
            }
            let hit = rec.max_rm >= threshold;
            let stop = observe(state, &rec)?;
            state.history.push(rec);
            if hit && cfg.stop_at_blowup {
                return Ok(StopReason::Blowup);
            }
            if stop {
                return Ok(StopReason::Observer);
            }
        }
    }
}

/// Finite-time singularity diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct BlowupReport {
    pub t_hat: f64,
    /// `sup (T̂ - t) max|Rm|` over the history.
    pub type_one_sup: f64,
    /// `[0, R]` in arclength from the bolt.
    pub blowup_interval: (f64, f64),
    /// Sup distance of the rescaled `u`-profile to FIK, when computed.
    pub rescaled_u_distance: Option<f64>,
    pub t_final: f64,
    /// Growth factor of `max|Rm|` over the run.
    pub growth: f64,
}

/// Least-squares line `y = α + β x`.
fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let beta = sxy / sxx;
    (my - beta * mx, beta)
}

/// Singular time from a linear fit of `1/max|Rm|` over the records with
/// `max|Rm|` within a factor 100 of the last one.
pub fn estimate_t_hat(history: &[MonitorRecord]) -> Result<f64> {
    let last = history.last().ok_or_else(|| Error::Precondition("empty history".into()))?;
    let pts: Vec<(f64, f64)> = history
        .iter()
        .filter(|r| r.max_rm >= last.max_rm / 100.0)
        .map(|r| (r.t, 1.0 / r.max_rm))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Precondition("fewer than three records in the final window".into()));
    }
    let (alpha, beta) = line_fit(&pts);
    if !(beta < 0.0) {
        return Err(Error::Precondition("1/max|Rm| is not decreasing".into()));
    }
    Ok(-alpha / beta)
}

/// Singularity report for a run that crossed the blow-up threshold. Fills in
/// `T̂`, the Type-I ratios and the collapsed interval.
pub fn detect_singularity(state: &mut FlowState, cfg: &FlowConfig) -> Result<BlowupReport> {
    let threshold = state.blowup_threshold(cfg);
    let last = state.last().clone();
    if last.max_rm < threshold {
        return Err(Error::Precondition(format!(
            "max|Rm| = {} never reached the blow-up threshold {threshold}",
            last.max_rm
        )));
    }
    let t_hat = estimate_t_hat(&state.history)?;
    state.t_hat = Some(t_hat);
    let mut type_one_sup = 0.0_f64;
    for r in &mut state.history {
        r.type_one_ratio = (t_hat - r.t) * r.max_rm;
        type_one_sup = type_one_sup.max(r.type_one_ratio);
    }
    let p = &state.profile;
    let frames = geometry::curvature(p)?;
    let plateau = match geometry::mass(p) {
        Ok(m) if m > 0.0 => 1.0 / m,
        _ => *p.c.last().unwrap(),
    };
    let member: Vec<bool> = (0..p.len())
        .map(|i| p.c[i] < cfg.theta * plateau || frames[i].riem_norm >= threshold)
        .collect();
    let count = member.iter().take_while(|&&m| m).count();
    if member[count..].iter().any(|&m| m) {
        let stray = count + member[count..].iter().position(|&m| m).unwrap();
        return Err(Error::Structural(format!(
            "blow-up set is not an initial interval: node {stray} (s = {}) is detached",
            p.s[stray]
        )));
    }
    let r_end = if count == 0 { 0.0 } else { p.s[count - 1] };
    Ok(BlowupReport {
        t_hat,
        type_one_sup,
        blowup_interval: (0.0, r_end),
        rescaled_u_distance: None,
        t_final: state.t,
        growth: last.max_rm / state.rm0,
    })
}

/// Parabolic blow-up `ŝ = s/sqrt(T̂-t)`, `b̂ = b/sqrt(T̂-t)`, `ĉ = c/sqrt(T̂-t)`
/// and its sup distance in `u` to FIK over `ŝ <= inner`.
pub fn blowup_rescale(
    p: &Profile,
    t: f64,
    t_hat: f64,
    fik: &SolitonBackground,
    inner: f64,
) -> Result<(Profile, f64)> {
    if p.topology != Topology::Bolt {
        return Err(Error::Precondition("blow-up rescaling needs a bolt".into()));
    }
    if !(t_hat > t) {
        return Err(Error::Precondition(format!("T̂ = {t_hat} does not exceed t = {t}")));
    }
    let q = p.scaled(1.0 / (t_hat - t).sqrt());
    let limit = inner.min(fik.s_max());
    let mut dist = 0.0_f64;
    for i in 0..q.len() {
        if q.s[i] > limit {
            break;
        }
        let e = fik.eval(q.s[i])?;
        dist = dist.max((q.c[i] / q.b[i] - e.u()).abs());
    }
    Ok((q, dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::cell_centers;

    fn cylinder_like(b0: f64) -> Profile {
        let n = 40;
        let r = cell_centers(n, 4.0);
        Profile::new(Topology::Bolt, r.clone(), vec![1.0; n], vec![b0; n], r).unwrap()
    }

    #[test]
    fn constant_b_rate_matches_closed_form() {
        let p = cylinder_like(1.7);
        let k = rhs(&p, 2).unwrap();
        let i = 10;
        let c = p.c[i];
        let b0: f64 = 1.7;
        let expect = 2.0 * c * c / b0.powi(3) - 4.0 / b0;
        assert!((k.b[i] - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_step_is_identity() {
        let p = cylinder_like(2.0);
        assert_eq!(advance(&p, 0.0, 2).unwrap(), p);
    }

    #[test]
    fn outer_nodes_only_shift() {
        let n = 60;
        let r = cell_centers(n, 6.0);
        let b: Vec<f64> = r.iter().map(|s| s * (1.0 + 0.2 * s * s) / (1.0 + 0.1 * s * s)).collect();
        let c: Vec<f64> = r.iter().map(|s| s / (1.0 + 0.3 * s * s).sqrt()).collect();
        let p = Profile::new(Topology::Nut, r, vec![1.0; n], b, c).unwrap();
        let k = rhs(&p, 2).unwrap();
        let sl = p.slopes();
        // V is the same at both frozen nodes up to the last cell's integral.
        let v1 = -k.b[n - 1] / sl.bs[n - 1];
        let v2 = -k.c[n - 1] / sl.cs[n - 1];
        assert!((v1 - v2).abs() < 1e-10 * v1.abs().max(1.0));
        assert!(v1.abs() > 1e-3);
        let direct = (k.b[n - 3] + sl.bs[n - 3] * v1).abs();
        assert!(direct > 1e-6);
    }

    #[test]
    fn axis_node_satisfies_unit_slope() {
        let r = cell_centers(40, 4.0);
        let c: Vec<f64> = r.iter().map(|s| s + 0.1 * s.powi(3)).collect();
        let mut p = Profile::new(Topology::Nut, r.clone(), vec![1.0; 40], c.clone(), c.clone()).unwrap();
        p.b[0] = 7.0;
        p.c[0] = 0.01;
        slave_axis(&mut p);
        assert!((p.b[0] - c[0]).abs() < 1e-14);
        assert!((p.c[0] - c[0]).abs() < 1e-14);
    }

    #[test]
    fn t_hat_fit_is_exact_for_type_one_decay() {
        let hist: Vec<MonitorRecord> = (0..10)
            .map(|k| {
                let t = 0.1 * k as f64;
                let mut r = MonitorRecord::from_scalars(&[0.0; 19], vec![]).unwrap();
                r.t = t;
                r.max_rm = 3.0 / (1.25 - t);
                r
            })
            .collect();
        assert!((estimate_t_hat(&hist).unwrap() - 1.25).abs() < 1e-12);
    }

    #[test]
    fn nut_residual_rejects_bolt() {
        assert!(matches!(nut_residual(&cylinder_like(1.0), 1.0), Err(Error::Precondition(_))));
    }
}
