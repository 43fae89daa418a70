//! Runtime predicates over flow histories: the preserved quantities, the
//! curvature estimates, and membership in the box around the soliton.

use crate::error::{Error, Result};
use crate::flow::MonitorRecord;
use crate::profile::{Profile, Topology};
use crate::reference::SolitonBackground;
use crate::spectral::{project, SpectralOperator, SpectralResult, SymTensorU2, COMPONENT_WEIGHTS};
use crate::stencil::{self, Parity, ParityInterp};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantTolerances {
    /// Slack on `u <= 1`.
    pub u: f64,
    /// Slack on `b_s, c_s >= 0`.
    pub slope: f64,
    /// Largest relative mass drift.
    pub mass_drift: f64,
    /// Allowed growth of `sup c^2 |Rm|` over its initial value.
    pub c2rm_growth: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        Self { u: 1e-6, slope: 1e-6, mass_drift: 1e-3, c2rm_growth: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Worst value over the history.
    pub value: f64,
    pub bound: f64,
}

/// Extremal traces over a history, one entry per record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Traces {
    pub t: Vec<f64>,
    pub max_rm: Vec<f64>,
    pub c2rm_max: Vec<f64>,
    pub fplus_max: Vec<f64>,
    pub fminus_min: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
    pub traces: Traces,
    /// `max|Rm|` at the last record over the first.
    pub rm_growth: f64,
}

impl InvariantReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Evaluates the preserved conditions (`u <= 1`, nonnegative slopes, mass),
/// the bound on `c^2 |Rm|` and, for a bolt, `b(0)^2 max|Rm| >= 1`, and
/// collects the `f±` traces.
pub fn invariant_suite(history: &[MonitorRecord], tol: &InvariantTolerances) -> Result<InvariantReport> {
    if history.len() < 2 {
        return Err(Error::Precondition("the invariant suite needs at least two records".into()));
    }
    let first = &history[0];
    let fold_max = |f: &dyn Fn(&MonitorRecord) -> f64| history.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let fold_min = |f: &dyn Fn(&MonitorRecord) -> f64| history.iter().map(f).fold(f64::INFINITY, f64::min);

    let mut checks = Vec::new();
    let u = fold_max(&|r| r.u_max);
    checks.push(InvariantCheck { name: "u_bound", pass: u <= 1.0 + tol.u, value: u, bound: 1.0 + tol.u });
    let slope = fold_min(&|r| r.min_bs.min(r.min_cs));
    checks.push(InvariantCheck { name: "slopes", pass: slope >= -tol.slope, value: slope, bound: -tol.slope });
    let m0 = first.mass;
    let scale = if m0 > 0.0 { m0 } else { 1.0 };
    let drift = fold_max(&|r| (r.mass - m0).abs() / scale);
    checks.push(InvariantCheck {
        name: "mass",
        pass: drift.is_finite() && drift < tol.mass_drift,
        value: drift,
        bound: tol.mass_drift,
    });
    let c2rm = fold_max(&|r| r.c2rm_max);
    let c2rm_bound = (1.0 + tol.c2rm_growth) * first.c2rm_max;
    checks.push(InvariantCheck { name: "c2_rm", pass: c2rm <= c2rm_bound, value: c2rm, bound: c2rm_bound });
    if first.bolt_size > 0.0 {
        let lower = fold_min(&|r| r.bolt_size * r.bolt_size * r.max_rm);
        checks.push(InvariantCheck { name: "bolt_curvature", pass: lower >= 1.0, value: lower, bound: 1.0 });
    }
    let traces = Traces {
        t: history.iter().map(|r| r.t).collect(),
        max_rm: history.iter().map(|r| r.max_rm).collect(),
        c2rm_max: history.iter().map(|r| r.c2rm_max).collect(),
        fplus_max: history.iter().map(|r| r.fplus_max).collect(),
        fminus_min: history.iter().map(|r| r.fminus_min).collect(),
    };
    Ok(InvariantReport { checks, traces, rm_growth: history.last().unwrap().max_rm / first.max_rm })
}

/// Which time enters the `L^2_f` thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxVariant {
    /// `μ (1 - t0)^{-λ*}` for all times.
    InitialTime,
    /// `μ (1 - t)^{-λ*}` at each time.
    CurrentTime,
}

impl BoxVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "initial" => Ok(BoxVariant::InitialTime),
            "current" => Ok(BoxVariant::CurrentTime),
            other => Err(Error::Config(format!("unknown box variant `{other}` (initial | current)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoxVariant::InitialTime => "initial",
            BoxVariant::CurrentTime => "current",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxParams {
    pub lambda_star: f64,
    pub mu_u: f64,
    pub mu_s: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub t0: f64,
    pub variant: BoxVariant,
}

impl BoxParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu_u", self.mu_u),
            ("mu_s", self.mu_s),
            ("eps0", self.eps0),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Parameter(format!("{name} = {v} outside (0, 1)")));
            }
        }
        if !(self.lambda_star < 0.0) {
            return Err(Error::Parameter(format!("λ* = {} must be negative", self.lambda_star)));
        }
        if !(0.0..1.0).contains(&self.t0) {
            return Err(Error::Parameter(format!("t0 = {} outside [0, 1)", self.t0)));
        }
        Ok(())
    }

    /// `(1 - t_ref)^{-λ*}` for the configured variant.
    pub fn l2_scale(&self, t: f64) -> f64 {
        let t_ref = match self.variant {
            BoxVariant::InitialTime => self.t0,
            BoxVariant::CurrentTime => t,
        };
        (1.0 - t_ref).powf(-self.lambda_star)
    }
}

/// The box condition that failed first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxComponent {
    Unstable,
    Stable,
    C0,
    C1,
    C2,
}

impl BoxComponent {
    pub fn name(self) -> &'static str {
        match self {
            BoxComponent::Unstable => "l2_unstable",
            BoxComponent::Stable => "l2_stable",
            BoxComponent::C0 => "c0",
            BoxComponent::C1 => "c1",
            BoxComponent::C2 => "c2",
        }
    }
}

/// Box norms of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSample {
    pub t: f64,
    pub unstable: f64,
    pub stable: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Coefficients on the computed eigentensors.
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxExit {
    /// First time outside the box and the condition responsible, or `None`.
    pub exit: Option<(f64, BoxComponent)>,
    pub samples: Vec<BoxSample>,
}

/// Frame components of `ĝ - ḡ` on the spectral grid, where
/// `ĝ = g(t)/(1 - t)` in the diagonal arclength gauge from the bolt:
/// `h11 = b̂^2/b̄^2 - 1`, `h33 = ĉ^2/c̄^2 - 1`, `h00 = h03 = 0`.
pub fn deviation_from_soliton(p: &Profile, t: f64, bg: &SolitonBackground, s: &[f64]) -> Result<SymTensorU2> {
    if p.topology != Topology::Bolt {
        return Err(Error::Precondition("the deviation from the soliton needs a bolt".into()));
    }
    if !(t < 1.0) {
        return Err(Error::Parameter(format!("t = {t} must be below 1")));
    }
    let q = p.scaled(1.0 / (1.0 - t).sqrt());
    if *s.last().unwrap() > q.s_max() {
        return Err(Error::GridMismatch(format!(
            "rescaled profile ends at {} before the spectral grid {}",
            q.s_max(),
            s.last().unwrap()
        )));
    }
    let bi = ParityInterp::new(&q.s, &q.b, Parity::Even, 6);
    let ci = ParityInterp::new(&q.s, &q.c, Parity::Odd, 6);
    let mut h = SymTensorU2::zeros(s);
    for (i, &x) in s.iter().enumerate() {
        let e = bg.eval(x)?;
        let (b, c) = (bi.eval(x), ci.eval(x));
        h.h11[i] = (b * b) / (e.b * e.b) - 1.0;
        h.h33[i] = (c * c) / (e.c * e.c) - 1.0;
    }
    Ok(h)
}

/// Pointwise `(|h|, |∇h|, |∇²h|)` in the soliton metric.
pub fn frame_norms(h: &SymTensorU2, bg: &SolitonBackground) -> Result<Vec<[f64; 3]>> {
    let n = h.len();
    if n < stencil::MIN_NODES {
        return Err(Error::Resolution("too few cells for derivatives".into()));
    }
    let dx = h.s[1] - h.s[0];
    let d1: Vec<Vec<f64>> = (0..4).map(|k| stencil::d1(h.component(k), dx, Parity::Even)).collect();
    let d2: Vec<Vec<f64>> = (0..4).map(|k| stencil::d2(h.component(k), dx, Parity::Even)).collect();
    let out = crate::par::map_indices(n, |i| {
        let e = bg.eval(h.s[i])?;
        let v = [h.h00[i], h.h11[i], h.h33[i], h.h03[i]];
        let v1 = [d1[0][i], d1[1][i], d1[2][i], d1[3][i]];
        let v2 = [d2[0][i], d2[1][i], d2[2][i], d2[3][i]];
        let n0: f64 = (0..4).map(|k| COMPONENT_WEIGHTS[k] * v[k] * v[k]).sum();
        Ok([n0.sqrt(), norm1_sq(&e, v, v1).max(0.0).sqrt(), norm2_sq(&e, v, v1, v2).max(0.0).sqrt()])
    });
    out.into_iter().collect()
}

/// `|∇h|^2` for an invariant tensor with components `[h00, h11, h33, h03]`.
fn norm1_sq(e: &crate::reference::FikPoint, v: [f64; 4], v1: [f64; 4]) -> f64 {
    let [h00, h11, h33, h03] = v;
    let beta = e.bs / e.b;
    let gamma = e.cs / e.c;
    let q = e.c * e.c / e.b.powi(4);
    let radial: f64 = (0..4).map(|k| COMPONENT_WEIGHTS[k] * v1[k] * v1[k]).sum();
    radial
        + 2.0 * gamma * gamma * ((h00 - h33).powi(2) + 4.0 * h03 * h03)
        + 4.0 * beta * beta * ((h00 - h11).powi(2) + h03 * h03)
        + 4.0 * q * ((h11 - h33).powi(2) + h03 * h03)
}

/// `|∇²h|^2` for an invariant tensor (generated by tools/derive_box_norms.py).
#[allow(clippy::all)]
fn norm2_sq(e: &crate::reference::FikPoint, v: [f64; 4], v1: [f64; 4], v2: [f64; 4]) -> f64 {
    let (b, c, bs, cs, bss, css) = (e.b, e.c, e.bs, e.cs, e.bss, e.css);
    let [h00, h11, h33, h03] = v;
    let [h00_s, h11_s, h33_s, h03_s] = v1;
    let [h00_ss, h11_ss, h33_ss, h03_ss] = v2;
    (b.powi(8)*c.powi(4)*(h00_ss.powi(2) + 2.0*h03_ss.powi(2) + 2.0*h11_ss.powi(2) + h33_ss.powi(2)) + b.powi(8)*c.powi(2)*(5.0*cs.powi(2)*h00_s.powi(2) - 8.0*cs.powi(2)*h00_s*h33_s + 18.0*cs.powi(2)*h03_s.powi(2) + 2.0*cs.powi(2)*h11_s.powi(2) + 5.0*cs.powi(2)*h33_s.powi(2) + 4.0*cs*css*h00*h00_s - 4.0*cs*css*h00*h33_s - 4.0*cs*css*h00_s*h33 + 16.0*cs*css*h03*h03_s + 4.0*cs*css*h33*h33_s + 2.0*css.powi(2)*h00.powi(2) - 4.0*css.powi(2)*h00*h33 + 8.0*css.powi(2)*h03.powi(2) + 2.0*css.powi(2)*h33.powi(2)) - 4.0*b.powi(8)*c*cs.powi(2)*(3.0*cs*h00*h00_s - 3.0*cs*h00*h33_s - 3.0*cs*h00_s*h33 + 12.0*cs*h03*h03_s + 3.0*cs*h33*h33_s + css*h00.powi(2) - 2.0*css*h00*h33 + 4.0*css*h03.powi(2) + css*h33.powi(2)) + 12.0*b.powi(8)*cs.powi(4)*(h00.powi(2) - 2.0*h00*h33 + 4.0*h03.powi(2) + h33.powi(2)) + 4.0*b.powi(6)*bs.powi(2)*c.powi(2)*cs.powi(2)*(2.0*h00.powi(2) - 2.0*h00*h11 - 2.0*h00*h33 + 5.0*h03.powi(2) + h11.powi(2) + h33.powi(2)) + 2.0*b.powi(6)*c.powi(4)*(5.0*bs.powi(2)*h00_s.powi(2) - 8.0*bs.powi(2)*h00_s*h11_s + 6.0*bs.powi(2)*h03_s.powi(2) + 6.0*bs.powi(2)*h11_s.powi(2) + bs.powi(2)*h33_s.powi(2) + 4.0*bs*bss*h00*h00_s - 4.0*bs*bss*h00*h11_s - 4.0*bs*bss*h00_s*h11 + 4.0*bs*bss*h03*h03_s + 4.0*bs*bss*h11*h11_s + 2.0*bss.powi(2)*h00.powi(2) - 4.0*bss.powi(2)*h00*h11 + 2.0*bss.powi(2)*h03.powi(2) + 2.0*bss.powi(2)*h11.powi(2)) + 8.0*b.powi(5)*bs.powi(2)*c.powi(4)*(-3.0*bs*h00*h00_s + 3.0*bs*h00*h11_s + 3.0*bs*h00_s*h11 - 3.0*bs*h03*h03_s - 3.0*bs*h11*h11_s - bss*h00.powi(2) + 2.0*bss*h00*h11 - bss*h03.powi(2) - bss*h11.powi(2)) + 4.0*b.powi(4)*c.powi(4)*(7.0*bs.powi(4)*h00.powi(2) - 14.0*bs.powi(4)*h00*h11 + 3.0*bs.powi(4)*h03.powi(2) + 7.0*bs.powi(4)*h11.powi(2) + 2.0*c.powi(2)*h03_s.powi(2) + 2.0*c.powi(2)*h11_s.powi(2) - 4.0*c.powi(2)*h11_s*h33_s + 2.0*c.powi(2)*h33_s.powi(2) + 2.0*c*cs*h03*h03_s + 2.0*c*cs*h11*h11_s - 2.0*c*cs*h11*h33_s - 2.0*c*cs*h11_s*h33 + 2.0*c*cs*h33*h33_s + 2.0*cs.powi(2)*h00.powi(2) - 4.0*cs.powi(2)*h00*h33 + 10.0*cs.powi(2)*h03.powi(2) + 2.0*cs.powi(2)*h11.powi(2) - 4.0*cs.powi(2)*h11*h33 + 4.0*cs.powi(2)*h33.powi(2)) - 16.0*b.powi(3)*bs*c.powi(5)*(2.0*c*h03*h03_s + 2.0*c*h11*h11_s - 2.0*c*h11*h33_s - 2.0*c*h11_s*h33 + 2.0*c*h33*h33_s + cs*h00.powi(2) - 2.0*cs*h00*h33 + 5.0*cs*h03.powi(2) + cs*h11.powi(2) - 2.0*cs*h11*h33 + 2.0*cs*h33.powi(2)) + 8.0*b.powi(2)*bs.powi(2)*c.powi(6)*(h00.powi(2) - 2.0*h00*h33 + 10.0*h03.powi(2) + 2.0*h11.powi(2) - 4.0*h11*h33 + 3.0*h33.powi(2)) + 8.0*c.powi(8)*(h03.powi(2) + 3.0*h11.powi(2) - 6.0*h11*h33 + 3.0*h33.powi(2)))/(b.powi(8)*c.powi(4))
}

/// First exit of a series of deviations from the box.
pub fn box_membership(
    series: &[(f64, SymTensorU2)],
    op: &SpectralOperator,
    bg: &SolitonBackground,
    spectrum: &SpectralResult,
    params: &BoxParams,
) -> Result<BoxExit> {
    params.validate()?;
    if spectrum.grid != op.grid {
        return Err(Error::GridMismatch("spectrum and operator grids differ".into()));
    }
    let mut samples = Vec::with_capacity(series.len());
    let mut exit = None;
    for (t, h) in series {
        let s = box_sample(*t, h, op, bg, spectrum)?;
        if exit.is_none() {
            exit = box_violation(&s, params).map(|c| (*t, c));
        }
        samples.push(s);
    }
    Ok(BoxExit { exit, samples })
}

/// Box norms of one deviation.
pub fn box_sample(
    t: f64,
    h: &SymTensorU2,
    op: &SpectralOperator,
    bg: &SolitonBackground,
    spectrum: &SpectralResult,
) -> Result<BoxSample> {
    if h.s.len() != op.nodes().len() || h.s.iter().zip(op.nodes()).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0)) {
        return Err(Error::GridMismatch("deviation is not sampled on the spectral grid".into()));
    }
    let pr = project(op, h, spectrum)?;
    let total = op.norm(h)?;
    let unstable = pr.coefficients[..spectrum.k].iter().map(|c| c * c).sum::<f64>().sqrt();
    let stable = (total * total - unstable * unstable).max(0.0).sqrt();
    let norms = frame_norms(h, bg)?;
    let sup = |k: usize| norms.iter().fold(0.0_f64, |m, v| m.max(v[k]));
    Ok(BoxSample { t, unstable, stable, c0: sup(0), c1: sup(1), c2: sup(2), coefficients: pr.coefficients })
}

/// The first failed box condition of a sample, in the order
/// `L^2` unstable, `L^2` stable, `C^0`, `C^1`, `C^2`.
pub fn box_violation(s: &BoxSample, params: &BoxParams) -> Option<BoxComponent> {
    let scale = params.l2_scale(s.t);
    if s.unstable > params.mu_u * scale {
        Some(BoxComponent::Unstable)
    } else if s.stable > params.mu_s * scale {
        Some(BoxComponent::Stable)
    } else if s.c0 > params.eps0 {
        Some(BoxComponent::C0)
    } else if s.c1 > params.eps1 {
        Some(BoxComponent::C1)
    } else if s.c2 > params.eps2 {
        Some(BoxComponent::C2)
    } else {
        None
    }
}

/// Classification of a run along the top unstable mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShotOutcome {
    /// Left the box with the bolt larger than the soliton's.
    EscapeOutward,
    /// Left the box with the bolt smaller than the soliton's.
    BoltCollapse,
}

impl ShotOutcome {
    pub fn name(self) -> &'static str {
        match self {
            ShotOutcome::EscapeOutward => "escape_outward",
            ShotOutcome::BoltCollapse => "bolt_collapse",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shot {
    pub p: f64,
    pub outcome: ShotOutcome,
    /// Exit time and condition, or `None` if the run ended inside the box.
    pub exit: Option<(f64, BoxComponent)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShootResult {
    pub bracket: (f64, f64),
    /// Width after each bisection, starting with the initial width.
    pub widths: Vec<f64>,
    pub shots: Vec<Shot>,
}

impl ShootResult {
    /// Exit times grow toward the bracket on each side: among the shots on
    /// one side, the one closer to the bracket never exits earlier.
    pub fn exit_time_monotone(&self) -> bool {
        let (lo, hi) = self.bracket;
        let side = |pred: &dyn Fn(f64) -> bool, dist: &dyn Fn(f64) -> f64| {
            let mut v: Vec<(f64, f64)> = self
                .shots
                .iter()
                .filter(|s| pred(s.p))
                .map(|s| (dist(s.p), s.exit.map(|e| e.0).unwrap_or(f64::INFINITY)))
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v.windows(2).all(|w| w[0].1 >= w[1].1)
        };
        side(&|p| p <= lo, &|p| lo - p) && side(&|p| p >= hi, &|p| p - hi)
    }
}

/// Bisection on the coefficient of the top mode between two shots with
/// different outcomes.
pub fn box_shoot<F>(range: (f64, f64), iterations: usize, mut shoot: F) -> Result<ShootResult>
where
    F: FnMut(f64) -> Result<Shot>,
{
    let (mut lo, mut hi) = range;
    if !(lo < hi) {
        return Err(Error::Bracket(format!("empty range [{lo}, {hi}]")));
    }
    let a = shoot(lo)?;
    let b = shoot(hi)?;
    if a.outcome == b.outcome {
        return Err(Error::Bracket(format!(
            "both endpoints give {} (p = {lo}, {hi})",
            a.outcome.name()
        )));
    }
    let lo_outcome = a.outcome;
    let mut shots = vec![a, b];
    let mut widths = vec![hi - lo];
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let s = shoot(mid)?;
        if s.outcome == lo_outcome {
            lo = mid;
        } else {
            hi = mid;
        }
        shots.push(s);
        widths.push(hi - lo);
    }
    Ok(ShootResult { bracket: (lo, hi), widths, shots })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64, u: f64, mass: f64, c2rm: f64) -> MonitorRecord {
        let mut r = MonitorRecord::from_scalars(&[0.0; 19], vec![]).unwrap();
        r.t = t;
        r.u_max = u;
        r.mass = mass;
        r.c2rm_max = c2rm;
        r.max_rm = 1.0 + t;
        r.min_bs = 0.1;
        r.min_cs = 0.2;
        r
    }

    #[test]
    fn stationary_history_passes() {
        let h: Vec<_> = (0..5).map(|k| record(k as f64, 0.9, 0.25, 3.0)).collect();
        let rep = invariant_suite(&h, &InvariantTolerances::default()).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        assert_eq!(rep.traces.t.len(), 5);
    }

    #[test]
    fn injected_u_violation_is_flagged() {
        let mut h: Vec<_> = (0..5).map(|k| record(k as f64, 0.9, 0.25, 3.0)).collect();
        h[3].u_max = 1.01;
        let rep = invariant_suite(&h, &InvariantTolerances::default()).unwrap();
        assert!(!rep.check("u_bound").unwrap().pass);
        assert!(rep.check("mass").unwrap().pass);
    }

    #[test]
    fn single_record_is_rejected() {
        let h = vec![record(0.0, 0.9, 0.25, 3.0)];
        assert!(invariant_suite(&h, &InvariantTolerances::default()).is_err());
    }

    fn params() -> BoxParams {
        BoxParams {
            lambda_star: -0.3,
            mu_u: 0.5,
            mu_s: 0.5,
            eps0: 0.5,
            eps1: 0.5,
            eps2: 0.5,
            t0: 0.9,
            variant: BoxVariant::InitialTime,
        }
    }

    #[test]
    fn c2_only_violation_is_attributed() {
        let s = BoxSample { t: 0.95, unstable: 0.0, stable: 0.0, c0: 0.1, c1: 0.1, c2: 0.7, coefficients: vec![] };
        assert_eq!(box_violation(&s, &params()), Some(BoxComponent::C2));
        let inside = BoxSample { c2: 0.1, ..s };
        assert_eq!(box_violation(&inside, &params()), None);
    }

    #[test]
    fn variants_differ_only_in_reference_time() {
        let mut p = params();
        let a = p.l2_scale(0.99);
        p.variant = BoxVariant::CurrentTime;
        let b = p.l2_scale(0.99);
        assert!((a - 0.1f64.powf(0.3)).abs() < 1e-12);
        assert!((b - 0.01f64.powf(0.3)).abs() < 1e-12);
    }

    #[test]
    fn conformal_tensor_norms_match_scalar_hessian() {
        // For h = φ(s) g: ∇h = dφ ⊗ g and ∇²h = Hess φ ⊗ g with |g|^2 = 4.
        let e = crate::reference::FikPoint {
            b: 1.3,
            c: 0.7,
            f: 0.0,
            bs: 0.4,
            cs: 0.9,
            bss: -0.2,
            css: 0.3,
            fs: 0.0,
            fss: 0.0,
        };
        let (phi, phi1, phi2) = (0.8, -0.35, 0.6);
        let v = [phi, phi, phi, 0.0];
        let v1 = [phi1, phi1, phi1, 0.0];
        let v2 = [phi2, phi2, phi2, 0.0];
        let (beta, gamma) = (e.bs / e.b, e.cs / e.c);
        let hess = phi2 * phi2 + 2.0 * (beta * phi1).powi(2) + (gamma * phi1).powi(2);
        assert!((norm1_sq(&e, v, v1) - 4.0 * phi1 * phi1).abs() < 1e-12);
        assert!((norm2_sq(&e, v, v1, v2) - 4.0 * hess).abs() < 1e-12);
    }

    #[test]
    fn bisection_halves_the_bracket() {
        let pstar = 0.0123;
        let res = box_shoot((-1.0, 1.0), 10, |p| {
            let outcome = if p < pstar { ShotOutcome::EscapeOutward } else { ShotOutcome::BoltCollapse };
            // Linearized exit time: |p - p*| (1 - t0)/(1 - t) = const.
            let t = 1.0 - 0.1 * (p - pstar).abs() / 0.5;
            Ok(Shot { p, outcome, exit: Some((t, BoxComponent::Unstable)) })
        })
        .unwrap();
        assert!(res.bracket.0 <= pstar && pstar <= res.bracket.1);
        for (k, w) in res.widths.iter().enumerate() {
            assert!((w - 2.0 * 0.5f64.powi(k as i32)).abs() < 1e-12);
        }
        assert!(res.exit_time_monotone());
    }

    #[test]
    fn equal_outcomes_are_rejected() {
        let r = box_shoot((0.0, 1.0), 3, |p| Ok(Shot { p, outcome: ShotOutcome::BoltCollapse, exit: None }));
        assert!(matches!(r, Err(Error::Bracket(_))));
    }

    proptest::proptest! {
        #[test]
        fn bisection_keeps_a_bracket_around_the_threshold(p_star in -0.9..0.9_f64, iterations in 1usize..12) {
            let r = box_shoot((-1.0, 1.0), iterations, |p| {
                let outcome = if p > p_star { ShotOutcome::BoltCollapse } else { ShotOutcome::EscapeOutward };
                Ok(Shot { p, outcome, exit: Some((1.0 - (p - p_star).abs(), BoxComponent::Unstable)) })
            }).unwrap();
            proptest::prop_assert!(r.bracket.0 <= p_star && p_star <= r.bracket.1);
            proptest::prop_assert_eq!(r.widths.len(), iterations + 1);
            for w in r.widths.windows(2) {
                proptest::prop_assert!((w[1] - 0.5 * w[0]).abs() < 1e-15);
            }
            proptest::prop_assert!(r.exit_time_monotone());
        }
    }
}
