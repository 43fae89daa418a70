//! Initial data: the cone-to-Taub-Bolt background, the FIK-glued metric
//! `G0(t0)`, cutoff functions, the perturbed family `G_p(t0)` and the
//! reduction of a metric with a `dr σ3` cross term to diagonal form.

use crate::error::{Error, Result};
use crate::geometry::{self, ClassReport};
use crate::profile::{GridMap, Profile, Topology};
use crate::reference::{cone_b_slope, cone_c_slope, SolitonBackground, TaubBolt};
use crate::spectral::SpectralResult;
use crate::stencil::{Parity, ParityInterp};

/// Quintic smoothstep `10x^3 - 15x^4 + 6x^5` clamped to `[0, 1]`.
pub fn smoothstep5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

/// `(σ, σ', σ'')` of [`smoothstep5`].
pub fn smoothstep5_derivs(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0; 3];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let m = x * (1.0 - x);
    [smoothstep5(x), 30.0 * m * m, 60.0 * m * (1.0 - 2.0 * x)]
}

/// Decreasing cutoff: 1 for `x <= lo`, 0 for `x >= hi`.
fn cutoff(x: f64, lo: f64, hi: f64) -> [f64; 3] {
    let w = hi - lo;
    let [v, d1, d2] = smoothstep5_derivs((x - lo) / w);
    [1.0 - v, -d1 / w, -d2 / (w * w)]
}

/// Cutoff in the soliton potential: with `x = (1 - t0) f / scale`, equal to 1
/// for `x <= 1/2` and supported in `x < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub scale: f64,
    pub t0: f64,
}

impl Bump {
    pub fn new(scale: f64, t0: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::Parameter(format!("bump scale {scale} must be positive")));
        }
        check_t0(t0)?;
        Ok(Self { scale, t0 })
    }

    fn x(&self, f: f64) -> f64 {
        (1.0 - self.t0) * f / self.scale
    }

    pub fn value(&self, f: f64) -> f64 {
        cutoff(self.x(f), 0.5, 1.0)[0]
    }

    /// Largest `f` in the support.
    pub fn support_f(&self) -> f64 {
        self.scale / (1.0 - self.t0)
    }

    /// Value and `s`-derivatives on the soliton at arclength `s`.
    pub fn on_soliton(&self, bg: &SolitonBackground, s: f64) -> Result<[f64; 3]> {
        let e = bg.eval(s)?;
        let k = (1.0 - self.t0) / self.scale;
        let [v, d1, d2] = cutoff(self.x(e.f), 0.5, 1.0);
        Ok([v, d1 * k * e.fs, d2 * (k * e.fs).powi(2) + d1 * k * e.fss])
    }

    /// Arclength on the soliton where the support ends (`f` is increasing).
    pub fn support_radius(&self, bg: &SolitonBackground) -> Result<f64> {
        let target = self.support_f();
        let p = &bg.profile;
        let i = bg.f.partition_point(|&f| f < target);
        if i >= p.len() {
            return Err(Error::Parameter(format!(
                "bump support f < {target} exceeds the soliton grid"
            )));
        }
        crate::numerics::brent(|s| Ok(bg.eval(s)?.f - target), if i == 0 { 0.0 } else { p.s[i - 1] }, p.s[i], 1e-12)
    }
}

/// Samples of a bump on a soliton grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpSample {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    /// `sup |η_s|` and `sup |η_ss|` in the soliton metric.
    pub max_d1: f64,
    pub max_d2: f64,
}

/// Evaluates the cutoff `η` with the given scale at time `t0` on `nodes`
/// points of `[0, s_max]` of the soliton.
pub fn bump(bg: &SolitonBackground, scale: f64, t0: f64, nodes: usize, s_max: f64) -> Result<BumpSample> {
    let b = Bump::new(scale, t0)?;
    let s = crate::profile::cell_centers(nodes, s_max.min(bg.s_max()));
    let vals = crate::par::map_indices(s.len(), |i| b.on_soliton(bg, s[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(BumpSample {
        values: vals.iter().map(|v| v[0]).collect(),
        max_d1: vals.iter().fold(0.0, |m, v| m.max(v[1].abs())),
        max_d2: vals.iter().fold(0.0, |m, v| m.max(v[2].abs())),
        s,
    })
}

fn check_t0(t0: f64) -> Result<()> {
    if !(0.0..1.0).contains(&t0) {
        return Err(Error::Parameter(format!("t0 = {t0} outside [0, 1)")));
    }
    Ok(())
}

/// Cone `(s/2^{1/4}, s/√2)` for `s <= R`, `α TB(s/α)` for `s >= 3R` with the
/// Taub-Bolt metric of `n = 1`, blended by a quintic smoothstep in between.
#[derive(Clone, Debug)]
pub struct ConeToBolt {
    pub radius: f64,
    pub alpha: f64,
    bolt: TaubBolt,
}

/// Samples per unit length used to certify the blend.
const BLEND_SAMPLES: usize = 4000;

impl ConeToBolt {
    /// Smallest admissible `α` times powers of 1.05 until the blend is
    /// monotone with `u < 1`.
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 3.0) {
            return Err(Error::Parameter(format!("glue radius {radius} must be at least 3")));
        }
        let mut bolt = TaubBolt::new(1.0)?;
        let (b_cone, c_cone) = (radius * cone_b_slope(), radius * cone_c_slope());
        let mut alpha = 1.0;
        loop {
            let (b, c) = bolt.at_s(3.0 * radius / alpha);
            if alpha * b > b_cone && alpha * c > c_cone {
                break;
            }
            alpha *= 1.05;
        }
        let mut last = None;
        for _ in 0..200 {
            let mut g = Self { radius, alpha, bolt: bolt.clone() };
            match g.certify() {
                Ok(()) => return Ok(g),
                Err(e) => last = Some(e),
            }
            alpha *= 1.05;
        }
        Err(last.unwrap())
    }

    pub fn with_alpha(radius: f64, alpha: f64) -> Result<Self> {
        let mut g = Self { radius, alpha, bolt: TaubBolt::new(1.0)? };
        g.certify()?;
        Ok(g)
    }

    /// Asymptotic mass `m_TB / α`.
    pub fn mass(&self) -> f64 {
        0.25 / self.alpha
    }

    pub fn at_s(&mut self, s: f64) -> (f64, f64) {
        let r = self.radius;
        let cone = (s * cone_b_slope(), s * cone_c_slope());
        if s <= r {
            return cone;
        }
        let (b, c) = self.bolt.at_s(s / self.alpha);
        let bolt = (self.alpha * b, self.alpha * c);
        if s >= 3.0 * r {
            return bolt;
        }
        let chi = smoothstep5((s - r) / (2.0 * r));
        ((1.0 - chi) * cone.0 + chi * bolt.0, (1.0 - chi) * cone.1 + chi * bolt.1)
    }

    /// Strictly increasing `b`, `c` and `u < 1` on `[R, 3R]`.
    fn certify(&mut self) -> Result<()> {
        let r = self.radius;
        let n = (BLEND_SAMPLES as f64 * r.max(1.0)).min(2e5) as usize;
        let mut prev = self.at_s(r);
        for k in 1..=n {
            let s = r + 2.0 * r * k as f64 / n as f64;
            let (b, c) = self.at_s(s);
            let fail = |reason: String| Error::Glue { lo: s - 2.0 * r / n as f64, hi: s, reason };
            if !(b > prev.0 && c > prev.1) {
                return Err(fail(format!("not increasing at α = {}", self.alpha)));
            }
            if !(c < b) {
                return Err(fail(format!("u = {} at α = {}", c / b, self.alpha)));
            }
            prev = (b, c);
        }
        Ok(())
    }
}

/// Output of [`glue_cone_to_bolt`].
#[derive(Clone, Debug)]
pub struct GlueReport {
    pub alpha: f64,
    /// `1 - max u`.
    pub delta: f64,
    pub mass: f64,
    pub class: ClassReport,
}

/// Samples the cone-to-bolt background on `grid`. The result is tagged as a
/// nut; its cone tip fails the axis condition by construction.
pub fn glue_cone_to_bolt(radius: f64, grid: &GridMap) -> Result<(Profile, GlueReport)> {
    let mut g = ConeToBolt::new(radius)?;
    let (r, s, a) = grid.nodes();
    let (b, c): (Vec<f64>, Vec<f64>) = s.iter().map(|&x| g.at_s(x)).unzip();
    let p = Profile::with_arclength(Topology::Nut, r, s, a, b, c)?;
    let class = geometry::class_check(&p);
    let report = GlueReport { alpha: g.alpha, delta: 1.0 - class.u_max, mass: g.mass(), class };
    if !(report.delta > 0.0 && class_ok_off_axis(&report.class)) {
        return Err(Error::Glue {
            lo: radius,
            hi: 3.0 * radius,
            reason: format!("sampled profile fails the class conditions: {:?}", report.class.passes),
        });
    }
    Ok((p, report))
}

fn class_ok_off_axis(c: &ClassReport) -> bool {
    c.passes.u_bound && c.passes.slopes && c.passes.decay
}

/// Parameters of `G0(t0)` and of the perturbation `G_p(t0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlueConfig {
    /// Glueing scale `Γ0`; sets `R1 = sqrt(Γ0/2)`.
    pub gamma0_big: f64,
    /// Perturbation cutoff scale `γ0`.
    pub gamma0: f64,
    pub t0: f64,
    /// Outer limit of the perturbation support.
    pub r0: f64,
    /// The scaled soliton is used for `s <= R1` and blended out by `R2`.
    pub r1: f64,
    pub r2: f64,
    /// Glue radius of the cone-to-bolt background.
    pub r3: f64,
    /// Coefficients over the modes above `λ*`, top mode first.
    pub p: Vec<f64>,
    pub p_bar: f64,
    /// Cells of the `G0` grid.
    pub nodes: usize,
    /// Cells per unit of the scaled bolt radius at the axis.
    pub axis_points: f64,
    /// Outer boundary in units of the background's `α`.
    pub s_max_factor: f64,
    /// Fixed `α`; searched for when `None`.
    pub alpha: Option<f64>,
}

impl Default for GlueConfig {
    fn default() -> Self {
        Self::from_scales(50.0, 1.0, 0.9)
    }
}

impl GlueConfig {
    /// Radii `R1 = sqrt(Γ0/2)`, `R2 = 2 R1`, `R3 = 4√2 R1`, `R0 = R1/2`.
    pub fn from_scales(gamma0_big: f64, gamma0: f64, t0: f64) -> Self {
        let r1 = (gamma0_big / 2.0).sqrt();
        Self {
            gamma0_big,
            gamma0,
            t0,
            r0: 0.5 * r1,
            r1,
            r2: 2.0 * r1,
            r3: 4.0 * 2f64.sqrt() * r1,
            p: Vec::new(),
            p_bar: 0.1,
            nodes: 1200,
            axis_points: 40.0,
            s_max_factor: 200.0,
            alpha: None,
        }
    }

    pub fn tau(&self) -> f64 {
        (1.0 - self.t0).sqrt()
    }

    /// Cap `p̄ (1 - t0)^{|λ*|}` on `|p|`.
    pub fn p_cap(&self, lambda_star: f64) -> f64 {
        self.p_bar * (1.0 - self.t0).powf(lambda_star.abs())
    }

    pub fn p_norm(&self) -> f64 {
        self.p.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        check_t0(self.t0)?;
        let ok = 0.0 < self.r0 && self.r0 < self.r1 && self.r1 < self.r2 && self.r2 < self.r3;
        if !ok {
            return Err(Error::Config(format!(
                "radii must satisfy 0 < R0 < R1 < R2 < R3, got {} {} {} {}",
                self.r0, self.r1, self.r2, self.r3
            )));
        }
        if self.r3 < 3.0 {
            return Err(Error::Config(format!("R3 = {} must be at least 3", self.r3)));
        }
        if !(self.gamma0 > 0.0 && self.gamma0_big > 0.0 && self.p_bar > 0.0) {
            return Err(Error::Config("Γ0, γ0 and p̄ must be positive".into()));
        }
        if self.nodes < 64 || !(self.axis_points >= 4.0) || !(self.s_max_factor > 3.0) {
            return Err(Error::Config("grid parameters too small".into()));
        }
        Ok(())
    }
}

/// `G0(t0)` with the pieces it was assembled from.
#[derive(Clone, Debug)]
pub struct G0 {
    pub profile: Profile,
    pub grid: GridMap,
    pub alpha: f64,
    /// `1 - max u`.
    pub delta: f64,
    pub class: ClassReport,
}

/// Scaled soliton on `s <= R1`, blended in the squared warping functions to
/// the cone-to-bolt background of radius `R3` over `(R1, R2)`.
pub fn build_g0(cfg: &GlueConfig, bg: &SolitonBackground) -> Result<G0> {
    cfg.validate()?;
    let tau = cfg.tau();
    if cfg.r2 / tau > bg.s_max() {
        return Err(Error::Config(format!(
            "R2/sqrt(1 - t0) = {} exceeds the soliton grid {}",
            cfg.r2 / tau,
            bg.s_max()
        )));
    }
    let mut far = match cfg.alpha {
        Some(alpha) => ConeToBolt::with_alpha(cfg.r3, alpha)?,
        None => ConeToBolt::new(cfg.r3)?,
    };
    let grid = GridMap::Sinh {
        n: cfg.nodes,
        length: cfg.s_max_factor * far.alpha,
        h0: tau * bg.bolt_size / cfg.axis_points,
    };
    let (r, s, a) = grid.nodes();
    let mut b = Vec::with_capacity(s.len());
    let mut c = Vec::with_capacity(s.len());
    for &x in &s {
        let (bv, cv) = if x <= cfg.r1 {
            let e = bg.eval(x / tau)?;
            (tau * e.b, tau * e.c)
        } else if x >= cfg.r2 {
            far.at_s(x)
        } else {
            let e = bg.eval(x / tau)?;
            let (bf, cf) = far.at_s(x);
            let eta = 1.0 - smoothstep5((x - cfg.r1) / (cfg.r2 - cfg.r1));
            let blend = |inner: f64, outer: f64| (eta * inner * inner + (1.0 - eta) * outer * outer).sqrt();
            (blend(tau * e.b, bf), blend(tau * e.c, cf))
        };
        b.push(bv);
        c.push(cv);
    }
    let profile = Profile::with_arclength(Topology::Bolt, r, s, a, b, c)?;
    let class = geometry::class_check(&profile);
    let strict = profile.b.windows(2).all(|w| w[1] > w[0]) && profile.c.windows(2).all(|w| w[1] > w[0]);
    let delta = 1.0 - class.u_max;
    if !(class.in_class() && strict && delta > 0.0) {
        return Err(Error::Glue {
            lo: cfg.r1,
            hi: cfg.r2,
            reason: format!(
                "G0 fails the class conditions (strictly increasing: {strict}, δ = {delta}, {:?})",
                class.passes
            ),
        });
    }
    Ok(G0 { profile, grid, alpha: far.alpha, delta, class })
}

/// Metric `A dr^2 + B (σ1^2 + σ2^2) + C σ3^2 + 2 D dr σ3` on the grid `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricComponents {
    pub topology: Topology,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl MetricComponents {
    pub fn from_profile(p: &Profile) -> Self {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).collect();
        Self {
            topology: p.topology,
            r: p.r.clone(),
            a: sq(&p.a),
            b: sq(&p.b),
            c: sq(&p.c),
            d: vec![0.0; p.len()],
        }
    }
}

/// Orthogonalizes the radial direction against the fibre: lapse
/// `sqrt(A - D^2/C)`, `b = sqrt(B)`, `c = sqrt(C)`, arclength re-integrated.
pub fn diagonalize(m: &MetricComponents) -> Result<Profile> {
    let n = m.r.len();
    let mut lapse = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, c, d) = (m.a[i], m.b[i], m.c[i], m.d[i]);
        if !(b > 0.0 && c > 0.0) {
            return Err(Error::Degenerate(format!("B = {b}, C = {c} at node {i}")));
        }
        let l2 = a - d * d / c;
        if !(l2 > 0.0) {
            return Err(Error::Degenerate(format!("A - D^2/C = {l2} at node {i}")));
        }
        lapse.push(l2.sqrt());
    }
    let b = m.b.iter().map(|x| x.sqrt()).collect();
    let c = m.c.iter().map(|x| x.sqrt()).collect();
    Profile::new(m.topology, m.r.clone(), lapse, b, c)
}

/// `G0 + (1 - t0) φ*(η_{γ0} Σ p_j h_j)` in components, before diagonalizing.
pub fn perturbation_components(
    g0: &Profile,
    cfg: &GlueConfig,
    bg: &SolitonBackground,
    spectrum: &SpectralResult,
) -> Result<MetricComponents> {
    cfg.validate()?;
    let mut m = MetricComponents::from_profile(g0);
    if cfg.p.iter().all(|&x| x == 0.0) {
        return Ok(m);
    }
    if cfg.p.len() > spectrum.k {
        return Err(Error::Parameter(format!(
            "{} coefficients for {} modes above λ*",
            cfg.p.len(),
            spectrum.k
        )));
    }
    let cap = cfg.p_cap(spectrum.lambda_star);
    if cfg.p_norm() > cap * (1.0 + 1e-12) {
        return Err(Error::PerturbationSize(format!(
            "|p| = {} exceeds p̄ (1 - t0)^|λ*| = {cap}",
            cfg.p_norm()
        )));
    }
    let tau = cfg.tau();
    let eta = Bump::new(cfg.gamma0, cfg.t0)?;
    let support = eta.support_radius(bg)?;
    let grid_end = spectrum.grid.s_max - 3.0 * spectrum.grid.spacing();
    if support > grid_end {
        return Err(Error::Config(format!(
            "perturbation support s = {support} exceeds the spectral grid {grid_end}"
        )));
    }
    if tau * support > cfg.r0 {
        return Err(Error::Config(format!(
            "perturbation support {} reaches past R0 = {}",
            tau * support,
            cfg.r0
        )));
    }
    let mut sum = crate::spectral::SymTensorU2::zeros(&spectrum.eigentensors[0].s);
    for (pj, h) in cfg.p.iter().zip(&spectrum.eigentensors) {
        sum.axpy(*pj, h);
    }
    let interp: Vec<ParityInterp> =
        (0..4).map(|k| ParityInterp::new(&sum.s, sum.component(k), Parity::Even, 6)).collect();
    for i in 0..g0.len() {
        let sb = g0.s[i] / tau;
        if sb >= support {
            break;
        }
        let w = eta.value(bg.eval(sb)?.f);
        let t: Vec<f64> = interp.iter().map(|f| w * f.eval(sb)).collect();
        m.a[i] *= 1.0 + t[0];
        m.b[i] *= 1.0 + t[1];
        m.c[i] *= 1.0 + t[2];
        m.d[i] = g0.a[i] * g0.c[i] * t[3];
    }
    Ok(m)
}

/// The perturbed initial metric `G_p(t0)` in diagonal form, checked for class
/// membership.
pub fn perturb(
    g0: &Profile,
    cfg: &GlueConfig,
    bg: &SolitonBackground,
    spectrum: &SpectralResult,
) -> Result<Profile> {
    if cfg.p.iter().all(|&x| x == 0.0) {
        return Ok(g0.clone());
    }
    let m = perturbation_components(g0, cfg, bg, spectrum)?;
    let p = diagonalize(&m).map_err(|e| Error::PerturbationSize(format!("{e}; reduce p̄")))?;
    let class = geometry::class_check(&p);
    if !class.in_class() {
        return Err(Error::PerturbationSize(format!(
            "perturbed metric leaves the class ({:?}, u_max = {}, min b_s = {}, min c_s = {}); reduce p̄",
            class.passes, class.u_max, class.min_bs, class.min_cs
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smoothstep_derivatives_match_differences() {
        for &x in &[0.1, 0.37, 0.5, 0.81] {
            let h = 1e-5;
            let d = smoothstep5_derivs(x);
            let fd1 = (smoothstep5(x + h) - smoothstep5(x - h)) / (2.0 * h);
            let fd2 = (smoothstep5(x + h) - 2.0 * smoothstep5(x) + smoothstep5(x - h)) / (h * h);
            assert!((d[1] - fd1).abs() < 1e-8);
            assert!((d[2] - fd2).abs() < 1e-4);
        }
    }

    #[test]
    fn cone_to_bolt_is_exact_cone_inside() {
        let mut g = ConeToBolt::new(4.0).unwrap();
        let (b, c) = g.at_s(3.5);
        assert_eq!(b, 3.5 * cone_b_slope());
        assert_eq!(c, 3.5 * cone_c_slope());
        assert!(g.alpha > 1.0);
    }

    #[test]
    fn cone_to_bolt_far_region_is_scaled_bolt() {
        let mut g = ConeToBolt::new(3.0).unwrap();
        let mut tb = TaubBolt::new(1.0).unwrap();
        let s = 40.0;
        let (b, c) = g.at_s(s);
        let (bb, cb) = tb.at_s(s / g.alpha);
        assert!((b - g.alpha * bb).abs() < 1e-12 * b);
        assert!((c - g.alpha * cb).abs() < 1e-12 * c);
    }

    #[test]
    fn diagonal_input_is_unchanged() {
        let r = crate::profile::cell_centers(50, 5.0);
        let b: Vec<f64> = r.iter().map(|x| 1.0 + x * x).collect();
        let c: Vec<f64> = r.iter().map(|x| x / (1.0 + x)).collect();
        let a: Vec<f64> = r.iter().map(|x| 1.0 + 0.1 * x).collect();
        let p = Profile::new(Topology::Bolt, r, a, b, c).unwrap();
        let q = diagonalize(&MetricComponents::from_profile(&p)).unwrap();
        for i in 0..p.len() {
            assert!((q.a[i] - p.a[i]).abs() < 1e-14);
            assert!((q.b[i] - p.b[i]).abs() < 1e-14);
            assert!((q.s[i] - p.s[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_cross_term_is_rejected() {
        let r = crate::profile::cell_centers(10, 1.0);
        let m = MetricComponents {
            topology: Topology::Nut,
            r: r.clone(),
            a: vec![1.0; 10],
            b: vec![1.0; 10],
            c: vec![1.0; 10],
            d: vec![1.5; 10],
        };
        assert!(matches!(diagonalize(&m), Err(Error::Degenerate(_))));
    }

    #[test]
    fn radii_follow_the_scale() {
        let c = GlueConfig::from_scales(32.0, 1.0, 0.5);
        assert_eq!(c.r1, 4.0);
        assert_eq!(c.r2, 8.0);
        assert!((c.r3 - 16.0 * 2f64.sqrt()).abs() < 1e-12);
        c.validate().unwrap();
        let mut bad = c.clone();
        bad.r0 = 5.0;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn smoothstep_is_monotone_in_unit_interval(x in -0.5f64..1.5, y in -0.5f64..1.5) {
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            prop_assert!(smoothstep5(lo) <= smoothstep5(hi));
            prop_assert!((0.0..=1.0).contains(&smoothstep5(x)));
        }

        #[test]
        fn lapse_is_orthogonal_complement(
            a in 0.5f64..3.0, c in 0.2f64..3.0, d in -0.5f64..0.5,
        ) {
            // With v = ∂r - (D/C) X3: g(v, X3) = 0 and g(v, v) = A - D^2/C.
            let g = [[a, d], [d, c]];
            let v = [1.0, -d / c];
            let gv3 = g[0][1] * v[0] + g[1][1] * v[1];
            let gvv = v[0] * (g[0][0] * v[0] + g[0][1] * v[1]) + v[1] * (g[1][0] * v[0] + g[1][1] * v[1]);
            prop_assert!(gv3.abs() < 1e-12);
            prop_assume!(a - d * d / c > 1e-3);
            let r = crate::profile::cell_centers(8, 1.0);
            let m = MetricComponents {
                topology: Topology::Nut,
                r,
                a: vec![a; 8],
                b: vec![1.0; 8],
                c: vec![c; 8],
                d: vec![d; 8],
            };
            let p = diagonalize(&m).unwrap();
            prop_assert!((p.a[3] * p.a[3] - gvv).abs() < 1e-12);
        }
    }
}
