//! Closed-form Taub-NUT and Taub-Bolt metrics, the FIK asymptotic cone and
//! the FIK shrinking soliton.
//!
//! Taub-NUT and Taub-Bolt are written in a coordinate `r` in which the lapse is
//! singular at `r = 0`. Profiles are therefore sampled in `ρ = sqrt(r)`, where
//! `a`, `b`, `c` are smooth with the parities of their topology.

use crate::error::{Error, Result};
use crate::geometry::{self, CurvatureFrame};
use crate::numerics::{brent, gauss_legendre8};
use crate::profile::{cell_centers, Profile, Topology};
use crate::stencil::{self, hermite, Parity};

/// `2^{-1/4}`, the asymptotic `b/s` and `c/b` of the FIK cone.
pub fn cone_b_slope() -> f64 {
    2f64.powf(-0.25)
}

/// `2^{-1/2}`, the asymptotic `c/s` of the FIK cone.
pub fn cone_c_slope() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

fn check_n(n: f64) -> Result<()> {
    if n > 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("parameter n must be positive, got {n}")))
    }
}

/// Taub-NUT metric with parameter `n`:
/// `a^2 = (r+2n)/r`, `b^2 = 4r(r+2n)`, `c^2 = 16 n^2 r/(r+2n)`.
#[derive(Clone, Copy, Debug)]
pub struct TaubNut {
    pub n: f64,
}

impl TaubNut {
    pub fn new(n: f64) -> Result<Self> {
        check_n(n)?;
        Ok(Self { n })
    }

    /// `(a^2, b^2, c^2)` at coordinate `r`.
    pub fn coefficients_at_r(&self, r: f64) -> (f64, f64, f64) {
        let n = self.n;
        ((r + 2.0 * n) / r, 4.0 * r * (r + 2.0 * n), 16.0 * n * n * r / (r + 2.0 * n))
    }

    /// Arclength from the nut at `ρ = sqrt(r)`.
    pub fn arclength(&self, rho: f64) -> f64 {
        let q = 2.0 * self.n;
        rho * (rho * rho + q).sqrt() + q * (rho / q.sqrt()).asinh()
    }

    /// `(a_ρ, b, c)` at `ρ`.
    pub fn at_rho(&self, rho: f64) -> (f64, f64, f64) {
        let q = (rho * rho + 2.0 * self.n).sqrt();
        (2.0 * q, 2.0 * rho * q, 4.0 * self.n * rho / q)
    }

    /// Profile on `nodes` cells of `ρ ∈ [0, rho_max]`.
    pub fn profile(&self, nodes: usize, rho_max: f64) -> Result<Profile> {
        let rho = cell_centers(nodes, rho_max);
        let s = rho.iter().map(|&x| self.arclength(x)).collect();
        let (mut a, mut b, mut c) = (vec![], vec![], vec![]);
        for &x in &rho {
            let v = self.at_rho(x);
            a.push(v.0);
            b.push(v.1);
            c.push(v.2);
        }
        Profile::with_arclength(Topology::Nut, rho, s, a, b, c)
    }

    /// `(b, c)` at arclength `s`.
    pub fn at_s(&self, s: f64) -> (f64, f64) {
        let rho = invert_arclength(s, |x| self.arclength(x), |x| self.at_rho(x).0);
        let v = self.at_rho(rho);
        (v.1, v.2)
    }
}

/// Taub-Bolt metric with parameter `n`:
/// `a^2 = (r+n)(r+3n)/(r(r+3n/2))`, `b^2 = 4(r+n)(r+3n)`,
/// `c^2 = 16 n^2 r (r+3n/2)/((r+n)(r+3n))`.
#[derive(Clone, Debug)]
pub struct TaubBolt {
    pub n: f64,
    panel: f64,
    cumulative: Vec<f64>,
}

impl TaubBolt {
    pub fn new(n: f64) -> Result<Self> {
        check_n(n)?;
        Ok(Self { n, panel: 0.02 * n.sqrt(), cumulative: vec![0.0] })
    }

    pub fn coefficients_at_r(&self, r: f64) -> (f64, f64, f64) {
        let n = self.n;
        let p = (r + n) * (r + 3.0 * n);
        (p / (r * (r + 1.5 * n)), 4.0 * p, 16.0 * n * n * r * (r + 1.5 * n) / p)
    }

    /// `(a_ρ, b, c)` at `ρ`.
    pub fn at_rho(&self, rho: f64) -> (f64, f64, f64) {
        let n = self.n;
        let r = rho * rho;
        let p = (r + n) * (r + 3.0 * n);
        let q = r + 1.5 * n;
        (2.0 * (p / q).sqrt(), 2.0 * p.sqrt(), 4.0 * n * rho * (q / p).sqrt())
    }

    fn lapse(&self, rho: f64) -> f64 {
        self.at_rho(rho).0
    }

    /// Extends the panel table of cumulative arclength to cover `rho`.
    fn ensure_table(&mut self, rho: f64) {
        while (self.cumulative.len() - 1) as f64 * self.panel < rho {
            let k = self.cumulative.len() - 1;
            let lo = k as f64 * self.panel;
            let v = gauss_legendre8(&|x| self.lapse(x), lo, lo + self.panel);
            let last = *self.cumulative.last().unwrap();
            self.cumulative.push(last + v);
        }
    }

    fn arclength_tabled(&self, rho: f64) -> f64 {
        let k = ((rho / self.panel).floor() as usize).min(self.cumulative.len() - 1);
        let lo = k as f64 * self.panel;
        self.cumulative[k] + gauss_legendre8(&|x| self.lapse(x), lo, rho)
    }

    /// Arclength from the bolt at `ρ`.
    pub fn arclength(&mut self, rho: f64) -> f64 {
        self.ensure_table(rho);
        self.arclength_tabled(rho)
    }

    pub fn profile(&mut self, nodes: usize, rho_max: f64) -> Result<Profile> {
        let rho = cell_centers(nodes, rho_max);
        self.ensure_table(rho_max);
        let s = rho.iter().map(|&x| self.arclength_tabled(x)).collect();
        let (mut a, mut b, mut c) = (vec![], vec![], vec![]);
        for &x in &rho {
            let v = self.at_rho(x);
            a.push(v.0);
            b.push(v.1);
            c.push(v.2);
        }
        Profile::with_arclength(Topology::Bolt, rho, s, a, b, c)
    }

    /// `(b, c)` at arclength `s`.
    pub fn at_s(&mut self, s: f64) -> (f64, f64) {
        // For large r the lapse tends to 2ρ, so s ≈ ρ^2 bounds the search.
        self.ensure_table(s.sqrt() + 4.0 * self.n.sqrt() + 1.0);
        let this = &*self;
        let rho = invert_arclength(s, |x| this.arclength_tabled(x), |x| this.lapse(x));
        let v = self.at_rho(rho);
        (v.1, v.2)
    }
}

/// Solves `S(ρ) = s` for increasing `S` with derivative `dS`.
fn invert_arclength<S: Fn(f64) -> f64, D: Fn(f64) -> f64>(s: f64, arc: S, lapse: D) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while arc(hi) < s {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let f = arc(x) - s;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - f / lapse(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// The FIK asymptotic cone `b = s/2^{1/4}`, `c = s/sqrt 2` on `nodes` cells of
/// `[0, s_max]`. Tagged as a nut; it fails the axis condition by design.
pub fn cone_fik(nodes: usize, s_max: f64) -> Result<Profile> {
    let s = cell_centers(nodes, s_max);
    let b = s.iter().map(|x| x * cone_b_slope()).collect();
    let c = s.iter().map(|x| x * cone_c_slope()).collect();
    Profile::with_arclength(Topology::Nut, s.clone(), s, vec![1.0; nodes], b, c)
}

/// Radius below which the soliton is integrated outward from the bolt.
const BOLT_SPLICE: f64 = 2.0;

/// Settings for [`fik_shoot`].
#[derive(Clone, Debug)]
pub struct FikSettings {
    /// Starting value of `x = b^2` for the inward integration.
    pub x_max: f64,
    /// Spacing of the output arclength grid.
    pub h: f64,
    /// Integrator steps per output cell.
    pub substeps: usize,
    /// Bracket for the potential constant `k` in `f_s = k c`.
    pub k_bracket: (f64, f64),
    /// Absolute tolerance on `k`.
    pub k_tol: f64,
    /// Terms of the asymptotic expansion used for the starting values.
    pub series_terms: usize,
}

impl Default for FikSettings {
    fn default() -> Self {
        Self {
            x_max: 2.0e6,
            h: 0.01,
            substeps: 4,
            k_bracket: (0.6, 1.2),
            k_tol: 1e-15,
            series_terms: 12,
        }
    }
}

/// The reduced Kähler soliton system in arclength. With `b_s = c/b` and
/// `f_s = k c`, the `(e3, e3)` component of `Ric + Hess f = g/2` becomes
/// `c_s = 2 - u^2 + (k c^2 - b^2/2)/2`.
#[derive(Clone, Copy, Debug)]
pub struct SolitonOde {
    pub k: f64,
}

impl SolitonOde {
    #[inline]
    pub fn rhs(&self, y: [f64; 3]) -> [f64; 3] {
        let [b, c, _] = y;
        let u = c / b;
        [u, 2.0 - u * u + 0.5 * (self.k * c * c - 0.5 * b * b), self.k * c]
    }

    /// `(b_ss, c_ss)` along a solution.
    #[inline]
    pub fn second_derivatives(&self, b: f64, c: f64) -> (f64, f64) {
        let [bs, cs, _] = self.rhs([b, c, 0.0]);
        let fb = 2.0 * c * c / (b * b * b) - 0.5 * b;
        let fc = -2.0 * c / (b * b) + self.k * c;
        ((cs * b - c * bs) / (b * b), fb * bs + fc * cs)
    }

    fn rk4(&self, y: [f64; 3], dt: f64) -> [f64; 3] {
        let add = |y: [f64; 3], k: [f64; 3], f: f64| [y[0] + f * k[0], y[1] + f * k[1], y[2] + f * k[2]];
        let k1 = self.rhs(y);
        let k2 = self.rhs(add(y, k1, 0.5 * dt));
        let k3 = self.rhs(add(y, k2, 0.5 * dt));
        let k4 = self.rhs(add(y, k3, dt));
        [
            y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            y[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ]
    }

    /// Asymptotically conical branch `c^2 = φ(x)`, `x = b^2`, from the
    /// expansion `φ = A_1 x + A_0 + Σ_m A_{-m} x^{-m}` of the linear equation
    /// `φ' + (1/x - k/2) φ = 2 - x/4`.
    pub fn conical_c2(&self, x: f64, terms: usize) -> f64 {
        let k = self.k;
        let a1 = 1.0 / (2.0 * k);
        let a0 = (4.0 * a1 - 4.0) / k;
        let mut val = a1 * x + a0;
        let mut prev = a0;
        for m in 1..terms {
            let am = (2.0 / k) * (2.0 - m as f64) * prev;
            val += am / x.powi(m as i32);
            prev = am;
        }
        val
    }
}

/// Result of one inward integration.
struct Inward {
    /// Distance from the start to the bolt crossing `c = 0`.
    length: f64,
    beta: f64,
    f_at_bolt: f64,
    /// States at the recorded steps, outermost first.
    states: Vec<[f64; 3]>,
    /// Number of full steps before the crossing step.
    taken: usize,
    /// Distance from the last full step to the crossing.
    root: f64,
}

/// Integrates inward until `c` changes sign. `first` is the length of the
/// first step; later steps have length `dt`.
fn integrate_inward(ode: &SolitonOde, y0: [f64; 3], first: f64, dt: f64, record: bool) -> Result<Inward> {
    let first = if first > 0.0 { first } else { dt };
    let mut y = y0;
    let mut taken = 0usize;
    let travelled_after = |taken: usize| if taken == 0 { 0.0 } else { first + (taken - 1) as f64 * dt };
    let mut states = Vec::new();
    if record {
        states.push(y);
    }
    let mut step = first;
    let max_steps = (20.0 * y0[0] / dt) as usize + 1000;
    for _ in 0..max_steps {
        let next = ode.rk4(y, -step);
        if !(next[0].is_finite() && next[1].is_finite()) || next[0] <= 0.0 {
            return Err(Error::Construction(format!(
                "inward integration broke down at distance {} (b = {}, c = {})",
                travelled_after(taken),
                next[0],
                next[1]
            )));
        }
        if next[1] <= 0.0 {
            // Locate c = 0 on this step by cubic Hermite interpolation in σ,
            // the distance travelled from `y`.
            let d0 = ode.rhs(y);
            let d1 = ode.rhs(next);
            let cf = |sig: f64| hermite(0.0, step, y[1], next[1], -d0[1], -d1[1], sig);
            let root = brent(|sig| Ok(cf(sig)), 0.0, step, 1e-16 * step.max(1.0))?;
            let beta = hermite(0.0, step, y[0], next[0], -d0[0], -d1[0], root);
            let fb = hermite(0.0, step, y[2], next[2], -d0[2], -d1[2], root);
            if record {
                states.push(next);
            }
            return Ok(Inward {
                length: travelled_after(taken) + root,
                beta,
                f_at_bolt: fb,
                states,
                taken,
                root,
            });
        }
        y = next;
        taken += 1;
        step = dt;
        if record {
            states.push(y);
        }
    }
    Err(Error::Construction("inward integration did not reach c = 0".into()))
}

/// One evaluation point of the soliton with derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FikPoint {
    pub b: f64,
    pub c: f64,
    pub f: f64,
    pub bs: f64,
    pub cs: f64,
    pub bss: f64,
    pub css: f64,
    pub fs: f64,
    pub fss: f64,
}

impl FikPoint {
    pub fn u(&self) -> f64 {
        self.c / self.b
    }

    pub fn curvature(&self) -> CurvatureFrame {
        CurvatureFrame::from_slopes(self.b, self.c, self.bs, self.cs, self.bss, self.css)
    }
}

/// The FIK shrinker `Ric + Hess f = g/2` on a uniform arclength grid from the
/// bolt.
#[derive(Clone, Debug)]
pub struct SolitonBackground {
    pub profile: Profile,
    pub f: Vec<f64>,
    pub f_s: Vec<f64>,
    pub lambda: f64,
    pub bolt_size: f64,
    /// Constant in `f_s = k c`.
    pub k: f64,
    /// Smallest `s` beyond which `|u - 2^{-1/4}| < 1e-4`.
    pub matching_radius: f64,
    h: f64,
}

impl SolitonBackground {
    pub fn ode(&self) -> SolitonOde {
        SolitonOde { k: self.k }
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn s_max(&self) -> f64 {
        self.profile.s_max()
    }

    /// Soliton data at arclength `s` (cubic Hermite in the stored states with
    /// exact derivatives from the ODE).
    pub fn eval(&self, s: f64) -> Result<FikPoint> {
        let p = &self.profile;
        let n = p.len();
        let sa = s.abs();
        if !(sa <= p.s[n - 1]) {
            return Err(Error::Parameter(format!(
                "s = {s} outside the soliton grid [0, {}]",
                p.s[n - 1]
            )));
        }
        let ode = self.ode();
        let node = |j: isize| -> [f64; 6] {
            // (s, b, c, f, b', c') with parity reflection for j < 0.
            if j >= 0 {
                let j = j as usize;
                let d = ode.rhs([p.b[j], p.c[j], 0.0]);
                [p.s[j], p.b[j], p.c[j], self.f[j], d[0], d[1]]
            } else {
                let j = (-j - 1) as usize;
                let d = ode.rhs([p.b[j], p.c[j], 0.0]);
                [-p.s[j], p.b[j], -p.c[j], self.f[j], -d[0], d[1]]
            }
        };
        let i = ((sa / self.h - 0.5).floor() as isize).min(n as isize - 2);
        let (l, r) = (node(i), node(i + 1));
        let b = hermite(l[0], r[0], l[1], r[1], l[4], r[4], sa);
        let c = hermite(l[0], r[0], l[2], r[2], l[5], r[5], sa);
        let f = hermite(l[0], r[0], l[3], r[3], self.k * l[2], self.k * r[2], sa);
        let d = ode.rhs([b, c, 0.0]);
        let (bss, css) = ode.second_derivatives(b, c);
        let pt = FikPoint {
            b,
            c,
            f,
            bs: d[0],
            cs: d[1],
            bss,
            css,
            fs: self.k * c,
            fss: self.k * d[1],
        };
        if s < 0.0 {
            Ok(FikPoint { c: -pt.c, bs: -pt.bs, css: -pt.css, fs: -pt.fs, ..pt })
        } else {
            Ok(pt)
        }
    }

    /// The self-similar Ricci flow profile at time `t`:
    /// `sqrt(1-t) (b, c)(s / sqrt(1-t))`.
    pub fn at_time(&self, t: f64) -> Profile {
        self.profile.scaled((1.0 - t).sqrt())
    }
}

/// Builds the FIK shrinker by shooting.
///
/// Starting on the asymptotically conical branch at `x = b^2 = x_max`, the
/// reduced system is integrated inward (the stable direction) until the
/// fibre collapses (`c = 0`), giving a bolt radius `β(k)`. Smoothness at a
/// bolt with `c_s = 1` needs `β = 2`, so `k` is found by root-finding on
/// `β(k) - 2`.
pub fn fik_shoot(settings: &FikSettings) -> Result<SolitonBackground> {
    let FikSettings { x_max, h, substeps, k_bracket, k_tol, series_terms } = settings.clone();
    if !(h > 0.0) || substeps == 0 || !(x_max > 16.0) {
        return Err(Error::Parameter("invalid FIK settings".into()));
    }
    let dt = h / substeps as f64;
    let start = |k: f64| -> Result<[f64; 3]> {
        let ode = SolitonOde { k };
        let c2 = ode.conical_c2(x_max, series_terms);
        if !(c2 > 0.0) {
            return Err(Error::Construction(format!("conical branch has c^2 = {c2} at k = {k}")));
        }
        Ok([x_max.sqrt(), c2.sqrt(), 0.0])
    };
    let beta_minus_two = |k: f64| -> Result<f64> {
        let run = integrate_inward(&SolitonOde { k }, start(k)?, 0.0, dt, false)?;
        Ok(run.beta - 2.0)
    };
    let k = brent(beta_minus_two, k_bracket.0, k_bracket.1, k_tol).map_err(|e| match e {
        Error::Bracket(m) => Error::Construction(format!("shooting bracket not found: {m}")),
        other => other,
    })?;
    let ode = SolitonOde { k };
    let y0 = start(k)?;
    let probe = integrate_inward(&ode, y0, 0.0, dt, false)?;
    // Align the recorded steps with the cell centers (i + 1/2) h measured from
    // the bolt.
    let top = ((probe.length / h) - 0.5).floor();
    let mut first = probe.length - (top + 0.5) * h;
    let n_cells = top as usize + 1;
    let inner = 1 + (n_cells - 1) * substeps;
    // Distance from the innermost recorded cell to the bolt, measured locally
    // so that it does not inherit the rounding of the accumulated distance.
    let inner_gap = |run: &Inward| (run.taken as f64 - inner as f64) * dt + run.root;
    let mut run = integrate_inward(&ode, y0, first, dt, true)?;
    for _ in 0..8 {
        let offset = inner_gap(&run) - 0.5 * h;
        if offset.abs() <= 1e-15 {
            break;
        }
        first += offset;
        if !(first > 0.0 && first <= h + dt) {
            return Err(Error::Construction(format!("grid alignment drifted by {offset}")));
        }
        run = integrate_inward(&ode, y0, first, dt, true)?;
    }
    // states[0] is the start, states[1] is the outermost cell center, and
    // every `substeps` further states is the next one inward.
    let mut b = vec![0.0; n_cells];
    let mut c = vec![0.0; n_cells];
    let mut f = vec![0.0; n_cells];
    for i in 0..n_cells {
        let idx = 1 + (n_cells - 1 - i) * substeps;
        let st = run.states.get(idx).ok_or_else(|| {
            Error::Construction("inward run shorter than the aligned grid".into())
        })?;
        b[i] = st[0];
        c[i] = st[1];
        f[i] = st[2] - run.f_at_bolt;
    }
    // The inward run carries rounding picked up at large radii, and the
    // curvature near the bolt divides by c. Replace the innermost cells by an
    // outward integration from the exact bolt data.
    let splice = ((BOLT_SPLICE / h).ceil() as usize).min(n_cells);
    let mut y = [2.0, 0.0, 0.0];
    for (i, cell) in (0..splice).enumerate() {
        let span = if i == 0 { 0.5 * h } else { h };
        for _ in 0..substeps {
            y = ode.rk4(y, span / substeps as f64);
        }
        b[cell] = y[0];
        c[cell] = y[1];
        f[cell] = y[2];
    }
    let s = cell_centers(n_cells, n_cells as f64 * h);
    let profile = Profile::with_arclength(Topology::Bolt, s.clone(), s.clone(), vec![1.0; n_cells], b, c)?;
    let f_s: Vec<f64> = profile.c.iter().map(|c| k * c).collect();
    let u_inf = cone_b_slope();
    let mut matching_radius = 0.0;
    for i in (0..n_cells).rev() {
        if (profile.c[i] / profile.b[i] - u_inf).abs() >= 1e-4 {
            matching_radius = s[(i + 1).min(n_cells - 1)];
            break;
        }
    }
    let bg = SolitonBackground {
        profile,
        f,
        f_s,
        lambda: 0.5,
        bolt_size: run.beta,
        k,
        matching_radius,
        h,
    };
    let residual = soliton_residual(&bg);
    if !(residual < 1e-4) {
        return Err(Error::Convergence(format!("soliton residual {residual} after shooting")));
    }
    Ok(bg)
}

/// Frame components of `Ric + Hess f - λ g` at every node, from finite
/// differences of the profile (independent of the shooting ODE).
pub fn soliton_defect(p: &Profile, f_s: &[f64], lambda: f64) -> Vec<[f64; 3]> {
    let sl = p.slopes();
    let frames = geometry::curvature_from(p, &sl);
    let dr = p.dr();
    crate::par::map_indices(p.len(), |i| {
        let fss = stencil::d1_at(f_s, dr, Parity::Odd, i) / p.a[i];
        let fr = &frames[i];
        [
            fr.ric00 + fss - lambda,
            fr.ric11 + f_s[i] * sl.bs[i] / p.b[i] - lambda,
            fr.ric33 + f_s[i] * sl.cs[i] / p.c[i] - lambda,
        ]
    })
}

/// `sup |Ric + Hess f - λ g|` in the frame norm (the `(1,1)` entry counted
/// twice).
pub fn soliton_residual_of(p: &Profile, f_s: &[f64], lambda: f64) -> f64 {
    soliton_defect(p, f_s, lambda)
        .iter()
        .map(|e| (e[0] * e[0] + 2.0 * e[1] * e[1] + e[2] * e[2]).sqrt())
        .fold(0.0, f64::max)
}

pub fn soliton_residual(bg: &SolitonBackground) -> f64 {
    soliton_residual_of(&bg.profile, &bg.f_s, bg.lambda)
}

/// Largest disagreement between `f_s` recovered from the `(e1,e1)` and the
/// `(e3,e3)` soliton equations, over nodes where both are well conditioned.
pub fn f_recovery_gap(bg: &SolitonBackground) -> f64 {
    let p = &bg.profile;
    let sl = p.slopes();
    let frames = geometry::curvature_from(p, &sl);
    let n = p.len();
    (0..n.saturating_sub(2))
        .filter(|&i| sl.bs[i] > 0.05 && sl.cs[i] > 0.05)
        .map(|i| {
            let from11 = (bg.lambda - frames[i].ric11) * p.b[i] / sl.bs[i];
            let from33 = (bg.lambda - frames[i].ric33) * p.c[i] / sl.cs[i];
            (from11 - from33).abs() / (1.0 + from11.abs())
        })
        .fold(0.0, f64::max)
}

/// Kähler defect `sup |b_s - c/b|` with `b_s` from finite differences.
pub fn kahler_residual(p: &Profile) -> f64 {
    let sl = p.slopes();
    (0..p.len())
        .map(|i| (sl.bs[i] - p.c[i] / p.b[i]).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taub_nut_coefficients_at_r_two() {
        let tn = TaubNut::new(1.0).unwrap();
        let (a2, b2, c2) = tn.coefficients_at_r(2.0);
        assert!((a2 - 2.0).abs() < 1e-15);
        assert!((b2 - 32.0).abs() < 1e-13);
        assert!((c2 - 8.0).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_parameter_rejected() {
        assert!(matches!(TaubNut::new(0.0), Err(Error::Parameter(_))));
        assert!(matches!(TaubBolt::new(-1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn taub_nut_rescaling_law() {
        let (n, m) = (1.7, 0.6);
        let gn = TaubNut::new(n).unwrap();
        let gm = TaubNut::new(m).unwrap();
        for &r in &[0.3, 1.0, 7.5] {
            let phi = n / m;
            let (a2, b2, c2) = gn.coefficients_at_r(phi * r);
            let (a2m, b2m, c2m) = gm.coefficients_at_r(r);
            let k = n * n / (m * m);
            assert!((a2 * phi * phi - k * a2m).abs() < 1e-12);
            assert!((b2 - k * b2m).abs() < 1e-10);
            assert!((c2 - k * c2m).abs() < 1e-12);
        }
    }

    #[test]
    fn taub_nut_arclength_matches_quadrature() {
        let tn = TaubNut::new(1.3).unwrap();
        let q = gauss_legendre8(&|x| tn.at_rho(x).0, 0.0, 0.7);
        assert!((tn.arclength(0.7) - q).abs() < 1e-12);
        let (b, c) = tn.at_s(tn.arclength(2.0));
        let v = tn.at_rho(2.0);
        assert!((b - v.1).abs() < 1e-10 && (c - v.2).abs() < 1e-10);
    }

    #[test]
    fn taub_bolt_radius_and_slope() {
        let mut tb = TaubBolt::new(1.0).unwrap();
        let (_, b0, _) = tb.at_rho(0.0);
        assert!((b0 - 2.0 * 3f64.sqrt()).abs() < 1e-14);
        let s = tb.arclength(1e-3);
        let (_, _, c) = tb.at_rho(1e-3);
        assert!((c / s - 1.0).abs() < 1e-5);
    }

    #[test]
    fn cone_k12_closed_form() {
        let p = cone_fik(400, 20.0).unwrap();
        let fr = geometry::curvature(&p).unwrap();
        let i = 150;
        let s = p.s[i];
        let expect = 2f64.sqrt() * (4.0 - 2.0 * 2f64.sqrt()) / (s * s);
        assert!((fr[i].k12 - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn conical_series_terminates_at_the_shrinker_constant() {
        // For k = 1/sqrt 2 the branch is exactly (x-4)((sqrt2/2)x + 4 - 2 sqrt2)/x.
        let ode = SolitonOde { k: std::f64::consts::FRAC_1_SQRT_2 };
        for &x in &[4.0, 9.0, 100.0] {
            let r2 = 2f64.sqrt();
            let exact = (x - 4.0) * (r2 / 2.0 * x + 4.0 - 2.0 * r2) / x;
            assert!((ode.conical_c2(x, 12) - exact).abs() < 1e-12 * x);
        }
    }
}
