//! The cohomogeneity-one metric `g = a^2 dr^2 + b^2 (σ1^2 + σ2^2) + c^2 σ3^2`.

use crate::error::{Error, Result};
use crate::stencil::{self, Parity, ParityInterp};

/// How the orbits close up at `s = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Closing to R^4: `b`, `c` odd with slopes 1.
    Nut,
    /// Closing to O(-1): `b` even with `b(0) = β > 0`, `c` odd with `c_s(0) = 1`.
    Bolt,
}

impl Topology {
    pub fn b_parity(self) -> Parity {
        match self {
            Topology::Nut => Parity::Odd,
            Topology::Bolt => Parity::Even,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Topology::Nut => "nut",
            Topology::Bolt => "bolt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nut" => Ok(Topology::Nut),
            "bolt" => Ok(Topology::Bolt),
            other => Err(Error::Format(format!("unknown topology `{other}`"))),
        }
    }
}

/// A warped-product profile on a cell-centered uniform grid in the fixed
/// coordinate `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub topology: Topology,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Arclength derivatives of the warping functions at every node.
#[derive(Clone, Debug, Default)]
pub struct SlopeField {
    pub bs: Vec<f64>,
    pub cs: Vec<f64>,
    pub bss: Vec<f64>,
    pub css: Vec<f64>,
}

/// Spacing of a cell-centered uniform grid, or an error.
pub fn cell_spacing(r: &[f64]) -> Result<f64> {
    if r.len() < stencil::MIN_NODES {
        return Err(Error::Resolution(format!(
            "{} nodes; at least {} needed",
            r.len(),
            stencil::MIN_NODES
        )));
    }
    let dr = r[r.len() - 1] / (r.len() as f64 - 0.5);
    if !(dr > 0.0) {
        return Err(Error::InvalidProfile("grid not increasing".into()));
    }
    for (i, &x) in r.iter().enumerate() {
        let expect = (i as f64 + 0.5) * dr;
        if (x - expect).abs() > 1e-9 * expect {
            return Err(Error::InvalidProfile(format!(
                "grid must be uniform and cell-centered; node {i} is {x}, expected {expect}"
            )));
        }
    }
    Ok(dr)
}

/// Cell centers `(i + 1/2) h` on `[0, n h]`.
pub fn cell_centers(n: usize, length: f64) -> Vec<f64> {
    let h = length / n as f64;
    (0..n).map(|i| (i as f64 + 0.5) * h).collect()
}

impl Profile {
    /// Builds a profile and derives `s` by integrating the lapse.
    pub fn new(topology: Topology, r: Vec<f64>, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let dr = cell_spacing(&r)?;
        check_lengths(&r, &a, &b, &c)?;
        let s = stencil::cumulative_even(&a, dr);
        let p = Self { topology, r, s, a, b, c };
        p.validate()?;
        Ok(p)
    }

    /// Builds a profile whose arclength is known in closed form.
    pub fn with_arclength(
        topology: Topology,
        r: Vec<f64>,
        s: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self> {
        cell_spacing(&r)?;
        check_lengths(&r, &a, &b, &c)?;
        if s.len() != r.len() {
            return Err(Error::InvalidProfile("s length mismatch".into()));
        }
        let p = Self { topology, r, s, a, b, c };
        p.validate()?;
        Ok(p)
    }

    /// Checks positivity, finiteness and monotone arclength.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.len() {
            let (a, b, c) = (self.a[i], self.b[i], self.c[i]);
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                return Err(Error::InvalidProfile(format!("non-finite value at node {i}")));
            }
            if a <= 0.0 {
                return Err(Error::InvalidProfile(format!("lapse a = {a} at node {i}")));
            }
            if b <= 0.0 || c <= 0.0 {
                return Err(Error::InvalidProfile(format!(
                    "non-positive warping (b = {b}, c = {c}) at node {i}"
                )));
            }
        }
        if self.s[0] <= 0.0 || self.s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile("arclength not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn dr(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap()
    }

    /// Smallest physical spacing `a Δr` on the grid.
    pub fn min_spacing(&self) -> f64 {
        let dr = self.dr();
        self.a.iter().fold(f64::INFINITY, |m, &a| m.min(a * dr))
    }

    pub fn u(&self) -> Vec<f64> {
        self.b.iter().zip(&self.c).map(|(b, c)| c / b).collect()
    }

    /// Recomputes `s` from the lapse after `a` changed.
    pub fn refresh_arclength(&mut self) {
        self.s = stencil::cumulative_even(&self.a, self.dr());
    }

    /// `s`-derivatives `(1/a) ∂_r` of `b` and `c` with parity-consistent
    /// fourth-order stencils.
    pub fn slopes(&self) -> SlopeField {
        let dr = self.dr();
        let bp = self.topology.b_parity();
        let n = self.len();
        let per_node = crate::par::map_indices(n, |i| {
            let a = self.a[i];
            let ar = stencil::d1_at(&self.a, dr, Parity::Even, i);
            let br = stencil::d1_at(&self.b, dr, bp, i);
            let brr = stencil::d2_at(&self.b, dr, bp, i);
            let cr = stencil::d1_at(&self.c, dr, Parity::Odd, i);
            let crr = stencil::d2_at(&self.c, dr, Parity::Odd, i);
            let a2 = a * a;
            (
                br / a,
                cr / a,
                brr / a2 - ar * br / (a2 * a),
                crr / a2 - ar * cr / (a2 * a),
            )
        });
        let mut out = SlopeField::default();
        for (bs, cs, bss, css) in per_node {
            out.bs.push(bs);
            out.cs.push(cs);
            out.bss.push(bss);
            out.css.push(css);
        }
        out
    }

    /// Homothety `g ↦ α^2 g`: the fixed coordinate is kept and `a, b, c, s`
    /// scale by `α`.
    pub fn scaled(&self, alpha: f64) -> Profile {
        let m = |v: &Vec<f64>| v.iter().map(|x| x * alpha).collect::<Vec<_>>();
        Profile {
            topology: self.topology,
            r: self.r.clone(),
            s: m(&self.s),
            a: m(&self.a),
            b: m(&self.b),
            c: m(&self.c),
        }
    }

    /// Bolt radius `b(0)` extrapolated from the first nodes (Bolt only).
    pub fn bolt_size(&self) -> Option<f64> {
        match self.topology {
            Topology::Bolt => Some(stencil::even_axis_value(&self.b)),
            Topology::Nut => None,
        }
    }

    /// Limits of `b/s` and `c/s` at the axis (slopes there). For a bolt only
    /// the `c` entry is meaningful.
    pub fn axis_slopes(&self) -> (f64, f64) {
        let qb: Vec<f64> = (0..3).map(|i| self.b[i] / self.s[i]).collect();
        let qc: Vec<f64> = (0..3).map(|i| self.c[i] / self.s[i]).collect();
        (stencil::even_axis_value(&qb), stencil::even_axis_value(&qc))
    }

    /// Interpolates `b` and `c` (with their first two `s`-derivatives) at an
    /// arbitrary arclength inside the grid.
    pub fn sample(&self, s: f64) -> ([f64; 3], [f64; 3]) {
        let bi = ParityInterp::new(&self.s, &self.b, self.topology.b_parity(), 6);
        let ci = ParityInterp::new(&self.s, &self.c, Parity::Odd, 6);
        (bi.eval_derivs(s), ci.eval_derivs(s))
    }

    /// Resamples onto a new grid mapping; `b`, `c` are interpolated in `s`
    /// with parity-respecting piecewise polynomials.
    pub fn remap(&self, grid: &GridMap) -> Result<Profile> {
        let (r, s, a) = grid.nodes();
        if *s.last().unwrap() > self.s_max() * (1.0 + 1e-12) {
            return Err(Error::Parameter(format!(
                "target grid reaches s = {} beyond the profile end {}",
                s.last().unwrap(),
                self.s_max()
            )));
        }
        let bi = ParityInterp::new(&self.s, &self.b, self.topology.b_parity(), 6);
        let ci = ParityInterp::new(&self.s, &self.c, Parity::Odd, 6);
        let b = crate::par::map_indices(s.len(), |i| bi.eval(s[i]));
        let c = crate::par::map_indices(s.len(), |i| ci.eval(s[i]));
        Profile::with_arclength(self.topology, r, s, a, b, c)
    }

    /// Equivalent profile with `a ≡ 1` on a uniform arclength grid of `n`
    /// cells (default: same node count).
    pub fn resample_arclength(&self, n: Option<usize>) -> Result<Profile> {
        let dr = self.dr();
        if self.a.iter().any(|&a| !(a > 1e-300) || !(a * dr).is_finite()) {
            return Err(Error::Degenerate("lapse vanishes or diverges".into()));
        }
        let n = n.unwrap_or(self.len());
        // The last target node coincides with the last source node.
        let h = self.s_max() / (n as f64 - 0.5);
        self.remap(&GridMap::Uniform { n, length: h * n as f64 })
    }
}

fn check_lengths(r: &[f64], a: &[f64], b: &[f64], c: &[f64]) -> Result<()> {
    let n = r.len();
    if a.len() != n || b.len() != n || c.len() != n {
        return Err(Error::InvalidProfile("column lengths differ".into()));
    }
    Ok(())
}

/// Map from a uniform computational coordinate to arclength.
#[derive(Clone, Debug, PartialEq)]
pub enum GridMap {
    /// `s = r` on `n` cells of `[0, length]`.
    Uniform { n: usize, length: f64 },
    /// `s = L sinh(κ ξ)/sinh κ`, `ξ ∈ [0, 1]` on `n` cells; spacing `h0` at
    /// the axis and roughly geometric growth further out.
    Sinh { n: usize, length: f64, h0: f64 },
}

impl GridMap {
    pub fn n(&self) -> usize {
        match *self {
            GridMap::Uniform { n, .. } | GridMap::Sinh { n, .. } => n,
        }
    }

    /// Stretching rate κ solving `sinh(κ)/κ = L/(n h0)`; zero means uniform.
    pub fn kappa(n: usize, length: f64, h0: f64) -> f64 {
        let target = length / (n as f64 * h0);
        if target <= 1.0 + 1e-12 {
            return 0.0;
        }
        let g = |k: f64| k.sinh() / k - target;
        let (mut lo, mut hi) = (1e-8, 1.0);
        while g(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Returns `(r, s, a)` at the cell centers.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        match *self {
            GridMap::Uniform { n, length } => {
                let r = cell_centers(n, length);
                (r.clone(), r, vec![1.0; n])
            }
            GridMap::Sinh { n, length, h0 } => {
                let k = Self::kappa(n, length, h0);
                let xi = cell_centers(n, 1.0);
                if k == 0.0 {
                    let s = xi.iter().map(|x| x * length).collect();
                    return (xi, s, vec![length; n]);
                }
                let sk = k.sinh();
                let s = xi.iter().map(|x| length * (k * x).sinh() / sk).collect();
                let a = xi.iter().map(|x| length * k * (k * x).cosh() / sk).collect();
                (xi, s, a)
            }
        }
    }

    /// Inverse map: computational coordinate of arclength `s`.
    pub fn xi_of(&self, s: f64) -> f64 {
        match *self {
            GridMap::Uniform { .. } => s,
            GridMap::Sinh { n, length, h0 } => {
                let k = Self::kappa(n, length, h0);
                if k == 0.0 {
                    s / length
                } else {
                    (s * k.sinh() / length).asinh() / k
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize, len: f64) -> Profile {
        let r = cell_centers(n, len);
        Profile::new(Topology::Nut, r.clone(), vec![1.0; n], r.clone(), r).unwrap()
    }

    #[test]
    fn arclength_of_unit_lapse_is_r() {
        let p = flat(20, 2.0);
        for (s, r) in p.s.iter().zip(&p.r) {
            assert!((s - r).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_nonpositive_warping() {
        let r = cell_centers(10, 1.0);
        let mut b = r.clone();
        b[3] = -1.0;
        assert!(Profile::new(Topology::Nut, r.clone(), vec![1.0; 10], b, r).is_err());
    }

    #[test]
    fn rejects_non_cell_centered_grid() {
        let r: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let err = Profile::new(Topology::Nut, r.clone(), vec![1.0; 10], r.clone(), r);
        assert!(matches!(err, Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn resample_identity_for_unit_lapse() {
        let p = flat(32, 3.0);
        let q = p.resample_arclength(None).unwrap();
        for i in 0..p.len() {
            assert!((q.b[i] - p.b[i]).abs() < 1e-12);
            assert!((q.s[i] - p.s[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sinh_map_hits_requested_axis_spacing() {
        let g = GridMap::Sinh { n: 400, length: 100.0, h0: 0.01 };
        let (r, s, a) = g.nodes();
        let h = r[1] - r[0];
        assert!((a[0] * h / 0.01 - 1.0).abs() < 1e-3);
        assert!((s.last().unwrap() - 100.0 * (1.0 - 0.5 * h * 0.0)).abs() < 2.0);
        assert!((g.xi_of(s[57]) - r[57]).abs() < 1e-12);
    }

    #[test]
    fn scaling_multiplies_lengths() {
        let p = flat(16, 1.0);
        let q = p.scaled(3.0);
        assert!((q.s[5] - 3.0 * p.s[5]).abs() < 1e-14);
        assert!((q.b[5] - 3.0 * p.b[5]).abs() < 1e-14);
    }
}
