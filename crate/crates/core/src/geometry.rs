//! Curvature of the warped-product ansatz in the orthonormal frame
//! `e0 = ∂_s, e1 = X1/b, e2 = X2/b, e3 = X3/c`, asymptotic mass and class
//! membership.
//!
//! Sectional curvatures:
//!
//! ```text
//! K01 = K02 = -b_ss/b
//! K03       = -c_ss/c
//! K12       = (4 - 3u^2 - b_s^2)/b^2
//! K13 = K23 = c^2/b^4 - b_s c_s/(b c)
//! ```
//!
//! The only non-sectional components are `R(e0,e1,e2,e3) = -W`,
//! `R(e0,e2,e1,e3) = W`, `R(e0,e3,e1,e2) = 2W` with `W = (b c_s - c b_s)/b^3`.
//! `|Rm|^2` is the full sum over all index quadruples:
//! `8 K01^2 + 4 K03^2 + 4 K12^2 + 8 K13^2 + 48 W^2`.

use crate::error::{Error, Result};
use crate::profile::{Profile, SlopeField, Topology};

/// Frame curvature at one point (units 1/length^2).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CurvatureFrame {
    pub k01: f64,
    pub k02: f64,
    pub k03: f64,
    pub k12: f64,
    pub k13: f64,
    pub k23: f64,
    pub w: f64,
    pub ric00: f64,
    pub ric11: f64,
    pub ric33: f64,
    pub riem_norm: f64,
}

impl CurvatureFrame {
    /// Curvature from the warping functions and their arclength derivatives.
    #[inline]
    pub fn from_slopes(b: f64, c: f64, bs: f64, cs: f64, bss: f64, css: f64) -> Self {
        let u = c / b;
        let b2 = b * b;
        let k01 = -bss / b;
        let k03 = -css / c;
        let k12 = (4.0 - 3.0 * u * u - bs * bs) / b2;
        let k13 = c * c / (b2 * b2) - bs * cs / (b * c);
        let w = (b * cs - c * bs) / (b2 * b);
        let norm2 = 8.0 * k01 * k01
            + 4.0 * k03 * k03
            + 4.0 * k12 * k12
            + 8.0 * k13 * k13
            + 48.0 * w * w;
        Self {
            k01,
            k02: k01,
            k03,
            k12,
            k13,
            k23: k13,
            w,
            ric00: k01 + k01 + k03,
            ric11: k01 + k12 + k13,
            ric33: k03 + k13 + k13,
            riem_norm: norm2.sqrt(),
        }
    }

    /// Largest absolute Ricci component.
    pub fn max_abs_ricci(&self) -> f64 {
        self.ric00.abs().max(self.ric11.abs()).max(self.ric33.abs())
    }
}

/// Curvature at every node of a profile.
pub fn curvature(p: &Profile) -> Result<Vec<CurvatureFrame>> {
    p.validate()?;
    let sl = p.slopes();
    Ok(curvature_from(p, &sl))
}

/// Curvature from precomputed slopes.
pub fn curvature_from(p: &Profile, sl: &SlopeField) -> Vec<CurvatureFrame> {
    crate::par::map_indices(p.len(), |i| {
        CurvatureFrame::from_slopes(p.b[i], p.c[i], sl.bs[i], sl.cs[i], sl.bss[i], sl.css[i])
    })
}

/// Nodes of the last decade of the arclength grid, `s >= s_max/10`.
fn tail_range(p: &Profile) -> std::ops::Range<usize> {
    let s_max = p.s_max();
    let start = p.s.partition_point(|&s| s < 0.1 * s_max);
    start..p.len()
}

/// Ordinary least squares for `y = Σ β_k φ_k(x)`.
fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let m = rows[0].len();
    let a = nalgebra::DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    svd.solve(&rhs, 1e-14).ok().map(|v| v.iter().copied().collect())
}

/// Asymptotic mass `lim 1/c`, by fitting `1/c = m + A/s + B/s^2` over the last
/// grid decade. Returns 0 when `c` grows linearly.
pub fn mass(p: &Profile) -> Result<f64> {
    let range = tail_range(p);
    if range.len() < 4 {
        return Err(Error::Resolution("fewer than 4 nodes in the last grid decade".into()));
    }
    let cs = &p.c[range.clone()];
    let scale = cs.iter().fold(0.0_f64, |m, &c| m.max(c.abs()));
    if cs.windows(2).any(|w| w[1] < w[0] - 1e-12 * scale) {
        return Err(Error::Unclassifiable(
            "c is not monotone over the last grid decade".into(),
        ));
    }
    let n = p.len();
    let c_end = p.c[n - 1];
    let slope = (p.c[n - 1] - p.c[n - 2]) / (p.s[n - 1] - p.s[n - 2]);
    if slope * p.s[n - 1] / c_end > 0.5 {
        return Ok(0.0);
    }
    let rows: Vec<Vec<f64>> = range
        .clone()
        .map(|i| {
            let x = p.s[range.start] / p.s[i];
            vec![1.0, x, x * x]
        })
        .collect();
    let y: Vec<f64> = range.map(|i| 1.0 / p.c[i]).collect();
    let coef = least_squares(&rows, &y)
        .ok_or_else(|| Error::Unclassifiable("tail fit is singular".into()))?;
    Ok(coef[0].max(0.0))
}

/// Least-squares slope of `log|Rm|` against `log s` over the last decade,
/// returned as a positive decay exponent.
pub fn decay_exponent(p: &Profile, frames: &[CurvatureFrame]) -> f64 {
    let range = tail_range(p);
    // The two outermost nodes use one-sided stencils; keep them out of the fit.
    let end = range.end.saturating_sub(2).max(range.start + 2).min(range.end);
    let pts: Vec<(f64, f64)> = (range.start..end)
        .filter(|&i| frames[i].riem_norm > 0.0)
        .map(|i| (p.s[i].ln(), frames[i].riem_norm.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
    let my = pts.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|q| (q.0 - mx) * (q.0 - mx)).sum();
    -sxy / sxx
}

/// Tolerances for [`class_check`].
#[derive(Clone, Copy, Debug)]
pub struct ClassTolerances {
    /// Slack on `u <= 1` and on nonnegative slopes.
    pub tol: f64,
    /// Slack on the axis slope conditions.
    pub axis_tol: f64,
}

impl Default for ClassTolerances {
    fn default() -> Self {
        Self { tol: 1e-6, axis_tol: 1e-2 }
    }
}

/// Verdict per defining condition of the asymptotically flat classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassPasses {
    pub u_bound: bool,
    pub slopes: bool,
    pub decay: bool,
    pub axis: bool,
}

#[derive(Clone, Debug)]
pub struct ClassReport {
    pub topology: Topology,
    pub u_max: f64,
    pub min_bs: f64,
    pub min_cs: f64,
    pub decay_exponent: f64,
    /// Margin `ε = decay_exponent - 2` of the curvature decay condition.
    pub decay_margin: f64,
    pub mass: Option<f64>,
    /// Axis slope limits `(b/s, c/s)` as `s → 0`.
    pub axis_slopes: (f64, f64),
    pub passes: ClassPasses,
}

impl ClassReport {
    /// Membership in the asymptotically flat class of the profile's topology.
    pub fn in_class(&self) -> bool {
        let p = self.passes;
        p.u_bound && p.slopes && p.decay && p.axis
    }
}

/// Pointwise class conditions plus tail fits. Never fails; failures are
/// flagged in the report.
pub fn class_check(p: &Profile) -> ClassReport {
    class_check_with(p, ClassTolerances::default())
}

pub fn class_check_with(p: &Profile, tol: ClassTolerances) -> ClassReport {
    let sl = p.slopes();
    let frames = curvature_from(p, &sl);
    let u_max = p.u().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let min_bs = sl.bs.iter().copied().fold(f64::INFINITY, f64::min);
    let min_cs = sl.cs.iter().copied().fold(f64::INFINITY, f64::min);
    let decay = decay_exponent(p, &frames);
    let axis_slopes = p.axis_slopes();
    let axis = match p.topology {
        Topology::Nut => {
            (axis_slopes.0 - 1.0).abs() < tol.axis_tol && (axis_slopes.1 - 1.0).abs() < tol.axis_tol
        }
        Topology::Bolt => (axis_slopes.1 - 1.0).abs() < tol.axis_tol,
    };
    ClassReport {
        topology: p.topology,
        u_max,
        min_bs,
        min_cs,
        decay_exponent: decay,
        decay_margin: decay - 2.0,
        mass: mass(p).ok(),
        axis_slopes,
        passes: ClassPasses {
            u_bound: u_max <= 1.0 + tol.tol,
            slopes: min_bs >= -tol.tol && min_cs >= -tol.tol,
            decay: decay > 2.0,
            axis,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::cell_centers;

    #[test]
    fn flat_space_has_no_curvature() {
        let r = cell_centers(64, 4.0);
        let p = Profile::new(Topology::Nut, r.clone(), vec![1.0; 64], r.clone(), r).unwrap();
        for f in curvature(&p).unwrap() {
            assert!(f.riem_norm < 1e-10, "{f:?}");
        }
        assert_eq!(mass(&p).unwrap(), 0.0);
    }

    #[test]
    fn frame_symmetries_hold_exactly() {
        let f = CurvatureFrame::from_slopes(1.3, 0.7, 0.4, 0.9, -0.2, 0.3);
        assert_eq!(f.k01, f.k02);
        assert_eq!(f.k13, f.k23);
        assert_eq!(f.ric00, f.k01 + f.k02 + f.k03);
        assert_eq!(f.ric11, f.k01 + f.k12 + f.k13);
        assert_eq!(f.ric33, f.k03 + f.k13 + f.k23);
    }

    #[test]
    fn round_sphere_slice_has_k12_one_over_b2() {
        // Constant b = c: Berger sphere with u = 1 is round of radius 2b.
        let f = CurvatureFrame::from_slopes(2.0, 2.0, 0.0, 0.0, 0.0, 0.0);
        assert!((f.k12 - 0.25).abs() < 1e-15);
        assert!((f.k13 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn violating_u_bound_fails_class() {
        let r = cell_centers(200, 20.0);
        let b: Vec<f64> = r.clone();
        let c: Vec<f64> = r.iter().map(|s| 1.2 * s).collect();
        let p = Profile::new(Topology::Nut, r.clone(), vec![1.0; 200], b, c).unwrap();
        let rep = class_check(&p);
        assert!(rep.u_max > 1.0);
        assert!(!rep.passes.u_bound);
        assert!(!rep.in_class());
    }
}
