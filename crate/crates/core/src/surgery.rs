//! Excision of the blow-up region around the bolt and capping with a smooth
//! nut: `(b, c) = s (q_b, q_c)(s/R̄)` with even polynomials `q`, so the cap is
//! odd with unit slopes at the new origin and matches the input to second
//! order at `R̄`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::BlowupReport;
use crate::geometry::{self, CurvatureFrame};
use crate::profile::{Profile, Topology};

/// Even powers `x^2, …, x^{2m}` in the cap shape functions.
const SHAPE_TERMS: usize = 6;
/// Samples per cap used to verify monotonicity and `c <= b`.
const CAP_SAMPLES: usize = 4000;
/// Quadrature points for the bending energy.
const ENERGY_POINTS: usize = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct SurgeryReport {
    pub r_bar: f64,
    pub blowup_r: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    /// Number of `s`-derivatives matched at the seam.
    pub smoothness_order: usize,
    /// `| |Rm|(R̄-) - |Rm|(R̄+) |`.
    pub seam_curvature_jump: f64,
    pub class_pass: bool,
}

/// Shape function `q(x) = 1 + Σ β_k x^{2k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CapShape {
    pub coefficients: Vec<f64>,
}

impl CapShape {
    /// `(q, q', q'')` at `x`.
    fn derivs(&self, x: f64) -> [f64; 3] {
        let mut out = [1.0, 0.0, 0.0];
        for (k, beta) in self.coefficients.iter().enumerate() {
            let p = 2 * (k + 1) as i32;
            let pf = p as f64;
            out[0] += beta * x.powi(p);
            out[1] += beta * pf * x.powi(p - 1);
            out[2] += beta * pf * (pf - 1.0) * x.powi(p - 2);
        }
        out
    }

    /// `(f, f_s, f_ss)` of `f(s) = s q(s/R̄)`.
    pub fn eval(&self, s: f64, r_bar: f64) -> [f64; 3] {
        let x = s / r_bar;
        let [q, q1, q2] = self.derivs(x);
        [s * q, q + x * q1, (2.0 * q1 + x * q2) / r_bar]
    }

    /// Minimizes `∫_0^1 f_xx^2 dx` subject to matching `(f, f_s, f_ss)` at
    /// `s = R̄`.
    pub fn fit(seam: [f64; 3], r_bar: f64) -> Result<Self> {
        let m = SHAPE_TERMS;
        // In x = s/R̄ with F(x) = f/R̄ = x q(x): F(1) = q(1), F_x(1) = q + q',
        // F_xx(1) = 2q' + q''.
        let target = [seam[0] / r_bar, seam[1], seam[2] * r_bar];
        let basis = |k: usize, x: f64| -> [f64; 3] {
            let p = 2.0 * (k + 1) as f64;
            // F_k = x^{p+1}.
            [x.powf(p + 1.0), (p + 1.0) * x.powf(p), (p + 1.0) * p * x.powf(p - 1.0)]
        };
        let base = [1.0, 1.0, 0.0];
        let mut h = DMatrix::<f64>::zeros(m, m);
        for j in 0..ENERGY_POINTS {
            let x = (j as f64 + 0.5) / ENERGY_POINTS as f64;
            let w = 1.0 / ENERGY_POINTS as f64;
            for a in 0..m {
                for b in 0..m {
                    h[(a, b)] += w * basis(a, x)[2] * basis(b, x)[2];
                }
            }
        }
        let mut kkt = DMatrix::<f64>::zeros(m + 3, m + 3);
        let mut rhs = DVector::<f64>::zeros(m + 3);
        kkt.view_mut((0, 0), (m, m)).copy_from(&(2.0 * &h));
        for d in 0..3 {
            for k in 0..m {
                let v = basis(k, 1.0)[d];
                kkt[(m + d, k)] = v;
                kkt[(k, m + d)] = v;
            }
            rhs[m + d] = target[d] - base[d];
        }
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Cap("singular cap fitting system".into()))?;
        Ok(Self { coefficients: sol.iter().take(m).copied().collect() })
    }
}

/// Replaces the profile on `s < R̄` by a nut cap. The grid and the profile on
/// `s >= R̄` are kept.
pub fn excise_and_cap(p: &Profile, r_bar: f64, blowup_r: f64) -> Result<(Profile, SurgeryReport)> {
    if p.topology != Topology::Bolt {
        return Err(Error::Precondition("surgery needs a bolt".into()));
    }
    if !(r_bar > blowup_r) {
        return Err(Error::Precondition(format!(
            "R̄ = {r_bar} does not exceed the blow-up radius {blowup_r}"
        )));
    }
    let seam = p.s.partition_point(|&s| s < r_bar);
    if seam < 3 || seam + 6 > p.len() {
        return Err(Error::Precondition(format!("R̄ = {r_bar} too close to the grid ends")));
    }
    let sl = p.slopes();
    for i in seam..p.len() {
        let bad = sl.bs[i] < 0.0 || sl.cs[i] < 0.0 || p.c[i] > p.b[i];
        if bad {
            return Err(Error::Precondition(format!(
                "tail beyond R̄ violates monotonicity or c <= b at s = {}",
                p.s[i]
            )));
        }
    }
    let (b_seam, c_seam) = p.sample(r_bar);
    let qb = CapShape::fit(b_seam, r_bar)?;
    let qc = CapShape::fit(c_seam, r_bar)?;
    verify_cap(&qb, &qc, r_bar)?;

    let mut out = p.clone();
    out.topology = Topology::Nut;
    for i in 0..seam {
        out.b[i] = qb.eval(p.s[i], r_bar)[0];
        out.c[i] = qc.eval(p.s[i], r_bar)[0];
    }
    out.validate()?;

    let rm = |b: [f64; 3], c: [f64; 3]| CurvatureFrame::from_slopes(b[0], c[0], b[1], c[1], b[2], c[2]).riem_norm;
    let jump = (rm(qb.eval(r_bar, r_bar), qc.eval(r_bar, r_bar)) - rm(b_seam, c_seam)).abs();
    let mass_before = geometry::mass(p)?;
    let mass_after = geometry::mass(&out)?;
    let class = geometry::class_check(&out);
    Ok((
        out,
        SurgeryReport {
            r_bar,
            blowup_r,
            mass_before,
            mass_after,
            smoothness_order: 2,
            seam_curvature_jump: jump,
            class_pass: class.in_class(),
        },
    ))
}

fn verify_cap(qb: &CapShape, qc: &CapShape, r_bar: f64) -> Result<()> {
    for j in 1..=CAP_SAMPLES {
        let s = r_bar * j as f64 / CAP_SAMPLES as f64;
        let b = qb.eval(s, r_bar);
        let c = qc.eval(s, r_bar);
        if !(b[1] >= 0.0 && c[1] >= 0.0) {
            return Err(Error::Cap(format!(
                "cap slope negative at s = {s} (b_s = {}, c_s = {}); try a larger R̄",
                b[1], c[1]
            )));
        }
        if !(c[0] <= b[0] * (1.0 + 1e-12)) && s > 1e-9 {
            return Err(Error::Cap(format!("cap has c > b at s = {s}; try a larger R̄")));
        }
        if !(b[0] > 0.0 && c[0] > 0.0) {
            return Err(Error::Cap(format!("cap warping vanishes at s = {s}; try a larger R̄")));
        }
    }
    Ok(())
}

/// Verdict of [`surgery_admissible`].
#[derive(Clone, Debug, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    pub reason: String,
}

/// Surgery at `R̄` is admissible when a singularity was detected, `R̄`
/// exceeds the blow-up interval, the excised region reached the curvature
/// threshold and the retained region did not.
pub fn surgery_admissible(
    report: Option<&BlowupReport>,
    p: &Profile,
    threshold: f64,
    r_bar: f64,
) -> Result<Admissibility> {
    let verdict = |ok: bool, reason: &str| Ok(Admissibility { admissible: ok, reason: reason.into() });
    let Some(report) = report else {
        return verdict(false, "no singularity detected");
    };
    if !(r_bar > report.blowup_interval.1) {
        return verdict(false, "R̄ inside the blow-up interval");
    }
    let frames = geometry::curvature(p)?;
    let (mut inside, mut outside) = (0.0_f64, 0.0_f64);
    for (i, f) in frames.iter().enumerate() {
        if p.s[i] < r_bar {
            inside = inside.max(f.riem_norm);
        } else {
            outside = outside.max(f.riem_norm);
        }
    }
    if !(inside >= threshold) {
        return verdict(false, "excised region stayed below the curvature threshold");
    }
    if outside >= threshold {
        return verdict(false, "retained region reached the curvature threshold");
    }
    verdict(true, "ok")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::TaubNut;

    #[test]
    fn cap_matches_seam_to_second_order() {
        let seam = [3.0, 0.8, -0.05];
        let q = CapShape::fit(seam, 4.0).unwrap();
        let v = q.eval(4.0, 4.0);
        for k in 0..3 {
            assert!((v[k] - seam[k]).abs() < 1e-10, "{v:?}");
        }
        let at0 = q.eval(1e-8, 4.0);
        assert!((at0[1] - 1.0).abs() < 1e-12);
        assert!(at0[2].abs() < 1e-6);
    }

    #[test]
    fn cap_is_odd() {
        let q = CapShape::fit([2.0, 0.7, 0.01], 3.0).unwrap();
        let s = 0.37;
        assert!((q.eval(-s, 3.0)[0] + q.eval(s, 3.0)[0]).abs() < 1e-14);
        assert!((q.eval(-s, 3.0)[2] + q.eval(s, 3.0)[2]).abs() < 1e-12);
    }

    #[test]
    fn capping_a_taub_nut_tail_keeps_it_in_class() {
        let tn = TaubNut::new(1.0).unwrap();
        let nut = tn.profile(800, 60.0).unwrap();
        let mut bolt = nut.clone();
        bolt.topology = Topology::Bolt;
        let (out, rep) = excise_and_cap(&bolt, 3.0, 1.0).unwrap();
        assert!(rep.class_pass);
        assert_eq!(rep.mass_before, rep.mass_after);
        assert!((rep.mass_after - 0.25).abs() < 1e-3);
        assert!(rep.seam_curvature_jump < 1e-4, "{}", rep.seam_curvature_jump);
        for i in 0..out.len() {
            if out.s[i] >= 3.0 {
                assert_eq!(out.b[i], nut.b[i]);
                assert_eq!(out.c[i], nut.c[i]);
            }
        }
    }

    #[test]
    fn r_bar_inside_blowup_is_rejected() {
        let tn = TaubNut::new(1.0).unwrap();
        let mut p = tn.profile(200, 20.0).unwrap();
        p.topology = Topology::Bolt;
        assert!(matches!(excise_and_cap(&p, 1.0, 2.0), Err(Error::Precondition(_))));
        let rep = BlowupReport {
            t_hat: 1.0,
            type_one_sup: 1.0,
            blowup_interval: (0.0, 2.0),
            rescaled_u_distance: None,
            t_final: 1.0,
            growth: 1.0,
        };
        let a = surgery_admissible(Some(&rep), &p, 1.0, 1.5).unwrap();
        assert!(!a.admissible);
        assert!(!surgery_admissible(None, &p, 1.0, 3.0).unwrap().admissible);
    }

    proptest::proptest! {
        #[test]
        fn cap_matches_any_seam(f in 0.5..20.0_f64, fs in 0.0..1.5_f64, fss in -0.5..0.5_f64, r in 1.0..15.0_f64) {
            let q = CapShape::fit([f, fs, fss], r).unwrap();
            let v = q.eval(r, r);
            let want = [f, fs, fss];
            for k in 0..3 {
                proptest::prop_assert!((v[k] - want[k]).abs() < 1e-8 * (1.0 + want[k].abs()), "{:?} {:?}", v, want);
            }
            let at0 = q.eval(1e-9 * r, r);
            proptest::prop_assert!((at0[1] - 1.0).abs() < 1e-9);
        }
    }
}
