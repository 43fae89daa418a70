//! Flat key-value run configuration with strict key checking.

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, MonitorSettings, RegridSettings};
use crate::initial_data::GlueConfig;
use crate::monitors::{BoxParams, BoxVariant, InvariantTolerances};
use crate::spectral::{EigenSettings, SpectralGrid};

/// Every tunable of every subcommand. Unset keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // reference
    /// `nut`, `bolt`, `fik` or `cone`.
    pub family: String,
    pub n: f64,
    pub reference_nodes: usize,
    /// Outer radius in the closed-form coordinate (nut, bolt) or arclength (cone).
    pub rho_max: f64,

    // spectrum
    pub spectral_cells: usize,
    pub spectral_s_max: f64,
    pub eigen_count: usize,
    pub eigen_tol: f64,
    pub eigen_seed: u64,
    pub eigen_nonneg_tol: f64,

    // glue and perturbation
    pub gamma0_big: f64,
    pub gamma0: f64,
    pub t0: f64,
    pub p: Vec<f64>,
    pub p_bar: f64,
    pub g0_nodes: usize,
    pub axis_points: f64,
    pub s_max_factor: f64,

    // flow
    pub kappa: f64,
    /// Start time of `simulate`.
    pub t_start: f64,
    /// End time of `simulate`, absolute.
    pub t_end: f64,
    pub max_steps: u64,
    pub record_every: u64,
    pub frozen: usize,
    pub blowup_factor: f64,
    pub theta: f64,
    pub regrid: bool,
    pub points_per_scale: f64,
    pub regrid_tolerance: f64,
    pub mu: f64,
    pub nu: f64,
    pub inner_radius: f64,
    /// Outer limit of the rescaled comparison with the soliton.
    pub rescale_radius: f64,
    /// Records between checkpoints in `simulate` (0: only at the end).
    pub checkpoint_every: u64,

    // surgery and the stability run
    /// `R̄` as a multiple of the blow-up radius.
    pub r_bar_factor: f64,
    /// Duration of the flow after surgery.
    pub post_surgery_time: f64,
    pub post_surgery_record_every: u64,
    pub nut_threshold: f64,

    // invariant suite
    pub tol_u: f64,
    pub tol_slope: f64,
    pub tol_mass: f64,
    pub tol_c2rm: f64,

    // box
    pub box_mu_u: f64,
    pub box_mu_s: f64,
    pub box_eps0: f64,
    pub box_eps1: f64,
    pub box_eps2: f64,
    /// `initial` or `current`.
    pub box_variant: String,
    /// Last time of a shot.
    pub box_t_end: f64,
    pub shoot_iterations: usize,
    /// Shot range as a multiple of the coefficient cap.
    pub shoot_range: f64,
    pub shoot_nodes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let glue = GlueConfig::default();
        let flow = FlowConfig::default();
        let eig = EigenSettings::default();
        let rg = RegridSettings::default();
        let tol = InvariantTolerances::default();
        Self {
            family: "nut".into(),
            n: 1.0,
            reference_nodes: 1000,
            rho_max: 40.0,
            spectral_cells: eig.grid.cells,
            spectral_s_max: eig.grid.s_max,
            eigen_count: 8,
            eigen_tol: eig.tol,
            eigen_seed: eig.seed,
            eigen_nonneg_tol: eig.nonneg_tol,
            gamma0_big: glue.gamma0_big,
            gamma0: glue.gamma0,
            t0: glue.t0,
            p: vec![0.03],
            p_bar: glue.p_bar,
            g0_nodes: glue.nodes,
            axis_points: glue.axis_points,
            s_max_factor: glue.s_max_factor,
            kappa: flow.kappa,
            t_start: 0.0,
            t_end: 2.0,
            max_steps: flow.max_steps,
            record_every: 50,
            frozen: flow.frozen,
            blowup_factor: 1e4,
            theta: flow.theta,
            regrid: true,
            points_per_scale: rg.points_per_scale,
            regrid_tolerance: rg.tolerance,
            mu: 1.0,
            nu: 1.0,
            inner_radius: 30.0,
            rescale_radius: 10.0,
            checkpoint_every: 0,
            r_bar_factor: 1.5,
            post_surgery_time: 3000.0,
            post_surgery_record_every: 500,
            nut_threshold: 1e-2,
            tol_u: tol.u,
            tol_slope: tol.slope,
            tol_mass: tol.mass_drift,
            tol_c2rm: tol.c2rm_growth,
            box_mu_u: 0.5,
            box_mu_s: 0.5,
            box_eps0: 0.5,
            box_eps1: 0.5,
            box_eps2: 0.5,
            box_variant: "initial".into(),
            box_t_end: 0.99999,
            shoot_iterations: 6,
            shoot_range: 1.0,
            shoot_nodes: 800,
        }
    }
}

impl RunConfig {
    /// All valid keys, sorted.
    pub fn keys() -> Vec<String> {
        match Value::try_from(RunConfig::default()) {
            Ok(Value::Table(t)) => t.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// Parses a configuration file's text, then applies `key=value`
    /// overrides.
    pub fn load(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut table: Table = match text {
            Some(t) => t.parse().map_err(|e| Error::Config(format!("{e}")))?,
            None => Table::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            table.insert(k.trim().to_string(), parse_value(v.trim()));
        }
        let known = Self::keys();
        if let Some(bad) = table.keys().find(|k| !known.contains(k)) {
            return Err(Error::Config(format!(
                "unknown key `{bad}`; valid keys: {}",
                known.join(", ")
            )));
        }
        let cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.flow().validate()?;
        self.glue().validate()?;
        self.box_params(-1.0)?.validate()?;
        if !["nut", "bolt", "fik", "cone"].contains(&self.family.as_str()) {
            return Err(Error::Config(format!("unknown family `{}`", self.family)));
        }
        Ok(())
    }

    pub fn spectral_grid(&self) -> SpectralGrid {
        SpectralGrid { cells: self.spectral_cells, s_max: self.spectral_s_max }
    }

    pub fn eigen(&self) -> EigenSettings {
        EigenSettings {
            grid: self.spectral_grid(),
            tol: self.eigen_tol,
            seed: self.eigen_seed,
            nonneg_tol: self.eigen_nonneg_tol,
            ..EigenSettings::default()
        }
    }

    pub fn glue(&self) -> GlueConfig {
        GlueConfig {
            p: self.p.clone(),
            p_bar: self.p_bar,
            nodes: self.g0_nodes,
            axis_points: self.axis_points,
            s_max_factor: self.s_max_factor,
            ..GlueConfig::from_scales(self.gamma0_big, self.gamma0, self.t0)
        }
    }

    pub fn flow(&self) -> FlowConfig {
        FlowConfig {
            kappa: self.kappa,
            t_end: self.t_end,
            stop_at_blowup: true,
            max_steps: self.max_steps,
            record_every: self.record_every,
            frozen: self.frozen,
            blowup_factor: self.blowup_factor,
            theta: self.theta,
            regrid: self.regrid.then(|| RegridSettings {
                points_per_scale: self.points_per_scale,
                tolerance: self.regrid_tolerance,
            }),
            monitors: MonitorSettings {
                mu: self.mu,
                nu: self.nu,
                inner_radius: self.inner_radius,
                ..MonitorSettings::default()
            },
            ..FlowConfig::default()
        }
    }

    pub fn tolerances(&self) -> InvariantTolerances {
        InvariantTolerances { u: self.tol_u, slope: self.tol_slope, mass_drift: self.tol_mass, c2rm_growth: self.tol_c2rm }
    }

    pub fn box_params(&self, lambda_star: f64) -> Result<BoxParams> {
        Ok(BoxParams {
            lambda_star,
            mu_u: self.box_mu_u,
            mu_s: self.box_mu_s,
            eps0: self.box_eps0,
            eps1: self.box_eps1,
            eps2: self.box_eps2,
            t0: self.t0,
            variant: BoxVariant::parse(&self.box_variant)?,
        })
    }
}

/// A TOML value, or the raw text as a string when it does not parse.
fn parse_value(v: &str) -> Value {
    format!("x = {v}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| Value::String(v.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::load(Some(&text), &[]).unwrap(), c);
    }

    #[test]
    fn unknown_key_lists_schema() {
        let err = RunConfig::load(Some("kapa = 0.1"), &[]).unwrap_err().to_string();
        assert!(err.contains("kapa") && err.contains("kappa") && err.contains("t0"), "{err}");
    }

    #[test]
    fn overrides_parse_types() {
        let c = RunConfig::load(None, &["family=bolt".into(), "p=[0.01, 0.0]".into(), "kappa=0.1".into()]).unwrap();
        assert_eq!(c.family, "bolt");
        assert_eq!(c.p, vec![0.01, 0.0]);
        assert_eq!(c.kappa, 0.1);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::load(None, &["kappa=0.9".into()]).is_err());
        assert!(RunConfig::load(None, &["box_variant=other".into()]).is_err());
        assert!(RunConfig::load(None, &["t0=1.5".into()]).is_err());
    }
}
