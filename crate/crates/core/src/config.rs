//! Run configuration: a single JSON document, validated in full before any computation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::PdeStepControl;
use crate::geometry::FlowParams;
use crate::profile::{dumbbell, equator, geodesic_sphere, perturbed_equator, tube, DumbbellShape, ProfileCurve, ProfileError, Topology};
use crate::surgery::SurgeryParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Violations(Vec<String>),
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

/// Lengths are in the same units as the orbit radius 1/sqrt(K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Scenario {
    ProductSphere { k: usize, u0: f64 },
    GeodesicSphere { d0: f64, nodes: usize },
    Equator { nodes: usize },
    PerturbedEquator { amplitude: f64, mode: u32, nodes: usize },
    Tube { u: f64, nodes: usize },
    Dumbbell { half_length: f64, neck_radius: f64, bulb_radius: f64, nodes: usize },
    /// Whitespace or comma separated table with columns xi x y z.
    RotsymProfile { path: String, topology: Topology },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Monitors {
    /// Steps between monitor samples.
    pub sample_stride: u64,
    pub chords: bool,
    pub comparability: bool,
}

impl Default for Monitors {
    fn default() -> Self {
        Self { sample_stride: 20, chords: true, comparability: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(flatten)]
    pub flow: FlowParams,
    #[serde(default)]
    pub step: PdeStepControl,
    /// Defaults from `SurgeryParams::defaults`.
    #[serde(default)]
    pub surgery: Option<SurgeryParams>,
    #[serde(default)]
    pub monitors: Monitors,
    /// Defaults to 10/K.
    #[serde(default)]
    pub t_max: Option<f64>,
    /// Step budget across the run.
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Step of the product-sphere ODE in units of 1/K.
    #[serde(default = "default_ode_dt")]
    pub ode_dt_k: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_steps() -> u64 {
    5_000_000
}

fn default_ode_dt() -> f64 {
    1e-4
}

impl RunConfig {
    pub fn surgery_params(&self) -> SurgeryParams {
        self.surgery.unwrap_or_else(|| SurgeryParams::defaults(self.flow.n, self.flow.k))
    }

    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or(10.0 / self.flow.k)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.flow.violations();
        let n = self.flow.n;
        if self.flow.k > 0.0 && n >= 3 {
            v.extend(self.surgery_params().violations(n, self.flow.k));
        }
        if !(self.step.dt_factor > 0.0 && self.step.dt_factor <= self.step.c_cfl) {
            v.push(format!("dt_factor = {} must lie in (0, c_cfl = {}]", self.step.dt_factor, self.step.c_cfl));
        }
        if self.monitors.sample_stride == 0 {
            v.push("monitors.sample_stride must be positive".into());
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                v.push(format!("t_max = {t} must be positive"));
            }
        }
        let nodes_ok = |c: usize, v: &mut Vec<String>| {
            if c < 8 {
                v.push(format!("nodes = {c} must be at least 8"));
            }
        };
        match &self.scenario {
            Scenario::ProductSphere { k, u0 } => {
                if *k == 0 || *k >= n {
                    v.push(format!("product sphere needs 1 <= k < n (got k = {k})"));
                }
                if !(*u0 > 0.0 && *u0 < std::f64::consts::FRAC_PI_2) {
                    v.push(format!("u0 = {u0} must lie in (0, pi/2)"));
                }
                if !(self.ode_dt_k > 0.0 && self.ode_dt_k <= 1e-3) {
                    v.push(format!("ode_dt_k = {} must lie in (0, 1e-3]", self.ode_dt_k));
                }
            }
            Scenario::GeodesicSphere { nodes, .. } | Scenario::Equator { nodes } | Scenario::PerturbedEquator { nodes, .. } | Scenario::Tube { nodes, .. } | Scenario::Dumbbell { nodes, .. } => {
                nodes_ok(*nodes, &mut v)
            }
            Scenario::RotsymProfile { .. } => {}
        }
        if v.is_empty() {
            if let Err(e) = self.flow.validate() {
                v.push(e.to_string());
            }
            if !matches!(self.scenario, Scenario::ProductSphere { .. } | Scenario::RotsymProfile { .. }) {
                if let Err(e) = self.initial_profile() {
                    v.push(format!("scenario: {e}"));
                }
            }
        }
        v
    }

    /// Initial profile of a rotationally symmetric scenario.
    pub fn initial_profile(&self) -> Result<ProfileCurve, ProfileError> {
        let rho = self.flow.rho();
        match &self.scenario {
            Scenario::ProductSphere { .. } => Err(ProfileError::Generator("product spheres have no profile".into())),
            Scenario::GeodesicSphere { d0, nodes } => geodesic_sphere(*d0, *nodes, rho),
            Scenario::Equator { nodes } => equator(*nodes, rho),
            Scenario::PerturbedEquator { amplitude, mode, nodes } => perturbed_equator(*amplitude, *mode, *nodes, rho),
            Scenario::Tube { u, nodes } => tube(*u, *nodes, rho),
            Scenario::Dumbbell { half_length, neck_radius, bulb_radius, nodes } => dumbbell(
                DumbbellShape { half_length: *half_length, neck_radius: *neck_radius, bulb_radius: *bulb_radius },
                *nodes,
                rho,
            ),
            Scenario::RotsymProfile { path, topology } => {
                let text = std::fs::read_to_string(path).map_err(|e| ProfileError::Generator(format!("{path}: {e}")))?;
                ProfileCurve::from_table(&text, *topology, rho)
            }
        }
    }

    /// Parabolic rescaling K -> c K: lengths scale by 1/sqrt(c), times by 1/c.
    pub fn rescaled(&self, c: f64) -> Self {
        let l = 1.0 / c.sqrt();
        let mut out = self.clone();
        out.flow.k *= c;
        out.scenario = match &self.scenario {
            Scenario::GeodesicSphere { d0, nodes } => Scenario::GeodesicSphere { d0: d0 * l, nodes: *nodes },
            Scenario::Tube { u, nodes } => Scenario::Tube { u: *u, nodes: *nodes },
            Scenario::Dumbbell { half_length, neck_radius, bulb_radius, nodes } => Scenario::Dumbbell {
                half_length: half_length * l,
                neck_radius: neck_radius * l,
                bulb_radius: bulb_radius * l,
                nodes: *nodes,
            },
            other => other.clone(),
        };
        if let Some(s) = &mut out.surgery {
            s.r_surg *= l;
        }
        out.t_max = self.t_max.map(|t| t / c);
        out
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse { line: e.line(), column: e.column(), msg: e.to_string() })?;
    let v = cfg.violations();
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Violations(v))
    }
}

pub fn load_config(path: &str) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.into(), msg: e.to_string() })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"{"scenario": {"type": "geodesic_sphere", "d0": 1.0471975511965976, "nodes": 400},
        "n": 4, "K": 1.0, "alpha": 0.5, "V": 10.0, "Theta": 100.0, "eta": 0.05, "sigma": 0.5}"#;

    #[test]
    fn minimal_sphere_config() {
        let c = parse_config(SPHERE).unwrap();
        assert_eq!(c.t_max(), 10.0);
        assert_eq!(c.monitors.sample_stride, 20);
    }

    #[test]
    fn all_violations_listed() {
        let bad = SPHERE.replace("\"n\": 4", "\"n\": 3").replace("\"eta\": 0.05", "\"eta\": 0.9").replace("\"sigma\": 0.5", "\"sigma\": 1.5");
        match parse_config(&bad) {
            Err(ConfigError::Violations(v)) => {
                assert!(v.iter().any(|s| s.contains("alpha > 2/3 required when n=3")));
                assert!(v.iter().any(|s| s.contains("Poincare") && s.contains("cylindrical")));
                assert!(v.iter().any(|s| s.contains("sigma")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_has_position() {
        match parse_config("{\n  \"scenario\": ,\n}") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rescale_roundtrip() {
        let c = parse_config(SPHERE).unwrap();
        let r = c.rescaled(4.0);
        assert_eq!(r.flow.k, 4.0);
        assert_eq!(r.t_max(), 2.5);
        assert_eq!(r.rescaled(0.25), c);
    }
}
