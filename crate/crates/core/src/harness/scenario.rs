//! Scenario description loaded from TOML.
//!
//! ```toml
//! schema = 1
//! name = "figure_eight"
//! duration = 40.0
//!
//! [reference]
//! type = "figure_eight"
//! amp_x = 6.0
//! amp_y = 6.0
//! omega = 0.5
//! z = -5.0
//!
//! [[obstacles]]
//! shape = { type = "sphere", center = [-6.0, 0.0, -5.0], radius = 0.5 }
//! margin = 0.5
//! ```
//!
//! Everything except `schema`, `duration` and `reference` has a default.

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dynamics::{UavParams, UAV_INPUTS};
use crate::ecbf::EcbfConfig;
use crate::hull::{HullGeometry, Obstacle};
use crate::{LinearModel, SystemParams};
use crate::linearize::default_output_selection;
use crate::mpc::{MpcConfig, StateBound};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    /// Simulated time (s).
    pub duration: f64,
    #[serde(default = "default_control_dt")]
    pub control_dt: f64,
    #[serde(default = "default_plant_dt")]
    pub plant_dt: f64,
    #[serde(default)]
    pub vehicle: VehicleConfig,
    #[serde(default)]
    pub geometry: HullGeometry,
    /// Payload position at `t = 0`, NED (m). The system starts at rest in
    /// hover trim.
    #[serde(default)]
    pub initial_position: [f64; 3],
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub mpc: MpcOverrides,
    #[serde(default)]
    pub ecbf: EcbfConfig,
    /// When false the tracking input is applied without the barrier filter.
    #[serde(default = "enabled")]
    pub safety_filter: bool,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Payload mass assumed by the controller; the plant keeps
    /// `vehicle.payload_mass`.
    #[serde(default)]
    pub controller_model_mass: Option<f64>,
    /// Time excluded from the tracking error statistics (s).
    #[serde(default = "default_settle_time")]
    pub settle_time: f64,
}

fn default_control_dt() -> f64 {
    0.05
}

fn default_plant_dt() -> f64 {
    0.001
}

fn enabled() -> bool {
    true
}

fn default_settle_time() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavConfig {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub attachment: [f64; 3],
    pub link_length: f64,
}

/// Physical parameters. Omitted UAVs default to the four-UAV reference
/// layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    pub payload_mass: f64,
    pub payload_inertia: [f64; 3],
    pub gravity: f64,
    pub uavs: Vec<UavConfig>,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            mass: 0.7,
            inertia: [0.01; 3],
            attachment: [0.5, 0.5, -0.25],
            link_length: 3.2,
        }
    }
}

impl Default for VehicleConfig {
    fn default() -> Self {
        let reference = SystemParams::reference_quad();
        Self {
            payload_mass: reference.payload_mass(),
            payload_inertia: diag(reference.payload_inertia()),
            gravity: reference.gravity(),
            uavs: reference
                .uavs()
                .iter()
                .map(|u| UavConfig {
                    mass: u.mass,
                    inertia: diag(&u.inertia),
                    attachment: u.attachment.into(),
                    link_length: u.link_length,
                })
                .collect(),
        }
    }
}

fn diag(m: &Matrix3<f64>) -> [f64; 3] {
    [m[(0, 0)], m[(1, 1)], m[(2, 2)]]
}

impl VehicleConfig {
    pub fn params(&self) -> Result<SystemParams, HarnessError> {
        let uavs = self
            .uavs
            .iter()
            .map(|u| UavParams {
                mass: u.mass,
                inertia: Matrix3::from_diagonal(&Vector3::from(u.inertia)),
                attachment: Vector3::from(u.attachment),
                link_length: u.link_length,
            })
            .collect();
        Ok(SystemParams::new(
            self.payload_mass,
            Matrix3::from_diagonal(&Vector3::from(self.payload_inertia)),
            uavs,
            self.gravity,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// `x = a_x sin ωt`, `y = −a_y sin ωt cos ωt`, `z` held from `t = 0`.
    FigureEight { amp_x: f64, amp_y: f64, omega: f64, z: f64 },
    /// Piecewise-linear path through timed positions, held after the last.
    Waypoints { points: Vec<Waypoint> },
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self::FigureEight {
            amp_x: 6.0,
            amp_y: 6.0,
            omega: 0.5,
            z: -5.0,
        }
    }
}

/// Partial overrides of the default tracking controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MpcOverrides {
    pub horizon: Option<usize>,
    pub position_weight: Option<f64>,
    pub attitude_weight: Option<f64>,
    pub yaw_weight: Option<f64>,
    pub link_weight: Option<f64>,
    pub input_weight: Option<f64>,
    /// Input weight on the torques; `input_weight` applies when absent.
    pub torque_weight: Option<f64>,
    /// Actuator thrust bound as a multiple of hover thrust, shared by the
    /// tracking controller and the safety filter.
    pub thrust_headroom: Option<f64>,
    /// Tighter thrust bound, as a multiple of hover thrust, seen only by the
    /// tracking controller; the safety filter keeps the actuator bound.
    pub plan_thrust_headroom: Option<f64>,
    /// Symmetric torque bound (N·m).
    pub torque_limit: Option<f64>,
    /// Payload attitude bound (deg).
    pub attitude_limit_deg: Option<f64>,
    /// Keep the payload at or above `z = 0` (NED).
    pub ground_constraint: Option<bool>,
    /// Add the UAV attitudes to the tracked outputs (reference zero).
    pub uav_attitude_output: Option<bool>,
    pub uav_tilt_weight: Option<f64>,
    /// Bound on UAV roll and pitch (deg); unbounded when absent.
    pub uav_tilt_limit_deg: Option<f64>,
    pub uav_yaw_weight: Option<f64>,
    /// Bound on the link inclination from vertical (deg), applied to the
    /// horizontal link components; unbounded when absent.
    pub link_limit_deg: Option<f64>,
    /// Bound on UAV body rates about x and y (rad/s); unbounded when absent.
    pub uav_rate_limit: Option<f64>,
}

impl MpcOverrides {
    /// Output selection of the controller model.
    pub fn outputs(&self, n_uavs: usize) -> Vec<String> {
        let mut sel = default_output_selection(n_uavs);
        if self.uav_attitude_output.unwrap_or(true) {
            sel.extend((1..=n_uavs).map(|i| format!("theta{i}")));
        }
        sel
    }

    /// Absolute actuator input bounds `(u_lb, u_ub)`.
    pub fn actuator_bounds(&self, model: &LinearModel) -> (DVector<f64>, DVector<f64>) {
        let cfg = MpcConfig::default_for(model);
        let (mut lb, mut ub) = (cfg.u_lb, cfg.u_ub);
        for i in 0..model.input_dim() {
            if i % UAV_INPUTS == 0 {
                if let Some(k) = self.thrust_headroom {
                    ub[i] = model.u_e[i] * k;
                }
            } else if let Some(t) = self.torque_limit {
                lb[i] = -t;
                ub[i] = t;
            }
        }
        (lb, ub)
    }

    pub fn config(&self, model: &LinearModel) -> MpcConfig<f64> {
        let mut cfg = MpcConfig::default_for(model);
        (cfg.u_lb, cfg.u_ub) = self.actuator_bounds(model);
        if let Some(k) = self.plan_thrust_headroom {
            for i in (0..model.input_dim()).step_by(UAV_INPUTS) {
                cfg.u_ub[i] = cfg.u_ub[i].min(model.u_e[i] * k);
            }
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        for (i, name) in model.output_names.iter().enumerate() {
            let w = match name.as_str() {
                "theta0.yaw" => self.yaw_weight,
                n if n.starts_with("r0.") => self.position_weight,
                n if n.starts_with("theta0.") => self.attitude_weight,
                n if n.starts_with("theta") && n.ends_with(".yaw") => self.uav_yaw_weight,
                n if n.starts_with("theta") => self.uav_tilt_weight,
                n if n.starts_with('q') && !n.ends_with(".z") => self.link_weight,
                _ => None,
            };
            if let Some(w) = w {
                cfg.q[(i, i)] = w;
            }
        }
        if let Some(r) = self.input_weight {
            cfg.r.fill_diagonal(r);
        }
        if let Some(r) = self.torque_weight {
            for i in (0..model.input_dim()).filter(|i| i % UAV_INPUTS != 0) {
                cfg.r[(i, i)] = r;
            }
        }
        if let Some(deg) = self.attitude_limit_deg {
            for b in cfg.state_bounds.iter_mut().filter(|b| b.name.starts_with("theta0.")) {
                b.lower = -deg.to_radians();
                b.upper = deg.to_radians();
            }
        }
        if let Some(deg) = self.uav_tilt_limit_deg {
            for i in 1..=model.n_uavs {
                for axis in ["roll", "pitch"] {
                    cfg.state_bounds.push(StateBound {
                        name: format!("theta{i}.{axis}"),
                        lower: -deg.to_radians(),
                        upper: deg.to_radians(),
                    });
                }
            }
        }
        if let Some(deg) = self.link_limit_deg {
            let s = deg.to_radians().sin();
            for i in 1..=model.n_uavs {
                for axis in ["x", "y"] {
                    cfg.state_bounds.push(StateBound {
                        name: format!("q{i}.{axis}"),
                        lower: -s,
                        upper: s,
                    });
                }
            }
        }
        if let Some(w) = self.uav_rate_limit {
            for i in 1..=model.n_uavs {
                for axis in ["x", "y"] {
                    cfg.state_bounds.push(StateBound {
                        name: format!("omega{i}.{axis}"),
                        lower: -w,
                        upper: w,
                    });
                }
            }
        }
        if self.ground_constraint == Some(false) {
            cfg.state_bounds.retain(|b| b.name != "r0.z");
        }
        cfg
    }
}

/// Gaussian noise added to the measured payload velocity and angular rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation on each payload velocity component (m/s).
    pub sigma_v: f64,
    /// Standard deviation on each payload angular-rate component (rad/s).
    pub sigma_w: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_v: 0.0,
            sigma_w: 0.0,
            seed: 1,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let s: Self = toml::from_str(text).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string_pretty(self).map_err(|e| HarnessError::Scenario(e.to_string()))
    }

    /// Number of control steps.
    pub fn steps(&self) -> usize {
        (self.duration / self.control_dt).round() as usize
    }

    /// Plant steps per control step.
    pub fn substeps(&self) -> usize {
        (self.control_dt / self.plant_dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Scenario(m.to_string()));
        if self.schema != SCHEMA_VERSION {
            return Err(HarnessError::Scenario(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                self.schema
            )));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return bad("duration must be finite and nonnegative");
        }
        if !(self.plant_dt > 0.0 && self.control_dt > 0.0) {
            return bad("time steps must be positive");
        }
        if self.plant_dt > crate::dynamics::MAX_PLANT_STEP {
            return bad("plant_dt exceeds the largest supported integration step");
        }
        let ratio = self.control_dt / self.plant_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio.round() < 1.0 {
            return bad("control_dt must be an integer multiple of plant_dt");
        }
        self.vehicle.params()?;
        if let Some(m) = self.controller_model_mass {
            if !(m > 0.0) {
                return bad("controller_model_mass must be positive");
            }
        }
        if self.geometry.inflation < 0.0 || self.geometry.payload_half_extents.iter().any(|h| *h < 0.0) {
            return bad("hull geometry must be nonnegative");
        }
        for o in &self.obstacles {
            o.validate().map_err(HarnessError::Scenario)?;
        }
        match &self.reference {
            ReferenceConfig::FigureEight { omega, .. } if !omega.is_finite() => return bad("omega must be finite"),
            ReferenceConfig::Waypoints { points } => {
                if points.is_empty() {
                    return bad("waypoint reference needs at least one point");
                }
                if points.windows(2).any(|w| !(w[1].t > w[0].t)) {
                    return bad("waypoint times must increase");
                }
            }
            _ => {}
        }
        if self.noise.sigma_v < 0.0 || self.noise.sigma_w < 0.0 {
            return bad("noise standard deviations must be nonnegative");
        }
        self.ecbf.validate().map_err(|e| HarnessError::Scenario(e.to_string()))?;
        Ok(())
    }

    /// True plant parameters.
    pub fn plant_params(&self) -> Result<SystemParams, HarnessError> {
        self.vehicle.params()
    }

    /// Parameters the controller is designed with.
    pub fn controller_params(&self) -> Result<SystemParams, HarnessError> {
        let p = self.vehicle.params()?;
        match self.controller_model_mass {
            Some(m) => Ok(p.with_payload_mass(m)?),
            None => Ok(p),
        }
    }
}
