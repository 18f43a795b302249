//! Three-phase tactile grasp controller and the open-loop trajectory baseline.
//!
//! Joint positions `q1`, `q2` are finger distances from the gripper center;
//! increasing values open the gripper.

use serde::{Deserialize, Serialize};

use crate::error::GraspError;
use crate::sensor::ContactDetector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase3Mode {
    HoldForever,
    StopAtGoal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub f_goal: f64,
    /// Contact detection threshold.
    pub f_theta: f64,
    /// Deadband on the external force.
    pub f_phi: f64,
    pub kp_int: f64,
    pub ki_int: f64,
    /// Object stiffness estimate.
    pub ks_int: f64,
    pub kp_ext: f64,
    /// Compliance stiffness.
    pub k_ext: f64,
    /// Object mass used for gravity compensation.
    pub mass: f64,
    pub control_rate: f64,
    /// Aperture reduction speed while closing (m/s).
    pub closing_speed: f64,
    pub phase3_mode: Phase3Mode,
    pub gravity_comp_enabled: bool,
    pub compliance_enabled: bool,
    pub deadband_enabled: bool,
    /// `stop_at_goal` tolerance on the internal force error.
    pub goal_tolerance: f64,
    /// How long the error must stay inside the tolerance.
    pub goal_dwell: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Minimum detectable force; the effective threshold is the larger of
    /// this and `f_theta`.
    pub detection_floor: f64,
    pub debounce_ticks: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            f_goal: 2.0,
            f_theta: 0.2,
            f_phi: 0.2,
            kp_int: 1.9,
            ki_int: 9.0,
            ks_int: 1000.0,
            kp_ext: 0.4,
            k_ext: 1000.0,
            mass: 0.0,
            control_rate: 100.0,
            closing_speed: 0.01,
            phase3_mode: Phase3Mode::HoldForever,
            gravity_comp_enabled: true,
            compliance_enabled: true,
            deadband_enabled: true,
            goal_tolerance: 0.05,
            goal_dwell: 0.25,
            q_min: 0.0,
            q_max: 0.05,
            detection_floor: 0.0,
            debounce_ticks: 1,
        }
    }
}

impl ControllerConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.control_rate
    }

    pub fn validate(&self) -> Result<(), GraspError> {
        let positive = [
            ("f_goal", self.f_goal),
            ("f_theta", self.f_theta),
            ("kp_int", self.kp_int),
            ("ki_int", self.ki_int),
            ("ks_int", self.ks_int),
            ("kp_ext", self.kp_ext),
            ("k_ext", self.k_ext),
            ("control_rate", self.control_rate),
            ("closing_speed", self.closing_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GraspError::BadValue {
                    key: format!("controller.{name}"),
                    msg: format!("must be > 0, got {v}"),
                });
            }
        }
        let non_negative = [
            ("f_phi", self.f_phi),
            ("mass", self.mass),
            ("goal_tolerance", self.goal_tolerance),
            ("goal_dwell", self.goal_dwell),
            ("detection_floor", self.detection_floor),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) {
                return Err(GraspError::BadValue {
                    key: format!("controller.{name}"),
                    msg: format!("must be >= 0, got {v}"),
                });
            }
        }
        if !(self.q_min < self.q_max) {
            return Err(GraspError::BadValue { key: "controller.q_max".into(), msg: "must exceed q_min".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Closing,
    EstablishContact,
    Holding,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Closing => "closing",
            Phase::EstablishContact => "contact",
            Phase::Holding => "holding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPhase {
    pub phase: Phase,
    pub frozen: [bool; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub q1_cmd: f64,
    pub q2_cmd: f64,
}

/// Request shaped like a trajectory goal: close from `q_start` toward a
/// posture `q_end` that would penetrate the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspGoal {
    pub q_start: [f64; 2],
    pub q_end: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub grasp: GraspPhase,
    pub integral_int: f64,
    /// Held object position, defined once holding starts.
    pub ref_object_pos: Option<f64>,
    pub last_cmd: ControlCommand,
    pub finished: bool,
    pub fault: Option<String>,
    goal_timer: f64,
}

/// Decides whether the current contact set is force-closure.
pub trait ClosureProbe {
    fn evaluate(&mut self, in_contact: [bool; 2]) -> bool;
}

impl<F: FnMut([bool; 2]) -> bool> ClosureProbe for F {
    fn evaluate(&mut self, in_contact: [bool; 2]) -> bool {
        self(in_contact)
    }
}

/// Per-tick controller inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub f1: f64,
    pub f2: f64,
    pub q1: f64,
    pub q2: f64,
    /// Gravity projected on the closing axis (m/s²).
    pub g_dot_n: f64,
}

/// Everything a tick produced, for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutput {
    pub cmd: ControlCommand,
    pub phase: Phase,
    pub f_int: f64,
    pub f_ext: f64,
    pub u_int: f64,
    pub u_ext: f64,
}

pub fn compute_external_force(f1: f64, f2: f64, mass: f64, g_dot_n: f64, gravity_comp: bool) -> f64 {
    let g = if gravity_comp { mass * g_dot_n } else { 0.0 };
    -(f1 - f2 + g)
}

/// PI law on the summed grip force. Accumulates the integral in `state`.
pub fn compute_internal_control(
    f1: f64,
    f2: f64,
    state: &mut ControllerState,
    config: &ControllerConfig,
    dt: f64,
) -> f64 {
    let err = f1 + f2 - config.f_goal;
    state.integral_int += err * dt;
    let limit = (config.q_max - config.q_min) * config.ks_int / config.ki_int;
    state.integral_int = state.integral_int.clamp(-limit, limit);
    (config.kp_int * err + config.ki_int * state.integral_int) / config.ks_int
}

/// Compliance outside the deadband, position hold inside it.
pub fn compute_external_control(
    f_ext: f64,
    object_pos: f64,
    state: &mut ControllerState,
    config: &ControllerConfig,
) -> f64 {
    let comply = config.compliance_enabled && (!config.deadband_enabled || f_ext.abs() > config.f_phi);
    if comply {
        state.ref_object_pos = Some(object_pos);
        config.kp_ext * f_ext / config.k_ext
    } else {
        let target = *state.ref_object_pos.get_or_insert(object_pos);
        target - object_pos
    }
}

/// Splits aperture and center commands evenly between the fingers.
pub fn distribute(u_int: f64, u_ext: f64) -> (f64, f64) {
    (0.5 * (-u_ext + u_int), 0.5 * (u_ext + u_int))
}

/// Gripper center in plant coordinates, `(x_R + x_L) / 2`.
pub fn object_position(q1: f64, q2: f64) -> f64 {
    0.5 * (q2 - q1)
}

#[derive(Debug, Clone)]
pub struct GraspController {
    pub config: ControllerConfig,
    pub state: ControllerState,
    goal: GraspGoal,
    detectors: [ContactDetector; 2],
}

impl GraspController {
    pub fn new(config: ControllerConfig, goal: GraspGoal) -> Result<Self, GraspError> {
        config.validate()?;
        let det = ContactDetector::new(config.f_theta, config.detection_floor, config.debounce_ticks);
        let start = ControlCommand { q1_cmd: goal.q_start[0], q2_cmd: goal.q_start[1] };
        Ok(Self {
            config,
            goal,
            detectors: [det; 2],
            state: ControllerState {
                grasp: GraspPhase { phase: Phase::Closing, frozen: [false; 2] },
                integral_int: 0.0,
                ref_object_pos: None,
                last_cmd: start,
                finished: false,
                fault: None,
                goal_timer: 0.0,
            },
        })
    }

    pub fn phase(&self) -> Phase {
        self.state.grasp.phase
    }

    /// Runtime update of the goal force.
    pub fn set_f_goal(&mut self, f_goal: f64) -> Result<(), GraspError> {
        if !(f_goal > 0.0 && f_goal.is_finite()) {
            return Err(GraspError::BadValue {
                key: "controller.f_goal".into(),
                msg: format!("must be > 0, got {f_goal}"),
            });
        }
        self.config.f_goal = f_goal;
        self.state.goal_timer = 0.0;
        self.state.finished = false;
        Ok(())
    }

    fn clamp_q(&self, q: f64) -> f64 {
        q.clamp(self.config.q_min, self.config.q_max)
    }

    fn idle_output(&self, m: &Measurement) -> TickOutput {
        TickOutput {
            cmd: self.state.last_cmd,
            phase: self.phase(),
            f_int: m.f1 + m.f2,
            f_ext: compute_external_force(m.f1, m.f2, self.config.mass, m.g_dot_n, self.config.gravity_comp_enabled),
            u_int: 0.0,
            u_ext: 0.0,
        }
    }

    pub fn tick(&mut self, m: Measurement, probe: &mut dyn ClosureProbe) -> TickOutput {
        let finite = [m.f1, m.f2, m.q1, m.q2, m.g_dot_n].iter().all(|v| v.is_finite());
        if !finite {
            self.state.fault.get_or_insert_with(|| format!("non-finite measurement {m:?}"));
            let mut out = self.idle_output(&Measurement { f1: 0.0, f2: 0.0, g_dot_n: 0.0, ..m });
            out.f_int = f64::NAN;
            out.f_ext = f64::NAN;
            return out;
        }
        if self.state.finished {
            return self.idle_output(&m);
        }
        match self.phase() {
            Phase::Closing | Phase::EstablishContact => self.tick_closing(m, probe),
            Phase::Holding => self.tick_holding(m),
        }
    }

    fn tick_closing(&mut self, m: Measurement, probe: &mut dyn ClosureProbe) -> TickOutput {
        let forces = [m.f1, m.f2];
        let mut new_contact = false;
        for i in 0..2 {
            if !self.state.grasp.frozen[i] && self.detectors[i].update(forces[i]) {
                self.state.grasp.frozen[i] = true;
                new_contact = true;
            }
        }
        let frozen = self.state.grasp.frozen;
        if frozen.iter().any(|f| *f) {
            self.state.grasp.phase = Phase::EstablishContact;
        }
        if new_contact && probe.evaluate(frozen) {
            self.state.grasp.phase = Phase::Holding;
            self.state.integral_int = 0.0;
            self.state.ref_object_pos = Some(object_position(m.q1, m.q2));
            self.state.goal_timer = 0.0;
        }

        let step = 0.5 * self.config.closing_speed * self.config.dt();
        let mut cmd = self.state.last_cmd;
        if !frozen[0] {
            cmd.q1_cmd = self.clamp_q((cmd.q1_cmd - step).max(self.goal.q_end[0]));
        }
        if !frozen[1] {
            cmd.q2_cmd = self.clamp_q((cmd.q2_cmd - step).max(self.goal.q_end[1]));
        }
        if self.phase() == Phase::Holding {
            // Freeze both fingers on the transition tick.
            cmd = self.state.last_cmd;
        }
        self.state.last_cmd = cmd;
        let mut out = self.idle_output(&m);
        out.cmd = cmd;
        out
    }

    fn tick_holding(&mut self, m: Measurement) -> TickOutput {
        let dt = self.config.dt();
        let f_ext = compute_external_force(m.f1, m.f2, self.config.mass, m.g_dot_n, self.config.gravity_comp_enabled);
        let u_int = compute_internal_control(m.f1, m.f2, &mut self.state, &self.config, dt);
        let u_ext = compute_external_control(f_ext, object_position(m.q1, m.q2), &mut self.state, &self.config);
        let (dq1, dq2) = distribute(u_int, u_ext);
        let cmd = ControlCommand { q1_cmd: self.clamp_q(m.q1 + dq1), q2_cmd: self.clamp_q(m.q2 + dq2) };
        self.state.last_cmd = cmd;

        let err = m.f1 + m.f2 - self.config.f_goal;
        if self.config.phase3_mode == Phase3Mode::StopAtGoal {
            if err.abs() < self.config.goal_tolerance {
                self.state.goal_timer += dt;
                if self.state.goal_timer + 1e-12 >= self.config.goal_dwell {
                    self.state.finished = true;
                }
            } else {
                self.state.goal_timer = 0.0;
            }
        }
        TickOutput { cmd, phase: Phase::Holding, f_int: m.f1 + m.f2, f_ext, u_int, u_ext }
    }
}

/// Open-loop baseline: linear interpolation between two joint postures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryController {
    pub q_start: [f64; 2],
    pub q_end: [f64; 2],
    pub duration: f64,
}

impl TrajectoryController {
    pub fn new(q_start: [f64; 2], q_end: [f64; 2], duration: f64) -> Result<Self, GraspError> {
        if !(duration > 0.0) {
            return Err(GraspError::InvalidParameter(format!("trajectory duration must be > 0, got {duration}")));
        }
        Ok(Self { q_start, q_end, duration })
    }

    pub fn tick(&self, _q1: f64, _q2: f64, t: f64) -> ControlCommand {
        let s = (t / self.duration).clamp(0.0, 1.0);
        let lerp = |i: usize| self.q_start[i] + s * (self.q_end[i] - self.q_start[i]);
        ControlCommand { q1_cmd: lerp(0), q2_cmd: lerp(1) }
    }
}
