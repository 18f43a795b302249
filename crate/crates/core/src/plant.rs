//! 1-D contact plant: an object between two fingertips on the closing axis.
//!
//! Coordinates: `x` grows toward finger 2. Fingertips sit at `x_L = -q1` and
//! `x_R = q2`. Gravity along the axis is `g·n = -9.81 sin(θ)` for wrist
//! angle `θ`.

use serde::{Deserialize, Serialize};

use crate::error::GraspError;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub name: String,
    pub mass: f64,
    pub width: f64,
    /// True contact stiffness.
    pub stiffness: f64,
    /// Contact damping on approach.
    pub damping: f64,
    /// Offset of the object center from the gripper center, toward finger 1.
    #[serde(default)]
    pub initial_offset: f64,
}

impl ObjectSpec {
    pub fn styrofoam() -> Self {
        Self {
            name: "styrofoam".into(),
            mass: 0.002,
            width: 0.05,
            stiffness: 500.0,
            damping: 0.05,
            initial_offset: 0.0,
        }
    }

    pub fn tape_roll() -> Self {
        Self {
            name: "tape_roll".into(),
            mass: 0.049,
            width: 0.045,
            stiffness: 2000.0,
            damping: 0.5,
            initial_offset: 0.0,
        }
    }

    pub fn wood() -> Self {
        Self { name: "wood".into(), mass: 0.144, width: 0.04, stiffness: 20000.0, damping: 2.0, initial_offset: 0.0 }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "styrofoam" => Some(Self::styrofoam()),
            "tape_roll" | "tape" => Some(Self::tape_roll()),
            "wood" => Some(Self::wood()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), GraspError> {
        let bad = |k: &str, m: String| Err(GraspError::BadValue { key: format!("object.{k}"), msg: m });
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return bad("mass", format!("must be >= 0, got {}", self.mass));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return bad("width", format!("must be > 0, got {}", self.width));
        }
        if !(self.stiffness > 0.0 && self.stiffness.is_finite()) {
            return bad("stiffness", format!("must be > 0, got {}", self.stiffness));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return bad("damping", format!("must be >= 0, got {}", self.damping));
        }
        if !self.initial_offset.is_finite() {
            return bad("initial_offset", "must be finite".into());
        }
        Ok(())
    }
}

/// Finger actuator and environment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    pub physics_rate: f64,
    /// Position servo stiffness of each finger (N/m).
    pub servo_stiffness: f64,
    /// Finger damping (N·s/m).
    pub servo_damping: f64,
    pub max_finger_speed: f64,
    /// Viscous drag on the object (N·s/m).
    pub drag: f64,
    /// Coulomb friction between object and a supporting table; 0 when the
    /// object is held in the air.
    pub table_friction: f64,
    /// Stiffness of the pushing hand; the push eases off as the finger
    /// retreats. 0 makes the push a pure force source.
    pub hand_stiffness: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            physics_rate: 1000.0,
            servo_stiffness: 200.0,
            servo_damping: 4.0,
            max_finger_speed: 0.05,
            drag: 0.05,
            table_friction: 0.0,
            hand_stiffness: 2000.0,
        }
    }
}

impl PlantParams {
    pub fn dt(&self) -> f64 {
        1.0 / self.physics_rate
    }

    pub fn validate(&self) -> Result<(), GraspError> {
        let checks = [
            ("physics_rate", self.physics_rate, false),
            ("servo_stiffness", self.servo_stiffness, false),
            ("servo_damping", self.servo_damping, false),
            ("max_finger_speed", self.max_finger_speed, false),
            ("drag", self.drag, true),
            ("table_friction", self.table_friction, true),
            ("hand_stiffness", self.hand_stiffness, true),
        ];
        for (k, v, zero_ok) in checks {
            let ok = v.is_finite() && if zero_ok { v >= 0.0 } else { v > 0.0 };
            if !ok {
                return Err(GraspError::BadValue { key: format!("plant.{k}"), msg: format!("out of range: {v}") });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PushTarget {
    Finger1,
    Finger2,
    Object,
}

/// Trapezoidal push. For fingers the force is sensed by that finger's load
/// cell; for the object it acts along `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Push {
    pub t_start: f64,
    pub t_end: f64,
    pub force: f64,
    pub target: PushTarget,
    #[serde(default = "default_ramp")]
    pub ramp: f64,
}

fn default_ramp() -> f64 {
    0.02
}

impl Push {
    /// Nominal force profile at time `t`.
    pub fn profile(&self, t: f64) -> f64 {
        if t < self.t_start || t > self.t_end {
            return 0.0;
        }
        let ramp = self.ramp.max(1e-9);
        let up = ((t - self.t_start) / ramp).min(1.0);
        let down = ((self.t_end - t) / ramp).min(1.0);
        self.force * up.min(down)
    }
}

/// Constant-rate wrist sweep from `from` to `to` radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WristSweep {
    pub t_start: f64,
    pub duration: f64,
    pub from: f64,
    pub to: f64,
}

impl WristSweep {
    pub fn angle(&self, t: f64) -> f64 {
        let s = if self.duration > 0.0 {
            ((t - self.t_start) / self.duration).clamp(0.0, 1.0)
        } else if t >= self.t_start {
            1.0
        } else {
            0.0
        };
        self.from + s * (self.to - self.from)
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceSchedule {
    pub pushes: Vec<Push>,
    pub wrist: Option<WristSweep>,
}

impl DisturbanceSchedule {
    pub fn validate(&self) -> Result<(), GraspError> {
        for p in &self.pushes {
            if !(p.t_end >= p.t_start && p.force.is_finite() && p.ramp >= 0.0) {
                return Err(GraspError::BadValue { key: "disturbances.pushes".into(), msg: format!("bad push {p:?}") });
            }
        }
        for (i, a) in self.pushes.iter().enumerate() {
            for b in &self.pushes[i + 1..] {
                if a.target == b.target && a.t_start < b.t_end && b.t_start < a.t_end {
                    return Err(GraspError::BadValue {
                        key: "disturbances.pushes".into(),
                        msg: format!("overlapping pushes on {:?}", a.target),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn wrist_angle(&self, t: f64) -> f64 {
        self.wrist.map_or(0.0, |w| w.angle(t))
    }

    pub fn g_dot_n(&self, t: f64) -> f64 {
        -GRAVITY * self.wrist_angle(t).sin()
    }

    fn nominal(&self, target: PushTarget, t: f64) -> (f64, Option<f64>) {
        for p in &self.pushes {
            if p.target == target && t >= p.t_start && t <= p.t_end {
                return (p.profile(t), Some(p.t_start));
            }
        }
        (0.0, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub x_obj: f64,
    pub v_obj: f64,
    pub q1: f64,
    pub q2: f64,
    pub q1_dot: f64,
    pub q2_dot: f64,
    pub true_f1: f64,
    pub true_f2: f64,
    /// Pushes currently sensed by each finger.
    pub push_f1: f64,
    pub push_f2: f64,
    pub wrist_angle: f64,
    pub t: f64,
    push_origin: [Option<f64>; 2],
}

impl PlantState {
    pub fn new(object: &ObjectSpec, q: [f64; 2]) -> Self {
        let mut s = Self {
            x_obj: -object.initial_offset,
            v_obj: 0.0,
            q1: q[0],
            q2: q[1],
            q1_dot: 0.0,
            q2_dot: 0.0,
            true_f1: 0.0,
            true_f2: 0.0,
            push_f1: 0.0,
            push_f2: 0.0,
            wrist_angle: 0.0,
            t: 0.0,
            push_origin: [None; 2],
        };
        let (f1, f2) = contact_forces(&s, object);
        s.true_f1 = f1;
        s.true_f2 = f2;
        s
    }

    pub fn x_left(&self) -> f64 {
        -self.q1
    }

    pub fn x_right(&self) -> f64 {
        self.q2
    }

    /// Penetration of each fingertip into the object.
    pub fn penetration(&self, object: &ObjectSpec) -> (f64, f64) {
        let d1 = self.x_left() - (self.x_obj - object.width / 2.0);
        let d2 = (self.x_obj + object.width / 2.0) - self.x_right();
        (d1, d2)
    }

    /// Forces a fingertip load cell would see: contact force plus any push.
    pub fn sensed_forces(&self) -> (f64, f64) {
        (self.true_f1 + self.push_f1, self.true_f2 + self.push_f2)
    }

    pub fn kinetic_energy(&self, object: &ObjectSpec) -> f64 {
        0.5 * object.mass * self.v_obj * self.v_obj
    }
}

/// Penalty-spring contact with one-sided damping.
pub fn contact_forces(state: &PlantState, object: &ObjectSpec) -> (f64, f64) {
    let (d1, d2) = state.penetration(object);
    let approach1 = -state.q1_dot - state.v_obj;
    let approach2 = state.v_obj - state.q2_dot;
    let one = |d: f64, v: f64| {
        if d > 0.0 {
            (object.stiffness * d + object.damping * v.max(0.0)).max(0.0)
        } else {
            0.0
        }
    };
    (one(d1, approach1), one(d2, approach2))
}

/// Object position that balances the spring forces and `push` when inertia is
/// neglected.
pub fn quasi_static_position(x_prev: f64, q1: f64, q2: f64, object: &ObjectSpec, push: f64) -> f64 {
    let k = object.stiffness;
    let lo = -q1 + object.width / 2.0; // smallest x with zero left force
    let hi = q2 - object.width / 2.0; // largest x with zero right force
    let right_only = hi + push / k;
    let left_only = lo + push / k;
    if lo <= hi {
        if push > 0.0 {
            right_only
        } else if push < 0.0 {
            left_only
        } else {
            x_prev.clamp(lo, hi)
        }
    } else {
        let both = 0.5 * (lo + hi) + push / (2.0 * k);
        if both > lo {
            right_only
        } else if both < hi {
            left_only
        } else {
            both
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plant {
    pub object: ObjectSpec,
    pub params: PlantParams,
    pub schedule: DisturbanceSchedule,
    pub state: PlantState,
    pub q_limits: (f64, f64),
}

impl Plant {
    pub fn new(
        object: ObjectSpec,
        params: PlantParams,
        schedule: DisturbanceSchedule,
        q0: [f64; 2],
    ) -> Result<Self, GraspError> {
        object.validate()?;
        params.validate()?;
        schedule.validate()?;
        let mut state = PlantState::new(&object, q0);
        state.wrist_angle = schedule.wrist_angle(0.0);
        Ok(Self { state, object, params, schedule, q_limits: (0.0, f64::INFINITY) })
    }

    /// Advances one physics step with the commanded joint positions.
    pub fn step(&mut self, q_cmd: [f64; 2], dt: f64) -> Result<(), GraspError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GraspError::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        let p = self.params;
        let o = &self.object;
        let s = &mut self.state;
        let t = s.t + dt;

        // Fingers: implicit first-order servo against the contact spring.
        let surfaces = [o.width / 2.0 - s.x_obj, s.x_obj + o.width / 2.0];
        let q_old = [s.q1, s.q2];
        let mut q_new = [0.0; 2];
        for i in 0..2 {
            let (b, k, c, q) = (p.servo_damping, p.servo_stiffness, q_cmd[i], q_old[i]);
            let free = (b * q + dt * k * c) / (b + dt * k);
            let next = if free < surfaces[i] {
                (b * q + dt * (k * c + o.stiffness * surfaces[i])) / (b + dt * (k + o.stiffness))
            } else {
                free
            };
            let max_step = p.max_finger_speed * dt;
            q_new[i] = (q + (next - q).clamp(-max_step, max_step)).clamp(self.q_limits.0, self.q_limits.1);
        }
        s.q1_dot = (q_new[0] - q_old[0]) / dt;
        s.q2_dot = (q_new[1] - q_old[1]) / dt;
        s.q1 = q_new[0];
        s.q2 = q_new[1];

        s.wrist_angle = self.schedule.wrist_angle(t);
        let g_dot_n = self.schedule.g_dot_n(t);
        let (push_obj, _) = self.schedule.nominal(PushTarget::Object, t);

        if o.mass > 0.0 {
            let (f1, f2) = contact_forces(s, o);
            let drive = f1 - f2 + o.mass * g_dot_n + push_obj;
            let v_free = (o.mass * s.v_obj + dt * drive) / (o.mass + dt * p.drag);
            let slide_limit = p.table_friction * GRAVITY * dt;
            s.v_obj = if v_free.abs() <= slide_limit { 0.0 } else { v_free - slide_limit * v_free.signum() };
            s.x_obj += dt * s.v_obj;
        } else {
            let x = quasi_static_position(s.x_obj, s.q1, s.q2, o, push_obj);
            s.v_obj = (x - s.x_obj) / dt;
            s.x_obj = x;
        }

        let (f1, f2) = contact_forces(s, o);
        s.true_f1 = f1;
        s.true_f2 = f2;
        s.t = t;

        // Finger pushes ease off as the finger opens away from the hand.
        for (i, target) in [PushTarget::Finger1, PushTarget::Finger2].into_iter().enumerate() {
            let (nominal, started) = self.schedule.nominal(target, t);
            let q_now = if i == 0 { s.q1 } else { s.q2 };
            let sensed = match started {
                Some(_) => {
                    let origin = *s.push_origin[i].get_or_insert(q_now);
                    let retreat = (q_now - origin).max(0.0);
                    (nominal - p.hand_stiffness * retreat).max(0.0)
                }
                None => {
                    s.push_origin[i] = None;
                    0.0
                }
            };
            if i == 0 {
                s.push_f1 = sensed;
            } else {
                s.push_f2 = sensed;
            }
        }
        Ok(())
    }

    pub fn g_dot_n(&self) -> f64 {
        self.schedule.g_dot_n(self.state.t)
    }
}

/// Displacement of one trial: ground truth and the joint-state proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Displacement {
    pub truth: f64,
    pub proxy: f64,
}

/// `truth` is the object's net travel. `proxy` is the near finger's travel
/// minus its initial clearance to the object surface.
pub fn displacement(object: &ObjectSpec, start: &PlantState, end: &PlantState) -> Displacement {
    let truth = (end.x_obj - start.x_obj).abs();
    let (q_start, q_end, surface) = if object.initial_offset >= 0.0 {
        (start.q1, end.q1, object.width / 2.0 - start.x_obj)
    } else {
        (start.q2, end.q2, object.width / 2.0 + start.x_obj)
    };
    let clearance = q_start - surface;
    Displacement { truth, proxy: q_start - q_end - clearance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn state_at(x_obj: f64, q1: f64, q2: f64) -> PlantState {
        let mut s = PlantState::new(&ObjectSpec::tape_roll(), [0.04, 0.04]);
        s.x_obj = x_obj;
        s.q1 = q1;
        s.q2 = q2;
        s
    }

    #[test]
    fn contact_examples() {
        let o = ObjectSpec { stiffness: 2000.0, width: 0.04, ..ObjectSpec::tape_roll() };
        assert_eq!(contact_forces(&state_at(0.0, 0.03, 0.03), &o), (0.0, 0.0));
        let (f1, f2) = contact_forces(&state_at(0.0, 0.019, 0.03), &o);
        assert_abs_diff_eq!(f1, 2.0, epsilon = 1e-9);
        assert_eq!(f2, 0.0);
        let (f1, f2) = contact_forces(&state_at(0.0, 0.019, 0.019), &o);
        assert_eq!(f1, f2);
    }

    #[test]
    fn free_object_stays_put() {
        let o = ObjectSpec::tape_roll();
        let mut p = Plant::new(o, PlantParams::default(), DisturbanceSchedule::default(), [0.04, 0.04]).unwrap();
        for _ in 0..1000 {
            p.step([0.04, 0.04], 1e-3).unwrap();
        }
        assert_eq!(p.state.x_obj, 0.0);
        assert!(p.step([0.04, 0.04], 0.0).is_err());
    }

    #[test]
    fn balanced_contact_has_no_acceleration() {
        let o = ObjectSpec::tape_roll();
        let q = o.width / 2.0 - 0.0005;
        let mut p = Plant::new(o, PlantParams::default(), DisturbanceSchedule::default(), [q, q]).unwrap();
        p.step([q, q], 1e-3).unwrap();
        assert_eq!(p.state.v_obj, 0.0);
        assert_eq!(p.state.true_f1, p.state.true_f2);
    }

    #[test]
    fn quasi_static_balances() {
        let o = ObjectSpec { mass: 0.0, ..ObjectSpec::tape_roll() };
        for (q1, q2, push) in [(0.02, 0.021, 0.3), (0.02, 0.02, -0.5), (0.03, 0.03, 0.0), (0.0222, 0.0222, 0.1)] {
            let x = quasi_static_position(0.0, q1, q2, &o, push);
            let s = PlantState { x_obj: x, v_obj: 0.0, q1_dot: 0.0, q2_dot: 0.0, ..state_at(x, q1, q2) };
            let (f1, f2) = contact_forces(&s, &o);
            if f1 > 0.0 && f2 > 0.0 {
                assert!((f1 - f2 + push).abs() < 1e-9, "{f1} {f2} {push}");
            }
        }
    }

    #[test]
    fn push_profile_is_trapezoid() {
        let p = Push { t_start: 1.0, t_end: 3.0, force: 1.0, target: PushTarget::Finger1, ramp: 0.5 };
        assert_eq!(p.profile(0.5), 0.0);
        assert_abs_diff_eq!(p.profile(1.25), 0.5, epsilon = 1e-12);
        assert_eq!(p.profile(2.0), 1.0);
        assert_abs_diff_eq!(p.profile(2.75), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn overlapping_pushes_rejected() {
        let a = Push { t_start: 1.0, t_end: 3.0, force: 1.0, target: PushTarget::Finger1, ramp: 0.1 };
        let b = Push { t_start: 2.0, ..a };
        let s = DisturbanceSchedule { pushes: vec![a, b], wrist: None };
        assert!(s.validate().is_err());
    }

    #[test]
    fn centered_displacement_is_zero() {
        let o = ObjectSpec::wood();
        let s = PlantState::new(&o, [0.03, 0.03]);
        let mut e = s;
        e.q1 = 0.02;
        e.q2 = 0.02;
        let d = displacement(&o, &s, &e);
        assert_eq!(d.truth, 0.0);
        assert_abs_diff_eq!(d.proxy, 0.0, epsilon = 1e-15);
    }
}
