//! Vehicle state representations, low-level car dynamics, planner-level
//! kinematics, and the waypoint tracking controller.
//!
//! The low-level model is the dynamically extended simple car
//! (`theta_dot = v tan(delta) / L`), integrated with RK4. The planner sees an
//! abstracted state of longitudinal position, lane index, and velocity.

use crate::math;

/// Guard for divisions by the current speed; the highway scenario keeps
/// speeds well above this, the floor only matters in synthetic tests.
pub const V_FLOOR: f64 = 1.0;

/// Steering actuator limit, radians.
pub const MAX_STEER: f64 = 0.4;

/// Low-level pose-velocity state of one car.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarState {
    pub px: f64,
    pub py: f64,
    /// Heading, normalized to (-pi, pi].
    pub theta: f64,
    /// Forward speed, >= 0.
    pub v: f64,
}

/// Steering angle and longitudinal acceleration command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarControl {
    pub delta: f64,
    pub a: f64,
}

/// Relative state of a robot/other-car pair:
/// `(px_rel, py_rel, theta_r, v_r, v_o)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState {
    pub px_rel: f64,
    pub py_rel: f64,
    pub theta_r: f64,
    pub v_r: f64,
    pub v_o: f64,
}

impl RelativeState {
    pub fn as_array(&self) -> [f64; 5] {
        [self.px_rel, self.py_rel, self.theta_r, self.v_r, self.v_o]
    }

    pub fn from_array(x: [f64; 5]) -> Self {
        RelativeState {
            px_rel: x[0],
            py_rel: x[1],
            theta_r: x[2],
            v_r: x[3],
            v_o: x[4],
        }
    }
}

/// Planner-level robot state: longitudinal position, lane index, velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerState {
    pub s: f64,
    pub lane: usize,
    pub v: f64,
}

/// Gains of the closed-loop tracking controller.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackingGains {
    pub k_theta: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for TrackingGains {
    fn default() -> Self {
        TrackingGains {
            k_theta: 5.0,
            k1: 2.0,
            k2: 1.67,
        }
    }
}

/// Straight multi-lane road; lane `l` has its centerline at `y = width * l`,
/// higher indices further left.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LaneGeometry {
    pub n_lanes: usize,
    pub width: f64,
}

impl Default for LaneGeometry {
    fn default() -> Self {
        LaneGeometry {
            n_lanes: 4,
            width: 4.0,
        }
    }
}

impl LaneGeometry {
    pub fn center(&self, lane: usize) -> f64 {
        self.width * lane as f64
    }

    /// Nearest lane index for a lateral position, clamped to the road.
    pub fn lane_of(&self, y: f64) -> usize {
        let l = math::round(y / self.width);
        if l <= 0.0 {
            0
        } else {
            (l as usize).min(self.n_lanes - 1)
        }
    }

    pub fn max_lane(&self) -> usize {
        self.n_lanes - 1
    }
}

/// The five planner actions, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerAction {
    Faster,
    Slower,
    LaneLeft,
    LaneRight,
    Idle,
}

impl PlannerAction {
    pub const ALL: [PlannerAction; 5] = [
        PlannerAction::Faster,
        PlannerAction::Slower,
        PlannerAction::LaneLeft,
        PlannerAction::LaneRight,
        PlannerAction::Idle,
    ];
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    core::f64::consts::PI - math::rem_euclid(core::f64::consts::PI - theta, core::f64::consts::TAU)
}

fn car_derivs(state: &[f64; 4], w: &CarControl, wheelbase: f64) -> [f64; 4] {
    let (theta, v) = (state[2], state[3]);
    [
        v * math::cos(theta),
        v * math::sin(theta),
        v * math::tan(w.delta) / wheelbase,
        w.a,
    ]
}

/// One RK4 step of the dynamically extended simple car.
///
/// Speed is clamped at zero from below after the step and the heading is
/// renormalized.
pub fn step_car(z: &CarState, w: &CarControl, dt: f64, wheelbase: f64) -> CarState {
    let y0 = [z.px, z.py, z.theta, z.v];
    let k1 = car_derivs(&y0, w, wheelbase);
    let mut y = [0.0; 4];
    for i in 0..4 {
        y[i] = y0[i] + 0.5 * dt * k1[i];
    }
    let k2 = car_derivs(&y, w, wheelbase);
    for i in 0..4 {
        y[i] = y0[i] + 0.5 * dt * k2[i];
    }
    let k3 = car_derivs(&y, w, wheelbase);
    for i in 0..4 {
        y[i] = y0[i] + dt * k3[i];
    }
    let k4 = car_derivs(&y, w, wheelbase);
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    CarState {
        px: out[0],
        py: out[1],
        theta: normalize_angle(out[2]),
        v: out[3].max(0.0),
    }
}

/// Relative state of the pair: positional difference in the inertial frame,
/// robot heading, both speeds.
pub fn relative_state(z_r: &CarState, z_o: &CarState) -> RelativeState {
    RelativeState {
        px_rel: z_r.px - z_o.px,
        py_rel: z_r.py - z_o.py,
        theta_r: z_r.theta,
        v_r: z_r.v,
        v_o: z_o.v,
    }
}

/// Apply one planner action over `dt_plan` seconds.
///
/// Velocity actions step by 1 m/s within `[v_min, v_max]`, lane actions step
/// by one lane within the road, and the longitudinal position advances with
/// the pre-action velocity.
pub fn planner_transition(
    x: &PlannerState,
    action: PlannerAction,
    dt_plan: f64,
    v_min: f64,
    v_max: f64,
    lanes: &LaneGeometry,
) -> PlannerState {
    let s = x.s + x.v * dt_plan;
    let (lane, v) = match action {
        PlannerAction::Faster => (x.lane, (x.v + 1.0).min(v_max)),
        PlannerAction::Slower => (x.lane, (x.v - 1.0).max(v_min)),
        PlannerAction::LaneLeft => ((x.lane + 1).min(lanes.max_lane()), x.v),
        PlannerAction::LaneRight => (x.lane.saturating_sub(1), x.v),
        PlannerAction::Idle => (x.lane, x.v),
    };
    PlannerState { s, lane, v }
}

/// Closed-loop tracking law toward a planner state: steering from heading
/// plus lateral error, acceleration proportional to the speed error.
///
/// The arcsin argument saturates at +/-1 and speeds below [`V_FLOOR`] are
/// floored for the divisions. The returned command is the raw control law
/// output; actuator clamping happens where the command is applied.
pub fn tracking_control(
    z_r: &CarState,
    target: &PlannerState,
    gains: &TrackingGains,
    wheelbase: f64,
    lanes: &LaneGeometry,
) -> CarControl {
    let v = z_r.v.max(V_FLOOR);
    // Signed lateral offset from the target centerline, left positive.
    let dl = z_r.py - lanes.center(target.lane);
    let arg = (gains.k1 * dl / v).clamp(-1.0, 1.0);
    let delta = math::atan(-wheelbase * gains.k_theta / v * (z_r.theta + math::asin(arg)));
    let a = gains.k2 * (target.v - z_r.v);
    CarControl { delta, a }
}

/// Steering angle realizing a commanded yaw rate at the current speed.
pub fn omega_to_delta(omega: f64, v: f64, wheelbase: f64) -> f64 {
    math::atan(omega * wheelbase / v.max(V_FLOOR))
}

/// Yaw rate produced by a steering angle at the current speed.
pub fn delta_to_omega(delta: f64, v: f64, wheelbase: f64) -> f64 {
    v.max(V_FLOOR) * math::tan(delta) / wheelbase
}
