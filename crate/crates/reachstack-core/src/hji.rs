//! Pairwise robot/other-car reachability.
//!
//! The pair is described by the 5D relative state
//! `(px_rel, py_rel, theta_r, v_r, v_o)`: the robot steers with a yaw rate
//! and accelerates, the other car picks its heading and acceleration
//! directly (a deliberately more agile adversary). The target set is the
//! RSS-unsafe region: relative positions where both the longitudinal and the
//! lateral safe distances are violated. Marching the frozen HJI PDE backward
//! yields a value table whose zero sublevel set is the avoid tube; online
//! queries read the interpolated value and gradient to derive the optimal
//! evasion, the worst-case disturbance, and the affine safety constraint
//! passed to the runtime controller.

use crate::grid::{GridError, GridSpec, NodeGradients, ValueTable};
use crate::math;
use crate::safety::SafetyConstraint;
use crate::solver::{march_brt, BrtSolution, HjiDynamics, SolverConfig, SolverError};
use crate::vehicle::RelativeState;

/// Input bounds of the relative dynamics: robot yaw rate and acceleration,
/// other car acceleration and heading.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RelDynamicsBounds {
    pub omega_r_min: f64,
    pub omega_r_max: f64,
    pub a_r_min: f64,
    pub a_r_max: f64,
    pub a_o_min: f64,
    pub a_o_max: f64,
    pub theta_o_min: f64,
    pub theta_o_max: f64,
}

impl Default for RelDynamicsBounds {
    fn default() -> Self {
        RelDynamicsBounds {
            omega_r_min: -0.3,
            omega_r_max: 0.3,
            a_r_min: -5.0,
            a_r_max: 5.0,
            a_o_min: -6.0,
            a_o_max: 6.0,
            theta_o_min: -0.15,
            theta_o_max: 0.15,
        }
    }
}

impl RelDynamicsBounds {
    pub fn validate(&self) -> Result<(), GridError> {
        let ok = self.omega_r_min < self.omega_r_max
            && self.a_r_min < self.a_r_max
            && self.a_o_min < self.a_o_max
            && self.theta_o_min < self.theta_o_max
            && self.theta_o_min > -core::f64::consts::FRAC_PI_2
            && self.theta_o_max < core::f64::consts::FRAC_PI_2;
        if ok {
            Ok(())
        } else {
            Err(GridError::InvalidSpec(alloc::string::String::from(
                "dynamics bounds must satisfy min < max, |theta_o| < pi/2",
            )))
        }
    }
}

/// Responsibility-sensitive-safety parameters shared by the target set and
/// the RSS baseline controller.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RSSParams {
    /// Response time rho, seconds.
    pub response_time: f64,
    /// Worst-case rear-car acceleration during the response time.
    pub max_accel: f64,
    /// Weakest braking the rear car is assumed to achieve.
    pub min_brake: f64,
    /// Strongest braking the front car may apply.
    pub max_brake: f64,
    /// Lateral braking capability.
    pub lateral_accel: f64,
    /// Minimum lateral fluctuation margin, meters.
    pub lateral_mu: f64,
    pub car_length: f64,
    pub car_width: f64,
}

impl Default for RSSParams {
    fn default() -> Self {
        RSSParams {
            response_time: 0.5,
            max_accel: 5.0,
            min_brake: 4.0,
            max_brake: 8.0,
            lateral_accel: 1.0,
            lateral_mu: 0.5,
            car_length: 5.0,
            car_width: 2.0,
        }
    }
}

impl RSSParams {
    pub fn validate(&self) -> Result<(), GridError> {
        let fields = [
            self.response_time,
            self.max_accel,
            self.min_brake,
            self.max_brake,
            self.lateral_accel,
            self.lateral_mu,
            self.car_length,
            self.car_width,
        ];
        if fields.iter().all(|v| *v > 0.0) && self.min_brake <= self.max_brake {
            Ok(())
        } else {
            Err(GridError::InvalidSpec(alloc::string::String::from(
                "RSS parameters must be positive with min_brake <= max_brake",
            )))
        }
    }
}

/// Longitudinal RSS distance, center to center.
///
/// Distance consumed if the front car brakes at `max_brake` while the rear
/// car accelerates at `max_accel` through the response time and then brakes
/// at only `min_brake`; clamped at zero and padded with the car length.
/// Nondecreasing in the rear speed, nonincreasing in the front speed.
pub fn rss_longitudinal_distance(v_rear: f64, v_front: f64, p: &RSSParams) -> f64 {
    let vr = v_rear.max(0.0);
    let vf = v_front.max(0.0);
    let rho = p.response_time;
    let v_resp = vr + rho * p.max_accel;
    let raw = vr * rho + 0.5 * p.max_accel * rho * rho + v_resp * v_resp / (2.0 * p.min_brake)
        - vf * vf / (2.0 * p.max_brake);
    p.car_length + raw.max(0.0)
}

/// Lateral distance a car closing at `w_toward` needs before it can null its
/// lateral speed: response time at the current rate plus the braking arc.
/// Receding motion contributes nothing.
fn lateral_penetration(w_toward: f64, p: &RSSParams) -> f64 {
    let w = w_toward.max(0.0);
    w * p.response_time + w * w / (2.0 * p.lateral_accel)
}

/// Lateral RSS distance, center to center, for the left car (larger y) and
/// right car moving with the given signed lateral velocities (+y positive).
///
/// Always at least `car_width + lateral_mu`; symmetric under mirroring the
/// scene (swap the cars and negate both velocities).
pub fn rss_lateral_distance(v_lat_left: f64, v_lat_right: f64, p: &RSSParams) -> f64 {
    p.car_width
        + p.lateral_mu
        + lateral_penetration(-v_lat_left, p)
        + lateral_penetration(v_lat_right, p)
}

/// Terminal condition of the tube solve: negative exactly when both the
/// longitudinal and the lateral RSS distances are violated.
///
/// The longitudinal distance takes rear/front roles from the sign of
/// `px_rel`; the lateral one uses the robot's lateral speed implied by
/// `theta_r`, the other car's lateral speed is zero at the terminal instant.
pub fn terminal_value(x: &RelativeState, p: &RSSParams) -> f64 {
    let d_long = if x.px_rel > 0.0 {
        // Robot in front, the other car is the rear car.
        rss_longitudinal_distance(x.v_o, x.v_r, p)
    } else {
        rss_longitudinal_distance(x.v_r, x.v_o, p)
    };
    let v_lat = x.v_r * math::sin(x.theta_r);
    let toward = if x.py_rel > 0.0 {
        -v_lat
    } else if x.py_rel < 0.0 {
        v_lat
    } else {
        math::abs(v_lat)
    };
    let d_lat = p.car_width + p.lateral_mu + lateral_penetration(toward, p);
    let long_term = math::abs(x.px_rel) - d_long;
    let lat_gap = math::abs(x.py_rel) - d_lat;
    long_term.max(4.0 * lat_gap * lat_gap * lat_gap)
}

/// Relative dynamics right-hand side under explicit inputs.
pub fn relative_dynamics(
    x: &RelativeState,
    omega_r: f64,
    a_r: f64,
    theta_o: f64,
    a_o: f64,
) -> [f64; 5] {
    [
        x.v_r * math::cos(x.theta_r) - x.v_o * math::cos(theta_o),
        x.v_r * math::sin(x.theta_r) - x.v_o * math::sin(theta_o),
        omega_r,
        a_r,
        a_o,
    ]
}

/// Minimum of `a cos(t) + b sin(t)` over `t in [lo, hi]` with interval width
/// below pi: an endpoint, or `-|(a,b)|` when the opposite direction of
/// `(a, b)` (the interior stationary angle `atan2(-b, -a)`) lies inside.
fn min_heading_term(a: f64, b: f64, trig: &IntervalTrig) -> f64 {
    let f_lo = a * trig.cos_lo + b * trig.sin_lo;
    let f_hi = a * trig.cos_hi + b * trig.sin_hi;
    let mut m = f_lo.min(f_hi);
    let mx = -a;
    let my = -b;
    let cross_lo = trig.cos_lo * my - trig.sin_lo * mx;
    let cross_hi = mx * trig.sin_hi - my * trig.cos_hi;
    if cross_lo >= 0.0 && cross_hi >= 0.0 {
        m = m.min(-math::hypot(a, b));
    }
    m
}

#[derive(Debug, Clone, Copy)]
struct IntervalTrig {
    cos_lo: f64,
    sin_lo: f64,
    cos_hi: f64,
    sin_hi: f64,
}

impl IntervalTrig {
    fn new(lo: f64, hi: f64) -> Self {
        IntervalTrig {
            cos_lo: math::cos(lo),
            sin_lo: math::sin(lo),
            cos_hi: math::cos(hi),
            sin_hi: math::sin(hi),
        }
    }
}

fn max_abs_cos(lo: f64, hi: f64) -> f64 {
    // |cos| peaks at multiples of pi.
    let k = math::floor(lo / core::f64::consts::PI) + 1.0;
    if k * core::f64::consts::PI <= hi || lo <= 0.0 && hi >= 0.0 {
        1.0
    } else {
        math::abs(math::cos(lo)).max(math::abs(math::cos(hi)))
    }
}

fn max_abs_sin(lo: f64, hi: f64) -> f64 {
    let half = core::f64::consts::FRAC_PI_2;
    let k = math::floor((lo - half) / core::f64::consts::PI) + 1.0;
    if k * core::f64::consts::PI + half <= hi {
        1.0
    } else {
        math::abs(math::sin(lo)).max(math::abs(math::sin(hi)))
    }
}

/// The pairwise relative system as a differential game for the tube solver.
#[derive(Debug, Clone)]
pub struct RelativePairDynamics {
    bounds: RelDynamicsBounds,
    theta_o_trig: IntervalTrig,
}

impl RelativePairDynamics {
    pub fn new(bounds: RelDynamicsBounds) -> Result<Self, GridError> {
        bounds.validate()?;
        Ok(RelativePairDynamics {
            theta_o_trig: IntervalTrig::new(bounds.theta_o_min, bounds.theta_o_max),
            bounds,
        })
    }

    pub fn bounds(&self) -> &RelDynamicsBounds {
        &self.bounds
    }

    /// Control-independent terms: robot positional drift plus the
    /// disturbance-minimized contribution (`c1 + c2`).
    fn constant_terms(&self, theta_r: f64, v_r: f64, v_o: f64, costate: &[f64]) -> f64 {
        let c2 = costate[0] * v_r * math::cos(theta_r) + costate[1] * v_r * math::sin(theta_r);
        let c1_accel = (costate[4] * self.bounds.a_o_min).min(costate[4] * self.bounds.a_o_max);
        let c1_heading = min_heading_term(-costate[0] * v_o, -costate[1] * v_o, &self.theta_o_trig);
        c2 + c1_accel + c1_heading
    }
}

impl HjiDynamics for RelativePairDynamics {
    fn dim(&self) -> usize {
        5
    }

    /// Analytic `max_u min_d costate . f`: bang-bang in the robot inputs and
    /// the other car's acceleration, endpoint-or-stationary in its heading.
    fn hamiltonian(&self, x: &[f64], costate: &[f64]) -> f64 {
        let robot_turn =
            (costate[2] * self.bounds.omega_r_max).max(costate[2] * self.bounds.omega_r_min);
        let robot_accel =
            (costate[3] * self.bounds.a_r_max).max(costate[3] * self.bounds.a_r_min);
        self.constant_terms(x[2], x[3], x[4], costate) + robot_turn + robot_accel
    }

    fn costate_coefficient_bound(&self, grid: &GridSpec, d: usize) -> f64 {
        let b = &self.bounds;
        let v_r_max = math::abs(grid.lower()[3]).max(math::abs(grid.upper()[3]));
        let v_o_max = math::abs(grid.lower()[4]).max(math::abs(grid.upper()[4]));
        match d {
            0 => {
                v_r_max * max_abs_cos(grid.lower()[2], grid.upper()[2])
                    + v_o_max * max_abs_cos(b.theta_o_min, b.theta_o_max)
            }
            1 => {
                v_r_max * max_abs_sin(grid.lower()[2], grid.upper()[2])
                    + v_o_max * max_abs_sin(b.theta_o_min, b.theta_o_max)
            }
            2 => math::abs(b.omega_r_min).max(math::abs(b.omega_r_max)),
            3 => math::abs(b.a_r_min).max(math::abs(b.a_r_max)),
            _ => math::abs(b.a_o_min).max(math::abs(b.a_o_max)),
        }
    }
}

/// Analytic Hamiltonian of the pairwise game at an explicit state/costate.
pub fn hamiltonian(x: &RelativeState, costate: &[f64; 5], b: &RelDynamicsBounds) -> f64 {
    let dynamics = RelativePairDynamics::new(*b).expect("invalid bounds");
    HjiDynamics::hamiltonian(&dynamics, &x.as_array(), costate)
}

/// Default grid for the pairwise value function. Spans the RSS distances at
/// highway speeds; far-out queries clamp to the boundary values.
pub fn default_grid() -> GridSpec {
    GridSpec::new(
        alloc::vec![-60.0, -12.0, -core::f64::consts::FRAC_PI_4, 10.0, 10.0],
        alloc::vec![60.0, 12.0, core::f64::consts::FRAC_PI_4, 32.0, 32.0],
        alloc::vec![61, 41, 15, 12, 12],
        alloc::vec![false; 5],
    )
    .expect("default grid is valid")
}

/// Solve the pairwise backward reachable tube; returns the value function at
/// the configured horizon.
pub fn solve_brt(
    bounds: &RelDynamicsBounds,
    rss: &RSSParams,
    grid: &GridSpec,
    cfg: &SolverConfig,
) -> Result<ValueTable, SolverError> {
    solve_brt_solution(bounds, rss, grid, cfg).map(|s| s.table)
}

/// Same as [`solve_brt`] but keeps the whole marching result (snapshots,
/// step size, dissipation) for diagnostics.
pub fn solve_brt_solution(
    bounds: &RelDynamicsBounds,
    rss: &RSSParams,
    grid: &GridSpec,
    cfg: &SolverConfig,
) -> Result<BrtSolution, SolverError> {
    rss.validate()?;
    let dynamics = RelativePairDynamics::new(*bounds)?;
    let terminal = |x: &[f64]| terminal_value(&RelativeState::from_array([x[0], x[1], x[2], x[3], x[4]]), rss);
    march_brt(&dynamics, terminal, grid, cfg)
}

/// A solved pairwise value table with precomputed node gradients, ready for
/// high-rate online queries. Immutable and safe to share across threads.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    table: ValueTable,
    gradients: NodeGradients,
}

impl ValueFunction {
    pub fn new(table: ValueTable) -> Result<Self, GridError> {
        if table.spec().dim() != 5 {
            return Err(GridError::DimensionMismatch {
                expected: 5,
                got: table.spec().dim(),
            });
        }
        let gradients = table.precompute_gradients();
        Ok(ValueFunction { table, gradients })
    }

    pub fn table(&self) -> &ValueTable {
        &self.table
    }

    pub fn value(&self, x: &RelativeState) -> f64 {
        self.table
            .interpolate(&x.as_array())
            .expect("5D query on 5D table")
    }

    pub fn gradient(&self, x: &RelativeState) -> [f64; 5] {
        let mut g = [0.0f64; 5];
        self.gradients
            .interpolate(&x.as_array(), &mut g)
            .expect("5D query on 5D table");
        g
    }

    /// Largest node spacing, used in discretization-error slack bounds.
    pub fn max_spacing(&self) -> f64 {
        self.table
            .spec()
            .spacing()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Optimal evasive robot input from the interpolated gradient: bang-bang on
/// the gradient signs, zero on exact ties (any input is optimal there).
pub fn optimal_control(
    vf: &ValueFunction,
    x: &RelativeState,
    b: &RelDynamicsBounds,
) -> (f64, f64) {
    let g = vf.gradient(x);
    let omega = if g[2] > 0.0 {
        b.omega_r_max
    } else if g[2] < 0.0 {
        b.omega_r_min
    } else {
        0.0
    };
    let a = if g[3] > 0.0 {
        b.a_r_max
    } else if g[3] < 0.0 {
        b.a_r_min
    } else {
        0.0
    };
    (omega, a)
}

/// Worst-case other-car input `(theta_o, a_o)` at the interpolated gradient.
pub fn optimal_disturbance(
    vf: &ValueFunction,
    x: &RelativeState,
    b: &RelDynamicsBounds,
) -> (f64, f64) {
    let g = vf.gradient(x);
    let a_o = if g[4] > 0.0 {
        b.a_o_min
    } else if g[4] < 0.0 {
        b.a_o_max
    } else {
        0.0
    };
    // Minimize A cos + B sin over the heading interval: endpoints plus the
    // interior stationary angle when it falls inside.
    let a_coef = -g[0] * x.v_o;
    let b_coef = -g[1] * x.v_o;
    let mut best_theta = b.theta_o_min;
    let mut best = f64::INFINITY;
    let stationary = math::atan2(-b_coef, -a_coef);
    let mut candidates = [b.theta_o_min, b.theta_o_max, 0.0];
    let mut n = 2;
    if stationary >= b.theta_o_min && stationary <= b.theta_o_max {
        candidates[2] = stationary;
        n = 3;
    }
    for &theta in &candidates[..n] {
        let v = a_coef * math::cos(theta) + b_coef * math::sin(theta);
        if v < best {
            best = v;
            best_theta = theta;
        }
    }
    (best_theta, a_o)
}

/// The affine safety-preserving constraint for one pair at the current
/// relative state: `g_omega * omega_r + g_a * a_r >= -c0`, where `c0`
/// collects the disturbance-minimized and robot drift terms.
pub fn safe_halfplane(
    vf: &ValueFunction,
    x: &RelativeState,
    b: &RelDynamicsBounds,
    pair_id: usize,
) -> SafetyConstraint {
    let g = vf.gradient(x);
    let dynamics = RelativePairDynamics::new(*b).expect("invalid bounds");
    let c0 = dynamics.constant_terms(x.theta_r, x.v_r, x.v_o, &g);
    SafetyConstraint {
        g_omega: g[2],
        g_a: g[3],
        c0,
        pair_id,
    }
}
