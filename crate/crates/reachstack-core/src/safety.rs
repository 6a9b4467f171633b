//! Runtime safety layer.
//!
//! Near-violating pairs (value below the activation threshold) each
//! contribute one affine constraint on the robot input `(omega_r, a_r)`.
//! The controller then solves a small convex program: stay close to the
//! desired input, subject to every constraint, with a shared slack variable
//! that keeps the problem feasible and spreads any unavoidable violation
//! equally over the pairs. Two schemes exist: minimally interventional (MI)
//! tracks the desired input, switching (SW) drops the acceleration tracking
//! term and biases the steering toward its previous value. An RSS
//! proper-response baseline replaces the reachability constraints with box
//! constraints derived from the RSS safe distances.
//!
//! The program has two inputs plus one epigraph variable, so it is solved
//! exactly by enumerating active sets with closed-form KKT solves; no
//! iterative solver is involved.

use alloc::vec::Vec;

use crate::hji::{rss_lateral_distance, rss_longitudinal_distance, safe_halfplane, RSSParams, RelDynamicsBounds, ValueFunction};
use crate::math;
use crate::vehicle::{delta_to_omega, omega_to_delta, CarControl, CarState, RelativeState, MAX_STEER, V_FLOOR};

/// One affine safety constraint in `(omega_r, a_r)` space for a near-violating
/// pair: `g_omega * omega_r + g_a * a_r >= -c0`, slack permitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyConstraint {
    /// Value-gradient component along the robot heading state.
    pub g_omega: f64,
    /// Value-gradient component along the robot speed state.
    pub g_a: f64,
    /// Control-independent part: disturbance-minimized term plus robot drift.
    pub c0: f64,
    /// Index of the agent this pair refers to.
    pub pair_id: usize,
}

/// MI keeps slacks nonnegative; SW lets them go negative (maximizing the
/// worst constraint margin) and ignores the acceleration tracking term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Scheme {
    Mi,
    Sw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SafetyControllerConfig {
    /// Activation threshold on the pairwise value.
    pub epsilon: f64,
    pub scheme: Scheme,
    /// Steering deviation weight; the reference scaling is
    /// `omega_max^-2`.
    pub lambda1: f64,
    /// Acceleration deviation weight (`a_max^-2`); forced to zero in SW.
    pub lambda2: f64,
    /// Slack weight.
    pub lambda3: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl SafetyControllerConfig {
    pub fn from_bounds(bounds: &RelDynamicsBounds, scheme: Scheme) -> Self {
        SafetyControllerConfig {
            epsilon: 0.5,
            scheme,
            lambda1: 1.0 / (bounds.omega_r_max * bounds.omega_r_max),
            lambda2: 1.0 / (bounds.a_r_max * bounds.a_r_max),
            lambda3: 1.0,
            omega_min: bounds.omega_r_min,
            omega_max: bounds.omega_r_max,
            a_min: bounds.a_r_min,
            a_max: bounds.a_r_max,
        }
    }
}

impl Default for SafetyControllerConfig {
    fn default() -> Self {
        SafetyControllerConfig::from_bounds(&RelDynamicsBounds::default(), Scheme::Mi)
    }
}

/// Indices of pairs whose value is at or below the activation threshold.
pub fn active_set(values: &[f64], epsilon: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= epsilon)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSolution {
    pub omega: f64,
    pub a: f64,
    /// `max_k eta_k` at the optimum; nonnegative in MI, signed in SW.
    pub max_slack: f64,
    pub objective: f64,
}

/// Linear rows `a . x >= b` over `x = (omega, a, t)`.
#[derive(Debug, Clone, Copy)]
struct Row {
    a: [f64; 3],
    b: f64,
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear(mut m: [[f64; 6]; 6], mut rhs: [f64; 6], n: usize) -> Option<[f64; 6]> {
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if math::abs(m[r][col]) > math::abs(m[pivot][col]) {
                pivot = r;
            }
        }
        if math::abs(m[pivot][col]) < 1e-11 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = [0.0f64; 6];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for c in col + 1..n {
            acc -= m[col][c] * x[c];
        }
        x[col] = acc / m[col][col];
    }
    Some(x)
}

struct Program<'a> {
    constraints: &'a [SafetyConstraint],
    rows: Vec<Row>,
    lambda: [f64; 3],
    desired: (f64, f64),
    mi: bool,
}

impl<'a> Program<'a> {
    /// Slack actually needed at an input point.
    fn needed_slack(&self, omega: f64, a: f64) -> f64 {
        let worst = self
            .constraints
            .iter()
            .map(|c| -c.c0 - c.g_omega * omega - c.g_a * a)
            .fold(f64::NEG_INFINITY, f64::max);
        if self.mi {
            worst.max(0.0)
        } else {
            worst
        }
    }

    fn objective(&self, omega: f64, a: f64) -> f64 {
        let d_omega = omega - self.desired.0;
        let d_a = a - self.desired.1;
        self.lambda[0] * d_omega * d_omega
            + self.lambda[1] * d_a * d_a
            + self.lambda[2] * self.needed_slack(omega, a)
    }

    fn feasible(&self, x: &[f64; 6]) -> bool {
        self.rows.iter().all(|row| {
            let lhs = row.a[0] * x[0] + row.a[1] * x[1] + row.a[2] * x[2];
            lhs >= row.b - 1e-7 * (1.0 + math::abs(row.b))
        })
    }

    /// Solve the equality-constrained KKT system for one active subset.
    fn kkt(&self, subset: &[usize]) -> Option<[f64; 6]> {
        let k = subset.len();
        let n = 3 + k;
        let mut m = [[0.0f64; 6]; 6];
        let mut rhs = [0.0f64; 6];
        // Stationarity: P x - A_S^T mu = -q.
        m[0][0] = 2.0 * self.lambda[0];
        m[1][1] = 2.0 * self.lambda[1];
        rhs[0] = 2.0 * self.lambda[0] * self.desired.0;
        rhs[1] = 2.0 * self.lambda[1] * self.desired.1;
        rhs[2] = -self.lambda[2];
        for (j, &si) in subset.iter().enumerate() {
            let row = &self.rows[si];
            for d in 0..3 {
                m[d][3 + j] = -row.a[d];
            }
            // Active constraint: a . x = b.
            for d in 0..3 {
                m[3 + j][d] = row.a[d];
            }
            rhs[3 + j] = row.b;
        }
        solve_linear(m, rhs, n)
    }
}

/// Exact global solution of the safety program by exhaustive active-set
/// enumeration. The empty constraint list returns the desired input clamped
/// to the bounds with zero slack.
pub fn solve_safety_qp(
    constraints: &[SafetyConstraint],
    desired: (f64, f64),
    cfg: &SafetyControllerConfig,
) -> QpSolution {
    let clamp_omega = |w: f64| w.clamp(cfg.omega_min, cfg.omega_max);
    let clamp_a = |a: f64| a.clamp(cfg.a_min, cfg.a_max);
    if constraints.is_empty() {
        let omega = clamp_omega(desired.0);
        let a = clamp_a(desired.1);
        return QpSolution {
            omega,
            a,
            max_slack: 0.0,
            objective: 0.0,
        };
    }

    let mi = cfg.scheme == Scheme::Mi;
    let lambda = [
        cfg.lambda1,
        if mi { cfg.lambda2 } else { 0.0 },
        cfg.lambda3,
    ];

    let mut rows: Vec<Row> = constraints
        .iter()
        .map(|c| Row {
            a: [c.g_omega, c.g_a, 1.0],
            b: -c.c0,
        })
        .collect();
    if mi {
        rows.push(Row { a: [0.0, 0.0, 1.0], b: 0.0 });
    }
    rows.push(Row { a: [1.0, 0.0, 0.0], b: cfg.omega_min });
    rows.push(Row { a: [-1.0, 0.0, 0.0], b: -cfg.omega_max });
    rows.push(Row { a: [0.0, 1.0, 0.0], b: cfg.a_min });
    rows.push(Row { a: [0.0, -1.0, 0.0], b: -cfg.a_max });

    let prog = Program {
        constraints,
        rows,
        lambda,
        desired,
        mi,
    };

    // Fallback candidate: the clamped desired input is always feasible via
    // slack, which guarantees a bounded in-range answer.
    let mut best_omega = clamp_omega(desired.0);
    let mut best_a = clamp_a(desired.1);
    let mut best_obj = prog.objective(best_omega, best_a);

    let m = prog.rows.len();
    let consider = |x: [f64; 6], prog: &Program<'_>| {
        if !prog.feasible(&x) {
            return None;
        }
        let omega = clamp_omega(x[0]);
        let a = clamp_a(x[1]);
        Some((omega, a, prog.objective(omega, a)))
    };
    let mut subsets: Vec<[usize; 3]> = Vec::new();
    for i in 0..m {
        subsets.push([i, usize::MAX, usize::MAX]);
        for j in i + 1..m {
            subsets.push([i, j, usize::MAX]);
            for k in j + 1..m {
                subsets.push([i, j, k]);
            }
        }
    }
    for s in subsets {
        let len = s.iter().filter(|v| **v != usize::MAX).count();
        if let Some(x) = prog.kkt(&s[..len]) {
            if let Some((omega, a, obj)) = consider(x, &prog) {
                if obj < best_obj - 1e-12 {
                    best_obj = obj;
                    best_omega = omega;
                    best_a = a;
                }
            }
        }
    }

    let omega = best_omega;
    let mut a = best_a;
    let mut slack = prog.needed_slack(omega, a);
    if !mi {
        // The acceleration direction is objective-free in SW; among inputs
        // achieving the optimal (omega, slack), take the least |a|.
        let mut lo = cfg.a_min;
        let mut hi = cfg.a_max;
        for c in constraints {
            let rhs = -c.c0 - c.g_omega * omega - slack;
            if math::abs(c.g_a) < 1e-12 {
                continue;
            }
            if c.g_a > 0.0 {
                lo = lo.max(rhs / c.g_a);
            } else {
                hi = hi.min(rhs / c.g_a);
            }
        }
        if lo <= hi {
            a = 0.0f64.clamp(lo, hi);
        }
        slack = prog.needed_slack(omega, a);
    }

    QpSolution {
        omega,
        a,
        max_slack: slack,
        objective: prog.objective(omega, a),
    }
}

/// Demanded input box accumulated from RSS proper-response rules.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResponseBox {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    base: (f64, f64, f64, f64),
}

impl ResponseBox {
    fn new(cfg: &SafetyControllerConfig) -> Self {
        ResponseBox {
            omega_lo: cfg.omega_min,
            omega_hi: cfg.omega_max,
            a_lo: cfg.a_min,
            a_hi: cfg.a_max,
            base: (cfg.omega_min, cfg.omega_max, cfg.a_min, cfg.a_max),
        }
    }

    /// Resolve per-axis conflicts by meeting in the middle, mirroring the
    /// equal-slack treatment of the reachability program.
    fn relax_empty_axes(&mut self) {
        if self.omega_lo > self.omega_hi {
            let mid = 0.5 * (self.omega_lo + self.omega_hi);
            self.omega_lo = mid;
            self.omega_hi = mid;
        }
        if self.a_lo > self.a_hi {
            let mid = 0.5 * (self.a_lo + self.a_hi);
            self.a_lo = mid;
            self.a_hi = mid;
        }
    }

    fn project(&self, desired: (f64, f64)) -> (f64, f64) {
        (
            desired.0.clamp(self.omega_lo, self.omega_hi),
            desired.1.clamp(self.a_lo, self.a_hi),
        )
    }

    /// The demanded-bound corner: on every tightened axis sit exactly on the
    /// demanded bound (the minimum necessary response), hold otherwise.
    fn conservative_corner(&self) -> (f64, f64) {
        let pick = |lo: f64, hi: f64, base_lo: f64, base_hi: f64| {
            let lo_tight = lo > base_lo;
            let hi_tight = hi < base_hi;
            match (lo_tight, hi_tight) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo,
                (false, true) => hi,
                (false, false) => 0.0f64.clamp(lo, hi),
            }
        };
        (
            pick(self.omega_lo, self.omega_hi, self.base.0, self.base.1),
            pick(self.a_lo, self.a_hi, self.base.2, self.base.3),
        )
    }
}

/// RSS violation test for one pair, with an activation margin in meters.
pub fn rss_pair_violating(x: &RelativeState, rss: &RSSParams, margin: f64) -> bool {
    let d_long = if x.px_rel > 0.0 {
        rss_longitudinal_distance(x.v_o, x.v_r, rss)
    } else {
        rss_longitudinal_distance(x.v_r, x.v_o, rss)
    };
    let v_lat = x.v_r * math::sin(x.theta_r);
    let (left, right) = if x.py_rel > 0.0 {
        // Robot is the left car.
        (v_lat, 0.0)
    } else {
        (0.0, v_lat)
    };
    let d_lat = rss_lateral_distance(left, right, rss);
    math::abs(x.px_rel) < d_long + margin && math::abs(x.py_rel) < d_lat + margin
}

/// RSS proper response over the violating pairs: per-pair box constraints
/// (brake when approaching from the rear, hold speed when in front, steer
/// away or stop steering toward a lateral conflict), intersected and applied
/// as a projection (MI) or as the demanded corner (SW).
pub fn rss_proper_response(
    pairs: &[(usize, RelativeState)],
    violating: &[usize],
    robot_v: f64,
    rss: &RSSParams,
    cfg: &SafetyControllerConfig,
    desired: (f64, f64),
) -> (f64, f64) {
    let mut bx = ResponseBox::new(cfg);
    let v = robot_v.max(V_FLOOR);
    let steer_rate = rss.lateral_accel / v;
    for &idx in violating {
        let x = &pairs[idx].1;
        if x.px_rel < 0.0 {
            // Robot approaching from the rear: brake at least min_brake.
            bx.a_hi = bx.a_hi.min(-rss.min_brake);
        } else if x.px_rel > 0.0 {
            // Robot in front: do not brake into the follower.
            bx.a_lo = bx.a_lo.max(0.0);
        }
        let v_lat = v * math::sin(x.theta_r);
        if x.py_rel < 0.0 {
            // Conflict on the left: stop steering left, counter-steer while
            // still closing.
            let cap = if v_lat > 0.0 { -steer_rate } else { 0.0 };
            bx.omega_hi = bx.omega_hi.min(cap);
        } else if x.py_rel > 0.0 {
            let cap = if v_lat < 0.0 { steer_rate } else { 0.0 };
            bx.omega_lo = bx.omega_lo.max(cap);
        }
    }
    bx.relax_empty_axes();
    match cfg.scheme {
        Scheme::Mi => bx.project(desired),
        Scheme::Sw => bx.conservative_corner(),
    }
}

/// Which constraint source the filter uses.
#[derive(Debug, Clone, Copy)]
pub enum SafetyBackend<'a> {
    /// Reachability constraints from the pairwise value function.
    Spc(&'a ValueFunction),
    /// RSS proper-response boxes.
    Rss,
}

/// Per-robot safety filter; owns the previous yaw-rate memory used by the
/// switching scheme. One instance per simulated robot.
pub struct SafetyFilter<'a> {
    pub backend: SafetyBackend<'a>,
    pub cfg: SafetyControllerConfig,
    pub bounds: RelDynamicsBounds,
    pub rss: RSSParams,
    pub wheelbase: f64,
    omega_prev: f64,
}

impl<'a> SafetyFilter<'a> {
    pub fn new(
        backend: SafetyBackend<'a>,
        cfg: SafetyControllerConfig,
        bounds: RelDynamicsBounds,
        rss: RSSParams,
        wheelbase: f64,
    ) -> Self {
        SafetyFilter {
            backend,
            cfg,
            bounds,
            rss,
            wheelbase,
            omega_prev: 0.0,
        }
    }

    /// Minimum pairwise value at the current state (SPC backend only).
    pub fn min_value(&self, pairs: &[(usize, RelativeState)]) -> Option<f64> {
        match self.backend {
            SafetyBackend::Spc(vf) => pairs
                .iter()
                .map(|(_, x)| vf.value(x))
                .fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |a| a.min(v)))
                }),
            SafetyBackend::Rss => None,
        }
    }

    /// Filter the desired command against the active pairs. Returns the
    /// command to apply and whether the safety controller is active.
    pub fn filter(
        &mut self,
        robot: &CarState,
        pairs: &[(usize, RelativeState)],
        desired: &CarControl,
    ) -> (CarControl, bool) {
        let omega_des = delta_to_omega(desired.delta, robot.v, self.wheelbase);
        let a_des = desired.a;

        let (omega, a, active) = match self.backend {
            SafetyBackend::Spc(vf) => {
                let values: Vec<f64> = pairs.iter().map(|(_, x)| vf.value(x)).collect();
                let active = active_set(&values, self.cfg.epsilon);
                if active.is_empty() {
                    (omega_des, a_des, false)
                } else {
                    let constraints: Vec<SafetyConstraint> = active
                        .iter()
                        .map(|&i| safe_halfplane(vf, &pairs[i].1, &self.bounds, pairs[i].0))
                        .collect();
                    let target = match self.cfg.scheme {
                        Scheme::Mi => (omega_des, a_des),
                        Scheme::Sw => (self.omega_prev, a_des),
                    };
                    let sol = solve_safety_qp(&constraints, target, &self.cfg);
                    (sol.omega, sol.a, true)
                }
            }
            SafetyBackend::Rss => {
                let violating: Vec<usize> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, x))| rss_pair_violating(x, &self.rss, self.cfg.epsilon))
                    .map(|(i, _)| i)
                    .collect();
                if violating.is_empty() {
                    (omega_des, a_des, false)
                } else {
                    let desired_pair = match self.cfg.scheme {
                        Scheme::Mi => (omega_des, a_des),
                        Scheme::Sw => (self.omega_prev, a_des),
                    };
                    let (omega, a) = rss_proper_response(
                        pairs,
                        &violating,
                        robot.v,
                        &self.rss,
                        &self.cfg,
                        desired_pair,
                    );
                    (omega, a, true)
                }
            }
        };

        let control = if active {
            CarControl {
                delta: omega_to_delta(omega, robot.v, self.wheelbase)
                    .clamp(-MAX_STEER, MAX_STEER),
                a: a.clamp(self.cfg.a_min, self.cfg.a_max),
            }
        } else {
            CarControl {
                delta: desired.delta.clamp(-MAX_STEER, MAX_STEER),
                a: a_des.clamp(self.cfg.a_min, self.cfg.a_max),
            }
        };
        self.omega_prev = delta_to_omega(control.delta, robot.v, self.wheelbase);
        (control, active)
    }
}
