//! Optimistic planning over the highway MDP.
//!
//! The planner works on the abstracted state (longitudinal position, lane
//! index, velocity) at 1 Hz. Other cars are rolled out with mean-parameter
//! IDM/MOBIL behavior: the planner does not know the sampled per-driver
//! parameters, which is the deliberate model mismatch of the setup. The
//! reward blends the driving objective (speed, leftmost lane, no collision)
//! with the minimum pairwise reachability value, so a safety-aware
//! configuration plans around states of possible inevitable collision.

use alloc::vec::Vec;

use crate::hji::ValueFunction;
use crate::traffic::{idm_accel, mobil_decide, IDMParams, LaneContext, LaneDecision, MOBILParams, Neighbor};
use crate::vehicle::{planner_transition, LaneGeometry, PlannerAction, PlannerState, RelativeState};

/// Reward blending and bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardWeights {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Blend between the driving reward (1.0) and the reachability term (0.0).
    pub gamma_r: f64,
    /// Discount per planner step.
    pub discount: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            gamma1: 0.4,
            gamma2: 1.0,
            gamma3: 1.0,
            v_min: 15.0,
            v_max: 30.0,
            gamma_r: 0.9,
            discount: 0.9,
        }
    }
}

/// Reachability reward of an empty pair set: no agents in scope is maximally
/// safe, the constant keeps the blended reward defined.
pub const EMPTY_HJI_REWARD: f64 = 5.0;

/// One other car in the planner's abstraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerAgent {
    pub s: f64,
    pub lane: usize,
    pub v: f64,
}

/// Joint planner state: the robot plus every other car.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerWorld {
    pub robot: PlannerState,
    pub others: Vec<PlannerAgent>,
}

/// Driving reward: normalized speed, preference for the leftmost lane, and a
/// collision penalty from axis-aligned rectangle overlap at planner
/// resolution.
pub fn reward(
    robot: &PlannerState,
    others: &[PlannerAgent],
    w: &RewardWeights,
    lanes: &LaneGeometry,
    car_length: f64,
    car_width: f64,
) -> f64 {
    let speed = if w.v_max > w.v_min {
        w.gamma1 * (robot.v - w.v_min) / (w.v_max - w.v_min)
    } else {
        0.0
    };
    let lane = if lanes.max_lane() > 0 {
        w.gamma2 * robot.lane as f64 / lanes.max_lane() as f64
    } else {
        0.0
    };
    let crash = if planner_collision(robot, others, lanes, car_length, car_width) {
        w.gamma3
    } else {
        0.0
    };
    speed + lane - crash
}

/// Axis-aligned overlap test in the planner abstraction.
pub fn planner_collision(
    robot: &PlannerState,
    others: &[PlannerAgent],
    lanes: &LaneGeometry,
    car_length: f64,
    car_width: f64,
) -> bool {
    let y_r = lanes.center(robot.lane);
    others.iter().any(|o| {
        (robot.s - o.s).abs() < car_length && (y_r - lanes.center(o.lane)).abs() < car_width
    })
}

/// Minimum pairwise value over the supplied relative states; the empty set
/// maps to [`EMPTY_HJI_REWARD`].
pub fn hji_reward(rels: &[RelativeState], vf: &ValueFunction) -> f64 {
    let min = rels
        .iter()
        .map(|r| vf.value(r))
        .fold(f64::INFINITY, f64::min);
    if min.is_finite() {
        min
    } else {
        EMPTY_HJI_REWARD
    }
}

/// Convex blend of the driving and reachability rewards.
pub fn total_reward(r: f64, r_hji: f64, gamma_r: f64) -> f64 {
    gamma_r * r + (1.0 - gamma_r) * r_hji
}

/// Generative model used by the tree search.
pub struct PlannerModel<'a> {
    pub weights: RewardWeights,
    pub idm: IDMParams,
    pub mobil: MOBILParams,
    pub lanes: LaneGeometry,
    pub car_length: f64,
    pub car_width: f64,
    pub dt_plan: f64,
    /// Pairwise value function; required whenever `gamma_r < 1`.
    pub value_function: Option<&'a ValueFunction>,
    /// Only this many nearest agents enter the reachability term.
    pub max_agents: usize,
}

impl<'a> PlannerModel<'a> {
    /// Advance the joint state by one planner action and return the blended
    /// reward of the successor state.
    pub fn step(&self, world: &PlannerWorld, action: PlannerAction) -> (PlannerWorld, f64) {
        let robot = planner_transition(
            &world.robot,
            action,
            self.dt_plan,
            self.weights.v_min,
            self.weights.v_max,
            &self.lanes,
        );

        // Other cars behave with mean parameters, reacting to the robot's
        // pre-transition position; decisions are simultaneous.
        let mut others = world.others.clone();
        for i in 0..others.len() {
            let me = world.others[i];
            let current = self.lane_context(world, i, me.lane);
            let mut lane = me.lane;
            if lane + 1 <= self.lanes.max_lane() {
                let target = self.lane_context(world, i, lane + 1);
                if mobil_decide(me.v, &current, &target, self.car_length, &self.idm, &self.mobil)
                    == LaneDecision::Change
                {
                    lane += 1;
                }
            }
            if lane == me.lane && lane > 0 {
                let target = self.lane_context(world, i, lane - 1);
                if mobil_decide(me.v, &current, &target, self.car_length, &self.idm, &self.mobil)
                    == LaneDecision::Change
                {
                    lane -= 1;
                }
            }
            let accel = match current.leader {
                Some(lead) => idm_accel(me.v, lead.gap, lead.v, &self.idm),
                None => idm_accel(me.v, f64::INFINITY, 0.0, &self.idm),
            };
            let dt = self.dt_plan;
            others[i] = PlannerAgent {
                s: me.s + me.v * dt + 0.5 * accel * dt * dt,
                lane,
                v: (me.v + accel * dt).max(0.0),
            };
        }

        let next = PlannerWorld { robot, others };
        let r = reward(
            &next.robot,
            &next.others,
            &self.weights,
            &self.lanes,
            self.car_length,
            self.car_width,
        );
        let total = if self.weights.gamma_r >= 1.0 {
            r
        } else {
            let vf = self
                .value_function
                .expect("gamma_r < 1 requires a value function");
            let rels = self.nearest_relative_states(&next);
            total_reward(r, hji_reward(&rels, vf), self.weights.gamma_r)
        };
        (next, total)
    }

    /// Relative states of the nearest agents by longitudinal distance.
    pub fn nearest_relative_states(&self, world: &PlannerWorld) -> Vec<RelativeState> {
        let mut order: Vec<usize> = (0..world.others.len()).collect();
        order.sort_unstable_by(|&a, &b| {
            let da = (world.others[a].s - world.robot.s).abs();
            let db = (world.others[b].s - world.robot.s).abs();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        order
            .iter()
            .take(self.max_agents)
            .map(|&i| {
                let o = &world.others[i];
                RelativeState {
                    px_rel: world.robot.s - o.s,
                    py_rel: self.lanes.center(world.robot.lane) - self.lanes.center(o.lane),
                    theta_r: 0.0,
                    v_r: world.robot.v,
                    v_o: o.v,
                }
            })
            .collect()
    }

    /// Leader/follower of agent `i` if it drove in `lane`; the robot counts
    /// as traffic too.
    fn lane_context(&self, world: &PlannerWorld, i: usize, lane: usize) -> LaneContext {
        let me = world.others[i];
        let mut leader: Option<Neighbor> = None;
        let mut follower: Option<Neighbor> = None;
        let mut consider = |s: f64, v: f64| {
            let gap = (s - me.s).abs() - self.car_length;
            if s >= me.s {
                if leader.map_or(true, |l| gap < l.gap) {
                    leader = Some(Neighbor { gap, v });
                }
            } else if follower.map_or(true, |f| gap < f.gap) {
                follower = Some(Neighbor { gap, v });
            }
        };
        for (j, o) in world.others.iter().enumerate() {
            if j != i && o.lane == lane {
                consider(o.s, o.v);
            }
        }
        if world.robot.lane == lane {
            consider(world.robot.s, world.robot.v);
        }
        LaneContext { leader, follower }
    }
}

struct SearchNode {
    world: PlannerWorld,
    parent: usize,
    action: PlannerAction,
    depth: usize,
    /// Accumulated discounted reward along the path.
    value: f64,
    /// Optimistic bound: value plus the discounted tail.
    b_value: f64,
    expanded: bool,
}

/// Optimistic planning: repeatedly expand the unexpanded node with the
/// highest optimistic bound, then return the action sequence to the best
/// leaf (highest accumulated reward; deeper and earlier-created leaves win
/// ties, which realizes lowest-action-index tie-breaking).
pub fn op_plan(
    model: &PlannerModel<'_>,
    root: &PlannerWorld,
    budget: usize,
    horizon: usize,
) -> Vec<PlannerAction> {
    let discount = model.weights.discount;
    let tail = |depth: usize| crate::math::powf(discount, depth as f64) / (1.0 - discount);

    let mut arena: Vec<SearchNode> = Vec::new();
    arena.push(SearchNode {
        world: root.clone(),
        parent: usize::MAX,
        action: PlannerAction::Idle,
        depth: 0,
        value: 0.0,
        b_value: tail(0),
        expanded: false,
    });

    for _ in 0..budget {
        // Leaf with the highest optimistic bound; first occurrence wins,
        // which is creation order and hence lexicographic in action indices.
        let mut best: Option<usize> = None;
        for (i, n) in arena.iter().enumerate() {
            if !n.expanded && n.depth < horizon {
                if best.map_or(true, |b| n.b_value > arena[b].b_value) {
                    best = Some(i);
                }
            }
        }
        let Some(node_i) = best else { break };
        arena[node_i].expanded = true;
        let depth = arena[node_i].depth;
        let base_value = arena[node_i].value;
        let gamma_pow = crate::math::powf(discount, depth as f64);
        for action in PlannerAction::ALL {
            let (world, r) = model.step(&arena[node_i].world, action);
            let value = base_value + gamma_pow * r;
            arena.push(SearchNode {
                world,
                parent: node_i,
                action,
                depth: depth + 1,
                value,
                b_value: value + tail(depth + 1),
                expanded: false,
            });
        }
    }

    // Best leaf: maximize accumulated reward, prefer deeper, then earliest
    // created.
    let mut best = 0usize;
    for (i, n) in arena.iter().enumerate() {
        if n.expanded {
            continue;
        }
        let b = &arena[best];
        let better = n.value > b.value || (n.value == b.value && n.depth > b.depth);
        if better || arena[best].expanded {
            best = i;
        }
    }

    let mut actions = Vec::new();
    let mut i = best;
    while arena[i].parent != usize::MAX {
        actions.push(arena[i].action);
        i = arena[i].parent;
    }
    actions.reverse();
    actions.resize(horizon, PlannerAction::Idle);
    actions
}
