//! Seeded closed-loop highway episodes.
//!
//! One episode runs at 50 Hz: the optimistic planner replans at 1 Hz, the
//! tracking controller follows the current plan target, the safety filter
//! (reachability constraints, RSS proper response, or nothing) screens every
//! command, and all cars step forward. Other cars follow per-driver sampled
//! IDM/MOBIL behavior and execute lane changes as fixed-duration lateral
//! ramps. Everything is driven by a single seeded generator with a fixed
//! call order, so identical configs produce identical logs.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hji::{RSSParams, RelDynamicsBounds, ValueFunction};
use crate::metrics::{
    aggregate, btn, stn, ttc_with_critical, AggregateStats, MetricsError, MetricsRecord,
    MovingRect,
};
use crate::geom::{obb_overlap, Obb};
use crate::math;
use crate::planner::{op_plan, PlannerAgent, PlannerModel, PlannerWorld, RewardWeights};
use crate::safety::{SafetyBackend, SafetyControllerConfig, SafetyFilter, Scheme};
use crate::traffic::{idm_accel, mobil_decide, sample_driver_params, DriverPopulation, LaneContext, LaneDecision, Neighbor};
use crate::vehicle::{
    planner_transition, relative_state, step_car, tracking_control, CarControl, CarState,
    LaneGeometry, PlannerState, RelativeState, TrackingGains, MAX_STEER,
};

/// Duration of a kinematic lane-change ramp for the other cars, seconds.
pub const LANE_CHANGE_DURATION: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Config(String),
    Metrics(MetricsError),
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::Config(msg) => write!(f, "invalid episode config: {msg}"),
            SimError::Metrics(e) => write!(f, "metrics error: {e}"),
        }
    }
}

impl core::error::Error for SimError {}

/// Which safety controller the episode runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ControllerKind {
    None,
    Spc,
    Rss,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlannerSettings {
    pub weights: RewardWeights,
    /// Plan length in 1 Hz actions.
    pub horizon: usize,
    /// Node expansions per planning cycle.
    pub budget: usize,
    /// Nearest agents entering the reachability term and collision checks.
    pub max_agents: usize,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        PlannerSettings {
            weights: RewardWeights::default(),
            horizon: 4,
            budget: 300,
            max_agents: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControllerSettings {
    pub kind: ControllerKind,
    pub config: SafetyControllerConfig,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        ControllerSettings {
            kind: ControllerKind::Spc,
            config: SafetyControllerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub n_other_cars: usize,
    pub n_lanes: usize,
    pub lane_width: f64,
    pub planner: PlannerSettings,
    pub controller: ControllerSettings,
    pub population: DriverPopulation,
    pub bounds: RelDynamicsBounds,
    pub rss: RSSParams,
    pub gains: TrackingGains,
    /// Bumper-to-bumper spawn gap range, meters.
    pub spawn_gap: (f64, f64),
    /// Spawn speed range, m/s.
    pub spawn_speed: (f64, f64),
    /// Robot spawn speed.
    pub robot_speed: f64,
    /// Threat-number normalizations.
    pub a_long_max: f64,
    pub a_lat_max: f64,
    /// Control period, seconds (50 Hz).
    pub dt: f64,
    /// Control ticks per planning cycle (1 Hz planning).
    pub ticks_per_plan: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            seed: 0,
            duration_s: 30.0,
            n_other_cars: 100,
            n_lanes: 4,
            lane_width: 4.0,
            planner: PlannerSettings::default(),
            controller: ControllerSettings::default(),
            population: DriverPopulation::default(),
            bounds: RelDynamicsBounds::default(),
            rss: RSSParams::default(),
            gains: TrackingGains::default(),
            spawn_gap: (15.0, 40.0),
            spawn_speed: (18.0, 27.0),
            robot_speed: 20.0,
            a_long_max: 5.0,
            a_lat_max: 2.0,
            dt: 0.02,
            ticks_per_plan: 50,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |msg: &str| Err(SimError::Config(String::from(msg)));
        if !(self.duration_s > 0.0) {
            return err("duration must be positive");
        }
        if self.n_lanes == 0 {
            return err("need at least one lane");
        }
        if !(self.lane_width > 0.0) {
            return err("lane width must be positive");
        }
        if !(self.spawn_gap.0 > 0.0 && self.spawn_gap.1 >= self.spawn_gap.0) {
            return err("spawn gap range must be positive and ordered");
        }
        if !(self.spawn_speed.1 >= self.spawn_speed.0 && self.spawn_speed.0 >= 0.0) {
            return err("spawn speed range must be nonnegative and ordered");
        }
        if !(self.dt > 0.0) || self.ticks_per_plan == 0 {
            return err("control rate must be positive");
        }
        if self.planner.horizon == 0 {
            return err("planner horizon must be at least one action");
        }
        Ok(())
    }

    pub fn lanes(&self) -> LaneGeometry {
        LaneGeometry {
            n_lanes: self.n_lanes,
            width: self.lane_width,
        }
    }
}

/// Noteworthy episode events, for the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimEvent {
    /// The robot's rectangle overlapped this car; the car was removed.
    RobotCollision { tick: usize, agent: usize },
    /// Two other cars overlapped; the rear one was removed.
    AgentCollision { tick: usize, removed: usize, other: usize },
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub records: Vec<MetricsRecord>,
    pub stats: AggregateStats,
    pub events: Vec<SimEvent>,
}

#[derive(Debug, Clone)]
struct TrafficCar {
    s: f64,
    y: f64,
    v: f64,
    lane_from: usize,
    lane_to: usize,
    /// Lane-change progress in [0, 1]; equal lanes mean no change active.
    progress: f64,
    y_start: f64,
    idm: crate::traffic::IDMParams,
    mobil: crate::traffic::MOBILParams,
    alive: bool,
}

impl TrafficCar {
    fn changing(&self) -> bool {
        self.lane_from != self.lane_to
    }

    fn lateral_rate(&self, lanes: &LaneGeometry) -> f64 {
        if self.changing() {
            (lanes.center(self.lane_to) - self.y_start) / LANE_CHANGE_DURATION
        } else {
            0.0
        }
    }

    fn car_state(&self, lanes: &LaneGeometry) -> CarState {
        let vy = self.lateral_rate(lanes);
        CarState {
            px: self.s,
            py: self.y,
            theta: math::atan2(vy, self.v.max(0.1)),
            v: math::hypot(self.v, vy),
        }
    }

    fn rect(&self, lanes: &LaneGeometry, length: f64, width: f64) -> MovingRect {
        let vy = self.lateral_rate(lanes);
        MovingRect {
            px: self.s,
            py: self.y,
            vx: self.v,
            vy,
            heading: math::atan2(vy, self.v.max(0.1)),
            half_len: 0.5 * length,
            half_wid: 0.5 * width,
        }
    }

    fn obb(&self, lanes: &LaneGeometry, length: f64, width: f64) -> Obb {
        let vy = self.lateral_rate(lanes);
        Obb::new(
            self.s,
            self.y,
            math::atan2(vy, self.v.max(0.1)),
            length,
            width,
        )
    }
}

/// Deterministic closed-loop episode.
///
/// `value_function` backs both the reachability planner term (when the
/// planner blend asks for it) and the SPC safety controller; `None` is valid
/// for plain-planner / RSS / uncontrolled configurations.
pub fn run_episode(
    cfg: &EpisodeConfig,
    value_function: Option<&ValueFunction>,
) -> Result<EpisodeResult, SimError> {
    cfg.validate()?;
    if cfg.planner.weights.gamma_r < 1.0 && value_function.is_none() {
        return Err(SimError::Config(String::from(
            "planner blend below 1 requires a value table",
        )));
    }
    if cfg.controller.kind == ControllerKind::Spc && value_function.is_none() {
        return Err(SimError::Config(String::from(
            "the SPC controller requires a value table",
        )));
    }

    let lanes = cfg.lanes();
    let car_length = cfg.rss.car_length;
    let car_width = cfg.rss.car_width;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Robot spawns rearmost; every lane's queue starts at its position.
    let robot_lane = 1usize.min(lanes.max_lane());
    let mut robot = CarState {
        px: 0.0,
        py: lanes.center(robot_lane),
        theta: 0.0,
        v: cfg.robot_speed,
    };
    let mut carried = PlannerState {
        s: robot.px,
        lane: robot_lane,
        v: cfg
            .robot_speed
            .clamp(cfg.planner.weights.v_min, cfg.planner.weights.v_max),
    };

    let mut cars: Vec<TrafficCar> = Vec::with_capacity(cfg.n_other_cars);
    let mut lane_heads = alloc::vec![robot.px; cfg.n_lanes];
    for _ in 0..cfg.n_other_cars {
        let lane = rng.gen_range(0..cfg.n_lanes);
        let speed = rng.gen_range(cfg.spawn_speed.0..=cfg.spawn_speed.1);
        let gap = rng.gen_range(cfg.spawn_gap.0..=cfg.spawn_gap.1);
        let s = lane_heads[lane] + car_length + gap;
        lane_heads[lane] = s;
        let (idm, mobil) = sample_driver_params(&cfg.population, &mut rng);
        cars.push(TrafficCar {
            s,
            y: lanes.center(lane),
            v: speed,
            lane_from: lane,
            lane_to: lane,
            progress: 0.0,
            y_start: lanes.center(lane),
            idm,
            mobil,
            alive: true,
        });
    }

    let mut filter = match cfg.controller.kind {
        ControllerKind::None => None,
        ControllerKind::Spc => Some(SafetyFilter::new(
            SafetyBackend::Spc(value_function.expect("checked above")),
            cfg.controller.config,
            cfg.bounds,
            cfg.rss,
            car_length,
        )),
        ControllerKind::Rss => Some(SafetyFilter::new(
            SafetyBackend::Rss,
            cfg.controller.config,
            cfg.bounds,
            cfg.rss,
            car_length,
        )),
    };

    let n_ticks = math::round(cfg.duration_s / cfg.dt) as usize;
    let mut records: Vec<MetricsRecord> = Vec::with_capacity(n_ticks);
    let mut events: Vec<SimEvent> = Vec::new();
    let mut accels = alloc::vec![0.0f64; cars.len()];

    for tick in 0..n_ticks {
        // 1 Hz replanning on the abstracted state.
        if tick % cfg.ticks_per_plan == 0 {
            let world = PlannerWorld {
                robot: PlannerState {
                    s: robot.px,
                    lane: carried.lane,
                    v: carried.v,
                },
                others: cars
                    .iter()
                    .filter(|c| c.alive)
                    .map(|c| PlannerAgent {
                        s: c.s,
                        lane: lanes.lane_of(c.y),
                        v: c.v,
                    })
                    .collect(),
            };
            let model = PlannerModel {
                weights: cfg.planner.weights,
                idm: cfg.population.idm_mean,
                mobil: cfg.population.mobil_mean,
                lanes,
                car_length,
                car_width,
                dt_plan: cfg.dt * cfg.ticks_per_plan as f64,
                value_function: if cfg.planner.weights.gamma_r < 1.0 {
                    value_function
                } else {
                    None
                },
                max_agents: cfg.planner.max_agents,
            };
            let plan = op_plan(&model, &world, cfg.planner.budget, cfg.planner.horizon);
            let next = planner_transition(
                &PlannerState {
                    s: robot.px,
                    lane: carried.lane,
                    v: carried.v,
                },
                plan[0],
                model.dt_plan,
                cfg.planner.weights.v_min,
                cfg.planner.weights.v_max,
                &lanes,
            );
            carried = next;
        }

        // Traffic behavior: staggered 1 Hz MOBIL, IDM every tick.
        for i in 0..cars.len() {
            if !cars[i].alive {
                continue;
            }
            if tick % cfg.ticks_per_plan == i % cfg.ticks_per_plan && !cars[i].changing() {
                self_decide_lane(&mut cars, i, &robot, &lanes, car_length);
            }
            let lane_i = lanes.lane_of(cars[i].y);
            let leader = lane_leader(&cars, i, lane_i, &robot, &lanes, car_length);
            accels[i] = match leader {
                Some(n) => idm_accel(cars[i].v, n.gap, n.v, &cars[i].idm),
                None => idm_accel(cars[i].v, f64::INFINITY, 0.0, &cars[i].idm),
            };
        }

        // Robot command: track the plan target, then filter.
        let target = PlannerState {
            s: robot.px,
            lane: carried.lane,
            v: carried.v,
        };
        let desired = tracking_control(&robot, &target, &cfg.gains, car_length, &lanes);
        let pairs = nearest_pairs(&robot, &cars, &lanes, cfg.planner.max_agents);
        let (control, intervened) = match filter.as_mut() {
            Some(f) => f.filter(&robot, &pairs, &desired),
            None => (
                CarControl {
                    delta: desired.delta.clamp(-MAX_STEER, MAX_STEER),
                    a: desired.a.clamp(cfg.bounds.a_r_min, cfg.bounds.a_r_max),
                },
                false,
            ),
        };

        // Metrics on the pre-step state with this tick's command.
        let ego_rect = MovingRect::from_car(&robot, car_length, car_width);
        let other_rects: Vec<MovingRect> = cars
            .iter()
            .filter(|c| c.alive)
            .map(|c| c.rect(&lanes, car_length, car_width))
            .collect();
        let (ttc_val, _) = ttc_with_critical(&ego_rect, &other_rects);
        let min_pair_value = match value_function {
            Some(vf) => pairs
                .iter()
                .map(|(_, x)| vf.value(x))
                .fold(f64::INFINITY, f64::min),
            None => f64::NAN,
        };
        records.push(MetricsRecord {
            t: tick as f64 * cfg.dt,
            ttc: ttc_val,
            btn: btn(&ego_rect, &other_rects, cfg.a_long_max),
            stn: stn(&ego_rect, &other_rects, cfg.a_lat_max),
            v_r: robot.v,
            abs_a_r: math::abs(control.a),
            intervened,
            min_pair_value: if min_pair_value.is_finite() {
                min_pair_value
            } else {
                f64::NAN
            },
            collision: false,
        });

        // Step everything.
        robot = step_car(&robot, &control, cfg.dt, car_length);
        for (i, car) in cars.iter_mut().enumerate() {
            if !car.alive {
                continue;
            }
            car.v = (car.v + accels[i] * cfg.dt).max(0.0);
            car.s += car.v * cfg.dt;
            if car.changing() {
                car.progress += cfg.dt / LANE_CHANGE_DURATION;
                if car.progress >= 1.0 {
                    car.lane_from = car.lane_to;
                    car.y = lanes.center(car.lane_to);
                    car.progress = 0.0;
                    car.y_start = car.y;
                } else {
                    car.y = car.y_start
                        + (lanes.center(car.lane_to) - car.y_start) * car.progress;
                }
            }
        }

        // Collisions: the robot removes whoever it hits and drives on; a
        // car-car overlap removes the rear car.
        let robot_obb = Obb::new(robot.px, robot.py, robot.theta, car_length, car_width);
        for (i, car) in cars.iter_mut().enumerate() {
            if car.alive && obb_overlap(&robot_obb, &car.obb(&lanes, car_length, car_width)) {
                car.alive = false;
                events.push(SimEvent::RobotCollision { tick, agent: i });
                records.last_mut().expect("pushed this tick").collision = true;
            }
        }
        for i in 0..cars.len() {
            if !cars[i].alive {
                continue;
            }
            for j in i + 1..cars.len() {
                if !cars[j].alive
                    || math::abs(cars[i].s - cars[j].s) > car_length + 2.0
                    || math::abs(cars[i].y - cars[j].y) > lanes.width
                {
                    continue;
                }
                let oi = cars[i].obb(&lanes, car_length, car_width);
                let oj = cars[j].obb(&lanes, car_length, car_width);
                if obb_overlap(&oi, &oj) {
                    let (removed, other) = if cars[i].s < cars[j].s { (i, j) } else { (j, i) };
                    cars[removed].alive = false;
                    events.push(SimEvent::AgentCollision { tick, removed, other });
                }
            }
        }
    }

    let stats = aggregate(&records).map_err(SimError::Metrics)?;
    Ok(EpisodeResult {
        records,
        stats,
        events,
    })
}

/// Nearest alive agents by longitudinal distance (ties by index), as
/// `(car index, relative state)` pairs.
fn nearest_pairs(
    robot: &CarState,
    cars: &[TrafficCar],
    lanes: &LaneGeometry,
    max_agents: usize,
) -> Vec<(usize, RelativeState)> {
    let mut order: Vec<usize> = cars
        .iter()
        .enumerate()
        .filter(|(_, c)| c.alive)
        .map(|(i, _)| i)
        .collect();
    order.sort_unstable_by(|&a, &b| {
        let da = math::abs(cars[a].s - robot.px);
        let db = math::abs(cars[b].s - robot.px);
        da.partial_cmp(&db).expect("finite positions").then(a.cmp(&b))
    });
    order
        .iter()
        .take(max_agents)
        .map(|&i| (i, relative_state(robot, &cars[i].car_state(lanes))))
        .collect()
}

/// Nearest leader of car `i` in `lane`, counting the robot as traffic.
fn lane_leader(
    cars: &[TrafficCar],
    i: usize,
    lane: usize,
    robot: &CarState,
    lanes: &LaneGeometry,
    car_length: f64,
) -> Option<Neighbor> {
    let me = &cars[i];
    let mut best: Option<Neighbor> = None;
    let mut consider = |s: f64, v: f64| {
        if s > me.s {
            let gap = s - me.s - car_length;
            if best.map_or(true, |b| gap < b.gap) {
                best = Some(Neighbor { gap, v });
            }
        }
    };
    for (j, other) in cars.iter().enumerate() {
        if j != i && other.alive && lanes.lane_of(other.y) == lane {
            consider(other.s, other.v);
        }
    }
    if lanes.lane_of(robot.py) == lane {
        consider(robot.px, robot.v);
    }
    best
}

/// Neighbors of car `i` in `lane` for the MOBIL decision.
fn lane_context(
    cars: &[TrafficCar],
    i: usize,
    lane: usize,
    robot: &CarState,
    lanes: &LaneGeometry,
    car_length: f64,
) -> LaneContext {
    let me = &cars[i];
    let mut leader: Option<Neighbor> = None;
    let mut follower: Option<Neighbor> = None;
    let mut consider = |s: f64, v: f64| {
        let gap = math::abs(s - me.s) - car_length;
        if s >= me.s {
            if leader.map_or(true, |l| gap < l.gap) {
                leader = Some(Neighbor { gap, v });
            }
        } else if follower.map_or(true, |f| gap < f.gap) {
            follower = Some(Neighbor { gap, v });
        }
    };
    for (j, other) in cars.iter().enumerate() {
        if j != i && other.alive && lanes.lane_of(other.y) == lane {
            consider(other.s, other.v);
        }
    }
    if lanes.lane_of(robot.py) == lane {
        consider(robot.px, robot.v);
    }
    LaneContext { leader, follower }
}

/// Run the MOBIL check for car `i`, preferring a left change over a right
/// one, and start the lateral ramp when it passes.
fn self_decide_lane(
    cars: &mut Vec<TrafficCar>,
    i: usize,
    robot: &CarState,
    lanes: &LaneGeometry,
    car_length: f64,
) {
    let lane = lanes.lane_of(cars[i].y);
    let current = lane_context(cars, i, lane, robot, lanes, car_length);
    let mut target_lane = None;
    if lane + 1 <= lanes.max_lane() {
        let target = lane_context(cars, i, lane + 1, robot, lanes, car_length);
        if mobil_decide(cars[i].v, &current, &target, car_length, &cars[i].idm, &cars[i].mobil)
            == LaneDecision::Change
        {
            target_lane = Some(lane + 1);
        }
    }
    if target_lane.is_none() && lane > 0 {
        let target = lane_context(cars, i, lane - 1, robot, lanes, car_length);
        if mobil_decide(cars[i].v, &current, &target, car_length, &cars[i].idm, &cars[i].mobil)
            == LaneDecision::Change
        {
            target_lane = Some(lane - 1);
        }
    }
    if let Some(t) = target_lane {
        cars[i].lane_from = lane;
        cars[i].lane_to = t;
        cars[i].progress = 0.0;
        cars[i].y_start = cars[i].y;
    }
}

/// Marker for schemes in config plumbing.
pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Mi => "mi",
        Scheme::Sw => "sw",
    }
}
