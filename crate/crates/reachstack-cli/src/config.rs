//! Run configuration: one JSON file with blocks for the grid, dynamics
//! bounds, RSS parameters, solver, traffic population, planner, controller,
//! scenario, and outputs. Every field has a default, so `{}` is a valid
//! config. Command-line `--set key.path=value` overrides are applied on the
//! raw JSON before typing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use reachstack_core::hji;
use reachstack_core::planner::RewardWeights;
use reachstack_core::safety::{SafetyControllerConfig, Scheme};
use reachstack_core::sim::{
    ControllerKind, ControllerSettings, EpisodeConfig, PlannerSettings,
};
use reachstack_core::traffic::{DriverPopulation, IDMParams, MOBILParams};
use reachstack_core::vehicle::TrackingGains;
use reachstack_core::{GridSpec, RSSParams, RelDynamicsBounds, SolverConfig};

use crate::error::AppError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
    pub periodic: Vec<bool>,
}

impl Default for GridBlock {
    fn default() -> Self {
        let g = hji::default_grid();
        GridBlock {
            lower: g.lower().to_vec(),
            upper: g.upper().to_vec(),
            nodes: g.node_counts().to_vec(),
            periodic: g.periodic().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficBlock {
    pub idm: IDMParams,
    pub mobil: MOBILParams,
    /// Per-field standard deviation as a fraction of the mean.
    pub std_frac: f64,
}

impl Default for TrafficBlock {
    fn default() -> Self {
        let pop = DriverPopulation::default();
        TrafficBlock {
            idm: pop.idm_mean,
            mobil: pop.mobil_mean,
            std_frac: pop.std_frac,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerBlock {
    /// Reward blend; 1.0 is the plain planner, below 1.0 mixes in the
    /// reachability term (and requires a table).
    pub gamma_r: f64,
    pub discount: f64,
    pub horizon: usize,
    pub budget: usize,
    pub max_agents: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for PlannerBlock {
    fn default() -> Self {
        let w = RewardWeights::default();
        let p = PlannerSettings::default();
        PlannerBlock {
            gamma_r: 1.0,
            discount: w.discount,
            horizon: p.horizon,
            budget: p.budget,
            max_agents: p.max_agents,
            gamma1: w.gamma1,
            gamma2: w.gamma2,
            gamma3: w.gamma3,
            v_min: w.v_min,
            v_max: w.v_max,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerBlock {
    pub mode: ControllerKind,
    pub scheme: Scheme,
    pub epsilon: f64,
    /// Deviation/slack weights; `None` derives the reference scaling from
    /// the control bounds.
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
}

impl Default for ControllerBlock {
    fn default() -> Self {
        ControllerBlock {
            mode: ControllerKind::None,
            scheme: Scheme::Mi,
            epsilon: 0.5,
            lambda1: None,
            lambda2: None,
            lambda3: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioBlock {
    pub base_seed: u64,
    pub episodes: usize,
    pub duration_s: f64,
    pub n_other_cars: usize,
    pub n_lanes: usize,
    pub lane_width: f64,
    pub spawn_gap: (f64, f64),
    pub spawn_speed: (f64, f64),
    pub robot_speed: f64,
    pub a_long_max: f64,
    pub a_lat_max: f64,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        let e = EpisodeConfig::default();
        ScenarioBlock {
            base_seed: 0,
            episodes: 20,
            duration_s: e.duration_s,
            n_other_cars: e.n_other_cars,
            n_lanes: e.n_lanes,
            lane_width: e.lane_width,
            spawn_gap: e.spawn_gap,
            spawn_speed: e.spawn_speed,
            robot_speed: e.robot_speed,
            a_long_max: e.a_long_max,
            a_lat_max: e.a_lat_max,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// Table payload precision: "f64" or "f32".
    pub precision: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: PathBuf::from("out"),
            precision: String::from("f64"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Configuration label used in file names and reports; derived from the
    /// planner/controller selection when absent.
    pub name: Option<String>,
    pub grid: GridBlock,
    pub dynamics_bounds: RelDynamicsBounds,
    pub rss: RSSParams,
    pub solver: SolverConfig,
    pub traffic: TrafficBlock,
    pub planner: PlannerBlock,
    pub controller: ControllerBlock,
    pub scenario: ScenarioBlock,
    pub gains: TrackingGains,
    /// Value table file; consulted when the planner blend or the SPC
    /// controller needs one.
    pub table: Option<PathBuf>,
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn parse_value(value: serde_json::Value) -> Result<Self, AppError> {
        serde_json::from_value(value).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn grid_spec(&self) -> Result<GridSpec, AppError> {
        GridSpec::new(
            self.grid.lower.clone(),
            self.grid.upper.clone(),
            self.grid.nodes.clone(),
            self.grid.periodic.clone(),
        )
        .map_err(AppError::from)
    }

    pub fn reward_weights(&self) -> RewardWeights {
        RewardWeights {
            gamma1: self.planner.gamma1,
            gamma2: self.planner.gamma2,
            gamma3: self.planner.gamma3,
            v_min: self.planner.v_min,
            v_max: self.planner.v_max,
            gamma_r: self.planner.gamma_r,
            discount: self.planner.discount,
        }
    }

    pub fn controller_settings(&self) -> ControllerSettings {
        let reference = SafetyControllerConfig::from_bounds(&self.dynamics_bounds, self.controller.scheme);
        ControllerSettings {
            kind: self.controller.mode,
            config: SafetyControllerConfig {
                epsilon: self.controller.epsilon,
                scheme: self.controller.scheme,
                lambda1: self.controller.lambda1.unwrap_or(reference.lambda1),
                lambda2: self.controller.lambda2.unwrap_or(reference.lambda2),
                lambda3: self.controller.lambda3.unwrap_or(reference.lambda3),
                ..reference
            },
        }
    }

    pub fn episode_config(&self, seed: u64) -> EpisodeConfig {
        EpisodeConfig {
            seed,
            duration_s: self.scenario.duration_s,
            n_other_cars: self.scenario.n_other_cars,
            n_lanes: self.scenario.n_lanes,
            lane_width: self.scenario.lane_width,
            planner: PlannerSettings {
                weights: self.reward_weights(),
                horizon: self.planner.horizon,
                budget: self.planner.budget,
                max_agents: self.planner.max_agents,
            },
            controller: self.controller_settings(),
            population: DriverPopulation {
                idm_mean: self.traffic.idm,
                mobil_mean: self.traffic.mobil,
                std_frac: self.traffic.std_frac,
            },
            bounds: self.dynamics_bounds,
            rss: self.rss,
            gains: self.gains,
            spawn_gap: self.scenario.spawn_gap,
            spawn_speed: self.scenario.spawn_speed,
            robot_speed: self.scenario.robot_speed,
            a_long_max: self.scenario.a_long_max,
            a_lat_max: self.scenario.a_lat_max,
            dt: 0.02,
            ticks_per_plan: 50,
        }
    }

    /// Does this configuration need a value table at simulation time?
    pub fn needs_table(&self) -> bool {
        self.planner.gamma_r < 1.0 || self.controller.mode == ControllerKind::Spc
    }

    pub fn planner_label(&self) -> &'static str {
        if self.planner.gamma_r < 1.0 {
            "hjop"
        } else {
            "op"
        }
    }

    pub fn controller_label(&self) -> &'static str {
        match self.controller.mode {
            ControllerKind::None => "none",
            ControllerKind::Spc => "spc",
            ControllerKind::Rss => "rss",
        }
    }

    pub fn scheme_label(&self) -> &'static str {
        match self.controller.scheme {
            Scheme::Mi => "mi",
            Scheme::Sw => "sw",
        }
    }

    pub fn config_name(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => {
                if self.controller.mode == ControllerKind::None {
                    format!("{}_none", self.planner_label())
                } else {
                    format!(
                        "{}_{}_{}",
                        self.planner_label(),
                        self.controller_label(),
                        self.scheme_label()
                    )
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.scenario.episodes == 0 {
            return Err(AppError::Config("episode count must be at least 1".into()));
        }
        if self.output.precision != "f64" && self.output.precision != "f32" {
            return Err(AppError::Config(
                "output.precision must be \"f64\" or \"f32\"".into(),
            ));
        }
        self.grid_spec()?;
        self.dynamics_bounds.validate()?;
        self.rss.validate()?;
        // Episode-level checks (duration, lanes, rates).
        self.episode_config(self.scenario.base_seed).validate()?;
        Ok(())
    }
}

/// Parse the value of a `--set key=value` override: JSON when it parses,
/// bare string otherwise.
fn parse_override_value(raw: &str) -> serde_json::Value {
    serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()))
}

/// Apply one `key.path=value` override into the raw config JSON, creating
/// intermediate objects as needed.
pub fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<(), AppError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| AppError::Config(format!("override '{spec}' is not key=value")))?;
    let mut cursor = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(AppError::Config(format!("bad override path '{path}'")));
    }
    for part in &parts[..parts.len() - 1] {
        if !cursor.is_object() {
            return Err(AppError::Config(format!(
                "override path '{path}' crosses a non-object"
            )));
        }
        cursor = cursor
            .as_object_mut()
            .unwrap()
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    match cursor.as_object_mut() {
        Some(map) => {
            map.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw));
            Ok(())
        }
        None => Err(AppError::Config(format!(
            "override path '{path}' crosses a non-object"
        ))),
    }
}

/// Load a config file and apply `--set` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AppError::Config(format!("config file not found: {}", path.display()))
        } else {
            AppError::Io(e)
        }
    })?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| AppError::Config(e.to_string()))?;
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    let cfg = RunConfig::parse_value(value)?;
    cfg.validate()?;
    Ok(cfg)
}
