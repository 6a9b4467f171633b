//! Time-marching solver for backward reachable tubes.
//!
//! Solves `V_t + min(0, H(x, grad V)) = 0` backwards from a terminal
//! condition with a first-order scheme: upwind one-sided differences combined
//! into a global Lax-Friedrichs numerical Hamiltonian, forward-Euler steps
//! sized by a CFL condition. The `min(0, .)` freeze makes the zero sublevel
//! set a tube: values are pointwise nonincreasing in the horizon.
//!
//! The engine is generic over the dynamics through [`HjiDynamics`], which
//! supplies the analytically optimized Hamiltonian and per-dimension bounds
//! on `|dH/dp_d|` used for dissipation and step sizing.

use alloc::string::String;
use alloc::vec::Vec;

use crate::grid::{GridError, GridSpec, ValueTable, MAX_DIM};

/// A differential game presented to the marching engine.
pub trait HjiDynamics: Sync {
    fn dim(&self) -> usize;

    /// `max_u min_d costate . f(x, u, d)`, optimized analytically.
    fn hamiltonian(&self, x: &[f64], costate: &[f64]) -> f64;

    /// Upper bound on `|dH/dp_d|` over states inside `grid`.
    fn costate_coefficient_bound(&self, grid: &GridSpec, d: usize) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverConfig {
    /// Fraction of the stability-limited time step, in (0, 1].
    pub cfl_number: f64,
    /// Horizon |tau| to march to, seconds.
    pub time_horizon_tau: f64,
    /// Per-dimension Lax-Friedrichs dissipation override; when `None` the
    /// bounds from the dynamics are used with a 1.1 safety margin.
    pub dissipation_bounds: Option<Vec<f64>>,
    /// Keep a snapshot of every marching step (terminal condition first).
    /// Only sensible on small grids.
    pub store_intermediate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl_number: 0.5,
            time_horizon_tau: 3.0,
            dissipation_bounds: None,
            store_intermediate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    InvalidConfig(String),
    /// The CFL-limited step collapsed to zero or below.
    CflViolation { dt: f64 },
    /// A non-finite value appeared while marching.
    NonFinite { step: usize },
    Grid(GridError),
}

impl core::fmt::Display for SolverError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SolverError::InvalidConfig(msg) => write!(f, "invalid solver config: {msg}"),
            SolverError::CflViolation { dt } => {
                write!(f, "CFL violation: computed time step {dt} is not positive")
            }
            SolverError::NonFinite { step } => {
                write!(f, "non-finite value produced at marching step {step}")
            }
            SolverError::Grid(e) => write!(f, "grid error: {e}"),
        }
    }
}

impl core::error::Error for SolverError {}

impl From<GridError> for SolverError {
    fn from(e: GridError) -> Self {
        SolverError::Grid(e)
    }
}

/// Result of a marching run.
#[derive(Debug, Clone)]
pub struct BrtSolution {
    pub table: ValueTable,
    /// Per-step snapshots when requested; `snapshots[0]` is the terminal
    /// condition.
    pub snapshots: Vec<ValueTable>,
    /// Dissipation coefficients actually used.
    pub alphas: Vec<f64>,
    /// Nominal step size (the final step may be shorter to land on the
    /// horizon exactly).
    pub dt: f64,
    pub steps: usize,
}

struct Workspace<'a> {
    grid: &'a GridSpec,
    coords: Vec<Vec<f64>>,
    alphas: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(grid: &'a GridSpec, alphas: Vec<f64>) -> Self {
        let coords = (0..grid.dim())
            .map(|d| {
                (0..grid.node_counts()[d])
                    .map(|i| grid.node_coord(d, i))
                    .collect()
            })
            .collect();
        Workspace { grid, coords, alphas }
    }

    /// Frozen Lax-Friedrichs update for the nodes in `[start, start+out.len())`.
    /// Returns false if a non-finite value was produced.
    fn update_range<D: HjiDynamics>(
        &self,
        dynamics: &D,
        cur: &[f64],
        dt: f64,
        start: usize,
        out: &mut [f64],
    ) -> bool {
        let dim = self.grid.dim();
        let counts = self.grid.node_counts();
        let strides = self.grid.strides();
        let spacing = self.grid.spacing();
        let periodic = self.grid.periodic();

        let mut idx = [0usize; MAX_DIM];
        self.grid.unflatten(start, &mut idx[..dim]);
        let mut x = [0.0f64; MAX_DIM];
        for d in 0..dim {
            x[d] = self.coords[d][idx[d]];
        }

        let mut finite = true;
        let mut p_mid = [0.0f64; MAX_DIM];
        for (k, slot) in out.iter_mut().enumerate() {
            let flat = start + k;
            let v = cur[flat];
            let mut dissipation = 0.0;
            for d in 0..dim {
                let i = idx[d];
                let n = counts[d];
                let s = strides[d];
                let h = spacing[d];
                let (left, right) = if periodic[d] {
                    let l = if i == 0 { cur[flat + (n - 2) * s] } else { cur[flat - s] };
                    let r = if i == n - 1 { cur[flat - (n - 2) * s] } else { cur[flat + s] };
                    (l, r)
                } else if i == 0 {
                    let r = cur[flat + s];
                    // One-sided at the boundary: mirror the interior slope.
                    (2.0 * v - r, r)
                } else if i == n - 1 {
                    let l = cur[flat - s];
                    (l, 2.0 * v - l)
                } else {
                    (cur[flat - s], cur[flat + s])
                };
                let dm = (v - left) / h;
                let dp = (right - v) / h;
                p_mid[d] = 0.5 * (dm + dp);
                dissipation += self.alphas[d] * 0.5 * (dp - dm);
            }
            // Marching V_s = min(0, H): the artificial viscosity enters with
            // positive sign here (the equation reads V_s + (-min(0,H)) = 0 in
            // canonical form), and the freeze caps the whole update so values
            // never increase.
            let h_hat = dynamics.hamiltonian(&x[..dim], &p_mid[..dim]) + dissipation;
            let next = v + dt * h_hat.min(0.0);
            finite &= next.is_finite();
            *slot = next;

            // Row-major increment, keeping coordinates in sync.
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < counts[d] {
                    x[d] = self.coords[d][idx[d]];
                    break;
                }
                idx[d] = 0;
                x[d] = self.coords[d][0];
            }
        }
        finite
    }

    fn step<D: HjiDynamics>(&self, dynamics: &D, cur: &[f64], next: &mut [f64], dt: f64) -> bool {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            const CHUNK: usize = 1 << 14;
            next.par_chunks_mut(CHUNK)
                .enumerate()
                .map(|(ci, chunk)| self.update_range(dynamics, cur, dt, ci * CHUNK, chunk))
                .reduce(|| true, |a, b| a && b)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.update_range(dynamics, cur, dt, 0, next)
        }
    }
}

/// March the frozen HJI PDE backwards from `terminal` over the configured
/// horizon and return the value function at the final horizon.
pub fn march_brt<D: HjiDynamics>(
    dynamics: &D,
    terminal: impl FnMut(&[f64]) -> f64,
    grid: &GridSpec,
    cfg: &SolverConfig,
) -> Result<BrtSolution, SolverError> {
    if grid.dim() != dynamics.dim() {
        return Err(SolverError::Grid(GridError::DimensionMismatch {
            expected: dynamics.dim(),
            got: grid.dim(),
        }));
    }
    if !(cfg.cfl_number > 0.0 && cfg.cfl_number <= 1.0) {
        return Err(SolverError::InvalidConfig(String::from(
            "cfl_number must be in (0, 1]",
        )));
    }
    if !(cfg.time_horizon_tau > 0.0) {
        return Err(SolverError::InvalidConfig(String::from(
            "time_horizon_tau must be positive",
        )));
    }

    let alphas: Vec<f64> = match &cfg.dissipation_bounds {
        Some(a) => {
            if a.len() != grid.dim() {
                return Err(SolverError::InvalidConfig(String::from(
                    "dissipation_bounds length must match grid dimension",
                )));
            }
            let ok = a
                .iter()
                .enumerate()
                .all(|(d, &v)| v >= dynamics.costate_coefficient_bound(grid, d));
            if !ok {
                return Err(SolverError::InvalidConfig(String::from(
                    "dissipation bound below the dynamics' costate coefficient bound",
                )));
            }
            a.clone()
        }
        None => (0..grid.dim())
            .map(|d| 1.1 * dynamics.costate_coefficient_bound(grid, d))
            .collect(),
    };

    let rate: f64 = alphas
        .iter()
        .zip(grid.spacing())
        .map(|(a, h)| a / h)
        .sum();
    if !rate.is_finite() {
        return Err(SolverError::InvalidConfig(String::from(
            "non-finite dissipation bounds",
        )));
    }
    // A zero rate means the dynamics cannot move the state; a single step to
    // the horizon is exact then.
    let dt = if rate > 0.0 {
        cfg.cfl_number / rate
    } else {
        cfg.time_horizon_tau
    };
    if !(dt > 0.0) {
        return Err(SolverError::CflViolation { dt });
    }
    let steps = crate::math::ceil(cfg.time_horizon_tau / dt).max(1.0) as usize;

    let terminal_table = ValueTable::from_fn(grid.clone(), 0.0, terminal)?;
    let mut snapshots = Vec::new();
    if cfg.store_intermediate {
        snapshots.push(terminal_table.clone());
    }

    let workspace = Workspace::new(grid, alphas.clone());
    let mut cur = terminal_table.data().to_vec();
    let mut next = alloc::vec![0.0f64; cur.len()];
    let mut tau = 0.0;
    for step in 0..steps {
        let dt_step = if step + 1 == steps {
            cfg.time_horizon_tau - tau
        } else {
            dt
        };
        if !workspace.step(dynamics, &cur, &mut next, dt_step) {
            return Err(SolverError::NonFinite { step });
        }
        core::mem::swap(&mut cur, &mut next);
        tau += dt_step;
        if cfg.store_intermediate {
            let t = if step + 1 == steps { cfg.time_horizon_tau } else { tau };
            snapshots.push(ValueTable::new(grid.clone(), t, cur.clone())?);
        }
    }

    let table = ValueTable::new(grid.clone(), cfg.time_horizon_tau, cur)?;
    Ok(BrtSolution {
        table,
        snapshots,
        alphas,
        dt,
        steps,
    })
}
