//! Per-tick safety metrics and their aggregation.
//!
//! Time-to-collision propagates both rectangles at constant velocity and
//! sweeps for the first overlap. The brake and steer threat numbers measure
//! the smallest constant deceleration / lateral acceleration that avoids the
//! TTC-critical agent, normalized by what the vehicle has available; both are
//! found by bisection with the same overlap sweep inside.

use alloc::string::String;
use alloc::vec::Vec;

use crate::geom::{obb_overlap, Obb};
use crate::math;
use crate::vehicle::CarState;

/// TTC is capped here (seconds); larger values carry no signal.
pub const TTC_CAP: f64 = 20.0;
/// Overlap sweep resolution, seconds.
pub const SWEEP_STEP: f64 = 0.01;
/// Upper end of the threat acceleration searches, m/s^2.
pub const THREAT_ACCEL_MAX: f64 = 20.0;
/// Bisection tolerance of the threat searches, m/s^2.
pub const THREAT_ACCEL_TOL: f64 = 0.01;

/// A rectangle with frozen orientation moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingRect {
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
    pub heading: f64,
    pub half_len: f64,
    pub half_wid: f64,
}

impl MovingRect {
    pub fn from_car(z: &CarState, length: f64, width: f64) -> Self {
        MovingRect {
            px: z.px,
            py: z.py,
            vx: z.v * math::cos(z.theta),
            vy: z.v * math::sin(z.theta),
            heading: z.theta,
            half_len: 0.5 * length,
            half_wid: 0.5 * width,
        }
    }

    fn obb(&self, cx: f64, cy: f64) -> Obb {
        Obb::new(cx, cy, self.heading, 2.0 * self.half_len, 2.0 * self.half_wid)
    }

    fn at(&self, t: f64) -> Obb {
        self.obb(self.px + self.vx * t, self.py + self.vy * t)
    }

    fn speed(&self) -> f64 {
        math::hypot(self.vx, self.vy)
    }

    /// Position under a constant deceleration along the velocity direction,
    /// holding still once stopped.
    fn at_braked(&self, t: f64, decel: f64) -> Obb {
        let s = self.speed();
        if s < 1e-12 || decel <= 0.0 {
            return self.at(t);
        }
        let t_stop = s / decel;
        let dist = if t < t_stop {
            s * t - 0.5 * decel * t * t
        } else {
            0.5 * s * s / decel
        };
        self.obb(self.px + self.vx / s * dist, self.py + self.vy / s * dist)
    }

    /// Position under a constant lateral acceleration perpendicular to the
    /// heading (`sign` picks the side).
    fn at_steered(&self, t: f64, lat_accel: f64, sign: f64) -> Obb {
        let nx = -math::sin(self.heading);
        let ny = math::cos(self.heading);
        let off = 0.5 * sign * lat_accel * t * t;
        self.obb(
            self.px + self.vx * t + nx * off,
            self.py + self.vy * t + ny * off,
        )
    }
}

/// Earliest sweep time in `[0, cap]` at which the two propagated rectangles
/// overlap; `None` when they never do within the cap.
fn first_overlap(
    ego: impl Fn(f64) -> Obb,
    other: &MovingRect,
    cap: f64,
) -> Option<f64> {
    let steps = (cap / SWEEP_STEP) as usize;
    for k in 0..=steps {
        let t = k as f64 * SWEEP_STEP;
        if obb_overlap(&ego(t), &other.at(t)) {
            return Some(t);
        }
    }
    None
}

/// Minimum time-to-collision over all agents plus the index of the critical
/// agent achieving it.
pub fn ttc_with_critical(ego: &MovingRect, others: &[MovingRect]) -> (f64, Option<usize>) {
    let mut best = TTC_CAP;
    let mut critical = None;
    for (i, other) in others.iter().enumerate() {
        // An agent cannot reach the ego before `best` if the current
        // clearance exceeds what the relative speed covers.
        let dist = math::hypot(other.px - ego.px, other.py - ego.py);
        let clearance = dist
            - math::hypot(ego.half_len, ego.half_wid)
            - math::hypot(other.half_len, other.half_wid);
        let rel_speed = math::hypot(other.vx - ego.vx, other.vy - ego.vy);
        if clearance > rel_speed * best {
            continue;
        }
        if let Some(t) = first_overlap(|t| ego.at(t), other, best) {
            if t < best || critical.is_none() {
                best = t;
                critical = Some(i);
            }
        }
    }
    if critical.is_some() {
        (best, critical)
    } else {
        (TTC_CAP, None)
    }
}

/// Constant-velocity time-to-collision, capped at [`TTC_CAP`].
pub fn ttc(ego: &MovingRect, others: &[MovingRect]) -> f64 {
    ttc_with_critical(ego, others).0
}

/// Smallest constant deceleration avoiding `other` within the sweep horizon;
/// [`THREAT_ACCEL_MAX`] when even full-scale braking cannot.
pub fn required_brake(ego: &MovingRect, other: &MovingRect) -> f64 {
    if first_overlap(|t| ego.at_braked(t, 0.0), other, TTC_CAP).is_none() {
        return 0.0;
    }
    if first_overlap(|t| ego.at_braked(t, THREAT_ACCEL_MAX), other, TTC_CAP).is_some() {
        return THREAT_ACCEL_MAX;
    }
    let mut lo = 0.0;
    let mut hi = THREAT_ACCEL_MAX;
    while hi - lo > THREAT_ACCEL_TOL {
        let mid = 0.5 * (lo + hi);
        if first_overlap(|t| ego.at_braked(t, mid), other, TTC_CAP).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Smallest constant lateral acceleration (better of the two directions)
/// avoiding `other`.
pub fn required_lateral(ego: &MovingRect, other: &MovingRect) -> f64 {
    if first_overlap(|t| ego.at(t), other, TTC_CAP).is_none() {
        return 0.0;
    }
    let mut best = THREAT_ACCEL_MAX;
    for sign in [1.0, -1.0] {
        if first_overlap(|t| ego.at_steered(t, THREAT_ACCEL_MAX, sign), other, TTC_CAP)
            .is_some()
        {
            continue;
        }
        let mut lo = 0.0;
        let mut hi = THREAT_ACCEL_MAX;
        while hi - lo > THREAT_ACCEL_TOL {
            let mid = 0.5 * (lo + hi);
            if first_overlap(|t| ego.at_steered(t, mid, sign), other, TTC_CAP).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.min(hi);
    }
    best
}

/// Brake threat number of the TTC-critical agent.
pub fn btn(ego: &MovingRect, others: &[MovingRect], a_long_max: f64) -> f64 {
    match ttc_with_critical(ego, others) {
        (t, Some(i)) if t < TTC_CAP => required_brake(ego, &others[i]) / a_long_max,
        _ => 0.0,
    }
}

/// Steer threat number of the TTC-critical agent.
pub fn stn(ego: &MovingRect, others: &[MovingRect], a_lat_max: f64) -> f64 {
    match ttc_with_critical(ego, others) {
        (t, Some(i)) if t < TTC_CAP => required_lateral(ego, &others[i]) / a_lat_max,
        _ => 0.0,
    }
}

/// One 50 Hz sample of the safety/performance signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub t: f64,
    pub ttc: f64,
    pub btn: f64,
    pub stn: f64,
    pub v_r: f64,
    pub abs_a_r: f64,
    pub intervened: bool,
    /// Minimum pairwise value over the scoped agents; NaN when no value
    /// table is in use.
    pub min_pair_value: f64,
    /// A collision involving the robot happened on this tick.
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    EmptyInput,
}

impl core::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MetricsError::EmptyInput => write!(f, "cannot aggregate an empty record set"),
        }
    }
}

impl core::error::Error for MetricsError {}

/// Pooled statistics over all ticks of a configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateStats {
    pub frac_ttc_ge_3: f64,
    pub ttc_p10: f64,
    pub frac_btn_le_1: f64,
    pub btn_p90: f64,
    pub frac_stn_le_1: f64,
    pub stn_p90: f64,
    pub mean_v: f64,
    pub mean_abs_a: f64,
    pub intervention_pct: f64,
    pub collision_count: u64,
}

/// Linearly interpolated order statistic, `p` in [0, 100].
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = math::floor(rank) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn aggregate(records: &[MetricsRecord]) -> Result<AggregateStats, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = records.len() as f64;
    let ttcs: Vec<f64> = records.iter().map(|r| r.ttc).collect();
    let btns: Vec<f64> = records.iter().map(|r| r.btn).collect();
    let stns: Vec<f64> = records.iter().map(|r| r.stn).collect();
    let count = |pred: &dyn Fn(&MetricsRecord) -> bool| {
        records.iter().filter(|r| pred(r)).count() as f64
    };
    Ok(AggregateStats {
        frac_ttc_ge_3: count(&|r| r.ttc >= 3.0) / n,
        ttc_p10: percentile(&ttcs, 10.0),
        frac_btn_le_1: count(&|r| r.btn <= 1.0) / n,
        btn_p90: percentile(&btns, 90.0),
        frac_stn_le_1: count(&|r| r.stn <= 1.0) / n,
        stn_p90: percentile(&stns, 90.0),
        mean_v: records.iter().map(|r| r.v_r).sum::<f64>() / n,
        mean_abs_a: records.iter().map(|r| r.abs_a_r).sum::<f64>() / n,
        intervention_pct: count(&|r| r.intervened) / n * 100.0,
        collision_count: records.iter().filter(|r| r.collision).count() as u64,
    })
}

/// Per-window `(mean speed, 1st-percentile TTC)` points over fixed
/// non-overlapping windows, for the safety/performance trade-off plot.
pub fn window_points(records: &[MetricsRecord], window_s: f64) -> Vec<(f64, f64)> {
    let mut points = Vec::new();
    if records.is_empty() || window_s <= 0.0 {
        return points;
    }
    let t0 = records[0].t;
    let mut start = 0usize;
    while start < records.len() {
        let w = math::floor((records[start].t - t0) / window_s);
        let mut end = start;
        while end < records.len() && math::floor((records[end].t - t0) / window_s) == w {
            end += 1;
        }
        let slice = &records[start..end];
        let mean_v = slice.iter().map(|r| r.v_r).sum::<f64>() / slice.len() as f64;
        let ttcs: Vec<f64> = slice.iter().map(|r| r.ttc).collect();
        points.push((mean_v, percentile(&ttcs, 1.0)));
        start = end;
    }
    points
}

impl AggregateStats {
    /// Header of the report table, matching field order of `row`.
    pub fn csv_header() -> &'static str {
        "frac_ttc_ge_3,ttc_p10,frac_btn_le_1,btn_p90,frac_stn_le_1,stn_p90,mean_v,mean_abs_a,intervention_pct,collision_count"
    }

    pub fn csv_row(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            self.frac_ttc_ge_3,
            self.ttc_p10,
            self.frac_btn_le_1,
            self.btn_p90,
            self.frac_stn_le_1,
            self.stn_p90,
            self.mean_v,
            self.mean_abs_a,
            self.intervention_pct,
            self.collision_count
        );
        s
    }
}
