//! Longitudinal and lateral behavior of the non-robot cars: IDM
//! car-following, MOBIL lane-change decisions, and per-driver parameter
//! sampling around population means.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::math;

/// Hard physical braking cap applied to IDM outputs (and used as the
/// emergency value when cars overlap).
pub const MAX_PHYSICAL_BRAKE: f64 = 8.0;

/// Intelligent-driver-model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IDMParams {
    /// Desired free-road speed.
    pub v0: f64,
    /// Time headway, seconds.
    pub time_headway: f64,
    /// Jam distance, meters.
    pub s0: f64,
    /// Maximum comfortable acceleration.
    pub a_max: f64,
    /// Comfortable deceleration.
    pub b_comfort: f64,
    /// Free-road exponent.
    pub delta_exp: f64,
}

impl Default for IDMParams {
    fn default() -> Self {
        IDMParams {
            v0: 25.0,
            time_headway: 1.5,
            s0: 2.0,
            a_max: 1.5,
            b_comfort: 2.0,
            delta_exp: 4.0,
        }
    }
}

/// MOBIL lane-change parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MOBILParams {
    /// Politeness factor in [0, 1].
    pub politeness: f64,
    /// Advantage threshold for changing, m/s^2.
    pub a_threshold: f64,
    /// Maximum braking a change may impose on the new follower.
    pub b_safe: f64,
}

impl Default for MOBILParams {
    fn default() -> Self {
        MOBILParams {
            politeness: 0.3,
            a_threshold: 0.2,
            b_safe: 4.0,
        }
    }
}

/// Driver population: means plus per-field fractional standard deviation.
/// Individual drivers are Gaussian perturbations of the means, clamped to
/// physically meaningful ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriverPopulation {
    pub idm_mean: IDMParams,
    pub mobil_mean: MOBILParams,
    /// Standard deviation of each field as a fraction of its mean.
    pub std_frac: f64,
}

impl Default for DriverPopulation {
    fn default() -> Self {
        DriverPopulation {
            idm_mean: IDMParams::default(),
            mobil_mean: MOBILParams::default(),
            std_frac: 0.1,
        }
    }
}

/// IDM acceleration toward a leader `gap` meters ahead moving at `v_leader`.
/// No leader is encoded as an infinite gap. A non-positive gap means the
/// cars already overlap; emergency braking is returned and the collision is
/// the metric layer's business.
///
/// The dynamic part of the desired gap is clamped at zero (receding leaders
/// do not shrink the requirement), which keeps the output monotone
/// nonincreasing in the own speed.
pub fn idm_accel(v: f64, gap: f64, v_leader: f64, p: &IDMParams) -> f64 {
    if gap <= 0.0 {
        return -MAX_PHYSICAL_BRAKE;
    }
    let free = 1.0 - math::powf(v / p.v0, p.delta_exp);
    let interaction = if gap.is_finite() {
        let dynamic = v * p.time_headway
            + v * (v - v_leader) / (2.0 * math::sqrt(p.a_max * p.b_comfort));
        let s_star = p.s0 + dynamic.max(0.0);
        (s_star / gap) * (s_star / gap)
    } else {
        0.0
    };
    (p.a_max * (free - interaction)).clamp(-MAX_PHYSICAL_BRAKE, p.a_max)
}

/// A neighbor as seen from the ego car: bumper-to-bumper gap and speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub gap: f64,
    pub v: f64,
}

/// Leader/follower context of one lane relative to the ego car.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LaneContext {
    pub leader: Option<Neighbor>,
    pub follower: Option<Neighbor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneDecision {
    Stay,
    Change,
}

fn accel_toward(n: Option<&Neighbor>, v: f64, p: &IDMParams) -> f64 {
    match n {
        Some(lead) => idm_accel(v, lead.gap, lead.v, p),
        None => idm_accel(v, f64::INFINITY, 0.0, p),
    }
}

/// MOBIL lane-change criterion: the new follower must not be forced to brake
/// harder than `b_safe`, and the politeness-weighted acceleration advantage
/// must exceed the threshold. All hypothetical accelerations come from
/// [`idm_accel`].
pub fn mobil_decide(
    v_ego: f64,
    current: &LaneContext,
    target: &LaneContext,
    car_length: f64,
    p_idm: &IDMParams,
    p_mobil: &MOBILParams,
) -> LaneDecision {
    // Physically blocked: the target slot overlaps the ego car.
    if target.leader.map_or(false, |n| n.gap <= 0.0)
        || target.follower.map_or(false, |n| n.gap <= 0.0)
    {
        return LaneDecision::Stay;
    }

    let a_ego = accel_toward(current.leader.as_ref(), v_ego, p_idm);
    let a_ego_new = accel_toward(target.leader.as_ref(), v_ego, p_idm);

    // New follower, before and after the ego inserts in front of it.
    let (nf_delta, nf_after) = match target.follower {
        Some(f) => {
            let before = match target.leader {
                Some(lead) => idm_accel(f.v, f.gap + car_length + lead.gap, lead.v, p_idm),
                None => idm_accel(f.v, f64::INFINITY, 0.0, p_idm),
            };
            let after = idm_accel(f.v, f.gap, v_ego, p_idm);
            (after - before, after)
        }
        None => (0.0, 0.0),
    };
    if nf_after < -p_mobil.b_safe {
        return LaneDecision::Stay;
    }

    // Old follower is relieved by the ego leaving.
    let of_delta = match current.follower {
        Some(f) => {
            let before = idm_accel(f.v, f.gap, v_ego, p_idm);
            let after = match current.leader {
                Some(lead) => idm_accel(f.v, f.gap + car_length + lead.gap, lead.v, p_idm),
                None => idm_accel(f.v, f64::INFINITY, 0.0, p_idm),
            };
            after - before
        }
        None => 0.0,
    };

    let incentive = (a_ego_new - a_ego) + p_mobil.politeness * (nf_delta + of_delta);
    if incentive > p_mobil.a_threshold {
        LaneDecision::Change
    } else {
        LaneDecision::Stay
    }
}

fn perturb(rng: &mut impl Rng, mean: f64, std_frac: f64, floor: f64) -> f64 {
    if std_frac <= 0.0 {
        return mean;
    }
    let normal = Normal::new(mean, mean.abs() * std_frac).expect("finite std");
    normal.sample(rng).max(floor)
}

/// Draw one driver's parameters from the population: independent Gaussian
/// perturbations per field, clamped positive (politeness to [0, 1]).
pub fn sample_driver_params(
    pop: &DriverPopulation,
    rng: &mut impl Rng,
) -> (IDMParams, MOBILParams) {
    let m = &pop.idm_mean;
    let idm = IDMParams {
        v0: perturb(rng, m.v0, pop.std_frac, 1.0),
        time_headway: perturb(rng, m.time_headway, pop.std_frac, 0.1),
        s0: perturb(rng, m.s0, pop.std_frac, 0.1),
        a_max: perturb(rng, m.a_max, pop.std_frac, 0.1),
        b_comfort: perturb(rng, m.b_comfort, pop.std_frac, 0.1),
        delta_exp: perturb(rng, m.delta_exp, pop.std_frac, 1.0),
    };
    let mb = &pop.mobil_mean;
    let mobil = MOBILParams {
        politeness: perturb(rng, mb.politeness, pop.std_frac, 0.0).min(1.0),
        a_threshold: perturb(rng, mb.a_threshold, pop.std_frac, 0.01),
        b_safe: perturb(rng, mb.b_safe, pop.std_frac, 0.5),
    };
    (idm, mobil)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p() -> IDMParams {
        IDMParams::default()
    }

    #[test]
    fn free_road_equilibrium() {
        let a = idm_accel(25.0, f64::INFINITY, 0.0, &p());
        assert!(a.abs() < 1e-12);
    }

    #[test]
    fn standing_start_full_throttle() {
        let a = idm_accel(0.0, f64::INFINITY, 0.0, &p());
        assert_eq!(a, p().a_max);
    }

    #[test]
    fn following_hand_value() {
        // v=20, v0=25, gap=30, leader at 20: s* = 2 + 30 = 32,
        // a = 1.5 (1 - 0.8^4 - (32/30)^2) = -0.82107...
        let params = IDMParams {
            v0: 25.0,
            time_headway: 1.5,
            s0: 2.0,
            a_max: 1.5,
            b_comfort: 2.0,
            delta_exp: 4.0,
        };
        let a = idm_accel(20.0, 30.0, 20.0, &params);
        let expect = 1.5 * (1.0 - 0.8f64.powi(4) - (32.0f64 / 30.0).powi(2));
        assert!((a - expect).abs() < 1e-12);
        assert!((a + 0.8211).abs() < 1e-3, "a = {a}");
    }

    #[test]
    fn overlap_is_emergency() {
        assert_eq!(idm_accel(20.0, 0.0, 20.0, &p()), -MAX_PHYSICAL_BRAKE);
        assert_eq!(idm_accel(20.0, -3.0, 20.0, &p()), -MAX_PHYSICAL_BRAKE);
    }

    #[test]
    fn monotone_in_speed_and_gap() {
        for &(gap, v_leader) in &[(10.0, 5.0), (30.0, 20.0), (80.0, 40.0), (15.0, 0.0)] {
            let mut prev = f64::INFINITY;
            for i in 0..=60 {
                let v = i as f64 * 0.5;
                let a = idm_accel(v, gap, v_leader, &p());
                assert!(a <= prev + 1e-12, "gap={gap} v={v}");
                prev = a;
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=100 {
            let a = idm_accel(20.0, i as f64, 15.0, &p());
            assert!(a >= prev - 1e-12);
            prev = a;
        }
    }

    #[test]
    fn mobil_stays_on_empty_road() {
        let empty = LaneContext::default();
        let d = mobil_decide(20.0, &empty, &empty, 5.0, &p(), &MOBILParams::default());
        assert_eq!(d, LaneDecision::Stay);
    }

    #[test]
    fn mobil_changes_past_slow_leader() {
        let current = LaneContext {
            leader: Some(Neighbor { gap: 12.0, v: 12.0 }),
            follower: None,
        };
        let target = LaneContext::default();
        let d = mobil_decide(22.0, &current, &target, 5.0, &p(), &MOBILParams::default());
        assert_eq!(d, LaneDecision::Change);
    }

    #[test]
    fn mobil_safety_veto() {
        // Fast follower right behind the target slot: braking required of it
        // exceeds b_safe, so the attractive change is vetoed.
        let current = LaneContext {
            leader: Some(Neighbor { gap: 12.0, v: 12.0 }),
            follower: None,
        };
        let target = LaneContext {
            leader: None,
            follower: Some(Neighbor { gap: 1.0, v: 30.0 }),
        };
        let d = mobil_decide(22.0, &current, &target, 5.0, &p(), &MOBILParams::default());
        assert_eq!(d, LaneDecision::Stay);
    }

    #[test]
    fn mobil_translation_invariance() {
        // Context is built from gaps only, so uniform longitudinal shifts
        // cannot change the decision; spot-check equal contexts.
        let current = LaneContext {
            leader: Some(Neighbor { gap: 18.0, v: 17.0 }),
            follower: Some(Neighbor { gap: 25.0, v: 21.0 }),
        };
        let target = LaneContext {
            leader: Some(Neighbor { gap: 40.0, v: 24.0 }),
            follower: Some(Neighbor { gap: 30.0, v: 20.0 }),
        };
        let a = mobil_decide(20.0, &current, &target, 5.0, &p(), &MOBILParams::default());
        let b = mobil_decide(20.0, &current, &target, 5.0, &p(), &MOBILParams::default());
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_zero_std_is_mean() {
        let pop = DriverPopulation {
            std_frac: 0.0,
            ..DriverPopulation::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (idm, mobil) = sample_driver_params(&pop, &mut rng);
        assert_eq!(idm, pop.idm_mean);
        assert_eq!(mobil, pop.mobil_mean);
    }

    #[test]
    fn sampling_deterministic_under_seed() {
        let pop = DriverPopulation::default();
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            assert_eq!(
                sample_driver_params(&pop, &mut a),
                sample_driver_params(&pop, &mut b)
            );
        }
    }

    #[test]
    fn sampling_mean_converges() {
        let pop = DriverPopulation::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mut sum_v0 = 0.0;
        let mut sum_pol = 0.0;
        for _ in 0..n {
            let (idm, mobil) = sample_driver_params(&pop, &mut rng);
            sum_v0 += idm.v0;
            sum_pol += mobil.politeness;
        }
        let mean_v0 = sum_v0 / n as f64;
        let sigma_v0 = pop.idm_mean.v0 * pop.std_frac;
        assert!(
            (mean_v0 - pop.idm_mean.v0).abs() < 3.0 * sigma_v0 / (n as f64).sqrt(),
            "mean v0 {mean_v0}"
        );
        // Politeness is clamped to [0,1]; only sanity-range check.
        let mean_pol = sum_pol / n as f64;
        assert!(mean_pol > 0.25 && mean_pol < 0.35);
    }
}
