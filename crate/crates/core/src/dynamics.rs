//! Discrete-time kinematics and the fixed-wing propulsion model.
//!
//! A trajectory with `K` steps holds `K + 1` states `(q[k], v[k])` and `K`
//! accelerations. Step `k` advances the state with the second-order Taylor
//! update
//!
//! ```text
//! v[k+1] = v[k] + a[k]·δt
//! q[k+1] = q[k] + v[k]·δt + ½·a[k]·δt²
//! ```
//!
//! and is charged the power `P(v[k], a[k])`, so a `K`-step trajectory
//! accumulates `K` slots of propulsion energy.

use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid platform: {0}")]
    InvalidPlatform(&'static str),
    #[error("trajectory arrays have inconsistent lengths (q={q}, v={v}, a={a})")]
    LengthMismatch { q: usize, v: usize, a: usize },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("slack speed must be positive, got {0}")]
    NonPositiveSlack(f64),
    #[error("speed {speed} m/s at slot {slot} is too small for the fixed-wing model")]
    DegenerateSpeed { slot: usize, speed: f64 },
    #[error("boundary {which} speed {speed} m/s lies outside [{v_min}, {v_max}]")]
    BoundarySpeed { which: &'static str, speed: f64, v_min: f64, v_max: f64 },
}

/// Airframe constants and kinematic limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavPlatform {
    /// Parasitic drag constant (kg/m).
    pub c1: f64,
    /// Induced drag constant (kg·m³/s⁴).
    pub c2: f64,
    pub mass_kg: f64,
    pub g: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_max: f64,
}

impl UavPlatform {
    /// Airframe used throughout the reference scenario. The mass only enters
    /// the kinetic-energy term, which vanishes when the initial and final
    /// speeds agree.
    pub const REFERENCE: UavPlatform = UavPlatform {
        c1: 9.26e-4,
        c2: 2250.0,
        mass_kg: 9.65,
        g: 9.8,
        v_min: 3.0,
        v_max: 100.0,
        a_max: 5.0,
    };

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.mass_kg > 0.0 && self.g > 0.0) {
            return Err(DynamicsError::InvalidPlatform("c1, c2, mass and g must be positive"));
        }
        if !(self.v_min > 0.0 && self.v_min < self.v_max) {
            return Err(DynamicsError::InvalidPlatform("need 0 < v_min < v_max"));
        }
        if !(self.a_max > 0.0) {
            return Err(DynamicsError::InvalidPlatform("a_max must be positive"));
        }
        Ok(())
    }

    /// Speed minimizing level-flight power `c1·v³ + c2/v`.
    pub fn min_power_speed(&self) -> f64 {
        math::powf(self.c2 / (3.0 * self.c1), 0.25)
    }

    /// Level-flight power at [`Self::min_power_speed`]. No admissible flight
    /// slot can be charged less than this under the upper-bound model.
    pub fn min_level_power(&self) -> f64 {
        let v = self.min_power_speed().clamp(self.v_min, self.v_max);
        self.c1 * v * v * v + self.c2 / v
    }

    pub fn speed_admissible(&self, speed: f64, tol: f64) -> bool {
        speed >= self.v_min - tol && speed <= self.v_max + tol
    }
}

/// Pinned endpoint states. `q_final` and `v_final` may be left free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub q_initial: Vec2,
    pub v_initial: Vec2,
    pub q_final: Option<Vec2>,
    pub v_final: Option<Vec2>,
}

impl BoundaryConditions {
    pub fn check_speeds(&self, platform: &UavPlatform) -> Result<(), DynamicsError> {
        let check = |which, v: Vec2| {
            let speed = v.norm();
            if platform.speed_admissible(speed, 1e-9) {
                Ok(())
            } else {
                Err(DynamicsError::BoundarySpeed { which, speed, v_min: platform.v_min, v_max: platform.v_max })
            }
        };
        check("initial", self.v_initial)?;
        if let Some(v) = self.v_final {
            check("final", v)?;
        }
        Ok(())
    }

    /// The same mission flown backwards: start at the final state with the
    /// velocity reversed.
    pub fn reversed(&self) -> Option<BoundaryConditions> {
        Some(BoundaryConditions {
            q_initial: self.q_final?,
            v_initial: -self.v_final?,
            q_final: Some(self.q_initial),
            v_final: Some(-self.v_initial),
        })
    }
}

/// Time-indexed samples of a planar flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt_s: f64,
    pub q: Vec<Vec2>,
    pub v: Vec<Vec2>,
    pub a: Vec<Vec2>,
}

impl Trajectory {
    pub fn new(dt_s: f64, q: Vec<Vec2>, v: Vec<Vec2>, a: Vec<Vec2>) -> Result<Self, DynamicsError> {
        if !(dt_s > 0.0) {
            return Err(DynamicsError::NonPositiveStep(dt_s));
        }
        if q.len() != v.len() || q.len() != a.len() + 1 {
            return Err(DynamicsError::LengthMismatch { q: q.len(), v: v.len(), a: a.len() });
        }
        Ok(Trajectory { dt_s, q, v, a })
    }

    /// A single state and no steps.
    pub fn from_state(dt_s: f64, q: Vec2, v: Vec2) -> Self {
        Trajectory { dt_s, q: alloc::vec![q], v: alloc::vec![v], a: Vec::new() }
    }

    /// Integrate `accelerations` forward from an initial state.
    pub fn propagate(dt_s: f64, q0: Vec2, v0: Vec2, accelerations: &[Vec2]) -> Self {
        let mut q = Vec::with_capacity(accelerations.len() + 1);
        let mut v = Vec::with_capacity(accelerations.len() + 1);
        q.push(q0);
        v.push(v0);
        for (k, &a) in accelerations.iter().enumerate() {
            let (qk, vk) = (q[k], v[k]);
            v.push(vk + a * dt_s);
            q.push(qk + vk * dt_s + a * (0.5 * dt_s * dt_s));
        }
        Trajectory { dt_s, q, v, a: accelerations.to_vec() }
    }

    /// Number of steps (charged slots).
    pub fn steps(&self) -> usize {
        self.a.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.steps() as f64 * self.dt_s
    }

    pub fn first_position(&self) -> Vec2 {
        self.q[0]
    }

    pub fn last_position(&self) -> Vec2 {
        self.q[self.q.len() - 1]
    }

    pub fn last_velocity(&self) -> Vec2 {
        self.v[self.v.len() - 1]
    }

    /// Append `next`, whose first state must coincide with this trajectory's
    /// last state. The shared state is stored once.
    pub fn append(&mut self, next: &Trajectory) {
        debug_assert_eq!(self.dt_s, next.dt_s);
        self.q.extend_from_slice(&next.q[1..]);
        self.v.extend_from_slice(&next.v[1..]);
        self.a.extend_from_slice(&next.a);
    }

    /// Apply a rotation to every sample.
    pub fn rotated(&self, w: &crate::Rotation) -> Trajectory {
        Trajectory {
            dt_s: self.dt_s,
            q: self.q.iter().map(|&p| w.apply(p)).collect(),
            v: self.v.iter().map(|&p| w.apply(p)).collect(),
            a: self.a.iter().map(|&p| w.apply(p)).collect(),
        }
    }

    /// Time-reversed copy: states in reverse order with velocities negated.
    /// The discrete update is symmetric under this map (accelerations keep
    /// their sign and reverse their order).
    pub fn time_reversed(&self) -> Trajectory {
        Trajectory {
            dt_s: self.dt_s,
            q: self.q.iter().rev().copied().collect(),
            v: self.v.iter().rev().map(|&v| -v).collect(),
            a: self.a.iter().rev().copied().collect(),
        }
    }
}

/// Largest per-step residuals of the discrete update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicResiduals {
    pub max_position_m: f64,
    pub max_velocity_mps: f64,
    /// Step attaining `max_position_m`.
    pub worst_position_step: Option<usize>,
    pub worst_velocity_step: Option<usize>,
}

impl KinematicResiduals {
    pub fn max(&self) -> f64 {
        self.max_position_m.max(self.max_velocity_mps)
    }
}

pub fn kinematic_residuals(traj: &Trajectory) -> KinematicResiduals {
    kinematic_residuals_excluding(traj, &[])
}

/// Residuals ignoring the listed steps (used for baselines with a
/// deliberate instantaneous heading change).
pub fn kinematic_residuals_excluding(traj: &Trajectory, skip: &[usize]) -> KinematicResiduals {
    let dt = traj.dt_s;
    let mut out = KinematicResiduals {
        max_position_m: 0.0,
        max_velocity_mps: 0.0,
        worst_position_step: None,
        worst_velocity_step: None,
    };
    for (k, &a) in traj.a.iter().enumerate() {
        if skip.contains(&k) {
            continue;
        }
        let rv = (traj.v[k + 1] - traj.v[k] - a * dt).norm();
        let rq = (traj.q[k + 1] - traj.q[k] - traj.v[k] * dt - a * (0.5 * dt * dt)).norm();
        if rv > out.max_velocity_mps {
            out.max_velocity_mps = rv;
            out.worst_velocity_step = Some(k);
        }
        if rq > out.max_position_m {
            out.max_position_m = rq;
            out.worst_position_step = Some(k);
        }
    }
    out
}

/// Worst excess over each kinematic limit (0 when the limit holds).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LimitReport {
    pub over_v_max: f64,
    pub under_v_min: f64,
    pub over_a_max: f64,
    pub worst_v_max_slot: Option<usize>,
    pub worst_v_min_slot: Option<usize>,
    pub worst_a_max_slot: Option<usize>,
}

impl LimitReport {
    pub fn max_excess(&self) -> f64 {
        self.over_v_max.max(self.under_v_min).max(self.over_a_max)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_excess() <= tol
    }
}

pub fn limit_violations(traj: &Trajectory, platform: &UavPlatform) -> LimitReport {
    let mut r = LimitReport::default();
    for (k, v) in traj.v.iter().enumerate() {
        let s = v.norm();
        if s - platform.v_max > r.over_v_max {
            r.over_v_max = s - platform.v_max;
            r.worst_v_max_slot = Some(k);
        }
        if platform.v_min - s > r.under_v_min {
            r.under_v_min = platform.v_min - s;
            r.worst_v_min_slot = Some(k);
        }
    }
    for (k, a) in traj.a.iter().enumerate() {
        let m = a.norm();
        if m - platform.a_max > r.over_a_max {
            r.over_a_max = m - platform.a_max;
            r.worst_a_max_slot = Some(k);
        }
    }
    r
}

/// Per-slot power `c1‖v‖³ + (c2/τ)(1 + ‖a‖²/g²)`.
///
/// With `τ = ‖v‖` this is the upper bound of the exact model (exact when the
/// acceleration is perpendicular to the velocity).
pub fn power_w(v: Vec2, tau: f64, a: Vec2, platform: &UavPlatform) -> Result<f64, DynamicsError> {
    if !(tau > 0.0) {
        return Err(DynamicsError::NonPositiveSlack(tau));
    }
    Ok(power_unchecked(v.norm(), tau, a.norm_sq(), platform))
}

#[inline]
pub(crate) fn power_unchecked(speed: f64, tau: f64, accel_sq: f64, platform: &UavPlatform) -> f64 {
    let g2 = platform.g * platform.g;
    platform.c1 * speed * speed * speed + platform.c2 / tau * (1.0 + accel_sq / g2)
}

/// Exact per-slot power, removing the acceleration component along the
/// velocity from the induced-drag term.
pub fn exact_power_w(v: Vec2, a: Vec2, platform: &UavPlatform) -> Result<f64, DynamicsError> {
    let speed = v.norm();
    if !(speed >= 1e-9) {
        return Err(DynamicsError::DegenerateSpeed { slot: 0, speed });
    }
    let along = a.dot(v);
    let lateral_sq = (a.norm_sq() - along * along / (speed * speed)).max(0.0);
    let g2 = platform.g * platform.g;
    Ok(platform.c1 * speed * speed * speed + platform.c2 / speed * (1.0 + lateral_sq / g2))
}

/// Which energy model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyModel {
    /// The full fixed-wing model, including the kinetic term.
    Exact,
    /// The model with `aᵀv = 0` assumed (an upper bound), plus the kinetic
    /// term.
    UpperBound,
}

/// Per-slot powers of a trajectory (W), `steps()` entries.
pub fn slot_powers(traj: &Trajectory, platform: &UavPlatform, model: EnergyModel) -> Result<Vec<f64>, DynamicsError> {
    traj.a
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let v = traj.v[k];
            let speed = v.norm();
            if !(speed >= 1e-9) {
                return Err(DynamicsError::DegenerateSpeed { slot: k, speed });
            }
            Ok(match model {
                EnergyModel::Exact => exact_power_w(v, a, platform)?,
                EnergyModel::UpperBound => power_unchecked(speed, speed, a.norm_sq(), platform),
            })
        })
        .collect()
}

/// `(m/2)(‖v_last‖² − ‖v_first‖²)`.
pub fn kinetic_energy_change_j(traj: &Trajectory, platform: &UavPlatform) -> f64 {
    0.5 * platform.mass_kg * (traj.last_velocity().norm_sq() - traj.v[0].norm_sq())
}

/// Total energy in joules.
pub fn trajectory_energy_j(traj: &Trajectory, platform: &UavPlatform, model: EnergyModel) -> Result<f64, DynamicsError> {
    let propulsion: f64 = slot_powers(traj, platform, model)?.iter().sum::<f64>() * traj.dt_s;
    Ok(propulsion + kinetic_energy_change_j(traj, platform))
}

/// Propulsion energy under the upper-bound model, without the kinetic
/// term. This is the quantity compared against the energy budget.
pub fn bound_propulsion_energy_j(traj: &Trajectory, platform: &UavPlatform) -> Result<f64, DynamicsError> {
    Ok(slot_powers(traj, platform, EnergyModel::UpperBound)?.iter().sum::<f64>() * traj.dt_s)
}
