//! Reference trajectories (constant-speed circle and two straight legs) and
//! the metrics used to compare them with planned missions.

use alloc::vec::Vec;

use thiserror::Error;

use crate::channel::FsoLink;
use crate::dynamics::{kinematic_residuals_excluding, slot_powers, trajectory_energy_j, DynamicsError, EnergyModel, Trajectory, UavPlatform};
use crate::math;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("speed {speed} m/s outside [{v_min}, {v_max}]")]
    SpeedOutOfRange { speed: f64, v_min: f64, v_max: f64 },
    #[error("centripetal acceleration {accel} m/s² exceeds a_max = {a_max}")]
    AccelerationLimit { accel: f64, a_max: f64 },
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("duration must be at least one slot")]
    EmptyDuration,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("straight path needs distinct waypoints")]
    DegenerateLeg,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Straight,
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub speed_mps: f64,
    /// Circle radius; ignored by the straight path.
    pub radius_m: f64,
    /// Circle duration; the straight path's length follows from its legs.
    pub duration_slots: usize,
}

impl BaselineSpec {
    pub fn validate(&self, platform: &UavPlatform) -> Result<(), BaselineError> {
        let s = self.speed_mps;
        if !(s >= platform.v_min && s <= platform.v_max) {
            return Err(BaselineError::SpeedOutOfRange { speed: s, v_min: platform.v_min, v_max: platform.v_max });
        }
        if self.kind == BaselineKind::Circular {
            if !(self.radius_m > 0.0) {
                return Err(BaselineError::NonPositiveRadius(self.radius_m));
            }
            let accel = s * s / self.radius_m;
            if accel > platform.a_max {
                return Err(BaselineError::AccelerationLimit { accel, a_max: platform.a_max });
            }
            if self.duration_slots == 0 {
                return Err(BaselineError::EmptyDuration);
            }
        }
        Ok(())
    }
}

/// Uniform counter-clockwise motion on a circle about the origin, sampled
/// from the analytic solution. The discrete update is then only satisfied
/// to third order in `δt`; see [`circular_residual_bound`].
pub fn circular_path(spec: &BaselineSpec, dt_s: f64, platform: &UavPlatform) -> Result<Trajectory, BaselineError> {
    if !(dt_s > 0.0) {
        return Err(BaselineError::NonPositiveStep(dt_s));
    }
    let spec = BaselineSpec { kind: BaselineKind::Circular, ..*spec };
    spec.validate(platform)?;
    let (r, s) = (spec.radius_m, spec.speed_mps);
    let omega = s / r;
    let n = spec.duration_slots;
    let mut q = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    let mut a = Vec::with_capacity(n);
    for k in 0..=n {
        let (sin, cos) = math::sin_cos(omega * k as f64 * dt_s);
        q.push(Vec2::new(r * cos, r * sin));
        v.push(Vec2::new(-s * sin, s * cos));
        if k < n {
            a.push(Vec2::new(-omega * s * cos, -omega * s * sin));
        }
    }
    Ok(Trajectory::new(dt_s, q, v, a)?)
}

/// Leading-order bound on the per-step position and velocity residuals of
/// [`circular_path`]: `v³δt³/(6r²)` and `v³δt²/(2r²)`.
pub fn circular_residual_bound(speed_mps: f64, radius_m: f64, dt_s: f64) -> (f64, f64) {
    let c = speed_mps * speed_mps * speed_mps / (radius_m * radius_m);
    (c * dt_s * dt_s * dt_s / 6.0, c * dt_s * dt_s / 2.0)
}

/// A straight-leg baseline and the steps where it turns instantaneously.
#[derive(Debug, Clone, PartialEq)]
pub struct StraightPath {
    pub trajectory: Trajectory,
    /// Steps that do not satisfy the discrete update (the heading change).
    pub turn_steps: Vec<usize>,
}

impl StraightPath {
    /// Largest residual over the consistent steps.
    pub fn residual_outside_turn(&self) -> f64 {
        kinematic_residuals_excluding(&self.trajectory, &self.turn_steps).max()
    }
}

/// Fly `q_initial → terminal → q_final` at constant speed with zero
/// acceleration. The slot count is `ceil(L / (v·δt))`; the speed is lowered
/// as needed so the last sample lands on `q_final`.
pub fn straight_path(
    spec: &BaselineSpec,
    q_initial: Vec2,
    terminal: Vec2,
    q_final: Vec2,
    dt_s: f64,
    platform: &UavPlatform,
) -> Result<StraightPath, BaselineError> {
    if !(dt_s > 0.0) {
        return Err(BaselineError::NonPositiveStep(dt_s));
    }
    BaselineSpec { kind: BaselineKind::Straight, ..*spec }.validate(platform)?;
    let leg1 = terminal - q_initial;
    let leg2 = q_final - terminal;
    let (l1, l2) = (leg1.norm(), leg2.norm());
    let (Some(d1), Some(d2)) = (leg1.normalized(), leg2.normalized()) else {
        return Err(BaselineError::DegenerateLeg);
    };
    let total = l1 + l2;
    let n = (math::ceil(total / (spec.speed_mps * dt_s) - 1e-9) as usize).max(1);
    let speed = total / (n as f64 * dt_s);
    if speed < platform.v_min {
        return Err(BaselineError::SpeedOutOfRange { speed, v_min: platform.v_min, v_max: platform.v_max });
    }
    let point = |s: f64| if s <= l1 { q_initial + d1 * s } else { terminal + d2 * (s - l1) };
    let mut q = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let s = (speed * dt_s * k as f64).min(total);
        q.push(if k == n { q_final } else { point(s) });
        // Velocity of the leg about to be flown; the last state keeps the
        // final leg's heading.
        v.push(if s < l1 - 1e-9 { d1 * speed } else { d2 * speed });
    }
    let trajectory = Trajectory::new(dt_s, q, v, alloc::vec![Vec2::ZERO; n])?;
    let turn_steps = (0..n)
        .filter(|&k| {
            let dq = (trajectory.q[k + 1] - trajectory.q[k] - trajectory.v[k] * dt_s).norm();
            let dv = (trajectory.v[k + 1] - trajectory.v[k]).norm();
            dq > 1e-9 * total.max(1.0) || dv > 1e-9 * speed
        })
        .collect();
    Ok(StraightPath { trajectory, turn_steps })
}

/// Comparison metrics of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean `R/B` over the slots meeting the rate threshold (bit/s/Hz).
    pub spectral_efficiency: f64,
    /// Exact energy of the whole trajectory (J).
    pub energy_j: f64,
    pub service_slots: usize,
    /// Service time the budget would sustain at the mean in-boundary power,
    /// per kJ of budget (s/kJ). Zero without service slots.
    pub service_time_per_kj: f64,
    /// Service time the budget would sustain (s).
    pub sustainable_service_s: f64,
}

pub fn evaluate_metrics(
    traj: &Trajectory,
    link: &FsoLink,
    platform: &UavPlatform,
    energy_total_j: f64,
    rate_threshold_bps: f64,
) -> Result<Metrics, BaselineError> {
    let powers = slot_powers(traj, platform, EnergyModel::Exact)?;
    let energy_j = trajectory_energy_j(traj, platform, EnergyModel::Exact)?;
    let mut se_sum = 0.0;
    let mut p_sum = 0.0;
    let mut count = 0usize;
    for k in 0..traj.steps() {
        if link.rate_bps(traj.q[k]) >= rate_threshold_bps {
            se_sum += link.spectral_efficiency(traj.q[k]);
            p_sum += powers[k];
            count += 1;
        }
    }
    if count == 0 {
        return Ok(Metrics { spectral_efficiency: 0.0, energy_j, service_slots: 0, service_time_per_kj: 0.0, sustainable_service_s: 0.0 });
    }
    let mean_power = p_sum / count as f64;
    let sustainable = energy_total_j / mean_power;
    Ok(Metrics {
        spectral_efficiency: se_sum / count as f64,
        energy_j,
        service_slots: count,
        service_time_per_kj: sustainable / (energy_total_j / 1000.0),
        sustainable_service_s: sustainable,
    })
}
