//! Rotation scheme: solve one short in-disk segment whose end state is its
//! start state rotated by `W(θ)`, then tile it.

use core::f64::consts::PI;

use alloc::vec::Vec;

use super::init::{discrete_circle, discrete_circle_rates};
use super::{Planner, PlannerError};
use crate::dynamics::{slot_powers, EnergyModel, Trajectory};
use crate::scp::{sca_minimize, ConicSolver, Disk, DiskScope, IterationRecord, LocalPoint, Objective, ScpError, SegmentSpec};
use crate::Rotation;

#[derive(Debug, Clone, PartialEq)]
pub struct LowComplexityResult {
    pub segment: Trajectory,
    pub theta_rad: f64,
    /// Mean per-slot power under the upper-bound model (W).
    pub average_power_w: f64,
    /// Final surrogate objective (W·slots).
    pub objective: f64,
    pub trace: Vec<IterationRecord>,
}

/// Pick an exactly kinematic circle about the origin whose net turn over
/// `steps` matches `W(θ)` (a clockwise turn by θ, possibly plus whole
/// turns), staying within the limits and the disk.
fn rotation_guess(planner_radius: f64, platform: &crate::dynamics::UavPlatform, dt: f64, steps: usize, theta: f64) -> Option<Trajectory> {
    let mut best: Option<(f64, Trajectory)> = None;
    for m in [0i32, 1, -1, 2, -2] {
        let sweep = -theta + 2.0 * PI * m as f64;
        let per_step = sweep / steps as f64;
        if per_step.abs() < 1e-9 || per_step.abs() >= PI {
            continue;
        }
        let (unit_speed, unit_accel) = discrete_circle_rates(1.0, per_step, dt);
        let mut radius = (platform.min_power_speed() / unit_speed).min(0.9 * planner_radius);
        radius = radius.min(0.95 * platform.a_max / unit_accel);
        let speed = unit_speed * radius;
        if speed < platform.v_min * 1.001 || speed > platform.v_max {
            continue;
        }
        let accel = unit_accel * radius;
        let power = crate::dynamics::power_unchecked(speed, speed, accel * accel, platform);
        if best.as_ref().map_or(true, |(p, _)| power < *p) {
            best = Some((power, discrete_circle(radius, 0.5 * PI, per_step, steps, dt)));
        }
    }
    best.map(|(_, t)| t)
}

impl<'a, S: ConicSolver + ?Sized> Planner<'a, S> {
    /// Minimum-energy segment of `steps` steps inside the service disk with
    /// `q[K] = W(θ) q[0]` and `v[K] = W(θ) v[0]`.
    pub fn plan_low_complexity(&self, steps: usize, theta_rad: f64) -> Result<LowComplexityResult, PlannerError> {
        if steps < 2 {
            return Err(PlannerError::InvalidArgument("rotation segment needs at least two steps"));
        }
        let sc = self.scenario;
        let platform = sc.platform();
        let spec = SegmentSpec {
            steps,
            dt_s: sc.dt_s(),
            start: None,
            end: None,
            disk: Some(Disk { radius_m: sc.service_radius_m(), scope: DiskScope::All }),
            rotation: Some(Rotation::new(theta_rad)),
            objective: Objective::Energy,
        };
        let infeasible = PlannerError::RotationInfeasible { steps, theta_rad };
        let guess = rotation_guess(sc.service_radius_m(), platform, sc.dt_s(), steps, theta_rad).ok_or(infeasible.clone())?;
        let out = match sca_minimize(&spec, platform, LocalPoint::from_trajectory(&guess), self.solver, &self.settings) {
            Ok(out) => out,
            Err(ScpError::BadInitialPoint) => return Err(infeasible),
            Err(e) => return Err(e.into()),
        };
        let powers = slot_powers(out.trajectory(), platform, EnergyModel::UpperBound)?;
        Ok(LowComplexityResult {
            average_power_w: powers.iter().sum::<f64>() / steps as f64,
            objective: out.objective,
            segment: out.iterate.trajectory,
            theta_rad,
            trace: out.trace,
        })
    }
}

/// Concatenate `segment` with `copies` successive rotations of itself.
///
/// The result has `(copies + 1)·K` steps; consecutive blocks share their
/// junction state.
pub fn replicate_rotation(segment: &Trajectory, theta_rad: f64, copies: u32) -> Result<Trajectory, PlannerError> {
    let w = Rotation::new(theta_rad);
    let scale = segment.q[0].norm().max(1.0);
    let mismatch = (segment.last_position() - w.apply(segment.q[0])).norm() / scale
        + (segment.last_velocity() - w.apply(segment.v[0])).norm() / segment.v[0].norm().max(1.0);
    if !(mismatch <= 1e-6) {
        return Err(PlannerError::RotationContractViolated { mismatch });
    }
    let mut out = segment.clone();
    for i in 1..=copies {
        out.append(&segment.rotated(&w.power(i)));
    }
    Ok(out)
}
