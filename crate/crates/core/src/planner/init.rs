//! Kinematically exact starting trajectories for the SCA loops.
//!
//! Every trajectory produced here satisfies the discrete update exactly and
//! respects the speed and acceleration limits, so its velocities are a valid
//! first linearization point.

use core::f64::consts::PI;

use alloc::vec::Vec;

use crate::dynamics::{Trajectory, UavPlatform};
use crate::math;
use crate::Vec2;

/// Share of the acceleration limit spent on turning and on speed changes.
const TURN_SHARE: f64 = 0.7;
const SPEED_SHARE: f64 = 0.3;

fn wrap_angle(mut a: f64) -> f64 {
    while a > PI {
        a -= 2.0 * PI;
    }
    while a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Velocity after one limited step from `v` toward heading `target_heading`
/// at speed `target_speed`.
fn steer(platform: &UavPlatform, dt: f64, v: Vec2, target_heading: f64, target_speed: f64) -> Vec2 {
    let speed = v.norm().max(platform.v_min);
    let heading = v.angle();
    let max_turn = TURN_SHARE * platform.a_max * dt / speed;
    let turn = wrap_angle(target_heading - heading).clamp(-max_turn, max_turn);
    let dv = SPEED_SHARE * platform.a_max * dt;
    let new_speed = (speed + (target_speed - speed).clamp(-dv, dv)).clamp(platform.v_min, platform.v_max);
    Vec2::from_polar(new_speed, heading + turn)
}

/// Orbit speed that keeps the turn inside the steering budget.
fn orbit_speed(platform: &UavPlatform, radius: f64) -> f64 {
    let cap = math::sqrt(0.8 * TURN_SHARE * platform.a_max * radius);
    platform.min_power_speed().min(cap).clamp(platform.v_min, platform.v_max)
}

/// Heading of a vector field that converges onto an orbit of radius `rho`
/// about the origin, counter-clockwise for `spin = 1` and clockwise for
/// `spin = -1`.
fn orbit_heading(q: Vec2, rho: f64, spin: f64) -> f64 {
    let r2 = q.norm_sq();
    let r = math::sqrt(r2);
    if r < 1e-9 {
        return 0.0;
    }
    let radial = q / r;
    let tangent = radial.perp() * spin;
    let den = r2 + rho * rho;
    let dir = radial * (-(r2 - rho * rho) / den) + tangent * (2.0 * r * rho / den);
    dir.angle()
}

/// Fly `steps` steps from `(q0, v0)` toward the disk of radius `radius`
/// centred at the origin, pacing the approach so the disk is reached near
/// the last step, then loiter inside it.
pub fn pursuit_trajectory(platform: &UavPlatform, dt: f64, q0: Vec2, v0: Vec2, steps: usize, radius: f64) -> Trajectory {
    let aim = 0.9 * radius;
    let rho = 0.6 * radius;
    let loiter_speed = orbit_speed(platform, rho);
    let mut q = q0;
    let mut v = v0;
    let mut accel = Vec::with_capacity(steps);
    for k in 0..steps {
        let r = q.norm();
        let (heading, speed) = if r > aim {
            let remaining = (steps - k) as f64 * dt;
            let pace = (r - aim) / remaining;
            ((-q).angle(), pace.max(platform.min_power_speed()).min(platform.v_max))
        } else {
            (orbit_heading(q, rho, 1.0), loiter_speed)
        };
        let next = steer(platform, dt, v, heading, speed);
        let a = (next - v) / dt;
        q = q + v * dt + a * (0.5 * dt * dt);
        v = next;
        accel.push(a);
    }
    Trajectory::propagate(dt, q0, v0, &accel)
}

/// Loiter for `steps` steps from `(q0, v0)`, converging onto an orbit of
/// radius `rho` flown in the sense of `v0` about the origin.
pub(crate) fn orbit_trajectory(platform: &UavPlatform, dt: f64, q0: Vec2, v0: Vec2, steps: usize, rho: f64) -> Trajectory {
    let speed = orbit_speed(platform, rho);
    let spin = if q0.x * v0.y - q0.y * v0.x < 0.0 { -1.0 } else { 1.0 };
    let mut v = v0;
    let mut q = q0;
    let mut accel = Vec::with_capacity(steps);
    for _ in 0..steps {
        let next = steer(platform, dt, v, orbit_heading(q, rho, spin), speed);
        let a = (next - v) / dt;
        q = q + v * dt + a * (0.5 * dt * dt);
        v = next;
        accel.push(a);
    }
    Trajectory::propagate(dt, q0, v0, &accel)
}

/// Uniform circular motion about the origin that satisfies the discrete
/// update exactly: every state is the previous one rotated by
/// `angle_per_step` (counter-clockwise positive).
///
/// With `z = e^{iω}`, the invariant solution has `v = 2i·tan(ω/2)·q/dt` and
/// `a = (z − 1)·v/dt`.
pub fn discrete_circle(radius: f64, start_angle: f64, angle_per_step: f64, steps: usize, dt: f64) -> Trajectory {
    let q0 = Vec2::from_polar(radius, start_angle);
    let v0 = q0.perp() * (2.0 * math::tan(0.5 * angle_per_step) / dt);
    let (s, c) = math::sin_cos(angle_per_step);
    let a0 = Vec2::new((c - 1.0) * v0.x - s * v0.y, s * v0.x + (c - 1.0) * v0.y) / dt;
    let rot = |p: Vec2, k: usize| -> Vec2 {
        let (s, c) = math::sin_cos(angle_per_step * k as f64);
        Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)
    };
    Trajectory {
        dt_s: dt,
        q: (0..=steps).map(|k| rot(q0, k)).collect(),
        v: (0..=steps).map(|k| rot(v0, k)).collect(),
        a: (0..steps).map(|k| rot(a0, k)).collect(),
    }
}

/// Speed and acceleration of [`discrete_circle`].
pub(crate) fn discrete_circle_rates(radius: f64, angle_per_step: f64, dt: f64) -> (f64, f64) {
    let speed = 2.0 * math::tan(0.5 * angle_per_step.abs()) * radius / dt;
    let accel = 2.0 * math::sin(0.5 * angle_per_step.abs()) * speed / dt;
    (speed, accel)
}

/// Constant-speed straight-line velocities from `q0` to `q1` over `steps`
/// steps, clamped to the speed limits. Used only as a linearization point.
pub(crate) fn straight_local(platform: &UavPlatform, dt: f64, q0: Vec2, q1: Vec2, steps: usize) -> Vec<Vec2> {
    let d = q1 - q0;
    let dir = d.normalized().unwrap_or(Vec2::new(1.0, 0.0));
    let speed = (d.norm() / (steps as f64 * dt)).clamp(platform.v_min.max(1.0), platform.v_max);
    alloc::vec![dir * speed; steps + 1]
}
