//! Convexified trajectory subproblems.
//!
//! A segment of `K` steps has states `0..=K` and accelerations `0..K`; step
//! `k` is charged the power of `(v[k], a[k])`. The nonconvex `1/‖v‖` and
//! minimum-speed terms are handled with a slack speed `τ[k]` that must stay
//! below the tangent underestimator of `‖v[k]‖²` at the local point.
//!
//! Everything is expressed with second-order cones:
//!
//! * `c1‖v‖³`: `u ≥ ‖v‖`, `wS ≥ u²`, `tu ≥ w²`, so `t ≥ u³/S²`,
//!   charged as `c1 S² t` for a speed scale `S`.
//! * `(c2/τ)(1 + ‖a‖²/g²)`: `sτ ≥ g² + ‖a‖²`, charged as `(c2/g²) s`.
//! * `τ² ≤ φ(v)`: `(φ/S)·S ≥ τ²` with `φ` affine.
//! * high-SNR rate: `r ≥ ‖(H, q)‖`, so `R' ≥ B/(2 ln 2)(ln k1 − k2 r)`.

use alloc::vec::Vec;

use super::conic::{Affine, ConicProgram, Var};
use super::{LocalPoint, ScpError};
use crate::channel::FsoLink;
use crate::dynamics::{power_unchecked, BoundaryConditions, Trajectory, UavPlatform};
use crate::{Rotation, Vec2};

/// Shrink factor applied to the disk radius so solver tolerance cannot push
/// a point outside.
const DISK_MARGIN: f64 = 1e-7;

/// A pinned state. The velocity may be left free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin {
    pub q: Vec2,
    pub v: Option<Vec2>,
}

impl Pin {
    pub fn state(q: Vec2, v: Vec2) -> Self {
        Pin { q, v: Some(v) }
    }
}

/// Which state indices the boundary disk applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiskScope {
    First,
    Last,
    /// Indices `1..K`.
    Interior,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub radius_m: f64,
    pub scope: DiskScope,
}

/// What the subproblem minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// `Σ P(v, τ, a)` over the charged steps.
    Energy,
    /// `−Σ R'(q)`: maximize the high-SNR rate surrogate.
    Rate(FsoLink),
    /// `λ Σ P − Σ R'`, the Dinkelbach parametric objective.
    RateMinusEnergy { link: FsoLink, lambda: f64 },
    /// `Σ ‖v1 − v2‖²` between a kinematic velocity and one whose speed is at
    /// least `v_min + speed_margin`.
    Feasibility { speed_margin: f64 },
}

/// Full description of a segment subproblem, minus the local point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpec {
    pub steps: usize,
    pub dt_s: f64,
    pub start: Option<Pin>,
    pub end: Option<Pin>,
    pub disk: Option<Disk>,
    /// Rotation pins `q[K] = W q[0]`, `v[K] = W v[0]`.
    pub rotation: Option<Rotation>,
    pub objective: Objective,
}

/// The three mission phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Entry,
    Service,
    Exit,
}

impl SegmentSpec {
    /// Energy subproblem for a mission phase.
    ///
    /// Entry pins `bc`'s initial state and puts the final position in the
    /// disk; exit pins `bc`'s final state and puts the initial position in
    /// the disk; service pins both ends and keeps interior states in the
    /// disk.
    pub fn phase(kind: SegmentKind, steps: usize, dt_s: f64, bc: &BoundaryConditions, radius_m: Option<f64>) -> Result<Self, ScpError> {
        let initial = Pin::state(bc.q_initial, bc.v_initial);
        let final_pin = bc.q_final.map(|q| Pin { q, v: bc.v_final });
        let (start, end, scope) = match kind {
            SegmentKind::Entry => (Some(initial), None, DiskScope::Last),
            SegmentKind::Exit => (None, Some(final_pin.ok_or(ScpError::MissingFinalState)?), DiskScope::First),
            SegmentKind::Service => (Some(initial), Some(final_pin.ok_or(ScpError::MissingFinalState)?), DiskScope::Interior),
        };
        Ok(SegmentSpec {
            steps,
            dt_s,
            start,
            end,
            disk: radius_m.map(|radius_m| Disk { radius_m, scope }),
            rotation: None,
            objective: Objective::Energy,
        })
    }

    fn disk_covers(&self, k: usize) -> bool {
        match self.disk.map(|d| d.scope) {
            None => false,
            Some(DiskScope::First) => k == 0,
            Some(DiskScope::Last) => k == self.steps,
            Some(DiskScope::Interior) => k > 0 && k < self.steps,
            Some(DiskScope::All) => true,
        }
    }

    /// Velocity the local point must use at state `k`, if pinned.
    pub(crate) fn pinned_velocity(&self, k: usize) -> Option<Vec2> {
        if k == 0 {
            if let Some(v) = self.start.and_then(|p| p.v) {
                return Some(v);
            }
        }
        if k == self.steps {
            if let Some(v) = self.end.and_then(|p| p.v) {
                return Some(v);
            }
        }
        None
    }

    pub(crate) fn validate(&self, platform: &UavPlatform, local: &LocalPoint) -> Result<(), ScpError> {
        if self.steps == 0 {
            return Err(ScpError::EmptyHorizon);
        }
        if !(self.dt_s > 0.0) {
            return Err(ScpError::NonPositiveStep(self.dt_s));
        }
        if local.v.len() != self.steps + 1 {
            return Err(ScpError::LocalPointLength { expected: self.steps + 1, got: local.v.len() });
        }
        for pin in [self.start, self.end].into_iter().flatten() {
            if let Some(v) = pin.v {
                if !platform.speed_admissible(v.norm(), 1e-9) {
                    return Err(ScpError::PinnedSpeed { speed: v.norm() });
                }
            }
        }
        if let Some(d) = self.disk {
            if !(d.radius_m > 0.0) {
                return Err(ScpError::NonPositiveRadius(d.radius_m));
            }
        }
        Ok(())
    }
}

/// Variable handles of one assembled subproblem.
#[derive(Debug, Clone)]
pub struct Layout {
    pub q: Vec<[Var; 2]>,
    pub v: Vec<[Var; 2]>,
    /// Speed slack per state, attached to `v` (or to `v2` for feasibility).
    pub tau: Vec<Var>,
    pub a: Vec<[Var; 2]>,
    /// Second velocity copy of the feasibility problem.
    pub v2: Vec<[Var; 2]>,
}

/// A subproblem ready for a solver.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub spec: SegmentSpec,
    pub program: ConicProgram,
    pub layout: Layout,
}

/// Tangent-plane underestimator of `‖v‖²` at `v_j`.
pub fn taylor_underestimator(v_j: Vec2, v: Vec2) -> f64 {
    v_j.norm_sq() + 2.0 * v_j.dot(v - v_j)
}

fn affine2(x: [Var; 2]) -> [Affine; 2] {
    [Affine::var(x[0]), Affine::var(x[1])]
}

/// Assemble the convex subproblem of `spec` linearized at `local`.
pub fn build_subproblem(spec: &SegmentSpec, platform: &UavPlatform, local: &LocalPoint) -> Result<Subproblem, ScpError> {
    spec.validate(platform, local)?;
    let k_steps = spec.steps;
    let dt = spec.dt_s;
    let feasibility = matches!(spec.objective, Objective::Feasibility { .. });
    let speed_margin = match spec.objective {
        Objective::Feasibility { speed_margin } => speed_margin,
        _ => 0.0,
    };
    let speed_scale = platform.min_power_speed();
    let mut p = ConicProgram::new();

    let q: Vec<[Var; 2]> = (0..=k_steps).map(|_| p.add_vars()).collect();
    let v: Vec<[Var; 2]> = (0..=k_steps).map(|_| p.add_vars()).collect();
    let a: Vec<[Var; 2]> = (0..k_steps).map(|_| p.add_vars()).collect();
    let v2: Vec<[Var; 2]> = if feasibility { (0..=k_steps).map(|_| p.add_vars()).collect() } else { Vec::new() };
    let tau: Vec<Var> = (0..=k_steps).map(|_| p.add_var()).collect();

    // Discrete kinematics.
    for k in 0..k_steps {
        for c in 0..2 {
            p.equal_zero(Affine::var(v[k + 1][c]).plus(v[k][c], -1.0).plus(a[k][c], -dt));
            p.equal_zero(
                Affine::var(q[k + 1][c])
                    .plus(q[k][c], -1.0)
                    .plus(v[k][c], -dt)
                    .plus(a[k][c], -0.5 * dt * dt),
            );
        }
    }

    // Endpoint pins.
    let pin = |p: &mut ConicProgram, k: usize, value: Pin| {
        for c in 0..2 {
            p.equal_zero(Affine::var(q[k][c]).offset(-component(value.q, c)));
            if let Some(vv) = value.v {
                p.equal_zero(Affine::var(v[k][c]).offset(-component(vv, c)));
            }
        }
    };
    if let Some(s) = spec.start {
        pin(&mut p, 0, s);
    }
    if let Some(e) = spec.end {
        pin(&mut p, k_steps, e);
    }
    if let Some(w) = spec.rotation {
        let m = w.matrix();
        for (x, r) in [(&q, 0), (&q, 1), (&v, 0), (&v, 1)] {
            p.equal_zero(
                Affine::var(x[k_steps][r])
                    .plus(x[0][0], -m[r][0])
                    .plus(x[0][1], -m[r][1]),
            );
        }
    }

    // Speed, acceleration and disk limits.
    for k in 0..=k_steps {
        p.second_order(Affine::constant(platform.v_max), &affine2(v[k]));
        if spec.disk_covers(k) {
            let radius = spec.disk.map_or(0.0, |d| d.radius_m) * (1.0 - DISK_MARGIN);
            p.second_order(Affine::constant(radius), &affine2(q[k]));
        }
    }
    for ak in &a {
        p.second_order(Affine::constant(platform.a_max), &affine2(*ak));
    }

    // Slack speed: τ ≥ v_min and τ² ≤ φ(v).
    let slack_target = if feasibility { &v2 } else { &v };
    for k in 0..=k_steps {
        let vj = spec.pinned_velocity(k).unwrap_or(local.v[k]);
        let vv = slack_target[k];
        let phi = Affine::term(vv[0], 2.0 * vj.x)
            .plus(vv[1], 2.0 * vj.y)
            .offset(-vj.norm_sq());
        p.nonnegative(Affine::var(tau[k]).offset(-(platform.v_min + speed_margin)));
        p.rotated_second_order(phi.scaled(1.0 / speed_scale), Affine::constant(speed_scale), &[Affine::var(tau[k])]);
    }

    let energy_weight;
    let mut rate_weight = 0.0;
    let mut rate_link = None;
    match spec.objective {
        Objective::Energy => {
            energy_weight = 1.0 / (k_steps as f64 * platform.min_level_power());
        }
        Objective::Rate(link) => {
            energy_weight = 0.0;
            rate_weight = 1.0 / (k_steps as f64 * link.rate_scale() * rate_reference(&link));
            rate_link = Some(link);
        }
        Objective::RateMinusEnergy { link, lambda } => {
            let norm = 1.0 / (k_steps as f64 * link.rate_scale() * rate_reference(&link));
            energy_weight = lambda * norm;
            rate_weight = norm;
            rate_link = Some(link);
        }
        Objective::Feasibility { .. } => {
            energy_weight = 0.0;
            for k in 0..=k_steps {
                if spec.pinned_velocity(k).is_some() {
                    continue;
                }
                for c in 0..2 {
                    p.add_squared_cost(&Affine::var(v[k][c]).plus(v2[k][c], -1.0), 1.0);
                }
            }
        }
    }

    if energy_weight > 0.0 {
        let g2 = platform.g * platform.g;
        for k in 0..k_steps {
            let [u, w, t, s] = p.add_vars();
            p.second_order(Affine::var(u), &affine2(v[k]));
            p.rotated_second_order(Affine::var(w), Affine::constant(speed_scale), &[Affine::var(u)]);
            p.rotated_second_order(Affine::var(t), Affine::var(u), &[Affine::var(w)]);
            p.rotated_second_order(
                Affine::var(s),
                Affine::var(tau[k]),
                &[Affine::constant(platform.g), Affine::var(a[k][0]), Affine::var(a[k][1])],
            );
            p.add_linear_cost(&Affine::term(t, platform.c1 * speed_scale * speed_scale), energy_weight);
            p.add_linear_cost(&Affine::term(s, platform.c2 / g2), energy_weight);
        }
    }

    if let Some(link) = rate_link {
        let h = link.height_difference_m();
        let scale = link.rate_scale();
        for k in 0..k_steps {
            let r = p.add_var();
            p.second_order(Affine::var(r), &[Affine::constant(h), Affine::var(q[k][0]), Affine::var(q[k][1])]);
            p.add_linear_cost(&Affine::term(r, scale * link.k2()).offset(-scale * crate::math::ln(link.k1())), rate_weight);
        }
    }

    Ok(Subproblem { spec: *spec, program: p, layout: Layout { q, v, tau, a, v2 } })
}

/// Typical per-slot value of `ln k1 − k2·d`, used to normalize rate
/// objectives.
fn rate_reference(link: &FsoLink) -> f64 {
    crate::math::ln(link.k1()).max(1.0)
}

fn component(v: Vec2, c: usize) -> f64 {
    if c == 0 {
        v.x
    } else {
        v.y
    }
}

/// Energy subproblem for one mission phase.
pub fn build_energy_subproblem(
    kind: SegmentKind,
    steps: usize,
    dt_s: f64,
    bc: &BoundaryConditions,
    boundary_radius_m: Option<f64>,
    local: &LocalPoint,
    platform: &UavPlatform,
) -> Result<Subproblem, ScpError> {
    let spec = SegmentSpec::phase(kind, steps, dt_s, bc, boundary_radius_m)?;
    build_subproblem(&spec, platform, local)
}

/// Feasibility subproblem for the service phase between two pinned states.
pub fn build_feasibility_subproblem(
    steps: usize,
    dt_s: f64,
    bc: &BoundaryConditions,
    boundary_radius_m: f64,
    speed_margin: f64,
    local: &LocalPoint,
    platform: &UavPlatform,
) -> Result<Subproblem, ScpError> {
    let mut spec = SegmentSpec::phase(SegmentKind::Service, steps, dt_s, bc, Some(boundary_radius_m))?;
    spec.objective = Objective::Feasibility { speed_margin };
    build_subproblem(&spec, platform, local)
}

/// A primal point of a segment subproblem in physical terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentIterate {
    pub trajectory: Trajectory,
    pub tau: Vec<f64>,
    /// Speed-feasible velocity copy (feasibility problems only).
    pub v2: Vec<Vec2>,
}

impl SegmentIterate {
    /// Surrogate objective in physical units (W·slots, bit/s·slots or m²/s²).
    pub fn objective(&self, spec: &SegmentSpec, platform: &UavPlatform) -> f64 {
        let t = &self.trajectory;
        let energy = || -> f64 {
            (0..t.steps())
                .map(|k| power_unchecked(t.v[k].norm(), self.tau[k].max(1e-12), t.a[k].norm_sq(), platform))
                .sum()
        };
        let rate = |link: &FsoLink| -> f64 { (0..t.steps()).map(|k| link.rate_high_snr_bps(t.q[k])).sum() };
        match spec.objective {
            Objective::Energy => energy(),
            Objective::Rate(link) => -rate(&link),
            Objective::RateMinusEnergy { link, lambda } => lambda * energy() - rate(&link),
            Objective::Feasibility { .. } => (0..=spec.steps)
                .filter(|&k| spec.pinned_velocity(k).is_none())
                .map(|k| (t.v[k] - self.v2[k]).norm_sq())
                .sum(),
        }
    }

    /// Point `self + w·(other − self)`.
    pub fn blend(&self, other: &SegmentIterate, w: f64) -> SegmentIterate {
        let mix = |x: &[Vec2], y: &[Vec2]| -> Vec<Vec2> { x.iter().zip(y).map(|(&a, &b)| a + (b - a) * w).collect() };
        SegmentIterate {
            trajectory: Trajectory {
                dt_s: self.trajectory.dt_s,
                q: mix(&self.trajectory.q, &other.trajectory.q),
                v: mix(&self.trajectory.v, &other.trajectory.v),
                a: mix(&self.trajectory.a, &other.trajectory.a),
            },
            tau: self.tau.iter().zip(&other.tau).map(|(&a, &b)| a + (b - a) * w).collect(),
            v2: mix(&self.v2, &other.v2),
        }
    }

    /// The next linearization point.
    pub fn local_point(&self, spec: &SegmentSpec) -> LocalPoint {
        let source = if matches!(spec.objective, Objective::Feasibility { .. }) { &self.v2 } else { &self.trajectory.v };
        LocalPoint { v: source.clone() }
    }

    /// Variable vector of this point in `sub`'s layout, with auxiliary cone
    /// variables set to their tight values. Used to check that a previous
    /// iterate is feasible for the next subproblem.
    pub fn to_vector(&self, sub: &Subproblem, platform: &UavPlatform) -> Vec<f64> {
        let mut x = alloc::vec![0.0; sub.program.n_vars()];
        let l = &sub.layout;
        let t = &self.trajectory;
        let put = |x: &mut Vec<f64>, vars: [Var; 2], value: Vec2| {
            x[vars[0].0] = value.x;
            x[vars[1].0] = value.y;
        };
        for k in 0..l.q.len() {
            put(&mut x, l.q[k], t.q[k]);
            put(&mut x, l.v[k], t.v[k]);
            x[l.tau[k].0] = self.tau[k];
            if !l.v2.is_empty() {
                put(&mut x, l.v2[k], self.v2[k]);
            }
        }
        for k in 0..l.a.len() {
            put(&mut x, l.a[k], t.a[k]);
        }
        // Auxiliaries follow the layout variables in creation order.
        let mut next = l.tau.last().map_or(0, |v| v.0 + 1);
        let speed_scale = platform.min_power_speed();
        let g2 = platform.g * platform.g;
        let has_energy = !matches!(sub.spec.objective, Objective::Rate(_) | Objective::Feasibility { .. });
        if has_energy {
            for k in 0..l.a.len() {
                let u = t.v[k].norm();
                let w = u * u / speed_scale;
                x[next] = u;
                x[next + 1] = w;
                x[next + 2] = if u > 0.0 { w * w / u } else { 0.0 };
                x[next + 3] = (g2 + t.a[k].norm_sq()) / self.tau[k].max(1e-12);
                next += 4;
            }
        }
        if let Objective::Rate(link) | Objective::RateMinusEnergy { link, .. } = sub.spec.objective {
            for k in 0..l.a.len() {
                x[next] = link.slant_range_m(t.q[k]);
                next += 1;
            }
        }
        x
    }
}

/// Read the physical point out of a solver vector and make it exactly
/// kinematic (see [`repair_kinematics`]).
pub fn extract(sub: &Subproblem, x: &[f64]) -> SegmentIterate {
    let l = &sub.layout;
    let get = |vars: [Var; 2]| Vec2::new(x[vars[0].0], x[vars[1].0]);
    let traj = Trajectory {
        dt_s: sub.spec.dt_s,
        q: l.q.iter().map(|&v| get(v)).collect(),
        v: l.v.iter().map(|&v| get(v)).collect(),
        a: l.a.iter().map(|&v| get(v)).collect(),
    };
    SegmentIterate {
        trajectory: repair_kinematics(&sub.spec, traj),
        tau: l.tau.iter().map(|v| x[v.0]).collect(),
        v2: l.v2.iter().map(|&v| get(v)).collect(),
    }
}

/// Re-integrate the accelerations from the anchored end and apply the
/// least-norm acceleration correction that hits the other end's pins.
///
/// Solver output satisfies the dynamics only to its tolerance; this makes the
/// discrete update hold to rounding while moving the accelerations by about
/// that tolerance.
pub fn repair_kinematics(spec: &SegmentSpec, traj: Trajectory) -> Trajectory {
    if spec.start.is_none() && spec.end.is_some() && spec.rotation.is_none() {
        // Anchor at the pinned final state by flying the segment backwards.
        let reversed_spec = SegmentSpec {
            start: spec.end.map(|p| Pin { q: p.q, v: p.v.map(|v| -v) }),
            end: None,
            ..*spec
        };
        return repair_kinematics(&reversed_spec, traj.time_reversed()).time_reversed();
    }
    let dt = traj.dt_s;
    let q0 = spec.start.map_or(traj.q[0], |p| p.q);
    let v0 = spec.start.and_then(|p| p.v).unwrap_or(traj.v[0]);
    let mut accel = traj.a.clone();
    let target: Option<(Vec2, Option<Vec2>)> = match (spec.end, spec.rotation) {
        (Some(e), _) => Some((e.q, e.v)),
        (None, Some(w)) => Some((w.apply(q0), Some(w.apply(v0)))),
        (None, None) => None,
    };
    if let Some((q_target, v_target)) = target {
        let plain = Trajectory::propagate(dt, q0, v0, &accel);
        let eq = q_target - plain.last_position();
        let k = accel.len();
        let beta = |i: usize| dt * dt * ((k - i) as f64 - 0.5);
        match v_target {
            Some(vt) if k >= 2 => {
                let ev = vt - plain.last_velocity();
                let mut gram = [0.0; 3];
                for i in 0..k {
                    let b = beta(i);
                    gram[0] += dt * dt;
                    gram[1] += dt * b;
                    gram[2] += b * b;
                }
                let det = gram[0] * gram[2] - gram[1] * gram[1];
                let l1 = (ev * gram[2] - eq * gram[1]) / det;
                let l2 = (eq * gram[0] - ev * gram[1]) / det;
                for (i, ai) in accel.iter_mut().enumerate() {
                    *ai += l1 * dt + l2 * beta(i);
                }
            }
            Some(_) => {}
            None => {
                let norm: f64 = (0..k).map(|i| beta(i) * beta(i)).sum();
                for (i, ai) in accel.iter_mut().enumerate() {
                    *ai += eq * (beta(i) / norm);
                }
            }
        }
    }
    Trajectory::propagate(dt, q0, v0, &accel)
}
