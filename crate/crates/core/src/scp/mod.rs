//! Successive convex approximation.
//!
//! Each outer iteration linearizes the slack-speed constraint at the
//! previous velocity profile, solves the resulting conic program and moves
//! the local point. Because the tangent underestimator is exact at the
//! local point, the previous iterate stays feasible and the surrogate
//! objective cannot increase (up to solver tolerance).

mod conic;
mod subproblem;

use alloc::vec::Vec;

use thiserror::Error;

pub use conic::{Affine, Cone, ConicProgram, ConicSolution, ConicSolver, SolveError, Var};
pub use subproblem::{
    build_energy_subproblem, build_feasibility_subproblem, build_subproblem, extract, repair_kinematics, taylor_underestimator, Disk,
    DiskScope, Layout, Objective, Pin, SegmentIterate, SegmentKind, SegmentSpec, Subproblem,
};

use crate::dynamics::{trajectory_energy_j, EnergyModel, Trajectory, UavPlatform};
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScpError {
    #[error("horizon must have at least one step")]
    EmptyHorizon,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("boundary radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("local point has {got} velocities, expected {expected}")]
    LocalPointLength { expected: usize, got: usize },
    #[error("pinned speed {speed} m/s is outside the platform limits")]
    PinnedSpeed { speed: f64 },
    #[error("segment needs a final state")]
    MissingFinalState,
    #[error("settings: {0}")]
    InvalidSettings(&'static str),
    #[error("initial point gives an infeasible first subproblem")]
    BadInitialPoint,
    #[error("subproblem {iteration}: {source}")]
    Subproblem { iteration: usize, source: SolveError },
}

/// Outer-loop settings.
#[derive(Debug, Clone, Copy)]
pub struct ScpSettings {
    /// Stop once the relative objective decrease drops below this.
    pub relative_tolerance: f64,
    pub max_outer_iterations: usize,
    /// Tolerance handed to the conic solver.
    pub subproblem_tolerance: f64,
    /// Wall clock in seconds, used only to fill the trace.
    pub clock: Option<fn() -> f64>,
}

impl Default for ScpSettings {
    fn default() -> Self {
        ScpSettings { relative_tolerance: 1e-3, max_outer_iterations: 30, subproblem_tolerance: 1e-8, clock: None }
    }
}

impl ScpSettings {
    pub fn validate(&self) -> Result<(), ScpError> {
        if !(self.relative_tolerance > 0.0) || !(self.subproblem_tolerance > 0.0) {
            return Err(ScpError::InvalidSettings("tolerances must be positive"));
        }
        if self.max_outer_iterations == 0 {
            return Err(ScpError::InvalidSettings("max_outer_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Linearization point: one velocity per state.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPoint {
    pub v: Vec<Vec2>,
}

impl LocalPoint {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        LocalPoint { v: traj.v.clone() }
    }

    pub fn constant(states: usize, v: Vec2) -> Self {
        LocalPoint { v: alloc::vec![v; states] }
    }
}

/// One outer iteration of the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Surrogate objective (W·slots for energy problems).
    pub objective: f64,
    /// Energy under the upper-bound model (J), kinetic term included.
    pub bound_energy_j: f64,
    /// Energy under the exact model (J), kinetic term included.
    pub exact_energy_j: f64,
    pub kkt_residual: f64,
    /// Constraint violation of the previous iterate in this iteration's
    /// program.
    pub carried_violation: f64,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    /// More than three increases; the best iterate is returned.
    NonDecrease,
    IterationLimit,
}

/// Result of [`sca_minimize`].
#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub iterate: SegmentIterate,
    pub objective: f64,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
}

impl ScaOutcome {
    pub fn trajectory(&self) -> &Trajectory {
        &self.iterate.trajectory
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

const MAX_NON_DECREASE_EVENTS: usize = 3;

/// Run the SCA loop on `spec` from `initial`.
pub fn sca_minimize<S: ConicSolver + ?Sized>(
    spec: &SegmentSpec,
    platform: &UavPlatform,
    initial: LocalPoint,
    solver: &S,
    settings: &ScpSettings,
) -> Result<ScaOutcome, ScpError> {
    sca_minimize_until(spec, platform, initial, solver, settings, 1e-12)
}

/// [`sca_minimize`] that also stops once the objective is at or below
/// `target`.
pub fn sca_minimize_until<S: ConicSolver + ?Sized>(
    spec: &SegmentSpec,
    platform: &UavPlatform,
    initial: LocalPoint,
    solver: &S,
    settings: &ScpSettings,
    target: f64,
) -> Result<ScaOutcome, ScpError> {
    settings.validate()?;
    let start = settings.clock.map(|c| c());
    let mut local = initial;
    let mut best: Option<(SegmentIterate, f64)> = None;
    let mut trace = Vec::new();
    let mut damping = 1.0_f64;
    let mut events = 0;
    let mut termination = Termination::IterationLimit;

    for iteration in 1..=settings.max_outer_iterations {
        let sub = build_subproblem(spec, platform, &local)?;
        let carried_violation = best
            .as_ref()
            .map_or(0.0, |(it, _)| sub.program.relative_violation(&it.to_vector(&sub, platform)));
        let solution = match solver.solve(&sub.program, settings.subproblem_tolerance) {
            Ok(s) => s,
            Err(SolveError::Infeasible) if iteration == 1 => return Err(ScpError::BadInitialPoint),
            Err(source) => return Err(ScpError::Subproblem { iteration, source }),
        };
        let mut candidate = extract(&sub, &solution.x);
        if damping < 1.0 {
            if let Some((prev, _)) = &best {
                candidate = prev.blend(&candidate, damping);
            }
        }
        let objective = candidate.objective(spec, platform);

        let mut accepted = true;
        let mut done = false;
        if let Some((_, prev)) = best {
            let slack = 1e-9 * prev.abs().max(1e-3);
            if objective > prev + slack {
                accepted = false;
                events += 1;
                damping *= 0.5;
                if events >= MAX_NON_DECREASE_EVENTS {
                    termination = Termination::NonDecrease;
                    done = true;
                }
            } else if (prev - objective) <= settings.relative_tolerance * prev.abs() {
                termination = Termination::Converged;
                done = true;
            }
        }
        if accepted {
            let (bound, exact) = energies(&candidate.trajectory, platform);
            trace.push(IterationRecord {
                iteration,
                objective,
                bound_energy_j: bound,
                exact_energy_j: exact,
                kkt_residual: solution.kkt_residual,
                carried_violation,
                wall_time_s: settings.clock.zip(start).map(|(c, s)| c() - s),
            });
            local = candidate.local_point(spec);
            best = Some((candidate, objective));
            if objective <= target {
                termination = Termination::Converged;
                done = true;
            }
        }
        if done {
            break;
        }
    }
    let (iterate, objective) = best.expect("at least one iteration runs");
    Ok(ScaOutcome { iterate, objective, trace, termination })
}

fn energies(traj: &Trajectory, platform: &UavPlatform) -> (f64, f64) {
    let bound = trajectory_energy_j(traj, platform, EnergyModel::UpperBound).unwrap_or(f64::INFINITY);
    let exact = trajectory_energy_j(traj, platform, EnergyModel::Exact).unwrap_or(f64::INFINITY);
    (bound, exact)
}
