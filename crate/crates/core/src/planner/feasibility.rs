//! Feasibility check by minimizing the distance between a kinematic velocity
//! profile and a speed-feasible one.

use alloc::vec::Vec;

use super::init::orbit_trajectory;
use super::{Planner, PlannerError};
use crate::dynamics::{BoundaryConditions, Trajectory};
use crate::math;
use crate::scp::{sca_minimize_until, ConicSolver, IterationRecord, LocalPoint, Objective, ScpError, SegmentKind, SegmentSpec, SolveError};

/// Verdict threshold on `Σ‖v1 − v2‖²` (m²/s²).
pub const FEASIBILITY_EPSILON: f64 = 1e-3;

/// Extra speed demanded of the speed-feasible copy. With the total squared
/// distance below [`FEASIBILITY_EPSILON`], no kinematic velocity can then be
/// slower than `v_min`.
pub(crate) fn speed_margin() -> f64 {
    2.0 * math::sqrt(FEASIBILITY_EPSILON)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    /// Final `Σ‖v1 − v2‖²`; infinite when the kinematic set is empty.
    pub distance: f64,
    /// The kinematic trajectory `(q, v1, a)` of the last iterate.
    pub trajectory: Option<Trajectory>,
    pub trace: Vec<IterationRecord>,
}

impl FeasibilityVerdict {
    fn infeasible() -> Self {
        FeasibilityVerdict { feasible: false, distance: f64::INFINITY, trajectory: None, trace: Vec::new() }
    }

    /// Linearization point for the energy problem on the same constraints.
    pub fn local_point(&self) -> Option<LocalPoint> {
        self.trajectory.as_ref().filter(|_| self.feasible).map(LocalPoint::from_trajectory)
    }
}

impl<'a, S: ConicSolver + ?Sized> Planner<'a, S> {
    /// Run the feasibility SCA on the constraints of `spec`.
    pub(crate) fn check_feasible(&self, spec: &SegmentSpec, initial: LocalPoint) -> Result<FeasibilityVerdict, PlannerError> {
        let spec = SegmentSpec { objective: Objective::Feasibility { speed_margin: speed_margin() }, ..*spec };
        let platform = self.scenario.platform();
        match sca_minimize_until(&spec, platform, initial, self.solver, &self.settings, 0.1 * FEASIBILITY_EPSILON) {
            Ok(out) => Ok(FeasibilityVerdict {
                feasible: out.objective <= FEASIBILITY_EPSILON,
                distance: out.objective,
                trajectory: Some(out.iterate.trajectory),
                trace: out.trace,
            }),
            Err(ScpError::BadInitialPoint) => Ok(FeasibilityVerdict::infeasible()),
            Err(ScpError::Subproblem { source: SolveError::Infeasible, .. }) => Ok(FeasibilityVerdict::infeasible()),
            Err(ScpError::Subproblem { .. }) => Ok(FeasibilityVerdict::infeasible()),
            Err(e) => Err(e.into()),
        }
    }

    /// Feasibility of a service phase of `steps` steps between the handoff
    /// states in `handoff`, with velocities usable to start the service SCA.
    pub fn find_initial_velocities(&self, steps: usize, handoff: &BoundaryConditions) -> Result<FeasibilityVerdict, PlannerError> {
        let radius = self.scenario.service_radius_m();
        let spec = SegmentSpec::phase(SegmentKind::Service, steps, self.scenario.dt_s(), handoff, Some(radius))?;
        // Orbit at the handoff radius so a disk that never binds does not
        // change the starting point.
        let handoff_radius = handoff.q_initial.norm().max(handoff.q_final.map_or(0.0, |q| q.norm()));
        let rho = handoff_radius.clamp(0.3 * radius, 0.9 * radius);
        let guess = orbit_trajectory(self.scenario.platform(), self.scenario.dt_s(), handoff.q_initial, handoff.v_initial, steps, rho);
        self.check_feasible(&spec, LocalPoint::from_trajectory(&guess))
    }
}
