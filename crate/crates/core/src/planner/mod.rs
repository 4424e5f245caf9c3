//! Mission-level planning on top of the SCA engine.
//!
//! A mission flies from `q_I` into the service disk (entry), loiters inside
//! it while the link meets the rate threshold (service), and leaves for
//! `q_F` (exit). The planners here choose the slot counts of those phases
//! and the trajectories flown in them.

mod complexity;
mod efficiency;
mod entry;
mod feasibility;
mod flight_time;
mod init;
mod operation_time;
mod rotation;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub use complexity::{complexity_estimate, sum_nm_cubed, ComplexityEstimate};
pub use efficiency::{DinkelbachStep, EfficiencyResult, DINKELBACH_TOLERANCE};
pub use entry::{EntryProbe, EntrySolution, Side};
pub use feasibility::{FeasibilityVerdict, FEASIBILITY_EPSILON};
pub use flight_time::BudgetProbe;
pub use init::{discrete_circle, pursuit_trajectory};
pub use operation_time::{OperationTimeResult, RateProbe, MAX_OPERATION_STEPS};
pub use rotation::{replicate_rotation, LowComplexityResult};

use crate::channel::{ChannelError, FsoLink};
use crate::dynamics::{BoundaryConditions, DynamicsError, Trajectory, UavPlatform};
use crate::scp::{ConicSolver, IterationRecord, ScpError, ScpSettings};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("channel: {0}")]
    Channel(#[from] ChannelError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("scp: {0}")]
    Scp(#[from] ScpError),
    #[error("scenario needs a final position and velocity")]
    IncompleteBoundary,
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("energy budget must be positive, got {0}")]
    NonPositiveBudget(f64),
    #[error("no feasible {side} horizon in {lower}..={upper}")]
    EntryInfeasible { side: &'static str, lower: usize, upper: usize },
    #[error("no feasible service horizon up to {upper}")]
    ServiceInfeasible { upper: usize },
    #[error("rotation by {theta_rad} rad over {steps} steps is infeasible")]
    RotationInfeasible { steps: usize, theta_rad: f64 },
    #[error("segment does not satisfy the rotation pins (mismatch {mismatch})")]
    RotationContractViolated { mismatch: f64 },
    #[error("demand of {demand_bits} bits not reachable within {upper} slots")]
    DemandInfeasible { demand_bits: f64, upper: usize },
    #[error("no feasible trajectory with {steps} steps between the pinned states")]
    HorizonInfeasible { steps: usize },
    #[error("{0}")]
    InvalidArgument(&'static str),
}

/// Inputs of a mission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub link: FsoLink,
    pub platform: UavPlatform,
    pub dt_s: f64,
    /// Both endpoints must be given.
    pub bc: BoundaryConditions,
    pub rate_threshold_bps: f64,
    pub energy_budget_j: f64,
}

/// A validated mission with its service radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    params: ScenarioParams,
    service_radius_m: f64,
}

impl Scenario {
    pub fn new(params: ScenarioParams) -> Result<Self, PlannerError> {
        params.platform.validate()?;
        if !(params.dt_s > 0.0) {
            return Err(PlannerError::NonPositiveStep(params.dt_s));
        }
        if !(params.energy_budget_j > 0.0) {
            return Err(PlannerError::NonPositiveBudget(params.energy_budget_j));
        }
        if params.bc.q_final.is_none() || params.bc.v_final.is_none() {
            return Err(PlannerError::IncompleteBoundary);
        }
        params.bc.check_speeds(&params.platform)?;
        let service_radius_m = params.link.service_radius_m(params.rate_threshold_bps)?;
        Ok(Scenario { params, service_radius_m })
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    pub fn link(&self) -> &FsoLink {
        &self.params.link
    }

    pub fn platform(&self) -> &UavPlatform {
        &self.params.platform
    }

    pub fn dt_s(&self) -> f64 {
        self.params.dt_s
    }

    pub fn bc(&self) -> &BoundaryConditions {
        &self.params.bc
    }

    pub fn q_final(&self) -> crate::Vec2 {
        self.params.bc.q_final.expect("validated")
    }

    pub fn v_final(&self) -> crate::Vec2 {
        self.params.bc.v_final.expect("validated")
    }

    pub fn rate_threshold_bps(&self) -> f64 {
        self.params.rate_threshold_bps
    }

    pub fn energy_budget_j(&self) -> f64 {
        self.params.energy_budget_j
    }

    pub fn service_radius_m(&self) -> f64 {
        self.service_radius_m
    }

    /// The same mission flown in reverse: start at `q_F` with `−v_F`.
    pub fn reversed(&self) -> Scenario {
        let bc = self.params.bc.reversed().expect("validated");
        Scenario { params: ScenarioParams { bc, ..self.params }, service_radius_m: self.service_radius_m }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    OptimalLocal,
    Infeasible,
    BudgetExceeded,
}

impl PlanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlanStatus::OptimalLocal => "Optimal-local",
            PlanStatus::Infeasible => "Infeasible",
            PlanStatus::BudgetExceeded => "BudgetExceeded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SegmentCounts {
    pub entry: usize,
    pub service: usize,
    pub exit: usize,
}

impl SegmentCounts {
    pub fn total(&self) -> usize {
        self.entry + self.service + self.exit
    }
}

/// Propulsion energy per phase under the upper-bound model (J). This is
/// the quantity tested against the budget.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub entry_j: f64,
    pub service_j: f64,
    pub exit_j: f64,
    pub total_j: f64,
}

/// SCA trace of one solved segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentLog {
    pub label: String,
    pub steps: usize,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub segments: SegmentCounts,
    pub energy: EnergyBreakdown,
    /// Whole-trajectory energy under the exact model, kinetic term included.
    pub exact_energy_j: f64,
    /// `R(q[k])` for every charged slot.
    pub rates_bps: Vec<f64>,
    pub logs: Vec<SegmentLog>,
    pub status: PlanStatus,
    /// Every budget test evaluated while searching `N_total`.
    pub probes: Vec<BudgetProbe>,
}

impl PlanResult {
    /// Slot range of the service phase.
    pub fn service_slots(&self) -> core::ops::Range<usize> {
        self.segments.entry..self.segments.entry + self.segments.service
    }

    pub fn service_time_s(&self) -> f64 {
        self.segments.service as f64 * self.trajectory.dt_s
    }
}

/// Binds a scenario to a solver and SCA settings.
#[derive(Debug)]
pub struct Planner<'a, S: ?Sized> {
    pub scenario: &'a Scenario,
    pub solver: &'a S,
    pub settings: ScpSettings,
}

impl<'a, S: ConicSolver + ?Sized> Planner<'a, S> {
    pub fn new(scenario: &'a Scenario, solver: &'a S, settings: ScpSettings) -> Self {
        Planner { scenario, solver, settings }
    }
}

pub(crate) fn rates_of(link: &FsoLink, traj: &Trajectory) -> Vec<f64> {
    (0..traj.steps()).map(|k| link.rate_bps(traj.q[k])).collect()
}
