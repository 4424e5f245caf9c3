//! Flight-time maximization: the longest mission whose propulsion energy
//! fits the budget.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::entry::{EntrySolution, Side};
use super::{rates_of, EnergyBreakdown, PlanResult, PlanStatus, Planner, PlannerError, SegmentCounts, SegmentLog};
use crate::dynamics::{bound_propulsion_energy_j, trajectory_energy_j, BoundaryConditions, EnergyModel, Trajectory};
use crate::math;
use crate::scp::{sca_minimize, ConicSolver, IterationRecord, SegmentKind, SegmentSpec};

/// One budget test on a total horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetProbe {
    pub n_total: usize,
    pub n_service: usize,
    /// Total propulsion energy, `None` if the service phase was infeasible.
    pub energy_j: Option<f64>,
    pub passed: bool,
}

/// Linear-scan stride used when the bisection bracket turns out invalid.
const FALLBACK_STRIDE: usize = 8;

#[derive(Debug, Clone)]
struct ServiceSolution {
    energy_j: f64,
    trajectory: Trajectory,
    feasibility_trace: Vec<IterationRecord>,
    trace: Vec<IterationRecord>,
}

impl<'a, S: ConicSolver + ?Sized> Planner<'a, S> {
    fn solve_service(&self, steps: usize, handoff: &BoundaryConditions) -> Result<Option<ServiceSolution>, PlannerError> {
        let verdict = self.find_initial_velocities(steps, handoff)?;
        let Some(local) = verdict.local_point() else {
            return Ok(None);
        };
        let sc = self.scenario;
        let spec = SegmentSpec::phase(SegmentKind::Service, steps, sc.dt_s(), handoff, Some(sc.service_radius_m()))?;
        match sca_minimize(&spec, sc.platform(), local, self.solver, &self.settings) {
            Ok(out) => Ok(Some(ServiceSolution {
                energy_j: bound_propulsion_energy_j(out.trajectory(), sc.platform())?,
                trajectory: out.iterate.trajectory,
                feasibility_trace: verdict.trace,
                trace: out.trace,
            })),
            Err(crate::scp::ScpError::BadInitialPoint) | Err(crate::scp::ScpError::Subproblem { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Smallest service horizon that passes the feasibility check, found by
    /// a doubling scan from the straight-line bound followed by bisection.
    fn min_feasible_service(&self, handoff: &BoundaryConditions, cap: usize) -> Result<usize, PlannerError> {
        let sc = self.scenario;
        let gap = (handoff.q_final.expect("pinned") - handoff.q_initial).norm();
        let floor = (math::ceil(gap / (sc.platform().v_max * sc.dt_s())) as usize).max(1);
        let feasible = |n: usize| -> Result<bool, PlannerError> { Ok(self.find_initial_velocities(n, handoff)?.feasible) };
        let mut bad = floor - 1;
        let mut n = floor;
        let mut stride = 1;
        while !feasible(n)? {
            bad = n;
            if n >= cap {
                return Err(PlannerError::ServiceInfeasible { upper: cap });
            }
            n = (n + stride).min(cap);
            stride *= 2;
        }
        let mut good = n;
        while good - bad > 1 {
            let mid = (good + bad) / 2;
            if feasible(mid)? {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(good)
    }

    /// Entry and exit are minimized independently; the service phase is
    /// then fitted between their handoff states, bisecting on the total
    /// horizon against the energy budget.
    pub fn maximize_flight_time(&self) -> Result<PlanResult, PlannerError> {
        let entry = self.minimize_entry_energy(Side::Entry)?;
        let exit = self.minimize_entry_energy(Side::Exit)?;
        self.maximize_flight_time_with(&entry, &exit)
    }

    pub fn maximize_flight_time_with(&self, entry: &EntrySolution, exit: &EntrySolution) -> Result<PlanResult, PlannerError> {
        let sc = self.scenario;
        let budget = sc.energy_budget_j();
        let handoff = BoundaryConditions {
            q_initial: entry.trajectory.last_position(),
            v_initial: entry.trajectory.last_velocity(),
            q_final: Some(exit.trajectory.first_position()),
            v_final: Some(exit.trajectory.v[0]),
        };
        let fixed_steps = entry.steps + exit.steps;
        let fixed_energy = entry.energy_j + exit.energy_j;
        // Every slot costs at least the minimum level-flight power.
        let n_total_upper = math::floor(budget / (sc.dt_s() * sc.platform().min_level_power())) as usize + 1;
        let cap = n_total_upper.saturating_sub(fixed_steps).max(1);
        let n_lower = self.min_feasible_service(&handoff, cap.max(4 * FALLBACK_STRIDE))?;
        let n_upper = cap.max(n_lower + 1);

        let mut memo: BTreeMap<usize, Option<ServiceSolution>> = BTreeMap::new();
        let mut probes: Vec<BudgetProbe> = Vec::new();
        let mut pass = |n: usize, memo: &mut BTreeMap<usize, Option<ServiceSolution>>| -> Result<bool, PlannerError> {
            if !memo.contains_key(&n) {
                let s = self.solve_service(n, &handoff)?;
                let energy_j = s.as_ref().map(|s| s.energy_j + fixed_energy);
                let passed = energy_j.map_or(false, |e| e <= budget);
                probes.push(BudgetProbe { n_total: n + fixed_steps, n_service: n, energy_j, passed });
                memo.insert(n, s);
            }
            Ok(memo[&n].as_ref().map_or(false, |s| s.energy_j + fixed_energy <= budget))
        };

        let status;
        let chosen;
        if !pass(n_lower, &mut memo)? {
            status = PlanStatus::BudgetExceeded;
            chosen = n_lower;
        } else {
            let (mut lo, mut hi) = (n_lower, n_upper);
            let mut bracket_ok = true;
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if pass(mid, &mut memo)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
                // pass(lo) ∧ ¬pass(hi) must hold; hi may sit on the a priori
                // bound, which always fails.
                let hi_fails = hi >= n_upper || !pass(hi, &mut memo)?;
                if !pass(lo, &mut memo)? || !hi_fails {
                    bracket_ok = false;
                    break;
                }
            }
            // Certificate of maximality: the next horizon fails.
            if bracket_ok && lo + 1 < n_upper && pass(lo + 1, &mut memo)? {
                bracket_ok = false;
            }
            if !bracket_ok {
                lo = n_lower;
                let mut n = n_lower + FALLBACK_STRIDE;
                while n < n_upper && pass(n, &mut memo)? {
                    lo = n;
                    n += FALLBACK_STRIDE;
                }
                let mut hi = n.min(n_upper);
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if pass(mid, &mut memo)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            status = PlanStatus::OptimalLocal;
            chosen = lo;
        }

        let service = memo.remove(&chosen).flatten().ok_or(PlannerError::ServiceInfeasible { upper: chosen })?;
        self.assemble_plan(entry, exit, chosen, service, status, probes)
    }

    fn assemble_plan(
        &self,
        entry: &EntrySolution,
        exit: &EntrySolution,
        n_service: usize,
        service: ServiceSolution,
        status: PlanStatus,
        probes: Vec<BudgetProbe>,
    ) -> Result<PlanResult, PlannerError> {
        let sc = self.scenario;
        let mut trajectory = entry.trajectory.clone();
        trajectory.append(&service.trajectory);
        trajectory.append(&exit.trajectory);
        let energy = EnergyBreakdown {
            entry_j: entry.energy_j,
            service_j: service.energy_j,
            exit_j: exit.energy_j,
            total_j: entry.energy_j + service.energy_j + exit.energy_j,
        };
        let exact_energy_j = trajectory_energy_j(&trajectory, sc.platform(), EnergyModel::Exact)?;
        let logs = alloc::vec![
            SegmentLog { label: "entry".to_string(), steps: entry.steps, trace: entry.trace.clone() },
            SegmentLog { label: "service-feasibility".to_string(), steps: n_service, trace: service.feasibility_trace },
            SegmentLog { label: "service".to_string(), steps: n_service, trace: service.trace },
            SegmentLog { label: "exit".to_string(), steps: exit.steps, trace: exit.trace.clone() },
        ];
        Ok(PlanResult {
            rates_bps: rates_of(sc.link(), &trajectory),
            trajectory,
            segments: SegmentCounts { entry: entry.steps, service: n_service, exit: exit.steps },
            energy,
            exact_energy_j,
            logs,
            status,
            probes,
        })
    }
}
