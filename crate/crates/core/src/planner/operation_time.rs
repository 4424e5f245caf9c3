//! Operation-time minimization: the shortest pinned-endpoint mission
//! that delivers a data demand.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::init::straight_local;
use super::{rates_of, Planner, PlannerError};
use crate::dynamics::Trajectory;
use crate::math;
use crate::scp::{sca_minimize, ConicSolver, IterationRecord, LocalPoint, Objective, Pin, ScpError, SegmentSpec};

/// Default cap on the horizon searched for a demand.
pub const MAX_OPERATION_STEPS: usize = 4096;

/// One evaluated horizon; `bits` is `None` when it was infeasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateProbe {
    pub steps: usize,
    pub bits: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationTimeResult {
    pub steps: usize,
    pub trajectory: Trajectory,
    /// `Σ R(q[k])·dt` over the steps, with the exact rate.
    pub total_bits: f64,
    pub rates_bps: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    pub probes: Vec<RateProbe>,
}

impl OperationTimeResult {
    pub fn duration_s(&self) -> f64 {
        self.trajectory.duration_s()
    }

    /// Probe result at `steps` if it was evaluated.
    pub fn probe(&self, steps: usize) -> Option<Option<f64>> {
        self.probes.iter().find(|p| p.steps == steps).map(|p| p.bits)
    }
}

type Solved = (f64, Trajectory, Vec<IterationRecord>);

impl<'a, S: ConicSolver + ?Sized> Planner<'a, S> {
    fn rate_spec(&self, steps: usize) -> SegmentSpec {
        let sc = self.scenario;
        SegmentSpec {
            steps,
            dt_s: sc.dt_s(),
            start: Some(Pin::state(sc.bc().q_initial, sc.bc().v_initial)),
            end: Some(Pin::state(sc.q_final(), sc.v_final())),
            disk: None,
            rotation: None,
            objective: Objective::Rate(*sc.link()),
        }
    }

    /// Maximize the delivered bits over a fixed horizon.
    pub fn maximize_bits_at(&self, steps: usize) -> Result<Option<Solved>, PlannerError> {
        let sc = self.scenario;
        let spec = self.rate_spec(steps);
        let guess = straight_local(sc.platform(), sc.dt_s(), sc.bc().q_initial, sc.q_final(), steps);
        let Some(local) = self.check_feasible(&spec, LocalPoint { v: guess })?.local_point() else {
            return Ok(None);
        };
        match sca_minimize(&spec, sc.platform(), local, self.solver, &self.settings) {
            Ok(out) => {
                let bits = rates_of(sc.link(), out.trajectory()).iter().sum::<f64>() * sc.dt_s();
                Ok(Some((bits, out.iterate.trajectory, out.trace)))
            }
            Err(ScpError::BadInitialPoint) | Err(ScpError::Subproblem { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn minimize_operation_time(&self, demand_bits: f64) -> Result<OperationTimeResult, PlannerError> {
        self.minimize_operation_time_capped(demand_bits, MAX_OPERATION_STEPS)
    }

    /// Smallest horizon whose rate-optimal trajectory delivers `demand_bits`.
    /// A zero demand returns the shortest feasible horizon.
    pub fn minimize_operation_time_capped(&self, demand_bits: f64, cap: usize) -> Result<OperationTimeResult, PlannerError> {
        if !(demand_bits >= 0.0) || !demand_bits.is_finite() {
            return Err(PlannerError::InvalidArgument("demand must be finite and non-negative"));
        }
        let sc = self.scenario;
        let gap = (sc.q_final() - sc.bc().q_initial).norm();
        let floor = (math::ceil(gap / (sc.platform().v_max * sc.dt_s())) as usize).max(1);
        let cap = cap.max(floor);

        let mut memo: BTreeMap<usize, Option<Solved>> = BTreeMap::new();
        let mut probes = Vec::new();
        let mut bits = |n: usize, memo: &mut BTreeMap<usize, Option<Solved>>| -> Result<Option<f64>, PlannerError> {
            if let Some(s) = memo.get(&n) {
                return Ok(s.as_ref().map(|s| s.0));
            }
            let solved = self.maximize_bits_at(n)?;
            let b = solved.as_ref().map(|s| s.0);
            probes.push(RateProbe { steps: n, bits: b });
            memo.insert(n, solved);
            Ok(b)
        };
        let meets = |b: Option<f64>| b.map_or(false, |b| b >= demand_bits);

        // Shortest feasible horizon by doubling, then bisection.
        let mut bad = floor - 1;
        let mut n = floor;
        let mut stride = 1;
        while bits(n, &mut memo)?.is_none() {
            bad = n;
            if n >= cap {
                return Err(PlannerError::DemandInfeasible { demand_bits, upper: cap });
            }
            n = (n + stride).min(cap);
            stride *= 2;
        }
        let mut good = n;
        while good - bad > 1 {
            let mid = (good + bad) / 2;
            if bits(mid, &mut memo)?.is_some() {
                good = mid;
            } else {
                bad = mid;
            }
        }

        // Doubling on delivered bits, then bisection.
        let mut lo = good - 1;
        let mut hi = good;
        while !meets(bits(hi, &mut memo)?) {
            if hi >= cap {
                return Err(PlannerError::DemandInfeasible { demand_bits, upper: cap });
            }
            lo = hi;
            hi = (2 * hi).min(cap);
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if meets(bits(mid, &mut memo)?) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // Minimality certificate.
        if hi > good {
            bits(hi - 1, &mut memo)?;
        }
        let (total_bits, trajectory, trace) = memo.remove(&hi).flatten().expect("evaluated");
        Ok(OperationTimeResult { steps: hi, rates_bps: rates_of(sc.link(), &trajectory), trajectory, total_bits, trace, probes })
    }
}
