//! Energy-efficiency maximization with both endpoints pinned, by Dinkelbach
//! iterations over the rate-minus-energy program.

use alloc::vec::Vec;

use super::init::straight_local;
use super::{rates_of, Planner, PlannerError};
use crate::dynamics::{power_unchecked, trajectory_energy_j, EnergyModel, Trajectory};
use crate::scp::{sca_minimize, ConicSolver, IterationRecord, LocalPoint, Objective, Pin, ScpError, SegmentIterate, SegmentSpec};

/// Relative stopping tolerance on the Dinkelbach residual `F(λ)`.
pub const DINKELBACH_TOLERANCE: f64 = 1e-4;
const MAX_DINKELBACH_ITERATIONS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachStep {
    pub lambda: f64,
    /// `ΣR − λΣP` at the iterate solved for this `λ`.
    pub residual: f64,
    /// Surrogate efficiency `ΣR / ΣP` of that iterate (bit/J).
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyResult {
    pub trajectory: Trajectory,
    /// `Σ R·dt / E` with the exact rate and exact energy (bit/J).
    pub efficiency_bits_per_j: f64,
    pub total_bits: f64,
    pub exact_energy_j: f64,
    pub rates_bps: Vec<f64>,
    pub steps: Vec<DinkelbachStep>,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

impl EfficiencyResult {
    pub fn final_lambda(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.ratio)
    }
}

/// Surrogate rate and power sums of an iterate.
fn sums(it: &SegmentIterate, spec: &SegmentSpec, platform: &crate::dynamics::UavPlatform) -> (f64, f64) {
    let Objective::RateMinusEnergy { link, .. } = spec.objective else {
        unreachable!("efficiency spec");
    };
    let t = &it.trajectory;
    let mut rate = 0.0;
    let mut power = 0.0;
    for k in 0..t.steps() {
        rate += link.rate_high_snr_bps(t.q[k]);
        power += power_unchecked(t.v[k].norm(), it.tau[k].max(1e-12), t.a[k].norm_sq(), platform);
    }
    (rate, power)
}

impl<'a, S: ConicSolver + ?Sized> Planner<'a, S> {
    /// Most energy-efficient trajectory of `steps` steps between the
    /// scenario's initial and final states.
    pub fn maximize_energy_efficiency(&self, steps: usize) -> Result<EfficiencyResult, PlannerError> {
        let sc = self.scenario;
        let spec = SegmentSpec {
            steps,
            dt_s: sc.dt_s(),
            start: Some(Pin::state(sc.bc().q_initial, sc.bc().v_initial)),
            end: Some(Pin::state(sc.q_final(), sc.v_final())),
            disk: None,
            rotation: None,
            objective: Objective::RateMinusEnergy { link: *sc.link(), lambda: 0.0 },
        };
        self.maximize_efficiency_on(&spec)
    }

    /// Dinkelbach iterations on an arbitrary pinned segment. The objective
    /// of `spec` must be [`Objective::RateMinusEnergy`]; its `λ` is ignored.
    pub fn maximize_efficiency_on(&self, spec: &SegmentSpec) -> Result<EfficiencyResult, PlannerError> {
        let Objective::RateMinusEnergy { link, .. } = spec.objective else {
            return Err(PlannerError::InvalidArgument("efficiency needs a rate-minus-energy objective"));
        };
        let sc = self.scenario;
        let platform = sc.platform();
        let start = spec.start.ok_or(PlannerError::InvalidArgument("efficiency needs a pinned start"))?;
        let end_q = spec.end.map_or(start.q, |p| p.q);
        let guess = straight_local(platform, spec.dt_s, start.q, end_q, spec.steps);
        let verdict = self.check_feasible(spec, LocalPoint { v: guess })?;
        let (Some(mut traj), true) = (verdict.trajectory.clone(), verdict.feasible) else {
            return Err(PlannerError::HorizonInfeasible { steps: spec.steps });
        };
        let mut local = LocalPoint::from_trajectory(&traj);
        let initial = SegmentIterate { tau: traj.v.iter().map(|v| v.norm()).collect(), v2: traj.v.clone(), trajectory: traj.clone() };
        let (r0, p0) = sums(&initial, spec, platform);
        let mut lambda = r0 / p0;
        let mut steps = Vec::new();
        let mut trace = Vec::new();
        let mut converged = false;
        for _ in 0..MAX_DINKELBACH_ITERATIONS {
            let spec_l = SegmentSpec { objective: Objective::RateMinusEnergy { link, lambda }, ..*spec };
            let out = match sca_minimize(&spec_l, platform, local.clone(), self.solver, &self.settings) {
                Ok(out) => out,
                Err(ScpError::BadInitialPoint) => return Err(PlannerError::HorizonInfeasible { steps: spec.steps }),
                Err(e) => return Err(e.into()),
            };
            let (rate, power) = sums(&out.iterate, &spec_l, platform);
            let residual = rate - lambda * power;
            steps.push(DinkelbachStep { lambda, residual, ratio: rate / power });
            trace.extend(out.trace.iter().copied());
            traj = out.iterate.trajectory.clone();
            local = out.iterate.local_point(&spec_l);
            if residual.abs() <= DINKELBACH_TOLERANCE * lambda * power {
                converged = true;
                break;
            }
            lambda = rate / power;
        }
        let rates_bps = rates_of(&link, &traj);
        let total_bits: f64 = rates_bps.iter().sum::<f64>() * traj.dt_s;
        let exact_energy_j = trajectory_energy_j(&traj, platform, EnergyModel::Exact)?;
        Ok(EfficiencyResult {
            efficiency_bits_per_j: total_bits / exact_energy_j,
            total_bits,
            exact_energy_j,
            rates_bps,
            trajectory: traj,
            steps,
            converged,
            trace,
        })
    }
}
