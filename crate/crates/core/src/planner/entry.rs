//! Entry and exit energy minimization over the slot count.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::init::pursuit_trajectory;
use super::{Planner, PlannerError};
use crate::dynamics::{bound_propulsion_energy_j, Trajectory};
use crate::math;
use crate::scp::{sca_minimize, ConicSolver, IterationRecord, LocalPoint, ScpError, SegmentKind, SegmentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Entry,
    Exit,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Entry => "entry",
            Side::Exit => "exit",
        }
    }
}

/// One evaluated horizon. `energy_j` is `None` when no feasible trajectory
/// was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryProbe {
    pub steps: usize,
    pub energy_j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntrySolution {
    pub side: Side,
    pub steps: usize,
    /// Propulsion energy under the upper-bound model.
    pub energy_j: f64,
    pub trajectory: Trajectory,
    pub trace: Vec<IterationRecord>,
    /// Every horizon evaluated, in evaluation order.
    pub probes: Vec<EntryProbe>,
}

impl EntrySolution {
    /// Energy at `steps` if it was evaluated.
    pub fn probe(&self, steps: usize) -> Option<Option<f64>> {
        self.probes.iter().find(|p| p.steps == steps).map(|p| p.energy_j)
    }
}

type Solved = (f64, Trajectory, Vec<IterationRecord>);

impl<'a, S: ConicSolver + ?Sized> Planner<'a, S> {
    /// Solve the energy problem of one side at a fixed horizon.
    pub fn solve_entry_at(&self, side: Side, steps: usize) -> Result<Option<Solved>, PlannerError> {
        let sc = self.scenario;
        let (platform, dt, radius) = (sc.platform(), sc.dt_s(), sc.service_radius_m());
        let kind = match side {
            Side::Entry => SegmentKind::Entry,
            Side::Exit => SegmentKind::Exit,
        };
        let spec = SegmentSpec::phase(kind, steps, dt, sc.bc(), Some(radius))?;
        let guess = match side {
            Side::Entry => pursuit_trajectory(platform, dt, sc.bc().q_initial, sc.bc().v_initial, steps, radius),
            Side::Exit => pursuit_trajectory(platform, dt, sc.q_final(), -sc.v_final(), steps, radius).time_reversed(),
        };
        let guess_end = match side {
            Side::Entry => guess.last_position(),
            Side::Exit => guess.first_position(),
        };
        let local = if guess_end.norm() <= radius * (1.0 - 1e-6) {
            LocalPoint::from_trajectory(&guess)
        } else {
            match self.check_feasible(&spec, LocalPoint::from_trajectory(&guess))?.local_point() {
                Some(l) => l,
                None => return Ok(None),
            }
        };
        match sca_minimize(&spec, platform, local, self.solver, &self.settings) {
            Ok(out) => {
                let energy = bound_propulsion_energy_j(out.trajectory(), platform)?;
                Ok(Some((energy, out.iterate.trajectory, out.trace)))
            }
            Err(ScpError::BadInitialPoint) | Err(ScpError::Subproblem { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Bisection on the sign of `E(N+1) − E(N−1)`, a final three-way
    /// comparison, then single-slot descent until `E(N) ≤ E(N±1)`.
    pub fn minimize_entry_energy(&self, side: Side) -> Result<EntrySolution, PlannerError> {
        let sc = self.scenario;
        let platform = sc.platform();
        let dt = sc.dt_s();
        let radius = sc.service_radius_m();
        let start = match side {
            Side::Entry => sc.bc().q_initial,
            Side::Exit => sc.q_final(),
        };
        let v_start = match side {
            Side::Entry => sc.bc().v_initial,
            Side::Exit => sc.v_final(),
        };
        let dist = start.norm() - radius;
        if dist <= 0.0 {
            return Ok(EntrySolution {
                side,
                steps: 0,
                energy_j: 0.0,
                trajectory: Trajectory::from_state(dt, start, v_start),
                trace: Vec::new(),
                probes: alloc::vec![EntryProbe { steps: 0, energy_j: Some(0.0) }],
            });
        }
        let lower = (math::ceil(dist / (platform.v_max * dt)) as usize).max(1);
        let upper = 2 * (math::ceil(dist / (platform.min_power_speed() * dt)) as usize) + 8;

        let mut memo: BTreeMap<usize, Option<Solved>> = BTreeMap::new();
        let mut probes = Vec::new();
        let mut energy = |n: usize, memo: &mut BTreeMap<usize, Option<Solved>>| -> Result<Option<f64>, PlannerError> {
            if let Some(s) = memo.get(&n) {
                return Ok(s.as_ref().map(|s| s.0));
            }
            let solved = self.solve_entry_at(side, n)?;
            let e = solved.as_ref().map(|s| s.0);
            probes.push(EntryProbe { steps: n, energy_j: e });
            memo.insert(n, solved);
            Ok(e)
        };
        let inf = |e: Option<f64>| e.unwrap_or(f64::INFINITY);

        let (mut lo, mut hi) = (lower, upper);
        while hi - lo > 2 {
            let mid = (lo + hi) / 2;
            let e_minus = energy(mid - 1, &mut memo)?;
            let e_plus = energy(mid + 1, &mut memo)?;
            // An infeasible short horizon means energy is still falling.
            let k = if e_minus.is_none() { f64::NEG_INFINITY } else { inf(e_plus) - inf(e_minus) };
            if k <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for n in lo..=hi {
            if let Some(e) = energy(n, &mut memo)? {
                if best.map_or(true, |(_, b)| e < b) {
                    best = Some((n, e));
                }
            }
        }
        if best.is_none() {
            // Scan the whole bracket before giving up.
            for n in lower..=upper {
                if let Some(e) = energy(n, &mut memo)? {
                    best = Some((n, e));
                    break;
                }
            }
        }
        let (mut n_opt, mut e_opt) = best.ok_or(PlannerError::EntryInfeasible { side: side.as_str(), lower, upper })?;
        // Certify a local minimum over single-slot moves.
        loop {
            let down = if n_opt > 1 { energy(n_opt - 1, &mut memo)? } else { None };
            let up = energy(n_opt + 1, &mut memo)?;
            if let Some(e) = down.filter(|&e| e < e_opt) {
                n_opt -= 1;
                e_opt = e;
            } else if let Some(e) = up.filter(|&e| e < e_opt) {
                n_opt += 1;
                e_opt = e;
            } else {
                break;
            }
        }
        let (energy_j, trajectory, trace) = memo.remove(&n_opt).flatten().expect("evaluated");
        Ok(EntrySolution { side, steps: n_opt, energy_j, trajectory, trace, probes })
    }
}
