//! Acceptance criteria, one test each. Every test prints a PASS/FAIL line
//! with the measured value and the tolerance it is held to.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use fsotraj::config::Config;
use fsotraj::ClarabelSolver;
use fsotraj_core::baselines::{circular_path, evaluate_metrics, BaselineKind, BaselineSpec};
use fsotraj_core::channel::{FsoLink, LinkParams};
use fsotraj_core::dynamics::{
    bound_propulsion_energy_j, kinematic_residuals, limit_violations, power_w, slot_powers,
    trajectory_energy_j, EnergyModel, Trajectory, UavPlatform,
};
use fsotraj_core::planner::{
    complexity_estimate, replicate_rotation, PlanResult, PlanStatus, Planner, Scenario, Side, DINKELBACH_TOLERANCE,
};
use fsotraj_core::scp::{sca_minimize, Objective, Pin, ScpSettings, SegmentKind, SegmentSpec, Termination};
use fsotraj_core::{Rotation, Vec2};
use proptest::prelude::*;
use proptest::test_runner::{TestCaseError, TestRunner};

fn report(criterion: u32, pass: bool, detail: String) {
    println!("criterion {criterion}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn scenario(visibility_km: f64) -> Scenario {
    Config::reference().scenario_at(visibility_km).expect("reference scenario")
}

fn settings() -> ScpSettings {
    Config::reference().scp
}

fn plan_at(visibility_km: f64) -> PlanResult {
    let sc = scenario(visibility_km);
    let solver = ClarabelSolver::default();
    Planner::new(&sc, &solver, settings()).maximize_flight_time().expect("plan")
}

fn reference_plan() -> &'static PlanResult {
    static PLAN: OnceLock<PlanResult> = OnceLock::new();
    PLAN.get_or_init(|| plan_at(0.5))
}

const P: UavPlatform = UavPlatform::REFERENCE;

#[test]
fn criterion_1_service_boundary() {
    let t = Instant::now();
    let r05 = scenario(0.5).service_radius_m();
    let r02 = scenario(0.2).service_radius_m();
    let elapsed = t.elapsed().as_secs_f64();
    let e05 = (r05 - 862.0).abs() / 862.0;
    let e02 = (r02 - 289.0).abs() / 289.0;
    report(
        1,
        e05 <= 0.015 && e02 <= 0.015 && elapsed < 1.0,
        format!("d(0.5 km) = {r05:.2} m ({:.3}%), d(0.2 km) = {r02:.2} m ({:.3}%), tol 1.5%, {elapsed:.3} s", e05 * 100.0, e02 * 100.0),
    );
}

#[test]
fn criterion_2_circular_golden_values() {
    let t = Instant::now();
    let sc = scenario(0.5);
    let spec = BaselineSpec { kind: BaselineKind::Circular, speed_mps: 50.0, radius_m: 862.0, duration_slots: 400 };
    let traj = circular_path(&spec, 1.0, &P).unwrap();
    let threshold = fsotraj::commands::baseline_threshold(&spec, &sc);
    let m = evaluate_metrics(&traj, sc.link(), &P, sc.energy_budget_j(), threshold).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let e_energy = (m.energy_j / 1000.0 - 65.8696).abs() / 65.8696;
    let e_se = (m.spectral_efficiency - 7.9357).abs() / 7.9357;
    report(
        2,
        e_energy <= 0.005 && e_se <= 0.005 && m.service_slots == 400 && elapsed < 1.0,
        format!(
            "energy {:.4} kJ ({:.3}%), SE {:.4} ({:.3}%), tol 0.5%; ratio {:.4} s/kJ; {elapsed:.3} s",
            m.energy_j / 1000.0,
            e_energy * 100.0,
            m.spectral_efficiency,
            e_se * 100.0,
            m.service_time_per_kj
        ),
    );
}

#[test]
fn criterion_3_level_flight_oracle() {
    let p30 = power_w(Vec2::new(30.0, 0.0), 30.0, Vec2::ZERO, &P).unwrap();
    // Independent evaluation of the same constants.
    let direct = 9.26e-4 * 27_000.0 + 2250.0 / 30.0;
    let v_star = P.min_power_speed();
    let v_star_oracle = (2250.0f64 / (3.0 * 9.26e-4)).powf(0.25);
    let pass = (p30 - 100.0).abs() <= 1e-9 && (v_star - 30.03).abs() <= 0.01;
    report(
        3,
        pass,
        format!(
            "P(30) = {p30:.9} W (independent {direct:.9}), target 100.0 +- 1e-9; v* = {v_star:.6} m/s (independent {v_star_oracle:.6}), target 30.03 +- 0.01"
        ),
    );
}

#[test]
fn criterion_4_scp_convergence() {
    let sc = scenario(0.5);
    let solver = ClarabelSolver::default();
    let s = settings();
    let planner = Planner::new(&sc, &solver, s);
    let entry = planner.minimize_entry_energy(Side::Entry).unwrap();
    let exit = planner.minimize_entry_energy(Side::Exit).unwrap();
    let handoff = fsotraj_core::dynamics::BoundaryConditions {
        q_initial: entry.trajectory.last_position(),
        v_initial: entry.trajectory.last_velocity(),
        q_final: Some(exit.trajectory.first_position()),
        v_final: Some(exit.trajectory.v[0]),
    };
    let n = 200;
    let verdict = planner.find_initial_velocities(n, &handoff).unwrap();
    assert!(verdict.feasible, "service horizon {n} infeasible");
    let spec = SegmentSpec::phase(SegmentKind::Service, n, sc.dt_s(), &handoff, Some(sc.service_radius_m())).unwrap();
    let t = Instant::now();
    let out = sca_minimize(&spec, &P, verdict.local_point().unwrap(), &solver, &s).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let objs: Vec<f64> = out.trace.iter().map(|r| r.objective).collect();
    let monotone = objs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let last_change = match objs.as_slice() {
        [.., a, b] => (a - b) / a.abs(),
        _ => 0.0,
    };
    report(
        4,
        monotone && out.termination == Termination::Converged && out.iterations() <= 20 && last_change <= 1e-3,
        format!(
            "N_service = {n}, {} iterations ({:?}), monotone = {monotone}, last relative change {last_change:.2e} (tol 1e-3), limit 20; {elapsed:.1} s",
            out.iterations(),
            out.termination
        ),
    );
}

#[test]
fn criterion_5_flight_time_gain() {
    let t = Instant::now();
    let plan = reference_plan();
    let sc = scenario(0.5);
    let ratio = plan.service_time_s() / (sc.energy_budget_j() / 1000.0);
    let gain = ratio / 6.0726 - 1.0;
    report(
        5,
        plan.status == PlanStatus::OptimalLocal && ratio >= 7.3,
        format!(
            "service {} slots, total energy {:.1} J, ratio {ratio:.4} s/kJ (floor 7.3), gain over circle {:.2}%; {:.1} s",
            plan.segments.service,
            plan.energy.total_j,
            gain * 100.0,
            t.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_visibility_monotonicity() {
    let vis = [0.2, 0.5, 0.8, 2.0];
    let times: Vec<f64> = std::thread::scope(|s| {
        let handles: Vec<_> = vis
            .iter()
            .map(|&v| s.spawn(move || if v == 0.5 { reference_plan().service_time_s() } else { plan_at(v).service_time_s() }))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let monotone = times.windows(2).all(|w| w[1] >= w[0]);
    let gain = times[2] / times[0] - 1.0;
    report(
        6,
        monotone && gain >= 0.25,
        format!("service times {times:?} s over V = {vis:?} km, monotone = {monotone}, V=0.8 over V=0.2 = {:.2}% (floor 25%)", gain * 100.0),
    );
}

#[test]
fn criterion_7_rotation_scheme() {
    let sc = scenario(0.5);
    let solver = ClarabelSolver::default();
    let planner = Planner::new(&sc, &solver, settings());
    let theta = PI / 6.0;
    let lc = planner.plan_low_complexity(30, theta).unwrap();
    let full = replicate_rotation(&lc.segment, theta, 11).unwrap();
    let closure = (full.last_position() - full.q[0]).norm().max((full.last_velocity() - full.v[0]).norm());

    let powers = slot_powers(&full, &P, EnergyModel::UpperBound).unwrap();
    let block: Vec<f64> = powers.chunks(30).map(|c| c.iter().sum()).collect();
    let spread = block.iter().map(|e| (e - block[0]).abs() / block[0]).fold(0.0, f64::max);
    let residual = kinematic_residuals(&full).max();

    let plan = reference_plan();
    let full_avg = plan.energy.service_j / plan.service_time_s();
    let dominance = lc.average_power_w >= full_avg - 1e-6;

    let k3 = complexity_estimate(512.0, 0.0, 1.0, 1, 1, 30).unwrap().k3;
    let (nu, nl) = (700.0, 123.0);
    let c = complexity_estimate(nu, nl, 1.0, 2, 3, 30).unwrap();
    let d: f64 = nu - nl;
    let k3_oracle = d.log2().floor() as u32;
    let brute: f64 = (1..=c.k3).map(|m| (nu - d * 0.5f64.powi(m as i32)).powi(3)).sum();
    let sum_err = (c.sum_nm_cubed - brute).abs() / brute;

    report(
        7,
        full.steps() == 360
            && closure <= 1e-6
            && spread <= 1e-9
            && residual <= 1e-6
            && dominance
            && k3 == 9
            && c.k3 == k3_oracle
            && sum_err <= 1e-9,
        format!(
            "12 blocks of 30: closure {closure:.2e} (tol 1e-6), block energy spread {spread:.2e} (tol 1e-9), residual {residual:.2e} (tol 1e-6), \
             LC avg power {:.4} W vs full {full_avg:.4} W, K3(512) = {k3}, K3(577) = {} vs {k3_oracle}, closed-form error {sum_err:.2e} (tol 1e-9)",
            lc.average_power_w, c.k3
        ),
    );
}

/// Surrogate rate and upper-bound power sums of a two-step trajectory.
fn toy_ratio(link: &FsoLink, traj: &Trajectory) -> f64 {
    let mut r = 0.0;
    let mut p = 0.0;
    for k in 0..traj.steps() {
        r += link.rate_high_snr_bps(traj.q[k]);
        p += power_w(traj.v[k], traj.v[k].norm(), traj.a[k], &P).unwrap();
    }
    r / p
}

/// Exhaustive search over the first acceleration of the two-step toy; the
/// second acceleration is fixed by the pinned end position.
fn toy_oracle(link: &FsoLink, dt: f64, q0: Vec2, v0: Vec2, q2: Vec2) -> (f64, Vec2) {
    let eval = |a0: Vec2| -> Option<f64> {
        if a0.norm() > P.a_max {
            return None;
        }
        let q1 = q0 + v0 * dt + a0 * (0.5 * dt * dt);
        let v1 = v0 + a0 * dt;
        let a1 = (q2 - q1 - v1 * dt) * (2.0 / (dt * dt));
        let v2 = v1 + a1 * dt;
        if a1.norm() > P.a_max || !P.speed_admissible(v1.norm(), 0.0) || !P.speed_admissible(v2.norm(), 0.0) {
            return None;
        }
        let traj = Trajectory { dt_s: dt, q: vec![q0, q1, q2], v: vec![v0, v1, v2], a: vec![a0, a1] };
        Some(toy_ratio(link, &traj))
    };
    let mut best = (f64::NEG_INFINITY, Vec2::ZERO);
    let (mut center, mut half) = (Vec2::ZERO, P.a_max);
    for _ in 0..4 {
        let n = 100;
        for i in 0..=n {
            for j in 0..=n {
                let a0 = center + Vec2::new(-half + 2.0 * half * i as f64 / n as f64, -half + 2.0 * half * j as f64 / n as f64);
                if let Some(r) = eval(a0) {
                    if r > best.0 {
                        best = (r, a0);
                    }
                }
            }
        }
        center = best.1;
        half *= 0.1;
    }
    best
}

#[test]
fn criterion_8_dinkelbach_and_operation_time() {
    let sc = scenario(0.5);
    let solver = ClarabelSolver::default();
    let planner = Planner::new(&sc, &solver, settings());

    let ee = planner.maximize_energy_efficiency(100).unwrap();
    let last = ee.steps.last().unwrap();
    // Residual relative to λ·ΣP, the scale of either term.
    let rel_f = last.residual.abs() / (last.lambda * surrogate_power(&ee.trajectory));
    let lambdas: Vec<f64> = ee.steps.iter().map(|s| s.lambda).collect();
    let lambda_monotone = lambdas.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));

    // Two-step toy with a free end velocity.
    let (q0, v0, q2) = (Vec2::new(-300.0, 200.0), Vec2::new(30.0, 0.0), Vec2::new(-240.0, 198.0));
    let toy = SegmentSpec {
        steps: 2,
        dt_s: 1.0,
        start: Some(Pin::state(q0, v0)),
        end: Some(Pin { q: q2, v: None }),
        disk: None,
        rotation: None,
        objective: Objective::RateMinusEnergy { link: *sc.link(), lambda: 0.0 },
    };
    let toy_out = planner.maximize_efficiency_on(&toy).unwrap();
    let toy_value = toy_ratio(sc.link(), &toy_out.trajectory);
    let (oracle, _) = toy_oracle(sc.link(), 1.0, q0, v0, q2);
    let toy_err = (toy_value - oracle).abs() / oracle;

    let demand = 5e8;
    let op = planner.minimize_operation_time(demand).unwrap();
    let below = planner.maximize_bits_at(op.steps - 1).unwrap().map(|(bits, _, _)| bits);
    let minimal = op.total_bits >= demand && below.map_or(true, |b| b < demand);

    report(
        8,
        ee.converged && rel_f <= DINKELBACH_TOLERANCE && lambda_monotone && toy_err <= 0.01 && minimal,
        format!(
            "EE {:.1} bit/J after {} Dinkelbach steps, |F|/(lambda*sum P) = {rel_f:.2e} (tol 1e-4), lambda monotone = {lambda_monotone}; \
             toy EE {toy_value:.2} vs grid {oracle:.2} ({:.3}%, tol 1%); demand {demand:.1e} bits: N = {} delivers {:.4e}, N-1 delivers {:?}",
            ee.efficiency_bits_per_j,
            ee.steps.len(),
            toy_err * 100.0,
            op.steps,
            op.total_bits,
            below
        ),
    );
}

fn surrogate_power(traj: &Trajectory) -> f64 {
    slot_powers(traj, &P, EnergyModel::UpperBound).unwrap().iter().sum()
}

fn run_property<S: Strategy>(name: &str, cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> (bool, String) {
    let mut runner = TestRunner::new(ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() });
    match runner.run(&strategy, test) {
        Ok(()) => (true, format!("{name}: {cases} cases ok")),
        Err(e) => (false, format!("{name}: {e}")),
    }
}

/// Short energy problems between random boundary states: the speed chain
/// and the discrete update must hold on every solver output.
fn solver_output_case((turn, speed, heading, steps): (f64, f64, f64, usize)) -> Result<(), TestCaseError> {
    let solver = ClarabelSolver::default();
    let q0 = Vec2::from_polar(600.0, heading);
    let v0 = Vec2::from_polar(speed, heading + PI / 2.0);
    let v1 = Rotation::new(turn).apply(v0);
    let q1 = q0 + (v0 + v1) * (0.5 * steps as f64);
    let spec = SegmentSpec {
        steps,
        dt_s: 1.0,
        start: Some(Pin::state(q0, v0)),
        end: Some(Pin { q: q1, v: Some(v1) }),
        disk: None,
        rotation: None,
        objective: Objective::Energy,
    };
    let local = fsotraj_core::scp::LocalPoint::constant(steps + 1, (v0 + v1) * 0.5);
    let out = sca_minimize(&spec, &P, local, &solver, &settings()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let it = &out.iterate;
    for k in 0..steps {
        let s = it.trajectory.v[k].norm();
        prop_assert!(it.tau[k] >= P.v_min - 1e-6 && it.tau[k] <= s + 1e-6, "tau {} speed {s}", it.tau[k]);
    }
    let residual = kinematic_residuals(&it.trajectory).max();
    prop_assert!(residual <= 1e-6, "residual {residual}");
    Ok(())
}

#[test]
fn criterion_9_property_suite() {
    let mut results = Vec::new();
    results.push(run_property(
        "Taylor underestimation",
        10_000,
        ((-100.0f64..100.0, -100.0f64..100.0), (-100.0f64..100.0, -100.0f64..100.0)),
        |(vj, v)| {
            let (vj, v) = (Vec2::new(vj.0, vj.1), Vec2::new(v.0, v.1));
            let lin = fsotraj_core::scp::taylor_underestimator(vj, v);
            prop_assert!(lin <= v.norm_sq() + 1e-9 * (1.0 + v.norm_sq()), "{lin} > {}", v.norm_sq());
            Ok(())
        },
    ));
    results.push(run_property("radius/rate round trip", 500, (0.1f64..10.0, 0.05f64..0.95), |(vis, frac)| {
        let link = FsoLink::new(LinkParams::reference(vis).unwrap()).unwrap();
        let threshold = frac * link.rate_bps(Vec2::ZERO);
        let r = link.service_radius_m(threshold).unwrap();
        let back = link.rate_bps(Vec2::new(r, 0.0));
        prop_assert!((back - threshold).abs() <= 1e-6 * threshold, "{back} vs {threshold}");
        Ok(())
    }));
    results.push(run_property(
        "speed chain and residuals on solver outputs",
        12,
        (-1.0f64..1.0, 25.0f64..45.0, 0.0f64..2.0 * PI, 8usize..20),
        solver_output_case,
    ));

    let plan = reference_plan();
    let sc = scenario(0.5);
    let residual = kinematic_residuals(&plan.trajectory).max();
    let limits = limit_violations(&plan.trajectory, &P).max_excess();
    let exact = trajectory_energy_j(&plan.trajectory, &P, EnergyModel::Exact).unwrap();
    let bound = bound_propulsion_energy_j(&plan.trajectory, &P).unwrap();
    let budget = sc.energy_budget_j() * (1.0 + 1e-6);
    let min_rate = plan.service_slots().map(|k| plan.rates_bps[k]).fold(f64::INFINITY, f64::min);
    let plan_ok = plan.status == PlanStatus::OptimalLocal
        && residual <= 1e-6
        && limits <= 1e-6
        && exact <= budget
        && bound <= budget
        && min_rate >= sc.rate_threshold_bps() - 1.0;
    results.push((
        plan_ok,
        format!(
            "plan: residual {residual:.2e} (tol 1e-6), limit excess {limits:.2e}, exact {exact:.1} J and bound {bound:.1} J vs budget {:.0} J, \
             min service rate {min_rate:.1} bit/s",
            sc.energy_budget_j()
        ),
    ));
    let pass = results.iter().all(|r| r.0);
    let detail: Vec<String> = results.into_iter().map(|r| r.1).collect();
    report(9, pass, detail.join("; "));
}
