use std::cell::Cell;

use fsotraj_core::baselines::{circular_path, evaluate_metrics, straight_path, BaselineKind, BaselineSpec};
use fsotraj_core::channel::{FsoLink, LinkParams};
use fsotraj_core::dynamics::{
    exact_power_w, power_w, slot_powers, trajectory_energy_j, EnergyModel, Trajectory, UavPlatform,
};
use fsotraj_core::planner::{complexity_estimate, sum_nm_cubed};
use fsotraj_core::scp::{
    sca_minimize, taylor_underestimator, ConicProgram, ConicSolution, ConicSolver, LocalPoint, Objective, Pin, ScpError,
    ScpSettings, SegmentSpec, SolveError,
};
use fsotraj_core::{Rotation, Vec2};
use proptest::prelude::*;

const P: UavPlatform = UavPlatform::REFERENCE;

fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

/// A random trajectory flown at 20-60 m/s with bounded accelerations.
fn trajectory() -> impl Strategy<Value = Trajectory> {
    (vec2(500.0), 20.0f64..60.0, 0.0f64..6.28, prop::collection::vec(vec2(3.0), 1..30)).prop_map(|(q0, s, h, a)| {
        Trajectory::propagate(1.0, q0, Vec2::from_polar(s, h), &a)
    })
}

proptest! {
    #[test]
    fn exact_energy_never_exceeds_bound(t in trajectory()) {
        let exact = trajectory_energy_j(&t, &P, EnergyModel::Exact).unwrap();
        let bound = trajectory_energy_j(&t, &P, EnergyModel::UpperBound).unwrap();
        prop_assert!(exact <= bound + 1e-9 * bound.abs());
    }

    #[test]
    fn energy_is_invariant_under_rotation(t in trajectory(), theta in -3.2f64..3.2) {
        let r = t.rotated(&Rotation::new(theta));
        for model in [EnergyModel::Exact, EnergyModel::UpperBound] {
            let a = trajectory_energy_j(&t, &P, model).unwrap();
            let b = trajectory_energy_j(&r, &P, model).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs());
        }
    }

    #[test]
    fn power_is_convex_in_tau_and_acceleration(speed in 5.0f64..90.0, tau in 3.0f64..90.0, a in vec2(5.0)) {
        // Finite-difference Hessian of (tau, ax, ay) ↦ P at fixed speed.
        let v = Vec2::new(speed, 0.0);
        let f = |x: [f64; 3]| power_w(v, x[0], Vec2::new(x[1], x[2]), &P).unwrap();
        let x0 = [tau, a.x, a.y];
        let h = 1e-3;
        let mut hess = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let shift = |di: f64, dj: f64| {
                    let mut x = x0;
                    x[i] += di;
                    x[j] += dj;
                    f(x)
                };
                hess[i][j] = (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h);
            }
        }
        // Leading principal minors of a PSD matrix are nonnegative.
        let scale = hess[0][0].abs().max(hess[1][1].abs()).max(1e-12);
        let m1 = hess[0][0];
        let m2 = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        let det = hess[0][0] * (hess[1][1] * hess[2][2] - hess[1][2] * hess[2][1])
            - hess[0][1] * (hess[1][0] * hess[2][2] - hess[1][2] * hess[2][0])
            + hess[0][2] * (hess[1][0] * hess[2][1] - hess[1][1] * hess[2][0]);
        prop_assert!(m1 >= -1e-6 * scale);
        prop_assert!(m2 >= -1e-6 * scale * scale);
        prop_assert!(det >= -1e-6 * scale * scale * scale);
    }

    #[test]
    fn exact_power_only_drops_the_tangential_part(v in vec2(80.0), a in vec2(5.0)) {
        prop_assume!(v.norm() > 3.0);
        let exact = exact_power_w(v, a, &P).unwrap();
        let lateral = a - v * (a.dot(v) / v.norm_sq());
        let oracle = P.c1 * v.norm().powi(3) + P.c2 / v.norm() * (1.0 + lateral.norm_sq() / (P.g * P.g));
        prop_assert!((exact - oracle).abs() <= 1e-9 * oracle);
    }

    #[test]
    fn tangent_plane_touches_at_the_linearization_point(vj in vec2(100.0)) {
        prop_assert!((taylor_underestimator(vj, vj) - vj.norm_sq()).abs() <= 1e-9 * (1.0 + vj.norm_sq()));
    }

    #[test]
    fn rate_decreases_with_distance(vis in 0.1f64..10.0, r1 in 0.0f64..3000.0, dr in 1.0f64..500.0) {
        let link = FsoLink::new(LinkParams::reference(vis).unwrap()).unwrap();
        prop_assert!(link.rate_bps(Vec2::new(r1 + dr, 0.0)) < link.rate_bps(Vec2::new(r1, 0.0)));
    }

    #[test]
    fn service_radius_grows_with_visibility(v1 in 0.2f64..5.0, dv in 0.05f64..5.0) {
        let threshold = 2e6;
        let r = |v: f64| FsoLink::new(LinkParams::reference(v).unwrap()).unwrap().service_radius_m(threshold).unwrap();
        prop_assert!(r(v1 + dv) >= r(v1));
    }

    #[test]
    fn metrics_are_invariant_under_rotation(theta in -3.2f64..3.2, speed in 35.0f64..55.0) {
        let link = FsoLink::new(LinkParams::reference(0.5).unwrap()).unwrap();
        let spec = BaselineSpec { kind: BaselineKind::Circular, speed_mps: speed, radius_m: 700.0, duration_slots: 50 };
        let t = circular_path(&spec, 1.0, &P).unwrap();
        let r = t.rotated(&Rotation::new(theta));
        let a = evaluate_metrics(&t, &link, &P, 50e3, 7.94e6).unwrap();
        let b = evaluate_metrics(&r, &link, &P, 50e3, 7.94e6).unwrap();
        prop_assert_eq!(a.service_slots, b.service_slots);
        prop_assert!((a.spectral_efficiency - b.spectral_efficiency).abs() <= 1e-9 * a.spectral_efficiency);
        prop_assert!((a.energy_j - b.energy_j).abs() <= 1e-9 * a.energy_j);
        prop_assert!((a.service_time_per_kj - b.service_time_per_kj).abs() <= 1e-9 * a.service_time_per_kj);
    }

    #[test]
    fn sum_closed_form_matches_brute_force(nu in 1.0f64..5000.0, frac in 0.0f64..1.0, eps in 0.5f64..4.0) {
        let nl = nu * frac;
        let c = complexity_estimate(nu, nl, eps, 1, 1, 10).unwrap();
        let d = nu - nl;
        let brute: f64 = (1..=c.k3).map(|m| (nu - d * 0.5f64.powi(m as i32)).powi(3)).sum();
        prop_assert!((sum_nm_cubed(nu, d, c.k3) - brute).abs() <= 1e-9 * brute.max(1.0));
    }
}

#[test]
fn straight_baseline_energy_is_the_model_on_its_own_path() {
    let link = FsoLink::new(LinkParams::reference(0.5).unwrap()).unwrap();
    let spec = BaselineSpec { kind: BaselineKind::Straight, speed_mps: 50.0, radius_m: 0.0, duration_slots: 0 };
    let s = straight_path(&spec, Vec2::new(0.0, 1000.0), Vec2::ZERO, Vec2::new(1000.0, 0.0), 1.0, &P).unwrap();
    let m = evaluate_metrics(&s.trajectory, &link, &P, 50e3, 7.94e6).unwrap();
    let oracle: f64 = slot_powers(&s.trajectory, &P, EnergyModel::Exact).unwrap().iter().sum::<f64>();
    assert!((m.energy_j - oracle).abs() <= 1e-9 * oracle);
    assert!(m.service_slots > 0 && m.spectral_efficiency > 7.94);
}

#[test]
fn straight_beats_circle_on_spectral_efficiency_near_the_terminal() {
    let link = FsoLink::new(LinkParams::reference(0.5).unwrap()).unwrap();
    let straight = BaselineSpec { kind: BaselineKind::Straight, speed_mps: 50.0, radius_m: 0.0, duration_slots: 0 };
    let s = straight_path(&straight, Vec2::new(0.0, 800.0), Vec2::ZERO, Vec2::new(800.0, 0.0), 1.0, &P).unwrap();
    let circle = BaselineSpec { kind: BaselineKind::Circular, speed_mps: 50.0, radius_m: 800.0, duration_slots: s.trajectory.steps() };
    let c = circular_path(&circle, 1.0, &P).unwrap();
    let ms = evaluate_metrics(&s.trajectory, &link, &P, 50e3, 0.0).unwrap();
    let mc = evaluate_metrics(&c, &link, &P, 50e3, 0.0).unwrap();
    assert!(ms.spectral_efficiency > mc.spectral_efficiency);
}

/// Succeeds with a placeholder point until call `fail_from`, then reports
/// infeasibility.
struct Scripted {
    calls: Cell<usize>,
    fail_from: usize,
}

impl ConicSolver for Scripted {
    fn solve(&self, program: &ConicProgram, _tol: f64) -> Result<ConicSolution, SolveError> {
        let n = self.calls.get();
        self.calls.set(n + 1);
        if n >= self.fail_from {
            return Err(SolveError::Infeasible);
        }
        // Not optimal, just a point of the right size.
        Ok(ConicSolution { x: vec![1.0; program.n_vars()], objective: 0.0, kkt_residual: 0.0, iterations: 1 })
    }
}

fn spec() -> SegmentSpec {
    let v = Vec2::new(30.0, 0.0);
    SegmentSpec {
        steps: 4,
        dt_s: 1.0,
        start: Some(Pin::state(Vec2::ZERO, v)),
        end: Some(Pin::state(Vec2::new(120.0, 0.0), v)),
        disk: None,
        rotation: None,
        objective: Objective::Energy,
    }
}

#[test]
fn infeasible_first_subproblem_is_a_bad_initial_point() {
    let solver = Scripted { calls: Cell::new(0), fail_from: 0 };
    let r = sca_minimize(&spec(), &P, LocalPoint::constant(5, Vec2::new(30.0, 0.0)), &solver, &ScpSettings::default());
    assert!(matches!(r, Err(ScpError::BadInitialPoint)), "{r:?}");
}

#[test]
fn later_solver_failure_names_the_iteration() {
    let solver = Scripted { calls: Cell::new(0), fail_from: 1 };
    let settings = ScpSettings { relative_tolerance: 1e-15, ..ScpSettings::default() };
    let r = sca_minimize(&spec(), &P, LocalPoint::constant(5, Vec2::new(30.0, 0.0)), &solver, &settings);
    assert!(matches!(r, Err(ScpError::Subproblem { iteration: 2, source: SolveError::Infeasible })), "{r:?}");
}

#[test]
fn invalid_settings_are_rejected_before_solving() {
    let solver = Scripted { calls: Cell::new(0), fail_from: usize::MAX };
    let settings = ScpSettings { max_outer_iterations: 0, ..ScpSettings::default() };
    let r = sca_minimize(&spec(), &P, LocalPoint::constant(5, Vec2::new(30.0, 0.0)), &solver, &settings);
    assert!(matches!(r, Err(ScpError::InvalidSettings(_))));
    assert_eq!(solver.calls.get(), 0);
}
