//! Command dispatch behind the `fsotraj` binary.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use fsotraj_core::baselines::{circular_path, evaluate_metrics, straight_path, BaselineKind, BaselineSpec};
use fsotraj_core::dynamics::{bound_propulsion_energy_j, trajectory_energy_j, EnergyModel, Trajectory};
use fsotraj_core::planner::{
    complexity_estimate, replicate_rotation, PlanResult, PlanStatus, Planner, PlannerError, Scenario, SegmentLog,
};
use fsotraj_core::scp::{IterationRecord, ScpError};
use fsotraj_core::Vec2;
use serde_json::{json, Value};
use thiserror::Error;

use crate::artifacts::{convergence_csv, plot_dat, trajectory_csv, trajectory_plots, Energies, OutDir, Ratios, Segments, Summary};
use crate::config::{Config, ConfigError, DEFAULT_CONFIG};
use crate::ClarabelSolver;

/// Angles tried by `plan-lc` when the config does not fix one.
pub const THETA_SWEEP: [f64; 4] = [PI / 12.0, PI / 6.0, PI / 4.0, PI / 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Boundary,
    Plan,
    PlanLc,
    PlanEe,
    PlanOptime,
    Baseline,
    SweepVisibility,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Boundary => "boundary",
            Command::Plan => "plan",
            Command::PlanLc => "plan-lc",
            Command::PlanEe => "plan-ee",
            Command::PlanOptime => "plan-optime",
            Command::Baseline => "baseline",
            Command::SweepVisibility => "sweep-visibility",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub command: Command,
    /// `None` uses the shipped reference config.
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub max_iters: Option<usize>,
    /// Reserved; accepted and ignored.
    pub seed: Option<u64>,
    /// Record wall times in `convergence.csv`.
    pub timing: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Validation(String),
    /// No acceptable plan; `summary.json` carries the status.
    #[error("{0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

enum Failure {
    Validation(String),
    Infeasible(String),
}

fn classify(e: PlannerError) -> Failure {
    match e {
        PlannerError::EntryInfeasible { .. }
        | PlannerError::ServiceInfeasible { .. }
        | PlannerError::RotationInfeasible { .. }
        | PlannerError::DemandInfeasible { .. }
        | PlannerError::HorizonInfeasible { .. }
        | PlannerError::Dynamics(_)
        | PlannerError::Scp(ScpError::BadInitialPoint)
        | PlannerError::Scp(ScpError::Subproblem { .. }) => Failure::Infeasible(e.to_string()),
        _ => Failure::Validation(e.to_string()),
    }
}

fn wall_clock() -> f64 {
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed().as_secs_f64()
}

struct Ctx {
    config: Config,
    out: OutDir,
    timing: bool,
}

impl Ctx {
    fn settings(&self) -> fsotraj_core::scp::ScpSettings {
        let mut s = self.config.scp;
        if self.timing {
            s.clock = Some(wall_clock);
        }
        s
    }

    fn scenario(&self) -> Result<Scenario, CliError> {
        self.config.scenario().map_err(CliError::Validation)
    }

    fn write_summary(&self, summary: &Summary) -> Result<(), CliError> {
        Ok(self.out.write("summary.json", &summary.to_json())?)
    }

    fn write_trajectory(&self, sc: &Scenario, traj: &Trajectory) -> Result<(), CliError> {
        self.out.write("trajectory.csv", &trajectory_csv(traj, sc.link(), sc.platform()))?;
        for (name, body) in trajectory_plots(traj, sc.link(), sc.platform()) {
            self.out.write(name, &body)?;
        }
        Ok(())
    }

    fn write_convergence(&self, logs: &[SegmentLog]) -> Result<(), CliError> {
        self.out.write("convergence.csv", &convergence_csv(logs, self.timing))?;
        let mut n = 0;
        let series = logs.iter().flat_map(|l| l.trace.iter()).map(|r| {
            n += 1;
            (n as f64, r.objective)
        });
        self.out.write("plot_convergence.dat", &plot_dat("step", "objective", series.collect::<Vec<_>>()))?;
        Ok(())
    }

    /// Record a failed solve and turn it into the matching error.
    fn fail(&self, command: Command, e: PlannerError) -> CliError {
        match classify(e) {
            Failure::Validation(msg) => CliError::Validation(msg),
            Failure::Infeasible(msg) => {
                let mut s = Summary::new(command.name(), PlanStatus::Infeasible.as_str());
                s.message = Some(msg.clone());
                match self.write_summary(&s) {
                    Ok(()) => CliError::Infeasible(msg),
                    Err(io) => io,
                }
            }
        }
    }
}

pub fn load_config(path: Option<&PathBuf>) -> Result<Config, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p)?,
        None => DEFAULT_CONFIG.to_string(),
    };
    Ok(Config::from_toml_str(&text)?)
}

pub fn run(opts: &RunOptions) -> Result<Summary, CliError> {
    let mut config = load_config(opts.config.as_ref())?;
    if let Some(n) = opts.max_iters {
        if n == 0 {
            return Err(CliError::Validation("--max-iters must be at least 1".into()));
        }
        config.scp.max_outer_iterations = n;
    }
    let ctx = Ctx { config, out: OutDir::create(&opts.out)?, timing: opts.timing };
    match opts.command {
        Command::Boundary => boundary(&ctx),
        Command::Plan => plan(&ctx),
        Command::PlanLc => plan_lc(&ctx),
        Command::PlanEe => plan_ee(&ctx),
        Command::PlanOptime => plan_optime(&ctx),
        Command::Baseline => baseline(&ctx),
        Command::SweepVisibility => sweep_visibility(&ctx),
    }
}

fn visibilities(ctx: &Ctx) -> Vec<f64> {
    ctx.config.visibilities_km.clone().unwrap_or_else(|| vec![ctx.config.link.visibility_km])
}

fn boundary(ctx: &Ctx) -> Result<Summary, CliError> {
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for v in visibilities(ctx) {
        let sc = ctx.config.scenario_at(v).map_err(CliError::Validation)?;
        rows.push(json!({
            "visibility_km": v,
            "radius_m": sc.service_radius_m(),
            "k1": sc.link().k1(),
            "k2_per_m": sc.link().k2(),
        }));
        points.push((v, sc.service_radius_m()));
    }
    ctx.out.write("plot_boundary.dat", &plot_dat("visibility_km", "radius_m", points))?;
    let mut s = Summary::new(Command::Boundary.name(), "Evaluated");
    s.details = json!({ "rate_threshold_bps": ctx.config.mission.rate_threshold_bps, "rows": rows });
    ctx.write_summary(&s)?;
    Ok(s)
}

fn mean_iterations(trace_sets: &[&[IterationRecord]]) -> u32 {
    let n: usize = trace_sets.iter().map(|t| t.len()).sum();
    (n as f64 / trace_sets.len().max(1) as f64).ceil() as u32
}

fn plan_summary(ctx: &Ctx, sc: &Scenario, plan: &PlanResult) -> Result<Summary, CliError> {
    let budget = sc.energy_budget_j();
    let metrics = evaluate_metrics(&plan.trajectory, sc.link(), sc.platform(), budget, sc.rate_threshold_bps())
        .map_err(|e| CliError::Infeasible(e.to_string()))?;
    let service_s = plan.service_time_s();
    let mut s = Summary::new(Command::Plan.name(), plan.status.as_str());
    s.segments = Some(Segments {
        entry: plan.segments.entry,
        service: plan.segments.service,
        exit: plan.segments.exit,
        total: plan.segments.total(),
    });
    s.energy_j = Some(Energies {
        entry: plan.energy.entry_j,
        service: plan.energy.service_j,
        exit: plan.energy.exit_j,
        total: plan.energy.total_j,
        exact_total: plan.exact_energy_j,
    });
    s.ratios = Ratios {
        service_time_s: Some(service_s),
        service_time_per_kj: Some(service_s / (budget / 1000.0)),
        spectral_efficiency: Some(metrics.spectral_efficiency),
        average_power_w: (plan.segments.service > 0).then(|| plan.energy.service_j / service_s),
        energy_efficiency_bits_per_j: None,
    };
    let probes: Vec<Value> = plan
        .probes
        .iter()
        .map(|p| json!({ "n_total": p.n_total, "n_service": p.n_service, "energy_j": p.energy_j, "passed": p.passed }))
        .collect();
    let traces = |label: &str| -> Vec<&[IterationRecord]> {
        plan.logs.iter().filter(|l| l.label == label).map(|l| l.trace.as_slice()).collect()
    };
    let n_upper = (budget / (sc.dt_s() * sc.platform().min_level_power())).floor() + 1.0;
    let n_lower = plan.probes.first().map_or(0.0, |p| p.n_total as f64);
    let n_prime = ctx.config.low_complexity.map_or(30, |l| l.n_prime);
    let complexity = complexity_estimate(
        n_upper,
        n_lower.min(n_upper),
        1.0,
        mean_iterations(&traces("service-feasibility")),
        mean_iterations(&traces("service")),
        n_prime,
    )
    .ok()
    .map(|c| {
        json!({
            "n_upper": n_upper, "n_lower": n_lower, "k3": c.k3, "sum_nm_cubed": c.sum_nm_cubed,
            "algorithm_flops_scale": c.algorithm3_flops_scale, "low_complexity_flops_scale": c.low_complexity_flops_scale,
        })
    });
    s.details = json!({
        "service_radius_m": sc.service_radius_m(),
        "energy_budget_j": budget,
        "rate_threshold_bps": sc.rate_threshold_bps(),
        "min_service_rate_bps": plan.rates_bps[plan.segments.entry..plan.segments.entry + plan.segments.service]
            .iter().cloned().fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r)))),
        "budget_probes": probes,
        "complexity": complexity,
    });
    Ok(s)
}

fn plan(ctx: &Ctx) -> Result<Summary, CliError> {
    let sc = ctx.scenario()?;
    let solver = ClarabelSolver::default();
    let planner = Planner::new(&sc, &solver, ctx.settings());
    let plan = planner.maximize_flight_time().map_err(|e| ctx.fail(Command::Plan, e))?;
    ctx.write_trajectory(&sc, &plan.trajectory)?;
    ctx.write_convergence(&plan.logs)?;
    let s = plan_summary(ctx, &sc, &plan)?;
    ctx.write_summary(&s)?;
    match plan.status {
        PlanStatus::OptimalLocal => Ok(s),
        other => Err(CliError::Infeasible(format!("plan status {}", other.as_str()))),
    }
}

fn plan_lc(ctx: &Ctx) -> Result<Summary, CliError> {
    let lc = ctx.config.low_complexity.ok_or_else(|| CliError::Validation("plan-lc needs a [low_complexity] section".into()))?;
    let sc = ctx.scenario()?;
    let solver = ClarabelSolver::default();
    let planner = Planner::new(&sc, &solver, ctx.settings());
    let thetas: Vec<f64> = lc.theta_rad.map_or_else(|| THETA_SWEEP.to_vec(), |t| vec![t]);
    let mut rows = Vec::new();
    let mut best = None;
    let mut last_err = None;
    for &theta in &thetas {
        match planner.plan_low_complexity(lc.n_prime, theta) {
            Ok(r) => {
                rows.push(json!({ "theta_rad": theta, "average_power_w": r.average_power_w }));
                if best.as_ref().map_or(true, |b: &fsotraj_core::planner::LowComplexityResult| r.average_power_w < b.average_power_w) {
                    best = Some(r);
                }
            }
            Err(e) => {
                rows.push(json!({ "theta_rad": theta, "error": e.to_string() }));
                last_err = Some(e);
            }
        }
    }
    let Some(best) = best else {
        return Err(ctx.fail(Command::PlanLc, last_err.expect("at least one angle")));
    };
    let full = replicate_rotation(&best.segment, best.theta_rad, lc.rotations).map_err(|e| ctx.fail(Command::PlanLc, e))?;
    ctx.write_trajectory(&sc, &full)?;
    ctx.write_convergence(&[SegmentLog { label: "rotation".into(), steps: lc.n_prime, trace: best.trace.clone() }])?;

    let platform = sc.platform();
    let budget = sc.energy_budget_j();
    let bound = bound_propulsion_energy_j(&full, platform).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let exact = trajectory_energy_j(&full, platform, EnergyModel::Exact).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let metrics = evaluate_metrics(&full, sc.link(), platform, budget, sc.rate_threshold_bps()).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let mut s = Summary::new(Command::PlanLc.name(), PlanStatus::OptimalLocal.as_str());
    s.segments = Some(Segments { entry: 0, service: full.steps(), exit: 0, total: full.steps() });
    s.energy_j = Some(Energies { entry: 0.0, service: bound, exit: 0.0, total: bound, exact_total: exact });
    s.ratios = Ratios {
        service_time_s: Some(metrics.sustainable_service_s),
        service_time_per_kj: Some(1000.0 / best.average_power_w),
        spectral_efficiency: Some(metrics.spectral_efficiency),
        average_power_w: Some(best.average_power_w),
        energy_efficiency_bits_per_j: None,
    };
    let closure = (full.last_position() - full.q[0]).norm();
    let complexity = complexity_estimate(lc.n_prime as f64, lc.n_prime as f64, 1.0, 0, best.trace.len() as u32, lc.n_prime)
        .ok()
        .map(|c| c.low_complexity_flops_scale);
    s.details = json!({
        "n_prime": lc.n_prime,
        "theta_rad": best.theta_rad,
        "rotations": lc.rotations,
        "closure_mismatch_m": closure,
        "service_radius_m": sc.service_radius_m(),
        "theta_sweep": rows,
        "low_complexity_flops_scale": complexity,
    });
    ctx.write_summary(&s)?;
    Ok(s)
}

fn plan_ee(ctx: &Ctx) -> Result<Summary, CliError> {
    let steps = ctx.config.efficiency_steps.ok_or_else(|| CliError::Validation("plan-ee needs an [efficiency] section".into()))?;
    let sc = ctx.scenario()?;
    let solver = ClarabelSolver::default();
    let planner = Planner::new(&sc, &solver, ctx.settings());
    let ee = planner.maximize_energy_efficiency(steps).map_err(|e| ctx.fail(Command::PlanEe, e))?;
    ctx.write_trajectory(&sc, &ee.trajectory)?;
    ctx.write_convergence(&[SegmentLog { label: "dinkelbach".into(), steps, trace: ee.trace.clone() }])?;
    let lambdas: Vec<Value> =
        ee.steps.iter().map(|d| json!({ "lambda": d.lambda, "residual": d.residual, "ratio": d.ratio })).collect();
    let mut s = Summary::new(Command::PlanEe.name(), PlanStatus::OptimalLocal.as_str());
    s.segments = Some(Segments { entry: 0, service: steps, exit: 0, total: steps });
    let bound = bound_propulsion_energy_j(&ee.trajectory, sc.platform()).map_err(|e| CliError::Infeasible(e.to_string()))?;
    s.energy_j = Some(Energies { entry: 0.0, service: bound, exit: 0.0, total: bound, exact_total: ee.exact_energy_j });
    s.ratios.energy_efficiency_bits_per_j = Some(ee.efficiency_bits_per_j);
    s.details = json!({
        "total_bits": ee.total_bits,
        "converged": ee.converged,
        "dinkelbach": lambdas,
    });
    ctx.write_summary(&s)?;
    Ok(s)
}

fn plan_optime(ctx: &Ctx) -> Result<Summary, CliError> {
    let demand = ctx
        .config
        .data_demand_bits
        .ok_or_else(|| CliError::Validation("plan-optime needs an [operation_time] section".into()))?;
    let sc = ctx.scenario()?;
    let solver = ClarabelSolver::default();
    let planner = Planner::new(&sc, &solver, ctx.settings());
    let r = planner.minimize_operation_time(demand).map_err(|e| ctx.fail(Command::PlanOptime, e))?;
    ctx.write_trajectory(&sc, &r.trajectory)?;
    ctx.write_convergence(&[SegmentLog { label: "rate".into(), steps: r.steps, trace: r.trace.clone() }])?;
    let probes: Vec<Value> = r.probes.iter().map(|p| json!({ "steps": p.steps, "bits": p.bits })).collect();
    let bound = bound_propulsion_energy_j(&r.trajectory, sc.platform()).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let exact = trajectory_energy_j(&r.trajectory, sc.platform(), EnergyModel::Exact).map_err(|e| CliError::Infeasible(e.to_string()))?;
    let mut s = Summary::new(Command::PlanOptime.name(), PlanStatus::OptimalLocal.as_str());
    s.segments = Some(Segments { entry: 0, service: r.steps, exit: 0, total: r.steps });
    s.energy_j = Some(Energies { entry: 0.0, service: bound, exit: 0.0, total: bound, exact_total: exact });
    s.ratios.service_time_s = Some(r.duration_s());
    s.details = json!({
        "data_demand_bits": demand,
        "delivered_bits": r.total_bits,
        "rate_probes": probes,
    });
    ctx.write_summary(&s)?;
    Ok(s)
}

fn baseline(ctx: &Ctx) -> Result<Summary, CliError> {
    let spec = ctx.config.baseline.ok_or_else(|| CliError::Validation("baseline needs a [baseline] section".into()))?;
    let sc = ctx.scenario()?;
    let platform = sc.platform();
    let bad = |e: fsotraj_core::baselines::BaselineError| CliError::Validation(e.to_string());
    let (traj, turn_steps) = match spec.kind {
        BaselineKind::Circular => (circular_path(&spec, sc.dt_s(), platform).map_err(bad)?, Vec::new()),
        BaselineKind::Straight => {
            let p = straight_path(&spec, sc.bc().q_initial, Vec2::ZERO, sc.q_final(), sc.dt_s(), platform).map_err(bad)?;
            (p.trajectory, p.turn_steps)
        }
    };
    let budget = sc.energy_budget_j();
    let threshold = baseline_threshold(&spec, &sc);
    let m = evaluate_metrics(&traj, sc.link(), platform, budget, threshold).map_err(bad)?;
    ctx.write_trajectory(&sc, &traj)?;
    let mut s = Summary::new(Command::Baseline.name(), "Evaluated");
    s.segments = Some(Segments { entry: 0, service: m.service_slots, exit: 0, total: traj.steps() });
    let bound = trajectory_energy_j(&traj, platform, EnergyModel::UpperBound).map_err(|e| CliError::Validation(e.to_string()))?;
    s.energy_j = Some(Energies { entry: 0.0, service: m.energy_j, exit: 0.0, total: bound, exact_total: m.energy_j });
    s.ratios = Ratios {
        service_time_s: Some(m.sustainable_service_s),
        service_time_per_kj: Some(m.service_time_per_kj),
        spectral_efficiency: Some(m.spectral_efficiency),
        average_power_w: Some(m.energy_j / traj.duration_s()),
        energy_efficiency_bits_per_j: None,
    };
    s.details = json!({
        "kind": match spec.kind { BaselineKind::Circular => "circular", BaselineKind::Straight => "straight" },
        "speed_mps": spec.speed_mps,
        "radius_m": spec.radius_m,
        "turn_steps": turn_steps,
        "rate_threshold_bps": threshold,
    });
    ctx.write_summary(&s)?;
    Ok(s)
}

/// A circle sized to the service boundary counts as flying on it, so its
/// own rate is admitted when it falls marginally short of the threshold.
pub fn baseline_threshold(spec: &BaselineSpec, sc: &Scenario) -> f64 {
    match spec.kind {
        BaselineKind::Circular => sc.rate_threshold_bps().min(sc.link().rate_bps(Vec2::new(spec.radius_m, 0.0))),
        BaselineKind::Straight => sc.rate_threshold_bps(),
    }
}

fn sweep_visibility(ctx: &Ctx) -> Result<Summary, CliError> {
    let list = visibilities(ctx);
    let scenarios: Vec<Scenario> =
        list.iter().map(|&v| ctx.config.scenario_at(v)).collect::<Result<_, _>>().map_err(CliError::Validation)?;
    let settings = ctx.settings();
    let results: Vec<Result<PlanResult, PlannerError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|sc| {
                scope.spawn(move || {
                    let solver = ClarabelSolver::default();
                    Planner::new(sc, &solver, settings).maximize_flight_time()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut failed = None;
    for ((&v, sc), r) in list.iter().zip(&scenarios).zip(results) {
        match r {
            Ok(plan) => {
                rows.push(json!({
                    "visibility_km": v,
                    "radius_m": sc.service_radius_m(),
                    "status": plan.status.as_str(),
                    "entry_slots": plan.segments.entry,
                    "service_slots": plan.segments.service,
                    "exit_slots": plan.segments.exit,
                    "service_time_s": plan.service_time_s(),
                    "total_energy_j": plan.energy.total_j,
                    "service_time_per_kj": plan.service_time_s() / (sc.energy_budget_j() / 1000.0),
                }));
                points.push((v, plan.service_time_s()));
                if plan.status != PlanStatus::OptimalLocal {
                    failed = Some(format!("visibility {v} km: status {}", plan.status.as_str()));
                }
            }
            Err(e) => {
                let msg = e.to_string();
                rows.push(json!({ "visibility_km": v, "radius_m": sc.service_radius_m(), "status": "Infeasible", "error": msg }));
                match classify(e) {
                    Failure::Validation(m) => return Err(CliError::Validation(m)),
                    Failure::Infeasible(m) => failed = Some(format!("visibility {v} km: {m}")),
                }
            }
        }
    }
    ctx.out.write("plot_sweep.dat", &plot_dat("visibility_km", "service_time_s", points))?;
    let mut s = Summary::new(Command::SweepVisibility.name(), "Evaluated");
    s.message = failed.clone();
    s.details = json!({ "energy_budget_j": ctx.config.mission.energy_budget_j, "rows": rows });
    ctx.write_summary(&s)?;
    match failed {
        None => Ok(s),
        Some(m) => Err(CliError::Infeasible(m)),
    }
}
