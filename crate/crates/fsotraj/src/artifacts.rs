//! Output files: `trajectory.csv`, `convergence.csv`, `summary.json` and
//! whitespace-separated `plot_*.dat` series.
//!
//! Numbers are written with the shortest round-trip representation, so
//! repeated runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fsotraj_core::channel::FsoLink;
use fsotraj_core::dynamics::{exact_power_w, Trajectory, UavPlatform};
use fsotraj_core::planner::SegmentLog;
use serde::Serialize;

pub const TRAJECTORY_HEADER: &str = "n,t_s,x_m,y_m,vx_mps,vy_mps,ax_mps2,ay_mps2,power_w,rate_bps";
pub const CONVERGENCE_HEADER: &str = "segment,iteration,objective,bound_energy_j,exact_energy_j,kkt_residual,carried_violation,wall_time_s";

/// One row per state. The last state has no acceleration and is not
/// charged, so its acceleration and power fields are empty.
pub fn trajectory_csv(traj: &Trajectory, link: &FsoLink, platform: &UavPlatform) -> String {
    let mut out = String::with_capacity(96 * traj.q.len());
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for n in 0..traj.q.len() {
        let (q, v) = (traj.q[n], traj.v[n]);
        let t = n as f64 * traj.dt_s;
        let _ = write!(out, "{n},{t},{},{},{},{},", q.x, q.y, v.x, v.y);
        match traj.a.get(n) {
            Some(&a) => {
                let p = exact_power_w(v, a, platform).map_or(String::new(), |p| p.to_string());
                let _ = write!(out, "{},{},{p},", a.x, a.y);
            }
            None => out.push_str(",,,"),
        }
        let _ = writeln!(out, "{}", link.rate_bps(q));
    }
    out
}

/// Per-iteration traces of every segment. Wall times are written only when
/// `timing` is set, since they differ between runs.
pub fn convergence_csv(logs: &[SegmentLog], timing: bool) -> String {
    let mut out = String::new();
    out.push_str(CONVERGENCE_HEADER);
    out.push('\n');
    for log in logs {
        for r in &log.trace {
            let wall = match (timing, r.wall_time_s) {
                (true, Some(w)) => w.to_string(),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{wall}",
                log.label, r.iteration, r.objective, r.bound_energy_j, r.exact_energy_j, r.kkt_residual, r.carried_violation
            );
        }
    }
    out
}

/// Two-column series with a comment header naming the columns.
pub fn plot_dat(x_label: &str, y_label: &str, points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = format!("# {x_label} {y_label}\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x} {y}");
    }
    out
}

/// The standard plots of a trajectory: path, per-slot rate and power.
pub fn trajectory_plots(traj: &Trajectory, link: &FsoLink, platform: &UavPlatform) -> Vec<(&'static str, String)> {
    let dt = traj.dt_s;
    let path = plot_dat("x_m", "y_m", traj.q.iter().map(|q| (q.x, q.y)));
    let rate = plot_dat("t_s", "rate_bps", traj.q.iter().enumerate().map(|(n, &q)| (n as f64 * dt, link.rate_bps(q))));
    let power = plot_dat(
        "t_s",
        "power_w",
        traj.a
            .iter()
            .enumerate()
            .filter_map(|(n, &a)| exact_power_w(traj.v[n], a, platform).ok().map(|p| (n as f64 * dt, p))),
    );
    vec![("plot_path.dat", path), ("plot_rate.dat", rate), ("plot_power.dat", power)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segments {
    pub entry: usize,
    pub service: usize,
    pub exit: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energies {
    pub entry: f64,
    pub service: f64,
    pub exit: f64,
    /// Budgeted propulsion energy under the upper-bound model.
    pub total: f64,
    /// Exact-model energy of the whole trajectory.
    pub exact_total: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Ratios {
    pub service_time_s: Option<f64>,
    pub service_time_per_kj: Option<f64>,
    pub spectral_efficiency: Option<f64>,
    pub average_power_w: Option<f64>,
    pub energy_efficiency_bits_per_j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub status: &'static str,
    pub message: Option<String>,
    pub segments: Option<Segments>,
    pub energy_j: Option<Energies>,
    pub ratios: Ratios,
    pub details: serde_json::Value,
}

impl Summary {
    pub fn new(command: &'static str, status: &'static str) -> Self {
        Summary {
            command,
            status,
            message: None,
            segments: None,
            energy_j: None,
            ratios: Ratios::default(),
            details: serde_json::Value::Object(Default::default()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Output directory writer.
#[derive(Debug, Clone)]
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutDir { dir: dir.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, name: &str, contents: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), contents)
    }
}
