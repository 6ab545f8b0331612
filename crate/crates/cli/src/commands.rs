use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use geofeas_core::auv::{extract_control, extract_control_from_states};
use geofeas_core::dynamics::regularity_check;
use geofeas_core::integrators::run_simulation;
use geofeas_core::kinematic::admissible_velocity_space;
use geofeas_core::Method;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::output::{fmt_f64, read_trajectory, write_controls, write_diagnostics, write_trajectory};
use crate::{io_err, CliError};

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub h: Option<f64>,
    pub steps: Option<usize>,
    pub no_constraints: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub records: usize,
    pub max_abs_phi: f64,
    pub max_separation_error: f64,
    pub max_orthogonality_error: f64,
}

/// Runs one scenario and writes its outputs into `out_dir`.
pub fn simulate(config: &Path, out_dir: &Path, ov: &Overrides) -> Result<RunSummary, CliError> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(m) = ov.method {
        cfg.integrator.method = m;
    }
    if let Some(h) = ov.h {
        if !(h > 0.0) || !h.is_finite() {
            return Err(CliError::Config {
                key: "--h".into(),
                message: "must be positive and finite".into(),
            });
        }
        cfg.integrator.h = h;
    }
    if let Some(n) = ov.steps {
        if n == 0 {
            return Err(CliError::Config {
                key: "--steps".into(),
                message: "must be at least 1".into(),
            });
        }
        cfg.integrator.steps = n;
    }
    let graph = if ov.no_constraints {
        cfg.graph.without_edges()
    } else {
        cfg.graph.clone()
    };
    let model = cfg.model()?;
    let regularity = regularity_check(&model, &graph, &cfg.initial.g)?;
    let traj = run_simulation(&model, &graph, &cfg.initial, &cfg.integrator)?;
    let controls = extract_control(&model, &traj)?;

    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_trajectory(&out_dir.join(&cfg.output.trajectory), &traj, &graph)?;
    write_diagnostics(&out_dir.join(&cfg.output.diagnostics), &traj, &graph)?;
    write_controls(&out_dir.join(&cfg.output.controls), &controls)?;
    let scenario_copy = out_dir.join("scenario.cfg");
    std::fs::write(&scenario_copy, &cfg.source).map_err(io_err(&scenario_copy))?;

    let summary = RunSummary {
        out_dir: out_dir.to_path_buf(),
        records: traj.len(),
        max_abs_phi: traj.max_abs_phi(),
        max_separation_error: traj.max_separation_error(&graph),
        max_orthogonality_error: traj.max_orthogonality_error(),
    };
    let energy: Vec<f64> = traj.records.iter().map(|r| r.diagnostics.energy).collect();
    let e0 = energy.first().copied().unwrap_or_default();
    let energy_drift = energy.iter().fold(0.0f64, |m, e| m.max((e - e0).abs()));

    let mut report = String::new();
    let c = &cfg.integrator;
    let _ = writeln!(report, "scenario: {}", config.display());
    let _ = writeln!(report, "group: {}", cfg.group);
    let _ = writeln!(report, "agents: {}", cfg.initial.g.len());
    let _ = writeln!(report, "constraints: {}", graph.constraint_count());
    let _ = writeln!(report, "method: {}", c.method);
    let _ = writeln!(report, "h: {}", fmt_f64(c.h));
    let _ = writeln!(report, "steps: {}", c.steps);
    let _ = writeln!(report, "records: {}", traj.len());
    let _ = writeln!(report, "force_sign_convention: {}", cfg.convention);
    let _ = writeln!(
        report,
        "regularity: {} (sigma_min {}, sigma_max {})",
        regularity.verdict(),
        fmt_f64(regularity.sigma_min),
        fmt_f64(regularity.sigma_max)
    );
    let _ = writeln!(report, "max_abs_phi: {}", fmt_f64(summary.max_abs_phi));
    let _ = writeln!(report, "max_abs_phi_rate: {}", fmt_f64(traj.max_abs_phi_rate()));
    let _ = writeln!(report, "max_separation_error_m: {}", fmt_f64(summary.max_separation_error));
    let _ = writeln!(report, "max_orthogonality_error: {}", fmt_f64(summary.max_orthogonality_error));
    let _ = writeln!(report, "max_energy_drift_j: {}", fmt_f64(energy_drift));
    let report_path = out_dir.join(&cfg.output.report);
    std::fs::write(&report_path, report).map_err(io_err(&report_path))?;
    Ok(summary)
}

/// Runs several scenarios on up to `jobs` threads. With more than one config,
/// each writes into `out_dir/<file stem>`. Results keep the input order.
pub fn simulate_many(
    configs: &[PathBuf],
    out_dir: &Path,
    ov: &Overrides,
    jobs: usize,
) -> Result<Vec<Result<RunSummary, CliError>>, CliError> {
    let dirs: Vec<PathBuf> = if configs.len() == 1 {
        vec![out_dir.to_path_buf()]
    } else {
        let stems: Vec<String> = configs
            .iter()
            .map(|c| c.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
            .collect();
        let unique: BTreeSet<&String> = stems.iter().collect();
        if unique.len() != stems.len() || stems.iter().any(String::is_empty) {
            return Err(CliError::Config {
                key: "--config".into(),
                message: "configs run together need distinct file names".into(),
            });
        }
        stems.iter().map(|s| out_dir.join(s)).collect()
    };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunSummary, CliError>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, configs.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= configs.len() {
                    break;
                }
                let r = simulate(&configs[k], &dirs[k], ov);
                results.lock().expect("no panics while holding the lock")[k] = Some(r);
            });
        }
    });
    Ok(results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect())
}

/// Machine-readable result of `kinfeas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinfeasReport {
    pub group: String,
    pub agents: usize,
    pub constraints: usize,
    pub rank: usize,
    pub nullspace_dim: usize,
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of admissible velocities, one stacked vector per row.
    pub basis: Vec<Vec<f64>>,
}

pub fn kinfeas(config: &Path) -> Result<KinfeasReport, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let sys = admissible_velocity_space(&cfg.graph, &cfg.initial.g)?;
    Ok(KinfeasReport {
        group: cfg.group.to_string(),
        agents: cfg.initial.g.len(),
        constraints: cfg.graph.constraint_count(),
        rank: sys.rank,
        nullspace_dim: sys.nullspace_dim(),
        singular_values: sys.singular_values.clone(),
        basis: sys
            .nullspace_basis
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
    })
}

impl KinfeasReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("rank {}, nullspace dim {}\n", self.rank, self.nullspace_dim);
        for (k, row) in self.basis.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:+.6}")).collect();
            let _ = writeln!(s, "K{}: {}", k + 1, cells.join(" "));
        }
        s
    }
}

/// Recomputes controls from a written trajectory by differencing velocities.
///
/// The scenario defaults to `scenario.cfg` next to the trajectory. Returns the
/// path written.
pub fn extract_control_cmd(
    traj_dir: &Path,
    config: Option<&Path>,
    out: Option<&Path>,
) -> Result<PathBuf, CliError> {
    let cfg_path = config.map_or_else(|| traj_dir.join("scenario.cfg"), Path::to_path_buf);
    let cfg = ScenarioConfig::load(&cfg_path)?;
    let model = cfg.model()?;
    let traj_path = traj_dir.join(&cfg.output.trajectory);
    let agents = cfg.initial.g.len();
    // A run without constraints has no multiplier columns.
    let table = read_trajectory(&traj_path, cfg.group, agents, &cfg.graph).or_else(|e| {
        read_trajectory(&traj_path, cfg.group, agents, &cfg.graph.without_edges()).map_err(|_| e)
    })?;
    let controls = extract_control_from_states(&model, &table.states)?;
    let out_path = out.map_or_else(|| traj_dir.join("controls_extracted.csv"), Path::to_path_buf);
    write_controls(&out_path, &controls)?;
    Ok(out_path)
}
