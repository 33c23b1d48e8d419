//! The four subcommands. Each returns structured results and writes its files;
//! printing is left to the caller.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use slsblend_core::controller::{min_tau, AntiWindupController, Controller, SlController};
use slsblend_core::sim::{
    distributed_run, gen_disturbance, gen_iid, make_integral_controller, run_rng, simulate, summarize, write_trajectory_csv,
    DisturbanceGen, NetworkStats, SimConfig, Trajectory, TrajectorySummary,
};
use slsblend_core::synthesis::{blend_alpha, blend_cost, worst_case_peak, ActiveReport, SolverSummary};
use slsblend_core::{
    synthesize_blend, synthesize_linear, BlendClm, Closure, DisturbanceModel, Error as CoreError, ProjectionKind, SynthesisResult,
};

use crate::config::{ControllerSpec, LoadedConfig, SweepVar};
use crate::error::{CliError, CliResult};

/// Tolerance used when checking that a CLM file belongs to the configured plant.
pub const CLM_CHECK_TOL: f64 = 1e-6;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

pub fn load_clm(path: &Path) -> CliResult<BlendClm> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Load { path: path.to_path_buf(), msg: e.to_string() })?;
    BlendClm::from_json(&text).map_err(|e| CliError::Load { path: path.to_path_buf(), msg: e.to_string() })
}

/// `clm.json` -> `clm.diag.json`.
pub fn diagnostics_path(clm: &Path) -> PathBuf {
    let stem = clm.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "clm".into());
    clm.with_file_name(format!("{stem}.diag.json"))
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthDiagnostics {
    pub objective: f64,
    pub radii: Vec<f64>,
    pub projection: ProjectionKind,
    pub alpha: Vec<Vec<f64>>,
    pub solver: SolverSummary,
    pub active: ActiveReport,
    pub max_feasibility_residual: f64,
}

impl SynthDiagnostics {
    fn new(r: &SynthesisResult) -> Self {
        let a = &r.alpha.matrix;
        Self {
            objective: r.objective,
            radii: r.blend.radii().to_vec(),
            projection: r.blend.projection(),
            alpha: (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect(),
            solver: r.solver.clone(),
            active: r.active.clone(),
            max_feasibility_residual: r.max_feasibility_residual,
        }
    }
}

pub struct SynthOutcome {
    pub clm_path: PathBuf,
    pub diagnostics_path: PathBuf,
    pub result: SynthesisResult,
}

pub fn synthesize(cfg: &LoadedConfig, tol: Option<f64>) -> CliResult<SynthesisResult> {
    let plant = cfg.plant()?;
    let (setup, radii, kind) = cfg.setup(&plant, tol)?;
    Ok(synthesize_blend(&setup, &radii, kind)?)
}

pub fn cmd_synth(cfg: &LoadedConfig, out: Option<&Path>, tol: Option<f64>) -> CliResult<SynthOutcome> {
    let clm_path = match out {
        Some(p) => p.to_path_buf(),
        None => cfg
            .config
            .output
            .clm
            .as_ref()
            .map(|p| cfg.resolve(p))
            .ok_or_else(|| CliError::Usage("no output path: pass --out or set output.clm".into()))?,
    };
    let result = synthesize(cfg, tol)?;
    let mut w = create(&clm_path)?;
    w.write_all(result.blend.to_json()?.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Io { path: clm_path.clone(), source: e })?;
    let diagnostics_path = diagnostics_path(&clm_path);
    write_json(&diagnostics_path, &SynthDiagnostics::new(&result))?;
    Ok(SynthOutcome { clm_path, diagnostics_path, result })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub controller: String,
    pub tau: Option<usize>,
    pub seed: u64,
    pub u_max: Option<f64>,
    #[serde(flatten)]
    pub stats: TrajectorySummary,
    pub final_abs_x: f64,
    pub network: Option<NetworkStats>,
}

pub struct ScenarioOutcome {
    pub summary: ScenarioSummary,
    pub trajectory: Trajectory,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Disturbance for scenario `index`: i.i.d. scenarios draw from ChaCha20 seeded
/// with the top-level seed on stream `index`; the other generators are deterministic.
pub fn scenario_disturbance(gen: &DisturbanceGen, horizon: usize, n: usize, seed: u64, index: usize) -> CliResult<Vec<DVector<f64>>> {
    match gen {
        DisturbanceGen::Iid { dist } => {
            dist.validate()?;
            Ok(gen_iid(dist, horizon, n, &mut run_rng(seed, index as u64)))
        }
        other => Ok(gen_disturbance(other, horizon, n, seed)?),
    }
}

fn check_clm(blend: &BlendClm, cfg: &LoadedConfig, sys: &slsblend_core::LinearSystem, path: &Path) -> CliResult<()> {
    let closure = cfg.config.synthesis.as_ref().and_then(|s| s.closure).unwrap_or(Closure::General);
    let load = |msg: String| CliError::Load { path: path.to_path_buf(), msg };
    let reports = blend.validate(sys, CLM_CHECK_TOL, closure).map_err(|e| load(e.to_string()))?;
    let worst = reports.iter().map(|r| r.max_residual()).fold(0.0, f64::max);
    if worst > CLM_CHECK_TOL {
        return Err(load(format!("CLM does not match the plant (residual {worst:.3e})")));
    }
    Ok(())
}

pub fn cmd_simulate(cfg: &LoadedConfig, clm: Option<&Path>, out_dir: &Path, seed: Option<u64>) -> CliResult<Vec<ScenarioOutcome>> {
    let sim = cfg.simulation()?;
    let plant = cfg.plant()?;
    let sys = plant.sys.clone();
    let seed = seed.unwrap_or(sim.seed);

    let blend = match &sim.controller {
        ControllerSpec::Integral { .. } => None,
        _ => {
            let path = cfg.clm_path(clm).ok_or_else(|| CliError::Usage("no CLM: pass --clm or set simulation.clm".into()))?;
            let b = load_clm(&path)?;
            check_clm(&b, cfg, &sys, &path)?;
            Some(b)
        }
    };
    let tau = match &sim.controller {
        ControllerSpec::AntiWindup { tau: Some(t), .. } => Some(*t),
        ControllerSpec::AntiWindup { tau: None, tau_max } => Some(min_tau(sys.a(), *tau_max)?.0),
        _ => None,
    };
    let label = match &sim.controller {
        ControllerSpec::Sl => "sl",
        ControllerSpec::AntiWindup { .. } => "anti-windup",
        ControllerSpec::Integral { .. } => "integral",
    };

    let mut sim_cfg = SimConfig::new(sys.clone(), sim.horizon);
    if let Some(u) = sim.u_max {
        sim_cfg = sim_cfg.saturated(u);
    }
    sim_cfg.seed = seed;
    if let Some(th) = sim.divergence_threshold {
        sim_cfg.divergence_threshold = th;
    }
    let weights = match cfg.config.synthesis.as_ref() {
        Some(_) => {
            let (setup, _, _) = cfg.setup(&plant, None)?;
            Some((setup.q, setup.p, setup.safety))
        }
        None => None,
    };

    let mut outcomes = Vec::with_capacity(sim.scenarios.len());
    for (index, sc) in sim.scenarios.iter().enumerate() {
        let w = scenario_disturbance(&sc.disturbance, sim.horizon, sys.n(), seed, index)?;
        let (trajectory, network) = if sim.distributed {
            let blend = blend.as_ref().ok_or_else(|| CliError::Usage("the distributed runtime needs a CLM controller".into()))?;
            let s = cfg.synthesis()?;
            let l = s.locality.as_ref().ok_or_else(|| CliError::Config {
                path: "synthesis.locality".into(),
                msg: "the distributed runtime needs a locality block".into(),
            })?;
            let mask = cfg.mask(&plant, l, blend.horizon())?;
            let (tr, stats) = distributed_run(&sim_cfg, blend, &mask, tau, &w)?;
            (tr, Some(stats))
        } else {
            let mut ctrl: Box<dyn Controller> = match (&sim.controller, &blend) {
                (ControllerSpec::Integral { kp, ki }, _) => {
                    let nodes = plant.actuator_nodes.clone().ok_or_else(|| CliError::Config {
                        path: "simulation.controller".into(),
                        msg: "the integral baseline needs plant actuator nodes".into(),
                    })?;
                    Box::new(make_integral_controller(&sys, &nodes, *kp, *ki)?)
                }
                (ControllerSpec::Sl, Some(b)) => Box::new(SlController::new(b.clone())),
                (ControllerSpec::AntiWindup { .. }, Some(b)) => Box::new(AntiWindupController::new(b.clone(), sys.a(), tau.unwrap_or(0))?),
                _ => unreachable!("CLM controllers always load a CLM"),
            };
            (simulate(&sim_cfg, ctrl.as_mut(), &w)?, None)
        };
        let stats = summarize(&trajectory, weights.as_ref().map(|(q, p, _)| (q, p)), weights.as_ref().map(|(_, _, s)| s));
        let summary = ScenarioSummary {
            scenario: sc.name.clone(),
            controller: label.into(),
            tau,
            seed,
            u_max: sim.u_max,
            final_abs_x: trajectory.x.last().map_or(0.0, |x| x.amax()),
            stats,
            network,
        };
        let csv_path = out_dir.join(format!("{}.csv", sc.name));
        let summary_path = out_dir.join(format!("{}.summary.json", sc.name));
        let mut w = create(&csv_path)?;
        write_trajectory_csv(&trajectory, &mut w)?;
        w.flush().map_err(|e| CliError::Io { path: csv_path.clone(), source: e })?;
        write_json(&summary_path, &summary)?;
        outcomes.push(ScenarioOutcome { summary, trajectory, csv_path, summary_path });
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub linear_cost: Option<f64>,
    pub blend_cost: Option<f64>,
    /// `100 (linear - blend) / linear`.
    pub improvement_pct: Option<f64>,
    pub status: String,
}

fn point_status(e: &CoreError) -> String {
    match e {
        CoreError::Infeasible { family, .. } => format!("infeasible: {family}"),
        CoreError::MaxIter { .. } => "max-iter".into(),
        other => format!("error: {other}"),
    }
}

pub fn cmd_sweep(cfg: &LoadedConfig, var: SweepVar, grid: &[f64], jobs: Option<usize>, tol: Option<f64>) -> CliResult<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(CliError::Usage("empty sweep grid".into()));
    }
    let plant = cfg.plant()?;
    let (setup, radii, kind) = cfg.setup(&plant, tol)?;
    let eta_max = setup.safety.eta_max;
    for &g in grid {
        let ok = match var {
            SweepVar::Sigma => g > 0.0 && g.is_finite(),
            SweepVar::Eta1 => (0.0..=eta_max).contains(&g),
        };
        if !ok {
            return Err(CliError::Usage(format!("grid value {g} is out of range for {var:?}")));
        }
    }
    match var {
        SweepVar::Sigma
            if !matches!(setup.dist, DisturbanceModel::TruncatedGaussian { .. } | DisturbanceModel::PointMassAugmented { .. }) =>
        {
            return Err(CliError::Config {
                path: "synthesis.distribution".into(),
                msg: "a sigma sweep needs a Gaussian-based distribution".into(),
            })
        }
        SweepVar::Eta1 if radii.len() != 2 => {
            return Err(CliError::Config { path: "synthesis.radii".into(), msg: "an eta1 sweep needs exactly two radii".into() })
        }
        _ => {}
    }

    let point = |g: f64| -> SweepRow {
        let mut s = setup.clone();
        let mut r = radii.clone();
        match var {
            SweepVar::Sigma => match &mut s.dist {
                DisturbanceModel::TruncatedGaussian { sigma, .. } | DisturbanceModel::PointMassAugmented { sigma, .. } => *sigma = g,
                _ => unreachable!(),
            },
            SweepVar::Eta1 => r[0] = g,
        }
        let lin = synthesize_linear(&s);
        let bl = synthesize_blend(&s, &r, kind);
        let status = match (&lin, &bl) {
            (Ok(_), Ok(_)) => "optimal".to_string(),
            (Err(e), _) => format!("linear {}", point_status(e)),
            (_, Err(e)) => format!("blend {}", point_status(e)),
        };
        let lc = lin.ok().map(|x| x.objective);
        let bc = bl.ok().map(|x| x.objective);
        let improvement_pct = match (lc, bc) {
            (Some(l), Some(b)) if l != 0.0 => Some(100.0 * (l - b) / l),
            _ => None,
        };
        SweepRow { value: g, linear_cost: lc, blend_cost: bc, improvement_pct, status }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs:?} workers: {e}")))?;
    Ok(pool.install(|| grid.par_iter().map(|&g| point(g)).collect()))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "linear_cost", "blend_cost", "improvement_pct", "status"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in rows {
        w.write_record([format!("{:e}", r.value), opt(r.linear_cost), opt(r.blend_cost), opt(r.improvement_pct), r.status.clone()])?;
    }
    w.flush().map_err(|e| CliError::Io { path: PathBuf::from("<sweep>"), source: e })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub file: String,
    pub zones: usize,
    pub horizon: usize,
    pub projection: ProjectionKind,
    pub radii: Vec<f64>,
    /// Expected cost under the config's weights and distribution, when one is given.
    pub objective: Option<f64>,
    pub state_peak: f64,
    pub input_peak: f64,
}

pub fn cmd_compare(files: &[PathBuf], cfg: Option<&LoadedConfig>) -> CliResult<Vec<CompareRow>> {
    if files.is_empty() {
        return Err(CliError::Usage("compare needs at least one CLM file".into()));
    }
    let weights = match cfg {
        Some(c) => {
            let plant = c.plant()?;
            let (setup, _, _) = c.setup(&plant, None)?;
            Some((setup.q, setup.p, setup.dist))
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(files.len());
    for f in files {
        let blend = load_clm(f)?;
        let objective = match &weights {
            Some((q, p, dist)) => {
                let alpha = blend_alpha(&blend, dist).map_err(|e| CliError::Load { path: f.clone(), msg: e.to_string() })?;
                Some(blend_cost(&blend, &alpha, q, p).map_err(|e| CliError::Load { path: f.clone(), msg: e.to_string() })?)
            }
            None => None,
        };
        let (state_peak, input_peak) = worst_case_peak(&blend);
        rows.push(CompareRow {
            file: f.display().to_string(),
            zones: blend.zones().len(),
            horizon: blend.horizon(),
            projection: blend.projection(),
            radii: blend.radii().to_vec(),
            objective,
            state_peak,
            input_peak,
        });
    }
    Ok(rows)
}

pub fn format_compare(rows: &[CompareRow]) -> String {
    let mut s = format!(
        "{:<32} {:>5} {:>4} {:>10} {:>14} {:>12} {:>12}  radii\n",
        "file", "zones", "T", "projection", "objective", "x_peak", "u_peak"
    );
    for r in rows {
        let obj = r.objective.map(|o| format!("{o:.6}")).unwrap_or_else(|| "-".into());
        let proj = match r.projection {
            ProjectionKind::Saturation => "saturation",
            ProjectionKind::Radial => "radial",
        };
        let radii: Vec<String> = r.radii.iter().map(|v| format!("{v}")).collect();
        s.push_str(&format!(
            "{:<32} {:>5} {:>4} {:>10} {:>14} {:>12.6} {:>12.6}  {}\n",
            r.file,
            r.zones,
            r.horizon,
            proj,
            obj,
            r.state_peak,
            r.input_peak,
            radii.join(",")
        ));
    }
    s
}
