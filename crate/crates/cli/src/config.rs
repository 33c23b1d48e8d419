//! Experiment configuration files.
//!
//! Configs are JSON with a `"schema"` version. Every path inside a config is
//! resolved relative to the directory containing the config file.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use slsblend_core::sim::{make_chain_plant, DisturbanceGen};
use slsblend_core::synthesis::{build_locality_mask, IntegralConstraint, LocalityParams};
use slsblend_core::{Closure, DisturbanceModel, LinearSystem, LocalityMask, ProjectionKind, SafetySpec, SynthesisSetup};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub plant: PlantSpec,
    #[serde(default)]
    pub synthesis: Option<SynthesisBlock>,
    #[serde(default)]
    pub simulation: Option<SimulationBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSpec {
    Explicit {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        /// Node graph used by locality masks; node `i` is state `i`.
        #[serde(default)]
        adjacency: Option<Vec<Vec<usize>>>,
        /// Node of each input column.
        #[serde(default)]
        actuator_nodes: Option<Vec<usize>>,
    },
    /// A JSON file holding `{"a": [[..]], "b": [[..]]}`.
    File { path: PathBuf },
    /// Line graph with diagonal 1 - 2c and coupling c.
    Chain {
        nodes: usize,
        coupling: f64,
        #[serde(default)]
        actuator_nodes: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

/// Either a scalar multiple of the identity or an explicit matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Scaled(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyBlock {
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub u_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalityBlock {
    pub d: usize,
    pub comm_delay: f64,
    pub act_delay: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnSpec {
    /// `"actuators"` selects the actuated nodes.
    Named(String),
    List(Vec<usize>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralBlock {
    pub zone: usize,
    pub columns: ColumnSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub scaling_iters: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisBlock {
    pub horizon: usize,
    /// Zone radii; a single radius gives the linear controller.
    pub radii: Vec<f64>,
    pub distribution: DisturbanceModel,
    pub q: WeightSpec,
    pub p: WeightSpec,
    #[serde(default)]
    pub safety: Option<SafetyBlock>,
    #[serde(default)]
    pub projection: ProjectionKind,
    #[serde(default)]
    pub closure: Option<Closure>,
    #[serde(default)]
    pub locality: Option<LocalityBlock>,
    #[serde(default)]
    pub integral: Vec<IntegralBlock>,
    #[serde(default)]
    pub solver: Option<SolverBlock>,
    #[serde(default)]
    pub feas_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerSpec {
    Sl,
    /// Anti-windup realization; the smallest contracting lag when `tau` is absent.
    AntiWindup {
        #[serde(default)]
        tau: Option<usize>,
        #[serde(default = "default_tau_max")]
        tau_max: usize,
    },
    /// Proportional-integral baseline on the actuated nodes.
    Integral {
        kp: f64,
        ki: f64,
    },
}

fn default_tau_max() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub disturbance: DisturbanceGen,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    /// Input saturation level; unsaturated when absent.
    #[serde(default)]
    pub u_max: Option<f64>,
    pub controller: ControllerSpec,
    pub scenarios: Vec<Scenario>,
    /// CLM file, relative to the config; defaults to `output.clm`.
    #[serde(default)]
    pub clm: Option<PathBuf>,
    /// Run the per-node message-passing runtime instead of the centralized controller.
    #[serde(default)]
    pub distributed: bool,
    #[serde(default)]
    pub divergence_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Sigma,
    Eta1,
}

impl std::str::FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sigma" => Ok(Self::Sigma),
            "eta1" | "eta_1" => Ok(Self::Eta1),
            other => Err(format!("unknown sweep variable {other:?} (sigma or eta1)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub var: SweepVar,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub clm: Option<PathBuf>,
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// A parsed config together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base: PathBuf,
}

/// The plant with the graph data needed by locality masks and integral baselines.
#[derive(Debug, Clone)]
pub struct PlantData {
    pub sys: LinearSystem,
    pub adjacency: Option<Vec<Vec<usize>>>,
    pub actuator_nodes: Option<Vec<usize>>,
}

pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config { path, msg: e.into_inner().to_string() }
    })?;
    if cfg.schema != SCHEMA_VERSION {
        return Err(CliError::Config {
            path: "schema".into(),
            msg: format!("unsupported schema {} (expected {SCHEMA_VERSION})", cfg.schema),
        });
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    let config = parse_config(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = LoadedConfig { config, base };
    loaded.check_files()?;
    Ok(loaded)
}

fn dense(rows: &[Vec<f64>], field: &str) -> CliResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Config { path: field.into(), msg: "expected a non-empty rectangular matrix".into() });
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn weight(spec: &WeightSpec, dim: usize, field: &str) -> CliResult<DMatrix<f64>> {
    match spec {
        WeightSpec::Scaled(s) => Ok(DMatrix::identity(dim, dim) * *s),
        WeightSpec::Matrix(rows) => dense(rows, field),
    }
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn check_files(&self) -> CliResult<()> {
        if let PlantSpec::File { path } = &self.config.plant {
            let p = self.resolve(path);
            if !p.is_file() {
                return Err(CliError::Config { path: "plant.path".into(), msg: format!("{} does not exist", p.display()) });
            }
        }
        Ok(())
    }

    pub fn synthesis(&self) -> CliResult<&SynthesisBlock> {
        self.config
            .synthesis
            .as_ref()
            .ok_or_else(|| CliError::Config { path: "synthesis".into(), msg: "this command needs a synthesis block".into() })
    }

    pub fn simulation(&self) -> CliResult<&SimulationBlock> {
        self.config
            .simulation
            .as_ref()
            .ok_or_else(|| CliError::Config { path: "simulation".into(), msg: "this command needs a simulation block".into() })
    }

    pub fn plant(&self) -> CliResult<PlantData> {
        match &self.config.plant {
            PlantSpec::Explicit { a, b, adjacency, actuator_nodes } => Ok(PlantData {
                sys: LinearSystem::new(dense(a, "plant.a")?, dense(b, "plant.b")?)?,
                adjacency: adjacency.clone(),
                actuator_nodes: actuator_nodes.clone(),
            }),
            PlantSpec::File { path } => {
                let p = self.resolve(path);
                let text = std::fs::read_to_string(&p).map_err(|e| CliError::Io { path: p.clone(), source: e })?;
                let m: MatrixFile = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config { path: "plant.path".into(), msg: format!("{}: {e}", p.display()) })?;
                Ok(PlantData {
                    sys: LinearSystem::new(dense(&m.a, "plant.a")?, dense(&m.b, "plant.b")?)?,
                    adjacency: None,
                    actuator_nodes: None,
                })
            }
            PlantSpec::Chain { nodes, coupling, actuator_nodes } => {
                let chain = make_chain_plant(*nodes, *coupling, actuator_nodes.clone())?;
                Ok(PlantData { sys: chain.sys, adjacency: Some(chain.adjacency), actuator_nodes: Some(chain.actuator_nodes) })
            }
        }
    }

    /// Synthesis inputs, the zone radii and the projection.
    pub fn setup(&self, plant: &PlantData, tol: Option<f64>) -> CliResult<(SynthesisSetup, Vec<f64>, ProjectionKind)> {
        let s = self.synthesis()?;
        let (n, m) = (plant.sys.n(), plant.sys.m());
        let eta_max = s.distribution.eta_max();
        let safety = match &s.safety {
            Some(b) => SafetySpec::new(b.x_max.unwrap_or(f64::INFINITY), b.u_max.unwrap_or(f64::INFINITY), eta_max)?,
            None => SafetySpec::unconstrained(eta_max),
        };
        let mut setup = SynthesisSetup::new(
            plant.sys.clone(),
            weight(&s.q, n, "synthesis.q")?,
            weight(&s.p, m, "synthesis.p")?,
            s.horizon,
            s.distribution.clone(),
            safety,
        );
        if let Some(c) = s.closure {
            setup.closure = c;
        }
        if let Some(l) = &s.locality {
            setup.mask = Some(self.mask(plant, l, s.horizon)?);
        }
        for (i, ib) in s.integral.iter().enumerate() {
            let columns = match &ib.columns {
                ColumnSpec::List(c) => c.clone(),
                ColumnSpec::Named(name) if name == "actuators" => plant.actuator_nodes.clone().ok_or_else(|| CliError::Config {
                    path: format!("synthesis.integral[{i}].columns"),
                    msg: "\"actuators\" needs a plant with actuator nodes".into(),
                })?,
                ColumnSpec::Named(other) => {
                    return Err(CliError::Config {
                        path: format!("synthesis.integral[{i}].columns"),
                        msg: format!("unknown column set {other:?}"),
                    })
                }
            };
            setup.integral.push(IntegralConstraint { zone: ib.zone, columns });
        }
        if let Some(sb) = &s.solver {
            if let Some(e) = sb.eps {
                setup.qp.eps_prim = e;
                setup.qp.eps_dual = e;
            }
            if let Some(it) = sb.max_iter {
                setup.qp.max_iter = it;
            }
            if let Some(k) = sb.scaling_iters {
                setup.qp.scaling_iters = k;
            }
        }
        if let Some(t) = s.feas_tol {
            setup.feas_tol = t;
        }
        if let Some(t) = tol {
            setup.qp.eps_prim = t;
            setup.qp.eps_dual = t;
        }
        Ok((setup, s.radii.clone(), s.projection))
    }

    pub fn locality_params(&self, plant: &PlantData, l: &LocalityBlock) -> CliResult<LocalityParams> {
        let missing = |what: &str| CliError::Config { path: "synthesis.locality".into(), msg: format!("locality masks need plant {what}") };
        Ok(LocalityParams {
            adjacency: plant.adjacency.clone().ok_or_else(|| missing("adjacency"))?,
            locality_d: l.d,
            comm_delay: l.comm_delay,
            act_delay: l.act_delay,
            actuator_nodes: plant.actuator_nodes.clone().ok_or_else(|| missing("actuator_nodes"))?,
        })
    }

    pub fn mask(&self, plant: &PlantData, l: &LocalityBlock, horizon: usize) -> CliResult<LocalityMask> {
        Ok(build_locality_mask(&self.locality_params(plant, l)?, horizon)?)
    }

    /// CLM file for `simulate`: the explicit override, then `simulation.clm`, then `output.clm`.
    pub fn clm_path(&self, explicit: Option<&Path>) -> Option<PathBuf> {
        if let Some(p) = explicit {
            return Some(p.to_path_buf());
        }
        let sim = self.config.simulation.as_ref().and_then(|s| s.clm.as_ref());
        sim.or(self.config.output.clm.as_ref()).map(|p| self.resolve(p))
    }
}
