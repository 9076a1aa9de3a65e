//! Experiment configuration: TOML schema, validation and construction of
//! core objects.
//!
//! Unknown keys are rejected everywhere. Relative input paths (snapshots,
//! datasets) are resolved against the directory holding the config file.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use mfl_core::dynamics::{Init, RunConfig, TemperatureSchedule};
use mfl_core::functionals::{
    Dataset, KernelMmdObjective, LinearPotentialObjective, Loss, MmdTarget, Objective, PotentialShape,
    TwoLayerNnObjective,
};
use mfl_core::kernel::CosineSeriesKernel;
use mfl_core::oracle::FixedPointConfig;
use mfl_core::snapshot::{load_grid, load_particles};
use mfl_core::{Domain, GridDensity, ParticleEnsemble};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub objective: ObjectiveConfig,
    pub run: Option<RunBlock>,
    pub oracle: Option<OracleBlock>,
    /// Directory of the config file; inputs resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    Kmmd(KmmdConfig),
    Linear(LinearConfig),
    TwoLayerNn(NnConfig),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmmdConfig {
    pub dim: usize,
    #[serde(default = "default_n_freq")]
    pub n_freq: usize,
    #[serde(default = "default_period")]
    pub period: f64,
    pub target: TargetConfig,
}

fn default_n_freq() -> usize {
    5
}

fn default_period() -> f64 {
    2.0 * PI
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    /// `atoms` points drawn uniformly on the torus from `seed`.
    RandomUniform { atoms: usize, seed: u64 },
    Snapshot(PathBuf),
    GridSnapshot(PathBuf),
    /// Mixture of product von Mises bumps sampled on an `n_g` grid.
    VonMises(VonMisesConfig),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VonMisesConfig {
    pub n_g: usize,
    pub kappa: f64,
    pub centers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainTag {
    Torus,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub domain: DomainTag,
    pub dim: usize,
    #[serde(default = "default_period")]
    pub period: f64,
    pub potential: PotentialConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Quadratic { lambda: f64 },
    Cosine { amplitude: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossTag {
    Square,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnConfig {
    pub dataset: PathBuf,
    pub loss: LossTag,
    /// Feature bound `K`.
    pub bound: f64,
    /// Weight decay.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub m: usize,
    pub eta: f64,
    pub steps: u64,
    #[serde(default = "one")]
    pub checkpoint_every: u64,
    pub schedule: TemperatureSchedule,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub wall_clock: bool,
    #[serde(default = "yes")]
    pub snapshots: bool,
    #[serde(default = "yes")]
    pub estimate_entropy: bool,
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitConfig {
    #[default]
    Uniform,
    Gaussian {
        sigma: f64,
    },
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub n_g: usize,
    pub schedule: TemperatureSchedule,
    pub t_end: f64,
    /// Defaults to 90% of the CFL limit.
    pub dt: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default)]
    pub initial: GridInitConfig,
    #[serde(default)]
    pub fixed_point: FixedPointBlock,
    #[serde(default = "yes")]
    pub dump_frames: bool,
}

fn default_record_every() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridInitConfig {
    #[default]
    Uniform,
    /// Density proportional to `1 + amplitude cos(x_0)`.
    Tilted {
        amplitude: f64,
    },
    GridSnapshot(PathBuf),
    VonMises {
        kappa: f64,
        centers: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointBlock {
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_damping() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    20_000
}

impl Default for FixedPointBlock {
    fn default() -> Self {
        Self {
            damping: default_damping(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl From<FixedPointBlock> for FixedPointConfig {
    fn from(b: FixedPointBlock) -> Self {
        FixedPointConfig {
            damping: b.damping,
            tol: b.tol,
            max_iter: b.max_iter,
        }
    }
}

fn config_err(e: mfl_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid `{field}`: {msg}"))
}

/// Parses and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

/// Parses and validates config text; relative paths resolve against the
/// current directory.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.inner();
        let msg = inner.message();
        let key = msg
            .strip_prefix("unknown field `")
            .and_then(|rest| rest.split('`').next())
            .map(|field| if path == "." { field.to_string() } else { format!("{path}.{field}") });
        match key {
            Some(key) => CliError::Config(format!("unknown key `{key}`\n{inner}")),
            None => CliError::Config(format!("at `{path}`: {inner}")),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        if self.run.is_none() && self.oracle.is_none() {
            return Err(CliError::Config("config needs a `run` or an `oracle` block".into()));
        }
        match &self.objective {
            ObjectiveConfig::Kmmd(k) => {
                if k.dim == 0 {
                    return Err(invalid("objective.kmmd.dim", "must be at least 1"));
                }
                if !(k.period > 0.0) {
                    return Err(invalid("objective.kmmd.period", "must be positive"));
                }
                if let TargetConfig::VonMises(v) = &k.target {
                    if v.n_g == 0 || v.centers.is_empty() || v.centers.iter().any(|c| c.len() != k.dim) {
                        return Err(invalid(
                            "objective.kmmd.target.von-mises",
                            "needs n_g >= 1 and centers of length dim",
                        ));
                    }
                }
            }
            ObjectiveConfig::Linear(l) => {
                if l.dim == 0 {
                    return Err(invalid("objective.linear.dim", "must be at least 1"));
                }
            }
            ObjectiveConfig::TwoLayerNn(n) => {
                if !(n.bound > 0.0) {
                    return Err(invalid("objective.two-layer-nn.bound", "must be positive"));
                }
                if !(n.lambda > 0.0) {
                    return Err(invalid("objective.two-layer-nn.lambda", "must be positive"));
                }
            }
        }
        if let Some(r) = &self.run {
            if r.m == 0 {
                return Err(invalid("run.m", "must be at least 1"));
            }
            if !(r.eta > 0.0) || !r.eta.is_finite() {
                return Err(invalid("run.eta", format!("must be positive, got {}", r.eta)));
            }
            if r.checkpoint_every == 0 {
                return Err(invalid("run.checkpoint_every", "must be positive"));
            }
            if r.estimate_entropy && r.m < 2 {
                return Err(invalid("run.m", "entropy estimation needs at least 2 particles"));
            }
            r.schedule.validate().map_err(|e| invalid("run.schedule", e))?;
            if let InitConfig::Gaussian { sigma } = r.init {
                if !(sigma > 0.0) {
                    return Err(invalid("run.init.gaussian.sigma", "must be positive"));
                }
            }
        }
        if let Some(o) = &self.oracle {
            if o.n_g == 0 {
                return Err(invalid("oracle.n_g", "must be at least 1"));
            }
            if !(o.t_end >= 0.0) {
                return Err(invalid("oracle.t_end", "must be nonnegative"));
            }
            if let Some(dt) = o.dt {
                if !(dt > 0.0) {
                    return Err(invalid("oracle.dt", "must be positive"));
                }
            }
            if o.record_every == 0 {
                return Err(invalid("oracle.record_every", "must be positive"));
            }
            o.schedule.validate().map_err(|e| invalid("oracle.schedule", e))?;
            let fp = o.fixed_point;
            if !(fp.damping > 0.0 && fp.damping <= 1.0) {
                return Err(invalid("oracle.fixed_point.damping", "must lie in (0, 1]"));
            }
            if !(fp.tol > 0.0) {
                return Err(invalid("oracle.fixed_point.tol", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        Ok(match &self.objective {
            ObjectiveConfig::Kmmd(k) => Domain::torus(k.dim, k.period).map_err(config_err)?,
            ObjectiveConfig::Linear(l) => match l.domain {
                DomainTag::Torus => Domain::torus(l.dim, l.period).map_err(config_err)?,
                DomainTag::Euclidean => Domain::euclidean(l.dim).map_err(config_err)?,
            },
            ObjectiveConfig::TwoLayerNn(n) => {
                let data = Dataset::load(&self.resolve(&n.dataset)).map_err(config_err)?;
                Domain::euclidean(data.n_in() + 1).map_err(config_err)?
            }
        })
    }

    pub fn build_objective(&self) -> Result<Box<dyn Objective>, CliError> {
        Ok(match &self.objective {
            ObjectiveConfig::Kmmd(k) => {
                let domain = Domain::torus(k.dim, k.period).map_err(config_err)?;
                let kernel = CosineSeriesKernel::new(k.n_freq).with_period(k.period).map_err(config_err)?;
                let target = match &k.target {
                    TargetConfig::RandomUniform { atoms, seed } => {
                        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                        MmdTarget::Atoms(ParticleEnsemble::uniform(domain, *atoms, &mut rng).map_err(config_err)?)
                    }
                    TargetConfig::Snapshot(p) => MmdTarget::Atoms(load_particles(&self.resolve(p)).map_err(config_err)?),
                    TargetConfig::GridSnapshot(p) => MmdTarget::Grid(load_grid(&self.resolve(p)).map_err(config_err)?),
                    TargetConfig::VonMises(v) => MmdTarget::Grid(von_mises_grid(domain, v.n_g, v.kappa, &v.centers)?),
                };
                Box::new(KernelMmdObjective::new(kernel, target).map_err(config_err)?)
            }
            ObjectiveConfig::Linear(l) => {
                let shape = match l.potential {
                    PotentialConfig::Quadratic { lambda } => PotentialShape::Quadratic { lambda },
                    PotentialConfig::Cosine { amplitude } => PotentialShape::Cosine { amplitude },
                    PotentialConfig::Constant { value } => PotentialShape::Constant(value),
                };
                Box::new(LinearPotentialObjective::new(self.domain()?, shape).map_err(config_err)?)
            }
            ObjectiveConfig::TwoLayerNn(n) => {
                let data = Dataset::load(&self.resolve(&n.dataset)).map_err(config_err)?;
                let loss = match n.loss {
                    LossTag::Square => Loss::Square,
                    LossTag::Logistic => Loss::Logistic,
                };
                Box::new(TwoLayerNnObjective::new(data, loss, n.bound, n.lambda).map_err(config_err)?)
            }
        })
    }

    pub fn run_config(&self, seed: u64, schedule: Option<TemperatureSchedule>) -> Result<RunConfig, CliError> {
        let r = self
            .run
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a `run` block".into()))?;
        let init = match &r.init {
            InitConfig::Uniform => Init::Uniform,
            InitConfig::Gaussian { sigma } => Init::Gaussian { sigma: *sigma },
            InitConfig::Snapshot(p) => Init::Ensemble(load_particles(&self.resolve(p)).map_err(config_err)?),
        };
        if matches!(init, Init::Uniform) && !self.domain()?.is_torus() {
            return Err(invalid("run.init", "uniform initialization needs a torus objective"));
        }
        Ok(RunConfig {
            m: r.m,
            eta: r.eta,
            steps: r.steps,
            schedule: schedule.unwrap_or(r.schedule),
            seed,
            init,
            checkpoint_every: r.checkpoint_every,
            wall_clock: r.wall_clock,
            estimate_entropy: r.estimate_entropy,
        })
    }

    pub fn oracle_block(&self) -> Result<&OracleBlock, CliError> {
        self.oracle
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs an `oracle` block".into()))
    }

    pub fn initial_grid(&self) -> Result<GridDensity, CliError> {
        let o = self.oracle_block()?;
        let domain = self.domain()?;
        if !domain.is_torus() {
            return Err(CliError::Config("the grid oracle needs a torus objective".into()));
        }
        Ok(match &o.initial {
            GridInitConfig::Uniform => GridDensity::uniform(domain, o.n_g).map_err(config_err)?,
            GridInitConfig::Tilted { amplitude } => {
                if !(amplitude.abs() < 1.0) {
                    return Err(invalid("oracle.initial.tilted.amplitude", "must lie in (-1, 1)"));
                }
                let omega = 2.0 * PI / domain.period().expect("torus");
                GridDensity::from_density_fn(domain, o.n_g, |x| 1.0 + amplitude * (omega * x[0]).cos()).map_err(config_err)?
            }
            GridInitConfig::GridSnapshot(p) => {
                let g = load_grid(&self.resolve(p)).map_err(config_err)?;
                if g.n() != o.n_g || g.domain() != &domain {
                    return Err(invalid("oracle.initial.grid-snapshot", "grid does not match n_g and the objective's torus"));
                }
                g
            }
            GridInitConfig::VonMises { kappa, centers } => von_mises_grid(domain, o.n_g, *kappa, centers)?,
        })
    }
}

/// Equal mixture of product von Mises densities `prod_i exp(kappa cos(w (x_i - c_i)))`.
pub fn von_mises_grid(domain: Domain, n: usize, kappa: f64, centers: &[Vec<f64>]) -> Result<GridDensity, CliError> {
    let omega = 2.0 * PI / domain.period().expect("torus");
        GridDensity::from_density_fn(domain, n, |x| {
        centers.iter()
            .map(|c| {
                let s: f64 = x.iter().zip(c).map(|(xi, ci)| (omega * (xi - ci)).cos()).sum();
                (kappa * (s - x.len() as f64)).exp()
            })
            .sum()
    })
    .map_err(config_err)
}
