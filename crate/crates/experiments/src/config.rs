//! TOML experiment configuration.
//!
//! Every section and key is optional; omitted values take the desk-scale
//! defaults below. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sirl_core::mcem::McemConfig;
use sirl_core::objectworld::ObjectworldParams;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every other seed is derived from it.
    pub seed: u64,
    pub environment: EnvironmentConfig,
    pub demos: DemoConfig,
    pub features: FeatureConfig,
    pub methods: MethodsConfig,
    pub mcem: McemSection,
    pub robustness: RobustnessConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            environment: EnvironmentConfig::default(),
            demos: DemoConfig::default(),
            features: FeatureConfig::default(),
            methods: MethodsConfig::default(),
            mcem: McemSection::default(),
            robustness: RobustnessConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentConfig {
    pub grid_size: usize,
    pub n_objects: usize,
    pub n_colors: usize,
    pub wind: f64,
    pub discount: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        let p = ObjectworldParams::<f64>::default();
        Self {
            grid_size: p.grid_size,
            n_objects: p.n_objects,
            n_colors: p.n_colors,
            wind: p.wind,
            discount: p.discount,
        }
    }
}

impl EnvironmentConfig {
    pub fn params(&self) -> ObjectworldParams<f64> {
        ObjectworldParams {
            grid_size: self.grid_size,
            n_objects: self.n_objects,
            n_colors: self.n_colors,
            wind: self.wind,
            discount: self.discount,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    pub n_demos: usize,
    pub trajectory_length: usize,
    /// Overrides the seed derived from the master seed.
    pub seed: Option<u64>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            n_demos: 20,
            trajectory_length: 5,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureVariant {
    Continuous,
    #[default]
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub variant: FeatureVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Maxent,
    Sirl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Maxent => "maxent",
            Method::Sirl => "sirl",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "maxent" => Ok(Method::Maxent),
            "sirl" => Ok(Method::Sirl),
            other => Err(CliError::Config(format!(
                "unknown method `{other}` (expected maxent or sirl)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodsConfig {
    pub run: Vec<Method>,
    pub maxent_epochs: usize,
    pub maxent_lr: f64,
    /// Uniform random weight draws averaged into the random baseline.
    pub random_draws: usize,
}

impl Default for MethodsConfig {
    fn default() -> Self {
        Self {
            run: vec![Method::Maxent, Method::Sirl],
            maxent_epochs: 20,
            maxent_lr: 0.01,
            random_draws: 16,
        }
    }
}

/// [`McemConfig`] minus the seed, which is derived per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McemSection {
    pub epsilon_rep: f64,
    pub n0: usize,
    pub growth: f64,
    pub m: usize,
    pub lr: f64,
    pub k: usize,
    pub delta_mcem: f64,
    pub epsilon_mcem: f64,
    pub max_outer_iters: usize,
    pub gmm_max_iter: usize,
    pub gmm_tol: f64,
}

/// Outer-iteration budget used unless `--full-scale` is given.
pub const DESK_MAX_OUTER_ITERS: usize = 10;

impl Default for McemSection {
    fn default() -> Self {
        let c = McemConfig::<f64>::default();
        Self {
            epsilon_rep: c.epsilon_rep,
            n0: c.n0,
            growth: c.growth,
            m: c.m,
            lr: c.lr,
            k: c.k,
            delta_mcem: c.delta_mcem,
            epsilon_mcem: c.epsilon_mcem,
            max_outer_iters: DESK_MAX_OUTER_ITERS,
            gmm_max_iter: c.gmm_max_iter,
            gmm_tol: c.gmm_tol,
        }
    }
}

impl McemSection {
    pub fn to_core(&self, seed: u64) -> McemConfig<f64> {
        McemConfig {
            epsilon_rep: self.epsilon_rep,
            n0: self.n0,
            growth: self.growth,
            m: self.m,
            lr: self.lr,
            k: self.k,
            delta_mcem: self.delta_mcem,
            epsilon_mcem: self.epsilon_mcem,
            max_outer_iters: self.max_outer_iters,
            gmm_max_iter: self.gmm_max_iter,
            gmm_tol: self.gmm_tol,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessConfig {
    pub n: usize,
    pub delta: f64,
    pub epsilon_evd: f64,
    pub max_draws: usize,
    /// Mixture file from an earlier recovery run; trained inline when absent.
    pub gmm_file: Option<PathBuf>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            n: 5,
            delta: 1.0,
            epsilon_evd: 15.0,
            max_draws: 2000,
            gmm_file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    NDemos,
    TrajLen,
    EpsilonRep,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::NDemos => "n_demos",
            Axis::TrajLen => "traj_len",
            Axis::EpsilonRep => "epsilon_rep",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "n_demos" => Ok(Axis::NDemos),
            "traj_len" => Ok(Axis::TrajLen),
            "epsilon_rep" => Ok(Axis::EpsilonRep),
            other => Err(CliError::Config(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axes: Vec<Axis>,
    pub n_demos: Vec<usize>,
    pub traj_len: Vec<usize>,
    pub epsilon_rep: Vec<f64>,
    pub replications: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axes: vec![Axis::NDemos, Axis::EpsilonRep],
            n_demos: vec![40, 80, 160, 320],
            traj_len: vec![1, 2, 4, 8],
            epsilon_rep: vec![0.65, 0.80, 0.95],
            replications: 3,
        }
    }
}

impl SweepConfig {
    pub fn full_scale() -> Self {
        Self {
            axes: vec![Axis::NDemos, Axis::TrajLen, Axis::EpsilonRep],
            n_demos: vec![40, 80, 160, 320, 640, 1280, 2560],
            traj_len: vec![1, 2, 4, 8, 16, 32, 64],
            epsilon_rep: vec![0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95],
            replications: 3,
        }
    }

    /// Axis values as floats, in configured order.
    pub fn values(&self, axis: Axis) -> Vec<f64> {
        match axis {
            Axis::NDemos => self.n_demos.iter().map(|&v| v as f64).collect(),
            Axis::TrajLen => self.traj_len.iter().map(|&v| v as f64).collect(),
            Axis::EpsilonRep => self.epsilon_rep.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// Wide sweep axes and the library's full iteration budget.
    pub fn apply_full_scale(&mut self) {
        let axes = self.sweep.axes.clone();
        self.sweep = SweepConfig {
            axes,
            replications: self.sweep.replications,
            ..SweepConfig::full_scale()
        };
        self.mcem.max_outer_iters = McemConfig::<f64>::default().max_outer_iters;
    }

    pub fn mcem_config(&self, seed: u64) -> McemConfig<f64> {
        self.mcem.to_core(seed)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let env = &self.environment;
        if env.grid_size < 2 {
            return bad(format!(
                "environment.grid_size = {} must be at least 2",
                env.grid_size
            ));
        }
        if env.n_colors < 2 {
            return bad(format!(
                "environment.n_colors = {} must be at least 2",
                env.n_colors
            ));
        }
        if env.n_objects > env.grid_size * env.grid_size {
            return bad(format!(
                "environment.n_objects = {} exceeds the number of cells",
                env.n_objects
            ));
        }
        if !(0.0..=1.0).contains(&env.wind) {
            return bad(format!("environment.wind = {} outside [0, 1]", env.wind));
        }
        if !(env.discount >= 0.0 && env.discount < 1.0) {
            return bad(format!(
                "environment.discount = {} outside [0, 1)",
                env.discount
            ));
        }
        if self.demos.n_demos == 0 || self.demos.trajectory_length == 0 {
            return bad("demos.n_demos and demos.trajectory_length must be positive".into());
        }
        if self.methods.run.is_empty() {
            return bad("methods.run is empty".into());
        }
        if self.methods.random_draws == 0 {
            return bad("methods.random_draws must be positive".into());
        }
        if !(self.methods.maxent_lr >= 0.0) {
            return bad("methods.maxent_lr must be non-negative".into());
        }
        self.mcem_config(0)
            .validate()
            .map_err(|e| CliError::Config(format!("mcem: {e}")))?;
        let r = &self.robustness;
        if !(r.delta >= 0.0) || r.epsilon_evd.is_nan() {
            return bad("robustness.delta must be non-negative and epsilon_evd a number".into());
        }
        let s = &self.sweep;
        if s.replications == 0 {
            return bad("sweep.replications must be positive".into());
        }
        if s.axes.is_empty() {
            return bad("sweep.axes is empty".into());
        }
        for &axis in &s.axes {
            if s.values(axis).is_empty() {
                return bad(format!("sweep.{axis} is empty"));
            }
        }
        if s.n_demos.contains(&0) || s.traj_len.contains(&0) {
            return bad("sweep values for n_demos and traj_len must be positive".into());
        }
        if s.epsilon_rep.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return bad("sweep.epsilon_rep values must lie in (0, 1]".into());
        }
        Ok(())
    }
}
