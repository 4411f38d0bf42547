//! JSON run configuration.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::continuous::StepOptions;
use crate::counting_stats::QuadratureOptions;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::model::{InitialState, PhotonProfile, SystemModel};

/// A complex number written as `[re, im]`.
pub type ComplexPair = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    DiscreteCounting,
    DiscreteHomodyne,
    Jump,
    Diffusive,
    Master,
    CountingStats,
    Convergence,
    Oracle,
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| std::fmt::Error)?;
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Pure(Vec<ComplexPair>),
    Mixed(Vec<Vec<ComplexPair>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dimension: usize,
    pub hamiltonian: Vec<Vec<ComplexPair>>,
    pub coupling: Vec<Vec<ComplexPair>>,
    pub initial_state: InitialSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    MatchedExponential { gamma: f64 },
    ConstantWindow { t0: f64, t1: f64 },
    Gaussian { t0: f64, sigma: f64 },
    Vacuum,
    Tabulated { dt: f64, samples: Vec<ComplexPair> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub tau: f64,
    pub horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Continuum {
    pub dt: f64,
    pub t_end: f64,
    /// Record every `stride` steps.
    #[serde(default = "one")]
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingStatsSpec {
    pub times: Vec<f64>,
    #[serde(default = "default_intervals")]
    pub intervals: usize,
    #[serde(default = "default_intervals_2d")]
    pub intervals_2d: usize,
    /// Nodes of an optional `p_0^t(t1)` scan at the last time.
    #[serde(default)]
    pub scan_intervals: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub tau0: f64,
    #[serde(default = "four")]
    pub levels: usize,
    pub times: Vec<f64>,
    #[serde(default = "default_reference_dt")]
    pub reference_dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub gamma: f64,
    pub times: Vec<f64>,
}

fn one() -> usize {
    1
}
fn four() -> usize {
    4
}
fn default_intervals() -> usize {
    QuadratureOptions::default().intervals
}
fn default_intervals_2d() -> usize {
    QuadratureOptions::default().intervals_2d
}
fn default_reference_dt() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub discretization: Option<Discretization>,
    #[serde(default)]
    pub continuum: Option<Continuum>,
    #[serde(default)]
    pub counting_stats: Option<CountingStatsSpec>,
    #[serde(default)]
    pub convergence: Option<ConvergenceSpec>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default = "one")]
    pub trajectories: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub renormalize: bool,
    #[serde(default)]
    pub allow_unnormalized_profile: bool,
}

fn complex(p: &ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn matrix(rows: &[Vec<ComplexPair>], d: usize, field: &str) -> Result<CMat> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("`{field}` must be a {d}×{d} matrix of [re, im] pairs")));
    }
    Ok(CMat::from_fn(d, d, |i, j| complex(&rows[i][j])))
}

fn positive(v: f64, field: &str) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Config(format!("`{field}` must be positive, got {v}")));
    }
    Ok(())
}

impl ModelSpec {
    pub fn build(&self) -> Result<SystemModel> {
        let d = self.dimension;
        if d == 0 {
            return Err(Error::Config("`model.dimension` must be at least 1".into()));
        }
        let h = matrix(&self.hamiltonian, d, "model.hamiltonian")?;
        let l = matrix(&self.coupling, d, "model.coupling")?;
        let initial = match &self.initial_state {
            InitialSpec::Pure(v) => {
                if v.len() != d {
                    return Err(Error::Config(format!("`model.initial_state.pure` must have {d} entries")));
                }
                InitialState::Pure(CVec::from_iterator(d, v.iter().map(complex)))
            }
            InitialSpec::Mixed(rows) => InitialState::Mixed(matrix(rows, d, "model.initial_state.mixed")?),
        };
        SystemModel::new(h, l, initial).map_err(|e| Error::Config(format!("model: {e}")))
    }
}

impl ProfileSpec {
    pub fn build(&self) -> Result<PhotonProfile> {
        let p = match self {
            ProfileSpec::MatchedExponential { gamma } => PhotonProfile::matched_exponential(*gamma),
            ProfileSpec::ConstantWindow { t0, t1 } => PhotonProfile::constant_window(*t0, *t1),
            ProfileSpec::Gaussian { t0, sigma } => PhotonProfile::gaussian(*t0, *sigma),
            ProfileSpec::Vacuum => Ok(PhotonProfile::vacuum()),
            ProfileSpec::Tabulated { dt, samples } => PhotonProfile::tabulated(*dt, samples.iter().map(complex).collect()),
        };
        p.map_err(|e| Error::Config(format!("profile: {e}")))
    }
}

impl RunConfig {
    /// Parses a configuration document. Syntax and schema errors carry the
    /// line and column of the problem.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A two-level oracle run with defaults elsewhere.
    pub fn oracle(profile: ProfileSpec, oracle: OracleSpec) -> Self {
        RunConfig {
            experiment: Experiment::Oracle,
            model: None,
            profile,
            discretization: None,
            continuum: None,
            counting_stats: None,
            convergence: None,
            oracle: Some(oracle),
            trajectories: 1,
            seed: 0,
            output_dir: None,
            renormalize: false,
            allow_unnormalized_profile: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn require<'a, T>(&self, v: &'a Option<T>, field: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| {
            Error::Config(format!("missing field `{field}` required by experiment `{}`", self.experiment))
        })
    }

    pub fn model_spec(&self) -> Result<&ModelSpec> {
        self.require(&self.model, "model")
    }

    pub fn discretization(&self) -> Result<&Discretization> {
        self.require(&self.discretization, "discretization")
    }

    pub fn continuum(&self) -> Result<&Continuum> {
        self.require(&self.continuum, "continuum")
    }

    pub fn counting_stats_spec(&self) -> Result<&CountingStatsSpec> {
        self.require(&self.counting_stats, "counting_stats")
    }

    pub fn convergence_spec(&self) -> Result<&ConvergenceSpec> {
        self.require(&self.convergence, "convergence")
    }

    pub fn oracle_spec(&self) -> Result<&OracleSpec> {
        self.require(&self.oracle, "oracle")
    }

    pub fn step_options(&self) -> Result<StepOptions> {
        let c = self.continuum()?;
        let mut o = StepOptions::new(c.t_end, c.dt).with_stride(c.stride);
        o.renormalize = self.renormalize;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        use Experiment::*;
        if self.trajectories == 0 {
            return Err(Error::Config("`trajectories` must be at least 1".into()));
        }
        self.profile.build()?;
        if self.experiment != Oracle {
            self.model_spec()?.build()?;
        }
        match self.experiment {
            DiscreteCounting | DiscreteHomodyne => {
                let d = self.discretization()?;
                positive(d.tau, "discretization.tau")?;
                positive(d.horizon, "discretization.horizon")?;
            }
            Jump | Diffusive | Master => {
                let c = self.continuum()?;
                positive(c.dt, "continuum.dt")?;
                positive(c.t_end, "continuum.t_end")?;
            }
            CountingStats => {
                let s = self.counting_stats_spec()?;
                if s.times.iter().any(|t| !(*t >= 0.0)) {
                    return Err(Error::Config("`counting_stats.times` must be >= 0".into()));
                }
            }
            Convergence => {
                let c = self.convergence_spec()?;
                positive(c.tau0, "convergence.tau0")?;
                positive(c.reference_dt, "convergence.reference_dt")?;
                if c.levels < 2 {
                    return Err(Error::Config("`convergence.levels` must be at least 2".into()));
                }
            }
            Oracle => {
                positive(self.oracle_spec()?.gamma, "oracle.gamma")?;
            }
        }
        Ok(())
    }
}
