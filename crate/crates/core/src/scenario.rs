//! Scenario files: the mixing law, kernel, evaluator, simulation plan, query
//! battery and tolerances of one verification run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DominatingFunction, InterarrivalKernel, KernelFamily};
use crate::laws::FddEvaluator;
use crate::mixing::{pushforward, MixingLaw, RateLaw, Transform};
use crate::path::FddQuery;
use crate::quadrature::QuadratureSettings;
use crate::sim::{Route, SimulationPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Exponential,
    Erlang,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: FamilyName,
    /// Erlang shape; required for `erlang`, rejected for `exponential`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<u32>,
    pub transform: Transform,
    #[serde(default = "default_dominating")]
    pub dominating: DominatingFunction,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub null_set: Vec<f64>,
}

fn default_dominating() -> DominatingFunction {
    DominatingFunction::Rate
}

impl KernelConfig {
    pub fn build(&self) -> Result<InterarrivalKernel> {
        let family = match (self.family, self.shape) {
            (FamilyName::Exponential, None) => KernelFamily::Exponential,
            (FamilyName::Exponential, Some(_)) => {
                return Err(Error::Config("kernel.shape only applies to the erlang family".into()))
            }
            (FamilyName::Erlang, Some(shape)) => KernelFamily::Erlang { shape },
            (FamilyName::Erlang, None) => return Err(Error::Config("kernel.shape is required for erlang".into())),
        };
        let kernel = InterarrivalKernel::new(family, self.transform, self.dominating).with_null_set(self.null_set.clone());
        kernel.validate()?;
        Ok(kernel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorConfig {
    /// Quadrature of the Poisson fdd against the law of `h(Θ)`.
    Quadrature {
        #[serde(default)]
        settings: QuadratureSettings,
    },
    /// Poisson or Pólya closed form; the law of `h(Θ)` must reduce to a point mass or a Gamma law.
    ClosedForm {},
    None {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub num_paths: u64,
    pub master_seed: u64,
    /// Interarrivals per path fed to the conditional PIT checks.
    #[serde(default = "default_pit_gaps")]
    pub pit_gaps: usize,
}

fn default_pit_gaps() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub times: Vec<f64>,
    /// Increments over consecutive intervals, or cumulative counts where a check says so.
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub s: f64,
    pub t: f64,
    pub k: u64,
    pub n: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Battery {
    /// fdd queries compared against the exact evaluator; counts are increments.
    pub fdd: Vec<QuerySpec>,
    /// Multinomial identity tuples; counts are cumulative.
    pub multinomial: Vec<QuerySpec>,
    pub splitting: Vec<SplitSpec>,
    /// Markov factorization tuples; counts are cumulative.
    pub markov: Vec<QuerySpec>,
    /// Waiting-time bound vectors for the joint interarrival CDF.
    pub huang: Vec<Vec<f64>>,
}

impl Battery {
    pub fn is_empty(&self) -> bool {
        self.fdd.is_empty()
            && self.multinomial.is_empty()
            && self.splitting.is_empty()
            && self.markov.is_empty()
            && self.huang.is_empty()
    }

    pub fn fdd_queries(&self) -> Result<Vec<FddQuery>> {
        self.fdd.iter().map(|q| FddQuery::new(q.times.clone(), q.counts.clone())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Bound on identity residuals of the exact evaluator.
    pub exact: f64,
    /// Monte Carlo z threshold for per-query and Huang comparisons.
    pub z: f64,
    /// Fraction of fdd battery queries that must lie within `z`.
    pub coverage: f64,
    /// Empirical identity residuals: non-control runs need every |z| at most this, controls at least one above.
    pub control_z: f64,
    /// Significance level of the PIT tests.
    pub pit_alpha: f64,
    /// Bound on `max |p_h − h|` over the grid.
    pub remark_tol: f64,
    pub assumption_grid: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { exact: 1e-8, z: 3.0, coverage: 0.95, control_z: 5.0, pit_alpha: 0.01, remark_tol: 1e-6, assumption_grid: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Write the per-path event dump from `simulate`.
    #[serde(default = "default_true")]
    pub paths: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, formats: default_formats(), paths: true }
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv, Format::Text]
}

fn default_true() -> bool {
    true
}

/// A scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// A control scenario is built to violate the mixed Poisson identities.
    #[serde(default)]
    pub control: bool,
    pub mixing: MixingLaw,
    pub kernel: KernelConfig,
    pub evaluator: EvaluatorConfig,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub battery: Battery,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks everything that can be checked without numerics. Parameter errors surface as config errors.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        self.plan().map_err(cfg)?.validate().map_err(cfg)?;
        if self.battery.is_empty() {
            return Err(Error::Config("battery must contain at least one entry".into()));
        }
        let t = &self.tolerances;
        let positive = [t.exact, t.z, t.coverage, t.control_z, t.pit_alpha, t.remark_tol];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) || t.coverage > 1.0 || t.pit_alpha >= 1.0 {
            return Err(Error::Config("tolerances must be positive, with coverage ≤ 1 and pit_alpha < 1".into()));
        }
        if t.assumption_grid < 2 {
            return Err(Error::Config("tolerances.assumption_grid must be at least 2".into()));
        }
        if self.simulation.pit_gaps == 0 {
            return Err(Error::Config("simulation.pit_gaps must be at least 1".into()));
        }
        self.battery.fdd_queries().map_err(cfg)?;
        for q in self.battery.multinomial.iter().chain(&self.battery.markov) {
            FddQuery::from_cumulative(q.times.clone(), &q.counts).map_err(cfg)?;
        }
        for s in &self.battery.splitting {
            if !(s.s > 0.0 && s.s < s.t) || s.k > s.n {
                return Err(Error::Config(format!("splitting tuple {s:?} needs 0 < s < t and k ≤ n")));
            }
        }
        for q in &self.battery.markov {
            if q.times.len() < 2 {
                return Err(Error::Config("markov tuples need at least two times".into()));
            }
        }
        for w in &self.battery.huang {
            if w.is_empty() || w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::Config("huang vectors must be nonempty with positive entries".into()));
            }
            if w.iter().sum::<f64>() > self.simulation.horizon {
                return Err(Error::Config(format!("huang vector {w:?} does not fit in the horizon")));
            }
        }
        let b = &self.battery;
        let last_times = b
            .fdd
            .iter()
            .chain(&b.multinomial)
            .chain(&b.markov)
            .filter_map(|q| q.times.last().copied())
            .chain(b.splitting.iter().map(|s| s.t));
        if let Some(t) = last_times.into_iter().find(|&t| t > self.simulation.horizon) {
            return Err(Error::Config(format!("battery time {t} lies beyond the horizon {}", self.simulation.horizon)));
        }
        if let EvaluatorConfig::Quadrature { settings } = &self.evaluator {
            settings.validate().map_err(cfg)?;
        }
        if self.evaluator != (EvaluatorConfig::None {}) {
            self.fdd_evaluator().map_err(cfg)?;
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<InterarrivalKernel> {
        self.kernel.build()
    }

    pub fn plan(&self) -> Result<SimulationPlan> {
        Ok(SimulationPlan {
            route: Route::Disintegration,
            kernel: self.kernel()?,
            mixing: self.mixing.clone(),
            horizon: self.simulation.horizon,
            num_paths: self.simulation.num_paths,
            master_seed: self.simulation.master_seed,
        })
    }

    /// Law of the rate `h(Θ)` of the mixed Poisson counterpart.
    pub fn rate_law(&self) -> Result<RateLaw> {
        Ok(pushforward(self.mixing.clone(), self.kernel.transform)?.into())
    }

    /// The configured exact evaluator; `None` when the scenario has none.
    pub fn fdd_evaluator(&self) -> Result<Option<FddEvaluator>> {
        match &self.evaluator {
            EvaluatorConfig::None {} => Ok(None),
            EvaluatorConfig::Quadrature { settings } => {
                Ok(Some(FddEvaluator::MppQuadrature { law: self.rate_law()?, settings: *settings }))
            }
            EvaluatorConfig::ClosedForm {} => {
                match pushforward(self.mixing.clone(), self.kernel.transform)?.simplify() {
                    Some(MixingLaw::Degenerate { value }) => Ok(Some(FddEvaluator::Poisson { theta: value })),
                    Some(MixingLaw::Gamma { alpha, beta }) => Ok(Some(FddEvaluator::PolyaClosedForm { alpha, beta })),
                    _ => Err(Error::Config(format!(
                        "no closed form for the rate law {}; use kind = \"quadrature\"",
                        self.rate_law()?.name()
                    ))),
                }
            }
        }
    }

    /// Applies command-line overrides and revalidates.
    pub fn apply_overrides(&mut self, seed: Option<u64>, paths: Option<u64>) -> Result<()> {
        if let Some(seed) = seed {
            self.simulation.master_seed = seed;
        }
        if let Some(paths) = paths {
            self.simulation.num_paths = paths;
        }
        self.validate()
    }
}
