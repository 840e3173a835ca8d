//! Experiment configuration: a TOML file, optionally overridden from the
//! command line, validated into field-level error messages.

use std::path::{Path, PathBuf};

use pairs_core::models::{
    make_ar1, make_finite_toy, make_iid_toy, make_lv, simulate_lv_data, Ar1Model, Ar1Params, FiniteModel,
    IidToy, LvModel, LvParams, Vec2,
};
use pairs_core::rng::derive_stream;
use pairs_core::FiniteHmmSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable consulted when neither the file nor the command
/// line sets `parallelism`.
pub const PARALLELISM_ENV: &str = "PAIRS_PARALLELISM";

/// Stream used to simulate LV observations when no data file is given.
const LV_DATA_STREAM: u64 = 0xDA7A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Independent filters, one `log Z_n^N` trajectory per replicate.
    Pf,
    /// One Pairs run per replicate, `log Xi_n^(N,M)`.
    Pairs,
    /// `M_tilde` filters per replicate, `log Xi~_n^(N,M_tilde)` and the MC
    /// variance report.
    Mc,
    /// `pairs` and `mc` side by side, plus the optional benchmark.
    Compare,
    /// Statistical checks against the exact oracle (finite models only).
    OracleCheck,
}

impl StrategyKind {
    pub fn uses_pairs(self) -> bool {
        matches!(self, Self::Pairs | Self::Compare | Self::OracleCheck)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pf => "pf",
            Self::Pairs => "pairs",
            Self::Mc => "mc",
            Self::Compare => "compare",
            Self::OracleCheck => "oracle_check",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pf" => Ok(Self::Pf),
            "pairs" => Ok(Self::Pairs),
            "mc" => Ok(Self::Mc),
            "compare" => Ok(Self::Compare),
            "oracle_check" | "oracle-check" => Ok(Self::OracleCheck),
            other => Err(format!(
                "unknown strategy {other:?} (expected pf, pairs, mc, compare or oracle_check)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteConfig {
    pub pi0: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    /// `g[n][x]` for steps `0..=n_max`.
    pub g: Vec<Vec<f64>>,
    /// Defaults to `pi0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    /// One matrix for every step or one per step; defaults to `f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<Vec<f64>>>>,
}

impl FiniteConfig {
    pub fn to_spec(&self) -> pairs_core::Result<FiniteHmmSpec> {
        let spec = FiniteHmmSpec {
            pi0: self.pi0.clone(),
            f: self.f.clone(),
            g: self.g.clone(),
            q0: self.q0.clone().unwrap_or_else(|| self.pi0.clone()),
            q: self.q.clone().unwrap_or_else(|| vec![self.f.clone()]),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<FiniteHmmSpec> for FiniteConfig {
    fn from(spec: FiniteHmmSpec) -> Self {
        Self {
            pi0: spec.pi0,
            f: spec.f,
            g: spec.g,
            q0: Some(spec.q0),
            q: Some(spec.q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LvConfig {
    #[serde(flatten)]
    pub params: LvParams,
    /// CSV with header `n,y1,y2`; simulated from `data_seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Seed for simulated observations; defaults to the root seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Ar1(Ar1Params),
    Lv(LvConfig),
    Finite(FiniteConfig),
    IidToy { g: Vec<f64>, pi0: Vec<f64> },
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::Ar1(Ar1Params::default())
    }
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Ar1(_) => "ar1",
            Self::Lv(_) => "lv",
            Self::Finite(_) => "finite",
            Self::IidToy { .. } => "iid_toy",
        }
    }
}

/// Reference run that the `compare` display is normalized by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Pairs run with this many pairs; emits `log Xi^(N, M')`.
    #[serde(default, alias = "M_prime", skip_serializing_if = "Option::is_none")]
    pub m_prime: Option<usize>,
    /// Filter with this many particles; emits `2 log Z^(N')`.
    #[serde(default, alias = "N_prime", skip_serializing_if = "Option::is_none")]
    pub n_prime: Option<usize>,
}

/// Default benchmark size when a benchmark is requested without a size.
pub const DEFAULT_M_PRIME: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Particles per filter, `N`.
    #[serde(alias = "N")]
    pub n_particles: usize,
    /// Pairs per Pairs run, `M`.
    #[serde(alias = "M")]
    pub n_pairs: usize,
    /// Filters behind each replicate-average estimate; defaults to `M`.
    #[serde(alias = "M_tilde", skip_serializing_if = "Option::is_none")]
    pub m_tilde: Option<usize>,
    /// Last step `n`; every run covers steps `0..=n_steps`.
    pub n_steps: usize,
    pub replicates: usize,
    pub root_seed: u64,
    pub strategy: StrategyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkConfig>,
    /// Output CSV; standard output when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Worker threads; falls back to `PAIRS_PARALLELISM`, then 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            n_particles: 50,
            n_pairs: 1000,
            m_tilde: None,
            n_steps: 100,
            replicates: 20,
            root_seed: 0,
            strategy: StrategyKind::Compare,
            benchmark: None,
            output_path: None,
            parallelism: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative data paths are resolved against the config file.
        if let ModelConfig::Lv(lv) = &mut cfg.model {
            if let (Some(data), Some(dir)) = (&lv.data, path.parent()) {
                if data.is_relative() {
                    lv.data = Some(dir.join(data));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn m_tilde(&self) -> usize {
        self.m_tilde.unwrap_or(self.n_pairs)
    }

    pub fn effective_parallelism(&self) -> usize {
        self.parallelism
            .or_else(|| std::env::var(PARALLELISM_ENV).ok()?.parse().ok())
            .unwrap_or(1)
            .max(1)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        at_least(&mut problems, "n_particles", self.n_particles, 1);
        at_least(&mut problems, "n_pairs", self.n_pairs, 1);
        at_least(&mut problems, "m_tilde", self.m_tilde(), 1);
        at_least(&mut problems, "replicates", self.replicates, 1);
        if self.strategy.uses_pairs() {
            at_least(&mut problems, "n_particles", self.n_particles, 2);
        }
        if matches!(self.strategy, StrategyKind::Mc | StrategyKind::Compare) {
            at_least(&mut problems, "m_tilde", self.m_tilde(), 2);
        }
        if self.strategy == StrategyKind::OracleCheck {
            at_least(&mut problems, "n_pairs", self.n_pairs, 2);
            if !matches!(self.model, ModelConfig::Finite(_) | ModelConfig::IidToy { .. }) {
                problems.push(format!(
                    "strategy: oracle_check needs a finite or iid_toy model, got {}",
                    self.model.kind()
                ));
            }
        }
        if let Some(p) = self.parallelism {
            at_least(&mut problems, "parallelism", p, 1);
        }
        if let Some(b) = &self.benchmark {
            if let Some(m) = b.m_prime {
                at_least(&mut problems, "benchmark.m_prime", m, 1);
            }
            if let Some(n) = b.n_prime {
                at_least(&mut problems, "benchmark.n_prime", n, 1);
            }
            if b.m_prime.is_some() && b.n_prime.is_some() {
                problems.push("benchmark: set at most one of m_prime and n_prime".into());
            }
            if b.n_prime.is_none() {
                at_least(&mut problems, "n_particles", self.n_particles, 2);
            }
        }
        match &self.model {
            ModelConfig::Finite(fc) => {
                if let Err(e) = fc.to_spec() {
                    problems.push(format!("model: {e}"));
                } else if fc.g.len() <= self.n_steps {
                    problems.push(format!(
                        "n_steps: finite model has observations up to step {}, got {}",
                        fc.g.len() - 1,
                        self.n_steps
                    ));
                }
            }
            ModelConfig::IidToy { g, pi0 } => {
                if let Err(e) = make_iid_toy(g.clone(), pi0.clone()) {
                    problems.push(format!("model: {e}"));
                }
            }
            ModelConfig::Ar1(p) => {
                if let Err(e) = make_ar1(*p) {
                    problems.push(format!("model: {e}"));
                }
            }
            ModelConfig::Lv(lv) => {
                if let Err(e) = make_lv(lv.params.clone()) {
                    problems.push(format!("model: {e}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("; ")))
        }
    }

    /// Builds the model, loading or simulating LV observations as needed.
    pub fn build_model(&self) -> Result<BuiltModel, CliError> {
        let config_err = |e: pairs_core::Error| CliError::Config(format!("model: {e}"));
        Ok(match &self.model {
            ModelConfig::Ar1(p) => BuiltModel::Ar1(make_ar1(*p).map_err(config_err)?),
            ModelConfig::Finite(fc) => {
                BuiltModel::Finite(make_finite_toy(fc.to_spec().map_err(config_err)?).map_err(config_err)?)
            }
            ModelConfig::IidToy { g, pi0 } => {
                BuiltModel::Iid(make_iid_toy(g.clone(), pi0.clone()).map_err(config_err)?)
            }
            ModelConfig::Lv(lv) => {
                let mut params = lv.params.clone();
                match &lv.data {
                    Some(path) => params.load_observations(path).map_err(config_err)?,
                    None => {
                        let seed = lv.data_seed.unwrap_or(self.root_seed);
                        params.y_seq =
                            simulate_observations(&params, self.n_steps, seed).map_err(config_err)?;
                    }
                }
                if params.y_seq.len() < self.n_steps {
                    return Err(CliError::Config(format!(
                        "n_steps: LV data has {} observations, got n_steps = {}",
                        params.y_seq.len(),
                        self.n_steps
                    )));
                }
                BuiltModel::Lv(make_lv(params).map_err(config_err)?)
            }
        })
    }

    /// Exact spec for oracle checks; `None` for models without one.
    pub fn finite_spec(&self) -> Option<pairs_core::Result<FiniteHmmSpec>> {
        match &self.model {
            ModelConfig::Finite(fc) => Some(fc.to_spec()),
            ModelConfig::IidToy { g, pi0 } => Some(FiniteHmmSpec::iid(g.clone(), pi0.clone(), self.n_steps)),
            _ => None,
        }
    }
}

fn at_least(problems: &mut Vec<String>, field: &str, value: usize, min: usize) {
    if value < min {
        problems.push(format!("{field}: must be >= {min}, got {value}"));
    }
}

/// LV observations `y_1..y_n` simulated from `seed`; configs without a
/// data file use the same stream.
pub fn simulate_observations(params: &LvParams, n_steps: usize, seed: u64) -> pairs_core::Result<Vec<Vec2>> {
    simulate_lv_data(params, n_steps, &mut derive_stream(seed, LV_DATA_STREAM))
}

pub enum BuiltModel {
    Ar1(Ar1Model),
    Lv(LvModel),
    Finite(FiniteModel),
    Iid(IidToy),
}

/// Evaluates `$body` with `$m` bound to the concrete model.
#[macro_export]
macro_rules! with_model {
    ($built:expr, |$m:ident| $body:expr) => {
        match $built {
            $crate::config::BuiltModel::Ar1($m) => $body,
            $crate::config::BuiltModel::Lv($m) => $body,
            $crate::config::BuiltModel::Finite($m) => $body,
            $crate::config::BuiltModel::Iid($m) => $body,
        }
    };
}
