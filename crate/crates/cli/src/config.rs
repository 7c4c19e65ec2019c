//! Run configuration: a strict JSON document, validated on load.

use std::path::Path;

use nehari_core::energy::Segment;
use nehari_core::{BWeight, Branch, KernelSpec, ProblemParams};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub p: f64,
    pub alpha: f64,
    #[serde(default = "one")]
    pub theta: f64,
    pub beta: f64,
    /// Interior grid nodes.
    pub n: usize,
    pub b: WeightConfig,
    /// Absolute `λ` values.
    #[serde(default)]
    pub lambda: Vec<f64>,
    /// `λ` as multiples of the computed `λ₁`; used when `lambda` is empty.
    #[serde(default)]
    pub lambda_factor: Vec<f64>,
    #[serde(default = "both_branches")]
    pub branches: Vec<BranchName>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub allow_near_lambda1: bool,
    #[serde(default)]
    pub fiber: FiberConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum WeightConfig {
    /// `{"preset": {"name": "pos-core", "params": [0.2]}}`
    Preset { name: String, params: Vec<f64> },
    /// `{"segments": [{"from": -1, "to": 0, "value": 1}, ...]}`
    Segments(Vec<SegmentConfig>),
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub enum BranchName {
    #[serde(rename = "N+")]
    NPlus,
    #[serde(rename = "N-")]
    NMinus,
}

impl From<BranchName> for Branch {
    fn from(b: BranchName) -> Branch {
        match b {
            BranchName::NPlus => Branch::NPlus,
            BranchName::NMinus => Branch::NMinus,
        }
    }
}

/// Function whose fibering map `fiber-dump` tabulates.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum FiberSource {
    #[default]
    Phi1,
    /// Seeded random combination of sine modes.
    Random,
    /// Principal eigenfunction of `{b > 0}`.
    Subdomain,
    /// Explicit nodal values, one per interior node.
    Values(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    #[serde(default)]
    pub source: FiberSource,
    /// Decades of `t` on each side of the center of the grid.
    #[serde(default = "two")]
    pub decades: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig { source: FiberSource::Phi1, decades: 2.0 }
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn both_branches() -> Vec<BranchName> {
    vec![BranchName::NPlus, BranchName::NMinus]
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.params(0.0)?;
        self.weight()?;
        if self.n == 0 {
            return Err(CliError::Config("n must be positive".into()));
        }
        if !self.lambda.is_empty() && !self.lambda_factor.is_empty() {
            return Err(CliError::Config("give either lambda or lambda_factor, not both".into()));
        }
        if self.lambda.iter().chain(&self.lambda_factor).any(|v| !v.is_finite()) {
            return Err(CliError::Config("lambda values must be finite".into()));
        }
        if self.branches.is_empty() {
            return Err(CliError::Config("branches must not be empty".into()));
        }
        if self.tol.is_some_and(|t| !(t > 0.0)) {
            return Err(CliError::Config("tol must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        if !(self.fiber.decades > 0.0) {
            return Err(CliError::Config("fiber.decades must be positive".into()));
        }
        if let FiberSource::Values(v) = &self.fiber.source {
            if v.len() != self.n {
                return Err(CliError::Config(format!("fiber source has {} values for n = {}", v.len(), self.n)));
            }
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<KernelSpec, CliError> {
        KernelSpec::new(self.p, self.alpha, self.theta).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn params(&self, lambda: f64) -> Result<ProblemParams, CliError> {
        ProblemParams::new(self.kernel()?, self.beta, lambda).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn weight(&self) -> Result<BWeight, CliError> {
        let w = match &self.b {
            WeightConfig::Preset { name, params } => BWeight::preset(name, params),
            WeightConfig::Segments(s) => {
                BWeight::segments(s.iter().map(|s| Segment { from: s.from, to: s.to, value: s.value }).collect())
            }
        };
        w.map_err(|e| CliError::Config(e.to_string()))
    }

    /// The `λ` list, resolving factors against `lambda1`.
    pub fn lambdas(&self, lambda1: f64) -> Result<Vec<f64>, CliError> {
        let l: Vec<f64> = if self.lambda.is_empty() {
            self.lambda_factor.iter().map(|f| f * lambda1).collect()
        } else {
            self.lambda.clone()
        };
        if l.is_empty() {
            return Err(CliError::Config("this command needs lambda or lambda_factor".into()));
        }
        Ok(l)
    }

    pub fn branches(&self) -> Vec<Branch> {
        self.branches.iter().map(|&b| b.into()).collect()
    }
}
