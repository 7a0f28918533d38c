use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use subseq::{AlgoMode, EstimationMode, InstanceRecord, ObservationModel};

/// Observation model as written in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Exact,
    Bernoulli,
    BoundedNoise { bound: f64 },
}

impl ModelSpec {
    pub fn model(self) -> ObservationModel {
        match self {
            ModelSpec::Exact => ObservationModel::Exact,
            ModelSpec::Bernoulli => ObservationModel::Bernoulli,
            ModelSpec::BoundedNoise { bound } => ObservationModel::BoundedNoise(bound),
        }
    }
}

/// `exact`, `bernoulli`, or `noise:<b>`.
impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(ModelSpec::Exact),
            "bernoulli" => Ok(ModelSpec::Bernoulli),
            _ => match s.strip_prefix("noise:") {
                Some(b) => b
                    .parse()
                    .map(|bound| ModelSpec::BoundedNoise { bound })
                    .map_err(|_| format!("bad noise bound {b:?}")),
                None => Err(format!("unknown model {s:?} (expected exact, bernoulli or noise:<b>)")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    Full,
    MatchingOnly,
}

impl From<ModeSpec> for AlgoMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Full => AlgoMode::Full,
            ModeSpec::MatchingOnly => AlgoMode::MatchingOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub mode: ModeSpec,
    /// Falls back to the instance's hint, then to the measured value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Results CSV, relative to the config file's directory.
    pub results: PathBuf,
    /// Optional file receiving the summary line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
}

fn default_tolerance() -> f64 {
    0.05
}

fn default_fallback_draws() -> usize {
    200
}

fn default_strict() -> bool {
    true
}

/// Everything one experiment needs; the same file always yields the same
/// results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_strict")]
    pub strict: bool,
    /// Allowed shortfall below the bound.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Random sequences averaged to score a fallback outcome.
    #[serde(default = "default_fallback_draws")]
    pub fallback_draws: usize,
    pub instance: InstanceRecord,
    pub model: ModelSpec,
    pub algorithm: AlgorithmSpec,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.m == 0 {
            bail!(subseq::Error::Config("m must be positive".into()));
        }
        if self.seeds.is_empty() {
            bail!(subseq::Error::Config("seeds must not be empty".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            bail!(subseq::Error::Config(format!("tolerance {} must be nonnegative", self.tolerance)));
        }
        if self.fallback_draws == 0 {
            bail!(subseq::Error::Config("fallback_draws must be positive".into()));
        }
        if let Some(c) = self.algorithm.curvature {
            if !(0.0..=1.0).contains(&c) {
                bail!(subseq::Error::Config(format!("curvature {c} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn estimation(&self) -> EstimationMode {
        if self.strict {
            EstimationMode::Strict
        } else {
            EstimationMode::Lenient
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
m = 1000
seeds = [0, 1]

[instance]
n = 4
k = 2
seed = 3
[instance.family]
kind = "coverage"
universe = 6
density = 0.5

[model]
kind = "bounded-noise"
bound = 0.25

[algorithm]
mode = "full"

[output]
results = "out.csv"
"#;

    #[test]
    fn defaults_and_round_trip() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert!(cfg.strict);
        assert_eq!(cfg.tolerance, 0.05);
        assert_eq!(cfg.fallback_draws, 200);
        assert_eq!(cfg.model, ModelSpec::BoundedNoise { bound: 0.25 });
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), cfg.to_toml());
    }

    #[test]
    fn rejects_zero_samples_and_unknown_fields() {
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("m = 1000", "m = 0")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("extra = 1\n{SAMPLE}")).is_err());
    }

    #[test]
    fn model_strings() {
        assert_eq!("exact".parse::<ModelSpec>().unwrap(), ModelSpec::Exact);
        assert_eq!("noise:0.5".parse::<ModelSpec>().unwrap(), ModelSpec::BoundedNoise { bound: 0.5 });
        assert!("poisson".parse::<ModelSpec>().is_err());
        assert!("noise:x".parse::<ModelSpec>().is_err());
    }
}
