use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use supermult::analysis::WitnessKind;
use supermult::channels::ChannelDescriptor;
use supermult::optimize::OptimizerConfig;

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "SUPERMULT_SEED";

/// A Schatten exponent `p > 1` or `p = inf`. In JSON it is a number, or the
/// string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self, String> {
        if p > 1.0 {
            Ok(Exponent(p))
        } else {
            Err(format!("exponent must be > 1 or inf, got {p}"))
        }
    }
}

impl FromStr for Exponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(Exponent(f64::INFINITY)),
            t => Exponent::new(
                t.parse()
                    .map_err(|_| format!("cannot parse exponent '{s}'"))?,
            ),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(p) => Exponent::new(p),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Pair {
    /// `N ⊗ N`.
    Same,
    /// `N ⊗ N̄`.
    Conjugate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// One JSON object per line, appended.
    #[default]
    Json,
    /// Header plus one row per table entry.
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub channel: ChannelDescriptor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentParams {
    pub channel: ChannelDescriptor,
    pub p: Vec<Exponent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViolationParams {
    pub channel: ChannelDescriptor,
    pub pair: Pair,
    pub p: Exponent,
    pub witness: WitnessKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverParams {
    pub p: Vec<Exponent>,
    pub eps: f64,
}

fn default_wh_dim() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub p_grid: Vec<f64>,
    #[serde(default = "default_wh_dim")]
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    pub dims: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub p: Option<Exponent>,
}

/// One experiment: the command name and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    NuP(ExponentParams),
    CertifyEps(ChannelParams),
    Lemma1(ExponentParams),
    Lemma2Check(ExponentParams),
    Violation(ViolationParams),
    Crossover(CrossoverParams),
    SweepWh(SweepParams),
    Scaling(ScalingParams),
    RankCheck(ChannelParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::NuP(_) => "nu-p",
            Experiment::CertifyEps(_) => "certify-eps",
            Experiment::Lemma1(_) => "lemma1",
            Experiment::Lemma2Check(_) => "lemma2-check",
            Experiment::Violation(_) => "violation",
            Experiment::Crossover(_) => "crossover",
            Experiment::SweepWh(_) => "sweep-wh",
            Experiment::Scaling(_) => "scaling",
            Experiment::RankCheck(_) => "rank-check",
        }
    }

    fn channel_mut(&mut self) -> Option<&mut ChannelDescriptor> {
        match self {
            Experiment::NuP(x) | Experiment::Lemma1(x) | Experiment::Lemma2Check(x) => {
                Some(&mut x.channel)
            }
            Experiment::CertifyEps(x) | Experiment::RankCheck(x) => Some(&mut x.channel),
            Experiment::Violation(x) => Some(&mut x.channel),
            Experiment::Crossover(_) | Experiment::SweepWh(_) | Experiment::Scaling(_) => None,
        }
    }

    fn check(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        match self {
            Experiment::NuP(x) | Experiment::Lemma1(x) | Experiment::Lemma2Check(x)
                if x.p.is_empty() =>
            {
                bad("at least one exponent is required".into())
            }
            Experiment::Crossover(x) if x.p.is_empty() => {
                bad("at least one exponent is required".into())
            }
            Experiment::SweepWh(x) => {
                if x.p_grid.is_empty() {
                    return bad("p grid is empty".into());
                }
                if let Some(p) = x.p_grid.iter().find(|p| !(p.is_finite() && **p > 1.0)) {
                    return bad(format!("grid values must be finite and > 1, got {p}"));
                }
                if x.p_grid.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("p grid must be strictly ascending".into());
                }
                if x.d < 2 {
                    return bad(format!(
                        "Werner-Holevo dimension must be at least 2, got {}",
                        x.d
                    ));
                }
                Ok(())
            }
            Experiment::Scaling(x)
                if x.dims.is_empty() || x.multipliers.is_empty() || x.seeds.is_empty() =>
            {
                bad("dims, multipliers and seeds must be nonempty".into())
            }
            _ => Ok(()),
        }
    }
}

/// A fully specified run. This is what `run --config` reads and what every
/// report echoes back as its inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl ExperimentConfig {
    /// Validates the parameters and gives seedless Haar channels the optimizer seed.
    pub fn resolved(mut self) -> CliResult<Self> {
        self.optimizer.validate()?;
        self.experiment.check()?;
        let seed = self.optimizer.seed;
        if let Some(c) = self.experiment.channel_mut() {
            *c = c.clone().with_default_seed(seed);
        }
        Ok(self)
    }
}

/// Where and how the report goes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputOptions {
    /// `None` writes to stdout.
    pub path: Option<PathBuf>,
    pub format: Format,
}

const CONFIG_KEYS: [&str; 5] = ["command", "params", "optimizer", "output", "format"];

pub fn seed_from_env() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| {
            CliError::Config(format!("{SEED_ENV} must be an unsigned integer, got '{s}'"))
        }),
        Err(_) => Ok(None),
    }
}

/// Parses a JSON config file. A missing optimizer seed falls back to
/// `SUPERMULT_SEED`, then to 0.
pub fn parse_config(text: &str) -> CliResult<(ExperimentConfig, OutputOptions)> {
    let invalid = |e: serde_json::Error| CliError::Config(format!("invalid config: {e}"));
    let mut value: Value = serde_json::from_str(text).map_err(invalid)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
    if let Some(k) = obj.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(CliError::Config(format!("unknown config key '{k}'")));
    }
    let output = OutputOptions {
        path: obj
            .remove("output")
            .map(|v| serde_json::from_value::<Option<PathBuf>>(v).map_err(invalid))
            .transpose()?
            .flatten(),
        format: obj
            .remove("format")
            .map(|v| serde_json::from_value(v).map_err(invalid))
            .transpose()?
            .unwrap_or_default(),
    };
    let optimizer = obj
        .entry("optimizer")
        .or_insert_with(|| Value::Object(Default::default()));
    if let Some(o) = optimizer.as_object_mut() {
        if !o.contains_key("seed") {
            if let Some(seed) = seed_from_env()? {
                o.insert("seed".into(), seed.into());
            }
        }
    }
    let config: ExperimentConfig = serde_json::from_value(value).map_err(invalid)?;
    Ok((config, output))
}

pub fn load_config(path: &Path) -> CliResult<(ExperimentConfig, OutputOptions)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}
