//! The JSON experiment configuration: explicit tensors as nested arrays,
//! alphabets as label lists, function classes as tagged unions, and a
//! versioned `schema` field.

use crate::CliError;
use seqcoord_core::prob::{Alphabet, DirectedKernel, MarkovKernel, SourceLaw};
use seqcoord_core::seminorm::{FunctionClass, MetricMatrix};
use seqcoord_core::sim::{EntropyMode, ExperimentConfig};
use seqcoord_core::solver::{PeakGrid, RdInstance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    pub state_labels: Vec<String>,
    pub action_labels: Vec<String>,
    pub horizon: usize,
    /// factor t conditions on the t-1 earlier states: |X|^(t-1) rows
    pub source_factors: Vec<Vec<Vec<f64>>>,
    /// factor t conditions on (x_[t], u_[t-1]): |X|^t * |U|^(t-1) rows
    pub policy_factors: Vec<Vec<Vec<f64>>>,
    pub function_class: ClassSpec,
    pub delta: f64,
    #[serde(default)]
    pub n_ladder: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub entropy_mode: EntropyModeSpec,
    /// SNR values for the AWGN capacity rows of `bounds`.
    #[serde(default)]
    pub awgn_snr: Vec<f64>,
    /// Action-space metric for the test-channel bound of `bounds` (T=1).
    #[serde(default)]
    pub action_metric: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub peak_grid: Option<PeakGridSpec>,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_trials() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassSpec {
    TotalVariation,
    FiniteTable { tables: Vec<Vec<f64>> },
    CostLevelSets { costs: Vec<f64> },
    BoundedLipschitz { metric: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EntropyModeSpec {
    Exact,
    #[default]
    Plugin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakGridSpec {
    pub inputs: usize,
    pub quad_step: f64,
    pub quad_pad: f64,
}

/// Everything the commands need, converted to core types.
#[derive(Debug)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub instance: RdInstance,
    pub state_alphabet: Alphabet,
    pub action_alphabet: Alphabet,
    pub action_metric: Option<MetricMatrix>,
    pub peak_grid: PeakGrid,
    pub config_hash: String,
}

impl LoadedConfig {
    pub fn experiment(&self, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
        if self.file.n_ladder.is_empty() {
            return Err(CliError::Config(
                "field `n_ladder` must be a nonempty increasing list for simulate".into(),
            ));
        }
        Ok(ExperimentConfig {
            instance: self.instance.clone(),
            n_ladder: self.file.n_ladder.clone(),
            epsilon: self.file.epsilon,
            trials: self.file.trials,
            seed: seed_override.unwrap_or(self.file.seed),
            entropy_mode: match self.file.entropy_mode {
                EntropyModeSpec::Exact => EntropyMode::Exact,
                EntropyModeSpec::Plugin => EntropyMode::Plugin,
            },
        })
    }
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, CliError> {
    let file: ConfigFile = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("config does not parse: {e}")))?;
    load(file)
}

pub fn load(file: ConfigFile) -> Result<LoadedConfig, CliError> {
    if file.schema != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "field `schema`: version {} unsupported (expected {SCHEMA_VERSION})",
            file.schema
        )));
    }
    let bad = |field: &str, e: seqcoord_core::CoordError| {
        CliError::Config(format!("field `{field}`: {e}"))
    };
    let state_alphabet =
        Alphabet::new(file.state_labels.clone()).map_err(|e| bad("state_labels", e))?;
    let action_alphabet =
        Alphabet::new(file.action_labels.clone()).map_err(|e| bad("action_labels", e))?;
    if file.horizon == 0 {
        return Err(CliError::Config("field `horizon`: must be >= 1".into()));
    }
    if file.source_factors.len() != file.horizon {
        return Err(CliError::Config(format!(
            "field `source_factors`: {} factors for horizon {}",
            file.source_factors.len(),
            file.horizon
        )));
    }
    if file.policy_factors.len() != file.horizon {
        return Err(CliError::Config(format!(
            "field `policy_factors`: {} factors for horizon {}",
            file.policy_factors.len(),
            file.horizon
        )));
    }
    let source_factors: Vec<MarkovKernel> = file
        .source_factors
        .iter()
        .map(|rows| MarkovKernel::from_rows(rows.clone()))
        .collect::<Result<_, _>>()
        .map_err(|e| bad("source_factors", e))?;
    let source = SourceLaw::new(state_alphabet.size(), source_factors)
        .map_err(|e| bad("source_factors", e))?;
    let policy_factors: Vec<MarkovKernel> = file
        .policy_factors
        .iter()
        .map(|rows| MarkovKernel::from_rows(rows.clone()))
        .collect::<Result<_, _>>()
        .map_err(|e| bad("policy_factors", e))?;
    let target = DirectedKernel::new(state_alphabet.size(), action_alphabet.size(), policy_factors)
        .map_err(|e| bad("policy_factors", e))?;
    let class = match &file.function_class {
        ClassSpec::TotalVariation => FunctionClass::TotalVariation,
        ClassSpec::FiniteTable { tables } => FunctionClass::finite_table(tables.clone())
            .map_err(|e| bad("function_class.tables", e))?,
        ClassSpec::CostLevelSets { costs } => FunctionClass::cost_level_sets(costs.clone())
            .map_err(|e| bad("function_class.costs", e))?,
        ClassSpec::BoundedLipschitz { metric } => {
            let n = metric.len();
            let flat: Vec<f64> = metric.iter().flatten().cloned().collect();
            FunctionClass::BoundedLipschitz(
                MetricMatrix::new(n, flat).map_err(|e| bad("function_class.metric", e))?,
            )
        }
    };
    let instance = RdInstance::new(source, target, class, file.delta)
        .map_err(|e| bad("delta", e))?;
    let action_metric = match &file.action_metric {
        None => None,
        Some(rows) => {
            let n = rows.len();
            let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
            Some(MetricMatrix::new(n, flat).map_err(|e| bad("action_metric", e))?)
        }
    };
    let peak_grid = match &file.peak_grid {
        None => PeakGrid::default(),
        Some(g) => PeakGrid {
            inputs: g.inputs,
            quad_step: g.quad_step,
            quad_pad: g.quad_pad,
        },
    };
    let config_hash = hash_config(&file)?;
    Ok(LoadedConfig {
        file,
        instance,
        state_alphabet,
        action_alphabet,
        action_metric,
        peak_grid,
        config_hash,
    })
}

/// Content hash of the parsed config: stable across re-serialization of
/// equal configs because it hashes the canonical serialized form.
pub fn hash_config(file: &ConfigFile) -> Result<String, CliError> {
    let canonical = serde_json::to_string(file)
        .map_err(|e| CliError::Config(format!("config cannot re-serialize: {e}")))?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
