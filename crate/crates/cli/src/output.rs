//! Result persistence: run manifests, solution and experiment JSON, the
//! fixed-column CSV, and the codebook tree format.

use crate::CliError;
use seqcoord_core::prob::Alphabet;
use seqcoord_core::sim::{EntropyMode, ExperimentResult};
use seqcoord_core::solver::RdSolution;
use seqcoord_core::tree::TreeCodebook;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs;
use std::path::Path;

/// Provenance attached to every written result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub started_utc: String,
    pub finished_utc: String,
}

impl RunManifest {
    pub fn begin(config_hash: &str, seed: u64) -> Self {
        RunManifest {
            config_hash: config_hash.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_utc: chrono::Utc::now().to_rfc3339(),
            finished_utc: String::new(),
        }
    }

    pub fn finish(mut self) -> Self {
        self.finished_utc = chrono::Utc::now().to_rfc3339();
        self
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() && !parent.exists() {
            return Err(CliError::Io(format!(
                "output directory {} does not exist",
                parent.display()
            )));
        }
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

pub fn solution_json(sol: &RdSolution, manifest: &RunManifest) -> Value {
    let factors: Vec<Vec<Vec<f64>>> = (1..=sol.policy.horizon())
        .map(|t| {
            let f = sol.policy.factor(t);
            (0..f.inputs()).map(|r| f.row(r).to_vec()).collect()
        })
        .collect();
    json!({
        "schema": 1,
        "manifest": manifest,
        "rate": sol.rate,
        "achieved_constraint": sol.achieved_constraint,
        "iterations": sol.report.iterations,
        "residual": sol.report.residual,
        "lower_bound": sol.report.lower_bound,
        "multiplier": sol.report.multiplier,
        "policy_factors": factors,
    })
}

pub fn mode_name(mode: EntropyMode) -> &'static str {
    match mode {
        EntropyMode::Exact => "exact",
        EntropyMode::Plugin => "plugin",
    }
}

pub fn experiment_json(result: &ExperimentResult, manifest: &RunManifest) -> Value {
    let records: Vec<Value> = result
        .records
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "trials": r.trials,
                "distortion_mean": r.distortion_mean,
                "distortion_se": r.distortion_se,
                "entropy_norm": r.entropy_norm,
                "entropy_mode": mode_name(r.entropy_mode),
                "entropy_cap": r.entropy_cap,
                "branch_counts": r.branch_counts,
                "branch_saturated": r.branch_saturated,
                "thresholds": r.thresholds,
                "per_step_rates": r.per_step_rates,
                "epsilon_effective": r.epsilon_effective,
                "error_word_frequency": r.error_word_frequency,
                "plugin_bias_note": r.plugin_bias_note,
                "exact_distortion": r.exact_distortion,
            })
        })
        .collect();
    json!({
        "schema": 1,
        "manifest": manifest,
        "rate_reference": result.rate_reference,
        "rate_residual": result.rate_residual,
        "records": records,
    })
}

/// Fixed, documented column set:
/// `N,trials,distortion_mean,distortion_se,entropy_norm,entropy_mode,rate_ref,entropy_cap`.
pub fn experiment_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(
        "N,trials,distortion_mean,distortion_se,entropy_norm,entropy_mode,rate_ref,entropy_cap\n",
    );
    for r in &result.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n,
            r.trials,
            r.distortion_mean,
            r.distortion_se,
            r.entropy_norm,
            mode_name(r.entropy_mode),
            result.rate_reference,
            r.entropy_cap,
        ));
    }
    out
}

/// Codebook tree format: one entry per node, keyed by the slash-joined
/// child-index path (0-based), holding the node's N-tuple of action labels.
pub fn codebook_json(book: &TreeCodebook, actions: &Alphabet) -> Value {
    let mut nodes = serde_json::Map::new();
    for (path, tuple) in book.nodes() {
        let key = path
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("/");
        let labels: Vec<String> = tuple
            .iter()
            .map(|&u| actions.labels()[u].clone())
            .collect();
        nodes.insert(key, json!(labels));
    }
    let error_word: Vec<String> = book
        .error_word()
        .iter()
        .map(|&u| actions.labels()[u].clone())
        .collect();
    json!({
        "schema": 1,
        "block": book.block(),
        "seed": book.seed(),
        "branch_counts": book.branch_counts(),
        "action_labels": actions.labels(),
        "error_word": error_word,
        "nodes": Value::Object(nodes),
    })
}

/// Rebuild a codebook from the tree format (inverse of [`codebook_json`]).
pub fn codebook_from_json(value: &Value) -> Result<TreeCodebook, CliError> {
    let bad = |msg: &str| CliError::Config(format!("codebook json: {msg}"));
    let block = value["block"].as_u64().ok_or_else(|| bad("missing block"))? as usize;
    let seed = value["seed"].as_u64().unwrap_or(0);
    let branch_counts: Vec<usize> = value["branch_counts"]
        .as_array()
        .ok_or_else(|| bad("missing branch_counts"))?
        .iter()
        .map(|v| v.as_u64().map(|x| x as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| bad("bad branch_counts"))?;
    let labels: Vec<String> = value["action_labels"]
        .as_array()
        .ok_or_else(|| bad("missing action_labels"))?
        .iter()
        .map(|v| v.as_str().map(str::to_string))
        .collect::<Option<_>>()
        .ok_or_else(|| bad("bad action_labels"))?;
    let index_of = |label: &str| -> Result<usize, CliError> {
        labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| bad(&format!("unknown action label {label:?}")))
    };
    let nodes = value["nodes"].as_object().ok_or_else(|| bad("missing nodes"))?;
    let horizon = branch_counts.len();
    let mut levels: Vec<Vec<Vec<usize>>> = Vec::with_capacity(horizon);
    let mut width = 1usize;
    let mut paths: Vec<String> = vec![String::new()];
    for &m in &branch_counts {
        width *= m;
        let mut level = Vec::with_capacity(width);
        let mut next_paths = Vec::with_capacity(width);
        for parent in &paths {
            for j in 0..m {
                let key = if parent.is_empty() {
                    j.to_string()
                } else {
                    format!("{parent}/{j}")
                };
                let tuple_labels = nodes
                    .get(&key)
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad(&format!("missing node {key}")))?;
                let tuple: Vec<usize> = tuple_labels
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .ok_or_else(|| bad("tuple entries must be labels"))
                            .and_then(index_of)
                    })
                    .collect::<Result<_, _>>()?;
                level.push(tuple);
                next_paths.push(key);
            }
        }
        levels.push(level);
        paths = next_paths;
    }
    let error_word: Vec<usize> = value["error_word"]
        .as_array()
        .ok_or_else(|| bad("missing error_word"))?
        .iter()
        .map(|v| {
            v.as_str()
                .ok_or_else(|| bad("error word entries must be labels"))
                .and_then(index_of)
        })
        .collect::<Result<_, _>>()?;
    TreeCodebook::from_parts(block, labels.len(), branch_counts, error_word, levels, seed)
        .map_err(|e| bad(&format!("{e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use seqcoord_core::prob::{DirectedKernel, MarkovKernel, SourceLaw};
    use seqcoord_core::tree::sample_codebook;

    #[test]
    fn codebook_round_trips_through_json() {
        let mu = Distribution::new(vec![0.4, 0.6]).unwrap();
        let source = SourceLaw::iid(2, &mu).unwrap();
        let base = MarkovKernel::from_rows(vec![vec![0.7, 0.3], vec![0.1, 0.9]]).unwrap();
        let policy = DirectedKernel::memoryless(2, &base).unwrap();
        let book = sample_codebook(&source, &policy, 3, &[2, 3], 99).unwrap();
        let actions = Alphabet::new(vec!["a".into(), "b".into()]).unwrap();
        let value = codebook_json(&book, &actions);
        let back = codebook_from_json(&value).unwrap();
        assert_eq!(back.block(), book.block());
        assert_eq!(back.branch_counts(), book.branch_counts());
        for (path, tuple) in book.nodes() {
            assert_eq!(back.node(&path).unwrap(), tuple);
        }
    }

    #[test]
    fn csv_has_one_row_per_block_size_plus_header() {
        use seqcoord_core::sim::BlockRecord;
        let policy = DirectedKernel::memoryless(1, &MarkovKernel::identity(2)).unwrap();
        let result = ExperimentResult {
            rate_reference: 0.25,
            rate_residual: 1e-8,
            coding_policy: policy,
            records: vec![BlockRecord {
                n: 8,
                trials: 10,
                distortion_mean: 0.3,
                distortion_se: 0.01,
                entropy_norm: 0.2,
                entropy_mode: EntropyMode::Plugin,
                entropy_cap: 0.4,
                branch_counts: vec![2, 2],
                branch_saturated: false,
                thresholds: vec![0.1, 0.1],
                per_step_rates: vec![0.05, 0.07],
                epsilon_effective: vec![0.1, 0.1],
                error_word_frequency: 0.0,
                plugin_bias_note: Some(0.01),
                exact_distortion: None,
            }],
        };
        let csv = experiment_csv(&result);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("N,trials,distortion_mean"));
        assert!(lines[1].starts_with("8,10,0.3,"));
    }
}
