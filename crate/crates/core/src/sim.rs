//! End-to-end coordination experiments.
//!
//! `run_experiment` solves the rate-distortion problem for the configured
//! instance, builds the achievability construction for the optimizing
//! policy at each block size in the ladder (branch counts and typicality
//! thresholds from `choose_parameters`, clipped at the per-node cap when
//! necessary), runs independent Monte Carlo trials through the greedy
//! assignment, and records achieved distortion against the *target* policy
//! together with the normalized output entropy — exact by enumeration or
//! plug-in from the observed outputs.
//!
//! Trials are embarrassingly parallel: trial k reads the stream keyed by
//! (seed, block size, k), so results are independent of scheduling.

use crate::error::{CoordError, Result};
use crate::index;
use crate::prob::{assemble_strategic_measure, DirectedKernel, Distribution, SourceLaw};
use crate::rng::{stream, StreamDomain};
use crate::seminorm::{seminorm_witness, FunctionClass};
use crate::solver::{solve_rate, RdInstance};
use crate::tree::{
    assign_traced, choose_parameters_capped, empirical_pair_row, exact_code_entropy,
    sample_codebook, MonteCarloEstimate, SequentialCode, TypicalSetSpec, VirtualTreeCode,
    ENTROPY_GUARD, NODE_GUARD,
};
use rayon::prelude::*;
use std::collections::HashMap;

/// How the output entropy of a run is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMode {
    /// Exact enumeration of the output law (guarded).
    Exact,
    /// Plug-in estimate from the observed trial outputs, reported with a
    /// Miller–Madow-style bias note; never silently treated as exact.
    Plugin,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub instance: RdInstance,
    pub n_ladder: Vec<usize>,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub entropy_mode: EntropyMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ladder.is_empty() {
            return Err(CoordError::invalid("block-size ladder must be nonempty"));
        }
        if self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoordError::invalid("block-size ladder must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(CoordError::invalid("trials must be >= 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(CoordError::invalid("epsilon must be > 0"));
        }
        Ok(())
    }
}

/// Per-block-size measurements.
#[derive(Debug, Clone)]
pub struct BlockRecord {
    pub n: usize,
    pub trials: usize,
    /// Monte Carlo mean of the time-averaged seminorm deviation from the
    /// target pair marginals.
    pub distortion_mean: f64,
    pub distortion_se: f64,
    /// H / (N T), by the configured mode.
    pub entropy_norm: f64,
    pub entropy_mode: EntropyMode,
    /// (1/NT) sum_t ln(M_t + 1): the deterministic output-entropy cap.
    pub entropy_cap: f64,
    pub branch_counts: Vec<usize>,
    pub branch_saturated: bool,
    pub thresholds: Vec<f64>,
    pub per_step_rates: Vec<f64>,
    pub epsilon_effective: Vec<f64>,
    /// Fraction of trials that fell back to the error word.
    pub error_word_frequency: f64,
    /// Miller–Madow-style bias magnitude (K-1)/(2 * trials), plugin mode.
    pub plugin_bias_note: Option<f64>,
    /// Exact expected distortion by enumeration, exact mode only.
    pub exact_distortion: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// R_T(Δ) of the configured instance.
    pub rate_reference: f64,
    /// Solver residual attached to the reference.
    pub rate_residual: f64,
    /// The policy the codes were built for (the rate solver's argmin).
    pub coding_policy: DirectedKernel,
    pub records: Vec<BlockRecord>,
}

/// Empirical distribution of state-action pairs at time `t` as a
/// probability vector over X x U (flattened `x * |U| + u`).
pub fn empirical_distribution(
    x_block: &[Vec<usize>],
    u_block: &[Vec<usize>],
    t: usize,
    nx: usize,
    nu: usize,
) -> Result<Distribution> {
    if t == 0 || t > x_block.len() || x_block.len() != u_block.len() {
        return Err(CoordError::dim("time index out of range for the blocks"));
    }
    let pair = empirical_pair_row(&x_block[t - 1], &u_block[t - 1], nx, nu)?;
    Distribution::new(pair)
}

/// Time-averaged seminorm deviation of a realized block from reference
/// pair measures.
fn block_distortion(
    x_block: &[Vec<usize>],
    u_block: &[Vec<usize>],
    references: &[Vec<f64>],
    class: &FunctionClass,
    nx: usize,
    nu: usize,
) -> Result<f64> {
    let horizon = references.len();
    let mut total = 0.0;
    for t0 in 0..horizon {
        let emp = empirical_pair_row(&x_block[t0], &u_block[t0], nx, nu)?;
        let delta: Vec<f64> = emp
            .iter()
            .zip(&references[t0])
            .map(|(a, b)| a - b)
            .collect();
        total += seminorm_witness(&delta, class)?.0;
    }
    Ok(total / horizon as f64)
}

/// Run the full experiment ladder.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let instance = &config.instance;
    let source = instance.source();
    let horizon = source.horizon();
    let (nx, nu) = (source.state_size(), instance.target().action_size());

    // the code is built for the optimizing policy; distortion is measured
    // against the target policy
    let solution = solve_rate(instance)?;
    let coding_policy = &solution.policy;
    let target_measure = assemble_strategic_measure(source, instance.target())?;
    let coding_measure = assemble_strategic_measure(source, coding_policy)?;
    let mut target_pairs = Vec::with_capacity(horizon);
    let mut coding_pairs = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        target_pairs.push(target_measure.pair_marginal(t)?);
        coding_pairs.push(coding_measure.pair_marginal(t)?);
    }

    let mut records = Vec::with_capacity(config.n_ladder.len());
    for &n in &config.n_ladder {
        let params = choose_parameters_capped(
            source,
            coding_policy,
            instance.class(),
            n,
            config.epsilon,
            config.seed,
        )?;
        let specs: Vec<TypicalSetSpec> = (1..=horizon)
            .map(|t| {
                TypicalSetSpec::new(
                    t,
                    params.thresholds[t - 1],
                    instance.class().clone(),
                    coding_pairs[t - 1].clone(),
                    nx,
                    nu,
                )
            })
            .collect::<Result<_>>()?;

        // materialize small trees (needed for exact entropy); fall back to
        // the on-demand sampler otherwise
        let mut total_nodes: u128 = 0;
        let mut width: u128 = 1;
        for &m in &params.branch_counts {
            width = width.saturating_mul(m as u128);
            total_nodes = total_nodes.saturating_add(width);
        }
        let eager = if total_nodes <= NODE_GUARD as u128 {
            Some(sample_codebook(
                source,
                coding_policy,
                n,
                &params.branch_counts,
                config.seed,
            )?)
        } else {
            None
        };
        let lazy = VirtualTreeCode::new(
            source,
            coding_policy,
            n,
            &params.branch_counts,
            config.seed,
        )?;

        // Monte Carlo trials; trial k reads stream (seed, n, k)
        let trial_outcomes: Vec<(f64, bool, Vec<u8>)> = (0..config.trials)
            .into_par_iter()
            .map(|k| -> Result<(f64, bool, Vec<u8>)> {
                let mut rng = stream(config.seed, StreamDomain::Trial, &[n as u32, k as u32]);
                let mut x_block = vec![vec![0usize; n]; horizon];
                for i in 0..n {
                    let traj = source.sample(&mut rng);
                    for t0 in 0..horizon {
                        x_block[t0][i] = traj[t0];
                    }
                }
                let outcome = match &eager {
                    Some(book) => assign_traced(book, &specs, &x_block)?,
                    None => assign_traced(&lazy, &specs, &x_block)?,
                };
                let d = block_distortion(
                    &x_block,
                    &outcome.actions,
                    &target_pairs,
                    instance.class(),
                    nx,
                    nu,
                )?;
                let mut key = Vec::with_capacity(horizon * n);
                for row in &outcome.actions {
                    key.extend(row.iter().map(|&u| u as u8));
                }
                Ok((d, outcome.error_time.is_some(), key))
            })
            .collect::<Result<_>>()?;

        let trials = config.trials as f64;
        let mean = trial_outcomes.iter().map(|o| o.0).sum::<f64>() / trials;
        let var = trial_outcomes
            .iter()
            .map(|o| (o.0 - mean) * (o.0 - mean))
            .sum::<f64>()
            / trials;
        let se = (var / trials).sqrt();
        let error_word_frequency =
            trial_outcomes.iter().filter(|o| o.1).count() as f64 / trials;

        let entropy_cap = params
            .branch_counts
            .iter()
            .map(|&m| ((m + 1) as f64).ln())
            .sum::<f64>()
            / (n as f64 * horizon as f64);

        let (entropy_norm, plugin_bias_note, exact_distortion) = match config.entropy_mode {
            EntropyMode::Exact => {
                let book = eager.as_ref().ok_or_else(|| {
                    CoordError::guard(format!(
                        "exact entropy needs a materialized tree (<= {NODE_GUARD} nodes)"
                    ))
                })?;
                let code = SequentialCode::new(book.clone(), specs.clone())?;
                let h = exact_code_entropy(&code, source, n)?;
                let d = exact_code_distortion(
                    &code,
                    source,
                    &target_pairs,
                    instance.class(),
                )?;
                (h.total / (n as f64 * horizon as f64), None, Some(d))
            }
            EntropyMode::Plugin => {
                let mut counts: HashMap<&[u8], usize> = HashMap::new();
                for (_, _, key) in &trial_outcomes {
                    *counts.entry(key.as_slice()).or_insert(0) += 1;
                }
                let mut h = 0.0;
                for &c in counts.values() {
                    let p = c as f64 / trials;
                    h -= p * p.ln();
                }
                let bias = (counts.len().saturating_sub(1)) as f64 / (2.0 * trials);
                (h / (n as f64 * horizon as f64), Some(bias), None)
            }
        };

        records.push(BlockRecord {
            n,
            trials: config.trials,
            distortion_mean: mean,
            distortion_se: se,
            entropy_norm,
            entropy_mode: config.entropy_mode,
            entropy_cap,
            branch_counts: params.branch_counts.clone(),
            branch_saturated: params.saturated,
            thresholds: params.thresholds.clone(),
            per_step_rates: params.per_step_rates.clone(),
            epsilon_effective: params.epsilon_effective.clone(),
            error_word_frequency,
            plugin_bias_note,
            exact_distortion,
        });
    }
    Ok(ExperimentResult {
        rate_reference: solution.rate,
        rate_residual: solution.report.residual,
        coding_policy: solution.policy,
        records,
    })
}

/// Exact expected distortion of a sequential code by full enumeration of
/// state blocks (deterministic, no Monte Carlo).
pub fn exact_code_distortion(
    code: &SequentialCode,
    source: &SourceLaw,
    target_pairs: &[Vec<f64>],
    class: &FunctionClass,
) -> Result<f64> {
    let horizon = source.horizon();
    let nx = source.state_size();
    let nu = target_pairs[0].len() / nx;
    let n = code.codebook().block();
    let trajectories = index::pow(nx, horizon);
    let blocks = trajectories
        .checked_pow(n as u32)
        .filter(|&b| b <= ENTROPY_GUARD)
        .ok_or_else(|| {
            CoordError::guard(format!(
                "distortion enumeration would exceed {ENTROPY_GUARD} blocks"
            ))
        })?;
    let traj_law = source.trajectory_law();
    let mut x_block = vec![vec![0usize; n]; horizon];
    let mut expected = 0.0;
    for b in 0..blocks {
        let mut prob = 1.0;
        let mut rest = b;
        for i in 0..n {
            let traj = rest % trajectories;
            rest /= trajectories;
            prob *= traj_law[traj];
            for t0 in 0..horizon {
                x_block[t0][i] = index::digit(traj, nx, horizon, t0 + 1);
            }
        }
        if prob == 0.0 {
            continue;
        }
        let u_block = code.run(&x_block)?;
        expected += prob * block_distortion(&x_block, &u_block, target_pairs, class, nx, nu)?;
    }
    Ok(expected)
}

/// One line of the converse report.
#[derive(Debug, Clone)]
pub struct ConverseRecord {
    pub n: usize,
    pub entropy_norm: f64,
    pub exact_distortion: f64,
    /// R_T evaluated at the achieved exact distortion (minus 1e-9).
    pub rate_at_distortion: f64,
    /// entropy_norm - rate_at_distortion; the converse demands >= -1e-6.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct ConverseReport {
    pub records: Vec<ConverseRecord>,
    pub all_passed: bool,
}

/// Converse tolerance: the normalized output entropy may undershoot the
/// rate reference by at most this much before the check fails.
pub const CONVERSE_TOL: f64 = 1e-6;

/// Machine-check of the converse inequality on every exact-mode record:
/// normalized output entropy >= R_T(exact achieved distortion - 1e-9),
/// within [`CONVERSE_TOL`]. Errors out when no exact-mode record is
/// present, or loudly when a record violates the bound — that would
/// falsify the implementation, not the theorem.
pub fn converse_check(result: &ExperimentResult, instance: &RdInstance) -> Result<ConverseReport> {
    let mut records = Vec::new();
    for rec in &result.records {
        let Some(d_exact) = rec.exact_distortion else {
            continue;
        };
        let delta_eval = (d_exact - 1e-9).max(0.0);
        let rate = solve_rate(&instance.with_delta(delta_eval)?)?.rate;
        let margin = rec.entropy_norm - rate;
        records.push(ConverseRecord {
            n: rec.n,
            entropy_norm: rec.entropy_norm,
            exact_distortion: d_exact,
            rate_at_distortion: rate,
            margin,
            passed: margin >= -CONVERSE_TOL,
        });
    }
    if records.is_empty() {
        return Err(CoordError::invalid(
            "converse check needs exact-entropy records",
        ));
    }
    let all_passed = records.iter().all(|r| r.passed);
    if !all_passed {
        let worst = records
            .iter()
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min);
        return Err(CoordError::NumericFailure(format!(
            "converse violated: worst margin {worst} (this falsifies the implementation)"
        )));
    }
    Ok(ConverseReport {
        records,
        all_passed,
    })
}

/// Mean distortion of the target policy executed directly (no coding):
/// the empirical-consistency baseline.
pub fn direct_policy_distortion(
    source: &SourceLaw,
    policy: &DirectedKernel,
    class: &FunctionClass,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if trials == 0 || n == 0 {
        return Err(CoordError::invalid("trials and block size must be >= 1"));
    }
    let measure = assemble_strategic_measure(source, policy)?;
    let horizon = source.horizon();
    let (nx, nu) = (source.state_size(), policy.action_size());
    let mut references = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        references.push(measure.pair_marginal(t)?);
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let mut rng = stream(seed, StreamDomain::Trial, &[n as u32, k as u32]);
            let mut x_rows = vec![vec![0usize; n]; horizon];
            let mut u_rows = vec![vec![0usize; n]; horizon];
            for i in 0..n {
                let xtraj = source.sample(&mut rng);
                let utraj = policy.sample(&xtraj, &mut rng);
                for t0 in 0..horizon {
                    x_rows[t0][i] = xtraj[t0];
                    u_rows[t0][i] = utraj[t0];
                }
            }
            block_distortion(&x_rows, &u_rows, &references, class, nx, nu)
        })
        .collect::<Result<_>>()?;
    let trials_f = trials as f64;
    let mean = values.iter().sum::<f64>() / trials_f;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / trials_f;
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / trials_f).sqrt(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::gen;
    use crate::prob::MarkovKernel;
    use approx::assert_abs_diff_eq;

    fn small_instance(seed: u64, delta: f64) -> RdInstance {
        let mut rng = gen::instance_rng(seed, 3);
        let source = gen::random_source(2, 2, &mut rng);
        let target = gen::random_policy(2, 2, 2, &mut rng);
        RdInstance::new(source, target, FunctionClass::TotalVariation, delta).unwrap()
    }

    #[test]
    fn empirical_distribution_counting() {
        let x = vec![vec![0, 1, 0, 1]];
        let u = vec![vec![1, 1, 0, 0]];
        let d = empirical_distribution(&x, &u, 1, 2, 2).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.25, 0.25, 0.25]);

        // N=1 is a point mass; repeated identical columns match it
        let x1 = vec![vec![1]];
        let u1 = vec![vec![0]];
        let d1 = empirical_distribution(&x1, &u1, 1, 2, 2).unwrap();
        assert_eq!(d1.probs(), &[0.0, 0.0, 1.0, 0.0]);
        let xr = vec![vec![1, 1, 1]];
        let ur = vec![vec![0, 0, 0]];
        let dr = empirical_distribution(&xr, &ur, 1, 2, 2).unwrap();
        assert_eq!(dr.probs(), d1.probs());

        // seeded block against a hand count
        let x = vec![vec![0, 0, 1, 1, 1]];
        let u = vec![vec![0, 1, 1, 1, 0]];
        let d = empirical_distribution(&x, &u, 1, 2, 2).unwrap();
        assert_abs_diff_eq!(d.prob(0), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.prob(1), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.prob(2), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.prob(3), 0.4, epsilon = 1e-15);

        assert!(empirical_distribution(&x, &u, 2, 2, 2).is_err());
    }

    #[test]
    fn state_independent_target_with_zero_budget_runs_at_rate_zero() {
        let mut rng = gen::instance_rng(5, 4);
        let source = gen::random_source(2, 2, &mut rng);
        let q = gen::random_dist(4, &mut rng);
        let target =
            DirectedKernel::state_independent(2, 2, 2, q.probs()).unwrap();
        let instance =
            RdInstance::new(source, target, FunctionClass::TotalVariation, 0.0).unwrap();
        let config = ExperimentConfig {
            instance,
            n_ladder: vec![16],
            epsilon: 0.15,
            trials: 60,
            seed: 11,
            entropy_mode: EntropyMode::Plugin,
        };
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.rate_reference, 0.0);
        // distortion is pure sampling noise around the product reference
        let rec = &result.records[0];
        assert!(rec.distortion_mean < 0.5);
        assert!(rec.entropy_norm <= rec.entropy_cap + 1e-9);
    }

    #[test]
    fn exact_mode_entropy_agrees_with_direct_enumeration() {
        let instance = small_instance(21, 0.25);
        let config = ExperimentConfig {
            instance: instance.clone(),
            n_ladder: vec![2],
            epsilon: 0.3,
            trials: 40,
            seed: 23,
            entropy_mode: EntropyMode::Exact,
        };
        let result = run_experiment(&config).unwrap();
        let rec = &result.records[0];
        assert!(rec.exact_distortion.is_some());
        assert!(rec.entropy_norm <= rec.entropy_cap + 1e-9);
        assert!(rec.distortion_mean >= 0.0 && rec.entropy_norm >= 0.0);
    }

    #[test]
    fn distortion_trend_is_monotone_within_two_se() {
        let instance = small_instance(31, 0.2);
        let config = ExperimentConfig {
            instance,
            n_ladder: vec![8, 32, 128],
            epsilon: 0.1,
            trials: 200,
            seed: 37,
            entropy_mode: EntropyMode::Plugin,
        };
        let result = run_experiment(&config).unwrap();
        let recs = &result.records;
        for w in recs.windows(2) {
            let slack = 2.0 * (w[0].distortion_se + w[1].distortion_se);
            assert!(
                w[1].distortion_mean <= w[0].distortion_mean + slack,
                "distortion rose from N={} ({}) to N={} ({})",
                w[0].n,
                w[0].distortion_mean,
                w[1].n,
                w[1].distortion_mean
            );
        }
    }

    #[test]
    fn converse_holds_on_enumeration_scale_instances() {
        let instance = small_instance(41, 0.15);
        let config = ExperimentConfig {
            instance: instance.clone(),
            n_ladder: vec![2],
            epsilon: 0.4,
            trials: 30,
            seed: 43,
            entropy_mode: EntropyMode::Exact,
        };
        let result = run_experiment(&config).unwrap();
        let report = converse_check(&result, &instance).unwrap();
        assert!(report.all_passed);
        assert_eq!(report.records.len(), 1);
        assert!(report.records[0].margin >= -CONVERSE_TOL);
    }

    #[test]
    fn converse_identity_code_both_sides_are_ln_two() {
        // identity code on a uniform binary source, T=1, N=1: codebook
        // holding both symbols with an accept-iff-equal rule is the
        // bijection x -> x, so the output entropy is ln 2, and R_1(0) of
        // the identity target is ln 2 as well
        let mu = Distribution::new(vec![0.5, 0.5]).unwrap();
        let source = SourceLaw::iid(1, &mu).unwrap();
        let target = DirectedKernel::memoryless(1, &MarkovKernel::identity(2)).unwrap();
        let instance = RdInstance::new(
            source.clone(),
            target.clone(),
            FunctionClass::TotalVariation,
            0.0,
        )
        .unwrap();
        let book = crate::tree::TreeCodebook::from_parts(
            1,
            2,
            vec![2],
            vec![0],
            vec![vec![vec![0], vec![1]]],
            0,
        )
        .unwrap();
        let measure = assemble_strategic_measure(&source, &target).unwrap();
        let off_diagonal = FunctionClass::finite_table(vec![vec![0.0, 1.0, 1.0, 0.0]]).unwrap();
        let spec = TypicalSetSpec::new(
            1,
            0.0,
            off_diagonal,
            measure.pair_marginal(1).unwrap(),
            2,
            2,
        )
        .unwrap();
        let code = SequentialCode::new(book, vec![spec]).unwrap();
        let h = exact_code_entropy(&code, &source, 1).unwrap();
        assert_abs_diff_eq!(h.total, 2.0f64.ln(), epsilon = 1e-12);
        // at N = 1 the realized empirical pair is a point mass, so the
        // exact expected deviation from the diagonal reference is 1
        let d = exact_code_distortion(
            &code,
            &source,
            &[measure.pair_marginal(1).unwrap()],
            &FunctionClass::TotalVariation,
        )
        .unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-12);
        let rate = solve_rate(&instance).unwrap().rate;
        assert_abs_diff_eq!(rate, 2.0f64.ln(), epsilon = 1e-9);
        assert!(h.total >= rate - CONVERSE_TOL);
    }

    #[test]
    fn converse_check_requires_exact_records() {
        let instance = small_instance(51, 0.2);
        let config = ExperimentConfig {
            instance: instance.clone(),
            n_ladder: vec![4],
            epsilon: 0.2,
            trials: 20,
            seed: 53,
            entropy_mode: EntropyMode::Plugin,
        };
        let result = run_experiment(&config).unwrap();
        assert!(converse_check(&result, &instance).is_err());
    }

    #[test]
    fn plugin_entropy_stays_near_exact_on_shared_config() {
        let instance = small_instance(61, 0.25);
        let base = ExperimentConfig {
            instance: instance.clone(),
            n_ladder: vec![2],
            epsilon: 0.3,
            trials: 400,
            seed: 67,
            entropy_mode: EntropyMode::Exact,
        };
        let exact = run_experiment(&base).unwrap().records[0].entropy_norm;
        let plugin_cfg = ExperimentConfig {
            entropy_mode: EntropyMode::Plugin,
            ..base
        };
        let rec = run_experiment(&plugin_cfg).unwrap().records.remove(0);
        let bias = rec.plugin_bias_note.unwrap();
        assert!(
            rec.entropy_norm <= exact + (400.0f64.ln() / 400.0),
            "plugin {} far above exact {}",
            rec.entropy_norm,
            exact
        );
        assert!(bias >= 0.0);
    }

    #[test]
    fn direct_policy_distortion_shrinks_with_block_size() {
        let mut rng = gen::instance_rng(71, 5);
        let source = gen::random_source(2, 2, &mut rng);
        let policy = gen::random_policy(2, 2, 2, &mut rng);
        let mut prev = f64::INFINITY;
        let mut prev_se = 0.0;
        for n in [8, 32, 128] {
            let est = direct_policy_distortion(
                &source,
                &policy,
                &FunctionClass::TotalVariation,
                n,
                200,
                73,
            )
            .unwrap();
            assert!(
                est.mean <= prev + 2.0 * (est.std_error + prev_se),
                "direct distortion rose at N = {n}"
            );
            prev = est.mean;
            prev_se = est.std_error;
        }
        assert!(prev < 0.2, "distortion should be small at N = 128");
    }

    #[test]
    fn config_validation() {
        let instance = small_instance(81, 0.2);
        let mut config = ExperimentConfig {
            instance,
            n_ladder: vec![4, 4],
            epsilon: 0.2,
            trials: 10,
            seed: 1,
            entropy_mode: EntropyMode::Plugin,
        };
        assert!(config.validate().is_err());
        config.n_ladder = vec![4, 8];
        assert!(config.validate().is_ok());
        config.trials = 0;
        assert!(config.validate().is_err());
    }
}
