//! Random tree codes.
//!
//! A codebook is a rooted depth-T tree whose depth-t nodes hold N-tuples of
//! actions drawn, independently across nodes given their parents, from the
//! product kernel `nu_t(du | u_parent) = ⊗_n nu_t(du_n | u_[t-1],n)` built
//! from the action-marginal factors of a strategic measure. Every node
//! tuple comes from the ChaCha stream keyed by the node's path (see
//! [`crate::rng`]), so a fully materialized codebook and the on-demand
//! sampler produce bit-identical tuples: `sample_codebook` walks all paths
//! up front (with strict size guards), while [`VirtualTreeCode`] samples
//! children only when the assignment walk visits them, which is what makes
//! large branch counts affordable.
//!
//! Assignment is the greedy rule: at each time step, scan the children of
//! the current node in index order and move to the first whose tuple keeps
//! the time-t empirical pair distribution within the typicality threshold;
//! emit the reserved error word (first action symbol repeated) when no
//! child qualifies, and keep emitting it from then on.
//!
//! Typicality is measured by `psi = min(1, seminorm / 2)`: seminorms of
//! the supported classes are at most 2, so the halving puts psi in [0, 1].
//! The same scale is used on both sides of every comparison, including the
//! Monte Carlo threshold estimates of `choose_parameters`.

use crate::error::{CoordError, Result};
use crate::index;
use crate::prob::{
    assemble_strategic_measure, directed_information, sample_index, DirectedKernel, MarkovKernel,
    SourceLaw,
};
use crate::rng::{stream, StreamDomain};
use crate::seminorm::{seminorm_witness, FunctionClass};
use std::collections::HashMap;

/// Largest admissible branch count per node.
pub const BRANCH_CAP: usize = 100_000;
/// Largest fully materialized tree.
pub const NODE_GUARD: usize = 1_000_000;
/// Enumeration guard for exact output entropy.
pub const ENTROPY_GUARD: usize = 1_000_000;
/// Reference draws behind each Monte Carlo threshold estimate.
pub const THRESHOLD_DRAWS: usize = 10_000;
/// Smallest admissible typicality threshold.
pub const THRESHOLD_FLOOR: f64 = 1e-6;

/// Acceptance region for one time step: pairs whose empirical distribution
/// deviates from the reference by at most `threshold` on the psi scale.
#[derive(Debug, Clone)]
pub struct TypicalSetSpec {
    t: usize,
    threshold: f64,
    class: FunctionClass,
    /// reference pair measure mu_t ⊗ pi_t over X x U, flattened x * |U| + u
    reference: Vec<f64>,
    nx: usize,
    nu: usize,
}

impl TypicalSetSpec {
    pub fn new(
        t: usize,
        threshold: f64,
        class: FunctionClass,
        reference: Vec<f64>,
        nx: usize,
        nu: usize,
    ) -> Result<Self> {
        if !(threshold >= 0.0) {
            return Err(CoordError::invalid("threshold must be >= 0"));
        }
        if reference.len() != nx * nu {
            return Err(CoordError::dim("reference measure has wrong size"));
        }
        if let Some(cells) = class.cells() {
            if cells != nx * nu {
                return Err(CoordError::dim("class does not match the pair space"));
            }
        }
        Ok(TypicalSetSpec {
            t,
            threshold,
            class,
            reference,
            nx,
            nu,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Deviation of the empirical pair distribution of `(x_row, u_row)`
    /// from the reference, on the psi scale.
    pub fn psi(&self, x_row: &[usize], u_row: &[usize]) -> Result<f64> {
        let emp = empirical_pair_row(x_row, u_row, self.nx, self.nu)?;
        let delta: Vec<f64> = emp
            .iter()
            .zip(&self.reference)
            .map(|(a, b)| a - b)
            .collect();
        let (value, _) = seminorm_witness(&delta, &self.class)?;
        Ok((value / 2.0).clamp(0.0, 1.0))
    }

    fn accepts(&self, x_row: &[usize], u_row: &[usize]) -> Result<bool> {
        Ok(self.psi(x_row, u_row)? <= self.threshold)
    }
}

/// Empirical pair distribution of one time row, over X x U.
pub(crate) fn empirical_pair_row(
    x_row: &[usize],
    u_row: &[usize],
    nx: usize,
    nu: usize,
) -> Result<Vec<f64>> {
    if x_row.len() != u_row.len() || x_row.is_empty() {
        return Err(CoordError::dim("state and action rows must have equal length"));
    }
    let mut emp = vec![0.0; nx * nu];
    let w = 1.0 / x_row.len() as f64;
    for (&x, &u) in x_row.iter().zip(u_row) {
        if x >= nx || u >= nu {
            return Err(CoordError::invalid("symbol out of alphabet range"));
        }
        emp[x * nu + u] += w;
    }
    Ok(emp)
}

/// Node-tuple sampler shared by the eager and lazy trees.
#[derive(Debug, Clone)]
struct TreeSampler {
    seed: u64,
    block: usize,
    action_size: usize,
    /// action-marginal factors nu_t(u_t | u_[t-1])
    factors: Vec<MarkovKernel>,
}

impl TreeSampler {
    fn new(source: &SourceLaw, policy: &DirectedKernel, block: usize, seed: u64) -> Result<Self> {
        if block == 0 {
            return Err(CoordError::invalid("block size must be >= 1"));
        }
        if policy.horizon() > 5 {
            return Err(CoordError::guard("tree depth beyond 5 is unsupported"));
        }
        let measure = assemble_strategic_measure(source, policy)?;
        Ok(TreeSampler {
            seed,
            block,
            action_size: policy.action_size(),
            factors: measure.action_factors(),
        })
    }

    /// Tuple of the child at `path`; `parent_histories[n]` encodes
    /// `u_[t-1],n` in base |U|.
    fn sample_tuple(&self, path: &[u32], parent_histories: &[usize]) -> Vec<usize> {
        let depth = path.len();
        debug_assert!(depth >= 1 && depth <= self.factors.len());
        debug_assert_eq!(parent_histories.len(), self.block);
        let mut rng = stream(self.seed, StreamDomain::CodebookNode, path);
        let factor = &self.factors[depth - 1];
        parent_histories
            .iter()
            .map(|&h| sample_index(factor.row(h), &mut rng))
            .collect()
    }
}

/// Access to the code tree that the assignment walk needs; implemented by
/// the materialized codebook and by the on-demand sampler.
pub trait CodeTree {
    fn horizon(&self) -> usize;
    fn block(&self) -> usize;
    fn action_size(&self) -> usize;
    fn branch_counts(&self) -> &[usize];
    fn error_word(&self) -> &[usize];
    /// Tuple of the child at `path` (0-based indices, depth = path length),
    /// given the per-copy encoded action histories of its parent.
    fn child_tuple(&self, path: &[u32], parent_histories: &[usize]) -> Vec<usize>;
}

/// A fully materialized random tree codebook.
#[derive(Debug, Clone)]
pub struct TreeCodebook {
    horizon: usize,
    block: usize,
    action_size: usize,
    branch_counts: Vec<usize>,
    error_word: Vec<usize>,
    /// levels[t-1] holds the depth-t tuples in breadth-first path order
    levels: Vec<Vec<Vec<usize>>>,
    seed: u64,
}

impl TreeCodebook {
    /// Assemble a codebook from explicit parts (used when loading a
    /// serialized tree); `levels[t-1]` must hold the depth-t tuples in
    /// breadth-first path order.
    pub fn from_parts(
        block: usize,
        action_size: usize,
        branch_counts: Vec<usize>,
        error_word: Vec<usize>,
        levels: Vec<Vec<Vec<usize>>>,
        seed: u64,
    ) -> Result<Self> {
        let horizon = branch_counts.len();
        if horizon == 0 || levels.len() != horizon {
            return Err(CoordError::dim("need one level per time step"));
        }
        if error_word.len() != block {
            return Err(CoordError::dim("error word must be an N-tuple"));
        }
        let mut width = 1usize;
        for (t0, level) in levels.iter().enumerate() {
            width *= branch_counts[t0];
            if level.len() != width {
                return Err(CoordError::dim(format!(
                    "level {} holds {} nodes, expected {width}",
                    t0 + 1,
                    level.len()
                )));
            }
            if level.iter().any(|tuple| tuple.len() != block) {
                return Err(CoordError::dim("every stored tuple must have length N"));
            }
            if level
                .iter()
                .any(|tuple| tuple.iter().any(|&u| u >= action_size))
            {
                return Err(CoordError::invalid("tuple symbol outside the action alphabet"));
            }
        }
        Ok(TreeCodebook {
            horizon,
            block,
            action_size,
            branch_counts,
            error_word,
            levels,
            seed,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn branch_counts(&self) -> &[usize] {
        &self.branch_counts
    }

    pub fn error_word(&self) -> &[usize] {
        &self.error_word
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    fn path_index(&self, path: &[u32]) -> usize {
        let mut idx = 0usize;
        for (depth0, &i) in path.iter().enumerate() {
            idx = if depth0 == 0 {
                i as usize
            } else {
                idx * self.branch_counts[depth0] + i as usize
            };
        }
        idx
    }

    /// Stored tuple at `path`; None when the path leaves the tree.
    pub fn node(&self, path: &[u32]) -> Option<&[usize]> {
        if path.is_empty() || path.len() > self.horizon {
            return None;
        }
        for (depth0, &i) in path.iter().enumerate() {
            if i as usize >= self.branch_counts[depth0] {
                return None;
            }
        }
        Some(&self.levels[path.len() - 1][self.path_index(path)])
    }

    /// All nodes as (path, tuple) pairs in breadth-first order.
    pub fn nodes(&self) -> Vec<(Vec<u32>, &[usize])> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut paths: Vec<Vec<u32>> = vec![Vec::new()];
        for (t0, level) in self.levels.iter().enumerate() {
            let mut next = Vec::with_capacity(level.len());
            let m = self.branch_counts[t0];
            for parent in &paths {
                for j in 0..m {
                    let mut p = parent.clone();
                    p.push(j as u32);
                    next.push(p);
                }
            }
            for (p, tuple) in next.iter().zip(level) {
                out.push((p.clone(), tuple.as_slice()));
            }
            paths = next;
        }
        out
    }
}

impl CodeTree for TreeCodebook {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn block(&self) -> usize {
        self.block
    }

    fn action_size(&self) -> usize {
        self.action_size
    }

    fn branch_counts(&self) -> &[usize] {
        &self.branch_counts
    }

    fn error_word(&self) -> &[usize] {
        &self.error_word
    }

    fn child_tuple(&self, path: &[u32], _parent_histories: &[usize]) -> Vec<usize> {
        self.node(path)
            .expect("path inside materialized tree")
            .to_vec()
    }
}

/// Materialize the random codebook for `(source, policy)` at block size
/// `n`: depth-t nodes get `branch_counts[t-1]` children each, drawn from
/// the action-marginal product kernel given the parent path.
pub fn sample_codebook(
    source: &SourceLaw,
    policy: &DirectedKernel,
    n: usize,
    branch_counts: &[usize],
    seed: u64,
) -> Result<TreeCodebook> {
    let horizon = policy.horizon();
    if branch_counts.len() != horizon {
        return Err(CoordError::dim("need one branch count per time step"));
    }
    if branch_counts.iter().any(|&m| m == 0) {
        return Err(CoordError::invalid("branch counts must be positive"));
    }
    if let Some(&m) = branch_counts.iter().find(|&&m| m > BRANCH_CAP) {
        return Err(CoordError::guard(format!(
            "branch count {m} exceeds the per-node cap {BRANCH_CAP}"
        )));
    }
    let mut total: u128 = 0;
    let mut width: u128 = 1;
    for &m in branch_counts {
        width = width.saturating_mul(m as u128);
        total = total.saturating_add(width);
        if total > NODE_GUARD as u128 {
            return Err(CoordError::guard(format!(
                "tree would hold more than {NODE_GUARD} nodes"
            )));
        }
    }
    let sampler = TreeSampler::new(source, policy, n, seed)?;
    let nu = sampler.action_size;

    let mut levels: Vec<Vec<Vec<usize>>> = Vec::with_capacity(horizon);
    // breadth-first expansion carrying (path, encoded histories)
    let mut frontier: Vec<(Vec<u32>, Vec<usize>)> = vec![(Vec::new(), vec![0usize; n])];
    for &m in branch_counts {
        let mut level = Vec::with_capacity(frontier.len() * m);
        let mut next = Vec::with_capacity(frontier.len() * m);
        for (path, hist) in &frontier {
            for j in 0..m {
                let mut child_path = path.clone();
                child_path.push(j as u32);
                let tuple = sampler.sample_tuple(&child_path, hist);
                let child_hist: Vec<usize> = hist
                    .iter()
                    .zip(&tuple)
                    .map(|(&h, &u)| h * nu + u)
                    .collect();
                next.push((child_path, child_hist));
                level.push(tuple);
            }
        }
        levels.push(level);
        frontier = next;
    }
    Ok(TreeCodebook {
        horizon,
        block: n,
        action_size: nu,
        branch_counts: branch_counts.to_vec(),
        error_word: vec![0; n],
        levels,
        seed,
    })
}

/// On-demand view of the same random tree: child tuples are sampled when
/// requested, from the same per-path streams as [`sample_codebook`].
#[derive(Debug, Clone)]
pub struct VirtualTreeCode {
    sampler: TreeSampler,
    horizon: usize,
    branch_counts: Vec<usize>,
    error_word: Vec<usize>,
}

impl VirtualTreeCode {
    pub fn new(
        source: &SourceLaw,
        policy: &DirectedKernel,
        n: usize,
        branch_counts: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let horizon = policy.horizon();
        if branch_counts.len() != horizon {
            return Err(CoordError::dim("need one branch count per time step"));
        }
        if branch_counts.iter().any(|&m| m == 0) {
            return Err(CoordError::invalid("branch counts must be positive"));
        }
        let sampler = TreeSampler::new(source, policy, n, seed)?;
        Ok(VirtualTreeCode {
            error_word: vec![0; n],
            horizon,
            branch_counts: branch_counts.to_vec(),
            sampler,
        })
    }
}

impl CodeTree for VirtualTreeCode {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn block(&self) -> usize {
        self.sampler.block
    }

    fn action_size(&self) -> usize {
        self.sampler.action_size
    }

    fn branch_counts(&self) -> &[usize] {
        &self.branch_counts
    }

    fn error_word(&self) -> &[usize] {
        &self.error_word
    }

    fn child_tuple(&self, path: &[u32], parent_histories: &[usize]) -> Vec<usize> {
        self.sampler.sample_tuple(path, parent_histories)
    }
}

/// Greedy assignment: at each time, move to the smallest-index child whose
/// tuple keeps the pair empirically typical; fall back to the error word
/// and stay there. Returns the T x N action block.
pub fn assign<Tr: CodeTree>(
    tree: &Tr,
    specs: &[TypicalSetSpec],
    x_block: &[Vec<usize>],
) -> Result<Vec<Vec<usize>>> {
    assign_traced(tree, specs, x_block).map(|o| o.actions)
}

/// Assignment result with the first time step (1-based) at which the walk
/// fell back to the error word, if any.
#[derive(Debug, Clone)]
pub struct AssignOutcome {
    pub actions: Vec<Vec<usize>>,
    pub error_time: Option<usize>,
}

pub fn assign_traced<Tr: CodeTree>(
    tree: &Tr,
    specs: &[TypicalSetSpec],
    x_block: &[Vec<usize>],
) -> Result<AssignOutcome> {
    let horizon = tree.horizon();
    let n = tree.block();
    if specs.len() != horizon {
        return Err(CoordError::dim("need one typicality spec per time step"));
    }
    for (t0, spec) in specs.iter().enumerate() {
        if spec.t != t0 + 1 {
            return Err(CoordError::invalid("specs must be ordered by time"));
        }
    }
    if x_block.len() != horizon || x_block.iter().any(|row| row.len() != n) {
        return Err(CoordError::dim(format!(
            "state block must be {horizon} x {n}"
        )));
    }
    let nu = tree.action_size();
    let mut out = Vec::with_capacity(horizon);
    let mut path: Vec<u32> = Vec::with_capacity(horizon);
    let mut histories = vec![0usize; n];
    let mut error_time = None;
    for t0 in 0..horizon {
        if error_time.is_some() {
            out.push(tree.error_word().to_vec());
            continue;
        }
        let mut chosen: Option<Vec<usize>> = None;
        for j in 0..tree.branch_counts()[t0] {
            path.push(j as u32);
            let tuple = tree.child_tuple(&path, &histories);
            if specs[t0].accepts(&x_block[t0], &tuple)? {
                chosen = Some(tuple);
                break;
            }
            path.pop();
        }
        match chosen {
            Some(tuple) => {
                for (h, &u) in histories.iter_mut().zip(&tuple) {
                    *h = *h * nu + u;
                }
                out.push(tuple);
            }
            None => {
                error_time = Some(t0 + 1);
                out.push(tree.error_word().to_vec());
            }
        }
    }
    Ok(AssignOutcome {
        actions: out,
        error_time,
    })
}

/// A codebook together with its typicality specs: the deterministic maps
/// `x_[t],[N] -> u_t,[N]` realized by the greedy rule.
#[derive(Debug, Clone)]
pub struct SequentialCode {
    codebook: TreeCodebook,
    specs: Vec<TypicalSetSpec>,
}

impl SequentialCode {
    pub fn new(codebook: TreeCodebook, specs: Vec<TypicalSetSpec>) -> Result<Self> {
        if specs.len() != codebook.horizon() {
            return Err(CoordError::dim("need one typicality spec per time step"));
        }
        Ok(SequentialCode { codebook, specs })
    }

    pub fn codebook(&self) -> &TreeCodebook {
        &self.codebook
    }

    pub fn specs(&self) -> &[TypicalSetSpec] {
        &self.specs
    }

    pub fn run(&self, x_block: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
        assign(&self.codebook, &self.specs, x_block)
    }
}

/// Code parameters implied by the achievability construction.
#[derive(Debug, Clone)]
pub struct CodeParameters {
    pub branch_counts: Vec<usize>,
    /// per-time typicality thresholds on the psi scale
    pub thresholds: Vec<f64>,
    /// per-step information rates R_t of the policy the code is built for
    pub per_step_rates: Vec<f64>,
    /// ln(M_t)/N - R_t: the epsilon actually realized after rounding up
    pub epsilon_effective: Vec<f64>,
    /// Monte Carlo estimates of the mean psi deviation at this block size
    pub delta_estimates: Vec<f64>,
    /// true when branch counts were clipped to [`BRANCH_CAP`]
    pub saturated: bool,
}

/// Branch counts `M_t = ceil(exp(N (R_t + epsilon)))` and Monte Carlo
/// typicality thresholds `max(sqrt(mean psi), 1e-6)`; errors out when a
/// branch count would exceed the per-node cap.
pub fn choose_parameters(
    source: &SourceLaw,
    policy: &DirectedKernel,
    class: &FunctionClass,
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<CodeParameters> {
    let params = plan_parameters(source, policy, class, n, epsilon, seed)?;
    if params.saturated {
        let cap_rate = (BRANCH_CAP as f64).ln() / n as f64;
        return Err(CoordError::guard(format!(
            "branch count ceil(exp(N (R_t + eps))) exceeds {BRANCH_CAP}; \
             at N = {n} the cap admits R_t + eps <= {cap_rate:.4}"
        )));
    }
    Ok(params)
}

/// Like [`choose_parameters`] but clips branch counts at the per-node cap
/// instead of failing, recording the clip in `saturated`.
pub fn choose_parameters_capped(
    source: &SourceLaw,
    policy: &DirectedKernel,
    class: &FunctionClass,
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<CodeParameters> {
    plan_parameters(source, policy, class, n, epsilon, seed)
}

fn plan_parameters(
    source: &SourceLaw,
    policy: &DirectedKernel,
    class: &FunctionClass,
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<CodeParameters> {
    if !(epsilon > 0.0) {
        return Err(CoordError::invalid("epsilon must be > 0"));
    }
    if n == 0 {
        return Err(CoordError::invalid("block size must be >= 1"));
    }
    let di = directed_information(source, policy)?;
    let mut branch_counts = Vec::with_capacity(di.per_step.len());
    let mut epsilon_effective = Vec::with_capacity(di.per_step.len());
    let mut saturated = false;
    for &r_t in &di.per_step {
        let log_m = n as f64 * (r_t.max(0.0) + epsilon);
        let m = if log_m >= (BRANCH_CAP as f64).ln() {
            saturated = true;
            BRANCH_CAP
        } else {
            (log_m.exp().ceil() as usize).max(1)
        };
        branch_counts.push(m);
        epsilon_effective.push((m as f64).ln() / n as f64 - r_t.max(0.0));
    }

    // Monte Carlo estimate of the mean psi deviation of genuine
    // (state, action) blocks at each time
    let measure = assemble_strategic_measure(source, policy)?;
    let (nx, nu) = (source.state_size(), policy.action_size());
    let mut thresholds = Vec::with_capacity(di.per_step.len());
    let mut delta_estimates = Vec::with_capacity(di.per_step.len());
    for t in 1..=source.horizon() {
        let pair = measure.pair_marginal(t)?;
        let spec = TypicalSetSpec::new(t, 0.0, class.clone(), pair.clone(), nx, nu)?;
        let mut rng = stream(seed, StreamDomain::ThresholdEstimate, &[t as u32]);
        let mut acc = 0.0;
        let mut xs = vec![0usize; n];
        let mut us = vec![0usize; n];
        for _ in 0..THRESHOLD_DRAWS {
            for i in 0..n {
                let cell = sample_index(&pair, &mut rng);
                xs[i] = cell / nu;
                us[i] = cell % nu;
            }
            acc += spec.psi(&xs, &us)?;
        }
        let delta_hat = acc / THRESHOLD_DRAWS as f64;
        delta_estimates.push(delta_hat);
        thresholds.push(delta_hat.sqrt().max(THRESHOLD_FLOOR));
    }
    Ok(CodeParameters {
        branch_counts,
        thresholds,
        per_step_rates: di.per_step,
        epsilon_effective,
        delta_estimates,
        saturated,
    })
}

/// Exact output entropy of a sequential code, with the per-time conditional
/// entropies `H(U_t,[N] | U_[t-1],[N])`.
#[derive(Debug, Clone)]
pub struct CodeEntropy {
    /// `H(U_[T],[N])` in nats.
    pub total: f64,
    pub per_time_conditional: Vec<f64>,
}

/// Enumerate all state blocks, push the product source law through the
/// code, and return the exact output entropy.
pub fn exact_code_entropy(
    code: &SequentialCode,
    source: &SourceLaw,
    n: usize,
) -> Result<CodeEntropy> {
    if n != code.codebook.block() {
        return Err(CoordError::dim("block size differs from the codebook's"));
    }
    let horizon = source.horizon();
    let nx = source.state_size();
    let trajectories = index::pow(nx, horizon);
    let blocks = trajectories
        .checked_pow(n as u32)
        .filter(|&b| b <= ENTROPY_GUARD)
        .ok_or_else(|| {
            CoordError::guard(format!(
                "entropy enumeration would exceed {ENTROPY_GUARD} blocks"
            ))
        })?;
    let traj_law = source.trajectory_law();
    let nu = code.codebook.action_size;

    // distribution over emitted action blocks, keyed by the flattened block
    let mut law: HashMap<u64, f64> = HashMap::new();
    let mut x_block = vec![vec![0usize; n]; horizon];
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
        let mut key = 0u64;
        for row in &u_block {
            for &u in row {
                key = key * nu as u64 + u as u64;
            }
        }
        *law.entry(key).or_insert(0.0) += prob;
    }

    let total = -law
        .values()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>();

    // prefix entropies give the conditional chain terms
    let mut per_time_conditional = Vec::with_capacity(horizon);
    let mut prev_entropy = 0.0;
    for t in 1..=horizon {
        let keep = (nu as u64).pow(((horizon - t) * n) as u32);
        let mut prefix: HashMap<u64, f64> = HashMap::new();
        for (&key, &p) in &law {
            *prefix.entry(key / keep).or_insert(0.0) += p;
        }
        let h: f64 = -prefix
            .values()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>();
        per_time_conditional.push(h - prev_entropy);
        prev_entropy = h;
    }
    Ok(CodeEntropy {
        total,
        per_time_conditional,
    })
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Monte Carlo probability that a block of `n` i.i.d. draws from the
/// strategic measure is typical: its time-averaged empirical deviation
/// from the per-time pair marginals is at most `delta` (raw seminorm
/// scale, matching the typical-set definition).
pub fn typicality_probability(
    source: &SourceLaw,
    policy: &DirectedKernel,
    class: &FunctionClass,
    delta: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(CoordError::invalid("trials must be >= 1"));
    }
    if n == 0 {
        return Err(CoordError::invalid("block size must be >= 1"));
    }
    let measure = assemble_strategic_measure(source, policy)?;
    let horizon = source.horizon();
    let (nx, nu) = (source.state_size(), policy.action_size());
    let mut references = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        references.push(measure.pair_marginal(t)?);
    }
    let mut hits = 0usize;
    for k in 0..trials {
        let mut rng = stream(seed, StreamDomain::Typicality, &[k as u32]);
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
        let mut dev = 0.0;
        for t0 in 0..horizon {
            let emp = empirical_pair_row(&x_rows[t0], &u_rows[t0], nx, nu)?;
            let diff: Vec<f64> = emp
                .iter()
                .zip(&references[t0])
                .map(|(a, b)| a - b)
                .collect();
            dev += seminorm_witness(&diff, class)?.0;
        }
        if dev / horizon as f64 <= delta {
            hits += 1;
        }
    }
    let mean = hits as f64 / trials as f64;
    Ok(MonteCarloEstimate {
        mean,
        std_error: (mean * (1.0 - mean) / trials as f64).sqrt(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::gen;
    use crate::prob::Distribution;
    use approx::assert_abs_diff_eq;

    fn binary_setup(horizon: usize, seed: u64) -> (SourceLaw, DirectedKernel) {
        let mut rng = gen::instance_rng(seed, 0);
        let source = gen::random_source(2, horizon, &mut rng);
        let policy = gen::random_policy(2, 2, horizon, &mut rng);
        (source, policy)
    }

    fn tv_specs(
        source: &SourceLaw,
        policy: &DirectedKernel,
        thresholds: &[f64],
    ) -> Vec<TypicalSetSpec> {
        let measure = assemble_strategic_measure(source, policy).unwrap();
        (1..=source.horizon())
            .map(|t| {
                TypicalSetSpec::new(
                    t,
                    thresholds[t - 1],
                    FunctionClass::TotalVariation,
                    measure.pair_marginal(t).unwrap(),
                    source.state_size(),
                    policy.action_size(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn degenerate_tree_is_a_single_path() {
        let (source, policy) = binary_setup(2, 1);
        let book = sample_codebook(&source, &policy, 4, &[1, 1], 7).unwrap();
        assert_eq!(book.node_count(), 2);
        assert_eq!(book.node(&[0]).unwrap().len(), 4);
        assert!(book.node(&[1]).is_none());
        assert!(book.node(&[0, 0, 0]).is_none());
    }

    #[test]
    fn codebook_sampling_is_seed_deterministic() {
        let (source, policy) = binary_setup(2, 2);
        let a = sample_codebook(&source, &policy, 3, &[2, 3], 11).unwrap();
        let b = sample_codebook(&source, &policy, 3, &[2, 3], 11).unwrap();
        let c = sample_codebook(&source, &policy, 3, &[2, 3], 12).unwrap();
        for (p, tuple) in a.nodes() {
            assert_eq!(tuple, b.node(&p).unwrap());
        }
        assert!(a.nodes().iter().any(|(p, tuple)| *tuple != c.node(p).unwrap()));
    }

    #[test]
    fn root_children_match_binomial_statistics() {
        // T=1, N=1: children are single symbols from the action marginal
        let mu = Distribution::new(vec![0.5, 0.5]).unwrap();
        let source = SourceLaw::iid(1, &mu).unwrap();
        let base = MarkovKernel::from_rows(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        let policy = DirectedKernel::memoryless(1, &base).unwrap();
        let m = 1000;
        let book = sample_codebook(&source, &policy, 1, &[m], 5).unwrap();
        let ones: usize = (0..m).map(|j| book.node(&[j as u32]).unwrap()[0]).sum();
        let p = 0.7;
        let sigma = (p * (1.0 - p) / m as f64).sqrt();
        let freq = ones as f64 / m as f64;
        assert!(
            (freq - p).abs() <= 3.0 * sigma,
            "frequency {freq} outside 3 sigma of {p}"
        );
    }

    #[test]
    fn lazy_and_eager_trees_agree() {
        let (source, policy) = binary_setup(2, 3);
        let counts = [3usize, 2];
        let book = sample_codebook(&source, &policy, 4, &counts, 21).unwrap();
        let lazy = VirtualTreeCode::new(&source, &policy, 4, &counts, 21).unwrap();
        let mut frontier: Vec<(Vec<u32>, Vec<usize>)> = vec![(vec![], vec![0; 4])];
        for t0 in 0..2 {
            let mut next = Vec::new();
            for (path, hist) in &frontier {
                for j in 0..counts[t0] {
                    let mut p = path.clone();
                    p.push(j as u32);
                    let eager = book.node(&p).unwrap().to_vec();
                    let virt = lazy.child_tuple(&p, hist);
                    assert_eq!(eager, virt, "path {p:?}");
                    let h: Vec<usize> =
                        hist.iter().zip(&virt).map(|(&h, &u)| h * 2 + u).collect();
                    next.push((p, h));
                }
            }
            frontier = next;
        }
    }

    #[test]
    fn assign_takes_first_child_when_threshold_is_infinite() {
        let (source, policy) = binary_setup(2, 4);
        let book = sample_codebook(&source, &policy, 4, &[3, 3], 9).unwrap();
        let specs = tv_specs(&source, &policy, &[f64::INFINITY, f64::INFINITY]);
        let x_block = vec![vec![0, 1, 0, 1], vec![1, 1, 0, 0]];
        let u = assign(&book, &specs, &x_block).unwrap();
        assert_eq!(u[0], book.node(&[0]).unwrap());
        assert_eq!(u[1], book.node(&[0, 0]).unwrap());
    }

    #[test]
    fn assign_emits_error_word_when_nothing_is_typical() {
        let (source, policy) = binary_setup(2, 5);
        let book = sample_codebook(&source, &policy, 4, &[3, 3], 13).unwrap();
        // threshold 0 with a generic reference rejects every child
        let specs = tv_specs(&source, &policy, &[0.0, 0.0]);
        let x_block = vec![vec![0, 1, 0, 1], vec![1, 1, 0, 0]];
        let u = assign(&book, &specs, &x_block).unwrap();
        assert_eq!(u[0], vec![0, 0, 0, 0]);
        assert_eq!(u[1], vec![0, 0, 0, 0]);
    }

    #[test]
    fn assign_matches_reference_scan_oracle() {
        let (source, policy) = binary_setup(2, 6);
        let n = 4;
        let counts = [4usize, 3];
        let book = sample_codebook(&source, &policy, n, &counts, 17).unwrap();
        let specs = tv_specs(&source, &policy, &[0.4, 0.45]);
        let mut rng = gen::instance_rng(99, 1);
        for _ in 0..24 {
            let mut x_block = vec![vec![0usize; n]; 2];
            for row in x_block.iter_mut() {
                for v in row.iter_mut() {
                    *v = usize::from(rand::Rng::gen::<f64>(&mut rng) < 0.5);
                }
            }
            let got = assign(&book, &specs, &x_block).unwrap();

            // independent reimplementation of the greedy rule
            let mut expected: Vec<Vec<usize>> = Vec::new();
            let mut path: Vec<u32> = Vec::new();
            let mut dead = false;
            for t0 in 0..2 {
                if dead {
                    expected.push(vec![0; n]);
                    continue;
                }
                let mut found = None;
                for j in 0..counts[t0] {
                    let mut p = path.clone();
                    p.push(j as u32);
                    let tuple = book.node(&p).unwrap();
                    if specs[t0].psi(&x_block[t0], tuple).unwrap() <= specs[t0].threshold() {
                        found = Some((p, tuple.to_vec()));
                        break;
                    }
                }
                match found {
                    Some((p, tuple)) => {
                        path = p;
                        expected.push(tuple);
                    }
                    None => {
                        dead = true;
                        expected.push(vec![0; n]);
                    }
                }
            }
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn assign_output_is_a_root_path_or_error_tail() {
        let (source, policy) = binary_setup(2, 7);
        let n = 3;
        let book = sample_codebook(&source, &policy, n, &[2, 2], 23).unwrap();
        let specs = tv_specs(&source, &policy, &[0.3, 0.3]);
        let mut rng = gen::instance_rng(7, 2);
        for _ in 0..40 {
            let x_block: Vec<Vec<usize>> = (0..2)
                .map(|_| {
                    (0..n)
                        .map(|_| usize::from(rand::Rng::gen::<f64>(&mut rng) < 0.5))
                        .collect()
                })
                .collect();
            let u = assign(&book, &specs, &x_block).unwrap();
            let mut path: Vec<u32> = Vec::new();
            let mut dead = false;
            for t0 in 0..2 {
                if dead {
                    assert_eq!(u[t0], vec![0; n]);
                    continue;
                }
                let mut matched = false;
                for j in 0..2u32 {
                    let mut p = path.clone();
                    p.push(j);
                    if book.node(&p).unwrap() == u[t0].as_slice() {
                        path = p;
                        matched = true;
                        break;
                    }
                }
                if !matched {
                    assert_eq!(u[t0], vec![0; n], "row {t0} neither child nor error");
                    dead = true;
                }
            }
        }
    }

    #[test]
    fn choose_parameters_formula_and_guards() {
        // state-independent policy: R_t = 0, so M_t = ceil(exp(N eps))
        let mu = Distribution::new(vec![0.4, 0.6]).unwrap();
        let source = SourceLaw::iid(2, &mu).unwrap();
        let q = Distribution::new(vec![0.5, 0.5]).unwrap();
        let policy = DirectedKernel::memoryless(2, &MarkovKernel::constant(2, &q)).unwrap();
        let n = 4;
        let eps = 2.0f64.ln() / n as f64;
        let params =
            choose_parameters(&source, &policy, &FunctionClass::TotalVariation, n, eps, 3)
                .unwrap();
        assert_eq!(params.branch_counts, vec![2, 2]);
        for (t0, &m) in params.branch_counts.iter().enumerate() {
            assert_abs_diff_eq!(
                params.epsilon_effective[t0],
                (m as f64).ln() / n as f64 - params.per_step_rates[t0].max(0.0),
                epsilon = 1e-12
            );
            assert!(params.epsilon_effective[t0] >= eps - 1e-12);
        }
        for &thr in &params.thresholds {
            assert!(thr >= THRESHOLD_FLOOR);
        }

        // overflow path: N = 1 with huge epsilon trips the cap
        let err =
            choose_parameters(&source, &policy, &FunctionClass::TotalVariation, 1, 20.0, 3);
        assert!(matches!(err, Err(CoordError::GuardExceeded(_))));
        let capped =
            choose_parameters_capped(&source, &policy, &FunctionClass::TotalVariation, 1, 20.0, 3)
                .unwrap();
        assert!(capped.saturated);
        assert!(capped.branch_counts.iter().all(|&m| m == BRANCH_CAP));
    }

    #[test]
    fn choose_parameters_matches_hand_formula_on_seeded_instance() {
        let (source, policy) = binary_setup(2, 8);
        let n = 3;
        let eps = 0.25;
        let params =
            choose_parameters(&source, &policy, &FunctionClass::TotalVariation, n, eps, 3)
                .unwrap();
        let di = directed_information(&source, &policy).unwrap();
        for (t0, &m) in params.branch_counts.iter().enumerate() {
            let hand = (n as f64 * (di.per_step[t0] + eps)).exp().ceil() as usize;
            assert_eq!(m, hand);
        }
    }

    #[test]
    fn exact_entropy_constant_code_is_zero() {
        let (source, policy) = binary_setup(2, 9);
        let book = sample_codebook(&source, &policy, 2, &[2, 2], 31).unwrap();
        // threshold 0 forces the error word everywhere: constant output
        let specs = tv_specs(&source, &policy, &[0.0, 0.0]);
        let code = SequentialCode::new(book, specs).unwrap();
        let h = exact_code_entropy(&code, &source, 2).unwrap();
        assert_abs_diff_eq!(h.total, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_entropy_identity_relabeling_preserves_source_entropy() {
        // uniform binary source, T=1, N=2, codebook holding all four
        // 2-tuples; the off-diagonal indicator accepts exactly u = x, so
        // the greedy rule is the identity relabeling and the output
        // entropy equals the source block entropy
        let mu = Distribution::new(vec![0.5, 0.5]).unwrap();
        let source = SourceLaw::iid(1, &mu).unwrap();
        let policy = DirectedKernel::memoryless(1, &MarkovKernel::identity(2)).unwrap();
        let book = TreeCodebook {
            horizon: 1,
            block: 2,
            action_size: 2,
            branch_counts: vec![4],
            error_word: vec![0, 0],
            levels: vec![vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]],
            seed: 0,
        };
        let measure = assemble_strategic_measure(&source, &policy).unwrap();
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
        let h = exact_code_entropy(&code, &source, 2).unwrap();
        assert_abs_diff_eq!(h.total, 2.0 * 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn exact_entropy_matches_plugin_enumeration_oracle() {
        let (source, policy) = binary_setup(2, 10);
        let n = 2;
        let params =
            choose_parameters(&source, &policy, &FunctionClass::TotalVariation, n, 0.3, 41)
                .unwrap();
        let book = sample_codebook(&source, &policy, n, &params.branch_counts, 41).unwrap();
        let measure = assemble_strategic_measure(&source, &policy).unwrap();
        let specs: Vec<TypicalSetSpec> = (1..=2)
            .map(|t| {
                TypicalSetSpec::new(
                    t,
                    params.thresholds[t - 1],
                    FunctionClass::TotalVariation,
                    measure.pair_marginal(t).unwrap(),
                    2,
                    2,
                )
                .unwrap()
            })
            .collect();
        let code = SequentialCode::new(book, specs).unwrap();
        let got = exact_code_entropy(&code, &source, n).unwrap();

        // oracle: exhaustive 16-input enumeration with explicit counting
        let traj_law = source.trajectory_law();
        let mut law: HashMap<Vec<Vec<usize>>, f64> = HashMap::new();
        for a in 0..4usize {
            for b in 0..4usize {
                let p = traj_law[a] * traj_law[b];
                let x_block = vec![vec![a / 2, b / 2], vec![a % 2, b % 2]];
                let u = code.run(&x_block).unwrap();
                *law.entry(u).or_insert(0.0) += p;
            }
        }
        let oracle: f64 = -law
            .values()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>();
        assert_abs_diff_eq!(got.total, oracle, epsilon = 1e-10);

        // chain decomposition consistency and the branch-count cap
        let sum: f64 = got.per_time_conditional.iter().sum();
        assert_abs_diff_eq!(sum, got.total, epsilon = 1e-10);
        for (t0, &h) in got.per_time_conditional.iter().enumerate() {
            assert!(h <= ((params.branch_counts[t0] + 1) as f64).ln() + 1e-9);
        }
    }

    #[test]
    fn entropy_guard_trips() {
        let (source, policy) = binary_setup(3, 11);
        let book = sample_codebook(&source, &policy, 8, &[1, 1, 1], 3).unwrap();
        let specs = tv_specs(&source, &policy, &[0.5, 0.5, 0.5]);
        let code = SequentialCode::new(book, specs).unwrap();
        assert!(matches!(
            exact_code_entropy(&code, &source, 8),
            Err(CoordError::GuardExceeded(_))
        ));
    }

    #[test]
    fn typicality_probability_trivial_cases() {
        let (source, policy) = binary_setup(1, 12);
        // TV seminorm never exceeds 2
        let p = typicality_probability(
            &source,
            &policy,
            &FunctionClass::TotalVariation,
            2.0,
            5,
            50,
            7,
        )
        .unwrap();
        assert_eq!(p.mean, 1.0);

        // point-mass source, deterministic policy: empirical equals the
        // reference exactly at every block size
        let mu = Distribution::point_mass(2, 0);
        let source = SourceLaw::iid(1, &mu).unwrap();
        let policy = DirectedKernel::memoryless(1, &MarkovKernel::identity(2)).unwrap();
        let p = typicality_probability(
            &source,
            &policy,
            &FunctionClass::TotalVariation,
            0.5,
            1,
            50,
            7,
        )
        .unwrap();
        assert_eq!(p.mean, 1.0);
    }

    #[test]
    fn typicality_probability_grows_with_block_size() {
        let (source, policy) = binary_setup(1, 13);
        let mut prev = -1.0;
        let mut prev_se = 0.0;
        for n in [10, 100, 1000] {
            let est = typicality_probability(
                &source,
                &policy,
                &FunctionClass::TotalVariation,
                0.25,
                n,
                200,
                19,
            )
            .unwrap();
            assert!(
                est.mean >= prev - 2.0 * (est.std_error + prev_se),
                "membership probability dropped at N = {n}"
            );
            prev = est.mean;
            prev_se = est.std_error;
        }
        assert!(prev > 0.9, "membership at N=1000 should be near 1");
    }

    #[test]
    fn guards_reject_oversized_trees() {
        let (source, policy) = binary_setup(2, 14);
        assert!(matches!(
            sample_codebook(&source, &policy, 2, &[BRANCH_CAP + 1, 1], 3),
            Err(CoordError::GuardExceeded(_))
        ));
        assert!(matches!(
            sample_codebook(&source, &policy, 2, &[2000, 2000], 3),
            Err(CoordError::GuardExceeded(_))
        ));
        assert!(sample_codebook(&source, &policy, 2, &[0, 2], 3).is_err());
    }
}
