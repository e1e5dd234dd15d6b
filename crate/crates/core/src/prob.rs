//! Exact discrete probability machinery.
//!
//! Distributions, Markov kernels, causal (directed) kernels, source laws,
//! strategic measures, entropies, mutual and directed information, and
//! conditional information densities, all on finite alphabets with dense
//! tensors. Trajectories are flattened time-major (see [`crate::index`]).
//!
//! Conventions (applied uniformly):
//! - natural logarithms; 0·log 0 = 0;
//! - conditional laws on zero-probability histories are filled with the
//!   uniform distribution, which never affects an expectation under the
//!   measure;
//! - relative entropy is +∞ when absolute continuity fails.

use crate::error::{CoordError, Result};
use crate::index;
use crate::{CAUSALITY_TOL, MASS_TOL};
use rand::Rng;

/// A finite ordered alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(CoordError::invalid("alphabet must have at least one symbol"));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(CoordError::invalid(format!("duplicate symbol label {a:?}")));
            }
        }
        Ok(Alphabet { labels })
    }

    /// Alphabet `{"0", "1", ..., "n-1"}`.
    pub fn indexed(n: usize) -> Self {
        Alphabet {
            labels: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CoordError::invalid("empty probability vector"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(CoordError::invalid("probabilities must be finite and >= 0"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(CoordError::invalid(format!(
                "probabilities sum to {sum}, not 1 within {MASS_TOL}"
            )));
        }
        Ok(Distribution { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Distribution {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Distribution { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        exact_entropy(self)
    }

    /// Inverse-CDF sample.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        sample_index(&self.probs, rng)
    }
}

pub(crate) fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// A row-stochastic matrix: `inputs` conditioning configurations, each row a
/// distribution over `outputs` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel {
    inputs: usize,
    outputs: usize,
    rows: Vec<f64>,
}

impl MarkovKernel {
    pub fn new(inputs: usize, outputs: usize, rows: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(CoordError::invalid("kernel dimensions must be positive"));
        }
        if rows.len() != inputs * outputs {
            return Err(CoordError::dim(format!(
                "kernel data has {} entries, expected {}",
                rows.len(),
                inputs * outputs
            )));
        }
        for r in 0..inputs {
            let row = &rows[r * outputs..(r + 1) * outputs];
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(CoordError::invalid(format!("row {r} has an invalid entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > MASS_TOL {
                return Err(CoordError::invalid(format!(
                    "row {r} sums to {sum}, not 1 within {MASS_TOL}"
                )));
            }
        }
        Ok(MarkovKernel {
            inputs,
            outputs,
            rows,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let inputs = rows.len();
        let outputs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != outputs) {
            return Err(CoordError::dim("ragged kernel rows"));
        }
        MarkovKernel::new(inputs, outputs, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            rows[i * n + i] = 1.0;
        }
        MarkovKernel {
            inputs: n,
            outputs: n,
            rows,
        }
    }

    pub fn uniform(inputs: usize, outputs: usize) -> Self {
        MarkovKernel {
            inputs,
            outputs,
            rows: vec![1.0 / outputs as f64; inputs * outputs],
        }
    }

    /// Kernel whose every row equals `dist` (ignores its input).
    pub fn constant(inputs: usize, dist: &Distribution) -> Self {
        let mut rows = Vec::with_capacity(inputs * dist.len());
        for _ in 0..inputs {
            rows.extend_from_slice(dist.probs());
        }
        MarkovKernel {
            inputs,
            outputs: dist.len(),
            rows,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.outputs..(r + 1) * self.outputs]
    }

    pub fn prob(&self, r: usize, c: usize) -> f64 {
        self.rows[r * self.outputs + c]
    }

    /// Output law `mu K` of the kernel applied to `mu`.
    pub fn push_forward(&self, mu: &Distribution) -> Result<Distribution> {
        if mu.len() != self.inputs {
            return Err(CoordError::dim("push_forward: input law size != kernel inputs"));
        }
        let mut out = vec![0.0; self.outputs];
        for (x, &px) in mu.probs().iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            for (y, &k) in self.row(x).iter().enumerate() {
                out[y] += px * k;
            }
        }
        Ok(Distribution { probs: out })
    }
}

/// The law of the state process, disintegrated into per-time factors.
/// Factor `t` (1-based) conditions on the `t-1` earlier states, so it has
/// `|X|^(t-1)` rows.
#[derive(Debug, Clone)]
pub struct SourceLaw {
    state_size: usize,
    horizon: usize,
    factors: Vec<MarkovKernel>,
}

impl SourceLaw {
    pub fn new(state_size: usize, factors: Vec<MarkovKernel>) -> Result<Self> {
        let horizon = factors.len();
        if horizon == 0 {
            return Err(CoordError::invalid("source law needs horizon >= 1"));
        }
        for (t0, f) in factors.iter().enumerate() {
            let want = index::pow(state_size, t0);
            if f.inputs() != want || f.outputs() != state_size {
                return Err(CoordError::dim(format!(
                    "source factor {} is {}x{}, expected {}x{}",
                    t0 + 1,
                    f.inputs(),
                    f.outputs(),
                    want,
                    state_size
                )));
            }
        }
        Ok(SourceLaw {
            state_size,
            horizon,
            factors,
        })
    }

    /// Memoryless source with identical per-time marginal.
    pub fn iid(horizon: usize, marginal: &Distribution) -> Result<Self> {
        let n = marginal.len();
        let factors = (0..horizon)
            .map(|t0| MarkovKernel::constant(index::pow(n, t0), marginal))
            .collect();
        SourceLaw::new(n, factors)
    }

    pub fn state_size(&self) -> usize {
        self.state_size
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn factor(&self, t: usize) -> &MarkovKernel {
        &self.factors[t - 1]
    }

    /// Probability of a full state trajectory (flat index).
    pub fn trajectory_prob(&self, xflat: usize) -> f64 {
        let nx = self.state_size;
        let mut p = 1.0;
        for t in 1..=self.horizon {
            let hist = index::prefix(xflat, nx, self.horizon, t - 1);
            let xt = index::digit(xflat, nx, self.horizon, t);
            p *= self.factors[t - 1].prob(hist, xt);
            if p == 0.0 {
                break;
            }
        }
        p
    }

    /// Dense law over all `|X|^T` trajectories.
    pub fn trajectory_law(&self) -> Vec<f64> {
        let total = index::pow(self.state_size, self.horizon);
        (0..total).map(|x| self.trajectory_prob(x)).collect()
    }

    /// Sample one state trajectory.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<usize> {
        let nx = self.state_size;
        let mut traj = Vec::with_capacity(self.horizon);
        let mut hist = 0usize;
        for t in 1..=self.horizon {
            let xt = sample_index(self.factors[t - 1].row(hist), rng);
            traj.push(xt);
            hist = hist * nx + xt;
        }
        traj
    }
}

/// A causal policy: factor `t` (1-based) conditions on `(x_[t], u_[t-1])`
/// and emits `u_t`. Rows are indexed by `xprefix * |U|^(t-1) + uprefix`.
#[derive(Debug, Clone)]
pub struct DirectedKernel {
    state_size: usize,
    action_size: usize,
    horizon: usize,
    factors: Vec<MarkovKernel>,
}

impl DirectedKernel {
    pub fn new(state_size: usize, action_size: usize, factors: Vec<MarkovKernel>) -> Result<Self> {
        let horizon = factors.len();
        if horizon == 0 {
            return Err(CoordError::invalid("directed kernel needs horizon >= 1"));
        }
        for (t0, f) in factors.iter().enumerate() {
            let want = index::pow(state_size, t0 + 1) * index::pow(action_size, t0);
            if f.inputs() != want || f.outputs() != action_size {
                return Err(CoordError::dim(format!(
                    "policy factor {} is {}x{}, expected {}x{}",
                    t0 + 1,
                    f.inputs(),
                    f.outputs(),
                    want,
                    action_size
                )));
            }
        }
        Ok(DirectedKernel {
            state_size,
            action_size,
            horizon,
            factors,
        })
    }

    /// Time-invariant memoryless policy: `u_t ~ base(. | x_t)`.
    pub fn memoryless(horizon: usize, base: &MarkovKernel) -> Result<Self> {
        let nx = base.inputs();
        let nu = base.outputs();
        let mut factors = Vec::with_capacity(horizon);
        for t0 in 0..horizon {
            let xp = index::pow(nx, t0 + 1);
            let up = index::pow(nu, t0);
            let mut rows = Vec::with_capacity(xp * up * nu);
            for xpre in 0..xp {
                let xt = xpre % nx;
                for _ in 0..up {
                    rows.extend_from_slice(base.row(xt));
                }
            }
            factors.push(MarkovKernel::new(xp * up, nu, rows)?);
        }
        DirectedKernel::new(nx, nu, factors)
    }

    /// State-independent policy drawing `u_[T]` from `action_law`
    /// (a law over flat action trajectories), disintegrated causally.
    pub fn state_independent(
        state_size: usize,
        action_size: usize,
        horizon: usize,
        action_law: &[f64],
    ) -> Result<Self> {
        if action_law.len() != index::pow(action_size, horizon) {
            return Err(CoordError::dim("action law has wrong length"));
        }
        let factors_u = disintegrate(action_law, action_size, horizon);
        let mut factors = Vec::with_capacity(horizon);
        for (t0, fu) in factors_u.iter().enumerate() {
            let xp = index::pow(state_size, t0 + 1);
            let up = index::pow(action_size, t0);
            let mut rows = Vec::with_capacity(xp * up * action_size);
            for _ in 0..xp {
                for upre in 0..up {
                    rows.extend_from_slice(fu.row(upre));
                }
            }
            factors.push(MarkovKernel::new(xp * up, action_size, rows)?);
        }
        DirectedKernel::new(state_size, action_size, factors)
    }

    pub fn state_size(&self) -> usize {
        self.state_size
    }

    pub fn action_size(&self) -> usize {
        self.action_size
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn factor(&self, t: usize) -> &MarkovKernel {
        &self.factors[t - 1]
    }

    /// Conditional probability of a full action trajectory given a state
    /// trajectory (both flat).
    pub fn trajectory_prob(&self, xflat: usize, uflat: usize) -> f64 {
        let (nx, nu, horizon) = (self.state_size, self.action_size, self.horizon);
        let mut p = 1.0;
        for t in 1..=self.horizon {
            let xpre = index::prefix(xflat, nx, horizon, t);
            let upre = index::prefix(uflat, nu, horizon, t - 1);
            let ut = index::digit(uflat, nu, horizon, t);
            p *= self.factors[t - 1].prob(xpre * index::pow(nu, t - 1) + upre, ut);
            if p == 0.0 {
                break;
            }
        }
        p
    }

    /// Sample an action trajectory along observed states.
    pub fn sample(&self, xtraj: &[usize], rng: &mut impl Rng) -> Vec<usize> {
        let nu = self.action_size;
        let mut utraj = Vec::with_capacity(self.horizon);
        let mut xpre = 0usize;
        let mut upre = 0usize;
        for t in 1..=self.horizon {
            xpre = xpre * self.state_size + xtraj[t - 1];
            let row = xpre * index::pow(nu, t - 1) + upre;
            let ut = sample_index(self.factors[t - 1].row(row), rng);
            utraj.push(ut);
            upre = upre * nu + ut;
        }
        utraj
    }
}

/// Disintegrate a law over flat length-`len` trajectories into causal
/// factors; zero-probability histories get uniform rows.
pub(crate) fn disintegrate(law: &[f64], base: usize, len: usize) -> Vec<MarkovKernel> {
    let mut factors = Vec::with_capacity(len);
    // prefix_mass[k] holds the marginal over the first k symbols
    let mut prev = vec![1.0];
    for t in 1..=len {
        let cells = index::pow(base, t);
        let mut cur = vec![0.0; cells];
        for (flat, &p) in law.iter().enumerate() {
            cur[index::prefix(flat, base, len, t)] += p;
        }
        let mut rows = Vec::with_capacity(cells);
        for (pre, &mass) in prev.iter().enumerate() {
            if mass > 0.0 {
                for s in 0..base {
                    rows.push(cur[pre * base + s] / mass);
                }
            } else {
                rows.extend(std::iter::repeat(1.0 / base as f64).take(base));
            }
        }
        // rows are nonnegative ratios summing to 1 (or uniform fill)
        factors.push(
            MarkovKernel::new(cells / base, base, rows).expect("disintegration rows stochastic"),
        );
        prev = cur;
    }
    factors
}

/// The joint law of states and actions induced by a source law and a causal
/// policy, as a dense tensor over `X^T x U^T`.
#[derive(Debug, Clone)]
pub struct StrategicMeasure {
    state_size: usize,
    action_size: usize,
    horizon: usize,
    joint: Vec<f64>,
}

/// Build the strategic measure `prod_t mu_t(x_t|..) pi_t(u_t|..)`.
pub fn assemble_strategic_measure(
    source: &SourceLaw,
    policy: &DirectedKernel,
) -> Result<StrategicMeasure> {
    if source.horizon() != policy.horizon() {
        return Err(CoordError::dim("source and policy horizons differ"));
    }
    if source.state_size() != policy.state_size() {
        return Err(CoordError::dim("source and policy state alphabets differ"));
    }
    let (nx, nu, horizon) = (source.state_size(), policy.action_size(), source.horizon());
    let nxt = index::pow(nx, horizon);
    let nut = index::pow(nu, horizon);
    let mut joint = vec![0.0; nxt * nut];
    for x in 0..nxt {
        let px = source.trajectory_prob(x);
        if px == 0.0 {
            continue;
        }
        for u in 0..nut {
            joint[x * nut + u] = px * policy.trajectory_prob(x, u);
        }
    }
    let m = StrategicMeasure {
        state_size: nx,
        action_size: nu,
        horizon,
        joint,
    };
    debug_assert!((m.total_mass() - 1.0).abs() <= MASS_TOL);
    debug_assert!(m.causality_defect() <= CAUSALITY_TOL);
    Ok(m)
}

impl StrategicMeasure {
    /// Wrap a raw joint tensor, validating mass and causality.
    pub fn from_joint(
        state_size: usize,
        action_size: usize,
        horizon: usize,
        joint: Vec<f64>,
    ) -> Result<Self> {
        let want = index::pow(state_size, horizon) * index::pow(action_size, horizon);
        if joint.len() != want {
            return Err(CoordError::dim(format!(
                "joint tensor has {} cells, expected {want}",
                joint.len()
            )));
        }
        if joint.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(CoordError::invalid("joint tensor has an invalid entry"));
        }
        let m = StrategicMeasure {
            state_size,
            action_size,
            horizon,
            joint,
        };
        if (m.total_mass() - 1.0).abs() > MASS_TOL {
            return Err(CoordError::invalid(format!(
                "joint tensor mass {} != 1",
                m.total_mass()
            )));
        }
        let defect = m.causality_defect();
        if defect > CAUSALITY_TOL {
            return Err(CoordError::invalid(format!(
                "causality defect {defect} exceeds {CAUSALITY_TOL}"
            )));
        }
        Ok(m)
    }

    pub fn state_size(&self) -> usize {
        self.state_size
    }

    pub fn action_size(&self) -> usize {
        self.action_size
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn prob(&self, xflat: usize, uflat: usize) -> f64 {
        self.joint[xflat * index::pow(self.action_size, self.horizon) + uflat]
    }

    pub fn total_mass(&self) -> f64 {
        self.joint.iter().sum()
    }

    /// Largest violation of the causality requirement: the conditional law
    /// of `u_[t]` given the full state trajectory may depend only on `x_[t]`.
    pub fn causality_defect(&self) -> f64 {
        let (nx, nu, horizon) = (self.state_size, self.action_size, self.horizon);
        let nxt = index::pow(nx, horizon);
        let nut = index::pow(nu, horizon);
        let mux: Vec<f64> = (0..nxt)
            .map(|x| self.joint[x * nut..(x + 1) * nut].iter().sum())
            .collect();
        let mut defect = 0.0f64;
        for t in 1..horizon {
            let upow = index::pow(nu, t);
            let xpow = index::pow(nx, t);
            // cond[xprefix-group][u_[t]] tracked as min/max over the group
            let mut lo = vec![f64::INFINITY; xpow * upow];
            let mut hi = vec![f64::NEG_INFINITY; xpow * upow];
            for x in 0..nxt {
                if mux[x] == 0.0 {
                    continue;
                }
                let xp = index::prefix(x, nx, horizon, t);
                for up in 0..upow {
                    let mut mass = 0.0;
                    for tail in 0..index::pow(nu, horizon - t) {
                        mass += self.joint[x * nut + up * index::pow(nu, horizon - t) + tail];
                    }
                    let cond = mass / mux[x];
                    let cell = xp * upow + up;
                    lo[cell] = lo[cell].min(cond);
                    hi[cell] = hi[cell].max(cond);
                }
            }
            for cell in 0..xpow * upow {
                if hi[cell].is_finite() && lo[cell].is_finite() {
                    defect = defect.max(hi[cell] - lo[cell]);
                }
            }
        }
        defect
    }

    /// Marginal law of `X_t`.
    pub fn marginal_state(&self, t: usize) -> Result<Distribution> {
        self.check_time(t)?;
        let (nx, nu, horizon) = (self.state_size, self.action_size, self.horizon);
        let nut = index::pow(nu, horizon);
        let mut probs = vec![0.0; nx];
        for (x, chunk) in self.joint.chunks(nut).enumerate() {
            let xt = index::digit(x, nx, horizon, t);
            probs[xt] += chunk.iter().sum::<f64>();
        }
        Distribution::new(probs)
    }

    /// Joint pair law of `(X_t, U_t)` over `X x U`, flattened `x * |U| + u`.
    pub fn pair_marginal(&self, t: usize) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let (nx, nu, horizon) = (self.state_size, self.action_size, self.horizon);
        let nut = index::pow(nu, horizon);
        let mut pair = vec![0.0; nx * nu];
        for (cell, &p) in self.joint.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (x, u) = (cell / nut, cell % nut);
            let xt = index::digit(x, nx, horizon, t);
            let ut = index::digit(u, nu, horizon, t);
            pair[xt * nu + ut] += p;
        }
        Ok(pair)
    }

    /// Marginal conditional law of `U_t` given `X_t`; zero-probability
    /// states get uniform rows.
    pub fn marginal_policy(&self, t: usize) -> Result<MarkovKernel> {
        let pair = self.pair_marginal(t)?;
        let (nx, nu) = (self.state_size, self.action_size);
        let mut rows = Vec::with_capacity(nx * nu);
        for x in 0..nx {
            let mass: f64 = pair[x * nu..(x + 1) * nu].iter().sum();
            if mass > 0.0 {
                rows.extend(pair[x * nu..(x + 1) * nu].iter().map(|&p| p / mass));
            } else {
                rows.extend(std::iter::repeat(1.0 / nu as f64).take(nu));
            }
        }
        MarkovKernel::new(nx, nu, rows)
    }

    /// Joint law of `(X_[t], U_[t])` over `X^t x U^t`, flattened
    /// `xprefix * |U|^t + uprefix`.
    pub fn history_marginal(&self, t: usize) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let (nx, nu, horizon) = (self.state_size, self.action_size, self.horizon);
        let nut = index::pow(nu, horizon);
        let upow = index::pow(nu, t);
        let mut hist = vec![0.0; index::pow(nx, t) * upow];
        for (cell, &p) in self.joint.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (x, u) = (cell / nut, cell % nut);
            let xp = index::prefix(x, nx, horizon, t);
            let up = index::prefix(u, nu, horizon, t);
            hist[xp * upow + up] += p;
        }
        Ok(hist)
    }

    /// Marginal law of the action trajectory `U_[T]`.
    pub fn action_law(&self) -> Vec<f64> {
        let nut = index::pow(self.action_size, self.horizon);
        let mut law = vec![0.0; nut];
        for (cell, &p) in self.joint.iter().enumerate() {
            law[cell % nut] += p;
        }
        law
    }

    /// Causal factors `nu_t(u_t | u_[t-1])` of the action-trajectory law.
    pub fn action_factors(&self) -> Vec<MarkovKernel> {
        disintegrate(&self.action_law(), self.action_size, self.horizon)
    }

    /// Mutual information `I(X_[T]; U_[T])` of the full tensor, in nats.
    pub fn joint_mutual_information(&self) -> f64 {
        let nut = index::pow(self.action_size, self.horizon);
        let nxt = index::pow(self.state_size, self.horizon);
        let mux: Vec<f64> = (0..nxt)
            .map(|x| self.joint[x * nut..(x + 1) * nut].iter().sum())
            .collect();
        let nu_law = self.action_law();
        let mut info = 0.0;
        for x in 0..nxt {
            for u in 0..nut {
                let p = self.joint[x * nut + u];
                if p > 0.0 {
                    info += p * (p / (mux[x] * nu_law[u])).ln();
                }
            }
        }
        info
    }

    fn check_time(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizon {
            return Err(CoordError::invalid(format!(
                "time {t} out of range 1..={}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Shannon entropy of a distribution in nats, with 0·log 0 = 0.
pub fn exact_entropy(dist: &Distribution) -> f64 {
    entropy_of(dist.probs())
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Relative entropy `D(p || q)` in nats; +∞ when `p` puts mass where `q`
/// has none.
pub fn relative_entropy(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(CoordError::dim("relative_entropy: length mismatch"));
    }
    let mut d = 0.0;
    for (&pi, &qi) in p.probs().iter().zip(q.probs()) {
        if pi > 0.0 {
            if qi == 0.0 {
                return Ok(f64::INFINITY);
            }
            d += pi * (pi / qi).ln();
        }
    }
    Ok(d)
}

/// Shannon mutual information `I(mu, K) = D(mu ⊗ K || mu ⊗ muK)` in nats.
pub fn mutual_information(mu: &Distribution, k: &MarkovKernel) -> Result<f64> {
    if mu.len() != k.inputs() {
        return Err(CoordError::dim("mutual_information: law size != kernel inputs"));
    }
    let out = k.push_forward(mu)?;
    let mut info = 0.0;
    for (x, &px) in mu.probs().iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        for (y, &kxy) in k.row(x).iter().enumerate() {
            if kxy > 0.0 {
                info += px * kxy * (kxy / out.prob(y)).ln();
            }
        }
    }
    Ok(info)
}

/// Directed information of a (source, policy) pair: the per-step terms
/// `R_t = I(X_[t]; U_t | U_[t-1])` and their sum.
#[derive(Debug, Clone)]
pub struct DirectedInformation {
    pub total: f64,
    pub per_step: Vec<f64>,
}

pub fn directed_information(
    source: &SourceLaw,
    policy: &DirectedKernel,
) -> Result<DirectedInformation> {
    let measure = assemble_strategic_measure(source, policy)?;
    directed_information_of(&measure)
}

pub fn directed_information_of(measure: &StrategicMeasure) -> Result<DirectedInformation> {
    let (nu, horizon) = (measure.action_size(), measure.horizon());
    let mut per_step = Vec::with_capacity(horizon);
    let mut action_prefix_prev: Vec<f64> = vec![1.0];
    for t in 1..=horizon {
        let hist = measure.history_marginal(t)?;
        let upow = index::pow(nu, t);
        // action-prefix marginal at depth t
        let mut action_prefix = vec![0.0; upow];
        for (cell, &p) in hist.iter().enumerate() {
            action_prefix[cell % upow] += p;
        }
        // joint over (x_[t], u_[t-1]) for the conditional's denominator
        let rows = hist.len() / upow;
        let mut hist_minus = vec![0.0; rows * upow / nu];
        for (cell, &p) in hist.iter().enumerate() {
            hist_minus[cell / nu] += p;
        }
        let mut rate = 0.0;
        for (cell, &p) in hist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let up = cell % upow;
            let cond_policy = p / hist_minus[cell / nu];
            let cond_action = action_prefix[up] / action_prefix_prev[up / nu];
            rate += p * (cond_policy / cond_action).ln();
        }
        per_step.push(rate);
        action_prefix_prev = action_prefix;
    }
    Ok(DirectedInformation {
        total: per_step.iter().sum(),
        per_step,
    })
}

/// Table of conditional information densities over blocks of `block_size`
/// independent copies at time `t`.
///
/// Cells are flattened copy-major: with `K = |X|^t * |U|^t` per-copy cells
/// (`cell_n = xprefix_n * |U|^t + uprefix_n`), the block index is
/// `sum_n cell_n * K^(N-1-n)`. Measure-zero cells hold `-inf`.
#[derive(Debug, Clone)]
pub struct InfoDensityTable {
    pub t: usize,
    pub block_size: usize,
    pub per_copy_cells: usize,
    pub values: Vec<f64>,
}

impl InfoDensityTable {
    /// Expectation of the density under the product of `block_size` copies
    /// of `copy_law` (the `(x_[t], u_[t])` history marginal).
    pub fn expectation(&self, copy_law: &[f64]) -> Result<f64> {
        if copy_law.len() != self.per_copy_cells {
            return Err(CoordError::dim("info density expectation: law size mismatch"));
        }
        let mut total = 0.0;
        for (block, &v) in self.values.iter().enumerate() {
            let mut p = 1.0;
            let mut rest = block;
            for _ in 0..self.block_size {
                p *= copy_law[rest % self.per_copy_cells];
                rest /= self.per_copy_cells;
            }
            if p > 0.0 {
                total += p * v;
            }
        }
        Ok(total)
    }
}

/// Enumeration guard for [`info_density`].
pub const INFO_DENSITY_CELL_GUARD: usize = 10_000_000;

/// Conditional information density table at time `t` and block size `n`:
/// the density of a block is the sum of per-copy single-letter densities.
pub fn info_density(
    source: &SourceLaw,
    policy: &DirectedKernel,
    t: usize,
    n: usize,
) -> Result<InfoDensityTable> {
    if n == 0 {
        return Err(CoordError::invalid("block size must be >= 1"));
    }
    let measure = assemble_strategic_measure(source, policy)?;
    if t == 0 || t > measure.horizon() {
        return Err(CoordError::invalid("time out of range"));
    }
    let (nx, nu) = (measure.state_size(), measure.action_size());
    let per_copy_cells = index::pow(nx, t) * index::pow(nu, t);
    let cells = per_copy_cells
        .checked_pow(n as u32)
        .filter(|&c| c <= INFO_DENSITY_CELL_GUARD)
        .ok_or_else(|| {
            CoordError::guard(format!(
                "info density table would exceed {INFO_DENSITY_CELL_GUARD} cells"
            ))
        })?;

    // per-copy density: log of (policy conditional / action conditional)
    let upow = index::pow(nu, t);
    let hist = measure.history_marginal(t)?;
    let mut hist_minus = vec![0.0; hist.len() / nu];
    let mut action_prefix = vec![0.0; upow];
    for (cell, &p) in hist.iter().enumerate() {
        hist_minus[cell / nu] += p;
        action_prefix[cell % upow] += p;
    }
    let mut action_prev = vec![0.0; upow / nu];
    for (up, &p) in action_prefix.iter().enumerate() {
        action_prev[up / nu] += p;
    }
    let per_copy: Vec<f64> = (0..per_copy_cells)
        .map(|cell| {
            let up = cell % upow;
            let cond_policy = if hist_minus[cell / nu] > 0.0 {
                hist[cell] / hist_minus[cell / nu]
            } else {
                1.0 / nu as f64
            };
            let cond_action = if action_prev[up / nu] > 0.0 {
                action_prefix[up] / action_prev[up / nu]
            } else {
                1.0 / nu as f64
            };
            if cond_policy == 0.0 {
                f64::NEG_INFINITY
            } else {
                (cond_policy / cond_action).ln()
            }
        })
        .collect();

    let mut values = vec![0.0; cells];
    for (block, v) in values.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut rest = block;
        for _ in 0..n {
            sum += per_copy[rest % per_copy_cells];
            rest /= per_copy_cells;
        }
        *v = sum;
    }
    Ok(InfoDensityTable {
        t,
        block_size: n,
        per_copy_cells,
        values,
    })
}
