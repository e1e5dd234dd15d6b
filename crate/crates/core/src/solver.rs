//! The sequential rate-distortion function for empirical coordination.
//!
//! `solve_rate` minimizes `I(X_[T]; U_[T]) / T` over causal kernels whose
//! time-averaged seminorm deviation from the target pair marginals is at
//! most Δ. The optimization variable is the full joint conditional law
//! `Q(u_[T] | x_[T])`; causality is a set of linear marginalization
//! constraints on it, so the feasible set is convex and the objective is
//! jointly convex. The solver runs multiplicative (exponentiated-gradient)
//! row updates followed by an exact causal disintegration, handles the
//! distortion constraint through a scalar Lagrange multiplier located by
//! bisection, and certifies its answer with two independent lower bounds:
//! a soft-min dual bound valid without the causality constraints, and a
//! linearization gap computed against a dynamic-programming minimizer over
//! deterministic causal policies.
//!
//! `solve_rate_bruteforce` is the matching grid-search oracle, `kop_bound`
//! the remote test-channel upper bound on R_1(Δ), and `awgn_capacity_avg`
//! / `awgn_capacity_peak` the Gaussian-channel bounds that dominate it.

use crate::error::{CoordError, Result};
use crate::index;
use crate::prob::{
    assemble_strategic_measure, mutual_information, DirectedKernel, Distribution, MarkovKernel,
    SourceLaw,
};
use crate::seminorm::{seminorm_witness, FunctionClass, MetricMatrix};

const FLOOR: f64 = 1e-14;

/// One rate-distortion problem: source, target policy, test-function class,
/// and distortion budget.
#[derive(Debug, Clone)]
pub struct RdInstance {
    source: SourceLaw,
    target: DirectedKernel,
    class: FunctionClass,
    delta: f64,
}

impl RdInstance {
    pub fn new(
        source: SourceLaw,
        target: DirectedKernel,
        class: FunctionClass,
        delta: f64,
    ) -> Result<Self> {
        if source.horizon() != target.horizon() {
            return Err(CoordError::dim("source and target horizons differ"));
        }
        if source.state_size() != target.state_size() {
            return Err(CoordError::dim("source and target state alphabets differ"));
        }
        if !(delta >= 0.0) {
            return Err(CoordError::invalid("delta must be >= 0"));
        }
        let cells = source.state_size() * target.action_size();
        if let Some(want) = class.cells() {
            if want != cells {
                return Err(CoordError::dim(format!(
                    "class expects {want} cells, state-action space has {cells}"
                )));
            }
        }
        Ok(RdInstance {
            source,
            target,
            class,
            delta,
        })
    }

    pub fn source(&self) -> &SourceLaw {
        &self.source
    }

    pub fn target(&self) -> &DirectedKernel {
        &self.target
    }

    pub fn class(&self) -> &FunctionClass {
        &self.class
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Same instance with a different budget.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        RdInstance::new(
            self.source.clone(),
            self.target.clone(),
            self.class.clone(),
            delta,
        )
    }
}

/// Solver diagnostics attached to a solution.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub iterations: u64,
    /// `rate - lower_bound`: how far the returned value could sit above the
    /// true optimum.
    pub residual: f64,
    /// Certified lower bound on R_T(Δ).
    pub lower_bound: f64,
    /// Final Lagrange multiplier of the distortion constraint.
    pub multiplier: f64,
}

#[derive(Debug, Clone)]
pub struct RdSolution {
    /// Nats per time step; a feasible upper bound on R_T(Δ).
    pub rate: f64,
    /// The optimizing causal policy.
    pub policy: DirectedKernel,
    /// Time-averaged seminorm deviation of the returned policy.
    pub achieved_constraint: f64,
    pub report: SolverReport,
}

/// Tunables; the defaults implement the documented stopping rule
/// (stationarity residual <= 1e-7 or 1e5 iterations).
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iters: u64,
    pub stationarity_tol: f64,
    pub inner_iters: u64,
    pub bisection_rounds: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 100_000,
            stationarity_tol: 1e-7,
            inner_iters: 2_000,
            bisection_rounds: 28,
        }
    }
}

/// Time-averaged seminorm deviation of a candidate policy's pair marginals
/// from the target's; the candidate is feasible iff this is <= Δ.
pub fn feasibility_gap(instance: &RdInstance, candidate: &DirectedKernel) -> Result<f64> {
    if candidate.horizon() != instance.source.horizon()
        || candidate.state_size() != instance.source.state_size()
        || candidate.action_size() != instance.target.action_size()
    {
        return Err(CoordError::dim("candidate shape differs from instance"));
    }
    let cand = assemble_strategic_measure(&instance.source, candidate)?;
    let targ = assemble_strategic_measure(&instance.source, &instance.target)?;
    let horizon = instance.source.horizon();
    let mut total = 0.0;
    for t in 1..=horizon {
        let cp = cand.pair_marginal(t)?;
        let tp = targ.pair_marginal(t)?;
        let delta: Vec<f64> = cp.iter().zip(&tp).map(|(a, b)| a - b).collect();
        total += seminorm_witness(&delta, &instance.class)?.0;
    }
    Ok(total / horizon as f64)
}

// ---------------------------------------------------------------------------
// solve_rate internals
// ---------------------------------------------------------------------------

struct Ctx {
    nx: usize,
    nu: usize,
    horizon: usize,
    nxt: usize,
    nut: usize,
    mux: Vec<f64>,
    /// per-time state marginals, each of length nx
    mu_t: Vec<Vec<f64>>,
    /// per-time reference pair measures mu_t ⊗ pi_t, each nx*nu
    target_pairs: Vec<Vec<f64>>,
    /// xdig[t0][xtraj] = x_(t0+1); likewise for actions
    xdig: Vec<Vec<usize>>,
    udig: Vec<Vec<usize>>,
    /// xpre[k][xtraj] = flat prefix of length k
    xpre: Vec<Vec<usize>>,
    upre: Vec<Vec<usize>>,
    class: FunctionClass,
    /// target policy as a joint conditional (always feasible)
    target_q: Vec<f64>,
}

impl Ctx {
    fn new(instance: &RdInstance) -> Result<Self> {
        let source = &instance.source;
        let target = &instance.target;
        let (nx, nu, horizon) = (source.state_size(), target.action_size(), source.horizon());
        let (nxt, nut) = (index::pow(nx, horizon), index::pow(nu, horizon));
        let mux = source.trajectory_law();
        let measure = assemble_strategic_measure(source, target)?;
        let mut mu_t = Vec::with_capacity(horizon);
        let mut target_pairs = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            mu_t.push(measure.marginal_state(t)?.probs().to_vec());
            target_pairs.push(measure.pair_marginal(t)?);
        }
        let xdig = (1..=horizon)
            .map(|t| (0..nxt).map(|x| index::digit(x, nx, horizon, t)).collect())
            .collect();
        let udig = (1..=horizon)
            .map(|t| (0..nut).map(|u| index::digit(u, nu, horizon, t)).collect())
            .collect();
        let xpre = (0..=horizon)
            .map(|k| (0..nxt).map(|x| index::prefix(x, nx, horizon, k)).collect())
            .collect();
        let upre = (0..=horizon)
            .map(|k| (0..nut).map(|u| index::prefix(u, nu, horizon, k)).collect())
            .collect();
        let mut target_q = vec![0.0; nxt * nut];
        for x in 0..nxt {
            for u in 0..nut {
                target_q[x * nut + u] = target.trajectory_prob(x, u);
            }
        }
        Ok(Ctx {
            nx,
            nu,
            horizon,
            nxt,
            nut,
            mux,
            mu_t,
            target_pairs,
            xdig,
            udig,
            xpre,
            upre,
            class: instance.class.clone(),
            target_q,
        })
    }

    fn pair_marginal(&self, q: &[f64], t0: usize) -> Vec<f64> {
        let mut pair = vec![0.0; self.nx * self.nu];
        for x in 0..self.nxt {
            let w = self.mux[x];
            if w == 0.0 {
                continue;
            }
            let xd = self.xdig[t0][x];
            for u in 0..self.nut {
                pair[xd * self.nu + self.udig[t0][u]] += w * q[x * self.nut + u];
            }
        }
        pair
    }

    /// Distortion with per-time maximizing witnesses (sign-folded).
    fn distortion(&self, q: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut total = 0.0;
        let mut witnesses = Vec::with_capacity(self.horizon);
        for t0 in 0..self.horizon {
            let pair = self.pair_marginal(q, t0);
            let delta: Vec<f64> = pair
                .iter()
                .zip(&self.target_pairs[t0])
                .map(|(a, b)| a - b)
                .collect();
            let (v, w) = seminorm_witness(&delta, &self.class)?;
            total += v;
            witnesses.push(w);
        }
        Ok((total / self.horizon as f64, witnesses))
    }

    fn output_law(&self, q: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.nut];
        for x in 0..self.nxt {
            let w = self.mux[x];
            if w == 0.0 {
                continue;
            }
            for u in 0..self.nut {
                m[u] += w * q[x * self.nut + u];
            }
        }
        m
    }

    fn mutual_info(&self, q: &[f64]) -> f64 {
        let m = self.output_law(q);
        let mut info = 0.0;
        for x in 0..self.nxt {
            let w = self.mux[x];
            if w == 0.0 {
                continue;
            }
            for u in 0..self.nut {
                let quv = q[x * self.nut + u];
                if quv > 0.0 && m[u] > 0.0 {
                    info += w * quv * (quv / m[u]).ln();
                }
            }
        }
        info.max(0.0)
    }

    /// (objective, distortion, normalized information, witnesses) at `q`.
    fn objective(&self, q: &[f64], lambda: f64) -> Result<(f64, f64, f64, Vec<Vec<f64>>)> {
        let info = self.mutual_info(q) / self.horizon as f64;
        let (d, wit) = self.distortion(q)?;
        Ok((info + lambda * d, d, info, wit))
    }

    /// Row-natural gradient (the mux factor divided out) of
    /// `I/T + lambda * (linearized distortion)` at `q`.
    fn row_gradient(&self, q: &[f64], lambda: f64, witnesses: &[Vec<f64>]) -> Vec<f64> {
        let m = self.output_law(q);
        let t_inv = 1.0 / self.horizon as f64;
        let mut g = vec![0.0; self.nxt * self.nut];
        for x in 0..self.nxt {
            for u in 0..self.nut {
                let quv = q[x * self.nut + u].max(FLOOR);
                let mut lin = 0.0;
                for t0 in 0..self.horizon {
                    lin += witnesses[t0][self.xdig[t0][x] * self.nu + self.udig[t0][u]];
                }
                g[x * self.nut + u] = t_inv * ((quv / m[u].max(FLOOR)).ln() + lambda * lin);
            }
        }
        g
    }

    /// Exact causal disintegration of mu ⊗ q; the identity on causal q.
    fn causalize(&self, q: &[f64]) -> Vec<f64> {
        if self.horizon == 1 {
            return q.to_vec();
        }
        let factors = self.causal_factor_rows(q);
        let mut out = vec![0.0; self.nxt * self.nut];
        for x in 0..self.nxt {
            for u in 0..self.nut {
                let mut p = 1.0;
                for t in 1..=self.horizon {
                    let row = self.xpre[t][x] * index::pow(self.nu, t - 1) + self.upre[t - 1][u];
                    let ut = self.udig[t - 1][u];
                    p *= factors[t - 1][row * self.nu + ut];
                }
                out[x * self.nut + u] = p;
            }
        }
        out
    }

    /// Conditional laws of u_t given (x_[t], u_[t-1]) under mu ⊗ q as raw
    /// row-major tables; zero-mass histories get uniform rows.
    fn causal_factor_rows(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let (nx, nu, horizon) = (self.nx, self.nu, self.horizon);
        let mut factors = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let xp = index::pow(nx, t);
            let up = index::pow(nu, t);
            let mut hist = vec![0.0; xp * up];
            for x in 0..self.nxt {
                let w = self.mux[x];
                if w == 0.0 {
                    continue;
                }
                let xh = self.xpre[t][x];
                for u in 0..self.nut {
                    hist[xh * up + self.upre[t][u]] += w * q[x * self.nut + u];
                }
            }
            let rows_n = xp * up / nu;
            let mut rows = vec![0.0; rows_n * nu];
            for r in 0..rows_n {
                let mass: f64 = hist[r * nu..(r + 1) * nu].iter().sum();
                if mass > 0.0 {
                    for s in 0..nu {
                        rows[r * nu + s] = hist[r * nu + s] / mass;
                    }
                } else {
                    for s in 0..nu {
                        rows[r * nu + s] = 1.0 / nu as f64;
                    }
                }
            }
            factors.push(rows);
        }
        factors
    }

    fn policy_from(&self, q: &[f64]) -> Result<DirectedKernel> {
        let rowsets = self.causal_factor_rows(q);
        let mut factors = Vec::with_capacity(self.horizon);
        for (t0, rows) in rowsets.into_iter().enumerate() {
            let inputs = index::pow(self.nx, t0 + 1) * index::pow(self.nu, t0);
            factors.push(MarkovKernel::new(
                inputs,
                self.nu,
                normalize_rows(rows, self.nu),
            )?);
        }
        DirectedKernel::new(self.nx, self.nu, factors)
    }

    /// `min over causal Q' of <g, Q'>` by backward induction over
    /// deterministic causal policies; returns the value and the minimizing
    /// vertex.
    fn causal_linear_min(&self, g: &[f64]) -> (f64, Vec<f64>) {
        let (nx, nu, horizon) = (self.nx, self.nu, self.horizon);
        // choices[t0][(xprefix_{t0+1}, uprefix_t0)] = minimizing u_(t0+1)
        let mut choices: Vec<Vec<usize>> = Vec::with_capacity(horizon);
        let mut a: Vec<f64> = g.to_vec();
        for t in (1..=horizon).rev() {
            let xp = index::pow(nx, t);
            let up = index::pow(nu, t);
            debug_assert_eq!(a.len(), xp * up);
            let rows = xp * up / nu;
            let mut b = vec![0.0; rows];
            let mut choice = vec![0usize; rows];
            for r in 0..rows {
                let (mut best, mut arg) = (f64::INFINITY, 0usize);
                for s in 0..nu {
                    let v = a[r * nu + s];
                    if v < best {
                        best = v;
                        arg = s;
                    }
                }
                b[r] = best;
                choice[r] = arg;
            }
            choices.push(choice);
            // sum out x_t: b is indexed by (xprefix_t, uprefix_{t-1})
            let up1 = up / nu;
            let mut next = vec![0.0; (xp / nx) * up1];
            for xh in 0..xp {
                for uh in 0..up1 {
                    next[(xh / nx) * up1 + uh] += b[xh * up1 + uh];
                }
            }
            a = next;
        }
        choices.reverse();
        let value = a[0];

        let mut vertex = vec![0.0; self.nxt * self.nut];
        for x in 0..self.nxt {
            let mut uflat = 0usize;
            for t in 1..=horizon {
                let row = self.xpre[t][x] * index::pow(nu, t - 1) + uflat;
                uflat = uflat * nu + choices[t - 1][row];
            }
            vertex[x * self.nut + uflat] = 1.0;
        }
        (value, vertex)
    }

    /// Soft-min dual bound on `min over all row-stochastic Q' of
    /// I/T + lambda * D`, valid for any reference output law and any
    /// in-class witnesses. Tight at T = 1; a relaxation (no causality)
    /// for T > 1.
    fn softmin_bound(&self, lambda: f64, m_ref: &[f64], witnesses: &[Vec<f64>]) -> f64 {
        let t_f = self.horizon as f64;
        let mut c0 = 0.0;
        for t0 in 0..self.horizon {
            c0 += self.target_pairs[t0]
                .iter()
                .zip(&witnesses[t0])
                .map(|(p, f)| p * f)
                .sum::<f64>();
        }
        c0 /= t_f;
        let mut total = 0.0;
        let mut terms = vec![0.0; self.nut];
        for x in 0..self.nxt {
            let w = self.mux[x];
            if w == 0.0 {
                continue;
            }
            let mut max = f64::NEG_INFINITY;
            for u in 0..self.nut {
                let mut lin = 0.0;
                for t0 in 0..self.horizon {
                    lin += witnesses[t0][self.xdig[t0][x] * self.nu + self.udig[t0][u]];
                }
                let term = m_ref[u].max(FLOOR).ln() - lambda * lin;
                terms[u] = term;
                max = max.max(term);
            }
            let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
            total += w * (-lse) / t_f;
        }
        total - lambda * c0
    }
}

fn normalize_rows(mut rows: Vec<f64>, width: usize) -> Vec<f64> {
    for chunk in rows.chunks_mut(width) {
        for v in chunk.iter_mut() {
            *v = v.max(0.0);
        }
        let s: f64 = chunk.iter().sum();
        if s > 0.0 {
            for v in chunk.iter_mut() {
                *v /= s;
            }
        } else {
            for v in chunk.iter_mut() {
                *v = 1.0 / width as f64;
            }
        }
    }
    rows
}

fn floor_rows(q: &mut [f64], width: usize) {
    for chunk in q.chunks_mut(width) {
        let mut s = 0.0;
        for v in chunk.iter_mut() {
            *v = v.max(FLOOR);
            s += *v;
        }
        for v in chunk.iter_mut() {
            *v /= s;
        }
    }
}

fn mix(a: &[f64], b: &[f64], theta: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - theta) * x + theta * y)
        .collect()
}

struct InnerOutcome {
    q: Vec<f64>,
    objective: f64,
    distortion: f64,
    info: f64,
    lower_bound: f64,
    iterations: u64,
}

/// Minimize `I/T + lambda * D` over causal kernels: exponentiated-gradient
/// steps with backtracking, causal reprojection, and a vertex line-search
/// polish, plus a certified lower bound on the inner minimum.
fn inner_solve(
    ctx: &Ctx,
    lambda: f64,
    start: &[f64],
    budget: u64,
    tol: f64,
) -> Result<InnerOutcome> {
    let mut q = start.to_vec();
    floor_rows(&mut q, ctx.nut);
    let (mut f_cur, d0, i0, mut wit) = ctx.objective(&q, lambda)?;
    let mut best = InnerOutcome {
        q: q.clone(),
        objective: f_cur,
        distortion: d0,
        info: i0,
        lower_bound: f64::NEG_INFINITY,
        iterations: 0,
    };
    let mut eta = 0.5;
    let mut iters = 0u64;
    while iters < budget {
        iters += 1;
        let g = ctx.row_gradient(&q, lambda, &wit);
        let mut cand = vec![0.0; q.len()];
        for x in 0..ctx.nxt {
            let row = &q[x * ctx.nut..(x + 1) * ctx.nut];
            let grow = &g[x * ctx.nut..(x + 1) * ctx.nut];
            let gmin = grow.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut s = 0.0;
            for u in 0..ctx.nut {
                let v = row[u] * (-eta * (grow[u] - gmin)).exp();
                cand[x * ctx.nut + u] = v;
                s += v;
            }
            for u in 0..ctx.nut {
                cand[x * ctx.nut + u] /= s;
            }
        }
        let mut cand = ctx.causalize(&cand);
        floor_rows(&mut cand, ctx.nut);
        let (f_new, d_new, i_new, wit_new) = ctx.objective(&cand, lambda)?;
        if f_new <= f_cur + 1e-15 {
            q = cand;
            f_cur = f_new;
            wit = wit_new;
            eta = (eta * 1.3).min(8.0);
            if f_cur < best.objective {
                best.q = q.clone();
                best.objective = f_cur;
                best.distortion = d_new;
                best.info = i_new;
            }
        } else {
            eta *= 0.5;
            if eta < 1e-7 {
                break;
            }
            continue;
        }
        if iters % 250 == 0 {
            if vertex_polish(ctx, lambda, &mut q, &mut f_cur)? {
                let (f2, d2, i2, wit2) = ctx.objective(&q, lambda)?;
                f_cur = f2;
                wit = wit2;
                if f_cur < best.objective {
                    best.q = q.clone();
                    best.objective = f_cur;
                    best.distortion = d2;
                    best.info = i2;
                }
            }
            let lb = certificate(ctx, lambda, &q, f_cur, &wit);
            best.lower_bound = best.lower_bound.max(lb);
            if best.objective - best.lower_bound <= tol {
                break;
            }
        }
    }
    let (f_fin, _, _, wit_fin) = ctx.objective(&best.q, lambda)?;
    let lb = certificate(ctx, lambda, &best.q, f_fin, &wit_fin);
    best.lower_bound = best.lower_bound.max(lb);
    best.iterations = iters;
    Ok(best)
}

/// One Frank–Wolfe-style line search toward the causal vertex minimizing
/// the current linearization; monotone.
fn vertex_polish(ctx: &Ctx, lambda: f64, q: &mut Vec<f64>, f_cur: &mut f64) -> Result<bool> {
    let (_, _, _, wit) = ctx.objective(q, lambda)?;
    let mut gfull = ctx.row_gradient(q, lambda, &wit);
    for x in 0..ctx.nxt {
        for u in 0..ctx.nut {
            gfull[x * ctx.nut + u] *= ctx.mux[x];
        }
    }
    let (_, vertex) = ctx.causal_linear_min(&gfull);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..40 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        let fa = ctx.objective(&mix(q, &vertex, a), lambda)?.0;
        let fb = ctx.objective(&mix(q, &vertex, b), lambda)?.0;
        if fa <= fb {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mut cand = mix(q, &vertex, 0.5 * (lo + hi));
    floor_rows(&mut cand, ctx.nut);
    let f_new = ctx.objective(&cand, lambda)?.0;
    if f_new < *f_cur - 1e-15 {
        *q = cand;
        *f_cur = f_new;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Certified lower bound on `min over causal Q of I/T + lambda D`: the
/// better of the soft-min dual bound and the linearization bound through
/// the causal vertex oracle.
fn certificate(ctx: &Ctx, lambda: f64, q: &[f64], f_at_q: f64, witnesses: &[Vec<f64>]) -> f64 {
    let m_ref = ctx.output_law(q);
    let soft = ctx.softmin_bound(lambda, &m_ref, witnesses);
    let mut gfull = ctx.row_gradient(q, lambda, witnesses);
    let mut g_dot_q = 0.0;
    for x in 0..ctx.nxt {
        for u in 0..ctx.nut {
            gfull[x * ctx.nut + u] *= ctx.mux[x];
            g_dot_q += gfull[x * ctx.nut + u] * q[x * ctx.nut + u];
        }
    }
    let (lin_min, _) = ctx.causal_linear_min(&gfull);
    soft.max(f_at_q + lin_min - g_dot_q)
}

/// Minimize the distortion over state-independent policies; returns the
/// action-trajectory law and its distortion value.
fn best_constant_law(ctx: &Ctx) -> Result<(Vec<f64>, f64)> {
    let nut = ctx.nut;
    let dist_of = |law: &[f64]| -> Result<(f64, Vec<Vec<f64>>)> {
        let mut total = 0.0;
        let mut wits = Vec::with_capacity(ctx.horizon);
        for t0 in 0..ctx.horizon {
            let mut qt = vec![0.0; ctx.nu];
            for u in 0..nut {
                qt[ctx.udig[t0][u]] += law[u];
            }
            let mut pair = vec![0.0; ctx.nx * ctx.nu];
            for x in 0..ctx.nx {
                for s in 0..ctx.nu {
                    pair[x * ctx.nu + s] = ctx.mu_t[t0][x] * qt[s];
                }
            }
            let delta: Vec<f64> = pair
                .iter()
                .zip(&ctx.target_pairs[t0])
                .map(|(a, b)| a - b)
                .collect();
            let (v, w) = seminorm_witness(&delta, &ctx.class)?;
            total += v;
            wits.push(w);
        }
        Ok((total / ctx.horizon as f64, wits))
    };

    // start from the target's own action law
    let mut law = vec![0.0; nut];
    for x in 0..ctx.nxt {
        for u in 0..nut {
            law[u] += ctx.mux[x] * ctx.target_q[x * nut + u];
        }
    }
    let (mut d_cur, mut wit) = dist_of(&law)?;
    let mut eta = 0.5;
    for iter in 0..4000 {
        let mut g = vec![0.0; nut];
        for (u, gu) in g.iter_mut().enumerate() {
            let mut acc = 0.0;
            for t0 in 0..ctx.horizon {
                let s = ctx.udig[t0][u];
                for x in 0..ctx.nx {
                    acc += ctx.mu_t[t0][x] * wit[t0][x * ctx.nu + s];
                }
            }
            *gu = acc / ctx.horizon as f64;
        }
        let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut cand: Vec<f64> = law
            .iter()
            .zip(&g)
            .map(|(l, gv)| l.max(FLOOR) * (-eta * (gv - gmin)).exp())
            .collect();
        let s: f64 = cand.iter().sum();
        for v in cand.iter_mut() {
            *v /= s;
        }
        let (d_new, wit_new) = dist_of(&cand)?;
        if d_new <= d_cur {
            law = cand;
            d_cur = d_new;
            wit = wit_new;
            eta = (eta * 1.2).min(4.0);
        } else {
            eta *= 0.5;
            if eta < 1e-9 {
                break;
            }
        }
        // line search toward the subgradient-minimizing vertex
        if iter % 200 == 199 {
            let arg = g
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            let mut vertex = vec![0.0; nut];
            vertex[arg] = 1.0;
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..30 {
                let a = lo + (hi - lo) / 3.0;
                let b = hi - (hi - lo) / 3.0;
                if dist_of(&mix(&law, &vertex, a))?.0 <= dist_of(&mix(&law, &vertex, b))?.0 {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            let cand = mix(&law, &vertex, 0.5 * (lo + hi));
            let (d_new, wit_new) = dist_of(&cand)?;
            if d_new < d_cur {
                law = cand;
                d_cur = d_new;
                wit = wit_new;
            }
        }
    }
    Ok((law, d_cur))
}

fn constant_q(ctx: &Ctx, law: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; ctx.nxt * ctx.nut];
    for x in 0..ctx.nxt {
        q[x * ctx.nut..(x + 1) * ctx.nut].copy_from_slice(law);
    }
    q
}

/// Compute R_T(Δ) with default options.
pub fn solve_rate(instance: &RdInstance) -> Result<RdSolution> {
    solve_rate_with(instance, &SolverOptions::default())
}

pub fn solve_rate_with(instance: &RdInstance, opts: &SolverOptions) -> Result<RdSolution> {
    let ctx = Ctx::new(instance)?;
    let delta = instance.delta;
    let mut iterations = 0u64;

    // a state-independent policy within budget means the rate is zero
    let (const_law, const_d) = best_constant_law(&ctx)?;
    if const_d <= delta {
        let policy = DirectedKernel::state_independent(ctx.nx, ctx.nu, ctx.horizon, &const_law)?;
        return Ok(RdSolution {
            rate: 0.0,
            policy,
            achieved_constraint: const_d,
            report: SolverReport {
                iterations: 0,
                residual: 0.0,
                lower_bound: 0.0,
                multiplier: 0.0,
            },
        });
    }

    // Δ = 0 under the sup-norm ball pins the pair marginals mu-a.s.;
    // at T = 1 every feasible kernel has the target's information
    if delta == 0.0 && ctx.horizon == 1 && matches!(ctx.class, FunctionClass::TotalVariation) {
        let mu1 = Distribution::new(ctx.mu_t[0].clone())?;
        let rate = mutual_information(&mu1, instance.target.factor(1))?;
        return Ok(RdSolution {
            rate,
            policy: instance.target.clone(),
            achieved_constraint: 0.0,
            report: SolverReport {
                iterations: 0,
                residual: 0.0,
                lower_bound: rate,
                multiplier: f64::INFINITY,
            },
        });
    }

    // feasible incumbent: the target policy itself (distortion 0)
    let mut best_q = ctx.target_q.clone();
    let mut best_info = ctx.mutual_info(&best_q) / ctx.horizon as f64;
    let mut best_d = 0.0f64;
    let mut best_lb = 0.0f64;
    let mut final_lambda = 0.0f64;

    let record = |out: &InnerOutcome, best_q: &mut Vec<f64>, best_info: &mut f64, best_d: &mut f64| {
        if out.distortion <= delta && out.info < *best_info {
            *best_q = out.q.clone();
            *best_info = out.info;
            *best_d = out.distortion;
        }
    };

    let mut starts: Vec<Vec<f64>> = vec![mix(&ctx.target_q, &constant_q(&ctx, &const_law), 0.5)];
    if ctx.horizon > 1 {
        starts.push(ctx.target_q.clone());
        starts.push(constant_q(&ctx, &const_law));
    }

    'starts: for start in &starts {
        let mut warm = start.clone();
        let mut lambda_lo = 0.0f64;
        let mut lambda_hi = 1.0f64;
        let mut bracketed = false;
        for _ in 0..48 {
            let out = inner_solve(&ctx, lambda_hi, &warm, opts.inner_iters, opts.stationarity_tol)?;
            iterations += out.iterations;
            warm = out.q.clone();
            best_lb = best_lb.max(out.lower_bound - lambda_hi * delta);
            record(&out, &mut best_q, &mut best_info, &mut best_d);
            if out.distortion <= delta {
                bracketed = true;
                break;
            }
            lambda_lo = lambda_hi;
            lambda_hi *= 4.0;
            if iterations >= opts.max_iters {
                break;
            }
        }
        if !bracketed {
            // delta sits at the equality boundary; keep the incumbent
            continue 'starts;
        }
        for _ in 0..opts.bisection_rounds {
            if iterations >= opts.max_iters {
                break;
            }
            if (lambda_hi - lambda_lo) <= 1e-9 * lambda_hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lambda_lo + lambda_hi);
            let out = inner_solve(&ctx, mid, &warm, opts.inner_iters, opts.stationarity_tol)?;
            iterations += out.iterations;
            warm = out.q.clone();
            best_lb = best_lb.max(out.lower_bound - mid * delta);
            if out.distortion <= delta {
                record(&out, &mut best_q, &mut best_info, &mut best_d);
                lambda_hi = mid;
                if delta - out.distortion <= 1e-9 {
                    break;
                }
            } else {
                lambda_lo = mid;
            }
        }
        final_lambda = lambda_hi;
        if iterations >= opts.max_iters {
            break 'starts;
        }
    }

    let rate = best_info.max(0.0);
    let lower_bound = best_lb.max(0.0).min(rate);
    let policy = ctx.policy_from(&best_q)?;
    let achieved = feasibility_gap(instance, &policy)?;
    Ok(RdSolution {
        rate,
        policy,
        achieved_constraint: achieved,
        report: SolverReport {
            iterations,
            residual: (rate - lower_bound).max(0.0),
            lower_bound,
            multiplier: final_lambda,
        },
    })
}

// ---------------------------------------------------------------------------
// brute-force oracle
// ---------------------------------------------------------------------------

/// Guard on the number of grid kernels the oracle may enumerate.
pub const BRUTEFORCE_GUARD: u128 = 10_000_000;

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Minimum objective over feasible grid kernels; upper-bounds R_T(Δ).
    pub value: f64,
    /// Lexicographically smallest kernel among grid points within 1e-12 of
    /// the minimum.
    pub argmin: DirectedKernel,
    /// Reported estimate of the objective variation across one grid cell.
    pub modulus: f64,
}

/// Exhaustive minimization over causal kernels whose factor rows lie on the
/// simplex grid with the given step. This is the independent oracle for
/// [`solve_rate`]: it evaluates the information through the assembled
/// strategic measure rather than the solver's internals.
pub fn solve_rate_bruteforce(instance: &RdInstance, grid_step: f64) -> Result<BruteForceResult> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(CoordError::invalid("grid step must be in (0, 1]"));
    }
    let denom = (1.0 / grid_step).round() as usize;
    if denom == 0 || ((1.0 / grid_step) - denom as f64).abs() > 1e-9 {
        return Err(CoordError::invalid("grid step must divide 1"));
    }
    let source = &instance.source;
    let target = &instance.target;
    let (nx, nu, horizon) = (source.state_size(), target.action_size(), source.horizon());

    let row_options = compositions(denom, nu);
    let mut total_rows = 0usize;
    for t0 in 0..horizon {
        total_rows += index::pow(nx, t0 + 1) * index::pow(nu, t0);
    }
    let mut count: u128 = 1;
    for _ in 0..total_rows {
        count = count.saturating_mul(row_options.len() as u128);
        if count > BRUTEFORCE_GUARD {
            return Err(CoordError::guard(format!(
                "grid would enumerate more than {BRUTEFORCE_GUARD} kernels"
            )));
        }
    }

    let targ = assemble_strategic_measure(source, target)?;
    let mut target_pairs = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        target_pairs.push(targ.pair_marginal(t)?);
    }

    // odometer over rows, first row most significant: kernels are visited
    // in lexicographic order of the flattened probability vector
    let mut odo = vec![0usize; total_rows];
    let mut best_value = f64::INFINITY;
    let mut argmin: Option<(Vec<usize>, f64)> = None;
    loop {
        let policy = build_policy(nx, nu, horizon, &row_options, &odo, denom)?;
        let measure = assemble_strategic_measure(source, &policy)?;
        let mut d = 0.0;
        for t in 1..=horizon {
            let pair = measure.pair_marginal(t)?;
            let delta: Vec<f64> = pair
                .iter()
                .zip(&target_pairs[t - 1])
                .map(|(a, b)| a - b)
                .collect();
            d += seminorm_witness(&delta, &instance.class)?.0;
        }
        d /= horizon as f64;
        if d <= instance.delta {
            let value = measure.joint_mutual_information() / horizon as f64;
            if value < best_value {
                best_value = value;
            }
            match &argmin {
                Some((_, held)) if value >= held - 1e-12 => {}
                _ => argmin = Some((odo.clone(), value)),
            }
        }
        if !advance(&mut odo, row_options.len()) {
            break;
        }
    }

    let (arg_odo, _) =
        argmin.ok_or_else(|| CoordError::NumericFailure("no feasible grid kernel".into()))?;
    let argmin = build_policy(nx, nu, horizon, &row_options, &arg_odo, denom)?;
    // every entry of a rounded kernel moves by at most step/2; the entropy
    // terms vary at most like ln(1/step) per unit of entry movement
    let entries = (total_rows * nu) as f64;
    let modulus = 0.5 * grid_step * entries * (1.0 / grid_step).ln();
    Ok(BruteForceResult {
        value: best_value,
        argmin,
        modulus,
    })
}

fn advance(odo: &mut [usize], radix: usize) -> bool {
    for pos in (0..odo.len()).rev() {
        odo[pos] += 1;
        if odo[pos] < radix {
            return true;
        }
        odo[pos] = 0;
    }
    false
}

fn build_policy(
    nx: usize,
    nu: usize,
    horizon: usize,
    options: &[Vec<usize>],
    odo: &[usize],
    denom: usize,
) -> Result<DirectedKernel> {
    let mut factors = Vec::with_capacity(horizon);
    let mut cursor = 0usize;
    for t0 in 0..horizon {
        let rows_n = index::pow(nx, t0 + 1) * index::pow(nu, t0);
        let mut rows = Vec::with_capacity(rows_n * nu);
        for r in 0..rows_n {
            let comp = &options[odo[cursor + r]];
            rows.extend(comp.iter().map(|&c| c as f64 / denom as f64));
        }
        cursor += rows_n;
        factors.push(MarkovKernel::new(rows_n, nu, rows)?);
    }
    DirectedKernel::new(nx, nu, factors)
}

/// All length-`parts` vectors of nonnegative integers summing to `total`,
/// ascending lexicographic.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=total {
            prefix.push(c);
            rec(total - c, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::new(), &mut out);
    out
}

// ---------------------------------------------------------------------------
// remote test-channel bound
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct KopBound {
    /// Feasible value of `min I(X; U_hat) : E d(U, U_hat) <= delta`.
    pub value: f64,
    pub achieved_distortion: f64,
    pub test_channel: MarkovKernel,
    pub iterations: u64,
}

/// Upper bound on R_1(Δ) through a test channel on the action: minimize
/// `I(X; U_hat)` over channels `P(U_hat | U)` with expected action
/// distortion at most Δ. The class must satisfy the uniform Lipschitz
/// premise for the metric — asserted by the caller, checkable for
/// finite-table classes via [`uniform_lipschitz_holds`].
pub fn kop_bound(
    mu: &Distribution,
    policy: &MarkovKernel,
    action_metric: &MetricMatrix,
    delta: f64,
) -> Result<KopBound> {
    if mu.len() != policy.inputs() {
        return Err(CoordError::dim("kop_bound: source and policy disagree"));
    }
    let nu = policy.outputs();
    if action_metric.len() != nu {
        return Err(CoordError::dim("kop_bound: metric must live on the action space"));
    }
    if !(delta >= 0.0) {
        return Err(CoordError::invalid("delta must be >= 0"));
    }
    let nx = mu.len();
    let mut p_u = vec![0.0; nu];
    for x in 0..nx {
        for u in 0..nu {
            p_u[u] += mu.prob(x) * policy.prob(x, u);
        }
    }

    // constant test channel
    let (best_const, best_cost) = (0..nu)
        .map(|uh| {
            (
                uh,
                (0..nu)
                    .map(|u| p_u[u] * action_metric.dist(u, uh))
                    .sum::<f64>(),
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if best_cost <= delta {
        let point = Distribution::point_mass(nu, best_const);
        return Ok(KopBound {
            value: 0.0,
            achieved_distortion: best_cost,
            test_channel: MarkovKernel::constant(nu, &point),
            iterations: 0,
        });
    }
    // delta = 0 with a genuine metric forces the identity channel on the
    // support of the action marginal
    if delta == 0.0 {
        return Ok(KopBound {
            value: mutual_information(mu, policy)?,
            achieved_distortion: 0.0,
            test_channel: MarkovKernel::identity(nu),
            iterations: 0,
        });
    }

    let ctx = KopCtx {
        nx,
        nu,
        mu: mu.probs().to_vec(),
        policy: policy.clone(),
        p_u,
        metric: action_metric.clone(),
    };
    let mut warm = vec![0.0; nu * nu];
    for r in 0..nu {
        for c in 0..nu {
            warm[r * nu + c] = if r == c {
                0.9
            } else {
                0.1 / (nu - 1).max(1) as f64
            };
        }
    }
    let mut iterations = 0u64;
    let mut lambda_lo = 0.0f64;
    let mut lambda_hi = 1.0f64;
    let ident = {
        let mut w = vec![0.0; nu * nu];
        for i in 0..nu {
            w[i * nu + i] = 1.0;
        }
        w
    };
    let mut feasible: (Vec<f64>, f64, f64) = (ident, mutual_information(mu, policy)?, 0.0);
    let mut bracketed = false;
    for _ in 0..48 {
        let (wq, info, dist, it) = ctx.inner(lambda_hi, &warm, 2000)?;
        iterations += it;
        warm = wq.clone();
        if dist <= delta {
            if info < feasible.1 {
                feasible = (wq, info, dist);
            }
            bracketed = true;
            break;
        }
        lambda_lo = lambda_hi;
        lambda_hi *= 4.0;
    }
    if bracketed {
        for _ in 0..40 {
            if (lambda_hi - lambda_lo) <= 1e-9 * lambda_hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lambda_lo + lambda_hi);
            let (wq, info, dist, it) = ctx.inner(mid, &warm, 2000)?;
            iterations += it;
            warm = wq.clone();
            if dist <= delta {
                if info < feasible.1 {
                    feasible = (wq, info, dist);
                }
                lambda_hi = mid;
            } else {
                lambda_lo = mid;
            }
        }
    }
    let (wq, info, dist) = feasible;
    Ok(KopBound {
        value: info.max(0.0),
        achieved_distortion: dist,
        test_channel: MarkovKernel::new(nu, nu, normalize_rows(wq, nu))?,
        iterations,
    })
}

struct KopCtx {
    nx: usize,
    nu: usize,
    mu: Vec<f64>,
    policy: MarkovKernel,
    p_u: Vec<f64>,
    metric: MetricMatrix,
}

impl KopCtx {
    fn eval(&self, w: &[f64]) -> (f64, f64) {
        let nu = self.nu;
        let mut chan = vec![0.0; self.nx * nu];
        let mut m = vec![0.0; nu];
        for x in 0..self.nx {
            for u in 0..nu {
                let pu = self.policy.prob(x, u);
                if pu == 0.0 {
                    continue;
                }
                for uh in 0..nu {
                    chan[x * nu + uh] += pu * w[u * nu + uh];
                }
            }
            for uh in 0..nu {
                m[uh] += self.mu[x] * chan[x * nu + uh];
            }
        }
        let mut info = 0.0;
        for x in 0..self.nx {
            if self.mu[x] == 0.0 {
                continue;
            }
            for uh in 0..nu {
                let c = chan[x * nu + uh];
                if c > 0.0 && m[uh] > 0.0 {
                    info += self.mu[x] * c * (c / m[uh]).ln();
                }
            }
        }
        let mut dist = 0.0;
        for u in 0..nu {
            for uh in 0..nu {
                dist += self.p_u[u] * w[u * nu + uh] * self.metric.dist(u, uh);
            }
        }
        (info.max(0.0), dist)
    }

    fn gradient(&self, w: &[f64], lambda: f64) -> Vec<f64> {
        let nu = self.nu;
        let mut chan = vec![0.0; self.nx * nu];
        let mut m = vec![0.0; nu];
        for x in 0..self.nx {
            for u in 0..nu {
                let pu = self.policy.prob(x, u);
                for uh in 0..nu {
                    chan[x * nu + uh] += pu * w[u * nu + uh];
                }
            }
            for uh in 0..nu {
                m[uh] += self.mu[x] * chan[x * nu + uh];
            }
        }
        let mut g = vec![0.0; nu * nu];
        for u in 0..nu {
            for uh in 0..nu {
                let mut acc = 0.0;
                for x in 0..self.nx {
                    let pxu = self.mu[x] * self.policy.prob(x, u);
                    if pxu > 0.0 {
                        acc += pxu * (chan[x * nu + uh].max(FLOOR) / m[uh].max(FLOOR)).ln();
                    }
                }
                let row_w = self.p_u[u].max(FLOOR);
                g[u * nu + uh] = acc / row_w + lambda * self.metric.dist(u, uh);
            }
        }
        g
    }

    fn inner(&self, lambda: f64, start: &[f64], budget: u64) -> Result<(Vec<f64>, f64, f64, u64)> {
        let nu = self.nu;
        let mut w = start.to_vec();
        floor_rows(&mut w, nu);
        let (mut info, mut dist) = self.eval(&w);
        let mut f_cur = info + lambda * dist;
        let mut eta = 0.5;
        let mut it = 0u64;
        while it < budget {
            it += 1;
            let g = self.gradient(&w, lambda);
            let mut cand = vec![0.0; nu * nu];
            for u in 0..nu {
                let gmin = g[u * nu..(u + 1) * nu]
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                let mut s = 0.0;
                for uh in 0..nu {
                    let v = w[u * nu + uh].max(FLOOR) * (-eta * (g[u * nu + uh] - gmin)).exp();
                    cand[u * nu + uh] = v;
                    s += v;
                }
                for uh in 0..nu {
                    cand[u * nu + uh] /= s;
                }
            }
            let (i_new, d_new) = self.eval(&cand);
            let f_new = i_new + lambda * d_new;
            if f_new <= f_cur + 1e-15 {
                w = cand;
                info = i_new;
                dist = d_new;
                f_cur = f_new;
                eta = (eta * 1.3).min(8.0);
            } else {
                eta *= 0.5;
                if eta < 1e-8 {
                    break;
                }
            }
        }
        Ok((w, info, dist, it))
    }
}

/// Check the uniform Lipschitz premise
/// `sup_x |f(x,u) - f(x,u')| <= d(u,u')` for a finite-table class.
pub fn uniform_lipschitz_holds(
    tables: &[Vec<f64>],
    nx: usize,
    nu: usize,
    metric: &MetricMatrix,
) -> bool {
    for f in tables {
        for u in 0..nu {
            for v in 0..nu {
                if u == v {
                    continue;
                }
                for x in 0..nx {
                    if (f[x * nu + u] - f[x * nu + v]).abs() > metric.dist(u, v) + 1e-12 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// AWGN capacities
// ---------------------------------------------------------------------------

/// AWGN capacity under an average power constraint: `(1/2) ln(1+s)` nats.
pub fn awgn_capacity_avg(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(CoordError::invalid("snr must be >= 0"));
    }
    Ok(0.5 * s.ln_1p())
}

/// Discretization of the peak-power capacity problem.
#[derive(Debug, Clone)]
pub struct PeakGrid {
    /// Symmetric input grid size on [-1, 1].
    pub inputs: usize,
    /// Output quadrature step.
    pub quad_step: f64,
    /// Output range padding beyond the extreme means, in noise deviations.
    pub quad_pad: f64,
}

impl Default for PeakGrid {
    fn default() -> Self {
        PeakGrid {
            inputs: 41,
            quad_step: 0.01,
            quad_pad: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeakCapacity {
    /// Capacity of the grid-input channel: a lower bound on the peak-power
    /// capacity, up to the reported quadrature discretization.
    pub value: f64,
    /// Remaining Blahut–Arimoto bracket (upper minus lower bound).
    pub ba_gap: f64,
    pub iterations: u64,
}

/// Lower bound on `sup_{|Y|<=1} I(Y; sqrt(s) Y + Z)` by Blahut–Arimoto over
/// a symmetric input grid with trapezoidal output quadrature.
pub fn awgn_capacity_peak(s: f64, grid: &PeakGrid) -> Result<PeakCapacity> {
    if !(s >= 0.0) {
        return Err(CoordError::invalid("snr must be >= 0"));
    }
    if grid.inputs < 2 || !(grid.quad_step > 0.0) || !(grid.quad_pad > 0.0) {
        return Err(CoordError::invalid("degenerate peak-capacity grid"));
    }
    if s == 0.0 {
        return Ok(PeakCapacity {
            value: 0.0,
            ba_gap: 0.0,
            iterations: 0,
        });
    }
    let k = grid.inputs;
    let root_s = s.sqrt();
    let ys: Vec<f64> = (0..k)
        .map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64)
        .collect();
    let lo = -root_s - grid.quad_pad;
    let hi = root_s + grid.quad_pad;
    let n = ((hi - lo) / grid.quad_step).ceil() as usize + 1;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let w: Vec<Vec<f64>> = ys
        .iter()
        .map(|&y| {
            (0..n)
                .map(|j| {
                    let z = lo + j as f64 * grid.quad_step;
                    let d = z - root_s * y;
                    norm * (-0.5 * d * d).exp()
                })
                .collect()
        })
        .collect();
    let h = grid.quad_step;
    let mut p = vec![1.0 / k as f64; k];
    let mut iterations = 0u64;
    let mut gap = f64::INFINITY;
    let mut info = 0.0;
    while iterations < 5_000 {
        iterations += 1;
        let mut m = vec![0.0f64; n];
        for i in 0..k {
            if p[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                m[j] += p[i] * w[i][j];
            }
        }
        let d: Vec<f64> = (0..k)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    let wij = w[i][j];
                    if wij > 0.0 && m[j] > 0.0 {
                        acc += wij * (wij / m[j]).ln();
                    }
                }
                acc * h
            })
            .collect();
        info = p.iter().zip(&d).map(|(pi, di)| pi * di).sum::<f64>();
        let dmax = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        gap = dmax - info;
        if gap <= 1e-10 {
            break;
        }
        let mut mass = 0.0;
        for i in 0..k {
            p[i] *= (d[i] - dmax).exp();
            mass += p[i];
        }
        for v in p.iter_mut() {
            *v /= mass;
        }
    }
    Ok(PeakCapacity {
        value: info.max(0.0),
        ba_gap: gap.max(0.0),
        iterations,
    })
}
