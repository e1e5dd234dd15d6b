//! Worst-case test-function seminorms `||P - Q||_F` on finite spaces.
//!
//! Four function classes are supported, all with `||f||_inf <= 1`:
//! the full unit sup-norm ball (total variation, with the factor-2
//! normalization `||v||_TV = 2 sup_A |v(A)| = ||v||_1`), explicit finite
//! tables, indicators of cost level sets (a Kolmogorov–Smirnov distance of
//! cost pushforwards), and the bounded-Lipschitz ball
//! `||f||_inf + ||f||_Lip <= 1` (evaluated exactly by linear programming).
//!
//! The Wasserstein-1 distance is included because it upper-bounds the
//! bounded-Lipschitz metric; both are solved in primal and dual form and
//! cross-checked with a duality-gap test.

use crate::error::{CoordError, Result};
use crate::simplex::{self, StandardLp};
use crate::MASS_TOL;
use crate::prob::Distribution;

/// Duality gap allowed between the two LP forms.
pub const LP_GAP_TOL: f64 = 1e-9;

/// A symmetric metric matrix with zero diagonal satisfying the triangle
/// inequality within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    n: usize,
    d: Vec<f64>,
}

impl MetricMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(CoordError::dim("metric matrix has wrong size"));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(CoordError::invalid("metric diagonal must be zero"));
            }
            for j in 0..n {
                let dij = entries[i * n + j];
                if !dij.is_finite() || dij < 0.0 {
                    return Err(CoordError::invalid("metric entries must be finite and >= 0"));
                }
                if (dij - entries[j * n + i]).abs() > 1e-12 {
                    return Err(CoordError::invalid("metric must be symmetric"));
                }
                if i != j && dij == 0.0 {
                    return Err(CoordError::invalid("metric must separate points"));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if entries[i * n + k] > entries[i * n + j] + entries[j * n + k] + 1e-12 {
                        return Err(CoordError::invalid(format!(
                            "triangle inequality fails at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(MetricMatrix { n, d: entries })
    }

    /// Discrete metric: 1 off the diagonal.
    pub fn discrete(n: usize) -> Self {
        let mut d = vec![1.0; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
        }
        MetricMatrix { n, d }
    }

    /// Absolute-difference metric of a 1-D point grid.
    pub fn line(points: &[f64]) -> Result<Self> {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = (points[i] - points[j]).abs();
            }
        }
        MetricMatrix::new(n, d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.d
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.d.iter().cloned().fold(0.0, f64::max)
    }
}

/// A uGC test-function family over a fixed finite cell space.
#[derive(Debug, Clone)]
pub enum FunctionClass {
    /// The unit sup-norm ball; the seminorm is total variation
    /// (`2 sup_A |v(A)|`).
    TotalVariation,
    /// An explicit finite list of tables with entries in [-1, 1].
    FiniteTable(Vec<Vec<f64>>),
    /// Indicators `1{c(cell) <= a}` of the level sets of a cost table.
    CostLevelSets(Vec<f64>),
    /// The ball `||f||_inf + ||f||_Lip <= 1` for a metric on the cells.
    BoundedLipschitz(MetricMatrix),
}

impl FunctionClass {
    pub fn finite_table(tables: Vec<Vec<f64>>) -> Result<Self> {
        if tables.is_empty() {
            return Err(CoordError::invalid("finite table class needs >= 1 function"));
        }
        let cells = tables[0].len();
        for t in &tables {
            if t.len() != cells {
                return Err(CoordError::dim("finite table functions have unequal lengths"));
            }
            if t.iter().any(|&v| !v.is_finite() || v.abs() > 1.0 + 1e-15) {
                return Err(CoordError::invalid("table entries must lie in [-1, 1]"));
            }
        }
        Ok(FunctionClass::FiniteTable(tables))
    }

    pub fn cost_level_sets(costs: Vec<f64>) -> Result<Self> {
        if costs.is_empty() || costs.iter().any(|c| !c.is_finite()) {
            return Err(CoordError::invalid("cost table must be nonempty finite reals"));
        }
        Ok(FunctionClass::CostLevelSets(costs))
    }

    /// Number of cells the class expects, if it pins one.
    pub fn cells(&self) -> Option<usize> {
        match self {
            FunctionClass::TotalVariation => None,
            FunctionClass::FiniteTable(tables) => Some(tables[0].len()),
            FunctionClass::CostLevelSets(costs) => Some(costs.len()),
            FunctionClass::BoundedLipschitz(metric) => Some(metric.len()),
        }
    }

    fn check_dims(&self, cells: usize) -> Result<()> {
        match self.cells() {
            Some(want) if want != cells => Err(CoordError::dim(format!(
                "class expects {want} cells, measure has {cells}"
            ))),
            _ => Ok(()),
        }
    }
}

/// A signed measure arising as the difference of two probability tensors;
/// entries must sum to zero within 1e-12.
#[derive(Debug, Clone)]
pub struct SignedMeasure {
    delta: Vec<f64>,
}

impl SignedMeasure {
    pub fn new(delta: Vec<f64>) -> Result<Self> {
        if delta.is_empty() {
            return Err(CoordError::invalid("empty signed measure"));
        }
        let sum: f64 = delta.iter().sum();
        if sum.abs() > MASS_TOL {
            return Err(CoordError::invalid(format!(
                "signed measure mass {sum} not 0 within {MASS_TOL}"
            )));
        }
        Ok(SignedMeasure { delta })
    }

    pub fn difference(p: &[f64], q: &[f64]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(CoordError::dim("difference of unequal-length tensors"));
        }
        SignedMeasure::new(p.iter().zip(q).map(|(a, b)| a - b).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.delta
    }
}

/// `||delta||_F` for the given class.
pub fn seminorm(delta: &SignedMeasure, class: &FunctionClass) -> Result<f64> {
    Ok(seminorm_witness(delta.values(), class)?.0)
}

/// Seminorm together with a maximizing test function `g` satisfying
/// `<w, g> <= ||w||_F` for every signed `w` and equality at `delta`
/// (the subgradient the rate solver linearizes with).
pub(crate) fn seminorm_witness(delta: &[f64], class: &FunctionClass) -> Result<(f64, Vec<f64>)> {
    class.check_dims(delta.len())?;
    match class {
        FunctionClass::TotalVariation => {
            let value = delta.iter().map(|v| v.abs()).sum();
            let witness = delta.iter().map(|v| v.signum() * f64::from(*v != 0.0)).collect();
            Ok((value, witness))
        }
        FunctionClass::FiniteTable(tables) => {
            let mut best = 0.0f64;
            let mut witness = vec![0.0; delta.len()];
            for table in tables {
                let v: f64 = delta.iter().zip(table).map(|(d, f)| d * f).sum();
                if v.abs() > best {
                    best = v.abs();
                    let sign = v.signum();
                    witness = table.iter().map(|f| sign * f).collect();
                }
            }
            Ok((best, witness))
        }
        FunctionClass::CostLevelSets(costs) => {
            let (value, threshold, sign) = level_set_scan(delta, costs);
            let witness = costs
                .iter()
                .map(|&c| if c <= threshold { sign } else { 0.0 })
                .collect();
            Ok((value, witness))
        }
        FunctionClass::BoundedLipschitz(metric) => bl_witness(delta, metric),
    }
}

/// Max over realized thresholds of `|sum_{c(cell) <= a} delta(cell)|`;
/// tied cost values merge into one threshold.
fn level_set_scan(delta: &[f64], costs: &[f64]) -> (f64, f64, f64) {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let mut acc = 0.0f64;
    let mut best = 0.0f64;
    let mut best_threshold = costs[order[0]];
    let mut best_sign = 1.0f64;
    let mut i = 0;
    while i < order.len() {
        let a = costs[order[i]];
        while i < order.len() && costs[order[i]] == a {
            acc += delta[order[i]];
            i += 1;
        }
        if acc.abs() > best {
            best = acc.abs();
            best_threshold = a;
            best_sign = acc.signum();
        }
    }
    (best, best_threshold, best_sign)
}

/// A strictly increasing finite grid of real cost values.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGrid {
    values: Vec<f64>,
}

impl CostGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(CoordError::invalid("cost grid must be nonempty finite reals"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoordError::invalid("cost grid must be strictly increasing"));
        }
        Ok(CostGrid { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Pushforward of a measure on cells through a cost table: the merged
/// grid of realized cost values and the mass each carries.
pub fn cost_pushforward(measure: &[f64], costs: &[f64]) -> Result<(CostGrid, Distribution)> {
    if measure.len() != costs.len() {
        return Err(CoordError::dim("cost table and measure sizes differ"));
    }
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let mut grid = Vec::new();
    let mut mass = Vec::new();
    for &cell in &order {
        if grid.last() == Some(&costs[cell]) {
            *mass.last_mut().unwrap() += measure[cell];
        } else {
            grid.push(costs[cell]);
            mass.push(measure[cell]);
        }
    }
    Ok((CostGrid::new(grid)?, Distribution::new(mass)?))
}

/// Kolmogorov–Smirnov distance `sup_a |F_p(a) - F_q(a)|` of two laws on a
/// shared cost grid.
pub fn ks_distance(grid: &CostGrid, p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != grid.len() || q.len() != grid.len() {
        return Err(CoordError::dim("ks_distance: laws must live on the grid"));
    }
    let mut fp = 0.0;
    let mut fq = 0.0;
    let mut best = 0.0f64;
    for i in 0..grid.len() {
        fp += p.prob(i);
        fq += q.prob(i);
        best = best.max((fp - fq).abs());
    }
    Ok(best)
}

/// Exact Wasserstein-1 distance on a finite metric space: the optimal
/// transport LP over couplings, cross-checked against the dual LP over
/// 1-Lipschitz potentials.
pub fn wasserstein1(p: &Distribution, q: &Distribution, metric: &MetricMatrix) -> Result<f64> {
    let n = metric.len();
    if p.len() != n || q.len() != n {
        return Err(CoordError::dim("wasserstein1: laws must match the metric"));
    }

    // primal: min sum pi_ij d_ij, row sums = p, col sums = q
    let mut rows = vec![vec![0.0; n * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            rows[i][i * n + j] = 1.0;
            rows[n + j][i * n + j] = 1.0;
        }
    }
    let mut rhs: Vec<f64> = p.probs().to_vec();
    rhs.extend_from_slice(q.probs());
    let objective: Vec<f64> = (0..n * n)
        .map(|c| metric.dist(c / n, c % n))
        .collect();
    let primal = simplex::solve(&StandardLp {
        rows,
        rhs,
        objective,
    })?;

    // dual: max <p - q, f> over f_i - f_j <= d_ij
    let delta: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| a - b)
        .collect();
    let dual = lipschitz_potential_value(&delta, metric)?;

    let gap = (primal.value - dual).abs();
    if gap > LP_GAP_TOL {
        return Err(CoordError::NumericFailure(format!(
            "wasserstein duality gap {gap} exceeds {LP_GAP_TOL}"
        )));
    }
    Ok(primal.value)
}

/// Dual LP value `max <delta, f> : f 1-Lipschitz` (free potentials as
/// differences of nonnegative variables, one slack per ordered pair).
fn lipschitz_potential_value(delta: &[f64], metric: &MetricMatrix) -> Result<f64> {
    let n = metric.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let nv = 2 * n + pairs.len();
    let mut rows = vec![vec![0.0; nv]; pairs.len()];
    let mut rhs = vec![0.0; pairs.len()];
    for (r, &(i, j)) in pairs.iter().enumerate() {
        rows[r][i] = 1.0;
        rows[r][n + i] = -1.0;
        rows[r][j] = -1.0;
        rows[r][n + j] = 1.0;
        rows[r][2 * n + r] = 1.0;
        rhs[r] = metric.dist(i, j);
    }
    let mut objective = vec![0.0; nv];
    for i in 0..n {
        objective[i] = -delta[i];
        objective[n + i] = delta[i];
    }
    let sol = simplex::solve(&StandardLp {
        rows,
        rhs,
        objective,
    })?;
    Ok(-sol.value)
}

/// Bounded-Lipschitz metric `sup { <p - q, f> : ||f||_inf + ||f||_Lip <= 1 }`.
pub fn bounded_lipschitz(
    p: &Distribution,
    q: &Distribution,
    metric: &MetricMatrix,
) -> Result<f64> {
    let n = metric.len();
    if p.len() != n || q.len() != n {
        return Err(CoordError::dim("bounded_lipschitz: laws must match the metric"));
    }
    let delta: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| a - b)
        .collect();
    Ok(bl_witness(&delta, metric)?.0)
}

/// Potential-form LP for the BL ball, cross-checked against the flow-form
/// LP; returns the value and the maximizing potential.
fn bl_witness(delta: &[f64], metric: &MetricMatrix) -> Result<(f64, Vec<f64>)> {
    let n = metric.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();

    // potential form: variables f (split), m, L, slacks for
    //   f_i - f_j - L d_ij <= 0, +-f_i - m <= 0, m + L <= 1
    let nc = pairs.len() + 2 * n + 1;
    let nv = 2 * n + 2 + nc;
    let mut rows = vec![vec![0.0; nv]; nc];
    let mut rhs = vec![0.0; nc];
    let (m_col, l_col, slack0) = (2 * n, 2 * n + 1, 2 * n + 2);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        rows[r][i] = 1.0;
        rows[r][n + i] = -1.0;
        rows[r][j] = -1.0;
        rows[r][n + j] = 1.0;
        rows[r][l_col] = -metric.dist(i, j);
        rows[r][slack0 + r] = 1.0;
    }
    for i in 0..n {
        let r = pairs.len() + 2 * i;
        rows[r][i] = 1.0;
        rows[r][n + i] = -1.0;
        rows[r][m_col] = -1.0;
        rows[r][slack0 + r] = 1.0;
        rows[r + 1][i] = -1.0;
        rows[r + 1][n + i] = 1.0;
        rows[r + 1][m_col] = -1.0;
        rows[r + 1][slack0 + r + 1] = 1.0;
    }
    let last = nc - 1;
    rows[last][m_col] = 1.0;
    rows[last][l_col] = 1.0;
    rows[last][slack0 + last] = 1.0;
    rhs[last] = 1.0;
    let mut objective = vec![0.0; nv];
    for i in 0..n {
        objective[i] = -delta[i];
        objective[n + i] = delta[i];
    }
    let potential = simplex::solve(&StandardLp {
        rows,
        rhs,
        objective,
    })?;
    let value = -potential.value;
    let witness: Vec<f64> = (0..n)
        .map(|i| potential.x[i] - potential.x[n + i])
        .collect();

    // flow form: min beta with delta = divergence(flow) + creation,
    // transport cost and creation budget both equal to beta
    let nvf = pairs.len() + 2 * n + 1;
    let ncf = n + 2;
    let mut frows = vec![vec![0.0; nvf]; ncf];
    let mut frhs = vec![0.0; ncf];
    for (c, &(i, j)) in pairs.iter().enumerate() {
        frows[i][c] += 1.0;
        frows[j][c] -= 1.0;
        frows[n][c] = metric.dist(i, j);
    }
    for i in 0..n {
        frows[i][pairs.len() + i] = 1.0;
        frows[i][pairs.len() + n + i] = -1.0;
        frows[n + 1][pairs.len() + i] = 1.0;
        frows[n + 1][pairs.len() + n + i] = 1.0;
        frhs[i] = delta[i];
    }
    let beta_col = pairs.len() + 2 * n;
    frows[n][beta_col] = -1.0;
    frows[n + 1][beta_col] = -1.0;
    let mut fobj = vec![0.0; nvf];
    fobj[beta_col] = 1.0;
    let flow = simplex::solve(&StandardLp {
        rows: frows,
        rhs: frhs,
        objective: fobj,
    })?;

    let gap = (value - flow.value).abs();
    if gap > LP_GAP_TOL {
        return Err(CoordError::NumericFailure(format!(
            "bounded-Lipschitz duality gap {gap} exceeds {LP_GAP_TOL}"
        )));
    }
    Ok((value, witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn sm(values: Vec<f64>) -> SignedMeasure {
        SignedMeasure::new(values).unwrap()
    }

    fn random_pair(n: usize, rng: &mut impl Rng) -> (Distribution, Distribution) {
        let draw = |rng: &mut dyn rand::RngCore| {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
            let s: f64 = raw.iter().sum();
            Distribution::new(raw.into_iter().map(|v| v / s).collect()).unwrap()
        };
        (draw(rng), draw(rng))
    }

    #[test]
    fn zero_measure_has_zero_seminorm_in_every_class() {
        let zero = sm(vec![0.0; 4]);
        let classes = [
            FunctionClass::TotalVariation,
            FunctionClass::finite_table(vec![vec![1.0, -1.0, 0.5, 0.0]]).unwrap(),
            FunctionClass::cost_level_sets(vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
            FunctionClass::BoundedLipschitz(MetricMatrix::discrete(4)),
        ];
        for class in &classes {
            assert_eq!(seminorm(&zero, class).unwrap(), 0.0);
        }
    }

    #[test]
    fn tv_between_disjoint_point_masses_is_two() {
        let delta = sm(vec![1.0, -1.0]);
        assert_abs_diff_eq!(
            seminorm(&delta, &FunctionClass::TotalVariation).unwrap(),
            2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn cost_level_sets_matches_threshold_scan_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..20 {
            let costs: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (p, q) = random_pair(4, &mut rng);
            let delta = SignedMeasure::difference(p.probs(), q.probs()).unwrap();
            let class = FunctionClass::cost_level_sets(costs.clone()).unwrap();
            let got = seminorm(&delta, &class).unwrap();
            // oracle: scan every threshold exhaustively
            let mut oracle = 0.0f64;
            for &a in &costs {
                let s: f64 = delta
                    .values()
                    .iter()
                    .zip(&costs)
                    .filter(|(_, &c)| c <= a)
                    .map(|(d, _)| d)
                    .sum();
                oracle = oracle.max(s.abs());
            }
            assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn cost_level_sets_merges_tied_costs() {
        // two cells share cost 1.0 and their masses cancel at the threshold
        let costs = vec![0.0, 1.0, 1.0, 2.0];
        let class = FunctionClass::cost_level_sets(costs).unwrap();
        let delta = sm(vec![0.0, 0.3, -0.3, 0.0]);
        assert_abs_diff_eq!(seminorm(&delta, &class).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ks_distance_trivial_cases_and_scan_oracle() {
        let grid = CostGrid::new(vec![0.0, 1.0]).unwrap();
        let p = Distribution::point_mass(2, 0);
        let q = Distribution::point_mass(2, 1);
        assert_abs_diff_eq!(ks_distance(&grid, &p, &p).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ks_distance(&grid, &p, &q).unwrap(), 1.0, epsilon = 1e-15);

        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let grid5 = CostGrid::new(vec![-1.0, 0.0, 0.5, 1.25, 3.0]).unwrap();
        for _ in 0..20 {
            let (p, q) = random_pair(5, &mut rng);
            let got = ks_distance(&grid5, &p, &q).unwrap();
            let mut oracle = 0.0f64;
            for k in 0..5 {
                let fp: f64 = p.probs()[..=k].iter().sum();
                let fq: f64 = q.probs()[..=k].iter().sum();
                oracle = oracle.max((fp - fq).abs());
            }
            assert_abs_diff_eq!(got, oracle, epsilon = 1e-15);
        }
    }

    #[test]
    fn ks_equals_cost_level_set_seminorm_through_pushforward() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..20 {
            let costs: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (p, q) = random_pair(6, &mut rng);
            let class = FunctionClass::cost_level_sets(costs.clone()).unwrap();
            let delta = SignedMeasure::difference(p.probs(), q.probs()).unwrap();
            let lhs = seminorm(&delta, &class).unwrap();
            let (grid_p, push_p) = cost_pushforward(p.probs(), &costs).unwrap();
            let (grid_q, push_q) = cost_pushforward(q.probs(), &costs).unwrap();
            assert_eq!(grid_p, grid_q);
            let rhs = ks_distance(&grid_p, &push_p, &push_q).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn wasserstein_trivial_cases() {
        let metric = MetricMatrix::line(&[0.0, 3.0]).unwrap();
        let p = Distribution::point_mass(2, 0);
        let q = Distribution::point_mass(2, 1);
        assert_abs_diff_eq!(wasserstein1(&p, &p, &metric).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wasserstein1(&p, &q, &metric).unwrap(), 3.0, epsilon = 1e-9);
    }

    #[test]
    fn wasserstein_matches_cdf_area_oracle_on_line() {
        let points = [0.0, 0.7, 1.1, 2.5];
        let metric = MetricMatrix::line(&points).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        for _ in 0..12 {
            let (p, q) = random_pair(4, &mut rng);
            let got = wasserstein1(&p, &q, &metric).unwrap();
            // oracle: sum over gaps of |CDF difference| * gap width
            let mut oracle = 0.0;
            let mut fp = 0.0;
            let mut fq = 0.0;
            for k in 0..3 {
                fp += p.prob(k);
                fq += q.prob(k);
                oracle += (fp - fq).abs() * (points[k + 1] - points[k]);
            }
            assert_abs_diff_eq!(got, oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn wasserstein_discrete_metric_is_half_l1() {
        let metric = MetricMatrix::discrete(4);
        let mut rng = ChaCha12Rng::seed_from_u64(25);
        for _ in 0..12 {
            let (p, q) = random_pair(4, &mut rng);
            let l1: f64 = p
                .probs()
                .iter()
                .zip(q.probs())
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert_abs_diff_eq!(
                wasserstein1(&p, &q, &metric).unwrap(),
                0.5 * l1,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn bounded_lipschitz_two_point_closed_form() {
        // point masses at metric distance d: value is 2d/(2+d)
        for d in [0.5, 1.0, 2.0, 6.0] {
            let metric = MetricMatrix::line(&[0.0, d]).unwrap();
            let p = Distribution::point_mass(2, 0);
            let q = Distribution::point_mass(2, 1);
            let got = bounded_lipschitz(&p, &q, &metric).unwrap();
            assert_abs_diff_eq!(got, 2.0 * d / (2.0 + d), epsilon = 1e-9);
        }
        // at distance exactly 2 the sup-norm budget binds and the value is 1
        let metric = MetricMatrix::line(&[0.0, 2.0]).unwrap();
        let got = bounded_lipschitz(
            &Distribution::point_mass(2, 0),
            &Distribution::point_mass(2, 1),
            &metric,
        )
        .unwrap();
        assert_abs_diff_eq!(got, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn bounded_lipschitz_dominated_by_w1_and_tv() {
        let mut rng = ChaCha12Rng::seed_from_u64(26);
        for trial in 0..12 {
            let points: Vec<f64> = {
                let mut v: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..3.0)).collect();
                v.sort_by(f64::total_cmp);
                v[1] += 1e-3 * (trial + 1) as f64; // keep points distinct
                v[2] += 2e-3 * (trial + 1) as f64;
                v[3] += 3e-3 * (trial + 1) as f64;
                v.sort_by(f64::total_cmp);
                v
            };
            let metric = MetricMatrix::line(&points).unwrap();
            let (p, q) = random_pair(4, &mut rng);
            let bl = bounded_lipschitz(&p, &q, &metric).unwrap();
            let w1 = wasserstein1(&p, &q, &metric).unwrap();
            let tv: f64 = p
                .probs()
                .iter()
                .zip(q.probs())
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(bl <= w1 + 1e-9, "bl {bl} > w1 {w1}");
            assert!(bl <= tv + 1e-9, "bl {bl} > tv {tv}");
        }
    }

    #[test]
    fn seminorm_symmetric_and_triangle() {
        let mut rng = ChaCha12Rng::seed_from_u64(27);
        let classes = [
            FunctionClass::TotalVariation,
            FunctionClass::finite_table(vec![
                vec![0.2, -1.0, 0.6, 0.1],
                vec![1.0, 0.0, -0.4, 0.9],
            ])
            .unwrap(),
            FunctionClass::cost_level_sets(vec![0.3, 0.1, 0.7, 0.5]).unwrap(),
            FunctionClass::BoundedLipschitz(MetricMatrix::discrete(4)),
        ];
        for _ in 0..8 {
            let (p, q) = random_pair(4, &mut rng);
            let (_, r) = random_pair(4, &mut rng);
            for class in &classes {
                let dpq = SignedMeasure::difference(p.probs(), q.probs()).unwrap();
                let dqp = SignedMeasure::difference(q.probs(), p.probs()).unwrap();
                let dpr = SignedMeasure::difference(p.probs(), r.probs()).unwrap();
                let drq = SignedMeasure::difference(r.probs(), q.probs()).unwrap();
                let vpq = seminorm(&dpq, class).unwrap();
                let vqp = seminorm(&dqp, class).unwrap();
                let vpr = seminorm(&dpr, class).unwrap();
                let vrq = seminorm(&drq, class).unwrap();
                assert_abs_diff_eq!(vpq, vqp, epsilon = 1e-12);
                assert!(vpq <= vpr + vrq + 1e-9);
            }
        }
    }

    #[test]
    fn witness_attains_value_and_stays_dominated() {
        let mut rng = ChaCha12Rng::seed_from_u64(28);
        let classes = [
            FunctionClass::TotalVariation,
            FunctionClass::finite_table(vec![vec![0.2, -1.0, 0.6, 0.1]]).unwrap(),
            FunctionClass::cost_level_sets(vec![0.3, 0.1, 0.7, 0.5]).unwrap(),
            FunctionClass::BoundedLipschitz(MetricMatrix::discrete(4)),
        ];
        for _ in 0..8 {
            let (p, q) = random_pair(4, &mut rng);
            let delta: Vec<f64> = p
                .probs()
                .iter()
                .zip(q.probs())
                .map(|(a, b)| a - b)
                .collect();
            for class in &classes {
                let (value, g) = seminorm_witness(&delta, class).unwrap();
                let attained: f64 = delta.iter().zip(&g).map(|(d, f)| d * f).sum();
                assert_abs_diff_eq!(attained, value, epsilon = 1e-9);
                // domination on a fresh signed measure
                let (a, b) = random_pair(4, &mut rng);
                let w: Vec<f64> = a
                    .probs()
                    .iter()
                    .zip(b.probs())
                    .map(|(x, y)| x - y)
                    .collect();
                let (wv, _) = seminorm_witness(&w, class).unwrap();
                let lin: f64 = w.iter().zip(&g).map(|(d, f)| d * f).sum();
                assert!(lin <= wv + 1e-9);
            }
        }
    }

    #[test]
    fn metric_validation_rejects_bad_matrices() {
        assert!(MetricMatrix::new(2, vec![0.0, 1.0, 2.0, 0.0]).is_err()); // asymmetric
        assert!(MetricMatrix::new(2, vec![0.5, 1.0, 1.0, 0.0]).is_err()); // diagonal
        let tri = vec![
            0.0, 1.0, 5.0, //
            1.0, 0.0, 1.0, //
            5.0, 1.0, 0.0,
        ];
        assert!(MetricMatrix::new(3, tri).is_err()); // triangle violated
    }

    #[test]
    fn dimension_mismatch_reported() {
        let class = FunctionClass::cost_level_sets(vec![0.0, 1.0]).unwrap();
        let delta = sm(vec![0.1, -0.05, -0.05]);
        assert!(seminorm(&delta, &class).is_err());
    }
}
