//! Property tests for the probability core and the seminorms.

use proptest::prelude::*;
use seqcoord_core::prob::{
    assemble_strategic_measure, directed_information, exact_entropy, mutual_information,
    DirectedKernel, Distribution, MarkovKernel, SourceLaw,
};
use seqcoord_core::seminorm::{
    bounded_lipschitz, seminorm, wasserstein1, FunctionClass, MetricMatrix, SignedMeasure,
};

fn prob_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.02f64..1.0, n).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    })
}

fn kernel(inputs: usize, outputs: usize) -> impl Strategy<Value = MarkovKernel> {
    proptest::collection::vec(prob_vec(outputs), inputs)
        .prop_map(|rows| MarkovKernel::from_rows(rows).unwrap())
}

fn source(nx: usize, horizon: usize) -> impl Strategy<Value = SourceLaw> {
    let factors: Vec<_> = (0..horizon).map(|t0| kernel(nx.pow(t0 as u32), nx)).collect();
    factors.prop_map(move |fs| SourceLaw::new(nx, fs).unwrap())
}

fn policy(nx: usize, nu: usize, horizon: usize) -> impl Strategy<Value = DirectedKernel> {
    let factors: Vec<_> = (0..horizon)
        .map(|t0| kernel(nx.pow(t0 as u32 + 1) * nu.pow(t0 as u32), nu))
        .collect();
    factors.prop_map(move |fs| DirectedKernel::new(nx, nu, fs).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strategic_measure_mass_and_causality(
        src in source(2, 2),
        pol in policy(2, 2, 2),
    ) {
        let m = assemble_strategic_measure(&src, &pol).unwrap();
        prop_assert!((m.total_mass() - 1.0).abs() <= 1e-12);
        prop_assert!(m.causality_defect() <= 1e-10);
        for t in 1..=2 {
            let mu_t = m.marginal_state(t).unwrap();
            prop_assert!((mu_t.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn directed_information_chain_rule(
        src in source(2, 2),
        pol in policy(2, 2, 2),
    ) {
        let di = directed_information(&src, &pol).unwrap();
        let m = assemble_strategic_measure(&src, &pol).unwrap();
        prop_assert!((di.total - m.joint_mutual_information()).abs() <= 1e-10);
        for r in &di.per_step {
            prop_assert!(*r >= -1e-12);
        }
    }

    #[test]
    fn mutual_information_nonnegative_and_zero_when_blind(
        mu in prob_vec(3),
        k in kernel(3, 2),
        blind_row in prob_vec(2),
    ) {
        let mu = Distribution::new(mu).unwrap();
        prop_assert!(mutual_information(&mu, &k).unwrap() >= -1e-12);
        let blind = MarkovKernel::constant(3, &Distribution::new(blind_row).unwrap());
        prop_assert!(mutual_information(&mu, &blind).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn entropy_bounded_by_log_support(p in prob_vec(5)) {
        let d = Distribution::new(p).unwrap();
        let h = exact_entropy(&d);
        prop_assert!(h >= 0.0 && h <= 5.0f64.ln() + 1e-12);
    }

    #[test]
    fn seminorms_dominated_by_total_variation(
        p in prob_vec(4),
        q in prob_vec(4),
    ) {
        let delta = SignedMeasure::difference(&p, &q).unwrap();
        let tv = seminorm(&delta, &FunctionClass::TotalVariation).unwrap();
        let classes = [
            FunctionClass::finite_table(vec![vec![1.0, -0.5, 0.25, 0.0]]).unwrap(),
            FunctionClass::cost_level_sets(vec![0.4, 0.1, 0.9, 0.2]).unwrap(),
            FunctionClass::BoundedLipschitz(MetricMatrix::discrete(4)),
        ];
        for class in &classes {
            let v = seminorm(&delta, class).unwrap();
            prop_assert!(v <= tv + 1e-9, "class value {v} exceeds TV {tv}");
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn seminorm_symmetry_and_zero(
        p in prob_vec(4),
        q in prob_vec(4),
    ) {
        let fwd = SignedMeasure::difference(&p, &q).unwrap();
        let bwd = SignedMeasure::difference(&q, &p).unwrap();
        let zero = SignedMeasure::difference(&p, &p).unwrap();
        for class in [
            FunctionClass::TotalVariation,
            FunctionClass::cost_level_sets(vec![0.3, 0.6, 0.1, 0.8]).unwrap(),
        ] {
            let a = seminorm(&fwd, &class).unwrap();
            let b = seminorm(&bwd, &class).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!(seminorm(&zero, &class).unwrap() == 0.0);
        }
    }
}

proptest! {
    // LP-backed metrics are slower; fewer cases
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wasserstein_metric_axioms(
        p in prob_vec(3),
        q in prob_vec(3),
        r in prob_vec(3),
    ) {
        let metric = MetricMatrix::line(&[0.0, 0.8, 2.0]).unwrap();
        let p = Distribution::new(p).unwrap();
        let q = Distribution::new(q).unwrap();
        let r = Distribution::new(r).unwrap();
        let dpq = wasserstein1(&p, &q, &metric).unwrap();
        let dqp = wasserstein1(&q, &p, &metric).unwrap();
        let dpr = wasserstein1(&p, &r, &metric).unwrap();
        let drq = wasserstein1(&r, &q, &metric).unwrap();
        prop_assert!((dpq - dqp).abs() <= 1e-9);
        prop_assert!(dpq <= dpr + drq + 1e-9);
        prop_assert!(wasserstein1(&p, &p, &metric).unwrap() <= 1e-12);
    }

    #[test]
    fn bounded_lipschitz_nested_in_w1_and_tv(
        p in prob_vec(3),
        q in prob_vec(3),
    ) {
        let metric = MetricMatrix::line(&[0.0, 0.5, 1.7]).unwrap();
        let p = Distribution::new(p).unwrap();
        let q = Distribution::new(q).unwrap();
        let bl = bounded_lipschitz(&p, &q, &metric).unwrap();
        let w1 = wasserstein1(&p, &q, &metric).unwrap();
        let tv: f64 = p
            .probs()
            .iter()
            .zip(q.probs())
            .map(|(a, b)| (a - b).abs())
            .sum();
        prop_assert!(bl <= w1 + 1e-9);
        prop_assert!(bl <= tv + 1e-9);
    }
}
