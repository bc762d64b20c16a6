use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use secflow::attack_graph::EdgeId;
use secflow::milp::{solve, Limits, Status};
use secflow::model::{build_attack_only, build_for_instance, extract_configuration, ModelWeights};
use secflow::oracle::random_graph;
use secflow::risk_measures::{path, reach};
use secflow::toy::{toy_instance, toy_weights};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn attack_terms_match_measures(seed in any::<u64>(), cut in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 8).with_targets();
        let severed: BTreeSet<EdgeId> = g.edges().map(|(e, _)| e).filter(|_| rng.random_bool(cut)).collect();
        let base = ModelWeights::default();

        let m = build_attack_only(&g, &severed, &base.with_alpha_beta(0.0, 1.0)).unwrap();
        let s = solve(&m.problem, &Limits::default()).unwrap();
        prop_assert_eq!(s.status, Status::Optimal);
        prop_assert!((m.terms.evaluate(&s.values).or - reach(&g, &severed).value).abs() < 1e-6);

        let m = build_attack_only(&g, &severed, &base.with_alpha_beta(0.0, 0.0)).unwrap();
        let s = solve(&m.problem, &Limits::default()).unwrap();
        prop_assert_eq!(s.status, Status::Optimal);
        let op = m.terms.evaluate(&s.values).op;
        prop_assert!((op.exp() - path(&g, &severed, base.epsilon).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn toy_solutions_are_feasible(alpha in 0.05f64..=1.0, beta in 0.0f64..=1.0) {
        let inst = toy_instance();
        let (_, model) = build_for_instance(&inst, &toy_weights().with_alpha_beta(alpha, beta)).unwrap();
        let s = model.solve(&Limits::default()).unwrap();
        prop_assert_eq!(s.status, Status::Optimal);
        prop_assert!(model.problem.max_violation(&s.values) < 1e-6);
        prop_assert!((model.problem.objective_value(&s.values) - s.objective).abs() < 1e-6);
        prop_assert!(s.bound <= s.objective + 1e-6);

        let c = extract_configuration(&inst.network, &model, &s.values).unwrap();
        let terms = model.terms.evaluate(&s.values);
        prop_assert_eq!(terms, c.objective_terms);
        prop_assert!(terms.of <= c.delivered_value(&inst.network) + 1e-9);
        prop_assert!(terms.or >= -1e-9 && terms.op <= 1e-9);
    }
}

#[test]
fn more_weight_on_functionality_never_delivers_less() {
    let inst = toy_instance();
    let mut last = -1.0;
    for alpha in [0.05, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let (_, model) = build_for_instance(&inst, &toy_weights().with_alpha_beta(alpha, 1.0)).unwrap();
        let s = model.solve(&Limits::default()).unwrap();
        let c = extract_configuration(&inst.network, &model, &s.values).unwrap();
        let v = c.delivered_value(&inst.network);
        assert!(v >= last - 1e-9, "alpha {alpha}: {v} < {last}");
        last = v;
    }
}
