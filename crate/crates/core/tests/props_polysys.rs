use lienard_core::polysys::{
    build_cubic_symbolic, build_lienard_symbolic, classify, classify_infinity, find_equilibria, ParameterAssignment, Region,
};
use proptest::prelude::*;

fn lienard_assignment(k: usize, coeffs: &[f64]) -> ParameterAssignment {
    let mut a = ParameterAssignment::new();
    for i in 1..=2 * k + 1 {
        a.set(&format!("mu{i}"), coeffs[i - 1]);
    }
    a
}

fn cubic(l: f64, m: f64, al: f64) -> ParameterAssignment {
    ParameterAssignment::from_pairs([("lambda", l), ("mu", m), ("alpha", al)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lienard_has_only_the_origin(k in 1usize..=3, coeffs in prop::collection::vec(-5.0f64..5.0, 7)) {
        let sys = build_lienard_symbolic(k).unwrap();
        let eqs = find_equilibria(&sys, &lienard_assignment(k, &coeffs), &Region::default()).unwrap();
        prop_assert_eq!(eqs.len(), 1);
        prop_assert_eq!(eqs[0].location, [0.0, 0.0]);
        prop_assert_eq!(eqs[0].determinant, 1.0);
    }

    #[test]
    fn cubic_equilibria_are_rigid(l in -3.0f64..3.0, m in -3.0f64..3.0, al in -3.0f64..3.0) {
        let eqs = find_equilibria(&build_cubic_symbolic().unwrap(), &cubic(l, m, al), &Region::default()).unwrap();
        let xs: Vec<[f64; 2]> = eqs.iter().map(|e| e.location).collect();
        prop_assert_eq!(xs, vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let signs: Vec<f64> = eqs.iter().map(|e| e.determinant.signum()).collect();
        prop_assert_eq!(signs, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn stored_classification_matches_jacobian(l in -3.0f64..3.0, m in -3.0f64..3.0, al in -3.0f64..3.0, k in 1usize..=3, c in prop::collection::vec(-2.0f64..2.0, 7)) {
        let mut eqs = find_equilibria(&build_cubic_symbolic().unwrap(), &cubic(l, m, al), &Region::default()).unwrap();
        eqs.extend(find_equilibria(&build_lienard_symbolic(k).unwrap(), &lienard_assignment(k, &c), &Region::default()).unwrap());
        for e in eqs {
            let j = e.jacobian;
            prop_assert_eq!((j[0][0] + j[1][1]).to_bits(), e.trace.to_bits());
            prop_assert_eq!((j[0][0] * j[1][1] - j[0][1] * j[1][0]).to_bits(), e.determinant.to_bits());
            prop_assert_eq!(classify(e.trace, e.determinant), e.kind);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn infinity_depends_only_on_top_form(k in 1usize..=3, a in prop::collection::vec(-5.0f64..5.0, 7), b in prop::collection::vec(-5.0f64..5.0, 7), top in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0]) {
        let sys = build_lienard_symbolic(k).unwrap();
        let top_name = format!("mu{}", 2 * k + 1);
        let first = classify_infinity(&sys, &lienard_assignment(k, &a).with(&top_name, top)).unwrap();
        let second = classify_infinity(&sys, &lienard_assignment(k, &b).with(&top_name, top)).unwrap();
        let dirs = |v: &[lienard_core::polysys::InfinitySingularity]| v.iter().map(|s| (s.direction, s.kind)).collect::<Vec<_>>();
        prop_assert_eq!(dirs(&first), dirs(&second));
    }
}

#[test]
fn cubic_prints_exact_rationals() {
    let text = build_cubic_symbolic().unwrap().to_string();
    assert!(text.contains("3/2*x^2"), "{text}");
    assert!(text.contains("1/2*x^3"), "{text}");
}
