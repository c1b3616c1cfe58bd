use lienard_core::cycles::return_map;
use lienard_core::integrate::{Anchor, IntegratorConfig, Section};
use lienard_core::polysys::{
    build_canonical, build_lienard, build_lienard_symbolic, Entry, Instance, ParamCoefficient, ParamPolynomial, ParameterAssignment,
};
use lienard_core::rotation::{reversibility_center_check, rotation_determinant, semidefinite_verdict, Definiteness};
use num::{BigInt, BigRational, Signed};
use proptest::prelude::*;

fn y_pow(n: u32) -> ParamPolynomial {
    ParamPolynomial::monomial(0, n)
}

#[test]
fn odd_parameters_give_even_powers_of_y() {
    for k in 1..=5 {
        let sys = build_canonical(k).unwrap();
        for i in 0..=k as u32 {
            let delta = rotation_determinant(&sys, &format!("mu{}", 2 * i + 1)).unwrap();
            // P = y and dQ/dmu = y^(2i+1).
            assert_eq!(delta, y_pow(2 * i + 2), "k = {k}, i = {i}");
            assert_eq!(semidefinite_verdict(&delta).unwrap().verdict, Definiteness::Psd);
        }
    }
}

#[test]
fn even_parameters_are_indefinite() {
    for k in 1..=5 {
        let sys = build_lienard_symbolic(k).unwrap();
        for i in 1..=k as u32 {
            let delta = rotation_determinant(&sys, &format!("mu{}", 2 * i)).unwrap();
            assert_eq!(delta, y_pow(2 * i + 1));
            let v = semidefinite_verdict(&delta).unwrap();
            assert_eq!(v.verdict, Definiteness::Indefinite);
            assert!(v.witness.is_some());
        }
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn polynomial(terms: &[((u32, u32), i64)]) -> ParamPolynomial {
    ParamPolynomial::from_terms(terms.iter().map(|&(m, c)| (m, ParamCoefficient::constant(rat(c, 1)))))
}

/// Deterministic stream of rational points with numerators in [-60, 60] and denominators in [1, 40].
fn points(seed: u64, n: usize) -> Vec<(BigRational, BigRational)> {
    let mut state = seed | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    (0..n)
        .map(|_| {
            let mut r = || rat((next() % 121) as i64 - 60, (next() % 40) as i64 + 1);
            (r(), r())
        })
        .collect()
}

fn term() -> impl Strategy<Value = ((u32, u32), i64)> {
    ((0u32..4, 0u32..4), -5i64..=5)
}

fn even_term(sign: i64) -> impl Strategy<Value = ((u32, u32), i64)> {
    ((0u32..3, 0u32..3), 0i64..=5).prop_map(move |((i, j), c)| ((2 * i, 2 * j), sign * c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn verdicts_are_sound(
        terms in prop_oneof![
            prop::collection::vec(term(), 1..5),
            prop::collection::vec(even_term(1), 1..5),
            prop::collection::vec(even_term(-1), 1..5),
        ],
        seed in any::<u64>(),
    ) {
        let p = polynomial(&terms);
        let v = semidefinite_verdict(&p).unwrap();
        match v.verdict {
            Definiteness::Psd | Definiteness::Nsd => {
                let want_nonneg = v.verdict == Definiteness::Psd;
                for (x, y) in points(seed, 10_000) {
                    let val = p.eval_exact(&x, &y).unwrap();
                    if want_nonneg {
                        prop_assert!(!val.is_negative());
                    } else {
                        prop_assert!(!val.is_positive());
                    }
                }
            }
            Definiteness::Indefinite => {
                let w = v.witness.unwrap();
                prop_assert!(p.eval_exact(&w.positive[0], &w.positive[1]).unwrap().is_positive());
                prop_assert!(p.eval_exact(&w.negative[0], &w.negative[1]).unwrap().is_negative());
            }
            // No certificate and no witness: nothing is claimed.
            Definiteness::Unknown => {}
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reversible_systems_have_vanishing_displacement(mu2 in -0.5f64..0.5, mu4 in -0.5f64..0.5, s in 0.02f64..0.3) {
        let sys = build_lienard(2, &[Entry::int(0), Entry::int(0), Entry::int(0)], &[Entry::sym("mu2"), Entry::sym("mu4")]).unwrap();
        let a = ParameterAssignment::from_pairs([("mu2", mu2), ("mu4", mu4)]);
        prop_assert!(reversibility_center_check(&sys, &a).unwrap());
        let inst = Instance::new(&sys, &a).unwrap();
        let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).unwrap();
        let cfg = IntegratorConfig::verification();
        let r = return_map(&inst, &section, s, &cfg).unwrap();
        prop_assert!(r.is_ok());
        prop_assert!(r.displacement.abs() <= 100.0 * (cfg.atol + cfg.rtol * s.max(1.0)), "d = {:e}", r.displacement);
    }
}
